//! c-transforms, c-concavity, superdifferentials and customer choice.
//!
//! Conventions: `kernel.cost(x, y)` is the cost for a customer at `x` to
//! shop at `y`. The c-transform of a function `v` on customers is a function
//! on shops,
//!
//! ```text
//! v^c(y) = min_x { c(x, y) - v(x) }      (x ranges over the whole region)
//! ```
//!
//! and the envelope of a shop function `u` supported on a set `S` is
//!
//! ```text
//! env_S(u)(x) = min_{y in S} { c(x, y) - u(y) }.
//! ```
//!
//! A function is c-concave relative to `S` exactly when it equals
//! `env_S(v^c restricted to S)`. With `S` the whole region this is ordinary
//! c-concavity; with `S` the free subregion it is (Q1, c)-concavity.

use crate::error::{Error, Result};
use crate::geometry::{CostKernel, PricePattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    /// c-concave with respect to the whole region.
    Full,
    /// c-concave with generators restricted to the free subregion.
    Subregion,
}

/// A customer value function (minimal expenditure, or a candidate for it).
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    values: Vec<f64>,
    kind: ValueKind,
}

impl ValueFunction {
    pub fn new(values: Vec<f64>, kind: ValueKind) -> Self {
        Self { values, kind }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `v_p(x) = min_{y in S} c(x, y) + p(y)`, skipping unbounded prices.
/// `restrict_to = None` means `S` is the whole region.
pub fn value_function(
    p: &PricePattern,
    kernel: &CostKernel,
    restrict_to: Option<&[usize]>,
) -> Result<ValueFunction> {
    let all: Vec<usize>;
    let shops = match restrict_to {
        Some(s) => s,
        None => {
            all = (0..kernel.len()).collect();
            &all
        }
    };
    if !p.is_proper_on(shops) {
        return Err(Error::ImproperPrice);
    }
    let values = (0..kernel.len())
        .map(|x| {
            let row = kernel.row(x);
            shops
                .iter()
                .filter_map(|&y| p.get(y).plus(row[y]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let kind = if restrict_to.is_some() {
        ValueKind::Subregion
    } else {
        ValueKind::Full
    };
    Ok(ValueFunction::new(values, kind))
}

/// Finite-price version of [`value_function`] for the hot loops of the
/// searches: `prices[k]` is the price at `shops[k]`.
pub fn value_from_prices(kernel: &CostKernel, shops: &[usize], prices: &[f64]) -> Vec<f64> {
    (0..kernel.len())
        .map(|x| {
            let row = kernel.row(x);
            shops
                .iter()
                .zip(prices)
                .map(|(&y, &p)| row[y] + p)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `v^c(y) = min_x c(x, y) - v(x)` for every `y` in `target`, aligned with
/// `target`.
pub fn c_transform(v: &[f64], kernel: &CostKernel, target: &[usize]) -> Vec<f64> {
    target
        .iter()
        .map(|&y| {
            v.iter()
                .enumerate()
                .map(|(x, vx)| kernel.cost(x, y) - vx)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `x -> min_{y in support} c(x, y) - u(y)` over the whole region, where
/// `u[k]` is the value at `support[k]`.
pub fn c_envelope(u: &[f64], support: &[usize], kernel: &CostKernel) -> Vec<f64> {
    (0..kernel.len())
        .map(|x| {
            let row = kernel.row(x);
            support
                .iter()
                .zip(u)
                .map(|(&y, uy)| row[y] - uy)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `(v^c)^c` relative to `within`: the smallest function above `v` that is
/// c-concave with generators in `within`.
pub fn double_transform(v: &[f64], kernel: &CostKernel, within: &[usize]) -> Vec<f64> {
    c_envelope(&c_transform(v, kernel, within), within, kernel)
}

/// Transform of `v` on a fixed shop set, kept around so superdifferentials
/// at many points share one O(n^2) pass.
#[derive(Debug, Clone)]
pub struct Conjugate {
    within: Vec<usize>,
    values: Vec<f64>,
}

impl Conjugate {
    pub fn new(v: &[f64], kernel: &CostKernel, within: &[usize]) -> Self {
        Self {
            within: within.to_vec(),
            values: c_transform(v, kernel, within),
        }
    }

    /// Wraps an already computed transform (`values[k]` at `within[k]`).
    pub fn from_parts(within: Vec<usize>, values: Vec<f64>) -> Self {
        Self { within, values }
    }

    pub fn within(&self) -> &[usize] {
        &self.within
    }

    /// Values aligned with [`Conjugate::within`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `{ y in within : |v(x) + v^c(y) - c(x, y)| <= tol }`.
    pub fn superdifferential(
        &self,
        v: &[f64],
        kernel: &CostKernel,
        x: usize,
        tol: f64,
    ) -> Result<Vec<usize>> {
        let row = kernel.row(x);
        let out: Vec<usize> = self
            .within
            .iter()
            .zip(&self.values)
            .filter(|(&y, &vc)| (v[x] + vc - row[y]).abs() <= tol)
            .map(|(&y, _)| y)
            .collect();
        if out.is_empty() {
            Err(Error::NotCConcave { point: x })
        } else {
            Ok(out)
        }
    }

    /// `min { c(x, y) : y in superdifferential(x) }`.
    pub fn min_transport(&self, v: &[f64], kernel: &CostKernel, x: usize, tol: f64) -> Result<f64> {
        let row = kernel.row(x);
        let mut best = f64::INFINITY;
        for (&y, &vc) in self.within.iter().zip(&self.values) {
            if (v[x] + vc - row[y]).abs() <= tol {
                best = best.min(row[y]);
            }
        }
        if best.is_finite() {
            Ok(best)
        } else {
            Err(Error::NotCConcave { point: x })
        }
    }
}

/// c-superdifferential of `v` at `x` relative to `within`.
pub fn superdifferential(
    v: &ValueFunction,
    kernel: &CostKernel,
    x: usize,
    within: &[usize],
    tol: f64,
) -> Result<Vec<usize>> {
    Conjugate::new(v.values(), kernel, within).superdifferential(v.values(), kernel, x, tol)
}

/// `max |(v^c)^c - v| <= tol`, with both transforms relative to `within`.
pub fn is_c_concave(v: &[f64], kernel: &CostKernel, within: &[usize], tol: f64) -> bool {
    max_concavity_defect(v, kernel, within) <= tol
}

/// `max |(v^c)^c - v|`; zero exactly for c-concave functions.
pub fn max_concavity_defect(v: &[f64], kernel: &CostKernel, within: &[usize]) -> f64 {
    double_transform(v, kernel, within)
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Customer behaviour under a price pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMap {
    /// `T_p(x)`: every shop attaining the minimal expenditure (within tol).
    pub argmin: Vec<Vec<usize>>,
    /// Tie-broken shop, `None` when no admissible shop is in `T_p(x)`.
    pub choice: Vec<Option<usize>>,
    /// `v_p(x)`.
    pub expenditure: Vec<f64>,
}

impl AssignmentMap {
    pub fn len(&self) -> usize {
        self.expenditure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expenditure.is_empty()
    }
}

/// Minimal expenditure and argmin sets over `shops`, with the choice made by
/// [`tie_break`] among the argmin points that also lie in `admissible`.
pub fn assign(
    p: &PricePattern,
    kernel: &CostKernel,
    shops: &[usize],
    admissible: Option<&[bool]>,
) -> Result<AssignmentMap> {
    let v = value_function(p, kernel, Some(shops))?;
    let tol = kernel.tol();
    let n = kernel.len();
    let mut argmin = Vec::with_capacity(n);
    let mut choice = Vec::with_capacity(n);
    for x in 0..n {
        let row = kernel.row(x);
        let t: Vec<usize> = shops
            .iter()
            .copied()
            .filter(|&y| p.get(y).plus(row[y]).is_some_and(|e| e <= v.at(x) + tol))
            .collect();
        choice.push(tie_break(&t, p, admissible, tol));
        argmin.push(t);
    }
    Ok(AssignmentMap {
        argmin,
        choice,
        expenditure: v.into_values(),
    })
}

/// Price-maximising (equivalently transport-minimising) pick among
/// `candidates` that pass the `admissible` mask. Prices equal within `tol`
/// resolve to the smallest index. `None` when nothing is admissible.
pub fn tie_break(
    candidates: &[usize],
    p: &PricePattern,
    admissible: Option<&[bool]>,
    tol: f64,
) -> Option<usize> {
    let mut sorted: Vec<usize> = candidates
        .iter()
        .copied()
        .filter(|&y| admissible.is_none_or(|m| m[y]))
        .collect();
    sorted.sort_unstable();
    let mut best: Option<(usize, f64)> = None;
    for y in sorted {
        let Some(py) = p.get(y).finite() else {
            continue;
        };
        match best {
            Some((_, b)) if py <= b + tol => {}
            _ => best = Some((y, py)),
        }
    }
    best.map(|(y, _)| y)
}
