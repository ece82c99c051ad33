//! Whole-region pricing: the agent sets every price subject to an upper
//! bound `p0`, customers minimise price plus transport.
//!
//! The price-side profit `F(p)` and the value-side profit `I(v)` agree on
//! `p = -v^c` for c-concave `v`, which is what the general solver exploits:
//! it searches generator prices, projects the induced value function onto
//! `{ v c-concave, 0 <= v <= v0 }` and scores it with `I`.

use serde::{Deserialize, Serialize};

use crate::ctransform::{self, AssignmentMap, Conjugate, ValueFunction, ValueKind};
use crate::error::{Error, Result};
use crate::geometry::{CostKernel, CostKind, CustomerMeasure, PricePattern, Region};
use crate::search::{self, Diagnostics, SearchConfig, SearchMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelOneMethod {
    MetricClosedForm,
    GeneralSearch,
    Quadratic1dReference,
}

#[derive(Debug, Clone)]
pub struct ModelOneReport {
    pub optimal_price: PricePattern,
    pub optimal_value: ValueFunction,
    pub profit: f64,
    pub assignment: AssignmentMap,
    pub method: ModelOneMethod,
    pub diagnostics: Diagnostics,
}

/// `F(p) = sum_x f(x) * max { p(y) : y in T_p(x) }`.
pub fn profit_f(p: &PricePattern, kernel: &CostKernel, f: &CustomerMeasure) -> Result<f64> {
    let all: Vec<usize> = (0..kernel.len()).collect();
    let a = ctransform::assign(p, kernel, &all, None)?;
    Ok(profit_from_assignment(&a, p, f))
}

fn profit_from_assignment(a: &AssignmentMap, p: &PricePattern, f: &CustomerMeasure) -> f64 {
    a.choice
        .iter()
        .enumerate()
        .filter_map(|(x, c)| c.map(|y| f.weight(x) * p.at(y)))
        .sum()
}

/// `I(v) = sum_x f(x) * (v(x) - min { c(x, y) : y in d^c v(x) })`.
/// Rejects functions that are not c-concave.
pub fn profit_i(v: &ValueFunction, kernel: &CostKernel, f: &CustomerMeasure) -> Result<f64> {
    let all: Vec<usize> = (0..kernel.len()).collect();
    let tol = kernel.tol();
    let conj = Conjugate::new(v.values(), kernel, &all);
    let back = ctransform::c_envelope(conj.values(), &all, kernel);
    if let Some(x) = back
        .iter()
        .zip(v.values())
        .position(|(a, b)| (a - b).abs() > tol)
    {
        return Err(Error::NotCConcave { point: x });
    }
    let mut total = 0.0;
    for x in 0..kernel.len() {
        total += f.weight(x) * (v.at(x) - conj.min_transport(v.values(), kernel, x, tol)?);
    }
    Ok(total)
}

/// Largest useful price at each point: `min(p0(y), max_x v0(x) - c(x, y))`,
/// floored at zero. No customer pays more than this at `y` under any
/// admissible pattern, and the value is finite even where `p0 = +inf`.
pub fn price_caps(p0: &PricePattern, kernel: &CostKernel, v0: &[f64]) -> Vec<f64> {
    (0..kernel.len())
        .map(|y| {
            let reach = v0
                .iter()
                .enumerate()
                .map(|(x, vx)| vx - kernel.cost(x, y))
                .fold(f64::NEG_INFINITY, f64::max);
            let cap = match p0.get(y).finite() {
                Some(b) => reach.min(b),
                None => reach,
            };
            cap.max(0.0)
        })
        .collect()
}

/// Closed form for metric costs: `p_opt(x) = min_y p0(y) + d(x, y)`, the
/// largest 1-Lipschitz minorant of `p0`. Independent of `f`; `f` only enters
/// the reported profit.
pub fn solve_metric(
    p0: &PricePattern,
    kernel: &CostKernel,
    f: &CustomerMeasure,
) -> Result<ModelOneReport> {
    if !kernel.is_metric() {
        return Err(Error::NotApplicable(format!(
            "closed form needs a metric cost, got {:?}",
            kernel.kind()
        )));
    }
    let prices = ctransform::value_function(p0, kernel, None)?.into_values();
    let optimal_price = PricePattern::finite(prices)?;
    let optimal_value = ValueFunction::new(
        ctransform::value_function(&optimal_price, kernel, None)?.into_values(),
        ValueKind::Full,
    );
    let all: Vec<usize> = (0..kernel.len()).collect();
    let assignment = ctransform::assign(&optimal_price, kernel, &all, None)?;
    let profit = profit_from_assignment(&assignment, &optimal_price, f);
    Ok(ModelOneReport {
        optimal_price,
        optimal_value,
        profit,
        assignment,
        method: ModelOneMethod::MetricClosedForm,
        diagnostics: Diagnostics {
            evaluations: 1,
            space_size: 1.0,
            ..Diagnostics::default()
        },
    })
}

/// Projection of the generator `prices` (one per point) onto the admissible
/// value functions, returning `(v, v^c)`.
fn project(prices: &[f64], kernel: &CostKernel, all: &[usize], v0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v = ctransform::value_from_prices(kernel, all, prices);
    for (vx, bound) in v.iter_mut().zip(v0) {
        *vx = vx.clamp(0.0, *bound);
    }
    // the transform of the clamped function is also the transform of its
    // double transform, so one pass serves both
    let vc = ctransform::c_transform(&v, kernel, all);
    let v = ctransform::c_envelope(&vc, all, kernel);
    (v, vc)
}

fn project_value(
    vals: &[f64],
    kernel: &CostKernel,
    all: &[usize],
    v0: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let v: Vec<f64> = vals.iter().zip(v0).map(|(x, b)| x.clamp(0.0, *b)).collect();
    let vc = ctransform::c_transform(&v, kernel, all);
    let v = ctransform::c_envelope(&vc, all, kernel);
    (v, vc)
}

fn score(v: &[f64], vc: &[f64], kernel: &CostKernel, f: &CustomerMeasure, tol: f64) -> f64 {
    let mut total = 0.0;
    for (x, vx) in v.iter().enumerate() {
        let w = f.weight(x);
        if w == 0.0 {
            continue;
        }
        let row = kernel.row(x);
        let mut best = f64::INFINITY;
        for (y, &c) in row.iter().enumerate() {
            if (vx + vc[y] - c).abs() <= tol && c < best {
                best = c;
            }
        }
        if !best.is_finite() {
            return f64::NEG_INFINITY;
        }
        total += w * (vx - best);
    }
    total
}

struct ValueLandscape<'a> {
    kernel: &'a CostKernel,
    f: &'a CustomerMeasure,
    all: &'a [usize],
    v0: &'a [f64],
    price_caps: &'a [f64],
    tol: f64,
}

impl search::Landscape for ValueLandscape<'_> {
    fn caps(&self) -> &[f64] {
        self.v0
    }

    fn dual_caps(&self) -> &[f64] {
        self.price_caps
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        project_value(x, self.kernel, self.all, self.v0).0
    }

    fn to_dual(&self, x: &[f64]) -> Vec<f64> {
        let vc = ctransform::c_transform(x, self.kernel, self.all);
        vc.iter()
            .zip(self.price_caps)
            .map(|(u, cap)| (-u).clamp(0.0, *cap))
            .collect()
    }

    fn from_dual(&self, d: &[f64]) -> Vec<f64> {
        project(d, self.kernel, self.all, self.v0).0
    }

    fn score(&self, x: &[f64]) -> f64 {
        let vc = ctransform::c_transform(x, self.kernel, self.all);
        score(x, &vc, self.kernel, self.f, self.tol)
    }

    /// Among equally profitable value functions, the one with the lowest
    /// prices (largest conjugate) is preferred.
    fn secondary(&self, x: &[f64]) -> f64 {
        let vc = ctransform::c_transform(x, self.kernel, self.all);
        vc.iter()
            .enumerate()
            .map(|(y, u)| self.f.weight(y) * u)
            .sum()
    }

    fn polish(&self, x: &[f64]) -> Vec<f64> {
        let prices = self.to_dual(x);
        let Ok(p) = PricePattern::finite(prices.clone()) else {
            return x.to_vec();
        };
        let Ok(a) = ctransform::assign(&p, self.kernel, self.all, None) else {
            return x.to_vec();
        };
        match raise_prices(&a.choice, self.all, self.kernel, self.price_caps, self.v0) {
            Some(raised) => self.from_dual(&raised),
            None => x.to_vec(),
        }
    }
}

/// Largest prices on `shops` keeping every customer's current choice
/// optimal among `shops`, below `caps` (aligned with `shops`) and keeping each
/// captured customer's expenditure within `v0`. Every constraint is a
/// difference bound, so the componentwise maximum exists and follows from
/// Bellman-Ford relaxation from the caps. Returns `None` on a negative cycle,
/// which only happens when `choice` was not an optimal assignment.
pub(crate) fn raise_prices(
    choice: &[Option<usize>],
    shops: &[usize],
    kernel: &CostKernel,
    caps: &[f64],
    v0: &[f64],
) -> Option<Vec<f64>> {
    let mut slot = vec![usize::MAX; kernel.len()];
    for (k, &y) in shops.iter().enumerate() {
        slot[y] = k;
    }
    let mut p: Vec<f64> = caps.to_vec();
    let captured: Vec<(usize, usize)> = choice
        .iter()
        .enumerate()
        .filter_map(|(x, c)| c.map(|a| (x, a)))
        .filter(|&(_, a)| slot[a] != usize::MAX)
        .collect();
    for &(x, a) in &captured {
        p[slot[a]] = p[slot[a]].min(v0[x] - kernel.cost(x, a));
    }
    if p.iter().any(|&u| u < -kernel.tol()) {
        return None;
    }
    for _ in 0..=shops.len() {
        let mut changed = false;
        for &(x, a) in &captured {
            let (ka, base) = (slot[a], kernel.cost(x, a));
            for (k, &y) in shops.iter().enumerate() {
                let bound = p[k] + kernel.cost(x, y) - base;
                if bound < p[ka] - 1e-15 * (1.0 + p[ka].abs()) {
                    p[ka] = bound;
                    changed = true;
                }
            }
        }
        if !changed {
            return Some(p.into_iter().map(|u| u.max(0.0)).collect());
        }
    }
    None
}

/// Maximises `I` over `{ v c-concave, 0 <= v <= v0 }` by searching generator
/// prices (exhaustive enumeration of `levels` values per point, or multistart
/// coordinate ascent).
pub fn solve_general(
    p0: &PricePattern,
    kernel: &CostKernel,
    f: &CustomerMeasure,
    cfg: &SearchConfig,
) -> Result<ModelOneReport> {
    cfg.validate()?;
    if f.len() != kernel.len() || p0.len() != kernel.len() {
        return Err(Error::InvalidArgument(
            "price bound, measure and kernel sizes differ".into(),
        ));
    }
    let all: Vec<usize> = (0..kernel.len()).collect();
    let tol = kernel.tol();
    let v0 = ctransform::value_function(p0, kernel, None)?.into_values();
    let caps = price_caps(p0, kernel, &v0);
    let objective = |prices: &[f64]| {
        let (v, vc) = project(prices, kernel, &all, &v0);
        score(&v, &vc, kernel, f, tol)
    };
    let outcome = match cfg.mode {
        SearchMode::Exhaustive => {
            let levels: Vec<Vec<f64>> = caps
                .iter()
                .map(|&c| search::uniform_levels(c, cfg.levels))
                .collect();
            search::exhaustive(&levels, cfg.budget, tol, |p| Some(objective(p)))?
        }
        SearchMode::Ascent => {
            let land = ValueLandscape {
                kernel,
                f,
                all: &all,
                v0: &v0,
                price_caps: &caps,
                tol,
            };
            let out = search::dual_ascent(&land, cfg, tol, &[vec![0.0; caps.len()]]);
            let vc = ctransform::c_transform(&out.best, kernel, &all);
            search::SearchOutcome {
                best: vc.iter().map(|u| -u).collect(),
                ..out
            }
        }
    };
    let (v, vc) = project(&outcome.best, kernel, &all, &v0);
    let optimal_price = PricePattern::finite(vc.iter().map(|u| -u).collect())?;
    let assignment = ctransform::assign(&optimal_price, kernel, &all, None)?;
    let profit = profit_from_assignment(&assignment, &optimal_price, f);
    let mut diagnostics = Diagnostics::from(&outcome);
    diagnostics.notes.push(format!(
        "I(v) = {:.17e}, F(p) = {:.17e}",
        outcome.value, profit
    ));
    Ok(ModelOneReport {
        optimal_price,
        optimal_value: ValueFunction::new(v, ValueKind::Full),
        profit,
        assignment,
        method: ModelOneMethod::GeneralSearch,
        diagnostics,
    })
}

/// Quadratic cost on `[0, 1]` with uniform customers and bound
/// `p0(x) = x - x^2/2`: returns `(v_opt, p_opt, q_opt)` at `x`, where
/// `q_opt = (2x - 1)_+` is the derivative of `x^2/2 - v_opt`.
pub fn quadratic_1d_reference(x: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("x = {x} outside [0, 1]")));
    }
    let v = if x <= 0.5 {
        0.5 * x * x
    } else {
        -0.5 * x * x + x - 0.25
    };
    let p = 0.5 * x - 0.25 * x * x;
    let q = (2.0 * x - 1.0).max(0.0);
    Ok((v, p, q))
}

/// Report built from the closed form on an interval region inside `[0, 1]`:
/// prices `x/2 - x^2/4`, profit evaluated on the discrete region with `f`.
pub fn quadratic_1d_report(
    region: &Region,
    kernel: &CostKernel,
    f: &CustomerMeasure,
) -> Result<ModelOneReport> {
    if kernel.kind() != CostKind::Quadratic || region.dim() != 1 {
        return Err(Error::NotApplicable(
            "the reference needs the quadratic cost on an interval".into(),
        ));
    }
    let mut v = Vec::with_capacity(region.len());
    let mut p = Vec::with_capacity(region.len());
    for i in 0..region.len() {
        let (vi, pi, _) = quadratic_1d_reference(region.coord(i))?;
        v.push(vi);
        p.push(pi);
    }
    let optimal_price = PricePattern::finite(p)?;
    let all: Vec<usize> = (0..kernel.len()).collect();
    let assignment = ctransform::assign(&optimal_price, kernel, &all, None)?;
    let profit = profit_from_assignment(&assignment, &optimal_price, f);
    Ok(ModelOneReport {
        optimal_price,
        optimal_value: ValueFunction::new(v, ValueKind::Full),
        profit,
        assignment,
        method: ModelOneMethod::Quadratic1dReference,
        diagnostics: Diagnostics {
            evaluations: 1,
            space_size: 1.0,
            ..Diagnostics::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CostKind, Region};

    fn metric_line(xs: &[f64]) -> CostKernel {
        let r = Region::from_points(xs.iter().map(|&x| [x, 0.0]).collect(), 1, None).unwrap();
        CostKernel::evaluate(CostKind::MetricPower { alpha: 1.0 }, &r).unwrap()
    }

    #[test]
    fn profit_f_two_points() {
        let k = metric_line(&[0.0, 1.0]);
        let f = CustomerMeasure::from_weights(vec![0.5, 0.5]).unwrap();
        let p = PricePattern::finite(vec![0.2, 0.9]).unwrap();
        assert!((profit_f(&p, &k, &f).unwrap() - 0.55).abs() < 1e-15);
        let v = ctransform::value_function(&p, &k, None).unwrap();
        assert!((profit_i(&v, &k, &f).unwrap() - 0.55).abs() < 1e-15);
    }

    #[test]
    fn constant_price_collects_mass() {
        let r = Region::interval(9, 0.0, 1.0, None).unwrap();
        let k = CostKernel::evaluate(CostKind::Quadratic, &r).unwrap();
        let f = CustomerMeasure::from_weights(vec![0.3; 9]).unwrap();
        let p = PricePattern::constant(9, 0.7).unwrap();
        assert!((profit_f(&p, &k, &f).unwrap() - 0.7 * 2.7).abs() < 1e-12);
    }

    #[test]
    fn profit_i_rejects_non_concave() {
        let k = metric_line(&[0.0, 1.0]);
        let f = CustomerMeasure::from_weights(vec![1.0, 1.0]).unwrap();
        let v = ValueFunction::new(vec![0.0, 2.0], ValueKind::Full);
        assert!(matches!(
            profit_i(&v, &k, &f),
            Err(Error::NotCConcave { .. })
        ));
        let zero = ValueFunction::new(vec![0.0, 0.0], ValueKind::Full);
        assert_eq!(profit_i(&zero, &k, &f).unwrap(), 0.0);
    }

    #[test]
    fn metric_closed_form_from_single_bound() {
        let r = Region::interval(11, 0.0, 1.0, None).unwrap();
        let k = CostKernel::evaluate(CostKind::MetricPower { alpha: 1.0 }, &r).unwrap();
        let p0 = PricePattern::supported_on(11, &[0], &[1.0]).unwrap();
        let rep = solve_metric(&p0, &k, &CustomerMeasure::uniform(&r)).unwrap();
        for i in 0..11 {
            assert!((rep.optimal_price.at(i) - (1.0 + r.coord(i))).abs() < 1e-12);
        }
        // trapezoid weights integrate 1 + x exactly
        assert!((rep.profit - 1.5).abs() < 1e-12);
    }

    #[test]
    fn metric_closed_form_keeps_lipschitz_bound() {
        let k = metric_line(&[0.0, 0.3, 0.5, 0.9]);
        let p0 = PricePattern::finite(vec![0.1, 0.35, 0.2, 0.55]).unwrap();
        let rep = solve_metric(
            &p0,
            &k,
            &CustomerMeasure::from_weights(vec![1.0; 4]).unwrap(),
        )
        .unwrap();
        assert_eq!(rep.optimal_price, p0);
    }

    #[test]
    fn metric_closed_form_rejects_quadratic() {
        let r = Region::interval(3, 0.0, 1.0, None).unwrap();
        let k = CostKernel::evaluate(CostKind::Quadratic, &r).unwrap();
        let p0 = PricePattern::constant(3, 1.0).unwrap();
        assert!(matches!(
            solve_metric(&p0, &k, &CustomerMeasure::uniform(&r)),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn zero_bound_gives_zero() {
        let r = Region::interval(5, 0.0, 1.0, None).unwrap();
        let k = CostKernel::evaluate(CostKind::Quadratic, &r).unwrap();
        let p0 = PricePattern::constant(5, 0.0).unwrap();
        let rep = solve_general(
            &p0,
            &k,
            &CustomerMeasure::uniform(&r),
            &SearchConfig::exhaustive(4),
        )
        .unwrap();
        assert_eq!(rep.profit, 0.0);
        assert!(rep
            .optimal_price
            .to_finite()
            .unwrap()
            .iter()
            .all(|&p| p == 0.0));
    }

    #[test]
    fn exhaustive_budget_is_enforced() {
        let r = Region::interval(12, 0.0, 1.0, None).unwrap();
        let k = CostKernel::evaluate(CostKind::Quadratic, &r).unwrap();
        let p0 = PricePattern::constant(12, 1.0).unwrap();
        let cfg = SearchConfig::exhaustive(8);
        assert!(matches!(
            solve_general(&p0, &k, &CustomerMeasure::uniform(&r), &cfg),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn quadratic_reference_values() {
        assert_eq!(quadratic_1d_reference(0.0).unwrap(), (0.0, 0.0, 0.0));
        assert_eq!(quadratic_1d_reference(0.5).unwrap(), (0.125, 0.1875, 0.0));
        assert_eq!(quadratic_1d_reference(1.0).unwrap(), (0.25, 0.25, 1.0));
        assert!(quadratic_1d_reference(1.5).is_err());
    }
}
