//! Discrete economic regions, transportation cost tables, customer measures
//! and price patterns.
//!
//! Every other module works on a finite point set. A [`Region`] carries the
//! coordinates together with a per-point role: [`Mask::Fixed`] points form
//! the fixed-price subregion, [`Mask::Free`] points are priced by the agent,
//! and [`Mask::None`] marks a region without partition. Lower
//! semicontinuity of prices is automatic on a finite set, so price patterns
//! only have to be real or `+inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates of a point. One-dimensional regions leave the second slot at 0.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mask {
    /// Price is imposed (the fixed subregion).
    Fixed,
    /// Price is chosen by the agent.
    Free,
    /// No partition in use.
    None,
}

impl Mask {
    pub fn is_fixed(self) -> bool {
        matches!(self, Mask::Fixed)
    }

    /// Free and unpartitioned points are both price-controlled.
    pub fn is_free(self) -> bool {
        !self.is_fixed()
    }
}

/// How the points are laid out; decides adjacency for boundary marking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Layout {
    /// Equally spaced points on `[a, b]`.
    Interval { a: f64, b: f64 },
    /// Axis-aligned `nx * ny` grid, row-major (`index = iy * nx + ix`).
    Grid { nx: usize, ny: usize },
    /// Arbitrary point list without adjacency.
    Scattered,
}

/// Axis-aligned window `[x0, x1] x [y0, y1]` used to carve a fixed subregion
/// out of a grid. Points strictly inside are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window2 {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

/// A finite economic region.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    points: Vec<Point>,
    dim: usize,
    masks: Vec<Mask>,
    boundary: Vec<bool>,
    layout: Layout,
}

impl Region {
    /// `n` equally spaced points on `[a, b]`. Points strictly inside the
    /// optional window `(alpha, beta)` are fixed, all others are free.
    pub fn interval(n: usize, a: f64, b: f64, window: Option<(f64, f64)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidRegion(format!(
                "need at least 2 points, got {n}"
            )));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidRegion(format!(
                "bounds must satisfy a < b, got [{a}, {b}]"
            )));
        }
        let h = (b - a) / (n - 1) as f64;
        let points: Vec<Point> = (0..n)
            .map(|i| {
                // pin the last point to b exactly
                let x = if i == n - 1 { b } else { a + i as f64 * h };
                [x, 0.0]
            })
            .collect();
        let masks = match window {
            None => vec![Mask::Free; n],
            Some((lo, hi)) => {
                if !(lo.is_finite() && hi.is_finite() && a <= lo && lo < hi && hi <= b) {
                    return Err(Error::InvalidRegion(format!(
                        "window ({lo}, {hi}) must satisfy {a} <= alpha < beta <= {b}"
                    )));
                }
                let eps = 1e-12 * (b - a);
                points
                    .iter()
                    .map(|p| {
                        if p[0] > lo + eps && p[0] < hi - eps {
                            Mask::Fixed
                        } else {
                            Mask::Free
                        }
                    })
                    .collect()
            }
        };
        Self::assemble(points, 1, masks, Layout::Interval { a, b })
    }

    /// `nx * ny` grid over `[x0, x1] x [y0, y1]`, optionally with a
    /// rectangular fixed window.
    pub fn grid(
        nx: usize,
        ny: usize,
        xs: (f64, f64),
        ys: (f64, f64),
        window: Option<Window2>,
    ) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidRegion(format!(
                "grid needs nx, ny >= 2, got {nx}x{ny}"
            )));
        }
        for (lo, hi) in [xs, ys] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidRegion(format!(
                    "grid bounds must satisfy lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        let hx = (xs.1 - xs.0) / (nx - 1) as f64;
        let hy = (ys.1 - ys.0) / (ny - 1) as f64;
        let mut points = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let x = if ix == nx - 1 {
                    xs.1
                } else {
                    xs.0 + ix as f64 * hx
                };
                let y = if iy == ny - 1 {
                    ys.1
                } else {
                    ys.0 + iy as f64 * hy
                };
                points.push([x, y]);
            }
        }
        let masks = match window {
            None => vec![Mask::Free; nx * ny],
            Some(w) => {
                let inside = |v: f64, (lo, hi): (f64, f64), eps: f64| v > lo + eps && v < hi - eps;
                let (ex, ey) = (1e-12 * (xs.1 - xs.0), 1e-12 * (ys.1 - ys.0));
                points
                    .iter()
                    .map(|p| {
                        if inside(p[0], w.x, ex) && inside(p[1], w.y, ey) {
                            Mask::Fixed
                        } else {
                            Mask::Free
                        }
                    })
                    .collect()
            }
        };
        Self::assemble(points, 2, masks, Layout::Grid { nx, ny })
    }

    /// Arbitrary point list. Without masks every point is unpartitioned.
    pub fn from_points(points: Vec<Point>, dim: usize, masks: Option<Vec<Mask>>) -> Result<Self> {
        let n = points.len();
        let masks = masks.unwrap_or_else(|| vec![Mask::None; n]);
        Self::assemble(points, dim, masks, Layout::Scattered)
    }

    /// Same points and layout with a new partition.
    pub fn with_masks(&self, masks: Vec<Mask>) -> Result<Self> {
        Self::assemble(self.points.clone(), self.dim, masks, self.layout)
    }

    fn assemble(points: Vec<Point>, dim: usize, masks: Vec<Mask>, layout: Layout) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidRegion("region has no points".into()));
        }
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidRegion(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if masks.len() != points.len() {
            return Err(Error::InvalidRegion(format!(
                "{} masks for {} points",
                masks.len(),
                points.len()
            )));
        }
        if points
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidRegion("non-finite coordinate".into()));
        }
        let any_fixed = masks.iter().any(|m| m.is_fixed());
        if any_fixed {
            if masks.contains(&Mask::None) {
                return Err(Error::InvalidRegion(
                    "cannot mix unpartitioned points with a partition".into(),
                ));
            }
            if !masks.contains(&Mask::Free) {
                return Err(Error::InvalidRegion(
                    "a partition needs at least one free point".into(),
                ));
            }
        }
        let mut region = Region {
            boundary: vec![false; points.len()],
            points,
            dim,
            masks,
            layout,
        };
        region.boundary = region.mark_boundary();
        Ok(region)
    }

    // Discrete boundary of the fixed subregion: free points with a fixed
    // neighbour. Scattered layouts have no adjacency, so every free point
    // counts as a boundary point once a fixed point exists.
    fn mark_boundary(&self) -> Vec<bool> {
        let n = self.len();
        if !self.masks.iter().any(|m| m.is_fixed()) {
            return vec![false; n];
        }
        (0..n)
            .map(|i| {
                if self.masks[i].is_fixed() {
                    return false;
                }
                match self.layout {
                    Layout::Scattered => true,
                    _ => self
                        .neighbors(i)
                        .into_iter()
                        .any(|j| self.masks[j].is_fixed()),
                }
            })
            .collect()
    }

    /// Lattice neighbours (1D: left/right, 2D: 4-neighbourhood).
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let n = self.len();
        match self.layout {
            Layout::Interval { .. } => {
                let mut out = Vec::with_capacity(2);
                if i > 0 {
                    out.push(i - 1);
                }
                if i + 1 < n {
                    out.push(i + 1);
                }
                out
            }
            Layout::Grid { nx, ny } => {
                let (ix, iy) = (i % nx, i / nx);
                let mut out = Vec::with_capacity(4);
                if ix > 0 {
                    out.push(i - 1);
                }
                if ix + 1 < nx {
                    out.push(i + 1);
                }
                if iy > 0 {
                    out.push(i - nx);
                }
                if iy + 1 < ny {
                    out.push(i + nx);
                }
                out
            }
            Layout::Scattered => Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    /// First coordinate of point `i`.
    pub fn coord(&self, i: usize) -> f64 {
        self.points[i][0]
    }

    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }

    pub fn mask(&self, i: usize) -> Mask {
        self.masks[i]
    }

    pub fn is_partitioned(&self) -> bool {
        self.masks.iter().any(|m| m.is_fixed())
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    pub fn fixed_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.masks[i].is_fixed())
            .collect()
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.masks[i].is_free())
            .collect()
    }

    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.boundary[i]).collect()
    }

    /// Grid spacing along the first axis for structured layouts.
    pub fn spacing(&self) -> Option<f64> {
        match self.layout {
            Layout::Interval { a, b } => Some((b - a) / (self.len() - 1) as f64),
            Layout::Grid { nx, .. } => {
                Some((self.points[nx - 1][0] - self.points[0][0]) / (nx - 1) as f64)
            }
            Layout::Scattered => None,
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (p, q) = (self.points[i], self.points[j]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostKind {
    /// `|x - y|^alpha` with `alpha` in `(0, 1]`; a metric.
    MetricPower { alpha: f64 },
    /// `|x - y|^2 / 2`.
    Quadratic,
    /// User-supplied table.
    CustomTable,
}

/// Transportation cost as a dense `|Q| x |Q|` table. `cost(x, y)` is the
/// cost for a customer living at `x` to shop at `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostKernel {
    kind: CostKind,
    n: usize,
    table: Vec<f64>,
    tol: f64,
}

impl CostKernel {
    /// Tabulates a parametric kernel over the region.
    pub fn evaluate(kind: CostKind, region: &Region) -> Result<Self> {
        let n = region.len();
        let f: Box<dyn Fn(f64) -> f64> = match kind {
            CostKind::MetricPower { alpha } => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return Err(Error::InvalidKernel(format!(
                        "metric power needs alpha in (0, 1], got {alpha}"
                    )));
                }
                if alpha == 1.0 {
                    Box::new(|d| d)
                } else {
                    Box::new(move |d: f64| d.powf(alpha))
                }
            }
            CostKind::Quadratic => Box::new(|d| 0.5 * d * d),
            CostKind::CustomTable => {
                return Err(Error::InvalidKernel(
                    "custom tables are built with CostKernel::custom".into(),
                ))
            }
        };
        let mut table = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    table[x * n + y] = f(region.distance(x, y));
                }
            }
        }
        Ok(Self::from_table(kind, n, table))
    }

    /// Validates a user table: nonnegative, finite, zero diagonal.
    pub fn custom(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidKernel("empty table".into()));
        }
        let mut table = Vec::with_capacity(n * n);
        for (x, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidKernel(format!(
                    "row {x} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (y, &c) in row.iter().enumerate() {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidKernel(format!(
                        "c({x},{y}) = {c} is not a finite nonnegative cost"
                    )));
                }
                if x == y && c != 0.0 {
                    return Err(Error::InvalidKernel(format!(
                        "c({x},{x}) = {c}, diagonal must be zero"
                    )));
                }
                table.push(c);
            }
        }
        Ok(Self::from_table(CostKind::CustomTable, n, table))
    }

    fn from_table(kind: CostKind, n: usize, table: Vec<f64>) -> Self {
        let max = table.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
        Self {
            kind,
            n,
            table,
            tol: 1e-9 * (1.0 + max),
        }
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn cost(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.n + y]
    }

    /// Costs from customer `x` to every shop.
    pub fn row(&self, x: usize) -> &[f64] {
        &self.table[x * self.n..(x + 1) * self.n]
    }

    pub fn max_cost(&self) -> f64 {
        self.table.iter().fold(0.0f64, |m, &c| m.max(c))
    }

    /// Scale-aware equality tolerance `1e-9 * (1 + max|c|)`, used for argmin
    /// membership and every profit comparison.
    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `|x-y|^alpha` with `alpha <= 1` is a metric; so is a custom table that
    /// passes [`CostKernel::is_metric_table`].
    pub fn is_metric(&self) -> bool {
        match self.kind {
            CostKind::MetricPower { alpha } => alpha <= 1.0,
            CostKind::Quadratic => false,
            CostKind::CustomTable => self.is_metric_table(),
        }
    }

    /// Plain euclidean distance (`alpha = 1`).
    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, CostKind::MetricPower { alpha } if alpha == 1.0)
    }

    /// Symmetry plus triangle inequality, checked exhaustively.
    pub fn is_metric_table(&self) -> bool {
        let n = self.n;
        for x in 0..n {
            for y in 0..n {
                if (self.cost(x, y) - self.cost(y, x)).abs() > self.tol {
                    return false;
                }
                for z in 0..n {
                    if self.cost(x, z) > self.cost(x, y) + self.cost(y, z) + self.tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.table.chunks(self.n).map(|r| r.to_vec()).collect()
    }
}

/// Nonnegative customer weights per region point.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomerMeasure {
    weights: Vec<f64>,
    cumulative: Option<Vec<f64>>,
}

impl CustomerMeasure {
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty weight vector".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidMeasure(format!(
                "weight {i} = {w} is not finite and nonnegative"
            )));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self {
            weights,
            cumulative: Some(cumulative),
        })
    }

    /// Uniform probability: trapezoid quadrature weights on structured
    /// layouts (exact for piecewise linear integrands), equal weights on
    /// scattered point lists.
    pub fn uniform(region: &Region) -> Self {
        let n = region.len();
        let raw: Vec<f64> = match region.layout() {
            Layout::Interval { .. } => (0..n)
                .map(|i| if i == 0 || i == n - 1 { 0.5 } else { 1.0 })
                .collect(),
            Layout::Grid { nx, ny } => (0..n)
                .map(|i| {
                    let (ix, iy) = (i % nx, i / nx);
                    let wx = if ix == 0 || ix == nx - 1 { 0.5 } else { 1.0 };
                    let wy = if iy == 0 || iy == ny - 1 { 0.5 } else { 1.0 };
                    wx * wy
                })
                .collect(),
            Layout::Scattered => vec![1.0; n],
        };
        Self::from_weights(raw)
            .expect("positive weights")
            .normalized()
            .expect("positive mass")
    }

    /// Density-weighted quadrature: `density(x)` times the uniform weights,
    /// renormalised to a probability.
    pub fn from_density(region: &Region, density: impl Fn(Point) -> f64) -> Result<Self> {
        let base = Self::uniform(region);
        let w = base
            .weights
            .iter()
            .zip(region.points())
            .map(|(w, p)| w * density(*p))
            .collect();
        Self::from_weights(w)?.normalized()
    }

    pub fn normalized(&self) -> Result<Self> {
        let m = self.total_mass();
        if m <= 0.0 {
            return Err(Error::InvalidMeasure(
                "cannot normalise a zero measure".into(),
            ));
        }
        Self::from_weights(self.weights.iter().map(|w| w / m).collect())
    }

    /// Copy with the given points carrying no mass.
    pub fn zeroed_at(&self, indices: &[usize]) -> Self {
        let mut w = self.weights.clone();
        for &i in indices {
            w[i] = 0.0;
        }
        Self::from_weights(w).expect("weights stay nonnegative")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Prefix sums in index order.
    pub fn cumulative(&self) -> Option<&[f64]> {
        self.cumulative.as_deref()
    }

    pub fn total_mass(&self) -> f64 {
        self.cumulative
            .as_ref()
            .and_then(|c| c.last().copied())
            .unwrap_or(0.0)
    }

    pub fn mass_on(&self, indices: &[usize]) -> f64 {
        indices.iter().map(|&i| self.weights[i]).sum()
    }

    pub fn check_matches(&self, region: &Region) -> Result<()> {
        if self.len() != region.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for a region of {} points",
                self.len(),
                region.len()
            )));
        }
        Ok(())
    }

    /// Cumulative function of a 1D measure where each weight is spread evenly
    /// over its grid cell `[x_i - h/2, x_i + h/2]` clipped to `[a, b]`.
    /// The result is continuous (no atoms) and equals `t - a` for the
    /// uniform measure on `[a, b]` scaled to mass `b - a`.
    pub fn spread_cdf(&self, region: &Region, t: f64) -> f64 {
        let Layout::Interval { a, b } = region.layout() else {
            return self.atomic_cdf(region, t);
        };
        let h = (b - a) / (region.len() - 1) as f64;
        let mut acc = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            let x = region.coord(i);
            let lo = (x - 0.5 * h).max(a);
            let hi = (x + 0.5 * h).min(b);
            if t >= hi {
                acc += w;
            } else if t > lo {
                acc += w * (t - lo) / (hi - lo);
            }
        }
        acc
    }

    /// Right-continuous step cumulative function `f({x_i <= t})`.
    pub fn atomic_cdf(&self, region: &Region, t: f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| region.coord(*i) <= t)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Extended-real price: a finite value or the `+inf` sentinel that marks an
/// unconstrained upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Price {
    Finite(f64),
    Unbounded,
}

impl Price {
    pub fn finite(self) -> Option<f64> {
        match self {
            Price::Finite(v) => Some(v),
            Price::Unbounded => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Price::Finite(_))
    }

    /// `cost + price`, or `None` when the price is unbounded.
    #[inline]
    pub fn plus(self, cost: f64) -> Option<f64> {
        self.finite().map(|p| p + cost)
    }

    pub fn min(self, other: Price) -> Price {
        match (self, other) {
            (Price::Finite(a), Price::Finite(b)) => Price::Finite(a.min(b)),
            (Price::Finite(a), Price::Unbounded) | (Price::Unbounded, Price::Finite(a)) => {
                Price::Finite(a)
            }
            (Price::Unbounded, Price::Unbounded) => Price::Unbounded,
        }
    }

    /// `self <= other` in the extended order.
    pub fn le(self, other: Price, tol: f64) -> bool {
        match (self, other) {
            (_, Price::Unbounded) => true,
            (Price::Unbounded, Price::Finite(_)) => false,
            (Price::Finite(a), Price::Finite(b)) => a <= b + tol,
        }
    }
}

/// Price per region point. Never `-inf` or NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePattern {
    values: Vec<Price>,
}

impl PricePattern {
    pub fn new(values: Vec<Price>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if let Price::Finite(x) = v {
                if !x.is_finite() {
                    return Err(Error::InvalidPrice(format!(
                        "price {i} = {x}; use the unbounded sentinel for +inf"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    /// All-finite pattern.
    pub fn finite(values: Vec<f64>) -> Result<Self> {
        Self::new(values.into_iter().map(Price::Finite).collect())
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::finite(vec![value; n])
    }

    /// Finite on `support`, unbounded elsewhere.
    pub fn supported_on(n: usize, support: &[usize], values: &[f64]) -> Result<Self> {
        let mut out = vec![Price::Unbounded; n];
        for (&i, &v) in support.iter().zip(values) {
            out[i] = Price::Finite(v);
        }
        Self::new(out)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Price {
        self.values[i]
    }

    pub fn values(&self) -> &[Price] {
        &self.values
    }

    /// Finite value at `i`; panics on the sentinel.
    pub fn at(&self, i: usize) -> f64 {
        self.values[i].finite().expect("finite price")
    }

    pub fn is_finite_on(&self, indices: &[usize]) -> bool {
        indices.iter().all(|&i| self.values[i].is_finite())
    }

    pub fn is_proper_on(&self, indices: &[usize]) -> bool {
        indices.iter().any(|&i| self.values[i].is_finite())
    }

    /// Finite values, or `None` when any entry is unbounded.
    pub fn to_finite(&self) -> Option<Vec<f64>> {
        self.values.iter().map(|p| p.finite()).collect()
    }

    /// Copy with the listed entries overwritten.
    pub fn with_values(&self, indices: &[usize], values: &[f64]) -> Self {
        let mut out = self.values.clone();
        for (&i, &v) in indices.iter().zip(values) {
            out[i] = Price::Finite(v);
        }
        Self { values: out }
    }

    /// Largest finite gap `max |p - q|` over `indices`; unbounded entries on
    /// both sides count as equal.
    pub fn sup_distance(&self, other: &PricePattern, indices: &[usize]) -> f64 {
        indices
            .iter()
            .map(|&i| match (self.values[i], other.values[i]) {
                (Price::Finite(a), Price::Finite(b)) => (a - b).abs(),
                (Price::Unbounded, Price::Unbounded) => 0.0,
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interval_with_window_marks_boundary() {
        let r = Region::interval(5, 0.0, 1.0, Some((0.25, 0.75))).unwrap();
        assert_eq!(
            r.masks(),
            &[Mask::Free, Mask::Free, Mask::Fixed, Mask::Free, Mask::Free]
        );
        assert_eq!(r.boundary_indices(), vec![1, 3]);
    }

    #[test]
    fn interval_without_window() {
        let r = Region::interval(2, 0.0, 1.0, None).unwrap();
        assert_eq!(r.masks(), &[Mask::Free, Mask::Free]);
        assert_eq!(r.coord(0), 0.0);
        assert_eq!(r.coord(1), 1.0);
        assert!(r.boundary_indices().is_empty());
    }

    #[test]
    fn full_window_leaves_endpoints_free() {
        let r = Region::interval(101, 0.0, 1.0, Some((0.0, 1.0))).unwrap();
        assert_eq!(r.free_indices(), vec![0, 100]);
        assert_eq!(r.boundary_indices(), vec![0, 100]);
        assert_eq!(r.fixed_indices().len(), 99);
    }

    #[test]
    fn interval_rejects_bad_input() {
        assert!(Region::interval(1, 0.0, 1.0, None).is_err());
        assert!(Region::interval(5, 1.0, 0.0, None).is_err());
        assert!(Region::interval(5, 0.0, 1.0, Some((-0.1, 0.5))).is_err());
        assert!(Region::interval(5, 0.0, 1.0, Some((0.5, 0.5))).is_err());
    }

    #[test]
    fn partition_needs_a_free_point() {
        let pts = vec![[0.0, 0.0], [1.0, 0.0]];
        assert!(Region::from_points(pts.clone(), 1, Some(vec![Mask::Fixed, Mask::Fixed])).is_err());
        assert!(Region::from_points(pts, 1, Some(vec![Mask::Fixed, Mask::None])).is_err());
    }

    #[test]
    fn grid_window_boundary_is_four_neighbourhood() {
        let w = Window2 {
            x: (0.2, 0.8),
            y: (0.2, 0.8),
        };
        let r = Region::grid(5, 5, (0.0, 1.0), (0.0, 1.0), Some(w)).unwrap();
        // points 0.25, 0.5, 0.75 on each axis are strictly inside
        assert_eq!(r.fixed_indices().len(), 9);
        let b = r.boundary_indices();
        assert_eq!(b.len(), 12);
        assert!(b.contains(&1) && !b.contains(&0));
    }

    #[test]
    fn metric_table_values() {
        let r = Region::from_points(vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]], 1, None).unwrap();
        let k = CostKernel::evaluate(CostKind::MetricPower { alpha: 1.0 }, &r).unwrap();
        assert_eq!(
            k.to_rows(),
            vec![
                vec![0.0, 0.5, 1.0],
                vec![0.5, 0.0, 0.5],
                vec![1.0, 0.5, 0.0]
            ]
        );
    }

    #[test]
    fn quadratic_and_power_tables() {
        let r = Region::from_points(vec![[0.0, 0.0], [1.0, 0.0]], 1, None).unwrap();
        let q = CostKernel::evaluate(CostKind::Quadratic, &r).unwrap();
        assert_eq!(q.cost(0, 1), 0.5);
        let r = Region::from_points(vec![[0.0, 0.0], [0.25, 0.0]], 1, None).unwrap();
        let s = CostKernel::evaluate(CostKind::MetricPower { alpha: 0.5 }, &r).unwrap();
        assert_eq!(s.cost(0, 1), 0.5);
        assert_eq!(s.cost(1, 0), 0.5);
    }

    #[test]
    fn custom_table_validation() {
        assert!(CostKernel::custom(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(CostKernel::custom(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
        assert!(CostKernel::custom(vec![vec![0.1, 1.0], vec![1.0, 0.0]]).is_err());
        assert!(CostKernel::custom(vec![vec![0.0, 1.0]]).is_err());
        assert!(CostKernel::evaluate(
            CostKind::MetricPower { alpha: 1.5 },
            &Region::interval(3, 0.0, 1.0, None).unwrap()
        )
        .is_err());
    }

    #[test]
    fn uniform_measure_is_trapezoid() {
        let r = Region::interval(5, 0.0, 1.0, None).unwrap();
        let f = CustomerMeasure::uniform(&r);
        assert_eq!(f.weights(), &[0.125, 0.25, 0.25, 0.25, 0.125]);
        assert!((f.total_mass() - 1.0).abs() < 1e-15);
        for t in [0.0, 0.1, 0.33, 0.5, 0.9, 1.0] {
            assert!((f.spread_cdf(&r, t) - t).abs() < 1e-12, "t = {t}");
        }
        assert_eq!(f.atomic_cdf(&r, 0.25), 0.375);
    }

    #[test]
    fn price_sentinel_rules() {
        assert!(PricePattern::finite(vec![f64::NAN]).is_err());
        assert!(PricePattern::finite(vec![f64::NEG_INFINITY]).is_err());
        let p = PricePattern::supported_on(3, &[1], &[2.0]).unwrap();
        assert_eq!(p.get(0), Price::Unbounded);
        assert!(p.is_proper_on(&[0, 1]) && !p.is_proper_on(&[0, 2]));
        assert!(Price::Finite(1.0).le(Price::Unbounded, 0.0));
    }

    fn random_region() -> impl Strategy<Value = (Vec<Point>, f64)> {
        (
            prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2..8),
            0.1..=1.0f64,
        )
            .prop_map(|(pts, a)| (pts.into_iter().map(|(x, y)| [x, y]).collect(), a))
    }

    proptest! {
        #[test]
        fn metric_power_is_a_metric((pts, alpha) in random_region()) {
            let r = Region::from_points(pts, 2, None).unwrap();
            let k = CostKernel::evaluate(CostKind::MetricPower { alpha }, &r).unwrap();
            let n = k.len();
            for x in 0..n {
                prop_assert_eq!(k.cost(x, x), 0.0);
                let min = k.row(x).iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assert_eq!(min, 0.0);
                for y in 0..n {
                    for z in 0..n {
                        prop_assert!(k.cost(x, z) <= k.cost(x, y) + k.cost(y, z) + 1e-12);
                    }
                }
            }
        }

        #[test]
        fn cumulative_is_monotone(w in prop::collection::vec(0.0..5.0f64, 1..20)) {
            let f = CustomerMeasure::from_weights(w.clone()).unwrap();
            let c = f.cumulative().unwrap();
            prop_assert!(c.windows(2).all(|p| p[0] <= p[1]));
            prop_assert!((c[c.len() - 1] - w.iter().sum::<f64>()).abs() < 1e-12);
        }
    }
}
