//! Finite-dimensional maximisation used by every solver: exhaustive
//! enumeration of quantized levels and multistart coordinate ascent.
//!
//! Both drivers are deterministic for a given configuration, independent of
//! the number of worker threads: candidates are scored in parallel but the
//! winner is always picked by a sequential pass in lexicographic order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Exhaustive,
    Ascent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub mode: SearchMode,
    /// Quantization levels per coordinate.
    pub levels: usize,
    /// Random restarts for ascent.
    pub multistarts: usize,
    pub seed: u64,
    /// Largest candidate count exhaustive mode accepts.
    pub budget: u64,
    /// Points per axis of the `(p1, p2)` grid of the 1D reduction.
    pub grid_n: usize,
    /// Explicit step of the price grid for boundary controls and game
    /// strategies; `None` uses `cap / 200`.
    pub price_step: Option<f64>,
    pub max_sweeps: usize,
    /// Ascent stops once every search radius falls below this fraction of
    /// the largest cap.
    pub min_radius: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            mode: SearchMode::Ascent,
            levels: 8,
            multistarts: 16,
            seed: 0,
            budget: 5_000_000,
            grid_n: 201,
            price_step: None,
            max_sweeps: 400,
            min_radius: 1e-5,
        }
    }
}

impl SearchConfig {
    pub fn exhaustive(levels: usize) -> Self {
        Self {
            mode: SearchMode::Exhaustive,
            levels,
            ..Self::default()
        }
    }

    pub fn ascent(levels: usize, multistarts: usize, seed: u64) -> Self {
        Self {
            mode: SearchMode::Ascent,
            levels,
            multistarts,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 levels, got {}",
                self.levels
            )));
        }
        if self.mode == SearchMode::Ascent && self.multistarts == 0 {
            return Err(Error::InvalidArgument(
                "ascent needs at least one start".into(),
            ));
        }
        if self.grid_n < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid_n must be >= 2, got {}",
                self.grid_n
            )));
        }
        if let Some(s) = self.price_step {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "price step must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }

    /// Step of the strategy price grid for a given cap.
    pub fn step_for(&self, cap: f64) -> f64 {
        self.price_step.unwrap_or(cap / 200.0)
    }
}

/// Search bookkeeping attached to solver reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub evaluations: u64,
    pub space_size: f64,
    pub trace: Vec<f64>,
    pub notes: Vec<String>,
}

impl From<&SearchOutcome> for Diagnostics {
    fn from(o: &SearchOutcome) -> Self {
        Self {
            evaluations: o.evaluations,
            space_size: o.space_size,
            trace: o.trace.clone(),
            notes: Vec::new(),
        }
    }
}

/// Result of a search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub best: Vec<f64>,
    pub value: f64,
    pub evaluations: u64,
    /// Size of the enumerated space (exhaustive) or number of starts.
    pub space_size: f64,
    /// Best value after each sweep of the winning start (ascent only).
    pub trace: Vec<f64>,
}

/// `levels` evenly spaced values on `[0, cap]`.
pub fn uniform_levels(cap: f64, levels: usize) -> Vec<f64> {
    if cap <= 0.0 {
        return vec![0.0];
    }
    (0..levels)
        .map(|k| cap * k as f64 / (levels - 1) as f64)
        .collect()
}

/// Multiples of `step` on `[0, cap]`.
pub fn stepped_levels(cap: f64, step: f64) -> Vec<f64> {
    let count = (cap / step + 1e-9).floor() as usize;
    (0..=count).map(|k| k as f64 * step).collect()
}

const CHUNK: u64 = 4096;

/// Enumerates the Cartesian product of `level_sets` in lexicographic order
/// (first coordinate most significant). `objective` returns `None` for
/// infeasible candidates. Candidates whose value ties the incumbent within
/// `tol` lose to the earlier one.
pub fn exhaustive<F>(
    level_sets: &[Vec<f64>],
    budget: u64,
    tol: f64,
    objective: F,
) -> Result<SearchOutcome>
where
    F: Fn(&[f64]) -> Option<f64> + Sync,
{
    let size: f64 = level_sets.iter().map(|l| l.len() as f64).product();
    if size > budget as f64 {
        return Err(Error::BudgetExceeded {
            candidates: size,
            budget,
        });
    }
    let total = size as u64;
    let dims = level_sets.len();
    let decode = |mut idx: u64, out: &mut [f64]| {
        for d in (0..dims).rev() {
            let len = level_sets[d].len() as u64;
            out[d] = level_sets[d][(idx % len) as usize];
            idx /= len;
        }
    };
    let chunks = total.div_ceil(CHUNK);
    let per_chunk: Vec<Option<(u64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut buf = vec![0.0; dims];
            let mut best: Option<(u64, f64)> = None;
            for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
                decode(idx, &mut buf);
                if let Some(v) = objective(&buf) {
                    if best.is_none_or(|(_, b)| v > b + tol) {
                        best = Some((idx, v));
                    }
                }
            }
            best
        })
        .collect();
    let mut best: Option<(u64, f64)> = None;
    for (idx, v) in per_chunk.into_iter().flatten() {
        if best.is_none_or(|(_, b)| v > b + tol) {
            best = Some((idx, v));
        }
    }
    let (idx, value) = best
        .ok_or_else(|| Error::NotApplicable("no feasible candidate in the search space".into()))?;
    let mut point = vec![0.0; dims];
    decode(idx, &mut point);
    Ok(SearchOutcome {
        best: point,
        value,
        evaluations: total,
        space_size: size,
        trace: Vec::new(),
    })
}

/// Multistart coordinate ascent on the box `[0, caps]`. Each coordinate
/// move tries `levels` evenly spaced values in a window of half-width `r`
/// around the current value; when a full sweep brings no improvement every
/// window is halved. Extra starting points in `seeds` run before the random
/// ones.
pub fn ascent<F>(
    caps: &[f64],
    cfg: &SearchConfig,
    tol: f64,
    seeds: &[Vec<f64>],
    objective: F,
) -> SearchOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let dims = caps.len();
    let cap_max = caps.iter().copied().fold(0.0, f64::max);
    let starts = starting_points(caps, cfg, seeds);
    let runs: Vec<(Vec<f64>, f64, u64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|start| climb(start, caps, cap_max, cfg, tol, &objective))
        .collect();
    pick_best(runs, tol).unwrap_or_else(|| {
        let zero = vec![0.0; dims];
        let value = objective(&zero);
        SearchOutcome {
            best: zero,
            value,
            evaluations: 1,
            space_size: 0.0,
            trace: Vec::new(),
        }
    })
}

fn starting_points(caps: &[f64], cfg: &SearchConfig, seeds: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut starts: Vec<Vec<f64>> = seeds.to_vec();
    for s in 0..cfg.multistarts {
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(s as u64 + 1)),
        );
        starts.push(
            caps.iter()
                .map(|&c| if c > 0.0 { rng.gen_range(0.0..=c) } else { 0.0 })
                .collect(),
        );
    }
    starts
}

fn pick_best(runs: Vec<(Vec<f64>, f64, u64, Vec<f64>)>, tol: f64) -> Option<SearchOutcome> {
    let space_size = runs.len() as f64;
    let evaluations = runs.iter().map(|r| r.2).sum();
    let mut best: Option<(Vec<f64>, f64, Vec<f64>)> = None;
    for (x, v, _, trace) in runs {
        if best.as_ref().is_none_or(|(_, b, _)| v > b + tol) {
            best = Some((x, v, trace));
        }
    }
    best.map(|(best, value, trace)| SearchOutcome {
        best,
        value,
        evaluations,
        space_size,
        trace,
    })
}

/// A feasible set with two coordinate systems: a primal state (a value
/// function) and a dual one (the prices generating it). Moves along either
/// system are projected back onto the feasible set before scoring.
pub trait Landscape: Sync {
    /// Box bounds of the primal coordinates.
    fn caps(&self) -> &[f64];
    /// Box bounds of the dual coordinates.
    fn dual_caps(&self) -> &[f64];
    /// Feasible primal state nearest to `x` in the projection's sense.
    fn project(&self, x: &[f64]) -> Vec<f64>;
    fn to_dual(&self, x: &[f64]) -> Vec<f64>;
    /// Feasible primal state generated by dual coordinates `d`.
    fn from_dual(&self, d: &[f64]) -> Vec<f64>;
    /// Objective of a feasible primal state.
    fn score(&self, x: &[f64]) -> f64;
    /// Preference among states whose scores tie within tolerance (higher
    /// wins).
    fn secondary(&self, _x: &[f64]) -> f64 {
        0.0
    }
    /// Optional local improvement tried after every sweep.
    fn polish(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// Multistart coordinate ascent alternating primal and dual coordinate
/// moves, each followed by projection onto the feasible set. Starts are
/// random dual points (plus `seeds`), so every start is feasible.
pub fn dual_ascent<L: Landscape>(
    land: &L,
    cfg: &SearchConfig,
    tol: f64,
    seeds: &[Vec<f64>],
) -> SearchOutcome {
    let dual_caps = land.dual_caps();
    let starts = starting_points(dual_caps, cfg, seeds);
    let runs: Vec<(Vec<f64>, Mark, u64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|start| dual_climb(land, land.from_dual(&start), cfg, tol))
        .collect();
    let space_size = runs.len() as f64;
    let evaluations = runs.iter().map(|r| r.2).sum();
    let mut best: Option<(Vec<f64>, Mark, Vec<f64>)> = None;
    for (x, m, _, trace) in runs {
        if best.as_ref().is_none_or(|(_, b, _)| m.beats(b, tol)) {
            best = Some((x, m, trace));
        }
    }
    match best {
        Some((best, m, trace)) => SearchOutcome {
            best,
            value: m.value,
            evaluations,
            space_size,
            trace,
        },
        None => {
            let x = land.from_dual(&vec![0.0; dual_caps.len()]);
            let value = land.score(&x);
            SearchOutcome {
                best: x,
                value,
                evaluations: 1,
                space_size: 0.0,
                trace: Vec::new(),
            }
        }
    }
}

fn window(center: f64, radius: f64, cap: f64, levels: usize) -> impl Iterator<Item = f64> {
    let lo = (center - radius).max(0.0);
    let hi = (center + radius).min(cap);
    (0..levels).map(move |k| lo + (hi - lo) * k as f64 / (levels - 1) as f64)
}

#[derive(Clone, Copy)]
struct Mark {
    value: f64,
    secondary: f64,
}

impl Mark {
    fn of<L: Landscape>(land: &L, x: &[f64]) -> Self {
        Self {
            value: land.score(x),
            secondary: land.secondary(x),
        }
    }

    /// Strictly better objective, or a tie within `tol` broken by the
    /// secondary preference.
    fn beats(&self, other: &Mark, tol: f64) -> bool {
        self.value > other.value + tol
            || (self.value >= other.value - tol && self.secondary > other.secondary + tol)
    }
}

fn dual_climb<L: Landscape>(
    land: &L,
    mut x: Vec<f64>,
    cfg: &SearchConfig,
    tol: f64,
) -> (Vec<f64>, Mark, u64, Vec<f64>) {
    let caps = land.caps();
    let dual_caps = land.dual_caps();
    let levels = cfg.levels.max(2);
    let offsets: Vec<f64> = (0..levels)
        .map(|k| -1.0 + 2.0 * k as f64 / (levels - 1) as f64)
        .filter(|t| *t != 0.0)
        .collect();
    let scale = caps
        .iter()
        .chain(dual_caps)
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut radius: Vec<f64> = caps.iter().map(|c| 0.5 * c).collect();
    let mut dual_radius: Vec<f64> = dual_caps.iter().map(|c| 0.5 * c).collect();
    let mut mark = Mark::of(land, &x);
    let mut evals = 1u64;
    let mut trace = vec![mark.value];
    for _ in 0..cfg.max_sweeps {
        let mut improved = false;
        let mut best: Option<(Vec<f64>, Mark)> = None;
        let consider = |cand: Vec<f64>, best: &mut Option<(Vec<f64>, Mark)>, evals: &mut u64| {
            let m = Mark::of(land, &cand);
            *evals += 1;
            if best.as_ref().is_none_or(|(_, b)| m.beats(b, tol)) {
                *best = Some((cand, m));
            }
        };
        let adopt = |best: &mut Option<(Vec<f64>, Mark)>,
                     x: &mut Vec<f64>,
                     mark: &mut Mark,
                     improved: &mut bool| {
            if let Some((cand, m)) = best.take() {
                if m.beats(mark, tol) {
                    // moves that only win the tie-break are kept but do not
                    // hold the step size up
                    *improved |= m.value > mark.value + tol;
                    *x = cand;
                    *mark = m;
                }
            }
        };
        for i in 0..caps.len().max(dual_caps.len()) {
            if i < caps.len() && caps[i] > 0.0 {
                let mut probe = x.clone();
                for cand in window(x[i], radius[i], caps[i], levels) {
                    if cand == x[i] {
                        continue;
                    }
                    probe[i] = cand;
                    consider(land.project(&probe), &mut best, &mut evals);
                }
            }
            if i < dual_caps.len() && dual_caps[i] > 0.0 {
                let mut d = land.to_dual(&x);
                let center = d[i];
                for cand in window(center, dual_radius[i], dual_caps[i], levels) {
                    if cand == center {
                        continue;
                    }
                    d[i] = cand;
                    consider(land.polish(&land.from_dual(&d)), &mut best, &mut evals);
                }
            }
            adopt(&mut best, &mut x, &mut mark, &mut improved);
        }
        // collective moves: rescale, shift, or shift a tail of the dual
        // coordinates at once
        let d = land.to_dual(&x);
        let spread = dual_radius.iter().copied().fold(0.0, f64::max);
        for &t in &offsets {
            let scaled: Vec<f64> = d
                .iter()
                .zip(dual_caps)
                .map(|(u, c)| (u * (1.0 + t * spread / scale)).clamp(0.0, *c))
                .collect();
            let shifted: Vec<f64> = d
                .iter()
                .zip(dual_caps)
                .map(|(u, c)| (u + t * spread).clamp(0.0, *c))
                .collect();
            consider(land.from_dual(&scaled), &mut best, &mut evals);
            consider(land.from_dual(&shifted), &mut best, &mut evals);
        }
        for i in 1..d.len() {
            let r = dual_radius[i];
            if r <= 0.0 {
                continue;
            }
            for &t in &offsets {
                let tail: Vec<f64> = d
                    .iter()
                    .zip(dual_caps)
                    .enumerate()
                    .map(|(j, (u, c))| {
                        if j >= i {
                            (u + t * r).clamp(0.0, *c)
                        } else {
                            *u
                        }
                    })
                    .collect();
                consider(land.from_dual(&tail), &mut best, &mut evals);
            }
        }
        adopt(&mut best, &mut x, &mut mark, &mut improved);
        consider(land.polish(&x), &mut best, &mut evals);
        adopt(&mut best, &mut x, &mut mark, &mut improved);
        trace.push(mark.value);
        if !improved {
            radius
                .iter_mut()
                .chain(dual_radius.iter_mut())
                .for_each(|r| *r *= 0.5);
            let widest = radius
                .iter()
                .chain(&dual_radius)
                .copied()
                .fold(0.0, f64::max);
            if widest <= cfg.min_radius * scale {
                break;
            }
        }
    }
    (x, mark, evals, trace)
}

fn climb<F>(
    mut x: Vec<f64>,
    caps: &[f64],
    cap_max: f64,
    cfg: &SearchConfig,
    tol: f64,
    objective: &F,
) -> (Vec<f64>, f64, u64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64,
{
    let levels = cfg.levels.max(2);
    let mut radius: Vec<f64> = caps.iter().map(|c| 0.5 * c).collect();
    let mut value = objective(&x);
    let mut evals = 1u64;
    let mut trace = vec![value];
    let mut probe = x.clone();
    for _ in 0..cfg.max_sweeps {
        let mut improved = false;
        for i in 0..x.len() {
            if caps[i] <= 0.0 {
                continue;
            }
            let lo = (x[i] - radius[i]).max(0.0);
            let hi = (x[i] + radius[i]).min(caps[i]);
            let mut best_here: Option<(f64, f64)> = None;
            for k in 0..levels {
                let cand = lo + (hi - lo) * k as f64 / (levels - 1) as f64;
                if cand == x[i] {
                    continue;
                }
                probe[i] = cand;
                let v = objective(&probe);
                evals += 1;
                if best_here.is_none_or(|(_, b)| v > b + tol) {
                    best_here = Some((cand, v));
                }
            }
            match best_here {
                Some((cand, v)) if v > value + tol => {
                    x[i] = cand;
                    probe[i] = cand;
                    value = v;
                    improved = true;
                }
                _ => probe[i] = x[i],
            }
        }
        trace.push(value);
        if !improved {
            radius.iter_mut().for_each(|r| *r *= 0.5);
            let widest = radius.iter().copied().fold(0.0, f64::max);
            if widest <= cfg.min_radius * cap_max.max(f64::MIN_POSITIVE) {
                break;
            }
        }
    }
    (x, value, evals, trace)
}
