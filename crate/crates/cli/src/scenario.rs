//! TOML scenario grammar and its translation into solver inputs.

use serde::Deserialize;
use spatprice::{
    CdfKind, CostKernel, CostKind, CustomerMeasure, GameContext, Mask, PricePattern, Region,
    SearchConfig, SearchMode, Window2,
};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    One,
    Two,
    Nash,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: Model,
    #[serde(default)]
    pub seed: u64,
    pub region: RegionSpec,
    #[serde(default)]
    pub cost: CostSpec,
    #[serde(default)]
    pub measure: MeasureSpec,
    #[serde(default)]
    pub prices: Option<PriceSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub game: Option<GameSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RegionSpec {
    Interval {
        n: usize,
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        b: Option<f64>,
        #[serde(default)]
        window: Option<[f64; 2]>,
    },
    Grid {
        nx: usize,
        ny: usize,
        #[serde(default)]
        x: Option<[f64; 2]>,
        #[serde(default)]
        y: Option<[f64; 2]>,
        #[serde(default)]
        window_x: Option<[f64; 2]>,
        #[serde(default)]
        window_y: Option<[f64; 2]>,
    },
    Points {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        fixed: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CostSpec {
    Metric {
        #[serde(default)]
        alpha: Option<f64>,
    },
    Quadratic,
    Table {
        rows: Vec<Vec<f64>>,
    },
}

impl Default for CostSpec {
    fn default() -> Self {
        CostSpec::Metric { alpha: None }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureSpec {
    #[default]
    Uniform,
    /// `1 - |2t - 1|` in the normalized first coordinate `t`, plus `floor`.
    Triangular {
        #[serde(default)]
        floor: Option<f64>,
    },
    Weights {
        weights: Vec<f64>,
        #[serde(default)]
        normalize: bool,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PriceSpec {
    Constant {
        value: f64,
    },
    Values {
        values: Vec<f64>,
    },
    /// `sum_k coefficients[k] * x^k` in the first coordinate.
    Polynomial {
        coefficients: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    Exhaustive,
    Ascent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CdfSpec {
    Uniform,
    Spread,
    Atomic,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub method: Option<String>,
    pub mode: Option<ModeSpec>,
    pub levels: Option<usize>,
    pub multistarts: Option<usize>,
    pub budget: Option<u64>,
    pub price_step: Option<f64>,
    pub grid_n: Option<usize>,
    pub cdf: Option<CdfSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub split: Option<f64>,
    pub a_mask: Option<Vec<bool>>,
    pub b_mask: Option<Vec<bool>>,
    pub p_init: Option<PriceSpec>,
    pub q_init: Option<PriceSpec>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub upper_bound: Option<f64>,
}

fn default_rounds() -> usize {
    20
}

fn default_eps() -> f64 {
    1e-9
}

/// Solver inputs assembled from a validated scenario.
pub struct Instance {
    pub region: Region,
    pub kernel: CostKernel,
    pub measure: CustomerMeasure,
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| invalid(format!("scenario: {e}")))
    }

    /// Method name after applying the command-line override and the
    /// model's default.
    pub fn method(&self, flag: Option<&str>) -> String {
        flag.map(str::to_owned)
            .or_else(|| self.solver.method.clone())
            .unwrap_or_else(|| {
                match self.model {
                    Model::One => match self.cost {
                        CostSpec::Metric { .. } => "metric",
                        _ => "general",
                    },
                    Model::Two => "w_search",
                    Model::Nash => "dynamics",
                }
                .to_owned()
            })
    }

    pub fn instance(&self) -> Result<Instance, Failure> {
        let region = self.build_region()?;
        let kernel = self.build_kernel(&region)?;
        let measure = self.build_measure(&region)?;
        Ok(Instance {
            region,
            kernel,
            measure,
        })
    }

    fn build_region(&self) -> Result<Region, Failure> {
        let region = match &self.region {
            RegionSpec::Interval { n, a, b, window } => Region::interval(
                *n,
                a.unwrap_or(0.0),
                b.unwrap_or(1.0),
                window.map(|[l, r]| (l, r)),
            ),
            RegionSpec::Grid {
                nx,
                ny,
                x,
                y,
                window_x,
                window_y,
            } => {
                let window = match (window_x, window_y) {
                    (Some(wx), Some(wy)) => Some(Window2 {
                        x: (wx[0], wx[1]),
                        y: (wy[0], wy[1]),
                    }),
                    (None, None) => None,
                    _ => return Err(invalid("grid window needs both window_x and window_y")),
                };
                let x = x.unwrap_or([0.0, 1.0]);
                let y = y.unwrap_or([0.0, 1.0]);
                Region::grid(*nx, *ny, (x[0], x[1]), (y[0], y[1]), window)
            }
            RegionSpec::Points { points, fixed } => {
                let dim = points.first().map_or(0, Vec::len);
                if !(dim == 1 || dim == 2) || points.iter().any(|p| p.len() != dim) {
                    return Err(invalid("points must all have 1 or 2 coordinates"));
                }
                let pts = points
                    .iter()
                    .map(|p| [p[0], if dim == 2 { p[1] } else { 0.0 }])
                    .collect();
                let masks = fixed.as_ref().map(|fixed| {
                    let mut m = vec![Mask::Free; points.len()];
                    for &i in fixed {
                        if let Some(slot) = m.get_mut(i) {
                            *slot = Mask::Fixed;
                        }
                    }
                    m
                });
                if let Some(bad) = fixed.iter().flatten().find(|&&i| i >= points.len()) {
                    return Err(invalid(format!("fixed index {bad} out of range")));
                }
                Region::from_points(pts, dim, masks)
            }
        };
        region.map_err(|e| invalid(e.to_string()))
    }

    fn build_kernel(&self, region: &Region) -> Result<CostKernel, Failure> {
        let kernel = match &self.cost {
            CostSpec::Metric { alpha } => CostKernel::evaluate(
                CostKind::MetricPower {
                    alpha: alpha.unwrap_or(1.0),
                },
                region,
            ),
            CostSpec::Quadratic => CostKernel::evaluate(CostKind::Quadratic, region),
            CostSpec::Table { rows } => {
                if rows.len() != region.len() {
                    return Err(invalid(format!(
                        "cost table has {} rows for {} points",
                        rows.len(),
                        region.len()
                    )));
                }
                CostKernel::custom(rows.clone())
            }
        };
        kernel.map_err(|e| invalid(e.to_string()))
    }

    fn build_measure(&self, region: &Region) -> Result<CustomerMeasure, Failure> {
        let measure = match &self.measure {
            MeasureSpec::Uniform => Ok(CustomerMeasure::uniform(region)),
            MeasureSpec::Triangular { floor } => {
                let (lo, hi) = first_coordinate_range(region);
                let floor = floor.unwrap_or(0.0);
                CustomerMeasure::from_density(region, |p| {
                    let t = if hi > lo {
                        (p[0] - lo) / (hi - lo)
                    } else {
                        0.5
                    };
                    1.0 - (2.0 * t - 1.0).abs() + floor
                })
            }
            MeasureSpec::Weights { weights, normalize } => {
                if weights.len() != region.len() {
                    return Err(invalid(format!(
                        "{} weights for {} points",
                        weights.len(),
                        region.len()
                    )));
                }
                CustomerMeasure::from_weights(weights.clone()).and_then(|m| {
                    if *normalize {
                        m.normalized()
                    } else {
                        Ok(m)
                    }
                })
            }
        };
        measure.map_err(|e| invalid(e.to_string()))
    }

    pub fn price_bound(&self, region: &Region) -> Result<PricePattern, Failure> {
        let spec = self
            .prices
            .as_ref()
            .ok_or_else(|| invalid("this model needs a [prices] table"))?;
        price_pattern(spec, region)
    }

    pub fn search_config(&self, seed: u64) -> Result<SearchConfig, Failure> {
        let mut cfg = SearchConfig::default();
        let s = &self.solver;
        if let Some(mode) = s.mode {
            cfg.mode = match mode {
                ModeSpec::Exhaustive => SearchMode::Exhaustive,
                ModeSpec::Ascent => SearchMode::Ascent,
            };
        }
        cfg.levels = s.levels.unwrap_or(cfg.levels);
        cfg.multistarts = s.multistarts.unwrap_or(cfg.multistarts);
        cfg.budget = s.budget.unwrap_or(cfg.budget);
        cfg.grid_n = s.grid_n.unwrap_or(cfg.grid_n);
        cfg.price_step = s.price_step.or(cfg.price_step);
        cfg.seed = seed;
        cfg.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn cdf(&self) -> CdfKind {
        match self.solver.cdf.unwrap_or(CdfSpec::Spread) {
            CdfSpec::Uniform => CdfKind::Uniform,
            CdfSpec::Spread => CdfKind::Spread,
            CdfSpec::Atomic => CdfKind::Atomic,
        }
    }

    /// Window `(alpha, beta)` of an interval region, if any.
    pub fn interval_window(&self) -> Option<(f64, f64)> {
        match &self.region {
            RegionSpec::Interval { window, .. } => window.map(|[l, r]| (l, r)),
            _ => None,
        }
    }

    pub fn game(&self, inst: &Instance) -> Result<(GameContext, &GameSpec), Failure> {
        let spec = self
            .game
            .as_ref()
            .ok_or_else(|| invalid("the nash model needs a [game] table"))?;
        let region = &inst.region;
        let ctx = match (spec.split, &spec.a_mask, &spec.b_mask) {
            (Some(split), None, None) => {
                if region.dim() != 1 {
                    return Err(invalid("game.split needs a one-dimensional region"));
                }
                GameContext::split_interval(
                    region,
                    &inst.kernel,
                    &inst.measure,
                    split,
                    spec.upper_bound,
                )
            }
            (None, Some(a), Some(b)) => GameContext::new(
                region,
                &inst.kernel,
                a.clone(),
                b.clone(),
                &inst.measure,
                spec.upper_bound,
            ),
            _ => {
                return Err(invalid(
                    "give either game.split or both game.a_mask and game.b_mask",
                ))
            }
        };
        let ctx = ctx.map_err(|e| invalid(e.to_string()))?;
        if !(spec.eps.is_finite() && spec.eps >= 0.0) {
            return Err(invalid("game.eps must be finite and nonnegative"));
        }
        if spec.rounds == 0 {
            return Err(invalid("game.rounds must be at least 1"));
        }
        Ok((ctx, spec))
    }
}

fn first_coordinate_range(region: &Region) -> (f64, f64) {
    region
        .points()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[0]), hi.max(p[0]))
        })
}

pub fn price_pattern(spec: &PriceSpec, region: &Region) -> Result<PricePattern, Failure> {
    let values = match spec {
        PriceSpec::Constant { value } => vec![*value; region.len()],
        PriceSpec::Values { values } => {
            if values.len() != region.len() {
                return Err(invalid(format!(
                    "{} prices for {} points",
                    values.len(),
                    region.len()
                )));
            }
            values.clone()
        }
        PriceSpec::Polynomial { coefficients } => region
            .points()
            .iter()
            .map(|p| coefficients.iter().rev().fold(0.0, |acc, c| acc * p[0] + c))
            .collect(),
    };
    PricePattern::finite(values).map_err(|e| invalid(e.to_string()))
}
