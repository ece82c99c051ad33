//! Dispatch from a scenario to the solvers, and the result bundle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use spatprice::model_two::{self, PartitionContext};
use spatprice::nash::{self, Player};
use spatprice::{
    model_one, Diagnostics, ModelOneReport, ModelTwoReport, PricePattern, SearchConfig, SearchMode,
};

use crate::scenario::{price_pattern, Instance, Model, PriceSpec, Scenario};
use crate::Failure;

pub const TOOL: &str = "spatprice";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub scenario_sha256: String,
    pub seed: u64,
}

/// Per-point data. `price`, `value` and `assignment` are `None` where
/// undefined (no price, or customer not served).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Series {
    pub coords: Vec<Vec<f64>>,
    pub price: Vec<Option<f64>>,
    pub value: Vec<f64>,
    pub assignment: Vec<Option<usize>>,
    pub captured: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub method: String,
    pub profit: f64,
    /// Profit of the reported price pattern on the discrete region.
    pub discrete_profit: f64,
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    pub player: String,
    pub sup_delta: f64,
    pub payoff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bundle {
    pub provenance: Provenance,
    pub scenario: String,
    pub summary: Summary,
    pub report: Value,
    pub series: Series,
    #[serde(default)]
    pub trace: Vec<TraceRow>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn diagnostics_json(d: &Diagnostics) -> Value {
    json!({
        "evaluations": d.evaluations,
        "space_size": d.space_size,
        "notes": d.notes,
        "trace_length": d.trace.len(),
    })
}

fn coords(inst: &Instance) -> Vec<Vec<f64>> {
    (0..inst.region.len())
        .map(|i| inst.region.point(i)[..inst.region.dim()].to_vec())
        .collect()
}

fn prices_of(p: &PricePattern) -> Vec<Option<f64>> {
    (0..p.len()).map(|i| p.get(i).finite()).collect()
}

/// Solver output before provenance is attached.
pub struct Outcome {
    pub summary: Summary,
    pub report: Value,
    pub series: Series,
    pub trace: Vec<TraceRow>,
    /// Quantization resolution of the method, in price units.
    pub resolution: f64,
}

pub fn solve(
    sc: &Scenario,
    inst: &Instance,
    method: &str,
    cfg: &SearchConfig,
) -> Result<Outcome, Failure> {
    match sc.model {
        Model::One => solve_one(sc, inst, method, cfg),
        Model::Two => solve_two(sc, inst, method, cfg),
        Model::Nash => solve_nash(sc, inst, method, cfg),
    }
}

fn solve_one(
    sc: &Scenario,
    inst: &Instance,
    method: &str,
    cfg: &SearchConfig,
) -> Result<Outcome, Failure> {
    let p0 = sc.price_bound(&inst.region)?;
    let (kernel, f) = (&inst.kernel, &inst.measure);
    let range = (0..p0.len()).map(|i| p0.at(i)).fold(0.0, f64::max);
    let (rep, resolution): (ModelOneReport, f64) = match method {
        "metric" => (model_one::solve_metric(&p0, kernel, f)?, 0.0),
        "general" => (
            model_one::solve_general(&p0, kernel, f, cfg)?,
            2.0 * range / cfg.levels as f64,
        ),
        "quadratic_reference" => (
            model_one::quadratic_1d_report(&inst.region, kernel, f)?,
            0.0,
        ),
        other => {
            return Err(Failure::Validation(format!(
                "method {other} does not apply to model one"
            )))
        }
    };
    let series = Series {
        coords: coords(inst),
        price: prices_of(&rep.optimal_price),
        value: rep.optimal_value.values().to_vec(),
        assignment: rep.assignment.choice.clone(),
        captured: rep.assignment.choice.iter().map(Option::is_some).collect(),
    };
    let report = json!({
        "method": rep.method,
        "diagnostics": diagnostics_json(&rep.diagnostics),
    });
    let summary = Summary {
        model: "one".into(),
        method: method.into(),
        profit: rep.profit,
        discrete_profit: model_one::profit_f(&rep.optimal_price, kernel, f)?,
        extra: BTreeMap::new(),
    };
    Ok(Outcome {
        summary,
        report,
        series,
        trace: Vec::new(),
        resolution,
    })
}

fn partition(sc: &Scenario, inst: &Instance) -> Result<PartitionContext, Failure> {
    let p0 = sc.price_bound(&inst.region)?;
    Ok(PartitionContext::new(&inst.region, &inst.kernel, &p0)?)
}

fn solve_two(
    sc: &Scenario,
    inst: &Instance,
    method: &str,
    cfg: &SearchConfig,
) -> Result<Outcome, Failure> {
    let (kernel, f) = (&inst.kernel, &inst.measure);
    let ctx = partition(sc, inst)?;
    let cap = ctx
        .v0()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let (rep, resolution): (ModelTwoReport, f64) = match method {
        "w_search" => {
            let res = match cfg.mode {
                SearchMode::Exhaustive => cap / (cfg.levels - 1) as f64,
                SearchMode::Ascent => 0.0,
            };
            (model_two::solve_w_search(&ctx, kernel, f, cfg)?, res)
        }
        "boundary_control" => {
            let res = match cfg.mode {
                SearchMode::Exhaustive => cfg.step_for(cap),
                SearchMode::Ascent => 0.0,
            };
            (
                model_two::boundary_control_solve(&ctx, kernel, f, cfg)?,
                res,
            )
        }
        "one_d" => {
            let (alpha, beta) = sc.interval_window().ok_or_else(|| {
                Failure::Validation("one_d needs an interval region with a window".into())
            })?;
            let p0 = match &sc.prices {
                Some(PriceSpec::Constant { value }) => *value,
                _ => {
                    return Err(Failure::Validation(
                        "one_d needs a constant price on the fixed window".into(),
                    ))
                }
            };
            let rep =
                model_two::one_d_reduction(alpha, beta, p0, &inst.region, f, sc.cdf(), cfg.grid_n)?;
            let spacing = inst.region.spacing().unwrap_or(0.0);
            (rep, p0 / (cfg.grid_n - 1) as f64 + spacing)
        }
        other => {
            return Err(Failure::Validation(format!(
                "method {other} does not apply to model two"
            )))
        }
    };
    let discrete = model_two::pi_evaluation(&rep.optimal_price, &ctx, kernel, f)?;
    let mut captured = vec![false; ctx.len()];
    for &x in &rep.omega1 {
        captured[x] = true;
    }
    let series = Series {
        coords: coords(inst),
        price: prices_of(&rep.optimal_price),
        value: rep.w_opt.values().to_vec(),
        assignment: rep.assignment.choice.clone(),
        captured,
    };
    let report = json!({
        "method": rep.method,
        "controls": rep.controls,
        "omega0": rep.omega0.len(),
        "omega1": rep.omega1.len(),
        "warnings": rep.warnings,
        "diagnostics": diagnostics_json(&rep.diagnostics),
    });
    let mut extra = BTreeMap::new();
    extra.insert("expenditure_form".to_owned(), discrete.vg_form);
    let summary = Summary {
        model: "two".into(),
        method: method.into(),
        profit: rep.profit,
        discrete_profit: discrete.h_form,
        extra,
    };
    Ok(Outcome {
        summary,
        report,
        series,
        trace: Vec::new(),
        resolution,
    })
}

fn strategy(
    spec: Option<&PriceSpec>,
    who: Player,
    ctx: &nash::GameContext,
    inst: &Instance,
) -> Result<PricePattern, Failure> {
    let full = price_pattern(
        spec.unwrap_or(&PriceSpec::Constant { value: 1.0 }),
        &inst.region,
    )?;
    let values: Vec<f64> = ctx.region_of(who).iter().map(|&i| full.at(i)).collect();
    Ok(ctx.strategy(who, &values)?)
}

fn solve_nash(
    sc: &Scenario,
    inst: &Instance,
    method: &str,
    cfg: &SearchConfig,
) -> Result<Outcome, Failure> {
    let (ctx, spec) = sc.game(inst)?;
    let p = strategy(spec.p_init.as_ref(), Player::A, &ctx, inst)?;
    let q = strategy(spec.q_init.as_ref(), Player::B, &ctx, inst)?;
    let cap = [&p, &q]
        .iter()
        .flat_map(|s| (0..s.len()).filter_map(|i| s.get(i).finite()))
        .fold(0.0, f64::max);
    let resolution = match cfg.mode {
        SearchMode::Exhaustive => cfg.step_for(cap),
        SearchMode::Ascent => 0.0,
    };
    let mut extra = BTreeMap::new();
    let mut trace = Vec::new();
    let (p_fin, q_fin, report) = match method {
        "dynamics" => {
            let tr = nash::best_response_dynamics(&p, &q, &ctx, cfg, spec.rounds, spec.eps)?;
            for r in &tr.rounds {
                trace.push(TraceRow {
                    round: r.round,
                    player: "A".into(),
                    sup_delta: r.delta_p,
                    payoff: r.payoff_a,
                });
                trace.push(TraceRow {
                    round: r.round,
                    player: "B".into(),
                    sup_delta: r.delta_q,
                    payoff: r.payoff_b,
                });
            }
            extra.insert("rounds".to_owned(), tr.rounds.len() as f64);
            extra.insert("converged".to_owned(), if tr.converged { 1.0 } else { 0.0 });
            let last = tr.last();
            let report = json!({
                "converged": tr.converged,
                "oscillation_period": tr.oscillation_period,
                "gaps": tr.rounds.iter().map(|r| [r.gap_a, r.gap_b]).collect::<Vec<_>>(),
            });
            (
                ctx.strategy(Player::A, &last.p)?,
                ctx.strategy(Player::B, &last.q)?,
                report,
            )
        }
        "verify" => {
            let rep = nash::verify_equilibrium(&p, &q, &ctx, cfg)?;
            extra.insert("gain_a".to_owned(), rep.best_deviation_gain_a);
            extra.insert("gain_b".to_owned(), rep.best_deviation_gain_b);
            extra.insert(
                "is_equilibrium".to_owned(),
                if rep.is_equilibrium { 1.0 } else { 0.0 },
            );
            (
                p,
                q,
                serde_json::to_value(&rep).map_err(|e| Failure::Io(e.into()))?,
            )
        }
        other => {
            return Err(Failure::Validation(format!(
                "method {other} does not apply to the game"
            )))
        }
    };
    let pay = nash::payoffs(&p_fin, &q_fin, &ctx)?;
    let mut report = report;
    report["strategies"] = json!({
        "p": ctx.region_of(Player::A).iter().map(|&i| p_fin.at(i)).collect::<Vec<_>>(),
        "q": ctx.region_of(Player::B).iter().map(|&i| q_fin.at(i)).collect::<Vec<_>>(),
    });
    extra.insert("payoff_a".to_owned(), pay.a);
    extra.insert("payoff_b".to_owned(), pay.b);
    let series = Series {
        coords: coords(inst),
        price: (0..ctx.len())
            .map(|i| p_fin.get(i).finite().or_else(|| q_fin.get(i).finite()))
            .collect(),
        value: pay
            .v_p
            .iter()
            .zip(&pay.w_q)
            .map(|(v, w)| v.min(*w))
            .collect(),
        assignment: pay
            .served_by
            .iter()
            .map(|s| match s {
                nash::Served::A => Some(0),
                nash::Served::B => Some(1),
                nash::Served::Nobody => None,
            })
            .collect(),
        captured: pay
            .served_by
            .iter()
            .map(|s| *s == nash::Served::A)
            .collect(),
    };
    let summary = Summary {
        model: "nash".into(),
        method: method.into(),
        profit: pay.a + pay.b,
        discrete_profit: pay.a + pay.b,
        extra,
    };
    Ok(Outcome {
        summary,
        report,
        series,
        trace,
        resolution,
    })
}

/// Rebuilds the instance from the embedded scenario and re-checks the
/// reported numbers: series sizes, price feasibility and the profit of the
/// reported prices.
pub fn validate(bundle: &Bundle) -> Result<Vec<String>, Failure> {
    let sc = Scenario::parse(&bundle.scenario)?;
    let inst = sc.instance()?;
    let n = inst.region.len();
    let mut problems = Vec::new();
    let s = &bundle.series;
    if [
        s.coords.len(),
        s.price.len(),
        s.value.len(),
        s.assignment.len(),
        s.captured.len(),
    ]
    .iter()
    .any(|&l| l != n)
    {
        problems.push(format!("series lengths differ from the region size {n}"));
        return Ok(problems);
    }
    if sha256_hex(bundle.scenario.as_bytes()) != bundle.provenance.scenario_sha256 {
        problems.push("scenario hash does not match the embedded scenario".into());
    }
    let tol = inst.kernel.tol() * (1.0 + inst.measure.total_mass());
    let recomputed = match sc.model {
        Model::One => {
            let p0 = sc.price_bound(&inst.region)?;
            let prices: Option<Vec<f64>> = s.price.clone().into_iter().collect();
            let Some(prices) = prices else {
                problems.push("model one prices must be finite everywhere".into());
                return Ok(problems);
            };
            for (i, &p) in prices.iter().enumerate() {
                if p < -tol || p > p0.at(i) + tol {
                    problems.push(format!("price at {i} outside [0, p0]"));
                }
            }
            model_one::profit_f(&PricePattern::finite(prices)?, &inst.kernel, &inst.measure)?
        }
        Model::Two => {
            let ctx = partition(&sc, &inst)?;
            let prices: Option<Vec<f64>> = s.price.clone().into_iter().collect();
            let Some(prices) = prices else {
                problems.push("model two prices must be finite everywhere".into());
                return Ok(problems);
            };
            if prices.iter().any(|&p| p < -tol) {
                problems.push("negative price".into());
            }
            let pattern = PricePattern::finite(prices)?;
            match model_two::pi_evaluation(&pattern, &ctx, &inst.kernel, &inst.measure) {
                Ok(e) => e.h_form,
                Err(e) => {
                    problems.push(format!("prices do not respect the fixed subregion: {e}"));
                    return Ok(problems);
                }
            }
        }
        Model::Nash => {
            let (ctx, _) = sc.game(&inst)?;
            let take = |key: &str| -> Option<Vec<f64>> {
                bundle
                    .report
                    .get("strategies")?
                    .get(key)?
                    .as_array()?
                    .iter()
                    .map(Value::as_f64)
                    .collect()
            };
            let (Some(pa), Some(pb)) = (take("p"), take("q")) else {
                problems.push("report lacks the final strategies".into());
                return Ok(problems);
            };
            let pay = ctx.strategy(Player::A, &pa).and_then(|p| {
                ctx.strategy(Player::B, &pb)
                    .and_then(|q| nash::payoffs(&p, &q, &ctx))
            });
            match pay {
                Ok(pay) => pay.a + pay.b,
                Err(e) => {
                    problems.push(e.to_string());
                    return Ok(problems);
                }
            }
        }
    };
    if (recomputed - bundle.summary.discrete_profit).abs() > tol {
        problems.push(format!(
            "recomputed profit {recomputed} differs from the reported {}",
            bundle.summary.discrete_profit
        ));
    }
    Ok(problems)
}
