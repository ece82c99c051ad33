//! Two agents pricing the regions `A` and `B` with `A ∪ B = Q`.
//!
//! Customers compare `v_p` (cheapest purchase from `A`) with `w_q` (cheapest
//! from `B`); ties go to the customer's home region, and points in both
//! regions carry no mass. Best responses search the interface-controlled
//! family of the partitioned model: the mover's prices are rebuilt from
//! prices on the points of its region touching the opponent's.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{CostKernel, CustomerMeasure, Price, PricePattern, Region};
use crate::model_two;
use crate::search::{self, Diagnostics, SearchConfig, SearchMode};

/// One of the two agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Player {
    A,
    B,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::A => Player::B,
            Player::B => Player::A,
        }
    }
}

/// Regions, cost and (overlap-free) measure of the game.
#[derive(Debug, Clone)]
pub struct GameContext {
    kernel: CostKernel,
    in_a: Vec<bool>,
    in_b: Vec<bool>,
    a: Vec<usize>,
    b: Vec<usize>,
    interface_a: Vec<usize>,
    interface_b: Vec<usize>,
    f: CustomerMeasure,
    upper_bound: Option<f64>,
}

impl GameContext {
    /// `in_a` / `in_b` mark the two regions; every point must be in at
    /// least one. The measure is zeroed on the overlap.
    pub fn new(
        region: &Region,
        kernel: &CostKernel,
        in_a: Vec<bool>,
        in_b: Vec<bool>,
        f: &CustomerMeasure,
        upper_bound: Option<f64>,
    ) -> Result<Self> {
        let n = region.len();
        if kernel.len() != n || f.len() != n || in_a.len() != n || in_b.len() != n {
            return Err(Error::InvalidArgument(
                "region, kernel, measure and masks must have the same size".into(),
            ));
        }
        if let Some(x) = (0..n).find(|&x| !in_a[x] && !in_b[x]) {
            return Err(Error::InvalidRegion(format!(
                "point {x} belongs to neither region"
            )));
        }
        if let Some(u) = upper_bound {
            if !(u.is_finite() && u >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "upper bound must be finite and nonnegative, got {u}"
                )));
            }
        }
        let a: Vec<usize> = (0..n).filter(|&x| in_a[x]).collect();
        let b: Vec<usize> = (0..n).filter(|&x| in_b[x]).collect();
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidRegion("both regions must be nonempty".into()));
        }
        let overlap: Vec<usize> = (0..n).filter(|&x| in_a[x] && in_b[x]).collect();
        let interface = |own: &[bool], other: &[bool]| -> Vec<usize> {
            let found: Vec<usize> = (0..n)
                .filter(|&x| {
                    own[x]
                        && (other[x]
                            || region.neighbors(x).into_iter().any(|y| other[y] && !own[y]))
                })
                .collect();
            if found.is_empty() {
                (0..n).filter(|&x| own[x]).collect()
            } else {
                found
            }
        };
        Ok(Self {
            kernel: kernel.clone(),
            interface_a: interface(&in_a, &in_b),
            interface_b: interface(&in_b, &in_a),
            in_a,
            in_b,
            a,
            b,
            f: f.zeroed_at(&overlap),
            upper_bound,
        })
    }

    /// `A = {x <= split}` and `B = {x >= split}` on an interval.
    pub fn split_interval(
        region: &Region,
        kernel: &CostKernel,
        f: &CustomerMeasure,
        split: f64,
        upper_bound: Option<f64>,
    ) -> Result<Self> {
        let tol = 1e-12 * (1.0 + split.abs());
        let in_a = (0..region.len())
            .map(|i| region.coord(i) <= split + tol)
            .collect();
        let in_b = (0..region.len())
            .map(|i| region.coord(i) >= split - tol)
            .collect();
        Self::new(region, kernel, in_a, in_b, f, upper_bound)
    }

    pub fn len(&self) -> usize {
        self.in_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.in_a.is_empty()
    }

    pub fn kernel(&self) -> &CostKernel {
        &self.kernel
    }

    /// Measure actually used, with the overlap zeroed.
    pub fn measure(&self) -> &CustomerMeasure {
        &self.f
    }

    pub fn upper_bound(&self) -> Option<f64> {
        self.upper_bound
    }

    pub fn region_of(&self, player: Player) -> &[usize] {
        match player {
            Player::A => &self.a,
            Player::B => &self.b,
        }
    }

    pub fn mask_of(&self, player: Player) -> &[bool] {
        match player {
            Player::A => &self.in_a,
            Player::B => &self.in_b,
        }
    }

    /// Points of the player's region in or next to the opponent's region.
    pub fn interface_of(&self, player: Player) -> &[usize] {
        match player {
            Player::A => &self.interface_a,
            Player::B => &self.interface_b,
        }
    }

    /// Same game with another customer measure.
    pub fn with_measure(&self, f: &CustomerMeasure) -> Result<Self> {
        if f.len() != self.len() {
            return Err(Error::InvalidArgument(
                "measure size differs from the game".into(),
            ));
        }
        let overlap: Vec<usize> = (0..self.len())
            .filter(|&x| self.in_a[x] && self.in_b[x])
            .collect();
        Ok(Self {
            f: f.zeroed_at(&overlap),
            ..self.clone()
        })
    }

    /// Pattern with `values` (aligned with the player's region) and `+inf`
    /// elsewhere.
    pub fn strategy(&self, player: Player, values: &[f64]) -> Result<PricePattern> {
        let idx = self.region_of(player);
        if values.len() != idx.len() {
            return Err(Error::InvalidArgument(format!(
                "strategy needs {} values, got {}",
                idx.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidPrice(format!(
                "strategy prices must be finite and nonnegative, got {v}"
            )));
        }
        PricePattern::new(vec![Price::Unbounded; self.len()]).map(|p| p.with_values(idx, values))
    }

    fn values_on(&self, player: Player, p: &PricePattern) -> Result<Vec<f64>> {
        if p.len() != self.len() {
            return Err(Error::InvalidArgument(
                "strategy size differs from the game".into(),
            ));
        }
        self.region_of(player)
            .iter()
            .map(|&y| match p.get(y) {
                Price::Finite(v) if v >= 0.0 => Ok(v),
                _ => Err(Error::InvalidPrice(format!(
                    "strategy must be finite and nonnegative at point {y}"
                ))),
            })
            .collect()
    }
}

/// Who serves a customer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Served {
    A,
    B,
    Nobody,
}

/// Payoffs and the customer partition behind them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Payoffs {
    pub a: f64,
    pub b: f64,
    pub served_by: Vec<Served>,
    /// Price paid by each customer (0 when unserved).
    pub paid: Vec<f64>,
    pub v_p: Vec<f64>,
    pub w_q: Vec<f64>,
}

#[derive(Clone, Copy)]
enum TieRule {
    Home,
    Favor(Player),
}

/// Cheapest expenditure over `shops` and the highest price among the shops
/// attaining it.
fn best_offer(
    kernel: &CostKernel,
    x: usize,
    shops: &[usize],
    prices: &[f64],
    tol: f64,
) -> (f64, f64) {
    let row = kernel.row(x);
    let v = shops
        .iter()
        .zip(prices)
        .map(|(&y, &p)| row[y] + p)
        .fold(f64::INFINITY, f64::min);
    let paid = shops
        .iter()
        .zip(prices)
        .filter(|(&y, &p)| row[y] + p <= v + tol)
        .map(|(_, &p)| p)
        .fold(f64::NEG_INFINITY, f64::max);
    (v, paid)
}

fn evaluate(ctx: &GameContext, p: &[f64], q: &[f64], rule: TieRule) -> Payoffs {
    let kernel = &ctx.kernel;
    let tol = kernel.tol();
    let n = ctx.len();
    let mut out = Payoffs {
        a: 0.0,
        b: 0.0,
        served_by: Vec::with_capacity(n),
        paid: Vec::with_capacity(n),
        v_p: Vec::with_capacity(n),
        w_q: Vec::with_capacity(n),
    };
    for x in 0..n {
        let (v, pa) = best_offer(kernel, x, &ctx.a, p, tol);
        let (w, pb) = best_offer(kernel, x, &ctx.b, q, tol);
        let side = if v < w - tol {
            Served::A
        } else if w < v - tol {
            Served::B
        } else if !v.is_finite() {
            Served::Nobody
        } else {
            match rule {
                TieRule::Home if ctx.in_a[x] => Served::A,
                TieRule::Home => Served::B,
                TieRule::Favor(Player::A) => Served::A,
                TieRule::Favor(Player::B) => Served::B,
            }
        };
        let fx = ctx.f.weight(x);
        let paid = match side {
            Served::A => {
                out.a += fx * pa;
                pa
            }
            Served::B => {
                out.b += fx * pb;
                pb
            }
            Served::Nobody => 0.0,
        };
        out.served_by.push(side);
        out.paid.push(paid);
        out.v_p.push(v);
        out.w_q.push(w);
    }
    out
}

/// `(Π_A, Π_B)` for `p` on `A` and `q` on `B`, with ties resolved by home
/// region and, within a region, by the highest price.
pub fn payoffs(p: &PricePattern, q: &PricePattern, ctx: &GameContext) -> Result<Payoffs> {
    let pv = ctx.values_on(Player::A, p)?;
    let qv = ctx.values_on(Player::B, q)?;
    Ok(evaluate(ctx, &pv, &qv, TieRule::Home))
}

/// Best response with its evaluation under both tie rules.
#[derive(Debug, Clone)]
pub struct BestResponse {
    pub player: Player,
    pub price: PricePattern,
    /// Prices aligned with the player's region.
    pub values: Vec<f64>,
    /// Payoff under the home-region tie rule.
    pub payoff: f64,
    /// Profit of the same prices in the partitioned model, where every tie
    /// goes to the mover.
    pub model_two_profit: f64,
    pub gap: f64,
    /// Interface prices of the chosen member of the family.
    pub controls: Vec<f64>,
    pub diagnostics: Diagnostics,
}

fn split_by(player: Player, own: &[f64], opp: &[f64]) -> (Vec<f64>, Vec<f64>) {
    match player {
        Player::A => (own.to_vec(), opp.to_vec()),
        Player::B => (opp.to_vec(), own.to_vec()),
    }
}

fn payoff_of(player: Player, pay: &Payoffs) -> f64 {
    match player {
        Player::A => pay.a,
        Player::B => pay.b,
    }
}

struct Family<'a> {
    ctx: &'a GameContext,
    player: Player,
    opp: Vec<f64>,
    controls_at: Vec<usize>,
    caps: Vec<f64>,
    interface: bool,
}

impl Family<'_> {
    fn build(&self, controls: &[f64]) -> Vec<f64> {
        let own = self.ctx.region_of(self.player);
        let bound = self.ctx.upper_bound.unwrap_or(f64::INFINITY);
        if self.interface {
            let w = model_two::state_equation(controls, &self.controls_at, &self.ctx.kernel);
            own.iter().map(|&y| w[y].min(bound)).collect()
        } else {
            controls.to_vec()
        }
    }

    fn score(&self, controls: &[f64]) -> f64 {
        let own = self.build(controls);
        let (p, q) = split_by(self.player, &own, &self.opp);
        payoff_of(self.player, &evaluate(self.ctx, &p, &q, TieRule::Home))
    }

    fn lipschitz(&self, phi: &[f64]) -> bool {
        if !self.interface {
            return true;
        }
        let tol = self.ctx.kernel.tol();
        let k = &self.controls_at;
        (0..phi.len()).all(|i| {
            (0..i).all(|j| (phi[i] - phi[j]).abs() <= self.ctx.kernel.cost(k[i], k[j]) + tol)
        })
    }
}

/// Best response of `player` to the opponent's pattern. For the distance
/// cost the family is `p = min_b (c(., b) + phi(b))` over interface points
/// `b` with `0 <= phi(b) <= w(b)`, where `w` is the opponent's expenditure
/// (and the upper bound, if any); `phi` is 1-Lipschitz and, in exhaustive
/// mode, a multiple of `cfg.step_for(cap)`. Other costs search the prices
/// on the player's region directly. Equal payoffs resolve to the lowest
/// prices.
pub fn best_response(
    player: Player,
    opponent: &PricePattern,
    ctx: &GameContext,
    cfg: &SearchConfig,
) -> Result<BestResponse> {
    cfg.validate()?;
    let opp = ctx.values_on(player.other(), opponent)?;
    let kernel = &ctx.kernel;
    let tol = kernel.tol() * (1.0 + ctx.f.total_mass());
    let opp_shops = ctx.region_of(player.other());
    let expenditure = |x: usize| best_offer(kernel, x, opp_shops, &opp, kernel.tol()).0;
    let bound = ctx.upper_bound.unwrap_or(f64::INFINITY);
    let interface = kernel.is_euclidean();
    let controls_at: Vec<usize> = if interface {
        ctx.interface_of(player).to_vec()
    } else {
        ctx.region_of(player).to_vec()
    };
    let caps: Vec<f64> = if interface {
        controls_at
            .iter()
            .map(|&b| expenditure(b).min(bound).max(0.0))
            .collect()
    } else {
        controls_at
            .iter()
            .map(|&y| {
                let reach = (0..ctx.len())
                    .map(|x| expenditure(x) - kernel.cost(x, y))
                    .fold(0.0, f64::max);
                reach.min(bound)
            })
            .collect()
    };
    let family = Family {
        ctx,
        player,
        opp,
        controls_at,
        caps,
        interface,
    };
    let outcome = match cfg.mode {
        SearchMode::Exhaustive => {
            let levels: Vec<Vec<f64>> = family
                .caps
                .iter()
                .map(|&c| search::stepped_levels(c, cfg.step_for(c)))
                .collect();
            search::exhaustive(&levels, cfg.budget, tol, |phi| {
                family.lipschitz(phi).then(|| family.score(phi))
            })?
        }
        SearchMode::Ascent => search::ascent(
            &family.caps,
            cfg,
            tol,
            &[vec![0.0; family.caps.len()]],
            |phi| family.score(phi),
        ),
    };
    let values = family.build(&outcome.best);
    let (p, q) = split_by(player, &values, &family.opp);
    let payoff = payoff_of(player, &evaluate(ctx, &p, &q, TieRule::Home));
    let model_two_profit = payoff_of(player, &evaluate(ctx, &p, &q, TieRule::Favor(player)));
    let mut diagnostics = Diagnostics::from(&outcome);
    diagnostics.notes.push(format!(
        "payoff {payoff:.17e}, partitioned-model profit {model_two_profit:.17e}"
    ));
    Ok(BestResponse {
        player,
        price: ctx.strategy(player, &values)?,
        values,
        payoff,
        model_two_profit,
        gap: model_two_profit - payoff,
        controls: outcome.best,
        diagnostics,
    })
}

/// One round: `A` answers the previous `q`, then `B` answers the new `p`.
#[derive(Debug, Clone, Serialize)]
pub struct Round {
    pub round: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub payoff_a: f64,
    pub payoff_b: f64,
    pub delta_p: f64,
    pub delta_q: f64,
    pub gap_a: f64,
    pub gap_b: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DynamicsTrace {
    pub rounds: Vec<Round>,
    pub converged: bool,
    /// Set when the state returns to one seen 2 to 4 rounds earlier.
    pub oscillation_period: Option<usize>,
}

impl DynamicsTrace {
    pub fn last(&self) -> &Round {
        self.rounds.last().expect("a trace has at least one round")
    }
}

/// Number of past rounds scanned for a repeated state.
pub const OSCILLATION_WINDOW: usize = 4;

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Alternating best responses until both strategies move by at most `eps`
/// in sup norm, a cycle is detected, or `rounds` is exhausted.
pub fn best_response_dynamics(
    p_init: &PricePattern,
    q_init: &PricePattern,
    ctx: &GameContext,
    cfg: &SearchConfig,
    rounds: usize,
    eps: f64,
) -> Result<DynamicsTrace> {
    if rounds == 0 {
        return Err(Error::InvalidArgument(
            "dynamics need at least one round".into(),
        ));
    }
    let mut p = ctx.values_on(Player::A, p_init)?;
    let mut q = ctx.values_on(Player::B, q_init)?;
    let mut history: Vec<(Vec<f64>, Vec<f64>)> = vec![(p.clone(), q.clone())];
    let mut trace = DynamicsTrace {
        rounds: Vec::new(),
        converged: false,
        oscillation_period: None,
    };
    for round in 1..=rounds {
        let ra = best_response(Player::A, &ctx.strategy(Player::B, &q)?, ctx, cfg)?;
        let rb = best_response(Player::B, &ra.price, ctx, cfg)?;
        let pay = evaluate(ctx, &ra.values, &rb.values, TieRule::Home);
        let delta_p = sup_dist(&ra.values, &p);
        let delta_q = sup_dist(&rb.values, &q);
        p = ra.values;
        q = rb.values;
        trace.rounds.push(Round {
            round,
            p: p.clone(),
            q: q.clone(),
            payoff_a: pay.a,
            payoff_b: pay.b,
            delta_p,
            delta_q,
            gap_a: ra.gap,
            gap_b: rb.gap,
        });
        if delta_p.max(delta_q) <= eps {
            trace.converged = true;
            break;
        }
        let period = (2..=OSCILLATION_WINDOW).find(|&k| {
            history.len() >= k && {
                let (hp, hq) = &history[history.len() - k];
                sup_dist(hp, &p).max(sup_dist(hq, &q)) <= eps
            }
        });
        history.push((p.clone(), q.clone()));
        if period.is_some() {
            trace.oscillation_period = period;
            break;
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub is_equilibrium: bool,
    pub payoff_a: f64,
    pub payoff_b: f64,
    pub best_deviation_gain_a: f64,
    pub best_deviation_gain_b: f64,
    pub deviation_a: Vec<f64>,
    pub deviation_b: Vec<f64>,
    pub tolerance: f64,
    pub limitation: String,
}

/// Looks for profitable unilateral deviations within the best-response
/// family of each player.
pub fn verify_equilibrium(
    p: &PricePattern,
    q: &PricePattern,
    ctx: &GameContext,
    cfg: &SearchConfig,
) -> Result<EquilibriumReport> {
    let base = payoffs(p, q, ctx)?;
    let ra = best_response(Player::A, q, ctx, cfg)?;
    let rb = best_response(Player::B, p, ctx, cfg)?;
    let tolerance = ctx.kernel.tol() * (1.0 + ctx.f.total_mass());
    let gain_a = (ra.payoff - base.a).max(0.0);
    let gain_b = (rb.payoff - base.b).max(0.0);
    Ok(EquilibriumReport {
        is_equilibrium: gain_a <= tolerance && gain_b <= tolerance,
        payoff_a: base.a,
        payoff_b: base.b,
        best_deviation_gain_a: gain_a,
        best_deviation_gain_b: gain_b,
        deviation_a: ra.values,
        deviation_b: rb.values,
        tolerance,
        limitation: "deviations outside the best-response family are not searched".into(),
    })
}
