//! Acceptance suite: one PASS/FAIL line per criterion, written straight to
//! stdout so it shows without `--nocapture`. The criteria run one after the
//! other so their runtimes are measured without contention.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatprice::ctransform::{self, c_envelope, c_transform, is_c_concave};
use spatprice::model_two::{self, CdfKind, PartitionContext};
use spatprice::nash::{self, GameContext, Player};
use spatprice::{
    model_one, CostKernel, CostKind, CustomerMeasure, Mask, PricePattern, Region, SearchConfig,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn report(id: usize, v: &Verdict, elapsed: Duration) {
    let line = format!(
        "criterion {id}: {} ({:.1} s) {}\n",
        if v.pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        v.detail
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            [
                rng.gen::<f64>(),
                if dim == 2 { rng.gen::<f64>() } else { 0.0 },
            ]
        })
        .collect()
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> CustomerMeasure {
    CustomerMeasure::from_weights((0..n).map(|_| rng.gen_range(0.05..1.0)).collect())
        .unwrap()
        .normalized()
        .unwrap()
}

/// Metric power, quadratic or a random table with zero diagonal.
fn random_kernel(rng: &mut ChaCha8Rng, region: &Region) -> CostKernel {
    match rng.gen_range(0..3) {
        0 => CostKernel::evaluate(
            CostKind::MetricPower {
                alpha: rng.gen_range(0.3..=1.0),
            },
            region,
        )
        .unwrap(),
        1 => CostKernel::evaluate(CostKind::Quadratic, region).unwrap(),
        _ => {
            let n = region.len();
            let rows = (0..n)
                .map(|x| {
                    (0..n)
                        .map(|y| if x == y { 0.0 } else { rng.gen_range(0.0..1.0) })
                        .collect()
                })
                .collect();
            CostKernel::custom(rows).unwrap()
        }
    }
}

fn criterion_1() -> Verdict {
    let n = 41;
    let region = Region::interval(n, 0.0, 1.0, None).unwrap();
    let kernel = CostKernel::evaluate(CostKind::Quadratic, &region).unwrap();
    let f = CustomerMeasure::uniform(&region);
    let p0 = PricePattern::finite(
        (0..n)
            .map(|i| region.coord(i) - 0.5 * region.coord(i).powi(2))
            .collect(),
    )
    .unwrap();
    let rep = model_one::solve_general(&p0, &kernel, &f, &SearchConfig::ascent(8, 16, 0)).unwrap();
    let mut max_err: f64 = 0.0;
    let mut integral = 0.0;
    for i in 0..n {
        let x = region.coord(i);
        let p = rep.optimal_price.at(i);
        max_err = max_err.max((p - (x / 2.0 - x * x / 4.0)).abs());
        integral += f.weight(i) * p;
    }
    let reference = model_one::quadratic_1d_report(&region, &kernel, &f)
        .unwrap()
        .profit;
    let rel = (integral - 1.0 / 6.0).abs() * 6.0;
    Verdict {
        pass: max_err <= 0.02 && rel <= 0.01,
        detail: format!(
            "max|p - p_opt| = {max_err:.3e} (<= 0.02), integral of p = {integral:.6} vs 1/6 rel {rel:.2e} (<= 1%), \
             profit {:.6} vs closed-form price on the grid {reference:.6}",
            rep.profit
        ),
    }
}

fn criteria_2_and_3() -> (Verdict, Verdict) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut unequal = 0;
    for _ in 0..50 {
        let n = rng.gen_range(2..=6);
        let dim = rng.gen_range(1..=2);
        let region = Region::from_points(random_points(&mut rng, n, dim), dim, None).unwrap();
        let kernel = CostKernel::evaluate(CostKind::MetricPower { alpha: 1.0 }, &region).unwrap();
        let f = random_measure(&mut rng, n);
        let bound: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.5)).collect();
        let range = bound.iter().fold(0.0f64, |a, &b| a.max(b));
        let p0 = PricePattern::finite(bound).unwrap();
        let metric = model_one::solve_metric(&p0, &kernel, &f).unwrap();
        let exhaustive =
            model_one::solve_general(&p0, &kernel, &f, &SearchConfig::exhaustive(8)).unwrap();
        let excess = exhaustive.profit - metric.profit;
        worst_excess = worst_excess.max(excess);
        if excess > 2.0 * range / 8.0 {
            violations += 1;
        }
        for _ in 0..5 {
            let g = random_measure(&mut rng, n);
            if model_one::solve_metric(&p0, &kernel, &g)
                .unwrap()
                .optimal_price
                != metric.optimal_price
            {
                unequal += 1;
            }
        }
    }
    (
        Verdict {
            pass: violations == 0,
            detail: format!("50 instances, {violations} where exhaustive beats the closed form by more than 2*range/8; worst excess {worst_excess:.3e}"),
        },
        Verdict { pass: unequal == 0, detail: format!("250 measure swaps, {unequal} price patterns changed") },
    )
}

/// Endpoint shops at prices `(p1, p2)` against a fixed interior priced `p0`
/// on `[0, 1]` with uniform customers, written out independently.
fn endpoint_profit(p0: f64, p1: f64, p2: f64) -> f64 {
    let left = (p0 - p1).min(0.5 * (1.0 + p2 - p1)).clamp(0.0, 1.0);
    let right = (p0 - p2).min(0.5 * (1.0 + p1 - p2)).clamp(0.0, 1.0);
    p1 * left + p2 * right
}

fn criterion_4() -> Verdict {
    let region = Region::interval(101, 0.0, 1.0, None).unwrap();
    let f = CustomerMeasure::uniform(&region);
    let grid_n = 201;
    let mut pass = true;
    let mut notes = Vec::new();
    for p0 in [0.2, 0.4, 1.0, 2.0] {
        let rep = model_two::one_d_reduction(0.0, 1.0, p0, &region, &f, CdfKind::Uniform, grid_n)
            .unwrap();
        let step = p0 / (grid_n - 1) as f64;
        let formula = f64::max(p0 / 2.0, p0 - 0.5);
        let (p1, p2) = (rep.controls[0], rep.controls[1]);
        let mut brute = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..grid_n {
            for j in 0..grid_n {
                let (a, b) = (i as f64 * step, j as f64 * step);
                let v = endpoint_profit(p0, a, b);
                if v > brute.0 + 1e-12 {
                    brute = (v, a, b);
                }
            }
        }
        let ok = p1 == p2
            && (p1 - formula).abs() <= step + 1e-12
            && (rep.profit - brute.0).abs() <= 1e-9
            && (brute.1 - formula).abs() <= step + 1e-12;
        pass &= ok;
        notes.push(format!(
            "p0={p0}: p1={p1} p2={p2} formula {formula} brute max {:.6} at ({}, {})",
            brute.0, brute.1, brute.2
        ));
    }
    Verdict {
        pass,
        detail: notes.join("; "),
    }
}

fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> Vec<Mask> {
    loop {
        let masks: Vec<Mask> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    Mask::Fixed
                } else {
                    Mask::Free
                }
            })
            .collect();
        if masks.iter().any(|m| m.is_fixed()) && masks.iter().any(|m| m.is_free()) {
            return masks;
        }
    }
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    for case in 0..200 {
        let n = rng.gen_range(3..=7);
        let dim = rng.gen_range(1..=2);
        let masks = random_partition(&mut rng, n);
        let region =
            Region::from_points(random_points(&mut rng, n, dim), dim, Some(masks.clone())).unwrap();
        let kernel = random_kernel(&mut rng, &region);
        let f = random_measure(&mut rng, n);
        let prices: Vec<f64> = masks
            .iter()
            .map(|m| {
                if m.is_fixed() {
                    rng.gen_range(0.0..1.0)
                } else {
                    rng.gen_range(-0.3..1.2)
                }
            })
            .collect();
        let p0 = PricePattern::finite(prices.clone()).unwrap();
        let ctx = PartitionContext::new(&region, &kernel, &p0).unwrap();
        let p = PricePattern::finite(prices).unwrap();
        let tol = kernel.tol() * (1.0 + f.total_mass());

        let pi = model_two::profit_pi(&p, &ctx, &kernel, &f).unwrap();
        let (plus, pi_plus) = model_two::nonneg_clamp_improves(&p, &ctx, &kernel, &f).unwrap();
        let r = model_two::reformulate(&plus, &ctx, &kernel, &f).unwrap();

        // w and v0 by direct minimisation
        let free: Vec<usize> = (0..n).filter(|&i| masks[i].is_free()).collect();
        let fixed: Vec<usize> = (0..n).filter(|&i| masks[i].is_fixed()).collect();
        let min_over = |set: &[usize], x: usize| {
            set.iter()
                .map(|&y| kernel.cost(x, y) + plus.at(y))
                .fold(f64::INFINITY, f64::min)
        };
        let omega1 = model_two::pi_evaluation(&r.p_tilde, &ctx, &kernel, &f)
            .unwrap()
            .omega1;
        let sublevel =
            (0..n).all(|x| omega1[x] == (min_over(&free, x) <= min_over(&fixed, x) + kernel.tol()));

        let chain = pi <= pi_plus + tol
            && pi_plus <= r.profit_after + tol
            && (r.profit_after - r.j).abs() <= tol;
        if !(chain && sublevel && r.audit.holds()) {
            failures.push(format!(
                "case {case}: Pi {pi} Pi+ {pi_plus} Pi~ {} J {} sublevel {sublevel} audit {:?}",
                r.profit_after,
                r.j,
                r.audit.failures()
            ));
        }
    }
    Verdict {
        pass: failures.is_empty(),
        detail: format!(
            "200 instances, {} violations {:?}",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    }
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cases = 600;
    let mut bad = [0usize; 5];
    let mut lipschitz_cases = 0;
    for _ in 0..cases {
        let n = rng.gen_range(2..=8);
        let dim = rng.gen_range(1..=2);
        let region = Region::from_points(random_points(&mut rng, n, dim), dim, None).unwrap();
        let kernel = random_kernel(&mut rng, &region);
        let tol = kernel.tol();
        let all: Vec<usize> = (0..n).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u: Vec<f64> = v.iter().map(|x| x + rng.gen_range(0.0..0.5)).collect();

        let vc = c_transform(&v, &kernel, &all);
        let uc = c_transform(&u, &kernel, &all);
        if vc.iter().zip(&uc).any(|(a, b)| a + tol < *b) {
            bad[0] += 1;
        }
        let vcc = c_envelope(&vc, &all, &kernel);
        if vcc.iter().zip(&v).any(|(a, b)| a + tol < *b) {
            bad[1] += 1;
        }
        let vccc = c_transform(&vcc, &kernel, &all);
        if vccc.iter().zip(&vc).any(|(a, b)| (a - b).abs() > tol) {
            bad[2] += 1;
        }
        for x in 0..n {
            for x2 in 0..n {
                let modulus = (0..n)
                    .map(|y| (kernel.cost(x, y) - kernel.cost(x2, y)).abs())
                    .fold(0.0, f64::max);
                if (vcc[x] - vcc[x2]).abs() > modulus + tol {
                    bad[3] += 1;
                }
            }
        }

        // Lipschitz with respect to a metric cost against c-concavity
        let metric = CostKernel::evaluate(
            CostKind::MetricPower {
                alpha: rng.gen_range(0.3..=1.0),
            },
            &region,
        )
        .unwrap();
        let mtol = metric.tol();
        let cone_min: Vec<f64> = ctransform::value_from_prices(
            &metric,
            &all,
            &(0..n).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<_>>(),
        );
        let w: Vec<f64> = if rng.gen_bool(0.5) {
            cone_min
        } else {
            cone_min
                .iter()
                .map(|x| x + rng.gen_range(-0.2..0.2))
                .collect()
        };
        let lipschitz = (0..n).all(|x| (0..n).all(|y| w[x] - w[y] <= metric.cost(x, y) + mtol));
        lipschitz_cases += usize::from(lipschitz);
        if lipschitz != is_c_concave(&w, &metric, &all, mtol) {
            bad[4] += 1;
        }
    }
    Verdict {
        pass: bad.iter().all(|&b| b == 0),
        detail: format!(
            "{cases} cases each: order reversal {}, (v^c)^c >= v {}, triple transform {}, equicontinuity {}, \
             Lipschitz iff c-concave {} violations ({lipschitz_cases} Lipschitz cases)",
            bad[0], bad[1], bad[2], bad[3], bad[4]
        ),
    }
}

fn criterion_7() -> Verdict {
    let n = 21;
    let h = 0.05;
    let region = Region::interval(n, 0.0, 1.0, None).unwrap();
    let kernel = CostKernel::evaluate(CostKind::MetricPower { alpha: 1.0 }, &region).unwrap();
    let uniform = CustomerMeasure::uniform(&region);
    let ctx = GameContext::split_interval(&region, &kernel, &uniform, 0.5, None).unwrap();
    let cfg = SearchConfig {
        price_step: Some(h),
        ..SearchConfig::exhaustive(8)
    };
    let start = |who: Player| {
        ctx.strategy(who, &vec![1.0; ctx.region_of(who).len()])
            .unwrap()
    };
    let (p_init, q_init) = (start(Player::A), start(Player::B));
    let closed_p: Vec<f64> = ctx
        .region_of(Player::A)
        .iter()
        .map(|&i| 0.5 - region.coord(i))
        .collect();
    let closed_q: Vec<f64> = ctx
        .region_of(Player::B)
        .iter()
        .map(|&i| region.coord(i) - 0.5)
        .collect();

    let trace = nash::best_response_dynamics(&p_init, &q_init, &ctx, &cfg, 20, 1e-9).unwrap();
    let sup = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let last = trace.last();
    let distance = sup(&last.p, &closed_p).max(sup(&last.q, &closed_q));
    let converged = trace.converged && distance <= 2.0 * h + 1e-12;

    let pe = ctx.strategy(Player::A, &closed_p).unwrap();
    let qe = ctx.strategy(Player::B, &closed_q).unwrap();
    let check = nash::verify_equilibrium(&pe, &qe, &ctx, &cfg).unwrap();
    let mass = ctx.measure().total_mass();
    let verified = check.is_equilibrium
        && check.best_deviation_gain_a.max(check.best_deviation_gain_b) <= h * mass;

    let triangular =
        CustomerMeasure::from_density(&region, |x| 1.0 - (2.0 * x[0] - 1.0).abs()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let random = random_measure(&mut rng, n);
    let mut same = true;
    for g in [&triangular, &random] {
        let other = ctx.with_measure(g).unwrap();
        let t = nash::best_response_dynamics(&p_init, &q_init, &other, &cfg, 20, 1e-9).unwrap();
        same &= t.converged && t.last().p == last.p && t.last().q == last.q;
    }
    Verdict {
        pass: converged && verified && same,
        detail: format!(
            "{} rounds, converged {}, sup distance to the closed form {distance:.3} (<= {}), equilibrium check gains ({}, {}) <= {}, \
             same strategies under triangular and random f {same}",
            trace.rounds.len(),
            trace.converged,
            2.0 * h,
            check.best_deviation_gain_a,
            check.best_deviation_gain_b,
            h * mass
        ),
    }
}

fn criterion_8() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    let cases = [
        ((0.0, 1.0), 0.2),
        ((0.0, 1.0), 0.4),
        ((0.0, 1.0), 1.0),
        ((0.0, 1.0), 2.0),
        ((0.3, 0.7), 0.4),
        ((0.3, 0.7), 1.0),
    ];
    for (k, ((alpha, beta), p0)) in cases.into_iter().enumerate() {
        let path = dir.path().join(format!("case{k}.toml"));
        let text = format!(
            "model = \"two\"\n[region]\nkind = \"interval\"\nn = 41\nwindow = [{alpha}, {beta}]\n\
             [cost]\nkind = \"metric\"\n[prices]\nkind = \"constant\"\nvalue = {p0}\n\
             [solver]\nmode = \"exhaustive\"\ncdf = \"uniform\"\n"
        );
        std::fs::write(&path, text).unwrap();
        let out = Command::new(env!("CARGO_BIN_EXE_spatprice"))
            .args(["compare", "--scenario"])
            .arg(&path)
            .args(["--methods", "one_d,w_search:ascent,boundary_control"])
            .output()
            .unwrap();
        let stdout = String::from_utf8_lossy(&out.stdout);
        let field = |key: &str| {
            stdout
                .lines()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(',')))
                .unwrap_or("?")
                .to_owned()
        };
        let agree = out.status.success() && field("agree") == "true";
        pass &= agree;
        notes.push(format!(
            "({alpha},{beta}) p0={p0}: delta {} tol {}",
            field("max_profit_delta")
                .parse::<f64>()
                .map_or("?".into(), |v| format!("{v:.2e}")),
            field("tolerance")
                .parse::<f64>()
                .map_or("?".into(), |v| format!("{v:.2e}"))
        ));
    }
    Verdict {
        pass,
        detail: notes.join("; "),
    }
}

#[test]
fn acceptance() {
    let mut failed = Vec::new();
    let mut run = |id: usize, limit: Option<f64>, verdict: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let mut v = verdict();
        let elapsed = t.elapsed();
        if let Some(limit) = limit {
            if elapsed.as_secs_f64() > limit {
                v.pass = false;
                v.detail.push_str(&format!(" [runtime above {limit} s]"));
            }
        }
        report(id, &v, elapsed);
        if !v.pass {
            failed.push(id);
        }
    };
    run(1, Some(60.0), &mut criterion_1);
    let mut pair = None;
    run(2, Some(120.0), &mut || {
        let (a, b) = criteria_2_and_3();
        pair = Some(b);
        a
    });
    let mut third = pair.take();
    run(3, None, &mut || third.take().unwrap());
    run(4, Some(10.0), &mut criterion_4);
    run(5, Some(60.0), &mut criterion_5);
    run(6, None, &mut criterion_6);
    run(7, Some(120.0), &mut criterion_7);
    run(8, None, &mut criterion_8);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
