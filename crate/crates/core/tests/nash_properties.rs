use proptest::prelude::*;
use spatprice::nash::{self, GameContext, Player, Served};
use spatprice::{CostKernel, CostKind, CustomerMeasure, PricePattern, Region, SearchConfig};

fn hotelling(n: usize, f: Option<Vec<f64>>) -> (Region, GameContext) {
    let region = Region::interval(n, 0.0, 1.0, None).unwrap();
    let kernel = CostKernel::evaluate(CostKind::MetricPower { alpha: 1.0 }, &region).unwrap();
    let f = match f {
        Some(w) => CustomerMeasure::from_weights(w).unwrap(),
        None => CustomerMeasure::uniform(&region),
    };
    let ctx = GameContext::split_interval(&region, &kernel, &f, 0.5, None).unwrap();
    (region, ctx)
}

fn tent(region: &Region, ctx: &GameContext, a: f64) -> (PricePattern, PricePattern) {
    let p: Vec<f64> = ctx
        .region_of(Player::A)
        .iter()
        .map(|&i| a + 0.5 - region.coord(i))
        .collect();
    let q: Vec<f64> = ctx
        .region_of(Player::B)
        .iter()
        .map(|&i| a + region.coord(i) - 0.5)
        .collect();
    (
        ctx.strategy(Player::A, &p).unwrap(),
        ctx.strategy(Player::B, &q).unwrap(),
    )
}

fn stepped(step: f64) -> SearchConfig {
    SearchConfig {
        price_step: Some(step),
        ..SearchConfig::exhaustive(8)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn payoffs_account_for_every_sale(
        p in prop::collection::vec(0.0f64..1.0, 11),
        q in prop::collection::vec(0.0f64..1.0, 11),
        w in prop::collection::vec(0.0f64..1.0, 21),
    ) {
        let (_, ctx) = hotelling(21, Some(w));
        let pa = ctx.strategy(Player::A, &p).unwrap();
        let qb = ctx.strategy(Player::B, &q).unwrap();
        let pay = nash::payoffs(&pa, &qb, &ctx).unwrap();
        let f = ctx.measure();
        let total: f64 = (0..21).map(|x| f.weight(x) * pay.paid[x]).sum();
        prop_assert!((pay.a + pay.b - total).abs() <= 1e-12);
        let own_a: f64 = (0..21).filter(|&x| pay.served_by[x] == Served::A).map(|x| f.weight(x) * pay.paid[x]).sum();
        prop_assert!((pay.a - own_a).abs() <= 1e-12);
        let tol = ctx.kernel().tol();
        for x in 0..21 {
            let cheapest = pay.v_p[x].min(pay.w_q[x]);
            match pay.served_by[x] {
                Served::A => prop_assert!(pay.v_p[x] <= cheapest + tol),
                Served::B => prop_assert!(pay.w_q[x] <= cheapest + tol),
                Served::Nobody => prop_assert!(!cheapest.is_finite()),
            }
            prop_assert!(pay.paid[x] >= 0.0 && pay.paid[x] <= cheapest + tol);
        }
    }

    #[test]
    fn equal_offers_stay_home(a in 0.0f64..0.5) {
        let (region, ctx) = hotelling(21, None);
        let (p, q) = tent(&region, &ctx, a);
        let pay = nash::payoffs(&p, &q, &ctx).unwrap();
        for x in 0..21 {
            let home_a = ctx.mask_of(Player::A)[x] && !ctx.mask_of(Player::B)[x];
            let home_b = ctx.mask_of(Player::B)[x] && !ctx.mask_of(Player::A)[x];
            if home_a {
                prop_assert_eq!(pay.served_by[x], Served::A);
            }
            if home_b {
                prop_assert_eq!(pay.served_by[x], Served::B);
            }
        }
    }
}

#[test]
fn best_response_to_the_tent_is_a_tent() {
    let (region, ctx) = hotelling(21, None);
    let step = 0.05;
    for a in [0.05, 0.1, 0.25] {
        let (_, q) = tent(&region, &ctx, a);
        let br = nash::best_response(Player::A, &q, &ctx, &stepped(step)).unwrap();
        let border = br.price.at(10);
        assert!(
            border <= a + 1e-9,
            "border price {border} above the opponent's {a}"
        );
        for &i in ctx.region_of(Player::A) {
            let x = region.coord(i);
            assert!(
                (br.price.at(i) - (border + 0.5 - x)).abs() <= step + 1e-9,
                "a = {a}, x = {x}"
            );
        }
    }
}

#[test]
fn verified_profile_is_a_fixpoint_of_the_dynamics() {
    let (_, ctx) = hotelling(21, None);
    let cfg = stepped(0.05);
    let start = ctx.strategy(Player::A, &[1.0; 11]).unwrap();
    let other = ctx.strategy(Player::B, &[1.0; 11]).unwrap();
    let trace = nash::best_response_dynamics(&start, &other, &ctx, &cfg, 30, 1e-9).unwrap();
    assert!(trace.converged);
    let last = trace.last();
    let p = ctx.strategy(Player::A, &last.p).unwrap();
    let q = ctx.strategy(Player::B, &last.q).unwrap();
    let rep = nash::verify_equilibrium(&p, &q, &ctx, &cfg).unwrap();
    assert!(
        rep.is_equilibrium,
        "gains {} {}",
        rep.best_deviation_gain_a, rep.best_deviation_gain_b
    );
    let again = nash::best_response_dynamics(&p, &q, &ctx, &cfg, 5, 1e-9).unwrap();
    assert!(again.converged);
    assert_eq!(again.last().delta_p, 0.0);
    assert_eq!(again.last().delta_q, 0.0);
}

#[test]
fn massless_market_has_every_profile_as_equilibrium() {
    let (region, ctx) = hotelling(11, Some(vec![0.0; 11]));
    for a in [0.0, 0.3, 0.9] {
        let (p, q) = tent(&region, &ctx, a);
        let rep = nash::verify_equilibrium(&p, &q, &ctx, &stepped(0.1)).unwrap();
        assert!(rep.is_equilibrium);
        assert_eq!((rep.payoff_a, rep.payoff_b), (0.0, 0.0));
    }
}

#[test]
fn a_border_markup_invites_undercutting() {
    let (region, ctx) = hotelling(21, None);
    let (p, q) = tent(&region, &ctx, 0.3);
    let rep = nash::verify_equilibrium(&p, &q, &ctx, &stepped(0.05)).unwrap();
    assert!(!rep.is_equilibrium);
    assert!(rep.best_deviation_gain_a > 0.0 && rep.best_deviation_gain_b > 0.0);
    assert!(rep.deviation_b[0] < 0.3);
}
