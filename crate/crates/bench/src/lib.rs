//! Shared benchmark instances.

use spatprice::{CostKernel, CostKind, CustomerMeasure, PricePattern, Region};

/// Uniform interval with a metric kernel and a single finite price bound at 0.
pub fn metric_interval(n: usize) -> (Region, CostKernel, CustomerMeasure, PricePattern) {
    let region = Region::interval(n, 0.0, 1.0, None).expect("valid interval");
    let kernel =
        CostKernel::evaluate(CostKind::MetricPower { alpha: 1.0 }, &region).expect("metric kernel");
    let f = CustomerMeasure::uniform(&region);
    let p0 = PricePattern::supported_on(n, &[0], &[1.0]).expect("finite bound");
    (region, kernel, f, p0)
}

/// Quadratic cost on `[0, 1]` with bound `x - x^2/2`.
pub fn quadratic_interval(n: usize) -> (Region, CostKernel, CustomerMeasure, PricePattern) {
    let region = Region::interval(n, 0.0, 1.0, None).expect("valid interval");
    let kernel = CostKernel::evaluate(CostKind::Quadratic, &region).expect("quadratic kernel");
    let f = CustomerMeasure::uniform(&region);
    let p0 = PricePattern::finite(
        (0..n)
            .map(|i| {
                let x = region.coord(i);
                x - 0.5 * x * x
            })
            .collect(),
    )
    .expect("finite bound");
    (region, kernel, f, p0)
}

/// Interval with a fixed-price window `(0.3, 0.7)` at price 0.4.
pub fn window_interval(n: usize) -> (Region, CostKernel, CustomerMeasure, PricePattern) {
    let region = Region::interval(n, 0.0, 1.0, Some((0.3, 0.7))).expect("valid interval");
    let kernel =
        CostKernel::evaluate(CostKind::MetricPower { alpha: 1.0 }, &region).expect("metric kernel");
    let f = CustomerMeasure::uniform(&region);
    let p = PricePattern::constant(n, 0.4).expect("finite price");
    (region, kernel, f, p)
}
