//! Shared input builders for the benchmarks.

use tanreg::geometry::{from_tangent, TangentProfile};
use tanreg::Curve;

/// A smooth wavy rope with `m` nodes, deterministic in its arguments.
pub fn wavy_curve(m: usize, amplitude_deg: f64, delta_l: f64) -> Curve {
    let thetas = (0..m - 1)
        .map(|i| amplitude_deg * (i as f64 * 0.37).sin())
        .collect();
    from_tangent(&TangentProfile {
        thetas,
        base_point: [0.0, 0.0],
        delta_l,
        abscissa_scale: 10.0,
    })
}
