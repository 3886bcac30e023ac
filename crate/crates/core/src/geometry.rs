//! Planar curve representation and the Cartesian <-> tangent-space conversion.
//!
//! A deformable object (rope, cloth edge) is modelled as a [`Curve`]: ordered
//! 2-D nodes with a single uniform segment length. Its tangent-space twin is a
//! [`TangentProfile`]: one direction angle per segment, in degrees, unwrapped
//! so the sequence stays continuous even when the curve turns past 360.

use crate::error::{Error, Result};

/// A 2-D point in meters (or tangent-plane units).
pub type Point = [f64; 2];

/// Relative tolerance used when checking the uniform-segment invariant.
pub const UNIFORM_REL_TOL: f64 = 1e-9;

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

/// Total length of an arbitrary (not necessarily uniform) polyline.
pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| dist(w[0], w[1])).sum()
}

/// Ordered 2-D node positions with uniform segment length.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    nodes: Vec<Point>,
    delta_l: f64,
}

impl Curve {
    /// Build a curve, enforcing the uniform-segment invariant.
    pub fn new(nodes: Vec<Point>, delta_l: f64) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::TooFewNodes {
                min: 2,
                got: nodes.len(),
            });
        }
        if !(delta_l > 0.0) {
            return Err(Error::NonPositiveDeltaL(delta_l));
        }
        for (i, p) in nodes.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::NonFinite(format!("node {i}")));
            }
        }
        for (i, w) in nodes.windows(2).enumerate() {
            let d = dist(w[0], w[1]);
            if (d - delta_l).abs() > UNIFORM_REL_TOL * delta_l {
                return Err(Error::NonUniformSpacing {
                    index: i,
                    actual: d,
                    expected: delta_l,
                });
            }
        }
        Ok(Curve { nodes, delta_l })
    }

    /// Construct without re-checking spacing. Callers must guarantee the
    /// invariant (e.g. integration from a tangent profile does by construction).
    pub(crate) fn new_unchecked(nodes: Vec<Point>, delta_l: f64) -> Self {
        Curve { nodes, delta_l }
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn delta_l(&self) -> f64 {
        self.delta_l
    }

    /// Number of nodes M.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of segments, M - 1.
    pub fn segment_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.nodes)
    }
}

/// Per-segment direction angles (degrees, unwrapped) plus the data needed to
/// integrate back to Cartesian space.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentProfile {
    pub thetas: Vec<f64>,
    pub base_point: Point,
    pub delta_l: f64,
    pub abscissa_scale: f64,
}

/// Planar embedding of a tangent profile: point i = (i * scale, theta_i).
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPointSet {
    pub points: Vec<Point>,
}

impl TangentProfile {
    pub fn point_set(&self) -> TangentPointSet {
        TangentPointSet {
            points: self
                .thetas
                .iter()
                .enumerate()
                .map(|(i, &t)| [i as f64 * self.abscissa_scale, t])
                .collect(),
        }
    }
}

/// Arc length of the polyline measured to each vertex.
fn cumulative_lengths(points: &[Point]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(points.len());
    let mut s = 0.0;
    cum.push(0.0);
    for w in points.windows(2) {
        s += dist(w[0], w[1]);
        cum.push(s);
    }
    cum
}

/// March `count` chords of length `chord` along the polyline starting at its
/// first vertex. Returns the placed points, the arc position of the last one,
/// and whether the polyline was exhausted before all chords landed.
fn march_chords(points: &[Point], cum: &[f64], chord: f64, count: usize) -> (Vec<Point>, f64, bool) {
    let mut out = Vec::with_capacity(count + 1);
    out.push(points[0]);
    let mut seg = 0usize; // current segment index
    let mut t0 = 0.0f64; // param of current position within segment `seg`
    let mut arc = 0.0f64;
    for _ in 0..count {
        let c = *out.last().unwrap();
        let mut found = false;
        while seg + 1 < points.len() {
            let a = points[seg];
            let b = points[seg + 1];
            let d = [b[0] - a[0], b[1] - a[1]];
            let e = [a[0] - c[0], a[1] - c[1]];
            let qa = d[0] * d[0] + d[1] * d[1];
            if qa > 0.0 {
                let qb = d[0] * e[0] + d[1] * e[1];
                let qc = e[0] * e[0] + e[1] * e[1] - chord * chord;
                let disc = qb * qb - qa * qc;
                if disc >= 0.0 {
                    // outward crossing = larger root
                    let t = (-qb + disc.sqrt()) / qa;
                    if t >= t0 && t <= 1.0 {
                        let p = [a[0] + t * d[0], a[1] + t * d[1]];
                        arc = cum[seg] + t * qa.sqrt();
                        out.push(p);
                        t0 = t;
                        found = true;
                        break;
                    }
                }
            }
            seg += 1;
            t0 = 0.0;
        }
        if !found {
            return (out, arc, true);
        }
    }
    (out, arc, false)
}

/// Resample an arbitrary polyline into a uniform `m`-node [`Curve`].
///
/// Nodes are placed by chord marching: every adjacent pair of output nodes is
/// exactly `delta_l` apart (straight-line distance), with `delta_l` solved by
/// bisection so the last node lands on the polyline's endpoint. For straight
/// or already-uniform input this reduces to exact equal arc-length spacing.
///
/// A polyline that folds back on itself sharply may admit no equal-chord
/// sampling ending on its endpoint (the fold makes the marching residual jump
/// past zero); that case is rejected with [`Error::ResampleTooCoarse`].
pub fn resample_uniform(polyline: &[Point], m: usize) -> Result<Curve> {
    if m < 2 {
        return Err(Error::TooFewNodes { min: 2, got: m });
    }
    for (i, p) in polyline.iter().enumerate() {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::NonFinite(format!("polyline point {i}")));
        }
    }
    // drop consecutive duplicates
    let mut pts: Vec<Point> = Vec::with_capacity(polyline.len());
    for &p in polyline {
        if pts.last().map_or(true, |&q| dist(p, q) > 0.0) {
            pts.push(p);
        }
    }
    if pts.len() < 2 {
        return Err(Error::DegeneratePolyline);
    }
    let cum = cumulative_lengths(&pts);
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::DegeneratePolyline);
    }
    let chords = m - 1;
    let hi0 = total / chords as f64;

    // arc overshoot of the final node relative to the polyline end; +inf-like
    // when the chord is so long the polyline is exhausted early
    let overshoot = |chord: f64| -> f64 {
        let (nodes, arc, exhausted) = march_chords(&pts, &cum, chord, chords);
        if exhausted || nodes.len() < m {
            total
        } else {
            arc - total
        }
    };

    // fast path: polyline straight between samples (chord == arc spacing)
    let chord = if overshoot(hi0).abs() <= 1e-12 * total {
        hi0
    } else {
        // overshoot is negative below the landing chord and jumps positive
        // once the march exhausts the polyline; converge onto the jump and
        // keep the feasible (lower) side
        let mut lo = 0.0f64;
        let mut hi = hi0 * (1.0 + 1e-12);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if overshoot(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    };

    // a residual at the jump means no equal-chord sampling lands on the
    // endpoint: the polyline doubles back within a single chord
    if overshoot(chord).abs() > 1e-9 * total {
        return Err(Error::ResampleTooCoarse { chords });
    }

    let (mut nodes, _, _) = march_chords(&pts, &cum, chord, chords);
    while nodes.len() < m {
        // only reachable at the bisection boundary; extend along the last tangent
        let k = nodes.len();
        let a = nodes[k - 2];
        let b = nodes[k - 1];
        let d = dist(a, b);
        nodes.push([b[0] + (b[0] - a[0]) / d * chord, b[1] + (b[1] - a[1]) / d * chord]);
    }
    // snap the endpoint; bisection left it within ~ulp of the polyline end
    nodes[m - 1] = *pts.last().unwrap();
    Curve::new(nodes, chord)
}

/// Unwrap a raw degree sequence so consecutive differences lie in (-180, 180].
fn unwrap_degrees(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    out.push(raw[0]);
    for i in 1..raw.len() {
        let prev = out[i - 1];
        let mut d = (raw[i] - prev + 180.0).rem_euclid(360.0) - 180.0;
        if d == -180.0 {
            d = 180.0;
        }
        out.push(prev + d);
    }
    out
}

/// Convert a curve to its tangent-space representation.
///
/// theta_i is the angle (degrees) of the segment from node i to node i+1
/// against the +x axis, unwrapped into a continuous sequence.
pub fn to_tangent(curve: &Curve, abscissa_scale: f64) -> Result<TangentProfile> {
    if !(abscissa_scale > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "abscissa_scale must be positive, got {abscissa_scale}"
        )));
    }
    let nodes = curve.nodes();
    let mut raw = Vec::with_capacity(nodes.len() - 1);
    for (i, w) in nodes.windows(2).enumerate() {
        let dx = w[1][0] - w[0][0];
        let dy = w[1][1] - w[0][1];
        if dx == 0.0 && dy == 0.0 {
            return Err(Error::CoincidentNodes { index: i });
        }
        raw.push(dy.atan2(dx).to_degrees());
    }
    Ok(TangentProfile {
        thetas: unwrap_degrees(&raw),
        base_point: nodes[0],
        delta_l: curve.delta_l(),
        abscissa_scale,
    })
}

/// Integrate a tangent profile back to Cartesian node positions.
///
/// The output satisfies the uniform-segment invariant exactly by construction,
/// so its total length is always segments * delta_l.
pub fn from_tangent(profile: &TangentProfile) -> Curve {
    let mut nodes = Vec::with_capacity(profile.thetas.len() + 1);
    nodes.push(profile.base_point);
    let mut p = profile.base_point;
    for &t in &profile.thetas {
        let r = t.to_radians();
        p = [p[0] + profile.delta_l * r.cos(), p[1] + profile.delta_l * r.sin()];
        nodes.push(p);
    }
    Curve::new_unchecked(nodes, profile.delta_l)
}

/// Sum of adjacent-node distances.
pub fn curve_length(curve: &Curve) -> f64 {
    curve.length()
}

/// Worst relative violation of the uniform-segment constraint:
/// max over adjacent pairs of |dist - delta_l| / delta_l.
pub fn segment_deviation(points: &[Point], delta_l: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::TooFewNodes {
            min: 2,
            got: points.len(),
        });
    }
    if !(delta_l > 0.0) {
        return Err(Error::NonPositiveDeltaL(delta_l));
    }
    Ok(points
        .windows(2)
        .map(|w| (dist(w[0], w[1]) - delta_l).abs() / delta_l)
        .fold(0.0, f64::max))
}
