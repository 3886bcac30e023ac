//! Task data model, synthetic fixtures, kinematic rope replay and
//! physical-plausibility validation.
//!
//! The replay model is follow-the-leader: the grasped node tracks the gripper
//! path and every neighbor re-projects to segment length from its updated
//! neighbor, outward from the grasp. It is deterministic and parameter-free;
//! no dynamics are claimed.

use crate::cpd::RegistrationConfig;
use crate::error::{Error, Result};
use crate::geometry::{dist, polyline_length, Curve, Point};
use crate::pipeline::{
    generate_step_trajectory, place_target, warp_tangent_scene, GripperStatus, Keyframe,
    Trajectory, WarpOutput,
};

/// One demonstrated manipulation step: object snapshots around it plus the
/// recorded gripper keyframes.
#[derive(Debug, Clone)]
pub struct StepDemo {
    pub before: Curve,
    pub after: Curve,
    pub trajectory: Trajectory,
}

/// Multi-step demonstration with state continuity between steps.
#[derive(Debug, Clone)]
pub struct TaskDemo {
    steps: Vec<StepDemo>,
}

/// Tolerance for the step-to-step state continuity check (meters).
pub const CONTINUITY_TOL: f64 = 1e-6;

impl TaskDemo {
    pub fn new(steps: Vec<StepDemo>) -> Result<Self> {
        for (k, step) in steps.iter().enumerate() {
            if step.before.node_count() != step.after.node_count() {
                return Err(Error::NodeCountMismatch {
                    before: step.before.node_count(),
                    after: step.after.node_count(),
                }
                .at_step(k));
            }
            if step.trajectory.keyframes.is_empty() {
                return Err(Error::NoGraspKeyframe.at_step(k));
            }
        }
        for k in 0..steps.len().saturating_sub(1) {
            let a = steps[k].after.nodes();
            let b = steps[k + 1].before.nodes();
            if a.len() != b.len()
                || a.iter().zip(b).any(|(p, q)| dist(*p, *q) > CONTINUITY_TOL)
            {
                return Err(Error::ContinuityViolation { step: k });
            }
        }
        Ok(TaskDemo { steps })
    }

    pub fn steps(&self) -> &[StepDemo] {
        &self.steps
    }
}

/// Settings for a multi-step task run.
#[derive(Debug, Clone)]
pub struct TaskConfig {
    pub registration: RegistrationConfig,
    pub abscissa_scale: f64,
    /// Node held fixed at its current position during replay, if any.
    pub anchor: Option<usize>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            registration: RegistrationConfig::default(),
            abscissa_scale: 10.0,
            anchor: None,
        }
    }
}

/// Output of one executed step of [`run_task`].
#[derive(Debug, Clone)]
pub struct StepResult {
    pub warp: WarpOutput,
    pub trajectory: Trajectory,
    /// Replay prediction of the test object after the step.
    pub predicted: Curve,
}

/// Physical-plausibility report over a sequence of object states.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    /// Relative total-length error per state.
    pub length_errors: Vec<f64>,
    /// Worst |dist - delta_l| / delta_l over all segments of all states.
    pub max_segment_deviation: f64,
    /// Some segment stretched beyond the threshold.
    pub over_stretch: bool,
    /// Some segment compressed beyond the threshold.
    pub over_compression: bool,
    pub threshold: f64,
    /// Grasp node per step, filled by callers that have trajectory context.
    pub grasp_indices: Vec<usize>,
}

/// Default over-stretch / over-compression threshold (5% relative deviation).
pub const DEFAULT_DEVIATION_THRESHOLD: f64 = 0.05;

/// Check a list of point sequences against the uniform-segment constraint.
pub fn validate_physical(states: &[Vec<Point>], delta_l: f64, threshold: f64) -> ValidationReport {
    let mut length_errors = Vec::with_capacity(states.len());
    let mut max_dev = 0.0f64;
    let mut over_stretch = false;
    let mut over_compression = false;
    for state in states {
        let segs = state.len().saturating_sub(1) as f64;
        let expect = segs * delta_l;
        let len = polyline_length(state);
        length_errors.push(if expect > 0.0 {
            (len - expect).abs() / expect
        } else {
            0.0
        });
        for w in state.windows(2) {
            let signed = (dist(w[0], w[1]) - delta_l) / delta_l;
            max_dev = max_dev.max(signed.abs());
            if signed > threshold {
                over_stretch = true;
            }
            if signed < -threshold {
                over_compression = true;
            }
        }
    }
    ValidationReport {
        length_errors,
        max_segment_deviation: max_dev,
        over_stretch,
        over_compression,
        threshold,
        grasp_indices: Vec::new(),
    }
}

fn ftl_step(nodes: &mut [Point], i: usize, from: usize, delta_l: f64) {
    let leader = nodes[from];
    let mut dir = [nodes[i][0] - leader[0], nodes[i][1] - leader[1]];
    let mut n = dir[0].hypot(dir[1]);
    if n < 1e-15 {
        // node sits exactly on its leader; continue along the leader's segment
        let behind = if i > from {
            from.checked_sub(1)
        } else {
            Some(from + 1).filter(|&j| j < nodes.len())
        };
        if let Some(j) = behind {
            dir = [leader[0] - nodes[j][0], leader[1] - nodes[j][1]];
            n = dir[0].hypot(dir[1]);
        }
        if n < 1e-15 {
            dir = [delta_l, 0.0];
            n = delta_l;
        }
    }
    nodes[i] = [leader[0] + dir[0] / n * delta_l, leader[1] + dir[1] / n * delta_l];
}

/// One full follow-the-leader pass outward from `origin` in both directions.
fn ftl_pass(nodes: &mut [Point], origin: usize, delta_l: f64) {
    for i in origin + 1..nodes.len() {
        ftl_step(nodes, i, i - 1, delta_l);
    }
    for i in (0..origin).rev() {
        ftl_step(nodes, i, i + 1, delta_l);
    }
}

/// Clamp every node strictly between the two pivots into the intersection of
/// its reach disks: node `i` can be at most `|i - pivot| * delta_l` from each
/// pivot. When the rope is taut between the pivots the intersection collapses
/// to a point on the chord, which plain alternating passes only reach
/// asymptotically.
fn clamp_between(nodes: &mut [Point], a: usize, g: usize, delta_l: f64) {
    let (lo, hi) = if a < g { (a, g) } else { (g, a) };
    let p = nodes[lo];
    let q = nodes[hi];
    let d = dist(p, q);
    let radial = |c: Point, r: f64, x: Point| -> Point {
        let dx = [x[0] - c[0], x[1] - c[1]];
        let n = dx[0].hypot(dx[1]);
        if n < 1e-15 {
            return c;
        }
        [c[0] + dx[0] / n * r, c[1] + dx[1] / n * r]
    };
    for i in lo + 1..hi {
        let r1 = (i - lo) as f64 * delta_l;
        let r2 = (hi - i) as f64 * delta_l;
        let x = nodes[i];
        let v1 = dist(x, p) > r1;
        let v2 = dist(x, q) > r2;
        if !v1 && !v2 {
            continue;
        }
        if v1 && !v2 {
            let y = radial(p, r1, x);
            if dist(y, q) <= r2 * (1.0 + 1e-12) {
                nodes[i] = y;
                continue;
            }
        } else if v2 && !v1 {
            let y = radial(q, r2, x);
            if dist(y, p) <= r1 * (1.0 + 1e-12) {
                nodes[i] = y;
                continue;
            }
        }
        if d < 1e-15 {
            nodes[i] = radial(p, r1.min(r2), x);
            continue;
        }
        // one reach disk entirely inside the other
        if d + r1 <= r2 {
            nodes[i] = radial(p, r1, x);
            continue;
        }
        if d + r2 <= r1 {
            nodes[i] = radial(q, r2, x);
            continue;
        }
        // nearest of the two circle-circle intersection points
        let u = [(q[0] - p[0]) / d, (q[1] - p[1]) / d];
        let along = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
        let h = (r1 * r1 - along * along).max(0.0).sqrt();
        let base = [p[0] + u[0] * along, p[1] + u[1] * along];
        let c1 = [base[0] - u[1] * h, base[1] + u[0] * h];
        let c2 = [base[0] + u[1] * h, base[1] - u[0] * h];
        nodes[i] = if dist(x, c1) <= dist(x, c2) { c1 } else { c2 };
    }
}

// Relaxation passes per substep when both a grasp and an anchor constrain the
// rope. Each iteration ends with an anchor pass so segment lengths are exact.
const ANCHOR_RELAX_ITERS: usize = 12;

/// Move the grasped node along the gripper path, propagating displacement by
/// follow-the-leader. The output always satisfies the uniform-segment
/// invariant; with an anchor the anchored node never moves.
pub fn replay_rope(
    state: &Curve,
    grasp_node: usize,
    gripper_path: &[Point],
    anchor: Option<usize>,
) -> Result<Curve> {
    let m = state.node_count();
    if grasp_node >= m {
        return Err(Error::NodeOutOfRange {
            index: grasp_node,
            count: m,
        });
    }
    let delta_l = state.delta_l();
    let mut nodes = state.nodes().to_vec();

    let pinned = match anchor {
        Some(a) if a >= m => return Err(Error::NodeOutOfRange { index: a, count: m }),
        Some(a) => {
            let p = nodes[a];
            let reach = grasp_node.abs_diff(a) as f64 * delta_l;
            for q in gripper_path {
                if dist(*q, p) > reach * (1.0 + 1e-9) {
                    return Err(Error::OutOfReach {
                        x: q[0],
                        y: q[1],
                        anchor: a,
                    });
                }
            }
            Some((a, p))
        }
        None => None,
    };

    let apply = |nodes: &mut Vec<Point>, q: Point| match pinned {
        Some((a, p)) if a != grasp_node => {
            for _ in 0..ANCHOR_RELAX_ITERS {
                nodes[grasp_node] = q;
                clamp_between(nodes, a, grasp_node, delta_l);
                ftl_pass(nodes, grasp_node, delta_l);
                nodes[a] = p;
                ftl_pass(nodes, a, delta_l);
            }
        }
        _ => {
            nodes[grasp_node] = q;
            ftl_pass(nodes, grasp_node, delta_l);
        }
    };

    let mut cur = nodes[grasp_node];
    for &target in gripper_path {
        let d = dist(cur, target);
        let substeps = ((d / (0.5 * delta_l)).ceil() as usize).max(1);
        for k in 1..=substeps {
            let t = k as f64 / substeps as f64;
            let q = [
                cur[0] + (target[0] - cur[0]) * t,
                cur[1] + (target[1] - cur[1]) * t,
            ];
            apply(&mut nodes, q);
        }
        cur = target;
    }
    Curve::new(nodes, delta_l)
}

/// Execute every step of a demonstration on the test object, chaining replay
/// predictions forward.
pub fn run_task(
    demo: &TaskDemo,
    test_initial: &Curve,
    config: &TaskConfig,
) -> Result<Vec<StepResult>> {
    let mut current = test_initial.clone();
    let mut results = Vec::with_capacity(demo.steps().len());
    for (k, step) in demo.steps().iter().enumerate() {
        let step_run = || -> Result<StepResult> {
            let mut warp = warp_tangent_scene(
                &step.before,
                &step.after,
                &current,
                &config.registration,
                config.abscissa_scale,
            )?;
            place_target(&mut warp, &step.trajectory, &current, config.anchor)?;
            let trajectory = generate_step_trajectory(&warp, &step.trajectory, &current)?;
            // replay each closed run with its grasp node
            let mut predicted = current.clone();
            let mut i = 0;
            let frames = &trajectory.keyframes;
            while i < frames.len() {
                if frames[i].status == GripperStatus::Closed {
                    let n = frames[i].grasp_node.ok_or(Error::MissingGraspNode { index: i })?;
                    let mut path = Vec::new();
                    while i < frames.len() && frames[i].status == GripperStatus::Closed {
                        path.push(frames[i].position);
                        i += 1;
                    }
                    predicted = replay_rope(&predicted, n, &path, config.anchor)?;
                } else {
                    i += 1;
                }
            }
            Ok(StepResult {
                warp,
                trajectory,
                predicted,
            })
        };
        let result = step_run().map_err(|e| e.at_step(k))?;
        current = result.predicted.clone();
        results.push(result);
    }
    Ok(results)
}

/// A shippable synthetic scenario: a demonstration plus a test object.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub demo: TaskDemo,
    pub test_initial: Curve,
    /// Node pinned during replay (rope end fixed at the origin), if any.
    pub anchor: Option<usize>,
}

pub fn fixture_names() -> &'static [&'static str] {
    &[
        "straighten",
        "cloth_unfold",
        "cloth_unfold_narrow",
        "cloth_unfold_wide",
        "knot_4step",
    ]
}

fn curve_from_angles(pieces: &[(usize, f64)], base: Point, delta_l: f64) -> Curve {
    let thetas: Vec<f64> = pieces
        .iter()
        .flat_map(|&(n, a)| std::iter::repeat(a).take(n))
        .collect();
    crate::geometry::from_tangent(&crate::geometry::TangentProfile {
        thetas,
        base_point: base,
        delta_l,
        abscissa_scale: 10.0,
    })
}

fn drag_step(before: &Curve, grasp: usize, path: &[Point]) -> StepDemo {
    let after = replay_rope(before, grasp, path, None).expect("fixture replay");
    let tip = before.nodes()[grasp];
    let mut keyframes = vec![
        Keyframe {
            position: tip,
            status: GripperStatus::Open,
            grasp_node: None,
        },
        Keyframe {
            position: tip,
            status: GripperStatus::Closed,
            grasp_node: Some(grasp),
        },
    ];
    for &q in path {
        keyframes.push(Keyframe {
            position: q,
            status: GripperStatus::Closed,
            grasp_node: Some(grasp),
        });
    }
    keyframes.push(Keyframe {
        position: *path.last().unwrap_or(&tip),
        status: GripperStatus::Open,
        grasp_node: None,
    });
    StepDemo {
        before: before.clone(),
        after,
        trajectory: Trajectory { keyframes },
    }
}

fn single_step_demo(before: Curve, after: Curve, grasp: usize) -> TaskDemo {
    let g0 = before.nodes()[grasp];
    let g1 = after.nodes()[grasp];
    let keyframes = vec![
        Keyframe {
            position: g0,
            status: GripperStatus::Open,
            grasp_node: None,
        },
        Keyframe {
            position: g0,
            status: GripperStatus::Closed,
            grasp_node: Some(grasp),
        },
        Keyframe {
            position: g1,
            status: GripperStatus::Closed,
            grasp_node: Some(grasp),
        },
        Keyframe {
            position: g1,
            status: GripperStatus::Open,
            grasp_node: None,
        },
    ];
    TaskDemo::new(vec![StepDemo {
        before,
        after,
        trajectory: Trajectory { keyframes },
    }])
    .expect("fixture demo")
}

/// Deterministic synthetic scenes: rope straightening, cloth-edge unfolding at
/// three test widths, and a 4-step planar knotting task whose states are
/// generated by follow-the-leader replay so they chain exactly.
pub fn make_fixture(name: &str) -> Result<Fixture> {
    match name {
        "straighten" => {
            // one rope end fixed at the origin; test rope is bent more sharply
            let dl = 0.1;
            let train_before = curve_from_angles(&[(10, 0.0), (10, 60.0)], [0.0, 0.0], dl);
            let train_after = curve_from_angles(&[(20, 0.0)], [0.0, 0.0], dl);
            let test = curve_from_angles(&[(10, 0.0), (10, 140.0)], [0.0, 0.0], dl);
            Ok(Fixture {
                name: name.into(),
                demo: single_step_demo(train_before, train_after, 20),
                test_initial: test,
                anchor: Some(0),
            })
        }
        "cloth_unfold" => {
            // training edge 0.46 m; same-width test with a different fold angle
            let dl = 0.02;
            let train_before = curve_from_angles(&[(16, 0.0), (7, 140.0)], [0.0, 0.0], dl);
            let train_after = curve_from_angles(&[(23, 0.0)], [0.0, 0.0], dl);
            let test = curve_from_angles(&[(14, 0.0), (9, 120.0)], [0.0, 0.0], dl);
            Ok(Fixture {
                name: name.into(),
                demo: single_step_demo(train_before, train_after, 23),
                test_initial: test,
                anchor: Some(0),
            })
        }
        "cloth_unfold_narrow" => {
            let dl = 0.02;
            let train_before = curve_from_angles(&[(16, 0.0), (7, 140.0)], [0.0, 0.0], dl);
            let train_after = curve_from_angles(&[(23, 0.0)], [0.0, 0.0], dl);
            // narrower edge, 0.35 m, folded more deeply
            let test = curve_from_angles(&[(8, 0.0), (6, 150.0)], [0.0, 0.0], 0.025);
            Ok(Fixture {
                name: name.into(),
                demo: single_step_demo(train_before, train_after, 23),
                test_initial: test,
                anchor: Some(0),
            })
        }
        "cloth_unfold_wide" => {
            let dl = 0.02;
            let train_before = curve_from_angles(&[(16, 0.0), (7, 140.0)], [0.0, 0.0], dl);
            let train_after = curve_from_angles(&[(23, 0.0)], [0.0, 0.0], dl);
            // wider edge, 0.60 m, folded shallowly
            let test = curve_from_angles(&[(20, 0.0), (4, 100.0)], [0.0, 0.0], 0.025);
            Ok(Fixture {
                name: name.into(),
                demo: single_step_demo(train_before, train_after, 23),
                test_initial: test,
                anchor: Some(0),
            })
        }
        "knot_4step" => {
            let dl = 0.02;
            let state0 = curve_from_angles(&[(29, 0.0)], [0.0, 0.0], dl);
            let drags: [(usize, Vec<Point>); 4] = [
                (29, vec![[0.52, 0.10], [0.40, 0.18], [0.26, 0.18]]),
                (29, vec![[0.16, 0.10], [0.14, -0.02], [0.22, -0.10]]),
                (29, vec![[0.32, -0.08], [0.38, 0.02], [0.32, 0.10]]),
                (0, vec![[-0.06, 0.0], [-0.14, 0.0]]),
            ];
            let mut steps = Vec::with_capacity(4);
            let mut current = state0;
            for (grasp, path) in &drags {
                let step = drag_step(&current, *grasp, path);
                current = step.after.clone();
                steps.push(step);
            }
            let test_initial = steps[0].before.clone();
            Ok(Fixture {
                name: name.into(),
                demo: TaskDemo::new(steps)?,
                test_initial,
                anchor: None,
            })
        }
        _ => Err(Error::UnknownFixture {
            name: name.into(),
            available: fixture_names().join(", "),
        }),
    }
}
