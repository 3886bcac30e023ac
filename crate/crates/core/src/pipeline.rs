//! End-to-end trajectory transfer.
//!
//! Tangent route: train_before and test_before are embedded as tangent point
//! sets, registered by CPD, and the resulting correspondence matrix averages
//! the demonstrated target angles into a target angle profile for the test
//! object, which integrates back to a length-conserving target curve.
//!
//! Cartesian route (the baseline): register the raw node positions and push
//! every trajectory keyframe through the fitted transform pointwise.

use nalgebra::DMatrix;

use crate::cpd::{
    cpd_register, matrix_to_points, points_to_matrix, transform_point, RegistrationConfig,
    RegistrationResult,
};
use crate::error::{Error, Result};
use crate::geometry::{from_tangent, to_tangent, Curve, Point, TangentProfile};

/// Gripper state at a keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GripperStatus {
    Open,
    Closed,
}

/// One recorded end-effector keyframe.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub position: Point,
    pub status: GripperStatus,
    /// Object node the gripper holds; required while the gripper is closed.
    pub grasp_node: Option<usize>,
}

/// Ordered end-effector keyframes for one manipulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub keyframes: Vec<Keyframe>,
}

/// Row-stochastic weights linking each test node to the training nodes.
/// Row n holds the convex weights over training segments for test segment n.
#[derive(Debug, Clone)]
pub struct CorrespondenceMatrix {
    c: DMatrix<f64>,
}

impl CorrespondenceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Test-side row count (number of test segments).
    pub fn nrows(&self) -> usize {
        self.c.nrows()
    }

    /// Training-side column count (number of training segments).
    pub fn ncols(&self) -> usize {
        self.c.ncols()
    }

    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.c[(n, m)]
    }

    /// Build directly from row weights. Rows are renormalized to sum to 1.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        let mut c = DMatrix::zeros(nr, nc);
        for (n, row) in rows.iter().enumerate() {
            if row.len() != nc {
                return Err(Error::ShapeMismatch("ragged correspondence rows".into()));
            }
            let s: f64 = row.iter().sum();
            if !(s > 0.0) {
                return Err(Error::ZeroPosteriorMass { node: n });
            }
            for (m, v) in row.iter().enumerate() {
                c[(n, m)] = v / s;
            }
        }
        Ok(CorrespondenceMatrix { c })
    }
}

/// Transpose the E-step posterior and renormalize each row over training
/// nodes, discarding outlier mass, so rows are convex weights.
pub fn correspondence(reg: &RegistrationResult) -> Result<CorrespondenceMatrix> {
    let p = &reg.p;
    let (m, n) = (p.nrows(), p.ncols());
    let mut c = DMatrix::zeros(n, m);
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..m {
            s += p[(i, j)];
        }
        if !(s > 0.0) {
            return Err(Error::ZeroPosteriorMass { node: j });
        }
        for i in 0..m {
            c[(j, i)] = p[(i, j)] / s;
        }
    }
    Ok(CorrespondenceMatrix { c })
}

/// Result of one tangent-space scene warp.
#[derive(Debug, Clone)]
pub struct WarpOutput {
    pub target_profile: TangentProfile,
    pub target_curve: Curve,
    pub correspondence: CorrespondenceMatrix,
    /// Complete training-node -> test-node map, one entry per training node.
    pub grasp_map: Vec<(usize, usize)>,
    pub registration: RegistrationResult,
}

/// Map training node m to the test node with the strongest correspondence.
///
/// Angles live on segments (leading node), so columns index training segments;
/// the final training node is resolved through its trailing segment. Ties
/// break toward the smaller index.
pub fn map_grasp_node(c: &CorrespondenceMatrix, m: usize) -> Result<usize> {
    let train_nodes = c.ncols() + 1;
    if m >= train_nodes {
        return Err(Error::NodeOutOfRange {
            index: m,
            count: train_nodes,
        });
    }
    let col = m.min(c.ncols() - 1);
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for n in 0..c.nrows() {
        let v = c.get(n, col);
        if v > best_v {
            best_v = v;
            best = n;
        }
    }
    Ok(if m == train_nodes - 1 { best + 1 } else { best })
}

/// Position of the mapped grasp node on the integrated target curve.
pub fn grasp_target_position(output: &WarpOutput, m: usize) -> Result<Point> {
    let n = map_grasp_node(&output.correspondence, m)?;
    Ok(output.target_curve.nodes()[n])
}

/// Tangent-space scene warp: registers the training tangent point set onto
/// the test one, averages the demonstrated target angles through the
/// correspondence matrix, and integrates from the test object's base point.
pub fn warp_tangent_scene(
    train_before: &Curve,
    train_after: &Curve,
    test_before: &Curve,
    config: &RegistrationConfig,
    abscissa_scale: f64,
) -> Result<WarpOutput> {
    if train_before.node_count() != train_after.node_count() {
        return Err(Error::NodeCountMismatch {
            before: train_before.node_count(),
            after: train_after.node_count(),
        });
    }
    let train_theta = to_tangent(train_before, abscissa_scale)?;
    let after_theta = to_tangent(train_after, abscissa_scale)?;
    let test_theta = to_tangent(test_before, abscissa_scale)?;

    let x = points_to_matrix(&test_theta.point_set().points);
    let y = points_to_matrix(&train_theta.point_set().points);
    let registration = cpd_register(&x, &y, config)?;
    let correspondence_m = correspondence(&registration)?;

    // target angles = C * (training target angle vector)
    let mut thetas = Vec::with_capacity(correspondence_m.nrows());
    for n in 0..correspondence_m.nrows() {
        let mut t = 0.0;
        for (m, theta) in after_theta.thetas.iter().enumerate() {
            t += correspondence_m.get(n, m) * theta;
        }
        thetas.push(t);
    }
    let target_profile = TangentProfile {
        thetas,
        base_point: test_before.nodes()[0],
        delta_l: test_before.delta_l(),
        abscissa_scale,
    };
    let target_curve = from_tangent(&target_profile);

    let grasp_map = (0..train_before.node_count())
        .map(|m| map_grasp_node(&correspondence_m, m).map(|n| (m, n)))
        .collect::<Result<Vec<_>>>()?;

    Ok(WarpOutput {
        target_profile,
        target_curve,
        correspondence: correspondence_m,
        grasp_map,
        registration,
    })
}

/// Cartesian baseline: push every keyframe through the fitted transform.
pub fn warp_trajectory_cartesian(reg: &RegistrationResult, traj: &Trajectory) -> Trajectory {
    Trajectory {
        keyframes: traj
            .keyframes
            .iter()
            .map(|k| Keyframe {
                position: transform_point(k.position, &reg.reference, &reg.w, reg.beta),
                status: k.status,
                grasp_node: k.grasp_node,
            })
            .collect(),
    }
}

/// Cartesian baseline applied to an entire point sequence (e.g. the
/// demonstrated after-state, yielding the implied target object).
pub fn warp_points_cartesian(reg: &RegistrationResult, points: &[Point]) -> Vec<Point> {
    points
        .iter()
        .map(|&p| transform_point(p, &reg.reference, &reg.w, reg.beta))
        .collect()
}

/// Convenience: Cartesian registration of the training scene onto the test
/// scene over raw node positions.
pub fn register_cartesian(
    train_before: &Curve,
    test_before: &Curve,
    config: &RegistrationConfig,
) -> Result<RegistrationResult> {
    cpd_register(
        &points_to_matrix(test_before.nodes()),
        &points_to_matrix(train_before.nodes()),
        config,
    )
}

/// Transformed reference set as points.
pub fn transformed_points(reg: &RegistrationResult) -> Vec<Point> {
    matrix_to_points(&reg.z)
}

// Similarity transform (rotation + uniform scale + translation) fixed by two
// point pairs, evaluated via complex multiplication. Degenerates to a pure
// translation when the source pair coincides.
struct Similarity {
    origin: Point,
    target: Point,
    // complex scale factor
    sr: f64,
    si: f64,
}

impl Similarity {
    fn from_pairs(a0: Point, a1: Point, b0: Point, b1: Point) -> Similarity {
        let da = [a1[0] - a0[0], a1[1] - a0[1]];
        let db = [b1[0] - b0[0], b1[1] - b0[1]];
        let n2 = da[0] * da[0] + da[1] * da[1];
        if n2 < 1e-24 {
            Similarity {
                origin: a0,
                target: b0,
                sr: 1.0,
                si: 0.0,
            }
        } else {
            // s = db / da in complex arithmetic
            Similarity {
                origin: a0,
                target: b0,
                sr: (db[0] * da[0] + db[1] * da[1]) / n2,
                si: (db[1] * da[0] - db[0] * da[1]) / n2,
            }
        }
    }

    fn apply(&self, q: Point) -> Point {
        let v = [q[0] - self.origin[0], q[1] - self.origin[1]];
        [
            self.target[0] + self.sr * v[0] - self.si * v[1],
            self.target[1] + self.si * v[0] + self.sr * v[1],
        ]
    }
}

/// Pin the integrated target curve in the workspace.
///
/// Integration from the test base point fixes the target's shape but not
/// where the manipulation leaves it. With an anchored node the target must
/// keep that node in place; otherwise the demonstrated displacement of the
/// first grasped node is transferred, so a demonstration replayed on its own
/// scene reproduces its own outcome.
pub fn place_target(
    output: &mut WarpOutput,
    train_traj: &Trajectory,
    test_before: &Curve,
    anchor: Option<usize>,
) -> Result<()> {
    let want_have = match anchor {
        Some(a) => {
            if a >= test_before.node_count() {
                return Err(Error::NodeOutOfRange {
                    index: a,
                    count: test_before.node_count(),
                });
            }
            (test_before.nodes()[a], output.target_curve.nodes()[a])
        }
        None => {
            let frames = &train_traj.keyframes;
            let s = frames
                .iter()
                .position(|f| f.status == GripperStatus::Closed)
                .ok_or(Error::NoGraspKeyframe)?;
            let mut e = s;
            while e + 1 < frames.len() && frames[e + 1].status == GripperStatus::Closed {
                e += 1;
            }
            let m = frames[s].grasp_node.ok_or(Error::MissingGraspNode { index: s })?;
            let n = map_grasp_node(&output.correspondence, m)?;
            if n >= test_before.node_count() {
                return Err(Error::NodeOutOfRange {
                    index: n,
                    count: test_before.node_count(),
                });
            }
            let grasp = test_before.nodes()[n];
            let want = [
                grasp[0] + frames[e].position[0] - frames[s].position[0],
                grasp[1] + frames[e].position[1] - frames[s].position[1],
            ];
            (want, output.target_curve.nodes()[n])
        }
    };
    let delta = [want_have.0[0] - want_have.1[0], want_have.0[1] - want_have.1[1]];
    let nodes = output
        .target_curve
        .nodes()
        .iter()
        .map(|p| [p[0] + delta[0], p[1] + delta[1]])
        .collect();
    output.target_curve = Curve::new_unchecked(nodes, output.target_curve.delta_l());
    output.target_profile.base_point = [
        output.target_profile.base_point[0] + delta[0],
        output.target_profile.base_point[1] + delta[1],
    ];
    Ok(())
}

/// Assemble the test trajectory for one step.
///
/// Each contiguous closed run of the training trajectory is re-anchored: the
/// grasp lands on the test object at the mapped node, the release lands at
/// that node's position on the target curve, and intermediate keyframes are
/// carried along by the similarity fixed by those two anchors. Open keyframes
/// ride with their nearest run.
pub fn generate_step_trajectory(
    output: &WarpOutput,
    train_traj: &Trajectory,
    test_before: &Curve,
) -> Result<Trajectory> {
    let frames = &train_traj.keyframes;
    if frames.is_empty() {
        return Err(Error::NoGraspKeyframe);
    }
    // contiguous closed runs as (start, end) inclusive
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < frames.len() {
        if frames[i].status == GripperStatus::Closed {
            let start = i;
            while i + 1 < frames.len() && frames[i + 1].status == GripperStatus::Closed {
                i += 1;
            }
            runs.push((start, i));
        }
        i += 1;
    }
    if runs.is_empty() {
        return Err(Error::NoGraspKeyframe);
    }
    for (s, e) in &runs {
        for k in *s..=*e {
            if frames[k].grasp_node.is_none() {
                return Err(Error::MissingGraspNode { index: k });
            }
        }
    }

    // one similarity per run
    let mut maps = Vec::with_capacity(runs.len());
    let mut mapped_nodes = Vec::with_capacity(runs.len());
    for &(s, e) in &runs {
        let m = frames[s].grasp_node.unwrap();
        let n = map_grasp_node(&output.correspondence, m)?;
        if n >= test_before.node_count() {
            return Err(Error::NodeOutOfRange {
                index: n,
                count: test_before.node_count(),
            });
        }
        let grasp_pos = test_before.nodes()[n];
        let target_pos = output.target_curve.nodes()[n];
        maps.push(Similarity::from_pairs(
            frames[s].position,
            frames[e].position,
            grasp_pos,
            target_pos,
        ));
        mapped_nodes.push(n);
    }

    // assign every frame to a run: frames before the first run approach it,
    // frames after a run (release) stay with it
    let mut keyframes = Vec::with_capacity(frames.len());
    let mut run_idx = 0usize;
    for (k, f) in frames.iter().enumerate() {
        while run_idx + 1 < runs.len() && k >= runs[run_idx + 1].0 {
            run_idx += 1;
        }
        let sim = &maps[run_idx];
        keyframes.push(Keyframe {
            position: sim.apply(f.position),
            status: f.status,
            grasp_node: if f.status == GripperStatus::Closed {
                Some(mapped_nodes[run_idx])
            } else {
                None
            },
        });
    }
    Ok(Trajectory { keyframes })
}
