//! Command-line front end: wires scene/demo files and built-in fixtures to
//! the registration and transfer pipeline.
//!
//! Machine-readable output paths go to stdout; diagnostics go to stderr, so
//! results stay pipeable. Exit codes: 0 success, 1 input error, 2 a
//! registration hit the iteration cap without converging.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use tanreg::geometry::polyline_length;
use tanreg::io::{self, Diagnostics, PlotLayer, PlotStyle, ResultDoc};
use tanreg::pipeline::{
    generate_step_trajectory, place_target, register_cartesian, transformed_points,
    warp_points_cartesian, warp_tangent_scene, warp_trajectory_cartesian, Trajectory,
};
use tanreg::scenario::{make_fixture, run_task, validate_physical, Fixture, TaskConfig};
use tanreg::{segment_deviation, Curve, Error, RegistrationConfig, RegistrationResult, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;

const PALETTE: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

#[derive(Parser, Debug)]
#[command(
    name = "tanreg",
    version,
    about = "Transfer rope/cloth manipulation demonstrations to new object shapes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Registration and pipeline parameters, shared by all computing subcommands.
#[derive(Args, Debug, Clone)]
pub struct RegFlags {
    /// Deformation-field regularization weight
    #[arg(long, default_value_t = 10.0)]
    pub lambda: f64,
    /// Outlier mixture weight in [0, 1)
    #[arg(long, default_value_t = 0.0)]
    pub omega: f64,
    /// Gaussian kernel width of the deformation field
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// EM iteration cap
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// EM convergence tolerance on the objective decrease
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Tangent point-set abscissa spacing (point m sits at m * scale)
    #[arg(long, default_value_t = 10.0)]
    pub scale: f64,
    /// Reserved for interface stability; the pipeline is deterministic and
    /// never consumes randomness, so this flag has no effect.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RegFlags {
    fn registration(&self) -> RegistrationConfig {
        RegistrationConfig {
            lambda: self.lambda,
            omega: self.omega,
            beta: self.beta,
            max_iter: self.max_iter,
            tol: self.tol,
            ..RegistrationConfig::default()
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Register per-segment angles; conserves object length by construction
    Tangent,
    /// Register raw node positions and push points through the fitted field
    Cartesian,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Register scene Y onto scene X and report the fitted deformation
    Register {
        x_file: PathBuf,
        y_file: PathBuf,
        #[command(flatten)]
        flags: RegFlags,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Warp a demonstrated scene change onto a test scene
    Warp {
        /// Training scene before manipulation (omit when using --fixture)
        train_before: Option<PathBuf>,
        /// Training scene after manipulation
        train_after: Option<PathBuf>,
        /// Test scene the change is transferred to
        test_before: Option<PathBuf>,
        /// Use a built-in fixture instead of scene files
        #[arg(long)]
        fixture: Option<String>,
        #[arg(long, value_enum, default_value_t = Mode::Tangent)]
        mode: Mode,
        #[command(flatten)]
        flags: RegFlags,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Run every step of a demonstration on a test scene
    Task {
        /// Demonstration file (omit when using --fixture)
        demo_file: Option<PathBuf>,
        /// Initial test scene (omit when using --fixture)
        test_scene: Option<PathBuf>,
        #[arg(long)]
        fixture: Option<String>,
        /// Over-stretch / over-compression flag threshold
        #[arg(long, default_value_t = tanreg::DEFAULT_DEVIATION_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        flags: RegFlags,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Check scene files against the uniform-segment constraint
    Validate {
        scenes: Vec<PathBuf>,
        #[arg(long, default_value_t = tanreg::DEFAULT_DEVIATION_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Overlay scene files in one SVG plot
    Plot {
        scenes: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// List built-in fixtures, or write them out as scene/demo files
    Fixtures {
        /// Write only this fixture
        #[arg(long)]
        fixture: Option<String>,
        /// Directory to write fixture files into; omit to just list names
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

pub fn run(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Register {
            x_file,
            y_file,
            flags,
            out_dir,
        } => cmd_register(&x_file, &y_file, &flags, &out_dir),
        Command::Warp {
            train_before,
            train_after,
            test_before,
            fixture,
            mode,
            flags,
            out_dir,
        } => {
            let (tb, ta, te, traj, anchor) =
                warp_inputs(train_before, train_after, test_before, fixture)?;
            cmd_warp(&tb, &ta, &te, traj.as_ref(), anchor, mode, &flags, &out_dir)
        }
        Command::Task {
            demo_file,
            test_scene,
            fixture,
            threshold,
            flags,
            out_dir,
        } => cmd_task(demo_file, test_scene, fixture, threshold, &flags, &out_dir),
        Command::Validate {
            scenes,
            threshold,
            out_dir,
        } => cmd_validate(&scenes, threshold, &out_dir),
        Command::Plot { scenes, out_dir } => cmd_plot(&scenes, &out_dir),
        Command::Fixtures { fixture, out_dir } => cmd_fixtures(fixture, out_dir),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn diameter(points: &[tanreg::Point]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d = d.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
    }
    d
}

fn diagnostics_for(reg: &RegistrationResult, nodes: &[tanreg::Point], delta_l: f64) -> Diagnostics {
    let expect = (nodes.len() - 1) as f64 * delta_l;
    let length_error = if expect > 0.0 {
        (polyline_length(nodes) - expect).abs() / expect
    } else {
        0.0
    };
    Diagnostics {
        iterations: reg.iterations,
        converged: reg.converged,
        sigma2: reg.sigma2,
        objective_trace: reg.objective_trace.clone(),
        length_error,
        segment_deviation: segment_deviation(nodes, delta_l).unwrap_or(f64::INFINITY),
    }
}

fn convergence_exit(converged: bool) -> i32 {
    if converged {
        EXIT_OK
    } else {
        EXIT_NO_CONVERGENCE
    }
}

fn cmd_register(x_file: &Path, y_file: &Path, flags: &RegFlags, out_dir: &Path) -> Result<i32> {
    let x = io::load_scene(x_file)?;
    let y = io::load_scene(y_file)?;
    let config = flags.registration();
    let reg = tanreg::cpd_register(
        &tanreg::cpd::points_to_matrix(x.nodes()),
        &tanreg::cpd::points_to_matrix(y.nodes()),
        &config,
    )?;
    let moved = transformed_points(&reg);
    let max_disp = y
        .nodes()
        .iter()
        .zip(&moved)
        .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
        .fold(0.0f64, f64::max);
    let residual = x
        .nodes()
        .iter()
        .map(|&p| {
            moved
                .iter()
                .map(|&q| (p[0] - q[0]).hypot(p[1] - q[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0f64, f64::max);

    let doc = ResultDoc {
        mode: "register".into(),
        target_nodes: moved.clone(),
        target_angles_deg: Vec::new(),
        correspondence: None,
        grasp_map: Vec::new(),
        keyframes: Vec::new(),
        diagnostics: diagnostics_for(&reg, &moved, y.delta_l()),
    };
    ensure_dir(out_dir)?;
    let path = out_dir.join("register_result.json");
    io::save_result(&path, &doc)?;
    eprintln!(
        "register: {} iterations, converged = {}, sigma2 = {:.3e}",
        reg.iterations, reg.converged, reg.sigma2
    );
    eprintln!("register: max displacement = {max_disp:.6e} (diameter {:.6e})", diameter(y.nodes()));
    eprintln!("register: worst residual to nearest target = {residual:.6e}");
    println!("{}", path.display());
    Ok(convergence_exit(reg.converged))
}

type WarpInputs = (Curve, Curve, Curve, Option<Trajectory>, Option<usize>);

fn warp_inputs(
    train_before: Option<PathBuf>,
    train_after: Option<PathBuf>,
    test_before: Option<PathBuf>,
    fixture: Option<String>,
) -> Result<WarpInputs> {
    if let Some(name) = fixture {
        let fx = make_fixture(&name)?;
        let step = &fx.demo.steps()[0];
        return Ok((
            step.before.clone(),
            step.after.clone(),
            fx.test_initial,
            Some(step.trajectory.clone()),
            fx.anchor,
        ));
    }
    match (train_before, train_after, test_before) {
        (Some(tb), Some(ta), Some(te)) => Ok((
            io::load_scene(tb)?,
            io::load_scene(ta)?,
            io::load_scene(te)?,
            None,
            None,
        )),
        _ => Err(Error::InvalidConfig(
            "warp needs train_before, train_after and test_before files, or --fixture".into(),
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_warp(
    train_before: &Curve,
    train_after: &Curve,
    test_before: &Curve,
    trajectory: Option<&Trajectory>,
    anchor: Option<usize>,
    mode: Mode,
    flags: &RegFlags,
    out_dir: &Path,
) -> Result<i32> {
    let config = flags.registration();
    let (doc, target_nodes, converged) = match mode {
        Mode::Tangent => {
            let mut warp =
                warp_tangent_scene(train_before, train_after, test_before, &config, flags.scale)?;
            let keyframes = match trajectory {
                Some(traj) => {
                    place_target(&mut warp, traj, test_before, anchor)?;
                    generate_step_trajectory(&warp, traj, test_before)?.keyframes
                }
                None => Vec::new(),
            };
            let c = &warp.correspondence;
            let rows = (0..c.nrows())
                .map(|n| (0..c.ncols()).map(|m| c.get(n, m)).collect())
                .collect();
            let nodes = warp.target_curve.nodes().to_vec();
            let doc = ResultDoc {
                mode: "tangent".into(),
                target_nodes: nodes.clone(),
                target_angles_deg: warp.target_profile.thetas.clone(),
                correspondence: Some(rows),
                grasp_map: warp.grasp_map.clone(),
                keyframes,
                diagnostics: diagnostics_for(&warp.registration, &nodes, test_before.delta_l()),
            };
            let converged = warp.registration.converged;
            (doc, nodes, converged)
        }
        Mode::Cartesian => {
            let reg = register_cartesian(train_before, test_before, &config)?;
            let nodes = warp_points_cartesian(&reg, train_after.nodes());
            let keyframes = match trajectory {
                Some(traj) => warp_trajectory_cartesian(&reg, traj).keyframes,
                None => Vec::new(),
            };
            let doc = ResultDoc {
                mode: "cartesian".into(),
                target_nodes: nodes.clone(),
                target_angles_deg: Vec::new(),
                correspondence: None,
                grasp_map: Vec::new(),
                keyframes,
                diagnostics: diagnostics_for(&reg, &nodes, test_before.delta_l()),
            };
            let converged = reg.converged;
            (doc, nodes, converged)
        }
    };

    ensure_dir(out_dir)?;
    let result_path = out_dir.join("warp_result.json");
    io::save_result(&result_path, &doc)?;
    let svg_path = out_dir.join("warp.svg");
    let layer = |pts: &[tanreg::Point], label: &str, i: usize| PlotLayer {
        points: pts.to_vec(),
        style: PlotStyle::new(label, PALETTE[i % PALETTE.len()]),
    };
    io::write_plot(
        &svg_path,
        &[
            layer(train_before.nodes(), "train before", 0),
            layer(train_after.nodes(), "train after", 1),
            layer(test_before.nodes(), "test before", 2),
            layer(&target_nodes, "target", 3),
        ],
    )?;
    eprintln!(
        "warp: length error = {:.3e}, segment deviation = {:.3e}",
        doc.diagnostics.length_error, doc.diagnostics.segment_deviation
    );
    println!("{}", result_path.display());
    println!("{}", svg_path.display());
    Ok(convergence_exit(converged))
}

fn cmd_task(
    demo_file: Option<PathBuf>,
    test_scene: Option<PathBuf>,
    fixture: Option<String>,
    threshold: f64,
    flags: &RegFlags,
    out_dir: &Path,
) -> Result<i32> {
    let (demo, test_initial, anchor) = if let Some(name) = fixture {
        let Fixture {
            demo,
            test_initial,
            anchor,
            ..
        } = make_fixture(&name)?;
        (demo, test_initial, anchor)
    } else {
        match (demo_file, test_scene) {
            (Some(d), Some(t)) => (io::load_demo(d)?, io::load_scene(t)?, None),
            _ => {
                return Err(Error::InvalidConfig(
                    "task needs a demo file and a test scene, or --fixture".into(),
                ))
            }
        }
    };
    let config = TaskConfig {
        registration: flags.registration(),
        abscissa_scale: flags.scale,
        anchor,
    };
    let results = run_task(&demo, &test_initial, &config)?;

    ensure_dir(out_dir)?;
    let mut all_converged = true;
    let mut states: Vec<Vec<tanreg::Point>> = vec![test_initial.nodes().to_vec()];
    let mut grasp_indices = Vec::new();
    for (k, step) in results.iter().enumerate() {
        let nodes = step.warp.target_curve.nodes().to_vec();
        let c = &step.warp.correspondence;
        let rows = (0..c.nrows())
            .map(|n| (0..c.ncols()).map(|m| c.get(n, m)).collect())
            .collect();
        let doc = ResultDoc {
            mode: "tangent".into(),
            target_nodes: nodes.clone(),
            target_angles_deg: step.warp.target_profile.thetas.clone(),
            correspondence: Some(rows),
            grasp_map: step.warp.grasp_map.clone(),
            keyframes: step.trajectory.keyframes.clone(),
            diagnostics: diagnostics_for(&step.warp.registration, &nodes, test_initial.delta_l()),
        };
        let path = out_dir.join(format!("step_{k}.json"));
        io::save_result(&path, &doc)?;
        println!("{}", path.display());
        all_converged &= step.warp.registration.converged;
        states.push(step.predicted.nodes().to_vec());
        if let Some(n) = step
            .trajectory
            .keyframes
            .iter()
            .find_map(|f| f.grasp_node)
        {
            grasp_indices.push(n);
        }
    }

    let mut report = validate_physical(&states, test_initial.delta_l(), threshold);
    report.grasp_indices = grasp_indices;
    let summary_path = out_dir.join("summary.json");
    fs::write(
        &summary_path,
        io::write_value(&io::validation_to_value(&report)?) + "\n",
    )?;
    eprintln!(
        "task: {} steps, max segment deviation = {:.3e}, over_stretch = {}, over_compression = {}",
        results.len(),
        report.max_segment_deviation,
        report.over_stretch,
        report.over_compression
    );
    println!("{}", summary_path.display());
    Ok(convergence_exit(all_converged))
}

fn cmd_validate(scenes: &[PathBuf], threshold: f64, out_dir: &Path) -> Result<i32> {
    if scenes.is_empty() {
        return Err(Error::InvalidConfig("validate needs at least one scene file".into()));
    }
    let mut reports = Vec::new();
    for path in scenes {
        let curve = io::load_scene(path)?;
        let report = validate_physical(&[curve.nodes().to_vec()], curve.delta_l(), threshold);
        eprintln!(
            "validate {}: length error = {:.3e}, max segment deviation = {:.3e}",
            path.display(),
            report.length_errors[0],
            report.max_segment_deviation
        );
        reports.push(io::validation_to_value(&report)?);
    }
    ensure_dir(out_dir)?;
    let path = out_dir.join("validation.json");
    fs::write(&path, io::write_value(&serde_json::Value::Array(reports)) + "\n")?;
    println!("{}", path.display());
    Ok(EXIT_OK)
}

fn cmd_plot(scenes: &[PathBuf], out_dir: &Path) -> Result<i32> {
    if scenes.is_empty() {
        return Err(Error::InvalidConfig("plot needs at least one scene file".into()));
    }
    let mut layers = Vec::new();
    for (i, path) in scenes.iter().enumerate() {
        let curve = io::load_scene(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("scene {i}"));
        layers.push(PlotLayer {
            points: curve.nodes().to_vec(),
            style: PlotStyle::new(label, PALETTE[i % PALETTE.len()]),
        });
    }
    ensure_dir(out_dir)?;
    let path = out_dir.join("plot.svg");
    io::write_plot(&path, &layers)?;
    println!("{}", path.display());
    Ok(EXIT_OK)
}

fn cmd_fixtures(fixture: Option<String>, out_dir: Option<PathBuf>) -> Result<i32> {
    let names: Vec<String> = match &fixture {
        Some(name) => vec![make_fixture(name)?.name],
        None => tanreg::fixture_names().iter().map(|s| s.to_string()).collect(),
    };
    let Some(dir) = out_dir else {
        for name in names {
            println!("{name}");
        }
        return Ok(EXIT_OK);
    };
    ensure_dir(&dir)?;
    for name in names {
        let fx = make_fixture(&name)?;
        let demo_path = dir.join(format!("{name}_demo.json"));
        io::save_demo(&demo_path, &fx.demo)?;
        let scene_path = dir.join(format!("{name}_test_scene.json"));
        io::save_scene(&scene_path, &fx.test_initial, Some("test_before"))?;
        println!("{}", demo_path.display());
        println!("{}", scene_path.display());
    }
    Ok(EXIT_OK)
}
