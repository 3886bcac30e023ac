//! Acceptance suite: one test per criterion, each printing a PASS line on
//! success (run with `--nocapture` to see them). Tolerances and time budgets
//! are asserted, not just reported.

use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tanreg::cpd::{
    cpd_register, gaussian_kernel, initial_sigma2, m_step, points_to_matrix, posterior, transform,
    transform_point,
};
use tanreg::geometry::{
    curve_length, from_tangent, segment_deviation, to_tangent, TangentProfile,
};
use tanreg::pipeline::{register_cartesian, warp_points_cartesian, warp_tangent_scene};
use tanreg::scenario::{make_fixture, run_task, validate_physical, TaskConfig};
use tanreg::{Curve, RegistrationConfig};

type Mat = nalgebra::DMatrix<f64>;

fn random_profile(rng: &mut ChaCha8Rng, nodes: usize, max_turn: f64, delta_l: f64) -> TangentProfile {
    let mut theta: f64 = rng.gen_range(-180.0..180.0);
    let thetas = (0..nodes - 1)
        .map(|_| {
            theta += rng.gen_range(-max_turn..max_turn);
            theta
        })
        .collect();
    TangentProfile {
        thetas,
        base_point: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        delta_l,
        abscissa_scale: 10.0,
    }
}

fn random_curve(rng: &mut ChaCha8Rng, nodes: usize, max_turn: f64) -> Curve {
    let delta_l = rng.gen_range(0.01..0.1);
    from_tangent(&random_profile(rng, nodes, max_turn, delta_l))
}

/// Criterion 1: tangent-pipeline length conservation over 1,000 random
/// (train_before, train_after, test_before) triples of 20-200 node curves.
#[test]
fn acceptance_1_length_conservation() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let config = RegistrationConfig::default();
    let start = Instant::now();
    for _ in 0..1000 {
        let m = rng.gen_range(20..=200);
        let n = rng.gen_range(20..=200);
        let delta_l = rng.gen_range(0.01..0.1);
        let train_before = from_tangent(&random_profile(&mut rng, m, 60.0, delta_l));
        let train_after = from_tangent(&random_profile(&mut rng, m, 60.0, delta_l));
        let test_before = random_curve(&mut rng, n, 60.0);
        let warp =
            warp_tangent_scene(&train_before, &train_after, &test_before, &config, 10.0).unwrap();
        let expect = test_before.length();
        let rel = (curve_length(&warp.target_curve) - expect).abs() / expect;
        assert!(rel < 1e-12, "relative length error {rel:.3e} >= 1e-12");
        let dev = segment_deviation(warp.target_curve.nodes(), test_before.delta_l()).unwrap();
        assert!(dev < 1e-9, "segment deviation {dev:.3e} >= 1e-9");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}, budget 60 s");
    println!(
        "ACCEPTANCE 1 (length conservation, 1000 random triples, {elapsed:.2?}): PASS"
    );
}

/// Criterion 2: straighten fixture — the Cartesian baseline over-stretches
/// (segment deviation > 0.05) while the tangent pipeline stays exact.
#[test]
fn acceptance_2_straighten_baseline_comparison() {
    let start = Instant::now();
    let fx = make_fixture("straighten").unwrap();
    let step = &fx.demo.steps()[0];
    let config = RegistrationConfig::default();

    let reg = register_cartesian(&step.before, &fx.test_initial, &config).unwrap();
    let cart_target = warp_points_cartesian(&reg, step.after.nodes());
    let cart_dev = segment_deviation(&cart_target, fx.test_initial.delta_l()).unwrap();
    assert!(cart_dev > 0.05, "cartesian deviation {cart_dev:.4} <= 0.05");

    let warp = warp_tangent_scene(&step.before, &step.after, &fx.test_initial, &config, 10.0)
        .unwrap();
    let tan_dev = segment_deviation(warp.target_curve.nodes(), fx.test_initial.delta_l()).unwrap();
    assert!(tan_dev < 1e-9, "tangent deviation {tan_dev:.3e} >= 1e-9");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    println!(
        "ACCEPTANCE 2 (straighten: cartesian dev {cart_dev:.3} > 0.05, tangent {tan_dev:.1e}, {elapsed:.2?}): PASS"
    );
}

/// Criterion 3: cloth-unfold failure modes — Cartesian under-reaches the
/// narrow edge (over-compression) and over-stretches the wide one; the
/// tangent pipeline sets neither flag.
#[test]
fn acceptance_3_cloth_unfold_failure_modes() {
    let config = RegistrationConfig::default();
    let mut summaries = Vec::new();
    for (name, expect_compress) in [("cloth_unfold_narrow", true), ("cloth_unfold_wide", false)] {
        let fx = make_fixture(name).unwrap();
        let step = &fx.demo.steps()[0];
        let test = &fx.test_initial;

        let reg = register_cartesian(&step.before, test, &config).unwrap();
        let target = warp_points_cartesian(&reg, step.after.nodes());
        let report = validate_physical(&[target.clone()], test.delta_l(), 0.05);
        let x_extent = target.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max)
            - target.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        if expect_compress {
            assert!(
                x_extent < test.length(),
                "{name}: x-extent {x_extent:.4} not below true length {:.4}",
                test.length()
            );
            assert!(report.over_compression, "{name}: over-compression flag not set");
        } else {
            assert!(report.over_stretch, "{name}: over-stretch flag not set");
        }

        let warp = warp_tangent_scene(&step.before, &step.after, test, &config, 10.0).unwrap();
        let tan_report =
            validate_physical(&[warp.target_curve.nodes().to_vec()], test.delta_l(), 0.05);
        assert!(
            !tan_report.over_stretch && !tan_report.over_compression,
            "{name}: tangent mode raised a physicality flag"
        );
        summaries.push(format!("{name} x-extent {x_extent:.3}/{:.3}", test.length()));
    }
    println!("ACCEPTANCE 3 (cloth unfold: {}): PASS", summaries.join(", "));
}

/// Criterion 4: EM correctness on 50 randomized instances.
#[test]
fn acceptance_4_em_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let config = RegistrationConfig::default();
    let start = Instant::now();
    for _ in 0..50 {
        let m = rng.gen_range(10..=60);
        let n = rng.gen_range(10..=60);
        let x = points_to_matrix(random_curve(&mut rng, n, 60.0).nodes());
        let y = points_to_matrix(random_curve(&mut rng, m, 60.0).nodes());
        let reg = cpd_register(&x, &y, &config).unwrap();

        for w in reg.objective_trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-8,
                "objective increased: {} -> {}",
                w[0],
                w[1]
            );
        }
        // omega = 0: posterior columns are proper distributions
        let p = posterior(&x, &reg.z, reg.sigma2.max(1e-12), 0.0, 1.0).unwrap();
        for j in 0..p.ncols() {
            let s: f64 = (0..p.nrows()).map(|i| p[(i, j)]).sum();
            assert!((s - 1.0).abs() < 1e-12, "posterior column sum {s}");
        }
    }
    // self-registration leaves the points in place
    let y = points_to_matrix(random_curve(&mut rng, 40, 60.0).nodes());
    let reg = cpd_register(&y, &y, &config).unwrap();
    let w_inf = reg.w.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    assert!(w_inf < 1e-6, "self-registration |W|_inf = {w_inf:.3e}");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}, budget 30 s");
    println!("ACCEPTANCE 4 (EM correctness, 50 instances, |W|_inf {w_inf:.1e}, {elapsed:.2?}): PASS");
}

/// Criterion 5: kernel, posterior, objective, and transform match literal
/// double-loop evaluations on small instances.
#[test]
fn acceptance_5_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let m = rng.gen_range(2..=6);
        let n = rng.gen_range(2..=6);
        let rand_mat = |rng: &mut ChaCha8Rng, r: usize| {
            Mat::from_fn(r, 2, |_, _| rng.gen_range(-1.0..1.0))
        };
        let x = rand_mat(&mut rng, n);
        let y = rand_mat(&mut rng, m);
        let w = rand_mat(&mut rng, m) * 0.1;
        let beta: f64 = rng.gen_range(0.5..2.0);
        let sigma2: f64 = rng.gen_range(0.05..1.0);
        let omega: f64 = rng.gen_range(0.0..0.5);
        let lambda: f64 = rng.gen_range(1.0..20.0);
        let area = 2.0;

        // kernel oracle
        let g = gaussian_kernel(&y, beta);
        for i in 0..m {
            for j in 0..m {
                let d2 = (y[(i, 0)] - y[(j, 0)]).powi(2) + (y[(i, 1)] - y[(j, 1)]).powi(2);
                worst = worst.max((g[(i, j)] - (-d2 / (2.0 * beta * beta)).exp()).abs());
            }
        }

        // transform oracle (matrix and pointwise forms)
        let z = transform(&y, &w, &g).unwrap();
        for i in 0..m {
            let mut q = [y[(i, 0)], y[(i, 1)]];
            for k in 0..m {
                let d2 = (y[(i, 0)] - y[(k, 0)]).powi(2) + (y[(i, 1)] - y[(k, 1)]).powi(2);
                let ker = (-d2 / (2.0 * beta * beta)).exp();
                q[0] += w[(k, 0)] * ker;
                q[1] += w[(k, 1)] * ker;
            }
            worst = worst.max((z[(i, 0)] - q[0]).abs().max((z[(i, 1)] - q[1]).abs()));
            let pt = transform_point([y[(i, 0)], y[(i, 1)]], &y, &w, beta);
            worst = worst.max((pt[0] - q[0]).abs().max((pt[1] - q[1]).abs()));
        }

        // posterior oracle: literal Bayes with the uniform outlier component
        let p = posterior(&x, &z, sigma2, omega, area).unwrap();
        for j in 0..n {
            let dens: Vec<f64> = (0..m)
                .map(|i| {
                    let d2 = (x[(j, 0)] - z[(i, 0)]).powi(2) + (x[(j, 1)] - z[(i, 1)]).powi(2);
                    (1.0 - omega) / m as f64 * (-d2 / (2.0 * sigma2)).exp()
                        / (2.0 * std::f64::consts::PI * sigma2)
                })
                .collect();
            let denom: f64 = dens.iter().sum::<f64>() + omega / area;
            for i in 0..m {
                worst = worst.max((p[(i, j)] - dens[i] / denom).abs());
            }
        }

        // objective oracle: literal expected complete negative log-likelihood
        // plus the regularizer
        let obj = tanreg::cpd::objective(&x, &z, &p, &w, &g, sigma2, omega, area, lambda);
        let mut oracle = 0.0;
        for j in 0..n {
            let mut col = 0.0;
            for i in 0..m {
                let d2 = (x[(j, 0)] - z[(i, 0)]).powi(2) + (x[(j, 1)] - z[(i, 1)]).powi(2);
                oracle += p[(i, j)]
                    * (d2 / (2.0 * sigma2)
                        + (2.0 * std::f64::consts::PI * sigma2).ln()
                        - ((1.0 - omega) / m as f64).ln());
                col += p[(i, j)];
            }
            if omega > 0.0 {
                oracle -= (1.0 - col).max(0.0) * (omega / area).ln();
            }
        }
        let gw = &g * &w;
        for i in 0..m {
            for k in 0..2 {
                oracle += 0.5 * lambda * w[(i, k)] * gw[(i, k)];
            }
        }
        worst = worst.max((obj - oracle).abs());
    }
    assert!(worst < 1e-10, "worst oracle difference {worst:.3e} >= 1e-10");
    println!("ACCEPTANCE 5 (oracle equivalence, worst diff {worst:.1e}): PASS");
}

/// Criterion 6: tangent round trip within 1e-9 over 1,000 random curves,
/// including knot-like curves with total turning beyond 360 degrees.
#[test]
fn acceptance_6_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut saw_large_turning = false;
    for i in 0..1000 {
        let nodes = rng.gen_range(3..=120);
        // every fourth curve winds hard so total turning exceeds 360 degrees
        let max_turn = if i % 4 == 0 { 150.0 } else { 45.0 };
        let curve = random_curve(&mut rng, nodes, max_turn);
        let profile = to_tangent(&curve, 10.0).unwrap();
        let turning: f64 = profile
            .thetas
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .sum();
        saw_large_turning |= turning > 360.0;
        let back = from_tangent(&profile);
        for (a, b) in curve.nodes().iter().zip(back.nodes()) {
            assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
    }
    assert!(saw_large_turning, "no test curve had total turning > 360 degrees");
    println!("ACCEPTANCE 6 (tangent round trip, 1000 curves): PASS");
}

/// Criterion 7: knot_4step runs end-to-end, every intermediate state is
/// length-conserving, and self-transfer reproduces the demonstration.
#[test]
fn acceptance_7_multi_step_task() {
    let start = Instant::now();
    let fx = make_fixture("knot_4step").unwrap();
    let config = TaskConfig {
        anchor: fx.anchor,
        ..TaskConfig::default()
    };
    let results = run_task(&fx.demo, &fx.test_initial, &config).unwrap();
    assert_eq!(results.len(), 4);
    for (k, step) in results.iter().enumerate() {
        let dev = segment_deviation(step.predicted.nodes(), fx.test_initial.delta_l()).unwrap();
        assert!(dev < 1e-9, "step {k} predicted state deviation {dev:.3e}");
        let expect = fx.test_initial.length();
        let rel = (step.predicted.length() - expect).abs() / expect;
        assert!(rel < 1e-9, "step {k} length error {rel:.3e}");
    }
    // self-transfer: the test object IS the training initial state, so the
    // final prediction must reproduce the demonstrated final state
    let rope_len = fx.test_initial.length();
    let truth = &fx.demo.steps().last().unwrap().after;
    let mut worst = 0.0f64;
    for (a, b) in results.last().unwrap().predicted.nodes().iter().zip(truth.nodes()) {
        worst = worst.max((a[0] - b[0]).hypot(a[1] - b[1]));
    }
    assert!(
        worst < 0.02 * rope_len,
        "self-transfer error {worst:.4} >= 2% of rope length {rope_len:.3}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!(
        "ACCEPTANCE 7 (knot 4-step, self-transfer {:.2}% of rope length, {elapsed:.2?}): PASS",
        100.0 * worst / rope_len
    );
}

/// Criterion 8: one M = N = 100 registration, full 100 iterations, under 1 s.
#[test]
fn acceptance_8_performance() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let x = points_to_matrix(random_curve(&mut rng, 100, 60.0).nodes());
    let y = points_to_matrix(random_curve(&mut rng, 100, 60.0).nodes());
    let config = RegistrationConfig::default();
    // run the EM steps for exactly 100 iterations, no early convergence
    let g = gaussian_kernel(&y, config.beta);
    let mut z = y.clone();
    let mut sigma2 = initial_sigma2(&x, &y);
    let start = Instant::now();
    for _ in 0..100 {
        let p = posterior(&x, &z, sigma2, config.omega, config.area).unwrap();
        let (w, s2) = m_step(&x, &y, &p, &g, config.lambda, sigma2).unwrap();
        z = transform(&y, &w, &g).unwrap();
        sigma2 = s2.max(1e-12);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    println!("ACCEPTANCE 8 (M=N=100, 100 iterations in {elapsed:.2?}): PASS");
}

/// Criterion 9: two consecutive `warp` runs on the same fixture produce
/// byte-identical result files and SVGs.
#[test]
fn acceptance_9_determinism() {
    let bin = env!("CARGO_BIN_EXE_tanreg");
    let dirs = [
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    ];
    for mode in ["tangent", "cartesian"] {
        let mut outputs = Vec::new();
        for dir in &dirs {
            let out_dir = dir.path().join(mode);
            let status = Command::new(bin)
                .args(["warp", "--fixture", "straighten", "--mode", mode])
                .arg("--out-dir")
                .arg(&out_dir)
                .status()
                .unwrap();
            assert!(status.success(), "warp --mode {mode} failed");
            outputs.push((
                std::fs::read(out_dir.join("warp_result.json")).unwrap(),
                std::fs::read(out_dir.join("warp.svg")).unwrap(),
            ));
        }
        assert_eq!(outputs[0].0, outputs[1].0, "{mode} result files differ");
        assert_eq!(outputs[0].1, outputs[1].1, "{mode} SVGs differ");
        assert!(!outputs[0].1.is_empty());
    }
    println!("ACCEPTANCE 9 (byte-identical warp outputs across runs): PASS");
}
