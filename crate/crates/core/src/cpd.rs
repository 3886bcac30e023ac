//! Coherent point drift non-rigid registration.
//!
//! The reference set Y is treated as GMM centroids and registered onto the
//! observation set X by EM: the E-step computes posteriors p(m | x_n) with an
//! optional uniform outlier component, the M-step solves a kernel-regularized
//! linear system for the displacement weights W and updates the variance.
//! The transform is f(Y) = Y + G W with a Gaussian kernel G.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Variance floor below which the registration is considered converged.
pub const SIGMA2_COLLAPSE: f64 = 1e-12;

/// Regularization added to zero posterior row masses in the M-step.
const ROW_MASS_EPS: f64 = 1e-10;

/// Knobs for one registration run. Defaults follow the tangent-space regime:
/// lambda 10, omega 0, beta 1, 100 iterations.
#[derive(Debug, Clone)]
pub struct RegistrationConfig {
    /// Weight of the motion-coherence regularizer.
    pub lambda: f64,
    /// Outlier mass in [0, 1). Zero disables the uniform component.
    pub omega: f64,
    /// Gaussian kernel width.
    pub beta: f64,
    pub max_iter: usize,
    /// Convergence threshold on the objective decrease.
    pub tol: f64,
    /// Observation area H*W backing the uniform component; only used when omega > 0.
    pub area: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            lambda: 10.0,
            omega: 0.0,
            beta: 1.0,
            max_iter: 100,
            tol: 1e-8,
            area: 1.0,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.omega) {
            return Err(Error::InvalidConfig(format!(
                "omega must be in [0, 1), got {}",
                self.omega
            )));
        }
        if self.omega > 0.0 && !(self.area > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "area must be > 0 when omega > 0, got {}",
                self.area
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Outcome of [`cpd_register`]. `reference` and `beta` are kept so the fitted
/// transform can be evaluated at arbitrary points afterwards.
#[derive(Debug, Clone)]
pub struct RegistrationResult {
    /// The reference set Y the transform is anchored on (M x D).
    pub reference: DMatrix<f64>,
    /// Displacement weights (M x D).
    pub w: DMatrix<f64>,
    /// Transformed reference set Z = Y + G W (M x D).
    pub z: DMatrix<f64>,
    /// Final posterior matrix (M x N).
    pub p: DMatrix<f64>,
    /// Final variance.
    pub sigma2: f64,
    /// Kernel width the result was fitted with.
    pub beta: f64,
    /// Per-iteration objective values.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Pack points rows-first into an M x 2 matrix.
pub fn points_to_matrix(pts: &[Point]) -> DMatrix<f64> {
    DMatrix::from_fn(pts.len(), 2, |i, j| pts[i][j])
}

pub fn matrix_to_points(m: &DMatrix<f64>) -> Vec<Point> {
    assert_eq!(m.ncols(), 2, "expected 2-D point matrix");
    (0..m.nrows()).map(|i| [m[(i, 0)], m[(i, 1)]]).collect()
}

fn row_sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..a.ncols() {
        let d = a[(i, k)] - b[(j, k)];
        s += d * d;
    }
    s
}

/// Gaussian kernel matrix G_ij = exp(-|y_i - y_j|^2 / (2 beta^2)).
pub fn gaussian_kernel(y: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    let m = y.nrows();
    let inv = 1.0 / (2.0 * beta * beta);
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        g[(i, i)] = 1.0;
        for j in 0..i {
            let v = (-row_sq_dist(y, i, y, j) * inv).exp();
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Standard CPD variance initialization: mean squared pairwise distance over D.
pub fn initial_sigma2(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let (n, m, d) = (x.nrows(), y.nrows(), x.ncols());
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..n {
            s += row_sq_dist(y, i, x, j);
        }
    }
    s / (d * m * n) as f64
}

/// E-step posterior P_mn = p(m | x_n), column-stabilized in the log domain.
///
/// With omega > 0 each column additionally competes against the uniform
/// outlier component, so columns sum to <= 1; with omega = 0 they sum to 1.
pub fn posterior(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    sigma2: f64,
    omega: f64,
    area: f64,
) -> Result<DMatrix<f64>> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveSigma2(sigma2));
    }
    let (n, m, d) = (x.nrows(), z.nrows(), x.ncols());
    let inv = 1.0 / (2.0 * sigma2);
    // (omega/(1-omega)) * M (2 pi sigma^2)^{D/2} / A
    let outlier = if omega > 0.0 {
        omega / (1.0 - omega) * m as f64 * (2.0 * std::f64::consts::PI * sigma2).powf(d as f64 / 2.0)
            / area
    } else {
        0.0
    };
    let mut p = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut e = vec![0.0f64; m];
        let mut emax = f64::NEG_INFINITY;
        for (i, ei) in e.iter_mut().enumerate() {
            *ei = -row_sq_dist(x, j, z, i) * inv;
            emax = emax.max(*ei);
        }
        let mut denom = 0.0;
        for ei in &e {
            denom += (ei - emax).exp();
        }
        denom += outlier * (-emax).exp();
        for i in 0..m {
            let v = (e[i] - emax).exp() / denom;
            p[(i, j)] = if v.is_finite() { v } else { 0.0 };
        }
    }
    Ok(p)
}

/// M-step: solve (d(P1) G + lambda sigma^2 I) W = P X - d(P1) Y for W, then
/// update the variance from the weighted residuals.
pub fn m_step(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    p: &DMatrix<f64>,
    g: &DMatrix<f64>,
    lambda: f64,
    sigma2: f64,
) -> Result<(DMatrix<f64>, f64)> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveSigma2(sigma2));
    }
    let (m, n, d) = (y.nrows(), x.nrows(), x.ncols());
    if p.nrows() != m || p.ncols() != n || g.nrows() != m || g.ncols() != m {
        return Err(Error::ShapeMismatch(format!(
            "m_step: P is {}x{}, G is {}x{}, expected {m}x{n} and {m}x{m}",
            p.nrows(),
            p.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    // row masses P 1, regularized away from zero
    let mut p1 = vec![0.0f64; m];
    for i in 0..m {
        let mut s = 0.0;
        for j in 0..n {
            s += p[(i, j)];
        }
        p1[i] = s.max(ROW_MASS_EPS);
    }
    let px = p * x;
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = p1[i] * g[(i, j)];
        }
        a[(i, i)] += lambda * sigma2;
    }
    let mut rhs = px.clone();
    for i in 0..m {
        for k in 0..d {
            rhs[(i, k)] -= p1[i] * y[(i, k)];
        }
    }
    let w = a
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem { sigma2, lambda })?;
    let z = y + g * &w;

    // sigma2 = [tr(X' d(P'1) X) - 2 tr((PX)' Z) + tr(Z' d(P1) Z)] / (Np D)
    let mut np = 0.0;
    let mut t1 = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..m {
            col += p[(i, j)];
        }
        np += col;
        for k in 0..d {
            t1 += col * x[(j, k)] * x[(j, k)];
        }
    }
    let mut t2 = 0.0;
    let mut t3 = 0.0;
    for i in 0..m {
        for k in 0..d {
            t2 += px[(i, k)] * z[(i, k)];
            t3 += p1[i] * z[(i, k)] * z[(i, k)];
        }
    }
    let sigma2_new = (t1 - 2.0 * t2 + t3) / (np * d as f64);
    Ok((w, sigma2_new))
}

/// Matrix form of the transform: Z = Y + G W.
pub fn transform(y: &DMatrix<f64>, w: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = y.nrows();
    if g.nrows() != m || g.ncols() != m || w.nrows() != m || w.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "transform: Y is {}x{}, W is {}x{}, G is {}x{}",
            y.nrows(),
            y.ncols(),
            w.nrows(),
            w.ncols(),
            g.nrows(),
            g.ncols()
        )));
    }
    Ok(y + g * w)
}

/// Pointwise form of the fitted transform: f(q) = q + sum_m w_m G(q, y_m).
/// Used to warp arbitrary points (trajectory keyframes) through a result.
pub fn transform_point(q: Point, y: &DMatrix<f64>, w: &DMatrix<f64>, beta: f64) -> Point {
    let inv = 1.0 / (2.0 * beta * beta);
    let mut out = q;
    for i in 0..y.nrows() {
        let dx = q[0] - y[(i, 0)];
        let dy = q[1] - y[(i, 1)];
        let k = (-(dx * dx + dy * dy) * inv).exp();
        out[0] += w[(i, 0)] * k;
        out[1] += w[(i, 1)] * k;
    }
    out
}

/// Jensen upper bound on the negative log-likelihood plus the kernel-space
/// regularizer (lambda/2) tr(W' G W).
#[allow(clippy::too_many_arguments)]
pub fn objective(
    x: &DMatrix<f64>,
    z: &DMatrix<f64>,
    p: &DMatrix<f64>,
    w: &DMatrix<f64>,
    g: &DMatrix<f64>,
    sigma2: f64,
    omega: f64,
    area: f64,
    lambda: f64,
) -> f64 {
    let (n, m, d) = (x.nrows(), z.nrows(), x.ncols());
    let df = d as f64;
    let ln_norm = 0.5 * df * (2.0 * std::f64::consts::PI * sigma2).ln();
    let ln_pm = ((1.0 - omega) / m as f64).ln();
    let mut obj = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..m {
            let pij = p[(i, j)];
            if pij > 0.0 {
                obj += pij * (row_sq_dist(x, j, z, i) / (2.0 * sigma2) + ln_norm - ln_pm);
            }
            col += pij;
        }
        if omega > 0.0 {
            let pout = (1.0 - col).max(0.0);
            if pout > 0.0 {
                obj -= pout * (omega / area).ln();
            }
        }
    }
    let gw = g * w;
    let mut reg = 0.0;
    for i in 0..m {
        for k in 0..w.ncols() {
            reg += w[(i, k)] * gw[(i, k)];
        }
    }
    obj + 0.5 * lambda * reg
}

/// Register reference Y onto observation X by EM. Deterministic: no random
/// initialization, fixed iteration order, single-threaded.
pub fn cpd_register(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    config: &RegistrationConfig,
) -> Result<RegistrationResult> {
    config.validate()?;
    let (n, m) = (x.nrows(), y.nrows());
    if n < 2 {
        return Err(Error::TooFewNodes { min: 2, got: n });
    }
    if m < 2 {
        return Err(Error::TooFewNodes { min: 2, got: m });
    }
    if x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "dimension mismatch: X is {}-D, Y is {}-D",
            x.ncols(),
            y.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("registration input".into()));
    }

    let g = gaussian_kernel(y, config.beta);
    let mut sigma2 = initial_sigma2(x, y);
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveSigma2(sigma2));
    }
    let mut w = DMatrix::zeros(m, x.ncols());
    let mut z = y.clone();
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.max_iter {
        let p = posterior(x, &z, sigma2, config.omega, config.area)?;
        let (w_new, sigma2_new) = m_step(x, y, &p, &g, config.lambda, sigma2)?;
        w = w_new;
        z = y + &g * &w;
        iterations += 1;

        let s2_eval = sigma2_new.max(SIGMA2_COLLAPSE);
        let obj = objective(
            x,
            &z,
            &p,
            &w,
            &g,
            s2_eval,
            config.omega,
            config.area,
            config.lambda,
        );
        if !obj.is_finite() {
            return Err(Error::NonFinite("objective".into()));
        }
        if let Some(&last) = trace.last() {
            if last - obj < config.tol {
                converged = true;
                if obj <= last {
                    trace.push(obj);
                }
                break;
            }
        }
        trace.push(obj);
        if sigma2_new < SIGMA2_COLLAPSE {
            sigma2 = SIGMA2_COLLAPSE;
            converged = true;
            break;
        }
        sigma2 = sigma2_new;
    }

    // final posterior consistent with the final transform and variance
    let p = posterior(x, &z, sigma2, config.omega, config.area)?;
    Ok(RegistrationResult {
        reference: y.clone(),
        w,
        z,
        p,
        sigma2,
        beta: config.beta,
        objective_trace: trace,
        iterations,
        converged,
    })
}
