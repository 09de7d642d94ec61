//! Deterministic equivalents: the `(delta_cos, delta_sin)` fixed point, the
//! ridgeless `gamma` variables, the 2x2 correction matrix `Omega` and the
//! closed-form training and test errors.

use faer::{Mat, MatRef};
use log::debug;

use crate::data::DataMatrix;
use crate::empirical::{resolvent, sample_features_with};
use crate::error::{Error, Result};
use crate::kernels::KernelPair;
use crate::linalg::{
    add_diagonal, frobenius_dot, is_symmetric, mat_vec, spd_inverse, sym_operator_norm, trace,
    trace_of_product,
};

/// Smallest value a ridgeless variable may take during iteration.
pub const GAMMA_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual `|T(v) - v| / (1 + |v|)` accepted as converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointSolution {
    pub delta_cos: f64,
    pub delta_sin: f64,
    /// `((N/n) Phi + lambda I)^-1` evaluated at the returned deltas.
    pub q_bar: Mat<f64>,
    pub lambda: f64,
    pub n_features: usize,
    pub iterations: usize,
    pub residual: f64,
}

impl FixedPointSolution {
    pub fn n(&self) -> usize {
        self.q_bar.nrows()
    }

    pub fn ratio(&self) -> f64 {
        self.n_features as f64 / self.n() as f64
    }

    pub fn deltas(&self) -> [f64; 2] {
        [self.delta_cos, self.delta_sin]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `2N < n`
    Under,
    /// `2N > n`
    Over,
}

impl Regime {
    pub fn of(n_features: usize, n: usize) -> Option<Self> {
        match (2 * n_features).cmp(&n) {
            std::cmp::Ordering::Less => Some(Regime::Under),
            std::cmp::Ordering::Greater => Some(Regime::Over),
            std::cmp::Ordering::Equal => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GammaSolution {
    pub gamma_cos: f64,
    pub gamma_sin: f64,
    pub regime: Regime,
    /// Limit of `lambda Q_bar` below the threshold, of `Q_bar` above it.
    pub scaled_resolvent: Mat<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Omega {
    pub omega: [[f64; 2]; 2],
    pub omega_inv: [[f64; 2]; 2],
    pub det_omega_inv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPrediction {
    pub e_train: f64,
    pub e_test: f64,
    pub omega: [[f64; 2]; 2],
    pub theta_cos: f64,
    pub theta_sin: f64,
    pub det_omega_inv: f64,
}

/// The map `v -> (tr(K_s R(v)) / n)_s` with
/// `R(v) = (ratio * sum_s K_s / (offset + v_s) + shift I)^-1`.
///
/// * deltas: `offset = 1`, `shift = lambda`
/// * ridgeless, under-parameterized: `offset = 0`, `shift = 1`
/// * ridgeless, over-parameterized: `offset = 1`, `shift = 0`
struct System<'a> {
    k: &'a KernelPair,
    ratio: f64,
    offset: f64,
    shift: f64,
    floor: f64,
    /// Components with an all-zero kernel are pinned to zero.
    active: [bool; 2],
}

struct Eval {
    t: [f64; 2],
    q: Mat<f64>,
}

impl<'a> System<'a> {
    fn new(k: &'a KernelPair, ratio: f64, offset: f64, shift: f64, floor: f64) -> Self {
        let active = [trace(k.k_cos()) > 0.0, trace(k.k_sin()) > 0.0];
        Self { k, ratio, offset, shift, floor, active }
    }

    fn n(&self) -> f64 {
        self.k.nrows() as f64
    }

    fn denom(&self, v: [f64; 2], s: usize) -> f64 {
        self.offset + v[s]
    }

    fn resolvent(&self, v: [f64; 2]) -> Result<Mat<f64>> {
        let n = self.k.nrows();
        let mut m = Mat::<f64>::zeros(n, n);
        for s in 0..2 {
            if self.active[s] {
                let c = self.ratio / self.denom(v, s);
                m += c * self.k.component(s);
            }
        }
        let m = add_diagonal(m.as_ref(), self.shift);
        spd_inverse(m.as_ref(), "resolvent matrix")
    }

    fn eval(&self, v: [f64; 2]) -> Result<Eval> {
        let q = self.resolvent(v)?;
        let mut t = [0.0; 2];
        for s in 0..2 {
            if self.active[s] {
                t[s] = frobenius_dot(self.k.component(s), q.as_ref()) / self.n();
            }
        }
        Ok(Eval { t, q })
    }

    /// Derivative `dT_s / dv_r = ratio tr(R K_s R K_r) / n / (offset + v_r)^2`.
    fn jacobian_of_map(&self, v: [f64; 2], q: MatRef<'_, f64>) -> [[f64; 2]; 2] {
        let p = [q * self.k.k_cos(), q * self.k.k_sin()];
        let mut d = [[0.0; 2]; 2];
        for s in 0..2 {
            for r in 0..2 {
                if self.active[s] && self.active[r] {
                    let tr = trace_of_product(p[s].as_ref(), p[r].as_ref()) / self.n();
                    d[s][r] = self.ratio * tr / self.denom(v, r).powi(2);
                }
            }
        }
        d
    }

    fn merit(v: [f64; 2], t: [f64; 2]) -> f64 {
        (0..2).map(|s| (t[s] - v[s]).abs() / (1.0 + v[s].abs())).fold(0.0, f64::max)
    }

    fn admissible(&self, v: [f64; 2]) -> bool {
        (0..2).all(|s| !self.active[s] || (v[s].is_finite() && v[s] >= self.floor && self.denom(v, s) > 0.0))
    }

    fn pin(&self, mut v: [f64; 2]) -> [f64; 2] {
        for s in 0..2 {
            if !self.active[s] {
                v[s] = 0.0;
            } else {
                v[s] = v[s].max(self.floor);
            }
        }
        v
    }

    /// Newton iteration on `v - T(v) = 0` with step halving; a plain
    /// fixed-point step is taken whenever no Newton step lowers the residual.
    fn solve(&self, start: [f64; 2], opts: &SolverOptions) -> Result<(([f64; 2], Mat<f64>), usize, f64)> {
        let mut v = self.pin(start);
        let mut e = self.eval(v)?;
        let mut res = Self::merit(v, e.t);
        for it in 0..opts.max_iter {
            if res <= opts.tol {
                return Ok(((v, e.q), it, res));
            }
            let d = self.jacobian_of_map(v, e.q.as_ref());
            let j = [[1.0 - d[0][0], -d[0][1]], [-d[1][0], 1.0 - d[1][1]]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let g = [v[0] - e.t[0], v[1] - e.t[1]];
            let mut next = None;
            if det.is_finite() && det.abs() > f64::MIN_POSITIVE {
                let step = [
                    -(j[1][1] * g[0] - j[0][1] * g[1]) / det,
                    -(-j[1][0] * g[0] + j[0][0] * g[1]) / det,
                ];
                let mut scale = 1.0;
                for _ in 0..12 {
                    let cand = [v[0] + scale * step[0], v[1] + scale * step[1]];
                    if self.admissible(cand) {
                        let cand = self.pin(cand);
                        if let Ok(ec) = self.eval(cand) {
                            let rc = Self::merit(cand, ec.t);
                            if rc < res {
                                next = Some((cand, ec, rc));
                                break;
                            }
                        }
                    }
                    scale *= 0.5;
                }
            }
            let (nv, ne, nr) = match next {
                Some(x) => x,
                None => {
                    let cand = self.pin(e.t);
                    let ec = self.eval(cand)?;
                    let rc = Self::merit(cand, ec.t);
                    (cand, ec, rc)
                }
            };
            v = nv;
            e = ne;
            res = nr;
        }
        if res <= opts.tol {
            return Ok(((v, e.q), opts.max_iter, res));
        }
        Err(Error::Convergence { iterations: opts.max_iter, residual: res })
    }
}

/// Solves the coupled equations `delta_s = tr(K_s Q_bar) / n`.
pub fn solve_delta(
    k: &KernelPair,
    n_features: usize,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<FixedPointSolution> {
    let n = k.require_square("solve_delta")?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let ratio = n_features as f64 / n as f64;
    let sys = System::new(k, ratio, 1.0, lambda, 0.0);
    // tr(K_s) / (n lambda) bounds the solution from above and the map is
    // monotone, so the iteration approaches from a supersolution.
    let start = [trace(k.k_cos()) / (n as f64 * lambda), trace(k.k_sin()) / (n as f64 * lambda)];
    let ((v, q), iterations, residual) = sys.solve(start, opts)?;
    debug!("delta fixed point N={n_features} lambda={lambda:e}: {v:?} after {iterations} iterations");
    Ok(FixedPointSolution {
        delta_cos: v[0],
        delta_sin: v[1],
        q_bar: q,
        lambda,
        n_features,
        iterations,
        residual,
    })
}

/// Ridgeless (`lambda -> 0`) limit of the fixed point on either side of the
/// interpolation threshold.
pub fn solve_gamma(k: &KernelPair, n_features: usize, opts: &SolverOptions) -> Result<GammaSolution> {
    let n = k.require_square("solve_gamma")?;
    let regime = Regime::of(n_features, n).ok_or(Error::PhaseBoundary { n })?;
    let ratio = n_features as f64 / n as f64;
    let ((v, q), iterations, residual) = match regime {
        Regime::Under => {
            let sys = System::new(k, ratio, 0.0, 1.0, GAMMA_FLOOR);
            let start = [trace(k.k_cos()) / n as f64, trace(k.k_sin()) / n as f64];
            let out = sys.solve(start, opts)?;
            let v = out.0 .0;
            if (0..2).any(|s| sys.active[s] && v[s] <= GAMMA_FLOOR) {
                return Err(Error::Convergence { iterations: out.1, residual: out.2 });
            }
            out
        }
        Regime::Over => {
            let warm = solve_delta(k, n_features, 1e-6, opts)?;
            let sys = System::new(k, ratio, 1.0, 0.0, 0.0);
            sys.solve(warm.deltas(), opts)?
        }
    };
    Ok(GammaSolution {
        gamma_cos: v[0],
        gamma_sin: v[1],
        regime,
        scaled_resolvent: q,
        iterations,
        residual,
    })
}

fn check_solution(k: &KernelPair, fp: &FixedPointSolution) -> Result<usize> {
    let n = k.require_square("theory")?;
    if fp.n() != n {
        return Err(Error::Shape(format!("solution is for n = {}, kernels have n = {n}", fp.n())));
    }
    Ok(n)
}

/// `Q_bar K_s` for both components.
fn qk_products(k: &KernelPair, fp: &FixedPointSolution) -> [Mat<f64>; 2] {
    [&fp.q_bar * k.k_cos(), &fp.q_bar * k.k_sin()]
}

fn omega_from_products(fp: &FixedPointSolution, p: &[Mat<f64>; 2]) -> Result<Omega> {
    let n = fp.n() as f64;
    let ratio = fp.ratio();
    let d = fp.deltas();
    let mut inv = [[1.0, 0.0], [0.0, 1.0]];
    for s in 0..2 {
        for r in 0..2 {
            let tr = trace_of_product(p[s].as_ref(), p[r].as_ref()) / n;
            inv[s][r] -= ratio * tr / (1.0 + d[r]).powi(2);
        }
    }
    let det = inv[0][0] * inv[1][1] - inv[0][1] * inv[1][0];
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::Degeneracy(format!("det(Omega^-1) = {det:e} is not positive")));
    }
    let omega = [[inv[1][1] / det, -inv[0][1] / det], [-inv[1][0] / det, inv[0][0] / det]];
    Ok(Omega { omega, omega_inv: inv, det_omega_inv: det })
}

pub fn omega(k: &KernelPair, fp: &FixedPointSolution) -> Result<Omega> {
    check_solution(k, fp)?;
    omega_from_products(fp, &qk_products(k, fp))
}

fn quad(row: [f64; 2], m: &[[f64; 2]; 2], col: [f64; 2]) -> f64 {
    (0..2).map(|s| (0..2).map(|r| row[s] * m[s][r] * col[r]).sum::<f64>()).sum()
}

struct TrainTerms {
    e_train: f64,
    omega: Omega,
    /// `y^T Q_bar K_s Q_bar y`
    b: [f64; 2],
}

fn train_terms(k: &KernelPair, y: &[f64], fp: &FixedPointSolution) -> Result<TrainTerms> {
    let n = check_solution(k, fp)?;
    if y.len() != n {
        return Err(Error::Shape(format!("{} targets for {n} samples", y.len())));
    }
    let p = qk_products(k, fp);
    let om = omega_from_products(fp, &p)?;
    let nf = n as f64;
    let lam = fp.lambda;
    let qy = mat_vec(fp.q_bar.as_ref(), y);
    let first = lam * lam / nf * qy.iter().map(|v| v * v).sum::<f64>();
    let d = fp.deltas();
    let mut v = [0.0; 2];
    let mut b = [0.0; 2];
    for s in 0..2 {
        v[s] = frobenius_dot(p[s].as_ref(), fp.q_bar.as_ref()) / nf / (1.0 + d[s]).powi(2);
        let kq = mat_vec(k.component(s), &qy);
        b[s] = qy.iter().zip(&kq).map(|(a, c)| a * c).sum();
    }
    let second = fp.ratio() * lam * lam / nf * quad(v, &om.omega, b);
    Ok(TrainTerms { e_train: first + second, omega: om, b })
}

/// Asymptotic training error.
pub fn train_mse_theory(k: &KernelPair, y: &[f64], fp: &FixedPointSolution) -> Result<f64> {
    Ok(train_terms(k, y, fp)?.e_train)
}

/// `Phi_hat Q_bar` with `Phi_hat = sum_s K_s(X_hat, X) / (1 + delta_s)`.
fn phi_hat_q(k_cross: &KernelPair, fp: &FixedPointSolution) -> Mat<f64> {
    let d = fp.deltas();
    let phi_hat = (1.0 / (1.0 + d[0])) * k_cross.k_cos() + (1.0 / (1.0 + d[1])) * k_cross.k_sin();
    &phi_hat * &fp.q_bar
}

fn check_test_shapes(k_train: &KernelPair, k_cross: &KernelPair, k_test: &KernelPair, fp: &FixedPointSolution) -> Result<usize> {
    let n = check_solution(k_train, fp)?;
    let n_hat = k_cross.nrows();
    if k_cross.ncols() != n {
        return Err(Error::Shape(format!("cross kernel has {} columns, expected {n}", k_cross.ncols())));
    }
    if k_test.nrows() != n_hat || k_test.ncols() != n_hat {
        return Err(Error::Shape(format!(
            "test kernel is {}x{}, expected {n_hat}x{n_hat}",
            k_test.nrows(),
            k_test.ncols()
        )));
    }
    Ok(n_hat)
}

fn theta_from(k_train: &KernelPair, k_cross: &KernelPair, k_test: &KernelPair, fp: &FixedPointSolution, b: MatRef<'_, f64>) -> [f64; 2] {
    let nf = fp.n() as f64;
    let big_n = fp.n_features as f64;
    let mut theta = [0.0; 2];
    for s in 0..2 {
        let own = if fp.n_features == 0 { 0.0 } else { trace(k_test.component(s)) / big_n };
        let bk = b * k_train.component(s);
        let middle = fp.ratio() / nf * frobenius_dot(bk.as_ref(), b);
        let cross = 2.0 / nf * frobenius_dot(b, k_cross.component(s));
        theta[s] = own + middle - cross;
    }
    theta
}

/// `(Theta_cos, Theta_sin)` for a test set with cross kernels `k_cross`
/// (`n_hat x n`) and self kernels `k_test` (`n_hat x n_hat`).
pub fn theta_sigma(
    k_train: &KernelPair,
    k_cross: &KernelPair,
    k_test: &KernelPair,
    fp: &FixedPointSolution,
) -> Result<(f64, f64)> {
    check_test_shapes(k_train, k_cross, k_test, fp)?;
    let b = phi_hat_q(k_cross, fp);
    let t = theta_from(k_train, k_cross, k_test, fp, b.as_ref());
    Ok((t[0], t[1]))
}

/// Full prediction: training error, test error, `Omega` and `Theta`.
pub fn predict(
    k_train: &KernelPair,
    k_cross: &KernelPair,
    k_test: &KernelPair,
    y: &[f64],
    y_hat: &[f64],
    fp: &FixedPointSolution,
) -> Result<TheoryPrediction> {
    let n_hat = check_test_shapes(k_train, k_cross, k_test, fp)?;
    if y_hat.len() != n_hat {
        return Err(Error::Shape(format!("{} test targets for {n_hat} test samples", y_hat.len())));
    }
    let tt = train_terms(k_train, y, fp)?;
    let b = phi_hat_q(k_cross, fp);
    let ratio = fp.ratio();
    let by = mat_vec(b.as_ref(), y);
    let nh = n_hat as f64;
    let first = y_hat.iter().zip(&by).map(|(a, c)| (a - ratio * c).powi(2)).sum::<f64>() / nh;
    let theta = theta_from(k_train, k_cross, k_test, fp, b.as_ref());
    let d = fp.deltas();
    let w = [theta[0] / (1.0 + d[0]).powi(2), theta[1] / (1.0 + d[1]).powi(2)];
    let second = ratio * ratio / nh * quad(w, &tt.omega.omega, tt.b);
    Ok(TheoryPrediction {
        e_train: tt.e_train,
        e_test: first + second,
        omega: tt.omega.omega,
        theta_cos: theta[0],
        theta_sin: theta[1],
        det_omega_inv: tt.omega.det_omega_inv,
    })
}

/// Asymptotic test error.
pub fn test_mse_theory(
    k_train: &KernelPair,
    k_cross: &KernelPair,
    k_test: &KernelPair,
    y: &[f64],
    y_hat: &[f64],
    fp: &FixedPointSolution,
) -> Result<f64> {
    Ok(predict(k_train, k_cross, k_test, y, y_hat, fp)?.e_test)
}

/// Deterministic equivalent of `E[Q A Q]`.
pub fn eqaq_equivalent(k: &KernelPair, a: MatRef<'_, f64>, fp: &FixedPointSolution) -> Result<Mat<f64>> {
    let n = check_solution(k, fp)?;
    if a.nrows() != n || a.ncols() != n || !is_symmetric(a, 1e-12 * (1.0 + max_abs(a))) {
        return Err(Error::Shape(format!("A must be a symmetric {n}x{n} matrix")));
    }
    let p = qk_products(k, fp);
    let om = omega_from_products(fp, &p)?;
    let qaq = &fp.q_bar * a * &fp.q_bar;
    let d = fp.deltas();
    let nf = n as f64;
    let mut t = [0.0; 2];
    let mut qkq = Vec::with_capacity(2);
    for s in 0..2 {
        t[s] = frobenius_dot(qaq.as_ref(), k.component(s)) / nf / (1.0 + d[s]).powi(2);
        qkq.push(&p[s] * &fp.q_bar);
    }
    let ratio = fp.ratio();
    let c0 = ratio * (t[0] * om.omega[0][0] + t[1] * om.omega[1][0]);
    let c1 = ratio * (t[0] * om.omega[0][1] + t[1] * om.omega[1][1]);
    Ok(qaq + c0 * &qkq[0] + c1 * &qkq[1])
}

fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Spectral norm of `mean(Q) - Q_bar`, with `Q` the resolvent of independent
/// feature draws on `x`.
pub fn resolvent_gap(x: &DataMatrix, fp: &FixedPointSolution, trials: usize, seed: u64) -> Result<f64> {
    if x.n() != fp.n() {
        return Err(Error::Shape(format!("data has {} samples, solution has {}", x.n(), fp.n())));
    }
    if trials < 10 {
        return Err(Error::Domain(format!("at least 10 trials are required, got {trials}")));
    }
    let n = x.n();
    let mut mean = Mat::<f64>::zeros(n, n);
    for t in 0..trials {
        let fm = sample_features_with(x, None, fp.n_features, &mut crate::rng::for_trial(seed, t as u64))?;
        let q = resolvent(&fm, fp.lambda)?;
        mean += q;
    }
    mean *= faer::Scale(1.0 / trials as f64);
    let gap = mean - &fp.q_bar;
    sym_operator_norm(gap.as_ref())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Lambda,
    Features,
}

/// A consecutive grid pair along which a delta did not strictly decrease.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub axis: Axis,
    /// Index of the left grid point of the pair.
    pub index: usize,
    /// 0 for cosine, 1 for sine.
    pub component: usize,
    pub difference: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonotonicityReport {
    pub lambda_deltas: Vec<[f64; 2]>,
    pub feature_deltas: Vec<[f64; 2]>,
    /// Sign of each finite difference (`-1`, `0`, `+1`) per component.
    pub lambda_signs: Vec<[i8; 2]>,
    pub feature_signs: Vec<[i8; 2]>,
    pub violations: Vec<Violation>,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }
}

fn signs(axis: Axis, values: &[[f64; 2]], out: &mut Vec<[i8; 2]>, violations: &mut Vec<Violation>, active: [bool; 2]) {
    for (index, w) in values.windows(2).enumerate() {
        let mut s = [0i8; 2];
        for c in 0..2 {
            let diff = w[1][c] - w[0][c];
            s[c] = if diff < 0.0 { -1 } else if diff > 0.0 { 1 } else { 0 };
            if active[c] && s[c] >= 0 {
                violations.push(Violation { axis, index, component: c, difference: diff });
            }
        }
        out.push(s);
    }
}

/// Finite-difference signs of both deltas along a `lambda` grid (at
/// `n_features`) and along a feature-count grid (at `lambda`).
pub fn delta_derivative_signs(
    k: &KernelPair,
    n_features: usize,
    lambda: f64,
    lambda_grid: &[f64],
    feature_grid: &[usize],
    opts: &SolverOptions,
) -> Result<MonotonicityReport> {
    let mut report = MonotonicityReport::default();
    if lambda_grid.len() > 1 {
        for &l in lambda_grid {
            report.lambda_deltas.push(solve_delta(k, n_features, l, opts)?.deltas());
        }
    }
    if feature_grid.len() > 1 {
        for &nf in feature_grid {
            report.feature_deltas.push(solve_delta(k, nf, lambda, opts)?.deltas());
        }
    }
    // A component with an identically zero kernel has delta == 0 everywhere.
    let active = [trace(k.k_cos()) > 0.0, trace(k.k_sin()) > 0.0];
    signs(Axis::Lambda, &report.lambda_deltas, &mut report.lambda_signs, &mut report.violations, active);
    signs(Axis::Features, &report.feature_deltas, &mut report.feature_signs, &mut report.violations, active);
    Ok(report)
}
