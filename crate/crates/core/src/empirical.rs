//! Random Fourier feature ridge regression, simulated directly.

use faer::{Mat, MatRef};
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{add_diagonal, mat_vec, spd_inverse, spd_solve, symmetrize_in_place};
use crate::rng::{self, Rng};

/// One draw of `W` together with the feature blocks `[cos(WX); sin(WX)]`.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    pub w: Mat<f64>,
    pub sigma_train: Mat<f64>,
    pub sigma_test: Option<Mat<f64>>,
}

impl FeatureMap {
    pub fn n_features(&self) -> usize {
        self.w.nrows()
    }

    pub fn n(&self) -> usize {
        self.sigma_train.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloResult {
    pub mean_train: f64,
    pub mean_test: f64,
    pub std_train: f64,
    pub std_test: f64,
    pub trials: usize,
}

fn features(w: &Mat<f64>, x: MatRef<'_, f64>) -> Mat<f64> {
    let wx = w * x;
    let n_features = w.nrows();
    Mat::from_fn(2 * n_features, x.ncols(), |i, j| {
        if i < n_features {
            wx[(i, j)].cos()
        } else {
            wx[(i - n_features, j)].sin()
        }
    })
}

pub fn sample_features_with(
    x: &DataMatrix,
    x_hat: Option<&DataMatrix>,
    n_features: usize,
    rng: &mut Rng,
) -> Result<FeatureMap> {
    if let Some(t) = x_hat {
        if t.p() != x.p() {
            return Err(Error::Shape(format!("train dimension {} versus test dimension {}", x.p(), t.p())));
        }
    }
    let p = x.p();
    let mut w = Mat::zeros(n_features, p);
    for j in 0..p {
        for i in 0..n_features {
            w[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let sigma_train = features(&w, x.x().as_ref());
    let sigma_test = x_hat.map(|t| features(&w, t.x().as_ref()));
    Ok(FeatureMap { w, sigma_train, sigma_test })
}

/// Draws `W` with i.i.d. standard normal entries once and maps both datasets.
pub fn sample_features(x: &DataMatrix, x_hat: Option<&DataMatrix>, n_features: usize, seed: u64) -> Result<FeatureMap> {
    sample_features_with(x, x_hat, n_features, &mut rng::from_seed(seed))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

fn check_targets(fm: &FeatureMap, y: &[f64]) -> Result<()> {
    if y.len() != fm.n() {
        return Err(Error::Shape(format!("{} targets for {} samples", y.len(), fm.n())));
    }
    Ok(())
}

/// `(1/n) S^T S` for the training block.
fn gram(fm: &FeatureMap) -> Mat<f64> {
    let s = &fm.sigma_train;
    let mut g = s.transpose() * s;
    g *= faer::Scale(1.0 / fm.n() as f64);
    symmetrize_in_place(&mut g);
    g
}

/// `beta = S (S^T S / n + lambda I)^-1 y / n`.
pub fn ridge_dual(fm: &FeatureMap, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_targets(fm, y)?;
    let a = add_diagonal(gram(fm).as_ref(), lambda);
    let alpha = spd_solve(a.as_ref(), y, "dual ridge system")?;
    let n = fm.n() as f64;
    Ok(mat_vec(fm.sigma_train.as_ref(), &alpha).into_iter().map(|v| v / n).collect())
}

/// `beta = (S S^T / n + lambda I)^-1 S y / n`.
pub fn ridge_primal(fm: &FeatureMap, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    check_targets(fm, y)?;
    let s = &fm.sigma_train;
    let n = fm.n() as f64;
    let mut h = s * s.transpose();
    h *= faer::Scale(1.0 / n);
    symmetrize_in_place(&mut h);
    let a = add_diagonal(h.as_ref(), lambda);
    let sy: Vec<f64> = mat_vec(s.as_ref(), y).into_iter().map(|v| v / n).collect();
    spd_solve(a.as_ref(), &sy, "primal ridge system")
}

/// Ridge coefficients through the smaller of the two linear systems; the
/// dual form is used on the boundary `2N == n`.
pub fn ridge_regressor(fm: &FeatureMap, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if 2 * fm.n_features() >= fm.n() {
        ridge_dual(fm, y, lambda)
    } else {
        ridge_primal(fm, y, lambda)
    }
}

fn mse(sigma: MatRef<'_, f64>, beta: &[f64], y: &[f64]) -> f64 {
    let pred = mat_vec(sigma.transpose(), beta);
    pred.iter().zip(y).map(|(p, t)| (t - p).powi(2)).sum::<f64>() / y.len() as f64
}

/// `(E_train, E_test)`; the feature map must carry a test block.
pub fn empirical_mse(fm: &FeatureMap, beta: &[f64], y: &[f64], y_hat: &[f64]) -> Result<(f64, f64)> {
    check_targets(fm, y)?;
    if beta.len() != 2 * fm.n_features() {
        return Err(Error::Shape(format!("{} coefficients for {} features", beta.len(), 2 * fm.n_features())));
    }
    let test = fm
        .sigma_test
        .as_ref()
        .ok_or_else(|| Error::Shape("feature map has no test block".into()))?;
    if y_hat.len() != test.ncols() {
        return Err(Error::Shape(format!("{} test targets for {} test samples", y_hat.len(), test.ncols())));
    }
    Ok((mse(fm.sigma_train.as_ref(), beta, y), mse(test.as_ref(), beta, y_hat)))
}

/// `Q = (S^T S / n + lambda I)^-1`.
pub fn resolvent(fm: &FeatureMap, lambda: f64) -> Result<Mat<f64>> {
    check_lambda(lambda)?;
    let a = add_diagonal(gram(fm).as_ref(), lambda);
    spd_inverse(a.as_ref(), "feature Gram matrix")
}

/// Train and test errors of one feature draw for every `lambda`, sharing the
/// Gram matrix across the grid.
fn trial_errors(fm: &FeatureMap, y: &[f64], y_hat: &[f64], lambdas: &[f64]) -> Result<Vec<(f64, f64)>> {
    let test = fm.sigma_test.as_ref().expect("test block");
    let n = fm.n() as f64;
    let s = &fm.sigma_train;
    let mut out = Vec::with_capacity(lambdas.len());
    if 2 * fm.n_features() >= fm.n() {
        let g = gram(fm);
        let cross = if test.shape() == s.shape() && test == s {
            g.clone()
        } else {
            let mut c = test.transpose() * s;
            c *= faer::Scale(1.0 / n);
            c
        };
        let err = |m: &Mat<f64>, alpha: &[f64], t: &[f64]| {
            let pred = mat_vec(m.as_ref(), alpha);
            pred.iter().zip(t).map(|(p, v)| (v - p).powi(2)).sum::<f64>() / t.len() as f64
        };
        for &l in lambdas {
            let a = add_diagonal(g.as_ref(), l);
            let alpha = spd_solve(a.as_ref(), y, "dual ridge system")?;
            out.push((err(&g, &alpha, y), err(&cross, &alpha, y_hat)));
        }
    } else {
        let mut h = s * s.transpose();
        h *= faer::Scale(1.0 / n);
        symmetrize_in_place(&mut h);
        let sy: Vec<f64> = mat_vec(s.as_ref(), y).into_iter().map(|v| v / n).collect();
        for &l in lambdas {
            let a = add_diagonal(h.as_ref(), l);
            let beta = spd_solve(a.as_ref(), &sy, "primal ridge system")?;
            out.push((mse(s.as_ref(), &beta, y), mse(test.as_ref(), &beta, y_hat)));
        }
    }
    Ok(out)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let t = values.len() as f64;
    let mean = values.iter().sum::<f64>() / t;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
    (mean, var.sqrt())
}

/// Monte-Carlo train/test errors for each `lambda` in the grid. Trial `t`
/// draws its features from [`rng::for_trial`]`(seed, t)`.
pub fn monte_carlo_lambda_grid(
    x: &DataMatrix,
    x_hat: &DataMatrix,
    n_features: usize,
    lambdas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<MonteCarloResult>> {
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    for &l in lambdas {
        check_lambda(l)?;
    }
    let per_trial: Vec<Vec<(f64, f64)>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let fm = sample_features_with(x, Some(x_hat), n_features, &mut rng::for_trial(seed, t as u64))?;
            trial_errors(&fm, x.y(), x_hat.y(), lambdas)
        })
        .collect::<Result<_>>()?;
    Ok((0..lambdas.len())
        .map(|li| {
            let train: Vec<f64> = per_trial.iter().map(|r| r[li].0).collect();
            let test: Vec<f64> = per_trial.iter().map(|r| r[li].1).collect();
            let (mean_train, std_train) = mean_std(&train);
            let (mean_test, std_test) = mean_std(&test);
            MonteCarloResult { mean_train, mean_test, std_train, std_test, trials }
        })
        .collect())
}

pub fn monte_carlo(
    x: &DataMatrix,
    x_hat: &DataMatrix,
    n_features: usize,
    lambda: f64,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloResult> {
    Ok(monte_carlo_lambda_grid(x, x_hat, n_features, &[lambda], trials, seed)?[0])
}
