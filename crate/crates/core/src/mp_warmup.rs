//! Sample covariance of white Gaussian data: Marchenko-Pastur law, its
//! Stieltjes transform and Monte-Carlo checks against both.

use std::f64::consts::PI;

use faer::Mat;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{add_diagonal, spd_solve, sym_eigenvalues, symmetrize_in_place};
use crate::rng::{self, Rng};

/// Columns generated per block while accumulating `X X^T`.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpParams {
    pub c: f64,
    pub lambda: f64,
}

impl MpParams {
    pub fn new(c: f64, lambda: f64) -> Result<Self> {
        if !(c > 0.0) || !(lambda > 0.0) {
            return Err(Error::Domain(format!("need c > 0 and lambda > 0, got c = {c}, lambda = {lambda}")));
        }
        Ok(Self { c, lambda })
    }

    pub fn support(&self) -> (f64, f64) {
        mp_support(self.c)
    }
}

/// Edges `(1 -+ sqrt(c))^2` of the continuous part.
pub fn mp_support(c: f64) -> (f64, f64) {
    let s = c.sqrt();
    ((1.0 - s).powi(2), (1.0 + s).powi(2))
}

/// Weight of the point mass at zero, present when `c > 1`.
pub fn mp_atom(c: f64) -> f64 {
    if c > 1.0 {
        1.0 - 1.0 / c
    } else {
        0.0
    }
}

/// Continuous part of the Marchenko-Pastur density with ratio `c = p/n`.
pub fn mp_density(x: f64, c: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("density is evaluated at x > 0, got {x}")));
    }
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    let (lo, hi) = mp_support(c);
    let v = (x - lo).max(0.0) * (hi - x).max(0.0);
    Ok(v.sqrt() / (2.0 * PI * c * x))
}

/// Positive root of `c lambda m^2 + (1 + lambda - c) m - 1 = 0`, computed
/// without cancellation on either sign of the linear coefficient.
pub fn mp_stieltjes(lambda: f64, c: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("c must be nonnegative, got {c}")));
    }
    let b = 1.0 + lambda - c;
    let disc = (b * b + 4.0 * c * lambda).sqrt();
    Ok(if b > 0.0 { 2.0 / (b + disc) } else { (disc - b) / (2.0 * c * lambda) })
}

/// Residual of the defining quadratic at `m`, relative to the magnitude of
/// its terms so that it is meaningful when `m` is large.
pub fn stieltjes_residual(lambda: f64, c: f64, m: f64) -> f64 {
    let terms = [c * lambda * m * m, (1.0 + lambda - c) * m, -1.0];
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    terms.iter().sum::<f64>().abs() / scale
}

/// `(1/n) X X^T` for `X` with `n` i.i.d. standard normal columns in `R^p`.
fn sample_covariance(n: usize, p: usize, rng: &mut Rng) -> Mat<f64> {
    let mut acc = Mat::<f64>::zeros(p, p);
    let mut done = 0;
    while done < n {
        let m = CHUNK.min(n - done);
        let mut block = Mat::<f64>::zeros(p, m);
        for j in 0..m {
            for i in 0..p {
                block[(i, j)] = rng.sample(StandardNormal);
            }
        }
        acc += &block * block.transpose();
        done += m;
    }
    acc *= faer::Scale(1.0 / n as f64);
    symmetrize_in_place(&mut acc);
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadForm {
    pub lambda: f64,
    /// Mean of `a^T (C_hat + lambda I)^-1 a` over trials.
    pub empirical: f64,
    /// Stieltjes transform `m(lambda)` at `c = p/n`.
    pub rmt: f64,
    /// `a^T (C + lambda I)^-1 a = 1 / (1 + lambda)`.
    pub population: f64,
}

fn check_unit(a: &[f64]) -> Result<()> {
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if a.is_empty() || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!("a must be a unit vector, has norm {norm}")));
    }
    Ok(())
}

/// Quadratic forms of the sample-covariance resolvent for several `lambda`,
/// reusing each covariance draw across the grid. The dimension is `a.len()`.
pub fn sample_cov_quadform_grid(a: &[f64], n: usize, lambdas: &[f64], trials: usize, seed: u64) -> Result<Vec<QuadForm>> {
    check_unit(a)?;
    if n == 0 || trials == 0 {
        return Err(Error::Domain("n and trials must be positive".into()));
    }
    let p = a.len();
    let c = p as f64 / n as f64;
    let mut sums = vec![0.0; lambdas.len()];
    for t in 0..trials {
        let cov = sample_covariance(n, p, &mut rng::for_trial(seed, t as u64));
        for (s, &l) in sums.iter_mut().zip(lambdas) {
            let m = add_diagonal(cov.as_ref(), l);
            let z = spd_solve(m.as_ref(), a, "regularized sample covariance")?;
            *s += a.iter().zip(&z).map(|(u, v)| u * v).sum::<f64>();
        }
    }
    lambdas
        .iter()
        .zip(&sums)
        .map(|(&l, &s)| {
            Ok(QuadForm { lambda: l, empirical: s / trials as f64, rmt: mp_stieltjes(l, c)?, population: 1.0 / (1.0 + l) })
        })
        .collect()
}

pub fn sample_cov_quadform(a: &[f64], n: usize, lambda: f64, trials: usize, seed: u64) -> Result<QuadForm> {
    Ok(sample_cov_quadform_grid(a, n, &[lambda], trials, seed)?[0])
}

/// Mean over trials of the spectral norm `|C_hat - I|`.
pub fn sample_cov_norm_gap(n: usize, p: usize, trials: usize, seed: u64) -> Result<f64> {
    if n == 0 || p == 0 || trials == 0 {
        return Err(Error::Domain("n, p and trials must be positive".into()));
    }
    let mut total = 0.0;
    for t in 0..trials {
        let cov = sample_covariance(n, p, &mut rng::for_trial(seed, t as u64));
        let eig = sym_eigenvalues(cov.as_ref())?;
        total += eig.iter().map(|e| (e - 1.0).abs()).fold(0.0, f64::max);
    }
    Ok(total / trials as f64)
}

/// Largest deviation `max((1 + sqrt c)^2 - 1, 1 - (1 - sqrt c)^2) = 2 sqrt(c) + c`.
pub fn mp_edge_deviation(c: f64) -> f64 {
    let (lo, hi) = mp_support(c);
    (hi - 1.0).max(1.0 - lo)
}

/// Normalized eigenvalue histogram of one sample covariance draw, paired with
/// the continuous density at the bin centers.
#[derive(Debug, Clone, PartialEq)]
pub struct EigHistogram {
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    /// Count divided by `p` times the bin width.
    pub density: Vec<f64>,
    pub mp: Vec<f64>,
    pub c: f64,
}

impl EigHistogram {
    pub fn mass(&self) -> f64 {
        self.density.iter().zip(self.edges.windows(2)).map(|(d, e)| d * (e[1] - e[0])).sum()
    }

    /// Largest absolute difference between histogram and density.
    pub fn sup_gap(&self) -> f64 {
        self.density.iter().zip(&self.mp).map(|(h, m)| (h - m).abs()).fold(0.0, f64::max)
    }

    /// Integrated absolute difference between histogram and density.
    pub fn l1_gap(&self) -> f64 {
        self.density
            .iter()
            .zip(&self.mp)
            .zip(self.edges.windows(2))
            .map(|((h, m), e)| (h - m).abs() * (e[1] - e[0]))
            .sum()
    }
}

pub fn eig_histogram(n: usize, p: usize, bins: usize, seed: u64) -> Result<EigHistogram> {
    if bins < 10 {
        return Err(Error::Domain(format!("need at least 10 bins, got {bins}")));
    }
    if n == 0 || p == 0 {
        return Err(Error::Domain("n and p must be positive".into()));
    }
    let c = p as f64 / n as f64;
    let cov = sample_covariance(n, p, &mut rng::from_seed(seed));
    let eig = sym_eigenvalues(cov.as_ref())?;
    let (slo, shi) = mp_support(c);
    let lo = eig[0].min(slo).max(0.0);
    let hi = eig[p - 1].max(shi);
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| lo + width * b as f64).collect();
    let mut counts = vec![0usize; bins];
    for &e in &eig {
        let b = (((e - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let centers: Vec<f64> = (0..bins).map(|b| lo + width * (b as f64 + 0.5)).collect();
    let density = counts.iter().map(|&k| k as f64 / (p as f64 * width)).collect();
    let mp = centers.iter().map(|&x| if x > 0.0 { mp_density(x, c) } else { Ok(0.0) }).collect::<Result<_>>()?;
    Ok(EigHistogram { edges, centers, density, mp, c })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite midpoint rule; never evaluates the endpoints.
    fn midpoint(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
        let h = (b - a) / m as f64;
        (0..m).map(|i| f(a + h * (i as f64 + 0.5))).sum::<f64>() * h
    }

    /// Integral of the density over its support after the substitution
    /// `x = mid + half sin(t)`, which removes the square-root endpoints.
    fn continuous_mass(c: f64) -> f64 {
        let (lo, hi) = mp_support(c);
        let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
        let g = |t: f64| {
            let x = mid + half * t.sin();
            if x <= 0.0 {
                0.0
            } else {
                mp_density(x, c).unwrap() * half * t.cos()
            }
        };
        midpoint(g, -PI / 2.0, PI / 2.0, 20_000)
    }

    #[test]
    fn support_length() {
        let (lo, hi) = mp_support(0.01);
        assert!((hi - lo - 0.4).abs() < 1e-15);
        assert_eq!(mp_density(0.5, 0.01).unwrap(), 0.0);
        assert_eq!(mp_density(1.5, 0.01).unwrap(), 0.0);
        assert!(mp_density(0.0, 0.5).is_err());
    }

    #[test]
    fn density_has_unit_mass() {
        for c in [0.01, 0.3, 1.0] {
            assert!((continuous_mass(c) - 1.0).abs() < 1e-6, "c = {c}");
        }
        for c in [2.0, 10.0] {
            assert!((continuous_mass(c) + mp_atom(c) - 1.0).abs() < 1e-6, "c = {c}");
        }
    }

    #[test]
    fn stieltjes_special_values() {
        assert!((mp_stieltjes(1.0, 1.0).unwrap() - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        for l in [1e-3, 0.5, 30.0] {
            assert!((mp_stieltjes(l, 0.0).unwrap() - 1.0 / (1.0 + l)).abs() < 1e-15);
        }
        assert!(mp_stieltjes(0.0, 1.0).is_err());
    }

    #[test]
    fn stieltjes_solves_quadratic_on_grid() {
        for i in 0..=16 {
            let l = 10f64.powf(-4.0 + 0.5 * i as f64);
            for j in 0..=10 {
                let c = 10f64.powf(-3.0 + 0.5 * j as f64);
                let m = mp_stieltjes(l, c).unwrap();
                assert!(m > 0.0);
                let r = stieltjes_residual(l, c, m);
                assert!(r < 1e-12, "lambda {l} c {c}: m {m} residual {r}");
            }
        }
    }

    #[test]
    fn large_lambda_all_agree() {
        let mut a = vec![0.0; 20];
        a[3] = 1.0;
        let q = sample_cov_quadform(&a, 40, 1e4, 3, 1).unwrap();
        for v in [q.empirical, q.rmt, q.population] {
            assert!((v * 1e4 - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn quadform_rejects_non_unit_vector() {
        assert!(sample_cov_quadform(&[1.0, 1.0], 10, 0.1, 1, 0).is_err());
    }

    #[test]
    fn norm_gap_vanishes_with_many_samples() {
        let gap = sample_cov_norm_gap(40_000, 4, 3, 2).unwrap();
        assert!(gap < 0.05, "{gap}");
    }

    #[test]
    fn chunked_covariance_matches_single_block() {
        let mut r1 = rng::from_seed(3);
        let cov = sample_covariance(CHUNK + 10, 3, &mut r1);
        let mut r2 = rng::from_seed(3);
        let mut x = Mat::<f64>::zeros(3, CHUNK + 10);
        for j in 0..CHUNK {
            for i in 0..3 {
                x[(i, j)] = r2.sample(StandardNormal);
            }
        }
        for j in CHUNK..CHUNK + 10 {
            for i in 0..3 {
                x[(i, j)] = r2.sample(StandardNormal);
            }
        }
        let direct = &x * x.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!((cov[(i, j)] - direct[(i, j)] / (CHUNK + 10) as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn histogram_is_normalized() {
        let h = eig_histogram(2000, 100, 30, 4).unwrap();
        assert!((h.mass() - 1.0).abs() < 1e-12);
        assert_eq!(h.centers.len(), 30);
        assert!(eig_histogram(100, 10, 5, 0).is_err());
    }

    #[test]
    fn histogram_tracks_density_at_hundredfold_samples() {
        let h = eig_histogram(51_200, 512, 60, 1).unwrap();
        assert!((h.mass() - 1.0).abs() < 1e-12);
        assert!(h.edges[0] >= 0.75 && h.edges[60] <= 1.25, "{:?}", (h.edges[0], h.edges[60]));
        let gap = h.l1_gap();
        assert!(gap < 0.15, "{gap}");
    }
}
