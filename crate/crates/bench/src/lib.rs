//! Shared fixtures for the benchmarks.

use rffdeq::{gaussian_mixture, normalize_joint, DataMatrix, MixtureSpec};

/// Normalized train and test sets from the two-class mixture.
pub fn fixture(p: usize, n: usize, n_hat: usize, seed: u64) -> (DataMatrix, DataMatrix) {
    let spec = MixtureSpec::new(p);
    let train = gaussian_mixture(&spec, n, seed).expect("mixture");
    let test = gaussian_mixture(&spec, n_hat, seed + 1).expect("mixture");
    normalize_joint(&train, &test).expect("normalize")
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_is_normalized() {
        let (a, b) = super::fixture(20, 30, 10, 1);
        let pooled = (30.0 * a.mean_sq_norm() + 10.0 * b.mean_sq_norm()) / 40.0;
        assert!((pooled - 1.0).abs() < 1e-12);
    }
}
