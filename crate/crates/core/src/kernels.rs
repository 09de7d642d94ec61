//! Limiting kernels of the cosine and sine feature blocks.
//!
//! Both are computed from the pair of exponentials `exp(-|x - x'|^2 / 2)` and
//! `exp(-|x + x'|^2 / 2)`, which never overflow, instead of the equivalent
//! `exp(-(|x|^2 + |x'|^2) / 2) cosh(x.x')` form.

use faer::{Mat, MatRef};

use crate::data::{column_sq_norms, DataMatrix};
use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, symmetrize_in_place};

/// Tolerance used to accept a user-supplied pair as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KernelPair {
    k_cos: Mat<f64>,
    k_sin: Mat<f64>,
    symmetric: bool,
}

impl KernelPair {
    /// Wraps two matrices of equal shape. Square inputs that are symmetric to
    /// within [`SYMMETRY_TOLERANCE`] are marked symmetric and symmetrized.
    pub fn from_matrices(mut k_cos: Mat<f64>, mut k_sin: Mat<f64>) -> Result<Self> {
        if k_cos.shape() != k_sin.shape() {
            return Err(Error::Shape(format!(
                "cosine block is {:?}, sine block is {:?}",
                k_cos.shape(),
                k_sin.shape()
            )));
        }
        let symmetric = is_symmetric(k_cos.as_ref(), SYMMETRY_TOLERANCE)
            && is_symmetric(k_sin.as_ref(), SYMMETRY_TOLERANCE);
        if symmetric {
            symmetrize_in_place(&mut k_cos);
            symmetrize_in_place(&mut k_sin);
        }
        Ok(Self { k_cos, k_sin, symmetric })
    }

    pub fn k_cos(&self) -> MatRef<'_, f64> {
        self.k_cos.as_ref()
    }

    pub fn k_sin(&self) -> MatRef<'_, f64> {
        self.k_sin.as_ref()
    }

    /// Block by index: 0 is cosine, 1 is sine.
    pub fn component(&self, index: usize) -> MatRef<'_, f64> {
        match index {
            0 => self.k_cos.as_ref(),
            1 => self.k_sin.as_ref(),
            _ => panic!("kernel component index {index} out of range"),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn nrows(&self) -> usize {
        self.k_cos.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.k_cos.ncols()
    }

    /// Same pair with the cosine and sine roles exchanged.
    pub fn swapped(&self) -> Self {
        Self { k_cos: self.k_sin.clone(), k_sin: self.k_cos.clone(), symmetric: self.symmetric }
    }

    /// Entrywise `k_cos + k_sin`, the Gaussian kernel.
    pub fn sum(&self) -> Mat<f64> {
        &self.k_cos + &self.k_sin
    }

    pub(crate) fn require_square(&self, what: &str) -> Result<usize> {
        if !self.symmetric {
            return Err(Error::Shape(format!("{what} needs a symmetric kernel pair on one dataset")));
        }
        Ok(self.nrows())
    }
}

fn check_dims(x: &DataMatrix, x2: &DataMatrix) -> Result<()> {
    if x.p() != x2.p() {
        return Err(Error::Shape(format!("dimension {} versus {}", x.p(), x2.p())));
    }
    Ok(())
}

/// Rows index `x`, columns index `x2`: returns `(|x_i - x2_j|^2, |x_i + x2_j|^2)`.
fn squared_distances(x: &DataMatrix, x2: &DataMatrix) -> (Mat<f64>, Mat<f64>) {
    let gram = x.x().transpose() * x2.x();
    let a = column_sq_norms(x.x());
    let b = column_sq_norms(x2.x());
    let minus = Mat::from_fn(x.n(), x2.n(), |i, j| (a[i] + b[j] - 2.0 * gram[(i, j)]).max(0.0));
    let plus = Mat::from_fn(x.n(), x2.n(), |i, j| (a[i] + b[j] + 2.0 * gram[(i, j)]).max(0.0));
    (minus, plus)
}

fn same_dataset(x: &DataMatrix, x2: &DataMatrix) -> bool {
    std::ptr::eq(x, x2) || (x.x().shape() == x2.x().shape() && x.x() == x2.x())
}

/// Cosine and sine kernel blocks between the columns of `x` (rows) and `x2`
/// (columns). Passing the same dataset twice yields an exactly symmetric pair.
pub fn kernel_components(x: &DataMatrix, x2: &DataMatrix) -> Result<KernelPair> {
    check_dims(x, x2)?;
    let (minus, plus) = squared_distances(x, x2);
    let (m, n) = (x.n(), x2.n());
    let mut k_cos = Mat::zeros(m, n);
    let mut k_sin = Mat::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            let e_minus = (-0.5 * minus[(i, j)]).exp();
            let e_plus = (-0.5 * plus[(i, j)]).exp();
            k_cos[(i, j)] = 0.5 * (e_minus + e_plus);
            k_sin[(i, j)] = 0.5 * (e_minus - e_plus);
        }
    }
    let symmetric = same_dataset(x, x2);
    if symmetric {
        symmetrize_in_place(&mut k_cos);
        symmetrize_in_place(&mut k_sin);
    }
    Ok(KernelPair { k_cos, k_sin, symmetric })
}

/// `exp(-|x_i - x2_j|^2 / 2)`.
pub fn gaussian_kernel(x: &DataMatrix, x2: &DataMatrix) -> Result<Mat<f64>> {
    check_dims(x, x2)?;
    let (minus, _) = squared_distances(x, x2);
    let mut k = Mat::from_fn(x.n(), x2.n(), |i, j| (-0.5 * minus[(i, j)]).exp());
    if same_dataset(x, x2) {
        symmetrize_in_place(&mut k);
    }
    Ok(k)
}
