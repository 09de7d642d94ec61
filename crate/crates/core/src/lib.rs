//! Deterministic equivalents for random Fourier feature ridge regression.
//!
//! The crate computes large-dimensional predictions for the training and test
//! errors of ridge regression on random Fourier features and checks them
//! against direct simulation:
//!
//! * [`kernels`] builds the cosine and sine kernel blocks,
//! * [`theory`] solves the fixed-point equations and evaluates the closed-form
//!   errors,
//! * [`empirical`] draws features and fits the regressor,
//! * [`mp_warmup`] covers the sample-covariance special case,
//! * [`experiments`] runs parameter sweeps and writes CSV.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod empirical;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod linalg;
pub mod mp_warmup;
pub mod rng;
pub mod theory;

pub use data::{
    gaussian_mixture, load_idx, make_binary_split, noisy_copy, normalize_joint, synthetic_gaussian,
    write_idx, Covariance, DataMatrix, MixtureSpec, RawDataset, SplitSpec,
};
pub use empirical::{
    empirical_mse, monte_carlo, monte_carlo_lambda_grid, resolvent, ridge_regressor, sample_features,
    FeatureMap, MonteCarloResult,
};
pub use error::{Error, ErrorKind, Result};
pub use experiments::{
    find_lambda_opt, phase_report, run_sweep, similarity_threshold_experiment, ExperimentRecord,
    SweepConfig,
};
pub use kernels::{gaussian_kernel, kernel_components, KernelPair};
pub use mp_warmup::{
    eig_histogram, mp_density, mp_stieltjes, sample_cov_norm_gap, sample_cov_quadform, MpParams,
};
pub use theory::{
    delta_derivative_signs, eqaq_equivalent, omega, predict, resolvent_gap, solve_delta, solve_gamma,
    test_mse_theory, theta_sigma, train_mse_theory, FixedPointSolution, GammaSolution, Omega,
    Regime, SolverOptions, TheoryPrediction,
};

pub use faer::{self, Mat};
