//! Parameter sweeps comparing the closed-form predictions with simulation,
//! and their CSV serialization.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::data::{gaussian_mixture, load_idx, make_binary_split, noisy_copy, normalize_joint, DataMatrix, MixtureSpec, SplitSpec};
use crate::empirical::monte_carlo_lambda_grid;
use crate::error::{Error, Result};
use crate::kernels::{kernel_components, KernelPair};
use crate::theory::{omega, predict, solve_delta, solve_gamma, Regime, SolverOptions};

pub const CSV_HEADER: [&str; 17] = [
    "n",
    "p",
    "N",
    "lambda",
    "delta_cos",
    "delta_sin",
    "gamma_cos",
    "gamma_sin",
    "det_omega_inv",
    "e_train_theory",
    "e_test_theory",
    "e_train_emp",
    "e_train_std",
    "e_test_emp",
    "e_test_std",
    "trials",
    "error",
];

/// Stand-in for "ridgeless" in sweeps.
pub const RIDGELESS_LAMBDA: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Idx { images: PathBuf, labels: PathBuf, classes: (u8, u8) },
    /// Two-class Gaussian mixture of dimension `spec.p`.
    Synthetic(MixtureSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n_features: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub dataset: DatasetSource,
    pub n: usize,
    pub n_hat: usize,
    /// Cells in output order.
    pub grid: Vec<Cell>,
    pub trials: usize,
    /// When set, the test set is a noisy copy of the training set.
    pub sigma2: Option<f64>,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("grid must contain at least one cell".into()));
        }
        if let Some(c) = self.grid.iter().find(|c| !(c.lambda > 0.0)) {
            return Err(Error::Config(format!("lambda must be positive, got {}", c.lambda)));
        }
        if self.n < 2 || (self.sigma2.is_none() && self.n_hat < 2) {
            return Err(Error::Config("n and n_hat must be at least 2".into()));
        }
        if let Some(s) = self.sigma2 {
            if !(s >= 0.0) {
                return Err(Error::Config(format!("sigma2 must be nonnegative, got {s}")));
            }
        }
        Ok(())
    }
}

/// Cartesian product in row-major order: all `lambdas` for the first feature
/// count, then the next.
pub fn grid(features: &[usize], lambdas: &[f64]) -> Vec<Cell> {
    features
        .iter()
        .flat_map(|&n_features| lambdas.iter().map(move |&lambda| Cell { n_features, lambda }))
        .collect()
}

/// `N = round(ratio * n)` for each ratio.
pub fn features_from_ratios(ratios: &[f64], n: usize) -> Vec<usize> {
    ratios.iter().map(|r| (r * n as f64).round() as usize).collect()
}

/// `N/n` grid of the double-descent sweep: 0.05 to 1 in steps of 0.05, then
/// 1.5 to 5 in steps of 0.5.
pub fn double_descent_ratios() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).chain((3..=10).map(|i| i as f64 * 0.5)).collect()
}

/// `count` log-spaced points from `start` to `stop` inclusive.
pub fn log_space(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    let (a, b) = (start.ln(), stop.ln());
    let mut out: Vec<f64> = (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect();
    out[0] = start;
    out[count - 1] = stop;
    out
}

/// Normalized train and test sets for a sweep.
pub fn load_dataset(config: &SweepConfig) -> Result<(DataMatrix, DataMatrix)> {
    let n_hat = if config.sigma2.is_some() { 2 } else { config.n_hat };
    let (train, test) = match &config.dataset {
        DatasetSource::Idx { images, labels, classes } => {
            let raw = load_idx(images, labels)?;
            let spec = SplitSpec { class_a: classes.0, class_b: classes.1, n_train: config.n, n_test: n_hat, seed: config.seed };
            make_binary_split(&raw, &spec)?
        }
        DatasetSource::Synthetic(spec) => (
            gaussian_mixture(spec, config.n, config.seed)?,
            gaussian_mixture(spec, n_hat, config.seed ^ 0x7e57_7e57_7e57_7e57)?,
        ),
    };
    let (train, test) = normalize_joint(&train, &test)?;
    match config.sigma2 {
        Some(s) => {
            let noisy = noisy_copy(&train, s, config.seed.wrapping_add(1))?;
            Ok((train, noisy))
        }
        None => Ok((train, test)),
    }
}

/// One sweep cell. Optional fields are empty in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub n: usize,
    pub p: usize,
    pub n_features: usize,
    pub lambda: f64,
    pub delta_cos: Option<f64>,
    pub delta_sin: Option<f64>,
    pub gamma_cos: Option<f64>,
    pub gamma_sin: Option<f64>,
    pub det_omega_inv: Option<f64>,
    pub e_train_theory: Option<f64>,
    pub e_test_theory: Option<f64>,
    pub e_train_emp: Option<f64>,
    pub e_train_std: Option<f64>,
    pub e_test_emp: Option<f64>,
    pub e_test_std: Option<f64>,
    pub trials: usize,
    pub error: Option<String>,
}

impl ExperimentRecord {
    pub fn empty(n: usize, p: usize, n_features: usize, lambda: f64) -> Self {
        Self {
            n,
            p,
            n_features,
            lambda,
            delta_cos: None,
            delta_sin: None,
            gamma_cos: None,
            gamma_sin: None,
            det_omega_inv: None,
            e_train_theory: None,
            e_test_theory: None,
            e_train_emp: None,
            e_train_std: None,
            e_test_emp: None,
            e_test_std: None,
            trials: 0,
            error: None,
        }
    }

    fn push_error(&mut self, e: impl std::fmt::Display) {
        let msg = e.to_string();
        self.error = Some(match self.error.take() {
            Some(prev) => format!("{prev}; {msg}"),
            None => msg,
        });
    }

    fn fields(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        vec![
            self.n.to_string(),
            self.p.to_string(),
            self.n_features.to_string(),
            format_float(self.lambda),
            f(self.delta_cos),
            f(self.delta_sin),
            f(self.gamma_cos),
            f(self.gamma_sin),
            f(self.det_omega_inv),
            f(self.e_train_theory),
            f(self.e_test_theory),
            f(self.e_train_emp),
            f(self.e_train_std),
            f(self.e_test_emp),
            f(self.e_test_std),
            self.trials.to_string(),
            self.error.as_deref().map(sanitize).unwrap_or_default(),
        ]
    }

    fn from_fields(r: &csv::StringRecord) -> Result<Self> {
        if r.len() != CSV_HEADER.len() {
            return Err(Error::Format(format!("expected {} fields, found {}", CSV_HEADER.len(), r.len())));
        }
        let int = |i: usize| -> Result<usize> {
            r[i].parse().map_err(|_| Error::Format(format!("column {}: bad integer {:?}", CSV_HEADER[i], &r[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if r[i].is_empty() {
                return Ok(None);
            }
            r[i].parse()
                .map(Some)
                .map_err(|_| Error::Format(format!("column {}: bad number {:?}", CSV_HEADER[i], &r[i])))
        };
        Ok(Self {
            n: int(0)?,
            p: int(1)?,
            n_features: int(2)?,
            lambda: opt(3)?.ok_or_else(|| Error::Format("missing lambda".into()))?,
            delta_cos: opt(4)?,
            delta_sin: opt(5)?,
            gamma_cos: opt(6)?,
            gamma_sin: opt(7)?,
            det_omega_inv: opt(8)?,
            e_train_theory: opt(9)?,
            e_test_theory: opt(10)?,
            e_train_emp: opt(11)?,
            e_train_std: opt(12)?,
            e_test_emp: opt(13)?,
            e_test_std: opt(14)?,
            trials: int(15)?,
            error: if r[16].is_empty() { None } else { Some(r[16].to_string()) },
        })
    }
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c == ',' || c == '\n' || c == '\r' { ' ' } else { c }).collect()
}

pub fn write_csv_to<W: std::io::Write>(out: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_csv_to(&mut buf, records)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Format("unexpected CSV header".into()));
    }
    r.records().map(|rec| ExperimentRecord::from_fields(&rec?)).collect()
}

/// Kernel blocks for a train/test pair.
pub struct KernelSet {
    pub train: KernelPair,
    pub cross: KernelPair,
    pub test: KernelPair,
}

impl KernelSet {
    pub fn new(train: &DataMatrix, test: &DataMatrix) -> Result<Self> {
        Ok(Self {
            train: kernel_components(train, train)?,
            cross: kernel_components(test, train)?,
            test: kernel_components(test, test)?,
        })
    }
}

/// Theory fields of one cell; failures are written to the error column.
pub fn theory_record(
    kernels: &KernelSet,
    train: &DataMatrix,
    test: &DataMatrix,
    cell: Cell,
    opts: &SolverOptions,
) -> ExperimentRecord {
    let mut rec = ExperimentRecord::empty(train.n(), train.p(), cell.n_features, cell.lambda);
    let outcome = solve_delta(&kernels.train, cell.n_features, cell.lambda, opts).and_then(|fp| {
        rec.delta_cos = Some(fp.delta_cos);
        rec.delta_sin = Some(fp.delta_sin);
        predict(&kernels.train, &kernels.cross, &kernels.test, train.y(), test.y(), &fp)
    });
    match outcome {
        Ok(pred) => {
            rec.det_omega_inv = Some(pred.det_omega_inv);
            rec.e_train_theory = Some(pred.e_train);
            rec.e_test_theory = Some(pred.e_test);
        }
        Err(e) => rec.push_error(e),
    }
    rec
}

/// Runs the sweep on already loaded data. Monte-Carlo trials are shared by
/// all cells with the same feature count.
pub fn run_sweep_on(
    train: &DataMatrix,
    test: &DataMatrix,
    cells: &[Cell],
    trials: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<ExperimentRecord>> {
    let kernels = KernelSet::new(train, test)?;
    let mut records: Vec<ExperimentRecord> =
        cells.iter().map(|&c| theory_record(&kernels, train, test, c, opts)).collect();
    if trials > 0 {
        let mut by_features: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, c) in cells.iter().enumerate() {
            by_features.entry(c.n_features).or_default().push(i);
        }
        for (n_features, idx) in by_features {
            let lambdas: Vec<f64> = idx.iter().map(|&i| cells[i].lambda).collect();
            match monte_carlo_lambda_grid(train, test, n_features, &lambdas, trials, seed) {
                Ok(results) => {
                    for (&i, mc) in idx.iter().zip(results) {
                        let r = &mut records[i];
                        r.trials = trials;
                        r.e_train_emp = Some(mc.mean_train);
                        r.e_train_std = Some(mc.std_train);
                        r.e_test_emp = Some(mc.mean_test);
                        r.e_test_std = Some(mc.std_test);
                    }
                }
                Err(e) => {
                    for &i in &idx {
                        records[i].push_error(&e);
                    }
                }
            }
        }
    }
    Ok(records)
}

/// Loads the configured dataset, evaluates every cell and writes the CSV when
/// an output path is set. Per-cell failures do not abort the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    run_sweep_with(config, &SolverOptions::default())
}

pub fn run_sweep_with(config: &SweepConfig, opts: &SolverOptions) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let (train, test) = load_dataset(config)?;
    let records = run_sweep_on(&train, &test, &config.grid, config.trials, config.seed, opts)?;
    if let Some(path) = &config.output_path {
        write_csv(path, &records)?;
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub argmin: f64,
    pub value: f64,
    /// The minimizer is the first or last grid point.
    pub boundary: bool,
    /// Every evaluated point, including refinement points, in evaluation order.
    pub evaluated: Vec<(f64, f64)>,
}

/// Minimizes `f` over a log-spaced grid, then compares the best point with
/// the geometric midpoints to its neighbours. Points where `f` fails are
/// skipped with a warning.
pub fn minimize_on_log_grid(grid: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<GridMinimum> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] > 0.0 && w[1] > w[0])) {
        return Err(Error::Config("grid must be positive and strictly increasing with at least 2 points".into()));
    }
    let mut evaluated = Vec::new();
    let mut values = Vec::with_capacity(grid.len());
    for &x in grid {
        match f(x) {
            Ok(v) if v.is_finite() => {
                values.push(Some(v));
                evaluated.push((x, v));
            }
            Ok(v) => {
                warn!("skipping grid point {x:e}: value {v}");
                values.push(None);
            }
            Err(e) => {
                warn!("skipping grid point {x:e}: {e}");
                values.push(None);
            }
        }
    }
    let best = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::Convergence { iterations: grid.len(), residual: f64::NAN })?;
    let (i, mut value) = best;
    let mut argmin = grid[i];
    let boundary = i == 0 || i == grid.len() - 1;
    if !boundary {
        for j in [i - 1, i + 1] {
            let mid = (grid[i] * grid[j]).sqrt();
            if let Ok(v) = f(mid) {
                if v.is_finite() {
                    evaluated.push((mid, v));
                    if v < value {
                        value = v;
                        argmin = mid;
                    }
                }
            }
        }
    }
    Ok(GridMinimum { argmin, value, boundary, evaluated })
}

/// The `lambda` minimizing the predicted test error at fixed `N`.
pub fn find_lambda_opt(
    kernels: &KernelSet,
    y: &[f64],
    y_hat: &[f64],
    n_features: usize,
    lambdas: &[f64],
    opts: &SolverOptions,
) -> Result<GridMinimum> {
    if lambdas.len() < 10 {
        return Err(Error::Config(format!("lambda range needs at least 10 points, got {}", lambdas.len())));
    }
    minimize_on_log_grid(lambdas, |l| {
        let fp = solve_delta(&kernels.train, n_features, l, opts)?;
        Ok(predict(&kernels.train, &kernels.cross, &kernels.test, y, y_hat, &fp)?.e_test)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityRecord {
    pub sigma2: f64,
    pub e_train: f64,
    pub e_test: f64,
    pub e_train_std: f64,
    pub e_test_std: f64,
    /// `e_test > 2 e_train`
    pub diverged: bool,
}

impl SimilarityRecord {
    pub fn ratio(&self) -> f64 {
        self.e_test / self.e_train
    }
}

/// Empirical train and test errors when the test set is `X + sigma E` for each
/// noise level, at the interpolation threshold `2N = n`. The same feature
/// draws are used for every noise level.
pub fn similarity_threshold_experiment(
    x: &DataMatrix,
    n_features: usize,
    lambda: f64,
    sigma2_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SimilarityRecord>> {
    if 2 * n_features != x.n() {
        return Err(Error::Config(format!(
            "the similarity experiment runs at 2N = n, got N = {n_features}, n = {}",
            x.n()
        )));
    }
    sigma2_grid
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let x_hat = noisy_copy(x, s, seed.wrapping_add(1 + i as u64))?;
            let mc = monte_carlo_lambda_grid(x, &x_hat, n_features, &[lambda], trials, seed)?[0];
            Ok(SimilarityRecord {
                sigma2: s,
                e_train: mc.mean_train,
                e_test: mc.mean_test,
                e_train_std: mc.std_train,
                e_test_std: mc.std_test,
                diverged: mc.mean_test > 2.0 * mc.mean_train,
            })
        })
        .collect()
}

/// Deltas and `det(Omega^-1)` for every `(N, lambda)`; with `ridgeless` the
/// gamma variables of each `N` are added, except on `2N = n` where they are
/// skipped and the cell is flagged.
pub fn phase_report(
    k: &KernelPair,
    p: usize,
    feature_grid: &[usize],
    lambdas: &[f64],
    ridgeless: bool,
    opts: &SolverOptions,
) -> Result<Vec<ExperimentRecord>> {
    let n = k.nrows();
    let mut out = Vec::with_capacity(feature_grid.len() * lambdas.len());
    for &nf in feature_grid {
        let gamma = if ridgeless {
            Some(match Regime::of(nf, n) {
                None => Err(Error::PhaseBoundary { n }),
                Some(_) => solve_gamma(k, nf, opts),
            })
        } else {
            None
        };
        for &l in lambdas {
            let mut rec = ExperimentRecord::empty(n, p, nf, l);
            match solve_delta(k, nf, l, opts) {
                Ok(fp) => {
                    rec.delta_cos = Some(fp.delta_cos);
                    rec.delta_sin = Some(fp.delta_sin);
                    match omega(k, &fp) {
                        Ok(om) => rec.det_omega_inv = Some(om.det_omega_inv),
                        Err(e) => rec.push_error(e),
                    }
                }
                Err(e) => rec.push_error(e),
            }
            match &gamma {
                Some(Ok(g)) => {
                    rec.gamma_cos = Some(g.gamma_cos);
                    rec.gamma_sin = Some(g.gamma_sin);
                }
                Some(Err(Error::PhaseBoundary { .. })) => rec.push_error("gamma skipped at 2N = n"),
                Some(Err(e)) => rec.push_error(format!("gamma: {e}")),
                None => {}
            }
            out.push(rec);
        }
    }
    Ok(out)
}

/// Human-readable one-line summary of a record.
pub fn describe(r: &ExperimentRecord) -> String {
    let mut s = format!("N={} lambda={:e}", r.n_features, r.lambda);
    let mut add = |name: &str, v: Option<f64>| {
        if let Some(v) = v {
            let _ = write!(s, " {name}={v:.6e}");
        }
    };
    add("delta_cos", r.delta_cos);
    add("delta_sin", r.delta_sin);
    add("e_train_theory", r.e_train_theory);
    add("e_test_theory", r.e_test_theory);
    add("e_train_emp", r.e_train_emp);
    add("e_test_emp", r.e_test_emp);
    if let Some(e) = &r.error {
        let _ = write!(s, " error={e}");
    }
    s
}
