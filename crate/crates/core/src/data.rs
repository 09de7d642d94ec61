//! Datasets: IDX loading, binary class splits, joint normalization and the
//! synthetic generators used when no image files are available.

use std::fs;
use std::path::Path;

use faer::Mat;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Minimum Euclidean distance below which two columns count as duplicates.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Grayscale images and their labels, exactly as stored in IDX files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDataset {
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
}

impl RawDataset {
    pub fn new(images: Vec<u8>, labels: Vec<u8>, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols == 0 {
            return Err(Error::Format("image dimensions must be positive".into()));
        }
        if !images.len().is_multiple_of(rows * cols) {
            return Err(Error::Length(format!(
                "{} pixel bytes is not a multiple of {rows}x{cols}",
                images.len()
            )));
        }
        let count = images.len() / (rows * cols);
        if count != labels.len() {
            return Err(Error::Consistency(format!(
                "{count} images but {} labels",
                labels.len()
            )));
        }
        Ok(Self { images, labels, count, rows, cols })
    }

    pub fn pixels_per_image(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, index: usize) -> &[u8] {
        let d = self.pixels_per_image();
        &self.images[index * d..(index + 1) * d]
    }
}

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Length(format!("{what}: header truncated at byte {offset}")))
}

/// Parse an IDX image container. Returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = read_u32_be(bytes, 0, "images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "images: magic number {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(bytes, 4, "images")? as usize;
    let rows = read_u32_be(bytes, 8, "images")? as usize;
    let cols = read_u32_be(bytes, 12, "images")? as usize;
    let need = count * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < need {
        return Err(Error::Length(format!(
            "images: header announces {need} pixel bytes, file holds {}",
            payload.len()
        )));
    }
    Ok((count, rows, cols, payload[..need].to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32_be(bytes, 0, "labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "labels: magic number {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(bytes, 4, "labels")? as usize;
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Length(format!(
            "labels: header announces {count} labels, file holds {}",
            payload.len()
        )));
    }
    Ok(payload[..count].to_vec())
}

pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<RawDataset> {
    let (count, rows, cols, images) = parse_idx_images(&fs::read(image_path)?)?;
    let labels = parse_idx_labels(&fs::read(label_path)?)?;
    if labels.len() != count {
        return Err(Error::Consistency(format!(
            "{count} images but {} labels",
            labels.len()
        )));
    }
    RawDataset::new(images, labels, rows, cols)
}

pub fn encode_idx_images(raw: &RawDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + raw.images.len());
    for v in [IDX_IMAGES_MAGIC, raw.count as u32, raw.rows as u32, raw.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&raw.images);
    out
}

pub fn encode_idx_labels(raw: &RawDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + raw.labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(raw.count as u32).to_be_bytes());
    out.extend_from_slice(&raw.labels);
    out
}

pub fn write_idx(raw: &RawDataset, image_path: &Path, label_path: &Path) -> Result<()> {
    fs::write(image_path, encode_idx_images(raw))?;
    fs::write(label_path, encode_idx_labels(raw))?;
    Ok(())
}

/// Samples stored column-wise (`p x n`) with one real target per column.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    x: Mat<f64>,
    y: Vec<f64>,
}

impl DataMatrix {
    /// Rejects empty matrices, label-count mismatches and duplicated columns.
    pub fn new(x: Mat<f64>, y: Vec<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Shape("data matrix must be non-empty".into()));
        }
        if y.len() != x.ncols() {
            return Err(Error::Shape(format!(
                "{} samples but {} targets",
                x.ncols(),
                y.len()
            )));
        }
        if let Some((i, j)) = find_duplicate_columns(&x, DUPLICATE_TOLERANCE) {
            return Err(Error::DegenerateData(format!("columns {i} and {j} coincide")));
        }
        Ok(Self { x, y })
    }

    pub fn from_columns(columns: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != p) {
            return Err(Error::Shape("columns have different lengths".into()));
        }
        Self::new(Mat::from_fn(p, columns.len(), |i, j| columns[j][i]), y)
    }

    pub fn x(&self) -> &Mat<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn p(&self) -> usize {
        self.x.nrows()
    }

    pub fn n(&self) -> usize {
        self.x.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.p()).map(|i| self.x[(i, j)]).collect()
    }

    pub fn with_labels(self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::Shape(format!("{} samples but {} targets", self.n(), y.len())));
        }
        Ok(Self { x: self.x, y })
    }

    /// Mean squared column norm.
    pub fn mean_sq_norm(&self) -> f64 {
        column_sq_norms(&self.x).iter().sum::<f64>() / self.n() as f64
    }
}

pub(crate) fn column_sq_norms(x: &Mat<f64>) -> Vec<f64> {
    (0..x.ncols())
        .map(|j| (0..x.nrows()).map(|i| x[(i, j)] * x[(i, j)]).sum())
        .collect()
}

/// Finds a pair of columns closer than `tol`. Columns are sorted by their
/// projection on a fixed unit direction, so only neighbours within `tol` in
/// projection need an exact distance check.
fn find_duplicate_columns(x: &Mat<f64>, tol: f64) -> Option<(usize, usize)> {
    let (p, n) = (x.nrows(), x.ncols());
    let raw: Vec<f64> = (0..p).map(|k| 1.0 + ((k as f64 + 1.0) * 0.618_033_988_75).fract()).collect();
    let scale = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dir: Vec<f64> = raw.iter().map(|v| v / scale).collect();
    let mut proj: Vec<(f64, usize)> = (0..n)
        .map(|j| ((0..p).map(|i| dir[i] * x[(i, j)]).sum(), j))
        .collect();
    proj.sort_by(|a, b| a.0.total_cmp(&b.0));
    for a in 0..n {
        for b in (a + 1)..n {
            if proj[b].0 - proj[a].0 > tol {
                break;
            }
            let (i, j) = (proj[a].1, proj[b].1);
            let d2: f64 = (0..p).map(|k| (x[(k, i)] - x[(k, j)]).powi(2)).sum();
            if d2.sqrt() <= tol {
                return Some((i.min(j), i.max(j)));
            }
        }
    }
    None
}

/// Two-class selection from a labelled image set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub class_a: u8,
    pub class_b: u8,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

fn allocate(want: usize, avail_a: usize, avail_b: usize) -> (usize, usize) {
    let mut a = want.div_ceil(2).min(avail_a);
    let mut b = want - a;
    if b > avail_b {
        b = avail_b;
        a = want - b;
    }
    (a, b)
}

/// Draws disjoint train and test sets from two classes. Targets are `-1` for
/// `class_a` and `+1` for `class_b`; pixels are kept on their raw 0..255 scale.
pub fn make_binary_split(raw: &RawDataset, spec: &SplitSpec) -> Result<(DataMatrix, DataMatrix)> {
    if spec.n_train < 2 || spec.n_test < 2 {
        return Err(Error::Config("n_train and n_test must both be at least 2".into()));
    }
    if spec.class_a == spec.class_b {
        return Err(Error::Config("the two classes must differ".into()));
    }
    let mut idx_a: Vec<usize> = (0..raw.count).filter(|&i| raw.labels[i] == spec.class_a).collect();
    let mut idx_b: Vec<usize> = (0..raw.count).filter(|&i| raw.labels[i] == spec.class_b).collect();
    let total = spec.n_train + spec.n_test;
    if idx_a.len() + idx_b.len() < total {
        return Err(Error::Capacity(format!(
            "need {total} samples of classes {} and {}, found {}",
            spec.class_a,
            spec.class_b,
            idx_a.len() + idx_b.len()
        )));
    }
    let mut rng = rng::from_seed(spec.seed);
    idx_a.shuffle(&mut rng);
    idx_b.shuffle(&mut rng);

    let (ta, tb) = allocate(spec.n_train, idx_a.len(), idx_b.len());
    let (sa, sb) = allocate(spec.n_test, idx_a.len() - ta, idx_b.len() - tb);
    let build = |a: &[usize], b: &[usize]| -> Result<DataMatrix> {
        let picks: Vec<(usize, f64)> = a
            .iter()
            .map(|&i| (i, -1.0))
            .chain(b.iter().map(|&i| (i, 1.0)))
            .collect();
        let d = raw.pixels_per_image();
        let x = Mat::from_fn(d, picks.len(), |r, c| raw.image(picks[c].0)[r] as f64);
        DataMatrix::new(x, picks.iter().map(|p| p.1).collect())
    };
    let train = build(&idx_a[..ta], &idx_b[..tb])?;
    let test = build(&idx_a[ta..ta + sa], &idx_b[tb..tb + sb])?;
    Ok((train, test))
}

/// Joint centering and scaling: subtract the mean of the pooled columns, then
/// divide by the square root of the pooled mean squared norm.
pub fn normalize_joint(train: &DataMatrix, test: &DataMatrix) -> Result<(DataMatrix, DataMatrix)> {
    if train.p() != test.p() {
        return Err(Error::Shape(format!(
            "train has dimension {}, test has dimension {}",
            train.p(),
            test.p()
        )));
    }
    let p = train.p();
    let total = (train.n() + test.n()) as f64;
    let mean: Vec<f64> = (0..p)
        .map(|i| {
            let s: f64 = (0..train.n()).map(|j| train.x[(i, j)]).sum::<f64>()
                + (0..test.n()).map(|j| test.x[(i, j)]).sum::<f64>();
            s / total
        })
        .collect();
    let centered = |m: &DataMatrix| Mat::from_fn(p, m.n(), |i, j| m.x[(i, j)] - mean[i]);
    let (ct, cs) = (centered(train), centered(test));
    let tau = (column_sq_norms(&ct).iter().sum::<f64>() + column_sq_norms(&cs).iter().sum::<f64>()) / total;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::DegenerateData("pooled columns are all identical".into()));
    }
    let s = tau.sqrt().recip();
    let scale = |m: Mat<f64>, y: &[f64]| DataMatrix::new(Mat::from_fn(p, m.ncols(), |i, j| m[(i, j)] * s), y.to_vec());
    Ok((scale(ct, &train.y)?, scale(cs, &test.y)?))
}

/// Population covariance of the Gaussian generator.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Identity,
    /// Diagonal covariance with the given variances (length must equal `p`).
    Diagonal(Vec<f64>),
}

/// `n` i.i.d. zero-mean Gaussian columns. Targets are zero; attach labels with
/// [`DataMatrix::with_labels`].
pub fn synthetic_gaussian(n: usize, p: usize, covariance: &Covariance, seed: u64) -> Result<DataMatrix> {
    if n == 0 || p == 0 {
        return Err(Error::Shape("n and p must be positive".into()));
    }
    let sd: Vec<f64> = match covariance {
        Covariance::Identity => vec![1.0; p],
        Covariance::Diagonal(v) => {
            if v.len() != p || v.iter().any(|&s| !(s >= 0.0)) {
                return Err(Error::Shape(format!("need {p} nonnegative variances")));
            }
            v.iter().map(|s| s.sqrt()).collect()
        }
    };
    let mut rng = rng::from_seed(seed);
    let mut x = Mat::zeros(p, n);
    for j in 0..n {
        for i in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = sd[i] * z;
        }
    }
    DataMatrix::new(x, vec![0.0; n])
}

/// Two-class Gaussian mixture used as a stand-in for image data: class means
/// `-mu` and `+mu`, shared diagonal covariance with power-law spectrum
/// `k^-exponent` (trace one). `mu` is drawn from `structure_seed`, so train
/// and test sets generated with different sample seeds share it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSpec {
    pub p: usize,
    pub mean_norm2: f64,
    pub spectrum_exponent: f64,
    pub structure_seed: u64,
}

impl MixtureSpec {
    pub fn new(p: usize) -> Self {
        Self { p, mean_norm2: 0.09, spectrum_exponent: 1.0, structure_seed: 0x5eed_c1a5 }
    }

    pub fn variances(&self) -> Vec<f64> {
        let raw: Vec<f64> = (1..=self.p).map(|k| (k as f64).powf(-self.spectrum_exponent)).collect();
        let t: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / t).collect()
    }

    /// Mean direction, tilted toward high-variance coordinates so the classes
    /// overlap.
    pub fn mean(&self) -> Vec<f64> {
        let mut rng = rng::from_seed(self.structure_seed);
        let var = self.variances();
        let raw: Vec<f64> = var
            .iter()
            .map(|v| {
                let z: f64 = rng.sample(StandardNormal);
                z * v.sqrt()
            })
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        raw.iter().map(|v| v / norm * self.mean_norm2.sqrt()).collect()
    }
}

/// `n` samples, the first `ceil(n/2)` labelled `-1` and the rest `+1`.
pub fn gaussian_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<DataMatrix> {
    let p = spec.p;
    let mu = spec.mean();
    let sd: Vec<f64> = spec.variances().iter().map(|v| v.sqrt()).collect();
    let n_neg = n.div_ceil(2);
    let y: Vec<f64> = (0..n).map(|j| if j < n_neg { -1.0 } else { 1.0 }).collect();
    let mut rng = rng::from_seed(seed);
    let mut x = Mat::zeros(p, n);
    for j in 0..n {
        for i in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = y[j] * mu[i] + sd[i] * z;
        }
    }
    DataMatrix::new(x, y)
}

/// `X + sigma E` with `E_ij ~ N(0, 1/p)`; targets are copied.
pub fn noisy_copy(x: &DataMatrix, sigma2: f64, seed: u64) -> Result<DataMatrix> {
    if !(sigma2 >= 0.0) {
        return Err(Error::Domain(format!("noise variance must be nonnegative, got {sigma2}")));
    }
    if sigma2 == 0.0 {
        return Ok(x.clone());
    }
    let p = x.p();
    let s = (sigma2 / p as f64).sqrt();
    let mut rng = rng::from_seed(seed);
    let mut out = x.x.clone();
    for j in 0..x.n() {
        for i in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            out[(i, j)] += s * z;
        }
    }
    DataMatrix::new(out, x.y.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_fixture() -> (Vec<u8>, Vec<u8>) {
        // Three 2x2 images, written byte by byte.
        let images = vec![
            0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02,
            0, 1, 2, 3, 10, 20, 30, 40, 255, 254, 253, 252,
        ];
        let labels = vec![0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x03, 7, 3, 7];
        (images, labels)
    }

    #[test]
    fn parses_handwritten_idx_fixture() {
        let (img, lab) = idx_fixture();
        let (count, rows, cols, pixels) = parse_idx_images(&img).unwrap();
        assert_eq!((count, rows, cols), (3, 2, 2));
        assert_eq!(pixels, vec![0, 1, 2, 3, 10, 20, 30, 40, 255, 254, 253, 252]);
        assert_eq!(parse_idx_labels(&lab).unwrap(), vec![7, 3, 7]);
    }

    #[test]
    fn label_magic_on_image_file_is_format_error() {
        let (mut img, _) = idx_fixture();
        img[3] = 0x02;
        assert!(matches!(parse_idx_images(&img), Err(Error::Format(_))));
        let (_, mut lab) = idx_fixture();
        lab[3] = 0x02;
        assert!(matches!(parse_idx_labels(&lab), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_payload_is_length_error() {
        let (img, lab) = idx_fixture();
        assert!(matches!(parse_idx_images(&img[..img.len() - 1]), Err(Error::Length(_))));
        assert!(matches!(parse_idx_labels(&lab[..lab.len() - 1]), Err(Error::Length(_))));
        assert!(matches!(parse_idx_images(&img[..6]), Err(Error::Length(_))));
    }

    #[test]
    fn count_mismatch_is_consistency_error() {
        let dir = tempfile::tempdir().unwrap();
        let (img, _) = idx_fixture();
        let lab = vec![0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 7, 3];
        let (pi, pl) = (dir.path().join("i"), dir.path().join("l"));
        fs::write(&pi, img).unwrap();
        fs::write(&pl, lab).unwrap();
        assert!(matches!(load_idx(&pi, &pl), Err(Error::Consistency(_))));
    }

    fn class_fixture(per_class: usize) -> RawDataset {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..per_class {
            for (c, label) in [(0u8, 3u8), (1, 7)] {
                images.extend_from_slice(&[i as u8, c, (i * 3 % 256) as u8, 100 + c]);
                labels.push(label);
            }
        }
        RawDataset::new(images, labels, 2, 2).unwrap()
    }

    #[test]
    fn even_split_per_class() {
        let raw = class_fixture(3);
        let spec = SplitSpec { class_a: 3, class_b: 7, n_train: 4, n_test: 2, seed: 1 };
        let (train, test) = make_binary_split(&raw, &spec).unwrap();
        let count = |m: &DataMatrix, v: f64| m.y().iter().filter(|&&t| t == v).count();
        assert_eq!((count(&train, -1.0), count(&train, 1.0)), (2, 2));
        assert_eq!((count(&test, -1.0), count(&test, 1.0)), (1, 1));
        let cols = |m: &DataMatrix| (0..m.n()).map(|j| m.column(j)).collect::<Vec<_>>();
        let tr = cols(&train);
        assert!(cols(&test).iter().all(|c| !tr.contains(c)));
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let raw = class_fixture(50);
        let spec = SplitSpec { class_a: 3, class_b: 7, n_train: 20, n_test: 10, seed: 9 };
        let (a1, b1) = make_binary_split(&raw, &spec).unwrap();
        let (a2, b2) = make_binary_split(&raw, &spec).unwrap();
        assert_eq!(a1.x(), a2.x());
        assert_eq!(b1.x(), b2.x());
        let (a3, _) = make_binary_split(&raw, &SplitSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a1.x(), a3.x());
    }

    #[test]
    fn split_capacity_error() {
        let raw = class_fixture(3);
        let spec = SplitSpec { class_a: 3, class_b: 7, n_train: 5, n_test: 2, seed: 1 };
        assert!(matches!(make_binary_split(&raw, &spec), Err(Error::Capacity(_))));
    }

    #[test]
    fn split_rejects_bad_spec() {
        let raw = class_fixture(3);
        let spec = SplitSpec { class_a: 3, class_b: 3, n_train: 2, n_test: 2, seed: 1 };
        assert!(matches!(make_binary_split(&raw, &spec), Err(Error::Config(_))));
    }

    #[test]
    fn duplicate_columns_rejected() {
        let cols = vec![vec![1.0, 2.0], vec![0.5, 0.5], vec![1.0, 2.0]];
        assert!(matches!(DataMatrix::from_columns(&cols, vec![0.0; 3]), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn symmetric_pool_keeps_directions() {
        let v = vec![3.0, -4.0];
        let neg: Vec<f64> = v.iter().map(|a| -a).collect();
        let train = DataMatrix::from_columns(std::slice::from_ref(&v), vec![1.0]).unwrap();
        let test = DataMatrix::from_columns(&[neg], vec![-1.0]).unwrap();
        let (a, b) = normalize_joint(&train, &test).unwrap();
        assert!((a.column(0)[0] - 0.6).abs() < 1e-15 && (a.column(0)[1] + 0.8).abs() < 1e-15);
        assert!((b.column(0)[0] + 0.6).abs() < 1e-15);
        assert!((a.mean_sq_norm() + b.mean_sq_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_pool_is_degenerate() {
        let v = vec![1.0, 2.0, 3.0];
        let train = DataMatrix::from_columns(std::slice::from_ref(&v), vec![1.0]).unwrap();
        let test = DataMatrix::from_columns(&[v], vec![1.0]).unwrap();
        assert!(matches!(normalize_joint(&train, &test), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn normalization_matches_brute_force() {
        // Reference computed independently with plain loops over a flat pool.
        let train = synthetic_gaussian(5, 10, &Covariance::Identity, 3).unwrap();
        let test = synthetic_gaussian(3, 10, &Covariance::Identity, 4).unwrap();
        let (a, b) = normalize_joint(&train, &test).unwrap();
        let pool: Vec<Vec<f64>> = (0..5).map(|j| train.column(j)).chain((0..3).map(|j| test.column(j))).collect();
        let mut mean = vec![0.0; 10];
        for c in &pool {
            for i in 0..10 {
                mean[i] += c[i] / 8.0;
            }
        }
        let tau: f64 = pool.iter().map(|c| c.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).sum::<f64>()).sum::<f64>() / 8.0;
        let outs: Vec<Vec<f64>> = (0..5).map(|j| a.column(j)).chain((0..3).map(|j| b.column(j))).collect();
        for (c, o) in pool.iter().zip(&outs) {
            for i in 0..10 {
                assert!(((c[i] - mean[i]) / tau.sqrt() - o[i]).abs() < 1e-12);
            }
        }
        let pooled = (a.mean_sq_norm() * 5.0 + b.mean_sq_norm() * 3.0) / 8.0;
        assert!((pooled - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gaussian_sample_variances() {
        for cov in [Covariance::Identity, Covariance::Diagonal(vec![1.0, 2.0, 3.0, 4.0])] {
            let d = synthetic_gaussian(10_000, 4, &cov, 11).unwrap();
            for i in 0..4 {
                let target = match &cov {
                    Covariance::Identity => 1.0,
                    Covariance::Diagonal(v) => v[i],
                };
                let var = (0..d.n()).map(|j| d.x()[(i, j)].powi(2)).sum::<f64>() / d.n() as f64;
                assert!((var / target - 1.0).abs() < 0.05, "coordinate {i}: {var} vs {target}");
            }
        }
    }

    #[test]
    fn gaussian_reproducible() {
        let a = synthetic_gaussian(20, 3, &Covariance::Identity, 5).unwrap();
        let b = synthetic_gaussian(20, 3, &Covariance::Identity, 5).unwrap();
        assert_eq!(a.x(), b.x());
    }

    #[test]
    fn noisy_copy_properties() {
        let x = synthetic_gaussian(200, 784, &Covariance::Identity, 2).unwrap();
        let same = noisy_copy(&x, 0.0, 1).unwrap();
        assert_eq!(same.x(), x.x());
        let noisy = noisy_copy(&x, 1.0, 1).unwrap();
        let mean_sq: f64 = (0..x.n())
            .map(|j| (0..x.p()).map(|i| (noisy.x()[(i, j)] - x.x()[(i, j)]).powi(2)).sum::<f64>())
            .sum::<f64>()
            / x.n() as f64;
        assert!((mean_sq - 1.0).abs() < 0.05, "{mean_sq}");
        let other = noisy_copy(&x, 1.0, 2).unwrap();
        assert_ne!(other.x(), noisy.x());
        assert_eq!(noisy.y(), x.y());
        assert!(noisy_copy(&x, -1.0, 1).is_err());
    }

    #[test]
    fn mixture_classes_share_mean() {
        let spec = MixtureSpec::new(50);
        let a = gaussian_mixture(&spec, 400, 1).unwrap();
        let b = gaussian_mixture(&spec, 400, 2).unwrap();
        let mu = spec.mean();
        for d in [&a, &b] {
            let mut m = vec![0.0; 50];
            for j in 0..d.n() {
                for i in 0..50 {
                    m[i] += d.y()[j] * d.x()[(i, j)] / d.n() as f64;
                }
            }
            let err: f64 = m.iter().zip(&mu).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
            assert!(err < 0.1, "{err}");
        }
    }
}
