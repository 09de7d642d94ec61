//! Flat `key=value` configuration with per-subcommand key tables.

use std::fmt;
use std::path::{Path, PathBuf};

use rffdeq::experiments::{features_from_ratios, grid, log_space, DatasetSource};
use rffdeq::{Error, MixtureSpec, Result, SweepConfig};

pub struct KeySpec {
    pub name: &'static str,
    /// Empty means "unset".
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { name, default, help }
}

pub struct Subcommand {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: &'static [KeySpec],
}

const KIND: KeySpec = key("dataset.kind", "mixture", "mixture (synthetic two-class Gaussian mixture) or idx");
const IMAGES: KeySpec = key("dataset.images", "", "IDX image file (dataset.kind=idx)");
const LABELS: KeySpec = key("dataset.labels", "", "IDX label file (dataset.kind=idx)");
const CLASSES: KeySpec = key("classes", "3,7", "the two digit classes labelled -1 and +1");
const P: KeySpec = key("p", "784", "dimension of the synthetic mixture");
const SEED: KeySpec = key("seed", "1", "master seed for all randomness");
const THREADS: KeySpec = key("threads", "0", "worker threads, 0 for one per core");
const N_FEATURES: KeySpec = key("N", "", "feature counts; set this or ratio");
const RATIO: KeySpec = key("ratio", "0.05:1:20,1.5:5:8", "N/n grid, N rounded to the nearest integer");

pub const SUBCOMMANDS: &[Subcommand] = &[
    Subcommand {
        name: "mp-demo",
        about: "Sample covariance spectrum against the Marchenko-Pastur law",
        keys: &[
            key("p", "512", "dimension"),
            key("n", "51200", "sample count"),
            key("bins", "60", "histogram bins"),
            key("trials", "20", "draws averaged for the operator-norm gap, 0 to skip"),
            SEED,
            THREADS,
            key("out", "mp_demo.csv", "output CSV"),
        ],
    },
    Subcommand {
        name: "kernel",
        about: "Kernel components of the training set",
        keys: &[KIND, IMAGES, LABELS, CLASSES, P, key("n", "100", "training samples"), SEED, THREADS, key("out", "kernel.csv", "output CSV")],
    },
    Subcommand {
        name: "fixed-point",
        about: "Solve the fixed-point equation and report det(Omega^-1) over a grid",
        keys: &[
            KIND,
            IMAGES,
            LABELS,
            CLASSES,
            P,
            key("n", "1000", "training samples"),
            N_FEATURES,
            RATIO,
            key("lambda", "1e-7", "regularization grid"),
            SEED,
            THREADS,
            key("out", "fixed_point.csv", "output CSV"),
        ],
    },
    Subcommand {
        name: "predict",
        about: "Predicted training and test errors over a grid",
        keys: &[
            KIND,
            IMAGES,
            LABELS,
            CLASSES,
            P,
            key("n", "1000", "training samples"),
            key("n_hat", "500", "test samples"),
            N_FEATURES,
            RATIO,
            key("lambda", "1e-7", "regularization grid"),
            key("sigma2", "", "when set, the test set is the training set plus noise of this variance"),
            SEED,
            THREADS,
            key("out", "predict.csv", "output CSV"),
        ],
    },
    Subcommand {
        name: "simulate",
        about: "Monte-Carlo training and test errors of random-feature ridge regression",
        keys: &[
            KIND,
            IMAGES,
            LABELS,
            CLASSES,
            P,
            key("n", "1000", "training samples"),
            key("n_hat", "500", "test samples"),
            key("N", "250,500,1000,2000", "feature counts; set this or ratio"),
            key("ratio", "", "N/n grid, N rounded to the nearest integer"),
            key("lambda", "1e-4:1e2:13:log", "regularization grid"),
            key("trials", "30", "feature draws per cell"),
            key("sigma2", "", "when set, the test set is the training set plus noise of this variance"),
            SEED,
            THREADS,
            key("out", "simulate.csv", "output CSV"),
        ],
    },
    Subcommand {
        name: "sweep",
        about: "Theory and simulation over a grid of feature counts and regularizations",
        keys: &[
            KIND,
            IMAGES,
            LABELS,
            CLASSES,
            P,
            key("n", "1000", "training samples"),
            key("n_hat", "500", "test samples"),
            key("N", "250,500,1000,2000", "feature counts; set this or ratio"),
            key("ratio", "", "N/n grid, N rounded to the nearest integer"),
            key("lambda", "1e-4:1e2:13:log", "regularization grid"),
            key("trials", "30", "feature draws per cell, 0 for theory only"),
            key("sigma2", "", "when set, the test set is the training set plus noise of this variance"),
            SEED,
            THREADS,
            key("out", "sweep.csv", "output CSV"),
        ],
    },
    Subcommand {
        name: "phase",
        about: "Fixed-point solutions, det(Omega^-1) and the ridgeless limit across 2N = n",
        keys: &[
            KIND,
            IMAGES,
            LABELS,
            CLASSES,
            P,
            key("n", "1000", "training samples"),
            N_FEATURES,
            RATIO,
            key("lambda", "1e-7,1e-3,1,10", "regularization grid"),
            SEED,
            THREADS,
            key("out", "phase.csv", "output CSV"),
        ],
    },
    Subcommand {
        name: "lambda-opt",
        about: "Regularization minimizing the predicted test error for each feature count",
        keys: &[
            KIND,
            IMAGES,
            LABELS,
            CLASSES,
            P,
            key("n", "1000", "training samples"),
            key("n_hat", "500", "test samples"),
            N_FEATURES,
            RATIO,
            key("lambda", "1e-4:1e2:25:log", "search grid, at least 10 points"),
            SEED,
            THREADS,
            key("out", "lambda_opt.csv", "output CSV"),
        ],
    },
    Subcommand {
        name: "similarity",
        about: "Test error on noisy copies of the training set at 2N = n",
        keys: &[
            KIND,
            IMAGES,
            LABELS,
            CLASSES,
            P,
            key("n", "1024", "training samples"),
            key("N", "", "feature count, defaults to n/2"),
            key("lambda", "1e-3", "regularization"),
            key("sigma2", "1e-5:1e-1:9:log", "noise variance grid"),
            key("trials", "10", "feature draws per noise level"),
            SEED,
            THREADS,
            key("out", "similarity.csv", "output CSV"),
        ],
    },
];

pub fn subcommand(name: &str) -> Option<&'static Subcommand> {
    SUBCOMMANDS.iter().find(|s| s.name == name)
}

/// Help text listing every key of a subcommand with its default.
pub fn keys_help(sub: &Subcommand) -> String {
    let width = sub.keys.iter().map(|k| k.name.len()).max().unwrap_or(0);
    let mut out = String::from("Keys (config file lines `key=value`, or `--key value` / `key=value` arguments):\n");
    for k in sub.keys {
        let default = if k.default.is_empty() { "unset".to_string() } else { k.default.to_string() };
        out.push_str(&format!("  {:width$}  {} [default: {default}]\n", k.name, k.help));
    }
    out.push_str("\nGrids are comma lists whose items are numbers or ranges start:stop:count, with :log or (log) for log spacing.");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Default,
    File { path: PathBuf, line: usize },
    Argument,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => write!(f, "default"),
            Origin::File { path, line } => write!(f, "line {line} of {}", path.display()),
            Origin::Argument => write!(f, "command line"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub key: &'static str,
    pub value: Option<String>,
    pub origin: Origin,
}

/// Configuration of one subcommand after defaults, file and overrides.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub subcommand: &'static str,
    entries: Vec<Entry>,
}

fn config_error(key: &str, origin: &Origin, msg: impl fmt::Display) -> Error {
    Error::Config(format!("key '{key}' ({origin}): {msg}"))
}

impl ResolvedConfig {
    fn new(sub: &'static Subcommand) -> Self {
        let entries = sub
            .keys
            .iter()
            .map(|k| Entry {
                key: k.name,
                value: (!k.default.is_empty()).then(|| k.default.to_string()),
                origin: Origin::Default,
            })
            .collect();
        Self { subcommand: sub.name, entries }
    }

    fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<()> {
        let sub = self.subcommand;
        let entry = self.entries.iter_mut().find(|e| e.key == key).ok_or_else(|| {
            Error::Config(format!("unknown key '{key}' ({origin}) for subcommand {sub}"))
        })?;
        let value = value.trim();
        if value.is_empty() {
            return Err(config_error(key, &origin, "empty value"));
        }
        entry.value = Some(value.to_string());
        entry.origin = origin;
        Ok(())
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    fn entry(&self, key: &str) -> &Entry {
        self.entries.iter().find(|e| e.key == key).unwrap_or_else(|| panic!("{} has no key {key}", self.subcommand))
    }

    pub fn has_key(&self, key: &str) -> bool {
        self.entries.iter().any(|e| e.key == key)
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.has_key(key) && self.entry(key).origin != Origin::Default
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entry(key).value.as_deref()
    }

    fn parse_with<T>(&self, key: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        let e = self.entry(key);
        match &e.value {
            None => Ok(None),
            Some(v) => f(v).map(Some).map_err(|m| config_error(key, &e.origin, m)),
        }
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| config_error(key, &self.entry(key).origin, "required but not set"))
    }

    pub fn string(&self, key: &str) -> Result<String> {
        self.required(key, self.raw(key).map(str::to_string))
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, |v| v.parse::<usize>().map_err(|_| format!("expected a nonnegative integer, got '{v}'")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.opt_usize(key)?;
        self.required(key, v)
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let v = self.parse_with(key, |v| v.parse::<u64>().map_err(|_| format!("expected a 64-bit unsigned integer, got '{v}'")))?;
        self.required(key, v)
    }

    pub fn opt_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.parse_with(key, parse_grid)
    }

    /// Grid whose values must all be strictly positive.
    pub fn positive_list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.opt_f64_list(key)?;
        let v = self.required(key, v)?;
        if let Some(bad) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(config_error(key, &self.entry(key).origin, format!("must be positive, got {bad}")));
        }
        Ok(v)
    }

    pub fn positive(&self, key: &str) -> Result<f64> {
        let v = self.positive_list(key)?;
        if v.len() != 1 {
            return Err(config_error(key, &self.entry(key).origin, format!("expected one value, got {}", v.len())));
        }
        Ok(v[0])
    }

    /// Optional single nonnegative value.
    pub fn opt_nonnegative(&self, key: &str) -> Result<Option<f64>> {
        let origin = &self.entry(key).origin;
        match self.opt_f64_list(key)? {
            None => Ok(None),
            Some(v) if v.len() != 1 => Err(config_error(key, origin, format!("expected one value, got {}", v.len()))),
            Some(v) if !(v[0] >= 0.0) || !v[0].is_finite() => {
                Err(config_error(key, origin, format!("must be nonnegative, got {}", v[0])))
            }
            Some(v) => Ok(Some(v[0])),
        }
    }

    pub fn nonnegative_list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.opt_f64_list(key)?;
        let v = self.required(key, v)?;
        if let Some(bad) = v.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(config_error(key, &self.entry(key).origin, format!("must be nonnegative, got {bad}")));
        }
        Ok(v)
    }

    /// Feature counts from `N` or from `ratio` times `n`. An explicitly set key
    /// beats a default.
    pub fn features(&self, n: usize) -> Result<Vec<usize>> {
        if self.has_key("ratio") && self.is_explicit("ratio") && self.is_explicit("N") {
            return Err(Error::Config("set either 'N' or 'ratio', not both".into()));
        }
        let from_n = self.parse_with("N", |v| {
            split_items(v)
                .map(|item| item.parse::<usize>().map_err(|_| format!("expected nonnegative integers, got '{item}'")))
                .collect::<std::result::Result<Vec<_>, _>>()
        })?;
        let ratio_wins = self.has_key("ratio") && self.is_explicit("ratio");
        if let Some(feats) = from_n.filter(|_| !ratio_wins) {
            return Ok(feats);
        }
        if self.has_key("ratio") {
            if let Some(r) = self.opt_f64_list("ratio")? {
                if let Some(bad) = r.iter().find(|x| !(**x >= 0.0)) {
                    return Err(config_error("ratio", &self.entry("ratio").origin, format!("must be nonnegative, got {bad}")));
                }
                return Ok(features_from_ratios(&r, n));
            }
        }
        Err(Error::Config("one of 'N' or 'ratio' must be set".into()))
    }

    pub fn dataset(&self) -> Result<DatasetSource> {
        let kind = self.string("dataset.kind")?;
        match kind.as_str() {
            "mixture" => {
                let p = self.usize("p")?;
                if p == 0 {
                    return Err(config_error("p", &self.entry("p").origin, "must be positive"));
                }
                Ok(DatasetSource::Synthetic(MixtureSpec::new(p)))
            }
            "idx" => {
                if self.is_explicit("p") {
                    return Err(config_error("p", &self.entry("p").origin, "the dimension of IDX data comes from the files"));
                }
                let classes = self.parse_with("classes", |v| {
                    let parts: Vec<&str> = split_items(v).collect();
                    match parts.as_slice() {
                        [a, b] => match (a.parse::<u8>(), b.parse::<u8>()) {
                            (Ok(a), Ok(b)) if a != b => Ok((a, b)),
                            _ => Err(format!("expected two distinct labels 0-255, got '{v}'")),
                        },
                        _ => Err(format!("expected two comma-separated labels, got '{v}'")),
                    }
                })?;
                Ok(DatasetSource::Idx {
                    images: PathBuf::from(self.string("dataset.images")?),
                    labels: PathBuf::from(self.string("dataset.labels")?),
                    classes: self.required("classes", classes)?,
                })
            }
            other => Err(config_error(
                "dataset.kind",
                &self.entry("dataset.kind").origin,
                format!("expected 'mixture' or 'idx', got '{other}'"),
            )),
        }
    }

    pub fn threads(&self) -> Result<usize> {
        self.usize("threads")
    }

    pub fn out(&self) -> Result<PathBuf> {
        Ok(PathBuf::from(self.string("out")?))
    }

    /// Sweep settings for the subcommands that run a feature/lambda grid.
    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let n = self.usize("n")?;
        let features = self.features(n)?;
        let lambdas = self.positive_list("lambda")?;
        let config = SweepConfig {
            dataset: self.dataset()?,
            n,
            n_hat: if self.has_key("n_hat") { self.usize("n_hat")? } else { 2 },
            grid: grid(&features, &lambdas),
            trials: if self.has_key("trials") { self.usize("trials")? } else { 0 },
            sigma2: if self.has_key("sigma2") { self.opt_nonnegative("sigma2")? } else { None },
            seed: self.u64("seed")?,
            output_path: Some(self.out()?),
        };
        config.validate()?;
        Ok(config)
    }
}

impl fmt::Display for ResolvedConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {} configuration", self.subcommand)?;
        for e in &self.entries {
            match &e.value {
                Some(v) => writeln!(f, "{}={v}    # {}", e.key, e.origin)?,
                None => writeln!(f, "# {} unset", e.key)?,
            }
        }
        Ok(())
    }
}

fn split_items(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim)
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("expected a number, got '{s}'"))
}

/// Parses a comma list whose items are numbers or `start:stop:count` ranges,
/// log-spaced with a `:log` or `(log)` suffix.
pub fn parse_grid(v: &str) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in split_items(v) {
        if !item.contains(':') {
            out.push(parse_number(item)?);
            continue;
        }
        let (body, log) = if let Some(b) = item.strip_suffix("(log)") {
            (b, true)
        } else if let Some(b) = item.strip_suffix(":log") {
            (b, true)
        } else {
            (item, false)
        };
        let parts: Vec<&str> = body.split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(format!("expected start:stop:count, got '{item}'"));
        };
        let (start, stop) = (parse_number(start)?, parse_number(stop)?);
        let count: usize = count.trim().parse().map_err(|_| format!("range count must be a positive integer in '{item}'"))?;
        if count == 0 {
            return Err(format!("range count must be a positive integer in '{item}'"));
        }
        if log {
            if !(start > 0.0 && stop > 0.0) {
                return Err(format!("log range needs positive endpoints, got '{item}'"));
            }
            out.extend(log_space(start, stop, count));
        } else if count == 1 {
            out.push(start);
        } else {
            out.extend((0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64));
        }
    }
    Ok(out)
}

/// Applies `key=value` lines. Blank lines and `#` comments are ignored.
fn apply_text(config: &mut ResolvedConfig, text: &str, path: &Path) -> Result<()> {
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = Origin::File { path: path.to_path_buf(), line: i + 1 };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{origin}: expected key=value, got '{line}'")))?;
        config.set(k.trim(), v, origin)?;
    }
    Ok(())
}

/// Splits override arguments into a config file path and `(key, value)`
/// pairs. Accepts `--key value`, `--key=value` and `key=value`.
pub fn split_arguments(args: &[String]) -> Result<(Option<PathBuf>, Vec<(String, String)>)> {
    let mut config = None;
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let (k, v) = if let Some(flag) = arg.strip_prefix("--") {
            match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| Error::Config(format!("flag '--{flag}' needs a value")))?;
                    (flag.to_string(), v.clone())
                }
            }
        } else if arg == "-c" {
            let v = it.next().ok_or_else(|| Error::Config("flag '-c' needs a value".into()))?;
            ("config".to_string(), v.clone())
        } else if let Some((k, v)) = arg.split_once('=') {
            (k.to_string(), v.to_string())
        } else {
            return Err(Error::Config(format!("unexpected argument '{arg}', expected key=value")));
        };
        if k == "config" {
            config = Some(PathBuf::from(v));
        } else {
            pairs.push((k.replace('-', "_").replace("dataset_", "dataset."), v));
        }
    }
    Ok((config, pairs))
}

/// Defaults, then the config file, then overrides.
pub fn parse_config(sub: &'static Subcommand, path: Option<&Path>, overrides: &[(String, String)]) -> Result<ResolvedConfig> {
    let mut config = ResolvedConfig::new(sub);
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
        apply_text(&mut config, &text, path)?;
    }
    for (k, v) in overrides {
        config.set(k, v, Origin::Argument)?;
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rffdeq::experiments::{double_descent_ratios, Cell};

    fn sub(name: &str) -> &'static Subcommand {
        subcommand(name).unwrap()
    }

    fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn every_subcommand_lists_seed_threads_and_out() {
        for s in SUBCOMMANDS {
            for k in ["seed", "threads", "out"] {
                assert!(s.keys.iter().any(|e| e.name == k), "{} lacks {k}", s.name);
            }
            let names: Vec<_> = s.keys.iter().map(|k| k.name).collect();
            let mut dedup = names.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), names.len(), "{}", s.name);
            assert!(keys_help(s).contains("[default: "));
        }
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("1,2.5, 3e-1").unwrap(), vec![1.0, 2.5, 0.3]);
        assert_eq!(parse_grid("0:1:5").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("1e-2:1e2:5:log").unwrap(), parse_grid("1e-2:1e2:5(log)").unwrap());
        let l = parse_grid("1e-2:1e2:5(log)").unwrap();
        assert_eq!(l.len(), 5);
        assert_eq!((l[0], l[4]), (1e-2, 1e2));
        assert!((l[2] - 1.0).abs() < 1e-15);
        assert_eq!(parse_grid("0.05:1:20,1.5:5:8").unwrap().len(), 28);
        for bad in ["", "a", "1:2", "1:2:0", "0:1:3:log", "1:2:x"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn default_ratio_grid_is_double_descent_grid() {
        let ours = parse_grid(sub("phase").keys.iter().find(|k| k.name == "ratio").unwrap().default).unwrap();
        let reference = double_descent_ratios();
        assert_eq!(ours.len(), reference.len());
        for (a, b) in ours.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_file_and_full_overrides_give_valid_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.cfg");
        std::fs::write(&path, "").unwrap();
        let o = pairs(&[
            ("dataset.kind", "mixture"),
            ("p", "20"),
            ("n", "40"),
            ("n_hat", "10"),
            ("N", "5,10"),
            ("lambda", "0.1"),
            ("trials", "3"),
            ("seed", "9"),
            ("threads", "1"),
            ("out", "x.csv"),
        ]);
        let c = parse_config(sub("sweep"), Some(&path), &o).unwrap();
        let s = c.sweep_config().unwrap();
        assert_eq!((s.n, s.n_hat, s.trials, s.seed), (40, 10, 3, 9));
        assert_eq!(s.grid.len(), 2);
    }

    #[test]
    fn negative_lambda_is_rejected() {
        let c = parse_config(sub("sweep"), None, &pairs(&[("lambda", "-1")])).unwrap();
        let msg = c.sweep_config().unwrap_err().to_string();
        assert!(msg.contains("lambda") && msg.contains("positive"), "{msg}");
    }

    #[test]
    fn unknown_and_malformed_keys_are_rejected() {
        let err = parse_config(sub("sweep"), None, &pairs(&[("lamda", "1")])).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("lamda")));
        let err = parse_config(sub("kernel"), None, &pairs(&[("lambda", "1")])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "# header\nn=10\nnot a pair\n").unwrap();
        let msg = parse_config(sub("sweep"), Some(&path), &[]).unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
        std::fs::write(&path, "n=ten\n").unwrap();
        let c = parse_config(sub("sweep"), Some(&path), &[]).unwrap();
        let msg = c.usize("n").unwrap_err().to_string();
        assert!(msg.contains("'n'") && msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn fixture_file_parses_to_expected_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fixture.cfg");
        std::fs::write(
            &path,
            "# double descent at small scale\n\
             dataset.kind = idx\n\
             dataset.images = imgs.idx\n\
             dataset.labels = lbls.idx   # labels\n\
             classes = 1,8\n\
             n = 50\n\
             n_hat = 20\n\
             ratio = 0.5, 1:2:2\n\
             lambda = 1e-3:1e-1:3(log)\n\
             trials = 4\n\
             seed = 77\n",
        )
        .unwrap();
        let c = parse_config(sub("sweep"), Some(&path), &pairs(&[("out", "o.csv"), ("N", "")])).unwrap_err();
        assert!(c.to_string().contains("empty"));
        let c = parse_config(sub("sweep"), Some(&path), &pairs(&[("out", "o.csv")])).unwrap();
        let lambdas = [1e-3, 1e-2, 1e-1];
        let expected = SweepConfig {
            dataset: DatasetSource::Idx { images: "imgs.idx".into(), labels: "lbls.idx".into(), classes: (1, 8) },
            n: 50,
            n_hat: 20,
            grid: [25usize, 50, 100]
                .iter()
                .flat_map(|&n_features| lambdas.iter().map(move |&lambda| Cell { n_features, lambda }))
                .collect(),
            trials: 4,
            sigma2: None,
            seed: 77,
            output_path: Some("o.csv".into()),
        };
        let got = c.sweep_config().unwrap();
        assert_eq!(got.grid.len(), expected.grid.len());
        for (a, b) in got.grid.iter().zip(&expected.grid) {
            assert_eq!(a.n_features, b.n_features);
            assert!((a.lambda - b.lambda).abs() <= 1e-15 * b.lambda);
        }
        assert_eq!(SweepConfig { grid: expected.grid.clone(), ..got }, expected);
    }

    #[test]
    fn features_and_ratio_are_exclusive() {
        let c = parse_config(sub("phase"), None, &pairs(&[("N", "10"), ("ratio", "0.5")])).unwrap();
        assert!(c.features(100).is_err());
        let c = parse_config(sub("phase"), None, &pairs(&[("N", "10,30")])).unwrap();
        assert_eq!(c.features(100).unwrap(), vec![10, 30]);
        let c = parse_config(sub("phase"), None, &pairs(&[("ratio", "0.25,2")])).unwrap();
        assert_eq!(c.features(100).unwrap(), vec![25, 200]);
    }

    #[test]
    fn idx_rejects_explicit_dimension() {
        let c = parse_config(
            sub("kernel"),
            None,
            &pairs(&[("dataset.kind", "idx"), ("dataset.images", "a"), ("dataset.labels", "b"), ("p", "10")]),
        )
        .unwrap();
        assert!(c.dataset().is_err());
        let c = parse_config(sub("kernel"), None, &pairs(&[("dataset.kind", "idx")])).unwrap();
        assert!(c.dataset().unwrap_err().to_string().contains("dataset.images"));
    }

    #[test]
    fn argument_forms() {
        let args: Vec<String> =
            ["--p", "512", "--n=100", "seed=3", "-c", "f.cfg", "--n-hat", "7", "--dataset-kind", "idx"].iter().map(|s| s.to_string()).collect();
        let (cfg, kv) = split_arguments(&args).unwrap();
        assert_eq!(cfg, Some(PathBuf::from("f.cfg")));
        assert_eq!(kv, pairs(&[("p", "512"), ("n", "100"), ("seed", "3"), ("n_hat", "7"), ("dataset.kind", "idx")]));
        assert!(split_arguments(&["--p".to_string()]).is_err());
        assert!(split_arguments(&["stray".to_string()]).is_err());
    }
}
