use std::path::{Path, PathBuf};

use rffdeq::experiments::{
    describe, find_lambda_opt, format_float, load_dataset, phase_report, run_sweep_on, write_csv, ExperimentRecord,
    KernelSet,
};
use rffdeq::mp_warmup::mp_edge_deviation;
use rffdeq::{
    eig_histogram, gaussian_kernel, kernel_components, monte_carlo_lambda_grid, run_sweep, sample_cov_norm_gap,
    similarity_threshold_experiment, DataMatrix, Error, Result, SolverOptions, SweepConfig,
};

use crate::config::ResolvedConfig;

/// Runs one subcommand and returns the files it wrote.
pub fn execute(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    match cfg.subcommand {
        "mp-demo" => mp_demo(cfg),
        "kernel" => kernel(cfg),
        "fixed-point" => phase(cfg, false),
        "predict" => predict(cfg),
        "simulate" => simulate(cfg),
        "sweep" => sweep(cfg),
        "phase" => phase(cfg, true),
        "lambda-opt" => lambda_opt(cfg),
        "similarity" => similarity(cfg),
        other => Err(Error::Config(format!("unknown subcommand {other}"))),
    }
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    std::fs::write(path, buf)?;
    Ok(())
}

fn load(cfg: &ResolvedConfig, n: usize, n_hat: usize, sigma2: Option<f64>) -> Result<(DataMatrix, DataMatrix)> {
    let config = SweepConfig {
        dataset: cfg.dataset()?,
        n,
        n_hat,
        grid: Vec::new(),
        trials: 0,
        sigma2,
        seed: cfg.u64("seed")?,
        output_path: None,
    };
    load_dataset(&config)
}

fn report(records: &[ExperimentRecord]) {
    for r in records {
        println!("{}", describe(r));
    }
}

fn mp_demo(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let (p, n, bins, trials, seed) = (cfg.usize("p")?, cfg.usize("n")?, cfg.usize("bins")?, cfg.usize("trials")?, cfg.u64("seed")?);
    if p == 0 || n == 0 {
        return Err(Error::Config("p and n must be positive".into()));
    }
    let out = cfg.out()?;
    let h = eig_histogram(n, p, bins, seed)?;
    let rows: Vec<Vec<String>> = (0..h.centers.len())
        .map(|b| {
            vec![
                format_float(h.edges[b]),
                format_float(h.edges[b + 1]),
                format_float(h.centers[b]),
                format_float(h.density[b]),
                format_float(h.mp[b]),
            ]
        })
        .collect();
    write_table(&out, &["lower", "upper", "center", "histogram", "mp_density"], &rows)?;
    println!("histogram mass {:.6}, integrated gap to density {:.4}", h.mass(), h.l1_gap());
    if trials > 0 {
        let gap = sample_cov_norm_gap(n, p, trials, seed.wrapping_add(1))?;
        println!(
            "mean |C_hat - I| over {trials} draws: {gap:.4} (spectrum edge deviation {:.4})",
            mp_edge_deviation(p as f64 / n as f64)
        );
    }
    Ok(vec![out])
}

fn kernel(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let (x, _) = load(cfg, cfg.usize("n")?, 2, None)?;
    let k = kernel_components(&x, &x)?;
    let g = gaussian_kernel(&x, &x)?;
    let n = x.n();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            rows.push(vec![
                i.to_string(),
                j.to_string(),
                format_float(k.k_cos()[(i, j)]),
                format_float(k.k_sin()[(i, j)]),
                format_float(g[(i, j)]),
            ]);
        }
    }
    let out = cfg.out()?;
    write_table(&out, &["i", "j", "k_cos", "k_sin", "gaussian"], &rows)?;
    println!("n={n} p={}", x.p());
    Ok(vec![out])
}

fn phase(cfg: &ResolvedConfig, ridgeless: bool) -> Result<Vec<PathBuf>> {
    let n = cfg.usize("n")?;
    let feats = cfg.features(n)?;
    let lambdas = cfg.positive_list("lambda")?;
    let (x, _) = load(cfg, n, 2, None)?;
    let k = kernel_components(&x, &x)?;
    let records = phase_report(&k, x.p(), &feats, &lambdas, ridgeless, &SolverOptions::default())?;
    report(&records);
    let out = cfg.out()?;
    write_csv(&out, &records)?;
    Ok(vec![out])
}

fn predict(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let config = cfg.sweep_config()?;
    let records = run_sweep(&config)?;
    report(&records);
    Ok(config.output_path.into_iter().collect())
}

fn simulate(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let config = cfg.sweep_config()?;
    if config.trials == 0 {
        return Err(Error::Config("key 'trials': simulation needs at least one trial".into()));
    }
    let (x, t) = load_dataset(&config)?;
    let mut records = Vec::with_capacity(config.grid.len());
    let mut start = 0;
    while start < config.grid.len() {
        let nf = config.grid[start].n_features;
        let end = start + config.grid[start..].iter().take_while(|c| c.n_features == nf).count();
        let lambdas: Vec<f64> = config.grid[start..end].iter().map(|c| c.lambda).collect();
        let mc = monte_carlo_lambda_grid(&x, &t, nf, &lambdas, config.trials, config.seed);
        for (i, &l) in lambdas.iter().enumerate() {
            let mut r = ExperimentRecord::empty(x.n(), x.p(), nf, l);
            match &mc {
                Ok(m) => {
                    r.trials = config.trials;
                    r.e_train_emp = Some(m[i].mean_train);
                    r.e_train_std = Some(m[i].std_train);
                    r.e_test_emp = Some(m[i].mean_test);
                    r.e_test_std = Some(m[i].std_test);
                }
                Err(e) => r.error = Some(e.to_string()),
            }
            records.push(r);
        }
        start = end;
    }
    report(&records);
    let out = config.output_path.clone().expect("output path");
    write_csv(&out, &records)?;
    Ok(vec![out])
}

fn sweep(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let config = cfg.sweep_config()?;
    let (x, t) = load_dataset(&config)?;
    let records = run_sweep_on(&x, &t, &config.grid, config.trials, config.seed, &SolverOptions::default())?;
    report(&records);
    let out = config.output_path.clone().expect("output path");
    write_csv(&out, &records)?;
    Ok(vec![out])
}

fn lambda_opt(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let n = cfg.usize("n")?;
    let feats = cfg.features(n)?;
    let lambdas = cfg.positive_list("lambda")?;
    if lambdas.len() < 10 {
        return Err(Error::Config(format!("key 'lambda': the search grid needs at least 10 points, got {}", lambdas.len())));
    }
    let (x, t) = load(cfg, n, cfg.usize("n_hat")?, None)?;
    let ks = KernelSet::new(&x, &t)?;
    let opts = SolverOptions::default();
    let mut rows = Vec::with_capacity(feats.len());
    for &nf in &feats {
        let row = match find_lambda_opt(&ks, x.y(), t.y(), nf, &lambdas, &opts) {
            Ok(m) => {
                println!("N={nf} lambda_opt={:e} e_test_theory={:.6e}{}", m.argmin, m.value, if m.boundary { " (grid edge)" } else { "" });
                vec![format_float(m.argmin), format_float(m.value), m.boundary.to_string(), String::new()]
            }
            Err(e) => {
                println!("N={nf} error={e}");
                vec![String::new(), String::new(), String::new(), e.to_string().replace(',', " ")]
            }
        };
        let mut full = vec![x.n().to_string(), x.p().to_string(), nf.to_string()];
        full.extend(row);
        rows.push(full);
    }
    let out = cfg.out()?;
    write_table(&out, &["n", "p", "N", "lambda_opt", "e_test_theory", "on_grid_edge", "error"], &rows)?;
    Ok(vec![out])
}

fn similarity(cfg: &ResolvedConfig) -> Result<Vec<PathBuf>> {
    let n = cfg.usize("n")?;
    let nf = cfg.opt_usize("N")?.unwrap_or(n / 2);
    let lambda = cfg.positive("lambda")?;
    let sigma2 = cfg.nonnegative_list("sigma2")?;
    let trials = cfg.usize("trials")?;
    let seed = cfg.u64("seed")?;
    if trials == 0 {
        return Err(Error::Config("key 'trials': needs at least one trial".into()));
    }
    let (x, _) = load(cfg, n, 2, None)?;
    let recs = similarity_threshold_experiment(&x, nf, lambda, &sigma2, trials, seed)?;
    let rows: Vec<Vec<String>> = recs
        .iter()
        .map(|r| {
            println!("sigma2={:e} e_train={:.6e} e_test={:.6e} ratio={:.3}", r.sigma2, r.e_train, r.e_test, r.ratio());
            vec![
                format_float(r.sigma2),
                format_float(r.e_train),
                format_float(r.e_train_std),
                format_float(r.e_test),
                format_float(r.e_test_std),
                format_float(r.ratio()),
                r.diverged.to_string(),
            ]
        })
        .collect();
    let out = cfg.out()?;
    write_table(&out, &["sigma2", "e_train_emp", "e_train_std", "e_test_emp", "e_test_std", "ratio", "diverged"], &rows)?;
    Ok(vec![out])
}
