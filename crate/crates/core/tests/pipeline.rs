use rffdeq::experiments::{double_descent_ratios, features_from_ratios, grid, log_space, read_csv, run_sweep_on, write_csv, KernelSet};
use rffdeq::linalg::sym_operator_norm;
use rffdeq::{
    gaussian_kernel, gaussian_mixture, kernel_components, load_idx, make_binary_split, monte_carlo,
    normalize_joint, predict, sample_features, solve_delta, synthetic_gaussian, write_idx,
    Covariance, DataMatrix, Mat, MixtureSpec, RawDataset, SolverOptions, SplitSpec,
};

fn small_set(n: usize, p: usize, seed: u64) -> DataMatrix {
    let raw = synthetic_gaussian(n, p, &Covariance::Identity, seed).unwrap();
    let x = Mat::from_fn(p, n, |i, j| raw.x()[(i, j)] / (p as f64).sqrt());
    DataMatrix::new(x, raw.y().to_vec()).unwrap()
}

/// Mean and standard error of `f(t)` over the features `t`.
fn mean_and_se(count: usize, f: impl Fn(usize) -> f64) -> (f64, f64) {
    let vals: Vec<f64> = (0..count).map(f).collect();
    let mean = vals.iter().sum::<f64>() / count as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
    (mean, (var / count as f64).sqrt())
}

#[test]
fn feature_averages_converge_entrywise() {
    let x = small_set(5, 3, 1);
    let nf = 100_000;
    let fm = sample_features(&x, None, nf, 2).unwrap();
    let s = &fm.sigma_train;
    let k = kernel_components(&x, &x).unwrap();
    let g = gaussian_kernel(&x, &x).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let (cc, se_cc) = mean_and_se(nf, |t| s[(t, i)] * s[(t, j)]);
            assert!((cc - k.k_cos()[(i, j)]).abs() <= 3.0 * se_cc + 1e-12, "cos ({i},{j})");
            let (cs, se_cs) = mean_and_se(nf, |t| s[(t, i)] * s[(nf + t, j)]);
            assert!(cs.abs() <= 3.0 * se_cs + 1e-12, "cross ({i},{j})");
            let (full, se_full) = mean_and_se(nf, |t| s[(t, i)] * s[(t, j)] + s[(nf + t, i)] * s[(nf + t, j)]);
            assert!((full - g[(i, j)]).abs() <= 3.0 * se_full + 1e-12, "sum ({i},{j})");
        }
    }
}

#[test]
fn spectral_gap_does_not_follow_entrywise_convergence() {
    let n = 512;
    let x = small_set(n, 64, 3);
    let fm = sample_features(&x, None, n, 4).unwrap();
    let s = &fm.sigma_train;
    let gram = s.transpose() * s * rffdeq::faer::Scale(1.0 / n as f64);
    let diff = &gram - &gaussian_kernel(&x, &x).unwrap();
    let entrywise = diff.col_iter().flat_map(|c| c.iter().copied()).fold(0.0_f64, |m, v| m.max(v.abs()));
    let spectral = sym_operator_norm(diff.as_ref()).unwrap();
    assert!(spectral > 10.0 * entrywise, "{spectral} vs {entrywise}");
}

#[test]
fn idx_files_feed_a_binary_split() {
    let dir = tempfile::tempdir().unwrap();
    let (rows, cols, count) = (4, 4, 40);
    let images: Vec<u8> = (0..rows * cols * count).map(|i| ((i * 37 + i / 16) % 256) as u8).collect();
    let labels: Vec<u8> = (0..count).map(|i| (i % 4) as u8).collect();
    let raw = RawDataset::new(images, labels, rows, cols).unwrap();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
    write_idx(&raw, &ip, &lp).unwrap();
    let back = load_idx(&ip, &lp).unwrap();
    assert_eq!(back, raw);
    let spec = SplitSpec { class_a: 1, class_b: 3, n_train: 12, n_test: 6, seed: 5 };
    let (train, test) = make_binary_split(&back, &spec).unwrap();
    assert_eq!((train.p(), train.n(), test.n()), (16, 12, 6));
    assert!(train.y().iter().chain(test.y()).all(|&v| v == 1.0 || v == -1.0));
    let (a, b) = normalize_joint(&train, &test).unwrap();
    let pooled = (12.0 * a.mean_sq_norm() + 6.0 * b.mean_sq_norm()) / 18.0;
    assert!((pooled - 1.0).abs() < 1e-12, "{pooled}");
}

#[test]
fn sweep_round_trips_through_csv() {
    let spec = MixtureSpec::new(30);
    let (x, t) = normalize_joint(&gaussian_mixture(&spec, 60, 1).unwrap(), &gaussian_mixture(&spec, 20, 2).unwrap()).unwrap();
    let cells = grid(&[10, 40], &log_space(1e-2, 1.0, 3));
    let records = run_sweep_on(&x, &t, &cells, 4, 9, &SolverOptions::default()).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r.error.is_none() && r.e_train_theory.is_some() && r.e_test_emp.is_some()));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_csv(&path, &records).unwrap();
    assert_eq!(read_csv(&path).unwrap(), records);
}

#[test]
fn predicted_test_error_matches_simulation() {
    let spec = MixtureSpec::new(100);
    let (x, t) = normalize_joint(&gaussian_mixture(&spec, 200, 11).unwrap(), &gaussian_mixture(&spec, 100, 12).unwrap()).unwrap();
    let ks = KernelSet::new(&x, &t).unwrap();
    for (nf, lambda) in [(50, 1e-2), (400, 1e-1)] {
        let fp = solve_delta(&ks.train, nf, lambda, &SolverOptions::default()).unwrap();
        let pred = predict(&ks.train, &ks.cross, &ks.test, x.y(), t.y(), &fp).unwrap();
        let mc = monte_carlo(&x, &t, nf, lambda, 40, 13).unwrap();
        assert!((pred.e_test - mc.mean_test).abs() < 0.1 * mc.mean_test, "N={nf}: {} vs {}", pred.e_test, mc.mean_test);
        assert!((pred.e_train - mc.mean_train).abs() < 0.1 * mc.mean_train, "N={nf}: {} vs {}", pred.e_train, mc.mean_train);
    }
}

#[test]
fn best_predicted_test_error_is_overparametrized() {
    let spec = MixtureSpec::new(80);
    let (x, t) = normalize_joint(&gaussian_mixture(&spec, 120, 21).unwrap(), &gaussian_mixture(&spec, 60, 22).unwrap()).unwrap();
    let ks = KernelSet::new(&x, &t).unwrap();
    let feats = features_from_ratios(&double_descent_ratios(), x.n());
    for lambda in [1e-7, 1e-3, 0.2, 10.0] {
        let errs: Vec<f64> = feats
            .iter()
            .map(|&nf| {
                let fp = solve_delta(&ks.train, nf, lambda, &SolverOptions::default()).unwrap();
                predict(&ks.train, &ks.cross, &ks.test, x.y(), t.y(), &fp).unwrap().e_test
            })
            .collect();
        let best = (0..feats.len()).min_by(|&a, &b| errs[a].total_cmp(&errs[b])).unwrap();
        assert!(2 * feats[best] > x.n(), "lambda={lambda}: best N={}", feats[best]);
    }
}
