use std::path::Path;
use std::process::{Command, Output};

use rffdeq::experiments::read_csv;

fn rffdeq(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rffdeq")).args(args).current_dir(dir).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &["--p", "30", "--n", "60", "--threads", "1"];

#[test]
fn mp_demo_writes_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let o = rffdeq(&["mp-demo", "--p", "64", "--n", "6400", "--bins", "20", "--trials", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("mp_demo.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lower,upper,center,histogram,mp_density"));
    assert_eq!(lines.count(), 20);
    let out = stdout(&o);
    assert!(out.contains("# mp-demo configuration") && out.contains("p=64") && out.contains("wrote mp_demo.csv"));
}

#[test]
fn sweep_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# tiny sweep\np=30\nn=60\nn_hat=20\nN=10,40\nlambda=1e-2:1:3:log\ntrials=3\nseed=5\n").unwrap();
    for out in ["a.csv", "b.csv"] {
        let o = rffdeq(&["sweep", "--config", cfg.to_str().unwrap(), &format!("out={out}")], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    let records = read_csv(&dir.path().join("a.csv")).unwrap();
    assert_eq!(records.len(), 6);
    assert!(records.iter().all(|r| r.e_test_theory.is_some() && r.e_test_emp.is_some() && r.trials == 3));
}

#[test]
fn theory_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[&str], &str)] = &[
        ("kernel", &["--n", "8"], "kernel.csv"),
        ("fixed-point", &["--ratio", "0.25,2", "--lambda", "1e-3,1"], "fixed_point.csv"),
        ("predict", &["--N", "15,30", "--lambda", "0.1", "--n_hat", "10"], "predict.csv"),
        ("simulate", &["--N", "15", "--lambda", "0.1,1", "--n_hat", "10", "--trials", "2"], "simulate.csv"),
        ("phase", &["--ratio", "0.25,0.5,2", "--lambda", "1e-7"], "phase.csv"),
        ("lambda-opt", &["--N", "60", "--n_hat", "20", "--lambda", "1e-3:1e1:10:log"], "lambda_opt.csv"),
        ("similarity", &["--sigma2", "0,1e-1", "--trials", "2"], "similarity.csv"),
    ];
    for (sub, extra, file) in cases {
        let mut args = vec![*sub];
        args.extend_from_slice(SMALL);
        args.extend_from_slice(extra);
        let o = rffdeq(&args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", stderr(&o));
        assert!(dir.path().join(file).exists(), "{sub}");
    }
    let phase = read_csv(&dir.path().join("phase.csv")).unwrap();
    assert_eq!(phase.len(), 3);
    assert!(phase[0].gamma_cos.is_some() && phase[2].gamma_cos.is_some());
    assert!(phase[1].gamma_cos.is_none() && phase[1].error.as_deref().unwrap().contains("2N = n"));
    assert!(phase[1].delta_cos.is_some());
    let kernel = std::fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert_eq!(kernel.lines().count(), 65);
}

#[test]
fn help_lists_keys_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["mp-demo", "kernel", "fixed-point", "predict", "simulate", "sweep", "phase", "lambda-opt", "similarity"] {
        let o = rffdeq(&[sub, "--help"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        assert!(text.contains("seed") && text.contains("[default: "), "{sub}: {text}");
    }
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rffdeq(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(rffdeq(&[], dir.path()).status.code(), Some(1));

    let o = rffdeq(&["sweep", "--lambda", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("positive"));
    assert_eq!(rffdeq(&["sweep", "--lamda", "1"], dir.path()).status.code(), Some(1));

    let o = rffdeq(&["kernel", "dataset.kind=idx", "dataset.images=missing", "dataset.labels=missing"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    std::fs::write(dir.path().join("junk"), [0u8; 32]).unwrap();
    let o = rffdeq(&["kernel", "dataset.kind=idx", "dataset.images=junk", "dataset.labels=junk"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = rffdeq(&["mp-demo", "--p", "20", "--n", "100", "--bins", "5"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let o = rffdeq(&["kernel", "--p", "10", "--n", "5", "--out", "no/such/dir/k.csv"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let sweep = rffdeq_cli::config::subcommand("sweep").unwrap();
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = rffdeq_cli::config::parse_config(sweep, Some(&path), &[]).unwrap();
        let s = cfg.sweep_config().unwrap();
        assert!(s.trials > 0 && !s.grid.is_empty(), "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 2);
    let dd = rffdeq_cli::config::parse_config(sweep, Some(&dir.join("double_descent.cfg")), &[]).unwrap();
    assert_eq!(dd.sweep_config().unwrap().grid.len(), 28 * 4);
}
