//! Command-line front end: flat `key=value` configuration, one subcommand per
//! experiment, CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use std::ffi::OsString;

use clap::{Arg, ArgAction, Command};
use rffdeq::{Error, ErrorKind};

use crate::config::{keys_help, parse_config, split_arguments, subcommand, SUBCOMMANDS};

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

pub fn cli() -> Command {
    let mut cmd = Command::new("rffdeq")
        .about("Random Fourier feature ridge regression: deterministic equivalents and simulations")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in SUBCOMMANDS {
        cmd = cmd.subcommand(
            Command::new(sub.name)
                .about(sub.about)
                .after_help(keys_help(sub))
                .arg(
                    Arg::new("settings")
                        .value_name("KEY=VALUE")
                        .help("`--config FILE`, then overrides as `--key value`, `--key=value` or `key=value`")
                        .num_args(0..)
                        .action(ArgAction::Append)
                        .allow_hyphen_values(true)
                        .trailing_var_arg(true),
                ),
        );
    }
    cmd
}

/// Parses `args`, runs the subcommand and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let (name, sub_matches) = matches.subcommand().expect("subcommand required");
    let sub = subcommand(name).expect("registered subcommand");
    let settings: Vec<String> = sub_matches.get_many::<String>("settings").map(|v| v.cloned().collect()).unwrap_or_default();
    match resolve_and_execute(sub, &settings) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(e.kind())
        }
    }
}

fn resolve_and_execute(sub: &'static config::Subcommand, settings: &[String]) -> rffdeq::Result<Vec<std::path::PathBuf>> {
    let (path, overrides) = split_arguments(settings)?;
    let cfg = parse_config(sub, path.as_deref(), &overrides)?;
    print!("{cfg}");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads()?)
        .build()
        .map_err(|e| Error::Config(format!("key 'threads': {e}")))?;
    pool.install(|| commands::execute(&cfg))
}
