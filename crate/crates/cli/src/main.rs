//! `ldg-eoc`: runs manufactured-solution convergence studies and writes EOC
//! tables.
//!
//! Exit codes: 0 on success, 1 on invalid flags or I/O failure, 2 when a
//! Newton solve does not converge.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};
use rayon::prelude::*;

use ldg_core::assembly::SchemeParams;
use ldg_core::experiments::{run_study, GammaCase, StudyConfig};
use ldg_core::newton::NewtonConfig;
use ldg_core::report::{self, Quantity, Study};
use ldg_core::LdgError;

#[derive(Parser, Debug)]
#[command(name = "ldg-eoc", version, about = "EOC studies for the LDG p-Navier-Stokes solver")]
struct Args {
    /// Power-law exponent; repeat for several studies.
    #[arg(long = "p", required = true, num_args = 1)]
    p: Vec<f64>,
    /// Pressure exponent case (1 or 2); repeatable.
    #[arg(long = "case", default_values_t = [1u8], value_parser = clap::value_parser!(u8).range(1..=2))]
    case: Vec<u8>,
    /// Number of meshes, i = 1..=N.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..=6))]
    levels: u64,
    /// Polynomial degree.
    #[arg(long, default_value_t = 1)]
    degree: usize,
    #[arg(long, default_value_t = 2.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    /// Drop the convective term.
    #[arg(long, conflicts_with = "navier_stokes")]
    stokes: bool,
    /// Keep the convective term (default).
    #[arg(long)]
    navier_stokes: bool,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    quad_vol: usize,
    #[arg(long, default_value_t = 8)]
    quad_face: usize,
    #[arg(long, default_value_t = 12)]
    quad_err: usize,
}

fn validate(args: &Args) -> Result<(), String> {
    for &p in &args.p {
        if !(p.is_finite() && p > 1.0) {
            return Err(format!("--p must be a finite number greater than 1, got {p}"));
        }
    }
    if !(args.alpha.is_finite() && args.alpha > 0.0) {
        return Err(format!("--alpha must be positive, got {}", args.alpha));
    }
    if !(args.delta.is_finite() && args.delta >= 0.0) {
        return Err(format!("--delta must be non-negative, got {}", args.delta));
    }
    if args.degree == 0 {
        return Err("--degree must be at least 1".into());
    }
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("LDG_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn write_outputs(dir: &Path, studies: &[Study]) -> Result<(), LdgError> {
    let io = |path: &Path, e: std::io::Error| LdgError::Io {
        path: path.display().to_string(),
        source: e,
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for q in Quantity::ALL {
        let path = dir.join(q.file_name());
        std::fs::write(&path, report::csv(q, studies)).map_err(|e| io(&path, e))?;
    }
    let path = dir.join("tables.md");
    std::fs::write(&path, report::markdown(studies)).map_err(|e| io(&path, e))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = validate(&args) {
        eprintln!("error: {msg}\n\nFor more information, try '--help'.");
        return ExitCode::from(1);
    }
    configure_threads();

    let scheme = SchemeParams {
        alpha: args.alpha,
        include_convection: !args.stokes,
        quad_degree_volume: args.quad_vol,
        quad_degree_face: args.quad_face,
    };
    let mut jobs = Vec::new();
    for &c in &args.case {
        for &p in &args.p {
            let gamma_case = GammaCase::from_number(c).expect("validated by clap");
            jobs.push(StudyConfig {
                degree: args.degree,
                delta: args.delta,
                scheme,
                newton: NewtonConfig::default(),
                quad_degree_error: args.quad_err,
                ..StudyConfig::new(p, gamma_case, args.levels as usize)
            });
        }
    }
    let results: Vec<Result<Study, LdgError>> = jobs
        .par_iter()
        .map(|cfg| {
            run_study(cfg).map(|records| Study {
                p: cfg.p,
                gamma_case: cfg.gamma_case,
                records,
            })
        })
        .collect();

    let mut studies = Vec::new();
    let mut failed_to_converge = false;
    for r in results {
        match r {
            Ok(s) => studies.push(s),
            Err(e) => {
                error!("{e}");
                if e.is_non_convergence() {
                    failed_to_converge = true;
                } else {
                    return ExitCode::from(1);
                }
            }
        }
    }
    if failed_to_converge {
        return ExitCode::from(2);
    }
    if let Err(e) = write_outputs(&args.out, &studies) {
        error!("{e}");
        return ExitCode::from(1);
    }
    print!("{}", report::markdown(&studies));
    info!("results written to {}", args.out.display());
    ExitCode::SUCCESS
}
