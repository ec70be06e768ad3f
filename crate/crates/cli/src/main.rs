//! Batch front end for the constant hyperbolic curvature solver:
//! configuration parsing, run orchestration, solution export,
//! diagnostics report emission and contour plots.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 configuration error.

mod config;
mod export;
mod svg;

use clap::{Parser, Subcommand};
use config::RunConfig;
use hypcurv::barriers::{self, DiagnosticsParams};
use hypcurv::grid::{GridDomain, ScalarField};
use hypcurv::oracle;
use hypcurv::solver::{self, SurfaceState};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hypcurv",
    about = "Constant hyperbolic curvature graphs over planar domains: \
             batch solves, property validation and oracle comparisons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured epsilon ladder; write solution grids, a
    /// JSON diagnostics report and contour plots.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property suites (structure conditions, spectral and
    /// derivative identities, threshold cubic); no PDE solves.
    Validate {
        /// Seed for property-test sampling.
        #[arg(long, default_value_t = 0xC0FFEE)]
        seed: u64,
    },
    /// Solve and compare against the radial shooting oracle
    /// (disk or annulus domains only).
    OracleCompare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recompute diagnostics from previously exported solutions.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, out, quiet),
        Command::Validate { seed } => cmd_validate(seed, quiet),
        Command::OracleCompare { config } => cmd_oracle_compare(&config, quiet),
        Command::Report { config, out } => cmd_report(&config, out, quiet),
    }
}

fn load_config(path: &Path, out: Option<PathBuf>) -> Result<RunConfig, ExitCode> {
    match config::load(path) {
        Ok(mut cfg) => {
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            Ok(cfg)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(2))
        }
    }
}

fn build_domain(cfg: &RunConfig) -> Result<GridDomain, ExitCode> {
    match GridDomain::build(cfg.shape.clone(), cfg.grid_h) {
        Ok(d) => Ok(d),
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(2))
        }
    }
}

fn cmd_solve(config_path: &Path, out: Option<PathBuf>, quiet: bool) -> ExitCode {
    let cfg = match load_config(config_path, out) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let domain = match build_domain(&cfg) {
        Ok(d) => d,
        Err(code) => return code,
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.out_dir) {
        eprintln!("error: cannot create output directory: {e}");
        return ExitCode::from(2);
    }
    if !quiet {
        println!(
            "solving {} nodes, sigma {}, {} epsilon rung(s), f = {}",
            domain.n_nodes(),
            cfg.schedule.sigma,
            cfg.schedule.epsilon_ladder.len(),
            cfg.schedule.spec.name()
        );
    }

    let continuation = match solver::epsilon_continuation(&domain, &cfg.schedule) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let log_path = cfg.out_dir.join("convergence.log");
    if let Err(e) =
        export::write_convergence_log(&log_path, &continuation.runs, &continuation.failure)
    {
        eprintln!("error: cannot write convergence log: {e}");
        return ExitCode::from(1);
    }

    let mut epsilon_reports = Vec::new();
    for run in &continuation.runs {
        let diagnostics = barriers::run_diagnostics(
            &domain,
            &run.solve.state,
            &cfg.schedule.spec,
            &DiagnosticsParams { newton_tol: cfg.schedule.newton_tol, ratio_a: None },
        );
        if cfg.write_solutions {
            let path = cfg.out_dir.join(export::solution_file_name(run.epsilon));
            if let Err(e) = export::write_solution_csv(&path, &domain, &run.solve.state) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        if !quiet {
            println!(
                "  epsilon {:.6}: {} outer steps, residual {:.3e}, min step {:.3e}, hard checks {}",
                run.epsilon,
                run.solve.outer_log.len(),
                run.solve.state.max_abs_residual(),
                run.solve.monotone_min_step,
                if diagnostics.all_hard_passed() { "pass" } else { "FAIL" },
            );
        }
        epsilon_reports.push(export::epsilon_report(run, diagnostics));
    }

    if cfg.write_svg {
        if let Some(run) = continuation.runs.last() {
            let state = &run.solve.state;
            let u_svg = svg::contour_svg(
                &domain,
                &|id| state.u.at(id),
                &format!("u, epsilon {:.6}", run.epsilon),
                12,
            );
            let k_svg = svg::contour_svg(
                &domain,
                &|id| state.kappa_max[id.0],
                &format!("kappa_max, epsilon {:.6}", run.epsilon),
                12,
            );
            if std::fs::write(cfg.out_dir.join("contours_u.svg"), u_svg).is_err()
                || std::fs::write(cfg.out_dir.join("contours_kappa_max.svg"), k_svg)
                    .is_err()
            {
                eprintln!("error: cannot write contour plots");
                return ExitCode::from(1);
            }
        }
    }

    let report = export::run_report(
        &cfg.config_hash,
        &domain,
        &cfg.schedule,
        &continuation,
        epsilon_reports,
    );
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Err(e) = std::fs::write(cfg.out_dir.join("report.json"), json) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(1);
    }

    if let Some((eps, msg)) = &continuation.failure {
        eprintln!(
            "numerical failure at epsilon {eps}: {msg} (log: {})",
            log_path.display()
        );
        return ExitCode::from(1);
    }
    if !report.all_hard_checks_passed {
        eprintln!("hard diagnostic checks failed (see report.json)");
        return ExitCode::from(1);
    }
    if !quiet {
        println!("report written to {}", cfg.out_dir.join("report.json").display());
    }
    ExitCode::SUCCESS
}

fn cmd_validate(seed: u64, quiet: bool) -> ExitCode {
    let suites = hypcurv::validate::run_all(seed);
    let mut ok = true;
    for suite in &suites {
        if !quiet || !suite.pass {
            println!(
                "{:<28} {:>6} samples  {:>3} failures  {}",
                suite.name,
                suite.samples,
                suite.failures,
                if suite.pass { "pass" } else { "FAIL" }
            );
            for (name, value) in &suite.stats {
                println!("    {name} = {value:.6e}");
            }
        }
        if !suite.pass {
            ok = false;
            for case in &suite.counterexamples {
                println!("    counterexample: {case}");
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_oracle_compare(config_path: &Path, quiet: bool) -> ExitCode {
    let cfg = match load_config(config_path, None) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let radial = match cfg.shape {
        hypcurv::grid::Shape::Disk { r } => oracle::RadialDomain::Disk { r_b: r },
        hypcurv::grid::Shape::Annulus { r_inner, r_outer } => {
            oracle::RadialDomain::Annulus { r_in: r_inner, r_out: r_outer }
        }
        _ => {
            eprintln!(
                "error: oracle-compare needs a rotationally symmetric domain (disk or annulus)"
            );
            return ExitCode::from(2);
        }
    };
    let family =
        match oracle::RadialFamily::new(cfg.schedule.spec.k(), cfg.schedule.spec.l()) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
    let domain = match build_domain(&cfg) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let h = domain.h();
    let tolerance = match radial {
        oracle::RadialDomain::Disk { .. } => 5.0 * h * h,
        oracle::RadialDomain::Annulus { .. } => (2e-3_f64).max(5.0 * h * h),
    };

    let mut all_ok = true;
    let mut rows = Vec::new();
    if !quiet {
        println!("epsilon      max|u2D - u_oracle|  mean          tolerance    status");
    }
    for &eps in &cfg.schedule.epsilon_ladder {
        let solve = match solver::solve_fixed_epsilon(&domain, &cfg.schedule, eps, None) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("numerical failure at epsilon {eps}: {e}");
                return ExitCode::from(1);
            }
        };
        let profile = match oracle::shoot(radial, &family, cfg.schedule.sigma, eps) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("oracle failure at epsilon {eps}: {e}");
                return ExitCode::from(1);
            }
        };
        let (max_d, mean_d) =
            export::interpolate_profile_discrepancy(&domain, &solve.state, &profile);
        let pass = max_d <= tolerance;
        all_ok &= pass;
        if !quiet || !pass {
            println!(
                "{eps:<12.6} {max_d:<20.6e} {mean_d:<13.6e} {tolerance:<12.6e} {}",
                if pass { "pass" } else { "FAIL" }
            );
        }
        rows.push(export::OracleComparison {
            epsilon: eps,
            max_discrepancy: max_d,
            mean_discrepancy: mean_d,
            tolerance,
            pass,
        });
    }
    let _ = std::fs::create_dir_all(&cfg.out_dir);
    let json = serde_json::to_string_pretty(&rows).expect("rows serialize");
    let _ = std::fs::write(cfg.out_dir.join("oracle_compare.json"), json);
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_report(config_path: &Path, out: Option<PathBuf>, quiet: bool) -> ExitCode {
    let cfg = match load_config(config_path, out) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let domain = match build_domain(&cfg) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let mut reports = Vec::new();
    for &eps in &cfg.schedule.epsilon_ladder {
        let path = cfg.out_dir.join(export::solution_file_name(eps));
        let values = match export::read_solution_u(&path, &domain) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        };
        let state = SurfaceState::analyze(
            &domain,
            ScalarField { values },
            &cfg.schedule.spec,
            cfg.schedule.sigma,
            eps,
        );
        let diagnostics = barriers::run_diagnostics(
            &domain,
            &state,
            &cfg.schedule.spec,
            &DiagnosticsParams { newton_tol: cfg.schedule.newton_tol, ratio_a: None },
        );
        if !quiet {
            println!(
                "epsilon {:.6}: residual {:.3e}, hard checks {}",
                eps,
                state.max_abs_residual(),
                if diagnostics.all_hard_passed() { "pass" } else { "FAIL" }
            );
        }
        reports.push(diagnostics);
    }
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    println!("{json}");
    if reports.iter().all(|r| r.all_hard_passed()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
