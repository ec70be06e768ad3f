//! Solution exports and the run report. Everything written here is a
//! deterministic function of the configuration: node order is the
//! domain's unknown order, floats use fixed-precision scientific
//! notation, and the JSON field order follows the struct definitions.

use hypcurv::barriers::DiagnosticsReport;
use hypcurv::grid::GridDomain;
use hypcurv::solver::{
    ContinuationReport, Coupling, EpsilonRun, SolveSchedule, SurfaceState,
};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Fixed export header; one row per non-exterior node.
pub const SOLUTION_HEADER: &str =
    "x,y,u,w,nu_vertical,kappa_min,kappa_max,residual";

pub fn solution_file_name(epsilon: f64) -> String {
    format!("solution_eps_{epsilon:.6}.csv")
}

pub fn write_solution_csv(
    path: &Path,
    domain: &GridDomain,
    state: &SurfaceState,
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(SOLUTION_HEADER);
    out.push('\n');
    for id in domain.nodes() {
        let [x, y] = domain.position(id);
        let i = id.0;
        out.push_str(&format!(
            "{x:.16e},{y:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            state.u.at(id),
            state.w[i],
            state.nu_vertical[i],
            state.kappa_min[i],
            state.kappa_max[i],
            state.residual[i],
        ));
    }
    std::fs::write(path, out)
}

/// Read the height column back from an exported solution (row order is
/// the domain's node order).
pub fn read_solution_u(path: &Path, domain: &GridDomain) -> std::io::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(domain.n_nodes());
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let mut cols = line.split(',');
        let u = cols.nth(2).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("malformed row {i} in {}", path.display()),
            )
        })?;
        values.push(u);
    }
    if values.len() != domain.n_nodes() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!(
                "{} has {} rows but the domain has {} nodes",
                path.display(),
                values.len(),
                domain.n_nodes()
            ),
        ));
    }
    Ok(values)
}

#[derive(Serialize)]
pub struct ToleranceBlock {
    pub newton_tol: f64,
    pub monotone_tol: f64,
    pub continuity_steps: usize,
    pub max_newton: usize,
    pub max_outer: usize,
    pub damping: f64,
    pub height_slack: String,
    pub gradient_mp_slack: String,
    pub boundary_nu_widening: String,
}

#[derive(Serialize)]
pub struct EpsilonReport {
    pub epsilon: f64,
    pub outer_steps: usize,
    pub newton_iterations: usize,
    pub monotone_min_step: f64,
    pub polish_cauchy: f64,
    pub polish_min_step: f64,
    pub max_w: f64,
    pub max_kappa: f64,
    pub min_kappa: f64,
    pub boundary_nu_range: [f64; 2],
    pub boundary_w_excess: f64,
    pub m_ratio_max: f64,
    pub m_ratio_a: f64,
    pub m_ratio_at_interior: bool,
    pub max_u_d2u_boundary: f64,
    pub diagnostics: DiagnosticsReport,
}

#[derive(Serialize)]
pub struct TrendBlock {
    pub w_excess_slope: Option<f64>,
    pub w_excess_monotone: bool,
    pub kappa_variation_last_pair: Option<f64>,
    pub kappa_ceiling: Option<f64>,
    pub kappa_within_ceiling: Option<bool>,
}

#[derive(Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub grid_h: f64,
    pub nodes: usize,
    pub sigma: f64,
    pub curvature_function: String,
    pub coupling: String,
    pub sphere_radii: [f64; 2],
    pub tolerances: ToleranceBlock,
    pub epsilon_runs: Vec<EpsilonReport>,
    pub trends: TrendBlock,
    pub failure: Option<String>,
    pub all_hard_checks_passed: bool,
}

pub fn coupling_label(c: &Coupling) -> String {
    match c {
        Coupling::InverseEpsilon => "1/epsilon".to_string(),
        Coupling::Fixed(m) => format!("{m}"),
    }
}

pub fn epsilon_report(run: &EpsilonRun, diagnostics: DiagnosticsReport) -> EpsilonReport {
    EpsilonReport {
        epsilon: run.epsilon,
        outer_steps: run.solve.outer_log.len(),
        newton_iterations: run
            .solve
            .outer_log
            .iter()
            .map(|l| l.newton_iterations)
            .sum(),
        monotone_min_step: run.solve.monotone_min_step,
        polish_cauchy: run.solve.polish_cauchy,
        polish_min_step: run.solve.polish_min_step,
        max_w: run.max_w,
        max_kappa: run.max_kappa,
        min_kappa: run.min_kappa,
        boundary_nu_range: [run.boundary_nu_range.0, run.boundary_nu_range.1],
        boundary_w_excess: run.boundary_w_excess,
        m_ratio_max: run.m_ratio_max,
        m_ratio_a: run.m_ratio_a,
        m_ratio_at_interior: run.m_ratio_at_interior,
        max_u_d2u_boundary: run.max_u_d2u_boundary,
        diagnostics,
    }
}

pub fn run_report(
    config_hash: &str,
    domain: &GridDomain,
    schedule: &SolveSchedule,
    continuation: &ContinuationReport,
    epsilon_runs: Vec<EpsilonReport>,
) -> RunReport {
    let (r1, r2) = domain.sphere_radii();
    let all_hard = continuation.failure.is_none()
        && epsilon_runs.iter().all(|r| r.diagnostics.all_hard_passed());
    RunReport {
        config_hash: config_hash.to_string(),
        grid_h: domain.h(),
        nodes: domain.n_nodes(),
        sigma: schedule.sigma,
        curvature_function: schedule.spec.name(),
        coupling: coupling_label(&schedule.coupling),
        sphere_radii: [r1, r2],
        tolerances: ToleranceBlock {
            newton_tol: schedule.newton_tol,
            monotone_tol: schedule.monotone_tol,
            continuity_steps: schedule.continuity_steps,
            max_newton: schedule.max_newton,
            max_outer: schedule.max_outer,
            damping: schedule.damping,
            height_slack: "2h".to_string(),
            gradient_mp_slack: "5h".to_string(),
            boundary_nu_widening: "3h".to_string(),
        },
        epsilon_runs,
        trends: TrendBlock {
            w_excess_slope: continuation.w_excess_slope,
            w_excess_monotone: continuation.w_excess_monotone,
            kappa_variation_last_pair: continuation.kappa_variation_last_pair,
            kappa_ceiling: continuation.kappa_ceiling,
            kappa_within_ceiling: continuation.kappa_within_ceiling,
        },
        failure: continuation.failure.as_ref().map(|(e, m)| format!("epsilon {e}: {m}")),
        all_hard_checks_passed: all_hard,
    }
}

/// Human-readable convergence log, one line per outer step.
pub fn write_convergence_log(
    path: &Path,
    runs: &[EpsilonRun],
    failure: &Option<(f64, String)>,
) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    for run in runs {
        writeln!(f, "epsilon {:.6}", run.epsilon)?;
        for log in &run.solve.outer_log {
            writeln!(
                f,
                "  outer {:>3}: cauchy {:>12.5e}  min_step {:>12.5e}  newton {:>2}  bisect {}  active {}  weak_zero_order {}",
                log.k,
                log.cauchy,
                log.min_step,
                log.newton_iterations,
                log.bisections,
                log.obstacle_active,
                log.weak_zero_order,
            )?;
        }
        writeln!(
            f,
            "  polish: cauchy {:.5e}  min_step {:.5e}",
            run.solve.polish_cauchy, run.solve.polish_min_step
        )?;
    }
    if let Some((eps, msg)) = failure {
        writeln!(f, "FAILED at epsilon {eps:.6}: {msg}")?;
    }
    Ok(())
}

/// Comparison table of a 2D solve against the radial oracle.
#[derive(Serialize)]
pub struct OracleComparison {
    pub epsilon: f64,
    pub max_discrepancy: f64,
    pub mean_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn interpolate_profile_discrepancy(
    domain: &GridDomain,
    state: &SurfaceState,
    profile: &hypcurv::oracle::RadialProfile,
) -> (f64, f64) {
    let mut worst = 0.0_f64;
    let mut mean = 0.0_f64;
    let mut count = 0usize;
    for id in domain.nodes() {
        let [x, y] = domain.position(id);
        let d = (state.u.at(id) - profile.sample(x.hypot(y))).abs();
        worst = worst.max(d);
        mean += d;
        count += 1;
    }
    (worst, mean / count.max(1) as f64)
}
