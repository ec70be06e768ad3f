//! Solves on domains without rotational symmetry, where no oracle
//! exists: the barrier diagnostics are the correctness evidence.

use hypcurv::barriers::{run_diagnostics, DiagnosticsParams};
use hypcurv::grid::{GridDomain, Shape};
use hypcurv::solver::{solve_fixed_epsilon, Coupling, SolveSchedule};
use hypcurv::symfunc::CurvatureFunctionSpec;

fn solve_and_check(shape: Shape, sigma: f64, k: usize, l: usize, h: f64, eps: f64) {
    let spec = CurvatureFunctionSpec::new(2, k, l).unwrap();
    let mut schedule = SolveSchedule::new(sigma, spec).unwrap();
    schedule.coupling = Coupling::Fixed(1.0);
    let domain = GridDomain::build(shape, h).unwrap();
    let solve = solve_fixed_epsilon(&domain, &schedule, eps, None).unwrap();
    assert!(solve.state.all_admissible());
    assert!(solve.state.max_abs_residual() <= 2.0 * schedule.newton_tol);
    assert!(solve.monotone_min_step >= -1e-9);
    let report = run_diagnostics(
        &domain,
        &solve.state,
        &schedule.spec,
        &DiagnosticsParams { newton_tol: schedule.newton_tol, ratio_a: None },
    );
    for check in &report.checks {
        assert!(
            check.pass || !check.hard,
            "{:?} failed on {:?}: {check:?}",
            check.name,
            domain.shape()
        );
    }
}

#[test]
fn ellipse_solve_passes_every_barrier_check() {
    solve_and_check(Shape::Ellipse { a: 0.85, b: 0.55 }, 0.6, 2, 1, 1.0 / 32.0, 0.02);
}

#[test]
fn blob_solve_passes_every_barrier_check() {
    solve_and_check(
        Shape::Blob { r0: 0.7, amplitude: 0.12, lobes: 3, phase: 0.4 },
        0.55,
        1,
        0,
        1.0 / 32.0,
        0.03,
    );
}

#[test]
fn high_curvature_disk_solve() {
    solve_and_check(Shape::Disk { r: 0.78 }, 0.85, 2, 0, 1.0 / 32.0, 0.02);
}
