//! The existence iteration: for fixed boundary height `ε` solve
//! `G(D²u, Du, u) = ψ(x, u)` with `u = ε` on `∂Ω` by a monotone outer
//! iteration whose inner step is a continuity-method Newton solve, then
//! continue `ε` downward along a ladder.
//!
//! The scalar operator is `G = F(A^v[u]) / u`, so the equation
//! `G = σ/u` prescribes hyperbolic curvature `f(κ) = σ`. Each outer
//! step solves `u G = σ + M (u - u_k)` for the next iterate; the
//! coupling term makes the linearized operator invertible and the
//! iterates increase from `u_0 ≡ ε`. Every accepted Newton iterate is
//! kept admissible (all hyperbolic principal curvatures positive) by a
//! damped line search.
//!
//! Outer-iteration assembly is strictly sequential and allocation
//! patterns are fixed, so identical inputs give bitwise identical
//! results.

mod assemble;
mod linsolve;

pub use assemble::{assemble_linearized, LinearizedSystem, Source};

use crate::barriers;
use crate::grid::{BoundaryTrace, GridDomain, GridError, ScalarField};
use crate::hypgeom::{self, HypGeomError, PointJet};
use crate::matrix::Matrix;
use crate::symfunc::{self, CurvatureFunctionSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solve schedule: {reason}")]
    Schedule { reason: String },
    #[error("jet is not admissible: principal curvatures {eigenvalues:?}")]
    InadmissibleJet { eigenvalues: Vec<f64> },
    #[error("iterate not admissible at node ({x}, {y}): {detail}")]
    InadmissibleNode { x: f64, y: f64, detail: String },
    #[error("iterate not positive at node ({x}, {y}): value {value}")]
    NonPositiveIterate { x: f64, y: f64, value: f64 },
    #[error("sparse linear solve failed: {detail}")]
    LinearSolve { detail: String },
    #[error("continuity method stalled after t = {t} (best residual {residual})")]
    ContinuityFailure { t: f64, residual: f64 },
    #[error("outer iteration cap {cap} reached; Cauchy differences {history:?}")]
    OuterIterationCap { cap: usize, history: Vec<f64> },
    #[error("epsilon {epsilon} too large for barriers on this domain (limit {limit})")]
    EpsilonTooLarge { epsilon: f64, limit: f64 },
    #[error(transparent)]
    Geometry(#[from] HypGeomError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Coupling strength `M` in the outer-step source `Ψ = σ + M (u - u_k)`.
///
/// `InverseEpsilon` is the strong coupling `M = 1/ε` of the existence
/// argument; any `M ∈ [0, 1/ε]` keeps the iteration valid and smaller
/// fixed values converge in far fewer outer steps while preserving
/// monotonicity (which is asserted per step regardless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    InverseEpsilon,
    Fixed(f64),
}

impl Coupling {
    pub fn m(&self, epsilon: f64) -> f64 {
        match *self {
            Coupling::InverseEpsilon => 1.0 / epsilon,
            Coupling::Fixed(m) => m,
        }
    }
}

/// Everything a run needs: curvature target, continuation ladder and
/// iteration policy.
#[derive(Debug, Clone)]
pub struct SolveSchedule {
    pub sigma: f64,
    pub spec: CurvatureFunctionSpec,
    /// Strictly decreasing positive boundary heights.
    pub epsilon_ladder: Vec<f64>,
    /// Initial number of continuity steps for the first outer solve.
    pub continuity_steps: usize,
    /// Tolerance on `‖u·G - Ψ‖_∞`.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Backtracking factor of the damped line search.
    pub damping: f64,
    /// Outer-iteration Cauchy tolerance on `‖u_{k+1} - u_k‖_∞`.
    pub monotone_tol: f64,
    pub max_outer: usize,
    pub coupling: Coupling,
}

impl SolveSchedule {
    pub fn new(sigma: f64, spec: CurvatureFunctionSpec) -> Result<Self, SolverError> {
        let s = SolveSchedule {
            sigma,
            spec,
            epsilon_ladder: (0..6).map(|j| 0.04 * 0.5_f64.powi(j)).collect(),
            continuity_steps: 8,
            newton_tol: 1e-9,
            max_newton: 30,
            damping: 0.5,
            monotone_tol: 1e-8,
            max_outer: 400,
            coupling: Coupling::InverseEpsilon,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let fail = |reason: &str| Err(SolverError::Schedule { reason: reason.to_string() });
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return fail("sigma must lie in (0, 1)");
        }
        if self.epsilon_ladder.is_empty() {
            return fail("epsilon ladder must not be empty");
        }
        if !self.epsilon_ladder.iter().all(|&e| e > 0.0) {
            return fail("epsilon ladder entries must be positive");
        }
        if !self.epsilon_ladder.windows(2).all(|w| w[1] < w[0]) {
            return fail("epsilon ladder must be strictly decreasing");
        }
        if self.continuity_steps < 4 {
            return fail("continuity_steps must be at least 4");
        }
        if !(self.newton_tol > 0.0 && self.monotone_tol > 0.0) {
            return fail("tolerances must be positive");
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return fail("damping must lie in (0, 1)");
        }
        if let Coupling::Fixed(m) = self.coupling {
            if !(m >= 0.0) {
                return fail("fixed coupling must be nonnegative");
            }
        }
        Ok(())
    }
}

/// First derivatives of `G = F(A^v)/u` with respect to `D²u`, `Du`, `u`.
#[derive(Debug, Clone)]
pub struct GDerivatives {
    /// `G^{st} = (1/w) F^{ij} γ^{is} γ^{tj}`, positive definite on
    /// admissible jets.
    pub g_st: Matrix,
    /// `G^s = ∂G/∂u_s`.
    pub g_s: Vec<f64>,
    /// `G_u = -(Σ F^{ii}) / (u² w)`.
    pub g_u: f64,
}

pub(crate) fn g_derivatives_inner(
    jet: &PointJet,
    spec: &CurvatureFunctionSpec,
) -> Result<(f64, GDerivatives), HypGeomError> {
    let n = jet.dim();
    let u = jet.u;
    let w = jet.w();
    let (gup, _) = hypgeom::gamma_matrix(&jet.du);
    let s = gup.matmul(&jet.d2u).matmul(&gup).symmetrized();
    let av = Matrix::identity(n).add(&s.scale(u)).scale(1.0 / w);
    let (f, fij) = hypgeom::f_value_and_derivative(spec, &av)?;
    let g = f / u;

    let g_st = gup.matmul(&fij).matmul(&gup).scale(1.0 / w).symmetrized();
    let g_u = -fij.trace() / (u * u * w);

    // G^s in the three-term form: the trace term, the A-F cross term and
    // the gradient term.
    let fa_du = fij.matvec(&av.matvec(&jet.du)); // F·(A·Du)
    let af_du = av.matvec(&fij.matvec(&jet.du)); // A·(F·Du)
    let f_du = fij.matvec(&jet.du);
    let trace_fa = fij.frob_dot(&av);
    let mut cross = vec![0.0; n];
    for i in 0..n {
        cross[i] = w * fa_du[i] + af_du[i];
    }
    let t2 = gup.matvec(&cross);
    let t3 = gup.matvec(&f_du);
    let mut g_s = vec![0.0; n];
    for sdx in 0..n {
        g_s[sdx] = -jet.du[sdx] / (w * w * u) * trace_fa
            - 2.0 / (w * u * (1.0 + w)) * t2[sdx]
            + 2.0 / (w * w * u) * t3[sdx];
    }
    Ok((g, GDerivatives { g_st, g_s, g_u }))
}

fn map_jet_err(e: HypGeomError) -> SolverError {
    match e {
        HypGeomError::SpectrumOutsideCone { eigenvalues } => {
            SolverError::InadmissibleJet { eigenvalues }
        }
        other => SolverError::Geometry(other),
    }
}

/// `G(D²u, Du, u) = F(A^v[u]) / u` at one admissible jet.
pub fn g_eval(jet: &PointJet, spec: &CurvatureFunctionSpec) -> Result<f64, SolverError> {
    let data = hypgeom::vertical_curvature_data(jet);
    if !data.admissible {
        return Err(SolverError::InadmissibleJet { eigenvalues: data.kappa });
    }
    let f = symfunc::eval_f(spec, &data.kappa)
        .expect("admissible curvatures lie in the cone");
    Ok(f / jet.u)
}

/// `G` and its first derivatives at one admissible jet.
pub fn g_derivatives(
    jet: &PointJet,
    spec: &CurvatureFunctionSpec,
) -> Result<(f64, GDerivatives), SolverError> {
    g_derivatives_inner(jet, spec).map_err(map_jet_err)
}

/// A height field together with the pointwise geometry derived from it.
#[derive(Debug, Clone)]
pub struct SurfaceState {
    pub u: ScalarField,
    pub sigma: f64,
    pub epsilon: f64,
    pub du: Vec<[f64; 2]>,
    pub w: Vec<f64>,
    pub nu_vertical: Vec<f64>,
    pub kappa_min: Vec<f64>,
    pub kappa_max: Vec<f64>,
    pub admissible: Vec<bool>,
    /// `u·G - σ = f(κ) - σ` per node (NaN where inadmissible).
    pub residual: Vec<f64>,
    /// Frobenius norm of `D²u` per node.
    pub d2u_norm: Vec<f64>,
}

impl SurfaceState {
    pub fn analyze(
        domain: &GridDomain,
        u: ScalarField,
        spec: &CurvatureFunctionSpec,
        sigma: f64,
        epsilon: f64,
    ) -> SurfaceState {
        let n = domain.n_nodes();
        let bc = BoundaryTrace::Constant(epsilon);
        let mut du = vec![[0.0; 2]; n];
        let mut wv = vec![f64::NAN; n];
        let mut nu = vec![f64::NAN; n];
        let mut kmin = vec![f64::NAN; n];
        let mut kmax = vec![f64::NAN; n];
        let mut adm = vec![false; n];
        let mut res = vec![f64::NAN; n];
        let mut d2n = vec![f64::NAN; n];
        for id in domain.nodes() {
            let i = id.0;
            let [ux, uy, uxx, uyy, uxy] = domain.jet_components(&u, id, &bc);
            du[i] = [ux, uy];
            let wval = (1.0 + ux * ux + uy * uy).sqrt();
            wv[i] = wval;
            nu[i] = 1.0 / wval;
            let d2u = Matrix::from_rows(&[&[uxx, uxy], &[uxy, uyy]]);
            d2n[i] = d2u.frob_norm();
            let uval = u.at(id);
            if !(uval > 0.0) {
                continue;
            }
            let jet = PointJet::new(uval, vec![ux, uy], d2u)
                .expect("assembled jets are symmetric");
            let data = hypgeom::vertical_curvature_data(&jet);
            kmin[i] = data.kappa[0];
            kmax[i] = data.kappa[1];
            adm[i] = data.admissible;
            if data.admissible {
                let f = symfunc::eval_f(spec, &data.kappa)
                    .expect("admissible curvatures lie in the cone");
                res[i] = f - sigma;
            }
        }
        SurfaceState {
            u,
            sigma,
            epsilon,
            du,
            w: wv,
            nu_vertical: nu,
            kappa_min: kmin,
            kappa_max: kmax,
            admissible: adm,
            residual: res,
            d2u_norm: d2n,
        }
    }

    pub fn all_admissible(&self) -> bool {
        self.admissible.iter().all(|&a| a)
    }

    /// `‖u·G - σ‖_∞`; infinite if any node is inadmissible.
    pub fn max_abs_residual(&self) -> f64 {
        self.residual
            .iter()
            .map(|r| if r.is_nan() { f64::INFINITY } else { r.abs() })
            .fold(0.0, f64::max)
    }
}

/// Outcome of one damped Newton solve.
struct NewtonRun {
    u: ScalarField,
    residual: f64,
    converged: bool,
    iterations: usize,
    /// Nodes held at the lower obstacle on exit.
    obstacle_active: usize,
    /// Zero-order diagnostics of the last assembled system.
    sign_violations: usize,
    weak_zero_order: usize,
    min_gst_eigenvalue: f64,
}

/// `‖·‖_∞` over nodes not held at the obstacle.
fn inactive_inf(res: &[f64], active: &[bool]) -> f64 {
    res.iter()
        .zip(active)
        .filter(|(_, &a)| !a)
        .map(|(r, _)| r.abs())
        .fold(0.0, f64::max)
}

/// Damped Newton with an optional lower obstacle: iterates that dip
/// under the obstacle are clamped onto it and their rows replaced by
/// identities for the remainder of this solve (releasing within a
/// solve can cycle at degenerate contacts; the caller starts every
/// outer step with a fresh active set, and the final limit solve is
/// unconstrained). The iteration in the class `{u ≥ u_k}` is what
/// makes the outer sequence monotone at the discrete level, where the
/// cut-cell stencils do not satisfy a comparison principle on their
/// own.
fn damped_newton(
    domain: &GridDomain,
    u0: ScalarField,
    source: &Source,
    spec: &CurvatureFunctionSpec,
    schedule: &SolveSchedule,
    epsilon: f64,
    obstacle: Option<&ScalarField>,
) -> Result<NewtonRun, SolverError> {
    let n = domain.n_nodes();
    let mut u = u0;
    let mut active = vec![false; n];
    let mut residual =
        match assemble::scaled_residual_vector(domain, &u, source, spec, epsilon) {
            Some(r) => inactive_inf(&r, &active),
            None => {
                return Err(SolverError::Schedule {
                    reason: "newton started from an inadmissible iterate".to_string(),
                })
            }
        };
    let mut recent: Vec<f64> = vec![residual];
    let mut stats = (0usize, 0usize, f64::INFINITY);
    let done = |u: ScalarField, residual: f64, converged: bool, iterations: usize,
                active: &[bool], stats: (usize, usize, f64)| NewtonRun {
        u,
        residual,
        converged,
        iterations,
        obstacle_active: active.iter().filter(|&&a| a).count(),
        sign_violations: stats.0,
        weak_zero_order: stats.1,
        min_gst_eigenvalue: stats.2,
    };
    for iter in 0..=schedule.max_newton {
        if residual <= schedule.newton_tol {
            return Ok(done(u, residual, true, iter, &active, stats));
        }
        if iter == schedule.max_newton {
            break;
        }
        let mut sys =
            assemble_linearized(domain, &u, source, spec, epsilon, schedule.sigma)?;
        stats = (
            sys.sign_violations.len(),
            sys.weak_zero_order.len(),
            sys.min_gst_eigenvalue,
        );
        if active.iter().any(|&a| a) {
            sys.triplets.retain(|&(r, _, _)| !active[r]);
            for i in 0..n {
                if active[i] {
                    sys.triplets.push((i, i, 1.0));
                    sys.rhs[i] = 0.0;
                }
            }
        }
        let delta = match linsolve::solve_sparse(sys.n, &sys.triplets, &sys.rhs) {
            Ok(d) => d,
            // a (near-)singular linearization is handled like
            // stagnation: the caller shrinks the continuity step
            Err(_) => return Ok(done(u, residual, false, iter, &active, stats)),
        };
        // damped line search: admissibility and residual decrease
        let mut alpha = 1.0_f64;
        let mut accepted = false;
        while alpha >= 2.0_f64.powi(-20) {
            let mut trial = u.clone();
            for (v, d) in trial.values.iter_mut().zip(&delta) {
                *v += alpha * d;
            }
            // clamp violations onto the obstacle; a clamped node is a
            // binding constraint and joins the active set
            let mut trial_active = active.clone();
            if let Some(ob) = obstacle {
                for i in 0..n {
                    if trial.values[i] < ob.values[i] {
                        trial.values[i] = ob.values[i];
                        trial_active[i] = true;
                    }
                }
            }
            if let Some(rv) =
                assemble::scaled_residual_vector(domain, &trial, source, spec, epsilon)
            {
                let r = inactive_inf(&rv, &trial_active);
                if r < residual {
                    u = trial;
                    active = trial_active;
                    residual = r;
                    accepted = true;
                    break;
                }
            }
            alpha *= schedule.damping;
        }
        if !accepted {
            return Ok(done(u, residual, false, iter, &active, stats));
        }
        recent.push(residual);
        // stagnation: under 1% total reduction across five damped steps
        if recent.len() > 5 {
            let old = recent[recent.len() - 6];
            if residual > 0.99 * old {
                return Ok(done(u, residual, false, iter + 1, &active, stats));
            }
        }
    }
    let r = residual;
    Ok(done(u, r, false, schedule.max_newton, &active, stats))
}

/// The homotopy families solved by [`continuity_solve`].
pub enum ContinuityFamily<'a> {
    /// `Ψ_t = t(σ - Mε) + (tM + (1-t)/ε) u`: connects the constant
    /// field `u ≡ ε` (exact at `t = 0`) to the first outer problem.
    FirstStep,
    /// `Ψ_t = σ + M (u - (t u_k + (1-t) u_prev))`: connects consecutive
    /// outer problems; `u_k` solves `t = 0`.
    Coupled { u_k: &'a ScalarField, u_prev: &'a ScalarField },
    /// `Ψ = σ`: the limit problem, used as the final polish (an outer
    /// step with `M = 0`).
    Direct,
}

/// Log of one continuity solve.
#[derive(Debug, Clone, Default)]
pub struct ContinuityLog {
    pub t_accepted: Vec<f64>,
    pub bisections: usize,
    pub newton_iterations: usize,
    /// Nodes held at the lower obstacle when the final `t`-step ended.
    pub obstacle_active: usize,
    pub sign_violations: usize,
    pub weak_zero_order: usize,
    pub min_gst_eigenvalue: f64,
}

fn family_source(
    family: &ContinuityFamily,
    t: f64,
    m: f64,
    sigma: f64,
    epsilon: f64,
    domain: &GridDomain,
) -> Source {
    match family {
        ContinuityFamily::FirstStep => Source {
            constant: t * (sigma - m * epsilon),
            linear_u: t * m + (1.0 - t) / epsilon,
            offset: None,
        },
        ContinuityFamily::Coupled { u_k, u_prev } => {
            let mut offset = ScalarField::constant(domain, 0.0);
            for i in 0..offset.values.len() {
                offset.values[i] =
                    m * (t * u_k.values[i] + (1.0 - t) * u_prev.values[i]);
            }
            Source { constant: sigma, linear_u: m, offset: Some(offset) }
        }
        ContinuityFamily::Direct => {
            Source { constant: sigma, linear_u: 0.0, offset: None }
        }
    }
}

/// Solve the `t = 1` problem of a continuity family starting from an
/// admissible `u_start` that solves (or nearly solves) `t = 0`. Each
/// accepted `t`-step is a damped Newton solve; stagnation bisects the
/// continuity step down to a minimal width.
pub fn continuity_solve(
    domain: &GridDomain,
    u_start: ScalarField,
    family: &ContinuityFamily,
    schedule: &SolveSchedule,
    epsilon: f64,
) -> Result<(ScalarField, ContinuityLog), SolverError> {
    let m = schedule.coupling.m(epsilon);
    let sigma = schedule.sigma;
    let mut log = ContinuityLog { min_gst_eigenvalue: f64::INFINITY, ..Default::default() };

    // A family that is constant in t collapses to a single solve.
    let constant_in_t = match family {
        ContinuityFamily::Direct => true,
        ContinuityFamily::Coupled { u_k, u_prev } => u_k.max_abs_diff(u_prev) == 0.0,
        ContinuityFamily::FirstStep => false,
    };

    // the monotone iteration runs in the class u ≥ u_k above the
    // previous iterate (u_0 ≡ ε for the first leg); the limit solve is
    // free
    let first_obstacle;
    let obstacle: Option<&ScalarField> = match family {
        ContinuityFamily::FirstStep => {
            first_obstacle = ScalarField::constant(domain, epsilon);
            Some(&first_obstacle)
        }
        ContinuityFamily::Coupled { u_k, .. } => Some(u_k),
        ContinuityFamily::Direct => None,
    };

    let run_newton = |u: ScalarField,
                      t: f64,
                      log: &mut ContinuityLog|
     -> Result<NewtonRun, SolverError> {
        let source = family_source(family, t, m, sigma, epsilon, domain);
        let run = damped_newton(
            domain, u, &source, &schedule.spec, schedule, epsilon, obstacle,
        )?;
        log.newton_iterations += run.iterations;
        log.obstacle_active = run.obstacle_active;
        log.sign_violations = run.sign_violations;
        log.weak_zero_order = run.weak_zero_order;
        log.min_gst_eigenvalue = log.min_gst_eigenvalue.min(run.min_gst_eigenvalue);
        Ok(run)
    };

    if constant_in_t {
        let run = run_newton(u_start, 1.0, &mut log)?;
        if !run.converged {
            return Err(SolverError::ContinuityFailure { t: 1.0, residual: run.residual });
        }
        log.t_accepted.push(1.0);
        return Ok((run.u, log));
    }

    // settle the t = 0 problem first (free when u_start solves it)
    let run0 = run_newton(u_start, 0.0, &mut log)?;
    if !run0.converged {
        return Err(SolverError::ContinuityFailure { t: 0.0, residual: run0.residual });
    }
    let mut u = run0.u;
    log.t_accepted.push(0.0);

    let initial_dt = match family {
        ContinuityFamily::FirstStep => 1.0 / schedule.continuity_steps as f64,
        _ => 1.0,
    };
    let mut t = 0.0_f64;
    let mut dt = initial_dt;
    while t < 1.0 {
        let t_next = (t + dt).min(1.0);
        let run = run_newton(u.clone(), t_next, &mut log)?;
        if run.converged {
            u = run.u;
            t = t_next;
            log.t_accepted.push(t);
            dt = (dt * 2.0).min(initial_dt.max(1.0 - t));
        } else {
            log.bisections += 1;
            dt *= 0.5;
            if dt < 1.0 / 1024.0 {
                // report the last parameter that was actually solved
                return Err(SolverError::ContinuityFailure {
                    t,
                    residual: run.residual,
                });
            }
        }
    }
    Ok((u, log))
}

/// Per-outer-step record of the monotone iteration.
#[derive(Debug, Clone)]
pub struct OuterStepLog {
    pub k: usize,
    /// `‖u_{k+1} - u_k‖_∞`.
    pub cauchy: f64,
    /// `min(u_{k+1} - u_k)` over nodes; monotonicity means ≥ -1e-9.
    pub min_step: f64,
    pub newton_iterations: usize,
    pub bisections: usize,
    pub obstacle_active: usize,
    pub sign_violations: usize,
    pub weak_zero_order: usize,
}

/// Result of one fixed-ε solve.
pub struct FixedEpsilonSolve {
    pub state: SurfaceState,
    /// The monotone sequence steps (the polish is logged separately).
    pub outer_log: Vec<OuterStepLog>,
    /// Worst `min(u_{k+1} - u_k)` across the monotone outer steps.
    pub monotone_min_step: f64,
    /// Movement of the final limit solve `Ψ = σ`. Where the obstacle
    /// held iterates up against cut-cell wobble, this step releases
    /// that slack downward; it is not part of the monotone sequence.
    pub polish_cauchy: f64,
    pub polish_min_step: f64,
    pub warm_started: bool,
}

/// Largest boundary height for which the equidistance-sphere barriers
/// stay meaningful on this domain.
pub fn barrier_epsilon_limit(domain: &GridDomain, sigma: f64) -> f64 {
    let (_, hi) = barriers::height_bounds(0.0, domain.diameter(), sigma, sigma, 0.0);
    0.5 * hi
}

/// Monotone outer iteration at fixed `ε`, starting from `u_0 ≡ ε` (or a
/// supplied admissible warm start) and iterating
/// `u_{k+1} = continuity_solve(u_k, …)` in the class `{u ≥ u_k}` until
/// the Cauchy difference drops below `monotone_tol`, then polishing
/// with the `M = 0` source `Ψ = σ` so the returned state solves
/// `‖u·G - σ‖_∞ ≤ 2·newton_tol`. Cold starts give a genuinely
/// monotone increasing sequence; warm starts that exceed the solution
/// anywhere cannot.
pub fn solve_fixed_epsilon(
    domain: &GridDomain,
    schedule: &SolveSchedule,
    epsilon: f64,
    warm_start: Option<&ScalarField>,
) -> Result<FixedEpsilonSolve, SolverError> {
    schedule.validate()?;
    let limit = barrier_epsilon_limit(domain, schedule.sigma);
    if !(epsilon > 0.0) || epsilon > limit {
        return Err(SolverError::EpsilonTooLarge { epsilon, limit });
    }

    // warm starts must be admissible under the new boundary data
    let probe = Source { constant: schedule.sigma, linear_u: 0.0, offset: None };
    let warm = warm_start.and_then(|u| {
        assemble::scaled_residual_vector(domain, u, &probe, &schedule.spec, epsilon)
            .map(|_| u.clone())
    });
    let warm_started = warm.is_some();

    let mut outer_log = Vec::new();
    let mut monotone_min_step = f64::INFINITY;
    let mut history = Vec::new();

    let (mut u_k, mut u_prev) = match warm {
        Some(u) => (u.clone(), u),
        None => {
            let u0 = ScalarField::constant(domain, epsilon);
            (u0.clone(), u0)
        }
    };
    let mut first = !warm_started;

    let mut k = 0usize;
    loop {
        if k >= schedule.max_outer {
            return Err(SolverError::OuterIterationCap {
                cap: schedule.max_outer,
                history,
            });
        }
        let (u_next, log) = if first {
            first = false;
            continuity_solve(
                domain,
                u_k.clone(),
                &ContinuityFamily::FirstStep,
                schedule,
                epsilon,
            )?
        } else {
            continuity_solve(
                domain,
                u_k.clone(),
                &ContinuityFamily::Coupled { u_k: &u_k, u_prev: &u_prev },
                schedule,
                epsilon,
            )?
        };
        let cauchy = u_next.max_abs_diff(&u_k);
        let min_step = u_next.min_diff(&u_k);
        monotone_min_step = monotone_min_step.min(min_step);
        history.push(cauchy);
        outer_log.push(OuterStepLog {
            k,
            cauchy,
            min_step,
            newton_iterations: log.newton_iterations,
            bisections: log.bisections,
            obstacle_active: log.obstacle_active,
            sign_violations: log.sign_violations,
            weak_zero_order: log.weak_zero_order,
        });
        u_prev = std::mem::replace(&mut u_k, u_next);
        k += 1;
        if cauchy <= schedule.monotone_tol {
            break;
        }
    }

    // limit solve: the source Ψ = σ the coupled problems converge to;
    // this lands the residual at the Newton tolerance and releases any
    // slack the obstacle accumulated against cut-cell wobble
    let (u_final, _plog) =
        continuity_solve(domain, u_k.clone(), &ContinuityFamily::Direct, schedule, epsilon)?;
    let polish_min_step = u_final.min_diff(&u_k);
    let polish_cauchy = u_final.max_abs_diff(&u_k);

    let state =
        SurfaceState::analyze(domain, u_final, &schedule.spec, schedule.sigma, epsilon);
    Ok(FixedEpsilonSolve {
        state,
        outer_log,
        monotone_min_step,
        polish_cauchy,
        polish_min_step,
        warm_started,
    })
}

/// Per-ε record of the continuation ladder.
pub struct EpsilonRun {
    pub epsilon: f64,
    pub solve: FixedEpsilonSolve,
    pub max_w: f64,
    pub max_kappa: f64,
    pub min_kappa: f64,
    /// Range of `ν^{n+1}` over near-boundary nodes.
    pub boundary_nu_range: (f64, f64),
    /// `max |w - 1/σ|` over near-boundary nodes.
    pub boundary_w_excess: f64,
    /// Maximum of the curvature ratio `M(x) = κ_max/(u²(ν - a))`.
    pub m_ratio_max: f64,
    /// Whether the `M(x)` maximum sits at an interior node.
    pub m_ratio_at_interior: bool,
    /// The `a` used for the ratio (σ/2, shrunk if the hypothesis
    /// `ν ≥ 2a` fails on the discrete state).
    pub m_ratio_a: f64,
    /// `max u·‖D²u‖` over near-boundary nodes (scale-invariant).
    pub max_u_d2u_boundary: f64,
}

/// Ladder outcome; a fixed-ε failure terminates the ladder and is
/// recorded alongside the completed prefix.
pub struct ContinuationReport {
    pub runs: Vec<EpsilonRun>,
    pub failure: Option<(f64, String)>,
    /// Least-squares slope of `boundary_w_excess` against ε.
    pub w_excess_slope: Option<f64>,
    pub w_excess_monotone: bool,
    /// `|max κ(ε_last) - max κ(ε_prev)| / max κ(ε_prev)`.
    pub kappa_variation_last_pair: Option<f64>,
    /// `32σ/(σ² - 1/8)` when σ² > 1/8.
    pub kappa_ceiling: Option<f64>,
    pub kappa_within_ceiling: Option<bool>,
}

fn epsilon_run_stats(domain: &GridDomain, solve: FixedEpsilonSolve, sigma: f64) -> EpsilonRun {
    let state = &solve.state;
    let mut max_w = 0.0_f64;
    let mut max_kappa = f64::NEG_INFINITY;
    let mut min_kappa = f64::INFINITY;
    let mut nu_lo = f64::INFINITY;
    let mut nu_hi = f64::NEG_INFINITY;
    let mut w_excess = 0.0_f64;
    let mut max_ud2 = 0.0_f64;
    for id in domain.nodes() {
        let i = id.0;
        max_w = max_w.max(state.w[i]);
        max_kappa = max_kappa.max(state.kappa_max[i]);
        min_kappa = min_kappa.min(state.kappa_min[i]);
        if domain.is_near_boundary(id) {
            nu_lo = nu_lo.min(state.nu_vertical[i]);
            nu_hi = nu_hi.max(state.nu_vertical[i]);
            w_excess = w_excess.max((state.w[i] - 1.0 / sigma).abs());
            max_ud2 = max_ud2.max(state.u.at(id) * state.d2u_norm[i]);
        }
    }
    // curvature ratio with the Theorem-5.1 style weight; shrink a when
    // the discrete state dips under ν ≥ 2a
    let mut a = sigma / 2.0;
    if nu_lo < 2.0 * a {
        a = 0.5 * state.nu_vertical.iter().cloned().fold(f64::INFINITY, f64::min);
    }
    let ratio = barriers::curvature_ratio_m(domain, state, a)
        .expect("hypothesis enforced by construction");
    let epsilon = state.epsilon;
    EpsilonRun {
        epsilon,
        solve,
        max_w,
        max_kappa,
        min_kappa,
        boundary_nu_range: (nu_lo, nu_hi),
        boundary_w_excess: w_excess,
        m_ratio_max: ratio.max_value,
        m_ratio_at_interior: ratio.at_interior,
        m_ratio_a: a,
        max_u_d2u_boundary: max_ud2,
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - xm) * (y - ym);
        den += (x - xm) * (x - xm);
    }
    num / den
}

/// Solve the whole ε-ladder and fit the boundary-gradient and
/// curvature trends.
///
/// Every rung restarts the monotone iteration from `u_0 ≡ ε`: reusing
/// the previous solution would start above the new one near the
/// boundary (solutions decrease with ε there) and break the
/// monotone-increase property of the outer sequence.
pub fn epsilon_continuation(
    domain: &GridDomain,
    schedule: &SolveSchedule,
) -> Result<ContinuationReport, SolverError> {
    schedule.validate()?;
    let mut runs: Vec<EpsilonRun> = Vec::new();
    let mut failure = None;
    for &eps in &schedule.epsilon_ladder {
        match solve_fixed_epsilon(domain, schedule, eps, None) {
            Ok(solve) => {
                runs.push(epsilon_run_stats(domain, solve, schedule.sigma));
            }
            Err(e) => {
                failure = Some((eps, e.to_string()));
                break;
            }
        }
    }

    let (slope, monotone) = if runs.len() >= 2 {
        let xs: Vec<f64> = runs.iter().map(|r| r.epsilon).collect();
        let ys: Vec<f64> = runs.iter().map(|r| r.boundary_w_excess).collect();
        let mono = ys.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        (Some(least_squares_slope(&xs, &ys)), mono)
    } else {
        (None, true)
    };
    let kappa_variation = if runs.len() >= 2 {
        let last = runs[runs.len() - 1].max_kappa;
        let prev = runs[runs.len() - 2].max_kappa;
        Some((last - prev).abs() / prev)
    } else {
        None
    };
    let ceiling = barriers::kappa_bound_sigma(schedule.sigma);
    let within = ceiling.map(|c| runs.iter().all(|r| r.max_kappa <= c));
    Ok(ContinuationReport {
        runs,
        failure,
        w_excess_slope: slope,
        w_excess_monotone: monotone,
        kappa_variation_last_pair: kappa_variation,
        kappa_ceiling: ceiling,
        kappa_within_ceiling: within,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barriers::EquidistanceCap;
    use crate::grid::{NodeClass, NodeId, Shape};
    use crate::matrix::Matrix;
    use crate::oracle;

    fn mean_spec() -> CurvatureFunctionSpec {
        CurvatureFunctionSpec::new(2, 1, 0).unwrap()
    }

    fn quick_schedule(sigma: f64) -> SolveSchedule {
        let mut s = SolveSchedule::new(sigma, mean_spec()).unwrap();
        s.coupling = Coupling::Fixed(1.0);
        s
    }

    #[test]
    fn g_eval_on_horosphere_and_cap_apex() {
        let spec = mean_spec();
        let c = 0.35;
        let jet = PointJet::new(c, vec![0.0, 0.0], Matrix::zeros(2)).unwrap();
        assert!((g_eval(&jet, &spec).unwrap() - 1.0 / c).abs() < 1e-14);

        // cap apex, sigma = 0.6, sphere radius 1: u = 0.4, D2u = -I
        let jet = PointJet::new(0.4, vec![0.0, 0.0], Matrix::identity(2).scale(-1.0))
            .unwrap();
        assert!((g_eval(&jet, &spec).unwrap() - 1.5).abs() < 1e-13);

        // inadmissible jets are refused with the curvatures attached
        let bad = PointJet::new(0.5, vec![0.0, 0.0], Matrix::identity(2).scale(-9.0))
            .unwrap();
        assert!(matches!(
            g_eval(&bad, &spec),
            Err(SolverError::InadmissibleJet { .. })
        ));
    }

    #[test]
    fn g_scaling_invariance() {
        // jets of u and λu(x/λ) give G in ratio 1/λ
        let spec = CurvatureFunctionSpec::new(2, 2, 1).unwrap();
        let base = PointJet::new(
            0.7,
            vec![0.3, -0.2],
            Matrix::from_rows(&[&[0.5, 0.1], &[0.1, 0.8]]),
        )
        .unwrap();
        let lambda = 2.3;
        let scaled = PointJet::new(
            lambda * base.u,
            base.du.clone(),
            base.d2u.scale(1.0 / lambda),
        )
        .unwrap();
        let g1 = g_eval(&base, &spec).unwrap();
        let g2 = g_eval(&scaled, &spec).unwrap();
        assert!((g2 - g1 / lambda).abs() < 1e-12 * g1);
    }

    #[test]
    fn g_derivatives_at_flat_constant_state() {
        let spec = mean_spec();
        let c = 0.45;
        let jet = PointJet::new(c, vec![0.0, 0.0], Matrix::zeros(2)).unwrap();
        let (g, der) = g_derivatives(&jet, &spec).unwrap();
        assert!((g - 1.0 / c).abs() < 1e-14);
        assert!(der.g_st.sub(&Matrix::identity(2).scale(0.5)).frob_norm() < 1e-14);
        assert!(der.g_s[0].abs() < 1e-14 && der.g_s[1].abs() < 1e-14);
        assert!((der.g_u + 1.0 / (c * c)).abs() < 1e-13);
    }

    #[test]
    fn hand_assembled_row_at_constant_state() {
        // u ≡ c on the disk: the linearized operator reduces to
        // (1/n) Δ_h plus the zero-order term -(1-σ)/c².
        let spec = mean_spec();
        let sigma = 0.6;
        let c = 0.3;
        let h = 1.0 / 16.0;
        let domain = GridDomain::build(Shape::Disk { r: 0.78 }, h).unwrap();
        let u = ScalarField::constant(&domain, c);
        let source = Source { constant: sigma, linear_u: 0.0, offset: None };
        let sys = assemble_linearized(&domain, &u, &source, &spec, c, sigma).unwrap();

        let center = domain.node_near(0.0, 0.0).unwrap();
        assert_eq!(domain.class(center), NodeClass::Interior);
        let mut row: std::collections::BTreeMap<usize, f64> =
            std::collections::BTreeMap::new();
        for &(r, ccol, v) in &sys.triplets {
            if r == center.0 {
                *row.entry(ccol).or_insert(0.0) += v;
            }
        }
        let h2 = h * h;
        // diagonal: (1/2)(-4/h²) + G_u - ψ_u with ψ_u = -σ/c²
        let want_diag = -2.0 / h2 - (1.0 - sigma) / (c * c);
        assert!((row[&center.0] - want_diag).abs() < 1e-9 * want_diag.abs());
        // axis neighbors: (1/2)(1/h²)
        let [cx, cy] = domain.position(center);
        for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let nb = domain.node_near(cx + dx, cy + dy).unwrap();
            assert!((row[&nb.0] - 0.5 / h2).abs() < 1e-9 / h2);
        }
        // no cross-derivative coupling at a flat state
        let ne = domain.node_near(cx + h, cy + h).unwrap();
        assert!(row.get(&ne.0).map_or(0.0, |v| *v).abs() < 1e-12 / h2);
        // residual: -(G - ψ) = -(1 - σ)/c
        let want_rhs = -(1.0 - sigma) / c;
        assert!((sys.rhs[center.0] - want_rhs).abs() < 1e-12);
        // ellipticity margin is reported
        assert!(sys.min_gst_eigenvalue > 0.0);
        assert!(sys.sign_violations.is_empty());
    }

    #[test]
    fn newton_correction_solves_the_linear_system() {
        // J δ = -R holds to solver precision through the sparse path
        let spec = mean_spec();
        let domain = GridDomain::build(Shape::Disk { r: 0.78 }, 1.0 / 24.0).unwrap();
        let cap = EquidistanceCap::over_circle(0.78, 0.6, 0.05).unwrap();
        let u = ScalarField::from_fn(&domain, |x, y| cap.height(x, y));
        let source = Source { constant: 0.6, linear_u: 0.0, offset: None };
        let sys = assemble_linearized(&domain, &u, &source, &spec, 0.05, 0.6).unwrap();
        let delta =
            linsolve::solve_sparse(sys.n, &sys.triplets, &sys.rhs).unwrap();
        let mut residual = sys.rhs.clone();
        for &(r, c, v) in &sys.triplets {
            residual[r] -= v * delta[c];
        }
        let worst = residual.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let scale = sys.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-10 * scale.max(1.0), "linear residual {worst}");
    }

    #[test]
    fn continuity_direct_returns_converged_state_unchanged() {
        let spec = mean_spec();
        let schedule = quick_schedule(0.6);
        let domain = GridDomain::build(Shape::Disk { r: 0.78 }, 1.0 / 16.0).unwrap();
        let solve = solve_fixed_epsilon(&domain, &schedule, 0.02, None).unwrap();
        let u = solve.state.u.clone();
        let (same, log) = continuity_solve(
            &domain,
            u.clone(),
            &ContinuityFamily::Direct,
            &schedule,
            0.02,
        )
        .unwrap();
        assert_eq!(log.newton_iterations, 0, "already converged");
        assert_eq!(same.max_abs_diff(&u), 0.0);
        let _ = spec;
    }

    #[test]
    fn fixed_epsilon_solve_recovers_cap_and_is_monotone() {
        let schedule = quick_schedule(0.6);
        let h = 1.0 / 32.0;
        let domain = GridDomain::build(Shape::Disk { r: 0.78 }, h).unwrap();
        let solve = solve_fixed_epsilon(&domain, &schedule, 0.02, None).unwrap();
        assert!(solve.state.all_admissible());
        assert!(solve.state.max_abs_residual() <= 2.0 * schedule.newton_tol);
        assert!(solve.monotone_min_step >= -1e-9, "min step {}", solve.monotone_min_step);

        let cap = EquidistanceCap::over_circle(0.78, 0.6, 0.02).unwrap();
        let mut err = 0.0_f64;
        for id in domain.nodes() {
            let [x, y] = domain.position(id);
            err = err.max((solve.state.u.at(id) - cap.height(x, y)).abs());
        }
        assert!(err < 5e-3, "cap error {err}");
    }

    #[test]
    fn strong_coupling_also_converges_monotonically() {
        // the strong coupling M = 1/ε; many more outer steps, same answer
        let mut schedule = quick_schedule(0.6);
        schedule.coupling = Coupling::InverseEpsilon;
        let domain = GridDomain::build(Shape::Disk { r: 0.78 }, 1.0 / 16.0).unwrap();
        let a = solve_fixed_epsilon(&domain, &schedule, 0.02, None).unwrap();
        assert!(a.monotone_min_step >= -1e-9, "min step {}", a.monotone_min_step);
        assert!(a.state.max_abs_residual() <= 2.0 * schedule.newton_tol);

        // the invertibility condition of the strong coupling holds at
        // nearly every node in the late outer steps
        let late = a
            .outer_log
            .iter()
            .rev()
            .nth(1)
            .expect("at least two outer steps");
        let frac = late.weak_zero_order as f64 / domain.n_nodes() as f64;
        assert!(frac <= 0.01, "weak zero-order fraction {frac}");

        schedule.coupling = Coupling::Fixed(1.0);
        let b = solve_fixed_epsilon(&domain, &schedule, 0.02, None).unwrap();
        assert!(a.outer_log.len() > 3 * b.outer_log.len());
        assert!(a.state.u.max_abs_diff(&b.state.u) < 1e-7);
    }

    #[test]
    fn annulus_solve_matches_radial_oracle() {
        let mut schedule = quick_schedule(0.5);
        schedule.spec = CurvatureFunctionSpec::new(2, 2, 1).unwrap();
        let h = 1.0 / 32.0;
        let domain =
            GridDomain::build(Shape::Annulus { r_inner: 0.5, r_outer: 1.0 }, h)
                .unwrap();
        let solve = solve_fixed_epsilon(&domain, &schedule, 0.02, None).unwrap();
        let family = oracle::RadialFamily::new(2, 1).unwrap();
        let profile = oracle::shoot(
            oracle::RadialDomain::Annulus { r_in: 0.5, r_out: 1.0 },
            &family,
            0.5,
            0.02,
        )
        .unwrap();
        let mut worst = 0.0_f64;
        for id in domain.nodes() {
            let [x, y] = domain.position(id);
            let r = x.hypot(y);
            worst = worst.max((solve.state.u.at(id) - profile.sample(r)).abs());
        }
        let tol = (2e-3_f64).max(5.0 * h * h);
        assert!(worst <= tol, "2D vs oracle discrepancy {worst} > {tol}");
    }

    #[test]
    fn warm_start_reuses_previous_solution() {
        let schedule = quick_schedule(0.6);
        let domain = GridDomain::build(Shape::Disk { r: 0.78 }, 1.0 / 16.0).unwrap();
        let first = solve_fixed_epsilon(&domain, &schedule, 0.04, None).unwrap();
        let mut shifted = first.state.u.clone();
        for v in &mut shifted.values {
            *v -= 0.04 - 0.02;
        }
        let warm =
            solve_fixed_epsilon(&domain, &schedule, 0.02, Some(&shifted)).unwrap();
        assert!(warm.warm_started);
        let cold = solve_fixed_epsilon(&domain, &schedule, 0.02, None).unwrap();
        // monotonicity is a property of the cold-started sequence only
        assert!(cold.monotone_min_step >= -1e-9);
        assert!(warm.state.u.max_abs_diff(&cold.state.u) < 1e-7);
        // warm start takes fewer outer steps
        assert!(warm.outer_log.len() < cold.outer_log.len());
    }

    #[test]
    fn epsilon_continuation_trends() {
        let mut schedule = quick_schedule(0.6);
        schedule.epsilon_ladder = vec![0.04, 0.02, 0.01];
        let domain = GridDomain::build(Shape::Disk { r: 0.78 }, 1.0 / 32.0).unwrap();
        let report = epsilon_continuation(&domain, &schedule).unwrap();
        assert!(report.failure.is_none());
        assert_eq!(report.runs.len(), 3);
        assert!(report.w_excess_monotone);
        let slope = report.w_excess_slope.unwrap();
        assert!(slope > 0.0, "excess should grow with epsilon, slope {slope}");
        // kappa stays near sigma for the umbilic cap
        for run in &report.runs {
            assert!(run.max_kappa < 1.0 && run.min_kappa > 0.3);
            assert!(run.boundary_nu_range.0 > 0.5);
        }
        assert!(report.kappa_within_ceiling.unwrap());
    }

    #[test]
    fn schedule_and_epsilon_validation() {
        let spec = mean_spec();
        assert!(matches!(
            SolveSchedule::new(1.2, spec),
            Err(SolverError::Schedule { .. })
        ));
        let mut s = SolveSchedule::new(0.5, spec).unwrap();
        s.epsilon_ladder = vec![0.01, 0.02];
        assert!(s.validate().is_err());
        s.epsilon_ladder = vec![0.02, 0.01];
        assert!(s.validate().is_ok());

        let schedule = quick_schedule(0.6);
        let domain = GridDomain::build(Shape::Disk { r: 0.78 }, 1.0 / 16.0).unwrap();
        assert!(matches!(
            solve_fixed_epsilon(&domain, &schedule, 0.5, None),
            Err(SolverError::EpsilonTooLarge { .. })
        ));
    }

    #[test]
    fn surface_state_flags_inadmissible_fields() {
        let spec = mean_spec();
        let domain = GridDomain::build(Shape::Disk { r: 0.5 }, 1.0 / 16.0).unwrap();
        // steep dome: curvatures split past the cone
        let u = ScalarField::from_fn(&domain, |x, y| {
            0.05 + 2.0 * (0.25 - x * x - y * y)
        });
        let state = SurfaceState::analyze(&domain, u, &spec, 0.6, 0.05);
        assert!(!state.all_admissible());
        assert!(state.max_abs_residual().is_infinite());
        let ids: Vec<NodeId> = domain.nodes().collect();
        assert_eq!(state.w.len(), ids.len());
    }
}
