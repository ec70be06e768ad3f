//! Assembly of the linearized operator on the grid.
//!
//! For the residual `G(D²u, Du, u) - ψ(x, u)` the Newton correction
//! solves
//!
//! ```text
//! (G^{st} ∂_s∂_t + G^s ∂_s + (G_u - ψ_u)) δu = -(G - ψ)
//! ```
//!
//! with zero Dirichlet data for `δu` (the boundary value is already
//! carried by the ghost closures of the jet stencils). The sources have
//! the affine form `Ψ(x, u) = a + b u - g(x)` with `ψ = Ψ/u`, covering
//! the coupled iteration `Ψ = σ + M (u - u_k)` and its continuity
//! blends.

use super::{g_derivatives_inner, SolverError};
use crate::grid::{BoundaryTrace, GridDomain, NodeId, ScalarField};
use crate::symfunc::CurvatureFunctionSpec;

/// Affine source `Ψ(x, u) = constant + linear_u · u - offset(x)`,
/// entering the equation as `ψ = Ψ / u`.
#[derive(Debug, Clone)]
pub struct Source {
    pub constant: f64,
    pub linear_u: f64,
    pub offset: Option<ScalarField>,
}

impl Source {
    pub fn capital_psi(&self, id: NodeId, u: f64) -> f64 {
        let g = self.offset.as_ref().map_or(0.0, |f| f.at(id));
        self.constant + self.linear_u * u - g
    }

    /// `ψ_u = ∂(Ψ/u)/∂u = (g(x) - constant) / u²`.
    pub fn psi_u(&self, id: NodeId, u: f64) -> f64 {
        let g = self.offset.as_ref().map_or(0.0, |f| f.at(id));
        (g - self.constant) / (u * u)
    }
}

/// The assembled Newton system together with the diagnostics the outer
/// iteration records about it.
pub struct LinearizedSystem {
    pub n: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    /// Right-hand side `-(G - ψ)` per node.
    pub rhs: Vec<f64>,
    /// `‖u·G - Ψ‖_∞`, the convergence norm.
    pub scaled_residual_inf: f64,
    /// Zero-order coefficient `G_u - ψ_u` per node.
    pub zero_order: Vec<f64>,
    /// Nodes where `G_u - ψ_u ≥ 0` (the linearization loses its sign).
    pub sign_violations: Vec<NodeId>,
    /// Nodes failing the stronger bound `G_u - ψ_u ≤ -(1-σ)/(2u²)`.
    pub weak_zero_order: Vec<NodeId>,
    /// Minimum over nodes of the smallest eigenvalue of `G^{st}`.
    pub min_gst_eigenvalue: f64,
}

/// Assemble the linearized system at `u` for the given source. Requires
/// an admissible iterate at every node; the inadmissible node is named
/// otherwise.
pub fn assemble_linearized(
    domain: &GridDomain,
    u: &ScalarField,
    source: &Source,
    spec: &CurvatureFunctionSpec,
    epsilon_bc: f64,
    sigma: f64,
) -> Result<LinearizedSystem, SolverError> {
    let n = domain.n_nodes();
    let bc = BoundaryTrace::Constant(epsilon_bc);
    let mut triplets = Vec::with_capacity(n * 16);
    let mut rhs = vec![0.0; n];
    let mut zero_order = vec![0.0; n];
    let mut sign_violations = Vec::new();
    let mut weak_zero_order = Vec::new();
    let mut scaled_residual_inf = 0.0_f64;
    let mut min_gst_eigenvalue = f64::INFINITY;

    for id in domain.nodes() {
        let row = id.0;
        let uval = u.at(id);
        if !(uval > 0.0) {
            let [x, y] = domain.position(id);
            return Err(SolverError::NonPositiveIterate { x, y, value: uval });
        }
        let jet = domain
            .fd_jet(u, id, &bc)
            .expect("positivity checked above");
        let (g_val, der) = g_derivatives_inner(&jet, spec).map_err(|e| {
            let [x, y] = domain.position(id);
            SolverError::InadmissibleNode { x, y, detail: e.to_string() }
        })?;

        let psi = source.capital_psi(id, uval) / uval;
        let psi_u = source.psi_u(id, uval);
        let resid = g_val - psi;
        rhs[row] = -resid;
        scaled_residual_inf = scaled_residual_inf.max((uval * resid).abs());

        let c0 = der.g_u - psi_u;
        zero_order[row] = c0;
        if c0 >= 0.0 {
            sign_violations.push(id);
        }
        if c0 > -(1.0 - sigma) / (2.0 * uval * uval) {
            weak_zero_order.push(id);
        }

        // smallest eigenvalue of the 2x2 G^{st}
        let (gl, _) = der.g_st.eigh();
        min_gst_eigenvalue = min_gst_eigenvalue.min(gl[0]);

        let gxx = der.g_st.get(0, 0);
        let gyy = der.g_st.get(1, 1);
        let gxy = der.g_st.get(0, 1);
        let op = domain.jet_op(id);
        for &(col, w) in &op.terms {
            // w = (u_x, u_y, u_xx, u_yy, u_xy) extraction weights; the
            // stored u_xy weight acts on both symmetric entries, hence
            // the factor 2.
            let coeff = der.g_s[0] * w[0]
                + der.g_s[1] * w[1]
                + gxx * w[2]
                + gyy * w[3]
                + 2.0 * gxy * w[4];
            if coeff != 0.0 {
                triplets.push((row, col as usize, coeff));
            }
        }
        triplets.push((row, row, c0));
    }

    Ok(LinearizedSystem {
        n,
        triplets,
        rhs,
        scaled_residual_inf,
        zero_order,
        sign_violations,
        weak_zero_order,
        min_gst_eigenvalue,
    })
}

/// Residual-only pass used by the damped line search: the scaled
/// residual `u·G - Ψ` per node if the field is positive and admissible
/// everywhere, `None` otherwise.
pub(crate) fn scaled_residual_vector(
    domain: &GridDomain,
    u: &ScalarField,
    source: &Source,
    spec: &CurvatureFunctionSpec,
    epsilon_bc: f64,
) -> Option<Vec<f64>> {
    let bc = BoundaryTrace::Constant(epsilon_bc);
    let mut out = vec![0.0_f64; domain.n_nodes()];
    for id in domain.nodes() {
        let uval = u.at(id);
        if !(uval > 0.0) {
            return None;
        }
        let jet = domain.fd_jet(u, id, &bc).ok()?;
        let g_val = super::g_eval(&jet, spec).ok()?;
        out[id.0] = uval * g_val - source.capital_psi(id, uval);
    }
    Some(out)
}
