//! Pointwise differential geometry of graphs in the half-space model.
//!
//! For a vertical graph `x_{n+1} = u(x)` with `w = sqrt(1 + |Du|²)` the
//! Euclidean and hyperbolic curvature matrices are
//!
//! ```text
//! a^E_ij = (1/w) γ^{ik} u_{kl} γ^{lj},
//! a^v_ij = (1/w) (δ_ij + u γ^{ik} u_{kl} γ^{lj}),
//! γ^{ij} = δ_ij - u_i u_j / (w (1 + w)),
//! ```
//!
//! whose eigenvalues are the Euclidean and hyperbolic principal
//! curvatures; they share eigenvectors and satisfy
//! `κ_i = u κ_i^E + ν^{n+1}` with `ν^{n+1} = 1/w`.
//!
//! For a radial graph `X = e^v z` over the upper hemisphere the
//! hyperbolic curvature matrix is
//! `a^s_ij = (1/w) (y γ^{ik} v_{kl} γ^{lj} - (e·∇v) δ_ij)` with
//! `y = e·z`.
//!
//! The scalar curvature operator is `F(A) = f(λ(A))`; its matrix
//! derivative `F^{ij}` is assembled spectrally. Everything here is a
//! pure function and safe to call concurrently.

use crate::matrix::Matrix;
use crate::symfunc::{self, CurvatureFunctionSpec};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypGeomError {
    #[error("height must be positive in the half-space model, got {value}")]
    NonPositiveHeight { value: f64 },
    #[error("Hessian asymmetry {asymmetry} exceeds tolerance")]
    AsymmetricHessian { asymmetry: f64 },
    #[error("gradient length {got} does not match Hessian dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("matrix spectrum outside the positive cone: eigenvalues {eigenvalues:?}")]
    SpectrumOutsideCone { eigenvalues: Vec<f64> },
    #[error(transparent)]
    SymFunc(#[from] symfunc::SymFuncError),
}

/// Second-order data of a height function at one point: `u > 0`, its
/// gradient and its (symmetric) Hessian.
#[derive(Debug, Clone)]
pub struct PointJet {
    pub u: f64,
    pub du: Vec<f64>,
    pub d2u: Matrix,
}

impl PointJet {
    pub fn new(u: f64, du: Vec<f64>, d2u: Matrix) -> Result<Self, HypGeomError> {
        if !(u > 0.0) {
            return Err(HypGeomError::NonPositiveHeight { value: u });
        }
        if du.len() != d2u.dim() {
            return Err(HypGeomError::DimensionMismatch {
                got: du.len(),
                expected: d2u.dim(),
            });
        }
        let asym = d2u.asymmetry();
        if asym > 1e-14 * (1.0 + d2u.frob_norm()) {
            return Err(HypGeomError::AsymmetricHessian { asymmetry: asym });
        }
        Ok(PointJet { u, du, d2u: d2u.symmetrized() })
    }

    pub fn dim(&self) -> usize {
        self.du.len()
    }

    /// `w = sqrt(1 + |Du|²)`.
    pub fn w(&self) -> f64 {
        let g2: f64 = self.du.iter().map(|x| x * x).sum();
        (1.0 + g2).sqrt()
    }
}

/// `γ^{ij} = δ_ij - u_i u_j / (w(1+w))` and its inverse
/// `γ_ij = δ_ij + u_i u_j / (1+w)`, the square root of the graph metric:
/// `γ_ik γ_kj = δ_ij + u_i u_j`.
pub fn gamma_matrix(du: &[f64]) -> (Matrix, Matrix) {
    let n = du.len();
    let g2: f64 = du.iter().map(|x| x * x).sum();
    let w = (1.0 + g2).sqrt();
    let up = Matrix::identity(n).add_outer_scaled(du, -1.0 / (w * (1.0 + w)));
    let lo = Matrix::identity(n).add_outer_scaled(du, 1.0 / (1.0 + w));
    (up, lo)
}

/// Curvature data of a vertical graph at one point.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    /// Hyperbolic curvature matrix `A^v`.
    pub av: Matrix,
    /// Euclidean curvature matrix `A^E`.
    pub ae: Matrix,
    /// Hyperbolic principal curvatures, sorted ascending.
    pub kappa: Vec<f64>,
    /// Vertical component of the upward Euclidean unit normal, `1/w`.
    pub nu_vertical: f64,
    /// True iff all hyperbolic principal curvatures are positive,
    /// equivalently `{δ_ij + u_i u_j + u u_ij}` is positive definite.
    pub admissible: bool,
}

/// Curvature matrices, principal curvatures and the admissibility flag
/// of a vertical graph from its jet.
pub fn vertical_curvature_data(jet: &PointJet) -> CurvatureData {
    let n = jet.dim();
    let w = jet.w();
    let (gup, _) = gamma_matrix(&jet.du);
    let s = gup.matmul(&jet.d2u).matmul(&gup).symmetrized();
    let ae = s.scale(1.0 / w);
    let av = Matrix::identity(n).add(&s.scale(jet.u)).scale(1.0 / w);
    let (kappa, _) = av.eigh();
    // Admissibility via Cholesky of δ_ij + u_i u_j + u u_ij, which is
    // congruent to w·A^v and therefore has the same signature.
    let convexity = Matrix::identity(n)
        .add_outer_scaled(&jet.du, 1.0)
        .add(&jet.d2u.scale(jet.u));
    let admissible = convexity.cholesky_is_positive_definite();
    CurvatureData { av, ae, kappa, nu_vertical: 1.0 / w, admissible }
}

/// Hyperbolic curvature matrix `A^s[v]` of a radial graph over the
/// upper hemisphere, from covariant sphere derivatives of `v`, the
/// height coordinate `y = e·z ∈ (0, 1]` and `e·∇v`.
pub fn radial_curvature_matrix(
    v_grad: &[f64],
    v_hess: &Matrix,
    y: f64,
    e_dot_grad: f64,
) -> Result<Matrix, HypGeomError> {
    if !(y > 0.0) {
        return Err(HypGeomError::NonPositiveHeight { value: y });
    }
    if v_grad.len() != v_hess.dim() {
        return Err(HypGeomError::DimensionMismatch {
            got: v_grad.len(),
            expected: v_hess.dim(),
        });
    }
    let n = v_grad.len();
    let g2: f64 = v_grad.iter().map(|x| x * x).sum();
    let w = (1.0 + g2).sqrt();
    let (gup, _) = gamma_matrix(v_grad);
    let conj = gup.matmul(v_hess).matmul(&gup).symmetrized();
    let mut a = conj.scale(y / w);
    for i in 0..n {
        a.set(i, i, a.get(i, i) - e_dot_grad / w);
    }
    Ok(a)
}

/// `F(A) = f(λ(A))` together with its matrix derivative
/// `F^{ij} = Σ_m f_m v_m v_mᵀ` over the eigendecomposition of `A`.
///
/// `F^{ij}` is symmetric positive definite on the admissible set and,
/// because `f` is symmetric, the spectral assembly stays well defined
/// at coalescent eigenvalues (equal eigenvalues carry equal `f_m`, so
/// the projector sum does not depend on the eigenbasis chosen).
pub fn f_value_and_derivative(
    spec: &CurvatureFunctionSpec,
    a: &Matrix,
) -> Result<(f64, Matrix), HypGeomError> {
    let (lambda, v) = a.eigh();
    if !symfunc::cone_contains(&lambda) {
        return Err(HypGeomError::SpectrumOutsideCone { eigenvalues: lambda });
    }
    let f = symfunc::eval_f(spec, &lambda)?;
    let grad = symfunc::grad_f(spec, &lambda)?;
    let n = a.dim();
    let mut fij = Matrix::zeros(n);
    let mut col = vec![0.0; n];
    for (m, &fm) in grad.iter().enumerate() {
        for i in 0..n {
            col[i] = v.get(i, m);
        }
        fij = fij.add_outer_scaled(&col, fm);
    }
    Ok((f, fij))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SampleRng;

    fn random_admissible_jet(rng: &mut SampleRng, n: usize) -> PointJet {
        // Build d2u from a prescribed positive definite convexity matrix
        // K = I + du duᵀ + u d2u, so admissibility holds by construction.
        let u = rng.uniform(0.2, 1.5);
        let du = rng.vector(n, -1.0, 1.0);
        let b = Matrix::from_fn(n, |_, _| rng.uniform(-1.0, 1.0));
        let bt = Matrix::from_fn(n, |i, j| b.get(j, i));
        let k = b.matmul(&bt).add(&Matrix::identity(n).scale(rng.uniform(0.3, 1.0)));
        let d2u = k
            .sub(&Matrix::identity(n).add_outer_scaled(&du, 1.0))
            .scale(1.0 / u)
            .symmetrized();
        PointJet::new(u, du, d2u).unwrap()
    }

    #[test]
    fn gamma_identity_at_zero_gradient() {
        let (up, lo) = gamma_matrix(&[0.0, 0.0]);
        assert!(up.sub(&Matrix::identity(2)).frob_norm() == 0.0);
        assert!(lo.sub(&Matrix::identity(2)).frob_norm() == 0.0);
    }

    #[test]
    fn gamma_example_and_square_root_property() {
        let (up, _) = gamma_matrix(&[3.0, 0.0]);
        let w = 10.0_f64.sqrt();
        assert!((up.get(0, 0) - (1.0 - 9.0 / (w * (1.0 + w)))).abs() < 1e-15);
        assert!((up.get(0, 0) - 0.316228).abs() < 1e-6);
        assert!((up.get(1, 1) - 1.0).abs() < 1e-15);

        let mut rng = SampleRng::new(11);
        for n in 2..=4 {
            for _ in 0..20 {
                let du = rng.vector(n, -2.0, 2.0);
                let (up, lo) = gamma_matrix(&du);
                let metric = Matrix::identity(n).add_outer_scaled(&du, 1.0);
                assert!(lo.matmul(&lo).sub(&metric).frob_norm() <= 1e-12);
                // γ^ inverts γ_
                assert!(
                    up.matmul(&lo).sub(&Matrix::identity(n)).frob_norm() <= 1e-12
                );
            }
        }
    }

    #[test]
    fn horosphere_is_umbilic_with_curvature_one() {
        let jet = PointJet::new(0.37, vec![0.0, 0.0], Matrix::zeros(2)).unwrap();
        let data = vertical_curvature_data(&jet);
        assert!(data.av.sub(&Matrix::identity(2)).frob_norm() < 1e-15);
        for k in &data.kappa {
            assert!((k - 1.0).abs() < 1e-15);
        }
        assert!(data.admissible);
        assert_eq!(data.nu_vertical, 1.0);
    }

    #[test]
    fn cap_apex_has_curvature_sigma() {
        // Apex of u(x) = sqrt(R² - |x|²) - σR with R = 1, σ = 0.6:
        // u = 1 - σ, Du = 0, D²u = -I/R.
        let sigma = 0.6;
        let jet = PointJet::new(
            1.0 - sigma,
            vec![0.0, 0.0],
            Matrix::identity(2).scale(-1.0),
        )
        .unwrap();
        let data = vertical_curvature_data(&jet);
        for k in &data.kappa {
            assert!((k - sigma).abs() < 1e-14, "kappa = {k}");
        }
        assert!(data.admissible);
    }

    #[test]
    fn eigen_relation_and_shared_eigenvectors() {
        let mut rng = SampleRng::new(5);
        for n in 2..=3 {
            for _ in 0..50 {
                let jet = random_admissible_jet(&mut rng, n);
                let data = vertical_curvature_data(&jet);
                let (kap_e, v_e) = data.ae.eigh();
                let nu = data.nu_vertical;
                for i in 0..n {
                    let predicted = jet.u * kap_e[i] + nu;
                    assert!(
                        (data.kappa[i] - predicted).abs() <= 1e-10,
                        "kappa relation failed: {} vs {}",
                        data.kappa[i],
                        predicted
                    );
                }
                // eigenvectors of AE diagonalize Av as well
                let vt = Matrix::from_fn(n, |i, j| v_e.get(j, i));
                let d = vt.matmul(&data.av).matmul(&v_e);
                let mut off = 0.0_f64;
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            off = off.max(d.get(i, j).abs());
                        }
                    }
                }
                assert!(off <= 1e-10, "shared diagonalization residual {off}");
                // admissibility flag agrees with positive spectrum
                assert_eq!(data.admissible, data.kappa.iter().all(|&k| k > 0.0));
            }
        }
    }

    #[test]
    fn inadmissible_jet_is_flagged() {
        // strongly concave graph: curvatures go negative
        let jet = PointJet::new(
            2.0,
            vec![0.0, 0.0],
            Matrix::identity(2).scale(-3.0),
        )
        .unwrap();
        let data = vertical_curvature_data(&jet);
        assert!(!data.admissible);
        assert!(data.kappa[0] < 0.0);
    }

    #[test]
    fn radial_matrix_special_cases() {
        let zero = radial_curvature_matrix(&[0.0, 0.0], &Matrix::zeros(2), 0.8, 0.0)
            .unwrap();
        assert!(zero.frob_norm() == 0.0);

        let y = 0.8;
        let kappa = 0.6;
        let hess = Matrix::identity(2).scale(kappa / y);
        let a = radial_curvature_matrix(&[0.0, 0.0], &hess, y, 0.0).unwrap();
        assert!(a.sub(&Matrix::identity(2).scale(kappa)).frob_norm() < 1e-15);

        assert!(matches!(
            radial_curvature_matrix(&[0.0, 0.0], &Matrix::zeros(2), -0.1, 0.0),
            Err(HypGeomError::NonPositiveHeight { .. })
        ));
    }

    /// Change-of-coordinates consistency: an equidistance cap evaluated
    /// as a radial graph about a point aligned with its normal has the
    /// same principal curvatures as in vertical coordinates.
    #[test]
    fn radial_and_vertical_cap_curvatures_agree() {
        let sigma = 0.6_f64;
        let r_s = 1.0_f64;
        let center = [0.15, -0.1, -sigma * r_s]; // (a', -σR)
        // Pick a surface point and the origin O on {x3 = 0} such that
        // the ray from O through the point is normal to the sphere.
        let x0 = [0.45, 0.2];
        let s = (r_s * r_s
            - (x0[0] - center[0]).powi(2)
            - (x0[1] - center[1]).powi(2))
        .sqrt();
        let height = s - sigma * r_s;
        let point = [x0[0], x0[1], height];
        let nu = [
            (point[0] - center[0]) / r_s,
            (point[1] - center[1]) / r_s,
            (point[2] - center[2]) / r_s,
        ];
        assert!(nu[2] > 0.0);
        let rho = point[2] / nu[2];
        let origin = [point[0] - rho * nu[0], point[1] - rho * nu[1], 0.0];

        // radial height e^{v(z)}: outer intersection of the ray with the sphere
        let c_rel = [
            center[0] - origin[0],
            center[1] - origin[1],
            center[2] - origin[2],
        ];
        let radial = |z: &[f64; 3]| -> f64 {
            let zc = z[0] * c_rel[0] + z[1] * c_rel[1] + z[2] * c_rel[2];
            let cc = c_rel[0] * c_rel[0] + c_rel[1] * c_rel[1] + c_rel[2] * c_rel[2];
            zc + (zc * zc - cc + r_s * r_s).sqrt()
        };
        let z0 = nu;
        assert!((radial(&z0) - rho).abs() < 1e-12);

        // orthonormal tangent frame at z0
        let mut t1 = [-z0[1], z0[0], 0.0];
        let n1 = (t1[0] * t1[0] + t1[1] * t1[1]).sqrt();
        t1 = [t1[0] / n1, t1[1] / n1, 0.0];
        let t2 = [
            z0[1] * t1[2] - z0[2] * t1[1],
            z0[2] * t1[0] - z0[0] * t1[2],
            z0[0] * t1[1] - z0[1] * t1[0],
        ];
        // v in geodesic normal coordinates around z0
        let v_at = |a: f64, b: f64| -> f64 {
            let r = (a * a + b * b).sqrt();
            let (c, sc) = if r < 1e-30 {
                (1.0, 1.0)
            } else {
                (r.cos(), r.sin() / r)
            };
            let z = [
                c * z0[0] + sc * (a * t1[0] + b * t2[0]),
                c * z0[1] + sc * (a * t1[1] + b * t2[1]),
                c * z0[2] + sc * (a * t1[2] + b * t2[2]),
            ];
            radial(&z).ln()
        };
        // fourth-order differences (with Richardson for the cross term)
        // keep the jet accurate to ~1e-10
        let h = 1e-3;
        let v00 = v_at(0.0, 0.0);
        let d1 = |f: &dyn Fn(f64) -> f64| {
            (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
        };
        let d2 = |f: &dyn Fn(f64) -> f64| {
            (-f(2.0 * h) + 16.0 * f(h) - 30.0 * v00 + 16.0 * f(-h) - f(-2.0 * h))
                / (12.0 * h * h)
        };
        let grad = [d1(&|s| v_at(s, 0.0)), d1(&|t| v_at(0.0, t))];
        // normal alignment makes the gradient vanish at z0
        assert!(grad[0].abs() < 1e-9 && grad[1].abs() < 1e-9);
        let v11 = d2(&|s| v_at(s, 0.0));
        let v22 = d2(&|t| v_at(0.0, t));
        let cross = |s: f64| {
            (v_at(s, s) - v_at(s, -s) - v_at(-s, s) + v_at(-s, -s)) / (4.0 * s * s)
        };
        let v12 = (4.0 * cross(h) - cross(2.0 * h)) / 3.0;
        let hess = Matrix::from_rows(&[&[v11, v12], &[v12, v22]]);
        let y = z0[2];
        let e_dot_grad = grad[0] * t1[2] + grad[1] * t2[2];
        let a_s = radial_curvature_matrix(&grad, &hess, y, e_dot_grad).unwrap();
        let (kap, _) = a_s.eigh();

        // vertical-coordinate curvatures at the same point
        let du = [-(x0[0] - center[0]) / s, -(x0[1] - center[1]) / s];
        let d2u = Matrix::from_fn(2, |i, j| {
            let xi = [x0[0] - center[0], x0[1] - center[1]];
            -((if i == j { 1.0 } else { 0.0 }) / s + xi[i] * xi[j] / (s * s * s))
        });
        let jet = PointJet::new(height, du.to_vec(), d2u).unwrap();
        let vert = vertical_curvature_data(&jet);
        for (a, b) in kap.iter().zip(&vert.kappa) {
            assert!((a - b).abs() < 1e-8, "radial {a} vs vertical {b}");
            assert!((a - sigma).abs() < 1e-8);
        }
    }

    #[test]
    fn f_value_and_derivative_examples() {
        let mean = CurvatureFunctionSpec::new(2, 1, 0).unwrap();
        let (f, fij) = f_value_and_derivative(&mean, &Matrix::identity(2)).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
        assert!(fij.sub(&Matrix::identity(2).scale(0.5)).frob_norm() < 1e-14);

        let a = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 3.0]]);
        let (f, fij) = f_value_and_derivative(&mean, &a).unwrap();
        assert!((f - 2.0).abs() < 1e-15);
        assert!(fij.sub(&Matrix::identity(2).scale(0.5)).frob_norm() < 1e-14);

        let bad = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, -0.5]]);
        match f_value_and_derivative(&mean, &bad) {
            Err(HypGeomError::SpectrumOutsideCone { eigenvalues }) => {
                assert!((eigenvalues[0] + 0.5).abs() < 1e-14);
            }
            other => panic!("expected cone error, got {other:?}"),
        }
    }

    #[test]
    fn f_trace_identities_on_random_matrices() {
        let mut rng = SampleRng::new(77);
        for (n, k, l) in [(2, 2, 1), (3, 2, 1), (3, 3, 1)] {
            let spec = CurvatureFunctionSpec::new(n, k, l).unwrap();
            for _ in 0..50 {
                // positive definite A = B Bᵀ + c I
                let b = Matrix::from_fn(n, |_, _| rng.uniform(-1.0, 1.0));
                let bt = Matrix::from_fn(n, |i, j| b.get(j, i));
                let a = b
                    .matmul(&bt)
                    .add(&Matrix::identity(n).scale(rng.uniform(0.1, 0.8)))
                    .symmetrized();
                let (_, fij) = f_value_and_derivative(&spec, &a).unwrap();
                let (lam, _) = a.eigh();
                let grad = symfunc::grad_f(&spec, &lam).unwrap();
                let want1: f64 = grad.iter().zip(&lam).map(|(g, l)| g * l).sum();
                let got1 = fij.frob_dot(&a);
                assert!((want1 - got1).abs() <= 1e-10 * want1.abs().max(1.0));
                let want2: f64 =
                    grad.iter().zip(&lam).map(|(g, l)| g * l * l).sum();
                let got2 = fij.frob_dot(&a.matmul(&a).symmetrized());
                assert!((want2 - got2).abs() <= 1e-10 * want2.abs().max(1.0));
                assert!(fij.cholesky_is_positive_definite());
            }
        }
    }

    #[test]
    fn fij_matches_finite_differences() {
        let mut rng = SampleRng::new(321);
        let spec = CurvatureFunctionSpec::new(2, 2, 1).unwrap();
        let mut checked = 0;
        while checked < 30 {
            let b = Matrix::from_fn(2, |_, _| rng.uniform(-1.0, 1.0));
            let bt = Matrix::from_fn(2, |i, j| b.get(j, i));
            let a = b
                .matmul(&bt)
                .add(&Matrix::identity(2).scale(rng.uniform(0.2, 1.0)))
                .symmetrized();
            let (lam, _) = a.eigh();
            if (lam[1] - lam[0]).abs() < 1e-2 {
                continue; // keep away from coalescence for the FD check
            }
            checked += 1;
            let (_, fij) = f_value_and_derivative(&spec, &a).unwrap();
            let h = 1e-6;
            for (i, j) in [(0, 0), (0, 1), (1, 1)] {
                let mut ep = a.clone();
                let mut em = a.clone();
                ep.set(i, j, ep.get(i, j) + h);
                ep.set(j, i, ep.get(j, i) + if i == j { 0.0 } else { h });
                em.set(i, j, em.get(i, j) - h);
                em.set(j, i, em.get(j, i) - if i == j { 0.0 } else { h });
                let (fp, _) = f_value_and_derivative(&spec, &ep).unwrap();
                let (fm, _) = f_value_and_derivative(&spec, &em).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                // directional derivative along the symmetric perturbation
                let want = if i == j {
                    fij.get(i, i)
                } else {
                    2.0 * fij.get(i, j)
                };
                assert!(
                    (fd - want).abs() <= 1e-6 * fd.abs().max(1e-8),
                    "entry ({i},{j}): {fd} vs {want}"
                );
            }
        }
    }

    #[test]
    fn f_is_midpoint_concave() {
        let mut rng = SampleRng::new(9);
        let spec = CurvatureFunctionSpec::new(3, 3, 1).unwrap();
        for _ in 0..100 {
            let mk = |rng: &mut SampleRng| {
                let b = Matrix::from_fn(3, |_, _| rng.uniform(-1.0, 1.0));
                let bt = Matrix::from_fn(3, |i, j| b.get(j, i));
                b.matmul(&bt)
                    .add(&Matrix::identity(3).scale(rng.uniform(0.1, 1.0)))
                    .symmetrized()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let mid = a.add(&b).scale(0.5);
            let (fa, _) = f_value_and_derivative(&spec, &a).unwrap();
            let (fb, _) = f_value_and_derivative(&spec, &b).unwrap();
            let (fm, _) = f_value_and_derivative(&spec, &mid).unwrap();
            assert!(fm >= 0.5 * (fa + fb) - 1e-10);
        }
    }
}
