//! Curvature functions `f = (σ_k/σ_l)^{1/(k-l)}` built from normalized
//! elementary symmetric polynomials, restricted to the positive cone
//! `K_n^+ = {λ : λ_i > 0}`.
//!
//! Throughout, `σ_j` denotes the j-th elementary symmetric polynomial
//! normalized by `binom(n, j)`, so `σ_j(1, …, 1) = 1` and `σ_0 = 1`.
//! The quotient family is positively homogeneous of degree one,
//! normalized to `f(1, …, 1) = 1`, strictly increasing in each `λ_i`
//! and concave on the cone. Those structure properties are what the
//! solver relies on; they are exercised in [`crate::validate`].

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymFuncError {
    #[error("curvature spec needs n >= 2, 1 <= k <= n, 0 <= l < k; got n={n}, k={k}, l={l}")]
    InvalidSpec { n: usize, k: usize, l: usize },
    #[error("symmetric polynomial order k={k} out of range for dimension n={n}")]
    OrderOutOfRange { k: usize, n: usize },
    #[error("vector length {got} does not match dimension n={expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("point outside the positive cone K_n^+: lambda = {lambda:?}")]
    OutsideCone { lambda: Vec<f64> },
}

/// The pair `(k, l)` selecting `f = (σ_k/σ_l)^{1/(k-l)}` in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurvatureFunctionSpec {
    n: usize,
    k: usize,
    l: usize,
}

impl CurvatureFunctionSpec {
    pub fn new(n: usize, k: usize, l: usize) -> Result<Self, SymFuncError> {
        if n < 2 || k < 1 || k > n || l >= k {
            return Err(SymFuncError::InvalidSpec { n, k, l });
        }
        Ok(CurvatureFunctionSpec { n, k, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// A short human-readable name, e.g. `sigma_2/sigma_1`.
    pub fn name(&self) -> String {
        if self.l == 0 {
            if self.k == 1 {
                "sigma_1 (mean curvature)".to_string()
            } else {
                format!("sigma_{}^(1/{})", self.k, self.k)
            }
        } else {
            format!("(sigma_{}/sigma_{})^(1/{})", self.k, self.l, self.k - self.l)
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut b = 1.0_f64;
    for j in 0..k.min(n - k) {
        b = b * (n - j) as f64 / (j + 1) as f64;
    }
    b
}

/// All unnormalized elementary symmetric polynomials `e_0..e_n` of
/// `lambda` via the coefficient recurrence of `Π (1 + λ_i t)`.
fn elementary_all(lambda: &[f64]) -> Vec<f64> {
    let n = lambda.len();
    let mut e = vec![0.0_f64; n + 1];
    e[0] = 1.0;
    for (i, &x) in lambda.iter().enumerate() {
        for j in (1..=(i + 1)).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

/// Normalized `σ_k(λ) = e_k(λ) / binom(n, k)`, with `σ_0 = 1`.
pub fn elementary_symmetric_normalized(
    lambda: &[f64],
    k: usize,
) -> Result<f64, SymFuncError> {
    let n = lambda.len();
    if k > n {
        return Err(SymFuncError::OrderOutOfRange { k, n });
    }
    Ok(elementary_all(lambda)[k] / binomial(n, k))
}

/// Strict membership in the positive cone `K_n^+`. No tolerance: callers
/// wanting slack must perturb explicitly.
pub fn cone_contains(lambda: &[f64]) -> bool {
    lambda.iter().all(|&x| x > 0.0)
}

fn check_point(
    spec: &CurvatureFunctionSpec,
    lambda: &[f64],
) -> Result<(), SymFuncError> {
    if lambda.len() != spec.n {
        return Err(SymFuncError::DimensionMismatch {
            got: lambda.len(),
            expected: spec.n,
        });
    }
    if !cone_contains(lambda) {
        return Err(SymFuncError::OutsideCone { lambda: lambda.to_vec() });
    }
    Ok(())
}

/// `f(λ) = (σ_k(λ)/σ_l(λ))^{1/(k-l)}` on the positive cone.
pub fn eval_f(
    spec: &CurvatureFunctionSpec,
    lambda: &[f64],
) -> Result<f64, SymFuncError> {
    check_point(spec, lambda)?;
    let e = elementary_all(lambda);
    let sk = e[spec.k] / binomial(spec.n, spec.k);
    let sl = e[spec.l] / binomial(spec.n, spec.l);
    let p = 1.0 / (spec.k - spec.l) as f64;
    Ok((sk / sl).powf(p))
}

/// Componentwise gradient of `f`, computed analytically from
/// `∂e_k/∂λ_i = e_{k-1}(λ with component i removed)`.
///
/// On the cone every component is strictly positive, the components
/// satisfy the Euler identity `Σ f_i λ_i = f(λ)` and `Σ f_i ≥ 1`.
pub fn grad_f(
    spec: &CurvatureFunctionSpec,
    lambda: &[f64],
) -> Result<Vec<f64>, SymFuncError> {
    check_point(spec, lambda)?;
    let n = spec.n;
    let e = elementary_all(lambda);
    let sk = e[spec.k] / binomial(n, spec.k);
    let sl = e[spec.l] / binomial(n, spec.l);
    let p = 1.0 / (spec.k - spec.l) as f64;
    let f = (sk / sl).powf(p);

    let mut reduced = Vec::with_capacity(n - 1);
    let mut grad = vec![0.0_f64; n];
    for i in 0..n {
        reduced.clear();
        reduced.extend(lambda.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x));
        let er = elementary_all(&reduced);
        let dsk = er[spec.k - 1] / binomial(n, spec.k);
        let dsl = if spec.l >= 1 {
            er[spec.l - 1] / binomial(n, spec.l)
        } else {
            0.0
        };
        grad[i] = f * p * (dsk / sk - dsl / sl);
    }
    Ok(grad)
}

/// `f(1, …, 1, 1 + r)`: the excess of `f` when one curvature direction
/// runs off to infinity. For `l ≥ 1` this converges, monotonically from
/// below, to [`asymptotic_limit`]; for `l = 0` it is unbounded.
pub fn asymptotic_excess(spec: &CurvatureFunctionSpec, r: f64) -> f64 {
    let mut lambda = vec![1.0; spec.n];
    lambda[spec.n - 1] = 1.0 + r;
    eval_f(spec, &lambda).expect("all-ones plus positive offset stays in the cone")
}

/// `lim_{r→∞} f(1, …, 1, 1 + r) = (k/l)^{1/(k-l)}` for `l ≥ 1`;
/// `None` when `l = 0` (the limit is infinite).
pub fn asymptotic_limit(spec: &CurvatureFunctionSpec) -> Option<f64> {
    if spec.l == 0 {
        return None;
    }
    let p = 1.0 / (spec.k - spec.l) as f64;
    Some((spec.k as f64 / spec.l as f64).powf(p))
}

/// The excess above `f(1) = 1` available in one direction, used as the
/// reported surrogate for the uniform-excess constant of the structure
/// conditions. `None` when the excess is infinite (`l = 0`).
pub fn epsilon0_surrogate(spec: &CurvatureFunctionSpec) -> Option<f64> {
    asymptotic_limit(spec).map(|v| v - 1.0)
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn cone_vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..5.0, n)
    }

    proptest! {
        #[test]
        fn homogeneous_of_degree_one(
            lambda in cone_vector(3),
            t in 0.1f64..10.0,
        ) {
            let spec = CurvatureFunctionSpec::new(3, 2, 1).unwrap();
            let f = eval_f(&spec, &lambda).unwrap();
            let scaled: Vec<f64> = lambda.iter().map(|x| t * x).collect();
            let ft = eval_f(&spec, &scaled).unwrap();
            prop_assert!((ft - t * f).abs() <= 1e-10 * t * f);
        }

        #[test]
        fn bounded_by_arithmetic_mean(lambda in cone_vector(4)) {
            let spec = CurvatureFunctionSpec::new(4, 3, 1).unwrap();
            let f = eval_f(&spec, &lambda).unwrap();
            let mean: f64 = lambda.iter().sum::<f64>() / 4.0;
            prop_assert!(f <= mean + 1e-12);
        }

        #[test]
        fn gradient_sums_to_at_least_one(lambda in cone_vector(2)) {
            let spec = CurvatureFunctionSpec::new(2, 2, 1).unwrap();
            let g = grad_f(&spec, &lambda).unwrap();
            prop_assert!(g.iter().sum::<f64>() >= 1.0 - 1e-10);
        }

        #[test]
        fn midpoint_concave(a in cone_vector(3), b in cone_vector(3)) {
            let spec = CurvatureFunctionSpec::new(3, 3, 0).unwrap();
            let mid: Vec<f64> =
                a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let fa = eval_f(&spec, &a).unwrap();
            let fb = eval_f(&spec, &b).unwrap();
            let fm = eval_f(&spec, &mid).unwrap();
            prop_assert!(fm >= 0.5 * (fa + fb) - 1e-10);
        }
    }
}
