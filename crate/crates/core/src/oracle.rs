//! Independent 1D verification path: on rotationally symmetric domains
//! the curvature equation reduces to an ODE in the radius,
//!
//! ```text
//! f(κ_rad, κ_tan) = σ,
//! κ_rad = u u''/w³ + 1/w,   κ_tan = u u'/(r w) + 1/w,   w = sqrt(1+u'²),
//! ```
//!
//! solved here by shooting with a fixed-step fourth-order integrator
//! and bisection on the free initial value. At `r = 0` symmetry gives
//! `κ_tan = κ_rad = u u'' + 1/w`.
//!
//! This module shares no code with the 2D solver: the curvature
//! quotients for n = 2 are inverted in closed form per family, and the
//! two paths are compared only in tests and the `oracle-compare`
//! command.

use thiserror::Error;

#[derive(Debug, Error, Clone)]
pub enum OracleError {
    #[error("radial oracle supports (k,l) in {{(1,0),(2,0),(2,1)}} for n=2, got ({k},{l})")]
    UnsupportedFamily { k: usize, l: usize },
    #[error("invalid radial domain or parameters: {reason}")]
    InvalidParams { reason: String },
    #[error("shooting bracket exhausted; sampled (parameter, residual) curve: {curve:?}")]
    BracketExhausted { curve: Vec<(f64, f64)> },
}

/// Rotationally symmetric domains the oracle can handle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialDomain {
    Disk { r_b: f64 },
    Annulus { r_in: f64, r_out: f64 },
}

/// The curvature quotient family restricted to n = 2, in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RadialFamily {
    k: usize,
    l: usize,
}

impl RadialFamily {
    pub fn new(k: usize, l: usize) -> Result<Self, OracleError> {
        match (k, l) {
            (1, 0) | (2, 0) | (2, 1) => Ok(RadialFamily { k, l }),
            _ => Err(OracleError::UnsupportedFamily { k, l }),
        }
    }

    /// `f(κ1, κ2)` for the pair.
    pub fn eval(&self, k1: f64, k2: f64) -> f64 {
        match (self.k, self.l) {
            (1, 0) => 0.5 * (k1 + k2),
            (2, 0) => (k1 * k2).sqrt(),
            (2, 1) => 2.0 * k1 * k2 / (k1 + k2),
            _ => unreachable!(),
        }
    }

    /// Solve `f(κ_rad, κ_tan) = σ` for `κ_rad > 0` given `κ_tan > 0`;
    /// `None` when no positive root exists (the profile has left the
    /// admissible cone).
    fn kappa_rad_for(&self, sigma: f64, kt: f64) -> Option<f64> {
        if kt <= 0.0 {
            return None;
        }
        let kr = match (self.k, self.l) {
            (1, 0) => 2.0 * sigma - kt,
            (2, 0) => sigma * sigma / kt,
            (2, 1) => {
                let den = 2.0 * kt - sigma;
                if den <= 0.0 {
                    return None;
                }
                sigma * kt / den
            }
            _ => unreachable!(),
        };
        (kr > 0.0).then_some(kr)
    }
}

/// Hyperbolic principal curvatures of the rotation graph `u(|x|)`.
/// At `r = 0` (axis) both equal `u u'' + 1/w` by smoothness.
pub fn radial_curvatures(u: f64, up: f64, upp: f64, r: f64) -> (f64, f64) {
    let w = (1.0 + up * up).sqrt();
    if r == 0.0 {
        let k = u * upp + 1.0 / w;
        return (k, k);
    }
    let k_rad = u * upp / (w * w * w) + 1.0 / w;
    let k_tan = u * up / (r * w) + 1.0 / w;
    (k_rad, k_tan)
}

/// A solved radial profile with its derivatives on a uniform r-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub up: Vec<f64>,
    pub upp: Vec<f64>,
}

impl RadialProfile {
    /// Cubic Hermite interpolation of `u` at radius `r` (clamped to the
    /// profile range).
    pub fn sample(&self, r: f64) -> f64 {
        let r0 = self.r[0];
        let rn = *self.r.last().unwrap();
        let rr = r.clamp(r0, rn);
        let h = self.r[1] - self.r[0];
        let mut i = ((rr - r0) / h).floor() as usize;
        if i >= self.r.len() - 1 {
            i = self.r.len() - 2;
        }
        let t = (rr - self.r[i]) / h;
        let (u0, u1) = (self.u[i], self.u[i + 1]);
        let (p0, p1) = (self.up[i] * h, self.up[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * u0
            + (t3 - 2.0 * t2 + t) * p0
            + (-2.0 * t3 + 3.0 * t2) * u1
            + (t3 - t2) * p1
    }

    /// `max |f(κ_rad, κ_tan) - σ|` along the stored profile.
    pub fn max_equation_residual(&self, family: &RadialFamily, sigma: f64) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.r.len() {
            let (kr, kt) =
                radial_curvatures(self.u[i], self.up[i], self.upp[i], self.r[i]);
            worst = worst.max((family.eval(kr, kt) - sigma).abs());
        }
        worst
    }

    /// True if both principal curvatures are positive everywhere.
    pub fn admissible(&self, _family: &RadialFamily) -> bool {
        self.r.iter().enumerate().all(|(i, &r)| {
            let (kr, kt) = radial_curvatures(self.u[i], self.up[i], self.upp[i], r);
            kr > 0.0 && kt > 0.0
        })
    }
}

const STEPS: usize = 4096;

/// Direction in which an integration left the admissible region,
/// judged from the slope sign at failure: diving profiles undershoot,
/// steep climbs (which also lose tangential admissibility while the
/// height is small) overshoot. This drives the shooting bisection when
/// the end residual is unavailable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Crash {
    Down,
    Up,
}

fn crash_from_slope(p: f64) -> Crash {
    if p > 0.0 {
        Crash::Up
    } else {
        Crash::Down
    }
}

/// `u''` from the curvature equation at `(r, u, u')`; `Err` once the
/// state leaves the admissible region.
fn upp_of(
    family: &RadialFamily,
    sigma: f64,
    r: f64,
    u: f64,
    p: f64,
) -> Result<f64, ()> {
    if u <= 0.0 {
        return Err(());
    }
    let w = (1.0 + p * p).sqrt();
    if r == 0.0 {
        // symmetric axis: f(κ, κ) = κ = σ with w = 1
        return Ok((sigma - 1.0) / u);
    }
    let kt = u * p / (r * w) + 1.0 / w;
    let kr = family.kappa_rad_for(sigma, kt).ok_or(())?;
    Ok((kr - 1.0 / w) * w * w * w / u)
}

fn rk4_step(
    family: &RadialFamily,
    sigma: f64,
    r: f64,
    u: f64,
    p: f64,
    h: f64,
) -> Result<(f64, f64), ()> {
    let f = |r: f64, u: f64, p: f64| -> Result<(f64, f64), ()> {
        Ok((p, upp_of(family, sigma, r, u, p)?))
    };
    let (k1u, k1p) = f(r, u, p)?;
    let (k2u, k2p) = f(r + 0.5 * h, u + 0.5 * h * k1u, p + 0.5 * h * k1p)?;
    let (k3u, k3p) = f(r + 0.5 * h, u + 0.5 * h * k2u, p + 0.5 * h * k2p)?;
    let (k4u, k4p) = f(r + h, u + h * k3u, p + h * k3p)?;
    Ok((
        u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    ))
}

/// Integrate from `(r0, u0, p0)` across `[r0, r1]`; returns the final
/// height or the crash direction, optionally recording the profile.
/// Slopes far beyond the gradient bound scale count as upward blow-up.
fn integrate(
    family: &RadialFamily,
    sigma: f64,
    r0: f64,
    r1: f64,
    u0: f64,
    p0: f64,
    record: Option<&mut RadialProfile>,
) -> Result<f64, Crash> {
    let slope_cap = 10.0 * (1.0 / (sigma * sigma) - 1.0).sqrt() + 5.0;
    let h = (r1 - r0) / STEPS as f64;
    let mut u = u0;
    let mut p = p0;
    let mut profile = record;
    if let Some(prof) = profile.as_deref_mut() {
        prof.r.clear();
        prof.u.clear();
        prof.up.clear();
        prof.upp.clear();
        prof.r.push(r0);
        prof.u.push(u0);
        prof.up.push(p0);
        prof.upp.push(
            upp_of(family, sigma, r0, u0, p0).map_err(|_| crash_from_slope(p0))?,
        );
    }
    for i in 0..STEPS {
        let r = r0 + i as f64 * h;
        let (nu, np) = rk4_step(family, sigma, r, u, p, h)
            .map_err(|_| crash_from_slope(p))?;
        u = nu;
        p = np;
        if !u.is_finite() || !p.is_finite() || p.abs() > slope_cap || u <= 0.0 {
            return Err(crash_from_slope(p));
        }
        if let Some(prof) = profile.as_deref_mut() {
            let rn = r0 + (i + 1) as f64 * h;
            prof.r.push(rn);
            prof.u.push(u);
            prof.up.push(p);
            prof.upp.push(
                upp_of(family, sigma, rn, u, p).map_err(|_| crash_from_slope(p))?,
            );
        }
    }
    Ok(u)
}

/// Solve the symmetric Dirichlet problem by shooting.
///
/// Disk: unknown apex height `u(0)`, with `u'(0) = 0`, hit `u(r_b) = ε`.
/// Annulus: `u(r_in) = ε` fixed, unknown slope `u'(r_in)`, hit
/// `u(r_out) = ε`. Bisection, 80 iterations, brackets from the barrier
/// height interval (disk) or the gradient bound (annulus); integration
/// failures count as undershoots.
pub fn shoot(
    domain: RadialDomain,
    family: &RadialFamily,
    sigma: f64,
    epsilon: f64,
) -> Result<RadialProfile, OracleError> {
    if !(sigma > 0.0 && sigma < 1.0) || !(epsilon > 0.0) {
        return Err(OracleError::InvalidParams {
            reason: format!("need sigma in (0,1) and epsilon > 0, got {sigma}, {epsilon}"),
        });
    }
    let (r0, r1, fixed_u0) = match domain {
        RadialDomain::Disk { r_b } => {
            if !(r_b > 0.0) {
                return Err(OracleError::InvalidParams {
                    reason: "disk radius must be positive".into(),
                });
            }
            (0.0, r_b, None)
        }
        RadialDomain::Annulus { r_in, r_out } => {
            if !(r_in > 0.0 && r_out > r_in) {
                return Err(OracleError::InvalidParams {
                    reason: "annulus needs 0 < r_in < r_out".into(),
                });
            }
            (r_in, r_out, Some(epsilon))
        }
    };

    // end-height mismatch as a function of the shooting parameter; a
    // crash supplies its direction in place of the missing residual
    let end_residual = |param: f64| -> f64 {
        let (u0, p0) = match fixed_u0 {
            None => (param, 0.0),
            Some(eps) => (eps, param),
        };
        match integrate(family, sigma, r0, r1, u0, p0, None) {
            Ok(end) => end - epsilon,
            Err(Crash::Down) => f64::NEG_INFINITY,
            Err(Crash::Up) => f64::INFINITY,
        }
    };

    // bracket the parameter
    let slope = ((1.0 - sigma) / (1.0 + sigma)).sqrt();
    let (mut lo, mut hi) = match fixed_u0 {
        None => {
            // barrier heights at the center, slightly widened
            let base = r1 * slope;
            (0.65 * base + epsilon * sigma / (1.0 + sigma), 1.1 * (base + epsilon))
        }
        Some(_) => {
            let gmax = (1.0 / (sigma * sigma) - 1.0).sqrt();
            (0.0, 1.5 * gmax)
        }
    };
    let mut curve = Vec::new();
    let mut f_lo = end_residual(lo);
    let mut f_hi = end_residual(hi);
    curve.push((lo, f_lo));
    curve.push((hi, f_hi));
    let mut expand = 0;
    while !(f_lo < 0.0 && f_hi > 0.0) && expand < 40 {
        if f_lo >= 0.0 {
            lo *= 0.8;
            f_lo = end_residual(lo);
            curve.push((lo, f_lo));
        }
        if f_hi <= 0.0 {
            hi *= 1.25;
            f_hi = end_residual(hi);
            curve.push((hi, f_hi));
        }
        expand += 1;
    }
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(OracleError::BracketExhausted { curve });
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if end_residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let param = 0.5 * (lo + hi);
    let (u0, p0) = match fixed_u0 {
        None => (param, 0.0),
        Some(eps) => (eps, param),
    };
    let mut profile =
        RadialProfile { r: vec![], u: vec![], up: vec![], upp: vec![] };
    integrate(family, sigma, r0, r1, u0, p0, Some(&mut profile))
        .map_err(|_| OracleError::BracketExhausted { curve })?;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap_exact(r: f64, r_s: f64, sigma: f64) -> (f64, f64, f64) {
        let s = (r_s * r_s - r * r).sqrt();
        (s - sigma * r_s, -r / s, -r_s * r_s / (s * s * s))
    }

    #[test]
    fn radial_curvatures_of_cap_and_horosphere() {
        let sigma = 0.6;
        let r_s = 1.0;
        for r in [0.0, 0.1, 0.35, 0.7] {
            let (u, up, upp) = cap_exact(r, r_s, sigma);
            let (kr, kt) = radial_curvatures(u, up, upp, r);
            assert!((kr - sigma).abs() < 1e-13, "kr = {kr} at r = {r}");
            assert!((kt - sigma).abs() < 1e-13, "kt = {kt} at r = {r}");
        }
        let (kr, kt) = radial_curvatures(0.37, 0.0, 0.0, 0.5);
        assert_eq!((kr, kt), (1.0, 1.0));
    }

    #[test]
    fn radial_curvatures_match_vertical_graph_geometry() {
        // embed a radial state as a 2D jet along the x-axis
        use crate::hypgeom::{vertical_curvature_data, PointJet};
        use crate::matrix::Matrix;
        let (u, up, upp, r) = (0.55, -0.42, -1.3, 0.61);
        let (kr, kt) = radial_curvatures(u, up, upp, r);
        let jet = PointJet::new(
            u,
            vec![up, 0.0],
            Matrix::from_rows(&[&[upp, 0.0], &[0.0, up / r]]),
        )
        .unwrap();
        let data = vertical_curvature_data(&jet);
        let mut pair = [kr, kt];
        pair.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in pair.iter().zip(&data.kappa) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn disk_shoot_recovers_the_cap_for_every_family() {
        let sigma = 0.6;
        let epsilon = 0.02;
        let r_b = 0.78;
        // sphere radius with u(r_b) = ε
        let one_m: f64 = 1.0 - sigma * sigma;
        let r_s = (sigma * epsilon
            + (epsilon * epsilon + one_m * r_b * r_b).sqrt())
            / one_m;
        for (k, l) in [(1, 0), (2, 0), (2, 1)] {
            let family = RadialFamily::new(k, l).unwrap();
            let profile =
                shoot(RadialDomain::Disk { r_b }, &family, sigma, epsilon).unwrap();
            // boundary datum matched tightly
            assert!(
                (profile.u.last().unwrap() - epsilon).abs() < 1e-10,
                "boundary mismatch for ({k},{l})"
            );
            let mut worst = 0.0_f64;
            for (i, &r) in profile.r.iter().enumerate() {
                let (ue, _, _) = cap_exact(r, r_s, sigma);
                worst = worst.max((profile.u[i] - ue).abs());
            }
            assert!(worst < 1e-8, "cap error {worst} for ({k},{l})");
            assert!(profile.max_equation_residual(&family, sigma) < 1e-9);
            assert!(profile.admissible(&family));
        }
    }

    #[test]
    fn annulus_shoot_self_consistency() {
        let family = RadialFamily::new(2, 1).unwrap();
        let profile = shoot(
            RadialDomain::Annulus { r_in: 0.5, r_out: 1.0 },
            &family,
            0.5,
            0.02,
        )
        .unwrap();
        assert!((profile.u[0] - 0.02).abs() < 1e-14);
        assert!((profile.u.last().unwrap() - 0.02).abs() < 1e-10);
        assert!(profile.max_equation_residual(&family, 0.5) < 1e-9);
        assert!(profile.admissible(&family));
        // interior maximum away from both boundaries
        let (imax, _) = profile
            .u
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        assert!(imax > 100 && imax < profile.u.len() - 100);
    }

    #[test]
    fn epsilon_monotonicity_of_profiles() {
        let family = RadialFamily::new(1, 0).unwrap();
        let p1 = shoot(RadialDomain::Disk { r_b: 0.78 }, &family, 0.6, 0.02).unwrap();
        let p2 = shoot(RadialDomain::Disk { r_b: 0.78 }, &family, 0.6, 0.01).unwrap();
        // same uniform grid, smaller boundary height stays below
        for (a, b) in p2.u.iter().zip(&p1.u) {
            assert!(*a <= b + 1e-6);
        }
    }

    #[test]
    fn shooting_is_deterministic() {
        let family = RadialFamily::new(2, 1).unwrap();
        let d = RadialDomain::Annulus { r_in: 0.5, r_out: 1.0 };
        let p1 = shoot(d, &family, 0.5, 0.04).unwrap();
        let p2 = shoot(d, &family, 0.5, 0.04).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn invalid_parameters_are_refused() {
        assert!(RadialFamily::new(3, 1).is_err());
        let family = RadialFamily::new(1, 0).unwrap();
        assert!(shoot(RadialDomain::Disk { r_b: 0.5 }, &family, 1.2, 0.01).is_err());
        assert!(shoot(
            RadialDomain::Annulus { r_in: 1.0, r_out: 0.5 },
            &family,
            0.5,
            0.01
        )
        .is_err());
    }

    #[test]
    fn hermite_sampling_matches_grid_points() {
        let family = RadialFamily::new(1, 0).unwrap();
        let p = shoot(RadialDomain::Disk { r_b: 0.78 }, &family, 0.6, 0.02).unwrap();
        for i in (0..p.r.len()).step_by(511) {
            assert!((p.sample(p.r[i]) - p.u[i]).abs() < 1e-13);
        }
        // midpoints stay close to the analytic cap
        let one_m: f64 = 1.0 - 0.36;
        let r_s = (0.6 * 0.02 + (0.02 * 0.02 + one_m * 0.78 * 0.78).sqrt()) / one_m;
        for j in 1..40 {
            let r = 0.019 * j as f64;
            let exact = (r_s * r_s - r * r).sqrt() - 0.6 * r_s;
            assert!((p.sample(r) - exact).abs() < 1e-8);
        }
    }
}
