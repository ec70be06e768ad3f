//! Uniform Cartesian discretization of a bounded smooth planar domain
//! described by a level set, with cut-cell Dirichlet boundary handling.
//!
//! Nodes are classified as interior, near-boundary (some 8-neighbor is
//! outside), boundary-ghost (outside but adjacent to the domain) or
//! exterior. Jets are central second-order differences; stencil arms
//! that leave the domain read ghost values extrapolated along a grid
//! line through the exact level-set intercept, where the Dirichlet data
//! is imposed. The extrapolation interpolates the intercept datum plus
//! up to four domain nodes (quartic), keeping the ghost contribution to
//! second derivatives an order below the interior truncation error; the
//! sharp boundary layer of the curvature problem (`w → 1/σ` on `∂Ω`)
//! makes first-order boundary smearing dominate the error otherwise.
//!
//! This module is fixed to n = 2; the pointwise geometry and curvature
//! functions stay generic in n.

use crate::hypgeom::PointJet;
use crate::matrix::Matrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("invalid shape parameters: {reason}")]
    InvalidShape { reason: String },
    #[error("grid spacing must be positive, got {h}")]
    InvalidSpacing { h: f64 },
    #[error("domain too thin for spacing {h}: no interior nodes")]
    DomainTooThin { h: f64 },
    #[error("insufficient stencil support near node ({x}, {y})")]
    InsufficientStencil { x: f64, y: f64 },
    #[error("field not positive at node ({x}, {y}): value {value}")]
    FieldNotPositive { x: f64, y: f64, value: f64 },
}

/// Level-set described domain shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Disk { r: f64 },
    Annulus { r_inner: f64, r_outer: f64 },
    Ellipse { a: f64, b: f64 },
    /// Star-shaped blob with boundary `ρ(θ) = r0 (1 + amplitude cos(lobes θ + phase))`.
    Blob { r0: f64, amplitude: f64, lobes: u32, phase: f64 },
}

impl Shape {
    fn validate(&self) -> Result<(), GridError> {
        let bad = |reason: &str| Err(GridError::InvalidShape { reason: reason.to_string() });
        match *self {
            Shape::Disk { r } => {
                if !(r > 0.0) {
                    return bad("disk radius must be positive");
                }
            }
            Shape::Annulus { r_inner, r_outer } => {
                if !(r_inner > 0.0 && r_outer > r_inner) {
                    return bad("annulus needs 0 < r_inner < r_outer");
                }
            }
            Shape::Ellipse { a, b } => {
                if !(a > 0.0 && b > 0.0) {
                    return bad("ellipse semi-axes must be positive");
                }
            }
            Shape::Blob { r0, amplitude, lobes, .. } => {
                if !(r0 > 0.0) {
                    return bad("blob base radius must be positive");
                }
                if !(amplitude.abs() < 0.5) {
                    return bad("blob amplitude must satisfy |amplitude| < 0.5");
                }
                if lobes == 0 {
                    return bad("blob needs at least one lobe");
                }
            }
        }
        Ok(())
    }

    fn blob_radius(&self, theta: f64) -> f64 {
        match *self {
            Shape::Blob { r0, amplitude, lobes, phase } => {
                r0 * (1.0 + amplitude * (lobes as f64 * theta + phase).cos())
            }
            _ => unreachable!(),
        }
    }

    /// Signed distance to `∂Ω`, negative inside. Analytic for disks and
    /// annuli; closest-point projection (sampled then locally refined to
    /// 1e-10) for ellipses and blobs.
    pub fn signed_distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Disk { r } => (x * x + y * y).sqrt() - r,
            Shape::Annulus { r_inner, r_outer } => {
                let rho = (x * x + y * y).sqrt();
                (r_inner - rho).max(rho - r_outer)
            }
            Shape::Ellipse { a, b } => {
                let px = x.abs();
                let py = y.abs();
                let dist = closest_point_distance(
                    |t| {
                        let th = t * std::f64::consts::FRAC_PI_2;
                        (a * th.cos(), b * th.sin())
                    },
                    px,
                    py,
                    256,
                );
                let inside = px * px / (a * a) + py * py / (b * b) < 1.0;
                if inside {
                    -dist
                } else {
                    dist
                }
            }
            Shape::Blob { .. } => {
                let dist = closest_point_distance(
                    |t| {
                        let th = t * 2.0 * std::f64::consts::PI;
                        let r = self.blob_radius(th);
                        (r * th.cos(), r * th.sin())
                    },
                    x,
                    y,
                    1024,
                );
                let rho = (x * x + y * y).sqrt();
                let theta = y.atan2(x);
                if rho < self.blob_radius(theta) {
                    -dist
                } else {
                    dist
                }
            }
        }
    }

    /// Euclidean diameter of Ω.
    pub fn diameter(&self) -> f64 {
        match *self {
            Shape::Disk { r } => 2.0 * r,
            Shape::Annulus { r_outer, .. } => 2.0 * r_outer,
            Shape::Ellipse { a, b } => 2.0 * a.max(b),
            Shape::Blob { .. } => {
                let m = 4096;
                let mut best = 0.0_f64;
                for i in 0..m {
                    let th = i as f64 / m as f64 * std::f64::consts::PI;
                    let d = self.blob_radius(th) + self.blob_radius(th + std::f64::consts::PI);
                    best = best.max(d);
                }
                best
            }
        }
    }

    pub fn boundary_components(&self) -> usize {
        match self {
            Shape::Annulus { .. } => 2,
            _ => 1,
        }
    }

    /// Conservative radii `(r_exterior, r_interior)` of tangent spheres
    /// to `∂Ω`, as used in the boundary normal bounds. Conservative
    /// choices only widen the reported interval.
    pub fn sphere_radii(&self) -> (f64, f64) {
        match *self {
            Shape::Disk { r } => (r, r),
            Shape::Annulus { r_inner, r_outer } => {
                (r_inner, 0.5 * (r_outer - r_inner))
            }
            Shape::Ellipse { a, b } => {
                let major = a.max(b);
                let minor = a.min(b);
                (minor, minor * minor / major)
            }
            Shape::Blob { .. } => {
                // minimal radius of curvature of the polar curve
                let m = 4096;
                let mut rho_min = f64::INFINITY;
                let mut r_min = f64::INFINITY;
                for i in 0..m {
                    let th = i as f64 / m as f64 * 2.0 * std::f64::consts::PI;
                    let dt = 1e-5;
                    let r = self.blob_radius(th);
                    let rp = (self.blob_radius(th + dt) - self.blob_radius(th - dt)) / (2.0 * dt);
                    let rpp = (self.blob_radius(th + dt) - 2.0 * r + self.blob_radius(th - dt))
                        / (dt * dt);
                    let num = (r * r + rp * rp).powf(1.5);
                    let den = (r * r + 2.0 * rp * rp - r * rpp).abs().max(1e-12);
                    rho_min = rho_min.min(num / den);
                    r_min = r_min.min(r);
                }
                let c = rho_min.min(r_min);
                (c, c)
            }
        }
    }

    fn bounding_box(&self) -> (f64, f64, f64, f64) {
        match *self {
            Shape::Disk { r } => (-r, -r, r, r),
            Shape::Annulus { r_outer, .. } => (-r_outer, -r_outer, r_outer, r_outer),
            Shape::Ellipse { a, b } => (-a, -b, a, b),
            Shape::Blob { r0, amplitude, .. } => {
                let m = r0 * (1.0 + amplitude.abs());
                (-m, -m, m, m)
            }
        }
    }
}

/// Distance from `(px, py)` to the minimum over a sampled closed or
/// quarter curve `t ∈ [0, 1] → (x, y)`, refined by golden-section search.
fn closest_point_distance(
    curve: impl Fn(f64) -> (f64, f64),
    px: f64,
    py: f64,
    samples: usize,
) -> f64 {
    let d2 = |t: f64| {
        let (cx, cy) = curve(t);
        (cx - px) * (cx - px) + (cy - py) * (cy - py)
    };
    let mut best_t = 0.0;
    let mut best = f64::INFINITY;
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        let v = d2(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    let mut lo = (best_t - 1.5 / samples as f64).max(0.0);
    let mut hi = (best_t + 1.5 / samples as f64).min(1.0);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = d2(x1);
    let mut f2 = d2(x2);
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = d2(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = d2(x2);
        }
    }
    d2(0.5 * (lo + hi)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    NearBoundary,
    BoundaryGhost,
    Exterior,
}

/// Index of a non-exterior node (an unknown of the discretization).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

/// A ghost value is a linear form in domain unknowns plus the Dirichlet
/// datum at the exact boundary intercept on its extrapolation line.
#[derive(Debug, Clone)]
struct Ghost {
    supports: Vec<(u32, f64)>,
    bc_weight: f64,
    bc_point: [f64; 2],
}

/// Per-node linear forms extracting `(u_x, u_y, u_xx, u_yy, u_xy)` from
/// the unknown vector and the boundary data.
#[derive(Debug, Clone)]
pub(crate) struct JetOp {
    pub terms: Vec<(u32, [f64; 5])>,
    pub bc_terms: Vec<([f64; 2], [f64; 5])>,
}

/// Dirichlet data on `∂Ω` used when a jet stencil touches the boundary.
pub enum BoundaryTrace<'a> {
    Constant(f64),
    Analytic(&'a dyn Fn(f64, f64) -> f64),
}

impl BoundaryTrace<'_> {
    #[inline]
    fn value(&self, p: [f64; 2]) -> f64 {
        match self {
            BoundaryTrace::Constant(c) => *c,
            BoundaryTrace::Analytic(f) => f(p[0], p[1]),
        }
    }
}

/// A scalar field defined on the non-exterior nodes of a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(domain: &GridDomain, c: f64) -> Self {
        ScalarField { values: vec![c; domain.n_nodes()] }
    }

    pub fn from_fn(domain: &GridDomain, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..domain.n_nodes())
            .map(|i| {
                let [x, y] = domain.position(NodeId(i));
                f(x, y)
            })
            .collect();
        ScalarField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn at(&self, id: NodeId) -> f64 {
        self.values[id.0]
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Uniform grid over a level-set domain with cut-cell boundary data.
/// Immutable after construction.
#[derive(Debug)]
pub struct GridDomain {
    shape: Shape,
    h: f64,
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    class: Vec<NodeClass>,
    dist: Vec<f64>,
    unknown_of_grid: Vec<u32>,
    grid_of_unknown: Vec<usize>,
    ghosts: Vec<Ghost>,
    jet_ops: Vec<JetOp>,
    diameter: f64,
    sphere_radii: (f64, f64),
}

const NONE_IDX: u32 = u32::MAX;

/// Nodes closer to `∂Ω` than this fraction of `h` are excluded from the
/// unknown set. Their equations would be slaved to the boundary datum
/// through nearly coincident interpolation nodes, which feeds cut-cell
/// noise into the discrete curvatures; the Dirichlet data still enters
/// through the exact intercepts, so nothing is lost.
const CUT_PIN_FRACTION: f64 = 0.1;

impl GridDomain {
    pub fn build(shape: Shape, h: f64) -> Result<Self, GridError> {
        shape.validate()?;
        if !(h > 0.0) {
            return Err(GridError::InvalidSpacing { h });
        }
        let (bx0, by0, bx1, by1) = shape.bounding_box();
        let pad = 4.5 * h;
        let x0 = bx0 - pad;
        let y0 = by0 - pad;
        let nx = ((bx1 + pad - x0) / h).ceil() as usize + 1;
        let ny = ((by1 + pad - y0) / h).ceil() as usize + 1;
        let n_grid = nx * ny;

        let mut dist = vec![0.0_f64; n_grid];
        for iy in 0..ny {
            for ix in 0..nx {
                let x = x0 + ix as f64 * h;
                let y = y0 + iy as f64 * h;
                dist[iy * nx + ix] = shape.signed_distance(x, y);
            }
        }

        let inside = |g: usize| dist[g] < -CUT_PIN_FRACTION * h;
        let neighbors8 = |ix: usize, iy: usize| {
            let mut out = Vec::with_capacity(8);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let jx = ix as i64 + dx;
                    let jy = iy as i64 + dy;
                    if jx >= 0 && jy >= 0 && (jx as usize) < nx && (jy as usize) < ny {
                        out.push(Some(jy as usize * nx + jx as usize));
                    } else {
                        out.push(None);
                    }
                }
            }
            out
        };

        let mut class = vec![NodeClass::Exterior; n_grid];
        let mut unknown_of_grid = vec![NONE_IDX; n_grid];
        let mut grid_of_unknown = Vec::new();
        let mut any_interior = false;
        for iy in 0..ny {
            for ix in 0..nx {
                let g = iy * nx + ix;
                if !inside(g) {
                    continue;
                }
                let cut = neighbors8(ix, iy)
                    .iter()
                    .any(|n| n.map_or(true, |q| !inside(q)));
                class[g] = if cut {
                    NodeClass::NearBoundary
                } else {
                    any_interior = true;
                    NodeClass::Interior
                };
                unknown_of_grid[g] = grid_of_unknown.len() as u32;
                grid_of_unknown.push(g);
            }
        }
        if !any_interior {
            return Err(GridError::DomainTooThin { h });
        }

        // ghost candidates: exterior nodes 8-adjacent to the domain
        let mut ghost_of_grid = vec![NONE_IDX; n_grid];
        let mut ghost_grids = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let g = iy * nx + ix;
                if inside(g) {
                    continue;
                }
                let touches = neighbors8(ix, iy)
                    .iter()
                    .any(|n| n.map_or(false, inside));
                if touches {
                    class[g] = NodeClass::BoundaryGhost;
                    ghost_of_grid[g] = ghost_grids.len() as u32;
                    ghost_grids.push(g);
                }
            }
        }

        // build the extrapolation stencil of each ghost
        let position = |g: usize| -> [f64; 2] {
            [x0 + (g % nx) as f64 * h, y0 + (g / nx) as f64 * h]
        };
        let step = |g: usize, d: (i64, i64), k: i64| -> Option<usize> {
            let ix = (g % nx) as i64 + d.0 * k;
            let iy = (g / nx) as i64 + d.1 * k;
            if ix >= 0 && iy >= 0 && (ix as usize) < nx && (iy as usize) < ny {
                Some(iy as usize * nx + ix as usize)
            } else {
                None
            }
        };
        // Axis lines first, then diagonal grid lines for ghosts whose
        // only domain neighbors are diagonal.
        let dirs = [
            (1i64, 0i64),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        let mut ghosts = Vec::with_capacity(ghost_grids.len());
        for &g in &ghost_grids {
            // steepest descent of the level set per unit step length
            let mut best: Option<((i64, i64), f64)> = None;
            for &d in &dirs {
                if let Some(n1) = step(g, d, 1) {
                    if inside(n1) {
                        let len = ((d.0 * d.0 + d.1 * d.1) as f64).sqrt();
                        let drop = (dist[g] - dist[n1]) / len;
                        if best.map_or(true, |(_, bd)| drop > bd) {
                            best = Some((d, drop));
                        }
                    }
                }
            }
            let (d, _) = best.ok_or_else(|| {
                let p = position(g);
                GridError::InsufficientStencil { x: p[0], y: p[1] }
            })?;

            // exact intercept on the ray from n1 through g; the level
            // set can cross slightly beyond g when g sits inside the
            // pinned strip
            let n1 = step(g, d, 1).unwrap();
            let pg = position(g);
            let p1 = position(n1);
            let at = |s: f64| -> (f64, f64) {
                (p1[0] + s * (pg[0] - p1[0]), p1[1] + s * (pg[1] - p1[1]))
            };
            let mut hi = 1.0_f64;
            while hi < 3.5 {
                let (px, py) = at(hi);
                if shape.signed_distance(px, py) >= 0.0 {
                    break;
                }
                hi += 1.0;
            }
            if hi >= 3.5 {
                let p = position(g);
                return Err(GridError::InsufficientStencil { x: p[0], y: p[1] });
            }
            let mut lo = hi - 1.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let (px, py) = at(mid);
                if shape.signed_distance(px, py) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let s_root = 0.5 * (lo + hi);
            let (bx, by) = at(s_root);
            let bc_point = [bx, by];
            // position of the intercept in units of the step, measured
            // from g toward the domain (can be negative past g)
            let xi_b = 1.0 - s_root;

            // support nodes along d, skipping n1 when the intercept
            // comes within a quarter cell of it: interpolation nodes
            // that nearly coincide blow up the extrapolation weights and
            // feed cut-cell noise into the Hessian at the adjacent
            // unknown
            let first = if 1.0 - xi_b < 0.25 { 2 } else { 1 };
            let mut nodes = Vec::new();
            for k in first..=(first + 4) {
                if nodes.len() == 4 {
                    break;
                }
                match step(g, d, k) {
                    Some(q) if inside(q) => nodes.push((k as f64, q)),
                    _ => break,
                }
            }
            if nodes.is_empty() {
                let p = position(g);
                return Err(GridError::InsufficientStencil { x: p[0], y: p[1] });
            }
            // Lagrange weights at 0 through (xi_b, bc) and the supports
            let mut pts = vec![xi_b];
            pts.extend(nodes.iter().map(|&(k, _)| k));
            let weight_at_zero = |idx: usize| -> f64 {
                let xi = pts[idx];
                let mut w = 1.0;
                for (j, &xj) in pts.iter().enumerate() {
                    if j != idx {
                        w *= (0.0 - xj) / (xi - xj);
                    }
                }
                w
            };
            let bc_weight = weight_at_zero(0);
            let supports: Vec<(u32, f64)> = nodes
                .iter()
                .enumerate()
                .map(|(m, &(_, q))| (unknown_of_grid[q], weight_at_zero(m + 1)))
                .collect();
            ghosts.push(Ghost { supports, bc_weight, bc_point });
        }

        // jet stencils: central differences with ghosts expanded
        let h2 = h * h;
        let slots: [((i64, i64), [f64; 5]); 9] = [
            ((0, 0), [0.0, 0.0, -2.0 / h2, -2.0 / h2, 0.0]),
            ((1, 0), [0.5 / h, 0.0, 1.0 / h2, 0.0, 0.0]),
            ((-1, 0), [-0.5 / h, 0.0, 1.0 / h2, 0.0, 0.0]),
            ((0, 1), [0.0, 0.5 / h, 0.0, 1.0 / h2, 0.0]),
            ((0, -1), [0.0, -0.5 / h, 0.0, 1.0 / h2, 0.0]),
            ((1, 1), [0.0, 0.0, 0.0, 0.0, 0.25 / h2]),
            ((-1, -1), [0.0, 0.0, 0.0, 0.0, 0.25 / h2]),
            ((1, -1), [0.0, 0.0, 0.0, 0.0, -0.25 / h2]),
            ((-1, 1), [0.0, 0.0, 0.0, 0.0, -0.25 / h2]),
        ];
        let mut jet_ops = Vec::with_capacity(grid_of_unknown.len());
        for &g in &grid_of_unknown {
            let mut acc: std::collections::BTreeMap<u32, [f64; 5]> =
                std::collections::BTreeMap::new();
            let mut bc_terms: Vec<([f64; 2], [f64; 5])> = Vec::new();
            let add = |col: u32, w: [f64; 5], scale: f64,
                       acc: &mut std::collections::BTreeMap<u32, [f64; 5]>| {
                let e = acc.entry(col).or_insert([0.0; 5]);
                for c in 0..5 {
                    e[c] += w[c] * scale;
                }
            };
            for &(d, w) in &slots {
                let q = step(g, d, 1).expect("padding keeps stencils on the grid");
                if inside(q) {
                    add(unknown_of_grid[q], w, 1.0, &mut acc);
                } else {
                    let gi = ghost_of_grid[q];
                    assert!(gi != NONE_IDX, "stencil neighbor must be domain or ghost");
                    let ghost = &ghosts[gi as usize];
                    for &(col, cw) in &ghost.supports {
                        add(col, w, cw, &mut acc);
                    }
                    let mut bw = [0.0; 5];
                    for c in 0..5 {
                        bw[c] = w[c] * ghost.bc_weight;
                    }
                    bc_terms.push((ghost.bc_point, bw));
                }
            }
            jet_ops.push(JetOp {
                terms: acc.into_iter().collect(),
                bc_terms,
            });
        }

        Ok(GridDomain {
            diameter: shape.diameter(),
            sphere_radii: shape.sphere_radii(),
            shape,
            h,
            x0,
            y0,
            nx,
            ny,
            class,
            dist,
            unknown_of_grid,
            grid_of_unknown,
            ghosts,
            jet_ops,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of non-exterior nodes (discrete unknowns).
    pub fn n_nodes(&self) -> usize {
        self.grid_of_unknown.len()
    }

    pub fn position(&self, id: NodeId) -> [f64; 2] {
        let g = self.grid_of_unknown[id.0];
        [
            self.x0 + (g % self.nx) as f64 * self.h,
            self.y0 + (g / self.nx) as f64 * self.h,
        ]
    }

    pub fn class(&self, id: NodeId) -> NodeClass {
        self.class[self.grid_of_unknown[id.0]]
    }

    pub fn is_near_boundary(&self, id: NodeId) -> bool {
        self.class(id) == NodeClass::NearBoundary
    }

    /// Signed distance to `∂Ω` at a node (negative inside).
    pub fn signed_distance(&self, id: NodeId) -> f64 {
        self.dist[self.grid_of_unknown[id.0]]
    }

    /// Euclidean diameter `L` of Ω.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn boundary_components(&self) -> usize {
        self.shape.boundary_components()
    }

    /// Conservative exterior/interior tangent sphere radii `(r1, r2)`.
    pub fn sphere_radii(&self) -> (f64, f64) {
        self.sphere_radii
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n_nodes()).map(NodeId)
    }

    /// Lattice extents and origin: nodes sit at `(x0 + ix·h, y0 + iy·h)`
    /// for `0 ≤ ix < nx`, `0 ≤ iy < ny`.
    pub fn lattice(&self) -> (usize, usize, f64, f64) {
        (self.nx, self.ny, self.x0, self.y0)
    }

    /// The unknown at lattice position `(ix, iy)`, if the node belongs
    /// to the domain.
    pub fn node_at(&self, ix: usize, iy: usize) -> Option<NodeId> {
        if ix >= self.nx || iy >= self.ny {
            return None;
        }
        let u = self.unknown_of_grid[iy * self.nx + ix];
        (u != NONE_IDX).then(|| NodeId(u as usize))
    }

    /// The non-exterior node closest to `(x, y)`, if within one cell.
    pub fn node_near(&self, x: f64, y: f64) -> Option<NodeId> {
        let ix = ((x - self.x0) / self.h).round() as i64;
        let iy = ((y - self.y0) / self.h).round() as i64;
        if ix < 0 || iy < 0 || ix as usize >= self.nx || iy as usize >= self.ny {
            return None;
        }
        let g = iy as usize * self.nx + ix as usize;
        let u = self.unknown_of_grid[g];
        (u != NONE_IDX).then(|| NodeId(u as usize))
    }

    pub(crate) fn jet_op(&self, id: NodeId) -> &JetOp {
        &self.jet_ops[id.0]
    }

    /// Raw jet components `(u_x, u_y, u_xx, u_yy, u_xy)` at a node.
    pub fn jet_components(
        &self,
        field: &ScalarField,
        id: NodeId,
        bc: &BoundaryTrace,
    ) -> [f64; 5] {
        let op = &self.jet_ops[id.0];
        let mut out = [0.0; 5];
        for &(col, w) in &op.terms {
            let v = field.values[col as usize];
            for c in 0..5 {
                out[c] += w[c] * v;
            }
        }
        for &(p, w) in &op.bc_terms {
            let v = bc.value(p);
            for c in 0..5 {
                out[c] += w[c] * v;
            }
        }
        out
    }

    /// Finite-difference jet of a field at a node: central second-order
    /// stencils, with boundary arms closed by the ghost extrapolation.
    pub fn fd_jet(
        &self,
        field: &ScalarField,
        id: NodeId,
        bc: &BoundaryTrace,
    ) -> Result<PointJet, GridError> {
        let u = field.at(id);
        if !(u > 0.0) {
            let [x, y] = self.position(id);
            return Err(GridError::FieldNotPositive { x, y, value: u });
        }
        let [ux, uy, uxx, uyy, uxy] = self.jet_components(field, id, bc);
        let d2u = Matrix::from_rows(&[&[uxx, uxy], &[uxy, uyy]]);
        Ok(PointJet::new(u, vec![ux, uy], d2u)
            .expect("assembled jets are symmetric with positive height"))
    }

    /// Exact boundary intercepts where the Dirichlet data is imposed.
    pub fn boundary_points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.ghosts.iter().map(|g| g.bc_point)
    }
}
