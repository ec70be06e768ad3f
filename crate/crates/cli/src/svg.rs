//! Contour plots via marching squares on the solution grid. Purely
//! decorative output; nothing downstream reads these files.

use hypcurv::grid::{GridDomain, NodeId};
use std::fmt::Write;

/// Segments of one iso-level.
fn marching_squares(
    domain: &GridDomain,
    value: &dyn Fn(NodeId) -> f64,
    level: f64,
) -> Vec<[f64; 4]> {
    let (nx, ny, x0, y0) = domain.lattice();
    let h = domain.h();
    let mut segments = Vec::new();
    for iy in 0..ny.saturating_sub(1) {
        for ix in 0..nx.saturating_sub(1) {
            let corners = [
                domain.node_at(ix, iy),
                domain.node_at(ix + 1, iy),
                domain.node_at(ix + 1, iy + 1),
                domain.node_at(ix, iy + 1),
            ];
            if corners.iter().any(|c| c.is_none()) {
                continue;
            }
            let v: Vec<f64> = corners.iter().map(|c| value(c.unwrap())).collect();
            let x = x0 + ix as f64 * h;
            let y = y0 + iy as f64 * h;
            // cell corner coordinates in index order
            let pts = [
                (x, y),
                (x + h, y),
                (x + h, y + h),
                (x, y + h),
            ];
            let mut crossings: Vec<(f64, f64)> = Vec::new();
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                let (va, vb) = (v[a] - level, v[b] - level);
                if (va < 0.0) != (vb < 0.0) {
                    let t = va / (va - vb);
                    let px = pts[a].0 + t * (pts[b].0 - pts[a].0);
                    let py = pts[a].1 + t * (pts[b].1 - pts[a].1);
                    crossings.push((px, py));
                }
            }
            if crossings.len() == 2 {
                segments.push([
                    crossings[0].0,
                    crossings[0].1,
                    crossings[1].0,
                    crossings[1].1,
                ]);
            }
        }
    }
    segments
}

/// Contour plot of a nodal field at evenly spaced levels.
pub fn contour_svg(
    domain: &GridDomain,
    value: &dyn Fn(NodeId) -> f64,
    title: &str,
    levels: usize,
) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for id in domain.nodes() {
        let v = value(id);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let (nx, ny, x0, y0) = domain.lattice();
    let h = domain.h();
    let w_world = (nx - 1) as f64 * h;
    let h_world = (ny - 1) as f64 * h;
    let scale = 600.0 / w_world.max(h_world);
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        ((x - x0) * scale, (y0 + h_world - y) * scale)
    };

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.2} {:.2}\">\n",
        w_world * scale,
        h_world * scale + 24.0,
        w_world * scale,
        h_world * scale + 24.0
    );
    let _ = write!(
        svg,
        "<text x=\"4\" y=\"16\" font-family=\"monospace\" font-size=\"14\">{title} [{lo:.4}, {hi:.4}]</text>\n"
    );
    if hi > lo {
        for step in 1..=levels {
            let level = lo + (hi - lo) * step as f64 / (levels + 1) as f64;
            let shade = 20 + (200 * step / (levels + 1)) as u8;
            for seg in marching_squares(domain, value, level) {
                let (x1, y1) = to_px(seg[0], seg[1]);
                let (x2, y2) = to_px(seg[2], seg[3]);
                let _ = write!(
                    svg,
                    "<line x1=\"{x1:.2}\" y1=\"{:.2}\" x2=\"{x2:.2}\" y2=\"{:.2}\" stroke=\"rgb({shade},{},{shade})\" stroke-width=\"1\"/>\n",
                    y1 + 24.0,
                    y2 + 24.0,
                    60
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}
