//! Spiral tip location.
//!
//! The tip is where the level set `u = 0` meets `u_t = 0`, with `u_t`
//! replaced by the difference of two successive states. Inside each cell of
//! the dual mesh (four neighbouring cell centers) both fields are
//! interpolated bilinearly and the pair of equations is reduced to a
//! quadratic.

use crate::grid::Grid;

/// Bilinear patch `a + b s + c t + d s t` on the unit square.
#[derive(Debug, Clone, Copy)]
struct Patch {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Patch {
    fn new(f00: f64, f10: f64, f01: f64, f11: f64) -> Self {
        Patch {
            a: f00,
            b: f10 - f00,
            c: f01 - f00,
            d: f11 - f10 - f01 + f00,
        }
    }

    fn eval(&self, s: f64, t: f64) -> f64 {
        self.a + self.b * s + self.c * t + self.d * s * t
    }
}

fn changes_sign(v: [f64; 4]) -> bool {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    lo <= 0.0 && hi >= 0.0 && hi > lo
}

/// Roots of `q2 t² + q1 t + q0` in `[0, 1]`.
fn unit_roots(q2: f64, q1: f64, q0: f64) -> Vec<f64> {
    let scale = q2.abs().max(q1.abs()).max(q0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    if q2.abs() <= 1e-12 * scale {
        if q1 != 0.0 {
            out.push(-q0 / q1);
        }
    } else {
        let disc = q1 * q1 - 4.0 * q2 * q0;
        if disc < 0.0 {
            return out;
        }
        let sq = disc.sqrt();
        // Numerically stable pair.
        let sgn = if q1 >= 0.0 { 1.0 } else { -1.0 };
        let q = -0.5 * (q1 + sgn * sq);
        if q != 0.0 {
            out.push(q / q2);
            out.push(q0 / q);
        } else {
            out.push(0.0);
        }
    }
    out.retain(|t| (-1e-12..=1.0 + 1e-12).contains(t));
    out
}

/// Intersections of the two zero sets inside one unit cell.
fn cell_intersections(f: Patch, g: Patch) -> Vec<(f64, f64)> {
    // Eliminate s from f = 0: s = −(a + c t)/(b + d t).
    let (a, b, c, d) = (f.a, f.b, f.c, f.d);
    let (e, k, l, m) = (g.a, g.b, g.c, g.d);
    // g(s,t)(b + d t) with s substituted:
    // (e + l t)(b + d t) − (k + m t)(a + c t) = 0
    let q2 = l * d - m * c;
    let q1 = e * d + l * b - k * c - m * a;
    let q0 = e * b - k * a;
    let mut out = Vec::new();
    for t in unit_roots(q2, q1, q0) {
        let den = b + d * t;
        let s = if den.abs() > 1e-14 {
            -(a + c * t) / den
        } else {
            // f is independent of s along this t; solve g for s instead.
            let gd = k + m * t;
            if gd.abs() < 1e-14 {
                continue;
            }
            -(e + l * t) / gd
        };
        if (-1e-12..=1.0 + 1e-12).contains(&s) {
            let (s, t) = (s.clamp(0.0, 1.0), t.clamp(0.0, 1.0));
            if f.eval(s, t).abs() < 1e-8 * (1.0 + a.abs()) {
                out.push((s, t));
            }
        }
    }
    out
}

/// All tip candidates in physical coordinates.
pub fn tip_candidates(grid: &Grid, u_prev: &[f64], u_next: &[f64]) -> Vec<(f64, f64)> {
    let n = grid.n;
    assert_eq!(u_prev.len(), grid.len());
    assert_eq!(u_next.len(), grid.len());
    let mut out = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let id = [j * n + i, j * n + i + 1, (j + 1) * n + i, (j + 1) * n + i + 1];
            let uu = id.map(|k| u_next[k]);
            if !changes_sign(uu) {
                continue;
            }
            let du = id.map(|k| u_next[k] - u_prev[k]);
            if !changes_sign(du) {
                continue;
            }
            let f = Patch::new(uu[0], uu[1], uu[2], uu[3]);
            let g = Patch::new(du[0], du[1], du[2], du[3]);
            for (s, t) in cell_intersections(f, g) {
                out.push((grid.coord(i) + s * grid.h, grid.coord(j) + t * grid.h));
            }
        }
    }
    out
}

/// The tip, or `None` when the level sets do not cross. With several
/// candidates the one nearest `previous` wins; otherwise the first found.
pub fn track_tip(
    grid: &Grid,
    u_prev: &[f64],
    u_next: &[f64],
    previous: Option<(f64, f64)>,
) -> Option<(f64, f64)> {
    let c = tip_candidates(grid, u_prev, u_next);
    match previous {
        None => c.first().copied(),
        Some((px, py)) => c.into_iter().min_by(|a, b| {
            let da = (a.0 - px).hypot(a.1 - py);
            let db = (b.0 - px).hypot(b.1 - py);
            da.total_cmp(&db)
        }),
    }
}
