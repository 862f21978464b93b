//! Cell-centered square grid with homogeneous Neumann boundaries.
//!
//! Boundaries are imposed with mirror ghost cells, so the 3-point second
//! difference in each direction is diagonalized by the type-II cosine
//! transform. That gives an exact fast solver for constant-coefficient
//! operators, used directly for implicit diffusion and as the
//! preconditioner of the conjugate-gradient solve for `ψ`.

use rustdct::{DctPlanner, TransformType2And3};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Result, SimError};

/// Row-major storage, index `j·n + i` with `i` along `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub lo: f64,
    pub h: f64,
}

impl Grid {
    pub fn new(n: usize, lo: f64, hi: f64) -> Self {
        Grid {
            n,
            lo,
            h: (hi - lo) / n as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Cell-center coordinate.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.n as f64 * self.h
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.n {
            let y = self.coord(j);
            for i in 0..self.n {
                out.push(f(self.coord(i), y));
            }
        }
        out
    }
}

/// `out = D_xx f`.
pub fn d2x(g: &Grid, f: &[f64], out: &mut [f64]) {
    let n = g.n;
    let s = 1.0 / (g.h * g.h);
    for (row, o) in f.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
        for i in 0..n {
            let l = row[i.saturating_sub(1)];
            let r = row[(i + 1).min(n - 1)];
            o[i] = (l - 2.0 * row[i] + r) * s;
        }
    }
}

/// `out = D_yy f`.
pub fn d2y(g: &Grid, f: &[f64], out: &mut [f64]) {
    let n = g.n;
    let s = 1.0 / (g.h * g.h);
    for j in 0..n {
        let (jm, jp) = (j.saturating_sub(1), (j + 1).min(n - 1));
        for i in 0..n {
            out[j * n + i] = (f[jm * n + i] - 2.0 * f[j * n + i] + f[jp * n + i]) * s;
        }
    }
}

/// `out = a·f − cx·D_xx f − cy·D_yy f`.
pub fn apply_operator(g: &Grid, a: f64, cx: f64, cy: f64, f: &[f64], out: &mut [f64]) {
    let n = g.n;
    let s = 1.0 / (g.h * g.h);
    for j in 0..n {
        let (jm, jp) = (j.saturating_sub(1), (j + 1).min(n - 1));
        for i in 0..n {
            let (im, ip) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let c = f[j * n + i];
            let dxx = (f[j * n + im] - 2.0 * c + f[j * n + ip]) * s;
            let dyy = (f[jm * n + i] - 2.0 * c + f[jp * n + i]) * s;
            out[j * n + i] = a * c - cx * dxx - cy * dyy;
        }
    }
}

pub fn mean(f: &[f64]) -> f64 {
    f.iter().sum::<f64>() / f.len() as f64
}

fn remove_mean(f: &mut [f64]) {
    let m = mean(f);
    f.iter_mut().for_each(|x| *x -= m);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Exact solver for `(a − cx D_xx − cy D_yy) x = b` via the 2-D cosine
/// transform. For `a = 0` the constant mode is dropped (zero-mean gauge).
pub struct Spectral {
    grid: Grid,
    dct2: Arc<dyn TransformType2And3<f64>>,
    dct3: Arc<dyn TransformType2And3<f64>>,
    /// Eigenvalues of `−D_xx` (equal to those of `−D_yy`).
    mu: Vec<f64>,
    work: Vec<f64>,
    scratch: Vec<f64>,
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n;
        let mut planner = DctPlanner::new();
        let dct2 = planner.plan_dct2(n);
        let dct3 = planner.plan_dct3(n);
        let mu = (0..n)
            .map(|k| (4.0 / (grid.h * grid.h)) * (PI * k as f64 / (2.0 * n as f64)).sin().powi(2))
            .collect();
        let scratch = vec![0.0; dct2.get_scratch_len().max(dct3.get_scratch_len())];
        Spectral {
            grid,
            dct2,
            dct3,
            mu,
            work: vec![0.0; grid.len()],
            scratch,
        }
    }

    fn transpose(n: usize, src: &[f64], dst: &mut [f64]) {
        for j in 0..n {
            for i in 0..n {
                dst[i * n + j] = src[j * n + i];
            }
        }
    }

    pub fn solve(&mut self, a: f64, cx: f64, cy: f64, b: &[f64], x: &mut [f64]) {
        let n = self.grid.n;
        x.copy_from_slice(b);
        for row in x.chunks_exact_mut(n) {
            self.dct2.process_dct2_with_scratch(row, &mut self.scratch);
        }
        Self::transpose(n, x, &mut self.work);
        // work[kx·n + j]; transform over j.
        for row in self.work.chunks_exact_mut(n) {
            self.dct2.process_dct2_with_scratch(row, &mut self.scratch);
        }
        let scale = (2.0 / n as f64).powi(2);
        for kx in 0..n {
            for ky in 0..n {
                let lam = a + cx * self.mu[kx] + cy * self.mu[ky];
                let c = &mut self.work[kx * n + ky];
                *c = if lam == 0.0 { 0.0 } else { *c * scale / lam };
            }
        }
        for row in self.work.chunks_exact_mut(n) {
            self.dct3.process_dct3_with_scratch(row, &mut self.scratch);
        }
        Self::transpose(n, &self.work, x);
        for row in x.chunks_exact_mut(n) {
            self.dct3.process_dct3_with_scratch(row, &mut self.scratch);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for the singular Neumann operator
/// `−(cx D_xx + cy D_yy)` on zero-mean grids. `x` is the warm start.
pub struct NeumannCg {
    pub grid: Grid,
    pub cx: f64,
    pub cy: f64,
    pub precondition: bool,
    spectral: Spectral,
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl NeumannCg {
    pub fn new(grid: Grid, cx: f64, cy: f64, precondition: bool) -> Self {
        let len = grid.len();
        NeumannCg {
            grid,
            cx,
            cy,
            precondition,
            spectral: Spectral::new(grid),
            r: vec![0.0; len],
            z: vec![0.0; len],
            p: vec![0.0; len],
            q: vec![0.0; len],
        }
    }

    fn precond(&mut self) {
        if self.precondition {
            self.spectral.solve(0.0, self.cx, self.cy, &self.r, &mut self.z);
        } else {
            self.z.copy_from_slice(&self.r);
        }
        remove_mean(&mut self.z);
    }

    pub fn solve(&mut self, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgStats> {
        let g = self.grid;
        let mut rhs = b.to_vec();
        remove_mean(&mut rhs);
        let bnorm = norm(&rhs);
        if bnorm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(CgStats {
                iterations: 0,
                relative_residual: 0.0,
            });
        }
        remove_mean(x);
        apply_operator(&g, 0.0, self.cx, self.cy, x, &mut self.q);
        for i in 0..rhs.len() {
            self.r[i] = rhs[i] - self.q[i];
        }
        let mut rel = norm(&self.r) / bnorm;
        if rel < tol {
            return Ok(CgStats {
                iterations: 0,
                relative_residual: rel,
            });
        }
        self.precond();
        self.p.copy_from_slice(&self.z);
        let mut rz = dot(&self.r, &self.z);
        for it in 1..=max_iter {
            apply_operator(&g, 0.0, self.cx, self.cy, &self.p, &mut self.q);
            let alpha = rz / dot(&self.p, &self.q);
            for i in 0..x.len() {
                x[i] += alpha * self.p[i];
                self.r[i] -= alpha * self.q[i];
            }
            rel = norm(&self.r) / bnorm;
            if rel < tol {
                remove_mean(x);
                // Confirm against the true residual, not the recurrence.
                apply_operator(&g, 0.0, self.cx, self.cy, x, &mut self.q);
                let true_rel = rhs.iter().zip(&self.q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / bnorm;
                if true_rel < tol {
                    return Ok(CgStats {
                        iterations: it,
                        relative_residual: true_rel,
                    });
                }
                for i in 0..rhs.len() {
                    self.r[i] = rhs[i] - self.q[i];
                }
            }
            self.precond();
            let rz_new = dot(&self.r, &self.z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..x.len() {
                self.p[i] = self.z[i] + beta * self.p[i];
            }
        }
        Err(SimError::NoConvergence {
            iterations: max_iter,
            residual: rel,
        })
    }
}
