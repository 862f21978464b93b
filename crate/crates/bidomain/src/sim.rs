//! Semi-implicit BDF2 time stepping.
//!
//! With `N_u = (u − u³/3 − v)/ς + coupling·ψ_xx` and `N_v = ς(u + δ − γv) + φ`,
//!
//! ```text
//! (3u' − 4u + u⁻)/(2Δt) = DΔu' + 2N_u − N_u⁻
//! (3v' − 4v + v⁻)/(2Δt) =        2N_v − N_v⁻
//! ```
//!
//! The first step is the one-step IMEX Euler scheme. `ψ` is re-solved from
//! the current `u` before every step.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::grid::{d2x, d2y, CgStats, Grid, NeumannCg, Spectral};
use crate::params::{BidomainParams, Coefficients};

pub const PSI_TOL: f64 = 1e-8;
pub const PSI_MAX_ITER: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Values from the previous step needed by the two-step scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub nu: Vec<f64>,
    pub nv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BidomainState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub psi: Vec<f64>,
    pub t: f64,
    pub step: u64,
    pub tip_path: Vec<TipSample>,
    pub history: Option<History>,
}

impl BidomainState {
    pub fn uniform(n: usize, u: f64, v: f64) -> Self {
        BidomainState {
            u: vec![u; n * n],
            v: vec![v; n * n],
            psi: vec![0.0; n * n],
            t: 0.0,
            step: 0,
            tip_path: Vec::new(),
            history: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.psi).all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> (f64, f64) {
        let m = |f: &[f64]| f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        (m(&self.u), m(&self.v))
    }
}

pub struct Simulator {
    pub params: BidomainParams,
    pub grid: Grid,
    pub coeffs: Coefficients,
    phi: Vec<f64>,
    psi_solver: NeumannCg,
    diffusion: Spectral,
    work: Vec<f64>,
    rhs: Vec<f64>,
    pub last_psi: Option<CgStats>,
}

impl Simulator {
    pub fn new(params: BidomainParams) -> Result<Self> {
        params.validate()?;
        let grid = Grid::new(params.grid_n, params.domain.0, params.domain.1);
        let coeffs = params.coefficients();
        let phi = grid.sample(|x, y| params.phi(x, y));
        Ok(Simulator {
            psi_solver: NeumannCg::new(grid, 1.0, coeffs.yy_ratio, true),
            diffusion: Spectral::new(grid),
            work: vec![0.0; grid.len()],
            rhs: vec![0.0; grid.len()],
            params,
            grid,
            coeffs,
            phi,
            last_psi: None,
        })
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn rest(&self) -> BidomainState {
        let (u, v) = self.params.rest_state();
        BidomainState::uniform(self.grid.n, u, v)
    }

    /// Solves `ψ_xx + r ψ_yy = s u_yy` in the zero-mean gauge, warm-started
    /// from `state.psi`.
    pub fn solve_psi(&mut self, state: &mut BidomainState) -> Result<CgStats> {
        if state.u.len() != self.grid.len() {
            return Err(SimError::GridMismatch(state.u.len(), self.grid.len()));
        }
        if self.coeffs.source == 0.0 {
            state.psi.iter_mut().for_each(|p| *p = 0.0);
            let st = CgStats {
                iterations: 0,
                relative_residual: 0.0,
            };
            self.last_psi = Some(st);
            return Ok(st);
        }
        // The solver works with −(D_xx + r D_yy), hence the sign.
        d2y(&self.grid, &state.u, &mut self.rhs);
        let s = -self.coeffs.source;
        self.rhs.iter_mut().for_each(|b| *b *= s);
        let st = self.psi_solver.solve(&self.rhs, &mut state.psi, PSI_TOL, PSI_MAX_ITER)?;
        self.last_psi = Some(st);
        Ok(st)
    }

    fn nonlinear(&mut self, state: &BidomainState) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let inv_s = 1.0 / p.varsigma;
        let mut nu = vec![0.0; state.u.len()];
        let mut nv = vec![0.0; state.u.len()];
        if self.coeffs.coupling != 0.0 {
            d2x(&self.grid, &state.psi, &mut self.work);
        } else {
            self.work.iter_mut().for_each(|w| *w = 0.0);
        }
        let c = self.coeffs.coupling;
        for i in 0..nu.len() {
            let (u, v) = (state.u[i], state.v[i]);
            nu[i] = (u - u * u * u / 3.0 - v) * inv_s + c * self.work[i];
            nv[i] = p.varsigma * (u + p.delta - p.gamma * v) + self.phi[i];
        }
        (nu, nv)
    }

    /// Advances one step of size `dt`.
    pub fn step(&mut self, state: &mut BidomainState, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::InvalidParams(format!("bad time step {dt}")));
        }
        self.solve_psi(state)?;
        let (nu, nv) = self.nonlinear(state);
        let d = self.params.diffusion;
        let len = state.u.len();
        let (u_new, v_new) = match &state.history {
            None => {
                for i in 0..len {
                    self.rhs[i] = state.u[i] + dt * nu[i];
                }
                let mut u = vec![0.0; len];
                self.diffusion.solve(1.0, dt * d, dt * d, &self.rhs, &mut u);
                let v: Vec<f64> = (0..len).map(|i| state.v[i] + dt * nv[i]).collect();
                (u, v)
            }
            Some(h) => {
                let c = 2.0 * dt / 3.0;
                for i in 0..len {
                    self.rhs[i] = (4.0 * state.u[i] - h.u[i]) / 3.0 + c * (2.0 * nu[i] - h.nu[i]);
                }
                let mut u = vec![0.0; len];
                self.diffusion.solve(1.0, c * d, c * d, &self.rhs, &mut u);
                let v: Vec<f64> = (0..len)
                    .map(|i| (4.0 * state.v[i] - h.v[i]) / 3.0 + c * (2.0 * nv[i] - h.nv[i]))
                    .collect();
                (u, v)
            }
        };
        let old_u = std::mem::replace(&mut state.u, u_new);
        let old_v = std::mem::replace(&mut state.v, v_new);
        state.history = Some(History {
            u: old_u,
            v: old_v,
            nu,
            nv,
        });
        state.t += dt;
        state.step += 1;
        if !state.u.iter().chain(&state.v).all(|x| x.is_finite()) {
            return Err(SimError::NonFinite {
                step: state.step,
                t: state.t,
            });
        }
        Ok(())
    }
}
