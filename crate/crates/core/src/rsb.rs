//! Frame changes that remove a rotational symmetry-breaking term.
//!
//! For `ȷ* = 1` the shift `F_G` is an explicit Fourier series and leaves the
//! constant drift `β g₋₁(β)`. For `ȷ* > 1` the shift contains a periodic
//! function `U(β, λ₁)` defined implicitly by `𝒴U = λ₁ H(U − iv + βS)` with
//! `𝒴u = iu + u′` and `S = Σ gₘ e^{imȷ*t} / (i(mȷ*+1))`.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::io::Write;

use crate::averaging::fmt_f64;
use crate::cbe::{is_finite, RsbTerm, SystemConfig};
use crate::error::{Error, Result};

pub const COLLOCATION_POINTS: usize = 128;
pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;
pub const MAX_PICARD_ITERATIONS: usize = 200;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `u(t) = Σ uₘ e^{i m ȷ* t}`, periodic with period `2π/ȷ*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    pub base_frequency: u32,
    pub coeffs: BTreeMap<i32, Complex64>,
}

impl FourierSeries {
    pub fn zero(base_frequency: u32) -> Self {
        FourierSeries {
            base_frequency,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(base_frequency: u32, c: Complex64) -> Self {
        let mut s = FourierSeries::zero(base_frequency);
        s.coeffs.insert(0, c);
        s
    }

    pub fn coeff(&self, m: i32) -> Complex64 {
        self.coeffs.get(&m).copied().unwrap_or_default()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let j = self.base_frequency as f64;
        self.coeffs
            .iter()
            .map(|(&m, &c)| c * Complex64::from_polar(1.0, m as f64 * j * t))
            .sum()
    }

    pub fn period(&self) -> f64 {
        TAU / self.base_frequency as f64
    }

    fn map(&self, f: impl Fn(i32, Complex64) -> Complex64) -> Self {
        FourierSeries {
            base_frequency: self.base_frequency,
            coeffs: self.coeffs.iter().map(|(&m, &c)| (m, f(m, c))).collect(),
        }
    }

    /// Writes `m, re, im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "re", "im"])?;
        for (&m, c) in &self.coeffs {
            w.write_record(&[m.to_string(), fmt_f64(c.re), fmt_f64(c.im)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(𝒴u)ₘ = i(1 + mȷ*) uₘ`.
pub fn apply_y(u: &FourierSeries) -> FourierSeries {
    let j = u.base_frequency as f64;
    u.map(|m, c| I * (1.0 + m as f64 * j) * c)
}

/// Coefficient-wise inverse of [`apply_y`]. Rejected for `ȷ* = 1`, where the
/// `m = −1` mode is annihilated.
pub fn invert_y(u: &FourierSeries) -> Result<FourierSeries> {
    if u.base_frequency <= 1 {
        return Err(Error::WrongJstar {
            expected: "> 1",
            got: u.base_frequency,
        });
    }
    let j = u.base_frequency as f64;
    Ok(u.map(|m, c| c / (I * (1.0 + m as f64 * j))))
}

/// `F_G` for `ȷ* = 1` together with the excluded resonant coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameShiftJ1 {
    pub value: Complex64,
    pub g_minus1: Complex64,
    /// `β g₋₁(β)`, the constant drift left in the shifted equation.
    pub drift: Complex64,
}

/// `F_G(t, β) = e^{it}[−iv + β Σ_{m≠−1} gₘ(β) e^{imt} / (i(m+1))]`.
pub fn f_g_j1(rsb: &RsbTerm, v: Complex64, t: f64, beta: f64) -> Result<FrameShiftJ1> {
    if rsb.jstar() != 1 {
        return Err(Error::WrongJstar {
            expected: "1",
            got: rsb.jstar(),
        });
    }
    let sum: Complex64 = rsb
        .modes(beta)
        .filter(|&(m, _)| m != -1)
        .map(|(m, g)| g * Complex64::from_polar(1.0, m as f64 * t) / (I * (m as f64 + 1.0)))
        .sum();
    let g_minus1 = rsb.coeff(-1, beta);
    Ok(FrameShiftJ1 {
        value: Complex64::from_polar(1.0, t) * (-I * v + beta * sum),
        g_minus1,
        drift: beta * g_minus1,
    })
}

/// `S(t) = Σ gₘ(β) e^{imȷ*t} / (i(mȷ*+1))`, so that `𝒴S = G`.
fn s_series(rsb: &RsbTerm, beta: f64) -> FourierSeries {
    let j = rsb.jstar() as f64;
    FourierSeries {
        base_frequency: rsb.jstar(),
        coeffs: rsb
            .modes(beta)
            .map(|(m, g)| (m, g / (I * (m as f64 * j + 1.0))))
            .collect(),
    }
}

/// The periodic solution `U(β, λ₁)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSolutionU {
    pub series: FourierSeries,
    pub residual_norm: f64,
    pub iterations: usize,
    pub beta: f64,
    pub lambda1: f64,
    /// Residual before each update, starting from `u = 0`.
    pub residual_history: Vec<f64>,
}

fn single_rsb(config: &SystemConfig) -> Result<&RsbTerm> {
    if config.n() != 1 {
        return Err(Error::RequiresSingleTerm(config.n()));
    }
    let rsb = config
        .rsb()
        .ok_or_else(|| Error::Config("configuration has no rsb term".into()))?;
    if rsb.jstar() <= 1 {
        return Err(Error::WrongJstar {
            expected: "> 1",
            got: rsb.jstar(),
        });
    }
    Ok(rsb)
}

/// Solves `𝒴u = λ₁ H(u − iv + βS)` by Picard iteration
/// `u ← 𝒴⁻¹(λ₁ H(u − iv + βS))` on 128 collocation points of one period
/// `2π/ȷ*`, keeping modes `|m| ≤ 4M`. The residual is the sup norm over the
/// collocation points.
pub fn solve_u(config: &SystemConfig, beta: f64, lambda1: f64, tol: f64) -> Result<PeriodicSolutionU> {
    let rsb = single_rsb(config)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::BadTolerance(tol));
    }
    if !(beta.is_finite() && lambda1.is_finite()) {
        return Err(Error::NonFinite("solve_u parameters"));
    }
    let jstar = rsb.jstar();
    let n = COLLOCATION_POINTS;
    let kmax = (4 * rsb.truncation().max(1)).min(n / 2 - 1) as i32;
    let h = &config.tsb()[0];
    let lam = [lambda1];
    let shift = -I * config.v();
    let s = s_series(rsb, beta);
    let base: Vec<Complex64> = (0..n)
        .map(|j| shift + beta * s.eval(TAU * j as f64 / (jstar as f64 * n as f64)))
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let jf = jstar as f64;
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    let mut u_nodes = vec![Complex64::new(0.0, 0.0); n];
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        // Nodal values of 𝒴u and of the right-hand side.
        let mut yu: Vec<Complex64> = (0..n)
            .map(|i| {
                let m = if i <= n / 2 { i as i32 } else { i as i32 - n as i32 };
                I * (1.0 + m as f64 * jf) * u[i]
            })
            .collect();
        inv.process(&mut yu);
        u_nodes.copy_from_slice(&u);
        inv.process(&mut u_nodes);
        let mut rhs: Vec<Complex64> = (0..n)
            .map(|j| {
                let a = u_nodes[j] + base[j];
                lambda1 * h.eval(a, a.conj(), &lam)
            })
            .collect();
        if rhs.iter().any(|z| !is_finite(*z)) {
            return Err(Error::NonFinite("solve_u iterate"));
        }
        let residual = yu.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        history.push(residual);
        if residual < tol {
            let coeffs = (0..n)
                .filter_map(|i| {
                    let m = if i <= n / 2 { i as i32 } else { i as i32 - n as i32 };
                    (u[i] != Complex64::new(0.0, 0.0)).then_some((m, u[i]))
                })
                .collect();
            return Ok(PeriodicSolutionU {
                series: FourierSeries {
                    base_frequency: jstar,
                    coeffs,
                },
                residual_norm: residual,
                iterations,
                beta,
                lambda1,
                residual_history: history,
            });
        }
        if iterations >= MAX_PICARD_ITERATIONS {
            return Err(Error::NoConvergence { iterations, residual });
        }
        fwd.process(&mut rhs);
        for i in 0..n {
            let m = if i <= n / 2 { i as i32 } else { i as i32 - n as i32 };
            u[i] = if m.abs() <= kmax {
                rhs[i] / (n as f64 * I * (1.0 + m as f64 * jf))
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        iterations += 1;
    }
}

fn check_params(u: &PeriodicSolutionU, beta: f64, lambda1: f64) -> Result<()> {
    if u.beta != beta || u.lambda1 != lambda1 {
        return Err(Error::ParameterMismatch {
            solved: (u.beta, u.lambda1),
            requested: (beta, lambda1),
        });
    }
    Ok(())
}

/// `F_G e^{−it} = −iv + βS(t) + U(t)`, periodic with period `2π/ȷ*`.
fn reduced_shift(config: &SystemConfig, rsb: &RsbTerm, u: &PeriodicSolutionU, t: f64) -> Complex64 {
    -I * config.v() + u.beta * s_series(rsb, u.beta).eval(t) + u.series.eval(t)
}

/// `F_G(t, β, λ₁) = e^{it}[−iv + β Σ gₘ e^{imȷ*t}/(i(mȷ*+1)) + U(t)]`.
pub fn f_g_jstar(config: &SystemConfig, u: &PeriodicSolutionU, t: f64, beta: f64, lambda1: f64) -> Result<Complex64> {
    let rsb = single_rsb(config)?;
    check_params(u, beta, lambda1)?;
    Ok(Complex64::from_polar(1.0, t) * reduced_shift(config, rsb, u, t))
}

/// `Ĥ(w, t) = H(w + F_G e^{−it}) − H(F_G e^{−it})`; vanishes at `w = 0`.
pub fn hat_h(config: &SystemConfig, u: &PeriodicSolutionU, w: Complex64, t: f64) -> Result<Complex64> {
    let rsb = single_rsb(config)?;
    let h = &config.tsb()[0];
    let lam = [u.lambda1];
    let f = reduced_shift(config, rsb, u, t);
    let a = w + f;
    Ok(h.eval(a, a.conj(), &lam) - h.eval(f, f.conj(), &lam))
}

/// Right-hand side of the shifted equation `ż = λ₁ e^{it} Ĥ(z e^{−it}, t)`.
pub fn shifted_rhs(config: &SystemConfig, u: &PeriodicSolutionU, z: Complex64, t: f64) -> Result<Complex64> {
    let r = Complex64::from_polar(1.0, t);
    Ok(u.lambda1 * r * hat_h(config, u, z * r.conj(), t)?)
}
