//! Averaged vector fields, epicycle functions and manifold predictions.
//!
//! Around center `ξₖ` the averaged field is
//!
//! ```text
//! Mᵏ(w) = (1/2π) ∫₀^{2π} e^{it} Ĥₖ(w e^{−it}, w̄ e^{it}) dt,   Ĥₖ(w) = Hₖ(w − iv, w̄ + iv̄, 0)
//! ```
//!
//! which is `𝕊¹`-equivariant, so `Mᵏ(w) = w Lₖ(|w|²)`. The epicycle function
//! is `R₀ᵏ(ρ) = ρ Re Lₖ(ρ²)` and the phase function `Ψ₀ᵏ(ρ) = −Im Lₖ(ρ²)`.
//! Positive hyperbolic zeros of `R₀ᵏ` predict epicyclic manifolds.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;

use crate::cbe::{is_finite, SystemConfig};
use crate::error::{Error, Result};

pub const DEFAULT_QUADRATURE: usize = 256;
pub const MIN_QUADRATURE: usize = 64;
pub const ROOT_TOL: f64 = 1e-10;
pub const HYPERBOLICITY_FLOOR: f64 = 1e-6;
pub const DERIVATIVE_STEP: f64 = 1e-5;
pub const EQUIVARIANCE_WARN: f64 = 1e-8;
pub const DEFAULT_GRID_POINTS: usize = 400;

/// Averaged field evaluator for one center.
#[derive(Debug, Clone, Copy)]
pub struct Averager<'a> {
    config: &'a SystemConfig,
    k: usize,
    nodes: usize,
}

impl<'a> Averager<'a> {
    pub fn new(config: &'a SystemConfig, k: usize, nodes: usize) -> Result<Self> {
        config.check_index(k)?;
        if nodes < MIN_QUADRATURE {
            return Err(Error::InvalidArgument(format!(
                "quadrature order {nodes} below minimum {MIN_QUADRATURE}"
            )));
        }
        Ok(Averager { config, k, nodes })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// `Mᵏ(w)` by the composite trapezoid rule on `[0, 2π]`.
    pub fn average(&self, w: Complex64) -> Complex64 {
        let h = &self.config.tsb()[self.k];
        let shift = Complex64::i() * self.config.v();
        let zero = vec![0.0; self.config.n()];
        let n = self.nodes;
        let mut sum = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let rot = Complex64::from_polar(1.0, TAU * j as f64 / n as f64);
            let a = w * rot.conj() - shift;
            sum += rot * h.eval(a, a.conj(), &zero);
        }
        sum / n as f64
    }

    /// `R₀ᵏ(ρ) = Re Mᵏ(ρ)` for real `ρ > 0`.
    pub fn epicycle(&self, rho: f64) -> f64 {
        self.average(Complex64::new(rho, 0.0)).re
    }

    /// `Lₖ(ρ²) = Mᵏ(ρ)/ρ`.
    pub fn l_value(&self, rho: f64) -> Complex64 {
        self.average(Complex64::new(rho, 0.0)) / rho
    }

    pub fn equivariance_residual(&self, w: Complex64, theta: f64) -> f64 {
        let r = Complex64::from_polar(1.0, theta);
        (self.average(w * r) - r * self.average(w)).norm()
    }
}

/// `Mᵏ(w)`.
pub fn average_m(config: &SystemConfig, k: usize, w: Complex64, nodes: usize) -> Result<Complex64> {
    if !is_finite(w) {
        return Err(Error::NonFinite("average_m input"));
    }
    Ok(Averager::new(config, k, nodes)?.average(w))
}

/// `|Mᵏ(w e^{iθ}) − e^{iθ} Mᵏ(w)|`.
pub fn equivariance_check_m(config: &SystemConfig, k: usize, w: Complex64, theta: f64, nodes: usize) -> Result<f64> {
    if !is_finite(w) || !theta.is_finite() {
        return Err(Error::NonFinite("equivariance_check_m input"));
    }
    Ok(Averager::new(config, k, nodes)?.equivariance_residual(w, theta))
}

/// Sampled epicycle and phase functions for one center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub k: usize,
    pub rho_grid: Vec<f64>,
    pub l_values: Vec<Complex64>,
    pub r0_values: Vec<f64>,
    pub psi0_values: Vec<f64>,
    /// Largest `𝕊¹`-equivariance residual seen while building the profile.
    pub equivariance_residual: f64,
    pub warnings: Vec<String>,
}

impl RadialProfile {
    /// Builds a profile directly from sampled `L` values.
    pub fn from_l_values(k: usize, rho_grid: Vec<f64>, l_values: Vec<Complex64>) -> Result<Self> {
        check_grid(&rho_grid)?;
        if rho_grid.len() != l_values.len() {
            return Err(Error::InvalidArgument("grid and L lengths differ".into()));
        }
        let r0_values = rho_grid.iter().zip(&l_values).map(|(r, l)| r * l.re).collect();
        let psi0_values = l_values.iter().map(|l| -l.im).collect();
        Ok(RadialProfile {
            k,
            rho_grid,
            l_values,
            r0_values,
            psi0_values,
            equivariance_residual: 0.0,
            warnings: Vec::new(),
        })
    }

    /// CSV with columns `rho, re_L, im_L, R0, Psi0`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rho", "re_L", "im_L", "R0", "Psi0"])?;
        for i in 0..self.rho_grid.len() {
            w.write_record(&[
                fmt_f64(self.rho_grid[i]),
                fmt_f64(self.l_values[i].re),
                fmt_f64(self.l_values[i].im),
                fmt_f64(self.r0_values[i]),
                fmt_f64(self.psi0_values[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal representation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn check_grid(grid: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &r in grid {
        if !(r.is_finite() && r > prev) {
            return Err(Error::BadGrid(r));
        }
        prev = r;
    }
    Ok(())
}

/// 400 log-spaced points on `[1e-3 ρₛ, 10 ρₛ]`, `ρₛ = max(1, |v|)`.
pub fn default_rho_grid(config: &SystemConfig) -> Vec<f64> {
    log_grid(config.v().norm().max(1.0), DEFAULT_GRID_POINTS)
}

pub fn log_grid(scale: f64, points: usize) -> Vec<f64> {
    let (lo, hi) = ((1e-3 * scale).ln(), (10.0 * scale).ln());
    (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Samples `Lₖ`, `R₀ᵏ` and `Ψ₀ᵏ` on `rho_grid`.
pub fn radial_profile(config: &SystemConfig, k: usize, rho_grid: &[f64], nodes: usize) -> Result<RadialProfile> {
    check_grid(rho_grid)?;
    let avg = Averager::new(config, k, nodes)?;
    let l_values: Vec<Complex64> = rho_grid.par_iter().map(|&r| avg.l_value(r)).collect();
    let mut profile = RadialProfile::from_l_values(k, rho_grid.to_vec(), l_values)?;
    // Real-axis extraction relies on equivariance; probe it on a few rays.
    let probes = [0.37, 1.9, 4.1];
    let mut worst: f64 = 0.0;
    for (i, &th) in probes.iter().enumerate() {
        let r = rho_grid[(i + 1) * (rho_grid.len() - 1) / (probes.len() + 1)];
        let res = avg.equivariance_residual(Complex64::new(r, 0.0), th);
        worst = worst.max(res / (1.0 + avg.average(Complex64::new(r, 0.0)).norm()));
    }
    profile.equivariance_residual = worst;
    if worst > EQUIVARIANCE_WARN {
        profile.warnings.push(format!(
            "averaged field of center {k} is not S1-equivariant (residual {worst:e}); L extracted on the real axis only"
        ));
    }
    Ok(profile)
}

/// `I(ρ) = Re ∫₀^{2π} e^{−it} H̃(ρe^{−it}, ρe^{it}, 0) dt` with
/// `H̃(w) = H₁(w − iv, w̄ + iv̄)`. Defined for a single translational term.
pub fn lw_integral(config: &SystemConfig, rho: f64, nodes: usize) -> Result<f64> {
    if config.n() != 1 {
        return Err(Error::RequiresSingleTerm(config.n()));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::BadGrid(rho));
    }
    if nodes < MIN_QUADRATURE {
        return Err(Error::InvalidArgument(format!("quadrature order {nodes} below minimum")));
    }
    let h = &config.tsb()[0];
    let shift = Complex64::i() * config.v();
    let zero = [0.0];
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..nodes {
        let rot = Complex64::from_polar(1.0, TAU * j as f64 / nodes as f64);
        let a = rho * rot.conj() - shift;
        sum += rot.conj() * h.eval(a, a.conj(), &zero);
    }
    Ok((sum * (TAU / nodes as f64)).re)
}

/// How a root was refined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub bracket: (f64, f64),
    pub bisection_steps: usize,
    pub secant_steps: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumRoot {
    pub rho_star: f64,
    pub gamma: f64,
    pub refined_by: Refinement,
}

/// A sign change whose refined root failed the hyperbolicity floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootWarning {
    pub rho: f64,
    pub gamma: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RootReport {
    pub roots: Vec<EquilibriumRoot>,
    pub rejected: Vec<RootWarning>,
}

/// Safeguarded secant iteration inside a sign-change bracket: secant steps
/// that leave the bracket or stall fall back to bisection.
fn refine<F: Fn(f64) -> f64>(f: &F, a0: f64, b0: f64, fa0: f64, fb0: f64) -> (f64, Refinement) {
    let (mut a, mut b, mut fa, mut fb) = (a0, b0, fa0, fb0);
    let (mut bis, mut sec) = (0, 0);
    let mut x = if fa.abs() < fb.abs() { a } else { b };
    let mut fx = if fa.abs() < fb.abs() { fa } else { fb };
    let mut last_width = b - a;
    for _ in 0..300 {
        if fx.abs() < ROOT_TOL * 1e-2 || (b - a) <= 4.0 * f64::EPSILON * b.abs() {
            break;
        }
        let secant = b - fb * (b - a) / (fb - fa);
        let width = b - a;
        let use_secant = secant.is_finite() && secant > a && secant < b && width < 0.75 * last_width + 1e-300;
        let candidate = if use_secant || sec == 0 && secant > a && secant < b {
            sec += 1;
            secant
        } else {
            bis += 1;
            0.5 * (a + b)
        };
        last_width = width;
        let fc = f(candidate);
        if fc == 0.0 {
            x = candidate;
            fx = 0.0;
            break;
        }
        if (fc < 0.0) == (fa < 0.0) {
            a = candidate;
            fa = fc;
        } else {
            b = candidate;
            fb = fc;
        }
        if fc.abs() <= fx.abs() {
            x = candidate;
            fx = fc;
        }
    }
    (
        x,
        Refinement {
            bracket: (a0, b0),
            bisection_steps: bis,
            secant_steps: sec,
            residual: fx.abs(),
        },
    )
}

/// Locates every sign change of `R₀` on the profile grid, refines it with
/// `r0`, and differentiates centrally with step `1e-5·ρ*`. Roots with
/// `|γ| < 1e-6` are moved to [`RootReport::rejected`].
pub fn find_equilibria<F: Fn(f64) -> f64>(profile: &RadialProfile, r0: F) -> RootReport {
    let mut report = RootReport::default();
    let g = &profile.rho_grid;
    let v = &profile.r0_values;
    let mut i = 0;
    while i + 1 < g.len() {
        let (fa, fb) = (v[i], v[i + 1]);
        let bracket = if fa == 0.0 {
            // Exact zero on the grid: a root if the sign changes across it.
            let left = if i > 0 { v[i - 1] } else { fb };
            if left * fb < 0.0 { Some((g[i], g[i], 0.0, 0.0)) } else { None }
        } else if fa * fb < 0.0 {
            Some((g[i], g[i + 1], fa, fb))
        } else {
            None
        };
        if let Some((a, b, fa, fb)) = bracket {
            let (rho, rec) = if a == b {
                (
                    a,
                    Refinement {
                        bracket: (a, b),
                        bisection_steps: 0,
                        secant_steps: 0,
                        residual: 0.0,
                    },
                )
            } else {
                refine(&r0, a, b, fa, fb)
            };
            let h = DERIVATIVE_STEP * rho;
            let gamma = (r0(rho + h) - r0(rho - h)) / (2.0 * h);
            if gamma.abs() < HYPERBOLICITY_FLOOR {
                report.rejected.push(RootWarning {
                    rho,
                    gamma,
                    message: format!("root at rho = {rho} is not hyperbolic (|gamma| = {:e})", gamma.abs()),
                });
            } else {
                report.roots.push(EquilibriumRoot {
                    rho_star: rho,
                    gamma,
                    refined_by: rec,
                });
            }
        }
        i += 1;
    }
    report
}

/// Profile on `grid` plus its refined roots, using the same averager.
pub fn analyze_center(
    config: &SystemConfig,
    k: usize,
    grid: &[f64],
    nodes: usize,
) -> Result<(RadialProfile, RootReport)> {
    let profile = radial_profile(config, k, grid, nodes)?;
    let avg = Averager::new(config, k, nodes)?;
    let report = find_equilibria(&profile, |r| avg.epicycle(r));
    Ok((profile, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    /// `λₖ = 0`: the phase space is foliated by invariant tori.
    Foliated,
}

impl Stability {
    /// Sign rule: the manifold attracts iff `λₖ γ < 0`.
    pub fn from_sign_rule(lambda_k: f64, gamma: f64) -> Self {
        let s = lambda_k * gamma;
        if lambda_k == 0.0 {
            Stability::Foliated
        } else if s < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Wedge {
    /// `|λⱼ| < V_{k,j} |λₖ|` for the listed `j`. When a `ȷ* = 1` rotational
    /// term is present, `beta_drift = β g₋₁(β)` is the constant drift that
    /// the wedge `|β| < K|λₖ|` keeps small.
    Ratios {
        pivot: usize,
        ratios: Vec<(usize, f64)>,
        beta_drift: Option<Complex64>,
    },
    /// `ȷ* > 1`: the manifold persists in a deleted neighbourhood of the
    /// origin and its center of drifting sits at `ξₖ`.
    DeletedNeighbourhood { pivot: usize, jstar: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPrediction {
    pub center_index: usize,
    pub root: EquilibriumRoot,
    pub stability: Stability,
    pub lambda_k: f64,
    pub drift_center_estimate: Complex64,
    /// `Ψ₀ᵏ(ρ*)`; the slow rotation on the torus is `1 + λₖ Ψ₀ᵏ(ρ*)` to first order.
    pub psi0_at_root: f64,
    pub wedge: Wedge,
}

/// Turns a hyperbolic root into a prediction. `ratios` are caller-supplied
/// wedge ratios `V_{k,j}`.
pub fn predict_manifold(
    config: &SystemConfig,
    k: usize,
    root: &EquilibriumRoot,
    ratios: &[(usize, f64)],
    nodes: usize,
) -> Result<ManifoldPrediction> {
    if root.gamma.abs() < HYPERBOLICITY_FLOOR || !root.gamma.is_finite() {
        return Err(Error::NonHyperbolic {
            rho: root.rho_star,
            gamma: root.gamma,
        });
    }
    let xi = config.center(k)?;
    let lambda_k = config.lambda()[k];
    let avg = Averager::new(config, k, nodes)?;
    let psi0 = -avg.l_value(root.rho_star).im;
    let wedge = match config.rsb() {
        Some(g) if g.jstar() > 1 => Wedge::DeletedNeighbourhood {
            pivot: k,
            jstar: g.jstar(),
        },
        Some(g) => Wedge::Ratios {
            pivot: k,
            ratios: ratios.to_vec(),
            beta_drift: Some(config.beta() * g.coeff(-1, config.beta())),
        },
        None => Wedge::Ratios {
            pivot: k,
            ratios: ratios.to_vec(),
            beta_drift: None,
        },
    };
    Ok(ManifoldPrediction {
        center_index: k,
        root: root.clone(),
        stability: Stability::from_sign_rule(lambda_k, root.gamma),
        lambda_k,
        drift_center_estimate: xi,
        psi0_at_root: psi0,
        wedge,
    })
}
