use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const MIN_GRID_N: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Neumann,
}

/// Model and discretization parameters. Defaults are the reference
/// experiment: `ς = 0.3, α = 1, ε = 0.75, δ = 0.8, γ = 0.5`, with
/// `φ = −0.03 exp(−0.085 r²)` centered at `(35, 35)` on `[10, 60]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BidomainParams {
    pub varsigma: f64,
    pub alpha: f64,
    pub epsilon_aniso: f64,
    pub delta: f64,
    pub gamma: f64,
    pub tsb_center: (f64, f64),
    pub tsb_amp: f64,
    pub tsb_width: f64,
    pub domain: (f64, f64),
    pub grid_n: usize,
    pub bc: Boundary,
    /// Coefficient of `Δu`; 1 in the model, 0 only in kinetics tests.
    pub diffusion: f64,
    pub dt: f64,
    /// Reserved; the scheme is deterministic.
    pub seed: u64,
}

impl Default for BidomainParams {
    fn default() -> Self {
        BidomainParams {
            varsigma: 0.3,
            alpha: 1.0,
            epsilon_aniso: 0.75,
            delta: 0.8,
            gamma: 0.5,
            tsb_center: (35.0, 35.0),
            tsb_amp: -0.03,
            tsb_width: 0.085,
            domain: (10.0, 60.0),
            grid_n: 120,
            bc: Boundary::Neumann,
            diffusion: 1.0,
            dt: 0.05,
            seed: 0,
        }
    }
}

/// Coefficients of
///
/// ```text
/// u_t = (u − u³/3 − v)/ς + Δu + coupling·ψ_xx
/// ψ_xx + yy_ratio·ψ_yy = source·u_yy
/// ```
///
/// The elliptic line is read as
/// `(2+α+1/α) ψ_xx + (2+α(1−ε)+1/(α(1−ε))) ψ_yy = ε (1+1/(α(1−ε))) u_yy`,
/// divided through by `2+α+1/α`. In the form `∇²ψ + εg ψ_yy = εh u_yy`
/// this is `εg = yy_ratio − 1` and `εh = source`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub coupling: f64,
    pub yy_ratio: f64,
    pub source: f64,
}

impl Coefficients {
    pub fn from_params(p: &BidomainParams) -> Self {
        let (a, e) = (p.alpha, p.epsilon_aniso);
        if e == 0.0 {
            return Coefficients {
                coupling: 0.0,
                yy_ratio: 1.0,
                source: 0.0,
            };
        }
        let ae = a * (1.0 - e);
        let xx = 2.0 + a + 1.0 / a;
        let yy = 2.0 + ae + 1.0 / ae;
        let rhs = e * (1.0 + 1.0 / ae);
        Coefficients {
            coupling: a * e / (1.0 + ae),
            yy_ratio: yy / xx,
            source: rhs / xx,
        }
    }
}

impl BidomainParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.varsigma,
            self.alpha,
            self.epsilon_aniso,
            self.delta,
            self.gamma,
            self.tsb_center.0,
            self.tsb_center.1,
            self.tsb_amp,
            self.tsb_width,
            self.domain.0,
            self.domain.1,
            self.diffusion,
            self.dt,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InvalidParams("all parameters must be finite".into()));
        }
        if self.grid_n < MIN_GRID_N {
            return Err(SimError::GridTooSmall {
                n: self.grid_n,
                min: MIN_GRID_N,
            });
        }
        if self.domain.1 <= self.domain.0 {
            return Err(SimError::InvalidParams("domain must satisfy lo < hi".into()));
        }
        if self.varsigma <= 0.0 || self.alpha <= 0.0 {
            return Err(SimError::InvalidParams("varsigma and alpha must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.epsilon_aniso) {
            return Err(SimError::InvalidParams("epsilon_aniso must lie in [0, 1)".into()));
        }
        if self.diffusion < 0.0 || self.tsb_width < 0.0 || self.dt <= 0.0 {
            return Err(SimError::InvalidParams("diffusion, tsb_width must be >= 0 and dt > 0".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.domain.1 - self.domain.0) / self.grid_n as f64
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients::from_params(self)
    }

    /// `φ(x − cx, y − cy)`.
    pub fn phi(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.tsb_center.0, y - self.tsb_center.1);
        self.tsb_amp * (-self.tsb_width * (dx * dx + dy * dy)).exp()
    }

    /// Homogeneous equilibrium of the kinetics without `φ`: `v = (u+δ)/γ`
    /// and `u − u³/3 − v = 0`, solved by Newton from the excitable branch.
    pub fn rest_state(&self) -> (f64, f64) {
        let (d, g) = (self.delta, self.gamma);
        let mut u = -1.2;
        for _ in 0..60 {
            let f = u - u * u * u / 3.0 - (u + d) / g;
            let df = 1.0 - u * u - 1.0 / g;
            let step = f / df;
            u -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        (u, (u + d) / g)
    }

    pub fn without_tsb(&self) -> Self {
        BidomainParams {
            tsb_amp: 0.0,
            ..self.clone()
        }
    }

    /// The isotropic, unperturbed control medium.
    pub fn control(&self) -> Self {
        BidomainParams {
            epsilon_aniso: 0.0,
            tsb_amp: 0.0,
            ..self.clone()
        }
    }
}
