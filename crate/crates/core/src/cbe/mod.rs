//! The center bundle equation
//!
//! ```text
//! ṗ = e^{it} [ v + β G(t, β) + Σⱼ λⱼ Hⱼ((p − ξⱼ)e^{−it}, conj(p − ξⱼ)e^{it}, λ) ]
//! ```
//!
//! on `ℂ × 𝕊¹`, with `n` translational terms `Hⱼ` centred at distinct points
//! `ξⱼ` and at most one rotational term `G`.

mod catalogue;
mod group;
mod rsb_term;
mod term;

pub use catalogue::{builtin_families, BuiltinFamily};
pub use group::{wrap_angle, GroupElement};
pub use rsb_term::{RsbTerm, DEFAULT_TRUNCATION};
pub use term::{Rational, TsbKind, TsbTerm, MONOMIALS, POLY_GAUSS_HEADER};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

#[inline]
pub(crate) fn is_finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// A complete center bundle problem. Immutable once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigRecord", into = "ConfigRecord")]
pub struct SystemConfig {
    centers: Vec<Complex64>,
    v: Complex64,
    tsb: Vec<TsbTerm>,
    rsb: Option<RsbTerm>,
    beta: f64,
    lambda: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigRecord {
    n: usize,
    centers: Vec<Complex64>,
    v: Complex64,
    tsb: Vec<TsbTerm>,
    #[serde(default)]
    rsb: Option<RsbTerm>,
    #[serde(default)]
    beta: f64,
    lambda: Vec<f64>,
}

impl TryFrom<ConfigRecord> for SystemConfig {
    type Error = Error;

    fn try_from(r: ConfigRecord) -> Result<Self> {
        if r.n != r.centers.len() || r.n != r.tsb.len() || r.n != r.lambda.len() {
            return Err(Error::Config(format!(
                "n = {} but centers/tsb/lambda have lengths {}/{}/{}",
                r.n,
                r.centers.len(),
                r.tsb.len(),
                r.lambda.len()
            )));
        }
        SystemConfig::new(r.centers, r.v, r.tsb, r.rsb, r.beta, r.lambda)
    }
}

impl From<SystemConfig> for ConfigRecord {
    fn from(c: SystemConfig) -> Self {
        ConfigRecord {
            n: c.centers.len(),
            centers: c.centers,
            v: c.v,
            tsb: c.tsb,
            rsb: c.rsb,
            beta: c.beta,
            lambda: c.lambda,
        }
    }
}

impl SystemConfig {
    pub fn new(
        centers: Vec<Complex64>,
        v: Complex64,
        tsb: Vec<TsbTerm>,
        rsb: Option<RsbTerm>,
        beta: f64,
        lambda: Vec<f64>,
    ) -> Result<Self> {
        let n = centers.len();
        if tsb.len() != n || lambda.len() != n {
            return Err(Error::Config(format!(
                "{n} centers but {} tsb terms and {} lambda entries",
                tsb.len(),
                lambda.len()
            )));
        }
        if !centers.iter().all(|&c| is_finite(c)) {
            return Err(Error::NonFinite("centers"));
        }
        if !is_finite(v) {
            return Err(Error::NonFinite("v"));
        }
        if !beta.is_finite() || !lambda.iter().all(|l| l.is_finite()) {
            return Err(Error::NonFinite("parameters"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if centers[i] == centers[j] {
                    return Err(Error::Config(format!("centers {i} and {j} coincide")));
                }
            }
        }
        Ok(SystemConfig {
            centers,
            v,
            tsb,
            rsb,
            beta,
            lambda,
        })
    }

    /// One translational term at `center`, no rotational term, `β = 0`.
    pub fn single(center: Complex64, v: Complex64, term: TsbTerm, lambda: f64) -> Self {
        SystemConfig::new(vec![center], v, vec![term], None, 0.0, vec![lambda])
            .expect("single-term config with finite data is valid")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn n(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[Complex64] {
        &self.centers
    }

    pub fn center(&self, k: usize) -> Result<Complex64> {
        self.check_index(k)?;
        Ok(self.centers[k])
    }

    pub fn v(&self) -> Complex64 {
        self.v
    }

    pub fn tsb(&self) -> &[TsbTerm] {
        &self.tsb
    }

    pub fn rsb(&self) -> Option<&RsbTerm> {
        self.rsb.as_ref()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k < self.n() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: k, n: self.n() })
        }
    }

    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self> {
        SystemConfig::new(
            self.centers.clone(),
            self.v,
            self.tsb.clone(),
            self.rsb.clone(),
            self.beta,
            lambda,
        )
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        SystemConfig::new(
            self.centers.clone(),
            self.v,
            self.tsb.clone(),
            self.rsb.clone(),
            beta,
            self.lambda.clone(),
        )
    }

    pub fn with_rsb(&self, rsb: Option<RsbTerm>) -> Self {
        SystemConfig {
            rsb,
            ..self.clone()
        }
    }

    /// All centers translated by `x`.
    pub fn translated(&self, x: Complex64) -> Self {
        SystemConfig {
            centers: self.centers.iter().map(|&c| c + x).collect(),
            ..self.clone()
        }
    }

    /// Right-hand side without input validation; used by the integrator.
    #[inline]
    pub fn rhs_unchecked(&self, p: Complex64, t: f64) -> Complex64 {
        let rot = Complex64::from_polar(1.0, t);
        let rot_inv = rot.conj();
        let mut bracket = self.v;
        if self.beta != 0.0 {
            if let Some(g) = &self.rsb {
                bracket += self.beta * g.eval(t, self.beta);
            }
        }
        for ((xi, h), &l) in self.centers.iter().zip(&self.tsb).zip(&self.lambda) {
            if l == 0.0 {
                continue;
            }
            let d = p - xi;
            bracket += l * h.eval(d * rot_inv, d.conj() * rot, &self.lambda);
        }
        rot * bracket
    }

    /// `ṗ` at `(p, t)`.
    pub fn rhs(&self, p: Complex64, t: f64) -> Result<Complex64> {
        if !is_finite(p) || !t.is_finite() {
            return Err(Error::NonFinite("rhs input"));
        }
        Ok(self.rhs_unchecked(p, t))
    }

    /// Co-rotating coordinate `z = p − ξₖ + i e^{it} v`.
    pub fn corotating_frame(&self, p: Complex64, t: f64, k: usize) -> Result<Complex64> {
        self.check_index(k)?;
        Ok(p - self.centers[k] + Complex64::i() * Complex64::from_polar(1.0, t) * self.v)
    }

    /// Inverse of [`SystemConfig::corotating_frame`].
    pub fn from_corotating_frame(&self, z: Complex64, t: f64, k: usize) -> Result<Complex64> {
        self.check_index(k)?;
        Ok(z + self.centers[k] - Complex64::i() * Complex64::from_polar(1.0, t) * self.v)
    }

    /// `|e^{iθ} f(p, t) − f(g·p, t + θ)|`: how far `g` is from mapping
    /// solutions through `(p, t)` to solutions.
    pub fn equivariance_residual(&self, g: &GroupElement, p: Complex64, t: f64) -> f64 {
        let lhs = Complex64::from_polar(1.0, g.theta) * self.rhs_unchecked(p, t);
        let rhs = self.rhs_unchecked(g.apply(p), t + g.theta);
        (lhs - rhs).norm()
    }
}
