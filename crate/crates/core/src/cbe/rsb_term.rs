use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const DEFAULT_TRUNCATION: usize = 8;

/// Rotational symmetry-breaking term `G(t, β) = Σ gₘ(β) e^{i m ȷ* t}`,
/// stored by its truncated Fourier data. Each `gₘ(β)` is a polynomial in `β`
/// of degree at most two, `gₘ(β) = a + bβ + cβ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RsbRecord", into = "RsbRecord")]
pub struct RsbTerm {
    jstar: u32,
    truncation: usize,
    coeffs: BTreeMap<i32, [Complex64; 3]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CoeffRecord {
    m: i32,
    poly: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RsbRecord {
    jstar: u32,
    #[serde(rename = "M", default = "default_truncation")]
    truncation: usize,
    #[serde(default)]
    coeffs: Vec<CoeffRecord>,
}

fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}

impl TryFrom<RsbRecord> for RsbTerm {
    type Error = Error;

    fn try_from(r: RsbRecord) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for c in r.coeffs {
            if c.poly.len() > 3 {
                return Err(Error::Config(format!(
                    "rsb coefficient m = {} has degree {} in beta (max 2)",
                    c.m,
                    c.poly.len() - 1
                )));
            }
            let mut p = [Complex64::new(0.0, 0.0); 3];
            p[..c.poly.len()].copy_from_slice(&c.poly);
            if coeffs.insert(c.m, p).is_some() {
                return Err(Error::Config(format!("rsb coefficient m = {} given twice", c.m)));
            }
        }
        RsbTerm::new(r.jstar, r.truncation, coeffs)
    }
}

impl From<RsbTerm> for RsbRecord {
    fn from(t: RsbTerm) -> Self {
        RsbRecord {
            jstar: t.jstar,
            truncation: t.truncation,
            coeffs: t
                .coeffs
                .into_iter()
                .map(|(m, p)| CoeffRecord { m, poly: p.to_vec() })
                .collect(),
        }
    }
}

impl RsbTerm {
    pub fn new(jstar: u32, truncation: usize, coeffs: BTreeMap<i32, [Complex64; 3]>) -> Result<Self> {
        if jstar == 0 {
            return Err(Error::Config("rsb jstar must be >= 1".into()));
        }
        for (&m, p) in &coeffs {
            if m.unsigned_abs() as usize > truncation {
                return Err(Error::Config(format!(
                    "rsb coefficient m = {m} exceeds truncation M = {truncation}"
                )));
            }
            if p.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
                return Err(Error::NonFinite("rsb coefficients"));
            }
        }
        Ok(RsbTerm {
            jstar,
            truncation,
            coeffs,
        })
    }

    /// A term whose coefficients do not depend on `β`.
    pub fn from_constant_coeffs(jstar: u32, coeffs: &[(i32, Complex64)]) -> Result<Self> {
        let truncation = coeffs
            .iter()
            .map(|(m, _)| m.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
            .max(DEFAULT_TRUNCATION);
        let map = coeffs
            .iter()
            .map(|&(m, c)| (m, [c, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)]))
            .collect();
        RsbTerm::new(jstar, truncation, map)
    }

    pub fn jstar(&self) -> u32 {
        self.jstar
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// `gₘ(β)`; zero for modes that are not stored.
    pub fn coeff(&self, m: i32, beta: f64) -> Complex64 {
        self.coeffs
            .get(&m)
            .map(|p| p[0] + beta * (p[1] + beta * p[2]))
            .unwrap_or_default()
    }

    /// Stored modes with their values at `β`.
    pub fn modes(&self, beta: f64) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.coeffs.keys().map(move |&m| (m, self.coeff(m, beta)))
    }

    /// `G(t, β)`.
    pub fn eval(&self, t: f64, beta: f64) -> Complex64 {
        let j = self.jstar as f64;
        self.modes(beta)
            .map(|(m, g)| g * Complex64::from_polar(1.0, m as f64 * j * t))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn periodic_in_reduced_period() {
        let g = RsbTerm::from_constant_coeffs(
            2,
            &[(0, Complex64::new(0.3, 0.0)), (1, Complex64::new(0.1, -0.2)), (-2, Complex64::new(0.0, 0.5))],
        )
        .unwrap();
        for &t in &[0.0, 0.4, 1.7, 5.0] {
            assert!((g.eval(t, 0.1) - g.eval(t + PI, 0.1)).norm() < 1e-13);
        }
    }

    #[test]
    fn beta_polynomial() {
        let mut map = BTreeMap::new();
        map.insert(
            -1,
            [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0), Complex64::new(0.0, 3.0)],
        );
        let g = RsbTerm::new(1, 8, map).unwrap();
        let b = 0.5;
        assert!((g.coeff(-1, b) - Complex64::new(2.0, 0.75)).norm() < 1e-15);
        assert_eq!(g.coeff(4, b), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn mode_beyond_truncation_rejected() {
        let mut map = BTreeMap::new();
        map.insert(9, [Complex64::new(1.0, 0.0); 3]);
        assert!(RsbTerm::new(2, 8, map).is_err());
    }

    #[test]
    fn json_schema() {
        let json = r#"{"jstar":2,"M":4,"coeffs":[{"m":0,"poly":[[1.0,0.0]]},{"m":-1,"poly":[[0.0,1.0],[0.5,0.0]]}]}"#;
        let g: RsbTerm = serde_json::from_str(json).unwrap();
        assert_eq!(g.jstar(), 2);
        assert_eq!(g.truncation(), 4);
        assert!((g.coeff(-1, 2.0) - Complex64::new(1.0, 1.0)).norm() < 1e-15);
    }
}
