//! Built-in translational symmetry-breaking terms.
//!
//! Every term is an instance of one parametric family
//!
//! ```text
//! H(w, w̄) = P(w, w̄) · exp(-c·w·w̄) + Q(w·w̄) · w
//! ```
//!
//! with `P` a complex polynomial of total degree at most three and `Q` the
//! real rational function `(q0 + q1·s) / (1 + d1·s + d2·s²)`. The named kinds
//! are shorthands for common members of the family. With `c = 0` and a
//! nonconstant `P` the term is unbounded; such instances are used as
//! closed-form oracles and carry no bound.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Exponents `(a, b)` of the monomials `w^a w̄^b`, in parameter order.
pub const MONOMIALS: [(u32, u32); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

/// Number of leading real parameters of [`TsbKind::PolyGauss`] before the
/// monomial coefficients: `c, q0, q1, d1, d2`.
pub const POLY_GAUSS_HEADER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TsbKind {
    /// `H ≡ 0`, no parameters.
    Zero,
    /// `H ≡ a`, params `[re, im]`.
    Constant,
    /// `H = a·w`, params `[re, im]`.
    Linear,
    /// `H = a·w̄`, params `[re, im]`.
    ConjLinear,
    /// `H = w·(a - b·w·w̄)`, params `[a, b]` (real).
    RadialCubic,
    /// The full family, params
    /// `[c, q0, q1, d1, d2, re₀₀, im₀₀, re₁₀, im₁₀, …]` with monomials in
    /// [`MONOMIALS`] order. Trailing parameters may be omitted (they are zero).
    PolyGauss,
}

impl fmt::Display for TsbKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TsbKind::Zero => "zero",
            TsbKind::Constant => "constant",
            TsbKind::Linear => "linear",
            TsbKind::ConjLinear => "conj_linear",
            TsbKind::RadialCubic => "radial_cubic",
            TsbKind::PolyGauss => "poly_gauss",
        };
        f.write_str(s)
    }
}

/// `Q(s) = (q0 + q1 s) / (1 + d1 s + d2 s²)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rational {
    pub q0: f64,
    pub q1: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Rational {
    fn is_zero(&self) -> bool {
        self.q0 == 0.0 && self.q1 == 0.0
    }

    #[inline]
    fn eval(&self, s: Complex64) -> Complex64 {
        (self.q0 + s * self.q1) / (1.0 + s * self.d1 + s * s * self.d2)
    }

    fn eval_real(&self, s: f64) -> f64 {
        (self.q0 + self.q1 * s) / (1.0 + self.d1 * s + self.d2 * s * s)
    }

    /// `Q(s)·√s` stays bounded as `s → ∞`.
    fn bounded_with_w(&self) -> bool {
        if self.is_zero() {
            return true;
        }
        if self.q1 != 0.0 {
            self.d2 > 0.0
        } else {
            self.d1 > 0.0 || self.d2 > 0.0
        }
    }
}

/// Compiled coefficients of a term.
#[derive(Debug, Clone, PartialEq)]
struct Form {
    decay: f64,
    poly: [Complex64; 10],
    radial: Rational,
}

impl Form {
    fn zero() -> Self {
        Form {
            decay: 0.0,
            poly: [Complex64::new(0.0, 0.0); 10],
            radial: Rational::default(),
        }
    }

    fn poly_is_zero(&self) -> bool {
        self.poly.iter().all(|c| c.norm_sqr() == 0.0)
    }

    fn poly_is_constant(&self) -> bool {
        self.poly[1..].iter().all(|c| c.norm_sqr() == 0.0)
    }
}

/// A translational symmetry-breaking term `Hⱼ(w, w̄, λ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TsbTermRecord", into = "TsbTermRecord")]
pub struct TsbTerm {
    kind: TsbKind,
    params: Vec<f64>,
    bound: Option<f64>,
    form: Form,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TsbTermRecord {
    kind: TsbKind,
    #[serde(default)]
    params: Vec<f64>,
    #[serde(default)]
    bound: Option<f64>,
}

impl TryFrom<TsbTermRecord> for TsbTerm {
    type Error = Error;

    fn try_from(r: TsbTermRecord) -> Result<Self> {
        let mut term = TsbTerm::new(r.kind, r.params)?;
        if let Some(b) = r.bound {
            term = term.with_declared_bound(b)?;
        }
        Ok(term)
    }
}

impl From<TsbTerm> for TsbTermRecord {
    fn from(t: TsbTerm) -> Self {
        TsbTermRecord {
            kind: t.kind,
            params: t.params,
            bound: t.bound,
        }
    }
}

fn param_count(kind: TsbKind, params: &[f64]) -> Result<()> {
    let ok = match kind {
        TsbKind::Zero => params.is_empty(),
        TsbKind::Constant | TsbKind::Linear | TsbKind::ConjLinear | TsbKind::RadialCubic => {
            params.len() == 2
        }
        TsbKind::PolyGauss => params.len() <= POLY_GAUSS_HEADER + 2 * MONOMIALS.len(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "tsb kind `{kind}` does not accept {} params",
            params.len()
        )))
    }
}

impl TsbTerm {
    /// Builds a term, computing its bound when it is bounded.
    pub fn new(kind: TsbKind, params: Vec<f64>) -> Result<Self> {
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("tsb params"));
        }
        param_count(kind, &params)?;
        let mut form = Form::zero();
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match kind {
            TsbKind::Zero => {}
            TsbKind::Constant => form.poly[0] = c(params[0], params[1]),
            TsbKind::Linear => form.poly[1] = c(params[0], params[1]),
            TsbKind::ConjLinear => form.poly[2] = c(params[0], params[1]),
            TsbKind::RadialCubic => {
                form.poly[1] = c(params[0], 0.0);
                form.poly[7] = c(-params[1], 0.0);
            }
            TsbKind::PolyGauss => {
                let get = |i: usize| params.get(i).copied().unwrap_or(0.0);
                form.decay = get(0);
                form.radial = Rational {
                    q0: get(1),
                    q1: get(2),
                    d1: get(3),
                    d2: get(4),
                };
                for (i, slot) in form.poly.iter_mut().enumerate() {
                    let base = POLY_GAUSS_HEADER + 2 * i;
                    *slot = c(get(base), get(base + 1));
                }
                if form.decay < 0.0 {
                    return Err(Error::Config("poly_gauss decay c must be >= 0".into()));
                }
                if form.radial.d1 < 0.0 || form.radial.d2 < 0.0 {
                    return Err(Error::Config(
                        "poly_gauss denominator coefficients d1, d2 must be >= 0".into(),
                    ));
                }
            }
        }
        let mut term = TsbTerm {
            kind,
            params,
            bound: None,
            form,
        };
        term.bound = term.majorant_bound();
        Ok(term)
    }

    pub fn zero() -> Self {
        TsbTerm::new(TsbKind::Zero, vec![]).expect("zero term is valid")
    }

    pub fn constant(c: Complex64) -> Self {
        TsbTerm::new(TsbKind::Constant, vec![c.re, c.im]).expect("finite constant")
    }

    pub fn linear(a: Complex64) -> Self {
        TsbTerm::new(TsbKind::Linear, vec![a.re, a.im]).expect("finite coefficient")
    }

    pub fn conj_linear(a: Complex64) -> Self {
        TsbTerm::new(TsbKind::ConjLinear, vec![a.re, a.im]).expect("finite coefficient")
    }

    /// `w·(a - b·w·w̄)`.
    pub fn radial_cubic(a: f64, b: f64) -> Self {
        TsbTerm::new(TsbKind::RadialCubic, vec![a, b]).expect("finite coefficients")
    }

    /// The general family from its pieces.
    pub fn poly_gauss(decay: f64, radial: Rational, poly: [Complex64; 10]) -> Result<Self> {
        let mut params = vec![decay, radial.q0, radial.q1, radial.d1, radial.d2];
        for c in poly {
            params.push(c.re);
            params.push(c.im);
        }
        TsbTerm::new(TsbKind::PolyGauss, params)
    }

    /// Replaces the computed bound with a declared one after checking it
    /// against a polar sample of `|H|`.
    pub fn with_declared_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::Config(format!("tsb bound {bound} is not a finite non-negative number")));
        }
        let sampled = self.sampled_sup(1.0e3, 400, 64);
        if sampled > bound * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "declared tsb bound {bound} is exceeded by sampled |H| = {sampled}"
            )));
        }
        self.bound = Some(bound);
        Ok(self)
    }

    pub fn kind(&self) -> TsbKind {
        self.kind
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Uniform bound on `|H|`; `None` for unbounded oracle instances.
    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    pub fn is_zero(&self) -> bool {
        self.form.poly_is_zero() && self.form.radial.is_zero()
    }

    /// Coefficient of `w^a w̄^b` in `P`.
    pub fn monomial(&self, a: u32, b: u32) -> Complex64 {
        MONOMIALS
            .iter()
            .position(|&m| m == (a, b))
            .map(|i| self.form.poly[i])
            .unwrap_or_default()
    }

    pub fn decay(&self) -> f64 {
        self.form.decay
    }

    pub fn radial(&self) -> Rational {
        self.form.radial
    }

    /// Evaluates `H(w, w̄, λ)`; `w̄` is an independent argument. The built-in
    /// family does not depend on `λ`.
    #[inline]
    pub fn eval(&self, w: Complex64, wbar: Complex64, _lambda: &[f64]) -> Complex64 {
        let f = &self.form;
        let s = w * wbar;
        let mut out = Complex64::new(0.0, 0.0);
        if !f.poly_is_zero() {
            let w2 = w * w;
            let b2 = wbar * wbar;
            let p = f.poly[0]
                + f.poly[1] * w
                + f.poly[2] * wbar
                + f.poly[3] * w2
                + f.poly[4] * s
                + f.poly[5] * b2
                + f.poly[6] * w2 * w
                + f.poly[7] * w2 * wbar
                + f.poly[8] * w * b2
                + f.poly[9] * b2 * wbar;
            out += if f.decay == 0.0 { p } else { p * (-s * f.decay).exp() };
        }
        if !f.radial.is_zero() {
            out += f.radial.eval(s) * w;
        }
        out
    }

    /// `H(w, conj(w))`.
    #[inline]
    pub fn at(&self, w: Complex64) -> Complex64 {
        self.eval(w, w.conj(), &[])
    }

    /// Radial majorant `Σ|p_ab| r^(a+b) e^(-c r²) + |Q(r²)| r`.
    fn majorant(&self, r: f64) -> f64 {
        let f = &self.form;
        let s = r * r;
        let poly: f64 = MONOMIALS
            .iter()
            .zip(f.poly.iter())
            .map(|(&(a, b), c)| c.norm() * r.powi((a + b) as i32))
            .sum();
        poly * (-f.decay * s).exp() + f.radial.eval_real(s).abs() * r
    }

    fn is_bounded(&self) -> bool {
        let f = &self.form;
        let poly_ok = f.poly_is_zero() || f.decay > 0.0 || f.poly_is_constant();
        poly_ok && f.radial.bounded_with_w()
    }

    /// Supremum of the majorant over `r ≥ 0`, found by a log-spaced scan and
    /// golden-section refinement, with a small relative margin.
    fn majorant_bound(&self) -> Option<f64> {
        if !self.is_bounded() {
            return None;
        }
        if self.is_zero() {
            return Some(0.0);
        }
        let n = 4000;
        let (lo, hi) = (1e-6_f64.ln(), 1e7_f64.ln());
        let mut best = (self.majorant(0.0), 0.0);
        let mut best_i = None;
        for i in 0..=n {
            let r = (lo + (hi - lo) * i as f64 / n as f64).exp();
            let m = self.majorant(r);
            if m > best.0 {
                best = (m, r);
                best_i = Some(i);
            }
        }
        if let Some(i) = best_i {
            let at = |k: isize| (lo + (hi - lo) * k as f64 / n as f64).exp();
            let (mut a, mut b) = (at(i as isize - 1), at(i as isize + 1));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..100 {
                let x1 = b - g * (b - a);
                let x2 = a + g * (b - a);
                if self.majorant(x1) > self.majorant(x2) {
                    b = x2;
                } else {
                    a = x1;
                }
            }
            best.0 = best.0.max(self.majorant(0.5 * (a + b)));
        }
        Some(best.0 * (1.0 + 1e-6) + 1e-300)
    }

    /// `max |H|` over a polar grid of `radii × angles` points with
    /// `|w| ≤ r_max`.
    pub fn sampled_sup(&self, r_max: f64, radii: usize, angles: usize) -> f64 {
        let mut sup: f64 = self.at(Complex64::new(0.0, 0.0)).norm();
        for i in 1..=radii {
            let r = r_max * (i as f64 / radii as f64).powi(2);
            for j in 0..angles {
                let th = std::f64::consts::TAU * j as f64 / angles as f64;
                sup = sup.max(self.at(Complex64::from_polar(r, th)).norm());
            }
        }
        sup
    }
}
