//! Dormand–Prince 5(4) for one complex unknown, with the fourth-order
//! continuous extension.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cbe::is_finite;
use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Error-control settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Tolerance {
    pub fn new(tol: f64) -> Result<Self> {
        if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
            return Err(Error::BadTolerance(tol));
        }
        Ok(Tolerance {
            rtol: tol,
            atol: tol,
            max_steps: 50_000_000,
        })
    }
}

/// One accepted step and its interpolant.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub t0: f64,
    pub t1: f64,
    pub y0: Complex64,
    pub y1: Complex64,
    r: [Complex64; 5],
}

impl Step {
    /// Dense output at `t ∈ [t0, t1]`.
    pub fn at(&self, t: f64) -> Complex64 {
        let h = self.t1 - self.t0;
        let th = (t - self.t0) / h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = self.r;
        r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)))
    }

    /// `∫ y dt` over `[a, b] ∩ [t0, t1]`; exact for the quartic interpolant.
    pub fn integral(&self, a: f64, b: f64) -> Complex64 {
        const X: [f64; 5] = [0.0, 0.5384693101056831, -0.5384693101056831, 0.906179845938664, -0.906179845938664];
        const W: [f64; 5] = [
            0.5688888888888889,
            0.47862867049936647,
            0.47862867049936647,
            0.23692688505618908,
            0.23692688505618908,
        ];
        let lo = a.max(self.t0);
        let hi = b.min(self.t1);
        if hi <= lo {
            return Complex64::new(0.0, 0.0);
        }
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        X.iter().zip(W).map(|(&x, w)| w * self.at(mid + half * x)).sum::<Complex64>() * half
    }
}

/// What the observer wants after seeing a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub t: f64,
    pub y: Complex64,
    pub stats: StepStats,
    /// The observer stopped the run before `t1`.
    pub stopped: bool,
}

fn err_norm(e: Complex64, y0: Complex64, y1: Complex64, tol: &Tolerance) -> f64 {
    let sr = tol.atol + tol.rtol * y0.re.abs().max(y1.re.abs());
    let si = tol.atol + tol.rtol * y0.im.abs().max(y1.im.abs());
    (((e.re / sr).powi(2) + (e.im / si).powi(2)) / 2.0).sqrt()
}

/// Integrates `y' = f(t, y)` forward from `t0` to `t1 ≥ t0`, handing every
/// accepted step to `observer`.
pub fn integrate<F, O>(f: F, t0: f64, y0: Complex64, t1: f64, tol: &Tolerance, mut observer: O) -> Result<Outcome>
where
    F: Fn(f64, Complex64) -> Complex64,
    O: FnMut(&Step) -> Control,
{
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return Err(Error::InvalidArgument(format!("bad time span [{t0}, {t1}]")));
    }
    if !is_finite(y0) {
        return Err(Error::NonFinite("initial condition"));
    }
    let mut stats = StepStats {
        accepted: 0,
        rejected: 0,
        evaluations: 0,
    };
    let (mut t, mut y) = (t0, y0);
    if t1 == t0 {
        return Ok(Outcome { t, y, stats, stopped: false });
    }
    let mut k1 = f(t, y);
    stats.evaluations += 1;

    // Starting step after Hairer, Nørsett and Wanner.
    let scale = |y: Complex64| tol.atol + tol.rtol * y.norm();
    let d0 = y.norm() / scale(y);
    let d1 = k1.norm() / scale(y);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(t1 - t0);
    let y_probe = y + h * k1;
    let d2 = (f(t + h, y_probe) - k1).norm() / scale(y) / h;
    stats.evaluations += 1;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    h = (100.0 * h).min(h1).min(t1 - t0);

    let mut last_rejected = false;
    loop {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::NoConvergence {
                iterations: tol.max_steps,
                residual: t1 - t,
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let k2 = f(t + C2 * h, y + h * (A21 * k1));
        let k3 = f(t + C3 * h, y + h * (A31 * k1 + A32 * k2));
        let k4 = f(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y1 = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
        let t_new = if last { t1 } else { t + h };
        let k7 = f(t_new, y1);
        stats.evaluations += 6;
        let e = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let err = err_norm(e, y, y1, tol);
        if !err.is_finite() {
            // Usually an overflow in a blowing-up solution; try smaller steps.
            stats.rejected += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            let r2 = y1 - y;
            let r3 = h * k1 - r2;
            let r4 = r2 - h * k7 - r3;
            let r5 = h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7);
            let step = Step {
                t0: t,
                t1: t_new,
                y0: y,
                y1,
                r: [y, r2, r3, r4, r5],
            };
            stats.accepted += 1;
            t = t_new;
            y = y1;
            k1 = k7;
            if observer(&step) == Control::Stop {
                return Ok(Outcome { t, y, stats, stopped: true });
            }
            if last {
                return Ok(Outcome { t, y, stats, stopped: false });
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            last_rejected = true;
        }
    }
}

/// Values at sorted `times` within `[t0, t1]`.
pub fn integrate_at<F>(f: F, t0: f64, y0: Complex64, times: &[f64], tol: &Tolerance) -> Result<(Vec<Complex64>, StepStats)>
where
    F: Fn(f64, Complex64) -> Complex64,
{
    let Some(&t1) = times.last() else {
        return Ok((Vec::new(), StepStats { accepted: 0, rejected: 0, evaluations: 0 }));
    };
    if times.windows(2).any(|w| w[1] < w[0]) || times[0] < t0 {
        return Err(Error::InvalidArgument("output times must be sorted and >= t0".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    while next < times.len() && times[next] == t0 {
        out.push(y0);
        next += 1;
    }
    let outcome = integrate(f, t0, y0, t1, tol, |s| {
        while next < times.len() && times[next] <= s.t1 {
            out.push(if times[next] == s.t1 { s.y1 } else { s.at(times[next]) });
            next += 1;
        }
        Control::Continue
    })?;
    Ok((out, outcome.stats))
}
