//! Direct integration of the center bundle equation and detection of
//! epicyclic manifolds from stroboscopic sections.
//!
//! Sections are taken every `2π` in the co-rotating frame about a center.
//! A single trajectory may settle on one point of a ring (for instance when
//! the slow flow on the torus has equilibria), so tori are estimated from an
//! ensemble of probes spread in phase around the predicted radius.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::Write;

use crate::averaging::{analyze_center, default_rho_grid, fmt_f64, EquilibriumRoot, ManifoldPrediction, Stability};
use crate::averaging::{predict_manifold, DEFAULT_QUADRATURE};
use crate::cbe::{is_finite, SystemConfig};
use crate::error::{Error, Result};
use crate::ode::{self, Control, Step, StepStats, Tolerance};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_PERIODS: usize = 400;
pub const DEFAULT_TRANSIENT: f64 = 0.4;
pub const DEFAULT_RING_THRESHOLD: f64 = 0.05;
pub const DEFAULT_PROBES: usize = 8;
pub const DEFAULT_PROBE_OFFSET: f64 = 0.1;
pub const MIN_SECTION_POINTS: usize = 50;
pub const MIN_STROBE_PERIODS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    Corotating(usize),
}

/// `Backward` runs solve `q(s) = p(t₀ − s)`, i.e. `q′ = −f(q, t₀ − s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub tol: f64,
    pub direction: Direction,
    /// Stop once `|z| > radius` in the co-rotating frame of center `k`.
    pub escape: Option<(usize, f64)>,
}

impl IntegrateOptions {
    pub fn forward(tol: f64) -> Self {
        IntegrateOptions {
            tol,
            direction: Direction::Forward,
            escape: None,
        }
    }
}

/// Accepted step endpoints of one run plus the dense interpolant.
///
/// `times` holds the integration variable, which is physical time for
/// forward runs and elapsed reverse time for backward runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub times: Vec<f64>,
    pub points: Vec<Complex64>,
    pub frame: Frame,
    pub direction: Direction,
    pub t_origin: f64,
    pub tol: f64,
    pub stats: StepStats,
    pub escaped: bool,
    #[serde(skip)]
    dense: Vec<Step>,
}

impl TrajectorySample {
    pub fn span(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times[0]
    }

    pub fn physical_time(&self, s: f64) -> f64 {
        match self.direction {
            Direction::Forward => s,
            Direction::Backward => self.t_origin - s,
        }
    }

    /// Dense output at integration variable `s` within the covered span.
    pub fn at(&self, s: f64) -> Option<Complex64> {
        if self.dense.is_empty() {
            return (s == self.times[0]).then_some(self.points[0]);
        }
        let i = self.dense.partition_point(|st| st.t1 < s);
        let st = self.dense.get(i)?;
        (s >= st.t0).then(|| st.at(s))
    }

    /// `∫ p ds` over `[a, b]`.
    fn integral(&self, a: f64, b: f64) -> Complex64 {
        let first = self.dense.partition_point(|st| st.t1 <= a);
        self.dense[first..]
            .iter()
            .take_while(|st| st.t0 < b)
            .map(|st| st.integral(a, b))
            .sum()
    }
}

fn check_tol(tol: f64) -> Result<Tolerance> {
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::BadTolerance(tol));
    }
    Tolerance::new(tol)
}

/// Forward lab-frame solution on `[t0, t1]`.
pub fn integrate(config: &SystemConfig, p0: Complex64, t0: f64, t1: f64, tol: f64) -> Result<TrajectorySample> {
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    integrate_with(config, p0, t0, t1 - t0, &IntegrateOptions::forward(tol))
}

/// Runs for `duration` in the chosen direction starting at `(p0, t0)`.
pub fn integrate_with(
    config: &SystemConfig,
    p0: Complex64,
    t0: f64,
    duration: f64,
    opts: &IntegrateOptions,
) -> Result<TrajectorySample> {
    let tol = check_tol(opts.tol)?;
    if !is_finite(p0) || !t0.is_finite() {
        return Err(Error::NonFinite("initial condition"));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidArgument(format!("bad duration {duration}")));
    }
    if let Some((k, _)) = opts.escape {
        config.check_index(k)?;
    }
    let dir = opts.direction;
    let sign = if dir == Direction::Forward { 1.0 } else { -1.0 };
    let (s0, s1) = match dir {
        Direction::Forward => (t0, t0 + duration),
        Direction::Backward => (0.0, duration),
    };
    let phys = |s: f64| if dir == Direction::Forward { s } else { t0 - s };
    let f = |s: f64, p: Complex64| sign * config.rhs_unchecked(p, phys(s));
    let mut times = vec![s0];
    let mut points = vec![p0];
    let mut dense = Vec::new();
    let mut escaped = false;
    let outcome = ode::integrate(f, s0, p0, s1, &tol, |st| {
        times.push(st.t1);
        points.push(st.y1);
        dense.push(*st);
        if let Some((k, radius)) = opts.escape {
            let z = st.y1 - config.centers()[k] + Complex64::i() * Complex64::from_polar(1.0, phys(st.t1)) * config.v();
            if z.norm() > radius {
                escaped = true;
                return Control::Stop;
            }
        }
        Control::Continue
    })?;
    Ok(TrajectorySample {
        times,
        points,
        frame: Frame::Lab,
        direction: dir,
        t_origin: t0,
        tol: opts.tol,
        stats: outcome.stats,
        escaped,
        dense,
    })
}

/// Samples every `period` of the integration variable, without a span check.
fn sections_unchecked(traj: &TrajectorySample, period: f64) -> Vec<(f64, Complex64)> {
    let s0 = traj.times[0];
    let count = (traj.span() / period * (1.0 + 1e-12)).floor() as usize;
    (0..=count)
        .filter_map(|i| {
            let s = (s0 + i as f64 * period).min(*traj.times.last().unwrap());
            traj.at(s).map(|p| (s, p))
        })
        .collect()
}

/// Lab-frame points at `t₀ + k·period`. The run must cover ten periods.
pub fn stroboscope(traj: &TrajectorySample, period: f64) -> Result<Vec<Complex64>> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidArgument(format!("bad period {period}")));
    }
    let need = MIN_STROBE_PERIODS as f64 * period;
    if traj.span() < need * (1.0 - 1e-12) {
        return Err(Error::InsufficientSpan {
            have: traj.span(),
            need,
        });
    }
    Ok(sections_unchecked(traj, period).into_iter().map(|(_, p)| p).collect())
}

/// Maps lab section points of `traj` to the co-rotating frame of center `k`.
fn corotating_sections(config: &SystemConfig, traj: &TrajectorySample, k: usize, period: f64) -> Vec<Complex64> {
    let xi = config.centers()[k];
    sections_unchecked(traj, period)
        .into_iter()
        .map(|(s, p)| p - xi + Complex64::i() * Complex64::from_polar(1.0, traj.physical_time(s)) * config.v())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub transient_fraction: f64,
    pub ring_threshold: f64,
    /// Time between consecutive sections.
    pub period: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            transient_fraction: DEFAULT_TRANSIENT,
            ring_threshold: DEFAULT_RING_THRESHOLD,
            period: TAU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusEstimate {
    /// Pooled post-transient section points.
    pub section_points: Vec<Complex64>,
    pub mean_radius: f64,
    /// Standard deviation of the section radii about the fitted center.
    pub radial_spread: f64,
    /// Center of the least-squares circle through the sections.
    pub drift_center: Complex64,
    /// Exponential rate at which probes approach the ring, per unit time.
    pub decay_rate: Option<f64>,
    /// Mean angular velocity of the sections about the fitted center.
    pub rotation_rate: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectionFit {
    Torus(TorusEstimate),
    /// All sections coincide: a fixed point of the period map (a rotating
    /// or meandering wave), not a torus.
    FixedPoint { location: Complex64, rms_spread: f64 },
    /// Distinct points that no circle fits (for instance two clusters).
    Unfittable { centroid: Complex64, rms_spread: f64 },
}

impl SectionFit {
    pub fn torus(&self) -> Option<&TorusEstimate> {
        match self {
            SectionFit::Torus(t) => Some(t),
            _ => None,
        }
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = ((row + 1)..3).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Algebraic (Kåsa) circle fit refined by Gauss–Newton on the geometric
/// distances. Returns `(center, radius)`.
pub fn fit_circle(points: &[Complex64]) -> Option<(Complex64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let centroid: Complex64 = points.iter().sum::<Complex64>() / n;
    let scale = points.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let q: Vec<Complex64> = points.iter().map(|p| (p - centroid) / scale).collect();
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for p in &q {
        let (x, y, z) = (p.re, p.im, p.norm_sqr());
        let row = [x, y, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            r[i] -= row[i] * z;
        }
    }
    let [d, e, f] = solve3(m, r)?;
    let mut c = Complex64::new(-d / 2.0, -e / 2.0);
    let r2 = c.norm_sqr() - f;
    if !(r2 > 0.0) {
        return None;
    }
    let mut rad = r2.sqrt();
    for _ in 0..50 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for p in &q {
            let dv = p - c;
            let dist = dv.norm();
            if dist == 0.0 {
                continue;
            }
            let row = [-dv.re / dist, -dv.im / dist, -1.0];
            let res = dist - rad;
            for i in 0..3 {
                for j in 0..3 {
                    jtj[i][j] += row[i] * row[j];
                }
                jtr[i] -= row[i] * res;
            }
        }
        let Some(delta) = solve3(jtj, jtr) else { break };
        c += Complex64::new(delta[0], delta[1]);
        rad += delta[2];
        if delta.iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-15 {
            break;
        }
    }
    if !(rad.is_finite() && rad > 0.0 && is_finite(c)) {
        return None;
    }
    Some((centroid + c * scale, rad * scale))
}

fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits a ring to the pooled post-transient sections of several probes.
pub fn estimate_torus(sections: &[Vec<Complex64>], opts: &FitOptions) -> Result<SectionFit> {
    if !(0.0..1.0).contains(&opts.transient_fraction) {
        return Err(Error::InvalidArgument(format!(
            "transient fraction {} outside [0, 1)",
            opts.transient_fraction
        )));
    }
    let skip = |len: usize| (opts.transient_fraction * len as f64).ceil() as usize;
    let pooled: Vec<Complex64> = sections
        .iter()
        .flat_map(|s| s.iter().skip(skip(s.len())).copied())
        .collect();
    if pooled.len() < MIN_SECTION_POINTS {
        return Err(Error::TooFewPoints {
            have: pooled.len(),
            need: MIN_SECTION_POINTS,
        });
    }
    let centroid = pooled.iter().sum::<Complex64>() / pooled.len() as f64;
    let rms = (pooled.iter().map(|p| (p - centroid).norm_sqr()).sum::<f64>() / pooled.len() as f64).sqrt();
    if rms <= 1e-6 * centroid.norm().max(1.0) {
        return Ok(SectionFit::FixedPoint {
            location: centroid,
            rms_spread: rms,
        });
    }
    let Some((center, _)) = fit_circle(&pooled) else {
        return Ok(SectionFit::Unfittable {
            centroid,
            rms_spread: rms,
        });
    };
    let radii: Vec<f64> = pooled.iter().map(|p| (p - center).norm()).collect();
    let mean = radii.iter().sum::<f64>() / radii.len() as f64;
    let spread = (radii.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / radii.len() as f64).sqrt();

    // Approach rate: log-distance of each probe's radii to the ring until
    // they reach the noise floor set by the ring thickness.
    let floor = (5.0 * spread).max(1e-10 * mean);
    let mut rates = Vec::new();
    for s in sections {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, p) in s.iter().enumerate() {
            let d = ((p - center).norm() - mean).abs();
            if d <= floor {
                break;
            }
            xs.push(i as f64 * opts.period);
            ys.push(d.ln());
        }
        if xs.len() >= 4 {
            rates.push(-linear_slope(&xs, &ys));
        }
    }
    let decay_rate = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);

    let mut turns = Vec::new();
    for s in sections {
        let tail = &s[skip(s.len())..];
        if tail.len() < 2 {
            continue;
        }
        let total: f64 = tail
            .windows(2)
            .map(|w| {
                let d = ((w[1] - center) / (w[0] - center)).arg();
                if d <= -PI { d + TAU } else { d }
            })
            .sum();
        turns.push(total / ((tail.len() - 1) as f64 * opts.period));
    }
    let rotation_rate = (!turns.is_empty()).then(|| turns.iter().sum::<f64>() / turns.len() as f64);

    Ok(SectionFit::Torus(TorusEstimate {
        section_points: pooled,
        mean_radius: mean,
        radial_spread: spread,
        drift_center: center,
        decay_rate,
        rotation_rate,
        converged: spread / mean < opts.ring_threshold,
    }))
}

/// Long-time average of `p` over whole section periods after the transient,
/// averaged over the runs. Stands in for the center of drifting.
pub fn drift_center(
    trajectories: &[TrajectorySample],
    fit: &TorusEstimate,
    transient_fraction: f64,
    period: f64,
) -> Result<Complex64> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut used = 0usize;
    for traj in trajectories {
        let periods = (traj.span() / period * (1.0 + 1e-12)).floor() as usize;
        let first = (transient_fraction * periods as f64).ceil() as usize;
        if periods <= first {
            continue;
        }
        let (a, b) = (traj.times[0] + first as f64 * period, traj.times[0] + periods as f64 * period);
        acc += traj.integral(a, b) / (b - a);
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientSpan {
            have: trajectories.iter().map(|t| t.span()).fold(0.0, f64::max),
            need: period,
        });
    }
    Ok(acc / used as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub tol: f64,
    pub periods: usize,
    pub transient_fraction: f64,
    pub ring_threshold: f64,
    pub probes: usize,
    /// Relative offset of the probes from the predicted radius.
    pub probe_offset: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            tol: DEFAULT_TOL,
            periods: DEFAULT_PERIODS,
            transient_fraction: DEFAULT_TRANSIENT,
            ring_threshold: DEFAULT_RING_THRESHOLD,
            probes: DEFAULT_PROBES,
            probe_offset: DEFAULT_PROBE_OFFSET,
        }
    }
}

impl VerifyOptions {
    fn fit(&self) -> FitOptions {
        FitOptions {
            transient_fraction: self.transient_fraction,
            ring_threshold: self.ring_threshold,
            period: TAU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

/// Probe runs and their co-rotating sections.
#[derive(Debug, Clone)]
pub struct ProbeEnsemble {
    pub direction: Direction,
    pub trajectories: Vec<TrajectorySample>,
    pub sections: Vec<Vec<Complex64>>,
    pub fit: Option<SectionFit>,
    pub escaped: usize,
}

/// Launches `opts.probes` runs from `ρ(1 ± offset)` at evenly spread phases
/// in the co-rotating frame of center `k`.
pub fn run_probes(
    config: &SystemConfig,
    k: usize,
    rho: f64,
    direction: Direction,
    opts: &VerifyOptions,
) -> Result<ProbeEnsemble> {
    config.check_index(k)?;
    if opts.probes == 0 || opts.periods < MIN_STROBE_PERIODS {
        return Err(Error::InvalidArgument("need at least one probe and ten periods".into()));
    }
    let escape = 4.0 * rho + 2.0;
    let run = |j: usize| -> Result<(TrajectorySample, Vec<Complex64>)> {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let z0 = Complex64::from_polar(rho * (1.0 + sign * opts.probe_offset), 0.1 + TAU * j as f64 / opts.probes as f64);
        let p0 = config.from_corotating_frame(z0, 0.0, k)?;
        let traj = integrate_with(
            config,
            p0,
            0.0,
            opts.periods as f64 * TAU,
            &IntegrateOptions {
                tol: opts.tol,
                direction,
                escape: Some((k, escape)),
            },
        )?;
        let sec = corotating_sections(config, &traj, k, TAU);
        Ok((traj, sec))
    };
    let runs = (0..opts.probes).into_par_iter().map(run).collect::<Result<Vec<_>>>()?;
    let escaped = runs.iter().filter(|(t, _)| t.escaped).count();
    let (trajectories, sections): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    let fit = if escaped == 0 {
        estimate_torus(&sections, &opts.fit()).ok()
    } else {
        None
    };
    Ok(ProbeEnsemble {
        direction,
        trajectories,
        sections,
        fit,
        escaped,
    })
}

impl ProbeEnsemble {
    /// The fitted ring if it is a converged torus near radius `rho` about
    /// the co-rotating origin.
    fn ring_near(&self, rho: f64) -> Option<&TorusEstimate> {
        let t = self.fit.as_ref()?.torus()?;
        (t.converged && (t.mean_radius - rho).abs() <= 0.5 * rho && t.drift_center.norm() <= 0.5 * rho).then_some(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationRecord {
    /// Mean angular velocity of the sections about the ring center.
    pub measured: Option<f64>,
    /// First-order prediction `−λₖ Ψ₀ᵏ(ρ*)` from `Mᵏ = w Lₖ`.
    pub predicted_first_order: f64,
    /// `1 + λₖ Ψ₀ᵏ(ρ*)`, recorded for comparison with the epicycle frequency.
    pub one_plus_lambda_psi0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub center_index: usize,
    pub rho_star: f64,
    pub gamma: f64,
    pub lambda_k: f64,
    pub predicted: Stability,
    pub verdict: Verdict,
    pub agrees: bool,
    pub direction_used: Option<Direction>,
    pub torus: Option<TorusEstimate>,
    /// Ring center mapped back to the lab frame, `ξₖ + c`.
    pub ring_center: Option<Complex64>,
    /// Time average of `p` over the post-transient horizon.
    pub drift_center: Option<Complex64>,
    /// `|λₖ γ|`, the first-order normal rate.
    pub decay_rate_predicted: f64,
    pub decay_rate_measured: Option<f64>,
    pub rate_ratio: Option<f64>,
    pub rotation: RotationRecord,
    pub escaped_forward: usize,
    pub escaped_backward: Option<usize>,
    pub horizon_periods: usize,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub sections: Vec<Vec<Complex64>>,
}

/// Forward probes that settle on a ring mean the manifold attracts; if they
/// do not, backward probes that settle on it mean it repels.
pub fn measure_stability(
    config: &SystemConfig,
    prediction: &ManifoldPrediction,
    opts: &VerifyOptions,
) -> Result<StabilityReport> {
    let k = prediction.center_index;
    let root = &prediction.root;
    if root.gamma.abs() < crate::averaging::HYPERBOLICITY_FLOOR {
        return Err(Error::NonHyperbolic {
            rho: root.rho_star,
            gamma: root.gamma,
        });
    }
    let rho = root.rho_star;
    let lambda_k = config.lambda()[k];
    let mut notes = Vec::new();
    let fwd = run_probes(config, k, rho, Direction::Forward, opts)?;
    let mut escaped_backward = None;
    let (verdict, ens) = if fwd.ring_near(rho).is_some() {
        (Verdict::Stable, fwd)
    } else {
        let bwd = run_probes(config, k, rho, Direction::Backward, opts)?;
        escaped_backward = Some(bwd.escaped);
        if bwd.ring_near(rho).is_some() {
            (Verdict::Unstable, bwd)
        } else {
            notes.push(format!(
                "no ring near rho = {rho} in either time direction over {} periods (forward escapes {}, backward escapes {})",
                opts.periods, fwd.escaped, bwd.escaped
            ));
            if lambda_k == 0.0 {
                notes.push("foliated / no isolated torus".into());
            }
            (Verdict::Inconclusive, fwd)
        }
    };
    let xi = config.centers()[k];
    let torus = ens.ring_near(rho).cloned();
    let dc = match &torus {
        Some(t) => Some(drift_center(&ens.trajectories, t, opts.transient_fraction, TAU)?),
        None => None,
    };
    let predicted_rate = (lambda_k * root.gamma).abs();
    let measured_rate = torus.as_ref().and_then(|t| t.decay_rate);
    let escaped_forward = if ens.direction == Direction::Forward {
        ens.escaped
    } else {
        0
    };
    let psi0 = prediction.psi0_at_root;
    let predicted = prediction.stability;
    let agrees = matches!(
        (predicted, verdict),
        (Stability::Stable, Verdict::Stable) | (Stability::Unstable, Verdict::Unstable) | (Stability::Foliated, Verdict::Inconclusive)
    );
    notes.push("drift center is the time average of p, standing in for the center of drifting".into());
    Ok(StabilityReport {
        center_index: k,
        rho_star: rho,
        gamma: root.gamma,
        lambda_k,
        predicted,
        verdict,
        agrees,
        direction_used: torus.as_ref().map(|_| ens.direction),
        ring_center: torus.as_ref().map(|t| xi + t.drift_center),
        drift_center: dc,
        decay_rate_predicted: predicted_rate,
        decay_rate_measured: measured_rate,
        rate_ratio: measured_rate.filter(|_| predicted_rate > 0.0).map(|m| m / predicted_rate),
        rotation: RotationRecord {
            measured: torus.as_ref().and_then(|t| t.rotation_rate),
            predicted_first_order: -lambda_k * psi0,
            one_plus_lambda_psi0: 1.0 + lambda_k * psi0,
        },
        torus,
        escaped_forward,
        escaped_backward,
        horizon_periods: opts.periods,
        notes,
        sections: ens.sections,
    })
}

/// Section point clouds as `probe, index, re, im` rows.
pub fn write_sections_csv<W: Write>(sections: &[Vec<Complex64>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["probe", "index", "re", "im"])?;
    for (j, s) in sections.iter().enumerate() {
        for (i, z) in s.iter().enumerate() {
            w.write_record(&[j.to_string(), i.to_string(), fmt_f64(z.re), fmt_f64(z.im)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One cell of a wedge scan. Flat so that it round-trips through CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeCell {
    pub lambda_k: f64,
    pub ratio: f64,
    pub torus_found: bool,
    pub verdict: Option<Verdict>,
    pub mean_radius: Option<f64>,
    pub radial_spread: Option<f64>,
    pub drift_re: Option<f64>,
    pub drift_im: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnBound {
    pub lambda_k: f64,
    /// Largest `|λⱼ/λₖ|` such that every cell up to it holds a torus.
    pub v_hat: Option<f64>,
    pub all_found: bool,
    /// Found cells form one interval of ratios containing zero.
    pub contiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeSummary {
    pub pivot: usize,
    pub rho_star: Option<f64>,
    pub columns: Vec<ColumnBound>,
    /// Minimum of the column bounds over `λₖ ≠ 0`.
    pub v_hat: Option<f64>,
    pub contiguous: bool,
    pub cells: usize,
    pub cells_with_torus: usize,
    pub cells_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeScanResult {
    pub pivot: usize,
    pub lambda_grid: Vec<f64>,
    pub ratio_grid: Vec<f64>,
    pub cells: Vec<WedgeCell>,
    pub summary: WedgeSummary,
}

/// Configuration of one cell: `λₖ = lambda_k`, every other `λⱼ = ratio·λₖ`.
pub fn cell_config(template: &SystemConfig, k: usize, lambda_k: f64, ratio: f64) -> Result<SystemConfig> {
    let lambda = (0..template.n())
        .map(|j| if j == k { lambda_k } else { ratio * lambda_k })
        .collect();
    template.with_lambda(lambda)
}

/// The smallest hyperbolic root of center `k` under the default grid.
pub fn pivot_root(template: &SystemConfig, k: usize) -> Result<Option<EquilibriumRoot>> {
    let (_, report) = analyze_center(template, k, &default_rho_grid(template), DEFAULT_QUADRATURE)?;
    Ok(report.roots.into_iter().next())
}

/// Runs predict → integrate → estimate for one cell. Failures are recorded
/// in the row rather than returned.
pub fn run_wedge_cell(
    template: &SystemConfig,
    k: usize,
    root: Option<&EquilibriumRoot>,
    lambda_k: f64,
    ratio: f64,
    opts: &VerifyOptions,
) -> WedgeCell {
    let mut cell = WedgeCell {
        lambda_k,
        ratio,
        torus_found: false,
        verdict: None,
        mean_radius: None,
        radial_spread: None,
        drift_re: None,
        drift_im: None,
        error: None,
    };
    let Some(root) = root else {
        cell.error = Some("no hyperbolic root".into());
        return cell;
    };
    let result = cell_config(template, k, lambda_k, ratio)
        .and_then(|cfg| {
            let pred = predict_manifold(&cfg, k, root, &[], DEFAULT_QUADRATURE)?;
            measure_stability(&cfg, &pred, opts)
        });
    match result {
        Ok(rep) => {
            cell.verdict = Some(rep.verdict);
            if let Some(t) = &rep.torus {
                cell.torus_found = true;
                cell.mean_radius = Some(t.mean_radius);
                cell.radial_spread = Some(t.radial_spread);
                let c = rep.ring_center.unwrap_or_default();
                cell.drift_re = Some(c.re);
                cell.drift_im = Some(c.im);
            }
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

/// Summarizes cells laid out as `lambda_grid × ratio_grid`.
pub fn summarize_wedge(pivot: usize, rho_star: Option<f64>, lambda_grid: &[f64], cells: &[WedgeCell]) -> WedgeSummary {
    let mut columns = Vec::new();
    for &lam in lambda_grid {
        let mut col: Vec<&WedgeCell> = cells.iter().filter(|c| c.lambda_k == lam).collect();
        col.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
        let mut by_abs = col.clone();
        by_abs.sort_by(|a, b| a.ratio.abs().total_cmp(&b.ratio.abs()));
        let mut v_hat = None;
        for c in &by_abs {
            if !c.torus_found {
                break;
            }
            v_hat = Some(c.ratio.abs());
        }
        // A failure at |r| stops the bound even if the opposite sign holds.
        if let Some(first_fail) = by_abs.iter().find(|c| !c.torus_found) {
            v_hat = by_abs
                .iter()
                .filter(|c| c.ratio.abs() < first_fail.ratio.abs())
                .map(|c| c.ratio.abs())
                .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
        }
        let found: Vec<usize> = col.iter().enumerate().filter(|(_, c)| c.torus_found).map(|(i, _)| i).collect();
        let zero_idx = col.iter().position(|c| c.ratio == 0.0);
        let contiguous = match (found.first(), found.last()) {
            (Some(&a), Some(&b)) => found.len() == b - a + 1 && zero_idx.is_none_or(|z| a <= z && z <= b),
            _ => true,
        };
        columns.push(ColumnBound {
            lambda_k: lam,
            v_hat,
            all_found: !col.is_empty() && col.iter().all(|c| c.torus_found),
            contiguous,
        });
    }
    let nonzero: Vec<&ColumnBound> = columns.iter().filter(|c| c.lambda_k != 0.0).collect();
    let v_hat = if nonzero.iter().all(|c| c.v_hat.is_some()) && !nonzero.is_empty() {
        nonzero.iter().filter_map(|c| c.v_hat).reduce(f64::min)
    } else {
        None
    };
    WedgeSummary {
        pivot,
        rho_star,
        contiguous: columns.iter().all(|c| c.contiguous),
        columns,
        v_hat,
        cells: cells.len(),
        cells_with_torus: cells.iter().filter(|c| c.torus_found).count(),
        cells_failed: cells.iter().filter(|c| c.error.is_some()).count(),
    }
}

/// Full scan over `lambda_grid × ratio_grid`, cells in parallel.
pub fn sweep_wedge(
    template: &SystemConfig,
    k: usize,
    ratio_grid: &[f64],
    lambda_grid: &[f64],
    opts: &VerifyOptions,
) -> Result<WedgeScanResult> {
    sweep_wedge_resume(template, k, ratio_grid, lambda_grid, opts, &[], |_| {})
}

/// Like [`sweep_wedge`], but cells found in `done` (matched bitwise on
/// `(λₖ, ratio)`) are reused and `on_cell` sees each newly computed cell
/// as soon as it finishes. Cells come back in grid order.
pub fn sweep_wedge_resume<F>(
    template: &SystemConfig,
    k: usize,
    ratio_grid: &[f64],
    lambda_grid: &[f64],
    opts: &VerifyOptions,
    done: &[WedgeCell],
    on_cell: F,
) -> Result<WedgeScanResult>
where
    F: Fn(&WedgeCell) + Sync,
{
    template.check_index(k)?;
    if template.n() < 2 {
        return Err(Error::InvalidArgument("a wedge scan needs at least two centers".into()));
    }
    if ratio_grid.iter().chain(lambda_grid).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("sweep grid"));
    }
    let root = pivot_root(template, k)?;
    let key = |l: f64, r: f64| (l.to_bits(), r.to_bits());
    let known: std::collections::HashMap<(u64, u64), &WedgeCell> =
        done.iter().map(|c| (key(c.lambda_k, c.ratio), c)).collect();
    let pairs: Vec<(f64, f64)> = lambda_grid
        .iter()
        .flat_map(|&l| ratio_grid.iter().map(move |&r| (l, r)))
        .collect();
    let cells: Vec<WedgeCell> = pairs
        .par_iter()
        .map(|&(l, r)| match known.get(&key(l, r)) {
            Some(c) => (*c).clone(),
            None => {
                let c = run_wedge_cell(template, k, root.as_ref(), l, r, opts);
                on_cell(&c);
                c
            }
        })
        .collect();
    let summary = summarize_wedge(k, root.as_ref().map(|r| r.rho_star), lambda_grid, &cells);
    Ok(WedgeScanResult {
        pivot: k,
        lambda_grid: lambda_grid.to_vec(),
        ratio_grid: ratio_grid.to_vec(),
        cells,
        summary,
    })
}

impl WedgeScanResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_cells_csv(&self.cells, out)
    }
}

/// One row per cell with a header.
pub fn write_cells_csv<W: Write>(cells: &[WedgeCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in cells {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_cells_csv`].
pub fn read_cells_csv<R: std::io::Read>(input: R) -> Result<Vec<WedgeCell>> {
    let mut r = csv::Reader::from_reader(input);
    let mut cells = Vec::new();
    for row in r.deserialize() {
        cells.push(row?);
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::Refinement;
    use crate::cbe::TsbTerm;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn oracle(lambda: f64, v: Complex64, xi: Complex64) -> SystemConfig {
        SystemConfig::single(xi, v, TsbTerm::radial_cubic(1.0, 1.0), lambda)
    }

    #[test]
    fn rigid_rotation_closed_form() {
        let v = c(0.7, -0.4);
        let p0 = c(0.3, 0.2);
        let cfg = oracle(0.0, v, c(0.0, 0.0));
        let traj = integrate(&cfg, p0, 0.0, 20.0 * PI, 1e-11).unwrap();
        for (&t, &p) in traj.times.iter().zip(&traj.points) {
            let exact = p0 - Complex64::i() * v * (Complex64::from_polar(1.0, t) - 1.0);
            assert!((p - exact).norm() < 1e-9);
        }
    }

    #[test]
    fn logistic_oracle_closed_form() {
        let eps = 0.1;
        let cfg = oracle(eps, c(0.0, 0.0), c(0.0, 0.0));
        let z0 = c(0.3, 0.4);
        let traj = integrate(&cfg, z0, 0.0, 20.0 * PI, 1e-11).unwrap();
        let r02 = z0.norm_sqr();
        for (&t, &p) in traj.times.iter().zip(&traj.points) {
            let e = (2.0 * eps * t).exp();
            let r2 = r02 * e / (1.0 - r02 + r02 * e);
            assert!((p.norm_sqr() - r2).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_field_is_stationary() {
        let cfg = SystemConfig::single(c(0.0, 0.0), c(0.0, 0.0), TsbTerm::zero(), 0.5);
        let p0 = c(1.25, -3.0);
        let traj = integrate(&cfg, p0, 0.0, 30.0, 1e-10).unwrap();
        assert!(traj.points.iter().all(|&p| p == p0));
    }

    #[test]
    fn tolerance_range_enforced() {
        let cfg = oracle(0.0, c(1.0, 0.0), c(0.0, 0.0));
        assert!(integrate(&cfg, c(0.0, 0.0), 0.0, 1.0, 1e-3).is_err());
        assert!(integrate(&cfg, c(0.0, 0.0), 0.0, 1.0, 1e-13).is_err());
        assert!(integrate(&cfg, c(0.0, 0.0), 1.0, 1.0, 1e-8).is_err());
    }

    #[test]
    fn stroboscope_of_rigid_rotation() {
        let cfg = oracle(0.0, c(1.0, 0.5), c(0.0, 0.0));
        let p0 = c(-0.2, 0.9);
        let traj = integrate(&cfg, p0, 0.0, 12.0 * TAU, 1e-11).unwrap();
        let s = stroboscope(&traj, TAU).unwrap();
        assert_eq!(s.len(), 13);
        assert!(s.iter().all(|p| (p - p0).norm() < 1e-10));
        let short = integrate(&cfg, p0, 0.0, 5.0 * TAU, 1e-9).unwrap();
        assert!(matches!(stroboscope(&short, TAU), Err(Error::InsufficientSpan { .. })));
    }

    #[test]
    fn stroboscope_logistic_limit() {
        let cfg = oracle(0.1, c(0.0, 0.0), c(0.0, 0.0));
        let traj = integrate(&cfg, c(0.5, 0.0), 0.0, 30.0 * TAU, 1e-10).unwrap();
        let s = stroboscope(&traj, TAU).unwrap();
        assert!((s.last().unwrap().norm() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn circle_fit_exact() {
        let center = c(1.0, 1.0);
        let pts: Vec<Complex64> = (0..60).map(|i| center + Complex64::from_polar(2.0, 0.37 * i as f64)).collect();
        let fit = estimate_torus(&[pts], &FitOptions { transient_fraction: 0.0, ..Default::default() }).unwrap();
        let t = fit.torus().unwrap();
        assert!((t.mean_radius - 2.0).abs() < 1e-12);
        assert!((t.drift_center - center).norm() < 1e-12);
        assert!(t.radial_spread < 1e-12);
        assert!(t.converged);
    }

    #[test]
    fn coincident_points_are_a_fixed_point() {
        let pts = vec![c(0.5, -0.5); 100];
        let fit = estimate_torus(&[pts], &FitOptions::default()).unwrap();
        assert!(matches!(fit, SectionFit::FixedPoint { .. }));
        assert!(matches!(
            estimate_torus(&[vec![c(0.0, 0.0); 10]], &FitOptions::default()),
            Err(Error::TooFewPoints { .. })
        ));
    }

    fn root(rho: f64, gamma: f64) -> EquilibriumRoot {
        EquilibriumRoot {
            rho_star: rho,
            gamma,
            refined_by: Refinement {
                bracket: (rho, rho),
                bisection_steps: 0,
                secant_steps: 0,
                residual: 0.0,
            },
        }
    }

    fn quick() -> VerifyOptions {
        VerifyOptions {
            periods: 200,
            ..Default::default()
        }
    }

    #[test]
    fn oracle_torus_is_measured() {
        let cfg = oracle(0.1, c(0.0, 0.0), c(0.0, 0.0));
        let pred = predict_manifold(&cfg, 0, &root(1.0, -2.0), &[], 256).unwrap();
        let rep = measure_stability(&cfg, &pred, &quick()).unwrap();
        assert_eq!(rep.verdict, Verdict::Stable);
        let t = rep.torus.as_ref().unwrap();
        assert!((t.mean_radius - 1.0).abs() < 1e-3);
        assert!(t.drift_center.norm() < 1e-3);
        assert!(rep.drift_center.unwrap().norm() < 1e-3);
        // Exact normal rate of the logistic oracle is 2ε.
        let r = rep.rate_ratio.unwrap();
        assert!((0.5..2.0).contains(&r), "ratio {r}");
    }

    #[test]
    fn unstable_oracle_decays_inside() {
        let cfg = oracle(-0.1, c(0.0, 0.0), c(0.0, 0.0));
        let traj = integrate(&cfg, c(0.9, 0.0), 0.0, 100.0 * TAU, 1e-9).unwrap();
        let s = stroboscope(&traj, TAU).unwrap();
        let fit = estimate_torus(&[s], &FitOptions::default()).unwrap();
        assert!(matches!(fit, SectionFit::FixedPoint { location, .. } if location.norm() < 1e-6));
        let pred = predict_manifold(&cfg, 0, &root(1.0, -2.0), &[], 256).unwrap();
        let rep = measure_stability(&cfg, &pred, &quick()).unwrap();
        assert_eq!(rep.verdict, Verdict::Unstable);
        assert!(rep.agrees);
    }

    #[test]
    fn zero_lambda_is_inconclusive() {
        let cfg = oracle(0.0, c(0.0, 0.0), c(0.0, 0.0));
        let pred = predict_manifold(&cfg, 0, &root(1.0, -2.0), &[], 256).unwrap();
        let rep = measure_stability(&cfg, &pred, &VerifyOptions { periods: 40, ..Default::default() }).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        assert!(rep.notes.iter().any(|n| n.contains("foliated")));
        assert!(rep.agrees);
    }

    #[test]
    fn drift_center_rejects_unconverged_fit() {
        let t = TorusEstimate {
            section_points: vec![],
            mean_radius: 1.0,
            radial_spread: 0.5,
            drift_center: c(0.0, 0.0),
            decay_rate: None,
            rotation_rate: None,
            converged: false,
        };
        assert!(matches!(drift_center(&[], &t, 0.4, TAU), Err(Error::NotConverged)));
    }

    #[test]
    fn summary_of_synthetic_grid() {
        let lam = [-0.02, 0.0, 0.02];
        let ratios = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut cells = Vec::new();
        for &l in &lam {
            for &r in &ratios {
                let found = l != 0.0 && (r as f64).abs() <= if l > 0.0 { 0.5 } else { 1.0 };
                cells.push(WedgeCell {
                    lambda_k: l,
                    ratio: r,
                    torus_found: found,
                    verdict: None,
                    mean_radius: None,
                    radial_spread: None,
                    drift_re: None,
                    drift_im: None,
                    error: None,
                });
            }
        }
        let s = summarize_wedge(0, Some(1.0), &lam, &cells);
        assert_eq!(s.v_hat, Some(0.5));
        assert!(s.contiguous);
        assert_eq!(s.columns[1].v_hat, None);
        assert!(s.columns[0].all_found);
        assert_eq!(s.cells_with_torus, 8);
    }

    #[test]
    fn csv_round_trip_of_cells() {
        let cell = WedgeCell {
            lambda_k: 0.01,
            ratio: -0.5,
            torus_found: true,
            verdict: Some(Verdict::Stable),
            mean_radius: Some(1.0),
            radial_spread: Some(0.001),
            drift_re: Some(0.0),
            drift_im: Some(-0.25),
            error: None,
        };
        let mut buf = Vec::new();
        let failed = WedgeCell {
            torus_found: false,
            verdict: None,
            mean_radius: None,
            error: Some("step size underflow at t = 3.5".into()),
            ..cell.clone()
        };
        write_cells_csv(&[cell.clone(), failed.clone()], &mut buf).unwrap();
        assert_eq!(read_cells_csv(buf.as_slice()).unwrap(), vec![cell, failed]);
    }
}
