//! Classification of tip paths by the motion of their rotation centers.
//!
//! A path is cut into rotations where the direction of tip motion has turned
//! through a full `2π`. The center of each rotation is the time average of
//! the tip over that rotation; those centers form the meander center track,
//! which is then tested for rigid rotation, precession about a pivot at a
//! steady radius (epicyclic), convergence to the pivot (anchoring), or
//! none of these.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Result, SimError};
use crate::sim::TipSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterSample {
    pub t: f64,
    pub cx: f64,
    pub cy: f64,
    /// Mean distance of the tip from this center during the rotation.
    pub radius: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TipPath {
    pub samples: Vec<TipSample>,
    pub meander_center_track: Vec<CenterSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpicycleThresholds {
    pub pivot: (f64, f64),
    /// Fraction of the rotations dropped from the front of the track.
    pub transient_fraction: f64,
    pub min_rotations: usize,
    /// Largest mean center displacement per rotation still called rigid.
    pub rigid_drift: f64,
    /// Smallest precession radius that counts as bounded away from 0.
    pub min_radius: f64,
    /// Largest std/mean of the precession radius.
    pub radius_tolerance: f64,
    /// Smallest number of turns about the pivot.
    pub min_precession_periods: f64,
    /// Fraction of center steps that must turn the same way about the pivot.
    pub monotone_fraction: f64,
    /// Anchoring: final radius below this fraction of the initial radius.
    pub anchor_ratio: f64,
    /// Square domain `(lo, hi)` used for the boundary clearance test.
    pub domain: Option<(f64, f64)>,
    pub boundary_margin: f64,
}

impl Default for EpicycleThresholds {
    fn default() -> Self {
        EpicycleThresholds {
            pivot: (35.0, 35.0),
            transient_fraction: 0.2,
            min_rotations: 10,
            rigid_drift: 0.1,
            min_radius: 0.5,
            radius_tolerance: 0.25,
            min_precession_periods: 1.0,
            monotone_fraction: 0.9,
            anchor_ratio: 0.5,
            domain: None,
            boundary_margin: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionVerdict {
    Epicyclic,
    Anchoring,
    RigidRotation,
    Wandering,
}

impl MotionVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            MotionVerdict::Epicyclic => "epicyclic",
            MotionVerdict::Anchoring => "anchoring",
            MotionVerdict::RigidRotation => "rigid rotation",
            MotionVerdict::Wandering => "wandering",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpicycleReport {
    pub verdict: MotionVerdict,
    pub rotations: usize,
    /// Rotations left after the transient cut.
    pub analysed_rotations: usize,
    pub rotation_period: f64,
    pub tip_radius: f64,
    pub pivot: (f64, f64),
    /// Circle fitted through the analysed centers; the mean center when the
    /// fit is degenerate.
    pub precession_center: (f64, f64),
    /// Mean distance of the analysed centers from the pivot.
    pub precession_radius: f64,
    pub radius_spread: f64,
    /// Signed turns about the pivot; positive is counterclockwise.
    pub precession_periods: f64,
    pub precession_period: Option<f64>,
    pub drift_per_rotation: f64,
    pub monotone_fraction: f64,
    pub boundary_clearance: Option<f64>,
    pub reasons: Vec<String>,
}

/// Splits the path into rotations and returns one center per rotation.
pub fn center_track(samples: &[TipSample]) -> Vec<CenterSample> {
    if samples.len() < 3 {
        return Vec::new();
    }
    // Turning of the chord direction between consecutive samples.
    let mut turn = Vec::with_capacity(samples.len());
    turn.push(0.0);
    let mut prev_dir: Option<f64> = None;
    let mut acc = 0.0;
    for w in samples.windows(2) {
        let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
        if dx == 0.0 && dy == 0.0 {
            turn.push(acc);
            continue;
        }
        let dir = dy.atan2(dx);
        if let Some(p) = prev_dir {
            let mut d = dir - p;
            d -= TAU * (d / TAU).round();
            acc += d;
        }
        prev_dir = Some(dir);
        turn.push(acc);
    }
    let sense = if acc >= 0.0 { 1.0 } else { -1.0 };
    // First passages through successive multiples of 2π.
    let mut cuts = vec![0usize];
    let mut next = TAU;
    for (i, &a) in turn.iter().enumerate() {
        if sense * a >= next {
            cuts.push(i);
            next += TAU;
        }
    }
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let seg = &samples[w[0]..=w[1]];
        if seg.len() < 4 {
            continue;
        }
        let span = seg[seg.len() - 1].t - seg[0].t;
        if span <= 0.0 {
            continue;
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for p in seg.windows(2) {
            let dt = p[1].t - p[0].t;
            sx += 0.5 * dt * (p[0].x + p[1].x);
            sy += 0.5 * dt * (p[0].y + p[1].y);
        }
        let (cx, cy) = (sx / span, sy / span);
        let radius = seg.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / seg.len() as f64;
        out.push(CenterSample {
            t: 0.5 * (seg[0].t + seg[seg.len() - 1].t),
            cx,
            cy,
            radius,
            period: span,
        });
    }
    out
}

/// Algebraic circle fit; `None` when the points are nearly collinear or
/// coincident.
fn fit_center(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 3 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut suu, mut suv, mut svv, mut suuu, mut svvv, mut suvv, mut svuu) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in pts {
        let (u, v) = (p.0 - mx, p.1 - my);
        suu += u * u;
        suv += u * v;
        svv += v * v;
        suuu += u * u * u;
        svvv += v * v * v;
        suvv += u * v * v;
        svuu += v * u * u;
    }
    let det = suu * svv - suv * suv;
    let scale = (suu + svv).powi(2);
    if scale == 0.0 || det.abs() < 1e-10 * scale {
        return None;
    }
    let r1 = 0.5 * (suuu + suvv);
    let r2 = 0.5 * (svvv + svuu);
    let uc = (r1 * svv - r2 * suv) / det;
    let vc = (suu * r2 - suv * r1) / det;
    Some((mx + uc, my + vc))
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn detect_epicycle(samples: &[TipSample], th: &EpicycleThresholds) -> Result<(TipPath, EpicycleReport)> {
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(SimError::InvalidParams("tip sample times must increase strictly".into()));
    }
    let track = center_track(samples);
    if track.len() < th.min_rotations {
        return Err(SimError::PathTooShort {
            have: track.len(),
            need: th.min_rotations,
        });
    }
    let skip = ((track.len() as f64) * th.transient_fraction).floor() as usize;
    let used = &track[skip.min(track.len() - 2)..];
    let (px, py) = th.pivot;

    let drift = mean(used.windows(2).map(|w| (w[1].cx - w[0].cx).hypot(w[1].cy - w[0].cy)));
    let radii: Vec<f64> = used.iter().map(|c| (c.cx - px).hypot(c.cy - py)).collect();
    let rho = mean(radii.iter().copied());
    let spread = (mean(radii.iter().map(|r| (r - rho).powi(2)))).sqrt() / rho.max(f64::MIN_POSITIVE);

    let mut turns = 0.0;
    let mut pos = 0usize;
    let mut neg = 0usize;
    for w in used.windows(2) {
        let a0 = (w[0].cy - py).atan2(w[0].cx - px);
        let a1 = (w[1].cy - py).atan2(w[1].cx - px);
        let mut d = a1 - a0;
        d -= TAU * (d / TAU).round();
        turns += d;
        if d > 0.0 {
            pos += 1;
        } else if d < 0.0 {
            neg += 1;
        }
    }
    let periods = turns / TAU;
    let monotone = pos.max(neg) as f64 / (used.len() - 1) as f64;
    let span = used[used.len() - 1].t - used[0].t;
    let precession_period = (periods.abs() > 0.0).then(|| span / periods.abs());

    let pts: Vec<(f64, f64)> = used.iter().map(|c| (c.cx, c.cy)).collect();
    let mean_center = (mean(pts.iter().map(|p| p.0)), mean(pts.iter().map(|p| p.1)));
    let precession_center = if periods.abs() >= 0.5 { fit_center(&pts).unwrap_or(mean_center) } else { mean_center };

    let clearance = th.domain.map(|(lo, hi)| {
        let wall = (px - lo).min(hi - px).min(py - lo).min(hi - py);
        wall - radii.iter().cloned().fold(0.0, f64::max)
    });

    let quarter = (radii.len() / 4).max(1);
    let rho_first = mean(radii[..quarter].iter().copied());
    let rho_last = mean(radii[radii.len() - quarter..].iter().copied());

    let mut reasons = Vec::new();
    let verdict = if drift < th.rigid_drift {
        reasons.push(format!("center drift {drift:.3} per rotation below {}", th.rigid_drift));
        MotionVerdict::RigidRotation
    } else {
        let mut ok = true;
        if rho < th.min_radius {
            ok = false;
            reasons.push(format!("precession radius {rho:.3} below {}", th.min_radius));
        }
        if spread > th.radius_tolerance {
            ok = false;
            reasons.push(format!("radius spread {spread:.3} above {}", th.radius_tolerance));
        }
        if periods.abs() < th.min_precession_periods {
            ok = false;
            reasons.push(format!("{:.2} precession periods, need {}", periods.abs(), th.min_precession_periods));
        }
        if monotone < th.monotone_fraction {
            ok = false;
            reasons.push(format!("precession monotone fraction {monotone:.2}"));
        }
        if let Some(c) = clearance {
            if c < th.boundary_margin {
                ok = false;
                reasons.push(format!("boundary clearance {c:.2} below {}", th.boundary_margin));
            }
        }
        if ok {
            MotionVerdict::Epicyclic
        } else if rho_last < th.anchor_ratio * rho_first {
            reasons.push(format!("radius shrinks from {rho_first:.3} to {rho_last:.3}"));
            MotionVerdict::Anchoring
        } else {
            MotionVerdict::Wandering
        }
    };

    let report = EpicycleReport {
        verdict,
        rotations: track.len(),
        analysed_rotations: used.len(),
        rotation_period: mean(used.iter().map(|c| c.period)),
        tip_radius: mean(used.iter().map(|c| c.radius)),
        pivot: th.pivot,
        precession_center,
        precession_radius: rho,
        radius_spread: spread,
        precession_periods: periods,
        precession_period,
        drift_per_rotation: drift,
        monotone_fraction: monotone,
        boundary_clearance: clearance,
        reasons,
    };
    Ok((
        TipPath {
            samples: samples.to_vec(),
            meander_center_track: track,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(f: impl Fn(f64) -> (f64, f64), t1: f64, dt: f64) -> Vec<TipSample> {
        let n = (t1 / dt) as usize;
        (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                let (x, y) = f(t);
                TipSample { t, x, y }
            })
            .collect()
    }

    #[test]
    fn epicycloid_is_epicyclic() {
        let (ws, wf) = (0.01, 0.12);
        let p = path(
            |t| {
                (
                    35.0 + 8.0 * (ws * t).cos() + 2.0 * (wf * t).cos(),
                    35.0 + 8.0 * (ws * t).sin() + 2.0 * (wf * t).sin(),
                )
            },
            12.0 * TAU / ws,
            0.25,
        );
        let (tp, r) = detect_epicycle(&p, &EpicycleThresholds::default()).unwrap();
        assert_eq!(r.verdict, MotionVerdict::Epicyclic, "{r:?}");
        assert!((r.precession_radius - 8.0).abs() < 0.2, "{}", r.precession_radius);
        assert!(r.precession_periods > 9.0);
        assert!((r.precession_center.0 - 35.0).hypot(r.precession_center.1 - 35.0) < 0.2);
        assert!(tp.meander_center_track.len() > 100);
    }

    #[test]
    fn fixed_circle_is_rigid() {
        let p = path(|t| (30.0 + 3.0 * (0.5 * t).cos(), 32.0 - 3.0 * (0.5 * t).sin()), 300.0, 0.25);
        let (tp, r) = detect_epicycle(&p, &EpicycleThresholds::default()).unwrap();
        assert_eq!(r.verdict, MotionVerdict::RigidRotation);
        assert!((r.tip_radius - 3.0).abs() < 0.05);
        let c = tp.meander_center_track.last().unwrap();
        assert!((c.cx - 30.0).abs() < 0.05 && (c.cy - 32.0).abs() < 0.05);
    }

    #[test]
    fn converging_centers_anchor() {
        let p = path(
            |t| {
                let rho = 8.0 * (-t / 800.0).exp();
                (
                    35.0 + rho * (0.01 * t).cos() + 2.0 * (0.15 * t).cos(),
                    35.0 + rho * (0.01 * t).sin() + 2.0 * (0.15 * t).sin(),
                )
            },
            2500.0,
            0.25,
        );
        let (_, r) = detect_epicycle(&p, &EpicycleThresholds::default()).unwrap();
        assert_eq!(r.verdict, MotionVerdict::Anchoring, "{r:?}");
    }

    #[test]
    fn straight_drift_wanders() {
        let p = path(|t| (20.0 + 2.0 * (0.3 * t).cos(), 30.0 + 0.01 * t + 2.0 * (0.3 * t).sin()), 1000.0, 0.25);
        let (_, r) = detect_epicycle(&p, &EpicycleThresholds::default()).unwrap();
        assert_eq!(r.verdict, MotionVerdict::Wandering, "{r:?}");
    }

    #[test]
    fn short_paths_are_rejected() {
        let p = path(|t| (t.cos(), t.sin()), 20.0, 0.1);
        assert!(matches!(
            detect_epicycle(&p, &EpicycleThresholds::default()),
            Err(SimError::PathTooShort { .. })
        ));
    }
}
