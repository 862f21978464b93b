use epicycle_core::averaging::{analyze_center, average_m, default_rho_grid, predict_manifold, ManifoldPrediction};
use epicycle_core::cbe::{builtin_families, SystemConfig, TsbTerm};
use epicycle_core::verify::{integrate, measure_stability, VerifyOptions};
use epicycle_core::Complex64;
use std::f64::consts::TAU;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn first_prediction(cfg: &SystemConfig) -> ManifoldPrediction {
    let (_, roots) = analyze_center(cfg, 0, &default_rho_grid(cfg), 256).unwrap();
    predict_manifold(cfg, 0, &roots.roots[0], &[], 256).unwrap()
}

/// The same average with `e^{−it}` in front of `Ĥ`, for comparison.
fn average_flipped(cfg: &SystemConfig, w: Complex64, nodes: usize) -> Complex64 {
    let h = &cfg.tsb()[0];
    let shift = Complex64::i() * cfg.v();
    let zero = vec![0.0; cfg.n()];
    let sum: Complex64 = (0..nodes)
        .map(|j| {
            let rot = Complex64::from_polar(1.0, TAU * j as f64 / nodes as f64);
            let a = w * rot.conj() - shift;
            rot.conj() * h.eval(a, a.conj(), &zero)
        })
        .sum();
    sum / nodes as f64
}

/// One period of the full system in the co-rotating frame moves `z` by
/// `2π λ M(z)` to first order; the mirrored kernel does not match.
#[test]
fn direct_simulation_selects_the_kernel_sign() {
    let lam = 1e-3;
    let fam = builtin_families().into_iter().find(|f| f.name == "gauss_generic").unwrap();
    let cfg = SystemConfig::single(c(0.0, 0.0), c(0.3, 0.2), fam.term, lam);
    for w in [c(0.6, 0.1), c(-0.2, 0.9), c(0.4, -0.5)] {
        let p0 = cfg.from_corotating_frame(w, 0.0, 0).unwrap();
        let traj = integrate(&cfg, p0, 0.0, TAU, 1e-12).unwrap();
        let z1 = cfg.corotating_frame(*traj.points.last().unwrap(), TAU, 0).unwrap();
        let measured = (z1 - w) / (TAU * lam);
        let plus = average_m(&cfg, 0, w, 256).unwrap();
        let minus = average_flipped(&cfg, w, 256);
        let gap = (plus - minus).norm();
        assert!(gap > 0.05, "kernels indistinguishable at {w}");
        assert!((measured - plus).norm() < 0.05 * gap, "{w}: measured {measured}, M {plus}, mirrored {minus}");
    }
}

#[test]
fn translating_the_centers_translates_the_drift_center() {
    let x = c(3.0, -2.0);
    let base = SystemConfig::single(c(0.5, 0.5), c(0.5, 0.0), TsbTerm::radial_cubic(1.0, 1.0), 0.02);
    let moved = base.translated(x);
    let opts = VerifyOptions::default();
    let a = measure_stability(&base, &first_prediction(&base), &opts).unwrap();
    let b = measure_stability(&moved, &first_prediction(&moved), &opts).unwrap();
    let (da, db) = (a.drift_center.unwrap(), b.drift_center.unwrap());
    assert!((db - da - x).norm() < 1e-6, "{da} {db}");
    assert!((b.torus.unwrap().mean_radius - a.torus.unwrap().mean_radius).abs() < 1e-6);
}

#[test]
fn unperturbed_flow_is_foliated() {
    let cfg = SystemConfig::single(c(0.0, 0.0), c(0.4, -0.3), TsbTerm::radial_cubic(1.0, 1.0), 0.0);
    for w in [c(0.3, 0.0), c(0.0, 1.5), c(-2.0, 1.0)] {
        let p0 = cfg.from_corotating_frame(w, 0.0, 0).unwrap();
        let span = 100.0 * TAU;
        let traj = integrate(&cfg, p0, 0.0, span, 1e-10).unwrap();
        let z = cfg.corotating_frame(*traj.points.last().unwrap(), span, 0).unwrap();
        assert!((z.norm() - w.norm()).abs() < 1e-8, "{w} -> {z}");
    }
}

/// Every hyperbolic root of every family, with `v = 0`, sits inside the
/// first-order band `5 |λ| ρ*` of the measured ring.
#[test]
fn measured_rings_stay_inside_the_averaging_band() {
    let mut checked = 0;
    for fam in builtin_families() {
        for lam in [0.005, 0.02, -0.05] {
            let cfg = SystemConfig::single(c(0.0, 0.0), c(0.0, 0.0), fam.term.clone(), lam);
            let (_, roots) = analyze_center(&cfg, 0, &default_rho_grid(&cfg), 256).unwrap();
            for root in &roots.roots {
                let pred = predict_manifold(&cfg, 0, root, &[], 256).unwrap();
                let rep = measure_stability(&cfg, &pred, &VerifyOptions::default()).unwrap();
                assert!(rep.agrees, "{} lambda={lam}: {:?}", fam.name, rep.verdict);
                let r = rep.torus.expect("ring").mean_radius;
                let band = 5.0 * lam.abs() * root.rho_star;
                assert!((r - root.rho_star).abs() <= band, "{} lambda={lam}: {r} vs {}", fam.name, root.rho_star);
                checked += 1;
            }
        }
    }
    assert!(checked >= 6, "only {checked} roots");
}
