use bidomain_sim::run::FIELD_BOUND;
use bidomain_sim::{run, BidomainParams, BidomainState, CrossField, RunSpec, Simulator};

fn kinetics_params() -> BidomainParams {
    BidomainParams {
        grid_n: 40,
        diffusion: 0.0,
        epsilon_aniso: 0.0,
        tsb_amp: 0.0,
        ..Default::default()
    }
}

/// Classical RK4 on the local kinetics, used as the reference solution.
fn rk4(p: &BidomainParams, (u0, v0): (f64, f64), t: f64, steps: usize) -> (f64, f64) {
    let f = |u: f64, v: f64| ((u - u * u * u / 3.0 - v) / p.varsigma, p.varsigma * (u + p.delta - p.gamma * v));
    let h = t / steps as f64;
    let (mut u, mut v) = (u0, v0);
    for _ in 0..steps {
        let k1 = f(u, v);
        let k2 = f(u + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
        let k3 = f(u + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
        let k4 = f(u + h * k3.0, v + h * k3.1);
        u += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    (u, v)
}

fn simulate(p: &BidomainParams, start: (f64, f64), t: f64, dt: f64) -> (f64, f64) {
    let mut sim = Simulator::new(p.clone()).unwrap();
    let mut s = BidomainState::uniform(p.grid_n, start.0, start.1);
    let steps = (t / dt).round() as usize;
    for _ in 0..steps {
        sim.step(&mut s, dt).unwrap();
    }
    (s.u[123], s.v[123])
}

fn err(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

#[test]
fn first_step_has_second_order_local_error() {
    let p = kinetics_params();
    let start = (1.2, -0.3);
    let e: Vec<f64> = [1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&dt| err(simulate(&p, start, dt, dt), rk4(&p, start, dt, 64)))
        .collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log10();
        assert!((1.9..=2.1).contains(&order), "{e:?}");
    }
}

#[test]
fn local_kinetics_converge_at_second_order() {
    let p = kinetics_params();
    let start = (1.2, -0.3);
    let t = 2.0;
    let reference = rk4(&p, start, t, 200_000);
    let e: Vec<f64> = [0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| err(simulate(&p, start, t, dt), reference))
        .collect();
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "{e:?}");
    }
}

fn short_spec(shift: f64) -> RunSpec {
    let mut spec = RunSpec::default();
    spec.params.grid_n = 60;
    spec.params.domain = (10.0 + shift, 60.0 + shift);
    spec.params.tsb_center = (35.0 + shift, 35.0 + shift);
    spec.protocol = CrossField {
        cross: (32.75 + shift, 42.0 + shift),
        ..Default::default()
    };
    spec.horizon = 150.0;
    spec
}

#[test]
fn translating_everything_translates_the_tip() {
    // A whole number of cells, so the grid maps onto itself.
    let shift = 12.0 * 50.0 / 60.0;
    let a = run(&short_spec(0.0), |_| Ok(())).unwrap();
    let b = run(&short_spec(shift), |_| Ok(())).unwrap();
    assert_eq!(a.state.tip_path.len(), b.state.tip_path.len());
    assert!(a.state.tip_path.len() > 100);
    for (p, q) in a.state.tip_path.iter().zip(&b.state.tip_path) {
        assert!((q.x - p.x - shift).abs() < 1e-8 && (q.y - p.y - shift).abs() < 1e-8, "{p:?} {q:?}");
    }
}

#[test]
fn fields_stay_within_documented_bound() {
    let mut spec = RunSpec::default();
    spec.params.grid_n = 60;
    spec.horizon = 600.0;
    let out = run(&spec, |s| {
        assert!(s.is_finite());
        Ok(())
    })
    .unwrap();
    assert!(out.summary.max_abs_u <= FIELD_BOUND && out.summary.max_abs_v <= FIELD_BOUND, "{:?}", out.summary);
    assert!(out.summary.mean_psi_iterations <= 2.0);
}

/// Tip radius and period of the unperturbed spiral on successively finer grids.
#[test]
fn control_spiral_converges_under_refinement() {
    let measure = |n: usize| {
        let mut spec = RunSpec::default().control();
        spec.params.grid_n = n;
        spec.horizon = 900.0;
        let r = run(&spec, |_| Ok(())).unwrap().summary.report.expect("report");
        (r.tip_radius, r.rotation_period)
    };
    let [c60, c120, c240] = [60, 120, 240].map(measure);
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    assert!(rel(c120.0, c240.0) < rel(c60.0, c240.0), "{c60:?} {c120:?} {c240:?}");
    assert!(rel(c120.1, c240.1) < rel(c60.1, c240.1), "{c60:?} {c120:?} {c240:?}");
    assert!(rel(c120.0, c240.0) < 0.1 && rel(c120.1, c240.1) < 0.1, "{c120:?} {c240:?}");
}
