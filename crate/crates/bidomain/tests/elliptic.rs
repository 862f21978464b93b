use bidomain_sim::grid::{apply_operator, mean};
use bidomain_sim::{BidomainParams, BidomainState, Simulator};
use proptest::prelude::*;
use std::f64::consts::PI;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `ψ = cos(k x')cos(2k y')` on `[10, 60]²`, `x' = x − 10`, with `u`
/// scaled so that the continuous equation holds exactly. Returns the
/// truncation residual of the sampled solution and the error of the
/// discrete solve.
fn manufactured(n: usize) -> (f64, f64) {
    let params = BidomainParams { grid_n: n, ..Default::default() };
    let mut sim = Simulator::new(params).unwrap();
    let co = sim.coeffs;
    let k = PI / 25.0;
    let exact = sim.grid.sample(|x, y| (k * (x - 10.0)).cos() * (2.0 * k * (y - 10.0)).cos());
    let scale = (1.0 + 4.0 * co.yy_ratio) / (4.0 * co.source);
    let mut state = BidomainState::uniform(n, 0.0, 0.0);
    state.u = exact.iter().map(|p| scale * p).collect();
    let mut lhs = vec![0.0; exact.len()];
    let mut rhs = vec![0.0; exact.len()];
    apply_operator(&sim.grid, 0.0, 1.0, co.yy_ratio, &exact, &mut lhs);
    apply_operator(&sim.grid, 0.0, 0.0, co.source, &state.u, &mut rhs);
    sim.solve_psi(&mut state).unwrap();
    (max_abs_diff(&lhs, &rhs), max_abs_diff(&state.psi, &exact))
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let r: Vec<(f64, f64)> = [60, 120, 240].iter().map(|&n| manufactured(n)).collect();
    for w in r.windows(2) {
        let res_order = (w[0].0 / w[1].0).log2();
        let err_order = (w[0].1 / w[1].1).log2();
        assert!((1.9..=2.1).contains(&res_order), "{r:?}");
        assert!((1.9..=2.1).contains(&err_order), "{r:?}");
    }
    // Frozen from the first run; the cosine modes are discrete eigenvectors.
    assert!((r[1].1 - 9.441e-5).abs() < 1e-7, "{r:?}");
}

#[test]
fn isotropic_medium_has_no_extracellular_potential() {
    let params = BidomainParams {
        grid_n: 40,
        epsilon_aniso: 0.0,
        ..Default::default()
    };
    let mut sim = Simulator::new(params.clone()).unwrap();
    let mut s = bidomain_sim::initiate_spiral(&params, &Default::default());
    for _ in 0..20 {
        sim.step(&mut s, params.dt).unwrap();
    }
    assert!(s.psi.iter().all(|&p| p == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_solve_meets_residual_and_gauge(
        modes in prop::collection::vec((0usize..6, 0usize..6, -1.0..1.0f64), 1..6),
    ) {
        let n = 40;
        let params = BidomainParams { grid_n: n, ..Default::default() };
        let mut sim = Simulator::new(params).unwrap();
        let co = sim.coeffs;
        let k = PI / 50.0;
        let u = sim.grid.sample(|x, y| {
            modes.iter().map(|&(a, b, c)| c * (a as f64 * k * (x - 10.0)).cos() * (b as f64 * k * (y - 10.0)).cos()).sum()
        });
        let mut state = BidomainState::uniform(n, 0.0, 0.0);
        state.u = u;
        let stats = sim.solve_psi(&mut state).unwrap();
        prop_assert!(stats.relative_residual <= 1e-8);
        let mut lhs = vec![0.0; n * n];
        let mut rhs = vec![0.0; n * n];
        apply_operator(&sim.grid, 0.0, 1.0, co.yy_ratio, &state.psi, &mut lhs);
        apply_operator(&sim.grid, 0.0, 0.0, co.source, &state.u, &mut rhs);
        let scale = rhs.iter().fold(1e-300f64, |m, x| m.max(x.abs()));
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-8 * scale.max(1.0));
        prop_assert!(mean(&state.psi).abs() < 1e-12);
    }
}
