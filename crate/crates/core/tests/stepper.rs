mod common;

use approx::assert_relative_eq;
use edchrom::harness::l1_error;
use edchrom::linalg::block_tridiagonal_solve;
use edchrom::spectral::decompose_at_interface;
use edchrom::transform::inverse;
use edchrom::{experiment_preset, Field, GridState, InitialCondition, SchemeKind, SimulationConfig, Simulator};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

#[test]
fn implicit_stage_matches_dense_newton() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (n, m) = (2, 8);
        let model = common::random_model(&mut rng, n, 0.9);
        let mut cfg = SimulationConfig::new(SchemeKind::CompUpw5, n, m);
        cfg.d_a = rng.gen_range(1e-3..1e-1);
        let dt = 0.05;
        let mut sim = Simulator::new(&model, &cfg).unwrap();
        let g = Field::from_fn(n, m, |_, _| rng.gen_range(0.1..5.0));
        let mut guess = Field::zeros(n, m);
        for j in 0..m {
            guess.cell_mut(j).copy_from_slice(&inverse(&model, g.cell(j)).unwrap());
        }
        let mut c = Field::zeros(n, m);
        let iterations = sim.implicit_stage(&g, &guess, dt, &mut c).unwrap();
        assert!(iterations <= cfg.newton_max_iter);
        let oracle = common::dense_implicit_solve(&model, g.as_slice(), n, m, 0.5 * cfg.d_a * dt);
        for (x, y) in c.as_slice().iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-10 * max_abs(&oracle).max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn implicit_stage_without_dispersion_is_the_inverse() {
    let model = experiment_preset(1).unwrap().model;
    let cfg = SimulationConfig::new(SchemeKind::ChrUpw, 3, 4);
    let mut sim = Simulator::new(&model, &cfg).unwrap();
    let g = Field::from_fn(3, 4, |i, j| 0.1 + (i + j) as f64);
    let mut c = Field::zeros(3, 4);
    assert_eq!(sim.implicit_stage(&g, &g, 0.01, &mut c).unwrap(), 0);
    for j in 0..4 {
        assert_eq!(c.cell(j), inverse(&model, g.cell(j)).unwrap().as_slice());
    }
}

#[test]
fn block_solve_matches_dense_lu() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let (mat, dense) = common::random_block_system(&mut rng, 3, 6);
        let rhs: Vec<f64> = (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = block_tridiagonal_solve(&mat, &rhs).unwrap();
        let y = common::dense_solve(&dense, &rhs);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-11 * max_abs(&y).max(1.0));
        }
        assert!(mat.relative_residual(&x, &rhs) <= 1e-12);
    }
}

#[test]
fn second_order_in_time() {
    // Fixed grid, so the spatial error cancels in differences between runs.
    let preset = experiment_preset(4).unwrap().with_cells(400);
    let solve = |k: f64| {
        let mut p = preset.clone();
        p.config.cfl = k;
        p.run().unwrap().final_snapshot().c.clone()
    };
    let runs: Vec<Field> = [0.8, 0.4, 0.2].iter().map(|&k| solve(k)).collect();
    let e1 = l1_error(&runs[0], &runs[1]).unwrap();
    let e2 = l1_error(&runs[1], &runs[2]).unwrap();
    let order = (e1 / e2).log2();
    assert!((1.8..=2.2).contains(&order), "temporal order {order}");
}

#[test]
fn mass_never_grows_without_injection() {
    for scheme in SchemeKind::ALL {
        let mut p = experiment_preset(4).unwrap().with_scheme(scheme).with_cells(100).with_dispersion(0.0);
        p.config.t_final = 3.0;
        p.config.output_times.clear();
        let mut sim = Simulator::new(&p.model, &p.config).unwrap();
        let mut before: f64 = sim.initial_state().unwrap().mass().iter().sum();
        sim.run_with(|state, _| {
            let after: f64 = state.mass().iter().sum();
            assert!(after <= before + 1e-12, "{scheme}: {before} -> {after}");
            before = after;
        })
        .unwrap();
    }
}

#[test]
fn characteristic_dt_on_a_nearly_clean_bed() {
    // μ_1 tends to 1/(1 + η_1) at zero concentration, so the characteristic
    // step approaches (1 + η_1) times the component-wise one from below.
    let model = experiment_preset(1).unwrap().model;
    let cfg = SimulationConfig::new(SchemeKind::ChrUpw, 3, 800);
    let mut sim = Simulator::new(&model, &cfg).unwrap();
    let comp = 0.8 / 800.0 / 0.2;
    let limit = comp * (1.0 + model.eta()[0]);
    let mut prev = 0.0;
    for level in [1e-2, 1e-4, 1e-6] {
        let state = GridState::new(Field::from_fn(3, 800, |_, _| level));
        let dt = sim.stable_dt(&state).unwrap();
        assert!(dt > comp && dt > prev && dt < limit);
        prev = dt;
    }
    assert_relative_eq!(prev, limit, max_relative = 1e-4);
}

#[test]
fn experiment1_states_decompose_cleanly() {
    let p = experiment_preset(1).unwrap().with_final_time(2.0);
    let out = p.run().unwrap();
    let w = &out.final_snapshot().w;
    for j in (0..w.n_cells() - 1).step_by(7) {
        let d = decompose_at_interface(&p.model, w.cell(j), w.cell(j + 1)).unwrap();
        assert!(d.lambda[0] > 1.0);
        assert!(d.lambda.windows(2).all(|l| l[0] < l[1]));
        for k in 0..3 {
            let e = d.apply_r_inverse(&d.eigenvector(k));
            for (i, x) in e.iter().enumerate() {
                assert!((x - if i == k { 1.0 } else { 0.0 }).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn inlet_flux_during_the_first_pulse() {
    let p = experiment_preset(1).unwrap();
    let mut sim = Simulator::new(&p.model, &p.config).unwrap();
    let mut state = sim.initial_state().unwrap();
    state.t = 0.05;
    let f = sim.interface_fluxes(&state).unwrap();
    assert_relative_eq!(f[0], 0.2, max_relative = 1e-14);
    assert_relative_eq!(f[1], 0.2, max_relative = 1e-14);
    assert_eq!(f[2], 0.0);
}

fn scheme_strategy() -> impl Strategy<Value = SchemeKind> {
    prop::sample::select(SchemeKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_step_conserves_mass(
        scheme in scheme_strategy(),
        m in 20usize..60,
        d_a in prop_oneof![Just(0.0), 1e-5f64..1e-3],
        amp in prop::array::uniform3(0.0f64..3.0),
        sharp in 20.0f64..200.0,
        nu in 0.6f64..=1.0,
    ) {
        let model = edchrom::IsothermModel::toth(&[4.0, 5.0, 6.0], &[4.0, 5.0, 1.0], 0.5, nu).unwrap();
        let mut cfg = SimulationConfig::new(scheme, 3, m);
        cfg.d_a = d_a;
        cfg.t_final = 0.3;
        cfg.initial = InitialCondition::Gaussian { amplitudes: amp.to_vec(), center: 0.6, sharpness: sharp, cell_average: false };
        let out = Simulator::new(&model, &cfg).unwrap().run().unwrap();
        prop_assert!(out.stats.max_mass_residual <= 1e-12);
        prop_assert!(out.stats.ledger_residual <= 1e-12);
    }
}
