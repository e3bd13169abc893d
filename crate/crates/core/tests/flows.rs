use nalgebra::DMatrix;
use spincm_core::flows::{
    evolve, flow_rhs, hamiltonian, hamiltonian_gradient, integrate, pole_velocity_residue, power_traces,
    rational_eom_t2_rhs, state_difference, FlowSpec,
};
use spincm_core::linalg::{commutator, sorted_eigenvalues, spectral_distance};
use spincm_core::phase::{lax_matrix, lax_matrix_rational, m_matrix, SpinState};
use spincm_core::random::{random_regular_state, random_state, RandomStateConfig};
use spincm_core::verify::{finite_difference_gradient, gauge_invariant_distance, relative_mismatch};

fn regular(n: usize, nc: usize, seed: u64) -> SpinState<f64> {
    let cfg = RandomStateConfig::new(n, nc).with_momentum_scale(0.3);
    random_regular_state(&cfg, seed, &[2, 3], 1.0, 1e-3, 0.5).unwrap().0
}

fn at_gamma(state: &SpinState<f64>, g: f64) -> SpinState<f64> {
    let (_, x, p, a, b) = state.clone().into_parts();
    SpinState::new(g, x, p, a, b).unwrap()
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..5 {
        let s: SpinState<f64> = random_state(&RandomStateConfig::new(3, 2), 100 + seed).unwrap();
        for m in 2..=4 {
            let err = relative_mismatch(&hamiltonian_gradient(&s, m), &finite_difference_gradient(&s, m, 1e-6), 1e-9);
            assert!(err < 1e-6, "seed {seed} m {m}: {err}");
        }
    }
}

#[test]
fn residue_velocity_matches_gradient() {
    for seed in 0..10 {
        let s: SpinState<f64> = random_state(&RandomStateConfig::new(1 + seed as usize % 4, 2), seed).unwrap();
        for m in 1..=4 {
            let g = hamiltonian_gradient(&s, m);
            for i in 0..s.n_particles() {
                let v = pole_velocity_residue(&s, m, i);
                assert!((v - g.p[i]).abs() <= 1e-9 * g.p[i].abs().max(1.0), "seed {seed} m {m} i {i}");
            }
        }
    }
}

#[test]
fn single_pole_residue_velocity_is_2p() {
    let s = SpinState::new(
        0.8,
        nalgebra::dvector![0.3],
        nalgebra::dvector![-0.45],
        DMatrix::from_element(1, 1, 2.0),
        DMatrix::from_element(1, 1, 0.5),
    )
    .unwrap();
    assert!((pole_velocity_residue(&s, 2, 0) - 2.0 * -0.45f64).abs() < 1e-14);
}

#[test]
fn lax_equation_holds_along_t2() {
    let s = regular(3, 2, 20);
    let dt = 1e-5;
    let fwd = evolve(&s, 2, dt, dt).unwrap();
    let bwd = evolve(&s, 2, -dt, dt).unwrap();
    let l_dot = (lax_matrix(&fwd) - lax_matrix(&bwd)) / (2.0 * dt);
    let res = (l_dot - commutator(&m_matrix(&s), &lax_matrix(&s))).amax();
    assert!(res < 1e-6, "{res}");
}

#[test]
fn flows_are_isospectral_and_conserve_hamiltonians() {
    let s = regular(3, 2, 30);
    let ev0 = sorted_eigenvalues(&lax_matrix(&s));
    let h0: Vec<f64> = (1..=4).map(|m| hamiltonian(&s, m)).collect();
    for m in [2, 3] {
        let traj = integrate(&s, &FlowSpec::new(m, 0.5, 1e-3).with_record_every(50)).unwrap();
        for (_, st) in &traj.samples {
            assert!(spectral_distance(&ev0, &sorted_eigenvalues(&lax_matrix(st))) < 1e-8);
            for (k, h) in h0.iter().enumerate() {
                assert!((hamiltonian(st, k + 1) - h).abs() <= 1e-8 * h.abs().max(1.0), "m {m} k {}", k + 1);
            }
        }
    }
}

#[test]
fn two_particle_energy_drift_over_unit_time() {
    let s = regular(2, 2, 40);
    let traj = integrate(&s, &FlowSpec::new(2, 1.0, 1e-3)).unwrap();
    let h = power_traces(&s, 2)[1];
    let worst = traj
        .samples
        .iter()
        .map(|(_, st)| (power_traces(st, 2)[1] - h).abs() / h.abs().max(1.0))
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn forward_then_backward_returns() {
    let s = regular(3, 2, 50);
    for m in [2, 3] {
        let there = evolve(&s, m, 1.0, 1e-3).unwrap();
        let back = evolve(&there, m, -1.0, 1e-3).unwrap();
        assert!(state_difference(&back, &s).max_abs() < 1e-7, "m {m}");
    }
}

#[test]
fn flows_commute_up_to_spin_rescaling() {
    let s = regular(3, 2, 60);
    for (m, n) in [(2, 3), (3, 2)] {
        let one = evolve(&evolve(&s, n, 0.05, 1e-3).unwrap(), m, 0.1, 1e-3).unwrap();
        let two = evolve(&evolve(&s, m, 0.1, 1e-3).unwrap(), n, 0.05, 1e-3).unwrap();
        assert!(gauge_invariant_distance(&one, &two) < 1e-6, "({m}, {n})");
        // the constraint survives both orders, so the spins differ only by a_i -> l a_i
        for st in [&one, &two] {
            assert!(st.constraint_defects().amax() < 1e-10);
        }
    }
}

#[test]
fn hamiltonians_tend_to_rational_power_traces() {
    let base: SpinState<f64> = random_state(&RandomStateConfig::new(3, 2), 70).unwrap();
    for m in 1..=4 {
        let err = |g: f64| {
            let s = at_gamma(&base, g);
            let lr = lax_matrix_rational(&s);
            let mut pw = DMatrix::identity(3, 3);
            for _ in 0..m {
                pw = &pw * &lr;
            }
            (hamiltonian(&s, m) - pw.trace()).abs()
        };
        if m == 1 {
            assert!(err(1e-2) < 1e-12);
            continue;
        }
        let ratio = err(1e-2) / err(1e-3);
        assert!((50.0..200.0).contains(&ratio), "m {m}: ratio {ratio}");
    }
}

#[test]
fn rational_limit_of_lax_matrix_and_t2_equations() {
    let base: SpinState<f64> = random_state(&RandomStateConfig::new(3, 2), 80).unwrap();
    let l_err: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&g| {
            let s = at_gamma(&base, g);
            (lax_matrix(&s) - lax_matrix_rational(&s)).amax()
        })
        .collect();
    assert!(l_err[2] < 1e-7);
    for w in l_err.windows(2) {
        assert!((50.0..200.0).contains(&(w[0] / w[1])));
    }
    let s = at_gamma(&base, 1e-3);
    assert!(flow_rhs(&s, 2).sub(&rational_eom_t2_rhs(&s)).max_abs() < 1e-4);
}

#[test]
fn f32_states_evolve_too() {
    let s: SpinState<f32> = random_state(&RandomStateConfig::new(2, 2).with_momentum_scale(0.3), 3).unwrap();
    let later = evolve(&s, 2, 0.05f32, 1e-2f32).unwrap();
    let (h0, h1) = (hamiltonian(&s, 2), hamiltonian(&later, 2));
    assert!((h0 - h1).abs() <= 1e-4 * h0.abs().max(1.0));
}
