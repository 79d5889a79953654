mod common;

use std::f64::consts::PI;

use beamlab_core::discretization::{SemiDiscreteSystem, StateVector};
use beamlab_core::dynamics::{fit_decay, random_initial, simulate, step_implicit_midpoint, MidpointStepper};
use beamlab_core::model::{closed_form_mode, Damper, DampingPattern, ModeFamily};
use common::*;
use proptest::prelude::*;

fn mode_state(sys: &SemiDiscreteSystem, family: ModeFamily, n: u32) -> (StateVector, f64) {
    let mode = closed_form_mode(family, n, sys.config()).unwrap();
    let q = sys.interpolate_profiles(&mode.profiles);
    (
        StateVector {
            p: vec![0.0; q.len()],
            q,
        },
        mode.lambda,
    )
}

#[test]
fn undamped_energy_is_conserved() {
    let sys = SemiDiscreteSystem::new(&default_config(), &DampingPattern::none(), 8).unwrap();
    let u0 = random_initial(&sys, 4, 3).unwrap();
    let trace = simulate(&sys, &u0, 1e-2, 20.0).unwrap();
    assert_eq!(trace.len(), 2001);
    assert!(trace.relative_drift() < 1e-11, "drift {}", trace.relative_drift());
}

#[test]
fn damped_energy_is_monotone_and_balanced() {
    let mut r = rng(17);
    for _ in 0..4 {
        let cfg = random_config(&mut r);
        let d = random_two_damper(&mut r);
        let sys = SemiDiscreteSystem::new(&cfg, &d, 6).unwrap();
        let u0 = random_state(&mut r, sys.n_q());
        let trace = simulate(&sys, &u0, 5e-3, 5.0).unwrap();
        assert!(trace.max_increase() <= 1e-13 * trace.initial_energy());
        assert!(trace.final_energy() < trace.initial_energy());
        assert!(trace.balance_residual() < 1e-10, "balance {}", trace.balance_residual());
    }
}

#[test]
fn stepper_and_one_shot_step_agree() {
    let d = DampingPattern::with(&[Damper::A, Damper::B], 1.0);
    let sys = SemiDiscreteSystem::new(&default_config(), &d, 5).unwrap();
    let u0 = random_initial(&sys, 1, 2).unwrap();
    let a = MidpointStepper::new(&sys, 0.01).unwrap().step(&u0).unwrap().state;
    let b = step_implicit_midpoint(&sys, &u0, 0.01).unwrap();
    for (x, y) in a.to_vec().iter().zip(b.to_vec()) {
        assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
    }
}

#[test]
fn random_initial_is_deterministic() {
    let sys = SemiDiscreteSystem::new(&default_config(), &DampingPattern::none(), 6).unwrap();
    let a = random_initial(&sys, 9, 2).unwrap();
    let b = random_initial(&sys, 9, 2).unwrap();
    let c = random_initial(&sys, 10, 2).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(random_initial(&sys, 9, 0).is_err());
}

#[test]
fn axial_mode_persists_under_blind_dampers() {
    let d = DampingPattern::with(&ModeFamily::AxialInPhase.blind_dampers(), 1.0);
    let sys = SemiDiscreteSystem::new(&default_config(), &d, 64).unwrap();
    let (u0, lambda) = mode_state(&sys, ModeFamily::AxialInPhase, 1);
    let t_final = 100.0 * 2.0 * PI / lambda;
    let trace = simulate(&sys, &u0, 0.05, t_final).unwrap();
    let loss = 1.0 - trace.final_energy() / trace.initial_energy();
    assert!(loss < 0.01, "energy loss {loss}");
}

#[test]
fn axial_mode_decays_when_a_damper_sees_it() {
    let d = DampingPattern::with(&[Damper::A, Damper::C], 1.0);
    let sys = SemiDiscreteSystem::new(&default_config(), &d, 16).unwrap();
    let (u0, lambda) = mode_state(&sys, ModeFamily::AxialInPhase, 1);
    let trace = simulate(&sys, &u0, 0.05, 10.0 * 2.0 * PI / lambda).unwrap();
    assert!(trace.final_energy() < 0.5 * trace.initial_energy());
}

#[test]
fn decay_fit_recovers_power_law() {
    let times: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
    let energies: Vec<f64> = times.iter().map(|&t| 3.0 * t.max(0.01).powf(-1.5)).collect();
    let trace = beamlab_core::dynamics::EnergyTrace {
        dissipation_integral: vec![0.0; times.len()],
        times,
        energies,
    };
    let fit = fit_decay(&trace, (5.0, 10.0)).unwrap();
    assert!((fit.alpha - 1.5).abs() < 1e-10);
    assert!(fit.r2 > 0.99);
    assert!(fit_decay(&trace, (0.0, 1.0)).is_err());
    assert!(fit_decay(&trace, (9.99, 10.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn one_step_never_gains_energy(seed in any::<u64>(), dt in 1e-3f64..0.5) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r);
        let d = random_two_damper(&mut r);
        let sys = SemiDiscreteSystem::new(&cfg, &d, 3).unwrap();
        let u = random_state(&mut r, sys.n_q());
        let out = MidpointStepper::new(&sys, dt).unwrap().step(&u).unwrap();
        let e0 = sys.energy(&u).unwrap();
        let e1 = sys.energy(&out.state).unwrap();
        prop_assert!(e1 <= e0 * (1.0 + 1e-13));
        prop_assert!((e0 - e1 - out.dissipated).abs() <= 1e-11 * e0);
    }
}
