use proptest::prelude::*;

use spinbath::analysis::{fit_gaussian_rate, plateau_value, predicted_alpha_with};
use spinbath::echo::{EchoMeta, EchoSeries, Method};
use spinbath::exact::{build_dense_hamiltonian, ExactOptions};
use spinbath::free_fermion::ZeroModePolicy;
use spinbath::gates::{compile_step, erased_pair_layer, sequence_unitary, verify_repeated, verify_sequence, GateSequence};
use spinbath::models::spin_hamiltonian_terms;
use spinbath::{BathSpec, Boundary, CouplingSpec, Pauli, QubitBranch};

fn bath_strategy() -> impl Strategy<Value = BathSpec> {
    prop_oneof![
        (2usize..7, 0.0f64..=1.0, -2.0f64..2.0).prop_map(|(n, g, l)| BathSpec::xy(n, g, l).unwrap()),
        (2usize..7, -3.0f64..3.0).prop_map(|(n, d)| BathSpec::xxz(n, d).unwrap()),
    ]
}

fn series(times: Vec<f64>, values: Vec<f64>) -> EchoSeries {
    let meta = EchoMeta::new(&BathSpec::ising(8, 1.0).unwrap(), &CouplingSpec::new(0.1), Method::Exact);
    EchoSeries::new(times, values, meta).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hamiltonians_are_symmetric(bath in bath_strategy(), periodic in any::<bool>(), eps in 0.0f64..1.0, site in 1usize..3) {
        let bath = if periodic && bath.n_spins > 2 { bath.with_boundary(Boundary::Periodic) } else { bath };
        let c = CouplingSpec::new(eps).at_site(site);
        for branch in [QubitBranch::Ground, QubitBranch::Excited] {
            let h = build_dense_hamiltonian(&bath, &c, branch).unwrap();
            let asym = (&h - &h.t()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(asym < 1e-14);
        }
        let expected = if bath.boundary == Boundary::Open { bath.n_spins - 1 } else { bath.n_spins };
        prop_assert_eq!(bath.bonds().len(), expected);
        let terms = spin_hamiltonian_terms(&bath, &c, QubitBranch::Ground).unwrap();
        prop_assert_eq!(terms.len(), 3 * expected + bath.n_spins);
    }

    #[test]
    fn gate_text_round_trips(bath in bath_strategy(), eps in 0.0f64..1.0, omega in -2.0f64..2.0, tau in 0.0f64..0.5) {
        let seq = compile_step(&bath, &CouplingSpec::new(eps).with_omega_e(omega), tau).unwrap();
        prop_assert!(seq.respects_addressing());
        let back = GateSequence::from_text(&seq.to_text()).unwrap();
        prop_assert_eq!(back, seq);
    }

    #[test]
    fn erasures_hold_for_any_angle(theta in -6.3f64..6.3) {
        for op in [Pauli::X, Pauli::Y, Pauli::Z] {
            let u = sequence_unitary(&erased_pair_layer(op, theta, 1), 2);
            let eye = ndarray::Array2::<num_complex::Complex64>::eye(4);
            let err = (&u - &eye).iter().fold(0.0f64, |m, x| m.max(x.norm()));
            prop_assert!(err < 1e-12);
        }
    }

    #[test]
    fn gate_count_ignores_tau(bath in bath_strategy(), t1 in 0.01f64..1.0, t2 in 0.01f64..1.0) {
        let c = CouplingSpec::new(0.25);
        prop_assert_eq!(compile_step(&bath, &c, t1).unwrap().count(), compile_step(&bath, &c, t2).unwrap().count());
    }

    #[test]
    fn gaussian_rate_scales(alpha in 0.001f64..0.5, quartic in 0.0f64..0.05, s in 0.2f64..5.0) {
        let times: Vec<f64> = (0..60).map(|k| k as f64 * 0.05).collect();
        let values: Vec<f64> = times.iter().map(|t| (-alpha * t * t - quartic * t.powi(4)).exp()).collect();
        let base = fit_gaussian_rate(&series(times.clone(), values.clone())).unwrap();
        let stretched = fit_gaussian_rate(&series(times.iter().map(|t| s * t).collect(), values)).unwrap();
        prop_assert!((stretched.alpha - base.alpha / (s * s)).abs() <= 1e-12 * base.alpha);
        prop_assert!(base.alpha >= 0.0);
    }

    #[test]
    fn plateau_ignores_appended_tail(n in 8usize..64, tail in proptest::collection::vec(0.0f64..1.0, 1..50)) {
        let bath = BathSpec::ising(n, 1.0).unwrap();
        let t2 = n as f64 / 8.0;
        let steps = (t2 / 0.05).ceil() as usize;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * 0.05).collect();
        let mut values: Vec<f64> = times.iter().map(|t| 0.8 + 0.1 * (-t).exp() * (3.0 * t).cos()).collect();
        values[0] = 1.0;
        let short = series(times.clone(), values.clone());
        let mut long_t = times.clone();
        let mut long_v = values.clone();
        for (k, v) in tail.iter().enumerate() {
            long_t.push(times.last().unwrap() + 0.05 * (k + 1) as f64);
            long_v.push(*v);
        }
        let a = plateau_value(&short, &bath).unwrap();
        let b = plateau_value(&series(long_t, long_v), &bath).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn predicted_alpha_bounded(n in 4usize..40, lambda in 0.05f64..3.0, eps in 0.0f64..0.5, site in 1usize..4) {
        let bath = BathSpec::ising(n, lambda).unwrap();
        let a = predicted_alpha_with(&bath, &CouplingSpec::new(eps).at_site(site), ZeroModePolicy::Even, &ExactOptions::default()).unwrap();
        prop_assert!(a >= 0.0 && a <= eps * eps + 1e-15);
    }
}

#[test]
fn repeated_steps_obey_telescoping_bound() {
    let bath = BathSpec::xy(3, 0.4, 0.6).unwrap();
    let seq = compile_step(&bath, &CouplingSpec::new(0.25), 0.05).unwrap();
    let one = verify_sequence(&seq).unwrap();
    for k in [2, 5, 10] {
        assert!(verify_repeated(&seq, k).unwrap() <= k as f64 * one + 1e-12);
    }
}
