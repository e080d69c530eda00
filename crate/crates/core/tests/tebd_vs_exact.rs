use spinbath::exact::{ground_state, loschmidt_echo_exact, ExactOptions};
use spinbath::free_fermion::loschmidt_echo_determinant;
use spinbath::tebd::{ground_state_imaginary_time, loschmidt_echo_from_ground, TebdParams};
use spinbath::{BathSpec, CouplingSpec, QubitBranch};

fn long_projection(min_steps: usize) -> TebdParams {
    let mut p = TebdParams::default();
    p.imaginary_time_schedule[2].min_steps = min_steps;
    p.imaginary_time_schedule[2].max_steps = min_steps;
    p
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn ising_echo_matches_determinant() {
    let bath = BathSpec::ising(10, 0.7).unwrap();
    let c = CouplingSpec::new(0.25).at_site(4);
    let times: Vec<f64> = (0..=30).map(|k| k as f64 * 0.1).collect();
    let p = long_projection(10_000);
    let gs = ground_state_imaginary_time(&bath, &p).unwrap();
    let tebd = loschmidt_echo_from_ground(&bath, &c, &times, &p, &gs).unwrap();
    let det = loschmidt_echo_determinant(&bath, &c, &times).unwrap();
    let err = max_diff(&tebd.values, &det.values);
    assert!(err < 1e-5, "max deviation {err:e}");
}

#[test]
fn antiferromagnetic_xxz_echo_matches_oracle() {
    let bath = BathSpec::xxz(10, -0.5).unwrap();
    let c = CouplingSpec::new(0.2);
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
    let p = long_projection(10_000);
    let gs = ground_state_imaginary_time(&bath, &p).unwrap();
    let ed = ground_state(&bath, &CouplingSpec::new(0.0), QubitBranch::Ground, &ExactOptions::default())
        .unwrap();
    assert!((gs.energy - ed.energy).abs() < 1e-9, "{} vs {}", gs.energy, ed.energy);
    let tebd = loschmidt_echo_from_ground(&bath, &c, &times, &p, &gs).unwrap();
    let exact = loschmidt_echo_exact(&bath, &c, &times, &ExactOptions::default()).unwrap();
    let err = max_diff(&tebd.values, &exact.values);
    assert!(err < 1e-5, "max deviation {err:e}");
}

#[test]
fn odd_chain_uses_pinned_sector() {
    let bath = BathSpec::xxz(7, 0.3).unwrap();
    let p = TebdParams::default();
    let gs = ground_state_imaginary_time(&bath, &p).unwrap();
    assert!(gs.pinning > 0.0);
    let ed = ground_state(&bath, &CouplingSpec::new(0.0), QubitBranch::Ground, &ExactOptions::default())
        .unwrap();
    assert!((gs.energy - ed.energy).abs() < 1e-6, "{} vs {}", gs.energy, ed.energy);
}

#[test]
fn real_time_keeps_state_normalized() {
    let bath = BathSpec::xxz(10, 0.5).unwrap();
    let c = CouplingSpec::new(0.5).at_site(10);
    let p = TebdParams::default();
    let gs = ground_state_imaginary_time(&bath, &p).unwrap();
    let times: Vec<f64> = (0..=4).map(|k| k as f64).collect();
    let e = loschmidt_echo_from_ground(&bath, &c, &times, &p, &gs).unwrap();
    assert_eq!(e.len(), times.len());
    assert!(e.meta.flags.is_empty());
    let w = e.meta.discarded_weight.unwrap();
    assert!(w.windows(2).all(|p| p[1] >= p[0]));
    let mut state = gs.state.to_complex();
    let d = state.to_dense().unwrap();
    let n2: f64 = d.iter().map(|z| z.norm_sqr()).sum();
    assert!((n2 - 1.0).abs() < 1e-12);
    state.canonicalize(0.0).unwrap();
    for s in &state.schmidt {
        let total: f64 = s.iter().map(|x| x * x).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
