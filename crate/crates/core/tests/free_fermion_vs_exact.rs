use ndarray::Array2;
use num_complex::Complex64;
use spinbath::exact::{
    dense_spectrum, ground_state, loschmidt_echo_exact, reduced_density_matrix, ExactOptions,
    Solver,
};
use spinbath::free_fermion::{
    build_quadratic_form, diagonalize, ground_state_correlations,
    ground_state_correlations_with, loschmidt_echo_determinant,
    loschmidt_echo_determinant_with, nn_spin_correlators, transverse_magnetization,
    CorrelationMatrix, DeterminantOptions, ZeroModePolicy,
};
use spinbath::sparse::{Sector, Symmetry};
use spinbath::{BathSpec, CouplingSpec, QubitBranch};

/// `c†_j` on a Fock basis state, occupied = spin up = bit 0, string over sites `k < j`.
fn create(state: usize, j: usize) -> Option<(usize, f64)> {
    if (state >> j) & 1 == 0 {
        return None;
    }
    let occupied_before = (0..j).filter(|&k| (state >> k) & 1 == 0).count();
    let sign = if occupied_before % 2 == 0 { 1.0 } else { -1.0 };
    Some((state & !(1 << j), sign))
}

fn annihilate(state: usize, j: usize) -> Option<(usize, f64)> {
    if (state >> j) & 1 == 1 {
        return None;
    }
    let occupied_before = (0..j).filter(|&k| (state >> k) & 1 == 0).count();
    let sign = if occupied_before % 2 == 0 { 1.0 } else { -1.0 };
    Some((state | (1 << j), sign))
}

/// `⟨ψ| op_a op_b |ψ⟩` for a real full-space state.
fn fermion_pair(
    psi: &[f64],
    a: impl Fn(usize) -> Option<(usize, f64)>,
    b: impl Fn(usize) -> Option<(usize, f64)>,
) -> f64 {
    let mut acc = 0.0;
    for (s, &amp) in psi.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        if let Some((s1, f1)) = b(s) {
            if let Some((s2, f2)) = a(s1) {
                acc += psi[s2] * f1 * f2 * amp;
            }
        }
    }
    acc
}

fn check_correlations(corr: &CorrelationMatrix, psi: &[f64], n: usize, tol: f64) {
    for i in 0..n {
        for j in 0..n {
            let hop = fermion_pair(psi, |s| create(s, i), |s| annihilate(s, j));
            assert!(
                (corr.r[[i, j]] - hop).abs() < tol,
                "<c†_{i} c_{j}>: {} vs {hop}",
                corr.r[[i, j]]
            );
            let pair = fermion_pair(psi, |s| annihilate(s, i), |s| annihilate(s, j));
            assert!(
                (corr.r[[n + i, j]] - pair).abs() < tol,
                "<c_{i} c_{j}>: {} vs {pair}",
                corr.r[[n + i, j]]
            );
        }
    }
}

#[test]
fn correlations_match_jordan_wigner_oracle() {
    let bath = BathSpec::ising(8, 0.5).unwrap();
    let c = CouplingSpec::new(0.0);
    let form = build_quadratic_form(&bath, None, QubitBranch::Ground).unwrap();
    let corr = ground_state_correlations(&form).unwrap();
    let gs = ground_state(&bath, &c, QubitBranch::Ground, &ExactOptions::default()).unwrap();
    check_correlations(&corr, &gs.full_vector(), 8, 1e-9);
}

#[test]
fn correlations_match_oracle_for_anisotropic_xy() {
    let bath = BathSpec::xy(7, 0.4, 0.8).unwrap();
    let c = CouplingSpec::new(0.3).at_site(3);
    let form = build_quadratic_form(&bath, Some(&c), QubitBranch::Excited).unwrap();
    let corr = ground_state_correlations(&form).unwrap();
    let gs = ground_state(&bath, &c, QubitBranch::Excited, &ExactOptions::default()).unwrap();
    check_correlations(&corr, &gs.full_vector(), 7, 1e-9);
}

#[test]
fn ground_energy_matches_oracle() {
    for (gamma, lambda) in [(1.0, 0.5), (0.6, 1.3), (0.0, 0.4)] {
        let bath = BathSpec::xy(8, gamma, lambda).unwrap();
        let form = build_quadratic_form(&bath, None, QubitBranch::Ground).unwrap();
        let ff = diagonalize(&form).unwrap().ground_energy();
        let ed = ground_state(&bath, &CouplingSpec::new(0.0), QubitBranch::Ground, &ExactOptions::default())
            .unwrap()
            .energy;
        assert!((ff - ed).abs() < 1e-9, "γ={gamma} λ={lambda}: {ff} vs {ed}");
    }
}

fn pauli_expectation(rho: &Array2<Complex64>, a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for r in 0..4 {
        for c in 0..4 {
            let op = a[r >> 1][c >> 1] * b[r & 1][c & 1];
            acc += rho[[c, r]] * op;
        }
    }
    acc.re
}

fn paulis() -> [[[Complex64; 2]; 2]; 4] {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        [[l, o], [o, l]],
        [[o, l], [l, o]],
        [[o, -i], [i, o]],
        [[l, o], [o, -l]],
    ]
}

#[test]
fn nearest_neighbour_correlators_match_reduced_density_matrix() {
    let n = 10;
    let bath = BathSpec::ising(n, 0.5).unwrap();
    let form = build_quadratic_form(&bath, None, QubitBranch::Ground).unwrap();
    let corr = ground_state_correlations(&form).unwrap();
    let gs = ground_state(&bath, &CouplingSpec::new(0.0), QubitBranch::Ground, &ExactOptions::default())
        .unwrap();
    let psi = gs.full_vector_complex();
    let [id, x, y, z] = paulis();
    for j in 0..n - 1 {
        let rho = reduced_density_matrix(&psi, n, j, j + 1).unwrap();
        let nn = nn_spin_correlators(&corr, j).unwrap();
        assert!((nn.xx - pauli_expectation(&rho, x, x)).abs() < 1e-9);
        assert!((nn.yy - pauli_expectation(&rho, y, y)).abs() < 1e-9);
        assert!((nn.zz - pauli_expectation(&rho, z, z)).abs() < 1e-9);
        assert!((nn.z_left - pauli_expectation(&rho, z, id)).abs() < 1e-9);
        assert!((nn.z_right - pauli_expectation(&rho, id, z)).abs() < 1e-9);
        let mz = transverse_magnetization(&corr, j).unwrap();
        assert!((mz - nn.z_left).abs() < 1e-12);
    }
}

#[test]
fn reduced_density_matrix_matches_correlator_reconstruction() {
    let n = 10;
    let bath = BathSpec::ising(n, 1.0).unwrap();
    let form = build_quadratic_form(&bath, None, QubitBranch::Ground).unwrap();
    let corr = ground_state_correlations(&form).unwrap();
    let gs = ground_state(&bath, &CouplingSpec::new(0.0), QubitBranch::Ground, &ExactOptions::default())
        .unwrap();
    let psi = gs.full_vector_complex();
    let [id, x, y, z] = paulis();
    let kron = |a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]| {
        Array2::from_shape_fn((4, 4), |(r, c)| a[r >> 1][c >> 1] * b[r & 1][c & 1])
    };
    let j = 4;
    let nn = nn_spin_correlators(&corr, j).unwrap();
    let rebuilt = (kron(id, id)
        + kron(x, x).mapv(|v| v * nn.xx)
        + kron(y, y).mapv(|v| v * nn.yy)
        + kron(z, z).mapv(|v| v * nn.zz)
        + kron(z, id).mapv(|v| v * nn.z_left)
        + kron(id, z).mapv(|v| v * nn.z_right))
    .mapv(|v| v * 0.25);
    let rho = reduced_density_matrix(&psi, n, j, j + 1).unwrap();
    let err = (&rho - &rebuilt).iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(err < 1e-9, "max deviation {err}");
}

#[test]
fn determinant_echo_matches_oracle() {
    let times: Vec<f64> = (0..200).map(|k| 10.0 * k as f64 / 199.0).collect();
    for (gamma, lambda, eps, site) in [(1.0, 0.7, 0.25, 1), (0.5, 1.2, 0.4, 3), (0.0, 0.3, 0.2, 2)] {
        let bath = BathSpec::xy(8, gamma, lambda).unwrap();
        let c = CouplingSpec::new(eps).at_site(site);
        let det = loschmidt_echo_determinant(&bath, &c, &times).unwrap();
        let opts = ExactOptions {
            solver: Solver::Dense,
            ..Default::default()
        };
        let ed = loschmidt_echo_exact(&bath, &c, &times, &opts).unwrap();
        let err = det
            .values
            .iter()
            .zip(&ed.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "γ={gamma} λ={lambda}: {err}");
    }
}

#[test]
fn bulk_magnetization_at_criticality() {
    // ⟨σᶻ⟩ = (1/π)∫₀^π (λ − cos k)/√(1 + λ² − 2λ cos k) dk, by composite Simpson.
    let lambda: f64 = 1.0;
    let m = 20_000;
    let h = std::f64::consts::PI / m as f64;
    let f = |k: f64| {
        let d = (1.0 + lambda * lambda - 2.0 * lambda * k.cos()).sqrt();
        if d == 0.0 { 0.0 } else { (lambda - k.cos()) / d }
    };
    let integral: f64 = (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(i as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0;
    let limit = integral / std::f64::consts::PI;
    assert!((limit - 2.0 / std::f64::consts::PI).abs() < 1e-6);

    let bath = BathSpec::ising(1000, lambda).unwrap();
    let form = build_quadratic_form(&bath, None, QubitBranch::Ground).unwrap();
    let corr = ground_state_correlations(&form).unwrap();
    let mz = transverse_magnetization(&corr, 500).unwrap();
    assert!((mz - limit).abs() < 2e-3, "{mz} vs {limit}");
}

/// Ground state of the even-parity sector, embedded in the full space.
fn even_sector_ground(bath: &BathSpec, c: &CouplingSpec, branch: QubitBranch) -> (Vec<f64>, Sector) {
    let sector = Sector::new(bath.n_spins, Symmetry::Parity, 0).unwrap();
    let spec = dense_spectrum(bath, c, branch, &sector, 0.0).unwrap();
    let v = spec.vectors.column(0).to_vec();
    (sector.embed(&v), sector)
}

#[test]
fn even_parity_zero_mode_matches_even_sector_oracle() {
    let bath = BathSpec::ising(8, 0.0).unwrap();
    let c = CouplingSpec::new(0.3);
    let form = build_quadratic_form(&bath, None, QubitBranch::Ground).unwrap();
    let corr = ground_state_correlations_with(&form, ZeroModePolicy::Even).unwrap();
    assert_eq!(corr.zero_modes, 1);
    let (psi, sector) = even_sector_ground(&bath, &c, QubitBranch::Ground);
    check_correlations(&corr, &psi, 8, 1e-9);

    let times: Vec<f64> = (0..60).map(|k| 0.25 * k as f64).collect();
    let det = loschmidt_echo_determinant_with(
        &bath,
        &c,
        &times,
        &DeterminantOptions {
            zero_modes: ZeroModePolicy::Even,
        },
    )
    .unwrap();
    let excited = dense_spectrum(&bath, &c, QubitBranch::Excited, &sector, 0.0).unwrap();
    let psi_sector: Vec<f64> = sector.states.iter().map(|&s| psi[s as usize]).collect();
    let weights: Vec<f64> = (0..sector.dim())
        .map(|k| {
            let o: f64 = (0..sector.dim()).map(|i| excited.vectors[[i, k]] * psi_sector[i]).sum();
            o * o
        })
        .collect();
    for (t, v) in det.iter() {
        let amp: Complex64 = weights
            .iter()
            .zip(excited.energies.iter())
            .map(|(&p, &e)| Complex64::from_polar(p, -e * t))
            .sum();
        assert!((v - amp.norm_sqr()).abs() < 1e-8, "t={t}: {v} vs {}", amp.norm_sqr());
    }
}

#[test]
fn near_zero_modes_are_repaired_consistently() {
    // Edge-mode splitting ~ λ^N sits inside the re-pairing window but above
    // the zero-mode threshold, so the true unique ground state is filled.
    let bath = BathSpec::ising(12, 0.2).unwrap();
    let form = build_quadratic_form(&bath, None, QubitBranch::Ground).unwrap();
    let corr = ground_state_correlations(&form).unwrap();
    assert_eq!(corr.zero_modes, 0);
    let gs = ground_state(&bath, &CouplingSpec::new(0.0), QubitBranch::Ground, &ExactOptions::default())
        .unwrap();
    check_correlations(&corr, &gs.full_vector(), 12, 1e-7);
}
