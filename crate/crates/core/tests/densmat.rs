use approx::assert_abs_diff_eq;
use dqs_core::bell_algebra::BellDiagonalState;
use dqs_core::densmat::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(q: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    let dim = 1usize << q;
    let mut mix = Matrix::zeros(dim, dim);
    let mut weights = 0.0;
    for _ in 0..3 {
        let mut amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        let pure = DensityMatrix::from_pure(&amps).unwrap();
        let w: f64 = rng.gen();
        mix += pure.matrix() * Complex64::new(w, 0.0);
        weights += w;
    }
    DensityMatrix::new(q, mix / Complex64::new(weights, 0.0)).unwrap()
}

fn random_unitary(rng: &mut ChaCha8Rng) -> Matrix {
    let (a, b, c): (f64, f64, f64) = (rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3));
    let e = |x: f64| Complex64::new(0.0, x).exp();
    let (cs, sn) = ((a / 2.0).cos(), (a / 2.0).sin());
    Matrix::from_row_slice(
        2,
        2,
        &[
            e(-(b + c) / 2.0) * cs,
            -e(-(b - c) / 2.0) * sn,
            e((b - c) / 2.0) * sn,
            e((b + c) / 2.0) * cs,
        ],
    )
}

fn check(rho: &DensityMatrix) {
    rho.validate().unwrap();
    assert_abs_diff_eq!(rho.trace(), 1.0, epsilon = 1e-9);
}

#[test]
fn random_circuits_keep_states_physical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let q = rng.gen_range(2..=4);
        let mut rho = random_state(q, &mut rng);
        for _ in 0..6 {
            let a = rng.gen_range(0..q);
            let b = (a + rng.gen_range(1..q)) % q;
            rho = match rng.gen_range(0..6) {
                0 => rho.apply_unitary(&random_unitary(&mut rng), &[a]).unwrap(),
                1 => rho.apply_unitary(&cnot(), &[a, b]).unwrap(),
                2 => rho.noisy_cnot(a, b, rng.gen()).unwrap(),
                3 => rho.depolarize(&[a]).unwrap(),
                4 => {
                    let basis = if rng.gen() { MeasurementBasis::X } else { MeasurementBasis::Computational };
                    let branch = rho.noisy_measure(a, basis, rng.gen(), &mut rng).unwrap();
                    branch.state.unwrap()
                }
                _ => {
                    let mut order: Vec<usize> = (0..q).collect();
                    order.swap(a, b);
                    rho.permute(&order).unwrap()
                }
            };
            check(&rho);
        }
        let reduced = rho.partial_trace(&[0]).unwrap();
        assert_abs_diff_eq!(reduced.trace(), rho.trace(), epsilon = 1e-12);
        check(&reduced);
    }
}

#[test]
fn measurement_branches_sum_to_the_dephased_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rho = random_state(3, &mut rng);
    let branches = rho.noisy_measure_branches(1, MeasurementBasis::Computational, 0.8).unwrap();
    assert_abs_diff_eq!(branches[0].probability + branches[1].probability, 1.0, epsilon = 1e-12);
    let mixed = DensityMatrix::mix(&branches).unwrap();
    // averaging over outcomes is the same as a perfect dephasing of the qubit
    let z = pauli_z();
    let flipped = rho.apply_unitary(&z, &[1]).unwrap();
    let dephased = (rho.matrix() + flipped.matrix()) / Complex64::new(2.0, 0.0);
    assert!((mixed.matrix() - dephased).camax() < 1e-12);
}

#[test]
fn iterated_merging_builds_ghz() {
    let pair = DensityMatrix::from_bell_diagonal(&BellDiagonalState::perfect());
    let mut probe = pair.clone();
    for _ in 0..2 {
        let k = probe.num_qubits();
        let mut order: Vec<usize> = (1..k).collect();
        order.push(0);
        let joint = probe.permute(&order).unwrap().tensor(&pair).unwrap();
        probe = joint.ghz_merge(k, &NoisySpec::perfect()).unwrap();
        assert_abs_diff_eq!(probe.fidelity_to_ghz(), 1.0, epsilon = 1e-12);
    }
    assert_eq!(probe.num_qubits(), 4);
}

#[test]
fn noisy_merge_reference() {
    let pair = DensityMatrix::from_bell_diagonal(&BellDiagonalState::perfect());
    let joint = pair.tensor(&pair).unwrap();
    let merged = joint.ghz_merge(2, &NoisySpec::new(0.99, 0.99).unwrap()).unwrap();
    assert_abs_diff_eq!(merged.fidelity_to_ghz(), 0.99 * 0.99 + 0.01 / 8.0, epsilon = 1e-12);
}

#[test]
fn teleported_cnot_builds_ghz() {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let plus = DensityMatrix::from_pure(&[s, s]).unwrap();
    let pair = DensityMatrix::from_bell_diagonal(&BellDiagonalState::perfect());
    let zero = DensityMatrix::basis_state(1, 0).unwrap();
    let joint = plus.tensor(&pair).unwrap().tensor(&zero).unwrap();
    let out = joint.cnot_teleport(0, 1, 2, 3, &NoisySpec::perfect()).unwrap();
    assert_eq!(out.num_qubits(), 2);
    assert_abs_diff_eq!(out.fidelity_to_ghz(), 1.0, epsilon = 1e-12);
}

#[test]
fn kernel_refuses_large_registers() {
    assert!(matches!(
        DensityMatrix::maximally_mixed(MAX_QUBITS + 1),
        Err(dqs_core::Error::UnsupportedScale { .. })
    ));
}

#[test]
fn resource_table() {
    for n in 2..=10usize {
        let t = resource_estimate(AssemblyMethod::Teleportation, n).unwrap();
        assert_eq!(
            (t.qubits, t.single_qubit_measurements, t.two_qubit_gates),
            (3 * n - 2, 2 * n - 2, 2 * n - 2)
        );
        assert_eq!(t.avg_single_qubit_gates, (n - 1) as f64);
        let m = resource_estimate(AssemblyMethod::Merging, n).unwrap();
        assert_eq!((m.qubits, m.single_qubit_measurements, m.two_qubit_gates), (2 * n - 2, n - 1, n - 1));
        assert_eq!(m.avg_single_qubit_gates, (n - 1) as f64 / 2.0);
    }
    assert!(resource_estimate(AssemblyMethod::Merging, 1).is_err());
}
