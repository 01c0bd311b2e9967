use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use dqs_core::densmat::DensityMatrix;
use dqs_core::metrology::*;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, Distribution};

fn qfi(state: &GhzDiagonalState, d: usize) -> f64 {
    qfi_average(c_coefficient(state), &SensingProblem::new(d, 1).unwrap()).unwrap()
}

#[test]
fn fidelity_lower_bound_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for d in [2usize, 3] {
        let dim = 1usize << d;
        let dirichlet = Dirichlet::new(&vec![1.0; dim - 1]).unwrap();
        for trial in 0..1000 {
            let f = 0.5 + 0.5 * (trial as f64 + 0.5) / 1000.0;
            let rest = dirichlet.sample(&mut rng);
            let mut eigenvalues = Vec::with_capacity(dim);
            eigenvalues.push(f);
            eigenvalues.extend(rest.iter().map(|x| x * (1.0 - f)));
            let state = GhzDiagonalState::from_dense(d as u32, &eigenvalues).unwrap();
            let bound = qfi_lower_bound(f, d).unwrap();
            assert!(qfi(&state, d) >= bound - 1e-9, "d={d} F={f}");
        }
        for f in [0.5, 0.7, 0.93, 1.0] {
            let tight = GhzDiagonalState::rank2_dephased(d as u32, f).unwrap();
            assert_abs_diff_eq!(qfi(&tight, d), qfi_lower_bound(f, d).unwrap(), epsilon = 1e-12);
        }
    }
}

#[test]
fn c_is_one_exactly_for_balanced_partners() {
    let balanced = GhzDiagonalState::new(3, [(0, 0.2), (1, 0.2), (4, 0.05), (5, 0.05), (6, 0.25), (7, 0.25)]).unwrap();
    assert_abs_diff_eq!(c_coefficient(&balanced), 1.0, epsilon = 1e-15);
    let tilted = GhzDiagonalState::new(3, [(0, 0.2), (1, 0.2), (4, 0.05), (5, 0.05), (6, 0.26), (7, 0.24)]).unwrap();
    let c = c_coefficient(&tilted);
    assert!(c < 1.0 && c > 0.99);
    for f in [0.0, 0.3, 0.9, 1.0] {
        let c = depolarized_c(f, 4);
        assert!((0.0..=1.0).contains(&c));
    }
    assert_eq!(c_coefficient(&GhzDiagonalState::pure(3).unwrap()), 0.0);
}

#[test]
fn depolarized_threshold_beats_separable_bound() {
    for d in 2..=10usize {
        for n in 1..=4usize {
            let th = threshold_dp(d, n).unwrap();
            let sep = 3.0 / (2f64.powi((n * d) as i32) + 2.0);
            assert!(th > sep, "d={d} n={n}: {th} <= {sep}");
        }
    }
    assert!(threshold_dp(3, 1).unwrap() > 0.5);
    for d in 4..=10 {
        assert!(threshold_dp(d, 1).unwrap() < 0.5, "d={d}");
    }
}

#[test]
fn threshold_gives_unit_advantage() {
    for d in 2..=6usize {
        for n in 1..=3usize {
            let th = threshold_dp(d, n).unwrap();
            let model = DepolarizedGhzModel::noiseless(th, d, n).unwrap();
            assert_abs_diff_eq!(model.eta(), 1.0, epsilon = 1e-9);
        }
    }
}

#[test]
fn depolarized_c_decreases_with_fidelity_and_quality() {
    let h = 1e-6;
    for d in [2usize, 3, 4] {
        let floor = 2f64.powi(-(d as i32));
        for n in [1usize, 2, 3, 5] {
            let c = |f: f64, k: f64| DepolarizedGhzModel::new(f, d, n, k).unwrap().c_coefficient();
            for i in 1..10 {
                let f = floor + (0.999 - floor) * i as f64 / 10.0;
                for k in [0.9f64, 0.99, 0.999] {
                    if f * k.powi(n as i32 - 1) <= floor {
                        continue;
                    }
                    let df = (c(f + h, k) - c(f - h, k)) / (2.0 * h);
                    assert!(df < 0.0, "dC/dF >= 0 at d={d} n={n} F={f} k={k}");
                    if n >= 2 {
                        let dk = (c(f, k + h) - c(f, k - h)) / (2.0 * h);
                        assert!(dk < 0.0, "dC/dk >= 0 at d={d} n={n} F={f} k={k}");
                    }
                }
            }
        }
    }
}

#[test]
fn heisenberg_scaling_breaks_down() {
    let qfi = |n: usize| DepolarizedGhzModel::new(0.9, 3, n, 0.99).unwrap().qfi_average();
    // n^2 growth wins until k^(n-1) has decayed by many orders
    assert!(qfi(200) > qfi(50));
    assert!(qfi(3000) < qfi(1000));
    assert!(qfi(3000) < 1e-3);
}

#[test]
fn n_max_matches_exact_crossing() {
    let est = n_max_estimate(3, 0.9, 0.99).unwrap();
    assert_abs_diff_eq!(est.n_max, -(2.7f64).ln() / 0.99f64.ln(), epsilon = 1e-9);
    let exact = advantage_crossing(0.9, 3, 0.99, 10_000).unwrap().unwrap();
    assert!((exact as f64 - est.n_max).abs() <= 5.0, "{exact} vs {}", est.n_max);
    assert!(n_max_estimate(3, 0.9, 0.9999).unwrap().sensitivity_ratio() > 100.0);
    assert!(n_max_estimate(3, 0.3, 0.99).is_err());
}

#[test]
fn global_advantage_eventually_drops_below_local() {
    let ratio = |n: usize| {
        let model = DepolarizedGhzModel::new(0.9, 3, n, 0.9999).unwrap();
        global_local_ratio(&model).unwrap()
    };
    assert_abs_diff_eq!(eta_local_imperfect(3, 1, 0.9).unwrap(), 1.0, epsilon = 1e-15);
    assert!(ratio(1) > 1.0);
    assert!((1..20_000).step_by(50).any(|n| ratio(n) < 1.0));
}

#[test]
fn numeric_qfim_matches_closed_form() {
    for d in [2usize, 3] {
        for n in [1usize, 2] {
            for f in [0.7, 0.9] {
                let problem = SensingProblem::new(d, n).unwrap();
                let m = (d * n) as u32;
                let state = GhzDiagonalState::depolarized(m, f).unwrap();
                let rho = DensityMatrix::from_ghz_diagonal(&state).unwrap();
                let numeric = qfim_numeric(&rho, &problem).unwrap();
                let want = DMatrix::from_element(d, d, depolarized_one_minus_c(f, m) * (n * n) as f64);
                assert!((numeric - &want).amax() < 1e-8, "d={d} n={n} F={f}");
                let closed = qfim_local(depolarized_c(f, m), &problem).unwrap();
                assert!((closed - want).amax() < 1e-12);
            }
        }
    }
}

fn variance(f: f64, d: usize, n: usize, alpha: f64) -> f64 {
    azimuthal_variance(f, d, n, alpha, 0.0).unwrap().value().unwrap_or(f64::INFINITY)
}

fn golden_section(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-12 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if g(a) < g(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    (lo + hi) / 2.0
}

#[test]
fn azimuthal_optimum_by_search() {
    let f = 0.9;
    for n in [1usize, 2] {
        for d in [2usize, 3] {
            let opt = optimal_azimuthal(n, d).unwrap();
            let period = PI / (n * d) as f64;
            let found = golden_section(1e-9, period - 1e-9, |a| variance(f, d, n, a));
            assert!((found - opt.alpha_opt).abs() < 1e-6, "n={n} d={d}: {found}");
            assert!(opt.is_optimal(found, 1e-6));
            let best = variance(f, d, n, opt.alpha_opt);
            let contrast = azimuthal_contrast(f, (n * d) as u32);
            assert_abs_diff_eq!(best, 1.0 / (d as f64 * contrast * contrast * (n * n) as f64), epsilon = 1e-12);
            assert_abs_diff_eq!(best, opt.min_variance(f), epsilon = 1e-12);
            let mut alpha = 1e-3;
            while alpha < period {
                assert!(variance(f, d, n, alpha) >= best - 1e-12, "alpha={alpha}");
                alpha += 1e-3;
            }
        }
    }
}

// Error propagation on the encoded density matrix: Var = (1 - <M>^2) / (d<M>/dtheta_1)^2.
#[test]
fn azimuthal_variance_matches_error_propagation() {
    let d = 3;
    let problem = SensingProblem::new(d, 1).unwrap();
    for f in [0.7, 0.9] {
        let rho = DensityMatrix::from_ghz_diagonal(&GhzDiagonalState::depolarized(3, f).unwrap()).unwrap();
        let signal = |theta1: f64, alpha: f64| {
            let x = vec![theta1 / (d as f64).sqrt(); d];
            rho.encode_phases(&x, &problem).unwrap().azimuthal_observable_expectation(alpha)
        };
        for (alpha, theta1) in [(PI / 6.0, 0.0), (0.37, 0.0), (PI / 6.0, 0.05), (0.2, -0.11)] {
            let h = 1e-5;
            let slope = (signal(theta1 + h, alpha) - signal(theta1 - h, alpha)) / (2.0 * h);
            let mean = signal(theta1, alpha);
            let numeric = (1.0 - mean * mean) / (slope * slope);
            // the readout phase runs as n(sum x) - n d alpha
            let closed = azimuthal_variance(f, d, 1, -alpha, theta1).unwrap().value().unwrap();
            assert!((numeric - closed).abs() / closed < 1e-6, "F={f} alpha={alpha}: {numeric} vs {closed}");
        }
    }
}

#[test]
fn zero_angle_is_useless_at_zero_signal() {
    assert!(azimuthal_variance(0.9, 3, 1, 0.0, 0.0).unwrap().is_divergent());
    assert!(rank2_azimuthal_variance(0.9, 3, 0.0).unwrap().is_divergent());
}

#[test]
fn bell_pair_thresholds() {
    let expected = [0.730, 0.714, 0.711, 0.716, 0.726, 0.738];
    for (d, want) in (2..=7).zip(expected) {
        let got = bell_pair_threshold(d, Measurement::Optimal).unwrap();
        assert!((got - want).abs() <= 1e-3, "d={d}: {got}");
        assert!(bell_pair_threshold(d, Measurement::Azimuthal).unwrap() > got);
    }
    let eps_opt = 1.0 - bell_pair_threshold(30, Measurement::Optimal).unwrap();
    let eps_az = 1.0 - bell_pair_threshold(30, Measurement::Azimuthal).unwrap();
    assert!((eps_opt / eps_az - 2.0).abs() / 2.0 < 0.1, "{}", eps_opt / eps_az);
    assert!((20.0 * threshold_dp(20, 1).unwrap() - 1.025).abs() <= 0.025);
}

#[test]
fn orthonormal_extension_is_orthonormal() {
    for d in 2..=8 {
        let m = orthonormal_extension(d).unwrap();
        let gram = &m * m.transpose();
        assert!((gram - DMatrix::identity(d, d)).amax() < 1e-12);
        for j in 0..d {
            assert_abs_diff_eq!(m[(0, j)], 1.0 / (d as f64).sqrt(), epsilon = 1e-15);
        }
    }
}
