use nalgebra::DMatrix;
use proptest::prelude::*;

use qsl_core::bound::param_count;
use qsl_core::linalg::{eig_tridiagonal, random_hermitian, random_unitary, unitarity_defect};
use qsl_core::sweep::format_sig;
use qsl_core::{
    build_swap_goal, commutator, eig_hermitian, expm_hermitian, feasible_unitary, gate_error,
    hs_norm, objective, propagate, start_rng, ControlSystem, FeasibleUnitaryParams, Hermitian,
    PulseSchedule, SquareComplexMatrix,
};

fn close(a: &SquareComplexMatrix, b: &SquareComplexMatrix, tol: f64) -> bool {
    hs_norm(&(a - b)) <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponentials_are_unitary_and_compose(n in 2usize..7, seed: u64, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let h = random_hermitian(n, &mut start_rng(seed, 0));
        let a = expm_hermitian(&h, s).unwrap();
        let b = expm_hermitian(&h, t).unwrap();
        let ab = expm_hermitian(&h, s + t).unwrap();
        prop_assert!(unitarity_defect(a.matrix()) <= 1e-12);
        prop_assert!(close(&(a.matrix() * b.matrix()), ab.matrix(), 1e-10));
    }

    #[test]
    fn eigendecomposition_reconstructs(n in 1usize..8, seed: u64) {
        let h = random_hermitian(n, &mut start_rng(seed, 1));
        let e = eig_hermitian(&h).unwrap();
        let d = DMatrix::from_diagonal(&e.values.map(|x| x.into()));
        let back = &e.vectors * d * e.vectors.adjoint();
        prop_assert!(close(&back, h.matrix(), 1e-10 * (1.0 + hs_norm(h.matrix()))));
        prop_assert!(e.values.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn tridiagonal_solver_agrees_with_dense(
        diag in prop::collection::vec(-5.0f64..5.0, 1..10),
        off_seed in prop::collection::vec(-2.0f64..2.0, 10),
    ) {
        let n = diag.len();
        let off = &off_seed[..n - 1];
        let (values, vectors) = eig_tridiagonal(&diag, off).unwrap();
        let dense = DMatrix::from_fn(n, n, |i, j| {
            if i == j { diag[i] } else if i + 1 == j { off[i] } else if j + 1 == i { off[j] } else { 0.0 }
        });
        let reference = eig_hermitian(&Hermitian::from_real_symmetric(&dense).unwrap()).unwrap();
        for (a, b) in values.iter().zip(reference.values.iter()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let v = DMatrix::from_column_slice(n, n, &vectors);
        let residual = &dense * &v - &v * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values));
        prop_assert!(residual.norm() <= 1e-9);
        prop_assert!((v.transpose() * &v - DMatrix::identity(n, n)).norm() <= 1e-10);
    }

    #[test]
    fn commutator_is_antisymmetric_and_bounded(n in 2usize..6, seed: u64) {
        let mut rng = start_rng(seed, 2);
        let a = random_hermitian(n, &mut rng);
        let b = random_hermitian(n, &mut rng);
        let ab = commutator(a.matrix(), b.matrix()).unwrap();
        let ba = commutator(b.matrix(), a.matrix()).unwrap();
        prop_assert!(close(&ab, &(-ba), 1e-12));
        prop_assert!(hs_norm(&ab) <= 2.0 * hs_norm(a.matrix()) * hs_norm(b.matrix()) + 1e-12);
    }

    #[test]
    fn feasible_unitaries_commute_with_controls(n in 2usize..8, m_frac in 0.0f64..1.0, seed: u64) {
        let m = 1 + ((n - 1) as f64 * m_frac) as usize % (n - 1);
        let params = FeasibleUnitaryParams::random(n, m, &mut start_rng(seed, 3));
        prop_assert_eq!(params.to_flat().len(), param_count(n, m));
        let v = feasible_unitary(&params, n, m).unwrap();
        prop_assert!(unitarity_defect(v.matrix()) <= 1e-12);
        let sys = ControlSystem::n_level(n, m).unwrap();
        for p in sys.controls() {
            prop_assert!(hs_norm(&commutator(v.matrix(), p.matrix()).unwrap()) <= 1e-12);
        }
    }

    #[test]
    fn objective_ignores_phase_and_scales_with_drift(
        n in 3usize..8, seed: u64, phi in -6.0f64..6.0, c in 0.1f64..20.0,
    ) {
        let params = FeasibleUnitaryParams::random(n, 1, &mut start_rng(seed, 4));
        let v = feasible_unitary(&params, n, 1).unwrap();
        let sys = ControlSystem::n_level(n, 1).unwrap();
        let g = build_swap_goal(n).unwrap();
        let h0 = sys.drift().matrix();
        let base = objective(v.matrix(), g.matrix(), h0, 1e-8).unwrap().value().unwrap();
        let shifted = objective(v.with_phase(phi).matrix(), g.matrix(), h0, 1e-8).unwrap().value().unwrap();
        let scaled = objective(v.matrix(), g.matrix(), &h0.scale(c), 1e-8).unwrap().value().unwrap();
        prop_assert!((base - shifted).abs() <= 1e-10 * base);
        prop_assert!((scaled - base / c).abs() <= 1e-10 * base / c);
    }

    #[test]
    fn gate_error_is_bounded_and_left_invariant(n in 2usize..7, seed: u64) {
        let mut rng = start_rng(seed, 5);
        let g = random_unitary(n, &mut rng);
        let u = random_unitary(n, &mut rng);
        let w = random_unitary(n, &mut rng);
        let e = gate_error(g.matrix(), u.matrix()).unwrap();
        prop_assert!((0.0..=2.0).contains(&e));
        prop_assert!(gate_error(g.matrix(), g.matrix()).unwrap() <= 1e-12);
        let moved = gate_error(w.mul(&g).matrix(), w.mul(&u).matrix()).unwrap();
        prop_assert!((e - moved).abs() <= 1e-10);
    }

    #[test]
    fn propagators_are_unitary_and_refinement_invariant(
        n in 2usize..6, seed: u64, t in 0.1f64..10.0, slots in 1usize..30, factor in 2usize..4,
    ) {
        use rand::Rng;
        let m = 1 + (seed as usize) % (n - 1);
        let sys = ControlSystem::n_level(n, m).unwrap();
        let mut rng = start_rng(seed, 6);
        let amps = (0..m).map(|_| (0..slots).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let sched = PulseSchedule::new(t, slots, amps).unwrap();
        let u = propagate(&sys, &sched).unwrap();
        prop_assert!(unitarity_defect(u.matrix()) <= 1e-9);
        let fine = propagate(&sys, &sched.refined(factor).unwrap()).unwrap();
        prop_assert!(close(u.matrix(), fine.matrix(), 1e-9));
        let back = PulseSchedule::from_json(&sched.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, sched);
    }

    #[test]
    fn twelve_digit_output_round_trips(x in prop::num::f64::NORMAL) {
        let s = format_sig(x);
        let y: f64 = s.parse().unwrap();
        prop_assert!((x - y).abs() <= 5e-12 * x.abs(), "{} -> {}", x, s);
        prop_assert!(!s.contains(','));
    }
}
