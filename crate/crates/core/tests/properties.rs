mod common;

use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rdl::consistency::{
    check_hull_consistency, check_pairwise_consistency, check_subspace_consistency,
    equal_marginal_pair, evolved_marginal_norm,
};
use rdl::family::{
    assemble_two_qubit, constrained_two_qubit_family, extract_two_qubit, pauli_eigenstates,
    product_family, random_density, sample_two_qubit_params, StateFamily,
};
use rdl::maps::{
    build_assignment, build_dynamical_map, decompose_signed_kraus, verdicts, MapOptions,
    Superoperator,
};
use rdl::operator::{
    adjoint_action, from_real_coordinates, hermitian_basis, partial_trace_env, partial_trace_sys,
    real_coordinates, swap_unitary, trace, trace_distance,
};
use rdl::subspace::build_subspace;
use rdl::two_qubit::{
    linearity_residuals, select_independent_records, solve_linearity_coefficients, swap_experiment,
    unitary_at, BlochRecord, LinearityCoefficients,
};
use rdl::{BipartiteDims, CMatrix, Tolerances};

fn tol() -> Tolerances {
    Tolerances::default()
}

fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> M {
    let a = random_matrix(rng, n, n);
    (&a + dagger(&a)).map(|x| x * 0.5)
}

fn random_coefficients<R: Rng>(rng: &mut R, radius: f64) -> LinearityCoefficients {
    let mut draw = || rng.gen_range(-radius..=radius);
    LinearityCoefficients {
        a11: draw(),
        a21: draw(),
        b11: [draw(), draw(), draw()],
        b21: [draw(), draw(), draw()],
    }
}

fn constrained_family<R: Rng>(
    rng: &mut R,
    coeffs: &LinearityCoefficients,
    n: usize,
) -> StateFamily {
    let samples: Vec<_> = (0..4 * n)
        .map(|_| sample_two_qubit_params(rng, 0.2).unwrap())
        .collect();
    let fam = constrained_two_qubit_family(coeffs, &samples, &tol()).unwrap();
    let members = fam.family.members()[..n.min(fam.family.len())].to_vec();
    StateFamily::new(BipartiteDims::two_qubit(), members, "constrained", &tol()).unwrap()
}

fn unconstrained_family<R: Rng>(rng: &mut R, n: usize) -> StateFamily {
    let members = (0..n)
        .map(|_| assemble_two_qubit(&sample_two_qubit_params(rng, 0.3).unwrap(), &tol()).unwrap())
        .collect();
    StateFamily::new(BipartiteDims::two_qubit(), members, "unconstrained", &tol()).unwrap()
}

fn random_joint_family<R: Rng>(rng: &mut R, ds: usize, de: usize, n: usize) -> StateFamily {
    let members = (0..n).map(|_| random_density(rng, ds * de)).collect();
    StateFamily::new(
        BipartiteDims::new(ds, de).unwrap(),
        members,
        "random",
        &tol(),
    )
    .unwrap()
}

/// Constrained (consistent) or unconstrained two-qubit family, chosen by `consistent`.
fn two_qubit_family(seed: u64, consistent: bool) -> StateFamily {
    let mut rng = rng(seed);
    let n = rng.gen_range(5..=9);
    if consistent {
        let coeffs = random_coefficients(&mut rng, 0.15);
        constrained_family(&mut rng, &coeffs, n)
    } else {
        unconstrained_family(&mut rng, n)
    }
}

fn map_for(family: &StateFamily, u: &CMatrix) -> Superoperator {
    let v = build_subspace(family, tol().rank);
    let rep = check_subspace_consistency(&v, u, &tol()).unwrap();
    build_dynamical_map(
        &build_assignment(&v),
        u,
        MapOptions {
            consistency_certified: rep.consistent,
            ..MapOptions::default()
        },
        &tol(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_traces_are_linear_and_trace_preserving(seed: u64, ds in 2usize..=4, de in 1usize..=4) {
        let mut rng = rng(seed);
        let dims = BipartiteDims::new(ds, de).unwrap();
        let x = random_matrix(&mut rng, ds * de, ds * de);
        let y = random_matrix(&mut rng, ds * de, ds * de);
        let (a, b) = (z(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)), z(rng.gen_range(-2.0..2.0), 0.3));
        let combo = x.map(|v| v * a) + y.map(|v| v * b);
        let lhs = partial_trace_env(&combo, dims).unwrap();
        let rhs = partial_trace_env(&x, dims).unwrap().map(|v| v * a) + partial_trace_env(&y, dims).unwrap().map(|v| v * b);
        prop_assert!(max_diff(&lhs, &rhs) <= 1e-12);
        let t = trace(&x);
        prop_assert!((trace(&partial_trace_env(&x, dims).unwrap()) - t).norm() <= 1e-12);
        prop_assert!((trace(&partial_trace_sys(&x, dims).unwrap()) - t).norm() <= 1e-12);
    }

    #[test]
    fn adjoint_action_inverts(seed: u64, n in 2usize..=6) {
        let mut rng = rng(seed);
        let u = random_unitary(&mut rng, n);
        let x = random_matrix(&mut rng, n, n);
        let back = adjoint_action(&dagger(&u), &adjoint_action(&u, &x, 1e-9).unwrap(), 1e-9).unwrap();
        prop_assert!(max_diff(&back, &x) <= 1e-12);
    }

    #[test]
    fn hermitian_basis_spans(seed: u64, d in 2usize..=4) {
        let mut rng = rng(seed);
        let h = random_hermitian(&mut rng, d);
        let basis = hermitian_basis(d);
        prop_assert_eq!(basis.len(), d * d);
        let back = from_real_coordinates(&real_coordinates(&h, &basis), &basis);
        prop_assert!(max_diff(&back, &h) <= 1e-12);
    }

    #[test]
    fn trace_distance_is_a_metric(seed: u64, d in 2usize..=4) {
        let mut rng = rng(seed);
        let (a, b, c) = (random_density(&mut rng, d), random_density(&mut rng, d), random_density(&mut rng, d));
        let ab = trace_distance(&a, &b, 1e-9).unwrap();
        let ba = trace_distance(&b, &a, 1e-9).unwrap();
        let bc = trace_distance(&b, &c, 1e-9).unwrap();
        let ac = trace_distance(&a, &c, 1e-9).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert!(trace_distance(&a, &a, 1e-9).unwrap() <= 1e-12);
    }

    #[test]
    fn subspace_dimensions_are_consistent(seed: u64, ds in 2usize..=3, de in 1usize..=3, n in 1usize..=12) {
        let mut rng = rng(seed);
        let fam = random_joint_family(&mut rng, ds, de, n);
        let v = build_subspace(&fam, tol().rank);
        let joint = ds * de;
        prop_assert!(v.dim_v() <= n.min(joint * joint));
        prop_assert!(v.dim_vs() <= v.dim_v().min(ds * ds));
        prop_assert_eq!(v.dim_kernel(), v.dim_v() - v.dim_vs());
        prop_assert_eq!(v.independent_pairs().len(), v.dim_vs());
        for y in v.kernel_basis() {
            prop_assert!(max_abs(&partial_trace_env(y, fam.dims()).unwrap()) <= 1e-10);
            prop_assert!(v.distance_from_v(y).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn subspace_consistency_implies_pairwise(seed: u64, consistent: bool, wt in 0.1f64..3.0) {
        let fam = two_qubit_family(seed, consistent);
        let u = unitary_at(wt);
        let v = build_subspace(&fam, tol().rank);
        let sub = check_subspace_consistency(&v, &u, &tol()).unwrap();
        // Add an equal-marginal pair from the hull so the pairwise check has
        // something non-trivial to compare; V is unchanged.
        let n = fam.len() as f64;
        let mean = fam.members().iter().fold(M::zeros(4, 4), |acc, m| acc + m.map(|x| x / n));
        let hp = equal_marginal_pair(&v, &mean).unwrap();
        let mut extended = fam.members().to_vec();
        extended.push(hp.sigma_hat);
        extended.push(hp.sigma_tilde);
        let fam2 = StateFamily::new(fam.dims(), extended, "extended", &tol()).unwrap();
        let pair = check_pairwise_consistency(&fam2, &u, &tol()).unwrap();
        prop_assert!(pair.pairs_tested.unwrap() >= 1);
        if sub.consistent {
            prop_assert!(pair.consistent);
        }
    }

    #[test]
    fn evolved_marginal_norm_is_absolutely_homogeneous(seed: u64, s in -5.0f64..5.0) {
        let mut rng = rng(seed);
        let u = random_unitary(&mut rng, 6);
        let x = random_hermitian(&mut rng, 6);
        let dims = BipartiteDims::new(2, 3).unwrap();
        let base = evolved_marginal_norm(&x, &u, dims);
        let scaled = evolved_marginal_norm(&x.map(|v| v * s), &u, dims);
        prop_assert!((scaled - s.abs() * base).abs() <= 1e-12 * (1.0 + base));
    }

    #[test]
    fn witness_reproduces_reported_violation(seed: u64, wt in 0.3f64..2.8) {
        let fam = two_qubit_family(seed, false);
        let u = unitary_at(wt);
        let v = build_subspace(&fam, tol().rank);
        let rep = check_subspace_consistency(&v, &u, &tol()).unwrap();
        prop_assert!(!rep.consistent);
        let y = rep.witness.unwrap();
        prop_assert!(max_abs(&partial_trace_env(&y, fam.dims()).unwrap()) <= 1e-10);
        prop_assert!(v.distance_from_v(&y).unwrap() <= 1e-10);
        let direct = max_abs(&ptrace_env(&adjoint(&u, &y), 2, 2));
        prop_assert!((direct - rep.max_violation).abs() <= 1e-12);
    }

    #[test]
    fn map_is_independent_of_member_order(seed: u64, wt in 0.1f64..3.0) {
        let fam = two_qubit_family(seed, true);
        let mut order: Vec<usize> = (0..fam.len()).collect();
        order.reverse();
        order.rotate_left(seed as usize % fam.len());
        let u = unitary_at(wt);
        let a = map_for(&fam, &u);
        let b = map_for(&fam.permuted(&order), &u);
        prop_assert!(max_diff(&a.matrix, &b.matrix) <= 1e-9);
    }

    #[test]
    fn kraus_form_round_trips_and_preserves_trace(seed: u64, consistent: bool, wt in 0.0f64..6.3) {
        let fam = two_qubit_family(seed, consistent);
        let phi = map_for(&fam, &unitary_at(wt));
        let kraus = decompose_signed_kraus(&phi, 1e-9).unwrap();
        let mut rng = rng(seed ^ 0x5eed);
        for _ in 0..5 {
            let x = random_matrix(&mut rng, 2, 2);
            prop_assert!(max_diff(&kraus.apply(&x), &phi.apply(&x).unwrap()) <= 1e-10);
        }
        prop_assert!(max_diff(&kraus.normalization(), &M::identity(2, 2)) <= 1e-10);
        prop_assert!(verdicts(&phi, &tol()).unwrap().trace_preserving);
    }

    #[test]
    fn completely_positive_maps_contract_trace_distance(seed: u64) {
        let mut rng = rng(seed);
        let omega = random_density(&mut rng, 2);
        let fam = product_family(&pauli_eigenstates(), &omega, &tol()).unwrap();
        let u = random_unitary(&mut rng, 4);
        let phi = map_for(&fam, &u);
        prop_assert!(verdicts(&phi, &tol()).unwrap().completely_positive);
        for _ in 0..5 {
            let (a, b) = (random_density(&mut rng, 2), random_density(&mut rng, 2));
            let before = trace_distance(&a, &b, 1e-9).unwrap();
            let after = trace_distance(&phi.apply(&a).unwrap(), &phi.apply(&b).unwrap(), 1e-9).unwrap();
            prop_assert!(after <= before + 1e-10);
        }
    }

    #[test]
    fn constrained_members_obey_the_constraint(seed: u64) {
        let mut rng = rng(seed);
        let coeffs = random_coefficients(&mut rng, 0.2);
        let samples: Vec<_> = (0..10).map(|_| sample_two_qubit_params(&mut rng, 0.2).unwrap()).collect();
        let fam = constrained_two_qubit_family(&coeffs, &samples, &tol()).unwrap();
        prop_assert_eq!(fam.family.len() + fam.rejected.len(), 10);
        for m in fam.family.members() {
            let p = extract_two_qubit(m).unwrap();
            prop_assert!((p.gamma[0][0] - coeffs.gamma11(&p.alpha)).abs() <= 1e-12);
            prop_assert!((p.gamma[1][0] - coeffs.gamma21(&p.alpha)).abs() <= 1e-12);
        }
    }

    #[test]
    fn swap_gives_the_constant_map(seed: u64) {
        let mut rng = rng(seed);
        let omega = random_density(&mut rng, 2);
        let rep = swap_experiment(&pauli_eigenstates(), &omega, &tol()).unwrap();
        // Choi matrix of X -> Tr(X) omega is I (x) omega.
        let expected = kron(&M::identity(2, 2), &omega);
        prop_assert!(max_diff(&rep.superoperator.choi, &expected) <= 1e-12);
        prop_assert!(rep.pairs.iter().all(|p| p.after <= 1e-12));
    }

    #[test]
    fn coefficient_solve_is_exact_on_random_records(seed: u64) {
        let mut rng = rng(seed);
        let planted = random_coefficients(&mut rng, 1.0);
        let records: Vec<BlochRecord> = (0..6)
            .map(|_| {
                let alpha = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
                BlochRecord { alpha, gamma11: planted.gamma11(&alpha), gamma21: planted.gamma21(&alpha) }
            })
            .collect();
        let idx = select_independent_records(&records).unwrap();
        let solved = solve_linearity_coefficients(&idx.map(|k| records[k])).unwrap();
        prop_assert!(solved.max_abs_diff(&planted) <= 1e-9);
    }
}

#[test]
fn hull_check_agrees_with_subspace_check() {
    for seed in 0..12u64 {
        let consistent = seed % 2 == 0;
        let fam = two_qubit_family(seed, consistent);
        let u = unitary_at(0.4 + 0.2 * seed as f64);
        let v = build_subspace(&fam, tol().rank);
        let sub = check_subspace_consistency(&v, &u, &tol()).unwrap();
        let hull = check_hull_consistency(&fam, &u, &tol(), 50, seed).unwrap();
        assert_eq!(sub.consistent, consistent, "seed {seed}");
        assert_eq!(hull.consistent, sub.consistent, "seed {seed}");
    }
}

/// Residuals of the fitted affine constraint vanish exactly when the family
/// passes the subspace check.
#[test]
fn residual_test_agrees_with_consistency_at_third_turn() {
    let u = unitary_at(PI / 3.0);
    for seed in 0..20u64 {
        let fam = two_qubit_family(100 + seed, seed < 10);
        let records: Vec<BlochRecord> = fam
            .members()
            .iter()
            .map(|m| BlochRecord::from_params(&extract_two_qubit(m).unwrap()))
            .collect();
        let idx = select_independent_records(&records).expect("four independent members");
        let fitted = solve_linearity_coefficients(&idx.map(|k| records[k])).unwrap();
        let worst = linearity_residuals(&fam, &fitted)
            .unwrap()
            .iter()
            .fold(0.0f64, |m, (a, b)| m.max(a.abs()).max(b.abs()));
        let v = build_subspace(&fam, tol().rank);
        let rep = check_subspace_consistency(&v, &u, &tol()).unwrap();
        assert_eq!(
            worst <= 1e-9,
            rep.consistent,
            "seed {seed}: residual {worst:.3e}"
        );
        assert_eq!(rep.consistent, seed < 10, "seed {seed}");
    }
}

#[test]
fn swap_unitary_has_no_kernel_for_product_family() {
    let omega = random_density(&mut rng(5), 2);
    let fam = product_family(&pauli_eigenstates(), &omega, &tol()).unwrap();
    let v = build_subspace(&fam, tol().rank);
    assert_eq!(v.dim_kernel(), 0);
    let rep = check_subspace_consistency(&v, &swap_unitary(2), &tol()).unwrap();
    assert!(rep.consistent);
}
