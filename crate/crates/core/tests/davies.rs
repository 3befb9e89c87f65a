//! Davies generators, conditional expectations, gaps and dynamics checked
//! against closed forms, a dual-route self-oracle and structural identities.

use davies_lab::davies::{
    bohr_decomposition, build_davies, choi_matrix, depolarizing_expectation, evolve, heat_bath_entropy_production,
    mixing_time_bisection, petz_expectation_global, regularize, site_jumps, ConditionalExpectation,
    ExpectationRoute, WeightScheme,
};
use davies_lab::models::pauli;
use davies_lab::opcore::{
    eigvalsh, kron, matmul, max_abs, random_ginibre_state, random_mixed_state, relative_entropy, seeded_rng,
    trace_norm, unvectorize, vectorize, weighted_inner_product, CMat, C64, ONE, ZERO,
};
use davies_lab::{LabError, Lattice, LocalHamiltonian, Metric, Operator, Region, Register};
use proptest::prelude::*;

fn r(s: &[usize]) -> Region {
    Region::new(s.to_vec())
}

fn ising(n: usize, j: f64, h: f64) -> LocalHamiltonian {
    LocalHamiltonian::ising_chain(n, j, h).unwrap()
}

/// Chain of `n` qubits without any terms.
fn free_chain(n: usize) -> LocalHamiltonian {
    let lat = Lattice::new(1, n / 2).unwrap();
    LocalHamiltonian::from_terms(lat, (0..n).collect(), 2, Metric::Chebyshev, vec![], true).unwrap()
}

fn single_z() -> LocalHamiltonian {
    let lat = Lattice::new(1, 0).unwrap();
    let terms = vec![(r(&[0]), pauli('Z').unwrap())];
    LocalHamiltonian::from_terms(lat, r(&[0]), 2, Metric::Chebyshev, terms, true).unwrap()
}

fn unit(n: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(i, j)] = ONE;
    m
}

fn apply_superop(s: &CMat, x: &CMat) -> CMat {
    unvectorize(&(s * vectorize(x)), x.nrows())
}

fn full_superop(e: &ConditionalExpectation, reg: &Register) -> CMat {
    e.superop_on(reg).unwrap()
}

#[test]
fn weight_schemes_satisfy_detailed_balance() {
    let omegas: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.37).collect();
    for scheme in [WeightScheme::Exponential, WeightScheme::Glauber, WeightScheme::Metropolis] {
        for beta in [0.0, 0.3, 2.0] {
            assert!(scheme.kms_violation(beta, &omegas) < 1e-14, "{scheme:?} at β = {beta}");
        }
        assert_eq!(scheme.chi(0.0, 1.7), 1.0);
    }
    let exact = WeightScheme::Power { exponent: 0.5 };
    assert!(exact.kms_violation(1.3, &omegas) < 1e-14);
    let h = ising(2, 1.0, 0.0);
    let bad = build_davies(&h, &r(&[0]), 1.0, WeightScheme::Power { exponent: 0.3 });
    assert!(matches!(bad, Err(LabError::Config(_))));
    assert!(build_davies(&h, &r(&[0]), -1.0, WeightScheme::Exponential).is_err());
}

#[test]
fn bohr_decomposition_of_a_single_spin() {
    let z = pauli('Z').unwrap();
    let half_x = pauli('X').unwrap().scale(0.5);
    let parts = bohr_decomposition(&z, &half_x);
    let omegas: Vec<f64> = parts.iter().map(|p| p.0).collect();
    assert_eq!(omegas, vec![-2.0, 2.0]);
    // Energy +1 is basis state 0: the frequency +2 component takes |0⟩ to |1⟩.
    let lower = unit(2, 1, 0).scale(0.5);
    let raise = unit(2, 0, 1).scale(0.5);
    assert!(max_abs(&(&parts[1].1 - &lower)) < 1e-15);
    assert!(max_abs(&(&parts[0].1 - &raise)) < 1e-15);
    assert!(max_abs(&(&parts[0].1 + &parts[1].1 - &half_x)) < 1e-15);
}

#[test]
fn jump_families_are_kraus_and_fourier_complete() {
    let models = [ising(3, 1.0, 0.4), LocalHamiltonian::cluster_chain(4, 0.7).unwrap()];
    for h in &models {
        for k in h.universe().iter() {
            let sj = site_jumps(h, k, 0.8, WeightScheme::Exponential).unwrap();
            assert!(sj.kraus_residual().unwrap() < 1e-10);
            for t in [0.0, 0.1, 0.7] {
                assert!(sj.fourier_residual(t) < 1e-10, "site {k}, t = {t}");
            }
            assert_eq!(sj.register.region(), h.closure(&r(&[k])));
        }
    }
}

#[test]
fn zero_hamiltonian_gives_depolarizing_generator() {
    for n in [1usize, 2] {
        let h = free_chain(n);
        let a: Region = (0..n).collect();
        let gen = build_davies(&h, &a, 1.7, WeightScheme::Exponential).unwrap();
        let reg = gen.register().clone();
        let dim = reg.dim();
        let mut expected = CMat::zeros(dim * dim, dim * dim);
        for k in 0..n {
            let dep = depolarizing_expectation(&reg, &r(&[k])).unwrap();
            expected += full_superop(&dep, &reg) - CMat::identity(dim * dim, dim * dim);
        }
        let chi0 = gen.chi0_min();
        assert_eq!(chi0, 1.0);
        assert!(max_abs(&(gen.superop().unwrap() - expected.scale(chi0))) < 1e-10);
    }
}

#[test]
fn generators_are_trace_annihilating_ccp_and_gns_symmetric() {
    let cases = [
        (ising(3, 1.0, 0.3), r(&[1])),
        (ising(3, 0.6, -0.2), r(&[0, 1, 2])),
        (LocalHamiltonian::cluster_chain(3, 1.0).unwrap(), r(&[0, 2])),
    ];
    for (h, a) in &cases {
        for scheme in [WeightScheme::Exponential, WeightScheme::Glauber, WeightScheme::Metropolis] {
            let gen = build_davies(h, a, 0.9, scheme).unwrap();
            assert!(gen.trace_residual().unwrap() < 1e-12);
            assert!(gen.ccp_min_eigenvalue().unwrap() > -1e-10);
            assert!(gen.gns_residual(None).unwrap() < 1e-9);
            // The global Gibbs state restricted to the register is a fixed point too.
            let l = gen.superop().unwrap();
            assert!(max_abs(&apply_superop(l, gen.sigma().mat())) < 1e-12);
        }
    }
}

#[test]
fn gns_symmetry_over_a_full_operator_basis() {
    let h = ising(3, 1.0, 0.35);
    let gen = build_davies(&h, &r(&[1]), 0.7, WeightScheme::Exponential).unwrap();
    let sigma = gen.sigma().mat().clone();
    let dual = gen.superop().unwrap().adjoint();
    let n = sigma.nrows();
    let basis: Vec<CMat> = (0..n * n).map(|k| unit(n, k % n, k / n)).collect();
    let images: Vec<CMat> = basis.iter().map(|x| apply_superop(&dual, x)).collect();
    let mut worst: f64 = 0.0;
    for s in [0.0, 0.5, 1.0] {
        for (x, lx) in basis.iter().zip(&images) {
            for (y, ly) in basis.iter().zip(&images) {
                let left = weighted_inner_product(x, ly, &sigma, s).unwrap();
                let right = weighted_inner_product(lx, y, &sigma, s).unwrap();
                worst = worst.max((left - right).norm());
            }
        }
    }
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn infinite_temperature_fixes_the_maximally_mixed_state() {
    let h = ising(3, 1.0, 0.5);
    let gen = build_davies(&h, h.universe(), 0.0, WeightScheme::Exponential).unwrap();
    let id = CMat::identity(8, 8);
    assert!(max_abs(&apply_superop(gen.superop().unwrap(), &id)) < 1e-13);
    // At β = 0 the weights are symmetric, so L commutes with every σ-modular map.
    let mut rng = seeded_rng(3);
    let sigma = random_ginibre_state(gen.register(), &mut rng);
    assert!(gen.gns_residual(Some(&h.gibbs_state(h.universe(), 0.0).unwrap())).unwrap() < 1e-12);
    assert!(gen.gns_residual(Some(&sigma)).unwrap() > 1e-6, "a generic state is not stationary");
}

#[test]
fn depolarizing_expectation_for_free_spins() {
    let h = free_chain(3);
    let gen = build_davies(&h, &r(&[0, 2]), 1.0, WeightScheme::Exponential).unwrap();
    let e = gen.conditional_expectation(ExpectationRoute::Spectral).unwrap();
    let reg = gen.register().clone();
    let dep = depolarizing_expectation(&reg, &r(&[0, 2])).unwrap();
    assert!(max_abs(&(full_superop(&e, &reg) - full_superop(&dep, &reg))) < 1e-10);
}

#[test]
fn whole_system_expectation_replaces_by_the_gibbs_state() {
    let h = ising(3, 1.0, 0.2);
    let beta = 0.8;
    let gen = build_davies(&h, h.universe(), beta, WeightScheme::Exponential).unwrap();
    let sigma = h.gibbs_state(h.universe(), beta).unwrap();
    let mut rng = seeded_rng(5);
    for route in [ExpectationRoute::Spectral, ExpectationRoute::PetzLimit] {
        let e = gen.conditional_expectation(route).unwrap();
        for _ in 0..5 {
            let x = davies_lab::opcore::random_hermitian(8, &mut rng);
            let y = e.apply(&sigma.with_mat(x.clone())).unwrap();
            let expected = sigma.mat().scale(davies_lab::opcore::trace(&x).re);
            assert!(max_abs(&(y.mat() - expected)) < 1e-9, "{route:?}");
        }
    }
}

#[test]
fn spectral_and_petz_routes_agree() {
    let cases = [
        (ising(3, 1.0, 0.0), r(&[1])),
        (ising(3, 1.0, 0.45), r(&[0, 1])),
        (ising(4, 0.8, 0.3), r(&[1, 2])),
        (LocalHamiltonian::cluster_chain(4, 0.9).unwrap(), r(&[1])),
    ];
    for (h, a) in &cases {
        let gen = build_davies(h, a, 1.0, WeightScheme::Exponential).unwrap();
        let s = gen.conditional_expectation(ExpectationRoute::Spectral).unwrap();
        let p = gen.conditional_expectation(ExpectationRoute::PetzLimit).unwrap();
        assert!(max_abs(&(&s.superop - &p.superop)) < 1e-8, "{a:?}");
        if h.full_register().dim() <= 16 {
            let global = petz_expectation_global(h, a, 1.0).unwrap();
            let full = h.full_register();
            assert!(max_abs(&(full_superop(&s, &full) - full_superop(&global, &full))) < 1e-8);
        }
    }
    let big = ising(5, 1.0, 0.0);
    assert!(matches!(petz_expectation_global(&big, &r(&[2]), 1.0), Err(LabError::Capability(_))));
}

/// Dense superoperators of `E_A` for the listed regions, on the full register.
fn expectations(h: &LocalHamiltonian, beta: f64, regions: &[Region]) -> Vec<CMat> {
    let full = h.full_register();
    regions
        .iter()
        .map(|a| {
            let gen = build_davies(h, a, beta, WeightScheme::Exponential).unwrap();
            full_superop(&gen.conditional_expectation(ExpectationRoute::Spectral).unwrap(), &full)
        })
        .collect()
}

#[test]
fn conditional_expectations_have_the_four_structural_properties() {
    let h = ising(4, 1.0, 0.3);
    let beta = 0.9;
    let full = h.full_register();
    let n = full.dim();
    let regions = [r(&[0]), r(&[0, 1]), r(&[3]), r(&[1, 2]), r(&[0, 1, 2, 3])];
    let e = expectations(&h, beta, &regions);
    // Idempotent and completely positive, trace preserving.
    for m in &e {
        assert!(max_abs(&(matmul(m, m) - m)) < 1e-9);
        let choi = choi_matrix(m, n);
        let min_eig = eigvalsh(&davies_lab::opcore::hermitize(&choi))[0];
        assert!(min_eig > -1e-9);
        for i in 0..n {
            for j in 0..n {
                let y = apply_superop(m, &unit(n, i, j));
                let expected = if i == j { ONE } else { ZERO };
                assert!((davies_lab::opcore::trace(&y) - expected).norm() < 1e-9);
            }
        }
    }
    // Gibbs states of regions containing A∂ are fixed points.
    for (a, m) in regions.iter().zip(&e) {
        let closure = h.closure(a);
        let sigma_b = h.gibbs_state(&closure, beta).unwrap();
        let lifted = Operator::new(
            sigma_b.register().clone(),
            sigma_b.mat().clone(),
        )
        .unwrap();
        let rest = full.region().difference(&closure);
        let mut rng = seeded_rng(7);
        let tau = random_ginibre_state(&h.register(&rest), &mut rng);
        let prod = if rest.is_empty() {
            lifted
        } else {
            let joint = lifted.embed(&full).unwrap();
            let tau_e = tau.embed(&full).unwrap();
            full_state(&joint, &tau_e)
        };
        assert!(max_abs(&(apply_superop(m, prod.mat()) - prod.mat())) < 1e-9, "{a:?}");
        let global = h.gibbs_state(h.universe(), beta).unwrap();
        assert!(max_abs(&(apply_superop(m, global.mat()) - global.mat())) < 1e-9);
    }
    // Nested regions: E_A E_B = E_B E_A = E_B for A ⊆ B.
    for (small, big) in [(0, 1), (0, 4), (3, 4), (3, 3), (1, 4)] {
        assert!(max_abs(&(matmul(&e[small], &e[big]) - &e[big])) < 1e-9);
        assert!(max_abs(&(matmul(&e[big], &e[small]) - &e[big])) < 1e-9);
    }
    // Disjoint closures commute: {0}∂ = {0, 1} and {3}∂ = {2, 3}.
    assert!(max_abs(&(matmul(&e[0], &e[2]) - matmul(&e[2], &e[0]))) < 1e-9);
}

/// `X Y` for two commuting full-register operators; used to glue a Gibbs
/// state of `B` with an arbitrary state outside `B`.
fn full_state(x: &Operator, y: &Operator) -> Operator {
    x.with_mat(matmul(x.mat(), y.mat()).scale(1.0))
}

#[test]
fn composition_with_depolarizing_maps() {
    let h = ising(4, 1.0, 0.25);
    let a = r(&[1]);
    let gen = build_davies(&h, &a, 0.8, WeightScheme::Exponential).unwrap();
    let full = h.full_register();
    let e = full_superop(&gen.conditional_expectation(ExpectationRoute::Spectral).unwrap(), &full);
    let dep_a = full_superop(&depolarizing_expectation(&full, &a).unwrap(), &full);
    let dep_closure = full_superop(&depolarizing_expectation(&full, &h.closure(&a)).unwrap(), &full);
    assert!(max_abs(&(matmul(&e, &dep_a) - &e)) < 1e-9);
    assert!(max_abs(&(matmul(&dep_closure, &e) - &dep_closure)) < 1e-9);
}

#[test]
fn chain_rule_and_factorization_of_relative_entropy() {
    let h = ising(4, 1.0, 0.2);
    let beta = 0.7;
    let full = h.full_register();
    let sigma = h.gibbs_state(h.universe(), beta).unwrap();
    let e = expectations(&h, beta, &[r(&[0]), r(&[3])]);
    let joint = matmul(&e[0], &e[1]);
    let mut rng = seeded_rng(9);
    for _ in 0..20 {
        let rho = random_ginibre_state(&full, &mut rng);
        let er = apply_superop(&e[0], rho.mat());
        let lhs = relative_entropy(rho.mat(), sigma.mat());
        let rhs = relative_entropy(rho.mat(), &er) + relative_entropy(&er, sigma.mat());
        assert!((lhs - rhs).abs() < 1e-8);
        let both = relative_entropy(rho.mat(), &apply_superop(&joint, rho.mat()));
        let sum = relative_entropy(rho.mat(), &er) + relative_entropy(rho.mat(), &apply_superop(&e[1], rho.mat()));
        assert!(both <= sum + 1e-8);
    }
}

#[test]
fn single_site_depolarizing_gap_is_one() {
    let h = free_chain(1);
    let gen = build_davies(&h, &r(&[0]), 0.5, WeightScheme::Exponential).unwrap();
    let gap = gen.spectral_gap().unwrap();
    assert!(!gap.degenerate);
    assert!((gap.gap - 1.0).abs() < 1e-12);
    assert_eq!(gap.kernel_dim, 1);
    // Oracle: the 4×4 superoperator of 𝔼 − id has eigenvalues {0, −1, −1, −1}.
    let vals = eigvalsh(&davies_lab::opcore::hermitize(gen.superop().unwrap()));
    assert!((vals[0] + 1.0).abs() < 1e-12 && vals[3].abs() < 1e-12);
}

#[test]
fn gap_of_disjoint_generators_is_the_minimum() {
    let lat = Lattice::new(1, 1).unwrap();
    let terms = vec![(r(&[0]), pauli('Z').unwrap()), (r(&[2]), pauli('Z').unwrap().scale(0.3))];
    let h = LocalHamiltonian::from_terms(lat, r(&[0, 1, 2]), 2, Metric::Chebyshev, terms, true).unwrap();
    let beta = 1.2;
    let g0 = build_davies(&h, &r(&[0]), beta, WeightScheme::Exponential).unwrap().spectral_gap().unwrap();
    let g2 = build_davies(&h, &r(&[2]), beta, WeightScheme::Exponential).unwrap().spectral_gap().unwrap();
    let both = build_davies(&h, &r(&[0, 2]), beta, WeightScheme::Exponential).unwrap().spectral_gap().unwrap();
    assert!((both.gap - g0.gap.min(g2.gap)).abs() < 1e-10);
    assert!(!both.degenerate);
}

#[test]
fn gaps_of_growing_chain_regions_stay_positive() {
    let h = ising(5, 1.0, 0.0);
    let mut gaps = Vec::new();
    for len in 1..=4usize {
        let a: Region = (0..len).collect();
        let gen = build_davies(&h, &a, 0.6, WeightScheme::Exponential).unwrap();
        let g = gen.spectral_gap().unwrap();
        assert!(!g.degenerate && g.gap > 0.0);
        gaps.push(g.gap);
    }
    assert_eq!(gaps.len(), 4);
}

#[test]
fn empty_region_has_identity_expectation_and_degenerate_gap() {
    let h = ising(2, 1.0, 0.0);
    let gen = build_davies(&h, &Region::empty(), 1.0, WeightScheme::Exponential).unwrap();
    let e = gen.conditional_expectation(ExpectationRoute::Spectral).unwrap();
    assert!(e.region.is_empty());
    let mut rng = seeded_rng(1);
    let rho = random_ginibre_state(&h.full_register(), &mut rng);
    assert_eq!(e.apply(&rho).unwrap(), rho);
}

#[test]
fn entropy_production_is_non_negative() {
    let h = ising(3, 1.0, 0.4);
    let beta = 0.9;
    let gen = build_davies(&h, &r(&[1]), beta, WeightScheme::Exponential).unwrap();
    let sigma = h.gibbs_state(h.universe(), beta).unwrap();
    assert!(gen.entropy_production(&sigma, &sigma).unwrap().abs() < 1e-9);
    let mut rng = seeded_rng(11);
    for i in 0..500 {
        let rho = if i % 2 == 0 {
            random_ginibre_state(&h.full_register(), &mut rng)
        } else {
            random_mixed_state(&h.full_register(), 0.05, &mut rng)
        };
        assert!(gen.entropy_production(&rho, &sigma).unwrap() >= -1e-9);
    }
}

#[test]
fn heat_bath_production_dominates_local_relative_entropy() {
    let h = ising(4, 1.0, 0.3);
    let beta = 1.1;
    let sigma = h.gibbs_state(h.universe(), beta).unwrap();
    let gen = build_davies(&h, &r(&[1, 2]), beta, WeightScheme::Exponential).unwrap();
    let e = gen.conditional_expectation(ExpectationRoute::Spectral).unwrap();
    let mut rng = seeded_rng(13);
    for _ in 0..50 {
        let rho = random_ginibre_state(&h.full_register(), &mut rng);
        let er = e.apply(&rho).unwrap();
        let d = relative_entropy(rho.mat(), er.mat());
        let ep = heat_bath_entropy_production(&e, &rho, &sigma).unwrap();
        assert!(d <= ep + 1e-9, "{d} > {ep}");
    }
}

#[test]
fn depolarizing_decay_has_the_closed_form() {
    let h = free_chain(1);
    let gen = build_davies(&h, &r(&[0]), 0.4, WeightScheme::Exponential).unwrap();
    let sigma = Operator::maximally_mixed(gen.register());
    let mut rng = seeded_rng(17);
    let times = [0.0, 0.1, 0.5, 1.0, 2.5, 7.0];
    for _ in 0..10 {
        let rho0 = random_ginibre_state(gen.register(), &mut rng);
        let initial = trace_norm(&(rho0.mat() - sigma.mat()));
        let (states, points) = evolve(&gen, &rho0, &sigma, &times).unwrap();
        assert_eq!(states[0], rho0);
        for p in &points {
            assert!((p.trace_dist - (-p.t).exp() * initial).abs() < 1e-8, "t = {}", p.t);
        }
        // Closed form of the state itself: e^{−t} ρ₀ + (1 − e^{−t}) Id/2.
        for (s, &t) in states.iter().zip(&times) {
            let expected = rho0.mat().scale((-t).exp()) + sigma.mat().scale(1.0 - (-t).exp());
            assert!(max_abs(&(s.mat() - expected)) < 1e-8);
        }
    }
}

#[test]
fn matrix_free_and_spectral_propagation_agree() {
    let h = ising(4, 1.0, 0.2);
    let gen = build_davies(&h, &r(&[1, 2]), 0.8, WeightScheme::Exponential).unwrap();
    let prop = gen.propagator().unwrap();
    let mut rng = seeded_rng(19);
    let rho = random_ginibre_state(gen.register(), &mut rng);
    for t in [0.05, 0.6, 3.0] {
        let a = prop.apply(&rho, t).unwrap();
        let b = gen.evolve_matrix_free(&rho, t).unwrap();
        assert!(max_abs(&(a.mat() - b.mat())) < 1e-10, "t = {t}");
    }
    let sigma = gen.sigma().clone();
    assert!(evolve(&gen, &rho, &sigma, &[1.0, 0.5]).is_err());
}

#[test]
fn relative_entropy_decreases_along_trajectories() {
    let h = ising(3, 1.0, 0.3);
    let beta = 1.0;
    let gen = build_davies(&h, h.universe(), beta, WeightScheme::Exponential).unwrap();
    let sigma = gen.sigma().clone();
    let times: Vec<f64> = (0..40).map(|i| 0.1 * i as f64).collect();
    let mut rng = seeded_rng(23);
    for _ in 0..100 {
        let rho0 = random_mixed_state(gen.register(), 0.1, &mut rng);
        let (_, points) = evolve(&gen, &rho0, &sigma, &times).unwrap();
        for w in points.windows(2) {
            assert!(w[1].rel_entropy <= w[0].rel_entropy + 1e-10);
        }
    }
}

#[test]
fn bisection_finds_known_crossing() {
    let mt = mixing_time_bisection(|t| Ok(((-t).exp(), 0)), 0.1, 100.0).unwrap();
    assert!((mt.time - 10f64.ln()).abs() < 1e-5);
    assert!(mt.distance <= 0.1);
    let stuck = mixing_time_bisection(|_| Ok((1.0, 0)), 0.1, 4.0);
    assert!(matches!(stuck, Err(LabError::Horizon { .. })));
    let instant = mixing_time_bisection(|_| Ok((0.0, 2)), 0.1, 4.0).unwrap();
    assert_eq!((instant.time, instant.worst_state), (0.0, 2));
}

#[test]
fn single_spin_relaxes_to_its_gibbs_state() {
    let h = single_z();
    let beta = 0.9;
    let gen = build_davies(&h, &r(&[0]), beta, WeightScheme::Exponential).unwrap();
    let low = 1.0 / (1.0 + (2.0 * beta).exp());
    let target = CMat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => C64::new(low, 0.0),
        (1, 1) => C64::new(1.0 - low, 0.0),
        _ => ZERO,
    });
    assert!(max_abs(&(gen.sigma().mat() - &target)) < 1e-14);
    let prop = gen.propagator().unwrap();
    let excited = Operator::new(gen.register().clone(), unit(2, 0, 0)).unwrap();
    let late = prop.apply(&excited, 200.0).unwrap();
    assert!(max_abs(&(late.mat() - &target)) < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn regularized_production_is_finite_for_pure_states(seed in any::<u64>()) {
        let h = ising(2, 1.0, 0.0);
        let gen = build_davies(&h, &r(&[0]), 0.5, WeightScheme::Glauber).unwrap();
        let sigma = gen.sigma().clone();
        let mut rng = seeded_rng(seed);
        let pure = random_mixed_state(gen.register(), 0.0, &mut rng);
        let ep = gen.entropy_production(&pure, &sigma).unwrap();
        prop_assert!(ep.is_finite() && ep >= -1e-9);
        let reg = regularize(&pure);
        prop_assert!((davies_lab::opcore::trace(reg.mat()).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expectations_are_contractions_in_relative_entropy(seed in any::<u64>()) {
        let h = ising(3, 1.0, 0.2);
        let gen = build_davies(&h, &r(&[1]), 0.7, WeightScheme::Exponential).unwrap();
        let e = gen.conditional_expectation(ExpectationRoute::Spectral).unwrap();
        let sigma = gen.sigma().clone();
        let mut rng = seeded_rng(seed);
        let rho = random_ginibre_state(gen.register(), &mut rng);
        let er = e.apply(&rho).unwrap();
        prop_assert!(relative_entropy(er.mat(), sigma.mat()) <= relative_entropy(rho.mat(), sigma.mat()) + 1e-9);
        let _ = kron(&CMat::identity(1, 1), er.mat());
    }
}

#[test]
fn choi_matrices_with_zero_blocks_diagonalize_cleanly() {
    // This Choi matrix made the plain implicit QR iteration return NaN.
    let h = ising(4, 1.0, 0.3);
    let full = h.full_register();
    let e = expectations(&h, 0.9, &[r(&[3])]).remove(0);
    let choi = davies_lab::opcore::hermitize(&choi_matrix(&e, full.dim()));
    let (vals, vecs) = davies_lab::opcore::eigh(&choi);
    assert!(vals.iter().all(|v| v.is_finite()));
    let rebuilt = davies_lab::opcore::from_eigen(&vals, &vecs, |x| x);
    assert!(max_abs(&(rebuilt - &choi)) < 1e-10);
    assert!(vals[0] > -1e-10);
}
