//! MCMI values, decay fits and the classical cross-check against independent
//! compositions, closed forms and a transfer-matrix correlation length.

use davies_lab::mcmi::{
    chain_family, classical_mcmi, decay_scan, decay_scan_state, fit_decay, mcmi, FitStatus, MCMI_FLOOR,
};
use davies_lab::models::predicted_mcmi_rate;
use davies_lab::opcore::{
    kron, log_pd, max_abs, op_norm_herm, random_ginibre_state, random_mixed_state, seeded_rng, CMat,
};
use davies_lab::{LabError, LocalHamiltonian, Operator, Partition4, Region, Register};
use proptest::prelude::*;

fn r(s: &[usize]) -> Region {
    Region::new(s.to_vec())
}

fn ising(n: usize, j: f64, h: f64) -> LocalHamiltonian {
    LocalHamiltonian::ising_chain(n, j, h).unwrap()
}

/// Exchange the last two qubit factors of a three-qubit operator.
fn swap_last_two(m: &CMat) -> CMat {
    let perm = |i: usize| (i & 4) | (i & 1) << 1 | (i >> 1 & 1);
    CMat::from_fn(8, 8, |i, j| m[(perm(i), perm(j))])
}

/// Correlation length `1 / log(λ₊/λ₋)` of the 1-D Ising transfer matrix
/// `T(s, s') = exp(βJ s s' + βh (s + s')/2)`.
fn transfer_matrix_xi(beta: f64, j: f64, h: f64) -> f64 {
    let t = |s: f64, u: f64| (beta * j * s * u + beta * h * (s + u) / 2.0).exp();
    let (a, b, d) = (t(1.0, 1.0), t(1.0, -1.0), t(-1.0, -1.0));
    let mean = (a + d) / 2.0;
    let rad = (((a - d) / 2.0).powi(2) + b * b).sqrt();
    1.0 / ((mean + rad) / (mean - rad)).ln()
}

#[test]
fn product_states_have_zero_mcmi() {
    let mut rng = seeded_rng(1);
    let h = ising(4, 0.0, 0.0);
    let factors: Vec<Operator> =
        (0..4).map(|s| random_ginibre_state(&Register::new(vec![s], 2).unwrap(), &mut rng)).collect();
    let mut m = CMat::identity(1, 1);
    for f in &factors {
        m = kron(&m, f.mat());
    }
    let sigma = Operator::new(h.full_register(), m).unwrap();
    let p = Partition4::new(r(&[0]), r(&[1]), r(&[2]), r(&[3]), h.universe()).unwrap();
    let rep = mcmi(&sigma, &p, &h).unwrap();
    assert!(rep.h_norm < 1e-13, "{}", rep.h_norm);
    assert!(rep.cmi.abs() < 1e-13 && rep.mi.abs() < 1e-13);
    assert_eq!(rep.dist, Some(2));
    // Non-interacting Gibbs states are products too.
    let free = ising(4, 0.0, 0.8);
    let scan = decay_scan(&free, 1.0, &chain_family(&free).unwrap()).unwrap();
    assert_eq!(scan.fit.status, FitStatus::AllZero);
}

#[test]
fn four_site_value_matches_independent_composition() {
    let h = ising(4, 1.0, 0.25);
    let sigma = h.gibbs_state(h.universe(), 1.0).unwrap();
    let p = Partition4::new(r(&[0]), r(&[1]), r(&[2]), r(&[3]), h.universe()).unwrap();
    let rep = mcmi(&sigma, &p, &h).unwrap();

    // Register of ACD is (0, 2, 3).
    let lg = |keep: &[usize]| log_pd(sigma.marginal(&r(keep)).unwrap().mat(), "marginal").unwrap();
    let id2 = CMat::identity(2, 2);
    let id4 = CMat::identity(4, 4);
    let acd = lg(&[0, 2, 3]);
    let d = kron(&id4, &lg(&[3]));
    let ad = swap_last_two(&kron(&lg(&[0, 3]), &id2));
    let cd = kron(&id2, &lg(&[2, 3]));
    let oracle = acd + d - ad - cd;
    let op = rep.operator.as_ref().unwrap();
    assert_eq!(op.register().sites(), &[0, 2, 3]);
    assert!(max_abs(&(op.mat() - &oracle)) < 1e-10);
    assert!((rep.h_norm - op_norm_herm(&oracle)).abs() < 1e-10);
    assert!((rep.cmi - rep.cmi_entropy_form).abs() < 1e-8);
}

#[test]
fn empty_conditioning_bounds_mutual_information() {
    let h = ising(5, 0.8, -0.3);
    let sigma = h.gibbs_state(h.universe(), 0.9).unwrap();
    for p in chain_family(&h).unwrap() {
        let rep = mcmi(&sigma, &p, &h).unwrap();
        assert!(rep.mi <= rep.h_norm + 1e-10);
        assert!((rep.mi - rep.cmi).abs() < 1e-10, "I(A:C|∅) equals I(A:C)");
    }
}

#[test]
fn singular_marginals_are_reported() {
    let h = ising(2, 1.0, 0.0);
    let mut m = CMat::zeros(4, 4);
    m[(0, 0)] = davies_lab::opcore::ONE;
    let pure = Operator::new(h.full_register(), m).unwrap();
    let p = Partition4::with_rest(r(&[0]), r(&[1]), Region::empty(), h.universe()).unwrap();
    match mcmi(&pure, &p, &h) {
        Err(LabError::Singularity { what, .. }) => assert!(what.starts_with("sigma_")),
        other => panic!("expected a singularity, got {other:?}"),
    }
}

#[test]
fn partitions_are_validated() {
    let u = r(&[0, 1, 2]);
    assert!(Partition4::new(r(&[0]), r(&[0]), r(&[1, 2]), Region::empty(), &u).is_err());
    assert!(Partition4::new(r(&[0]), Region::empty(), r(&[1]), Region::empty(), &u).is_err());
    let p = Partition4::with_rest(r(&[0]), r(&[2]), Region::empty(), &u).unwrap();
    assert_eq!(p.b, r(&[1]));
    assert_eq!(p.swapped().a, r(&[2]));
}

#[test]
fn fit_recovers_exact_exponentials() {
    let samples: Vec<(usize, f64)> = (1..6).map(|d| (d, 3.0 * (-(d as f64) / 1.7).exp())).collect();
    let fit = fit_decay(&samples, 6);
    assert_eq!(fit.status, FitStatus::Ok);
    assert!((fit.xi - 1.7).abs() < 1e-12);
    assert!((fit.prefactor - 3.0).abs() < 1e-12);
    assert!((fit.k - 0.5).abs() < 1e-12);
    assert!(fit.residual < 1e-12);

    let with_floor = [(1, 0.1), (2, 0.01), (3, MCMI_FLOOR / 2.0), (4, 0.0001)];
    let fit = fit_decay(&with_floor, 4);
    assert_eq!(fit.dropped, vec![2]);
    assert_eq!(fit.status, FitStatus::Ok);
    assert_eq!(fit_decay(&[(1, 0.1), (2, 0.01)], 4).status, FitStatus::TooFewPoints);
    assert_eq!(fit_decay(&[(1, 0.0), (2, 0.0)], 4).status, FitStatus::AllZero);
    let growing = fit_decay(&[(1, 0.1), (2, 0.2), (3, 0.4)], 4);
    assert_eq!(growing.status, FitStatus::NoDecay);
    assert!(growing.xi.is_infinite());
}

#[test]
fn classical_ising_decay_matches_transfer_matrix() {
    for field in [0.0, 0.2] {
        for beta in [0.3, 0.6] {
            let h = ising(10, 1.0, field);
            let scan = decay_scan(&h, beta, &chain_family(&h).unwrap()).unwrap();
            assert_eq!(scan.fit.status, FitStatus::Ok);
            let xi = transfer_matrix_xi(beta, 1.0, field);
            let rel = (scan.fit.xi - xi).abs() / xi;
            assert!(rel <= 0.25, "β = {beta}, h = {field}: fitted {} vs {xi}", scan.fit.xi);
        }
    }
}

#[test]
fn transfer_matrix_oracle_matches_zero_field_closed_form() {
    for beta in [0.3f64, 0.6, 1.1] {
        let closed = -1.0 / beta.tanh().ln();
        assert!((transfer_matrix_xi(beta, 1.0, 0.0) - closed).abs() < 1e-12);
    }
}

#[test]
fn high_temperature_pauli_decay_beats_predicted_rate() {
    let h = ising(6, 1.0, 0.5);
    let rate = predicted_mcmi_rate(&h, 1.0).unwrap();
    let beta = rate.threshold / 3.0;
    let predicted = predicted_mcmi_rate(&h, beta).unwrap();
    assert!(predicted.admissible);
    let scan = decay_scan(&h, beta, &chain_family(&h).unwrap()).unwrap();
    assert_eq!(scan.fit.status, FitStatus::Ok);
    assert!(1.0 / scan.fit.xi >= predicted.mu - 0.1, "1/ξ = {} vs μ = {}", 1.0 / scan.fit.xi, predicted.mu);
}

#[test]
fn classical_mcmi_closed_forms() {
    let free = ising(4, 0.0, 0.7);
    let p = Partition4::with_rest(r(&[0]), r(&[2, 3]), r(&[1]), free.universe()).unwrap();
    let c = classical_mcmi(&free, 1.3, &[], &p).unwrap();
    assert!(c.value.abs() < 1e-14 && c.chained_bound.abs() < 1e-14);

    let (beta, j) = (0.8, 1.0);
    let pair = ising(2, j, 0.0);
    let p = Partition4::with_rest(r(&[0]), r(&[1]), Region::empty(), pair.universe()).unwrap();
    let c = classical_mcmi(&pair, beta, &[], &p).unwrap();
    // log p(a, c) / (p(a) p(c)) = βJac − log cosh βJ with uniform single-site marginals.
    let expected = beta * j + (beta * j).cosh().ln();
    assert!((c.value - expected).abs() < 1e-13);
    assert!((c.chained_bound - expected).abs() < 1e-13);

    let quantum = LocalHamiltonian::cluster_chain(3, 1.0).unwrap();
    let p = Partition4::with_rest(r(&[0]), r(&[2]), Region::empty(), quantum.universe()).unwrap();
    assert!(matches!(classical_mcmi(&quantum, 1.0, &[], &p), Err(LabError::Capability(_))));
}

#[test]
fn chained_bound_dominates_and_boundary_fields_enter() {
    let h = ising(5, 1.0, 0.1);
    let p = Partition4::with_rest(r(&[0]), r(&[3, 4]), Region::empty(), h.universe()).unwrap();
    let free = classical_mcmi(&h, 0.7, &[], &p).unwrap();
    assert!(free.value > 1e-3);
    assert!(free.value <= free.chained_bound + 1e-12);
    let boundary: Vec<Vec<f64>> = (0..5).map(|i| if i == 4 { vec![-2.0, 2.0] } else { vec![0.0, 0.0] }).collect();
    let pinned = classical_mcmi(&h, 0.7, &boundary, &p).unwrap();
    assert!((pinned.value - free.value).abs() > 1e-6);
}

#[test]
fn quantum_mcmi_of_diagonal_states_is_classical() {
    let h = ising(5, 0.9, 0.35);
    let sigma = h.gibbs_state(h.universe(), 0.7).unwrap();
    let parts = [
        (vec![0], vec![4], vec![]),
        (vec![0], vec![3], vec![2]),
        (vec![1], vec![3, 4], vec![2]),
        (vec![0, 1], vec![4], vec![3]),
    ];
    for (a, c, d) in parts {
        let p = Partition4::with_rest(r(&a), r(&c), r(&d), h.universe()).unwrap();
        let q = mcmi(&sigma, &p, &h).unwrap().h_norm;
        let cl = classical_mcmi(&h, 0.7, &[], &p).unwrap().value;
        assert!((q - cl).abs() < 1e-9, "{p:?}: {q} vs {cl}");
    }
}

fn random_partition(n: usize, labels: &[u8]) -> Option<Partition4> {
    let pick = |k: u8| -> Region { (0..n).filter(|&i| labels[i] % 4 == k).collect() };
    let (a, b, c, d) = (pick(0), pick(1), pick(2), pick(3));
    if a.is_empty() || c.is_empty() {
        return None;
    }
    Partition4::new(a, b, c, d, &(0..n).collect()).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn norm_is_symmetric_under_swapping(labels in proptest::collection::vec(any::<u8>(), 4), seed in any::<u64>()) {
        let h = ising(4, 1.0, 0.0);
        let mut rng = seeded_rng(seed);
        let sigma = random_mixed_state(&h.full_register(), 0.4, &mut rng);
        if let Some(p) = random_partition(4, &labels) {
            let a = mcmi(&sigma, &p, &h).unwrap();
            let b = mcmi(&sigma, &p.swapped(), &h).unwrap();
            prop_assert!((a.h_norm - b.h_norm).abs() < 1e-9);
            prop_assert!((a.cmi - a.cmi_entropy_form).abs() < 1e-8);
            prop_assert!(a.cmi <= a.h_norm + 1e-8);
        }
    }

    #[test]
    fn gibbs_states_satisfy_strong_subadditivity(
        labels in proptest::collection::vec(any::<u8>(), 5),
        beta in 0.0f64..2.0,
        field in -1.0f64..1.0,
    ) {
        let h = LocalHamiltonian::pauli_chain(5, &[("ZZ", 1.0), ("Z", field)]).unwrap();
        let sigma = h.gibbs_state(h.universe(), beta).unwrap();
        if let Some(p) = random_partition(5, &labels) {
            let rep = mcmi(&sigma, &p, &h).unwrap();
            prop_assert!(rep.cmi >= -1e-8);
            prop_assert!(rep.cmi <= rep.h_norm + 1e-8);
            let scan = decay_scan_state(&sigma, &h, std::slice::from_ref(&p)).unwrap();
            prop_assert_eq!(scan.reports.len(), 1);
        }
    }
}
