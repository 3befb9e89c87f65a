//! Models, Gibbs states and effective Hamiltonians against closed forms and
//! brute-force oracles.

use std::f64::consts::E;

use davies_lab::models::{
    pauli, pauli_string, predicted_mcmi_rate, predicted_rate_from_constants, EffectiveHamiltonians, ModelKind,
};
use davies_lab::opcore::{max_abs, op_norm_herm, seeded_rng, CMat, C64, ZERO};
use davies_lab::{LabError, Lattice, LocalHamiltonian, Metric, ModelSpec, Operator, Region};
use proptest::prelude::*;

fn diag(v: &[f64]) -> CMat {
    CMat::from_fn(v.len(), v.len(), |i, j| if i == j { C64::new(v[i], 0.0) } else { ZERO })
}

fn spec(json: &str) -> ModelSpec {
    serde_json::from_str(json).unwrap()
}

fn chain_model(n: usize, terms: Vec<(Vec<usize>, CMat)>) -> davies_lab::Result<LocalHamiltonian> {
    let lat = Lattice::new(1, n / 2).unwrap();
    let universe = Region::new((0..n).collect());
    let terms = terms.into_iter().map(|(s, m)| (Region::new(s), m)).collect();
    LocalHamiltonian::from_terms(lat, universe, 2, Metric::Chebyshev, terms, true)
}

#[test]
fn ising_chain_metadata() {
    let h = LocalHamiltonian::ising_chain(4, 1.0, 0.0).unwrap();
    let m = h.meta();
    assert_eq!((m.kappa, m.r, m.g), (2, 1, 2));
    assert_eq!(m.j, 1.0);
    assert!(h.is_diagonal() && h.is_marginal_commuting());
    assert_eq!(h.kind(), ModelKind::Ising);
    assert_eq!(h.terms().len(), 3);
    let with_field = LocalHamiltonian::ising_chain(4, 1.0, 0.5).unwrap();
    assert_eq!(with_field.meta().g, 3);
}

#[test]
fn overlapping_commuting_strings_are_accepted() {
    let h = chain_model(3, vec![(vec![0, 1], pauli_string("ZZ").unwrap()), (vec![1, 2], pauli_string("ZZ").unwrap())]);
    assert!(h.is_ok());
    let cluster = LocalHamiltonian::cluster_chain(5, 1.0).unwrap();
    assert!(!cluster.is_diagonal());
    assert!(cluster.is_marginal_commuting());
}

#[test]
fn anticommuting_terms_are_rejected() {
    let err = chain_model(2, vec![(vec![0], pauli('X').unwrap()), (vec![0, 1], pauli_string("ZI").unwrap())]);
    match err {
        Err(LabError::Model(msg)) => assert!(msg.contains("do not commute"), "{msg}"),
        other => panic!("expected a model error, got {other:?}"),
    }
}

#[test]
fn spec_validation() {
    let bad_range = r#"{"type":"pauli","D":1,"L":2,"range":1,
        "terms":[{"sites":[[-2],[0]],"pauli":"ZZ"}]}"#;
    assert!(matches!(LocalHamiltonian::build(&spec(bad_range)), Err(LabError::Model(_))));
    let outside = r#"{"type":"pauli","D":1,"L":1,"terms":[{"sites":[[5]],"pauli":"Z"}]}"#;
    assert!(matches!(LocalHamiltonian::build(&spec(outside)), Err(LabError::Model(_))));
    let unknown = r#"{"type":"ising","D":1,"L":1,"couplings":{"J":1.0},"colour":"red"}"#;
    assert!(serde_json::from_str::<ModelSpec>(unknown).is_err());
    let explicit = r#"{"type":"terms","D":1,"L":1,"terms":[
        {"sites":[[1],[0]],"matrix":{"re":[[1,0,0,0],[0,2,0,0],[0,0,3,0],[0,0,0,4]]}}]}"#;
    let h = LocalHamiltonian::build(&spec(explicit)).unwrap();
    // Written on (site 2, site 1); stored in increasing site order.
    assert_eq!(h.terms()[0].support, Region::new(vec![1, 2]));
    assert!(max_abs(&(h.terms()[0].op.mat() - diag(&[1.0, 3.0, 2.0, 4.0]))) == 0.0);
}

#[test]
fn corner_boundary_on_square_grid() {
    let grid = spec(r#"{"type":"ising","D":2,"L":1,"couplings":{"J":1.0}}"#);
    let h = LocalHamiltonian::build(&grid).unwrap();
    let lat = h.lattice();
    let corner = lat.index_of(&[-1, -1]).unwrap();
    let expected: Region = [[-1, 0], [0, -1]].iter().map(|c| lat.index_of(c).unwrap()).collect();
    assert_eq!(h.boundary(&Region::new(vec![corner])), expected);
    assert!(h.boundary(h.universe()).is_empty());
}

#[test]
fn local_norm_estimate() {
    let h = LocalHamiltonian::ising_chain(5, 0.7, 0.4).unwrap();
    let m = h.meta();
    for sites in [vec![0], vec![1, 2], vec![0, 1, 2, 3, 4]] {
        let r = Region::new(sites);
        let n = op_norm_herm(h.hamiltonian_on(&r).unwrap().mat());
        assert!(n <= m.g as f64 * m.j * r.len() as f64 + 1e-12);
    }
}

#[test]
fn gibbs_state_closed_forms() {
    let h = LocalHamiltonian::ising_chain(3, 1.0, 0.3).unwrap();
    let flat = h.gibbs_state(h.universe(), 0.0).unwrap();
    assert!(max_abs(&(flat.mat() - CMat::identity(8, 8).scale(0.125))) < 1e-15);
    assert!(h.gibbs_state(h.universe(), -1.0).is_err());

    let single = chain_model(1, vec![(vec![0], pauli('Z').unwrap())]).unwrap();
    for beta in [0.0, 0.4, 3.0, 800.0] {
        let sigma = single.gibbs_state(single.universe(), beta).unwrap();
        // Written through the logistic form so large β stays finite.
        let low = 1.0 / (1.0 + (2.0 * beta).exp());
        let expected = diag(&[low, 1.0 - low]);
        assert!(max_abs(&(sigma.mat() - expected)) < 1e-14, "β = {beta}");
    }
}

#[test]
fn middle_marginal_matches_transfer_matrix() {
    let (j, field, beta) = (1.0, 0.3, 1.0);
    let h = LocalHamiltonian::ising_chain(3, j, field).unwrap();
    let marginal = h.gibbs_marginal(&Region::new(vec![1]), beta).unwrap();
    // Spin +1 is basis state 0 (Z eigenvalue +1).
    let spins = [1.0, -1.0];
    let t = |a: usize, b: usize| (beta * j * spins[a] * spins[b]).exp();
    let f = |a: usize| (beta * field * spins[a]).exp();
    let left = |s: usize| (0..2).map(|a| f(a) * t(a, s)).sum::<f64>();
    let right = |s: usize| (0..2).map(|b| t(s, b) * f(b)).sum::<f64>();
    let w: Vec<f64> = (0..2).map(|s| left(s) * f(s) * right(s)).collect();
    let z: f64 = w.iter().sum();
    let expected = diag(&[w[0] / z, w[1] / z]);
    assert!(max_abs(&(marginal.mat() - expected)) < 1e-10);
}

#[test]
fn interaction_norm_examples() {
    let pair = chain_model(2, vec![(vec![0, 1], pauli_string("ZZ").unwrap().scale(1.5))]).unwrap();
    assert!((pair.interaction_norm(0.7) - 1.5 * 0.7f64.exp()).abs() < 1e-14);
    let chain = LocalHamiltonian::ising_chain(5, 1.0, 0.0).unwrap();
    assert!((chain.interaction_norm(1.0) - 2.0 * E).abs() < 1e-14);
    assert!((chain.interaction_norm(0.0) - 2.0).abs() < 1e-14);
    let short = LocalHamiltonian::ising_chain(2, 1.0, 0.0).unwrap();
    assert!((short.interaction_norm(1.0) - E).abs() < 1e-14);
}

#[test]
fn predicted_rate_formula() {
    let h = LocalHamiltonian::ising_chain(4, 1.0, 0.0).unwrap();
    let at = predicted_mcmi_rate(&h, 1.0).unwrap();
    // Independent arithmetic: κ = 2, g = 2, J = 1 gives 1 / (4 · 5 · e² · 2).
    let threshold = 1.0 / (40.0 * E * E);
    assert!((at.threshold - threshold).abs() < 1e-15 * threshold);
    let edge = predicted_mcmi_rate(&h, threshold).unwrap();
    assert!(edge.mu.abs() < 1e-12);
    assert!(!edge.admissible);
    let one = predicted_mcmi_rate(&h, threshold / E).unwrap();
    assert!((one.mu - 1.0).abs() < 1e-12);
    assert!(one.admissible);
    let wide = predicted_rate_from_constants(3.0, 2.0, 0.5, 2.0, 1e-4);
    let expected = (1.0 / (6.0 * 7.0 * E * E * 2.0 * 0.5 * 1e-4)).ln() / 2.0;
    assert!((wide.mu - expected).abs() < 1e-12);

    let lat = Lattice::new(1, 0).unwrap();
    let generic = LocalHamiltonian::from_terms(
        lat,
        Region::new(vec![0]),
        2,
        Metric::Chebyshev,
        vec![(Region::new(vec![0]), pauli('X').unwrap())],
        false,
    )
    .unwrap();
    assert!(matches!(predicted_mcmi_rate(&generic, 0.1), Err(LabError::Capability(_))));
}

#[test]
fn effective_hamiltonians_at_infinite_temperature_are_scalar() {
    let h = LocalHamiltonian::cluster_chain(4, 1.0).unwrap();
    let eff = EffectiveHamiltonians::compute(&h, 0.0).unwrap();
    for mask in 1..16 {
        let x = eff.region_of(mask);
        assert!(max_abs(&eff.local(h.universe(), &x).unwrap()) < 1e-12, "{x:?}");
    }
}

#[test]
fn effective_hamiltonian_of_everything_is_minus_beta_h() {
    let h = LocalHamiltonian::cluster_chain(4, 0.8).unwrap();
    let beta = 0.6;
    let eff = EffectiveHamiltonians::compute(&h, beta).unwrap();
    let full = eff.full(h.universe()).unwrap();
    let target = h.hamiltonian().unwrap().into_mat().scale(-beta);
    let diff = full - &target;
    // Equal up to a multiple of the identity.
    let shift = diff[(0, 0)];
    assert!(max_abs(&(diff - CMat::identity(16, 16) * shift)) < 1e-10);
}

#[test]
fn effective_hamiltonian_conditions_on_pauli_models() {
    let models = [
        LocalHamiltonian::cluster_chain(4, 1.0).unwrap(),
        LocalHamiltonian::pauli_chain(4, &[("ZZ", 1.0), ("X", 0.0), ("Z", 0.4)]).unwrap(),
        LocalHamiltonian::pauli_chain(4, &[("XX", 0.7), ("XIX", -0.5)]).unwrap(),
    ];
    for h in &models {
        for beta in [0.05, 0.3] {
            let eff = EffectiveHamiltonians::compute(h, beta).unwrap();
            assert!(eff.support_residual().unwrap() < 1e-8);
            assert!(eff.consistency_residual() < 1e-8);
            assert!(eff.reconstruction_residual(h).unwrap() < 1e-8);
        }
    }
}

#[test]
fn effective_hamiltonians_respect_the_size_cap() {
    let h = LocalHamiltonian::ising_chain(9, 1.0, 0.0).unwrap();
    assert!(matches!(EffectiveHamiltonians::compute(&h, 0.1), Err(LabError::Capability(_))));
}

#[test]
fn effective_hamiltonian_exponentiates_to_the_marginal() {
    let h = LocalHamiltonian::ising_chain(4, 1.0, 0.2).unwrap();
    let beta = 0.5;
    let eff = EffectiveHamiltonians::compute(&h, beta).unwrap();
    let sigma = h.gibbs_state(h.universe(), beta).unwrap();
    let a = Region::new(vec![1, 2]);
    let expo = davies_lab::opcore::exp_herm(eff.full(&a).unwrap());
    let expo = Operator::new(eff.register().clone(), expo).unwrap();
    let compressed = sigma.normalized_partial_trace(&Region::new(vec![0, 3])).unwrap();
    let ratio = compressed.mat()[(0, 0)].re / expo.mat()[(0, 0)].re;
    assert!(max_abs(&(expo.mat().scale(ratio) - compressed.mat())) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_diagonal_models_commute_and_report_growth(seed in any::<u64>(), n in 2usize..6) {
        use rand::Rng;
        let mut rng = seeded_rng(seed);
        let mut terms = Vec::new();
        for i in 0..n - 1 {
            let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            terms.push((vec![i, i + 1], diag(&v)));
        }
        let h = chain_model(n, terms).unwrap();
        prop_assert!(h.is_diagonal());
        let g = h.meta().g;
        prop_assert!(g <= 2);
        for t in h.terms() {
            prop_assert!(t.norm <= h.meta().j + 1e-15);
        }
        let sigma = h.gibbs_state(h.universe(), 1.0).unwrap();
        prop_assert!(sigma.check_density().is_ok());
    }
}
