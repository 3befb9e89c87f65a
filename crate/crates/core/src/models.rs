//! Local commuting Hamiltonians, Gibbs states, effective Hamiltonians and the
//! interaction norm.
//!
//! A [`LocalHamiltonian`] is a map from supports `A` to Hermitian terms `h_A`
//! on the sites of `A`, living on a set of physical sites (its universe) of a
//! hypercubic [`Lattice`]. The inverse temperature is an argument of the
//! operations rather than part of the model, so one model serves a sweep.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::{self, Lattice, Metric, Region};
use crate::opcore::{
    commutator, eigh, exp_herm, from_eigen, funm_herm, is_diagonal, log_pd, max_abs, op_norm, op_norm_herm,
    CMat, Operator, Register, C64, ONE, TAU_COMMUTE, ZERO,
};

/// Single-qubit Pauli matrix for `'I'`, `'X'`, `'Y'` or `'Z'`.
pub fn pauli(c: char) -> Result<CMat> {
    let i = C64::new(0.0, 1.0);
    Ok(match c.to_ascii_uppercase() {
        'I' => CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
        'X' => CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        'Y' => CMat::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        'Z' => CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        other => return Err(LabError::Model(format!("unknown Pauli letter `{other}`"))),
    })
}

/// Tensor product of Pauli letters, first letter most significant.
pub fn pauli_string(s: &str) -> Result<CMat> {
    let mut out = CMat::identity(1, 1);
    for c in s.chars() {
        out = out.kronecker(&pauli(c)?);
    }
    Ok(out)
}

/// A non-zero local term `h_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    /// Support `A`.
    pub support: Region,
    /// The term as an operator on the register of `A`.
    pub op: Operator,
    /// Operator norm `‖h_A‖_∞`.
    pub norm: f64,
}

/// Locality constants computed when a model is built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    /// Largest support size `κ`.
    pub kappa: usize,
    /// Largest support diameter `r` (at least one).
    pub r: usize,
    /// Largest term norm `J`.
    pub j: f64,
    /// Growth constant `g`: the largest number of terms touching one site.
    pub g: usize,
}

/// Kind of model, which also fixes the marginal-commuting flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Classical Ising model `−Σ J_xy Z_x Z_y − Σ h_x Z_x`.
    Ising,
    /// Commuting Pauli strings.
    Pauli,
    /// Explicit list of term matrices.
    Terms,
}

/// Boundary conditions; only open boundaries are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Open boundary conditions.
    #[default]
    Open,
}

/// One coupling override of an Ising model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeCoupling {
    /// First endpoint.
    pub a: Vec<i64>,
    /// Second endpoint.
    pub b: Vec<i64>,
    /// Coupling strength.
    pub j: f64,
}

/// Couplings of an Ising model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingCouplings {
    /// Uniform nearest-neighbour coupling.
    #[serde(rename = "J", default)]
    pub j: f64,
    /// Uniform longitudinal field.
    #[serde(default)]
    pub h: f64,
    /// Per-edge overrides of the uniform coupling.
    #[serde(default)]
    pub edges: Vec<EdgeCoupling>,
}

/// Matrix given as real and optional imaginary rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    /// Real parts by row.
    pub re: Vec<Vec<f64>>,
    /// Imaginary parts by row (zero when omitted).
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixSpec {
    fn to_matrix(&self) -> Result<CMat> {
        let n = self.re.len();
        let im_ok = self.im.as_ref().map_or(true, |im| im.len() == n && im.iter().all(|r| r.len() == n));
        if self.re.iter().any(|r| r.len() != n) || !im_ok {
            return Err(LabError::Model("term matrix must be square".into()));
        }
        Ok(CMat::from_fn(n, n, |i, j| {
            C64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        }))
    }
}

/// One term of a Pauli or explicit model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// Sites the term is written on, in the order of the tensor factors.
    pub sites: Vec<Vec<i64>>,
    /// Pauli letters, one per site (Pauli models).
    #[serde(default)]
    pub pauli: Option<String>,
    /// Prefactor of the Pauli string (default one).
    #[serde(default)]
    pub coeff: Option<f64>,
    /// Explicit matrix (term-list models).
    #[serde(default)]
    pub matrix: Option<MatrixSpec>,
}

/// JSON description of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Model family.
    #[serde(rename = "type")]
    pub kind: ModelKind,
    /// Spatial dimension.
    #[serde(rename = "D")]
    pub dim: usize,
    /// Half side `L` of the lattice `⟦−L, L⟧^D`.
    #[serde(rename = "L")]
    pub half_side: usize,
    /// Local dimension.
    #[serde(default = "default_d")]
    pub d: usize,
    /// Physical sites when the model lives on part of the lattice.
    #[serde(default)]
    pub sites: Option<Vec<Vec<i64>>>,
    /// Boundary conditions.
    #[serde(default)]
    pub boundary: Boundary,
    /// Ising couplings.
    #[serde(default)]
    pub couplings: Option<IsingCouplings>,
    /// Pauli or explicit terms.
    #[serde(default)]
    pub terms: Vec<TermSpec>,
    /// Declared interaction range; terms wider than this are rejected.
    #[serde(default)]
    pub range: Option<usize>,
    /// Metric for diameters.
    #[serde(default)]
    pub metric: Metric,
}

fn default_d() -> usize {
    2
}

/// A local Hamiltonian with commuting terms.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalHamiltonian {
    kind: ModelKind,
    lattice: Lattice,
    universe: Region,
    d: usize,
    metric: Metric,
    terms: Vec<Term>,
    meta: ModelMeta,
    marginal_commuting: bool,
}

impl LocalHamiltonian {
    /// Build a model from its JSON description.
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        let lattice = Lattice::new(spec.dim, spec.half_side).map_err(|e| LabError::Model(e.to_string()))?;
        let universe = match &spec.sites {
            Some(s) => lattice.region_from_coords(s).map_err(|e| LabError::Model(e.to_string()))?,
            None => lattice.full_region(),
        };
        if universe.is_empty() {
            return Err(LabError::Model("model without sites".into()));
        }
        let to_region = |coords: &[Vec<i64>]| -> Result<Vec<usize>> {
            coords
                .iter()
                .map(|c| {
                    let s = lattice
                        .index_of(c)
                        .ok_or_else(|| LabError::Model(format!("site {c:?} outside the lattice")))?;
                    if !universe.contains(s) {
                        return Err(LabError::Model(format!("site {c:?} outside the model sites")));
                    }
                    Ok(s)
                })
                .collect()
        };
        let mut raw: Vec<(Vec<usize>, CMat)> = Vec::new();
        match spec.kind {
            ModelKind::Ising => {
                if spec.d != 2 {
                    return Err(LabError::Model("Ising models need d = 2".into()));
                }
                let c = spec.couplings.clone().ok_or_else(|| LabError::Model("Ising model without couplings".into()))?;
                let mut overrides = BTreeMap::new();
                for e in &c.edges {
                    let ab = to_region(&[e.a.clone(), e.b.clone()])?;
                    if Metric::Manhattan.eval(&lattice.coord(ab[0]), &lattice.coord(ab[1])) != 1 {
                        return Err(LabError::Model(format!("edge {:?}-{:?} is not nearest-neighbour", e.a, e.b)));
                    }
                    overrides.insert((ab[0].min(ab[1]), ab[0].max(ab[1])), e.j);
                }
                let zz = pauli_string("ZZ")?;
                let z = pauli('Z')?;
                for x in universe.iter() {
                    for y in universe.iter().filter(|&y| y > x) {
                        if Metric::Manhattan.eval(&lattice.coord(x), &lattice.coord(y)) == 1 {
                            let j = overrides.get(&(x, y)).copied().unwrap_or(c.j);
                            if j != 0.0 {
                                raw.push((vec![x, y], zz.scale(-j)));
                            }
                        }
                    }
                    if c.h != 0.0 {
                        raw.push((vec![x], z.scale(-c.h)));
                    }
                }
            }
            ModelKind::Pauli => {
                if spec.d != 2 {
                    return Err(LabError::Model("Pauli models need d = 2".into()));
                }
                for t in &spec.terms {
                    let letters = t.pauli.as_ref().ok_or_else(|| LabError::Model("Pauli term without letters".into()))?;
                    if letters.chars().count() != t.sites.len() {
                        return Err(LabError::Model(format!("Pauli string `{letters}` does not match its sites")));
                    }
                    let sites = to_region(&t.sites)?;
                    let mut kept: Vec<(usize, char)> =
                        sites.into_iter().zip(letters.chars()).filter(|(_, c)| c.to_ascii_uppercase() != 'I').collect();
                    if kept.is_empty() {
                        continue;
                    }
                    kept.sort_by_key(|(s, _)| *s);
                    if kept.windows(2).any(|w| w[0].0 == w[1].0) {
                        return Err(LabError::Model("Pauli term repeats a site".into()));
                    }
                    let s: String = kept.iter().map(|(_, c)| *c).collect();
                    let m = pauli_string(&s)?.scale(t.coeff.unwrap_or(1.0));
                    raw.push((kept.into_iter().map(|(s, _)| s).collect(), m));
                }
            }
            ModelKind::Terms => {
                for t in &spec.terms {
                    let m = t
                        .matrix
                        .as_ref()
                        .ok_or_else(|| LabError::Model("explicit term without matrix".into()))?
                        .to_matrix()?;
                    let sites = to_region(&t.sites)?;
                    raw.push((sites, m));
                }
            }
        }
        let mut terms = Vec::new();
        for (sites, m) in raw {
            terms.push(reorder_term(&sites, m, spec.d)?);
        }
        let marginal_commuting = match spec.kind {
            ModelKind::Ising | ModelKind::Pauli => true,
            ModelKind::Terms => terms.iter().all(|(_, m)| is_diagonal(m)),
        };
        Self::assemble(spec.kind, lattice, universe, spec.d, spec.metric, terms, spec.range, marginal_commuting)
    }

    /// Build a model from explicit `(support, matrix)` terms whose matrices are
    /// ordered by increasing site index.
    pub fn from_terms(
        lattice: Lattice,
        universe: Region,
        d: usize,
        metric: Metric,
        terms: Vec<(Region, CMat)>,
        marginal_commuting: bool,
    ) -> Result<Self> {
        let raw = terms.into_iter().map(|(r, m)| (r.sites().to_vec(), m)).collect();
        Self::assemble(ModelKind::Terms, lattice, universe, d, metric, raw, None, marginal_commuting)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: ModelKind,
        lattice: Lattice,
        universe: Region,
        d: usize,
        metric: Metric,
        raw: Vec<(Vec<usize>, CMat)>,
        range: Option<usize>,
        marginal_commuting: bool,
    ) -> Result<Self> {
        // Merge terms sharing a support.
        let mut merged: BTreeMap<Vec<usize>, CMat> = BTreeMap::new();
        for (sites, m) in raw {
            let reg = Register::new(sites.clone(), d)?;
            if m.nrows() != reg.dim() || m.ncols() != reg.dim() {
                return Err(LabError::Model(format!("term on {sites:?} has wrong size {}", m.nrows())));
            }
            if crate::opcore::herm_error(&m) > 1e-12 {
                return Err(LabError::Model(format!("term on {sites:?} is not Hermitian")));
            }
            if !sites.iter().all(|s| universe.contains(*s)) {
                return Err(LabError::Model(format!("term on {sites:?} leaves the model sites")));
            }
            merged.entry(sites).and_modify(|acc| *acc += &m).or_insert(m);
        }
        let mut terms = Vec::new();
        for (sites, m) in merged {
            let norm = op_norm_herm(&m);
            if norm <= 1e-14 {
                continue;
            }
            let support = Region::new(sites.clone());
            let op = Operator::new(Register::new(sites, d)?, m)?;
            terms.push(Term { support, op, norm });
        }
        let mut kappa = 0;
        let mut r = 1;
        let mut j: f64 = 0.0;
        let mut count = BTreeMap::new();
        for t in &terms {
            kappa = kappa.max(t.support.len());
            let diam = lattice.diameter(&t.support, metric);
            if let Some(limit) = range {
                if diam > limit {
                    return Err(LabError::Model(format!(
                        "term on {:?} has diameter {diam} beyond the range {limit}",
                        t.support.sites()
                    )));
                }
            }
            r = r.max(diam);
            j = j.max(t.norm);
            for s in t.support.iter() {
                *count.entry(s).or_insert(0usize) += 1;
            }
        }
        let g = count.values().copied().max().unwrap_or(0);
        // Commutation gate on overlapping pairs.
        for (a, ta) in terms.iter().enumerate() {
            for tb in terms.iter().skip(a + 1) {
                if ta.support.is_disjoint(&tb.support) {
                    continue;
                }
                let reg = ta.op.register().union(tb.op.register())?;
                let c = commutator(ta.op.embed(&reg)?.mat(), tb.op.embed(&reg)?.mat());
                let n = op_norm(&c);
                if n > TAU_COMMUTE {
                    return Err(LabError::Model(format!(
                        "terms on {:?} and {:?} do not commute: commutator norm {n:e}",
                        ta.support.sites(),
                        tb.support.sites()
                    )));
                }
            }
        }
        Ok(Self {
            kind,
            lattice,
            universe,
            d,
            metric,
            terms,
            meta: ModelMeta { kappa, r, j, g },
            marginal_commuting,
        })
    }

    /// Open Ising chain of `n` sites, `−J Σ Z_i Z_{i+1} − h Σ Z_i`.
    pub fn ising_chain(n: usize, j: f64, h: f64) -> Result<Self> {
        let spec = ModelSpec {
            kind: ModelKind::Ising,
            dim: 1,
            half_side: n / 2,
            d: 2,
            sites: Some(chain_sites(n)),
            boundary: Boundary::Open,
            couplings: Some(IsingCouplings { j, h, edges: vec![] }),
            terms: vec![],
            range: None,
            metric: Metric::Chebyshev,
        };
        Self::build(&spec)
    }

    /// Open chain of `n` sites with the given Pauli strings `(offset sites, letters, coefficient)`
    /// placed at every position where they fit.
    pub fn pauli_chain(n: usize, pattern: &[(&str, f64)]) -> Result<Self> {
        let sites = chain_sites(n);
        let mut terms = Vec::new();
        for &(letters, coeff) in pattern {
            let w = letters.chars().count();
            for start in 0..=n.saturating_sub(w) {
                terms.push(TermSpec {
                    sites: sites[start..start + w].to_vec(),
                    pauli: Some(letters.to_string()),
                    coeff: Some(coeff),
                    matrix: None,
                });
            }
        }
        let spec = ModelSpec {
            kind: ModelKind::Pauli,
            dim: 1,
            half_side: n / 2,
            d: 2,
            sites: Some(sites),
            boundary: Boundary::Open,
            couplings: None,
            terms,
            range: None,
            metric: Metric::Chebyshev,
        };
        Self::build(&spec)
    }

    /// Cluster-state chain `Σ Z X Z` with boundary terms `X Z` and `Z X`,
    /// a commuting Pauli model with non-diagonal terms.
    pub fn cluster_chain(n: usize, coeff: f64) -> Result<Self> {
        let sites = chain_sites(n);
        let mut terms = vec![];
        let mut push = |from: usize, letters: &str| {
            terms.push(TermSpec {
                sites: sites[from..from + letters.len()].to_vec(),
                pauli: Some(letters.into()),
                coeff: Some(-coeff),
                matrix: None,
            })
        };
        if n >= 2 {
            push(0, "XZ");
            push(n - 2, "ZX");
        }
        for s in 0..n.saturating_sub(2) {
            push(s, "ZXZ");
        }
        let spec = ModelSpec {
            kind: ModelKind::Pauli,
            dim: 1,
            half_side: n / 2,
            d: 2,
            sites: Some(sites),
            boundary: Boundary::Open,
            couplings: None,
            terms,
            range: None,
            metric: Metric::Chebyshev,
        };
        Self::build(&spec)
    }

    /// Model family.
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Ambient lattice.
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Physical sites `Λ`.
    pub fn universe(&self) -> &Region {
        &self.universe
    }

    /// Number of physical sites.
    pub fn n_sites(&self) -> usize {
        self.universe.len()
    }

    /// Local dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Metric used for diameters and distances.
    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Non-zero terms ordered by support.
    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Locality constants `(κ, r, J, g)`.
    pub fn meta(&self) -> ModelMeta {
        self.meta
    }

    /// True for models whose marginals commute (Pauli, Ising, diagonal).
    pub fn is_marginal_commuting(&self) -> bool {
        self.marginal_commuting
    }

    /// True when every term is diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| is_diagonal(t.op.mat()))
    }

    /// Register over a region.
    pub fn register(&self, region: &Region) -> Register {
        Register::from_region(region, self.d).expect("valid local dimension")
    }

    /// Register over all physical sites.
    pub fn full_register(&self) -> Register {
        self.register(&self.universe)
    }

    /// Supports of the non-zero terms.
    pub fn supports(&self) -> Vec<Region> {
        self.terms.iter().map(|t| t.support.clone()).collect()
    }

    /// `∂R` through the terms of this model.
    pub fn boundary(&self, region: &Region) -> Region {
        let supports = self.supports();
        lattice::boundary(&self.lattice, region, self.meta.r, self.metric, Some(&supports), Some(&self.universe))
    }

    /// `R∂ = R ∪ ∂R`.
    pub fn closure(&self, region: &Region) -> Region {
        region.union(&self.boundary(region))
    }

    /// `H_R = Σ_{A ⊆ R} h_A` on the register of `R`.
    pub fn hamiltonian_on(&self, region: &Region) -> Result<Operator> {
        self.check_inside(region)?;
        let reg = self.register(region);
        let mut out = Operator::zeros(&reg);
        for t in self.terms.iter().filter(|t| t.support.is_subset(region)) {
            let e = t.op.embed(&reg)?;
            *out.mat_mut() += e.mat();
        }
        Ok(out)
    }

    /// `H_Λ` on all physical sites.
    pub fn hamiltonian(&self) -> Result<Operator> {
        self.hamiltonian_on(&self.universe)
    }

    /// Sum of the terms touching site `k`, on the register of `k∂`.
    pub fn site_hamiltonian(&self, k: usize) -> Result<Operator> {
        let region = self.closure(&Region::new(vec![k]));
        let reg = self.register(&region);
        let mut out = Operator::zeros(&reg);
        for t in self.terms.iter().filter(|t| t.support.contains(k)) {
            *out.mat_mut() += t.op.embed(&reg)?.mat();
        }
        Ok(out)
    }

    /// Gibbs state `e^{−βH_R} / tr e^{−βH_R}` on the register of `R`.
    pub fn gibbs_state(&self, region: &Region, beta: f64) -> Result<Operator> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(LabError::Domain(format!("inverse temperature {beta} must be finite and non-negative")));
        }
        let h = self.hamiltonian_on(region)?;
        Ok(h.with_mat(gibbs_matrix(h.mat(), beta).0))
    }

    /// Marginal `σ_R = tr_{Λ∖R} σ^Λ` of the global Gibbs state.
    pub fn gibbs_marginal(&self, region: &Region, beta: f64) -> Result<Operator> {
        self.check_inside(region)?;
        self.gibbs_state(&self.universe, beta)?.marginal(region)
    }

    /// Interaction norm `sup_x Σ_{X ∋ x} ‖h_X‖ e^{μ diam X}` of the terms.
    pub fn interaction_norm(&self, mu: f64) -> f64 {
        let items: Vec<(Region, f64)> = self.terms.iter().map(|t| (t.support.clone(), t.norm)).collect();
        interaction_norm(&self.lattice, self.metric, &items, mu)
    }

    /// Energy of a computational-basis configuration (diagonal models only);
    /// `config[i]` is the local state of the `i`-th physical site.
    pub fn diagonal_energy(&self, config: &[usize]) -> Result<f64> {
        if !self.is_diagonal() {
            return Err(LabError::Capability("configuration energies need a diagonal model".into()));
        }
        let mut e = 0.0;
        for t in &self.terms {
            let mut idx = 0;
            for s in t.support.iter() {
                let p = self.universe.sites().binary_search(&s).expect("term inside universe");
                idx = idx * self.d + config[p];
            }
            e += t.op.mat()[(idx, idx)].re;
        }
        Ok(e)
    }

    /// Canonical text of the model (supports and term entries) for digests.
    pub fn canonical_text(&self) -> String {
        let mut s = format!("d={};universe={:?};", self.d, self.universe.sites());
        for t in &self.terms {
            s.push_str(&format!("{:?}:", t.support.sites()));
            for z in t.op.mat().iter() {
                s.push_str(&format!("{:e},{:e};", z.re, z.im));
            }
        }
        s
    }

    fn check_inside(&self, region: &Region) -> Result<()> {
        if !region.is_subset(&self.universe) {
            return Err(LabError::Domain(format!("region {:?} leaves the model sites", region.sites())));
        }
        Ok(())
    }
}

fn chain_sites(n: usize) -> Vec<Vec<i64>> {
    let lo = -((n / 2) as i64);
    (0..n as i64).map(|i| vec![lo + i]).collect()
}

/// Permute a term written on `sites` (in the given order) into increasing site order.
fn reorder_term(sites: &[usize], m: CMat, d: usize) -> Result<(Vec<usize>, CMat)> {
    let n = sites.len();
    let dim = d.pow(n as u32);
    if m.nrows() != dim || m.ncols() != dim {
        return Err(LabError::Model(format!("term on {} sites needs a {dim}x{dim} matrix", n)));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&p| sites[p]);
    if order.windows(2).any(|w| sites[w[0]] == sites[w[1]]) {
        return Err(LabError::Model("term repeats a site".into()));
    }
    let sorted: Vec<usize> = order.iter().map(|&p| sites[p]).collect();
    // Index map from sorted-order digits to the written order.
    let map = |idx: usize| -> usize {
        let mut digits = vec![0; n];
        let mut rem = idx;
        for q in (0..n).rev() {
            digits[q] = rem % d;
            rem /= d;
        }
        let mut written = vec![0; n];
        for (q, &p) in order.iter().enumerate() {
            written[p] = digits[q];
        }
        written.iter().fold(0, |acc, &x| acc * d + x)
    };
    let perm: Vec<usize> = (0..dim).map(map).collect();
    let out = CMat::from_fn(dim, dim, |i, j| m[(perm[i], perm[j])]);
    Ok((sorted, out))
}

/// Normalized Gibbs matrix of a Hermitian `h` and `log tr e^{−βh}`.
///
/// The spectrum is shifted by its minimum before exponentiating, so the
/// computation cannot overflow.
pub fn gibbs_matrix(h: &CMat, beta: f64) -> (CMat, f64) {
    let (vals, vecs) = eigh(h);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let z: f64 = vals.iter().map(|l| (-beta * (l - min)).exp()).sum();
    let sigma = if is_diagonal(h) {
        funm_herm(h, |l| (-beta * (l - min)).exp() / z)
    } else {
        from_eigen(&vals, &vecs, |l| (-beta * (l - min)).exp() / z)
    };
    (sigma, z.ln() - beta * min)
}

/// Interaction norm `sup_x Σ_{X ∋ x} w_X e^{μ diam X}` of weighted supports.
pub fn interaction_norm(lattice: &Lattice, metric: Metric, items: &[(Region, f64)], mu: f64) -> f64 {
    let mut per_site: BTreeMap<usize, f64> = BTreeMap::new();
    for (support, w) in items {
        let weight = w * (mu * lattice.diameter(support, metric) as f64).exp();
        for s in support.iter() {
            *per_site.entry(s).or_insert(0.0) += weight;
        }
    }
    per_site.values().copied().fold(0.0, f64::max)
}

/// Closed-form MCMI decay rate for marginal-commuting models at high temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedRate {
    /// Decay rate `μ = (1/r) log(1/(gκ(1+gκ)e² gJβ))`.
    pub mu: f64,
    /// Whether `β` lies strictly below the threshold.
    pub admissible: bool,
    /// Threshold `1/(κg(1+κg)e² gJ)`.
    pub threshold: f64,
}

/// Evaluate the high-temperature MCMI decay rate of a marginal-commuting model.
pub fn predicted_mcmi_rate(h: &LocalHamiltonian, beta: f64) -> Result<PredictedRate> {
    if !h.is_marginal_commuting() {
        return Err(LabError::Capability("the decay rate needs a marginal-commuting model".into()));
    }
    let m = h.meta();
    Ok(predicted_rate_from_constants(m.kappa as f64, m.g as f64, m.j, m.r as f64, beta))
}

/// The same rate from raw constants `(κ, g, J, r, β)`.
pub fn predicted_rate_from_constants(kappa: f64, g: f64, j: f64, r: f64, beta: f64) -> PredictedRate {
    let kg = kappa * g;
    let threshold = 1.0 / (kg * (1.0 + kg) * E * E * g * j);
    let mu = (1.0 / (g * kappa * (1.0 + g * kappa) * E * E * g * j * beta)).ln() / r;
    PredictedRate { mu, admissible: beta < threshold, threshold }
}

// ---------------------------------------------------------------------------
// Effective Hamiltonians
// ---------------------------------------------------------------------------

/// Largest number of physical sites for the exhaustive effective-Hamiltonian family.
pub const EFFECTIVE_HAMILTONIAN_MAX_SITES: usize = 8;

/// Effective Hamiltonians `H̃^A = log(d_Ā^{−1} Id_Ā ⊗ tr_Ā e^{−βH})` for every
/// subset `A` of the physical sites, with their local decomposition.
///
/// The decomposition is `h̃^A_X = k(X)` for `X ⊆ A` and zero otherwise, where
/// `k(X) = Σ_{T ⊆ X} (−1)^{|X∖T|} H̃^T` is the Möbius inversion over subsets.
/// Since `H̃^T` is supported on `T`, each `k(X)` is supported on `X`, and the
/// decomposition of `A` depends on `X` only through `X ∩ A`.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonians {
    beta: f64,
    sites: Vec<usize>,
    register: Register,
    full: Vec<CMat>,
    local: Vec<CMat>,
}

impl EffectiveHamiltonians {
    /// Compute the whole family at inverse temperature `beta`.
    pub fn compute(h: &LocalHamiltonian, beta: f64) -> Result<Self> {
        let n = h.n_sites();
        if n > EFFECTIVE_HAMILTONIAN_MAX_SITES {
            return Err(LabError::Capability(format!(
                "effective Hamiltonians on {n} sites (limit {EFFECTIVE_HAMILTONIAN_MAX_SITES})"
            )));
        }
        let reg = h.full_register();
        let hmat = h.hamiltonian()?.into_mat();
        let (vals, _) = eigh(&hmat);
        let shift = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let dim = reg.dim();
        let shifted = &hmat - CMat::identity(dim, dim).scale(shift);
        let boltz = Operator::new(reg.clone(), exp_herm(&shifted.scale(-beta)))?;
        let sites = reg.sites().to_vec();
        let mut full = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let a = mask_region(&sites, mask);
            let marg = boltz.marginal(&a)?;
            let db = (dim / marg.dim()) as f64;
            let scaled = marg.mat().unscale(db);
            let log = if a.is_empty() {
                CMat::from_element(1, 1, C64::new(scaled[(0, 0)].re.ln(), 0.0))
            } else {
                log_pd(&scaled, "normalized Boltzmann marginal")?
            };
            let op = Operator::new(marg.register().clone(), log)?.embed(&reg)?;
            full.push(op.into_mat() - CMat::identity(dim, dim).scale(beta * shift));
        }
        // Möbius inversion over the subset lattice.
        let mut local = full.clone();
        for bit in 0..n {
            for mask in 0..(1usize << n) {
                if mask & (1 << bit) != 0 {
                    let lower = local[mask ^ (1 << bit)].clone();
                    local[mask] -= lower;
                }
            }
        }
        Ok(Self { beta, sites, register: reg, full, local })
    }

    /// Inverse temperature.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Register over all physical sites.
    pub fn register(&self) -> &Register {
        &self.register
    }

    /// Bit mask of a region of physical sites.
    pub fn mask_of(&self, region: &Region) -> Result<usize> {
        let mut mask = 0;
        for s in region.iter() {
            let p = self
                .sites
                .binary_search(&s)
                .map_err(|_| LabError::Domain(format!("site {s} outside the model")))?;
            mask |= 1 << p;
        }
        Ok(mask)
    }

    /// Region of a bit mask.
    pub fn region_of(&self, mask: usize) -> Region {
        mask_region(&self.sites, mask)
    }

    /// `H̃^A` on the full register.
    pub fn full(&self, a: &Region) -> Result<&CMat> {
        Ok(&self.full[self.mask_of(a)?])
    }

    /// `h̃^A_X` on the full register.
    pub fn local(&self, a: &Region, x: &Region) -> Result<CMat> {
        let (am, xm) = (self.mask_of(a)?, self.mask_of(x)?);
        Ok(self.local_masks(am, xm))
    }

    fn local_masks(&self, a: usize, x: usize) -> CMat {
        if x & !a == 0 {
            self.local[x].clone()
        } else {
            let n = self.register.dim();
            CMat::zeros(n, n)
        }
    }

    /// Largest entry of `h̃^A_X − 𝔼_{Λ∖(X∩A)}(h̃^A_X)` over all `(A, X)`:
    /// zero exactly when every term is supported in `X ∩ A`.
    pub fn support_residual(&self) -> Result<f64> {
        let n = self.sites.len();
        let mut worst: f64 = 0.0;
        for x in 0..(1usize << n) {
            let op = Operator::new(self.register.clone(), self.local[x].clone())?;
            let outside = self.region_of(((1 << n) - 1) & !x);
            let compressed = op.normalized_partial_trace(&outside)?;
            worst = worst.max(max_abs(&(op.mat() - compressed.mat())));
        }
        Ok(worst)
    }

    /// Largest `‖h̃^A_X − h̃^{A′}_X‖` over all `(A, A′, X)` with `X ∩ A = X ∩ A′`.
    pub fn consistency_residual(&self) -> f64 {
        let n = self.sites.len();
        let full = (1usize << n) - 1;
        let mut worst: f64 = 0.0;
        for x in 0..=full {
            for a in 0..=full {
                for a2 in 0..=full {
                    if x & a == x & a2 && a < a2 {
                        let diff = self.local_masks(a, x) - self.local_masks(a2, x);
                        worst = worst.max(max_abs(&diff));
                    }
                }
            }
        }
        worst
    }

    /// Largest entry of `log(d_Ā^{−1} Id_Ā ⊗ tr_Ā e^{−βH}) − Σ_X h̃^A_X` over all
    /// `A`, with the left side recomputed without spectral shifts.
    pub fn reconstruction_residual(&self, h: &LocalHamiltonian) -> Result<f64> {
        let hmat = h.hamiltonian()?.into_mat();
        let boltz = Operator::new(self.register.clone(), exp_herm(&hmat.scale(-self.beta)))?;
        let n = self.sites.len();
        let mut worst: f64 = 0.0;
        for a in 0..(1usize << n) {
            let complement = self.region_of(((1 << n) - 1) & !a);
            let direct = log_pd(boltz.normalized_partial_trace(&complement)?.mat(), "Boltzmann marginal")?;
            let mut sum = CMat::zeros(direct.nrows(), direct.ncols());
            for x in 0..(1usize << n) {
                if x & !a == 0 {
                    sum += &self.local[x];
                }
            }
            worst = worst.max(max_abs(&(direct - sum)));
        }
        Ok(worst)
    }

    /// Interaction norm `‖H̃^A‖_μ` of the decomposition of `A`.
    pub fn interaction_norm(&self, h: &LocalHamiltonian, a: &Region, mu: f64) -> Result<f64> {
        let am = self.mask_of(a)?;
        let mut items = Vec::new();
        for x in 1..(1usize << self.sites.len()) {
            if x & !am == 0 {
                items.push((self.region_of(x), op_norm_herm(&self.local[x])));
            }
        }
        Ok(interaction_norm(h.lattice(), h.metric(), &items, mu))
    }

    /// `Δ(μ) = max_A ‖H̃^A‖_μ`.
    pub fn delta(&self, h: &LocalHamiltonian, mu: f64) -> Result<f64> {
        let mut best: f64 = 0.0;
        for a in 0..(1usize << self.sites.len()) {
            best = best.max(self.interaction_norm(h, &self.region_of(a), mu)?);
        }
        Ok(best)
    }

    /// MCMI operator `H̃^{ACD} + H̃^D − H̃^{AD} − H̃^{CD}` on the full register.
    pub fn mcmi_operator(&self, a: &Region, c: &Region, d: &Region) -> Result<CMat> {
        let acd = a.union(c).union(d);
        Ok(self.full(&acd)? + self.full(d)? - self.full(&a.union(d))? - self.full(&c.union(d))?)
    }
}

fn mask_region(sites: &[usize], mask: usize) -> Region {
    Region::new(sites.iter().enumerate().filter(|(p, _)| mask & (1 << p) != 0).map(|(_, &s)| s).collect())
}
