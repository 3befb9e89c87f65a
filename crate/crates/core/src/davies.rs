//! Davies generators of commuting local Hamiltonians, their conditional
//! expectations, spectral gaps, entropy production and time evolution.
//!
//! Superoperators act on column-major vectorized operators, so the map
//! `X ↦ A X B` is the matrix `Bᵀ ⊗ A`. A generator on region `A` is stored on
//! the register of `A∂`; it acts as the identity channel elsewhere and is
//! applied to larger operators leg by leg.

use std::sync::OnceLock;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::Region;
use crate::models::LocalHamiltonian;
use crate::opcore::{
    apply_superop_local, eigh, embed_superop, from_eigen, funm_herm, hermitize, kron, log_pd, matmul, max_abs, pow_pd,
    superop_lr, trace, trace_norm, trace_product, unvectorize, vectorize, CMat, Operator, Register, C64, ONE, ZERO,
};

/// Clustering tolerance for eigenvalues and Bohr frequencies.
pub const BOHR_TOL: f64 = 1e-9;
/// Largest register dimension with a dense superoperator.
pub const DENSE_SUPEROP_MAX_DIM: usize = 1 << 7;
/// Largest register dimension for states evolved matrix-free.
pub const STATE_MAX_DIM: usize = 1 << 10;
/// Largest register dimension propagated through a full eigendecomposition.
pub const SPECTRAL_PROPAGATION_MAX_DIM: usize = 32;
/// Gaps below this are flagged as degenerate.
pub const GAP_FLOOR: f64 = 1e-11;
/// Convergence threshold of the Petz iteration.
pub const PETZ_TOL: f64 = 1e-11;
/// Largest number of squarings in the Petz iteration.
pub const PETZ_MAX_SQUARINGS: usize = 60;
/// Mixing weight used to regularize states before taking logarithms.
pub const EP_REGULARIZATION: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Weights and jump operators
// ---------------------------------------------------------------------------

/// Transition weight scheme `ω ↦ χ^{β,ω}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum WeightScheme {
    /// `e^{βω/2}`.
    #[default]
    Exponential,
    /// `2 / (1 + e^{−βω})`.
    Glauber,
    /// `min(1, e^{βω})`.
    Metropolis,
    /// `e^{sβω}`; satisfies detailed balance only for `s = 1/2`.
    Power {
        /// Exponent `s`.
        exponent: f64,
    },
}

impl WeightScheme {
    /// Weight of a jump with Bohr frequency `omega`.
    pub fn chi(&self, beta: f64, omega: f64) -> f64 {
        let x = beta * omega;
        match self {
            WeightScheme::Exponential => (x / 2.0).exp(),
            WeightScheme::Glauber => 2.0 / (1.0 + (-x).exp()),
            WeightScheme::Metropolis => x.exp().min(1.0),
            WeightScheme::Power { exponent } => (exponent * x).exp(),
        }
    }

    /// Largest relative violation of `χ^{β,−ω} = e^{−βω} χ^{β,ω}` over `omegas`.
    pub fn kms_violation(&self, beta: f64, omegas: &[f64]) -> f64 {
        omegas
            .iter()
            .map(|&w| {
                let lhs = self.chi(beta, -w);
                let rhs = (-beta * w).exp() * self.chi(beta, w);
                (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }
}

/// Orthonormal Hermitian basis of `d × d` matrices (generalized Gell-Mann
/// matrices and `Id/√d`), orthonormal for the Hilbert–Schmidt product.
pub fn hermitian_basis(d: usize) -> Vec<CMat> {
    let mut out = vec![CMat::identity(d, d).unscale((d as f64).sqrt())];
    let s = 1.0 / 2f64.sqrt();
    for j in 0..d {
        for k in j + 1..d {
            let mut sym = CMat::zeros(d, d);
            sym[(j, k)] = C64::new(s, 0.0);
            sym[(k, j)] = C64::new(s, 0.0);
            out.push(sym);
            let mut asym = CMat::zeros(d, d);
            asym[(j, k)] = C64::new(0.0, -s);
            asym[(k, j)] = C64::new(0.0, s);
            out.push(asym);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = CMat::zeros(d, d);
        for m in 0..l {
            diag[(m, m)] = C64::new(norm, 0.0);
        }
        diag[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
        out.push(diag);
    }
    out
}

/// Single-site jump family `S_α = G_α / √d`, a Kraus decomposition of the
/// normalized partial trace: `Σ_α S_α X S_α = tr[X] Id / d`.
pub fn site_jump_family(d: usize) -> Vec<CMat> {
    hermitian_basis(d).into_iter().map(|g| g.unscale((d as f64).sqrt())).collect()
}

/// One Bohr component `S^ω_{α,k}` with its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    /// Site `k`.
    pub site: usize,
    /// Index `α` in the jump family.
    pub alpha: usize,
    /// Bohr frequency `ω`.
    pub omega: f64,
    /// The operator on the register of `k∂`.
    pub op: CMat,
    /// Weight `χ^{β,ω}_{α,k}`.
    pub weight: f64,
}

/// Jump operators of one site and their Bohr decomposition.
#[derive(Debug, Clone)]
pub struct SiteJumps {
    /// Site `k`.
    pub site: usize,
    /// Register of `k∂`.
    pub register: Register,
    /// Sum of the terms touching `k`, on the register of `k∂`.
    pub local_hamiltonian: CMat,
    /// Jump family `S_α` embedded on the register of `k∂`.
    pub family: Vec<CMat>,
    /// Bohr components, grouped by `α`.
    pub jumps: Vec<Jump>,
    /// Distinct Bohr frequencies.
    pub frequencies: Vec<f64>,
}

/// Cluster sorted values within `tol` into representatives (cluster means).
fn cluster(values: &[f64], tol: f64) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, usize)> = Vec::new();
    for x in v {
        match out.last_mut() {
            Some((sum, count)) if (x - *sum / *count as f64).abs() <= tol => {
                *sum += x;
                *count += 1;
            }
            _ => out.push((x, 1)),
        }
    }
    out.into_iter().map(|(s, c)| s / c as f64).collect()
}

fn cluster_index(reps: &[f64], x: f64, tol: f64) -> usize {
    reps.iter().position(|r| (r - x).abs() <= tol * 10.0).expect("value belongs to a cluster")
}

/// Spectral projectors of a Hermitian matrix, eigenvalues clustered within [`BOHR_TOL`].
pub fn spectral_projectors(h: &CMat) -> (Vec<f64>, Vec<CMat>) {
    let (vals, vecs) = eigh(h);
    let energies = cluster(vals.as_slice(), BOHR_TOL);
    let n = h.nrows();
    let mut projectors = vec![CMat::zeros(n, n); energies.len()];
    for (j, &l) in vals.iter().enumerate() {
        let c = cluster_index(&energies, l, BOHR_TOL);
        let v = vecs.column(j);
        projectors[c] += &v * v.adjoint();
    }
    (energies, projectors)
}

/// Bohr decomposition `S^ω = Σ_{E_b − E_a = ω} P_a S P_b`, so that
/// `e^{−itH} S e^{itH} = Σ_ω e^{itω} S^ω`.
pub fn bohr_decomposition(h: &CMat, s: &CMat) -> Vec<(f64, CMat)> {
    let (energies, projectors) = spectral_projectors(h);
    let mut diffs = Vec::new();
    for ea in &energies {
        for eb in &energies {
            diffs.push(eb - ea);
        }
    }
    let omegas = cluster(&diffs, BOHR_TOL);
    let n = h.nrows();
    let mut parts = vec![CMat::zeros(n, n); omegas.len()];
    for (a, pa) in projectors.iter().enumerate() {
        let left = matmul(pa, s);
        for (b, pb) in projectors.iter().enumerate() {
            let w = cluster_index(&omegas, energies[b] - energies[a], BOHR_TOL);
            parts[w] += matmul(&left, pb);
        }
    }
    omegas.into_iter().zip(parts).filter(|(_, m)| max_abs(m) > 1e-14).collect()
}

/// Jump operators of site `k` with weights at inverse temperature `beta`.
pub fn site_jumps(h: &LocalHamiltonian, k: usize, beta: f64, weights: WeightScheme) -> Result<SiteJumps> {
    let hk = h.site_hamiltonian(k)?;
    let reg = hk.register().clone();
    let site_reg = Register::new(vec![k], h.d())?;
    let mut family = Vec::new();
    let mut jumps = Vec::new();
    let mut freqs = Vec::new();
    for (alpha, s) in site_jump_family(h.d()).into_iter().enumerate() {
        let embedded = Operator::new(site_reg.clone(), s)?.embed(&reg)?.into_mat();
        for (omega, op) in bohr_decomposition(hk.mat(), &embedded) {
            freqs.push(omega);
            jumps.push(Jump { site: k, alpha, omega, op, weight: weights.chi(beta, omega) });
        }
        family.push(embedded);
    }
    let frequencies = cluster(&freqs, BOHR_TOL);
    let violation = weights.kms_violation(beta, &frequencies);
    if violation > 1e-12 {
        return Err(LabError::Config(format!(
            "weight scheme violates the detailed-balance identity (relative violation {violation:e})"
        )));
    }
    Ok(SiteJumps { site: k, register: reg, local_hamiltonian: hk.into_mat(), family, jumps, frequencies })
}

impl SiteJumps {
    /// Largest entry of `Σ_α S_α X S_α − 𝔼_k(X)` over the matrix units `X`.
    pub fn kraus_residual(&self) -> Result<f64> {
        let n = self.register.dim();
        let site = Region::new(vec![self.site]);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut x = CMat::zeros(n, n);
                x[(i, j)] = ONE;
                let mut acc = CMat::zeros(n, n);
                for s in &self.family {
                    acc += matmul(&matmul(s, &x), s);
                }
                let depol = Operator::new(self.register.clone(), x)?.normalized_partial_trace(&site)?;
                worst = worst.max(max_abs(&(acc - depol.mat())));
            }
        }
        Ok(worst)
    }

    /// Largest entry of `e^{−itH} S_α e^{itH} − Σ_ω e^{itω} S^ω_α` at time `t`,
    /// together with `S_α − Σ_ω S^ω_α` at `t = 0`.
    pub fn fourier_residual(&self, t: f64) -> f64 {
        let (vals, vecs) = eigh(&self.local_hamiltonian);
        let n = vals.len();
        let phase = |sign: f64| {
            let d = CMat::from_diagonal(&DVector::from_iterator(
                n,
                vals.iter().map(|&l| C64::from_polar(1.0, sign * t * l)),
            ));
            matmul(&matmul(&vecs, &d), &vecs.adjoint())
        };
        let (u_minus, u_plus) = (phase(-1.0), phase(1.0));
        let mut worst: f64 = 0.0;
        for (alpha, s) in self.family.iter().enumerate() {
            let lhs = matmul(&matmul(&u_minus, s), &u_plus);
            let mut rhs = CMat::zeros(n, n);
            for j in self.jumps.iter().filter(|j| j.alpha == alpha) {
                rhs += j.op.scale(1.0) * C64::from_polar(1.0, t * j.omega);
            }
            worst = worst.max(max_abs(&(lhs - rhs)));
        }
        worst
    }

    /// Local generator `L_k` as a superoperator on the register of `k∂`.
    pub fn superop(&self) -> CMat {
        let n = self.register.dim();
        let id = CMat::identity(n, n);
        let mut l = CMat::zeros(n * n, n * n);
        let mut k = CMat::zeros(n, n);
        for j in &self.jumps {
            if j.alpha == 0 {
                // The identity component commutes with everything and drops out.
                continue;
            }
            l += kron(&j.op.map(|z| z.conj()), &j.op).scale(j.weight);
            k += matmul(&j.op.adjoint(), &j.op).scale(j.weight);
        }
        l -= kron(&id, &k).scale(0.5);
        l -= kron(&k.transpose(), &id).scale(0.5);
        l
    }
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Local generator `L_k` on the register of `k∂`.
#[derive(Debug, Clone)]
pub struct LocalGenerator {
    /// Site `k`.
    pub site: usize,
    /// Register of `k∂`.
    pub register: Register,
    /// Superoperator of `L_k`.
    pub superop: CMat,
}

/// Davies generator `L_A = Σ_{k ∈ A} L_k`.
#[derive(Debug, Clone)]
pub struct DaviesGenerator {
    region: Region,
    beta: f64,
    weights: WeightScheme,
    register: Register,
    local: Vec<LocalGenerator>,
    jumps: Vec<SiteJumps>,
    sigma: Operator,
    dense: OnceLock<CMat>,
    chi_min: f64,
    chi_max: f64,
}

/// Build the Davies generator of region `A` at inverse temperature `beta`.
pub fn build_davies(h: &LocalHamiltonian, a: &Region, beta: f64, weights: WeightScheme) -> Result<DaviesGenerator> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(LabError::Domain(format!("inverse temperature {beta} must be finite and non-negative")));
    }
    if !a.is_subset(h.universe()) {
        return Err(LabError::Domain(format!("region {:?} leaves the model sites", a.sites())));
    }
    let closure = h.closure(a);
    let register = h.register(&closure);
    let mut local = Vec::new();
    let mut jumps = Vec::new();
    let (mut chi_min, mut chi_max) = (f64::INFINITY, 0.0f64);
    for k in a.iter() {
        let sj = site_jumps(h, k, beta, weights)?;
        for j in sj.jumps.iter().filter(|j| j.alpha != 0) {
            chi_min = chi_min.min(j.weight);
            chi_max = chi_max.max(j.weight);
        }
        local.push(LocalGenerator { site: k, register: sj.register.clone(), superop: sj.superop() });
        jumps.push(sj);
    }
    let sigma = h.gibbs_state(&closure, beta)?;
    let dense = OnceLock::new();
    if local.is_empty() {
        chi_min = 1.0;
        chi_max = 1.0;
    }
    Ok(DaviesGenerator { region: a.clone(), beta, weights, register, local, jumps, sigma, dense, chi_min, chi_max })
}

/// Result of a spectral-gap computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    /// Smallest non-zero eigenvalue of `−L` in the detailed-balance geometry.
    pub gap: f64,
    /// Dimension of the kernel.
    pub kernel_dim: usize,
    /// True when no eigenvalue lies above the floor.
    pub degenerate: bool,
}

/// How a conditional expectation was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectationRoute {
    /// Detailed-balance projection onto the kernel of the generator.
    Spectral,
    /// Limit of iterated Petz recovery maps.
    PetzLimit,
    /// Normalized partial trace.
    Depolarizing,
}

/// A channel on the register of `A∂` acting as the identity elsewhere.
#[derive(Debug, Clone)]
pub struct ConditionalExpectation {
    /// Region `A`.
    pub region: Region,
    /// Register the superoperator lives on.
    pub register: Register,
    /// Superoperator.
    pub superop: CMat,
    /// Construction route.
    pub route: ExpectationRoute,
}

impl ConditionalExpectation {
    /// The identity channel on an empty register.
    pub fn identity(d: usize) -> Self {
        Self {
            region: Region::empty(),
            register: Register::new(Vec::<usize>::new(), d).expect("valid dimension"),
            superop: CMat::identity(1, 1),
            route: ExpectationRoute::Spectral,
        }
    }

    /// Apply to an operator whose register contains this channel's register.
    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        apply_superop_local(&self.superop, &self.register, x)
    }

    /// Superoperator on a larger register.
    pub fn superop_on(&self, target: &Register) -> Result<CMat> {
        embed_superop(&self.superop, &self.register, target)
    }
}

/// Normalized partial trace `𝔼_B` on `register` as a conditional expectation.
pub fn depolarizing_expectation(register: &Register, traced: &Region) -> Result<ConditionalExpectation> {
    let sub = register.restricted(traced);
    let m = sub.dim();
    let mut superop = CMat::zeros(m * m, m * m);
    for j in 0..m {
        for i in 0..m {
            let mut e = Operator::zeros(&sub);
            e.mat_mut()[(i, j)] = ONE;
            let y = e.normalized_partial_trace(&sub.region())?;
            superop.column_mut(i + j * m).copy_from_slice(y.mat().as_slice());
        }
    }
    Ok(ConditionalExpectation { region: traced.clone(), register: sub, superop, route: ExpectationRoute::Depolarizing })
}

/// Dense superoperator of `X ↦ Σ_ij f(E_ij)` columns, from a map on matrices.
fn superop_from_map(dim: usize, f: impl Fn(&CMat) -> Result<CMat>) -> Result<CMat> {
    let mut out = CMat::zeros(dim * dim, dim * dim);
    for j in 0..dim {
        for i in 0..dim {
            let mut e = CMat::zeros(dim, dim);
            e[(i, j)] = ONE;
            let y = f(&e)?;
            out.column_mut(i + j * dim).copy_from_slice(y.as_slice());
        }
    }
    Ok(out)
}

/// Petz recovery `R(X) = σ^{1/2}(σ_Ā^{−1/2} tr_A[X] σ_Ā^{−1/2} ⊗ Id_A)σ^{1/2}`
/// on the register of `sigma`, where `Ā` is the rest of that register.
pub fn petz_superop(sigma: &Operator, a: &Region) -> Result<CMat> {
    let reg = sigma.register().clone();
    let a_in = reg.restricted(a).region();
    let s_half = pow_pd(sigma.mat(), 0.5, "sigma")?;
    let marg = sigma.partial_trace(&a_in)?;
    let m_inv_half = pow_pd(marg.mat(), -0.5, "sigma marginal")?;
    let m_op = Operator::new(marg.register().clone(), m_inv_half)?;
    superop_from_map(reg.dim(), |x| {
        let xo = Operator::new(reg.clone(), x.clone())?;
        let reduced = xo.partial_trace(&a_in)?;
        let mid = matmul(&matmul(m_op.mat(), reduced.mat()), m_op.mat());
        let lifted = Operator::new(reduced.register().clone(), mid)?.embed(&reg)?;
        Ok(matmul(&matmul(&s_half, lifted.mat()), &s_half))
    })
}

/// `lim_n R^n` by repeated squaring until successive iterates agree.
pub fn petz_limit(r: &CMat) -> Result<CMat> {
    let mut cur = r.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..PETZ_MAX_SQUARINGS {
        let next = matmul(&cur, &cur);
        residual = max_abs(&(&next - &cur));
        cur = next;
        if residual < PETZ_TOL {
            return Ok(cur);
        }
    }
    Err(LabError::Convergence { context: "Petz iteration".into(), residual })
}

/// Conditional expectation of `A` from the Petz iteration with the Gibbs
/// state of the whole model, on the full register.
pub fn petz_expectation_global(h: &LocalHamiltonian, a: &Region, beta: f64) -> Result<ConditionalExpectation> {
    let sigma = h.gibbs_state(h.universe(), beta)?;
    if sigma.dim() > 16 {
        return Err(LabError::Capability("global Petz iteration is limited to 16-dimensional registers".into()));
    }
    let r = petz_superop(&sigma, a)?;
    Ok(ConditionalExpectation {
        region: a.clone(),
        register: sigma.register().clone(),
        superop: petz_limit(&r)?,
        route: ExpectationRoute::PetzLimit,
    })
}

/// Superoperator of `X ↦ σ^s X σ^s` (the similarity `Γ^{2s}` of the detailed-balance geometry).
fn gamma_superop(sigma: &CMat, s: f64) -> Result<CMat> {
    let p = pow_pd(sigma, s, "sigma")?;
    Ok(superop_lr(&p, &p))
}

impl DaviesGenerator {
    /// Region `A`.
    pub fn region(&self) -> &Region {
        &self.region
    }

    /// Register of `A∂`.
    pub fn register(&self) -> &Register {
        &self.register
    }

    /// Inverse temperature.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Weight scheme.
    pub fn weights(&self) -> WeightScheme {
        self.weights
    }

    /// Gibbs state of `H_{A∂}` on the register of `A∂`.
    pub fn sigma(&self) -> &Operator {
        &self.sigma
    }

    /// Local generators.
    pub fn local_generators(&self) -> &[LocalGenerator] {
        &self.local
    }

    /// Jump data of each site.
    pub fn site_jumps(&self) -> &[SiteJumps] {
        &self.jumps
    }

    /// Smallest weight over the non-trivial jumps.
    pub fn chi_min(&self) -> f64 {
        self.chi_min
    }

    /// Largest weight over the non-trivial jumps.
    pub fn chi_max(&self) -> f64 {
        self.chi_max
    }

    /// Smallest weight of the same scheme at `β = 0` (one for every built-in scheme).
    pub fn chi0_min(&self) -> f64 {
        let mut m = f64::INFINITY;
        for sj in &self.jumps {
            for j in sj.jumps.iter().filter(|j| j.alpha != 0) {
                m = m.min(self.weights.chi(0.0, j.omega));
            }
        }
        if m.is_finite() {
            m
        } else {
            1.0
        }
    }

    /// Dense superoperator on the register of `A∂`.
    pub fn superop(&self) -> Result<&CMat> {
        if let Some(d) = self.dense.get() {
            return Ok(d);
        }
        let n = self.register.dim();
        if n > DENSE_SUPEROP_MAX_DIM {
            return Err(LabError::Capability(format!("dense superoperator on a register of dimension {n}")));
        }
        let mut total = CMat::zeros(n * n, n * n);
        for l in &self.local {
            total += embed_superop(&l.superop, &l.register, &self.register)?;
        }
        Ok(self.dense.get_or_init(|| total))
    }

    /// `L_A(X)` for an operator whose register contains `A∂`.
    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        if let Some(d) = self.dense.get() {
            if x.register() == &self.register {
                return apply_superop_local(d, &self.register, x);
            }
        }
        let mut out = Operator::zeros(x.register());
        for l in &self.local {
            let y = apply_superop_local(&l.superop, &l.register, x)?;
            *out.mat_mut() += y.mat();
        }
        Ok(out)
    }

    /// Largest entry of `tr ∘ L`, which vanishes for trace-preserving dynamics.
    pub fn trace_residual(&self) -> Result<f64> {
        let l = self.superop()?;
        let n = self.register.dim();
        let mut worst: f64 = 0.0;
        for col in 0..n * n {
            let mut acc = ZERO;
            for i in 0..n {
                acc += l[(i + i * n, col)];
            }
            worst = worst.max(acc.norm());
        }
        Ok(worst)
    }

    /// Largest entry of `L Ω − Ω L†` with `Ω(X) = Xσ`; zero exactly when the
    /// Heisenberg generator is self-adjoint for `⟨X, Y⟩_σ = tr[σ X† Y]`.
    pub fn gns_residual(&self, sigma: Option<&Operator>) -> Result<f64> {
        let l = self.superop()?;
        let s = sigma.unwrap_or(&self.sigma);
        let n = self.register.dim();
        let omega = kron(&s.mat().transpose(), &CMat::identity(n, n));
        Ok(max_abs(&(matmul(l, &omega) - matmul(&omega, &l.adjoint()))))
    }

    /// Smallest eigenvalue of the Choi matrix of `L` compressed to the
    /// complement of the maximally entangled vector; non-negative exactly when
    /// `L` generates completely positive maps.
    pub fn ccp_min_eigenvalue(&self) -> Result<f64> {
        let l = self.superop()?;
        let choi = choi_matrix(l, self.register.dim());
        let n = self.register.dim();
        let mut omega = DVector::<C64>::zeros(n * n);
        for i in 0..n {
            omega[i * n + i] = C64::new(1.0 / (n as f64).sqrt(), 0.0);
        }
        let proj = CMat::identity(n * n, n * n) - &omega * omega.adjoint();
        let compressed = matmul(&matmul(&proj, &choi), &proj);
        let vals = crate::opcore::eigvalsh(&hermitize(&compressed));
        Ok(vals[0])
    }

    /// Symmetrized generator `Γ^{−1/2} L Γ^{1/2}` (Hermitian).
    pub fn symmetrized(&self) -> Result<CMat> {
        let l = self.superop()?;
        let g_minus = gamma_superop(self.sigma.mat(), -0.25)?;
        let g_plus = gamma_superop(self.sigma.mat(), 0.25)?;
        Ok(hermitize(&matmul(&matmul(&g_minus, l), &g_plus)))
    }

    /// Spectral gap from the symmetric eigenproblem of the symmetrized generator.
    pub fn spectral_gap(&self) -> Result<GapResult> {
        let k = self.symmetrized()?;
        let vals = crate::opcore::eigvalsh(&k);
        let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let kernel_tol = 1e-9 * scale;
        let kernel_dim = vals.iter().filter(|&&v| v > -kernel_tol).count();
        let gap = vals.iter().filter(|&&v| v <= -kernel_tol).map(|v| -v).fold(f64::INFINITY, f64::min);
        if !gap.is_finite() || gap < GAP_FLOOR {
            return Ok(GapResult { gap: 0.0, kernel_dim, degenerate: true });
        }
        Ok(GapResult { gap, kernel_dim, degenerate: false })
    }

    /// Conditional expectation `E_A = lim_{t→∞} e^{tL_A}` by the requested route.
    pub fn conditional_expectation(&self, route: ExpectationRoute) -> Result<ConditionalExpectation> {
        if self.region.is_empty() {
            return Ok(ConditionalExpectation::identity(self.register.d()));
        }
        let superop = match route {
            ExpectationRoute::Spectral => {
                let k = self.symmetrized()?;
                let (vals, vecs) = eigh(&k);
                let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                let kernel_tol = 1e-9 * scale;
                let p = from_eigen(&vals, &vecs, |v| if v > -kernel_tol { 1.0 } else { 0.0 });
                let g_minus = gamma_superop(self.sigma.mat(), -0.25)?;
                let g_plus = gamma_superop(self.sigma.mat(), 0.25)?;
                matmul(&matmul(&g_plus, &p), &g_minus)
            }
            ExpectationRoute::PetzLimit => petz_limit(&petz_superop(&self.sigma, &self.region)?)?,
            ExpectationRoute::Depolarizing => {
                return depolarizing_expectation(&self.register, &self.region);
            }
        };
        Ok(ConditionalExpectation { region: self.region.clone(), register: self.register.clone(), superop, route })
    }

    /// Entropy production `−tr[L(ρ)(log ρ − log σ)]` of a state on a register
    /// containing `A∂`; `ρ` is mixed with a tiny multiple of the identity first.
    pub fn entropy_production(&self, rho: &Operator, sigma: &Operator) -> Result<f64> {
        let reg_rho = regularize(rho);
        let lr = self.apply(&reg_rho)?;
        let diff = regularized_log(&reg_rho) - log_pd(sigma.mat(), "sigma")?;
        Ok(-trace_product(lr.mat(), &diff).re)
    }

    /// Propagator through the eigendecomposition of the symmetrized generator,
    /// for registers up to [`SPECTRAL_PROPAGATION_MAX_DIM`].
    pub fn propagator(&self) -> Result<Propagator> {
        if self.register.dim() > SPECTRAL_PROPAGATION_MAX_DIM {
            return Err(LabError::Capability(format!(
                "spectral propagation on dimension {}",
                self.register.dim()
            )));
        }
        let k = self.symmetrized()?;
        let (vals, vecs) = eigh(&k);
        Ok(Propagator {
            register: self.register.clone(),
            vals: vals.iter().copied().collect(),
            vecs,
            sigma_quarter: pow_pd(self.sigma.mat(), 0.25, "sigma")?,
            sigma_minus_quarter: pow_pd(self.sigma.mat(), -0.25, "sigma")?,
        })
    }

    /// `e^{tL}(ρ)` computed matrix-free by a scaled Taylor series.
    pub fn evolve_matrix_free(&self, rho: &Operator, t: f64) -> Result<Operator> {
        if rho.dim() > STATE_MAX_DIM {
            return Err(LabError::Capability(format!("state of dimension {} exceeds the cap", rho.dim())));
        }
        if t == 0.0 {
            return Ok(rho.clone());
        }
        let norm: f64 = self.local.iter().map(|l| induced_one_norm(&l.superop)).sum();
        let steps = ((t * norm).ceil() as usize).max(1);
        let h = t / steps as f64;
        let mut cur = rho.clone();
        for _ in 0..steps {
            let mut term = cur.clone();
            let mut acc = cur.mat().clone();
            let mut converged = false;
            for j in 1..80 {
                let next = self.apply(&term)?;
                term = next.with_mat(next.mat().scale(h / j as f64));
                acc += term.mat();
                if max_abs(term.mat()) <= 1e-17 * max_abs(&acc).max(1e-300) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(LabError::Convergence { context: "Taylor propagation".into(), residual: max_abs(term.mat()) });
            }
            cur = cur.with_mat(acc);
        }
        Ok(project_density(&cur))
    }
}

fn induced_one_norm(m: &CMat) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `(1 − 10⁻¹²)ρ + 10⁻¹² Id/dim`.
pub fn regularize(rho: &Operator) -> Operator {
    let n = rho.dim();
    rho.with_mat(rho.mat().scale(1.0 - EP_REGULARIZATION) + CMat::identity(n, n).scale(EP_REGULARIZATION / n as f64))
}

/// Logarithm of a state produced by [`regularize`]. The mixed-in identity
/// bounds the spectrum below by `EP_REGULARIZATION / dim`, which may sit under
/// the generic positivity floor, so eigenvalues are clamped instead of rejected.
fn regularized_log(reg_rho: &Operator) -> CMat {
    let floor = 0.5 * EP_REGULARIZATION / reg_rho.dim() as f64;
    funm_herm(&hermitize(reg_rho.mat()), |x| x.max(floor).ln())
}

/// Hermitian part with unit trace.
pub fn project_density(rho: &Operator) -> Operator {
    let m = hermitize(rho.mat());
    let t = trace(&m).re;
    rho.with_mat(m.unscale(t))
}

/// Choi matrix `Σ_ij E_ij ⊗ Φ(E_ij)` of a superoperator on dimension `n`.
pub fn choi_matrix(superop: &CMat, n: usize) -> CMat {
    let mut choi = CMat::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let col = superop.column(i + j * n);
            for b in 0..n {
                for a in 0..n {
                    choi[(i * n + a, j * n + b)] = col[a + b * n];
                }
            }
        }
    }
    choi
}

/// Precomputed `e^{tL}` through the symmetrized eigendecomposition.
#[derive(Debug, Clone)]
pub struct Propagator {
    register: Register,
    vals: Vec<f64>,
    vecs: CMat,
    sigma_quarter: CMat,
    sigma_minus_quarter: CMat,
}

impl Propagator {
    /// `e^{tL}(ρ)` projected back to the density manifold.
    pub fn apply(&self, rho: &Operator, t: f64) -> Result<Operator> {
        if rho.register() != &self.register {
            return Err(LabError::Domain("propagator applied on a different register".into()));
        }
        if t == 0.0 {
            return Ok(rho.clone());
        }
        let n = rho.dim();
        let x = matmul(&matmul(&self.sigma_minus_quarter, rho.mat()), &self.sigma_minus_quarter);
        let v = CMat::from_column_slice(n * n, 1, vectorize(&x).as_slice());
        let mut coeffs = matmul(&self.vecs.adjoint(), &v);
        for (i, l) in self.vals.iter().enumerate() {
            coeffs[(i, 0)] *= (t * l).exp();
        }
        let back = matmul(&self.vecs, &coeffs);
        let y = unvectorize(&DVector::from_column_slice(back.as_slice()), n);
        let out = matmul(&matmul(&self.sigma_quarter, &y), &self.sigma_quarter);
        Ok(project_density(&rho.with_mat(out)))
    }

    /// Slowest non-stationary eigenmode mapped back to an operator, as a
    /// Hermitian, traceless direction.
    pub fn slowest_mode(&self) -> Option<CMat> {
        let scale = self.vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let idx = self
            .vals
            .iter()
            .enumerate()
            .filter(|(_, &v)| v <= -1e-9 * scale)
            .max_by(|a, b| a.1.total_cmp(b.1))?
            .0;
        let n = self.register.dim();
        let col = DVector::from_iterator(n * n, self.vecs.column(idx).iter().copied());
        let y = unvectorize(&col, n);
        let x = hermitize(&matmul(&matmul(&self.sigma_quarter, &y), &self.sigma_quarter));
        let norm = max_abs(&x);
        if norm < 1e-14 {
            // A purely anti-Hermitian mode; use its Hermitian partner instead.
            let alt = matmul(&matmul(&self.sigma_quarter, &y), &self.sigma_quarter).map(|z| z * C64::new(0.0, 1.0));
            let alt = hermitize(&alt);
            return Some(alt.unscale(max_abs(&alt)));
        }
        Some(x.unscale(norm))
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Time.
    pub t: f64,
    /// `‖ρ_t − σ‖₁`.
    pub trace_dist: f64,
    /// `D(ρ_t‖σ)`.
    pub rel_entropy: f64,
}

/// Evolve `rho0` under `L_A` and record distances to `sigma` on `times`.
///
/// Small registers use the spectral propagator; larger ones the matrix-free
/// Taylor scheme, stepping between consecutive times.
pub fn evolve(
    gen: &DaviesGenerator,
    rho0: &Operator,
    sigma: &Operator,
    times: &[f64],
) -> Result<(Vec<Operator>, Vec<TrajectoryPoint>)> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|&t| t < 0.0) {
        return Err(LabError::Domain("times must be sorted and non-negative".into()));
    }
    let prop = if rho0.register() == gen.register() && gen.register().dim() <= SPECTRAL_PROPAGATION_MAX_DIM {
        Some(gen.propagator()?)
    } else {
        None
    };
    let mut states = Vec::with_capacity(times.len());
    let mut points = Vec::with_capacity(times.len());
    let mut last_t = 0.0;
    let mut cur = rho0.clone();
    for &t in times {
        let rho_t = match &prop {
            Some(p) => p.apply(rho0, t)?,
            None => {
                cur = gen.evolve_matrix_free(&cur, t - last_t)?;
                last_t = t;
                cur.clone()
            }
        };
        let diff = rho_t.mat() - sigma.mat();
        points.push(TrajectoryPoint {
            t,
            trace_dist: trace_norm(&diff),
            rel_entropy: crate::opcore::relative_entropy(rho_t.mat(), sigma.mat()),
        });
        states.push(rho_t);
    }
    Ok((states, points))
}

/// Mixing time found by doubling then bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingTime {
    /// First time (to relative precision `1e−6`) at which the distance is below the threshold.
    pub time: f64,
    /// Index of the state attaining the largest distance at that time.
    pub worst_state: usize,
    /// Largest distance at `time`.
    pub distance: f64,
    /// Threshold the distance was compared against.
    pub threshold: f64,
}

/// First time at which `worst(t).0 ≤ threshold`, by doubling from `1/16`
/// up to `horizon` and then bisecting. `worst` returns the largest distance
/// over a state set and the index of the state attaining it.
pub fn mixing_time_bisection(
    mut worst: impl FnMut(f64) -> Result<(f64, usize)>,
    threshold: f64,
    horizon: f64,
) -> Result<MixingTime> {
    let (d0, i0) = worst(0.0)?;
    if d0 <= threshold {
        return Ok(MixingTime { time: 0.0, worst_state: i0, distance: d0, threshold });
    }
    let mut lo = 0.0;
    let mut hi = 1.0 / 16.0;
    let mut at_hi = loop {
        let (d, i) = worst(hi)?;
        if d <= threshold {
            break (d, i);
        }
        if hi >= horizon {
            return Err(LabError::Horizon { horizon, last_distance: d });
        }
        lo = hi;
        hi = (hi * 2.0).min(horizon);
    };
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        let (d, i) = worst(mid)?;
        if d <= threshold {
            hi = mid;
            at_hi = (d, i);
        } else {
            lo = mid;
        }
    }
    Ok(MixingTime { time: hi, worst_state: at_hi.1, distance: at_hi.0, threshold })
}

/// Initial states for mixing-time protocols: every computational basis state
/// plus `σ ± δX` for the slowest eigenmode `X`, with `δ` as large as positivity
/// allows.
pub fn mixing_state_set(gen: &DaviesGenerator, sigma: &Operator) -> Result<Vec<Operator>> {
    let reg = sigma.register().clone();
    let n = reg.dim();
    let mut states = Vec::with_capacity(n + 2);
    for i in 0..n {
        let mut m = CMat::zeros(n, n);
        m[(i, i)] = ONE;
        states.push(Operator::new(reg.clone(), m)?);
    }
    if let Some(x) = gen.propagator()?.slowest_mode() {
        let s_inv_half = pow_pd(sigma.mat(), -0.5, "sigma")?;
        let scaled = hermitize(&matmul(&matmul(&s_inv_half, &x), &s_inv_half));
        let vals = crate::opcore::eigvalsh(&scaled);
        for (sign, extreme) in [(1.0, vals[0]), (-1.0, -vals[vals.len() - 1])] {
            if extreme < 0.0 {
                let delta = -1.0 / extreme;
                let m = sigma.mat() + x.scale(sign * delta);
                states.push(project_density(&sigma.with_mat(m)));
            }
        }
    }
    Ok(states)
}

/// Entropy production `−tr[(E(ρ) − ρ)(log ρ − log σ)]` of the heat-bath
/// generator `E − id` of a conditional expectation; `ρ` is regularized first.
pub fn heat_bath_entropy_production(e: &ConditionalExpectation, rho: &Operator, sigma: &Operator) -> Result<f64> {
    let reg_rho = regularize(rho);
    let er = e.apply(&reg_rho)?;
    let diff = regularized_log(&reg_rho) - log_pd(sigma.mat(), "sigma")?;
    Ok(-trace_product(&(er.mat() - reg_rho.mat()), &diff).re)
}
