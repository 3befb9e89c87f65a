//! Inequality checks on concrete states, empirical decay rates and the
//! closed-form bound calculators.
//!
//! Every check returns an [`InequalityVerdict`] comparing a left-hand side
//! with a right-hand side; a verdict passes when the slack is at least
//! `−SLACK_TOL`. Quantities defined as suprema over all states are computed
//! over explicit finite state sets and are lower-bound protocols.

pub mod bounds;

pub use bounds::{
    bound_calculators, polylog_table, BoundInputs, BoundReport, FormulaId, GateReport, PolylogRow,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::davies::{
    build_davies, heat_bath_entropy_production, mixing_time_bisection, ConditionalExpectation,
    DaviesGenerator, ExpectationRoute, MixingTime, WeightScheme,
};
use crate::error::{LabError, Result};
use crate::lattice::{self, CoarseGraining, Region};
use crate::mcmi::{mcmi_operator, DecayFit, FitStatus, Partition4};
use crate::models::{EffectiveHamiltonians, LocalHamiltonian};
use crate::opcore::{
    conditional_relative_entropy, exp_herm, is_diagonal, op_norm_herm, relative_entropy_op, trace_norm,
    write_container, CMat, Operator,
};
use crate::w1::{telescoping_upper_bound, w1_distance, W1Options};

/// Absolute slack tolerance on entropic inequalities.
pub const SLACK_TOL: f64 = 1e-7;

/// Largest register on which the TC check falls back to the semidefinite
/// upper bound when the telescoping bound is not tight enough.
pub const TC_SDP_MAX_DIM: usize = 16;

/// Floor below which a relative entropy counts as zero in rate fits.
pub const FIT_FLOOR: f64 = 1e-9;

/// Tolerated increase of a relative entropy between consecutive trajectory points.
pub const MONOTONE_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

/// Outcome of one numerical inequality check `left ≤ right`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityVerdict {
    id: String,
    left: f64,
    right: f64,
    slack: f64,
    pass: bool,
    digest: String,
}

impl InequalityVerdict {
    /// Build a verdict; the slack and the pass flag are derived.
    pub fn new(id: impl Into<String>, left: f64, right: f64, digest: String) -> Self {
        let slack = right - left;
        let pass = slack >= -SLACK_TOL;
        Self { id: id.into(), left, right, slack, pass, digest }
    }

    /// Inequality identifier.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Left-hand side.
    pub fn left(&self) -> f64 {
        self.left
    }

    /// Right-hand side.
    pub fn right(&self) -> f64 {
        self.right
    }

    /// `right − left`.
    pub fn slack(&self) -> f64 {
        self.slack
    }

    /// True when `slack ≥ −SLACK_TOL`.
    pub fn pass(&self) -> bool {
        self.pass
    }

    /// SHA-256 digest (hex) of the inputs of the check.
    pub fn digest(&self) -> &str {
        &self.digest
    }
}

/// SHA-256 digest of a tag, a list of operators and extra bytes.
pub fn digest_inputs(tag: &str, ops: &[&Operator], extra: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    for op in ops {
        let bytes = write_container(op);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    hasher.update(extra);
    hex::encode(hasher.finalize())
}

fn partition_bytes(p: &Partition4) -> Vec<u8> {
    let mut out = Vec::new();
    for r in [&p.a, &p.b, &p.c, &p.d] {
        out.extend((r.len() as u64).to_le_bytes());
        for s in r.iter() {
            out.extend((s as u64).to_le_bytes());
        }
    }
    out
}

fn region_bytes(r: &Region) -> Vec<u8> {
    r.iter().flat_map(|s| (s as u64).to_le_bytes()).collect()
}

// ---------------------------------------------------------------------------
// Weak entropy factorization
// ---------------------------------------------------------------------------

/// Verdicts of the weak entropy factorization for one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationVerdicts {
    /// `D_ABC ≤ D_AB + D_BC + ‖𝐇_σ(A:C|D)‖_∞`.
    pub additive: InequalityVerdict,
    /// `(1 − ‖exp(𝐇_σ(A:C|D)) − Id‖_∞) D_ABC ≤ D_AB + D_BC`, only for
    /// diagonal `ρ` and `σ`.
    pub multiplicative: Option<InequalityVerdict>,
}

/// Check the weak entropy factorization of conditional relative entropies.
pub fn check_weak_entropy_factorization(
    rho: &Operator,
    sigma: &Operator,
    p: &Partition4,
) -> Result<FactorizationVerdicts> {
    let abc = p.a.union(&p.b).union(&p.c);
    let d_abc = conditional_relative_entropy(rho, sigma, &abc)?;
    let d_ab = conditional_relative_entropy(rho, sigma, &p.a.union(&p.b))?;
    let d_bc = conditional_relative_entropy(rho, sigma, &p.b.union(&p.c))?;
    let h = mcmi_operator(sigma, p)?;
    let h_norm = op_norm_herm(h.mat());
    let digest = digest_inputs("weak_entropy_factorization", &[rho, sigma], &partition_bytes(p));
    let additive = InequalityVerdict::new("weak_entropy_factorization", d_abc, d_ab + d_bc + h_norm, digest.clone());
    let multiplicative = if is_diagonal(rho.mat()) && is_diagonal(sigma.mat()) {
        let n = h.dim();
        let factor = 1.0 - op_norm_herm(&(exp_herm(h.mat()) - CMat::identity(n, n)));
        Some(InequalityVerdict::new("classical_entropy_factorization", factor * d_abc, d_ab + d_bc, digest))
    } else {
        None
    };
    Ok(FactorizationVerdicts { additive, multiplicative })
}

// ---------------------------------------------------------------------------
// Weak approximate tensorization
// ---------------------------------------------------------------------------

/// Conditional expectation of one physical cell of a coarse-graining.
#[derive(Debug, Clone)]
pub struct CellExpectation {
    /// Level `a`.
    pub level: usize,
    /// Cell index inside its level.
    pub index: usize,
    /// The cell in model site indices.
    pub region: Region,
    /// `E_{C_{a,i}}`.
    pub expectation: ConditionalExpectation,
}

/// Map a region of the (possibly padded) coarse-graining lattice to model sites.
pub fn to_model_region(cg: &CoarseGraining, h: &LocalHamiltonian, r: &Region) -> Result<Region> {
    let mut out = Vec::with_capacity(r.len());
    for s in r.iter() {
        let coord = cg.lattice.coord(s);
        match h.lattice().index_of(&coord) {
            Some(i) if h.universe().contains(i) => out.push(i),
            _ => {
                return Err(LabError::Domain(format!("coarse-graining site {coord:?} is not a model site")));
            }
        }
    }
    Ok(Region::new(out))
}

/// Precomputed data for the weak approximate tensorization check over a
/// coarse-graining: one conditional expectation per physical cell and the
/// MCMI errors `ζ_a = ‖𝐇_σ(X_a : Z_a | W_a)‖_∞` for `a = 1, …, D`.
#[derive(Debug, Clone)]
pub struct WeakAtContext {
    sigma: Operator,
    cells: Vec<CellExpectation>,
    partitions: Vec<Partition4>,
    zeta: Vec<f64>,
    dim: usize,
    overlap: usize,
    n_sites: usize,
}

impl WeakAtContext {
    /// Build the context for the Gibbs state of `h` at `beta`.
    pub fn new(h: &LocalHamiltonian, beta: f64, cg: &CoarseGraining, weights: WeightScheme) -> Result<Self> {
        if cg.dim() != h.lattice().dim() {
            return Err(LabError::Domain("coarse-graining and model have different dimensions".into()));
        }
        let mut cells = Vec::new();
        for (level, index, cell) in cg.physical_cells() {
            let region = to_model_region(cg, h, &cell.cell)?;
            let gen = build_davies(h, &region, beta, weights)?;
            if gen.register().dim() > crate::davies::DENSE_SUPEROP_MAX_DIM {
                return Err(LabError::Capability(format!(
                    "cell {index} of level {level} needs a register of dimension {}",
                    gen.register().dim()
                )));
            }
            let expectation = gen.conditional_expectation(ExpectationRoute::Spectral)?;
            cells.push(CellExpectation { level, index, region, expectation });
        }
        let mut partitions = Vec::new();
        for a in 1..=cg.dim() {
            let lp = cg.physical_partition(a);
            partitions.push(Partition4 {
                a: to_model_region(cg, h, &lp.x)?,
                b: to_model_region(cg, h, &lp.y)?,
                c: to_model_region(cg, h, &lp.z)?,
                d: to_model_region(cg, h, &lp.w)?,
            });
        }
        let sigma = h.gibbs_state(h.universe(), beta)?;
        let mut ctx = Self {
            sigma,
            cells,
            partitions,
            zeta: Vec::new(),
            dim: cg.dim(),
            overlap: cg.params.c,
            n_sites: h.n_sites(),
        };
        ctx.zeta = ctx.compute_zeta()?;
        Ok(ctx)
    }

    fn compute_zeta(&self) -> Result<Vec<f64>> {
        self.partitions.iter().map(|p| Ok(op_norm_herm(mcmi_operator(&self.sigma, p)?.mat()))).collect()
    }

    /// Replace the reference state (the cell expectations are kept) and
    /// recompute the MCMI errors from it. Used for negative controls with a
    /// state that is not the Gibbs state.
    pub fn with_reference(mut self, sigma: Operator) -> Result<Self> {
        if sigma.register() != self.sigma.register() {
            return Err(LabError::Domain("reference state lives on a different register".into()));
        }
        self.sigma = sigma;
        self.zeta = self.compute_zeta()?;
        Ok(self)
    }

    /// Reference state `σ`.
    pub fn sigma(&self) -> &Operator {
        &self.sigma
    }

    /// Cell expectations in level order.
    pub fn cells(&self) -> &[CellExpectation] {
        &self.cells
    }

    /// Cell regions in level order.
    pub fn cover(&self) -> Vec<Region> {
        self.cells.iter().map(|c| c.region.clone()).collect()
    }

    /// Partitions `(X_a, Y_a, Z_a, W_a)` as `(A, B, C, D)` for `a = 1, …, D`.
    pub fn partitions(&self) -> &[Partition4] {
        &self.partitions
    }

    /// `ζ_a` for `a = 1, …, D`.
    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    /// Additive constant `c₂ = Σ_a ζ_a`.
    pub fn c2(&self) -> f64 {
        self.zeta.iter().sum()
    }

    /// `Σ_{a,i} D(ρ‖E_{C_{a,i}}(ρ))`.
    pub fn local_entropy_sum(&self, rho: &Operator) -> Result<f64> {
        let mut total = 0.0;
        for cell in &self.cells {
            let er = cell.expectation.apply(rho)?;
            total += relative_entropy_op(rho, &er.hermitized())?;
        }
        Ok(total)
    }

    /// Verdict on `D(ρ‖σ) ≤ Σ_{a,i} D(ρ‖E_{C_{a,i}}(ρ)) + Σ_a ζ_a`.
    pub fn check(&self, rho: &Operator) -> Result<InequalityVerdict> {
        let left = relative_entropy_op(rho, &self.sigma)?;
        let right = self.local_entropy_sum(rho)? + self.c2();
        Ok(InequalityVerdict::new("weak_at", left, right, digest_inputs("weak_at", &[rho, &self.sigma], &[])))
    }

    /// Error term `D 2^D K |Λ| e^{−c/ξ}` built from a decay fit, with `c` the
    /// overlap width of the coarse-graining.
    pub fn explicit_decay_error(&self, fit: &DecayFit) -> Result<f64> {
        if fit.status != FitStatus::Ok {
            return Err(LabError::Domain(format!("decay fit unusable: {:?}", fit.status)));
        }
        let d = self.dim as f64;
        Ok(d * 2f64.powi(self.dim as i32) * fit.k * self.n_sites as f64 * (-(self.overlap as f64) / fit.xi).exp())
    }

    /// Verdict with the explicit-decay error in place of the measured `ζ_a`.
    pub fn check_explicit(&self, rho: &Operator, fit: &DecayFit) -> Result<InequalityVerdict> {
        let left = relative_entropy_op(rho, &self.sigma)?;
        let right = self.local_entropy_sum(rho)? + self.explicit_decay_error(fit)?;
        Ok(InequalityVerdict::new(
            "weak_at_explicit_decay",
            left,
            right,
            digest_inputs("weak_at_explicit_decay", &[rho, &self.sigma], &[]),
        ))
    }
}

/// One-shot weak approximate tensorization check on the Gibbs state.
pub fn check_weak_at(
    h: &LocalHamiltonian,
    beta: f64,
    cg: &CoarseGraining,
    rho: &Operator,
) -> Result<InequalityVerdict> {
    WeakAtContext::new(h, beta, cg, WeightScheme::default())?.check(rho)
}

// ---------------------------------------------------------------------------
// Weak transport cost
// ---------------------------------------------------------------------------

/// Inputs of the weak transport-cost check besides the states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcCover {
    /// Cover `{A_i}` of the sites.
    pub cover: Vec<Region>,
    /// `max_i |A_i∂|`.
    pub max_closure: usize,
    /// Additive constant `c₂` of the weak approximate tensorization for the cover.
    pub c2: f64,
    /// `|Λ|`.
    pub n_sites: usize,
}

impl TcCover {
    /// Cover data for `h`, with `c₂` measured by a weak-AT context on the same cover.
    pub fn new(h: &LocalHamiltonian, cover: Vec<Region>, c2: f64) -> Result<Self> {
        let union = cover.iter().fold(Region::empty(), |acc, r| acc.union(r));
        if &union != h.universe() {
            return Err(LabError::Domain("the cover does not cover the sites".into()));
        }
        if !(c2 >= 0.0) {
            return Err(LabError::Domain(format!("c2 = {c2} must be non-negative")));
        }
        let max_closure = cover.iter().map(|r| h.closure(r).len()).max().unwrap_or(0);
        Ok(Self { cover, max_closure, c2, n_sites: h.n_sites() })
    }

    /// The single cover `{Λ}`, for which the tensorization is exact (`c₂ = 0`).
    pub fn whole(h: &LocalHamiltonian) -> Result<Self> {
        Self::new(h, vec![h.universe().clone()], 0.0)
    }

    /// `n_A`.
    pub fn n_cover(&self) -> usize {
        self.cover.len()
    }

    /// `max_i 2√2 |A_i∂| √(n_A D) + |Λ| √(2c₂)` at relative entropy `D`.
    pub fn right_side(&self, rel_entropy: f64) -> f64 {
        let n_a = self.cover.len() as f64;
        2.0 * 2f64.sqrt() * self.max_closure as f64 * (n_a * rel_entropy.max(0.0)).sqrt()
            + self.n_sites as f64 * (2.0 * self.c2).sqrt()
    }
}

/// Verdict on `‖ρ − σ‖_{W₁} ≤ max_i 2√2 |A_i∂| √(n_A D(ρ‖σ)) + |Λ| √(2c₂)`.
///
/// The left side is a certified upper bound on the distance: the telescoping
/// bound, tightened by the semidefinite upper bound on small registers when
/// the telescoping bound alone would fail.
pub fn check_weak_tc(cover: &TcCover, rho: &Operator, sigma: &Operator) -> Result<InequalityVerdict> {
    let rel = relative_entropy_op(rho, sigma)?;
    let right = cover.right_side(rel);
    let x = rho.with_mat(rho.mat() - sigma.mat());
    let mut left = telescoping_upper_bound(&x)?;
    if left > right && rho.dim() <= TC_SDP_MAX_DIM {
        left = left.min(w1_distance(rho, sigma, W1Options::default())?.upper);
    }
    let mut extra = (cover.c2.to_bits()).to_le_bytes().to_vec();
    for r in &cover.cover {
        extra.extend(region_bytes(r));
        extra.push(0xff);
    }
    Ok(InequalityVerdict::new("weak_tc", left, right, digest_inputs("weak_tc", &[rho, sigma], &extra)))
}

// ---------------------------------------------------------------------------
// MLSI-alike bounds
// ---------------------------------------------------------------------------

/// Verdicts of the local MLSI-alike bound and its constituent comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlsiVerdicts {
    /// `D(ρ‖E_A ρ) ≤ e^{2gJ(1+2β|A∂∂|)} (χ⁰_min)^{−1} EP_{L_{A∂}}(ρ)`.
    pub main: InequalityVerdict,
    /// `D(ρ‖E^β_A ρ) ≤ e^{2gJβ|A∂|} D(ρ‖E⁰_A ρ)`.
    pub finite_vs_infinite_entropy: InequalityVerdict,
    /// `EP_{L⁰_A}(ρ) ≤ e^{2gJ(β|A∂|+1)} EP_{L^β_A}(ρ)`.
    pub infinite_vs_finite_production: InequalityVerdict,
    /// `χ⁰_min D(ρ‖E⁰_A ρ) ≤ EP_{L⁰_{A∂}}(ρ)`.
    pub infinite_temperature: InequalityVerdict,
}

impl MlsiVerdicts {
    /// All four verdicts.
    pub fn all(&self) -> [&InequalityVerdict; 4] {
        [&self.main, &self.finite_vs_infinite_entropy, &self.infinite_vs_finite_production, &self.infinite_temperature]
    }
}

/// Precomputed generators and constants for the MLSI-alike checks on a region.
#[derive(Debug, Clone)]
pub struct MlsiContext {
    region: Region,
    sigma: Operator,
    mixed: Operator,
    e_beta: ConditionalExpectation,
    e_zero: ConditionalExpectation,
    gen_a_beta: DaviesGenerator,
    gen_a_zero: DaviesGenerator,
    gen_closure_beta: DaviesGenerator,
    gen_closure_zero: DaviesGenerator,
    chi0_min: f64,
    factor_main: f64,
    factor_entropy: f64,
    factor_production: f64,
}

impl MlsiContext {
    /// Build the context for region `a` of `h` at `beta`; states live on the
    /// full register of the model.
    pub fn new(h: &LocalHamiltonian, beta: f64, a: &Region, weights: WeightScheme) -> Result<Self> {
        let full = h.full_register();
        if full.dim() > crate::davies::STATE_MAX_DIM {
            return Err(LabError::Capability(format!("register of dimension {} exceeds the cap", full.dim())));
        }
        let closure = h.closure(a);
        let closure2 = h.closure(&closure);
        let gen_a_beta = build_davies(h, a, beta, weights)?;
        let gen_a_zero = build_davies(h, a, 0.0, weights)?;
        let gen_closure_beta = build_davies(h, &closure, beta, weights)?;
        let gen_closure_zero = build_davies(h, &closure, 0.0, weights)?;
        let e_beta = gen_a_beta.conditional_expectation(ExpectationRoute::Spectral)?;
        let e_zero = gen_a_zero.conditional_expectation(ExpectationRoute::Spectral)?;
        let meta = h.meta();
        let gj = meta.g as f64 * meta.j;
        let chi0_min = gen_closure_beta.chi0_min();
        Ok(Self {
            region: a.clone(),
            sigma: h.gibbs_state(h.universe(), beta)?,
            mixed: Operator::maximally_mixed(&full),
            e_beta,
            e_zero,
            gen_a_beta,
            gen_a_zero,
            gen_closure_beta,
            gen_closure_zero,
            chi0_min,
            factor_main: (2.0 * gj * (1.0 + 2.0 * beta * closure2.len() as f64)).exp() / chi0_min,
            factor_entropy: (2.0 * gj * beta * closure.len() as f64).exp(),
            factor_production: (2.0 * gj * (beta * closure.len() as f64 + 1.0)).exp(),
        })
    }

    /// Region `A`.
    pub fn region(&self) -> &Region {
        &self.region
    }

    /// Gibbs state on the full register.
    pub fn sigma(&self) -> &Operator {
        &self.sigma
    }

    /// `E^β_A`.
    pub fn expectation(&self) -> &ConditionalExpectation {
        &self.e_beta
    }

    /// Prefactor `e^{2gJ(1+2β|A∂∂|)} / χ⁰_min` of the main bound.
    pub fn main_factor(&self) -> f64 {
        self.factor_main
    }

    /// Evaluate the four verdicts at `rho`.
    pub fn check(&self, rho: &Operator) -> Result<MlsiVerdicts> {
        let digest = |tag: &str| digest_inputs(tag, &[rho, &self.sigma], &region_bytes(&self.region));
        let d_beta = relative_entropy_op(rho, &self.e_beta.apply(rho)?.hermitized())?;
        let d_zero = relative_entropy_op(rho, &self.e_zero.apply(rho)?.hermitized())?;
        let ep_closure = self.gen_closure_beta.entropy_production(rho, &self.sigma)?;
        let ep_closure_zero = self.gen_closure_zero.entropy_production(rho, &self.mixed)?;
        let ep_a_beta = self.gen_a_beta.entropy_production(rho, &self.sigma)?;
        let ep_a_zero = self.gen_a_zero.entropy_production(rho, &self.mixed)?;
        Ok(MlsiVerdicts {
            main: InequalityVerdict::new("mlsi_alike", d_beta, self.factor_main * ep_closure, digest("mlsi_alike")),
            finite_vs_infinite_entropy: InequalityVerdict::new(
                "mlsi_entropy_temperature_comparison",
                d_beta,
                self.factor_entropy * d_zero,
                digest("mlsi_entropy_temperature_comparison"),
            ),
            infinite_vs_finite_production: InequalityVerdict::new(
                "mlsi_production_temperature_comparison",
                ep_a_zero,
                self.factor_production * ep_a_beta,
                digest("mlsi_production_temperature_comparison"),
            ),
            infinite_temperature: InequalityVerdict::new(
                "mlsi_infinite_temperature",
                self.chi0_min * d_zero,
                ep_closure_zero,
                digest("mlsi_infinite_temperature"),
            ),
        })
    }
}

/// One-shot MLSI-alike check with the default weight scheme.
pub fn check_mlsi_alike(h: &LocalHamiltonian, beta: f64, a: &Region, rho: &Operator) -> Result<MlsiVerdicts> {
    MlsiContext::new(h, beta, a, WeightScheme::default())?.check(rho)
}

/// Verdict on `D(ρ‖E(ρ)) ≤ EP_{E − id}(ρ)` for the heat-bath generator of a
/// conditional expectation.
pub fn check_heat_bath(e: &ConditionalExpectation, rho: &Operator, sigma: &Operator) -> Result<InequalityVerdict> {
    let left = relative_entropy_op(rho, &e.apply(rho)?.hermitized())?;
    let right = heat_bath_entropy_production(e, rho, sigma)?;
    Ok(InequalityVerdict::new(
        "heat_bath_mlsi",
        left,
        right,
        digest_inputs("heat_bath_mlsi", &[rho, sigma], &region_bytes(&e.region)),
    ))
}

// ---------------------------------------------------------------------------
// Effective-Hamiltonian bound on the MCMI
// ---------------------------------------------------------------------------

/// Verdict on `‖𝐇(A:C|D)‖_∞ ≤ 4 min{|A|, |C|} Δ e^{−μ dist(A, C)}` with the
/// MCMI operator built from the effective Hamiltonians and `Δ` their largest
/// interaction norm at decay rate `μ` (pass it from
/// [`EffectiveHamiltonians::delta`]).
pub fn check_effective_mcmi_bound(
    h: &LocalHamiltonian,
    eff: &EffectiveHamiltonians,
    p: &Partition4,
    mu: f64,
    delta: f64,
) -> Result<InequalityVerdict> {
    if p.a.is_empty() || p.c.is_empty() {
        return Err(LabError::Domain("the bound needs non-empty A and C".into()));
    }
    let left = op_norm_herm(&eff.mcmi_operator(&p.a, &p.c, &p.d)?);
    let dist = lattice::distance(h.lattice(), &p.a, &p.c, h.metric())? as f64;
    let right = 4.0 * p.a.len().min(p.c.len()) as f64 * delta * (-mu * dist).exp();
    let mut extra = partition_bytes(p);
    extra.extend(mu.to_bits().to_le_bytes());
    Ok(InequalityVerdict::new("effective_mcmi_bound", left, right, digest_inputs("effective_mcmi_bound", &[], &extra)))
}

// ---------------------------------------------------------------------------
// Empirical rates and mixing times
// ---------------------------------------------------------------------------

/// Fitted envelope `D(ρ_t‖σ) ≤ e^{−α t} D(ρ₀‖σ) + c₂` over a state set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WmlsiFit {
    /// Fitted decay rate `α`.
    pub alpha: f64,
    /// Fitted floor `c₂`.
    pub c2: f64,
    /// Index of the state attaining the smallest rate.
    pub worst_state: usize,
    /// Largest excess of a point over the envelope after fitting.
    pub envelope_violation: f64,
    /// States whose trajectory increased by more than the noise tolerance.
    pub rejected: Vec<usize>,
    /// States starting (numerically) at the fixed point.
    pub excluded: Vec<usize>,
    /// Time grid used.
    pub times: Vec<f64>,
}

/// Number of time steps of the rate-fit grid.
pub const WMLSI_GRID: usize = 128;

/// Fit the weak-MLSI envelope on trajectories of `gen` started at `states`
/// over `[0, horizon]`.
///
/// `c₂` is the largest final relative entropy and `α` the smallest
/// `−log((D_t − c₂)/D₀)/t` over the points with `D_t − c₂` above
/// [`FIT_FLOOR`]. Trajectories that start at the fixed point are excluded and
/// trajectories that increase by more than [`MONOTONE_TOL`] are rejected.
pub fn empirical_wmlsi(
    gen: &DaviesGenerator,
    states: &[Operator],
    sigma: &Operator,
    horizon: f64,
) -> Result<WmlsiFit> {
    if !(horizon > 0.0) {
        return Err(LabError::Domain("horizon must be positive".into()));
    }
    let times: Vec<f64> = (0..=WMLSI_GRID).map(|i| horizon * i as f64 / WMLSI_GRID as f64).collect();
    let mut curves = Vec::new();
    let mut rejected = Vec::new();
    let mut excluded = Vec::new();
    for (i, rho) in states.iter().enumerate() {
        let (_, points) = crate::davies::evolve(gen, rho, sigma, &times)?;
        let d: Vec<f64> = points.iter().map(|p| p.rel_entropy).collect();
        if d[0] <= FIT_FLOOR {
            excluded.push(i);
            continue;
        }
        if d.windows(2).any(|w| w[1] > w[0] + MONOTONE_TOL) {
            rejected.push(i);
            continue;
        }
        curves.push((i, d));
    }
    if curves.is_empty() {
        return Err(LabError::Domain("no usable trajectory for the rate fit".into()));
    }
    let c2 = curves.iter().map(|(_, d)| *d.last().expect("non-empty grid")).fold(0.0f64, f64::max);
    let mut alpha = f64::INFINITY;
    let mut worst_state = curves[0].0;
    for (i, d) in &curves {
        for (t, &dt) in times.iter().zip(d.iter()).skip(1) {
            let excess = dt - c2;
            if excess > FIT_FLOOR {
                let rate = -(excess / d[0]).ln() / t;
                if rate < alpha {
                    alpha = rate;
                    worst_state = *i;
                }
            }
        }
    }
    if !alpha.is_finite() {
        return Err(LabError::Domain("every trajectory reached the floor at the first step".into()));
    }
    let mut envelope_violation = f64::NEG_INFINITY;
    for (_, d) in &curves {
        for (t, &dt) in times.iter().zip(d.iter()) {
            envelope_violation = envelope_violation.max(dt - ((-alpha * t).exp() * d[0] + c2));
        }
    }
    Ok(WmlsiFit { alpha, c2, worst_state, envelope_violation, rejected, excluded, times })
}

/// Trace-distance mixing time `inf{t : ‖e^{tL}(ρ) − E(ρ)‖₁ ≤ ε}` over a
/// finite state set, with `E` the conditional expectation of the generator.
///
/// This is a lower-bound protocol for the supremum over all states.
pub fn trace_mixing_time(gen: &DaviesGenerator, states: &[Operator], eps: f64, horizon: f64) -> Result<MixingTime> {
    if !(eps > 0.0) {
        return Err(LabError::Domain("mixing precision must be positive".into()));
    }
    let prop = gen.propagator()?;
    let e = gen.conditional_expectation(ExpectationRoute::Spectral)?;
    let targets: Vec<Operator> = states.iter().map(|r| e.apply(r)).collect::<Result<_>>()?;
    let worst = |t: f64| -> Result<(f64, usize)> {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, (rho, target)) in states.iter().zip(&targets).enumerate() {
            let evolved = prop.apply(rho, t)?;
            let d = trace_norm(&(evolved.mat() - target.mat()));
            if d > best.0 {
                best = (d, i);
            }
        }
        Ok(best)
    };
    mixing_time_bisection(worst, eps, horizon)
}
