//! Matrix-valued conditional mutual information (MCMI), its scalar relatives,
//! decay fits and the classical conditional-ratio cross-check.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::{self, Region};
use crate::models::LocalHamiltonian;
use crate::opcore::{entropy, hermitize, log_pd, op_norm_herm, trace_product, CMat, Operator};

/// Floor below which MCMI values are treated as numerically zero.
pub const MCMI_FLOOR: f64 = 1e-13;

/// Partition `Λ = A ⊔ B ⊔ C ⊔ D` of the physical sites.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition4 {
    /// Region `A`.
    pub a: Region,
    /// Region `B` (traced out).
    pub b: Region,
    /// Region `C`.
    pub c: Region,
    /// Conditioning region `D`.
    pub d: Region,
}

impl Partition4 {
    /// Validate four regions partitioning `universe`.
    pub fn new(a: Region, b: Region, c: Region, d: Region, universe: &Region) -> Result<Self> {
        let parts = [&a, &b, &c, &d];
        let total: usize = parts.iter().map(|r| r.len()).sum();
        let union = a.union(&b).union(&c).union(&d);
        if total != union.len() {
            return Err(LabError::Domain("partition regions overlap".into()));
        }
        if union != *universe {
            return Err(LabError::Domain("partition regions do not cover the sites".into()));
        }
        Ok(Self { a, b, c, d })
    }

    /// Partition with `B` the complement of `A ∪ C ∪ D`.
    pub fn with_rest(a: Region, c: Region, d: Region, universe: &Region) -> Result<Self> {
        let b = universe.difference(&a.union(&c).union(&d));
        Self::new(a, b, c, d, universe)
    }

    /// `A ∪ C ∪ D`.
    pub fn acd(&self) -> Region {
        self.a.union(&self.c).union(&self.d)
    }

    /// The same partition with `A` and `C` exchanged.
    pub fn swapped(&self) -> Self {
        Self { a: self.c.clone(), b: self.b.clone(), c: self.a.clone(), d: self.d.clone() }
    }
}

/// MCMI of a state for one partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmiReport {
    /// The partition.
    pub partition: Partition4,
    /// `H_σ(A:C|D) = ‖𝐇_σ(A:C|D)‖_∞`.
    pub h_norm: f64,
    /// `I(A:C|D) = tr[σ_ACD 𝐇]`.
    pub cmi: f64,
    /// `I(A:C|D)` from the entropy form `−S(ACD) − S(D) + S(AD) + S(CD)`.
    pub cmi_entropy_form: f64,
    /// Mutual information `I(A:C)`.
    pub mi: f64,
    /// `dist(A, C)` (absent when either is empty).
    pub dist: Option<usize>,
    /// `𝐇_σ(A:C|D)` on the register of `ACD`.
    #[serde(skip)]
    pub operator: Option<Operator>,
}

/// MCMI `log σ_ACD + log σ_D − log σ_AD − log σ_CD` of a state on the physical sites.
///
/// Every logarithm is padded with identities to the register of `ACD`; the
/// `log σ_D` term is omitted when `D` is empty.
pub fn mcmi(sigma: &Operator, p: &Partition4, h: &LocalHamiltonian) -> Result<McmiReport> {
    let acd = p.acd();
    let sigma_acd = sigma.marginal(&acd)?;
    let op = mcmi_operator(sigma, p)?;
    let reg = op.register().clone();
    let op = op.into_mat();
    let h_norm = op_norm_herm(&op);
    let ad = p.a.union(&p.d);
    let cd = p.c.union(&p.d);
    let cmi = trace_product(sigma_acd.mat(), &op).re;
    let s = |r: &Region| -> Result<f64> { Ok(entropy(sigma_acd.marginal(r)?.mat())) };
    let cmi_entropy_form = -s(&acd)? - s(&p.d)? + s(&ad)? + s(&cd)?;
    let ac = p.a.union(&p.c);
    let mi = s(&p.a)? + s(&p.c)? - s(&ac)?;
    let dist = if p.a.is_empty() || p.c.is_empty() {
        None
    } else {
        Some(lattice::distance(h.lattice(), &p.a, &p.c, h.metric())?)
    };
    Ok(McmiReport {
        partition: p.clone(),
        h_norm,
        cmi,
        cmi_entropy_form,
        mi,
        dist,
        operator: Some(Operator::new(reg, op)?),
    })
}

/// Outcome of a decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    /// Fit performed with a decaying slope.
    Ok,
    /// Every sample was below the floor.
    AllZero,
    /// Fewer than three usable samples.
    TooFewPoints,
    /// The fitted slope does not decay (correlation length infinite).
    NoDecay,
}

/// Exponential decay fit `log H = log(K|Λ|) − dist/ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `(dist, H)` samples in scan order.
    pub samples: Vec<(usize, f64)>,
    /// Indices of samples dropped below the floor.
    pub dropped: Vec<usize>,
    /// Fit outcome.
    pub status: FitStatus,
    /// Fitted prefactor `K|Λ|`.
    pub prefactor: f64,
    /// Fitted `K` (prefactor divided by the number of sites).
    pub k: f64,
    /// Fitted correlation length `ξ` (infinite when not decaying).
    pub xi: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
}

/// The MCMI operator `𝐇_σ(A:C|D)` on the register of `ACD`, zero when `A`
/// or `C` is empty.
pub fn mcmi_operator(sigma: &Operator, p: &Partition4) -> Result<Operator> {
    let acd = p.acd();
    let sigma_acd = sigma.marginal(&acd)?;
    let reg = sigma_acd.register().clone();
    if p.a.is_empty() || p.c.is_empty() {
        return Ok(Operator::zeros(&reg));
    }
    let log_marginal = |region: &Region, name: &str| -> Result<CMat> {
        let m = sigma_acd.marginal(region)?;
        let l = log_pd(m.mat(), name)?;
        Ok(Operator::new(m.register().clone(), l)?.embed(&reg)?.into_mat())
    };
    let ad = p.a.union(&p.d);
    let cd = p.c.union(&p.d);
    let mut op = log_marginal(&acd, "sigma_ACD")? - log_marginal(&ad, "sigma_AD")? - log_marginal(&cd, "sigma_CD")?;
    if !p.d.is_empty() {
        op += log_marginal(&p.d, "sigma_D")?;
    }
    Ok(Operator::new(reg, hermitize(&op))?)
}

/// Fit an exponential decay to `(distance, value)` samples.
///
/// Samples below [`MCMI_FLOOR`] are dropped. The fit is ordinary least
/// squares on `log H`; at least three samples are required.
pub fn fit_decay(samples: &[(usize, f64)], n_sites: usize) -> DecayFit {
    let dropped: Vec<usize> = samples.iter().enumerate().filter(|(_, s)| !(s.1 >= MCMI_FLOOR)).map(|(i, _)| i).collect();
    let used: Vec<(f64, f64)> =
        samples.iter().filter(|s| s.1 >= MCMI_FLOOR).map(|&(d, h)| (d as f64, h.ln())).collect();
    let mut fit = DecayFit {
        samples: samples.to_vec(),
        dropped,
        status: FitStatus::Ok,
        prefactor: f64::NAN,
        k: f64::NAN,
        xi: f64::NAN,
        residual: f64::NAN,
    };
    if used.is_empty() && !samples.is_empty() {
        fit.status = FitStatus::AllZero;
        return fit;
    }
    if used.len() < 3 {
        fit.status = FitStatus::TooFewPoints;
        return fit;
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        fit.status = FitStatus::NoDecay;
        fit.xi = f64::INFINITY;
        return fit;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    fit.residual = (used.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    fit.prefactor = intercept.exp();
    fit.k = fit.prefactor / n_sites as f64;
    if slope >= 0.0 {
        fit.status = FitStatus::NoDecay;
        fit.xi = f64::INFINITY;
    } else {
        fit.xi = -1.0 / slope;
    }
    fit
}

/// Scan result: per-partition reports plus the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayScan {
    /// Reports in scan order.
    pub reports: Vec<McmiReport>,
    /// Fit of `H` against `dist(A, C)`.
    pub fit: DecayFit,
}

/// Evaluate the MCMI of the Gibbs state over a family of partitions and fit
/// its decay in `dist(A, C)`.
pub fn decay_scan(h: &LocalHamiltonian, beta: f64, family: &[Partition4]) -> Result<DecayScan> {
    let sigma = h.gibbs_state(h.universe(), beta)?;
    decay_scan_state(&sigma, h, family)
}

/// [`decay_scan`] for a precomputed state.
pub fn decay_scan_state(sigma: &Operator, h: &LocalHamiltonian, family: &[Partition4]) -> Result<DecayScan> {
    let mut reports = Vec::with_capacity(family.len());
    for p in family {
        if p.a.is_empty() || p.c.is_empty() {
            return Err(LabError::Domain("decay scans need non-empty A and C".into()));
        }
        reports.push(mcmi(sigma, p, h)?);
    }
    let samples: Vec<(usize, f64)> = reports.iter().map(|r| (r.dist.unwrap_or(0), r.h_norm)).collect();
    let fit = fit_decay(&samples, h.n_sites());
    Ok(DecayScan { reports, fit })
}

/// Chain family: `A` the first site, `C` the site at offset `j`, `D = ∅`,
/// for `j = 1, …, N − 1`, sorted by distance.
pub fn chain_family(h: &LocalHamiltonian) -> Result<Vec<Partition4>> {
    let sites = h.universe().sites().to_vec();
    let a = Region::new(vec![sites[0]]);
    let mut out = Vec::new();
    for &s in &sites[1..] {
        out.push(Partition4::with_rest(a.clone(), Region::new(vec![s]), Region::empty(), h.universe())?);
    }
    let lat = h.lattice();
    out.sort_by_key(|p| lattice::distance(lat, &p.a, &p.c, h.metric()).unwrap_or(0));
    Ok(out)
}

/// Classical MCMI and its site-chained upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalMcmi {
    /// `sup |log μ(a|cd) / μ(a|d)|` over configurations.
    pub value: f64,
    /// `Σ_i sup |log μ(a|x_i D_i) / μ(a|D_i)|` with `D_i = D ∪ {x_1, …, x_{i−1}}`.
    pub chained_bound: f64,
}

/// Classical MCMI of the Gibbs measure of a diagonal model, by exhaustive
/// enumeration of configurations.
///
/// `boundary` adds an energy `boundary[i][s]` when physical site `i` is in
/// local state `s`, which is how a boundary condition enters a finite volume;
/// an empty slice means free boundary.
pub fn classical_mcmi(h: &LocalHamiltonian, beta: f64, boundary: &[Vec<f64>], p: &Partition4) -> Result<ClassicalMcmi> {
    if !h.is_diagonal() {
        return Err(LabError::Capability("classical MCMI needs a diagonal model".into()));
    }
    let n = h.n_sites();
    let d = h.d();
    let total = d.checked_pow(n as u32).filter(|&t| t <= 1 << 22).ok_or_else(|| {
        LabError::Capability(format!("{n} sites are too many for configuration enumeration"))
    })?;
    let mut weights = vec![0.0; total];
    let mut config = vec![0usize; n];
    let mut energies = vec![0.0; total];
    for (idx, e) in energies.iter_mut().enumerate() {
        decode(idx, d, &mut config);
        let mut en = h.diagonal_energy(&config)?;
        for (i, row) in boundary.iter().enumerate() {
            en += row[config[i]];
        }
        *e = en;
    }
    let emin = energies.iter().copied().fold(f64::INFINITY, f64::min);
    for (w, e) in weights.iter_mut().zip(&energies) {
        *w = (-beta * (e - emin)).exp();
    }
    let pos = |r: &Region| -> Vec<usize> {
        r.iter().map(|s| h.universe().sites().binary_search(&s).expect("site inside model")).collect()
    };
    let (a, c, dd) = (pos(&p.a), pos(&p.c), pos(&p.d));
    let value = ratio_sup(&weights, n, d, &a, &c, &dd)?;
    let mut chained = 0.0;
    let mut cond = dd.clone();
    for &x in &c {
        chained += ratio_sup(&weights, n, d, &a, &[x], &cond)?;
        cond.push(x);
    }
    Ok(ClassicalMcmi { value, chained_bound: chained })
}

fn decode(mut idx: usize, d: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % d;
        idx /= d;
    }
}

/// `sup |log p(a c d) − log p(c d) − log p(a d) + log p(d)|` over configurations.
fn ratio_sup(weights: &[f64], n: usize, d: usize, a: &[usize], c: &[usize], dd: &[usize]) -> Result<f64> {
    let marginal = |sites: &[usize]| -> Vec<f64> {
        let mut m = vec![0.0; d.pow(sites.len() as u32)];
        let mut config = vec![0usize; n];
        for (idx, w) in weights.iter().enumerate() {
            decode(idx, d, &mut config);
            let key = sites.iter().fold(0, |acc, &s| acc * d + config[s]);
            m[key] += w;
        }
        m
    };
    let key = |sites: &[usize], config: &[usize]| sites.iter().fold(0, |acc, &s| acc * d + config[s]);
    let acd: Vec<usize> = a.iter().chain(c).chain(dd).copied().collect();
    let cd: Vec<usize> = c.iter().chain(dd).copied().collect();
    let ad: Vec<usize> = a.iter().chain(dd).copied().collect();
    let (m_acd, m_cd, m_ad, m_d) = (marginal(&acd), marginal(&cd), marginal(&ad), marginal(dd));
    let mut config = vec![0usize; n];
    let mut best: f64 = 0.0;
    for idx in 0..weights.len() {
        decode(idx, d, &mut config);
        let vals = [m_acd[key(&acd, &config)], m_cd[key(&cd, &config)], m_ad[key(&ad, &config)], m_d[key(dd, &config)]];
        if vals.iter().any(|&v| v <= 0.0) {
            return Err(LabError::Singularity {
                what: "conditional probability".into(),
                min_eigenvalue: vals.iter().copied().fold(f64::INFINITY, f64::min),
            });
        }
        let r = vals[0].ln() - vals[1].ln() - vals[2].ln() + vals[3].ln();
        best = best.max(r.abs());
    }
    Ok(best)
}
