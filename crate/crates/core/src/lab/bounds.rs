//! Closed-form bound calculators and their admissibility gates.
//!
//! Values are evaluated in log space (`ln_value` is finite whenever the
//! inputs are in the domain of the formula) and `value = exp(ln_value)`,
//! which can overflow to infinity for the doubly exponential bounds. Gate
//! thresholds are evaluated in plain arithmetic and compared with `ε`
//! inclusively.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Symbolic inputs of the bound calculators; every field is optional and a
/// formula that needs a missing symbol fails with a configuration error
/// naming it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    /// MCMI decay prefactor `K`.
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k_decay: Option<f64>,
    /// MCMI correlation length `ξ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    /// Growth constant `g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    /// Largest term norm `J`.
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    /// Inverse temperature `β`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Lattice dimension `D`.
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<f64>,
    /// Number of sites `N = |Λ|`.
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<f64>,
    /// Precision `ε`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Smallest infinite-temperature weight `χ⁰_min`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi0_min: Option<f64>,
    /// Local-gap constant `C` in `λ(L_A) ≥ C |A|^{−μ}`.
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub gap_c: Option<f64>,
    /// Local-gap exponent `μ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Local dimension `d`.
    #[serde(rename = "d", default, skip_serializing_if = "Option::is_none")]
    pub local_dim: Option<f64>,
    /// Interaction range `r`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Coarse-graining buffer `k`.
    #[serde(rename = "k", default, skip_serializing_if = "Option::is_none")]
    pub buffer: Option<f64>,
    /// Coarse-graining overlap `c`.
    #[serde(rename = "c", default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<f64>,
    /// Top-level cell side `ℓ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    /// Half side `L` of the lattice `⟦−L, L⟧^D`.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub half_side: Option<f64>,
    /// Number of cover regions `n_A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cover: Option<f64>,
    /// `max_i |A_i∂|` over the cover.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_closure: Option<f64>,
    /// Additive constant `c₂` of a weak approximate tensorization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    /// Region size `|A|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    /// Closure size `|A∂|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_closure: Option<f64>,
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    match v {
        Some(x) if x.is_finite() => Ok(x),
        Some(x) => Err(LabError::Config(format!("bound input `{name}` = {x} is not finite"))),
        None => Err(LabError::Config(format!("bound input `{name}` is missing"))),
    }
}

/// Natural logarithm of a quantity that must be positive.
fn ln_pos(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x.ln())
    } else {
        Err(LabError::Config(format!("{what} = {x} is outside the domain of the formula")))
    }
}

/// Lazily resolved symbols: each accessor fails with the symbol's name.
struct Inputs<'a>(&'a BoundInputs);

impl Inputs<'_> {
    fn k(&self) -> Result<f64> {
        need(self.0.k_decay, "K")
    }
    fn xi(&self) -> Result<f64> {
        need(self.0.xi, "xi")
    }
    fn g(&self) -> Result<f64> {
        need(self.0.g, "g")
    }
    fn j(&self) -> Result<f64> {
        need(self.0.j, "J")
    }
    fn beta(&self) -> Result<f64> {
        need(self.0.beta, "beta")
    }
    fn dim(&self) -> Result<f64> {
        need(self.0.dim, "D")
    }
    fn n(&self) -> Result<f64> {
        need(self.0.n_sites, "N")
    }
    fn eps(&self) -> Result<f64> {
        need(self.0.eps, "eps")
    }
    fn chi0(&self) -> Result<f64> {
        need(self.0.chi0_min, "chi0_min")
    }
    fn gap_c(&self) -> Result<f64> {
        need(self.0.gap_c, "C")
    }
    fn mu(&self) -> Result<f64> {
        need(self.0.mu, "mu")
    }
    fn d(&self) -> Result<f64> {
        need(self.0.local_dim, "d")
    }
    fn r(&self) -> Result<f64> {
        need(self.0.r, "r")
    }
    fn c(&self) -> Result<f64> {
        need(self.0.overlap, "c")
    }
    fn l(&self) -> Result<f64> {
        need(self.0.half_side, "L")
    }
}

/// Identifier of a closed-form bound or gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    /// Weak-AT error `D 2^D K N e^{−c/ξ}`.
    WeakAtError,
    /// Weak-AT error without the level-doubling factor, `D K N e^{−c/ξ}`.
    WeakAtErrorCompact,
    /// Inverse weak-MLSI constant valid at every temperature.
    WmlsiAnyBeta,
    /// Inverse weak-MLSI constant under a polynomial local gap.
    WmlsiGap,
    /// The same with the constants carried through the proof.
    WmlsiGapProof,
    /// Complete-MLSI constant of a region from its local gap.
    CmlsiFromGap,
    /// Trace-distance mixing time under a polynomial local gap.
    TraceMixingTime,
    /// Wasserstein mixing time valid at every temperature.
    W1MixingQuasi,
    /// Wasserstein mixing time under a polynomial local gap.
    W1MixingHyper,
    /// Transport-cost constant `b₁ = 2√(2n_A) max_i |A_i∂|`.
    TcB1,
    /// Transport-cost constant in the display form `max_i 2√2 |A_i∂| √n_A`.
    TcB1Display,
    /// Transport-cost constant `b₂ = |Λ| √(2c₂)`.
    TcB2,
}

impl FormulaId {
    /// Every formula.
    pub const ALL: [FormulaId; 12] = [
        FormulaId::WeakAtError,
        FormulaId::WeakAtErrorCompact,
        FormulaId::WmlsiAnyBeta,
        FormulaId::WmlsiGap,
        FormulaId::WmlsiGapProof,
        FormulaId::CmlsiFromGap,
        FormulaId::TraceMixingTime,
        FormulaId::W1MixingQuasi,
        FormulaId::W1MixingHyper,
        FormulaId::TcB1,
        FormulaId::TcB1Display,
        FormulaId::TcB2,
    ];

    /// Snake-case identifier.
    pub fn as_str(self) -> &'static str {
        match self {
            FormulaId::WeakAtError => "weak_at_error",
            FormulaId::WeakAtErrorCompact => "weak_at_error_compact",
            FormulaId::WmlsiAnyBeta => "wmlsi_any_beta",
            FormulaId::WmlsiGap => "wmlsi_gap",
            FormulaId::WmlsiGapProof => "wmlsi_gap_proof",
            FormulaId::CmlsiFromGap => "cmlsi_from_gap",
            FormulaId::TraceMixingTime => "trace_mixing_time",
            FormulaId::W1MixingQuasi => "w1_mixing_quasi",
            FormulaId::W1MixingHyper => "w1_mixing_hyper",
            FormulaId::TcB1 => "tc_b1",
            FormulaId::TcB1Display => "tc_b1_display",
            FormulaId::TcB2 => "tc_b2",
        }
    }

    /// Parse a snake-case identifier.
    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| LabError::Config(format!("unknown formula id `{s}`")))
    }

    /// The formula as text (natural logarithms throughout).
    pub fn formula(self) -> &'static str {
        match self {
            FormulaId::WeakAtError => "D 2^D K N exp(-c/xi)",
            FormulaId::WeakAtErrorCompact => "D K N exp(-c/xi)",
            FormulaId::WmlsiAnyBeta => {
                "1/alpha = (D+1)/chi0_min * exp(2gJ) * exp(4 beta g J (2D(2r + xi log(K D 2^D N/eps)) + 1)^D)"
            }
            FormulaId::WmlsiGap => {
                "1/alpha = (D+1)/C * (5 + 4 beta g J + 8 log d) * (2D(r + xi log(K D 2^D N/eps)))^(D(1+mu))"
            }
            FormulaId::WmlsiGapProof => {
                "1/alpha = (D+1)/C * (5 + 4 beta g J + 6 log d) * (2D(r + xi log(K D 2^D N/eps)) + 1)^(D(1+mu))"
            }
            FormulaId::CmlsiFromGap => "alpha_c >= C / (2 log 10 + 2(2 beta g J + 3 log d)|A_closure|) * |A|^(-mu)",
            FormulaId::TraceMixingTime => {
                "t = (D+1)/C * (5 + 4 beta g J + 8 log d) * (2D(r + xi log(2 K D 2^D N/eps^2)))^(D(1+mu)) \
                 * log(4(2 beta g J + log d) N/eps^2)"
            }
            FormulaId::W1MixingQuasi => {
                "t = (D+1) exp(2gJ)/chi0_min * exp(4 beta g J (2D(2r + xi log(64 K D (D+1) 2^D/eps^2 * P)) + 1)^D) \
                 * log(64 (2 beta g J + log d)(D+1)/eps^2 * P), P = (2D(r + xi log(8 D 2^D K N/eps^2)) + 1)^(2D)"
            }
            FormulaId::W1MixingHyper => {
                "t = (D+1)/C * (5 + 4 beta g J + 8 log d) * (2D(r + xi log(64 K D 2^D/eps^2 * P)) + 1)^(D(1+mu)) \
                 * log(64 (2 beta g J + log d)/eps^2 * P), P = (2D(r + xi log(8 D 2^D K N/eps^2)) + 1)^(2D)"
            }
            FormulaId::TcB1 => "b1 = 2 sqrt(2 n_A) max_closure",
            FormulaId::TcB1Display => "b1 = 2 sqrt(2) max_closure sqrt(n_A)",
            FormulaId::TcB2 => "b2 = N sqrt(2 c2)",
        }
    }

    /// The admissibility condition on `ε`, when the formula has one.
    pub fn gate(self) -> Option<&'static str> {
        match self {
            FormulaId::WmlsiAnyBeta => Some("eps >= K D 2^D (2L+1)^D exp(2r/xi - L/(D xi))"),
            FormulaId::WmlsiGap | FormulaId::WmlsiGapProof => {
                Some("eps >= K D 2^D (2L+1)^D exp(r/xi - L/(D xi))")
            }
            FormulaId::TraceMixingTime => Some("eps >= sqrt(2 K D 2^D N) exp(r/(2 xi) - (N^(1/D) - 1)/(4 D xi))"),
            FormulaId::W1MixingQuasi => {
                Some("eps >= 8 N sqrt((D+1) K D 2^D) exp(r/xi - (N^(1/D) - 1)/(4 D xi))")
            }
            FormulaId::W1MixingHyper => {
                Some("eps >= 8 N sqrt((D+1) K D 2^D) exp(r/(2 xi) - (N^(1/D) - 1)/(4 D xi))")
            }
            _ => None,
        }
    }
}

/// Admissibility of `ε` for a formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    /// Smallest admissible `ε`.
    pub threshold: f64,
    /// `ε ≥ threshold`.
    pub admissible: bool,
}

/// One evaluated bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Formula identifier.
    pub id: FormulaId,
    /// The formula as text.
    pub formula: String,
    /// Inputs, echoed verbatim.
    pub inputs: BoundInputs,
    /// `exp(ln_value)`; may be infinite for doubly exponential bounds, and an
    /// infinite value is serialized as `null`.
    #[serde(with = "overflow_as_null")]
    pub value: f64,
    /// Natural logarithm of the value.
    pub ln_value: f64,
    /// Admissibility gate, when the formula has one.
    pub gate: Option<GateReport>,
}

/// Evaluate the listed formulas.
pub fn bound_calculators(inputs: &BoundInputs, ids: &[FormulaId]) -> Result<Vec<BoundReport>> {
    ids.iter().map(|&id| evaluate(id, inputs)).collect()
}

/// Evaluate one formula and its gate.
pub fn evaluate(id: FormulaId, inputs: &BoundInputs) -> Result<BoundReport> {
    let s = Inputs(inputs);
    let ln_value = ln_value(id, &s)?;
    let gate = match gate_threshold(id, &s)? {
        Some(threshold) => Some(GateReport { threshold, admissible: s.eps()? >= threshold }),
        None => None,
    };
    Ok(BoundReport {
        id,
        formula: id.formula().to_string(),
        inputs: *inputs,
        value: ln_value.exp(),
        ln_value,
        gate,
    })
}

/// `K D 2^D`, shared by several formulas.
fn kd2d(s: &Inputs) -> Result<f64> {
    let dim = s.dim()?;
    Ok(s.k()? * dim * 2f64.powf(dim))
}

fn ln_value(id: FormulaId, s: &Inputs) -> Result<f64> {
    match id {
        FormulaId::WeakAtError | FormulaId::WeakAtErrorCompact => {
            let dim = s.dim()?;
            let level = if id == FormulaId::WeakAtError { 2f64.powf(dim) } else { 1.0 };
            Ok(ln_pos(dim * level * s.k()? * s.n()?, "D 2^D K N")? - s.c()? / s.xi()?)
        }
        FormulaId::WmlsiAnyBeta => {
            let (dim, gj) = (s.dim()?, s.g()? * s.j()?);
            let inner = ln_pos(kd2d(s)? * s.n()? / s.eps()?, "K D 2^D N/eps")?;
            let base = 2.0 * dim * (2.0 * s.r()? + s.xi()? * inner) + 1.0;
            Ok(ln_pos((dim + 1.0) / s.chi0()?, "(D+1)/chi0_min")? + 2.0 * gj + 4.0 * s.beta()? * gj * base.powf(dim))
        }
        FormulaId::WmlsiGap | FormulaId::WmlsiGapProof => {
            let (dim, gj) = (s.dim()?, s.g()? * s.j()?);
            let proof = id == FormulaId::WmlsiGapProof;
            let inner = ln_pos(kd2d(s)? * s.n()? / s.eps()?, "K D 2^D N/eps")?;
            let shift = if proof { 1.0 } else { 0.0 };
            let base = 2.0 * dim * (s.r()? + s.xi()? * inner) + shift;
            let log_coeff = if proof { 6.0 } else { 8.0 };
            let middle = 5.0 + 4.0 * s.beta()? * gj + log_coeff * s.d()?.ln();
            Ok(ln_pos((dim + 1.0) / s.gap_c()?, "(D+1)/C")?
                + ln_pos(middle, "5 + 4 beta g J + log term")?
                + dim * (1.0 + s.mu()?) * ln_pos(base, "polynomial base")?)
        }
        FormulaId::CmlsiFromGap => {
            let gj = s.g()? * s.j()?;
            let area_closure = need(s.0.area_closure, "area_closure")?;
            let area = need(s.0.area, "area")?;
            let denom = 2.0 * 10f64.ln() + 2.0 * (2.0 * s.beta()? * gj + 3.0 * s.d()?.ln()) * area_closure;
            Ok(ln_pos(s.gap_c()?, "C")? - ln_pos(denom, "denominator")? - s.mu()? * ln_pos(area, "area")?)
        }
        FormulaId::TraceMixingTime => {
            let (dim, gj, eps2) = (s.dim()?, s.g()? * s.j()?, s.eps()?.powi(2));
            let inner = ln_pos(2.0 * kd2d(s)? * s.n()? / eps2, "2 K D 2^D N/eps^2")?;
            let base = 2.0 * dim * (s.r()? + s.xi()? * inner);
            let middle = 5.0 + 4.0 * s.beta()? * gj + 8.0 * s.d()?.ln();
            let tail = (4.0 * (2.0 * s.beta()? * gj + s.d()?.ln()) * s.n()? / eps2).ln();
            Ok(ln_pos((dim + 1.0) / s.gap_c()?, "(D+1)/C")?
                + ln_pos(middle, "5 + 4 beta g J + 8 log d")?
                + dim * (1.0 + s.mu()?) * ln_pos(base, "polynomial base")?
                + ln_pos(tail, "log(4(2 beta g J + log d) N/eps^2)")?)
        }
        FormulaId::W1MixingQuasi | FormulaId::W1MixingHyper => {
            let (dim, gj, eps2, xi, r) = (s.dim()?, s.g()? * s.j()?, s.eps()?.powi(2), s.xi()?, s.r()?);
            let kd2d = kd2d(s)?;
            let inner = ln_pos(8.0 * kd2d * s.n()? / eps2, "8 D 2^D K N/eps^2")?;
            let ln_p = 2.0 * dim * ln_pos(2.0 * dim * (r + xi * inner) + 1.0, "inner polynomial base")?;
            let ln_tail_arg = |pref: f64| -> Result<f64> {
                let arg = ln_pos(pref / eps2, "tail prefactor")? + ln_p;
                ln_pos(arg, "tail logarithm")
            };
            if id == FormulaId::W1MixingQuasi {
                let ln_mid = ln_pos(64.0 * kd2d * (dim + 1.0) / eps2, "64 K D (D+1) 2^D/eps^2")? + ln_p;
                let base = 2.0 * dim * (2.0 * r + xi * ln_mid) + 1.0;
                let tail_pref = 64.0 * (2.0 * s.beta()? * gj + s.d()?.ln()) * (dim + 1.0);
                Ok(ln_pos((dim + 1.0) / s.chi0()?, "(D+1)/chi0_min")?
                    + 2.0 * gj
                    + 4.0 * s.beta()? * gj * base.powf(dim)
                    + ln_tail_arg(tail_pref)?)
            } else {
                let ln_mid = ln_pos(64.0 * kd2d / eps2, "64 K D 2^D/eps^2")? + ln_p;
                let base = 2.0 * dim * (r + xi * ln_mid) + 1.0;
                let middle = 5.0 + 4.0 * s.beta()? * gj + 8.0 * s.d()?.ln();
                let tail_pref = 64.0 * (2.0 * s.beta()? * gj + s.d()?.ln());
                Ok(ln_pos((dim + 1.0) / s.gap_c()?, "(D+1)/C")?
                    + ln_pos(middle, "5 + 4 beta g J + 8 log d")?
                    + dim * (1.0 + s.mu()?) * ln_pos(base, "polynomial base")?
                    + ln_tail_arg(tail_pref)?)
            }
        }
        FormulaId::TcB1 | FormulaId::TcB1Display => {
            let n_cover = need(s.0.n_cover, "n_cover")?;
            let max_closure = need(s.0.max_closure, "max_closure")?;
            let v = if id == FormulaId::TcB1 {
                2.0 * (2.0 * n_cover).sqrt() * max_closure
            } else {
                2.0 * 2f64.sqrt() * max_closure * n_cover.sqrt()
            };
            ln_pos(v, "b1")
        }
        FormulaId::TcB2 => {
            let c2 = need(s.0.c2, "c2")?;
            if c2 < 0.0 {
                return Err(LabError::Config(format!("c2 = {c2} must be non-negative")));
            }
            Ok(s.n()?.ln() + 0.5 * (2.0 * c2).ln())
        }
    }
}

fn gate_threshold(id: FormulaId, s: &Inputs) -> Result<Option<f64>> {
    let threshold = match id {
        FormulaId::WmlsiAnyBeta | FormulaId::WmlsiGap | FormulaId::WmlsiGapProof => {
            let (dim, xi, r, l) = (s.dim()?, s.xi()?, s.r()?, s.l()?);
            let r_coeff = if id == FormulaId::WmlsiAnyBeta { 2.0 } else { 1.0 };
            kd2d(s)? * (2.0 * l + 1.0).powf(dim) * (r_coeff * r / xi - l / (dim * xi)).exp()
        }
        FormulaId::TraceMixingTime => {
            let (dim, xi, r, n) = (s.dim()?, s.xi()?, s.r()?, s.n()?);
            (2.0 * kd2d(s)? * n).sqrt() * (r / (2.0 * xi) - (n.powf(1.0 / dim) - 1.0) / (4.0 * dim * xi)).exp()
        }
        FormulaId::W1MixingQuasi | FormulaId::W1MixingHyper => {
            let (dim, xi, r, n) = (s.dim()?, s.xi()?, s.r()?, s.n()?);
            let r_term = if id == FormulaId::W1MixingQuasi { r / xi } else { r / (2.0 * xi) };
            8.0 * n * ((dim + 1.0) * kd2d(s)?).sqrt() * (r_term - (n.powf(1.0 / dim) - 1.0) / (4.0 * dim * xi)).exp()
        }
        _ => return Ok(None),
    };
    Ok(Some(threshold))
}

/// One row of the polylogarithmic scaling table of the trace mixing time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolylogRow {
    /// Number of sites.
    pub n_sites: f64,
    /// Natural logarithm of the mixing-time bound.
    pub ln_value: f64,
    /// `(log(N/ε²))^{1+D(1+μ)}`.
    pub reference: f64,
    /// Bound divided by the reference.
    pub ratio: f64,
    /// Whether `ε` passes the gate at this `N`.
    pub admissible: bool,
}

/// Trace mixing-time bound at `N = 10², 10³, …, 10^{max_exponent}` with
/// the remaining inputs taken from `inputs`, against `(log(N/ε²))^{1+D(1+μ)}`.
pub fn polylog_table(inputs: &BoundInputs, max_exponent: u32) -> Result<Vec<PolylogRow>> {
    let mut rows = Vec::new();
    for e in 2..=max_exponent {
        let n = 10f64.powi(e as i32);
        let local = BoundInputs { n_sites: Some(n), ..*inputs };
        let report = evaluate(FormulaId::TraceMixingTime, &local)?;
        let s = Inputs(&local);
        let exponent = 1.0 + s.dim()? * (1.0 + s.mu()?);
        let reference = (n / s.eps()?.powi(2)).ln().powf(exponent);
        rows.push(PolylogRow {
            n_sites: n,
            ln_value: report.ln_value,
            reference,
            ratio: (report.ln_value - reference.ln()).exp(),
            admissible: report.gate.map(|g| g.admissible).unwrap_or(true),
        });
    }
    Ok(rows)
}


/// Serde adapter for non-negative values that may overflow: `+∞` is written
/// as `null` (JSON has no infinity) and `null` reads back as `+∞`.
mod overflow_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
