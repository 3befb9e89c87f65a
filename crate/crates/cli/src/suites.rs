//! The experiment suites. Each suite runs independent grid cells (one per
//! inverse temperature) on the job pool and returns its artifacts in grid
//! order, so outputs do not depend on scheduling.

use std::path::PathBuf;

use davies_lab::davies::{mixing_state_set, ExpectationRoute};
use davies_lab::lab::{
    bound_calculators, check_heat_bath, check_weak_entropy_factorization, check_weak_tc, empirical_wmlsi,
    polylog_table, trace_mixing_time, FormulaId, InequalityVerdict, MlsiContext, TcCover, WeakAtContext,
};
use davies_lab::mcmi::{chain_family, decay_scan_state};
use davies_lab::models::predicted_mcmi_rate;
use davies_lab::opcore::{kron, random_mixed_state, seeded_rng, CMat, C64, ZERO};
use davies_lab::w1::{w1_distance, w1_mixing_time, witness_violation, W1Options, WITNESS_TOL};
use davies_lab::{build_davies, CoarseGraining, LabError, LocalHamiltonian, Operator, Partition4, Region};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{region, ExperimentConfig, Reference, Suite};
use crate::output::{fmt_coords, fmt_f64, json_artifact, sha256_hex, Artifact, Table};

/// Everything a suite needs.
pub struct RunContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub h: &'a LocalHamiltonian,
    pub seed: u64,
    pub pool: &'a rayon::ThreadPool,
    pub cache: Option<PathBuf>,
}

/// Artifacts and verdict counts of one suite.
#[derive(Default)]
pub struct SuiteOutput {
    pub artifacts: Vec<Artifact>,
    pub verdicts: usize,
    pub failures: usize,
}

impl SuiteOutput {
    fn count(&mut self, pass: bool) {
        self.verdicts += 1;
        if !pass {
            self.failures += 1;
        }
    }
}

type Result<T> = std::result::Result<T, LabError>;

pub fn run(ctx: &RunContext, suite: Suite) -> Result<SuiteOutput> {
    match suite {
        Suite::CoarseGrain => coarse_grain(ctx),
        Suite::McmiScan => mcmi_scan(ctx),
        Suite::Ineq => ineq(ctx),
        Suite::Gap => gap(ctx),
        Suite::Mix => mix(ctx),
        Suite::W1 => w1(ctx),
        Suite::Bounds => bounds(ctx),
    }
}

impl RunContext<'_> {
    /// Independent random stream for one grid cell of one suite.
    fn rng(&self, suite: Suite, cell: usize) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(suite.as_str().as_bytes());
        hasher.update((cell as u64).to_le_bytes());
        let digest = hasher.finalize();
        seeded_rng(u64::from_le_bytes(digest[..8].try_into().expect("eight bytes")))
    }

    /// Run `f` over the inverse-temperature grid on the job pool, in order.
    fn per_beta<T: Send>(&self, f: impl Fn(usize, f64) -> Result<T> + Sync) -> Result<Vec<T>> {
        self.pool.install(|| self.cfg.betas.par_iter().enumerate().map(|(i, &b)| f(i, b)).collect())
    }

    /// Gibbs state of the whole model, memoized on disk when a cache
    /// directory is configured. Entries are keyed by the model digest and
    /// the bit pattern of `β`.
    fn gibbs(&self, beta: f64) -> Result<Operator> {
        let Some(dir) = &self.cache else {
            return self.h.gibbs_state(self.h.universe(), beta);
        };
        let mut key = self.h.canonical_text().into_bytes();
        key.extend_from_slice(&beta.to_bits().to_le_bytes());
        let path = dir.join(format!("gibbs-{}.json", sha256_hex(&key)));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(op) = serde_json::from_str::<Operator>(&text) {
                if op.register() == &self.h.full_register() {
                    return Ok(op);
                }
            }
        }
        let op = self.h.gibbs_state(self.h.universe(), beta)?;
        if std::fs::create_dir_all(dir).is_ok() {
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            if std::fs::write(&tmp, serde_json::to_vec(&op).expect("serializable")).is_ok() {
                let _ = std::fs::rename(&tmp, &path);
            }
        }
        Ok(op)
    }

    fn coords(&self, r: &Region) -> String {
        fmt_coords(&r.iter().map(|s| self.h.lattice().coord(s)).collect::<Vec<_>>())
    }

    fn partitions(&self) -> Result<Vec<Partition4>> {
        match &self.cfg.partitions {
            Some(specs) => specs
                .iter()
                .map(|p| {
                    let conv = |c: &[Vec<i64>]| region(self.h, c).map_err(|e| LabError::Config(e.to_string()));
                    Partition4::with_rest(conv(&p.a)?, conv(&p.c)?, conv(&p.d)?, self.h.universe())
                })
                .collect(),
            None => chain_family(self.h),
        }
    }

    fn regions_or_singles(&self, given: &Option<Vec<Vec<Vec<i64>>>>) -> Result<Vec<Region>> {
        match given {
            Some(rs) => rs
                .iter()
                .map(|r| region(self.h, r).map_err(|e| LabError::Config(e.to_string())))
                .collect(),
            None => Ok(self.h.universe().iter().map(|s| Region::new(vec![s])).collect()),
        }
    }

    fn coarse_graining(&self) -> Result<Option<CoarseGraining>> {
        self.cfg
            .coarse_graining
            .map(|p| CoarseGraining::build(self.h.lattice(), Some(self.h.universe()), p))
            .transpose()
    }
}

fn beta_tag(beta: f64) -> String {
    format!("{beta}")
}

// ---------------------------------------------------------------------------
// coarse-grain
// ---------------------------------------------------------------------------

fn coarse_grain(ctx: &RunContext) -> Result<SuiteOutput> {
    let cg = ctx.coarse_graining()?.expect("validated");
    let mut out = SuiteOutput::default();
    let mut cells = Table::new(&["level", "cell", "interior_size", "cell_size", "fattened_size", "cell_sites"]);
    for (level, index, cell) in cg.physical_cells() {
        let coords: Vec<Vec<i64>> = cell.cell.iter().map(|s| cg.lattice.coord(s)).collect();
        cells.row(vec![
            level.to_string(),
            index.to_string(),
            cell.interior.len().to_string(),
            cell.cell.len().to_string(),
            cell.fattened.len().to_string(),
            fmt_coords(&coords),
        ]);
    }
    let mut roles = Table::new(&["site", "level", "cell", "role"]);
    for (site, level, cell, role) in cg.site_roles() {
        roles.row(vec![fmt_coords(&[cg.lattice.coord(site)]), level.to_string(), cell.to_string(), role.as_str().into()]);
    }
    let report = if cg.is_padded() { cg.verify_physical() } else { cg.verify() };
    out.count(report.all_pass());
    out.artifacts.push(cells.finish("coarse_grain_cells.csv"));
    out.artifacts.push(roles.finish("coarse_grain_roles.csv"));
    out.artifacts.push(json_artifact("coarse_grain_report.json", &report));
    Ok(out)
}

// ---------------------------------------------------------------------------
// mcmi-scan
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct FitRecord {
    beta: f64,
    fit: davies_lab::mcmi::DecayFit,
    predicted_rate: Option<davies_lab::models::PredictedRate>,
}

fn mcmi_scan(ctx: &RunContext) -> Result<SuiteOutput> {
    let family = ctx.partitions()?;
    let cells = ctx.per_beta(|_, beta| {
        let sigma = ctx.gibbs(beta)?;
        let scan = decay_scan_state(&sigma, ctx.h, &family)?;
        let mut t = Table::new(&["a", "c", "d", "dist", "h_norm", "cmi", "cmi_entropy_form", "mi"]);
        for r in &scan.reports {
            t.row(vec![
                ctx.coords(&r.partition.a),
                ctx.coords(&r.partition.c),
                ctx.coords(&r.partition.d),
                r.dist.map_or(String::new(), |d| d.to_string()),
                fmt_f64(r.h_norm),
                fmt_f64(r.cmi),
                fmt_f64(r.cmi_entropy_form),
                fmt_f64(r.mi),
            ]);
        }
        let predicted = predicted_mcmi_rate(ctx.h, beta).ok();
        Ok((t.finish(format!("mcmi_beta_{}.csv", beta_tag(beta))), FitRecord { beta, fit: scan.fit, predicted_rate: predicted }))
    })?;
    let mut out = SuiteOutput::default();
    let mut fits = Vec::new();
    for (table, fit) in cells {
        out.artifacts.push(table);
        fits.push(fit);
    }
    out.artifacts.push(json_artifact("mcmi_fit.json", &fits));
    Ok(out)
}

// ---------------------------------------------------------------------------
// ineq
// ---------------------------------------------------------------------------

/// Product of `diag(1 − (d−1)w, w, …, w)` over the model sites.
fn biased_product(h: &LocalHamiltonian, weight: f64) -> Result<Operator> {
    let d = h.d();
    let local = CMat::from_fn(d, d, |i, j| match (i == j, i) {
        (true, 0) => C64::new(1.0 - (d as f64 - 1.0) * weight, 0.0),
        (true, _) => C64::new(weight, 0.0),
        _ => ZERO,
    });
    let mut m = CMat::identity(1, 1);
    for _ in 0..h.n_sites() {
        m = kron(&m, &local);
    }
    Operator::new(h.full_register(), m)
}

fn ineq(ctx: &RunContext) -> Result<SuiteOutput> {
    let cfg = &ctx.cfg.ineq;
    let partitions = ctx.partitions()?;
    let mlsi_regions = ctx.regions_or_singles(&cfg.mlsi_regions)?;
    let heat_regions = ctx.regions_or_singles(&cfg.heat_bath_regions)?;
    let cg = ctx.coarse_graining()?;
    let rows = ctx.per_beta(|cell, beta| {
        let gibbs = ctx.gibbs(beta)?;
        let reference = match cfg.reference {
            Reference::Gibbs => gibbs.clone(),
            Reference::BiasedProduct { weight } => biased_product(ctx.h, weight)?,
        };
        let mut rng = ctx.rng(Suite::Ineq, cell);
        let states: Vec<Operator> =
            (0..cfg.samples).map(|_| random_mixed_state(&ctx.h.full_register(), 0.1, &mut rng)).collect();
        let mlsi: Vec<(Region, MlsiContext)> = mlsi_regions
            .iter()
            .map(|a| Ok((a.clone(), MlsiContext::new(ctx.h, beta, a, ctx.cfg.weights)?)))
            .collect::<Result<_>>()?;
        let heat = heat_regions
            .iter()
            .map(|a| {
                let e = build_davies(ctx.h, a, beta, ctx.cfg.weights)?.conditional_expectation(ExpectationRoute::Spectral)?;
                Ok((a.clone(), e))
            })
            .collect::<Result<Vec<_>>>()?;
        let weak = match &cg {
            Some(cg) => {
                let at = WeakAtContext::new(ctx.h, beta, cg, ctx.cfg.weights)?.with_reference(reference.clone())?;
                let tc = TcCover::new(ctx.h, at.cover(), at.c2())?;
                Some((at, tc))
            }
            None => None,
        };
        let mut rows: Vec<(usize, String, InequalityVerdict)> = Vec::new();
        for (i, rho) in states.iter().enumerate() {
            for p in &partitions {
                let label = format!("{}|{}|{}", ctx.coords(&p.a), ctx.coords(&p.c), ctx.coords(&p.d));
                let v = check_weak_entropy_factorization(rho, &reference, p)?;
                rows.push((i, label.clone(), v.additive));
                if let Some(m) = v.multiplicative {
                    rows.push((i, label, m));
                }
            }
            for (a, m) in &mlsi {
                for v in m.check(rho)?.all() {
                    rows.push((i, ctx.coords(a), v.clone()));
                }
            }
            for (a, e) in &heat {
                rows.push((i, ctx.coords(a), check_heat_bath(e, rho, &gibbs)?));
            }
            if let Some((at, tc)) = &weak {
                rows.push((i, String::new(), at.check(rho)?));
                rows.push((i, String::new(), check_weak_tc(tc, rho, &reference)?));
            }
        }
        Ok((beta, rows))
    })?;
    let mut out = SuiteOutput::default();
    let mut t = Table::new(&["beta", "sample", "check", "region", "left", "right", "slack", "pass", "digest"]);
    for (beta, rows) in rows {
        for (i, label, v) in rows {
            out.count(v.pass());
            t.row(vec![
                fmt_f64(beta),
                i.to_string(),
                v.id().into(),
                label,
                fmt_f64(v.left()),
                fmt_f64(v.right()),
                fmt_f64(v.slack()),
                v.pass().to_string(),
                v.digest().into(),
            ]);
        }
    }
    out.artifacts.push(t.finish("ineq_verdicts.csv"));
    Ok(out)
}

// ---------------------------------------------------------------------------
// gap
// ---------------------------------------------------------------------------

fn gap(ctx: &RunContext) -> Result<SuiteOutput> {
    let regions = ctx.cfg.gap_regions(ctx.h).map_err(|e| LabError::Config(e.to_string()))?;
    let rows = ctx.per_beta(|_, beta| {
        regions
            .iter()
            .map(|a| {
                let g = build_davies(ctx.h, a, beta, ctx.cfg.weights)?.spectral_gap()?;
                Ok(vec![
                    fmt_f64(beta),
                    ctx.coords(a),
                    fmt_f64(g.gap),
                    g.kernel_dim.to_string(),
                    g.degenerate.to_string(),
                ])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut t = Table::new(&["beta", "region", "gap", "kernel_dim", "degenerate"]);
    rows.into_iter().flatten().for_each(|r| t.row(r));
    Ok(SuiteOutput { artifacts: vec![t.finish("gaps.csv")], ..Default::default() })
}

// ---------------------------------------------------------------------------
// mix
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct WmlsiRecord {
    beta: f64,
    alpha: f64,
    c2: f64,
    worst_state: usize,
    envelope_violation: f64,
    rejected: Vec<usize>,
    excluded: Vec<usize>,
}

fn mix(ctx: &RunContext) -> Result<SuiteOutput> {
    let mix = ctx.cfg.mix.as_ref().expect("validated");
    let a = ctx.cfg.mix_region(ctx.h, mix).map_err(|e| LabError::Config(e.to_string()))?;
    let cells = ctx.per_beta(|_, beta| {
        let gen = build_davies(ctx.h, &a, beta, ctx.cfg.weights)?;
        let sigma = gen.sigma().clone();
        let states = mixing_state_set(&gen, &sigma)?;
        let mut rows = Vec::new();
        for &eps in &mix.eps {
            let t = trace_mixing_time(&gen, &states, eps, mix.horizon)?;
            rows.push(vec![
                fmt_f64(beta),
                fmt_f64(eps),
                "trace".into(),
                fmt_f64(t.time),
                t.worst_state.to_string(),
                fmt_f64(t.distance),
                fmt_f64(t.threshold),
            ]);
            if mix.w1 {
                let t = w1_mixing_time(&gen, &states, &sigma, eps, mix.horizon)?;
                rows.push(vec![
                    fmt_f64(beta),
                    fmt_f64(eps),
                    "w1".into(),
                    fmt_f64(t.time),
                    t.worst_state.to_string(),
                    fmt_f64(t.distance),
                    fmt_f64(t.threshold),
                ]);
            }
        }
        let wmlsi = if mix.wmlsi {
            let fit = empirical_wmlsi(&gen, &states, &sigma, mix.horizon)?;
            Some(WmlsiRecord {
                beta,
                alpha: fit.alpha,
                c2: fit.c2,
                worst_state: fit.worst_state,
                envelope_violation: fit.envelope_violation,
                rejected: fit.rejected,
                excluded: fit.excluded,
            })
        } else {
            None
        };
        Ok((rows, wmlsi))
    })?;
    let mut out = SuiteOutput::default();
    let mut t = Table::new(&["beta", "eps", "kind", "time", "worst_state", "distance", "threshold"]);
    let mut fits = Vec::new();
    for (rows, fit) in cells {
        rows.into_iter().for_each(|r| t.row(r));
        fits.extend(fit);
    }
    out.artifacts.push(t.finish("mix_times.csv"));
    if mix.wmlsi {
        out.artifacts.push(json_artifact("wmlsi_fit.json", &fits));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// w1
// ---------------------------------------------------------------------------

fn w1(ctx: &RunContext) -> Result<SuiteOutput> {
    let samples = ctx.cfg.w1.as_ref().map_or(5, |w| w.samples);
    let tol = ctx.cfg.tolerances;
    let opts = W1Options {
        sdp: davies_lab::w1::sdp::SdpOptions { tol: tol.sdp_tol, max_iter: tol.sdp_max_iter },
        gap_tol: tol.w1_gap_tol,
        ..W1Options::default()
    };
    let n_sites = ctx.h.n_sites() as f64;
    let rows = ctx.per_beta(|cell, beta| {
        let sigma = ctx.gibbs(beta)?;
        let mut rng = ctx.rng(Suite::W1, cell);
        let mut rows = Vec::new();
        for i in 0..samples {
            let rho = random_mixed_state(&ctx.h.full_register(), 0.1, &mut rng);
            let r = w1_distance(&rho, &sigma, opts)?;
            let witness_ok = witness_violation(&r.witness, &r.offsets)? <= 0.5 + WITNESS_TOL;
            let pass = 0.5 * r.trace_distance <= r.lower + 1e-9
                && r.lower <= r.upper + 1e-12
                && r.upper <= n_sites * r.trace_distance + 1e-9
                && witness_ok;
            rows.push((
                pass,
                vec![
                    fmt_f64(beta),
                    i.to_string(),
                    serde_json::to_value(r.method).expect("serializable").as_str().unwrap_or_default().to_string(),
                    fmt_f64(r.lower),
                    fmt_f64(r.value),
                    fmt_f64(r.upper),
                    fmt_f64(r.trace_distance),
                    r.gap_flag.to_string(),
                    r.iterations.to_string(),
                    pass.to_string(),
                ],
            ));
        }
        Ok(rows)
    })?;
    let mut out = SuiteOutput::default();
    let mut t =
        Table::new(&["beta", "sample", "method", "lower", "value", "upper", "trace_distance", "gap_flag", "iterations", "pass"]);
    for (pass, row) in rows.into_iter().flatten() {
        out.count(pass);
        t.row(row);
    }
    out.artifacts.push(t.finish("w1.csv"));
    Ok(out)
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

fn bounds(ctx: &RunContext) -> Result<SuiteOutput> {
    let cfg = ctx.cfg.bounds.as_ref().expect("validated");
    let ids: Vec<FormulaId> = cfg.formulas.clone().unwrap_or_else(|| FormulaId::ALL.to_vec());
    let reports = bound_calculators(&cfg.inputs, &ids)?;
    let mut out = SuiteOutput::default();
    let mut t = Table::new(&["formula", "value", "ln_value", "gate_threshold", "admissible"]);
    for r in &reports {
        t.row(vec![
            r.id.as_str().into(),
            fmt_f64(r.value),
            fmt_f64(r.ln_value),
            r.gate.map_or(String::new(), |g| fmt_f64(g.threshold)),
            r.gate.map_or(String::new(), |g| g.admissible.to_string()),
        ]);
    }
    out.artifacts.push(t.finish("bounds.csv"));
    out.artifacts.push(json_artifact("bounds.json", &reports));
    if let Some(max) = cfg.polylog_max_exponent {
        let rows = polylog_table(&cfg.inputs, max)?;
        let mut t = Table::new(&["n_sites", "ln_value", "reference", "ratio", "admissible"]);
        for r in rows {
            t.row(vec![fmt_f64(r.n_sites), fmt_f64(r.ln_value), fmt_f64(r.reference), fmt_f64(r.ratio), r.admissible.to_string()]);
        }
        out.artifacts.push(t.finish("polylog.csv"));
    }
    Ok(out)
}
