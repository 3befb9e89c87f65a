//! Small dense semidefinite programs in linear-matrix-inequality form,
//! solved by a primal–dual interior-point method.
//!
//! The problem pair is
//!
//! ```text
//! (D)  maximize  cᵀy   subject to  S = B − Σ_i y_i A_i ⪰ 0
//! (P)  minimize ⟨B, X⟩ subject to  ⟨A_i, X⟩ = c_i,  X ⪰ 0
//! ```
//!
//! with block-diagonal complex Hermitian `B`, `A_i`, `S`, `X` and the real
//! inner product `⟨U, V⟩ = Re tr[U V]`. Search directions follow the
//! HKM scaling with a Mehrotra predictor–corrector step.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::opcore::{eigvalsh, hermitize, matmul, CMat, C64};

/// Sparse Hermitian matrix stored as its full list of non-zero entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseHerm {
    /// `(row, col, value)` triples, both triangles included.
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseHerm {
    /// Dense copy of size `n`.
    pub fn to_dense(&self, n: usize) -> CMat {
        let mut m = CMat::zeros(n, n);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// `Re tr[self · Y]`.
    pub fn inner(&self, y: &CMat) -> f64 {
        self.entries.iter().map(|&(r, c, v)| (v * y[(c, r)]).re).sum()
    }

    /// Scaled copy.
    pub fn scaled(&self, s: f64) -> Self {
        Self { entries: self.entries.iter().map(|&(r, c, v)| (r, c, v * s)).collect() }
    }
}

/// Real orthonormal basis of `n × n` Hermitian matrices, as sparse matrices.
/// With `traceless`, the diagonal part is restricted to trace-zero matrices.
pub fn hermitian_sparse_basis(n: usize, traceless: bool) -> Vec<SparseHerm> {
    let mut out = Vec::new();
    let s = 1.0 / 2f64.sqrt();
    if traceless {
        for l in 1..n {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut entries: Vec<_> = (0..l).map(|m| (m, m, C64::new(norm, 0.0))).collect();
            entries.push((l, l, C64::new(-(l as f64) * norm, 0.0)));
            out.push(SparseHerm { entries });
        }
    } else {
        for i in 0..n {
            out.push(SparseHerm { entries: vec![(i, i, C64::new(1.0, 0.0))] });
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            out.push(SparseHerm { entries: vec![(i, j, C64::new(s, 0.0)), (j, i, C64::new(s, 0.0))] });
            out.push(SparseHerm { entries: vec![(i, j, C64::new(0.0, -s)), (j, i, C64::new(0.0, s))] });
        }
    }
    out
}

/// An SDP in linear-matrix-inequality form.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    /// Constant blocks `B_b`.
    pub b: Vec<CMat>,
    /// For each variable, its coefficient matrices `(block, A_{b,i})`.
    pub a: Vec<Vec<(usize, SparseHerm)>>,
    /// Objective `c`.
    pub c: Vec<f64>,
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    /// Relative tolerance on residuals and duality gap.
    pub tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 150 }
    }
}

/// Final iterate of the interior-point method.
#[derive(Debug, Clone)]
pub struct LmiSolution {
    /// Dual variables `y`.
    pub y: Vec<f64>,
    /// Dual slack `S = B − Σ y_i A_i`.
    pub s: Vec<CMat>,
    /// Primal blocks `X`.
    pub x: Vec<CMat>,
    /// `cᵀy`.
    pub dual_objective: f64,
    /// `⟨B, X⟩`.
    pub primal_objective: f64,
    /// Largest primal equality residual.
    pub primal_residual: f64,
    /// Iterations used.
    pub iterations: usize,
    /// Whether residuals and duality gap reached the tolerance. Callers
    /// certify bounds from the iterate either way.
    pub converged: bool,
}

impl LmiProblem {
    fn nvars(&self) -> usize {
        self.c.len()
    }

    /// `Σ_i y_i A_i` per block.
    pub fn combine(&self, y: &[f64]) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.b.iter().map(|m| CMat::zeros(m.nrows(), m.ncols())).collect();
        for (i, parts) in self.a.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            for (blk, m) in parts {
                for &(r, c, v) in &m.entries {
                    out[*blk][(r, c)] += v * y[i];
                }
            }
        }
        out
    }

    /// Slack `B − Σ_i y_i A_i`.
    pub fn slack(&self, y: &[f64]) -> Vec<CMat> {
        self.combine(y).into_iter().zip(&self.b).map(|(ay, b)| b - ay).collect()
    }

    /// `(⟨A_i, X⟩)_i`.
    fn apply_adjoint(&self, x: &[CMat]) -> DVector<f64> {
        DVector::from_iterator(
            self.nvars(),
            self.a.iter().map(|parts| parts.iter().map(|(blk, m)| m.inner(&x[*blk])).sum::<f64>()),
        )
    }

    /// Schur complement `M_ij = ⟨A_i, X A_j S⁻¹⟩`, accumulated block by block.
    fn schur(&self, x: &[CMat], s_inv: &[CMat]) -> DMatrix<f64> {
        let m = self.nvars();
        let mut per_block: Vec<Vec<(usize, &SparseHerm)>> = vec![Vec::new(); self.b.len()];
        for (i, parts) in self.a.iter().enumerate() {
            for (blk, mat) in parts {
                per_block[*blk].push((i, mat));
            }
        }
        let mut out = DMatrix::<f64>::zeros(m, m);
        for (blk, vars) in per_block.iter().enumerate() {
            let (xb, sb) = (&x[blk], &s_inv[blk]);
            for (pi, &(i, ai)) in vars.iter().enumerate() {
                for &(j, aj) in &vars[pi..] {
                    let mut acc = 0.0;
                    for &(r, c, u) in &ai.entries {
                        for &(r2, c2, v) in &aj.entries {
                            acc += (u * xb[(c, r2)] * v * sb[(c2, r)]).re;
                        }
                    }
                    out[(i, j)] += acc;
                    if i != j {
                        out[(j, i)] += acc;
                    }
                }
            }
        }
        out
    }
}

fn inner(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(u, v)| crate::opcore::trace_product(u, v).re).sum()
}

fn max_entry(a: &[CMat]) -> f64 {
    a.iter().map(crate::opcore::max_abs).fold(0.0, f64::max)
}

/// Largest `α ≤ 1` with `M + α ΔM ⪰ 0` for every block, damped by `0.95`.
fn step_length(m: &[CMat], dm: &[CMat]) -> f64 {
    let mut alpha: f64 = 1.0;
    for (mb, db) in m.iter().zip(dm) {
        let chol = match Cholesky::new(hermitize(mb)) {
            Some(c) => c,
            None => return 0.0,
        };
        let l_inv = chol.l().try_inverse().expect("Cholesky factor is invertible");
        let scaled = hermitize(&matmul(&matmul(&l_inv, db), &l_inv.adjoint()));
        let lmin = eigvalsh(&scaled)[0];
        if lmin < 0.0 {
            alpha = alpha.min(-0.95 / lmin);
        }
    }
    alpha.min(1.0)
}

fn hermitian_inverse(m: &CMat) -> Result<CMat> {
    Cholesky::new(hermitize(m))
        .map(|c| c.inverse())
        .ok_or_else(|| LabError::Convergence { context: "interior-point iterate lost definiteness".into(), residual: f64::NAN })
}

/// Solve an LMI problem from a strictly feasible dual start `y0`.
pub fn solve(problem: &LmiProblem, y0: &[f64], opts: SdpOptions) -> Result<LmiSolution> {
    let nb: usize = problem.b.iter().map(|m| m.nrows()).sum();
    let mut y = y0.to_vec();
    let mut s = problem.slack(&y);
    for blk in &s {
        if Cholesky::new(hermitize(blk)).is_none() {
            return Err(LabError::Domain("interior-point start is not strictly feasible".into()));
        }
    }
    let scale = s.iter().map(|b| b.diagonal().iter().map(|z| z.re).sum::<f64>()).sum::<f64>() / nb as f64;
    let mut x: Vec<CMat> =
        s.iter().map(|b| CMat::identity(b.nrows(), b.nrows()).scale(1.0 / scale.max(1e-3))).collect();
    let c = DVector::from_column_slice(&problem.c);
    let c_scale = 1.0 + problem.c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let b_scale = 1.0 + max_entry(&problem.b);

    let mut iterations = 0;
    for iter in 0..opts.max_iter {
        iterations = iter;
        let rp = &c - problem.apply_adjoint(&x);
        let rd: Vec<CMat> = problem.slack(&y).iter().zip(&s).map(|(t, sb)| t - sb).collect();
        let mu = inner(&x, &s) / nb as f64;
        let pobj = inner(&problem.b, &x);
        let dobj = c.dot(&DVector::from_column_slice(&y));
        let rp_norm = rp.amax();
        if rp_norm <= opts.tol * c_scale
            && max_entry(&rd) <= opts.tol * b_scale
            && (pobj - dobj).abs() <= opts.tol * (1.0 + dobj.abs())
        {
            return Ok(LmiSolution {
                y,
                s,
                x,
                dual_objective: dobj,
                primal_objective: pobj,
                primal_residual: rp_norm,
                iterations: iter,
                converged: true,
            });
        }
        let s_inv: Vec<CMat> = s.iter().map(hermitian_inverse).collect::<Result<_>>()?;
        let schur = problem.schur(&x, &s_inv);
        let schur = (&schur + schur.transpose()) * 0.5;
        // Close to the optimum the Schur complement becomes ill-conditioned
        // and may lose numerical definiteness; a small ridge restores it, and
        // if that fails the current iterate is returned for certification.
        let Some(chol) = ridge_cholesky(&schur) else {
            break;
        };

        // Direction for the target `sigma_mu` with an optional second-order correction.
        let direction = |sigma_mu: f64, corr: Option<(&[CMat], &[CMat])>| -> (DVector<f64>, Vec<CMat>, Vec<CMat>) {
            let base: Vec<CMat> = (0..x.len())
                .map(|b| {
                    let mut t = s_inv[b].scale(sigma_mu) - &x[b];
                    if let Some((dx, ds)) = corr {
                        t -= matmul(&matmul(&dx[b], &ds[b]), &s_inv[b]);
                    }
                    t
                })
                .collect();
            let t_full: Vec<CMat> =
                (0..x.len()).map(|b| &base[b] - matmul(&matmul(&x[b], &rd[b]), &s_inv[b])).collect();
            let rhs = &rp - problem.apply_adjoint(&t_full);
            let dy = chol.solve(&rhs);
            let ady = problem.combine(dy.as_slice());
            let ds: Vec<CMat> = rd.iter().zip(&ady).map(|(r, a)| r - a).collect();
            let dx: Vec<CMat> =
                (0..x.len()).map(|b| hermitize(&(&base[b] - matmul(&matmul(&x[b], &ds[b]), &s_inv[b])))).collect();
            (dy, dx, ds)
        };

        let (_, dx_aff, ds_aff) = direction(0.0, None);
        let ap = step_length(&x, &dx_aff);
        let ad = step_length(&s, &ds_aff);
        let x_aff: Vec<CMat> = x.iter().zip(&dx_aff).map(|(a, d)| a + d.scale(ap)).collect();
        let s_aff: Vec<CMat> = s.iter().zip(&ds_aff).map(|(a, d)| a + d.scale(ad)).collect();
        let mu_aff = inner(&x_aff, &s_aff) / nb as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let (dy, dx, ds) = direction(sigma * mu, Some((&dx_aff, &ds_aff)));
        let ap = step_length(&x, &dx);
        let ad = step_length(&s, &ds);
        if ap == 0.0 && ad == 0.0 {
            break;
        }
        for b in 0..x.len() {
            x[b] = hermitize(&(&x[b] + dx[b].scale(ap)));
            s[b] = hermitize(&(&s[b] + ds[b].scale(ad)));
        }
        for (yi, d) in y.iter_mut().zip(dy.iter()) {
            *yi += ad * d;
        }
    }
    let pobj = inner(&problem.b, &x);
    let dobj = c.dot(&DVector::from_column_slice(&y));
    let primal_residual = (&c - problem.apply_adjoint(&x)).amax();
    if !(pobj.is_finite() && dobj.is_finite()) {
        return Err(LabError::Convergence { context: "interior-point SDP solver".into(), residual: f64::NAN });
    }
    Ok(LmiSolution {
        y,
        s,
        x,
        dual_objective: dobj,
        primal_objective: pobj,
        primal_residual,
        iterations,
        converged: false,
    })
}

/// Cholesky factor of `m`, retried with a growing diagonal ridge.
fn ridge_cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = m.diagonal().amax().max(f64::MIN_POSITIVE);
    [1e-14, 1e-12, 1e-10].iter().find_map(|&delta| {
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += delta * scale;
        }
        Cholesky::new(shifted)
    })
}
