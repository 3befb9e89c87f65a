//! Dense operator algebra on ordered site registers.
//!
//! Operators are dense complex matrices whose tensor factors follow the
//! register's site order, the first site being the most significant digit of
//! the basis index. Embedding, partial traces and local multiplications go
//! through an explicit index table ([`Split`]) rather than reshapes.

use matrixmultiply::{zgemm, CGemmOption};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::Region;

/// Complex scalar.
pub type C64 = Complex64;
/// Dense complex matrix.
pub type CMat = DMatrix<C64>;

/// Hermiticity tolerance.
pub const TAU_HERM: f64 = 1e-10;
/// Unit-trace tolerance.
pub const TAU_TR: f64 = 1e-10;
/// Positive-semidefiniteness tolerance on eigenvalues.
pub const TAU_PSD: f64 = 1e-10;
/// Eigenvalues at or below this are treated as zero.
pub const TAU_PD: f64 = 1e-12;
/// Entropy floor.
pub const TAU_ENT: f64 = 1e-9;
/// Operator-norm tolerance for commutation tests.
pub const TAU_COMMUTE: f64 = 1e-10;

/// `0 + 0i`.
pub const ZERO: C64 = C64::new(0.0, 0.0);
/// `1 + 0i`.
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Deterministic random generator used by every randomized routine.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Dense kernels
// ---------------------------------------------------------------------------

/// Matrix product, dispatched to a blocked kernel for all but tiny sizes.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    if m * k * n <= 4096 || m == 0 || k == 0 || n == 0 {
        return a * b;
    }
    let mut c = CMat::zeros(m, n);
    // SAFETY: `Complex64` is `repr(C)` with two `f64` fields, so it has the
    // layout of `[f64; 2]`; all three matrices are contiguous column-major
    // buffers whose sizes match the strides passed here.
    unsafe {
        zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// `A† B`.
pub fn adjoint_mul(a: &CMat, b: &CMat) -> CMat {
    matmul(&a.adjoint(), b)
}

/// `(X + X†) / 2`.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise deviation from Hermiticity.
pub fn herm_error(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc: f64, z| acc.max(z.norm()))
}

/// True when every off-diagonal entry is exactly zero.
pub fn is_diagonal(m: &CMat) -> bool {
    let n = m.nrows();
    for j in 0..m.ncols() {
        for i in 0..n {
            if i != j && m[(i, j)] != ZERO {
                return false;
            }
        }
    }
    true
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
///
/// Diagonal inputs are decomposed without a solver call.
pub fn eigh(m: &CMat) -> (DVector<f64>, CMat) {
    let n = m.nrows();
    let (vals, vecs) = if is_diagonal(m) {
        (DVector::from_iterator(n, (0..n).map(|i| m[(i, i)].re)), CMat::identity(n, n))
    } else {
        symmetric_eigen(&hermitize(m))
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let sorted_vals = DVector::from_iterator(n, order.iter().map(|&i| vals[i]));
    let sorted_vecs = CMat::from_fn(n, n, |r, c| vecs[(r, order[c])]);
    (sorted_vals, sorted_vecs)
}

/// Unsorted eigendecomposition of a Hermitian matrix.
///
/// The implicit QR iteration can break down into NaN on matrices with exact
/// zero blocks. A permutation similarity leaves the spectrum unchanged and
/// reorders the deflation pattern, so a breakdown is retried under a few fixed
/// permutations before giving up.
fn symmetric_eigen(m: &CMat) -> (DVector<f64>, CMat) {
    let n = m.nrows();
    let finite = |e: &SymmetricEigen<C64, nalgebra::Dyn>| {
        e.eigenvalues.iter().all(|x| x.is_finite()) && e.eigenvectors.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    };
    let e = SymmetricEigen::new(m.clone());
    if finite(&e) || n < 2 {
        return (e.eigenvalues, e.eigenvectors);
    }
    for stride in [7usize, 11, 13, 17, 19, 23] {
        if gcd(stride, n) != 1 {
            continue;
        }
        // Row i of the permuted matrix is row perm[i] of the original.
        let perm: Vec<usize> = (0..n).map(|i| (i * stride + 3) % n).collect();
        let permuted = CMat::from_fn(n, n, |i, j| m[(perm[i], perm[j])]);
        let e = SymmetricEigen::new(permuted);
        if finite(&e) {
            let mut vecs = CMat::zeros(n, n);
            for (i, &p) in perm.iter().enumerate() {
                vecs.set_row(p, &e.eigenvectors.row(i));
            }
            return (e.eigenvalues, vecs);
        }
    }
    (e.eigenvalues, e.eigenvectors)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn eigvalsh(m: &CMat) -> DVector<f64> {
    if is_diagonal(m) {
        let mut v: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)].re).collect();
        v.sort_by(f64::total_cmp);
        return DVector::from_vec(v);
    }
    let mut v: Vec<f64> = symmetric_eigen(&hermitize(m)).0.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    DVector::from_vec(v)
}

/// Rebuild `V diag(f(λ)) V†` from a decomposition.
pub fn from_eigen(vals: &DVector<f64>, vecs: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let fl = f(l);
        scaled.column_mut(j).scale_mut(fl);
    }
    hermitize(&matmul(&scaled, &vecs.adjoint()))
}

/// Functional calculus `f(M)` for Hermitian `M`.
pub fn funm_herm(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    if is_diagonal(m) {
        let n = m.nrows();
        return CMat::from_fn(n, n, |i, j| if i == j { C64::new(f(m[(i, i)].re), 0.0) } else { ZERO });
    }
    let (vals, vecs) = eigh(m);
    from_eigen(&vals, &vecs, f)
}

/// Matrix exponential of a Hermitian matrix.
pub fn exp_herm(m: &CMat) -> CMat {
    funm_herm(m, f64::exp)
}

/// Matrix logarithm of a strictly positive matrix.
pub fn log_pd(m: &CMat, what: &str) -> Result<CMat> {
    let (vals, vecs) = eigh(m);
    check_pd(&vals, what)?;
    Ok(if is_diagonal(m) { funm_herm(m, f64::ln) } else { from_eigen(&vals, &vecs, f64::ln) })
}

/// Real power `M^s` of a strictly positive matrix.
pub fn pow_pd(m: &CMat, s: f64, what: &str) -> Result<CMat> {
    let (vals, vecs) = eigh(m);
    check_pd(&vals, what)?;
    Ok(from_eigen(&vals, &vecs, |x| x.powf(s)))
}

/// Square root of a positive semidefinite matrix (negative noise clipped).
pub fn sqrt_psd(m: &CMat) -> CMat {
    funm_herm(m, |x| x.max(0.0).sqrt())
}

fn check_pd(vals: &DVector<f64>, what: &str) -> Result<()> {
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= TAU_PD {
        return Err(LabError::Singularity { what: what.to_string(), min_eigenvalue: min });
    }
    Ok(())
}

/// `tr[A B]` in `O(n²)`.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Trace.
pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().copied().sum()
}

/// Schatten-1 norm of a Hermitian matrix.
pub fn trace_norm(m: &CMat) -> f64 {
    eigvalsh(m).iter().map(|x| x.abs()).sum()
}

/// Operator norm (largest singular value) of a Hermitian matrix.
pub fn op_norm_herm(m: &CMat) -> f64 {
    eigvalsh(m).iter().fold(0.0, |a: f64, x| a.max(x.abs()))
}

/// Operator norm of an arbitrary matrix.
pub fn op_norm(m: &CMat) -> f64 {
    if herm_error(m) == 0.0 {
        return op_norm_herm(m);
    }
    m.clone().svd(false, false).singular_values.iter().fold(0.0, |a: f64, x| a.max(*x))
}

/// Commutator `AB − BA`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    matmul(a, b) - matmul(b, a)
}

/// Von Neumann entropy `−tr ρ log ρ` in nats, with `0 log 0 = 0`.
pub fn entropy(rho: &CMat) -> f64 {
    -eigvalsh(rho).iter().filter(|&&l| l > TAU_PD).map(|&l| l * l.ln()).sum::<f64>()
}

/// Relative entropy `D(ρ‖σ) = tr ρ(log ρ − log σ)` in nats.
///
/// Returns `f64::INFINITY` when the support of `ρ` is not contained in the
/// support of `σ`.
pub fn relative_entropy(rho: &CMat, sigma: &CMat) -> f64 {
    let (svals, svecs) = eigh(sigma);
    let mut cross = 0.0;
    let both_diag = is_diagonal(rho) && is_diagonal(sigma);
    let weights: Vec<f64> = if both_diag {
        // Eigenvectors of diagonal matrices are permuted unit vectors.
        (0..svals.len())
            .map(|j| {
                let i = (0..svecs.nrows()).find(|&i| svecs[(i, j)] != ZERO).expect("unit vector");
                rho[(i, i)].re
            })
            .collect()
    } else {
        let rv = matmul(rho, &svecs);
        (0..svals.len())
            .map(|j| {
                let mut acc = ZERO;
                for i in 0..svecs.nrows() {
                    acc += svecs[(i, j)].conj() * rv[(i, j)];
                }
                acc.re
            })
            .collect()
    };
    for (j, &s) in svals.iter().enumerate() {
        let w = weights[j];
        if s <= TAU_PD {
            if w > TAU_PSD {
                return f64::INFINITY;
            }
        } else {
            cross += w * s.ln();
        }
    }
    -entropy(rho) - cross
}

/// Complex Kronecker product.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Column-major vectorization.
pub fn vectorize(x: &CMat) -> DVector<C64> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vectorize`] for an `n × n` matrix.
pub fn unvectorize(v: &DVector<C64>, n: usize) -> CMat {
    CMat::from_column_slice(n, n, v.as_slice())
}

/// Superoperator of `X ↦ A X B` in the column-major convention, `Bᵀ ⊗ A`.
pub fn superop_lr(a: &CMat, b: &CMat) -> CMat {
    kron(&b.transpose(), a)
}

// ---------------------------------------------------------------------------
// Registers
// ---------------------------------------------------------------------------

/// Ordered list of lattice sites carrying qudits of dimension `d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Register {
    sites: Vec<usize>,
    d: usize,
}

impl Register {
    /// Register over `sites` (sorted, deduplicated) with local dimension `d`.
    pub fn new(sites: impl Into<Vec<usize>>, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(LabError::Domain(format!("local dimension {d} < 2")));
        }
        let mut sites = sites.into();
        sites.sort_unstable();
        sites.dedup();
        let reg = Self { sites, d };
        if (reg.d as f64).powi(reg.sites.len() as i32) > (1u64 << 40) as f64 {
            return Err(LabError::Capability(format!("register of {} sites", reg.sites.len())));
        }
        Ok(reg)
    }

    /// Register over a region.
    pub fn from_region(region: &Region, d: usize) -> Result<Self> {
        Self::new(region.sites().to_vec(), d)
    }

    /// Sites in order.
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    /// Local dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of sites.
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    /// True for the trivial register (dimension one).
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Hilbert-space dimension `d^n`.
    pub fn dim(&self) -> usize {
        self.d.pow(self.sites.len() as u32)
    }

    /// Sites as a region.
    pub fn region(&self) -> Region {
        Region::new(self.sites.clone())
    }

    /// Position of a site in the register.
    pub fn position(&self, site: usize) -> Option<usize> {
        self.sites.binary_search(&site).ok()
    }

    /// Register without the sites of `region`.
    pub fn without(&self, region: &Region) -> Register {
        Register { sites: self.sites.iter().copied().filter(|s| !region.contains(*s)).collect(), d: self.d }
    }

    /// Register restricted to the sites of `region`.
    pub fn restricted(&self, region: &Region) -> Register {
        Register { sites: self.sites.iter().copied().filter(|s| region.contains(*s)).collect(), d: self.d }
    }

    /// Union of two registers with the same local dimension.
    pub fn union(&self, other: &Register) -> Result<Register> {
        if self.d != other.d {
            return Err(LabError::Domain("registers with different local dimensions".into()));
        }
        let mut s = self.sites.clone();
        s.extend_from_slice(&other.sites);
        Register::new(s, self.d)
    }

    /// True when every site of `other` belongs to `self`.
    pub fn contains_register(&self, other: &Register) -> bool {
        self.d == other.d && other.sites.iter().all(|s| self.position(*s).is_some())
    }
}

/// Index table splitting a register into a kept part and the rest.
///
/// `index(a, r)` is the basis index of the full register whose digits on the
/// kept sites spell `a` and on the remaining sites spell `r`.
#[derive(Debug, Clone)]
pub struct Split {
    keep_dim: usize,
    rest_dim: usize,
    table: Vec<usize>,
}

impl Split {
    /// Split `full` into `keep` (which must be contained in it) and the rest.
    pub fn new(full: &Register, keep: &Register) -> Result<Self> {
        if !full.contains_register(keep) {
            return Err(LabError::Domain(format!(
                "sites {:?} not contained in register {:?}",
                keep.sites(),
                full.sites()
            )));
        }
        let d = full.d();
        let n = full.len();
        let is_keep: Vec<bool> = full.sites().iter().map(|s| keep.position(*s).is_some()).collect();
        let keep_dim = keep.dim();
        let rest_dim = full.dim() / keep_dim;
        let mut table = vec![0usize; full.dim()];
        let mut digits = vec![0usize; n];
        for idx in 0..full.dim() {
            let mut rem = idx;
            for p in (0..n).rev() {
                digits[p] = rem % d;
                rem /= d;
            }
            let (mut a, mut r) = (0usize, 0usize);
            for p in 0..n {
                if is_keep[p] {
                    a = a * d + digits[p];
                } else {
                    r = r * d + digits[p];
                }
            }
            table[a * rest_dim + r] = idx;
        }
        Ok(Self { keep_dim, rest_dim, table })
    }

    /// Dimension of the kept factor.
    pub fn keep_dim(&self) -> usize {
        self.keep_dim
    }

    /// Dimension of the remaining factor.
    pub fn rest_dim(&self) -> usize {
        self.rest_dim
    }

    /// Full index of `(a, r)`.
    #[inline]
    pub fn index(&self, a: usize, r: usize) -> usize {
        self.table[a * self.rest_dim + r]
    }
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

/// Dense operator on a register.
///
/// The same type carries Hermitian observables and density operators;
/// [`Operator::check_hermitian`] and [`Operator::check_density`] validate the
/// respective invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorJson", into = "OperatorJson")]
pub struct Operator {
    reg: Register,
    mat: CMat,
}

impl Operator {
    /// Wrap a matrix; its size must match the register dimension.
    pub fn new(reg: Register, mat: CMat) -> Result<Self> {
        let dim = reg.dim();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(LabError::Domain(format!(
                "matrix {}x{} on register of dimension {dim}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { reg, mat })
    }

    /// Identity operator.
    pub fn identity(reg: &Register) -> Self {
        let n = reg.dim();
        Self { reg: reg.clone(), mat: CMat::identity(n, n) }
    }

    /// Maximally mixed state `Id / dim`.
    pub fn maximally_mixed(reg: &Register) -> Self {
        let n = reg.dim();
        Self { reg: reg.clone(), mat: CMat::identity(n, n).unscale(n as f64) }
    }

    /// Zero operator.
    pub fn zeros(reg: &Register) -> Self {
        let n = reg.dim();
        Self { reg: reg.clone(), mat: CMat::zeros(n, n) }
    }

    /// Register.
    pub fn register(&self) -> &Register {
        &self.reg
    }

    /// Matrix.
    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    /// Mutable matrix access.
    pub fn mat_mut(&mut self) -> &mut CMat {
        &mut self.mat
    }

    /// Consume into the matrix.
    pub fn into_mat(self) -> CMat {
        self.mat
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Same register, new matrix.
    pub fn with_mat(&self, mat: CMat) -> Self {
        assert_eq!(mat.nrows(), self.dim());
        Self { reg: self.reg.clone(), mat }
    }

    /// Trace.
    pub fn trace(&self) -> C64 {
        trace(&self.mat)
    }

    /// Error unless Hermitian within [`TAU_HERM`].
    pub fn check_hermitian(&self) -> Result<()> {
        let e = herm_error(&self.mat);
        if e > TAU_HERM {
            return Err(LabError::Domain(format!("operator not Hermitian: deviation {e:e}")));
        }
        Ok(())
    }

    /// Error unless a density operator within the module tolerances.
    pub fn check_density(&self) -> Result<()> {
        self.check_hermitian()?;
        let tr = self.trace();
        if (tr - ONE).norm() > TAU_TR {
            return Err(LabError::Domain(format!("trace {tr} differs from one")));
        }
        let min = eigvalsh(&self.mat).iter().copied().fold(f64::INFINITY, f64::min);
        if min < -TAU_PSD {
            return Err(LabError::Domain(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Tensor with identity on the sites of `target` missing from the register.
    pub fn embed(&self, target: &Register) -> Result<Operator> {
        if *target == self.reg {
            return Ok(self.clone());
        }
        let split = Split::new(target, &self.reg)?;
        let n = target.dim();
        let mut out = CMat::zeros(n, n);
        for r in 0..split.rest_dim() {
            for b in 0..split.keep_dim() {
                let col = split.index(b, r);
                for a in 0..split.keep_dim() {
                    let v = self.mat[(a, b)];
                    if v != ZERO {
                        out[(split.index(a, r), col)] = v;
                    }
                }
            }
        }
        Ok(Operator { reg: target.clone(), mat: out })
    }

    /// Partial trace over `traced`, which must lie inside the register.
    pub fn partial_trace(&self, traced: &Region) -> Result<Operator> {
        if !traced.iter().all(|s| self.reg.position(s).is_some()) {
            return Err(LabError::Domain(format!(
                "traced sites {:?} not in register {:?}",
                traced.sites(),
                self.reg.sites()
            )));
        }
        if traced.is_empty() {
            return Ok(self.clone());
        }
        let keep = self.reg.without(traced);
        let split = Split::new(&self.reg, &keep)?;
        let k = split.keep_dim();
        let mut out = CMat::zeros(k, k);
        for b in 0..k {
            for a in 0..k {
                let mut acc = ZERO;
                for r in 0..split.rest_dim() {
                    acc += self.mat[(split.index(a, r), split.index(b, r))];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(Operator { reg: keep, mat: out })
    }

    /// Reduced operator on the sites of `keep` (traces out the rest).
    pub fn marginal(&self, keep: &Region) -> Result<Operator> {
        if !keep.iter().all(|s| self.reg.position(s).is_some()) {
            return Err(LabError::Domain(format!("marginal sites {:?} not in register", keep.sites())));
        }
        let traced = self.reg.region().difference(keep);
        self.partial_trace(&traced)
    }

    /// Normalized partial trace `tr_B[X] ⊗ Id_B / d_B`, on the same register.
    pub fn normalized_partial_trace(&self, traced: &Region) -> Result<Operator> {
        let reduced = self.partial_trace(traced)?;
        let db = (self.dim() / reduced.dim()) as f64;
        let mut e = reduced.embed(&self.reg)?;
        e.mat.unscale_mut(db);
        Ok(e)
    }

    /// Hermitian part.
    pub fn hermitized(&self) -> Operator {
        self.with_mat(hermitize(&self.mat))
    }
}

/// `(S ⊗ Id) X` for `S` on a sub-register of `X`'s register.
pub fn local_left(s: &Operator, x: &Operator) -> Result<Operator> {
    let split = Split::new(x.register(), s.register())?;
    let n = x.dim();
    let m = split.keep_dim();
    let mut out = CMat::zeros(n, n);
    let mut block = CMat::zeros(m, n);
    for r in 0..split.rest_dim() {
        for a in 0..m {
            block.row_mut(a).copy_from(&x.mat().row(split.index(a, r)));
        }
        let y = matmul(s.mat(), &block);
        for a in 0..m {
            out.row_mut(split.index(a, r)).copy_from(&y.row(a));
        }
    }
    Ok(x.with_mat(out))
}

/// `X (S ⊗ Id)` for `S` on a sub-register of `X`'s register.
pub fn local_right(x: &Operator, s: &Operator) -> Result<Operator> {
    let split = Split::new(x.register(), s.register())?;
    let n = x.dim();
    let m = split.keep_dim();
    let mut out = CMat::zeros(n, n);
    let mut block = CMat::zeros(n, m);
    for r in 0..split.rest_dim() {
        for a in 0..m {
            block.column_mut(a).copy_from(&x.mat().column(split.index(a, r)));
        }
        let y = matmul(&block, s.mat());
        for a in 0..m {
            out.column_mut(split.index(a, r)).copy_from(&y.column(a));
        }
    }
    Ok(x.with_mat(out))
}

/// Apply a superoperator defined on `sub` (column-major vectorization) to an
/// operator on a larger register, acting as the identity elsewhere.
pub fn apply_superop_local(superop: &CMat, sub: &Register, x: &Operator) -> Result<Operator> {
    let m = sub.dim();
    if superop.nrows() != m * m || superop.ncols() != m * m {
        return Err(LabError::Domain("superoperator size does not match its register".into()));
    }
    if sub == x.register() {
        let v = matmul(superop, &CMat::from_column_slice(m * m, 1, x.mat().as_slice()));
        return Ok(x.with_mat(CMat::from_column_slice(m, m, v.as_slice())));
    }
    let split = Split::new(x.register(), sub)?;
    let rd = split.rest_dim();
    let mut gathered = CMat::zeros(m * m, rd * rd);
    for s in 0..rd {
        for r in 0..rd {
            let col = r + s * rd;
            for b in 0..m {
                for a in 0..m {
                    gathered[(a + b * m, col)] = x.mat()[(split.index(a, r), split.index(b, s))];
                }
            }
        }
    }
    let result = matmul(superop, &gathered);
    let n = x.dim();
    let mut out = CMat::zeros(n, n);
    for s in 0..rd {
        for r in 0..rd {
            let col = r + s * rd;
            for b in 0..m {
                for a in 0..m {
                    out[(split.index(a, r), split.index(b, s))] = result[(a + b * m, col)];
                }
            }
        }
    }
    Ok(x.with_mat(out))
}

/// Superoperator on `target` of a superoperator on the sub-register `sub`,
/// tensored with the identity channel on the remaining sites.
pub fn embed_superop(superop: &CMat, sub: &Register, target: &Register) -> Result<CMat> {
    let n = target.dim();
    let mut out = CMat::zeros(n * n, n * n);
    for j in 0..n {
        for i in 0..n {
            let mut e = Operator::zeros(target);
            e.mat_mut()[(i, j)] = ONE;
            let y = apply_superop_local(superop, sub, &e)?;
            out.column_mut(i + j * n).copy_from_slice(y.mat().as_slice());
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Entropic quantities on operators
// ---------------------------------------------------------------------------

/// `D(ρ‖σ)` for operators on the same register.
pub fn relative_entropy_op(rho: &Operator, sigma: &Operator) -> Result<f64> {
    same_register(rho, sigma)?;
    Ok(relative_entropy(rho.mat(), sigma.mat()))
}

/// Conditional relative entropy `D_A(ρ‖σ) = D(ρ‖σ) − D(ρ_Ā‖σ_Ā)`.
pub fn conditional_relative_entropy(rho: &Operator, sigma: &Operator, a: &Region) -> Result<f64> {
    same_register(rho, sigma)?;
    let a_in = a.intersection(&rho.register().region());
    if a_in.is_empty() {
        return Ok(0.0);
    }
    let full = relative_entropy(rho.mat(), sigma.mat());
    if a_in.len() == rho.register().len() {
        return Ok(full);
    }
    let rest = relative_entropy(rho.partial_trace(&a_in)?.mat(), sigma.partial_trace(&a_in)?.mat());
    if full.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(full - rest)
}

/// Weighted inner product `⟨X, σ^s Y σ^{1−s}⟩ = tr[X† σ^s Y σ^{1−s}]`.
pub fn weighted_inner_product(x: &CMat, y: &CMat, sigma: &CMat, s: f64) -> Result<C64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(LabError::Domain(format!("weight exponent {s} outside [0, 1]")));
    }
    let (vals, vecs) = eigh(sigma);
    check_pd(&vals, "sigma")?;
    let left = from_eigen(&vals, &vecs, |l| l.powf(s));
    let right = from_eigen(&vals, &vecs, |l| l.powf(1.0 - s));
    let inner = matmul(&matmul(&left, y), &right);
    Ok(trace_product(&x.adjoint(), &inner))
}

fn same_register(a: &Operator, b: &Operator) -> Result<()> {
    if a.register() != b.register() {
        return Err(LabError::Domain(format!(
            "operators on different registers {:?} and {:?}",
            a.register().sites(),
            b.register().sites()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Random states
// ---------------------------------------------------------------------------

/// Haar-random unit vector (normalized complex Gaussian).
pub fn random_pure_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let norm = v.norm();
    v.unscale(norm)
}

/// `(1 − w)|ψ⟩⟨ψ| + w Id/dim` with Haar-random `ψ`; full rank for `w > 0`.
pub fn random_mixed_state<R: Rng + ?Sized>(reg: &Register, weight: f64, rng: &mut R) -> Operator {
    let n = reg.dim();
    let psi = random_pure_vector(n, rng);
    let proj = &psi * psi.adjoint();
    let mat = proj.scale(1.0 - weight) + CMat::identity(n, n).scale(weight / n as f64);
    Operator { reg: reg.clone(), mat: hermitize(&mat) }
}

/// Random full-rank density operator from a Ginibre matrix, `G G† / tr`.
pub fn random_ginibre_state<R: Rng + ?Sized>(reg: &Register, rng: &mut R) -> Operator {
    let n = reg.dim();
    let g = CMat::from_fn(n, n, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let mut m = matmul(&g, &g.adjoint());
    let t = trace(&m).re;
    m.unscale_mut(t);
    Operator { reg: reg.clone(), mat: hermitize(&m) }
}

/// Random Hermitian matrix with standard Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    hermitize(&g)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

const CONTAINER_MAGIC: &[u8; 4] = b"DLOP";
const CONTAINER_VERSION: u32 = 1;

/// Encode an operator in the binary container: magic `DLOP`, version, local
/// dimension, site list and matrix size as little-endian integers, followed by
/// row-major interleaved real and imaginary parts as little-endian doubles.
pub fn write_container(op: &Operator) -> Vec<u8> {
    let n = op.dim();
    let mut out = Vec::with_capacity(32 + 8 * op.register().len() + 16 * n * n);
    out.extend_from_slice(CONTAINER_MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&(op.register().d() as u32).to_le_bytes());
    out.extend_from_slice(&(op.register().len() as u32).to_le_bytes());
    for &s in op.register().sites() {
        out.extend_from_slice(&(s as u64).to_le_bytes());
    }
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            let z = op.mat()[(i, j)];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

/// Decode [`write_container`] output.
pub fn read_container(bytes: &[u8]) -> Result<Operator> {
    let mut cur = 0usize;
    let mut take = |k: usize| -> Result<&[u8]> {
        let s = bytes
            .get(cur..cur + k)
            .ok_or_else(|| LabError::Domain("truncated operator container".into()))?;
        cur += k;
        Ok(s)
    };
    if take(4)? != CONTAINER_MAGIC {
        return Err(LabError::Domain("bad operator container magic".into()));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
    let u64_at = |s: &[u8]| u64::from_le_bytes(s.try_into().expect("8 bytes"));
    let version = u32_at(take(4)?);
    if version != CONTAINER_VERSION {
        return Err(LabError::Domain(format!("unsupported container version {version}")));
    }
    let d = u32_at(take(4)?) as usize;
    let ns = u32_at(take(4)?) as usize;
    let mut sites = Vec::with_capacity(ns);
    for _ in 0..ns {
        sites.push(u64_at(take(8)?) as usize);
    }
    let rows = u64_at(take(8)?) as usize;
    let cols = u64_at(take(8)?) as usize;
    let reg = Register::new(sites, d)?;
    if rows != reg.dim() || cols != reg.dim() {
        return Err(LabError::Domain("container matrix size does not match register".into()));
    }
    let mut mat = CMat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
            mat[(i, j)] = C64::new(re, im);
        }
    }
    Operator::new(reg, mat)
}

/// JSON shape of an operator: register plus row-major real and imaginary parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorJson {
    /// Sites of the register.
    pub sites: Vec<usize>,
    /// Local dimension.
    pub d: usize,
    /// Real parts, one array per row.
    pub re: Vec<Vec<f64>>,
    /// Imaginary parts, one array per row.
    pub im: Vec<Vec<f64>>,
}

impl From<Operator> for OperatorJson {
    fn from(op: Operator) -> Self {
        let n = op.dim();
        let row = |f: fn(&C64) -> f64, i: usize| (0..n).map(|j| f(&op.mat[(i, j)])).collect();
        OperatorJson {
            sites: op.reg.sites().to_vec(),
            d: op.reg.d(),
            re: (0..n).map(|i| row(|z| z.re, i)).collect(),
            im: (0..n).map(|i| row(|z| z.im, i)).collect(),
        }
    }
}

impl TryFrom<OperatorJson> for Operator {
    type Error = LabError;

    fn try_from(j: OperatorJson) -> Result<Self> {
        let reg = Register::new(j.sites, j.d)?;
        let n = reg.dim();
        if j.re.len() != n || j.im.len() != n || j.re.iter().chain(&j.im).any(|r| r.len() != n) {
            return Err(LabError::Domain("operator JSON shape does not match register".into()));
        }
        let mat = CMat::from_fn(n, n, |i, k| C64::new(j.re[i][k], j.im[i][k]));
        Operator::new(reg, mat)
    }
}

/// Rows of a complex matrix parsed from nested `[re, im]` or real arrays.
pub fn matrix_from_rows(rows: &[Vec<C64>]) -> Result<CMat> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(LabError::Domain("matrix rows must form a square array".into()));
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j]))
}
