//! Generalized nuclear-norm regions `{X ∈ ℝ^{m×n} : ‖P X Q‖* ≤ δ}`.
//!
//! With `φ(X) = PXQ`, `T = ker φ` and `S = T⊥ ∩ {‖PXQ‖* ≤ δ}`. The
//! projection onto `T⊥` is `X ↦ P⁺P X QQ⁺`, and the oracle is the rank-one
//! matrix `−δ P⁺u₁v₁ᵀQ⁺` built from the leading singular pair of
//! `C̄ = (P⁺)ᵀ C (Q⁺)ᵀ`. Matrices are flattened column-major; the leading pair
//! is found iteratively through [`LinearOperator`] so sparse gradients
//! are never densified inside the oracle.

use nalgebra::DMatrix;

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{dot, norm2, svd};
use crate::region::{DecomposedRegion, LmoState, VertexHandle, VertexKey};
use crate::rng::SplitMix64;

/// Moore–Penrose pseudo-inverse by SVD, zeroing singular values below
/// `max(rows, cols)·σ₁·1e-12`.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let d = svd(m);
    let sigma1 = d.s[0];
    let mut out = DMatrix::zeros(cols, rows);
    if sigma1 == 0.0 {
        return out;
    }
    let cutoff = rows.max(cols) as f64 * sigma1 * 1e-12;
    for (i, &s) in d.s.iter().enumerate() {
        if s > cutoff {
            out += (d.v.column(i) * d.u.column(i).transpose()) / s;
        }
    }
    out
}

/// Nuclear norm by dense SVD.
pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).s.iter().sum()
}

/// A matrix known only through products with vectors.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `out = A v`
    fn apply(&self, v: &[f64], out: &mut [f64]);
    /// `out = Aᵀ u`
    fn apply_t(&self, u: &[f64], out: &mut [f64]);
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }

    fn ncols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let r = self * nalgebra::DVectorView::from_slice(v, v.len());
        out.copy_from_slice(r.as_slice());
    }

    fn apply_t(&self, u: &[f64], out: &mut [f64]) {
        let r = self.tr_mul(&nalgebra::DVector::from_column_slice(u));
        out.copy_from_slice(r.as_slice());
    }
}

/// Column-major dense view over a flat slice.
pub struct DenseView<'a> {
    rows: usize,
    cols: usize,
    data: &'a [f64],
}

impl<'a> DenseView<'a> {
    pub fn new(rows: usize, cols: usize, data: &'a [f64]) -> Self {
        assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }
}

impl LinearOperator for DenseView<'_> {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, col) in self.data.chunks_exact(self.rows).enumerate() {
            let vj = v[j];
            if vj != 0.0 {
                for (o, a) in out.iter_mut().zip(col) {
                    *o += a * vj;
                }
            }
        }
    }

    fn apply_t(&self, u: &[f64], out: &mut [f64]) {
        for (o, col) in out.iter_mut().zip(self.data.chunks_exact(self.rows)) {
            *o = dot(col, u);
        }
    }
}

/// Coordinate-list sparse matrix.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        Self { rows, cols, entries }
    }

    /// Nonzeros of a column-major flat matrix.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        let entries = data
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, &v)| (k % rows, k / rows, v))
            .collect();
        Self { rows, cols, entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

impl LinearOperator for SparseMatrix {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(i, j, a) in &self.entries {
            out[i] += a * v[j];
        }
    }

    fn apply_t(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(i, j, a) in &self.entries {
            out[j] += a * u[i];
        }
    }
}

/// Leading singular triple.
#[derive(Clone, Debug)]
pub struct SingularPair {
    pub sigma1: f64,
    pub u1: Vec<f64>,
    pub v1: Vec<f64>,
}

/// How the leading pair is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PairMethod {
    /// `v ← normalize(AᵀA v)`.
    Power,
    /// Golub–Kahan–Lanczos bidiagonalization with full reorthogonalization,
    /// restarted from the best Ritz vector. Same products, far fewer of them
    /// when `σ₁` and `σ₂` are close.
    #[default]
    Lanczos,
}

#[derive(Clone, Debug)]
pub struct PairOptions {
    /// Relative residual `‖Aᵀu − σv‖ / σ` at which to stop.
    pub tol: f64,
    /// Budget of `(A v, Aᵀ u)` product pairs.
    pub max_iters: usize,
    pub seed: u64,
    pub method: PairMethod,
    /// Krylov dimension between Lanczos restarts.
    pub krylov_dim: usize,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 2000,
            seed: 0x00c0_ffee,
            method: PairMethod::Lanczos,
            krylov_dim: 40,
        }
    }
}

impl PairOptions {
    pub fn power() -> Self {
        Self {
            method: PairMethod::Power,
            ..Self::default()
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Leading singular pair of `op`.
///
/// `start` seeds the right vector; without one a seeded Gaussian vector is
/// used. Exhausting the budget with a residual above `100·tol` is an error
/// unless `σ` has stopped moving, which is what a near-tie `σ₁ ≈ σ₂` looks
/// like; any vector in the leading cluster is then acceptable.
pub fn leading_singular_pair<A: LinearOperator + ?Sized>(
    op: &A,
    opts: &PairOptions,
    start: Option<&[f64]>,
) -> Result<SingularPair> {
    let (rows, cols) = (op.nrows(), op.ncols());
    let mut v = match start {
        Some(s) if s.len() == cols && norm2(s) > 0.0 => s.to_vec(),
        _ => SplitMix64::new(opts.seed).normal_vec(cols),
    };
    let nv = norm2(&v);
    if nv == 0.0 || cols == 0 || rows == 0 {
        return Ok(SingularPair {
            sigma1: 0.0,
            u1: unit(rows),
            v1: unit(cols),
        });
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let pair = match opts.method {
        PairMethod::Power => power_pair(op, opts, v)?,
        PairMethod::Lanczos => lanczos_pair(op, opts, v)?,
    };
    // A warm start orthogonal to the leading space can report σ = 0 for a
    // nonzero operator; retry once from the seeded vector.
    if pair.sigma1 == 0.0 && start.is_some() {
        return leading_singular_pair(op, opts, None);
    }
    Ok(pair)
}

fn not_converged(opts: &PairOptions, residual: f64) -> Error {
    Error::numerical(format!(
        "leading singular pair did not converge in {} products (residual {residual:.3e})",
        opts.max_iters
    ))
}

fn power_pair<A: LinearOperator + ?Sized>(op: &A, opts: &PairOptions, mut v: Vec<f64>) -> Result<SingularPair> {
    let (rows, cols) = (op.nrows(), op.ncols());
    let mut u = vec![0.0; rows];
    let mut w = vec![0.0; cols];
    let mut history: Vec<f64> = Vec::new();
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iters.max(1) {
        op.apply(&v, &mut u);
        let sigma = norm2(&u);
        if sigma == 0.0 {
            return Ok(SingularPair {
                sigma1: 0.0,
                u1: unit(rows),
                v1: v,
            });
        }
        u.iter_mut().for_each(|x| *x /= sigma);
        op.apply_t(&u, &mut w);
        residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - sigma * b).powi(2))
            .sum::<f64>()
            .sqrt()
            / sigma;
        history.push(sigma);
        if residual <= opts.tol {
            return Ok(SingularPair {
                sigma1: sigma,
                u1: u,
                v1: v,
            });
        }
        let nw = norm2(&w);
        v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / nw);
    }
    let sigma = *history.last().expect("at least one iteration");
    let stalled = history.len() > 10 && {
        let back = history[history.len() - 11];
        (sigma - back).abs() <= opts.tol * sigma
    };
    if residual > 100.0 * opts.tol && !stalled {
        return Err(not_converged(opts, residual));
    }
    Ok(SingularPair {
        sigma1: sigma,
        u1: u,
        v1: v,
    })
}

/// Subtract the projections onto `basis` twice (classical Gram–Schmidt with
/// one reorthogonalization pass).
fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(w, b);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Leading triple `(σ, x, y)` of the upper bidiagonal matrix with diagonal
/// `alphas` and superdiagonal `betas`, so that `B y = σ x`.
fn bidiagonal_top(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let k = alphas.len();
    let mut b = DMatrix::zeros(k, k);
    for i in 0..k {
        b[(i, i)] = alphas[i];
        if i + 1 < k {
            b[(i, i + 1)] = betas[i];
        }
    }
    let d = svd(&b);
    let x = d.u.column(0).iter().copied().collect();
    let y = d.v.column(0).iter().copied().collect();
    (d.s[0], x, y)
}

fn combine(basis: &[Vec<f64>], coeffs: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (b, c) in basis.iter().zip(coeffs) {
        out.iter_mut().zip(b).for_each(|(o, x)| *o += c * x);
    }
    let n = norm2(&out);
    if n > 0.0 {
        out.iter_mut().for_each(|o| *o /= n);
    }
    out
}

/// Relative size below which a Lanczos coefficient is treated as zero.
/// Dividing by anything smaller amplifies rounding error past the solver's
/// tolerance, while dropping it perturbs `σ` by at most this much.
const BREAKDOWN: f64 = 1e-10;

fn lanczos_pair<A: LinearOperator + ?Sized>(op: &A, opts: &PairOptions, mut v0: Vec<f64>) -> Result<SingularPair> {
    let (rows, cols) = (op.nrows(), op.ncols());
    // One step past min(rows, cols) lets a rank-limited side close the
    // bidiagonal through a zero diagonal entry.
    let kmax = opts.krylov_dim.max(2).min(rows.min(cols) + 1);
    let budget = opts.max_iters.max(1);
    let mut used = 0;
    let mut prev_sigma: Option<f64> = None;
    loop {
        let mut vs: Vec<Vec<f64>> = vec![v0.clone()];
        let mut us: Vec<Vec<f64>> = Vec::with_capacity(kmax);
        let mut alphas = Vec::with_capacity(kmax);
        let mut betas = Vec::with_capacity(kmax);
        let mut top = (0.0, vec![1.0], vec![1.0]);
        let mut residual = f64::INFINITY;
        let mut finished = false;
        for j in 0..kmax {
            let mut u = vec![0.0; rows];
            op.apply(&vs[j], &mut u);
            used += 1;
            if let Some(prev) = us.last() {
                let beta: f64 = betas[j - 1];
                u.iter_mut().zip(prev).for_each(|(x, p)| *x -= beta * p);
            }
            reorthogonalize(&mut u, &us);
            let alpha = norm2(&u);
            if j == 0 && alpha == 0.0 {
                return Ok(SingularPair {
                    sigma1: 0.0,
                    u1: unit(rows),
                    v1: v0,
                });
            }
            let scale = alphas.iter().chain(&betas).fold(alpha, |m: f64, x| m.max(*x));
            if alpha <= BREAKDOWN * scale {
                // Invariant subspace: close the bidiagonal with a zero
                // diagonal entry; its Ritz triple is then exact.
                us.push(vec![0.0; rows]);
                alphas.push(0.0);
                top = bidiagonal_top(&alphas, &betas[..alphas.len() - 1]);
                finished = true;
                break;
            }
            u.iter_mut().for_each(|x| *x /= alpha);
            us.push(u);
            alphas.push(alpha);

            let mut w = vec![0.0; cols];
            op.apply_t(&us[j], &mut w);
            w.iter_mut().zip(&vs[j]).for_each(|(x, p)| *x -= alpha * p);
            reorthogonalize(&mut w, &vs);
            let beta = norm2(&w);
            betas.push(beta);

            let check = j < 8 || j % 4 == 3 || j + 1 == kmax || used >= budget || beta <= BREAKDOWN * scale;
            if check {
                top = bidiagonal_top(&alphas, &betas[..alphas.len() - 1]);
                residual = beta * top.1.last().expect("nonempty").abs() / top.0;
                if residual <= opts.tol || beta <= BREAKDOWN * scale {
                    finished = true;
                    break;
                }
            }
            if used >= budget {
                break;
            }
            w.iter_mut().for_each(|x| *x /= beta);
            vs.push(w);
        }
        if top.1.len() != alphas.len() {
            top = bidiagonal_top(&alphas, &betas[..alphas.len() - 1]);
        }
        let (sigma, x, y) = top;
        let u1 = combine(&us, &x, rows);
        let v1 = combine(&vs[..alphas.len()], &y, cols);
        let stalled = prev_sigma.is_some_and(|p| (sigma - p).abs() <= opts.tol * sigma);
        if finished || stalled {
            return Ok(SingularPair { sigma1: sigma, u1, v1 });
        }
        if used >= budget {
            if residual <= 100.0 * opts.tol {
                return Ok(SingularPair { sigma1: sigma, u1, v1 });
            }
            return Err(not_converged(opts, residual));
        }
        prev_sigma = Some(sigma);
        v0 = v1;
    }
}

fn unit(len: usize) -> Vec<f64> {
    let mut e = vec![0.0; len];
    if let Some(first) = e.first_mut() {
        *first = 1.0;
    }
    e
}

/// One side of `φ(X) = PXQ`, described by a matrix `M` acting on `ℝ^dim`:
/// `M = P` on the left and `M = Qᵀ` on the right.
#[derive(Clone, Debug)]
enum SideMap {
    Identity(usize),
    /// `M = I − BBᵀ` for an orthonormal `B`; `M⁺ = M`.
    Complement(DMatrix<f64>),
    Dense {
        mat: DMatrix<f64>,
        pinv: DMatrix<f64>,
        proj: DMatrix<f64>,
        is_projection: bool,
    },
}

impl SideMap {
    fn dense(mat: DMatrix<f64>) -> Self {
        let is_projection = is_orthogonal_projection(&mat);
        let pinv = if is_projection {
            mat.clone()
        } else {
            pseudo_inverse(&mat)
        };
        let proj = &pinv * &mat;
        SideMap::Dense {
            mat,
            pinv,
            proj,
            is_projection,
        }
    }

    fn dim(&self) -> usize {
        match self {
            SideMap::Identity(d) => *d,
            SideMap::Complement(b) => b.nrows(),
            SideMap::Dense { mat, .. } => mat.ncols(),
        }
    }

    fn out_dim(&self) -> usize {
        match self {
            SideMap::Dense { mat, .. } => mat.nrows(),
            _ => self.dim(),
        }
    }

    fn is_projection(&self) -> bool {
        match self {
            SideMap::Dense { is_projection, .. } => *is_projection,
            _ => true,
        }
    }

    fn complement(b: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
        let coeffs = b.tr_mul(&nalgebra::DVector::from_column_slice(w));
        let back = b * coeffs;
        w.iter().zip(back.iter()).map(|(a, c)| a - c).collect()
    }

    fn mul(m: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
        (m * nalgebra::DVectorView::from_slice(w, w.len())).data.into()
    }

    fn mul_t(m: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
        m.tr_mul(&nalgebra::DVector::from_column_slice(w)).data.into()
    }

    /// `M w`
    fn apply(&self, w: &[f64]) -> Vec<f64> {
        match self {
            SideMap::Identity(_) => w.to_vec(),
            SideMap::Complement(b) => Self::complement(b, w),
            SideMap::Dense { mat, .. } => Self::mul(mat, w),
        }
    }

    /// `M⁺ u`, from `ℝ^out_dim` to `ℝ^dim`.
    fn pinv(&self, u: &[f64]) -> Vec<f64> {
        match self {
            SideMap::Dense { pinv, .. } => Self::mul(pinv, u),
            _ => self.apply(u),
        }
    }

    /// `(M⁺)ᵀ w`, from `ℝ^dim` to `ℝ^out_dim`.
    fn pinv_t(&self, w: &[f64]) -> Vec<f64> {
        match self {
            SideMap::Dense { pinv, .. } => Self::mul_t(pinv, w),
            _ => self.apply(w),
        }
    }

    /// `M⁺M w`
    fn proj(&self, w: &[f64]) -> Vec<f64> {
        match self {
            SideMap::Dense { proj, .. } => Self::mul(proj, w),
            _ => self.apply(w),
        }
    }

    fn proj_matrix(&self) -> DMatrix<f64> {
        match self {
            SideMap::Identity(d) => DMatrix::identity(*d, *d),
            SideMap::Complement(b) => DMatrix::identity(b.nrows(), b.nrows()) - b * b.transpose(),
            SideMap::Dense { proj, .. } => proj.clone(),
        }
    }

    fn matrix(&self) -> DMatrix<f64> {
        match self {
            SideMap::Dense { mat, .. } => mat.clone(),
            _ => self.proj_matrix(),
        }
    }

    fn pinv_matrix(&self) -> DMatrix<f64> {
        match self {
            SideMap::Dense { pinv, .. } => pinv.clone(),
            _ => self.proj_matrix(),
        }
    }

    fn rank(&self) -> usize {
        match self {
            SideMap::Identity(d) => *d,
            SideMap::Complement(b) => b.nrows() - b.ncols(),
            SideMap::Dense { proj, .. } => proj.trace().round() as usize,
        }
    }
}

fn is_orthogonal_projection(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = 1.0 + m.amax();
    (m - m.transpose()).amax() <= 1e-12 * scale && (m * m - m).amax() <= 1e-12 * scale
}

/// The region `ker φ ⊕ S` for `φ(X) = PXQ`, `P: k×m`, `Q: n×l`.
#[derive(Clone, Debug)]
pub struct GenNucNormRegion {
    m: usize,
    n: usize,
    delta: f64,
    left: SideMap,
    right: SideMap,
    pair: PairOptions,
}

impl GenNucNormRegion {
    /// General `P` and `Q`; pseudo-inverses are computed once here. When both
    /// are orthogonal projections they serve as their own pseudo-inverses.
    pub fn new(p: DMatrix<f64>, q: DMatrix<f64>, delta: f64) -> Result<Self> {
        check_finite(p.as_slice(), "P")?;
        check_finite(q.as_slice(), "Q")?;
        let (m, n) = (p.ncols(), q.nrows());
        Self::build(m, n, delta, SideMap::dense(p), SideMap::dense(q.transpose()))
    }

    /// Plain nuclear-norm ball, `P = I_m`, `Q = I_n`.
    pub fn identity(m: usize, n: usize, delta: f64) -> Result<Self> {
        Self::build(m, n, delta, SideMap::Identity(m), SideMap::Identity(n))
    }

    /// `‖(I − P₁P₁ᵀ) X‖* ≤ δ` for `P₁` with orthonormal columns: column-space
    /// side information. Both maps are orthogonal projections, so
    /// `C̄ = (I − P₁P₁ᵀ) C` and the oracle output is `−δ u₁v₁ᵀ`.
    pub fn with_column_side_information(p1: DMatrix<f64>, n: usize, delta: f64) -> Result<Self> {
        check_finite(p1.as_slice(), "P1")?;
        let gram = p1.tr_mul(&p1);
        if (gram - DMatrix::identity(p1.ncols(), p1.ncols())).amax() > 1e-10 {
            return Err(Error::invalid("side-information basis must have orthonormal columns"));
        }
        let m = p1.nrows();
        Self::build(m, n, delta, SideMap::Complement(p1), SideMap::Identity(n))
    }

    fn build(m: usize, n: usize, delta: f64, left: SideMap, right: SideMap) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive, got {delta}")));
        }
        check_len(m, left.dim())?;
        check_len(n, right.dim())?;
        Ok(Self {
            m,
            n,
            delta,
            left,
            right,
            pair: PairOptions::default(),
        })
    }

    pub fn with_pair_options(mut self, pair: PairOptions) -> Self {
        self.pair = pair;
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// True when `P` and `Q` are orthogonal projections (`P⁺ = P`, `Q⁺ = Q`).
    pub fn projection_flag(&self) -> bool {
        self.left.is_projection() && self.right.is_projection()
    }

    /// `P` as a dense `k × m` matrix.
    pub fn p_matrix(&self) -> DMatrix<f64> {
        self.left.matrix()
    }

    /// `Q` as a dense `n × l` matrix.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        self.right.matrix().transpose()
    }

    pub fn p_pinv(&self) -> DMatrix<f64> {
        self.left.pinv_matrix()
    }

    pub fn q_pinv(&self) -> DMatrix<f64> {
        self.right.pinv_matrix().transpose()
    }

    /// `P⁺P`, `m × m`.
    pub fn pplus_p(&self) -> DMatrix<f64> {
        self.left.proj_matrix()
    }

    /// `QQ⁺`, `n × n`.
    pub fn q_qplus(&self) -> DMatrix<f64> {
        self.right.proj_matrix()
    }

    /// `P X Q` for a flattened `X`.
    pub fn apply_phi(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        check_len(self.m * self.n, x.len())?;
        let k = self.left.out_dim();
        let l = self.right.out_dim();
        // P X, column by column.
        let mut px = DMatrix::zeros(k, self.n);
        for (j, col) in x.chunks_exact(self.m).enumerate() {
            px.set_column(j, &nalgebra::DVector::from_vec(self.left.apply(col)));
        }
        // (P X) Q = ((Qᵀ)(P X)ᵀ)ᵀ, row by row.
        let mut out = DMatrix::zeros(k, l);
        for i in 0..k {
            let row: Vec<f64> = px.row(i).iter().copied().collect();
            let mapped = self.right.apply(&row);
            for (j, v) in mapped.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// `P⁺P X QQ⁺`.
    pub fn project_tperp_nuc(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m * self.n, x.len())?;
        let mut out = vec![0.0; x.len()];
        for (dst, col) in out.chunks_exact_mut(self.m).zip(x.chunks_exact(self.m)) {
            dst.copy_from_slice(&self.left.proj(col));
        }
        if !matches!(self.right, SideMap::Identity(_)) {
            let mut row = vec![0.0; self.n];
            for i in 0..self.m {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = out[i + j * self.m];
                }
                for (j, v) in self.right.proj(&row).into_iter().enumerate() {
                    out[i + j * self.m] = v;
                }
            }
        }
        Ok(out)
    }

    /// Leading singular pair of `C̄ = (P⁺)ᵀ C (Q⁺)ᵀ` for a flattened `C`.
    pub fn reduced_gradient_pair(&self, c: &[f64], start: Option<&[f64]>) -> Result<SingularPair> {
        check_len(self.m * self.n, c.len())?;
        let sparse = SparseMatrix::from_dense(self.m, self.n, c);
        if sparse.nnz() * 2 <= c.len() {
            self.pair_through(&sparse, start)
        } else {
            self.pair_through(&DenseView::new(self.m, self.n, c), start)
        }
    }

    fn pair_through<A: LinearOperator>(&self, c: &A, start: Option<&[f64]>) -> Result<SingularPair> {
        let reduced = ReducedOperator { region: self, c };
        leading_singular_pair(&reduced, &self.pair, start)
    }

    fn vertex_from_pair(&self, pair: &SingularPair) -> Vec<f64> {
        if pair.sigma1 == 0.0 {
            return vec![0.0; self.m * self.n];
        }
        let left = self.left.pinv(&pair.u1);
        let right = self.right.pinv(&pair.v1);
        let mut x = vec![0.0; self.m * self.n];
        for (j, rj) in right.iter().enumerate() {
            let scale = -self.delta * rj;
            for (i, li) in left.iter().enumerate() {
                x[i + j * self.m] = scale * li;
            }
        }
        x
    }
}

/// `v ↦ (P⁺)ᵀ C (Q⁺)ᵀ v` and its transpose.
struct ReducedOperator<'a, A> {
    region: &'a GenNucNormRegion,
    c: &'a A,
}

impl<A: LinearOperator> LinearOperator for ReducedOperator<'_, A> {
    fn nrows(&self) -> usize {
        self.region.left.out_dim()
    }

    fn ncols(&self) -> usize {
        self.region.right.out_dim()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let w = self.region.right.pinv(v);
        let mut cw = vec![0.0; self.region.m];
        self.c.apply(&w, &mut cw);
        out.copy_from_slice(&self.region.left.pinv_t(&cw));
    }

    fn apply_t(&self, u: &[f64], out: &mut [f64]) {
        let w = self.region.left.pinv(u);
        let mut ctw = vec![0.0; self.region.n];
        self.c.apply_t(&w, &mut ctw);
        out.copy_from_slice(&self.region.right.pinv_t(&ctw));
    }
}

/// Oracle on a matrix-shaped gradient.
pub fn lmo_nucnorm(region: &GenNucNormRegion, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = region.shape();
    if c.shape() != (m, n) {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            got: c.len(),
        });
    }
    let v = region.lmo(c.as_slice())?;
    Ok(DMatrix::from_vec(m, n, v.point))
}

impl DecomposedRegion for GenNucNormRegion {
    fn ambient_dim(&self) -> usize {
        self.m * self.n
    }

    fn subspace_dim(&self) -> usize {
        self.m * self.n - self.left.rank() * self.right.rank()
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn project_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.project_tperp_nuc(x)?;
        Ok(x.iter().zip(&p).map(|(a, b)| a - b).collect())
    }

    fn project_tperp(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.project_tperp_nuc(x)
    }

    fn lmo(&self, c: &[f64]) -> Result<VertexHandle> {
        self.lmo_warm(c, &mut LmoState::default())
    }

    /// Warm-starts the singular-pair iteration from the previous call's right
    /// vector.
    fn lmo_warm(&self, c: &[f64], warm: &mut LmoState) -> Result<VertexHandle> {
        check_len(self.m * self.n, c.len())?;
        check_finite(c, "lmo direction")?;
        let pair = self.reduced_gradient_pair(c, warm.warm_vector.as_deref())?;
        if pair.sigma1 > 0.0 {
            warm.warm_vector = Some(pair.v1.clone());
        }
        let point = self.vertex_from_pair(&pair);
        Ok(VertexHandle {
            key: VertexKey::continuous_from(&point),
            point,
        })
    }

    fn is_polyhedral(&self) -> bool {
        false
    }

    /// The zero matrix.
    fn default_start(&self) -> Vec<f64> {
        vec![0.0; self.m * self.n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(rows: usize, cols: usize, g: &mut SplitMix64) -> DMatrix<f64> {
        DMatrix::from_vec(rows, cols, g.normal_vec(rows * cols))
    }

    #[test]
    fn pinv_of_identity_and_diagonal() {
        let i = DMatrix::<f64>::identity(4, 4);
        assert!((pseudo_inverse(&i) - &i).amax() < 1e-14);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.0]));
        let p = pseudo_inverse(&d);
        assert!((p[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(p[(1, 1)], 0.0);
        assert_eq!(pseudo_inverse(&DMatrix::zeros(3, 2)), DMatrix::zeros(2, 3));
    }

    #[test]
    fn pinv_penrose_identities() {
        let mut g = SplitMix64::new(17);
        let m = random(8, 5, &mut g);
        let p = pseudo_inverse(&m);
        let scale = 1.0 + m.amax();
        assert!((&m * &p * &m - &m).amax() <= 1e-8 * scale);
        assert!((&p * &m * &p - &p).amax() <= 1e-8 * (1.0 + p.amax()));
        let mp = &m * &p;
        assert!((&mp - mp.transpose()).amax() <= 1e-8);
        let pm = &p * &m;
        assert!((&pm - pm.transpose()).amax() <= 1e-8);
    }

    #[test]
    fn rank_one_leading_pair() {
        let mut c = DMatrix::zeros(4, 3);
        c[(0, 0)] = 1.0;
        let pair = leading_singular_pair(&c, &PairOptions::default(), None).unwrap();
        assert!((pair.sigma1 - 1.0).abs() < 1e-12);
        assert!((pair.u1[0].abs() - 1.0).abs() < 1e-9);
        assert!((pair.v1[0].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_has_zero_sigma() {
        let c = DMatrix::<f64>::zeros(3, 3);
        let pair = leading_singular_pair(&c, &PairOptions::default(), None).unwrap();
        assert_eq!(pair.sigma1, 0.0);
        let region = GenNucNormRegion::identity(3, 3, 1.0).unwrap();
        let x = lmo_nucnorm(&region, &c).unwrap();
        assert_eq!(x, DMatrix::zeros(3, 3));
    }

    #[test]
    fn leading_pair_matches_dense_svd() {
        let mut g = SplitMix64::new(4);
        let c = random(20, 15, &mut g);
        let want = c.clone().svd(false, false).singular_values.max();
        let pair = leading_singular_pair(&c, &PairOptions::default(), None).unwrap();
        assert!((pair.sigma1 - want).abs() <= 1e-7 * want);
        assert!((norm2(&pair.u1) - 1.0).abs() < 1e-9);
        assert!((norm2(&pair.v1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_and_dense_operators_agree() {
        let mut g = SplitMix64::new(6);
        let mut data = g.normal_vec(30);
        for (k, v) in data.iter_mut().enumerate() {
            if k % 3 != 0 {
                *v = 0.0;
            }
        }
        let sparse = SparseMatrix::from_dense(6, 5, &data);
        let dense = DenseView::new(6, 5, &data);
        let v = g.normal_vec(5);
        let u = g.normal_vec(6);
        let (mut a, mut b) = (vec![0.0; 6], vec![0.0; 6]);
        sparse.apply(&v, &mut a);
        dense.apply(&v, &mut b);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
        let (mut a, mut b) = (vec![0.0; 5], vec![0.0; 5]);
        sparse.apply_t(&u, &mut a);
        dense.apply_t(&u, &mut b);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn identity_region_lmo_on_unit_matrix() {
        let region = GenNucNormRegion::identity(3, 4, 1.0).unwrap();
        let mut c = DMatrix::zeros(3, 4);
        c[(0, 0)] = 1.0;
        let x = lmo_nucnorm(&region, &c).unwrap();
        let mut want = DMatrix::zeros(3, 4);
        want[(0, 0)] = -1.0;
        assert!((x.clone() - want).amax() < 1e-9);
        assert!((c.dot(&x) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn projection_maps_for_identity_and_zero() {
        let mut g = SplitMix64::new(1);
        let x = g.normal_vec(12);
        let id = GenNucNormRegion::identity(3, 4, 1.0).unwrap();
        assert_eq!(id.project_tperp(&x).unwrap(), x);
        let zero = GenNucNormRegion::new(DMatrix::zeros(2, 3), DMatrix::identity(4, 4), 1.0).unwrap();
        assert!(zero.project_tperp(&x).unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(zero.subspace_dim(), 12);
    }

    #[test]
    fn general_projection_is_idempotent_and_symmetric() {
        let mut g = SplitMix64::new(12);
        let p = random(3, 6, &mut g);
        let q = random(5, 2, &mut g);
        let region = GenNucNormRegion::new(p, q, 1.0).unwrap();
        assert!(!region.projection_flag());
        let pp = region.pplus_p();
        assert!((&pp - pp.transpose()).amax() < 1e-9);
        assert!((&pp * &pp - &pp).amax() < 1e-9);
        let qq = region.q_qplus();
        assert!((&qq - qq.transpose()).amax() < 1e-9);
        let x = g.normal_vec(30);
        let z = g.normal_vec(30);
        let px = region.project_tperp(&x).unwrap();
        let ppx = region.project_tperp(&px).unwrap();
        assert!(px.iter().zip(&ppx).all(|(a, b)| (a - b).abs() < 1e-9));
        // Self-adjoint: ⟨P x, z⟩ = ⟨x, P z⟩.
        let pz = region.project_tperp(&z).unwrap();
        assert!((dot(&px, &z) - dot(&x, &pz)).abs() < 1e-9);
        // Matches the explicit Kronecker form P⁺P X QQ⁺.
        let xm = DMatrix::from_column_slice(6, 5, &x);
        let want = &pp * xm * &qq;
        assert!(want.iter().zip(&px).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn general_lmo_is_feasible_and_optimal() {
        let mut g = SplitMix64::new(21);
        let p = random(4, 7, &mut g);
        let q = random(6, 3, &mut g);
        let region = GenNucNormRegion::new(p.clone(), q.clone(), 2.0).unwrap();
        let c = random(7, 6, &mut g);
        let x = lmo_nucnorm(&region, &c).unwrap();
        let cbar = region.p_pinv().transpose() * &c * region.q_pinv().transpose();
        let sigma = cbar.svd(false, false).singular_values.max();
        assert!((c.dot(&x) + 2.0 * sigma).abs() <= 1e-7 * (1.0 + sigma));
        assert!(nuclear_norm(&(&p * &x * &q)) <= 2.0 * (1.0 + 1e-8));
        let px = region.project_tperp(x.as_slice()).unwrap();
        assert!(px.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-8));
    }

    #[test]
    fn side_information_constructor_matches_dense() {
        let mut g = SplitMix64::new(30);
        let p1 = random(8, 2, &mut g).qr().q();
        let fast = GenNucNormRegion::with_column_side_information(p1.clone(), 5, 1.0).unwrap();
        assert!(fast.projection_flag());
        let p = DMatrix::identity(8, 8) - &p1 * p1.transpose();
        let slow = GenNucNormRegion::new(p, DMatrix::identity(5, 5), 1.0).unwrap();
        assert!(slow.projection_flag());
        assert_eq!(fast.subspace_dim(), 10);
        let c = g.normal_vec(40);
        let a = fast.lmo(&c).unwrap().point;
        let b = slow.lmo(&c).unwrap().point;
        assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-7));
        assert!(GenNucNormRegion::with_column_side_information(random(8, 2, &mut g), 5, 1.0).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let mut g = SplitMix64::new(2);
        let c = random(10, 10, &mut g);
        for opts in [PairOptions::power(), PairOptions::default()] {
            let opts = opts.with_tol(1e-14).with_max_iters(2);
            assert!(leading_singular_pair(&c, &opts, None).is_err());
        }
    }

    /// `U diag(σ) Vᵀ` with random orthonormal factors.
    fn with_spectrum(rows: usize, cols: usize, sigma: &[f64], g: &mut SplitMix64) -> DMatrix<f64> {
        let u = random(rows, sigma.len(), g).qr().q();
        let v = random(cols, sigma.len(), g).qr().q();
        &u * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(sigma)) * v.transpose()
    }

    #[test]
    fn both_methods_match_dense_svd_on_random_matrices() {
        let mut g = SplitMix64::new(31);
        for _ in 0..100 {
            let rows = 1 + g.below(30) as usize;
            let cols = 1 + g.below(30) as usize;
            let c = random(rows, cols, &mut g);
            let want = c.clone().svd(false, false).singular_values.max();
            for opts in [PairOptions::default(), PairOptions::power().with_max_iters(20_000)] {
                let pair = leading_singular_pair(&c, &opts, None).unwrap();
                assert!((pair.sigma1 - want).abs() <= 1e-8 * want, "{:?} {rows}x{cols}", opts.method);
                let cv = &c * nalgebra::DVector::from_column_slice(&pair.v1);
                assert!(cv.iter().zip(&pair.u1).all(|(a, b)| (a - pair.sigma1 * b).abs() <= 1e-6 * want));
            }
        }
    }

    #[test]
    fn near_tie_in_the_leading_singular_values() {
        let mut g = SplitMix64::new(8);
        let c = with_spectrum(25, 20, &[1.001, 1.0, 0.5, 0.2], &mut g);
        for opts in [PairOptions::default(), PairOptions::power().with_max_iters(4000)] {
            let pair = leading_singular_pair(&c, &opts, None).unwrap();
            assert!((pair.sigma1 - 1.001).abs() <= 1e-8, "{:?} {}", opts.method, pair.sigma1);
        }
    }

    #[test]
    fn rank_deficient_operator_breaks_down_cleanly() {
        let mut g = SplitMix64::new(12);
        let c = with_spectrum(19, 13, &[3.0, 2.5, 1e-11, 1e-12], &mut g);
        let pair = leading_singular_pair(&c, &PairOptions::default(), None).unwrap();
        assert!((pair.sigma1 - 3.0).abs() <= 1e-9);
    }
}
