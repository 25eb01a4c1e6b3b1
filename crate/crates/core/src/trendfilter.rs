//! ℓ1 trend filtering of order `r`: the region `{x : ‖D^(r) x‖₁ ≤ δ}`.
//!
//! `T = ker D^(r)` is spanned by discrete polynomials of degree `< r`, and
//! `S` is the part of the constraint set orthogonal to it. With `U` the
//! all-ones upper-triangular matrix, `D^(r) U^r = [I, 0]`, so the substitution
//! `x = U^r [z; w]` turns the oracle into an ℓ1-ball problem in `z` alone.
//! Neither `D^(r)` nor `U^r` is ever stored: `U x` is a suffix sum and
//! `Uᵀ x` a prefix sum, so each application costs `O(nr)`.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{check_finite, check_len, Error, Result};
use crate::region::{argmax_abs, sign_nonneg, DecomposedRegion, VertexHandle, VertexKey};

/// Largest order accepted by [`TrendFilterRegion::new`]; the kernel basis is
/// already badly conditioned well before this.
pub const MAX_ORDER: usize = 8;

/// Largest `n − r` for which [`TrendFilterRegion::enumerate_vertices`] runs.
pub const ENUMERATION_LIMIT: usize = 64;

/// `D^(r) x` by `r` first-difference passes, `(D^(1) x)_i = x_i − x_{i+1}`.
pub fn apply_d(r: usize, x: &[f64]) -> Result<Vec<f64>> {
    if r == 0 || r >= x.len() {
        return Err(Error::invalid(format!(
            "difference order must satisfy 1 <= r < n (r = {r}, n = {})",
            x.len()
        )));
    }
    let mut v = x.to_vec();
    for _ in 0..r {
        v = v.windows(2).map(|w| w[0] - w[1]).collect();
    }
    Ok(v)
}

/// `U x`: suffix sums.
fn apply_u(x: &mut [f64]) {
    let mut acc = 0.0;
    for v in x.iter_mut().rev() {
        acc += *v;
        *v = acc;
    }
}

/// `Uᵀ x`: prefix sums.
fn apply_ut(x: &mut [f64]) {
    let mut acc = 0.0;
    for v in x.iter_mut() {
        acc += *v;
        *v = acc;
    }
}

/// `U^r x`.
pub fn apply_u_pow(r: usize, x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    for _ in 0..r {
        apply_u(&mut v);
    }
    v
}

/// `(U^r)ᵀ x`.
pub fn apply_ut_pow(r: usize, x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    for _ in 0..r {
        apply_ut(&mut v);
    }
    v
}

/// Orthonormal basis of `ker D^(r)_n` as an `n × r` matrix.
///
/// Householder QR of `[1, U1, …, U^{r−1}1]` (columns pre-scaled to unit
/// norm), with signs fixed so that `R` has a positive diagonal.
pub fn kernel_basis(n: usize, r: usize) -> Result<DMatrix<f64>> {
    if r == 0 || r >= n {
        return Err(Error::invalid(format!("kernel basis needs 1 <= r < n (r = {r}, n = {n})")));
    }
    let mut a = DMatrix::zeros(n, r);
    let mut col = vec![1.0; n];
    for j in 0..r {
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..n {
            a[(i, j)] = col[i] / norm;
        }
        apply_u(&mut col);
    }
    let qr = a.qr();
    let r_factor = qr.r();
    let mut q = qr.q();
    for j in 0..r {
        if r_factor[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q)
}

/// Check `D^(i)_n U^i = [I_{n−i}, 0]` in exact integer arithmetic.
pub fn verify_hl_identity(n: usize, i: usize) -> bool {
    if i == 0 || i >= n {
        return false;
    }
    // D^(i)_n by the recursion D^(j+1)_n = D^(1)_{n−j} D^(j)_n.
    let mut d: Vec<Vec<i128>> = (0..n)
        .map(|row| (0..n).map(|c| (row == c) as i128).collect())
        .collect();
    for _ in 0..i {
        d = d
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| a - b).collect())
            .collect();
    }
    // U^i: apply suffix sums i times to each column of the identity.
    let mut u: Vec<Vec<i128>> = (0..n)
        .map(|row| (0..n).map(|c| (row == c) as i128).collect())
        .collect();
    for _ in 0..i {
        for c in 0..n {
            let mut acc = 0i128;
            for row in (0..n).rev() {
                acc += u[row][c];
                u[row][c] = acc;
            }
        }
    }
    d.iter().enumerate().all(|(row, drow)| {
        (0..n).all(|c| {
            let entry: i128 = (0..n).map(|t| drow[t] * u[t][c]).sum();
            entry == (row == c) as i128
        })
    })
}

/// The trend-filtering region `ker D^(r) ⊕ S`.
///
/// Vertex keys are `[j, s]` with `j < n − r` and `s ∈ {−1, +1}`; the vertex
/// is the point whose reduced coordinates are `z = −s·δ·e_j`. The oracle picks
/// `s = sign(c̃_j)` with `sign(0) = +1`.
#[derive(Clone, Debug)]
pub struct TrendFilterRegion {
    n: usize,
    r: usize,
    delta: f64,
    /// Orthonormal basis of `T`, `n × r`.
    basis: DMatrix<f64>,
    /// `B₁ᵀ`, `(n − r) × r`, where `QᵀU^r = [B₁, B₂]`.
    b1_t: DMatrix<f64>,
    b2_lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    b2_t_lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl TrendFilterRegion {
    pub fn new(n: usize, r: usize, delta: f64) -> Result<Self> {
        if r == 0 || r >= n {
            return Err(Error::invalid(format!("trend filter needs 1 <= r < n (r = {r}, n = {n})")));
        }
        if r > MAX_ORDER {
            return Err(Error::invalid(format!("trend filter order is capped at {MAX_ORDER}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("delta must be positive, got {delta}")));
        }
        let basis = kernel_basis(n, r)?;
        // Row i of QᵀU^r is ((U^r)ᵀ q_i)ᵀ.
        let mut b = DMatrix::zeros(r, n);
        for i in 0..r {
            let row = apply_ut_pow(r, basis.column(i).as_slice());
            for (j, v) in row.into_iter().enumerate() {
                b[(i, j)] = v;
            }
        }
        let b1_t = b.columns(0, n - r).transpose();
        let b2 = b.columns(n - r, r).into_owned();
        let b2_lu = b2.clone().lu();
        if !b2_lu.is_invertible() {
            return Err(Error::Singular("trailing block of QᵀU^r is singular".into()));
        }
        let b2_t_lu = b2.transpose().lu();
        Ok(Self {
            n,
            r,
            delta,
            basis,
            b1_t,
            b2_lu,
            b2_t_lu,
        })
    }

    pub fn order(&self) -> usize {
        self.r
    }

    /// Orthonormal basis of `T`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Number of free reduced coordinates, `n − r`.
    pub fn reduced_dim(&self) -> usize {
        self.n - self.r
    }

    /// `c̃ = c̄₁ − B₁ᵀ B₂⁻ᵀ c̄₂` with `c̄ = (U^r)ᵀ c`; the oracle value at
    /// vertex `[j, s]` is `−s·δ·c̃_j`.
    pub fn reduced_costs(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, c.len())?;
        self.reduced_costs_with(&apply_ut_pow(self.r, c))
    }

    fn reduced_costs_with(&self, cbar: &[f64]) -> Result<Vec<f64>> {
        let (c1, c2) = cbar.split_at(self.n - self.r);
        let t = self
            .b2_t_lu
            .solve(&DVector::from_column_slice(c2))
            .ok_or_else(|| Error::Singular("B₂ᵀ solve failed".into()))?;
        let corr = &self.b1_t * t;
        Ok(c1.iter().zip(corr.iter()).map(|(a, b)| a - b).collect())
    }

    /// The vertex with key `[j, s]`.
    pub fn vertex(&self, j: usize, s: i64) -> Result<VertexHandle> {
        if j >= self.n - self.r || !(s == 1 || s == -1) {
            return Err(Error::invalid(format!("no trend-filter vertex [{j}, {s}]")));
        }
        let zj = -(s as f64) * self.delta;
        // w = −B₂⁻¹ B₁ z, and B₁ e_j is row j of B₁ᵀ.
        let b1_col = self.b1_t.row(j).transpose() * zj;
        let w = self
            .b2_lu
            .solve(&b1_col)
            .ok_or_else(|| Error::Singular("B₂ solve failed".into()))?;
        let mut y = vec![0.0; self.n];
        y[j] = zj;
        for (dst, wi) in y[self.n - self.r..].iter_mut().zip(w.iter()) {
            *dst = -wi;
        }
        let mut x = apply_u_pow(self.r, &y);
        // Remove the rounding residue in T; D^(r) x is unaffected.
        let resid = self.project_t_vec(&x);
        for (xi, ri) in x.iter_mut().zip(&resid) {
            *xi -= ri;
        }
        Ok(VertexHandle {
            key: VertexKey::Discrete(vec![j as i64, s]),
            point: x,
        })
    }

    /// All `2(n − r)` vertices of `S` in key order.
    pub fn enumerate_vertices(&self) -> Result<Vec<VertexHandle>> {
        if self.n - self.r > ENUMERATION_LIMIT {
            return Err(Error::invalid(format!(
                "refusing to enumerate {} vertices (limit n - r <= {ENUMERATION_LIMIT})",
                2 * (self.n - self.r)
            )));
        }
        let mut out = Vec::with_capacity(2 * (self.n - self.r));
        for j in 0..self.n - self.r {
            out.push(self.vertex(j, -1)?);
            out.push(self.vertex(j, 1)?);
        }
        Ok(out)
    }

    fn project_t_vec(&self, x: &[f64]) -> Vec<f64> {
        let coeffs = self.basis.tr_mul(&DVector::from_column_slice(x));
        (&self.basis * coeffs).data.into()
    }
}

impl DecomposedRegion for TrendFilterRegion {
    fn ambient_dim(&self) -> usize {
        self.n
    }

    fn subspace_dim(&self) -> usize {
        self.r
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn project_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        Ok(self.project_t_vec(x))
    }

    fn lmo(&self, c: &[f64]) -> Result<VertexHandle> {
        check_len(self.n, c.len())?;
        check_finite(c, "lmo direction")?;
        let cbar = apply_ut_pow(self.r, c);
        let ctilde = self.reduced_costs_with(&cbar)?;
        let (j, cj) = argmax_abs(&ctilde);
        // A direction in T cancels to rounding noise; treat it as exactly zero
        // so every vertex ties and the tie-break applies.
        let floor = 1e-12 * cbar.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if cj.abs() <= floor {
            return self.vertex(0, 1);
        }
        self.vertex(j, sign_nonneg(cj))
    }

    fn is_polyhedral(&self) -> bool {
        true
    }

    fn identify_vertex(&self, p: &[f64]) -> Option<VertexHandle> {
        let z = apply_d(self.r, p).ok()?;
        let (j, zj) = argmax_abs(&z);
        let tol = 1e-9 * self.delta;
        if (zj.abs() - self.delta).abs() > tol {
            return None;
        }
        if z.iter().enumerate().any(|(i, v)| i != j && v.abs() > tol) {
            return None;
        }
        // z = −s·δ·e_j
        self.vertex(j, if zj < 0.0 { 1 } else { -1 }).ok()
    }

    /// The vertex `[0, +1]`.
    fn default_start(&self) -> Vec<f64> {
        self.vertex(0, 1).expect("vertex [0, +1] always exists").point
    }
}
