//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the solver or oracle code under test; the helpers
//! rebuild the same mathematical objects from dense linear algebra.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use sha2::{Digest, Sha256};
use ufw::synth::MatrixInstance;
use ufw::IterationRecord;

/// Dense `r`-th order difference matrix, `(n − r) × n`, rows `e_j − e_{j+1}`
/// composed `r` times.
pub fn difference_matrix(n: usize, r: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(n, n);
    for _ in 0..r {
        let rows = d.nrows() - 1;
        let mut next = DMatrix::zeros(rows, n);
        for i in 0..rows {
            let row = d.row(i) - d.row(i + 1);
            next.set_row(i, &row);
        }
        d = next;
    }
    d
}

/// Vertices of `{x ⊥ ker D : ‖D x‖₁ ≤ δ}`: the points `D⁺(±δ e_j)`.
pub fn trend_vertices_dense(n: usize, r: usize, delta: f64) -> Vec<DVector<f64>> {
    let d = difference_matrix(n, r);
    let pinv = d.clone().pseudo_inverse(1e-12).expect("pseudo-inverse");
    let mut out = Vec::new();
    for j in 0..d.nrows() {
        for s in [-1.0, 1.0] {
            let mut e = DVector::zeros(d.nrows());
            e[j] = s * delta;
            out.push(&pinv * e);
        }
    }
    out
}

/// Eigenvalues of `[[0, A], [Aᵀ, 0]]`, descending. They are `±σᵢ(A)` plus
/// `|m − n|` zeros; a symmetric eigensolver gets them to rounding accuracy
/// even when `A` is rank-deficient.
fn embedded_spectrum(a: &DMatrix<f64>) -> Vec<f64> {
    let (m, n) = a.shape();
    let mut h = DMatrix::zeros(m + n, m + n);
    h.view_mut((0, m), (m, n)).copy_from(a);
    h.view_mut((m, 0), (n, m)).copy_from(&a.transpose());
    let mut e: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    e.sort_by(|x, y| y.total_cmp(x));
    e
}

pub fn nuclear_norm_dense(x: &DMatrix<f64>) -> f64 {
    embedded_spectrum(x).iter().map(|v| v.abs()).sum::<f64>() / 2.0
}

pub fn sigma_max_dense(x: &DMatrix<f64>) -> f64 {
    embedded_spectrum(x)[0].max(0.0)
}

/// `A⁺ = (AᵀA)⁺Aᵀ` from the eigendecomposition of `AᵀA`.
pub fn pinv_dense(a: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(a.tr_mul(a));
    let top = e.eigenvalues.amax();
    let mut inv = DMatrix::zeros(a.ncols(), a.ncols());
    for (i, &l) in e.eigenvalues.iter().enumerate() {
        if l > 1e-10 * top {
            let v = e.eigenvectors.column(i);
            inv += v * v.transpose() / l;
        }
    }
    inv * a.transpose()
}

/// Euclidean projection of a nonnegative vector onto `{w ≥ 0 : Σw ≤ δ}`.
pub fn project_simplex_ball(s: &[f64], delta: f64) -> Vec<f64> {
    if s.iter().sum::<f64>() <= delta {
        return s.to_vec();
    }
    let mut u = s.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let (mut cum, mut theta) = (0.0, 0.0);
    for (i, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - delta) / (i + 1) as f64;
        if x > t {
            theta = t;
        }
    }
    s.iter().map(|x| (x - theta).max(0.0)).collect()
}

pub struct ApgResult {
    pub f: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Accelerated projected gradient with adaptive restart on
/// `min ‖P_Ω(X − B)‖² s.t. ‖(I − P₁P₁ᵀ) X‖* ≤ δ`.
///
/// The feasible set is a cylinder over the nuclear ball in `range(I − P₁P₁ᵀ)`,
/// so the exact projection keeps `P₁P₁ᵀX` and projects the rest by
/// soft-thresholding its singular values onto the `ℓ1` ball. Stops when the
/// fixed-point residual `‖X⁺ − Z‖_F / max(1, ‖X⁺‖_F)` drops below `tol`.
pub fn apg_matrix_reference(inst: &MatrixInstance, tol: f64, max_iters: usize) -> ApgResult {
    let (m, n) = (inst.spec.m, inst.spec.n);
    let p1 = &inst.p1;
    let project = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let t = p1 * (p1.transpose() * x);
        let svd = (x - &t).svd(true, true);
        let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        let w = project_simplex_ball(&sv, inst.delta);
        let (u, vt) = (svd.u.expect("U"), svd.v_t.expect("Vt"));
        let mut out = t;
        for (k, &wk) in w.iter().enumerate() {
            if wk > 0.0 {
                out += u.column(k) * vt.row(k) * wk;
            }
        }
        out
    };
    let value = |x: &DMatrix<f64>| -> f64 {
        inst.omega
            .iter()
            .zip(&inst.observed)
            .map(|(&(i, j), b)| (x[(i, j)] - b).powi(2))
            .sum()
    };
    let step = |z: &DMatrix<f64>| -> DMatrix<f64> {
        // Gradient 2·P_Ω(Z − B) with step 1/2.
        let mut y = z.clone();
        for (&(i, j), b) in inst.omega.iter().zip(&inst.observed) {
            y[(i, j)] = *b;
        }
        project(&y)
    };
    let mut x = DMatrix::zeros(m, n);
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut f = value(&x);
    let mut residual = f64::INFINITY;
    for k in 0..max_iters {
        let next = step(&z);
        residual = (&next - &z).norm() / next.norm().max(1.0);
        let f_next = value(&next);
        if residual <= tol {
            return ApgResult {
                f: f_next.min(f),
                iterations: k + 1,
                residual,
            };
        }
        if f_next > f {
            t = 1.0;
            z = x.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &x) * ((t - 1.0) / t_next);
        x = next;
        t = t_next;
        f = f_next;
    }
    ApgResult {
        f,
        iterations: max_iters,
        residual,
    }
}

/// Hex digest of a trace's exact bit patterns.
pub fn trace_digest(trace: &[IterationRecord]) -> String {
    let mut h = Sha256::new();
    for r in trace {
        h.update((r.k as u64).to_le_bytes());
        for v in [r.f_val, r.g_k, r.h_k, r.alpha] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(r.step_kind.as_str().as_bytes());
        h.update((r.active_size as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
