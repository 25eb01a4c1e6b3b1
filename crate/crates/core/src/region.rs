//! Feasible regions of the form `T ⊕ S`: a linear subspace `T` plus a bounded
//! convex set `S` lying in the orthogonal complement of `T`.
//!
//! Solvers only touch a region through [`DecomposedRegion`]: the two
//! orthogonal projections and a linear minimization oracle over `S`.

use std::fmt;

use crate::error::{check_finite, check_len, Result};
use crate::linalg::{dot, sub};

/// Identity of a vertex of `S`.
///
/// Discrete keys name the vertices of a polyhedral `S` exactly. Continuous
/// keys are a bit-level serialization of the point itself and only say that
/// two outputs were bitwise equal; regions emitting them cannot be used with
/// the away-step solver.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VertexKey {
    Discrete(Vec<i64>),
    Continuous(Vec<u64>),
}

impl VertexKey {
    pub fn continuous_from(point: &[f64]) -> Self {
        VertexKey::Continuous(point.iter().map(|v| v.to_bits()).collect())
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, VertexKey::Discrete(_))
    }
}

impl fmt::Display for VertexKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexKey::Discrete(k) => write!(f, "{k:?}"),
            VertexKey::Continuous(bits) => write!(f, "continuous[{}]", bits.len()),
        }
    }
}

/// A vertex of `S` together with its coordinates.
#[derive(Clone, Debug)]
pub struct VertexHandle {
    pub key: VertexKey,
    pub point: Vec<f64>,
}

impl PartialEq for VertexHandle {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for VertexHandle {}

/// The `T ⊕ S` contract consumed by both solvers.
///
/// Implementations must be immutable after construction; every method takes
/// `&self` and a region may be shared by concurrent solves.
pub trait DecomposedRegion {
    /// Length of the flattened coordinate vector.
    fn ambient_dim(&self) -> usize;

    /// `dim(T)`.
    fn subspace_dim(&self) -> usize;

    /// The bound parameter of `S`.
    fn delta(&self) -> f64;

    /// Orthogonal projection onto `T`.
    fn project_t(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Orthogonal projection onto `T⊥`.
    fn project_tperp(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = self.project_t(x)?;
        Ok(sub(x, &t))
    }

    /// Linear minimization oracle: a minimizer of `⟨c, s⟩` over `S`.
    fn lmo(&self, c: &[f64]) -> Result<VertexHandle>;

    /// Oracle call that may reuse state from the previous call of the same
    /// solve (for example a warm-start vector for an iterative eigensolver).
    /// The default ignores the state.
    fn lmo_warm(&self, c: &[f64], _warm: &mut LmoState) -> Result<VertexHandle> {
        self.lmo(c)
    }

    /// Whether `S` is a polytope whose vertices carry discrete keys.
    fn is_polyhedral(&self) -> bool;

    /// Recover the handle of a vertex from its coordinates, if `p` is one.
    fn identify_vertex(&self, _p: &[f64]) -> Option<VertexHandle> {
        None
    }

    /// A feasible start whose `T⊥` component is a vertex of `S` when `S` is
    /// polyhedral.
    fn default_start(&self) -> Vec<f64>;
}

/// Per-solve scratch state threaded through [`DecomposedRegion::lmo_warm`].
#[derive(Clone, Debug, Default)]
pub struct LmoState {
    pub calls: u64,
    pub warm_vector: Option<Vec<f64>>,
}

/// Check that `x` splits consistently into its two projections:
/// `‖P_T x + P_T⊥ x − x‖ ≤ tol`.
pub fn check_projection_consistency<R: DecomposedRegion + ?Sized>(
    region: &R,
    x: &[f64],
    tol: f64,
) -> Result<f64> {
    check_len(region.ambient_dim(), x.len())?;
    check_finite(x, "start point")?;
    let t = region.project_t(x)?;
    let p = region.project_tperp(x)?;
    let err = t
        .iter()
        .zip(&p)
        .zip(x)
        .map(|((a, b), c)| (a + b - c).powi(2))
        .sum::<f64>()
        .sqrt();
    if err > tol {
        return Err(crate::Error::invalid(format!(
            "start point is not projection-consistent (residual {err:.3e})"
        )));
    }
    Ok(err)
}

/// `T = ℝⁿ`, `S = {0}`. Both solvers reduce to projected gradient descent.
#[derive(Clone, Debug)]
pub struct WholeSpace {
    dim: usize,
}

impl WholeSpace {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl DecomposedRegion for WholeSpace {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn subspace_dim(&self) -> usize {
        self.dim
    }

    fn delta(&self) -> f64 {
        0.0
    }

    fn project_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x.len())?;
        Ok(x.to_vec())
    }

    fn lmo(&self, c: &[f64]) -> Result<VertexHandle> {
        check_len(self.dim, c.len())?;
        check_finite(c, "lmo direction")?;
        Ok(VertexHandle {
            key: VertexKey::Discrete(vec![0]),
            point: vec![0.0; self.dim],
        })
    }

    fn is_polyhedral(&self) -> bool {
        true
    }

    fn identify_vertex(&self, p: &[f64]) -> Option<VertexHandle> {
        (p.len() == self.dim && p.iter().all(|&v| v == 0.0)).then(|| VertexHandle {
            key: VertexKey::Discrete(vec![0]),
            point: vec![0.0; self.dim],
        })
    }

    fn default_start(&self) -> Vec<f64> {
        vec![0.0; self.dim]
    }
}

/// `T = {0}`, `S = {x : ‖x‖₁ ≤ δ}`: the classical Frank-Wolfe setting.
///
/// Vertices are `±δ eᵢ`, keyed `[i, sign]`. Ties in the oracle go to the
/// smallest index, and a zero coefficient selects `−δ eᵢ`.
#[derive(Clone, Debug)]
pub struct L1Ball {
    dim: usize,
    delta: f64,
}

impl L1Ball {
    pub fn new(dim: usize, delta: f64) -> Result<Self> {
        if dim == 0 || !(delta > 0.0 && delta.is_finite()) {
            return Err(crate::Error::invalid("L1Ball needs dim > 0 and delta > 0"));
        }
        Ok(Self { dim, delta })
    }

    pub fn vertex(&self, index: usize, sign: i64) -> VertexHandle {
        let mut point = vec![0.0; self.dim];
        point[index] = -(sign as f64) * self.delta;
        VertexHandle {
            key: VertexKey::Discrete(vec![index as i64, sign]),
            point,
        }
    }

    pub fn vertices(&self) -> Vec<VertexHandle> {
        (0..self.dim)
            .flat_map(|i| [self.vertex(i, -1), self.vertex(i, 1)])
            .collect()
    }
}

impl DecomposedRegion for L1Ball {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn subspace_dim(&self) -> usize {
        0
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn project_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x.len())?;
        Ok(vec![0.0; self.dim])
    }

    fn project_tperp(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x.len())?;
        Ok(x.to_vec())
    }

    fn lmo(&self, c: &[f64]) -> Result<VertexHandle> {
        check_len(self.dim, c.len())?;
        check_finite(c, "lmo direction")?;
        let (j, cj) = argmax_abs(c);
        Ok(self.vertex(j, sign_nonneg(cj)))
    }

    fn is_polyhedral(&self) -> bool {
        true
    }

    fn identify_vertex(&self, p: &[f64]) -> Option<VertexHandle> {
        if p.len() != self.dim {
            return None;
        }
        let nz: Vec<usize> = (0..p.len()).filter(|&i| p[i] != 0.0).collect();
        match nz.as_slice() {
            [i] if (p[*i].abs() - self.delta).abs() <= 1e-12 * self.delta => {
                Some(self.vertex(*i, if p[*i] < 0.0 { 1 } else { -1 }))
            }
            _ => None,
        }
    }

    fn default_start(&self) -> Vec<f64> {
        self.vertex(0, 1).point
    }
}

/// Index and value of the entry of largest magnitude; ties go to the smallest
/// index.
pub(crate) fn argmax_abs(c: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for (i, v) in c.iter().enumerate().skip(1) {
        if v.abs() > c[best].abs() {
            best = i;
        }
    }
    (best, c[best])
}

/// `sign` with `sign(0) = +1`.
pub(crate) fn sign_nonneg(v: f64) -> i64 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// `min ⟨c, v⟩` over an explicit vertex list.
pub fn min_over_vertices(c: &[f64], vertices: &[VertexHandle]) -> Option<(usize, f64)> {
    vertices
        .iter()
        .map(|v| dot(c, &v.point))
        .enumerate()
        .fold(None, |acc, (i, val)| match acc {
            Some((_, best)) if best <= val => acc,
            _ => Some((i, val)),
        })
}
