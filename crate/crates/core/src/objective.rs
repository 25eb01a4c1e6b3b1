//! Smooth convex objectives.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{dot, norm2};
use crate::rng::SplitMix64;

/// A smooth convex function on the flattened coordinate space.
pub trait SmoothObjective {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }

    /// `argmin_{α ∈ [0, α_max]} f(y + α d)`.
    ///
    /// The default is golden-section search; quadratic objectives override it
    /// with the closed form.
    fn exact_linesearch(&self, y: &[f64], d: &[f64], alpha_max: f64) -> Result<f64> {
        validate_linesearch(self.dim(), y, d, alpha_max)?;
        let mut trial = y.to_vec();
        let phi = |alpha: f64, buf: &mut Vec<f64>| {
            for ((b, yi), di) in buf.iter_mut().zip(y).zip(d) {
                *b = yi + alpha * di;
            }
            self.value(buf)
        };
        Ok(golden_section(|a| phi(a, &mut trial), alpha_max))
    }

    /// A gradient step-size the objective can vouch for, if it knows one.
    fn step_eta(&self) -> Option<Result<f64>> {
        None
    }
}

pub(crate) fn validate_linesearch(dim: usize, y: &[f64], d: &[f64], alpha_max: f64) -> Result<()> {
    check_len(dim, y.len())?;
    check_len(dim, d.len())?;
    check_finite(y, "line-search point")?;
    check_finite(d, "line-search direction")?;
    if !(alpha_max > 0.0 && alpha_max.is_finite()) {
        return Err(Error::invalid(format!(
            "line search needs a finite alpha_max > 0, got {alpha_max}"
        )));
    }
    Ok(())
}

/// Minimize a unimodal `phi` on `[0, alpha_max]`.
///
/// Interval tolerance `1e-12·max(1, alpha_max)`, at most 200 reductions. The
/// endpoints are compared against the bracketed minimizer so the returned
/// step never does worse than `α = 0`.
pub fn golden_section(mut phi: impl FnMut(f64) -> f64, alpha_max: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let tol = 1e-12 * alpha_max.max(1.0);
    let (mut lo, mut hi) = (0.0, alpha_max);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = phi(x1);
    let mut f2 = phi(x2);
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = phi(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = phi(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    let mut best = (0.0, phi(0.0));
    for a in [mid, alpha_max] {
        let fa = phi(a);
        if fa < best.1 {
            best = (a, fa);
        }
    }
    best.0
}

/// Closed-form exact step for a quadratic along `d`: minimizer of
/// `−2α·num + α²·denom` clamped to `[0, α_max]`.
fn quadratic_step(num: f64, denom: f64, alpha_max: f64) -> f64 {
    if denom <= 0.0 {
        // Flat direction: move only if it is strictly descending.
        return if num > 0.0 { alpha_max } else { 0.0 };
    }
    (num / denom).clamp(0.0, alpha_max)
}

/// `f(x) = ‖b − A x‖₂²`.
///
/// When `A` has at least as many rows as columns (and at most
/// [`GRAM_LIMIT`] columns) the Gram matrix `AᵀA` and `Aᵀb` are formed once
/// and every evaluation works in `ℝⁿ`: `f(x) = ‖b‖² − 2⟨Aᵀb, x⟩ + xᵀAᵀAx`.
/// Results agree with the residual form up to rounding.
#[derive(Clone, Debug)]
pub struct LeastSquaresObjective {
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: Option<Gram>,
}

/// Column cap for the Gram form.
pub const GRAM_LIMIT: usize = 4096;

#[derive(Clone, Debug)]
struct Gram {
    ata: DMatrix<f64>,
    atb: DVector<f64>,
    bb: f64,
}

impl LeastSquaresObjective {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_len(a.nrows(), b.len())?;
        if a.ncols() == 0 {
            return Err(Error::invalid("design matrix has no columns"));
        }
        check_finite(a.as_slice(), "design matrix")?;
        check_finite(b.as_slice(), "response")?;
        let use_gram = a.ncols() <= a.nrows() && a.ncols() <= GRAM_LIMIT;
        Ok(Self { a, b, gram: None }.with_gram(use_gram))
    }

    /// Switch between the Gram form and the residual form.
    pub fn with_gram(mut self, enabled: bool) -> Self {
        self.gram = enabled.then(|| Gram {
            ata: self.a.tr_mul(&self.a),
            atb: self.a.tr_mul(&self.b),
            bb: self.b.norm_squared(),
        });
        self
    }

    pub fn uses_gram(&self) -> bool {
        self.gram.is_some()
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.b
    }

    fn residual(&self, x: &[f64]) -> DVector<f64> {
        assert_eq!(x.len(), self.a.ncols(), "objective dimension mismatch");
        let xv = DVectorView::from_slice(x, x.len());
        let mut r = self.b.clone();
        r.gemv(-1.0, &self.a, &xv, 1.0);
        r
    }

    /// `(f(x), AᵀA x)` in the Gram form.
    fn gram_eval(&self, g: &Gram, x: &[f64]) -> (f64, DVector<f64>) {
        assert_eq!(x.len(), self.a.ncols(), "objective dimension mismatch");
        let xv = DVectorView::from_slice(x, x.len());
        let mut gx = DVector::zeros(x.len());
        gx.gemv(1.0, &g.ata, &xv, 0.0);
        let f = g.bb - 2.0 * g.atb.dot(&xv) + gx.dot(&xv);
        (f.max(0.0), gx)
    }

    /// `‖A‖²_op` by power iteration on `AᵀA`.
    pub fn operator_norm_sq(&self) -> Result<f64> {
        let a = &self.a;
        let mut tmp = DVector::zeros(a.nrows());
        let mut out = DVector::zeros(a.ncols());
        let lambda = power_iteration_sym(a.ncols(), 1e-6, 500, 0x5eed, |v, dst| {
            let vv = DVectorView::from_slice(v, v.len());
            tmp.gemv(1.0, a, &vv, 0.0);
            out.gemv_tr(1.0, a, &tmp, 0.0);
            dst.copy_from_slice(out.as_slice());
        });
        if !(lambda > 0.0) {
            return Err(Error::invalid(
                "design matrix is zero; gradient step-size is undefined",
            ));
        }
        Ok(lambda)
    }
}

impl SmoothObjective for LeastSquaresObjective {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.gram {
            Some(g) => self.gram_eval(g, x).0,
            None => self.residual(x).norm_squared(),
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match &self.gram {
            Some(g) => {
                let (f, gx) = self.gram_eval(g, x);
                let grad = gx.iter().zip(g.atb.iter()).map(|(a, b)| 2.0 * (a - b)).collect();
                (f, grad)
            }
            None => {
                let r = self.residual(x);
                let mut g = DVector::zeros(self.a.ncols());
                g.gemv_tr(-2.0, &self.a, &r, 0.0);
                (r.norm_squared(), g.data.into())
            }
        }
    }

    fn exact_linesearch(&self, y: &[f64], d: &[f64], alpha_max: f64) -> Result<f64> {
        validate_linesearch(self.dim(), y, d, alpha_max)?;
        let dv = DVectorView::from_slice(d, d.len());
        match &self.gram {
            Some(g) => {
                // ⟨Ad, b − Ay⟩ = ⟨d, Aᵀb⟩ − ⟨AᵀA d, y⟩
                let mut gd = DVector::zeros(d.len());
                gd.gemv(1.0, &g.ata, &dv, 0.0);
                let yv = DVectorView::from_slice(y, y.len());
                Ok(quadratic_step(g.atb.dot(&dv) - gd.dot(&yv), gd.dot(&dv), alpha_max))
            }
            None => {
                let r = self.residual(y);
                let ad = &self.a * dv;
                Ok(quadratic_step(ad.dot(&r), ad.norm_squared(), alpha_max))
            }
        }
    }

    /// `1/‖A‖²_op`.
    fn step_eta(&self) -> Option<Result<f64>> {
        Some(self.operator_norm_sq().map(|l| 1.0 / l))
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator.
///
/// Stops when the Rayleigh quotient changes by at most `rel_tol` relative.
pub(crate) fn power_iteration_sym(
    dim: usize,
    rel_tol: f64,
    max_iters: usize,
    seed: u64,
    mut apply: impl FnMut(&[f64], &mut [f64]),
) -> f64 {
    let mut rng = SplitMix64::new(seed);
    let mut v = rng.normal_vec(dim);
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = vec![0.0; dim];
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        apply(&v, &mut w);
        let next = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let done = (next - lambda).abs() <= rel_tol * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

/// `f(X) = ‖P_Ω(X − B)‖²_F` over an `m × n` matrix flattened column-major.
///
/// `Ω` is kept sorted row-major; only the observed entries of `B` are stored.
#[derive(Clone, Debug)]
pub struct MaskedFrobeniusObjective {
    m: usize,
    n: usize,
    /// Flat column-major index of each observed entry, in row-major order.
    flat: Vec<usize>,
    omega: Vec<(usize, usize)>,
    observed: Vec<f64>,
}

impl MaskedFrobeniusObjective {
    pub fn new(m: usize, n: usize, omega: Vec<(usize, usize)>, observed: Vec<f64>) -> Result<Self> {
        check_len(omega.len(), observed.len())?;
        check_finite(&observed, "observed entries")?;
        let mut pairs: Vec<((usize, usize), f64)> = omega.into_iter().zip(observed).collect();
        pairs.sort_by_key(|p| p.0);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!("duplicate observed entry {:?}", w[0].0)));
            }
        }
        if let Some(((i, j), _)) = pairs.iter().find(|((i, j), _)| *i >= m || *j >= n) {
            return Err(Error::invalid(format!("observed entry ({i}, {j}) out of bounds")));
        }
        let (omega, observed): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let flat = omega.iter().map(|&(i, j)| i + j * m).collect();
        Ok(Self {
            m,
            n,
            flat,
            omega,
            observed,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn omega(&self) -> &[(usize, usize)] {
        &self.omega
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    /// Gradient entries over `Ω` only, in the same order as [`Self::omega`].
    pub fn sparse_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.flat
            .iter()
            .zip(&self.observed)
            .map(|(&k, b)| 2.0 * (x[k] - b))
            .collect()
    }
}

impl SmoothObjective for MaskedFrobeniusObjective {
    fn dim(&self) -> usize {
        self.m * self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "objective dimension mismatch");
        self.flat
            .iter()
            .zip(&self.observed)
            .map(|(&k, b)| (x[k] - b) * (x[k] - b))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(x.len(), self.dim(), "objective dimension mismatch");
        let mut g = vec![0.0; self.dim()];
        let mut f = 0.0;
        for (&k, b) in self.flat.iter().zip(&self.observed) {
            let r = x[k] - b;
            f += r * r;
            g[k] = 2.0 * r;
        }
        (f, g)
    }

    fn exact_linesearch(&self, y: &[f64], d: &[f64], alpha_max: f64) -> Result<f64> {
        validate_linesearch(self.dim(), y, d, alpha_max)?;
        let (mut num, mut denom) = (0.0, 0.0);
        for (&k, b) in self.flat.iter().zip(&self.observed) {
            num += d[k] * (b - y[k]);
            denom += d[k] * d[k];
        }
        Ok(quadratic_step(num, denom, alpha_max))
    }

    /// The gradient `2·P_Ω(·)` is 2-Lipschitz.
    fn step_eta(&self) -> Option<Result<f64>> {
        Some(Ok(0.5))
    }
}

/// An objective assembled from closures, for problems outside the built-ins.
pub struct ClosureObjective<F, G> {
    dim: usize,
    value: F,
    gradient: G,
    eta: Option<f64>,
}

impl<F, G> ClosureObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    pub fn new(dim: usize, value: F, gradient: G) -> Self {
        Self {
            dim,
            value,
            gradient,
            eta: None,
        }
    }

    /// Supply a smoothness-based step-size, typically `1/L`.
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }
}

impl<F, G> SmoothObjective for ClosureObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    fn step_eta(&self) -> Option<Result<f64>> {
        self.eta.map(Ok)
    }
}

/// The gradient step-size used by the solvers: `1/‖A‖²` for least squares
/// (the experimental convention; with `f = ‖Ax − b‖²` this is `2/L`, not
/// `1/L`, so pass an explicit eta if you need the conservative step), `1/2` for the masked
/// Frobenius loss, or whatever a custom objective reports.
pub fn estimate_step_eta<O: SmoothObjective + ?Sized>(objective: &O) -> Result<f64> {
    match objective.step_eta() {
        Some(eta) => {
            let eta = eta?;
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::invalid(format!("step-size must be positive, got {eta}")));
            }
            Ok(eta)
        }
        None => Err(Error::invalid(
            "objective has no smoothness bound; pass an explicit eta",
        )),
    }
}
