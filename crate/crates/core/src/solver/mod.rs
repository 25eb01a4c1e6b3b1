//! The unbounded Frank-Wolfe solvers.
//!
//! Both methods alternate a gradient step along `T`,
//!
//! ```text
//! y = x − η·P_T ∇f(x)
//! ```
//!
//! with a conditional-gradient step inside `S` driven by the oracle output
//! `s = lmo(∇f(y))`. [`ufw_solve`] always moves toward `s`; [`uafw_solve`]
//! also tracks the active vertices of `P_T⊥ x` and may step away from the
//! worst one, which gives linear convergence on polytopes.
//!
//! Termination uses the pair
//!
//! ```text
//! G = ⟨∇f(y), P_T⊥ y − s⟩      H = ‖P_T ∇f(y)‖₂
//! ```
//!
//! scaled by `max(1, |f_best|)` where `f_best` is the lowest value seen so far.

mod active_set;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use active_set::{ActiveVertexSet, WEIGHT_FLOOR};

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dist2, dot, norm2, sub};
use crate::objective::SmoothObjective;
use crate::region::{check_projection_consistency, DecomposedRegion, LmoState, VertexHandle};

/// Below this norm an away/FW direction is treated as zero.
pub const DEGENERATE_DIRECTION: f64 = 1e-14;

/// Iterations between checks that the active weights still reproduce `P_T⊥ x`.
pub const DRIFT_CHECK_INTERVAL: usize = 100;

/// Drift past this (relative to `1 + ‖x‖`) aborts the solve.
pub const DRIFT_FAILURE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    /// `α_k = 2/(k+2)` when the trial point stays in the initial level set,
    /// otherwise `α_k = 0`.
    Simple,
    /// Exact minimization over `[0, 1]`.
    LineSearch,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UfwConfig {
    /// Gradient step-size along `T`.
    pub eta: f64,
    /// Ignored by [`uafw_solve`], which always line-searches.
    pub step_rule: StepRule,
    pub max_iters: usize,
    pub tol_g: f64,
    pub tol_h2: f64,
    pub record_trace: bool,
    /// Keep only the most recent records when set.
    pub trace_limit: Option<usize>,
}

impl UfwConfig {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            step_rule: StepRule::Simple,
            max_iters: 10_000,
            tol_g: 1e-4,
            tol_h2: 1e-4,
            record_trace: true,
            trace_limit: None,
        }
    }

    pub fn with_step_rule(mut self, rule: StepRule) -> Self {
        self.step_rule = rule;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tolerances(mut self, tol_g: f64, tol_h2: f64) -> Self {
        self.tol_g = tol_g;
        self.tol_h2 = tol_h2;
        self
    }

    pub fn with_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn with_trace_limit(mut self, limit: usize) -> Self {
        self.trace_limit = Some(limit);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.tol_g >= 0.0 && self.tol_h2 >= 0.0) {
            return Err(Error::invalid("tolerances must be non-negative"));
        }
        if self.trace_limit == Some(0) {
            return Err(Error::invalid("trace_limit must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    /// Toward the oracle vertex.
    FW,
    /// Away from an active vertex, keeping it.
    Away,
    /// Away step of maximal length that removed a vertex.
    Drop,
    /// No move inside `S`; only the gradient step along `T` was applied.
    GradientOnly,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::FW => "FW",
            StepKind::Away => "Away",
            StepKind::Drop => "Drop",
            StepKind::GradientOnly => "GradientOnly",
        }
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "FW" => StepKind::FW,
            "Away" => StepKind::Away,
            "Drop" => StepKind::Drop,
            "GradientOnly" => StepKind::GradientOnly,
            other => return Err(Error::Format(format!("unknown step kind {other:?}"))),
        })
    }
}

/// One row of the convergence trace.
///
/// `f_val` is `f(x^k)`; `g_k` and `h_k` are measured at `y^k`; `alpha` and
/// `step_kind` describe the move from `y^k` to `x^{k+1}`. The final row of a
/// solve records the stopping diagnostics with a zero step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub f_val: f64,
    pub g_k: f64,
    pub h_k: f64,
    pub step_kind: StepKind,
    pub alpha: f64,
    /// Active vertices after the step; always 0 for uFW, which keeps none.
    pub active_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    GapTolerance,
    MaxIters,
    DegenerateDirection,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationReason::GapTolerance => "GapTolerance",
            TerminationReason::MaxIters => "MaxIters",
            TerminationReason::DegenerateDirection => "DegenerateDirection",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    /// `y^k` of the last iteration.
    pub x_final: Vec<f64>,
    /// `f(x_final)`.
    pub final_f: f64,
    /// Lowest `f(x^k)` over all iterations.
    pub best_f: f64,
    /// Steps taken.
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub termination_reason: TerminationReason,
    /// Diagnostics at the last iteration.
    pub final_g: f64,
    pub final_h: f64,
}

/// What an observer sees once per iteration, before the step is taken.
pub struct IterationView<'a> {
    pub k: usize,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub f_x: f64,
    pub f_y: f64,
    pub grad_y: &'a [f64],
    pub vertex: &'a VertexHandle,
    pub g_k: f64,
    pub h_k: f64,
}

/// `(G, H)` at `y` for an oracle output `s = lmo(∇f(y))`.
pub fn compute_gaps<O, R>(objective: &O, region: &R, y: &[f64], s: &[f64]) -> Result<(f64, f64)>
where
    O: SmoothObjective + ?Sized,
    R: DecomposedRegion + ?Sized,
{
    check_len(region.ambient_dim(), y.len())?;
    check_len(region.ambient_dim(), s.len())?;
    let g = objective.gradient(y);
    gaps_from_gradient(region, &g, &region.project_tperp(y)?, s)
}

fn gaps_from_gradient<R: DecomposedRegion + ?Sized>(
    region: &R,
    grad: &[f64],
    y_perp: &[f64],
    s: &[f64],
) -> Result<(f64, f64)> {
    let g_gap = dot(grad, y_perp) - dot(grad, s);
    let h_gap = norm2(&region.project_t(grad)?);
    Ok((g_gap, h_gap))
}

/// Upper bound on `f(y) − f*` from the diagnostics.
///
/// Uses `G + H·D_T` when a bound on the `T`-diameter of the level set is
/// known and `G + H²/(2μ)` when the strong-convexity modulus is known,
/// returning the smaller.
pub fn primal_gap_bound(g: f64, h: f64, d_t_bound: Option<f64>, mu: Option<f64>) -> Result<f64> {
    let mut bounds = Vec::with_capacity(2);
    if let Some(d) = d_t_bound {
        if !(d >= 0.0) {
            return Err(Error::invalid("D_T bound must be non-negative"));
        }
        bounds.push(g + h * d);
    }
    if let Some(mu) = mu {
        if !(mu > 0.0) {
            return Err(Error::invalid("mu must be positive"));
        }
        bounds.push(g + h * h / (2.0 * mu));
    }
    bounds
        .into_iter()
        .reduce(f64::min)
        .ok_or_else(|| Error::invalid("primal gap bound needs D_T or mu"))
}

/// Unbounded Frank-Wolfe.
pub fn ufw_solve<O, R>(objective: &O, region: &R, x0: &[f64], config: &UfwConfig) -> Result<SolveResult>
where
    O: SmoothObjective + ?Sized,
    R: DecomposedRegion + ?Sized,
{
    ufw_solve_observed(objective, region, x0, config, |_| {})
}

pub fn ufw_solve_observed<O, R>(
    objective: &O,
    region: &R,
    x0: &[f64],
    config: &UfwConfig,
    observer: impl FnMut(&IterationView<'_>),
) -> Result<SolveResult>
where
    O: SmoothObjective + ?Sized,
    R: DecomposedRegion + ?Sized,
{
    Run::new(objective, region, x0, config, Method::Ufw(config.step_rule))?.go(observer)
}

/// Unbounded away-step Frank-Wolfe. Requires a polyhedral `S` and a start
/// whose `T⊥` component is a vertex.
pub fn uafw_solve<O, R>(objective: &O, region: &R, x0: &[f64], config: &UfwConfig) -> Result<SolveResult>
where
    O: SmoothObjective + ?Sized,
    R: DecomposedRegion + ?Sized,
{
    uafw_solve_observed(objective, region, x0, config, |_| {})
}

pub fn uafw_solve_observed<O, R>(
    objective: &O,
    region: &R,
    x0: &[f64],
    config: &UfwConfig,
    observer: impl FnMut(&IterationView<'_>),
) -> Result<SolveResult>
where
    O: SmoothObjective + ?Sized,
    R: DecomposedRegion + ?Sized,
{
    if !region.is_polyhedral() {
        return Err(Error::UnsupportedRegion(
            "away steps need a polyhedral S with discrete vertex keys".into(),
        ));
    }
    Run::new(objective, region, x0, config, Method::Uafw)?.go(observer)
}

#[derive(Clone, Copy)]
enum Method {
    Ufw(StepRule),
    Uafw,
}

struct Run<'a, O: ?Sized, R: ?Sized> {
    objective: &'a O,
    region: &'a R,
    config: &'a UfwConfig,
    method: Method,
    x: Vec<f64>,
    f0: f64,
    best_f: f64,
    active: Option<ActiveVertexSet>,
    trace: VecDeque<IterationRecord>,
    lmo_state: LmoState,
}

enum Outcome {
    Continue,
    Stop(TerminationReason),
}

impl<'a, O, R> Run<'a, O, R>
where
    O: SmoothObjective + ?Sized,
    R: DecomposedRegion + ?Sized,
{
    fn new(objective: &'a O, region: &'a R, x0: &[f64], config: &'a UfwConfig, method: Method) -> Result<Self> {
        config.validate()?;
        check_len(region.ambient_dim(), objective.dim())?;
        check_projection_consistency(region, x0, 1e-8 * (1.0 + norm2(x0)))?;
        let active = match method {
            Method::Ufw(_) => None,
            Method::Uafw => {
                let p = region.project_tperp(x0)?;
                let v = region.identify_vertex(&p).ok_or_else(|| {
                    Error::invalid("away-step start must have a vertex of S as its T-perp component")
                })?;
                Some(ActiveVertexSet::singleton(v))
            }
        };
        let f0 = objective.value(x0);
        if !f0.is_finite() {
            return Err(Error::numerical("objective is not finite at the start point"));
        }
        Ok(Self {
            objective,
            region,
            config,
            method,
            x: x0.to_vec(),
            f0,
            best_f: f64::INFINITY,
            active,
            trace: VecDeque::new(),
            lmo_state: LmoState::default(),
        })
    }

    fn go(mut self, mut observer: impl FnMut(&IterationView<'_>)) -> Result<SolveResult> {
        let mut k = 0;
        loop {
            match self.iterate(k, &mut observer) {
                Ok((Outcome::Continue, _)) => k += 1,
                Ok((Outcome::Stop(reason), (y, g, h))) => {
                    let final_f = self.objective.value(&y);
                    return Ok(self.finish(y, final_f, k, reason, g, h));
                }
                Err(Error::NumericalFailure { reason, .. }) => {
                    let x = self.x.clone();
                    let f = self.objective.value(&x);
                    let partial = self.finish(x, f, k, TerminationReason::MaxIters, f64::NAN, f64::NAN);
                    return Err(Error::NumericalFailure {
                        reason: format!("iteration {k}: {reason}"),
                        partial: Some(Box::new(partial)),
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn finish(
        self,
        x_final: Vec<f64>,
        final_f: f64,
        iterations: usize,
        reason: TerminationReason,
        g: f64,
        h: f64,
    ) -> SolveResult {
        SolveResult {
            x_final,
            final_f,
            best_f: self.best_f,
            iterations,
            trace: self.trace.into(),
            termination_reason: reason,
            final_g: g,
            final_h: h,
        }
    }

    fn record(&mut self, rec: IterationRecord) {
        if !self.config.record_trace {
            return;
        }
        if let Some(limit) = self.config.trace_limit {
            while self.trace.len() >= limit {
                self.trace.pop_front();
            }
        }
        self.trace.push_back(rec);
    }

    #[allow(clippy::type_complexity)]
    fn iterate(
        &mut self,
        k: usize,
        observer: &mut impl FnMut(&IterationView<'_>),
    ) -> Result<(Outcome, (Vec<f64>, f64, f64))> {
        let (objective, region) = (self.objective, self.region);

        let (f_x, grad_x) = objective.value_and_gradient(&self.x);
        if !f_x.is_finite() {
            return Err(Error::numerical("objective value is not finite"));
        }
        self.best_f = self.best_f.min(f_x);

        // Gradient step along T.
        let grad_t = region.project_t(&grad_x)?;
        let mut y = self.x.clone();
        axpy(-self.config.eta, &grad_t, &mut y);
        let (f_y, grad_y) = objective.value_and_gradient(&y);
        if !f_y.is_finite() {
            return Err(Error::numerical("objective value is not finite after the gradient step"));
        }

        let s = region.lmo_warm(&grad_y, &mut self.lmo_state)?;
        self.lmo_state.calls += 1;
        let y_perp = region.project_tperp(&y)?;
        let (g_k, h_k) = gaps_from_gradient(region, &grad_y, &y_perp, &s.point)?;

        observer(&IterationView {
            k,
            x: &self.x,
            y: &y,
            f_x,
            f_y,
            grad_y: &grad_y,
            vertex: &s,
            g_k,
            h_k,
        });

        let scale = self.best_f.abs().max(1.0);
        let active_size = self.active.as_ref().map_or(0, |a| a.len());
        let stop_row = |reason| {
            (
                IterationRecord {
                    k,
                    f_val: f_x,
                    g_k,
                    h_k,
                    step_kind: StepKind::GradientOnly,
                    alpha: 0.0,
                    active_size,
                },
                reason,
            )
        };
        let stop = if g_k / scale < self.config.tol_g && h_k * h_k / scale < self.config.tol_h2 {
            Some(stop_row(TerminationReason::GapTolerance))
        } else if k >= self.config.max_iters {
            Some(stop_row(TerminationReason::MaxIters))
        } else {
            None
        };
        if let Some((row, reason)) = stop {
            self.record(row);
            return Ok((Outcome::Stop(reason), (y, g_k, h_k)));
        }

        let (kind, alpha) = match self.method {
            Method::Ufw(rule) => self.ufw_step(k, rule, &mut y, &y_perp, &s)?,
            Method::Uafw => match self.uafw_step(&mut y, &y_perp, &grad_y, &s, h_k)? {
                Some(step) => step,
                None => {
                    self.record(stop_row(TerminationReason::DegenerateDirection).0);
                    return Ok((
                        Outcome::Stop(TerminationReason::DegenerateDirection),
                        (y, g_k, h_k),
                    ));
                }
            },
        };
        self.x = y;

        if let Some(active) = &self.active {
            if (k + 1).is_multiple_of(DRIFT_CHECK_INTERVAL) {
                let recon = active.reconstruct(self.x.len());
                let perp = region.project_tperp(&self.x)?;
                let drift = dist2(&recon, &perp);
                let size = 1.0 + norm2(&self.x);
                if drift > DRIFT_FAILURE * size {
                    return Err(Error::numerical(format!(
                        "active-set weights drifted {drift:.3e} from the iterate"
                    )));
                }
                if drift > 1e-9 * size {
                    // Re-anchor the S component on the tracked combination.
                    let mut x = region.project_t(&self.x)?;
                    axpy(1.0, &recon, &mut x);
                    self.x = x;
                }
            }
        }

        let active_size = self.active.as_ref().map_or(0, |a| a.len());
        self.record(IterationRecord {
            k,
            f_val: f_x,
            g_k,
            h_k,
            step_kind: kind,
            alpha,
            active_size,
        });
        Ok((Outcome::Continue, (Vec::new(), g_k, h_k)))
    }

    fn ufw_step(
        &self,
        k: usize,
        rule: StepRule,
        y: &mut [f64],
        y_perp: &[f64],
        s: &VertexHandle,
    ) -> Result<(StepKind, f64)> {
        let d = sub(&s.point, y_perp);
        let alpha = match rule {
            StepRule::Simple => {
                let alpha = 2.0 / (k as f64 + 2.0);
                let mut trial = y.to_vec();
                axpy(alpha, &d, &mut trial);
                if self.objective.value(&trial) <= self.f0 {
                    alpha
                } else {
                    0.0
                }
            }
            StepRule::LineSearch => self.objective.exact_linesearch(y, &d, 1.0)?,
        };
        axpy(alpha, &d, y);
        Ok((if alpha > 0.0 { StepKind::FW } else { StepKind::GradientOnly }, alpha))
    }

    /// Returns `None` when the chosen direction is degenerate and the
    /// `T`-gradient has also vanished.
    fn uafw_step(
        &mut self,
        y: &mut [f64],
        y_perp: &[f64],
        grad_y: &[f64],
        s: &VertexHandle,
        h_k: f64,
    ) -> Result<Option<(StepKind, f64)>> {
        let active = self.active.as_mut().expect("away-step run keeps an active set");
        let (v_key, v_point, v_weight, _) = active
            .away_vertex(grad_y)
            .expect("active set is never empty");
        let v_key = v_key.clone();

        let fw_dir = sub(&s.point, y_perp);
        let away_dir = sub(y_perp, v_point);
        let fw_score = dot(grad_y, &fw_dir);
        let away_score = dot(grad_y, &away_dir);

        let (is_fw, d, alpha_max) = if fw_score < away_score {
            (true, fw_dir, 1.0)
        } else if v_weight < 1.0 {
            (false, away_dir, v_weight / (1.0 - v_weight))
        } else {
            (false, away_dir, f64::INFINITY)
        };

        if norm2(&d) <= DEGENERATE_DIRECTION || !alpha_max.is_finite() {
            if h_k <= DEGENERATE_DIRECTION * (1.0 + norm2(grad_y)) {
                return Ok(None);
            }
            return Ok(Some((StepKind::GradientOnly, 0.0)));
        }

        let alpha = self.objective.exact_linesearch(y, &d, alpha_max)?;
        axpy(alpha, &d, y);
        let kind = if is_fw {
            active.apply_fw_step(s, alpha);
            if alpha > 0.0 {
                StepKind::FW
            } else {
                StepKind::GradientOnly
            }
        } else {
            active.apply_away_step(&v_key, alpha, alpha_max);
            if alpha >= alpha_max {
                StepKind::Drop
            } else if alpha > 0.0 {
                StepKind::Away
            } else {
                StepKind::GradientOnly
            }
        };
        if (active.weight_sum() - 1.0).abs() > 1e-8 || active.is_empty() {
            return Err(Error::numerical("active-set weights no longer sum to one"));
        }
        Ok(Some((kind, alpha)))
    }
}
