//! Frank-Wolfe solvers for smooth convex problems over `T ⊕ S`, where `T` is a
//! linear subspace and `S` a bounded convex set in its orthogonal complement.
//!
//! Such regions are unbounded, so classical conditional-gradient methods do not
//! apply directly. [`ufw_solve`] takes a gradient step along `T` and a
//! Frank-Wolfe step inside `S` each iteration; [`uafw_solve`] adds away steps
//! for polyhedral `S`. Two concrete regions ship with the crate:
//! [`TrendFilterRegion`] (`‖D^(r) x‖₁ ≤ δ`) and [`GenNucNormRegion`]
//! (`‖PXQ‖* ≤ δ`). Anything implementing [`DecomposedRegion`] works.
//!
//! ```
//! use ufw::{ufw_solve, L1Ball, ClosureObjective, UfwConfig, DecomposedRegion};
//!
//! // min ½‖x − c‖² over the ℓ1 ball of radius 1.
//! let c = [2.0, 0.5, -0.1];
//! let f = ClosureObjective::new(
//!     3,
//!     move |x: &[f64]| 0.5 * x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
//!     move |x: &[f64]| x.iter().zip(&c).map(|(a, b)| a - b).collect(),
//! );
//! let region = L1Ball::new(3, 1.0).unwrap();
//! let cfg = UfwConfig::new(1.0).with_max_iters(2000);
//! let res = ufw_solve(&f, &region, &region.default_start(), &cfg).unwrap();
//! assert!((res.x_final[0] - 1.0).abs() < 1e-2);
//! ```

pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod nucnorm;
pub mod objective;
pub mod region;
pub mod rng;
pub mod solver;
pub mod synth;
pub mod trendfilter;

pub use error::{Error, Result};
pub use nucnorm::{leading_singular_pair, lmo_nucnorm, pseudo_inverse, GenNucNormRegion, PairMethod, PairOptions, SingularPair};
pub use objective::{
    estimate_step_eta, ClosureObjective, LeastSquaresObjective, MaskedFrobeniusObjective, SmoothObjective,
};
pub use region::{DecomposedRegion, L1Ball, LmoState, VertexHandle, VertexKey, WholeSpace};
pub use solver::{
    compute_gaps, primal_gap_bound, uafw_solve, ufw_solve, IterationRecord, SolveResult, StepKind, StepRule,
    TerminationReason, UfwConfig,
};
pub use trendfilter::{apply_d, TrendFilterRegion};
