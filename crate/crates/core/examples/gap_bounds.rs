//! The `G` and `H` diagnostics bound the primal gap. With a strongly convex
//! objective, `G + H²/(2μ)` is a certificate that needs no knowledge of `f*`.
//!
//! ```text
//! cargo run --release --example gap_bounds
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ufw::rng::SplitMix64;
use ufw::{
    estimate_step_eta, primal_gap_bound, uafw_solve, DecomposedRegion, LeastSquaresObjective, TrendFilterRegion,
    UfwConfig,
};

fn main() -> ufw::Result<()> {
    // Tall A, so ‖Ax − b‖² is strongly convex with μ = 2 λ_min(AᵀA).
    let (rows, n) = (120, 30);
    let mut rng = SplitMix64::new(2);
    let a = DMatrix::from_vec(rows, n, rng.normal_vec(rows * n));
    let b = DVector::from_vec(rng.normal_vec(rows));
    let mu = 2.0 * SymmetricEigen::new(a.tr_mul(&a)).eigenvalues.min();

    let objective = LeastSquaresObjective::new(a, b)?;
    let region = TrendFilterRegion::new(n, 1, 0.5)?;
    let cfg = UfwConfig::new(estimate_step_eta(&objective)?).with_tolerances(0.0, 0.0);
    let x0 = region.default_start();
    let f_star = uafw_solve(&objective, &region, &x0, &cfg.clone().with_max_iters(5_000).with_trace(false))?.best_f;
    let res = uafw_solve(&objective, &region, &x0, &cfg.with_max_iters(400))?;

    println!("μ = {mu:.3}");
    println!("{:>5} {:>12} {:>12}", "k", "f − f*", "bound");
    for row in res.trace.iter().step_by(25) {
        let bound = primal_gap_bound(row.g_k, row.h_k, None, Some(mu))?;
        println!("{:>5} {:>12.3e} {:>12.3e}", row.k, row.f_val - f_star, bound);
    }
    Ok(())
}
