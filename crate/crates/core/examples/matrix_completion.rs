//! Matrix completion with column-space side information: the part of `X`
//! inside `span(P₁)` is free and the rest is nuclear-norm bounded.
//!
//! ```text
//! cargo run --release --example matrix_completion
//! ```

use nalgebra::DMatrix;
use ufw::synth::{gen_matrix_instance, MatrixGenSpec};
use ufw::{estimate_step_eta, ufw_solve, DecomposedRegion, StepRule, UfwConfig};

fn main() -> ufw::Result<()> {
    let spec = MatrixGenSpec {
        m: 80,
        n: 60,
        r: 3,
        r1: 3,
        snr: 5.0,
        nnzr: 0.3,
        delta_rel: 0.5,
        seed: 11,
    };
    let inst = gen_matrix_instance(&spec)?;
    let objective = inst.objective()?;
    let region = inst.region()?;
    println!(
        "{}x{} matrix, {} observed entries, dim T = {}, δ = {:.3}",
        spec.m,
        spec.n,
        inst.omega.len(),
        region.subspace_dim(),
        inst.delta
    );

    let cfg = UfwConfig::new(estimate_step_eta(&objective)?)
        .with_step_rule(StepRule::LineSearch)
        .with_tolerances(3e-3, 3e-3)
        .with_max_iters(5_000)
        .with_trace(false);
    let res = ufw_solve(&objective, &region, &region.default_start(), &cfg)?;

    let x = DMatrix::from_column_slice(spec.m, spec.n, &res.x_final);
    let truth = &inst.ground_truth;
    let rel = (&x - truth).norm() / truth.norm();
    println!(
        "{} after {} iterations, f = {:.4}, relative error vs the noiseless signal {rel:.3}",
        res.termination_reason, res.iterations, res.best_f
    );
    Ok(())
}
