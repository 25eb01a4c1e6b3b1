//! Recover a piecewise-constant signal from noisy random projections with
//! both uFW step rules.
//!
//! ```text
//! cargo run --release --example trend_filter_ufw
//! ```

use ufw::synth::{gen_trend_instance, TrendGenSpec};
use ufw::{estimate_step_eta, ufw_solve, DecomposedRegion, StepRule, UfwConfig};

fn main() -> ufw::Result<()> {
    let inst = gen_trend_instance(&TrendGenSpec::new(400, 200, 1, 4.0, 7))?;
    let objective = inst.objective()?;
    let region = inst.region()?;
    let eta = estimate_step_eta(&objective)?;
    let x0 = region.default_start();

    for rule in [StepRule::Simple, StepRule::LineSearch] {
        let cfg = UfwConfig::new(eta).with_step_rule(rule).with_max_iters(50_000);
        let res = ufw_solve(&objective, &region, &x0, &cfg)?;
        let err = res
            .x_final
            .iter()
            .zip(&inst.x_star)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        println!(
            "{rule:?}: {} iterations, f = {:.6}, ‖x − x*‖ = {err:.4}, {}",
            res.iterations, res.best_f, res.termination_reason
        );
    }
    Ok(())
}
