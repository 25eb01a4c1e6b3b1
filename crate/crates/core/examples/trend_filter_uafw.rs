//! Away steps on a piecewise-constant trend filter. The active set stays small
//! and the gap falls geometrically.
//!
//! ```text
//! cargo run --release --example trend_filter_uafw
//! ```

use ufw::synth::{gen_trend_instance, TrendGenSpec};
use ufw::{estimate_step_eta, uafw_solve, DecomposedRegion, StepKind, UfwConfig};

fn main() -> ufw::Result<()> {
    let inst = gen_trend_instance(&TrendGenSpec::new(300, 150, 1, 2.0, 3))?;
    let objective = inst.objective()?;
    let region = inst.region()?;
    let cfg = UfwConfig::new(estimate_step_eta(&objective)?)
        .with_tolerances(1e-10, 1e-10)
        .with_max_iters(20_000);
    let res = uafw_solve(&objective, &region, &region.default_start(), &cfg)?;

    println!("{:>6} {:>14} {:>10} {:>10} {:>6}", "k", "f", "G", "H", "|A|");
    let every = (res.trace.len() / 15).max(1);
    for row in res.trace.iter().step_by(every) {
        println!(
            "{:>6} {:>14.8} {:>10.2e} {:>10.2e} {:>6}",
            row.k, row.f_val, row.g_k, row.h_k, row.active_size
        );
    }
    let count = |kind: StepKind| res.trace.iter().filter(|r| r.step_kind == kind).count();
    println!(
        "{} after {} iterations: {} FW, {} away, {} drop steps",
        res.termination_reason,
        res.iterations,
        count(StepKind::FW),
        count(StepKind::Away),
        count(StepKind::Drop)
    );
    Ok(())
}
