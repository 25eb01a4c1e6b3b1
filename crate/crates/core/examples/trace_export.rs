//! Write a convergence trace as CSV and JSON and read it back, ready for
//! plotting elsewhere.
//!
//! ```text
//! cargo run --release --example trace_export
//! ```

use ufw::io::{TraceFile, TraceFooter, TraceFormat};
use ufw::synth::{gen_trend_instance, TrendGenSpec};
use ufw::{estimate_step_eta, ufw_solve, DecomposedRegion, StepRule, UfwConfig};

fn main() -> ufw::Result<()> {
    let inst = gen_trend_instance(&TrendGenSpec::new(200, 100, 2, 1.0, 1))?;
    let objective = inst.objective()?;
    let region = inst.region()?;
    let cfg = UfwConfig::new(estimate_step_eta(&objective)?).with_step_rule(StepRule::LineSearch);
    let start = std::time::Instant::now();
    let res = ufw_solve(&objective, &region, &region.default_start(), &cfg)?;

    let trace = TraceFile {
        rows: res.trace.clone(),
        footer: TraceFooter {
            config: serde_json::to_value(&cfg).expect("config serializes"),
            seed: Some(inst.spec.seed),
            termination_reason: res.termination_reason.to_string(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    };
    let dir = std::env::temp_dir();
    for (format, name) in [(TraceFormat::Csv, "trace.csv"), (TraceFormat::Json, "trace.json")] {
        let path = dir.join(name);
        trace.write(&path, format)?;
        let back = TraceFile::read(&path)?;
        assert_eq!(back.rows, trace.rows);
        println!("{} rows -> {}", back.rows.len(), path.display());
    }

    let best = trace.best_f();
    println!("best f after 1, 10, 100 steps and at the end: {:.6} {:.6} {:.6} {:.6}",
        best[1.min(best.len() - 1)],
        best[10.min(best.len() - 1)],
        best[100.min(best.len() - 1)],
        best[best.len() - 1]
    );
    Ok(())
}
