//! Generate both instance families, save them, and reload them. Files are
//! self-describing JSON with base64 payloads and reproduce bit for bit.
//!
//! ```text
//! cargo run --release --example synthetic_instances
//! ```

use ufw::io::Instance;
use ufw::synth::{empirical_trend_snr, gen_matrix_instance, gen_trend_instance, MatrixGenSpec, TrendGenSpec};

fn main() -> ufw::Result<()> {
    let dir = std::env::temp_dir().join("ufw-synthetic-example");
    std::fs::create_dir_all(&dir)?;

    let trend = gen_trend_instance(&TrendGenSpec::new(1000, 500, 1, 1.0, 7))?;
    println!("trend: empirical snr {:.3} (requested 1)", empirical_trend_snr(&trend));
    let matrix = gen_matrix_instance(&MatrixGenSpec {
        m: 200,
        n: 200,
        r: 5,
        r1: 5,
        snr: 5.0,
        nnzr: 0.3,
        delta_rel: 0.5,
        seed: 7,
    })?;
    println!("matrix: {} observed entries, δ = {:.3}", matrix.omega.len(), matrix.delta);

    for inst in [Instance::Trend(trend), Instance::Matrix(matrix)] {
        let path = dir.join(format!("{}.json", inst.problem()));
        inst.write(&path)?;
        let back = Instance::read(&path)?;
        let same = back.to_json_string()? == std::fs::read_to_string(&path)?;
        println!(
            "{} ({}): {} bytes, sha256 {}…, byte-identical reload: {same}",
            inst.problem(),
            inst.sizes(),
            std::fs::metadata(&path)?.len(),
            &inst.content_hash()?[..12]
        );
    }
    Ok(())
}
