//! The nuclear-norm oracle only needs the leading singular pair. Compare the
//! restarted Lanczos default with plain power iteration on a random sparse
//! operator, whose leading singular values are tightly clustered.
//!
//! ```text
//! cargo run --release --example singular_pair
//! ```

use ufw::nucnorm::SparseMatrix;
use ufw::rng::SplitMix64;
use ufw::{leading_singular_pair, PairOptions};

fn main() -> ufw::Result<()> {
    let (rows, cols) = (2000, 1500);
    let mut rng = SplitMix64::new(9);
    let entries: Vec<(usize, usize, f64)> = (0..20_000)
        .map(|_| (rng.below(rows as u64) as usize, rng.below(cols as u64) as usize, rng.normal()))
        .collect();
    let op = SparseMatrix::new(rows, cols, entries);

    for (name, opts) in [
        ("lanczos", PairOptions::default().with_max_iters(20_000)),
        ("power", PairOptions::power().with_max_iters(20_000)),
    ] {
        let start = std::time::Instant::now();
        match leading_singular_pair(&op, &opts, None) {
            Ok(p) => println!("{name:>8}: σ₁ = {:.8} in {:.1} ms", p.sigma1, start.elapsed().as_secs_f64() * 1e3),
            Err(e) => println!("{name:>8}: {e}"),
        }
    }
    Ok(())
}
