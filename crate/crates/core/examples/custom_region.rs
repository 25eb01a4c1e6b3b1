//! A region defined outside the crate: a lasso whose first `k` coefficients
//! are unpenalized. `T` is spanned by those coordinates and `S` is the ℓ1
//! ball on the rest. The vertices carry discrete keys, so away steps work.
//!
//! ```text
//! cargo run --release --example custom_region
//! ```

use nalgebra::{DMatrix, DVector};
use ufw::region::VertexKey;
use ufw::rng::SplitMix64;
use ufw::{
    estimate_step_eta, uafw_solve, ufw_solve, DecomposedRegion, LeastSquaresObjective, UfwConfig, VertexHandle,
};

struct FreeHeadLasso {
    dim: usize,
    free: usize,
    delta: f64,
}

impl FreeHeadLasso {
    fn vertex(&self, i: usize, sign: i64) -> VertexHandle {
        let mut point = vec![0.0; self.dim];
        point[i] = -(sign as f64) * self.delta;
        VertexHandle {
            key: VertexKey::Discrete(vec![i as i64, sign]),
            point,
        }
    }
}

impl DecomposedRegion for FreeHeadLasso {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn subspace_dim(&self) -> usize {
        self.free
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn project_t(&self, x: &[f64]) -> ufw::Result<Vec<f64>> {
        let mut t = x.to_vec();
        t[self.free..].iter_mut().for_each(|v| *v = 0.0);
        Ok(t)
    }

    fn lmo(&self, c: &[f64]) -> ufw::Result<VertexHandle> {
        let (i, ci) = c[self.free..]
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |best, (i, v)| if v.abs() > best.1.abs() { (i, *v) } else { best });
        Ok(self.vertex(self.free + i, if ci >= 0.0 { 1 } else { -1 }))
    }

    fn is_polyhedral(&self) -> bool {
        true
    }

    fn identify_vertex(&self, p: &[f64]) -> Option<VertexHandle> {
        let nz: Vec<usize> = (0..p.len()).filter(|&i| p[i] != 0.0).collect();
        match nz.as_slice() {
            [i] if *i >= self.free && (p[*i].abs() - self.delta).abs() <= 1e-12 * self.delta => {
                Some(self.vertex(*i, if p[*i] < 0.0 { 1 } else { -1 }))
            }
            _ => None,
        }
    }

    fn default_start(&self) -> Vec<f64> {
        self.vertex(self.free, 1).point
    }
}

fn main() -> ufw::Result<()> {
    let (rows, dim, free) = (120, 40, 3);
    let mut rng = SplitMix64::new(5);
    let a = DMatrix::from_vec(rows, dim, rng.normal_vec(rows * dim));
    let mut truth = vec![0.0; dim];
    truth[..free].copy_from_slice(&[4.0, -3.0, 2.5]);
    truth[10] = 0.6;
    truth[25] = -0.4;
    let noise = DVector::from_vec(rng.normal_vec(rows)) * 0.1;
    let b = &a * DVector::from_column_slice(&truth) + noise;

    let objective = LeastSquaresObjective::new(a, b)?;
    let region = FreeHeadLasso { dim, free, delta: 1.0 };
    let cfg = UfwConfig::new(estimate_step_eta(&objective)?)
        .with_tolerances(1e-8, 1e-8)
        .with_max_iters(20_000);

    let plain = ufw_solve(&objective, &region, &region.default_start(), &cfg)?;
    let away = uafw_solve(&objective, &region, &region.default_start(), &cfg)?;
    println!("uFW : {:>6} iterations, f = {:.8}", plain.iterations, plain.best_f);
    println!("uAFW: {:>6} iterations, f = {:.8}", away.iterations, away.best_f);
    let head: Vec<String> = away.x_final[..free].iter().map(|v| format!("{v:.3}")).collect();
    let support: Vec<usize> = (free..dim).filter(|&i| away.x_final[i].abs() > 1e-6).collect();
    println!("free head [{}], penalized support {support:?}", head.join(", "));
    Ok(())
}
