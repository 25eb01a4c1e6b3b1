//! Seeded synthetic instances for the two built-in problem families.
//!
//! Every draw comes from [`SplitMix64`], so an instance is a pure function of
//! its spec. Draw order is part of the format: changing it changes every
//! instance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::nucnorm::{nuclear_norm, GenNucNormRegion};
use crate::objective::{LeastSquaresObjective, MaskedFrobeniusObjective};
use crate::rng::SplitMix64;
use crate::trendfilter::{apply_d, TrendFilterRegion};

/// Piecewise-signal regression, `min ‖b − Ax‖² s.t. ‖D^(r) x‖₁ ≤ δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendGenSpec {
    /// Number of observations (rows of `A`).
    #[serde(rename = "N")]
    pub big_n: usize,
    /// Signal length.
    pub n: usize,
    /// 1 (piecewise constant) or 2 (piecewise linear).
    pub r: usize,
    /// `‖Ax*‖² / (n σ²)`; `+inf` gives noiseless data.
    #[serde(with = "f64_or_inf")]
    pub snr: f64,
    pub pieces: usize,
    pub seed: u64,
}

impl TrendGenSpec {
    pub fn new(big_n: usize, n: usize, r: usize, snr: f64, seed: u64) -> Self {
        Self {
            big_n,
            n,
            r,
            snr,
            pieces: 5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r == 1 || self.r == 2) {
            return Err(Error::invalid(format!("trend order must be 1 or 2, got {}", self.r)));
        }
        if self.pieces < 2 {
            return Err(Error::invalid("need at least two pieces"));
        }
        if self.big_n < self.pieces || self.n < self.pieces {
            return Err(Error::invalid(format!(
                "N and n must be at least the number of pieces ({})",
                self.pieces
            )));
        }
        if self.n <= self.r + 1 {
            return Err(Error::invalid("signal too short for the requested order"));
        }
        if !(self.snr > 0.0) {
            return Err(Error::invalid(format!("snr must be positive, got {}", self.snr)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrendInstance {
    pub spec: TrendGenSpec,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub x_star: Vec<f64>,
    pub delta: f64,
}

impl TrendInstance {
    pub fn objective(&self) -> Result<LeastSquaresObjective> {
        LeastSquaresObjective::new(self.a.clone(), self.b.clone())
    }

    pub fn region(&self) -> Result<TrendFilterRegion> {
        TrendFilterRegion::new(self.spec.n, self.spec.r, self.delta)
    }
}

/// Draw `A`, `x*` and `b`.
///
/// `A` is filled column-major with standard normals. Piece `p` covers indices
/// `[p·n/pieces, (p+1)·n/pieces)`. For `r = 1` each piece takes a uniform
/// value in `[−½, ½]`; for `r = 2` each piece takes a uniform slope and the
/// signal starts at 0 and is continuous. `x*` is then scaled so that
/// `‖D^(r) x*‖₁ = 1`, and `δ = 1`.
pub fn gen_trend_instance(spec: &TrendGenSpec) -> Result<TrendInstance> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let (big_n, n) = (spec.big_n, spec.n);

    let a = DMatrix::from_vec(big_n, n, rng.normal_vec(big_n * n));

    let mut x_star = loop {
        let levels: Vec<f64> = (0..spec.pieces).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let piece = |i: usize| i * spec.pieces / n;
        let x: Vec<f64> = match spec.r {
            1 => (0..n).map(|i| levels[piece(i)]).collect(),
            _ => {
                let mut x = vec![0.0; n];
                for i in 1..n {
                    x[i] = x[i - 1] + levels[piece(i)];
                }
                x
            }
        };
        let tv: f64 = apply_d(spec.r, &x)?.iter().map(|v| v.abs()).sum();
        // Redraw in the measure-zero case of equal neighbouring pieces.
        if tv > 0.0 {
            break x.into_iter().map(|v| v / tv).collect::<Vec<_>>();
        }
    };
    // One more pass so the rounding in the division does not leave
    // ‖D x*‖₁ off by more than an ulp or two.
    let tv: f64 = apply_d(spec.r, &x_star)?.iter().map(|v| v.abs()).sum();
    x_star.iter_mut().for_each(|v| *v /= tv);

    let signal = &a * DVector::from_column_slice(&x_star);
    let b = if spec.snr.is_infinite() {
        signal
    } else {
        let sigma = (signal.norm_squared() / (n as f64 * spec.snr)).sqrt();
        let noise = DVector::from_vec(rng.normal_vec(big_n));
        signal + noise * sigma
    };

    Ok(TrendInstance {
        spec: spec.clone(),
        a,
        b,
        x_star,
        delta: 1.0,
    })
}

/// Matrix completion with column-space side information,
/// `min ‖P_Ω(X − B)‖²_F s.t. ‖(I − P₁P₁ᵀ) X‖* ≤ δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixGenSpec {
    pub m: usize,
    pub n: usize,
    /// Rank of the component outside the side information.
    pub r: usize,
    /// Side-information rank.
    pub r1: usize,
    #[serde(with = "f64_or_inf")]
    pub snr: f64,
    /// Fraction of observed entries.
    pub nnzr: f64,
    /// `δ` relative to the nuclear norm of the projected low-rank part.
    pub delta_rel: f64,
    pub seed: u64,
}

impl MatrixGenSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.m.min(self.n);
        if self.m == 0 || self.n == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if self.r == 0 || self.r > k || self.r1 > k {
            return Err(Error::invalid(format!(
                "ranks must satisfy 1 <= r <= min(m, n) and r1 <= min(m, n), got r={} r1={}",
                self.r, self.r1
            )));
        }
        if self.r1 >= self.m {
            return Err(Error::invalid("side information must leave a nonzero complement"));
        }
        if !(self.nnzr > 0.0 && self.nnzr <= 1.0) {
            return Err(Error::invalid(format!("nnzr must lie in (0, 1], got {}", self.nnzr)));
        }
        if !(self.snr > 0.0) {
            return Err(Error::invalid(format!("snr must be positive, got {}", self.snr)));
        }
        if !(self.delta_rel > 0.0 && self.delta_rel.is_finite()) {
            return Err(Error::invalid("delta_rel must be positive"));
        }
        Ok(())
    }

    /// `⌈nnzr·mn⌉`, guarded against products like `0.7·10 = 7.000000000000001`.
    pub fn observed_count(&self) -> usize {
        let total = (self.m * self.n) as f64;
        let want = self.nnzr * total;
        ((want - 1e-9 * want).ceil() as usize).clamp(1, self.m * self.n)
    }
}

#[derive(Clone, Debug)]
pub struct MatrixInstance {
    pub spec: MatrixGenSpec,
    /// Observed coordinates, distinct and sorted row-major.
    pub omega: Vec<(usize, usize)>,
    /// `B` at each coordinate of `omega`.
    pub observed: Vec<f64>,
    /// `m × r1`, orthonormal columns.
    pub p1: DMatrix<f64>,
    pub delta: f64,
    /// The noiseless signal `P₁Zᵀ + UVᵀ`.
    pub ground_truth: DMatrix<f64>,
}

impl MatrixInstance {
    pub fn objective(&self) -> Result<MaskedFrobeniusObjective> {
        MaskedFrobeniusObjective::new(self.spec.m, self.spec.n, self.omega.clone(), self.observed.clone())
    }

    pub fn region(&self) -> Result<GenNucNormRegion> {
        GenNucNormRegion::with_column_side_information(self.p1.clone(), self.spec.n, self.delta)
    }
}

/// Draw `B = P₁Zᵀ + UVᵀ + E` and the observation pattern.
///
/// Draw order: `U` (m×r), `V` (n×r), `Z` (n×r1), the Gaussian matrix whose
/// thin-QR factor is `P₁`, `E`, then `Ω` by a partial Fisher–Yates shuffle of
/// the row-major coordinate list. `σ²` is the empirical variance of the
/// signal entries divided by the SNR.
pub fn gen_matrix_instance(spec: &MatrixGenSpec) -> Result<MatrixInstance> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let (m, n, r, r1) = (spec.m, spec.n, spec.r, spec.r1);

    let u = DMatrix::from_vec(m, r, rng.normal_vec(m * r));
    let v = DMatrix::from_vec(n, r, rng.normal_vec(n * r));
    let z = DMatrix::from_vec(n, r1, rng.normal_vec(n * r1));
    let g = DMatrix::from_vec(m, r1, rng.normal_vec(m * r1));
    let p1 = if r1 == 0 {
        DMatrix::zeros(m, 0)
    } else {
        g.qr().q()
    };

    let uv = &u * v.transpose();
    let signal = &p1 * z.transpose() + &uv;
    let mean = signal.mean();
    let var = signal.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m * n) as f64;
    let noisy = if spec.snr.is_infinite() {
        signal.clone()
    } else {
        let sigma = (var / spec.snr).sqrt();
        &signal + DMatrix::from_vec(m, n, rng.normal_vec(m * n)) * sigma
    };

    let total = m * n;
    let count = spec.observed_count();
    let mut coords: Vec<usize> = (0..total).collect();
    for i in 0..count {
        let j = i + rng.below((total - i) as u64) as usize;
        coords.swap(i, j);
    }
    let mut picked = coords[..count].to_vec();
    picked.sort_unstable();
    let omega: Vec<(usize, usize)> = picked.iter().map(|&k| (k / n, k % n)).collect();
    let observed = omega.iter().map(|&(i, j)| noisy[(i, j)]).collect();

    let projected = &uv - &p1 * p1.tr_mul(&uv);
    let delta = spec.delta_rel * nuclear_norm(&projected);

    Ok(MatrixInstance {
        spec: spec.clone(),
        omega,
        observed,
        p1,
        delta,
        ground_truth: signal,
    })
}

/// Empirical SNR of a trend instance against its noise-free response.
pub fn empirical_trend_snr(inst: &TrendInstance) -> f64 {
    let signal = &inst.a * DVector::from_column_slice(&inst.x_star);
    let noise: Vec<f64> = inst.b.iter().zip(signal.iter()).map(|(b, s)| b - s).collect();
    let len = noise.len() as f64;
    let mean = noise.iter().sum::<f64>() / len;
    let var = noise.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (len - 1.0);
    dot(signal.as_slice(), signal.as_slice()) / (inst.spec.n as f64 * var)
}

/// Serialize non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`,
/// which plain JSON numbers cannot represent.
pub(crate) mod f64_or_inf {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse::<f64>().map_err(de::Error::custom),
        }
    }
}
