//! Centered Gaussian field on 𝕋_R with covariance G_{R,λ}, by spectral
//! synthesis.
//!
//! Layout of the draws for one sample: modes are visited in row-major order.
//! A self-conjugate mode (k ≡ −k mod R) takes one standard normal. For a pair
//! (k, −k) the lower index takes two normals, real then imaginary part, each
//! scaled by 1/√2; the partner gets the conjugate. Each coefficient is then
//! multiplied by 1/√μ_k and the inverse transform divided by √(Rᵈ) gives real
//! site values with covariance exactly G.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{param, Result};
use crate::green::SpectralKernel;
use crate::rng::{substream, Purpose};
use crate::scalar::{pow, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample<T> {
    pub dim: usize,
    pub side: usize,
    pub lambda: T,
    pub values: Vec<T>,
    pub seed: u64,
}

impl<T: Real> FieldSample<T> {
    pub fn at_origin(&self) -> T {
        self.values[0]
    }
}

/// Sample replica 0 for `seed`.
pub fn sample_field<T: Real>(kernel: &SpectralKernel<T>, seed: u64) -> FieldSample<T> {
    let mut rng = substream(seed, Purpose::Field, 0);
    FieldSample {
        dim: kernel.dim(),
        side: kernel.side(),
        lambda: kernel.lambda(),
        values: sample_values(kernel, &mut rng),
        seed,
    }
}

/// Site values of one sample drawn from `rng`.
pub fn sample_values<T: Real, R: Rng + ?Sized>(kernel: &SpectralKernel<T>, rng: &mut R) -> Vec<T> {
    let shape = kernel.shape();
    let n = kernel.len();
    let side = shape.side;
    let mut coeffs = vec![Complex::new(T::zero(), T::zero()); n];
    let half = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let mut digits = vec![0usize; shape.dim];
    for index in 0..n {
        let partner = digits
            .iter()
            .fold(0usize, |acc, &k| acc * side + (side - k) % side);
        if partner == index {
            let z: f64 = rng.sample(StandardNormal);
            coeffs[index] = Complex::new(T::lit(z), T::zero());
        } else if index < partner {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let c = Complex::new(T::lit(re) * half, T::lit(im) * half);
            coeffs[index] = c;
            coeffs[partner] = c.conj();
        }
        for slot in digits.iter_mut().rev() {
            *slot += 1;
            if *slot < side {
                break;
            }
            *slot = 0;
        }
    }
    for (k, c) in coeffs.iter_mut().enumerate() {
        *c = *c * kernel.eigenvalue(k).sqrt().recip();
    }
    kernel.fft().inverse(&mut coeffs);
    let scale = T::from_usize_lossy(n).sqrt().recip();
    coeffs.into_iter().map(|c| c.re * scale).collect()
}

/// (Σ_x |v_x|^p)^{1/p} for p ≥ 1.
pub fn lp_norm<T: Real>(values: &[T], p: T) -> Result<T> {
    if !(p >= T::one()) {
        return param(format!("norm exponent must be at least 1, got {p}"));
    }
    let scale = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return Ok(T::zero());
    }
    let sum: T = values.iter().map(|v| pow(v.abs() / scale, p)).sum();
    Ok(scale * sum.powf(p.recip()))
}

/// E|V|^p for V standard normal.
pub fn normal_abs_moment(p: f64) -> f64 {
    2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// Upper bound 2^{1/q} R^{d/q} G(0,0) E(V^{2q})^{1/q} on the squared median of
/// ‖Z‖_{2q}, from median(X) ≤ 2E(X) for X = Σ Z_x^{2q}.
pub fn median_square_bound<T: Real>(kernel: &SpectralKernel<T>, q: f64) -> f64 {
    let n = kernel.len() as f64;
    let origin = vec![0i64; kernel.dim()];
    let g00 = kernel.green_value(&origin, &origin).to_f64_lossy();
    2f64.powf(1.0 / q) * n.powf(1.0 / q) * g00 * normal_abs_moment(2.0 * q).powf(1.0 / q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailPoint {
    pub level: f64,
    pub value: f64,
}

/// Empirical law of ‖Z‖_p over independent samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormStats {
    pub p: f64,
    pub samples: usize,
    pub median: f64,
    /// Half-width of the ±√n/2 order-statistic band around the median.
    pub median_stderr: f64,
    pub mean: f64,
    pub mean_stderr: f64,
    pub tail: Vec<TailPoint>,
    #[serde(skip)]
    sorted: Vec<f64>,
}

const TAIL_LEVELS: [f64; 6] = [0.5, 0.75, 0.9, 0.95, 0.99, 0.999];

impl NormStats {
    pub fn from_norms(p: f64, mut norms: Vec<f64>) -> Self {
        norms.sort_by(|a, b| a.partial_cmp(b).expect("finite norms"));
        let n = norms.len();
        let median = if n % 2 == 1 {
            norms[n / 2]
        } else {
            0.5 * (norms[n / 2 - 1] + norms[n / 2])
        };
        let half_band = ((n as f64).sqrt() / 2.0).ceil() as usize;
        let lo = norms[(n / 2).saturating_sub(half_band)];
        let hi = norms[(n / 2 + half_band).min(n - 1)];
        let stats: crate::estimate::RunningStats = norms.iter().copied().collect();
        let tail = TAIL_LEVELS
            .iter()
            .map(|&level| TailPoint {
                level,
                value: norms[((level * n as f64) as usize).min(n - 1)],
            })
            .collect();
        Self {
            p,
            samples: n,
            median,
            median_stderr: 0.5 * (hi - lo),
            mean: stats.mean(),
            mean_stderr: stats.stderr(),
            tail,
            sorted: norms,
        }
    }

    /// Empirical quantile by order statistic.
    pub fn quantile(&self, level: f64) -> f64 {
        let n = self.sorted.len();
        self.sorted[((level * n as f64) as usize).min(n - 1)]
    }

    /// Fraction of samples with |‖Z‖ − median| ≥ r.
    pub fn deviation_tail(&self, r: f64) -> f64 {
        let count = self
            .sorted
            .iter()
            .filter(|v| (**v - self.median).abs() >= r)
            .count();
        count as f64 / self.samples as f64
    }
}

/// Smallest sample size accepted by [`norm_statistics`].
pub const MIN_NORM_SAMPLES: usize = 1000;

pub fn norm_statistics<T: Real>(
    kernel: &SpectralKernel<T>,
    p: T,
    n: usize,
    seed: u64,
) -> Result<NormStats> {
    if n < MIN_NORM_SAMPLES {
        return param(format!("need at least {MIN_NORM_SAMPLES} samples, got {n}"));
    }
    if !(p >= T::one()) {
        return param(format!("norm exponent must be at least 1, got {p}"));
    }
    let _ = kernel.fft();
    let norms: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|replica| {
            let mut rng = substream(seed, Purpose::Field, replica);
            let values = sample_values(kernel, &mut rng);
            lp_norm(&values, p).expect("p checked").to_f64_lossy()
        })
        .collect();
    Ok(NormStats::from_norms(p.to_f64_lossy(), norms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::build_kernel;

    #[test]
    fn same_seed_same_sample() {
        let k = build_kernel(3, 4, 1.0_f64).unwrap();
        assert_eq!(sample_field(&k, 5), sample_field(&k, 5));
        assert_ne!(sample_field(&k, 5).values, sample_field(&k, 6).values);
        let s = sample_field(&k, 5);
        assert_eq!(s.values.len(), 64);
        assert!(s.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lp_norm_examples() {
        let ones = vec![1.0_f64; 64];
        assert!((lp_norm(&ones, 6.0).unwrap() - 64f64.powf(1.0 / 6.0)).abs() < 1e-12);
        let mut single = vec![0.0_f64; 10];
        single[3] = -2.5;
        for p in [1.0, 1.5, 2.0, 6.0, 40.0] {
            assert!((lp_norm(&single, p).unwrap() - 2.5).abs() < 1e-12);
        }
        let v = [0.3_f64, -1.2, 2.0, 0.7];
        let dot: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((lp_norm(&v, 2.0).unwrap() - dot).abs() < 1e-12);
        assert!(lp_norm(&v, 0.5).is_err());
    }

    #[test]
    fn abs_moments() {
        assert!((normal_abs_moment(2.0) - 1.0).abs() < 1e-12);
        assert!((normal_abs_moment(4.0) - 3.0).abs() < 1e-12);
        assert!((normal_abs_moment(6.0) - 15.0).abs() < 1e-10);
    }

    #[test]
    fn median_within_central_band() {
        let k = build_kernel(2, 4, 1.0_f64).unwrap();
        let stats = norm_statistics(&k, 4.0, 2000, 1).unwrap();
        assert!(stats.median >= stats.quantile(0.4) && stats.median <= stats.quantile(0.6));
        assert!(norm_statistics(&k, 4.0, 10, 1).is_err());
    }
}
