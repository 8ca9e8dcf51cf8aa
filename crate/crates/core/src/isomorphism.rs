//! Monte Carlo and closed-form checks of the local-time isomorphism
//!
//!   E[F(l_τ + (Z + s)²/2)] = E[F((Z + s)²/2)(1 + Z₀/s)]
//!
//! where l_τ is the local time of the walk on 𝕋_R killed at rate λ and Z is
//! the centered Gaussian field with covariance G_{R,λ}, independent of it.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Result};
use crate::estimate::MCEstimate;
use crate::field::sample_values;
use crate::green::SpectralKernel;
use crate::rng::{substream, Purpose};
use crate::scalar::Real;
use crate::walk::{simulate_with_rng, WalkConfig};

/// Functional of a nonnegative torus field.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunctional<T> {
    /// F ≡ c.
    Constant(T),
    /// F(S) = Σ a_x S_x; unbounded, so only the closed-form check accepts it.
    Linear(Vec<T>),
    /// F(S) = exp(−Σ a_x S_x) with a_x ≥ 0, bounded by 1.
    Exponential(Vec<T>),
}

impl<T: Real> TestFunctional<T> {
    pub fn exponential(weights: Vec<T>) -> Result<Self> {
        check_weights(&weights)?;
        Ok(Self::Exponential(weights))
    }

    pub fn linear(weights: Vec<T>) -> Result<Self> {
        check_weights(&weights)?;
        Ok(Self::Linear(weights))
    }

    /// Exponential functional with the same weight on every site.
    pub fn uniform_exponential(sites: usize, weight: T) -> Result<Self> {
        Self::exponential(vec![weight; sites])
    }

    pub fn evaluate(&self, field: &[T]) -> T {
        match self {
            Self::Constant(c) => *c,
            Self::Linear(a) => dot(a, field),
            Self::Exponential(a) => (-dot(a, field)).exp(),
        }
    }

    fn check_len(&self, sites: usize) -> Result<()> {
        match self {
            Self::Linear(a) | Self::Exponential(a) if a.len() != sites => param(format!(
                "functional has {} weights for {sites} torus sites",
                a.len()
            )),
            _ => Ok(()),
        }
    }
}

fn check_weights<T: Real>(weights: &[T]) -> Result<()> {
    if weights.iter().any(|a| !(*a >= T::zero()) || !a.is_finite()) {
        return param("functional weights must be finite and nonnegative");
    }
    Ok(())
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Smallest replica count accepted by the estimators.
pub const MIN_REPLICAS: usize = 1000;

/// One (d, R, λ, s) setting of the identity.
#[derive(Debug, Clone)]
pub struct IsoExperiment<T: Real> {
    pub kernel: SpectralKernel<T>,
    pub shift: T,
    pub replicas: usize,
    pub seed: u64,
    /// Reuse the left-hand field draws on the right-hand side (common random
    /// numbers). Off by default so the two estimates are independent.
    pub paired: bool,
}

impl<T: Real> IsoExperiment<T> {
    pub fn new(dim: usize, side: usize, lambda: T, shift: T, replicas: usize, seed: u64) -> Result<Self> {
        if shift == T::zero() || !shift.is_finite() {
            return param("the shift s must be nonzero and finite");
        }
        if replicas < MIN_REPLICAS {
            return param(format!("need at least {MIN_REPLICAS} replicas, got {replicas}"));
        }
        Ok(Self {
            kernel: SpectralKernel::new(dim, side, lambda)?,
            shift,
            replicas,
            seed,
            paired: false,
        })
    }

    pub fn paired(mut self, paired: bool) -> Self {
        self.paired = paired;
        self
    }

    fn estimate(&self, values: Vec<f64>, side: &str) -> MCEstimate {
        MCEstimate::from_values(&values, self.seed)
            .with_param("d", self.kernel.dim() as f64)
            .with_param("R", self.kernel.side() as f64)
            .with_param("lambda", self.kernel.lambda().to_f64_lossy())
            .with_param("s", self.shift.to_f64_lossy())
            .with_param(side, 1.0)
    }

    /// Mean of F(S) with S_x = l_τ(x) + (Z_x + s)²/2.
    pub fn lhs(&self, functional: &TestFunctional<T>) -> Result<MCEstimate> {
        if let TestFunctional::Linear(_) = functional {
            return param("linear functionals are unbounded; use analytic_linear_check");
        }
        functional.check_len(self.kernel.len())?;
        let walk = WalkConfig {
            dim: self.kernel.dim(),
            horizon: T::infinity(),
            torus: Some(self.kernel.side()),
            stop_rate: Some(self.kernel.lambda()),
            seed: self.seed,
        };
        walk.validate()?;
        let half = T::lit(0.5);
        let s = self.shift;
        let values: Vec<f64> = (0..self.replicas as u64)
            .into_par_iter()
            .map(|replica| {
                let mut walk_rng = substream(self.seed, Purpose::IsoLhsWalk, replica);
                let local = simulate_with_rng(&walk, &mut walk_rng).expect("validated config");
                let occupation = local.dense_values().expect("small torus");
                let mut field_rng = substream(self.seed, Purpose::IsoLhsField, replica);
                let z = sample_values(&self.kernel, &mut field_rng);
                let shifted: Vec<T> = occupation
                    .iter()
                    .zip(&z)
                    .map(|(l, zx)| *l + half * (*zx + s) * (*zx + s))
                    .collect();
                functional.evaluate(&shifted).to_f64_lossy()
            })
            .collect();
        Ok(self.estimate(values, "lhs"))
    }

    /// Mean of F((Z + s)²/2)·(1 + Z₀/s). The weight is signed, so single
    /// terms can be negative.
    pub fn rhs(&self, functional: &TestFunctional<T>) -> Result<MCEstimate> {
        if let TestFunctional::Linear(_) = functional {
            return param("linear functionals are unbounded; use analytic_linear_check");
        }
        functional.check_len(self.kernel.len())?;
        let purpose = if self.paired {
            Purpose::IsoLhsField
        } else {
            Purpose::IsoRhsField
        };
        let half = T::lit(0.5);
        let s = self.shift;
        let values: Vec<f64> = (0..self.replicas as u64)
            .into_par_iter()
            .map(|replica| {
                let mut rng = substream(self.seed, purpose, replica);
                let z = sample_values(&self.kernel, &mut rng);
                let squared: Vec<T> = z.iter().map(|zx| half * (*zx + s) * (*zx + s)).collect();
                (functional.evaluate(&squared) * (T::one() + z[0] / s)).to_f64_lossy()
            })
            .collect();
        Ok(self.estimate(values, "rhs"))
    }
}

pub fn lhs_estimate<T: Real>(
    functional: &TestFunctional<T>,
    dim: usize,
    side: usize,
    lambda: T,
    shift: T,
    replicas: usize,
    seed: u64,
) -> Result<MCEstimate> {
    IsoExperiment::new(dim, side, lambda, shift, replicas, seed)?.lhs(functional)
}

pub fn rhs_estimate<T: Real>(
    functional: &TestFunctional<T>,
    dim: usize,
    side: usize,
    lambda: T,
    shift: T,
    replicas: usize,
    seed: u64,
) -> Result<MCEstimate> {
    IsoExperiment::new(dim, side, lambda, shift, replicas, seed)?.rhs(functional)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearCheck<T> {
    pub lhs_closed: T,
    pub rhs_closed: T,
    pub gap: T,
}

/// Both sides of the identity for F(S) = Σ a_x S_x in closed form:
/// lhs = Σ a_x [G(0,x) + (G(x,x) + s²)/2] using E₀[l_τ(x)] = G(0,x), and
/// rhs = Σ a_x [(G(x,x) + s²)/2 + G(x,0)] using E[Z_x² Z₀] = 0.
///
/// The two sides read G from different routes (mode sum and FFT column).
pub fn analytic_linear_check<T: Real>(
    dim: usize,
    side: usize,
    lambda: T,
    shift: T,
    weights: &[T],
) -> Result<LinearCheck<T>> {
    if shift == T::zero() {
        return param("the shift s must be nonzero");
    }
    let kernel = SpectralKernel::new(dim, side, lambda)?;
    check_weights(weights)?;
    if weights.len() != kernel.len() {
        return param(format!(
            "{} weights for {} torus sites",
            weights.len(),
            kernel.len()
        ));
    }
    let shape = kernel.shape();
    let origin = vec![0i64; dim];
    let s2 = shift * shift;
    let half = T::lit(0.5);
    let g_diag = kernel.green_value(&origin, &origin);
    let mut unit = vec![T::zero(); kernel.len()];
    unit[0] = T::one();
    let column = kernel.apply_green(&unit);
    let mut lhs = T::zero();
    let mut rhs = T::zero();
    for (i, a) in weights.iter().enumerate() {
        if *a == T::zero() {
            continue;
        }
        let x = shape.site(i);
        let g0x = kernel.green_value(&origin, &x);
        let gxx = kernel.green_value(&x, &x);
        lhs = lhs + *a * (g0x + half * (gxx + s2));
        rhs = rhs + *a * (half * (g_diag + s2) + column[i]);
    }
    Ok(LinearCheck {
        lhs_closed: lhs,
        rhs_closed: rhs,
        gap: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_functional_is_exact_on_the_left() {
        let e = lhs_estimate(&TestFunctional::Constant(1.0_f64), 3, 2, 1.0, 1.0, 1000, 3).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.stderr, 0.0);
        let zero = TestFunctional::uniform_exponential(8, 0.0_f64).unwrap();
        let e = lhs_estimate(&zero, 3, 2, 1.0, 1.0, 1000, 3).unwrap();
        assert_eq!(e.mean, 1.0);
    }

    #[test]
    fn rhs_of_constant_is_centered() {
        let e = rhs_estimate(&TestFunctional::Constant(1.0_f64), 3, 2, 1.0, 1.0, 20_000, 8).unwrap();
        assert!((e.mean - 1.0).abs() <= 4.0 * e.stderr);
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = TestFunctional::Constant(1.0_f64);
        assert!(lhs_estimate(&f, 3, 2, 1.0, 0.0, 1000, 1).is_err());
        assert!(rhs_estimate(&f, 3, 2, 1.0, 0.0, 1000, 1).is_err());
        assert!(lhs_estimate(&f, 3, 2, 1.0, 1.0, 10, 1).is_err());
        let lin = TestFunctional::linear(vec![1.0_f64; 8]).unwrap();
        assert!(lhs_estimate(&lin, 3, 2, 1.0, 1.0, 1000, 1).is_err());
        let wrong = TestFunctional::uniform_exponential(5, 0.1_f64).unwrap();
        assert!(rhs_estimate(&wrong, 3, 2, 1.0, 1.0, 1000, 1).is_err());
        assert!(TestFunctional::exponential(vec![-0.1_f64]).is_err());
        assert!(analytic_linear_check(3, 2, 1.0_f64, 0.0, &[0.0; 8]).is_err());
    }

    #[test]
    fn linear_check_special_cases() {
        let zero = analytic_linear_check(3, 4, 1.0_f64, 2.0, &vec![0.0; 64]).unwrap();
        assert_eq!(zero.lhs_closed, 0.0);
        assert_eq!(zero.rhs_closed, 0.0);

        let mut a = vec![0.0; 64];
        a[0] = 1.0;
        let one = analytic_linear_check(3, 4, 1.0_f64, 2.0, &a).unwrap();
        let g = SpectralKernel::new(3, 4, 1.0_f64).unwrap().green_value(&[0, 0, 0], &[0, 0, 0]);
        let expected = g + (g + 4.0) / 2.0;
        assert!((one.lhs_closed - expected).abs() < 1e-12);
        assert!((one.rhs_closed - expected).abs() < 1e-12);
    }

    #[test]
    fn paired_rhs_reuses_lhs_field_stream() {
        let f = TestFunctional::uniform_exponential(8, 0.1_f64).unwrap();
        let a = IsoExperiment::new(3, 2, 1.0, 1.0, 1000, 5).unwrap();
        let b = a.clone().paired(true);
        assert_ne!(a.rhs(&f).unwrap().mean, b.rhs(&f).unwrap().mean);
    }
}
