//! Spectral form of the killed Green kernel G = (λ − Δ)⁻¹ on 𝕋_R, the torus
//! heat kernel at the origin, and the infinite-lattice Green value G_d(0,0).
//!
//! The Fourier modes k ∈ {0,…,R−1}ᵈ diagonalise −Δ with eigenvalues
//! ν_k = Σ_j 2(1 − cos(2πk_j/R)), so G has eigenvalues 1/μ_k with μ_k = λ + ν_k.

use std::sync::OnceLock;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::fft::TorusFft;
use crate::lattice::TorusShape;
use crate::scalar::{Accumulator, Real};

/// Kernels are rejected below this mass; (λ − Δ) is too ill-conditioned there
/// for double precision.
pub const MIN_LAMBDA: f64 = 1e-12;

pub struct SpectralKernel<T: Real> {
    shape: TorusShape,
    lambda: T,
    axis_nu: Vec<T>,
    cos_table: Vec<T>,
    eigenvalues: Option<Vec<T>>,
    fft: OnceLock<TorusFft<T>>,
}

impl<T: Real> std::fmt::Debug for SpectralKernel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralKernel")
            .field("dim", &self.shape.dim)
            .field("side", &self.shape.side)
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl<T: Real> Clone for SpectralKernel<T> {
    fn clone(&self) -> Self {
        Self {
            shape: self.shape,
            lambda: self.lambda,
            axis_nu: self.axis_nu.clone(),
            cos_table: self.cos_table.clone(),
            eigenvalues: self.eigenvalues.clone(),
            fft: OnceLock::new(),
        }
    }
}

/// Eigenvalues of −Δ on the one-dimensional cycle of length `side`.
pub fn cycle_eigenvalues<T: Real>(side: usize) -> Vec<T> {
    (0..side)
        .map(|k| {
            let angle = T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(side);
            T::lit(2.0) * (T::one() - angle.cos())
        })
        .collect()
}

pub fn build_kernel<T: Real>(dim: usize, side: usize, lambda: T) -> Result<SpectralKernel<T>> {
    SpectralKernel::new(dim, side, lambda)
}

impl<T: Real> SpectralKernel<T> {
    pub fn new(dim: usize, side: usize, lambda: T) -> Result<Self> {
        if dim < 1 {
            return param("dimension must be at least 1");
        }
        if side < 1 {
            return param("torus side must be at least 1");
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return param(format!(
                "killing rate must be positive and finite (the torus Laplacian is singular), got {lambda}"
            ));
        }
        if lambda < T::lit(MIN_LAMBDA) {
            return param(format!(
                "killing rate {lambda} is below the conditioning guard {MIN_LAMBDA:e}"
            ));
        }
        let shape = TorusShape::new(dim, side);
        if shape.checked_len().is_none() {
            return param("torus size overflows");
        }
        let axis_nu = cycle_eigenvalues(side);
        let cos_table = (0..side)
            .map(|m| (T::TAU() * T::from_usize_lossy(m) / T::from_usize_lossy(side)).cos())
            .collect();
        let mut kernel = Self {
            shape,
            lambda,
            axis_nu,
            cos_table,
            eigenvalues: None,
            fft: OnceLock::new(),
        };
        if shape.is_dense() {
            kernel.eigenvalues = Some((0..shape.len()).map(|i| kernel.mode_eigenvalue(i)).collect());
        }
        Ok(kernel)
    }

    pub fn dim(&self) -> usize {
        self.shape.dim
    }

    pub fn side(&self) -> usize {
        self.shape.side
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn shape(&self) -> TorusShape {
        self.shape
    }

    /// Number of torus sites (and of Fourier modes).
    pub fn len(&self) -> usize {
        self.shape.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn mode_eigenvalue(&self, mut index: usize) -> T {
        let mut mu = self.lambda;
        for _ in 0..self.shape.dim {
            mu = mu + self.axis_nu[index % self.shape.side];
            index /= self.shape.side;
        }
        mu
    }

    /// μ_k for the mode with flat index `index`.
    pub fn eigenvalue(&self, index: usize) -> T {
        match &self.eigenvalues {
            Some(table) => table[index],
            None => self.mode_eigenvalue(index),
        }
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        match &self.eigenvalues {
            Some(table) => table.clone(),
            None => (0..self.len()).map(|i| self.mode_eigenvalue(i)).collect(),
        }
    }

    /// G_{R,λ}(x, y); sites are reduced mod R.
    pub fn green_value(&self, x: &[i64], y: &[i64]) -> T {
        let side = self.shape.side;
        let dim = self.shape.dim;
        let r = side as i64;
        let delta: Vec<usize> = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).rem_euclid(r) as usize)
            .collect();
        let mut digits = vec![0usize; dim];
        let mut acc = Accumulator::default();
        for index in 0..self.len() {
            let phase = digits
                .iter()
                .zip(&delta)
                .fold(0usize, |p, (k, d)| (p + k * d) % side);
            acc.add(self.cos_table[phase] / self.eigenvalue(index));
            for slot in digits.iter_mut().rev() {
                *slot += 1;
                if *slot < side {
                    break;
                }
                *slot = 0;
            }
        }
        acc.value() / T::from_usize_lossy(self.len())
    }

    pub(crate) fn fft(&self) -> &TorusFft<T> {
        self.fft.get_or_init(|| TorusFft::new(self.shape))
    }

    /// Multiply by the spectral symbol `weights[k]` in Fourier space.
    pub(crate) fn apply_symbol(&self, h: &[T], symbol: impl Fn(usize) -> T) -> Vec<T> {
        assert_eq!(h.len(), self.len(), "vector length must equal Rᵈ");
        let mut data: Vec<Complex<T>> = h.iter().map(|v| Complex::new(*v, T::zero())).collect();
        let fft = self.fft();
        fft.forward(&mut data);
        for (k, v) in data.iter_mut().enumerate() {
            *v = *v * symbol(k);
        }
        fft.inverse(&mut data);
        let n = T::from_usize_lossy(self.len());
        data.into_iter().map(|c| c.re / n).collect()
    }

    /// G h, computed spectrally.
    pub fn apply_green(&self, h: &[T]) -> Vec<T> {
        self.apply_symbol(h, |k| self.eigenvalue(k).recip())
    }

    /// (λ − Δ) f, computed with the nearest-neighbour stencil.
    pub fn apply_operator(&self, f: &[T]) -> Vec<T> {
        apply_torus_operator(self.shape, self.lambda, f)
    }

    /// ⟨h, G h⟩.
    pub fn quadratic_form(&self, h: &[T]) -> T {
        let g = self.apply_green(h);
        h.iter().zip(&g).map(|(a, b)| *a * *b).sum()
    }
}

/// (λ − Δ) f on the torus; neighbours are counted with multiplicity, so R = 1
/// gives λf and R = 2 doubles each neighbour.
pub fn apply_torus_operator<T: Real>(shape: TorusShape, lambda: T, f: &[T]) -> Vec<T> {
    let diag = lambda + T::from_usize_lossy(2 * shape.dim);
    (0..f.len())
        .map(|i| {
            let mut acc = diag * f[i];
            for axis in 0..shape.dim {
                acc = acc - f[shape.step(i, axis, true)] - f[shape.step(i, axis, false)];
            }
            acc
        })
        .collect()
}

/// Return probability p_t(0,0) of the walk on 𝕋_R. The mode sum factorises
/// over axes, so this is the d-th power of the cycle's heat kernel.
pub fn heat_kernel_zero<T: Real>(dim: usize, side: usize, t: T) -> Result<T> {
    if t.is_nan() || t < T::zero() {
        return param(format!("time must be nonnegative, got {t}"));
    }
    if dim < 1 || side < 1 {
        return param("dimension and side must be at least 1");
    }
    let nu: Vec<T> = cycle_eigenvalues(side);
    let mut acc = Accumulator::default();
    for v in nu {
        acc.add((-t * v).exp());
    }
    let per_axis = acc.value() / T::from_usize_lossy(side);
    Ok(per_axis.powi(dim as i32))
}

/// Quadrature result with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature<T> {
    pub value: T,
    pub error: T,
    /// Finest grid used (points per axis).
    pub points: usize,
}

/// Largest number of integrand evaluations spent on one grid.
const MAX_EVALUATIONS: usize = 1 << 28;

/// Expected time spent at the origin by the walk on ℤᵈ:
/// (2π)^{−d} ∫ dθ / Σ_j 2(1 − cos θ_j).
///
/// Midpoint sums on shifted grids (no node at θ = 0) have an error expansion
/// in powers M^{−(d−2)}, M^{−d}, M^{−(d+2)}, … of the grid size M, which a
/// Richardson tableau removes term by term.
pub fn green_infinite<T: Real>(dim: usize, tol: T) -> Result<Quadrature<T>> {
    if dim < 3 {
        return Err(Error::Domain(format!(
            "the lattice Green function diverges in dimension {dim}; need d ≥ 3"
        )));
    }
    if !(tol > T::zero()) {
        return param(format!("tolerance must be positive, got {tol}"));
    }
    let mut tableau: Vec<Vec<T>> = Vec::new();
    let mut points = 8usize;
    loop {
        let half = points / 2;
        if half.checked_pow(dim as u32).is_none_or(|n| n > MAX_EVALUATIONS) {
            let (value, error) = tableau
                .last()
                .map(|row| {
                    let k = row.len() - 1;
                    (row[k], (row[k] - row[k.saturating_sub(1)]).abs())
                })
                .unwrap_or((T::nan(), T::infinity()));
            return Err(Error::Domain(format!(
                "quadrature stalled at {value} with error {error} above tolerance {tol}"
            )));
        }
        let mut row = vec![midpoint_sum::<T>(dim, points)];
        if let Some(prev) = tableau.last() {
            for (j, p) in prev.iter().enumerate() {
                let exponent = (dim - 2 + 2 * j) as i32;
                let factor = T::lit(2.0).powi(exponent);
                let next = (factor * row[j] - *p) / (factor - T::one());
                row.push(next);
            }
        }
        let k = row.len() - 1;
        if k >= 2 {
            let error = (row[k] - row[k - 1]).abs();
            if error < tol {
                return Ok(Quadrature {
                    value: row[k],
                    error,
                    points,
                });
            }
        }
        tableau.push(row);
        points *= 2;
    }
}

/// Average of 1/Σ_j 2(1 − cos θ_j) over the shifted grid θ = (m + ½)2π/M.
/// The grid is symmetric under θ ↦ −θ, so only (0, π) is visited per axis.
pub fn midpoint_sum<T: Real>(dim: usize, points: usize) -> T {
    let half = points / 2;
    let c: Vec<T> = (0..half)
        .map(|m| {
            let theta = T::TAU() * (T::from_usize_lossy(m) + T::lit(0.5)) / T::from_usize_lossy(points);
            T::lit(2.0) * (T::one() - theta.cos())
        })
        .collect();
    let mut digits = vec![0usize; dim - 1];
    let mut acc = Accumulator::default();
    loop {
        let partial = digits.iter().map(|&m| c[m]).fold(T::zero(), |a, b| a + b);
        let line: T = c.iter().map(|&v| (partial + v).recip()).sum();
        acc.add(line);
        let mut carry = true;
        for slot in digits.iter_mut().rev() {
            *slot += 1;
            if *slot < half {
                carry = false;
                break;
            }
            *slot = 0;
        }
        if carry {
            break;
        }
    }
    acc.value() / T::from_usize_lossy(half).powi(dim as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_torus() {
        let k = build_kernel(3, 1, 2.5_f64).unwrap();
        assert_eq!(k.len(), 1);
        assert_eq!(k.eigenvalue(0), 2.5);
        assert!((k.green_value(&[0, 0, 0], &[0, 0, 0]) - 0.4).abs() < 1e-15);
        assert_eq!(k.apply_operator(&[3.0]), vec![7.5]);
    }

    #[test]
    fn two_point_cycle_modes() {
        let k = build_kernel(1, 2, 1.0_f64).unwrap();
        let nu: Vec<f64> = k.eigenvalues().iter().map(|m| m - 1.0).collect();
        assert!(nu[0].abs() < 1e-15);
        assert!((nu[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalue_bounds() {
        let k = build_kernel(3, 4, 0.3_f64).unwrap();
        let mu = k.eigenvalues();
        assert_eq!(mu[0], 0.3);
        for m in &mu[1..] {
            assert!(*m > 0.3);
            assert!(*m <= 0.3 + 12.0 + 1e-12);
        }
        let max = mu.iter().cloned().fold(0.0, f64::max);
        assert!((max - 12.3).abs() < 1e-12);
    }

    #[test]
    fn invalid_kernels() {
        assert!(build_kernel(3, 4, 0.0_f64).is_err());
        assert!(build_kernel(3, 4, -1.0_f64).is_err());
        assert!(build_kernel(3, 4, 1e-13_f64).is_err());
        assert!(build_kernel(0, 4, 1.0_f64).is_err());
        assert!(build_kernel(3, 0, 1.0_f64).is_err());
    }

    #[test]
    fn large_mass_limit() {
        let k = build_kernel(3, 4, 1e6_f64).unwrap();
        assert!((1e6 * k.green_value(&[0, 0, 0], &[0, 0, 0]) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn green_is_symmetric_translation_invariant_and_peaked() {
        let k = build_kernel(2, 5, 0.7_f64).unwrap();
        let g00 = k.green_value(&[0, 0], &[0, 0]);
        for x in 0..5 {
            for y in 0..5 {
                let a = k.green_value(&[x, y], &[1, 3]);
                let b = k.green_value(&[1, 3], &[x, y]);
                let c = k.green_value(&[x + 2, y - 7], &[3, -4]);
                assert!((a - b).abs() < 1e-14);
                assert!((a - c).abs() < 1e-14);
                assert!(a <= g00 + 1e-15);
                assert!(a > 0.0);
            }
        }
    }

    #[test]
    fn green_decreases_in_lambda() {
        let mut prev = f64::INFINITY;
        for lambda in [0.01, 0.1, 0.5, 1.0, 4.0] {
            let g = build_kernel(3, 4, lambda).unwrap().green_value(&[0, 0, 0], &[0, 0, 0]);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn apply_green_inverts_operator() {
        let k = build_kernel(3, 3, 0.4_f64).unwrap();
        let h: Vec<f64> = (0..27).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let back = k.apply_operator(&k.apply_green(&h));
        for (a, b) in back.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
        let col = k.apply_green(&{
            let mut e = vec![0.0; 27];
            e[0] = 1.0;
            e
        });
        for (i, v) in col.iter().enumerate() {
            let s = k.shape().site(i);
            assert!((v - k.green_value(&s, &[0, 0, 0])).abs() < 1e-13);
        }
    }

    #[test]
    fn heat_kernel_limits() {
        assert!((heat_kernel_zero(3, 4, 0.0_f64).unwrap() - 1.0).abs() < 1e-15);
        assert!((heat_kernel_zero(3, 2, 1000.0_f64).unwrap() - 0.125).abs() < 1e-8);
        assert!(heat_kernel_zero(3, 2, -1.0_f64).is_err());
        let mut prev = 1.0;
        for i in 1..50 {
            let p = heat_kernel_zero(3, 6, 0.25 * i as f64).unwrap();
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn heat_kernel_matches_full_mode_sum() {
        let k = build_kernel(2, 5, 1.0_f64).unwrap();
        let t = 0.8;
        let direct: f64 = k.eigenvalues().iter().map(|mu| (-(mu - 1.0) * t).exp()).sum::<f64>() / 25.0;
        assert!((direct - heat_kernel_zero(2, 5, t).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn infinite_green_domain() {
        assert!(matches!(green_infinite(2, 1e-6_f64), Err(Error::Domain(_))));
        assert!(green_infinite(3, 0.0_f64).is_err());
    }

    #[test]
    fn f32_kernel_agrees_with_f64() {
        let a = build_kernel(3, 4, 0.5_f64).unwrap().green_value(&[0, 0, 0], &[1, 2, 3]);
        let b = build_kernel(3, 4, 0.5_f32).unwrap().green_value(&[0, 0, 0], &[1, 2, 3]);
        assert!((a - b as f64).abs() < 1e-5);
    }
}
