//! Multi-dimensional complex FFT over the row-major torus layout.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::lattice::TorusShape;
use crate::scalar::Real;

/// Forward/inverse d-dimensional transforms of side R. The inverse is
/// unnormalized, matching rustfft.
pub struct TorusFft<T: Real> {
    shape: TorusShape,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for TorusFft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusFft").field("shape", &self.shape).finish()
    }
}

impl<T: Real> TorusFft<T> {
    pub fn new(shape: TorusShape) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape,
            forward: planner.plan_fft_forward(shape.side),
            inverse: planner.plan_fft_inverse(shape.side),
        }
    }

    pub fn shape(&self) -> TorusShape {
        self.shape
    }

    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.transform(data, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        let side = self.shape.side;
        let n = data.len();
        debug_assert_eq!(n, self.shape.len());
        if side == 1 {
            return;
        }
        let mut line = vec![Complex::new(T::zero(), T::zero()); side];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.get_inplace_scratch_len()];
        for axis in 0..self.shape.dim {
            let stride = self.shape.stride(axis);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(side) {
                    plan.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * side;
            for base in (0..n).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[start + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        data[start + j * stride] = *v;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_dft() {
        let shape = TorusShape::new(2, 3);
        let fft = TorusFft::<f64>::new(shape);
        let input: Vec<Complex<f64>> = (0..9).map(|i| Complex::new(i as f64, (i * i) as f64)).collect();
        let mut data = input.clone();
        fft.forward(&mut data);
        for (k, out) in data.iter().enumerate() {
            let ks = shape.site(k);
            let mut acc = Complex::new(0.0, 0.0);
            for (x, v) in input.iter().enumerate() {
                let xs = shape.site(x);
                let phase = -2.0 * std::f64::consts::PI
                    * (ks[0] * xs[0] + ks[1] * xs[1]) as f64
                    / 3.0;
                acc += v * Complex::new(phase.cos(), phase.sin());
            }
            assert!((acc - out).norm() < 1e-10);
        }
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&input) {
            assert!((a / 9.0 - b).norm() < 1e-10);
        }
    }
}
