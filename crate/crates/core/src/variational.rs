//! Variational constants of the 2q-sphere problems.
//!
//! * ρ₁ = inf ⟨f, (λ − Δ) f⟩ over ‖f‖_{2q} = 1 on 𝕋_R, by projected gradient
//!   descent with renormalization, nonnegativity clamping and an Armijo line
//!   search seeded with Barzilai–Borwein steps.
//! * ρ₂ = sup ⟨h, G h⟩ over ‖h‖_{(2q)'} = 1, by the monotone fixed point
//!   h ← normalize((G h)^{2q−1}) read off the Lagrange condition.
//! * The Sobolev quotient ‖∇f‖²₂ / ‖f‖²_{2q} with q = d/(d−2) over functions
//!   supported in the box [−L, L]ᵈ, which is ρ₁'s problem with λ = 0 and a
//!   Dirichlet Laplacian.
//!
//! At a minimizer (λ − Δ)f = ρ₁ f^{2q−1}; the reported Lagrange residual is
//! the ℓ₂ norm of (λ − Δ)f − ρ f^{2q−1}.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::green::{apply_torus_operator, SpectralKernel};
use crate::lattice::TorusShape;
use crate::scalar::{pow, signed_pow, Real};

/// Symmetric positive semidefinite operator on a finite site set.
pub trait QuadraticOperator<T> {
    fn len(&self) -> usize;

    fn apply(&self, f: &[T]) -> Vec<T>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Starting profile (1 + |x|²)^{−(d−2)/2} about the centre of the domain.
    fn bump(&self) -> Vec<T>;
}

/// λ − Δ on the periodic torus.
#[derive(Debug, Clone, Copy)]
pub struct TorusOperator<T> {
    pub shape: TorusShape,
    pub lambda: T,
}

impl<T: Real> QuadraticOperator<T> for TorusOperator<T> {
    fn len(&self) -> usize {
        self.shape.len()
    }

    fn apply(&self, f: &[T]) -> Vec<T> {
        apply_torus_operator(self.shape, self.lambda, f)
    }

    fn bump(&self) -> Vec<T> {
        let centre = T::from_usize_lossy(self.shape.side) / T::lit(2.0);
        (0..self.len())
            .map(|i| {
                let r2 = self
                    .shape
                    .site(i)
                    .iter()
                    .map(|&x| {
                        let dx = T::lit(x as f64) - centre;
                        dx * dx
                    })
                    .fold(T::zero(), |a, b| a + b);
                bump_profile(self.shape.dim, r2)
            })
            .collect()
    }
}

/// −Δ on the box [−L, L]ᵈ with zero values outside; ⟨f, A f⟩ = ‖∇f‖²₂ with
/// every edge leaving the box counted.
#[derive(Debug, Clone, Copy)]
pub struct BoxOperator {
    pub dim: usize,
    pub radius: usize,
}

impl BoxOperator {
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    fn shape(&self) -> TorusShape {
        TorusShape::new(self.dim, self.side())
    }

    /// Lattice coordinates of the flat index (centre at the origin).
    pub fn site(&self, index: usize) -> Vec<i64> {
        self.shape()
            .site(index)
            .iter()
            .map(|&x| x - self.radius as i64)
            .collect()
    }
}

impl<T: Real> QuadraticOperator<T> for BoxOperator {
    fn len(&self) -> usize {
        self.shape().len()
    }

    fn apply(&self, f: &[T]) -> Vec<T> {
        let shape = self.shape();
        let side = self.side();
        let diag = T::from_usize_lossy(2 * self.dim);
        let mut out = vec![T::zero(); f.len()];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = diag * f[i];
            for axis in 0..self.dim {
                let stride = shape.stride(axis);
                let coord = (i / stride) % side;
                if coord + 1 < side {
                    acc = acc - f[i + stride];
                }
                if coord > 0 {
                    acc = acc - f[i - stride];
                }
            }
            *slot = acc;
        }
        out
    }

    fn bump(&self) -> Vec<T> {
        (0..<Self as QuadraticOperator<T>>::len(self))
            .map(|i| {
                let r2 = self
                    .site(i)
                    .iter()
                    .map(|&x| T::lit((x * x) as f64))
                    .fold(T::zero(), |a, b| a + b);
                bump_profile(self.dim, r2)
            })
            .collect()
    }
}

fn bump_profile<T: Real>(dim: usize, r2: T) -> T {
    let exponent = if dim >= 3 {
        T::lit((dim as f64 - 2.0) / 2.0)
    } else {
        T::lit(0.5)
    };
    (T::one() + r2).powf(-exponent)
}

/// Tolerances and limits for the variational solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Stop once the Lagrange residual falls below this.
    pub tol: T,
    pub max_iter: usize,
    pub initial_step: T,
    pub armijo: T,
    /// Keep the objective after every accepted step.
    pub record_history: bool,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 100_000,
            initial_step: T::lit(0.1),
            armijo: T::lit(1e-4),
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalSolution<T> {
    pub value: T,
    pub minimizer: Vec<T>,
    pub lagrange_residual: T,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip)]
    pub history: Vec<T>,
}

/// q = d/(d − 2), exact.
pub fn critical_exponent(dim: usize) -> Result<Ratio<i64>> {
    if dim < 3 {
        return Err(Error::Domain(format!(
            "the critical exponent d/(d−2) needs d ≥ 3, got {dim}"
        )));
    }
    Ok(Ratio::new(dim as i64, dim as i64 - 2))
}

/// Hölder conjugate p/(p − 1) of a rational p > 1.
pub fn conjugate_exponent(p: Ratio<i64>) -> Ratio<i64> {
    p / (p - Ratio::from_integer(1))
}

pub fn ratio_to_real<T: Real>(r: Ratio<i64>) -> T {
    T::lit(*r.numer() as f64) / T::lit(*r.denom() as f64)
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn pnorm<T: Real>(a: &[T], p: T) -> T {
    let s: T = a.iter().map(|v| pow(v.abs(), p)).sum();
    s.powf(p.recip())
}

/// Clamp to nonnegative and scale to unit p-norm; `None` if nothing is left.
fn project<T: Real>(f: &mut [T], p: T) -> Option<()> {
    for v in f.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    let n = pnorm(f, p);
    if !(n > T::zero()) || !n.is_finite() {
        return None;
    }
    for v in f.iter_mut() {
        *v = *v / n;
    }
    Some(())
}

fn lagrange_residual<T: Real>(f: &[T], af: &[T], value: T, q: T) -> Vec<T> {
    let e = T::lit(2.0) * q - T::one();
    af.iter()
        .zip(f)
        .map(|(a, x)| *a - value * pow(*x, e))
        .collect()
}

/// Minimize ⟨f, A f⟩ over nonnegative f with ‖f‖_{2q} = 1, from `start`.
pub fn minimize_on_sphere<T: Real, A: QuadraticOperator<T>>(
    op: &A,
    q: T,
    start: Vec<T>,
    opts: &SolverOptions<T>,
) -> Result<VariationalSolution<T>> {
    if !(q > T::one()) {
        return param(format!("exponent q must exceed 1, got {q}"));
    }
    if start.len() != op.len() {
        return param("start vector has the wrong length");
    }
    let p = T::lit(2.0) * q;
    let mut f = start;
    project(&mut f, p).ok_or_else(|| Error::Parameter("start vector has no positive part".into()))?;
    let mut af = op.apply(&f);
    let mut value = dot(&f, &af);
    let mut r = lagrange_residual(&f, &af, value, q);
    let mut rn = norm2(&r);
    let mut history = Vec::new();
    if opts.record_history {
        history.push(value);
    }
    let mut step = opts.initial_step;
    let mut prev: Option<(Vec<T>, Vec<T>)> = None;
    let mut iterations = 0;
    let two = T::lit(2.0);
    while rn > opts.tol && iterations < opts.max_iter {
        if let Some((pf, pr)) = &prev {
            let s: Vec<T> = f.iter().zip(pf).map(|(a, b)| *a - *b).collect();
            let y: Vec<T> = r.iter().zip(pr).map(|(a, b)| *a - *b).collect();
            let sy = dot(&s, &y);
            if sy > T::zero() {
                step = (dot(&s, &s) / sy).max(T::lit(1e-12)).min(T::lit(1e6));
            } else {
                step = (step * two).min(T::lit(1e6));
            }
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..100 {
            let mut g: Vec<T> = f.iter().zip(&r).map(|(x, ri)| *x - t * *ri).collect();
            if project(&mut g, p).is_some() {
                let ag = op.apply(&g);
                let diff: Vec<T> = g.iter().zip(&f).map(|(a, b)| *a - *b).collect();
                let sum: Vec<T> = ag.iter().zip(&af).map(|(a, b)| *a + *b).collect();
                // E(g) − E(f) = ⟨g − f, A(g + f)⟩, free of cancellation
                let delta = dot(&diff, &sum);
                let predicted = two * dot(&r, &diff);
                if delta <= T::zero() && delta <= opts.armijo * predicted {
                    accepted = Some((g, ag, t));
                    break;
                }
                // Below the round-off floor of `delta` the energy is flat to
                // working precision; fall back to residual decrease.
                let noise: T = f
                    .iter()
                    .zip(&sum)
                    .map(|(a, b)| (*a * *b).abs())
                    .sum::<T>()
                    * T::epsilon()
                    * T::lit(16.0);
                if delta.abs() <= noise {
                    let value = dot(&g, &ag);
                    if norm2(&lagrange_residual(&g, &ag, value, q)) < rn {
                        accepted = Some((g, ag, t));
                        break;
                    }
                }
            }
            t = t / two;
        }
        let Some((g, ag, t)) = accepted else {
            break;
        };
        step = t;
        let new_value = dot(&g, &ag);
        let new_r = lagrange_residual(&g, &ag, new_value, q);
        prev = Some((std::mem::replace(&mut f, g), std::mem::replace(&mut r, new_r)));
        af = ag;
        value = new_value;
        rn = norm2(&r);
        iterations += 1;
        if opts.record_history {
            history.push(value);
        }
    }
    Ok(VariationalSolution {
        value,
        minimizer: f,
        lagrange_residual: rn,
        iterations,
        converged: rn <= opts.tol,
        history,
    })
}

fn check_problem<T: Real>(side: usize, lambda: T, q: T) -> Result<()> {
    if !(q > T::one()) || !q.is_finite() {
        return param(format!("exponent q must exceed 1, got {q}"));
    }
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return param(format!("mass λ must be positive, got {lambda}"));
    }
    if side < 1 {
        return param("torus side must be at least 1");
    }
    Ok(())
}

/// ρ₁(λ, R) on 𝕋_Rᵈ. The descent starts from the centred bump; the constant
/// function, always a critical point, is kept if it does better. The reported
/// minimizer is shifted so its mass barycenter sits at the torus centre.
pub fn rho1<T: Real>(
    dim: usize,
    side: usize,
    lambda: T,
    q: T,
    opts: &SolverOptions<T>,
) -> Result<VariationalSolution<T>> {
    check_problem(side, lambda, q)?;
    if dim < 1 {
        return param("dimension must be at least 1");
    }
    let op = TorusOperator {
        shape: TorusShape::new(dim, side),
        lambda,
    };
    let mut best = minimize_on_sphere(&op, q, op.bump(), opts)?;
    let constant = minimize_on_sphere(&op, q, vec![T::one(); op.len()], opts)?;
    if constant.value < best.value {
        best = constant;
    }
    best.minimizer = center_on_torus(op.shape, &best.minimizer, T::lit(2.0) * q);
    Ok(best)
}

/// Shift so the circular mean of f^{p} along each axis lands on R/2.
fn center_on_torus<T: Real>(shape: TorusShape, f: &[T], p: T) -> Vec<T> {
    let side = shape.side;
    if side < 3 {
        return f.to_vec();
    }
    let weights: Vec<T> = f.iter().map(|v| pow(*v, p)).collect();
    let mut shift = vec![0i64; shape.dim];
    for (axis, slot) in shift.iter_mut().enumerate() {
        let (mut c, mut s) = (T::zero(), T::zero());
        for (i, w) in weights.iter().enumerate() {
            let x = shape.site(i)[axis];
            let angle = T::TAU() * T::lit(x as f64) / T::from_usize_lossy(side);
            c = c + *w * angle.cos();
            s = s + *w * angle.sin();
        }
        if c.hypot(s) <= T::lit(1e-9) * weights.iter().copied().sum::<T>() {
            continue;
        }
        let mean = s.atan2(c) / T::TAU() * T::from_usize_lossy(side);
        let target = (side / 2) as i64;
        *slot = target - mean.round().to_i64().unwrap_or(0);
    }
    let mut out = vec![T::zero(); f.len()];
    for (i, v) in f.iter().enumerate() {
        let site = shape.site(i);
        let moved: Vec<i64> = site.iter().zip(&shift).map(|(x, d)| x + d).collect();
        out[shape.index(&moved)] = *v;
    }
    out
}

/// ρ₂(λ, R) = sup ⟨h, G h⟩ over ‖h‖_{(2q)'} = 1, h ≥ 0.
///
/// Each update maximizes the linearization ⟨G h, ·⟩ over the dual ball, so
/// the value never decreases (the objective is convex).
pub fn rho2<T: Real>(
    dim: usize,
    side: usize,
    lambda: T,
    q: T,
    opts: &SolverOptions<T>,
) -> Result<VariationalSolution<T>> {
    check_problem(side, lambda, q)?;
    let kernel = SpectralKernel::new(dim, side, lambda)?;
    let op = TorusOperator {
        shape: kernel.shape(),
        lambda,
    };
    let bump = op.bump();
    let mut best = fixed_point_rho2(&kernel, q, bump, opts);
    let constant = fixed_point_rho2(&kernel, q, vec![T::one(); kernel.len()], opts);
    if constant.value > best.value {
        best = constant;
    }
    Ok(best)
}

fn fixed_point_rho2<T: Real>(
    kernel: &SpectralKernel<T>,
    q: T,
    start: Vec<T>,
    opts: &SolverOptions<T>,
) -> VariationalSolution<T> {
    let two_q = T::lit(2.0) * q;
    let dual = two_q / (two_q - T::one());
    let power = two_q - T::one();
    let mut h = start;
    project(&mut h, dual).expect("positive start");
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let g = kernel.apply_green(&h);
        let value = dot(&h, &g);
        if opts.record_history {
            history.push(value);
        }
        let r: Vec<T> = g
            .iter()
            .zip(&h)
            .map(|(gx, hx)| *gx - value * signed_pow(*hx, dual - T::one()))
            .collect();
        let rn = norm2(&r);
        if rn <= opts.tol || iterations >= opts.max_iter {
            return VariationalSolution {
                value,
                minimizer: h,
                lagrange_residual: rn,
                iterations,
                converged: rn <= opts.tol,
                history,
            };
        }
        let mut next: Vec<T> = g.iter().map(|v| signed_pow(*v, power)).collect();
        project(&mut next, dual).expect("G maps positive vectors to positive vectors");
        h = next;
        iterations += 1;
    }
}

/// Best Sobolev quotient over functions supported in [−L, L]ᵈ, d ≥ 3.
/// Its value bounds 1/C_S²(d) from above and is nonincreasing in L.
pub fn sobolev_constant<T: Real>(
    dim: usize,
    box_radius: usize,
    opts: &SolverOptions<T>,
) -> Result<VariationalSolution<T>> {
    let q: T = ratio_to_real(critical_exponent(dim)?);
    let op = BoxOperator {
        dim,
        radius: box_radius,
    };
    let start = <BoxOperator as QuadraticOperator<T>>::bump(&op);
    minimize_on_sphere(&op, q, start, opts)
}

/// ‖∇f‖²₂ / ‖f‖²_{2q} for f on the box (zero outside), q = d/(d − 2).
pub fn sobolev_quotient<T: Real>(dim: usize, box_radius: usize, f: &[T]) -> Result<T> {
    let q: T = ratio_to_real(critical_exponent(dim)?);
    let op = BoxOperator {
        dim,
        radius: box_radius,
    };
    if f.len() != <BoxOperator as QuadraticOperator<T>>::len(&op) {
        return param("vector length does not match the box");
    }
    let energy = dot(f, &op.apply(f));
    let n = pnorm(f, T::lit(2.0) * q);
    Ok(energy / (n * n))
}

/// One row of the ρ₁ trend table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow<T> {
    pub side: usize,
    pub lambda: T,
    /// λR².
    pub scale: T,
    pub rho1: T,
    pub residual: T,
    pub converged: bool,
    /// Box Sobolev value shared by every row.
    pub sobolev: T,
}

/// ρ₁ along a schedule of (R, λ) with growing λR², next to the box Sobolev
/// estimate at radius `sobolev_radius`, at the critical q = d/(d − 2).
pub fn rho1_critical_trend<T: Real>(
    dim: usize,
    schedule: &[(usize, T)],
    sobolev_radius: usize,
    opts: &SolverOptions<T>,
) -> Result<Vec<TrendRow<T>>> {
    let q: T = ratio_to_real(critical_exponent(dim)?);
    let sobolev = sobolev_constant(dim, sobolev_radius, opts)?.value;
    schedule
        .iter()
        .map(|&(side, lambda)| {
            let sol = rho1(dim, side, lambda, q, opts)?;
            let r = T::from_usize_lossy(side);
            Ok(TrendRow {
                side,
                lambda,
                scale: lambda * r * r,
                rho1: sol.value,
                residual: sol.lagrange_residual,
                converged: sol.converged,
                sobolev,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_torus_is_exact() {
        let opts = SolverOptions::default();
        let s = rho1(3, 1, 2.0_f64, 3.0, &opts).unwrap();
        assert_eq!(s.value, 2.0);
        assert!(s.converged);
        let s2 = rho2(3, 1, 2.0_f64, 3.0, &opts).unwrap();
        assert!((s2.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_exponents() {
        assert_eq!(critical_exponent(3).unwrap(), Ratio::new(3, 1));
        assert_eq!(critical_exponent(4).unwrap(), Ratio::new(2, 1));
        assert_eq!(critical_exponent(5).unwrap(), Ratio::new(5, 3));
        // (2q)' = 2d/(d+2)
        let two_q = critical_exponent(5).unwrap() * 2;
        assert_eq!(conjugate_exponent(two_q), Ratio::new(10, 7));
        assert!(critical_exponent(2).is_err());
    }

    #[test]
    fn box_operator_energy_counts_boundary_edges() {
        let op = BoxOperator { dim: 2, radius: 1 };
        let mut f = vec![0.0_f64; 9];
        f[4] = 1.0;
        let e: f64 = dot(&f, &op.apply(&f));
        assert_eq!(e, 4.0);
        let ones = vec![1.0_f64; 9];
        // 12 edges leave the 3×3 box
        assert_eq!(dot(&ones, &op.apply(&ones)), 12.0);
    }

    #[test]
    fn solution_is_normalized_and_nonnegative() {
        let s = rho1(3, 4, 1.0_f64, 3.0, &SolverOptions::default()).unwrap();
        assert!(s.converged, "residual {}", s.lagrange_residual);
        assert!((pnorm(&s.minimizer, 6.0) - 1.0).abs() < 1e-12);
        assert!(s.minimizer.iter().all(|v| *v >= 0.0));
        assert!(s.value >= 1.0 && s.value <= 7.0);
    }

    #[test]
    fn parameter_errors() {
        let o = SolverOptions::default();
        assert!(rho1(3, 2, 1.0_f64, 1.0, &o).is_err());
        assert!(rho1(3, 2, 0.0_f64, 3.0, &o).is_err());
        assert!(rho2(3, 2, -1.0_f64, 3.0, &o).is_err());
        assert!(matches!(sobolev_constant::<f64>(2, 4, &o), Err(Error::Domain(_))));
    }
}
