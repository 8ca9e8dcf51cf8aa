use critwalk::green::{heat_kernel_zero, midpoint_sum};
use critwalk::experiments::GREEN_SCHEDULE;
use critwalk::{build_kernel, green_convergence, green_infinite, TorusShape};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use statrs::function::gamma::gamma;

/// Generator Δ of the walk on 𝕋_Rᵈ as a dense matrix, built from explicit
/// coordinates.
fn dense_laplacian(dim: usize, side: usize) -> DMatrix<f64> {
    let n = side.pow(dim as u32);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut coords = vec![0usize; dim];
        let mut rest = i;
        for c in coords.iter_mut().rev() {
            *c = rest % side;
            rest /= side;
        }
        for axis in 0..dim {
            for delta in [1, side - 1] {
                let mut nb = coords.clone();
                nb[axis] = (nb[axis] + delta) % side;
                let j = nb.iter().fold(0, |acc, c| acc * side + c);
                m[(i, j)] += 1.0;
                m[(i, i)] -= 1.0;
            }
        }
    }
    m
}

#[test]
fn green_matches_dense_solve() {
    for (side, lambda) in [(4usize, 0.1), (4, 1.0), (3, 0.05)] {
        let lap = dense_laplacian(3, side);
        let n = lap.nrows();
        let a = DMatrix::identity(n, n) * lambda - lap;
        let mut delta = DVector::zeros(n);
        delta[0] = 1.0;
        let g = a.lu().solve(&delta).unwrap();
        let kernel = build_kernel(3, side, lambda).unwrap();
        let shape = TorusShape::new(3, side);
        for (j, gj) in g.iter().enumerate() {
            let y = shape.site(j);
            let spectral = kernel.green_value(&[0, 0, 0], &y);
            assert!((spectral - gj).abs() < 1e-10, "R={side} λ={lambda} y={y:?}");
        }
        let applied = kernel.apply_green(delta.as_slice());
        for (a, b) in applied.iter().zip(g.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn heat_kernel_matches_matrix_exponential() {
    for (dim, side, t) in [(3usize, 4usize, 1.0), (3, 4, 0.25), (2, 5, 3.0), (1, 7, 2.0)] {
        let p = (dense_laplacian(dim, side) * t).exp();
        let spectral = heat_kernel_zero(dim, side, t).unwrap();
        assert!((spectral - p[(0, 0)]).abs() < 1e-8, "d={dim} R={side} t={t}");
    }
}

#[test]
fn infinite_lattice_value_matches_watson() {
    // G₃(0,0) = W/6 with Watson's integral
    // W = √6/(32π³) Γ(1/24)Γ(5/24)Γ(7/24)Γ(11/24).
    let pi3 = std::f64::consts::PI.powi(3);
    let watson = 6f64.sqrt() / (32.0 * pi3)
        * gamma(1.0 / 24.0)
        * gamma(5.0 / 24.0)
        * gamma(7.0 / 24.0)
        * gamma(11.0 / 24.0);
    let q = green_infinite(3, 1e-10_f64).unwrap();
    assert!((q.value - watson / 6.0).abs() < 1e-8, "{} vs {}", q.value, watson / 6.0);
    assert!(q.error < 1e-6);
    assert!(green_infinite(2, 1e-6_f64).is_err());
}

#[test]
fn infinite_lattice_value_refines_consistently() {
    // Raw midpoint sums converge to the Richardson value as the grid grows.
    let g = green_infinite(3, 1e-10_f64).unwrap().value;
    let coarse = (midpoint_sum::<f64>(3, 32) - g).abs();
    let fine = (midpoint_sum::<f64>(3, 64) - g).abs();
    assert!(fine < coarse);
    assert!(fine < 1e-2);
    let g4 = green_infinite(4, 1e-9_f64).unwrap().value;
    // The walk spends at least the first holding time 1/(2d) at the origin.
    assert!(g4 > 1.0 / 8.0 && g4 < g);
}

#[test]
fn green_at_origin_approaches_infinite_value() {
    let rows = green_convergence(3, &GREEN_SCHEDULE).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].green < w[0].green, "{w:?}");
        assert!(w[1].relative_gap < w[0].relative_gap);
    }
    let last = rows.last().unwrap();
    assert!(last.relative_gap > 0.0 && last.relative_gap < 0.02, "{last:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn green_form_is_positive(
        side in 1usize..6,
        lambda in 0.01f64..5.0,
        h in prop::collection::vec(-1.0f64..1.0, 125),
    ) {
        let kernel = build_kernel(3, side, lambda).unwrap();
        let h = &h[..kernel.len()];
        prop_assume!(h.iter().any(|v| v.abs() > 1e-6));
        prop_assert!(kernel.quadratic_form(h) > 0.0);
    }

    #[test]
    fn green_symmetric_under_axis_permutation(
        side in 2usize..7,
        lambda in 0.05f64..3.0,
        x in prop::collection::vec(0i64..7, 3),
    ) {
        let kernel = build_kernel(3, side, lambda).unwrap();
        let g = kernel.green_value(&[0, 0, 0], &x);
        for perm in [[1, 0, 2], [2, 1, 0], [0, 2, 1], [1, 2, 0]] {
            let y: Vec<i64> = perm.iter().map(|&a| x[a]).collect();
            prop_assert!((kernel.green_value(&[0, 0, 0], &y) - g).abs() < 1e-13);
        }
    }

    #[test]
    fn green_decreasing_in_lambda(side in 1usize..6, lambda in 0.01f64..5.0, bump in 0.001f64..1.0) {
        let o = [0i64, 0, 0];
        let a = build_kernel(3, side, lambda).unwrap().green_value(&o, &o);
        let b = build_kernel(3, side, lambda + bump).unwrap().green_value(&o, &o);
        prop_assert!(b < a);
    }
}
