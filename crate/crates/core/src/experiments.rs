//! Monte Carlo experiments under the critical scaling presets: tail
//! probabilities of I_T, the confinement lower bound, exponential moments of
//! I_T^{1/q}, and the Green-kernel convergence table.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::estimate::{clopper_pearson, MCEstimate};
use crate::green::{build_kernel, green_infinite};
use crate::intersection::power_sum;
use crate::walk::{confined_replica, simulate_replica, LocalTimeField, WalkConfig};

/// Smallest replica count the estimators accept.
pub const MIN_REPLICAS: usize = 1000;

/// Confidence level of the reported Clopper–Pearson bounds.
pub const CONFIDENCE: f64 = 0.95;

/// q = d/(d − 2).
pub fn default_q(dim: usize) -> Result<f64> {
    if dim < 3 {
        return Err(Error::Domain(format!(
            "the critical exponent needs d ≥ 3, got {dim}"
        )));
    }
    Ok(dim as f64 / (dim as f64 - 2.0))
}

/// Resolved torus side and killing rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Preset {
    pub side: usize,
    pub lambda: f64,
    /// b_T R²/T for the critical preset; λR^d is large when this is ≥ 1.
    pub scale: f64,
    pub scale_ok: bool,
}

/// R = round(T^{1/d}), λ = α b_T / T.
pub fn critical_preset(dim: usize, horizon: f64, b_t: f64, alpha: f64) -> Result<Preset> {
    check_positive("T", horizon)?;
    check_positive("b_T", b_t)?;
    check_positive("alpha", alpha)?;
    let side = (horizon.powf(1.0 / dim as f64).round() as usize).max(1);
    let r = side as f64;
    let scale = b_t * r * r / horizon;
    Ok(Preset {
        side,
        lambda: alpha * b_t / horizon,
        scale,
        scale_ok: scale >= 1.0,
    })
}

/// Rᵈ = A·T (rounded per axis), λ = α T^{1/q} / T.
pub fn large_deviation_preset(dim: usize, q: f64, horizon: f64, alpha: f64, area: f64) -> Result<Preset> {
    check_positive("T", horizon)?;
    check_positive("alpha", alpha)?;
    check_positive("A", area)?;
    let side = ((area * horizon).powf(1.0 / dim as f64).round() as usize).max(1);
    let r = side as f64;
    let b_t = horizon.powf(1.0 / q);
    let scale = b_t * r * r / horizon;
    Ok(Preset {
        side,
        lambda: alpha * b_t / horizon,
        scale,
        scale_ok: scale >= 1.0,
    })
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return param(format!("{name} must be positive and finite, got {v}"));
    }
    Ok(())
}

fn check_common(dim: usize, q: f64, horizon: f64, replicas: usize) -> Result<()> {
    if dim < 1 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    if !(q >= 1.0) || !q.is_finite() {
        return param(format!("q must be at least 1, got {q}"));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::Config(format!("T must be nonnegative, got {horizon}")));
    }
    if replicas < MIN_REPLICAS {
        return param(format!("need at least {MIN_REPLICAS} replicas, got {replicas}"));
    }
    Ok(())
}

/// I_T = Σ l^q; at q = 1 the elapsed time, which is the exact value.
pub fn intersection_statistic(field: &LocalTimeField<f64>, q: f64) -> f64 {
    if q == 1.0 {
        field.elapsed()
    } else {
        power_sum(field, q)
    }
}

/// Frequency estimate of a rare event, with its exact confidence band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub estimate: MCEstimate,
    pub hits: u64,
    /// (1/b_T) log p̂, absent when no replica hit.
    pub log_rate: Option<f64>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl TailEstimate {
    fn from_indicators(values: Vec<f64>, seed: u64, b_t: f64) -> Self {
        let n = values.len() as u64;
        let hits = values.iter().filter(|v| **v > 0.0).count() as u64;
        let estimate = MCEstimate::from_values(&values, seed);
        let (lower_bound, upper_bound) = clopper_pearson(hits, n, CONFIDENCE);
        let log_rate = (hits > 0).then(|| estimate.mean.ln() / b_t);
        Self {
            estimate,
            hits,
            log_rate,
            lower_bound,
            upper_bound,
            values,
        }
    }

    fn impossible(n: usize, seed: u64) -> Self {
        Self {
            estimate: MCEstimate::from_values(&vec![0.0; n], seed),
            hits: 0,
            log_rate: None,
            lower_bound: 0.0,
            upper_bound: 0.0,
            values: vec![0.0; n],
        }
    }
}

/// Naive frequency of {I_T ≥ b_T^q} over walks on ℤᵈ. A threshold above the
/// maximum T^q gives probability zero without sampling.
pub fn tail_probability(
    dim: usize,
    q: f64,
    horizon: f64,
    b_t: f64,
    replicas: usize,
    seed: u64,
) -> Result<TailEstimate> {
    check_common(dim, q, horizon, replicas)?;
    check_positive("b_T", b_t)?;
    let threshold = b_t.powf(q);
    let echo = |e: TailEstimate| tag(e, dim, q, horizon, b_t);
    if threshold > horizon.powf(q) {
        return Ok(echo(TailEstimate::impossible(replicas, seed)));
    }
    let cfg = WalkConfig::lattice(dim, horizon, seed);
    cfg.validate()?;
    let values: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let field = simulate_replica(&cfg, r).expect("validated config");
            f64::from(intersection_statistic(&field, q) >= threshold)
        })
        .collect();
    Ok(echo(TailEstimate::from_indicators(values, seed, b_t)))
}

fn tag(mut e: TailEstimate, dim: usize, q: f64, horizon: f64, b_t: f64) -> TailEstimate {
    e.estimate = e
        .estimate
        .with_param("d", dim as f64)
        .with_param("q", q)
        .with_param("T", horizon)
        .with_param("b_T", b_t);
    e
}

/// Lower bound on the tail probability from the event {the walk stays in
/// [−L, L]ᵈ and I_T ≥ b_T^q}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfinementEstimate {
    pub bound: TailEstimate,
    /// Estimated P[confined].
    pub confinement: MCEstimate,
    pub accepted: u64,
    /// Estimated P[I_T ≥ b_T^q | confined], absent without acceptances.
    pub conditional: Option<f64>,
}

/// P[confined] × P[I_T ≥ b_T^q | confined] via rejection sampling. Replica r
/// uses the same stream as replica r of [`tail_probability`], so with equal
/// seeds the bound never exceeds the naive estimate.
pub fn confinement_lower_bound(
    dim: usize,
    q: f64,
    horizon: f64,
    b_t: f64,
    box_radius: u64,
    replicas: usize,
    seed: u64,
) -> Result<ConfinementEstimate> {
    check_common(dim, q, horizon, replicas)?;
    check_positive("b_T", b_t)?;
    let threshold = b_t.powf(q);
    let cfg = WalkConfig::lattice(dim, horizon, seed);
    cfg.validate()?;
    let outcomes: Vec<(bool, bool)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| match confined_replica(&cfg, box_radius, r).expect("validated config") {
            Some(field) => (true, intersection_statistic(&field, q) >= threshold),
            None => (false, false),
        })
        .collect();
    let accepted = outcomes.iter().filter(|(a, _)| *a).count() as u64;
    let joint: Vec<f64> = outcomes.iter().map(|(_, hit)| f64::from(*hit)).collect();
    let confined: Vec<f64> = outcomes.iter().map(|(a, _)| f64::from(*a)).collect();
    let hits = joint.iter().filter(|v| **v > 0.0).count() as u64;
    let bound = tag(TailEstimate::from_indicators(joint, seed, b_t), dim, q, horizon, b_t);
    let mut bound = bound;
    bound.estimate = bound.estimate.with_param("box_L", box_radius as f64);
    Ok(ConfinementEstimate {
        bound,
        confinement: MCEstimate::from_values(&confined, seed).with_param("box_L", box_radius as f64),
        accepted,
        conditional: (accepted > 0).then(|| hits as f64 / accepted as f64),
    })
}

/// E[exp(θ I_T^{1/q})] with a heavy-tail diagnostic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpMomentEstimate {
    pub estimate: MCEstimate,
    /// Share of the sample sum carried by the top 1% of replicas.
    pub top_share: f64,
    /// Set when `top_share` exceeds one half: the moment may be infinite and
    /// the estimate should not be trusted.
    pub heavy_tail: bool,
    #[serde(skip)]
    pub values: Vec<f64>,
}

pub fn exp_moment(
    dim: usize,
    q: f64,
    horizon: f64,
    theta: f64,
    replicas: usize,
    seed: u64,
) -> Result<ExpMomentEstimate> {
    check_common(dim, q, horizon, replicas)?;
    if !(theta >= 0.0) || !theta.is_finite() {
        return param(format!("θ must be nonnegative, got {theta}"));
    }
    let cfg = WalkConfig::lattice(dim, horizon, seed);
    cfg.validate()?;
    let values: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            if theta == 0.0 {
                return 1.0;
            }
            let field = simulate_replica(&cfg, r).expect("validated config");
            (theta * intersection_statistic(&field, q).powf(1.0 / q)).exp()
        })
        .collect();
    let estimate = MCEstimate::from_values(&values, seed)
        .with_param("d", dim as f64)
        .with_param("q", q)
        .with_param("T", horizon)
        .with_param("theta", theta);
    let top_share = top_share(&values, 0.01);
    Ok(ExpMomentEstimate {
        estimate,
        top_share,
        heavy_tail: top_share > 0.5,
        values,
    })
}

fn top_share(values: &[f64], fraction: f64) -> f64 {
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite values"));
    let k = ((values.len() as f64 * fraction).ceil() as usize).max(1);
    sorted[..k].iter().sum::<f64>() / total
}

/// One row of the Green convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenRow {
    pub side: usize,
    pub lambda: f64,
    pub green: f64,
    pub infinite: f64,
    pub relative_gap: f64,
}

/// G_{R,λ}(0,0) along λ = R⁻², so that λ → 0 while λRᵈ = R^{d−2} → ∞,
/// beside G_d(0,0).
pub fn green_convergence(dim: usize, sides: &[usize]) -> Result<Vec<GreenRow>> {
    let infinite = green_infinite(dim, 1e-9_f64)?.value;
    sides
        .iter()
        .map(|&side| {
            let lambda = 1.0 / (side as f64 * side as f64);
            let kernel = build_kernel(dim, side, lambda)?;
            let origin = vec![0i64; dim];
            let green = kernel.green_value(&origin, &origin);
            Ok(GreenRow {
                side,
                lambda,
                green,
                infinite,
                relative_gap: green / infinite - 1.0,
            })
        })
        .collect()
}

/// Torus sides of the default Green schedule.
pub const GREEN_SCHEDULE: [usize; 7] = [4, 8, 16, 32, 64, 128, 256];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        let p = critical_preset(3, 1000.0, 10.0, 1.0).unwrap();
        assert_eq!(p.side, 10);
        assert!((p.lambda - 0.01).abs() < 1e-15);
        assert!((p.scale - 1.0).abs() < 1e-12);
        assert!(p.scale_ok);
        let ld = large_deviation_preset(3, 3.0, 1000.0, 1.0, 8.0).unwrap();
        assert_eq!(ld.side, 20);
        assert!((ld.lambda - 0.01).abs() < 1e-12);
        assert!(critical_preset(3, 0.0, 1.0, 1.0).is_err());
        assert_eq!(default_q(3).unwrap(), 3.0);
        assert_eq!(default_q(4).unwrap(), 2.0);
        assert!(default_q(2).is_err());
    }

    #[test]
    fn impossible_threshold_is_exactly_zero() {
        let e = tail_probability(3, 3.0, 2.0, 2.5, 1000, 1).unwrap();
        assert_eq!(e.estimate.mean, 0.0);
        assert_eq!(e.estimate.stderr, 0.0);
        assert_eq!(e.hits, 0);
        assert!(e.log_rate.is_none());
    }

    #[test]
    fn q_one_at_horizon_is_certain() {
        let e = tail_probability(3, 1.0, 5.0, 5.0, 1000, 2).unwrap();
        assert_eq!(e.estimate.mean, 1.0);
    }

    #[test]
    fn zero_theta_is_exactly_one() {
        let e = exp_moment(3, 3.0, 5.0, 0.0, 1000, 3).unwrap();
        assert_eq!(e.estimate.mean, 1.0);
        assert_eq!(e.estimate.stderr, 0.0);
        assert!(exp_moment(3, 3.0, 5.0, -1.0, 1000, 3).is_err());
    }

    #[test]
    fn top_share_flags_concentration() {
        let mut v = vec![1.0; 1000];
        v[0] = 5000.0;
        assert!(top_share(&v, 0.01) > 0.5);
        assert!(top_share(&[1.0; 1000], 0.01) < 0.02);
    }
}
