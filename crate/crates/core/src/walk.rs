//! Continuous-time simple random walk on ℤᵈ or 𝕋_R with occupation times.
//!
//! The generator is Δf(x) = Σ_{y∼x} (f(y) − f(x)): each of the 2d edges fires
//! at rate one, so holding times are Exp(2d) and the jump target is uniform
//! among the neighbours. Simulation is event driven and every interval,
//! including the final partial one, is credited to the site it was spent on.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{origin, sup_norm, Geometry, Site, TorusShape};
use crate::rng::{substream, Purpose};
use crate::scalar::{adaptive_sum, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig<T> {
    pub dim: usize,
    /// Time horizon; may be infinite when `stop_rate` is set.
    pub horizon: T,
    pub torus: Option<usize>,
    /// Rate of an independent exponential killing time.
    pub stop_rate: Option<T>,
    pub seed: u64,
}

impl<T: Real> WalkConfig<T> {
    pub fn lattice(dim: usize, horizon: T, seed: u64) -> Self {
        Self {
            dim,
            horizon,
            torus: None,
            stop_rate: None,
            seed,
        }
    }

    pub fn with_torus(mut self, side: usize) -> Self {
        self.torus = Some(side);
        self
    }

    pub fn with_stop_rate(mut self, rate: T) -> Self {
        self.stop_rate = Some(rate);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.horizon.is_nan() || self.horizon < T::zero() {
            return Err(Error::Config(format!(
                "horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        if let Some(side) = self.torus {
            if side < 1 {
                return Err(Error::Config("torus side must be at least 1".into()));
            }
        }
        match self.stop_rate {
            Some(rate) if !(rate > T::zero() && rate.is_finite()) => {
                return Err(Error::Config(format!(
                    "stop rate must be positive and finite, got {rate}"
                )))
            }
            None if self.horizon.is_infinite() => {
                return Err(Error::Config(
                    "an infinite horizon needs a stop rate".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        match self.torus {
            Some(r) => Geometry::Torus(r),
            None => Geometry::Lattice,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Occupation<T> {
    Sparse(HashMap<Site, T>),
    Dense(Vec<T>),
}

/// Occupation time per visited site, accumulated from one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTimeField<T> {
    dim: usize,
    geometry: Geometry,
    occupation: Occupation<T>,
    elapsed: T,
    jumps: u64,
}

impl<T: Real> LocalTimeField<T> {
    pub(crate) fn empty(dim: usize, geometry: Geometry) -> Self {
        let occupation = match geometry {
            Geometry::Torus(side) if TorusShape::new(dim, side).is_dense() => {
                Occupation::Dense(vec![T::zero(); TorusShape::new(dim, side).len()])
            }
            _ => Occupation::Sparse(HashMap::new()),
        };
        Self {
            dim,
            geometry,
            occupation,
            elapsed: T::zero(),
            jumps: 0,
        }
    }

    /// Field from explicit masses; `elapsed` is their total. Torus sites are
    /// reduced mod R, repeated sites accumulate, and nonpositive masses are
    /// rejected.
    pub fn from_masses<I>(dim: usize, geometry: Geometry, masses: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Site, T)>,
    {
        if dim < 1 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if let Geometry::Torus(0) = geometry {
            return Err(Error::Config("torus side must be at least 1".into()));
        }
        let mut field = Self::empty(dim, geometry);
        let mut total = Vec::new();
        for (site, mass) in masses {
            if site.len() != dim {
                return Err(Error::Parameter(format!(
                    "site {site:?} does not have {dim} coordinates"
                )));
            }
            if !(mass > T::zero() && mass.is_finite()) {
                return Err(Error::Parameter(format!(
                    "masses must be positive and finite, got {mass}"
                )));
            }
            field.credit(&site, mass);
            total.push(mass);
        }
        field.elapsed = adaptive_sum(&total);
        Ok(field)
    }

    #[inline]
    fn credit(&mut self, site: &[i64], amount: T) {
        if amount <= T::zero() {
            return;
        }
        match (&mut self.occupation, self.geometry) {
            (Occupation::Dense(values), Geometry::Torus(side)) => {
                values[TorusShape::new(self.dim, side).index(site)] =
                    values[TorusShape::new(self.dim, side).index(site)] + amount;
            }
            (Occupation::Sparse(map), Geometry::Torus(side)) => {
                let key = TorusShape::new(self.dim, side).reduce(site);
                let slot = map.entry(key).or_insert_with(T::zero);
                *slot = *slot + amount;
            }
            (Occupation::Sparse(map), Geometry::Lattice) => {
                let slot = map.entry(Site::from_slice(site)).or_insert_with(T::zero);
                *slot = *slot + amount;
            }
            (Occupation::Dense(_), Geometry::Lattice) => unreachable!(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Total realized time.
    pub fn elapsed(&self) -> T {
        self.elapsed
    }

    /// Number of jumps made by the walk that produced the field.
    pub fn jumps(&self) -> u64 {
        self.jumps
    }

    /// Number of sites with positive occupation.
    pub fn support_len(&self) -> usize {
        match &self.occupation {
            Occupation::Sparse(map) => map.len(),
            Occupation::Dense(values) => values.iter().filter(|v| **v > T::zero()).count(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.support_len() == 0
    }

    /// Positive masses in unspecified order.
    pub fn masses(&self) -> Vec<T> {
        match &self.occupation {
            Occupation::Sparse(map) => map.values().copied().collect(),
            Occupation::Dense(values) => {
                values.iter().copied().filter(|v| *v > T::zero()).collect()
            }
        }
    }

    /// `(site, mass)` pairs of the support.
    pub fn entries(&self) -> Vec<(Site, T)> {
        match (&self.occupation, self.geometry) {
            (Occupation::Sparse(map), _) => map.iter().map(|(s, m)| (s.clone(), *m)).collect(),
            (Occupation::Dense(values), Geometry::Torus(side)) => {
                let shape = TorusShape::new(self.dim, side);
                values
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > T::zero())
                    .map(|(i, v)| (shape.site(i), *v))
                    .collect()
            }
            (Occupation::Dense(_), Geometry::Lattice) => unreachable!(),
        }
    }

    /// Occupation of one site (zero off the support).
    pub fn mass_at(&self, site: &[i64]) -> T {
        match (&self.occupation, self.geometry) {
            (Occupation::Dense(values), Geometry::Torus(side)) => {
                values[TorusShape::new(self.dim, side).index(site)]
            }
            (Occupation::Sparse(map), Geometry::Torus(side)) => map
                .get(&TorusShape::new(self.dim, side).reduce(site))
                .copied()
                .unwrap_or_else(T::zero),
            (Occupation::Sparse(map), Geometry::Lattice) => {
                map.get(site).copied().unwrap_or_else(T::zero)
            }
            (Occupation::Dense(_), Geometry::Lattice) => unreachable!(),
        }
    }

    /// Dense per-site values on a torus in row-major layout.
    pub fn dense_values(&self) -> Option<Vec<T>> {
        match (&self.occupation, self.geometry) {
            (Occupation::Dense(values), _) => Some(values.clone()),
            (Occupation::Sparse(map), Geometry::Torus(side)) => {
                let shape = TorusShape::new(self.dim, side);
                let n = shape.checked_len()?;
                let mut out = vec![T::zero(); n];
                for (s, m) in map {
                    out[shape.index(s)] = *m;
                }
                Some(out)
            }
            (Occupation::Sparse(_), Geometry::Lattice) => None,
        }
    }

    pub(crate) fn set_elapsed(&mut self, elapsed: T) {
        self.elapsed = elapsed;
    }

    pub(crate) fn dense_slice(&self) -> Option<&[T]> {
        match &self.occupation {
            Occupation::Dense(values) => Some(values),
            Occupation::Sparse(_) => None,
        }
    }

    /// Largest sup-norm over the support (lattice coordinates).
    pub fn max_displacement(&self) -> i64 {
        self.entries()
            .iter()
            .map(|(s, _)| sup_norm(s))
            .max()
            .unwrap_or(0)
    }

    /// Sum of all stored masses.
    pub fn total_mass(&self) -> T {
        adaptive_sum(&self.masses())
    }
}

/// Simulate replica 0 of the configured walk.
pub fn simulate_local_times<T: Real>(config: &WalkConfig<T>) -> Result<LocalTimeField<T>> {
    simulate_replica(config, 0)
}

/// Simulate one replica; replicas of a seed use independent streams.
pub fn simulate_replica<T: Real>(config: &WalkConfig<T>, replica: u64) -> Result<LocalTimeField<T>> {
    config.validate()?;
    let mut rng = substream(config.seed, Purpose::Walk, replica);
    Ok(run(config, &mut rng, None).expect("unbounded walk always completes"))
}

/// Simulate with a caller-provided generator.
pub fn simulate_with_rng<T: Real, R: Rng + ?Sized>(
    config: &WalkConfig<T>,
    rng: &mut R,
) -> Result<LocalTimeField<T>> {
    config.validate()?;
    Ok(run(config, rng, None).expect("unbounded walk always completes"))
}

/// Rejection sampler for the event that the walk on ℤᵈ never leaves
/// [−L, L]ᵈ. Returns `None` on rejection; the acceptance frequency estimates
/// the confinement probability.
pub fn confined_sample<T: Real>(
    config: &WalkConfig<T>,
    box_radius: u64,
) -> Result<Option<LocalTimeField<T>>> {
    confined_replica(config, box_radius, 0)
}

pub fn confined_replica<T: Real>(
    config: &WalkConfig<T>,
    box_radius: u64,
    replica: u64,
) -> Result<Option<LocalTimeField<T>>> {
    config.validate()?;
    if config.torus.is_some() {
        return Err(Error::Config(
            "confinement sampling is defined for walks on the lattice".into(),
        ));
    }
    let mut rng = substream(config.seed, Purpose::Walk, replica);
    Ok(run(config, &mut rng, Some(box_radius as i64)))
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

// Stream layout per replica: the stop time (if any), then per step one
// holding-time uniform followed by one direction draw. Torus and lattice
// walks of the same seed therefore follow the same path up to reduction.
fn run<T: Real, R: Rng + ?Sized>(
    config: &WalkConfig<T>,
    rng: &mut R,
    box_radius: Option<i64>,
) -> Option<LocalTimeField<T>> {
    let dim = config.dim;
    let mut stop = config.horizon;
    if let Some(rate) = config.stop_rate {
        let tau = T::lit(exponential(rng, rate.to_f64_lossy()));
        stop = stop.min(tau);
    }
    let mut field = LocalTimeField::empty(dim, config.geometry());
    let jump_rate = 2.0 * dim as f64;
    let side = config.torus.map(|r| r as i64);
    let mut pos = origin(dim);
    let mut now = T::zero();
    loop {
        let hold = T::lit(exponential(rng, jump_rate));
        if now + hold >= stop {
            field.credit(&pos, stop - now);
            break;
        }
        field.credit(&pos, hold);
        now = now + hold;
        let k = rng.random_range(0..2 * dim);
        let axis = k / 2;
        let delta = if k % 2 == 0 { 1 } else { -1 };
        pos[axis] += delta;
        if let Some(r) = side {
            pos[axis] = pos[axis].rem_euclid(r);
        }
        field.jumps += 1;
        if let Some(l) = box_radius {
            if pos[axis].abs() > l {
                return None;
            }
        }
    }
    field.elapsed = stop;
    Some(field)
}
