//! Self- and mutual-intersection local times, and folding onto the torus.

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::lattice::{Geometry, TorusShape};
use crate::scalar::{adaptive_sum, pow, Real};
use crate::walk::LocalTimeField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntersectionKind {
    SelfIntersection,
    Mutual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntersectionValue<T> {
    pub value: T,
    pub exponent: T,
    pub kind: IntersectionKind,
}

/// I = Σ_x l(x)^q for q > 1.
pub fn silt<T: Real>(field: &LocalTimeField<T>, q: T) -> Result<IntersectionValue<T>> {
    if !(q > T::one()) || !q.is_finite() {
        return param(format!("self-intersection exponent must exceed 1, got {q}"));
    }
    Ok(IntersectionValue {
        value: power_sum(field, q),
        exponent: q,
        kind: IntersectionKind::SelfIntersection,
    })
}

/// Σ_x l(x)^q for any q > 0; at q = 1 this is the total mass.
///
/// Terms are summed in ascending order so that equal multisets of masses give
/// bit-identical sums whatever the storage layout.
pub fn power_sum<T: Real>(field: &LocalTimeField<T>, q: T) -> T {
    let mut terms: Vec<T> = field.masses().into_iter().map(|m| pow(m, q)).collect();
    terms.sort_by(|a, b| a.partial_cmp(b).expect("finite masses"));
    adaptive_sum(&terms)
}

/// ‖l‖_q = (Σ_x l(x)^q)^{1/q}.
pub fn lq_norm<T: Real>(field: &LocalTimeField<T>, q: T) -> T {
    power_sum(field, q).powf(q.recip())
}

/// Q = Σ_x Π_i l⁽ⁱ⁾(x) over q ≥ 2 fields sharing dimension and geometry.
pub fn milt<T: Real>(fields: &[LocalTimeField<T>]) -> Result<IntersectionValue<T>> {
    if fields.len() < 2 {
        return param(format!(
            "mutual intersection needs at least 2 fields, got {}",
            fields.len()
        ));
    }
    let first = &fields[0];
    for f in &fields[1..] {
        if f.dim() != first.dim() || f.geometry() != first.geometry() {
            return Err(Error::Parameter(format!(
                "fields disagree: ({}, {:?}) vs ({}, {:?})",
                first.dim(),
                first.geometry(),
                f.dim(),
                f.geometry()
            )));
        }
    }
    let exponent = T::from_usize_lossy(fields.len());
    let dense: Option<Vec<&[T]>> = fields.iter().map(|f| f.dense_slice()).collect();
    let terms: Vec<T> = match dense {
        Some(slices) => (0..slices[0].len())
            .map(|i| slices.iter().fold(T::one(), |acc, s| acc * s[i]))
            .filter(|v| *v > T::zero())
            .collect(),
        None => {
            let smallest = fields
                .iter()
                .min_by_key(|f| f.support_len())
                .expect("at least two fields");
            smallest
                .entries()
                .into_iter()
                .map(|(site, _)| fields.iter().fold(T::one(), |acc, f| acc * f.mass_at(&site)))
                .filter(|v| *v > T::zero())
                .collect()
        }
    };
    Ok(IntersectionValue {
        value: adaptive_sum(&terms),
        exponent,
        kind: IntersectionKind::Mutual,
    })
}

/// Fold a ℤᵈ field onto 𝕋_R: mass at x is Σ_k l(x + kR).
pub fn fold<T: Real>(field: &LocalTimeField<T>, side: usize) -> Result<LocalTimeField<T>> {
    if side < 1 {
        return param("torus side must be at least 1");
    }
    if field.geometry() != Geometry::Lattice {
        return param("only lattice fields can be folded");
    }
    let shape = TorusShape::new(field.dim(), side);
    let mut folded = LocalTimeField::from_masses(
        field.dim(),
        Geometry::Torus(side),
        field
            .entries()
            .into_iter()
            .map(|(site, m)| (shape.reduce(&site), m)),
    )?;
    folded.set_elapsed(field.elapsed());
    Ok(folded)
}
