//! Sites of ℤᵈ and of the discrete torus 𝕋_R, and the row-major layout used
//! for every dense per-site array in the crate.

use smallvec::SmallVec;

/// A lattice site: one integer coordinate per axis.
pub type Site = SmallVec<[i64; 4]>;

pub fn origin(dim: usize) -> Site {
    smallvec::smallvec![0; dim]
}

/// Where a field lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Geometry {
    Lattice,
    Torus(usize),
}

/// Tori with at most this many sites get dense per-site storage.
pub const DENSE_TORUS_LIMIT: usize = 1 << 24;

/// Shape of 𝕋_Rᵈ with a row-major flattening (axis 0 most significant).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusShape {
    pub dim: usize,
    pub side: usize,
}

impl TorusShape {
    pub fn new(dim: usize, side: usize) -> Self {
        Self { dim, side }
    }

    /// Rᵈ, or `None` on overflow.
    pub fn checked_len(&self) -> Option<usize> {
        let mut n: usize = 1;
        for _ in 0..self.dim {
            n = n.checked_mul(self.side)?;
        }
        Some(n)
    }

    pub fn len(&self) -> usize {
        self.checked_len().expect("torus size overflows usize")
    }

    pub fn is_empty(&self) -> bool {
        self.side == 0
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.checked_len(), Some(n) if n <= DENSE_TORUS_LIMIT)
    }

    pub fn reduce(&self, site: &[i64]) -> Site {
        let r = self.side as i64;
        site.iter().map(|&x| x.rem_euclid(r)).collect()
    }

    /// Flat index of a site; coordinates are reduced mod R first.
    pub fn index(&self, site: &[i64]) -> usize {
        let r = self.side as i64;
        site.iter()
            .fold(0usize, |acc, &x| acc * self.side + x.rem_euclid(r) as usize)
    }

    pub fn site(&self, mut index: usize) -> Site {
        let mut out: Site = smallvec::smallvec![0; self.dim];
        for axis in (0..self.dim).rev() {
            out[axis] = (index % self.side) as i64;
            index /= self.side;
        }
        out
    }

    /// Stride of `axis` in the flat layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    /// Index of the neighbour of `index` one step along `axis` in direction
    /// `+1` (`forward`) or `-1`.
    #[inline]
    pub fn step(&self, index: usize, axis: usize, forward: bool) -> usize {
        let stride = self.stride(axis);
        let coord = (index / stride) % self.side;
        let next = if forward {
            if coord + 1 == self.side {
                0
            } else {
                coord + 1
            }
        } else if coord == 0 {
            self.side - 1
        } else {
            coord - 1
        };
        index - coord * stride + next * stride
    }
}

/// Sup norm of a site.
pub fn sup_norm(site: &[i64]) -> i64 {
    site.iter().map(|x| x.abs()).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let shape = TorusShape::new(3, 5);
        for i in 0..shape.len() {
            assert_eq!(shape.index(&shape.site(i)), i);
        }
        assert_eq!(shape.index(&[-1, 5, 6]), shape.index(&[4, 0, 1]));
    }

    #[test]
    fn steps_wrap_around() {
        let shape = TorusShape::new(2, 3);
        let i = shape.index(&[2, 0]);
        assert_eq!(shape.site(shape.step(i, 0, true)).as_slice(), &[0, 0]);
        assert_eq!(shape.site(shape.step(i, 1, false)).as_slice(), &[2, 2]);
        let one = TorusShape::new(2, 1);
        assert_eq!(one.step(0, 1, true), 0);
    }
}
