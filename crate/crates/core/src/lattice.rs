//! Integer points and the finite feasible set they live in.
//!
//! A [`Domain`] is a box `[lower, upper]` intersected with the integer
//! lattice, optionally thinned by a membership mask so that the feasible set
//! need not be every lattice point of its convex hull. Points are enumerated
//! lexicographically with the lowest coordinate varying fastest; that order is
//! the tie-break order used everywhere else in the crate.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point of `Z^n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn new(coords: Vec<i64>) -> Self {
        Self(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    /// The all-`value` vector (`2e` is `splat(n, 2)`).
    pub fn splat(dim: usize, value: i64) -> Self {
        Self(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// `self + step * e_axis`.
    pub fn offset(&self, axis: usize, step: i64) -> Self {
        let mut c = self.0.clone();
        c[axis] += step;
        Self(c)
    }

    pub fn linf_distance(&self, other: &LatticePoint) -> i64 {
        linf(&self.0, &other.0)
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

pub(crate) fn linf(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("lower and upper bounds have different lengths ({0} vs {1})")]
    BoundLength(usize, usize),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("lower bound {lower} exceeds upper bound {upper} in coordinate {axis}")]
    InvertedBounds { axis: usize, lower: i64, upper: i64 },
    #[error("box contains too many points to enumerate")]
    TooLarge,
    #[error("membership mask has {got} entries, box has {expected}")]
    MaskLength { got: usize, expected: usize },
    #[error("membership mask leaves the domain empty")]
    Empty,
}

/// Finite feasible set `Ω = [lower, upper] ∩ Z^n` (optionally masked).
#[derive(Debug, Clone)]
pub struct Domain {
    lower: Vec<i64>,
    upper: Vec<i64>,
    /// Row-major coordinates of every feasible point in enumeration order.
    coords: Vec<i64>,
    /// Same as `coords`, as floats, for the dot products in the hot loops.
    coords_f64: Vec<f64>,
    /// Box linear index -> position in `coords` (`u32::MAX` if masked out).
    box_to_omega: Option<Vec<u32>>,
}

/// Largest box we are willing to enumerate at all; the eta table has its own,
/// tighter memory budget.
const MAX_BOX_POINTS: u128 = 1 << 31;

impl Domain {
    pub fn new(lower: Vec<i64>, upper: Vec<i64>) -> Result<Self, DomainError> {
        Self::build(lower, upper, None)
    }

    /// `[lo, hi]^n`.
    pub fn cube(dim: usize, lo: i64, hi: i64) -> Result<Self, DomainError> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// A box restricted to the points where `mask` (indexed in box
    /// enumeration order) is true.
    pub fn with_mask(lower: Vec<i64>, upper: Vec<i64>, mask: Vec<bool>) -> Result<Self, DomainError> {
        Self::build(lower, upper, Some(mask))
    }

    /// A box restricted by a predicate on points.
    pub fn filtered(
        lower: Vec<i64>,
        upper: Vec<i64>,
        keep: impl Fn(&[i64]) -> bool,
    ) -> Result<Self, DomainError> {
        let full = Self::new(lower.clone(), upper.clone())?;
        let mask = (0..full.len()).map(|i| keep(full.point_slice(i))).collect();
        Self::with_mask(lower, upper, mask)
    }

    fn build(lower: Vec<i64>, upper: Vec<i64>, mask: Option<Vec<bool>>) -> Result<Self, DomainError> {
        if lower.len() != upper.len() {
            return Err(DomainError::BoundLength(lower.len(), upper.len()));
        }
        if lower.is_empty() {
            return Err(DomainError::ZeroDimension);
        }
        let mut total: u128 = 1;
        for (axis, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if lo > hi {
                return Err(DomainError::InvertedBounds { axis, lower: lo, upper: hi });
            }
            total = total.saturating_mul((hi - lo + 1) as u128);
            if total > MAX_BOX_POINTS {
                return Err(DomainError::TooLarge);
            }
        }
        let total = total as usize;
        if let Some(m) = &mask {
            if m.len() != total {
                return Err(DomainError::MaskLength { got: m.len(), expected: total });
            }
        }
        let n = lower.len();
        let kept = mask.as_ref().map_or(total, |m| m.iter().filter(|&&b| b).count());
        if kept == 0 {
            return Err(DomainError::Empty);
        }
        let mut coords = Vec::with_capacity(kept * n);
        let mut box_to_omega = mask.as_ref().map(|_| vec![u32::MAX; total]);
        let mut cur = lower.clone();
        let mut pos = 0u32;
        for lin in 0..total {
            let keep = mask.as_ref().map_or(true, |m| m[lin]);
            if keep {
                coords.extend_from_slice(&cur);
                if let Some(b) = box_to_omega.as_mut() {
                    b[lin] = pos;
                }
                pos += 1;
            }
            // lowest coordinate fastest
            for axis in 0..n {
                if cur[axis] < upper[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = lower[axis];
            }
        }
        let coords_f64 = coords.iter().map(|&c| c as f64).collect();
        Ok(Self { lower, upper, coords, coords_f64, box_to_omega })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Number of feasible points `|Ω|`.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn upper(&self) -> &[i64] {
        &self.upper
    }

    pub fn is_masked(&self) -> bool {
        self.box_to_omega.is_some()
    }

    pub fn point_slice(&self, idx: usize) -> &[i64] {
        let n = self.dim();
        &self.coords[idx * n..(idx + 1) * n]
    }

    pub(crate) fn point_f64(&self, idx: usize) -> &[f64] {
        let n = self.dim();
        &self.coords_f64[idx * n..(idx + 1) * n]
    }

    pub fn point(&self, idx: usize) -> LatticePoint {
        LatticePoint(self.point_slice(idx).to_vec())
    }

    pub fn in_box(&self, x: &[i64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, lo), hi)| lo <= v && v <= hi)
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.index_of(x).is_some()
    }

    /// Position of `x` in the enumeration order, if feasible.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.in_box(x) {
            return None;
        }
        let mut lin = 0usize;
        let mut stride = 1usize;
        for axis in 0..self.dim() {
            lin += (x[axis] - self.lower[axis]) as usize * stride;
            stride *= (self.upper[axis] - self.lower[axis] + 1) as usize;
        }
        match &self.box_to_omega {
            None => Some(lin),
            Some(map) => match map[lin] {
                u32::MAX => None,
                p => Some(p as usize),
            },
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> + '_ {
        self.coords.chunks_exact(self.dim())
    }

    /// Componentwise midpoint of the box, rounded toward zero.
    pub fn midpoint(&self) -> LatticePoint {
        LatticePoint(self.lower.iter().zip(&self.upper).map(|(&lo, &hi)| (lo + hi) / 2).collect())
    }

    /// Largest ∞-norm distance between two points of the box.
    pub fn linf_diameter(&self) -> i64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_lowest_coordinate_fastest() {
        let d = Domain::new(vec![0, 0], vec![1, 2]).unwrap();
        let pts: Vec<_> = d.iter().map(|p| p.to_vec()).collect();
        assert_eq!(pts, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1], vec![0, 2], vec![1, 2]]);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(d.index_of(p), Some(i));
        }
        assert_eq!(d.index_of(&[2, 0]), None);
    }

    #[test]
    fn sizes_of_the_cubes() {
        assert_eq!(Domain::cube(3, -4, 4).unwrap().len(), 729);
        assert_eq!(Domain::cube(5, -4, 4).unwrap().len(), 59_049);
        assert_eq!(Domain::cube(1, 0, 0).unwrap().len(), 1);
    }

    #[test]
    fn masked_domain_reindexes() {
        let d = Domain::filtered(vec![0, 0], vec![2, 2], |x| (x[0] + x[1]) % 2 == 0).unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(d.index_of(&[1, 0]), None);
        assert_eq!(d.index_of(&[1, 1]), Some(2));
        assert_eq!(d.point_slice(2), &[1, 1]);
    }

    #[test]
    fn rejects_bad_boxes() {
        assert_eq!(Domain::new(vec![1], vec![0]).unwrap_err(), DomainError::InvertedBounds { axis: 0, lower: 1, upper: 0 });
        assert_eq!(Domain::new(vec![], vec![]).unwrap_err(), DomainError::ZeroDimension);
        assert_eq!(Domain::filtered(vec![0], vec![3], |_| false).unwrap_err(), DomainError::Empty);
    }

    #[test]
    fn midpoint_rounds_toward_zero() {
        assert_eq!(Domain::new(vec![-4, -3, 0], vec![4, 0, 3]).unwrap().midpoint().0, vec![0, -1, 1]);
    }
}
