//! Poisedness, secant fitting and cone geometry for `n+1` lattice points.
//!
//! Everything here works from one Householder QR factorization of the
//! transposed interpolation matrix `[X e]^T`. The secant comes from a
//! triangular solve against `R^T`; the `n+1` facet halfspaces are the columns
//! of `[X e]^{-1} = Q R^{-T}`, which makes each facet vanish on the other `n`
//! points and evaluate to exactly one at its own point. With that
//! normalization the facet values of a point `x` are its barycentric
//! coordinates, so a point lies in the cone anchored at `x^j` exactly when
//! every other coordinate is nonpositive.

use thiserror::Error;

use crate::lattice::LatticePoint;

/// Relative threshold on the diagonal of `R` below which a set is degenerate.
pub const POISED_TOL: f64 = 1e-8;
/// Slack allowed on a normalized facet value when testing `h(x) <= 0`.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("need exactly {expected} points, got {got}")]
    WrongPointCount { expected: usize, got: usize },
    #[error("point set is not poised")]
    NotPoised,
    #[error("interpolation system is singular")]
    SingularSystem,
    #[error("point lies in cones {first} and {second}; membership tolerance is too loose")]
    AmbiguousMembership { first: usize, second: usize },
}

/// Reusable dense factorization of `[X e]^T` for `m = n+1` points.
///
/// Matrices are stored column-major. This is the allocation-free kernel the
/// solver runs once per candidate combination.
#[derive(Debug, Clone)]
pub(crate) struct SimplexKernel {
    m: usize,
    /// Overwritten by `R` after `factor`.
    r: Vec<f64>,
    q: Vec<f64>,
    v: Vec<f64>,
    y: Vec<f64>,
}

impl SimplexKernel {
    pub(crate) fn new(dim: usize) -> Self {
        let m = dim + 1;
        Self { m, r: vec![0.0; m * m], q: vec![0.0; m * m], v: vec![0.0; m], y: vec![0.0; m] }
    }

    pub(crate) fn dim(&self) -> usize {
        self.m - 1
    }

    /// Factor the matrix whose column `j` is `(x^j, 1)`. Returns whether the
    /// points are poised at relative tolerance `tol`.
    pub(crate) fn factor<'a>(&mut self, points: impl Iterator<Item = &'a [f64]>, tol: f64) -> bool {
        let m = self.m;
        let mut cols = 0;
        for (j, p) in points.enumerate() {
            debug_assert_eq!(p.len(), m - 1);
            self.r[j * m..j * m + m - 1].copy_from_slice(p);
            self.r[j * m + m - 1] = 1.0;
            cols += 1;
        }
        debug_assert_eq!(cols, m);
        self.q.iter_mut().for_each(|e| *e = 0.0);
        for i in 0..m {
            self.q[i + i * m] = 1.0;
        }
        for k in 0..m.saturating_sub(1) {
            let norm = (k..m).map(|i| self.r[i + k * m].powi(2)).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if self.r[k + k * m] > 0.0 { -norm } else { norm };
            for i in k..m {
                self.v[i] = self.r[i + k * m];
            }
            self.v[k] -= alpha;
            let vv: f64 = (k..m).map(|i| self.v[i] * self.v[i]).sum();
            if vv == 0.0 {
                continue;
            }
            let scale = 2.0 / vv;
            for j in k..m {
                let s: f64 = (k..m).map(|i| self.v[i] * self.r[i + j * m]).sum::<f64>() * scale;
                for i in k..m {
                    self.r[i + j * m] -= s * self.v[i];
                }
            }
            for i in 0..m {
                let s: f64 = (k..m).map(|l| self.q[i + l * m] * self.v[l]).sum::<f64>() * scale;
                for l in k..m {
                    self.q[i + l * m] -= s * self.v[l];
                }
            }
        }
        let mut scale = 0.0f64;
        for j in 0..m {
            for i in 0..=j {
                scale = scale.max(self.r[i + j * m].abs());
            }
        }
        scale > 0.0 && (0..m).all(|k| self.r[k + k * m].abs() >= tol * scale)
    }

    /// Solve `R^T y = rhs` into `self.y`.
    fn solve_rt(&mut self, rhs: impl Fn(usize) -> f64) {
        let m = self.m;
        for i in 0..m {
            let mut s = rhs(i);
            for k in 0..i {
                s -= self.r[k + i * m] * self.y[k];
            }
            self.y[i] = s / self.r[i + i * m];
        }
    }

    /// Secant coefficients `(c, b)` written to `out[..n]` and `out[n]`.
    pub(crate) fn secant(&mut self, fvals: &[f64], out: &mut [f64]) {
        let m = self.m;
        self.solve_rt(|i| fvals[i]);
        for (i, o) in out.iter_mut().enumerate().take(m) {
            *o = (0..m).map(|k| self.q[i + k * m] * self.y[k]).sum();
        }
    }

    /// Facet rows `(c^j, b^j)` written row-major into `out` (`m*m` entries).
    pub(crate) fn facets(&mut self, out: &mut [f64]) {
        let m = self.m;
        for j in 0..m {
            self.solve_rt(|i| if i == j { 1.0 } else { 0.0 });
            for i in 0..m {
                out[j * m + i] = (0..m).map(|k| self.q[i + k * m] * self.y[k]).sum();
            }
        }
    }

    pub(crate) fn r_diagonal(&self) -> Vec<f64> {
        (0..self.m).map(|k| self.r[k + k * self.m]).collect()
    }
}

/// `n+1` affinely independent points together with their QR factors.
#[derive(Debug, Clone)]
pub struct PoisedSet {
    points: Vec<LatticePoint>,
    kernel: SimplexKernel,
}

impl PoisedSet {
    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    /// Diagonal of the triangular factor.
    pub fn r_diagonal(&self) -> Vec<f64> {
        self.kernel.r_diagonal()
    }
}

/// Check that `points` (exactly `n+1` of them) are poised.
pub fn check_poised(points: &[LatticePoint], tol: f64) -> Result<PoisedSet, GeometryError> {
    let dim = points.first().map_or(0, LatticePoint::dim);
    for (index, p) in points.iter().enumerate() {
        if p.dim() != dim {
            return Err(GeometryError::DimensionMismatch { index, expected: dim, got: p.dim() });
        }
    }
    if points.len() != dim + 1 || dim == 0 {
        return Err(GeometryError::WrongPointCount { expected: dim + 1, got: points.len() });
    }
    let floats: Vec<Vec<f64>> = points.iter().map(|p| p.0.iter().map(|&c| c as f64).collect()).collect();
    let mut kernel = SimplexKernel::new(dim);
    if kernel.factor(floats.iter().map(Vec::as_slice), tol) {
        Ok(PoisedSet { points: points.to_vec(), kernel })
    } else {
        Err(GeometryError::NotPoised)
    }
}

/// Linear interpolant `m(x) = c^T x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Secant {
    pub c: Vec<f64>,
    pub b: f64,
}

impl Secant {
    pub fn value(&self, x: &[i64]) -> f64 {
        self.value_f64(x.iter().map(|&v| v as f64))
    }

    pub(crate) fn value_f64(&self, x: impl Iterator<Item = f64>) -> f64 {
        self.c.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.b
    }
}

/// Fit the secant through `ps` with `fvals[j] = f(points[j])`.
pub fn fit_secant(ps: &PoisedSet, fvals: &[f64]) -> Result<Secant, GeometryError> {
    let m = ps.dim() + 1;
    if fvals.len() != m {
        return Err(GeometryError::WrongPointCount { expected: m, got: fvals.len() });
    }
    let mut kernel = ps.kernel.clone();
    let mut out = vec![0.0; m];
    kernel.secant(fvals, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::SingularSystem);
    }
    let b = out.pop().unwrap();
    Ok(Secant { c: out, b })
}

/// One facet hyperplane `c^T x + b`, scaled to equal 1 at the excluded point.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn value(&self, x: &[i64]) -> f64 {
        self.normal.iter().zip(x).map(|(c, &v)| c * v as f64).sum::<f64>() + self.offset
    }
}

/// The `n+1` facets describing the union of cones of a poised set.
#[derive(Debug, Clone)]
pub struct ConeComplex {
    halfspaces: Vec<Halfspace>,
    tol: f64,
}

impl ConeComplex {
    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn len(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halfspaces.is_empty()
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }
}

pub fn facet_halfspaces(ps: &PoisedSet) -> ConeComplex {
    let m = ps.dim() + 1;
    let mut kernel = ps.kernel.clone();
    let mut rows = vec![0.0; m * m];
    kernel.facets(&mut rows);
    let halfspaces = rows
        .chunks_exact(m)
        .map(|r| Halfspace { normal: r[..m - 1].to_vec(), offset: r[m - 1] })
        .collect();
    ConeComplex { halfspaces, tol: MEMBERSHIP_TOL }
}

/// Is `x` in the cone anchored at point `j`, i.e. inside every other facet?
pub fn cone_membership(x: &LatticePoint, cc: &ConeComplex, j: usize) -> bool {
    cc.halfspaces
        .iter()
        .enumerate()
        .all(|(l, h)| l == j || h.value(x.coords()) <= cc.tol)
}

/// The unique cone of the complex containing `x`, if any.
pub fn locate_in_union(x: &LatticePoint, cc: &ConeComplex) -> Result<Option<usize>, GeometryError> {
    let mut found: Option<usize> = None;
    for j in 0..cc.len() {
        if cone_membership(x, cc, j) {
            if let Some(first) = found {
                return Err(GeometryError::AmbiguousMembership { first, second: j });
            }
            found = Some(j);
        }
    }
    Ok(found)
}

/// Fast union test on raw facet rows: since the facet values sum to one,
/// `x` is in cone `j` iff `j` is the only index with a positive value.
/// Returns `None` when zero or several values are positive.
#[inline]
pub(crate) fn locate_fast(facets: &[f64], m: usize, x: &[f64], tol: f64) -> Option<usize> {
    let mut hit = None;
    for (l, row) in facets.chunks_exact(m).enumerate() {
        let h = row[..m - 1].iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + row[m - 1];
        if h > tol {
            if hit.is_some() {
                return None;
            }
            hit = Some(l);
        }
    }
    hit
}
