//! Discretized Hilbert space and subspace algebra.
//!
//! A [`GridSpace`] realizes the state space as grid functions with a diagonal
//! quadrature inner product `<u, v> = sum_i w_i u_i v_i`. All subspace work
//! happens in the scaled frame `u -> W^{1/2} u`, where the weighted geometry
//! becomes Euclidean and plain SVD / eigen factorizations apply.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

/// Element of a [`GridSpace`]: one real coefficient per grid node.
pub type HVector = DVector<f64>;

/// Default relative rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug)]
struct GridInner {
    points: Vec<f64>,
    weights: Vec<f64>,
    sqrt_weights: Vec<f64>,
    label: String,
}

/// Grid plus positive quadrature weights. Cheap to clone.
#[derive(Clone)]
pub struct GridSpace {
    inner: Arc<GridInner>,
}

impl fmt::Debug for GridSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridSpace")
            .field("label", &self.inner.label)
            .field("dim", &self.dim())
            .finish()
    }
}

impl PartialEq for GridSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.points == other.inner.points
                && self.inner.weights == other.inner.weights)
    }
}

impl GridSpace {
    pub fn new(points: Vec<f64>, weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes, got {}",
                points.len()
            )));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidGrid(format!(
                "{} nodes but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("non-finite grid node".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidGrid("quadrature weights must be positive".into()));
        }
        let sqrt_weights = weights.iter().map(|w| w.sqrt()).collect();
        Ok(Self {
            inner: Arc::new(GridInner {
                points,
                weights,
                sqrt_weights,
                label: label.into(),
            }),
        })
    }

    /// `R^n` with the Euclidean inner product (nodes `0, 1, ..., n-1`).
    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(
            (0..n).map(|i| i as f64).collect(),
            vec![1.0; n],
            format!("R^{n}"),
        )
    }

    /// Trapezoidal weights on an arbitrary increasing grid.
    pub fn trapezoid(points: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {n}")));
        }
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let h = points[i + 1] - points[i];
            weights[i] += 0.5 * h;
            weights[i + 1] += 0.5 * h;
        }
        Self::new(points, weights, label)
    }

    /// `n` Chebyshev–Lobatto nodes on `[0, xi_max]` with trapezoidal weights.
    /// Nodes cluster at both ends of the interval.
    pub fn chebyshev(n: usize, xi_max: f64, label: impl Into<String>) -> Result<Self> {
        if n < 2 || !(xi_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "chebyshev grid needs n >= 2 and xi_max > 0 (got n = {n}, xi_max = {xi_max})"
            )));
        }
        let last = (n - 1) as f64;
        let mut points: Vec<f64> = (0..n)
            .map(|k| 0.5 * xi_max * (1.0 - (std::f64::consts::PI * k as f64 / last).cos()))
            .collect();
        points[0] = 0.0;
        points[n - 1] = xi_max;
        Self::trapezoid(points, label)
    }

    pub fn dim(&self) -> usize {
        self.inner.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.inner.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.inner.weights
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub fn zeros(&self) -> HVector {
        HVector::zeros(self.dim())
    }

    /// Samples a function at the grid nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> HVector {
        HVector::from_iterator(self.dim(), self.points().iter().map(|&x| f(x)))
    }

    pub fn check(&self, v: &HVector) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    pub fn inner(&self, u: &HVector, v: &HVector) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self
            .weights()
            .iter()
            .zip(u.iter().zip(v.iter()))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    /// Quadrature norm. Panics if `v` does not belong to this space.
    pub fn norm(&self, v: &HVector) -> f64 {
        assert_eq!(v.len(), self.dim(), "vector does not belong to {}", self.label());
        self.weights()
            .iter()
            .zip(v.iter())
            .map(|(w, a)| w * a * a)
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, u: &HVector, v: &HVector) -> f64 {
        self.norm(&(u - v))
    }

    pub(crate) fn to_frame(&self, v: &HVector) -> HVector {
        v.component_mul(&HVector::from_column_slice(&self.inner.sqrt_weights))
    }

    pub(crate) fn from_frame(&self, v: &HVector) -> HVector {
        HVector::from_iterator(
            self.dim(),
            v.iter()
                .zip(self.inner.sqrt_weights.iter())
                .map(|(a, s)| a / s),
        )
    }

    fn matrix_to_frame(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (i, s) in self.inner.sqrt_weights.iter().enumerate() {
            out.row_mut(i).scale_mut(*s);
        }
        out
    }

    fn matrix_from_frame(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        for (i, s) in self.inner.sqrt_weights.iter().enumerate() {
            out.row_mut(i).unscale_mut(*s);
        }
        out
    }
}

/// Finite-dimensional subspace held through a `<.,.>`-orthonormal basis.
///
/// Internally the basis is stored in the scaled frame, where its columns are
/// Euclidean-orthonormal.
#[derive(Clone, Debug)]
pub struct Subspace {
    space: GridSpace,
    frame: DMatrix<f64>,
    tol: f64,
}

impl Subspace {
    pub fn zero(space: &GridSpace) -> Self {
        Self {
            space: space.clone(),
            frame: DMatrix::zeros(space.dim(), 0),
            tol: DEFAULT_RANK_TOL,
        }
    }

    pub fn whole(space: &GridSpace) -> Self {
        Self {
            space: space.clone(),
            frame: DMatrix::identity(space.dim(), space.dim()),
            tol: DEFAULT_RANK_TOL,
        }
    }

    fn from_frame(space: &GridSpace, frame: DMatrix<f64>, tol: f64) -> Self {
        Self {
            space: space.clone(),
            frame,
            tol,
        }
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn space(&self) -> &GridSpace {
        &self.space
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `n x d` basis matrix with `<.,.>`-orthonormal columns.
    pub fn basis(&self) -> DMatrix<f64> {
        self.space.matrix_from_frame(&self.frame)
    }

    pub fn basis_vector(&self, i: usize) -> HVector {
        self.space.from_frame(&self.frame.column(i).into_owned())
    }

    fn check_space(&self, other: &Subspace) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.dim(),
                found: other.space.dim(),
            });
        }
        Ok(())
    }

    /// Largest entry of `B^T W B - I`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.frame.transpose() * &self.frame;
        let d = self.dim();
        (g - DMatrix::identity(d, d)).amax()
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, v: &HVector) -> Result<HVector> {
        self.space.check(v)?;
        if self.dim() == 0 {
            return Ok(self.space.zeros());
        }
        let x = self.space.to_frame(v);
        let coeffs = self.frame.tr_mul(&x);
        Ok(self.space.from_frame(&(&self.frame * coeffs)))
    }

    /// Coordinates of the projection in the orthonormal basis.
    pub fn coordinates(&self, v: &HVector) -> Result<DVector<f64>> {
        self.space.check(v)?;
        Ok(self.frame.tr_mul(&self.space.to_frame(v)))
    }

    /// `|(I - P) v|`, the distance from `v` to the subspace.
    pub fn residual_norm(&self, v: &HVector) -> Result<f64> {
        let p = self.project(v)?;
        Ok(self.space.distance(v, &p))
    }

    /// Orthogonal complement; its dimension is exactly `n - dim`.
    pub fn complement(&self) -> Subspace {
        let n = self.space.dim();
        let d = self.dim();
        if d == 0 {
            return Subspace::whole(&self.space);
        }
        if d >= n {
            return Subspace::zero(&self.space);
        }
        let q = DMatrix::identity(n, n) - &self.frame * self.frame.transpose();
        let eig = SymmetricEigen::new(q);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let cols: Vec<_> = order[..n - d]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        Subspace::from_frame(&self.space, DMatrix::from_columns(&cols), self.tol)
    }

    /// `(I - P) F` for a frame matrix `F` (scaled coordinates).
    fn reject_frame(&self, f: &DMatrix<f64>) -> DMatrix<f64> {
        if self.dim() == 0 {
            return f.clone();
        }
        f - &self.frame * self.frame.tr_mul(f)
    }
}

fn ordered_svd(m: DMatrix<f64>) -> (Vec<f64>, Option<DMatrix<f64>>, Option<DMatrix<f64>>) {
    let svd = SVD::new(m, true, true);
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let u = svd
        .u
        .map(|u| DMatrix::from_columns(&idx.iter().map(|&i| u.column(i)).collect::<Vec<_>>()));
    let v = svd.v_t.map(|vt| {
        let vt_rows: Vec<_> = idx.iter().map(|&i| vt.row(i).transpose()).collect();
        DMatrix::from_columns(&vt_rows)
    });
    (sv, u, v)
}

/// Orthonormal basis for the numerical span of `vectors`.
///
/// Directions with singular value `<= tol * sigma_max` are dropped. An
/// all-zero input gives the zero subspace.
pub fn orthonormalize(space: &GridSpace, vectors: &[HVector], tol: f64) -> Result<Subspace> {
    if vectors.is_empty() {
        return Err(Error::config("orthonormalize needs at least one vector"));
    }
    if !(tol > 0.0) {
        return Err(Error::config(format!("rank tolerance must be positive, got {tol}")));
    }
    for v in vectors {
        space.check(v)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric("non-finite vector passed to orthonormalize"));
        }
    }
    let cols: Vec<HVector> = vectors.iter().map(|v| space.to_frame(v)).collect();
    let m = DMatrix::from_columns(&cols);
    if m.amax() == 0.0 {
        return Ok(Subspace {
            tol,
            ..Subspace::zero(space)
        });
    }
    let (sv, u, _) = ordered_svd(m);
    let u = u.expect("svd with u requested");
    let cutoff = tol * sv[0];
    let rank = sv.iter().take_while(|&&s| s > cutoff).count();
    Ok(Subspace::from_frame(space, u.columns(0, rank).into_owned(), tol))
}

/// Orthonormal basis for the column space of an `n x m` matrix of grid vectors.
/// Returns the basis together with the rank-revealing singular values of the
/// weighted columns, in descending order.
pub fn orthonormalize_columns(
    space: &GridSpace,
    columns: &DMatrix<f64>,
    tol: f64,
) -> Result<(Subspace, Vec<f64>)> {
    if columns.nrows() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            found: columns.nrows(),
        });
    }
    if columns.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite matrix passed to orthonormalize"));
    }
    if columns.ncols() == 0 || columns.amax() == 0.0 {
        return Ok((
            Subspace {
                tol,
                ..Subspace::zero(space)
            },
            vec![0.0; columns.ncols()],
        ));
    }
    let (sv, u, _) = ordered_svd(space.matrix_to_frame(columns));
    let u = u.expect("svd with u requested");
    let cutoff = tol * sv[0];
    let rank = sv.iter().take_while(|&&s| s > cutoff).count();
    Ok((Subspace::from_frame(space, u.columns(0, rank).into_owned(), tol), sv))
}

/// Singular values, ascending, of the rejections of an orthonormal basis of
/// `base` from each of `others`, stacked and scaled by `1/sqrt(others.len())`.
///
/// A value near zero marks a direction of `base` contained in every other
/// space; all values lie in `[0, 1]`.
pub fn rejection_spectrum(base: &Subspace, others: &[Subspace]) -> Result<Vec<f64>> {
    let d = base.dim();
    if d == 0 || others.is_empty() {
        return Ok(vec![0.0; d]);
    }
    let n = base.space.dim();
    let mut stacked = DMatrix::zeros(n * others.len(), d);
    for (j, s) in others.iter().enumerate() {
        base.check_space(s)?;
        stacked
            .view_mut((j * n, 0), (n, d))
            .copy_from(&s.reject_frame(&base.frame));
    }
    stacked /= (others.len() as f64).sqrt();
    let (mut sv, _, _) = ordered_svd(stacked);
    sv.reverse();
    Ok(sv)
}

/// Numerical rank of a set of vectors under the same threshold rule as
/// [`orthonormalize`].
pub fn numerical_rank(space: &GridSpace, vectors: &[HVector], tol: f64) -> Result<usize> {
    orthonormalize(space, vectors, tol).map(|s| s.dim())
}

fn intersect_pair(a: &Subspace, b: &Subspace, tol: f64) -> Subspace {
    let (small, large) = if a.dim() <= b.dim() { (a, b) } else { (b, a) };
    if small.dim() == 0 {
        return Subspace::from_frame(&a.space, DMatrix::zeros(a.space.dim(), 0), tol);
    }
    // Directions of `small` whose rejection from `large` vanishes.
    let rejected = large.reject_frame(&small.frame);
    let (sv, _, v) = ordered_svd(rejected);
    let v = v.expect("svd with v requested");
    let keep: Vec<_> = sv
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= tol)
        .map(|(i, _)| &small.frame * v.column(i))
        .collect();
    let frame = if keep.is_empty() {
        DMatrix::zeros(a.space.dim(), 0)
    } else {
        DMatrix::from_columns(&keep)
    };
    Subspace::from_frame(&a.space, frame, tol)
}

/// Restricts `candidate` to the directions whose rejection from every input
/// is at most `tol`, using one rank-revealing SVD of the stacked rejections.
fn refine(candidate: &Subspace, spaces: &[Subspace], tol: f64) -> Subspace {
    let d = candidate.dim();
    if d == 0 {
        return candidate.clone();
    }
    let n = candidate.space.dim();
    let mut stacked = DMatrix::zeros(n * spaces.len(), d);
    for (j, s) in spaces.iter().enumerate() {
        stacked
            .view_mut((j * n, 0), (n, d))
            .copy_from(&s.reject_frame(&candidate.frame));
    }
    let (sv, _, v) = ordered_svd(stacked);
    let v = v.expect("svd with v requested");
    let keep: Vec<_> = sv
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= tol)
        .map(|(i, _)| &candidate.frame * v.column(i))
        .collect();
    let frame = if keep.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&keep)
    };
    Subspace::from_frame(&candidate.space, frame, tol)
}

/// Common subspace of all inputs.
///
/// Folds pairwise from the left (each step keeps the directions of the
/// smaller space whose sine distance to the other is `<= tol`), then
/// re-checks the result against every input at once.
pub fn intersect(spaces: &[Subspace], tol: f64) -> Result<Subspace> {
    let first = spaces
        .first()
        .ok_or_else(|| Error::config("intersect needs at least one subspace"))?;
    for s in &spaces[1..] {
        first.check_space(s)?;
    }
    if spaces.len() == 1 {
        return Ok(first.clone());
    }
    let mut acc = first.clone();
    for s in &spaces[1..] {
        acc = intersect_pair(&acc, s, tol);
        if acc.dim() == 0 {
            return Ok(acc);
        }
    }
    Ok(refine(&acc, spaces, tol))
}

/// Principal angles in radians, ascending; `min(dim a, dim b)` values.
///
/// Small angles come from the sines (rejection singular values), large ones
/// from the cosines, so both ends of `[0, pi/2]` are resolved accurately.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    a.check_space(b)?;
    let (small, large) = if a.dim() <= b.dim() { (a, b) } else { (b, a) };
    let d = small.dim();
    if d == 0 || large.dim() == 0 {
        return Ok(Vec::new());
    }
    let (cosines, _, _) = ordered_svd(large.frame.tr_mul(&small.frame));
    let (mut sines, _, _) = ordered_svd(large.reject_frame(&small.frame));
    sines.reverse();
    let angles = (0..d)
        .map(|i| {
            let c = cosines.get(i).copied().unwrap_or(0.0).min(1.0);
            let s = sines.get(i).copied().unwrap_or(0.0).min(1.0);
            if c * c > 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect();
    Ok(angles)
}

/// Largest principal angle, or `0` when either space is trivial.
pub fn max_principal_angle(a: &Subspace, b: &Subspace) -> Result<f64> {
    Ok(principal_angles(a, b)?.into_iter().fold(0.0, f64::max))
}
