//! Weighted point sets and query vectors.

use crate::error::{Error, Result};
use crate::math;

/// A finite multiset of points in `R^dim` with positive weights.
///
/// Points are stored row-major in one flat buffer. Constructors enforce
/// the invariants once (finite coordinates, positive finite weights,
/// consistent dimension) so evaluation loops never re-validate.
///
/// ```
/// use coreset::set::WeightedPointSet;
///
/// let p = WeightedPointSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 2.0]], vec![1.0, 3.0])?;
/// assert_eq!(p.len(), 2);
/// assert_eq!(p.dim(), 2);
/// assert_eq!(p.point(1), &[0.0, 2.0]);
/// assert!(!p.is_unit_weighted());
/// # Ok::<(), coreset::Error>(())
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPointSet {
    dim: usize,
    data: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedPointSet {
    /// Empty set of the given positive dimension.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(Self { dim, data: Vec::new(), weights: Vec::new() })
    }

    /// Build from explicit rows and weights of equal length.
    pub fn from_rows(rows: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("from_rows needs at least one point"));
        }
        if rows.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} points but {} weights",
                rows.len(),
                weights.len()
            )));
        }
        let mut set = Self::new(rows[0].len())?;
        for (row, w) in rows.into_iter().zip(weights) {
            set.push(&row, w)?;
        }
        Ok(set)
    }

    /// Build a unit-weight set from rows.
    pub fn unit(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        Self::from_rows(rows, vec![1.0; n])
    }

    /// Append one weighted point.
    pub fn push(&mut self, point: &[f64], weight: f64) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        if !point.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("point coordinate".into()));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::invalid(format!("weight must be positive and finite, got {weight}")));
        }
        self.data.extend_from_slice(point);
        self.weights.push(weight);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// The `i`-th point as a slice.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Iterate `(point, weight)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.data.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// True when every weight is exactly 1.
    pub fn is_unit_weighted(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }

    /// Euclidean norms in storage order.
    pub fn norms(&self) -> Vec<f64> {
        self.data.chunks_exact(self.dim).map(math::norm).collect()
    }

    /// Total weight (compensated, storage order).
    pub fn total_weight(&self) -> f64 {
        math::kahan_sum(self.weights.iter().copied())
    }

    /// Sub-multiset of the given indices (duplicates allowed), keeping
    /// each index's point with the supplied weight.
    pub fn gather(&self, indices: &[usize], weights: &[f64]) -> Result<Self> {
        if indices.len() != weights.len() {
            return Err(Error::invalid("gather: indices and weights differ in length"));
        }
        let mut out = Self::new(self.dim)?;
        for (&i, &w) in indices.iter().zip(weights) {
            if i >= self.len() {
                return Err(Error::invalid(format!("gather: index {i} out of bounds")));
            }
            out.push(self.point(i), w)?;
        }
        Ok(out)
    }
}

/// A query point, validated once at construction.
///
/// Radius constraints (logistic kernels restrict queries to a ball) are
/// checked by the cost functions, where the kernel is known.
#[derive(Clone, Debug, PartialEq)]
pub struct Query(Vec<f64>);

impl Query {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyInput("query must have at least one coordinate"));
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::NonFinite("query coordinate".into()));
        }
        Ok(Query(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        math::norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for Query {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(WeightedPointSet::new(0).is_err());
        assert!(WeightedPointSet::from_rows(vec![], vec![]).is_err());
        assert!(WeightedPointSet::from_rows(vec![vec![1.0]], vec![]).is_err());
        assert!(WeightedPointSet::from_rows(vec![vec![1.0], vec![1.0, 2.0]], vec![1.0, 1.0]).is_err());
        assert!(WeightedPointSet::from_rows(vec![vec![f64::NAN]], vec![1.0]).is_err());
        assert!(WeightedPointSet::from_rows(vec![vec![1.0]], vec![0.0]).is_err());
        assert!(WeightedPointSet::from_rows(vec![vec![1.0]], vec![-1.0]).is_err());
        assert!(WeightedPointSet::from_rows(vec![vec![1.0]], vec![f64::INFINITY]).is_err());
        assert!(Query::new(vec![]).is_err());
        assert!(Query::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn accessors_roundtrip() {
        let p = WeightedPointSet::from_rows(
            vec![vec![3.0, 4.0], vec![0.0, 0.0], vec![-1.0, 1.0]],
            vec![1.0, 2.0, 0.5],
        )
        .unwrap();
        assert_eq!(p.norms(), vec![5.0, 0.0, 2f64.sqrt()]);
        assert_eq!(p.total_weight(), 3.5);
        let pairs: Vec<_> = p.iter().collect();
        assert_eq!(pairs[0], (&[3.0, 4.0][..], 1.0));
        assert_eq!(pairs[2], (&[-1.0, 1.0][..], 0.5));
    }

    #[test]
    fn gather_keeps_duplicates() {
        let p = WeightedPointSet::unit(vec![vec![1.0], vec![2.0]]).unwrap();
        let q = p.gather(&[1, 1, 0], &[0.5, 0.5, 3.0]).unwrap();
        assert_eq!(q.len(), 3);
        assert_eq!(q.point(0), &[2.0]);
        assert_eq!(q.point(2), &[1.0]);
        assert!(p.gather(&[2], &[1.0]).is_err());
    }
}
