//! Kernel losses and weighted cost evaluation.
//!
//! A kernel pairs a monotone link `f` with an L2 regularizer: the cost of
//! a point `p` at query `x` is `f(p . x) + |x|^2 / k`. All links here are
//! non-decreasing, positive, and bounded on their query domain, which is
//! what the sensitivity bounds in [`crate::sensitivity`] rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, KahanSum};
use crate::set::{Query, WeightedPointSet};

/// Relative slack when checking a logistic query against its ball; covers
/// rounding in projections that land exactly on the boundary.
const RADIUS_SLACK: f64 = 1e-9;

/// The link functions supported by the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `f(z) = 1 / (1 + e^-z)`, bounded by 1.
    Sigmoid,
    /// `f(z) = ln(1 + e^z)`, unbounded; queries restricted to a ball.
    Logistic,
    /// `f(z) = sigmoid(z)^2`, bounded by 1.
    SigmoidSquared,
}

impl KernelKind {
    /// Evaluate the link at `z`.
    #[inline]
    pub fn link(self, z: f64) -> f64 {
        match self {
            KernelKind::Sigmoid => math::sigmoid(z),
            KernelKind::Logistic => math::softplus(z),
            KernelKind::SigmoidSquared => math::sigmoid_squared(z),
        }
    }

    /// Derivative of the link at `z`.
    #[inline]
    pub fn link_deriv(self, z: f64) -> f64 {
        match self {
            KernelKind::Sigmoid => math::sigmoid_deriv(z),
            KernelKind::Logistic => math::softplus_deriv(z),
            KernelKind::SigmoidSquared => math::sigmoid_squared_deriv(z),
        }
    }

    /// `f(0)`, the link's value at the origin. Strictly positive for every
    /// supported kind, which keeps all cost ratios finite.
    #[inline]
    pub fn link_at_zero(self) -> f64 {
        match self {
            KernelKind::Sigmoid => 0.5,
            KernelKind::Logistic => std::f64::consts::LN_2,
            KernelKind::SigmoidSquared => 0.25,
        }
    }
}

/// A fully parameterized kernel: link kind, regularization constant `k`,
/// and (for logistic) the query ball radius.
///
/// `k = f64::INFINITY` is allowed and turns the regularizer off.
///
/// ```
/// use coreset::kernel::KernelSpec;
///
/// let s = KernelSpec::sigmoid(100.0)?;
/// assert_eq!(s.upper_bound(), 1.0);
/// let l = KernelSpec::logistic(100.0, 4.0)?;
/// assert!(l.upper_bound() > 4.0);
/// # Ok::<(), coreset::Error>(())
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    kind: KernelKind,
    k: f64,
    radius: Option<f64>,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, k: f64, radius: Option<f64>) -> Result<Self> {
        if !(k > 0.0) || k.is_nan() {
            return Err(Error::invalid(format!("k must be positive, got {k}")));
        }
        match (kind, radius) {
            (KernelKind::Logistic, Some(r)) if r > 0.0 && r.is_finite() => {}
            (KernelKind::Logistic, _) => {
                return Err(Error::invalid(
                    "logistic kernel requires a positive finite query radius",
                ))
            }
            (_, Some(_)) => {
                return Err(Error::invalid("query radius only applies to the logistic kernel"))
            }
            (_, None) => {}
        }
        Ok(Self { kind, k, radius })
    }

    pub fn sigmoid(k: f64) -> Result<Self> {
        Self::new(KernelKind::Sigmoid, k, None)
    }

    pub fn logistic(k: f64, radius: f64) -> Result<Self> {
        Self::new(KernelKind::Logistic, k, Some(radius))
    }

    pub fn sigmoid_squared(k: f64) -> Result<Self> {
        Self::new(KernelKind::SigmoidSquared, k, None)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    /// Link value at `z`.
    #[inline]
    pub fn link(&self, z: f64) -> f64 {
        self.kind.link(z)
    }

    /// Upper bound `M` of the link over the admissible queries: 1 for the
    /// bounded links, `softplus(R)` on the logistic ball (attained when
    /// `|p| <= 1`, the regime the sampling bounds are stated for).
    pub fn upper_bound(&self) -> f64 {
        match self.kind {
            KernelKind::Sigmoid | KernelKind::SigmoidSquared => 1.0,
            KernelKind::Logistic => math::softplus(self.radius.unwrap()),
        }
    }

    /// `f(0)`.
    pub fn link_at_zero(&self) -> f64 {
        self.kind.link_at_zero()
    }

    /// Regularizer value `|x|^2 / k` for a query of the given norm.
    #[inline]
    pub fn regularizer(&self, query_norm: f64) -> f64 {
        // With k = +inf this is exactly 0 for every finite norm.
        query_norm * query_norm / self.k
    }

    /// Check that `x` is admissible for this kernel (inside the logistic
    /// ball, any query otherwise).
    pub fn check_query(&self, x: &Query) -> Result<()> {
        if let Some(r) = self.radius {
            let norm = x.norm();
            if norm > r * (1.0 + RADIUS_SLACK) {
                return Err(Error::QueryOutsideBall { norm, radius: r });
            }
        }
        Ok(())
    }

    /// Cost of one weighted point: `w * (f(p . x) + |x|^2 / k)`.
    ///
    /// ```
    /// use coreset::kernel::KernelSpec;
    /// use coreset::set::Query;
    ///
    /// let spec = KernelSpec::sigmoid(4.0)?;
    /// let x = Query::new(vec![0.0, 2.0])?;
    /// // f(0) + |x|^2/k = 0.5 + 1.0
    /// assert!((spec.cost(&[1.0, 0.0], &x)? - 1.5).abs() < 1e-15);
    /// # Ok::<(), coreset::Error>(())
    /// ```
    pub fn cost(&self, p: &[f64], x: &Query) -> Result<f64> {
        if p.len() != x.dim() {
            return Err(Error::DimensionMismatch { expected: p.len(), got: x.dim() });
        }
        self.check_query(x)?;
        Ok(self.link(math::dot(p, x)) + self.regularizer(x.norm()))
    }
}

/// Total weighted cost `C(P, w, x) = sum_p w(p) (f(p . x) + |x|^2/k)`.
///
/// Summation is compensated and always runs in storage order, so the
/// result is a deterministic function of `(P, spec, x)`. The empty set
/// costs 0 by convention.
pub fn total_cost(p: &WeightedPointSet, spec: &KernelSpec, x: &Query) -> Result<f64> {
    if p.is_empty() {
        return Ok(0.0);
    }
    if p.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: x.dim() });
    }
    spec.check_query(x)?;
    let reg = spec.regularizer(x.norm());
    let mut acc = KahanSum::new();
    for (point, w) in p.iter() {
        acc.add(w * (spec.link(math::dot(point, x)) + reg));
    }
    Ok(acc.value())
}

/// Gradient of [`total_cost`] in `x`:
/// `sum_p w(p) f'(p . x) p + 2 (sum_p w(p)) x / k`.
///
/// Each coordinate is accumulated with compensated summation in storage
/// order. The empty set has zero gradient.
pub fn total_cost_gradient(p: &WeightedPointSet, spec: &KernelSpec, x: &Query) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Ok(vec![0.0; x.dim()]);
    }
    if p.dim() != x.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: x.dim() });
    }
    spec.check_query(x)?;
    let d = p.dim();
    let mut acc: Vec<KahanSum> = vec![KahanSum::new(); d];
    let mut total_w = KahanSum::new();
    for (point, w) in p.iter() {
        let g = w * spec.kind().link_deriv(math::dot(point, x));
        for (a, &c) in acc.iter_mut().zip(point) {
            a.add(g * c);
        }
        total_w.add(w);
    }
    let reg_coeff = 2.0 * total_w.value() / spec.k();
    Ok(acc.iter().zip(x.coords()).map(|(a, &xi)| a.value() + reg_coeff * xi).collect())
}
