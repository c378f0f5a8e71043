//! Numeric certificates for the analytic bounds behind the sensitivity
//! formulas, plus the constructive worst case showing why sampling must
//! follow sensitivities at all.
//!
//! Everything here is checkable arithmetic: root finding with explicit
//! brackets, dense grid sweeps with recorded margins, and dot-product
//! identities on concrete point sets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelKind;
use crate::math::{self, KahanSum};
use crate::set::WeightedPointSet;

/// Residual tolerance for the intersection root.
const ROOT_TOL: f64 = 1e-12;
/// Bisection iteration cap; the bracket is at most ~1.25 wide, so this is
/// far past fixed-point exhaustion.
const MAX_BISECT: usize = 200;
/// Relative tolerance for the separation identities, applied to the
/// inequalities normalized by the separation radius.
const SEPARATION_TOL: f64 = 1e-6;

/// The gap h(x) = f(-c sqrt(k) x) - x^2 whose unique positive root splits
/// the link-versus-parabola comparison.
pub fn intersection_gap(kind: KernelKind, c: f64, k: f64, x: f64) -> f64 {
    kind.link(-c * k.sqrt() * x) - x * x
}

/// Unique positive crossing of the link against the parabola.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntersectionResult {
    pub x_kc: f64,
    /// Gap value at `x_kc`; within `1e-12` of zero.
    pub residual: f64,
    /// Final bisection bracket, `lo < x_kc < hi`.
    pub bracket: (f64, f64),
}

/// Locate the unique `x > 0` with `f(-c sqrt(k) x) = x^2` by bisection.
///
/// The gap is strictly decreasing, positive at 0 (it equals `f(0)` there)
/// and negative at `sqrt(f(0) + 1)`, so the bracket is guaranteed and the
/// root unique. Errors if the endpoints fail to straddle zero, which would
/// mean the link is not an admissible kernel.
pub fn find_intersection(kind: KernelKind, c: f64, k: f64) -> Result<IntersectionResult> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("scale c must be positive and finite, got {c}")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!(
            "regularization constant must be positive and finite here, got {k}"
        )));
    }
    let mut lo = 0.0f64;
    let mut hi = (kind.link_at_zero() + 1.0).sqrt();
    let h_lo = intersection_gap(kind, c, k, lo);
    let h_hi = intersection_gap(kind, c, k, hi);
    if !(h_lo > 0.0 && h_hi < 0.0) {
        return Err(Error::invalid(format!(
            "bracket does not straddle zero: h(0)={h_lo}, h({hi})={h_hi}"
        )));
    }
    let mut x = 0.5 * (lo + hi);
    let mut h = intersection_gap(kind, c, k, x);
    for _ in 0..MAX_BISECT {
        if h.abs() <= ROOT_TOL {
            return Ok(IntersectionResult { x_kc: x, residual: h, bracket: (lo, hi) });
        }
        if h > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        x = 0.5 * (lo + hi);
        h = intersection_gap(kind, c, k, x);
    }
    Err(Error::invalid(format!(
        "bisection stalled at x={x} with residual {h}; the gap is too steep for f64 here"
    )))
}

/// Sign pattern of the gap around its root, plus the floor claim
/// `x_kc >= 1/(c sqrt(k))` that only holds once `c^2 k f(-1) >= 1`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntersectionClaims {
    pub result: IntersectionResult,
    /// Gap strictly positive at every grid point left of the root.
    pub positive_below: bool,
    /// Gap strictly negative at every grid point right of the root.
    pub negative_above: bool,
    /// `c^2 k f(-1) >= 1`, the regime making the floor claim provable.
    pub in_regime: bool,
    /// `x_kc >= 1/(c sqrt(k))`; meaningful only when `in_regime`.
    pub floor_holds: bool,
}

/// Check the sign pattern on a uniform grid over the bracket interval and
/// evaluate the root floor. Grid points within `1e-9` of the root are
/// skipped: the gap there is dominated by the root residual.
pub fn check_intersection_claims(
    kind: KernelKind,
    c: f64,
    k: f64,
    grid_points: usize,
) -> Result<IntersectionClaims> {
    if grid_points < 2 {
        return Err(Error::invalid("sign-pattern grid needs at least 2 points"));
    }
    let result = find_intersection(kind, c, k)?;
    let hi = (kind.link_at_zero() + 1.0).sqrt();
    let window = 1e-9 * result.x_kc.max(1.0);
    let mut positive_below = true;
    let mut negative_above = true;
    for i in 0..grid_points {
        let x = hi * (i + 1) as f64 / grid_points as f64;
        if (x - result.x_kc).abs() <= window {
            continue;
        }
        let h = intersection_gap(kind, c, k, x);
        if x < result.x_kc && h <= 0.0 {
            positive_below = false;
        }
        if x > result.x_kc && h >= 0.0 {
            negative_above = false;
        }
    }
    let in_regime = c * c * k * kind.link(-1.0) >= 1.0;
    let floor_holds = result.x_kc >= 1.0 / (c * k.sqrt());
    Ok(IntersectionClaims { result, positive_below, negative_above, in_regime, floor_holds })
}

/// Outcome of sweeping a ratio against its certified bound.
#[derive(Clone, Debug, Serialize)]
pub struct RatioSweepReport {
    pub sup_ratio: f64,
    pub argmax_x: f64,
    pub bound: f64,
    /// `bound - sup_ratio`; positive on passing sweeps.
    pub margin: f64,
    /// Human-readable description of the swept grid.
    pub grid: String,
}

/// `points` log-spaced values over `[1e-6, hi]`, preceded by 0.
pub fn log_grid(points: usize, hi: f64) -> Result<Vec<f64>> {
    let lo = 1e-6f64;
    if !(hi > lo) || !hi.is_finite() {
        return Err(Error::invalid(format!("grid upper end must exceed {lo}, got {hi}")));
    }
    if points < 2 {
        return Err(Error::invalid("log grid needs at least 2 points"));
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut grid = Vec::with_capacity(points + 1);
    grid.push(0.0);
    grid.push(lo);
    for i in 1..points - 1 {
        let t = i as f64 / (points - 1) as f64;
        grid.push((llo + t * (lhi - llo)).exp());
    }
    // Land exactly on both ends despite exp/ln rounding.
    grid.push(hi);
    Ok(grid)
}

fn sweep(grid: &[f64], ratio: impl Fn(f64) -> f64, bound: f64, desc: String) -> RatioSweepReport {
    let mut sup_ratio = f64::NEG_INFINITY;
    let mut argmax_x = f64::NAN;
    for &x in grid {
        let r = ratio(x);
        if r > sup_ratio {
            sup_ratio = r;
            argmax_x = x;
        }
    }
    RatioSweepReport { sup_ratio, argmax_x, bound, margin: bound - sup_ratio, grid: desc }
}

/// Sweep `(f(x) + x^2) / (f(-x) + x^2)` against `max(2, 2/x11^2)`, where
/// `x11` is the intersection root at `c = k = 1`.
pub fn ratio_simple_sweep(kind: KernelKind, x11: f64, grid: &[f64]) -> Result<RatioSweepReport> {
    if !(x11 > 0.0 && x11.is_finite()) {
        return Err(Error::invalid(format!("x11 must be positive and finite, got {x11}")));
    }
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    let bound = 2.0f64.max(2.0 / (x11 * x11));
    let f = |z: f64| kind.link(z);
    let ratio = move |x: f64| (f(x) + x * x) / (f(-x) + x * x);
    let desc = format!("{} caller points over [{}, {}]", grid.len(), grid[0], grid[grid.len() - 1]);
    Ok(sweep(grid, ratio, bound, desc))
}

/// Certified multiple of `c sqrt(k)` bounding the regularized two-sided
/// ratio for this kind. Logistic needs the query radius; the formula is
/// evaluated analytically so huge `c * r` cannot overflow.
pub fn regularized_ratio_bound(kind: KernelKind, c: f64, k: f64, r: Option<f64>) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("scale c must be positive and finite, got {c}")));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!(
            "regularization constant must be positive and finite here, got {k}"
        )));
    }
    let ln2 = std::f64::consts::LN_2;
    match kind {
        KernelKind::Sigmoid => {
            if r.is_some() {
                return Err(Error::invalid("sigmoid ratio bound takes no radius"));
            }
            Ok(66.0 * c * k.sqrt())
        }
        KernelKind::SigmoidSquared => {
            if r.is_some() {
                return Err(Error::invalid("squared-sigmoid ratio bound takes no radius"));
            }
            Ok(168.0 * c * k.sqrt())
        }
        KernelKind::Logistic => {
            let r = r.ok_or_else(|| Error::invalid("logistic ratio bound needs a radius"))?;
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid(format!("radius must be positive and finite, got {r}")));
            }
            // ln(2 e^{c r}) = ln 2 + c r, exact even when e^{c r} overflows.
            Ok(3.0 * (ln2 + c * r) / ln2 * k.sqrt() * c)
        }
    }
}

/// Sweep `(f(cx) + x^2/k) / (f(-cx) + x^2/k)` over a dense log grid and
/// compare it against [`regularized_ratio_bound`].
///
/// The bound is certified for `k >= 1/c^2`; smaller `k` is rejected. The
/// sweep covers `x` in `[0, 1e3]`, or `[0, R]` for logistic where queries
/// live in the radius-`R` ball.
pub fn regularized_ratio_sweep(
    kind: KernelKind,
    c: f64,
    k: f64,
    r: Option<f64>,
    grid_points: usize,
) -> Result<RatioSweepReport> {
    let bound = regularized_ratio_bound(kind, c, k, r)?;
    if k < 1.0 / (c * c) {
        return Err(Error::invalid(format!(
            "bound certified only for k >= 1/c^2 = {}, got k = {k}",
            1.0 / (c * c)
        )));
    }
    let hi = match kind {
        KernelKind::Logistic => r.expect("validated above"),
        _ => 1e3,
    };
    let grid = log_grid(grid_points, hi)?;
    let f = |z: f64| kind.link(z);
    let ratio = move |x: f64| (f(c * x) + x * x / k) / (f(-c * x) + x * x / k);
    let desc = format!("log grid over [0, {hi}], {} points", grid.len());
    Ok(sweep(&grid, ratio, bound, desc))
}

/// Smallest `k` at which this module can certify the logistic regularized
/// ratio bound for the pair `(c, r)`.
///
/// The bound's statement is conditional on a large-enough `k` without
/// naming one. A concrete threshold follows from two monotonicity facts:
/// adding the same nonnegative regularizer to numerator and denominator
/// can only shrink the ratio, and the unregularized ratio is largest at
/// the domain edge. Hence the sweep's supremum never exceeds
/// `f(cr) / f(-cr)`, and any `k` with `3 D c sqrt(k)` above that value is
/// certified. Below the returned threshold the bound may or may not hold;
/// above it, it always does.
///
/// Returns infinity when `f(-cr)` underflows (around `c r > 700`): no
/// finite certification is possible in this arithmetic, though such cells
/// pass sweeps trivially because the bound is astronomically large.
pub fn logistic_regime_floor(c: f64, r: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("scale c must be positive and finite, got {c}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("radius must be positive and finite, got {r}")));
    }
    let ln2 = std::f64::consts::LN_2;
    let f = |z: f64| KernelKind::Logistic.link(z);
    let d = (ln2 + c * r) / ln2;
    let root = f(c * r) / (f(-(c * r)) * 3.0 * d * c);
    Ok(root * root)
}

/// `f(-r) / f(r)`: the tail ratio that must vanish as `r` grows for the
/// worst-case construction to push sensitivities to 1.
pub fn tail_ratio(kind: KernelKind, r: f64) -> f64 {
    kind.link(-r) / kind.link(r)
}

/// Regular polygon vertices lifted to a constant final coordinate, plus a
/// witness direction per point.
///
/// Point `j` is `(cos a_j, sin a_j, 0, .., 0, 1)` with `a_j = 2 pi j / n`.
/// Its witness `y_j` satisfies `y_j . p_j = -r` while `y_j . p_q >= r` for
/// every other vertex `q`: the supporting hyperplane at vertex `j`, pushed
/// through the lift coordinate and scaled by the separation radius. The
/// identities are re-checked numerically and a failure (possible once `n`
/// is large enough that the polygon margin drowns in rounding) is an
/// error, not a silent degradation.
pub fn build_separable_set(
    n: usize,
    d: usize,
    r: f64,
) -> Result<(WeightedPointSet, Vec<Vec<f64>>)> {
    if n < 3 {
        return Err(Error::invalid(format!("polygon needs at least 3 vertices, got {n}")));
    }
    if d < 3 {
        return Err(Error::invalid(format!(
            "construction needs two polygon coordinates plus the lift, so d >= 3; got {d}"
        )));
    }
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!(
            "separation radius must be non-negative and finite, got {r}"
        )));
    }
    let step = 2.0 * std::f64::consts::PI / n as f64;
    // Adjacent vertices see each other at cos(step); the witness offset
    // beta averages it with 1 so the plane splits vertex from neighbors.
    let beta = (1.0 + step.cos()) / 2.0;
    let mu = (1.0 - step.cos()) / 2.0;
    let scale = if r == 0.0 { 0.0 } else { r / mu };

    let mut rows = Vec::with_capacity(n);
    let mut witnesses = Vec::with_capacity(n);
    for j in 0..n {
        let a = step * j as f64;
        let mut p = vec![0.0; d];
        p[0] = a.cos();
        p[1] = a.sin();
        p[d - 1] = 1.0;
        let mut y = vec![0.0; d];
        y[0] = -scale * a.cos();
        y[1] = -scale * a.sin();
        y[d - 1] = scale * beta;
        rows.push(p);
        witnesses.push(y);
    }

    let tol = SEPARATION_TOL * r.max(1.0);
    for (j, y) in witnesses.iter().enumerate() {
        for (q, p) in rows.iter().enumerate() {
            let dot = math::dot(y, p);
            let ok = if q == j { (dot + r).abs() <= tol } else { dot >= r - tol };
            if !ok {
                return Err(Error::invalid(format!(
                    "separation margin underflow at vertices {j},{q}: y.p = {dot}, radius {r}"
                )));
            }
        }
    }
    Ok((WeightedPointSet::unit(rows)?, witnesses))
}

/// One row of the worst-case sensitivity curve.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LowerBoundPoint {
    pub r: f64,
    /// Smallest per-point cost share over the set, evaluated at that
    /// point's own witness query.
    pub min_sensitivity: f64,
}

/// Evaluate, for each separation radius, the worst per-point share of the
/// unregularized total cost at the explicit witness queries.
///
/// At the query `-y_p` the point `p` contributes `f(r)` while every other
/// vertex contributes at most `f(-r)`, so the share approaches 1 as `r`
/// grows and equals `w_p / sum(w)` at `r = 0`. Optional weights must be
/// positive and match `n`.
pub fn lower_bound_demo(
    kind: KernelKind,
    n: usize,
    d: usize,
    r_schedule: &[f64],
    weights: Option<&[f64]>,
) -> Result<Vec<LowerBoundPoint>> {
    if r_schedule.is_empty() {
        return Err(Error::EmptyInput("radius schedule"));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::invalid(format!("{} weights for {n} points", w.len())));
        }
    }
    let mut table = Vec::with_capacity(r_schedule.len());
    for &r in r_schedule {
        let (set, witnesses) = build_separable_set(n, d, r)?;
        let set = match weights {
            Some(w) => {
                let rows: Vec<Vec<f64>> = (0..n).map(|i| set.point(i).to_vec()).collect();
                WeightedPointSet::from_rows(rows, w.to_vec())?
            }
            None => set,
        };
        let mut min_s = f64::INFINITY;
        for (j, y) in witnesses.iter().enumerate() {
            let query: Vec<f64> = y.iter().map(|v| -v).collect();
            let own = set.weight(j) * kind.link(math::dot(&query, set.point(j)));
            let mut total = KahanSum::new();
            for (p, w) in set.iter() {
                total.add(w * kind.link(math::dot(&query, p)));
            }
            min_s = min_s.min(own / total.value());
        }
        table.push(LowerBoundPoint { r, min_sensitivity: min_s });
    }
    Ok(table)
}
