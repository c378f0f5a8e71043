//! Per-point sensitivity bounds and empirical sensitivity estimation.
//!
//! The sensitivity of a point is the largest share it can claim of the
//! total cost over all queries. The closed-form bounds here depend only on
//! the point's norm and its 1-indexed rank in the norm ordering; sampling
//! proportionally to them yields the coresets built in [`crate::sampler`].

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::{KernelKind, KernelSpec};
use crate::math::{self, KahanSum};
use crate::rng::rng_from_seed;
use crate::set::WeightedPointSet;

/// Seed of the probe stream used by the empirical estimator. Fixed so the
/// estimate is a pure function of its arguments.
const PROBE_SEED: u64 = 0x5EED_CA5C_ADE5;
/// Default number of random probe directions.
const PROBE_DIRECTIONS: usize = 64;
/// Gradient-ascent refinement steps per point.
const ASCENT_STEPS: usize = 50;
/// Fractional part of the golden ratio; drives the nested radius grid.
const GOLDEN_FRAC: f64 = 0.618_033_988_749_894_9;

/// Sensitivity upper bounds for every point of a set, plus their total.
///
/// `bounds` is indexed by storage position; `order[j]` is the index of the
/// rank-`j+1` point in the norm ordering the formulas are stated in.
#[derive(Clone, Debug)]
pub struct SensitivityProfile {
    bounds: Vec<f64>,
    total: f64,
    order: Vec<usize>,
    spec: Option<KernelSpec>,
}

impl SensitivityProfile {
    /// Bound of the `i`-th stored point.
    pub fn bound(&self, i: usize) -> f64 {
        self.bounds[i]
    }

    /// Bounds in storage order.
    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// Total sensitivity `t` (compensated sum of bounds in rank order).
    pub fn total(&self) -> f64 {
        self.total
    }

    /// Norm-sort permutation: `order[j]` is the storage index of rank `j+1`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// The kernel the bounds were derived for, when one was given.
    pub fn spec(&self) -> Option<&KernelSpec> {
        self.spec.as_ref()
    }

    /// Sampling distribution `bounds[i] / total`, in storage order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b / self.total).collect()
    }

    /// Assemble a profile from raw per-point bounds (storage order), the
    /// norm-sort permutation, and an optional kernel tag. The total is the
    /// compensated sum of bounds in rank order.
    pub(crate) fn from_bounds(
        bounds: Vec<f64>,
        order: Vec<usize>,
        spec: Option<KernelSpec>,
    ) -> Result<Self> {
        if bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::invalid("sensitivity bounds must be positive and finite"));
        }
        let mut acc = KahanSum::new();
        for &j in &order {
            acc.add(bounds[j]);
        }
        let total = acc.value();
        if !total.is_finite() {
            return Err(Error::NonFinite("total sensitivity".into()));
        }
        Ok(Self { bounds, total, order, spec })
    }
}

/// Permutation sorting the points by non-decreasing Euclidean norm.
/// The sort is stable, so ties keep their storage order.
pub fn sort_by_norm(p: &WeightedPointSet) -> Vec<usize> {
    let norms = p.norms();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]));
    order
}

fn require_unit_weights(p: &WeightedPointSet, what: &'static str) -> Result<()> {
    if !p.is_unit_weighted() {
        return Err(Error::WeightedInput(what));
    }
    Ok(())
}

fn require_formula_params(p: &WeightedPointSet, k: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::EmptyInput("sensitivity formulas need at least one point"));
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("sensitivity formulas need finite positive k, got {k}")));
    }
    Ok(())
}

/// Generic rank-based sensitivity bound: at sorted rank `j` (1-indexed),
/// `bound = (m_upper / f_zero) * (b + 1) / j`, where `b` is the caller's
/// per-point cost-ratio bound. `b` must be given in storage order and be
/// non-decreasing along the norm sort.
pub fn generic_sensitivity(
    p: &WeightedPointSet,
    m_upper: f64,
    f_zero: f64,
    b: &[f64],
) -> Result<SensitivityProfile> {
    generic_with_spec(p, m_upper, f_zero, b, None)
}

fn generic_with_spec(
    p: &WeightedPointSet,
    m_upper: f64,
    f_zero: f64,
    b: &[f64],
    spec: Option<KernelSpec>,
) -> Result<SensitivityProfile> {
    if p.is_empty() {
        return Err(Error::EmptyInput("sensitivity formulas need at least one point"));
    }
    require_unit_weights(p, "rank-based sensitivity bounds are stated for unit weights")?;
    if !(m_upper > 0.0 && m_upper.is_finite()) || !(f_zero > 0.0 && f_zero.is_finite()) {
        return Err(Error::invalid("link bounds must be positive and finite"));
    }
    if b.len() != p.len() {
        return Err(Error::invalid(format!(
            "{} ratio bounds for {} points",
            b.len(),
            p.len()
        )));
    }
    if b.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("ratio bounds must be non-negative and finite"));
    }
    let order = sort_by_norm(p);
    for w in order.windows(2) {
        if b[w[0]] > b[w[1]] {
            return Err(Error::invalid(
                "ratio bounds must be non-decreasing along the norm ordering",
            ));
        }
    }
    let scale = m_upper / f_zero;
    let mut bounds = vec![0.0; p.len()];
    for (rank0, &idx) in order.iter().enumerate() {
        bounds[idx] = scale * (b[idx] + 1.0) / (rank0 + 1) as f64;
    }
    SensitivityProfile::from_bounds(bounds, order, spec)
}

/// Sigmoid sensitivity: at rank `j`, `(132 sqrt(k) |p| + 2) / j`.
///
/// ```
/// use coreset::{sensitivity::sigmoid_sensitivity, set::WeightedPointSet};
///
/// let p = WeightedPointSet::unit(vec![vec![0.0], vec![1.0]])?;
/// let prof = sigmoid_sensitivity(&p, 4.0)?;
/// // ranks: |p|=0 first, |p|=1 second
/// assert_eq!(prof.bound(0), 2.0);
/// assert_eq!(prof.bound(1), 133.0);
/// assert_eq!(prof.total(), 135.0);
/// # Ok::<(), coreset::Error>(())
/// ```
pub fn sigmoid_sensitivity(p: &WeightedPointSet, k: f64) -> Result<SensitivityProfile> {
    require_formula_params(p, k)?;
    let spec = KernelSpec::sigmoid(k)?;
    let root_k = k.sqrt();
    let b: Vec<f64> = p.norms().iter().map(|n| 66.0 * root_k * n).collect();
    generic_with_spec(p, 1.0, 0.5, &b, Some(spec))
}

/// Squared-sigmoid sensitivity: ratio bound `168 sqrt(k) |p|` with
/// `M = 1`, `f(0) = 1/4`.
pub fn sigmoid_squared_sensitivity(p: &WeightedPointSet, k: f64) -> Result<SensitivityProfile> {
    require_formula_params(p, k)?;
    let spec = KernelSpec::sigmoid_squared(k)?;
    let root_k = k.sqrt();
    let b: Vec<f64> = p.norms().iter().map(|n| 168.0 * root_k * n).collect();
    generic_with_spec(p, 1.0, 0.25, &b, Some(spec))
}

/// Logistic sensitivity on the radius-`r` query ball: ratio bound
/// `b = 3 ln(2 e^{|p| r}) / ln 2 * sqrt(k) |p|`, scaled by
/// `M / f(0) = softplus(r) / ln 2` at rank `j`.
///
/// `ln(2 e^{|p| r})` is expanded to `ln 2 + |p| r`, so large products never
/// overflow.
pub fn logistic_sensitivity(p: &WeightedPointSet, k: f64, r: f64) -> Result<SensitivityProfile> {
    require_formula_params(p, k)?;
    let spec = KernelSpec::logistic(k, r)?;
    let ln2 = std::f64::consts::LN_2;
    let root_k = k.sqrt();
    let b: Vec<f64> = p
        .norms()
        .iter()
        .map(|n| 3.0 * (ln2 + n * r) / ln2 * root_k * n)
        .collect();
    generic_with_spec(p, math::softplus(r), ln2, &b, Some(spec))
}

/// The formula profile matching a kernel spec.
pub fn profile_for_spec(p: &WeightedPointSet, spec: &KernelSpec) -> Result<SensitivityProfile> {
    match spec.kind() {
        KernelKind::Sigmoid => sigmoid_sensitivity(p, spec.k()),
        KernelKind::SigmoidSquared => sigmoid_squared_sensitivity(p, spec.k()),
        KernelKind::Logistic => logistic_sensitivity(p, spec.k(), spec.radius().unwrap()),
    }
}

/// Empirical sensitivity of one point: a lower estimate of
/// `sup_x w(p_i) c(p_i, x) / C(P, w, x)` by multistart search.
///
/// Probes are shared across points, so estimating all points costs the
/// same as estimating one; prefer [`empirical_sensitivity_all`] when more
/// than one index is needed. The search is deterministic: probes come from
/// a fixed internal stream, `budget` counts random probes, and each point
/// gets a bounded gradient-ascent refinement from its best probe.
pub fn empirical_sensitivity(
    p: &WeightedPointSet,
    spec: &KernelSpec,
    index: usize,
    budget: usize,
) -> Result<f64> {
    if index >= p.len() {
        return Err(Error::invalid(format!("point index {index} out of bounds")));
    }
    Ok(empirical_sensitivity_all(p, spec, budget)?[index])
}

/// Empirical sensitivity of every point under shared probes.
pub fn empirical_sensitivity_all(
    p: &WeightedPointSet,
    spec: &KernelSpec,
    budget: usize,
) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(Error::EmptyInput("empirical sensitivity needs at least one point"));
    }
    if budget == 0 {
        return Err(Error::invalid("probe budget must be positive"));
    }
    let n = p.len();
    let d = p.dim();

    let mut best = vec![0.0f64; n];
    let mut best_x: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
    let mut scratch = vec![0.0f64; n];

    // The origin is always admissible and gives the exact baseline w_i / W.
    probe(p, spec, &vec![0.0; d], &mut scratch, &mut best, &mut best_x);

    let (lo_log, hi_log) = probe_radius_range(spec);
    let n_dirs = PROBE_DIRECTIONS.min(budget);
    let n_radii = (budget / n_dirs).max(1);
    let mut rng = rng_from_seed(PROBE_SEED);
    for _ in 0..n_dirs {
        let u = random_unit(&mut rng, d);
        for i in 0..n_radii {
            // Golden-ratio positions nest as the budget grows, so a larger
            // budget never loses probes a smaller one had.
            let t = (i as f64 * GOLDEN_FRAC).fract();
            let r = 10f64.powf(lo_log + (hi_log - lo_log) * t);
            let x: Vec<f64> = u.iter().map(|c| c * r).collect();
            probe(p, spec, &x, &mut scratch, &mut best, &mut best_x);
        }
    }

    for i in 0..n {
        best[i] = ascend(p, spec, i, &best_x[i], best[i]);
    }
    Ok(best)
}

/// Log-radius range of the probe grid: `[1e-2, 1e3]`, clipped to the query
/// ball for logistic kernels.
fn probe_radius_range(spec: &KernelSpec) -> (f64, f64) {
    let hi = match spec.radius() {
        Some(r) => r,
        None => 1e3,
    };
    let lo = 1e-2f64.min(hi / 2.0);
    (lo.log10(), hi.log10())
}

fn random_unit(rng: &mut rand_chacha::ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = math::norm(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// Evaluate all cost ratios at `x` and fold them into the running bests.
fn probe(
    p: &WeightedPointSet,
    spec: &KernelSpec,
    x: &[f64],
    costs: &mut [f64],
    best: &mut [f64],
    best_x: &mut [Vec<f64>],
) {
    let reg = spec.regularizer(math::norm(x));
    let mut acc = KahanSum::new();
    for (i, (point, w)) in p.iter().enumerate() {
        let c = w * (spec.link(math::dot(point, x)) + reg);
        costs[i] = c;
        acc.add(c);
    }
    let total = acc.value();
    if !(total > 0.0 && total.is_finite()) {
        return;
    }
    for i in 0..p.len() {
        let ratio = costs[i] / total;
        if ratio > best[i] {
            best[i] = ratio;
            best_x[i].copy_from_slice(x);
        }
    }
}

/// Ratio of point `i` at `x`; assumes `x` admissible.
fn ratio_at(p: &WeightedPointSet, spec: &KernelSpec, i: usize, x: &[f64]) -> f64 {
    let reg = spec.regularizer(math::norm(x));
    let mut acc = KahanSum::new();
    let mut ci = 0.0;
    for (j, (point, w)) in p.iter().enumerate() {
        let c = w * (spec.link(math::dot(point, x)) + reg);
        if j == i {
            ci = c;
        }
        acc.add(c);
    }
    ci / acc.value()
}

/// Gradient of `log ratio_i` at `x`; `None` when degenerate.
fn ratio_log_gradient(
    p: &WeightedPointSet,
    spec: &KernelSpec,
    i: usize,
    x: &[f64],
) -> Option<Vec<f64>> {
    let d = x.len();
    let reg = spec.regularizer(math::norm(x));
    let two_over_k = 2.0 / spec.k();
    let mut den = KahanSum::new();
    let mut den_grad = vec![0.0f64; d];
    let mut total_w = 0.0;
    let mut num = 0.0;
    let mut num_grad = vec![0.0f64; d];
    for (j, (point, w)) in p.iter().enumerate() {
        let z = math::dot(point, x);
        let f = spec.link(z);
        let fp = spec.kind().link_deriv(z);
        den.add(w * (f + reg));
        for (g, &c) in den_grad.iter_mut().zip(point) {
            *g += w * fp * c;
        }
        total_w += w;
        if j == i {
            num = f + reg;
            for (g, &c) in num_grad.iter_mut().zip(point) {
                *g = fp * c;
            }
        }
    }
    let den = den.value();
    if !(num > 0.0 && den > 0.0) || !den.is_finite() {
        return None;
    }
    let mut out = vec![0.0f64; d];
    for idx in 0..d {
        let ng = num_grad[idx] + two_over_k * x[idx];
        let dg = den_grad[idx] + total_w * two_over_k * x[idx];
        out[idx] = ng / num - dg / den;
    }
    if out.iter().all(|g| g.is_finite()) {
        Some(out)
    } else {
        None
    }
}

/// Normalized-step gradient ascent on `log ratio_i` from the best probe.
fn ascend(p: &WeightedPointSet, spec: &KernelSpec, i: usize, x0: &[f64], v0: f64) -> f64 {
    let mut x = x0.to_vec();
    let mut val = v0;
    let mut step = 0.25 * (1.0 + math::norm(&x));
    for _ in 0..ASCENT_STEPS {
        let Some(g) = ratio_log_gradient(p, spec, i, &x) else { break };
        let gn = math::norm(&g);
        if gn < 1e-14 {
            break;
        }
        let mut cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + step * gi / gn).collect();
        if let Some(r) = spec.radius() {
            let norm = math::norm(&cand);
            if norm > r {
                for c in &mut cand {
                    *c *= r / norm;
                }
            }
        }
        let v = ratio_at(p, spec, i, &cand);
        if v > val && v.is_finite() {
            x = cand;
            val = v;
            step *= 1.5;
        } else {
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
    }
    val
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_points(rows: Vec<Vec<f64>>) -> WeightedPointSet {
        WeightedPointSet::unit(rows).unwrap()
    }

    #[test]
    fn sigmoid_two_point_example_is_exact() {
        let p = unit_points(vec![vec![1.0], vec![0.0]]);
        let prof = sigmoid_sensitivity(&p, 4.0).unwrap();
        // norm 0 ranks first: bound (132*2*0+2)/1 = 2; norm 1 second:
        // (132*2*1+2)/2 = 133.
        assert_eq!(prof.bound(1), 2.0);
        assert_eq!(prof.bound(0), 133.0);
        assert_eq!(prof.total(), 135.0);
        assert_eq!(prof.order(), &[1, 0]);
    }

    #[test]
    fn unit_sphere_total_matches_harmonic_sum() {
        // 1000 points of exactly unit norm: total = 134 * H_1000.
        let rows: Vec<Vec<f64>> = (0..1000)
            .map(|i| match i % 4 {
                0 => vec![1.0, 0.0],
                1 => vec![-1.0, 0.0],
                2 => vec![0.0, 1.0],
                _ => vec![0.0, -1.0],
            })
            .collect();
        let p = unit_points(rows);
        let prof = sigmoid_sensitivity(&p, 1.0).unwrap();
        let harmonic: f64 = (1..=1000).map(|j| 1.0 / j as f64).sum();
        assert!((prof.total() - 134.0 * harmonic).abs() < 1e-12 * prof.total());
        assert!((prof.total() - 1003.053_095_313_746).abs() < 1e-9);
    }

    #[test]
    fn unit_ball_total_is_bounded_by_harmonic_sum() {
        let mut rng = rng_from_seed(11);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let v = random_unit(&mut rng, 3);
                let r: f64 = rng.gen::<f64>();
                v.into_iter().map(|c| c * r).collect()
            })
            .collect();
        let p = unit_points(rows);
        for k in [1.0, 100.0] {
            let prof = sigmoid_sensitivity(&p, k).unwrap();
            let cap: f64 = (1..=500).map(|j| (132.0 * k.sqrt() + 2.0) / j as f64).sum();
            assert!(prof.total() <= cap * (1.0 + 1e-12));
        }
    }

    #[test]
    fn logistic_frozen_values() {
        let p = unit_points(vec![vec![0.0, 0.0]]);
        let prof = logistic_sensitivity(&p, 1.0, 1.0).unwrap();
        assert!((prof.bound(0) - 1.894_636_123_972_011_5).abs() < 1e-12);

        let p = unit_points(vec![vec![1.0, 0.0]]);
        let prof = logistic_sensitivity(&p, 1.0, 1.0).unwrap();
        assert!((prof.bound(0) - 15.778_690_916_918_572).abs() < 1e-12);
    }

    #[test]
    fn logistic_huge_norms_do_not_overflow() {
        let p = unit_points(vec![vec![1e8, 0.0], vec![0.0, 1e9]]);
        let prof = logistic_sensitivity(&p, 100.0, 1e6).unwrap();
        assert!(prof.total().is_finite());
        assert!(prof.bounds().iter().all(|b| b.is_finite()));
    }

    #[test]
    fn rank_times_bound_is_monotone() {
        let mut rng = rng_from_seed(5);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0])
            .collect();
        let p = unit_points(rows);
        let prof = sigmoid_sensitivity(&p, 100.0).unwrap();
        let mut prev = 0.0;
        for (rank0, &idx) in prof.order().iter().enumerate() {
            let v = prof.bound(idx) * (rank0 + 1) as f64;
            assert!(v >= prev - 1e-9 * v.abs(), "rank*bound decreased at rank {}", rank0 + 1);
            prev = v;
        }
    }

    #[test]
    fn generic_reproduces_sigmoid_bitwise() {
        let rows = vec![vec![0.5, 0.5], vec![-1.0, 0.25], vec![0.0, 0.0], vec![2.0, -2.0]];
        let p = unit_points(rows);
        let k = 7.0f64;
        let direct = sigmoid_sensitivity(&p, k).unwrap();
        let b: Vec<f64> = p.norms().iter().map(|n| 66.0 * k.sqrt() * n).collect();
        let generic = generic_sensitivity(&p, 1.0, 0.5, &b).unwrap();
        assert_eq!(direct.bounds(), generic.bounds());
        assert_eq!(direct.total(), generic.total());
    }

    #[test]
    fn formula_inputs_are_validated() {
        let p = unit_points(vec![vec![1.0]]);
        assert!(sigmoid_sensitivity(&p, 0.0).is_err());
        assert!(sigmoid_sensitivity(&p, f64::INFINITY).is_err());
        let weighted =
            WeightedPointSet::from_rows(vec![vec![1.0], vec![2.0]], vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            sigmoid_sensitivity(&weighted, 1.0).unwrap_err(),
            Error::WeightedInput(_)
        ));
        // decreasing b along the norm order
        let two = unit_points(vec![vec![0.0], vec![1.0]]);
        assert!(generic_sensitivity(&two, 1.0, 0.5, &[1.0, 0.5]).is_err());
        assert!(generic_sensitivity(&two, 1.0, 0.5, &[0.5]).is_err());
    }

    #[test]
    fn sort_is_stable_on_ties() {
        let p = unit_points(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.0]]);
        assert_eq!(sort_by_norm(&p), vec![2, 0, 1]);
    }

    #[test]
    fn empirical_singleton_is_exactly_one() {
        let p = unit_points(vec![vec![0.3, -0.4]]);
        let spec = KernelSpec::sigmoid(10.0).unwrap();
        assert_eq!(empirical_sensitivity(&p, &spec, 0, 100).unwrap(), 1.0);
    }

    #[test]
    fn empirical_identical_points_are_exactly_half() {
        let p = unit_points(vec![vec![0.7, 0.1], vec![0.7, 0.1]]);
        let spec = KernelSpec::sigmoid(10.0).unwrap();
        let s = empirical_sensitivity_all(&p, &spec, 200).unwrap();
        assert_eq!(s, vec![0.5, 0.5]);
    }

    #[test]
    fn empirical_is_deterministic() {
        let p = unit_points(vec![vec![0.2, 0.9], vec![-0.6, 0.1], vec![0.0, -0.3]]);
        let spec = KernelSpec::logistic(100.0, 4.0).unwrap();
        let a = empirical_sensitivity_all(&p, &spec, 500).unwrap();
        let b = empirical_sensitivity_all(&p, &spec, 500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_stays_below_formula_bound() {
        let mut rng = rng_from_seed(77);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let v = random_unit(&mut rng, 2);
                let r: f64 = rng.gen::<f64>();
                v.into_iter().map(|c| c * r).collect()
            })
            .collect();
        let p = unit_points(rows);
        let spec = KernelSpec::sigmoid(100.0).unwrap();
        let prof = sigmoid_sensitivity(&p, 100.0).unwrap();
        let emp = empirical_sensitivity_all(&p, &spec, 2_000).unwrap();
        for i in 0..p.len() {
            assert!(
                emp[i] <= prof.bound(i),
                "point {i}: empirical {} above bound {}",
                emp[i],
                prof.bound(i)
            );
        }
    }

    #[test]
    fn dispatch_matches_kind() {
        let p = unit_points(vec![vec![0.5], vec![-0.25]]);
        let spec = KernelSpec::logistic(9.0, 2.0).unwrap();
        let a = profile_for_spec(&p, &spec).unwrap();
        let b = logistic_sensitivity(&p, 9.0, 2.0).unwrap();
        assert_eq!(a.bounds(), b.bounds());
    }
}
