//! Coreset construction by sensitivity sampling.
//!
//! Sampling is i.i.d. with replacement from the profile's distribution
//! `s(p) / t`, with each drawn point reweighted by `w(p) / (size * prob)`
//! so the weighted coreset cost is an unbiased estimate of the full cost
//! at every query.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::rng::rng_from_seed;
use crate::sensitivity::{profile_for_spec, SensitivityProfile};
use crate::set::WeightedPointSet;

/// Largest sample size [`coreset_size`] will return; beyond this the f64
/// arithmetic that produced it has lost integer precision anyway.
const MAX_SAMPLE_SIZE: f64 = 1e15;

/// A sampled coreset together with its provenance.
///
/// `source_indices[i]` is the storage index the `i`-th coreset point was
/// drawn from (duplicates are kept; see [`Coreset::compact`]), and
/// `probabilities[i]` its draw probability. `eps`/`delta` are only present
/// when the size came from the sampling bound rather than a caller.
#[derive(Clone, Debug)]
pub struct Coreset {
    set: WeightedPointSet,
    source_indices: Vec<usize>,
    probabilities: Vec<f64>,
    eps: Option<f64>,
    delta: Option<f64>,
    seed: u64,
    requested_size: usize,
}

impl Coreset {
    pub fn set(&self) -> &WeightedPointSet {
        &self.set
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn eps(&self) -> Option<f64> {
        self.eps
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn requested_size(&self) -> usize {
        self.requested_size
    }

    /// Merge duplicate draws by summing their weights. Entries stay sorted
    /// by source index; estimates over the coreset are unchanged.
    pub fn compact(&self) -> Coreset {
        use std::collections::BTreeMap;
        let mut merged: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for (i, &src) in self.source_indices.iter().enumerate() {
            let entry = merged.entry(src).or_insert((0.0, self.probabilities[i]));
            entry.0 += self.set.weight(i);
        }
        let mut set = WeightedPointSet::new(self.set.dim()).expect("dim already validated");
        let mut source_indices = Vec::with_capacity(merged.len());
        let mut probabilities = Vec::with_capacity(merged.len());
        let by_source: std::collections::BTreeMap<usize, usize> = self
            .source_indices
            .iter()
            .enumerate()
            .map(|(pos, &src)| (src, pos))
            .collect();
        for (&src, &(w, prob)) in &merged {
            let pos = by_source[&src];
            set.push(self.set.point(pos), w).expect("merged weight stays positive");
            source_indices.push(src);
            probabilities.push(prob);
        }
        Coreset {
            set,
            source_indices,
            probabilities,
            eps: self.eps,
            delta: self.delta,
            seed: self.seed,
            requested_size: self.requested_size,
        }
    }
}

/// Sample size sufficient for an eps-coreset with failure probability
/// delta: `ceil((10 t / eps^2) (d ln t + ln(1/delta)))`.
///
/// ```
/// let m = coreset::sampler::coreset_size(10.0, 2, 0.5, 0.1)?;
/// assert_eq!(m, 2764);
/// # Ok::<(), coreset::Error>(())
/// ```
pub fn coreset_size(t: f64, d: usize, eps: f64, delta: f64) -> Result<usize> {
    if !(t > 1.0) || !t.is_finite() {
        return Err(Error::invalid(format!(
            "total sensitivity must be finite and exceed 1 (got {t}); \
             clamp upward or pass an explicit size"
        )));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0,1), got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0,1), got {delta}")));
    }
    let m = (10.0 * t / (eps * eps)) * (d as f64 * t.ln() + (1.0 / delta).ln());
    if !m.is_finite() || m > MAX_SAMPLE_SIZE {
        return Err(Error::invalid(format!("sample size {m} out of range")));
    }
    Ok(m.ceil() as usize)
}

/// Draw `size` points i.i.d. from the profile's distribution and reweight
/// each draw by `w / (size * prob)`.
///
/// Deterministic: the same `(p, profile, size, seed)` always yields the
/// same coreset, on every platform.
pub fn build_coreset(
    p: &WeightedPointSet,
    profile: &SensitivityProfile,
    size: usize,
    seed: u64,
) -> Result<Coreset> {
    if p.is_empty() {
        return Err(Error::EmptyInput("cannot sample from an empty set"));
    }
    if profile.bounds().len() != p.len() {
        return Err(Error::invalid(format!(
            "profile covers {} points, set has {}",
            profile.bounds().len(),
            p.len()
        )));
    }
    if size == 0 {
        return Err(Error::invalid("coreset size must be positive"));
    }
    let total = profile.total();
    // The distribution must be normalized; catches profiles whose total
    // was tampered with or built from foreign bounds.
    let mass: f64 = crate::math::kahan_sum(profile.bounds().iter().map(|b| b / total));
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("sampling probabilities sum to {mass}, not 1")));
    }

    // Cumulative table in storage order; strictly increasing because every
    // bound is positive.
    let mut cumulative = Vec::with_capacity(p.len());
    let mut run = 0.0f64;
    for &b in profile.bounds() {
        run += b;
        cumulative.push(run);
    }
    let span = *cumulative.last().expect("non-empty");

    let mut rng = rng_from_seed(seed);
    let mut source_indices = Vec::with_capacity(size);
    let mut probabilities = Vec::with_capacity(size);
    let mut weights = Vec::with_capacity(size);
    let inv_size = 1.0 / size as f64;
    for _ in 0..size {
        let u = rng.gen::<f64>() * span;
        let idx = cumulative.partition_point(|&c| c <= u).min(p.len() - 1);
        let prob = profile.bound(idx) / total;
        source_indices.push(idx);
        probabilities.push(prob);
        weights.push(p.weight(idx) * inv_size / prob);
    }
    let set = p.gather(&source_indices, &weights)?;
    Ok(Coreset {
        set,
        source_indices,
        probabilities,
        eps: None,
        delta: None,
        seed,
        requested_size: size,
    })
}

/// Uniform baseline: `size` i.i.d. uniform draws, each reweighted by
/// `w * n / size`.
pub fn uniform_sample(p: &WeightedPointSet, size: usize, seed: u64) -> Result<Coreset> {
    if p.is_empty() {
        return Err(Error::EmptyInput("cannot sample from an empty set"));
    }
    if size == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    let n = p.len();
    let prob = 1.0 / n as f64;
    let scale = n as f64 / size as f64;
    let mut rng = rng_from_seed(seed);
    let mut source_indices = Vec::with_capacity(size);
    let mut weights = Vec::with_capacity(size);
    for _ in 0..size {
        let idx = ((rng.gen::<f64>() * n as f64) as usize).min(n - 1);
        source_indices.push(idx);
        weights.push(p.weight(idx) * scale);
    }
    let set = p.gather(&source_indices, &weights)?;
    Ok(Coreset {
        set,
        source_indices,
        probabilities: vec![prob; size],
        eps: None,
        delta: None,
        seed,
        requested_size: size,
    })
}

/// End-to-end construction: compute the kernel's sensitivity profile, size
/// the sample from `(eps, delta)`, clamp to `|P|`, and sample.
///
/// The input must be unit-weighted; the rank-based bounds are stated for
/// unit weights. For weighted inputs build an explicit profile instead.
pub fn monotonic_coreset(
    p: &WeightedPointSet,
    spec: &KernelSpec,
    eps: f64,
    delta: f64,
    seed: u64,
) -> Result<Coreset> {
    let profile = profile_for_spec(p, spec)?;
    let m = coreset_size(profile.total(), p.dim(), eps, delta)?;
    let size = m.min(p.len());
    let mut coreset = build_coreset(p, &profile, size, seed)?;
    coreset.eps = Some(eps);
    coreset.delta = Some(delta);
    Ok(coreset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{total_cost, KernelSpec};
    use crate::sensitivity::sigmoid_sensitivity;
    use crate::set::Query;

    #[test]
    fn size_formula_frozen_values() {
        assert_eq!(coreset_size(10.0, 2, 0.5, 0.1).unwrap(), 2764);
        assert_eq!(
            coreset_size(std::f64::consts::E, 1, 0.5, (-1.0f64).exp()).unwrap(),
            218
        );
    }

    #[test]
    fn size_formula_rejects_bad_domains() {
        assert!(coreset_size(1.0, 2, 0.5, 0.1).is_err());
        assert!(coreset_size(0.5, 2, 0.5, 0.1).is_err());
        assert!(coreset_size(f64::INFINITY, 2, 0.5, 0.1).is_err());
        assert!(coreset_size(10.0, 0, 0.5, 0.1).is_err());
        assert!(coreset_size(10.0, 2, 0.0, 0.1).is_err());
        assert!(coreset_size(10.0, 2, 1.0, 0.1).is_err());
        assert!(coreset_size(10.0, 2, 0.5, 0.0).is_err());
        assert!(coreset_size(10.0, 2, 0.5, 1.0).is_err());
    }

    fn demo_set() -> WeightedPointSet {
        WeightedPointSet::unit(vec![
            vec![0.1, 0.0],
            vec![0.0, 0.4],
            vec![0.6, 0.3],
            vec![-0.9, 0.2],
        ])
        .unwrap()
    }

    #[test]
    fn build_is_deterministic() {
        let p = demo_set();
        let prof = sigmoid_sensitivity(&p, 100.0).unwrap();
        let a = build_coreset(&p, &prof, 50, 9).unwrap();
        let b = build_coreset(&p, &prof, 50, 9).unwrap();
        assert_eq!(a.source_indices(), b.source_indices());
        assert_eq!(a.set(), b.set());
        let c = build_coreset(&p, &prof, 50, 10).unwrap();
        assert_ne!(a.source_indices(), c.source_indices());
    }

    #[test]
    fn weights_match_inverse_probability() {
        let p = demo_set();
        let prof = sigmoid_sensitivity(&p, 100.0).unwrap();
        let q = build_coreset(&p, &prof, 64, 3).unwrap();
        let m = q.len() as f64;
        let mut identity = 0.0;
        for i in 0..q.len() {
            let expect = 1.0 / (m * q.probabilities()[i]);
            assert!((q.set().weight(i) - expect).abs() <= 1e-12 * expect);
            identity += q.set().weight(i) * q.probabilities()[i];
        }
        // sum of u(q) * prob(q) telescopes to 1 for unit-weight inputs
        assert!((identity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn draw_frequencies_track_probabilities() {
        let p = demo_set();
        let prof = sigmoid_sensitivity(&p, 100.0).unwrap();
        let probs = prof.probabilities();
        let size = 100_000;
        let q = build_coreset(&p, &prof, size, 12345).unwrap();
        let mut counts = [0usize; 4];
        for &idx in q.source_indices() {
            counts[idx] += 1;
        }
        for i in 0..4 {
            let freq = counts[i] as f64 / size as f64;
            let se = (probs[i] * (1.0 - probs[i]) / size as f64).sqrt();
            assert!(
                (freq - probs[i]).abs() <= 3.0 * se,
                "index {i}: freq {freq} vs prob {} (3se {})",
                probs[i],
                3.0 * se
            );
        }
    }

    #[test]
    fn estimates_are_unbiased_smoke() {
        let p = demo_set();
        let spec = KernelSpec::sigmoid(100.0).unwrap();
        let prof = sigmoid_sensitivity(&p, 100.0).unwrap();
        let x = Query::new(vec![0.25, -1.0]).unwrap();
        let truth = total_cost(&p, &spec, &x).unwrap();
        let reps = 4000;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for s in 0..reps {
            let q = build_coreset(&p, &prof, 8, s as u64).unwrap();
            let est = total_cost(q.set(), &spec, &x).unwrap();
            let delta = est - mean;
            mean += delta / (s + 1) as f64;
            m2 += delta * (est - mean);
        }
        let se = (m2 / (reps as f64 - 1.0) / reps as f64).sqrt();
        assert!(
            (mean - truth).abs() <= 3.0 * se,
            "mean {mean} vs truth {truth} (3se {})",
            3.0 * se
        );
    }

    #[test]
    fn uniform_weights_are_n_over_m() {
        let p = demo_set();
        let q = uniform_sample(&p, 10, 7).unwrap();
        for i in 0..q.len() {
            assert_eq!(q.set().weight(i), 4.0 / 10.0 * 1.0 / q.probabilities()[i] / 4.0);
            assert!((q.set().weight(i) - 0.4).abs() < 1e-15);
        }
    }

    #[test]
    fn theorem_size_is_clamped_to_n() {
        let p = demo_set();
        let spec = KernelSpec::sigmoid(100.0).unwrap();
        let q = monotonic_coreset(&p, &spec, 0.3, 0.1, 4).unwrap();
        assert_eq!(q.len(), p.len());
        assert_eq!(q.eps(), Some(0.3));
        assert_eq!(q.delta(), Some(0.1));
    }

    #[test]
    fn compact_merges_duplicates() {
        let p = demo_set();
        let prof = sigmoid_sensitivity(&p, 100.0).unwrap();
        let q = build_coreset(&p, &prof, 200, 2).unwrap();
        let c = q.compact();
        assert!(c.len() <= 4);
        let mut sorted = c.source_indices().to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), c.len());
        let total_before = q.set().total_weight();
        let total_after = c.set().total_weight();
        assert!((total_before - total_after).abs() <= 1e-9 * total_before.abs());
        // estimates unchanged at an arbitrary query
        let spec = KernelSpec::sigmoid(100.0).unwrap();
        let x = Query::new(vec![0.4, 0.2]).unwrap();
        let a = total_cost(q.set(), &spec, &x).unwrap();
        let b = total_cost(c.set(), &spec, &x).unwrap();
        assert!((a - b).abs() <= 1e-9 * a.abs());
    }
}
