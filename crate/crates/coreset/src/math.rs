//! Numerically stable scalar primitives and compensated summation.
//!
//! Every transcendental used by the cost functions lives here so the
//! stability-critical branches are written exactly once.

/// Logistic sigmoid `1 / (1 + e^-z)`, evaluated branch-wise so neither
/// branch ever exponentiates a positive argument.
///
/// ```
/// let s = coreset::math::sigmoid(0.0);
/// assert_eq!(s, 0.5);
/// assert!(coreset::math::sigmoid(-800.0) >= 0.0);
/// assert!(coreset::math::sigmoid(800.0) <= 1.0);
/// ```
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Softplus `ln(1 + e^z)` via `max(z, 0) + ln1p(e^-|z|)`; monotone,
/// positive, and overflow-free on the whole axis.
///
/// ```
/// let v = coreset::math::softplus(0.0);
/// assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
/// assert!(coreset::math::softplus(1000.0).is_finite());
/// ```
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Squared sigmoid `sigmoid(z)^2`.
#[inline]
pub fn sigmoid_squared(z: f64) -> f64 {
    let s = sigmoid(z);
    s * s
}

/// Derivative of [`sigmoid`]: `s(z) * (1 - s(z))`.
#[inline]
pub fn sigmoid_deriv(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 - s)
}

/// Derivative of [`softplus`], which is the sigmoid itself.
#[inline]
pub fn softplus_deriv(z: f64) -> f64 {
    sigmoid(z)
}

/// Derivative of [`sigmoid_squared`]: `2 s(z) * s'(z)`.
#[inline]
pub fn sigmoid_squared_deriv(z: f64) -> f64 {
    let s = sigmoid(z);
    2.0 * s * s * (1.0 - s)
}

/// Kahan compensated accumulator. Summation order is whatever order the
/// caller feeds values in; determinism follows from fixed iteration order
/// at the call sites.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let y = value - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated sum of an iterator, in iteration order.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Dot product of two equal-length slices.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Euclidean norm of a slice.
#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_probe_values() {
        // Golden points: exact at 0, saturates cleanly at +/-40.
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!((sigmoid(-1.0) - 0.268_941_421_369_995_1).abs() < 1e-15);
        assert!(sigmoid(40.0) > 1.0 - 1e-15);
        assert!(sigmoid(-40.0) < 1e-15);
        assert!(sigmoid(-745.0) >= 0.0);
        assert!(sigmoid(745.0) <= 1.0);
    }

    #[test]
    fn sigmoid_symmetry() {
        for i in 0..2000 {
            let z = -50.0 + i as f64 * 0.05;
            let s = sigmoid(z) + sigmoid(-z);
            assert!((s - 1.0).abs() < 1e-12, "symmetry broke at z={z}: {s}");
        }
    }

    #[test]
    fn softplus_probe_values() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
        // softplus(z) - softplus(-z) == z
        for i in 0..1000 {
            let z = -30.0 + i as f64 * 0.06;
            let d = softplus(z) - softplus(-z);
            assert!((d - z).abs() < 1e-9 * z.abs().max(1.0));
        }
        // Linear regime: softplus(z) ~ z for large z.
        assert!((softplus(500.0) - 500.0).abs() < 1e-12);
        assert!(softplus(-500.0) > 0.0);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn squared_sigmoid_matches_composition() {
        for i in 0..500 {
            let z = -25.0 + i as f64 * 0.1;
            let s = sigmoid(z);
            assert_eq!(sigmoid_squared(z), s * s);
        }
    }

    #[test]
    fn derivatives_match_central_differences() {
        let h = 1e-6;
        for i in 0..200 {
            let z = -10.0 + i as f64 * 0.1;
            let checks = [
                (sigmoid_deriv(z), (sigmoid(z + h) - sigmoid(z - h)) / (2.0 * h)),
                (softplus_deriv(z), (softplus(z + h) - softplus(z - h)) / (2.0 * h)),
                (
                    sigmoid_squared_deriv(z),
                    (sigmoid_squared(z + h) - sigmoid_squared(z - h)) / (2.0 * h),
                ),
            ];
            for (analytic, numeric) in checks {
                assert!(
                    (analytic - numeric).abs() < 1e-7,
                    "derivative mismatch at z={z}: {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn kahan_beats_naive_on_adversarial_order() {
        // 1 followed by 1e8 copies of 1e-16 sums to 1 + 1e-8 exactly in
        // compensated arithmetic; naive summation loses every term.
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..100_000_000u64 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-8)).abs() < 1e-12);
    }

    #[test]
    fn kahan_scaling_is_exact() {
        // Doubling every input doubles the compensated sum bit-for-bit.
        let xs: Vec<f64> = (1..500).map(|i| 1.0 / i as f64).collect();
        let a = kahan_sum(xs.iter().copied());
        let b = kahan_sum(xs.iter().map(|x| 2.0 * x));
        assert_eq!(2.0 * a, b);
    }
}
