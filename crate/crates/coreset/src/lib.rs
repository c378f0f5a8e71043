//! Coresets with a guarantee for monotonic-kernel losses.
//!
//! This crate compresses a weighted point set `P` into a much smaller
//! weighted set `Q` such that, for every admissible query `x`, the total
//! cost `sum_p w(p) (f(p.x) + |x|^2 / k)` computed on `Q` stays within a
//! relative `eps` of the value on `P`, with probability `1 - delta`. The
//! link `f` is the sigmoid, the softplus (logistic loss), or the squared
//! sigmoid; `k` tunes the L2 regularizer and `k = inf` disables it.
//!
//! The pipeline: rank points by norm, attach to each point a closed-form
//! upper bound on its worst-case cost share ([`sensitivity`]), sample
//! points with probability proportional to those bounds and reweight to
//! keep the estimator unbiased ([`sampler`]). The bound's validity rests
//! on a handful of scalar inequalities that [`verifier`] re-checks
//! numerically, including the polygon construction showing that uniform
//! sampling admits no such guarantee. [`stream`] composes coresets over
//! batches for data that does not fit in memory, [`solver`] minimizes the
//! total cost, and [`experiment`] drives the coreset-versus-uniform
//! comparisons end to end.
//!
//! Conventions throughout:
//! - every fallible operation returns [`Result`]; panics are reserved for
//!   internal invariant violations, never for bad input or bad data;
//! - every random procedure takes an explicit `u64` seed and is
//!   reproducible bit for bit, independent of platform and thread count;
//! - points, weights, and queries must be finite; constructors reject
//!   anything else up front so numeric kernels never see a NaN.
//!
//! # Quick start
//!
//! ```
//! use coreset::{monotonic_coreset, total_cost, KernelSpec, Query, WeightedPointSet};
//!
//! # fn main() -> coreset::Result<()> {
//! // 200 unit-weight points on a ring inside the unit ball.
//! let rows: Vec<Vec<f64>> = (0..200)
//!     .map(|i| {
//!         let a = i as f64 / 200.0 * std::f64::consts::TAU;
//!         vec![0.9 * a.cos(), 0.9 * a.sin()]
//!     })
//!     .collect();
//! let p = WeightedPointSet::unit(rows)?;
//!
//! let spec = KernelSpec::sigmoid(100.0)?;
//! let q = monotonic_coreset(&p, &spec, 0.5, 0.1, 7)?;
//!
//! let x = Query::new(vec![0.3, -0.2])?;
//! let full = total_cost(&p, &spec, &x)?;
//! let approx = total_cost(q.set(), &spec, &x)?;
//! assert!((approx / full - 1.0).abs() < 0.5);
//! # Ok(())
//! # }
//! ```

pub mod data;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod math;
pub mod rng;
pub mod sampler;
pub mod sensitivity;
pub mod set;
pub mod solver;
pub mod stream;
pub mod verifier;

pub use error::{Error, Result};
pub use kernel::{total_cost, total_cost_gradient, KernelKind, KernelSpec};
pub use sampler::{build_coreset, coreset_size, monotonic_coreset, uniform_sample, Coreset};
pub use sensitivity::{profile_for_spec, SensitivityProfile};
pub use set::{Query, WeightedPointSet};
pub use solver::{minimize, multistart_minimize, SolveResult};
pub use stream::{stream_coreset, stream_coreset_detailed, MergeTreeConfig, StreamStats};

// The guide's code blocks compile and run as doctests, keeping prose and
// library in lockstep.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/weighted-sets.md")]
    mod weighted_sets {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/sensitivity.md")]
    mod sensitivity {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/streaming.md")]
    mod streaming {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/lower-bounds.md")]
    mod lower_bounds {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
