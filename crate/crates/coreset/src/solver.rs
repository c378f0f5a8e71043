//! Minimization of the total weighted cost over queries.
//!
//! Limited-memory BFGS with Armijo backtracking. Logistic kernels are
//! constrained to their query ball: candidates are projected before
//! evaluation, so every iterate (and the result) is admissible.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::kernel::{total_cost, total_cost_gradient, KernelSpec};
use crate::math;
use crate::rng::{derive_seed, rng_from_seed};
use crate::set::{Query, WeightedPointSet};

/// Curvature pairs kept by the two-loop recursion.
const HISTORY: usize = 10;
/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
/// Accepted steps shorter than this stop the iteration.
const STEP_FLOOR: f64 = 1e-12;
/// Line-search step size giving up entirely.
const STEP_GIVE_UP: f64 = 1e-20;

/// Outcome of one minimization run.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x_star: Vec<f64>,
    pub value: f64,
    /// Accepted descent steps.
    pub iterations: usize,
    /// Euclidean norm of the (unconstrained) gradient at `x_star`.
    pub gradient_norm: f64,
    /// Gradient tolerance reached, or the step size collapsed (the latter
    /// is how constrained optima on the ball boundary terminate).
    pub converged: bool,
}

fn project(spec: &KernelSpec, x: &mut [f64]) {
    if let Some(r) = spec.radius() {
        let norm = math::norm(x);
        if norm > r {
            let s = r / norm;
            for c in x.iter_mut() {
                *c *= s;
            }
        }
    }
}

fn eval(p: &WeightedPointSet, spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    total_cost(p, spec, &Query::new(x.to_vec())?)
}

fn eval_grad(p: &WeightedPointSet, spec: &KernelSpec, x: &[f64]) -> Result<Vec<f64>> {
    total_cost_gradient(p, spec, &Query::new(x.to_vec())?)
}

/// Minimize `C(P, w, .)` from `init`.
///
/// Each accepted step strictly decreases the cost (Armijo with a descent
/// direction). Stops when the gradient norm drops to `tol`, the step
/// collapses below `1e-12`, or `max_iter` accepted steps have been taken.
pub fn minimize(
    p: &WeightedPointSet,
    spec: &KernelSpec,
    init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    if !p.is_empty() && init.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: init.len() });
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let d = init.len();
    let mut x = init.to_vec();
    project(spec, &mut x);
    let mut f = eval(p, spec, &x)?;
    if !f.is_finite() {
        return Err(Error::NonFinite(format!("cost at the initial point: {f}")));
    }
    let mut g = eval_grad(p, spec, &x)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient at the initial point".into()));
    }
    let mut gnorm = math::norm(&g);

    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(HISTORY);
    let mut iterations = 0usize;
    let mut converged = gnorm <= tol;

    while !converged && iterations < max_iter {
        let mut dir = two_loop(&pairs, &g);
        let mut descent = math::dot(&dir, &g);
        if descent >= 0.0 || !descent.is_finite() {
            // Stale curvature; fall back to steepest descent.
            pairs.clear();
            dir = g.iter().map(|v| -v).collect();
            descent = -gnorm * gnorm;
        }

        let mut t = 1.0f64;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        while t > STEP_GIVE_UP {
            let mut cand: Vec<f64> = (0..d).map(|i| x[i] + t * dir[i]).collect();
            project(spec, &mut cand);
            let fc = eval(p, spec, &cand)?;
            if fc.is_finite() && fc <= f + ARMIJO_C * t * descent {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            // No admissible decrease left; constrained optimum or floor.
            converged = true;
            break;
        };

        let step: Vec<f64> = (0..d).map(|i| cand[i] - x[i]).collect();
        let step_norm = math::norm(&step);
        let g_new = eval_grad(p, spec, &cand)?;
        if g_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient during iteration".into()));
        }
        let y: Vec<f64> = (0..d).map(|i| g_new[i] - g[i]).collect();
        let sy = math::dot(&step, &y);
        if sy > 1e-12 * step_norm * math::norm(&y) && sy.is_finite() {
            if pairs.len() == HISTORY {
                pairs.pop_front();
            }
            let rho = 1.0 / sy;
            pairs.push_back((step.clone(), y, rho));
        }

        x = cand;
        f = fc;
        g = g_new;
        gnorm = math::norm(&g);
        iterations += 1;
        if gnorm <= tol || step_norm <= STEP_FLOOR {
            converged = true;
        }
    }

    Ok(SolveResult { x_star: x, value: f, iterations, gradient_norm: gnorm, converged })
}

/// Two-loop recursion: apply the implicit inverse Hessian to `g`, negated.
fn two_loop(pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let alpha = rho * math::dot(s, &q);
        for i in 0..q.len() {
            q[i] -= alpha * y[i];
        }
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = pairs.back() {
        let yy = math::dot(y, y);
        if yy > 0.0 {
            let gamma = math::dot(s, y) / yy;
            for v in q.iter_mut() {
                *v *= gamma;
            }
        }
    }
    for ((s, y, rho), alpha) in pairs.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * math::dot(y, &q);
        for i in 0..q.len() {
            q[i] += (alpha - beta) * s[i];
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Best of `starts` runs: run 0 starts at the origin, later runs at seeded
/// uniform draws from the unit ball (projected into the query ball when
/// one applies). Ties keep the earliest run, so the result is a
/// deterministic function of the arguments.
pub fn multistart_minimize(
    p: &WeightedPointSet,
    spec: &KernelSpec,
    starts: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    if starts == 0 {
        return Err(Error::invalid("multistart needs at least one start"));
    }
    if p.is_empty() {
        return Err(Error::EmptyInput("multistart needs a non-empty set"));
    }
    let d = p.dim();
    let mut best: Option<SolveResult> = None;
    for run in 0..starts {
        let init = if run == 0 {
            vec![0.0; d]
        } else {
            let mut rng = rng_from_seed(derive_seed(seed, run as u64));
            crate::rng::sample_ball(&mut rng, d, 1.0)
        };
        let result = minimize(p, spec, &init, tol, max_iter)?;
        best = match best {
            None => Some(result),
            Some(b) if result.value < b.value => Some(result),
            Some(b) => Some(b),
        };
    }
    Ok(best.expect("at least one run"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::set::WeightedPointSet;

    #[test]
    fn symmetric_logistic_minimizes_at_origin() {
        // softplus(x) + softplus(-x) + 2 x^2 / k is even with a unique
        // minimum at 0 of value 2 ln 2.
        let p = WeightedPointSet::unit(vec![vec![1.0], vec![-1.0]]).unwrap();
        let spec = KernelSpec::logistic(10.0, 5.0).unwrap();
        let r = minimize(&p, &spec, &[3.0], 1e-10, 200).unwrap();
        assert!(r.converged);
        assert!(r.x_star[0].abs() < 1e-8, "x* = {}", r.x_star[0]);
        assert!((r.value - 2.0 * std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn stationarity_at_reported_minimum() {
        let p = WeightedPointSet::unit(vec![vec![1.0, 0.3], vec![0.5, -0.8], vec![-0.2, 0.1]])
            .unwrap();
        let spec = KernelSpec::sigmoid(2.0).unwrap();
        let r = minimize(&p, &spec, &[0.5, -0.5], 1e-9, 500).unwrap();
        assert!(r.converged);
        assert!(r.gradient_norm <= 1e-9);
        // central differences confirm stationarity
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = r.x_star.clone();
            let mut xm = r.x_star.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (eval(&p, &spec, &xp).unwrap() - eval(&p, &spec, &xm).unwrap()) / (2.0 * h);
            assert!(fd.abs() < 1e-5, "fd grad {fd} at coord {i}");
        }
    }

    #[test]
    fn value_never_exceeds_start() {
        let p = WeightedPointSet::unit(vec![vec![2.0, 1.0], vec![-1.0, 2.0]]).unwrap();
        let spec = KernelSpec::sigmoid_squared(5.0).unwrap();
        let init = [1.5, -2.0];
        let f0 = eval(&p, &spec, &init).unwrap();
        let r = minimize(&p, &spec, &init, 1e-8, 300).unwrap();
        assert!(r.value <= f0);
    }

    #[test]
    fn logistic_iterates_stay_in_ball() {
        let p = WeightedPointSet::unit(vec![vec![1.0, 0.0], vec![0.9, 0.1]]).unwrap();
        // Unregularized-ish pull toward the boundary: tiny radius.
        let spec = KernelSpec::logistic(1e6, 0.5).unwrap();
        let r = minimize(&p, &spec, &[0.4, 0.3], 1e-9, 400).unwrap();
        assert!(math::norm(&r.x_star) <= 0.5 + 1e-9);
        assert!(r.converged);
        // The pull is outward, so the solution sits on the boundary.
        assert!(math::norm(&r.x_star) > 0.5 - 1e-6);
    }

    #[test]
    fn multistart_is_deterministic_and_picks_best() {
        let p = WeightedPointSet::unit(vec![
            vec![1.2, 0.1],
            vec![-0.7, 0.4],
            vec![0.3, -1.0],
            vec![0.0, 0.8],
        ])
        .unwrap();
        let spec = KernelSpec::sigmoid(3.0).unwrap();
        let a = multistart_minimize(&p, &spec, 5, 42, 1e-9, 300).unwrap();
        let b = multistart_minimize(&p, &spec, 5, 42, 1e-9, 300).unwrap();
        assert_eq!(a.x_star, b.x_star);
        let single = minimize(&p, &spec, &[0.0, 0.0], 1e-9, 300).unwrap();
        assert!(a.value <= single.value + 1e-15);
    }

    #[test]
    fn one_start_equals_origin_run() {
        let p = WeightedPointSet::unit(vec![vec![0.4], vec![-0.9]]).unwrap();
        let spec = KernelSpec::sigmoid(7.0).unwrap();
        let ms = multistart_minimize(&p, &spec, 1, 5, 1e-9, 200).unwrap();
        let direct = minimize(&p, &spec, &[0.0], 1e-9, 200).unwrap();
        assert_eq!(ms.x_star, direct.x_star);
        assert_eq!(ms.value, direct.value);
    }

    #[test]
    fn rejects_mismatched_init() {
        let p = WeightedPointSet::unit(vec![vec![1.0, 2.0]]).unwrap();
        let spec = KernelSpec::sigmoid(1.0).unwrap();
        assert!(minimize(&p, &spec, &[1.0], 1e-8, 10).is_err());
    }
}
