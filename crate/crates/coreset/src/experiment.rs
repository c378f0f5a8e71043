//! The coreset-versus-uniform experiment driver and its report formats.
//!
//! Two modes share one report shape. The unsupervised mode scores a
//! subsample by how far the full objective at the subsample's minimizer
//! sits from the full optimum. The supervised mode scores held-out mean
//! loss of a fit trained on the subsample. Every trial draws its
//! randomness from a seed derived from the config seed and the trial's
//! position, so reports are byte-identical across runs and thread counts.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{total_cost, KernelKind, KernelSpec};
use crate::math::{kahan_sum, KahanSum};
use crate::rng::derive_seed;
use crate::sampler::{build_coreset, uniform_sample, Coreset};
use crate::sensitivity::profile_for_spec;
use crate::set::{Query, WeightedPointSet};
use crate::solver::{minimize, multistart_minimize};

/// Version stamp on every emitted report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Ground-truth fits use this many starts; per-trial fits use one.
const GROUND_TRUTH_STARTS: usize = 8;
const SOLVE_TOL: f64 = 1e-8;
const SOLVE_MAX_ITER: usize = 500;

/// Subsampling policies compared by the driver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Coreset,
    Uniform,
    Full,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Coreset => "coreset",
            Method::Uniform => "uniform",
            Method::Full => "full",
        }
    }
}

/// Experiment parameters, deserializable from a JSON config file.
///
/// `size_schedule` holds multipliers of `ln n`: each entry `a` yields a
/// subsample size `round(a ln n)` clamped to `[1, n]`. Duplicate sizes
/// after rounding are collapsed, keeping the first occurrence.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelKind,
    pub k: f64,
    #[serde(default)]
    pub r: Option<f64>,
    pub eps: f64,
    pub delta: f64,
    pub size_schedule: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if self.size_schedule.is_empty() {
            return Err(Error::EmptyInput("size schedule"));
        }
        if let Some(a) = self.size_schedule.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::invalid(format!("schedule multipliers must be positive, got {a}")));
        }
        if self.trials == 0 {
            return Err(Error::invalid("need at least one trial"));
        }
        if self.methods.is_empty() {
            return Err(Error::EmptyInput("method set"));
        }
        Ok(())
    }

    /// Kernel described by this config.
    pub fn spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel, self.k, self.r)
    }

    fn sizes(&self, n: usize) -> Vec<usize> {
        let ln_n = (n as f64).ln();
        let mut sizes = Vec::new();
        for a in &self.size_schedule {
            let m = ((a * ln_n).round() as usize).clamp(1, n);
            if !sizes.contains(&m) {
                sizes.push(m);
            }
        }
        sizes
    }
}

/// One scored trial.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrialRow {
    pub method: Method,
    pub m: usize,
    pub trial: usize,
    /// Relative optimum gap in the unsupervised mode, held-out mean loss
    /// in the supervised mode.
    pub value: f64,
}

/// Mean and sample standard deviation over one (method, size) cell.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AggregateRow {
    pub method: Method,
    pub m: usize,
    pub mean: f64,
    pub std: f64,
}

/// Full experiment outcome. Serialization skips the wall-clock field so
/// emitted bytes depend only on (dataset, config).
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    /// "optimum-gap" or "held-out-loss".
    pub mode: String,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub config: ExperimentConfig,
    /// Full-data optimum value, or full-data held-out loss.
    pub ground_truth: f64,
    pub rows: Vec<TrialRow>,
    pub aggregates: Vec<AggregateRow>,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

/// Rayon pool sized by the `CORESET_THREADS` env var when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("CORESET_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::invalid(format!("CORESET_THREADS must be an integer, got '{v}'")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::invalid(format!("thread pool: {e}")))
}

struct Task {
    method: Method,
    m: usize,
    trial: usize,
    seed: u64,
}

fn plan_tasks(config: &ExperimentConfig, sizes: &[usize]) -> Vec<Task> {
    let mut tasks = Vec::new();
    let mut index = 0u64;
    for &m in sizes {
        for &method in &config.methods {
            for trial in 0..config.trials {
                tasks.push(Task { method, m, trial, seed: derive_seed(config.seed, index) });
                index += 1;
            }
        }
    }
    tasks
}

fn aggregate(rows: &[TrialRow], sizes: &[usize], methods: &[Method]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for &m in sizes {
        for &method in methods {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.m == m && r.method == method)
                .map(|r| r.value)
                .collect();
            if vals.is_empty() {
                continue;
            }
            let mean = kahan_sum(vals.iter().copied()) / vals.len() as f64;
            let std = if vals.len() < 2 {
                0.0
            } else {
                let ss = kahan_sum(vals.iter().map(|v| (v - mean) * (v - mean)));
                (ss / (vals.len() - 1) as f64).sqrt()
            };
            out.push(AggregateRow { method, m, mean, std });
        }
    }
    out
}

fn subsample(
    train: &WeightedPointSet,
    profile: &crate::sensitivity::SensitivityProfile,
    method: Method,
    m: usize,
    seed: u64,
) -> Result<Coreset> {
    match method {
        Method::Coreset => build_coreset(train, profile, m, seed),
        Method::Uniform => uniform_sample(train, m, seed),
        Method::Full => unreachable!("full method never subsamples"),
    }
}

/// Compare subsampling methods by the relative gap of the full objective.
///
/// A ground-truth optimum value `C*` comes from a multistart fit on the
/// full set. Each trial fits a single start on its subsample and scores
/// `|C(full, x_trial) / C* - 1|`. Rows for the `full` method are zero by
/// definition and carry no randomness. Points must already sit in the
/// unit ball, which is the regime the sensitivity bounds are stated for.
pub fn run_sigmoid_experiment(data: &Dataset, config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let p = &data.set;
    if p.is_empty() {
        return Err(Error::EmptyInput("experiment dataset"));
    }
    let max_norm = p.norms().into_iter().fold(0.0f64, f64::max);
    if max_norm > 1.0 + 1e-9 {
        return Err(Error::invalid(format!(
            "points must lie in the unit ball (max norm {max_norm}); normalize first"
        )));
    }
    let spec = config.spec()?;
    let ground = multistart_minimize(
        p,
        &spec,
        GROUND_TRUTH_STARTS,
        derive_seed(config.seed, u64::MAX),
        SOLVE_TOL,
        SOLVE_MAX_ITER,
    )?;
    let c_star = ground.value;
    if c_star <= 0.0 {
        return Err(Error::NonFinite(format!("ground-truth optimum {c_star} is not positive")));
    }

    let profile = profile_for_spec(p, &spec)?;
    let sizes = config.sizes(p.len());
    let tasks = plan_tasks(config, &sizes);

    let rows: Result<Vec<TrialRow>> = thread_pool()?.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let value = match t.method {
                    Method::Full => 0.0,
                    _ => {
                        let sub = subsample(p, &profile, t.method, t.m, t.seed)?;
                        let fit =
                            minimize(sub.set(), &spec, &vec![0.0; p.dim()], SOLVE_TOL, SOLVE_MAX_ITER)?;
                        let at_full = total_cost(p, &spec, &Query::new(fit.x_star)?)?;
                        (at_full / c_star - 1.0).abs()
                    }
                };
                Ok(TrialRow { method: t.method, m: t.m, trial: t.trial, value })
            })
            .collect()
    });
    let rows = rows?;
    let aggregates = aggregate(&rows, &sizes, &config.methods);

    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: "optimum-gap".into(),
        dataset: data.name.clone(),
        n: p.len(),
        d: p.dim(),
        config: config.clone(),
        ground_truth: c_star,
        rows,
        aggregates,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Label-fold a slice of row indices out of a dataset.
fn folded_subset(data: &Dataset, labels: &[f64], idx: &[usize]) -> Result<WeightedPointSet> {
    let rows: Vec<Vec<f64>> = idx
        .iter()
        .map(|&i| data.set.point(i).iter().map(|c| c * labels[i]).collect())
        .collect();
    WeightedPointSet::unit(rows)
}

/// Mean unregularized loss of `x` over a folded point set.
fn mean_loss(test: &WeightedPointSet, kind: KernelKind, x: &[f64]) -> f64 {
    let mut s = KahanSum::new();
    for (p, _) in test.iter() {
        s.add(kind.link(crate::math::dot(p, x)));
    }
    s.value() / test.len() as f64
}

/// Compare subsampling methods by held-out mean loss of a supervised fit.
///
/// The labeled set is split by a seeded shuffle, labels are folded into
/// the points, and each method's fit (regularized, queries confined to
/// the config radius) is scored by its mean link loss on the held-out
/// fold. The `full` method's rows all carry the full-train fit's score.
pub fn run_logistic_experiment(
    data: &Dataset,
    config: &ExperimentConfig,
    test_fraction: f64,
) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let labels = data
        .labels
        .as_ref()
        .ok_or_else(|| Error::invalid("supervised experiment needs a labeled dataset"))?;
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction must lie in (0,1), got {test_fraction}")));
    }
    let n = data.set.len();
    if n < 3 {
        return Err(Error::invalid("need at least 3 labeled points to split"));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 2);
    let spec = config.spec()?;

    // Seeded shuffle: swap-based Fisher-Yates on index array.
    let mut order: Vec<usize> = (0..n).collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = crate::rng::rng_from_seed(derive_seed(config.seed, u64::MAX - 1));
        order.shuffle(&mut rng);
    }
    let (test_idx, train_idx) = order.split_at(n_test);
    let train = folded_subset(data, labels, train_idx)?;
    let test = folded_subset(data, labels, test_idx)?;

    let full_fit = minimize(&train, &spec, &vec![0.0; train.dim()], SOLVE_TOL, SOLVE_MAX_ITER)?;
    let full_loss = mean_loss(&test, config.kernel, &full_fit.x_star);

    let profile = profile_for_spec(&train, &spec)?;
    let sizes = config.sizes(train.len());
    let tasks = plan_tasks(config, &sizes);

    let rows: Result<Vec<TrialRow>> = thread_pool()?.install(|| {
        tasks
            .par_iter()
            .map(|t| {
                let value = match t.method {
                    Method::Full => full_loss,
                    _ => {
                        let sub = subsample(&train, &profile, t.method, t.m, t.seed)?;
                        let fit = minimize(
                            sub.set(),
                            &spec,
                            &vec![0.0; train.dim()],
                            SOLVE_TOL,
                            SOLVE_MAX_ITER,
                        )?;
                        mean_loss(&test, config.kernel, &fit.x_star)
                    }
                };
                Ok(TrialRow { method: t.method, m: t.m, trial: t.trial, value })
            })
            .collect()
    });
    let rows = rows?;
    let aggregates = aggregate(&rows, &sizes, &config.methods);

    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mode: "held-out-loss".into(),
        dataset: data.name.clone(),
        n,
        d: data.set.dim(),
        config: config.clone(),
        ground_truth: full_loss,
        rows,
        aggregates,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// On-disk report encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Serialize a report to `path`.
///
/// JSON is pretty-printed with struct field order. CSV is flat: a header,
/// one `trial` row per (method, m, trial), then one `aggregate` row per
/// (method, m) with empty trial/value cells. Bytes are deterministic for
/// a fixed report.
pub fn emit_report(
    report: &ExperimentReport,
    path: impl AsRef<std::path::Path>,
    format: ReportFormat,
) -> Result<()> {
    let bytes = match format {
        ReportFormat::Json => {
            let mut b = serde_json::to_vec_pretty(report)?;
            b.push(b'\n');
            b
        }
        ReportFormat::Csv => {
            let mut s = String::from("row_kind,method,m,trial,value,mean,std\n");
            for r in &report.rows {
                s.push_str(&format!(
                    "trial,{},{},{},{:?},,\n",
                    r.method.as_str(),
                    r.m,
                    r.trial,
                    r.value
                ));
            }
            for a in &report.aggregates {
                s.push_str(&format!(
                    "aggregate,{},{},,,{:?},{:?}\n",
                    a.method.as_str(),
                    a.m,
                    a.mean,
                    a.std
                ));
            }
            s.into_bytes()
        }
    };
    std::fs::write(path, bytes)?;
    Ok(())
}
