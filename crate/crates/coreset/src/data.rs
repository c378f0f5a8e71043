//! Dataset ingestion and the synthetic corpora used by the experiments.
//!
//! The CSV dialect is deliberately narrow: comma separator, `.` decimal,
//! UTF-8, one optional header row (detected by failing to parse), no
//! quoting. Errors carry 1-based row numbers.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::rng_from_seed;
use crate::set::WeightedPointSet;

/// How point coordinates were rescaled at load time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    None,
    /// All coordinates divided by the largest point norm, so the set fits
    /// in the unit ball.
    UnitBall,
}

/// A loaded point set, its optional labels, and how it was normalized.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub set: WeightedPointSet,
    /// Per-point labels in {-1, +1} when a label column was given.
    pub labels: Option<Vec<f64>>,
    pub name: String,
    pub normalization: Normalization,
}

/// Divide every coordinate by the largest point norm. Returns the scaled
/// set and the divisor. Weights are untouched.
pub fn normalize_unit_ball(set: &WeightedPointSet) -> Result<(WeightedPointSet, f64)> {
    if set.is_empty() {
        return Err(Error::EmptyInput("cannot normalize an empty set"));
    }
    let max = set.norms().into_iter().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return Err(Error::invalid("all points sit at the origin; nothing to normalize"));
    }
    let rows: Vec<Vec<f64>> =
        (0..set.len()).map(|i| set.point(i).iter().map(|c| c / max).collect()).collect();
    Ok((WeightedPointSet::from_rows(rows, set.weights().to_vec())?, max))
}

fn map_label(raw: f64, row: usize) -> Result<f64> {
    if raw == 0.0 || raw == -1.0 {
        Ok(-1.0)
    } else if raw == 1.0 {
        Ok(1.0)
    } else {
        Err(Error::Csv { row, msg: format!("label must be 0/1 or -1/+1, got {raw}") })
    }
}

/// Load a numeric CSV as a unit-weighted point set.
///
/// `label_column` is 0-based; the column is removed from the points and
/// returned as labels mapped to {-1, +1} (from either 0/1 or -1/+1). With
/// `fold_labels` each point is also multiplied by its mapped label, the
/// usual reduction of supervised losses to the unsupervised form.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: Option<usize>,
    fold_labels: bool,
    normalize: Normalization,
) -> Result<Dataset> {
    if fold_labels && label_column.is_none() {
        return Err(Error::invalid("folding labels requires a label column"));
    }
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut saw_header = false;

    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> =
            cells.iter().map(|c| c.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && !saw_header => {
                // First unparsable row is the header.
                saw_header = true;
                width = Some(cells.len());
                continue;
            }
            Err(_) => {
                let bad = cells.iter().find(|c| c.parse::<f64>().is_err()).unwrap_or(&"");
                return Err(Error::Csv { row, msg: format!("non-numeric cell '{bad}'") });
            }
        };
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Csv { row, msg: format!("non-finite value {v}") });
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Csv {
                    row,
                    msg: format!("expected {w} columns, found {}", values.len()),
                });
            }
            Some(_) => {}
        }
        match label_column {
            None => rows.push(values),
            Some(col) => {
                if col >= values.len() {
                    return Err(Error::Csv {
                        row,
                        msg: format!("label column {col} out of range for {} columns", values.len()),
                    });
                }
                let label = map_label(values[col], row)?;
                let mut point: Vec<f64> = values;
                point.remove(col);
                if fold_labels {
                    for c in point.iter_mut() {
                        *c *= label;
                    }
                }
                labels.push(label);
                rows.push(point);
            }
        }
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput("csv contains no data rows"));
    }
    if rows[0].is_empty() {
        return Err(Error::invalid("csv rows have no point columns"));
    }
    let set = WeightedPointSet::unit(rows)?;
    let (set, normalization) = match normalize {
        Normalization::None => (set, Normalization::None),
        Normalization::UnitBall => (normalize_unit_ball(&set)?.0, Normalization::UnitBall),
    };
    Ok(Dataset {
        set,
        labels: label_column.map(|_| labels),
        name,
        normalization,
    })
}

/// Write a weighted set as CSV with header `x0,..,x{d-1},weight`.
pub fn write_weighted_csv(path: impl AsRef<Path>, set: &WeightedPointSet) -> Result<()> {
    let mut out = Vec::new();
    let header: Vec<String> = (0..set.dim()).map(|i| format!("x{i}")).collect();
    writeln!(out, "{},weight", header.join(",")).expect("vec write");
    for (p, w) in set.iter() {
        let cells: Vec<String> = p.iter().map(|c| format!("{c:?}")).collect();
        writeln!(out, "{},{w:?}", cells.join(",")).expect("vec write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a weighted set from CSV; the last column is the weight.
pub fn read_weighted_csv(path: impl AsRef<Path>) -> Result<WeightedPointSet> {
    let data = load_csv(path, None, false, Normalization::None)?;
    let ncols = data.set.dim();
    if ncols < 2 {
        return Err(Error::invalid("weighted csv needs at least one point column plus weight"));
    }
    let d = ncols - 1;
    let mut rows = Vec::with_capacity(data.set.len());
    let mut weights = Vec::with_capacity(data.set.len());
    for (p, _) in data.set.iter() {
        rows.push(p[..d].to_vec());
        weights.push(p[d]);
    }
    WeightedPointSet::from_rows(rows, weights)
}

/// Two Gaussian clusters of opposite sign and wildly unequal size: 20,000
/// points around (10000, 10000) and 10 around (-9998, -9998), all with
/// coordinate noise 0.05.
///
/// The minority sits at strictly smaller norms, so a norm-ranked
/// sensitivity profile puts it first and a sensitivity-sampled coreset of
/// a few hundred points essentially always carries it, while a uniform
/// sample of that size misses all ten with high probability. The minority
/// is what keeps the sigmoid optimum away from the majority's preferred
/// direction, so missing it moves the argmin badly.
pub fn make_synthetic(seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let mut rows = Vec::with_capacity(20_010);
    let mut cluster = |n: usize, mean: [f64; 2], rng: &mut rand_chacha::ChaCha8Rng| {
        for _ in 0..n {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            rows.push(vec![mean[0] + 0.05 * z0, mean[1] + 0.05 * z1]);
        }
    };
    cluster(20_000, [10_000.0, 10_000.0], &mut rng);
    cluster(10, [-9_998.0, -9_998.0], &mut rng);
    Dataset {
        set: WeightedPointSet::unit(rows).expect("finite by construction"),
        labels: None,
        name: "synthetic".into(),
        normalization: Normalization::None,
    }
}

/// Labeled 12-dimensional set shaped like a small tabular benchmark:
/// n = 6497 with a dominant label pattern plus a minority of 130
/// contrarian points at strictly smaller norms.
///
/// After label folding the majority occupies a cone around one direction,
/// which alone would be linearly separable: a small subsample that misses
/// the contrarians drives the regularized logistic fit to the query-ball
/// boundary and inflates held-out loss. The contrarians occupy the lowest
/// norm ranks, so sensitivity sampling retains them at sizes where
/// uniform sampling frequently has none.
pub fn make_wine_like(seed: u64) -> Dataset {
    const N: usize = 6497;
    const D: usize = 12;
    const MINORITY: usize = 130;

    let mut rng = rng_from_seed(seed);
    let mut axis = vec![0.0; D];
    axis[0] = 1.0;

    // folded = norm * (-align * axis + sqrt(1 - align^2) * perp) for the
    // majority; contrarians use +align. Raw points are folded * label.
    let mut rows = Vec::with_capacity(N);
    let mut labels = Vec::with_capacity(N);
    let push = |align: f64, norm: f64, rng: &mut rand_chacha::ChaCha8Rng,
                    rows: &mut Vec<Vec<f64>>, labels: &mut Vec<f64>| {
        let mut perp: Vec<f64> = (0..D).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let along = math::dot(&perp, &axis);
        for (c, a) in perp.iter_mut().zip(axis.iter()) {
            *c -= along * a;
        }
        let pn = math::norm(&perp).max(1e-12);
        let ortho = (1.0 - align * align).max(0.0).sqrt();
        let folded: Vec<f64> = (0..D)
            .map(|i| norm * (align * axis[i] + ortho * perp[i] / pn))
            .collect();
        let label: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        rows.push(folded.iter().map(|c| c * label).collect());
        labels.push(label);
    };

    for _ in 0..N - MINORITY {
        let align = -(0.35 + 0.4 * rng.gen::<f64>());
        let norm = 0.85 + 0.15 * rng.gen::<f64>();
        push(align, norm, &mut rng, &mut rows, &mut labels);
    }
    for _ in 0..MINORITY {
        let align = 0.85 + 0.1 * rng.gen::<f64>();
        let norm = 0.45 + 0.1 * rng.gen::<f64>();
        push(align, norm, &mut rng, &mut rows, &mut labels);
    }

    Dataset {
        set: WeightedPointSet::unit(rows).expect("finite by construction"),
        labels: Some(labels),
        name: "wine-like".into(),
        normalization: Normalization::None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn plain_numeric_rows_load_unit_weighted() {
        let f = write_tmp("1.0,2.0\n3.0,4.0\n-1.5,0.25\n");
        let d = load_csv(f.path(), None, false, Normalization::None).unwrap();
        assert_eq!(d.set.len(), 3);
        assert_eq!(d.set.dim(), 2);
        assert!(d.set.is_unit_weighted());
        assert!(d.labels.is_none());
        assert_eq!(d.set.point(2), &[-1.5, 0.25]);
    }

    #[test]
    fn header_is_detected_and_skipped() {
        let f = write_tmp("alpha,beta\n1,2\n3,4\n");
        let d = load_csv(f.path(), None, false, Normalization::None).unwrap();
        assert_eq!(d.set.len(), 2);
    }

    #[test]
    fn non_numeric_cell_reports_row() {
        let f = write_tmp("1,2\n3,oops\n");
        let err = load_csv(f.path(), None, false, Normalization::None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn ragged_row_reports_row() {
        let f = write_tmp("1,2\n3,4,5\n");
        let err = load_csv(f.path(), None, false, Normalization::None).unwrap_err();
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn empty_and_header_only_files_error() {
        let f = write_tmp("");
        assert!(load_csv(f.path(), None, false, Normalization::None).is_err());
        let f = write_tmp("a,b\n");
        assert!(load_csv(f.path(), None, false, Normalization::None).is_err());
    }

    #[test]
    fn zero_one_labels_fold_points() {
        let f = write_tmp("1.0,2.0,1\n3.0,4.0,0\n");
        let d = load_csv(f.path(), Some(2), true, Normalization::None).unwrap();
        assert_eq!(d.set.dim(), 2);
        assert_eq!(d.set.point(0), &[1.0, 2.0]);
        assert_eq!(d.set.point(1), &[-3.0, -4.0]);
        assert_eq!(d.labels.as_deref(), Some(&[1.0, -1.0][..]));
    }

    #[test]
    fn plus_minus_labels_pass_through() {
        let f = write_tmp("-1,5.0\n1,6.0\n");
        let d = load_csv(f.path(), Some(0), false, Normalization::None).unwrap();
        assert_eq!(d.set.point(0), &[5.0]);
        assert_eq!(d.labels.as_deref(), Some(&[-1.0, 1.0][..]));
    }

    #[test]
    fn bad_label_value_errors_with_row() {
        let f = write_tmp("1,1\n3,7\n");
        let err = load_csv(f.path(), Some(1), true, Normalization::None).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn fold_without_label_column_rejected() {
        let f = write_tmp("1,2\n");
        assert!(load_csv(f.path(), None, true, Normalization::None).is_err());
    }

    #[test]
    fn unit_ball_normalization_caps_norms() {
        let f = write_tmp("3,4\n0.3,0.4\n");
        let d = load_csv(f.path(), None, false, Normalization::UnitBall).unwrap();
        let norms = d.set.norms();
        assert!(norms.iter().all(|&n| n <= 1.0 + 1e-12));
        assert!((norms[0] - 1.0).abs() <= 1e-12);
        assert!((norms[1] - 0.1).abs() <= 1e-12);
    }

    #[test]
    fn weighted_csv_round_trips() {
        let set = WeightedPointSet::from_rows(
            vec![vec![1.5, -2.25], vec![0.1, 0.0078125]],
            vec![3.5, 0.125],
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_weighted_csv(f.path(), &set).unwrap();
        let back = read_weighted_csv(f.path()).unwrap();
        assert_eq!(back.dim(), 2);
        assert_eq!(back.point(0), set.point(0));
        assert_eq!(back.point(1), set.point(1));
        assert_eq!(back.weights(), set.weights());
    }

    #[test]
    fn synthetic_shape_and_clusters() {
        let d = make_synthetic(7);
        assert_eq!(d.set.len(), 20_010);
        assert_eq!(d.set.dim(), 2);
        // big-cluster sample mean within 3 sigma / sqrt(n) per coordinate
        let n = 20_000;
        let tol = 3.0 * 0.05 / (n as f64).sqrt();
        for coord in 0..2 {
            let mean: f64 =
                (0..n).map(|i| d.set.point(i)[coord]).sum::<f64>() / n as f64;
            assert!((mean - 10_000.0).abs() <= tol, "coord {coord} mean {mean}");
        }
        for i in n..20_010 {
            assert!(d.set.point(i)[0] < -9_990.0);
        }
        // minority norms strictly below majority norms
        let norms = d.set.norms();
        let min_major = norms[..n].iter().cloned().fold(f64::INFINITY, f64::min);
        let max_minor = norms[n..].iter().cloned().fold(0.0f64, f64::max);
        assert!(max_minor < min_major);
    }

    #[test]
    fn synthetic_is_seed_deterministic() {
        let a = make_synthetic(3);
        let b = make_synthetic(3);
        assert_eq!(a.set.point(123), b.set.point(123));
        let c = make_synthetic(4);
        assert_ne!(a.set.point(123), c.set.point(123));
    }

    #[test]
    fn wine_like_shape_and_rank_structure() {
        let d = make_wine_like(11);
        assert_eq!(d.set.len(), 6497);
        assert_eq!(d.set.dim(), 12);
        let labels = d.labels.as_ref().unwrap();
        assert!(labels.iter().all(|&l| l == 1.0 || l == -1.0));
        // contrarians (the last 130) occupy the lowest norm ranks
        let norms = d.set.norms();
        let max_minor = norms[6497 - 130..].iter().cloned().fold(0.0f64, f64::max);
        let min_major = norms[..6497 - 130].iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max_minor < min_major);
        // folded majority shares a halfspace: axis coordinate negative
        for i in 0..100 {
            let folded: f64 = d.set.point(i)[0] * labels[i];
            assert!(folded < 0.0, "majority point {i} leans the wrong way");
        }
        for i in 6497 - 130..6497 {
            let folded: f64 = d.set.point(i)[0] * labels[i];
            assert!(folded > 0.0, "contrarian {i} leans the wrong way");
        }
    }
}
