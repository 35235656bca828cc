//! Equal-probability grid generation per feature.
//!
//! Each feature's marginal density is estimated with a Gaussian KDE; the
//! grid points are the k/N quantiles of the smoothed CDF found by bisection,
//! with the feature bounds pinned as the first and last points. Intervals
//! between consecutive grid points then carry (approximately) equal
//! probability mass under the training distribution.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureBounds};
use crate::error::{GbflError, Result};

/// `(N+1) x d` matrix of grid points, ascending down each column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMatrix {
    values: Array2<f64>,
    n_intervals: usize,
    bandwidths: Vec<f64>,
    degenerate: Vec<bool>,
}

impl GridMatrix {
    /// Build a grid from an explicit `(N+1) x d` matrix of points. Columns
    /// must be non-decreasing. Bandwidths are recorded as 0 (unknown).
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let (rows, d) = values.dim();
        if rows < 2 || d == 0 {
            return Err(GbflError::InvalidArgument(
                "grid needs at least 2 rows and 1 feature".into(),
            ));
        }
        for j in 0..d {
            for s in 1..rows {
                if values[[s, j]] < values[[s - 1, j]] {
                    return Err(GbflError::InvalidArgument(format!(
                        "grid column {j} is not sorted at row {s}"
                    )));
                }
            }
        }
        let degenerate = (0..d).map(|j| values[[0, j]] == values[[rows - 1, j]]).collect();
        Ok(GridMatrix {
            n_intervals: rows - 1,
            bandwidths: vec![0.0; d],
            degenerate,
            values,
        })
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// Grid point `s` of feature `j`, `s` in `0..=N`.
    pub fn point(&self, j: usize, s: usize) -> f64 {
        self.values[[s, j]]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).to_vec()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn is_degenerate(&self, j: usize) -> bool {
        self.degenerate[j]
    }
}

/// Bandwidth selection for the per-feature KDE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// 1.06 * sample std * n^(-1/5), floored at 1e-9.
    Silverman,
    Explicit(f64),
}

/// Which side of a value to search in [`nearest_grid_index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Below,
    Above,
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Gaussian-kernel KDE cumulative distribution at `x`: the mean over the
/// sample points of the normal CDF centred at each point. Monotone
/// non-decreasing in `x`.
pub fn kde_cdf(points: &[f64], bandwidth: f64, x: f64) -> Result<f64> {
    if points.is_empty() {
        return Err(GbflError::EmptyDataset("kde_cdf needs at least one point".into()));
    }
    if !(bandwidth > 0.0) {
        return Err(GbflError::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    Ok(kde_cdf_unchecked(points, bandwidth, x))
}

fn kde_cdf_unchecked(points: &[f64], bandwidth: f64, x: f64) -> f64 {
    let sum: f64 = points
        .iter()
        .map(|&p| standard_normal_cdf((x - p) / bandwidth))
        .sum();
    sum / points.len() as f64
}

/// Silverman's rule of thumb bandwidth, floored at 1e-9 so degenerate
/// features stay well-defined.
pub fn silverman_bandwidth(points: &[f64]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return 1e-9_f64.max(1.0);
    }
    let mean = points.iter().sum::<f64>() / n;
    let var = points.iter().map(|&p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    (1.06 * std * n.powf(-0.2)).max(1e-9)
}

/// Bisection for `P(x) = target` on `[lo, hi]`, where `P` is the KDE CDF.
/// Quantiles outside the bracket clamp to the nearest endpoint. Stops when
/// the CDF value is within `tol` of the target.
fn bisect_quantile(points: &[f64], bandwidth: f64, target: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let p_lo = kde_cdf_unchecked(points, bandwidth, lo);
    let p_hi = kde_cdf_unchecked(points, bandwidth, hi);
    if p_lo >= target {
        return lo;
    }
    if p_hi <= target {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let p_mid = kde_cdf_unchecked(points, bandwidth, mid);
        if (p_mid - target).abs() <= tol {
            return mid;
        }
        if p_mid < target {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < f64::EPSILON * (hi - lo).abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Generate the `(N+1) x d` equal-probability grid. Endpoints are pinned to
/// the feature bounds; interior points solve `cdf = n/N` by bisection to a
/// CDF tolerance of 1e-6. Constant features yield a constant column flagged
/// degenerate.
pub fn generate_grid(
    data: &Dataset,
    bounds: &FeatureBounds,
    n_intervals: usize,
    rule: BandwidthRule,
) -> Result<GridMatrix> {
    if n_intervals < 1 {
        return Err(GbflError::InvalidArgument("N must be >= 1".into()));
    }
    let d = data.n_features();
    if bounds.len() != d {
        return Err(GbflError::DimensionMismatch {
            expected: d,
            got: bounds.len(),
        });
    }
    let n = n_intervals;
    let mut values = Array2::zeros((n + 1, d));
    let mut bandwidths = Vec::with_capacity(d);
    let mut degenerate = Vec::with_capacity(d);
    for j in 0..d {
        let column: Vec<f64> = data.features().column(j).to_vec();
        let bandwidth = match rule {
            BandwidthRule::Silverman => silverman_bandwidth(&column),
            BandwidthRule::Explicit(b) => {
                if !(b > 0.0) {
                    return Err(GbflError::InvalidArgument(format!(
                        "bandwidth must be positive, got {b}"
                    )));
                }
                b
            }
        };
        bandwidths.push(bandwidth);
        let (lo, hi) = (bounds.lower()[j], bounds.upper()[j]);
        degenerate.push(lo == hi);
        values[[0, j]] = lo;
        values[[n, j]] = hi;
        if lo == hi {
            for s in 1..n {
                values[[s, j]] = lo;
            }
            continue;
        }
        for s in 1..n {
            let target = s as f64 / n as f64;
            values[[s, j]] = bisect_quantile(&column, bandwidth, target, lo, hi, 1e-6);
        }
        // Bisection on a monotone CDF keeps the column sorted; enforce it
        // anyway so downstream index arithmetic can rely on it.
        let mut col: Vec<f64> = (0..=n).map(|s| values[[s, j]]).collect();
        col.sort_by(|a, b| a.total_cmp(b));
        for (s, v) in col.into_iter().enumerate() {
            values[[s, j]] = v;
        }
    }
    Ok(GridMatrix {
        values,
        n_intervals,
        bandwidths,
        degenerate,
    })
}

/// Index of the grid point of feature `j` closest to `v` among those on the
/// requested side (`strict` excludes points equal to `v`). `None` when no
/// grid point qualifies. Among equidistant duplicates the lower index wins
/// for `Below` and the higher for `Above`.
pub fn nearest_grid_index(
    grid: &GridMatrix,
    j: usize,
    v: f64,
    side: Side,
    strict: bool,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for s in 0..=grid.n_intervals() {
        let g = grid.point(j, s);
        let qualifies = match (side, strict) {
            (Side::Below, true) => g < v,
            (Side::Below, false) => g <= v,
            (Side::Above, true) => g > v,
            (Side::Above, false) => g >= v,
        };
        if !qualifies {
            continue;
        }
        let dist = (g - v).abs();
        best = match best {
            None => Some((s, dist)),
            Some((bs, bd)) => {
                let better = dist < bd
                    || (dist == bd
                        && match side {
                            Side::Below => s < bs,
                            Side::Above => s > bs,
                        });
                if better {
                    Some((s, dist))
                } else {
                    Some((bs, bd))
                }
            }
        };
    }
    best.map(|(s, _)| s)
}

#[derive(Serialize, Deserialize)]
struct GridMeta {
    n_intervals: usize,
    bandwidths: Vec<f64>,
    feature_names: Vec<String>,
}

/// Persist a grid as CSV (feature-name header, N+1 rows) plus a JSON sidecar
/// `<path>.meta.json` holding N and the bandwidths.
pub fn save_grid(grid: &GridMatrix, feature_names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|e| GbflError::ModelFile {
        path: path_str.clone(),
        message: e.to_string(),
    })?;
    writer
        .write_record(feature_names)
        .map_err(|e| GbflError::ModelFile {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
    for s in 0..=grid.n_intervals() {
        let record: Vec<String> = (0..grid.n_features())
            .map(|j| format!("{:.16e}", grid.point(j, s)))
            .collect();
        writer
            .write_record(&record)
            .map_err(|e| GbflError::ModelFile {
                path: path_str.clone(),
                message: e.to_string(),
            })?;
    }
    writer
        .flush()
        .map_err(|e| GbflError::io(path_str.clone(), e))?;
    let meta = GridMeta {
        n_intervals: grid.n_intervals(),
        bandwidths: grid.bandwidths().to_vec(),
        feature_names: feature_names.to_vec(),
    };
    let meta_path = format!("{path_str}.meta.json");
    std::fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?)
        .map_err(|e| GbflError::io(meta_path, e))
}

/// Load a grid written by [`save_grid`]. Returns the grid and feature names.
pub fn load_grid(path: impl AsRef<Path>) -> Result<(GridMatrix, Vec<String>)> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let meta_path = format!("{path_str}.meta.json");
    let meta_bytes =
        std::fs::read(&meta_path).map_err(|e| GbflError::io(meta_path.clone(), e))?;
    let meta: GridMeta = serde_json::from_slice(&meta_bytes)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| GbflError::ModelFile {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
    let d = meta.feature_names.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| GbflError::CsvParse {
            path: path_str.clone(),
            row: r + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|_| GbflError::CsvParse {
            path: path_str.clone(),
            row: r + 1,
            column: String::new(),
            message: "cannot parse grid value".into(),
        })?);
    }
    if rows.len() != meta.n_intervals + 1 {
        return Err(GbflError::ModelFile {
            path: path_str,
            message: format!(
                "grid has {} rows, metadata says {}",
                rows.len(),
                meta.n_intervals + 1
            ),
        });
    }
    let mut values = Array2::zeros((rows.len(), d));
    let mut degenerate = vec![true; d];
    for (s, row) in rows.iter().enumerate() {
        for j in 0..d {
            values[[s, j]] = row[j];
        }
    }
    for j in 0..d {
        degenerate[j] = values[[0, j]] == values[[rows.len() - 1, j]];
    }
    Ok((
        GridMatrix {
            values,
            n_intervals: meta.n_intervals,
            bandwidths: meta.bandwidths,
            degenerate,
        },
        meta.feature_names,
    ))
}
