//! Pertinent positives and pertinent negatives with confidence-only access.
//!
//! A pertinent positive (PP) perturbs a sample toward the base values while
//! keeping the model's predicted class; a pertinent negative (PN) perturbs
//! it away from the base values until the class flips. Both are found by
//! projected proximal gradient on an elastic-net-regularized hinge margin,
//! with the margin gradient estimated by central finite differences, so any
//! model exposing confidence scores works.
//!
//! All penalties, steps and thresholds operate on box-normalized
//! coordinates `u_j = (v_j - L_j) / (U_j - L_j)`, which makes the defaults
//! scale-free. Concretely, writing `u(v)` for the normalized vector of `v`:
//!
//! * PP objective: `max(max_{c != y} C(p, c) - C(p, y), -kappa)
//!   + l1 * ||u(p) - u(b)||_1 + l2 * ||u(p) - u(b)||_2^2`,
//!   minimized over the per-coordinate box between `b_j` and `x_j`.
//! * PN objective: `max(C(n, y) - max_{c != y} C(n, c), -kappa)
//!   + l1 * ||u(n) - u(x)||_1 + l2 * ||u(n) - u(x)||_2^2`,
//!   minimized over the box on the far side of `x` from `b`.
//!
//! The optimizer tracks the best iterate that re-classifies correctly (PP)
//! or flips the label (PN); a PP search that never finds a valid iterate
//! falls back to `p = x`, while a PN search that never flips reports the
//! sample as having no pertinent negative.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::{argmax, BlackBoxModel};
use crate::data::{BaseValues, Dataset, FeatureBounds};
use crate::error::{GbflError, Result};

/// Optimizer settings. `fd_step` and `snap_epsilon` are in normalized
/// feature units (i.e. effectively scaled by `U_j - L_j` per feature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainerConfig {
    /// Confidence margin in the hinge term.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    /// Elastic-net l1 weight (sparsity pressure toward the anchor).
    #[serde(default = "default_l1")]
    pub l1_strength: f64,
    /// Elastic-net l2 weight (keeps the contrast point local).
    #[serde(default = "default_l2")]
    pub l2_strength: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Base step size; the effective step decays as `step_size / sqrt(t)`.
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    /// Central finite-difference step (normalized units).
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Coordinates closer than this (normalized units) to the anchor snap
    /// onto it exactly, unless that breaks the class condition.
    #[serde(default = "default_snap_epsilon")]
    pub snap_epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_kappa() -> f64 {
    0.1
}
fn default_l1() -> f64 {
    0.1
}
fn default_l2() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    500
}
fn default_step_size() -> f64 {
    0.05
}
fn default_fd_step() -> f64 {
    1e-4
}
fn default_snap_epsilon() -> f64 {
    1e-3
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            kappa: default_kappa(),
            l1_strength: default_l1(),
            l2_strength: default_l2(),
            max_iters: default_max_iters(),
            step_size: default_step_size(),
            fd_step: default_fd_step(),
            snap_epsilon: default_snap_epsilon(),
            seed: 0,
        }
    }
}

impl ExplainerConfig {
    fn validate(&self) -> Result<()> {
        let checks = [
            (self.kappa >= 0.0, "kappa must be >= 0"),
            (self.l1_strength >= 0.0, "l1_strength must be >= 0"),
            (self.l2_strength >= 0.0, "l2_strength must be >= 0"),
            (self.max_iters >= 1, "max_iters must be >= 1"),
            (self.step_size > 0.0, "step_size must be > 0"),
            (self.fd_step > 0.0, "fd_step must be > 0"),
            (self.snap_epsilon >= 0.0, "snap_epsilon must be >= 0"),
        ];
        for (ok, message) in checks {
            if !ok {
                return Err(GbflError::InvalidArgument(message.into()));
            }
        }
        Ok(())
    }
}

/// One sample together with its contrast points and the black-box's view of
/// all three.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationTriplet {
    pub sample_index: usize,
    pub x: Array1<f64>,
    /// Black-box prediction on `x` (and, by construction, on `pp`).
    pub y_blackbox: usize,
    pub pp: Array1<f64>,
    pub pn: Option<Array1<f64>>,
    /// Black-box prediction on `pn`, always different from `y_blackbox`.
    pub pn_class: Option<usize>,
    /// Number of coordinates where `pp` deviates from the base values.
    pub pp_sparsity: usize,
    /// Number of coordinates where `pn` deviates from `x`.
    pub pn_sparsity: Option<usize>,
    /// True when the PP search failed and `pp = x` was used.
    pub pp_fell_back: bool,
    pub diagnostics: TripletDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripletDiagnostics {
    pub pp_iterations: usize,
    pub pp_final_margin: f64,
    pub pn_iterations: usize,
    pub pn_final_margin: Option<f64>,
}

/// Explanations for a whole dataset plus summary statistics.
#[derive(Debug, Clone)]
pub struct ExplanationSet {
    pub triplets: Vec<ExplanationTriplet>,
    pub stats: ExplanationStats,
    /// Per-sample soft failures (sample kept via fallback).
    pub errors: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationStats {
    /// Fraction of samples with a pertinent negative.
    pub pn_coverage: f64,
    pub mean_pp_sparsity: f64,
    /// Mean over PN-bearing samples only; absent when coverage is zero.
    pub mean_pn_sparsity: Option<f64>,
    pub n_pp_fallbacks: usize,
}

/// Normalization context shared by the PP and PN searches.
struct Workspace<'a> {
    model: &'a BlackBoxModel,
    lower: Vec<f64>,
    range: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(model: &'a BlackBoxModel, bounds: &FeatureBounds) -> Self {
        let d = bounds.len();
        let lower = bounds.lower().to_vec();
        let range = (0..d).map(|j| bounds.range(j)).collect();
        Workspace {
            model,
            lower,
            range,
        }
    }

    fn d(&self) -> usize {
        self.lower.len()
    }

    fn to_unit(&self, v: ArrayView1<'_, f64>) -> Vec<f64> {
        (0..self.d())
            .map(|j| {
                if self.range[j] > 0.0 {
                    (v[j] - self.lower[j]) / self.range[j]
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn to_raw(&self, u: &[f64], frozen: ArrayView1<'_, f64>) -> Array1<f64> {
        Array1::from_shape_fn(self.d(), |j| {
            if self.range[j] > 0.0 {
                self.lower[j] + u[j] * self.range[j]
            } else {
                frozen[j]
            }
        })
    }
}

#[derive(Clone, Copy, PartialEq)]
enum SearchKind {
    /// Keep the class; hinge on (best other - own).
    Pp,
    /// Flip the class; hinge on (own - best other).
    Pn,
}

struct SearchOutcome {
    /// Best valid iterate in normalized coordinates, with its objective.
    best: Option<(f64, Vec<f64>)>,
    iterations: usize,
    final_margin: f64,
}

fn hinge_margin(confidence: ArrayView1<'_, f64>, y: usize, kappa: f64, kind: SearchKind) -> f64 {
    let own = confidence[y];
    let mut best_other = f64::NEG_INFINITY;
    for (c, &v) in confidence.iter().enumerate() {
        if c != y && v > best_other {
            best_other = v;
        }
    }
    let raw = match kind {
        SearchKind::Pp => best_other - own,
        SearchKind::Pn => own - best_other,
    };
    raw.max(-kappa)
}

fn is_valid(confidence: ArrayView1<'_, f64>, y: usize, kind: SearchKind) -> bool {
    let predicted = argmax(confidence);
    match kind {
        SearchKind::Pp => predicted == y,
        SearchKind::Pn => predicted != y,
    }
}

fn penalties(u: &[f64], anchor: &[f64], cfg: &ExplainerConfig) -> f64 {
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for (a, b) in u.iter().zip(anchor) {
        let dev = a - b;
        l1 += dev.abs();
        l2 += dev * dev;
    }
    cfg.l1_strength * l1 + cfg.l2_strength * l2
}

/// Projected proximal gradient descent over the normalized box, tracking the
/// best-so-far iterate that satisfies the class condition. Once the iterate
/// is valid, a step that would leave the valid region is halved (a bounded
/// number of times) so the trajectory converges to the class boundary
/// instead of overshooting it.
fn proximal_search(
    ws: &Workspace<'_>,
    x: ArrayView1<'_, f64>,
    y: usize,
    anchor: &[f64],
    start: &[f64],
    box_lo: &[f64],
    box_hi: &[f64],
    cfg: &ExplainerConfig,
    kind: SearchKind,
) -> Result<SearchOutcome> {
    let d = ws.d();
    let free: Vec<usize> = (0..d)
        .filter(|&j| ws.range[j] > 0.0 && box_hi[j] > box_lo[j])
        .collect();
    let mut u: Vec<f64> = start
        .iter()
        .enumerate()
        .map(|(j, &v)| v.clamp(box_lo[j], box_hi[j]))
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut final_margin = f64::NAN;

    let prox_step = |u: &[f64], grads: &[f64], step: f64| -> Vec<f64> {
        let mut next = u.to_vec();
        for (r, &j) in free.iter().enumerate() {
            let moved = u[j] - step * grads[r];
            // Soft-threshold toward the anchor, then project onto the box.
            let dev = moved - anchor[j];
            let shrunk = dev.signum() * (dev.abs() - step * cfg.l1_strength).max(0.0);
            next[j] = (anchor[j] + shrunk).clamp(box_lo[j], box_hi[j]);
        }
        next
    };

    for t in 1..=cfg.max_iters + 1 {
        // One batched model call per iteration: the iterate itself plus
        // plus/minus probes for every free coordinate.
        let mut batch = Array2::zeros((1 + 2 * free.len(), d));
        batch.row_mut(0).assign(&ws.to_raw(&u, x));
        for (r, &j) in free.iter().enumerate() {
            let mut up = u.clone();
            up[j] += cfg.fd_step;
            let mut down = u.clone();
            down[j] -= cfg.fd_step;
            batch.row_mut(1 + 2 * r).assign(&ws.to_raw(&up, x));
            batch.row_mut(2 + 2 * r).assign(&ws.to_raw(&down, x));
        }
        let confidences = ws.model.confidence_batch(batch.view())?;

        let margin = hinge_margin(confidences.row(0), y, cfg.kappa, kind);
        final_margin = margin;
        let objective = margin + penalties(&u, anchor, cfg);
        let valid_here = is_valid(confidences.row(0), y, kind);
        if valid_here {
            let improved = best.as_ref().map_or(true, |(b, _)| objective < *b);
            if improved {
                best = Some((objective, u.clone()));
            }
        }
        if t > cfg.max_iters {
            break;
        }

        let step = cfg.step_size / (t as f64).sqrt();
        let grads: Vec<f64> = free
            .iter()
            .enumerate()
            .map(|(r, &j)| {
                let m_up = hinge_margin(confidences.row(1 + 2 * r), y, cfg.kappa, kind);
                let m_down = hinge_margin(confidences.row(2 + 2 * r), y, cfg.kappa, kind);
                (m_up - m_down) / (2.0 * cfg.fd_step)
                    + 2.0 * cfg.l2_strength * (u[j] - anchor[j])
            })
            .collect();
        let mut next = prox_step(&u, &grads, step);
        if valid_here {
            let mut trial_step = step;
            for _ in 0..14 {
                let conf = ws.model.confidence(ws.to_raw(&next, x).view())?;
                if is_valid(conf.view(), y, kind) {
                    break;
                }
                trial_step *= 0.5;
                next = prox_step(&u, &grads, trial_step);
            }
        }
        u = next;
    }

    Ok(SearchOutcome {
        best,
        iterations: cfg.max_iters,
        final_margin,
    })
}

/// Snap near-anchor coordinates onto the anchor exactly; when that breaks
/// the class condition, restore coordinates in decreasing deviation order
/// until it holds again.
fn snap_to_anchor(
    ws: &Workspace<'_>,
    x: ArrayView1<'_, f64>,
    y: usize,
    u: &[f64],
    anchor: &[f64],
    cfg: &ExplainerConfig,
    kind: SearchKind,
) -> Result<Vec<f64>> {
    let mut snapped = u.to_vec();
    let mut snapped_coords = Vec::new();
    for j in 0..u.len() {
        let dev = (u[j] - anchor[j]).abs();
        if dev > 0.0 && dev < cfg.snap_epsilon {
            snapped[j] = anchor[j];
            snapped_coords.push((j, dev));
        }
    }
    if snapped_coords.is_empty() {
        return Ok(snapped);
    }
    let confidence = ws.model.confidence(ws.to_raw(&snapped, x).view())?;
    if is_valid(confidence.view(), y, kind) {
        return Ok(snapped);
    }
    snapped_coords.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (j, _) in snapped_coords {
        snapped[j] = u[j];
        let confidence = ws.model.confidence(ws.to_raw(&snapped, x).view())?;
        if is_valid(confidence.view(), y, kind) {
            return Ok(snapped);
        }
    }
    Ok(snapped)
}

fn count_deviations(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> usize {
    a.iter().zip(b.iter()).filter(|(x, y)| x != y).count()
}

/// Find the pertinent positive for `x`: the sparsest perturbation toward the
/// base values that the model still classifies as `x`'s class. Falls back to
/// `p = x` (always valid) when the search finds no valid iterate.
pub fn find_pp(
    model: &BlackBoxModel,
    x: ArrayView1<'_, f64>,
    base: &BaseValues,
    bounds: &FeatureBounds,
    cfg: &ExplainerConfig,
) -> Result<(Array1<f64>, bool, usize, f64)> {
    cfg.validate()?;
    check_dims(model, x, base, bounds)?;
    let ws = Workspace::new(model, bounds);
    let y = model.predict(x)?;
    let u_x = ws.to_unit(x);
    let u_b = ws.to_unit(base.values().view());
    let d = ws.d();
    let box_lo: Vec<f64> = (0..d).map(|j| u_x[j].min(u_b[j]).clamp(0.0, 1.0)).collect();
    let box_hi: Vec<f64> = (0..d).map(|j| u_x[j].max(u_b[j]).clamp(0.0, 1.0)).collect();

    let outcome = proximal_search(&ws, x, y, &u_b, &u_x, &box_lo, &box_hi, cfg, SearchKind::Pp)?;
    match outcome.best {
        None => Ok((x.to_owned(), true, outcome.iterations, outcome.final_margin)),
        Some((_, u)) => {
            let u = snap_to_anchor(&ws, x, y, &u, &u_b, cfg, SearchKind::Pp)?;
            let p = ws.to_raw(&u, x);
            Ok((p, false, outcome.iterations, outcome.final_margin))
        }
    }
}

/// Find the pertinent negative for `x`: the smallest perturbation away from
/// the base values that flips the model's class. Returns `None` when no
/// label-flipping iterate is found. The search first descends from `x`
/// itself; if the hinge gives no signal there (hard, piecewise-constant
/// models), it retries from the far corner of the feasible box.
pub fn find_pn(
    model: &BlackBoxModel,
    x: ArrayView1<'_, f64>,
    base: &BaseValues,
    bounds: &FeatureBounds,
    cfg: &ExplainerConfig,
) -> Result<(Option<(Array1<f64>, usize)>, usize, Option<f64>)> {
    cfg.validate()?;
    check_dims(model, x, base, bounds)?;
    let ws = Workspace::new(model, bounds);
    let y = model.predict(x)?;
    let u_x: Vec<f64> = ws.to_unit(x).iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let d = ws.d();
    let mut box_lo = vec![0.0; d];
    let mut box_hi = vec![0.0; d];
    for j in 0..d {
        let (xj, bj) = (x[j], base.get(j));
        if xj > bj {
            box_lo[j] = u_x[j];
            box_hi[j] = 1.0;
        } else if xj < bj {
            box_lo[j] = 0.0;
            box_hi[j] = u_x[j];
        } else {
            box_lo[j] = u_x[j];
            box_hi[j] = u_x[j];
        }
    }

    let mut outcome =
        proximal_search(&ws, x, y, &u_x, &u_x, &box_lo, &box_hi, cfg, SearchKind::Pn)?;
    if outcome.best.is_none() {
        // Far-corner restart: start from the maximal feasible deviation.
        let corner: Vec<f64> = (0..d)
            .map(|j| {
                if box_hi[j] - u_x[j] >= u_x[j] - box_lo[j] {
                    box_hi[j]
                } else {
                    box_lo[j]
                }
            })
            .collect();
        if corner != u_x {
            let retry =
                proximal_search(&ws, x, y, &u_x, &corner, &box_lo, &box_hi, cfg, SearchKind::Pn)?;
            outcome = SearchOutcome {
                iterations: outcome.iterations + retry.iterations,
                ..retry
            };
        }
    }

    match outcome.best {
        None => Ok((None, outcome.iterations, None)),
        Some((_, u)) => {
            let u = snap_to_anchor(&ws, x, y, &u, &u_x, cfg, SearchKind::Pn)?;
            let n = ws.to_raw(&u, x);
            let flip_class = model.predict(n.view())?;
            Ok((
                Some((n, flip_class)),
                outcome.iterations,
                Some(outcome.final_margin),
            ))
        }
    }
}

fn check_dims(
    model: &BlackBoxModel,
    x: ArrayView1<'_, f64>,
    base: &BaseValues,
    bounds: &FeatureBounds,
) -> Result<()> {
    let d = model.n_features();
    for (name, len) in [("x", x.len()), ("base", base.len()), ("bounds", bounds.len())] {
        if len != d {
            return Err(GbflError::InvalidArgument(format!(
                "{name} has length {len}, model expects {d}"
            )));
        }
    }
    Ok(())
}

/// Explain one sample: PP (with fallback) and optional PN.
pub fn explain_sample(
    model: &BlackBoxModel,
    sample_index: usize,
    x: ArrayView1<'_, f64>,
    base: &BaseValues,
    bounds: &FeatureBounds,
    cfg: &ExplainerConfig,
) -> Result<ExplanationTriplet> {
    let y = model.predict(x)?;
    let (pp, pp_fell_back, pp_iterations, pp_final_margin) =
        find_pp(model, x, base, bounds, cfg)?;
    let (pn_found, pn_iterations, pn_final_margin) = find_pn(model, x, base, bounds, cfg)?;
    let (pn, pn_class) = match pn_found {
        Some((n, c)) => (Some(n), Some(c)),
        None => (None, None),
    };
    let pp_sparsity = count_deviations(pp.view(), base.values().view());
    let pn_sparsity = pn.as_ref().map(|n| count_deviations(n.view(), x));
    Ok(ExplanationTriplet {
        sample_index,
        x: x.to_owned(),
        y_blackbox: y,
        pp,
        pn,
        pn_class,
        pp_sparsity,
        pn_sparsity,
        pp_fell_back,
        diagnostics: TripletDiagnostics {
            pp_iterations,
            pp_final_margin,
            pn_iterations,
            pn_final_margin,
        },
    })
}

/// Explain every sample of a dataset (in parallel; the result order matches
/// the row order). Per-sample optimizer failures fall back to `pp = x` and
/// are recorded instead of aborting the batch.
pub fn explain_dataset(
    model: &BlackBoxModel,
    data: &Dataset,
    base: &BaseValues,
    bounds: &FeatureBounds,
    cfg: &ExplainerConfig,
) -> Result<ExplanationSet> {
    cfg.validate()?;
    let results: Vec<(Result<ExplanationTriplet>, usize)> = (0..data.n_samples())
        .into_par_iter()
        .map(|i| (explain_sample(model, i, data.row(i), base, bounds, cfg), i))
        .collect();

    let mut triplets = Vec::with_capacity(data.n_samples());
    let mut errors = Vec::new();
    for (result, i) in results {
        match result {
            Ok(t) => triplets.push(t),
            Err(e) => {
                // Keep the batch aligned with a fallback triplet; only a
                // model that cannot even classify x aborts the run.
                let x = data.row(i);
                let y = model.predict(x)?;
                errors.push((i, e.to_string()));
                triplets.push(ExplanationTriplet {
                    sample_index: i,
                    x: x.to_owned(),
                    y_blackbox: y,
                    pp: x.to_owned(),
                    pn: None,
                    pn_class: None,
                    pp_sparsity: count_deviations(x, base.values().view()),
                    pn_sparsity: None,
                    pp_fell_back: true,
                    diagnostics: TripletDiagnostics {
                        pp_iterations: 0,
                        pp_final_margin: f64::NAN,
                        pn_iterations: 0,
                        pn_final_margin: None,
                    },
                });
            }
        }
    }
    let stats = summarize(&triplets);
    Ok(ExplanationSet {
        triplets,
        stats,
        errors,
    })
}

pub fn summarize(triplets: &[ExplanationTriplet]) -> ExplanationStats {
    let n = triplets.len().max(1) as f64;
    let with_pn: Vec<&ExplanationTriplet> =
        triplets.iter().filter(|t| t.pn.is_some()).collect();
    ExplanationStats {
        pn_coverage: with_pn.len() as f64 / n,
        mean_pp_sparsity: triplets.iter().map(|t| t.pp_sparsity as f64).sum::<f64>() / n,
        mean_pn_sparsity: if with_pn.is_empty() {
            None
        } else {
            Some(
                with_pn
                    .iter()
                    .map(|t| t.pn_sparsity.unwrap_or(0) as f64)
                    .sum::<f64>()
                    / with_pn.len() as f64,
            )
        },
        n_pp_fallbacks: triplets.iter().filter(|t| t.pp_fell_back).count(),
    }
}

// ---------------------------------------------------------------------------
// Persistence: CSV of contrast points plus a JSON diagnostics sidecar.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SampleDiagnostics {
    sample_index: usize,
    y_blackbox: usize,
    pn_class: Option<usize>,
    pp_sparsity: usize,
    pn_sparsity: Option<usize>,
    pp_fell_back: bool,
    pp_iterations: usize,
    pp_final_margin: f64,
    pn_iterations: usize,
    pn_final_margin: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ExplanationSidecar {
    stats: ExplanationStats,
    samples: Vec<SampleDiagnostics>,
    errors: Vec<(usize, String)>,
}

/// Write explanations as CSV (`sample_index,kind,<features...>`; PN rows are
/// omitted for samples without one) plus `<path>.meta.json` diagnostics.
pub fn save_explanations(
    set: &ExplanationSet,
    feature_names: &[String],
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|e| GbflError::ModelFile {
        path: path_str.clone(),
        message: e.to_string(),
    })?;
    let mut header = vec!["sample_index".to_string(), "kind".to_string()];
    header.extend(feature_names.iter().cloned());
    let write_err = |e: csv::Error| GbflError::ModelFile {
        path: path_str.clone(),
        message: e.to_string(),
    };
    writer.write_record(&header).map_err(write_err)?;
    for t in &set.triplets {
        let mut record = vec![t.sample_index.to_string(), "PP".to_string()];
        record.extend(t.pp.iter().map(|v| format!("{v:.16e}")));
        writer.write_record(&record).map_err(|e| GbflError::ModelFile {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
        if let Some(pn) = &t.pn {
            let mut record = vec![t.sample_index.to_string(), "PN".to_string()];
            record.extend(pn.iter().map(|v| format!("{v:.16e}")));
            writer.write_record(&record).map_err(|e| GbflError::ModelFile {
                path: path_str.clone(),
                message: e.to_string(),
            })?;
        }
    }
    writer.flush().map_err(|e| GbflError::io(path_str.clone(), e))?;

    let sidecar = ExplanationSidecar {
        stats: set.stats.clone(),
        samples: set
            .triplets
            .iter()
            .map(|t| SampleDiagnostics {
                sample_index: t.sample_index,
                y_blackbox: t.y_blackbox,
                pn_class: t.pn_class,
                pp_sparsity: t.pp_sparsity,
                pn_sparsity: t.pn_sparsity,
                pp_fell_back: t.pp_fell_back,
                pp_iterations: t.diagnostics.pp_iterations,
                pp_final_margin: t.diagnostics.pp_final_margin,
                pn_iterations: t.diagnostics.pn_iterations,
                pn_final_margin: t.diagnostics.pn_final_margin,
            })
            .collect(),
        errors: set.errors.clone(),
    };
    let meta_path = format!("{path_str}.meta.json");
    std::fs::write(&meta_path, serde_json::to_vec_pretty(&sidecar)?)
        .map_err(|e| GbflError::io(meta_path, e))
}

/// Rebuild triplets from an explanations CSV. `x` comes from the dataset by
/// sample index; black-box predictions are re-queried from the model.
pub fn load_explanations(
    path: impl AsRef<std::path::Path>,
    data: &Dataset,
    model: &BlackBoxModel,
    base: &BaseValues,
) -> Result<Vec<ExplanationTriplet>> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| GbflError::ModelFile {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
    let d = data.n_features();
    let mut pps: Vec<Option<Array1<f64>>> = vec![None; data.n_samples()];
    let mut pns: Vec<Option<Array1<f64>>> = vec![None; data.n_samples()];
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| GbflError::CsvParse {
            path: path_str.clone(),
            row: r + 1,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != d + 2 {
            return Err(GbflError::CsvParse {
                path: path_str.clone(),
                row: r + 1,
                column: String::new(),
                message: format!("expected {} fields, got {}", d + 2, record.len()),
            });
        }
        let index: usize = record[0].parse().map_err(|_| GbflError::CsvParse {
            path: path_str.clone(),
            row: r + 1,
            column: "sample_index".into(),
            message: format!("bad sample index `{}`", &record[0]),
        })?;
        if index >= data.n_samples() {
            return Err(GbflError::CsvParse {
                path: path_str.clone(),
                row: r + 1,
                column: "sample_index".into(),
                message: format!("sample index {index} out of range"),
            });
        }
        let mut values = Array1::zeros(d);
        for j in 0..d {
            values[j] = record[j + 2].trim().parse().map_err(|_| GbflError::CsvParse {
                path: path_str.clone(),
                row: r + 1,
                column: format!("feature {j}"),
                message: format!("bad value `{}`", &record[j + 2]),
            })?;
        }
        match &record[1] {
            "PP" => pps[index] = Some(values),
            "PN" => pns[index] = Some(values),
            other => {
                return Err(GbflError::CsvParse {
                    path: path_str.clone(),
                    row: r + 1,
                    column: "kind".into(),
                    message: format!("unknown kind `{other}`"),
                })
            }
        }
    }
    let mut triplets = Vec::with_capacity(data.n_samples());
    for i in 0..data.n_samples() {
        let x = data.row(i);
        let pp = pps[i].take().ok_or_else(|| GbflError::CsvParse {
            path: path_str.clone(),
            row: 0,
            column: String::new(),
            message: format!("sample {i} has no PP row"),
        })?;
        let y = model.predict(x)?;
        let pn = pns[i].take();
        let pn_class = match &pn {
            Some(n) => Some(model.predict(n.view())?),
            None => None,
        };
        let pp_fell_back = pp.view() == x;
        triplets.push(ExplanationTriplet {
            sample_index: i,
            x: x.to_owned(),
            y_blackbox: y,
            pp_sparsity: count_deviations(pp.view(), base.values().view()),
            pn_sparsity: pn.as_ref().map(|n| count_deviations(n.view(), x)),
            pp,
            pn,
            pn_class,
            pp_fell_back,
            diagnostics: TripletDiagnostics {
                pp_iterations: 0,
                pp_final_margin: f64::NAN,
                pn_iterations: 0,
                pn_final_margin: None,
            },
        });
    }
    Ok(triplets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::logistic_from_weights;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Hard threshold model on feature 0: class 1 iff x0 > threshold.
    fn stump_model(threshold: f64, d: usize) -> BlackBoxModel {
        // Steep logistic approximates the stump while staying a valid
        // builtin; steepness 1e6 makes the confidences effectively 0/1.
        let mut w = Array2::zeros((2, d));
        w[[1, 0]] = 1e6;
        let b = array![0.0, -1e6 * threshold];
        logistic_from_weights(w, b).unwrap()
    }

    fn unit_bounds(d: usize, hi: f64) -> FeatureBounds {
        FeatureBounds::new(Array1::zeros(d), Array1::from_elem(d, hi)).unwrap()
    }

    fn zero_base(bounds: &FeatureBounds) -> BaseValues {
        BaseValues::new(Array1::zeros(bounds.len()), bounds).unwrap()
    }

    #[test]
    fn pp_at_base_is_base() {
        let model = stump_model(5.0, 1);
        let bounds = unit_bounds(1, 10.0);
        let base = BaseValues::new(array![8.0], &bounds).unwrap();
        let cfg = ExplainerConfig::default();
        // x == b: the feasible set is the single point b.
        let (pp, fell_back, _, _) =
            find_pp(&model, array![8.0].view(), &base, &bounds, &cfg).unwrap();
        assert_eq!(pp, array![8.0]);
        assert!(!fell_back);
    }

    #[test]
    fn pp_matches_1d_grid_search_oracle() {
        let model = stump_model(5.0, 1);
        let bounds = unit_bounds(1, 10.0);
        let base = zero_base(&bounds);
        let cfg = ExplainerConfig {
            kappa: 0.05,
            ..ExplainerConfig::default()
        };
        let x = array![8.0];
        let y = model.predict(x.view()).unwrap();
        assert_eq!(y, 1);
        let (pp, fell_back, _, _) = find_pp(&model, x.view(), &base, &bounds, &cfg).unwrap();
        assert!(!fell_back);
        assert_eq!(model.predict(pp.view()).unwrap(), y);

        // Independent oracle: exhaustive 1e-3 grid over [0, 8] on the same
        // objective (normalized-coordinate penalties), restricted to points
        // the model still classifies as y.
        let range = 10.0;
        let mut best = (f64::INFINITY, f64::NAN);
        let mut v = 0.0;
        while v <= 8.0 + 1e-12 {
            let conf = model.confidence(array![v].view()).unwrap();
            if argmax(conf.view()) == y {
                let margin = (conf[0] - conf[1]).max(-cfg.kappa);
                let dev = v / range;
                let obj = margin + cfg.l1_strength * dev.abs() + cfg.l2_strength * dev * dev;
                if obj < best.0 {
                    best = (obj, v);
                }
            }
            v += 1e-3;
        }
        assert!(
            (pp[0] - best.1).abs() <= 0.2,
            "pp {} vs oracle minimizer {}",
            pp[0],
            best.1
        );
    }

    #[test]
    fn pn_matches_1d_grid_search_oracle() {
        let model = stump_model(5.0, 1);
        let bounds = unit_bounds(1, 10.0);
        let base = zero_base(&bounds);
        let cfg = ExplainerConfig::default();
        let x = array![3.0];
        let y = model.predict(x.view()).unwrap();
        assert_eq!(y, 0);
        let (found, _, _) = find_pn(&model, x.view(), &base, &bounds, &cfg).unwrap();
        let (pn, flip) = found.expect("stump must yield a PN");
        assert_ne!(flip, y);
        assert!(pn[0] > 5.0 && pn[0] <= 5.5, "pn = {}", pn[0]);

        let range = 10.0;
        let mut best = (f64::INFINITY, f64::NAN);
        let mut v = 3.0;
        while v <= 10.0 + 1e-12 {
            let conf = model.confidence(array![v].view()).unwrap();
            if argmax(conf.view()) != y {
                let margin = (conf[0] - conf[1]).max(-cfg.kappa);
                let dev = (v - 3.0) / range;
                let obj = margin + cfg.l1_strength * dev.abs() + cfg.l2_strength * dev * dev;
                if obj < best.0 {
                    best = (obj, v);
                }
            }
            v += 1e-3;
        }
        assert!(
            (pn[0] - best.1).abs() <= 0.2,
            "pn {} vs oracle minimizer {}",
            pn[0],
            best.1
        );
    }

    #[test]
    fn constant_model_has_no_pn() {
        let model = logistic_from_weights(array![[0.0], [0.0]], array![1.0, 0.0]).unwrap();
        let bounds = unit_bounds(1, 10.0);
        let base = zero_base(&bounds);
        let cfg = ExplainerConfig::default();
        let (found, _, _) =
            find_pn(&model, array![4.0].view(), &base, &bounds, &cfg).unwrap();
        assert!(found.is_none());
    }

    #[test]
    fn pn_absent_when_feasible_set_is_x() {
        // x at the upper corner with x_j >= b_j everywhere: no room to move.
        let model = stump_model(5.0, 2);
        let bounds = unit_bounds(2, 10.0);
        let base = zero_base(&bounds);
        let cfg = ExplainerConfig::default();
        let (found, _, _) =
            find_pn(&model, array![10.0, 10.0].view(), &base, &bounds, &cfg).unwrap();
        assert!(found.is_none());
    }

    #[test]
    fn triplet_invariants_on_random_samples() {
        let model = stump_model(5.0, 2);
        let bounds = unit_bounds(2, 10.0);
        let base = BaseValues::new(array![2.0, 5.0], &bounds).unwrap();
        let cfg = ExplainerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let x = array![rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)];
            let t = explain_sample(&model, 0, x.view(), &base, &bounds, &cfg).unwrap();
            // Re-query validity.
            assert_eq!(model.predict(t.pp.view()).unwrap(), t.y_blackbox);
            if let Some(pn) = &t.pn {
                assert_ne!(model.predict(pn.view()).unwrap(), t.y_blackbox);
                for j in 0..2 {
                    if x[j] >= base.get(j) {
                        assert!(pn[j] >= x[j] - 1e-12 && pn[j] <= 10.0 + 1e-12);
                    } else {
                        assert!(pn[j] <= x[j] + 1e-12 && pn[j] >= -1e-12);
                    }
                }
            }
            // PP feasibility: between base and x, inclusive.
            for j in 0..2 {
                let (lo, hi) = (x[j].min(base.get(j)), x[j].max(base.get(j)));
                assert!(t.pp[j] >= lo - 1e-12 && t.pp[j] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn stump_pns_flip_wherever_a_flip_is_feasible() {
        // With base 0, only class-0 samples can cross the boundary by
        // moving away from the base; every one of them must get a PN, and
        // every returned PN must flip under re-query.
        let model = stump_model(5.0, 2);
        let bounds = unit_bounds(2, 10.0);
        let base = zero_base(&bounds);
        let cfg = ExplainerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let features = Array2::from_shape_fn((100, 2), |_| rng.gen_range(0.0..10.0));
        let labels: Vec<usize> = (0..100)
            .map(|i| usize::from(features[[i, 0]] > 5.0))
            .collect();
        let data = Dataset::from_parts(features, labels.clone()).unwrap();
        let set = explain_dataset(&model, &data, &base, &bounds, &cfg).unwrap();
        assert_eq!(set.triplets.len(), 100);
        assert!(set.errors.is_empty());
        for (t, &label) in set.triplets.iter().zip(&labels) {
            if label == 0 {
                assert!(t.pn.is_some(), "sample {} should have a PN", t.sample_index);
            } else {
                assert!(t.pn.is_none(), "class-1 sample cannot flip upward");
            }
            if let Some(pn) = &t.pn {
                assert_ne!(model.predict(pn.view()).unwrap(), t.y_blackbox);
            }
        }
        let expected_coverage =
            labels.iter().filter(|&&l| l == 0).count() as f64 / 100.0;
        assert!((set.stats.pn_coverage - expected_coverage).abs() < 1e-12);
    }

    #[test]
    fn full_pn_coverage_when_every_sample_can_flip() {
        let model = stump_model(5.0, 1);
        let bounds = unit_bounds(1, 10.0);
        let base = zero_base(&bounds);
        let cfg = ExplainerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let features = Array2::from_shape_fn((50, 1), |_| rng.gen_range(0.0..5.0));
        let data = Dataset::from_parts(features, vec![0; 50]).unwrap();
        let set = explain_dataset(&model, &data, &base, &bounds, &cfg).unwrap();
        assert_eq!(set.stats.pn_coverage, 1.0);
        for t in &set.triplets {
            let pn = t.pn.as_ref().unwrap();
            assert_ne!(model.predict(pn.view()).unwrap(), t.y_blackbox);
        }
    }

    #[test]
    fn doubling_l1_does_not_increase_pp_sparsity() {
        let model = stump_model(5.0, 2);
        let bounds = unit_bounds(2, 10.0);
        let base = zero_base(&bounds);
        let base_cfg = ExplainerConfig::default();
        let double_cfg = ExplainerConfig {
            l1_strength: base_cfg.l1_strength * 2.0,
            ..base_cfg.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let features = Array2::from_shape_fn((40, 2), |_| rng.gen_range(0.0..10.0));
        let labels = (0..40)
            .map(|i| usize::from(features[[i, 0]] > 5.0))
            .collect();
        let data = Dataset::from_parts(features, labels).unwrap();
        let a = explain_dataset(&model, &data, &base, &bounds, &base_cfg).unwrap();
        let b = explain_dataset(&model, &data, &base, &bounds, &double_cfg).unwrap();
        assert!(b.stats.mean_pp_sparsity <= a.stats.mean_pp_sparsity + 1e-12);
    }

    #[test]
    fn best_objective_is_non_increasing_in_iteration_budget() {
        // The iterate sequence is independent of max_iters, so the returned
        // best-valid objective over a longer budget can only improve.
        let model =
            logistic_from_weights(array![[0.0, 0.0], [0.9, 0.4]], array![0.0, -5.5]).unwrap();
        let bounds = unit_bounds(2, 10.0);
        let base = zero_base(&bounds);
        let x = array![8.0, 7.0];
        let y = model.predict(x.view()).unwrap();
        let objective = |p: &Array1<f64>, kappa: f64| {
            let conf = model.confidence(p.view()).unwrap();
            let own = conf[y];
            let other = conf
                .iter()
                .enumerate()
                .filter(|&(c, _)| c != y)
                .map(|(_, &v)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            let margin = (other - own).max(-kappa);
            let dev: Vec<f64> = (0..2).map(|j| p[j] / 10.0).collect();
            margin
                + 0.1 * dev.iter().map(|v| v.abs()).sum::<f64>()
                + 1.0 * dev.iter().map(|v| v * v).sum::<f64>()
        };
        let mut prev = f64::INFINITY;
        for max_iters in [3usize, 10, 50, 200, 500] {
            let cfg = ExplainerConfig {
                max_iters,
                snap_epsilon: 0.0,
                ..ExplainerConfig::default()
            };
            let (pp, fell_back, _, _) = find_pp(&model, x.view(), &base, &bounds, &cfg).unwrap();
            if !fell_back {
                let obj = objective(&pp, cfg.kappa);
                assert!(
                    obj <= prev + 1e-12,
                    "objective rose from {prev} to {obj} at {max_iters} iters"
                );
                prev = obj;
            }
        }
        assert!(prev.is_finite(), "no valid PP found at any budget");
    }

    #[test]
    fn explanations_round_trip_through_csv() {
        let model = stump_model(5.0, 2);
        let bounds = unit_bounds(2, 10.0);
        let base = zero_base(&bounds);
        let cfg = ExplainerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let features = Array2::from_shape_fn((12, 2), |_| rng.gen_range(0.0..10.0));
        let labels = (0..12)
            .map(|i| usize::from(features[[i, 0]] > 5.0))
            .collect();
        let data = Dataset::from_parts(features, labels).unwrap();
        let set = explain_dataset(&model, &data, &base, &bounds, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("explanations.csv");
        save_explanations(&set, data.feature_names(), &path).unwrap();
        let loaded = load_explanations(&path, &data, &model, &base).unwrap();
        assert_eq!(loaded.len(), set.triplets.len());
        for (a, b) in loaded.iter().zip(&set.triplets) {
            assert_eq!(a.pp, b.pp);
            assert_eq!(a.pn, b.pn);
            assert_eq!(a.y_blackbox, b.y_blackbox);
            assert_eq!(a.pn_class, b.pn_class);
        }
    }
}
