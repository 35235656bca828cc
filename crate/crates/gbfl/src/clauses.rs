//! Boolean clause generation from explanation triplets.
//!
//! Each triplet turns into one sparse conjunction over grid-rounded
//! intervals: per feature, the pertinent positive contributes a bound at the
//! grid point nearest its value (between base and sample), the pertinent
//! negative a bound at the grid point nearest its value (beyond the sample),
//! and each contributes a second, regularizing bound `delta` grid steps past
//! the sample on the other side so the clause stays local. By construction
//! the generating sample satisfies its own clause and the pertinent negative
//! falsifies any clause carrying one of its bounds.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{BaseValues, Dataset};
use crate::error::{GbflError, Result};
use crate::explainer::ExplanationTriplet;
use crate::grid::{nearest_grid_index, GridMatrix, Side};

/// One side of an interval constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub inclusive: bool,
}

/// Interval constraint on a single feature; at least one side present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Literal {
    pub feature: usize,
    pub lower: Option<Bound>,
    pub upper: Option<Bound>,
}

impl Literal {
    pub fn contains(&self, v: f64) -> bool {
        if let Some(lo) = &self.lower {
            let ok = if lo.inclusive { v >= lo.value } else { v > lo.value };
            if !ok {
                return false;
            }
        }
        if let Some(hi) = &self.upper {
            let ok = if hi.inclusive { v <= hi.value } else { v < hi.value };
            if !ok {
                return false;
            }
        }
        true
    }

    /// Whether the interval contains at least one point.
    fn satisfiable(&self) -> bool {
        match (&self.lower, &self.upper) {
            (Some(lo), Some(hi)) => {
                lo.value < hi.value || (lo.value == hi.value && lo.inclusive && hi.inclusive)
            }
            _ => true,
        }
    }

    /// Number of bounds present (1 or 2).
    pub fn n_bounds(&self) -> usize {
        usize::from(self.lower.is_some()) + usize::from(self.upper.is_some())
    }
}

/// A conjunction of literals, at most one per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub literals: Vec<Literal>,
    /// Sample indices this clause was generated from (grows on dedup).
    pub provenance: Vec<usize>,
    /// Stable hash of the canonical form (sorted literals, exact bounds).
    pub id: String,
}

impl Clause {
    fn from_literals(mut literals: Vec<Literal>, sample_index: usize) -> Clause {
        literals.sort_by_key(|l| l.feature);
        let id = canonical_id(&literals);
        Clause {
            literals,
            provenance: vec![sample_index],
            id,
        }
    }

    /// Number of features constrained.
    pub fn n_features_constrained(&self) -> usize {
        self.literals.len()
    }

    /// Total bound count across literals.
    pub fn n_bounds(&self) -> usize {
        self.literals.iter().map(Literal::n_bounds).sum()
    }
}

fn canonical_id(literals: &[Literal]) -> String {
    let mut hasher = Sha256::new();
    for l in literals {
        hasher.update((l.feature as u64).to_le_bytes());
        for bound in [&l.lower, &l.upper] {
            match bound {
                None => hasher.update([0u8]),
                Some(b) => {
                    hasher.update([1u8, u8::from(b.inclusive)]);
                    hasher.update(b.value.to_le_bytes());
                }
            }
        }
    }
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Tighter of two lower bounds: higher value wins; at equal value an
/// exclusive bound is tighter.
fn tighter_lower(a: Bound, b: Bound) -> Bound {
    if a.value > b.value || (a.value == b.value && !a.inclusive) {
        a
    } else {
        b
    }
}

fn tighter_upper(a: Bound, b: Bound) -> Bound {
    if a.value < b.value || (a.value == b.value && !a.inclusive) {
        a
    } else {
        b
    }
}

/// Grid point strictly inside `(lo, hi)` closest to `target` (which is one
/// of the interval's endpoints in every use). Returns its value.
fn nearest_in_open_interval(grid: &GridMatrix, j: usize, lo: f64, hi: f64, target: f64) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    for s in 0..=grid.n_intervals() {
        let g = grid.point(j, s);
        if g <= lo || g >= hi {
            continue;
        }
        let dist = (g - target).abs();
        if best.map_or(true, |(_, bd)| dist < bd) {
            best = Some((g, dist));
        }
    }
    best.map(|(g, _)| g)
}

fn clamp_index(idx: usize, delta_signed: isize, max: usize) -> usize {
    let shifted = idx as isize + delta_signed;
    shifted.clamp(0, max as isize) as usize
}

/// A generated clause plus which features received contrast bounds (the
/// grid-rounded PP/PN values themselves, as opposed to the regularizing
/// bounds placed `delta` steps past the sample).
#[derive(Debug, Clone, PartialEq)]
pub struct ClauseGeneration {
    pub clause: Clause,
    pub pp_contrast_features: Vec<usize>,
    /// Non-empty implies the clause excludes the generating PN.
    pub pn_contrast_features: Vec<usize>,
}

/// Generate the boolean clause for one triplet, or `None` when no feature
/// yields a literal (or some feature's interval is empty).
pub fn clause_from_triplet(
    triplet: &ExplanationTriplet,
    grid: &GridMatrix,
    base: &BaseValues,
    delta: usize,
) -> Result<Option<Clause>> {
    Ok(clause_from_triplet_detailed(triplet, grid, base, delta)?.map(|g| g.clause))
}

/// As [`clause_from_triplet`], with bound provenance attached.
pub fn clause_from_triplet_detailed(
    triplet: &ExplanationTriplet,
    grid: &GridMatrix,
    base: &BaseValues,
    delta: usize,
) -> Result<Option<ClauseGeneration>> {
    let d = grid.n_features();
    if triplet.x.len() != d || base.len() != d {
        return Err(GbflError::DimensionMismatch {
            expected: d,
            got: triplet.x.len(),
        });
    }
    let n_max = grid.n_intervals();
    let delta = delta as isize;
    let mut literals = Vec::new();
    let mut pp_contrast_features = Vec::new();
    let mut pn_contrast_features = Vec::new();
    for j in 0..d {
        let x = triplet.x[j];
        let b = base.get(j);
        let p = triplet.pp[j];
        let mut lower: Option<Bound> = None;
        let mut upper: Option<Bound> = None;
        let add_lower = |bound: Bound, lower: &mut Option<Bound>| {
            *lower = Some(match lower.take() {
                None => bound,
                Some(existing) => tighter_lower(existing, bound),
            });
        };
        let add_upper = |bound: Bound, upper: &mut Option<Bound>| {
            *upper = Some(match upper.take() {
                None => bound,
                Some(existing) => tighter_upper(existing, bound),
            });
        };

        if p > b {
            // PP above base: at least the rounded PP value, and not too far
            // above the sample.
            if let Some(g) = nearest_in_open_interval(grid, j, b, p, p) {
                add_lower(Bound { value: g, inclusive: true }, &mut lower);
                pp_contrast_features.push(j);
            }
            if let Some(s) = nearest_grid_index(grid, j, x, Side::Above, true) {
                let g = grid.point(j, clamp_index(s, delta, n_max));
                add_upper(Bound { value: g, inclusive: false }, &mut upper);
            }
        } else if p < b {
            // PP below base: mirrored.
            if let Some(g) = nearest_in_open_interval(grid, j, p, b, p) {
                add_upper(Bound { value: g, inclusive: false }, &mut upper);
                pp_contrast_features.push(j);
            }
            if let Some(s) = nearest_grid_index(grid, j, x, Side::Below, true) {
                let g = grid.point(j, clamp_index(s, -delta, n_max));
                add_lower(Bound { value: g, inclusive: true }, &mut lower);
            }
        }

        if let Some(pn) = &triplet.pn {
            // Only features the PN actually moved contribute bounds; the
            // move direction is away from the base by construction.
            let n = pn[j];
            if n > x {
                // PN above the sample: below the rounded PN value, and not
                // too far below the sample.
                if let Some(g) = nearest_in_open_interval(grid, j, x, n, n) {
                    add_upper(Bound { value: g, inclusive: false }, &mut upper);
                    pn_contrast_features.push(j);
                }
                if let Some(s) = nearest_grid_index(grid, j, x, Side::Below, true) {
                    let g = grid.point(j, clamp_index(s, -delta, n_max));
                    add_lower(Bound { value: g, inclusive: true }, &mut lower);
                }
            } else if n < x {
                // PN below the sample: mirrored, with both sides exclusive.
                if let Some(g) = nearest_in_open_interval(grid, j, n, x, n) {
                    add_lower(Bound { value: g, inclusive: false }, &mut lower);
                    pn_contrast_features.push(j);
                }
                if let Some(s) = nearest_grid_index(grid, j, x, Side::Above, true) {
                    let g = grid.point(j, clamp_index(s, delta, n_max));
                    add_upper(Bound { value: g, inclusive: false }, &mut upper);
                }
            }
        }

        if lower.is_none() && upper.is_none() {
            continue;
        }
        let literal = Literal {
            feature: j,
            lower,
            upper,
        };
        if !literal.satisfiable() {
            // An unsatisfiable feature means the grid is too coarse for
            // this triplet; a constant-false column is useless downstream.
            return Ok(None);
        }
        literals.push(literal);
    }
    if literals.is_empty() {
        return Ok(None);
    }
    Ok(Some(ClauseGeneration {
        clause: Clause::from_literals(literals, triplet.sample_index),
        pp_contrast_features,
        pn_contrast_features,
    }))
}

/// Evaluate a clause on a feature vector: 1 iff every literal's interval
/// contains the corresponding coordinate.
pub fn evaluate_clause(clause: &Clause, x: ArrayView1<'_, f64>) -> Result<u8> {
    for literal in &clause.literals {
        if literal.feature >= x.len() {
            return Err(GbflError::DimensionMismatch {
                expected: literal.feature + 1,
                got: x.len(),
            });
        }
        if !literal.contains(x[literal.feature]) {
            return Ok(0);
        }
    }
    Ok(1)
}

/// Where the boolean dataset's target labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    /// Black-box predictions on the samples (default: the transparent model
    /// is trained to mimic the black box).
    #[default]
    Blackbox,
    /// Ground-truth labels.
    True,
}

/// The binarized dataset: one column per deduplicated clause, one row per
/// sample, entries `clause(sample)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanDataset {
    pub matrix: Array2<u8>,
    pub clauses: Vec<Clause>,
    pub targets: Vec<usize>,
    pub n_classes: usize,
}

impl BooleanDataset {
    pub fn n_samples(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Generate clauses for every triplet, deduplicate them by canonical form
/// (first-occurrence order, provenance merged), and materialize the boolean
/// matrix over `data`.
pub fn build_boolean_dataset(
    triplets: &[ExplanationTriplet],
    grid: &GridMatrix,
    base: &BaseValues,
    delta: usize,
    data: &Dataset,
    targets: TargetSource,
) -> Result<BooleanDataset> {
    if triplets.len() != data.n_samples() {
        return Err(GbflError::DimensionMismatch {
            expected: data.n_samples(),
            got: triplets.len(),
        });
    }
    let clauses = generate_clauses(triplets, grid, base, delta)?;
    if clauses.is_empty() {
        return Err(GbflError::NoClauses);
    }
    let matrix = clause_matrix(&clauses, data.features().view())?;
    let target_vec = match targets {
        TargetSource::Blackbox => triplets.iter().map(|t| t.y_blackbox).collect(),
        TargetSource::True => data.labels().to_vec(),
    };
    Ok(BooleanDataset {
        matrix,
        clauses,
        targets: target_vec,
        n_classes: data.n_classes(),
    })
}

/// Deduplicated clause list for a batch of triplets.
pub fn generate_clauses(
    triplets: &[ExplanationTriplet],
    grid: &GridMatrix,
    base: &BaseValues,
    delta: usize,
) -> Result<Vec<Clause>> {
    let mut clauses: Vec<Clause> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for triplet in triplets {
        if let Some(clause) = clause_from_triplet(triplet, grid, base, delta)? {
            match by_id.get(&clause.id) {
                Some(&col) => clauses[col].provenance.push(triplet.sample_index),
                None => {
                    by_id.insert(clause.id.clone(), clauses.len());
                    clauses.push(clause);
                }
            }
        }
    }
    for clause in &mut clauses {
        clause.provenance.sort_unstable();
        clause.provenance.dedup();
    }
    Ok(clauses)
}

/// Evaluate every clause on every row.
pub fn clause_matrix(clauses: &[Clause], features: ArrayView2<'_, f64>) -> Result<Array2<u8>> {
    let mut matrix = Array2::zeros((features.nrows(), clauses.len()));
    for (i, row) in features.rows().into_iter().enumerate() {
        for (c, clause) in clauses.iter().enumerate() {
            matrix[[i, c]] = evaluate_clause(clause, row)?;
        }
    }
    Ok(matrix)
}

/// Listing-style pretty printing: `upper>=name>=lower` with two-decimal
/// display, terms joined by ` & `. Inclusivity is not displayed.
pub fn format_clause(clause: &Clause, feature_names: &[String]) -> String {
    let parts: Vec<String> = clause
        .literals
        .iter()
        .map(|l| {
            let name = feature_names
                .get(l.feature)
                .map(|s| s.as_str())
                .unwrap_or("?");
            match (&l.lower, &l.upper) {
                (Some(lo), Some(hi)) => format!("{:.2}>={}>={:.2}", hi.value, name, lo.value),
                (Some(lo), None) => format!("{}>={:.2}", name, lo.value),
                (None, Some(hi)) => format!("{}<={:.2}", name, hi.value),
                (None, None) => unreachable!("literal with no bounds"),
            }
        })
        .collect();
    parts.join(" & ")
}

// ---------------------------------------------------------------------------
// JSON persistence.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LiteralJson {
    feature: usize,
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    lower: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    upper: Option<Bound>,
}

#[derive(Serialize, Deserialize)]
struct ClauseJson {
    id: String,
    provenance: Vec<usize>,
    literals: Vec<LiteralJson>,
}

#[derive(Serialize, Deserialize)]
struct ClauseSetJson {
    schema_version: u32,
    feature_names: Vec<String>,
    clauses: Vec<ClauseJson>,
}

/// Write a clause list (with feature names for readability) as JSON.
pub fn save_clauses(
    clauses: &[Clause],
    feature_names: &[String],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let set = ClauseSetJson {
        schema_version: 1,
        feature_names: feature_names.to_vec(),
        clauses: clauses
            .iter()
            .map(|c| ClauseJson {
                id: c.id.clone(),
                provenance: c.provenance.clone(),
                literals: c
                    .literals
                    .iter()
                    .map(|l| LiteralJson {
                        feature: l.feature,
                        name: feature_names
                            .get(l.feature)
                            .cloned()
                            .unwrap_or_default(),
                        lower: l.lower,
                        upper: l.upper,
                    })
                    .collect(),
            })
            .collect(),
    };
    std::fs::write(path.as_ref(), serde_json::to_vec_pretty(&set)?)
        .map_err(|e| GbflError::io(path_str, e))
}

/// Load a clause list written by [`save_clauses`].
pub fn load_clauses(path: impl AsRef<Path>) -> Result<(Vec<Clause>, Vec<String>)> {
    let path_str = path.as_ref().display().to_string();
    let bytes = std::fs::read(path.as_ref()).map_err(|e| GbflError::io(path_str, e))?;
    let set: ClauseSetJson = serde_json::from_slice(&bytes)?;
    let clauses = set
        .clauses
        .into_iter()
        .map(|c| Clause {
            literals: c
                .literals
                .into_iter()
                .map(|l| Literal {
                    feature: l.feature,
                    lower: l.lower,
                    upper: l.upper,
                })
                .collect(),
            provenance: c.provenance,
            id: c.id,
        })
        .collect();
    Ok((clauses, set.feature_names))
}
