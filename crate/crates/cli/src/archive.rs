//! The JSON solution archive. Every stored float is rounded to 15
//! significant digits before serialization, so identical runs produce
//! identical bytes.

use std::path::Path;

use mscca_core::metrics::ClassKChoice;
use mscca_core::util::round_significant;
use mscca_core::{ClusterSpec, HierarchicalAssignment, SupplementaryData};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::error::CliError;

pub const FORMAT: &str = "mscca-archive";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionArchive {
    pub format: String,
    pub version: String,
    pub method: Method,
    pub seed: u64,
    pub config: RunConfig,
    pub dims: usize,
    /// Per-class KL report; empty unless cluster counts were chosen
    /// automatically.
    pub k_selection: Vec<KReport>,
    pub solution: SolutionRecord,
    pub coordinates: Vec<CoordRecord>,
    pub residuals: Vec<ResidualRow>,
}

impl SolutionArchive {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Input(mscca_core::Error::Io(e)))?;
        let archive: Self = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("{}: not a solution archive: {e}", path.display()))
        })?;
        if archive.format != FORMAT {
            return Err(CliError::Config(format!(
                "{}: unexpected format tag {:?}",
                path.display(),
                archive.format
            )));
        }
        Ok(archive)
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut text = serde_json::to_string_pretty(self).map_err(crate::error::export_err)?;
        text.push('\n');
        Ok(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub sup_names: Vec<String>,
    /// K_hs indexed `[h][s]`.
    pub cluster_counts: Vec<Vec<usize>>,
    /// Display label of each global cluster id.
    pub cluster_labels: Vec<String>,
    pub category_labels: Vec<String>,
    /// One record per (observation, supplementary variable); empty for
    /// methods without clusters.
    pub assignment: Vec<AssignmentRecord>,
    /// G, one row per global cluster (or class).
    pub centers: Vec<Vec<f64>>,
    /// B, one row per category.
    pub quantifications: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub phi: f64,
    pub psi: Option<f64>,
    pub trace: Vec<f64>,
    pub start_index: Option<usize>,
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub obs: usize,
    pub variable: String,
    pub class: String,
    /// Global cluster id (row of `centers`).
    pub cluster: usize,
    /// Cluster index inside the class.
    pub within: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Cluster,
    Class,
    Category,
}

impl PointKind {
    pub fn name(self) -> &'static str {
        match self {
            PointKind::Cluster => "cluster",
            PointKind::Class => "class",
            PointKind::Category => "category",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordRecord {
    pub point_kind: PointKind,
    pub label: String,
    pub coords: Vec<f64>,
    pub mass: f64,
    /// Observations in the cluster, class or category.
    pub size: usize,
    /// Cluster size over class size; set for cluster points only.
    pub share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub method: String,
    pub row: String,
    pub class: String,
    pub column: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KReport {
    pub variable: String,
    pub class: String,
    pub k: usize,
    pub k_values: Vec<usize>,
    pub w_values: Vec<f64>,
    pub nu: f64,
    /// (K, KL(K)); `None` where the index is infinite.
    pub kl: Vec<(usize, Option<f64>)>,
}

impl KReport {
    pub fn from_choice(choice: &ClassKChoice, variable: &str) -> Self {
        Self {
            variable: variable.to_string(),
            class: choice.class_label.clone(),
            k: choice.selection.k,
            k_values: choice.curve.k_values.clone(),
            w_values: round_vec(&choice.curve.w_values),
            nu: r15(choice.curve.nu),
            kl: choice
                .selection
                .index
                .iter()
                .map(|&(k, v)| (k, v.is_finite().then(|| r15(v))))
                .collect(),
        }
    }
}

pub fn r15(x: f64) -> f64 {
    round_significant(x, 15)
}

pub fn round_vec(xs: &[f64]) -> Vec<f64> {
    xs.iter().copied().map(r15).collect()
}

pub fn round_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|r| r.iter().copied().map(r15).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Config("ragged matrix in archive".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn assignment_records(
    u: &HierarchicalAssignment,
    sup: &SupplementaryData,
) -> Vec<AssignmentRecord> {
    let mut out = Vec::with_capacity(u.n_obs() * u.n_sup());
    for i in 0..u.n_obs() {
        for h in 0..u.n_sup() {
            out.push(AssignmentRecord {
                obs: i,
                variable: sup.names()[h].clone(),
                class: sup.labels(h)[u.class(h, i)].clone(),
                cluster: u.column(h, i),
                within: u.cluster(h, i),
            });
        }
    }
    out
}

/// Rebuilds the assignment stored in an archive against the supplementary
/// data it was fitted on.
pub fn restore_assignment(
    record: &SolutionRecord,
    sup: &SupplementaryData,
) -> Result<HierarchicalAssignment, CliError> {
    let h_count = record.sup_names.len();
    if sup.names() != record.sup_names.as_slice()
        || record.assignment.len() != sup.n_obs() * h_count
    {
        return Err(CliError::Config(
            "archive does not match the supplementary data".into(),
        ));
    }
    let spec = ClusterSpec::new(record.cluster_counts.clone());
    HierarchicalAssignment::build(sup, &spec, |h, i| record.assignment[i * h_count + h].within)
        .map_err(CliError::Input)
}
