//! Categorical tables, indicator structures and the two-level cluster
//! assignment.
//!
//! Observations are coded per column by first appearance of each label. The
//! active variables (`CategoricalDataset`) are the ones whose categories get
//! quantified; the supplementary variables (`SupplementaryData`) only split
//! the observations into classes, inside which clusters are sought.

use std::collections::HashMap;
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CodedColumns {
    names: Vec<String>,
    labels: Vec<Vec<String>>,
    columns: Vec<Vec<usize>>,
    n_obs: usize,
}

impl CodedColumns {
    fn encode(names: Vec<String>, rows: &[Vec<String>]) -> Result<Self> {
        let width = names.len();
        let mut labels: Vec<Vec<String>> = vec![Vec::new(); width];
        let mut lookup: Vec<HashMap<String, usize>> = vec![HashMap::new(); width];
        let mut columns: Vec<Vec<usize>> = vec![Vec::with_capacity(rows.len()); width];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Shape(format!(
                    "row {i} has {} cells, expected {width}",
                    row.len()
                )));
            }
            for (j, cell) in row.iter().enumerate() {
                let cell = cell.trim();
                if cell.is_empty() {
                    return Err(Error::MissingValue { row: i, col: j });
                }
                let next = labels[j].len();
                let code = *lookup[j].entry(cell.to_string()).or_insert_with(|| {
                    labels[j].push(cell.to_string());
                    next
                });
                columns[j].push(code);
            }
        }
        Ok(Self {
            names,
            labels,
            columns,
            n_obs: rows.len(),
        })
    }

    /// Builds from explicit codes, dropping labels that never occur.
    fn from_codes(
        names: Vec<String>,
        columns: Vec<Vec<usize>>,
        labels: Vec<Vec<String>>,
    ) -> Result<Self> {
        if names.len() != columns.len() || labels.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} names, {} columns, {} label lists",
                names.len(),
                columns.len(),
                labels.len()
            )));
        }
        let n_obs = columns.first().map_or(0, Vec::len);
        let mut out_cols = Vec::with_capacity(columns.len());
        let mut out_labels = Vec::with_capacity(columns.len());
        for (j, (col, labs)) in columns.into_iter().zip(labels).enumerate() {
            if col.len() != n_obs {
                return Err(Error::Shape(format!(
                    "column {j} has {} entries, expected {n_obs}",
                    col.len()
                )));
            }
            let mut used = vec![false; labs.len()];
            for &c in &col {
                if c >= labs.len() {
                    return Err(Error::Shape(format!(
                        "code {c} out of range for column {j} with {} labels",
                        labs.len()
                    )));
                }
                used[c] = true;
            }
            let mut remap = vec![usize::MAX; labs.len()];
            let mut kept = Vec::new();
            for (c, lab) in labs.into_iter().enumerate() {
                if used[c] {
                    remap[c] = kept.len();
                    kept.push(lab);
                } else {
                    log::warn!("dropping unused category {lab:?} of column {}", names[j]);
                }
            }
            out_cols.push(col.into_iter().map(|c| remap[c]).collect());
            out_labels.push(kept);
        }
        Ok(Self {
            names,
            labels: out_labels,
            columns: out_cols,
            n_obs,
        })
    }

    fn subset(&self, rows: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|col| rows.iter().map(|&i| col[i]).collect())
            .collect();
        Self::from_codes(self.names.clone(), columns, self.labels.clone())
    }

    fn decode(&self) -> Vec<Vec<String>> {
        (0..self.n_obs)
            .map(|i| {
                self.columns
                    .iter()
                    .zip(&self.labels)
                    .map(|(col, labs)| labs[col[i]].clone())
                    .collect()
            })
            .collect()
    }
}

/// N observations of m categorical variables, integer coded per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDataset {
    inner: CodedColumns,
    offsets: Vec<usize>,
}

impl CategoricalDataset {
    /// Codes a rectangular table of labels by first appearance per column.
    pub fn encode(names: Vec<String>, rows: &[Vec<String>]) -> Result<Self> {
        Ok(Self::wrap(CodedColumns::encode(names, rows)?))
    }

    /// Builds a dataset from codes and label lists. Labels that no
    /// observation uses are dropped with a warning.
    pub fn from_codes(
        names: Vec<String>,
        columns: Vec<Vec<usize>>,
        labels: Vec<Vec<String>>,
    ) -> Result<Self> {
        Ok(Self::wrap(CodedColumns::from_codes(
            names, columns, labels,
        )?))
    }

    fn wrap(inner: CodedColumns) -> Self {
        let mut offsets = Vec::with_capacity(inner.labels.len());
        let mut acc = 0;
        for labs in &inner.labels {
            offsets.push(acc);
            acc += labs.len();
        }
        Self { inner, offsets }
    }

    pub fn n_obs(&self) -> usize {
        self.inner.n_obs
    }

    pub fn n_vars(&self) -> usize {
        self.inner.columns.len()
    }

    /// Number of categories q_j of variable `j`.
    pub fn n_categories(&self, j: usize) -> usize {
        self.inner.labels[j].len()
    }

    /// Total category count Q.
    pub fn total_categories(&self) -> usize {
        self.inner.labels.iter().map(Vec::len).sum()
    }

    /// First column of variable `j` inside the concatenated indicator Z.
    pub fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn code(&self, i: usize, j: usize) -> usize {
        self.inner.columns[j][i]
    }

    /// Column of Z that observation `i` marks for variable `j`.
    pub fn indicator_column(&self, i: usize, j: usize) -> usize {
        self.offsets[j] + self.inner.columns[j][i]
    }

    pub fn column(&self, j: usize) -> &[usize] {
        &self.inner.columns[j]
    }

    pub fn names(&self) -> &[String] {
        &self.inner.names
    }

    pub fn labels(&self, j: usize) -> &[String] {
        &self.inner.labels[j]
    }

    pub fn decode(&self) -> Vec<Vec<String>> {
        self.inner.decode()
    }

    /// Restricts to the given rows; categories absent from the subset are
    /// removed.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Ok(Self::wrap(self.inner.subset(rows)?))
    }

    /// Per-category frequencies in Z column order.
    pub fn category_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.total_categories()];
        for j in 0..self.n_vars() {
            for &c in self.column(j) {
                counts[self.offsets[j] + c] += 1;
            }
        }
        counts
    }
}

/// N observations of H supplementary variables whose categories define
/// classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplementaryData {
    inner: CodedColumns,
}

impl SupplementaryData {
    pub fn encode(names: Vec<String>, rows: &[Vec<String>]) -> Result<Self> {
        Ok(Self {
            inner: CodedColumns::encode(names, rows)?,
        })
    }

    pub fn from_codes(
        names: Vec<String>,
        columns: Vec<Vec<usize>>,
        labels: Vec<Vec<String>>,
    ) -> Result<Self> {
        Ok(Self {
            inner: CodedColumns::from_codes(names, columns, labels)?,
        })
    }

    /// One supplementary variable with a single class covering everyone.
    pub fn single_class(n_obs: usize) -> Self {
        Self {
            inner: CodedColumns {
                names: vec!["all".into()],
                labels: vec![vec!["all".into()]],
                columns: vec![vec![0; n_obs]],
                n_obs,
            },
        }
    }

    pub fn n_obs(&self) -> usize {
        self.inner.n_obs
    }

    pub fn n_sup(&self) -> usize {
        self.inner.columns.len()
    }

    pub fn n_classes(&self, h: usize) -> usize {
        self.inner.labels[h].len()
    }

    pub fn class(&self, h: usize, i: usize) -> usize {
        self.inner.columns[h][i]
    }

    pub fn column(&self, h: usize) -> &[usize] {
        &self.inner.columns[h]
    }

    pub fn names(&self) -> &[String] {
        &self.inner.names
    }

    pub fn labels(&self, h: usize) -> &[String] {
        &self.inner.labels[h]
    }

    pub fn class_sizes(&self, h: usize) -> Vec<usize> {
        let mut sizes = vec![0; self.n_classes(h)];
        for &s in self.column(h) {
            sizes[s] += 1;
        }
        sizes
    }

    pub fn members(&self, h: usize, s: usize) -> Vec<usize> {
        self.column(h)
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c == s).then_some(i))
            .collect()
    }

    /// Class indicator V_h (N×r_h).
    pub fn indicator_block(&self, h: usize) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(self.n_obs(), self.n_classes(h));
        for (i, &s) in self.column(h).iter().enumerate() {
            v[(i, s)] = 1.0;
        }
        v
    }

    pub fn decode(&self) -> Vec<Vec<String>> {
        self.inner.decode()
    }
}

/// Number of clusters K_hs requested inside every class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSpec {
    counts: Vec<Vec<usize>>,
}

impl ClusterSpec {
    pub fn new(counts: Vec<Vec<usize>>) -> Self {
        Self { counts }
    }

    /// The same cluster count in every class.
    pub fn uniform(sup: &SupplementaryData, k: usize) -> Self {
        Self {
            counts: (0..sup.n_sup())
                .map(|h| vec![k; sup.n_classes(h)])
                .collect(),
        }
    }

    pub fn count(&self, h: usize, s: usize) -> usize {
        self.counts[h][s]
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    /// K_h.
    pub fn per_variable(&self, h: usize) -> usize {
        self.counts[h].iter().sum()
    }

    /// K.
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Checks shape against `sup` and that every class can host its clusters.
    pub fn validate(&self, sup: &SupplementaryData) -> Result<()> {
        if self.counts.len() != sup.n_sup() {
            return Err(Error::Spec(format!(
                "cluster counts given for {} supplementary variables, data has {}",
                self.counts.len(),
                sup.n_sup()
            )));
        }
        for (h, row) in self.counts.iter().enumerate() {
            if row.len() != sup.n_classes(h) {
                return Err(Error::Spec(format!(
                    "variable {}: {} cluster counts for {} classes",
                    sup.names()[h],
                    row.len(),
                    sup.n_classes(h)
                )));
            }
            let sizes = sup.class_sizes(h);
            for (s, (&k, &size)) in row.iter().zip(&sizes).enumerate() {
                if k == 0 || k > size {
                    return Err(Error::Spec(format!(
                        "class {}={} has {size} members, cannot host {k} clusters",
                        sup.names()[h],
                        sup.labels(h)[s]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Where an indicator column sits in the two-level structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterKey {
    pub h: usize,
    pub s: usize,
    pub k: usize,
}

/// One cluster per (supplementary variable, observation), always inside the
/// observation's class.
///
/// Global cluster columns are ordered by variable, then class, then cluster
/// index, which is the column layout of the block-diagonal stacked indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalAssignment {
    n_obs: usize,
    classes: Vec<Vec<usize>>,
    clusters: Vec<Vec<usize>>,
    spec: ClusterSpec,
    class_offsets: Vec<Vec<usize>>,
    block_offsets: Vec<usize>,
}

impl HierarchicalAssignment {
    /// Materializes an assignment from a per-(h, i) within-class cluster
    /// index. The spec is validated against `sup` first.
    pub fn build(
        sup: &SupplementaryData,
        spec: &ClusterSpec,
        cluster_of: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        spec.validate(sup)?;
        let clusters: Vec<Vec<usize>> = (0..sup.n_sup())
            .map(|h| (0..sup.n_obs()).map(|i| cluster_of(h, i)).collect())
            .collect();
        Self::from_parts(sup, spec, clusters)
    }

    pub(crate) fn from_parts(
        sup: &SupplementaryData,
        spec: &ClusterSpec,
        clusters: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let classes: Vec<Vec<usize>> = (0..sup.n_sup()).map(|h| sup.column(h).to_vec()).collect();
        for (h, row) in clusters.iter().enumerate() {
            for (i, &k) in row.iter().enumerate() {
                let s = classes[h][i];
                if k >= spec.count(h, s) {
                    return Err(Error::Assignment(format!(
                        "observation {i}, variable {h}: cluster {k} outside class {s} with {} clusters",
                        spec.count(h, s)
                    )));
                }
            }
        }
        let mut class_offsets = Vec::with_capacity(spec.counts().len());
        let mut block_offsets = Vec::with_capacity(spec.counts().len());
        let mut acc = 0;
        for row in spec.counts() {
            block_offsets.push(acc);
            let mut offs = Vec::with_capacity(row.len());
            for &k in row {
                offs.push(acc);
                acc += k;
            }
            class_offsets.push(offs);
        }
        Ok(Self {
            n_obs: sup.n_obs(),
            classes,
            clusters,
            spec: spec.clone(),
            class_offsets,
            block_offsets,
        })
    }

    /// Reads an assignment back from indicator blocks U_h, rejecting any
    /// that breaks the two-level constraint.
    pub fn from_indicator_blocks(
        blocks: &[DMatrix<f64>],
        sup: &SupplementaryData,
        spec: &ClusterSpec,
    ) -> Result<Self> {
        spec.validate(sup)?;
        let violations = validate_assignment(blocks, sup, spec);
        if let Some(v) = violations.first() {
            return Err(Error::Assignment(format!(
                "{} violations, first at observation {} of variable {}: {}",
                violations.len(),
                v.obs,
                v.h,
                v.reason
            )));
        }
        let mut clusters = vec![vec![0; sup.n_obs()]; sup.n_sup()];
        for (h, block) in blocks.iter().enumerate() {
            let mut off = 0;
            let starts: Vec<usize> = spec.counts()[h]
                .iter()
                .map(|&k| {
                    let o = off;
                    off += k;
                    o
                })
                .collect();
            for i in 0..sup.n_obs() {
                let s = sup.class(h, i);
                let col = (0..block.ncols())
                    .find(|&c| block[(i, c)] == 1.0)
                    .unwrap_or(0);
                clusters[h][i] = col - starts[s];
            }
        }
        Self::from_parts(sup, spec, clusters)
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_sup(&self) -> usize {
        self.classes.len()
    }

    pub fn spec(&self) -> &ClusterSpec {
        &self.spec
    }

    /// Total number of clusters K (columns of the stacked indicator).
    pub fn n_clusters(&self) -> usize {
        self.spec.total()
    }

    pub fn class(&self, h: usize, i: usize) -> usize {
        self.classes[h][i]
    }

    /// Within-class cluster index of observation `i` for variable `h`.
    pub fn cluster(&self, h: usize, i: usize) -> usize {
        self.clusters[h][i]
    }

    pub fn clusters(&self, h: usize) -> &[usize] {
        &self.clusters[h]
    }

    pub(crate) fn set_cluster(&mut self, h: usize, i: usize, k: usize) {
        debug_assert!(k < self.spec.count(h, self.classes[h][i]));
        self.clusters[h][i] = k;
    }

    /// Global column of (h, s, k).
    pub fn column_of(&self, h: usize, s: usize, k: usize) -> usize {
        self.class_offsets[h][s] + k
    }

    /// Global column indicated by observation `i` in block `h`.
    pub fn column(&self, h: usize, i: usize) -> usize {
        self.class_offsets[h][self.classes[h][i]] + self.clusters[h][i]
    }

    pub fn block_offset(&self, h: usize) -> usize {
        self.block_offsets[h]
    }

    /// (h, s, k) for every global column, in column order.
    pub fn keys(&self) -> Vec<ClusterKey> {
        let mut keys = Vec::with_capacity(self.n_clusters());
        for (h, row) in self.spec.counts().iter().enumerate() {
            for (s, &kk) in row.iter().enumerate() {
                keys.extend((0..kk).map(|k| ClusterKey { h, s, k }));
            }
        }
        keys
    }

    /// Member count per global column (the diagonal of U'U).
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for h in 0..self.n_sup() {
            for i in 0..self.n_obs {
                sizes[self.column(h, i)] += 1;
            }
        }
        sizes
    }

    /// Observations per global column.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for h in 0..self.n_sup() {
            for i in 0..self.n_obs {
                out[self.column(h, i)].push(i);
            }
        }
        out
    }

    /// First empty global column, if any.
    pub fn first_empty(&self) -> Option<usize> {
        self.cluster_sizes().iter().position(|&n| n == 0)
    }

    /// U_h (N×K_h).
    pub fn indicator_block(&self, h: usize) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.n_obs, self.spec.per_variable(h));
        for i in 0..self.n_obs {
            u[(i, self.column(h, i) - self.block_offsets[h])] = 1.0;
        }
        u
    }

    /// Block-diagonal U (NH×K).
    pub fn stacked_indicator(&self) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.n_obs * self.n_sup(), self.n_clusters());
        for h in 0..self.n_sup() {
            for i in 0..self.n_obs {
                u[(h * self.n_obs + i, self.column(h, i))] = 1.0;
            }
        }
        u
    }

    /// Checks the two-level constraint against `sup`.
    pub fn validate(&self, sup: &SupplementaryData) -> Vec<Violation> {
        let blocks: Vec<_> = (0..self.n_sup()).map(|h| self.indicator_block(h)).collect();
        validate_assignment(&blocks, sup, &self.spec)
    }
}

/// A row of some U_h that breaks the two-level constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub h: usize,
    pub obs: usize,
    pub reason: String,
}

/// Reports every (h, i) whose indicator row is not exactly one 1 inside the
/// observed class.
pub fn validate_assignment(
    blocks: &[DMatrix<f64>],
    sup: &SupplementaryData,
    spec: &ClusterSpec,
) -> Vec<Violation> {
    let mut out = Vec::new();
    if blocks.len() != sup.n_sup() || spec.counts().len() != sup.n_sup() {
        out.push(Violation {
            h: 0,
            obs: 0,
            reason: format!(
                "{} blocks for {} supplementary variables",
                blocks.len(),
                sup.n_sup()
            ),
        });
        return out;
    }
    for (h, block) in blocks.iter().enumerate() {
        let width = spec.per_variable(h);
        if block.nrows() != sup.n_obs() || block.ncols() != width {
            out.push(Violation {
                h,
                obs: 0,
                reason: format!(
                    "block is {}x{}, expected {}x{width}",
                    block.nrows(),
                    block.ncols(),
                    sup.n_obs()
                ),
            });
            continue;
        }
        let mut starts = Vec::with_capacity(sup.n_classes(h));
        let mut acc = 0;
        for &k in &spec.counts()[h] {
            starts.push(acc);
            acc += k;
        }
        for i in 0..sup.n_obs() {
            let s = sup.class(h, i);
            let lo = starts[s];
            let hi = lo + spec.count(h, s);
            let mut inside = 0;
            let mut bad = None;
            for c in 0..width {
                let v = block[(i, c)];
                if v != 0.0 && v != 1.0 {
                    bad = Some(format!("entry {v} is not binary"));
                } else if v == 1.0 {
                    if (lo..hi).contains(&c) {
                        inside += 1;
                    } else {
                        bad = Some(format!("column {c} lies outside class {s}"));
                    }
                }
            }
            let reason = bad.or(match inside {
                1 => None,
                0 => Some("no cluster indicated".into()),
                n => Some(format!("{n} clusters indicated")),
            });
            if let Some(reason) = reason {
                out.push(Violation { h, obs: i, reason });
            }
        }
    }
    out
}

/// Access to the indicator matrices of a dataset replicated for H
/// supplementary variables.
#[derive(Debug, Clone)]
pub struct IndicatorView<'a> {
    data: &'a CategoricalDataset,
    n_sup: usize,
    counts: Vec<f64>,
    means: Vec<f64>,
}

/// Builds the H-fold stacked indicator view of `data`.
pub fn stacked_indicators(data: &CategoricalDataset, n_sup: usize) -> Result<IndicatorView<'_>> {
    if n_sup == 0 {
        return Err(Error::Spec(
            "need at least one supplementary variable".into(),
        ));
    }
    if data.n_obs() == 0 || data.n_vars() == 0 {
        return Err(Error::Shape("dataset is empty".into()));
    }
    let counts: Vec<f64> = data
        .category_counts()
        .into_iter()
        .map(|c| c as f64)
        .collect();
    let n = data.n_obs() as f64;
    let means = counts.iter().map(|c| c / n).collect();
    Ok(IndicatorView {
        data,
        n_sup,
        counts,
        means,
    })
}

impl<'a> IndicatorView<'a> {
    pub fn dataset(&self) -> &'a CategoricalDataset {
        self.data
    }

    pub fn n_obs(&self) -> usize {
        self.data.n_obs()
    }

    pub fn n_vars(&self) -> usize {
        self.data.n_vars()
    }

    pub fn n_sup(&self) -> usize {
        self.n_sup
    }

    pub fn total_categories(&self) -> usize {
        self.counts.len()
    }

    /// Column means of Z (identical to those of the stacked Z^H).
    pub fn column_means(&self) -> &[f64] {
        &self.means
    }

    /// Diagonal of D = Z̃'Z̃ for the stacked indicator: category counts × H.
    pub fn masses(&self) -> DVector<f64> {
        let h = self.n_sup as f64;
        DVector::from_iterator(self.counts.len(), self.counts.iter().map(|c| c * h))
    }

    /// Z_j (N×q_j).
    pub fn z_block(&self, j: usize) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.n_obs(), self.data.n_categories(j));
        for (i, &c) in self.data.column(j).iter().enumerate() {
            z[(i, c)] = 1.0;
        }
        z
    }

    /// Z (N×Q).
    pub fn z(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.n_obs(), self.total_categories());
        for j in 0..self.n_vars() {
            for i in 0..self.n_obs() {
                z[(i, self.data.indicator_column(i, j))] = 1.0;
            }
        }
        z
    }

    /// Z_j^H (NH×q_j).
    pub fn z_stacked_block(&self, j: usize) -> DMatrix<f64> {
        replicate_rows(&self.z_block(j), self.n_sup)
    }

    /// Z^H (NH×Q).
    pub fn z_stacked(&self) -> DMatrix<f64> {
        replicate_rows(&self.z(), self.n_sup)
    }

    /// J·Z (N×Q).
    pub fn centered_z(&self) -> DMatrix<f64> {
        let mut z = self.z();
        for (c, mean) in self.means.iter().enumerate() {
            z.column_mut(c).add_scalar_mut(-mean);
        }
        z
    }

    /// Rows of J·Z·B (N×p): centered, unscaled object scores.
    pub fn centered_scores(&self, quant: &DMatrix<f64>) -> DMatrix<f64> {
        let p = quant.ncols();
        let mean_row: Vec<f64> = (0..p)
            .map(|d| {
                self.means
                    .iter()
                    .enumerate()
                    .map(|(c, m)| m * quant[(c, d)])
                    .sum()
            })
            .collect();
        let mut out = DMatrix::zeros(self.n_obs(), p);
        for i in 0..self.n_obs() {
            for j in 0..self.n_vars() {
                let c = self.data.indicator_column(i, j);
                for d in 0..p {
                    out[(i, d)] += quant[(c, d)];
                }
            }
            for d in 0..p {
                out[(i, d)] -= mean_row[d];
            }
        }
        out
    }
}

fn replicate_rows(m: &DMatrix<f64>, times: usize) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n * times, m.ncols(), |r, c| m[(r % n, c)])
}

/// Header plus rows of a CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    /// Reads a UTF-8 CSV with a mandatory header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        if header.is_empty() || header.iter().all(String::is_empty) {
            return Err(Error::Shape("missing header row".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self { header, rows })
    }

    /// Splits into active and supplementary parts by column name.
    pub fn split(&self, sup_cols: &[String]) -> Result<(CategoricalDataset, SupplementaryData)> {
        let width = self.header.len();
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Shape(format!(
                    "row {} has {} cells, header has {width}",
                    i + 1,
                    row.len()
                )));
            }
        }
        let mut sup_idx = Vec::with_capacity(sup_cols.len());
        for name in sup_cols {
            let idx = self
                .header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Shape(format!("no column named {name:?}")))?;
            sup_idx.push(idx);
        }
        let act_idx: Vec<usize> = (0..width).filter(|c| !sup_idx.contains(c)).collect();
        if act_idx.is_empty() {
            return Err(Error::Shape("no active variables left".into()));
        }
        let pick = |idx: &[usize]| -> (Vec<String>, Vec<Vec<String>>) {
            let names = idx.iter().map(|&c| self.header[c].clone()).collect();
            let rows = self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&c| r[c].clone()).collect())
                .collect();
            (names, rows)
        };
        let (an, ar) = pick(&act_idx);
        let (sn, sr) = pick(&sup_idx);
        Ok((
            CategoricalDataset::encode(an, &ar)?,
            SupplementaryData::encode(sn, &sr)?,
        ))
    }
}
