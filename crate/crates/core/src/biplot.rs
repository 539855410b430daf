//! Cluster-by-category contingency tables, standardized residuals and biplot
//! coordinates.
//!
//! For a fixed assignment the solver's (G, B) is the rank-p correspondence
//! analysis of the table `P = U'Z^H / (NHm)`: the inner products of
//! `D_r^{1/2} G` and `D_c^{1/2} B` approximate the standardized residuals
//! `D_r^{-1/2} (P − r c') D_c^{-1/2}` as well as any rank-p matrix can.

use nalgebra::{DMatrix, DVector};

use crate::data::{
    CategoricalDataset, ClusterKey, ClusterSpec, HierarchicalAssignment, IndicatorView,
    SupplementaryData,
};
use crate::error::{Error, Result};
use crate::solver::MsccaSolution;

/// A scaled contingency table and, stage by stage, its residuals and biplot
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BiplotModel {
    /// P, rows are clusters (or classes), columns are categories; sums to 1.
    pub table: DMatrix<f64>,
    pub row_masses: DVector<f64>,
    pub col_masses: DVector<f64>,
    pub residuals: Option<DMatrix<f64>>,
    pub row_coords: Option<DMatrix<f64>>,
    pub col_coords: Option<DMatrix<f64>>,
    /// Spread factor applied to the row points (1 until rescaled).
    pub gamma: f64,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Member count of each row.
    pub row_sizes: Vec<usize>,
    /// Two-level position of each row; empty for free-standing tables.
    pub row_keys: Vec<ClusterKey>,
}

impl BiplotModel {
    /// Wraps an arbitrary nonnegative table, rescaled to unit total.
    pub fn from_table(
        table: DMatrix<f64>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self> {
        if row_labels.len() != table.nrows() || col_labels.len() != table.ncols() {
            return Err(Error::Shape(format!(
                "{}x{} table with {} row and {} column labels",
                table.nrows(),
                table.ncols(),
                row_labels.len(),
                col_labels.len()
            )));
        }
        let total = table.sum();
        if !(total > 0.0) || table.iter().any(|x| *x < 0.0) {
            return Err(Error::Mass(
                "table must be nonnegative with positive total".into(),
            ));
        }
        let table = table / total;
        let row_masses = DVector::from_iterator(table.nrows(), table.row_iter().map(|r| r.sum()));
        let col_masses =
            DVector::from_iterator(table.ncols(), table.column_iter().map(|c| c.sum()));
        let rows = table.nrows();
        Ok(Self {
            table,
            row_masses,
            col_masses,
            residuals: None,
            row_coords: None,
            col_coords: None,
            gamma: 1.0,
            row_labels,
            col_labels,
            row_sizes: vec![0; rows],
            row_keys: Vec::new(),
        })
    }

    /// `P = U'Z^H / (NHm)` with rows labeled by class and within-class size
    /// rank ("Male1" is the largest male cluster).
    pub fn contingency(
        u: &HierarchicalAssignment,
        view: &IndicatorView<'_>,
        sup: &SupplementaryData,
    ) -> Result<Self> {
        Self::build(u, view, sup, true)
    }

    /// `P = V'Z^H / (NHm)`: one row per class.
    pub fn class_contingency(view: &IndicatorView<'_>, sup: &SupplementaryData) -> Result<Self> {
        let spec = ClusterSpec::uniform(sup, 1);
        let v = HierarchicalAssignment::build(sup, &spec, |_, _| 0)?;
        Self::build(&v, view, sup, false)
    }

    fn build(
        u: &HierarchicalAssignment,
        view: &IndicatorView<'_>,
        sup: &SupplementaryData,
        ranked: bool,
    ) -> Result<Self> {
        let ds = view.dataset();
        if u.n_obs() != ds.n_obs() || u.n_sup() != view.n_sup() {
            return Err(Error::Shape(format!(
                "assignment covers {}x{} (N x H), view is {}x{}",
                u.n_obs(),
                u.n_sup(),
                ds.n_obs(),
                view.n_sup()
            )));
        }
        let sizes = u.cluster_sizes();
        if let Some(c) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::EmptyCluster { cluster: c });
        }
        let mut counts = DMatrix::<f64>::zeros(u.n_clusters(), view.total_categories());
        for h in 0..u.n_sup() {
            for i in 0..u.n_obs() {
                let c = u.column(h, i);
                for j in 0..ds.n_vars() {
                    counts[(c, ds.indicator_column(i, j))] += 1.0;
                }
            }
        }
        let keys = u.keys();
        let ranks = size_ranks(&keys, &sizes);
        let row_labels = keys
            .iter()
            .zip(&ranks)
            .map(|(key, rank)| {
                let class = &sup.labels(key.h)[key.s];
                if ranked {
                    format!("{class}{rank}")
                } else {
                    class.clone()
                }
            })
            .collect();
        let mut model = Self::from_table(counts, row_labels, category_labels(ds))?;
        model.row_sizes = sizes;
        model.row_keys = keys;
        Ok(model)
    }

    /// Adds `P̃ = D_r^{-1/2} (P − r c') D_c^{-1/2}`.
    pub fn standardized_residuals(mut self) -> Result<Self> {
        if let Some(i) = self.row_masses.iter().position(|x| !(*x > 0.0)) {
            return Err(Error::Mass(format!(
                "row {} has zero mass",
                self.row_labels[i]
            )));
        }
        if let Some(i) = self.col_masses.iter().position(|x| !(*x > 0.0)) {
            return Err(Error::Mass(format!(
                "column {} has zero mass",
                self.col_labels[i]
            )));
        }
        let r = &self.row_masses;
        let c = &self.col_masses;
        let res = DMatrix::from_fn(self.table.nrows(), self.table.ncols(), |i, j| {
            (self.table[(i, j)] - r[i] * c[j]) / (r[i] * c[j]).sqrt()
        });
        self.residuals = Some(res);
        Ok(self)
    }

    /// Row points `D_r^{1/2} G` and column points `D_c^{1/2} B`.
    pub fn biplot_coordinates(
        mut self,
        centers: &DMatrix<f64>,
        quant: &DMatrix<f64>,
    ) -> Result<Self> {
        if centers.nrows() != self.table.nrows()
            || quant.nrows() != self.table.ncols()
            || centers.ncols() != quant.ncols()
        {
            return Err(Error::Shape(format!(
                "G is {}x{}, B is {}x{}, table is {}x{}",
                centers.nrows(),
                centers.ncols(),
                quant.nrows(),
                quant.ncols(),
                self.table.nrows(),
                self.table.ncols()
            )));
        }
        let mut rows = centers.clone();
        for (i, r) in self.row_masses.iter().enumerate() {
            rows.row_mut(i).scale_mut(r.sqrt());
        }
        let mut cols = quant.clone();
        for (j, c) in self.col_masses.iter().enumerate() {
            cols.row_mut(j).scale_mut(c.sqrt());
        }
        self.row_coords = Some(rows);
        self.col_coords = Some(cols);
        Ok(self)
    }

    /// Balances the average squared distance to the origin of row and
    /// column points, leaving all inner products unchanged.
    pub fn rescale_spread(mut self) -> Result<Self> {
        let (rows, cols) = match (&self.row_coords, &self.col_coords) {
            (Some(r), Some(c)) => (r, c),
            _ => {
                return Err(Error::DegenerateGeometry(
                    "no coordinates to rescale".into(),
                ))
            }
        };
        let row_spread = mean_sq_norm(rows);
        let col_spread = mean_sq_norm(cols);
        if !(row_spread > 0.0) || !(col_spread > 0.0) {
            return Err(Error::DegenerateGeometry(
                "all points on one side sit at the origin".into(),
            ));
        }
        let gamma = (col_spread / row_spread).powf(0.25);
        self.row_coords = Some(rows * gamma);
        self.col_coords = Some(cols / gamma);
        self.gamma *= gamma;
        Ok(self)
    }

    /// Row points times column points transposed.
    pub fn inner_products(&self) -> Option<DMatrix<f64>> {
        Some(self.row_coords.as_ref()? * self.col_coords.as_ref()?.transpose())
    }

    /// Rows sorted by variable, class, then decreasing size.
    pub fn display_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.table.nrows()).collect();
        if self.row_keys.is_empty() {
            return order;
        }
        order.sort_by_key(|&r| {
            let k = self.row_keys[r];
            (k.h, k.s, std::cmp::Reverse(self.row_sizes[r]), k.k)
        });
        order
    }
}

pub(crate) fn mean_sq_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.norm_squared() / m.nrows() as f64
}

/// 1-based rank of each cluster by size within its class (ties by index).
fn size_ranks(keys: &[ClusterKey], sizes: &[usize]) -> Vec<usize> {
    keys.iter()
        .enumerate()
        .map(|(c, key)| {
            1 + keys
                .iter()
                .enumerate()
                .filter(|(d, other)| {
                    other.h == key.h
                        && other.s == key.s
                        && (sizes[*d] > sizes[c] || (sizes[*d] == sizes[c] && *d < c))
                })
                .count()
        })
        .collect()
}

/// "Variable:category" for every indicator column.
pub fn category_labels(ds: &CategoricalDataset) -> Vec<String> {
    (0..ds.n_vars())
        .flat_map(|j| {
            ds.labels(j)
                .iter()
                .map(move |l| format!("{}:{l}", ds.names()[j]))
        })
        .collect()
}

/// Biplot model for a fitted solution: table, residuals and coordinates.
pub fn solution_biplot(
    sol: &MsccaSolution,
    view: &IndicatorView<'_>,
    sup: &SupplementaryData,
) -> Result<BiplotModel> {
    BiplotModel::contingency(&sol.assignment, view, sup)?
        .standardized_residuals()?
        .biplot_coordinates(&sol.centers, &sol.quantifications)
}

/// One cell of a residual heat map.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRecord {
    pub method: &'static str,
    pub row: String,
    pub class: String,
    pub column: String,
    pub value: f64,
}

/// Class-level (averaging) and cluster-level residual tables side by side.
#[derive(Debug, Clone)]
pub struct ResidualComparison {
    pub averaging: BiplotModel,
    pub mscca: BiplotModel,
    /// Averaging row holding each cluster row's class.
    pub class_row_of: Vec<usize>,
}

impl ResidualComparison {
    /// Long-format records, averaging rows first, clusters in display order.
    pub fn records(&self) -> Vec<ResidualRecord> {
        let mut out = Vec::new();
        let push = |out: &mut Vec<ResidualRecord>,
                    method,
                    model: &BiplotModel,
                    row: usize,
                    class: &str| {
            let res = model.residuals.as_ref().expect("residuals computed");
            for (j, col) in model.col_labels.iter().enumerate() {
                out.push(ResidualRecord {
                    method,
                    row: model.row_labels[row].clone(),
                    class: class.to_string(),
                    column: col.clone(),
                    value: res[(row, j)],
                });
            }
        };
        for r in 0..self.averaging.table.nrows() {
            let class = self.averaging.row_labels[r].clone();
            push(&mut out, "averaging", &self.averaging, r, &class);
        }
        for r in self.mscca.display_order() {
            let class = self.averaging.row_labels[self.class_row_of[r]].clone();
            push(&mut out, "mscca", &self.mscca, r, &class);
        }
        out
    }
}

/// Residual tables of the averaging approach and of the fitted clusters,
/// both scaled by 1/(NHm).
pub fn residual_comparison(
    data: &CategoricalDataset,
    sup: &SupplementaryData,
    sol: &MsccaSolution,
) -> Result<ResidualComparison> {
    let view = crate::data::stacked_indicators(data, sup.n_sup())?;
    let averaging = BiplotModel::class_contingency(&view, sup)?.standardized_residuals()?;
    let mscca = BiplotModel::contingency(&sol.assignment, &view, sup)?.standardized_residuals()?;
    let mut class_offsets = Vec::with_capacity(sup.n_sup());
    let mut acc = 0;
    for h in 0..sup.n_sup() {
        class_offsets.push(acc);
        acc += sup.n_classes(h);
    }
    let class_row_of = mscca
        .row_keys
        .iter()
        .map(|k| class_offsets[k.h] + k.s)
        .collect();
    Ok(ResidualComparison {
        averaging,
        mscca,
        class_row_of,
    })
}
