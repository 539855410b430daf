//! MCA with linear row constraints `min (1/(n m)) Σ_j ‖C F − Z_j B_j‖²`,
//! where C is an orthogonal projector built from external information.

use nalgebra::{DMatrix, DVector};

use super::quantifications_from_basis;
use crate::data::{
    stacked_indicators, CategoricalDataset, HierarchicalAssignment, SupplementaryData,
};
use crate::error::{Error, Result};
use crate::numerics::sym_eig_top;

/// Which row constraint C to impose.
#[derive(Debug, Clone, Copy)]
pub enum ConstraintSpec<'a> {
    /// C = I: plain MCA.
    Identity,
    /// C = V(V'V)⁻¹V': every class represented by its mean (averaging).
    Averaging(&'a SupplementaryData),
    /// C = I − V(V'V)⁻¹V': class means removed.
    Removal(&'a SupplementaryData),
    /// C = U(U'U)⁻¹U' for a fixed cluster assignment.
    Membership(&'a HierarchicalAssignment),
}

impl ConstraintSpec<'_> {
    fn n_blocks(&self) -> usize {
        match self {
            ConstraintSpec::Identity => 1,
            ConstraintSpec::Averaging(s) | ConstraintSpec::Removal(s) => s.n_sup(),
            ConstraintSpec::Membership(u) => u.n_sup(),
        }
    }

    fn n_obs(&self) -> Option<usize> {
        match self {
            ConstraintSpec::Identity => None,
            ConstraintSpec::Averaging(s) | ConstraintSpec::Removal(s) => Some(s.n_obs()),
            ConstraintSpec::Membership(u) => Some(u.n_obs()),
        }
    }

    /// Group label of observation `i` within replicate block `h`, and the
    /// number of groups in that block.
    fn groups(&self, h: usize) -> Option<(Vec<usize>, usize)> {
        match self {
            ConstraintSpec::Identity => None,
            ConstraintSpec::Averaging(s) | ConstraintSpec::Removal(s) => {
                Some((s.column(h).to_vec(), s.n_classes(h)))
            }
            ConstraintSpec::Membership(u) => {
                let off = u.block_offset(h);
                let labels = (0..u.n_obs()).map(|i| u.column(h, i) - off).collect();
                Some((labels, u.spec().per_variable(h)))
            }
        }
    }
}

/// Solution of a row-constrained MCA.
#[derive(Debug, Clone)]
pub struct ConstrainedFit {
    /// C·F, one row per stacked observation (n_blocks·N × p).
    pub row_scores: DMatrix<f64>,
    /// B (Q×p).
    pub quantifications: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub objective: f64,
    pub n_blocks: usize,
}

impl ConstrainedFit {
    /// Scores of replicate block `h` (N×p).
    pub fn block_scores(&self, h: usize) -> DMatrix<f64> {
        let n = self.row_scores.nrows() / self.n_blocks;
        self.row_scores.rows(h * n, n).into_owned()
    }
}

/// Replaces each row by its group mean (`project == true`) or subtracts it.
fn apply_group_projector(
    x: &mut DMatrix<f64>,
    labels: &[usize],
    n_groups: usize,
    project: bool,
) -> Result<()> {
    let mut sums = DMatrix::<f64>::zeros(n_groups, x.ncols());
    let mut sizes = vec![0usize; n_groups];
    for (i, &g) in labels.iter().enumerate() {
        sizes[g] += 1;
        let row = x.row(i).into_owned();
        let mut target = sums.row_mut(g);
        target += row;
    }
    if let Some(g) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::Projector(format!("group {g} has no members")));
    }
    for (g, &n) in sizes.iter().enumerate() {
        sums.row_mut(g).scale_mut(1.0 / n as f64);
    }
    for (i, &g) in labels.iter().enumerate() {
        let mean = sums.row(g).into_owned();
        let mut row = x.row_mut(i);
        if project {
            row.copy_from(&mean);
        } else {
            row -= mean;
        }
    }
    Ok(())
}

/// Solves the constrained MCA for `constraint` in `dims` dimensions.
pub fn fit_constrained_mca(
    data: &CategoricalDataset,
    constraint: ConstraintSpec<'_>,
    dims: usize,
) -> Result<ConstrainedFit> {
    if let Some(n) = constraint.n_obs() {
        if n != data.n_obs() {
            return Err(Error::Shape(format!(
                "constraint covers {n} observations, data has {}",
                data.n_obs()
            )));
        }
    }
    let rank = data.total_categories().saturating_sub(data.n_vars());
    if dims == 0 || dims > rank {
        return Err(Error::Spec(format!(
            "dimensionality {dims} outside 1..={rank}"
        )));
    }
    let blocks = constraint.n_blocks();
    if blocks == 0 {
        return Err(Error::Projector("no supplementary variables".into()));
    }
    let view = stacked_indicators(data, blocks)?;
    let n = data.n_obs();
    let m = data.n_vars() as f64;

    // C·J·Z^H, block by block.
    let jz = view.centered_z();
    let mut cjz = DMatrix::<f64>::zeros(n * blocks, jz.ncols());
    for h in 0..blocks {
        let mut block = jz.clone();
        match constraint {
            ConstraintSpec::Identity => {}
            ConstraintSpec::Averaging(_) | ConstraintSpec::Membership(_) => {
                let (labels, k) = constraint.groups(h).expect("grouped constraint");
                apply_group_projector(&mut block, &labels, k, true)?;
            }
            ConstraintSpec::Removal(_) => {
                let (labels, k) = constraint.groups(h).expect("grouped constraint");
                apply_group_projector(&mut block, &labels, k, false)?;
            }
        }
        cjz.rows_mut(h * n, n).copy_from(&block);
    }

    let masses = view.masses();
    let mut scaled = cjz.clone();
    for (c, mass) in masses.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 / mass.sqrt());
    }
    let target = (scaled.transpose() * &scaled) / m;
    let eig = sym_eig_top(&target, dims)?;
    let quant = quantifications_from_basis(&eig.vectors, &masses, n * blocks, data.n_vars());
    let row_scores = (&cjz * &quant) / m;

    let mut total = 0.0;
    for h in 0..blocks {
        for i in 0..n {
            let r = h * n + i;
            for j in 0..data.n_vars() {
                let b = data.indicator_column(i, j);
                for d in 0..dims {
                    let diff = row_scores[(r, d)] - quant[(b, d)];
                    total += diff * diff;
                }
            }
        }
    }
    Ok(ConstrainedFit {
        row_scores,
        quantifications: quant,
        eigenvalues: eig.values,
        objective: total / ((n * blocks) as f64 * m),
        n_blocks: blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ClusterSpec;

    fn small() -> (CategoricalDataset, SupplementaryData) {
        let act = vec![
            vec![0, 1, 2, 0, 1, 2, 0, 0],
            vec![0, 0, 1, 1, 2, 2, 0, 1],
            vec![1, 0, 1, 0, 1, 1, 0, 0],
        ];
        let labels = vec![
            vec!["a".into(), "b".into(), "c".into()],
            vec!["x".into(), "y".into(), "z".into()],
            vec!["u".into(), "v".into()],
        ];
        let ds =
            CategoricalDataset::from_codes(vec!["p".into(), "q".into(), "r".into()], act, labels)
                .unwrap();
        let sup = SupplementaryData::from_codes(
            vec!["g".into()],
            vec![vec![0, 1, 0, 1, 0, 1, 0, 1]],
            vec![vec!["m".into(), "f".into()]],
        )
        .unwrap();
        (ds, sup)
    }

    #[test]
    fn removal_scores_have_zero_class_means() {
        let (ds, sup) = small();
        let fit = fit_constrained_mca(&ds, ConstraintSpec::Removal(&sup), 2).unwrap();
        for s in 0..2 {
            let members = sup.members(0, s);
            for d in 0..2 {
                let mean: f64 = members.iter().map(|&i| fit.row_scores[(i, d)]).sum::<f64>()
                    / members.len() as f64;
                assert!(mean.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn averaging_scores_are_constant_within_class() {
        let (ds, sup) = small();
        let fit = fit_constrained_mca(&ds, ConstraintSpec::Averaging(&sup), 1).unwrap();
        let a = fit.row_scores[(0, 0)];
        for &i in &sup.members(0, 0) {
            assert!((fit.row_scores[(i, 0)] - a).abs() < 1e-12);
        }
    }

    #[test]
    fn averaging_equals_one_cluster_per_class() {
        let (ds, sup) = small();
        let spec = ClusterSpec::uniform(&sup, 1);
        let u = HierarchicalAssignment::build(&sup, &spec, |_, _| 0).unwrap();
        let a = fit_constrained_mca(&ds, ConstraintSpec::Averaging(&sup), 1).unwrap();
        let b = fit_constrained_mca(&ds, ConstraintSpec::Membership(&u), 1).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-12);
    }

    #[test]
    fn mismatched_rows_are_rejected() {
        let (ds, _) = small();
        let sup = SupplementaryData::single_class(3);
        assert!(matches!(
            fit_constrained_mca(&ds, ConstraintSpec::Averaging(&sup), 1),
            Err(Error::Shape(_))
        ));
    }
}
