//! Alternating least squares for multiple-set cluster correspondence
//! analysis, its objective evaluators, and the constrained-MCA variants.
//!
//! Notation used in comments: N observations, m active variables, H
//! supplementary variables, Q categories, K clusters in total, p dimensions.
//! Z^H is the indicator Z stacked H times and U the block-diagonal cluster
//! indicator, so the objective is `(1/NHm) Σ_j ‖U G − Z_j^H B_j‖²`.

mod als;
mod constrained;

pub use als::{
    fit_cluster_ca, fit_fixed_assignment, fit_mscca, run_start, AlsRun, Iterate, MsccaSolution,
    SolverOptions, StartOutcome,
};
pub use constrained::{fit_constrained_mca, ConstrainedFit, ConstraintSpec};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

use crate::data::{ClusterSpec, HierarchicalAssignment, IndicatorView, SupplementaryData};
use crate::error::{Error, Result};
use crate::numerics::sym_eig_top;

/// Evaluates `(1/NHm) Σ_j ‖U G − Z_j^H B_j‖²` term by term.
pub fn objective_phi(
    u: &HierarchicalAssignment,
    centers: &DMatrix<f64>,
    quant: &DMatrix<f64>,
    view: &IndicatorView<'_>,
) -> f64 {
    let ds = view.dataset();
    let p = quant.ncols();
    let mut total = 0.0;
    for h in 0..u.n_sup() {
        for i in 0..u.n_obs() {
            let g = u.column(h, i);
            for j in 0..ds.n_vars() {
                let b = ds.indicator_column(i, j);
                for d in 0..p {
                    let diff = centers[(g, d)] - quant[(b, d)];
                    total += diff * diff;
                }
            }
        }
    }
    total / (u.n_obs() * u.n_sup() * ds.n_vars()) as f64
}

/// Evaluates `ψ = tr B'Z^H' J U (U'U)⁻¹ U' J Z^H B`.
pub fn psi_value(
    u: &HierarchicalAssignment,
    quant: &DMatrix<f64>,
    view: &IndicatorView<'_>,
) -> Result<f64> {
    let scores = view.centered_scores(quant);
    let p = quant.ncols();
    let mut sums = DMatrix::<f64>::zeros(u.n_clusters(), p);
    let sizes = u.cluster_sizes();
    if let Some(c) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::EmptyCluster { cluster: c });
    }
    for h in 0..u.n_sup() {
        for i in 0..u.n_obs() {
            let c = u.column(h, i);
            for d in 0..p {
                sums[(c, d)] += scores[(i, d)];
            }
        }
    }
    Ok(sums
        .row_iter()
        .zip(&sizes)
        .map(|(row, &n)| row.norm_squared() / n as f64)
        .sum())
}

/// Random start: every cluster gets one distinct member of its class, the
/// remaining members are spread uniformly over the class's clusters.
pub fn init_random<R: Rng + ?Sized>(
    sup: &SupplementaryData,
    spec: &ClusterSpec,
    rng: &mut R,
) -> Result<HierarchicalAssignment> {
    spec.validate(sup)?;
    let mut clusters = vec![vec![0usize; sup.n_obs()]; sup.n_sup()];
    for (h, row) in clusters.iter_mut().enumerate() {
        for s in 0..sup.n_classes(h) {
            let members = sup.members(h, s);
            let k = spec.count(h, s);
            if k == 1 {
                continue;
            }
            let seeded = sample(rng, members.len(), k).into_vec();
            let mut fixed = vec![false; members.len()];
            for (cluster, &idx) in seeded.iter().enumerate() {
                row[members[idx]] = cluster;
                fixed[idx] = true;
            }
            for (idx, &i) in members.iter().enumerate() {
                if !fixed[idx] {
                    row[i] = rng.random_range(0..k);
                }
            }
        }
    }
    HierarchicalAssignment::from_parts(sup, spec, clusters)
}

/// Result of the quantification step.
#[derive(Debug, Clone)]
pub struct QuantUpdate {
    /// B (Q×p), normalized so that `(1/NHm) B' D B = I`.
    pub quantifications: DMatrix<f64>,
    /// Top-p eigenvalues of the target matrix.
    pub eigenvalues: DVector<f64>,
}

/// U'·J·Z^H (K×Q), built from cluster category counts.
fn cluster_deviation_sums(
    u: &HierarchicalAssignment,
    view: &IndicatorView<'_>,
) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let ds = view.dataset();
    let sizes = u.cluster_sizes();
    if let Some(c) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::EmptyCluster { cluster: c });
    }
    let mut a = DMatrix::<f64>::zeros(u.n_clusters(), view.total_categories());
    for h in 0..u.n_sup() {
        for i in 0..u.n_obs() {
            let c = u.column(h, i);
            for j in 0..ds.n_vars() {
                a[(c, ds.indicator_column(i, j))] += 1.0;
            }
        }
    }
    let means = view.column_means();
    for (c, &n) in sizes.iter().enumerate() {
        for (col, mean) in means.iter().enumerate() {
            a[(c, col)] -= n as f64 * mean;
        }
    }
    Ok((a, sizes))
}

/// Step 2: optimal B for fixed U from the top-p eigenvectors of
/// `(1/m) D^{-1/2} Z^H' J U(U'U)⁻¹U' J Z^H D^{-1/2}`.
pub fn update_b(
    u: &HierarchicalAssignment,
    view: &IndicatorView<'_>,
    dims: usize,
) -> Result<QuantUpdate> {
    let (mut a, sizes) = cluster_deviation_sums(u, view)?;
    let masses = view.masses();
    let m = view.n_vars() as f64;
    for (c, &n) in sizes.iter().enumerate() {
        a.row_mut(c).scale_mut(1.0 / (n as f64).sqrt());
    }
    for (col, mass) in masses.iter().enumerate() {
        a.column_mut(col).scale_mut(1.0 / mass.sqrt());
    }
    let target = (a.transpose() * &a) / m;
    let eig = sym_eig_top(&target, dims)?;
    Ok(QuantUpdate {
        quantifications: quantifications_from_basis(
            &eig.vectors,
            &masses,
            u.n_obs() * u.n_sup(),
            view.n_vars(),
        ),
        eigenvalues: eig.values,
    })
}

/// `B = √(rows·m) D^{-1/2} B*`.
pub(crate) fn quantifications_from_basis(
    basis: &DMatrix<f64>,
    masses: &DVector<f64>,
    rows: usize,
    n_vars: usize,
) -> DMatrix<f64> {
    let factor = ((rows * n_vars) as f64).sqrt();
    let mut b = basis * factor;
    for (r, mass) in masses.iter().enumerate() {
        b.row_mut(r).scale_mut(1.0 / mass.sqrt());
    }
    b
}

/// Object scores `F = (1/m) J Z B` (N×p), one replicate block.
pub fn object_scores(view: &IndicatorView<'_>, quant: &DMatrix<f64>) -> DMatrix<f64> {
    view.centered_scores(quant) / view.n_vars() as f64
}

/// Step 3: cluster means of the object scores.
pub fn update_g(
    u: &HierarchicalAssignment,
    view: &IndicatorView<'_>,
    quant: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let scores = object_scores(view, quant);
    cluster_means(u, &scores)
}

pub(crate) fn cluster_means(
    u: &HierarchicalAssignment,
    scores: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let p = scores.ncols();
    let sizes = u.cluster_sizes();
    if let Some(c) = sizes.iter().position(|&n| n == 0) {
        return Err(Error::EmptyCluster { cluster: c });
    }
    let mut g = DMatrix::<f64>::zeros(u.n_clusters(), p);
    for h in 0..u.n_sup() {
        for i in 0..u.n_obs() {
            let c = u.column(h, i);
            for d in 0..p {
                g[(c, d)] += scores[(i, d)];
            }
        }
    }
    for (c, &n) in sizes.iter().enumerate() {
        g.row_mut(c).scale_mut(1.0 / n as f64);
    }
    Ok(g)
}

fn sq_dist(scores: &DMatrix<f64>, i: usize, centers: &DMatrix<f64>, c: usize) -> f64 {
    (0..scores.ncols())
        .map(|d| {
            let x = scores[(i, d)] - centers[(c, d)];
            x * x
        })
        .sum()
}

/// Step 4: nearest center inside the observation's class, lowest index on
/// ties. May leave clusters empty.
pub fn update_u(
    scores: &DMatrix<f64>,
    centers: &DMatrix<f64>,
    sup: &SupplementaryData,
    spec: &ClusterSpec,
) -> Result<HierarchicalAssignment> {
    if centers.nrows() != spec.total() || centers.ncols() != scores.ncols() {
        return Err(Error::Shape(format!(
            "centers are {}x{}, expected {}x{}",
            centers.nrows(),
            centers.ncols(),
            spec.total(),
            scores.ncols()
        )));
    }
    let mut clusters = vec![vec![0usize; sup.n_obs()]; sup.n_sup()];
    let mut offset = 0;
    for (h, row) in clusters.iter_mut().enumerate() {
        let class_offsets: Vec<usize> = spec.counts()[h]
            .iter()
            .map(|&k| {
                let o = offset;
                offset += k;
                o
            })
            .collect();
        for (i, slot) in row.iter_mut().enumerate() {
            let s = sup.class(h, i);
            let base = class_offsets[s];
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for k in 0..spec.count(h, s) {
                let d = sq_dist(scores, i, centers, base + k);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            *slot = best;
        }
    }
    HierarchicalAssignment::from_parts(sup, spec, clusters)
}

/// Fills empty clusters: each receives the class member farthest from its
/// current center, taken only from clusters that keep at least one member.
pub fn repair_empty_clusters(
    u: &HierarchicalAssignment,
    scores: &DMatrix<f64>,
    centers: &DMatrix<f64>,
) -> Result<HierarchicalAssignment> {
    let mut out = u.clone();
    let keys = u.keys();
    let mut sizes = out.cluster_sizes();
    while let Some(empty) = sizes.iter().position(|&n| n == 0) {
        let key = keys[empty];
        let mut donor: Option<(usize, f64)> = None;
        for i in 0..out.n_obs() {
            if out.class(key.h, i) != key.s {
                continue;
            }
            let c = out.column(key.h, i);
            if sizes[c] < 2 {
                continue;
            }
            let d = sq_dist(scores, i, centers, c);
            if donor.is_none_or(|(_, best)| d > best) {
                donor = Some((i, d));
            }
        }
        let (i, _) = donor.ok_or_else(|| {
            Error::Spec(format!(
                "class {} of variable {} is too small for its clusters",
                key.s, key.h
            ))
        })?;
        sizes[out.column(key.h, i)] -= 1;
        out.set_cluster(key.h, i, key.k);
        sizes[empty] += 1;
    }
    Ok(out)
}
