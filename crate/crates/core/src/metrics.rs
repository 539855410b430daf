//! Partition agreement (adjusted Rand index), configuration congruence
//! (goodness of fit) and the Krzanowski–Lai cluster-count criterion.

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biplot::BiplotModel;
use crate::data::{
    stacked_indicators, CategoricalDataset, HierarchicalAssignment, IndicatorView,
    SupplementaryData,
};
use crate::error::{Error, Result};
use crate::solver::{fit_cluster_ca, update_g, MsccaSolution, SolverOptions};

fn pairs(n: f64) -> f64 {
    n * (n - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index of two partitions given as label
/// sequences. Labels are arbitrary; only co-membership matters.
pub fn adjusted_rand_index<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "partitions of {} and {} elements",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::Shape("need at least two elements".into()));
    }
    let mut cells: HashMap<(&A, &B), usize> = HashMap::new();
    let mut rows: HashMap<&A, usize> = HashMap::new();
    let mut cols: HashMap<&B, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&n| pairs(n as f64)).sum();
    let sum_a: f64 = rows.values().map(|&n| pairs(n as f64)).sum();
    let sum_b: f64 = cols.values().map(|&n| pairs(n as f64)).sum();
    let expected = sum_a * sum_b / pairs(a.len() as f64);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        // Both partitions are all-singletons or both a single block.
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Squared cosine between two configurations: `tr²(Y'H) / (tr(Y'Y) tr(H'H))`.
pub fn goodness_of_fit(y: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<f64> {
    if y.shape() != h.shape() {
        return Err(Error::Shape(format!(
            "configurations are {:?} and {:?}",
            y.shape(),
            h.shape()
        )));
    }
    let yy = y.norm_squared();
    let hh = h.norm_squared();
    if !(yy > 0.0) || !(hh > 0.0) {
        return Err(Error::DegenerateGeometry("all-zero configuration".into()));
    }
    let yh = y.dot(h);
    Ok((yh * yh / (yy * hh)).min(1.0))
}

/// GF between the standardized residuals of the true cluster table and the
/// solution's reconstruction of that table.
///
/// Rows follow the true assignment: its centers are recomputed from the
/// solution's quantifications B, so the comparison does not depend on how
/// fitted clusters are matched to true ones.
pub fn gf_against_truth(
    sol: &MsccaSolution,
    truth: &HierarchicalAssignment,
    view: &IndicatorView<'_>,
) -> Result<f64> {
    if sol.quantifications.nrows() != view.total_categories() {
        return Err(Error::Shape(format!(
            "B has {} rows for {} categories",
            sol.quantifications.nrows(),
            view.total_categories()
        )));
    }
    if truth.n_obs() != view.n_obs() || truth.n_sup() != view.n_sup() {
        return Err(Error::Shape(format!(
            "true assignment covers {}x{} (N x H), view is {}x{}",
            truth.n_obs(),
            truth.n_sup(),
            view.n_obs(),
            view.n_sup()
        )));
    }
    let mut model = BiplotModel::from_table(
        truth_table(truth, view),
        vec![String::new(); truth.n_clusters()],
        vec![String::new(); view.total_categories()],
    )?
    .standardized_residuals()?;
    let centers = update_g(truth, view, &sol.quantifications)?;
    model = model.biplot_coordinates(&centers, &sol.quantifications)?;
    let y = model.residuals.as_ref().expect("residuals computed");
    let h = model.inner_products().expect("coordinates computed");
    goodness_of_fit(y, &h)
}

fn truth_table(u: &HierarchicalAssignment, view: &IndicatorView<'_>) -> DMatrix<f64> {
    let ds = view.dataset();
    let mut counts = DMatrix::<f64>::zeros(u.n_clusters(), view.total_categories());
    for h in 0..u.n_sup() {
        for i in 0..u.n_obs() {
            let c = u.column(h, i);
            for j in 0..ds.n_vars() {
                counts[(c, ds.indicator_column(i, j))] += 1.0;
            }
        }
    }
    counts
}

/// Within-cluster dispersion against consecutive cluster counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlCurve {
    pub k_values: Vec<usize>,
    pub w_values: Vec<f64>,
    /// Exponent base: DIFF uses `K^{2/nu}`.
    pub nu: f64,
}

/// Chosen K with the index value at every interior K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSelection {
    pub k: usize,
    /// (K, KL(K)) for each interior K of the curve.
    pub index: Vec<(usize, f64)>,
}

/// Picks the interior K maximizing `|DIFF(K)| / |DIFF(K+1)|` with
/// `DIFF(K) = (K−1)^{2/ν} W_{K−1} − K^{2/ν} W_K`; ties go to the smaller K.
pub fn kl_select(curve: &KlCurve) -> Result<KlSelection> {
    let n = curve.k_values.len();
    if n != curve.w_values.len() {
        return Err(Error::Shape(format!(
            "{} cluster counts with {} dispersions",
            n,
            curve.w_values.len()
        )));
    }
    if n < 4 {
        return Err(Error::Spec(format!(
            "KL index needs at least 4 cluster counts, got {n}"
        )));
    }
    if curve.k_values.windows(2).any(|w| w[1] != w[0] + 1) || curve.k_values[0] == 0 {
        return Err(Error::Spec(
            "cluster counts must be consecutive and positive".into(),
        ));
    }
    if curve.w_values.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Spec(
            "dispersions must be finite and nonnegative".into(),
        ));
    }
    if !(curve.nu > 0.0) {
        return Err(Error::Spec(format!(
            "nu must be positive, got {}",
            curve.nu
        )));
    }
    let e = 2.0 / curve.nu;
    let penalized = |t: usize| (curve.k_values[t] as f64).powf(e) * curve.w_values[t];
    // diff[t] is DIFF at k_values[t], defined for t >= 1.
    let diff: Vec<f64> = (1..n).map(|t| penalized(t - 1) - penalized(t)).collect();
    let mut index = Vec::with_capacity(n - 2);
    for t in 1..n - 1 {
        let num = diff[t - 1].abs();
        let den = diff[t].abs();
        let kl = if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        index.push((curve.k_values[t], kl));
    }
    let mut best = 0;
    for (t, (_, kl)) in index.iter().enumerate() {
        if *kl > index[best].1 {
            best = t;
        }
    }
    Ok(KlSelection {
        k: index[best].0,
        index,
    })
}

/// Which exponent base the KL index uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KlExponent {
    /// The solution dimensionality p.
    #[default]
    Dims,
    /// The number of active variables m.
    Vars,
}

/// KL curve and choice for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassKChoice {
    pub h: usize,
    pub s: usize,
    pub class_label: String,
    pub curve: KlCurve,
    pub selection: KlSelection,
}

/// W_K = N_s·m·φ*(K) for K = 1..=k_max over the members of one class.
pub fn class_kl_curve(
    class_data: &CategoricalDataset,
    k_max: usize,
    options: &SolverOptions,
    exponent: KlExponent,
) -> Result<KlCurve> {
    let n = class_data.n_obs();
    let m = class_data.n_vars();
    let rank = class_data.total_categories().saturating_sub(m);
    if rank == 0 {
        return Err(Error::Spec("class data has no variation".into()));
    }
    let dims = options.dims.min(rank);
    let k_max = k_max.min(n);
    if k_max < 4 {
        return Err(Error::Spec(format!(
            "KL index needs K up to at least 4; class of {n} allows {k_max}"
        )));
    }
    let opts = SolverOptions {
        dims,
        ..options.clone()
    };
    // One cluster leaves ψ = 0, so φ equals the dimensionality.
    let mut w = vec![(n * m * dims) as f64];
    let fitted: Vec<Result<f64>> = (2..=k_max)
        .into_par_iter()
        .map(|k| fit_cluster_ca(class_data, k, &opts).map(|s| (n * m) as f64 * s.objective))
        .collect();
    for value in fitted {
        w.push(value?);
    }
    let nu = match exponent {
        KlExponent::Dims => dims as f64,
        KlExponent::Vars => m as f64,
    };
    Ok(KlCurve {
        k_values: (1..=k_max).collect(),
        w_values: w,
        nu,
    })
}

/// Runs cluster CA on every class's members and picks its cluster count by
/// the KL index. Result is indexed `[h][s]`.
pub fn select_class_counts(
    data: &CategoricalDataset,
    sup: &SupplementaryData,
    k_max: usize,
    options: &SolverOptions,
    exponent: KlExponent,
) -> Result<Vec<Vec<ClassKChoice>>> {
    let mut out = Vec::with_capacity(sup.n_sup());
    for h in 0..sup.n_sup() {
        let mut row = Vec::with_capacity(sup.n_classes(h));
        for s in 0..sup.n_classes(h) {
            let class_data = data.subset(&sup.members(h, s))?;
            let curve = class_kl_curve(&class_data, k_max, options, exponent)?;
            let selection = kl_select(&curve)?;
            row.push(ClassKChoice {
                h,
                s,
                class_label: sup.labels(h)[s].clone(),
                curve,
                selection,
            });
        }
        out.push(row);
    }
    Ok(out)
}

/// Per-class ARI between fitted clusters and a global true partition
/// restricted to the class. Indexed `[h][s]`.
pub fn class_ari(
    fitted: &HierarchicalAssignment,
    sup: &SupplementaryData,
    truth: &[usize],
) -> Result<Vec<Vec<f64>>> {
    if truth.len() != fitted.n_obs() {
        return Err(Error::Shape(format!(
            "{} true labels for {} observations",
            truth.len(),
            fitted.n_obs()
        )));
    }
    (0..sup.n_sup())
        .map(|h| {
            (0..sup.n_classes(h))
                .map(|s| {
                    let members = sup.members(h, s);
                    let a: Vec<usize> = members.iter().map(|&i| fitted.cluster(h, i)).collect();
                    let b: Vec<usize> = members.iter().map(|&i| truth[i]).collect();
                    adjusted_rand_index(&a, &b)
                })
                .collect()
        })
        .collect()
}

/// Assignment whose clusters in each class are the true clusters present
/// there, ordered by global label.
pub fn truth_assignment(
    sup: &SupplementaryData,
    truth: &[usize],
) -> Result<HierarchicalAssignment> {
    if truth.len() != sup.n_obs() {
        return Err(Error::Shape(format!(
            "{} true labels for {} observations",
            truth.len(),
            sup.n_obs()
        )));
    }
    let mut present: Vec<Vec<Vec<usize>>> = (0..sup.n_sup())
        .map(|h| vec![Vec::new(); sup.n_classes(h)])
        .collect();
    for (h, classes) in present.iter_mut().enumerate() {
        for (i, &t) in truth.iter().enumerate() {
            classes[sup.class(h, i)].push(t);
        }
        for labels in classes.iter_mut() {
            labels.sort_unstable();
            labels.dedup();
        }
    }
    let counts = present
        .iter()
        .map(|classes| classes.iter().map(Vec::len).collect())
        .collect();
    let spec = crate::data::ClusterSpec::new(counts);
    HierarchicalAssignment::build(sup, &spec, |h, i| {
        let labels = &present[h][sup.class(h, i)];
        labels
            .binary_search(&truth[i])
            .expect("label present in class")
    })
}

/// GF of a solution against a global true partition.
pub fn gf_against_partition(
    sol: &MsccaSolution,
    data: &CategoricalDataset,
    sup: &SupplementaryData,
    truth: &[usize],
) -> Result<f64> {
    let u = truth_assignment(sup, truth)?;
    let view = stacked_indicators(data, sup.n_sup())?;
    gf_against_truth(sol, &u, &view)
}
