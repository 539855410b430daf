use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    init_random, object_scores, objective_phi, psi_value, repair_empty_clusters, update_b,
    update_g, update_u,
};
use crate::data::{
    stacked_indicators, CategoricalDataset, ClusterSpec, HierarchicalAssignment, IndicatorView,
    SupplementaryData,
};
use crate::error::{Error, Result};
use crate::util::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Solution dimensionality p.
    pub dims: usize,
    /// Random starts; the lowest objective wins.
    pub n_starts: usize,
    /// Cap on B/G/φ evaluations per start.
    pub max_iter: usize,
    /// Stop once the objective decreases by less than this.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dims: 2,
            n_starts: 100,
            max_iter: 100,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self, data: &CategoricalDataset) -> Result<()> {
        let rank = data.total_categories().saturating_sub(data.n_vars());
        if self.dims == 0 || self.dims > rank {
            return Err(Error::Spec(format!(
                "dimensionality {} outside 1..={rank} (Q - m)",
                self.dims
            )));
        }
        if self.n_starts == 0 || self.max_iter == 0 {
            return Err(Error::Spec(
                "need at least one start and one iteration".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Spec(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Parameters after the B and G updates for one assignment.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub quantifications: DMatrix<f64>,
    pub centers: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub phi: f64,
}

/// Single-start alternating least squares, stepped by the caller.
#[derive(Debug, Clone)]
pub struct AlsRun<'v, 'a> {
    view: &'v IndicatorView<'a>,
    sup: &'v SupplementaryData,
    assignment: HierarchicalAssignment,
    dims: usize,
}

impl<'v, 'a> AlsRun<'v, 'a> {
    pub fn new(
        view: &'v IndicatorView<'a>,
        sup: &'v SupplementaryData,
        initial: HierarchicalAssignment,
        dims: usize,
    ) -> Self {
        Self {
            view,
            sup,
            assignment: initial,
            dims,
        }
    }

    pub fn assignment(&self) -> &HierarchicalAssignment {
        &self.assignment
    }

    /// B and G for the current assignment, and the resulting objective.
    pub fn fit_current(&self) -> Result<Iterate> {
        let up = update_b(&self.assignment, self.view, self.dims)?;
        let centers = update_g(&self.assignment, self.view, &up.quantifications)?;
        let phi = objective_phi(&self.assignment, &centers, &up.quantifications, self.view);
        Ok(Iterate {
            quantifications: up.quantifications,
            centers,
            eigenvalues: up.eigenvalues,
            phi,
        })
    }

    /// Reassigns to nearest centers and repairs empty clusters. Returns
    /// whether the assignment changed.
    pub fn reassign(&mut self, it: &Iterate) -> Result<bool> {
        let scores = object_scores(self.view, &it.quantifications);
        let spec = self.assignment.spec().clone();
        let next = update_u(&scores, &it.centers, self.sup, &spec)?;
        let next = repair_empty_clusters(&next, &scores, &it.centers)?;
        let changed = next != self.assignment;
        self.assignment = next;
        Ok(changed)
    }
}

/// Outcome of one random start.
#[derive(Debug, Clone)]
pub struct StartOutcome {
    pub start_index: usize,
    pub assignment: HierarchicalAssignment,
    pub last: Iterate,
    /// φ after each B/G update; non-increasing.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Runs the start with index `start_index` to convergence.
pub fn run_start(
    view: &IndicatorView<'_>,
    sup: &SupplementaryData,
    spec: &ClusterSpec,
    options: &SolverOptions,
    start_index: usize,
) -> Result<StartOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(options.seed, start_index as u64));
    let initial = init_random(sup, spec, &mut rng)?;
    let mut run = AlsRun::new(view, sup, initial, options.dims);
    let mut trace = Vec::new();
    let mut converged = false;
    loop {
        let it = run.fit_current()?;
        let decrease = trace.last().map(|prev: &f64| prev - it.phi);
        trace.push(it.phi);
        if decrease.is_some_and(|d| d < options.epsilon) {
            converged = true;
        } else if trace.len() < options.max_iter && run.reassign(&it)? {
            continue;
        } else if trace.len() < options.max_iter {
            // Unchanged assignment: the next pass would reproduce `it`.
            converged = true;
        }
        return Ok(StartOutcome {
            start_index,
            assignment: run.assignment,
            last: it,
            trace,
            converged,
        });
    }
}

/// Converged multiple-set cluster CA solution.
#[derive(Debug, Clone)]
pub struct MsccaSolution {
    pub assignment: HierarchicalAssignment,
    /// G (K×p), rows in global cluster order.
    pub centers: DMatrix<f64>,
    /// B (Q×p), rows in indicator column order.
    pub quantifications: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub objective: f64,
    pub psi: f64,
    pub objective_trace: Vec<f64>,
    pub start_index: usize,
    pub converged: bool,
}

impl MsccaSolution {
    pub fn dims(&self) -> usize {
        self.quantifications.ncols()
    }
}

/// Multistart alternating least squares; the start with the lowest
/// objective wins, ties going to the earlier start.
pub fn fit_mscca(
    data: &CategoricalDataset,
    sup: &SupplementaryData,
    spec: &ClusterSpec,
    options: &SolverOptions,
) -> Result<MsccaSolution> {
    if sup.n_obs() != data.n_obs() {
        return Err(Error::Shape(format!(
            "{} supplementary rows for {} observations",
            sup.n_obs(),
            data.n_obs()
        )));
    }
    spec.validate(sup)?;
    options.validate(data)?;
    let view = stacked_indicators(data, sup.n_sup())?;
    let outcomes: Vec<Result<StartOutcome>> = (0..options.n_starts)
        .into_par_iter()
        .map(|s| run_start(&view, sup, spec, options, s))
        .collect();
    let mut best: Option<StartOutcome> = None;
    for outcome in outcomes {
        let outcome = outcome?;
        if best.as_ref().is_none_or(|b| outcome.last.phi < b.last.phi) {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one start");
    let psi = psi_value(&best.assignment, &best.last.quantifications, &view)?;
    Ok(MsccaSolution {
        assignment: best.assignment,
        centers: best.last.centers,
        quantifications: best.last.quantifications,
        eigenvalues: best.last.eigenvalues,
        objective: best.last.phi,
        psi,
        objective_trace: best.trace,
        start_index: best.start_index,
        converged: best.converged,
    })
}

/// Cluster CA: the same alternating scheme with one flat partition into
/// `k` clusters.
pub fn fit_cluster_ca(
    data: &CategoricalDataset,
    k: usize,
    options: &SolverOptions,
) -> Result<MsccaSolution> {
    if k < 2 || k > data.n_obs() {
        return Err(Error::Spec(format!(
            "cluster CA needs 2 <= K <= N, got K={k}, N={}",
            data.n_obs()
        )));
    }
    let sup = SupplementaryData::single_class(data.n_obs());
    fit_mscca(data, &sup, &ClusterSpec::new(vec![vec![k]]), options)
}

/// One B/G pass with the assignment held fixed.
pub fn fit_fixed_assignment(
    data: &CategoricalDataset,
    assignment: &HierarchicalAssignment,
    dims: usize,
) -> Result<Iterate> {
    let view = stacked_indicators(data, assignment.n_sup())?;
    let up = update_b(assignment, &view, dims)?;
    let centers = update_g(assignment, &view, &up.quantifications)?;
    let phi = objective_phi(assignment, &centers, &up.quantifications, &view);
    Ok(Iterate {
        quantifications: up.quantifications,
        centers,
        eigenvalues: up.eigenvalues,
        phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (CategoricalDataset, SupplementaryData) {
        let rows: Vec<Vec<String>> = [
            ["a", "x", "u", "m"],
            ["a", "x", "u", "f"],
            ["b", "y", "v", "m"],
            ["b", "y", "v", "f"],
            ["a", "y", "u", "m"],
            ["c", "x", "w", "f"],
            ["c", "z", "w", "m"],
            ["b", "z", "v", "f"],
            ["a", "x", "w", "m"],
            ["c", "z", "u", "f"],
        ]
        .iter()
        .map(|r| r.iter().map(|s| s.to_string()).collect())
        .collect();
        let act: Vec<Vec<String>> = rows.iter().map(|r| r[..3].to_vec()).collect();
        let sup: Vec<Vec<String>> = rows.iter().map(|r| r[3..].to_vec()).collect();
        (
            CategoricalDataset::encode(vec!["p".into(), "q".into(), "r".into()], &act).unwrap(),
            SupplementaryData::encode(vec!["g".into()], &sup).unwrap(),
        )
    }

    #[test]
    fn fixed_seed_reruns_identically() {
        let (ds, sup) = data();
        let spec = ClusterSpec::uniform(&sup, 2);
        let opts = SolverOptions {
            n_starts: 1,
            seed: 5,
            ..Default::default()
        };
        let a = fit_mscca(&ds, &sup, &spec, &opts).unwrap();
        let b = fit_mscca(&ds, &sup, &spec, &opts).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.quantifications, b.quantifications);
        assert_eq!(a.objective_trace, b.objective_trace);
    }

    #[test]
    fn trace_is_monotone() {
        let (ds, sup) = data();
        let spec = ClusterSpec::uniform(&sup, 2);
        let view = stacked_indicators(&ds, 1).unwrap();
        for s in 0..20 {
            let out = run_start(&view, &sup, &spec, &SolverOptions::default(), s).unwrap();
            for w in out.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn invalid_options_are_rejected() {
        let (ds, sup) = data();
        let spec = ClusterSpec::uniform(&sup, 2);
        let bad = SolverOptions {
            dims: 9,
            ..Default::default()
        };
        assert!(matches!(
            fit_mscca(&ds, &sup, &spec, &bad),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            fit_cluster_ca(&ds, 1, &SolverOptions::default()),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn cluster_ca_is_mscca_with_one_class() {
        let (ds, _) = data();
        let opts = SolverOptions {
            n_starts: 5,
            ..Default::default()
        };
        let a = fit_cluster_ca(&ds, 3, &opts).unwrap();
        let sup = SupplementaryData::single_class(ds.n_obs());
        let b = fit_mscca(&ds, &sup, &ClusterSpec::new(vec![vec![3]]), &opts).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.objective, b.objective);
    }
}
