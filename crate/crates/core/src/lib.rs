//! Multiple-set cluster correspondence analysis.
//!
//! Observations described by categorical variables are clustered separately
//! inside every class of one or more supplementary variables, while a single
//! quantification of the categories is estimated for all classes at once.
//! Clusters and categories then share one low-dimensional biplot.

pub mod biplot;
pub mod data;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod simulation;
pub mod solver;
pub mod util;

pub use biplot::{residual_comparison, solution_biplot, BiplotModel, ResidualComparison};
pub use data::{
    stacked_indicators, CategoricalDataset, ClusterKey, ClusterSpec, HierarchicalAssignment,
    IndicatorView, RawTable, SupplementaryData,
};
pub use error::{Error, Result};
pub use metrics::{adjusted_rand_index, goodness_of_fit, kl_select, KlCurve, KlExponent};
pub use solver::{
    fit_cluster_ca, fit_constrained_mca, fit_mscca, ConstrainedFit, ConstraintSpec, MsccaSolution,
    SolverOptions,
};
