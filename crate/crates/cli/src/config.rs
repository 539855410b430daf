use std::path::PathBuf;

use mscca_core::{ClusterSpec, SolverOptions, SupplementaryData};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "kebab-case")]
pub enum ExportFormat {
    CoordsCsv,
    SolutionJson,
    ResidualsCsv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mscca,
    Averaging,
    Removal,
    ClusterCa,
    Mca,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mscca => "mscca",
            Method::Averaging => "averaging",
            Method::Removal => "removal",
            Method::ClusterCa => "cluster-ca",
            Method::Mca => "mca",
        }
    }
}

/// Everything a run depends on. A JSON file may supply any subset of the
/// fields; command-line flags override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub sup_cols: Vec<String>,
    /// Cluster counts as `variable:class:K`, `class:K`, or a bare `K` for
    /// cluster CA. `*` as the class matches every class of the variable.
    pub k: Vec<String>,
    pub k_auto: bool,
    pub k_max: usize,
    pub dims: usize,
    pub starts: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Where files go; not echoed into archives, so moving the output
    /// directory does not change archive bytes.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub export: Vec<ExportFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let solver = SolverOptions::default();
        Self {
            input: None,
            sup_cols: Vec::new(),
            k: Vec::new(),
            k_auto: false,
            k_max: 6,
            dims: solver.dims,
            starts: solver.n_starts,
            seed: solver.seed,
            epsilon: solver.epsilon,
            max_iter: solver.max_iter,
            out: PathBuf::from("."),
            export: vec![ExportFormat::SolutionJson, ExportFormat::CoordsCsv],
        }
    }
}

impl RunConfig {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            dims: self.dims,
            n_starts: self.starts,
            max_iter: self.max_iter,
            epsilon: self.epsilon,
            seed: self.seed,
        }
    }

    /// Checks that do not need the data.
    pub fn validate(&self, method: Method) -> Result<(), CliError> {
        if self.input.is_none() {
            return Err(CliError::Config("no input file given".into()));
        }
        let needs_classes = matches!(method, Method::Mscca | Method::Averaging | Method::Removal);
        if needs_classes && self.sup_cols.is_empty() {
            return Err(CliError::Config(format!(
                "method {} needs at least one supplementary column",
                method.name()
            )));
        }
        let needs_k = matches!(method, Method::Mscca | Method::ClusterCa);
        if needs_k {
            if self.k_auto && !self.k.is_empty() {
                return Err(CliError::Config(
                    "give either --k or --k-auto, not both".into(),
                ));
            }
            if !self.k_auto && self.k.is_empty() {
                return Err(CliError::Config(
                    "cluster counts missing: use --k or --k-auto".into(),
                ));
            }
            if self.k_auto && self.k_max < 4 {
                return Err(CliError::Config(format!(
                    "--k-max must be at least 4 for the KL index, got {}",
                    self.k_max
                )));
            }
        }
        if self.export.contains(&ExportFormat::Svg) && self.dims != 2 {
            return Err(CliError::Export(format!(
                "svg export needs a two-dimensional solution, got p = {}",
                self.dims
            )));
        }
        Ok(())
    }
}

/// Resolves `--k` entries against the supplementary classes. Every class
/// must receive exactly one count.
pub fn resolve_k_map(entries: &[String], sup: &SupplementaryData) -> Result<ClusterSpec, CliError> {
    let mut counts: Vec<Vec<Option<usize>>> = (0..sup.n_sup())
        .map(|h| vec![None; sup.n_classes(h)])
        .collect();
    for entry in entries {
        let (key, k) = entry
            .rsplit_once(':')
            .ok_or_else(|| CliError::Config(format!("--k {entry:?}: expected variable:class:K")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("--k {entry:?}: {k:?} is not a count")))?;
        let targets: Vec<(usize, usize)> = match key.split_once(':') {
            Some((var, class)) => {
                let h = sup.names().iter().position(|n| n == var).ok_or_else(|| {
                    CliError::Config(format!("--k {entry:?}: no supplementary column {var:?}"))
                })?;
                if class == "*" {
                    (0..sup.n_classes(h)).map(|s| (h, s)).collect()
                } else {
                    let s = sup
                        .labels(h)
                        .iter()
                        .position(|l| l == class)
                        .ok_or_else(|| {
                            CliError::Config(format!("--k {entry:?}: {var} has no class {class:?}"))
                        })?;
                    vec![(h, s)]
                }
            }
            None => {
                let hits: Vec<(usize, usize)> = (0..sup.n_sup())
                    .flat_map(|h| {
                        sup.labels(h)
                            .iter()
                            .enumerate()
                            .filter(|(_, l)| *l == key)
                            .map(move |(s, _)| (h, s))
                    })
                    .collect();
                match hits.len() {
                    0 => {
                        return Err(CliError::Config(format!(
                            "--k {entry:?}: no class named {key:?}"
                        )))
                    }
                    1 => hits,
                    _ => {
                        return Err(CliError::Config(format!(
                            "--k {entry:?}: class {key:?} is ambiguous, prefix the variable name"
                        )))
                    }
                }
            }
        };
        for (h, s) in targets {
            if counts[h][s].replace(k).is_some_and(|old| old != k) {
                return Err(CliError::Config(format!(
                    "conflicting counts for {}:{}",
                    sup.names()[h],
                    sup.labels(h)[s]
                )));
            }
        }
    }
    let mut missing = Vec::new();
    let resolved = counts
        .iter()
        .enumerate()
        .map(|(h, row)| {
            row.iter()
                .enumerate()
                .map(|(s, k)| {
                    k.unwrap_or_else(|| {
                        missing.push(format!("{}:{}", sup.names()[h], sup.labels(h)[s]));
                        0
                    })
                })
                .collect()
        })
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Config(format!(
            "no cluster count for {}",
            missing.join(", ")
        )));
    }
    Ok(ClusterSpec::new(resolved))
}

/// The single count cluster CA takes.
pub fn single_k(entries: &[String]) -> Result<usize, CliError> {
    match entries {
        [one] => one
            .rsplit(':')
            .next()
            .and_then(|k| k.trim().parse().ok())
            .ok_or_else(|| CliError::Config(format!("--k {one:?} is not a count"))),
        _ => Err(CliError::Config("cluster CA takes exactly one --k".into())),
    }
}
