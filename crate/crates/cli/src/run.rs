//! Fit workflows: load the table, fit the chosen method, and collect every
//! number the exports need into one archive.

use std::fs::File;

use mscca_core::biplot::{category_labels, ResidualRecord};
use mscca_core::metrics::select_class_counts;
use mscca_core::solver::{objective_phi, psi_value, update_g};
use mscca_core::{
    fit_constrained_mca, fit_mscca, residual_comparison, solution_biplot, stacked_indicators,
    BiplotModel, CategoricalDataset, ClusterSpec, ConstraintSpec, HierarchicalAssignment,
    IndicatorView, KlExponent, MsccaSolution, RawTable, SupplementaryData,
};
use nalgebra::DMatrix;

use crate::archive::{
    assignment_records, r15, round_rows, round_vec, CoordRecord, KReport, PointKind, ResidualRow,
    SolutionArchive, SolutionRecord, FORMAT,
};
use crate::config::{resolve_k_map, single_k, Method, RunConfig};
use crate::error::CliError;

/// An archive plus the per-observation scores that removal and MCA emit.
pub struct RunOutput {
    pub archive: SolutionArchive,
    pub scores: Option<ScoreTable>,
}

/// Object scores per replicate block.
pub struct ScoreTable {
    pub blocks: Vec<String>,
    pub scores: Vec<DMatrix<f64>>,
}

pub fn load_input(cfg: &RunConfig) -> Result<(CategoricalDataset, SupplementaryData), CliError> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("no input file given".into()))?;
    let file = File::open(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let table = RawTable::from_csv(file).map_err(CliError::Input)?;
    let (data, sup) = table.split(&cfg.sup_cols).map_err(CliError::Input)?;
    log::info!(
        "{} observations, {} active variables, {} supplementary",
        data.n_obs(),
        data.n_vars(),
        sup.n_sup()
    );
    Ok((data, sup))
}

pub fn run(cfg: &RunConfig, method: Method) -> Result<RunOutput, CliError> {
    cfg.validate(method)?;
    let (data, sup) = load_input(cfg)?;
    match method {
        Method::Mscca => run_mscca(cfg, &data, &sup),
        Method::ClusterCa => run_cluster_ca(cfg, &data),
        Method::Averaging => run_averaging(cfg, &data, &sup),
        Method::Removal => run_free(cfg, &data, Some(&sup)),
        Method::Mca => run_free(cfg, &data, None),
    }
}

fn solver_err(e: mscca_core::Error) -> CliError {
    CliError::Solver(e)
}

fn choose_counts(
    cfg: &RunConfig,
    data: &CategoricalDataset,
    sup: &SupplementaryData,
) -> Result<(ClusterSpec, Vec<KReport>), CliError> {
    if !cfg.k_auto {
        return Ok((resolve_k_map(&cfg.k, sup)?, Vec::new()));
    }
    let choices = select_class_counts(
        data,
        sup,
        cfg.k_max,
        &cfg.solver_options(),
        KlExponent::Dims,
    )
    .map_err(solver_err)?;
    let counts = choices
        .iter()
        .map(|row| row.iter().map(|c| c.selection.k).collect())
        .collect();
    let reports = choices
        .iter()
        .flatten()
        .map(|c| KReport::from_choice(c, &sup.names()[c.h]))
        .collect();
    Ok((ClusterSpec::new(counts), reports))
}

fn run_mscca(
    cfg: &RunConfig,
    data: &CategoricalDataset,
    sup: &SupplementaryData,
) -> Result<RunOutput, CliError> {
    let (spec, k_selection) = choose_counts(cfg, data, sup)?;
    let sol = fit_mscca(data, sup, &spec, &cfg.solver_options()).map_err(solver_err)?;
    let view = stacked_indicators(data, sup.n_sup()).map_err(solver_err)?;
    let (clusters, gamma) = cluster_points(&sol, &view, sup)?;
    let mut coordinates = clusters.coords;
    coordinates.extend(class_points(&view, sup, &sol.quantifications, gamma)?);
    coordinates.extend(category_points(
        data,
        &clusters.col_masses,
        &sol.quantifications,
        gamma,
    ));
    let residuals = residual_comparison(data, sup, &sol)
        .map_err(solver_err)?
        .records()
        .iter()
        .map(residual_row)
        .collect();
    Ok(RunOutput {
        archive: archive(
            cfg,
            Method::Mscca,
            k_selection,
            solution_record(&sol, data, sup, clusters.labels),
            coordinates,
            residuals,
        ),
        scores: None,
    })
}

fn run_cluster_ca(cfg: &RunConfig, data: &CategoricalDataset) -> Result<RunOutput, CliError> {
    let sup = SupplementaryData::from_codes(
        vec!["cluster".into()],
        vec![vec![0; data.n_obs()]],
        vec![vec!["C".into()]],
    )
    .map_err(CliError::Input)?;
    let (spec, k_selection) = if cfg.k_auto {
        choose_counts(cfg, data, &sup)?
    } else {
        (ClusterSpec::new(vec![vec![single_k(&cfg.k)?]]), Vec::new())
    };
    let k = spec.count(0, 0);
    if k < 2 || k > data.n_obs() {
        return Err(CliError::Solver(mscca_core::Error::Spec(format!(
            "cluster CA needs 2 <= K <= N, got K={k}"
        ))));
    }
    let sol = fit_mscca(data, &sup, &spec, &cfg.solver_options()).map_err(solver_err)?;
    let view = stacked_indicators(data, 1).map_err(solver_err)?;
    let (clusters, gamma) = cluster_points(&sol, &view, &sup)?;
    let mut coordinates = clusters.coords;
    coordinates.extend(category_points(
        data,
        &clusters.col_masses,
        &sol.quantifications,
        gamma,
    ));
    let residuals = residual_comparison(data, &sup, &sol)
        .map_err(solver_err)?
        .records()
        .iter()
        .filter(|r| r.method == "mscca")
        .map(residual_row)
        .collect();
    Ok(RunOutput {
        archive: archive(
            cfg,
            Method::ClusterCa,
            k_selection,
            solution_record(&sol, data, &sup, clusters.labels),
            coordinates,
            residuals,
        ),
        scores: None,
    })
}

/// The averaging approach: every class is one cluster, B from the MCA
/// constrained to class means.
fn run_averaging(
    cfg: &RunConfig,
    data: &CategoricalDataset,
    sup: &SupplementaryData,
) -> Result<RunOutput, CliError> {
    let fit =
        fit_constrained_mca(data, ConstraintSpec::Averaging(sup), cfg.dims).map_err(solver_err)?;
    let view = stacked_indicators(data, sup.n_sup()).map_err(solver_err)?;
    let v = class_assignment(sup)?;
    let b = &fit.quantifications;
    let g = update_g(&v, &view, b).map_err(solver_err)?;
    let phi = objective_phi(&v, &g, b, &view);
    if (phi - fit.objective).abs() > 1e-8 {
        log::warn!(
            "averaging objective {} differs from the re-evaluated {phi}",
            fit.objective
        );
    }
    let model = BiplotModel::class_contingency(&view, sup)
        .and_then(BiplotModel::standardized_residuals)
        .and_then(|m| m.biplot_coordinates(&g, b))
        .map_err(solver_err)?;
    let model = rescale_or_keep(model);
    let mut coordinates = Vec::new();
    let rows = model.row_coords.as_ref().expect("coordinates computed");
    for r in 0..rows.nrows() {
        coordinates.push(CoordRecord {
            point_kind: PointKind::Class,
            label: model.row_labels[r].clone(),
            coords: rows.row(r).iter().copied().map(r15).collect(),
            mass: r15(model.row_masses[r]),
            size: model.row_sizes[r],
            share: None,
        });
    }
    coordinates.extend(category_points(data, &model.col_masses, b, model.gamma));
    let res = model.residuals.as_ref().expect("residuals computed");
    let mut residuals = Vec::new();
    for r in 0..res.nrows() {
        for (j, col) in model.col_labels.iter().enumerate() {
            residuals.push(ResidualRow {
                method: "averaging".into(),
                row: model.row_labels[r].clone(),
                class: model.row_labels[r].clone(),
                column: col.clone(),
                value: r15(res[(r, j)]),
            });
        }
    }
    let record = SolutionRecord {
        sup_names: sup.names().to_vec(),
        cluster_counts: v.spec().counts().to_vec(),
        cluster_labels: model.row_labels.clone(),
        category_labels: category_labels(data),
        assignment: assignment_records(&v, sup),
        centers: round_rows(&g),
        quantifications: round_rows(b),
        eigenvalues: round_vec(fit.eigenvalues.as_slice()),
        phi: r15(phi),
        psi: Some(r15(psi_value(&v, b, &view).map_err(solver_err)?)),
        trace: Vec::new(),
        start_index: None,
        converged: None,
    };
    Ok(RunOutput {
        archive: archive(
            cfg,
            Method::Averaging,
            Vec::new(),
            record,
            coordinates,
            residuals,
        ),
        scores: None,
    })
}

/// MCA with the class means removed (`sup` given) or unconstrained.
fn run_free(
    cfg: &RunConfig,
    data: &CategoricalDataset,
    sup: Option<&SupplementaryData>,
) -> Result<RunOutput, CliError> {
    let (constraint, method, blocks) = match sup {
        Some(s) => (
            ConstraintSpec::Removal(s),
            Method::Removal,
            s.names().to_vec(),
        ),
        None => (
            ConstraintSpec::Identity,
            Method::Mca,
            vec!["all".to_string()],
        ),
    };
    let fit = fit_constrained_mca(data, constraint, cfg.dims).map_err(solver_err)?;
    let view = stacked_indicators(data, 1).map_err(solver_err)?;
    let masses =
        BiplotModel::class_contingency(&view, &SupplementaryData::single_class(data.n_obs()))
            .map_err(solver_err)?
            .col_masses;
    let coordinates = category_points(data, &masses, &fit.quantifications, 1.0);
    let scores = (0..fit.n_blocks).map(|h| fit.block_scores(h)).collect();
    let record = SolutionRecord {
        sup_names: sup.map(|s| s.names().to_vec()).unwrap_or_default(),
        cluster_counts: Vec::new(),
        cluster_labels: Vec::new(),
        category_labels: category_labels(data),
        assignment: Vec::new(),
        centers: Vec::new(),
        quantifications: round_rows(&fit.quantifications),
        eigenvalues: round_vec(fit.eigenvalues.as_slice()),
        phi: r15(fit.objective),
        psi: None,
        trace: Vec::new(),
        start_index: None,
        converged: None,
    };
    Ok(RunOutput {
        archive: archive(cfg, method, Vec::new(), record, coordinates, Vec::new()),
        scores: Some(ScoreTable { blocks, scores }),
    })
}

fn class_assignment(sup: &SupplementaryData) -> Result<HierarchicalAssignment, CliError> {
    HierarchicalAssignment::build(sup, &ClusterSpec::uniform(sup, 1), |_, _| 0).map_err(solver_err)
}

/// Balances the spread of rows and columns; a degenerate side (every row
/// point at the origin) keeps the unscaled coordinates.
fn rescale_or_keep(model: BiplotModel) -> BiplotModel {
    match model.clone().rescale_spread() {
        Ok(m) => m,
        Err(e) => {
            log::warn!("spread not rescaled: {e}");
            model
        }
    }
}

struct ClusterPoints {
    coords: Vec<CoordRecord>,
    labels: Vec<String>,
    col_masses: nalgebra::DVector<f64>,
}

/// Cluster points in display order and the spread factor applied to them.
fn cluster_points(
    sol: &MsccaSolution,
    view: &IndicatorView<'_>,
    sup: &SupplementaryData,
) -> Result<(ClusterPoints, f64), CliError> {
    let model = rescale_or_keep(solution_biplot(sol, view, sup).map_err(solver_err)?);
    let rows = model.row_coords.as_ref().expect("coordinates computed");
    let class_sizes: Vec<Vec<usize>> = (0..sup.n_sup()).map(|h| sup.class_sizes(h)).collect();
    let coords = model
        .display_order()
        .into_iter()
        .map(|r| {
            let key = model.row_keys[r];
            let size = model.row_sizes[r];
            CoordRecord {
                point_kind: PointKind::Cluster,
                label: model.row_labels[r].clone(),
                coords: rows.row(r).iter().copied().map(r15).collect(),
                mass: r15(model.row_masses[r]),
                size,
                share: Some(r15(size as f64 / class_sizes[key.h][key.s] as f64)),
            }
        })
        .collect();
    let gamma = model.gamma;
    Ok((
        ClusterPoints {
            coords,
            labels: model.row_labels,
            col_masses: model.col_masses,
        },
        gamma,
    ))
}

/// Class means of the object scores, placed like cluster points so both
/// can share one figure.
fn class_points(
    view: &IndicatorView<'_>,
    sup: &SupplementaryData,
    quant: &DMatrix<f64>,
    gamma: f64,
) -> Result<Vec<CoordRecord>, CliError> {
    let v = class_assignment(sup)?;
    let g = update_g(&v, view, quant).map_err(solver_err)?;
    let model = BiplotModel::class_contingency(view, sup)
        .and_then(|m| m.biplot_coordinates(&g, quant))
        .map_err(solver_err)?;
    let rows = model.row_coords.as_ref().expect("coordinates computed") * gamma;
    Ok((0..rows.nrows())
        .map(|r| CoordRecord {
            point_kind: PointKind::Class,
            label: model.row_labels[r].clone(),
            coords: rows.row(r).iter().copied().map(r15).collect(),
            mass: r15(model.row_masses[r]),
            size: model.row_sizes[r],
            share: None,
        })
        .collect())
}

fn category_points(
    data: &CategoricalDataset,
    col_masses: &nalgebra::DVector<f64>,
    quant: &DMatrix<f64>,
    gamma: f64,
) -> Vec<CoordRecord> {
    let counts = data.category_counts();
    category_labels(data)
        .into_iter()
        .enumerate()
        .map(|(j, label)| {
            let scale = col_masses[j].sqrt() / gamma;
            CoordRecord {
                point_kind: PointKind::Category,
                label,
                coords: quant.row(j).iter().map(|b| r15(b * scale)).collect(),
                mass: r15(col_masses[j]),
                size: counts[j],
                share: None,
            }
        })
        .collect()
}

fn residual_row(r: &ResidualRecord) -> ResidualRow {
    ResidualRow {
        method: r.method.to_string(),
        row: r.row.clone(),
        class: r.class.clone(),
        column: r.column.clone(),
        value: r15(r.value),
    }
}

fn solution_record(
    sol: &MsccaSolution,
    data: &CategoricalDataset,
    sup: &SupplementaryData,
    cluster_labels: Vec<String>,
) -> SolutionRecord {
    SolutionRecord {
        sup_names: sup.names().to_vec(),
        cluster_counts: sol.assignment.spec().counts().to_vec(),
        cluster_labels,
        category_labels: category_labels(data),
        assignment: assignment_records(&sol.assignment, sup),
        centers: round_rows(&sol.centers),
        quantifications: round_rows(&sol.quantifications),
        eigenvalues: round_vec(sol.eigenvalues.as_slice()),
        phi: r15(sol.objective),
        psi: Some(r15(sol.psi)),
        trace: round_vec(&sol.objective_trace),
        start_index: Some(sol.start_index),
        converged: Some(sol.converged),
    }
}

fn archive(
    cfg: &RunConfig,
    method: Method,
    k_selection: Vec<KReport>,
    solution: SolutionRecord,
    coordinates: Vec<CoordRecord>,
    residuals: Vec<ResidualRow>,
) -> SolutionArchive {
    SolutionArchive {
        format: FORMAT.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        method,
        seed: cfg.seed,
        config: cfg.clone(),
        dims: cfg.dims,
        k_selection,
        solution,
        coordinates,
        residuals,
    }
}
