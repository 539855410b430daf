use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use mscca_core::simulation::{
    generate_illustration_with, run_study, summarize, write_results_csv, write_summary_csv,
    IllustrationSpec, StudyDesign,
};

use crate::archive::SolutionArchive;
use crate::config::{ExportFormat, Method, RunConfig};
use crate::error::{export_err, CliError};
use crate::export::{render_svg, write_atomic, write_outputs};
use crate::run::run;

#[derive(Debug, Parser)]
#[command(
    name = "mscca",
    version,
    about = "Multiple-set cluster correspondence analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster within every supplementary class and quantify categories.
    Fit(FitArgs),
    /// Run a comparison method on the same data.
    Variants {
        #[arg(long, value_enum)]
        method: VariantMethod,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Run a simulation design and write per-replicate and per-cell results.
    Simulate {
        /// JSON design file.
        design: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Render the biplot of a two-dimensional solution archive.
    ExportSvg {
        archive: PathBuf,
        /// Defaults to the archive path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic four-class illustration data as CSV.
    Illustration {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantMethod {
    Averaging,
    Removal,
    ClusterCa,
    Mca,
}

impl From<VariantMethod> for Method {
    fn from(v: VariantMethod) -> Self {
        match v {
            VariantMethod::Averaging => Method::Averaging,
            VariantMethod::Removal => Method::Removal,
            VariantMethod::ClusterCa => Method::ClusterCa,
            VariantMethod::Mca => Method::Mca,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// JSON run configuration; flags given here override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Supplementary column names, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sup_cols: Vec<String>,
    /// Cluster count per class: variable:class:K, class:K, or K for cluster CA.
    #[arg(long)]
    pub k: Vec<String>,
    /// Choose every class's cluster count with the KL index.
    #[arg(long)]
    pub k_auto: bool,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub export: Vec<ExportFormat>,
}

impl FitArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if self.input.is_some() {
            cfg.input = self.input.clone();
        }
        if !self.sup_cols.is_empty() {
            cfg.sup_cols = self.sup_cols.clone();
        }
        if !self.k.is_empty() {
            cfg.k = self.k.clone();
        }
        cfg.k_auto |= self.k_auto;
        macro_rules! take {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$target = v; })*
            };
        }
        take!(k_max => k_max, dims => dims, starts => starts, seed => seed,
              epsilon => epsilon, max_iter => max_iter, out => out);
        if !self.export.is_empty() {
            cfg.export = self.export.clone();
        }
        Ok(cfg)
    }
}

/// Runs one command and reports what it wrote on stdout.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(args) => fit(&args.resolve()?, Method::Mscca),
        Command::Variants { method, fit: args } => fit(&args.resolve()?, method.into()),
        Command::Simulate { design, out } => simulate(&design, &out),
        Command::ExportSvg { archive, out } => {
            let loaded = SolutionArchive::load(&archive)?;
            let svg = render_svg(&loaded)?;
            let target = out.unwrap_or_else(|| archive.with_extension("svg"));
            write_atomic(&target, svg.as_bytes())?;
            println!("wrote {}", target.display());
            Ok(())
        }
        Command::Illustration { out, seed } => {
            let mut spec = IllustrationSpec::default();
            if let Some(s) = seed {
                spec.seed = s;
            }
            let ill = generate_illustration_with(&spec).map_err(CliError::Solver)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = ill.sup.names().to_vec();
            header.extend(ill.data.names().iter().cloned());
            w.write_record(&header).map_err(export_err)?;
            for (s, d) in ill.sup.decode().into_iter().zip(ill.data.decode()) {
                w.write_record(s.iter().chain(&d)).map_err(export_err)?;
            }
            write_atomic(&out, &w.into_inner().map_err(export_err)?)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn fit(cfg: &RunConfig, method: Method) -> Result<(), CliError> {
    let output = run(cfg, method)?;
    let sol = &output.archive.solution;
    for r in &output.archive.k_selection {
        println!("{}={}: K={}", r.variable, r.class, r.k);
    }
    if !sol.cluster_counts.is_empty() {
        for (h, name) in sol.sup_names.iter().enumerate() {
            println!("{name}: clusters per class {:?}", sol.cluster_counts[h]);
        }
    }
    println!(
        "{} objective {}",
        method.name(),
        mscca_core::util::format_number(sol.phi)
    );
    for path in write_outputs(
        &output.archive,
        output.scores.as_ref(),
        &cfg.export,
        &cfg.out,
    )? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn simulate(design_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(design_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", design_path.display())))?;
    let design: StudyDesign = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", design_path.display())))?;
    design
        .validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", design_path.display())))?;
    let cells = design.cells().len();
    log::info!("{cells} cells x {} replicates", design.replicates);
    let records = run_study(&design).map_err(CliError::Solver)?;
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    let mut results = Vec::new();
    write_results_csv(&records, &mut results).map_err(export_err)?;
    let mut summary = Vec::new();
    write_summary_csv(&summarize(&records), &mut summary).map_err(export_err)?;
    let results_path = out.join("results.csv");
    let summary_path = out.join("summary.csv");
    write_atomic(&results_path, &results)?;
    write_atomic(&summary_path, &summary)?;
    println!(
        "{cells} cells, {} records, {failures} failed",
        records.len()
    );
    println!("wrote {}", results_path.display());
    println!("wrote {}", summary_path.display());
    Ok(())
}
