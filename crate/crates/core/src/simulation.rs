//! Synthetic clustered categorical data, independent supplementary
//! variables, the small meal/drink illustration, and a factorial study
//! harness scoring recovered clusters by ARI and GF.

use std::io::Write;
use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CategoricalDataset, ClusterSpec, HierarchicalAssignment, SupplementaryData};
use crate::error::{Error, Result};
use crate::metrics::{class_ari, gf_against_partition};
use crate::solver::{fit_mscca, SolverOptions};
use crate::util::{derive_seed, format_number};

/// Generator settings for clustered categorical data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    pub n_obs: usize,
    pub n_vars: usize,
    /// Categories per variable.
    pub q: usize,
    /// True number of clusters.
    pub k: usize,
    /// Probability of a cluster's signal category on an active variable.
    pub high_prob: f64,
    /// Share of variables carrying cluster signal; the count is floored.
    pub active_fraction: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            n_obs: 300,
            n_vars: 10,
            q: 5,
            k: 3,
            high_prob: 0.8,
            active_fraction: 0.5,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn n_active(&self) -> usize {
        ((self.n_vars as f64) * self.active_fraction).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.high_prob > 0.0 && self.high_prob <= 1.0) {
            return Err(Error::Spec(format!(
                "high_prob {} outside (0, 1]",
                self.high_prob
            )));
        }
        if self.q < 2 || self.k == 0 || self.n_vars == 0 || self.n_obs == 0 {
            return Err(Error::Spec(format!(
                "need q >= 2, K >= 1, m >= 1, N >= 1; got q={}, K={}, m={}, N={}",
                self.q, self.k, self.n_vars, self.n_obs
            )));
        }
        if !(0.0..=1.0).contains(&self.active_fraction) {
            return Err(Error::Spec(format!(
                "active_fraction {} outside [0, 1]",
                self.active_fraction
            )));
        }
        if self.n_active() > 0 && self.q < self.k {
            return Err(Error::Spec(format!(
                "{} clusters cannot have distinct signal categories among {} categories",
                self.k, self.q
            )));
        }
        Ok(())
    }
}

/// Category probabilities of every variable for every cluster, indexed
/// `[variable][cluster][category]`, and each active variable's signal
/// category per cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct Profiles {
    pub probs: Vec<Vec<Vec<f64>>>,
    /// `signal[j][k]`; empty for noise variables.
    pub signal: Vec<Vec<usize>>,
}

/// Draws the per-(variable, cluster) category distributions.
pub fn draw_profiles<R: Rng + ?Sized>(spec: &GenSpec, rng: &mut R) -> Result<Profiles> {
    spec.validate()?;
    let q = spec.q;
    let low_total = 1.0 - spec.high_prob;
    let mut probs = Vec::with_capacity(spec.n_vars);
    let mut signal = Vec::with_capacity(spec.n_vars);
    for j in 0..spec.n_vars {
        if j >= spec.n_active() {
            probs.push(vec![vec![1.0 / q as f64; q]; spec.k]);
            signal.push(Vec::new());
            continue;
        }
        let mut perm: Vec<usize> = (0..q).collect();
        perm.shuffle(rng);
        let chosen = perm[..spec.k].to_vec();
        let mut per_cluster = Vec::with_capacity(spec.k);
        for &sig in &chosen {
            let mut p = vec![0.0; q];
            if low_total > 0.0 {
                let raw: Vec<f64> = (0..q - 1)
                    .map(|_| rng.random_range(0.0..low_total))
                    .collect();
                let sum: f64 = raw.iter().sum();
                let others = (0..q).filter(|&c| c != sig);
                for (c, x) in others.zip(&raw) {
                    p[c] = if sum > 0.0 {
                        low_total * x / sum
                    } else {
                        low_total / (q - 1) as f64
                    };
                }
            }
            p[sig] = spec.high_prob;
            per_cluster.push(p);
        }
        probs.push(per_cluster);
        signal.push(chosen);
    }
    Ok(Profiles { probs, signal })
}

/// A generated dataset with its true global cluster labels.
#[derive(Debug, Clone)]
pub struct Generated {
    pub data: CategoricalDataset,
    pub truth: Vec<usize>,
    pub profiles: Profiles,
}

/// Codes to a dataset labeled "c1".."cq", dropping categories nobody drew.
fn dataset_from_raw(
    columns: Vec<Vec<usize>>,
    q: usize,
    prefix: &str,
) -> Result<CategoricalDataset> {
    let mut names = Vec::with_capacity(columns.len());
    let mut labels = Vec::with_capacity(columns.len());
    let mut compact = Vec::with_capacity(columns.len());
    for (j, col) in columns.into_iter().enumerate() {
        let mut used = vec![false; q];
        col.iter().for_each(|&c| used[c] = true);
        let mut remap = vec![usize::MAX; q];
        let mut labs = Vec::new();
        for c in 0..q {
            if used[c] {
                remap[c] = labs.len();
                labs.push(format!("c{}", c + 1));
            }
        }
        names.push(format!("{prefix}{}", j + 1));
        labels.push(labs);
        compact.push(col.into_iter().map(|c| remap[c]).collect());
    }
    CategoricalDataset::from_codes(names, compact, labels)
}

/// Draws cluster labels uniformly, then each variable from its cluster's
/// category distribution.
pub fn generate_clustered(spec: &GenSpec) -> Result<Generated> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let profiles = draw_profiles(spec, &mut rng)?;
    let truth: Vec<usize> = (0..spec.n_obs)
        .map(|_| rng.random_range(0..spec.k))
        .collect();
    let mut columns = Vec::with_capacity(spec.n_vars);
    for per_cluster in &profiles.probs {
        let samplers: Vec<WeightedIndex<f64>> = per_cluster
            .iter()
            .map(|p| WeightedIndex::new(p).map_err(|e| Error::Spec(e.to_string())))
            .collect::<Result<_>>()?;
        columns.push(
            truth
                .iter()
                .map(|&k| samplers[k].sample(&mut rng))
                .collect(),
        );
    }
    Ok(Generated {
        data: dataset_from_raw(columns, spec.q, "V")?,
        truth,
        profiles,
    })
}

/// Class distribution of a supplementary variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Balance {
    /// Every class has probability 1/r.
    Balanced,
    /// Class s (1-based) has probability s / (r(r+1)/2).
    Unbalanced,
}

impl Balance {
    pub fn letter(self) -> char {
        match self {
            Balance::Balanced => 'b',
            Balance::Unbalanced => 'u',
        }
    }
}

pub fn class_probabilities(r: usize, balance: Balance) -> Vec<f64> {
    match balance {
        Balance::Balanced => vec![1.0 / r as f64; r],
        Balance::Unbalanced => {
            let total = (r * (r + 1) / 2) as f64;
            (1..=r).map(|s| s as f64 / total).collect()
        }
    }
}

/// Generator settings for supplementary variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupGenSpec {
    /// Class count of each supplementary variable.
    pub classes: Vec<usize>,
    pub balance: Balance,
    pub seed: u64,
}

/// Draws each supplementary variable independently of everything else.
/// A draw leaving some class empty is repeated.
pub fn generate_supplementary(spec: &SupGenSpec, n_obs: usize) -> Result<SupplementaryData> {
    if spec.classes.is_empty() {
        return Err(Error::Spec("no supplementary variables".into()));
    }
    if let Some(&r) = spec.classes.iter().find(|&&r| r < 2 || r > n_obs) {
        return Err(Error::Spec(format!("{r} classes for {n_obs} observations")));
    }
    const MAX_DRAWS: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut columns = Vec::with_capacity(spec.classes.len());
    for &r in &spec.classes {
        let sampler = WeightedIndex::new(class_probabilities(r, spec.balance))
            .map_err(|e| Error::Spec(e.to_string()))?;
        let mut draws = 0;
        let column = loop {
            let col: Vec<usize> = (0..n_obs).map(|_| sampler.sample(&mut rng)).collect();
            let mut seen = vec![false; r];
            col.iter().for_each(|&s| seen[s] = true);
            if seen.iter().all(|&x| x) {
                break col;
            }
            draws += 1;
            if draws == MAX_DRAWS {
                return Err(Error::Spec(format!(
                    "could not fill {r} classes with {n_obs} observations"
                )));
            }
        };
        columns.push(column);
    }
    let names = (1..=spec.classes.len()).map(|h| format!("S{h}")).collect();
    let labels = spec
        .classes
        .iter()
        .map(|&r| (1..=r).map(|s| format!("s{s}")).collect())
        .collect();
    SupplementaryData::from_codes(names, columns, labels)
}

/// One group of identical generative settings in the illustration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IllustrationCell {
    /// 0 American, 1 Japanese.
    pub nationality: usize,
    /// 0 Male, 1 Female.
    pub gender: usize,
    /// 0 Western & fruit juice, 1 Asian & tea, 2 Western & alcohol.
    pub cluster: usize,
    pub count: usize,
}

/// Settings for the meal/drink illustration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IllustrationSpec {
    pub cells: Vec<IllustrationCell>,
    /// Probability that a row shows exactly its cluster's meal and drink;
    /// otherwise the row takes one of the other five meal/drink pairs
    /// uniformly.
    pub high_prob: f64,
    pub seed: u64,
}

impl Default for IllustrationSpec {
    fn default() -> Self {
        let cell = |nationality, gender, cluster, count| IllustrationCell {
            nationality,
            gender,
            cluster,
            count,
        };
        Self {
            cells: vec![
                cell(0, 0, 0, 20),
                cell(0, 0, 2, 10),
                cell(0, 1, 0, 60),
                cell(1, 0, 1, 62),
                cell(1, 0, 0, 8),
                cell(1, 1, 1, 18),
                cell(1, 1, 0, 22),
            ],
            high_prob: 0.9,
            seed: 1,
        }
    }
}

/// Meal and drink of each illustration cluster.
pub const ILLUSTRATION_PATTERNS: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 2)];

/// The illustration data with its true structure.
#[derive(Debug, Clone)]
pub struct Illustration {
    pub data: CategoricalDataset,
    pub sup: SupplementaryData,
    /// Per-class truth: the global clusters present in each class.
    pub truth: HierarchicalAssignment,
    /// Global cluster of each observation (index into the patterns).
    pub global: Vec<usize>,
}

pub fn generate_illustration() -> Result<Illustration> {
    generate_illustration_with(&IllustrationSpec::default())
}

pub fn generate_illustration_with(spec: &IllustrationSpec) -> Result<Illustration> {
    if !(spec.high_prob > 0.0 && spec.high_prob <= 1.0) {
        return Err(Error::Spec(format!(
            "high_prob {} outside (0, 1]",
            spec.high_prob
        )));
    }
    if let Some(c) = spec
        .cells
        .iter()
        .find(|c| c.nationality > 1 || c.gender > 1 || c.cluster > 2)
    {
        return Err(Error::Spec(format!("invalid illustration cell {c:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Pair index = meal * 3 + drink.
    let mut draw = |(m, d): (usize, usize)| {
        let own = m * 3 + d;
        let pair = if rng.random::<f64>() < spec.high_prob {
            own
        } else {
            let other = rng.random_range(0..5);
            other + usize::from(other >= own)
        };
        (pair / 3, pair % 3)
    };
    let (mut meal, mut drink, mut nat, mut gen, mut global) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for cell in &spec.cells {
        for _ in 0..cell.count {
            let (m, d) = draw(ILLUSTRATION_PATTERNS[cell.cluster]);
            meal.push(m);
            drink.push(d);
            nat.push(cell.nationality);
            gen.push(cell.gender);
            global.push(cell.cluster);
        }
    }
    let strings = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let data = CategoricalDataset::from_codes(
        strings(&["Meal", "Drink"]),
        vec![meal, drink],
        vec![
            strings(&["Western", "Asian"]),
            strings(&["Fruit juice", "Tea", "Alcohol"]),
        ],
    )?;
    let sup = SupplementaryData::from_codes(
        strings(&["Nationality", "Gender"]),
        vec![nat, gen],
        vec![
            strings(&["American", "Japanese"]),
            strings(&["Male", "Female"]),
        ],
    )?;
    let truth = crate::metrics::truth_assignment(&sup, &global)?;
    Ok(Illustration {
        data,
        sup,
        truth,
        global,
    })
}

/// A full factorial simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyDesign {
    pub q: Vec<usize>,
    pub k: Vec<usize>,
    pub h: Vec<usize>,
    pub r: Vec<usize>,
    pub balance: Vec<Balance>,
    pub replicates: usize,
    pub starts: usize,
    pub n_obs: usize,
    pub n_vars: usize,
    pub high_prob: f64,
    pub active_fraction: f64,
    pub dims: usize,
    pub max_iter: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Store wall-clock fit times; off keeps output byte-reproducible.
    pub record_timing: bool,
}

impl Default for StudyDesign {
    fn default() -> Self {
        Self::full_grid()
    }
}

impl StudyDesign {
    /// q ∈ {5,7}, K ∈ {2,3}, H ∈ {1,3}, r ∈ {3,5}, balanced and unbalanced.
    pub fn full_grid() -> Self {
        Self {
            q: vec![5, 7],
            k: vec![2, 3],
            h: vec![1, 3],
            r: vec![3, 5],
            balance: vec![Balance::Balanced, Balance::Unbalanced],
            replicates: 100,
            starts: 100,
            n_obs: 300,
            n_vars: 10,
            high_prob: 0.8,
            active_fraction: 0.5,
            dims: 2,
            max_iter: 100,
            epsilon: 1e-8,
            seed: 0,
            record_timing: false,
        }
    }

    /// Cells in canonical order: q, K, H, r, balance, last varying fastest.
    pub fn cells(&self) -> Vec<StudyCell> {
        let mut out = Vec::new();
        for &q in &self.q {
            for &k in &self.k {
                for &h in &self.h {
                    for &r in &self.r {
                        for &balance in &self.balance {
                            out.push(StudyCell {
                                q,
                                k,
                                h,
                                r,
                                balance,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells().is_empty() {
            return Err(Error::Spec("empty design grid".into()));
        }
        if self.replicates == 0 || self.starts == 0 {
            return Err(Error::Spec(
                "need at least one replicate and one start".into(),
            ));
        }
        if self.r.iter().any(|&r| r < 2) || self.h.contains(&0) {
            return Err(Error::Spec("need r >= 2 and H >= 1".into()));
        }
        Ok(())
    }
}

/// One combination of design factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StudyCell {
    pub q: usize,
    pub k: usize,
    pub h: usize,
    pub r: usize,
    pub balance: Balance,
}

impl StudyCell {
    /// Balance letter and class count, e.g. "b3".
    pub fn condition(&self) -> String {
        format!("{}{}", self.balance.letter(), self.r)
    }

    /// e.g. "q5_K2_H1_b3".
    pub fn label(&self) -> String {
        format!("q{}_K{}_H{}_{}", self.q, self.k, self.h, self.condition())
    }
}

/// One class of one replicate. Fit-level values repeat across classes.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRecord {
    pub cell: StudyCell,
    pub replicate: usize,
    pub h: Option<usize>,
    pub s: Option<usize>,
    pub ari: f64,
    pub gf: f64,
    pub phi: f64,
    pub runtime_ms: u64,
    pub error: Option<String>,
}

struct Replicate {
    ari: Vec<Vec<f64>>,
    gf: f64,
    phi: f64,
    runtime_ms: u64,
}

fn run_replicate(design: &StudyDesign, cell: &StudyCell, seed: u64) -> Result<Replicate> {
    let generated = generate_clustered(&GenSpec {
        n_obs: design.n_obs,
        n_vars: design.n_vars,
        q: cell.q,
        k: cell.k,
        high_prob: design.high_prob,
        active_fraction: design.active_fraction,
        seed: derive_seed(seed, 0),
    })?;
    let sup = generate_supplementary(
        &SupGenSpec {
            classes: vec![cell.r; cell.h],
            balance: cell.balance,
            seed: derive_seed(seed, 1),
        },
        design.n_obs,
    )?;
    let options = SolverOptions {
        dims: design.dims,
        n_starts: design.starts,
        max_iter: design.max_iter,
        epsilon: design.epsilon,
        seed: derive_seed(seed, 2),
    };
    let started = Instant::now();
    let sol = fit_mscca(
        &generated.data,
        &sup,
        &ClusterSpec::uniform(&sup, cell.k),
        &options,
    )?;
    let runtime_ms = if design.record_timing {
        started.elapsed().as_millis() as u64
    } else {
        0
    };
    let ari = class_ari(&sol.assignment, &sup, &generated.truth)?;
    let gf = gf_against_partition(&sol, &generated.data, &sup, &generated.truth)?;
    Ok(Replicate {
        ari,
        gf,
        phi: sol.objective,
        runtime_ms,
    })
}

/// Runs every (cell, replicate) pair. Failures become records carrying the
/// error message; output order is canonical whatever the scheduling.
pub fn run_study(design: &StudyDesign) -> Result<Vec<StudyRecord>> {
    design.validate()?;
    let cells = design.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..design.replicates).map(move |r| (c, r)))
        .collect();
    let results: Vec<Vec<StudyRecord>> = jobs
        .par_iter()
        .map(|&(c, rep)| {
            let cell = cells[c];
            let seed = derive_seed(derive_seed(design.seed, c as u64), rep as u64);
            match run_replicate(design, &cell, seed) {
                Ok(out) => {
                    let mut records = Vec::new();
                    for (h, per_class) in out.ari.iter().enumerate() {
                        for (s, &ari) in per_class.iter().enumerate() {
                            records.push(StudyRecord {
                                cell,
                                replicate: rep,
                                h: Some(h),
                                s: Some(s),
                                ari,
                                gf: out.gf,
                                phi: out.phi,
                                runtime_ms: out.runtime_ms,
                                error: None,
                            });
                        }
                    }
                    records
                }
                Err(e) => {
                    log::warn!("{} replicate {rep} failed: {e}", cell.label());
                    vec![StudyRecord {
                        cell,
                        replicate: rep,
                        h: None,
                        s: None,
                        ari: f64::NAN,
                        gf: f64::NAN,
                        phi: f64::NAN,
                        runtime_ms: 0,
                        error: Some(e.to_string()),
                    }]
                }
            }
        })
        .collect();
    Ok(results.into_iter().flatten().collect())
}

fn opt(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Flat results table, one row per record.
pub fn write_results_csv<W: Write>(records: &[StudyRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "q",
        "K",
        "H",
        "r",
        "balance",
        "replicate",
        "h",
        "s",
        "ari",
        "gf",
        "phi",
        "runtime_ms",
    ])?;
    for rec in records {
        w.write_record([
            rec.cell.q.to_string(),
            rec.cell.k.to_string(),
            rec.cell.h.to_string(),
            rec.cell.r.to_string(),
            format!("{:?}", rec.cell.balance).to_lowercase(),
            rec.replicate.to_string(),
            opt(rec.h),
            opt(rec.s),
            format_number(rec.ari),
            format_number(rec.gf),
            format_number(rec.phi),
            rec.runtime_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Medians over replicates of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: StudyCell,
    /// Over all class rows of all replicates.
    pub median_ari: f64,
    /// Over replicates.
    pub median_gf: f64,
    pub median_phi: f64,
    pub failures: usize,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-cell medians, cells in first-appearance order.
pub fn summarize(records: &[StudyRecord]) -> Vec<CellSummary> {
    let mut cells: Vec<StudyCell> = Vec::new();
    for rec in records {
        if !cells.contains(&rec.cell) {
            cells.push(rec.cell);
        }
    }
    cells
        .into_iter()
        .map(|cell| {
            let rows: Vec<&StudyRecord> = records.iter().filter(|r| r.cell == cell).collect();
            let ari: Vec<f64> = rows.iter().map(|r| r.ari).collect();
            // One fit-level value per replicate.
            let first: Vec<&&StudyRecord> = rows
                .iter()
                .filter(|r| r.h.is_none_or(|h| h == 0) && r.s.is_none_or(|s| s == 0))
                .collect();
            let gf: Vec<f64> = first.iter().map(|r| r.gf).collect();
            let phi: Vec<f64> = first.iter().map(|r| r.phi).collect();
            CellSummary {
                cell,
                median_ari: median(&ari),
                median_gf: median(&gf),
                median_phi: median(&phi),
                failures: rows.iter().filter(|r| r.error.is_some()).count(),
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(summaries: &[CellSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "cell",
        "q",
        "K",
        "H",
        "condition",
        "median_ari",
        "median_gf",
        "median_phi",
        "failures",
    ])?;
    for s in summaries {
        w.write_record([
            s.cell.label(),
            s.cell.q.to_string(),
            s.cell.k.to_string(),
            s.cell.h.to_string(),
            s.cell.condition(),
            format_number(s.median_ari),
            format_number(s.median_gf),
            format_number(s.median_phi),
            s.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
