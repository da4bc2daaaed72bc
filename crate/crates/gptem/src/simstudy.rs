//! Monte Carlo benchmark harness.
//!
//! Reproduces the simulation experiments at configurable scale: per
//! replicate, simulate a Yule tree and Brownian traits under a known
//! precision K_0, fit both the graphical and the full model on identical
//! data, and score the graphical edge estimate against the true graph and
//! the full model's HPD-selected correlations against the true non-zero
//! correlations. Replicates are independent jobs; determinism is
//! per-replicate, so the aggregate does not depend on worker count.

use crate::error::{Error, Result};
use crate::graph::{edge_pairs, n_edge_slots, TraitGraph};
use crate::gwishart::PrecisionMatrix;
use crate::mcmc::{run_chain, ChainConfig, ModelSpec};
use crate::phylo::{simulate_traits, simulate_tree, RootPrior};
use crate::rng::derive_seed;
use crate::summary::{
    classify_hpd, confusion_metrics, correlation_samples, edge_inclusion_probabilities,
    estimate_graph, estimate_precision, indicator_from_matrix, BenchmarkMetrics, LogMse,
    PairCategory, BF_THRESHOLD,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Tolerance for treating a true precision or correlation entry as zero.
pub const TRUTH_TOL: f64 = 1e-8;

/// Bundled Sim 1 ground-truth precision (N = 50, p = 5 scenario).
pub const SIM1_K0_CSV: &str = include_str!("../data/sim1_k0.csv");
/// Bundled Sim 2 ground-truth precision (N = 100, p = 10 scenario).
pub const SIM2_K0_CSV: &str = include_str!("../data/sim2_k0.csv");

/// One benchmark scenario: ground truth, scale, and chain settings.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub n_taxa: usize,
    pub true_precision: PrecisionMatrix,
    pub n_replicates: usize,
    pub chain_config: ChainConfig,
    pub base_seed: u64,
    /// HPD levels at which the full model's R^H is scored.
    pub hpd_levels: Vec<f64>,
}

/// Serde image of the scenario config file (TOML).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub n_taxa: usize,
    pub n_replicates: usize,
    pub base_seed: u64,
    /// Row-major true precision matrix.
    pub true_precision: Vec<Vec<f64>>,
    #[serde(default)]
    pub n_iterations: Option<usize>,
    #[serde(default)]
    pub warmup: Option<usize>,
    #[serde(default)]
    pub thin: Option<usize>,
    #[serde(default)]
    pub mc_samples: Option<usize>,
    #[serde(default)]
    pub hpd_levels: Option<Vec<f64>>,
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let p = rows.len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidInput("precision rows must form a square matrix".into()));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

fn parse_k0_csv(text: &str) -> Result<PrecisionMatrix> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidInput(format!("non-numeric K_0 entry {f:?}"))
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    PrecisionMatrix::new(matrix_from_rows(&rows)?)
}

impl ScenarioSpec {
    /// Desk-scale Sim 1: RE = 50 replicates at N = 50, p = 5.
    pub fn sim1_desk(chain_config: ChainConfig, base_seed: u64) -> Result<Self> {
        Ok(ScenarioSpec {
            name: "sim1".into(),
            n_taxa: 50,
            true_precision: parse_k0_csv(SIM1_K0_CSV)?,
            n_replicates: 50,
            chain_config,
            base_seed,
            hpd_levels: vec![0.90, 0.95],
        })
    }

    /// Desk-scale Sim 2: RE = 25 replicates at N = 100, p = 10.
    pub fn sim2_desk(chain_config: ChainConfig, base_seed: u64) -> Result<Self> {
        Ok(ScenarioSpec {
            name: "sim2".into(),
            n_taxa: 100,
            true_precision: parse_k0_csv(SIM2_K0_CSV)?,
            n_replicates: 25,
            chain_config,
            base_seed,
            hpd_levels: vec![0.90, 0.95],
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario file: {e}")))?;
        let true_precision = PrecisionMatrix::new(matrix_from_rows(&file.true_precision)?)?;
        let mut chain_config = ChainConfig::default();
        if let Some(n) = file.n_iterations {
            chain_config.n_iterations = n;
            chain_config.warmup = n / 5;
        }
        if let Some(w) = file.warmup {
            chain_config.warmup = w;
        }
        if let Some(t) = file.thin {
            chain_config.thin = t;
        }
        if let Some(m) = file.mc_samples {
            chain_config.mc_samples = m;
        }
        let spec = ScenarioSpec {
            name: file.name,
            n_taxa: file.n_taxa,
            true_precision,
            n_replicates: file.n_replicates,
            chain_config,
            base_seed: file.base_seed,
            hpd_levels: file.hpd_levels.unwrap_or_else(|| vec![0.90, 0.95]),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_taxa < 2 {
            return Err(Error::Config("n_taxa must be at least 2".into()));
        }
        if self.n_replicates == 0 {
            return Err(Error::Config("n_replicates must be positive".into()));
        }
        if self
            .hpd_levels
            .iter()
            .any(|&g| !(0.0 < g && g < 1.0))
        {
            return Err(Error::Config("HPD levels must lie in (0, 1)".into()));
        }
        self.chain_config.validate()
    }

    pub fn p(&self) -> usize {
        self.true_precision.p()
    }

    /// True graph G_0: the zero pattern of K_0.
    pub fn true_graph(&self) -> TraitGraph {
        TraitGraph::from_zero_pattern(self.true_precision.values(), TRUTH_TOL)
    }

    /// True correlation R_0 derived from K_0^-1.
    pub fn true_correlation(&self) -> Result<DMatrix<f64>> {
        let sigma = self.true_precision.inverse()?;
        let p = self.p();
        Ok(DMatrix::from_fn(p, p, |i, j| {
            sigma[(i, j)] / (sigma[(i, i)] * sigma[(j, j)]).sqrt()
        }))
    }

    /// Slot-order indicator of the marginally dependent pairs (R_0 non-zero),
    /// the ground truth for the full model's R^H.
    pub fn true_dependence(&self) -> Result<Vec<bool>> {
        let r0 = self.true_correlation()?;
        Ok(edge_pairs(self.p())
            .map(|(i, j)| r0[(i, j)].abs() > TRUTH_TOL)
            .collect())
    }

    /// Per-slot pair categories from (G_0, R_0): conditionally dependent
    /// pairs are CD-D; conditionally independent pairs split by marginal
    /// dependence into CI-D and CI-I.
    pub fn categories(&self) -> Result<Vec<PairCategory>> {
        let g0 = self.true_graph();
        let dependent = self.true_dependence()?;
        Ok(edge_pairs(self.p())
            .zip(&dependent)
            .map(|((i, j), &dep)| {
                if g0.has_edge(i, j) {
                    PairCategory::CdD
                } else if dep {
                    PairCategory::CiD
                } else {
                    PairCategory::CiI
                }
            })
            .collect())
    }
}

/// Everything recorded about one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub index: usize,
    /// Graphical-model edge inclusion probabilities, slot order.
    pub pe: Vec<f64>,
    /// Graphical-model edge estimate indicator, slot order.
    pub graph_estimate: Vec<bool>,
    /// Graphical-model conditional-mean precision estimate, row-major rows.
    pub k_hat_graphical: Vec<Vec<f64>>,
    pub r_hat_graphical: Vec<Vec<f64>>,
    /// Full-model posterior-mean precision and correlation.
    pub k_hat_full: Vec<Vec<f64>>,
    pub r_hat_full: Vec<Vec<f64>>,
    /// Full-model R^H indicators per HPD level, slot order.
    pub hpd_selection: Vec<(f64, Vec<bool>)>,
    /// Graphical edge-recovery metrics (criterion "GGM").
    pub metrics_graphical: BenchmarkMetrics,
    /// Full-model metrics per HPD level (criteria "HPD_90" etc.).
    pub metrics_hpd: Vec<(f64, BenchmarkMetrics)>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Simulate data and fit both models for replicate `index`.
pub fn run_replicate(spec: &ScenarioSpec, index: usize) -> Result<ReplicateResult> {
    spec.validate()?;
    let p = spec.p();
    let replicate_seed = spec.base_seed ^ index as u64;
    let tree_seed = derive_seed(replicate_seed, 1);
    let trait_seed = derive_seed(replicate_seed, 2);
    let graphical_seed = derive_seed(replicate_seed, 3);
    let full_seed = derive_seed(replicate_seed, 4);

    let root_prior = RootPrior::standard(p);
    let tree = simulate_tree(spec.n_taxa, tree_seed)?;
    let traits = simulate_traits(&tree, &spec.true_precision, &root_prior, trait_seed)?;

    // Both fits consume the identical (tree, traits).
    let graphical_spec = ModelSpec::graphical_default(p)?;
    let graphical_trace = run_chain(&tree, &traits, &graphical_spec, &spec.chain_config, graphical_seed)?;
    let full_spec = ModelSpec::full_default(p)?;
    let full_trace = run_chain(&tree, &traits, &full_spec, &spec.chain_config, full_seed)?;

    let pe = edge_inclusion_probabilities(&graphical_trace)?;
    let (g_hat, _) = estimate_graph(&pe, p, BF_THRESHOLD);
    let k_hat_graphical = estimate_precision(&graphical_trace, &g_hat)?;
    let graphical_correlations = correlation_samples(&graphical_trace)?;
    let r_hat_graphical = mean_correlation(&graphical_correlations);

    let complete = TraitGraph::complete(p);
    let k_hat_full = estimate_precision(&full_trace, &complete)?;
    let full_correlations = correlation_samples(&full_trace)?;
    let r_hat_full = mean_correlation(&full_correlations);

    let g0_indicator: Vec<bool> = {
        let g0 = spec.true_graph();
        edge_pairs(p).map(|(i, j)| g0.has_edge(i, j)).collect()
    };
    let graph_estimate: Vec<bool> = g_hat.indicator().to_vec();
    let metrics_graphical = confusion_metrics(&graph_estimate, &g0_indicator)?;

    let dependence_truth = spec.true_dependence()?;
    let mut hpd_selection = Vec::new();
    let mut metrics_hpd = Vec::new();
    for &gamma in &spec.hpd_levels {
        let rh = classify_hpd(&full_trace, gamma)?;
        let indicator = indicator_from_matrix(&rh);
        metrics_hpd.push((gamma, confusion_metrics(&indicator, &dependence_truth)?));
        hpd_selection.push((gamma, indicator));
    }

    Ok(ReplicateResult {
        index,
        pe,
        graph_estimate,
        k_hat_graphical: rows_of(&k_hat_graphical),
        r_hat_graphical: rows_of(&r_hat_graphical),
        k_hat_full: rows_of(&k_hat_full),
        r_hat_full: rows_of(&r_hat_full),
        hpd_selection,
        metrics_graphical,
        metrics_hpd,
    })
}

fn mean_correlation(correlations: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = correlations[0].nrows();
    let mut mean = DMatrix::zeros(p, p);
    for r in correlations {
        mean += r;
    }
    mean /= correlations.len() as f64;
    for i in 0..p {
        mean[(i, i)] = 1.0;
    }
    mean
}

/// Mean and standard deviation of the defined values of one metric across
/// replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    /// Replicates where the metric was defined.
    pub n: usize,
}

fn mean_sd(values: &[f64]) -> Option<MeanSd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MeanSd {
        mean,
        sd: var.sqrt(),
        n: values.len(),
    })
}

/// Aggregated confusion metrics for one decision criterion (GGM or an HPD
/// level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSummary {
    pub criterion: String,
    pub sensitivity: Option<MeanSd>,
    pub specificity: Option<MeanSd>,
    pub precision_metric: Option<MeanSd>,
    pub f1: Option<MeanSd>,
    pub accuracy: Option<MeanSd>,
}

fn summarize_criterion(criterion: &str, metrics: &[&BenchmarkMetrics]) -> CriterionSummary {
    let collect = |f: fn(&BenchmarkMetrics) -> Option<f64>| -> Option<MeanSd> {
        mean_sd(&metrics.iter().filter_map(|m| f(m)).collect::<Vec<_>>())
    };
    CriterionSummary {
        criterion: criterion.to_string(),
        sensitivity: collect(|m| m.sensitivity),
        specificity: collect(|m| m.specificity),
        precision_metric: collect(|m| m.precision_metric),
        f1: collect(|m| m.f1),
        accuracy: collect(|m| Some(m.accuracy)),
    }
}

/// Per-category log mean squared error distribution for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMseSummary {
    pub model: String,
    /// "precision" or "correlation".
    pub target: String,
    pub category: String,
    pub values: Vec<f64>,
    /// Replicates whose category error was exactly zero (log MSE undefined).
    pub n_exact: usize,
}

/// Per-category pairwise classification accuracy for one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    pub criterion: String,
    pub category: String,
    pub accuracy: MeanSd,
}

/// The full aggregate report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub scenario: String,
    pub n_replicates_requested: usize,
    pub n_replicates_used: usize,
    pub failed_replicates: Vec<usize>,
    /// Mean edge-indicator matrix across replicates ("Monte Carlo posterior
    /// graph"), slot order.
    pub g_mc: Vec<f64>,
    /// Mean edge inclusion probabilities across replicates, slot order.
    pub pe_mc: Vec<f64>,
    pub criteria: Vec<CriterionSummary>,
    pub category_accuracy: Vec<CategoryAccuracy>,
    pub logmse: Vec<LogMseSummary>,
}

/// Aggregate successful replicates into the benchmark report.
pub fn aggregate(
    spec: &ScenarioSpec,
    results: &[ReplicateResult],
    failed: &[usize],
) -> Result<BenchmarkReport> {
    if results.is_empty() {
        return Err(Error::AllReplicatesFailed);
    }
    let p = spec.p();
    let n_slots = n_edge_slots(p);
    let n = results.len() as f64;

    let mut g_mc = vec![0.0; n_slots];
    let mut pe_mc = vec![0.0; n_slots];
    for r in results {
        for slot in 0..n_slots {
            g_mc[slot] += f64::from(u8::from(r.graph_estimate[slot]));
            pe_mc[slot] += r.pe[slot];
        }
    }
    for slot in 0..n_slots {
        g_mc[slot] /= n;
        pe_mc[slot] /= n;
    }

    let mut criteria = vec![summarize_criterion(
        "GGM",
        &results.iter().map(|r| &r.metrics_graphical).collect::<Vec<_>>(),
    )];
    for (level_idx, &gamma) in spec.hpd_levels.iter().enumerate() {
        let name = format!("HPD_{:.0}", gamma * 100.0);
        let metrics: Vec<&BenchmarkMetrics> = results
            .iter()
            .map(|r| &r.metrics_hpd[level_idx].1)
            .collect();
        criteria.push(summarize_criterion(&name, &metrics));
    }

    let categories = spec.categories()?;
    let category_accuracy = per_category_accuracy(spec, results, &categories)?;
    let logmse = logmse_tables(spec, results, &categories)?;

    Ok(BenchmarkReport {
        scenario: spec.name.clone(),
        n_replicates_requested: spec.n_replicates,
        n_replicates_used: results.len(),
        failed_replicates: failed.to_vec(),
        g_mc,
        pe_mc,
        criteria,
        category_accuracy,
        logmse,
    })
}

fn per_category_accuracy(
    spec: &ScenarioSpec,
    results: &[ReplicateResult],
    categories: &[PairCategory],
) -> Result<Vec<CategoryAccuracy>> {
    let p = spec.p();
    let g0 = spec.true_graph();
    let g0_indicator: Vec<bool> = edge_pairs(p).map(|(i, j)| g0.has_edge(i, j)).collect();
    let dependence_truth = spec.true_dependence()?;

    let mut out = Vec::new();
    for cat in PairCategory::ALL {
        let slots: Vec<usize> = (0..categories.len())
            .filter(|&s| categories[s] == cat)
            .collect();
        if slots.is_empty() {
            continue;
        }
        let fraction_correct = |estimate: &[bool], truth: &[bool]| -> f64 {
            slots.iter().filter(|&&s| estimate[s] == truth[s]).count() as f64 / slots.len() as f64
        };
        let ggm: Vec<f64> = results
            .iter()
            .map(|r| fraction_correct(&r.graph_estimate, &g0_indicator))
            .collect();
        out.push(CategoryAccuracy {
            criterion: "GGM".into(),
            category: cat.label().into(),
            accuracy: mean_sd(&ggm).unwrap(),
        });
        for (level_idx, &gamma) in spec.hpd_levels.iter().enumerate() {
            let vals: Vec<f64> = results
                .iter()
                .map(|r| fraction_correct(&r.hpd_selection[level_idx].1, &dependence_truth))
                .collect();
            out.push(CategoryAccuracy {
                criterion: format!("HPD_{:.0}", gamma * 100.0),
                category: cat.label().into(),
                accuracy: mean_sd(&vals).unwrap(),
            });
        }
    }
    Ok(out)
}

fn logmse_tables(
    spec: &ScenarioSpec,
    results: &[ReplicateResult],
    categories: &[PairCategory],
) -> Result<Vec<LogMseSummary>> {
    let k0 = spec.true_precision.values().clone();
    let r0 = spec.true_correlation()?;
    let targets: [(&str, &str, Vec<DMatrix<f64>>, &DMatrix<f64>); 4] = [
        (
            "graphical",
            "precision",
            results.iter().map(|r| matrix_from_rows(&r.k_hat_graphical)).collect::<Result<_>>()?,
            &k0,
        ),
        (
            "full",
            "precision",
            results.iter().map(|r| matrix_from_rows(&r.k_hat_full)).collect::<Result<_>>()?,
            &k0,
        ),
        (
            "graphical",
            "correlation",
            results.iter().map(|r| matrix_from_rows(&r.r_hat_graphical)).collect::<Result<_>>()?,
            &r0,
        ),
        (
            "full",
            "correlation",
            results.iter().map(|r| matrix_from_rows(&r.r_hat_full)).collect::<Result<_>>()?,
            &r0,
        ),
    ];
    let mut out = Vec::new();
    for (model, target, estimates, truth) in &targets {
        for (cat, per_replicate) in
            crate::summary::logmse_by_category(estimates, truth, categories)?
        {
            let mut values = Vec::new();
            let mut n_exact = 0;
            for v in per_replicate {
                match v {
                    LogMse::Exact => n_exact += 1,
                    LogMse::Value(x) => values.push(x),
                }
            }
            out.push(LogMseSummary {
                model: model.to_string(),
                target: target.to_string(),
                category: cat.label().into(),
                values,
                n_exact,
            });
        }
    }
    Ok(out)
}

/// Run all replicates on a pool of `workers` threads and aggregate.
///
/// Failures are recorded and excluded if they stay within 2% of the
/// requested replicates; beyond that the batch aborts. Results are sorted by
/// index, so the aggregate is identical for any worker count.
pub fn run_scenario(spec: &ScenarioSpec, workers: usize) -> Result<BenchmarkReport> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<(usize, Result<ReplicateResult>)> = pool.install(|| {
        use rayon::prelude::*;
        (0..spec.n_replicates)
            .into_par_iter()
            .map(|index| (index, run_replicate(spec, index)))
            .collect()
    });

    let mut results = Vec::new();
    let mut failed = Vec::new();
    for (index, outcome) in outcomes {
        match outcome {
            Ok(r) => results.push(r),
            Err(e) => {
                eprintln!("warning: replicate {index} failed: {e}");
                failed.push(index);
            }
        }
    }
    if results.is_empty() {
        return Err(Error::AllReplicatesFailed);
    }
    if failed.len() * 50 > spec.n_replicates {
        return Err(Error::TooManyFailedReplicates {
            failed: failed.len(),
            total: spec.n_replicates,
        });
    }
    results.sort_by_key(|r| r.index);
    failed.sort_unstable();
    aggregate(spec, &results, &failed)
}

fn fmt_opt(v: &Option<MeanSd>) -> (String, String) {
    match v {
        Some(m) => (format!("{:.6}", m.mean), format!("{:.6}", m.sd)),
        None => ("NA".into(), "NA".into()),
    }
}

/// Metrics CSV: one row per criterion and metric with mean and SD.
pub fn write_report_csv<W: Write>(mut w: W, report: &BenchmarkReport) -> Result<()> {
    writeln!(w, "criterion,category,metric,mean,sd,n")?;
    for c in &report.criteria {
        for (metric, value) in [
            ("sensitivity", &c.sensitivity),
            ("specificity", &c.specificity),
            ("precision", &c.precision_metric),
            ("f1", &c.f1),
            ("accuracy", &c.accuracy),
        ] {
            let (mean, sd) = fmt_opt(value);
            let n = value.as_ref().map_or(0, |m| m.n);
            writeln!(w, "{},,{metric},{mean},{sd},{n}", c.criterion)?;
        }
    }
    for ca in &report.category_accuracy {
        writeln!(
            w,
            "{},{},accuracy,{:.6},{:.6},{}",
            ca.criterion, ca.category, ca.accuracy.mean, ca.accuracy.sd, ca.accuracy.n
        )?;
    }
    for lm in &report.logmse {
        let summary = mean_sd(&lm.values);
        let (mean, sd) = fmt_opt(&summary);
        writeln!(
            w,
            "logmse_{}_{},{},logmse,{mean},{sd},{}",
            lm.model,
            lm.target,
            lm.category,
            lm.values.len()
        )?;
        if lm.n_exact > 0 {
            writeln!(
                w,
                "logmse_{}_{},{},n_exact,{},0,{}",
                lm.model, lm.target, lm.category, lm.n_exact, lm.n_exact
            )?;
        }
    }
    Ok(())
}

/// Per-replicate metrics CSV: (replicate, model, criterion, category,
/// metric, value).
pub fn write_replicate_metrics_csv<W: Write>(
    mut w: W,
    results: &[ReplicateResult],
) -> Result<()> {
    writeln!(w, "replicate,model,criterion,category,metric,value")?;
    let mut emit = |rep: usize, model: &str, criterion: &str, m: &BenchmarkMetrics| -> Result<()> {
        let fields: [(&str, Option<f64>); 5] = [
            ("sensitivity", m.sensitivity),
            ("specificity", m.specificity),
            ("precision", m.precision_metric),
            ("f1", m.f1),
            ("accuracy", Some(m.accuracy)),
        ];
        for (name, value) in fields {
            let text = value.map_or("NA".into(), |v| format!("{v:.6}"));
            writeln!(w, "{rep},{model},{criterion},,{name},{text}")?;
        }
        Ok(())
    };
    for r in results {
        emit(r.index, "graphical", "GGM", &r.metrics_graphical)?;
        for (gamma, m) in &r.metrics_hpd {
            emit(r.index, "full", &format!("HPD_{:.0}", gamma * 100.0), m)?;
        }
    }
    Ok(())
}

/// Plain-text tables mirroring the benchmark report.
pub fn render_report_text(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Scenario {}: {} of {} replicates used ({} failed)\n\n",
        report.scenario,
        report.n_replicates_used,
        report.n_replicates_requested,
        report.failed_replicates.len()
    ));
    out.push_str("Decision criteria, mean (SD) across replicates:\n");
    out.push_str(
        "criterion   sensitivity      specificity      precision        F1               accuracy\n",
    );
    let cell = |v: &Option<MeanSd>| match v {
        Some(m) => format!("{:.2} ({:.3})", m.mean, m.sd),
        None => "NA".to_string(),
    };
    for c in &report.criteria {
        out.push_str(&format!(
            "{:<11} {:<16} {:<16} {:<16} {:<16} {:<16}\n",
            c.criterion,
            cell(&c.sensitivity),
            cell(&c.specificity),
            cell(&c.precision_metric),
            cell(&c.f1),
            cell(&c.accuracy),
        ));
    }
    out.push_str("\nPairwise accuracy by category, mean (SD):\n");
    for ca in &report.category_accuracy {
        out.push_str(&format!(
            "{:<8} {:<6} {:.2} ({:.3})\n",
            ca.criterion, ca.category, ca.accuracy.mean, ca.accuracy.sd
        ));
    }
    out.push_str("\nLog mean squared error by category (mean across replicates):\n");
    for lm in &report.logmse {
        let text = match mean_sd(&lm.values) {
            Some(m) => format!("{:.3}", m.mean),
            None => "exact".to_string(),
        };
        let exact_note = if lm.n_exact > 0 {
            format!("  [{} exact]", lm.n_exact)
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{:<10} {:<12} {:<6} {text}{exact_note}\n",
            lm.model, lm.target, lm.category
        ));
    }
    out
}
