//! Posterior estimation and evaluation metrics.
//!
//! Turns a stored trace into the reported estimates: edge inclusion
//! probabilities and Bayes factors, the marginal posterior graph, the
//! graph-consistent precision mean, the posterior mean correlation, sign
//! probabilities, and HPD intervals. Also houses the benchmark metrics
//! (confusion-table summaries and category-stratified log mean squared
//! error).

use crate::error::{Error, Result};
use crate::graph::{edge_index, edge_pairs, n_edge_slots, TraitGraph};
use crate::mcmc::{triu_index, ChainTrace};
use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

/// Bayes-factor threshold 10^(1/2) for "substantial evidence".
pub const BF_THRESHOLD: f64 = 3.162_277_660_168_379_5_f64;

/// pe_ij: fraction of stored samples with the edge present, in slot order.
pub fn edge_inclusion_probabilities(trace: &ChainTrace) -> Result<Vec<f64>> {
    if trace.samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let n = trace.samples.len() as f64;
    let n_slots = n_edge_slots(trace.p);
    let mut pe = vec![0.0; n_slots];
    for sample in &trace.samples {
        for (slot, &g) in sample.edges.iter().enumerate() {
            pe[slot] += f64::from(g);
        }
    }
    for v in &mut pe {
        *v /= n;
    }
    Ok(pe)
}

/// Per-slot Bayes factor pe/(1 - pe); pe = 1 maps to +infinity.
pub fn bayes_factors(pe: &[f64]) -> Vec<f64> {
    pe.iter()
        .map(|&p| if p >= 1.0 { f64::INFINITY } else { p / (1.0 - p) })
        .collect()
}

/// Marginal posterior graph: edge included iff BF >= threshold. The test is
/// done in pe space (pe >= t/(1+t)), which is equivalent but exact at the
/// boundary where pe/(1-pe) loses precision.
pub fn estimate_graph(pe: &[f64], p: usize, bf_threshold: f64) -> (TraitGraph, Vec<f64>) {
    assert!(bf_threshold > 0.0);
    let bf = bayes_factors(pe);
    let pe_boundary = bf_threshold / (1.0 + bf_threshold);
    let slots: Vec<bool> = pe.iter().map(|&v| v >= pe_boundary).collect();
    (TraitGraph::from_indicator(p, &slots), bf)
}

/// K-hat: entry-wise mean of precision samples whose graph agrees with the
/// estimate at that entry. Off-estimate entries are exactly zero; the
/// diagonal averages over all samples.
pub fn estimate_precision(trace: &ChainTrace, graph_estimate: &TraitGraph) -> Result<DMatrix<f64>> {
    if trace.samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let p = trace.p;
    if graph_estimate.n_vertices() != p {
        return Err(Error::DimensionMismatch(
            "graph estimate does not match trace dimension".into(),
        ));
    }
    let mut k_hat = DMatrix::zeros(p, p);
    let n = trace.samples.len() as f64;
    for i in 0..p {
        let idx = triu_index(p, i, i);
        k_hat[(i, i)] = trace.samples.iter().map(|s| s.precision_triu[idx]).sum::<f64>() / n;
    }
    let mut inconsistent = Vec::new();
    for (i, j) in edge_pairs(p) {
        if !graph_estimate.has_edge(i, j) {
            continue; // consistent samples all carry an exact zero there
        }
        let slot = edge_index(p, i, j);
        let idx = triu_index(p, i, j);
        let (mut total, mut count) = (0.0, 0usize);
        for sample in &trace.samples {
            if sample.edges[slot] == 1 {
                total += sample.precision_triu[idx];
                count += 1;
            }
        }
        if count == 0 {
            inconsistent.push((i, j));
        } else {
            let mean = total / count as f64;
            k_hat[(i, j)] = mean;
            k_hat[(j, i)] = mean;
        }
    }
    if !inconsistent.is_empty() {
        return Err(Error::InconsistentEstimate {
            entries: inconsistent,
        });
    }
    Ok(k_hat)
}

/// Correlation matrix of a single precision sample: invert and normalize.
fn correlation_of(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = k.nrows();
    let sigma = Cholesky::new(k.clone())
        .ok_or_else(|| Error::TraceFormat("stored precision sample is not PD".into()))?
        .inverse();
    Ok(DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            sigma[(i, j)] / (sigma[(i, i)] * sigma[(j, j)]).sqrt()
        }
    }))
}

/// Per-sample trait correlation matrices, in trace order.
pub fn correlation_samples(trace: &ChainTrace) -> Result<Vec<DMatrix<f64>>> {
    if trace.samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    trace
        .samples
        .iter()
        .map(|s| correlation_of(&s.precision_matrix(trace.p)))
        .collect()
}

/// R-hat: entry-wise mean over all stored samples, unit diagonal.
pub fn estimate_correlation(trace: &ChainTrace) -> Result<DMatrix<f64>> {
    let samples = correlation_samples(trace)?;
    let p = trace.p;
    let mut mean = DMatrix::zeros(p, p);
    for r in &samples {
        mean += r;
    }
    mean /= samples.len() as f64;
    for i in 0..p {
        mean[(i, i)] = 1.0;
    }
    Ok(mean)
}

/// Sign probability ps = max(fraction > 0, fraction < 0); ties at zero count
/// with the positive side. Returned per pair with unit diagonal.
pub fn sign_probabilities(correlations: &[DMatrix<f64>]) -> DMatrix<f64> {
    assert!(!correlations.is_empty());
    let p = correlations[0].nrows();
    let n = correlations.len() as f64;
    let mut ps = DMatrix::from_element(p, p, 1.0);
    for (i, j) in edge_pairs(p) {
        let pos = correlations.iter().filter(|r| r[(i, j)] >= 0.0).count() as f64;
        let value = (pos / n).max(1.0 - pos / n);
        ps[(i, j)] = value;
        ps[(j, i)] = value;
    }
    ps
}

/// Shortest empirical interval containing ceil(gamma * n) of the samples
/// (Chen-Shao sliding window over the sorted sample).
pub fn hpd_interval(samples: &[f64], gamma: f64) -> Result<(f64, f64)> {
    const MIN_SAMPLES: usize = 20;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if !(0.0 < gamma && gamma <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "HPD level gamma must lie in (0, 1], got {gamma}"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let window = ((gamma * n as f64).ceil() as usize).clamp(1, n);
    let mut best = (sorted[0], sorted[window - 1]);
    for start in 1..=n - window {
        let (lo, hi) = (sorted[start], sorted[start + window - 1]);
        if hi - lo < best.1 - best.0 {
            best = (lo, hi);
        }
    }
    Ok(best)
}

/// R^H: per-pair indicator of the HPD interval excluding zero.
pub fn classify_hpd(trace: &ChainTrace, gamma: f64) -> Result<DMatrix<u8>> {
    let correlations = correlation_samples(trace)?;
    let p = trace.p;
    let mut out = DMatrix::zeros(p, p);
    for (i, j) in edge_pairs(p) {
        let values: Vec<f64> = correlations.iter().map(|r| r[(i, j)]).collect();
        let (lo, hi) = hpd_interval(&values, gamma)?;
        let excluded = u8::from(lo > 0.0 || hi < 0.0);
        out[(i, j)] = excluded;
        out[(j, i)] = excluded;
    }
    Ok(out)
}

/// Confusion-table summaries over the upper-triangle slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision_metric: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: f64,
}

pub fn confusion_metrics(estimate: &[bool], truth: &[bool]) -> Result<BenchmarkMetrics> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch(
            "estimate and truth indicator lengths differ".into(),
        ));
    }
    let (mut tp, mut fp, mut tn, mut fnn) = (0.0, 0.0, 0.0, 0.0);
    for (&e, &t) in estimate.iter().zip(truth) {
        match (e, t) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, false) => tn += 1.0,
            (false, true) => fnn += 1.0,
        }
    }
    let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
    let sensitivity = ratio(tp, tp + fnn);
    let specificity = ratio(tn, tn + fp);
    let precision_metric = ratio(tp, tp + fp);
    let f1 = match (precision_metric, sensitivity) {
        (Some(pr), Some(se)) if pr + se > 0.0 => Some(2.0 * pr * se / (pr + se)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    let accuracy = (tp + tn) / (tp + tn + fp + fnn);
    Ok(BenchmarkMetrics {
        sensitivity,
        specificity,
        precision_metric,
        f1,
        accuracy,
    })
}

/// Upper-triangle indicator vector of a binary matrix, slot order.
pub fn indicator_from_matrix(m: &DMatrix<u8>) -> Vec<bool> {
    edge_pairs(m.nrows()).map(|(i, j)| m[(i, j)] != 0).collect()
}

/// Pair category from the ground truth (G_0, R_0): conditionally independent
/// and independent, conditionally independent but dependent, or dependent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairCategory {
    #[serde(rename = "CI-I")]
    CiI,
    #[serde(rename = "CI-D")]
    CiD,
    #[serde(rename = "CD-D")]
    CdD,
}

impl PairCategory {
    pub const ALL: [PairCategory; 3] = [PairCategory::CiI, PairCategory::CiD, PairCategory::CdD];

    pub fn label(self) -> &'static str {
        match self {
            PairCategory::CiI => "CI-I",
            PairCategory::CiD => "CI-D",
            PairCategory::CdD => "CD-D",
        }
    }
}

/// One replicate's log mean squared error within a category, with a sentinel
/// for an exactly-zero error (log MSE would be -infinity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LogMse {
    Exact,
    Value(f64),
}

/// Per-category log MSE, one entry per replicate estimate. Categories are
/// per upper-triangle slot; the mean squared error is taken over the slots
/// in the category, then logged (natural log). All three categories must be
/// populated; see [`logmse_by_category`] for truths that only realize some.
pub fn logmse_stratified(
    estimates: &[DMatrix<f64>],
    truth: &DMatrix<f64>,
    categories: &[PairCategory],
) -> Result<Vec<(PairCategory, Vec<LogMse>)>> {
    for cat in PairCategory::ALL {
        if !categories.contains(&cat) {
            return Err(Error::InvalidInput(format!(
                "category {} has no pairs",
                cat.label()
            )));
        }
    }
    logmse_by_category(estimates, truth, categories)
}

/// Like [`logmse_stratified`] but silently skips categories with no pairs.
pub fn logmse_by_category(
    estimates: &[DMatrix<f64>],
    truth: &DMatrix<f64>,
    categories: &[PairCategory],
) -> Result<Vec<(PairCategory, Vec<LogMse>)>> {
    let p = truth.nrows();
    if categories.len() != n_edge_slots(p) {
        return Err(Error::DimensionMismatch(
            "one category label per upper-triangle slot required".into(),
        ));
    }
    let mut out = Vec::new();
    for cat in PairCategory::ALL {
        let slots: Vec<(usize, usize)> = edge_pairs(p)
            .zip(categories)
            .filter(|(_, &c)| c == cat)
            .map(|(pair, _)| pair)
            .collect();
        if slots.is_empty() {
            continue;
        }
        let mut per_replicate = Vec::with_capacity(estimates.len());
        for est in estimates {
            if est.nrows() != p {
                return Err(Error::DimensionMismatch(
                    "estimate dimension differs from truth".into(),
                ));
            }
            let mse = slots
                .iter()
                .map(|&(i, j)| (est[(i, j)] - truth[(i, j)]).powi(2))
                .sum::<f64>()
                / slots.len() as f64;
            per_replicate.push(if mse == 0.0 {
                LogMse::Exact
            } else {
                LogMse::Value(mse.ln())
            });
        }
        out.push((cat, per_replicate));
    }
    Ok(out)
}

/// Effective sample size by Geyer's initial positive sequence estimator.
pub fn effective_sample_size(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return n as f64;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let var = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let mut sum_rho = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / var;
        if pair <= 0.0 {
            break;
        }
        sum_rho += pair;
        lag += 2;
    }
    (n as f64 / (1.0 + 2.0 * sum_rho)).min(n as f64)
}

/// HPD intervals at one level, per pair (unit-diagonal conventions: diagonal
/// intervals are [1, 1]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpdSummary {
    pub gamma: f64,
    pub lo: Vec<Vec<f64>>,
    pub hi: Vec<Vec<f64>>,
}

/// Full posterior summary of one chain, serializable to the documented JSON
/// schema. `bf` entries at pe = 1 serialize as the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub pe: Vec<Vec<f64>>,
    pub bf: Vec<Vec<serde_json::Value>>,
    pub graph: Vec<(usize, usize)>,
    #[serde(rename = "K_hat")]
    pub k_hat: Vec<Vec<f64>>,
    #[serde(rename = "R_hat")]
    pub r_hat: Vec<Vec<f64>>,
    pub ps: Vec<Vec<f64>>,
    pub hpd: HpdSummary,
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn bf_to_json(bf: &DMatrix<f64>) -> Vec<Vec<serde_json::Value>> {
    (0..bf.nrows())
        .map(|i| {
            (0..bf.ncols())
                .map(|j| {
                    let v = bf[(i, j)];
                    if v.is_finite() {
                        serde_json::json!(v)
                    } else {
                        serde_json::json!("inf")
                    }
                })
                .collect()
        })
        .collect()
}

/// Compute every reported estimate from a trace.
pub fn summarize(trace: &ChainTrace, gamma: f64) -> Result<PosteriorSummary> {
    let p = trace.p;
    let pe = edge_inclusion_probabilities(trace)?;
    let (graph, bf_slots) = estimate_graph(&pe, p, BF_THRESHOLD);
    let k_hat = estimate_precision(trace, &graph)?;
    let correlations = correlation_samples(trace)?;
    let mut r_hat = DMatrix::zeros(p, p);
    for r in &correlations {
        r_hat += r;
    }
    r_hat /= correlations.len() as f64;
    for i in 0..p {
        r_hat[(i, i)] = 1.0;
    }
    let ps = sign_probabilities(&correlations);

    let mut pe_m = DMatrix::from_element(p, p, 1.0);
    let mut bf_m = DMatrix::from_element(p, p, f64::INFINITY);
    for (slot, (i, j)) in edge_pairs(p).enumerate() {
        pe_m[(i, j)] = pe[slot];
        pe_m[(j, i)] = pe[slot];
        bf_m[(i, j)] = bf_slots[slot];
        bf_m[(j, i)] = bf_slots[slot];
    }
    let mut lo = DMatrix::from_element(p, p, 1.0);
    let mut hi = DMatrix::from_element(p, p, 1.0);
    for (i, j) in edge_pairs(p) {
        let values: Vec<f64> = correlations.iter().map(|r| r[(i, j)]).collect();
        let (l, h) = hpd_interval(&values, gamma)?;
        lo[(i, j)] = l;
        lo[(j, i)] = l;
        hi[(i, j)] = h;
        hi[(j, i)] = h;
    }

    Ok(PosteriorSummary {
        pe: matrix_to_rows(&pe_m),
        bf: bf_to_json(&bf_m),
        graph: graph.edges(),
        k_hat: matrix_to_rows(&k_hat),
        r_hat: matrix_to_rows(&r_hat),
        ps: matrix_to_rows(&ps),
        hpd: HpdSummary {
            gamma,
            lo: matrix_to_rows(&lo),
            hi: matrix_to_rows(&hi),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::TraceSample;
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn trace_from_samples(p: usize, samples: Vec<TraceSample>) -> ChainTrace {
        ChainTrace {
            p,
            n_taxa: 0,
            model: "graphical".into(),
            n_iterations: 0,
            warmup: 0,
            thin: 1,
            seed: 0,
            delta_hash: String::new(),
            samples,
        }
    }

    fn sample(edges: Vec<u8>, triu: Vec<f64>) -> TraceSample {
        TraceSample {
            iteration: 0,
            edges,
            precision_triu: triu,
        }
    }

    #[test]
    fn pe_counts_edge_indicators() {
        // g_12 over 4 samples: 1, 1, 0, 1 -> pe = 0.75.
        let samples = [1u8, 1, 0, 1]
            .iter()
            .map(|&g| sample(vec![g], vec![1.0, 0.0, 1.0]))
            .collect();
        let trace = trace_from_samples(2, samples);
        assert_eq!(edge_inclusion_probabilities(&trace).unwrap(), vec![0.75]);
    }

    #[test]
    fn empty_trace_is_an_error() {
        let trace = trace_from_samples(2, Vec::new());
        assert!(matches!(
            edge_inclusion_probabilities(&trace),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn bf_threshold_boundary() {
        // pe at the 10^(1/2) boundary is included; below it is not.
        let boundary = BF_THRESHOLD / (1.0 + BF_THRESHOLD);
        assert_relative_eq!(boundary, 0.7597, epsilon = 5e-5);
        let pe = [boundary, 0.5, 0.9, 1.0, 0.1, 0.2];
        let (g, bf) = estimate_graph(&pe, 4, BF_THRESHOLD);
        assert!(g.has_edge(0, 1)); // slot 0 at the boundary
        assert!(!g.has_edge(0, 2)); // pe = 0.5 -> BF = 1
        assert!(g.has_edge(0, 3)); // pe = 0.9 -> BF = 9
        assert!(g.has_edge(1, 2)); // pe = 1 -> BF = +inf
        assert!(!g.has_edge(1, 3));
        assert!(!g.has_edge(2, 3));
        assert_relative_eq!(bf[1], 1.0, epsilon = 1e-12);
        assert!(bf[3].is_infinite());
    }

    #[test]
    fn bf_pe_bijection_over_grid() {
        for k in 1..1000 {
            let pe = k as f64 / 1000.0;
            let (g, _) = estimate_graph(&[pe], 2, BF_THRESHOLD);
            let expected = pe >= BF_THRESHOLD / (1.0 + BF_THRESHOLD) - 1e-12;
            assert_eq!(g.has_edge(0, 1), expected, "pe = {pe}");
        }
    }

    #[test]
    fn precision_estimate_is_conditional_mean() {
        // Two samples with the edge, mean 2.0; one without (k_12 = 0).
        let samples = vec![
            sample(vec![1], vec![1.0, 1.5, 1.0]),
            sample(vec![1], vec![3.0, 2.5, 3.0]),
            sample(vec![0], vec![2.0, 0.0, 2.0]),
        ];
        let trace = trace_from_samples(2, samples);
        let g = TraitGraph::complete(2);
        let k = estimate_precision(&trace, &g).unwrap();
        assert_relative_eq!(k[(0, 1)], 2.0); // mean of 1.5, 2.5
        assert_relative_eq!(k[(0, 0)], 2.0); // diagonal over all three
        let g0 = TraitGraph::empty(2);
        let k0 = estimate_precision(&trace, &g0).unwrap();
        assert_eq!(k0[(0, 1)], 0.0);
    }

    #[test]
    fn precision_estimate_errors_without_consistent_samples() {
        let samples = vec![sample(vec![0], vec![1.0, 0.0, 1.0])];
        let trace = trace_from_samples(2, samples);
        let g = TraitGraph::complete(2);
        match estimate_precision(&trace, &g) {
            Err(Error::InconsistentEstimate { entries }) => assert_eq!(entries, vec![(0, 1)]),
            other => panic!("expected InconsistentEstimate, got {other:?}"),
        }
    }

    #[test]
    fn correlation_of_single_sample() {
        // K = [[1, -0.5], [-0.5, 1]] -> R_12 = 0.5.
        let samples = vec![sample(vec![1], vec![1.0, -0.5, 1.0])];
        let trace = trace_from_samples(2, samples);
        let r = estimate_correlation(&trace).unwrap();
        assert_relative_eq!(r[(0, 1)], 0.5, epsilon = 1e-12);
        assert_eq!(r[(0, 0)], 1.0);
    }

    #[test]
    fn correlation_entries_stay_bounded() {
        let mut rng = rng_from_seed(2);
        let mut samples = Vec::new();
        for _ in 0..100 {
            // Random PD precision via A A^T + I.
            let a = DMatrix::from_fn(3, 3, |_, _| {
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
            });
            let k = &a * a.transpose() + DMatrix::identity(3, 3);
            let mut triu = Vec::new();
            for i in 0..3 {
                for j in i..3 {
                    triu.push(k[(i, j)]);
                }
            }
            samples.push(sample(vec![1, 1, 1], triu));
        }
        let trace = trace_from_samples(3, samples);
        for r in correlation_samples(&trace).unwrap() {
            for (i, j) in edge_pairs(3) {
                assert!(r[(i, j)].abs() <= 1.0 + 1e-12);
                assert_relative_eq!(r[(i, j)], r[(j, i)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hpd_matches_normal_quantiles() {
        let mut rng = rng_from_seed(7);
        let samples: Vec<f64> = (0..100_000)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let (lo, hi) = hpd_interval(&samples, 0.95).unwrap();
        assert_relative_eq!(lo, -1.96, epsilon = 0.05);
        assert_relative_eq!(hi, 1.96, epsilon = 0.05);
    }

    #[test]
    fn hpd_degenerate_cases() {
        let constant = vec![2.5; 30];
        assert_eq!(hpd_interval(&constant, 0.9).unwrap(), (2.5, 2.5));
        let spread: Vec<f64> = (0..30).map(|i| i as f64).collect();
        assert_eq!(hpd_interval(&spread, 1.0).unwrap(), (0.0, 29.0));
        assert!(matches!(
            hpd_interval(&[1.0; 5], 0.9),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn hpd_window_is_minimal() {
        let mut rng = rng_from_seed(13);
        let samples: Vec<f64> = (0..500)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * z // skewed, to exercise asymmetry
            })
            .collect();
        let (lo, hi) = hpd_interval(&samples, 0.9).unwrap();
        let mut sorted = samples.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let window = (0.9f64 * 500.0).ceil() as usize;
        for start in 0..=sorted.len() - window {
            assert!(sorted[start + window - 1] - sorted[start] >= hi - lo - 1e-12);
        }
    }

    #[test]
    fn classify_hpd_signs() {
        // All-positive correlation samples -> 1; symmetric about 0 -> 0.
        let mut samples = Vec::new();
        for t in 0..40 {
            let r = 0.5 + 0.01 * (t % 5) as f64;
            // K with negative off-diagonal gives positive correlation.
            samples.push(sample(vec![1], vec![1.0, -r, 1.0]));
        }
        let trace = trace_from_samples(2, samples);
        assert_eq!(classify_hpd(&trace, 0.95).unwrap()[(0, 1)], 1);

        let mut symmetric = Vec::new();
        for t in 0..40 {
            let r = if t % 2 == 0 { 0.3 } else { -0.3 };
            symmetric.push(sample(vec![1], vec![1.0, r, 1.0]));
        }
        let trace = trace_from_samples(2, symmetric);
        assert_eq!(classify_hpd(&trace, 0.95).unwrap()[(0, 1)], 0);
    }

    #[test]
    fn confusion_metric_identities() {
        let truth = vec![true, true, false, false, false, false, false, false, false, false];
        let estimate = vec![true, false, true, false, false, false, false, false, false, false];
        // 1 TP, 1 FN, 1 FP, 7 TN.
        let m = confusion_metrics(&estimate, &truth).unwrap();
        assert_relative_eq!(m.sensitivity.unwrap(), 0.5);
        assert_relative_eq!(m.precision_metric.unwrap(), 0.5);
        assert_relative_eq!(m.f1.unwrap(), 0.5);
        assert_relative_eq!(m.accuracy, 0.8);
        assert_relative_eq!(m.specificity.unwrap(), 0.875);

        let perfect = confusion_metrics(&truth, &truth).unwrap();
        assert_eq!(perfect.sensitivity, Some(1.0));
        assert_eq!(perfect.specificity, Some(1.0));
        assert_eq!(perfect.accuracy, 1.0);

        let complement: Vec<bool> = truth.iter().map(|&t| !t).collect();
        let worst = confusion_metrics(&complement, &truth).unwrap();
        assert_eq!(worst.sensitivity, Some(0.0));
        assert_eq!(worst.specificity, Some(0.0));
    }

    #[test]
    fn f1_absent_when_undefined() {
        // No predicted positives and no true positives -> precision undefined.
        let m = confusion_metrics(&[false, false], &[false, false]).unwrap();
        assert!(m.precision_metric.is_none());
        assert!(m.sensitivity.is_none());
        assert!(m.f1.is_none());
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn logmse_values_and_exact_flag() {
        // p = 3, one pair per category.
        let truth = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 1.0, 0.0, 0.2, 0.0, 1.0]);
        let cats = vec![PairCategory::CdD, PairCategory::CiD, PairCategory::CiI];
        let exact = truth.clone();
        let mut off = truth.clone();
        off[(0, 1)] = 1.5; // CD-D squared error 1 -> log MSE 0
        off[(1, 0)] = 1.5;
        let out = logmse_stratified(&[exact, off], &truth, &cats).unwrap();
        let cdd = &out.iter().find(|(c, _)| *c == PairCategory::CdD).unwrap().1;
        assert_eq!(cdd[0], LogMse::Exact);
        assert_eq!(cdd[1], LogMse::Value(0.0));
        let cii = &out.iter().find(|(c, _)| *c == PairCategory::CiI).unwrap().1;
        assert_eq!(cii[1], LogMse::Exact); // untouched entries stay exact
    }

    #[test]
    fn logmse_rejects_empty_category() {
        let truth = DMatrix::identity(2, 2);
        let cats = vec![PairCategory::CdD]; // CI-I and CI-D are empty
        assert!(logmse_stratified(&[truth.clone()], &truth, &cats).is_err());
    }

    #[test]
    fn ess_of_iid_samples_is_near_n() {
        let mut rng = rng_from_seed(3);
        let samples: Vec<f64> = (0..4000)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let ess = effective_sample_size(&samples);
        assert!(ess > 2500.0, "iid ESS too low: {ess}");
    }

    #[test]
    fn ess_detects_high_autocorrelation() {
        let mut rng = rng_from_seed(4);
        let mut x = 0.0;
        let samples: Vec<f64> = (0..4000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = 0.99 * x + z * (1.0f64 - 0.99 * 0.99).sqrt();
                x
            })
            .collect();
        let ess = effective_sample_size(&samples);
        assert!(ess < 500.0, "AR(0.99) ESS too high: {ess}");
    }

    #[test]
    fn summary_serializes_inf_as_string() {
        let samples = vec![
            sample(vec![1], vec![1.0, -0.5, 1.0]);
            25
        ];
        let trace = trace_from_samples(2, samples);
        let summary = summarize(&trace, 0.95).unwrap();
        let json = serde_json::to_string(&summary).unwrap();
        assert!(json.contains("\"inf\""));
        assert_eq!(summary.graph, vec![(0, 1)]);
        assert_relative_eq!(summary.r_hat[0][1], 0.5, epsilon = 1e-12);
    }
}
