//! Random-scan Metropolis-within-Gibbs over (G, K).
//!
//! The data enter only through the sufficient statistic Delta, which is
//! computed once per run (the tree is fixed and the trait data complete).
//! The graphical variant alternates at random between a joint update --- a
//! single-edge-flip Metropolis step on the graph whose acceptance ratio is a
//! ratio of G-Wishart normalizing constants, followed by a precision refresh
//! under the new graph --- and a precision-only Gibbs step. The full variant
//! is a conjugate Wishart Gibbs sampler on the complete graph.

mod trace;

pub use trace::{
    precision_triu_len, read_trace_csv, triu_index, write_trace_csv, ChainTrace, TraceMetadata,
    TraceSample,
};

use crate::error::{Error, Result};
use crate::graph::{n_edge_slots, TraitGraph};
use crate::gwishart::{
    log_norm_const_mc_with_rng, sample_gwishart_with_rng, sample_wishart_with_rng,
    GWishartParams, PrecisionMatrix,
};
use crate::phylo::{compute_delta_pruning, PhyloTree, RootPrior, TraitMatrix};
use crate::rng::{rng_from_seed, Rng};
use nalgebra::DMatrix;
use rand::Rng as _;
use sha2::{Digest, Sha256};
use std::collections::HashMap;

/// Which model is being fitted.
#[derive(Debug, Clone)]
pub enum ModelVariant {
    /// G-Wishart prior on K restricted to a sampled graph, uniform graph prior.
    Graphical { prior: GWishartParams },
    /// Unconstrained Wishart baseline on the complete graph.
    Full { df: f64, rate: DMatrix<f64> },
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub root_prior: RootPrior,
}

impl ModelSpec {
    /// Default graphical model: W_G(3, I_p) prior, standard root prior.
    pub fn graphical_default(p: usize) -> Result<Self> {
        Ok(ModelSpec {
            variant: ModelVariant::Graphical {
                prior: GWishartParams::identity_rate(3.0, p)?,
            },
            root_prior: RootPrior::standard(p),
        })
    }

    /// Default full model: Wishart(2 + p, I_p) prior, standard root prior.
    pub fn full_default(p: usize) -> Result<Self> {
        let spec = ModelSpec {
            variant: ModelVariant::Full {
                df: 2.0 + p as f64,
                rate: DMatrix::identity(p, p),
            },
            root_prior: RootPrior::standard(p),
        };
        spec.validate(p)?;
        Ok(spec)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match &self.variant {
            ModelVariant::Graphical { prior } => {
                if prior.p() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "G-Wishart rate is {}x{}, traits have p = {p}",
                        prior.p(),
                        prior.p()
                    )));
                }
            }
            ModelVariant::Full { df, rate } => {
                if rate.nrows() != p {
                    return Err(Error::DimensionMismatch(format!(
                        "Wishart rate is {}x{}, traits have p = {p}",
                        rate.nrows(),
                        rate.ncols()
                    )));
                }
                if !(*df > p as f64 - 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "full-model Wishart df {df} must exceed p - 1 = {}",
                        p - 1
                    )));
                }
            }
        }
        if self.root_prior.mean.len() != p {
            return Err(Error::DimensionMismatch(
                "root prior mean length does not match trait dimension".into(),
            ));
        }
        Ok(())
    }

    pub fn model_name(&self) -> &'static str {
        match self.variant {
            ModelVariant::Graphical { .. } => "graphical",
            ModelVariant::Full { .. } => "full",
        }
    }
}

/// Chain length and sampler knobs.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub n_iterations: usize,
    pub warmup: usize,
    pub thin: usize,
    /// Monte Carlo samples per normalizing-constant evaluation inside the
    /// acceptance ratio.
    pub mc_samples: usize,
    /// Inner block-Gibbs sweeps per precision refresh.
    pub gibbs_sweeps: usize,
    /// Probability of choosing the joint (G, K) block over a K-only refresh.
    pub graph_move_prob: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_iterations: 20_000,
            warmup: 4_000, // 20%
            thin: 10,
            mc_samples: 1_000,
            gibbs_sweeps: 20,
            graph_move_prob: 0.5,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup >= self.n_iterations {
            return Err(Error::InvalidInput(format!(
                "warmup {} must be below the iteration count {}",
                self.warmup, self.n_iterations
            )));
        }
        if self.thin == 0 || self.mc_samples == 0 || self.gibbs_sweeps == 0 {
            return Err(Error::InvalidInput(
                "thin, mc_samples and gibbs_sweeps must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.graph_move_prob) {
            return Err(Error::InvalidInput(
                "graph_move_prob must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Current MCMC state.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub graph: TraitGraph,
    pub precision: PrecisionMatrix,
    pub iteration: usize,
}

impl ChainState {
    fn debug_validate(&self) {
        debug_assert!(self.precision.check_zero_pattern(&self.graph).is_ok());
    }
}

/// Memoized log prior normalizing constants, keyed by edge set. The prior
/// parameters are fixed for the lifetime of a chain, so these never go
/// stale; posterior constants are re-estimated fresh at every step.
pub struct PriorConstCache {
    mc_samples: usize,
    values: HashMap<Vec<bool>, f64>,
}

impl PriorConstCache {
    pub fn new(mc_samples: usize) -> Self {
        PriorConstCache {
            mc_samples,
            values: HashMap::new(),
        }
    }

    fn get_or_compute(
        &mut self,
        graph: &TraitGraph,
        prior: &GWishartParams,
        rng: &mut Rng,
    ) -> Result<f64> {
        if let Some(&v) = self.values.get(graph.indicator()) {
            return Ok(v);
        }
        let est = log_norm_const_mc_with_rng(graph, prior, self.mc_samples, rng)?;
        self.values.insert(graph.indicator().to_vec(), est.log_value);
        Ok(est.log_value)
    }
}

/// Joint (G, K) update: propose a uniform single-edge flip, accept with the
/// ratio of posterior to prior normalizing constants, and on acceptance
/// immediately redraw K under the new graph.
///
/// Returns whether the proposal was accepted.
pub fn graph_mh_step(
    state: &mut ChainState,
    delta_stat: &DMatrix<f64>,
    n_taxa: usize,
    spec: &ModelSpec,
    mc_samples: usize,
    gibbs_sweeps: usize,
    cache: &mut PriorConstCache,
    rng: &mut Rng,
) -> Result<bool> {
    let prior = match &spec.variant {
        ModelVariant::Graphical { prior } => prior,
        ModelVariant::Full { .. } => {
            return Err(Error::InvalidInput(
                "graph moves only apply to the graphical variant".into(),
            ))
        }
    };
    let p = prior.p();
    let slot = rng.random_range(0..n_edge_slots(p));
    let proposed = state.graph.flip_slot(slot);

    let posterior = GWishartParams::new(prior.df + n_taxa as f64, &prior.rate + delta_stat)?;
    let post_current =
        log_norm_const_mc_with_rng(&state.graph, &posterior, mc_samples, rng)?.log_value;
    let post_proposed =
        log_norm_const_mc_with_rng(&proposed, &posterior, mc_samples, rng)?.log_value;
    let prior_current = cache.get_or_compute(&state.graph, prior, rng)?;
    let prior_proposed = cache.get_or_compute(&proposed, prior, rng)?;

    let log_alpha = (post_proposed - post_current) + (prior_current - prior_proposed);
    let accept = log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha;
    if accept {
        state.graph = proposed;
        let draw = sample_gwishart_with_rng(
            &state.graph,
            &posterior,
            rng,
            Some(&state.precision),
            gibbs_sweeps,
        );
        // The warm start may violate the new graph's zeros; re-draw cold.
        state.precision = match draw {
            Ok(k) => k,
            Err(_) => sample_gwishart_with_rng(&state.graph, &posterior, rng, None, gibbs_sweeps)?,
        };
    }
    state.debug_validate();
    Ok(accept)
}

/// Conjugate precision refresh: K | G ~ W_G(delta + N, D + Delta).
pub fn precision_gibbs_step(
    state: &mut ChainState,
    delta_stat: &DMatrix<f64>,
    n_taxa: usize,
    spec: &ModelSpec,
    gibbs_sweeps: usize,
    rng: &mut Rng,
) -> Result<()> {
    let prior = match &spec.variant {
        ModelVariant::Graphical { prior } => prior,
        ModelVariant::Full { .. } => {
            return Err(Error::InvalidInput(
                "use full_model_gibbs_step for the full variant".into(),
            ))
        }
    };
    let posterior = GWishartParams::new(prior.df + n_taxa as f64, &prior.rate + delta_stat)?;
    state.precision = sample_gwishart_with_rng(
        &state.graph,
        &posterior,
        rng,
        Some(&state.precision),
        gibbs_sweeps,
    )?;
    state.debug_validate();
    Ok(())
}

/// Full-model conjugate update: K ~ Wishart(nu + N, D + Delta); the graph is
/// pinned at the complete graph.
pub fn full_model_gibbs_step(
    state: &mut ChainState,
    delta_stat: &DMatrix<f64>,
    n_taxa: usize,
    spec: &ModelSpec,
    rng: &mut Rng,
) -> Result<()> {
    let (df, rate) = match &spec.variant {
        ModelVariant::Full { df, rate } => (df, rate),
        ModelVariant::Graphical { .. } => {
            return Err(Error::InvalidInput(
                "full_model_gibbs_step only applies to the full variant".into(),
            ))
        }
    };
    let draw = sample_wishart_with_rng(df + n_taxa as f64, &(rate + delta_stat), rng)?;
    state.precision = PrecisionMatrix::new(draw)?;
    state.debug_validate();
    Ok(())
}

fn delta_hash(delta: &DMatrix<f64>) -> String {
    let mut hasher = Sha256::new();
    for v in delta.iter() {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Run a chain on tree-aligned trait data. Delta is computed once by the
/// post-order pruning pass and held fixed for the whole run.
pub fn run_chain(
    tree: &PhyloTree,
    traits: &TraitMatrix,
    spec: &ModelSpec,
    config: &ChainConfig,
    rng_seed: u64,
) -> Result<ChainTrace> {
    let tips = tree.tip_labels();
    if traits.taxon_labels.iter().map(String::as_str).ne(tips.iter().copied()) {
        return Err(Error::LabelMismatch(
            "trait rows are not aligned to the tree tips; call TraitMatrix::align_to".into(),
        ));
    }
    let delta = compute_delta_pruning(tree, traits, &spec.root_prior)?;
    run_chain_with_stat(&delta, tree.n_tips(), spec, config, rng_seed)
}

/// Run a chain directly from a sufficient statistic. With `n_taxa = 0` and a
/// zero statistic this samples the prior.
pub fn run_chain_with_stat(
    delta_stat: &DMatrix<f64>,
    n_taxa: usize,
    spec: &ModelSpec,
    config: &ChainConfig,
    rng_seed: u64,
) -> Result<ChainTrace> {
    let p = delta_stat.nrows();
    spec.validate(p)?;
    config.validate()?;
    if delta_stat.ncols() != p {
        return Err(Error::DimensionMismatch("Delta must be square".into()));
    }

    let mut rng = rng_from_seed(rng_seed);
    let mut cache = PriorConstCache::new(config.mc_samples);

    let mut state = match &spec.variant {
        ModelVariant::Graphical { prior } => {
            let graph = TraitGraph::empty(p);
            let precision =
                sample_gwishart_with_rng(&graph, prior, &mut rng, None, config.gibbs_sweeps)?;
            ChainState {
                graph,
                precision,
                iteration: 0,
            }
        }
        ModelVariant::Full { df, rate } => ChainState {
            graph: TraitGraph::complete(p),
            precision: PrecisionMatrix::new(sample_wishart_with_rng(*df, rate, &mut rng)?)?,
            iteration: 0,
        },
    };

    let mut samples = Vec::new();
    for iteration in 1..=config.n_iterations {
        match &spec.variant {
            ModelVariant::Graphical { .. } => {
                if rng.random::<f64>() < config.graph_move_prob {
                    graph_mh_step(
                        &mut state,
                        delta_stat,
                        n_taxa,
                        spec,
                        config.mc_samples,
                        config.gibbs_sweeps,
                        &mut cache,
                        &mut rng,
                    )?;
                } else {
                    precision_gibbs_step(
                        &mut state,
                        delta_stat,
                        n_taxa,
                        spec,
                        config.gibbs_sweeps,
                        &mut rng,
                    )?;
                }
            }
            ModelVariant::Full { .. } => {
                full_model_gibbs_step(&mut state, delta_stat, n_taxa, spec, &mut rng)?;
            }
        }
        state.iteration = iteration;
        if iteration > config.warmup && (iteration - config.warmup) % config.thin == 0 {
            samples.push(TraceSample::from_state(&state, p));
        }
    }

    Ok(ChainTrace {
        p,
        n_taxa,
        model: spec.model_name().to_string(),
        n_iterations: config.n_iterations,
        warmup: config.warmup,
        thin: config.thin,
        seed: rng_seed,
        delta_hash: delta_hash(delta_stat),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::edge_pairs;
    use approx::assert_relative_eq;
    use nalgebra::Cholesky;

    fn zero_delta(p: usize) -> DMatrix<f64> {
        DMatrix::zeros(p, p)
    }

    #[test]
    fn full_variant_records_complete_graphs_only() {
        let spec = ModelSpec::full_default(3).unwrap();
        let config = ChainConfig {
            n_iterations: 50,
            warmup: 10,
            thin: 2,
            ..ChainConfig::default()
        };
        let trace = run_chain_with_stat(&zero_delta(3), 0, &spec, &config, 4).unwrap();
        assert!(!trace.samples.is_empty());
        for sample in &trace.samples {
            assert!(sample.edges.iter().all(|&g| g == 1));
        }
    }

    #[test]
    fn chain_is_seed_deterministic() {
        let spec = ModelSpec::graphical_default(3).unwrap();
        let config = ChainConfig {
            n_iterations: 200,
            warmup: 50,
            thin: 5,
            mc_samples: 50,
            ..ChainConfig::default()
        };
        let a = run_chain_with_stat(&zero_delta(3), 0, &spec, &config, 8).unwrap();
        let b = run_chain_with_stat(&zero_delta(3), 0, &spec, &config, 8).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn precision_step_preserves_zeros_and_pd() {
        let spec = ModelSpec::graphical_default(4).unwrap();
        let mut rng = rng_from_seed(3);
        let graph = TraitGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let prior = match &spec.variant {
            ModelVariant::Graphical { prior } => prior.clone(),
            _ => unreachable!(),
        };
        let mut state = ChainState {
            precision: sample_gwishart_with_rng(&graph, &prior, &mut rng, None, 20).unwrap(),
            graph,
            iteration: 0,
        };
        let delta = DMatrix::identity(4, 4) * 3.0;
        for _ in 0..50 {
            precision_gibbs_step(&mut state, &delta, 10, &spec, 10, &mut rng).unwrap();
            for (i, j) in edge_pairs(4) {
                if !state.graph.has_edge(i, j) {
                    assert_eq!(state.precision.values()[(i, j)], 0.0);
                }
            }
            assert!(Cholesky::new(state.precision.values().clone()).is_some());
        }
    }

    #[test]
    fn precision_step_reduces_to_prior_without_data() {
        // Delta = 0, N = 0 draws from W_G(delta, D); check the complete-graph
        // mean (delta + p - 1) D^-1 = 4 I / 1 at p = 2, D = I.
        let spec = ModelSpec::graphical_default(2).unwrap();
        let mut rng = rng_from_seed(9);
        let mut state = ChainState {
            graph: TraitGraph::complete(2),
            precision: PrecisionMatrix::identity(2),
            iteration: 0,
        };
        let delta = zero_delta(2);
        let mut mean = DMatrix::zeros(2, 2);
        let steps = 5000;
        for _ in 0..steps {
            precision_gibbs_step(&mut state, &delta, 0, &spec, 20, &mut rng).unwrap();
            mean += state.precision.values();
        }
        mean /= steps as f64;
        assert_relative_eq!(
            mean,
            DMatrix::identity(2, 2) * 4.0,
            epsilon = 0.1,
            max_relative = 0.05
        );
    }

    #[test]
    fn full_model_posterior_mean_matches_wishart_identity() {
        let p = 3;
        let n = 40usize;
        let spec = ModelSpec::full_default(p).unwrap();
        let mut delta = DMatrix::identity(p, p) * 10.0;
        delta[(0, 1)] = 2.0;
        delta[(1, 0)] = 2.0;
        let mut rng = rng_from_seed(17);
        let mut state = ChainState {
            graph: TraitGraph::complete(p),
            precision: PrecisionMatrix::identity(p),
            iteration: 0,
        };
        let mut mean = DMatrix::zeros(p, p);
        let steps = 5000;
        for _ in 0..steps {
            full_model_gibbs_step(&mut state, &delta, n, &spec, &mut rng).unwrap();
            mean += state.precision.values();
        }
        mean /= steps as f64;
        let (df, rate) = match &spec.variant {
            ModelVariant::Full { df, rate } => (*df, rate.clone()),
            _ => unreachable!(),
        };
        let expected =
            Cholesky::new(rate + &delta).unwrap().inverse() * (df + n as f64);
        assert_relative_eq!(mean, expected, epsilon = 0.02, max_relative = 0.05);
    }

    #[test]
    fn rejects_warmup_not_below_iterations() {
        let spec = ModelSpec::graphical_default(2).unwrap();
        let config = ChainConfig {
            n_iterations: 10,
            warmup: 10,
            ..ChainConfig::default()
        };
        assert!(run_chain_with_stat(&zero_delta(2), 0, &spec, &config, 0).is_err());
    }
}
