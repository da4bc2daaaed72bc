//! Normalizing constants I_G(delta, D) of the G-Wishart distribution.
//!
//! Closed forms exist for complete graphs (the Wishart constant) and for
//! decomposable graphs (clique/separator factorization). General graphs use
//! the Monte Carlo construction of Atay-Kayis and Massam: free Cholesky
//! elements are sampled (chi on the diagonal with graph-dependent degrees of
//! freedom, standard normal on free off-diagonals), non-free elements are
//! completed by the zero-constraint recursion, and the constant is the
//! closed-form factor times the expectation of exp of minus half the sum of
//! squared completions.

use super::decomp::{is_decomposable, junction_tree};
use super::GWishartParams;
use crate::error::{Error, Result};
use crate::graph::TraitGraph;
use crate::rng::{derive_seed, rng_from_seed};
use nalgebra::{Cholesky, DMatrix};
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

const LN_2: f64 = std::f64::consts::LN_2;
const LN_PI: f64 = 1.144729885849400174143427351353058711647_f64;
const LN_2PI: f64 = 1.837877066409345483560659472811235279723_f64;

/// Monte Carlo estimate of a log normalizing constant with its delta-method
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormConstEstimate {
    pub log_value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

fn logdet(m: &DMatrix<f64>) -> Result<f64> {
    Cholesky::new(m.clone())
        .map(|c| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
        .ok_or_else(|| Error::NotPositiveDefinite("logdet of a non-PD matrix".into()))
}

/// Exact log constant of the complete-graph case (Wishart with
/// nu = delta + p - 1 under the rate parametrization) for an arbitrary
/// PD rate block.
fn wishart_logconst_block(delta: f64, rate: &DMatrix<f64>) -> Result<f64> {
    let p = rate.nrows();
    if p == 0 {
        return Ok(0.0);
    }
    let pf = p as f64;
    let nu = delta + pf - 1.0;
    let mut value = nu * pf / 2.0 * LN_2 - nu / 2.0 * logdet(rate)?
        + pf * (pf - 1.0) / 4.0 * LN_PI;
    for i in 1..=p {
        value += ln_gamma((nu + 1.0 - i as f64) / 2.0);
    }
    Ok(value)
}

/// Exact log I_G for the complete graph on `p` vertices.
pub fn wishart_log_norm_const_closed(p: usize, params: &GWishartParams) -> Result<f64> {
    if params.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "rate matrix is {}x{}, expected {p}x{p}",
            params.p(),
            params.p()
        )));
    }
    wishart_logconst_block(params.df, &params.rate)
}

fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Exact log I_G for a decomposable graph: sum of clique constants minus
/// separator constants on the marginal rate blocks.
pub fn decomposable_log_norm_const(graph: &TraitGraph, params: &GWishartParams) -> Result<f64> {
    if graph.n_vertices() != params.p() {
        return Err(Error::DimensionMismatch(format!(
            "graph on {} vertices vs {}x{} rate",
            graph.n_vertices(),
            params.p(),
            params.p()
        )));
    }
    if !is_decomposable(graph) {
        return Err(Error::NotDecomposable);
    }
    let (cliques, separators) = junction_tree(graph);
    let mut value = 0.0;
    for clique in &cliques {
        value += wishart_logconst_block(params.df, &submatrix(&params.rate, clique))?;
    }
    for sep in &separators {
        value -= wishart_logconst_block(params.df, &submatrix(&params.rate, sep))?;
    }
    Ok(value)
}

/// Precomputed fixed factors of the Monte Carlo estimator for one (G, D).
struct McSetup {
    p: usize,
    df: f64,
    adj: Vec<Vec<bool>>,
    /// Later-neighbor counts per vertex.
    nu: Vec<usize>,
    /// Upper triangular T with T^t T = D^-1.
    t: DMatrix<f64>,
    /// Closed-form additive constant on the log scale.
    log_const: f64,
    n_nonfree: usize,
}

impl McSetup {
    fn new(graph: &TraitGraph, params: &GWishartParams) -> Result<Self> {
        let p = graph.n_vertices();
        if p != params.p() {
            return Err(Error::DimensionMismatch(format!(
                "graph on {p} vertices vs {}x{} rate",
                params.p(),
                params.p()
            )));
        }
        let mut adj = vec![vec![false; p]; p];
        for (i, j) in graph.edges() {
            adj[i][j] = true;
            adj[j][i] = true;
        }
        let nu: Vec<usize> = (0..p)
            .map(|i| (i + 1..p).filter(|&j| adj[i][j]).count())
            .collect();
        let b: Vec<usize> = (0..p).map(|i| (0..i).filter(|&j| adj[j][i]).count()).collect();
        let d_inv = Cholesky::new(params.rate.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("rate matrix".into()))?
            .inverse();
        let t = Cholesky::new(d_inv)
            .ok_or_else(|| Error::NotPositiveDefinite("inverse rate matrix".into()))?
            .l()
            .transpose();
        let mut log_const = graph.n_edges() as f64 / 2.0 * LN_2PI;
        for i in 0..p {
            let df_i = params.df + nu[i] as f64;
            log_const += df_i / 2.0 * LN_2 + ln_gamma(df_i / 2.0)
                + (df_i + b[i] as f64) * t[(i, i)].ln();
        }
        let n_nonfree = p * (p - 1) / 2 - graph.n_edges();
        Ok(McSetup {
            p,
            df: params.df,
            adj,
            nu,
            t,
            log_const,
            n_nonfree,
        })
    }

    /// One draw of the free elements plus constraint completion; returns
    /// minus half the sum of squared non-free completions.
    fn sample_log_weight(&self, rng: &mut crate::rng::Rng) -> f64 {
        let p = self.p;
        let t = &self.t;
        let mut psi = vec![0.0f64; p * p];
        let mut phi = vec![0.0f64; p * p];
        let mut log_weight = 0.0;
        for i in 0..p {
            let diag: f64 = ChiSquared::new(self.df + self.nu[i] as f64)
                .unwrap()
                .sample(rng)
                .sqrt();
            psi[i * p + i] = diag;
            phi[i * p + i] = diag * t[(i, i)];
            for j in i + 1..p {
                if self.adj[i][j] {
                    let z: f64 = StandardNormal.sample(rng);
                    psi[i * p + j] = z;
                    let mut phi_ij = 0.0;
                    for k in i..=j {
                        phi_ij += psi[i * p + k] * t[(k, j)];
                    }
                    phi[i * p + j] = phi_ij;
                } else {
                    // k_ij = 0 pins phi_ij, which in turn pins psi_ij.
                    let mut dot = 0.0;
                    for l in 0..i {
                        dot += phi[l * p + i] * phi[l * p + j];
                    }
                    let phi_ij = -dot / phi[i * p + i];
                    phi[i * p + j] = phi_ij;
                    let mut carry = 0.0;
                    for k in i..j {
                        carry += psi[i * p + k] * t[(k, j)];
                    }
                    let psi_ij = (phi_ij - carry) / t[(j, j)];
                    psi[i * p + j] = psi_ij;
                    log_weight -= 0.5 * psi_ij * psi_ij;
                }
            }
        }
        log_weight
    }
}

/// Monte Carlo estimate of log I_G(delta, D), deterministic for a fixed seed
/// and independent of the worker-thread count.
pub fn log_norm_const_mc(
    graph: &TraitGraph,
    params: &GWishartParams,
    n_samples: usize,
    rng_seed: u64,
) -> Result<LogNormConstEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidInput(
            "normalizing-constant estimation needs at least one sample".into(),
        ));
    }
    let setup = McSetup::new(graph, params)?;
    if setup.n_nonfree == 0 {
        // Complete graph: every weight is exactly one.
        return Ok(LogNormConstEstimate {
            log_value: setup.log_const,
            std_error: 0.0,
            n_samples,
        });
    }
    const CHUNK: usize = 1024;
    let n_chunks = n_samples.div_ceil(CHUNK);
    let weights: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = rng_from_seed(derive_seed(rng_seed, chunk as u64));
            let count = CHUNK.min(n_samples - chunk * CHUNK);
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                out.push(setup.sample_log_weight(&mut rng));
            }
            out
        })
        .collect();
    Ok(summarize(&setup, &weights))
}

/// Variant drawing from a caller-provided RNG (used inside a running chain
/// where estimates must consume the chain's stream).
pub fn log_norm_const_mc_with_rng(
    graph: &TraitGraph,
    params: &GWishartParams,
    n_samples: usize,
    rng: &mut crate::rng::Rng,
) -> Result<LogNormConstEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidInput(
            "normalizing-constant estimation needs at least one sample".into(),
        ));
    }
    let setup = McSetup::new(graph, params)?;
    if setup.n_nonfree == 0 {
        return Ok(LogNormConstEstimate {
            log_value: setup.log_const,
            std_error: 0.0,
            n_samples,
        });
    }
    let weights: Vec<f64> = (0..n_samples)
        .map(|_| setup.sample_log_weight(rng))
        .collect();
    Ok(summarize(&setup, &weights))
}

fn summarize(setup: &McSetup, weights: &[f64]) -> LogNormConstEstimate {
    let n = weights.len();
    let w_max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = weights.iter().map(|w| (w - w_max).exp()).collect();
    let mean = shifted.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        shifted.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    let std_error = var.sqrt() / (mean * (n as f64).sqrt());
    LogNormConstEstimate {
        log_value: setup.log_const + w_max + mean.ln(),
        std_error,
        n_samples: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn univariate_constant_is_gamma() {
        // p=1, delta=3, D=[1]: log Gamma(3/2) + (3/2) log 2.
        let params = GWishartParams::identity_rate(3.0, 1).unwrap();
        let value = wishart_log_norm_const_closed(1, &params).unwrap();
        assert_relative_eq!(
            value,
            ln_gamma(1.5) + 1.5 * LN_2,
            epsilon = 1e-14
        );
    }

    /// Composite Simpson on [lo, hi] with `n` (even) intervals.
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut total = f(lo) + f(hi);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            total += w * f(lo + k as f64 * h);
        }
        total * h / 3.0
    }

    #[test]
    fn bivariate_constant_matches_quadrature() {
        // Integrate |K|^{1/2} exp(-tr(K)/2) over 2x2 PD matrices
        // K = [[a, c], [c, b]], a,b > 0, c^2 < ab. Substituting
        // c = sqrt(ab) sin(theta) factorizes the triple integral into
        // (int_0^inf a exp(-a/2) da)^2 * int cos^2(theta) dtheta, each
        // evaluated by composite Simpson.
        let params = GWishartParams::identity_rate(3.0, 2).unwrap();
        let closed = wishart_log_norm_const_closed(2, &params).unwrap();
        let radial = simpson(|a| a * (-a / 2.0).exp(), 0.0, 120.0, 12_000);
        let angular = simpson(
            |t| t.cos().powi(2),
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            2_000,
        );
        let total = radial * radial * angular;
        assert_relative_eq!(total.ln(), closed, epsilon = 1e-6);
    }

    #[test]
    fn rate_scaling_shifts_log_constant() {
        // D -> c D multiplies I by c^{-nu p / 2}.
        let p = 3;
        let delta = 3.5;
        let c = 2.75;
        let base = GWishartParams::identity_rate(delta, p).unwrap();
        let scaled = GWishartParams::new(delta, DMatrix::identity(p, p) * c).unwrap();
        let nu = delta + p as f64 - 1.0;
        let shift = -(nu * p as f64 / 2.0) * c.ln();
        let a = wishart_log_norm_const_closed(p, &base).unwrap();
        let b = wishart_log_norm_const_closed(p, &scaled).unwrap();
        assert_relative_eq!(b - a, shift, epsilon = 1e-12);
    }

    #[test]
    fn decomposable_reduces_to_wishart_on_complete_graph() {
        let params = GWishartParams::identity_rate(3.0, 4).unwrap();
        let a = decomposable_log_norm_const(&TraitGraph::complete(4), &params).unwrap();
        let b = wishart_log_norm_const_closed(4, &params).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn decomposable_empty_graph_is_univariate_product() {
        let params = GWishartParams::identity_rate(3.0, 4).unwrap();
        let value = decomposable_log_norm_const(&TraitGraph::empty(4), &params).unwrap();
        assert_relative_eq!(
            value,
            4.0 * (ln_gamma(1.5) + 1.5 * LN_2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn decomposable_rejects_four_cycle() {
        let cycle = TraitGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let params = GWishartParams::identity_rate(3.0, 4).unwrap();
        assert!(matches!(
            decomposable_log_norm_const(&cycle, &params),
            Err(Error::NotDecomposable)
        ));
    }

    #[test]
    fn mc_is_exact_on_complete_graph() {
        let params = GWishartParams::identity_rate(3.0, 5).unwrap();
        let mc = log_norm_const_mc(&TraitGraph::complete(5), &params, 10, 1).unwrap();
        let closed = wishart_log_norm_const_closed(5, &params).unwrap();
        assert_relative_eq!(mc.log_value, closed, epsilon = 1e-12);
        assert_eq!(mc.std_error, 0.0);
    }

    #[test]
    fn mc_matches_decomposable_closed_form_with_general_rate() {
        let chain = TraitGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut rate = DMatrix::identity(4, 4) * 2.0;
        rate[(0, 1)] = 0.7;
        rate[(1, 0)] = 0.7;
        rate[(2, 3)] = -0.5;
        rate[(3, 2)] = -0.5;
        let params = GWishartParams::new(3.0, rate).unwrap();
        let closed = decomposable_log_norm_const(&chain, &params).unwrap();
        let mc = log_norm_const_mc(&chain, &params, 50_000, 7).unwrap();
        assert!(
            (mc.log_value - closed).abs() < 4.0 * mc.std_error.max(1e-6),
            "mc {} closed {} se {}",
            mc.log_value,
            closed,
            mc.std_error
        );
    }

    #[test]
    fn mc_is_seed_deterministic() {
        let cycle = TraitGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let params = GWishartParams::identity_rate(3.0, 4).unwrap();
        let a = log_norm_const_mc(&cycle, &params, 5000, 3).unwrap();
        let b = log_norm_const_mc(&cycle, &params, 5000, 3).unwrap();
        assert_eq!(a.log_value, b.log_value);
        assert_eq!(a.std_error, b.std_error);
    }

    #[test]
    fn mc_rejects_zero_samples() {
        let params = GWishartParams::identity_rate(3.0, 3).unwrap();
        assert!(log_norm_const_mc(&TraitGraph::empty(3), &params, 0, 0).is_err());
    }
}
