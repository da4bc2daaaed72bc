//! G-Wishart distribution: density, sampling, and normalizing constants.
//!
//! The G-Wishart W_G(delta, D) has density proportional to
//! |K|^((delta-2)/2) exp(-tr(D K)/2) over the cone of positive-definite
//! matrices with zeros off the graph G. On the complete graph it reduces to
//! the Wishart with nu = delta + p - 1 degrees of freedom under the rate
//! parametrization.

mod decomp;
mod norm_const;
mod sampler;

pub use decomp::{is_decomposable, junction_tree, maximal_cliques};
pub use norm_const::{
    decomposable_log_norm_const, log_norm_const_mc, log_norm_const_mc_with_rng,
    wishart_log_norm_const_closed, LogNormConstEstimate,
};
pub use sampler::{sample_gwishart, sample_gwishart_with_rng, sample_wishart_with_rng};

use crate::error::{Error, Result};
use crate::graph::{edge_pairs, TraitGraph};
use nalgebra::{Cholesky, DMatrix};

const SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric positive-definite precision matrix, optionally constrained to a
/// graph's zero pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    values: DMatrix<f64>,
}

impl PrecisionMatrix {
    /// Validate symmetry and positive definiteness.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "precision matrix must be square, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (i, j) in edge_pairs(values.nrows()) {
            if (values[(i, j)] - values[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "precision matrix is asymmetric at ({i}, {j})"
                )));
            }
        }
        if Cholesky::new(values.clone()).is_none() {
            return Err(Error::NotPositiveDefinite(
                "precision matrix failed Cholesky factorization".into(),
            ));
        }
        Ok(PrecisionMatrix { values })
    }

    /// Validate and additionally require exact zeros off the graph.
    pub fn new_for_graph(values: DMatrix<f64>, graph: &TraitGraph) -> Result<Self> {
        let m = PrecisionMatrix::new(values)?;
        m.check_zero_pattern(graph)?;
        Ok(m)
    }

    pub fn identity(p: usize) -> Self {
        PrecisionMatrix {
            values: DMatrix::identity(p, p),
        }
    }

    pub fn p(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    /// Inverse via Cholesky (the diffusion covariance).
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        Cholesky::new(self.values.clone())
            .map(|c| c.inverse())
            .ok_or_else(|| {
                Error::NotPositiveDefinite("precision matrix inversion failed".into())
            })
    }

    pub fn check_zero_pattern(&self, graph: &TraitGraph) -> Result<()> {
        if graph.n_vertices() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "graph on {} vertices vs {}x{} matrix",
                graph.n_vertices(),
                self.p(),
                self.p()
            )));
        }
        for (i, j) in edge_pairs(self.p()) {
            if !graph.has_edge(i, j) && self.values[(i, j)] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "non-zero precision entry {} at non-edge ({i}, {j})",
                    self.values[(i, j)]
                )));
            }
        }
        Ok(())
    }
}

/// Shape (degrees of freedom) and rate parameters of a G-Wishart prior.
#[derive(Debug, Clone, PartialEq)]
pub struct GWishartParams {
    pub df: f64,
    pub rate: DMatrix<f64>,
}

impl GWishartParams {
    pub fn new(df: f64, rate: DMatrix<f64>) -> Result<Self> {
        if !(df > 0.0) {
            return Err(Error::InvalidInput(format!(
                "G-Wishart degrees of freedom must be positive, got {df}"
            )));
        }
        if rate.nrows() != rate.ncols() {
            return Err(Error::DimensionMismatch("rate matrix must be square".into()));
        }
        if Cholesky::new(rate.clone()).is_none() {
            return Err(Error::NotPositiveDefinite(
                "rate matrix failed Cholesky factorization".into(),
            ));
        }
        Ok(GWishartParams { df, rate })
    }

    /// The default prior of the graphical variant: W_G(delta, I_p).
    pub fn identity_rate(df: f64, p: usize) -> Result<Self> {
        GWishartParams::new(df, DMatrix::identity(p, p))
    }

    pub fn p(&self) -> usize {
        self.rate.nrows()
    }
}

/// Log of the unnormalized G-Wishart density:
/// ((delta-2)/2) logdet K - tr(D K)/2.
pub fn gwishart_unnormalized_logdensity(
    precision: &PrecisionMatrix,
    params: &GWishartParams,
) -> Result<f64> {
    if precision.p() != params.p() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} precision vs {}x{} rate",
            precision.p(),
            precision.p(),
            params.p(),
            params.p()
        )));
    }
    let chol = Cholesky::new(precision.values().clone()).ok_or_else(|| {
        Error::NotPositiveDefinite("precision matrix failed Cholesky factorization".into())
    })?;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = (&params.rate * precision.values()).trace();
    Ok((params.df - 2.0) / 2.0 * logdet - 0.5 * trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logdensity_at_identity() {
        let p = 4;
        let k = PrecisionMatrix::identity(p);
        let params = GWishartParams::identity_rate(3.0, p).unwrap();
        let ld = gwishart_unnormalized_logdensity(&k, &params).unwrap();
        assert_relative_eq!(ld, -(p as f64) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn logdensity_scaled_identity() {
        // K = 2 I_2, D = I_2, delta = 3: (1/2) log 4 - 2 = log 2 - 2.
        let k = PrecisionMatrix::new(DMatrix::identity(2, 2) * 2.0).unwrap();
        let params = GWishartParams::identity_rate(3.0, 2).unwrap();
        let ld = gwishart_unnormalized_logdensity(&k, &params).unwrap();
        assert_relative_eq!(ld, 2f64.ln() - 2.0, epsilon = 1e-14);
    }

    #[test]
    fn logdensity_decreases_in_trace_for_fixed_det() {
        // Rotate a fixed-determinant K to change tr(DK) with anisotropic D.
        let d = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let params = GWishartParams::new(3.0, d).unwrap();
        let k1 = PrecisionMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]))
            .unwrap();
        let k2 = PrecisionMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 2.0]))
            .unwrap();
        // tr(D k1) = 4.25 > tr(D k2) = 2, same determinant.
        let ld1 = gwishart_unnormalized_logdensity(&k1, &params).unwrap();
        let ld2 = gwishart_unnormalized_logdensity(&k2, &params).unwrap();
        assert!(ld1 < ld2);
    }

    #[test]
    fn rejects_non_pd_precision() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(PrecisionMatrix::new(m).is_err());
    }

    #[test]
    fn rejects_zero_pattern_violation() {
        let g = TraitGraph::empty(2);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(PrecisionMatrix::new_for_graph(m, &g).is_err());
    }

    #[test]
    fn rejects_nonpositive_df() {
        assert!(GWishartParams::identity_rate(0.0, 3).is_err());
    }
}
