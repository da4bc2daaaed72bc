//! Tree covariance and the data sufficient statistic.
//!
//! The graphical and full models see the data only through the p x p matrix
//! Delta = C^t Upsilon^-1 C with C the tip traits centered at the root prior
//! mean and Upsilon the tree covariance (shared path lengths plus the
//! integrated-out root term). `compute_delta_dense` forms Upsilon and solves
//! directly in O(N^3) as a reference; `compute_delta_pruning` accumulates the
//! same quadratic form from independent contrasts in one O(N p^2) post-order
//! pass.

use super::{PhyloTree, RootPrior, TraitMatrix};
use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, RowDVector};

/// N x N tree covariance Upsilon: entry (i, j) is the root-to-MRCA path
/// length of tips i and j plus 1/tau0.
pub fn tree_covariance(tree: &PhyloTree, root_prior: &RootPrior) -> DMatrix<f64> {
    let n = tree.n_tips();
    let depths = tree.depths();
    let mut v = DMatrix::zeros(n, n);
    // Tips below each node: pairs split across the two child subtrees of an
    // internal node have that node as their MRCA.
    let mut tips_below: Vec<Vec<usize>> = vec![Vec::new(); tree.n_nodes()];
    for id in tree.postorder() {
        if tree.is_tip(id) {
            tips_below[id].push(id);
        } else {
            let children = &tree.node(id).children;
            let (left, right) = (&tips_below[children[0]], &tips_below[children[1]]);
            for &a in left {
                for &b in right {
                    v[(a, b)] = depths[id];
                    v[(b, a)] = depths[id];
                }
            }
            let merged: Vec<usize> = left.iter().chain(right.iter()).copied().collect();
            tips_below[id] = merged;
        }
    }
    for i in 0..n {
        v[(i, i)] = depths[i];
    }
    let tau_inv = 1.0 / root_prior.sample_size;
    v.add_scalar_mut(tau_inv);
    v
}

fn centered(traits: &TraitMatrix, root_prior: &RootPrior) -> Result<DMatrix<f64>> {
    let p = traits.n_traits();
    if root_prior.mean.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "root prior mean has length {}, traits have {p} columns",
            root_prior.mean.len()
        )));
    }
    let mut c = traits.values.clone();
    for j in 0..p {
        c.column_mut(j).add_scalar_mut(-root_prior.mean[j]);
    }
    Ok(c)
}

/// Reference O(N^3) evaluation of Delta via a Cholesky solve against the
/// full tree covariance.
pub fn compute_delta_dense(
    tree: &PhyloTree,
    traits: &TraitMatrix,
    root_prior: &RootPrior,
) -> Result<DMatrix<f64>> {
    if traits.n_taxa() != tree.n_tips() {
        return Err(Error::DimensionMismatch(format!(
            "{} trait rows vs {} tips",
            traits.n_taxa(),
            tree.n_tips()
        )));
    }
    let upsilon = tree_covariance(tree, root_prior);
    let chol = Cholesky::new(upsilon).ok_or(Error::SingularTreeCovariance)?;
    let c = centered(traits, root_prior)?;
    // Z = L^-1 C, Delta = Z^t Z.
    let z = chol
        .l()
        .solve_lower_triangular(&c)
        .ok_or(Error::SingularTreeCovariance)?;
    Ok(z.transpose() * z)
}

/// O(N p^2) evaluation of Delta by post-order contrast accumulation.
///
/// Each internal node contributes the outer product of its two-child
/// contrast weighted by the summed child variances; children merge by
/// precision weighting; the root contributes a final contrast against the
/// prior mean with the root prior variance added.
pub fn compute_delta_pruning(
    tree: &PhyloTree,
    traits: &TraitMatrix,
    root_prior: &RootPrior,
) -> Result<DMatrix<f64>> {
    let n = tree.n_tips();
    let p = traits.n_traits();
    if traits.n_taxa() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} trait rows vs {} tips",
            traits.n_taxa(),
            n
        )));
    }
    let _ = centered(traits, root_prior)?; // dimension check on mu0

    // Per node: partial mean vector and accumulated extra variance above the
    // node's subtree merge (branch to the parent not yet added).
    let mut mean: Vec<Option<RowDVector<f64>>> = vec![None; tree.n_nodes()];
    let mut extra_var = vec![0.0f64; tree.n_nodes()];
    let mut delta = DMatrix::zeros(p, p);

    let contrast = |a: &RowDVector<f64>, b: &RowDVector<f64>, var: f64,
                        delta: &mut DMatrix<f64>|
     -> Result<()> {
        if var <= 0.0 {
            return Err(Error::SingularTreeCovariance);
        }
        let d = a - b;
        delta.syger(1.0 / var, &d.transpose(), &d.transpose(), 1.0);
        Ok(())
    };

    for id in tree.postorder() {
        if tree.is_tip(id) {
            mean[id] = Some(traits.values.row(id).into_owned());
            extra_var[id] = 0.0;
        } else {
            let children = tree.node(id).children.clone();
            let va = extra_var[children[0]] + tree.node(children[0]).branch_length.unwrap();
            let vb = extra_var[children[1]] + tree.node(children[1]).branch_length.unwrap();
            let xa = mean[children[0]].take().unwrap();
            let xb = mean[children[1]].take().unwrap();
            contrast(&xa, &xb, va + vb, &mut delta)?;
            mean[id] = Some((xa * vb + xb * va) / (va + vb));
            extra_var[id] = va * vb / (va + vb);
        }
    }

    let root = tree.root();
    let mu0 = RowDVector::from_row_slice(&root_prior.mean);
    let x_root = mean[root].take().unwrap();
    contrast(
        &x_root,
        &mu0,
        extra_var[root] + 1.0 / root_prior.sample_size,
        &mut delta,
    )?;
    // syger only fills the lower triangle; mirror it.
    for i in 0..p {
        for j in i + 1..p {
            delta[(i, j)] = delta[(j, i)];
        }
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gwishart::PrecisionMatrix;
    use crate::phylo::{parse_newick, simulate_traits, simulate_tree};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn cherry() -> PhyloTree {
        parse_newick("(A:1,B:1);").unwrap()
    }

    #[test]
    fn cherry_covariance_is_path_length_bookkeeping() {
        let upsilon = tree_covariance(&cherry(), &RootPrior::standard(1));
        let expected = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_relative_eq!(upsilon, expected, epsilon = 1e-15);
    }

    #[test]
    fn disjoint_subtrees_share_only_root_prior_variance() {
        let tree = parse_newick("((A:1,B:1):1,(C:1,D:1):1);").unwrap();
        let prior = RootPrior::new(vec![0.0], 4.0).unwrap();
        let upsilon = tree_covariance(&tree, &prior);
        // A and C have MRCA at the root: shared path 0, plus 1/tau0.
        assert_relative_eq!(upsilon[(0, 2)], 0.25, epsilon = 1e-15);
        assert_relative_eq!(upsilon[(0, 1)], 1.25, epsilon = 1e-15);
    }

    /// Brute-force MRCA oracle: intersect root paths.
    fn covariance_bruteforce(tree: &PhyloTree, prior: &RootPrior) -> DMatrix<f64> {
        let n = tree.n_tips();
        let depths = tree.depths();
        let ancestors = |mut id: usize| -> Vec<usize> {
            let mut path = vec![id];
            while let Some(pa) = tree.node(id).parent {
                path.push(pa);
                id = pa;
            }
            path
        };
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                depths[i] + 1.0 / prior.sample_size
            } else {
                let ai = ancestors(i);
                let aj = ancestors(j);
                let mrca = *ai.iter().find(|a| aj.contains(a)).unwrap();
                depths[mrca] + 1.0 / prior.sample_size
            }
        })
    }

    #[test]
    fn covariance_matches_bruteforce_mrca_oracle() {
        let prior = RootPrior::new(vec![0.0], 2.5).unwrap();
        for seed in 0..5 {
            let tree = simulate_tree(10, seed).unwrap();
            let fast = tree_covariance(&tree, &prior);
            let slow = covariance_bruteforce(&tree, &prior);
            assert_relative_eq!(fast, slow, epsilon = 1e-12);
        }
    }

    #[test]
    fn covariance_is_positive_definite() {
        for seed in 0..5 {
            let tree = simulate_tree(12, seed).unwrap();
            let upsilon = tree_covariance(&tree, &RootPrior::standard(1));
            assert!(Cholesky::new(upsilon).is_some());
        }
    }

    #[test]
    fn delta_is_zero_for_data_at_prior_mean() {
        let tree = simulate_tree(8, 1).unwrap();
        let prior = RootPrior::new(vec![2.0, -1.0], 1.0).unwrap();
        let values = DMatrix::from_fn(8, 2, |_, j| prior.mean[j]);
        let traits = TraitMatrix::new(
            values,
            tree.tip_labels().iter().map(|s| s.to_string()).collect(),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let dense = compute_delta_dense(&tree, &traits, &prior).unwrap();
        let pruning = compute_delta_pruning(&tree, &traits, &prior).unwrap();
        assert!(dense.amax() < 1e-12);
        assert!(pruning.amax() < 1e-12);
    }

    #[test]
    fn cherry_delta_matches_hand_inverse() {
        // Unit branches, tau0 = 1, p = 1, tips {0, 2}, mu0 = 0:
        // Upsilon = [[2,1],[1,2]], Upsilon^-1 = [[2,-1],[-1,2]]/3,
        // Delta = [0 2] Upsilon^-1 [0 2]^t = 8/3.
        let tree = cherry();
        let prior = RootPrior::standard(1);
        let traits = TraitMatrix::new(
            DMatrix::from_column_slice(2, 1, &[0.0, 2.0]),
            vec!["A".into(), "B".into()],
            vec!["x".into()],
        )
        .unwrap();
        let dense = compute_delta_dense(&tree, &traits, &prior).unwrap();
        let pruning = compute_delta_pruning(&tree, &traits, &prior).unwrap();
        assert_relative_eq!(dense[(0, 0)], 8.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(pruning[(0, 0)], 8.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn pruning_matches_dense_on_random_instances() {
        let prior = RootPrior::new(vec![0.5, -0.5, 1.0], 2.0).unwrap();
        let k = PrecisionMatrix::identity(3);
        for seed in 0..10 {
            let tree = simulate_tree(8, seed).unwrap();
            let traits = simulate_traits(&tree, &k, &prior, seed + 100).unwrap();
            let dense = compute_delta_dense(&tree, &traits, &prior).unwrap();
            let pruning = compute_delta_pruning(&tree, &traits, &prior).unwrap();
            let scale = 1.0 + dense.amax();
            assert!((&dense - &pruning).amax() < 1e-10 * scale);
        }
    }

    #[test]
    fn expected_delta_is_n_times_inverse_precision() {
        // Matrix-normal second moment: E[Delta] = N K^-1 over replicates.
        let tree = simulate_tree(4, 77).unwrap();
        let k = PrecisionMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[1.0, 0.4, 0.4, 1.0],
        ))
        .unwrap();
        let prior = RootPrior::standard(2);
        let mut total = DMatrix::zeros(2, 2);
        let reps = 5000;
        for seed in 0..reps {
            let traits = simulate_traits(&tree, &k, &prior, seed).unwrap();
            total += compute_delta_pruning(&tree, &traits, &prior).unwrap();
        }
        let mean = total / reps as f64;
        let expected = k.inverse().unwrap() * 4.0;
        assert_relative_eq!(mean, expected, max_relative = 0.1);
    }
}
