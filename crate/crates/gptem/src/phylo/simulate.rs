//! Random trees and forward trait simulation.

use super::{Node, PhyloTree, RootPrior, TraitMatrix};
use crate::error::{Error, Result};
use crate::gwishart::PrecisionMatrix;
use crate::rng::rng_from_seed;
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

/// Simulate a pure-birth (Yule) tree with unit birth rate and `n_tips` tips.
///
/// Lineages split at exponential waiting times; after the last split one more
/// waiting time is drawn and all surviving lineages are cut there, so the
/// tree is ultrametric. Deterministic for a fixed seed.
pub fn simulate_tree(n_tips: usize, rng_seed: u64) -> Result<PhyloTree> {
    if n_tips < 2 {
        return Err(Error::InvalidInput(format!(
            "trees must have at least 2 tips, got {n_tips}"
        )));
    }
    let mut rng = rng_from_seed(rng_seed);

    struct Lineage {
        birth: f64,
        node: usize,
    }
    // Build arena: root first here, reindex to canonical order at the end.
    let mut nodes: Vec<Node> = vec![Node {
        parent: None,
        children: Vec::new(),
        branch_length: None,
        label: None,
    }];
    let mut active: Vec<Lineage> = Vec::new();
    let mut t = 0.0f64;
    for _ in 0..2 {
        let id = nodes.len();
        nodes.push(Node {
            parent: Some(0),
            children: Vec::new(),
            branch_length: None,
            label: None,
        });
        nodes[0].children.push(id);
        active.push(Lineage { birth: t, node: id });
    }
    while active.len() < n_tips {
        let rate = active.len() as f64;
        t += Exp::new(rate).unwrap().sample(&mut rng);
        let k = rng.random_range(0..active.len());
        let split = active.swap_remove(k);
        nodes[split.node].branch_length = Some(t - split.birth);
        for _ in 0..2 {
            let id = nodes.len();
            nodes.push(Node {
                parent: Some(split.node),
                children: Vec::new(),
                branch_length: None,
                label: None,
            });
            nodes[split.node].children.push(id);
            active.push(Lineage { birth: t, node: id });
        }
    }
    let horizon = t + Exp::new(n_tips as f64).unwrap().sample(&mut rng);
    // Sort by node id so tip numbering does not depend on swap_remove order.
    active.sort_by_key(|l| l.node);
    for lineage in &active {
        nodes[lineage.node].branch_length = Some(horizon - lineage.birth);
    }

    // Reindex: tips in traversal order, internal nodes next, root last.
    let mut tips = Vec::new();
    let mut internals = Vec::new();
    let mut stack = vec![0usize];
    while let Some(id) = stack.pop() {
        if nodes[id].children.is_empty() {
            tips.push(id);
        } else if id != 0 {
            internals.push(id);
        }
        for &c in nodes[id].children.iter().rev() {
            stack.push(c);
        }
    }
    let n = tips.len();
    let mut new_id = vec![usize::MAX; nodes.len()];
    for (k, &id) in tips.iter().enumerate() {
        new_id[id] = k;
        nodes[id].label = Some(format!("t{}", k + 1));
    }
    for (k, &id) in internals.iter().enumerate() {
        new_id[id] = n + k;
    }
    new_id[0] = 2 * n - 2;
    let mut out: Vec<Option<Node>> = vec![None; nodes.len()];
    for (old, node) in nodes.into_iter().enumerate() {
        out[new_id[old]] = Some(Node {
            parent: node.parent.map(|p| new_id[p]),
            children: node.children.iter().map(|&c| new_id[c]).collect(),
            branch_length: node.branch_length,
            label: node.label,
        });
    }
    PhyloTree::from_nodes(out.into_iter().map(Option::unwrap).collect())
}

/// Forward-simulate tip traits by Brownian diffusion: the root is drawn from
/// N(mu0, tau0^-1 K^-1) and each child from N(parent, t K^-1).
pub fn simulate_traits(
    tree: &PhyloTree,
    precision: &PrecisionMatrix,
    root_prior: &RootPrior,
    rng_seed: u64,
) -> Result<TraitMatrix> {
    let p = precision.p();
    if root_prior.mean.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "root prior mean has length {}, precision is {p}x{p}",
            root_prior.mean.len()
        )));
    }
    let sigma = precision.inverse()?;
    let chol = Cholesky::new(sigma)
        .ok_or_else(|| Error::NotPositiveDefinite("diffusion covariance".into()))?;
    let l = chol.l();
    let mut rng = rng_from_seed(rng_seed);
    let mut draw = |scale: f64, mean: &DVector<f64>| -> DVector<f64> {
        let z = DVector::from_fn(p, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        mean + scale.sqrt() * (&l * z)
    };

    let n_nodes = tree.n_nodes();
    let mut latent: Vec<Option<DVector<f64>>> = vec![None; n_nodes];
    let mu0 = DVector::from_column_slice(&root_prior.mean);
    latent[tree.root()] = Some(draw(1.0 / root_prior.sample_size, &mu0));
    let mut preorder = tree.postorder();
    preorder.reverse();
    for id in preorder {
        if id == tree.root() {
            continue;
        }
        let parent_value = latent[tree.node(id).parent.unwrap()].clone().unwrap();
        let t = tree.node(id).branch_length.unwrap();
        latent[id] = Some(if t > 0.0 {
            draw(t, &parent_value)
        } else {
            parent_value
        });
    }

    let n = tree.n_tips();
    let values = DMatrix::from_fn(n, p, |i, j| latent[i].as_ref().unwrap()[j]);
    TraitMatrix::new(
        values,
        tree.tip_labels().iter().map(|s| s.to_string()).collect(),
        (0..p).map(|j| format!("trait{}", j + 1)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::parse_newick;

    #[test]
    fn two_tips_is_a_cherry() {
        let tree = simulate_tree(2, 42).unwrap();
        assert_eq!(tree.n_tips(), 2);
        assert_eq!(tree.n_nodes(), 3);
        assert_eq!(tree.node(tree.root()).children.len(), 2);
    }

    #[test]
    fn same_seed_same_tree() {
        let a = simulate_tree(50, 9);
        let b = simulate_tree(50, 9);
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn rejects_single_tip() {
        assert!(simulate_tree(1, 0).is_err());
    }

    #[test]
    fn yule_depth_in_expected_range() {
        // Mean root-to-tip depth over many trees; for a unit-rate Yule tree
        // of 50 tips this sits near H_50 - 1, comfortably inside [0.5, 50].
        let mut total = 0.0;
        let reps = 1000;
        for seed in 0..reps {
            let tree = simulate_tree(50, seed).unwrap();
            let depths = tree.depths();
            total += depths[..50].iter().sum::<f64>() / 50.0;
        }
        let mean = total / reps as f64;
        assert!(mean > 0.5 && mean < 50.0, "mean depth {mean}");
    }

    #[test]
    fn traits_collapse_to_prior_mean_in_zero_variance_limit() {
        let tree = parse_newick("((A:0,B:0):0,C:1e-12);").unwrap();
        let prior = RootPrior::new(vec![3.0, -1.0], 1e12).unwrap();
        let k = PrecisionMatrix::identity(2);
        let traits = simulate_traits(&tree, &k, &prior, 5).unwrap();
        for i in 0..3 {
            assert!((traits.values[(i, 0)] - 3.0).abs() < 1e-4);
            assert!((traits.values[(i, 1)] + 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn trait_simulation_is_deterministic() {
        let tree = simulate_tree(10, 3).unwrap();
        let k = PrecisionMatrix::identity(3);
        let prior = RootPrior::standard(3);
        let a = simulate_traits(&tree, &k, &prior, 11).unwrap();
        let b = simulate_traits(&tree, &k, &prior, 11).unwrap();
        assert_eq!(a, b);
    }
}
