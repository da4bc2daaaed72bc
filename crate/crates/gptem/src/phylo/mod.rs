//! Phylogenetic trees, trait data, and the tree-whitened sufficient statistic.
//!
//! Trees are rooted and strictly bifurcating, stored arena-style with a fixed
//! node numbering: the `N` tips come first (0..N-1), then the `N-2` internal
//! nodes, and the root last. Branch lengths measure time from a node to its
//! parent.

mod delta;
mod io;
mod newick;
mod simulate;

pub use delta::{compute_delta_dense, compute_delta_pruning, tree_covariance};
pub use io::{read_trait_csv, write_trait_csv};
pub use newick::{parse_newick, write_newick};
pub use simulate::{simulate_traits, simulate_tree};

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// A single node in the tree arena.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Distance to the parent; `None` only for the root.
    pub branch_length: Option<f64>,
    /// Taxon label; present exactly on tips.
    pub label: Option<String>,
}

/// Rooted bifurcating tree with branch lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyloTree {
    nodes: Vec<Node>,
}

impl PhyloTree {
    /// Build from an arena already in canonical order (tips first, root last),
    /// validating the structural invariants.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        let tree = PhyloTree { nodes };
        tree.validate()?;
        Ok(tree)
    }

    pub fn n_tips(&self) -> usize {
        (self.nodes.len() + 1) / 2
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn is_tip(&self, id: usize) -> bool {
        id < self.n_tips()
    }

    pub fn tip_labels(&self) -> Vec<&str> {
        (0..self.n_tips())
            .map(|i| self.nodes[i].label.as_deref().unwrap_or(""))
            .collect()
    }

    /// Node ids in post-order (children before parents, root last).
    pub fn postorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root(), false)];
        while let Some((id, expanded)) = stack.pop() {
            if expanded {
                order.push(id);
            } else {
                stack.push((id, true));
                for &c in self.nodes[id].children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        order
    }

    /// Sum of branch lengths from the root down to each node.
    pub fn depths(&self) -> Vec<f64> {
        let mut depth = vec![0.0; self.nodes.len()];
        let mut order = self.postorder();
        order.reverse(); // pre-order
        for id in order {
            if let Some(pa) = self.nodes[id].parent {
                depth[id] = depth[pa] + self.nodes[id].branch_length.unwrap_or(0.0);
            }
        }
        depth
    }

    fn validate(&self) -> Result<()> {
        let n_nodes = self.nodes.len();
        if n_nodes < 3 || n_nodes % 2 == 0 {
            return Err(Error::InvalidTree(format!(
                "a bifurcating tree needs an odd node count of at least 3, got {n_nodes}"
            )));
        }
        let n = self.n_tips();
        let root = self.root();
        let mut any_positive = false;
        for (id, node) in self.nodes.iter().enumerate() {
            let is_tip = id < n;
            if is_tip {
                if !node.children.is_empty() {
                    return Err(Error::InvalidTree(format!("tip {id} has children")));
                }
                if node.label.is_none() {
                    return Err(Error::InvalidTree(format!("tip {id} has no label")));
                }
            } else if node.children.len() != 2 {
                return Err(Error::InvalidTree(format!(
                    "internal node {id} has {} children; trees must be strictly bifurcating",
                    node.children.len()
                )));
            }
            if id == root {
                if node.parent.is_some() {
                    return Err(Error::InvalidTree("root has a parent".into()));
                }
            } else {
                let pa = node
                    .parent
                    .ok_or_else(|| Error::InvalidTree(format!("non-root node {id} has no parent")))?;
                if !self.nodes[pa].children.contains(&id) {
                    return Err(Error::InvalidTree(format!(
                        "parent/child links inconsistent at node {id}"
                    )));
                }
                let bl = node.branch_length.ok_or_else(|| {
                    Error::InvalidTree(format!("non-root node {id} has no branch length"))
                })?;
                if bl < 0.0 || !bl.is_finite() {
                    return Err(Error::InvalidTree(format!(
                        "negative or non-finite branch length {bl} at node {id}"
                    )));
                }
                if bl > 0.0 {
                    any_positive = true;
                }
            }
        }
        if !any_positive {
            return Err(Error::InvalidTree(
                "all branch lengths are zero".into(),
            ));
        }
        // Connectivity: every node must reach the root.
        for id in 0..n_nodes {
            let mut cur = id;
            let mut hops = 0;
            while let Some(pa) = self.nodes[cur].parent {
                cur = pa;
                hops += 1;
                if hops > n_nodes {
                    return Err(Error::InvalidTree("cycle in parent links".into()));
                }
            }
            if cur != root {
                return Err(Error::InvalidTree(format!("node {id} is disconnected")));
            }
        }
        Ok(())
    }
}

/// Complete N x p trait observations aligned to a tree's tips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitMatrix {
    pub values: DMatrix<f64>,
    pub taxon_labels: Vec<String>,
    pub trait_labels: Vec<String>,
}

impl TraitMatrix {
    pub fn new(
        values: DMatrix<f64>,
        taxon_labels: Vec<String>,
        trait_labels: Vec<String>,
    ) -> Result<Self> {
        if values.nrows() != taxon_labels.len() || values.ncols() != trait_labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} values with {} taxa and {} trait labels",
                values.nrows(),
                values.ncols(),
                taxon_labels.len(),
                trait_labels.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "trait matrix contains missing or non-finite entries".into(),
            ));
        }
        Ok(TraitMatrix {
            values,
            taxon_labels,
            trait_labels,
        })
    }

    pub fn n_taxa(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_traits(&self) -> usize {
        self.values.ncols()
    }

    /// Reorder rows to match the tree's tip order. Labels must match
    /// one-to-one and case-sensitively.
    pub fn align_to(&self, tree: &PhyloTree) -> Result<TraitMatrix> {
        let tips = tree.tip_labels();
        if tips.len() != self.n_taxa() {
            return Err(Error::LabelMismatch(format!(
                "tree has {} tips, trait matrix has {} rows",
                tips.len(),
                self.n_taxa()
            )));
        }
        let mut rows = Vec::with_capacity(tips.len());
        for tip in &tips {
            match self.taxon_labels.iter().position(|l| l == tip) {
                Some(r) => rows.push(r),
                None => {
                    return Err(Error::LabelMismatch(format!(
                        "tip '{tip}' not found among trait rows"
                    )))
                }
            }
        }
        let values = DMatrix::from_fn(tips.len(), self.n_traits(), |i, j| {
            self.values[(rows[i], j)]
        });
        TraitMatrix::new(
            values,
            tips.iter().map(|s| s.to_string()).collect(),
            self.trait_labels.clone(),
        )
    }
}

/// Conjugate prior on the latent root value: N(mean, sample_size^-1 K^-1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootPrior {
    pub mean: Vec<f64>,
    pub sample_size: f64,
}

impl RootPrior {
    pub fn new(mean: Vec<f64>, sample_size: f64) -> Result<Self> {
        if !(sample_size > 0.0) {
            return Err(Error::InvalidInput(format!(
                "root prior sample size must be positive, got {sample_size}"
            )));
        }
        Ok(RootPrior { mean, sample_size })
    }

    /// Zero mean, unit sample size.
    pub fn standard(p: usize) -> Self {
        RootPrior {
            mean: vec![0.0; p],
            sample_size: 1.0,
        }
    }
}
