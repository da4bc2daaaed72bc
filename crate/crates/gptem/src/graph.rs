//! Undirected trait association graphs.
//!
//! A `TraitGraph` is the model index of the graphical variant: its edges mark
//! pairs of traits whose precision entry is allowed to be non-zero. Edges are
//! stored as a flat indicator vector over the upper-triangle slots in
//! lexicographic order, which doubles as the memoization key for
//! normalizing-constant caches.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Flat upper-triangle slot index of the pair `(i, j)` with `i < j`.
pub fn edge_index(p: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < p);
    i * p - i * (i + 1) / 2 + (j - i - 1)
}

/// All `(i, j)` pairs with `i < j` in slot order.
pub fn edge_pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |i| (i + 1..p).map(move |j| (i, j)))
}

/// Number of upper-triangle slots for `p` vertices.
pub fn n_edge_slots(p: usize) -> usize {
    p * (p - 1) / 2
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraitGraph {
    n_vertices: usize,
    /// Indicator per upper-triangle slot, `edge_index` order.
    slots: Vec<bool>,
}

impl TraitGraph {
    /// Graph with no edges.
    pub fn empty(p: usize) -> Self {
        TraitGraph {
            n_vertices: p,
            slots: vec![false; n_edge_slots(p)],
        }
    }

    /// Graph with all p(p-1)/2 edges.
    pub fn complete(p: usize) -> Self {
        TraitGraph {
            n_vertices: p,
            slots: vec![true; n_edge_slots(p)],
        }
    }

    /// Build from an explicit edge list.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = TraitGraph::empty(p);
        for &(i, j) in edges {
            g.check_pair(i, j)?;
            let (a, b) = (i.min(j), i.max(j));
            g.slots[edge_index(p, a, b)] = true;
        }
        Ok(g)
    }

    /// Rebuild from a stored indicator vector in slot order.
    pub fn from_indicator(p: usize, slots: &[bool]) -> Self {
        assert_eq!(slots.len(), n_edge_slots(p));
        TraitGraph {
            n_vertices: p,
            slots: slots.to_vec(),
        }
    }

    /// Edge indicators from the off-diagonal zero pattern of a matrix.
    pub fn from_zero_pattern(m: &nalgebra::DMatrix<f64>, tol: f64) -> Self {
        let p = m.nrows();
        let mut g = TraitGraph::empty(p);
        for (i, j) in edge_pairs(p) {
            if m[(i, j)].abs() > tol {
                g.slots[edge_index(p, i, j)] = true;
            }
        }
        g
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.slots.iter().filter(|&&s| s).count()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (a, b) = (i.min(j), i.max(j));
        self.slots[edge_index(self.n_vertices, a, b)]
    }

    /// Edge set in slot order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        edge_pairs(self.n_vertices)
            .zip(&self.slots)
            .filter(|(_, &s)| s)
            .map(|(e, _)| e)
            .collect()
    }

    /// Indicator vector over upper-triangle slots (memoization key).
    pub fn indicator(&self) -> &[bool] {
        &self.slots
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.n_vertices)
            .filter(|&u| u != v && self.has_edge(v, u))
            .collect()
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::InvalidInput(format!("self-loop at vertex {i}")));
        }
        if i >= self.n_vertices || j >= self.n_vertices {
            return Err(Error::InvalidInput(format!(
                "vertex pair ({i}, {j}) out of range for p = {}",
                self.n_vertices
            )));
        }
        Ok(())
    }

    /// Copy of the graph with the edge `(i, j)` toggled.
    pub fn flip_edge(&self, i: usize, j: usize) -> Result<TraitGraph> {
        self.check_pair(i, j)?;
        let mut out = self.clone();
        let (a, b) = (i.min(j), i.max(j));
        let idx = edge_index(self.n_vertices, a, b);
        out.slots[idx] = !out.slots[idx];
        Ok(out)
    }

    /// Copy with the slot at flat index `slot` toggled.
    pub fn flip_slot(&self, slot: usize) -> TraitGraph {
        let mut out = self.clone();
        out.slots[slot] = !out.slots[slot];
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_index_is_lexicographic() {
        let p = 5;
        let mut seen = Vec::new();
        for (i, j) in edge_pairs(p) {
            seen.push(edge_index(p, i, j));
        }
        assert_eq!(seen, (0..n_edge_slots(p)).collect::<Vec<_>>());
    }

    #[test]
    fn flip_adds_edge_to_empty_graph() {
        let g = TraitGraph::empty(4).flip_edge(1, 2).unwrap();
        assert_eq!(g.n_edges(), 1);
        assert!(g.has_edge(1, 2));
        assert!(g.has_edge(2, 1));
    }

    #[test]
    fn flip_twice_is_identity() {
        let g = TraitGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let back = g.flip_edge(0, 3).unwrap().flip_edge(0, 3).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn flip_on_complete_graph_removes_edge() {
        let g = TraitGraph::complete(5).flip_edge(2, 4).unwrap();
        assert_eq!(g.n_edges(), 9);
        assert!(!g.has_edge(2, 4));
    }

    #[test]
    fn flip_rejects_self_loop_and_out_of_range() {
        let g = TraitGraph::empty(3);
        assert!(g.flip_edge(1, 1).is_err());
        assert!(g.flip_edge(0, 3).is_err());
    }
}
