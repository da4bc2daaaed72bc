//! Chordality testing and clique/separator factorization.

use crate::graph::TraitGraph;

/// Maximum cardinality search. Returns an elimination ordering; the graph is
/// chordal iff for every vertex its earlier-numbered neighbors form a clique.
pub fn is_decomposable(graph: &TraitGraph) -> bool {
    let p = graph.n_vertices();
    if p == 0 {
        return true;
    }
    let mut weight = vec![0usize; p];
    let mut numbered: Vec<Option<usize>> = vec![None; p]; // vertex -> position
    let mut order = Vec::with_capacity(p);
    for pos in 0..p {
        let v = (0..p)
            .filter(|&v| numbered[v].is_none())
            .max_by_key(|&v| weight[v])
            .unwrap();
        numbered[v] = Some(pos);
        order.push(v);
        for u in graph.neighbors(v) {
            if numbered[u].is_none() {
                weight[u] += 1;
            }
        }
    }
    // Chordality check: earlier neighbors of each vertex must be mutually
    // adjacent given the MCS order.
    for (pos, &v) in order.iter().enumerate() {
        let earlier: Vec<usize> = graph
            .neighbors(v)
            .into_iter()
            .filter(|&u| numbered[u].unwrap() < pos)
            .collect();
        if let Some(&last) = earlier.iter().max_by_key(|&&u| numbered[u].unwrap()) {
            for &u in &earlier {
                if u != last && !graph.has_edge(u, last) {
                    return false;
                }
            }
        }
    }
    true
}

/// All maximal cliques via Bron-Kerbosch with pivoting, sorted for
/// deterministic iteration order. Isolated vertices yield singleton cliques.
pub fn maximal_cliques(graph: &TraitGraph) -> Vec<Vec<usize>> {
    let p = graph.n_vertices();
    let adj: Vec<Vec<usize>> = (0..p).map(|v| graph.neighbors(v)).collect();
    let mut cliques = Vec::new();
    fn bk(
        r: &mut Vec<usize>,
        mut p_set: Vec<usize>,
        mut x_set: Vec<usize>,
        adj: &[Vec<usize>],
        out: &mut Vec<Vec<usize>>,
    ) {
        if p_set.is_empty() && x_set.is_empty() {
            let mut clique = r.clone();
            clique.sort_unstable();
            out.push(clique);
            return;
        }
        let pivot = p_set
            .iter()
            .chain(x_set.iter())
            .copied()
            .max_by_key(|&u| adj[u].iter().filter(|v| p_set.contains(v)).count())
            .unwrap();
        let candidates: Vec<usize> = p_set
            .iter()
            .copied()
            .filter(|v| !adj[pivot].contains(v))
            .collect();
        for v in candidates {
            r.push(v);
            let p_next = p_set
                .iter()
                .copied()
                .filter(|u| adj[v].contains(u))
                .collect();
            let x_next = x_set
                .iter()
                .copied()
                .filter(|u| adj[v].contains(u))
                .collect();
            bk(r, p_next, x_next, adj, out);
            r.pop();
            p_set.retain(|&u| u != v);
            x_set.push(v);
        }
    }
    bk(
        &mut Vec::new(),
        (0..p).collect(),
        Vec::new(),
        &adj,
        &mut cliques,
    );
    cliques.sort();
    cliques
}

/// Junction tree of a chordal graph: maximal cliques plus the separator
/// multiset from a maximum-weight spanning tree of the clique intersection
/// graph. Empty separators (between connected components) are dropped.
pub fn junction_tree(graph: &TraitGraph) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let cliques = maximal_cliques(graph);
    let m = cliques.len();
    if m <= 1 {
        return (cliques, Vec::new());
    }
    // Kruskal on intersection sizes, largest first.
    let mut edges: Vec<(usize, usize, Vec<usize>)> = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let inter: Vec<usize> = cliques[a]
                .iter()
                .copied()
                .filter(|v| cliques[b].contains(v))
                .collect();
            if !inter.is_empty() {
                edges.push((a, b, inter));
            }
        }
    }
    edges.sort_by(|x, y| y.2.len().cmp(&x.2.len()).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1)));
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut Vec<usize>, v: usize) -> usize {
        if parent[v] != v {
            let root = find(parent, parent[v]);
            parent[v] = root;
        }
        parent[v]
    }
    let mut separators = Vec::new();
    for (a, b, inter) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            separators.push(inter);
        }
    }
    separators.sort();
    (cliques, separators)
}
