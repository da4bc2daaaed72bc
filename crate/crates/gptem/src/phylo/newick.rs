//! Newick reading and writing for rooted bifurcating trees.

use super::{Node, PhyloTree};
use crate::error::{Error, Result};

struct RawNode {
    parent: Option<usize>,
    children: Vec<usize>,
    branch_length: Option<f64>,
    label: Option<String>,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    nodes: Vec<RawNode>,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::NewickParse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn new_node(&mut self) -> usize {
        self.nodes.push(RawNode {
            parent: None,
            children: Vec::new(),
            branch_length: None,
            label: None,
        });
        self.nodes.len() - 1
    }

    fn parse_label(&mut self) -> Option<String> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(b) if !b"(),:;".contains(&b) && !b.is_ascii_whitespace())
        {
            self.pos += 1;
        }
        if self.pos > start {
            Some(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
        } else {
            None
        }
    }

    fn parse_number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b"+-.eE0123456789".contains(&b)) {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map_err(|_| Error::NewickParse {
                position: start,
                message: format!("invalid branch length '{text}'"),
            })
    }

    /// subtree := "(" subtree "," subtree ")" [label] | label
    fn parse_subtree(&mut self) -> Result<usize> {
        self.skip_ws();
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let mut children = vec![self.parse_branch()?];
            while {
                self.skip_ws();
                self.peek() == Some(b',')
            } {
                self.pos += 1;
                children.push(self.parse_branch()?);
            }
            self.expect(b')')?;
            if children.len() != 2 {
                return self.err(format!(
                    "node has {} children; only bifurcating trees are supported",
                    children.len()
                ));
            }
            let label = self.parse_label();
            let id = self.new_node();
            self.nodes[id].children = children.clone();
            self.nodes[id].label = label;
            for c in children {
                self.nodes[c].parent = Some(id);
            }
            Ok(id)
        } else {
            match self.parse_label() {
                Some(label) => {
                    let id = self.new_node();
                    self.nodes[id].label = Some(label);
                    Ok(id)
                }
                None => self.err("expected '(' or a tip label"),
            }
        }
    }

    /// branch := subtree ":" length
    fn parse_branch(&mut self) -> Result<usize> {
        let id = self.parse_subtree()?;
        self.expect(b':')
            .map_err(|_| Error::NewickParse {
                position: self.pos,
                message: "missing branch length (expected ':')".into(),
            })?;
        let bl = self.parse_number()?;
        if bl < 0.0 {
            return self.err(format!("negative branch length {bl}"));
        }
        self.nodes[id].branch_length = Some(bl);
        Ok(id)
    }
}

/// Parse a single rooted Newick tree. Branch lengths are required on every
/// non-root edge, every node must be bifurcating, and tips keep their
/// left-to-right order.
pub fn parse_newick(text: &str) -> Result<PhyloTree> {
    let mut parser = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        nodes: Vec::new(),
    };
    parser.skip_ws();
    if parser.peek() != Some(b'(') {
        return parser.err("tree must start with '('");
    }
    let root = parser.parse_subtree()?;
    parser.skip_ws();
    // Optional root branch length is rejected: the root has no parent edge.
    if parser.peek() == Some(b':') {
        return parser.err("root must not carry a branch length");
    }
    parser.expect(b';')?;
    parser.skip_ws();
    if parser.pos != parser.bytes.len() {
        return parser.err("trailing characters after ';'");
    }
    canonicalize(parser.nodes, root)
}

/// Reindex a raw parse arena into canonical order: tips in left-to-right
/// order, then internal nodes, root last.
fn canonicalize(raw: Vec<RawNode>, root: usize) -> Result<PhyloTree> {
    // Depth-first left-to-right traversal to fix the tip order.
    let mut tips = Vec::new();
    let mut internals = Vec::new();
    let mut stack = vec![root];
    let mut visit = Vec::new();
    while let Some(id) = stack.pop() {
        visit.push(id);
        for &c in raw[id].children.iter().rev() {
            stack.push(c);
        }
    }
    for id in visit {
        if raw[id].children.is_empty() {
            tips.push(id);
        } else if id != root {
            internals.push(id);
        }
    }
    let n = tips.len();
    if n < 2 {
        return Err(Error::InvalidTree(
            "trees must have at least two tips".into(),
        ));
    }
    let mut new_id = vec![usize::MAX; raw.len()];
    for (k, &t) in tips.iter().enumerate() {
        new_id[t] = k;
    }
    for (k, &u) in internals.iter().enumerate() {
        new_id[u] = n + k;
    }
    new_id[root] = 2 * n - 2;

    let mut nodes: Vec<Option<Node>> = vec![None; raw.len()];
    for (old, raw_node) in raw.into_iter().enumerate() {
        let label = if raw_node.children.is_empty() {
            match raw_node.label {
                Some(l) => Some(l),
                None => return Err(Error::InvalidTree("tip without label".into())),
            }
        } else {
            None // internal labels are dropped
        };
        nodes[new_id[old]] = Some(Node {
            parent: raw_node.parent.map(|p| new_id[p]),
            children: raw_node.children.iter().map(|&c| new_id[c]).collect(),
            branch_length: raw_node.branch_length,
            label,
        });
    }
    PhyloTree::from_nodes(nodes.into_iter().map(Option::unwrap).collect())
}

/// Serialize a tree back to Newick.
pub fn write_newick(tree: &PhyloTree) -> String {
    fn rec(tree: &PhyloTree, id: usize, out: &mut String) {
        let node = tree.node(id);
        if node.children.is_empty() {
            out.push_str(node.label.as_deref().unwrap_or(""));
        } else {
            out.push('(');
            for (k, &c) in node.children.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                rec(tree, c, out);
                out.push(':');
                out.push_str(&format!("{}", tree.node(c).branch_length.unwrap_or(0.0)));
            }
            out.push(')');
        }
    }
    let mut out = String::new();
    rec(tree, tree.root(), &mut out);
    out.push(';');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_smallest_bifurcating_tree() {
        let tree = parse_newick("((A:1,B:1):1,C:2);").unwrap();
        assert_eq!(tree.n_tips(), 3);
        assert_eq!(tree.tip_labels(), vec!["A", "B", "C"]);
        let depths = tree.depths();
        assert_eq!(&depths[..3], &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn rejects_missing_semicolon() {
        assert!(parse_newick("((A:1,B:1):1,C:2)").is_err());
    }

    #[test]
    fn rejects_trifurcating_root() {
        assert!(parse_newick("(A:1,B:1,C:1);").is_err());
    }

    #[test]
    fn rejects_negative_branch_length() {
        assert!(parse_newick("((A:1,B:-0.5):1,C:2);").is_err());
    }

    #[test]
    fn rejects_missing_branch_length() {
        assert!(parse_newick("((A:1,B):1,C:2);").is_err());
    }

    #[test]
    fn rejects_single_tip() {
        assert!(parse_newick("(A:1);").is_err());
        assert!(parse_newick("A;").is_err());
    }

    #[test]
    fn round_trips_through_newick_text() {
        let text = "((A:1,B:1.5):0.5,(C:2,D:0.25):1);";
        let tree = parse_newick(text).unwrap();
        let tree2 = parse_newick(&write_newick(&tree)).unwrap();
        assert_eq!(tree, tree2);
    }

    #[test]
    fn canonical_order_puts_tips_first_root_last() {
        let tree = parse_newick("((A:1,B:1):1,(C:1,D:1):1);").unwrap();
        assert_eq!(tree.n_nodes(), 7);
        assert_eq!(tree.root(), 6);
        for tip in 0..4 {
            assert!(tree.node(tip).children.is_empty());
        }
        for internal in 4..7 {
            assert_eq!(tree.node(internal).children.len(), 2);
        }
    }
}
