//! Rooted trees with labeled leaves: Newick I/O and the unweighted
//! leaf-pair path distance between two trees over the same leaf set.

use std::collections::{HashSet, VecDeque};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub label: Option<String>,
    pub children: Vec<usize>,
    /// Length of the edge to the parent; 0 for the root.
    pub branch_len: f64,
    /// Merge height for agglomeration trees (0 at leaves).
    pub height: f64,
}

/// Rooted tree; clustering produces strictly binary trees, the parser also
/// accepts multifurcating reference trees.
#[derive(Clone, Debug)]
pub struct ClusterTree {
    nodes: Vec<TreeNode>,
    root: usize,
}

impl ClusterTree {
    pub fn new(nodes: Vec<TreeNode>, root: usize) -> Result<Self> {
        let t = ClusterTree { nodes, root };
        t.validate()?;
        Ok(t)
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for n in &self.nodes {
            if n.children.is_empty() {
                match &n.label {
                    None => return Err(Error::invalid("unlabeled leaf in tree")),
                    Some(l) => {
                        if !seen.insert(l.clone()) {
                            return Err(Error::invalid(format!("duplicate leaf label {l:?}")));
                        }
                    }
                }
            } else if n.children.len() < 2 {
                return Err(Error::invalid("internal node with a single child"));
            }
        }
        if seen.is_empty() {
            return Err(Error::invalid("tree has no leaves"));
        }
        Ok(())
    }

    /// Sorted leaf labels.
    pub fn leaf_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .nodes
            .iter()
            .filter(|n| n.children.is_empty())
            .map(|n| n.label.clone().unwrap())
            .collect();
        labels.sort();
        labels
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_empty()).count()
    }

    pub fn is_binary(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.children.is_empty() || n.children.len() == 2)
    }

    /// Leaf indices in left-to-right order.
    pub fn leaves_in_order(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            if n.children.is_empty() {
                out.push(i);
            } else {
                for &c in n.children.iter().rev() {
                    stack.push(c);
                }
            }
        }
        out
    }

    /// Unit-edge path lengths between all leaf pairs, keyed by the sorted
    /// label order. Result is a dense `L x L` matrix.
    pub fn leaf_path_lengths(&self) -> (Vec<String>, Vec<usize>) {
        let labels = self.leaf_labels();
        let index_of = |l: &str| labels.iter().position(|x| x == l).unwrap();

        // undirected adjacency over all nodes
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for &c in &n.children {
                adj[i].push(c);
                adj[c].push(i);
            }
        }
        let l = labels.len();
        let mut dist = vec![0usize; l * l];
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.children.is_empty() {
                continue;
            }
            let from = index_of(n.label.as_ref().unwrap());
            let mut seen = vec![usize::MAX; self.nodes.len()];
            seen[i] = 0;
            let mut q = VecDeque::from([i]);
            while let Some(u) = q.pop_front() {
                for &v in &adj[u] {
                    if seen[v] == usize::MAX {
                        seen[v] = seen[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            for (j, m) in self.nodes.iter().enumerate() {
                if m.children.is_empty() {
                    let to = index_of(m.label.as_ref().unwrap());
                    dist[from * l + to] = seen[j];
                }
            }
        }
        (labels, dist)
    }
}

/// Builder used by clustering and the parser.
#[derive(Default)]
pub struct TreeBuilder {
    nodes: Vec<TreeNode>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        TreeBuilder { nodes: Vec::new() }
    }

    pub fn leaf(&mut self, label: &str) -> usize {
        self.nodes.push(TreeNode {
            label: Some(label.to_string()),
            children: Vec::new(),
            branch_len: 0.0,
            height: 0.0,
        });
        self.nodes.len() - 1
    }

    pub fn internal(&mut self, children: Vec<usize>, height: f64) -> usize {
        for &c in &children {
            self.nodes[c].branch_len = height - self.nodes[c].height;
        }
        self.nodes.push(TreeNode {
            label: None,
            children,
            branch_len: 0.0,
            height,
        });
        self.nodes.len() - 1
    }

    pub fn set_branch_len(&mut self, node: usize, len: f64) {
        self.nodes[node].branch_len = len;
    }

    pub fn build(self, root: usize) -> Result<ClusterTree> {
        ClusterTree::new(self.nodes, root)
    }
}

fn needs_quoting(label: &str) -> bool {
    label.is_empty()
        || label
            .chars()
            .any(|c| c.is_whitespace() || "():;,[]'\"".contains(c))
}

fn write_label(out: &mut String, label: &str) {
    if needs_quoting(label) {
        out.push('\'');
        for c in label.chars() {
            if c == '\'' {
                out.push('\'');
            }
            out.push(c);
        }
        out.push('\'');
    } else {
        out.push_str(label);
    }
}

fn write_node(tree: &ClusterTree, i: usize, is_root: bool, out: &mut String) {
    let n = tree.node(i);
    if n.children.is_empty() {
        write_label(out, n.label.as_ref().unwrap());
    } else {
        out.push('(');
        for (k, &c) in n.children.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write_node(tree, c, false, out);
        }
        out.push(')');
    }
    if !is_root {
        // f64 Display round-trips exactly
        out.push(':');
        out.push_str(&format!("{}", n.branch_len));
    }
}

/// Serializes a tree to Newick with branch lengths.
pub fn to_newick(tree: &ClusterTree) -> String {
    let mut out = String::new();
    write_node(tree, tree.root(), true, &mut out);
    out.push(';');
    out
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    src: &'a str,
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::FileFormat(format!(
            "newick parse error at offset {} in {:?}: {msg}",
            self.pos, self.src
        ))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn parse_label(&mut self) -> Result<String> {
        self.skip_ws();
        if self.peek() == Some('\'') {
            self.bump();
            let mut out = String::new();
            loop {
                match self.bump() {
                    Some('\'') => {
                        if self.peek() == Some('\'') {
                            out.push('\'');
                            self.bump();
                        } else {
                            return Ok(out);
                        }
                    }
                    Some(c) => out.push(c),
                    None => return Err(self.error("unterminated quoted label")),
                }
            }
        }
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if c.is_whitespace() || "():;,[]'".contains(c) {
                break;
            }
            out.push(c);
            self.pos += 1;
        }
        Ok(out)
    }

    fn parse_branch_len(&mut self) -> Result<f64> {
        self.skip_ws();
        if self.peek() != Some(':') {
            return Ok(0.0);
        }
        self.bump();
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || "+-.eE".contains(c)) {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse()
            .map_err(|e| self.error(&format!("bad branch length {text:?}: {e}")))
    }

    fn parse_node(&mut self, b: &mut TreeBuilder) -> Result<usize> {
        self.skip_ws();
        let idx = if self.peek() == Some('(') {
            self.bump();
            let mut children = Vec::new();
            loop {
                children.push(self.parse_node(b)?);
                self.skip_ws();
                match self.bump() {
                    Some(',') => continue,
                    Some(')') => break,
                    _ => return Err(self.error("expected ',' or ')'")),
                }
            }
            // internal labels are accepted and ignored
            let _ = self.parse_label()?;
            b.nodes.push(TreeNode {
                label: None,
                children,
                branch_len: 0.0,
                height: 0.0,
            });
            b.nodes.len() - 1
        } else {
            let label = self.parse_label()?;
            if label.is_empty() {
                return Err(self.error("expected a leaf label"));
            }
            b.leaf(&label)
        };
        let len = self.parse_branch_len()?;
        b.set_branch_len(idx, len);
        Ok(idx)
    }
}

/// Parses a Newick string. Heights are reconstructed from branch lengths
/// (leaves at height 0) so that print-parse round-trips agree.
pub fn from_newick(src: &str) -> Result<ClusterTree> {
    let mut p = Parser {
        chars: src.chars().collect(),
        pos: 0,
        src,
    };
    let mut b = TreeBuilder::new();
    let root = p.parse_node(&mut b)?;
    p.skip_ws();
    if p.bump() != Some(';') {
        return Err(p.error("expected trailing ';'"));
    }
    // reconstruct heights bottom-up
    fn fill_heights(nodes: &mut Vec<TreeNode>, i: usize) -> f64 {
        let children = nodes[i].children.clone();
        if children.is_empty() {
            nodes[i].height = 0.0;
            return 0.0;
        }
        let mut h: f64 = 0.0;
        for c in children {
            let hc = fill_heights(nodes, c) + nodes[c].branch_len;
            h = h.max(hc);
        }
        nodes[i].height = h;
        h
    }
    fill_heights(&mut b.nodes, root);
    b.build(root)
}

/// Unweighted tree distance: with every edge weighted 1, compute each tree's
/// leaf-pair path lengths, normalize by that tree's maximum, and average the
/// absolute differences over all pairs.
pub fn tree_distance(t1: &ClusterTree, t2: &ClusterTree) -> Result<f64> {
    let (labels1, d1) = t1.leaf_path_lengths();
    let (labels2, d2) = t2.leaf_path_lengths();
    if labels1 != labels2 {
        let s1: HashSet<_> = labels1.iter().collect();
        let s2: HashSet<_> = labels2.iter().collect();
        let only1: Vec<_> = labels1.iter().filter(|l| !s2.contains(l)).collect();
        let only2: Vec<_> = labels2.iter().filter(|l| !s1.contains(l)).collect();
        return Err(Error::invalid(format!(
            "leaf sets differ: only in first {only1:?}, only in second {only2:?}"
        )));
    }
    let l = labels1.len();
    if l < 2 {
        return Err(Error::invalid("tree distance needs at least 2 leaves"));
    }
    let max1 = *d1.iter().max().unwrap() as f64;
    let max2 = *d2.iter().max().unwrap() as f64;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..l {
        for j in (i + 1)..l {
            let a = d1[i * l + j] as f64 / max1;
            let b = d2[i * l + j] as f64 / max2;
            total += (a - b).abs();
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}
