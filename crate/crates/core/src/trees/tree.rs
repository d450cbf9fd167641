//! Array-backed binary regression tree. Nodes live in an arena; pruning
//! orphans the detached children, which are swept out by `compact`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        var: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    /// Depth of each node (root = 0); kept in sync with `nodes`.
    pub depth: Vec<u16>,
}

pub const ROOT: usize = 0;

impl Tree {
    pub fn new_leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
            depth: vec![0],
        }
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        matches!(self.nodes[id], Node::Leaf { .. })
    }

    pub fn leaf_value(&self, id: usize) -> f64 {
        match self.nodes[id] {
            Node::Leaf { value } => value,
            _ => panic!("node {id} is not a leaf"),
        }
    }

    pub fn set_leaf_value(&mut self, id: usize, v: f64) {
        match &mut self.nodes[id] {
            Node::Leaf { value } => *value = v,
            _ => panic!("node {id} is not a leaf"),
        }
    }

    /// Ids of reachable leaves.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(ROOT, &mut |id, tree| {
            if tree.is_leaf(id) {
                out.push(id);
            }
        });
        out
    }

    /// Ids of split nodes whose children are both leaves (prunable).
    pub fn terminal_parents(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(ROOT, &mut |id, tree| {
            if let Node::Split { left, right, .. } = tree.nodes[id] {
                if tree.is_leaf(left) && tree.is_leaf(right) {
                    out.push(id);
                }
            }
        });
        out
    }

    fn walk(&self, id: usize, f: &mut impl FnMut(usize, &Tree)) {
        f(id, self);
        if let Node::Split { left, right, .. } = self.nodes[id] {
            self.walk(left, f);
            self.walk(right, f);
        }
    }

    /// Replace a leaf by a split with two fresh leaves; returns (left, right).
    /// Routing is `x[var] <= value` to the left child.
    pub fn grow(&mut self, leaf: usize, var: usize, value: f64) -> (usize, usize) {
        assert!(self.is_leaf(leaf));
        let d = self.depth[leaf] + 1;
        let left = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        self.depth.push(d);
        let right = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        self.depth.push(d);
        self.nodes[leaf] = Node::Split {
            var,
            value,
            left,
            right,
        };
        (left, right)
    }

    /// Collapse a terminal parent back into a leaf. The children stay in the
    /// arena but become unreachable.
    pub fn prune(&mut self, node: usize) {
        match self.nodes[node] {
            Node::Split { left, right, .. } => {
                assert!(self.is_leaf(left) && self.is_leaf(right));
                self.nodes[node] = Node::Leaf { value: 0.0 };
            }
            _ => panic!("cannot prune a leaf"),
        }
    }

    /// Leaf id reached by a feature row (column-major accessor).
    pub fn route(&self, get: impl Fn(usize) -> f64) -> usize {
        let mut id = ROOT;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    var, value, left, right,
                } => {
                    id = if get(var) <= value { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, get: impl Fn(usize) -> f64) -> f64 {
        self.leaf_value(self.route(get))
    }

    /// Number of reachable split nodes, and split counts per variable.
    pub fn split_counts(&self, counts: &mut [u64]) -> u64 {
        let mut total = 0;
        self.walk(ROOT, &mut |id, tree| {
            if let Node::Split { var, .. } = tree.nodes[id] {
                counts[var] += 1;
                total += 1;
            }
        });
        total
    }

    /// Rebuild the arena keeping only reachable nodes (stable preorder).
    pub fn compact(&self) -> Tree {
        let mut out = Tree {
            nodes: Vec::new(),
            depth: Vec::new(),
        };
        self.copy_into(ROOT, 0, &mut out);
        out
    }

    fn copy_into(&self, id: usize, depth: u16, out: &mut Tree) -> usize {
        let new_id = out.nodes.len();
        out.nodes.push(Node::Leaf { value: 0.0 });
        out.depth.push(depth);
        match self.nodes[id] {
            Node::Leaf { value } => out.nodes[new_id] = Node::Leaf { value },
            Node::Split { var, value, left, right } => {
                let l = self.copy_into(left, depth + 1, out);
                let r = self.copy_into(right, depth + 1, out);
                out.nodes[new_id] = Node::Split {
                    var,
                    value,
                    left: l,
                    right: r,
                };
            }
        }
        new_id
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_zero_tree_predicts_leaf_value() {
        let t = Tree::new_leaf(3.25);
        assert_eq!(t.predict(|_| 0.0), 3.25);
        assert_eq!(t.leaves(), vec![0]);
        assert!(t.terminal_parents().is_empty());
    }

    #[test]
    fn routing_is_leq_left() {
        let mut t = Tree::new_leaf(0.0);
        let (l, r) = t.grow(ROOT, 2, 1.5);
        t.set_leaf_value(l, -1.0);
        t.set_leaf_value(r, 1.0);
        assert_eq!(t.predict(|v| if v == 2 { 1.5 } else { 9.9 }), -1.0);
        assert_eq!(t.predict(|v| if v == 2 { 1.6 } else { 9.9 }), 1.0);
    }

    #[test]
    fn grow_then_prune_restores_structure() {
        let mut t = Tree::new_leaf(0.7);
        let before = t.compact();
        let (_, _) = t.grow(ROOT, 0, 0.5);
        t.prune(ROOT);
        t.set_leaf_value(ROOT, 0.7);
        assert_eq!(t.compact(), before);
    }

    #[test]
    fn split_counts_per_variable() {
        let mut t = Tree::new_leaf(0.0);
        let (l, _) = t.grow(ROOT, 1, 0.0);
        t.grow(l, 1, -1.0);
        let mut counts = vec![0u64; 3];
        let total = t.split_counts(&mut counts);
        assert_eq!(total, 2);
        assert_eq!(counts, vec![0, 2, 0]);
    }
}
