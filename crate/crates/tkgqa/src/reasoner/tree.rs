//! Hierarchical decomposition trees.
//!
//! Decomposition yields sub-questions in dependency order; they are held as
//! a parent-child chain under the first node, which keeps execution order,
//! depth accounting, and the parent-before-child time-variable binding all
//! aligned with root-to-leaf traversal.

use serde::{Deserialize, Serialize};

use crate::indicator::Indicator;
use crate::store::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeStatus {
    Pending,
    Solved,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    /// Sub-question text; may contain `{var}` placeholders that bind when a
    /// parent resolves the variable.
    pub text: String,
    pub indicator: Indicator,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
    /// Predicted retrieval depth for this node's indicator.
    pub d_pred: usize,
    pub status: NodeStatus,
    /// The time variable this node's edge binds on success.
    pub time_var: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuestionTree {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
}

impl QuestionTree {
    /// Build a chain q1 -> q2 -> ... from nodes in dependency order.
    pub fn chain(mut nodes: Vec<TreeNode>) -> QuestionTree {
        for i in 0..nodes.len() {
            nodes[i].id = i;
            nodes[i].depth = i;
            nodes[i].parent = if i == 0 { None } else { Some(i - 1) };
            nodes[i].children = if i + 1 < nodes.len() { vec![i + 1] } else { vec![] };
        }
        QuestionTree { nodes, root: 0 }
    }

    pub fn single(text: impl Into<String>, indicator: Indicator, time_var: Option<String>) -> QuestionTree {
        QuestionTree::chain(vec![TreeNode {
            id: 0,
            text: text.into(),
            indicator,
            parent: None,
            children: vec![],
            depth: 0,
            d_pred: 1,
            status: NodeStatus::Pending,
            time_var,
        }])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: usize) -> &mut TreeNode {
        &mut self.nodes[id]
    }

    /// Node ids in root-to-leaf (depth-first, pre-order) execution order.
    pub fn traversal_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            order.push(id);
            // Push children reversed so the first child executes first.
            for &c in self.nodes[id].children.iter().rev() {
                stack.push(c);
            }
        }
        order
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Structural invariants: intact parent/child links, child depth =
    /// parent depth + 1, acyclicity (every node reachable from the root
    /// exactly once), and anchor-time monotonicity along parent-child pairs
    /// whose indicators both carry concrete anchors.
    pub fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".to_string());
        }
        for n in &self.nodes {
            if let Some(p) = n.parent {
                let parent = self.nodes.get(p).ok_or("dangling parent id")?;
                if !parent.children.contains(&n.id) {
                    return Err(format!("node {} missing from parent {} children", n.id, p));
                }
                if n.depth != parent.depth + 1 {
                    return Err(format!("node {} depth {} != parent depth + 1", n.id, n.depth));
                }
                if let (Some(pa), Some(ca)) = (anchor_of(parent), anchor_of(n)) {
                    if pa.start() > ca.start() {
                        return Err(format!(
                            "anchor order violated: parent {} at {pa} after child {} at {ca}",
                            p, n.id
                        ));
                    }
                }
            } else if n.id != self.root {
                return Err(format!("non-root node {} has no parent", n.id));
            }
            for &c in &n.children {
                let child = self.nodes.get(c).ok_or("dangling child id")?;
                if child.parent != Some(n.id) {
                    return Err(format!("child {} does not point back to {}", c, n.id));
                }
            }
        }
        let order = self.traversal_order();
        if order.len() != self.nodes.len() {
            return Err("tree is not connected".to_string());
        }
        let mut seen = std::collections::HashSet::new();
        if !order.iter().all(|id| seen.insert(*id)) {
            return Err("tree has a cycle".to_string());
        }
        Ok(())
    }
}

fn anchor_of(node: &TreeNode) -> Option<Timestamp> {
    node.indicator.reference_anchor()
}
