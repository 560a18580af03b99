//! Discrimination tree: a binary tree of contexts whose leaves are
//! components of the pack.

use crate::context::Context;
use crate::pomset::Pomset;

pub type NodeId = usize;
pub type ComponentId = usize;

#[derive(Debug, Clone)]
pub enum NodeKind {
    /// Left child: members rejected under `context`; right child: accepted.
    Inner {
        context: Context,
        left: NodeId,
        right: NodeId,
    },
    Leaf(Option<ComponentId>),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct DiscriminationTree {
    nodes: Vec<Node>,
}

impl Default for DiscriminationTree {
    fn default() -> Self {
        Self::new()
    }
}

impl DiscriminationTree {
    /// Root labelled `_` with two unlabelled leaves.
    pub fn new() -> Self {
        let leaf = |parent| Node {
            kind: NodeKind::Leaf(None),
            parent: Some(parent),
            depth: 1,
        };
        DiscriminationTree {
            nodes: vec![
                Node {
                    kind: NodeKind::Inner {
                        context: Context::hole(),
                        left: 1,
                        right: 2,
                    },
                    parent: None,
                    depth: 0,
                },
                leaf(0),
                leaf(0),
            ],
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label(&self, leaf: NodeId) -> Option<ComponentId> {
        match self.nodes[leaf].kind {
            NodeKind::Leaf(l) => l,
            NodeKind::Inner { .. } => None,
        }
    }

    pub fn context(&self, node: NodeId) -> Option<&Context> {
        match &self.nodes[node].kind {
            NodeKind::Inner { context, .. } => Some(context),
            NodeKind::Leaf(_) => None,
        }
    }

    pub fn child(&self, node: NodeId, verdict: bool) -> NodeId {
        match &self.nodes[node].kind {
            NodeKind::Inner { left, right, .. } => {
                if verdict {
                    *right
                } else {
                    *left
                }
            }
            NodeKind::Leaf(_) => panic!("leaf {node} has no children"),
        }
    }

    pub(crate) fn set_label(&mut self, leaf: NodeId, comp: ComponentId) {
        match &mut self.nodes[leaf].kind {
            NodeKind::Leaf(l @ None) => *l = Some(comp),
            _ => panic!("node {leaf} is not an unlabelled leaf"),
        }
    }

    /// Turns `leaf` into an inner node labelled `context` whose children are
    /// fresh leaves for `left` and `right`.
    pub(crate) fn split(
        &mut self,
        leaf: NodeId,
        context: Context,
        left: ComponentId,
        right: ComponentId,
    ) -> (NodeId, NodeId) {
        assert!(matches!(self.nodes[leaf].kind, NodeKind::Leaf(_)));
        let depth = self.nodes[leaf].depth + 1;
        let l = self.nodes.len();
        let r = l + 1;
        for comp in [left, right] {
            self.nodes.push(Node {
                kind: NodeKind::Leaf(Some(comp)),
                parent: Some(leaf),
                depth,
            });
        }
        self.nodes[leaf].kind = NodeKind::Inner {
            context,
            left: l,
            right: r,
        };
        (l, r)
    }

    /// Descends from the root, going right when `verdict(c[w])` holds.
    pub fn sift<E>(
        &self,
        w: &Pomset,
        mut verdict: impl FnMut(&Pomset) -> Result<bool, E>,
    ) -> Result<NodeId, E> {
        let mut node = self.root();
        while let NodeKind::Inner {
            context,
            left,
            right,
        } = &self.nodes[node].kind
        {
            node = if verdict(&context.fill(w))? {
                *right
            } else {
                *left
            };
        }
        Ok(node)
    }

    pub fn deepest_common_ancestor(&self, mut a: NodeId, mut b: NodeId) -> NodeId {
        while self.nodes[a].depth > self.nodes[b].depth {
            a = self.nodes[a].parent.expect("non-root has a parent");
        }
        while self.nodes[b].depth > self.nodes[a].depth {
            b = self.nodes[b].parent.expect("non-root has a parent");
        }
        while a != b {
            a = self.nodes[a].parent.expect("non-root has a parent");
            b = self.nodes[b].parent.expect("non-root has a parent");
        }
        a
    }

    /// Ancestors of `node`, root first, each with the verdict that leads
    /// towards `node`.
    pub fn branch(&self, node: NodeId) -> Vec<(NodeId, bool)> {
        let mut out = Vec::with_capacity(self.nodes[node].depth);
        let mut cur = node;
        while let Some(parent) = self.nodes[cur].parent {
            out.push((parent, self.child(parent, true) == cur));
            cur = parent;
        }
        out.reverse();
        out
    }

    /// Contexts labelling the ancestors of `node`, root first.
    pub fn branch_contexts(&self, node: NodeId) -> Vec<&Context> {
        self.branch(node)
            .into_iter()
            .map(|(n, _)| self.context(n).expect("ancestors are inner nodes"))
            .collect()
    }

    /// All installed contexts, in installation order.
    pub fn contexts(&self) -> impl Iterator<Item = &Context> {
        self.nodes.iter().filter_map(|n| match &n.kind {
            NodeKind::Inner { context, .. } => Some(context),
            NodeKind::Leaf(_) => None,
        })
    }

    pub fn height(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }
}
