//! Token-level prefix trie over catalog names.
//!
//! Besides children and the terminal flag, every node caches the number of
//! names below it and the distance to the nearest terminal. The first lets a
//! [`Removal`] overlay hide names without rebuilding the trie; the second
//! lets the decoder prune hypotheses that cannot close within budget.

use std::collections::BTreeSet;

use crate::error::CatalogError;
use crate::vocab::{TokenId, Vocabulary};

pub type NodeId = u32;

/// Marker for "no terminal reachable".
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone, Default)]
struct Node {
    /// Sorted by token id.
    children: Vec<(TokenId, NodeId)>,
    terminal: bool,
    names: u32,
    min_depth: u32,
}

#[derive(Debug, Clone)]
pub struct PrefixIndex {
    nodes: Vec<Node>,
}

impl Default for PrefixIndex {
    fn default() -> Self {
        let mut index = PrefixIndex {
            nodes: vec![Node::default()],
        };
        index.finish();
        index
    }
}

impl PrefixIndex {
    pub const ROOT: NodeId = 0;

    /// Builds an index over the tokenizations of `names`.
    pub fn build<'a, I>(names: I, vocab: &Vocabulary) -> Result<Self, CatalogError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut index = PrefixIndex {
            nodes: vec![Node::default()],
        };
        for name in names {
            let tokens = vocab.tokenize(name).map_err(|source| CatalogError::UnknownToken {
                name: name.to_owned(),
                source,
            })?;
            index.insert(&tokens);
        }
        index.finish();
        Ok(index)
    }

    /// Builds an index directly from token sequences. Empty sequences are ignored.
    pub fn from_sequences<'a, I>(sequences: I) -> Self
    where
        I: IntoIterator<Item = &'a [TokenId]>,
    {
        let mut index = PrefixIndex {
            nodes: vec![Node::default()],
        };
        for seq in sequences {
            index.insert(seq);
        }
        index.finish();
        index
    }

    fn insert(&mut self, tokens: &[TokenId]) {
        if tokens.is_empty() {
            return;
        }
        let mut node = Self::ROOT;
        for &tok in tokens {
            let children = &self.nodes[node as usize].children;
            node = match children.binary_search_by_key(&tok, |&(t, _)| t) {
                Ok(at) => children[at].1,
                Err(at) => {
                    let id = self.nodes.len() as NodeId;
                    self.nodes[node as usize].children.insert(at, (tok, id));
                    self.nodes.push(Node::default());
                    id
                }
            };
        }
        self.nodes[node as usize].terminal = true;
    }

    // Children always have larger ids than their parent, so a reverse sweep
    // visits every subtree before its root.
    fn finish(&mut self) {
        for id in (0..self.nodes.len()).rev() {
            let (mut names, mut min_depth) = if self.nodes[id].terminal {
                (1u32, 0u32)
            } else {
                (0, UNREACHABLE)
            };
            for &(_, child) in &self.nodes[id].children {
                let c = &self.nodes[child as usize];
                names += c.names;
                min_depth = min_depth.min(c.min_depth.saturating_add(1));
            }
            self.nodes[id].names = names;
            self.nodes[id].min_depth = min_depth;
        }
    }

    /// Number of names stored.
    pub fn len(&self) -> usize {
        self.nodes[Self::ROOT as usize].names as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn child(&self, node: NodeId, token: TokenId) -> Option<NodeId> {
        let children = &self.nodes[node as usize].children;
        children
            .binary_search_by_key(&token, |&(t, _)| t)
            .ok()
            .map(|at| children[at].1)
    }

    pub fn children(&self, node: NodeId) -> &[(TokenId, NodeId)] {
        &self.nodes[node as usize].children
    }

    pub fn is_terminal(&self, node: NodeId) -> bool {
        self.nodes[node as usize].terminal
    }

    pub fn names_below(&self, node: NodeId) -> u32 {
        self.nodes[node as usize].names
    }

    /// Tokens needed from `node` to reach the nearest terminal.
    pub fn min_depth(&self, node: NodeId) -> u32 {
        self.nodes[node as usize].min_depth
    }

    pub fn walk(&self, prefix: &[TokenId]) -> Option<NodeId> {
        prefix.iter().try_fold(Self::ROOT, |node, &tok| self.child(node, tok))
    }

    pub fn allowed_next(&self, prefix: &[TokenId]) -> Result<(BTreeSet<TokenId>, bool), CatalogError> {
        self.view().allowed_next(prefix)
    }

    pub fn contains(&self, tokens: &[TokenId]) -> bool {
        !tokens.is_empty() && self.walk(tokens).is_some_and(|n| self.is_terminal(n))
    }

    /// Unrestricted view of the whole index.
    pub fn view(&self) -> IndexView<'_> {
        IndexView {
            base: self,
            removal: None,
        }
    }
}

#[derive(Debug, Clone)]
struct OverlayNode {
    base: NodeId,
    children: Vec<(TokenId, u32)>,
    removed: u32,
    removed_terminal: bool,
    min_depth: u32,
}

/// Names hidden from a [`PrefixIndex`], stored as a small trie that mirrors
/// the base paths of the removed names.
#[derive(Debug, Clone)]
pub struct Removal {
    nodes: Vec<OverlayNode>,
}

impl Removal {
    /// `sequences` must be distinct tokenizations of names present in `base`.
    pub fn build<'a, I>(base: &PrefixIndex, sequences: I) -> Self
    where
        I: IntoIterator<Item = &'a [TokenId]>,
    {
        let mut nodes = vec![OverlayNode {
            base: PrefixIndex::ROOT,
            children: Vec::new(),
            removed: 0,
            removed_terminal: false,
            min_depth: 0,
        }];
        for seq in sequences {
            let mut at = 0usize;
            nodes[0].removed += 1;
            for &tok in seq {
                let base_child = base
                    .child(nodes[at].base, tok)
                    .expect("removed name must be present in the base index");
                let next = match nodes[at].children.binary_search_by_key(&tok, |&(t, _)| t) {
                    Ok(i) => nodes[at].children[i].1 as usize,
                    Err(i) => {
                        let id = nodes.len();
                        nodes[at].children.insert(i, (tok, id as u32));
                        nodes.push(OverlayNode {
                            base: base_child,
                            children: Vec::new(),
                            removed: 0,
                            removed_terminal: false,
                            min_depth: 0,
                        });
                        id
                    }
                };
                nodes[next].removed += 1;
                at = next;
            }
            nodes[at].removed_terminal = true;
        }
        for id in (0..nodes.len()).rev() {
            let node = &nodes[id];
            let mut best = if base.is_terminal(node.base) && !node.removed_terminal {
                0
            } else {
                UNREACHABLE
            };
            for &(tok, base_child) in base.children(node.base) {
                let depth = match node.children.binary_search_by_key(&tok, |&(t, _)| t) {
                    Ok(i) => {
                        let o = &nodes[node.children[i].1 as usize];
                        if o.removed == base.names_below(base_child) {
                            continue;
                        }
                        o.min_depth
                    }
                    Err(_) => base.min_depth(base_child),
                };
                best = best.min(depth.saturating_add(1));
            }
            nodes[id].min_depth = best;
        }
        Removal { nodes }
    }

    pub fn removed(&self) -> usize {
        self.nodes[0].removed as usize
    }
}

/// A position inside an [`IndexView`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cursor {
    node: NodeId,
    overlay: Option<u32>,
}

impl Cursor {
    pub fn node(&self) -> NodeId {
        self.node
    }
}

/// A prefix index with an optional set of hidden names.
#[derive(Debug, Clone, Copy)]
pub struct IndexView<'a> {
    base: &'a PrefixIndex,
    removal: Option<&'a Removal>,
}

impl<'a> IndexView<'a> {
    pub fn new(base: &'a PrefixIndex, removal: Option<&'a Removal>) -> Self {
        IndexView { base, removal }
    }

    pub fn root(&self) -> Cursor {
        Cursor {
            node: PrefixIndex::ROOT,
            overlay: self.removal.map(|_| 0),
        }
    }

    fn overlay(&self, cursor: Cursor) -> Option<&'a OverlayNode> {
        match (self.removal, cursor.overlay) {
            (Some(r), Some(o)) => Some(&r.nodes[o as usize]),
            _ => None,
        }
    }

    pub fn names_below(&self, cursor: Cursor) -> u32 {
        let removed = self.overlay(cursor).map_or(0, |o| o.removed);
        self.base.names_below(cursor.node) - removed
    }

    pub fn len(&self) -> usize {
        self.names_below(self.root()) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_terminal(&self, cursor: Cursor) -> bool {
        self.base.is_terminal(cursor.node) && !self.overlay(cursor).is_some_and(|o| o.removed_terminal)
    }

    pub fn min_depth(&self, cursor: Cursor) -> u32 {
        match self.overlay(cursor) {
            Some(o) => o.min_depth,
            None => self.base.min_depth(cursor.node),
        }
    }

    /// Steps to `token`, or `None` if no visible name continues that way.
    pub fn step(&self, cursor: Cursor, token: TokenId) -> Option<Cursor> {
        let node = self.base.child(cursor.node, token)?;
        let overlay = self.overlay(cursor).and_then(|o| {
            o.children
                .binary_search_by_key(&token, |&(t, _)| t)
                .ok()
                .map(|i| o.children[i].1)
        });
        let next = Cursor { node, overlay };
        (self.names_below(next) > 0).then_some(next)
    }

    /// Visible children in ascending token order.
    pub fn children(&self, cursor: Cursor) -> impl Iterator<Item = (TokenId, Cursor)> + '_ {
        self.base
            .children(cursor.node)
            .iter()
            .filter_map(move |&(tok, _)| self.step(cursor, tok).map(|c| (tok, c)))
    }

    pub fn walk(&self, prefix: &[TokenId]) -> Option<Cursor> {
        prefix
            .iter()
            .try_fold(self.root(), |c, &tok| self.step(c, tok))
            .filter(|&c| self.names_below(c) > 0)
    }

    pub fn allowed_next(&self, prefix: &[TokenId]) -> Result<(BTreeSet<TokenId>, bool), CatalogError> {
        if prefix.is_empty() {
            let root = self.root();
            return Ok((self.children(root).map(|(t, _)| t).collect(), false));
        }
        let cursor = self
            .walk(prefix)
            .ok_or_else(|| CatalogError::InvalidPrefix(prefix.to_vec()))?;
        Ok((
            self.children(cursor).map(|(t, _)| t).collect(),
            self.is_terminal(cursor),
        ))
    }

    pub fn contains(&self, tokens: &[TokenId]) -> bool {
        !tokens.is_empty() && self.walk(tokens).is_some_and(|c| self.is_terminal(c))
    }
}
