use std::collections::BTreeSet;

use crate::catalog::{Catalog, Cursor, UNREACHABLE};
use crate::error::DecodeError;
use crate::linearization::Triplet;
use crate::vocab::{Special, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GrammarPhase {
    AtTripletBoundary,
    InSubject,
    InRelation,
    InObject,
}

/// Position in the linearization grammar crossed with the position in the
/// entity or relation trie.
///
/// `emitted` may repeat a triplet; repeats are removed when the output is
/// parsed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecoderState {
    phase: GrammarPhase,
    cursor: Option<Cursor>,
    emitted: Vec<Triplet>,
    partial: Vec<TokenId>,
    subject: Option<String>,
    relation: Option<String>,
}

impl Default for DecoderState {
    fn default() -> Self {
        DecoderState {
            phase: GrammarPhase::AtTripletBoundary,
            cursor: None,
            emitted: Vec::new(),
            partial: Vec::new(),
            subject: None,
            relation: None,
        }
    }
}

impl DecoderState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn phase(&self) -> GrammarPhase {
        self.phase
    }

    pub fn cursor(&self) -> Option<Cursor> {
        self.cursor
    }

    pub fn emitted(&self) -> &[Triplet] {
        &self.emitted
    }

    /// Tokens of the field being generated.
    pub fn partial(&self) -> &[TokenId] {
        &self.partial
    }

    /// Tokens that keep the output extendable to a strictly parseable
    /// linearization over `catalog`.
    pub fn allowed_tokens(&self, catalog: &Catalog) -> BTreeSet<TokenId> {
        let mut allowed = BTreeSet::new();
        let (cursor, view, closing) = match self.phase {
            GrammarPhase::AtTripletBoundary => {
                allowed.insert(Special::Eos.id());
                if !catalog.entity_index().is_empty() && !catalog.relation_index().is_empty() {
                    allowed.insert(Special::Subject.id());
                }
                return allowed;
            }
            GrammarPhase::InSubject => (self.cursor, catalog.entity_index(), Special::Relation),
            GrammarPhase::InRelation => (self.cursor, catalog.relation_index(), Special::Object),
            GrammarPhase::InObject => (self.cursor, catalog.entity_index(), Special::End),
        };
        let cursor = cursor.expect("cursor is set inside a field");
        allowed.extend(view.children(cursor).map(|(t, _)| t));
        if !self.partial.is_empty() && view.is_terminal(cursor) {
            allowed.insert(closing.id());
        }
        allowed
    }

    /// Deterministic transition on an allowed token. `Eos` leaves the state unchanged.
    pub fn advance(&self, token: TokenId, catalog: &Catalog) -> Result<DecoderState, DecodeError> {
        let illegal = DecodeError::IllegalTransition { token };
        let mut next = self.clone();
        match self.phase {
            GrammarPhase::AtTripletBoundary => {
                if token == Special::Eos.id() {
                    return Ok(next);
                }
                if token != Special::Subject.id() || !self.allowed_tokens(catalog).contains(&token) {
                    return Err(illegal);
                }
                next.phase = GrammarPhase::InSubject;
                next.cursor = Some(catalog.entity_index().root());
                next.partial.clear();
            }
            phase => {
                let (view, closing) = match phase {
                    GrammarPhase::InSubject => (catalog.entity_index(), Special::Relation),
                    GrammarPhase::InRelation => (catalog.relation_index(), Special::Object),
                    _ => (catalog.entity_index(), Special::End),
                };
                let cursor = self.cursor.expect("cursor is set inside a field");
                if token == closing.id() {
                    if self.partial.is_empty() || !view.is_terminal(cursor) {
                        return Err(illegal);
                    }
                    let name = catalog.vocab().content_text(&self.partial);
                    next.partial.clear();
                    match phase {
                        GrammarPhase::InSubject => {
                            next.subject = Some(name);
                            next.phase = GrammarPhase::InRelation;
                            next.cursor = Some(catalog.relation_index().root());
                        }
                        GrammarPhase::InRelation => {
                            next.relation = Some(name);
                            next.phase = GrammarPhase::InObject;
                            next.cursor = Some(catalog.entity_index().root());
                        }
                        _ => {
                            let subject = next.subject.take().expect("subject recorded");
                            let relation = next.relation.take().expect("relation recorded");
                            next.emitted.push(Triplet::new(subject, relation, name));
                            next.phase = GrammarPhase::AtTripletBoundary;
                            next.cursor = None;
                        }
                    }
                } else {
                    let child = view.step(cursor, token).ok_or(illegal)?;
                    next.cursor = Some(child);
                    next.partial.push(token);
                }
            }
        }
        Ok(next)
    }

    /// Fewest further tokens, including the final `Eos`, needed to finish
    /// from this state. `None` if no completion exists.
    pub fn min_completion(&self, catalog: &Catalog) -> Option<usize> {
        let entity_root = catalog.entity_index().min_depth(catalog.entity_index().root());
        let relation_root = catalog.relation_index().min_depth(catalog.relation_index().root());
        let depth =
            |view: crate::catalog::IndexView<'_>| view.min_depth(self.cursor.expect("cursor is set inside a field"));
        // field tokens + closing marker for each remaining field, then Eos
        let fields = match self.phase {
            GrammarPhase::AtTripletBoundary => return Some(1),
            GrammarPhase::InSubject => vec![depth(catalog.entity_index()), relation_root, entity_root],
            GrammarPhase::InRelation => vec![depth(catalog.relation_index()), entity_root],
            GrammarPhase::InObject => vec![depth(catalog.entity_index())],
        };
        let mut total = 1usize;
        for d in fields {
            if d == UNREACHABLE {
                return None;
            }
            total += d as usize + 1;
        }
        Some(total)
    }
}

/// Free-function form of [`DecoderState::allowed_tokens`].
pub fn allowed_tokens(state: &DecoderState, catalog: &Catalog) -> BTreeSet<TokenId> {
    state.allowed_tokens(catalog)
}

/// Free-function form of [`DecoderState::advance`].
pub fn advance(state: &DecoderState, token: TokenId, catalog: &Catalog) -> Result<DecoderState, DecodeError> {
    state.advance(token, catalog)
}
