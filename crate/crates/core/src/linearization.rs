//! Triplet sets as marker-delimited token sequences.
//!
//! A set renders as `[s] subject [r] relation [o] object [e]` blocks in list
//! order. [`parse_lenient`] accepts anything and reports what it could not
//! use; [`parse_strict`] additionally requires every field to be in the
//! catalog and fails on the first problem.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::{LinearizationError, VocabError};
use crate::vocab::{Special, TokenId, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct Triplet {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triplet {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: impl Into<String>) -> Self {
        Triplet {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }

    pub fn mentions(&self, entity: &str) -> bool {
        self.subject == entity || self.object == entity
    }
}

impl From<(String, String, String)> for Triplet {
    fn from((s, r, o): (String, String, String)) -> Self {
        Triplet::new(s, r, o)
    }
}

impl From<Triplet> for (String, String, String) {
    fn from(t: Triplet) -> Self {
        (t.subject, t.relation, t.object)
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.relation, self.object)
    }
}

/// Ordered, duplicate-free list of triplets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Triplet>", into = "Vec<Triplet>")]
pub struct TripletSet(Vec<Triplet>);

impl TripletSet {
    pub fn new() -> Self {
        TripletSet(Vec::new())
    }

    /// Appends unless already present. Returns whether it was inserted.
    pub fn insert(&mut self, triplet: Triplet) -> bool {
        if self.0.contains(&triplet) {
            false
        } else {
            self.0.push(triplet);
            true
        }
    }

    pub fn contains(&self, triplet: &Triplet) -> bool {
        self.0.contains(triplet)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Triplet> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Triplet] {
        &self.0
    }

    /// Distinct entities in order of first mention.
    pub fn entities(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in &self.0 {
            for e in [t.subject.as_str(), t.object.as_str()] {
                if seen.insert(e) {
                    out.push(e);
                }
            }
        }
        out
    }

    pub fn retain<F: FnMut(&Triplet) -> bool>(&mut self, f: F) {
        self.0.retain(f)
    }

    /// Linearized form without going through a vocabulary. Matches
    /// [`render_text`] for names that tokenize.
    pub fn to_text(&self) -> String {
        let blocks: Vec<String> = self
            .0
            .iter()
            .map(|t| format!("[s] {} [r] {} [o] {} [e]", t.subject, t.relation, t.object))
            .collect();
        blocks.join(" ")
    }

    /// Triplets in both sets, in `self`'s order.
    pub fn intersection(&self, other: &TripletSet) -> TripletSet {
        TripletSet(self.0.iter().filter(|t| other.contains(t)).cloned().collect())
    }
}

impl From<Vec<Triplet>> for TripletSet {
    /// Drops later duplicates.
    fn from(triplets: Vec<Triplet>) -> Self {
        triplets.into_iter().collect()
    }
}

impl From<TripletSet> for Vec<Triplet> {
    fn from(set: TripletSet) -> Self {
        set.0
    }
}

impl FromIterator<Triplet> for TripletSet {
    fn from_iter<I: IntoIterator<Item = Triplet>>(iter: I) -> Self {
        let mut set = TripletSet::new();
        for t in iter {
            set.insert(t);
        }
        set
    }
}

impl<'a> IntoIterator for &'a TripletSet {
    type Item = &'a Triplet;
    type IntoIter = std::slice::Iter<'a, Triplet>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl IntoIterator for TripletSet {
    type Item = Triplet;
    type IntoIter = std::vec::IntoIter<Triplet>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticKind {
    MalformedMarkers,
    EmptyField,
    OutOfCatalogEntity,
    OutOfCatalogRelation,
    TruncatedTriplet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Token offset into the parsed sequence.
    pub position: usize,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at token {}", self.kind, self.position)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub triplets: TripletSet,
    pub diagnostics: Vec<Diagnostic>,
    /// Token offsets of blocks that repeated an earlier triplet. Repeats are
    /// dropped from `triplets` but do not make the input invalid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub duplicates: Vec<usize>,
}

impl ParseReport {
    pub fn is_clean(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

/// Renders `triplets` into delimiter tokens plus content tokens. The empty
/// set renders to the empty sequence.
pub fn render<'a, I>(triplets: I, vocab: &Vocabulary) -> Result<Vec<TokenId>, VocabError>
where
    I: IntoIterator<Item = &'a Triplet>,
{
    let mut out = Vec::new();
    for t in triplets {
        out.push(Special::Subject.id());
        out.extend(vocab.tokenize(&t.subject)?);
        out.push(Special::Relation.id());
        out.extend(vocab.tokenize(&t.relation)?);
        out.push(Special::Object.id());
        out.extend(vocab.tokenize(&t.object)?);
        out.push(Special::End.id());
    }
    Ok(out)
}

/// Human-readable linearization, e.g. `[s] A [r] r [o] B [e]`.
pub fn render_text<'a, I>(triplets: I, vocab: &Vocabulary) -> Result<String, VocabError>
where
    I: IntoIterator<Item = &'a Triplet>,
{
    Ok(vocab.decode(&render(triplets, vocab)?))
}

struct Block {
    start: usize,
    fields: [String; 3],
    field_marks: [usize; 3],
}

enum BlockScan {
    Complete(Block, usize),
    Truncated,
    Malformed(usize),
}

fn scan_block(seq: &[TokenId], start: usize, vocab: &Vocabulary) -> BlockScan {
    let expected = [Special::Relation, Special::Object, Special::End];
    let mut fields: [String; 3] = Default::default();
    let mut field_marks = [start; 3];
    let mut from = start + 1;
    for (i, closing) in expected.into_iter().enumerate() {
        let Some(offset) = seq[from..].iter().position(|&t| vocab.is_special(t)) else {
            return BlockScan::Truncated;
        };
        let at = from + offset;
        if seq[at] != closing.id() {
            return BlockScan::Malformed(at);
        }
        fields[i] = vocab.content_text(&seq[from..at]).trim().to_owned();
        field_marks[i] = from - 1;
        from = at + 1;
    }
    BlockScan::Complete(
        Block {
            start,
            fields,
            field_marks,
        },
        from,
    )
}

fn structural_parse(seq: &[TokenId], vocab: &Vocabulary) -> (Vec<Block>, Vec<Diagnostic>) {
    let mut blocks = Vec::new();
    let mut diagnostics = Vec::new();
    let mut junk: Option<usize> = None;
    let mut i = 0;
    let flush = |junk: &mut Option<usize>, diagnostics: &mut Vec<Diagnostic>| {
        if let Some(position) = junk.take() {
            diagnostics.push(Diagnostic {
                position,
                kind: DiagnosticKind::MalformedMarkers,
            });
        }
    };
    while i < seq.len() {
        let tok = seq[i];
        if tok == Special::Subject.id() {
            flush(&mut junk, &mut diagnostics);
            match scan_block(seq, i, vocab) {
                BlockScan::Complete(block, next) => {
                    if let Some(f) = block.fields.iter().position(String::is_empty) {
                        diagnostics.push(Diagnostic {
                            position: block.field_marks[f],
                            kind: DiagnosticKind::EmptyField,
                        });
                    } else {
                        blocks.push(block);
                    }
                    i = next;
                }
                BlockScan::Truncated => {
                    diagnostics.push(Diagnostic {
                        position: i,
                        kind: DiagnosticKind::TruncatedTriplet,
                    });
                    i = seq.len();
                }
                BlockScan::Malformed(at) => {
                    diagnostics.push(Diagnostic {
                        position: i,
                        kind: DiagnosticKind::MalformedMarkers,
                    });
                    i = at;
                }
            }
        } else if !vocab.is_special(tok) && junk.is_none() && vocab.token(tok).is_some_and(|s| s.trim().is_empty()) {
            i += 1;
        } else {
            junk.get_or_insert(i);
            i += 1;
        }
    }
    flush(&mut junk, &mut diagnostics);
    (blocks, diagnostics)
}

fn collect(blocks: Vec<Block>, diagnostics: Vec<Diagnostic>) -> ParseReport {
    let mut report = ParseReport {
        diagnostics,
        ..ParseReport::default()
    };
    for block in blocks {
        let [s, r, o] = block.fields;
        if !report.triplets.insert(Triplet::new(s, r, o)) {
            report.duplicates.push(block.start);
        }
    }
    report
}

/// Best-effort parse that never fails. Every well-formed block becomes a
/// triplet verbatim; everything else is reported.
pub fn parse_lenient(seq: &[TokenId], vocab: &Vocabulary) -> ParseReport {
    let (blocks, diagnostics) = structural_parse(seq, vocab);
    collect(blocks, diagnostics)
}

/// Lenient parse plus catalog membership checks on every field.
pub fn parse_checked(seq: &[TokenId], catalog: &Catalog) -> ParseReport {
    let (blocks, mut diagnostics) = structural_parse(seq, catalog.vocab());
    for block in &blocks {
        let [s, r, o] = &block.fields;
        let checks = [
            (catalog.has_entity(s), DiagnosticKind::OutOfCatalogEntity, 0),
            (catalog.has_relation(r), DiagnosticKind::OutOfCatalogRelation, 1),
            (catalog.has_entity(o), DiagnosticKind::OutOfCatalogEntity, 2),
        ];
        for (ok, kind, field) in checks {
            if !ok {
                diagnostics.push(Diagnostic {
                    position: block.field_marks[field],
                    kind,
                });
            }
        }
    }
    diagnostics.sort_by_key(|d| d.position);
    collect(blocks, diagnostics)
}

/// Parses a sequence that must be a valid linearization over `catalog`.
pub fn parse_strict(seq: &[TokenId], catalog: &Catalog) -> Result<TripletSet, LinearizationError> {
    let report = parse_checked(seq, catalog);
    match report.diagnostics.first() {
        Some(&d) => Err(LinearizationError::StrictParse(d)),
        None => Ok(report.triplets),
    }
}

pub fn parse_lenient_text(text: &str, vocab: &Vocabulary) -> Result<ParseReport, VocabError> {
    Ok(parse_lenient(&vocab.encode_marked(text)?, vocab))
}

pub fn parse_strict_text(text: &str, catalog: &Catalog) -> Result<TripletSet, LinearizationError> {
    let seq = catalog.vocab().encode_marked(text)?;
    parse_strict(&seq, catalog)
}
