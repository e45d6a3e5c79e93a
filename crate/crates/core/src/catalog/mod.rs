//! Entity and relation catalogs (the knowledge base) with prefix indexes.
//!
//! A [`Catalog`] is cheap to clone: the name sets and tries live behind an
//! `Arc`, and [`Catalog::restrict`] only allocates an overlay for the removed
//! entities.

mod index;

pub use index::{Cursor, IndexView, NodeId, PrefixIndex, Removal, UNREACHABLE};

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::CatalogError;
use crate::vocab::{contains_special, Vocabulary};

pub const MANIFEST_FORMAT: &str = "boostcd-catalog/1";

#[derive(Debug)]
struct NameSet {
    /// Sorted.
    names: Vec<String>,
    lookup: HashSet<String>,
    index: PrefixIndex,
}

impl NameSet {
    fn build(mut names: Vec<String>, vocab: &Vocabulary) -> Result<Self, CatalogError> {
        names.sort_unstable();
        let index = PrefixIndex::build(names.iter().map(String::as_str), vocab)?;
        let lookup = names.iter().cloned().collect();
        Ok(NameSet { names, lookup, index })
    }
}

#[derive(Debug)]
struct Restriction {
    names: BTreeSet<String>,
    overlay: Removal,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    vocab: Arc<Vocabulary>,
    entities: Arc<NameSet>,
    relations: Arc<NameSet>,
    restriction: Option<Arc<Restriction>>,
}

/// Validates one catalog name. `line` is 1-based and only used in errors.
pub fn check_name(name: &str, line: usize) -> Result<(), CatalogError> {
    let invalid = |reason| CatalogError::InvalidName {
        name: name.to_owned(),
        line,
        reason,
    };
    if name.is_empty() {
        return Err(invalid("empty name"));
    }
    if name.trim() != name {
        return Err(invalid("leading or trailing whitespace"));
    }
    if name.contains(['\n', '\r']) {
        return Err(invalid("line break inside name"));
    }
    if contains_special(name).is_some() {
        return Err(invalid("contains a reserved marker string"));
    }
    Ok(())
}

fn collect_names<I>(names: I) -> Result<Vec<String>, CatalogError>
where
    I: IntoIterator<Item = String>,
{
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, name) in names.into_iter().enumerate() {
        check_name(&name, i + 1)?;
        if !seen.insert(name.clone()) {
            return Err(CatalogError::DuplicateName { name, line: i + 1 });
        }
        out.push(name);
    }
    Ok(out)
}

/// Reads one name per line. Blank lines are rejected.
pub fn read_names<R: Read>(reader: R) -> Result<Vec<String>, CatalogError> {
    let mut names = Vec::new();
    for line in BufReader::new(reader).lines() {
        let line = line?;
        let line = line.strip_suffix('\r').map(str::to_owned).unwrap_or(line);
        names.push(line);
    }
    collect_names(names)
}

impl Catalog {
    pub fn new<E, R>(vocab: Arc<Vocabulary>, entities: E, relations: R) -> Result<Self, CatalogError>
    where
        E: IntoIterator,
        E::Item: Into<String>,
        R: IntoIterator,
        R::Item: Into<String>,
    {
        let entities = collect_names(entities.into_iter().map(Into::into))?;
        let relations = collect_names(relations.into_iter().map(Into::into))?;
        Ok(Catalog {
            entities: Arc::new(NameSet::build(entities, &vocab)?),
            relations: Arc::new(NameSet::build(relations, &vocab)?),
            vocab,
            restriction: None,
        })
    }

    /// Builds a catalog over a character-level vocabulary covering printable
    /// ASCII and every character of every name.
    pub fn with_char_vocab<E, R>(entities: E, relations: R) -> Result<Self, CatalogError>
    where
        E: IntoIterator,
        E::Item: Into<String>,
        R: IntoIterator,
        R::Item: Into<String>,
    {
        let entities: Vec<String> = entities.into_iter().map(Into::into).collect();
        let relations: Vec<String> = relations.into_iter().map(Into::into).collect();
        let vocab = Vocabulary::for_texts(entities.iter().chain(&relations).map(String::as_str));
        Catalog::new(Arc::new(vocab), entities, relations)
    }

    /// Loads one-name-per-line files. With no vocabulary given, a
    /// character-level one is derived from the names.
    pub fn from_files(entities: &Path, relations: &Path, vocab: Option<Arc<Vocabulary>>) -> Result<Self, CatalogError> {
        let entity_names = read_names(File::open(entities)?)?;
        let relation_names = read_names(File::open(relations)?)?;
        match vocab {
            Some(vocab) => Catalog::new(vocab, entity_names, relation_names),
            None => Catalog::with_char_vocab(entity_names, relation_names),
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_arc(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.vocab)
    }

    pub fn entity_index(&self) -> IndexView<'_> {
        IndexView::new(&self.entities.index, self.restriction.as_deref().map(|r| &r.overlay))
    }

    pub fn relation_index(&self) -> IndexView<'_> {
        self.relations.index.view()
    }

    pub fn has_entity(&self, name: &str) -> bool {
        self.entities.lookup.contains(name) && !self.restriction.as_ref().is_some_and(|r| r.names.contains(name))
    }

    pub fn has_relation(&self, name: &str) -> bool {
        self.relations.lookup.contains(name)
    }

    /// Visible entities in sorted order.
    pub fn entities(&self) -> impl Iterator<Item = &str> + '_ {
        self.entities
            .names
            .iter()
            .map(String::as_str)
            .filter(|n| self.has_entity(n))
    }

    /// Relations in sorted order.
    pub fn relations(&self) -> impl Iterator<Item = &str> + '_ {
        self.relations.names.iter().map(String::as_str)
    }

    pub fn entity_count(&self) -> usize {
        self.entities.names.len() - self.removed_entities().count()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.names.len()
    }

    pub fn removed_entities(&self) -> impl Iterator<Item = &str> + '_ {
        self.restriction.iter().flat_map(|r| r.names.iter().map(String::as_str))
    }

    /// Returns a view without `removed`. The receiver is left untouched and
    /// restrictions compose: removing S then T equals removing S ∪ T.
    pub fn restrict<I, S>(&self, removed: I) -> Result<Catalog, CatalogError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut names: BTreeSet<String> = self.restriction.as_ref().map(|r| r.names.clone()).unwrap_or_default();
        let before = names.len();
        for name in removed {
            let name = name.as_ref();
            // names already removed by an earlier restriction are accepted
            if !self.entities.lookup.contains(name) {
                return Err(CatalogError::UnknownEntity(name.to_owned()));
            }
            names.insert(name.to_owned());
        }
        if names.len() == before {
            return Ok(self.clone());
        }
        let sequences: Vec<_> = names
            .iter()
            .map(|n| self.vocab.tokenize(n).expect("catalog names are tokenizable"))
            .collect();
        let overlay = Removal::build(&self.entities.index, sequences.iter().map(Vec::as_slice));
        Ok(Catalog {
            vocab: Arc::clone(&self.vocab),
            entities: Arc::clone(&self.entities),
            relations: Arc::clone(&self.relations),
            restriction: Some(Arc::new(Restriction { names, overlay })),
        })
    }

    /// The unrestricted catalog this view was derived from.
    pub fn unrestricted(&self) -> Catalog {
        Catalog {
            restriction: None,
            ..self.clone()
        }
    }

    pub fn manifest(&self) -> CatalogManifest {
        CatalogManifest {
            format: MANIFEST_FORMAT.to_owned(),
            vocab: (*self.vocab).clone(),
            entities: self.entities().map(str::to_owned).collect(),
            relations: self.relations().map(str::to_owned).collect(),
            stats: CatalogStats {
                entities: self.entity_count(),
                relations: self.relation_count(),
                vocab_size: self.vocab.len(),
            },
        }
    }

    pub fn from_manifest(manifest: CatalogManifest) -> Result<Self, CatalogError> {
        if manifest.format != MANIFEST_FORMAT {
            return Err(CatalogError::Format(manifest.format));
        }
        Catalog::new(Arc::new(manifest.vocab), manifest.entities, manifest.relations)
    }

    pub fn write_manifest<W: Write>(&self, writer: W) -> Result<(), CatalogError> {
        serde_json::to_writer_pretty(writer, &self.manifest())?;
        Ok(())
    }

    pub fn read_manifest<R: Read>(reader: R) -> Result<Self, CatalogError> {
        let manifest: CatalogManifest = serde_json::from_reader(BufReader::new(reader))?;
        Catalog::from_manifest(manifest)
    }

    /// Loads either a manifest file or a directory holding `entities.txt`
    /// and `relations.txt`.
    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        if path.is_dir() {
            Catalog::from_files(&path.join("entities.txt"), &path.join("relations.txt"), None)
        } else {
            Catalog::read_manifest(File::open(path)?)
        }
    }
}

/// On-disk catalog description. The tries are rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogManifest {
    pub format: String,
    pub vocab: Vocabulary,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub stats: CatalogStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogStats {
    pub entities: usize,
    pub relations: usize,
    pub vocab_size: usize,
}
