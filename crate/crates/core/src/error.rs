use thiserror::Error;

use crate::linearization::Diagnostic;
use crate::vocab::TokenId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VocabError {
    #[error("empty token string")]
    EmptyToken,
    #[error("token {0:?} collides with a reserved special token")]
    ReservedToken(String),
    #[error("duplicate token {0:?}")]
    DuplicateToken(String),
    #[error("cannot tokenize {text:?}: no token covers {ch:?} at byte {offset}")]
    UnknownToken { text: String, offset: usize, ch: char },
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("name {name:?} is not coverable by the vocabulary")]
    UnknownToken {
        name: String,
        #[source]
        source: VocabError,
    },
    #[error("prefix {0:?} leaves the index")]
    InvalidPrefix(Vec<TokenId>),
    #[error("entity {0:?} is not in the catalog")]
    UnknownEntity(String),
    #[error("invalid catalog name {name:?} at line {line}: {reason}")]
    InvalidName {
        name: String,
        line: usize,
        reason: &'static str,
    },
    #[error("duplicate catalog name {name:?} at line {line}")]
    DuplicateName { name: String, line: usize },
    #[error("unsupported manifest format {0:?}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearizationError {
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error("strict parse failed: {0}")]
    StrictParse(Diagnostic),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("token {token} is not allowed in the current decoder state")]
    IllegalTransition { token: TokenId },
    #[error("no hypothesis finished within {max_len} tokens")]
    NoValidContinuation { max_len: usize },
    #[error("scorer contract violated: {0}")]
    ScorerContract(String),
}

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("unknown token {0:?} in scorer definition")]
    UnknownToken(String),
    #[error("invalid scorer definition: {0}")]
    Invalid(String),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("sample {id}: {source}")]
    Decode {
        id: String,
        #[source]
        source: DecodeError,
    },
    #[error("sample {id}: {source}")]
    Linearization {
        id: String,
        #[source]
        source: LinearizationError,
    },
    #[error("sample {id}: {source}")]
    Catalog {
        id: String,
        #[source]
        source: CatalogError,
    },
    #[error("boosted input is missing segment marker {0}")]
    MissingSegment(&'static str),
    #[error("scorer chain needs at least two scorers, got {0}")]
    ShortChain(usize),
    #[error("invalid curation configuration: {0}")]
    InvalidCuration(&'static str),
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {reason}")]
    Invalid { line: usize, reason: String },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("bootstrap needs a nonempty batch")]
    EmptyBatch,
    #[error("duplicate document id {0:?}")]
    DuplicateDoc(String),
    #[error("invalid bootstrap configuration: {0}")]
    InvalidBootstrap(&'static str),
    #[error("prediction for unknown document {0:?}")]
    UnknownDoc(String),
}
