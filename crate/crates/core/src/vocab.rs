//! Token vocabulary shared by catalogs, linearizations and scorers.
//!
//! Ids `0..Special::COUNT` are reserved for the special tokens in
//! [`Special::ALL`] order; content tokens follow. Content tokenization is
//! greedy longest-match, so a character-level vocabulary and a subword
//! vocabulary go through the same code path.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::VocabError;

pub type TokenId = u32;

/// Reserved tokens used by the linearization grammar and the boosted input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Special {
    Bos,
    Eos,
    Subject,
    Relation,
    Object,
    End,
    Text,
    Unconstrained,
    Constrained,
}

impl Special {
    pub const COUNT: usize = 9;

    pub const ALL: [Special; Special::COUNT] = [
        Special::Bos,
        Special::Eos,
        Special::Subject,
        Special::Relation,
        Special::Object,
        Special::End,
        Special::Text,
        Special::Unconstrained,
        Special::Constrained,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Special::Bos => "<s>",
            Special::Eos => "</s>",
            Special::Subject => "[s]",
            Special::Relation => "[r]",
            Special::Object => "[o]",
            Special::End => "[e]",
            Special::Text => "[TEXT]",
            Special::Unconstrained => "[UNC]",
            Special::Constrained => "[CON]",
        }
    }

    pub fn id(self) -> TokenId {
        self as TokenId
    }

    pub fn from_id(id: TokenId) -> Option<Special> {
        Special::ALL.get(id as usize).copied()
    }

    /// The four triplet delimiters.
    pub fn is_triplet_marker(self) -> bool {
        matches!(
            self,
            Special::Subject | Special::Relation | Special::Object | Special::End
        )
    }
}

/// Printable ASCII, included in every vocabulary built by [`Vocabulary::for_texts`].
pub const PRINTABLE_ASCII: std::ops::RangeInclusive<char> = ' '..='~';

#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    content_ids: HashMap<String, TokenId>,
    max_token_chars: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    content_tokens: Vec<String>,
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        VocabularyRepr {
            content_tokens: self.content_tokens().map(str::to_owned).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = VocabularyRepr::deserialize(deserializer)?;
        Vocabulary::new(repr.content_tokens).map_err(serde::de::Error::custom)
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl Eq for Vocabulary {}

impl Vocabulary {
    /// Builds a vocabulary from content tokens, in the given order.
    pub fn new<I, T>(content: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let mut tokens: Vec<String> = Special::ALL.iter().map(|s| s.as_str().to_owned()).collect();
        let mut content_ids = HashMap::new();
        let mut max_token_chars = 0;
        for token in content {
            let token = token.into();
            if token.is_empty() {
                return Err(VocabError::EmptyToken);
            }
            if Special::ALL.iter().any(|s| s.as_str() == token) {
                return Err(VocabError::ReservedToken(token));
            }
            let id = tokens.len() as TokenId;
            if content_ids.insert(token.clone(), id).is_some() {
                return Err(VocabError::DuplicateToken(token));
            }
            max_token_chars = max_token_chars.max(token.chars().count());
            tokens.push(token);
        }
        Ok(Vocabulary {
            tokens,
            content_ids,
            max_token_chars,
        })
    }

    /// Character-level vocabulary over the given characters (sorted, deduplicated).
    pub fn char_level<I: IntoIterator<Item = char>>(chars: I) -> Self {
        let mut chars: Vec<char> = chars.into_iter().collect();
        chars.sort_unstable();
        chars.dedup();
        Vocabulary::new(chars.into_iter().map(String::from))
            .expect("distinct single characters are valid content tokens")
    }

    /// Character-level vocabulary covering printable ASCII plus every character of `texts`.
    pub fn for_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Self {
        let chars = PRINTABLE_ASCII.chain(texts.into_iter().flat_map(str::chars));
        Vocabulary::char_level(chars)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn special(&self, special: Special) -> TokenId {
        special.id()
    }

    pub fn is_special(&self, id: TokenId) -> bool {
        (id as usize) < Special::COUNT
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Looks up any token, special or content, by its string.
    pub fn id_of(&self, token: &str) -> Option<TokenId> {
        Special::ALL
            .iter()
            .find(|s| s.as_str() == token)
            .map(|s| s.id())
            .or_else(|| self.content_ids.get(token).copied())
    }

    pub fn content_tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens[Special::COUNT..].iter().map(String::as_str)
    }

    /// Greedy longest-match tokenization of plain text into content tokens.
    /// Special strings are never produced here; `"[s]"` inside text is
    /// tokenized as ordinary characters.
    pub fn tokenize(&self, text: &str) -> Result<Vec<TokenId>, VocabError> {
        let boundaries: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let mut out = Vec::with_capacity(boundaries.len());
        let mut pos = 0;
        while pos + 1 < boundaries.len() {
            let longest = self.max_token_chars.min(boundaries.len() - 1 - pos);
            let hit = (1..=longest).rev().find_map(|n| {
                let piece = &text[boundaries[pos]..boundaries[pos + n]];
                self.content_ids.get(piece).map(|&id| (id, n))
            });
            match hit {
                Some((id, n)) => {
                    out.push(id);
                    pos += n;
                }
                None => {
                    let offset = boundaries[pos];
                    let ch = text[offset..].chars().next().unwrap_or_default();
                    return Err(VocabError::UnknownToken {
                        text: text.to_owned(),
                        offset,
                        ch,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Encodes human-readable text in which special token strings
    /// (`[s]`, `[TEXT]`, ...) appear literally. Whitespace adjacent to a
    /// special token is treated as a separator and dropped.
    pub fn encode_marked(&self, text: &str) -> Result<Vec<TokenId>, VocabError> {
        let mut out = Vec::new();
        let mut rest = text;
        loop {
            let next = Special::ALL
                .iter()
                .filter_map(|s| rest.find(s.as_str()).map(|at| (at, *s)))
                .min_by_key(|&(at, s)| (at, std::cmp::Reverse(s.as_str().len())));
            match next {
                Some((at, special)) => {
                    out.extend(self.tokenize(rest[..at].trim())?);
                    out.push(special.id());
                    rest = &rest[at + special.as_str().len()..];
                }
                None => {
                    out.extend(self.tokenize(rest.trim())?);
                    return Ok(out);
                }
            }
        }
    }

    /// Plain concatenation of token strings; special tokens contribute their
    /// literal strings with no added whitespace.
    pub fn raw(&self, ids: &[TokenId]) -> String {
        ids.iter().filter_map(|&id| self.token(id)).collect()
    }

    /// Concatenation of content tokens only.
    pub fn content_text(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .filter(|&&id| !self.is_special(id))
            .filter_map(|&id| self.token(id))
            .collect()
    }

    /// Human-readable rendering: special tokens are separated from content by
    /// single spaces and content runs are trimmed. Inverse of
    /// [`Vocabulary::encode_marked`] on trimmed content.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        let mut pieces: Vec<String> = Vec::new();
        let mut run = String::new();
        for &id in ids {
            let Some(tok) = self.token(id) else { continue };
            if self.is_special(id) {
                let trimmed = run.trim();
                if !trimmed.is_empty() {
                    pieces.push(trimmed.to_owned());
                }
                run.clear();
                pieces.push(tok.to_owned());
            } else {
                run.push_str(tok);
            }
        }
        let trimmed = run.trim();
        if !trimmed.is_empty() {
            pieces.push(trimmed.to_owned());
        }
        pieces.join(" ")
    }
}

/// Returns the first special token string contained in `name`, if any.
pub fn contains_special(name: &str) -> Option<Special> {
    Special::ALL.iter().copied().find(|s| name.contains(s.as_str()))
}
