//! Comment records, tokenization, vocabularies and entity documents.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const END: TokenId = 2;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const END_TOKEN: &str = "<end>";

/// Punctuation kept as standalone tokens instead of being stripped.
pub const KEEP_PUNCTUATION: [char; 4] = ['!', '?', '*', '"'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    NonSarcastic = 0,
    Sarcastic = 1,
}

impl Label {
    pub fn from_int(v: i64) -> Option<Self> {
        match v {
            0 => Some(Label::NonSarcastic),
            1 => Some(Label::Sarcastic),
            _ => None,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommentRecord {
    pub id: String,
    pub user_id: String,
    pub forum_id: String,
    pub text: String,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedComment {
    pub record_id: String,
    pub tokens: Vec<TokenId>,
    pub original_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityDocument {
    pub entity_id: String,
    pub tokens: Vec<TokenId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKey {
    User,
    Forum,
}

impl EntityKey {
    fn of(self, c: &CommentRecord) -> &str {
        match self {
            EntityKey::User => &c.user_id,
            EntityKey::Forum => &c.forum_id,
        }
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2026}' | '\u{2013}' | '\u{2014}'
        )
}

/// Lowercases, splits on Unicode whitespace and strips leading and trailing
/// punctuation from every piece. Characters of [`KEEP_PUNCTUATION`] found in
/// the stripped margins are emitted as tokens of their own.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for piece in lower.split_whitespace() {
        let chars: Vec<char> = piece.chars().collect();
        let mut start = 0;
        while start < chars.len() && is_punctuation(chars[start]) {
            if KEEP_PUNCTUATION.contains(&chars[start]) {
                out.push(chars[start].to_string());
            }
            start += 1;
        }
        let mut end = chars.len();
        while end > start && is_punctuation(chars[end - 1]) {
            end -= 1;
        }
        if start < end {
            out.push(chars[start..end].iter().collect());
        }
        for &c in &chars[end..] {
            if KEEP_PUNCTUATION.contains(&c) {
                out.push(c.to_string());
            }
        }
    }
    out
}

/// Token/index map with frequencies.
///
/// Indices 0, 1, 2 are PAD, UNK and END; the rest are ordered by descending
/// count with ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: BTreeMap<String, TokenId>,
    min_count: u64,
}

impl Vocabulary {
    pub fn build<I, S>(texts: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count < 1 {
            return Err(Error::contract("min_count must be at least 1"));
        }
        let mut freq: BTreeMap<String, u64> = BTreeMap::new();
        for text in texts {
            for tok in tokenize(text.as_ref()) {
                *freq.entry(tok).or_insert(0) += 1;
            }
        }
        let mut unk = 0;
        let mut kept: Vec<(String, u64)> = Vec::new();
        for (tok, c) in freq {
            if c >= min_count {
                kept.push((tok, c));
            } else {
                unk += c;
            }
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = Vec::with_capacity(kept.len() + 3);
        let mut counts = Vec::with_capacity(kept.len() + 3);
        tokens.extend([PAD_TOKEN, UNK_TOKEN, END_TOKEN].map(String::from));
        counts.extend([0, unk, 0]);
        for (t, c) in kept {
            tokens.push(t);
            counts.push(c);
        }
        Self::from_parts(tokens, counts, min_count)
    }

    /// Reassembles a vocabulary from its index-ordered tokens and counts.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>, min_count: u64) -> Result<Self> {
        if tokens.len() != counts.len() {
            return Err(Error::contract("token and count lists differ in length"));
        }
        if tokens.len() < 3
            || tokens[0] != PAD_TOKEN
            || tokens[1] != UNK_TOKEN
            || tokens[2] != END_TOKEN
        {
            return Err(Error::contract("vocabulary must start with <pad>, <unk>, <end>"));
        }
        if tokens.len() > TokenId::MAX as usize {
            return Err(Error::contract("vocabulary too large"));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(Error::contract(alloc::format!("duplicate token `{t}`")));
            }
        }
        Ok(Self {
            tokens,
            counts,
            index,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn index_of(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Maps tokens to indices, unknown tokens to UNK.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens
            .iter()
            .map(|t| self.index_of(t.as_ref()).unwrap_or(UNK))
            .collect()
    }

    pub fn encode_text(&self, text: &str) -> Vec<TokenId> {
        self.encode(&tokenize(text))
    }

    pub fn tokenize_comment(&self, record: &CommentRecord) -> TokenizedComment {
        let tokens = self.encode_text(&record.text);
        TokenizedComment {
            record_id: record.id.clone(),
            original_length: tokens.len(),
            tokens,
        }
    }
}

/// One document per distinct user or forum, comments joined by END.
///
/// Entities are ordered by id; comments keep their input order.
pub fn build_entity_documents(
    comments: &[CommentRecord],
    key: EntityKey,
    vocab: &Vocabulary,
) -> Vec<EntityDocument> {
    let mut groups: BTreeMap<&str, (Vec<TokenId>, usize)> = BTreeMap::new();
    for c in comments {
        let (tokens, n) = groups.entry(key.of(c)).or_default();
        if *n > 0 {
            tokens.push(END);
        }
        tokens.extend(vocab.encode_text(&c.text));
        *n += 1;
    }
    groups
        .into_iter()
        .map(|(id, (tokens, _))| EntityDocument {
            entity_id: id.to_string(),
            tokens,
        })
        .collect()
}

/// Comments of each user, tokenized, keyed by user id.
pub fn comments_by_user(
    comments: &[CommentRecord],
    vocab: &Vocabulary,
) -> BTreeMap<String, Vec<Vec<TokenId>>> {
    let mut out: BTreeMap<String, Vec<Vec<TokenId>>> = BTreeMap::new();
    for c in comments {
        out.entry(c.user_id.clone())
            .or_default()
            .push(vocab.encode_text(&c.text));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(id: &str, user: &str, forum: &str, text: &str) -> CommentRecord {
        CommentRecord {
            id: id.into(),
            user_id: user.into(),
            forum_id: forum.into(),
            text: text.into(),
            label: None,
        }
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(tokenize("I'm sure!"), vec!["i'm", "sure", "!"]);
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("*that's* a religion"),
            vec!["*", "that's", "*", "a", "religion"]
        );
        assert_eq!(tokenize("(well,)"), vec!["well"]);
        assert_eq!(tokenize("\"Great\"...!?"), vec!["\"", "great", "\"", "!", "?"]);
    }

    #[test]
    fn tokenizer_is_idempotent_on_samples() {
        for s in ["Oh, *really*?!", "Yeah… right.", "\"quote\" 'single'", "a--b --"] {
            let once = tokenize(s);
            assert_eq!(tokenize(&once.join(" ")), once, "{s}");
        }
    }

    #[test]
    fn vocabulary_counts_and_threshold() {
        let v = Vocabulary::build(["a a b"], 1).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.index_of("a"), Some(3));
        assert_eq!(v.counts()[3], 2);
        assert_eq!(v.index_of("b"), Some(4));
        assert_eq!(v.counts()[4], 1);

        let v = Vocabulary::build(["a a b"], 2).unwrap();
        assert_eq!(v.index_of("b"), None);
        assert_eq!(v.encode(&["b"]), vec![UNK]);
        assert_eq!(v.counts()[UNK as usize], 1);
    }

    #[test]
    fn vocabulary_is_deterministic_with_lexicographic_ties() {
        let texts = ["z y x z y x w", "w"];
        let a = Vocabulary::build(texts, 1).unwrap();
        let b = Vocabulary::build(texts, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(&a.tokens()[3..], &["w", "x", "y", "z"]);
    }

    #[test]
    fn min_count_zero_rejected() {
        assert!(Vocabulary::build(["a"], 0).is_err());
    }

    #[test]
    fn user_document_joins_with_end() {
        let comments = vec![rec("1", "u1", "f", "a b"), rec("2", "u1", "f", "c")];
        let vocab = Vocabulary::build(comments.iter().map(|c| &c.text), 1).unwrap();
        let docs = build_entity_documents(&comments, EntityKey::User, &vocab);
        assert_eq!(docs.len(), 1);
        let expected: Vec<TokenId> = vec![
            vocab.index_of("a").unwrap(),
            vocab.index_of("b").unwrap(),
            END,
            vocab.index_of("c").unwrap(),
        ];
        assert_eq!(docs[0].tokens, expected);
    }

    #[test]
    fn documents_per_entity() {
        let comments = vec![
            rec("1", "u2", "f1", "x"),
            rec("2", "u1", "f2", "y"),
            rec("3", "u2", "f2", ""),
        ];
        let vocab = Vocabulary::build(comments.iter().map(|c| &c.text), 1).unwrap();
        let docs = build_entity_documents(&comments, EntityKey::User, &vocab);
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].entity_id, "u1");
        // "x" then an empty comment: one delimiter
        assert_eq!(docs[1].tokens, vec![vocab.index_of("x").unwrap(), END]);
        let forums = build_entity_documents(&comments, EntityKey::Forum, &vocab);
        assert_eq!(forums.len(), 2);
    }
}
