use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SOS_TOKEN: &str = "<sos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_TOKEN: &str = "<pad>";
pub const NUM_TOKEN: &str = "<num>";

pub const SOS: usize = 0;
pub const EOS: usize = 1;
pub const UNK: usize = 2;
pub const PAD: usize = 3;
pub const NUM: usize = 4;

pub const SPECIALS: [&str; 5] = [SOS_TOKEN, EOS_TOKEN, UNK_TOKEN, PAD_TOKEN, NUM_TOKEN];

/// Token/id bijection with the five special tokens at ids 0–4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if token_to_id.insert(t.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocab {
            token_to_id,
            id_to_token: tokens,
        })
    }

    /// Vocabulary holding only the special tokens plus `words` in order.
    pub fn with_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(words.iter().map(|w| w.as_ref().to_string()));
        Self::from_tokens(tokens)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn is_special(id: usize) -> bool {
        id < SPECIALS.len()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK_TOKEN).to_string())
            .collect()
    }

    /// One token per line, line index = id.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.id_to_token {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        for (i, sp) in SPECIALS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*sp) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected special token {sp}"),
                });
            }
        }
        Self::from_tokens(tokens)
    }

    /// Short content hash used to tie checkpoints to a vocabulary.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Builds a vocabulary from (training) token sequences, keeping tokens
/// seen at least `min_count` times. Ids after the specials are ordered by
/// frequency descending, then lexicographically.
pub fn build_vocab<S: AsRef<str>>(token_sequences: &[Vec<S>], min_count: usize) -> Result<Vocab> {
    if min_count == 0 {
        return Err(Error::invalid("min_count must be >= 1"));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for seq in token_sequences {
        for t in seq {
            let t = t.as_ref();
            if !SPECIALS.contains(&t) {
                *counts.entry(t).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    if kept.is_empty() {
        return Err(Error::invalid(format!(
            "no token occurs at least {min_count} times"
        )));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let words: Vec<&str> = kept.into_iter().map(|(t, _)| t).collect();
    Vocab::with_words(&words)
}

/// Maps tokens to ids; unknown tokens become `UNK`.
pub fn encode_document<S: AsRef<str>>(tokens: &[S], vocab: &Vocab) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| vocab.id(t.as_ref()).unwrap_or(UNK))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seqs(spec: &[(&str, usize)]) -> Vec<Vec<String>> {
        vec![spec
            .iter()
            .flat_map(|&(t, n)| std::iter::repeat(t.to_string()).take(n))
            .collect()]
    }

    #[test]
    fn threshold_boundary() {
        let v = build_vocab(&seqs(&[("a", 5), ("b", 4)]), 5).unwrap();
        assert!(v.id("a").is_some());
        assert!(v.id("b").is_none());
        let v = build_vocab(&seqs(&[("a", 1)]), 1).unwrap();
        assert!(v.id("a").is_some());
    }

    #[test]
    fn size_counts_specials() {
        let v = build_vocab(&seqs(&[("x", 10), ("y", 10), ("z", 10)]), 5).unwrap();
        assert_eq!(v.len(), 3 + 5);
    }

    #[test]
    fn ordering_and_errors() {
        let v = build_vocab(&seqs(&[("b", 3), ("a", 3), ("c", 7)]), 1).unwrap();
        assert_eq!(&v.tokens()[5..], ["c", "a", "b"]);
        assert!(build_vocab(&seqs(&[("a", 2)]), 3).is_err());
        assert!(build_vocab(&seqs(&[("a", 2)]), 0).is_err());
    }

    #[test]
    fn encode_examples() {
        let v = Vocab::with_words(&["a"]).unwrap();
        let a = v.id("a").unwrap();
        assert_eq!(encode_document(&["a"], &v), [a]);
        assert_eq!(encode_document(&["zzz"], &v), [UNK]);
        assert_eq!(encode_document(&["a", "zzz", "a"], &v), [a, UNK, a]);
    }

    #[test]
    fn text_round_trip() {
        let v = Vocab::with_words(&["x", "y"]).unwrap();
        assert_eq!(Vocab::from_text(&v.to_text()).unwrap(), v);
        assert!(Vocab::from_text("x\ny\n").is_err());
    }
}
