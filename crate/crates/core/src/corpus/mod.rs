//! Corpus ingestion: tokenization, vocabulary construction and document
//! encoding with author/time metadata.
//!
//! Input files are line-delimited JSON records; blank lines and lines
//! starting with `#` are skipped:
//!
//! ```text
//! {"author": "jane", "time": 1994, "text": "A title", "labels": ["world"]}
//! ```
//!
//! Authors are assigned dense ids in order of first appearance. Years are
//! remapped to timesteps `1..=T` with `T = max − min + 1`, so calendar gaps
//! survive as empty timesteps.

mod tokenize;
mod vocab;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use tokenize::{detokenize, normalize_and_tokenize};
pub use vocab::{
    build_vocab, encode_document, Vocab, EOS, EOS_TOKEN, NUM, NUM_TOKEN, PAD, PAD_TOKEN, SOS,
    SOS_TOKEN, SPECIALS, UNK, UNK_TOKEN,
};

/// Author and timestep of one document; all the split protocols need.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DocKey {
    pub author: usize,
    pub time: usize,
}

/// Anything that can enumerate its documents' keys in file order.
pub trait DocKeys {
    fn doc_keys(&self) -> Vec<DocKey>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub author: usize,
    /// Timestep in `1..=T`.
    pub time: usize,
    /// Token ids, without SOS/EOS.
    pub tokens: Vec<usize>,
    pub labels: Vec<String>,
}

impl Document {
    pub fn key(&self) -> DocKey {
        DocKey {
            author: self.author,
            time: self.time,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub vocab: Vocab,
    pub num_authors: usize,
    pub num_timesteps: usize,
    pub author_names: Vec<String>,
    /// Calendar year of timestep 1.
    pub first_year: i64,
}

impl DocKeys for Corpus {
    fn doc_keys(&self) -> Vec<DocKey> {
        self.documents.iter().map(Document::key).collect()
    }
}

/// Per-timestep and per-author document counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub docs_per_timestep: Vec<usize>,
    pub docs_per_author: Vec<usize>,
    pub tokens: usize,
}

impl Corpus {
    pub fn stats(&self) -> CorpusStats {
        let mut per_t = vec![0; self.num_timesteps];
        let mut per_a = vec![0; self.num_authors];
        let mut tokens = 0;
        for d in &self.documents {
            per_t[d.time - 1] += 1;
            per_a[d.author] += 1;
            tokens += d.tokens.len();
        }
        CorpusStats {
            docs_per_timestep: per_t,
            docs_per_author: per_a,
            tokens,
        }
    }

    pub fn year_of(&self, time: usize) -> i64 {
        self.first_year + time as i64 - 1
    }

    pub fn author_id(&self, name: &str) -> Option<usize> {
        self.author_names.iter().position(|n| n == name)
    }

    /// Serializes back to the line-record format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.documents {
            let rec = RawRecord {
                author: self.author_names[d.author].clone(),
                time: self.year_of(d.time),
                text: detokenize(&self.vocab.decode(&d.tokens)),
                labels: if d.labels.is_empty() {
                    None
                } else {
                    Some(d.labels.clone())
                },
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Content hash over metadata and token ids.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.vocab.hash().as_bytes());
        for d in &self.documents {
            h.update((d.author as u64).to_le_bytes());
            h.update((d.time as u64).to_le_bytes());
            for &t in &d.tokens {
                h.update((t as u64).to_le_bytes());
            }
            h.update(u64::MAX.to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRecord {
    author: String,
    time: i64,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

/// A document before vocabulary encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedDocument {
    pub author: usize,
    pub time: usize,
    pub tokens: Vec<String>,
    pub labels: Vec<String>,
}

/// Parsed and tokenized records; encode with [`TokenizedCorpus::encode`]
/// once the training split is known.
#[derive(Debug, Clone)]
pub struct TokenizedCorpus {
    pub documents: Vec<TokenizedDocument>,
    pub author_names: Vec<String>,
    pub num_timesteps: usize,
    pub first_year: i64,
    /// Records whose text produced no tokens.
    pub skipped_empty: usize,
}

impl DocKeys for TokenizedCorpus {
    fn doc_keys(&self) -> Vec<DocKey> {
        self.documents
            .iter()
            .map(|d| DocKey {
                author: d.author,
                time: d.time,
            })
            .collect()
    }
}

impl TokenizedCorpus {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut author_ids: HashMap<String, usize> = HashMap::new();
        let mut author_names = Vec::new();
        let mut pending = Vec::new();
        let mut skipped_empty = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let rec: RawRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            let tokens = normalize_and_tokenize(&rec.text, true);
            if tokens.is_empty() {
                skipped_empty += 1;
                continue;
            }
            let next = author_ids.len();
            let author = *author_ids.entry(rec.author.clone()).or_insert_with(|| {
                author_names.push(rec.author.clone());
                next
            });
            pending.push((author, rec.time, tokens, rec.labels.unwrap_or_default()));
        }
        let first_year = pending.iter().map(|p| p.1).min().ok_or(Error::Empty { what: "corpus" })?;
        let last_year = pending.iter().map(|p| p.1).max().unwrap();
        let documents = pending
            .into_iter()
            .map(|(author, year, tokens, labels)| TokenizedDocument {
                author,
                time: (year - first_year) as usize + 1,
                tokens,
                labels,
            })
            .collect();
        Ok(TokenizedCorpus {
            documents,
            author_names,
            num_timesteps: (last_year - first_year) as usize + 1,
            first_year,
            skipped_empty,
        })
    }

    /// Builds the vocabulary from the documents flagged in `train` (all
    /// documents when `None`) and encodes every document with it.
    pub fn encode(&self, min_count: usize, train: Option<&[bool]>) -> Result<Corpus> {
        if let Some(mask) = train {
            if mask.len() != self.documents.len() {
                return Err(Error::invalid(format!(
                    "training mask has {} entries for {} documents",
                    mask.len(),
                    self.documents.len()
                )));
            }
        }
        let seqs: Vec<Vec<&str>> = self
            .documents
            .iter()
            .enumerate()
            .filter(|(i, _)| train.map_or(true, |m| m[*i]))
            .map(|(_, d)| d.tokens.iter().map(String::as_str).collect())
            .collect();
        let vocab = build_vocab(&seqs, min_count)?;
        Ok(self.encode_with(vocab))
    }

    pub fn encode_with(&self, vocab: Vocab) -> Corpus {
        let documents = self
            .documents
            .iter()
            .map(|d| Document {
                author: d.author,
                time: d.time,
                tokens: encode_document(&d.tokens, &vocab),
                labels: d.labels.clone(),
            })
            .collect();
        Corpus {
            documents,
            vocab,
            num_authors: self.author_names.len(),
            num_timesteps: self.num_timesteps,
            author_names: self.author_names.clone(),
            first_year: self.first_year,
        }
    }
}

/// Reads a line-record corpus and encodes it with a vocabulary built from
/// all of its documents.
pub fn load_corpus(path: impl AsRef<Path>, min_count: usize) -> Result<Corpus> {
    TokenizedCorpus::read(path)?.encode(min_count, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_remap() {
        let c = TokenizedCorpus::parse(
            "{\"author\":\"x\",\"time\":1990,\"text\":\"a b\"}\n{\"author\":\"y\",\"time\":1991,\"text\":\"b\"}\n",
        )
        .unwrap()
        .encode(1, None)
        .unwrap();
        assert_eq!(c.num_authors, 2);
        assert_eq!(c.num_timesteps, 2);
        assert_eq!(c.documents[0].time, 1);
        assert_eq!(c.documents[1].time, 2);
    }

    #[test]
    fn year_gap_gives_empty_timestep() {
        let c = TokenizedCorpus::parse(
            "{\"author\":\"x\",\"time\":1990,\"text\":\"a\"}\n{\"author\":\"x\",\"time\":1992,\"text\":\"a\"}\n",
        )
        .unwrap()
        .encode(1, None)
        .unwrap();
        assert_eq!(c.num_timesteps, 3);
        assert_eq!(c.stats().docs_per_timestep, [1, 0, 1]);
    }

    #[test]
    fn malformed_record_names_line() {
        let err = TokenizedCorpus::parse(
            "{\"author\":\"x\",\"time\":1990,\"text\":\"a\"}\n{\"author\":\"x\",\"text\":\"a\"}\n",
        )
        .unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("time"), "{msg}");
            }
            e => panic!("unexpected {e}"),
        }
        let err = TokenizedCorpus::parse("{\"author\":\"x\",\"time\":\"1990\",\"text\":\"a\"}\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn train_only_vocab() {
        let tc = TokenizedCorpus::parse(
            "{\"author\":\"x\",\"time\":1990,\"text\":\"seen seen\"}\n{\"author\":\"x\",\"time\":1991,\"text\":\"held held held\"}\n",
        )
        .unwrap();
        let c = tc.encode(1, Some(&[true, false])).unwrap();
        assert!(c.vocab.id("held").is_none());
        assert_eq!(c.documents[1].tokens, [UNK, UNK, UNK]);
    }

    #[test]
    fn jsonl_round_trip() {
        let src = "{\"author\":\"x\",\"time\":1990,\"text\":\"Deep nets, 2015!\",\"labels\":[\"ml\"]}\n{\"author\":\"y\",\"time\":1993,\"text\":\"more nets\"}\n";
        let c = TokenizedCorpus::parse(src).unwrap().encode(1, None).unwrap();
        let again = TokenizedCorpus::parse(&c.to_jsonl()).unwrap().encode(1, None).unwrap();
        assert_eq!(again.author_names, c.author_names);
        assert_eq!(again.first_year, c.first_year);
        for (a, b) in c.documents.iter().zip(&again.documents) {
            assert_eq!(c.vocab.decode(&a.tokens), again.vocab.decode(&b.tokens));
            assert_eq!((a.author, a.time, &a.labels), (b.author, b.time, &b.labels));
        }
    }
}
