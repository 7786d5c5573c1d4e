//! Inverted index over definitions of SQL keywords and plan operators.
//!
//! Ranking is tf-idf with term/alias matches weighted twice as heavily as
//! body matches: `score(d) = sum_t idf(t) * (2*tf_term(t,d) + tf_body(t,d))`
//! with `idf(t) = ln(1 + N / df(t))`.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::lexicon::{self, Lexicon};

const DEFAULT_CORPUS: &str = include_str!("../data/corpus.tsv");
const TERM_BOOST: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinitionDoc {
    pub doc_id: u32,
    pub term: String,
    pub aliases: Vec<String>,
    pub body: String,
    pub source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Field {
    Term,
    Body,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc_id: u32,
    pub term_frequency: u32,
    pub field: Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertedIndex {
    pub postings: BTreeMap<String, Vec<Posting>>,
    pub doc_count: usize,
    pub doc_freq: BTreeMap<String, usize>,
    docs: Vec<DefinitionDoc>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum IndexError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate doc id {0}")]
    DuplicateDocId(u32),
    #[error("corpus line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
}

/// Parses the corpus file: `term<TAB>alias1|alias2<TAB>body<TAB>source_url`
/// per line, `#` comments. Doc ids are assigned in file order from 0.
pub fn parse_corpus(text: &str) -> Result<Vec<DefinitionDoc>, IndexError> {
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let bad = |reason: &str| IndexError::BadRecord {
            line: i + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [term, aliases, body, source] = fields[..] else {
            return Err(bad("expected 4 tab-separated fields"));
        };
        let term = term.trim();
        if term.is_empty() {
            return Err(bad("empty term"));
        }
        if body.trim().is_empty() {
            return Err(bad("empty body"));
        }
        docs.push(DefinitionDoc {
            doc_id: docs.len() as u32,
            term: term.to_string(),
            aliases: aliases
                .split('|')
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .map(str::to_string)
                .collect(),
            body: body.trim().to_string(),
            source: source.trim().to_string(),
        });
    }
    Ok(docs)
}

pub fn shipped_corpus() -> Vec<DefinitionDoc> {
    parse_corpus(DEFAULT_CORPUS).expect("shipped corpus is valid")
}

/// Normalized tokens of a piece of text: split, stop words removed,
/// lemmatized.
pub fn tokens(text: &str, lexicon: &Lexicon) -> Vec<String> {
    lexicon::words(text)
        .filter_map(|w| lexicon.normalize_token(w))
        .collect()
}

impl DefinitionDoc {
    /// Tokens of the term and its aliases, which are indexed in the Term
    /// field.
    pub fn term_tokens(&self) -> Vec<String> {
        let lex = Lexicon::shipped();
        std::iter::once(&self.term)
            .chain(&self.aliases)
            .flat_map(|t| tokens(t, lex))
            .collect()
    }
}

pub fn build_index(corpus: Vec<DefinitionDoc>) -> Result<InvertedIndex, IndexError> {
    if corpus.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    let mut seen = HashSet::new();
    for doc in &corpus {
        if !seen.insert(doc.doc_id) {
            return Err(IndexError::DuplicateDocId(doc.doc_id));
        }
    }

    let lex = Lexicon::shipped();
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    for doc in &corpus {
        let fields = [
            (Field::Term, doc.term_tokens()),
            (Field::Body, tokens(&doc.body, lex)),
        ];
        for (field, toks) in fields {
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in toks {
                *counts.entry(t).or_default() += 1;
            }
            for (token, tf) in counts {
                postings.entry(token).or_default().push(Posting {
                    doc_id: doc.doc_id,
                    term_frequency: tf,
                    field,
                });
            }
        }
    }
    let doc_freq = postings
        .iter()
        .map(|(t, ps)| {
            let distinct: HashSet<u32> = ps.iter().map(|p| p.doc_id).collect();
            (t.clone(), distinct.len())
        })
        .collect();
    Ok(InvertedIndex {
        postings,
        doc_count: corpus.len(),
        doc_freq,
        docs: corpus,
    })
}

impl InvertedIndex {
    pub fn shipped() -> Self {
        build_index(shipped_corpus()).expect("shipped corpus is nonempty")
    }

    pub fn doc(&self, doc_id: u32) -> Option<&DefinitionDoc> {
        self.docs.iter().find(|d| d.doc_id == doc_id)
    }

    pub fn docs(&self) -> &[DefinitionDoc] {
        &self.docs
    }

    pub fn idf(&self, token: &str) -> f64 {
        match self.doc_freq.get(token) {
            Some(&df) if df > 0 => (1.0 + self.doc_count as f64 / df as f64).ln(),
            _ => 0.0,
        }
    }

    /// Ranks documents against already-normalized keywords. Only positive
    /// scores are returned, highest first, ties by ascending doc id.
    pub fn search(&self, keywords: &[String]) -> Vec<(u32, f64)> {
        let mut scores: BTreeMap<u32, f64> = BTreeMap::new();
        for token in keywords {
            let Some(list) = self.postings.get(token) else { continue };
            let idf = self.idf(token);
            for p in list {
                let weight = match p.field {
                    Field::Term => TERM_BOOST,
                    Field::Body => 1.0,
                };
                *scores.entry(p.doc_id).or_default() += idf * weight * p.term_frequency as f64;
            }
        }
        let mut ranked: Vec<(u32, f64)> = scores.into_iter().filter(|(_, s)| *s > 0.0).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: u32, term: &str, body: &str) -> DefinitionDoc {
        DefinitionDoc {
            doc_id: id,
            term: term.into(),
            aliases: vec![],
            body: body.into(),
            source: String::new(),
        }
    }

    fn kw(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn single_doc_postings() {
        let idx = build_index(vec![doc(0, "hash join", "")]).unwrap();
        let term = |t: &str| idx.postings[t].clone();
        assert_eq!(term("hash"), vec![Posting { doc_id: 0, term_frequency: 1, field: Field::Term }]);
        assert_eq!(term("join"), vec![Posting { doc_id: 0, term_frequency: 1, field: Field::Term }]);
    }

    #[test]
    fn doc_freq_counts_distinct_docs() {
        let idx = build_index(vec![
            doc(0, "seq scan", "scans scans"),
            doc(1, "index scan", "fast"),
        ])
        .unwrap();
        assert_eq!(idx.doc_freq["scan"], 2);
        let body = idx.postings["scan"].iter().find(|p| p.field == Field::Body).unwrap();
        assert_eq!(body.term_frequency, 2);
    }

    #[test]
    fn corpus_errors() {
        assert_eq!(build_index(vec![]), Err(IndexError::EmptyCorpus));
        assert_eq!(
            build_index(vec![doc(3, "a", "x"), doc(3, "b", "y")]),
            Err(IndexError::DuplicateDocId(3))
        );
        assert!(matches!(parse_corpus("only\ttwo"), Err(IndexError::BadRecord { line: 1, .. })));
        assert!(matches!(parse_corpus("\ta\tb\tc"), Err(IndexError::BadRecord { .. })));
    }

    #[test]
    fn semi_breaks_the_tie() {
        // D1 and D2 share hash/join (one Term occurrence each); only D2 has
        // semi, worth 2 * ln(1 + 2/1) = 2 ln 3.
        let idx = build_index(vec![doc(1, "hash join", "x"), doc(2, "hash semi join", "y")]).unwrap();
        let ranked = idx.search(&kw(&["hash", "semi", "join"]));
        assert_eq!(ranked[0].0, 2);
        let shared = 2.0 * (1.0f64 + 2.0 / 2.0).ln() * 2.0;
        assert!((ranked[1].1 - shared).abs() < 1e-12);
        assert!((ranked[0].1 - (shared + 2.0 * 3.0f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn out_of_vocabulary_query_is_empty() {
        let idx = InvertedIndex::shipped();
        assert!(idx.search(&kw(&["zorble", "quux"])).is_empty());
        assert!(idx.search(&[]).is_empty());
    }

    #[test]
    fn shipped_corpus_is_large_enough() {
        let corpus = shipped_corpus();
        assert!(corpus.len() >= 25);
        for d in &corpus {
            assert!(!d.term_tokens().is_empty(), "{} has no indexable term tokens", d.term);
            assert!(d.source.starts_with("http"), "{}", d.term);
        }
    }

    proptest! {
        #[test]
        fn adding_a_matching_token_never_lowers_a_score(
            query in prop::collection::vec("[a-z]{2,8}", 0..4),
            extra_doc in 0usize..35,
        ) {
            let idx = InvertedIndex::shipped();
            let doc = &idx.docs()[extra_doc % idx.docs().len()];
            let extra = doc.term_tokens()[0].clone();
            let score_of = |q: &[String]| {
                idx.search(q).into_iter().find(|(id, _)| *id == doc.doc_id).map_or(0.0, |(_, s)| s)
            };
            let before = score_of(&query);
            let mut longer = query.clone();
            longer.push(extra);
            prop_assert!(score_of(&longer) >= before);
        }
    }
}
