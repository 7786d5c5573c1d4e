//! Word splitting, stop words and table-driven lemmatization shared by the
//! definition index and the question processor.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const DEFAULT_LEMMAS: &str = include_str!("../data/lemmas.tsv");

/// Words shorter than this never lose a trailing "s".
const MIN_STRIP_LEN: usize = 4;

static DEFAULT: LazyLock<Lexicon> =
    LazyLock::new(|| Lexicon::parse(DEFAULT_STOPWORDS, DEFAULT_LEMMAS));

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    stopwords: HashSet<String>,
    lemmas: HashMap<String, String>,
    no_strip: HashSet<String>,
}

impl Lexicon {
    /// The shipped stop list and normalization table.
    pub fn shipped() -> &'static Lexicon {
        &DEFAULT
    }

    /// Parses a stop list (one word per line) and a lemma table
    /// (`form<TAB>lemma`, or `!no-strip<TAB>word`). `#` starts a comment line.
    pub fn parse(stopwords: &str, lemmas: &str) -> Self {
        let stopwords = data_lines(stopwords)
            .map(|l| l.to_lowercase())
            .collect::<HashSet<_>>();
        let mut table = HashMap::new();
        let mut no_strip = HashSet::new();
        for line in data_lines(lemmas) {
            let Some((form, lemma)) = line.split_once('\t') else {
                continue;
            };
            let lemma = lemma.trim().to_lowercase();
            if form == "!no-strip" {
                no_strip.insert(lemma);
            } else {
                table.insert(form.trim().to_lowercase(), lemma);
            }
        }
        Self {
            stopwords,
            lemmas: table,
            no_strip,
        }
    }

    pub fn is_stopword(&self, word: &str) -> bool {
        self.stopwords.contains(&word.to_lowercase())
    }

    /// Lowercases and maps a word to its canonical form without stop-word
    /// filtering.
    pub fn lemmatize(&self, word: &str) -> String {
        let lower = word.to_lowercase();
        if let Some(lemma) = self.lemmas.get(&lower) {
            return lemma.clone();
        }
        if self.strippable(&lower) {
            let mut stem = lower;
            stem.pop();
            return stem;
        }
        lower
    }

    /// Lowercase, drop stop words, then lemmatize.
    pub fn normalize_token(&self, word: &str) -> Option<String> {
        let lower = word.to_lowercase();
        if lower.is_empty() || self.stopwords.contains(&lower) {
            return None;
        }
        Some(self.lemmatize(&lower))
    }

    fn strippable(&self, lower: &str) -> bool {
        lower.chars().count() >= MIN_STRIP_LEN
            && lower.ends_with('s')
            && !lower.ends_with("ss")
            && !lower.ends_with("us")
            && !lower.ends_with("is")
            && !self.no_strip.contains(lower)
            && lower.chars().any(|c| c.is_alphabetic())
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

/// Splits text into words on whitespace and punctuation. Underscores stay
/// inside words so column names survive intact.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
}

/// [`Lexicon::normalize_token`] against the shipped lexicon.
pub fn normalize_token(word: &str) -> Option<String> {
    DEFAULT.normalize_token(word)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_plural_operator_names() {
        assert_eq!(normalize_token("Scans").as_deref(), Some("scan"));
        assert_eq!(normalize_token("indices").as_deref(), Some("index"));
        assert_eq!(normalize_token("Tuples").as_deref(), Some("tuple"));
        assert_eq!(normalize_token("loops").as_deref(), Some("loop"));
    }

    #[test]
    fn stop_words_are_absent_but_only_is_kept() {
        assert_eq!(normalize_token("the"), None);
        assert_eq!(normalize_token("The"), None);
        assert_eq!(normalize_token("only").as_deref(), Some("only"));
    }

    #[test]
    fn no_strip_words_keep_their_s() {
        assert_eq!(normalize_token("less").as_deref(), Some("less"));
        assert_eq!(normalize_token("analysis").as_deref(), Some("analysis"));
        assert_eq!(normalize_token("status").as_deref(), Some("status"));
        // short words are never stripped
        assert_eq!(normalize_token("gas").as_deref(), Some("gas"));
        assert_eq!(normalize_token("keys").as_deref(), Some("key"));
        assert_eq!(normalize_token("exists").as_deref(), Some("exist"));
    }

    #[test]
    fn words_split_on_punctuation() {
        let w: Vec<_> = words("How many tuples left after Step 5?").collect();
        assert_eq!(w, ["How", "many", "tuples", "left", "after", "Step", "5"]);
        let w: Vec<_> = words("o_orderdate, l_commitdate").collect();
        assert_eq!(w, ["o_orderdate", "l_commitdate"]);
        assert_eq!(words("").count(), 0);
    }

    #[test]
    fn lemmatize_keeps_stop_words() {
        let lex = Lexicon::shipped();
        assert_eq!(lex.lemmatize("How"), "how");
        assert_eq!(lex.lemmatize("rows"), "row");
        assert_eq!(lex.lemmatize("this"), "this");
    }
}
