//! Question classification, step-id extraction and keyword extraction.
//!
//! The classifier is a multinomial Naive Bayes over a bag of lemmatized
//! words. Stop words are kept for classification because category cues such
//! as "how many" are made of them; keyword extraction drops them.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lexicon::{self, Lexicon};

/// The shipped training questions, `category<TAB>question` per line.
pub const DEFAULT_TRAINING: &str = include_str!("../data/training.tsv");

pub const DEFAULT_ALPHA: f64 = 1.0;

/// Question words that carry no topic of their own in definition questions.
const QUESTION_VERBS: &[&str] = &["what", "whats", "explain", "define", "mean", "meaning", "definition", "tell"];

/// Variants are declared in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QuestionCategory {
    Definition,
    RowCount,
    OperatorList,
    StepTime,
    DominantOperator,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 5] = [
        QuestionCategory::Definition,
        QuestionCategory::RowCount,
        QuestionCategory::OperatorList,
        QuestionCategory::StepTime,
        QuestionCategory::DominantOperator,
    ];

    /// The label used in training files.
    pub fn label(self) -> &'static str {
        match self {
            QuestionCategory::Definition => "definition",
            QuestionCategory::RowCount => "row_count",
            QuestionCategory::OperatorList => "operator_list",
            QuestionCategory::StepTime => "step_time",
            QuestionCategory::DominantOperator => "dominant",
        }
    }
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for QuestionCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum QuestionError {
    #[error("no training examples for category {0}")]
    EmptyClass(QuestionCategory),
    #[error("smoothing constant must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("training line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("the question does not mention a step number")]
    NoStepReference,
    #[error("the question mentions several numbers ({}) and none follows \"step\"", .0.join(", "))]
    AmbiguousStepReference(Vec<String>),
}

impl QuestionError {
    pub fn code(&self) -> &'static str {
        match self {
            QuestionError::EmptyClass(_) => "EmptyClass",
            QuestionError::InvalidAlpha(_) => "InvalidAlpha",
            QuestionError::BadRecord { .. } => "BadRecord",
            QuestionError::NoStepReference => "NoStepReference",
            QuestionError::AmbiguousStepReference(_) => "AmbiguousStepReference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub examples: Vec<(String, QuestionCategory)>,
}

impl TrainingSet {
    /// Parses `category<TAB>question` lines; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self, QuestionError> {
        let mut examples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |reason: String| QuestionError::BadRecord { line: i + 1, reason };
            let (label, question) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected `category<TAB>question`".into()))?;
            let category = label.trim().parse().map_err(bad)?;
            let question = question.trim();
            if question.is_empty() {
                return Err(bad("empty question".into()));
            }
            examples.push((question.to_string(), category));
        }
        Ok(TrainingSet { examples })
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_TRAINING).expect("shipped training file is valid")
    }

    pub fn count(&self, category: QuestionCategory) -> usize {
        self.examples.iter().filter(|(_, c)| *c == category).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NBModel {
    pub classes: Vec<QuestionCategory>,
    pub priors: BTreeMap<QuestionCategory, f64>,
    pub token_counts: BTreeMap<QuestionCategory, BTreeMap<String, u32>>,
    pub class_totals: BTreeMap<QuestionCategory, u64>,
    pub vocabulary: BTreeSet<String>,
    pub alpha: f64,
}

/// Classification features: every word, lowercased and lemmatized.
pub fn classification_tokens(question: &str) -> Vec<String> {
    let lex = Lexicon::shipped();
    lexicon::words(question).map(|w| lex.lemmatize(w)).collect()
}

pub fn train_classifier(data: &TrainingSet, alpha: f64) -> Result<NBModel, QuestionError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(QuestionError::InvalidAlpha(alpha));
    }
    let mut examples: BTreeMap<QuestionCategory, usize> = BTreeMap::new();
    let mut token_counts: BTreeMap<QuestionCategory, BTreeMap<String, u32>> = BTreeMap::new();
    let mut vocabulary = BTreeSet::new();
    for (question, category) in &data.examples {
        *examples.entry(*category).or_default() += 1;
        let counts = token_counts.entry(*category).or_default();
        for token in classification_tokens(question) {
            vocabulary.insert(token.clone());
            *counts.entry(token).or_default() += 1;
        }
    }
    if let Some(missing) = QuestionCategory::ALL.into_iter().find(|c| !examples.contains_key(c)) {
        return Err(QuestionError::EmptyClass(missing));
    }
    let total = data.examples.len() as f64;
    let priors = examples
        .iter()
        .map(|(c, n)| (*c, *n as f64 / total))
        .collect();
    let class_totals = QuestionCategory::ALL
        .into_iter()
        .map(|c| (c, token_counts[&c].values().map(|&n| n as u64).sum()))
        .collect();
    Ok(NBModel {
        classes: QuestionCategory::ALL.to_vec(),
        priors,
        token_counts,
        class_totals,
        vocabulary,
        alpha,
    })
}

impl NBModel {
    pub fn shipped() -> Self {
        train_classifier(&TrainingSet::shipped(), DEFAULT_ALPHA).expect("shipped training file covers every class")
    }

    /// Log posterior (up to a shared constant) of every class.
    pub fn log_posteriors(&self, question: &str) -> BTreeMap<QuestionCategory, f64> {
        let tokens: Vec<String> = classification_tokens(question)
            .into_iter()
            .filter(|t| self.vocabulary.contains(t))
            .collect();
        let v = self.vocabulary.len() as f64;
        self.classes
            .iter()
            .map(|c| {
                let counts = self.token_counts.get(c);
                let denom = self.class_totals.get(c).copied().unwrap_or(0) as f64 + self.alpha * v;
                let mut score = self.priors.get(c).copied().unwrap_or(0.0).ln();
                for t in &tokens {
                    let n = counts.and_then(|m| m.get(t)).copied().unwrap_or(0) as f64;
                    score += ((n + self.alpha) / denom).ln();
                }
                (*c, score)
            })
            .collect()
    }
}

/// The most probable category and every class's log posterior. Ties go to
/// the class declared first.
pub fn classify(model: &NBModel, question: &str) -> (QuestionCategory, BTreeMap<QuestionCategory, f64>) {
    let scores = model.log_posteriors(question);
    let mut best: Option<(QuestionCategory, f64)> = None;
    for (c, s) in &scores {
        if best.is_none_or(|(_, b)| *s > b) {
            best = Some((*c, *s));
        }
    }
    let category = best.map_or(QuestionCategory::Definition, |(c, _)| c);
    (category, scores)
}

/// The step a question refers to: the number right after "step", or else
/// the only number in the question.
pub fn extract_step_id(question: &str) -> Result<usize, QuestionError> {
    let words: Vec<&str> = lexicon::words(question).collect();
    let is_number = |w: &str| w.chars().all(|c| c.is_ascii_digit());
    let parse = |w: &str| w.parse::<usize>().unwrap_or(usize::MAX);
    for pair in words.windows(2) {
        if matches!(pair[0].to_lowercase().as_str(), "step" | "steps") && is_number(pair[1]) {
            return Ok(parse(pair[1]));
        }
    }
    let numbers: Vec<&str> = words.into_iter().filter(|w| is_number(w)).collect();
    match numbers[..] {
        [] => Err(QuestionError::NoStepReference),
        [one] => Ok(parse(one)),
        _ => Err(QuestionError::AmbiguousStepReference(
            numbers.iter().map(|n| n.to_string()).collect(),
        )),
    }
}

/// Normalized, deduplicated topic words, first occurrence first.
pub fn extract_keywords(question: &str) -> Vec<String> {
    let lex = Lexicon::shipped();
    let mut seen = HashSet::new();
    lexicon::words(question)
        .filter(|w| !QUESTION_VERBS.contains(&w.to_lowercase().as_str()))
        .filter_map(|w| lex.normalize_token(w))
        .filter(|t| !lex.is_stopword(t) && seen.insert(t.clone()))
        .collect()
}

/// Accuracy of stratified k-fold cross-validation. Examples of each class
/// are dealt to folds round-robin in file order.
pub fn cross_validate(data: &TrainingSet, folds: usize, alpha: f64) -> Result<f64, QuestionError> {
    let folds = folds.max(2);
    let mut seen: BTreeMap<QuestionCategory, usize> = BTreeMap::new();
    let fold_of: Vec<usize> = data
        .examples
        .iter()
        .map(|(_, c)| {
            let n = seen.entry(*c).or_default();
            *n += 1;
            (*n - 1) % folds
        })
        .collect();
    let mut correct = 0;
    for k in 0..folds {
        let train = TrainingSet {
            examples: data
                .examples
                .iter()
                .zip(&fold_of)
                .filter(|(_, f)| **f != k)
                .map(|(e, _)| e.clone())
                .collect(),
        };
        let model = train_classifier(&train, alpha)?;
        correct += data
            .examples
            .iter()
            .zip(&fold_of)
            .filter(|((q, c), f)| **f == k && classify(&model, q).0 == *c)
            .count();
    }
    Ok(correct as f64 / data.examples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use QuestionCategory::*;

    fn tiny() -> TrainingSet {
        // Two classes only; the other three get one neutral example each so
        // the set is valid.
        TrainingSet::parse(
            "definition\trow count\ndefinition\trows left\nrow_count\ttime taken\nrow_count\ttime spent\n",
        )
        .unwrap()
    }

    #[test]
    fn training_requires_every_class() {
        assert_eq!(train_classifier(&tiny(), 1.0), Err(QuestionError::EmptyClass(OperatorList)));
    }

    #[test]
    fn alpha_must_be_positive() {
        assert_eq!(
            train_classifier(&TrainingSet::shipped(), 0.0),
            Err(QuestionError::InvalidAlpha(0.0))
        );
    }

    fn two_class_model() -> NBModel {
        let mut data = tiny();
        for c in [OperatorList, StepTime, DominantOperator] {
            data.examples.push(("zzz".into(), c));
        }
        train_classifier(&data, 1.0).unwrap()
    }

    #[test]
    fn tiny_model_posteriors() {
        let m = two_class_model();
        // rows -> row, so the vocabulary is {row, count, left, time, taken, spent, zzz}.
        assert_eq!(m.vocabulary.len(), 7);
        assert_eq!(m.class_totals[&Definition], 4);
        assert!((m.priors[&Definition] - 2.0 / 7.0).abs() < 1e-12);
        let (c, scores) = classify(&m, "rows left");
        assert_eq!(c, Definition);
        let expected = (2.0f64 / 7.0).ln() + (3.0f64 / 11.0).ln() + (2.0f64 / 11.0).ln();
        assert!((scores[&Definition] - expected).abs() < 1e-12);
        let other = (2.0f64 / 7.0).ln() + 2.0 * (1.0f64 / 11.0).ln();
        assert!((scores[&RowCount] - other).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_the_first_class() {
        let m = two_class_model();
        assert_eq!(classify(&m, "nothing known here").0, Definition);
    }

    #[test]
    fn example_questions() {
        let m = NBModel::shipped();
        assert_eq!(classify(&m, "What is a hash semi join?").0, Definition);
        assert_eq!(classify(&m, "How many tuples left after Step 5?").0, RowCount);
        assert_eq!(classify(&m, "What is the most expensive operation?").0, DominantOperator);
    }

    #[test]
    fn step_ids() {
        assert_eq!(extract_step_id("How many tuples left after Step 5?"), Ok(5));
        assert_eq!(extract_step_id("how long did step 12 take"), Ok(12));
        assert_eq!(extract_step_id("rows in 3"), Ok(3));
        assert_eq!(extract_step_id("the 2 rows of step 4"), Ok(4));
        assert_eq!(extract_step_id("how many rows after the join"), Err(QuestionError::NoStepReference));
        assert_eq!(
            extract_step_id("between 2 and 3"),
            Err(QuestionError::AmbiguousStepReference(vec!["2".into(), "3".into()]))
        );
    }

    #[test]
    fn keywords() {
        assert_eq!(extract_keywords("what is a bitmap heap scan?"), ["bitmap", "heap", "scan"]);
        assert_eq!(extract_keywords("What does Index Only Scan mean?"), ["index", "only", "scan"]);
        assert_eq!(extract_keywords("Scans and scan"), ["scan"]);
        assert!(extract_keywords("").is_empty());
    }

    #[test]
    fn shipped_training_file_shape() {
        let data = TrainingSet::shipped();
        assert!(data.examples.len() >= 67);
        for c in QuestionCategory::ALL {
            assert!(data.count(c) >= 12, "{c}");
        }
        let m = NBModel::shipped();
        assert_eq!(m.classes.len(), 5);
        assert!((m.priors.values().sum::<f64>() - 1.0).abs() < 1e-12);
        for c in QuestionCategory::ALL {
            assert_eq!(m.class_totals[&c], m.token_counts[&c].values().map(|&n| n as u64).sum::<u64>());
        }
    }

    #[test]
    fn model_round_trips_through_json() {
        let m = NBModel::shipped();
        let back: NBModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn keywords_have_no_stopwords_or_duplicates(q in "[a-zA-Z0-9 ?,.']{0,60}") {
            let kws = extract_keywords(&q);
            let lex = Lexicon::shipped();
            let distinct: HashSet<&String> = kws.iter().collect();
            prop_assert_eq!(distinct.len(), kws.len());
            prop_assert!(kws.iter().all(|k| !lex.is_stopword(k)));
        }

        #[test]
        fn duplicating_an_example_never_lowers_its_class(idx in 0usize..92) {
            let data = TrainingSet::shipped();
            let (q, c) = data.examples[idx % data.examples.len()].clone();
            let before = NBModel::shipped();
            let mut more = data.clone();
            more.examples.push((q.clone(), c));
            let after = train_classifier(&more, DEFAULT_ALPHA).unwrap();
            let p = |m: &NBModel| {
                let s = m.log_posteriors(&q);
                let max = s.values().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = s.values().map(|v| (v - max).exp()).sum();
                (s[&c] - max).exp() / z
            };
            prop_assert!(p(&after) >= p(&before) - 1e-12);
        }

        #[test]
        fn classification_is_deterministic(q in "[a-z ]{0,40}") {
            let m = NBModel::shipped();
            prop_assert_eq!(classify(&m, &q), classify(&m, &q));
        }
    }
}
