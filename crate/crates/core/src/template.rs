//! Sentence skeletons with `{name}` placeholders and `{ ... }` optional
//! groups.
//!
//! A brace followed directly by an identifier and a closing brace is a
//! placeholder. Any other brace opens an optional group, which renders only
//! when every placeholder directly inside it has a nonempty value.
//! A missing placeholder outside any group renders as the empty string.

use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
enum Part {
    Text(String),
    Var(String),
    Optional(Vec<Part>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    source: String,
    parts: Vec<Part>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TemplateError {
    #[error("unbalanced braces in template `{0}`")]
    Unbalanced(String),
    #[error("line {line}: expected `key<TAB>template`")]
    BadRecord { line: usize },
    #[error("missing required template `{0}`")]
    Missing(String),
    #[error("template `{key}` must mention {{{placeholder}}} exactly once")]
    Placeholder { key: String, placeholder: String },
}

impl Template {
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        let chars: Vec<char> = source.chars().collect();
        let mut pos = 0;
        let parts = parse_parts(&chars, &mut pos, false)
            .ok_or_else(|| TemplateError::Unbalanced(source.to_string()))?;
        Ok(Template {
            source: source.to_string(),
            parts,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Names of every placeholder, including those inside groups.
    pub fn placeholders(&self) -> Vec<&str> {
        fn walk<'a>(parts: &'a [Part], out: &mut Vec<&'a str>) {
            for p in parts {
                match p {
                    Part::Var(v) => out.push(v),
                    Part::Optional(inner) => walk(inner, out),
                    Part::Text(_) => {}
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.parts, &mut out);
        out
    }

    pub fn render<F>(&self, lookup: F) -> String
    where
        F: Fn(&str) -> Option<String>,
    {
        let mut out = String::new();
        render_parts(&self.parts, &lookup, &mut out);
        out
    }

    pub fn render_map(&self, vars: &HashMap<&str, String>) -> String {
        self.render(|k| vars.get(k).cloned())
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn parse_parts(chars: &[char], pos: &mut usize, nested: bool) -> Option<Vec<Part>> {
    let mut parts = Vec::new();
    let mut text = String::new();
    while *pos < chars.len() {
        match chars[*pos] {
            '{' => {
                let start = *pos + 1;
                let mut end = start;
                while end < chars.len() && is_ident(chars[end]) {
                    end += 1;
                }
                if !text.is_empty() {
                    parts.push(Part::Text(std::mem::take(&mut text)));
                }
                if end > start && end < chars.len() && chars[end] == '}' {
                    parts.push(Part::Var(chars[start..end].iter().collect()));
                    *pos = end + 1;
                } else {
                    *pos = start;
                    let inner = parse_parts(chars, pos, true)?;
                    parts.push(Part::Optional(inner));
                }
            }
            '}' => {
                if !nested {
                    return None;
                }
                *pos += 1;
                if !text.is_empty() {
                    parts.push(Part::Text(text));
                }
                return Some(parts);
            }
            c => {
                text.push(c);
                *pos += 1;
            }
        }
    }
    if nested {
        return None;
    }
    if !text.is_empty() {
        parts.push(Part::Text(text));
    }
    Some(parts)
}

fn render_parts<F>(parts: &[Part], lookup: &F, out: &mut String)
where
    F: Fn(&str) -> Option<String>,
{
    for part in parts {
        match part {
            Part::Text(t) => out.push_str(t),
            Part::Var(v) => {
                if let Some(value) = lookup(v) {
                    out.push_str(&value);
                }
            }
            Part::Optional(inner) => {
                let satisfied = inner.iter().all(|p| match p {
                    Part::Var(v) => lookup(v).is_some_and(|s| !s.is_empty()),
                    _ => true,
                });
                if satisfied {
                    render_parts(inner, lookup, out);
                }
            }
        }
    }
}

/// Keys every template file must define besides per-node-type skeletons.
pub const FALLBACK: &str = "@fallback";
pub const AGGREGATE_UNGROUPED: &str = "@aggregate_ungrouped";
pub const REQUIRED_KEYS: &[&str] = &[
    FALLBACK,
    AGGREGATE_UNGROUPED,
    "@answer.definition",
    "@answer.row_count",
    "@answer.operator_list",
    "@answer.step_time",
    "@answer.dominant",
    "@error.no_step_reference",
    "@error.ambiguous_step_reference",
    "@error.unknown_step",
    "@error.no_runtime_stats",
    "@error.no_definition_found",
    "@error.empty_keywords",
];

const DEFAULT_TEMPLATES: &str = include_str!("../data/templates.tsv");

/// The template table: node-type skeletons plus answer and error templates,
/// keyed as in the config file.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    entries: HashMap<String, Template>,
}

impl TemplateSet {
    pub fn shipped() -> Self {
        Self::parse(DEFAULT_TEMPLATES).expect("shipped template file is valid")
    }

    /// Parses `key<TAB>template` records; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (key, template) = line
                .split_once('\t')
                .ok_or(TemplateError::BadRecord { line: i + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(TemplateError::BadRecord { line: i + 1 });
            }
            entries.insert(key.to_string(), Template::parse(template.trim())?);
        }
        let set = TemplateSet { entries };
        set.validate()?;
        Ok(set)
    }

    fn validate(&self) -> Result<(), TemplateError> {
        for key in REQUIRED_KEYS {
            if !self.entries.contains_key(*key) {
                return Err(TemplateError::Missing(key.to_string()));
            }
        }
        for (key, t) in &self.entries {
            if key.starts_with('@') && !matches!(key.as_str(), FALLBACK | AGGREGATE_UNGROUPED) {
                continue;
            }
            let outs = t.placeholders().iter().filter(|p| **p == "out").count();
            if outs != 1 {
                return Err(TemplateError::Placeholder {
                    key: key.clone(),
                    placeholder: "out".into(),
                });
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&Template> {
        self.entries.get(key)
    }

    /// A required key; always present after validation.
    pub fn required(&self, key: &str) -> &Template {
        self.entries
            .get(key)
            .unwrap_or_else(|| panic!("template `{key}` is not a required key"))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::shipped()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&'static str, &str)]) -> HashMap<&'static str, String> {
        pairs.iter().map(|(k, v)| (*k, v.to_string())).collect()
    }

    #[test]
    fn optional_groups_need_all_their_placeholders() {
        let t = Template::parse("scan {rel}{ as {alias}}{ and filter on {filter}} to {out}.").unwrap();
        assert_eq!(
            t.render_map(&vars(&[("rel", "orders"), ("out", "T1")])),
            "scan orders to T1."
        );
        assert_eq!(
            t.render_map(&vars(&[("rel", "orders"), ("alias", "o"), ("filter", "x"), ("out", "T1")])),
            "scan orders as o and filter on x to T1."
        );
        assert_eq!(
            t.render_map(&vars(&[("rel", "orders"), ("alias", ""), ("out", "T1")])),
            "scan orders to T1."
        );
    }

    #[test]
    fn missing_mandatory_placeholder_is_empty() {
        let t = Template::parse("a{x}b").unwrap();
        assert_eq!(t.render(|_| None), "ab");
    }

    #[test]
    fn nested_groups() {
        let t = Template::parse("{ [{a}{ ({b})}]}").unwrap();
        assert_eq!(t.render_map(&vars(&[("a", "1")])), " [1]");
        assert_eq!(t.render_map(&vars(&[("a", "1"), ("b", "2")])), " [1 (2)]");
        assert_eq!(t.render_map(&vars(&[("b", "2")])), "");
    }

    #[test]
    fn unbalanced_braces_are_rejected() {
        assert!(Template::parse("a { b").is_err());
        assert!(Template::parse("a } b").is_err());
        assert!(Template::parse("{x").is_err());
    }

    #[test]
    fn shipped_set_is_complete() {
        let set = TemplateSet::shipped();
        for k in REQUIRED_KEYS {
            assert!(set.get(k).is_some(), "{k}");
        }
        assert!(set.get("Seq Scan").is_some());
    }

    #[test]
    fn parse_reports_missing_keys_and_bad_records() {
        assert!(matches!(
            TemplateSet::parse("Seq Scan\tscan {out}"),
            Err(TemplateError::Missing(_))
        ));
        assert!(matches!(
            TemplateSet::parse("no tab here"),
            Err(TemplateError::BadRecord { line: 1 })
        ));
    }
}
