//! Rendering of PostgreSQL-printed expressions as readable phrases.

/// Multi-word type names that can follow `::`.
const MULTIWORD_TYPES: &[&str] = &[
    "timestamp without time zone",
    "timestamp with time zone",
    "time without time zone",
    "time with time zone",
    "character varying",
    "double precision",
    "bit varying",
];

const OPERATOR_WORDS: &[(&str, &str)] = &[
    ("=", "equals"),
    ("<>", "does not equal"),
    ("!=", "does not equal"),
    ("<", "is less than"),
    (">", "is greater than"),
    ("<=", "is at most"),
    (">=", "is at least"),
    ("~~", "matches pattern"),
    ("!~~", "does not match pattern"),
];

const OPERATOR_CHARS: &str = "=<>!~+-*/@#&|^%?";

/// Strips casts, drops redundant outer parentheses and spells out
/// comparison operators, boolean connectives and null tests. Column references and
/// literals pass through verbatim.
pub fn render_condition(expr: &str) -> String {
    let stripped = unwrap_bare_identifiers(&strip_casts(expr));
    let inner = strip_outer_parens(stripped.trim());
    spell_operators(inner)
}

/// Quote state while scanning an expression.
#[derive(Clone, Copy, PartialEq)]
enum Quote {
    None,
    Single,
    Double,
}

fn strip_casts(expr: &str) -> String {
    let chars: Vec<char> = expr.chars().collect();
    let mut out = String::with_capacity(expr.len());
    let mut quote = Quote::None;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match quote {
            Quote::Single | Quote::Double => {
                out.push(c);
                let closing = if quote == Quote::Single { '\'' } else { '"' };
                if c == closing {
                    quote = Quote::None;
                }
                i += 1;
            }
            Quote::None => {
                if c == ':' && chars.get(i + 1) == Some(&':') {
                    i = skip_type_name(&chars, i + 2);
                    continue;
                }
                match c {
                    '\'' => quote = Quote::Single,
                    '"' => quote = Quote::Double,
                    _ => {}
                }
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

/// Returns the index just past a type name starting at `i`.
fn skip_type_name(chars: &[char], mut i: usize) -> usize {
    let rest: String = chars[i..].iter().collect();
    if let Some(t) = MULTIWORD_TYPES.iter().find(|t| rest.starts_with(**t)) {
        i += t.chars().count();
    } else if chars.get(i) == Some(&'"') {
        i += 1;
        while i < chars.len() && chars[i] != '"' {
            i += 1;
        }
        i = (i + 1).min(chars.len());
    } else {
        while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
            i += 1;
        }
    }
    // type modifier, e.g. numeric(15,2)
    if chars.get(i) == Some(&'(') {
        let mut j = i + 1;
        while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == ',' || chars[j] == ' ') {
            j += 1;
        }
        if chars.get(j) == Some(&')') {
            i = j + 1;
        }
    }
    while chars.get(i) == Some(&'[') && chars.get(i + 1) == Some(&']') {
        i += 2;
    }
    i
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

/// Drops parentheses around a lone column reference, which cast stripping
/// leaves behind: `(c.name)::text` becomes `c.name`. Function calls keep
/// theirs.
fn unwrap_bare_identifiers(expr: &str) -> String {
    let chars: Vec<char> = expr.chars().collect();
    let mut out = String::with_capacity(expr.len());
    let mut quote = Quote::None;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match (quote, c) {
            (Quote::Single, '\'') | (Quote::Double, '"') => quote = Quote::None,
            (Quote::Single | Quote::Double, _) => {}
            (Quote::None, '\'') => quote = Quote::Single,
            (Quote::None, '"') => quote = Quote::Double,
            (Quote::None, '(') if !out.ends_with(is_ident_char) => {
                let mut j = i + 1;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                let starts_alpha = chars.get(i + 1).is_some_and(|c| c.is_alphabetic() || *c == '_');
                if starts_alpha && chars.get(j) == Some(&')') {
                    out.extend(&chars[i + 1..j]);
                    i = j + 1;
                    continue;
                }
            }
            _ => {}
        }
        out.push(c);
        i += 1;
    }
    out
}

/// Byte index of the parenthesis closing the one at byte 0, if any.
fn matching_close(s: &str) -> Option<usize> {
    let mut depth = 0usize;
    let mut quote = Quote::None;
    for (i, c) in s.char_indices() {
        match (quote, c) {
            (Quote::Single, '\'') | (Quote::Double, '"') => quote = Quote::None,
            (Quote::Single | Quote::Double, _) => {}
            (Quote::None, '\'') => quote = Quote::Single,
            (Quote::None, '"') => quote = Quote::Double,
            (Quote::None, '(') => depth += 1,
            (Quote::None, ')') => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn strip_outer_parens(mut s: &str) -> &str {
    while s.starts_with('(') && matching_close(s) == Some(s.len() - 1) {
        s = s[1..s.len() - 1].trim();
    }
    s
}

fn spell_operators(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 16);
    let mut quote = Quote::None;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if quote != Quote::None {
            out.push(c);
            if (quote == Quote::Single && c == '\'') || (quote == Quote::Double && c == '"') {
                quote = Quote::None;
            }
            i += 1;
            continue;
        }
        if c == '\'' || c == '"' {
            quote = if c == '\'' { Quote::Single } else { Quote::Double };
            out.push(c);
            i += 1;
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match word.as_str() {
                "AND" | "OR" | "NOT" | "IS" | "NULL" | "TRUE" | "FALSE" => out.push_str(&word.to_lowercase()),
                _ => out.push_str(&word),
            }
        } else if c.is_ascii_digit() {
            // numbers (and identifiers glued to them) pass through
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                out.push(chars[i]);
                i += 1;
            }
        } else if OPERATOR_CHARS.contains(c) {
            let start = i;
            while i < chars.len() && OPERATOR_CHARS.contains(chars[i]) {
                i += 1;
            }
            let op: String = chars[start..i].iter().collect();
            match OPERATOR_WORDS.iter().find(|(sym, _)| *sym == op) {
                Some((_, word)) => {
                    if !out.is_empty() && !out.ends_with(char::is_whitespace) {
                        out.push(' ');
                    }
                    out.push_str(word);
                    if i < chars.len() && !chars[i].is_whitespace() {
                        out.push(' ');
                    }
                }
                None => out.push_str(&op),
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spells_comparison() {
        assert_eq!(
            render_condition("(l_commitdate < l_receiptdate)"),
            "l_commitdate is less than l_receiptdate"
        );
    }

    #[test]
    fn strips_casts_and_redundant_parens() {
        assert_eq!(
            render_condition("((o_orderdate >= '1993-07-01'::date))"),
            "o_orderdate is at least '1993-07-01'"
        );
        assert_eq!(
            render_condition("(o_orderdate < ('1993-07-01'::date + '3 mons'::interval))"),
            "o_orderdate is less than ('1993-07-01' + '3 mons')"
        );
        assert_eq!(
            render_condition("((c.name)::text = 'x'::character varying)"),
            "c.name equals 'x'"
        );
        assert_eq!(render_condition("(lower((c.name)::text) = 'x'::text)"), "lower(c.name) equals 'x'");
        assert_eq!(render_condition("((a)::numeric > (1)::numeric)"), "a is greater than (1)");
        assert_eq!(
            render_condition("(ts >= '2020-01-01 00:00:00'::timestamp without time zone)"),
            "ts is at least '2020-01-01 00:00:00'"
        );
        assert_eq!(render_condition("(price > 1.5::numeric(15,2))"), "price is greater than 1.5");
        assert_eq!(render_condition("(tags = '{a}'::text[])"), "tags equals '{a}'");
    }

    #[test]
    fn empty_stays_empty() {
        assert_eq!(render_condition(""), "");
    }

    #[test]
    fn connectives_are_lowercased_and_inner_parens_kept() {
        assert_eq!(
            render_condition("((a = 1) AND (b <> 2) OR (NOT c))"),
            "(a equals 1) and (b does not equal 2) or (not c)"
        );
        assert_eq!(render_condition("(p_type ~~ 'MEDIUM POLISHED%'::text)"), "p_type matches pattern 'MEDIUM POLISHED%'");
        assert_eq!(render_condition("(p_type !~~ 'X%'::text)"), "p_type does not match pattern 'X%'");
        assert_eq!(render_condition("(a <= b) OR (a >= c)"), "(a is at most b) or (a is at least c)");
    }

    #[test]
    fn null_tests_read_as_words() {
        assert_eq!(render_condition("(s_suppkey IS NOT NULL)"), "s_suppkey is not null");
        assert_eq!(render_condition("(flag IS TRUE)"), "flag is true");
    }

    #[test]
    fn quoted_text_is_untouched() {
        assert_eq!(
            render_condition("(comment = 'a = b AND c::int')"),
            "comment equals 'a = b AND c::int'"
        );
        assert_eq!(render_condition("(\"AND\" = 1)"), "\"AND\" equals 1");
        assert_eq!(render_condition("(x = 'it''s')"), "x equals 'it''s'");
    }

    #[test]
    fn unknown_operators_pass_through() {
        assert_eq!(render_condition("(doc ->> 'k')"), "doc ->> 'k'");
        assert_eq!(render_condition("(a = -1)"), "a equals -1");
        assert_eq!(render_condition("(a=b)"), "a equals b");
    }

    #[test]
    fn unbalanced_input_passes_through() {
        assert_eq!(render_condition("(a = 1"), "(a equals 1");
        assert_eq!(render_condition("(a + 1) = (b + 1)"), "(a + 1) equals (b + 1)");
    }
}
