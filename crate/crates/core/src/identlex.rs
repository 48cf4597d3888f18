//! Identifier extraction for Java and Python, and identifier-overlap
//! matrices between projects.
//!
//! The lexer works at token level only: it skips comments, string, char and
//! numeric literals, classifies words against each language's reserved
//! keyword list, and ignores operators. Identifiers are case-folded and kept
//! whole (no camelCase splitting).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{FunctionSample, Language, UnknownLanguage};

/// Reserved keywords of Java SE 17 plus the literals `true`, `false`, `null`.
/// Contextual keywords (`var`, `record`, `yield`, ...) are valid identifiers
/// and are not listed.
pub const JAVA_KEYWORDS: &[&str] = &[
    "_", "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class",
    "const", "continue", "default", "do", "double", "else", "enum", "extends", "false", "final",
    "finally", "float", "for", "goto", "if", "implements", "import", "instanceof", "int",
    "interface", "long", "native", "new", "null", "package", "private", "protected", "public",
    "return", "short", "static", "strictfp", "super", "switch", "synchronized", "this", "throw",
    "throws", "transient", "true", "try", "void", "volatile", "while",
];

/// Python 3 hard keywords. Soft keywords (`match`, `case`, `type`, `_`) and
/// `self` are ordinary names.
pub const PYTHON_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if",
    "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try",
    "while", "with", "yield",
];

pub fn is_keyword(word: &str, language: Language) -> bool {
    match language {
        Language::Java => JAVA_KEYWORDS.binary_search(&word).is_ok(),
        Language::Python => PYTHON_KEYWORDS.binary_search(&word).is_ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Comment,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
}

fn is_ident_start(c: char, language: Language) -> bool {
    c == '_' || c.is_alphabetic() || (language == Language::Java && c == '$')
}

fn is_ident_continue(c: char, language: Language) -> bool {
    is_ident_start(c, language) || c.is_alphanumeric()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    language: Language,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(offset)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn eat_while(&mut self, mut pred: impl FnMut(char) -> bool) {
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    /// Consume up to and including `close`, or to end of input.
    fn eat_through(&mut self, close: &str) {
        match self.rest().find(close) {
            Some(i) => self.pos += i + close.len(),
            None => self.pos = self.src.len(),
        }
    }

    /// Consume a quoted literal starting at the opening quote. Unterminated
    /// single-line literals stop at the newline.
    fn eat_quoted(&mut self, quote: char) {
        self.bump();
        while let Some(c) = self.bump() {
            if c == '\\' {
                self.bump();
            } else if c == quote || c == '\n' {
                break;
            }
        }
    }

    fn eat_number(&mut self) {
        let c = self.bump();
        let radix_prefix = c == Some('0')
            && matches!(self.peek(), Some('x' | 'X' | 'b' | 'B' | 'o' | 'O'));
        if radix_prefix {
            self.bump();
            self.eat_while(|c| c.is_ascii_hexdigit() || c == '_');
        } else {
            self.eat_while(|c| c.is_ascii_digit() || c == '_' || c == '.');
            if matches!(self.peek(), Some('e' | 'E' | 'p' | 'P')) {
                let sign = matches!(self.peek_at(1), Some('+' | '-'));
                let digit_at = if sign { 2 } else { 1 };
                if self.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                    if sign {
                        self.bump();
                    }
                    self.eat_while(|c| c.is_ascii_digit() || c == '_');
                }
            }
        }
        // type suffixes: 10L, 1.0f, 3j
        self.eat_while(|c| matches!(c, 'l' | 'L' | 'f' | 'F' | 'd' | 'D' | 'j' | 'J'));
    }

    fn next_token(&mut self) -> Option<Token<'a>> {
        self.eat_while(char::is_whitespace);
        let start = self.pos;
        let c = self.peek()?;
        let rest = self.rest();
        let kind = match self.language {
            Language::Java if rest.starts_with("//") => {
                self.eat_while(|c| c != '\n');
                TokenKind::Comment
            }
            Language::Java if rest.starts_with("/*") => {
                self.pos += 2;
                self.eat_through("*/");
                TokenKind::Comment
            }
            Language::Java if rest.starts_with("\"\"\"") => {
                self.pos += 3;
                self.eat_text_block();
                TokenKind::Literal
            }
            Language::Java if c == '"' || c == '\'' => {
                self.eat_quoted(c);
                TokenKind::Literal
            }
            Language::Python if c == '#' => {
                self.eat_while(|c| c != '\n');
                TokenKind::Comment
            }
            Language::Python if c == '"' || c == '\'' => {
                self.eat_python_string();
                TokenKind::Literal
            }
            Language::Python if self.python_string_prefix().is_some() => {
                self.pos += self.python_string_prefix().unwrap_or(0);
                self.eat_python_string();
                TokenKind::Literal
            }
            _ if c.is_ascii_digit() => {
                self.eat_number();
                TokenKind::Literal
            }
            _ if c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => {
                self.eat_number();
                TokenKind::Literal
            }
            _ if is_ident_start(c, self.language) => {
                let lang = self.language;
                self.eat_while(|c| is_ident_continue(c, lang));
                if is_keyword(&self.src[start..self.pos], lang) {
                    TokenKind::Keyword
                } else {
                    TokenKind::Identifier
                }
            }
            _ => {
                self.bump();
                TokenKind::Operator
            }
        };
        Some(Token {
            kind,
            text: &self.src[start..self.pos],
        })
    }

    fn eat_text_block(&mut self) {
        while !self.rest().is_empty() {
            if self.rest().starts_with("\\") {
                self.pos += 1;
                self.bump();
            } else if self.rest().starts_with("\"\"\"") {
                self.pos += 3;
                return;
            } else {
                self.bump();
            }
        }
    }

    /// Length of a string prefix such as `r`, `b`, `f`, `rb` directly
    /// followed by a quote.
    fn python_string_prefix(&self) -> Option<usize> {
        let rest = self.rest();
        let prefix_len = rest
            .char_indices()
            .take_while(|(_, c)| matches!(c, 'r' | 'R' | 'b' | 'B' | 'u' | 'U' | 'f' | 'F'))
            .count();
        if prefix_len == 0 || prefix_len > 2 {
            return None;
        }
        let prefix = rest[..prefix_len].to_ascii_lowercase();
        let valid = matches!(
            prefix.as_str(),
            "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf"
        );
        let quoted = matches!(rest[prefix_len..].chars().next(), Some('"' | '\''));
        (valid && quoted).then_some(prefix_len)
    }

    /// A backslash skips the next character even in raw strings, which
    /// matches how Python finds the closing quote.
    fn eat_python_string(&mut self) {
        let rest = self.rest();
        let quote = rest.chars().next().unwrap_or('"');
        let triple: String = std::iter::repeat_n(quote, 3).collect();
        if rest.starts_with(&triple) {
            self.pos += 3;
            while !self.rest().is_empty() {
                if self.rest().starts_with('\\') {
                    self.pos += 1;
                    self.bump();
                } else if self.rest().starts_with(&triple) {
                    self.pos += 3;
                    return;
                } else {
                    self.bump();
                }
            }
        } else {
            self.eat_quoted(quote);
        }
    }
}

/// Tokenize source text. Never fails; malformed input degrades to operator
/// tokens or a literal running to end of line/file.
pub fn tokenize(code: &str, language: Language) -> Vec<Token<'_>> {
    let mut lexer = Lexer {
        src: code,
        pos: 0,
        language,
    };
    std::iter::from_fn(|| lexer.next_token()).collect()
}

/// Unique lowercased identifiers of a code fragment.
pub fn extract_identifiers(raw_code: &str, language: Language) -> BTreeSet<String> {
    tokenize(raw_code, language)
        .into_iter()
        .filter(|t| t.kind == TokenKind::Identifier)
        .map(|t| t.text.to_lowercase())
        .collect()
}

/// Like [`extract_identifiers`] but with the language given by name.
pub fn extract_identifiers_named(raw_code: &str, language: &str) -> Result<BTreeSet<String>, UnknownLanguage> {
    Ok(extract_identifiers(raw_code, language.parse()?))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OverlapError {
    #[error("Jaccard index of two empty sets is undefined")]
    BothEmpty,
    #[error("project {project} has {have} samples, need {need}")]
    TooFewSamples { project: String, have: usize, need: usize },
    #[error("group size must be positive")]
    ZeroGroupSize,
}

/// `|a ∩ b| / |a ∪ b|`.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Result<f64, OverlapError> {
    if a.is_empty() && b.is_empty() {
        return Err(OverlapError::BothEmpty);
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupIndex {
    I,
    II,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifierGroup {
    pub repo_slug: String,
    pub group_index: GroupIndex,
    pub identifiers: BTreeSet<String>,
}

fn identifiers_of(samples: &[FunctionSample]) -> BTreeSet<String> {
    samples
        .par_iter()
        .map(|s| extract_identifiers(&code_text(s), s.language))
        .reduce(BTreeSet::new, |mut a, b| {
            a.extend(b);
            a
        })
}

/// Raw source if present, otherwise the code tokens joined by spaces.
fn code_text(sample: &FunctionSample) -> std::borrow::Cow<'_, str> {
    if sample.raw_code.is_empty() {
        sample.code_tokens.join(" ").into()
    } else {
        sample.raw_code.as_str().into()
    }
}

/// Identifier sets for samples `[0, g)` and `[g, 2g)` of a time-sorted project.
pub fn identifier_groups(
    repo_slug: &str,
    samples: &[FunctionSample],
    group_size: usize,
) -> Result<(IdentifierGroup, IdentifierGroup), OverlapError> {
    if group_size == 0 {
        return Err(OverlapError::ZeroGroupSize);
    }
    let need = 2 * group_size;
    if samples.len() < need {
        return Err(OverlapError::TooFewSamples {
            project: repo_slug.to_string(),
            have: samples.len(),
            need,
        });
    }
    let group = |index, range: std::ops::Range<usize>| IdentifierGroup {
        repo_slug: repo_slug.to_string(),
        group_index: index,
        identifiers: identifiers_of(&samples[range]),
    };
    Ok((
        group(GroupIndex::I, 0..group_size),
        group(GroupIndex::II, group_size..need),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatrix {
    /// Owners of group I.
    pub row_labels: Vec<String>,
    /// Owners of group II.
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl OverlapMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row][col]
    }

    /// Diagonal entry divided by each off-diagonal entry of its row.
    pub fn diagonal_ratios(&self, row: usize) -> Vec<f64> {
        let diag = self.values[row][row];
        (0..self.col_labels.len())
            .filter(|&c| c != row)
            .map(|c| diag / self.values[row][c])
            .collect()
    }

    /// True when every diagonal entry is strictly larger than every other
    /// entry of its row and column.
    pub fn is_diagonally_dominant(&self) -> bool {
        let n = self.values.len();
        (0..n).all(|i| {
            let d = self.values[i][i];
            (0..n).all(|j| j == i || (d > self.values[i][j] && d > self.values[j][i]))
        })
    }

    /// CSV with a header row of group-II labels, values to two decimals.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["group_i \\ group_ii".to_string()];
        header.extend(self.col_labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.2}")));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Group I \\ Group II |");
        for c in &self.col_labels {
            let _ = write!(out, " {c} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(self.col_labels.len()));
        out.push('\n');
        for (i, (label, row)) in self.row_labels.iter().zip(&self.values).enumerate() {
            let _ = write!(out, "| {label} |");
            for (j, v) in row.iter().enumerate() {
                if i == j {
                    let _ = write!(out, " **{v:.2}** |");
                } else {
                    let _ = write!(out, " {v:.2} |");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Jaccard index of group I of each project (rows) against group II of
/// every project (columns). Projects must be time-sorted.
pub fn overlap_matrix(
    projects: &[(&str, &[FunctionSample])],
    group_size: usize,
) -> Result<OverlapMatrix, OverlapError> {
    let groups = projects
        .iter()
        .map(|(slug, samples)| identifier_groups(slug, samples, group_size))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<String> = projects.iter().map(|(s, _)| s.to_string()).collect();
    let values = groups
        .iter()
        .map(|(first, _)| {
            groups
                .iter()
                .map(|(_, second)| jaccard(&first.identifiers, &second.identifiers))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OverlapMatrix {
        row_labels: labels.clone(),
        col_labels: labels,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn keyword_tables_are_sorted() {
        assert!(JAVA_KEYWORDS.windows(2).all(|w| w[0] < w[1]));
        assert!(PYTHON_KEYWORDS.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn java_bean_copy_snippet() {
        let code = "public static BeanCopy from(final Object source) {\n\
                    \tBeanCopy beanCopy = new BeanCopy(source);\n\
                    \tbeanCopy.isSourceMap = source instanceof Map;\n\
                    \treturn beanCopy;\n}";
        let ids = extract_identifiers(code, Language::Java);
        assert_eq!(ids, set(&["beancopy", "from", "object", "source", "issourcemap", "map"]));
    }

    #[test]
    fn python_minimal_function() {
        let ids = extract_identifiers("def f(x):\n  return x + 1", Language::Python);
        assert_eq!(ids, set(&["f", "x"]));
    }

    #[test]
    fn comments_only_is_empty() {
        assert!(extract_identifiers("// one\n/* two\n three */", Language::Java).is_empty());
        assert!(extract_identifiers("# one\n# two", Language::Python).is_empty());
    }

    #[test]
    fn java_literals_skipped() {
        let code = r#"String s = "a \" quoted word"; char c = '\''; long n = 0x1FL + 1_000 + 2.5e-3f; String t = """
            text block word
            """;"#;
        assert_eq!(extract_identifiers(code, Language::Java), set(&["string", "s", "c", "n", "t"]));
    }

    #[test]
    fn python_strings_and_self() {
        let code = "def run(self, path):\n    \"\"\"Docstring words.\"\"\"\n    x = rb'raw\\\\' + f\"{path}\" + 'it''s'\n    return self.value  # tail\n";
        assert_eq!(
            extract_identifiers(code, Language::Python),
            set(&["run", "self", "path", "x", "value"])
        );
    }

    #[test]
    fn java_contextual_keywords_are_identifiers() {
        let ids = extract_identifiers("var record = yield;", Language::Java);
        assert_eq!(ids, set(&["var", "record", "yield"]));
    }

    #[test]
    fn java_this_null_true_are_excluded() {
        let ids = extract_identifiers("this.a = null == b ? true : false;", Language::Java);
        assert_eq!(ids, set(&["a", "b"]));
    }

    #[test]
    fn named_language() {
        assert!(extract_identifiers_named("x", "cobol").is_err());
        assert_eq!(extract_identifiers_named("x = 1", "python").unwrap(), set(&["x"]));
    }

    #[test]
    fn jaccard_cases() {
        let abc = set(&["a", "b", "c"]);
        assert_eq!(jaccard(&abc, &abc), Ok(1.0));
        assert_eq!(jaccard(&abc, &set(&["b", "c", "d"])), Ok(0.5));
        assert_eq!(jaccard(&abc, &set(&["x"])), Ok(0.0));
        assert_eq!(jaccard(&set(&[]), &abc), Ok(0.0));
        assert_eq!(jaccard::<String>(&BTreeSet::new(), &BTreeSet::new()), Err(OverlapError::BothEmpty));
    }

    #[test]
    fn csv_and_markdown_render() {
        let m = OverlapMatrix {
            row_labels: vec!["a/x".into(), "b/y".into()],
            col_labels: vec!["a/x".into(), "b/y".into()],
            values: vec![vec![0.1612, 0.08], vec![0.06, 0.16]],
        };
        let csv = m.to_csv().unwrap();
        assert_eq!(csv.lines().nth(1), Some("a/x,0.16,0.08"));
        assert!(m.to_markdown().contains("**0.16**"));
        assert!(m.is_diagonally_dominant());
        assert_eq!(m.diagonal_ratios(0), vec![0.1612 / 0.08]);
    }
}
