//! Fielded boolean search queries.
//!
//! ```text
//! query   = or ;
//! or      = and { "OR" and } ;
//! and     = not { "AND" not | "NOT" atom } ;
//! not     = [ "NOT" ] atom ;
//! atom    = field "=" "(" or ")" | "(" or ")" | phrase | word ;
//! field   = "TS" | "TI" | "AB" | "AU" | "PY" ;
//! phrase  = '"' text-without-quotes '"' ;
//! word    = token [ "*" ] ;            (* PY atoms: year | year "-" year *)
//! ```
//!
//! Operators and field tags are case-sensitive uppercase; terms match
//! case-insensitively. `a NOT b` is shorthand for `a AND NOT b`. Terms outside
//! any field search the topic scope (title, abstract and keywords).

use std::fmt;

use thiserror::Error;

use crate::corpus::{normalize_name, CorpusStore, MetadataRecord};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldTag {
    /// Title, abstract and keywords.
    Ts,
    Ti,
    Ab,
    Au,
    Py,
}

impl FieldTag {
    pub const ALL: [FieldTag; 5] = [FieldTag::Ts, FieldTag::Ti, FieldTag::Ab, FieldTag::Au, FieldTag::Py];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldTag::Ts => "TS",
            FieldTag::Ti => "TI",
            FieldTag::Ab => "AB",
            FieldTag::Au => "AU",
            FieldTag::Py => "PY",
        }
    }

    pub fn from_tag(tag: &str) -> Option<FieldTag> {
        FieldTag::ALL.into_iter().find(|f| f.as_str() == tag)
    }
}

impl fmt::Display for FieldTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Query {
    And(Vec<Query>),
    Or(Vec<Query>),
    Not(Box<Query>),
    Field(FieldTag, Box<Query>),
    /// Quoted token sequence; a trailing `*` makes the last token a prefix.
    Phrase(String),
    Word { text: String, wildcard: bool },
    YearRange { lo: i32, hi: i32 },
}

impl Query {
    pub fn word(text: &str) -> Query {
        Query::Word { text: text.to_string(), wildcard: false }
    }

    pub fn prefix(text: &str) -> Query {
        Query::Word { text: text.to_string(), wildcard: true }
    }

    pub fn phrase(text: &str) -> Query {
        Query::Phrase(text.to_string())
    }

    pub fn field(tag: FieldTag, child: Query) -> Query {
        Query::Field(tag, Box::new(child))
    }

    pub fn not(child: Query) -> Query {
        Query::Not(Box::new(child))
    }

    pub fn contains_field(&self) -> bool {
        match self {
            Query::Field(..) => true,
            Query::And(cs) | Query::Or(cs) => cs.iter().any(Query::contains_field),
            Query::Not(c) => c.contains_field(),
            _ => false,
        }
    }

    /// True if any `Field` node with this tag occurs in the tree.
    pub fn mentions_field(&self, tag: FieldTag) -> bool {
        match self {
            Query::Field(t, c) => *t == tag || c.mentions_field(tag),
            Query::And(cs) | Query::Or(cs) => cs.iter().any(|c| c.mentions_field(tag)),
            Query::Not(c) => c.mentions_field(tag),
            _ => false,
        }
    }

    /// Wraps every maximal field-free subtree in `Field(TS, ..)`.
    pub fn with_explicit_fields(&self) -> Query {
        if !self.contains_field() {
            return Query::field(FieldTag::Ts, self.clone());
        }
        match self {
            Query::And(cs) => Query::And(cs.iter().map(Query::with_explicit_fields).collect()),
            Query::Or(cs) => Query::Or(cs.iter().map(Query::with_explicit_fields).collect()),
            Query::Not(c) => Query::not(c.with_explicit_fields()),
            other => other.clone(),
        }
    }

    /// Checks the structural invariants of the tree.
    pub fn validate(&self) -> Result<(), AstError> {
        self.validate_in(None)
    }

    fn validate_in(&self, scope: Option<FieldTag>) -> Result<(), AstError> {
        match self {
            Query::And(cs) | Query::Or(cs) => {
                if cs.len() < 2 {
                    return Err(AstError::Arity);
                }
                cs.iter().try_for_each(|c| c.validate_in(scope))
            }
            Query::Not(c) => c.validate_in(scope),
            Query::Field(tag, c) => {
                if scope.is_some() {
                    return Err(AstError::NestedField(*tag));
                }
                c.validate_in(Some(*tag))
            }
            Query::Phrase(text) => {
                if scope == Some(FieldTag::Py) {
                    return Err(AstError::TermUnderYearField);
                }
                if text.contains('"') || tokenize(text).is_empty() {
                    return Err(AstError::BadPhrase);
                }
                Ok(())
            }
            Query::Word { text, .. } => {
                if scope == Some(FieldTag::Py) {
                    return Err(AstError::TermUnderYearField);
                }
                if text.is_empty() || !text.chars().all(char::is_alphanumeric) {
                    return Err(AstError::BadWord);
                }
                Ok(())
            }
            Query::YearRange { lo, hi } => {
                if scope != Some(FieldTag::Py) {
                    return Err(AstError::YearOutsideYearField);
                }
                if lo > hi || *lo < 0 {
                    return Err(AstError::BadYearRange);
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_query(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AstError {
    #[error("AND/OR need at least two operands")]
    Arity,
    #[error("field {0} nested inside another field")]
    NestedField(FieldTag),
    #[error("phrase must contain at least one term and no quotes")]
    BadPhrase,
    #[error("word must be non-empty and alphanumeric")]
    BadWord,
    #[error("terms are not allowed under PY")]
    TermUnderYearField,
    #[error("year ranges are only allowed under PY")]
    YearOutsideYearField,
    #[error("year range must satisfy 0 <= lo <= hi")]
    BadYearRange,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    EmptyQuery,
    UnbalancedParen,
    UnterminatedPhrase,
    EmptyGroup,
    EmptyPhrase,
    DanglingOperator,
    UnexpectedToken,
    UnknownField(String),
    NestedField(FieldTag),
    MalformedYearRange,
    MalformedTerm,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::EmptyQuery => f.write_str("empty query"),
            ParseErrorKind::UnbalancedParen => f.write_str("unbalanced parentheses"),
            ParseErrorKind::UnterminatedPhrase => f.write_str("unterminated phrase"),
            ParseErrorKind::EmptyGroup => f.write_str("empty group"),
            ParseErrorKind::EmptyPhrase => f.write_str("empty phrase"),
            ParseErrorKind::DanglingOperator => f.write_str("dangling operator"),
            ParseErrorKind::UnexpectedToken => f.write_str("unexpected token"),
            ParseErrorKind::UnknownField(tag) => write!(f, "unknown field tag `{tag}`"),
            ParseErrorKind::NestedField(tag) => write!(f, "field {tag} cannot be nested inside another field"),
            ParseErrorKind::MalformedYearRange => f.write_str("malformed year range"),
            ParseErrorKind::MalformedTerm => f.write_str("malformed term"),
        }
    }
}

/// A parse failure. `offset` is the 0-based byte offset of the offending
/// token (or the input length at end of input).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at position {} (expected {})", self.position(), self.expected.join(", "))]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
    pub expected: Vec<&'static str>,
}

impl ParseError {
    /// 1-based position, as shown to users.
    pub fn position(&self) -> usize {
        self.offset + 1
    }
}

const EXPECT_TERM: &[&str] = &["term", "phrase", "(", "field"];
const EXPECT_OPERATOR: &[&str] = &["AND", "OR", "NOT", "end of input"];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Eq,
    And,
    Or,
    Not,
    Phrase(String),
    Word(String),
}

fn lex(input: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some(&(at, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '(' | ')' | '=' => {
                chars.next();
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    _ => Tok::Eq,
                };
                tokens.push((tok, at));
            }
            '"' => {
                chars.next();
                let start = at + 1;
                let end = loop {
                    match chars.next() {
                        Some((i, '"')) => break i,
                        Some(_) => {}
                        None => {
                            return Err(ParseError {
                                offset: at,
                                kind: ParseErrorKind::UnterminatedPhrase,
                                expected: vec!["\""],
                            })
                        }
                    }
                };
                tokens.push((Tok::Phrase(input[start..end].to_string()), at));
            }
            _ => {
                let mut end = input.len();
                while let Some(&(i, c)) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '=' | '"') {
                        end = i;
                        break;
                    }
                    chars.next();
                }
                let word = &input[at..end];
                let tok = match word {
                    "AND" => Tok::And,
                    "OR" => Tok::Or,
                    "NOT" => Tok::Not,
                    _ => Tok::Word(word.to_string()),
                };
                tokens.push((tok, at));
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    depth: usize,
    field: Option<FieldTag>,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn peek_at(&self, ahead: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + ahead).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn error(&self, kind: ParseErrorKind, expected: &[&'static str]) -> ParseError {
        ParseError { offset: self.offset(), kind, expected: expected.to_vec() }
    }

    fn after_operator(&self) -> bool {
        self.pos > 0 && matches!(self.tokens[self.pos - 1].0, Tok::And | Tok::Or | Tok::Not)
    }

    fn parse_or(&mut self) -> Result<Query, ParseError> {
        let mut children = vec![self.parse_and()?];
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            children.push(self.parse_and()?);
        }
        Ok(if children.len() == 1 { children.pop().unwrap() } else { Query::Or(children) })
    }

    fn parse_and(&mut self) -> Result<Query, ParseError> {
        let mut children = vec![self.parse_not()?];
        loop {
            match self.peek() {
                Some(Tok::And) => {
                    self.pos += 1;
                    children.push(self.parse_not()?);
                }
                Some(Tok::Not) => {
                    self.pos += 1;
                    children.push(Query::not(self.parse_atom()?));
                }
                _ => break,
            }
        }
        Ok(if children.len() == 1 { children.pop().unwrap() } else { Query::And(children) })
    }

    fn parse_not(&mut self) -> Result<Query, ParseError> {
        if self.peek() == Some(&Tok::Not) {
            self.pos += 1;
            return Ok(Query::not(self.parse_atom()?));
        }
        self.parse_atom()
    }

    fn parse_group(&mut self) -> Result<Query, ParseError> {
        // positioned on "("
        self.pos += 1;
        if self.peek() == Some(&Tok::RParen) {
            return Err(self.error(ParseErrorKind::EmptyGroup, EXPECT_TERM));
        }
        self.depth += 1;
        let inner = self.parse_or()?;
        self.depth -= 1;
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(inner)
            }
            None => Err(self.error(ParseErrorKind::UnbalancedParen, &[")"])),
            Some(_) => Err(self.error(ParseErrorKind::UnexpectedToken, &["AND", "OR", "NOT", ")"])),
        }
    }

    fn parse_atom(&mut self) -> Result<Query, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(if self.after_operator() {
                self.error(ParseErrorKind::DanglingOperator, EXPECT_TERM)
            } else {
                self.error(ParseErrorKind::EmptyQuery, EXPECT_TERM)
            });
        };
        match tok {
            Tok::LParen => self.parse_group(),
            Tok::Word(tag) if self.peek_at(1) == Some(&Tok::Eq) => {
                let field = FieldTag::from_tag(&tag)
                    .ok_or_else(|| self.error(ParseErrorKind::UnknownField(tag.clone()), &["TS", "TI", "AB", "AU", "PY"]))?;
                if self.field.is_some() {
                    return Err(self.error(ParseErrorKind::NestedField(field), EXPECT_TERM));
                }
                self.pos += 2;
                if self.peek() != Some(&Tok::LParen) {
                    return Err(self.error(ParseErrorKind::UnexpectedToken, &["("]));
                }
                self.field = Some(field);
                let inner = self.parse_group();
                self.field = None;
                Ok(Query::field(field, inner?))
            }
            Tok::Phrase(text) => {
                if self.field == Some(FieldTag::Py) {
                    return Err(self.error(ParseErrorKind::MalformedYearRange, &["year", "year-year"]));
                }
                if tokenize(&text).is_empty() {
                    return Err(self.error(ParseErrorKind::EmptyPhrase, &["term"]));
                }
                self.pos += 1;
                Ok(Query::Phrase(text))
            }
            Tok::Word(word) => {
                let atom = if self.field == Some(FieldTag::Py) {
                    parse_year_range(&word)
                        .ok_or_else(|| self.error(ParseErrorKind::MalformedYearRange, &["year", "year-year"]))?
                } else {
                    let (text, wildcard) = match word.strip_suffix('*') {
                        Some(stem) => (stem, true),
                        None => (word.as_str(), false),
                    };
                    if text.is_empty() || !text.chars().all(char::is_alphanumeric) {
                        return Err(self.error(ParseErrorKind::MalformedTerm, &["term"]));
                    }
                    Query::Word { text: text.to_string(), wildcard }
                };
                self.pos += 1;
                Ok(atom)
            }
            Tok::RParen if self.depth == 0 => Err(self.error(ParseErrorKind::UnbalancedParen, EXPECT_TERM)),
            Tok::RParen | Tok::And | Tok::Or | Tok::Not | Tok::Eq => {
                let kind = if self.after_operator() || matches!(tok, Tok::And | Tok::Or) {
                    ParseErrorKind::DanglingOperator
                } else {
                    ParseErrorKind::UnexpectedToken
                };
                Err(self.error(kind, EXPECT_TERM))
            }
        }
    }
}

fn parse_year(text: &str) -> Option<i32> {
    if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    text.parse().ok()
}

fn parse_year_range(word: &str) -> Option<Query> {
    let (lo, hi) = match word.split_once('-') {
        Some((lo, hi)) => (parse_year(lo)?, parse_year(hi)?),
        None => {
            let year = parse_year(word)?;
            (year, year)
        }
    };
    (lo <= hi).then_some(Query::YearRange { lo, hi })
}

/// Parses query text. Bare terms are kept unwrapped; see
/// [`Query::with_explicit_fields`].
pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0, end: text.len(), depth: 0, field: None };
    let query = parser.parse_or()?;
    match parser.peek() {
        None => Ok(query),
        Some(Tok::RParen) => Err(parser.error(ParseErrorKind::UnbalancedParen, EXPECT_OPERATOR)),
        Some(_) => Err(parser.error(ParseErrorKind::UnexpectedToken, EXPECT_OPERATOR)),
    }
}

/// Canonical text form: uppercase operators, explicit fields, quoted phrases
/// and only the parentheses needed to reproduce the same tree.
pub fn render_query(query: &Query) -> String {
    let mut out = String::new();
    render_into(&query.with_explicit_fields(), &mut out);
    out
}

fn render_into(query: &Query, out: &mut String) {
    match query {
        Query::Or(cs) => render_joined(cs, " OR ", |c| matches!(c, Query::Or(_)), out),
        Query::And(cs) => render_joined(cs, " AND ", |c| matches!(c, Query::Or(_) | Query::And(_)), out),
        Query::Not(c) => {
            out.push_str("NOT ");
            render_wrapped(c, matches!(**c, Query::Or(_) | Query::And(_) | Query::Not(_)), out);
        }
        Query::Field(tag, c) => {
            out.push_str(tag.as_str());
            out.push_str("=(");
            render_into(c, out);
            out.push(')');
        }
        Query::Phrase(text) => {
            out.push('"');
            out.push_str(text);
            out.push('"');
        }
        Query::Word { text, wildcard } => {
            out.push_str(text);
            if *wildcard {
                out.push('*');
            }
        }
        Query::YearRange { lo, hi } => out.push_str(&format!("{lo}-{hi}")),
    }
}

fn render_joined(children: &[Query], sep: &str, needs_parens: impl Fn(&Query) -> bool, out: &mut String) {
    for (i, child) in children.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        render_wrapped(child, needs_parens(child), out);
    }
}

fn render_wrapped(query: &Query, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        render_into(query, out);
        out.push(')');
    } else {
        render_into(query, out);
    }
}

/// Tokenized view of a record, built once per evaluation pass.
#[derive(Debug, Clone)]
pub struct RecordView {
    title: Vec<String>,
    abstract_text: Vec<String>,
    keywords: Vec<Vec<String>>,
    authors: Vec<(String, Vec<String>)>,
    year: i32,
}

impl RecordView {
    pub fn new(record: &MetadataRecord) -> RecordView {
        RecordView {
            title: tokenize(&record.title),
            abstract_text: tokenize(&record.abstract_text),
            keywords: record.keywords.iter().map(|k| tokenize(k)).collect(),
            authors: record.authors.iter().map(|a| (a.canonical_name.clone(), tokenize(&a.canonical_name))).collect(),
            year: record.year,
        }
    }

    fn units(&self, scope: FieldTag) -> Vec<&[String]> {
        match scope {
            FieldTag::Ts => std::iter::once(self.title.as_slice())
                .chain(std::iter::once(self.abstract_text.as_slice()))
                .chain(self.keywords.iter().map(Vec::as_slice))
                .collect(),
            FieldTag::Ti => vec![&self.title],
            FieldTag::Ab => vec![&self.abstract_text],
            FieldTag::Au => self.authors.iter().map(|(_, t)| t.as_slice()).collect(),
            FieldTag::Py => Vec::new(),
        }
    }

    fn matches(&self, query: &Query, scope: FieldTag) -> bool {
        match query {
            Query::And(cs) => cs.iter().all(|c| self.matches(c, scope)),
            Query::Or(cs) => cs.iter().any(|c| self.matches(c, scope)),
            Query::Not(c) => !self.matches(c, scope),
            Query::Field(tag, c) => self.matches(c, *tag),
            Query::Word { text, wildcard } => {
                let needle = text.to_lowercase();
                self.units(scope).iter().flat_map(|u| u.iter()).any(|t| token_matches(t, &needle, *wildcard))
            }
            Query::Phrase(text) => {
                let (terms, prefix_last) = phrase_terms(text);
                if terms.is_empty() {
                    return false;
                }
                if scope == FieldTag::Au {
                    if let Ok(name) = normalize_name(text) {
                        if self.authors.iter().any(|(canonical, _)| *canonical == name) {
                            return true;
                        }
                    }
                }
                self.units(scope).iter().any(|unit| contains_run(unit, &terms, prefix_last))
            }
            Query::YearRange { lo, hi } => scope == FieldTag::Py && (*lo..=*hi).contains(&self.year),
        }
    }
}

fn token_matches(token: &str, needle: &str, prefix: bool) -> bool {
    if prefix {
        token.starts_with(needle)
    } else {
        token == needle
    }
}

fn phrase_terms(text: &str) -> (Vec<String>, bool) {
    (tokenize(text), text.trim_end().ends_with('*'))
}

fn contains_run(unit: &[String], terms: &[String], prefix_last: bool) -> bool {
    if unit.len() < terms.len() {
        return false;
    }
    unit.windows(terms.len()).any(|window| {
        window.iter().zip(terms).enumerate().all(|(i, (token, term))| {
            token_matches(token, term, prefix_last && i + 1 == terms.len())
        })
    })
}

/// Evaluates a query against one record.
pub fn matches(query: &Query, record: &MetadataRecord) -> bool {
    RecordView::new(record).matches(query, FieldTag::Ts)
}

/// Matching uids ordered by year descending, then uid ascending.
pub fn search(query: &Query, store: &CorpusStore) -> Vec<String> {
    let mut hits: Vec<(i32, &str)> = store
        .records()
        .filter(|r| matches(query, r))
        .map(|r| (r.year, r.uid.as_str()))
        .collect();
    hits.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    hits.into_iter().map(|(_, uid)| uid.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_record;

    fn w(t: &str) -> Query {
        Query::word(t)
    }

    #[test]
    fn fielded_prefix() {
        assert_eq!(
            parse_query("TS=(llm AND health*)").unwrap(),
            Query::field(FieldTag::Ts, Query::And(vec![w("llm"), Query::prefix("health")]))
        );
    }

    #[test]
    fn precedence() {
        assert_eq!(parse_query("a OR b AND c").unwrap(), Query::Or(vec![w("a"), Query::And(vec![w("b"), w("c")])]));
        assert_eq!(
            parse_query("NOT a AND b").unwrap(),
            Query::And(vec![Query::not(w("a")), w("b")])
        );
        assert_eq!(parse_query("(a OR b) AND c").unwrap(), Query::And(vec![Query::Or(vec![w("a"), w("b")]), w("c")]));
    }

    #[test]
    fn infix_not_is_and_not() {
        assert_eq!(
            parse_query("TS=(health) NOT TS=(mental)").unwrap(),
            Query::And(vec![
                Query::field(FieldTag::Ts, w("health")),
                Query::not(Query::field(FieldTag::Ts, w("mental"))),
            ])
        );
    }

    #[test]
    fn dangling_and() {
        let err = parse_query("TS=(llm AND )").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DanglingOperator);
        assert_eq!(err.offset, 12);
        assert_eq!(err.position(), 13);
        assert!(err.expected.contains(&"term"));
    }

    #[test]
    fn error_kinds() {
        let kind = |q: &str| parse_query(q).unwrap_err().kind;
        assert_eq!(kind(""), ParseErrorKind::EmptyQuery);
        assert_eq!(kind("(a OR b"), ParseErrorKind::UnbalancedParen);
        assert_eq!(kind("a OR b)"), ParseErrorKind::UnbalancedParen);
        assert_eq!(kind("()"), ParseErrorKind::EmptyGroup);
        assert_eq!(kind("TS=()"), ParseErrorKind::EmptyGroup);
        assert_eq!(kind("a AND"), ParseErrorKind::DanglingOperator);
        assert_eq!(kind("OR a"), ParseErrorKind::DanglingOperator);
        assert_eq!(kind("XX=(a)"), ParseErrorKind::UnknownField("XX".into()));
        assert_eq!(kind("PY=(2020-)"), ParseErrorKind::MalformedYearRange);
        assert_eq!(kind("PY=(2023-2020)"), ParseErrorKind::MalformedYearRange);
        assert_eq!(kind("PY=(recent)"), ParseErrorKind::MalformedYearRange);
        assert_eq!(kind("TS=(TI=(a))"), ParseErrorKind::NestedField(FieldTag::Ti));
        assert_eq!(kind("\"open"), ParseErrorKind::UnterminatedPhrase);
        assert_eq!(kind("\" \""), ParseErrorKind::EmptyPhrase);
        assert_eq!(kind("a b"), ParseErrorKind::UnexpectedToken);
        assert_eq!(kind("he*lo"), ParseErrorKind::MalformedTerm);
        assert_eq!(kind("covid-19"), ParseErrorKind::MalformedTerm);
    }

    #[test]
    fn canonical_rendering() {
        assert_eq!(render_query(&Query::Or(vec![w("a"), Query::And(vec![w("b"), w("c")])])), "TS=(a OR b AND c)");
        assert_eq!(
            render_query(&Query::field(FieldTag::Py, Query::YearRange { lo: 2020, hi: 2023 })),
            "PY=(2020-2023)"
        );
        assert_eq!(render_query(&parse_query("a NOT b").unwrap()), "TS=(a AND NOT b)");
        assert_eq!(
            render_query(&parse_query(r#"TI=("deep learning") OR x"#).unwrap()),
            r#"TI=("deep learning") OR TS=(x)"#
        );
        let nested = Query::Or(vec![Query::Or(vec![w("a"), w("b")]), w("c")]);
        assert_eq!(render_query(&nested), "TS=((a OR b) OR c)");
        assert_eq!(parse_query(&render_query(&nested)).unwrap(), nested.with_explicit_fields());
    }

    fn rec(json: &str) -> MetadataRecord {
        parse_record(json).unwrap()
    }

    #[test]
    fn prefix_is_case_insensitive() {
        let r = rec(r#"{"uid":"W","title":"LLMs in Healthcare","year":2023}"#);
        assert!(matches(&parse_query("TI=(llm*)").unwrap(), &r));
        assert!(!matches(&parse_query("TI=(llm)").unwrap(), &r));
    }

    #[test]
    fn not_excludes_keyword_hit() {
        let r = rec(r#"{"uid":"W","title":"A study","year":2023,"keywords":["mental health"]}"#);
        assert!(matches(&parse_query("TS=(health)").unwrap(), &r));
        assert!(!matches(&parse_query("TS=(health) NOT TS=(mental)").unwrap(), &r));
    }

    #[test]
    fn phrases_do_not_cross_units() {
        let r = rec(r#"{"uid":"W","title":"large language","abstract":"model serving","year":2023}"#);
        assert!(!matches(&parse_query(r#""language model""#).unwrap(), &r));
        let r = rec(r#"{"uid":"W","title":"Large Language Models","year":2023}"#);
        assert!(matches(&parse_query(r#""large language model*""#).unwrap(), &r));
        assert!(!matches(&parse_query(r#""large language model""#).unwrap(), &r));
    }

    #[test]
    fn author_scope() {
        let r = rec(r#"{"uid":"W","title":"T","year":2023,"authors":[{"name":"Ada Lovelace"}]}"#);
        assert!(matches(&parse_query("AU=(lovelace)").unwrap(), &r));
        assert!(matches(&parse_query(r#"AU=("Ada Lovelace")"#).unwrap(), &r));
        assert!(matches(&parse_query(r#"AU=("lovelace, a.")"#).unwrap(), &r));
        assert!(!matches(&parse_query("AU=(babbage)").unwrap(), &r));
        assert!(!matches(&parse_query("TI=(lovelace)").unwrap(), &r));
    }

    #[test]
    fn year_filter_and_order() {
        let store = CorpusStore::ingest([
            r#"{"uid":"C","title":"t","year":2023}"#,
            r#"{"uid":"A","title":"t","year":2023}"#,
            r#"{"uid":"D","title":"t","year":2022}"#,
            r#"{"uid":"B","title":"t","year":2023}"#,
        ]);
        assert_eq!(search(&parse_query("PY=(2023-2023)").unwrap(), &store), vec!["A", "B", "C"]);
        assert_eq!(search(&parse_query("PY=(2022 OR 2023)").unwrap(), &store), vec!["A", "B", "C", "D"]);
        assert!(search(&parse_query("TS=(nothing)").unwrap(), &store).is_empty());
    }

    #[test]
    fn validate_rejects_bad_trees() {
        assert_eq!(Query::And(vec![w("a")]).validate(), Err(AstError::Arity));
        assert_eq!(Query::YearRange { lo: 1, hi: 2 }.validate(), Err(AstError::YearOutsideYearField));
        assert_eq!(
            Query::field(FieldTag::Ts, Query::field(FieldTag::Ts, w("a"))).validate(),
            Err(AstError::NestedField(FieldTag::Ts))
        );
        assert!(parse_query(r#"TS=("large language model*" OR llm*) AND TS=(healthcare OR clinical)"#)
            .unwrap()
            .validate()
            .is_ok());
    }
}
