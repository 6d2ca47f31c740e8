//! A small conjunctive predicate language over case attributes.
//!
//! ```text
//! predicate  := comparison ("and" comparison)*
//! comparison := identifier operator literal
//! operator   := "=" | "!=" | "≠" | "<" | "<=" | "≤" | ">" | ">=" | "≥"
//! literal    := quoted text | integer | real | true | false
//! ```
//!
//! A comparison against an attribute the case does not have is false, and so
//! is a comparison between incompatible types (text against a number, say).

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::timestamp::parse_timestamp;
use super::{AttributeValue, Trace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredicateError {
    #[error("syntax error at offset {offset}: {message}")]
    SyntaxError { offset: usize, message: String },
    #[error("empty predicate expression")]
    EmptyExpression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Operator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Operator {
    fn accepts(self, ord: Ordering) -> bool {
        match self {
            Operator::Eq => ord == Ordering::Equal,
            Operator::Ne => ord != Ordering::Equal,
            Operator::Lt => ord == Ordering::Less,
            Operator::Le => ord != Ordering::Greater,
            Operator::Gt => ord == Ordering::Greater,
            Operator::Ge => ord != Ordering::Less,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::Eq => "=",
            Operator::Ne => "!=",
            Operator::Lt => "<",
            Operator::Le => "<=",
            Operator::Gt => ">",
            Operator::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub attribute: String,
    pub operator: Operator,
    pub literal: AttributeValue,
}

impl Comparison {
    pub fn matches(&self, trace: &Trace) -> bool {
        trace
            .case_attributes
            .get(&self.attribute)
            .and_then(|value| compare_values(value, &self.literal))
            .is_some_and(|ord| self.operator.accepts(ord))
    }
}

fn compare_values(value: &AttributeValue, literal: &AttributeValue) -> Option<Ordering> {
    use AttributeValue::*;
    match (value, literal) {
        (Text(a), Text(b)) => Some(a.cmp(b)),
        (Int(a), Int(b)) => Some(a.cmp(b)),
        (Int(a), Real(b)) => (*a as f64).partial_cmp(b),
        (Real(a), Int(b)) => a.partial_cmp(&(*b as f64)),
        (Real(a), Real(b)) => a.partial_cmp(b),
        (Boolean(a), Boolean(b)) => Some(a.cmp(b)),
        (Instant(a), Text(b)) => parse_timestamp(b).map(|b| a.cmp(&b)),
        (Instant(a), Instant(b)) => Some(a.cmp(b)),
        _ => None,
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.attribute, self.operator)?;
        match &self.literal {
            AttributeValue::Text(s) => write!(f, "{s:?}"),
            AttributeValue::Real(r) if r.fract() == 0.0 => write!(f, "{r:.1}"),
            other => write!(f, "{other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CasePredicate {
    pub comparisons: Vec<Comparison>,
}

impl CasePredicate {
    /// True when every comparison holds for the trace's case attributes.
    pub fn matches(&self, trace: &Trace) -> bool {
        self.comparisons.iter().all(|c| c.matches(trace))
    }
}

impl fmt::Display for CasePredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.comparisons.iter().enumerate() {
            if i > 0 {
                f.write_str(" and ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Op(Operator),
    BadOp(String),
    Literal(AttributeValue),
    And,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | ':' | '.' | '-')
}

impl Lexer {
    fn err(offset: usize, message: impl Into<String>) -> PredicateError {
        PredicateError::SyntaxError {
            offset,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn next_token(&mut self) -> Result<Option<(usize, Token)>, PredicateError> {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok(None);
        };
        let token = match c {
            '"' | '\'' => self.quoted(c)?,
            '=' | '!' | '<' | '>' | '≠' | '≤' | '≥' => self.operator(),
            c if c.is_ascii_digit() || c == '-' || c == '+' => self.number()?,
            c if is_ident_start(c) => {
                while self.peek().is_some_and(is_ident_char) {
                    self.pos += 1;
                }
                let word: String = self.chars[start..self.pos].iter().collect();
                match word.as_str() {
                    w if w.eq_ignore_ascii_case("and") => Token::And,
                    "true" => Token::Literal(AttributeValue::Boolean(true)),
                    "false" => Token::Literal(AttributeValue::Boolean(false)),
                    _ => Token::Ident(word),
                }
            }
            other => return Err(Self::err(start, format!("unexpected character '{other}'"))),
        };
        Ok(Some((start, token)))
    }

    fn operator(&mut self) -> Token {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| matches!(c, '=' | '!' | '<' | '>' | '≠' | '≤' | '≥'))
        {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        match text.as_str() {
            "=" => Token::Op(Operator::Eq),
            "!=" | "≠" | "<>" => Token::Op(Operator::Ne),
            "<" => Token::Op(Operator::Lt),
            "<=" | "≤" => Token::Op(Operator::Le),
            ">" => Token::Op(Operator::Gt),
            ">=" | "≥" => Token::Op(Operator::Ge),
            _ => Token::BadOp(text),
        }
    }

    fn quoted(&mut self, quote: char) -> Result<Token, PredicateError> {
        let start = self.pos;
        self.pos += 1;
        let mut text = String::new();
        loop {
            match self.peek() {
                None => return Err(Self::err(start, "unterminated string literal")),
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(c) => text.push(c),
                        None => return Err(Self::err(start, "unterminated string literal")),
                    }
                }
                Some(c) if c == quote => {
                    self.pos += 1;
                    return Ok(Token::Literal(AttributeValue::Text(text)));
                }
                Some(c) => text.push(c),
            }
            self.pos += 1;
        }
    }

    fn number(&mut self) -> Result<Token, PredicateError> {
        let start = self.pos;
        self.pos += 1;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E'))
        {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        if let Ok(i) = text.parse::<i64>() {
            return Ok(Token::Literal(AttributeValue::Int(i)));
        }
        match text.parse::<f64>() {
            Ok(r) if r.is_finite() => Ok(Token::Literal(AttributeValue::Real(r))),
            _ => Err(Self::err(start, format!("invalid number '{text}'"))),
        }
    }
}

/// Parse a predicate expression such as `gender = "F" and age < 30`.
pub fn parse_predicate(expression: &str) -> Result<CasePredicate, PredicateError> {
    if expression.trim().is_empty() {
        return Err(PredicateError::EmptyExpression);
    }
    let mut lexer = Lexer {
        chars: expression.chars().collect(),
        pos: 0,
    };
    let end = lexer.chars.len();
    let mut comparisons = Vec::new();
    loop {
        let attribute = match lexer.next_token()? {
            Some((_, Token::Ident(name))) => name,
            Some((at, _)) => return Err(Lexer::err(at, "expected attribute name")),
            None => return Err(Lexer::err(end, "expected attribute name")),
        };
        let operator = match lexer.next_token()? {
            Some((_, Token::Op(op))) => op,
            Some((at, Token::BadOp(op))) => {
                return Err(Lexer::err(at, format!("unknown operator '{op}'")))
            }
            Some((at, _)) => return Err(Lexer::err(at, "expected comparison operator")),
            None => return Err(Lexer::err(end, "expected comparison operator")),
        };
        let literal = match lexer.next_token()? {
            Some((_, Token::Literal(v))) => v,
            Some((at, _)) => return Err(Lexer::err(at, "expected literal")),
            None => return Err(Lexer::err(end, "expected literal")),
        };
        comparisons.push(Comparison {
            attribute,
            operator,
            literal,
        });
        match lexer.next_token()? {
            None => break,
            Some((_, Token::And)) => continue,
            Some((at, _)) => return Err(Lexer::err(at, "expected 'and' or end of expression")),
        }
    }
    Ok(CasePredicate { comparisons })
}
