//! Surface syntax for kinds and types.
//!
//! ```text
//! kind  := "S" | "T" | kind "=>" kind | "(" kind ")"
//! type  := "Skip" | "End" | "Dual" | "?" atom | "!" atom | ident
//!        | "\" ident ":" kind "." type | "mu" ident ":" kind "." type
//!        | "forall" ident ":" kind "." type
//!        | "&{" fields "}" | "+{" fields "}" | "{" fields "}" | "<" fields ">"
//!        | type type | type ";" type | type "->" type | "(" type ")"
//! fields := [ ident ":" type ("," ident ":" type)* ]
//! ```
//!
//! Application binds tightest and associates left; `;` associates right;
//! `->` is loosest and associates right. `mu`/`forall` expand to the
//! corresponding constant applied to a lambda.

use std::fmt;

use crate::syntax::{Kind, Polarity, Type, TypeConst, VarName, View};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Backslash,
    Colon,
    Dot,
    Comma,
    Semi,
    Arrow,  // ->
    DArrow, // =>
    LBrace,
    RBrace,
    LAngle,
    RAngle,
    LParen,
    RParen,
    Amp,
    Plus,
    Question,
    Bang,
    // Tokens only used by the term language; harmless here.
    Equals,
    LBracket,
    RBracket,
    Pipe,
}

#[derive(Debug, Clone)]
pub(crate) struct Lexed {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub(crate) fn lex(src: &str) -> Result<Vec<Lexed>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '-' {
            bump(&mut chars);
            match chars.peek() {
                Some('>') => {
                    bump(&mut chars);
                    out.push(Lexed { tok: Tok::Arrow, line: tline, col: tcol });
                }
                Some('-') => {
                    // line comment
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        bump(&mut chars);
                    }
                }
                _ => {
                    return Err(ParseError {
                        line: tline,
                        col: tcol,
                        message: "expected '->' or comment '--'".into(),
                    })
                }
            }
            continue;
        }
        if c == '=' {
            bump(&mut chars);
            if chars.peek() == Some(&'>') {
                bump(&mut chars);
                out.push(Lexed { tok: Tok::DArrow, line: tline, col: tcol });
            } else {
                out.push(Lexed { tok: Tok::Equals, line: tline, col: tcol });
            }
            continue;
        }
        if c.is_ascii_alphabetic() {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            out.push(Lexed { tok: Tok::Ident(s), line: tline, col: tcol });
            continue;
        }
        let tok = match c {
            '\\' => Tok::Backslash,
            ':' => Tok::Colon,
            '.' => Tok::Dot,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '<' => Tok::LAngle,
            '>' => Tok::RAngle,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '&' => Tok::Amp,
            '+' => Tok::Plus,
            '?' => Tok::Question,
            '!' => Tok::Bang,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '|' => Tok::Pipe,
            '$' => {
                return Err(ParseError {
                    line: tline,
                    col: tcol,
                    message: "'$' is reserved for canonical variables".into(),
                })
            }
            other => {
                return Err(ParseError {
                    line: tline,
                    col: tcol,
                    message: format!("unexpected character {other:?}"),
                })
            }
        };
        bump(&mut chars);
        out.push(Lexed { tok, line: tline, col: tcol });
    }
    Ok(out)
}

pub(crate) struct Cursor {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Cursor {
    pub fn new(toks: Vec<Lexed>) -> Self {
        Cursor { toks, pos: 0 }
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|l| &l.tok)
    }


    pub fn next(&mut self) -> Option<Lexed> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(l) => (l.line, l.col),
            None => self
                .toks
                .last()
                .map(|l| (l.line, l.col + 1))
                .unwrap_or((1, 1)),
        }
    }

    pub fn err(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError { line, col, message: message.into() }
    }

    pub fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == tok => {
                self.next();
                Ok(())
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }
}

const TYPE_KEYWORDS: &[&str] = &["Skip", "End", "Dual", "mu", "forall"];

pub(crate) fn is_type_keyword(s: &str) -> bool {
    TYPE_KEYWORDS.contains(&s)
}

/// Parse a complete type from source text.
pub fn parse_type(src: &str) -> Result<Type, ParseError> {
    let mut cur = Cursor::new(lex(src)?);
    let t = parse_type_at(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after type"));
    }
    Ok(t)
}

/// Parse a complete kind from source text.
pub fn parse_kind(src: &str) -> Result<Kind, ParseError> {
    let mut cur = Cursor::new(lex(src)?);
    let k = parse_kind_at(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after kind"));
    }
    Ok(k)
}

pub(crate) fn parse_kind_at(cur: &mut Cursor) -> Result<Kind, ParseError> {
    let lhs = match cur.peek() {
        Some(Tok::Ident(s)) if s == "S" => {
            cur.next();
            Kind::Session
        }
        Some(Tok::Ident(s)) if s == "T" => {
            cur.next();
            Kind::Functional
        }
        Some(Tok::LParen) => {
            cur.next();
            let k = parse_kind_at(cur)?;
            cur.expect(Tok::RParen, "')'")?;
            k
        }
        _ => return Err(cur.err("expected kind ('S', 'T' or '(')")),
    };
    if cur.peek() == Some(&Tok::DArrow) {
        cur.next();
        let rhs = parse_kind_at(cur)?;
        Ok(Kind::arrow(lhs, rhs))
    } else {
        Ok(lhs)
    }
}

/// type := semi-level ("->" type)?
pub(crate) fn parse_type_at(cur: &mut Cursor) -> Result<Type, ParseError> {
    if let Some(t) = parse_binder(cur)? {
        return Ok(t);
    }
    let lhs = parse_semi_level(cur)?;
    if cur.peek() == Some(&Tok::Arrow) {
        cur.next();
        let rhs = parse_type_at(cur)?;
        Ok(Type::fun(lhs, rhs))
    } else {
        Ok(lhs)
    }
}

fn parse_binder(cur: &mut Cursor) -> Result<Option<Type>, ParseError> {
    let make: Option<fn(VarName, Kind, Type) -> Type> = match cur.peek() {
        Some(Tok::Backslash) => Some(Type::abs),
        Some(Tok::Ident(s)) if s == "mu" => Some(Type::mu),
        Some(Tok::Ident(s)) if s == "forall" => Some(Type::forall),
        _ => None,
    };
    let Some(make) = make else { return Ok(None) };
    cur.next();
    let name = cur.expect_ident("binder name")?;
    if is_type_keyword(&name) {
        return Err(cur.err(format!("'{name}' is reserved")));
    }
    cur.expect(Tok::Colon, "':' after binder name")?;
    let kind = parse_kind_at(cur)?;
    cur.expect(Tok::Dot, "'.' after binder kind")?;
    let body = parse_type_at(cur)?;
    Ok(Some(make(VarName::user(name), kind, body)))
}

pub(crate) fn parse_semi_level(cur: &mut Cursor) -> Result<Type, ParseError> {
    let lhs = parse_app_level(cur)?;
    if cur.peek() == Some(&Tok::Semi) {
        cur.next();
        let rhs = if let Some(t) = parse_binder(cur)? {
            t
        } else {
            parse_semi_level(cur)?
        };
        Ok(Type::semi(lhs, rhs))
    } else {
        Ok(lhs)
    }
}

fn parse_app_level(cur: &mut Cursor) -> Result<Type, ParseError> {
    let mut t = parse_atom(cur)?;
    while starts_atom(cur) {
        let arg = parse_atom(cur)?;
        t = Type::app(t, arg);
    }
    Ok(t)
}

fn starts_atom(cur: &mut Cursor) -> bool {
    match cur.peek() {
        Some(Tok::Ident(s)) => !matches!(s.as_str(), "mu" | "forall"),
        Some(
            Tok::LParen | Tok::LBrace | Tok::LAngle | Tok::Amp | Tok::Plus | Tok::Question
            | Tok::Bang,
        ) => true,
        _ => false,
    }
}

fn parse_atom(cur: &mut Cursor) -> Result<Type, ParseError> {
    match cur.peek().cloned() {
        Some(Tok::Ident(s)) => {
            cur.next();
            Ok(match s.as_str() {
                "Skip" => Type::skip(),
                "End" => Type::end(),
                "Dual" => Type::Const(TypeConst::Dual),
                "mu" | "forall" => return Err(cur.err(format!("'{s}' cannot start an atom"))),
                _ => Type::var(s),
            })
        }
        Some(Tok::Question) => {
            cur.next();
            Ok(Type::msg(Polarity::In, parse_atom(cur)?))
        }
        Some(Tok::Bang) => {
            cur.next();
            Ok(Type::msg(Polarity::Out, parse_atom(cur)?))
        }
        Some(Tok::LParen) => {
            cur.next();
            let t = parse_type_at(cur)?;
            cur.expect(Tok::RParen, "')'")?;
            Ok(t)
        }
        Some(Tok::Amp) => {
            cur.next();
            cur.expect(Tok::LBrace, "'{' after '&'")?;
            let fields = parse_fields(cur, Tok::RBrace)?;
            Ok(Type::choice(View::External, fields))
        }
        Some(Tok::Plus) => {
            cur.next();
            cur.expect(Tok::LBrace, "'{' after '+'")?;
            let fields = parse_fields(cur, Tok::RBrace)?;
            Ok(Type::choice(View::Internal, fields))
        }
        Some(Tok::LBrace) => {
            cur.next();
            let fields = parse_fields(cur, Tok::RBrace)?;
            Ok(Type::record(fields))
        }
        Some(Tok::LAngle) => {
            cur.next();
            let fields = parse_fields(cur, Tok::RAngle)?;
            Ok(Type::variant(fields))
        }
        _ => Err(cur.err("expected a type")),
    }
}

fn parse_fields(cur: &mut Cursor, close: Tok) -> Result<Vec<(String, Type)>, ParseError> {
    let mut fields: Vec<(String, Type)> = Vec::new();
    if cur.peek() == Some(&close) {
        cur.next();
        return Ok(fields);
    }
    loop {
        let label = cur.expect_ident("field label")?;
        if fields.iter().any(|(l, _)| *l == label) {
            return Err(cur.err(format!("duplicate label '{label}'")));
        }
        cur.expect(Tok::Colon, "':' after field label")?;
        let t = parse_type_at(cur)?;
        fields.push((label, t));
        match cur.peek() {
            Some(Tok::Comma) => {
                cur.next();
            }
            Some(t) if *t == close => {
                cur.next();
                return Ok(fields);
            }
            _ => return Err(cur.err("expected ',' or closing delimiter")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Kind;

    #[test]
    fn parses_constants_and_sugar() {
        assert_eq!(parse_type("Skip").unwrap(), Type::skip());
        assert_eq!(
            parse_type("mu a:S . ?Int;a").unwrap(),
            Type::mu(
                VarName::user("a"),
                Kind::Session,
                Type::semi(Type::msg(Polarity::In, Type::var("Int")), Type::var("a")),
            )
        );
    }

    #[test]
    fn choice_labels_sorted() {
        let t = parse_type("&{Node: b;?a;b, Leaf: Skip}").unwrap();
        let expected = Type::choice(
            View::External,
            vec![
                ("Leaf".into(), Type::skip()),
                (
                    "Node".into(),
                    Type::semi(
                        Type::var("b"),
                        Type::semi(Type::msg(Polarity::In, Type::var("a")), Type::var("b")),
                    ),
                ),
            ],
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn precedence_application_semi_arrow() {
        // application binds tighter than ';', which binds tighter than '->'
        let t = parse_type("Stream a ; !b ; End").unwrap();
        let expected = Type::semi(
            Type::app(Type::var("Stream"), Type::var("a")),
            Type::semi(Type::msg(Polarity::Out, Type::var("b")), Type::end()),
        );
        assert_eq!(t, expected);

        let t = parse_type("a -> b -> c").unwrap();
        assert_eq!(
            t,
            Type::fun(Type::var("a"), Type::fun(Type::var("b"), Type::var("c")))
        );
    }

    #[test]
    fn kinds_right_associate() {
        assert_eq!(
            parse_kind("S=>S=>S").unwrap(),
            Kind::arrow(Kind::Session, Kind::arrow(Kind::Session, Kind::Session))
        );
        assert_eq!(
            parse_kind("(S=>S)=>S").unwrap(),
            Kind::arrow(Kind::arrow(Kind::Session, Kind::Session), Kind::Session)
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_type("&{A: Skip, A: End}").is_err());
        assert!(parse_type("mu a . a").is_err());
        assert!(parse_type("$1").is_err());
        assert!(parse_type("Skip End garbage ;").is_err());
        let err = parse_type("&{Leaf Skip}").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn display_roundtrips_through_parser() {
        for src in [
            "\\a:T . mu b:S . &{Leaf: Skip, Node: b;?a;b}",
            "forall a:T . (a -> End) -> !{};End",
            "Dual (?{};End)",
            "<Cons: {}, Nil: {}>",
        ] {
            let t = parse_type(src).unwrap();
            let reparsed = parse_type(&t.to_string()).unwrap();
            assert_eq!(t, reparsed, "printing {src} gave {t}");
        }
    }
}
