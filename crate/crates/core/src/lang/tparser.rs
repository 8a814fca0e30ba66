//! Surface syntax for programs.
//!
//! A program is newline-separated top-level items; continuation lines are
//! indented. Items:
//!
//! ```text
//! type Name (a:K)* : K = TYPE      -- alias, may reference itself applied
//!                                  -- to exactly its own parameters
//! name : TYPE                      -- signature
//! name = TERM                      -- definition (axioms omit the body)
//! ```
//!
//! Terms: `fun x:T -> t`, `Fun a:K -> v`, `rec x:T . v`, application
//! `t u` and `t [T]`, records `{l = t, ...}`, `let {l = x, ...} = t in u`,
//! `tag l t as T`, `case t of {l = t, ...}`, `match t with {l = t, ...}`,
//! the constants `receive send close fork new` and `select l [T]`. Pairs
//! `(t, u)` and `let (x, y) = t in u` abbreviate the Fst/Snd record, and
//! `t ; u` abbreviates `(fun z:{} -> let {} = z in u) t`. A `fun` binder
//! annotation with a function type needs parentheses.

use std::collections::BTreeMap;

use crate::parser::{is_type_keyword, lex, parse_kind_at, parse_semi_level, parse_type_at, Cursor, ParseError, Tok};
use crate::rename::substitute;
use crate::syntax::{Kind, Type, VarName};

use super::term::{Term, TermConst};

#[derive(Debug, Clone)]
pub struct TopLevel {
    pub name: String,
    pub signature: Type,
    /// `None` for axiom bindings: assumed, never executed.
    pub body: Option<Term>,
}

#[derive(Debug, Clone, Default)]
pub struct Program {
    pub items: Vec<TopLevel>,
}

impl Program {
    pub fn lookup(&self, name: &str) -> Option<&TopLevel> {
        self.items.iter().find(|i| i.name == name)
    }
}

const TERM_KEYWORDS: &[&str] = &[
    "fun", "Fun", "rec", "let", "in", "tag", "as", "case", "of", "match", "with", "select",
    "receive", "send", "close", "fork", "new", "type",
];

fn is_term_keyword(s: &str) -> bool {
    TERM_KEYWORDS.contains(&s)
}

/// Parse a whole program: type aliases are expanded away, signatures and
/// definitions are paired by name.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut aliases: BTreeMap<String, Type> = BTreeMap::new();
    let mut signatures: Vec<(String, Type)> = Vec::new();
    let mut bodies: BTreeMap<String, Term> = BTreeMap::new();

    for (start_line, chunk) in split_items(src) {
        let toks = lex(&chunk).map_err(|e| offset_err(e, start_line))?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor::new(toks);
        let item = parse_item(&mut cur, &aliases).map_err(|e| offset_err(e, start_line))?;
        if !cur.at_end() {
            return Err(offset_err(cur.err("trailing input after item"), start_line));
        }
        match item {
            Item::Alias(name, ty) => {
                if aliases.contains_key(&name) {
                    return Err(offset_err(
                        cur.err(format!("duplicate type alias {name}")),
                        start_line,
                    ));
                }
                aliases.insert(name, ty);
            }
            Item::Signature(name, ty) => {
                if signatures.iter().any(|(n, _)| *n == name) {
                    return Err(offset_err(
                        cur.err(format!("duplicate signature for {name}")),
                        start_line,
                    ));
                }
                signatures.push((name, ty));
            }
            Item::Definition(name, body) => {
                if !signatures.iter().any(|(n, _)| *n == name) {
                    return Err(offset_err(
                        cur.err(format!("definition of {name} has no signature")),
                        start_line,
                    ));
                }
                if bodies.contains_key(&name) {
                    return Err(offset_err(
                        cur.err(format!("duplicate definition of {name}")),
                        start_line,
                    ));
                }
                bodies.insert(name, body);
            }
        }
    }

    let items = signatures
        .into_iter()
        .map(|(name, signature)| TopLevel { body: bodies.remove(&name), name, signature })
        .collect();
    Ok(Program { items })
}

fn offset_err(mut e: ParseError, start_line: usize) -> ParseError {
    e.line += start_line - 1;
    e
}

/// Split source into top-level item chunks. An item starts on an unindented
/// line that looks like `type ...`, `name : ...` or `name = ...`.
fn split_items(src: &str) -> Vec<(usize, String)> {
    let mut chunks: Vec<(usize, String)> = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let starts_item = !line.starts_with([' ', '\t'])
            && (line.starts_with("type ")
                || line
                    .split_once([':', '='])
                    .is_some_and(|(head, _)| {
                        let head = head.trim();
                        !head.is_empty()
                            && head.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                            && head.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                    }));
        match chunks.last_mut() {
            Some((_, chunk)) if !starts_item => {
                chunk.push('\n');
                chunk.push_str(line);
            }
            _ => chunks.push((i + 1, line.to_string())),
        }
    }
    chunks
}

enum Item {
    Alias(String, Type),
    Signature(String, Type),
    Definition(String, Term),
}

fn parse_item(cur: &mut Cursor, aliases: &BTreeMap<String, Type>) -> Result<Item, ParseError> {
    let name = cur.expect_ident("item name")?;
    if name == "type" {
        return parse_alias(cur, aliases);
    }
    if is_term_keyword(&name) || is_type_keyword(&name) {
        return Err(cur.err(format!("'{name}' is reserved")));
    }
    match cur.peek() {
        Some(Tok::Colon) => {
            cur.next();
            let ty = parse_type_expanding(cur, aliases, true)?;
            Ok(Item::Signature(name, ty))
        }
        Some(Tok::Equals) => {
            cur.next();
            let body = parse_term(cur, aliases)?;
            Ok(Item::Definition(name, body))
        }
        _ => Err(cur.err("expected ':' or '=' after item name")),
    }
}

fn parse_alias(cur: &mut Cursor, aliases: &BTreeMap<String, Type>) -> Result<Item, ParseError> {
    let name = cur.expect_ident("alias name")?;
    let mut params: Vec<(String, Kind)> = Vec::new();
    while cur.peek() == Some(&Tok::LParen) {
        cur.next();
        let p = cur.expect_ident("parameter name")?;
        cur.expect(Tok::Colon, "':' after parameter")?;
        let k = parse_kind_at(cur)?;
        cur.expect(Tok::RParen, "')'")?;
        params.push((p, k));
    }
    cur.expect(Tok::Colon, "':' before the alias result kind")?;
    let result_kind = parse_kind_at(cur)?;
    cur.expect(Tok::Equals, "'='")?;
    let body = parse_type_expanding(cur, aliases, true)?;

    // close self-references: Name p1..pk applied to exactly its formals
    // becomes the recursion variable
    let formals: Vec<Type> = params.iter().map(|(p, _)| Type::var(p.clone())).collect();
    let (body, recursive) = close_self(&body, &name, &formals)
        .map_err(|m| cur.err(m))?;
    let mut ty = body;
    if recursive {
        ty = Type::mu(VarName::user(name.clone()), result_kind.clone(), ty);
    }
    for (p, k) in params.iter().rev() {
        ty = Type::abs(VarName::user(p.clone()), k.clone(), ty);
    }
    // aliases must be closed and well kinded at their declared kind
    let expected = params
        .iter()
        .rev()
        .fold(result_kind, |acc, (_, k)| Kind::arrow(k.clone(), acc));
    match crate::kind::kind_of(&crate::syntax::KContext::new(), &ty) {
        Ok(k) if k == expected => {}
        Ok(k) => {
            return Err(cur.err(format!("alias {name} has kind {k}, declared {expected}")))
        }
        Err(e) => return Err(cur.err(format!("alias {name}: {e}"))),
    }
    Ok(Item::Alias(name, ty))
}

/// Rewrite exact self-applications to the recursion variable; any other
/// occurrence of the alias name is an error.
fn close_self(t: &Type, name: &str, formals: &[Type]) -> Result<(Type, bool), String> {
    let self_var = Type::var(name.to_string());
    let (head, args) = t.spine();
    if *head == self_var {
        let ok = args.len() == formals.len()
            && args.iter().zip(formals).all(|(a, f)| *a == f);
        if ok {
            return Ok((self_var, true));
        }
        return Err(format!(
            "recursive alias {name} must be applied to exactly its own parameters"
        ));
    }
    match t {
        Type::Const(_) | Type::Var(_) => Ok((t.clone(), false)),
        Type::Abs(v, k, body) => {
            if *v == VarName::user(name) {
                return Ok((t.clone(), false)); // shadowed
            }
            let (body, rec) = close_self(body, name, formals)?;
            Ok((Type::abs(v.clone(), k.clone(), body), rec))
        }
        Type::App(f, a) => {
            let (f, r1) = close_self(f, name, formals)?;
            let (a, r2) = close_self(a, name, formals)?;
            Ok((Type::app(f, a), r1 || r2))
        }
    }
}

fn expand_aliases(t: &Type, aliases: &BTreeMap<String, Type>) -> Type {
    let mut t = t.clone();
    // alias bodies are closed, so substitution cannot capture
    for (name, ty) in aliases {
        t = substitute(&t, ty, &VarName::User(name.clone()));
    }
    t
}

/// Parse a type and expand aliases. `full` selects full precedence
/// (including `->`); binder annotations use the tighter level so that the
/// `->` of the enclosing `fun` stays unambiguous.
fn parse_type_expanding(
    cur: &mut Cursor,
    aliases: &BTreeMap<String, Type>,
    full: bool,
) -> Result<Type, ParseError> {
    let t = if full { parse_type_at(cur)? } else { parse_semi_level(cur)? };
    Ok(expand_aliases(&t, aliases))
}

// ---------------------------------------------------------------------------
// terms
// ---------------------------------------------------------------------------

/// Parse a term from source (used by tests and tooling).
pub fn parse_term_src(src: &str) -> Result<Term, ParseError> {
    let mut cur = Cursor::new(lex(src)?);
    let t = parse_term(&mut cur, &BTreeMap::new())?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after term"));
    }
    Ok(t)
}

/// Full term level: sequencing `t ; u` (right-associative, desugared).
fn parse_term(cur: &mut Cursor, aliases: &BTreeMap<String, Type>) -> Result<Term, ParseError> {
    let lhs = parse_term_prefix(cur, aliases)?;
    if cur.peek() == Some(&Tok::Semi) {
        cur.next();
        let rhs = parse_term(cur, aliases)?;
        // e1 ; e2  ==  (fun z:{} -> let {} = z in e2) e1, with an
        // unwritable binder name so user variables cannot collide
        let thunk = Term::Abs(
            "$seq".into(),
            Type::unit(),
            Box::new(Term::LetRecord(vec![], Box::new(Term::var("$seq")), Box::new(rhs))),
        );
        return Ok(Term::app(thunk, lhs));
    }
    Ok(lhs)
}

/// Binder and statement forms; falls through to application.
fn parse_term_prefix(
    cur: &mut Cursor,
    aliases: &BTreeMap<String, Type>,
) -> Result<Term, ParseError> {
    match cur.peek() {
        Some(Tok::Ident(s)) => match s.as_str() {
            "fun" => {
                cur.next();
                let x = binder_name(cur)?;
                cur.expect(Tok::Colon, "':' after binder")?;
                let ty = parse_type_expanding(cur, aliases, false)?;
                cur.expect(Tok::Arrow, "'->'")?;
                let body = parse_term(cur, aliases)?;
                Ok(Term::Abs(x, ty, Box::new(body)))
            }
            "Fun" => {
                cur.next();
                let a = binder_name(cur)?;
                cur.expect(Tok::Colon, "':' after binder")?;
                let k = parse_kind_at(cur)?;
                cur.expect(Tok::Arrow, "'->'")?;
                let body = parse_term(cur, aliases)?;
                Ok(Term::TAbs(a, k, Box::new(body)))
            }
            "rec" => {
                cur.next();
                let x = binder_name(cur)?;
                cur.expect(Tok::Colon, "':' after binder")?;
                let ty = parse_type_expanding(cur, aliases, true)?;
                cur.expect(Tok::Dot, "'.' after rec annotation")?;
                let body = parse_term(cur, aliases)?;
                Ok(Term::Rec(x, ty, Box::new(body)))
            }
            "let" => {
                cur.next();
                let binds = parse_let_pattern(cur)?;
                cur.expect(Tok::Equals, "'='")?;
                let scrut = parse_term(cur, aliases)?;
                match cur.peek() {
                    Some(Tok::Ident(s)) if s == "in" => {
                        cur.next();
                    }
                    _ => return Err(cur.err("expected 'in'")),
                }
                let body = parse_term(cur, aliases)?;
                Ok(Term::LetRecord(binds, Box::new(scrut), Box::new(body)))
            }
            "tag" => {
                cur.next();
                let label = cur.expect_ident("variant label")?;
                let payload = parse_app_term(cur, aliases)?;
                match cur.peek() {
                    Some(Tok::Ident(s)) if s == "as" => {
                        cur.next();
                    }
                    _ => return Err(cur.err("expected 'as'")),
                }
                let ty = parse_type_expanding(cur, aliases, true)?;
                Ok(Term::Variant(label, Box::new(payload), ty))
            }
            "case" => {
                cur.next();
                let scrut = parse_app_term(cur, aliases)?;
                match cur.peek() {
                    Some(Tok::Ident(s)) if s == "of" => {
                        cur.next();
                    }
                    _ => return Err(cur.err("expected 'of'")),
                }
                let handlers = parse_handlers(cur, aliases)?;
                Ok(Term::Case(Box::new(scrut), handlers))
            }
            "match" => {
                cur.next();
                let scrut = parse_app_term(cur, aliases)?;
                match cur.peek() {
                    Some(Tok::Ident(s)) if s == "with" => {
                        cur.next();
                    }
                    _ => return Err(cur.err("expected 'with'")),
                }
                let handlers = parse_handlers(cur, aliases)?;
                Ok(Term::Match(Box::new(scrut), handlers))
            }
            _ => parse_app_term(cur, aliases),
        },
        _ => parse_app_term(cur, aliases),
    }
}

fn binder_name(cur: &mut Cursor) -> Result<String, ParseError> {
    let x = cur.expect_ident("binder name")?;
    if is_term_keyword(&x) || is_type_keyword(&x) {
        return Err(cur.err(format!("'{x}' is reserved")));
    }
    Ok(x)
}

fn parse_let_pattern(cur: &mut Cursor) -> Result<Vec<(String, String)>, ParseError> {
    match cur.peek() {
        Some(Tok::LBrace) => {
            cur.next();
            let mut binds = Vec::new();
            if cur.peek() == Some(&Tok::RBrace) {
                cur.next();
                return Ok(binds);
            }
            loop {
                let label = cur.expect_ident("field label")?;
                cur.expect(Tok::Equals, "'='")?;
                let x = binder_name(cur)?;
                if binds.iter().any(|(l, _)| *l == label) {
                    return Err(cur.err(format!("duplicate label {label}")));
                }
                binds.push((label, x));
                match cur.peek() {
                    Some(Tok::Comma) => {
                        cur.next();
                    }
                    Some(Tok::RBrace) => {
                        cur.next();
                        break;
                    }
                    _ => return Err(cur.err("expected ',' or '}'")),
                }
            }
            binds.sort_by(|a, b| a.0.cmp(&b.0));
            Ok(binds)
        }
        Some(Tok::LParen) => {
            // let (x, y) = ... : the Fst/Snd record pattern
            cur.next();
            let x = binder_name(cur)?;
            cur.expect(Tok::Comma, "','")?;
            let y = binder_name(cur)?;
            cur.expect(Tok::RParen, "')'")?;
            Ok(vec![("Fst".into(), x), ("Snd".into(), y)])
        }
        _ => Err(cur.err("expected '{' or '(' pattern")),
    }
}

fn parse_handlers(
    cur: &mut Cursor,
    aliases: &BTreeMap<String, Type>,
) -> Result<Vec<(String, Term)>, ParseError> {
    cur.expect(Tok::LBrace, "'{'")?;
    let mut handlers: Vec<(String, Term)> = Vec::new();
    loop {
        let label = cur.expect_ident("handler label")?;
        cur.expect(Tok::Equals, "'='")?;
        let body = parse_term(cur, aliases)?;
        if handlers.iter().any(|(l, _)| *l == label) {
            return Err(cur.err(format!("duplicate handler {label}")));
        }
        handlers.push((label, body));
        match cur.peek() {
            Some(Tok::Comma) => {
                cur.next();
            }
            Some(Tok::RBrace) => {
                cur.next();
                break;
            }
            _ => return Err(cur.err("expected ',' or '}'")),
        }
    }
    handlers.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(handlers)
}

/// Application level: atoms and `[T]` type applications, left-associative.
fn parse_app_term(
    cur: &mut Cursor,
    aliases: &BTreeMap<String, Type>,
) -> Result<Term, ParseError> {
    let mut t = parse_term_atom(cur, aliases)?;
    loop {
        match cur.peek() {
            Some(Tok::LBracket) => {
                cur.next();
                let ty = parse_type_expanding(cur, aliases, true)?;
                cur.expect(Tok::RBracket, "']'")?;
                t = Term::tapp(t, ty);
            }
            Some(tok) if starts_term_atom(tok) => {
                let arg = parse_term_atom(cur, aliases)?;
                t = Term::app(t, arg);
            }
            _ => return Ok(t),
        }
    }
}

fn starts_term_atom(tok: &Tok) -> bool {
    match tok {
        Tok::Ident(s) => !is_term_keyword(s) || matches!(
            s.as_str(),
            "receive" | "send" | "close" | "fork" | "new" | "select"
        ),
        Tok::LBrace | Tok::LParen => true,
        _ => false,
    }
}

fn parse_term_atom(
    cur: &mut Cursor,
    aliases: &BTreeMap<String, Type>,
) -> Result<Term, ParseError> {
    match cur.peek().cloned() {
        Some(Tok::Ident(s)) => match s.as_str() {
            "receive" => consumed(cur, Term::Const(TermConst::Receive)),
            "send" => consumed(cur, Term::Const(TermConst::Send)),
            "close" => consumed(cur, Term::Const(TermConst::Close)),
            "fork" => consumed(cur, Term::Const(TermConst::Fork)),
            "new" => consumed(cur, Term::Const(TermConst::New)),
            "select" => {
                cur.next();
                let label = cur.expect_ident("choice label")?;
                cur.expect(Tok::LBracket, "'[' with the choice type")?;
                let choice = parse_type_expanding(cur, aliases, true)?;
                cur.expect(Tok::RBracket, "']'")?;
                Ok(Term::Const(TermConst::Select { label, choice }))
            }
            _ if is_term_keyword(&s) => Err(cur.err(format!("unexpected keyword '{s}'"))),
            _ => consumed(cur, Term::var(s)),
        },
        Some(Tok::LBrace) => {
            cur.next();
            let mut fields: Vec<(String, Term)> = Vec::new();
            if cur.peek() == Some(&Tok::RBrace) {
                cur.next();
                return Ok(Term::Record(fields));
            }
            loop {
                let label = cur.expect_ident("field label")?;
                cur.expect(Tok::Equals, "'='")?;
                let value = parse_term(cur, aliases)?;
                if fields.iter().any(|(l, _)| *l == label) {
                    return Err(cur.err(format!("duplicate field {label}")));
                }
                fields.push((label, value));
                match cur.peek() {
                    Some(Tok::Comma) => {
                        cur.next();
                    }
                    Some(Tok::RBrace) => {
                        cur.next();
                        break;
                    }
                    _ => return Err(cur.err("expected ',' or '}'")),
                }
            }
            fields.sort_by(|a, b| a.0.cmp(&b.0));
            Ok(Term::Record(fields))
        }
        Some(Tok::LParen) => {
            cur.next();
            let first = parse_term(cur, aliases)?;
            match cur.peek() {
                Some(Tok::Comma) => {
                    cur.next();
                    let second = parse_term(cur, aliases)?;
                    cur.expect(Tok::RParen, "')'")?;
                    Ok(Term::Record(vec![("Fst".into(), first), ("Snd".into(), second)]))
                }
                Some(Tok::RParen) => {
                    cur.next();
                    Ok(first)
                }
                _ => Err(cur.err("expected ')' or ','")),
            }
        }
        _ => Err(cur.err("expected a term")),
    }
}

fn consumed(cur: &mut Cursor, t: Term) -> Result<Term, ParseError> {
    cur.next();
    Ok(t)
}
