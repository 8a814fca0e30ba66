//! Deterministic first-order grammars and their encoding into types.
//!
//! A first-order grammar rewrites closed applicative expressions over arity
//! nonterminals; determinism means at most one production per (nonterminal,
//! terminal). Each arity-m nonterminal becomes an m-ary type operator
//! returning a record whose labels are the terminals of its productions; a
//! production-less nonterminal becomes the empty record. The equation
//! system closes into mu-types by eliminating nonterminals in reverse
//! topological order, introducing recursion only on cycles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::parser::ParseError;
use crate::syntax::{Kind, Type, VarName};

/// Expressions over nonterminals and the formal variables of a production.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum FogExpr {
    Var(String),
    Apply(String, Vec<FogExpr>),
}

impl FogExpr {
    pub fn apply(head: impl Into<String>, args: Vec<FogExpr>) -> Self {
        FogExpr::Apply(head.into(), args)
    }

    pub fn is_closed(&self) -> bool {
        match self {
            FogExpr::Var(_) => false,
            FogExpr::Apply(_, args) => args.iter().all(|a| a.is_closed()),
        }
    }

    fn subst(&self, env: &BTreeMap<String, FogExpr>) -> FogExpr {
        match self {
            FogExpr::Var(v) => env.get(v).cloned().unwrap_or_else(|| self.clone()),
            FogExpr::Apply(h, args) => {
                FogExpr::Apply(h.clone(), args.iter().map(|a| a.subst(env)).collect())
            }
        }
    }
}

impl fmt::Display for FogExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FogExpr::Var(v) => write!(f, "{v}"),
            FogExpr::Apply(h, args) => {
                write!(f, "{h}")?;
                for a in args {
                    match a {
                        FogExpr::Apply(_, inner) if !inner.is_empty() => write!(f, " ({a})")?,
                        _ => write!(f, " {a}")?,
                    }
                }
                Ok(())
            }
        }
    }
}

/// A deterministic first-order grammar. Production bodies use the formals
/// `x1..xm` of their head nonterminal.
#[derive(Debug, Clone, Default)]
pub struct Fog {
    pub arity: BTreeMap<String, usize>,
    pub productions: BTreeMap<(String, String), FogExpr>,
    pub initial: Option<FogExpr>,
}

impl Fog {
    /// Terminals with a production for `head`, sorted.
    pub fn terminals_of(&self, head: &str) -> Vec<&str> {
        self.productions
            .range((head.to_string(), String::new())..)
            .take_while(|((h, _), _)| h == head)
            .map(|((_, t), _)| t.as_str())
            .collect()
    }

    /// One rewriting step: `X E1..Em -a-> E[E1/x1,..,Em/xm]`.
    pub fn fog_step(&self, e: &FogExpr, terminal: &str) -> Option<FogExpr> {
        let FogExpr::Apply(head, args) = e else {
            return None;
        };
        let body = self.productions.get(&(head.clone(), terminal.to_string()))?;
        let env: BTreeMap<String, FogExpr> = args
            .iter()
            .enumerate()
            .map(|(i, a)| (format!("x{}", i + 1), a.clone()))
            .collect();
        Some(body.subst(&env))
    }

    /// All terminal traces of length at most `depth` from `e`.
    pub fn traces(&self, e: &FogExpr, depth: usize) -> BTreeSet<Vec<String>> {
        let mut out = BTreeSet::new();
        out.insert(Vec::new());
        let mut frontier = vec![(e.clone(), Vec::new())];
        for _ in 0..depth {
            let mut next = Vec::new();
            for (expr, trace) in frontier {
                let FogExpr::Apply(head, _) = &expr else { continue };
                for t in self.terminals_of(head) {
                    if let Some(succ) = self.fog_step(&expr, t) {
                        let mut trace = trace.clone();
                        trace.push(t.to_string());
                        out.insert(trace.clone());
                        next.push((succ, trace));
                    }
                }
            }
            frontier = next;
        }
        out
    }

    /// Nonterminals mentioned in the production bodies of `head`.
    fn calls(&self, head: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for ((h, _), body) in &self.productions {
            if h == head {
                collect_heads(body, &mut out);
            }
        }
        out
    }
}

fn collect_heads(e: &FogExpr, out: &mut BTreeSet<String>) {
    if let FogExpr::Apply(h, args) = e {
        out.insert(h.clone());
        for a in args {
            collect_heads(a, out);
        }
    }
}

/// The encoding of a grammar: closed types for each nonterminal plus the
/// encoded initial expression.
#[derive(Debug, Clone)]
pub struct FogEncoding {
    pub nonterminals: BTreeMap<String, Type>,
    pub initial: Option<Type>,
}

impl FogEncoding {
    pub fn encode_expr(&self, e: &FogExpr) -> Type {
        match e {
            FogExpr::Var(v) => Type::var(v.clone()),
            FogExpr::Apply(h, args) => {
                let head = self.nonterminals.get(h).cloned().unwrap_or_else(|| Type::var(h.clone()));
                args.iter().fold(head, |t, a| Type::app(t, self.encode_expr(a)))
            }
        }
    }
}

/// Kind of an arity-m nonterminal: `T => ... => T` with m arrows.
fn operator_kind(arity: usize) -> Kind {
    let mut k = Kind::Functional;
    for _ in 0..arity {
        k = Kind::arrow(Kind::Functional, k);
    }
    k
}

/// Encode every nonterminal of a deterministic grammar as a closed type.
pub fn encode_fog(g: &Fog) -> FogEncoding {
    // open body of each nonterminal: record over its terminals, with other
    // nonterminals still free type variables named after them
    let mut open: BTreeMap<String, Type> = BTreeMap::new();
    for name in g.arity.keys() {
        open.insert(name.clone(), open_body(g, name));
    }

    // reverse topological elimination over strongly connected components
    let names: Vec<String> = g.arity.keys().cloned().collect();
    let sccs = tarjan_sccs(&names, |n| {
        g.calls(n).into_iter().filter(|m| g.arity.contains_key(m)).collect()
    });

    let mut solved: BTreeMap<String, Type> = BTreeMap::new();
    for scc in sccs {
        // substitute everything already solved
        let mut bodies: BTreeMap<String, Type> = scc
            .iter()
            .map(|n| {
                let mut b = open[n].clone();
                for (m, t) in &solved {
                    b = crate::rename::substitute(&b, t, &VarName::User(m.clone()));
                }
                (n.clone(), b)
            })
            .collect();
        let cyclic = scc.len() > 1
            || g.calls(&scc[0]).contains(&scc[0]);
        if !cyclic {
            let n = &scc[0];
            solved.insert(n.clone(), bodies.remove(n).expect("body"));
            continue;
        }
        // Bekic elimination within the component: close the last
        // nonterminal over itself, substitute into the previous one, and so
        // on; then back-substitute.
        let order: Vec<String> = scc.to_vec();
        let mut closed_rev: Vec<(String, Type)> = Vec::new();
        for i in (0..order.len()).rev() {
            let name = &order[i];
            let mut body = bodies[name].clone();
            for (m, t) in &closed_rev {
                body = crate::rename::substitute(&body, t, &VarName::User(m.clone()));
            }
            let k = operator_kind(g.arity[name]);
            let closed = Type::mu(VarName::User(name.clone()), k, body);
            closed_rev.push((name.clone(), closed));
        }
        // closed_rev now holds each component member with all later members
        // eliminated; the first element is fully closed over the component
        let mut finished: BTreeMap<String, Type> = BTreeMap::new();
        for (name, t) in closed_rev.iter().rev() {
            let mut t = t.clone();
            for (m, u) in &finished {
                t = crate::rename::substitute(&t, u, &VarName::User(m.clone()));
            }
            finished.insert(name.clone(), t);
        }
        solved.extend(finished);
    }

    // contract the applications introduced by inlining solved operators,
    // so an arity-1 helper applied to a formal reads as its record directly
    for t in solved.values_mut() {
        *t = crate::reduce::beta_reduce_deep(t);
    }

    let encoding = FogEncoding { nonterminals: solved, initial: None };
    let initial = g.initial.as_ref().map(|e| encoding.encode_expr(e));
    FogEncoding { initial, ..encoding }
}

fn open_body(g: &Fog, name: &str) -> Type {
    let arity = g.arity[name];
    let fields: Vec<(String, Type)> = g
        .terminals_of(name)
        .into_iter()
        .map(|t| {
            let body = &g.productions[&(name.to_string(), t.to_string())];
            (t.to_string(), fog_expr_to_type(body))
        })
        .collect();
    let mut t = Type::record(fields);
    for i in (1..=arity).rev() {
        t = Type::abs(VarName::User(format!("x{i}")), Kind::Functional, t);
    }
    t
}

fn fog_expr_to_type(e: &FogExpr) -> Type {
    match e {
        FogExpr::Var(v) => Type::var(v.clone()),
        FogExpr::Apply(h, args) => args
            .iter()
            .fold(Type::var(h.clone()), |t, a| Type::app(t, fog_expr_to_type(a))),
    }
}

fn tarjan_sccs(names: &[String], deps: impl Fn(&str) -> Vec<String>) -> Vec<Vec<String>> {
    struct State<'a> {
        index: BTreeMap<&'a str, usize>,
        low: BTreeMap<&'a str, usize>,
        on_stack: BTreeSet<&'a str>,
        stack: Vec<&'a str>,
        counter: usize,
        out: Vec<Vec<String>>,
    }
    fn visit<'a>(
        v: &'a str,
        names: &'a [String],
        deps: &impl Fn(&str) -> Vec<String>,
        st: &mut State<'a>,
    ) {
        st.index.insert(v, st.counter);
        st.low.insert(v, st.counter);
        st.counter += 1;
        st.stack.push(v);
        st.on_stack.insert(v);
        for w in deps(v) {
            let Some(w) = names.iter().find(|n| **n == w) else { continue };
            if !st.index.contains_key(w.as_str()) {
                visit(w, names, deps, st);
                let lw = st.low[w.as_str()];
                let lv = st.low[v];
                st.low.insert(v, lv.min(lw));
            } else if st.on_stack.contains(w.as_str()) {
                let iw = st.index[w.as_str()];
                let lv = st.low[v];
                st.low.insert(v, lv.min(iw));
            }
        }
        if st.low[v] == st.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = st.stack.pop() {
                st.on_stack.remove(w);
                comp.push(w.to_string());
                if w == v {
                    break;
                }
            }
            comp.reverse();
            st.out.push(comp);
        }
    }
    let mut st = State {
        index: BTreeMap::new(),
        low: BTreeMap::new(),
        on_stack: BTreeSet::new(),
        stack: Vec::new(),
        counter: 0,
        out: Vec::new(),
    };
    for n in names {
        if !st.index.contains_key(n.as_str()) {
            visit(n, names, &deps, &mut st);
        }
    }
    // Tarjan emits components in reverse topological order already
    st.out
}

/// Parse the textual grammar format:
///
/// ```text
/// arity X 2
/// X l -> X (R x1) (R x2)
/// X a -> x1
/// R r -> x1
/// start X A B
/// ```
///
/// Formals are `x1..xm`; any name declared with `arity` is a nonterminal.
pub fn parse_fog(src: &str) -> Result<Fog, ParseError> {
    let mut g = Fog::default();
    let err = |line: usize, msg: String| ParseError { line, col: 1, message: msg };
    for (lineno, raw) in src.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split("--").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        if words[0] == "arity" {
            if words.len() != 3 {
                return Err(err(lineno, "expected 'arity NAME N'".into()));
            }
            let n: usize = words[2]
                .parse()
                .map_err(|_| err(lineno, format!("bad arity {}", words[2])))?;
            g.arity.insert(words[1].to_string(), n);
            continue;
        }
        if words[0] == "start" {
            let rest = line.strip_prefix("start").unwrap().trim();
            let (expr, leftover) = parse_fog_expr(rest, &g, lineno)?;
            if !leftover.trim().is_empty() {
                return Err(err(lineno, "trailing input after start expression".into()));
            }
            g.initial = Some(expr);
            continue;
        }
        // production: NAME terminal -> expr
        let Some(pos) = line.find("->") else {
            return Err(err(lineno, "expected production 'X a -> expr'".into()));
        };
        let (lhs, rhs) = line.split_at(pos);
        let rhs = &rhs[2..];
        let lhs_words: Vec<&str> = lhs.split_whitespace().collect();
        if lhs_words.len() != 2 {
            return Err(err(lineno, "production head must be 'NAME terminal'".into()));
        }
        let head = lhs_words[0].to_string();
        if !g.arity.contains_key(&head) {
            return Err(err(lineno, format!("undeclared nonterminal {head}")));
        }
        let terminal = lhs_words[1].to_string();
        let key = (head.clone(), terminal.clone());
        if g.productions.contains_key(&key) {
            return Err(err(
                lineno,
                format!("duplicate production {head} {terminal}: grammar must be deterministic"),
            ));
        }
        let (expr, leftover) = parse_fog_expr(rhs.trim(), &g, lineno)?;
        if !leftover.trim().is_empty() {
            return Err(err(lineno, "trailing input after production body".into()));
        }
        check_formals(&expr, g.arity[&head], lineno)?;
        g.productions.insert(key, expr);
    }
    Ok(g)
}

fn check_formals(e: &FogExpr, arity: usize, lineno: usize) -> Result<(), ParseError> {
    match e {
        FogExpr::Var(v) => {
            let ok = v
                .strip_prefix('x')
                .and_then(|d| d.parse::<usize>().ok())
                .is_some_and(|i| i >= 1 && i <= arity);
            if ok {
                Ok(())
            } else {
                Err(ParseError {
                    line: lineno,
                    col: 1,
                    message: format!("variable {v} is not a formal of this production"),
                })
            }
        }
        FogExpr::Apply(_, args) => args.iter().try_for_each(|a| check_formals(a, arity, lineno)),
    }
}

/// Parse one applicative expression; returns the unconsumed tail.
fn parse_fog_expr<'a>(
    src: &'a str,
    g: &Fog,
    lineno: usize,
) -> Result<(FogExpr, &'a str), ParseError> {
    let err = |msg: String| ParseError { line: lineno, col: 1, message: msg };
    let src = src.trim_start();
    let (head, mut rest) = take_name(src).ok_or_else(|| err("expected a name".into()))?;
    if !g.arity.contains_key(head) {
        // a formal variable
        return Ok((FogExpr::Var(head.to_string()), rest));
    }
    let mut args = Vec::new();
    loop {
        let trimmed = rest.trim_start();
        if let Some(stripped) = trimmed.strip_prefix('(') {
            let (arg, leftover) = parse_fog_expr(stripped, g, lineno)?;
            let leftover = leftover.trim_start();
            let Some(leftover) = leftover.strip_prefix(')') else {
                return Err(err("expected ')'".into()));
            };
            args.push(arg);
            rest = leftover;
            continue;
        }
        if let Some((name, leftover)) = take_name(trimmed) {
            let e = if g.arity.contains_key(name) {
                FogExpr::Apply(name.to_string(), Vec::new())
            } else {
                FogExpr::Var(name.to_string())
            };
            args.push(e);
            rest = leftover;
            continue;
        }
        break;
    }
    Ok((FogExpr::Apply(head.to_string(), args), rest))
}

fn take_name(src: &str) -> Option<(&str, &str)> {
    let end = src
        .char_indices()
        .find(|(_, c)| !c.is_ascii_alphanumeric() && *c != '_')
        .map(|(i, _)| i)
        .unwrap_or(src.len());
    if end == 0 {
        None
    } else {
        Some((&src[..end], &src[end..]))
    }
}

/// The running example: `L3 = { l^n a r^n a } u { l^n b r^n b }`.
pub fn l3_grammar() -> Fog {
    parse_fog(
        "arity X 2\narity R 1\narity A 0\narity B 0\narity Bot 0\n\
         X l -> X (R x1) (R x2)\nX a -> x1\nX b -> x2\nR r -> x1\n\
         A a -> Bot\nB b -> Bot\nstart X A B\n",
    )
    .expect("fixed grammar parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::transitions;

    #[test]
    fn l3_steps() {
        let g = l3_grammar();
        let start = g.initial.clone().unwrap();
        // X A B -l-> X (R A) (R B)
        let stepped = g.fog_step(&start, "l").unwrap();
        assert_eq!(stepped.to_string(), "X (R A) (R B)");
        // X A B -a-> A
        assert_eq!(g.fog_step(&start, "a").unwrap().to_string(), "A");
        // Bot has no productions
        assert_eq!(g.fog_step(&FogExpr::apply("Bot", vec![]), "a"), None);
    }

    #[test]
    fn l3_traces_are_the_language() {
        let g = l3_grammar();
        let start = g.initial.clone().unwrap();
        let traces = g.traces(&start, 6);
        // complete words of length <= 6: aa, bb, larla... encoded as vectors
        assert!(traces.contains(&vec!["a".into(), "a".into()]));
        assert!(traces.contains(&vec!["l".into(), "a".into(), "r".into(), "a".into()]));
        assert!(traces.contains(&vec!["l".into(), "b".into(), "r".into(), "b".into()]));
        assert!(!traces.contains(&vec!["a".into(), "b".into()]));
        // every trace is a prefix of some word of L3
        for t in &traces {
            let word: Vec<&str> = t.iter().map(|s| s.as_str()).collect();
            assert!(is_l3_prefix(&word), "{word:?}");
        }
    }

    fn is_l3_prefix(w: &[&str]) -> bool {
        for n in 0..=w.len() {
            for x in ["a", "b"] {
                let full: Vec<&str> = std::iter::repeat("l")
                    .take(n)
                    .chain(std::iter::once(x))
                    .chain(std::iter::repeat("r").take(n))
                    .chain(std::iter::once(x))
                    .collect();
                if full.len() >= w.len() && full[..w.len()] == *w {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn bottom_encodes_to_empty_record() {
        let g = l3_grammar();
        let enc = encode_fog(&g);
        assert_eq!(enc.nonterminals["Bot"], Type::unit());
        assert_eq!(
            enc.nonterminals["A"],
            Type::record(vec![("a".into(), Type::unit())])
        );
    }

    #[test]
    fn l3_matches_paper_display() {
        let g = l3_grammar();
        let enc = encode_fog(&g);
        // X = mu xi:T=>T=>T. \a:T.\b:T.{l: xi {r:a} {r:b}, a: a, b: b}
        let x = &enc.nonterminals["X"];
        let expected = crate::parser::parse_type(
            "mu X:T=>T=>T . \\x1:T . \\x2:T . {a: x1, b: x2, l: X {r: x1} {r: x2}}",
        )
        .unwrap();
        assert_eq!(
            crate::rename::rename(x),
            crate::rename::rename(&expected)
        );
        // the encoded start expression has the three root transitions
        let start = enc.initial.clone().unwrap();
        let trans = transitions(&start).unwrap();
        assert_eq!(trans.len(), 3);
    }

    #[test]
    fn mutual_recursion_closes() {
        let g = parse_fog(
            "arity P 0\narity Q 0\nP a -> Q\nQ b -> P\nstart P\n",
        )
        .unwrap();
        let enc = encode_fog(&g);
        let p = &enc.nonterminals["P"];
        // unfolds forever alternating a and b
        let t1 = transitions(p).unwrap();
        assert_eq!(t1.len(), 1);
        let (_, q) = t1.into_iter().next().unwrap();
        let t2 = transitions(&q).unwrap();
        assert_eq!(t2.len(), 1);
    }
}
