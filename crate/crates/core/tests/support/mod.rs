//! Shared helpers for the integration suites: seeded generators for kinded
//! types, related type pairs, and well-typed closed terms, plus a canonical
//! form for comparing grammars up to fresh-name bijection.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fmo_core::grammar::{NonTerm, SimpleGrammar, Word};
use fmo_core::lang::Term;
use fmo_core::syntax::{KContext, Kind, Polarity, Type, VarName, View};
use fmo_core::{kind_of, rename};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// random kinded types (recursion at proper kinds only)
// ---------------------------------------------------------------------------

pub struct TypeGen {
    pub rng: ChaCha8Rng,
    /// Allow sequential composition and context-free shapes. When false the
    /// generated types stay in the tail-recursive fragment whose LTS closes
    /// into a finite automaton.
    pub with_seq: bool,
    next_var: u32,
}

impl TypeGen {
    pub fn new(seed: u64) -> Self {
        TypeGen { rng: rng(seed), with_seq: true, next_var: 0 }
    }

    pub fn closing(seed: u64) -> Self {
        TypeGen { rng: rng(seed), with_seq: false, next_var: 0 }
    }

    fn fresh_name(&mut self) -> String {
        self.next_var += 1;
        format!("v{}", self.next_var)
    }

    fn labels(&mut self, n: usize) -> Vec<String> {
        let pool = ["A", "B", "C", "D"];
        pool.iter().take(n).map(|s| s.to_string()).collect()
    }

    /// A closed session type.
    pub fn session(&mut self, depth: usize) -> Type {
        let mut scope = Vec::new();
        let t = self.session_in(depth, &mut scope);
        debug_assert!(kind_of(&KContext::new(), &rename(&t)).is_ok(), "{t}");
        t
    }

    /// A closed proper type (session or functional).
    pub fn proper(&mut self, depth: usize) -> Type {
        if self.rng.gen_bool(0.6) {
            self.session(depth)
        } else {
            let mut scope = Vec::new();
            let t = self.functional_in(depth, &mut scope);
            debug_assert!(kind_of(&KContext::new(), &rename(&t)).is_ok(), "{t}");
            t
        }
    }

    fn proper_in(&mut self, depth: usize, scope: &mut Vec<(String, Kind)>) -> Type {
        if self.rng.gen_bool(0.5) {
            self.session_in(depth, scope)
        } else {
            self.functional_in(depth, scope)
        }
    }

    fn session_var(&mut self, scope: &[(String, Kind)]) -> Option<Type> {
        let vars: Vec<&String> = scope
            .iter()
            .filter(|(_, k)| *k == Kind::Session)
            .map(|(n, _)| n)
            .collect();
        vars.choose(&mut self.rng).map(|n| Type::var((*n).clone()))
    }

    fn session_in(&mut self, depth: usize, scope: &mut Vec<(String, Kind)>) -> Type {
        if depth == 0 {
            return match self.rng.gen_range(0..3) {
                0 => Type::skip(),
                1 => Type::end(),
                _ => Type::msg(self.polarity(), Type::unit()),
            };
        }
        let with_seq = self.with_seq;
        let choice = self.rng.gen_range(0..100);
        match choice {
            0..=9 => Type::skip(),
            10..=19 => Type::end(),
            20..=34 => {
                let payload = self.proper_in(depth - 1, scope);
                let msg = Type::msg(self.polarity(), payload);
                if with_seq {
                    Type::semi(msg, self.session_in(depth - 1, scope))
                } else {
                    // the embedded binary-message form: payload then rest
                    Type::semi(msg, self.session_in(depth - 1, scope))
                }
            }
            35..=49 => {
                let n = self.rng.gen_range(1..=3);
                let labels = self.labels(n);
                let fields = labels
                    .into_iter()
                    .map(|l| (l, self.session_in(depth - 1, scope)))
                    .collect();
                Type::choice(self.view(), fields)
            }
            50..=64 if with_seq => {
                let lhs = self.session_in(depth - 1, scope);
                let rhs = self.session_in(depth - 1, scope);
                Type::semi(lhs, rhs)
            }
            65..=79 => self.mu_session(depth, scope),
            80..=89 => {
                if let Some(v) = self.session_var(scope) {
                    v
                } else {
                    self.mu_session(depth, scope)
                }
            }
            _ => {
                let inner = self.session_in(depth - 1, scope);
                Type::dual(inner)
            }
        }
    }

    /// A recursive session type with a constructor-headed body, so that
    /// unfolding reaches a weak head normal form immediately.
    fn mu_session(&mut self, depth: usize, scope: &mut Vec<(String, Kind)>) -> Type {
        let name = self.fresh_name();
        scope.push((name.clone(), Kind::Session));
        let body = match self.rng.gen_range(0..3) {
            0 => {
                let n = self.rng.gen_range(1..=3);
                let labels = self.labels(n);
                let fields = labels
                    .into_iter()
                    .map(|l| (l, self.session_in(depth - 1, scope)))
                    .collect();
                Type::choice(self.view(), fields)
            }
            1 => {
                let payload = self.proper_in(depth.saturating_sub(2), scope);
                Type::semi(
                    Type::msg(self.polarity(), payload),
                    self.session_in(depth - 1, scope),
                )
            }
            _ => {
                let n = self.rng.gen_range(1..=2);
                let labels = self.labels(n);
                let fields: Vec<(String, Type)> = labels
                    .into_iter()
                    .map(|l| (l, self.session_in(depth - 1, scope)))
                    .collect();
                if self.with_seq {
                    Type::semi(
                        Type::choice(self.view(), fields),
                        self.session_in(depth.saturating_sub(2), scope),
                    )
                } else {
                    Type::choice(self.view(), fields)
                }
            }
        };
        scope.pop();
        Type::mu(VarName::user(name), Kind::Session, body)
    }

    fn functional_in(&mut self, depth: usize, scope: &mut Vec<(String, Kind)>) -> Type {
        if depth == 0 {
            return Type::unit();
        }
        match self.rng.gen_range(0..100) {
            0..=19 => Type::unit(),
            20..=39 => {
                let n = self.rng.gen_range(0..=2);
                let labels = self.labels(n);
                let fields = labels
                    .into_iter()
                    .map(|l| (l, self.proper_in(depth - 1, scope)))
                    .collect();
                Type::record(fields)
            }
            40..=54 => {
                let n = self.rng.gen_range(1..=2);
                let labels = self.labels(n);
                let fields = labels
                    .into_iter()
                    .map(|l| (l, self.proper_in(depth - 1, scope)))
                    .collect();
                Type::variant(fields)
            }
            55..=74 => Type::fun(
                self.proper_in(depth - 1, scope),
                self.proper_in(depth - 1, scope),
            ),
            75..=89 => {
                let name = self.fresh_name();
                let kind = if self.rng.gen_bool(0.5) { Kind::Session } else { Kind::Functional };
                scope.push((name.clone(), kind.clone()));
                let body = self.proper_in(depth - 1, scope);
                scope.pop();
                Type::forall(VarName::user(name), kind, body)
            }
            _ => {
                // functional recursion with a constructor-headed body
                let name = self.fresh_name();
                scope.push((name.clone(), Kind::Functional));
                let body = match self.rng.gen_range(0..2) {
                    0 => {
                        let n = self.rng.gen_range(1..=2);
                        let labels = self.labels(n);
                        Type::record(
                            labels
                                .into_iter()
                                .map(|l| (l, self.proper_in(depth - 1, scope)))
                                .collect(),
                        )
                    }
                    _ => Type::fun(
                        self.proper_in(depth - 1, scope),
                        self.proper_in(depth - 1, scope),
                    ),
                };
                scope.pop();
                Type::mu(VarName::user(name), Kind::Functional, body)
            }
        }
    }

    fn polarity(&mut self) -> Polarity {
        if self.rng.gen_bool(0.5) {
            Polarity::In
        } else {
            Polarity::Out
        }
    }

    fn view(&mut self) -> View {
        if self.rng.gen_bool(0.5) {
            View::External
        } else {
            View::Internal
        }
    }

    /// An equivalence-preserving transformation of `t` (session kinds).
    pub fn equivalent_variant(&mut self, t: &Type) -> Type {
        match self.rng.gen_range(0..5) {
            0 => Type::semi(Type::skip(), t.clone()),
            1 => Type::semi(t.clone(), Type::skip()),
            2 => Type::dual(Type::dual(t.clone())),
            3 => unfold_first_mu(t).unwrap_or_else(|| Type::semi(Type::skip(), t.clone())),
            _ => rotate_first_semi(t).unwrap_or_else(|| Type::semi(t.clone(), Type::skip())),
        }
    }
}

/// Unfold the outermost recursion application, if any.
pub fn unfold_first_mu(t: &Type) -> Option<Type> {
    use fmo_core::syntax::TypeConst;
    if let Type::App(f, a) = t {
        if matches!(&**f, Type::Const(TypeConst::Mu(_))) {
            return Some(Type::app((**a).clone(), t.clone()));
        }
        if let Some(f2) = unfold_first_mu(f) {
            return Some(Type::app(f2, (**a).clone()));
        }
        if let Some(a2) = unfold_first_mu(a) {
            return Some(Type::app((**f).clone(), a2));
        }
        return None;
    }
    match t {
        Type::Abs(v, k, body) => {
            unfold_first_mu(body).map(|b| Type::abs(v.clone(), k.clone(), b))
        }
        _ => None,
    }
}

/// Reassociate the first `(T;U);V` found, if any.
pub fn rotate_first_semi(t: &Type) -> Option<Type> {
    if let Some((lhs, rhs)) = t.as_semi() {
        if let Some((a, b)) = lhs.as_semi() {
            return Some(Type::semi(a.clone(), Type::semi(b.clone(), rhs.clone())));
        }
        if let Some(l2) = rotate_first_semi(lhs) {
            return Some(Type::semi(l2, rhs.clone()));
        }
        if let Some(r2) = rotate_first_semi(rhs) {
            return Some(Type::semi(lhs.clone(), r2));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// grammar canonicalization (fresh-name bijection)
// ---------------------------------------------------------------------------

/// Canonical form of the reachable part of a grammar: breadth-first
/// renumbering from the start word, productions listed per canonical index
/// in label order. Two grammars are isomorphic (up to fresh-name bijection)
/// iff their canonical forms are equal.
pub fn canonical_grammar(
    g: &SimpleGrammar,
    start: &Word,
) -> (Vec<usize>, Vec<Vec<(String, Vec<usize>)>>) {
    let mut order: BTreeMap<NonTerm, usize> = BTreeMap::new();
    let mut queue: Vec<NonTerm> = Vec::new();
    let number = |x: NonTerm, order: &mut BTreeMap<NonTerm, usize>, queue: &mut Vec<NonTerm>| {
        if let Some(i) = order.get(&x) {
            return *i;
        }
        let i = order.len();
        order.insert(x, i);
        queue.push(x);
        i
    };
    let start_ids: Vec<usize> = start.iter().map(|x| number(*x, &mut order, &mut queue)).collect();
    let mut rows: Vec<Vec<(String, Vec<usize>)>> = Vec::new();
    let mut next = 0usize;
    while next < queue.len() {
        let x = queue[next];
        next += 1;
        let mut row = Vec::new();
        if let Some(prods) = g.productions_of(x) {
            for (label, rhs) in prods {
                let rhs_ids = rhs.iter().map(|y| number(*y, &mut order, &mut queue)).collect();
                row.push((label.to_string(), rhs_ids));
            }
        }
        rows.push(row);
    }
    (start_ids, rows)
}

// ---------------------------------------------------------------------------
// random well-typed closed terms (pure functional fragment)
// ---------------------------------------------------------------------------

pub struct TermGen {
    pub rng: ChaCha8Rng,
}

impl TermGen {
    pub fn new(seed: u64) -> Self {
        TermGen { rng: rng(seed) }
    }

    /// A functional type inhabited by `value_of`.
    pub fn target_type(&mut self, depth: usize) -> Type {
        if depth == 0 {
            return Type::unit();
        }
        match self.rng.gen_range(0..4) {
            0 => Type::unit(),
            1 => {
                let n = self.rng.gen_range(1..=2);
                let labels = ["P", "Q"];
                Type::record(
                    labels
                        .iter()
                        .take(n)
                        .map(|l| (l.to_string(), self.target_type(depth - 1)))
                        .collect(),
                )
            }
            2 => {
                let n = self.rng.gen_range(1..=2);
                let labels = ["L", "R"];
                Type::variant(
                    labels
                        .iter()
                        .take(n)
                        .map(|l| (l.to_string(), self.target_type(depth - 1)))
                        .collect(),
                )
            }
            _ => Type::fun(Type::unit(), self.target_type(depth - 1)),
        }
    }

    /// A canonical closed value of a generated target type.
    pub fn value_of(&mut self, ty: &Type) -> Term {
        use fmo_core::syntax::TypeConst;
        let (head, args) = ty.spine();
        match head {
            Type::Const(TypeConst::Record(labels)) => Term::Record(
                labels
                    .iter()
                    .zip(args)
                    .map(|(l, a)| (l.clone(), self.value_of(a)))
                    .collect(),
            ),
            Type::Const(TypeConst::Variant(labels)) => {
                let i = self.rng.gen_range(0..labels.len());
                Term::Variant(
                    labels[i].clone(),
                    Box::new(self.value_of(args[i])),
                    ty.clone(),
                )
            }
            Type::Const(TypeConst::Arrow) => {
                // domain is always unit in generated types
                let body = self.value_of(args[1]);
                Term::abs(
                    "u",
                    args[0].clone(),
                    Term::LetRecord(vec![], Box::new(Term::var("u")), Box::new(body)),
                )
            }
            _ => Term::unit(),
        }
    }

    /// A closed well-typed term of type `ty` containing redexes.
    pub fn term_of(&mut self, ty: &Type, depth: usize) -> Term {
        if depth == 0 {
            return self.value_of(ty);
        }
        match self.rng.gen_range(0..6) {
            // (fun x:{} -> let {} = x in M) {}
            0 => {
                let inner = self.term_of(ty, depth - 1);
                Term::app(
                    Term::abs(
                        "x",
                        Type::unit(),
                        Term::LetRecord(vec![], Box::new(Term::var("x")), Box::new(inner)),
                    ),
                    Term::unit(),
                )
            }
            // let {F = y} = {F = M} in y
            1 => {
                let inner = self.term_of(ty, depth - 1);
                Term::LetRecord(
                    vec![("F".into(), "y".into())],
                    Box::new(Term::Record(vec![("F".into(), inner)])),
                    Box::new(Term::var("y")),
                )
            }
            // case (tag W M as <W: ty>) of {W = fun v:ty -> v}
            2 => {
                let inner = self.term_of(ty, depth - 1);
                let variant_ty = Type::variant(vec![("W".into(), ty.clone())]);
                Term::Case(
                    Box::new(Term::Variant("W".into(), Box::new(inner), variant_ty)),
                    vec![(
                        "W".into(),
                        Term::abs("v", ty.clone(), Term::var("v")),
                    )],
                )
            }
            // (Fun a:T -> value) [{}], ignoring the type argument
            3 => {
                let value = self.value_of(ty);
                Term::tapp(
                    Term::TAbs("a".into(), Kind::Functional, Box::new(value)),
                    Type::unit(),
                )
            }
            // an application of a generated function value
            4 => {
                let fun_ty = Type::fun(Type::unit(), ty.clone());
                let f = self.term_of(&fun_ty, depth - 1);
                Term::app(f, Term::unit())
            }
            // a recursive value applied once (the body ignores the binder)
            _ => {
                let fun_ty = Type::fun(Type::unit(), ty.clone());
                let body = self.value_of(&fun_ty);
                let rec = Term::Rec("loop".into(), fun_ty, Box::new(body));
                Term::app(rec, Term::unit())
            }
        }
    }
}
