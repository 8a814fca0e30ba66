//! Algorithmic linear typechecking.
//!
//! The declarative rules thread through a synthesis judgement: `synth`
//! consumes a context and returns the unused remainder, so context splits
//! are deterministic. Linear bindings must be used exactly once; recursion
//! binds unrestricted, and a binding whose type normalizes to a function
//! type is unrestricted as well (folds receive their step function over a
//! channel and use it once per branch, zero or two times across branches).
//! Equivalence is invoked at application and annotation joints; an
//! `Unknown` verdict is a type error, never silently accepted.

use std::collections::BTreeMap;
use std::fmt;

use crate::bisim::Verdict;
use crate::equiv::{equivalent, EquivConfig};
use crate::kind::{kind_of, KindError};
use crate::reduce::normalize;
use crate::syntax::{KContext, Kind, Polarity, Type, TypeConst, VarName, View};

use super::term::{Term, TermConst};
use super::tparser::Program;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeError {
    UnboundVariable(String),
    LinearityViolation { name: String, reason: String },
    Kind(KindError),
    EquivalenceUnknown { lhs: Type, rhs: Type, reason: String },
    LabelMismatch { expected: Vec<String>, found: Vec<String> },
    Mismatch { expected: String, found: Type },
    NotAValue { what: String },
    MissingSignature { name: String },
    InDefinition { name: String, inner: Box<TypeError> },
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeError::UnboundVariable(x) => write!(f, "unbound variable {x}"),
            TypeError::LinearityViolation { name, reason } => {
                write!(f, "linearity violation: {name} {reason}")
            }
            TypeError::Kind(e) => write!(f, "kind error: {e}"),
            TypeError::EquivalenceUnknown { lhs, rhs, reason } => write!(
                f,
                "could not decide equivalence of {lhs} and {rhs} ({reason})"
            ),
            TypeError::LabelMismatch { expected, found } => write!(
                f,
                "label mismatch: expected {{{}}}, found {{{}}}",
                expected.join(","),
                found.join(",")
            ),
            TypeError::Mismatch { expected, found } => {
                write!(f, "expected {expected}, found {found}")
            }
            TypeError::NotAValue { what } => write!(f, "{what} must be a syntactic value"),
            TypeError::MissingSignature { name } => write!(f, "{name} has no signature"),
            TypeError::InDefinition { name, inner } => write!(f, "in {name}: {inner}"),
        }
    }
}

impl std::error::Error for TypeError {}

impl From<KindError> for TypeError {
    fn from(e: KindError) -> Self {
        TypeError::Kind(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Multiplicity {
    Linear,
    Unrestricted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Entry {
    name: String,
    ty: Type,
    multi: Multiplicity,
    consumed: bool,
}

/// Typing context with linear/unrestricted tagging. Lookups hit the most
/// recent binding of a name; consuming a linear binding marks it used.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TContext {
    entries: Vec<Entry>,
}

impl TContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, ty: Type, multi: Multiplicity) {
        self.entries.push(Entry { name: name.into(), ty, multi, consumed: false });
    }

    pub fn use_var(&mut self, name: &str) -> Result<Type, TypeError> {
        for e in self.entries.iter_mut().rev() {
            if e.name == name {
                if e.multi == Multiplicity::Linear && e.consumed {
                    return Err(TypeError::LinearityViolation {
                        name: name.into(),
                        reason: "is linear and already used".into(),
                    });
                }
                e.consumed = true;
                return Ok(e.ty.clone());
            }
        }
        Err(TypeError::UnboundVariable(name.into()))
    }

    /// Remove the binding pushed last; a linear one must have been used.
    fn pop_checked(&mut self) -> Result<(), TypeError> {
        let e = self.entries.pop().expect("pop matches push");
        if e.multi == Multiplicity::Linear && !e.consumed {
            return Err(TypeError::LinearityViolation {
                name: e.name,
                reason: "is linear and never used".into(),
            });
        }
        Ok(())
    }

    /// Consumption state of the linear bindings; unrestricted ones admit
    /// weakening and contraction, so their usage never matters.
    fn usage_snapshot(&self) -> Vec<bool> {
        self.entries
            .iter()
            .map(|e| e.multi == Multiplicity::Linear && e.consumed)
            .collect()
    }

    fn restore(&mut self, snapshot: &[bool]) {
        for (e, c) in self.entries.iter_mut().zip(snapshot) {
            e.consumed = *c;
        }
    }
}

/// How session operators see the world: their type schemes.
pub fn const_scheme(c: &TermConst) -> Result<Type, TypeError> {
    let a = || VarName::user("a");
    let b = || VarName::user("b");
    Ok(match c {
        // forall a:T. forall b:S. ?a;b -> (a, b)
        TermConst::Receive => Type::forall(
            a(),
            Kind::Functional,
            Type::forall(
                b(),
                Kind::Session,
                Type::fun(
                    Type::semi(Type::msg(Polarity::In, Type::var("a")), Type::var("b")),
                    Type::pair(Type::var("a"), Type::var("b")),
                ),
            ),
        ),
        // forall a:T. a -> forall b:S. !a;b -> b
        TermConst::Send => Type::forall(
            a(),
            Kind::Functional,
            Type::fun(
                Type::var("a"),
                Type::forall(
                    b(),
                    Kind::Session,
                    Type::fun(
                        Type::semi(Type::msg(Polarity::Out, Type::var("a")), Type::var("b")),
                        Type::var("b"),
                    ),
                ),
            ),
        ),
        // the annotated internal choice, mapped to the selected branch
        TermConst::Select { label, choice } => {
            let branch = select_branch(choice, label)?;
            Type::fun(choice.clone(), branch)
        }
        TermConst::Close => Type::fun(Type::end(), Type::unit()),
        TermConst::Fork => Type::fun(Type::fun(Type::unit(), Type::unit()), Type::unit()),
        // forall a:S. (a, Dual a)
        TermConst::New => Type::forall(
            a(),
            Kind::Session,
            Type::pair(Type::var("a"), Type::dual(Type::var("a"))),
        ),
    })
}

/// The `label` branch of an internal choice, distributing a trailing `;U`.
fn select_branch(choice: &Type, label: &str) -> Result<Type, TypeError> {
    let w = whnf(choice)?;
    let (inner, tail) = match w.as_semi() {
        Some((l, r)) => (l.clone(), Some(r.clone())),
        None => (w.clone(), None),
    };
    let (head, args) = inner.spine();
    if let Type::Const(TypeConst::Choice(View::Internal, labels)) = head {
        if let Some(i) = labels.iter().position(|l| l == label) {
            if let Some(branch) = args.get(i) {
                return Ok(match tail {
                    Some(u) => Type::semi((*branch).clone(), u),
                    None => (*branch).clone(),
                });
            }
        }
        return Err(TypeError::LabelMismatch {
            expected: labels.clone(),
            found: vec![label.to_string()],
        });
    }
    Err(TypeError::Mismatch { expected: "an internal choice".into(), found: choice.clone() })
}

/// Weak head normal form with canonical binders. Renaming the input makes
/// every binder canonical, so beta steps cannot capture the user-named free
/// variables of instantiation arguments; renaming the output keeps whatever
/// the caller extracts (quantifier operators, branch types) canonical too.
fn whnf(t: &Type) -> Result<Type, TypeError> {
    let canonical = crate::rename::rename(t);
    match normalize(&canonical) {
        Ok(w) => Ok(crate::rename::rename(&w)),
        Err(crate::reduce::NormError::Divergent { witness }) => {
            Err(TypeError::Kind(KindError::NonNormalising { witness }))
        }
    }
}

/// A binding is unrestricted exactly when its type is a function type.
fn multiplicity_of(t: &Type) -> Multiplicity {
    match whnf(t) {
        Ok(w) => {
            let (head, args) = w.spine();
            if matches!(head, Type::Const(TypeConst::Arrow)) && args.len() == 2 {
                Multiplicity::Unrestricted
            } else {
                Multiplicity::Linear
            }
        }
        Err(_) => Multiplicity::Linear,
    }
}

struct Checker {
    config: EquivConfig,
}

impl Checker {
    fn require_equiv(&self, delta: &KContext, found: &Type, expected: &Type) -> Result<(), TypeError> {
        match equivalent(delta, found, expected, &self.config)? {
            Verdict::Bisimilar { .. } => Ok(()),
            Verdict::NotBisimilar { .. } => Err(TypeError::Mismatch {
                expected: expected.to_string(),
                found: found.clone(),
            }),
            Verdict::Unknown { reason } => Err(TypeError::EquivalenceUnknown {
                lhs: found.clone(),
                rhs: expected.clone(),
                reason,
            }),
        }
    }

    fn proper_kind(&self, delta: &KContext, t: &Type) -> Result<Kind, TypeError> {
        let k = kind_of(delta, &crate::rename::rename(t))?;
        if k.is_proper() {
            Ok(k)
        } else {
            Err(TypeError::Mismatch { expected: "a proper kind".into(), found: t.clone() })
        }
    }

    fn synth(
        &self,
        delta: &KContext,
        gamma: &mut TContext,
        t: &Term,
    ) -> Result<Type, TypeError> {
        match t {
            Term::Const(c) => {
                let scheme = const_scheme(c)?;
                if let TermConst::Select { choice, .. } = c {
                    let k = self.proper_kind(delta, choice)?;
                    if k != Kind::Session {
                        return Err(TypeError::Mismatch {
                            expected: "a session type".into(),
                            found: choice.clone(),
                        });
                    }
                }
                Ok(scheme)
            }
            Term::Var(x) => gamma.use_var(x),
            Term::Abs(x, ann, body) => {
                self.proper_kind(delta, ann)?;
                gamma.push(x.clone(), ann.clone(), multiplicity_of(ann));
                let b = self.synth(delta, gamma, body)?;
                gamma.pop_checked()?;
                Ok(Type::fun(ann.clone(), b))
            }
            Term::Rec(x, ann, v) => {
                if !v.is_value() {
                    return Err(TypeError::NotAValue { what: "the body of rec".into() });
                }
                self.proper_kind(delta, ann)?;
                let w = whnf(ann)?;
                let (head, args) = w.spine();
                if !(matches!(head, Type::Const(TypeConst::Arrow)) && args.len() == 2) {
                    return Err(TypeError::Mismatch {
                        expected: "a function type for rec".into(),
                        found: ann.clone(),
                    });
                }
                gamma.push(x.clone(), ann.clone(), Multiplicity::Unrestricted);
                let got = self.synth(delta, gamma, v)?;
                gamma.pop_checked()?;
                self.require_equiv(delta, &got, ann)?;
                Ok(ann.clone())
            }
            Term::TAbs(a, k, v) => {
                if !v.is_value() {
                    return Err(TypeError::NotAValue { what: "the body of a type abstraction".into() });
                }
                let delta2 = delta.updated(VarName::user(a.clone()), k.clone());
                let body = self.synth(&delta2, gamma, v)?;
                Ok(Type::forall(VarName::user(a.clone()), k.clone(), body))
            }
            Term::App(f, arg) => {
                let fun_ty = self.synth(delta, gamma, f)?;
                let w = whnf(&fun_ty)?;
                let (head, args) = w.spine();
                if !(matches!(head, Type::Const(TypeConst::Arrow)) && args.len() == 2) {
                    return Err(TypeError::Mismatch {
                        expected: "a function".into(),
                        found: fun_ty,
                    });
                }
                let (dom, cod) = (args[0].clone(), args[1].clone());
                let got = self.synth(delta, gamma, arg)?;
                self.require_equiv(delta, &got, &dom)?;
                Ok(cod)
            }
            Term::TApp(f, ty_arg) => {
                let fun_ty = self.synth(delta, gamma, f)?;
                let w = whnf(&fun_ty)?;
                let quantifier = match w.spine() {
                    (Type::Const(TypeConst::Forall(k)), args) if args.len() == 1 => {
                        Some((k.clone(), args[0].clone()))
                    }
                    _ => None,
                };
                let Some((k, operator)) = quantifier else {
                    return Err(TypeError::Mismatch {
                        expected: "a universal type".into(),
                        found: fun_ty,
                    });
                };
                let got = kind_of(delta, &crate::rename::rename(ty_arg))?;
                if got != k {
                    return Err(TypeError::Mismatch {
                        expected: format!("a type of kind {k}"),
                        found: ty_arg.clone(),
                    });
                }
                Ok(Type::app(operator, ty_arg.clone()))
            }
            Term::Record(fields) => {
                let mut typed = Vec::new();
                for (l, value) in fields {
                    let ty = self.synth(delta, gamma, value)?;
                    typed.push((l.clone(), ty));
                }
                Ok(Type::record(typed))
            }
            Term::LetRecord(binds, scrut, body) => {
                let scrut_ty = self.synth(delta, gamma, scrut)?;
                let w = whnf(&scrut_ty)?;
                let (head, args) = w.spine();
                let Type::Const(TypeConst::Record(labels)) = head else {
                    return Err(TypeError::Mismatch {
                        expected: "a record".into(),
                        found: scrut_ty,
                    });
                };
                let expected: Vec<String> = binds.iter().map(|(l, _)| l.clone()).collect();
                if *labels != expected || args.len() != labels.len() {
                    return Err(TypeError::LabelMismatch {
                        expected,
                        found: labels.clone(),
                    });
                }
                for ((_, x), field_ty) in binds.iter().zip(args.iter()) {
                    gamma.push(x.clone(), (*field_ty).clone(), multiplicity_of(field_ty));
                }
                let body_ty = self.synth(delta, gamma, body)?;
                for _ in binds {
                    gamma.pop_checked()?;
                }
                Ok(body_ty)
            }
            Term::Variant(label, payload, ann) => {
                self.proper_kind(delta, ann)?;
                let w = whnf(ann)?;
                let (head, args) = w.spine();
                let Type::Const(TypeConst::Variant(labels)) = head else {
                    return Err(TypeError::Mismatch {
                        expected: "a variant annotation".into(),
                        found: ann.clone(),
                    });
                };
                let Some(i) = labels.iter().position(|l| l == label) else {
                    return Err(TypeError::LabelMismatch {
                        expected: labels.clone(),
                        found: vec![label.clone()],
                    });
                };
                let got = self.synth(delta, gamma, payload)?;
                self.require_equiv(delta, &got, args[i])?;
                Ok(ann.clone())
            }
            Term::Case(scrut, handlers) => {
                let scrut_ty = self.synth(delta, gamma, scrut)?;
                let w = whnf(&scrut_ty)?;
                let (head, args) = w.spine();
                let Type::Const(TypeConst::Variant(labels)) = head else {
                    return Err(TypeError::Mismatch {
                        expected: "a variant".into(),
                        found: scrut_ty,
                    });
                };
                let branches: Vec<Type> = args.into_iter().cloned().collect();
                self.branches(delta, gamma, handlers, labels, &branches)
            }
            Term::Match(scrut, handlers) => {
                let scrut_ty = self.synth(delta, gamma, scrut)?;
                let w = whnf(&scrut_ty)?;
                let (inner, tail) = match w.as_semi() {
                    Some((l, r)) => (l.clone(), Some(r.clone())),
                    None => (w.clone(), None),
                };
                let (head, args) = inner.spine();
                let Type::Const(TypeConst::Choice(View::External, labels)) = head else {
                    return Err(TypeError::Mismatch {
                        expected: "an external choice".into(),
                        found: scrut_ty,
                    });
                };
                // distribute the sequential tail into the branches
                let branches: Vec<Type> = args
                    .iter()
                    .map(|b| match &tail {
                        Some(u) => Type::semi((*b).clone(), u.clone()),
                        None => (*b).clone(),
                    })
                    .collect();
                self.branches(delta, gamma, handlers, labels, &branches)
            }
        }
    }

    /// Type the handlers of a case/match: every branch sees the same
    /// context, consumes the same bindings, accepts its continuation and
    /// produces one common result type.
    fn branches(
        &self,
        delta: &KContext,
        gamma: &mut TContext,
        handlers: &[(String, Term)],
        labels: &[String],
        branch_inputs: &[Type],
    ) -> Result<Type, TypeError> {
        let found: Vec<String> = handlers.iter().map(|(l, _)| l.clone()).collect();
        if labels != found {
            return Err(TypeError::LabelMismatch { expected: labels.to_vec(), found });
        }
        let before = gamma.usage_snapshot();
        let mut result: Option<Type> = None;
        let mut first_usage: Option<Vec<bool>> = None;
        for ((label, handler), input) in handlers.iter().zip(branch_inputs.iter()) {
            gamma.restore(&before);
            let h_ty = self.synth(delta, gamma, handler)?;
            let w = whnf(&h_ty)?;
            let (head, args) = w.spine();
            if !(matches!(head, Type::Const(TypeConst::Arrow)) && args.len() == 2) {
                return Err(TypeError::Mismatch {
                    expected: format!("a function in branch {label}"),
                    found: h_ty,
                });
            }
            self.require_equiv(delta, input, args[0])?;
            match &result {
                None => result = Some(args[1].clone()),
                Some(r) => self.require_equiv(delta, args[1], r)?,
            }
            match &first_usage {
                None => first_usage = Some(gamma.usage_snapshot()),
                Some(u) => {
                    if gamma.usage_snapshot() != *u {
                        return Err(TypeError::LinearityViolation {
                            name: label.clone(),
                            reason: "branch consumes a different set of linear bindings".into(),
                        });
                    }
                }
            }
        }
        if let Some(u) = first_usage {
            gamma.restore(&u);
        }
        result.ok_or(TypeError::LabelMismatch { expected: labels.to_vec(), found: vec![] })
    }
}

/// Synthesize the type of `t` under `delta`/`gamma_in`, returning the type
/// and the leftover context.
fn checker_config() -> EquivConfig {
    // a small automaton cap: non-closing types fall through to the grammar
    // backend quickly instead of exploring thousands of states per joint
    EquivConfig { fsa_cap: 64, ..EquivConfig::default() }
}

pub fn synth(
    delta: &KContext,
    gamma_in: TContext,
    t: &Term,
) -> Result<(Type, TContext), TypeError> {
    let checker = Checker { config: checker_config() };
    let mut gamma = gamma_in;
    let ty = checker.synth(delta, &mut gamma, t)?;
    Ok((ty, gamma))
}

/// Check every definition against its signature. Axioms (signature without
/// body) are admitted as unrestricted assumptions for later bindings.
pub fn typecheck_program(prog: &Program) -> Result<BTreeMap<String, Type>, TypeError> {
    let checker = Checker { config: checker_config() };
    let delta = KContext::new();
    let mut globals = TContext::new();
    let mut out = BTreeMap::new();
    for item in &prog.items {
        let in_def = |e: TypeError| TypeError::InDefinition {
            name: item.name.clone(),
            inner: Box::new(e),
        };
        checker.proper_kind(&delta, &item.signature).map_err(in_def)?;
        if let Some(body) = &item.body {
            let mut gamma = globals.clone();
            let got = checker.synth(&delta, &mut gamma, body).map_err(in_def)?;
            checker
                .require_equiv(&delta, &got, &item.signature)
                .map_err(in_def)?;
        }
        globals.push(item.name.clone(), item.signature.clone(), Multiplicity::Unrestricted);
        out.insert(item.name.clone(), item.signature.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::tparser::{parse_program, parse_term_src};

    fn synth_closed(src: &str) -> Result<Type, TypeError> {
        let t = parse_term_src(src).unwrap();
        synth(&KContext::new(), TContext::new(), &t).map(|(ty, _)| ty)
    }

    #[test]
    fn close_consumes_endpoint() {
        let mut gamma = TContext::new();
        gamma.push("x", Type::end(), Multiplicity::Linear);
        let t = parse_term_src("close x").unwrap();
        let (ty, out) = synth(&KContext::new(), gamma, &t).unwrap();
        assert_eq!(ty, Type::unit());
        assert_eq!(out.usage_snapshot(), vec![true]);
    }

    #[test]
    fn receive_instantiates() {
        let ty = synth_closed("receive [{}] [End]").unwrap();
        let w = whnf(&ty).unwrap();
        // ?{};End -> ({}, End) after normalization
        let (head, args) = w.spine();
        assert!(matches!(head, Type::Const(TypeConst::Arrow)));
        let dom = whnf(args[0]).unwrap();
        assert!(dom.as_semi().is_some());
    }

    #[test]
    fn unused_linear_binding_rejected() {
        let e = synth_closed("fun x:!{};End -> {}").unwrap_err();
        assert!(matches!(e, TypeError::LinearityViolation { .. }), "{e}");
    }

    #[test]
    fn function_bindings_are_unrestricted() {
        // f used twice, then not at all; both fine for an arrow type
        assert!(synth_closed("fun f:({} -> {}) -> f (f {})").is_ok());
        assert!(synth_closed("fun f:({} -> {}) -> {}").is_ok());
        // a unit binding is linear
        let e = synth_closed("fun u:{} -> {}").unwrap_err();
        assert!(matches!(e, TypeError::LinearityViolation { .. }));
        assert!(synth_closed("fun u:{} -> let {} = u in {}").is_ok());
    }

    #[test]
    fn application_uses_equivalence() {
        // Skip;End accepted where End is expected
        let mut gamma = TContext::new();
        gamma.push("x", Type::semi(Type::skip(), Type::end()), Multiplicity::Linear);
        let t = parse_term_src("close x").unwrap();
        assert!(synth(&KContext::new(), gamma, &t).is_ok());
    }

    #[test]
    fn select_scheme() {
        let ty = synth_closed("select Done [+{Done: End, More: !{};End}]").unwrap();
        let (head, args) = ty.spine();
        assert!(matches!(head, Type::Const(TypeConst::Arrow)));
        assert_eq!(whnf(args[1]).unwrap(), Type::end());
    }

    #[test]
    fn branches_must_agree_on_consumption() {
        // branch A closes x, branch B leaves it unconsumed: rejected
        let src = "fun x:End -> fun c:&{A: End, B: End} -> \
                   match c with {A = fun k:End -> close k ; close x, \
                                 B = fun k:End -> close k}";
        let e = synth_closed(src).unwrap_err();
        let TypeError::LinearityViolation { reason, .. } = &e else {
            panic!("expected a linearity violation, got {e}");
        };
        assert!(reason.contains("branch"), "{e}");
        // with x consumed in both branches, the match is accepted
        let ok = "fun x:End -> fun c:&{A: End, B: End} -> \
                  match c with {A = fun k:End -> close k ; close x, \
                                B = fun k:End -> close x ; close k}";
        assert!(synth_closed(ok).is_ok());
    }

    #[test]
    fn program_with_axiom_typechecks() {
        let src = "\
ax : {} -> {}
main : {}
main = ax {}
";
        let prog = parse_program(src).unwrap();
        let types = typecheck_program(&prog).unwrap();
        assert_eq!(types.len(), 2);
    }

    #[test]
    fn match_distributes_tail() {
        // scrutinee &{..};!Bool-like tail: branch continuations extend
        let src = "fun c:(&{Done: Skip, More: ?{}});(!{};End) -> \
                   match c with {\
                     Done = fun k:Skip;(!{};End) -> close (send [{}] {} [End] k), \
                     More = fun k:(?{});(!{};End) -> \
                       let (x, k2) = receive [{}] [!{};End] k in \
                       let {} = x in close (send [{}] {} [End] k2)}";
        match synth_closed(src) {
            Ok(ty) => {
                let (head, args) = ty.spine();
                assert!(matches!(head, Type::Const(TypeConst::Arrow)));
                assert_eq!(whnf(args[1]).unwrap(), Type::unit());
            }
            Err(e) => panic!("{e}"),
        }
    }
}
