//! Pre-kinding and decidable kinding.
//!
//! Pre-kinding is a single linear pass that checks every application against
//! the operator's kind, with no normalization requirement. Full kinding adds
//! two checks on top: recursion must be at a proper kind, and every
//! application subterm must normalize. Constants whose kind mentions the
//! proper-kind metavariable (arrow, records, variants, quantifier, message)
//! accept either `S` or `T` in those positions, resolved per argument.

use std::fmt;

use crate::reduce::{normalize, NormError};
use crate::syntax::{KContext, Kind, Type, TypeConst};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KindError {
    /// No pre-kinding rule applies (unbound variable, arity or kind clash).
    NotPreKinded { at: Type },
    /// An application subterm has no weak head normal form.
    NonNormalising { witness: Type },
    /// Recursion annotated with an arrow kind.
    HigherKindRecursion { at: Type },
}

impl fmt::Display for KindError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KindError::NotPreKinded { at } => write!(f, "not pre-kinded at {at}"),
            KindError::NonNormalising { witness } => {
                write!(f, "non-normalising subterm {witness}")
            }
            KindError::HigherKindRecursion { at } => {
                write!(f, "recursion at an arrow kind in {at}")
            }
        }
    }
}

impl std::error::Error for KindError {}

/// What a constant expects in one argument position.
enum ParamSpec {
    Exact(Kind),
    /// Any proper kind.
    Proper,
    /// An operator from the given kind to any proper kind (quantifier body).
    ArrowToProper(Kind),
}

/// The kind signature of a constant: argument specs plus result kind. For a
/// constant with no metavariable positions this denotes an ordinary kind.
fn const_signature(c: &TypeConst) -> (Vec<ParamSpec>, Kind) {
    use Kind::*;
    use ParamSpec::*;
    match c {
        TypeConst::Arrow => (vec![Proper, Proper], Functional),
        TypeConst::Record(ls) | TypeConst::Variant(ls) => {
            (ls.iter().map(|_| Proper).collect(), Functional)
        }
        TypeConst::Forall(k) => (vec![ArrowToProper(k.clone())], Functional),
        TypeConst::Mu(k) => (
            vec![Exact(Kind::arrow(k.clone(), k.clone()))],
            k.clone(),
        ),
        TypeConst::Skip | TypeConst::End => (vec![], Session),
        TypeConst::Msg(_) => (vec![Proper], Session),
        TypeConst::Semi => (vec![Exact(Session), Exact(Session)], Session),
        TypeConst::Choice(_, ls) => (ls.iter().map(|_| Exact(Session)).collect(), Session),
        TypeConst::Dual => (vec![Exact(Session)], Session),
    }
}

/// Infer the pre-kind of `t`, or `None` when no rule applies.
pub fn pre_kind(ctx: &KContext, t: &Type) -> Option<Kind> {
    match t {
        Type::Var(v) => ctx.lookup(v).cloned(),
        Type::Abs(v, k, body) => {
            let body_kind = pre_kind(&ctx.updated(v.clone(), k.clone()), body)?;
            Some(Kind::arrow(k.clone(), body_kind))
        }
        Type::Const(_) | Type::App(..) => {
            let (head, args) = t.spine();
            match head {
                Type::Const(c) => {
                    let (params, result) = const_signature(c);
                    let declared = args.len().min(params.len());
                    for (arg, spec) in args.iter().zip(params.iter()) {
                        let got = pre_kind(ctx, arg)?;
                        let ok = match spec {
                            ParamSpec::Exact(k) => got == *k,
                            ParamSpec::Proper => got.is_proper(),
                            ParamSpec::ArrowToProper(dom) => match &got {
                                Kind::Arrow(d, c) => **d == *dom && c.is_proper(),
                                _ => false,
                            },
                        };
                        if !ok {
                            return None;
                        }
                    }
                    // Remaining parameters fold back into an arrow kind; a
                    // leftover metavariable position has no concrete kind.
                    let mut k = result;
                    for spec in params[declared..].iter().rev() {
                        let dom = match spec {
                            ParamSpec::Exact(k) => k.clone(),
                            ParamSpec::Proper | ParamSpec::ArrowToProper(_) => return None,
                        };
                        k = Kind::arrow(dom, k);
                    }
                    // arguments beyond the constant's own arity consume the
                    // result kind (an arrow-kinded recursion, for example)
                    for arg in args.iter().skip(declared) {
                        let got = pre_kind(ctx, arg)?;
                        match k {
                            Kind::Arrow(dom, cod) if *dom == got => k = *cod,
                            _ => return None,
                        }
                    }
                    Some(k)
                }
                _ => {
                    // variable- or abstraction-headed application
                    let mut k = pre_kind(ctx, head)?;
                    for arg in args {
                        let got = pre_kind(ctx, arg)?;
                        match k {
                            Kind::Arrow(dom, cod) if *dom == got => k = *cod,
                            _ => return None,
                        }
                    }
                    Some(k)
                }
            }
        }
    }
}

/// Decidable kinding: pre-kinding plus the recursion restriction and the
/// normalization proviso on every application subterm.
pub fn kind_of(ctx: &KContext, t: &Type) -> Result<Kind, KindError> {
    let Some(kind) = pre_kind(ctx, t) else {
        return Err(KindError::NotPreKinded { at: t.clone() });
    };
    check_mu_proper(t)?;
    check_normalising(t)?;
    Ok(kind)
}

fn check_mu_proper(t: &Type) -> Result<(), KindError> {
    match t {
        Type::Const(TypeConst::Mu(k)) if !k.is_proper() => {
            Err(KindError::HigherKindRecursion { at: t.clone() })
        }
        Type::Const(_) | Type::Var(_) => Ok(()),
        Type::Abs(_, _, body) => check_mu_proper(body),
        Type::App(f, a) => {
            check_mu_proper(f)?;
            check_mu_proper(a)
        }
    }
}

fn check_normalising(t: &Type) -> Result<(), KindError> {
    match t {
        Type::Const(_) | Type::Var(_) => Ok(()),
        Type::Abs(_, _, body) => check_normalising(body),
        Type::App(f, a) => {
            check_normalising(f)?;
            check_normalising(a)?;
            match normalize(t) {
                Ok(_) => Ok(()),
                Err(NormError::Divergent { witness }) => {
                    Err(KindError::NonNormalising { witness })
                }
            }
        }
    }
}
