//! Type reduction, weak head normal forms and normalization.
//!
//! `step` applies one reduction with a fixed deterministic strategy: axioms
//! at the head first (`Skip;T`, associativity, recursion unfolding, beta,
//! the `Dual` push rules), otherwise recursion into the left of `;`, the
//! function position of an application, or under `Dual`. Confluence makes
//! the strategy semantically irrelevant; determinism makes traces stable.
//!
//! `normalize` reduces to weak head normal form, detecting divergence by
//! tagging recursion redexes: a mu-redex that fires twice (up to renaming)
//! can never be eliminated afterwards, so the type has no normal form.

use std::collections::BTreeSet;
use std::fmt;

use crate::rename::{rename, substitute};
use crate::syntax::{Type, TypeConst};

/// Hard cap on reduction steps inside one normalization. Unreachable for
/// pre-kinded types with recursion at proper kinds; guards exploratory runs
/// on arbitrary-kind recursion.
const STEP_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormError {
    /// The tagged mu-redex fired twice: the type does not normalize.
    Divergent { witness: Type },
}

impl fmt::Display for NormError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormError::Divergent { witness } => {
                write!(f, "type does not normalise (looping on {witness})")
            }
        }
    }
}

impl std::error::Error for NormError {}

/// One deterministic reduction step, also reporting the mu-redex when the
/// fired rule was recursion unfolding. `allow_mu = false` gives the
/// beta/dual/seq fragment used by `normalize_bd`.
fn step_inner(t: &Type, allow_mu: bool) -> Option<(Type, Option<Type>)> {
    // T;U
    if let Some((lhs, rhs)) = t.as_semi() {
        if matches!(lhs, Type::Const(TypeConst::Skip)) {
            return Some((rhs.clone(), None)); // Skip;T -> T
        }
        if let Some((a, b)) = lhs.as_semi() {
            // (T;U);V -> T;(U;V)
            return Some((
                Type::semi(a.clone(), Type::semi(b.clone(), rhs.clone())),
                None,
            ));
        }
        // reduce the left component
        let (lhs2, mu) = step_inner(lhs, allow_mu)?;
        return Some((Type::semi(lhs2, rhs.clone()), mu));
    }
    // Dual T
    if let Some(arg) = t.as_dual() {
        if let Some((a, b)) = arg.as_semi() {
            return Some((
                Type::semi(Type::dual(a.clone()), Type::dual(b.clone())),
                None,
            ));
        }
        match arg {
            Type::Const(TypeConst::Skip) => return Some((Type::skip(), None)),
            Type::Const(TypeConst::End) => return Some((Type::end(), None)),
            _ => {}
        }
        if let Some((pol, payload)) = arg.as_msg() {
            return Some((Type::msg(pol.flip(), payload.clone()), None));
        }
        {
            let (head, args) = arg.spine();
            if let Type::Const(TypeConst::Choice(view, labels)) = head {
                if labels.len() == args.len() {
                    let dualled = args.iter().map(|a| Type::dual((*a).clone())).collect();
                    return Some((
                        Type::from_spine(
                            Type::Const(TypeConst::Choice(view.flip(), labels.clone())),
                            dualled,
                        ),
                        None,
                    ));
                }
            }
        }
        if let Some(inner) = arg.as_dual() {
            // duality is an involution; cancelling any double dual keeps
            // recursive types finite-state (unfolding a mu under a dual
            // would otherwise stack an unbounded tower of duals)
            return Some((inner.clone(), None));
        }
        let (arg2, mu) = step_inner(arg, allow_mu)?;
        return Some((Type::dual(arg2), mu));
    }
    if let Type::App(fun, arg) = t {
        match &**fun {
            Type::Const(TypeConst::Mu(_)) => {
                if allow_mu {
                    // mu_k T -> T (mu_k T)
                    return Some((Type::app((**arg).clone(), t.clone()), Some(t.clone())));
                }
                return None;
            }
            Type::Abs(v, _, body) => {
                // beta, re-renaming the result
                return Some((rename(&substitute(body, arg, v)), None));
            }
            _ => {
                let (fun2, mu) = step_inner(fun, allow_mu)?;
                return Some((Type::app(fun2, (**arg).clone()), mu));
            }
        }
    }
    None
}

/// One deterministic reduction step, or `None` when `t` is irreducible.
pub fn step(t: &Type) -> Option<Type> {
    step_inner(t, true).map(|(u, _)| u)
}

/// Rule-based characterisation of weak head normal forms. Agrees with
/// `step(t) == None` on kinded types.
pub fn is_whnf(t: &Type) -> bool {
    match t {
        Type::Const(_) | Type::Var(_) | Type::Abs(..) => true,
        Type::App(..) => {
            let (head, args) = t.spine();
            match head {
                Type::Var(_) => true,
                Type::Abs(..) => false,
                Type::Const(TypeConst::Mu(_)) => false,
                Type::Const(TypeConst::Semi) => {
                    if args.len() == 1 {
                        return true; // (; T)
                    }
                    let first = args[0];
                    is_whnf(first)
                        && !matches!(first, Type::Const(TypeConst::Skip))
                        && first.as_semi().is_none()
                }
                Type::Const(TypeConst::Dual) => {
                    let first = args[0];
                    if !is_whnf(first) {
                        return false;
                    }
                    // exclude every shape a Dual rule fires on
                    let excluded = matches!(
                        first,
                        Type::Const(TypeConst::Skip) | Type::Const(TypeConst::End)
                    ) || first.as_msg().is_some()
                        || first.as_semi().is_some()
                        || is_choice_spine(first)
                        || first.as_dual().is_some();
                    !excluded
                }
                Type::Const(_) => true,
                Type::App(..) => unreachable!("spine head is never an application"),
            }
        }
    }
}

fn is_choice_spine(t: &Type) -> bool {
    let (head, args) = t.spine();
    matches!(head, Type::Const(TypeConst::Choice(_, labels)) if labels.len() == args.len())
}

/// Reduce to weak head normal form, or report divergence. The witness of a
/// `Divergent` error is the mu-redex that repeated.
pub fn normalize(t: &Type) -> Result<Type, NormError> {
    let mut cur = t.clone();
    let mut tags: BTreeSet<Type> = BTreeSet::new();
    let mut last_mu = None;
    for _ in 0..STEP_CAP {
        match step_inner(&cur, true) {
            None => return Ok(cur),
            Some((next, fired_mu)) => {
                if let Some(redex) = fired_mu {
                    let key = rename(&redex);
                    if !tags.insert(key) {
                        return Err(NormError::Divergent { witness: redex });
                    }
                    last_mu = Some(redex);
                }
                cur = next;
            }
        }
    }
    Err(NormError::Divergent {
        witness: last_mu.unwrap_or(cur),
    })
}

/// Normalize without ever unfolding recursion: the beta/dual/seq fragment.
/// Always terminates on pre-kinded input.
pub fn normalize_bd(t: &Type) -> Type {
    let mut cur = t.clone();
    for _ in 0..STEP_CAP {
        match step_inner(&cur, false) {
            None => return cur,
            Some((next, _)) => cur = next,
        }
    }
    cur
}

/// Contract beta redexes everywhere, including under binders, keeping the
/// result renamed. In a renamed type the head of every application avoids
/// the free variables of its argument, so each contraction is capture-free;
/// re-renaming restores the invariant for the next round.
pub fn beta_reduce_deep(t: &Type) -> Type {
    fn contract_one(t: &Type) -> Option<Type> {
        if let Type::App(f, a) = t {
            if let Type::Abs(v, _, body) = &**f {
                return Some(rename(&substitute(body, a, v)));
            }
        }
        match t {
            Type::Const(_) | Type::Var(_) => None,
            Type::Abs(v, k, body) => {
                contract_one(body).map(|b| Type::abs(v.clone(), k.clone(), b))
            }
            Type::App(f, a) => match contract_one(f) {
                Some(f2) => Some(Type::app(f2, (**a).clone())),
                None => contract_one(a).map(|a2| Type::app((**f).clone(), a2)),
            },
        }
    }
    let mut cur = rename(t);
    for _ in 0..STEP_CAP {
        match contract_one(&cur) {
            Some(next) => cur = rename(&next),
            None => return cur,
        }
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_type;
    use crate::syntax::{Kind, Polarity, VarName};

    fn ty(src: &str) -> Type {
        rename(&parse_type(src).unwrap())
    }

    #[test]
    fn seq_axioms_step() {
        assert_eq!(step(&ty("Skip;End")), Some(Type::end()));
        let assoc = ty("(a;b);c");
        assert_eq!(step(&assoc), Some(ty("a;(b;c)")));
    }

    #[test]
    fn dual_axioms_step() {
        assert_eq!(
            step(&ty("Dual (?a)")),
            Some(Type::msg(Polarity::Out, Type::var("a")))
        );
        assert_eq!(step(&ty("Dual Skip")), Some(Type::skip()));
        assert_eq!(step(&ty("Dual End")), Some(Type::end()));
        assert_eq!(
            step(&ty("Dual (&{A: Skip, B: End})")),
            Some(ty("+{A: Dual Skip, B: Dual End}"))
        );
        assert_eq!(step(&ty("Dual (Dual (a b))")), Some(ty("a b")));
        // Dual (Dual a) with a variable head reduces via the same rule.
        assert_eq!(step(&ty("Dual (Dual a)")), Some(Type::var("a")));
    }

    #[test]
    fn mu_unfolds() {
        let t = ty("mu a:S . !{};a");
        let (head, args) = t.spine();
        assert!(matches!(head, Type::Const(TypeConst::Mu(_))));
        let unfolded = step(&t).unwrap();
        assert_eq!(unfolded, Type::app(args[0].clone(), t.clone()));
    }

    #[test]
    fn whnf_rules() {
        assert!(is_whnf(&ty("\\a:T . a")));
        assert!(is_whnf(&ty("Skip")));
        assert!(is_whnf(&ty("End;a"))); // W-Seq2 with End head
        assert!(!is_whnf(&ty("Skip;End")));
        assert!(!is_whnf(&ty("(a;b);c")));
        assert!(is_whnf(&ty("Dual a")));
        assert!(is_whnf(&ty("Dual (a b)")));
        assert!(!is_whnf(&ty("Dual (Dual (a b))")));
        // the inner pair reduces first, so the triple is not whnf either
        assert!(!is_whnf(&ty("Dual (Dual (Dual (a b)))")));
        assert_eq!(step(&ty("Dual (Dual (Dual (a b)))")), Some(ty("Dual (a b)")));
        // +{...};Dual(mu ...) from the worked normalization example
        let t = ty("+{Done: End, More: !a} ; Dual (mu b:S . +{Done: End, More: !a};Dual b)");
        assert!(is_whnf(&t));
    }

    #[test]
    fn normalize_stream_example() {
        // mu_S (\b:S. +{Done: End, More: !a};Dual b) normalizes to
        // +{Done: End, More: !a};Dual (mu ...)
        let t = ty("mu b:S . (+{Done: End, More: !a});Dual b");
        let n = normalize(&t).unwrap();
        let expected = Type::semi(
            ty("+{Done: End, More: !a}"),
            Type::dual(t.clone()),
        );
        assert_eq!(n, expected);
    }

    #[test]
    fn normalize_detects_divergence() {
        for src in [
            "mu a:T . a",
            "mu a:S . Skip;a",
            "mu a:S . Dual a",
        ] {
            let t = ty(src);
            match normalize(&t) {
                Err(NormError::Divergent { .. }) => {}
                other => panic!("{src} should diverge, got {other:?}"),
            }
        }
        assert_eq!(normalize(&ty("End")), Ok(Type::end()));
    }

    #[test]
    fn normalize_bd_blocks_mu() {
        let id_mu = ty("mu a:S . a");
        assert_eq!(normalize_bd(&id_mu), id_mu);
        assert_eq!(
            normalize_bd(&Type::app(
                Type::abs(VarName::user("a"), Kind::Session, Type::var("a")),
                Type::end()
            )),
            Type::end()
        );
        assert_eq!(normalize_bd(&ty("Skip;End")), Type::end());
    }

    #[test]
    fn beta_renames_result() {
        // (\$1:T. \$2:T. $1 -> $2) {} steps to \$1:T. {} -> $1
        let f = Type::abs(
            VarName::canonical(1),
            Kind::Functional,
            Type::abs(
                VarName::canonical(2),
                Kind::Functional,
                Type::fun(Type::cvar(1), Type::cvar(2)),
            ),
        );
        let t = Type::app(f, Type::unit());
        let stepped = step(&t).unwrap();
        assert_eq!(
            stepped,
            Type::abs(
                VarName::canonical(1),
                Kind::Functional,
                Type::fun(Type::unit(), Type::cvar(1)),
            )
        );
    }
}
