//! Minimal renaming and substitution.
//!
//! Renaming replaces every bound variable with the least canonical name not
//! free in the subterm (and not excluded by the surrounding context), so
//! alpha-equivalent types become syntactically equal and only finitely many
//! variable names ever appear along reductions. The head of an application
//! is renamed avoiding the free variables of its argument, which is what
//! lets substitution run without on-the-fly renaming.

use std::collections::BTreeSet;

use crate::syntax::{Type, VarName};

/// The set of free variables of `t`.
pub fn free_vars(t: &Type) -> BTreeSet<VarName> {
    let mut out = BTreeSet::new();
    collect_free(t, &mut Vec::new(), &mut out);
    out
}

fn collect_free(t: &Type, bound: &mut Vec<VarName>, out: &mut BTreeSet<VarName>) {
    match t {
        Type::Const(_) => {}
        Type::Var(v) => {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        }
        Type::Abs(v, _, body) => {
            bound.push(v.clone());
            collect_free(body, bound, out);
            bound.pop();
        }
        Type::App(f, a) => {
            collect_free(f, bound, out);
            collect_free(a, bound, out);
        }
    }
}

/// The least canonical variable not in `avoid` and not free in `t`.
///
/// `t` is normally an abstraction; its own binder does not count as free.
pub fn first_avail(avoid: &BTreeSet<VarName>, t: &Type) -> VarName {
    let mut excluded: BTreeSet<u32> = avoid
        .iter()
        .filter_map(|v| match v {
            VarName::Canonical(i) => Some(*i),
            VarName::User(_) => None,
        })
        .collect();
    for v in free_vars(t) {
        if let VarName::Canonical(i) = v {
            excluded.insert(i);
        }
    }
    let mut i = 1;
    while excluded.contains(&i) {
        i += 1;
    }
    VarName::Canonical(i)
}

/// `T[U/a]`: replace free occurrences of `a` by `U`, stopping at any binder
/// that rebinds `a`. No renaming happens here; callers arrange (via the
/// renaming discipline) that capture cannot occur.
pub fn substitute(t: &Type, replacement: &Type, var: &VarName) -> Type {
    match t {
        Type::Const(_) => t.clone(),
        Type::Var(v) => {
            if v == var {
                replacement.clone()
            } else {
                t.clone()
            }
        }
        Type::Abs(v, k, body) => {
            if v == var {
                t.clone()
            } else {
                Type::abs(v.clone(), k.clone(), substitute(body, replacement, var))
            }
        }
        Type::App(f, a) => Type::app(
            substitute(f, replacement, var),
            substitute(a, replacement, var),
        ),
    }
}

/// Minimal alpha-conversion with the variables in `avoid` unavailable.
pub fn rename_with(avoid: &BTreeSet<VarName>, t: &Type) -> Type {
    match t {
        Type::Const(_) | Type::Var(_) => t.clone(),
        Type::Abs(v, k, body) => {
            let fresh = first_avail(avoid, t);
            let body = if *v == fresh {
                (**body).clone()
            } else {
                substitute(body, &Type::Var(fresh.clone()), v)
            };
            Type::abs(fresh, k.clone(), rename_with(avoid, &body))
        }
        Type::App(f, a) => {
            let mut head_avoid = avoid.clone();
            head_avoid.extend(free_vars(a));
            Type::app(rename_with(&head_avoid, f), rename_with(avoid, a))
        }
    }
}

/// `rename({}, t)`: the canonical representative of `t`'s alpha-class.
pub fn rename(t: &Type) -> Type {
    rename_with(&BTreeSet::new(), t)
}

/// Whether `t` is already in renamed form.
pub fn is_renamed(t: &Type) -> bool {
    rename(t) == *t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{Kind, VarName};

    fn k() -> Kind {
        Kind::Functional
    }

    #[test]
    fn free_vars_basic() {
        assert_eq!(
            free_vars(&Type::var("a")),
            BTreeSet::from([VarName::user("a")])
        );
        assert!(free_vars(&Type::abs(VarName::user("a"), k(), Type::var("a"))).is_empty());
        let t = Type::app(
            Type::var("a"),
            Type::abs(VarName::user("b"), k(), Type::var("b")),
        );
        assert_eq!(free_vars(&t), BTreeSet::from([VarName::user("a")]));
    }

    #[test]
    fn first_avail_skips_free_canonicals() {
        let id = Type::abs(VarName::user("a"), k(), Type::var("a"));
        assert_eq!(first_avail(&BTreeSet::new(), &id), VarName::canonical(1));
        assert_eq!(
            first_avail(&BTreeSet::from([VarName::canonical(1)]), &id),
            VarName::canonical(2)
        );
        // $1 free in the body pushes the choice to $2.
        let t = Type::abs(
            VarName::user("a"),
            k(),
            Type::app(Type::cvar(1), Type::var("a")),
        );
        assert_eq!(first_avail(&BTreeSet::new(), &t), VarName::canonical(2));
    }

    #[test]
    fn rename_nested_binders_reuse_names() {
        // \a:T. \b:S. b  renames to  \$1:T. \$1:S. $1
        let t = Type::abs(
            VarName::user("a"),
            Kind::Functional,
            Type::abs(VarName::user("b"), Kind::Session, Type::var("b")),
        );
        let expected = Type::abs(
            VarName::canonical(1),
            Kind::Functional,
            Type::abs(VarName::canonical(1), Kind::Session, Type::cvar(1)),
        );
        assert_eq!(rename(&t), expected);
    }

    #[test]
    fn rename_application_head_avoids_argument() {
        // a (\b:T. b)  renames to  a (\$1:T. $1); the head variable is free.
        let t = Type::app(
            Type::var("a"),
            Type::abs(VarName::user("b"), k(), Type::var("b")),
        );
        let expected = Type::app(
            Type::var("a"),
            Type::abs(VarName::canonical(1), k(), Type::cvar(1)),
        );
        assert_eq!(rename(&t), expected);

        // $1 (\a:T. a): the abstraction sits in argument position, so the
        // binder may reuse $1 even though $1 is free in the head.
        let t = Type::app(
            Type::cvar(1),
            Type::abs(VarName::user("a"), k(), Type::var("a")),
        );
        let expected = Type::app(
            Type::cvar(1),
            Type::abs(VarName::canonical(1), k(), Type::cvar(1)),
        );
        assert_eq!(rename(&t), expected);
    }

    #[test]
    fn rename_fixed_point() {
        let t = Type::abs(VarName::canonical(1), k(), Type::cvar(1));
        assert_eq!(rename(&t), t);
        assert!(is_renamed(&t));
    }

    #[test]
    fn substitute_stops_at_rebinder() {
        // (\$1:T. body)[U/$1] leaves the abstraction untouched.
        let inner = Type::abs(VarName::canonical(1), k(), Type::cvar(1));
        assert_eq!(
            substitute(&inner, &Type::end(), &VarName::canonical(1)),
            inner
        );
        // (\$2:T. $1)[End/$1] substitutes under the unrelated binder.
        let t = Type::abs(VarName::canonical(2), k(), Type::cvar(1));
        assert_eq!(
            substitute(&t, &Type::end(), &VarName::canonical(1)),
            Type::abs(VarName::canonical(2), k(), Type::end())
        );
        assert_eq!(
            substitute(&Type::cvar(1), &Type::end(), &VarName::canonical(1)),
            Type::end()
        );
    }
}
