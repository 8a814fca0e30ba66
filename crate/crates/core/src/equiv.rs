//! Top-level type equivalence.
//!
//! The pipeline: try the finite-automaton fast path on both sides; if both
//! close, the answer is exact and cheap. Otherwise, types with recursion at
//! proper kinds go through the simple-grammar translation and the complete
//! grammar bisimilarity check. Anything else (arrow-kind recursion) falls
//! back to the bounded oracle, whose decisive answers are still sound.

use crate::bisim::{bounded_bisim, Verdict, DEFAULT_ORACLE_DEPTH};
use crate::fsa::{build_fsa, fsa_bisim, DEFAULT_FSA_CAP};
use crate::gbisim::{grammar_bisim, GrammarCaps};
use crate::grammar::{GrammarBuilder, WordError};
use crate::kind::{pre_kind, KindError};
use crate::syntax::{KContext, Type, TypeConst};

/// Which recursion fragment a type lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fragment {
    /// Every `mu` annotation is a proper kind: simple-grammar territory.
    MuStarSemi,
    /// Some recursion at an arrow kind: only the bounded oracle applies.
    FullMu,
}

/// `MuStarSemi` iff every recursion annotation in `t` is a proper kind.
pub fn classify(t: &Type) -> Fragment {
    fn all_proper(t: &Type) -> bool {
        match t {
            Type::Const(TypeConst::Mu(k)) => k.is_proper(),
            Type::Const(_) | Type::Var(_) => true,
            Type::Abs(_, _, body) => all_proper(body),
            Type::App(f, a) => all_proper(f) && all_proper(a),
        }
    }
    if all_proper(t) {
        Fragment::MuStarSemi
    } else {
        Fragment::FullMu
    }
}

/// Backend selection for [`equivalent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Auto,
    Grammar,
    Fsa,
    Oracle,
}

#[derive(Debug, Clone, Copy)]
pub struct EquivConfig {
    pub backend: Backend,
    pub oracle_depth: usize,
    pub node_cap: usize,
    pub depth_cap: usize,
    pub fsa_cap: usize,
}

impl Default for EquivConfig {
    fn default() -> Self {
        EquivConfig {
            backend: Backend::Auto,
            oracle_depth: DEFAULT_ORACLE_DEPTH,
            node_cap: crate::gbisim::DEFAULT_NODE_CAP,
            depth_cap: crate::gbisim::DEFAULT_DEPTH_CAP,
            fsa_cap: DEFAULT_FSA_CAP,
        }
    }
}

/// Decide whether `lhs` and `rhs` are equivalent under `ctx`.
///
/// Both types must be well formed: kinded for the proper-kind-recursion
/// fragment, pre-kinded otherwise (arrow-kind recursion never kinds, but is
/// still explored by the bounded oracle).
pub fn equivalent(
    ctx: &KContext,
    lhs: &Type,
    rhs: &Type,
    config: &EquivConfig,
) -> Result<Verdict, KindError> {
    // reduction is capture-safe only on renamed types
    let (lhs, rhs) = (&crate::rename::rename(lhs), &crate::rename::rename(rhs));
    let frag_l = classify(lhs);
    let frag_r = classify(rhs);
    let both_mu_star = frag_l == Fragment::MuStarSemi && frag_r == Fragment::MuStarSemi;
    // Callers promise kinded inputs; the linear pre-kinding pass guards
    // against garbage, and the backends detect non-normalizing recursion
    // themselves. Full kinding is one `kind_of` call away where wanted.
    for t in [lhs, rhs] {
        if pre_kind(ctx, t).is_none() {
            return Err(KindError::NotPreKinded { at: t.clone() });
        }
    }
    if lhs == rhs {
        // renamed forms coincide: bisimilar by determinism of the LTS
        return Ok(Verdict::Bisimilar { certificate: 0 });
    }

    match config.backend {
        Backend::Oracle => Ok(bounded_bisim(lhs, rhs, config.oracle_depth)),
        Backend::Fsa => Ok(fsa_stage(lhs, rhs, config).unwrap_or(Verdict::Unknown {
            reason: "fsa: state cap exceeded".into(),
        })),
        Backend::Grammar => {
            if both_mu_star {
                grammar_stage(lhs, rhs, config)
            } else {
                Ok(Verdict::Unknown { reason: "grammar: arrow-kind recursion".into() })
            }
        }
        Backend::Auto => {
            if let Some(v) = fsa_stage(lhs, rhs, config) {
                return Ok(v);
            }
            if both_mu_star {
                grammar_stage(lhs, rhs, config)
            } else {
                Ok(bounded_bisim(lhs, rhs, config.oracle_depth))
            }
        }
    }
}

fn fsa_stage(lhs: &Type, rhs: &Type, config: &EquivConfig) -> Option<Verdict> {
    let a = build_fsa(lhs, config.fsa_cap)?;
    let b = build_fsa(rhs, config.fsa_cap)?;
    Some(fsa_bisim(&a, &b))
}

fn grammar_stage(lhs: &Type, rhs: &Type, config: &EquivConfig) -> Result<Verdict, KindError> {
    let mut builder = GrammarBuilder::new();
    let wl = builder.word(lhs).map_err(word_to_kind_error)?;
    let wr = builder.word(rhs).map_err(word_to_kind_error)?;
    let caps = GrammarCaps { node_cap: config.node_cap, depth_cap: config.depth_cap };
    Ok(grammar_bisim(builder.grammar(), &wl, &wr, caps))
}

fn word_to_kind_error(e: WordError) -> KindError {
    match e {
        WordError::Divergent { witness } => KindError::NonNormalising { witness },
        WordError::Fragment { at } => KindError::HigherKindRecursion { at },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_type;
    use crate::rename::rename;
    use crate::syntax::{Kind, VarName};

    fn ty(src: &str) -> Type {
        rename(&parse_type(src).unwrap())
    }

    fn eq(ctx: &KContext, a: &str, b: &str) -> Verdict {
        equivalent(ctx, &ty(a), &ty(b), &EquivConfig::default()).unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&ty("\\a:T . mu b:S . &{Leaf: Skip, Node: b;?a;b}")), Fragment::MuStarSemi);
        assert_eq!(classify(&ty("End")), Fragment::MuStarSemi);
        assert_eq!(classify(&ty("mu x:T=>T . \\a:T . {l: x a}")), Fragment::FullMu);
    }

    #[test]
    fn pipeline_answers() {
        let ctx = KContext::new();
        assert!(eq(&ctx, "Skip;End", "End").is_bisimilar());
        let v = eq(&ctx, "End", "Skip");
        assert!(v.is_not_bisimilar(), "{v}");
        // distributivity, with free variables kinded by the context
        let ctx = KContext::of([
            (VarName::user("a"), Kind::Functional),
            (VarName::user("b"), Kind::Functional),
        ]);
        let v = eq(&ctx, "&{Go: ?a;End, Quit: !b;End}", "&{Go: ?a, Quit: !b};End");
        assert!(v.is_bisimilar(), "{v}");
    }

    #[test]
    fn kinding_errors_propagate() {
        let ctx = KContext::new();
        let err = equivalent(&ctx, &ty("mu a:S . Skip;a"), &ty("End"), &EquivConfig::default());
        assert!(matches!(err, Err(KindError::NonNormalising { .. })));
        // unbound variable
        let err = equivalent(&ctx, &ty("?x;End"), &ty("End"), &EquivConfig::default());
        assert!(matches!(err, Err(KindError::NotPreKinded { .. })));
    }

    #[test]
    fn full_mu_routes_to_oracle() {
        // the arrow-kind recursion of the hardness encoding, against itself
        // with swapped arguments: the oracle refutes
        let l3 = "(mu x:T=>T=>T . \\a:T . \\b:T . {l: x {r: a} {r: b}, a: a, b: b})";
        let lhs = ty(&format!("{l3} {{a: {{}}}} {{b: {{}}}}"));
        let rhs = ty(&format!("{l3} {{b: {{}}}} {{a: {{}}}}"));
        let ctx = KContext::new();
        let v = equivalent(&ctx, &lhs, &rhs, &EquivConfig::default()).unwrap();
        assert!(v.is_not_bisimilar(), "{v}");
        let v = equivalent(&ctx, &lhs, &lhs, &EquivConfig::default()).unwrap();
        assert!(v.is_bisimilar(), "{v}");
    }
}
