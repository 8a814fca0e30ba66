//! Bounded direct bisimulation over the type LTS.
//!
//! A breadth-first joint exploration of the two transition systems. Label
//! sets that disagree at any reachable pair refute bisimilarity with a
//! minimal-length trace. If the exploration closes (every reachable pair is
//! either revisited or has syntactically equal sides after renaming) within
//! the depth bound, the pair set is a bisimulation and the answer is
//! certain. Otherwise the oracle reports `Unknown`, never a wrong verdict.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::lts::{transitions, Label};
use crate::rename::rename;
use crate::syntax::Type;

/// Default exploration depth used by the oracle backend.
pub const DEFAULT_ORACLE_DEPTH: usize = 64;

/// Three-valued equivalence answer. `NotBisimilar` traces replay: following
/// the trace succeeds on one side and fails on the other, or the label sets
/// diverge at its end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Bisimilar { certificate: usize },
    NotBisimilar { trace: Vec<Label> },
    Unknown { reason: String },
}

impl Verdict {
    pub fn is_bisimilar(&self) -> bool {
        matches!(self, Verdict::Bisimilar { .. })
    }

    pub fn is_not_bisimilar(&self) -> bool {
        matches!(self, Verdict::NotBisimilar { .. })
    }

    pub fn is_decisive(&self) -> bool {
        !matches!(self, Verdict::Unknown { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Bisimilar { certificate } => {
                write!(f, "Bisimilar (certificate size {certificate})")
            }
            Verdict::NotBisimilar { trace } => {
                write!(f, "NotBisimilar (trace:")?;
                for l in trace {
                    write!(f, " {l}")?;
                }
                write!(f, ")")
            }
            Verdict::Unknown { reason } => write!(f, "Unknown ({reason})"),
        }
    }
}

/// Compare two types up to `depth` transitions.
pub fn bounded_bisim(lhs: &Type, rhs: &Type, depth: usize) -> Verdict {
    let mut visited: BTreeSet<(Type, Type)> = BTreeSet::new();
    let mut queue: VecDeque<(Type, Type, usize, Vec<Label>)> = VecDeque::new();
    let mut trans_memo: BTreeMap<Type, BTreeMap<Label, Type>> = BTreeMap::new();
    let mut exhausted = false;

    queue.push_back((lhs.clone(), rhs.clone(), 0, Vec::new()));
    while let Some((a, b, d, trace)) = queue.pop_front() {
        let (ra, rb) = (rename(&a), rename(&b));
        if ra == rb {
            continue; // the LTS is deterministic, so equal states are bisimilar
        }
        if !visited.insert((ra.clone(), rb.clone())) {
            continue;
        }
        let ta = match memo_transitions(&mut trans_memo, &ra) {
            Ok(t) => t,
            Err(e) => return Verdict::Unknown { reason: e.to_string() },
        };
        let tb = match memo_transitions(&mut trans_memo, &rb) {
            Ok(t) => t,
            Err(e) => return Verdict::Unknown { reason: e.to_string() },
        };
        let labels_a: BTreeSet<&Label> = ta.keys().collect();
        let labels_b: BTreeSet<&Label> = tb.keys().collect();
        if labels_a != labels_b {
            let witness = labels_a
                .symmetric_difference(&labels_b)
                .next()
                .expect("sets differ");
            let mut trace = trace;
            trace.push((*witness).clone());
            return Verdict::NotBisimilar { trace };
        }
        if d >= depth {
            exhausted = true;
            continue;
        }
        for (label, succ_a) in &ta {
            let succ_b = &tb[label];
            let mut next_trace = trace.clone();
            next_trace.push(label.clone());
            queue.push_back((succ_a.clone(), succ_b.clone(), d + 1, next_trace));
        }
    }
    if exhausted {
        Verdict::Unknown { reason: "depth-exhausted".into() }
    } else {
        Verdict::Bisimilar { certificate: visited.len() }
    }
}

fn memo_transitions(
    memo: &mut BTreeMap<Type, BTreeMap<Label, Type>>,
    t: &Type,
) -> Result<BTreeMap<Label, Type>, crate::reduce::NormError> {
    if let Some(hit) = memo.get(t) {
        return Ok(hit.clone());
    }
    let trans = transitions(t)?;
    memo.insert(t.clone(), trans.clone());
    Ok(trans)
}

/// Replay a trace from `t`: follow each label, returning how far we got.
pub fn replay(t: &Type, trace: &[Label]) -> Result<usize, String> {
    let mut cur = t.clone();
    for (i, label) in trace.iter().enumerate() {
        let trans = transitions(&cur).map_err(|e| e.to_string())?;
        match trans.get(label) {
            Some(next) => cur = next.clone(),
            None => return Ok(i),
        }
    }
    Ok(trace.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_type;

    fn ty(src: &str) -> Type {
        rename(&parse_type(src).unwrap())
    }

    #[test]
    fn neutral_element() {
        assert!(bounded_bisim(&ty("Skip;End"), &ty("End"), 16).is_bisimilar());
    }

    #[test]
    fn polarity_mismatch_refuted() {
        let v = bounded_bisim(&ty("?{};End"), &ty("!{};End"), 1);
        match &v {
            Verdict::NotBisimilar { trace } => assert_eq!(trace.len(), 1),
            other => panic!("expected refutation, got {other:?}"),
        }
    }

    #[test]
    fn var_skip_padding() {
        let v = bounded_bisim(&ty("a (!{})"), &ty("(a (!{}));Skip"), 8);
        assert!(v.is_bisimilar(), "{v}");
    }

    #[test]
    fn trace_replays() {
        let (a, b) = (ty("&{L: Skip, R: ?{};End}"), ty("&{L: Skip, R: !{};End}"));
        let v = bounded_bisim(&a, &b, 8);
        let Verdict::NotBisimilar { trace } = v else {
            panic!("expected refutation")
        };
        let on_a = replay(&a, &trace).unwrap();
        let on_b = replay(&b, &trace).unwrap();
        assert!(
            on_a == trace.len() || on_b == trace.len(),
            "trace must fully replay on one side"
        );
        assert!(on_a < trace.len() || on_b < trace.len());
    }

    #[test]
    fn unknown_on_depth_exhaustion() {
        // two streams that differ only after the bound
        let a = ty("mu x:S . !{};x");
        let b = ty("mu x:S . !{};!{};x");
        // bisimilar in fact; with a tiny bound, exploration cannot close
        let v = bounded_bisim(&a, &b, 1);
        assert!(matches!(v, Verdict::Unknown { .. }), "{v}");
    }
}
