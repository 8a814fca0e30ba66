//! The labelled transition system over types.
//!
//! A type is first normalized (rule L-Red), then its transitions are read
//! off the head of the weak head normal form. The system is deterministic:
//! at most one successor per label. `Skip` is the only well-formed whnf
//! without transitions, and `End` and `End;U` share the same label so that
//! the absorbing law holds.

use std::collections::BTreeMap;
use std::fmt;

use crate::reduce::{normalize, NormError};
use crate::syntax::{Kind, Type, TypeConst, VarName};

/// Transition labels: variable heads with an argument index, constant heads
/// with an argument index, and abstraction labels carrying binder and kind.
/// Constant heads embed label sets, polarity, view and quantifier kind, so
/// two choices over different labels produce different transition labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    VarHead(VarName, usize),
    ConstHead(TypeConst, usize),
    Abs(VarName, Kind),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::VarHead(v, j) => write!(f, "{v}_{j}"),
            Label::ConstHead(c, 0) => write!(f, "{}", c.describe()),
            Label::ConstHead(c, j) => write!(f, "{}_{j}", c.describe()),
            Label::Abs(v, k) => write!(f, "lambda {v}:{k}"),
        }
    }
}

/// The successor map of a type. Fails only when normalization diverges
/// (impossible for kinded types with recursion at proper kinds). The whnf
/// is canonicalized before labels are read off, so binder names in labels
/// are always the minimal ones.
pub fn transitions(t: &Type) -> Result<BTreeMap<Label, Type>, NormError> {
    let whnf = crate::rename::rename(&normalize(t)?);
    Ok(whnf_transitions(&whnf))
}

fn var_spine_transitions(
    var: &VarName,
    args: &[&Type],
    zero_target: Type,
    out: &mut BTreeMap<Label, Type>,
) {
    out.insert(Label::VarHead(var.clone(), 0), zero_target);
    for (j, arg) in args.iter().enumerate() {
        out.insert(Label::VarHead(var.clone(), j + 1), (*arg).clone());
    }
}

fn whnf_transitions(t: &Type) -> BTreeMap<Label, Type> {
    let mut out = BTreeMap::new();
    match t {
        Type::Const(TypeConst::Skip) => {}
        Type::Const(c) => {
            out.insert(Label::ConstHead(c.clone(), 0), Type::skip());
        }
        Type::Var(v) => {
            var_spine_transitions(v, &[], Type::skip(), &mut out);
        }
        Type::Abs(v, k, body) => {
            out.insert(Label::Abs(v.clone(), k.clone()), (**body).clone());
        }
        Type::App(..) => {
            let (head, args) = t.spine();
            match head {
                Type::Var(v) => {
                    var_spine_transitions(v, &args, Type::skip(), &mut out);
                }
                Type::Const(c @ (TypeConst::Arrow
                | TypeConst::Forall(_)
                | TypeConst::Choice(..)
                | TypeConst::Record(_)
                | TypeConst::Variant(_))) => {
                    for (j, arg) in args.iter().enumerate() {
                        out.insert(Label::ConstHead(c.clone(), j + 1), (*arg).clone());
                    }
                }
                Type::Const(TypeConst::Msg(p)) => {
                    out.insert(
                        Label::ConstHead(TypeConst::Msg(*p), 1),
                        args[0].clone(),
                    );
                    out.insert(Label::ConstHead(TypeConst::Msg(*p), 2), Type::skip());
                }
                Type::Const(TypeConst::Dual) => {
                    if args.len() == 1 && args[0].as_var_spine().is_some() {
                        out.insert(Label::ConstHead(TypeConst::Dual, 1), args[0].clone());
                        out.insert(Label::ConstHead(TypeConst::Dual, 2), Type::skip());
                    }
                }
                Type::Const(TypeConst::Semi) => match args.as_slice() {
                    [only] => {
                        out.insert(Label::ConstHead(TypeConst::Semi, 1), (*only).clone());
                    }
                    [first, rest @ ..] => {
                        let cont = if rest.len() == 1 {
                            rest[0].clone()
                        } else {
                            // ill-kinded arity; keep the spine intact
                            Type::from_spine(
                                Type::Const(TypeConst::Semi),
                                rest.iter().map(|t| (*t).clone()).collect(),
                            )
                        };
                        seq_transitions(first, cont, &mut out);
                    }
                    [] => unreachable!("application spine has arguments"),
                },
                _ => {}
            }
        }
    }
    out
}

/// Transitions of `first ; cont` where `first` is whnf, not `Skip` and not
/// a sequential composition.
fn seq_transitions(first: &Type, cont: Type, out: &mut BTreeMap<Label, Type>) {
    if let Some((v, args)) = first.as_var_spine() {
        var_spine_transitions(v, &args, cont, out);
        return;
    }
    if matches!(first, Type::Const(TypeConst::End)) {
        // same label as a lone End, so End ~ End;U
        out.insert(Label::ConstHead(TypeConst::End, 0), Type::skip());
        return;
    }
    if let Some((p, payload)) = first.as_msg() {
        out.insert(Label::ConstHead(TypeConst::Msg(p), 1), payload.clone());
        out.insert(Label::ConstHead(TypeConst::Msg(p), 2), cont);
        return;
    }
    {
        let (head, args) = first.spine();
        if let Type::Const(c @ TypeConst::Choice(..)) = head {
            for (j, arg) in args.iter().enumerate() {
                out.insert(
                    Label::ConstHead(c.clone(), j + 1),
                    Type::semi((*arg).clone(), cont.clone()),
                );
            }
            return;
        }
    }
    if let Some(inner) = first.as_dual() {
        if inner.as_var_spine().is_some() {
            out.insert(Label::ConstHead(TypeConst::Dual, 1), inner.clone());
            out.insert(Label::ConstHead(TypeConst::Dual, 2), cont);
        }
    }
    // other heads are ill-kinded in sequent position: no transitions
}

/// Reachable fragment of the LTS, breadth-first to `depth`. States are
/// compared up to renaming. Returns `(states, edges)` with edge endpoints
/// as state indices.
pub fn reachable_lts(
    t: &Type,
    depth: usize,
) -> Result<(Vec<Type>, Vec<(usize, Label, usize)>), NormError> {
    use std::collections::VecDeque;
    let root = crate::rename::rename(t);
    let mut states = vec![root.clone()];
    let mut index: BTreeMap<Type, usize> = BTreeMap::from([(root, 0)]);
    let mut edges = Vec::new();
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((i, d)) = queue.pop_front() {
        if d >= depth {
            continue;
        }
        let trans = transitions(&states[i].clone())?;
        for (label, succ) in trans {
            let succ = crate::rename::rename(&succ);
            let j = *index.entry(succ.clone()).or_insert_with(|| {
                states.push(succ);
                queue.push_back((states.len() - 1, d + 1));
                states.len() - 1
            });
            edges.push((i, label, j));
        }
    }
    Ok((states, edges))
}
