//! Deterministic operational semantics.
//!
//! Processes are kept in a multiset normal form: a list of channel
//! restrictions over a bag of threads. Each step enumerates every enabled
//! redex (internal term steps, forks, channel creations, and matching
//! communications across a restriction) and a seeded scheduler picks one,
//! so identical program and seed give identical runs.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::Type;

use super::errors::{detect_error, RuntimeErrorKind};
use super::term::{subst_term, subst_type_in_term, Process, Term, TermConst};
use super::tparser::Program;
use super::typing::typecheck_program;

/// One-hole evaluation contexts, innermost frame last.
#[derive(Debug, Clone)]
pub(crate) enum Frame {
    /// `[] t`
    AppFun(Term),
    /// `v []`
    AppArg(Term),
    /// `[] [T]`
    TApp(Type),
    /// record with evaluated prefix, hole, and pending suffix
    Record(Vec<(String, Term)>, String, Vec<(String, Term)>),
    LetScrut(Vec<(String, String)>, Term),
    VariantAt(String, Type),
    CaseScrut(Vec<(String, Term)>),
    MatchScrut(Vec<(String, Term)>),
}

pub(crate) fn rebuild(frames: &[Frame], hole: Term) -> Term {
    let mut t = hole;
    for frame in frames.iter().rev() {
        t = match frame {
            Frame::AppFun(arg) => Term::app(t, arg.clone()),
            Frame::AppArg(fun) => Term::app(fun.clone(), t),
            Frame::TApp(ty) => Term::tapp(t, ty.clone()),
            Frame::Record(done, label, todo) => {
                let mut fields = done.clone();
                fields.push((label.clone(), t));
                fields.extend(todo.iter().cloned());
                Term::Record(fields)
            }
            Frame::LetScrut(binds, body) => {
                Term::LetRecord(binds.clone(), Box::new(t), Box::new(body.clone()))
            }
            Frame::VariantAt(label, ty) => {
                Term::Variant(label.clone(), Box::new(t), ty.clone())
            }
            Frame::CaseScrut(handlers) => Term::Case(Box::new(t), handlers.clone()),
            Frame::MatchScrut(handlers) => Term::Match(Box::new(t), handlers.clone()),
        };
    }
    t
}

/// Decompose a non-value term into an evaluation context and the focused
/// subterm (the unique call-by-value redex position).
pub(crate) fn decompose(t: &Term) -> Option<(Vec<Frame>, Term)> {
    if t.is_value() {
        return None;
    }
    let mut frames = Vec::new();
    let mut cur = t.clone();
    loop {
        let focused = match &cur {
            Term::App(f, a) => {
                if !f.is_value() {
                    frames.push(Frame::AppFun((**a).clone()));
                    Some((**f).clone())
                } else if !a.is_value() {
                    frames.push(Frame::AppArg((**f).clone()));
                    Some((**a).clone())
                } else {
                    None
                }
            }
            Term::TApp(f, ty) => {
                if !f.is_value() {
                    frames.push(Frame::TApp(ty.clone()));
                    Some((**f).clone())
                } else {
                    None
                }
            }
            Term::Record(fields) => {
                let split = fields.iter().position(|(_, v)| !v.is_value());
                match split {
                    Some(i) => {
                        let done = fields[..i].to_vec();
                        let todo = fields[i + 1..].to_vec();
                        let (label, inner) = fields[i].clone();
                        frames.push(Frame::Record(done, label, todo));
                        Some(inner)
                    }
                    None => None,
                }
            }
            Term::LetRecord(binds, scrut, body) => {
                if !scrut.is_value() {
                    frames.push(Frame::LetScrut(binds.clone(), (**body).clone()));
                    Some((**scrut).clone())
                } else {
                    None
                }
            }
            Term::Variant(label, inner, ty) => {
                if !inner.is_value() {
                    frames.push(Frame::VariantAt(label.clone(), ty.clone()));
                    Some((**inner).clone())
                } else {
                    None
                }
            }
            Term::Case(scrut, handlers) => {
                if !scrut.is_value() {
                    frames.push(Frame::CaseScrut(handlers.clone()));
                    Some((**scrut).clone())
                } else {
                    None
                }
            }
            Term::Match(scrut, handlers) => {
                if !scrut.is_value() {
                    frames.push(Frame::MatchScrut(handlers.clone()));
                    Some((**scrut).clone())
                } else {
                    None
                }
            }
            _ => None,
        };
        match focused {
            Some(next) => cur = next,
            None => return Some((frames, cur)),
        }
    }
}

/// What the focused redex wants to do.
#[derive(Debug, Clone)]
pub(crate) enum FocusAction {
    /// An internal term reduction to the given term.
    Step(Term),
    Fork(Term),
    New,
    Receive { chan: String },
    Send { payload: Term, chan: String },
    MatchOn { chan: String, handlers: Vec<(String, Term)> },
    Select { label: String, chan: String },
    Close { chan: String },
    /// No rule applies: a stuck application or destructor.
    Stuck,
}

pub(crate) fn classify(focus: &Term) -> FocusAction {
    match focus {
        Term::App(f, a) => match &**f {
            Term::Abs(x, _, body) => FocusAction::Step(subst_term(body, a, x)),
            Term::Rec(x, _, v) => {
                let unfolded = subst_term(v, f, x);
                FocusAction::Step(Term::app(unfolded, (**a).clone()))
            }
            Term::Const(TermConst::Fork) => FocusAction::Fork((**a).clone()),
            Term::Const(TermConst::Close) => match &**a {
                Term::Var(c) => FocusAction::Close { chan: c.clone() },
                _ => FocusAction::Stuck,
            },
            Term::Const(TermConst::Select { label, .. }) => match &**a {
                Term::Var(c) => {
                    FocusAction::Select { label: label.clone(), chan: c.clone() }
                }
                _ => FocusAction::Stuck,
            },
            Term::TApp(g, _) => match (&**g, &**a) {
                // receive [T] [U] x
                (Term::TApp(h, _), Term::Var(c))
                    if matches!(&**h, Term::Const(TermConst::Receive)) =>
                {
                    FocusAction::Receive { chan: c.clone() }
                }
                // send [T] v [U] x
                (Term::App(h, payload), Term::Var(c)) => match &**h {
                    Term::TApp(s, _) if matches!(&**s, Term::Const(TermConst::Send)) => {
                        FocusAction::Send { payload: (**payload).clone(), chan: c.clone() }
                    }
                    _ => FocusAction::Stuck,
                },
                _ => FocusAction::Stuck,
            },
            _ => FocusAction::Stuck,
        },
        Term::TApp(f, ty) => match &**f {
            Term::TAbs(a, _, body) => {
                FocusAction::Step(subst_type_in_term(body, ty, &crate::syntax::VarName::user(a.clone())))
            }
            Term::Const(TermConst::New) => FocusAction::New,
            _ => FocusAction::Stuck,
        },
        Term::LetRecord(binds, scrut, body) => match &**scrut {
            Term::Record(fields) => {
                let labels_match = binds.len() == fields.len()
                    && binds.iter().zip(fields.iter()).all(|((l, _), (m, _))| l == m);
                if !labels_match {
                    return FocusAction::Stuck;
                }
                let mut out = (**body).clone();
                for ((_, x), (_, v)) in binds.iter().zip(fields.iter()) {
                    out = subst_term(&out, v, x);
                }
                FocusAction::Step(out)
            }
            _ => FocusAction::Stuck,
        },
        Term::Case(scrut, handlers) => match &**scrut {
            Term::Variant(label, payload, _) => {
                match handlers.iter().find(|(l, _)| l == label) {
                    Some((_, h)) => {
                        FocusAction::Step(Term::app(h.clone(), (**payload).clone()))
                    }
                    None => FocusAction::Stuck,
                }
            }
            _ => FocusAction::Stuck,
        },
        Term::Match(scrut, handlers) => match &**scrut {
            Term::Var(c) => {
                FocusAction::MatchOn { chan: c.clone(), handlers: handlers.clone() }
            }
            _ => FocusAction::Stuck,
        },
        _ => FocusAction::Stuck,
    }
}

/// One internal (non-communicating) term reduction step, or `None` when
/// the term is a value or waits on a process-level action.
pub fn term_step(t: &Term) -> Option<Term> {
    let (frames, focus) = decompose(t)?;
    match classify(&focus) {
        FocusAction::Step(next) => Some(rebuild(&frames, next)),
        _ => None,
    }
}

/// What a closed term is doing: the trichotomy of the progress property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observation {
    /// A syntactic value.
    Value,
    /// An internal reduction applies.
    Steps(Term),
    /// Ready to reduce at the process level: one of the stuck shapes
    /// `E[fork v]`, `E[new [T]]`, `E[receive [T] [U] x]`,
    /// `E[send [T] v [U] x]`, `E[match x {..}]`, `E[select l [C] x]`,
    /// `E[close x]`.
    StuckSession(&'static str),
    /// None of the above: a genuinely stuck (untypable) term.
    Wedged,
}

/// Classify a closed term per the progress trichotomy.
pub fn observe(t: &Term) -> Observation {
    let Some((_, focus)) = decompose(t) else {
        return Observation::Value;
    };
    match classify(&focus) {
        FocusAction::Step(next) => {
            let (frames, _) = decompose(t).expect("not a value");
            Observation::Steps(rebuild(&frames, next))
        }
        FocusAction::Fork(_) => Observation::StuckSession("fork"),
        FocusAction::New => Observation::StuckSession("new"),
        FocusAction::Receive { .. } => Observation::StuckSession("receive"),
        FocusAction::Send { .. } => Observation::StuckSession("send"),
        FocusAction::MatchOn { .. } => Observation::StuckSession("match"),
        FocusAction::Select { .. } => Observation::StuckSession("select"),
        FocusAction::Close { .. } => Observation::StuckSession("close"),
        FocusAction::Stuck => Observation::Wedged,
    }
}

/// Multiset normal form of a process: restrictions over a bag of threads.
#[derive(Debug, Clone, Default)]
pub(crate) struct Soup {
    pub nus: Vec<(String, String)>,
    pub threads: Vec<Term>,
}

pub(crate) fn flatten(p: &Process) -> Soup {
    let mut soup = Soup::default();
    fn walk(p: &Process, soup: &mut Soup) {
        match p {
            Process::Thread(t) => soup.threads.push(t.clone()),
            Process::Par(l, r) => {
                walk(l, soup);
                walk(r, soup);
            }
            Process::Nu(x, y, inner) => {
                soup.nus.push((x.clone(), y.clone()));
                walk(inner, soup);
            }
        }
    }
    walk(p, &mut soup);
    soup
}

pub(crate) fn unflatten(soup: &Soup) -> Process {
    let mut p = soup
        .threads
        .iter()
        .rev()
        .fold(None::<Process>, |acc, t| {
            Some(match acc {
                None => Process::Thread(t.clone()),
                Some(rest) => Process::Par(Box::new(Process::Thread(t.clone())), Box::new(rest)),
            })
        })
        .unwrap_or(Process::Thread(Term::unit()));
    for (x, y) in soup.nus.iter().rev() {
        p = Process::Nu(x.clone(), y.clone(), Box::new(p));
    }
    p
}

#[derive(Debug, Clone)]
enum Candidate {
    Internal { thread: usize, term: Term },
    Fork { thread: usize, thunk: Term },
    New { thread: usize },
    ReceiveSend { receiver: usize, sender: usize, payload: Term },
    MatchSelect { matcher: usize, selector: usize, label: String },
    CloseClose { left: usize, right: usize, nu: usize },
}

/// One process reduction, or `None` when no rule applies. The scheduler
/// picks uniformly among the enabled redexes.
pub fn proc_step(p: &Process, rng: &mut ChaCha8Rng) -> Option<Process> {
    let mut soup = flatten(p);
    let decomps: Vec<Option<(Vec<Frame>, Term, FocusAction)>> = soup
        .threads
        .iter()
        .map(|t| decompose(t).map(|(fs, focus)| {
            let action = classify(&focus);
            (fs, focus, action)
        }))
        .collect();

    let mut candidates = Vec::new();
    for (i, d) in decomps.iter().enumerate() {
        let Some((_, _, action)) = d else { continue };
        match action {
            FocusAction::Step(next) => {
                candidates.push(Candidate::Internal { thread: i, term: next.clone() })
            }
            FocusAction::Fork(v) => {
                candidates.push(Candidate::Fork { thread: i, thunk: v.clone() })
            }
            FocusAction::New => candidates.push(Candidate::New { thread: i }),
            _ => {}
        }
    }
    // communications across each restriction
    for (nu_idx, (x, y)) in soup.nus.iter().enumerate() {
        for i in 0..soup.threads.len() {
            for j in 0..soup.threads.len() {
                if i == j {
                    continue;
                }
                let (Some((_, _, ai)), Some((_, _, aj))) = (&decomps[i], &decomps[j]) else {
                    continue;
                };
                let subj_i = action_subject(ai);
                let subj_j = action_subject(aj);
                if subj_i != Some(x.as_str()) || subj_j != Some(y.as_str()) {
                    continue;
                }
                match (ai, aj) {
                    (FocusAction::Receive { .. }, FocusAction::Send { payload, .. }) => {
                        candidates.push(Candidate::ReceiveSend {
                            receiver: i,
                            sender: j,
                            payload: payload.clone(),
                        })
                    }
                    (FocusAction::Send { payload, .. }, FocusAction::Receive { .. }) => {
                        candidates.push(Candidate::ReceiveSend {
                            receiver: j,
                            sender: i,
                            payload: payload.clone(),
                        })
                    }
                    (FocusAction::MatchOn { handlers, .. }, FocusAction::Select { label, .. }) => {
                        if handlers.iter().any(|(l, _)| l == label) {
                            candidates.push(Candidate::MatchSelect {
                                matcher: i,
                                selector: j,
                                label: label.clone(),
                            })
                        }
                    }
                    (FocusAction::Select { label, .. }, FocusAction::MatchOn { handlers, .. }) => {
                        if handlers.iter().any(|(l, _)| l == label) {
                            candidates.push(Candidate::MatchSelect {
                                matcher: j,
                                selector: i,
                                label: label.clone(),
                            })
                        }
                    }
                    (FocusAction::Close { .. }, FocusAction::Close { .. }) => {
                        // i is the x-side, j the y-side: each pair appears once
                        candidates.push(Candidate::CloseClose { left: i, right: j, nu: nu_idx })
                    }
                    _ => {}
                }
            }
        }
    }

    if candidates.is_empty() {
        return None;
    }
    let pick = rng.gen_range(0..candidates.len());
    let chosen = candidates.swap_remove(pick);

    let ctx_of = |i: usize| decomps[i].as_ref().expect("decomposed").0.clone();
    match chosen {
        Candidate::Internal { thread, term } => {
            soup.threads[thread] = rebuild(&ctx_of(thread), term);
        }
        Candidate::Fork { thread, thunk } => {
            soup.threads[thread] = rebuild(&ctx_of(thread), Term::unit());
            soup.threads.push(Term::app(thunk, Term::unit()));
        }
        Candidate::New { thread } => {
            let n = fresh_channel_index(&soup);
            let (x, y) = (format!("#c{n}"), format!("#d{n}"));
            soup.nus.push((x.clone(), y.clone()));
            let pair = Term::Record(vec![
                ("Fst".into(), Term::Var(x)),
                ("Snd".into(), Term::Var(y)),
            ]);
            soup.threads[thread] = rebuild(&ctx_of(thread), pair);
        }
        Candidate::ReceiveSend { receiver, sender, payload } => {
            let recv_chan = match &decomps[receiver] {
                Some((_, _, FocusAction::Receive { chan })) => chan.clone(),
                _ => unreachable!(),
            };
            let send_chan = match &decomps[sender] {
                Some((_, _, FocusAction::Send { chan, .. })) => chan.clone(),
                _ => unreachable!(),
            };
            let pair = Term::Record(vec![
                ("Fst".into(), payload),
                ("Snd".into(), Term::Var(recv_chan)),
            ]);
            soup.threads[receiver] = rebuild(&ctx_of(receiver), pair);
            soup.threads[sender] = rebuild(&ctx_of(sender), Term::Var(send_chan));
        }
        Candidate::MatchSelect { matcher, selector, label } => {
            let (match_chan, handler) = match &decomps[matcher] {
                Some((_, _, FocusAction::MatchOn { chan, handlers })) => {
                    let h = handlers
                        .iter()
                        .find(|(l, _)| *l == label)
                        .expect("label checked")
                        .1
                        .clone();
                    (chan.clone(), h)
                }
                _ => unreachable!(),
            };
            let sel_chan = match &decomps[selector] {
                Some((_, _, FocusAction::Select { chan, .. })) => chan.clone(),
                _ => unreachable!(),
            };
            soup.threads[matcher] =
                rebuild(&ctx_of(matcher), Term::app(handler, Term::Var(match_chan)));
            soup.threads[selector] = rebuild(&ctx_of(selector), Term::Var(sel_chan));
        }
        Candidate::CloseClose { left, right, nu } => {
            soup.threads[left] = rebuild(&ctx_of(left), Term::unit());
            soup.threads[right] = rebuild(&ctx_of(right), Term::unit());
            soup.nus.remove(nu);
        }
    }
    Some(unflatten(&soup))
}

pub(crate) fn action_subject(a: &FocusAction) -> Option<&str> {
    match a {
        FocusAction::Receive { chan }
        | FocusAction::Send { chan, .. }
        | FocusAction::MatchOn { chan, .. }
        | FocusAction::Select { chan, .. }
        | FocusAction::Close { chan } => Some(chan),
        _ => None,
    }
}

fn fresh_channel_index(soup: &Soup) -> u32 {
    soup.nus
        .iter()
        .flat_map(|(x, y)| [x, y])
        .filter_map(|n| n.strip_prefix("#c").or_else(|| n.strip_prefix("#d")))
        .filter_map(|s| s.parse::<u32>().ok())
        .map(|n| n + 1)
        .max()
        .unwrap_or(0)
}

/// Final state of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Value(Term),
    Stuck(String),
    FuelExhausted,
    RuntimeError(RuntimeErrorKind, String),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Value(v) => write!(f, "value: {v}"),
            Outcome::Stuck(p) => write!(f, "stuck: {p}"),
            Outcome::FuelExhausted => write!(f, "fuel exhausted"),
            Outcome::RuntimeError(kind, at) => write!(f, "runtime error: {kind} at {at}"),
        }
    }
}

/// Close a program body by substituting earlier definitions, in order.
pub fn link(prog: &Program, name: &str) -> Option<Term> {
    let mut env: Vec<(String, Term)> = Vec::new();
    for item in &prog.items {
        let Some(body) = &item.body else { continue };
        let mut closed = body.clone();
        for (n, t) in &env {
            closed = subst_term(&closed, t, n);
        }
        if item.name == name {
            return Some(closed);
        }
        env.push((item.name.clone(), closed));
    }
    None
}

/// Typecheck (unless `unsafe_mode`) and run `main` to completion.
pub fn run(prog: &Program, seed: u64, fuel: usize, unsafe_mode: bool) -> Result<Outcome, super::typing::TypeError> {
    if !unsafe_mode {
        typecheck_program(prog)?;
    }
    let Some(main) = link(prog, "main") else {
        return Err(super::typing::TypeError::MissingSignature { name: "main".into() });
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = Process::Thread(main);
    for _ in 0..fuel {
        if let Some((kind, at)) = detect_error(&state) {
            return Ok(Outcome::RuntimeError(kind, at));
        }
        match proc_step(&state, &mut rng) {
            Some(next) => state = next,
            None => {
                let soup = flatten(&state);
                if soup.threads.iter().all(|t| t.is_value()) {
                    return Ok(Outcome::Value(soup.threads[0].clone()));
                }
                return Ok(Outcome::Stuck(state.to_string()));
            }
        }
    }
    Ok(Outcome::FuelExhausted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::tparser::{parse_program, parse_term_src};

    fn run_src(src: &str, seed: u64) -> Outcome {
        let prog = parse_program(src).unwrap();
        run(&prog, seed, 10_000, false).unwrap()
    }

    #[test]
    fn beta_and_records() {
        let prog = "main : {}\nmain = (fun x:{} -> x) {}\n";
        assert_eq!(run_src(prog, 1), Outcome::Value(Term::unit()));
    }

    #[test]
    fn fork_and_channel_roundtrip() {
        let prog = "\
main : {}
main = let (r, w) = new [?{};End] in
  fork (fun u:{} -> let {} = u in close (send [{}] {} [End] w)) ;
  let (x, r2) = receive [{}] [End] r in
  let {} = x in close r2
";
        for seed in [1, 2, 3] {
            assert_eq!(run_src(prog, seed), Outcome::Value(Term::unit()));
        }
    }

    #[test]
    fn match_select_sync() {
        let prog = "\
main : {}
main = let (m, s) = new [&{Go: End, Halt: End}] in
  fork (fun u:{} -> let {} = u in close (select Go [+{Go: End, Halt: End}] s)) ;
  match m with {Go = fun k:End -> close k, Halt = fun k:End -> close k}
";
        assert_eq!(run_src(prog, 7), Outcome::Value(Term::unit()));
    }

    #[test]
    fn stuck_without_counterpart() {
        // one endpoint closes, the dual is leaked into a record that is
        // never opened; the close can never synchronize
        let t = parse_term_src("close c").unwrap();
        let p = Process::Nu("c".into(), "d".into(), Box::new(Process::Thread(t)));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(proc_step(&p, &mut rng).is_none());
    }

    #[test]
    fn seed_invariance_on_deterministic_programs() {
        let prog = "main : {}\nmain = (fun x:{} -> x) ((fun y:{} -> y) {})\n";
        let a = run_src(prog, 1);
        let b = run_src(prog, 2);
        assert_eq!(a, b);
    }
}
