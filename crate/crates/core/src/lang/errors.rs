//! Runtime error detection.
//!
//! A closed process is a runtime error when (structurally) it contains an
//! application of a non-function value, a bad type application, a
//! destructor on the wrong shape of value, a session operator applied to a
//! non-endpoint, two parallel threads whose next operations share a
//! subject, or a restriction whose two pending endpoint operations do not
//! agree. Typable processes never trip any clause.

use std::fmt;

use super::eval::{action_subject, classify, decompose, flatten, FocusAction};
use super::term::{Process, Term, TermConst};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuntimeErrorKind {
    /// clause 1: `v u` with a value that cannot accept a term argument
    BadApplication,
    /// clause 2: `v [T]` with a value that cannot accept a type argument
    BadTypeApplication,
    /// clause 3: destructuring a non-record (or wrong labels)
    BadLetRecord,
    /// clause 4: case on a non-variant or a missing handler
    BadCase,
    /// clause 5: a session operator applied to a non-endpoint
    NonEndpointSubject,
    /// clause 6: two threads operating on the same endpoint
    SharedSubject,
    /// clause 7: the two endpoint operations of a channel do not agree
    Disagreement,
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuntimeErrorKind::BadApplication => "application of a non-function",
            RuntimeErrorKind::BadTypeApplication => "type application of a non-abstraction",
            RuntimeErrorKind::BadLetRecord => "record destructuring of a non-record",
            RuntimeErrorKind::BadCase => "case on an unexpected variant",
            RuntimeErrorKind::NonEndpointSubject => "session operation on a non-endpoint",
            RuntimeErrorKind::SharedSubject => "two threads share an endpoint",
            RuntimeErrorKind::Disagreement => "endpoint operations disagree",
        };
        write!(f, "{s}")
    }
}

/// Scan a closed process for the error clauses; `None` means safe.
pub fn detect_error(p: &Process) -> Option<(RuntimeErrorKind, String)> {
    let soup = flatten(p);

    // clauses 1-5 are structural: scan every subterm of every thread
    for (i, t) in soup.threads.iter().enumerate() {
        if let Some(kind) = term_error(t) {
            return Some((kind, format!("thread {i}")));
        }
    }

    // clauses 6 and 7 look at the focused operation of each thread
    let actions: Vec<Option<FocusAction>> = soup
        .threads
        .iter()
        .map(|t| decompose(t).map(|(_, focus)| classify(&focus)))
        .collect();
    let subjects: Vec<Option<&str>> = actions
        .iter()
        .map(|a| a.as_ref().and_then(action_subject))
        .collect();

    for i in 0..subjects.len() {
        for j in i + 1..subjects.len() {
            if let (Some(x), Some(y)) = (subjects[i], subjects[j]) {
                if x == y {
                    return Some((RuntimeErrorKind::SharedSubject, format!("endpoint {x}")));
                }
            }
        }
    }

    for (x, y) in &soup.nus {
        let find = |chan: &str| {
            actions
                .iter()
                .enumerate()
                .find(|(i, _)| subjects[*i] == Some(chan))
                .and_then(|(_, a)| a.as_ref())
        };
        if let (Some(ax), Some(ay)) = (find(x), find(y)) {
            if !agree(ax, ay) {
                return Some((RuntimeErrorKind::Disagreement, format!("channel {x}/{y}")));
            }
        }
    }
    None
}

/// The two pending operations on the endpoints of one channel fit together:
/// receive against send, close against close, match against a selected
/// label it offers.
fn agree(a: &FocusAction, b: &FocusAction) -> bool {
    match (a, b) {
        (FocusAction::Receive { .. }, FocusAction::Send { .. })
        | (FocusAction::Send { .. }, FocusAction::Receive { .. })
        | (FocusAction::Close { .. }, FocusAction::Close { .. }) => true,
        (FocusAction::MatchOn { handlers, .. }, FocusAction::Select { label, .. })
        | (FocusAction::Select { label, .. }, FocusAction::MatchOn { handlers, .. }) => {
            handlers.iter().any(|(l, _)| l == label)
        }
        _ => false,
    }
}

fn term_error(t: &Term) -> Option<RuntimeErrorKind> {
    if let Some(kind) = node_error(t) {
        return Some(kind);
    }
    match t {
        Term::Const(_) | Term::Var(_) => None,
        Term::Abs(_, _, b) | Term::Rec(_, _, b) | Term::TAbs(_, _, b) => term_error(b),
        Term::App(f, a) => term_error(f).or_else(|| term_error(a)),
        Term::TApp(f, _) => term_error(f),
        Term::Record(fields) => fields.iter().find_map(|(_, v)| term_error(v)),
        Term::LetRecord(_, s, b) => term_error(s).or_else(|| term_error(b)),
        Term::Variant(_, v, _) => term_error(v),
        Term::Case(s, hs) | Term::Match(s, hs) => {
            term_error(s).or_else(|| hs.iter().find_map(|(_, h)| term_error(h)))
        }
    }
}

/// The error clauses at a single node, for fully evaluated constituents.
/// Variables are values (they denote endpoints or, under a binder, whatever
/// will be substituted), so a variable in head or scrutinee position is
/// never an error by shape alone; typing rules out the bad cases and the
/// evaluator simply cannot proceed on the rest.
fn node_error(t: &Term) -> Option<RuntimeErrorKind> {
    match t {
        Term::App(f, a) if f.is_value() && a.is_value() => {
            if matches!(&**f, Term::Var(_)) {
                None
            } else if legal_term_app_head(f) {
                // session operators additionally require an endpoint
                if session_op_head(f) && !matches!(&**a, Term::Var(_)) {
                    Some(RuntimeErrorKind::NonEndpointSubject)
                } else {
                    None
                }
            } else {
                Some(RuntimeErrorKind::BadApplication)
            }
        }
        Term::TApp(f, _) if f.is_value() => {
            if matches!(&**f, Term::Var(_)) || legal_type_app_head(f) {
                None
            } else {
                Some(RuntimeErrorKind::BadTypeApplication)
            }
        }
        Term::LetRecord(binds, scrut, _) if scrut.is_value() => match &**scrut {
            Term::Var(_) => None,
            Term::Record(fields) => {
                let ok = binds.len() == fields.len()
                    && binds.iter().zip(fields).all(|((l, _), (m, _))| l == m);
                if ok {
                    None
                } else {
                    Some(RuntimeErrorKind::BadLetRecord)
                }
            }
            _ => Some(RuntimeErrorKind::BadLetRecord),
        },
        Term::Case(scrut, handlers) if scrut.is_value() => match &**scrut {
            Term::Var(_) => None,
            Term::Variant(label, _, _) => {
                if handlers.iter().any(|(l, _)| l == label) {
                    None
                } else {
                    Some(RuntimeErrorKind::BadCase)
                }
            }
            _ => Some(RuntimeErrorKind::BadCase),
        },
        Term::Match(scrut, _) if scrut.is_value() => match &**scrut {
            Term::Var(_) => None,
            _ => Some(RuntimeErrorKind::NonEndpointSubject),
        },
        _ => None,
    }
}

/// Values that may legally head a term application: lambdas, recursive
/// values, and the operator chains `receive [T] [U]`, `send [T]`,
/// `send [T] v [U]`, `select l [C]`, `close`, `fork`.
fn legal_term_app_head(v: &Term) -> bool {
    match v {
        Term::Abs(..) | Term::Rec(..) => true,
        Term::Const(TermConst::Select { .. } | TermConst::Close | TermConst::Fork) => true,
        Term::TApp(f, _) => match &**f {
            // send [T]
            Term::Const(TermConst::Send) => true,
            // receive [T] [U]
            Term::TApp(g, _) => matches!(&**g, Term::Const(TermConst::Receive)),
            // send [T] v [U]
            Term::App(g, _) => {
                matches!(&**g, Term::TApp(h, _) if matches!(&**h, Term::Const(TermConst::Send)))
            }
            _ => false,
        },
        _ => false,
    }
}

fn session_op_head(v: &Term) -> bool {
    match v {
        Term::Const(TermConst::Select { .. } | TermConst::Close) => true,
        Term::TApp(f, _) => match &**f {
            Term::TApp(g, _) => matches!(&**g, Term::Const(TermConst::Receive)),
            Term::App(g, _) => {
                matches!(&**g, Term::TApp(h, _) if matches!(&**h, Term::Const(TermConst::Send)))
            }
            _ => false,
        },
        _ => false,
    }
}

/// Values that may legally receive a type argument: type abstractions and
/// the chains `receive`, `receive [T]`, `send`, `send [T] v`, `new`.
fn legal_type_app_head(v: &Term) -> bool {
    match v {
        Term::TAbs(..) => true,
        Term::Const(TermConst::Receive | TermConst::Send | TermConst::New) => true,
        Term::TApp(f, _) => matches!(&**f, Term::Const(TermConst::Receive)),
        Term::App(f, a) => {
            a.is_value()
                && matches!(&**f, Term::TApp(g, _)
                    if matches!(&**g, Term::Const(TermConst::Send)))
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::tparser::parse_term_src;
    use crate::syntax::Type;

    fn thread(src: &str) -> Process {
        Process::Thread(parse_term_src(src).unwrap())
    }

    #[test]
    fn clean_threads_pass() {
        assert_eq!(detect_error(&thread("(fun x:{} -> x) {}")), None);
        assert_eq!(detect_error(&thread("close c")), None);
        assert_eq!(detect_error(&thread("send [{}] {} [End] c")), None);
    }

    #[test]
    fn bad_application_detected() {
        // {} {} applies a record
        let t = Term::app(Term::unit(), Term::unit());
        let (kind, _) = detect_error(&Process::Thread(t)).unwrap();
        assert_eq!(kind, RuntimeErrorKind::BadApplication);
        // receive [T] v skips the second type argument
        let t = Term::app(
            Term::tapp(Term::Const(TermConst::Receive), Type::unit()),
            Term::unit(),
        );
        let (kind, _) = detect_error(&Process::Thread(t)).unwrap();
        assert_eq!(kind, RuntimeErrorKind::BadApplication);
    }

    #[test]
    fn bad_type_application_detected() {
        let t = Term::tapp(Term::Const(TermConst::Close), Type::unit());
        let (kind, _) = detect_error(&Process::Thread(t)).unwrap();
        assert_eq!(kind, RuntimeErrorKind::BadTypeApplication);
    }

    #[test]
    fn non_endpoint_subject_detected() {
        let (kind, _) = detect_error(&thread("close {}")).unwrap();
        assert_eq!(kind, RuntimeErrorKind::NonEndpointSubject);
        let (kind, _) = detect_error(&thread("match {} with {A = fun k:End -> close k}")).unwrap();
        assert_eq!(kind, RuntimeErrorKind::NonEndpointSubject);
    }

    #[test]
    fn shared_subject_detected() {
        let p = Process::Par(
            Box::new(thread("close x")),
            Box::new(thread("send [{}] {} [End] x")),
        );
        let (kind, _) = detect_error(&p).unwrap();
        assert_eq!(kind, RuntimeErrorKind::SharedSubject);
    }

    #[test]
    fn disagreement_detected() {
        // close on one end, send on the other
        let p = Process::Nu(
            "x".into(),
            "y".into(),
            Box::new(Process::Par(
                Box::new(thread("close x")),
                Box::new(thread("send [{}] {} [End] y")),
            )),
        );
        let (kind, _) = detect_error(&p).unwrap();
        assert_eq!(kind, RuntimeErrorKind::Disagreement);
        // receive against send is fine
        let p = Process::Nu(
            "x".into(),
            "y".into(),
            Box::new(Process::Par(
                Box::new(thread("let (v, k) = receive [{}] [End] x in let {} = v in close k")),
                Box::new(thread("send [{}] {} [End] y")),
            )),
        );
        assert_eq!(detect_error(&p), None);
    }

    #[test]
    fn bad_case_detected() {
        let t =
            parse_term_src("case (tag A {} as <A: {}, B: {}>) of {B = fun x:{} -> x}").unwrap();
        let (kind, _) = detect_error(&Process::Thread(t)).unwrap();
        assert_eq!(kind, RuntimeErrorKind::BadCase);
    }
}
