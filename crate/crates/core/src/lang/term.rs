//! Terms, values and processes.

use std::fmt;

use crate::syntax::{Kind, Type};

/// Term constants. `select` carries its label and the internal choice type
/// it selects from (the constant's type depends on both).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermConst {
    Receive,
    Send,
    Select { label: String, choice: Type },
    Close,
    Fork,
    New,
}

impl fmt::Display for TermConst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermConst::Receive => write!(f, "receive"),
            TermConst::Send => write!(f, "send"),
            TermConst::Select { label, choice } => write!(f, "select {label} [{choice}]"),
            TermConst::Close => write!(f, "close"),
            TermConst::Fork => write!(f, "fork"),
            TermConst::New => write!(f, "new"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Const(TermConst),
    Var(String),
    /// `fun x:T -> t`
    Abs(String, Type, Box<Term>),
    /// `rec x:T. v`
    Rec(String, Type, Box<Term>),
    /// `Fun a:K -> v`
    TAbs(String, Kind, Box<Term>),
    App(Box<Term>, Box<Term>),
    /// `t [T]`
    TApp(Box<Term>, Type),
    /// `{l = t, ...}`, labels sorted
    Record(Vec<(String, Term)>),
    /// `let {l = x, ...} = t in u`
    LetRecord(Vec<(String, String)>, Box<Term>, Box<Term>),
    /// `tag l t as T`
    Variant(String, Box<Term>, Type),
    /// `case t of {l = t, ...}`
    Case(Box<Term>, Vec<(String, Term)>),
    /// `match t with {l = t, ...}`
    Match(Box<Term>, Vec<(String, Term)>),
}

impl Term {
    pub fn var(s: impl Into<String>) -> Term {
        Term::Var(s.into())
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn tapp(f: Term, t: Type) -> Term {
        Term::TApp(Box::new(f), t)
    }

    pub fn abs(x: impl Into<String>, ty: Type, body: Term) -> Term {
        Term::Abs(x.into(), ty, Box::new(body))
    }

    pub fn unit() -> Term {
        Term::Record(vec![])
    }

    /// Values per the call-by-value grammar: constants, variables, lambdas,
    /// recursive values, type abstractions over values, records and
    /// variants of values, and partially applied send/receive chains.
    pub fn is_value(&self) -> bool {
        match self {
            Term::Const(_) | Term::Var(_) | Term::Abs(..) | Term::Rec(..) => true,
            Term::TAbs(_, _, v) => v.is_value(),
            Term::Record(fields) => fields.iter().all(|(_, t)| t.is_value()),
            Term::Variant(_, v, _) => v.is_value(),
            Term::TApp(f, _) => match &**f {
                // receive [T], receive [T] [U], send [T], send [T] v [U]
                Term::Const(TermConst::Receive | TermConst::Send) => true,
                Term::TApp(g, _) => matches!(&**g, Term::Const(TermConst::Receive)),
                Term::App(g, v) => {
                    v.is_value()
                        && matches!(&**g, Term::TApp(h, _)
                            if matches!(&**h, Term::Const(TermConst::Send)))
                }
                _ => false,
            },
            Term::App(f, a) => {
                // send [T] v
                a.is_value()
                    && matches!(&**f, Term::TApp(g, _)
                        if matches!(&**g, Term::Const(TermConst::Send)))
            }
            _ => false,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => write!(f, "{c}"),
            Term::Var(x) => write!(f, "{x}"),
            Term::Abs(x, t, body) => write!(f, "(fun {x}:{t} -> {body})"),
            Term::Rec(x, t, body) => write!(f, "(rec {x}:{t} . {body})"),
            Term::TAbs(a, k, body) => write!(f, "(Fun {a}:{k} -> {body})"),
            Term::App(g, a) => write!(f, "({g} {a})"),
            Term::TApp(g, t) => write!(f, "({g} [{t}])"),
            Term::Record(fields) => {
                write!(f, "{{")?;
                for (i, (l, t)) in fields.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{l} = {t}")?;
                }
                write!(f, "}}")
            }
            Term::LetRecord(binds, t, body) => {
                write!(f, "(let {{")?;
                for (i, (l, x)) in binds.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{l} = {x}")?;
                }
                write!(f, "}} = {t} in {body})")
            }
            Term::Variant(l, t, ty) => write!(f, "(tag {l} {t} as {ty})"),
            Term::Case(t, handlers) => {
                write!(f, "(case {t} of {{")?;
                for (i, (l, h)) in handlers.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{l} = {h}")?;
                }
                write!(f, "}})")
            }
            Term::Match(t, handlers) => {
                write!(f, "(match {t} with {{")?;
                for (i, (l, h)) in handlers.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{l} = {h}")?;
                }
                write!(f, "}})")
            }
        }
    }
}

/// Runtime processes: threads, parallel composition, and channel
/// restriction binding both endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Process {
    Thread(Term),
    Par(Box<Process>, Box<Process>),
    Nu(String, String, Box<Process>),
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::Thread(t) => write!(f, "<{t}>"),
            Process::Par(p, q) => write!(f, "({p} | {q})"),
            Process::Nu(x, y, p) => write!(f, "(nu {x} {y}. {p})"),
        }
    }
}

/// Capture-avoiding term-variable substitution `t[v/x]`. Runtime terms are
/// closed programs plus freshly named endpoints, so binders can simply
/// shadow: substitution stops at a rebinding of `x`.
pub fn subst_term(t: &Term, v: &Term, x: &str) -> Term {
    match t {
        Term::Const(_) => t.clone(),
        Term::Var(y) => {
            if y == x {
                v.clone()
            } else {
                t.clone()
            }
        }
        Term::Abs(y, ty, body) => {
            if y == x {
                t.clone()
            } else {
                Term::Abs(y.clone(), ty.clone(), Box::new(subst_term(body, v, x)))
            }
        }
        Term::Rec(y, ty, body) => {
            if y == x {
                t.clone()
            } else {
                Term::Rec(y.clone(), ty.clone(), Box::new(subst_term(body, v, x)))
            }
        }
        Term::TAbs(a, k, body) => {
            Term::TAbs(a.clone(), k.clone(), Box::new(subst_term(body, v, x)))
        }
        Term::App(g, a) => Term::app(subst_term(g, v, x), subst_term(a, v, x)),
        Term::TApp(g, ty) => Term::tapp(subst_term(g, v, x), ty.clone()),
        Term::Record(fields) => Term::Record(
            fields.iter().map(|(l, t)| (l.clone(), subst_term(t, v, x))).collect(),
        ),
        Term::LetRecord(binds, scrut, body) => {
            let scrut = subst_term(scrut, v, x);
            let body = if binds.iter().any(|(_, y)| y == x) {
                (**body).clone()
            } else {
                subst_term(body, v, x)
            };
            Term::LetRecord(binds.clone(), Box::new(scrut), Box::new(body))
        }
        Term::Variant(l, t, ty) => {
            Term::Variant(l.clone(), Box::new(subst_term(t, v, x)), ty.clone())
        }
        Term::Case(scrut, handlers) => Term::Case(
            Box::new(subst_term(scrut, v, x)),
            handlers.iter().map(|(l, h)| (l.clone(), subst_term(h, v, x))).collect(),
        ),
        Term::Match(scrut, handlers) => Term::Match(
            Box::new(subst_term(scrut, v, x)),
            handlers.iter().map(|(l, h)| (l.clone(), subst_term(h, v, x))).collect(),
        ),
    }
}

/// Type substitution into a term: `t[T/a]`.
pub fn subst_type_in_term(t: &Term, ty: &Type, var: &crate::syntax::VarName) -> Term {
    let s = |u: &Type| crate::rename::substitute(u, ty, var);
    match t {
        Term::Const(TermConst::Select { label, choice }) => Term::Const(TermConst::Select {
            label: label.clone(),
            choice: s(choice),
        }),
        Term::Const(_) | Term::Var(_) => t.clone(),
        Term::Abs(x, a, body) => {
            Term::Abs(x.clone(), s(a), Box::new(subst_type_in_term(body, ty, var)))
        }
        Term::Rec(x, a, body) => {
            Term::Rec(x.clone(), s(a), Box::new(subst_type_in_term(body, ty, var)))
        }
        Term::TAbs(a, k, body) => {
            if crate::syntax::VarName::User(a.clone()) == *var {
                t.clone()
            } else {
                Term::TAbs(a.clone(), k.clone(), Box::new(subst_type_in_term(body, ty, var)))
            }
        }
        Term::App(g, a) => Term::app(
            subst_type_in_term(g, ty, var),
            subst_type_in_term(a, ty, var),
        ),
        Term::TApp(g, a) => Term::tapp(subst_type_in_term(g, ty, var), s(a)),
        Term::Record(fields) => Term::Record(
            fields.iter().map(|(l, t)| (l.clone(), subst_type_in_term(t, ty, var))).collect(),
        ),
        Term::LetRecord(binds, scrut, body) => Term::LetRecord(
            binds.clone(),
            Box::new(subst_type_in_term(scrut, ty, var)),
            Box::new(subst_type_in_term(body, ty, var)),
        ),
        Term::Variant(l, t, a) => {
            Term::Variant(l.clone(), Box::new(subst_type_in_term(t, ty, var)), s(a))
        }
        Term::Case(scrut, handlers) => Term::Case(
            Box::new(subst_type_in_term(scrut, ty, var)),
            handlers.iter().map(|(l, h)| (l.clone(), subst_type_in_term(h, ty, var))).collect(),
        ),
        Term::Match(scrut, handlers) => Term::Match(
            Box::new(subst_type_in_term(scrut, ty, var)),
            handlers.iter().map(|(l, h)| (l.clone(), subst_type_in_term(h, ty, var))).collect(),
        ),
    }
}
