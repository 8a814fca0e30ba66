//! Abstract syntax for kinds and types.
//!
//! Types are built from constants, variables, type-level abstraction and
//! type-level application; abstraction is the only binding operator. The
//! binders `mu a:k. T` and `forall a:k. T` are parser sugar for applying the
//! `Mu`/`Forall` constants to a lambda and never appear as dedicated AST
//! nodes.

use std::collections::BTreeMap;
use std::fmt;

/// A type variable: either user-written or canonical (`$1`, `$2`, ...).
///
/// Canonical names form the well-ordered pool used by minimal renaming and
/// live in a lexical space disjoint from user identifiers, so a renamed
/// binder can never collide with a user-written free variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarName {
    User(String),
    Canonical(u32),
}

impl VarName {
    pub fn user(s: impl Into<String>) -> Self {
        VarName::User(s.into())
    }

    pub fn canonical(i: u32) -> Self {
        assert!(i >= 1, "canonical indices start at 1");
        VarName::Canonical(i)
    }
}

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarName::User(s) => write!(f, "{s}"),
            VarName::Canonical(i) => write!(f, "${i}"),
        }
    }
}

/// Kinds: the proper kinds `S` (session) and `T` (functional), plus arrow
/// kinds for type operators.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Session,
    Functional,
    Arrow(Box<Kind>, Box<Kind>),
}

impl Kind {
    pub fn arrow(dom: Kind, cod: Kind) -> Kind {
        Kind::Arrow(Box::new(dom), Box::new(cod))
    }

    /// True for `S` and `T`, the kinds of proper types.
    pub fn is_proper(&self) -> bool {
        matches!(self, Kind::Session | Kind::Functional)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kind::Session => write!(f, "S"),
            Kind::Functional => write!(f, "T"),
            Kind::Arrow(d, c) => {
                if matches!(**d, Kind::Arrow(..)) {
                    write!(f, "({d})=>{c}")
                } else {
                    write!(f, "{d}=>{c}")
                }
            }
        }
    }
}

/// Message polarity: `?` receives, `!` sends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    In,
    Out,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::In => Polarity::Out,
            Polarity::Out => Polarity::In,
        }
    }
}

/// Choice view: `&` offers (external), `+` selects (internal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum View {
    External,
    Internal,
}

impl View {
    pub fn flip(self) -> View {
        match self {
            View::External => View::Internal,
            View::Internal => View::External,
        }
    }
}

/// Type constants. Label lists are duplicate-free and sorted, which makes
/// indexed transition labels well defined and label-set equality syntactic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeConst {
    /// `->`, the function arrow.
    Arrow,
    /// `{l1,...,ln}`, record operator over the given labels.
    Record(Vec<String>),
    /// `<l1,...,ln>`, variant operator over the given labels.
    Variant(Vec<String>),
    /// `forall_k`, universal quantifier at kind `k`.
    Forall(Kind),
    /// `mu_k`, recursion operator at kind `k`.
    Mu(Kind),
    Skip,
    End,
    /// `?` or `!`.
    Msg(Polarity),
    /// `;`, sequential composition.
    Semi,
    /// `&{l1,...}` or `+{l1,...}`, choice operator over the given labels.
    Choice(View, Vec<String>),
    Dual,
}

impl TypeConst {
    pub fn describe(&self) -> String {
        match self {
            TypeConst::Arrow => "->".into(),
            TypeConst::Record(ls) => format!("{{{}}}", ls.join(",")),
            TypeConst::Variant(ls) => format!("<{}>", ls.join(",")),
            TypeConst::Forall(k) => format!("forall[{k}]"),
            TypeConst::Mu(k) => format!("mu[{k}]"),
            TypeConst::Skip => "Skip".into(),
            TypeConst::End => "End".into(),
            TypeConst::Msg(Polarity::In) => "?".into(),
            TypeConst::Msg(Polarity::Out) => "!".into(),
            TypeConst::Semi => ";".into(),
            TypeConst::Choice(View::External, ls) => format!("&{{{}}}", ls.join(",")),
            TypeConst::Choice(View::Internal, ls) => format!("+{{{}}}", ls.join(",")),
            TypeConst::Dual => "Dual".into(),
        }
    }
}

/// Types of the object language.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Const(TypeConst),
    Var(VarName),
    Abs(VarName, Kind, Box<Type>),
    App(Box<Type>, Box<Type>),
}

impl Type {
    pub fn var(name: impl Into<String>) -> Type {
        Type::Var(VarName::user(name))
    }

    pub fn cvar(i: u32) -> Type {
        Type::Var(VarName::canonical(i))
    }

    pub fn abs(name: VarName, kind: Kind, body: Type) -> Type {
        Type::Abs(name, kind, Box::new(body))
    }

    pub fn app(fun: Type, arg: Type) -> Type {
        Type::App(Box::new(fun), Box::new(arg))
    }

    pub fn skip() -> Type {
        Type::Const(TypeConst::Skip)
    }

    pub fn end() -> Type {
        Type::Const(TypeConst::End)
    }

    /// `T;U`
    pub fn semi(lhs: Type, rhs: Type) -> Type {
        Type::app(Type::app(Type::Const(TypeConst::Semi), lhs), rhs)
    }

    /// `?T` or `!T`
    pub fn msg(pol: Polarity, payload: Type) -> Type {
        Type::app(Type::Const(TypeConst::Msg(pol)), payload)
    }

    /// `Dual T`
    pub fn dual(t: Type) -> Type {
        Type::app(Type::Const(TypeConst::Dual), t)
    }

    /// `T -> U`
    pub fn fun(dom: Type, cod: Type) -> Type {
        Type::app(Type::app(Type::Const(TypeConst::Arrow), dom), cod)
    }

    /// `mu a:k. body` as sugar for `Mu_k (\a:k. body)`.
    pub fn mu(name: VarName, kind: Kind, body: Type) -> Type {
        Type::app(
            Type::Const(TypeConst::Mu(kind.clone())),
            Type::abs(name, kind, body),
        )
    }

    /// `forall a:k. body` as sugar for `Forall_k (\a:k. body)`.
    pub fn forall(name: VarName, kind: Kind, body: Type) -> Type {
        Type::app(
            Type::Const(TypeConst::Forall(kind.clone())),
            Type::abs(name, kind, body),
        )
    }

    /// Choice, record or variant from labelled fields; fields are sorted by
    /// label. Panics on duplicate labels (the parser rejects them earlier).
    pub fn labelled(make: impl Fn(Vec<String>) -> TypeConst, fields: Vec<(String, Type)>) -> Type {
        let mut fields = fields;
        fields.sort_by(|a, b| a.0.cmp(&b.0));
        for w in fields.windows(2) {
            assert!(w[0].0 != w[1].0, "duplicate label {}", w[0].0);
        }
        let labels: Vec<String> = fields.iter().map(|(l, _)| l.clone()).collect();
        let mut t = Type::Const(make(labels));
        for (_, field) in fields {
            t = Type::app(t, field);
        }
        t
    }

    pub fn choice(view: View, fields: Vec<(String, Type)>) -> Type {
        Type::labelled(|ls| TypeConst::Choice(view, ls), fields)
    }

    pub fn record(fields: Vec<(String, Type)>) -> Type {
        Type::labelled(TypeConst::Record, fields)
    }

    pub fn variant(fields: Vec<(String, Type)>) -> Type {
        Type::labelled(TypeConst::Variant, fields)
    }

    pub fn unit() -> Type {
        Type::record(vec![])
    }

    /// `(T, U)` as the record `{Fst: T, Snd: U}`.
    pub fn pair(fst: Type, snd: Type) -> Type {
        Type::record(vec![("Fst".into(), fst), ("Snd".into(), snd)])
    }

    /// Decompose an application spine: `h T1 ... Tm` with `h` not an
    /// application. Returns `(h, [T1, ..., Tm])`.
    pub fn spine(&self) -> (&Type, Vec<&Type>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let Type::App(f, a) = cur {
            args.push(&**a);
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    /// Rebuild an application spine.
    pub fn from_spine(head: Type, args: Vec<Type>) -> Type {
        args.into_iter().fold(head, Type::app)
    }

    /// The binary sequential composition `T;U`, if this type has that shape.
    pub fn as_semi(&self) -> Option<(&Type, &Type)> {
        if let Type::App(f, rhs) = self {
            if let Type::App(g, lhs) = &**f {
                if matches!(&**g, Type::Const(TypeConst::Semi)) {
                    return Some((lhs, rhs));
                }
            }
        }
        None
    }

    /// `Dual T`, if this type has that shape.
    pub fn as_dual(&self) -> Option<&Type> {
        if let Type::App(f, arg) = self {
            if matches!(&**f, Type::Const(TypeConst::Dual)) {
                return Some(arg);
            }
        }
        None
    }

    /// `?T` / `!T`, if this type has that shape.
    pub fn as_msg(&self) -> Option<(Polarity, &Type)> {
        if let Type::App(f, arg) = self {
            if let Type::Const(TypeConst::Msg(p)) = &**f {
                return Some((*p, arg));
            }
        }
        None
    }

    /// A spine headed by a variable, if any: `a T1 ... Tm` with `m >= 0`.
    pub fn as_var_spine(&self) -> Option<(&VarName, Vec<&Type>)> {
        let (head, args) = self.spine();
        match head {
            Type::Var(v) => Some((v, args)),
            _ => None,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_type(f, self, 0)
    }
}

// Precedence levels: 0 = loosest (arrow), 1 = semi, 2 = application, 3 = atom.
fn write_type(f: &mut fmt::Formatter<'_>, t: &Type, prec: u8) -> fmt::Result {
    // Sugared forms first.
    let (head, args) = t.spine();
    if let (Type::Const(TypeConst::Arrow), [dom, cod]) = (head, args.as_slice()) {
        if prec > 0 {
            write!(f, "(")?;
        }
        write_type(f, dom, 1)?;
        write!(f, " -> ")?;
        write_type(f, cod, 0)?;
        if prec > 0 {
            write!(f, ")")?;
        }
        return Ok(());
    }
    if let Some((lhs, rhs)) = t.as_semi() {
        if prec > 1 {
            write!(f, "(")?;
        }
        write_type(f, lhs, 2)?;
        write!(f, ";")?;
        write_type(f, rhs, 1)?;
        if prec > 1 {
            write!(f, ")")?;
        }
        return Ok(());
    }
    match (head, args.as_slice()) {
        (Type::Const(TypeConst::Mu(k)), [Type::Abs(v, k2, body)]) if k == k2 => {
            if prec > 0 {
                write!(f, "(")?;
            }
            write!(f, "mu {v}:{k} . ")?;
            write_type(f, body, 0)?;
            if prec > 0 {
                write!(f, ")")?;
            }
            return Ok(());
        }
        (Type::Const(TypeConst::Forall(k)), [Type::Abs(v, k2, body)]) if k == k2 => {
            if prec > 0 {
                write!(f, "(")?;
            }
            write!(f, "forall {v}:{k} . ")?;
            write_type(f, body, 0)?;
            if prec > 0 {
                write!(f, ")")?;
            }
            return Ok(());
        }
        _ => {}
    }
    // Fully applied labelled operators print with fields inline.
    if let Type::Const(c) = head {
        let labelled = match c {
            TypeConst::Record(ls) => Some(("{", ls, "}")),
            TypeConst::Variant(ls) => Some(("<", ls, ">")),
            TypeConst::Choice(View::External, ls) => Some(("&{", ls, "}")),
            TypeConst::Choice(View::Internal, ls) => Some(("+{", ls, "}")),
            _ => None,
        };
        if let Some((open, ls, close)) = labelled {
            if ls.len() == args.len() {
                write!(f, "{open}")?;
                for (i, (l, a)) in ls.iter().zip(args.iter()).enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{l}: ")?;
                    write_type(f, a, 1)?;
                }
                return write!(f, "{close}");
            }
        }
        if let (TypeConst::Msg(p), [payload]) = (c, args.as_slice()) {
            let sigil = if *p == Polarity::In { "?" } else { "!" };
            write!(f, "{sigil}")?;
            return write_type(f, payload, 3);
        }
    }
    match t {
        Type::Const(c) => write!(f, "{}", c.describe()),
        Type::Var(v) => write!(f, "{v}"),
        Type::Abs(v, k, body) => {
            if prec > 0 {
                write!(f, "(")?;
            }
            write!(f, "\\{v}:{k} . ")?;
            write_type(f, body, 0)?;
            if prec > 0 {
                write!(f, ")")?;
            }
            Ok(())
        }
        Type::App(fun, arg) => {
            if prec > 2 {
                write!(f, "(")?;
            }
            write_type(f, fun, 2)?;
            write!(f, " ")?;
            write_type(f, arg, 3)?;
            if prec > 2 {
                write!(f, ")")?;
            }
            Ok(())
        }
    }
}

/// Kinding context: an ordered map from type variables to kinds, where
/// update overwrites an existing binding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KContext {
    bindings: BTreeMap<VarName, Kind>,
}

impl KContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn of(bindings: impl IntoIterator<Item = (VarName, Kind)>) -> Self {
        let mut ctx = Self::new();
        for (v, k) in bindings {
            ctx.update(v, k);
        }
        ctx
    }

    /// `Delta + a:k`: overwrites any existing binding for `a`.
    pub fn update(&mut self, var: VarName, kind: Kind) {
        self.bindings.insert(var, kind);
    }

    pub fn updated(&self, var: VarName, kind: Kind) -> Self {
        let mut next = self.clone();
        next.update(var, kind);
        next
    }

    pub fn lookup(&self, var: &VarName) -> Option<&Kind> {
        self.bindings.get(var)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarName, &Kind)> {
        self.bindings.iter()
    }
}
