//! Simple grammars in Greibach normal form and the translation from types.
//!
//! `word` maps a type to a word of nonterminals, allocating a fresh symbol
//! the first time each weak head normal form (other than `Skip`) or each
//! non-normalized type is visited; revisits are detected up to renaming and
//! reuse the same symbol, which is what makes the construction terminate.
//! Sequential composition becomes concatenation, and the distinguished
//! nonterminal `BOT` (no productions) separates the payload of a message
//! from whatever follows it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lts::Label;
use crate::reduce::{normalize, NormError};
use crate::rename::rename;
use crate::syntax::{Type, TypeConst};

/// Nonterminal symbols: sequentially numbered `X0, X1, ...` plus the
/// production-less `BOT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NonTerm {
    Bot,
    X(u32),
}

impl fmt::Display for NonTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonTerm::Bot => write!(f, "BOT"),
            NonTerm::X(i) => write!(f, "X{i}"),
        }
    }
}

/// A (possibly empty) word of nonterminals.
pub type Word = Vec<NonTerm>;

/// Norm of a nonterminal: least number of transitions to the empty word.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormValue {
    Finite(u64),
    Unnormed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WordError {
    Divergent { witness: Type },
    /// Recursion at an arrow kind: outside the simple-grammar fragment.
    Fragment { at: Type },
}

impl fmt::Display for WordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WordError::Divergent { witness } => write!(f, "non-normalising type {witness}"),
            WordError::Fragment { at } => {
                write!(f, "recursion at an arrow kind in {at}: not in the grammar fragment")
            }
        }
    }
}

impl std::error::Error for WordError {}

/// A simple grammar: at most one production per (nonterminal, label) pair,
/// every production body a word of nonterminals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimpleGrammar {
    productions: BTreeMap<NonTerm, BTreeMap<Label, Word>>,
}

impl SimpleGrammar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn productions_of(&self, x: NonTerm) -> Option<&BTreeMap<Label, Word>> {
        self.productions.get(&x)
    }

    pub fn insert(&mut self, lhs: NonTerm, label: Label, rhs: Word) {
        assert!(lhs != NonTerm::Bot, "BOT has no productions");
        let prev = self.productions.entry(lhs).or_default().insert(label, rhs);
        assert!(prev.is_none(), "simpleness: duplicate production");
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = NonTerm> + '_ {
        self.productions.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NonTerm, &Label, &Word)> + '_ {
        self.productions
            .iter()
            .flat_map(|(x, ps)| ps.iter().map(move |(l, w)| (*x, l, w)))
    }

    pub fn production_count(&self) -> usize {
        self.productions.values().map(|ps| ps.len()).sum()
    }

    /// Labelled transitions of a word: `X delta -a-> gamma delta` for each
    /// production `X -a-> gamma`. The empty word and `BOT`-headed words
    /// have no transitions.
    pub fn word_transitions(&self, w: &[NonTerm]) -> BTreeMap<Label, Word> {
        let mut out = BTreeMap::new();
        let Some((head, tail)) = w.split_first() else {
            return out;
        };
        if let Some(prods) = self.productions.get(head) {
            for (label, rhs) in prods {
                let mut succ = rhs.clone();
                succ.extend_from_slice(tail);
                out.insert(label.clone(), succ);
            }
        }
        out
    }

    /// Least-fixpoint norms for all nonterminals with productions, plus
    /// `BOT` (unnormed).
    pub fn norms(&self) -> BTreeMap<NonTerm, NormValue> {
        let mut finite: BTreeMap<NonTerm, u64> = BTreeMap::new();
        loop {
            let mut changed = false;
            for (x, prods) in &self.productions {
                let mut best: Option<u64> = finite.get(x).copied();
                for rhs in prods.values() {
                    let mut total: u64 = 1;
                    let mut ok = true;
                    for sym in rhs {
                        match finite.get(sym) {
                            Some(n) => total = total.saturating_add(*n),
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok && best.map_or(true, |b| total < b) {
                        best = Some(total);
                    }
                }
                if let Some(b) = best {
                    if finite.get(x) != Some(&b) {
                        finite.insert(*x, b);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut out: BTreeMap<NonTerm, NormValue> = BTreeMap::new();
        out.insert(NonTerm::Bot, NormValue::Unnormed);
        for x in self.productions.keys() {
            out.insert(
                *x,
                finite
                    .get(x)
                    .map_or(NormValue::Unnormed, |n| NormValue::Finite(*n)),
            );
        }
        out
    }

    pub fn word_norm(&self, norms: &BTreeMap<NonTerm, NormValue>, w: &[NonTerm]) -> NormValue {
        let mut total = 0u64;
        for sym in w {
            match norms.get(sym) {
                Some(NormValue::Finite(n)) => total += n,
                _ => return NormValue::Unnormed,
            }
        }
        NormValue::Finite(total)
    }
}

/// Grammar construction state shared by one equivalence query: translating
/// several types through the same builder lets structurally equal subterms
/// share nonterminals.
#[derive(Debug, Default)]
pub struct GrammarBuilder {
    grammar: SimpleGrammar,
    memo: BTreeMap<Type, NonTerm>,
    /// Symbols for non-normalized types: copy the head symbol's productions
    /// with the tail appended, once all productions are known.
    pending_aliases: Vec<(NonTerm, Word)>,
    next: u32,
}

impl GrammarBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn grammar(&self) -> &SimpleGrammar {
        &self.grammar
    }

    pub fn into_grammar(self) -> SimpleGrammar {
        assert!(self.pending_aliases.is_empty(), "aliases resolved");
        self.grammar
    }

    fn fresh(&mut self) -> NonTerm {
        let x = NonTerm::X(self.next);
        self.next += 1;
        x
    }

    /// Translate a type to its word of nonterminals. The type must be in
    /// the fragment with recursion at proper kinds.
    pub fn word(&mut self, t: &Type) -> Result<Word, WordError> {
        check_fragment(t)?;
        let w = self.word_rec(t)?;
        self.resolve_aliases();
        Ok(w)
    }

    fn word_rec(&mut self, t: &Type) -> Result<Word, WordError> {
        // work on the canonical representative so that binder names in
        // labels are minimal and alpha-variants share symbols
        let t = rename(t);
        if crate::reduce::is_whnf(&t) {
            return self.word_whnf(&t);
        }
        let normalized = match normalize(&t) {
            Ok(u) => u,
            Err(NormError::Divergent { witness }) => {
                return Err(WordError::Divergent { witness })
            }
        };
        if matches!(normalized, Type::Const(TypeConst::Skip)) {
            return Ok(vec![]);
        }
        if let Some(hit) = self.memo.get(&t) {
            return Ok(vec![*hit]);
        }
        let y = self.fresh();
        self.memo.insert(t, y);
        let target = self.word_rec(&normalized)?;
        debug_assert!(!target.is_empty(), "word of a non-Skip whnf is non-empty");
        self.pending_aliases.push((y, target));
        Ok(vec![y])
    }

    fn word_whnf(&mut self, t: &Type) -> Result<Word, WordError> {
        if matches!(t, Type::Const(TypeConst::Skip)) {
            return Ok(vec![]);
        }
        if let Some((lhs, rhs)) = t.as_semi() {
            let mut w = self.word_rec(lhs)?;
            w.extend(self.word_rec(rhs)?);
            return Ok(w);
        }
        let key = t.clone();
        if let Some(hit) = self.memo.get(&key) {
            return Ok(vec![*hit]);
        }
        let y = self.fresh();
        self.memo.insert(key, y);

        match t {
            Type::Const(c) => {
                // End seals the word with BOT; every other constant opens up
                let rhs = if *c == TypeConst::End {
                    vec![NonTerm::Bot]
                } else {
                    vec![]
                };
                self.grammar.insert(y, Label::ConstHead(c.clone(), 0), rhs);
            }
            Type::Var(v) => {
                self.grammar.insert(y, Label::VarHead(v.clone(), 0), vec![]);
            }
            Type::Abs(v, k, body) => {
                let w = self.word_rec(body)?;
                self.grammar.insert(y, Label::Abs(v.clone(), k.clone()), w);
            }
            Type::App(..) => {
                let (head, args) = t.spine();
                let head = head.clone();
                let args: Vec<Type> = args.into_iter().cloned().collect();
                match &head {
                    Type::Var(v) => {
                        self.grammar.insert(y, Label::VarHead(v.clone(), 0), vec![]);
                        for (j, arg) in args.iter().enumerate() {
                            let mut w = self.word_rec(arg)?;
                            w.push(NonTerm::Bot);
                            self.grammar.insert(y, Label::VarHead(v.clone(), j + 1), w);
                        }
                    }
                    Type::Const(c @ (TypeConst::Arrow
                    | TypeConst::Forall(_)
                    | TypeConst::Choice(..)
                    | TypeConst::Record(_)
                    | TypeConst::Variant(_))) => {
                        for (j, arg) in args.iter().enumerate() {
                            let w = self.word_rec(arg)?;
                            self.grammar.insert(y, Label::ConstHead(c.clone(), j + 1), w);
                        }
                    }
                    Type::Const(TypeConst::Msg(p)) => {
                        let mut w = self.word_rec(&args[0])?;
                        w.push(NonTerm::Bot);
                        self.grammar.insert(y, Label::ConstHead(TypeConst::Msg(*p), 1), w);
                        self.grammar.insert(y, Label::ConstHead(TypeConst::Msg(*p), 2), vec![]);
                    }
                    Type::Const(TypeConst::Semi) => {
                        // the unary case `; T`; the binary case is handled
                        // by concatenation above
                        let w = self.word_rec(&args[0])?;
                        self.grammar.insert(y, Label::ConstHead(TypeConst::Semi, 1), w);
                    }
                    Type::Const(TypeConst::Dual) => {
                        let w = self.word_rec(&args[0])?;
                        self.grammar.insert(y, Label::ConstHead(TypeConst::Dual, 1), w);
                        self.grammar.insert(y, Label::ConstHead(TypeConst::Dual, 2), vec![]);
                    }
                    _ => unreachable!("whnf application heads are variables or constants"),
                }
            }
        }
        Ok(vec![y])
    }

    fn resolve_aliases(&mut self) {
        let aliases = std::mem::take(&mut self.pending_aliases);
        for (y, target) in aliases {
            let (head, tail) = target.split_first().expect("non-empty alias target");
            let copied: Vec<(Label, Word)> = self
                .grammar
                .productions_of(*head)
                .map(|ps| {
                    ps.iter()
                        .map(|(l, rhs)| {
                            let mut w = rhs.clone();
                            w.extend_from_slice(tail);
                            (l.clone(), w)
                        })
                        .collect()
                })
                .unwrap_or_default();
            for (label, rhs) in copied {
                self.grammar.insert(y, label, rhs);
            }
        }
    }
}

fn check_fragment(t: &Type) -> Result<(), WordError> {
    match t {
        Type::Const(TypeConst::Mu(k)) if !k.is_proper() => {
            Err(WordError::Fragment { at: t.clone() })
        }
        Type::Const(_) | Type::Var(_) => Ok(()),
        Type::Abs(_, _, body) => check_fragment(body),
        Type::App(f, a) => {
            check_fragment(f)?;
            check_fragment(a)
        }
    }
}

/// Serializable dump of a grammar with a start word.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GrammarDump {
    pub schema_version: u32,
    pub start: Vec<String>,
    pub productions: Vec<ProductionDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ProductionDump {
    pub lhs: String,
    pub label: String,
    pub rhs: Vec<String>,
}

pub const GRAMMAR_SCHEMA_VERSION: u32 = 1;

impl GrammarDump {
    pub fn new(grammar: &SimpleGrammar, start: &[NonTerm]) -> Self {
        GrammarDump {
            schema_version: GRAMMAR_SCHEMA_VERSION,
            start: start.iter().map(|x| x.to_string()).collect(),
            productions: grammar
                .iter()
                .map(|(lhs, label, rhs)| ProductionDump {
                    lhs: lhs.to_string(),
                    label: label.to_string(),
                    rhs: rhs.iter().map(|x| x.to_string()).collect(),
                })
                .collect(),
        }
    }

    /// One production per line, `start:` first.
    pub fn to_text(&self) -> String {
        let mut out = format!("start: {}\n", self.start.join(" "));
        for p in &self.productions {
            out.push_str(&format!("{} {} -> {}\n", p.lhs, p.label, p.rhs.join(" ")));
        }
        out
    }

    /// Rebuild a grammar and start word from a dump. Labels are parsed back
    /// from their rendered form only as opaque strings, so this is mainly a
    /// structural round-trip for tooling.
    pub fn parse_symbols(&self) -> Option<(Vec<NonTerm>, Vec<(NonTerm, String, Vec<NonTerm>)>)> {
        fn sym(s: &str) -> Option<NonTerm> {
            if s == "BOT" {
                return Some(NonTerm::Bot);
            }
            s.strip_prefix('X')?.parse().ok().map(NonTerm::X)
        }
        let start = self.start.iter().map(|s| sym(s)).collect::<Option<Vec<_>>>()?;
        let prods = self
            .productions
            .iter()
            .map(|p| {
                let lhs = sym(&p.lhs)?;
                let rhs = p.rhs.iter().map(|s| sym(s)).collect::<Option<Vec<_>>>()?;
                Some((lhs, p.label.clone(), rhs))
            })
            .collect::<Option<Vec<_>>>()?;
        Some((start, prods))
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

    pub(crate) fn tree_type() -> Type {
        ty("\\a:T . mu b:S . &{Leaf: Skip, Node: b;?a;b}")
    }

    #[test]
    fn word_of_skip_is_empty() {
        let mut b = GrammarBuilder::new();
        assert_eq!(b.word(&Type::skip()).unwrap(), vec![]);
    }

    #[test]
    fn word_of_end_hits_bot() {
        let mut b = GrammarBuilder::new();
        let w = b.word(&Type::end()).unwrap();
        assert_eq!(w.len(), 1);
        let prods = b.grammar().productions_of(w[0]).unwrap();
        assert_eq!(
            prods.get(&Label::ConstHead(TypeConst::End, 0)),
            Some(&vec![NonTerm::Bot])
        );
    }

    #[test]
    fn seq_concatenates() {
        let mut b = GrammarBuilder::new();
        let w = b.word(&ty("!a;?b;End")).unwrap();
        assert_eq!(w.len(), 3);
    }

    #[test]
    fn tree_grammar_has_ten_productions() {
        let mut b = GrammarBuilder::new();
        let w = b.word(&tree_type()).unwrap();
        assert_eq!(w.len(), 1);
        let g = b.grammar();
        assert_eq!(g.production_count(), 10);
        // X5-analogue: some symbol maps the bound variable to the empty word
        let var_prod = g
            .iter()
            .find(|(_, l, _)| matches!(l, Label::VarHead(VarName::Canonical(1), 0)));
        assert!(var_prod.is_some());
    }

    #[test]
    fn tree_norms_match_hand_fixpoint() {
        let mut b = GrammarBuilder::new();
        let w = b.word(&tree_type()).unwrap();
        let g = b.into_grammar();
        let norms = g.norms();
        assert_eq!(norms.get(&NonTerm::Bot), Some(&NormValue::Unnormed));
        // start symbol: lambda step then a choice that can exit in one move
        assert_eq!(g.word_norm(&norms, &w), NormValue::Finite(2));
        // the X3-analogue (&_2 of the unfolded body) has norm 3, and the
        // payload symbol norm 1
        let mut finite: Vec<u64> = norms
            .values()
            .filter_map(|n| match n {
                NormValue::Finite(n) => Some(*n),
                NormValue::Unnormed => None,
            })
            .collect();
        finite.sort();
        assert_eq!(finite, vec![1, 1, 1, 1, 2, 3]);
    }

    #[test]
    fn memo_collapses_alpha_variants() {
        // unrenamed alpha-variants share a symbol via the renamed memo key
        let mut b = GrammarBuilder::new();
        let w1 = b.word(&parse_type("\\a:S . a").unwrap()).unwrap();
        let w2 = b.word(&parse_type("\\b:S . b").unwrap()).unwrap();
        assert_eq!(w1, w2);
    }

    #[test]
    fn fragment_error_on_higher_kind_mu() {
        let mut b = GrammarBuilder::new();
        let t = ty("mu x:T=>T . \\a:T . {l: x a}");
        assert!(matches!(b.word(&t), Err(WordError::Fragment { .. })));
    }

    #[test]
    fn dump_roundtrips_through_json() {
        let mut b = GrammarBuilder::new();
        let w = b.word(&tree_type()).unwrap();
        let dump = GrammarDump::new(b.grammar(), &w);
        let json = serde_json::to_string(&dump).unwrap();
        let back: GrammarDump = serde_json::from_str(&json).unwrap();
        assert_eq!(dump, back);
        assert!(back.parse_symbols().is_some());
    }
}
