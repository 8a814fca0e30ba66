//! Bisimilarity of simple-grammar words.
//!
//! Two cooperating engines run under a shared node budget:
//!
//! - a *refuter*: plain breadth-first exploration of reachable word pairs.
//!   Any pair with diverging label sets yields a minimal, replayable
//!   distinguishing trace. If the pair space closes without divergence the
//!   refuter itself certifies bisimilarity.
//! - a *prover*: an expansion tree over nodes (finite sets of word pairs)
//!   with simplification rules: reflexive pairs are dropped, pairs in the
//!   congruence closure (concatenation plus transitivity, approximated by
//!   subword rewriting) of already-expanded pairs are dropped, and
//!   norm-guided prefix splitting spawns sibling branches. A branch that
//!   empties certifies bisimilarity via a finite self-bisimulation;
//!   divergence merely kills the branch.
//!
//! Decisive answers are sound; `Unknown` appears only on cap exhaustion.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::bisim::Verdict;
use crate::grammar::{NonTerm, NormValue, SimpleGrammar, Word};
use crate::lts::Label;

/// Default cap on processed pairs per query.
pub const DEFAULT_NODE_CAP: usize = 100_000;
/// Default cap on exploration depth.
pub const DEFAULT_DEPTH_CAP: usize = 1_000;

#[derive(Debug, Clone, Copy)]
pub struct GrammarCaps {
    pub node_cap: usize,
    pub depth_cap: usize,
}

impl Default for GrammarCaps {
    fn default() -> Self {
        GrammarCaps { node_cap: DEFAULT_NODE_CAP, depth_cap: DEFAULT_DEPTH_CAP }
    }
}

/// Everything after the first unnormed symbol of a word is unreachable:
/// the word has exactly the same transitions with the tail cut off.
/// Truncating keeps explored words from growing behind a dead prefix.
fn truncate_unnormed(norms: &BTreeMap<NonTerm, NormValue>, w: &mut Word) {
    if let Some(i) = w
        .iter()
        .position(|x| !matches!(norms.get(x), Some(NormValue::Finite(_))))
    {
        w.truncate(i + 1);
    }
}

/// Decide whether two words are bisimilar in `g`.
pub fn grammar_bisim(g: &SimpleGrammar, lhs: &Word, rhs: &Word, caps: GrammarCaps) -> Verdict {
    let norms = g.norms();
    let mut refuter = Refuter::new(g, &norms, lhs.clone(), rhs.clone());
    let mut prover = Prover::new(g, &norms, lhs.clone(), rhs.clone(), caps.depth_cap);
    let mut budget = caps.node_cap;
    let mut depth_hit = false;

    loop {
        match refuter.run(64.min(budget), caps.depth_cap, &mut budget) {
            RefuterRound::Refuted(trace) => return Verdict::NotBisimilar { trace },
            RefuterRound::Closed(size) => return Verdict::Bisimilar { certificate: size },
            RefuterRound::DepthCapped => depth_hit = true,
            RefuterRound::Working => {}
            RefuterRound::Idle => {}
        }
        match prover.run_one(&mut budget) {
            ProverRound::Proved(size) => return Verdict::Bisimilar { certificate: size },
            ProverRound::DepthCapped => depth_hit = true,
            ProverRound::Working | ProverRound::Idle => {}
        }
        if budget == 0 {
            return Verdict::Unknown { reason: "node-cap".into() };
        }
        if refuter.idle() && prover.idle() {
            // both engines stalled below their caps: only depth stops us
            return Verdict::Unknown {
                reason: if depth_hit { "depth-cap" } else { "node-cap" }.into(),
            };
        }
    }
}

// ---------------------------------------------------------------------------
// refuter
// ---------------------------------------------------------------------------

enum RefuterRound {
    Refuted(Vec<Label>),
    Closed(usize),
    DepthCapped,
    Working,
    Idle,
}

struct Refuter<'g> {
    g: &'g SimpleGrammar,
    norms: BTreeMap<NonTerm, NormValue>,
    // arena of explored pairs for trace reconstruction
    arena: Vec<(Option<(usize, Label)>, Word, Word)>,
    queue: VecDeque<(usize, usize)>, // (arena index, depth)
    visited: BTreeSet<(Word, Word)>,
    depth_capped: bool,
    done: bool,
}

impl<'g> Refuter<'g> {
    fn new(
        g: &'g SimpleGrammar,
        norms: &BTreeMap<NonTerm, NormValue>,
        mut lhs: Word,
        mut rhs: Word,
    ) -> Self {
        truncate_unnormed(norms, &mut lhs);
        truncate_unnormed(norms, &mut rhs);
        let arena = vec![(None, lhs, rhs)];
        Refuter {
            g,
            norms: norms.clone(),
            arena,
            queue: VecDeque::from([(0usize, 0usize)]),
            visited: BTreeSet::new(),
            depth_capped: false,
            done: false,
        }
    }

    fn idle(&self) -> bool {
        self.done || self.queue.is_empty()
    }

    fn trace_to(&self, idx: usize, last: Label) -> Vec<Label> {
        let mut labels = vec![last];
        let mut cur = idx;
        while let (Some((parent, label)), _, _) = &self.arena[cur] {
            labels.push(label.clone());
            cur = *parent;
        }
        labels.reverse();
        labels
    }

    fn run(&mut self, steps: usize, depth_cap: usize, budget: &mut usize) -> RefuterRound {
        if self.done {
            return RefuterRound::Idle;
        }
        for _ in 0..steps {
            if *budget == 0 {
                return RefuterRound::Working;
            }
            let Some((idx, depth)) = self.queue.pop_front() else {
                self.done = true;
                if self.depth_capped {
                    return RefuterRound::DepthCapped;
                }
                return RefuterRound::Closed(self.visited.len());
            };
            *budget -= 1;
            let (_, lhs, rhs) = self.arena[idx].clone();
            if lhs == rhs {
                continue;
            }
            if !self.visited.insert((lhs.clone(), rhs.clone())) {
                continue;
            }
            let ta = self.g.word_transitions(&lhs);
            let tb = self.g.word_transitions(&rhs);
            let la: BTreeSet<&Label> = ta.keys().collect();
            let lb: BTreeSet<&Label> = tb.keys().collect();
            if la != lb {
                let witness = la.symmetric_difference(&lb).next().expect("sets differ");
                return RefuterRound::Refuted(self.trace_to(idx, (*witness).clone()));
            }
            if depth >= depth_cap {
                self.depth_capped = true;
                continue;
            }
            for (label, wa) in &ta {
                let mut wa = wa.clone();
                let mut wb = tb[label].clone();
                truncate_unnormed(&self.norms, &mut wa);
                truncate_unnormed(&self.norms, &mut wb);
                self.arena.push((Some((idx, label.clone())), wa, wb));
                self.queue.push_back((self.arena.len() - 1, depth + 1));
            }
        }
        RefuterRound::Working
    }
}

// ---------------------------------------------------------------------------
// prover
// ---------------------------------------------------------------------------

enum ProverRound {
    Proved(usize),
    DepthCapped,
    Working,
    Idle,
}

#[derive(Clone)]
struct ProofBranch {
    node: Vec<(Word, Word)>,
    basis: Vec<(Word, Word)>,
    depth: usize,
}

struct Prover<'g> {
    g: &'g SimpleGrammar,
    norms: BTreeMap<NonTerm, NormValue>,
    branches: VecDeque<ProofBranch>,
    depth_cap: usize,
    depth_capped: bool,
}

const BRANCH_CAP: usize = 64;
const SPLIT_CANDIDATE_CAP: usize = 8;
const REWRITE_STEP_CAP: usize = 500;

impl<'g> Prover<'g> {
    fn new(
        g: &'g SimpleGrammar,
        norms: &BTreeMap<NonTerm, NormValue>,
        lhs: Word,
        rhs: Word,
        depth_cap: usize,
    ) -> Self {
        Prover {
            g,
            norms: norms.clone(),
            branches: VecDeque::from([ProofBranch {
                node: vec![(lhs, rhs)],
                basis: Vec::new(),
                depth: 0,
            }]),
            depth_cap,
            depth_capped: false,
        }
    }

    fn idle(&self) -> bool {
        self.branches.is_empty()
    }

    fn run_one(&mut self, budget: &mut usize) -> ProverRound {
        let Some(branch) = self.branches.pop_front() else {
            return ProverRound::Idle;
        };
        if *budget == 0 {
            self.branches.push_front(branch);
            return ProverRound::Working;
        }

        // simplification: dead tails truncate, common normed prefixes
        // cancel (sound because the grammar LTS is deterministic),
        // reflexive drop, congruence drop
        let mut kept: Vec<(Word, Word)> = Vec::new();
        for pair in &branch.node {
            let mut pair = pair.clone();
            truncate_unnormed(&self.norms, &mut pair.0);
            truncate_unnormed(&self.norms, &mut pair.1);
            let pair = self.strip_common_prefix(pair);
            if pair.0 == pair.1 {
                continue;
            }
            let mut rules: Vec<(Word, Word)> = Vec::new();
            for (u, v) in branch.basis.iter().chain(kept.iter()) {
                if let Some(rule) = orient(u, v) {
                    rules.push(rule);
                }
            }
            let nf_l = rewrite_nf(&rules, &pair.0);
            let nf_r = rewrite_nf(&rules, &pair.1);
            if nf_l == nf_r {
                continue;
            }
            if !kept.contains(&pair) {
                kept.push(pair);
            }
        }
        if kept.is_empty() {
            return ProverRound::Proved(branch.basis.len());
        }

        // norm-guided prefix splitting on the first eligible pair
        if let Some((i, siblings)) = self.try_split(&kept) {
            for replacement in siblings {
                if self.branches.len() >= BRANCH_CAP {
                    break;
                }
                let mut node = kept.clone();
                node.splice(i..=i, replacement);
                self.branches.push_back(ProofBranch {
                    node,
                    basis: branch.basis.clone(),
                    depth: branch.depth,
                });
            }
        }

        // expansion
        if branch.depth >= self.depth_cap {
            self.depth_capped = true;
            if self.branches.is_empty() {
                return ProverRound::DepthCapped;
            }
            return ProverRound::Working;
        }
        let mut child: Vec<(Word, Word)> = Vec::new();
        let mut alive = true;
        for (lhs, rhs) in &kept {
            if *budget > 0 {
                *budget -= 1;
            }
            let ta = self.g.word_transitions(lhs);
            let tb = self.g.word_transitions(rhs);
            let la: BTreeSet<&Label> = ta.keys().collect();
            let lb: BTreeSet<&Label> = tb.keys().collect();
            if la != lb {
                alive = false; // refutation is the refuter's job
                break;
            }
            for (label, wa) in &ta {
                let pair = (wa.clone(), tb[label].clone());
                if !child.contains(&pair) {
                    child.push(pair);
                }
            }
        }
        if alive {
            // the main expansion child is never dropped; only split
            // siblings fall under the branch cap
            let mut basis = branch.basis;
            basis.extend(kept);
            self.branches.push_back(ProofBranch { node: child, basis, depth: branch.depth + 1 });
        }
        ProverRound::Working
    }

    /// `X w ~ X w'` with `X` normed holds iff `w ~ w'`: determinism lets a
    /// norm-reducing trace of `X` cancel on both sides.
    fn strip_common_prefix(&self, pair: (Word, Word)) -> (Word, Word) {
        let (mut lhs, mut rhs) = pair;
        let mut i = 0;
        while i < lhs.len() && i < rhs.len() {
            let x = lhs[i];
            if x != rhs[i] || !matches!(self.norms.get(&x), Some(NormValue::Finite(_))) {
                break;
            }
            i += 1;
        }
        if i > 0 {
            lhs.drain(..i);
            rhs.drain(..i);
        }
        (lhs, rhs)
    }

    /// For a pair `X gamma ~ Y delta` with distinct normed heads, guess the
    /// suffix word relating the heads by walking norm-reducing transitions.
    /// Siblings are ordered by the guessed suffix, lowest norm first.
    fn try_split(&self, node: &[(Word, Word)]) -> Option<(usize, Vec<Vec<(Word, Word)>>)> {
        for (i, (lhs, rhs)) in node.iter().enumerate() {
            let (&x, gamma) = match lhs.split_first() {
                Some(p) => p,
                None => continue,
            };
            let (&y, delta) = match rhs.split_first() {
                Some(p) => p,
                None => continue,
            };
            if x == y || gamma.is_empty() && delta.is_empty() {
                continue;
            }
            let (nx, ny) = match (self.norms.get(&x), self.norms.get(&y)) {
                (Some(NormValue::Finite(nx)), Some(NormValue::Finite(ny))) => (*nx, *ny),
                _ => continue,
            };
            // arrange norm(x) <= norm(y); split Y ~ X beta
            let (short, short_tail, long, long_tail, flip) = if nx <= ny {
                (x, gamma, y, delta, false)
            } else {
                (y, delta, x, gamma, true)
            };
            let n_short = nx.min(ny);
            let candidates = self.norm_reduced_words(long, n_short);
            if candidates.is_empty() {
                continue;
            }
            let mut siblings = Vec::new();
            for beta in candidates {
                let head_pair = (vec![long], {
                    let mut w = vec![short];
                    w.extend(beta.iter().copied());
                    w
                });
                let mut lhs_tail = beta.clone();
                lhs_tail.extend_from_slice(long_tail);
                let tail_pair = if flip {
                    (lhs_tail, short_tail.to_vec())
                } else {
                    (short_tail.to_vec(), lhs_tail)
                };
                siblings.push(vec![head_pair, tail_pair]);
            }
            return Some((i, siblings));
        }
        None
    }

    /// All words reachable from `[start]` by exactly `steps` norm-reducing
    /// transitions, capped and sorted by norm then lexicographically.
    fn norm_reduced_words(&self, start: NonTerm, steps: u64) -> Vec<Word> {
        let mut frontier: Vec<Word> = vec![vec![start]];
        for _ in 0..steps {
            let mut next: Vec<Word> = Vec::new();
            for w in &frontier {
                let cur_norm = match self.g.word_norm(&self.norms, w) {
                    NormValue::Finite(n) => n,
                    NormValue::Unnormed => continue,
                };
                for succ in self.g.word_transitions(w).values() {
                    if let NormValue::Finite(n) = self.g.word_norm(&self.norms, succ) {
                        if n + 1 == cur_norm && !next.contains(succ) {
                            next.push(succ.clone());
                        }
                    }
                }
                if next.len() > SPLIT_CANDIDATE_CAP {
                    break;
                }
            }
            frontier = next;
            frontier.truncate(SPLIT_CANDIDATE_CAP);
            if frontier.is_empty() {
                break;
            }
        }
        frontier.sort_by_key(|w| {
            let n = match self.g.word_norm(&self.norms, w) {
                NormValue::Finite(n) => n,
                NormValue::Unnormed => u64::MAX,
            };
            (n, w.clone())
        });
        frontier
    }
}

/// Orient a basis pair into a rewrite rule, larger side first under the
/// (length, lexicographic) order; `None` for trivial pairs.
fn orient(u: &Word, v: &Word) -> Option<(Word, Word)> {
    match word_cmp(u, v) {
        std::cmp::Ordering::Greater => Some((u.clone(), v.clone())),
        std::cmp::Ordering::Less => Some((v.clone(), u.clone())),
        std::cmp::Ordering::Equal => None,
    }
}

fn word_cmp(u: &Word, v: &Word) -> std::cmp::Ordering {
    u.len().cmp(&v.len()).then_with(|| u.cmp(v))
}

/// Normalize a word by leftmost subword rewriting until no rule applies.
/// Each rule strictly decreases the (length, lex) order, so this ends.
fn rewrite_nf(rules: &[(Word, Word)], w: &Word) -> Word {
    let mut cur = w.clone();
    for _ in 0..REWRITE_STEP_CAP {
        let mut applied = false;
        for (lhs, rhs) in rules {
            if lhs.is_empty() {
                continue;
            }
            if let Some(pos) = find_subword(&cur, lhs) {
                let mut next = Vec::with_capacity(cur.len() - lhs.len() + rhs.len());
                next.extend_from_slice(&cur[..pos]);
                next.extend_from_slice(rhs);
                next.extend_from_slice(&cur[pos + lhs.len()..]);
                cur = next;
                applied = true;
                break;
            }
        }
        if !applied {
            break;
        }
    }
    cur
}

fn find_subword(haystack: &[NonTerm], needle: &[NonTerm]) -> Option<usize> {
    if needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&i| &haystack[i..i + needle.len()] == needle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::GrammarBuilder;
    use crate::parser::parse_type;
    use crate::rename::rename;
    use crate::syntax::Type;

    fn ty(src: &str) -> Type {
        rename(&parse_type(src).unwrap())
    }

    fn check(lhs: &str, rhs: &str) -> Verdict {
        let mut b = GrammarBuilder::new();
        let wl = b.word(&ty(lhs)).unwrap();
        let wr = b.word(&ty(rhs)).unwrap();
        grammar_bisim(b.grammar(), &wl, &wr, GrammarCaps::default())
    }

    #[test]
    fn monoid_axioms() {
        assert!(check("Skip;End", "End").is_bisimilar());
        assert!(check("End;(!a;End)", "End").is_bisimilar());
        assert!(check("(!a;?b);End", "!a;(?b;End)").is_bisimilar());
        assert!(check(
            "(&{Go: !a, Quit: ?b});End",
            "&{Go: !a;End, Quit: ?b;End}"
        )
        .is_bisimilar());
    }

    #[test]
    fn distinct_labels_refuted() {
        let v = check("!a;End", "?a;End");
        let Verdict::NotBisimilar { trace } = v else {
            panic!("expected refutation")
        };
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn tree_vs_unfolding() {
        // TreeC against a hand-unfolded body; exercises the congruence rule
        let tree = "\\a:T . mu b:S . &{Leaf: Skip, Node: b;?a;b}";
        let unfolded = "\\a:T . &{Leaf: Skip, Node: (mu b:S . &{Leaf: Skip, Node: b;?a;b});?a;(mu b:S . &{Leaf: Skip, Node: b;?a;b})}";
        let v = check(tree, unfolded);
        assert!(v.is_bisimilar(), "{v}");
    }

    #[test]
    fn deep_difference_found() {
        let v = check(
            "mu x:S . &{A: !{};x, B: End}",
            "mu x:S . &{A: !{};&{A: !{};x, B: ?{};End}, B: End}",
        );
        assert!(v.is_not_bisimilar(), "{v}");
    }

    #[test]
    fn unnormed_loops_close() {
        let v = check("mu x:S . !{};x", "mu x:S . !{};!{};x");
        assert!(v.is_bisimilar(), "{v}");
    }
}
