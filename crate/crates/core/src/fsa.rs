//! Finite-state fast path for type equivalence.
//!
//! Types whose reachable LTS fragment closes within a state cap get a
//! deterministic finite automaton; equivalence of two such automata is then
//! decided exactly by a union-find pairing in near-linear time. Types with
//! genuinely context-free behaviour fail to close and fall back to the
//! grammar backend.

use std::collections::{BTreeMap, VecDeque};

use crate::bisim::Verdict;
use crate::lts::{transitions, Label};
use crate::rename::rename;
use crate::syntax::Type;

/// Default bound on the reachable state set.
pub const DEFAULT_FSA_CAP: usize = 4096;

/// A deterministic automaton over transition labels. States are renamed
/// types; the transition map of a state is total on its listed labels only.
#[derive(Debug, Clone)]
pub struct Fsa {
    pub states: Vec<Type>,
    pub delta: Vec<BTreeMap<Label, usize>>,
    pub initial: usize,
}

/// Explore the LTS from `t`, memoizing states up to renaming. `None` when
/// the reachable set does not close within `cap` states (or normalization
/// diverges, which only arrow-kind recursion can cause).
pub fn build_fsa(t: &Type, cap: usize) -> Option<Fsa> {
    let root = rename(t);
    let mut states = vec![root.clone()];
    let mut index: BTreeMap<Type, usize> = BTreeMap::from([(root, 0)]);
    let mut delta: Vec<BTreeMap<Label, usize>> = vec![BTreeMap::new()];
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let trans = transitions(&states[i].clone()).ok()?;
        for (label, succ) in trans {
            let succ = rename(&succ);
            let j = match index.get(&succ) {
                Some(j) => *j,
                None => {
                    if states.len() >= cap {
                        return None;
                    }
                    states.push(succ.clone());
                    delta.push(BTreeMap::new());
                    index.insert(succ, states.len() - 1);
                    queue.push_back(states.len() - 1);
                    states.len() - 1
                }
            };
            delta[i].insert(label, j);
        }
    }
    Some(Fsa { states, delta, initial: 0 })
}

/// Decide bisimilarity of two deterministic automata by breadth-first
/// pairing with union-find. Never returns `Unknown`.
pub fn fsa_bisim(a: &Fsa, b: &Fsa) -> Verdict {
    let offset = a.states.len();
    let mut uf = UnionFind::new(offset + b.states.len());
    // arena of visited pairs for trace reconstruction
    let mut arena: Vec<(Option<(usize, Label)>, usize, usize)> =
        vec![(None, a.initial, b.initial)];
    let mut queue = VecDeque::from([0usize]);
    let mut joined = 0usize;
    while let Some(idx) = queue.pop_front() {
        let (_, sa, sb) = arena[idx].clone();
        if uf.find(sa) == uf.find(offset + sb) {
            continue;
        }
        let ta = &a.delta[sa];
        let tb = &b.delta[sb];
        if !ta.keys().eq(tb.keys()) {
            let witness = ta
                .keys()
                .find(|l| !tb.contains_key(*l))
                .or_else(|| tb.keys().find(|l| !ta.contains_key(*l)))
                .expect("label sets differ");
            let mut trace = vec![witness.clone()];
            let mut cur = idx;
            while let (Some((parent, label)), _, _) = &arena[cur] {
                trace.push(label.clone());
                cur = *parent;
            }
            trace.reverse();
            return Verdict::NotBisimilar { trace };
        }
        uf.union(sa, offset + sb);
        joined += 1;
        for (label, na) in ta {
            let nb = tb[label];
            arena.push((Some((idx, label.clone())), *na, nb));
            queue.push_back(arena.len() - 1);
        }
    }
    Verdict::Bisimilar { certificate: joined }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}
