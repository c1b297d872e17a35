use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::KbError;
use crate::propmodel::ConceptId;

/// Directed is-a edges (member → class). Acyclic by construction.
#[derive(Clone, Debug, Default)]
pub struct ConceptClassGraph {
    parents: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
    /// Reflexive-transitive closure, computed once at load.
    ancestors: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
}

impl ConceptClassGraph {
    pub fn from_edges(edges: impl IntoIterator<Item = (ConceptId, ConceptId)>) -> Result<Self, KbError> {
        let mut parents: BTreeMap<ConceptId, BTreeSet<ConceptId>> = BTreeMap::new();
        for (member, class) in edges {
            parents.entry(class.clone()).or_default();
            parents.entry(member).or_default().insert(class);
        }
        if let Some(path) = find_cycle(&parents) {
            return Err(KbError::Cycle { path });
        }
        let mut ancestors = BTreeMap::new();
        for node in parents.keys() {
            let mut seen = BTreeSet::new();
            let mut stack = Vec::from([node.clone()]);
            while let Some(n) = stack.pop() {
                if seen.insert(n.clone()) {
                    if let Some(ps) = parents.get(&n) {
                        stack.extend(ps.iter().cloned());
                    }
                }
            }
            ancestors.insert(node.clone(), seen);
        }
        Ok(ConceptClassGraph { parents, ancestors })
    }

    /// True when `concept` equals `class` or reaches it through is-a edges.
    pub fn is_member(&self, concept: &ConceptId, class: &ConceptId) -> bool {
        concept == class
            || self
                .ancestors
                .get(concept)
                .is_some_and(|a| a.contains(class))
    }

    pub fn parents(&self, concept: &ConceptId) -> impl Iterator<Item = &ConceptId> {
        self.parents.get(concept).into_iter().flatten()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptId> {
        self.parents.keys()
    }

    /// Concepts with no outgoing is-a edge.
    pub fn is_root(&self, concept: &ConceptId) -> bool {
        self.parents.get(concept).is_some_and(BTreeSet::is_empty)
    }

    /// Every concept that reaches `class` (including `class` itself).
    pub fn members_of<'a>(&'a self, class: &'a ConceptId) -> impl Iterator<Item = &'a ConceptId> + 'a {
        self.ancestors
            .iter()
            .filter(move |(_, a)| a.contains(class))
            .map(|(c, _)| c)
    }
}

fn find_cycle(parents: &BTreeMap<ConceptId, BTreeSet<ConceptId>>) -> Option<Vec<ConceptId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: BTreeMap<&ConceptId, Mark> = BTreeMap::new();
    for start in parents.keys() {
        if marks.contains_key(start) {
            continue;
        }
        // Iterative DFS keeping the active path for cycle reporting.
        let mut path: Vec<&ConceptId> = Vec::new();
        let mut stack: Vec<(&ConceptId, Vec<&ConceptId>)> = Vec::new();
        marks.insert(start, Mark::Active);
        path.push(start);
        stack.push((start, parents[start].iter().collect()));
        while let Some((_, pending)) = stack.last_mut() {
            match pending.pop() {
                Some(next) => match marks.get(next) {
                    Some(Mark::Active) => {
                        let pos = path.iter().position(|n| *n == next).unwrap_or(0);
                        let mut cycle: Vec<ConceptId> = path[pos..].iter().map(|c| (*c).clone()).collect();
                        cycle.push(next.clone());
                        return Some(cycle);
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(next, Mark::Active);
                        path.push(next);
                        let children = parents.get(next).map(|s| s.iter().collect()).unwrap_or_default();
                        stack.push((next, children));
                    }
                },
                None => {
                    let (node, _) = stack.pop().expect("non-empty stack");
                    marks.insert(node, Mark::Done);
                    path.pop();
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use proptest::prelude::*;

    fn c(s: &str) -> ConceptId {
        ConceptId::normalized(s)
    }

    #[test]
    fn membership_is_reflexive_and_transitive() {
        let g = ConceptClassGraph::from_edges([
            (c("ceftriaxone"), c("antibiotics")),
            (c("antibiotics"), c("medication")),
        ])
        .unwrap();
        assert!(g.is_member(&c("ceftriaxone"), &c("ceftriaxone")));
        assert!(g.is_member(&c("ceftriaxone"), &c("medication")));
        assert!(!g.is_member(&c("medication"), &c("ceftriaxone")));
        assert!(g.is_member(&c("unregistered"), &c("unregistered")));
        assert!(g.is_root(&c("medication")));
    }

    #[test]
    fn two_cycle_is_rejected() {
        let err = ConceptClassGraph::from_edges([(c("a"), c("b")), (c("b"), c("a"))]).err().unwrap();
        match err {
            KbError::Cycle { path } => {
                assert_eq!(path.first(), path.last());
                assert!(path.len() == 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        // Random DAGs: edges only go from lower to higher index.
        #[test]
        fn closure_matches_brute_force_reachability(
            n in 2usize..50,
            raw_edges in prop::collection::vec((0usize..50, 0usize..50), 0..120),
        ) {
            let edges: Vec<(usize, usize)> = raw_edges
                .into_iter()
                .map(|(a, b)| (a % n, b % n))
                .filter(|(a, b)| a < b)
                .collect();
            let name = |i: usize| c(&format!("n{i}"));
            let g = ConceptClassGraph::from_edges(edges.iter().map(|&(a, b)| (name(a), name(b)))).unwrap();
            // Floyd–Warshall style reachability as the oracle.
            let mut reach = alloc::vec![alloc::vec![false; n]; n];
            for (i, row) in reach.iter_mut().enumerate() {
                row[i] = true;
            }
            for &(a, b) in &edges {
                reach[a][b] = true;
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        if reach[i][k] && reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(g.is_member(&name(i), &name(j)), reach[i][j], "{} -> {}", i, j);
                }
            }
        }

        #[test]
        fn any_back_edge_on_a_chain_is_a_cycle(n in 2usize..20, from in 0usize..20, to in 0usize..20) {
            let (hi, lo) = (from % n, to % n);
            prop_assume!(lo <= hi);
            let mut edges: Vec<(ConceptId, ConceptId)> =
                (0..n - 1).map(|i| (c(&format!("n{i}")), c(&format!("n{}", i + 1)))).collect();
            edges.push((c(&format!("n{hi}")), c(&format!("n{lo}"))));
            let is_cycle = matches!(ConceptClassGraph::from_edges(edges), Err(KbError::Cycle { .. }));
            prop_assert!(is_cycle);
        }
    }
}
