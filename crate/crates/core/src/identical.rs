//! Identically-ordered agents: SD-EF1 per day and overall at once.
//!
//! Cut the common ordering into blocks of `n` consecutive goods twice, once
//! within each day (`P1`) and once over all goods (`P2`). An allocation
//! giving every agent at most one good of every block is SD-EF1 on each day
//! and overall. After padding both families to full blocks with dummy goods,
//! the block incidence graph is `n`-regular and bipartite, so it splits into
//! `n` perfect matchings; each matching is one agent's bundle.

use crate::error::{Error, Result};
use crate::model::{common_ordering, Allocation, GoodId, TemporalInstance};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalFamilies {
    pub p1: Vec<Vec<GoodId>>,
    pub p2: Vec<Vec<GoodId>>,
    /// Zero-valued padding goods, all on the synthetic day `k + 1`.
    pub dummies: Vec<GoodId>,
}

impl IntervalFamilies {
    pub fn is_dummy(&self, good: GoodId) -> bool {
        self.dummies.binary_search(&good).is_ok()
    }
}

/// Requires an ordering of all goods consistent with every agent; agents may
/// still differ in which goods they are indifferent between.
pub fn build_interval_families(instance: &TemporalInstance) -> Result<IntervalFamilies> {
    let order = common_ordering(instance)
        .ok_or_else(|| Error::invalid("agents do not share a common ordering of the goods"))?;
    let n = instance.n();
    let mut p1 = Vec::new();
    for t in 1..=instance.k() {
        let day: Vec<GoodId> = order.iter().copied().filter(|g| g.day == t).collect();
        p1.extend(day.chunks(n).map(<[GoodId]>::to_vec));
    }
    let mut p2: Vec<Vec<GoodId>> = order.chunks(n).map(<[GoodId]>::to_vec).collect();
    assert!(
        p1.len() >= p2.len(),
        "per-day blocks ({}) fewer than overall blocks ({})",
        p1.len(),
        p2.len()
    );
    p2.resize(p1.len(), Vec::new());

    let deficit = n * p1.len() - instance.m();
    let dummy_day = instance.k() + 1;
    let dummies: Vec<GoodId> = (0..deficit).map(|j| GoodId::new(dummy_day, j)).collect();
    let slots = |family: &[Vec<GoodId>]| -> Vec<usize> {
        family
            .iter()
            .enumerate()
            .flat_map(|(s, set)| std::iter::repeat_n(s, n - set.len()))
            .collect()
    };
    let (s1, s2) = (slots(&p1), slots(&p2));
    for ((d, a), b) in dummies.iter().zip(s1).zip(s2) {
        p1[a].push(*d);
        p2[b].push(*d);
    }
    Ok(IntervalFamilies { p1, p2, dummies })
}

/// Bipartite multigraph: left vertices are `P1` blocks, right vertices `P2`
/// blocks, one edge per good.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceGraph {
    pub left: usize,
    pub right: usize,
    /// `(left, right, good)`
    pub edges: Vec<(usize, usize, GoodId)>,
}

impl IncidenceGraph {
    pub fn from_families(families: &IntervalFamilies) -> Self {
        let mut side2 = std::collections::BTreeMap::new();
        for (r, set) in families.p2.iter().enumerate() {
            for g in set {
                side2.insert(*g, r);
            }
        }
        let mut edges: Vec<(usize, usize, GoodId)> = families
            .p1
            .iter()
            .enumerate()
            .flat_map(|(l, set)| set.iter().map(move |g| (l, g)))
            .map(|(l, g)| (l, side2[g], *g))
            .collect();
        edges.sort_by_key(|e| e.2);
        IncidenceGraph {
            left: families.p1.len(),
            right: families.p2.len(),
            edges,
        }
    }
}

/// Splits an `n`-regular bipartite multigraph into `n` perfect matchings,
/// each given as the goods on its edges in `GoodId` order.
pub fn regular_bipartite_decompose(graph: &IncidenceGraph, n: usize) -> Result<Vec<Vec<GoodId>>> {
    if graph.left != graph.right {
        return Err(Error::invalid(format!(
            "sides differ in size ({} vs {})",
            graph.left, graph.right
        )));
    }
    let mut degree_l = vec![0usize; graph.left];
    let mut degree_r = vec![0usize; graph.right];
    for (l, r, _) in &graph.edges {
        if *l >= graph.left || *r >= graph.right {
            return Err(Error::invalid("edge endpoint out of range"));
        }
        degree_l[*l] += 1;
        degree_r[*r] += 1;
    }
    if let Some(v) = degree_l.iter().chain(&degree_r).find(|d| **d != n) {
        return Err(Error::invalid(format!(
            "graph is not {n}-regular (found degree {v})"
        )));
    }

    let mut alive = vec![true; graph.edges.len()];
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); graph.left];
    let mut order: Vec<usize> = (0..graph.edges.len()).collect();
    order.sort_by_key(|&e| graph.edges[e].2);
    for e in order {
        adjacency[graph.edges[e].0].push(e);
    }

    let mut matchings = Vec::with_capacity(n);
    for _ in 0..n {
        // match_r[r] = edge currently matching right vertex r
        let mut match_r: Vec<Option<usize>> = vec![None; graph.right];
        for l in 0..graph.left {
            let mut seen = vec![false; graph.right];
            let found = augment(l, graph, &adjacency, &alive, &mut match_r, &mut seen);
            assert!(found, "regular bipartite graph without a perfect matching");
        }
        let mut goods: Vec<GoodId> = match_r
            .iter()
            .map(|e| {
                let e = e.expect("perfect matching covers the right side");
                alive[e] = false;
                graph.edges[e].2
            })
            .collect();
        goods.sort();
        matchings.push(goods);
    }
    Ok(matchings)
}

fn augment(
    l: usize,
    graph: &IncidenceGraph,
    adjacency: &[Vec<usize>],
    alive: &[bool],
    match_r: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for &e in &adjacency[l] {
        if !alive[e] {
            continue;
        }
        let r = graph.edges[e].1;
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let free = match match_r[r] {
            None => true,
            Some(prev) => augment(graph.edges[prev].0, graph, adjacency, alive, match_r, seen),
        };
        if free {
            match_r[r] = Some(e);
            return true;
        }
    }
    false
}

/// SD-EF1 per day and SD-EF1 overall. Agent `i` receives the real goods of
/// the `i`-th extracted matching.
pub fn allocate_identical_orderings(instance: &TemporalInstance) -> Result<Allocation> {
    Ok(allocate_with_families(instance)?.0)
}

pub fn allocate_with_families(
    instance: &TemporalInstance,
) -> Result<(Allocation, IntervalFamilies)> {
    let families = build_interval_families(instance)?;
    let graph = IncidenceGraph::from_families(&families);
    let matchings = regular_bipartite_decompose(&graph, instance.n())
        .expect("padded interval families give a regular graph");
    let mut allocation = Allocation::new(instance.n());
    for (agent, goods) in matchings.iter().enumerate() {
        for g in goods.iter().filter(|g| !families.is_dummy(**g)) {
            allocation.assign(*g, agent);
        }
    }
    Ok((allocation, families))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{check, check_temporal, Predicate, Scope};

    fn chain(n: usize, days: &[&[i64]]) -> TemporalInstance {
        TemporalInstance::from_integers(
            n,
            days.iter()
                .map(|d| d.iter().map(|v| vec![*v; n]).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_day_families_coincide() {
        let inst = chain(2, &[&[4, 3, 2, 1]]);
        let f = build_interval_families(&inst).unwrap();
        assert_eq!(f.p1, f.p2);
        assert!(f.dummies.is_empty());
    }

    #[test]
    fn two_days_of_three_need_two_dummies() {
        let inst = chain(2, &[&[6, 5, 4], &[3, 2, 1]]);
        let f = build_interval_families(&inst).unwrap();
        assert_eq!(f.p1.len(), 4);
        assert_eq!(f.p2.len(), 4);
        assert_eq!(f.dummies.len(), 2);
        assert!(f.p1.iter().chain(&f.p2).all(|s| s.len() == 2));
        assert!(f.dummies.iter().all(|d| d.day == 3));
    }

    #[test]
    fn twelve_agents_four_days() {
        let day: &[i64] = &[6, 5, 4, 3, 2, 1];
        let inst = chain(12, &[day; 4]);
        let f = build_interval_families(&inst).unwrap();
        assert_eq!(f.p1.len(), 4);
        assert_eq!(f.dummies.len(), 48 - 24);
    }

    #[test]
    fn four_cycle_splits_into_alternating_edges() {
        let g = |j| GoodId::new(1, j);
        let graph = IncidenceGraph {
            left: 2,
            right: 2,
            edges: vec![(0, 0, g(0)), (0, 1, g(1)), (1, 0, g(2)), (1, 1, g(3))],
        };
        let mut m = regular_bipartite_decompose(&graph, 2).unwrap();
        m.sort();
        assert_eq!(m, vec![vec![g(0), g(3)], vec![g(1), g(2)]]);
        assert!(regular_bipartite_decompose(&graph, 1).is_err());
    }

    #[test]
    fn single_day_values_4321() {
        let inst = chain(2, &[&[4, 3, 2, 1]]);
        let a = allocate_identical_orderings(&inst).unwrap();
        for b in a.bundles() {
            assert_eq!(b.iter().filter(|g| g.index < 2).count(), 1);
            assert_eq!(b.iter().filter(|g| g.index >= 2).count(), 1);
        }
        assert!(check(&inst, &a, &inst.all_goods(), Predicate::SdEf1)
            .unwrap()
            .passed());
    }

    #[test]
    fn one_day_of_n_goods_is_a_permutation() {
        let inst = chain(4, &[&[1, 2, 3, 4]]);
        let a = allocate_identical_orderings(&inst).unwrap();
        assert!(a.bundles().iter().all(|b| b.len() == 1));
    }

    #[test]
    fn rejects_crossed_orderings() {
        let inst = TemporalInstance::from_integers(2, vec![vec![vec![2, 1], vec![1, 2]]]).unwrap();
        assert!(allocate_identical_orderings(&inst).is_err());
    }

    #[test]
    fn per_day_and_overall() {
        let inst = chain(3, &[&[9, 1, 5, 5], &[7, 3], &[8, 2, 2, 6, 4]]);
        let a = allocate_identical_orderings(&inst).unwrap();
        assert!(check_temporal(&inst, &a, Predicate::SdEf1, &Scope::PerDay)
            .unwrap()
            .passed());
        assert!(check(&inst, &a, &inst.all_goods(), Predicate::SdEf1)
            .unwrap()
            .passed());
    }
}
