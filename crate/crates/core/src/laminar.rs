//! Laminar set families and EF1 on every member of one, for two agents.
//!
//! A complete family is a tree rooted at `M` in which every non-leaf set is
//! partitioned by its children. Sets are processed bottom-up; each produces
//! a cancelling pair of EF1 allocations by envy-balancing its children's
//! pairs, and each leaf starts from an opposite SD-EF1 pair.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{prefix_goods, Allocation, AllocationPair, GoodSet, TemporalInstance};
use crate::two_agents::{balance, opposite_sdef1_pair};

/// Non-empty sets, any two of which are disjoint or nested.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LaminarFamily {
    sets: Vec<GoodSet>,
}

impl LaminarFamily {
    /// Duplicates and empty sets are dropped; order is canonicalised.
    pub fn new(sets: impl IntoIterator<Item = GoodSet>) -> Result<Self> {
        let mut sets: Vec<GoodSet> = sets.into_iter().filter(|s| !s.is_empty()).collect();
        sets.sort();
        sets.dedup();
        for (a, s) in sets.iter().enumerate() {
            for t in &sets[a + 1..] {
                let meet = s.intersection(t).count();
                if meet != 0 && meet != s.len() && meet != t.len() {
                    return Err(Error::invalid(format!(
                        "sets {} and {} overlap without nesting",
                        show(s),
                        show(t)
                    )));
                }
            }
        }
        Ok(LaminarFamily { sets })
    }

    pub fn sets(&self) -> &[GoodSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn contains(&self, set: &GoodSet) -> bool {
        self.sets.binary_search(set).is_ok()
    }

    /// Members strictly contained in `set`.
    pub fn descendants(&self, set: &GoodSet) -> Vec<&GoodSet> {
        self.sets
            .iter()
            .filter(|s| s.len() < set.len() && s.is_subset(set))
            .collect()
    }

    /// Maximal members strictly contained in `set`, by smallest good.
    pub fn children(&self, set: &GoodSet) -> Vec<GoodSet> {
        let below = self.descendants(set);
        let mut children: Vec<GoodSet> = below
            .iter()
            .filter(|s| !below.iter().any(|t| t.len() > s.len() && s.is_subset(t)))
            .map(|s| (*s).clone())
            .collect();
        children.sort_by_key(|s| *s.iter().next().unwrap());
        children
    }

    /// Longest chain of strict inclusions.
    pub fn depth(&self) -> usize {
        fn go(f: &LaminarFamily, s: &GoodSet) -> usize {
            1 + f.children(s).iter().map(|c| go(f, c)).max().unwrap_or(0)
        }
        self.sets
            .iter()
            .filter(|s| {
                !self
                    .sets
                    .iter()
                    .any(|t| t.len() > s.len() && s.is_subset(t))
            })
            .map(|root| go(self, root))
            .max()
            .unwrap_or(0)
    }

    /// Every day, plus every prefix of days.
    pub fn per_day_and_prefixes(instance: &TemporalInstance) -> Self {
        let days = (1..=instance.k()).map(|t| instance.day_set(t));
        let prefixes = (1..=instance.k()).map(|t| prefix_goods(instance, t).expect("day in range"));
        LaminarFamily::new(days.chain(prefixes)).expect("days and prefixes are laminar")
    }
}

fn show(set: &GoodSet) -> String {
    let inner: Vec<String> = set.iter().map(ToString::to_string).collect();
    format!("{{{}}}", inner.join(", "))
}

/// Adds `ground` and, for every set whose descendants cover only part of
/// it, the uncovered remainder.
pub fn complete_family(family: &LaminarFamily, ground: &GoodSet) -> Result<LaminarFamily> {
    if let Some(s) = family.sets.iter().find(|s| !s.is_subset(ground)) {
        return Err(Error::invalid(format!(
            "{} is not within the ground set",
            show(s)
        )));
    }
    let mut with_root = family.sets.clone();
    with_root.push(ground.clone());
    let with_root = LaminarFamily::new(with_root)?;
    let mut sets = with_root.sets.clone();
    for s in &with_root.sets {
        let covered: GoodSet = with_root
            .descendants(s)
            .into_iter()
            .flatten()
            .copied()
            .collect();
        if !covered.is_empty() && covered.len() < s.len() {
            sets.push(s.difference(&covered).copied().collect());
        }
    }
    let completed = LaminarFamily::new(sets)?;
    assert!(
        ground.is_empty() || completed.len() < 2 * ground.len(),
        "completed family exceeds 2|M| - 1 members"
    );
    Ok(completed)
}

/// Post-order of the family's forest: every set after all its descendants,
/// siblings by smallest good.
pub fn topological_order(family: &LaminarFamily) -> Vec<GoodSet> {
    fn visit(f: &LaminarFamily, s: &GoodSet, out: &mut Vec<GoodSet>) {
        for c in f.children(s) {
            visit(f, &c, out);
        }
        out.push(s.clone());
    }
    let mut roots: Vec<&GoodSet> = family
        .sets
        .iter()
        .filter(|s| {
            !family
                .sets
                .iter()
                .any(|t| t.len() > s.len() && s.is_subset(t))
        })
        .collect();
    roots.sort_by_key(|s| *s.iter().next().unwrap());
    let mut out = Vec::with_capacity(family.len());
    for r in roots {
        visit(family, r, &mut out);
    }
    out
}

/// A cancelling pair of EF1 allocations of `set`. For a leaf (empty
/// `partition`) this is the opposite SD-EF1 pair; otherwise the children's
/// pairs are envy-balanced and both `F ∪ S` and `F ∪ SWAP(S)` are returned.
pub fn envy_balancing_pp(
    instance: &TemporalInstance,
    set: &GoodSet,
    partition: &[GoodSet],
    pairs: &[AllocationPair],
) -> Result<AllocationPair> {
    if partition.is_empty() {
        return opposite_sdef1_pair(instance, set);
    }
    if partition.len() != pairs.len() {
        return Err(Error::invalid(format!(
            "{} child sets but {} pairs",
            partition.len(),
            pairs.len()
        )));
    }
    let mut covered = GoodSet::new();
    for child in partition {
        if !child.is_subset(set) || child.iter().any(|g| !covered.insert(*g)) {
            return Err(Error::invalid(format!(
                "child {} does not fit a disjoint partition of the set",
                show(child)
            )));
        }
    }
    if covered != *set {
        return Err(Error::invalid("child sets do not cover the set"));
    }
    let names: Vec<String> = partition
        .iter()
        .map(|c| format!("child set {}", show(c)))
        .collect();
    for ((child, pair), name) in partition.iter().zip(pairs).zip(&names) {
        if pair.domain() != *child {
            return Err(Error::invalid(format!(
                "the pair for {name} allocates other goods"
            )));
        }
    }
    let balanced = balance(instance, pairs, &names)?;
    AllocationPair::new(balanced.chosen, balanced.swapped)
}

/// EF1 on every member of `family` (and of its completion).
pub fn allocate_laminar(instance: &TemporalInstance, family: &LaminarFamily) -> Result<Allocation> {
    Ok(allocate_laminar_pair(instance, family)?.first)
}

/// Both allocations of the root's cancelling pair.
pub fn allocate_laminar_pair(
    instance: &TemporalInstance,
    family: &LaminarFamily,
) -> Result<AllocationPair> {
    if instance.n() != 2 {
        return Err(Error::invalid(format!(
            "laminar balancing is for two agents, the instance has {}",
            instance.n()
        )));
    }
    instance.check_goods(family.sets.iter().flatten())?;
    let ground = instance.all_goods();
    let completed = complete_family(family, &ground)?;
    let mut pairs: BTreeMap<GoodSet, AllocationPair> = BTreeMap::new();
    for set in topological_order(&completed) {
        let children = completed.children(&set);
        let child_pairs: Vec<AllocationPair> = children.iter().map(|c| pairs[c].clone()).collect();
        let pair = envy_balancing_pp(instance, &set, &children, &child_pairs)?;
        pairs.insert(set, pair);
    }
    Ok(pairs.remove(&ground).expect("root is processed last"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::{check, check_temporal, Predicate, Scope};
    use crate::model::GoodId;

    fn g(day: usize, index: usize) -> GoodId {
        GoodId::new(day, index)
    }

    fn three_days() -> TemporalInstance {
        TemporalInstance::from_integers(
            2,
            vec![
                vec![vec![5, 1], vec![2, 2]],
                vec![vec![3, 4], vec![1, 6]],
                vec![vec![4, 4], vec![2, 1], vec![1, 1]],
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_crossing_sets() {
        let a = GoodSet::from([g(1, 0), g(1, 1)]);
        let b = GoodSet::from([g(1, 1), g(1, 2)]);
        let err = LaminarFamily::new(vec![a, b]).unwrap_err();
        assert!(err.to_string().contains("overlap"));
    }

    #[test]
    fn completion_examples() {
        let m = GoodSet::from([g(1, 0), g(1, 1)]);
        let empty = LaminarFamily::new(Vec::new()).unwrap();
        assert_eq!(
            complete_family(&empty, &m).unwrap().sets(),
            std::slice::from_ref(&m)
        );

        let single = LaminarFamily::new(vec![GoodSet::from([g(1, 0)])]).unwrap();
        let done = complete_family(&single, &m).unwrap();
        assert_eq!(done.len(), 3);
        assert!(done.contains(&GoodSet::from([g(1, 1)])));
        assert_eq!(complete_family(&done, &m).unwrap(), done);
    }

    #[test]
    fn day_prefix_family_is_complete_and_ordered() {
        let inst = three_days();
        let family = LaminarFamily::per_day_and_prefixes(&inst);
        let m = inst.all_goods();
        assert_eq!(complete_family(&family, &m).unwrap(), family);
        let d = |t| inst.day_set(t);
        let d12: GoodSet = d(1).union(&d(2)).copied().collect();
        assert_eq!(topological_order(&family), vec![d(1), d(2), d12, d(3), m]);
        assert_eq!(family.depth(), 3);
    }

    #[test]
    fn chain_is_innermost_first() {
        let inner = GoodSet::from([g(1, 0)]);
        let mid = GoodSet::from([g(1, 0), g(1, 1)]);
        let outer = GoodSet::from([g(1, 0), g(1, 1), g(1, 2)]);
        let f = LaminarFamily::new(vec![outer.clone(), inner.clone(), mid.clone()]).unwrap();
        assert_eq!(topological_order(&f), vec![inner, mid, outer]);
    }

    #[test]
    fn leaf_of_one_good() {
        let inst = TemporalInstance::from_integers(2, vec![vec![vec![1, 1]]]).unwrap();
        let pair = envy_balancing_pp(&inst, &inst.all_goods(), &[], &[]).unwrap();
        assert_eq!(pair.first.bundle(0).len(), 1);
        assert_eq!(pair.second.bundle(1).len(), 1);
    }

    #[test]
    fn ef_children_give_identical_outputs() {
        let inst = TemporalInstance::from_integers(
            2,
            vec![vec![vec![2, 1], vec![1, 2], vec![3, 1], vec![1, 3]]],
        )
        .unwrap();
        let a = GoodSet::from([g(1, 0), g(1, 1)]);
        let b = GoodSet::from([g(1, 2), g(1, 3)]);
        let pa = opposite_sdef1_pair(&inst, &a).unwrap();
        let pb = opposite_sdef1_pair(&inst, &b).unwrap();
        let out = envy_balancing_pp(&inst, &inst.all_goods(), &[a, b], &[pa, pb]).unwrap();
        assert_eq!(out.first, out.second);
    }

    #[test]
    fn fig_family_gives_both_temporal_guarantees() {
        let inst = three_days();
        let a = allocate_laminar(&inst, &LaminarFamily::per_day_and_prefixes(&inst)).unwrap();
        assert!(check_temporal(&inst, &a, Predicate::Ef1, &Scope::PerDay)
            .unwrap()
            .passed());
        assert!(
            check_temporal(&inst, &a, Predicate::Ef1, &Scope::UpToEachDay)
                .unwrap()
                .passed()
        );
    }

    #[test]
    fn two_level_categories() {
        // three categories of three goods each, nested under the whole set
        let inst = TemporalInstance::from_integers(
            2,
            vec![
                vec![vec![5, 3], vec![4, 4], vec![1, 2]],
                vec![vec![2, 2], vec![7, 1], vec![3, 3]],
                vec![vec![1, 6], vec![2, 2], vec![4, 5]],
            ],
        )
        .unwrap();
        let family = LaminarFamily::new((1..=3).map(|t| inst.day_set(t))).unwrap();
        let pair = allocate_laminar_pair(&inst, &family).unwrap();
        let completed = complete_family(&family, &inst.all_goods()).unwrap();
        for member in pair.members() {
            for s in completed.sets() {
                assert!(check(&inst, member, s, Predicate::Ef1).unwrap().passed());
            }
        }
    }

    #[test]
    fn laminar_needs_two_agents() {
        let inst = TemporalInstance::from_integers(3, vec![vec![vec![1, 1, 1]]]).unwrap();
        let family = LaminarFamily::new(Vec::new()).unwrap();
        assert!(allocate_laminar(&inst, &family).is_err());
    }
}
