//! Instances, valuations, preference orderings and allocations.
//!
//! Agents are `0..n` internally; every document and report shown to users
//! numbers them from 1. Days are numbered from 1 everywhere, matching
//! [`GoodId::day`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

/// Exact non-negative utility value.
pub type Rational = num_rational::BigRational;

/// 0-based agent index.
pub type AgentId = usize;

pub type GoodSet = BTreeSet<GoodId>;

/// A good, identified by its arrival day (1-based) and its position within
/// that day (0-based).
///
/// The derived `Ord` (day, then index) is the global tiebreak shared by all
/// agents when their valuations do not separate two goods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GoodId {
    pub day: usize,
    pub index: usize,
}

impl GoodId {
    pub const fn new(day: usize, index: usize) -> Self {
        GoodId { day, index }
    }
}

impl fmt::Display for GoodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}#{}", self.day, self.index)
    }
}

/// One good as supplied to [`TemporalInstance::new`]: a label and one value
/// per agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoodSpec {
    pub label: String,
    pub values: Vec<Rational>,
}

impl GoodSpec {
    pub fn new(label: impl Into<String>, values: Vec<Rational>) -> Self {
        GoodSpec {
            label: label.into(),
            values,
        }
    }
}

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Agents, day-partitioned goods and additive valuations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalInstance {
    n: usize,
    day_sizes: Vec<usize>,
    offsets: Vec<usize>,
    labels: Vec<String>,
    /// `values[agent][flat good index]`
    values: Vec<Vec<Rational>>,
}

impl TemporalInstance {
    pub fn new(n: usize, days: Vec<Vec<GoodSpec>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation(
                "an instance needs at least one agent".into(),
            ));
        }
        if days.is_empty() {
            return Err(Error::Validation(
                "an instance needs at least one day".into(),
            ));
        }
        let mut day_sizes = Vec::with_capacity(days.len());
        let mut offsets = Vec::with_capacity(days.len());
        let mut labels = Vec::new();
        let mut values = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for (t, day) in days.into_iter().enumerate() {
            if day.is_empty() {
                return Err(Error::Validation(format!("day {} has no goods", t + 1)));
            }
            offsets.push(labels.len());
            day_sizes.push(day.len());
            for good in day {
                if good.values.len() != n {
                    return Err(Error::Validation(format!(
                        "good {:?} has {} values, expected one per agent ({})",
                        good.label,
                        good.values.len(),
                        n
                    )));
                }
                if let Some(agent) = good.values.iter().position(|v| v.is_negative()) {
                    return Err(Error::Validation(format!(
                        "good {:?} has a negative value for agent {}",
                        good.label,
                        agent + 1
                    )));
                }
                if !seen.insert(good.label.clone()) {
                    return Err(Error::Validation(format!(
                        "duplicate good label {:?}",
                        good.label
                    )));
                }
                for (agent, v) in good.values.into_iter().enumerate() {
                    values[agent].push(v);
                }
                labels.push(good.label);
            }
        }
        Ok(TemporalInstance {
            n,
            day_sizes,
            offsets,
            labels,
            values,
        })
    }

    /// Builds an instance from `days[t][j][agent]` values with generated
    /// labels `g{t}.{j}` (both 1-based).
    pub fn from_values(n: usize, days: Vec<Vec<Vec<Rational>>>) -> Result<Self> {
        let days = days
            .into_iter()
            .enumerate()
            .map(|(t, day)| {
                day.into_iter()
                    .enumerate()
                    .map(|(j, values)| GoodSpec::new(format!("g{}.{}", t + 1, j + 1), values))
                    .collect()
            })
            .collect();
        Self::new(n, days)
    }

    /// Integer-valued convenience constructor; `days[t][j][agent]`.
    pub fn from_integers(n: usize, days: Vec<Vec<Vec<i64>>>) -> Result<Self> {
        let days = days
            .into_iter()
            .map(|day| {
                day.into_iter()
                    .map(|good| good.into_iter().map(int).collect())
                    .collect()
            })
            .collect();
        Self::from_values(n, days)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of days.
    pub fn k(&self) -> usize {
        self.day_sizes.len()
    }

    /// Total number of goods.
    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn day_len(&self, day: usize) -> usize {
        self.day_sizes[day - 1]
    }

    pub fn day_sizes(&self) -> &[usize] {
        &self.day_sizes
    }

    /// Goods of `day` (1-based) in index order.
    pub fn day(&self, day: usize) -> impl Iterator<Item = GoodId> + '_ {
        (0..self.day_sizes[day - 1]).map(move |j| GoodId::new(day, j))
    }

    pub fn day_set(&self, day: usize) -> GoodSet {
        self.day(day).collect()
    }

    /// All goods in global order.
    pub fn goods(&self) -> impl Iterator<Item = GoodId> + '_ {
        (1..=self.k()).flat_map(move |t| self.day(t))
    }

    pub fn all_goods(&self) -> GoodSet {
        self.goods().collect()
    }

    pub fn contains(&self, good: GoodId) -> bool {
        good.day >= 1 && good.day <= self.k() && good.index < self.day_sizes[good.day - 1]
    }

    pub fn flat_index(&self, good: GoodId) -> usize {
        debug_assert!(self.contains(good), "{good} is not a good of this instance");
        self.offsets[good.day - 1] + good.index
    }

    pub fn value(&self, agent: AgentId, good: GoodId) -> &Rational {
        &self.values[agent][self.flat_index(good)]
    }

    pub fn bundle_value<'a>(
        &self,
        agent: AgentId,
        goods: impl IntoIterator<Item = &'a GoodId>,
    ) -> Rational {
        goods
            .into_iter()
            .fold(Rational::zero(), |acc, g| acc + self.value(agent, *g))
    }

    pub fn label(&self, good: GoodId) -> &str {
        &self.labels[self.flat_index(good)]
    }

    pub fn find_label(&self, label: &str) -> Option<GoodId> {
        let flat = self.labels.iter().position(|l| l == label)?;
        let day = self.offsets.partition_point(|&o| o <= flat);
        Some(GoodId::new(day, flat - self.offsets[day - 1]))
    }

    /// The value vector of a good, one entry per agent.
    pub fn value_vector(&self, good: GoodId) -> Vec<&Rational> {
        let flat = self.flat_index(good);
        self.values.iter().map(|row| &row[flat]).collect()
    }

    /// True when every agent has the same value for every good.
    pub fn identical_valuations(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    pub(crate) fn check_agent(&self, agent: AgentId) -> Result<()> {
        if agent >= self.n {
            return Err(Error::invalid(format!(
                "agent {} out of range for {} agents",
                agent + 1,
                self.n
            )));
        }
        Ok(())
    }

    pub(crate) fn check_goods<'a>(
        &self,
        goods: impl IntoIterator<Item = &'a GoodId>,
    ) -> Result<()> {
        for g in goods {
            if !self.contains(*g) {
                return Err(Error::invalid(format!(
                    "{g} is not a good of this instance"
                )));
            }
        }
        Ok(())
    }

    /// Compares two goods from `agent`'s point of view: `Less` means `a` is
    /// ranked ahead of `b` (higher value, or equal value and smaller id).
    pub fn rank_cmp(&self, agent: AgentId, a: GoodId, b: GoodId) -> Ordering {
        self.value(agent, b)
            .cmp(self.value(agent, a))
            .then_with(|| a.cmp(&b))
    }
}

/// An agent's strict ranking of a set of goods: value descending, global
/// tiebreak among equal values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceOrdering {
    pub agent: AgentId,
    pub ranked: Vec<GoodId>,
}

impl PreferenceOrdering {
    pub fn new<'a>(
        instance: &TemporalInstance,
        agent: AgentId,
        set: impl IntoIterator<Item = &'a GoodId>,
    ) -> Self {
        let mut ranked: Vec<GoodId> = set.into_iter().copied().collect();
        ranked.sort_by(|a, b| instance.rank_cmp(agent, *a, *b));
        PreferenceOrdering { agent, ranked }
    }

    /// Ends (exclusive) of each group of equally-valued goods in `ranked`.
    /// The prefix `ranked[..end]` of each is a head set.
    pub fn level_ends(&self, instance: &TemporalInstance) -> Vec<usize> {
        let mut ends = Vec::new();
        for (p, g) in self.ranked.iter().enumerate() {
            let last = p + 1 == self.ranked.len();
            if last
                || instance.value(self.agent, *g) != instance.value(self.agent, self.ranked[p + 1])
            {
                ends.push(p + 1);
            }
        }
        ends
    }
}

/// The `r` goods of `set` that `agent` ranks highest.
pub fn top_set(
    instance: &TemporalInstance,
    agent: AgentId,
    set: &GoodSet,
    r: usize,
) -> Result<GoodSet> {
    instance.check_agent(agent)?;
    instance.check_goods(set)?;
    if r > set.len() {
        return Err(Error::invalid(format!(
            "cannot take the top {r} of a set of {} goods",
            set.len()
        )));
    }
    let ordering = PreferenceOrdering::new(instance, agent, set);
    Ok(ordering.ranked[..r].iter().copied().collect())
}

/// Goods of `set` that `agent` values at least as much as `good`.
pub fn head_set(
    instance: &TemporalInstance,
    agent: AgentId,
    set: &GoodSet,
    good: GoodId,
) -> Result<GoodSet> {
    instance.check_agent(agent)?;
    instance.check_goods(set)?;
    if !set.contains(&good) {
        return Err(Error::invalid(format!("{good} is not in the given set")));
    }
    let threshold = instance.value(agent, good);
    Ok(set
        .iter()
        .copied()
        .filter(|g| instance.value(agent, *g) >= threshold)
        .collect())
}

/// Goods of days `1..=day`.
pub fn prefix_goods(instance: &TemporalInstance, day: usize) -> Result<GoodSet> {
    if day == 0 || day > instance.k() {
        return Err(Error::invalid(format!(
            "day {day} out of range 1..={}",
            instance.k()
        )));
    }
    Ok((1..=day).flat_map(|t| instance.day(t)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Restrictions {
    pub two_agents: bool,
    /// All agents share one weak ordering over every good.
    pub identical_orderings: bool,
    /// Every day carries the same multiset of per-agent value vectors.
    pub identical_days: bool,
}

pub fn classify(instance: &TemporalInstance) -> Restrictions {
    Restrictions {
        two_agents: instance.n() == 2,
        identical_orderings: identical_weak_orders(instance),
        identical_days: canonical_day_orders(instance).is_some(),
    }
}

fn identical_weak_orders(instance: &TemporalInstance) -> bool {
    let reference = PreferenceOrdering::new(instance, 0, &instance.all_goods());
    (1..instance.n()).all(|agent| {
        reference.ranked.windows(2).all(|w| {
            let a = instance.value(0, w[0]).cmp(instance.value(0, w[1]));
            let b = instance.value(agent, w[0]).cmp(instance.value(agent, w[1]));
            a == b
        })
    })
}

/// A strict order of all goods that refines every agent's weak ordering, if
/// one exists. Agents need not share their ties: it suffices that no two
/// agents strictly disagree on any pair.
///
/// The order sorts goods by their value vectors lexicographically (agent 1
/// first) and then by the global tiebreak. When the weak orders coincide this
/// is exactly each agent's [`PreferenceOrdering`].
pub fn common_ordering(instance: &TemporalInstance) -> Option<Vec<GoodId>> {
    let mut order: Vec<GoodId> = instance.goods().collect();
    order.sort_by(|a, b| {
        (0..instance.n())
            .map(|i| instance.value(i, *b).cmp(instance.value(i, *a)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.cmp(b))
    });
    let consistent = (0..instance.n()).all(|i| {
        order
            .windows(2)
            .all(|w| instance.value(i, w[0]) >= instance.value(i, w[1]))
    });
    consistent.then_some(order)
}

/// For identical-days instances, each day's goods in a canonical order such
/// that the `r`-th good of every day carries the same value vector. Mapping
/// rank to rank gives the value-preserving bijections between days.
pub fn canonical_day_orders(instance: &TemporalInstance) -> Option<Vec<Vec<GoodId>>> {
    let orders: Vec<Vec<GoodId>> = (1..=instance.k())
        .map(|t| {
            let mut day: Vec<GoodId> = instance.day(t).collect();
            day.sort_by(|a, b| {
                instance
                    .value_vector(*b)
                    .cmp(&instance.value_vector(*a))
                    .then_with(|| a.cmp(b))
            });
            day
        })
        .collect();
    let first = &orders[0];
    let same = orders.iter().skip(1).all(|day| {
        day.len() == first.len()
            && day
                .iter()
                .zip(first)
                .all(|(a, b)| instance.value_vector(*a) == instance.value_vector(*b))
    });
    same.then_some(orders)
}

/// Assignment of a set of goods to `n` agents.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Allocation {
    n: usize,
    owner: BTreeMap<GoodId, AgentId>,
}

impl Allocation {
    /// The empty allocation (of the empty set) among `n` agents.
    pub fn new(n: usize) -> Self {
        Allocation {
            n,
            owner: BTreeMap::new(),
        }
    }

    pub fn from_owner(n: usize, owner: BTreeMap<GoodId, AgentId>) -> Result<Self> {
        if let Some((g, a)) = owner.iter().find(|(_, a)| **a >= n) {
            return Err(Error::invalid(format!(
                "{g} assigned to agent {} but there are only {n} agents",
                a + 1
            )));
        }
        Ok(Allocation { n, owner })
    }

    /// Builds an allocation from one bundle per agent; bundles must be
    /// disjoint.
    pub fn from_bundles(bundles: &[GoodSet]) -> Result<Self> {
        let mut alloc = Allocation::new(bundles.len());
        for (agent, bundle) in bundles.iter().enumerate() {
            for g in bundle {
                if alloc.owner.insert(*g, agent).is_some() {
                    return Err(Error::invalid(format!("{g} appears in two bundles")));
                }
            }
        }
        Ok(alloc)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.owner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.owner.is_empty()
    }

    /// Assigns (or reassigns) `good` to `agent`.
    pub fn assign(&mut self, good: GoodId, agent: AgentId) {
        assert!(agent < self.n, "agent {agent} out of range");
        self.owner.insert(good, agent);
    }

    pub fn unassign(&mut self, good: GoodId) -> Option<AgentId> {
        self.owner.remove(&good)
    }

    pub fn owner(&self, good: GoodId) -> Option<AgentId> {
        self.owner.get(&good).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (GoodId, AgentId)> + '_ {
        self.owner.iter().map(|(g, a)| (*g, *a))
    }

    /// The set of goods this allocation covers.
    pub fn domain(&self) -> GoodSet {
        self.owner.keys().copied().collect()
    }

    pub fn bundle(&self, agent: AgentId) -> GoodSet {
        self.iter()
            .filter(|(_, a)| *a == agent)
            .map(|(g, _)| g)
            .collect()
    }

    pub fn bundles(&self) -> Vec<GoodSet> {
        let mut bundles = vec![GoodSet::new(); self.n];
        for (g, a) in self.iter() {
            bundles[a].insert(g);
        }
        bundles
    }

    pub fn is_total_on(&self, set: &GoodSet) -> bool {
        set.iter().all(|g| self.owner.contains_key(g))
    }

    /// The allocation induced on `set`.
    pub fn restrict(&self, set: &GoodSet) -> Result<Allocation> {
        let mut owner = BTreeMap::new();
        for g in set {
            match self.owner.get(g) {
                Some(a) => {
                    owner.insert(*g, *a);
                }
                None => return Err(Error::invalid(format!("{g} is not allocated"))),
            }
        }
        Ok(Allocation { n: self.n, owner })
    }

    /// Adds every assignment of `other`, whose goods must be new.
    pub fn extend_disjoint(&mut self, other: &Allocation) -> Result<()> {
        if other.n != self.n {
            return Err(Error::invalid("allocations among different agent counts"));
        }
        for (g, a) in other.iter() {
            if self.owner.insert(g, a).is_some() {
                return Err(Error::invalid(format!("{g} allocated twice")));
            }
        }
        Ok(())
    }

    /// Exchanges the two agents' bundles. Only meaningful for two agents.
    pub fn swapped(&self) -> Allocation {
        assert_eq!(self.n, 2, "bundle swap is defined for two agents");
        Allocation {
            n: 2,
            owner: self.owner.iter().map(|(g, a)| (*g, 1 - *a)).collect(),
        }
    }
}

/// Two allocations of the same goods, as consumed by the envy-balancing
/// procedures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationPair {
    pub first: Allocation,
    pub second: Allocation,
}

impl AllocationPair {
    pub fn new(first: Allocation, second: Allocation) -> Result<Self> {
        if first.n() != second.n() || first.domain() != second.domain() {
            return Err(Error::invalid(
                "pair members must allocate the same goods among the same agents",
            ));
        }
        Ok(AllocationPair { first, second })
    }

    pub fn domain(&self) -> GoodSet {
        self.first.domain()
    }

    pub fn members(&self) -> [&Allocation; 2] {
        [&self.first, &self.second]
    }
}
