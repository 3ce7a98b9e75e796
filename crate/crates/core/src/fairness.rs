//! Fairness predicates and their temporal scopes.
//!
//! Every predicate is evaluated literally on the allocation induced on a set
//! of goods `S`. Stochastic-dominance predicates work on head sets: for agent
//! `i` and good `g`, the goods of `S` that `i` values at least as much as `g`.
//! A head set only depends on the value of `g`, so the checks walk each
//! agent's ranking of `S` and evaluate once per group of equal values.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::laminar::LaminarFamily;
use crate::model::{
    prefix_goods, AgentId, Allocation, AllocationPair, GoodId, GoodSet, PreferenceOrdering,
    Rational, TemporalInstance,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Predicate {
    Ef,
    Ef1,
    Efx,
    Prop,
    Prop1,
    SdEf,
    SdEf1,
    SdProp1,
    Po,
    /// Bundle sizes within `S` differ by at most one.
    Balanced,
}

impl Predicate {
    pub const ALL: [Predicate; 10] = [
        Predicate::Ef,
        Predicate::Ef1,
        Predicate::Efx,
        Predicate::Prop,
        Predicate::Prop1,
        Predicate::SdEf,
        Predicate::SdEf1,
        Predicate::SdProp1,
        Predicate::Po,
        Predicate::Balanced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predicate::Ef => "EF",
            Predicate::Ef1 => "EF1",
            Predicate::Efx => "EFX",
            Predicate::Prop => "PROP",
            Predicate::Prop1 => "PROP1",
            Predicate::SdEf => "SD_EF",
            Predicate::SdEf1 => "SD_EF1",
            Predicate::SdProp1 => "SD_PROP1",
            Predicate::Po => "PO",
            Predicate::Balanced => "BALANCED",
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Predicate::ALL
            .into_iter()
            .find(|p| p.name() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown predicate {s:?}")))
    }
}

/// Which sets of goods a predicate must hold on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    /// Each day's goods.
    PerDay,
    /// All goods.
    Overall,
    /// Goods of days `1..=t`, for every `t`.
    UpToEachDay,
    /// Every member of a laminar family.
    Laminar(LaminarFamily),
}

impl Scope {
    pub fn sets(&self, instance: &TemporalInstance) -> Vec<GoodSet> {
        match self {
            Scope::PerDay => (1..=instance.k()).map(|t| instance.day_set(t)).collect(),
            Scope::Overall => vec![instance.all_goods()],
            Scope::UpToEachDay => (1..=instance.k())
                .map(|t| prefix_goods(instance, t).expect("day in range"))
                .collect(),
            Scope::Laminar(family) => family.sets().to_vec(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scope::PerDay => "per-day",
            Scope::Overall => "overall",
            Scope::UpToEachDay => "up-to-each-day",
            Scope::Laminar(_) => "laminar",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One failed instance of a predicate's definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub set: GoodSet,
    pub predicate: Predicate,
    pub envious: AgentId,
    pub envied: Option<AgentId>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FairnessReport {
    pub violations: Vec<Violation>,
}

impl FairnessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: FairnessReport) {
        self.violations.extend(other.violations);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    /// Largest `n^|S|` the Pareto-optimality check may enumerate.
    pub po_budget: u128,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { po_budget: 1 << 20 }
    }
}

/// Does `x` stochastically dominate `y` for `agent`, relative to `set`?
pub fn sd_dominates(
    instance: &TemporalInstance,
    agent: AgentId,
    x: &GoodSet,
    y: &GoodSet,
    set: &GoodSet,
) -> Result<bool> {
    instance.check_agent(agent)?;
    if !x.is_subset(set) || !y.is_subset(set) {
        return Err(Error::invalid(
            "compared bundles must be subsets of the set",
        ));
    }
    let ordering = PreferenceOrdering::new(instance, agent, set);
    let (mut cx, mut cy) = (0usize, 0usize);
    let mut ends = ordering.level_ends(instance).into_iter().peekable();
    for (p, g) in ordering.ranked.iter().enumerate() {
        cx += usize::from(x.contains(g));
        cy += usize::from(y.contains(g));
        if ends.peek() == Some(&(p + 1)) {
            ends.next();
            if cx < cy {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn check(
    instance: &TemporalInstance,
    allocation: &Allocation,
    set: &GoodSet,
    predicate: Predicate,
) -> Result<FairnessReport> {
    check_with(
        instance,
        allocation,
        set,
        predicate,
        &CheckOptions::default(),
    )
}

pub fn check_with(
    instance: &TemporalInstance,
    allocation: &Allocation,
    set: &GoodSet,
    predicate: Predicate,
    options: &CheckOptions,
) -> Result<FairnessReport> {
    instance.check_goods(set)?;
    if allocation.n() != instance.n() {
        return Err(Error::invalid(format!(
            "allocation is among {} agents, instance has {}",
            allocation.n(),
            instance.n()
        )));
    }
    if !allocation.is_total_on(set) {
        return Err(Error::invalid("allocation does not cover the checked set"));
    }
    let ctx = SetContext::new(instance, allocation, set);
    let violations = match predicate {
        Predicate::Ef => ctx.envy(EnvyRelax::None),
        Predicate::Ef1 => ctx.envy(EnvyRelax::BestGood),
        Predicate::Efx => ctx.envy(EnvyRelax::WorstGood),
        Predicate::Prop => ctx.prop(false),
        Predicate::Prop1 => ctx.prop(true),
        Predicate::SdEf => ctx.sd_ef(),
        Predicate::SdEf1 => ctx.sd_ef1(),
        Predicate::SdProp1 => ctx.sd_prop1(),
        Predicate::Po => ctx.pareto(options.po_budget)?,
        Predicate::Balanced => ctx.balanced(),
    };
    Ok(FairnessReport { violations })
}

/// Checks `predicate` on every set of `scope`.
pub fn check_temporal(
    instance: &TemporalInstance,
    allocation: &Allocation,
    predicate: Predicate,
    scope: &Scope,
) -> Result<FairnessReport> {
    check_temporal_with(
        instance,
        allocation,
        predicate,
        scope,
        &CheckOptions::default(),
    )
}

pub fn check_temporal_with(
    instance: &TemporalInstance,
    allocation: &Allocation,
    predicate: Predicate,
    scope: &Scope,
    options: &CheckOptions,
) -> Result<FairnessReport> {
    let mut report = FairnessReport::default();
    for set in scope.sets(instance) {
        report.merge(check_with(instance, allocation, &set, predicate, options)?);
    }
    Ok(report)
}

/// Whether two allocations to two agents cancel out: holding one copy of
/// every good according to each makes both agents envy-free.
pub fn cancel_out(instance: &TemporalInstance, pair: &AllocationPair) -> Result<bool> {
    if instance.n() != 2 || pair.first.n() != 2 {
        return Err(Error::invalid(
            "cancelling pairs are defined for two agents",
        ));
    }
    let (a, b) = (pair.first.bundles(), pair.second.bundles());
    Ok((0..2).all(|i| {
        let own = instance.bundle_value(i, &a[i]) + instance.bundle_value(i, &b[i]);
        let other = instance.bundle_value(i, &a[1 - i]) + instance.bundle_value(i, &b[1 - i]);
        own >= other
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    /// `|A_i ∩ T_i(S,r)| >= |A_j ∩ T_i(S,r)| - 1` for all `i, j, r`.
    Sufficiency,
    /// `|A_i ∩ T_i(S,r)| >= floor(r/n)` for all `i` and every `r` at which
    /// `T_i(S,r)` is strictly separated from the rest of `S`.
    Necessity,
}

/// Rank-count conditions on top sets that bracket SD-EF1 from both sides.
/// Goods of `set` missing from `allocation` count for nobody.
pub fn sdef1_count_conditions(
    instance: &TemporalInstance,
    allocation: &Allocation,
    set: &GoodSet,
    mode: CountMode,
) -> bool {
    let n = instance.n();
    (0..n).all(|i| {
        let ordering = PreferenceOrdering::new(instance, i, set);
        let ends = ordering.level_ends(instance);
        let mut counts = vec![0usize; n];
        ordering.ranked.iter().enumerate().all(|(p, g)| {
            if let Some(owner) = allocation.owner(*g) {
                counts[owner] += 1;
            }
            let r = p + 1;
            match mode {
                CountMode::Sufficiency => counts.iter().all(|&cj| counts[i] + 1 >= cj),
                CountMode::Necessity => ends.binary_search(&r).is_err() || counts[i] >= r / n,
            }
        })
    })
}

enum EnvyRelax {
    None,
    /// Remove the envied bundle's most valuable good (EF1).
    BestGood,
    /// Remove its least valuable good (EFX: every good must suffice).
    WorstGood,
}

struct SetContext<'a> {
    instance: &'a TemporalInstance,
    set: &'a GoodSet,
    bundles: Vec<Vec<GoodId>>,
    owner: Vec<(GoodId, AgentId)>,
}

impl<'a> SetContext<'a> {
    fn new(instance: &'a TemporalInstance, allocation: &Allocation, set: &'a GoodSet) -> Self {
        let mut bundles = vec![Vec::new(); instance.n()];
        let mut owner = Vec::with_capacity(set.len());
        for g in set {
            let a = allocation.owner(*g).expect("checked totality");
            bundles[a].push(*g);
            owner.push((*g, a));
        }
        SetContext {
            instance,
            set,
            bundles,
            owner,
        }
    }

    fn n(&self) -> usize {
        self.instance.n()
    }

    fn value(&self, agent: AgentId, goods: &[GoodId]) -> Rational {
        self.instance.bundle_value(agent, goods)
    }

    fn violation(
        &self,
        predicate: Predicate,
        envious: AgentId,
        envied: Option<AgentId>,
        detail: String,
    ) -> Violation {
        Violation {
            set: self.set.clone(),
            predicate,
            envious,
            envied,
            detail,
        }
    }

    fn envy(&self, relax: EnvyRelax) -> Vec<Violation> {
        let predicate = match relax {
            EnvyRelax::None => Predicate::Ef,
            EnvyRelax::BestGood => Predicate::Ef1,
            EnvyRelax::WorstGood => Predicate::Efx,
        };
        let mut out = Vec::new();
        for i in 0..self.n() {
            let own = self.value(i, &self.bundles[i]);
            for j in (0..self.n()).filter(|&j| j != i) {
                let theirs = &self.bundles[j];
                if theirs.is_empty() {
                    continue;
                }
                let total = self.value(i, theirs);
                let removed = match relax {
                    EnvyRelax::None => Rational::zero(),
                    EnvyRelax::BestGood => theirs
                        .iter()
                        .map(|g| self.instance.value(i, *g))
                        .max()
                        .cloned()
                        .unwrap_or_else(Rational::zero),
                    EnvyRelax::WorstGood => theirs
                        .iter()
                        .map(|g| self.instance.value(i, *g))
                        .min()
                        .cloned()
                        .unwrap_or_else(Rational::zero),
                };
                if own < &total - &removed {
                    out.push(self.violation(
                        predicate,
                        i,
                        Some(j),
                        format!(
                            "own bundle worth {own}, other worth {total} (removable {removed})"
                        ),
                    ));
                }
            }
        }
        out
    }

    fn prop(&self, up_to_one: bool) -> Vec<Violation> {
        let n = Rational::from_integer(BigInt::from(self.n()));
        let mut out = Vec::new();
        for i in 0..self.n() {
            if up_to_one && self.bundles[i].len() == self.set.len() {
                continue;
            }
            let whole = self.value(i, &self.owner.iter().map(|(g, _)| *g).collect::<Vec<_>>());
            let own = self.value(i, &self.bundles[i]);
            let bonus = if up_to_one {
                self.owner
                    .iter()
                    .filter(|(_, a)| *a != i)
                    .map(|(g, _)| self.instance.value(i, *g))
                    .max()
                    .cloned()
                    .unwrap_or_else(Rational::zero)
            } else {
                Rational::zero()
            };
            if (&own + &bonus) * &n < whole {
                let predicate = if up_to_one {
                    Predicate::Prop1
                } else {
                    Predicate::Prop
                };
                out.push(self.violation(
                    predicate,
                    i,
                    None,
                    format!("bundle worth {own} (+{bonus}) below 1/{n} of {whole}"),
                ));
            }
        }
        out
    }

    /// Agent `i`'s ranking of the set with, at each position, the owner of
    /// the ranked good; plus the group ends.
    fn ranking(&self, i: AgentId) -> (Vec<(GoodId, AgentId)>, Vec<usize>) {
        let ordering = PreferenceOrdering::new(self.instance, i, self.set);
        let ends = ordering.level_ends(self.instance);
        let ranked = ordering
            .ranked
            .iter()
            .map(|g| {
                let owner = self.owner[self.owner.binary_search_by(|(h, _)| h.cmp(g)).unwrap()].1;
                (*g, owner)
            })
            .collect();
        (ranked, ends)
    }

    fn sd_ef(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            let (ranked, ends) = self.ranking(i);
            let mut counts = vec![0usize; self.n()];
            let mut reported = vec![false; self.n()];
            let mut ends = ends.into_iter().peekable();
            for (p, (g, owner)) in ranked.iter().enumerate() {
                counts[*owner] += 1;
                if ends.peek() != Some(&(p + 1)) {
                    continue;
                }
                ends.next();
                for j in 0..self.n() {
                    if j != i && !reported[j] && counts[i] < counts[j] {
                        reported[j] = true;
                        out.push(self.violation(
                            Predicate::SdEf,
                            i,
                            Some(j),
                            format!(
                                "among goods valued at least as {g}: holds {}, other holds {}",
                                counts[i], counts[j]
                            ),
                        ));
                    }
                }
            }
        }
        out
    }

    fn sd_ef1(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            let (ranked, ends) = self.ranking(i);
            // counts[level][agent] over the head set ending at that level.
            let mut counts = vec![0usize; self.n()];
            let mut levels: Vec<(usize, Vec<usize>)> = Vec::with_capacity(ends.len());
            let mut ends_iter = ends.iter().peekable();
            for (p, (_, owner)) in ranked.iter().enumerate() {
                counts[*owner] += 1;
                if ends_iter.peek() == Some(&&(p + 1)) {
                    ends_iter.next();
                    levels.push((p + 1, counts.clone()));
                }
            }
            let position = |g: GoodId| ranked.iter().position(|(h, _)| *h == g).unwrap();
            for j in (0..self.n()).filter(|&j| j != i) {
                if self.bundles[j].is_empty() {
                    continue;
                }
                // Some single good of A_j must be removable so that A_i
                // dominates the rest at every head set.
                let witness = self.bundles[j].iter().find(|g| {
                    let pos = position(**g);
                    levels.iter().all(|(end, c)| {
                        let drop = usize::from(pos < *end);
                        c[i] + drop >= c[j]
                    })
                });
                if witness.is_none() {
                    let (end, c) = levels
                        .iter()
                        .find(|(_, c)| c[i] + 1 < c[j])
                        .or_else(|| levels.iter().find(|(_, c)| c[i] < c[j]))
                        .expect("a failing level exists");
                    out.push(self.violation(
                        Predicate::SdEf1,
                        i,
                        Some(j),
                        format!(
                            "top {end} goods (head set at {}): holds {}, other holds {}",
                            ranked[end - 1].0,
                            c[i],
                            c[j]
                        ),
                    ));
                }
            }
        }
        out
    }

    fn sd_prop1(&self) -> Vec<Violation> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            if self.bundles[i].len() == self.set.len() {
                continue;
            }
            let (ranked, ends) = self.ranking(i);
            let satisfied_with = |extra: GoodId| {
                let mut held = 0usize;
                let mut ends = ends.iter().peekable();
                ranked.iter().enumerate().all(|(p, (g, owner))| {
                    held += usize::from(*owner == i || *g == extra);
                    if ends.peek() != Some(&&(p + 1)) {
                        return true;
                    }
                    ends.next();
                    held >= (p + 1).div_ceil(n)
                })
            };
            let ok = ranked
                .iter()
                .filter(|(_, owner)| *owner != i)
                .any(|(g, _)| satisfied_with(*g));
            if !ok {
                out.push(self.violation(
                    Predicate::SdProp1,
                    i,
                    None,
                    "no single added good reaches the proportional count at every head set".into(),
                ));
            }
        }
        out
    }

    fn balanced(&self) -> Vec<Violation> {
        let sizes: Vec<usize> = self.bundles.iter().map(Vec::len).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if hi - lo <= 1 {
            return Vec::new();
        }
        let small = sizes.iter().position(|s| s == lo).unwrap();
        let big = sizes.iter().position(|s| s == hi).unwrap();
        vec![self.violation(
            Predicate::Balanced,
            small,
            Some(big),
            format!("bundle sizes {lo} and {hi}"),
        )]
    }

    fn pareto(&self, budget: u128) -> Result<Vec<Violation>> {
        let n = self.n();
        let m = self.owner.len();
        let space = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
        if space > budget {
            return Err(Error::ResourceLimit(format!(
                "Pareto check over {n}^{m} allocations exceeds budget {budget}"
            )));
        }
        let current: Vec<Rational> = (0..n).map(|i| self.value(i, &self.bundles[i])).collect();
        let goods: Vec<GoodId> = self.owner.iter().map(|(g, _)| *g).collect();
        let values: Vec<Vec<Rational>> = (0..n)
            .map(|i| {
                goods
                    .iter()
                    .map(|g| self.instance.value(i, *g).clone())
                    .collect()
            })
            .collect();
        let mut assignment = vec![0usize; m];
        loop {
            let mut utility = vec![Rational::zero(); n];
            for (p, a) in assignment.iter().enumerate() {
                utility[*a] += &values[*a][p];
            }
            let weakly = utility.iter().zip(&current).all(|(u, c)| u >= c);
            if weakly {
                if let Some(better) = (0..n).find(|&i| utility[i] > current[i]) {
                    let detail = format!(
                        "Pareto-dominated by assigning {}",
                        goods
                            .iter()
                            .zip(&assignment)
                            .map(|(g, a)| format!("{g}->{}", a + 1))
                            .collect::<Vec<_>>()
                            .join(" ")
                    );
                    return Ok(vec![self.violation(Predicate::Po, better, None, detail)]);
                }
            }
            // odometer, last good fastest
            let mut p = m;
            loop {
                if p == 0 {
                    return Ok(Vec::new());
                }
                p -= 1;
                assignment[p] += 1;
                if assignment[p] < n {
                    break;
                }
                assignment[p] = 0;
            }
        }
    }
}
