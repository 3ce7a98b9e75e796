//! Exhaustive existence search for allocations satisfying a conjunction of
//! (predicate, scope) requirements, and the built-in impossibility fixtures.
//!
//! Small spaces are enumerated outright. Larger ones are searched by
//! backtracking over goods in global order: every scope set is checked the
//! moment its last good is placed, and for SD-EF / SD-EF1 every head set is
//! count-checked as soon as it is fully placed, which is a sound prune since
//! the final bundles agree with the partial ones on that head set.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::fairness::{check_with, CheckOptions, Predicate, Scope};
use crate::laminar::LaminarFamily;
use crate::model::{
    int, AgentId, Allocation, GoodId, GoodSet, GoodSpec, PreferenceOrdering, TemporalInstance,
};

/// A conjunction of predicates, each required on every set of its scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyQuery {
    pub conjuncts: Vec<(Predicate, Scope)>,
}

impl PropertyQuery {
    pub fn new(conjuncts: Vec<(Predicate, Scope)>) -> Result<Self> {
        if conjuncts.is_empty() {
            return Err(Error::invalid("a query needs at least one conjunct"));
        }
        Ok(PropertyQuery { conjuncts })
    }

    /// Parses `"P@scope,P@scope,..."`. The `laminar` scope needs `family`.
    pub fn parse(text: &str, family: Option<&LaminarFamily>) -> Result<Self> {
        let conjuncts = text
            .split(',')
            .filter(|part| !part.trim().is_empty())
            .map(|part| {
                let (p, s) = part.split_once('@').ok_or_else(|| {
                    Error::invalid(format!("conjunct {part:?} is not of the form P@scope"))
                })?;
                let predicate: Predicate = p.parse()?;
                let scope = parse_scope(s, family)?;
                Ok((predicate, scope))
            })
            .collect::<Result<Vec<_>>>()?;
        PropertyQuery::new(conjuncts)
    }

    pub fn holds(
        &self,
        instance: &TemporalInstance,
        allocation: &Allocation,
        options: &CheckOptions,
    ) -> Result<bool> {
        for (p, scope) in &self.conjuncts {
            for set in scope.sets(instance) {
                if !check_with(instance, allocation, &set, *p, options)?.passed() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

impl fmt::Display for PropertyQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .conjuncts
            .iter()
            .map(|(p, s)| format!("{p}@{s}"))
            .collect();
        f.write_str(&parts.join(","))
    }
}

pub fn parse_scope(text: &str, family: Option<&LaminarFamily>) -> Result<Scope> {
    match text.trim().to_ascii_lowercase().replace('_', "-").as_str() {
        "per-day" => Ok(Scope::PerDay),
        "overall" => Ok(Scope::Overall),
        "up-to-each-day" => Ok(Scope::UpToEachDay),
        "laminar" => family
            .cloned()
            .map(Scope::Laminar)
            .ok_or_else(|| Error::invalid("the laminar scope needs a laminar family")),
        other => Err(Error::invalid(format!("unknown scope {other:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    /// Enumerate when the space fits the enumeration budget, else backtrack.
    Auto,
    Enumerate,
    Backtrack,
}

impl FromStr for SearchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SearchMethod::Auto),
            "enumerate" => Ok(SearchMethod::Enumerate),
            "backtrack" => Ok(SearchMethod::Backtrack),
            _ => Err(Error::invalid(format!("unknown search method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    /// Largest `n^m` enumerated outright.
    pub enumeration_budget: u128,
    /// Largest number of partial assignments the backtracking search visits.
    pub node_budget: u64,
    /// Canonical agent labels when all agents have identical valuations.
    pub symmetry_breaking: bool,
    pub method: SearchMethod,
    pub check: CheckOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            enumeration_budget: 10_000_000,
            node_budget: 1_000_000_000,
            symmetry_breaking: true,
            method: SearchMethod::Auto,
            check: CheckOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    /// The lexicographically first satisfying allocation (goods in global
    /// order, smaller agents first), or `None` when none exists.
    pub allocation: Option<Allocation>,
    /// Allocations enumerated, or partial assignments visited.
    pub nodes: u64,
    pub method: SearchMethod,
}

pub fn exists_allocation(
    instance: &TemporalInstance,
    query: &PropertyQuery,
) -> Result<Option<Allocation>> {
    Ok(search(instance, query, &SearchConfig::default())?.allocation)
}

pub fn search(
    instance: &TemporalInstance,
    query: &PropertyQuery,
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    for (_, scope) in &query.conjuncts {
        if let Scope::Laminar(family) = scope {
            instance.check_goods(family.sets().iter().flatten())?;
        }
    }
    let space = (instance.n() as u128)
        .checked_pow(instance.m() as u32)
        .unwrap_or(u128::MAX);
    let method = match config.method {
        SearchMethod::Auto if space <= config.enumeration_budget => SearchMethod::Enumerate,
        SearchMethod::Auto => SearchMethod::Backtrack,
        m => m,
    };
    match method {
        SearchMethod::Enumerate => {
            if space > config.enumeration_budget {
                return Err(Error::ResourceLimit(format!(
                    "{}^{} allocations exceed the enumeration budget {}",
                    instance.n(),
                    instance.m(),
                    config.enumeration_budget
                )));
            }
            enumerate(instance, query, config)
        }
        _ => Backtracker::new(instance, query, config).run(),
    }
}

fn enumerate(
    instance: &TemporalInstance,
    query: &PropertyQuery,
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    let goods: Vec<GoodId> = instance.goods().collect();
    let n = instance.n();
    let mut assignment = vec![0usize; goods.len()];
    let mut nodes = 0u64;
    loop {
        nodes += 1;
        let allocation = Allocation::from_owner(
            n,
            goods
                .iter()
                .copied()
                .zip(assignment.iter().copied())
                .collect(),
        )?;
        if query.holds(instance, &allocation, &config.check)? {
            return Ok(SearchOutcome {
                allocation: Some(allocation),
                nodes,
                method: SearchMethod::Enumerate,
            });
        }
        let mut p = goods.len();
        loop {
            if p == 0 {
                return Ok(SearchOutcome {
                    allocation: None,
                    nodes,
                    method: SearchMethod::Enumerate,
                });
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

/// Count test on one fully placed head set: every listed agent must hold at
/// least `max - slack` of its goods, `max` over all agents.
struct HeadCheck {
    goods: Vec<GoodId>,
    agents: Vec<AgentId>,
    slack: usize,
}

struct Backtracker<'a> {
    instance: &'a TemporalInstance,
    config: &'a SearchConfig,
    goods: Vec<GoodId>,
    /// Scope checks keyed by the position of their set's last good.
    set_checks: Vec<Vec<(Predicate, GoodSet)>>,
    head_checks: Vec<Vec<HeadCheck>>,
    symmetric: bool,
    allocation: Allocation,
    nodes: u64,
}

impl<'a> Backtracker<'a> {
    fn new(
        instance: &'a TemporalInstance,
        query: &PropertyQuery,
        config: &'a SearchConfig,
    ) -> Self {
        let goods: Vec<GoodId> = instance.goods().collect();
        let position: BTreeMap<GoodId, usize> =
            goods.iter().enumerate().map(|(p, g)| (*g, p)).collect();
        let last = |set: &[GoodId]| set.iter().map(|g| position[g]).max();
        let mut set_checks = vec![Vec::new(); goods.len()];
        let mut heads: BTreeMap<(Vec<GoodId>, usize), Vec<AgentId>> = BTreeMap::new();
        for (p, scope) in &query.conjuncts {
            for set in scope.sets(instance) {
                let Some(at) = last(&set.iter().copied().collect::<Vec<_>>()) else {
                    continue;
                };
                if !set_checks[at].contains(&(*p, set.clone())) {
                    set_checks[at].push((*p, set.clone()));
                }
                let slack = match p {
                    Predicate::SdEf1 => 1,
                    Predicate::SdEf => 0,
                    _ => continue,
                };
                for agent in 0..instance.n() {
                    let ordering = PreferenceOrdering::new(instance, agent, &set);
                    for end in ordering.level_ends(instance) {
                        let mut head = ordering.ranked[..end].to_vec();
                        head.sort();
                        let agents = heads.entry((head, slack)).or_default();
                        if !agents.contains(&agent) {
                            agents.push(agent);
                        }
                    }
                }
            }
        }
        let mut head_checks: Vec<Vec<HeadCheck>> = (0..goods.len()).map(|_| Vec::new()).collect();
        for ((head, slack), agents) in heads {
            let at = last(&head).unwrap();
            head_checks[at].push(HeadCheck {
                goods: head,
                agents,
                slack,
            });
        }
        Backtracker {
            instance,
            config,
            goods,
            set_checks,
            head_checks,
            symmetric: config.symmetry_breaking && instance.identical_valuations(),
            allocation: Allocation::new(instance.n()),
            nodes: 0,
        }
    }

    fn run(mut self) -> Result<SearchOutcome> {
        let found = self.descend(0, None)?;
        Ok(SearchOutcome {
            allocation: found.then(|| self.allocation.clone()),
            nodes: self.nodes,
            method: SearchMethod::Backtrack,
        })
    }

    fn consistent(&self, position: usize) -> Result<bool> {
        let n = self.instance.n();
        for head in &self.head_checks[position] {
            let mut counts = vec![0usize; n];
            for g in &head.goods {
                counts[self.allocation.owner(*g).expect("head fully placed")] += 1;
            }
            let max = *counts.iter().max().unwrap();
            if head.agents.iter().any(|a| counts[*a] + head.slack < max) {
                return Ok(false);
            }
        }
        for (p, set) in &self.set_checks[position] {
            if !check_with(self.instance, &self.allocation, set, *p, &self.config.check)?.passed() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Tries every agent for `goods[position]`; `max_used` is the largest
    /// agent holding a good so far.
    fn descend(&mut self, position: usize, max_used: Option<AgentId>) -> Result<bool> {
        if position == self.goods.len() {
            return Ok(true);
        }
        let good = self.goods[position];
        let limit = if self.symmetric {
            max_used.map_or(1, |m| m + 2).min(self.instance.n())
        } else {
            self.instance.n()
        };
        for agent in 0..limit {
            self.nodes += 1;
            if self.nodes > self.config.node_budget {
                return Err(Error::ResourceLimit(format!(
                    "backtracking visited more than {} nodes",
                    self.config.node_budget
                )));
            }
            self.allocation.assign(good, agent);
            if self.consistent(position)? {
                let used = Some(max_used.map_or(agent, |m| m.max(agent)));
                if self.descend(position + 1, used)? {
                    return Ok(true);
                }
            }
            self.allocation.unassign(good);
        }
        Ok(false)
    }
}

/// A built-in instance on which a query is known to be unsatisfiable.
#[derive(Debug, Clone)]
pub struct CounterexampleFixture {
    pub name: &'static str,
    pub description: &'static str,
    pub instance: TemporalInstance,
    pub query: PropertyQuery,
}

/// Two agents with identical values 4, 3, 2, 1 for `g1..g4`, arriving as
/// `{g1, g4}`, `{g3}`, `{g2}`: no allocation is SD-EF1 up to each day.
pub fn four_goods_fixture() -> CounterexampleFixture {
    let good = |label: &str, v: i64| GoodSpec::new(label, vec![int(v), int(v)]);
    let instance = TemporalInstance::new(
        2,
        vec![
            vec![good("g1", 4), good("g4", 1)],
            vec![good("g3", 2)],
            vec![good("g2", 3)],
        ],
    )
    .expect("fixture is valid");
    CounterexampleFixture {
        name: "four-goods-three-days",
        description: "2 agents, 4 goods over 3 days: SD-EF1 up to each day",
        instance,
        query: PropertyQuery::new(vec![(Predicate::SdEf1, Scope::UpToEachDay)]).unwrap(),
    }
}

/// Two agents whose orderings agree within every day but differ overall:
/// no allocation is EF1 per day and SD-EF1 overall.
pub fn eight_goods_fixture() -> CounterexampleFixture {
    // values for g1..g8
    let v1 = [8, 7, 6, 5, 4, 3, 2, 1];
    let v2 = [6, 8, 7, 5, 2, 4, 1, 3];
    let good = |i: usize| GoodSpec::new(format!("g{i}"), vec![int(v1[i - 1]), int(v2[i - 1])]);
    let instance = TemporalInstance::new(
        2,
        vec![
            vec![good(1), good(5), good(7)],
            vec![good(2), good(4), good(6)],
            vec![good(3), good(8)],
        ],
    )
    .expect("fixture is valid");
    CounterexampleFixture {
        name: "eight-goods-three-days",
        description: "2 agents, 8 goods over 3 days: EF1 per day and SD-EF1 overall",
        instance,
        query: PropertyQuery::new(vec![
            (Predicate::Ef1, Scope::PerDay),
            (Predicate::SdEf1, Scope::Overall),
        ])
        .unwrap(),
    }
}

/// Twelve agents with identical values, four identical days of six goods
/// valued 6..1: no allocation is SD-EF1 up to each day.
pub fn twelve_agents_fixture() -> CounterexampleFixture {
    let days = (1..=4)
        .map(|t| {
            (1..=6)
                .map(|l| GoodSpec::new(format!("g{l},{t}"), vec![int(7 - l as i64); 12]))
                .collect()
        })
        .collect();
    let instance = TemporalInstance::new(12, days).expect("fixture is valid");
    CounterexampleFixture {
        name: "twelve-agents-four-identical-days",
        description: "12 agents, 24 goods over 4 identical days: SD-EF1 up to each day",
        instance,
        query: PropertyQuery::new(vec![(Predicate::SdEf1, Scope::UpToEachDay)]).unwrap(),
    }
}

pub fn fixtures() -> Vec<CounterexampleFixture> {
    vec![
        four_goods_fixture(),
        eight_goods_fixture(),
        twelve_agents_fixture(),
    ]
}

#[derive(Debug, Clone)]
pub struct FixtureReport {
    pub name: &'static str,
    pub description: &'static str,
    pub infeasible: bool,
    /// A satisfying allocation, which would contradict the fixture.
    pub witness: Option<Allocation>,
    pub nodes: u64,
    pub method: SearchMethod,
    pub elapsed: Duration,
}

pub fn verify_counterexamples(config: &SearchConfig) -> Result<Vec<FixtureReport>> {
    fixtures()
        .into_iter()
        .map(|f| {
            let start = Instant::now();
            let outcome = search(&f.instance, &f.query, config)?;
            Ok(FixtureReport {
                name: f.name,
                description: f.description,
                infeasible: outcome.allocation.is_none(),
                witness: outcome.allocation,
                nodes: outcome.nodes,
                method: outcome.method,
                elapsed: start.elapsed(),
            })
        })
        .collect()
}
