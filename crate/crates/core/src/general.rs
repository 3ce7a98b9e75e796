//! The general setting: per-day identical-ordering transformation, EF1 under
//! per-category cardinality constraints on the transformed goods, and daily
//! picking sequences back on the original goods.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::identical;
use crate::model::{
    canonical_day_orders, AgentId, Allocation, GoodId, GoodSet, PreferenceOrdering, Rational,
    TemporalInstance,
};

/// The auxiliary instance on goods `g'_{t,j}` (`GoodId::new(t, j)`), where
/// every agent's values on each day are its original values sorted
/// non-increasingly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformedInstance {
    pub instance: TemporalInstance,
    /// `orderings[agent][t - 1][j]` is the original good behind `g'_{t,j}`
    /// for that agent.
    pub orderings: Vec<Vec<Vec<GoodId>>>,
}

impl TransformedInstance {
    pub fn original(&self, agent: AgentId, transformed: GoodId) -> GoodId {
        self.orderings[agent][transformed.day - 1][transformed.index]
    }
}

pub fn identical_ordering_transform(instance: &TemporalInstance) -> TransformedInstance {
    let n = instance.n();
    let orderings: Vec<Vec<Vec<GoodId>>> = (0..n)
        .map(|i| {
            (1..=instance.k())
                .map(|t| PreferenceOrdering::new(instance, i, &instance.day_set(t)).ranked)
                .collect()
        })
        .collect();
    let days = (1..=instance.k())
        .map(|t| {
            (0..instance.day_len(t))
                .map(|j| {
                    (0..n)
                        .map(|i| instance.value(i, orderings[i][t - 1][j]).clone())
                        .collect()
                })
                .collect()
        })
        .collect();
    let transformed =
        TemporalInstance::from_values(n, days).expect("shape copied from a valid instance");
    TransformedInstance {
        instance: transformed,
        orderings,
    }
}

/// Disjoint groups of goods, each of size at most `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryFamily {
    pub categories: Vec<Vec<GoodId>>,
}

impl CategoryFamily {
    pub fn new(categories: Vec<Vec<GoodId>>, n: usize) -> Result<Self> {
        let mut seen = GoodSet::new();
        for (c, category) in categories.iter().enumerate() {
            if category.len() > n {
                return Err(Error::invalid(format!(
                    "category {} has {} goods, more than the {n} agents",
                    c + 1,
                    category.len()
                )));
            }
            for g in category {
                if !seen.insert(*g) {
                    return Err(Error::invalid(format!("{g} appears in two categories")));
                }
            }
        }
        Ok(CategoryFamily { categories })
    }

    /// Consecutive blocks of `n` ranks within each day, `g'_{t,1..n}`,
    /// `g'_{t,n+1..2n}`, ...; the last block of a day may be short.
    pub fn per_day_blocks(instance: &TemporalInstance) -> Self {
        let n = instance.n();
        let categories = (1..=instance.k())
            .flat_map(|t| {
                let day: Vec<GoodId> = instance.day(t).collect();
                day.chunks(n).map(<[GoodId]>::to_vec).collect::<Vec<_>>()
            })
            .collect();
        CategoryFamily { categories }
    }

    pub fn goods(&self) -> GoodSet {
        self.categories.iter().flatten().copied().collect()
    }
}

/// EF1 allocation in which every agent gets `floor(|C|/n)` or `ceil(|C|/n)`
/// goods of every category `C`.
///
/// Categories are handled in order. Before each one, envy cycles are
/// removed by rotating bundles along the cycle; the agents then pick their
/// favourite remaining good of the category in a topological order of the
/// envy graph (unenvied agents first).
pub fn constrained_ef1(
    instance: &TemporalInstance,
    categories: &CategoryFamily,
) -> Result<Allocation> {
    let n = instance.n();
    instance.check_goods(categories.categories.iter().flatten())?;
    CategoryFamily::new(categories.categories.clone(), n)?;
    let mut bundles: Vec<Vec<GoodId>> = vec![Vec::new(); n];
    let mut utility: Vec<Vec<Rational>> = vec![vec![Rational::zero(); n]; n];

    for category in &categories.categories {
        eliminate_envy_cycles(&mut bundles, &mut utility);
        let order = topological_order(&utility);
        let mut remaining = category.clone();
        for agent in order {
            if remaining.is_empty() {
                break;
            }
            let pos = (0..remaining.len())
                .min_by(|&a, &b| instance.rank_cmp(agent, remaining[a], remaining[b]))
                .unwrap();
            let g = remaining.remove(pos);
            bundles[agent].push(g);
            for (i, row) in utility.iter_mut().enumerate() {
                row[agent] += instance.value(i, g);
            }
        }
    }
    eliminate_envy_cycles(&mut bundles, &mut utility);

    let mut allocation = Allocation::new(n);
    for (agent, bundle) in bundles.iter().enumerate() {
        for g in bundle {
            allocation.assign(*g, agent);
        }
    }
    Ok(allocation)
}

/// `utility[i][j]` is agent `i`'s value for agent `j`'s bundle.
fn envies(utility: &[Vec<Rational>], i: AgentId, j: AgentId) -> bool {
    utility[i][i] < utility[i][j]
}

fn find_envy_cycle(utility: &[Vec<Rational>]) -> Option<Vec<AgentId>> {
    let n = utility.len();
    // 0 unvisited, 1 on stack, 2 done
    let mut state = vec![0u8; n];
    let mut stack: Vec<(AgentId, usize)> = Vec::new();
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        state[start] = 1;
        stack.push((start, 0));
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(w) = (*next..n).find(|&w| w != v && envies(utility, v, w)) {
                *next = w + 1;
                match state[w] {
                    0 => {
                        state[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => {
                        let from = stack.iter().position(|(u, _)| *u == w).unwrap();
                        return Some(stack[from..].iter().map(|(u, _)| *u).collect());
                    }
                    _ => {}
                }
            } else {
                state[v] = 2;
                stack.pop();
            }
        }
    }
    None
}

fn eliminate_envy_cycles(bundles: &mut [Vec<GoodId>], utility: &mut [Vec<Rational>]) {
    while let Some(cycle) = find_envy_cycle(utility) {
        // cycle[p] envies cycle[p + 1]; each takes the bundle it envies.
        let taken: Vec<Vec<GoodId>> = (0..cycle.len())
            .map(|p| bundles[cycle[(p + 1) % cycle.len()]].clone())
            .collect();
        let columns: Vec<Vec<Rational>> = (0..cycle.len())
            .map(|p| {
                let src = cycle[(p + 1) % cycle.len()];
                utility.iter().map(|row| row[src].clone()).collect()
            })
            .collect();
        for (p, &agent) in cycle.iter().enumerate() {
            bundles[agent] = taken[p].clone();
            for (i, row) in utility.iter_mut().enumerate() {
                row[agent] = columns[p][i].clone();
            }
        }
    }
}

/// Kahn's algorithm on the (acyclic) envy graph, smallest agent first.
fn topological_order(utility: &[Vec<Rational>]) -> Vec<AgentId> {
    let n = utility.len();
    let mut indegree = vec![0usize; n];
    for i in 0..n {
        for (j, d) in indegree.iter_mut().enumerate() {
            if i != j && envies(utility, i, j) {
                *d += 1;
            }
        }
    }
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let v = (0..n)
            .find(|&v| !done[v] && indegree[v] == 0)
            .expect("envy graph has no cycles after elimination");
        done[v] = true;
        order.push(v);
        for (w, d) in indegree.iter_mut().enumerate() {
            if w != v && envies(utility, v, w) {
                *d -= 1;
            }
        }
    }
    order
}

/// Per day, the owners of `g'_{t,1}, g'_{t,2}, ...` in the reduced allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PickingSequence {
    pub picks: Vec<Vec<AgentId>>,
}

pub fn picking_sequence(
    transformed: &TransformedInstance,
    reduced: &Allocation,
) -> Result<PickingSequence> {
    let inst = &transformed.instance;
    if !reduced.is_total_on(&inst.all_goods()) {
        return Err(Error::invalid(
            "reduced allocation must cover every transformed good",
        ));
    }
    let picks = (1..=inst.k())
        .map(|t| inst.day(t).map(|g| reduced.owner(g).unwrap()).collect())
        .collect();
    Ok(PickingSequence { picks })
}

/// One turn of a daily picking sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pick {
    pub agent: AgentId,
    /// The transformed good whose turn this is.
    pub turn: GoodId,
    pub picked: GoodId,
}

pub fn execute_picking(
    instance: &TemporalInstance,
    transformed: &TransformedInstance,
    reduced: &Allocation,
) -> Result<Allocation> {
    Ok(execute_picking_traced(instance, transformed, reduced)?.0)
}

pub fn execute_picking_traced(
    instance: &TemporalInstance,
    transformed: &TransformedInstance,
    reduced: &Allocation,
) -> Result<(Allocation, Vec<Pick>)> {
    if transformed.instance.day_sizes() != instance.day_sizes()
        || transformed.instance.n() != instance.n()
    {
        return Err(Error::invalid(
            "transformed instance does not match the original",
        ));
    }
    let sequence = picking_sequence(transformed, reduced)?;
    let mut allocation = Allocation::new(instance.n());
    let mut trace = Vec::with_capacity(instance.m());
    for (t, picks) in sequence.picks.iter().enumerate() {
        let day = t + 1;
        let mut remaining: Vec<GoodId> = instance.day(day).collect();
        for (j, &agent) in picks.iter().enumerate() {
            let pos = (0..remaining.len())
                .min_by(|&a, &b| instance.rank_cmp(agent, remaining[a], remaining[b]))
                .unwrap();
            let picked = remaining.remove(pos);
            allocation.assign(picked, agent);
            trace.push(Pick {
                agent,
                turn: GoodId::new(day, j),
                picked,
            });
        }
    }
    Ok((allocation, trace))
}

/// All intermediate artefacts of one run of the general algorithm.
#[derive(Debug, Clone)]
pub struct GeneralRun {
    pub transformed: TransformedInstance,
    pub reduced: Allocation,
    pub allocation: Allocation,
    pub trace: Vec<Pick>,
}

/// SD-EF1 per day and PROP1 overall, for any instance.
pub fn allocate_general(instance: &TemporalInstance) -> Allocation {
    allocate_general_traced(instance).allocation
}

pub fn allocate_general_traced(instance: &TemporalInstance) -> GeneralRun {
    let transformed = identical_ordering_transform(instance);
    let categories = CategoryFamily::per_day_blocks(&transformed.instance);
    let reduced = constrained_ef1(&transformed.instance, &categories)
        .expect("per-day blocks are valid categories");
    let (allocation, trace) = execute_picking_traced(instance, &transformed, &reduced)
        .expect("reduced allocation is total");
    GeneralRun {
        transformed,
        reduced,
        allocation,
        trace,
    }
}

/// SD-EF1 per day and SD-PROP1 overall, for identical-days instances.
///
/// On such instances the transformed goods admit one ordering consistent
/// with every agent, so the reduced allocation can come from the
/// identical-orderings construction instead of the constrained EF1 step.
pub fn allocate_identical_days(instance: &TemporalInstance) -> Result<Allocation> {
    if canonical_day_orders(instance).is_none() {
        return Err(Error::invalid("instance does not have identical days"));
    }
    let transformed = identical_ordering_transform(instance);
    let reduced = identical::allocate_identical_orderings(&transformed.instance)?;
    execute_picking(instance, &transformed, &reduced)
}

/// For the per-agent bijection argument: `v_i(A_i) + max_{g ∉ A_i} v_i(g)`,
/// with the maximum taken as zero when the agent holds everything.
pub fn bundle_plus_best_outside(
    instance: &TemporalInstance,
    allocation: &Allocation,
    agent: AgentId,
) -> Rational {
    let own = instance.bundle_value(agent, &allocation.bundle(agent));
    let best = instance
        .goods()
        .filter(|g| allocation.owner(*g) != Some(agent))
        .map(|g| instance.value(agent, g))
        .max()
        .cloned()
        .unwrap_or_else(Rational::zero);
    own + best
}

/// Per agent and day, the sorted value multiset.
pub fn day_value_multisets(instance: &TemporalInstance) -> Vec<Vec<BTreeMap<Rational, usize>>> {
    (0..instance.n())
        .map(|i| {
            (1..=instance.k())
                .map(|t| {
                    let mut counts = BTreeMap::new();
                    for g in instance.day(t) {
                        *counts.entry(instance.value(i, g).clone()).or_insert(0) += 1;
                    }
                    counts
                })
                .collect()
        })
        .collect()
}
