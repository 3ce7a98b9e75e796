//! Two agents: opposite SD-EF1 pairs, envy balancing across days, and the
//! EFX / EF1+PO cancelling pairs.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::fairness::{cancel_out, check, Predicate};
use crate::model::{
    canonical_day_orders, Allocation, AllocationPair, GoodId, GoodSet, PreferenceOrdering,
    Rational, TemporalInstance,
};

/// Largest set the exhaustive pair constructions accept by default.
pub const DEFAULT_PAIR_BUDGET: usize = 20;

fn require_two(instance: &TemporalInstance) -> Result<()> {
    if instance.n() != 2 {
        return Err(Error::invalid(format!(
            "this construction is for two agents, the instance has {}",
            instance.n()
        )));
    }
    Ok(())
}

/// A partition `(B_1, B_2)` of `set` such that both `B = (B_1, B_2)` and
/// `B' = (B_2, B_1)` are SD-EF1.
///
/// Each agent pairs up its ranks `(1,2), (3,4), ...`; the union of the two
/// pairings is bipartite, and a 2-colouring splits every pair.
pub fn opposite_sdef1_pair(instance: &TemporalInstance, set: &GoodSet) -> Result<AllocationPair> {
    require_two(instance)?;
    instance.check_goods(set)?;
    let goods: Vec<GoodId> = set.iter().copied().collect();
    let index = |g: &GoodId| goods.binary_search(g).unwrap();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); goods.len()];
    for agent in 0..2 {
        let ranked = PreferenceOrdering::new(instance, agent, set).ranked;
        for pair in ranked.chunks_exact(2) {
            let (a, b) = (index(&pair[0]), index(&pair[1]));
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }

    let mut colour: Vec<Option<usize>> = vec![None; goods.len()];
    for seed in 0..goods.len() {
        if colour[seed].is_some() {
            continue;
        }
        colour[seed] = Some(0);
        let mut queue = std::collections::VecDeque::from([seed]);
        while let Some(v) = queue.pop_front() {
            let c = colour[v].unwrap();
            for &w in &adjacency[v] {
                match colour[w] {
                    None => {
                        colour[w] = Some(1 - c);
                        queue.push_back(w);
                    }
                    Some(cw) => assert_ne!(cw, c, "union of two matchings has an odd cycle"),
                }
            }
        }
    }
    let mut b = Allocation::new(2);
    for (g, c) in goods.iter().zip(colour) {
        b.assign(*g, c.unwrap());
    }
    let swapped = b.swapped();
    AllocationPair::new(b, swapped)
}

/// `(v_1(A_1) - v_1(A_2), v_2(A_2) - v_2(A_1))`: surplus when positive,
/// envy when negative.
fn margins(instance: &TemporalInstance, a: &Allocation) -> (Rational, Rational) {
    let bundles = a.bundles();
    let v = |i: usize, j: usize| instance.bundle_value(i, &bundles[j]);
    (v(0, 0) - v(0, 1), v(1, 1) - v(1, 0))
}

fn is_ef(instance: &TemporalInstance, a: &Allocation) -> bool {
    let (m1, m2) = margins(instance, a);
    !m1.is_negative() && !m2.is_negative()
}

/// State of the balancing machine: `(part, member)` choices locked in `f`
/// and still swappable in `s`, with the running margins of `A_S`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnvyState {
    pub f: Vec<(usize, usize)>,
    pub s: Vec<(usize, usize)>,
    pub e1: Rational,
    pub e2: Rational,
}

/// Result of balancing: the allocations induced by `F ∪ S` and by
/// `F ∪ SWAP(S)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Balanced {
    pub chosen: Allocation,
    pub swapped: Allocation,
}

fn combine(
    pairs: &[[Allocation; 2]],
    picks: impl IntoIterator<Item = (usize, usize)>,
) -> Allocation {
    let mut out = Allocation::new(2);
    for (part, member) in picks {
        out.extend_disjoint(&pairs[part][member])
            .expect("parts are disjoint");
    }
    out
}

/// The balancing machine over disjoint parts, each with a cancelling pair of
/// EF1 allocations. `names[p]` labels part `p` in error messages.
pub(crate) fn balance(
    instance: &TemporalInstance,
    pairs: &[AllocationPair],
    names: &[String],
) -> Result<Balanced> {
    require_two(instance)?;
    let mut normalized: Vec<[Allocation; 2]> = Vec::with_capacity(pairs.len());
    for (pair, name) in pairs.iter().zip(names) {
        let domain = pair.domain();
        if !cancel_out(instance, pair)? {
            return Err(Error::invalid(format!(
                "the pair for {name} does not cancel out"
            )));
        }
        for member in pair.members() {
            if !check(instance, member, &domain, Predicate::Ef1)?.passed() {
                return Err(Error::invalid(format!(
                    "a pair member for {name} is not EF1"
                )));
            }
        }
        let (first, second) = (pair.first.clone(), pair.second.clone());
        let neither_ef = !is_ef(instance, &first) && !is_ef(instance, &second);
        if neither_ef && margins(instance, &first).0.is_negative() {
            normalized.push([second, first]);
        } else {
            normalized.push([first, second]);
        }
    }

    let mut state = EnvyState::default();
    for (t, members) in normalized.iter().enumerate() {
        if is_ef(instance, &members[0]) {
            state.f.push((t, 0));
        } else if is_ef(instance, &members[1]) {
            state.f.push((t, 1));
        } else {
            let member = if !state.e1.is_positive() { 0 } else { 1 };
            let (d1, d2) = margins(instance, &members[member]);
            state.s.push((t, member));
            state.e1 += d1;
            state.e2 += d2;
        }

        if !state.e1.is_negative() && !state.e2.is_negative() {
            state.f.append(&mut state.s);
            state.e1 = Rational::zero();
            state.e2 = Rational::zero();
        } else if !state.e1.is_positive() && !state.e2.is_positive() {
            let swapped = state.s.drain(..).map(|(p, m)| (p, 1 - m));
            state.f.extend(swapped);
            state.e1 = Rational::zero();
            state.e2 = Rational::zero();
        }

        if cfg!(debug_assertions) {
            check_invariants(instance, &normalized, &state);
        }
    }

    let swap_s = state.s.iter().map(|(p, m)| (*p, 1 - *m));
    Ok(Balanced {
        chosen: combine(&normalized, state.f.iter().chain(&state.s).copied()),
        swapped: combine(&normalized, state.f.iter().copied().chain(swap_s)),
    })
}

fn check_invariants(instance: &TemporalInstance, pairs: &[[Allocation; 2]], state: &EnvyState) {
    let a_f = combine(pairs, state.f.iter().copied());
    let a_s = combine(pairs, state.s.iter().copied());
    let a_swap = combine(pairs, state.s.iter().map(|(p, m)| (*p, 1 - *m)));
    let holds = |a: &Allocation, p: Predicate| check(instance, a, &a.domain(), p).unwrap().passed();
    assert!(
        holds(&a_f, Predicate::Ef),
        "locked-in allocation lost envy-freeness"
    );
    assert!(holds(&a_s, Predicate::Ef1), "swappable allocation lost EF1");
    assert!(
        holds(&a_swap, Predicate::Ef1),
        "swapped allocation lost EF1"
    );
    let pair = AllocationPair::new(a_s, a_swap).unwrap();
    assert!(
        cancel_out(instance, &pair).unwrap(),
        "swappable pair stopped cancelling"
    );
    assert_eq!(
        margins(instance, &pair.first),
        (state.e1.clone(), state.e2.clone())
    );
}

/// EF1 up to each day, using exactly one member of each day's pair.
/// `pairs[t]` must allocate the goods of day `t + 1`.
pub fn envy_balancing(instance: &TemporalInstance, pairs: &[AllocationPair]) -> Result<Allocation> {
    require_two(instance)?;
    if pairs.len() != instance.k() {
        return Err(Error::invalid(format!(
            "{} pairs given for {} days",
            pairs.len(),
            instance.k()
        )));
    }
    for (t, pair) in pairs.iter().enumerate() {
        if pair.domain() != instance.day_set(t + 1) || pair.first.n() != 2 {
            return Err(Error::invalid(format!(
                "the pair for day {} does not allocate exactly that day's goods",
                t + 1
            )));
        }
    }
    let names: Vec<String> = (1..=pairs.len()).map(|t| format!("day {t}")).collect();
    Ok(balance(instance, pairs, &names)?.chosen)
}

/// SD-EF1 per day and EF1 up to each day.
pub fn allocate_two_agents(instance: &TemporalInstance) -> Result<Allocation> {
    require_two(instance)?;
    let pairs = (1..=instance.k())
        .map(|t| opposite_sdef1_pair(instance, &instance.day_set(t)))
        .collect::<Result<Vec<_>>>()?;
    envy_balancing(instance, &pairs)
}

/// For two agents and identical days: one opposite pair `(B, B')` on the
/// first day, `B` on odd days and `B'` on even days. SD-EF1 per day and up to
/// each day, and SD-EF at every even prefix.
pub fn allocate_two_agents_identical_days(instance: &TemporalInstance) -> Result<Allocation> {
    require_two(instance)?;
    let orders = canonical_day_orders(instance)
        .ok_or_else(|| Error::invalid("instance does not have identical days"))?;
    let pair = opposite_sdef1_pair(instance, &instance.day_set(1))?;
    let mut out = Allocation::new(2);
    for (t, order) in orders.iter().enumerate() {
        let member = if t % 2 == 0 {
            &pair.first
        } else {
            &pair.second
        };
        for (r, g) in order.iter().enumerate() {
            out.assign(*g, member.owner(orders[0][r]).unwrap());
        }
    }
    Ok(out)
}

/// Cut-and-choose: `cutter` splits `goods` as evenly as possible by its own
/// values, `chooser` takes its preferred side.
fn cut_and_choose(instance: &TemporalInstance, goods: &[GoodId], cutter: usize) -> Allocation {
    let chooser = 1 - cutter;
    let vc = |g: &GoodId| instance.value(cutter, *g);
    let mut out = Allocation::new(2);
    if goods.is_empty() {
        return out;
    }
    let (mut p, mut q): (Vec<GoodId>, Vec<GoodId>) = if goods.iter().all(|g| vc(g).is_zero()) {
        (Vec::new(), goods.to_vec())
    } else {
        let free = goods.len() - 1;
        let total = instance.bundle_value(cutter, goods);
        let mut best: Option<(Rational, u64)> = None;
        for mask in 0u64..(1u64 << free) {
            let side: Rational = goods[..free]
                .iter()
                .enumerate()
                .filter(|(p, _)| mask >> p & 1 == 1)
                .fold(Rational::zero(), |acc, (_, g)| acc + vc(g));
            let diff = (&total - &side - &side).abs();
            if best.as_ref().is_none_or(|(d, _)| diff < *d) {
                best = Some((diff, mask));
            }
        }
        let mask = best.unwrap().1;
        let (mut p, mut q) = (Vec::new(), Vec::new());
        for (pos, g) in goods.iter().enumerate() {
            if pos < free && mask >> pos & 1 == 1 {
                p.push(*g);
            } else {
                q.push(*g);
            }
        }
        if instance.bundle_value(cutter, &p) < instance.bundle_value(cutter, &q) {
            std::mem::swap(&mut p, &mut q);
        }
        (p, q)
    };
    let zeros: Vec<GoodId> = p.iter().copied().filter(|g| vc(g).is_zero()).collect();
    p.retain(|g| !vc(g).is_zero());
    q.extend(zeros);

    let (hp, hq) = (
        instance.bundle_value(chooser, &p),
        instance.bundle_value(chooser, &q),
    );
    let chooser_takes_p = if hp != hq {
        hp > hq
    } else {
        // Indifferent chooser takes what the cutter values less.
        instance.bundle_value(cutter, &p) < instance.bundle_value(cutter, &q)
    };
    let (mine, theirs) = if chooser_takes_p { (p, q) } else { (q, p) };
    for g in mine {
        out.assign(g, chooser);
    }
    for g in theirs {
        out.assign(g, cutter);
    }
    out
}

fn check_budget(set: &GoodSet, budget: usize) -> Result<()> {
    if set.len() > budget || set.len() > 62 {
        return Err(Error::ResourceLimit(format!(
            "exhaustive pair search over {} goods exceeds the budget of {budget}",
            set.len()
        )));
    }
    Ok(())
}

/// Two cancelling EFX allocations of `set`: agent 1 cuts and agent 2
/// chooses, then the other way round.
pub fn efx_pair(instance: &TemporalInstance, set: &GoodSet) -> Result<AllocationPair> {
    efx_pair_with(instance, set, DEFAULT_PAIR_BUDGET)
}

pub fn efx_pair_with(
    instance: &TemporalInstance,
    set: &GoodSet,
    budget: usize,
) -> Result<AllocationPair> {
    require_two(instance)?;
    instance.check_goods(set)?;
    check_budget(set, budget)?;
    let goods: Vec<GoodId> = set.iter().copied().collect();
    let b = cut_and_choose(instance, &goods, 0);
    let b2 = cut_and_choose(instance, &goods, 1);
    debug_assert!({
        let (m, _) = margins(instance, &b);
        let (m2, _) = margins(instance, &b2);
        m2.abs() >= m.abs()
    });
    AllocationPair::new(b, b2)
}

/// Two cancelling allocations of `set` that are each EF1 and Pareto
/// optimal. Each non-PO member of [`efx_pair`] is replaced by the PO
/// allocation dominating it that moves the fewest goods.
pub fn ef1_po_pair(instance: &TemporalInstance, set: &GoodSet) -> Result<AllocationPair> {
    ef1_po_pair_with(instance, set, DEFAULT_PAIR_BUDGET)
}

pub fn ef1_po_pair_with(
    instance: &TemporalInstance,
    set: &GoodSet,
    budget: usize,
) -> Result<AllocationPair> {
    let pair = efx_pair_with(instance, set, budget)?;
    let goods: Vec<GoodId> = set.iter().copied().collect();
    let s = goods.len();
    // bit p set: goods[p] goes to agent 2
    let utilities: Vec<(Rational, Rational)> = (0u64..1u64 << s)
        .map(|mask| {
            let mut u = (Rational::zero(), Rational::zero());
            for (p, g) in goods.iter().enumerate() {
                if mask >> p & 1 == 1 {
                    u.1 += instance.value(1, *g);
                } else {
                    u.0 += instance.value(0, *g);
                }
            }
            u
        })
        .collect();
    let pareto = pareto_optimal_masks(&utilities);
    let to_mask = |a: &Allocation| -> u64 {
        goods
            .iter()
            .enumerate()
            .filter(|(_, g)| a.owner(**g) == Some(1))
            .fold(0, |m, (p, _)| m | 1 << p)
    };
    let improve = |a: &Allocation| -> Allocation {
        let mask = to_mask(a);
        if pareto[mask as usize] {
            return a.clone();
        }
        let (u0, u1) = &utilities[mask as usize];
        let best = (0u64..1u64 << s)
            .filter(|&m| {
                pareto[m as usize]
                    && utilities[m as usize].0 >= *u0
                    && utilities[m as usize].1 >= *u1
            })
            .min_by_key(|&m| ((m ^ mask).count_ones(), m))
            .expect("a dominated allocation has a Pareto-optimal improvement");
        let mut out = Allocation::new(2);
        for (p, g) in goods.iter().enumerate() {
            out.assign(*g, (best >> p & 1) as usize);
        }
        debug_assert!(check(instance, &out, set, Predicate::Ef1).unwrap().passed());
        out
    };
    AllocationPair::new(improve(&pair.first), improve(&pair.second))
}

/// `result[mask]` tells whether the allocation with utilities
/// `utilities[mask]` is Pareto optimal among all of them.
fn pareto_optimal_masks(utilities: &[(Rational, Rational)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..utilities.len()).collect();
    order.sort_by(|&a, &b| utilities[b].0.cmp(&utilities[a].0));
    let mut result = vec![false; utilities.len()];
    let mut best_above: Option<Rational> = None;
    let mut start = 0;
    while start < order.len() {
        let u0 = &utilities[order[start]].0;
        let end = start
            + order[start..]
                .iter()
                .take_while(|&&m| utilities[m].0 == *u0)
                .count();
        let group_max = order[start..end]
            .iter()
            .map(|&m| &utilities[m].1)
            .max()
            .unwrap()
            .clone();
        let beats_above = best_above.as_ref().is_none_or(|b| group_max > *b);
        for &m in &order[start..end] {
            result[m] = beats_above && utilities[m].1 == group_max;
        }
        if beats_above {
            best_above = Some(group_max);
        }
        start = end;
    }
    result
}
