//! Seeded instance generators and brute-force predicate oracles shared by
//! the integration tests. The oracles work from valuations alone and never
//! call into `tempfair::fairness`.

#![allow(dead_code)]

use std::collections::BTreeSet;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tempfair::{Allocation, GoodId, GoodSet, Rational, TemporalInstance};

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent integer values in `lo..=hi`; `sizes[t]` goods on day `t + 1`.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    sizes: &[usize],
    lo: i64,
    hi: i64,
) -> TemporalInstance {
    let days = sizes
        .iter()
        .map(|&len| {
            (0..len)
                .map(|_| (0..n).map(|_| rng.gen_range(lo..=hi)).collect())
                .collect()
        })
        .collect();
    TemporalInstance::from_integers(n, days).unwrap()
}

pub fn random_sizes(
    rng: &mut ChaCha8Rng,
    k: usize,
    per_day: std::ops::RangeInclusive<usize>,
) -> Vec<usize> {
    (0..k).map(|_| rng.gen_range(per_day.clone())).collect()
}

/// Every agent's values are a strictly increasing image of one random level
/// per good, so all agents share one weak order.
pub fn identical_orderings_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    sizes: &[usize],
) -> TemporalInstance {
    let levels = 6usize;
    let maps: Vec<Vec<i64>> = (0..n)
        .map(|_| {
            let mut image: Vec<i64> = rand::seq::index::sample(rng, 20, levels)
                .into_iter()
                .map(|x| x as i64)
                .collect();
            image.sort_unstable();
            image
        })
        .collect();
    let days = sizes
        .iter()
        .map(|&len| {
            (0..len)
                .map(|_| {
                    let level = rng.gen_range(0..levels);
                    maps.iter().map(|m| m[level]).collect()
                })
                .collect()
        })
        .collect();
    TemporalInstance::from_integers(n, days).unwrap()
}

/// Day 1 is random; every later day is a shuffled copy of it.
pub fn identical_days_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    len: usize,
    hi: i64,
) -> TemporalInstance {
    let first: Vec<Vec<i64>> = (0..len)
        .map(|_| (0..n).map(|_| rng.gen_range(0..=hi)).collect())
        .collect();
    let days = (0..k)
        .map(|_| {
            let mut day = first.clone();
            day.shuffle(rng);
            day
        })
        .collect();
    TemporalInstance::from_integers(n, days).unwrap()
}

pub fn random_allocation(rng: &mut ChaCha8Rng, instance: &TemporalInstance) -> Allocation {
    let mut a = Allocation::new(instance.n());
    for g in instance.goods() {
        a.assign(g, rng.gen_range(0..instance.n()));
    }
    a
}

/// Round-robin over one random agent's ranking with a random start, then a
/// few random reassignments. Lands near the SD predicates' boundaries far
/// more often than uniform sampling.
pub fn near_round_robin(rng: &mut ChaCha8Rng, instance: &TemporalInstance) -> Allocation {
    let n = instance.n();
    let pivot = rng.gen_range(0..n);
    let mut goods: Vec<GoodId> = instance.goods().collect();
    goods.sort_by(|a, b| {
        instance
            .value(pivot, *b)
            .cmp(instance.value(pivot, *a))
            .then(a.cmp(b))
    });
    let start = rng.gen_range(0..n);
    let mut a = Allocation::new(n);
    for (p, g) in goods.iter().enumerate() {
        a.assign(*g, (start + p) % n);
    }
    for _ in 0..rng.gen_range(0..=2) {
        let g = goods[rng.gen_range(0..goods.len())];
        a.assign(g, rng.gen_range(0..n));
    }
    a
}

pub fn value(instance: &TemporalInstance, agent: usize, goods: &[GoodId]) -> Rational {
    goods
        .iter()
        .fold(Rational::zero(), |acc, g| acc + instance.value(agent, *g))
}

/// Bundles of `allocation` restricted to `set`.
pub fn bundles(allocation: &Allocation, set: &GoodSet) -> Vec<Vec<GoodId>> {
    let mut out = vec![Vec::new(); allocation.n()];
    for g in set {
        out[allocation.owner(*g).expect("allocation covers the set")].push(*g);
    }
    out
}

fn without(goods: &[GoodId], g: GoodId) -> Vec<GoodId> {
    goods.iter().copied().filter(|h| *h != g).collect()
}

/// Goods of `set` that `agent` values at least as much as `good`.
pub fn weakly_preferred(
    instance: &TemporalInstance,
    agent: usize,
    set: &GoodSet,
    good: GoodId,
) -> BTreeSet<GoodId> {
    set.iter()
        .copied()
        .filter(|h| instance.value(agent, *h) >= instance.value(agent, good))
        .collect()
}

fn count_in(goods: &[GoodId], within: &BTreeSet<GoodId>) -> usize {
    goods.iter().filter(|g| within.contains(g)).count()
}

pub fn ef(instance: &TemporalInstance, a: &Allocation, set: &GoodSet) -> bool {
    let b = bundles(a, set);
    let n = instance.n();
    (0..n).all(|i| (0..n).all(|j| value(instance, i, &b[i]) >= value(instance, i, &b[j])))
}

pub fn ef1(instance: &TemporalInstance, a: &Allocation, set: &GoodSet) -> bool {
    let b = bundles(a, set);
    let n = instance.n();
    (0..n).all(|i| {
        (0..n).all(|j| {
            i == j
                || b[j].is_empty()
                || b[j]
                    .iter()
                    .any(|g| value(instance, i, &b[i]) >= value(instance, i, &without(&b[j], *g)))
        })
    })
}

pub fn efx(instance: &TemporalInstance, a: &Allocation, set: &GoodSet) -> bool {
    let b = bundles(a, set);
    let n = instance.n();
    (0..n).all(|i| {
        (0..n).all(|j| {
            i == j
                || b[j]
                    .iter()
                    .all(|g| value(instance, i, &b[i]) >= value(instance, i, &without(&b[j], *g)))
        })
    })
}

pub fn prop(instance: &TemporalInstance, a: &Allocation, set: &GoodSet) -> bool {
    let b = bundles(a, set);
    let all: Vec<GoodId> = set.iter().copied().collect();
    let n = instance.n();
    (0..n).all(|i| {
        value(instance, i, &b[i]) * Rational::from_integer(n.into()) >= value(instance, i, &all)
    })
}

pub fn prop1(instance: &TemporalInstance, a: &Allocation, set: &GoodSet) -> bool {
    let b = bundles(a, set);
    let all: Vec<GoodId> = set.iter().copied().collect();
    let n = Rational::from_integer(instance.n().into());
    (0..instance.n()).all(|i| {
        let share = value(instance, i, &all) / &n;
        let own = value(instance, i, &b[i]);
        own >= share
            || all
                .iter()
                .filter(|g| !b[i].contains(g))
                .any(|g| &own + instance.value(i, *g) >= share)
    })
}

pub fn sd_ef(instance: &TemporalInstance, a: &Allocation, set: &GoodSet) -> bool {
    let b = bundles(a, set);
    let n = instance.n();
    (0..n).all(|i| {
        set.iter().all(|g| {
            let h = weakly_preferred(instance, i, set, *g);
            (0..n).all(|j| count_in(&b[i], &h) >= count_in(&b[j], &h))
        })
    })
}

pub fn sd_ef1(instance: &TemporalInstance, a: &Allocation, set: &GoodSet) -> bool {
    let b = bundles(a, set);
    let n = instance.n();
    (0..n).all(|i| {
        (0..n).all(|j| {
            i == j
                || b[j].is_empty()
                || b[j].iter().any(|removed| {
                    let rest = without(&b[j], *removed);
                    set.iter().all(|g| {
                        let h = weakly_preferred(instance, i, set, *g);
                        count_in(&b[i], &h) >= count_in(&rest, &h)
                    })
                })
        })
    })
}

pub fn sd_prop1(instance: &TemporalInstance, a: &Allocation, set: &GoodSet) -> bool {
    let b = bundles(a, set);
    let n = instance.n();
    (0..n).all(|i| {
        b[i].len() == set.len()
            || set.iter().filter(|g| !b[i].contains(g)).any(|extra| {
                let mut with = b[i].clone();
                with.push(*extra);
                set.iter().all(|g| {
                    let h = weakly_preferred(instance, i, set, *g);
                    count_in(&with, &h) >= h.len().div_ceil(n)
                })
            })
    })
}

/// Every allocation of `set`, as owner vectors over `set` in order.
pub fn all_assignments(n: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(len as u32);
    (0..total).map(move |mut code| {
        let mut owners = vec![0; len];
        for o in owners.iter_mut().rev() {
            *o = code % n;
            code /= n;
        }
        owners
    })
}

/// Pareto optimality by comparing against every allocation of `set`.
pub fn po(instance: &TemporalInstance, a: &Allocation, set: &GoodSet) -> bool {
    let goods: Vec<GoodId> = set.iter().copied().collect();
    let n = instance.n();
    let current: Vec<Rational> = bundles(a, set)
        .iter()
        .enumerate()
        .map(|(i, b)| value(instance, i, b))
        .collect();
    all_assignments(n, goods.len()).all(|owners| {
        let mut utils = vec![Rational::zero(); n];
        for (g, o) in goods.iter().zip(&owners) {
            utils[*o] += instance.value(*o, *g);
        }
        let weakly = utils.iter().zip(&current).all(|(u, c)| u >= c);
        let strictly = utils.iter().zip(&current).any(|(u, c)| u > c);
        !(weakly && strictly)
    })
}

/// Both inequalities of the doubled-goods envy-freeness test, for two agents.
pub fn cancels(instance: &TemporalInstance, x: &Allocation, y: &Allocation, set: &GoodSet) -> bool {
    let (bx, by) = (bundles(x, set), bundles(y, set));
    (0..2).all(|i| {
        value(instance, i, &bx[i]) + value(instance, i, &by[i])
            >= value(instance, i, &bx[1 - i]) + value(instance, i, &by[1 - i])
    })
}

pub fn prefix(instance: &TemporalInstance, day: usize) -> GoodSet {
    instance.goods().filter(|g| g.day <= day).collect()
}
