//! JSON documents for instances and allocations, and seeded instance
//! generators.
//!
//! Values are written as exact strings, `"7/2"` or `"3"`, never as JSON
//! numbers. Agents are numbered from 1 in every document.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laminar::LaminarFamily;
use crate::model::{
    classify, int, Allocation, GoodId, GoodSet, GoodSpec, Rational, TemporalInstance,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodRecord {
    pub id: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub version: u32,
    pub n: usize,
    pub days: Vec<Vec<GoodRecord>>,
    /// Sets of good ids forming a laminar family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laminar: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationDocument {
    pub version: u32,
    /// Good id to 1-based agent.
    pub allocation: BTreeMap<String, usize>,
}

fn parse_json<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: match e.path().to_string().as_str() {
            "." => "document".to_string(),
            p => p.to_string(),
        },
        message: e.inner().to_string(),
    })
}

fn check_version(version: u32) -> Result<()> {
    if version != SCHEMA_VERSION {
        return Err(Error::Parse {
            path: "version".into(),
            message: format!("unsupported schema version {version}, expected {SCHEMA_VERSION}"),
        });
    }
    Ok(())
}

/// Parses `"p/q"` or an integer string.
pub fn parse_rational(text: &str) -> std::result::Result<Rational, String> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (text, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| format!("{text:?} is not a rational"))?;
    let den = BigInt::from_str(den).map_err(|_| format!("{text:?} is not a rational"))?;
    if den == BigInt::from(0) {
        return Err(format!("{text:?} has a zero denominator"));
    }
    Ok(Rational::new(num, den))
}

pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn parse_instance(bytes: &[u8]) -> Result<(TemporalInstance, Option<LaminarFamily>)> {
    let doc: InstanceDocument = parse_json(bytes)?;
    document_to_instance(&doc)
}

pub fn document_to_instance(
    doc: &InstanceDocument,
) -> Result<(TemporalInstance, Option<LaminarFamily>)> {
    check_version(doc.version)?;
    let mut days = Vec::with_capacity(doc.days.len());
    for (t, day) in doc.days.iter().enumerate() {
        let mut goods = Vec::with_capacity(day.len());
        for (j, record) in day.iter().enumerate() {
            let values = record
                .values
                .iter()
                .enumerate()
                .map(|(a, v)| {
                    parse_rational(v).map_err(|message| Error::Parse {
                        path: format!("days[{t}][{j}].values[{a}]"),
                        message,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            goods.push(GoodSpec::new(record.id.clone(), values));
        }
        days.push(goods);
    }
    let instance = TemporalInstance::new(doc.n, days)?;
    let family = match &doc.laminar {
        None => None,
        Some(sets) => {
            let sets = sets
                .iter()
                .enumerate()
                .map(|(s, ids)| {
                    ids.iter()
                        .enumerate()
                        .map(|(p, id)| {
                            instance.find_label(id).ok_or_else(|| Error::Parse {
                                path: format!("laminar[{s}][{p}]"),
                                message: format!("unknown good id {id:?}"),
                            })
                        })
                        .collect::<Result<GoodSet>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let family = LaminarFamily::new(sets)
                .map_err(|e| Error::Validation(format!("laminar block: {e}")))?;
            Some(family)
        }
    };
    Ok((instance, family))
}

pub fn instance_to_document(
    instance: &TemporalInstance,
    family: Option<&LaminarFamily>,
) -> InstanceDocument {
    InstanceDocument {
        version: SCHEMA_VERSION,
        n: instance.n(),
        days: (1..=instance.k())
            .map(|t| {
                instance
                    .day(t)
                    .map(|g| GoodRecord {
                        id: instance.label(g).to_string(),
                        values: (0..instance.n())
                            .map(|i| format_rational(instance.value(i, g)))
                            .collect(),
                    })
                    .collect()
            })
            .collect(),
        laminar: family.map(|f| {
            f.sets()
                .iter()
                .map(|s| s.iter().map(|g| instance.label(*g).to_string()).collect())
                .collect()
        }),
    }
}

pub fn serialize_instance(instance: &TemporalInstance, family: Option<&LaminarFamily>) -> String {
    serde_json::to_string_pretty(&instance_to_document(instance, family))
        .expect("documents serialize")
}

pub fn allocation_to_document(
    instance: &TemporalInstance,
    allocation: &Allocation,
) -> AllocationDocument {
    AllocationDocument {
        version: SCHEMA_VERSION,
        allocation: allocation
            .iter()
            .map(|(g, a)| (instance.label(g).to_string(), a + 1))
            .collect(),
    }
}

pub fn serialize_allocation(instance: &TemporalInstance, allocation: &Allocation) -> String {
    serde_json::to_string_pretty(&allocation_to_document(instance, allocation))
        .expect("documents serialize")
}

/// Reads an allocation of every good of `instance`.
pub fn parse_allocation(bytes: &[u8], instance: &TemporalInstance) -> Result<Allocation> {
    let doc: AllocationDocument = parse_json(bytes)?;
    document_to_allocation(&doc, instance)
}

pub fn document_to_allocation(
    doc: &AllocationDocument,
    instance: &TemporalInstance,
) -> Result<Allocation> {
    check_version(doc.version)?;
    let mut owner = BTreeMap::new();
    for (id, agent) in &doc.allocation {
        let good = instance.find_label(id).ok_or_else(|| Error::Parse {
            path: format!("allocation.{id}"),
            message: "unknown good id".into(),
        })?;
        if *agent == 0 || *agent > instance.n() {
            return Err(Error::Validation(format!(
                "good {id:?} assigned to agent {agent}, agents are 1..={}",
                instance.n()
            )));
        }
        owner.insert(good, agent - 1);
    }
    if let Some(g) = instance.goods().find(|g| !owner.contains_key(g)) {
        return Err(Error::Validation(format!(
            "good {:?} is not allocated",
            instance.label(g)
        )));
    }
    Allocation::from_owner(instance.n(), owner)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Distribution {
    /// Independent integers in `lo..=hi` per agent and good.
    UniformInteger { lo: i64, hi: i64 },
    /// Per agent and day, a random ranking of the day's goods valued
    /// `2^(len-1)`, ..., `2`, `1`.
    ExponentialRank,
    /// One integer in `lo..=hi` per good, shared by all agents.
    IdenticalAgents { lo: i64, hi: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n: usize,
    pub k: usize,
    pub goods_per_day: Range,
    pub distribution: Distribution,
    #[serde(default)]
    pub identical_orderings: bool,
    #[serde(default)]
    pub identical_days: bool,
    #[serde(default)]
    pub seed: u64,
}

pub fn parse_generator_config(bytes: &[u8]) -> Result<GeneratorConfig> {
    parse_json(bytes)
}

/// Deterministic in `config` (including its seed).
pub fn generate_instance(config: &GeneratorConfig) -> Result<TemporalInstance> {
    let GeneratorConfig {
        n,
        k,
        goods_per_day,
        distribution,
        ..
    } = *config;
    if n == 0 || k == 0 {
        return Err(Error::invalid("generator needs n >= 1 and k >= 1"));
    }
    if goods_per_day.min == 0 || goods_per_day.min > goods_per_day.max {
        return Err(Error::invalid(format!(
            "goods per day range {}..={} is empty or allows empty days",
            goods_per_day.min, goods_per_day.max
        )));
    }
    match distribution {
        Distribution::UniformInteger { lo, hi } | Distribution::IdenticalAgents { lo, hi }
            if lo < 0 || lo > hi =>
        {
            return Err(Error::invalid(format!(
                "value range {lo}..={hi} is empty or negative"
            )));
        }
        Distribution::ExponentialRank if goods_per_day.max > 62 => {
            return Err(Error::invalid(
                "exponential-rank values need at most 62 goods per day",
            ));
        }
        _ => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let day_count = if config.identical_days { 1 } else { k };
    let sizes: Vec<usize> = (0..day_count)
        .map(|_| rng.gen_range(goods_per_day.min..=goods_per_day.max))
        .collect();

    // values[t][j][agent]
    let mut values: Vec<Vec<Vec<i64>>> = sizes
        .iter()
        .map(|&len| draw_day(&mut rng, n, len, distribution))
        .collect();

    if config.identical_orderings && n > 1 {
        // Re-express every agent's values as an increasing function of
        // agent 1's, so all agents share one weak order.
        let mut levels: Vec<i64> = values.iter().flatten().map(|good| good[0]).collect();
        levels.sort_unstable();
        levels.dedup();
        let (lo, hi) = match distribution {
            Distribution::UniformInteger { lo, hi } | Distribution::IdenticalAgents { lo, hi } => {
                (lo, hi)
            }
            Distribution::ExponentialRank => (1, (4 * levels.len()).max(10) as i64),
        };
        for agent in 1..n {
            let mut image: Vec<i64> =
                if matches!(distribution, Distribution::IdenticalAgents { .. }) {
                    levels.clone()
                } else {
                    let span = (hi - lo + 1) as usize;
                    let mut picked: Vec<i64> =
                        rand::seq::index::sample(&mut rng, span, levels.len())
                            .into_iter()
                            .map(|x| lo + x as i64)
                            .collect();
                    picked.sort_unstable();
                    picked
                };
            image.dedup();
            for good in values.iter_mut().flatten() {
                let level = levels.binary_search(&good[0]).unwrap();
                good[agent] = image[level];
            }
        }
    }

    if config.identical_days {
        let first = values[0].clone();
        values = (0..k)
            .map(|t| {
                let mut day = first.clone();
                if t > 0 {
                    day.shuffle(&mut rng);
                }
                day
            })
            .collect();
    }

    let instance = TemporalInstance::from_integers(n, values)?;
    let flags = classify(&instance);
    assert!(
        !config.identical_orderings || flags.identical_orderings,
        "generator broke identical orderings"
    );
    assert!(
        !config.identical_days || flags.identical_days,
        "generator broke identical days"
    );
    Ok(instance)
}

#[allow(clippy::needless_range_loop)]
fn draw_day(
    rng: &mut ChaCha8Rng,
    n: usize,
    len: usize,
    distribution: Distribution,
) -> Vec<Vec<i64>> {
    match distribution {
        Distribution::UniformInteger { lo, hi } => (0..len)
            .map(|_| (0..n).map(|_| rng.gen_range(lo..=hi)).collect())
            .collect(),
        Distribution::IdenticalAgents { lo, hi } => {
            (0..len).map(|_| vec![rng.gen_range(lo..=hi); n]).collect()
        }
        Distribution::ExponentialRank => {
            let mut day = vec![vec![0i64; n]; len];
            for agent in 0..n {
                let mut ranks: Vec<usize> = (0..len).collect();
                ranks.shuffle(rng);
                for (j, r) in ranks.into_iter().enumerate() {
                    day[j][agent] = 1i64 << (len - 1 - r);
                }
            }
            day
        }
    }
}

/// A random laminar family over the goods of `instance`, built by
/// recursively splitting sets into contiguous runs; `depth` bounds nesting.
pub fn random_laminar_family(
    instance: &TemporalInstance,
    depth: usize,
    seed: u64,
) -> LaminarFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut goods: Vec<GoodId> = instance.goods().collect();
    goods.shuffle(&mut rng);
    let mut sets = Vec::new();
    split(&mut rng, &goods, depth, &mut sets);
    LaminarFamily::new(sets).expect("recursive splitting is laminar")
}

fn split(rng: &mut ChaCha8Rng, goods: &[GoodId], depth: usize, out: &mut Vec<GoodSet>) {
    if depth == 0 || goods.is_empty() {
        return;
    }
    // Sometimes leave a set out so completion has work to do.
    if rng.gen_bool(0.8) {
        out.push(goods.iter().copied().collect());
    }
    if goods.len() < 2 {
        return;
    }
    let parts = rng.gen_range(2..=goods.len().min(4));
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, goods.len() - 1, parts - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut start = 0;
    for end in cuts.into_iter().chain(std::iter::once(goods.len())) {
        split(rng, &goods[start..end], depth - 1, out);
        start = end;
    }
}

/// Convenience for tests and examples: integer values as strings.
pub fn integer_values(values: &[i64]) -> Vec<String> {
    values.iter().map(|v| format_rational(&int(*v))).collect()
}
