//! Turns a workload description into interests and messages for one sweep
//! point and seed.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::{ExperimentSpec, RateStep, Workload};
use crate::engine::ConfigError;
use crate::model::{Addressing, InterestId, Message, MessageId, NodeId, SimTime};
use crate::protocols::ProtocolKind;

/// Who wants what, fixed per experiment and load.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub interests: Vec<BTreeSet<InterestId>>,
    /// Per group, how many interests its members hold (groups workload).
    pub group_interests: Vec<u32>,
}

/// A message before its size and TTL are known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draft {
    pub source: NodeId,
    pub addressing: Addressing,
    pub created_at: f64,
    pub size: Option<u64>,
}

fn layout_rng(spec: &ExperimentSpec, load: Option<u32>) -> ChaCha8Rng {
    let salt = u64::from(load.unwrap_or(0)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ChaCha8Rng::seed_from_u64(spec.layout_seed ^ salt)
}

fn pick(rng: &mut ChaCha8Rng, types: u32, count: u32) -> BTreeSet<InterestId> {
    sample(rng, types as usize, count as usize)
        .into_iter()
        .map(|x| InterestId(x as u32))
        .collect()
}

/// Chooses an interest count in `0..=types` per group so that
/// `Σ size(g) * count(g) == target`, keeping counts as even as possible.
pub fn solve_group_interests(sizes: &[u64], types: u32, target: u64) -> Option<Vec<u32>> {
    let total: u64 = sizes.iter().sum();
    if total == 0 {
        return (target == 0).then(|| vec![0; sizes.len()]);
    }
    let ideal = target as f64 / total as f64;
    let mut order: Vec<u32> = (0..=types).collect();
    order.sort_by(|a, b| {
        (f64::from(*a) - ideal)
            .abs()
            .total_cmp(&(f64::from(*b) - ideal).abs())
            .then(a.cmp(b))
    });
    let t = target as usize;
    // choice[g][v]: count for group g when groups 0..=g sum to v
    let mut reach = vec![false; t + 1];
    reach[0] = true;
    let mut choice: Vec<Vec<Option<u32>>> = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut next = vec![false; t + 1];
        let mut pick = vec![None; t + 1];
        // counts nearest the ideal claim each total first
        for &c in &order {
            for v in (0..=t).filter(|&v| reach[v]) {
                let w = v + size as usize * c as usize;
                if w <= t && pick[w].is_none() {
                    next[w] = true;
                    pick[w] = Some(c);
                }
            }
        }
        choice.push(pick);
        reach = next;
    }
    if !reach[t] {
        return None;
    }
    let mut out = vec![0; sizes.len()];
    let mut v = t;
    for g in (0..sizes.len()).rev() {
        let c = choice[g][v].expect("reachable");
        out[g] = c;
        v -= sizes[g] as usize * c as usize;
    }
    Some(out)
}

pub fn layout(spec: &ExperimentSpec, load: Option<u32>) -> Result<Layout, ConfigError> {
    let mut rng = layout_rng(spec, load);
    let mut interests = vec![BTreeSet::new(); spec.nodes];
    let mut group_interests = Vec::new();
    match &spec.workload {
        Workload::OneToMany { source, types, .. } => {
            let n = load.ok_or_else(|| ConfigError::new("sweep.msg_int", "one_to_many needs a load"))?;
            for (node, set) in interests.iter_mut().enumerate() {
                if node as u32 != *source {
                    *set = pick(&mut rng, *types, n);
                }
            }
        }
        Workload::Groups {
            types,
            groups,
            interests_per_group,
            target_expected,
            ..
        } => {
            group_interests = match (load.or(*interests_per_group), target_expected) {
                (Some(n), _) => vec![n; groups.len()],
                (None, Some(target)) => {
                    let sizes: Vec<u64> = groups.iter().map(|g| g.len() as u64).collect();
                    solve_group_interests(&sizes, *types, *target).ok_or_else(|| {
                        ConfigError::new(
                            "workload.target_expected",
                            format!("no per-group interest counts in 0..={types} reach {target}"),
                        )
                    })?
                }
                (None, None) => return Err(ConfigError::new("workload", "no interest count given")),
            };
            for (members, &count) in groups.iter().zip(&group_interests) {
                let set = pick(&mut rng, *types, count);
                for &m in members {
                    interests[m as usize] = set.clone();
                }
            }
        }
        Workload::Explicit { interests: given, .. } => {
            for entry in given {
                interests[entry.node as usize] = entry.types.iter().copied().map(InterestId).collect();
            }
        }
    }
    Ok(Layout {
        interests,
        group_interests,
    })
}

fn rate_for(rates: &[RateStep], load: u32) -> Result<f64, ConfigError> {
    rates
        .iter()
        .find(|r| r.up_to_load >= load)
        .map(|r| r.per_day)
        .ok_or_else(|| ConfigError::new("workload.rates", format!("no rate step covers load {load}")))
}

/// Evenly spaced creation times at `per_day` messages a day.
fn spaced(count: usize, start: f64, per_day: f64) -> impl Iterator<Item = f64> {
    let gap = crate::model::SECONDS_PER_DAY / per_day;
    (0..count).map(move |k| start + k as f64 * gap)
}

/// The messages of one sweep point, in id order.
pub fn drafts(
    spec: &ExperimentSpec,
    protocol: ProtocolKind,
    load: Option<u32>,
    layout: &Layout,
) -> Result<Vec<Draft>, ConfigError> {
    let receiver_driven = protocol.is_receiver_driven();
    let content = |source: u32, types: u32, at: f64| -> Vec<Draft> {
        (0..types)
            .map(|x| Draft {
                source: NodeId(source),
                addressing: Addressing::ContentType(InterestId(x)),
                created_at: at,
                size: None,
            })
            .collect()
    };
    let addressed = |source: u32, dests: Vec<NodeId>, start: f64, per_day: f64| -> Vec<Draft> {
        let count = dests.len();
        dests
            .into_iter()
            .zip(spaced(count, start, per_day))
            .map(|(d, at)| Draft {
                source: NodeId(source),
                addressing: Addressing::Destination(d),
                created_at: at,
                size: None,
            })
            .collect()
    };
    let out = match &spec.workload {
        Workload::OneToMany {
            source,
            types,
            created_at_s,
            rates,
        } => {
            let n = load.ok_or_else(|| ConfigError::new("sweep.msg_int", "one_to_many needs a load"))?;
            if receiver_driven {
                content(*source, *types, *created_at_s)
            } else {
                let receivers: Vec<NodeId> = (0..spec.nodes as u32).filter(|&r| r != *source).map(NodeId).collect();
                let dests = (0..receivers.len() * n as usize)
                    .map(|k| receivers[k % receivers.len()])
                    .collect();
                addressed(*source, dests, *created_at_s, rate_for(rates, n)?)
            }
        }
        Workload::Groups {
            source,
            types,
            created_at_s,
            rate_per_day,
            ..
        } => {
            if receiver_driven {
                content(*source, *types, *created_at_s)
            } else {
                let mut dests = Vec::new();
                for x in 0..*types {
                    for (node, set) in layout.interests.iter().enumerate() {
                        if node as u32 != *source && set.contains(&InterestId(x)) {
                            dests.push(NodeId(node as u32));
                        }
                    }
                }
                addressed(*source, dests, *created_at_s, *rate_per_day)
            }
        }
        Workload::Explicit { messages, .. } => messages
            .iter()
            .filter_map(|m| {
                let addressing = match (m.destination, m.content_type) {
                    (Some(d), _) => Addressing::Destination(NodeId(d)),
                    (None, Some(x)) if receiver_driven => Addressing::ContentType(InterestId(x)),
                    (None, _) => return None,
                };
                Some(Draft {
                    source: NodeId(m.source),
                    addressing,
                    created_at: m.created_at_s,
                    size: m.size,
                })
            })
            .collect(),
    };
    Ok(out)
}

/// Gives every draft an id, TTL and size. Sizes come from the run seed so
/// all protocols of a seed see the same sizes for the same message index.
pub fn finalize(spec: &ExperimentSpec, drafts: &[Draft], ttl: f64, run_seed: u64) -> Vec<Message> {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    drafts
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let drawn = rng.random_range(spec.message_size.min..=spec.message_size.max);
            Message {
                id: MessageId(i as u64),
                source: d.source,
                addressing: d.addressing,
                size: d.size.unwrap_or(drawn),
                created_at: SimTime::from_secs(d.created_at),
                ttl,
            }
        })
        .collect()
}

/// Summary of a layout for the metadata file.
pub fn describe_layout(layout: &Layout) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    if !layout.group_interests.is_empty() {
        let counts: Vec<String> = layout.group_interests.iter().map(u32::to_string).collect();
        out.insert("interests_per_group".into(), counts.join(" "));
    }
    let holders = layout.interests.iter().filter(|s| !s.is_empty()).count();
    out.insert("interested_nodes".into(), holders.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_hits_six_thousand() {
        // 170 types, four groups; 6000 (message, node) pairs
        let sizes = [50, 40, 30, 30];
        let counts = solve_group_interests(&sizes, 170, 6000).unwrap();
        let total: u64 = sizes.iter().zip(&counts).map(|(s, c)| s * u64::from(*c)).sum();
        assert_eq!(total, 6000);
        assert!(counts.iter().all(|&c| c <= 170));
    }

    #[test]
    fn solver_prefers_even_counts() {
        assert_eq!(solve_group_interests(&[10, 10], 20, 200), Some(vec![10, 10]));
        assert_eq!(solve_group_interests(&[10, 10], 5, 200), None);
        assert_eq!(solve_group_interests(&[3], 10, 7), None);
    }

    #[test]
    fn spacing_follows_daily_rate() {
        let times: Vec<f64> = spaced(3, 100.0, 35.0).collect();
        assert_eq!(times[0], 100.0);
        assert!((times[2] - 100.0 - 2.0 * 86_400.0 / 35.0).abs() < 1e-9);
    }
}
