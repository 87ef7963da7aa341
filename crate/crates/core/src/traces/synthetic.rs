use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{merge, TraceRecord};
use crate::model::{Contact, NodeId, SimTime, SECONDS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub members: Vec<NodeId>,
    /// Contacts per hour for each pair inside the group.
    pub intra_rate: f64,
    /// Contacts per hour towards members of other groups. A cross-group pair
    /// uses the mean of both groups' values.
    pub inter_rate: f64,
}

/// Daily active period `[start, end)` in seconds after midnight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub groups: Vec<GroupConfig>,
    pub windows: Vec<Window>,
    pub min_duration: f64,
    pub max_duration: f64,
    pub days: u32,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{field}: {reason}")]
pub struct SyntheticError {
    pub field: String,
    pub reason: String,
}

impl SyntheticConfig {
    /// Eight working hours a day, 09:00 to 17:00.
    pub fn working_day() -> Vec<Window> {
        vec![Window {
            start: 9.0 * 3600.0,
            end: 17.0 * 3600.0,
        }]
    }

    pub fn validate(&self) -> Result<(), SyntheticError> {
        let err = |field: &str, reason: String| SyntheticError {
            field: field.to_string(),
            reason,
        };
        let mut seen = BTreeMap::new();
        for (g, group) in self.groups.iter().enumerate() {
            for rate in [group.intra_rate, group.inter_rate] {
                if !(rate >= 0.0) || !rate.is_finite() {
                    return Err(err(&format!("groups[{g}]"), format!("rate {rate} must be finite and >= 0")));
                }
            }
            for &m in &group.members {
                if let Some(other) = seen.insert(m, g) {
                    return Err(err(
                        &format!("groups[{g}].members"),
                        format!("node {m} is already in group {other}"),
                    ));
                }
            }
        }
        for (i, w) in self.windows.iter().enumerate() {
            if !(0.0 <= w.start && w.start < w.end && w.end <= SECONDS_PER_DAY) {
                return Err(err(&format!("windows[{i}]"), format!("[{}, {}) not inside one day", w.start, w.end)));
            }
        }
        if !(self.min_duration > 0.0 && self.min_duration <= self.max_duration && self.max_duration.is_finite()) {
            return Err(err(
                "duration",
                format!("need 0 < min ({}) <= max ({})", self.min_duration, self.max_duration),
            ));
        }
        if self.days == 0 {
            return Err(err("days", "must be at least 1".into()));
        }
        Ok(())
    }

    /// Hourly contact rate for a pair, by group membership.
    pub fn pair_rate(&self, a: NodeId, b: NodeId) -> f64 {
        let group_of = |n: NodeId| self.groups.iter().position(|g| g.members.contains(&n));
        match (group_of(a), group_of(b)) {
            (Some(x), Some(y)) if x == y => self.groups[x].intra_rate,
            (Some(x), Some(y)) => (self.groups[x].inter_rate + self.groups[y].inter_rate) / 2.0,
            _ => 0.0,
        }
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        let mut all: Vec<NodeId> = self.groups.iter().flat_map(|g| g.members.iter().copied()).collect();
        all.sort();
        all
    }
}

fn millis(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

/// Poisson contact arrivals per pair and active window, durations uniform
/// in `[min_duration, max_duration]` and clipped to the window. Times are
/// rounded to milliseconds so the trace survives a text round trip.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<TraceRecord>, SyntheticError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let nodes = config.nodes();
    let mut out = Vec::new();
    for (i, &a) in nodes.iter().enumerate() {
        for &b in &nodes[i + 1..] {
            let rate = config.pair_rate(a, b) / 3600.0;
            if rate <= 0.0 {
                continue;
            }
            let gap = Exp::new(rate).expect("positive rate");
            for day in 0..config.days {
                let base = f64::from(day) * SECONDS_PER_DAY;
                for w in &config.windows {
                    let (lo, hi) = (base + w.start, base + w.end);
                    let mut t = lo + rng.sample(gap);
                    while t < hi {
                        let len = rng.random_range(config.min_duration..=config.max_duration);
                        let (s, e) = (millis(t), millis((t + len).min(hi)));
                        if s < e && e <= hi {
                            out.push(
                                Contact::new(a, b, SimTime::from_secs(s), SimTime::from_secs(e))
                                    .expect("distinct nodes, positive span"),
                            );
                        }
                        t += rng.sample(gap);
                    }
                }
            }
        }
    }
    Ok(merge(out))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn pair_config(rate: f64, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            groups: vec![GroupConfig {
                members: vec![NodeId(0), NodeId(1)],
                intra_rate: rate,
                inter_rate: 0.0,
            }],
            windows: SyntheticConfig::working_day(),
            min_duration: 10.0,
            max_duration: 60.0,
            days: 1,
            seed,
        }
    }

    #[test]
    fn zero_rate_is_empty() {
        let mut cfg = pair_config(0.0, 1);
        cfg.groups.push(GroupConfig {
            members: vec![NodeId(2), NodeId(3)],
            intra_rate: 0.0,
            inter_rate: 0.0,
        });
        assert!(generate_synthetic(&cfg).unwrap().is_empty());
    }

    #[test]
    fn contacts_stay_inside_windows() {
        let mut cfg = pair_config(500.0, 3);
        cfg.max_duration = 600.0;
        let trace = generate_synthetic(&cfg).unwrap();
        assert!(!trace.is_empty());
        for c in &trace {
            assert!(c.start().secs() >= 9.0 * 3600.0 && c.end().secs() <= 17.0 * 3600.0, "{c:?}");
        }
    }

    #[test]
    fn seed_fixes_the_trace() {
        let a = generate_synthetic(&pair_config(5.0, 42)).unwrap();
        let b = generate_synthetic(&pair_config(5.0, 42)).unwrap();
        let c = generate_synthetic(&pair_config(5.0, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_count_over_many_seeds() {
        // rate 2/h over an 8 h window: 16 arrivals per seed; the sum over
        // 100 seeds is Poisson with mean 1600
        let total: usize = (0..100).map(|s| generate_synthetic(&pair_config(2.0, s)).unwrap().len()).sum();
        let mean = 2.0 * 8.0 * 100.0;
        let sigma: f64 = f64::sqrt(mean);
        assert!((total as f64 - mean).abs() <= 3.0 * sigma, "total {total}, expected {mean} ± {}", 3.0 * sigma);
    }

    #[test]
    fn cross_group_rate_is_the_mean() {
        let cfg = SyntheticConfig {
            groups: vec![
                GroupConfig {
                    members: vec![NodeId(0)],
                    intra_rate: 9.0,
                    inter_rate: 1.0,
                },
                GroupConfig {
                    members: vec![NodeId(1)],
                    intra_rate: 9.0,
                    inter_rate: 3.0,
                },
            ],
            ..pair_config(0.0, 0)
        };
        assert_eq!(cfg.pair_rate(NodeId(0), NodeId(1)), 2.0);
        assert_eq!(cfg.pair_rate(NodeId(0), NodeId(7)), 0.0);
    }

    #[test]
    fn bad_configs() {
        let mut cfg = pair_config(1.0, 0);
        cfg.windows = vec![Window { start: 10.0, end: 5.0 }];
        assert_eq!(cfg.validate().unwrap_err().field, "windows[0]");
        let mut cfg = pair_config(1.0, 0);
        cfg.min_duration = 70.0;
        assert!(cfg.validate().is_err());
        let mut cfg = pair_config(-1.0, 0);
        cfg.days = 1;
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn generated_contacts_are_well_formed(seed in any::<u64>(), rate in 0.5f64..40.0, days in 1u32..3) {
            let cfg = SyntheticConfig {
                groups: vec![
                    GroupConfig { members: vec![NodeId(0), NodeId(1), NodeId(2)], intra_rate: rate, inter_rate: rate / 4.0 },
                    GroupConfig { members: vec![NodeId(3), NodeId(4)], intra_rate: rate, inter_rate: rate / 2.0 },
                ],
                windows: vec![Window { start: 0.0, end: 3600.0 }, Window { start: 80_000.0, end: 86_400.0 }],
                min_duration: 5.0,
                max_duration: 900.0,
                days,
                seed,
            };
            let trace = generate_synthetic(&cfg).unwrap();
            let horizon = f64::from(days) * SECONDS_PER_DAY;
            for c in &trace {
                prop_assert!(c.a() != c.b());
                prop_assert!(c.start() < c.end());
                prop_assert!(c.start().secs() >= 0.0 && c.end().secs() <= horizon);
            }
            prop_assert_eq!(merge(trace.clone()), trace);
        }
    }
}
