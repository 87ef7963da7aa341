//! Time-evolving contact weights.
//!
//! Contact time is accumulated per key (an interest, or a peer) and per
//! daily sample. When a sample closes, the day's total is folded into a
//! cumulative moving average over days, and the weight towards a key at
//! sample `i` sums those averages over one day of samples starting at `i`,
//! discounted by `t / (t + d)` where `d` is the distance from `i`.
//!
//! The moving average is kept as a running total plus a day count. This is
//! the same value as the recursive update `(today + (j - 1) * avg) / j`, but
//! it is rounded once, so it agrees exactly with the arithmetic mean of the
//! daily totals.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{NodeId, SampleSlot};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SocialError {
    #[error("sample {sample} of day {day} was already closed")]
    CalledTwice { sample: usize, day: u32 },
    #[error("sample {sample} closed for day {day}, expected day {expected}")]
    SkippedDay { sample: usize, day: u32, expected: u32 },
    #[error("sample index {sample} outside 0..{samples_per_day}")]
    BadSample { sample: usize, samples_per_day: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Cells {
    /// Today's running total per sample.
    current: Vec<f64>,
    /// Sum of closed daily totals per sample.
    closed_total: Vec<f64>,
    days: Vec<u32>,
}

impl Cells {
    fn new(days: &[u32]) -> Cells {
        Cells {
            current: vec![0.0; days.len()],
            closed_total: vec![0.0; days.len()],
            days: days.to_vec(),
        }
    }

    fn average(&self, sample: usize) -> f64 {
        match self.days[sample] {
            0 => 0.0,
            j => self.closed_total[sample] / f64::from(j),
        }
    }
}

/// Coefficient `t / (t + d)` applied to the average `d` samples ahead.
pub fn transitive_coefficient(samples_per_day: usize, distance: usize) -> f64 {
    let t = samples_per_day as f64;
    t / (t + distance as f64)
}

/// Contact-time accumulators for one node, indexed by key and daily sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeEvolvingWeights<K> {
    owner: NodeId,
    /// Days closed so far for each sample; new keys start from here with
    /// an implicit all-zero history.
    closed_days: Vec<u32>,
    cells: BTreeMap<K, Cells>,
}

impl<K: Ord + Copy> TimeEvolvingWeights<K> {
    pub fn new(owner: NodeId, samples_per_day: usize) -> Self {
        assert!(samples_per_day > 0, "at least one daily sample");
        TimeEvolvingWeights {
            owner,
            closed_days: vec![0; samples_per_day],
            cells: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn samples_per_day(&self) -> usize {
        self.closed_days.len()
    }

    pub fn keys(&self) -> impl Iterator<Item = K> + '_ {
        self.cells.keys().copied()
    }

    fn check_sample(&self, sample: usize) -> Result<(), SocialError> {
        if sample < self.samples_per_day() {
            Ok(())
        } else {
            Err(SocialError::BadSample {
                sample,
                samples_per_day: self.samples_per_day(),
            })
        }
    }

    /// Credits `seconds` of contact to every key, in full, for `sample`.
    /// The caller splits contacts at sample boundaries.
    pub fn accrue<I>(&mut self, keys: I, sample: usize, seconds: f64)
    where
        I: IntoIterator<Item = K>,
    {
        assert!(sample < self.samples_per_day(), "sample {sample} out of range");
        if !(seconds > 0.0) {
            return;
        }
        for key in keys {
            let closed_days = &self.closed_days;
            let cells = self.cells.entry(key).or_insert_with(|| Cells::new(closed_days));
            cells.current[sample] += seconds;
        }
    }

    /// Folds today's total for `(key, sample)` into the daily average.
    pub fn close_sample(&mut self, key: K, sample: usize, day: u32) -> Result<(), SocialError> {
        self.check_sample(sample)?;
        let closed_days = &self.closed_days;
        let cells = self.cells.entry(key).or_insert_with(|| Cells::new(closed_days));
        close_cell(cells, sample, day)
    }

    /// Closes `slot.sample` for every key at the end of `slot.day`.
    pub fn close_slot(&mut self, slot: SampleSlot) -> Result<(), SocialError> {
        let SampleSlot { day, sample } = slot;
        self.check_sample(sample)?;
        let done = self.closed_days[sample];
        if day <= done {
            return Err(SocialError::CalledTwice { sample, day });
        }
        if day != done + 1 {
            return Err(SocialError::SkippedDay {
                sample,
                day,
                expected: done + 1,
            });
        }
        for cells in self.cells.values_mut() {
            close_cell(cells, sample, day)?;
        }
        self.closed_days[sample] = day;
        Ok(())
    }

    pub fn tcti(&self, key: K, sample: usize) -> f64 {
        self.cells.get(&key).map_or(0.0, |c| c.current[sample])
    }

    pub fn atcti(&self, key: K, sample: usize) -> f64 {
        self.cells.get(&key).map_or(0.0, |c| c.average(sample))
    }

    pub fn days_observed(&self, key: K, sample: usize) -> u32 {
        self.cells
            .get(&key)
            .map_or(self.closed_days[sample], |c| c.days[sample])
    }

    /// Social weight towards `key` as seen from sample `sample`.
    pub fn weight(&self, key: K, sample: usize) -> f64 {
        let Some(cells) = self.cells.get(&key) else {
            return 0.0;
        };
        let t = self.samples_per_day();
        (0..t)
            .map(|d| transitive_coefficient(t, d) * cells.average((sample + d) % t))
            .sum()
    }

    /// Weights towards every known key, for exchange during an encounter.
    pub fn weights(&self, sample: usize) -> BTreeMap<K, f64> {
        self.cells
            .keys()
            .map(|&k| (k, self.weight(k, sample)))
            .filter(|&(_, w)| w > 0.0)
            .collect()
    }
}

fn close_cell(cells: &mut Cells, sample: usize, day: u32) -> Result<(), SocialError> {
    let done = cells.days[sample];
    if day <= done {
        return Err(SocialError::CalledTwice { sample, day });
    }
    if day != done + 1 {
        return Err(SocialError::SkippedDay {
            sample,
            day,
            expected: done + 1,
        });
    }
    cells.closed_total[sample] += cells.current[sample];
    cells.current[sample] = 0.0;
    cells.days[sample] = day;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InterestId;
    use proptest::prelude::*;

    type State = TimeEvolvingWeights<InterestId>;

    const X1: InterestId = InterestId(1);
    const X2: InterestId = InterestId(2);

    /// Σ_{d=0}^{23} 24/(24+d), summed in exact rational arithmetic
    /// (numerator and denominator as u128) and rounded once.
    fn coefficient_sum_24() -> f64 {
        fn gcd(a: u128, b: u128) -> u128 {
            if b == 0 { a } else { gcd(b, a % b) }
        }
        let (mut num, mut den) = (0u128, 1u128);
        for d in 0..24u128 {
            let (n2, d2) = (24u128, 24 + d);
            num = num * d2 + n2 * den;
            den *= d2;
            let g = gcd(num, den);
            num /= g;
            den /= g;
        }
        num as f64 / den as f64
    }

    #[test]
    fn frozen_coefficient_sum() {
        assert!((coefficient_sum_24() - 16.888_135_935_454_684).abs() < 1e-12);
    }

    #[test]
    fn zero_overlap_is_identity() {
        let mut s = State::new(NodeId(0), 24);
        let before = s.clone();
        s.accrue([X1], 3, 0.0);
        assert_eq!(s, before);
    }

    #[test]
    fn tcti_is_a_plain_sum() {
        let mut s = State::new(NodeId(0), 24);
        s.accrue([X1], 9, 300.0);
        s.accrue([X1], 9, 400.0);
        assert_eq!(s.tcti(X1, 9), 700.0);
    }

    #[test]
    fn multi_interest_peer_credits_each_interest_in_full() {
        // Toy log for node A: one 600 s contact with a peer holding {1, 2},
        // one 100 s contact with a peer holding {2}.
        let log: [(&[InterestId], f64); 2] = [(&[X1, X2], 600.0), (&[X2], 100.0)];
        let mut expected = BTreeMap::new();
        for (interests, secs) in log {
            for x in interests {
                *expected.entry(*x).or_insert(0.0) += secs;
            }
        }
        let mut s = State::new(NodeId(0), 24);
        for (interests, secs) in log {
            s.accrue(interests.iter().copied(), 5, secs);
        }
        assert_eq!(s.tcti(X1, 5), expected[&X1]);
        assert_eq!(s.tcti(X2, 5), expected[&X2]);
        assert_eq!(s.tcti(X1, 5), 600.0);
    }

    #[test]
    fn close_sample_examples() {
        let mut s = State::new(NodeId(0), 24);
        s.accrue([X1], 0, 120.0);
        s.close_sample(X1, 0, 1).unwrap();
        assert_eq!(s.atcti(X1, 0), 120.0);
        assert_eq!(s.tcti(X1, 0), 0.0);
        s.accrue([X1], 0, 60.0);
        s.close_sample(X1, 0, 2).unwrap();
        assert_eq!(s.atcti(X1, 0), 90.0);
        assert_eq!(
            s.close_sample(X1, 0, 2),
            Err(SocialError::CalledTwice { sample: 0, day: 2 })
        );
        assert!(matches!(s.close_sample(X1, 0, 5), Err(SocialError::SkippedDay { .. })));
    }

    #[test]
    fn four_day_average() {
        let daily = [100.0, 50.0, 30.0, 20.0];
        let mean = daily.iter().sum::<f64>() / daily.len() as f64;
        let mut s = State::new(NodeId(0), 24);
        for (j, tcti) in daily.iter().enumerate() {
            s.accrue([X1], 4, *tcti);
            s.close_slot(SampleSlot { day: j as u32 + 1, sample: 4 }).unwrap();
        }
        assert_eq!(s.atcti(X1, 4), mean);
        assert_eq!(mean, 50.0);
    }

    #[test]
    fn late_key_inherits_zero_history() {
        let mut s = State::new(NodeId(0), 2);
        s.close_slot(SampleSlot { day: 1, sample: 0 }).unwrap();
        s.close_slot(SampleSlot { day: 1, sample: 1 }).unwrap();
        s.accrue([X1], 0, 90.0);
        s.close_slot(SampleSlot { day: 2, sample: 0 }).unwrap();
        assert_eq!(s.days_observed(X1, 0), 2);
        assert_eq!(s.atcti(X1, 0), 45.0);
    }

    #[test]
    fn teci_examples() {
        let mut s = State::new(NodeId(0), 24);
        assert_eq!(s.weight(X1, 0), 0.0);

        s.accrue([X1], 7, 1.0);
        s.close_slot(SampleSlot { day: 1, sample: 7 }).unwrap();
        assert_eq!(s.weight(X1, 7), 1.0);

        let mut all = State::new(NodeId(0), 24);
        for i in 0..24 {
            all.accrue([X1], i, 1.0);
            all.close_slot(SampleSlot { day: 1, sample: i }).unwrap();
        }
        for i in 0..24 {
            assert!((all.weight(X1, i) - coefficient_sum_24()).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_wraps_around_the_day() {
        // Only sample 1 is populated; seen from sample 2 it is 23 steps ahead.
        let mut s = State::new(NodeId(0), 24);
        s.accrue([X1], 1, 10.0);
        s.close_slot(SampleSlot { day: 1, sample: 1 }).unwrap();
        assert!((s.weight(X1, 2) - 10.0 * 24.0 / 47.0).abs() < 1e-12);
    }

    #[test]
    fn coefficients_strictly_decrease() {
        for d in 1..24 {
            assert!(transitive_coefficient(24, d) < transitive_coefficient(24, d - 1));
        }
    }

    proptest! {
        #[test]
        fn average_matches_recursive_fold(daily in prop::collection::vec(0u32..10_000, 1..40)) {
            let mut s = State::new(NodeId(0), 1);
            let mut cma = 0.0f64;
            for (idx, tcti) in daily.iter().enumerate() {
                let j = idx as f64 + 1.0;
                cma = (f64::from(*tcti) + (j - 1.0) * cma) / j;
                s.accrue([X1], 0, f64::from(*tcti));
                s.close_slot(SampleSlot { day: idx as u32 + 1, sample: 0 }).unwrap();
            }
            let mean = daily.iter().map(|&v| f64::from(v)).sum::<f64>() / daily.len() as f64;
            prop_assert_eq!(s.atcti(X1, 0), mean);
            prop_assert!((s.atcti(X1, 0) - cma).abs() <= 1e-9 * mean.max(1.0));
        }

        #[test]
        fn weight_monotone_in_each_cell(
            base in prop::collection::vec(0u32..500, 6),
            cell in 0usize..6,
            bump in 1u32..500,
            from in 0usize..6,
        ) {
            let build = |vals: &[u32]| {
                let mut s = State::new(NodeId(0), 6);
                for (i, v) in vals.iter().enumerate() {
                    s.accrue([X1], i, f64::from(*v));
                    s.close_slot(SampleSlot { day: 1, sample: i }).unwrap();
                }
                s
            };
            let lo = build(&base);
            let mut bumped = base.clone();
            bumped[cell] += bump;
            let hi = build(&bumped);
            prop_assert!(hi.weight(X1, from) >= lo.weight(X1, from));
            prop_assert!(lo.weight(X1, from) >= 0.0);
        }
    }
}
