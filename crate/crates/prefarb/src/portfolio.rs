//! Zero-investment portfolio construction and the momentum holding rule.
//!
//! Each leg of the portfolio is normalized to unit gross exposure: long
//! weights sum to `+1`, short weights to `-1`, so a day with both legs
//! populated is a zero-investment portfolio. The momentum decorator keeps a
//! position open past its entry day until the security's utility flips sign
//! (or goes to zero), merging survivors with the day's fresh candidates.

use crate::graph::TradeSignalSet;
use crate::potential::UtilityVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// Leg-internal weighting rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Every candidate in a leg gets the same weight.
    Equal,
    /// Weights proportional to |utility| within the leg. A leg whose
    /// utilities are all zero falls back to equal weighting.
    #[default]
    UtilityProportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Long,
    Short,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Long => "long",
            Side::Short => "short",
        })
    }
}

/// Full-width weight vector; zero for securities not held.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioWeights(Vec<f64>);

impl PortfolioWeights {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Sum of positive weights (long gross exposure).
    pub fn long_sum(&self) -> f64 {
        self.0.iter().filter(|w| **w > 0.0).sum()
    }

    /// Sum of negative weights (signed short exposure).
    pub fn short_sum(&self) -> f64 {
        self.0.iter().filter(|w| **w < 0.0).sum()
    }

    /// Iterates `(security, weight)` over nonzero weights.
    pub fn iter_nonzero(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, &w)| (i, w))
    }
}

/// Below this total |utility| a leg is considered all-zero and falls back to
/// equal weighting.
const LEG_UTILITY_EPS: f64 = 1e-300;

fn leg_weights(
    members: &BTreeSet<usize>,
    utilities: &UtilityVector,
    scheme: WeightScheme,
    sign: f64,
    out: &mut [f64],
) {
    if members.is_empty() {
        return;
    }
    match scheme {
        WeightScheme::Equal => {
            let w = sign / members.len() as f64;
            for &i in members {
                out[i] = w;
            }
        }
        WeightScheme::UtilityProportional => {
            let denom: f64 = members.iter().map(|&i| utilities.get(i).abs()).sum();
            if denom <= LEG_UTILITY_EPS {
                leg_weights(members, utilities, WeightScheme::Equal, sign, out);
            } else {
                for &i in members {
                    out[i] = sign * utilities.get(i).abs() / denom;
                }
            }
        }
    }
}

/// Sizes the candidate legs into portfolio weights.
///
/// Long weights are positive and sum to `+1`; short weights are negative and
/// sum to `-1`; an empty leg contributes nothing. Candidate indices must lie
/// inside the utility vector.
pub fn allocate(
    signals: &TradeSignalSet,
    utilities: &UtilityVector,
    scheme: WeightScheme,
) -> PortfolioWeights {
    let n = utilities.len();
    let in_range = |set: &BTreeSet<usize>| set.iter().all(|&i| i < n);
    assert!(
        in_range(signals.longs()) && in_range(signals.shorts()),
        "signal indices must address the utility vector"
    );
    let mut w = vec![0.0f64; n];
    leg_weights(signals.longs(), utilities, scheme, 1.0, &mut w);
    leg_weights(signals.shorts(), utilities, scheme, -1.0, &mut w);
    PortfolioWeights(w)
}

/// An open position and the signal-day index it was entered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub side: Side,
    pub entry: usize,
}

/// Open positions carried across days by the momentum rule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PositionRegistry {
    positions: BTreeMap<usize, Position>,
}

impl PositionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn get(&self, security: usize) -> Option<Position> {
        self.positions.get(&security).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Position)> + '_ {
        self.positions.iter().map(|(&i, &p)| (i, p))
    }

    /// Drops positions whose security no longer passes the predicate
    /// (force-exit on data gaps).
    pub fn retain<F: FnMut(usize) -> bool>(&mut self, mut keep: F) {
        self.positions.retain(|&i, _| keep(i));
    }
}

/// Applies the momentum holding rule for one signal day.
///
/// Held longs exit when their utility is no longer positive; held shorts
/// exit when it is no longer negative. Survivors are merged with the day's
/// fresh candidates (the union can exceed the per-leg quotas). A security
/// held on one side but signaled fresh on the other flips to the new side
/// with a new entry day. The returned set is the merged book; the registry
/// is updated in place.
pub fn momentum_update(
    registry: &mut PositionRegistry,
    utilities: &UtilityVector,
    new_signals: &TradeSignalSet,
    today: usize,
) -> TradeSignalSet {
    registry.positions.retain(|&i, p| match p.side {
        Side::Long => utilities.get(i) > 0.0,
        Side::Short => utilities.get(i) < 0.0,
    });
    for &i in new_signals.longs() {
        match registry.positions.get(&i) {
            Some(p) if p.side == Side::Long => {}
            _ => {
                registry
                    .positions
                    .insert(i, Position { side: Side::Long, entry: today });
            }
        }
    }
    for &i in new_signals.shorts() {
        match registry.positions.get(&i) {
            Some(p) if p.side == Side::Short => {}
            _ => {
                registry
                    .positions
                    .insert(i, Position { side: Side::Short, entry: today });
            }
        }
    }
    let longs: BTreeSet<usize> = registry
        .iter()
        .filter(|(_, p)| p.side == Side::Long)
        .map(|(i, _)| i)
        .collect();
    let shorts: BTreeSet<usize> = registry
        .iter()
        .filter(|(_, p)| p.side == Side::Short)
        .map(|(i, _)| i)
        .collect();
    TradeSignalSet::new(longs, shorts, new_signals.relation_entries().clone())
        .expect("registry keeps one side per security")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn signals(longs: &[usize], shorts: &[usize]) -> TradeSignalSet {
        TradeSignalSet::new(
            longs.iter().copied().collect(),
            shorts.iter().copied().collect(),
            BTreeMap::new(),
        )
        .unwrap()
    }

    fn utilities(vals: &[f64]) -> UtilityVector {
        UtilityVector::centered(vals.to_vec())
    }

    #[test]
    fn utility_proportional_weights_match_hand_calc() {
        // Longs {0, 1} with |u| 2 and 1 -> 2/3 and 1/3; short {3} -> -1.
        let u = UtilityVector::new(vec![2.0, 1.0, 0.0, -3.0]).unwrap();
        let w = allocate(&signals(&[0, 1], &[3]), &u, WeightScheme::UtilityProportional);
        assert!((w.get(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.get(1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(w.get(2), 0.0);
        assert_eq!(w.get(3), -1.0);
    }

    #[test]
    fn equal_weights_split_each_leg() {
        let u = utilities(&[5.0, 1.0, -2.0, -4.0]);
        let w = allocate(&signals(&[0, 1], &[2, 3]), &u, WeightScheme::Equal);
        assert_eq!(w.get(0), 0.5);
        assert_eq!(w.get(1), 0.5);
        assert_eq!(w.get(2), -0.5);
        assert_eq!(w.get(3), -0.5);
    }

    #[test]
    fn leg_sums_are_exact_within_tolerance() {
        let u = utilities(&[3.0, 2.0, 1.0, 0.5, -1.0, -2.5, -3.0]);
        for scheme in [WeightScheme::Equal, WeightScheme::UtilityProportional] {
            let w = allocate(&signals(&[0, 1, 2, 3], &[4, 5, 6]), &u, scheme);
            assert!((w.long_sum() - 1.0).abs() <= 1e-12);
            assert!((w.short_sum() + 1.0).abs() <= 1e-12);
            assert!(w.as_slice().iter().sum::<f64>().abs() <= 1e-12);
        }
    }

    #[test]
    fn empty_legs_contribute_nothing() {
        let u = utilities(&[1.0, -1.0]);
        let w = allocate(&signals(&[0], &[]), &u, WeightScheme::UtilityProportional);
        assert_eq!(w.get(0), 1.0);
        assert_eq!(w.get(1), 0.0);
        assert_eq!(w.short_sum(), 0.0);
        let none = allocate(&signals(&[], &[]), &u, WeightScheme::Equal);
        assert!(none.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn all_zero_utility_leg_falls_back_to_equal() {
        let u = UtilityVector::new(vec![0.0, 0.0, 3.0, -3.0]).unwrap();
        let w = allocate(&signals(&[0, 1], &[3]), &u, WeightScheme::UtilityProportional);
        assert_eq!(w.get(0), 0.5);
        assert_eq!(w.get(1), 0.5);
        assert_eq!(w.get(3), -1.0);
    }

    #[test]
    fn momentum_exits_on_sign_flip_or_zero() {
        let mut reg = PositionRegistry::new();
        // Day 0: enter long 0, short 3.
        let u0 = UtilityVector::new(vec![2.0, 0.0, 1.0, -3.0]).unwrap();
        let merged = momentum_update(&mut reg, &u0, &signals(&[0], &[3]), 0);
        assert!(merged.longs().contains(&0) && merged.shorts().contains(&3));

        // Day 1: utility of 0 decays but stays positive -> still held; the
        // short's utility crosses to exactly zero -> exits.
        let u1 = UtilityVector::new(vec![0.2, 0.0, -0.2, 0.0]).unwrap();
        let merged = momentum_update(&mut reg, &u1, &signals(&[], &[]), 1);
        assert!(merged.longs().contains(&0), "positive utility keeps the long");
        assert!(merged.shorts().is_empty(), "zero utility exits the short");
        assert_eq!(reg.get(0).unwrap().entry, 0, "survivor keeps entry day");

        // Day 2: the long's utility flips negative -> exits.
        let u2 = UtilityVector::new(vec![-0.1, 0.1, 0.2, -0.2]).unwrap();
        let merged = momentum_update(&mut reg, &u2, &signals(&[], &[]), 2);
        assert!(merged.is_empty());
        assert!(reg.is_empty());
    }

    #[test]
    fn conflict_resolves_to_the_new_side() {
        let mut reg = PositionRegistry::new();
        let u0 = UtilityVector::new(vec![1.0, -1.0]).unwrap();
        momentum_update(&mut reg, &u0, &signals(&[0], &[1]), 0);
        // Security 0 still has positive utility (would survive as a long)
        // but today's signals put it on the short side: new side wins.
        let u1 = UtilityVector::new(vec![0.5, -0.5]).unwrap();
        let merged = momentum_update(&mut reg, &u1, &signals(&[], &[0]), 1);
        assert!(merged.shorts().contains(&0));
        assert!(!merged.longs().contains(&0));
        assert_eq!(reg.get(0).unwrap().side, Side::Short);
        assert_eq!(reg.get(0).unwrap().entry, 1, "side flip restarts the clock");
    }

    #[test]
    fn merged_book_can_exceed_quotas() {
        let mut reg = PositionRegistry::new();
        let u = UtilityVector::new(vec![3.0, 2.0, 1.0, -6.0]).unwrap();
        momentum_update(&mut reg, &u, &signals(&[0], &[3]), 0);
        // Next day a different long arrives while 0 survives: both held.
        let merged = momentum_update(&mut reg, &u, &signals(&[1], &[3]), 1);
        assert_eq!(merged.longs().len(), 2);
        // Weights renormalize over the merged set.
        let w = allocate(&merged, &u, WeightScheme::UtilityProportional);
        assert!((w.get(0) - 0.6).abs() < 1e-15);
        assert!((w.get(1) - 0.4).abs() < 1e-15);
        assert!((w.long_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_flip_means_no_exit() {
        let mut reg = PositionRegistry::new();
        let base = UtilityVector::new(vec![1.0, -1.0]).unwrap();
        momentum_update(&mut reg, &base, &signals(&[0], &[1]), 0);
        for day in 1..50 {
            // Utility wiggles but never changes sign.
            let scale = 0.1 + 0.9 * ((day % 7) as f64 / 7.0);
            let u = UtilityVector::new(vec![scale, -scale]).unwrap();
            let merged = momentum_update(&mut reg, &u, &signals(&[], &[]), day);
            assert!(merged.longs().contains(&0));
            assert!(merged.shorts().contains(&1));
        }
        assert_eq!(reg.get(0).unwrap().entry, 0);
        assert_eq!(reg.get(1).unwrap().entry, 0);
    }

    #[test]
    fn retain_force_exits_positions() {
        let mut reg = PositionRegistry::new();
        let u = UtilityVector::new(vec![1.0, 0.5, -1.5]).unwrap();
        momentum_update(&mut reg, &u, &signals(&[0, 1], &[2]), 0);
        reg.retain(|i| i != 1);
        assert!(reg.get(1).is_none());
        assert_eq!(reg.len(), 2);
    }
}
