//! Candidate split enumeration and robust scoring for one feature at one node.
//!
//! For a numerical threshold `s` every sample falls in one of four groups:
//!
//! * `L`: left of `s` and cannot be pushed past it (`o + right <= s`)
//! * `LI`: left of `s` but can be pushed right (`o <= s < o + right`)
//! * `RI`: right of `s` but can be pushed left (`o - left <= s < o`)
//! * `R`: right of `s` and cannot be pushed back (`s < o - left`)
//!
//! where `left`/`right` are how far the feature may decrease/increase.
//! Samples of a label the attacker does not control always land in `L` or `R`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::impurity::{adversarial_score, SplitCounts};
use crate::threat_model::{AttackedClasses, Bound, FeaturePerturbation};
use crate::{Error, Result};

/// Default cap on categories searched exhaustively.
pub const DEFAULT_CATEGORY_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    LeftIntersection,
    RightIntersection,
    Right,
}

impl Side {
    /// Side under the unattacked partition.
    pub fn is_left(self) -> bool {
        matches!(self, Side::Left | Side::LeftIntersection)
    }
}

/// Per-label sizes of `L`, `LI`, `RI` and `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RawCounts {
    pub left: [u32; 2],
    pub left_inter: [u32; 2],
    pub right_inter: [u32; 2],
    pub right: [u32; 2],
}

impl RawCounts {
    fn slot(&mut self, side: Side) -> &mut [u32; 2] {
        match side {
            Side::Left => &mut self.left,
            Side::LeftIntersection => &mut self.left_inter,
            Side::RightIntersection => &mut self.right_inter,
            Side::Right => &mut self.right,
        }
    }

    pub fn add(&mut self, side: Side, label: u8) {
        self.slot(side)[label as usize] += 1;
    }

    fn shift(&mut self, from: Side, to: Side, label: u8) {
        self.slot(from)[label as usize] -= 1;
        self.slot(to)[label as usize] += 1;
    }

    pub fn label_total(&self, label: u8) -> u32 {
        let l = label as usize;
        self.left[l] + self.left_inter[l] + self.right_inter[l] + self.right[l]
    }

    /// Both sides of the unattacked partition are non-empty.
    pub fn both_sides_occupied(&self) -> bool {
        let left: u32 = (0..2).map(|l| self.left[l] + self.left_inter[l]).sum();
        let right: u32 = (0..2).map(|l| self.right[l] + self.right_inter[l]).sum();
        left > 0 && right > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// Left iff `value <= threshold`.
    Threshold(f64),
    /// Left iff the category is in the set; anything else goes right.
    Categories(BTreeSet<u32>),
}

impl SplitRule {
    pub fn goes_left(&self, value: f64) -> bool {
        match self {
            SplitRule::Threshold(s) => value <= *s,
            SplitRule::Categories(set) => category_of(value).is_some_and(|c| set.contains(&c)),
        }
    }
}

pub(crate) fn category_of(value: f64) -> Option<u32> {
    (value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64).then_some(value as u32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub rule: SplitRule,
    pub score: f64,
    pub x_star: u32,
    pub y_star: u32,
}

/// Sorted, deduplicated `X ∪ {o - left} ∪ {o + right}`, restricted to
/// `[lo, hi)` when a range is given. Unbounded sides add nothing.
pub fn candidate_thresholds(values: &[f64], left: Bound, right: Bound, range: Option<(f64, f64)>) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() * 3);
    for &o in values {
        out.push(o);
        out.extend(left.below(o));
        out.extend(right.above(o));
    }
    if let Some((lo, hi)) = range {
        out.retain(|&s| s >= lo && s < hi);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Group of a numerical value relative to threshold `s`.
pub fn numerical_side(value: f64, s: f64, left: Bound, right: Bound, movable: bool) -> Side {
    if value <= s {
        if movable && right.above(value).is_none_or(|v| v > s) {
            Side::LeftIntersection
        } else {
            Side::Left
        }
    } else if movable && left.below(value).is_none_or(|v| v <= s) {
        Side::RightIntersection
    } else {
        Side::Right
    }
}

/// Raw group sizes at threshold `s`, computed from scratch.
pub fn partition_counts(
    values: &[f64],
    labels: &[u8],
    s: f64,
    left: Bound,
    right: Bound,
    attacked: AttackedClasses,
) -> RawCounts {
    let mut counts = RawCounts::default();
    for (&v, &y) in values.iter().zip(labels) {
        counts.add(numerical_side(v, s, left, right, attacked.contains(y)), y);
    }
    counts
}

/// Scales the movable groups by `rho`; the rest of each intersection counts
/// on its natural side.
pub fn apply_rho(raw: &RawCounts, rho: f64) -> Result<SplitCounts> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParam(format!("rho must lie in [0, 1], got {rho}")));
    }
    let f = |v: u32| v as f64;
    let keep = 1.0 - rho;
    Ok(SplitCounts {
        l0: f(raw.left[0]) + keep * f(raw.left_inter[0]),
        l1: f(raw.left[1]) + keep * f(raw.left_inter[1]),
        r0: f(raw.right[0]) + keep * f(raw.right_inter[0]),
        r1: f(raw.right[1]) + keep * f(raw.right_inter[1]),
        i0: rho * f(raw.left_inter[0]) + rho * f(raw.right_inter[0]),
        i1: rho * f(raw.left_inter[1]) + rho * f(raw.right_inter[1]),
        li0: f(raw.left_inter[0]),
        li1: f(raw.left_inter[1]),
        ri0: f(raw.right_inter[0]),
        ri1: f(raw.right_inter[1]),
    })
}

/// Visits every candidate threshold in increasing order with the group
/// sizes at that threshold, maintained incrementally.
pub fn sweep_numerical(
    values: &[f64],
    labels: &[u8],
    left: Bound,
    right: Bound,
    attacked: AttackedClasses,
    candidates: &[f64],
    mut visit: impl FnMut(f64, &RawCounts),
) {
    struct Event {
        pos: f64,
        label: u8,
        from: Side,
        to: Side,
    }
    let mut counts = RawCounts::default();
    let mut events = Vec::with_capacity(values.len() * 3);
    for (&o, &y) in values.iter().zip(labels) {
        if !attacked.contains(y) {
            counts.add(Side::Right, y);
            events.push(Event { pos: o, label: y, from: Side::Right, to: Side::Left });
            continue;
        }
        match left.below(o) {
            Some(pos) => {
                counts.add(Side::Right, y);
                events.push(Event { pos, label: y, from: Side::Right, to: Side::RightIntersection });
            }
            None => counts.add(Side::RightIntersection, y),
        }
        events.push(Event { pos: o, label: y, from: Side::RightIntersection, to: Side::LeftIntersection });
        if let Some(pos) = right.above(o) {
            events.push(Event { pos, label: y, from: Side::LeftIntersection, to: Side::Left });
        }
    }
    // Stable sort keeps a sample's own transitions in order when positions tie.
    events.sort_by(|a, b| a.pos.total_cmp(&b.pos));

    let mut next = 0;
    for &s in candidates {
        while next < events.len() && events[next].pos <= s {
            let e = &events[next];
            counts.shift(e.from, e.to, e.label);
            next += 1;
        }
        visit(s, &counts);
    }
}

/// Best numerical split for one feature, or `None` when no candidate leaves
/// both sides of the unattacked partition non-empty.
pub fn best_robust_split_numerical(
    values: &[f64],
    labels: &[u8],
    feature: usize,
    perturbation: &FeaturePerturbation,
    range: (f64, f64),
    rho: f64,
    attacked: AttackedClasses,
) -> Result<Option<SplitCandidate>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParam(format!("rho must lie in [0, 1], got {rho}")));
    }
    let (left, right) = perturbation.bounds();
    let candidates = candidate_thresholds(values, left, right, Some(range));
    let (a0, a1) = (attacked.contains(0), attacked.contains(1));
    let mut best: Option<SplitCandidate> = None;
    sweep_numerical(values, labels, left, right, attacked, &candidates, |s, raw| {
        if !raw.both_sides_occupied() {
            return;
        }
        let counts = apply_rho(raw, rho).expect("rho validated");
        let adv = adversarial_score(&counts, a0, a1);
        if best.as_ref().is_none_or(|b| adv.score < b.score) {
            best = Some(SplitCandidate {
                feature,
                rule: SplitRule::Threshold(s),
                score: adv.score,
                x_star: adv.x_star,
                y_star: adv.y_star,
            });
        }
    });
    Ok(best)
}

/// Group of a categorical value relative to the left-category set.
pub fn categorical_side(
    category: u32,
    left_set: &BTreeSet<u32>,
    perturbation: &FeaturePerturbation,
    all_categories: &[u32],
    movable: bool,
) -> Side {
    let natural_left = left_set.contains(&category);
    if movable {
        let reach = perturbation.reachable_categories(category, all_categories);
        let hits_left = reach.iter().any(|c| left_set.contains(c));
        let hits_right = reach.iter().any(|c| !left_set.contains(c));
        if hits_left && hits_right {
            return if natural_left { Side::LeftIntersection } else { Side::RightIntersection };
        }
    }
    if natural_left {
        Side::Left
    } else {
        Side::Right
    }
}

/// Best partition of the categories present at the node, searched
/// exhaustively. The last present category always goes right, so each
/// of the `2^(c-1) - 1` bipartitions is scored once.
#[allow(clippy::too_many_arguments)]
pub fn best_robust_split_categorical(
    values: &[f64],
    labels: &[u8],
    feature: usize,
    perturbation: &FeaturePerturbation,
    all_categories: &[u32],
    rho: f64,
    attacked: AttackedClasses,
    cap: usize,
) -> Result<Option<SplitCandidate>> {
    if all_categories.len() > cap {
        return Err(Error::TooManyCategories {
            feature,
            categories: all_categories.len(),
            cap,
        });
    }
    let mut per_category: std::collections::BTreeMap<u32, [u32; 2]> = Default::default();
    for (&v, &y) in values.iter().zip(labels) {
        let c = category_of(v).ok_or_else(|| Error::Parse(format!("feature {feature}: {v} is not a category id")))?;
        per_category.entry(c).or_default()[y as usize] += 1;
    }
    let present: Vec<u32> = per_category.keys().copied().collect();
    if present.len() > cap {
        return Err(Error::TooManyCategories {
            feature,
            categories: present.len(),
            cap,
        });
    }
    if present.len() < 2 {
        return Ok(None);
    }
    let (a0, a1) = (attacked.contains(0), attacked.contains(1));
    let mut best: Option<SplitCandidate> = None;
    for mask in 1u32..(1 << (present.len() - 1)) {
        let left_set: BTreeSet<u32> = present
            .iter()
            .enumerate()
            .filter(|(j, _)| mask & (1 << j) != 0)
            .map(|(_, &c)| c)
            .collect();
        let mut raw = RawCounts::default();
        for (&c, n) in &per_category {
            for label in 0..2u8 {
                let side = categorical_side(c, &left_set, perturbation, all_categories, attacked.contains(label));
                raw.slot(side)[label as usize] += n[label as usize];
            }
        }
        let counts = apply_rho(&raw, rho)?;
        let adv = adversarial_score(&counts, a0, a1);
        let better = match &best {
            None => true,
            Some(b) => {
                adv.score < b.score
                    || (adv.score == b.score && matches!(&b.rule, SplitRule::Categories(s) if left_set < *s))
            }
        };
        if better {
            best = Some(SplitCandidate {
                feature,
                rule: SplitRule::Categories(left_set),
                score: adv.score,
                x_star: adv.x_star,
                y_star: adv.y_star,
            });
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impurity::adversarial_score_two_class;
    use crate::threat_model::AttackedClasses as AC;
    use proptest::prelude::*;
    use Bound::{Finite, Unbounded};

    fn approx_eq(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn candidates_around_one_sample() {
        let c = candidate_thresholds(&[3.3], Finite(0.2), Finite(0.2), None);
        assert!(approx_eq(&c, &[3.1, 3.3, 3.5]), "{c:?}");
        let c = candidate_thresholds(&[1.0, 2.0], Finite(0.0), Finite(0.0), None);
        assert_eq!(c, vec![1.0, 2.0]);
        let c = candidate_thresholds(&[0.5], Finite(0.1), Finite(0.3), None);
        assert!(approx_eq(&c, &[0.4, 0.5, 0.8]), "{c:?}");
    }

    #[test]
    fn unbounded_sides_add_no_candidates() {
        let c = candidate_thresholds(&[0.2, 0.6], Unbounded, Unbounded, Some((0.0, 1.0)));
        assert_eq!(c, vec![0.2, 0.6]);
        let c = candidate_thresholds(&[0.95], Finite(0.1), Finite(0.1), Some((0.0, 1.0)));
        assert!(approx_eq(&c, &[0.85, 0.95]));
    }

    #[test]
    fn partition_examples() {
        let values = [0.0, 0.1, 0.9, 1.0];
        let labels = [0, 0, 1, 1];
        let raw = partition_counts(&values, &labels, 0.2, Finite(0.1), Finite(0.1), AC::BOTH);
        assert_eq!(raw.left, [2, 0]);
        assert_eq!(raw.right, [0, 2]);
        assert_eq!(raw.left_inter, [0, 0]);
        assert_eq!(raw.right_inter, [0, 0]);

        for s in [0.05, 0.5, 0.95] {
            let raw = partition_counts(&values, &labels, s, Finite(0.0), Finite(0.0), AC::BOTH);
            assert_eq!(raw.left_inter, [0, 0]);
            assert_eq!(raw.right_inter, [0, 0]);
        }

        let raw = partition_counts(&[0.45], &[1], 0.5, Finite(0.1), Finite(0.1), AC::BOTH);
        assert_eq!(raw.left_inter, [0, 1]);
    }

    #[test]
    fn boundary_semantics() {
        // Reaching exactly s stays left; reaching past s is needed to go right.
        assert_eq!(numerical_side(0.4, 0.5, Finite(0.1), Finite(0.1), true), Side::Left);
        assert_eq!(numerical_side(0.6, 0.5, Finite(0.1), Finite(0.1), true), Side::RightIntersection);
        assert_eq!(numerical_side(0.45, 0.5, Finite(0.0), Unbounded, true), Side::LeftIntersection);
        assert_eq!(numerical_side(0.55, 0.5, Finite(0.0), Unbounded, true), Side::Right);
        assert_eq!(numerical_side(0.9, 0.5, Unbounded, Finite(0.0), true), Side::RightIntersection);
        assert_eq!(numerical_side(0.45, 0.5, Finite(0.1), Finite(0.1), false), Side::Left);
    }

    #[test]
    fn unattacked_label_stays_put() {
        let raw = partition_counts(&[0.45, 0.45], &[0, 1], 0.5, Finite(0.1), Finite(0.1), AC::MALICIOUS);
        assert_eq!(raw.left, [1, 0]);
        assert_eq!(raw.left_inter, [0, 1]);
    }

    #[test]
    fn rho_scaling() {
        let raw = RawCounts {
            left: [1, 0],
            left_inter: [2, 0],
            right_inter: [2, 0],
            right: [1, 0],
        };
        let c = apply_rho(&raw, 0.5).unwrap();
        assert_eq!((c.l0, c.r0, c.i0), (2.0, 2.0, 2.0));
        let c = apply_rho(&raw, 1.0).unwrap();
        assert_eq!((c.l0, c.r0, c.i0), (1.0, 1.0, 4.0));
        let c = apply_rho(&raw, 0.0).unwrap();
        assert_eq!((c.l0, c.r0, c.i0), (3.0, 3.0, 0.0));
        assert!(matches!(apply_rho(&raw, 1.5), Err(Error::InvalidParam(_))));
        assert!(matches!(apply_rho(&raw, -0.1), Err(Error::InvalidParam(_))));
    }

    fn split(values: &[f64], labels: &[u8], eps: f64) -> Option<SplitCandidate> {
        let p = FeaturePerturbation::from_bounds(Finite(eps), Finite(eps)).unwrap();
        best_robust_split_numerical(values, labels, 0, &p, (0.0, 1.0), 1.0, AC::BOTH).unwrap()
    }

    /// Scores every candidate from scratch.
    fn exhaustive(values: &[f64], labels: &[u8], eps: f64) -> Vec<(f64, f64)> {
        candidate_thresholds(values, Finite(eps), Finite(eps), Some((0.0, 1.0)))
            .into_iter()
            .filter_map(|s| {
                let raw = partition_counts(values, labels, s, Finite(eps), Finite(eps), AC::BOTH);
                raw.both_sides_occupied()
                    .then(|| (s, adversarial_score_two_class(&apply_rho(&raw, 1.0).unwrap()).score))
            })
            .collect()
    }

    #[test]
    fn separable_data_small_epsilon() {
        let values = [0.0, 0.1, 0.9, 1.0];
        let labels = [0, 0, 1, 1];
        let best = split(&values, &labels, 0.1).unwrap();
        assert_eq!(best.score, 0.0);
        let SplitRule::Threshold(s) = best.rule else { panic!() };
        assert!((0.2..0.8).contains(&s), "{s}");
        let all = exhaustive(&values, &labels, 0.1);
        let min = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert_eq!(min, best.score);
    }

    #[test]
    fn separable_data_large_epsilon() {
        let values = [0.0, 0.1, 0.9, 1.0];
        let labels = [0, 0, 1, 1];
        let best = split(&values, &labels, 0.5).unwrap();
        assert!(best.score > 0.0);
        for s in candidate_thresholds(&values, Finite(0.5), Finite(0.5), Some((0.0, 1.0))) {
            let raw = partition_counts(&values, &labels, s, Finite(0.5), Finite(0.5), AC::BOTH);
            if raw.both_sides_occupied() {
                assert!(raw.left_inter.iter().chain(&raw.right_inter).sum::<u32>() > 0);
            }
        }
    }

    #[test]
    fn pure_node_scores_zero() {
        let best = split(&[0.1, 0.5, 0.9], &[1, 1, 1], 0.1).unwrap();
        assert_eq!(best.score, 0.0);
    }

    #[test]
    fn no_split_on_constant_feature() {
        assert!(split(&[0.3, 0.3, 0.3], &[0, 1, 0], 0.0).is_none());
    }

    #[test]
    fn categorical_clean_separation() {
        let values = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let labels = [0, 0, 0, 1, 1, 1];
        let best = best_robust_split_categorical(
            &values, &labels, 0, &FeaturePerturbation::None, &[0, 1], 1.0, AC::BOTH, 12,
        )
        .unwrap()
        .unwrap();
        assert_eq!(best.score, 0.0);
        assert_eq!(best.rule, SplitRule::Categories(BTreeSet::from([0])));
    }

    #[test]
    fn categorical_free_movement() {
        let values = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let labels = [0, 0, 0, 1, 1, 1];
        let free = FeaturePerturbation::FreeWithin(BTreeSet::from([0, 1]));
        let best = best_robust_split_categorical(&values, &labels, 0, &free, &[0, 1], 1.0, AC::BOTH, 12)
            .unwrap()
            .unwrap();
        // Everything is movable: I0 = I1 = 3. Brute force over all (x, y).
        let mut brute = f64::MIN;
        for x in 0..=3 {
            for y in 0..=3 {
                let c = SplitCounts::with_intersection(0.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 3.0);
                brute = brute.max(c.score_at(x as f64, y as f64));
            }
        }
        assert_eq!(best.score, brute);
        assert_eq!(best.score, 0.5);
    }

    #[test]
    fn categorical_partition_count() {
        let values = [0.0, 1.0, 2.0];
        let labels = [0, 1, 0];
        // Only {1} | {0, 2} separates the labels.
        let best = best_robust_split_categorical(
            &values, &labels, 0, &FeaturePerturbation::None, &[0, 1, 2], 1.0, AC::BOTH, 12,
        )
        .unwrap()
        .unwrap();
        assert_eq!(best.score, 0.0);
        assert_eq!(best.rule, SplitRule::Categories(BTreeSet::from([1])));
    }

    #[test]
    fn categorical_cap() {
        let cats: Vec<u32> = (0..13).collect();
        let err = best_robust_split_categorical(&[0.0], &[0], 3, &FeaturePerturbation::None, &cats, 1.0, AC::BOTH, 12);
        assert!(matches!(err, Err(Error::TooManyCategories { feature: 3, categories: 13, cap: 12 })));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>, f64, f64)> {
        (1usize..25).prop_flat_map(|n| {
            (
                proptest::collection::vec((0u32..=20).prop_map(|v| v as f64 / 20.0), n),
                proptest::collection::vec(0u8..2, n),
                (0u32..=6).prop_map(|v| v as f64 / 20.0),
                (0u32..=6).prop_map(|v| v as f64 / 20.0),
            )
        })
    }

    proptest! {
        #[test]
        fn sweep_matches_scratch((values, labels, l, r) in instance(), attack in 0usize..3) {
            let attacked = [AC::BOTH, AC::MALICIOUS, AC::NONE][attack];
            let (left, right) = (Finite(l), Finite(r));
            let candidates = candidate_thresholds(&values, left, right, None);
            let mut seen = 0;
            sweep_numerical(&values, &labels, left, right, attacked, &candidates, |s, raw| {
                seen += 1;
                assert_eq!(*raw, partition_counts(&values, &labels, s, left, right, attacked));
                for label in 0..2u8 {
                    let n = labels.iter().filter(|&&y| y == label).count() as u32;
                    assert_eq!(raw.label_total(label), n);
                }
            });
            prop_assert_eq!(seen, candidates.len());
        }

        #[test]
        fn sweep_matches_scratch_unbounded((values, labels, l, _r) in instance(), which in 0usize..3) {
            let (left, right) = [(Unbounded, Finite(l)), (Finite(l), Unbounded), (Unbounded, Unbounded)][which];
            let candidates = candidate_thresholds(&values, left, right, None);
            sweep_numerical(&values, &labels, left, right, AC::BOTH, &candidates, |s, raw| {
                assert_eq!(*raw, partition_counts(&values, &labels, s, left, right, AC::BOTH));
            });
        }

        #[test]
        fn null_threat_matches_plain_gini((values, labels, l, r) in instance(), rho in 0.0..=1.0f64) {
            let null = best_robust_split_numerical(
                &values, &labels, 0, &FeaturePerturbation::None, (0.0, 1.0), rho, AC::BOTH).unwrap();
            // Plain CART over the sample positions with the same tie rule.
            let mut positions = values.clone();
            positions.sort_by(f64::total_cmp);
            positions.dedup();
            let mut plain: Option<(f64, f64)> = None;
            for &s in positions.iter().filter(|&&s| s < 1.0) {
                let mut c = [[0.0f64; 2]; 2];
                for (&v, &y) in values.iter().zip(&labels) {
                    c[(v > s) as usize][y as usize] += 1.0;
                }
                if c[0][0] + c[0][1] == 0.0 || c[1][0] + c[1][1] == 0.0 {
                    continue;
                }
                let score = crate::impurity::split_score(
                    crate::impurity::ClassCounts::new(c[0][0], c[0][1]),
                    crate::impurity::ClassCounts::new(c[1][0], c[1][1]),
                );
                if plain.is_none_or(|p| score < p.1) {
                    plain = Some((s, score));
                }
            }
            match (null, plain) {
                (None, None) => {}
                (Some(a), Some((s, score))) => {
                    prop_assert_eq!(a.rule, SplitRule::Threshold(s));
                    prop_assert_eq!(a.score, score);
                }
                (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
            }
            // rho = 0 ignores the threat entirely.
            let p = FeaturePerturbation::from_bounds(Finite(l), Finite(r)).unwrap();
            let zero = best_robust_split_numerical(&values, &labels, 0, &p, (0.0, 1.0), 0.0, AC::BOTH).unwrap();
            let null0 = best_robust_split_numerical(
                &values, &labels, 0, &FeaturePerturbation::None, (0.0, 1.0), 0.0, AC::BOTH).unwrap();
            prop_assert_eq!(zero.map(|c| (c.rule, c.score)), null0.map(|c| (c.rule, c.score)));
        }
    }
}
