//! Exact evasion attack on a single tree.
//!
//! Every leaf owns an axis-aligned region of feature space. A sample can be
//! moved into a leaf iff its perturbation region meets that leaf's region,
//! so the optimal attack only has to check each leaf once.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureInfo, FeatureKind};
use crate::splitter::{category_of, SplitRule};
use crate::threat_model::{Interval, ThreatModel};
use crate::tree::{Node, Tree};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CategorySet {
    Any,
    In(BTreeSet<u32>),
    NotIn(BTreeSet<u32>),
}

impl CategorySet {
    fn intersect(&self, other: &CategorySet) -> CategorySet {
        use CategorySet::*;
        match (self, other) {
            (Any, x) | (x, Any) => x.clone(),
            (In(a), In(b)) => In(a.intersection(b).copied().collect()),
            (In(a), NotIn(b)) | (NotIn(b), In(a)) => In(a.difference(b).copied().collect()),
            (NotIn(a), NotIn(b)) => NotIn(a.union(b).copied().collect()),
        }
    }

    /// Whether a valid category id `c` is admitted; `None` stands for a value
    /// that is not a category id, which every categorical split sends right.
    pub fn contains(&self, c: Option<u32>) -> bool {
        match (self, c) {
            (CategorySet::Any, _) => true,
            (CategorySet::In(s), Some(c)) => s.contains(&c),
            (CategorySet::In(_), None) => false,
            (CategorySet::NotIn(s), Some(c)) => !s.contains(&c),
            (CategorySet::NotIn(_), None) => true,
        }
    }
}

/// Region of one feature: `low < v <= high` for numerical features.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureBox {
    Numerical { low: f64, high: f64 },
    Categorical(CategorySet),
}

impl FeatureBox {
    pub fn contains(&self, value: f64) -> bool {
        match self {
            FeatureBox::Numerical { low, high } => *low < value && value <= *high,
            FeatureBox::Categorical(set) => set.contains(category_of(value)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafBox {
    pub features: Vec<FeatureBox>,
    pub predicted_label: u8,
}

/// Leaf regions in depth-first, left-first order.
pub fn enumerate_leaf_boxes(tree: &Tree) -> Vec<LeafBox> {
    let root: Vec<FeatureBox> = tree
        .features
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Numerical => FeatureBox::Numerical {
                low: f64::NEG_INFINITY,
                high: f64::INFINITY,
            },
            FeatureKind::Categorical { .. } => FeatureBox::Categorical(CategorySet::Any),
        })
        .collect();
    let mut out = Vec::new();
    collect_boxes(&tree.root, root, &mut out);
    out
}

fn collect_boxes(node: &Node, current: Vec<FeatureBox>, out: &mut Vec<LeafBox>) {
    match node {
        Node::Leaf(leaf) => out.push(LeafBox {
            features: current,
            predicted_label: leaf.predicted_label(),
        }),
        Node::Split(d) => {
            let mut left = current.clone();
            let mut right = current;
            match (&d.rule, &mut left[d.feature], &mut right[d.feature]) {
                (SplitRule::Threshold(s), FeatureBox::Numerical { high, .. }, FeatureBox::Numerical { low, .. }) => {
                    *high = high.min(*s);
                    *low = low.max(*s);
                }
                (SplitRule::Categories(set), FeatureBox::Categorical(l), FeatureBox::Categorical(r)) => {
                    *l = l.intersect(&CategorySet::In(set.clone()));
                    *r = r.intersect(&CategorySet::NotIn(set.clone()));
                }
                _ => unreachable!("rule kind is validated against the feature kind"),
            }
            collect_boxes(&d.left, left, out);
            collect_boxes(&d.right, right, out);
        }
    }
}

/// What the attacker can turn one feature of a sample into.
#[derive(Debug, Clone, PartialEq)]
enum Reach {
    Interval(Interval),
    /// Reachable category ids; `None` when the value is not a category id
    /// and cannot be changed.
    Categories(Option<BTreeSet<u32>>),
}

fn sample_reach(sample: &[f64], threat: &ThreatModel, features: &[FeatureInfo], moves: bool) -> Result<Vec<Reach>> {
    sample
        .iter()
        .zip(features)
        .enumerate()
        .map(|(j, (&v, info))| {
            let pert = threat.perturbation(j)?;
            Ok(match &info.kind {
                FeatureKind::Numerical if moves => Reach::Interval(threat.perturbation_interval(j, v, info.range)?),
                FeatureKind::Numerical => Reach::Interval(Interval { lo: v, hi: v }),
                FeatureKind::Categorical { .. } => Reach::Categories(category_of(v).map(|c| {
                    if moves {
                        pert.reachable_categories(c, &info.kind.category_ids())
                    } else {
                        BTreeSet::from([c])
                    }
                })),
            })
        })
        .collect()
}

/// A point in both `reach` and `region`, if there is one: the midpoint of
/// each numerical intersection and the smallest admitted category.
fn meet(reach: &Reach, region: &FeatureBox, original: f64) -> Option<f64> {
    match (reach, region) {
        (Reach::Interval(iv), FeatureBox::Numerical { low, high }) => {
            let hi = iv.hi.min(*high);
            if hi < iv.lo || hi <= *low {
                return None;
            }
            if iv.lo > *low {
                Some(0.5 * (iv.lo + hi))
            } else {
                let mid = 0.5 * (*low + hi);
                Some(if mid > *low { mid } else { hi })
            }
        }
        (Reach::Categories(None), FeatureBox::Categorical(set)) => set.contains(None).then_some(original),
        (Reach::Categories(Some(cats)), FeatureBox::Categorical(set)) => {
            cats.iter().find(|&&c| set.contains(Some(c))).map(|&c| c as f64)
        }
        _ => None,
    }
}

fn check_arity(tree: &Tree, threat: &ThreatModel, width: usize) -> Result<()> {
    if threat.len() != tree.n_features() {
        return Err(Error::ThreatArity {
            expected: tree.n_features(),
            got: threat.len(),
        });
    }
    if width != tree.n_features() {
        return Err(Error::SampleArity {
            expected: tree.n_features(),
            got: width,
        });
    }
    Ok(())
}

/// Whether the attacker can move `sample` into `region`. Numerical feature
/// ranges come from `features`.
pub fn is_reachable(sample: &[f64], region: &LeafBox, threat: &ThreatModel, features: &[FeatureInfo]) -> Result<bool> {
    let reach = sample_reach(sample, threat, features, true)?;
    Ok(reach
        .iter()
        .zip(&region.features)
        .zip(sample)
        .all(|((r, b), &v)| meet(r, b, v).is_some()))
}

fn witness_in(reach: &[Reach], region: &LeafBox, sample: &[f64]) -> Option<Vec<f64>> {
    reach
        .iter()
        .zip(&region.features)
        .zip(sample)
        .map(|((r, b), &v)| meet(r, b, v))
        .collect()
}

fn find_witness(boxes: &[LeafBox], reach: &[Reach], sample: &[f64], label: u8) -> Option<Vec<f64>> {
    boxes
        .iter()
        .filter(|b| b.predicted_label != label)
        .find_map(|b| witness_in(reach, b, sample))
}

/// A perturbed copy of `sample` that the tree assigns a label other than
/// `label`, or `None` if no such point is reachable. Samples of classes the
/// threat model does not attack cannot move.
pub fn witness_perturbation(tree: &Tree, sample: &[f64], label: u8, threat: &ThreatModel) -> Result<Option<Vec<f64>>> {
    check_arity(tree, threat, sample.len())?;
    let boxes = enumerate_leaf_boxes(tree);
    let moves = threat.attacked_classes().contains(label);
    let reach = sample_reach(sample, threat, &tree.features, moves)?;
    Ok(find_witness(&boxes, &reach, sample, label))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub label: u8,
    pub natural_prediction: u8,
    pub misclassifiable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub accuracy: f64,
    pub adversarial_accuracy: f64,
    pub samples: Vec<SampleOutcome>,
}

/// Accuracy of `tree` on `data` when every sample of an attacked class is
/// moved optimally within `threat`.
pub fn adversarial_accuracy(tree: &Tree, data: &Dataset, threat: &ThreatModel) -> Result<AttackReport> {
    check_arity(tree, threat, data.n_features())?;
    if data.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let boxes = enumerate_leaf_boxes(tree);
    let attacked = threat.attacked_classes();
    let samples = (0..data.n_rows())
        .into_par_iter()
        .map(|i| {
            let row = data.row(i);
            let label = data.labels()[i];
            let natural_prediction = tree.leaf(&row).predicted_label();
            let reach = sample_reach(&row, threat, &tree.features, attacked.contains(label))?;
            let witness = find_witness(&boxes, &reach, &row, label);
            Ok(SampleOutcome {
                index: i,
                label,
                natural_prediction,
                misclassifiable: witness.is_some(),
                witness,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = samples.len() as f64;
    let correct = samples.iter().filter(|s| s.natural_prediction == s.label).count() as f64;
    let robust = samples.iter().filter(|s| !s.misclassifiable).count() as f64;
    Ok(AttackReport {
        accuracy: correct / n,
        adversarial_accuracy: robust / n,
        samples,
    })
}
