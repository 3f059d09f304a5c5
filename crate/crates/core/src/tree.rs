//! Greedy robust tree induction, prediction and the model file format.

use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureInfo, FeatureKind, Scaler};
use crate::impurity::{gini, ClassCounts};
use crate::splitter::{
    best_robust_split_categorical, best_robust_split_numerical, categorical_side, category_of, numerical_side,
    Side, SplitCandidate, SplitRule, DEFAULT_CATEGORY_CAP,
};
use crate::threat_model::{AttackedClasses, ThreatModel};
use crate::{Error, Result};

pub const FORMAT: &str = "robust-tree";
pub const FORMAT_VERSION: u32 = 1;

/// Splits that do not lower the impurity by more than this are not made.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Fraction of the movable samples the attacker controls.
    pub rho: f64,
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub category_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_CATEGORY_CAP
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams {
            max_depth: 4,
            min_samples_split: 2,
            rho: 1.0,
            seed: 0,
            category_cap: DEFAULT_CATEGORY_CAP,
        }
    }
}

impl FitParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParam(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParam(format!(
                "min_samples_split must be at least 2, got {}",
                self.min_samples_split
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Leaf {
    pub count0: u32,
    pub count1: u32,
}

impl Leaf {
    /// Majority label; ties predict 0.
    pub fn predicted_label(&self) -> u8 {
        (self.count1 > self.count0) as u8
    }

    /// Fraction of label 1.
    pub fn value(&self) -> f64 {
        self.count1 as f64 / (self.count0 + self.count1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionNode {
    pub feature: usize,
    pub rule: SplitRule,
    pub left: Box<Node>,
    pub right: Box<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf(Leaf),
    Split(DecisionNode),
}

impl Node {
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split(d) => 1 + d.left.depth().max(d.right.depth()),
        }
    }

    pub fn n_nodes(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split(d) => 1 + d.left.n_nodes() + d.right.n_nodes(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split(d) => d.left.n_leaves() + d.right.n_leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub root: Node,
    pub features: Vec<FeatureInfo>,
    pub params: FitParams,
    pub threat_digest: String,
    /// Scaling applied to raw inputs before the tree was fitted.
    pub scaler: Option<Scaler>,
}

impl Tree {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn check_arity(&self, sample: &[f64]) -> Result<()> {
        if sample.len() != self.features.len() {
            return Err(Error::SampleArity {
                expected: self.features.len(),
                got: sample.len(),
            });
        }
        Ok(())
    }

    /// Leaf reached by `sample`, which must have the right arity.
    pub fn leaf(&self, sample: &[f64]) -> &Leaf {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(leaf) => return leaf,
                Node::Split(d) => {
                    node = if d.rule.goes_left(sample[d.feature]) { &d.left } else { &d.right };
                }
            }
        }
    }

    pub fn predict(&self, sample: &[f64]) -> Result<u8> {
        self.check_arity(sample)?;
        Ok(self.leaf(sample).predicted_label())
    }

    pub fn predict_value(&self, sample: &[f64]) -> Result<f64> {
        self.check_arity(sample)?;
        Ok(self.leaf(sample).value())
    }

    /// Fraction of rows predicted correctly.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        if data.n_features() != self.n_features() {
            return Err(Error::SampleArity {
                expected: self.n_features(),
                got: data.n_features(),
            });
        }
        let correct = (0..data.n_rows())
            .filter(|&i| self.leaf(&data.row(i)).predicted_label() == data.labels()[i])
            .count();
        Ok(correct as f64 / data.n_rows() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            params: self.params.clone(),
            threat_digest: self.threat_digest.clone(),
            features: self.features.clone(),
            scaler: self.scaler.clone(),
            root: NodeDocument::from_node(&self.root),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Tree> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::MalformedModel(e.to_string()))?;
        match value.get("format").and_then(|v| v.as_str()) {
            Some(FORMAT) => {}
            other => return Err(Error::MalformedModel(format!("unexpected format tag {other:?}"))),
        }
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::MalformedModel("missing version".into()))?;
        if version != FORMAT_VERSION as u64 {
            return Err(Error::ModelVersion {
                found: version.try_into().unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let doc: ModelDocument = serde_json::from_value(value).map_err(|e| Error::MalformedModel(e.to_string()))?;
        let root = doc.root.into_node(&doc.features)?;
        if let Some(scaler) = &doc.scaler {
            if scaler.columns.len() != doc.features.len() {
                return Err(Error::MalformedModel("scaler does not match the feature list".into()));
            }
        }
        Ok(Tree {
            root,
            features: doc.features,
            params: doc.params,
            threat_digest: doc.threat_digest,
            scaler: doc.scaler,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Tree> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Tree::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    params: FitParams,
    threat_digest: String,
    features: Vec<FeatureInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scaler: Option<Scaler>,
    root: NodeDocument,
}

/// Wire form of a node: leaves carry counts, decision nodes carry a rule.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left_categories: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<Box<NodeDocument>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<Box<NodeDocument>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    count0: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    count1: Option<u32>,
}

impl NodeDocument {
    fn from_node(node: &Node) -> Self {
        let empty = NodeDocument {
            feature: None,
            threshold: None,
            left_categories: None,
            left: None,
            right: None,
            count0: None,
            count1: None,
        };
        match node {
            Node::Leaf(l) => NodeDocument {
                count0: Some(l.count0),
                count1: Some(l.count1),
                ..empty
            },
            Node::Split(d) => {
                let (threshold, left_categories) = match &d.rule {
                    SplitRule::Threshold(s) => (Some(*s), None),
                    SplitRule::Categories(set) => (None, Some(set.iter().copied().collect())),
                };
                NodeDocument {
                    feature: Some(d.feature),
                    threshold,
                    left_categories,
                    left: Some(Box::new(Self::from_node(&d.left))),
                    right: Some(Box::new(Self::from_node(&d.right))),
                    ..empty
                }
            }
        }
    }

    fn into_node(self, features: &[FeatureInfo]) -> Result<Node> {
        let bad = |m: &str| Err(Error::MalformedModel(m.into()));
        match self {
            NodeDocument {
                feature: None,
                threshold: None,
                left_categories: None,
                left: None,
                right: None,
                count0: Some(count0),
                count1: Some(count1),
            } => {
                if count0 == 0 && count1 == 0 {
                    return bad("leaf with no samples");
                }
                Ok(Node::Leaf(Leaf { count0, count1 }))
            }
            NodeDocument {
                feature: Some(feature),
                threshold,
                left_categories,
                left: Some(left),
                right: Some(right),
                count0: None,
                count1: None,
            } => {
                let Some(info) = features.get(feature) else {
                    return bad(&format!("feature index {feature} out of range"));
                };
                let rule = match (threshold, left_categories, &info.kind) {
                    (Some(s), None, FeatureKind::Numerical) if s.is_finite() => SplitRule::Threshold(s),
                    (None, Some(cats), FeatureKind::Categorical { .. }) => SplitRule::Categories(cats.into_iter().collect()),
                    _ => return bad(&format!("node on feature {feature} needs exactly one rule matching its kind")),
                };
                Ok(Node::Split(DecisionNode {
                    feature,
                    rule,
                    left: Box::new(left.into_node(features)?),
                    right: Box::new(right.into_node(features)?),
                }))
            }
            _ => bad("node is neither a leaf nor a decision node"),
        }
    }
}

/// Sample ids at a node grouped by their position relative to a split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Groups {
    pub left: Vec<usize>,
    pub left_inter: Vec<usize>,
    pub right_inter: Vec<usize>,
    pub right: Vec<usize>,
}

impl Groups {
    fn push(&mut self, side: Side, id: usize) {
        match side {
            Side::Left => self.left.push(id),
            Side::LeftIntersection => self.left_inter.push(id),
            Side::RightIntersection => self.right_inter.push(id),
            Side::Right => self.right.push(id),
        }
    }
}

/// Moves intersection samples so the children see the attacker's placement.
///
/// First `round((1 - rho)|LI|)` random samples of `LI` go back to `L`, and
/// likewise from `RI` to `R`. Then, for each attacked label, random samples
/// move between `RI` and `LI` until `LI` holds the target number of that
/// label (`x_star` for label 1, `y_star` for label 0), as far as the samples
/// allow. Returns the sorted `(L ∪ LI, RI ∪ R)`.
pub fn propagate(
    mut groups: Groups,
    labels: &[u8],
    x_star: u32,
    y_star: u32,
    rho: f64,
    attacked: AttackedClasses,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let keep = 1.0 - rho;
    let k = (keep * groups.left_inter.len() as f64).round() as usize;
    let back = take_random(&mut groups.left_inter, labels, None, k, rng);
    groups.left.extend(back);
    let k = (keep * groups.right_inter.len() as f64).round() as usize;
    let back = take_random(&mut groups.right_inter, labels, None, k, rng);
    groups.right.extend(back);

    for (label, target) in [(1u8, x_star), (0u8, y_star)] {
        if !attacked.contains(label) {
            continue;
        }
        let target = target as usize;
        let current = groups.left_inter.iter().filter(|&&i| labels[i] == label).count();
        if current < target {
            let moved = take_random(&mut groups.right_inter, labels, Some(label), target - current, rng);
            groups.left_inter.extend(moved);
        } else if current > target {
            let moved = take_random(&mut groups.left_inter, labels, Some(label), current - target, rng);
            groups.right_inter.extend(moved);
        }
    }

    let mut left = groups.left;
    left.extend(groups.left_inter);
    left.sort_unstable();
    let mut right = groups.right;
    right.extend(groups.right_inter);
    right.sort_unstable();
    (left, right)
}

/// Removes up to `k` uniformly chosen ids (optionally of one label) from
/// `from`. The generator is untouched when the choice is forced.
fn take_random(from: &mut Vec<usize>, labels: &[u8], label: Option<u8>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let eligible: Vec<usize> = (0..from.len())
        .filter(|&p| label.is_none_or(|l| labels[from[p]] == l))
        .collect();
    let k = k.min(eligible.len());
    if k == 0 {
        return Vec::new();
    }
    let mut chosen: Vec<usize> = if k == eligible.len() {
        eligible
    } else {
        index::sample(rng, eligible.len(), k).into_iter().map(|j| eligible[j]).collect()
    };
    chosen.sort_unstable();
    let mut taken = Vec::with_capacity(k);
    for &p in chosen.iter().rev() {
        taken.push(from.remove(p));
    }
    taken.reverse();
    taken
}

/// Fits a tree on `data` against `threat`.
///
/// Stored parameters are canonical: a null threat model or `rho = 0` is
/// recorded as the null digest with `rho = 0`, since both fit the same tree.
pub fn fit(data: &Dataset, threat: &ThreatModel, params: &FitParams) -> Result<Tree> {
    params.validate()?;
    threat.validate_for(&data.categorical_mask())?;
    let mut fitter = Fitter {
        data,
        threat,
        params,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
    };
    let all: Vec<usize> = (0..data.n_rows()).collect();
    let root = fitter.grow(&all, 0)?;

    let natural = threat.is_null() || params.rho == 0.0;
    let mut stored = params.clone();
    let threat_digest = if natural {
        stored.rho = 0.0;
        ThreatModel::null(data.n_features()).digest()
    } else {
        threat.digest()
    };
    Ok(Tree {
        root,
        features: data.features().to_vec(),
        params: stored,
        threat_digest,
        scaler: None,
    })
}

struct Fitter<'a> {
    data: &'a Dataset,
    threat: &'a ThreatModel,
    params: &'a FitParams,
    rng: ChaCha8Rng,
}

impl Fitter<'_> {
    fn grow(&mut self, ids: &[usize], depth: usize) -> Result<Node> {
        let labels = self.data.labels();
        let ones = ids.iter().filter(|&&i| labels[i] == 1).count();
        let leaf = Leaf {
            count0: (ids.len() - ones) as u32,
            count1: ones as u32,
        };
        if depth >= self.params.max_depth || ones == 0 || ones == ids.len() || ids.len() < self.params.min_samples_split {
            return Ok(Node::Leaf(leaf));
        }
        let Some(best) = self.best_split(ids)? else {
            return Ok(Node::Leaf(leaf));
        };
        let impurity = gini(ClassCounts::new(leaf.count0 as f64, leaf.count1 as f64));
        if best.score >= impurity - MIN_GAIN {
            return Ok(Node::Leaf(leaf));
        }

        let groups = self.groups(ids, &best);
        let (left_ids, right_ids) = propagate(
            groups,
            labels,
            best.x_star,
            best.y_star,
            self.params.rho,
            self.threat.attacked_classes(),
            &mut self.rng,
        );
        // The attacker can empty a side; it then predicts like its parent.
        let left = if left_ids.is_empty() {
            Node::Leaf(leaf)
        } else {
            self.grow(&left_ids, depth + 1)?
        };
        let right = if right_ids.is_empty() {
            Node::Leaf(leaf)
        } else {
            self.grow(&right_ids, depth + 1)?
        };
        Ok(Node::Split(DecisionNode {
            feature: best.feature,
            rule: best.rule,
            left: Box::new(left),
            right: Box::new(right),
        }))
    }

    /// Lowest-scoring split over all features; ties go to the lower feature index.
    fn best_split(&self, ids: &[usize]) -> Result<Option<SplitCandidate>> {
        let labels: Vec<u8> = ids.iter().map(|&i| self.data.labels()[i]).collect();
        let per_feature = (0..self.data.n_features())
            .into_par_iter()
            .map(|f| self.best_for_feature(f, ids, &labels))
            .collect::<Result<Vec<_>>>()?;
        let mut best: Option<SplitCandidate> = None;
        for cand in per_feature.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| cand.score < b.score) {
                best = Some(cand);
            }
        }
        Ok(best)
    }

    fn best_for_feature(&self, f: usize, ids: &[usize], labels: &[u8]) -> Result<Option<SplitCandidate>> {
        let column = self.data.column(f);
        let values: Vec<f64> = ids.iter().map(|&i| column[i]).collect();
        let info = &self.data.features()[f];
        let pert = self.threat.perturbation(f)?;
        let attacked = self.threat.attacked_classes();
        match &info.kind {
            FeatureKind::Numerical => {
                best_robust_split_numerical(&values, labels, f, pert, info.range, self.params.rho, attacked)
            }
            FeatureKind::Categorical { .. } => best_robust_split_categorical(
                &values,
                labels,
                f,
                pert,
                &info.kind.category_ids(),
                self.params.rho,
                attacked,
                self.params.category_cap,
            ),
        }
    }

    fn groups(&self, ids: &[usize], split: &SplitCandidate) -> Groups {
        let column = self.data.column(split.feature);
        let labels = self.data.labels();
        let pert = self.threat.perturbations()[split.feature].clone();
        let attacked = self.threat.attacked_classes();
        let all = self.data.features()[split.feature].kind.category_ids();
        let (lb, rb) = pert.bounds();
        let mut groups = Groups::default();
        for &i in ids {
            let movable = attacked.contains(labels[i]);
            let side = match &split.rule {
                SplitRule::Threshold(s) => numerical_side(column[i], *s, lb, rb, movable),
                SplitRule::Categories(set) => {
                    let c = category_of(column[i]).expect("validated category id");
                    categorical_side(c, set, &pert, &all, movable)
                }
            };
            groups.push(side, i);
        }
        groups
    }
}
