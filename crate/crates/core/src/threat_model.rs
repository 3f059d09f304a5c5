//! Per-feature perturbation limits and the set of classes the attacker controls.
//!
//! Token grammar, one token per feature:
//!
//! | token        | meaning                          | (left, right)  |
//! |--------------|----------------------------------|----------------|
//! | `""`         | not perturbable                  | (0, 0)         |
//! | `>`          | may only increase                | (0, ∞)         |
//! | `<`          | may only decrease                | (∞, 0)         |
//! | `<>`         | may take any value               | (∞, ∞)         |
//! | `0.1`        | may move 0.1 either way          | (0.1, 0.1)     |
//! | `(0.7, 0.3)` | 0.7 down, 0.3 up                 | (0.7, 0.3)     |
//! | `{0,2,5}`    | categorical: free within the set |                |
//!
//! `left` is how far a value may decrease and `right` how far it may increase.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// One side of a perturbation tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    pub fn is_zero(self) -> bool {
        matches!(self, Bound::Finite(e) if e == 0.0)
    }

    /// `value - self`, or `None` when unbounded.
    pub fn below(self, value: f64) -> Option<f64> {
        match self {
            Bound::Finite(e) => Some(value - e),
            Bound::Unbounded => None,
        }
    }

    /// `value + self`, or `None` when unbounded.
    pub fn above(self, value: f64) -> Option<f64> {
        match self {
            Bound::Finite(e) => Some(value + e),
            Bound::Unbounded => None,
        }
    }

    fn covers(self, other: Bound) -> bool {
        match (self, other) {
            (Bound::Unbounded, _) => true,
            (Bound::Finite(_), Bound::Unbounded) => false,
            (Bound::Finite(a), Bound::Finite(b)) => a >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeaturePerturbation {
    /// Not perturbable. Also the categorical "NotPerturbable".
    None,
    IncreaseOnly,
    DecreaseOnly,
    Anything,
    Symmetric(f64),
    Asymmetric { left: f64, right: f64 },
    /// Categorical: a sample whose category is in the set may switch to any
    /// other category of the set.
    FreeWithin(BTreeSet<u32>),
}

impl FeaturePerturbation {
    /// Canonical variant for a numerical tuple.
    pub fn from_bounds(left: Bound, right: Bound) -> Result<Self, String> {
        for b in [left, right] {
            if let Bound::Finite(e) = b {
                if !e.is_finite() || e < 0.0 {
                    return Err(format!("perturbation size must be finite and non-negative, got {e}"));
                }
            }
        }
        Ok(match (left, right) {
            (Bound::Unbounded, Bound::Unbounded) => FeaturePerturbation::Anything,
            (Bound::Unbounded, r) if r.is_zero() => FeaturePerturbation::DecreaseOnly,
            (l, Bound::Unbounded) if l.is_zero() => FeaturePerturbation::IncreaseOnly,
            (Bound::Finite(l), Bound::Finite(r)) if l == 0.0 && r == 0.0 => FeaturePerturbation::None,
            (Bound::Finite(l), Bound::Finite(r)) if l == r => FeaturePerturbation::Symmetric(l),
            (Bound::Finite(l), Bound::Finite(r)) => FeaturePerturbation::Asymmetric { left: l, right: r },
            (l, r) => {
                return Err(format!(
                    "unsupported mix of bounded and unbounded sides ({l:?}, {r:?})"
                ))
            }
        })
    }

    /// Tuple form `(left, right)`. Categorical variants map to `(0, 0)`.
    pub fn bounds(&self) -> (Bound, Bound) {
        use Bound::*;
        match *self {
            FeaturePerturbation::None | FeaturePerturbation::FreeWithin(_) => (Finite(0.0), Finite(0.0)),
            FeaturePerturbation::IncreaseOnly => (Finite(0.0), Unbounded),
            FeaturePerturbation::DecreaseOnly => (Unbounded, Finite(0.0)),
            FeaturePerturbation::Anything => (Unbounded, Unbounded),
            FeaturePerturbation::Symmetric(e) => (Finite(e), Finite(e)),
            FeaturePerturbation::Asymmetric { left, right } => (Finite(left), Finite(right)),
        }
    }

    pub fn is_trivial(&self) -> bool {
        match self {
            FeaturePerturbation::FreeWithin(set) => set.len() < 2,
            other => {
                let (l, r) = other.bounds();
                l.is_zero() && r.is_zero()
            }
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, FeaturePerturbation::FreeWithin(_))
    }

    /// Categories reachable from `category`, including itself. `all` lists every
    /// category of the feature and is used for `<>`.
    pub fn reachable_categories(&self, category: u32, all: &[u32]) -> BTreeSet<u32> {
        match self {
            FeaturePerturbation::FreeWithin(set) if set.contains(&category) => set.clone(),
            FeaturePerturbation::Anything => all.iter().copied().chain([category]).collect(),
            _ => BTreeSet::from([category]),
        }
    }

    fn parse(token: &str) -> Result<Self, String> {
        let t = token.trim();
        let t = t.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(t).trim();
        match t {
            "" | "None" | "none" => return Ok(FeaturePerturbation::None),
            ">" => return Ok(FeaturePerturbation::IncreaseOnly),
            "<" => return Ok(FeaturePerturbation::DecreaseOnly),
            "<>" => return Ok(FeaturePerturbation::Anything),
            _ => {}
        }
        if let Some(inner) = t.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
            let mut set = BTreeSet::new();
            for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let id = part
                    .parse::<u32>()
                    .map_err(|_| format!("invalid category id {part:?}"))?;
                set.insert(id);
            }
            return Ok(FeaturePerturbation::FreeWithin(set));
        }
        if let Some(inner) = t.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(format!("expected a pair (left, right), got {token:?}"));
            }
            let left = parse_side(parts[0])?;
            let right = parse_side(parts[1])?;
            return FeaturePerturbation::from_bounds(left, right);
        }
        let e = parse_number(t)?;
        FeaturePerturbation::from_bounds(Bound::Finite(e), Bound::Finite(e))
    }

    /// Token that parses back to `self`.
    pub fn to_token(&self) -> String {
        match self {
            FeaturePerturbation::None => String::new(),
            FeaturePerturbation::IncreaseOnly => ">".into(),
            FeaturePerturbation::DecreaseOnly => "<".into(),
            FeaturePerturbation::Anything => "<>".into(),
            FeaturePerturbation::Symmetric(e) => format!("{e:?}"),
            FeaturePerturbation::Asymmetric { left, right } => format!("({left:?},{right:?})"),
            FeaturePerturbation::FreeWithin(set) => {
                let ids: Vec<String> = set.iter().map(u32::to_string).collect();
                format!("{{{}}}", ids.join(","))
            }
        }
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("unknown token {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("perturbation size must be finite, got {s:?}"));
    }
    if v < 0.0 {
        return Err(format!("perturbation size must be non-negative, got {v}"));
    }
    Ok(v)
}

fn parse_side(s: &str) -> Result<Bound, String> {
    match s {
        "inf" | "∞" | "Infinity" | "infinity" => Ok(Bound::Unbounded),
        other => parse_number(other).map(Bound::Finite),
    }
}

/// Which labels the attacker may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackedClasses([bool; 2]);

impl AttackedClasses {
    pub const BOTH: AttackedClasses = AttackedClasses([true, true]);
    pub const MALICIOUS: AttackedClasses = AttackedClasses([false, true]);
    pub const NONE: AttackedClasses = AttackedClasses([false, false]);

    pub fn from_labels(labels: &[u8]) -> Result<Self> {
        let mut set = [false; 2];
        for &l in labels {
            if l > 1 {
                return Err(Error::InvalidThreat(format!("attacked class {l} is not 0 or 1")));
            }
            set[l as usize] = true;
        }
        Ok(AttackedClasses(set))
    }

    pub fn contains(self, label: u8) -> bool {
        self.0.get(label as usize).copied().unwrap_or(false)
    }

    pub fn is_empty(self) -> bool {
        !self.0[0] && !self.0[1]
    }

    pub fn labels(self) -> Vec<u8> {
        (0..2u8).filter(|&l| self.contains(l)).collect()
    }
}

impl fmt::Display for AttackedClasses {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<String> = self.labels().iter().map(u8::to_string).collect();
        write!(f, "{{{}}}", labels.join(","))
    }
}

/// Closed interval of values the attacker can move a feature to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreatModel {
    perturbations: Vec<FeaturePerturbation>,
    attacked: AttackedClasses,
}

impl ThreatModel {
    pub fn new(perturbations: Vec<FeaturePerturbation>, attacked: AttackedClasses) -> Result<Self> {
        let model = ThreatModel {
            perturbations,
            attacked,
        };
        let trivial = model.perturbations.iter().all(FeaturePerturbation::is_trivial);
        if attacked.is_empty() && !trivial {
            return Err(Error::InvalidThreat(
                "perturbations are given but no class is attacked".into(),
            ));
        }
        Ok(model)
    }

    /// No perturbation on any of `n_features`.
    pub fn null(n_features: usize) -> Self {
        ThreatModel {
            perturbations: vec![FeaturePerturbation::None; n_features],
            attacked: AttackedClasses::BOTH,
        }
    }

    /// The same symmetric `epsilon` on every feature, both classes attacked.
    pub fn uniform(n_features: usize, epsilon: f64) -> Result<Self> {
        let p = FeaturePerturbation::from_bounds(Bound::Finite(epsilon), Bound::Finite(epsilon))
            .map_err(|message| Error::ThreatSpec { feature: 0, message })?;
        ThreatModel::new(vec![p; n_features], AttackedClasses::BOTH)
    }

    /// Parses one token per feature; both classes attacked.
    pub fn parse_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<Self> {
        Self::parse_tokens_with(tokens, AttackedClasses::BOTH)
    }

    pub fn parse_tokens_with<S: AsRef<str>>(tokens: &[S], attacked: AttackedClasses) -> Result<Self> {
        let perturbations = tokens
            .iter()
            .enumerate()
            .map(|(feature, t)| {
                FeaturePerturbation::parse(t.as_ref()).map_err(|message| Error::ThreatSpec { feature, message })
            })
            .collect::<Result<Vec<_>>>()?;
        ThreatModel::new(perturbations, attacked)
    }

    /// Parses an inline comma-separated list such as `0.1,(0.7,0.3),>,`.
    /// Commas inside parentheses or braces do not split tokens.
    pub fn parse_inline(list: &str, attacked: AttackedClasses) -> Result<Self> {
        Self::parse_tokens_with(&split_inline(list), attacked)
    }

    /// Parses the JSON threat file:
    /// `{"features": ["0.1", ">", ""], "attacked_classes": [0, 1]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ThreatDocument = serde_json::from_str(text)?;
        let attacked = AttackedClasses::from_labels(&doc.attacked_classes)?;
        Self::parse_tokens_with(&doc.features, attacked)
    }

    pub fn to_json(&self) -> String {
        let doc = ThreatDocument {
            features: self.tokens(),
            attacked_classes: self.attacked.labels(),
        };
        serde_json::to_string_pretty(&doc).expect("threat document serializes")
    }

    pub fn tokens(&self) -> Vec<String> {
        self.perturbations.iter().map(FeaturePerturbation::to_token).collect()
    }

    pub fn len(&self) -> usize {
        self.perturbations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perturbations.is_empty()
    }

    pub fn perturbations(&self) -> &[FeaturePerturbation] {
        &self.perturbations
    }

    pub fn perturbation(&self, feature: usize) -> Result<&FeaturePerturbation> {
        self.perturbations.get(feature).ok_or(Error::FeatureIndex {
            index: feature,
            count: self.perturbations.len(),
        })
    }

    pub fn attacked_classes(&self) -> AttackedClasses {
        self.attacked
    }

    /// True when no sample can move at all.
    pub fn is_null(&self) -> bool {
        self.attacked.is_empty() || self.perturbations.iter().all(FeaturePerturbation::is_trivial)
    }

    /// True when every interval of `self` contains the matching interval of `other`.
    pub fn covers(&self, other: &ThreatModel) -> bool {
        self.perturbations.len() == other.perturbations.len()
            && self.perturbations.iter().zip(&other.perturbations).all(|(a, b)| {
                let ((al, ar), (bl, br)) = (a.bounds(), b.bounds());
                al.covers(bl) && ar.covers(br)
            })
    }

    /// Values reachable from `value` on a numerical feature whose global range
    /// is `range`. Both ends are clamped to the range (widened to include
    /// `value` itself if it lies outside).
    pub fn perturbation_interval(&self, feature: usize, value: f64, range: (f64, f64)) -> Result<Interval> {
        let (left, right) = self.perturbation(feature)?.bounds();
        let floor = range.0.min(value);
        let ceil = range.1.max(value);
        let lo = left.below(value).map_or(floor, |v| v.max(floor));
        let hi = right.above(value).map_or(ceil, |v| v.min(ceil));
        Ok(Interval { lo, hi })
    }

    /// Checks arity and perturbation kinds against the dataset's feature kinds.
    pub fn validate_for(&self, categorical: &[bool]) -> Result<()> {
        if self.perturbations.len() != categorical.len() {
            return Err(Error::ThreatArity {
                expected: categorical.len(),
                got: self.perturbations.len(),
            });
        }
        for (feature, (p, &is_cat)) in self.perturbations.iter().zip(categorical).enumerate() {
            let ok = match p {
                FeaturePerturbation::None | FeaturePerturbation::Anything => true,
                FeaturePerturbation::FreeWithin(_) => is_cat,
                _ => !is_cat,
            };
            if !ok {
                let kind = if is_cat { "categorical" } else { "numerical" };
                return Err(Error::ThreatSpec {
                    feature,
                    message: format!("token {:?} does not apply to a {kind} feature", p.to_token()),
                });
            }
        }
        Ok(())
    }

    /// Stable hash of the canonical form. All null models share one digest.
    pub fn digest(&self) -> String {
        let canonical = if self.is_null() {
            "null".to_string()
        } else {
            format!("{}|{}", self.attacked, self.tokens().join(";"))
        };
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ThreatDocument {
    features: Vec<String>,
    #[serde(default = "both_classes")]
    attacked_classes: Vec<u8>,
}

fn both_classes() -> Vec<u8> {
    vec![0, 1]
}

fn split_inline(list: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for ch in list.chars() {
        match ch {
            '(' | '{' => depth += 1,
            ')' | '}' => depth -= 1,
            ',' if depth == 0 => {
                tokens.push(std::mem::take(&mut current));
                continue;
            }
            _ => {}
        }
        current.push(ch);
    }
    tokens.push(current);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bounds(m: &ThreatModel, f: usize) -> (Bound, Bound) {
        m.perturbation(f).unwrap().bounds()
    }

    #[test]
    fn direction_tokens() {
        let m = ThreatModel::parse_tokens(&[">", "<"]).unwrap();
        assert_eq!(bounds(&m, 0), (Bound::Finite(0.0), Bound::Unbounded));
        assert_eq!(bounds(&m, 1), (Bound::Unbounded, Bound::Finite(0.0)));
    }

    #[test]
    fn empty_tokens_are_null() {
        let m = ThreatModel::parse_tokens(&["", ""]).unwrap();
        assert!(m.is_null());
        assert_eq!(bounds(&m, 0), (Bound::Finite(0.0), Bound::Finite(0.0)));
        assert_eq!(m.digest(), ThreatModel::null(2).digest());
    }

    #[test]
    fn number_and_pair() {
        let m = ThreatModel::parse_tokens(&["0.1", "(0.7, 0.3)"]).unwrap();
        assert_eq!(bounds(&m, 0), (Bound::Finite(0.1), Bound::Finite(0.1)));
        assert_eq!(bounds(&m, 1), (Bound::Finite(0.7), Bound::Finite(0.3)));
    }

    #[test]
    fn errors_name_the_feature() {
        for bad in [["0.1", "abc"], ["0.1", "-0.2"], ["0.1", "(1,2,3)"]] {
            match ThreatModel::parse_tokens(&bad) {
                Err(Error::ThreatSpec { feature, .. }) => assert_eq!(feature, 1),
                other => panic!("expected spec error, got {other:?}"),
            }
        }
    }

    #[test]
    fn arity_mismatch() {
        let m = ThreatModel::parse_tokens(&["0.1"]).unwrap();
        assert!(matches!(
            m.validate_for(&[false, false]),
            Err(Error::ThreatArity { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn kind_mismatch() {
        let m = ThreatModel::parse_tokens(&["{0,1}", "0.1"]).unwrap();
        assert!(m.validate_for(&[true, false]).is_ok());
        assert!(matches!(
            m.validate_for(&[false, false]),
            Err(Error::ThreatSpec { feature: 0, .. })
        ));
        assert!(matches!(
            m.validate_for(&[true, true]),
            Err(Error::ThreatSpec { feature: 1, .. })
        ));
    }

    #[test]
    fn inline_list_respects_brackets() {
        let m = ThreatModel::parse_inline("0.1,(0.7,0.3),>,,{1,2}", AttackedClasses::MALICIOUS).unwrap();
        assert_eq!(m.len(), 5);
        assert_eq!(m.perturbations()[3], FeaturePerturbation::None);
        assert_eq!(
            m.perturbations()[4],
            FeaturePerturbation::FreeWithin(BTreeSet::from([1, 2]))
        );
        assert_eq!(m.attacked_classes(), AttackedClasses::MALICIOUS);
    }

    #[test]
    fn json_document() {
        let m = ThreatModel::from_json(r#"{"features": ["<>", "0.05"], "attacked_classes": [1]}"#).unwrap();
        assert_eq!(m.attacked_classes(), AttackedClasses::MALICIOUS);
        assert_eq!(ThreatModel::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn attacker_required_for_nontrivial_model() {
        let r = ThreatModel::parse_tokens_with(&["0.1"], AttackedClasses::NONE);
        assert!(matches!(r, Err(Error::InvalidThreat(_))));
        assert!(ThreatModel::parse_tokens_with(&[""], AttackedClasses::NONE).is_ok());
    }

    #[test]
    fn intervals() {
        let m = ThreatModel::parse_tokens(&["0.1", "", "(0.7,0.3)", "<>"]).unwrap();
        let iv = m.perturbation_interval(0, 0.45, (0.0, 1.0)).unwrap();
        assert!((iv.lo - 0.35).abs() < 1e-12 && (iv.hi - 0.55).abs() < 1e-12);
        assert_eq!(m.perturbation_interval(1, 0.45, (0.0, 1.0)).unwrap(), Interval { lo: 0.45, hi: 0.45 });
        let iv = m.perturbation_interval(2, 0.5, (0.0, 1.0)).unwrap();
        assert_eq!(iv.lo, 0.0);
        assert!((iv.hi - 0.8).abs() < 1e-12);
        assert_eq!(m.perturbation_interval(3, 0.2, (0.0, 1.0)).unwrap(), Interval { lo: 0.0, hi: 1.0 });
        assert!(matches!(
            m.perturbation_interval(9, 0.2, (0.0, 1.0)),
            Err(Error::FeatureIndex { index: 9, .. })
        ));
    }

    fn perturbation() -> impl Strategy<Value = FeaturePerturbation> {
        prop_oneof![
            Just(FeaturePerturbation::None),
            Just(FeaturePerturbation::IncreaseOnly),
            Just(FeaturePerturbation::DecreaseOnly),
            Just(FeaturePerturbation::Anything),
            (0.0..2.0f64).prop_map(|e| FeaturePerturbation::from_bounds(Bound::Finite(e), Bound::Finite(e)).unwrap()),
            (0.0..2.0f64, 0.0..2.0f64)
                .prop_map(|(l, r)| FeaturePerturbation::from_bounds(Bound::Finite(l), Bound::Finite(r)).unwrap()),
            proptest::collection::btree_set(0u32..6, 0..4).prop_map(FeaturePerturbation::FreeWithin),
        ]
    }

    proptest! {
        #[test]
        fn tokens_round_trip(ps in proptest::collection::vec(perturbation(), 1..6)) {
            let m = ThreatModel::new(ps, AttackedClasses::BOTH).unwrap();
            let reparsed = ThreatModel::parse_tokens(&m.tokens()).unwrap();
            prop_assert_eq!(&reparsed, &m);
            prop_assert_eq!(ThreatModel::parse_inline(&m.tokens().join(","), AttackedClasses::BOTH).unwrap(), m);
        }

        #[test]
        fn larger_epsilon_never_shrinks_interval(
            l in 0.0..1.0f64, r in 0.0..1.0f64, dl in 0.0..1.0f64, dr in 0.0..1.0f64, v in 0.0..1.0f64,
        ) {
            let small = ThreatModel::parse_tokens(&[format!("({l},{r})")]).unwrap();
            let big = ThreatModel::parse_tokens(&[format!("({},{})", l + dl, r + dr)]).unwrap();
            let a = small.perturbation_interval(0, v, (0.0, 1.0)).unwrap();
            let b = big.perturbation_interval(0, v, (0.0, 1.0)).unwrap();
            prop_assert!(b.lo <= a.lo && b.hi >= a.hi);
            prop_assert!(big.covers(&small));
        }

        #[test]
        fn null_model_gives_points(v in -5.0..5.0f64) {
            let m = ThreatModel::null(1);
            let iv = m.perturbation_interval(0, v, (0.0, 1.0)).unwrap();
            prop_assert_eq!(iv, Interval { lo: v, hi: v });
        }
    }
}
