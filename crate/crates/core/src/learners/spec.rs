use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::LearnerError;
use crate::seed;

/// The base-learner families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LearnerKind {
    Logistic,
    QuadAdditive,
    Cart,
    RandomForest,
    Knn,
    BoostedStumps,
    LinearSvm,
    BaggedTrees,
    /// Returns one raw feature as the score; ignores training data.
    /// Used to build libraries whose cross-validated and full-data scores coincide.
    Echo,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 9] = [
        LearnerKind::Logistic,
        LearnerKind::QuadAdditive,
        LearnerKind::Cart,
        LearnerKind::RandomForest,
        LearnerKind::Knn,
        LearnerKind::BoostedStumps,
        LearnerKind::LinearSvm,
        LearnerKind::BaggedTrees,
        LearnerKind::Echo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Logistic => "logistic",
            LearnerKind::QuadAdditive => "quad_additive",
            LearnerKind::Cart => "cart",
            LearnerKind::RandomForest => "random_forest",
            LearnerKind::Knn => "knn",
            LearnerKind::BoostedStumps => "boosted_stumps",
            LearnerKind::LinearSvm => "linear_svm",
            LearnerKind::BaggedTrees => "bagged_trees",
            LearnerKind::Echo => "echo",
        }
    }

    /// Defaults table. Every tunable of a kind appears here; overrides for
    /// unknown keys are rejected.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            LearnerKind::Logistic | LearnerKind::QuadAdditive => {
                &[("ridge", 1e-8), ("max_iter", 100.0), ("tol", 1e-8)]
            }
            LearnerKind::Cart => &[("max_depth", 10.0), ("min_leaf", 5.0)],
            // mtry = 0 means floor(sqrt(p)); max_depth = 0 means unlimited
            LearnerKind::RandomForest => &[
                ("trees", 500.0),
                ("mtry", 0.0),
                ("min_leaf", 1.0),
                ("max_depth", 0.0),
            ],
            LearnerKind::Knn => &[("k", 10.0)],
            LearnerKind::BoostedStumps => &[("rounds", 200.0), ("shrinkage", 0.1), ("min_leaf", 10.0)],
            LearnerKind::LinearSvm => &[("c", 1.0), ("iterations", 1000.0)],
            LearnerKind::BaggedTrees => &[("trees", 100.0), ("max_depth", 10.0), ("min_leaf", 5.0)],
            LearnerKind::Echo => &[("feature", 0.0)],
        }
    }

    /// Whether `predict` returns a probability estimate (as opposed to a
    /// mapped margin or a raw feature).
    pub fn is_probability(self) -> bool {
        !matches!(self, LearnerKind::LinearSvm | LearnerKind::Echo)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LearnerKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| LearnerError::UnknownKind(s.to_owned()))
    }
}

/// A learner family with hyperparameters and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind, seed: u64) -> Self {
        let params = kind.defaults().iter().map(|&(k, v)| (k.to_owned(), v)).collect();
        Self { kind, params, seed }
    }

    /// Override one hyperparameter.
    pub fn with(mut self, key: &str, value: f64) -> Result<Self, LearnerError> {
        self.set(key, value)?;
        Ok(self)
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), LearnerError> {
        match self.params.get_mut(key) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(LearnerError::UnknownParameter {
                kind: self.kind,
                key: key.to_owned(),
            }),
        }
    }

    pub fn param(&self, key: &str) -> f64 {
        self.params[key]
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub(crate) fn count(&self, key: &str) -> usize {
        self.param(key).max(0.0).round() as usize
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |key: &str, why: &str| LearnerError::InvalidParameter {
            kind: self.kind,
            key: key.to_owned(),
            reason: why.to_owned(),
        };
        for (k, &v) in &self.params {
            if !v.is_finite() {
                return Err(bad(k, "must be finite"));
            }
        }
        match self.kind {
            LearnerKind::Logistic | LearnerKind::QuadAdditive => {
                if self.param("ridge") < 0.0 {
                    return Err(bad("ridge", "must be >= 0"));
                }
                if self.param("max_iter") < 1.0 {
                    return Err(bad("max_iter", "must be >= 1"));
                }
                if self.param("tol") <= 0.0 {
                    return Err(bad("tol", "must be > 0"));
                }
            }
            LearnerKind::Cart => {
                if self.param("max_depth") < 1.0 {
                    return Err(bad("max_depth", "must be >= 1"));
                }
                if self.param("min_leaf") < 1.0 {
                    return Err(bad("min_leaf", "must be >= 1"));
                }
            }
            LearnerKind::RandomForest => {
                if self.param("trees") < 1.0 {
                    return Err(bad("trees", "must be >= 1"));
                }
                if self.param("min_leaf") < 1.0 {
                    return Err(bad("min_leaf", "must be >= 1"));
                }
                if self.param("mtry") < 0.0 || self.param("max_depth") < 0.0 {
                    return Err(bad("mtry", "mtry and max_depth must be >= 0"));
                }
            }
            LearnerKind::Knn => {
                if self.param("k") < 1.0 {
                    return Err(bad("k", "must be >= 1"));
                }
            }
            LearnerKind::BoostedStumps => {
                if self.param("rounds") < 1.0 {
                    return Err(bad("rounds", "must be >= 1"));
                }
                let s = self.param("shrinkage");
                if !(s > 0.0 && s <= 1.0) {
                    return Err(bad("shrinkage", "must lie in (0, 1]"));
                }
                if self.param("min_leaf") < 1.0 {
                    return Err(bad("min_leaf", "must be >= 1"));
                }
            }
            LearnerKind::LinearSvm => {
                if self.param("c") <= 0.0 {
                    return Err(bad("c", "must be > 0"));
                }
                if self.param("iterations") < 1.0 {
                    return Err(bad("iterations", "must be >= 1"));
                }
            }
            LearnerKind::BaggedTrees => {
                if self.param("trees") < 1.0 {
                    return Err(bad("trees", "must be >= 1"));
                }
                if self.param("max_depth") < 1.0 {
                    return Err(bad("max_depth", "must be >= 1"));
                }
                if self.param("min_leaf") < 1.0 {
                    return Err(bad("min_leaf", "must be >= 1"));
                }
            }
            LearnerKind::Echo => {
                if self.param("feature") < 0.0 {
                    return Err(bad("feature", "must be >= 0"));
                }
            }
        }
        Ok(())
    }
}

/// `kind[key=value;...]@seed`, e.g. `knn[k=10]@42`. Round-trips through
/// [`FromStr`].
impl fmt::Display for LearnerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[", self.kind)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, "]@{}", self.seed)
    }
}

impl FromStr for LearnerSpec {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_err = || LearnerError::Parse(s.to_owned());
        let (head, seed) = s.rsplit_once('@').ok_or_else(parse_err)?;
        let seed: u64 = seed.trim().parse().map_err(|_| parse_err())?;
        let (kind, rest) = head.split_once('[').ok_or_else(parse_err)?;
        let body = rest.strip_suffix(']').ok_or_else(parse_err)?;
        let mut spec = LearnerSpec::new(kind.trim().parse()?, seed);
        for pair in body.split(';').filter(|p| !p.trim().is_empty()) {
            let (k, v) = pair.split_once('=').ok_or_else(parse_err)?;
            let v: f64 = v.trim().parse().map_err(|_| parse_err())?;
            spec.set(k.trim(), v)?;
        }
        Ok(spec)
    }
}

/// Kinds of the four-learner library, in column order.
pub const FOUR_LEARNERS: [LearnerKind; 4] = [
    LearnerKind::RandomForest,
    LearnerKind::Logistic,
    LearnerKind::QuadAdditive,
    LearnerKind::Cart,
];

/// Kinds of the eight-learner library, in column order.
pub const EIGHT_LEARNERS: [LearnerKind; 8] = [
    LearnerKind::RandomForest,
    LearnerKind::Logistic,
    LearnerKind::QuadAdditive,
    LearnerKind::Cart,
    LearnerKind::Knn,
    LearnerKind::BoostedStumps,
    LearnerKind::LinearSvm,
    LearnerKind::BaggedTrees,
];

/// Library with defaults; learner `k` is seeded from `(master_seed, k)`.
pub fn library(kinds: &[LearnerKind], master_seed: u64) -> Vec<LearnerSpec> {
    kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| LearnerSpec::new(kind, seed::derive_index(master_seed, k as u64)))
        .collect()
}
