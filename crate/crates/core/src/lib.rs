//! Single decision trees that stay accurate under adversarial perturbation.
//!
//! Trees are grown greedily like CART, but every candidate split is scored
//! with the worst-case Gini impurity an attacker can force by moving samples
//! that lie close to the threshold. The worst case is found in constant time
//! per candidate from a closed-form maximizer. Fitted trees can be evaluated
//! against an exact attacker that enumerates leaf regions.
//!
//! ```
//! use robust_tree::data::Dataset;
//! use robust_tree::threat_model::ThreatModel;
//! use robust_tree::tree::{fit, FitParams};
//! use robust_tree::adversary::adversarial_accuracy;
//!
//! let data = Dataset::from_rows(
//!     vec![vec![0.0], vec![0.1], vec![0.9], vec![1.0]],
//!     vec![0, 0, 1, 1],
//! ).unwrap();
//! let threat = ThreatModel::parse_tokens(&["0.1"]).unwrap();
//! let tree = fit(&data, &threat, &FitParams::default()).unwrap();
//! let report = adversarial_accuracy(&tree, &data, &threat).unwrap();
//! assert_eq!(report.adversarial_accuracy, 1.0);
//! ```

pub mod adversary;
pub mod cli;
pub mod data;
mod error;
pub mod impurity;
pub mod splitter;
pub mod threat_model;
pub mod tree;

pub use error::{Error, Result};
