//! Identification disclosure risk and propensity-score utility for
//! partially synthetic microdata.
//!
//! * [`data`] typed tables and CSV I/O
//! * [`risk`] record- and file-level identification risk with radius
//!   matching for continuous variables
//! * [`utility`] propensity-score utility from a logistic classifier
//! * [`cart`] sequential CART synthesizer
//! * [`experiments`] radius sweep, scenario and replicate-count studies

pub mod cart;
pub mod data;
pub mod error;
pub mod experiments;
pub mod risk;
pub mod stats;
pub mod utility;

pub use cart::{fit_tree, synthesize, CartTree, SynthesisPlan, Synthesizer};
pub use data::{load_csv, write_csv, Cell, Column, Dataset, Schema, VariableKind, VariableSpec};
pub use error::{Error, Result};
pub use risk::{evaluate, evaluate_fast, make_range, record_risk, Range, RecordRisk, RiskConfig, RiskResult};
pub use stats::{Box2D, BoxSummary};
pub use utility::{design_matrix, fit_logistic, propensity_utility, LogisticOptions, PropensityFit, UtilityResult};
