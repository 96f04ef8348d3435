//! Two-stage efficiency analytics.
//!
//! Stage one estimates output-oriented radial efficiency of decision-making
//! units (DMUs) against per-group DEA frontiers, bias-corrects the scores with
//! a smoothed homogeneous bootstrap, screens outliers with order-α partial
//! frontiers and compares groups with stochastic-dominance tests.
//!
//! Stage two binarizes the scores and explains them with a gradient-boosted
//! tree classifier and exact path-dependent TreeSHAP attributions.

pub mod boost;
pub mod dea;
pub mod error;
pub mod linprog;
pub mod orderalpha;
pub mod rng;
pub mod sdtest;
pub mod stats;
pub mod tabular;
pub mod treeshap;

pub use error::{Error, Result};
