//! Fixed-confidence best arm identification with few batches.
//!
//! - [`family`]: Bernoulli and unit-variance Gaussian rewards with closed-form KL.
//! - [`oracle`]: optimal allocation `w*` and characteristic time `T*`, plus a grid verifier.
//! - [`stopping`]: arm statistics, the Chernoff statistic and stopping thresholds.
//! - [`algorithms`]: Tri-BBAI, Opt-BBAI and the Track-and-Stop baseline.
//! - [`harness`]: batched environment, instance generators, seeded experiments and CSV output.

pub mod algorithms;
pub mod error;
pub mod family;
pub mod harness;
pub mod oracle;
pub mod stopping;

pub use error::{BaiError, Result};
pub use family::{BanditInstance, RewardFamily};
