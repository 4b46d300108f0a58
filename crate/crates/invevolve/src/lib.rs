//! Lost-sales inventory policy evolution with certified deployment.
//!
//! The crate provides, end to end:
//!
//! - a deterministic lost-sales inventory simulator with lead time
//!   ([`sim`]);
//! - a closed white-box policy DSL with canonicalization and structural
//!   validity checking ([`policy`]);
//! - budget-limited hyperparameter tuning ([`tuner`]);
//! - replay gain statistics, Hoeffding and blockwise-t confidence radii,
//!   and replay-to-deployment discrepancy budgets ([`replay`], [`xi`]);
//! - the gated proposal-search loop that promotes only candidates whose
//!   confidence lower bounds clear safety and improvement thresholds and
//!   deploys the best certified policy ([`engine`]);
//! - pluggable proposal sources: seeded mutation, scripted fixtures, or an
//!   external HTTP endpoint ([`proposer`]);
//! - synthetic nonstationary demand generation, workspace slicing and
//!   serialization ([`datagen`], [`workspace`]);
//! - Monte Carlo verification suites for the training-concentration,
//!   promotion and rolling-deployment guarantees ([`theory`]);
//! - the 96-scenario capped-base-stock benchmark with table emission
//!   ([`benchmark`]).

pub mod benchmark;
pub mod datagen;
pub mod engine;
pub mod holdout;
pub mod error;
pub mod policy;
pub mod proposer;
pub mod replay;
pub mod sim;
pub mod theory;
pub mod tuner;
pub mod workspace;
pub mod xi;

pub use error::{Error, Result};
