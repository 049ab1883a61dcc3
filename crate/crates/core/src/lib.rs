//! Hyperband with iterative deepening.
//!
//! A finished Hyperband run can be continued at a larger maximum budget
//! instead of being thrown away. The continuation reuses every evaluation of
//! the previous run through an exact-key cache and charges only new pulls to
//! the [`eval::PullLedger`].
//!
//! Module map:
//!
//! * [`arm`] and [`eval`]: configurations, loss oracles, the cache, the ledger.
//! * [`sh`]: Successive Halving and the efficient, preserving and discarding
//!   deepening variants.
//! * [`hyperband`]: brackets, fresh runs, deepening and the incumbent.
//! * [`state`]: the on-disk run-state document.
//! * [`theory`]: budget and pull-ratio bounds used as referees.
//! * [`bench`]: synthetic and tabular loss oracles.
//! * [`compare`] and [`referee`]: the multi-seed comparison harness and the
//!   bound checks run against measured behavior.

pub mod arm;
pub mod bench;
pub mod compare;
pub mod eval;
pub mod hyperband;
pub mod referee;
pub mod sampler;
pub mod sh;
pub mod state;
pub mod theory;
