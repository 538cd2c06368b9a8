//! Continuous fairness repair of one-dimensional decision scores.
//!
//! Raw scores are split by protected-trait group, each group's score
//! distribution is transported toward the weighted Wasserstein-2 barycenter
//! of all groups, and a per-group parameter `theta` in `[0, 1]` chooses how
//! far along that geodesic each group moves. `theta = 0` keeps the raw
//! scores; `theta = 1` makes every group's fair score distribution equal.
//!
//! The crate is organised bottom-up:
//!
//! * [`distributions`]: score records, group partitions and weighted
//!   empirical distributions with CDF / quantile access.
//! * [`transport`]: exact 1-D optimal transport (monotone coupling),
//!   transport costs, Wasserstein-2 distance and pushforwards.
//! * [`barycenter`]: quantile-averaging barycenter and displacement
//!   interpolation.
//! * [`repair`]: the per-group `theta` repair of a scored population.
//! * [`metrics`]: individual fairness error, decision-maker utility,
//!   parity gap, P@k, NDCG and disparity / crossing ranks.
//! * [`data`]: seeded synthetic populations and CSV ingestion / output.
//! * [`cli`]: the `generate`, `repair`, `evaluate` and `sweep` commands used
//!   by the `cfa` binary.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod barycenter;
pub mod cli;
pub mod data;
pub mod distributions;
mod error;
pub mod metrics;
pub mod repair;
pub mod transport;

pub use barycenter::{barycenter, displacement_interpolate, BarycenterResult, QuantileGrid};
pub use distributions::{
    empirical_distribution, partition_population, EmpiricalDistribution, GroupKey,
    GroupPartition, ScoreRecord,
};
pub use error::{Error, Result};
pub use metrics::{FairnessReport, Ranking};
pub use repair::{apply_map_to_individual, repair, RepairOptions, RepairResult, ThetaPolicy};
pub use transport::{
    map_from_plan, optimal_plan_1d, pushforward, transport_cost, wasserstein2, MonotoneMap,
    TransportPlan,
};
