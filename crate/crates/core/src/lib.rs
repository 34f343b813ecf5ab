//! SINR graphs over Poisson and Cox point processes with random powers.
//!
//! The crate is organized bottom-up:
//!
//! * [`pointproc`] samples directing measures and marked configurations;
//! * [`pathloss`] and [`sinr`] evaluate interference and build SINR, thinned
//!   SINR and Gilbert graphs;
//! * [`graph`] labels clusters and computes percolation proxies;
//! * [`renorm`] evaluates good, tame and nice renormalization sites;
//! * [`estimators`] runs Monte Carlo sweeps for critical parameters.

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod graph;
pub mod pathloss;
pub mod pointproc;
pub mod renorm;
pub mod rng;
pub mod sinr;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Cube, Window};
pub use graph::GraphResult;
pub use pathloss::{PathLoss, PathLossKind};
pub use pointproc::{DirectingMeasureSpec, MarkedConfiguration, MeasureKind, PowerDistribution};
pub use sinr::SinrParams;
