//! Joint scaling, placement and routing of multi-component network
//! services on a capacitated substrate network.
//!
//! A service is described by a [`model::Template`]: a DAG of components
//! whose CPU, memory and output rates are functions of their input rates.
//! Given the substrate, the services and their traffic sources, the crate
//! produces a [`model::SystemConfiguration`] (instances, placements and
//! splittable routings) with one of three engines:
//!
//! * [`heuristic`]: fast constructive embedding by local changes,
//! * [`milp`]: export of the exact mixed-integer program in LP format and
//!   import of an external solver's solution,
//! * [`oracle`]: exhaustive search for tiny instances, used as ground truth.
//!
//! [`reduction`] builds embedding instances from set-cover inputs and
//! [`scenario`] replays event sequences against the heuristic.

pub mod catalog;
pub mod cli;
pub mod error;
pub mod heuristic;
pub mod io;
pub mod milp;
pub mod model;
pub mod oracle;
pub mod reduction;
pub mod scenario;

pub use error::{Error, Result};
