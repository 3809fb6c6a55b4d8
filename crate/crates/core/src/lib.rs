//! Filters on finite topological spaces, pair filters, and their metric
//! analogues: cones, snowflakes and flows.

pub mod filter;
pub mod flows;
pub mod graded;
pub mod io;
pub mod metric;
pub mod pair;
pub mod report;
pub mod sampling;
pub mod snowflake;
pub mod suite;
pub mod topology;

pub use filter::{FilterError, IndicatorFilter, Refinement};
pub use pair::{PairError, PairFilter, PairSpace};
pub use topology::{FiniteTopology, Mask, PointMap, PointSet, TopologyError};
