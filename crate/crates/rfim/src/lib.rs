//! Random field Ising model toolkit: exact finite-temperature and ground-state
//! solvers on finite subsets of Z^d, resampling/interpolation statistics for
//! normal approximation, distance estimators against the standard normal, and
//! an experiment layer that runs desk-scale central-limit-theorem campaigns.

pub mod error;
pub mod explab;
pub mod field;
pub mod gibbs;
pub mod groundstate;
pub mod lattice;
pub mod metrics;
pub mod numeric;
pub mod rng;
pub mod stein;

pub use error::{Error, Result};
pub use explab::{ExperimentConfig, ExperimentRecord, ExportFormat, RegionAggregate};
pub use field::{FieldModel, FieldRealization};
pub use gibbs::{BoundaryCondition, GibbsSolution, Temperature};
pub use groundstate::GroundState;
pub use lattice::{BoundarySet, LatticeRegion, Site};
pub use metrics::DistanceReport;
pub use numeric::Estimate;
pub use stein::{MomentProfile, NeighborhoodSystem, SEstimate, SteinReport, SubsetLaw};
