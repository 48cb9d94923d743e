//! Splitting seminorms, path lengths and distances to the Hamiltonian group
//! on flat symplectic tori.

pub mod diffeo;
pub mod distance;
pub mod error;
pub mod forms;
pub mod hamiltonian;
pub mod lattice;
pub mod model;
pub mod optimize;
pub mod paths;
pub mod probes;
pub mod report;
pub mod scenario;
pub mod spectral;
pub mod splitting;

pub use diffeo::DiffeoMap;
pub use distance::{AnsatzConfig, DistanceEstimate, HarmonicNorm, PathAnsatz};
pub use error::{Error, Result};
pub use forms::{Closedness, HodgeSplit, OneFormField};
pub use hamiltonian::Hamiltonian;
pub use model::TorusModel;
pub use report::{run_scenario, Report};
pub use scenario::{parse_scenario, Scenario, SchemaError};
pub use paths::{FluxVector, IsotopyPath, Schedule};
pub use splitting::{BaseNorm, MuKind, NormCriterion, SeminormSpec, SplittingOperator};
pub use lattice::{FluxLattice, HamiltonianTag, ProductModel};
