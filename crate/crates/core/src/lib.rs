//! Bayesian social learning on directed acyclic information-flow graphs.
//!
//! The crate covers four layers:
//!
//! * [`graph`]: event-indexed DAGs, transitive closure, fusion weights and
//!   the achievability test for exact incest removal.
//! * [`learning`] and [`incest`]: the classical social-learning step and the
//!   reputation protocol with naive or fair-rating fusion.
//! * [`polling`]: belief-based expectation polls, exact correction with extra
//!   voters, and the posterior computed from incest-contaminated beliefs.
//! * [`revealed`]: GARP, Afriat inequalities, the piecewise-linear utility and
//!   the AR public-belief model.
//!
//! [`harness`] wires these into seeded Monte Carlo experiments and the CLI.
//!
//! Conventions: graph nodes are 1-based (node `1` is the first event). States,
//! observations and actions are 0-based in the Rust API and 1-based in every
//! external file format.

pub mod belief;
pub mod error;
pub mod exact;
pub mod graph;
pub mod harness;
pub mod incest;
pub mod io;
pub mod learning;
pub mod polling;
pub mod revealed;

pub use belief::{Belief, LogBelief};
pub use error::{Error, Result};
pub use graph::{node_coords, node_index, InfoFlowGraph, NodeCoordinates, WeightVector};
pub use incest::{FusionMode, ProtocolTrace};
pub use learning::{CostMatrix, LearningModel, ObservationMatrix};
pub use polling::PollRun;
pub use revealed::{AfriatCertificate, BeliefSeries, ChoiceDataset, PiecewiseUtility};
