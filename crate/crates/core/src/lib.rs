//! Bayesian change-point detection on probability simplices: the single
//! change-point recursion, the exact multi-node filter on a network, and a
//! mean-field approximation computed by message passing.

pub mod approx;
pub mod classic;
pub mod config;
pub mod emit;
pub mod error;
pub mod exact;
pub mod graph;
pub mod harness;
pub mod irf;
pub mod linalg;
pub mod simplex;

pub use classic::{ClassicModel, GaussianSpec};
pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use graph::{ChangeVector, EdgeConvention, EdgeSpec, Network, NodeSpec, ObservationFrame};
pub use irf::IrfOperator;
pub use linalg::DenseMatrix;
pub use simplex::{bayes_update, BernoulliPair, ProbVec, WeightVec};
