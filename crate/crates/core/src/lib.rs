//! Gaussian graphical models whose edge structure is regressed on external
//! network data.
//!
//! Two estimators share the data model in [`model`]:
//!
//! * the network graphical lasso ([`golazo`]), a convex penalized likelihood
//!   whose per-edge penalties are log-linear in the networks, with penalty
//!   hyperparameters chosen by BIC/EBIC in [`selection`];
//! * the network spike-and-slab ([`spike_slab`]), a Bayesian model whose slab
//!   probability, location and scale are regressed on the networks. It is
//!   sampled with Hamiltonian Monte Carlo ([`hmc`]) and summarized by
//!   empirical Bayes and FDR-controlled edge selection ([`inference`]).
//!
//! [`npn`] Gaussianizes non-normal margins and [`sim`] reproduces the
//! simulation benchmark.

pub mod diagnostics;
pub mod elicit;
pub mod error;
pub mod golazo;
pub mod gp;
pub mod hmc;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod npn;
pub mod selection;
pub mod sim;
pub mod spike_slab;

pub use error::{Error, Result};
pub use golazo::{solve, GlassoSolution, PenaltyModel, SolverOptions};
pub use model::{
    assemble_precision, gaussian_loglik, partial_corr_of, residualize, sample_cov, CovariateMatrix,
    DataMatrix, NetworkStack, PrecisionParam, SampleCov,
};
pub use selection::{Criterion, GridSpec, SelectionResult};
pub use spike_slab::{Eta, EtaPrior, LatentState, SpikeSlabHyper, SpikeSlabModel};
