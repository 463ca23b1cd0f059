//! Clustering timestamped observations into Markov renewal process (MRP)
//! tracks plus Poisson clutter.
//!
//! The clustering with maximum likelihood ratio against the all-clutter
//! hypothesis is found by building a directed acyclic flow network (one
//! unit-capacity vertex per observation, transition arcs forward in time,
//! birth arcs from a source and death arcs into a sink) and solving for the
//! minimum-cost flow. Every unit `(s,t)`-path of the flow is one track;
//! observations that carry no flow are clutter.
//!
//! The pipeline is:
//!
//! 1. [`events`]: load or build an [`EventSet`].
//! 2. [`model`]: describe birth, death, transition and clutter likelihoods
//!    through the [`MmrpModel`] trait ([`GmmMrpModel`] is the stock model).
//! 3. [`network`]: [`build_network`] turns events and model into a
//!    [`FlowNetwork`].
//! 4. [`solver`]: [`solve_optimal`] (successive shortest paths on the
//!    residual network) or [`solve_greedy`].
//! 5. [`eval`]: score a [`Clustering`] with [`f_sn`] and [`f_trans`].
//!
//! [`synth`] generates the alternating-tone test data and [`eval::run_experiment`]
//! drives the batch protocol over a grid of settings.

pub mod cli;
pub mod error;
pub mod eval;
pub mod events;
pub mod model;
pub mod network;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};

pub use events::{Clustering, EventSet, Observation, ObservationId};
pub use model::{
    clustering_log_ratio, cluster_log_ratio, compare_models, costs, Costs, Gmm, GmmMrpModel,
    MmrpModel, ModelConfig,
};
pub use network::{build_network, FlowNetwork};
pub use solver::{solve_bruteforce, solve_greedy, solve_optimal, SolverKind};

pub use eval::{f_sn, f_trans, run_experiment, ExperimentGrid, ExperimentReport, Metrics};
pub use synth::{GeneratorConfig, GeneratorKind, ModelKind, SynthData};
