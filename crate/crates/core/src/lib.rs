//! Adaptive single-qubit measurement strategies for estimating mixed qubit
//! states.
//!
//! The belief about an unknown qubit state is a probability density over the
//! Bloch ball, held on a midpoint grid ([`posterior`]). Each projective
//! measurement updates it by Bayes' rule; the next measurement axis is picked
//! by one of the rules in [`strategies`], the most informative of which
//! maximizes the expected Kullback information gain. [`experiment`] simulates
//! whole estimation runs against randomly drawn true states and averages the
//! resulting fidelities.

pub mod baseline;
pub mod bloch;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod posterior;
pub mod report;
pub mod rng;
pub mod strategies;

pub use baseline::{BaselineEntry, BaselineTable, BaselineValue};
pub use bloch::{
    antipode, density_matrix, fidelity, fidelity_matrix_oracle, outcome_probability, rotate,
    sample_outcome, BlochPoint, DensityMatrix, Direction, Outcome, Rotate,
};
pub use error::{Error, Result};
pub use experiment::{
    gamma_ratio, monte_carlo, ratio_to_baseline, run_single, sample_true_state, Aggregate,
    BaselineRatio, Experiment, MeasurementPath, RunConfig, RunResult, StepRatio,
};
pub use posterior::{init_prior, Estimate, GridGeometry, PosteriorGrid, ReadoutMode, Resolution};
pub use rng::PathRng;
pub use strategies::{
    kullback_gain, kullback_gain_from_entropies, next_direction, next_direction_kullback,
    next_direction_random, next_direction_three_axes, AxisPolicy, CandidateGrid, CandidateSet,
    DirectionSelector, GainTable, GainValue, StrategyKind, StrategySpec, AXES,
};
