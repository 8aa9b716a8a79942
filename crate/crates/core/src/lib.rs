// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Simulation and analysis of a qubit under simultaneous continuous
//! measurement of two non-commuting observables σ_z and σ_φ.
//!
//! * [`trajectory`] integrates the stochastic Bloch equations and emits
//!   detector records.
//! * [`analytic`] gives the ensemble-averaged evolution and closed-form
//!   output correlators.
//! * [`estimator`] reconstructs correlators, responses and offsets from
//!   trace ensembles.
//! * [`fit`] recovers the residual Rabi frequency and decay rates.
//! * [`cavity`] checks that the resonator output noise stays white.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cavity;
pub mod curve;
pub mod document;
pub mod error;
pub mod estimator;
pub mod fit;
pub mod io;
pub mod mat2;
pub mod model;
pub mod noise;
pub mod source;
pub mod trajectory;

pub use analytic::{
    antisym_cross_correlator, build_generator, correlator_closed_form, correlator_collapse_recipe,
    decay_rates, propagate_average, zeno_jump_rate, DecayRates, EvolutionGenerator,
};
pub use curve::{CorrelatorCurve, CurveKind};
pub use document::SetupDocument;
pub use error::{Error, Result};
pub use estimator::{Calibration, EstimatorOptions, EstimatorWindow};
pub use fit::{FitResult, LagRange};
pub use model::{
    BlochVector, Channel, MeasurementChannel, MeasurementSetup, QubitEnvironment, Scheme,
    SimulationConfig,
};
pub use noise::NoiseDraw;
pub use source::TraceSource;
pub use trajectory::{simulate_ensemble, simulate_trace, SimulatedTraces, TraceRecord};
