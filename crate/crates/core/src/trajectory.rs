// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Stochastic evolution of the effective qubit under simultaneous weak
//! measurement of σz and σφ, and generation of the detector records.
//!
//! Each detector measures σ_θ = σz cos θ + σx sin θ. In the basis rotated by
//! θ about y the measurement looks like a plain σz measurement, so every
//! per-channel term is evaluated in rotated coordinates
//! `(x_θ, z_θ) = (x cos θ − z sin θ, z cos θ + x sin θ)` and rotated back.
//! With θz = 0 and θφ = φ this reduces to the familiar component form; other
//! angle pairs describe the same physics in a rotated frame.

use std::borrow::Cow;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{validate_setup, BlochVector, MeasurementSetup, Scheme, SimulationConfig};
use crate::noise::{NoiseDraw, NoiseStream};
use crate::source::TraceSource;

/// One realization of the two detector outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// Sampling step (µs).
    pub dt: f64,
    /// `(I_z, I_φ)` averaged over each sampling interval.
    pub samples: Vec<[f64; 2]>,
    /// Noise stream id the trace was generated from.
    pub seed: u64,
    /// How many steps ended outside the Bloch ball and were projected back.
    pub projections: u64,
    /// Bloch vector at t = k·dt for k = 0..=n_samples, when requested.
    pub states: Option<Vec<BlochVector>>,
}

impl TraceRecord {
    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn channel(&self, index: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.samples.iter().map(move |s| s[index])
    }
}

#[derive(Debug, Clone, Copy)]
struct ChannelTerms {
    cos: f64,
    sin: f64,
    gamma: f64,
    excess_dephasing: f64,
    inv_tau: f64,
    inv_sqrt_tau: f64,
    noise_scale: f64,
}

impl ChannelTerms {
    fn rotated(&self, r: BlochVector) -> (f64, f64) {
        (
            r.x * self.cos - r.z * self.sin,
            r.z * self.cos + r.x * self.sin,
        )
    }

    /// Maps a vector given in rotated coordinates back to the lab frame.
    fn unrotate(&self, vx: f64, vy: f64, vz: f64) -> BlochVector {
        BlochVector::new(
            vx * self.cos + vz * self.sin,
            vy,
            vz * self.cos - vx * self.sin,
        )
    }

    /// Backaction direction (−x_θ z_θ, −y z_θ, 1 − z_θ²) without the τ factor.
    fn kick_shape(&self, r: BlochVector) -> (BlochVector, f64) {
        let (xr, zr) = self.rotated(r);
        (self.unrotate(-xr * zr, -r.y * zr, 1.0 - zr * zr), zr)
    }

    /// Dephasing of the components transverse to the measured axis.
    fn dephasing(&self, r: BlochVector, rate: f64) -> BlochVector {
        let (xr, _) = self.rotated(r);
        self.unrotate(-rate * xr, -rate * r.y, 0.0)
    }
}

/// Precomputed coefficients of the qubit equations of motion for one setup.
#[derive(Debug, Clone, Copy)]
pub struct Dynamics {
    channels: [ChannelTerms; 2],
    rabi: f64,
    gamma_xz: f64,
    gamma_y: f64,
}

impl Dynamics {
    pub fn new(setup: &MeasurementSetup, dt: f64) -> Self {
        let terms = |ch: &crate::model::MeasurementChannel| {
            let (sin, cos) = ch.angle.sin_cos();
            ChannelTerms {
                cos,
                sin,
                gamma: ch.gamma,
                excess_dephasing: ch.excess_dephasing(),
                inv_tau: ch.tau_m.recip(),
                inv_sqrt_tau: ch.tau_m.sqrt().recip(),
                noise_scale: (ch.tau_m / dt).sqrt(),
            }
        };
        let env = &setup.environment;
        Self {
            channels: [terms(&setup.channel_z), terms(&setup.channel_phi)],
            rabi: env.rabi_mismatch,
            gamma_xz: env.decoherence_rate(),
            gamma_y: env.y_damping_rate(),
        }
    }

    fn environment(&self, r: BlochVector) -> BlochVector {
        BlochVector::new(
            self.rabi * r.z - self.gamma_xz * r.x,
            -self.gamma_y * r.y,
            -self.rabi * r.x - self.gamma_xz * r.z,
        )
    }

    /// Deterministic part of the Itô equations, which is also the
    /// ensemble-averaged evolution.
    pub fn ito_drift(&self, r: BlochVector) -> BlochVector {
        self.channels.iter().fold(self.environment(r), |acc, ch| {
            acc + ch.dephasing(r, ch.gamma)
        })
    }

    /// Coefficients multiplying ξz and ξφ.
    pub fn diffusion(&self, r: BlochVector) -> [BlochVector; 2] {
        self.channels.map(|ch| ch.kick_shape(r).0 * ch.inv_sqrt_tau)
    }

    /// Drift of the Stratonovich form: the informational kick driven by the
    /// noiseless signal Tr[σ_i ρ] plus the excess dephasing γ_i = Γ_i − 1/(2τ_i).
    pub fn stratonovich_drift(&self, r: BlochVector) -> BlochVector {
        self.channels.iter().fold(self.environment(r), |acc, ch| {
            let (shape, mean_signal) = ch.kick_shape(r);
            acc + shape * (ch.inv_tau * mean_signal) + ch.dephasing(r, ch.excess_dephasing)
        })
    }

    /// Noiseless signals Tr[σ_z ρ], Tr[σ_φ ρ].
    pub fn mean_signals(&self, r: BlochVector) -> [f64; 2] {
        self.channels.map(|ch| ch.rotated(r).1)
    }

    /// Sampled detector outputs over [t, t + dt] given the state at t and
    /// the draw that also drives the backaction of this step.
    pub fn signals(&self, r: BlochVector, draw: NoiseDraw) -> [f64; 2] {
        let [mz, mp] = self.mean_signals(r);
        [
            mz + self.channels[0].noise_scale * draw.xi_z,
            mp + self.channels[1].noise_scale * draw.xi_phi,
        ]
    }
}

/// Deterministic part (ξ = 0) of the Itô evolution, including the residual
/// rotation and decoherence.
pub fn ito_drift(state: BlochVector, setup: &MeasurementSetup) -> BlochVector {
    Dynamics::new(setup, 1.0).ito_drift(state)
}

/// Backaction coefficient vectors `[g_z, g_φ]` multiplying ξz and ξφ.
pub fn ito_diffusion(state: BlochVector, setup: &MeasurementSetup) -> [BlochVector; 2] {
    Dynamics::new(setup, 1.0).diffusion(state)
}

/// Detector samples `(I_z, I_φ)` for the interval starting at `state`.
pub fn emit_signals(
    state: BlochVector,
    setup: &MeasurementSetup,
    dt: f64,
    draw: NoiseDraw,
) -> [f64; 2] {
    Dynamics::new(setup, dt).signals(state, draw)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// State after the step, inside the Bloch ball.
    pub state: BlochVector,
    /// State after the step before the radial projection.
    pub unprojected: BlochVector,
    pub projected: bool,
}

/// Single-step integrator for a fixed setup, step size and scheme.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    dynamics: Dynamics,
    dt: f64,
    sqrt_dt: f64,
    scheme: Scheme,
}

impl Integrator {
    pub fn new(setup: &MeasurementSetup, dt: f64, scheme: Scheme) -> Self {
        Self {
            dynamics: Dynamics::new(setup, dt),
            dt,
            sqrt_dt: dt.sqrt(),
            scheme,
        }
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn increment(&self, r: BlochVector, drift: BlochVector, draw: NoiseDraw) -> BlochVector {
        let [gz, gp] = self.dynamics.diffusion(r);
        drift * self.dt + gz * (draw.xi_z * self.sqrt_dt) + gp * (draw.xi_phi * self.sqrt_dt)
    }

    /// Raw scheme update without projection.
    pub fn advance(&self, r: BlochVector, draw: NoiseDraw) -> BlochVector {
        match self.scheme {
            Scheme::Ito => r + self.increment(r, self.dynamics.ito_drift(r), draw),
            Scheme::Stratonovich => {
                let first = self.increment(r, self.dynamics.stratonovich_drift(r), draw);
                let predicted = r + first;
                let second =
                    self.increment(predicted, self.dynamics.stratonovich_drift(predicted), draw);
                r + (first + second) * 0.5
            }
        }
    }

    /// One step followed by the purity projection. `step_index` is only used
    /// to label a divergence.
    pub fn step(&self, r: BlochVector, draw: NoiseDraw, step_index: usize) -> Result<StepOutcome> {
        let unprojected = self.advance(r, draw);
        if !unprojected.is_finite() {
            return Err(Error::IntegrationDiverged {
                trace: 0,
                step: step_index,
            });
        }
        let (state, projected) = unprojected.project_into_ball();
        Ok(StepOutcome {
            state,
            unprojected,
            projected,
        })
    }

    pub fn signals(&self, r: BlochVector, draw: NoiseDraw) -> [f64; 2] {
        self.dynamics.signals(r, draw)
    }
}

/// One projected step of the configured scheme.
pub fn step(
    state: BlochVector,
    setup: &MeasurementSetup,
    config: &SimulationConfig,
    draw: NoiseDraw,
) -> Result<BlochVector> {
    Ok(Integrator::new(setup, config.dt, config.scheme)
        .step(state, draw, 0)?
        .state)
}

/// Simulates trace `trace_index` of the ensemble described by `config`.
/// The result depends only on `(config.master_seed, trace_index)`.
pub fn simulate_trace(
    setup: &MeasurementSetup,
    config: &SimulationConfig,
    trace_index: u64,
) -> Result<TraceRecord> {
    let integrator = Integrator::new(setup, config.dt, config.scheme);
    let n = config.n_samples();
    let mut noise = NoiseStream::new(config.master_seed, trace_index);
    let mut samples = Vec::with_capacity(n);
    let mut states = config.record_states.then(|| Vec::with_capacity(n + 1));
    let mut state = config.initial_state;
    let mut projections = 0u64;

    for k in 0..n {
        let draw = noise.next_draw();
        samples.push(integrator.signals(state, draw));
        if let Some(states) = states.as_mut() {
            states.push(state);
        }
        let outcome = integrator
            .step(state, draw, k)
            .map_err(|_| Error::IntegrationDiverged {
                trace: trace_index,
                step: k,
            })?;
        projections += u64::from(outcome.projected);
        state = outcome.state;
    }
    if let Some(states) = states.as_mut() {
        states.push(state);
    }

    Ok(TraceRecord {
        dt: config.dt,
        samples,
        seed: trace_index,
        projections,
        states,
    })
}

/// Receives completion notices from the ensemble runner.
pub trait ProgressSink: Sync {
    fn traces_done(&self, done: usize, total: usize);
}

/// Ignores progress.
pub struct NoProgress;

impl ProgressSink for NoProgress {
    fn traces_done(&self, _done: usize, _total: usize) {}
}

/// Traces are simulated in fixed-size batches; each batch is spread over the
/// thread pool and then emitted in index order.
const BATCH: usize = 512;

/// Simulates the whole ensemble in memory. The records are identical for
/// any thread count.
pub fn simulate_ensemble(
    setup: &MeasurementSetup,
    config: &SimulationConfig,
    progress: &dyn ProgressSink,
) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::with_capacity(config.n_traces);
    for_each_trace(setup, config, progress, |record| {
        out.push(record);
        Ok(())
    })?;
    Ok(out)
}

/// Simulates the ensemble batch by batch and hands every record, in index
/// order, to `sink` (for example a file writer) without keeping them.
pub fn for_each_trace<F>(
    setup: &MeasurementSetup,
    config: &SimulationConfig,
    progress: &dyn ProgressSink,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(TraceRecord) -> Result<()>,
{
    let violations = validate_setup(setup, config);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let total = config.n_traces;
    let mut start = 0;
    while start < total {
        let end = (start + BATCH).min(total);
        let batch: Vec<Result<TraceRecord>> = (start..end)
            .into_par_iter()
            .map(|i| simulate_trace(setup, config, i as u64))
            .collect();
        for record in batch {
            sink(record?)?;
        }
        progress.traces_done(end, total);
        start = end;
    }
    Ok(())
}

/// An ensemble that is regenerated on demand instead of being stored, so
/// estimators can stream over arbitrarily many traces.
#[derive(Debug, Clone)]
pub struct SimulatedTraces {
    setup: MeasurementSetup,
    config: SimulationConfig,
}

impl SimulatedTraces {
    pub fn new(setup: MeasurementSetup, config: SimulationConfig) -> Result<Self> {
        let violations = validate_setup(&setup, &config);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        Ok(Self { setup, config })
    }

    pub fn setup(&self) -> &MeasurementSetup {
        &self.setup
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }
}

impl TraceSource for SimulatedTraces {
    fn len(&self) -> usize {
        self.config.n_traces
    }

    fn dt(&self) -> f64 {
        self.config.dt
    }

    fn n_samples(&self) -> usize {
        self.config.n_samples()
    }

    fn trace(&self, index: usize) -> Result<Cow<'_, TraceRecord>> {
        simulate_trace(&self.setup, &self.config, index as u64).map(Cow::Owned)
    }
}
