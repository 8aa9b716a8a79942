// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Domain types shared by the simulator, the analytic model, and the estimators.
//!
//! Units throughout: times in µs, rates in µs⁻¹ (angular rates in rad/µs),
//! output signals normalized so that a σ eigenstate gives a mean signal of ±1.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on |r| ≤ 1 after the radial projection.
pub const PURITY_TOLERANCE: f64 = 1e-6;

/// Hard limit on dt times the fastest rate of the model.
pub const MAX_STEP_RATE_PRODUCT: f64 = 0.05;

/// Above this value of dt times the fastest rate a warning is issued.
pub const WARN_STEP_RATE_PRODUCT: f64 = 0.01;

/// Bloch coordinates of the effective qubit, ρ = (1 + xσx + yσy + zσz)/2.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const ZERO: BlochVector = BlochVector {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Unit vector in the xz-plane at `angle` from the z-axis: the +1
    /// eigenstate of σz cos(angle) + σx sin(angle).
    pub fn axis(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(s, 0.0, c)
    }

    pub fn dot(self, other: BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Expectation value of σz cos(angle) + σx sin(angle).
    pub fn along(self, angle: f64) -> f64 {
        let (s, c) = angle.sin_cos();
        self.z * c + self.x * s
    }

    /// Radially projects the vector back onto the unit sphere if it lies
    /// outside the Bloch ball. Returns whether a projection happened.
    pub fn project_into_ball(self) -> (BlochVector, bool) {
        let norm = self.norm();
        if norm > 1.0 {
            (self * (1.0 / norm), true)
        } else {
            (self, false)
        }
    }

    pub fn max_abs_diff(self, other: BlochVector) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }
}

impl From<[f64; 3]> for BlochVector {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(v: BlochVector) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for BlochVector {
    type Output = BlochVector;
    fn add(self, rhs: BlochVector) -> BlochVector {
        BlochVector::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for BlochVector {
    type Output = BlochVector;
    fn sub(self, rhs: BlochVector) -> BlochVector {
        BlochVector::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for BlochVector {
    type Output = BlochVector;
    fn mul(self, k: f64) -> BlochVector {
        BlochVector::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for BlochVector {
    type Output = BlochVector;
    fn neg(self) -> BlochVector {
        BlochVector::new(-self.x, -self.y, -self.z)
    }
}

/// Label of a detector output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Z,
    Phi,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::Z, Channel::Phi];

    pub fn index(self) -> usize {
        match self {
            Channel::Z => 0,
            Channel::Phi => 1,
        }
    }

    pub fn other(self) -> Channel {
        match self {
            Channel::Z => Channel::Phi,
            Channel::Phi => Channel::Z,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Z => "z",
            Channel::Phi => "phi",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One weakly measured observable σ_angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementChannel {
    /// Ensemble dephasing rate Γ (µs⁻¹).
    pub gamma: f64,
    /// Measurement time τ for unit signal-to-noise ratio (µs).
    pub tau_m: f64,
    /// Direction in the xz-plane, measured from the z-axis (rad).
    pub angle: f64,
}

impl MeasurementChannel {
    pub fn new(gamma: f64, tau_m: f64, angle: f64) -> Self {
        Self {
            gamma,
            tau_m,
            angle,
        }
    }

    /// Builds the channel from its dephasing rate and quantum efficiency.
    pub fn from_efficiency(gamma: f64, efficiency: f64, angle: f64) -> Self {
        Self::new(gamma, 1.0 / (2.0 * efficiency * gamma), angle)
    }

    /// η = 1/(2τΓ).
    pub fn efficiency(&self) -> f64 {
        1.0 / (2.0 * self.tau_m * self.gamma)
    }

    /// Individual-trajectory dephasing γ_i = Γ_i − 1/(2τ_i), the part of the
    /// ensemble dephasing not accounted for by information gain.
    pub fn excess_dephasing(&self) -> f64 {
        self.gamma - 0.5 / self.tau_m
    }
}

/// Decoherence and residual rotation of the effective qubit that are not
/// caused by the measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitEnvironment {
    /// Energy relaxation time T1 (µs); `f64::INFINITY` disables it.
    pub t1: f64,
    /// Dephasing time T2 (µs); `f64::INFINITY` disables it.
    pub t2: f64,
    /// Residual Rabi mismatch Ω̃_R (rad/µs), a rotation about y.
    pub rabi_mismatch: f64,
}

impl QubitEnvironment {
    pub fn new(t1: f64, t2: f64, rabi_mismatch: f64) -> Self {
        Self {
            t1,
            t2,
            rabi_mismatch,
        }
    }

    /// No decoherence and no residual rotation.
    pub fn ideal() -> Self {
        Self::new(f64::INFINITY, f64::INFINITY, 0.0)
    }

    /// γ = (T1⁻¹ + T2⁻¹)/2, the x and z damping rate after averaging over
    /// the fast physical Rabi rotation.
    pub fn decoherence_rate(&self) -> f64 {
        0.5 * (self.t1.recip() + self.t2.recip())
    }

    /// Damping rate of y, T2⁻¹.
    pub fn y_damping_rate(&self) -> f64 {
        self.t2.recip()
    }

    /// Pure dephasing rate T2⁻¹ − (2T1)⁻¹ of the physical qubit.
    pub fn pure_dephasing_rate(&self) -> f64 {
        self.t2.recip() - 0.5 * self.t1.recip()
    }
}

/// The two measurement channels plus the environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetup {
    pub channel_z: MeasurementChannel,
    pub channel_phi: MeasurementChannel,
    pub environment: QubitEnvironment,
}

impl MeasurementSetup {
    pub fn new(
        channel_z: MeasurementChannel,
        channel_phi: MeasurementChannel,
        environment: QubitEnvironment,
    ) -> Self {
        Self {
            channel_z,
            channel_phi,
            environment,
        }
    }

    /// Canonical representation: the z-channel along the z-axis and the
    /// φ-channel at `phi` (normalized into (−π, π]).
    pub fn canonical(
        (gamma_z, tau_z): (f64, f64),
        (gamma_phi, tau_phi): (f64, f64),
        phi: f64,
        environment: QubitEnvironment,
    ) -> Self {
        Self::new(
            MeasurementChannel::new(gamma_z, tau_z, 0.0),
            MeasurementChannel::new(gamma_phi, tau_phi, normalize_angle(phi)),
            environment,
        )
    }

    pub fn channel(&self, channel: Channel) -> &MeasurementChannel {
        match channel {
            Channel::Z => &self.channel_z,
            Channel::Phi => &self.channel_phi,
        }
    }

    /// Angle φ between the two measurement directions, in (−π, π].
    pub fn relative_angle(&self) -> f64 {
        normalize_angle(self.channel_phi.angle - self.channel_z.angle)
    }

    /// Same setup with both measurement directions rotated about y.
    pub fn rotated(&self, extra_angle: f64) -> Self {
        let mut out = *self;
        out.channel_z.angle += extra_angle;
        out.channel_phi.angle += extra_angle;
        out
    }

    /// Same setup with the roles of the two detectors exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.channel_phi, self.channel_z, self.environment)
    }

    pub fn with_rabi_mismatch(&self, rabi_mismatch: f64) -> Self {
        let mut out = *self;
        out.environment.rabi_mismatch = rabi_mismatch;
        out
    }

    /// Same setup with the φ-channel direction shifted by `delta` (for
    /// example the resonator-bandwidth correction).
    pub fn with_angle_offset(&self, delta: f64) -> Self {
        let mut out = *self;
        out.channel_phi.angle += delta;
        out
    }

    /// Direction of the effective qubit's calibration axis: the bisector of
    /// the two nominal measurement directions.
    pub fn calibration_axis(&self) -> f64 {
        self.channel_z.angle + 0.5 * self.relative_angle()
    }

    /// The fastest rate of the model, which bounds the usable time step.
    pub fn fastest_rate(&self) -> f64 {
        let env = &self.environment;
        [
            self.channel_z.gamma,
            self.channel_phi.gamma,
            env.rabi_mismatch.abs(),
            env.t1.recip(),
            env.t2.recip(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Maps an arbitrary angle into (−π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Stochastic calculus used to integrate the trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Euler–Maruyama on the Itô equations.
    #[default]
    Ito,
    /// Heun predictor-corrector on the Stratonovich equations.
    Stratonovich,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Integration and sampling step (µs).
    pub dt: f64,
    /// Trace length (µs).
    pub duration: f64,
    pub n_traces: usize,
    pub master_seed: u64,
    pub initial_state: BlochVector,
    pub scheme: Scheme,
    /// Keep the Bloch vector at every sample time in each trace.
    #[serde(default)]
    pub record_states: bool,
}

impl SimulationConfig {
    /// Default sampling step, 4 ns.
    pub const DEFAULT_DT: f64 = 0.004;

    pub fn new(duration: f64, n_traces: usize, master_seed: u64) -> Self {
        Self {
            dt: Self::DEFAULT_DT,
            duration,
            n_traces,
            master_seed,
            initial_state: BlochVector::new(0.0, 0.0, 1.0),
            scheme: Scheme::Ito,
            record_states: false,
        }
    }

    pub fn n_samples(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    NonFinite,
    NonPositiveRate,
    NonPositiveMeasurementTime,
    EfficiencyBound,
    NonPositiveCoherenceTime,
    DephasingBound,
    NonPositiveStep,
    DurationTooShort,
    StepTooCoarse,
    InitialStateOutsideBall,
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    pub message: String,
}

impl Violation {
    fn new(rule: Rule, message: impl Into<String>) -> Self {
        Self {
            rule,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.rule, self.message)
    }
}

/// Checks every physical and numerical invariant of a setup and a
/// simulation configuration. Returns all violations; empty means valid.
pub fn validate_setup(setup: &MeasurementSetup, config: &SimulationConfig) -> Vec<Violation> {
    let mut out = validate_physics(setup);

    if !(config.dt.is_finite() && config.duration.is_finite()) {
        out.push(Violation::new(
            Rule::NonFinite,
            "dt and duration must be finite",
        ));
        return out;
    }
    if config.dt <= 0.0 {
        out.push(Violation::new(
            Rule::NonPositiveStep,
            format!("dt = {} must be positive", config.dt),
        ));
    } else {
        if config.n_samples() == 0 {
            out.push(Violation::new(
                Rule::DurationTooShort,
                format!(
                    "duration = {} µs holds no sample at dt = {} µs",
                    config.duration, config.dt
                ),
            ));
        }
        let product = config.dt * setup.fastest_rate();
        if product > MAX_STEP_RATE_PRODUCT {
            out.push(Violation::new(
                Rule::StepTooCoarse,
                format!("dt × fastest rate = {product:.4} exceeds {MAX_STEP_RATE_PRODUCT}"),
            ));
        }
    }
    let r = config.initial_state;
    if !r.is_finite() {
        out.push(Violation::new(
            Rule::NonFinite,
            "initial state is not finite",
        ));
    } else if r.norm() > 1.0 + PURITY_TOLERANCE {
        out.push(Violation::new(
            Rule::InitialStateOutsideBall,
            format!("|r| = {} lies outside the Bloch ball", r.norm()),
        ));
    }
    out
}

/// The setup-only part of [`validate_setup`].
pub fn validate_physics(setup: &MeasurementSetup) -> Vec<Violation> {
    let mut out = Vec::new();
    for channel in Channel::BOTH {
        let ch = setup.channel(channel);
        if !(ch.gamma.is_finite() && ch.tau_m.is_finite() && ch.angle.is_finite()) {
            out.push(Violation::new(
                Rule::NonFinite,
                format!("{channel}-channel parameters must be finite"),
            ));
            continue;
        }
        if ch.gamma <= 0.0 {
            out.push(Violation::new(
                Rule::NonPositiveRate,
                format!("gamma_{channel} = {} must be positive", ch.gamma),
            ));
        }
        if ch.tau_m <= 0.0 {
            out.push(Violation::new(
                Rule::NonPositiveMeasurementTime,
                format!("tau_{channel} = {} must be positive", ch.tau_m),
            ));
        }
        if ch.gamma > 0.0 && ch.tau_m > 0.0 {
            let eta = ch.efficiency();
            if !(eta > 0.0 && eta <= 1.0) {
                out.push(Violation::new(
                    Rule::EfficiencyBound,
                    format!(
                        "efficiency eta_{channel} = 1/(2 tau gamma) = {eta:.4} is outside (0, 1]"
                    ),
                ));
            }
        }
    }

    let env = &setup.environment;
    if env.t1.is_nan() || env.t2.is_nan() || !env.rabi_mismatch.is_finite() {
        out.push(Violation::new(
            Rule::NonFinite,
            "T1, T2 must be numbers and the Rabi mismatch finite",
        ));
        return out;
    }
    if env.t1 <= 0.0 || env.t2 <= 0.0 {
        out.push(Violation::new(
            Rule::NonPositiveCoherenceTime,
            format!("T1 = {} and T2 = {} must be positive", env.t1, env.t2),
        ));
    } else if env.t2 > 2.0 * env.t1 {
        out.push(Violation::new(
            Rule::DephasingBound,
            format!("T2 = {} exceeds 2 T1 = {}", env.t2, 2.0 * env.t1),
        ));
    }
    out
}

/// Non-fatal remarks about a valid configuration, such as a step size that
/// is allowed but coarser than recommended.
pub fn advisories(setup: &MeasurementSetup, config: &SimulationConfig) -> Vec<String> {
    let product = config.dt * setup.fastest_rate();
    let mut out = Vec::new();
    if product > WARN_STEP_RATE_PRODUCT && product <= MAX_STEP_RATE_PRODUCT {
        out.push(format!(
            "dt × fastest rate = {product:.4} is above {WARN_STEP_RATE_PRODUCT}; \
             first-order discretization errors may be visible"
        ));
    }
    out
}

/// Shift δφ = (κφ − κz)/(2Ω_R) of the effective angle between the measured
/// directions caused by the finite resonator bandwidths κz, κφ of the two
/// channels, given the physical Rabi frequency Ω_R.
pub fn effective_angle_correction(kappa_z: f64, kappa_phi: f64, omega_rabi: f64) -> Result<f64> {
    if !(omega_rabi > 0.0) || !omega_rabi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Rabi frequency must be positive, got {omega_rabi}"
        )));
    }
    Ok((kappa_phi - kappa_z) / (2.0 * omega_rabi))
}
