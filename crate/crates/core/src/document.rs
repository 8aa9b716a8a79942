// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Flat JSON document holding a measurement setup and a simulation config.
//!
//! ```json
//! {"gamma_z": 0.769, "gamma_phi": 0.769, "tau_z": 1.327, "tau_phi": 1.585,
//!  "phi": 1.5708, "rabi_mismatch": 0.0, "t1": 60.0, "t2": 30.0,
//!  "dt": 0.004, "duration": 5.0, "n_traces": 20000, "master_seed": 7,
//!  "scheme": "ito", "initial_state": [0.0, 0.0, 1.0]}
//! ```
//!
//! `t1`/`t2` may be `null` for no decoherence. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    BlochVector, MeasurementChannel, MeasurementSetup, QubitEnvironment, Scheme, SimulationConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupDocument {
    pub gamma_z: f64,
    pub gamma_phi: f64,
    pub tau_z: f64,
    pub tau_phi: f64,
    pub phi: f64,
    pub rabi_mismatch: f64,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub dt: f64,
    pub duration: f64,
    pub n_traces: usize,
    pub master_seed: u64,
    pub scheme: Scheme,
    pub initial_state: BlochVector,
}

impl SetupDocument {
    pub fn from_parts(setup: &MeasurementSetup, config: &SimulationConfig) -> Self {
        let finite = |t: f64| t.is_finite().then_some(t);
        Self {
            gamma_z: setup.channel_z.gamma,
            gamma_phi: setup.channel_phi.gamma,
            tau_z: setup.channel_z.tau_m,
            tau_phi: setup.channel_phi.tau_m,
            phi: setup.relative_angle(),
            rabi_mismatch: setup.environment.rabi_mismatch,
            t1: finite(setup.environment.t1),
            t2: finite(setup.environment.t2),
            dt: config.dt,
            duration: config.duration,
            n_traces: config.n_traces,
            master_seed: config.master_seed,
            scheme: config.scheme,
            initial_state: config.initial_state,
        }
    }

    pub fn setup(&self) -> MeasurementSetup {
        MeasurementSetup::new(
            MeasurementChannel::new(self.gamma_z, self.tau_z, 0.0),
            MeasurementChannel::new(
                self.gamma_phi,
                self.tau_phi,
                crate::model::normalize_angle(self.phi),
            ),
            QubitEnvironment::new(
                self.t1.unwrap_or(f64::INFINITY),
                self.t2.unwrap_or(f64::INFINITY),
                self.rabi_mismatch,
            ),
        )
    }

    pub fn config(&self) -> SimulationConfig {
        SimulationConfig {
            dt: self.dt,
            duration: self.duration,
            n_traces: self.n_traces,
            master_seed: self.master_seed,
            initial_state: self.initial_state,
            scheme: self.scheme,
            record_states: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("document serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
