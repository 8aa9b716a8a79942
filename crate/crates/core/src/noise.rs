// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Counter-based Gaussian noise streams.
//!
//! Every trace owns a ChaCha8 stream selected by `(master_seed, stream id)`.
//! Step `k` of that stream always consumes the same four 32-bit words
//! (`4k .. 4k + 4`), so the draw for any (trace, step, channel) can be
//! regenerated without replaying the stream and the result never depends
//! on how traces are scheduled across threads.

use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS_PER_STEP: u128 = 4;

/// Independent standard-normal variates for the two channels in one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseDraw {
    pub xi_z: f64,
    pub xi_phi: f64,
}

impl NoiseDraw {
    pub const ZERO: NoiseDraw = NoiseDraw {
        xi_z: 0.0,
        xi_phi: 0.0,
    };

    pub fn new(xi_z: f64, xi_phi: f64) -> Self {
        Self { xi_z, xi_phi }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Positions the stream so that the next draw is the one for `step`.
    pub fn seek(&mut self, step: u64) {
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
    }

    /// Draw for an arbitrary step, leaving the stream right after it.
    pub fn draw_at(&mut self, step: u64) -> NoiseDraw {
        self.seek(step);
        self.next_draw()
    }

    /// Two independent N(0, 1) variates from one Box–Muller transform.
    pub fn next_draw(&mut self) -> NoiseDraw {
        let (a, b) = self.next_normal_pair();
        NoiseDraw::new(a, b)
    }

    pub fn next_normal_pair(&mut self) -> (f64, f64) {
        // u1 in (0, 1], u2 in [0, 1)
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let radius = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        (radius * c, radius * s)
    }
}
