// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Output noise of a driven-damped resonator fed by vacuum noise.
//!
//! The field fluctuation obeys dα/dt = −(κ/2 + iΔω) α + √κ_out v + √(κ − κ_out) v_a
//! and leaves as F = −v + √κ_out α. Each quadrature of v and v_a is white
//! with intensity 1/4. The simulator advances α with its exact Gaussian
//! transition and emits the exact bin average of Re F, so the sampled
//! output has no time-step bias: it is white with variance 1/(4 dt).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::noise::NoiseStream;

/// Largest accepted κ·dt.
pub const MAX_STEP_KAPPA_PRODUCT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    /// Total damping rate κ (rad/µs).
    pub kappa: f64,
    /// Coupling to the output line κ_out (rad/µs).
    pub kappa_out: f64,
    /// Δω = ω_r − ω_d (rad/µs).
    pub detuning: f64,
}

impl ResonatorParams {
    pub fn new(kappa: f64, kappa_out: f64, detuning: f64) -> Result<Self> {
        let p = Self {
            kappa,
            kappa_out,
            detuning,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.kappa_out >= 0.0 && self.kappa_out <= self.kappa) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= kappa_out <= kappa, got {} and {}",
                self.kappa_out, self.kappa
            )));
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        Ok(())
    }

    /// κ̃ = κ + 2iΔω.
    pub fn complex_rate(&self) -> Complex64 {
        Complex64::new(self.kappa, 2.0 * self.detuning)
    }

    /// Drift matrix of (Re α, Im α).
    fn drift(&self) -> Mat2 {
        let h = 0.5 * self.kappa;
        Mat2([[-h, self.detuning], [-self.detuning, -h]])
    }
}

/// K2(τ) = −(κ_out/4) Re[e^{−κ̃τ/2}] and K3(τ) = (κ_out/4) e^{−κτ/2} cos(Δω τ):
/// the vacuum-field cross term and the intracavity-field term of the Re F
/// correlator at τ > 0.
pub fn analytic_noise_terms(params: &ResonatorParams, tau: f64) -> Result<(f64, f64)> {
    params.check()?;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lag must be positive, got {tau}"
        )));
    }
    let k2 = -0.25 * params.kappa_out * (-params.complex_rate() * (0.5 * tau)).exp().re;
    let k3 =
        0.25 * params.kappa_out * (-0.5 * params.kappa * tau).exp() * (params.detuning * tau).cos();
    Ok((k2, k3))
}

/// Steady resonator fields for the two σ_φ eigenstates of the effective
/// qubit: α_st,1 = χε / (Ω_R (κ + 2iΔ)) and α_st,0 = −α_st,1.
pub fn steady_state_fields(
    chi: f64,
    eps: f64,
    omega_rabi: f64,
    kappa: f64,
    detuning: f64,
) -> Result<(Complex64, Complex64)> {
    if !(omega_rabi > 0.0) || !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need omega_rabi > 0 and kappa > 0, got {omega_rabi} and {kappa}"
        )));
    }
    let denominator = Complex64::new(kappa, 2.0 * detuning) * omega_rabi;
    let a1 = Complex64::new(chi * eps, 0.0) / denominator;
    Ok((a1, -a1))
}

/// Ensemble dephasing of the effective qubit, Γ = (κ/2)|α_st,1 − α_st,0|².
pub fn measurement_dephasing(kappa: f64, fields: (Complex64, Complex64)) -> f64 {
    0.5 * kappa * (fields.0 - fields.1).norm_sqr()
}

/// Dimension of the per-step Gaussian: α increment noise (2), its time
/// integral (2), and the integral of Re v over the step (1).
const DIM: usize = 5;

/// Exact one-step transition of (α, ∫α, ∫Re v).
struct Transition {
    propagator: Mat2,
    integral: Mat2,
    chol: [[f64; DIM]; DIM],
}

impl Transition {
    fn new(params: &ResonatorParams, dt: f64) -> Self {
        let a = params.drift();
        let propagator = a.exp(dt);
        let integral = integrated_propagator(&a, dt);
        let cov = noise_covariance(params, dt);
        Self {
            propagator,
            integral,
            chol: cholesky(&cov),
        }
    }
}

/// ∫₀^u e^{As} ds by 16-point Gauss–Legendre (the integrand is entire and
/// varies little over a step).
fn integrated_propagator(a: &Mat2, u: f64) -> Mat2 {
    let mut out = Mat2::ZERO;
    for (x, w) in gauss_legendre() {
        let s = 0.5 * u * (x + 1.0);
        out = out + a.exp(s).scale(0.5 * u * w);
    }
    out
}

/// Covariance of ∫₀^dt H(s) dW(s) with W = (V₁, V₂, Va₁, Va₂), each of
/// intensity 1/4, and rows of H: e^{A(dt−s)} L, G(dt−s) L and the Re v
/// selector, where L = [√κ_out 1, √(κ − κ_out) 1] and G(u) = ∫₀^u e^{Ar} dr.
fn noise_covariance(params: &ResonatorParams, dt: f64) -> [[f64; DIM]; DIM] {
    let a = params.drift();
    let (co, ca) = (
        params.kappa_out.sqrt(),
        (params.kappa - params.kappa_out).sqrt(),
    );
    let mut cov = [[0.0; DIM]; DIM];
    for (x, w) in gauss_legendre() {
        let s = 0.5 * dt * (x + 1.0);
        let e = a.exp(dt - s);
        let g = integrated_propagator(&a, dt - s);
        let mut h = [[0.0; 4]; DIM];
        for r in 0..2 {
            for c in 0..2 {
                h[r][c] = co * e.0[r][c];
                h[r][c + 2] = ca * e.0[r][c];
                h[r + 2][c] = co * g.0[r][c];
                h[r + 2][c + 2] = ca * g.0[r][c];
            }
        }
        h[4][0] = 1.0;
        let weight = 0.25 * 0.5 * dt * w;
        for i in 0..DIM {
            for j in 0..DIM {
                cov[i][j] += weight * (0..4).map(|k| h[i][k] * h[j][k]).sum::<f64>();
            }
        }
    }
    cov
}

/// Lower Cholesky factor of a positive semidefinite matrix; directions with
/// no variance (κ_out = 0 or κ_out = κ) get zero columns.
fn cholesky(a: &[[f64; DIM]; DIM]) -> [[f64; DIM]; DIM] {
    let scale = (0..DIM).map(|i| a[i][i]).fold(0.0, f64::max);
    let mut l = [[0.0; DIM]; DIM];
    for j in 0..DIM {
        let d = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d <= 1e-13 * scale {
            continue;
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..DIM {
            l[i][j] = (a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / d;
        }
    }
    l
}

fn gauss_legendre() -> impl Iterator<Item = (f64, f64)> {
    const NODES: [(f64, f64); 8] = [
        (0.0950125098376374, 0.1894506104550685),
        (0.2816035507792589, 0.1826034150449236),
        (0.4580167776572274, 0.1691565193950025),
        (0.6178762444026438, 0.1495959888165767),
        (0.755404408355003, 0.1246289712555339),
        (0.8656312023878318, 0.0951585116824928),
        (0.9445750230732326, 0.0622535239386479),
        (0.9894009349916499, 0.0271524594117541),
    ];
    NODES.into_iter().flat_map(|(x, w)| [(-x, w), (x, w)])
}

/// Bin-averaged Re F(t) for `round(duration/dt)` steps, starting from the
/// stationary field distribution. Deterministic given `seed`.
pub fn simulate_output_noise(
    params: &ResonatorParams,
    dt: f64,
    duration: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    params.check()?;
    if !(dt > 0.0) || dt * params.kappa > MAX_STEP_KAPPA_PRODUCT * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < dt and dt·kappa <= {MAX_STEP_KAPPA_PRODUCT}, got dt = {dt}"
        )));
    }
    let n = (duration / dt).round() as usize;
    let tr = Transition::new(params, dt);
    let sqrt_out = params.kappa_out.sqrt();
    let mut noise = NoiseStream::new(seed, 0);
    // stationary covariance is 1/4 per quadrature for any detuning
    let (a0, a1) = noise.next_normal_pair();
    let mut alpha = [0.5 * a0, 0.5 * a1];
    let mut out = Vec::with_capacity(n);
    let mut z = [0.0; 6];
    for _ in 0..n {
        for pair in z.chunks_mut(2) {
            let (u, v) = noise.next_normal_pair();
            pair[0] = u;
            pair[1] = v;
        }
        let mut zeta = [0.0; DIM];
        for (i, row) in tr.chol.iter().enumerate() {
            zeta[i] = (0..=i).map(|k| row[k] * z[k]).sum();
        }
        let mean_int = tr.integral.apply(alpha);
        let int_re = mean_int[0] + zeta[2];
        out.push((-zeta[4] + sqrt_out * int_re) / dt);
        let next = tr.propagator.apply(alpha);
        alpha = [next[0] + zeta[0], next[1] + zeta[1]];
    }
    Ok(out)
}

/// Lagged autocorrelation with batch-means errors.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedCorrelator {
    /// Lag in samples.
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// ⟨s_k s_{k+ℓ}⟩ for ℓ = 0..=max_lag. The series is split into `n_batches`
/// contiguous batches; the error is the spread of the batch estimates over
/// √n_batches.
pub fn lagged_correlator(
    samples: &[f64],
    max_lag: usize,
    n_batches: usize,
) -> Result<LaggedCorrelator> {
    if n_batches < 2 {
        return Err(Error::InvalidArgument("need at least two batches".into()));
    }
    let batch = samples.len() / n_batches;
    if batch <= max_lag {
        return Err(Error::InvalidArgument(
            "batches are shorter than the largest lag".into(),
        ));
    }
    let n_lags = max_lag + 1;
    let mut per_batch = vec![vec![0.0; n_lags]; n_batches];
    for (b, acc) in per_batch.iter_mut().enumerate() {
        let lo = b * batch;
        let count = batch - max_lag;
        for t in lo..lo + count {
            let x = samples[t];
            for (a, y) in acc.iter_mut().zip(&samples[t..t + n_lags]) {
                *a += x * y;
            }
        }
        acc.iter_mut().for_each(|v| *v /= count as f64);
    }
    let nb = n_batches as f64;
    let mut values = vec![0.0; n_lags];
    let mut stderr = vec![0.0; n_lags];
    for l in 0..n_lags {
        let mean = per_batch.iter().map(|b| b[l]).sum::<f64>() / nb;
        let var = per_batch.iter().map(|b| (b[l] - mean).powi(2)).sum::<f64>() / (nb - 1.0);
        values[l] = mean;
        stderr[l] = (var / nb).sqrt();
    }
    Ok(LaggedCorrelator {
        lags: (0..n_lags).collect(),
        values,
        stderr,
    })
}
