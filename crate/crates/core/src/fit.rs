// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Parameter estimation from correlator curves.

use serde::{Deserialize, Serialize};

use crate::analytic::decay_rates;
use crate::curve::{CorrelatorCurve, CurveKind};
use crate::error::{Error, Result};
use crate::estimator::CorrelatorEstimate;
use crate::mat2::exp_kernels;
use crate::model::{Channel, MeasurementSetup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameter: String,
    pub value: f64,
    /// One standard deviation.
    pub stderr: f64,
    pub residual_norm: f64,
    pub n_points: usize,
}

impl FitResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}

/// Closed lag interval used by a fit (µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagRange {
    pub start: f64,
    pub end: f64,
}

impl LagRange {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    /// [dt, 2.5 µs]: lag 0 carries no information on the antisymmetric
    /// correlator, which vanishes there.
    pub fn default_for(dt: f64) -> Self {
        Self::new(dt, 2.5)
    }
}

fn select(curve: &CorrelatorCurve, range: LagRange) -> Result<Vec<usize>> {
    let idx = curve.indices_in(range.start, range.end);
    if idx.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no lags in [{}, {}]",
            range.start, range.end
        )));
    }
    if idx.len() < 2 {
        return Err(Error::InvalidArgument(
            "a fit needs at least two lags".into(),
        ));
    }
    Ok(idx)
}

/// Template of the antisymmetric cross-correlator per unit Ω̃_R:
/// 2 sinφ (e^{−Γ−τ} − e^{−Γ+τ}) / (Γ+ − Γ−), with Γ± taken at Ω̃_R = 0.
/// Written as 2 sinφ · e^{−Γ̄τ} sinh(qτ)/q, it reduces to 2 sinφ · τ e^{−Γτ}
/// when the rates coincide.
pub fn rabi_template(setup: &MeasurementSetup, tau: f64) -> f64 {
    rabi_template_at(setup, 0.0, tau)
}

/// Same template with Γ± evaluated at Ω̃_R = `omega` (complex rates give
/// the sin(qτ)/q form).
pub fn rabi_template_at(setup: &MeasurementSetup, omega: f64, tau: f64) -> f64 {
    let rates = decay_rates(&setup.with_rabi_mismatch(omega));
    let mean = 0.5 * (rates.gamma_plus.re + rates.gamma_minus.re);
    let (_, odd) = exp_kernels(-mean, 0.25 * rates.discriminant, tau);
    2.0 * setup.relative_angle().sin() * odd
}

/// Fits Ω̃_R as the amplitude of the antisymmetric cross-correlator.
///
/// The fit is linear: the rates are fixed by `setup` with Ω̃_R neglected
/// (its Ω̃_R is ignored) and only the prefactor is adjusted. Points are
/// weighted by 1/stderr² when the curve carries errors; otherwise the
/// error is taken from the scatter of the residuals. Neglecting Ω̃_R in the
/// rates biases the result by a relative O(Ω̃_R²/Γ²).
pub fn fit_rabi_mismatch(
    antisym_curve: &CorrelatorCurve,
    setup: &MeasurementSetup,
    range: LagRange,
) -> Result<FitResult> {
    amplitude_fit(antisym_curve, setup, range, 0.0)
}

/// Repeats the linear fit with Γ± recomputed at the current estimate of
/// Ω̃_R until the estimate is stable, removing the O(Ω̃_R²/Γ²) bias of
/// [`fit_rabi_mismatch`]. The first pass is that linear fit.
pub fn fit_rabi_mismatch_self_consistent(
    antisym_curve: &CorrelatorCurve,
    setup: &MeasurementSetup,
    range: LagRange,
) -> Result<FitResult> {
    let mut fit = amplitude_fit(antisym_curve, setup, range, 0.0)?;
    for _ in 0..100 {
        let next = amplitude_fit(antisym_curve, setup, range, fit.value)?;
        let converged = (next.value - fit.value).abs() <= 1e-14 * next.value.abs().max(1e-300);
        fit = next;
        if converged {
            break;
        }
    }
    Ok(fit)
}

/// Fits Ω̃_R to the antisymmetric correlator of `estimate` and takes the
/// error from the spread of the same fit over the bootstrap replicates.
/// Unlike the weighted-fit error, this accounts for the strong correlation
/// between neighbouring lags.
pub fn fit_rabi_mismatch_resampled(
    estimate: &CorrelatorEstimate,
    setup: &MeasurementSetup,
    range: LagRange,
    self_consistent: bool,
) -> Result<FitResult> {
    let fit_one = |curve: &CorrelatorCurve| {
        if self_consistent {
            fit_rabi_mismatch_self_consistent(curve, setup, range)
        } else {
            fit_rabi_mismatch(curve, setup, range)
        }
    };
    let curve = estimate.antisymmetric()?;
    let mut fit = fit_one(&curve)?;
    let replicates = estimate
        .combination_replicates(&[
            ((Channel::Z, Channel::Phi), 1.0),
            ((Channel::Phi, Channel::Z), -1.0),
        ])?
        .ok_or_else(|| Error::InvalidArgument("estimate carries no bootstrap replicates".into()))?;
    if replicates.nrows() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two bootstrap replicates".into(),
        ));
    }
    let values = replicates
        .rows()
        .into_iter()
        .map(|row| {
            let mut c = curve.clone();
            c.values = row.to_vec();
            fit_one(&c).map(|f| f.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    fit.stderr = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(fit)
}

fn amplitude_fit(
    antisym_curve: &CorrelatorCurve,
    setup: &MeasurementSetup,
    range: LagRange,
    omega_in_rates: f64,
) -> Result<FitResult> {
    if antisym_curve.kind != CurveKind::Antisymmetric {
        return Err(Error::InvalidArgument(format!(
            "expected the antisymmetric correlator, got K_{}",
            antisym_curve.kind.label()
        )));
    }
    if setup.relative_angle().sin().abs() < 1e-12 {
        return Err(Error::Unidentifiable(
            "sinφ = 0: the antisymmetric correlator does not depend on Ω̃_R".into(),
        ));
    }
    let idx = select(antisym_curve, range)?;
    let weights: Vec<f64> = match &antisym_curve.stderr {
        Some(e) => idx
            .iter()
            .map(|&k| {
                let s = e[k];
                if s > 0.0 && s.is_finite() {
                    Ok(1.0 / (s * s))
                } else {
                    Err(Error::InvalidData(format!(
                        "nonpositive standard error at lag {}",
                        antisym_curve.lags[k]
                    )))
                }
            })
            .collect::<Result<_>>()?,
        None => vec![1.0; idx.len()],
    };
    let template: Vec<f64> = idx
        .iter()
        .map(|&k| rabi_template_at(setup, omega_in_rates, antisym_curve.lags[k]))
        .collect();
    let data: Vec<f64> = idx.iter().map(|&k| antisym_curve.values[k]).collect();
    let stt: f64 = weights.iter().zip(&template).map(|(w, t)| w * t * t).sum();
    if !(stt > 0.0) {
        return Err(Error::Unidentifiable(
            "template vanishes on the lag range".into(),
        ));
    }
    let sty: f64 = weights
        .iter()
        .zip(template.iter().zip(&data))
        .map(|(w, (t, y))| w * t * y)
        .sum();
    let value = sty / stt;
    let rss: f64 = template
        .iter()
        .zip(&data)
        .map(|(t, y)| (y - value * t).powi(2))
        .sum();
    let n = idx.len();
    let stderr = if antisym_curve.stderr.is_some() {
        stt.recip().sqrt()
    } else {
        (rss / (n - 1) as f64 / stt).sqrt()
    };
    Ok(FitResult {
        parameter: "rabi_mismatch".into(),
        value,
        stderr,
        residual_norm: rss.sqrt(),
        n_points: n,
    })
}

/// Decay rate from the least-squares slope of ln K(τ) against τ.
pub fn fit_decay_rate(curve: &CorrelatorCurve, range: LagRange) -> Result<FitResult> {
    let idx = select(curve, range)?;
    let mut xs = Vec::with_capacity(idx.len());
    let mut ys = Vec::with_capacity(idx.len());
    for &k in &idx {
        let v = curve.values[k];
        if !(v > 0.0) {
            return Err(Error::InvalidData(format!(
                "K({}) = {v} is not positive",
                curve.lags[k]
            )));
        }
        xs.push(curve.lags[k]);
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let stderr = if xs.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(FitResult {
        parameter: "decay_rate".into(),
        value: -slope,
        stderr,
        residual_norm: rss.sqrt(),
        n_points: xs.len(),
    })
}
