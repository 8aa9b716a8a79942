// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Correlators, detector responses and offsets estimated from trace
//! ensembles.
//!
//! Every estimate here is an ensemble mean of a per-trace statistic. Traces
//! are processed in fixed chunks (each chunk in parallel) and reduced in
//! index order, so results do not depend on the thread count. Standard
//! errors come from a trace-level bootstrap: resample weights are drawn
//! once and applied to the per-trace statistics of each chunk with one
//! matrix product.

use std::borrow::Cow;
use std::fs;
use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::build_generator;
use crate::curve::{CorrelatorCurve, CurveKind};
use crate::error::{Error, Result};
use crate::model::{BlochVector, Channel, MeasurementSetup};
use crate::source::TraceSource;
use crate::trajectory::TraceRecord;

/// Averaging window for the earlier time t₁ and the largest lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorWindow {
    /// First t₁ (µs), inclusive.
    pub t_a: f64,
    /// End of the t₁ range (µs), exclusive.
    pub t_b: f64,
    /// Largest lag (µs).
    pub max_lag: f64,
}

/// A window resolved on the sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowIndices {
    pub start: usize,
    pub end: usize,
    pub n_lags: usize,
}

impl WindowIndices {
    /// Samples needed per trace.
    pub fn span(&self) -> usize {
        self.end + self.n_lags - 1
    }
}

impl EstimatorWindow {
    pub fn new(t_a: f64, t_b: f64, max_lag: f64) -> Result<Self> {
        if !(t_a.is_finite() && t_b.is_finite() && max_lag.is_finite()) {
            return Err(Error::InvalidWindow("bounds must be finite".into()));
        }
        if t_a < 0.0 || t_a >= t_b {
            return Err(Error::InvalidWindow(format!(
                "need 0 <= t_a < t_b, got [{t_a}, {t_b})"
            )));
        }
        if max_lag < 0.0 {
            return Err(Error::InvalidWindow(format!("negative max_lag {max_lag}")));
        }
        Ok(Self { t_a, t_b, max_lag })
    }

    /// t₁ indices round(t_a/dt) ..< round(t_b/dt) and lags 0..=round(max_lag/dt).
    pub fn indices(&self, dt: f64, n_samples: usize) -> Result<WindowIndices> {
        let w = Self::new(self.t_a, self.t_b, self.max_lag)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidWindow(format!("invalid sampling step {dt}")));
        }
        let start = (w.t_a / dt).round() as usize;
        let end = (w.t_b / dt).round() as usize;
        let n_lags = (w.max_lag / dt).round() as usize + 1;
        if start >= end {
            return Err(Error::InvalidWindow(
                "window is shorter than one sample".into(),
            ));
        }
        let idx = WindowIndices { start, end, n_lags };
        if idx.span() > n_samples {
            return Err(Error::InvalidWindow(format!(
                "t_b + max_lag = {} µs exceeds the trace duration {} µs",
                w.t_b + w.max_lag,
                n_samples as f64 * dt
            )));
        }
        Ok(idx)
    }
}

/// Linear detector model Ĩ_i = (Δ̃I_i/2)·I_i + Ĩ_i^off relating raw output
/// to the normalized signal whose noiseless mean is Tr[σ_i ρ].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub response_z: f64,
    pub response_phi: f64,
    pub offset_z: f64,
    pub offset_phi: f64,
}

impl Calibration {
    /// Response 2 and no offset: raw output equals the normalized signal.
    pub const IDENTITY: Calibration = Calibration {
        response_z: 2.0,
        response_phi: 2.0,
        offset_z: 0.0,
        offset_phi: 0.0,
    };

    pub fn new(response: [f64; 2], offset: [f64; 2]) -> Result<Self> {
        let c = Self {
            response_z: response[0],
            response_phi: response[1],
            offset_z: offset[0],
            offset_phi: offset[1],
        };
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        if !(self.response_z > 0.0 && self.response_phi > 0.0)
            || !self.response_z.is_finite()
            || !self.response_phi.is_finite()
        {
            return Err(Error::InvalidParameter(
                "responses must be positive and finite".into(),
            ));
        }
        if !(self.offset_z.is_finite() && self.offset_phi.is_finite()) {
            return Err(Error::InvalidParameter("offsets must be finite".into()));
        }
        Ok(())
    }

    pub fn response(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Z => self.response_z,
            Channel::Phi => self.response_phi,
        }
    }

    pub fn offset(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Z => self.offset_z,
            Channel::Phi => self.offset_phi,
        }
    }

    pub fn to_raw(&self, channel: Channel, normalized: f64) -> f64 {
        0.5 * self.response(channel) * normalized + self.offset(channel)
    }

    pub fn to_normalized(&self, channel: Channel, raw: f64) -> f64 {
        (raw - self.offset(channel)) / (0.5 * self.response(channel))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.check()?;
        Ok(c)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct serializes")
    }
}

impl Default for Calibration {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Presents normalized traces as raw detector output under a calibration.
#[derive(Debug, Clone)]
pub struct RawSignals<S> {
    inner: S,
    calibration: Calibration,
}

impl<S: TraceSource> RawSignals<S> {
    pub fn new(inner: S, calibration: Calibration) -> Self {
        Self { inner, calibration }
    }
}

impl<S: TraceSource> TraceSource for RawSignals<S> {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    fn trace(&self, index: usize) -> Result<Cow<'_, TraceRecord>> {
        let mut t = self.inner.trace(index)?.into_owned();
        let c = &self.calibration;
        for s in &mut t.samples {
            *s = [c.to_raw(Channel::Z, s[0]), c.to_raw(Channel::Phi, s[1])];
        }
        Ok(Cow::Owned(t))
    }
}

/// A vector-valued quantity computed from one trace; its ensemble mean is
/// the estimate.
pub trait TraceStatistic: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the contribution of `trace` into `out` (zeroed, `len()` long).
    fn evaluate(&self, trace: &TraceRecord, out: &mut [f64]) -> Result<()>;
}

/// Bootstrap settings. `n_resamples = 0` skips error estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorOptions {
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            n_resamples: 200,
            seed: 0,
        }
    }
}

/// Ensemble mean of a statistic plus, optionally, its bootstrap replicates.
#[derive(Debug, Clone)]
pub struct EnsembleAverage {
    pub n_traces: usize,
    pub mean: Vec<f64>,
    /// One row per resample.
    pub replicates: Option<Array2<f64>>,
}

impl EnsembleAverage {
    /// Standard error of `Σ_k coeffs_k · mean[index_k]` from the spread of
    /// the replicates.
    pub fn combination_stderr(&self, terms: &[(usize, f64)]) -> Option<f64> {
        let reps = self.replicates.as_ref()?;
        let values: Vec<f64> = reps
            .rows()
            .into_iter()
            .map(|row| terms.iter().map(|&(k, c)| c * row[k]).sum())
            .collect();
        Some(sample_std(&values))
    }

    pub fn stderr(&self) -> Option<Vec<f64>> {
        let reps = self.replicates.as_ref()?;
        Some(
            reps.columns()
                .into_iter()
                .map(|col| sample_std(&col.to_vec()))
                .collect(),
        )
    }
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1) as f64).sqrt()
}

const CHUNK: usize = 256;

/// Multinomial resampling counts: row b holds how often each trace is
/// drawn in resample b.
fn resample_counts(n_traces: usize, n_resamples: usize, seed: u64) -> Array2<f64> {
    let mut w = Array2::<f64>::zeros((n_resamples, n_traces));
    for (b, mut row) in w.rows_mut().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        for _ in 0..n_traces {
            row[rng.random_range(0..n_traces)] += 1.0;
        }
    }
    w
}

/// Mean of `statistic` over all traces of `source`, with bootstrap
/// replicates when `options.n_resamples > 0`.
pub fn ensemble_average<S, T>(
    source: &S,
    statistic: &T,
    options: EstimatorOptions,
) -> Result<EnsembleAverage>
where
    S: TraceSource + ?Sized,
    T: TraceStatistic + ?Sized,
{
    let n = source.len();
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if options.n_resamples == 1 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least 2 resamples".into(),
        ));
    }
    let p = statistic.len();
    let weights =
        (options.n_resamples > 0).then(|| resample_counts(n, options.n_resamples, options.seed));
    let mut replicates = weights
        .as_ref()
        .map(|_| Array2::<f64>::zeros((options.n_resamples, p)));
    let mut sum = vec![0.0; p];
    let mut buf = vec![0.0; CHUNK * p];

    let mut lo = 0;
    while lo < n {
        let hi = (lo + CHUNK).min(n);
        let rows = &mut buf[..(hi - lo) * p];
        rows.fill(0.0);
        if p > 0 {
            rows.par_chunks_mut(p)
                .enumerate()
                .try_for_each(|(k, out)| {
                    let trace = source.trace(lo + k)?;
                    statistic.evaluate(&trace, out)
                })?;
        }
        for row in rows.chunks(p.max(1)) {
            for (acc, v) in sum.iter_mut().zip(row) {
                *acc += v;
            }
        }
        if let (Some(w), Some(r)) = (&weights, replicates.as_mut()) {
            let chunk = ArrayView2::from_shape((hi - lo, p), rows).expect("chunk shape");
            general_mat_mul(1.0, &w.slice(s![.., lo..hi]), &chunk, 1.0, r);
        }
        lo = hi;
    }

    let inv = 1.0 / n as f64;
    sum.iter_mut().for_each(|v| *v *= inv);
    if let Some(r) = replicates.as_mut() {
        r.mapv_inplace(|v| v * inv);
    }
    Ok(EnsembleAverage {
        n_traces: n,
        mean: sum,
        replicates,
    })
}

/// Per-component bootstrap standard errors of the ensemble mean of
/// `statistic`. A one-trace ensemble always resamples to itself and gets
/// zero error.
pub fn bootstrap_stderr<S, T>(
    source: &S,
    statistic: &T,
    n_resamples: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    S: TraceSource + ?Sized,
    T: TraceStatistic + ?Sized,
{
    if n_resamples < 2 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least 2 resamples".into(),
        ));
    }
    let avg = ensemble_average(source, statistic, EstimatorOptions { n_resamples, seed })?;
    Ok(avg.stderr().expect("replicates requested"))
}

/// Time-averaged lagged products of normalized signals, one block of lags
/// per channel pair.
#[derive(Debug, Clone)]
pub struct CorrelatorStatistic {
    pairs: Vec<(Channel, Channel)>,
    window: WindowIndices,
    calibration: Calibration,
}

impl CorrelatorStatistic {
    pub fn new(
        pairs: Vec<(Channel, Channel)>,
        window: WindowIndices,
        calibration: Calibration,
    ) -> Self {
        Self {
            pairs,
            window,
            calibration,
        }
    }

    fn normalized(&self, trace: &TraceRecord, channel: Channel) -> Vec<f64> {
        let c = &self.calibration;
        trace.samples[..self.window.span()]
            .iter()
            .map(|s| c.to_normalized(channel, s[channel.index()]))
            .collect()
    }
}

impl TraceStatistic for CorrelatorStatistic {
    fn len(&self) -> usize {
        self.pairs.len() * self.window.n_lags
    }

    fn evaluate(&self, trace: &TraceRecord, out: &mut [f64]) -> Result<()> {
        let w = self.window;
        if trace.n_samples() < w.span() {
            return Err(Error::InvalidWindow(format!(
                "trace {} has {} samples, the window needs {}",
                trace.seed,
                trace.n_samples(),
                w.span()
            )));
        }
        let signals = [
            self.normalized(trace, Channel::Z),
            self.normalized(trace, Channel::Phi),
        ];
        let scale = 1.0 / (w.end - w.start) as f64;
        for (block, &(i, j)) in out.chunks_mut(w.n_lags).zip(&self.pairs) {
            let (a, b) = (&signals[i.index()], &signals[j.index()]);
            for t in w.start..w.end {
                let x = a[t];
                for (acc, y) in block.iter_mut().zip(&b[t..t + w.n_lags]) {
                    *acc += x * y;
                }
            }
            block.iter_mut().for_each(|v| *v *= scale);
        }
        Ok(())
    }
}

/// Estimated correlators for several channel pairs on a common lag grid.
#[derive(Debug, Clone)]
pub struct CorrelatorEstimate {
    pub lags: Vec<f64>,
    pub pairs: Vec<(Channel, Channel)>,
    pub average: EnsembleAverage,
}

impl CorrelatorEstimate {
    fn block(&self, i: Channel, j: Channel) -> Result<usize> {
        self.pairs
            .iter()
            .position(|&p| p == (i, j))
            .ok_or_else(|| Error::InvalidArgument(format!("K_{i}{j} was not estimated")))
    }

    /// Values and stderr of Σ c·K_ij at every lag.
    pub fn combination(
        &self,
        terms: &[((Channel, Channel), f64)],
    ) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let n_lags = self.lags.len();
        let blocks = terms
            .iter()
            .map(|&((i, j), c)| Ok((self.block(i, j)? * n_lags, c)))
            .collect::<Result<Vec<_>>>()?;
        let mean = &self.average.mean;
        let values = (0..n_lags)
            .map(|k| blocks.iter().map(|&(b, c)| c * mean[b + k]).sum())
            .collect();
        let stderr = self.average.replicates.as_ref().map(|_| {
            (0..n_lags)
                .map(|k| {
                    let t: Vec<(usize, f64)> = blocks.iter().map(|&(b, c)| (b + k, c)).collect();
                    self.average
                        .combination_stderr(&t)
                        .expect("replicates present")
                })
                .collect()
        });
        Ok((values, stderr))
    }

    /// Σ c·K_ij on every bootstrap replicate: one row per resample, one
    /// column per lag. `None` without resampling.
    pub fn combination_replicates(
        &self,
        terms: &[((Channel, Channel), f64)],
    ) -> Result<Option<Array2<f64>>> {
        let n_lags = self.lags.len();
        let blocks = terms
            .iter()
            .map(|&((i, j), c)| Ok((self.block(i, j)? * n_lags, c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.average.replicates.as_ref().map(|reps| {
            Array2::from_shape_fn((reps.nrows(), n_lags), |(b, k)| {
                blocks
                    .iter()
                    .map(|&(start, c)| c * reps[[b, start + k]])
                    .sum()
            })
        }))
    }

    pub fn curve(&self, i: Channel, j: Channel) -> Result<CorrelatorCurve> {
        self.make_curve(CurveKind::Pair(i, j), &[((i, j), 1.0)])
    }

    /// K_zφ − K_φz with errors from the joint resampling, which keeps the
    /// correlation between the two cross-correlators.
    pub fn antisymmetric(&self) -> Result<CorrelatorCurve> {
        self.make_curve(
            CurveKind::Antisymmetric,
            &[
                ((Channel::Z, Channel::Phi), 1.0),
                ((Channel::Phi, Channel::Z), -1.0),
            ],
        )
    }

    pub fn curves(&self) -> Result<Vec<CorrelatorCurve>> {
        self.pairs.iter().map(|&(i, j)| self.curve(i, j)).collect()
    }

    fn make_curve(
        &self,
        kind: CurveKind,
        terms: &[((Channel, Channel), f64)],
    ) -> Result<CorrelatorCurve> {
        let (values, stderr) = self.combination(terms)?;
        let curve = CorrelatorCurve::new(kind, self.lags.clone(), values)?;
        match stderr {
            Some(e) => curve.with_stderr(e),
            None => Ok(curve),
        }
    }
}

/// K_ij(τ_k) = ⟨(Ĩ_i(t₁) − off_i)(Ĩ_j(t₁ + τ_k) − off_j)⟩ / [(Δ̃I_i/2)(Δ̃I_j/2)],
/// averaged over traces and over t₁ in the window, for every pair.
pub fn estimate_correlators<S: TraceSource + ?Sized>(
    source: &S,
    pairs: &[(Channel, Channel)],
    window: &EstimatorWindow,
    calibration: &Calibration,
    options: EstimatorOptions,
) -> Result<CorrelatorEstimate> {
    if source.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    calibration.check()?;
    let dt = source.dt();
    let indices = window.indices(dt, source.n_samples())?;
    let statistic = CorrelatorStatistic::new(pairs.to_vec(), indices, *calibration);
    let average = ensemble_average(source, &statistic, options)?;
    Ok(CorrelatorEstimate {
        lags: (0..indices.n_lags).map(|k| k as f64 * dt).collect(),
        pairs: pairs.to_vec(),
        average,
    })
}

pub fn estimate_correlator<S: TraceSource + ?Sized>(
    source: &S,
    i: Channel,
    j: Channel,
    window: &EstimatorWindow,
    calibration: &Calibration,
    options: EstimatorOptions,
) -> Result<CorrelatorCurve> {
    estimate_correlators(source, &[(i, j)], window, calibration, options)?.curve(i, j)
}

/// Per-time ensemble means of both channels plus the mean and mean square
/// of each trace's time average.
struct ChannelMeans {
    n_samples: usize,
}

impl TraceStatistic for ChannelMeans {
    fn len(&self) -> usize {
        2 * self.n_samples + 4
    }

    fn evaluate(&self, trace: &TraceRecord, out: &mut [f64]) -> Result<()> {
        let n = self.n_samples;
        if trace.n_samples() < n {
            return Err(Error::InvalidData(format!(
                "trace {} is shorter than the ensemble",
                trace.seed
            )));
        }
        let mut totals = [0.0; 2];
        for (k, s) in trace.samples[..n].iter().enumerate() {
            out[2 * k] = s[0];
            out[2 * k + 1] = s[1];
            totals[0] += s[0];
            totals[1] += s[1];
        }
        for c in 0..2 {
            let m = totals[c] / n as f64;
            out[2 * n + c] = m;
            out[2 * n + 2 + c] = m * m;
        }
        Ok(())
    }
}

struct GroupMeans {
    n_traces: usize,
    per_time: Vec<[f64; 2]>,
    trace_mean_var: [f64; 2],
}

fn group_means<S: TraceSource + ?Sized>(source: &S, n_samples: usize) -> Result<GroupMeans> {
    let avg = ensemble_average(
        source,
        &ChannelMeans { n_samples },
        EstimatorOptions {
            n_resamples: 0,
            seed: 0,
        },
    )?;
    let m = &avg.mean;
    let n = avg.n_traces as f64;
    let per_time = (0..n_samples).map(|k| [m[2 * k], m[2 * k + 1]]).collect();
    let mut trace_mean_var = [0.0; 2];
    for c in 0..2 {
        let mean = m[2 * n_samples + c];
        let mean_sq = m[2 * n_samples + 2 + c];
        trace_mean_var[c] = if avg.n_traces > 1 {
            ((mean_sq - mean * mean) * n / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
    }
    Ok(GroupMeans {
        n_traces: avg.n_traces,
        per_time,
        trace_mean_var,
    })
}

fn common_length<S: TraceSource + ?Sized>(plus: &S, minus: &S) -> Result<(usize, f64)> {
    if plus.is_empty() || minus.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let dt = plus.dt();
    if (dt - minus.dt()).abs() > 1e-12 * dt.abs() {
        return Err(Error::InvalidData(
            "groups use different sampling steps".into(),
        ));
    }
    let n = plus.n_samples().min(minus.n_samples());
    if n == 0 {
        return Err(Error::InvalidData("traces have no samples".into()));
    }
    Ok((n, dt))
}

/// Offsets from the symmetric combination S(t) = [⟨Ĩ⟩₊(t) + ⟨Ĩ⟩₋(t)]/2 of
/// two groups started in opposite states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetEstimate {
    /// Time and ensemble mean of S(t), per channel (raw units).
    pub offset: [f64; 2],
    /// Standard error from the spread of per-trace time averages.
    pub stderr: [f64; 2],
    /// Standard deviation of S(t) over time, a diagnostic of drifts.
    pub time_variation: [f64; 2],
}

pub fn estimate_offsets<S: TraceSource + ?Sized>(plus: &S, minus: &S) -> Result<OffsetEstimate> {
    let (n, _) = common_length(plus, minus)?;
    let p = group_means(plus, n)?;
    let m = group_means(minus, n)?;
    let mut out = OffsetEstimate {
        offset: [0.0; 2],
        stderr: [0.0; 2],
        time_variation: [0.0; 2],
    };
    for c in 0..2 {
        let symmetric: Vec<f64> = p
            .per_time
            .iter()
            .zip(&m.per_time)
            .map(|(a, b)| 0.5 * (a[c] + b[c]))
            .collect();
        let mean = symmetric.iter().sum::<f64>() / n as f64;
        out.offset[c] = mean;
        out.stderr[c] = 0.5
            * (p.trace_mean_var[c] / p.n_traces as f64 + m.trace_mean_var[c] / m.n_traces as f64)
                .sqrt();
        out.time_variation[c] = (symmetric
            .iter()
            .map(|s| (s - mean) * (s - mean))
            .sum::<f64>()
            / n as f64)
            .sqrt();
    }
    debug_assert!(out.offset.iter().all(|v| v.is_finite()));
    Ok(out)
}

/// Least-squares responses from the difference D_i(t) = ⟨Ĩ_i⟩₊ − ⟨Ĩ_i⟩₋.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseFit {
    /// Δ̃I_z, Δ̃I_φ (raw units per unit normalized signal).
    pub response: [f64; 2],
    pub stderr: [f64; 2],
    /// √Σ residual² per channel.
    pub residual_norm: [f64; 2],
    pub n_points: usize,
}

/// Fits D_i(t) = Δ̃I_i · n_i · r_av(t), where the two groups start at ±
/// the calibration axis (the bisector of the measurement directions) and
/// r_av is the averaged evolution under `setup`. D_i is sampled at the
/// start of every sample interval over the common trace length.
pub fn calibrate_response<S: TraceSource + ?Sized>(
    plus: &S,
    minus: &S,
    setup: &MeasurementSetup,
) -> Result<ResponseFit> {
    let (n, dt) = common_length(plus, minus)?;
    let p = group_means(plus, n)?;
    let m = group_means(minus, n)?;
    let generator = build_generator(setup);
    let start = BlochVector::axis(setup.calibration_axis());
    let mut fit = ResponseFit {
        response: [0.0; 2],
        stderr: [0.0; 2],
        residual_norm: [0.0; 2],
        n_points: n,
    };
    let model_paths: Vec<BlochVector> = (0..n)
        .map(|k| generator.propagate(start, k as f64 * dt))
        .collect();
    for channel in Channel::BOTH {
        let c = channel.index();
        let angle = setup.channel(channel).angle;
        let model: Vec<f64> = model_paths.iter().map(|r| r.along(angle)).collect();
        let data: Vec<f64> = p
            .per_time
            .iter()
            .zip(&m.per_time)
            .map(|(a, b)| a[c] - b[c])
            .collect();
        let smm: f64 = model.iter().map(|v| v * v).sum();
        if !(smm > 1e-12 * n as f64) {
            return Err(Error::UnidentifiableResponse(format!(
                "the {channel} signal does not depend on the initial state"
            )));
        }
        let response = model.iter().zip(&data).map(|(a, b)| a * b).sum::<f64>() / smm;
        let rss: f64 = model
            .iter()
            .zip(&data)
            .map(|(a, b)| (b - response * a).powi(2))
            .sum();
        let stderr = if n > 1 {
            (rss / (n - 1) as f64 / smm).sqrt()
        } else {
            0.0
        };
        if !(response > 0.0) || response < 3.0 * stderr {
            return Err(Error::UnidentifiableResponse(format!(
                "{channel} response {response:.4} ± {stderr:.4} is not resolved from zero"
            )));
        }
        fit.response[c] = response;
        fit.stderr[c] = stderr;
        fit.residual_norm[c] = rss.sqrt();
    }
    Ok(fit)
}
