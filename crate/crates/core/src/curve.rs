// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Correlator curves and their CSV representation.
//!
//! A CSV holds several curves on a shared lag grid: a `tau` column, one
//! `K_<label>` column per curve and optional `err_<label>` columns, with
//! labels `zz`, `zphi`, `phiz`, `phiphi` and `antisym`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveKind {
    /// K_ij(τ) = ⟨I_i(t) I_j(t + τ)⟩.
    Pair(Channel, Channel),
    /// K_zφ(τ) − K_φz(τ).
    Antisymmetric,
}

impl CurveKind {
    pub const PAIRS: [CurveKind; 4] = [
        CurveKind::Pair(Channel::Z, Channel::Z),
        CurveKind::Pair(Channel::Z, Channel::Phi),
        CurveKind::Pair(Channel::Phi, Channel::Z),
        CurveKind::Pair(Channel::Phi, Channel::Phi),
    ];

    pub fn label(self) -> &'static str {
        match self {
            CurveKind::Pair(Channel::Z, Channel::Z) => "zz",
            CurveKind::Pair(Channel::Z, Channel::Phi) => "zphi",
            CurveKind::Pair(Channel::Phi, Channel::Z) => "phiz",
            CurveKind::Pair(Channel::Phi, Channel::Phi) => "phiphi",
            CurveKind::Antisymmetric => "antisym",
        }
    }

    pub fn parse(label: &str) -> Result<Self> {
        Self::PAIRS
            .into_iter()
            .chain([CurveKind::Antisymmetric])
            .find(|k| k.label() == label)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown correlator '{label}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorCurve {
    pub kind: CurveKind,
    /// Lags τ (µs), strictly increasing and nonnegative.
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    /// One standard error per lag, when known.
    pub stderr: Option<Vec<f64>>,
}

impl CorrelatorCurve {
    pub fn new(kind: CurveKind, lags: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_lags(&lags)?;
        if values.len() != lags.len() {
            return Err(Error::InvalidData(format!(
                "{} values for {} lags",
                values.len(),
                lags.len()
            )));
        }
        Ok(Self {
            kind,
            lags,
            values,
            stderr: None,
        })
    }

    pub fn with_stderr(mut self, stderr: Vec<f64>) -> Result<Self> {
        if stderr.len() != self.lags.len() {
            return Err(Error::InvalidData(format!(
                "{} errors for {} lags",
                stderr.len(),
                self.lags.len()
            )));
        }
        self.stderr = Some(stderr);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    /// K_zφ − K_φz from the two cross-correlators on the same grid. Errors
    /// are combined in quadrature, which ignores their (positive)
    /// correlation and so overstates the uncertainty.
    pub fn antisymmetric(k_zphi: &CorrelatorCurve, k_phiz: &CorrelatorCurve) -> Result<Self> {
        if k_zphi.lags != k_phiz.lags {
            return Err(Error::InvalidData("curves use different lag grids".into()));
        }
        let values = k_zphi
            .values
            .iter()
            .zip(&k_phiz.values)
            .map(|(a, b)| a - b)
            .collect();
        let mut out = Self::new(CurveKind::Antisymmetric, k_zphi.lags.clone(), values)?;
        if let (Some(ea), Some(eb)) = (&k_zphi.stderr, &k_phiz.stderr) {
            out.stderr = Some(ea.iter().zip(eb).map(|(a, b)| a.hypot(*b)).collect());
        }
        Ok(out)
    }

    /// Indices of the lags inside `[start, end]`, with a small tolerance
    /// for grid rounding.
    pub fn indices_in(&self, start: f64, end: f64) -> Vec<usize> {
        let slack = 1e-9 * start.abs().max(end.abs()).max(1.0);
        (0..self.lags.len())
            .filter(|&k| self.lags[k] >= start - slack && self.lags[k] <= end + slack)
            .collect()
    }
}

fn check_lags(lags: &[f64]) -> Result<()> {
    if lags.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidData(
            "lags must be finite and nonnegative".into(),
        ));
    }
    if lags.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidData(
            "lags must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Lags k·dt for k = 0..=round(max_lag/dt).
pub fn lag_grid(dt: f64, max_lag: f64) -> Vec<f64> {
    let n = (max_lag / dt).round() as usize;
    (0..=n).map(|k| k as f64 * dt).collect()
}

pub fn write_curves_csv<W: Write>(out: W, curves: &[CorrelatorCurve]) -> Result<()> {
    let Some(first) = curves.first() else {
        return Err(Error::InvalidArgument("no curves to write".into()));
    };
    if curves.iter().any(|c| c.lags != first.lags) {
        return Err(Error::InvalidData("curves use different lag grids".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["tau".to_string()];
    header.extend(curves.iter().map(|c| format!("K_{}", c.kind.label())));
    header.extend(
        curves
            .iter()
            .filter(|c| c.stderr.is_some())
            .map(|c| format!("err_{}", c.kind.label())),
    );
    w.write_record(&header)?;
    for (k, tau) in first.lags.iter().enumerate() {
        let mut row = vec![tau.to_string()];
        row.extend(curves.iter().map(|c| c.values[k].to_string()));
        row.extend(
            curves
                .iter()
                .filter_map(|c| c.stderr.as_ref())
                .map(|e| e[k].to_string()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curves_csv<R: Read>(input: R) -> Result<Vec<CorrelatorCurve>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.get(0) != Some("tau") {
        return Err(Error::Format("first CSV column must be 'tau'".into()));
    }
    let mut values: Vec<(CurveKind, usize)> = Vec::new();
    let mut errors: Vec<(CurveKind, usize)> = Vec::new();
    for (col, name) in header.iter().enumerate().skip(1) {
        if let Some(label) = name.strip_prefix("K_") {
            values.push((CurveKind::parse(label)?, col));
        } else if let Some(label) = name.strip_prefix("err_") {
            errors.push((CurveKind::parse(label)?, col));
        } else {
            return Err(Error::Format(format!("unexpected CSV column '{name}'")));
        }
    }
    let mut lags = Vec::new();
    let mut cols = vec![Vec::new(); header.len()];
    for record in r.records() {
        let record = record?;
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("not a number: '{field}'")))?;
            if col == 0 {
                lags.push(v);
            } else {
                cols[col].push(v);
            }
        }
    }
    let mut curves = Vec::with_capacity(values.len());
    for (kind, col) in values {
        let mut c = CorrelatorCurve::new(kind, lags.clone(), std::mem::take(&mut cols[col]))?;
        if let Some(&(_, ecol)) = errors.iter().find(|(k, _)| *k == kind) {
            c = c.with_stderr(std::mem::take(&mut cols[ecol]))?;
        }
        curves.push(c);
    }
    Ok(curves)
}

pub fn write_curves_csv_path(path: impl AsRef<Path>, curves: &[CorrelatorCurve]) -> Result<()> {
    write_curves_csv(BufWriter::new(File::create(path)?), curves)
}

pub fn read_curves_csv_path(path: impl AsRef<Path>) -> Result<Vec<CorrelatorCurve>> {
    read_curves_csv(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(kind: CurveKind, scale: f64) -> CorrelatorCurve {
        let lags = lag_grid(0.1, 0.5);
        let values = lags.iter().map(|t| scale * (-t).exp()).collect();
        CorrelatorCurve::new(kind, lags, values).unwrap()
    }

    #[test]
    fn lag_grid_includes_both_ends() {
        let g = lag_grid(0.004, 2.0);
        assert_eq!(g.len(), 501);
        assert_eq!(g[0], 0.0);
        assert!((g[500] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unordered_lags() {
        assert!(
            CorrelatorCurve::new(CurveKind::Antisymmetric, vec![0.0, 0.0], vec![1.0, 1.0]).is_err()
        );
        assert!(CorrelatorCurve::new(CurveKind::Antisymmetric, vec![-1.0], vec![1.0]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let a = curve(CurveKind::PAIRS[0], 1.0);
        let b = curve(CurveKind::PAIRS[1], 0.3)
            .with_stderr(vec![0.01, 0.02, 0.03, 0.04, 0.05, 0.06])
            .unwrap();
        let mut buf = Vec::new();
        write_curves_csv(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("tau,K_zz,K_zphi,err_zphi\n"));
        let back = read_curves_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn antisymmetric_combines_errors_in_quadrature() {
        let a = curve(CurveKind::PAIRS[1], 1.0)
            .with_stderr(vec![0.3; 6])
            .unwrap();
        let b = curve(CurveKind::PAIRS[2], 0.5)
            .with_stderr(vec![0.4; 6])
            .unwrap();
        let d = CorrelatorCurve::antisymmetric(&a, &b).unwrap();
        assert!((d.values[0] - 0.5).abs() < 1e-15);
        assert!((d.stderr.unwrap()[3] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_columns_are_rejected() {
        assert!(read_curves_csv("tau,K_xy\n0,1\n".as_bytes()).is_err());
        assert!(read_curves_csv("t,K_zz\n0,1\n".as_bytes()).is_err());
    }
}
