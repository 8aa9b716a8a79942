// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

use std::borrow::Cow;

use crate::error::Result;
use crate::trajectory::TraceRecord;

/// Random-access collection of equally sampled traces. Implemented by
/// in-memory ensembles, by ensembles regenerated on demand, and by
/// adapters that transform the traces of another source.
pub trait TraceSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sampling step (µs).
    fn dt(&self) -> f64;

    /// Samples per trace.
    fn n_samples(&self) -> usize;

    fn trace(&self, index: usize) -> Result<Cow<'_, TraceRecord>>;
}

impl TraceSource for [TraceRecord] {
    fn len(&self) -> usize {
        <[TraceRecord]>::len(self)
    }

    fn dt(&self) -> f64 {
        self.first().map_or(0.0, |t| t.dt)
    }

    /// Length of the shortest trace.
    fn n_samples(&self) -> usize {
        self.iter().map(TraceRecord::n_samples).min().unwrap_or(0)
    }

    fn trace(&self, index: usize) -> Result<Cow<'_, TraceRecord>> {
        Ok(Cow::Borrowed(&self[index]))
    }
}

impl TraceSource for Vec<TraceRecord> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn dt(&self) -> f64 {
        TraceSource::dt(self.as_slice())
    }

    fn n_samples(&self) -> usize {
        TraceSource::n_samples(self.as_slice())
    }

    fn trace(&self, index: usize) -> Result<Cow<'_, TraceRecord>> {
        Ok(Cow::Borrowed(&self[index]))
    }
}

impl<S: TraceSource + ?Sized> TraceSource for &S {
    fn len(&self) -> usize {
        (**self).len()
    }

    fn dt(&self) -> f64 {
        (**self).dt()
    }

    fn n_samples(&self) -> usize {
        (**self).n_samples()
    }

    fn trace(&self, index: usize) -> Result<Cow<'_, TraceRecord>> {
        (**self).trace(index)
    }
}
