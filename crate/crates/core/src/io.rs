// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

//! Trace files.
//!
//! Binary QTRC layout (little-endian):
//!
//! ```text
//! "QTRC" | version u32 = 1 | n_traces u64 | n_samples u64 | dt f64
//! | setup JSON length u32 | setup JSON (UTF-8)
//! | n_traces × ( seed u64 | projections u64 | n_samples × (I_z f64, I_phi f64) )
//! ```
//!
//! The CSV export has one row per sample with columns `trace,t,I_z,I_phi`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trajectory::TraceRecord;

pub const QTRC_MAGIC: &[u8; 4] = b"QTRC";
pub const QTRC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct QtrcHeader {
    pub n_traces: u64,
    pub n_samples: u64,
    pub dt: f64,
    /// Setup document the traces were generated from, as JSON text.
    pub setup_json: String,
}

/// Streams traces into a QTRC file. The header announces the trace count,
/// so exactly that many traces must be written before [`finish`](Self::finish).
pub struct QtrcWriter<W: Write> {
    out: BufWriter<W>,
    header: QtrcHeader,
    written: u64,
}

impl QtrcWriter<File> {
    pub fn create(path: impl AsRef<Path>, header: QtrcHeader) -> Result<Self> {
        Self::new(File::create(path)?, header)
    }
}

impl<W: Write> QtrcWriter<W> {
    pub fn new(inner: W, header: QtrcHeader) -> Result<Self> {
        let json_len = u32::try_from(header.setup_json.len())
            .map_err(|_| Error::Format("setup JSON longer than 4 GiB".into()))?;
        let mut out = BufWriter::new(inner);
        out.write_all(QTRC_MAGIC)?;
        out.write_all(&QTRC_VERSION.to_le_bytes())?;
        out.write_all(&header.n_traces.to_le_bytes())?;
        out.write_all(&header.n_samples.to_le_bytes())?;
        out.write_all(&header.dt.to_le_bytes())?;
        out.write_all(&json_len.to_le_bytes())?;
        out.write_all(header.setup_json.as_bytes())?;
        Ok(Self {
            out,
            header,
            written: 0,
        })
    }

    pub fn write_trace(&mut self, trace: &TraceRecord) -> Result<()> {
        if self.written == self.header.n_traces {
            return Err(Error::Format(format!(
                "header announced {} traces",
                self.header.n_traces
            )));
        }
        if trace.samples.len() as u64 != self.header.n_samples {
            return Err(Error::Format(format!(
                "trace {} has {} samples, header announced {}",
                trace.seed,
                trace.samples.len(),
                self.header.n_samples
            )));
        }
        self.out.write_all(&trace.seed.to_le_bytes())?;
        self.out.write_all(&trace.projections.to_le_bytes())?;
        for [a, b] in &trace.samples {
            self.out.write_all(&a.to_le_bytes())?;
            self.out.write_all(&b.to_le_bytes())?;
        }
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.n_traces {
            return Err(Error::Format(format!(
                "wrote {} traces, header announced {}",
                self.written, self.header.n_traces
            )));
        }
        self.out.flush()?;
        self.out.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("file is truncated".into())
        } else {
            Error::Io(e)
        }
    })?;
    Ok(buf)
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub fn read_qtrc_header(r: &mut impl Read) -> Result<QtrcHeader> {
    if &read_array::<4>(r)? != QTRC_MAGIC {
        return Err(Error::Format("not a QTRC file".into()));
    }
    let version = u32::from_le_bytes(read_array(r)?);
    if version != QTRC_VERSION {
        return Err(Error::Format(format!("unsupported QTRC version {version}")));
    }
    let n_traces = read_u64(r)?;
    let n_samples = read_u64(r)?;
    let dt = read_f64(r)?;
    let json_len = u32::from_le_bytes(read_array(r)?) as usize;
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json)
        .map_err(|_| Error::Format("file is truncated".into()))?;
    let setup_json =
        String::from_utf8(json).map_err(|_| Error::Format("setup JSON is not UTF-8".into()))?;
    Ok(QtrcHeader {
        n_traces,
        n_samples,
        dt,
        setup_json,
    })
}

pub fn read_qtrc_from(mut r: impl Read) -> Result<(QtrcHeader, Vec<TraceRecord>)> {
    let header = read_qtrc_header(&mut r)?;
    let n_samples = usize::try_from(header.n_samples)
        .map_err(|_| Error::Format("sample count does not fit in memory".into()))?;
    let mut traces = Vec::new();
    for _ in 0..header.n_traces {
        let seed = read_u64(&mut r)?;
        let projections = read_u64(&mut r)?;
        let mut samples = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let a = read_f64(&mut r)?;
            let b = read_f64(&mut r)?;
            samples.push([a, b]);
        }
        traces.push(TraceRecord {
            dt: header.dt,
            samples,
            seed,
            projections,
            states: None,
        });
    }
    Ok((header, traces))
}

pub fn read_qtrc(path: impl AsRef<Path>) -> Result<(QtrcHeader, Vec<TraceRecord>)> {
    read_qtrc_from(BufReader::new(File::open(path)?))
}

pub fn write_qtrc(path: impl AsRef<Path>, setup_json: &str, traces: &[TraceRecord]) -> Result<()> {
    let first = traces.first();
    let header = QtrcHeader {
        n_traces: traces.len() as u64,
        n_samples: first.map_or(0, |t| t.samples.len() as u64),
        dt: first.map_or(0.0, |t| t.dt),
        setup_json: setup_json.to_owned(),
    };
    let mut writer = QtrcWriter::create(path, header)?;
    for trace in traces {
        writer.write_trace(trace)?;
    }
    writer.finish()?;
    Ok(())
}

pub fn write_traces_csv(out: impl Write, traces: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trace", "t", "I_z", "I_phi"])?;
    for (index, trace) in traces.iter().enumerate() {
        for (k, [a, b]) in trace.samples.iter().enumerate() {
            w.write_record([
                index.to_string(),
                (k as f64 * trace.dt).to_string(),
                a.to_string(),
                b.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV export back. The step is recovered from the first two
/// sample times of each trace, so every trace needs at least two samples.
pub fn read_traces_csv(input: impl Read) -> Result<Vec<TraceRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let expected = ["trace", "t", "I_z", "I_phi"];
    if headers.iter().ne(expected) {
        return Err(Error::Format(format!(
            "expected CSV header {}, found {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut traces: Vec<(Vec<f64>, Vec<[f64; 2]>)> = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let parse = |i: usize| -> Result<f64> {
            row[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("row {}: cannot parse '{}'", line + 2, &row[i])))
        };
        let index: usize = row[0]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bad trace index", line + 2)))?;
        if index > traces.len() {
            return Err(Error::Format(format!(
                "row {}: trace {} appears before trace {}",
                line + 2,
                index,
                traces.len()
            )));
        }
        if index == traces.len() {
            traces.push((Vec::new(), Vec::new()));
        }
        let (times, samples) = &mut traces[index];
        times.push(parse(1)?);
        samples.push([parse(2)?, parse(3)?]);
    }
    traces
        .into_iter()
        .enumerate()
        .map(|(index, (times, samples))| {
            if times.len() < 2 {
                return Err(Error::Format(format!(
                    "trace {index} has fewer than two samples; cannot infer dt"
                )));
            }
            Ok(TraceRecord {
                dt: times[1] - times[0],
                samples,
                seed: index as u64,
                projections: 0,
                states: None,
            })
        })
        .collect()
}
