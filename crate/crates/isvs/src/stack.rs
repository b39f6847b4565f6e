//! Camera frame stacks and their on-disk format.
//!
//! A stack is a sequence of frames from one acquisition: every frame shares the
//! pixel count, exposure, and frame period. The `kind` records what was in front
//! of the camera so downstream stages can refuse mismatched inputs (a contrast
//! estimate from a dark stack is meaningless, not just wrong).
//!
//! File format: one JSON header line, then one CSV line per frame with
//! `n_pixels` values. Values are written with the shortest representation that
//! round-trips, so write/read is lossless.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the camera was looking at when the stack was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackKind {
    /// Sample and reference arms interfering on the sensor.
    RawInterference,
    /// Reference arm only, sample blocked.
    ReferenceOnly,
    /// Sample arm only, reference blocked.
    SampleOnly,
    /// Both arms blocked: offset and read noise only.
    Dark,
    /// Raw interference after reference subtraction and gain calibration.
    Calibrated,
}

impl StackKind {
    pub const ALL: [StackKind; 5] = [
        StackKind::RawInterference,
        StackKind::ReferenceOnly,
        StackKind::SampleOnly,
        StackKind::Dark,
        StackKind::Calibrated,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StackKind::RawInterference => "raw_interference",
            StackKind::ReferenceOnly => "reference_only",
            StackKind::SampleOnly => "sample_only",
            StackKind::Dark => "dark",
            StackKind::Calibrated => "calibrated",
        }
    }
}

impl fmt::Display for StackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StackKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown stack kind {s:?}")))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StackHeader {
    kind: StackKind,
    n_pixels: usize,
    n_frames: usize,
    exposure_us: f64,
    frame_period_us: f64,
}

/// A stack of same-shaped camera frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    kind: StackKind,
    exposure_us: f64,
    frame_period_us: f64,
    n_pixels: usize,
    /// Frame-major: frame `f` occupies `[f * n_pixels, (f + 1) * n_pixels)`.
    data: Vec<f64>,
}

impl FrameStack {
    pub fn new(kind: StackKind, exposure_us: f64, frame_period_us: f64, n_pixels: usize) -> Self {
        FrameStack {
            kind,
            exposure_us,
            frame_period_us,
            n_pixels,
            data: Vec::new(),
        }
    }

    pub fn kind(&self) -> StackKind {
        self.kind
    }

    pub fn exposure_us(&self) -> f64 {
        self.exposure_us
    }

    pub fn frame_period_us(&self) -> f64 {
        self.frame_period_us
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn n_frames(&self) -> usize {
        if self.n_pixels == 0 {
            0
        } else {
            self.data.len() / self.n_pixels
        }
    }

    /// Fails unless the stack kind matches; `context` names the operation.
    pub fn expect_kind(&self, expected: StackKind, context: &'static str) -> Result<()> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(Error::StackKind {
                expected: expected.as_str(),
                got: format!("{} (in {context})", self.kind),
            })
        }
    }

    pub fn push_frame(&mut self, frame: &[f64]) -> Result<()> {
        if frame.len() != self.n_pixels {
            return Err(Error::DimensionMismatch {
                context: "push_frame",
                left: self.n_pixels,
                right: frame.len(),
            });
        }
        self.data.extend_from_slice(frame);
        Ok(())
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        &self.data[index * self.n_pixels..(index + 1) * self.n_pixels]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_pixels)
    }

    pub fn value(&self, frame: usize, pixel: usize) -> f64 {
        self.data[frame * self.n_pixels + pixel]
    }

    /// Time series of one pixel across frames.
    pub fn pixel_series(&self, pixel: usize) -> Vec<f64> {
        (0..self.n_frames()).map(|f| self.value(f, pixel)).collect()
    }

    /// Per-pixel mean over frames, tagged with the source kind.
    pub fn mean_frame(&self) -> Result<MeanFrame> {
        let n_frames = self.n_frames();
        if n_frames == 0 {
            return Err(Error::NotEnoughSamples(
                "mean_frame needs at least one frame".into(),
            ));
        }
        let mut values = vec![0.0; self.n_pixels];
        for frame in self.frames() {
            for (acc, v) in values.iter_mut().zip(frame) {
                *acc += v;
            }
        }
        for v in &mut values {
            *v /= n_frames as f64;
        }
        Ok(MeanFrame {
            values,
            source_kind: self.kind,
        })
    }

    /// Per-pixel sample variance (n - 1) over frames.
    pub fn temporal_variance_frame(&self) -> Result<Vec<f64>> {
        let n_frames = self.n_frames();
        if n_frames < 2 {
            return Err(Error::NotEnoughSamples(
                "temporal variance needs at least two frames".into(),
            ));
        }
        let mean = self.mean_frame()?.values;
        let mut var = vec![0.0; self.n_pixels];
        for frame in self.frames() {
            for ((acc, v), m) in var.iter_mut().zip(frame).zip(&mean) {
                let d = v - m;
                *acc += d * d;
            }
        }
        for v in &mut var {
            *v /= (n_frames - 1) as f64;
        }
        Ok(var)
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        let header = StackHeader {
            kind: self.kind,
            n_pixels: self.n_pixels,
            n_frames: self.n_frames(),
            exposure_us: self.exposure_us,
            frame_period_us: self.frame_period_us,
        };
        let header = serde_json::to_string(&header)
            .map_err(|e| Error::Parse(format!("stack header serialization failed: {e}")))?;
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for frame in self.frames() {
            line.clear();
            for (k, v) in frame.iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                // Default float formatting is shortest-round-trip.
                line.push_str(&format!("{v}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<FrameStack> {
        Self::read(&mut BufReader::new(File::open(path)?))
    }

    pub fn read(r: &mut impl Read) -> Result<FrameStack> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::Parse("empty stack file".into()))??;
        let header: StackHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::Parse(format!("bad stack header: {e}")))?;
        let mut stack = FrameStack::new(
            header.kind,
            header.exposure_us,
            header.frame_period_us,
            header.n_pixels,
        );
        stack.data.reserve(header.n_pixels * header.n_frames);
        let mut frame = Vec::with_capacity(header.n_pixels);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            frame.clear();
            for tok in line.split(',') {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|e| Error::Parse(format!("row {}: bad value {tok:?}: {e}", row + 1)))?;
                frame.push(v);
            }
            if frame.len() != header.n_pixels {
                return Err(Error::Parse(format!(
                    "row {}: expected {} values, got {}",
                    row + 1,
                    header.n_pixels,
                    frame.len()
                )));
            }
            stack.data.extend_from_slice(&frame);
        }
        if stack.n_frames() != header.n_frames {
            return Err(Error::Parse(format!(
                "header promised {} frames, file holds {}",
                header.n_frames,
                stack.n_frames()
            )));
        }
        Ok(stack)
    }
}

/// Per-pixel mean over a stack, carrying the stack kind it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFrame {
    pub values: Vec<f64>,
    pub source_kind: StackKind,
}

impl MeanFrame {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}
