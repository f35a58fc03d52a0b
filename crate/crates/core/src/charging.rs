//! Time-SoC charging curves and their secant approximations.
//!
//! SoC is a fraction of the EV battery capacity. A [`ChargeCurve`] is a
//! sampled concave map from charging time (starting at an empty battery) to
//! SoC, read as the piecewise-linear interpolation of its samples. A
//! [`ChargingModel`] under-approximates the curve with secants through
//! points on it, so it never promises more energy than the curve delivers.

use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

/// Time to charge from empty to full with the built-in curve, in seconds.
pub const DEFAULT_FULL_CHARGE_S: f64 = 5400.0;
/// Shape parameter of the built-in exponential curve.
pub const DEFAULT_CURVE_LAMBDA: f64 = 3.0;
const BUILTIN_SAMPLE_STEP_S: f64 = 5.0;
const SLOPE_TOLERANCE: f64 = 1e-9;
const ENDPOINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ChargingError {
    #[error("invalid charge curve: {0}")]
    InvalidCurve(String),
    #[error("segment count must be at least 1")]
    InvalidSegments,
    #[error("invalid SoC range {from} -> {to}")]
    InvalidRange { from: f64, to: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed curve file: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargeCurve {
    samples: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
struct CurveRow {
    time_s: f64,
    soc: f64,
}

impl ChargeCurve {
    /// Validates and wraps `(time_s, soc)` samples. The first sample must be
    /// `(0, 0)`, the last must have SoC 1, both coordinates must increase
    /// strictly and secant slopes must not increase.
    pub fn new(mut samples: Vec<(f64, f64)>) -> Result<Self, ChargingError> {
        if samples.len() < 2 {
            return Err(ChargingError::InvalidCurve("need at least two samples".into()));
        }
        if samples.iter().any(|(t, s)| !t.is_finite() || !s.is_finite()) {
            return Err(ChargingError::InvalidCurve("non-finite sample".into()));
        }
        let (t0, s0) = samples[0];
        if t0.abs() > ENDPOINT_TOLERANCE || s0.abs() > ENDPOINT_TOLERANCE {
            return Err(ChargingError::InvalidCurve(format!("first sample must be (0, 0), got ({t0}, {s0})")));
        }
        let last = samples.len() - 1;
        if (samples[last].1 - 1.0).abs() > ENDPOINT_TOLERANCE {
            return Err(ChargingError::InvalidCurve(format!(
                "last sample must reach SoC 1, got {}",
                samples[last].1
            )));
        }
        samples[0] = (0.0, 0.0);
        samples[last].1 = 1.0;
        let mut prev_slope = f64::INFINITY;
        for w in samples.windows(2) {
            let (dt, ds) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            if dt <= 0.0 || ds <= 0.0 {
                return Err(ChargingError::InvalidCurve(format!(
                    "samples must increase strictly in time and SoC near t = {}",
                    w[1].0
                )));
            }
            let slope = ds / dt;
            if slope > prev_slope + SLOPE_TOLERANCE {
                return Err(ChargingError::InvalidCurve(format!("curve is not concave near t = {}", w[0].0)));
            }
            prev_slope = slope;
        }
        Ok(ChargeCurve { samples })
    }

    /// `soc(t) = (1 - exp(-lambda t / T)) / (1 - exp(-lambda))` sampled every
    /// `step_s` seconds (plus the end point).
    pub fn exponential(full_time_s: f64, lambda: f64, step_s: f64) -> Self {
        let norm = 1.0 - (-lambda).exp();
        let n = (full_time_s / step_s).ceil() as usize;
        let mut samples = Vec::with_capacity(n + 1);
        for i in 0..n {
            let t = i as f64 * step_s;
            samples.push((t, (1.0 - (-lambda * t / full_time_s).exp()) / norm));
        }
        samples.push((full_time_s, 1.0));
        ChargeCurve::new(samples).expect("exponential curve is concave")
    }

    /// The built-in 90-minute curve.
    pub fn builtin() -> Self {
        Self::exponential(DEFAULT_FULL_CHARGE_S, DEFAULT_CURVE_LAMBDA, BUILTIN_SAMPLE_STEP_S)
    }

    /// Reads a CSV with header `time_s,soc`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, ChargingError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut samples = Vec::new();
        for row in rdr.deserialize() {
            let row: CurveRow = row?;
            samples.push((row.time_s, row.soc));
        }
        Self::new(samples)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, ChargingError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn full_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// SoC after charging an empty battery for `t` seconds.
    pub fn soc_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.full_time() {
            return 1.0;
        }
        let idx = s.partition_point(|p| p.0 <= t);
        let (a, b) = (s[idx - 1], s[idx]);
        a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0)
    }

    /// Charging time from empty to `soc`.
    pub fn time_at(&self, soc: f64) -> f64 {
        let s = &self.samples;
        if soc <= 0.0 {
            return 0.0;
        }
        if soc >= 1.0 {
            return self.full_time();
        }
        let idx = s.partition_point(|p| p.1 <= soc);
        let (a, b) = (s[idx - 1], s[idx]);
        a.0 + (b.0 - a.0) * (soc - a.1) / (b.1 - a.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Piecewise,
}

/// One secant line `soc = slope * t + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChargingModel {
    kind: ModelKind,
    segments: Vec<Segment>,
    breakpoints: Vec<(f64, f64)>,
}

/// Secant approximation with `r` segments and breakpoints at SoC `i / r`.
/// `r = 1` gives the linear model.
pub fn build_approximation(curve: &ChargeCurve, r: usize) -> Result<ChargingModel, ChargingError> {
    if r == 0 {
        return Err(ChargingError::InvalidSegments);
    }
    let breakpoints: Vec<(f64, f64)> = (0..=r)
        .map(|i| {
            let soc = i as f64 / r as f64;
            (curve.time_at(soc), soc)
        })
        .collect();
    let segments = breakpoints
        .windows(2)
        .map(|w| {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            Segment { slope, intercept: w[0].1 - slope * w[0].0 }
        })
        .collect();
    let kind = if r == 1 { ModelKind::Linear } else { ModelKind::Piecewise };
    Ok(ChargingModel { kind, segments, breakpoints })
}

impl ChargingModel {
    /// Linear model charging at a constant rate, full in `full_time_s`.
    pub fn linear(full_time_s: f64) -> Self {
        ChargingModel {
            kind: ModelKind::Linear,
            segments: vec![Segment { slope: 1.0 / full_time_s, intercept: 0.0 }],
            breakpoints: vec![(0.0, 0.0), (full_time_s, 1.0)],
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn full_time(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1].0
    }

    /// Seconds per unit SoC of the linear model (the full-range secant).
    pub fn slope_h(&self) -> f64 {
        self.full_time()
    }

    /// Largest charging rate of any segment, in SoC per second.
    pub fn max_rate(&self) -> f64 {
        self.segments.iter().map(|s| s.slope).fold(0.0, f64::max)
    }

    /// Largest value any secant line takes on `[0, full_time]`.
    pub fn max_line_value(&self) -> f64 {
        let t = self.full_time();
        self.segments
            .iter()
            .map(|s| (s.slope * t + s.intercept).max(s.intercept))
            .fold(0.0, f64::max)
    }

    fn segment_for_time(&self, t: f64) -> usize {
        let idx = self.breakpoints.partition_point(|p| p.0 <= t);
        idx.clamp(1, self.segments.len()) - 1
    }

    /// Index of the segment whose SoC range contains `soc` (the lowest one at
    /// a shared breakpoint).
    pub fn segment_for_soc(&self, soc: f64) -> usize {
        let idx = self.breakpoints.partition_point(|p| p.1 < soc);
        idx.clamp(1, self.segments.len()) - 1
    }

    /// Model SoC after charging an empty battery for `t` seconds.
    pub fn soc_at(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= self.full_time() {
            return 1.0;
        }
        let seg = self.segments[self.segment_for_time(t)];
        seg.slope * t + seg.intercept
    }

    /// Charging time from empty to `soc` under the model.
    pub fn soc_to_time(&self, soc: f64) -> f64 {
        if soc <= 0.0 {
            return 0.0;
        }
        if soc >= 1.0 {
            return self.full_time();
        }
        let seg = self.segments[self.segment_for_soc(soc)];
        (soc - seg.intercept) / seg.slope
    }

    /// Time to charge from `from` to `to`.
    pub fn charge_duration(&self, from: f64, to: f64) -> Result<f64, ChargingError> {
        let tol = 1e-12;
        if !(from >= -tol && to <= 1.0 + tol && from <= to + tol) {
            return Err(ChargingError::InvalidRange { from, to });
        }
        let (from, to) = (from.clamp(0.0, 1.0), to.clamp(0.0, 1.0));
        if to <= from {
            return Ok(0.0);
        }
        Ok(match self.kind {
            ModelKind::Linear => (to - from) / self.segments[0].slope,
            ModelKind::Piecewise => self.soc_to_time(to) - self.soc_to_time(from),
        })
    }
}
