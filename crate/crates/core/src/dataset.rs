//! Wind-farm data ingestion, lagged feature assembly, normalization,
//! chronological splitting, and a synthetic series generator for tests.
//!
//! # Input CSV
//!
//! One file per wind farm, header `timestamp,ks,kd,kz,km,kp`, hourly
//! ISO-8601 timestamps (`2011-03-01T14:00:00`), decimal-point numbers, and
//! an empty `kp` field for a missing power measurement. `kp` is normalized
//! power and must lie in `[0, 1]`.
//!
//! # Feature layout
//!
//! Each sample is anchored at hour `t` and predicts power at `t + 1`. Its
//! 124 features are five fixed blocks:
//!
//! | indices   | contents                          |
//! |-----------|-----------------------------------|
//! | 0..=24    | `ks(t), ks(t-1), …, ks(t-24)`     |
//! | 25..=49   | `kd(t), …, kd(t-24)`              |
//! | 50..=74   | `kz(t), …, kz(t-24)`              |
//! | 75..=99   | `km(t), …, km(t-24)`              |
//! | 100..=123 | `kp(t-1), …, kp(t-24)`            |
//!
//! A sample is skipped (not an error) when its 26-hour span is not hourly
//! contiguous or any required power value, including the target, is
//! missing.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix, Rng, Vector};

/// Width of the assembled feature vector.
pub const FEATURE_WIDTH: usize = 124;
/// First index of the wind-speed lag block.
pub const SPEED_BLOCK_START: usize = 0;
/// First index of the wind-direction lag block.
pub const DIRECTION_BLOCK_START: usize = 25;
/// First index of the zonal-component lag block.
pub const ZONAL_BLOCK_START: usize = 50;
/// First index of the meridional-component lag block.
pub const MERIDIONAL_BLOCK_START: usize = 75;
/// First index of the lagged-power block; this column is `kp(t-1)`.
pub const POWER_BLOCK_START: usize = 100;

/// Number of hours of history a sample needs (lags 0..=24 plus target).
pub const WINDOW_HOURS: usize = 24;

const CSV_HEADER: &str = "timestamp,ks,kd,kz,km,kp";
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// One hourly observation of a wind farm.
#[derive(Debug, Clone, PartialEq)]
pub struct WindRecord {
    pub timestamp: NaiveDateTime,
    /// Wind speed (m/s).
    pub speed: f64,
    /// Wind direction (degrees).
    pub direction: f64,
    /// Zonal (west-east) wind component.
    pub zonal: f64,
    /// Meridional (south-north) wind component.
    pub meridional: f64,
    /// Measured normalized power in `[0, 1]`; `None` when missing.
    pub power: Option<f64>,
}

/// How to collapse multiple forecast releases that share one timestamp.
///
/// The documented single-series format never repeats a timestamp, so the
/// policies only differ on non-conforming multi-release exports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReleasePolicy {
    /// Reject duplicated timestamps (the format contract).
    Strict,
    /// Keep the last row of each run of equal timestamps (the most recent
    /// release, assuming release order within the file).
    Latest,
    /// Average the weather columns of each run; power is averaged over the
    /// present values.
    Average,
}

/// Parses a wind-farm CSV file, rejecting duplicated timestamps.
pub fn parse_csv(path: &Path) -> Result<Vec<WindRecord>> {
    parse_csv_with_policy(path, ReleasePolicy::Strict)
}

/// Parses a wind-farm CSV file with an explicit duplicate-timestamp policy.
pub fn parse_csv_with_policy(path: &Path, policy: ReleasePolicy) -> Result<Vec<WindRecord>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv_text(&text, policy)
}

/// Parses CSV content directly. Line numbers in errors are 1-based and
/// include the header line.
pub fn parse_csv_text(text: &str, policy: ReleasePolicy) -> Result<Vec<WindRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Csv {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`, found `{header}`"),
            })
        }
        None => {
            return Err(Error::Csv {
                line: 1,
                message: "file is empty, expected a header row".into(),
            })
        }
    }

    let mut records: Vec<WindRecord> = Vec::new();
    // Rows of the current run of equal timestamps, used by the collapsing
    // policies.
    let mut run: Vec<WindRecord> = Vec::new();

    for (index, raw) in lines {
        let line = index + 1;
        let row = raw.trim_end_matches('\r');
        if row.is_empty() {
            continue;
        }
        let record = parse_row(row, line)?;

        if let Some(prev) = run.last() {
            if record.timestamp == prev.timestamp {
                if policy == ReleasePolicy::Strict {
                    return Err(Error::Csv {
                        line,
                        message: format!("duplicated timestamp {}", prev.timestamp),
                    });
                }
                run.push(record);
                continue;
            }
            if record.timestamp < prev.timestamp {
                return Err(Error::Csv {
                    line,
                    message: format!(
                        "timestamps must increase: {} after {}",
                        record.timestamp, prev.timestamp
                    ),
                });
            }
            records.push(collapse_run(&run, policy));
            run.clear();
        }
        run.push(record);
    }
    if !run.is_empty() {
        records.push(collapse_run(&run, policy));
    }
    Ok(records)
}

fn parse_row(row: &str, line: usize) -> Result<WindRecord> {
    let fields: Vec<&str> = row.split(',').collect();
    if fields.len() != 6 {
        return Err(Error::Csv {
            line,
            message: format!("expected 6 fields, found {}", fields.len()),
        });
    }
    let timestamp = NaiveDateTime::parse_from_str(fields[0], TIMESTAMP_FORMAT).map_err(|e| {
        Error::Csv {
            line,
            message: format!("bad timestamp `{}`: {e}", fields[0]),
        }
    })?;
    let number = |name: &str, text: &str| -> Result<f64> {
        let value: f64 = text.parse().map_err(|_| Error::Csv {
            line,
            message: format!("bad {name} value `{text}`"),
        })?;
        if !value.is_finite() {
            return Err(Error::Csv {
                line,
                message: format!("non-finite {name} value `{text}`"),
            });
        }
        Ok(value)
    };
    let power = if fields[5].is_empty() {
        None
    } else {
        let p = number("kp", fields[5])?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Csv {
                line,
                message: format!("kp must lie in [0, 1], found {p}"),
            });
        }
        Some(p)
    };
    Ok(WindRecord {
        timestamp,
        speed: number("ks", fields[1])?,
        direction: number("kd", fields[2])?,
        zonal: number("kz", fields[3])?,
        meridional: number("km", fields[4])?,
        power,
    })
}

fn collapse_run(run: &[WindRecord], policy: ReleasePolicy) -> WindRecord {
    match policy {
        ReleasePolicy::Strict | ReleasePolicy::Latest => run.last().expect("nonempty run").clone(),
        ReleasePolicy::Average => {
            let n = run.len() as f64;
            let mean = |f: fn(&WindRecord) -> f64| run.iter().map(f).sum::<f64>() / n;
            let powers: Vec<f64> = run.iter().filter_map(|r| r.power).collect();
            WindRecord {
                timestamp: run[0].timestamp,
                speed: mean(|r| r.speed),
                direction: mean(|r| r.direction),
                zonal: mean(|r| r.zonal),
                meridional: mean(|r| r.meridional),
                power: if powers.is_empty() {
                    None
                } else {
                    Some(powers.iter().sum::<f64>() / powers.len() as f64)
                },
            }
        }
    }
}

/// Writes records in the documented CSV format. Floats use the shortest
/// representation that parses back to the identical value, so a write/parse
/// round trip is lossless.
pub fn write_csv(records: &[WindRecord], path: &Path) -> Result<()> {
    let mut out = String::with_capacity(records.len() * 64 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = write!(
            out,
            "{},{},{},{},{},",
            r.timestamp.format(TIMESTAMP_FORMAT),
            r.speed,
            r.direction,
            r.zonal,
            r.meridional
        );
        if let Some(p) = r.power {
            let _ = write!(out, "{p}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// One assembled sample: the 124 features anchored at hour `t`, the target
/// power at `t + 1`, and the anchor timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub features: Vector,
    pub target: f64,
    pub anchor: NaiveDateTime,
}

/// Assembles the feature vector anchored at record index `t`, or `None`
/// when the window has a gap (missing power or non-contiguous hours).
pub fn build_features(records: &[WindRecord], t: usize) -> Result<Option<SampleWindow>> {
    if t < WINDOW_HOURS || t + 1 >= records.len() {
        return Err(Error::IndexOutOfRange {
            context: "build_features anchor",
            index: t,
            bound: records.len(),
        });
    }
    let window = &records[t - WINDOW_HOURS..=t + 1];
    for pair in window.windows(2) {
        if pair[1].timestamp - pair[0].timestamp != Duration::hours(1) {
            return Ok(None);
        }
    }
    let Some(target) = records[t + 1].power else {
        return Ok(None);
    };

    let mut features = Vec::with_capacity(FEATURE_WIDTH);
    for lag in 0..=WINDOW_HOURS {
        features.push(records[t - lag].speed);
    }
    for lag in 0..=WINDOW_HOURS {
        features.push(records[t - lag].direction);
    }
    for lag in 0..=WINDOW_HOURS {
        features.push(records[t - lag].zonal);
    }
    for lag in 0..=WINDOW_HOURS {
        features.push(records[t - lag].meridional);
    }
    for lag in 1..=WINDOW_HOURS {
        match records[t - lag].power {
            Some(p) => features.push(p),
            None => return Ok(None),
        }
    }
    debug_assert_eq!(features.len(), FEATURE_WIDTH);
    Ok(Some(SampleWindow {
        features: Vector::from_vec(features)?,
        target,
        anchor: records[t].timestamp,
    }))
}

/// Per-column min-max ranges fitted on a row range, used to map features and
/// target into `[0, 1]` and back.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub feature_ranges: Vec<(f64, f64)>,
    pub target_range: (f64, f64),
}

impl Normalization {
    /// Fits per-column ranges on `rows` of `set` only.
    pub fn fit(set: &SampleSet, rows: Range<usize>) -> Result<Normalization> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("normalization fit range"));
        }
        if rows.end > set.len() {
            return Err(Error::IndexOutOfRange {
                context: "normalization fit range",
                index: rows.end,
                bound: set.len(),
            });
        }
        let width = set.features.cols();
        let mut feature_ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); width];
        let mut target_range = (f64::INFINITY, f64::NEG_INFINITY);
        for row in rows {
            for (col, range) in feature_ranges.iter_mut().enumerate() {
                let x = set.features.get(row, col);
                range.0 = range.0.min(x);
                range.1 = range.1.max(x);
            }
            let t = set.targets.get(row);
            target_range.0 = target_range.0.min(t);
            target_range.1 = target_range.1.max(t);
        }
        Ok(Normalization {
            feature_ranges,
            target_range,
        })
    }

    /// Pass-through ranges (`(0, 1)` everywhere); normalization becomes the
    /// identity on already-scaled data.
    pub fn identity(width: usize) -> Normalization {
        Normalization {
            feature_ranges: vec![(0.0, 1.0); width],
            target_range: (0.0, 1.0),
        }
    }

    pub fn width(&self) -> usize {
        self.feature_ranges.len()
    }

    /// Raw affine rescale of a feature, without clamping. Constant columns
    /// map to 0.
    pub fn scale_feature(&self, col: usize, x: f64) -> f64 {
        scale(self.feature_ranges[col], x)
    }

    /// Feature rescaled and clamped into `[0, 1]`.
    pub fn normalize_feature(&self, col: usize, x: f64) -> f64 {
        self.scale_feature(col, x).clamp(0.0, 1.0)
    }

    pub fn denormalize_feature(&self, col: usize, y: f64) -> f64 {
        let (min, max) = self.feature_ranges[col];
        min + y * (max - min)
    }

    pub fn normalize_target(&self, t: f64) -> f64 {
        scale(self.target_range, t).clamp(0.0, 1.0)
    }

    pub fn denormalize_target(&self, y: f64) -> f64 {
        let (min, max) = self.target_range;
        min + y * (max - min)
    }

    /// Normalized copy of `set` with these ranges attached.
    pub fn apply(&self, set: &SampleSet) -> Result<SampleSet> {
        if self.width() != set.features.cols() {
            return Err(Error::LengthMismatch {
                context: "normalization width",
                expected: set.features.cols(),
                found: self.width(),
            });
        }
        let mut features = Vec::with_capacity(set.len() * self.width());
        for row in 0..set.len() {
            for (col, &x) in set.features.row(row).iter().enumerate() {
                features.push(self.normalize_feature(col, x));
            }
        }
        let targets: Vec<f64> = set
            .targets
            .as_slice()
            .iter()
            .map(|&t| self.normalize_target(t))
            .collect();
        Ok(SampleSet {
            features: Matrix::from_vec(set.len(), self.width(), features)?,
            targets: Vector::from_vec(targets)?,
            timestamps: set.timestamps.clone(),
            normalization: Some(self.clone()),
        })
    }
}

fn scale(range: (f64, f64), x: f64) -> f64 {
    let (min, max) = range;
    if max > min {
        (x - min) / (max - min)
    } else {
        0.0
    }
}

/// Aligned (feature row, target, anchor timestamp) triples.
///
/// `normalization` is `None` while entries are in raw units and carries the
/// fitted ranges once [`SampleSet::normalize`] has produced scaled entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    features: Matrix,
    targets: Vector,
    timestamps: Vec<NaiveDateTime>,
    normalization: Option<Normalization>,
}

impl SampleSet {
    pub fn new(
        features: Matrix,
        targets: Vector,
        timestamps: Vec<NaiveDateTime>,
    ) -> Result<SampleSet> {
        if targets.len() != features.rows() || timestamps.len() != features.rows() {
            return Err(Error::LengthMismatch {
                context: "sample set rows",
                expected: features.rows(),
                found: targets.len().min(timestamps.len()),
            });
        }
        Ok(SampleSet {
            features,
            targets,
            timestamps,
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &Vector {
        &self.targets
    }

    pub fn feature_row(&self, row: usize) -> &[f64] {
        self.features.row(row)
    }

    pub fn target(&self, row: usize) -> f64 {
        self.targets.get(row)
    }

    /// Anchor hour `t` of a sample.
    pub fn timestamp(&self, row: usize) -> NaiveDateTime {
        self.timestamps[row]
    }

    /// Hour the sample's target refers to (`t + 1`).
    pub fn target_time(&self, row: usize) -> NaiveDateTime {
        self.timestamps[row] + Duration::hours(1)
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    /// New set holding the given rows, in order. Keeps the normalization
    /// state.
    pub fn select(&self, rows: &[usize]) -> Result<SampleSet> {
        let features = self.features.gather_rows(rows)?;
        let mut targets = Vec::with_capacity(rows.len());
        let mut timestamps = Vec::with_capacity(rows.len());
        for &r in rows {
            targets.push(self.targets.get(r));
            timestamps.push(self.timestamps[r]);
        }
        Ok(SampleSet {
            features,
            targets: Vector::from_vec(targets)?,
            timestamps,
            normalization: self.normalization.clone(),
        })
    }

    /// Min-max normalizes features and target into `[0, 1]`, fitting the
    /// ranges on `fit_rows` only and applying them to every row. Constant
    /// columns map to 0.
    pub fn normalize(&self, fit_rows: Range<usize>) -> Result<SampleSet> {
        if self.normalization.is_some() {
            return Err(Error::InvalidConfig(
                "sample set is already normalized".into(),
            ));
        }
        Normalization::fit(self, fit_rows)?.apply(self)
    }
}

/// Builds every valid sample from an hourly record series. Windows with
/// gaps are skipped; fewer than 26 records produce an empty set.
pub fn build_samples(records: &[WindRecord]) -> Result<SampleSet> {
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut timestamps = Vec::new();
    let mut rows = 0;
    if records.len() > WINDOW_HOURS + 1 {
        for t in WINDOW_HOURS..records.len() - 1 {
            if let Some(window) = build_features(records, t)? {
                features.extend_from_slice(window.features.as_slice());
                targets.push(window.target);
                timestamps.push(window.anchor);
                rows += 1;
            }
        }
    }
    SampleSet::new(
        Matrix::from_vec(rows, FEATURE_WIDTH, features)?,
        Vector::from_vec(targets)?,
        timestamps,
    )
}

/// Splits samples strictly by time: rows whose target hour is before
/// `boundary` form the train set, the rest the test set. Feature windows
/// may straddle the boundary; targets never do.
pub fn chronological_split(
    set: &SampleSet,
    boundary: NaiveDateTime,
) -> Result<(SampleSet, SampleSet)> {
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for row in 0..set.len() {
        if set.target_time(row) < boundary {
            train_rows.push(row);
        } else {
            test_rows.push(row);
        }
    }
    if train_rows.is_empty() {
        return Err(Error::EmptyInput("train side of chronological split"));
    }
    if test_rows.is_empty() {
        return Err(Error::EmptyInput("test side of chronological split"));
    }
    Ok((set.select(&train_rows)?, set.select(&test_rows)?))
}

/// Generates an hourly synthetic wind-farm series with learnable structure:
/// wind speed follows an AR(1) process plus a diurnal sinusoid, direction a
/// reflected random walk, the zonal/meridional components are the speed
/// projected on the direction, and power is a noisy logistic curve of speed
/// clipped to `[0, 1]`.
pub fn synthesize(length: usize, seed: u64) -> Result<Vec<WindRecord>> {
    if length < 100 {
        return Err(Error::InvalidConfig(format!(
            "synthetic series needs length >= 100, got {length}"
        )));
    }
    let mut rng = Rng::with_seed(seed);
    let base = NaiveDateTime::parse_from_str("2007-01-01T00:00:00", TIMESTAMP_FORMAT)
        .expect("valid base timestamp");

    const SPEED_MEAN: f64 = 8.0;
    const SPEED_PHI: f64 = 0.85;
    const SPEED_NOISE: f64 = 1.2;
    const DIURNAL_AMPLITUDE: f64 = 2.5;
    const CURVE_MIDPOINT: f64 = 8.0;
    const CURVE_WIDTH: f64 = 2.0;
    const POWER_NOISE: f64 = 0.05;
    // Output drops toward zero above this speed, like a turbine cut-out.
    const CUTOUT_SPEED: f64 = 13.0;
    const CUTOUT_WIDTH: f64 = 1.0;
    // Mild direction-dependent efficiency (terrain shading).
    const DIRECTION_GAIN: f64 = 0.15;

    let mut records = Vec::with_capacity(length);
    let mut ar = SPEED_MEAN;
    let mut direction = 200.0;
    for t in 0..length {
        ar = SPEED_MEAN + SPEED_PHI * (ar - SPEED_MEAN) + SPEED_NOISE * rng.next_gaussian();
        let diurnal = DIURNAL_AMPLITUDE * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin();
        let speed = (ar + diurnal).max(0.0);

        direction += 8.0 * rng.next_gaussian();
        // Reflect back into [0, 360].
        while !(0.0..=360.0).contains(&direction) {
            if direction < 0.0 {
                direction = -direction;
            } else {
                direction = 720.0 - direction;
            }
        }
        let radians = direction.to_radians();

        let curve = sigmoid((speed - CURVE_MIDPOINT) / CURVE_WIDTH)
            * sigmoid((CUTOUT_SPEED - speed) / CUTOUT_WIDTH);
        let efficiency = 1.0 - DIRECTION_GAIN * (0.5 + 0.5 * radians.sin());
        let power =
            (curve * efficiency + POWER_NOISE * rng.next_gaussian()).clamp(0.0, 1.0);

        records.push(WindRecord {
            timestamp: base + Duration::hours(t as i64),
            speed,
            direction,
            zonal: speed * radians.cos(),
            meridional: speed * radians.sin(),
            power: Some(power),
        });
    }
    Ok(records)
}
