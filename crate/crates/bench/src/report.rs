//! Benchmark reports: raw samples, per-point summaries, fits and checks,
//! written as `report.csv` and `summary.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::BenchError;
use crate::stats::{self, LinearFit};

/// Bumped whenever a column is added, removed or reinterpreted.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 8] = [
    "schema_version",
    "experiment",
    "series",
    "param",
    "sample",
    "latency_ns",
    "bytes",
    "ops",
];

/// Minimum measured samples per grid point for timed experiments.
pub const MIN_SAMPLES: usize = 30;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Sample {
    pub latency_ns: u64,
    pub bytes: u64,
    pub ops: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    pub series: String,
    pub param: u64,
    /// Samples discarded before measuring.
    pub warmup: usize,
    #[serde(skip)]
    pub samples: Vec<Sample>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointSummary {
    pub series: String,
    pub param: u64,
    pub samples: usize,
    pub warmup: usize,
    pub median_ns: f64,
    pub mean_ns: f64,
    pub p90_ns: f64,
    pub p99_ns: f64,
    pub min_ns: f64,
    pub max_ns: f64,
    pub cov: f64,
    pub mean_bytes: f64,
    pub min_ops: u64,
    pub max_ops: u64,
}

impl Point {
    pub fn new(series: impl Into<String>, param: u64, warmup: usize, samples: Vec<Sample>) -> Self {
        Point {
            series: series.into(),
            param,
            warmup,
            samples,
        }
    }

    pub fn latencies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.latency_ns as f64).collect()
    }

    pub fn median_ns(&self) -> f64 {
        stats::median(&self.latencies())
    }

    pub fn quantile_ns(&self, q: f64) -> f64 {
        stats::quantile(&self.latencies(), q)
    }

    pub fn ops(&self) -> impl Iterator<Item = u64> + '_ {
        self.samples.iter().map(|s| s.ops)
    }

    pub fn summary(&self) -> PointSummary {
        let l = self.latencies();
        let bytes: Vec<f64> = self.samples.iter().map(|s| s.bytes as f64).collect();
        PointSummary {
            series: self.series.clone(),
            param: self.param,
            samples: self.samples.len(),
            warmup: self.warmup,
            median_ns: stats::median(&l),
            mean_ns: stats::mean(&l),
            p90_ns: stats::quantile(&l, 0.9),
            p99_ns: stats::quantile(&l, 0.99),
            min_ns: stats::quantile(&l, 0.0),
            max_ns: stats::quantile(&l, 1.0),
            cov: stats::cov(&l),
            mean_bytes: stats::mean(&bytes),
            min_ops: self.ops().min().unwrap_or(0),
            max_ops: self.ops().max().unwrap_or(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub experiment: String,
    pub seed: u64,
    pub grid: Vec<u64>,
    /// Samples each point must carry; deterministic size measurements need one.
    pub min_samples: usize,
    pub points: Vec<Point>,
    pub fits: BTreeMap<String, LinearFit>,
    pub checks: Vec<Check>,
    pub context: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    experiment: &'a str,
    seed: u64,
    grid: &'a [u64],
    points: Vec<PointSummary>,
    fits: &'a BTreeMap<String, LinearFit>,
    checks: &'a [Check],
    context: &'a BTreeMap<String, serde_json::Value>,
}

impl BenchReport {
    pub fn new(experiment: &str, seed: u64, grid: Vec<u64>, min_samples: usize) -> Self {
        BenchReport {
            experiment: experiment.to_owned(),
            seed,
            grid,
            min_samples,
            points: Vec::new(),
            fits: BTreeMap::new(),
            checks: Vec::new(),
            context: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, point: Point) -> Result<(), BenchError> {
        if point.samples.len() < self.min_samples {
            return Err(BenchError::InsufficientSamples {
                series: point.series,
                param: point.param,
                got: point.samples.len(),
                need: self.min_samples,
            });
        }
        self.points.push(point);
        Ok(())
    }

    pub fn series<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Point> + 'a {
        self.points.iter().filter(move |p| p.series == name)
    }

    pub fn point(&self, series: &str, param: u64) -> Option<&Point> {
        self.points.iter().find(|p| p.series == series && p.param == param)
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_owned(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn find_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn set_context(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.context.insert(key.to_owned(), value.into());
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for p in &self.points {
            for (i, s) in p.samples.iter().enumerate() {
                w.write_record([
                    CSV_SCHEMA_VERSION.to_string(),
                    self.experiment.clone(),
                    p.series.clone(),
                    p.param.to_string(),
                    i.to_string(),
                    s.latency_ns.to_string(),
                    s.bytes.to_string(),
                    s.ops.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String, BenchError> {
        let s = Summary {
            schema_version: CSV_SCHEMA_VERSION,
            experiment: &self.experiment,
            seed: self.seed,
            grid: &self.grid,
            points: self.points.iter().map(Point::summary).collect(),
            fits: &self.fits,
            checks: &self.checks,
            context: &self.context,
        };
        Ok(serde_json::to_string_pretty(&s)?)
    }

    /// Write `report.csv` and `summary.json` into `dir`, creating it.
    pub fn write_to(&self, dir: &Path) -> Result<(), BenchError> {
        fs::create_dir_all(dir)?;
        self.write_csv(fs::File::create(dir.join("report.csv"))?)?;
        fs::write(dir.join("summary.json"), self.summary_json()? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| Sample {
                latency_ns: 100 + i as u64,
                bytes: 7,
                ops: 1,
            })
            .collect()
    }

    #[test]
    fn short_points_are_refused() {
        let mut r = BenchReport::new("x", 1, vec![10], MIN_SAMPLES);
        let err = r.push(Point::new("s", 10, 3, samples(29))).unwrap_err();
        assert!(matches!(err, BenchError::InsufficientSamples { got: 29, need: 30, .. }));
        r.push(Point::new("s", 10, 3, samples(30))).unwrap();
        assert_eq!(r.points[0].summary().warmup, 3);
    }

    #[test]
    fn csv_has_one_row_per_measured_sample() {
        let mut r = BenchReport::new("x", 1, vec![10], 1);
        r.push(Point::new("s", 10, 5, samples(2))).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "schema_version,experiment,series,param,sample,latency_ns,bytes,ops\n1,x,s,10,0,100,7,1\n1,x,s,10,1,101,7,1\n"
        );
    }
}
