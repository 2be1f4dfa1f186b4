//! Benchmark statistics and their CSV renderings.

use std::fmt::Write as _;

use iwknn_core::Algorithm;

/// Histogram bin width in metres.
pub const BIN_WIDTH: f64 = 0.25;
/// Errors below this count as a hit in the summary.
pub const HIT_RADIUS: f64 = 2.0;

/// Per-query records of one algorithm over one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    pub timestamps: Vec<f64>,
    pub errors: Vec<f64>,
    pub latencies_us: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub queries: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub frac_under_2m: f64,
}

/// The best and worst partitions each hold exactly `floor(0.2 * Q)` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencySummary {
    pub queries: usize,
    pub mean: f64,
    pub median: f64,
    pub best20_mean: f64,
    pub worst20_mean: f64,
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Nearest-rank percentile of ascending data.
fn percentile(asc: &[f64], p: f64) -> f64 {
    if asc.is_empty() {
        return f64::NAN;
    }
    let rank = (p * asc.len() as f64).ceil().max(1.0) as usize;
    asc[rank.min(asc.len()) - 1]
}

fn median(asc: &[f64]) -> f64 {
    match asc.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => asc[n / 2],
        n => 0.5 * (asc[n / 2 - 1] + asc[n / 2]),
    }
}

pub fn error_summary(errors: &[f64]) -> ErrorSummary {
    let asc = sorted(errors);
    let hits = errors.iter().filter(|&&e| e < HIT_RADIUS).count();
    ErrorSummary {
        queries: errors.len(),
        mean: mean(errors),
        p50: percentile(&asc, 0.5),
        p95: percentile(&asc, 0.95),
        frac_under_2m: if errors.is_empty() {
            0.0
        } else {
            hits as f64 / errors.len() as f64
        },
    }
}

pub fn latency_summary(latencies: &[f64]) -> LatencySummary {
    let asc = sorted(latencies);
    let tail = asc.len() / 5;
    LatencySummary {
        queries: asc.len(),
        mean: mean(&asc),
        median: median(&asc),
        best20_mean: mean(&asc[..tail]),
        worst20_mean: mean(&asc[asc.len() - tail..]),
    }
}

/// `(error, cumulative fraction)` pairs, ascending, ending at 1.
pub fn cdf(errors: &[f64]) -> Vec<(f64, f64)> {
    let asc = sorted(errors);
    let n = asc.len() as f64;
    asc.into_iter()
        .enumerate()
        .map(|(i, e)| (e, (i + 1) as f64 / n))
        .collect()
}

/// Counts per `BIN_WIDTH` bin starting at zero, covering the largest error.
pub fn histogram(errors: &[f64]) -> Vec<usize> {
    let max = errors.iter().copied().fold(0.0, f64::max);
    let mut bins = vec![0; (max / BIN_WIDTH).floor() as usize + 1];
    for &e in errors {
        bins[(e / BIN_WIDTH).floor() as usize] += 1;
    }
    bins
}

pub fn summary_csv(runs: &[AlgorithmRun]) -> String {
    let mut out = String::from("algorithm,queries,mean_error_m,p50_error_m,p95_error_m,frac_under_2m\n");
    for r in runs {
        let s = error_summary(&r.errors);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.algorithm, s.queries, s.mean, s.p50, s.p95, s.frac_under_2m
        );
    }
    out
}

pub fn latency_csv(runs: &[AlgorithmRun]) -> String {
    let mut out = String::from("algorithm,queries,mean_us,median_us,best20_mean_us,worst20_mean_us\n");
    for r in runs {
        let s = latency_summary(&r.latencies_us);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.algorithm, s.queries, s.mean, s.median, s.best20_mean, s.worst20_mean
        );
    }
    out
}

pub fn cdf_csv(runs: &[AlgorithmRun]) -> String {
    let mut out = String::from("algorithm,error_m,cumulative_fraction\n");
    for r in runs {
        for (e, f) in cdf(&r.errors) {
            let _ = writeln!(out, "{},{e},{f}", r.algorithm);
        }
    }
    out
}

pub fn histogram_csv(runs: &[AlgorithmRun]) -> String {
    let mut out = String::from("algorithm,bin_start_m,bin_end_m,count,fraction\n");
    for r in runs {
        let n = r.errors.len() as f64;
        for (i, count) in histogram(&r.errors).into_iter().enumerate() {
            let start = i as f64 * BIN_WIDTH;
            let _ = writeln!(
                out,
                "{},{start},{},{count},{}",
                r.algorithm,
                start + BIN_WIDTH,
                count as f64 / n
            );
        }
    }
    out
}

/// Per-query errors; the latency column is wall-clock and not reproducible.
pub fn errors_csv(runs: &[AlgorithmRun]) -> String {
    let mut out = String::from("query,timestamp,algorithm,error_m,elapsed_us\n");
    for r in runs {
        for (i, ((t, e), l)) in r.timestamps.iter().zip(&r.errors).zip(&r.latencies_us).enumerate() {
            let _ = writeln!(out, "{i},{t},{},{e},{l}", r.algorithm);
        }
    }
    out
}
