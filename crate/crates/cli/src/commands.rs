//! The command implementations behind the `iwknn` binary.
//!
//! Each `cmd_*` function does file I/O around an in-memory counterpart that
//! tests and the experiment driver call directly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use iwknn_core::selection::{offline_select, Campaign, OfflineFilter};
use iwknn_core::sim::{generate_offline_campaign, generate_online_stream, Trajectory};
use iwknn_core::{Algorithm, Locator, LocatorConfig, RadioMap, RssiVector};

use crate::config::RunConfig;
use crate::report::{self, AlgorithmRun};
use crate::store::{self, Stream, StreamRecord};

pub const CAMPAIGN_FILE: &str = "campaign.txt";
pub const STREAM_FILE: &str = "stream.csv";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Offline survey and online query stream of the configured venue.
pub fn simulate(cfg: &RunConfig) -> Result<(Campaign, Stream)> {
    let layout = cfg.layout();
    let prop = cfg.propagation();
    let campaign = generate_offline_campaign(&layout, &prop, &cfg.noise, cfg.samples, cfg.rssi_min, cfg.seed)?;
    let traj = Trajectory::random_waypoints(
        layout.grid_bounds(),
        cfg.speed,
        cfg.slot_interval,
        cfg.queries,
        cfg.seed,
    )?;
    let samples = generate_online_stream(&layout, &prop, &cfg.noise, &traj, cfg.rssi_min, cfg.seed)?;
    let stream = Stream {
        registry: layout.registry()?,
        records: samples.iter().map(StreamRecord::from).collect(),
    };
    Ok((campaign, stream))
}

pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let (campaign, stream) = simulate(cfg)?;
    create_dir(out_dir)?;
    store::save_campaign(&campaign, &out_dir.join(CAMPAIGN_FILE))?;
    store::save_stream(&stream, &out_dir.join(STREAM_FILE))?;
    println!(
        "simulated {} points x {} APs x {} samples and {} queries into {}",
        campaign.points.len(),
        campaign.registry.len(),
        campaign.samples_per_series,
        stream.records.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn offline_filter(cfg: &RunConfig) -> OfflineFilter {
    if cfg.filtering {
        OfflineFilter::default()
    } else {
        OfflineFilter::Unfiltered
    }
}

pub fn train(cfg: &RunConfig, campaign: &Campaign) -> Result<RadioMap> {
    Ok(offline_select(campaign, &cfg.thresholds()?, offline_filter(cfg))?)
}

/// Where the elimination log of a map written to `map_path` goes.
pub fn provenance_path(map_path: &Path) -> PathBuf {
    map_path.with_extension("provenance.csv")
}

pub fn cmd_train(cfg: &RunConfig, campaign_path: &Path, out_map: &Path) -> Result<()> {
    let campaign =
        store::load_campaign(campaign_path).with_context(|| format!("loading {}", campaign_path.display()))?;
    let map = train(cfg, &campaign)?;
    if let Some(dir) = out_map.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    store::save_radiomap(&map, out_map)?;
    let prov = provenance_path(out_map);
    store::save_provenance(map.provenance(), &prov)?;
    let entries = map.len() * map.n_aps();
    println!(
        "trained {} points x {} APs; {} of {} entries eliminated (log in {})",
        map.len(),
        map.n_aps(),
        map.provenance().len(),
        entries,
        prov.display()
    );
    Ok(())
}

/// Locator settings for `map`: the configured ones, or with `degenerate` set
/// everything beyond WKNN switched off.
pub fn locator_config(cfg: &RunConfig, map: &RadioMap, degenerate: bool) -> Result<LocatorConfig> {
    if degenerate {
        let k = cfg.k.context("k is required (config key or --k)")?;
        return Ok(LocatorConfig::degenerate(k));
    }
    cfg.locator(map.point_spacing())
}

fn check_stream(map: &RadioMap, stream: &Stream, cfg: &RunConfig) -> Result<()> {
    ensure!(
        stream.registry == *map.registry(),
        "stream APs do not match the radio map"
    );
    ensure!(
        cfg.rssi_min == map.rssi_min(),
        "rssi_min {} differs from the map's {}",
        cfg.rssi_min,
        map.rssi_min()
    );
    Ok(())
}

fn query(map: &RadioMap, record: &StreamRecord) -> Result<RssiVector> {
    Ok(map.registry().vector(record.rssi.clone())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub truth: Option<(f64, f64)>,
    pub error_m: Option<f64>,
    pub elapsed_us: f64,
    pub algorithm: Algorithm,
}

/// Runs one algorithm over the stream from a fresh session.
pub fn trace(map: &RadioMap, stream: &Stream, algorithm: Algorithm, config: LocatorConfig) -> Result<Vec<TraceRow>> {
    let mut loc = Locator::new(map, config)?;
    stream
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let est = loc
                .locate_with(algorithm, query(map, r)?, r.timestamp)
                .with_context(|| format!("query {i} at t={}", r.timestamp))?;
            Ok(TraceRow {
                timestamp: r.timestamp,
                x: est.coord.x,
                y: est.coord.y,
                truth: r.truth.map(|c| (c.x, c.y)),
                error_m: r.truth.map(|c| c.distance(&est.coord)),
                elapsed_us: est.elapsed_us,
                algorithm,
            })
        })
        .collect()
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("timestamp,x,y,true_x,true_y,error_m,elapsed_us,algorithm\n");
    for r in rows {
        let (tx, ty) = r
            .truth
            .map_or((String::new(), String::new()), |(x, y)| (x.to_string(), y.to_string()));
        let err = r.error_m.map_or(String::new(), |e| e.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{tx},{ty},{err},{},{}",
            r.timestamp, r.x, r.y, r.elapsed_us, r.algorithm
        );
    }
    out
}

pub fn cmd_locate(
    cfg: &RunConfig,
    map_path: &Path,
    stream_path: &Path,
    algorithm: Algorithm,
    degenerate: bool,
    out: &Path,
) -> Result<()> {
    let map = store::load_radiomap(map_path).with_context(|| format!("loading {}", map_path.display()))?;
    let stream = store::load_stream(stream_path).with_context(|| format!("loading {}", stream_path.display()))?;
    check_stream(&map, &stream, cfg)?;
    let rows = trace(&map, &stream, algorithm, locator_config(cfg, &map, degenerate)?)?;
    write(out, &trace_csv(&rows))?;
    let errors: Vec<f64> = rows.iter().filter_map(|r| r.error_m).collect();
    if errors.is_empty() {
        println!("{algorithm}: located {} queries into {}", rows.len(), out.display());
    } else {
        let s = report::error_summary(&errors);
        println!(
            "{algorithm}: {} queries, mean error {:.3} m, {:.1}% under 2 m, trace in {}",
            rows.len(),
            s.mean,
            100.0 * s.frac_under_2m,
            out.display()
        );
    }
    Ok(())
}

/// All three algorithms over the identical stream, one after the other.
/// Each gets `warmup` discarded calls and then a fresh session.
pub fn bench(map: &RadioMap, stream: &Stream, config: LocatorConfig, warmup: usize) -> Result<Vec<AlgorithmRun>> {
    ensure!(!stream.records.is_empty(), "stream is empty");
    let truths = stream
        .records
        .iter()
        .map(|r| r.truth)
        .collect::<Option<Vec<_>>>()
        .context("benchmarking needs ground truth for every query")?;
    let queries = stream
        .records
        .iter()
        .map(|r| query(map, r))
        .collect::<Result<Vec<_>>>()?;

    Algorithm::ALL
        .iter()
        .map(|&algorithm| {
            let mut loc = Locator::new(map, config)?;
            for i in 0..warmup {
                let j = i % queries.len();
                // strictly increasing timestamps across wrap-arounds
                let t = stream.records[j].timestamp + (i / queries.len()) as f64 * 1e6;
                loc.locate_with(algorithm, queries[j].clone(), t)?;
            }
            loc.reset();
            let mut run = AlgorithmRun {
                algorithm,
                timestamps: Vec::with_capacity(queries.len()),
                errors: Vec::with_capacity(queries.len()),
                latencies_us: Vec::with_capacity(queries.len()),
            };
            for ((q, r), truth) in queries.iter().zip(&stream.records).zip(&truths) {
                let est = loc.locate_with(algorithm, q.clone(), r.timestamp)?;
                run.timestamps.push(r.timestamp);
                run.errors.push(truth.distance(&est.coord));
                run.latencies_us.push(est.elapsed_us);
            }
            Ok(run)
        })
        .collect()
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const LATENCY_FILE: &str = "latency.csv";
pub const CDF_FILE: &str = "error_cdf.csv";
pub const HISTOGRAM_FILE: &str = "error_histogram.csv";
pub const ERRORS_FILE: &str = "errors.csv";

pub fn write_report(runs: &[AlgorithmRun], out_dir: &Path) -> Result<()> {
    create_dir(out_dir)?;
    write(&out_dir.join(SUMMARY_FILE), &report::summary_csv(runs))?;
    write(&out_dir.join(LATENCY_FILE), &report::latency_csv(runs))?;
    write(&out_dir.join(CDF_FILE), &report::cdf_csv(runs))?;
    write(&out_dir.join(HISTOGRAM_FILE), &report::histogram_csv(runs))?;
    write(&out_dir.join(ERRORS_FILE), &report::errors_csv(runs))?;
    Ok(())
}

pub fn cmd_bench(cfg: &RunConfig, map_path: &Path, stream_path: &Path, out_dir: &Path) -> Result<()> {
    let map = store::load_radiomap(map_path).with_context(|| format!("loading {}", map_path.display()))?;
    let stream = store::load_stream(stream_path).with_context(|| format!("loading {}", stream_path.display()))?;
    check_stream(&map, &stream, cfg)?;
    let runs = bench(&map, &stream, locator_config(cfg, &map, false)?, cfg.warmup)?;
    write_report(&runs, out_dir)?;
    for r in &runs {
        let e = report::error_summary(&r.errors);
        let l = report::latency_summary(&r.latencies_us);
        println!(
            "{:>5}: mean {:.3} m, p95 {:.3} m, {:.1}% under 2 m, median latency {:.2} us",
            r.algorithm.as_str(),
            e.mean,
            e.p95,
            100.0 * e.frac_under_2m,
            l.median
        );
    }
    Ok(())
}

/// Accuracy and latency of the three algorithms for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    /// Aligned with `Algorithm::ALL`.
    pub errors: Vec<report::ErrorSummary>,
    pub latency: Vec<report::LatencySummary>,
    pub eliminated: usize,
}

impl SeedResult {
    fn of(&self, algorithm: Algorithm) -> usize {
        Algorithm::ALL.iter().position(|&a| a == algorithm).unwrap_or(0)
    }

    pub fn mean_error(&self, algorithm: Algorithm) -> f64 {
        self.errors[self.of(algorithm)].mean
    }

    pub fn frac_under_2m(&self, algorithm: Algorithm) -> f64 {
        self.errors[self.of(algorithm)].frac_under_2m
    }

    pub fn median_latency(&self, algorithm: Algorithm) -> f64 {
        self.latency[self.of(algorithm)].median
    }

    /// I-WKNN beats WKNN, which beats KNN, on mean error.
    pub fn ordered(&self) -> bool {
        self.mean_error(Algorithm::IWknn) < self.mean_error(Algorithm::Wknn)
            && self.mean_error(Algorithm::Wknn) < self.mean_error(Algorithm::Knn)
    }
}

/// Simulate, train and benchmark once per seed, all in memory.
pub fn experiment(cfg: &RunConfig, seeds: std::ops::Range<u64>) -> Result<Vec<SeedResult>> {
    if seeds.is_empty() {
        bail!("no seeds to run");
    }
    seeds
        .map(|seed| {
            let cfg = RunConfig { seed, ..cfg.clone() };
            let (campaign, stream) = simulate(&cfg)?;
            let map = train(&cfg, &campaign)?;
            let runs = bench(&map, &stream, locator_config(&cfg, &map, false)?, cfg.warmup)?;
            Ok(SeedResult {
                seed,
                errors: runs.iter().map(|r| report::error_summary(&r.errors)).collect(),
                latency: runs.iter().map(|r| report::latency_summary(&r.latencies_us)).collect(),
                eliminated: map.provenance().len(),
            })
        })
        .collect()
}

pub fn experiment_csv(results: &[SeedResult]) -> String {
    let mut out = String::from("seed,algorithm,mean_error_m,p95_error_m,frac_under_2m,median_latency_us,eliminated\n");
    for r in results {
        for (i, a) in Algorithm::ALL.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{a},{},{},{},{},{}",
                r.seed, r.errors[i].mean, r.errors[i].p95, r.errors[i].frac_under_2m, r.latency[i].median, r.eliminated
            );
        }
    }
    out
}

pub const EXPERIMENT_FILE: &str = "experiment.csv";

pub fn cmd_experiment(cfg: &RunConfig, seeds: u64, out_dir: &Path) -> Result<()> {
    let first = cfg.seed;
    let results = experiment(cfg, first..first + seeds)?;
    create_dir(out_dir)?;
    write(&out_dir.join(EXPERIMENT_FILE), &experiment_csv(&results))?;
    for r in &results {
        println!(
            "seed {:>3}: mean error iwknn {:.3} m, wknn {:.3} m, knn {:.3} m",
            r.seed,
            r.mean_error(Algorithm::IWknn),
            r.mean_error(Algorithm::Wknn),
            r.mean_error(Algorithm::Knn)
        );
    }
    let ordered = results.iter().filter(|r| r.ordered()).count();
    println!("iwknn < wknn < knn in {ordered} of {} seeds", results.len());
    Ok(())
}
