use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use iwknn_cli::commands::{simulate, train};
use iwknn_cli::config::RunConfig;
use iwknn_cli::store;
use tempfile::TempDir;

fn stadium_conf() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/stadium.conf")
}

/// Stadium config with a short survey and stream.
fn small_conf(dir: &Path) -> String {
    let base = fs::read_to_string(stadium_conf()).unwrap();
    let path = dir.join("small.conf");
    fs::write(&path, format!("{base}\nsamples = 60\nqueries = 200\nseed = 3\n")).unwrap();
    path.to_string_lossy().into_owned()
}

fn iwknn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iwknn")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = iwknn(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

struct Workspace {
    dir: TempDir,
    conf: String,
}

impl Workspace {
    fn simulated() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let conf = small_conf(dir.path());
        let ws = Self { dir, conf };
        ok(&["simulate", "--config", &ws.conf, "--out", &ws.path("sim")]);
        ws
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.dir.path().join(name)).unwrap()
    }
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn wknn_trace_matches_degenerate_iwknn() {
    let ws = Workspace::simulated();
    let map = ws.path("open.txt");
    ok(&[
        "train",
        "--config",
        &ws.conf,
        "--campaign",
        &ws.path("sim/campaign.txt"),
        "--out",
        &map,
        "--no-filter",
        "--theta1",
        "1.5",
        "--theta2",
        "inf",
    ]);
    let stream = ws.path("sim/stream.csv");
    for algo in ["wknn", "iwknn"] {
        ok(&[
            "locate",
            "--config",
            &ws.conf,
            "--map",
            &map,
            "--stream",
            &stream,
            "--algo",
            algo,
            "--degenerate",
            "--out",
            &ws.path(&format!("{algo}.csv")),
        ]);
    }
    let (w, i) = (rows(&ws.read("wknn.csv")), rows(&ws.read("iwknn.csv")));
    assert_eq!(w.len(), 200);
    for (a, b) in w.iter().zip(&i) {
        // every column but latency and the algorithm name
        assert_eq!(a[..6], b[..6]);
    }
}

#[test]
fn dead_access_point_yields_one_loss_line_per_point() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        samples: 40,
        queries: 1,
        ..RunConfig::load(&stadium_conf()).unwrap()
    };
    let (mut campaign, _) = simulate(&cfg).unwrap();
    let dead = 4;
    for s in campaign.series.iter_mut().filter(|s| s.ap_index == dead) {
        s.samples.fill(cfg.rssi_min);
    }
    let path = tmp.path().join("campaign.txt");
    store::save_campaign(&campaign, &path).unwrap();
    let map = tmp.path().join("map.txt");
    ok(&[
        "train",
        "--config",
        stadium_conf().to_str().unwrap(),
        "--campaign",
        path.to_str().unwrap(),
        "--out",
        map.to_str().unwrap(),
    ]);
    let log = fs::read_to_string(tmp.path().join("map.provenance.csv")).unwrap();
    let dead_lines: Vec<Vec<String>> = rows(&log).into_iter().filter(|r| r[1] == dead.to_string()).collect();
    assert_eq!(dead_lines.len(), campaign.points.len());
    assert!(dead_lines.iter().all(|r| r[2] == "loss"));
    let points: std::collections::BTreeSet<&str> = dead_lines.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(points.len(), campaign.points.len());
}

#[test]
fn bench_report_is_self_consistent() {
    let ws = Workspace::simulated();
    let map = ws.path("map.txt");
    ok(&[
        "train",
        "--config",
        &ws.conf,
        "--campaign",
        &ws.path("sim/campaign.txt"),
        "--out",
        &map,
    ]);
    ok(&[
        "bench",
        "--config",
        &ws.conf,
        "--map",
        &map,
        "--stream",
        &ws.path("sim/stream.csv"),
        "--out",
        &ws.path("rep"),
    ]);

    for algo in ["iwknn", "wknn", "knn"] {
        let cdf: Vec<(f64, f64)> = rows(&ws.read("rep/error_cdf.csv"))
            .into_iter()
            .filter(|r| r[0] == algo)
            .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
            .collect();
        assert_eq!(cdf.len(), 200);
        assert!(cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        assert_eq!(cdf.last().unwrap().1, 1.0);

        let counted: usize = rows(&ws.read("rep/error_histogram.csv"))
            .iter()
            .filter(|r| r[0] == algo)
            .map(|r| r[3].parse::<usize>().unwrap())
            .sum();
        assert_eq!(counted, 200);

        let lat = rows(&ws.read("rep/latency.csv"));
        let row = lat.iter().find(|r| r[0] == algo).unwrap();
        let v: Vec<f64> = row[2..].iter().map(|c| c.parse().unwrap()).collect();
        let (mean, best, worst) = (v[0], v[2], v[3]);
        assert!(best <= mean && mean <= worst, "{algo}: {row:?}");

        let summary = rows(&ws.read("rep/summary.csv"));
        let frac: f64 = summary.iter().find(|r| r[0] == algo).unwrap()[5].parse().unwrap();
        assert!((0.0..=1.0).contains(&frac));
    }
}

#[test]
fn stored_simulator_map_loads_back_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        queries: 1,
        ..RunConfig::load(&stadium_conf()).unwrap()
    };
    let (campaign, _) = simulate(&cfg).unwrap();
    let map = train(&cfg, &campaign).unwrap();
    assert_eq!((map.len(), map.n_aps()), (240, 10));
    let path = tmp.path().join("map.txt");
    store::save_radiomap(&map, &path).unwrap();
    let back = store::load_radiomap(&path).unwrap();
    assert_eq!(back, map);
    for (a, b) in back.points().iter().zip(map.points()) {
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a.fingerprint.values()), bits(b.fingerprint.values()));
    }
}

fn assert_one_line_failure(args: &[&str]) {
    let out = iwknn(args);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(!out.status.success(), "{args:?} succeeded");
    assert_eq!(stderr.trim_end().lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error: "), "{stderr}");
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let ws = Workspace::simulated();
    let conf = stadium_conf();
    let conf = conf.to_str().unwrap();
    assert_one_line_failure(&[
        "train",
        "--config",
        conf,
        "--campaign",
        &ws.path("absent.txt"),
        "--out",
        &ws.path("m.txt"),
    ]);
    // thresholds have no defaults
    assert_one_line_failure(&[
        "train",
        "--campaign",
        &ws.path("sim/campaign.txt"),
        "--out",
        &ws.path("m.txt"),
    ]);
    // a stream is not a radio map
    assert_one_line_failure(&[
        "bench",
        "--config",
        conf,
        "--map",
        &ws.path("sim/stream.csv"),
        "--stream",
        &ws.path("sim/stream.csv"),
        "--out",
        &ws.path("rep"),
    ]);
}

#[test]
fn unknown_config_key_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "thetaa1 = 0.3\n").unwrap();
    let out = iwknn(&[
        "simulate",
        "--config",
        conf.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("thetaa1"), "{stderr}");
    assert_eq!(stderr.trim_end().lines().count(), 1);
}
