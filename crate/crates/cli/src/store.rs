//! Line-oriented text formats for radio maps, survey campaigns and query streams.
//!
//! Every file starts with `#<TAG> key=value` header lines and ends with an
//! `#END records=<n>` trailer, so a truncated copy is detected. Floats are
//! written in shortest round-trip form, which makes load(save(x)) bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use iwknn_core::selection::{Campaign, Elimination, Gate, RawSampleSeries, SelectionThresholds};
use iwknn_core::sim::StreamSample;
use iwknn_core::{ApRegistry, Bounds, Coord, FilterParams, MacAddr, RadioMap, ReferencePoint};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: String },
    #[error("file is truncated: {0}")]
    Truncated(&'static str),
    #[error("{what}: expected {expected} records, found {found}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid contents: {0}")]
    Invalid(#[from] iwknn_core::Error),
}

type Result<T> = std::result::Result<T, StoreError>;

fn parse_err(line: usize, message: impl Into<String>) -> StoreError {
    StoreError::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: FromStr>(line: usize, name: &str, text: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad {name} {text:?}")))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn join_macs(registry: &ApRegistry) -> String {
    registry
        .macs()
        .iter()
        .map(MacAddr::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Header lines, body records and the trailer of one file, with 1-based line numbers.
struct Document<'a> {
    headers: Vec<(usize, &'a str, &'a str)>,
    records: Vec<(usize, &'a str)>,
}

impl<'a> Document<'a> {
    fn split(text: &'a str, tag: &str) -> Result<Self> {
        let prefix = format!("#{tag} ");
        let mut headers = Vec::new();
        let mut records = Vec::new();
        let mut trailer = None;
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            if trailer.is_some() {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(parse_err(n, "content after #END"));
            }
            if let Some(rest) = line.strip_prefix(&prefix) {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| parse_err(n, "header line without key=value"))?;
                headers.push((n, k.trim(), v.trim()));
            } else if let Some(rest) = line.strip_prefix("#END") {
                let count = rest
                    .trim()
                    .strip_prefix("records=")
                    .ok_or_else(|| parse_err(n, "malformed #END trailer"))?;
                trailer = Some(field::<usize>(n, "record count", count)?);
            } else if line.starts_with('#') {
                return Err(parse_err(n, format!("unexpected header {line:?}")));
            } else if !line.trim().is_empty() {
                records.push((n, line));
            }
        }
        if headers.is_empty() {
            return Err(StoreError::Truncated("missing header"));
        }
        let expected = trailer.ok_or(StoreError::Truncated("missing #END trailer"))?;
        if expected != records.len() {
            return Err(StoreError::CountMismatch {
                what: "file",
                expected,
                found: records.len(),
            });
        }
        let doc = Self { headers, records };
        let version = doc.header("version")?;
        if version.1 != FORMAT_VERSION.to_string() {
            return Err(StoreError::VersionMismatch {
                found: version.1.to_string(),
            });
        }
        Ok(doc)
    }

    fn header(&self, key: &str) -> Result<(usize, &'a str)> {
        self.headers
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|&(n, _, v)| (n, v))
            .ok_or_else(|| parse_err(self.headers[0].0, format!("missing header {key}")))
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<T> {
        let (n, v) = self.header(key)?;
        field(n, key, v)
    }

    fn registry(&self) -> Result<ApRegistry> {
        let (n, text) = self.header("macs")?;
        let macs = if text.is_empty() {
            Vec::new()
        } else {
            text.split(',')
                .map(|m| m.parse::<MacAddr>().map_err(|e| parse_err(n, e.to_string())))
                .collect::<Result<Vec<_>>>()?
        };
        Ok(ApRegistry::new(macs)?)
    }

    fn bounds(&self) -> Result<Bounds> {
        let (n, text) = self.header("bounds")?;
        let v: Vec<f64> = text.split(',').map(|x| field(n, "bound", x)).collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(parse_err(n, "bounds needs min_x,min_y,max_x,max_y"));
        }
        Ok(Bounds::new(Coord::new(v[0], v[1]), Coord::new(v[2], v[3])))
    }
}

fn write_bounds(out: &mut String, tag: &str, b: Bounds) {
    let _ = writeln!(out, "#{tag} bounds={},{},{},{}", b.min.x, b.min.y, b.max.x, b.max.y);
}

/// Cells of a comma-separated record after its leading tag.
fn cells<'a>(line: usize, record: &'a str, tag: &str, count: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = record.split(',').collect();
    if parts[0] != tag {
        return Err(parse_err(line, format!("expected a {tag} record")));
    }
    if parts.len() != count + 1 {
        return Err(parse_err(
            line,
            format!("{tag} record needs {count} fields, found {}", parts.len() - 1),
        ));
    }
    Ok(parts[1..].to_vec())
}

pub fn format_radiomap(map: &RadioMap) -> String {
    let mut out = String::new();
    let t = map.thresholds();
    let _ = writeln!(out, "#HEADER version={FORMAT_VERSION}");
    write_bounds(&mut out, "HEADER", map.bounds());
    let _ = writeln!(out, "#HEADER macs={}", join_macs(map.registry()));
    let _ = writeln!(out, "#HEADER M={}", map.len());
    let _ = writeln!(out, "#HEADER N={}", map.n_aps());
    let _ = writeln!(out, "#HEADER S={}", map.samples_per_series());
    let _ = writeln!(out, "#HEADER theta1={}", t.theta1);
    let _ = writeln!(out, "#HEADER theta2={}", t.theta2);
    let _ = writeln!(out, "#HEADER epsilon={}", t.epsilon);
    let _ = writeln!(out, "#HEADER rssi_min={}", t.rssi_min);
    let mut records = 0usize;
    for p in map.points() {
        for (n, v) in p.fingerprint.values().iter().enumerate() {
            let _ = writeln!(out, "FP,{},{},{},{},{}", p.id, p.coord.x, p.coord.y, n, v);
            records += 1;
        }
    }
    if let Some(raw) = map.unprocessed_points() {
        for p in raw {
            for (n, v) in p.fingerprint.values().iter().enumerate() {
                let _ = writeln!(out, "RAW,{},{},{}", p.id, n, v);
                records += 1;
            }
        }
    }
    for (slot, params) in map.all_params().iter().enumerate() {
        if let Some(f) = params {
            let (m, n) = (slot / map.n_aps(), slot % map.n_aps());
            let _ = writeln!(
                out,
                "FILT,{m},{n},{},{},{},{},{}",
                f.mu, f.sigma, f.g_inf, f.g_sup, f.epsilon
            );
            records += 1;
        }
    }
    for e in map.provenance() {
        let _ = writeln!(
            out,
            "PROV,{},{},{},{},{}",
            e.point, e.ap, e.gate, e.statistic, e.threshold
        );
        records += 1;
    }
    let _ = writeln!(out, "#END records={records}");
    out
}

pub fn parse_radiomap(text: &str) -> Result<RadioMap> {
    let doc = Document::split(text, "HEADER")?;
    let registry = doc.registry()?;
    let bounds = doc.bounds()?;
    let m: usize = doc.value("M")?;
    let n: usize = doc.value("N")?;
    if n != registry.len() {
        let (line, _) = doc.header("N")?;
        return Err(parse_err(line, format!("N={n} but {} MACs listed", registry.len())));
    }
    let thresholds = SelectionThresholds {
        theta1: doc.value("theta1")?,
        theta2: doc.value("theta2")?,
        epsilon: doc.value("epsilon")?,
        rssi_min: doc.value("rssi_min")?,
    };
    let samples: usize = doc.value("S")?;

    let total = m * n;
    let mut fp = vec![None; total];
    let mut raw = vec![None; total];
    let mut coords: Vec<Option<Coord>> = vec![None; m];
    let mut params = vec![None; total];
    let mut provenance = Vec::new();
    let (mut fp_count, mut raw_count) = (0, 0);

    let slot = |line: usize, pm: &str, pn: &str| -> Result<usize> {
        let (pm, pn): (usize, usize) = (field(line, "point", pm)?, field(line, "ap", pn)?);
        if pm >= m || pn >= n {
            return Err(parse_err(line, format!("entry ({pm},{pn}) outside {m}x{n}")));
        }
        Ok(pm * n + pn)
    };

    for &(line, record) in &doc.records {
        let tag = record.split(',').next().unwrap_or("");
        match tag {
            "FP" => {
                let c = cells(line, record, "FP", 5)?;
                let s = slot(line, c[0], c[3])?;
                let coord = Coord::new(field(line, "x", c[1])?, field(line, "y", c[2])?);
                let known = coords[s / n].get_or_insert(coord);
                if known.x.to_bits() != coord.x.to_bits() || known.y.to_bits() != coord.y.to_bits() {
                    return Err(parse_err(
                        line,
                        "coordinates differ from an earlier record of this point",
                    ));
                }
                if fp[s].replace(field::<f64>(line, "rssi", c[4])?).is_some() {
                    return Err(parse_err(line, "duplicate FP record"));
                }
                fp_count += 1;
            }
            "RAW" => {
                let c = cells(line, record, "RAW", 3)?;
                let s = slot(line, c[0], c[1])?;
                if raw[s].replace(field::<f64>(line, "rssi", c[2])?).is_some() {
                    return Err(parse_err(line, "duplicate RAW record"));
                }
                raw_count += 1;
            }
            "FILT" => {
                let c = cells(line, record, "FILT", 7)?;
                let s = slot(line, c[0], c[1])?;
                let p = FilterParams {
                    mu: field(line, "mu", c[2])?,
                    sigma: field(line, "sigma", c[3])?,
                    g_inf: field(line, "g_inf", c[4])?,
                    g_sup: field(line, "g_sup", c[5])?,
                    epsilon: field(line, "epsilon", c[6])?,
                };
                if params[s].replace(p).is_some() {
                    return Err(parse_err(line, "duplicate FILT record"));
                }
            }
            "PROV" => {
                let c = cells(line, record, "PROV", 5)?;
                let s = slot(line, c[0], c[1])?;
                provenance.push(Elimination {
                    point: s / n,
                    ap: s % n,
                    gate: c[2].parse::<Gate>().map_err(|e| parse_err(line, e.to_string()))?,
                    statistic: field(line, "statistic", c[3])?,
                    threshold: field(line, "threshold", c[4])?,
                });
            }
            other => return Err(parse_err(line, format!("unknown record type {other:?}"))),
        }
    }
    if fp_count != total {
        return Err(StoreError::CountMismatch {
            what: "FP",
            expected: total,
            found: fp_count,
        });
    }
    if raw_count != 0 && raw_count != total {
        return Err(StoreError::CountMismatch {
            what: "RAW",
            expected: total,
            found: raw_count,
        });
    }

    let rows = |values: &[Option<f64>]| -> Result<Vec<_>> {
        values
            .chunks(n.max(1))
            .take(m)
            .map(|row| Ok(registry.vector(row.iter().map(|v| v.unwrap_or_default()).collect())?))
            .collect()
    };
    let points = rows(&fp)?
        .into_iter()
        .enumerate()
        .map(|(id, fingerprint)| ReferencePoint {
            id,
            coord: coords[id].unwrap_or_default(),
            fingerprint,
        })
        .collect();
    let unprocessed = if raw_count > 0 { Some(rows(&raw)?) } else { None };
    let map = RadioMap::new(
        registry.clone(),
        bounds,
        points,
        params,
        provenance,
        samples,
        thresholds,
    )?;
    Ok(match unprocessed {
        Some(raw) => map.with_unprocessed(raw)?,
        None => map,
    })
}

pub fn save_radiomap(map: &RadioMap, path: &Path) -> Result<()> {
    write_file(path, &format_radiomap(map))
}

pub fn load_radiomap(path: &Path) -> Result<RadioMap> {
    parse_radiomap(&read_file(path)?)
}

/// Eliminations as CSV: `m,n,gate,statistic,threshold`.
pub fn format_provenance(eliminations: &[Elimination]) -> String {
    let mut out = String::from("m,n,gate,statistic,threshold\n");
    for e in eliminations {
        let _ = writeln!(out, "{},{},{},{},{}", e.point, e.ap, e.gate, e.statistic, e.threshold);
    }
    out
}

pub fn save_provenance(eliminations: &[Elimination], path: &Path) -> Result<()> {
    write_file(path, &format_provenance(eliminations))
}

pub fn format_campaign(c: &Campaign) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#CAMPAIGN version={FORMAT_VERSION}");
    write_bounds(&mut out, "CAMPAIGN", c.bounds);
    let _ = writeln!(out, "#CAMPAIGN macs={}", join_macs(&c.registry));
    let _ = writeln!(out, "#CAMPAIGN S={}", c.samples_per_series);
    for (m, p) in c.points.iter().enumerate() {
        let _ = writeln!(out, "POINT,{m},{},{}", p.x, p.y);
    }
    for s in &c.series {
        let _ = writeln!(out, "SERIES,{},{},{}", s.point_id, s.ap_index, join_floats(&s.samples));
    }
    let _ = writeln!(out, "#END records={}", c.points.len() + c.series.len());
    out
}

pub fn parse_campaign(text: &str) -> Result<Campaign> {
    let doc = Document::split(text, "CAMPAIGN")?;
    let registry = doc.registry()?;
    let bounds = doc.bounds()?;
    let samples: usize = doc.value("S")?;
    let mut points = Vec::new();
    let mut series = Vec::new();
    for &(line, record) in &doc.records {
        let parts: Vec<&str> = record.split(',').collect();
        match parts[0] {
            "POINT" => {
                let c = cells(line, record, "POINT", 3)?;
                let id: usize = field(line, "point", c[0])?;
                if id != points.len() {
                    return Err(parse_err(line, format!("point {id} out of order")));
                }
                points.push(Coord::new(field(line, "x", c[1])?, field(line, "y", c[2])?));
            }
            "SERIES" => {
                if parts.len() < 3 {
                    return Err(parse_err(line, "SERIES record needs point and ap"));
                }
                let values = parts[3..]
                    .iter()
                    .map(|v| field(line, "sample", v))
                    .collect::<Result<Vec<f64>>>()?;
                if values.len() != samples {
                    return Err(parse_err(
                        line,
                        format!("expected {samples} samples, found {}", values.len()),
                    ));
                }
                series.push(RawSampleSeries {
                    point_id: field(line, "point", parts[1])?,
                    ap_index: field(line, "ap", parts[2])?,
                    samples: values,
                });
            }
            other => return Err(parse_err(line, format!("unknown record type {other:?}"))),
        }
    }
    let expected = points.len() * registry.len();
    if series.len() != expected {
        return Err(StoreError::CountMismatch {
            what: "SERIES",
            expected,
            found: series.len(),
        });
    }
    Ok(Campaign {
        registry,
        bounds,
        points,
        samples_per_series: samples,
        series,
    })
}

pub fn save_campaign(c: &Campaign, path: &Path) -> Result<()> {
    write_file(path, &format_campaign(c))
}

pub fn load_campaign(path: &Path) -> Result<Campaign> {
    parse_campaign(&read_file(path)?)
}

/// One stored query slot. Ground truth is present only for simulated streams.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub timestamp: f64,
    pub truth: Option<Coord>,
    pub rssi: Vec<f64>,
}

impl From<&StreamSample> for StreamRecord {
    fn from(s: &StreamSample) -> Self {
        Self {
            timestamp: s.t,
            truth: Some(s.truth),
            rssi: s.rssi.values().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub registry: ApRegistry,
    pub records: Vec<StreamRecord>,
}

/// `STREAM` header, then `timestamp,true_x,true_y,rssi...` rows; the truth
/// cells are empty when unknown.
pub fn format_stream(stream: &Stream) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#STREAM version={FORMAT_VERSION}");
    let _ = writeln!(out, "#STREAM macs={}", join_macs(&stream.registry));
    for r in &stream.records {
        let (tx, ty) = match r.truth {
            Some(c) => (c.x.to_string(), c.y.to_string()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(out, "{},{tx},{ty},{}", r.timestamp, join_floats(&r.rssi));
    }
    let _ = writeln!(out, "#END records={}", stream.records.len());
    out
}

pub fn parse_stream(text: &str) -> Result<Stream> {
    let doc = Document::split(text, "STREAM")?;
    let registry = doc.registry()?;
    let mut records = Vec::with_capacity(doc.records.len());
    for &(line, record) in &doc.records {
        let parts: Vec<&str> = record.split(',').collect();
        if parts.len() != 3 + registry.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", 3 + registry.len(), parts.len()),
            ));
        }
        let truth = match (parts[1].trim(), parts[2].trim()) {
            ("", "") => None,
            (x, y) => Some(Coord::new(field(line, "true_x", x)?, field(line, "true_y", y)?)),
        };
        records.push(StreamRecord {
            timestamp: field(line, "timestamp", parts[0])?,
            truth,
            rssi: parts[3..]
                .iter()
                .map(|v| field(line, "rssi", v))
                .collect::<Result<_>>()?,
        });
    }
    Ok(Stream { registry, records })
}

pub fn save_stream(stream: &Stream, path: &Path) -> Result<()> {
    write_file(path, &format_stream(stream))
}

pub fn load_stream(path: &Path) -> Result<Stream> {
    parse_stream(&read_file(path)?)
}
