//! Event, physiological and corpus file formats.
//!
//! * `event-csv`: header `home_id,node,timestamp,value`, ISO-8601 timestamps.
//! * `event-jsonl`: one object per line with the same four keys.
//! * `phys-csv`: header `home_id,channel,timestamp,value`.
//! * corpus directory: `manifest.json`, `<home>/<date>.csv` (24 rows, one column
//!   per node, no header), `labels.csv` (`home_id,date,label,provenance`) and
//!   `phys.csv` (`home_id,date,channel,value`, observed daily means only).

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{
    Corpus, DailyActivityMatrix, LabeledDay, Label, Node, NodeSet, PhysChannel, PhysReading,
    PhysVector, Provenance, SensorEvent, HOURS,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventFormat {
    #[serde(rename = "event-csv")]
    Csv,
    #[serde(rename = "event-jsonl")]
    Jsonl,
}

impl FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "event-csv" | "csv" => Ok(EventFormat::Csv),
            "event-jsonl" | "jsonl" => Ok(EventFormat::Jsonl),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

/// A malformed record: 1-based line number in the source and the reason.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadReport<T> {
    pub records: Vec<T>,
    pub rejections: Vec<Rejection>,
}

impl<T> Default for LoadReport<T> {
    fn default() -> Self {
        LoadReport {
            records: Vec::new(),
            rejections: Vec::new(),
        }
    }
}

/// Accepts RFC 3339 (`2019-03-01T10:05:00Z`) or a naive `YYYY-MM-DDTHH:MM:SS`, read as UTC.
fn parse_timestamp(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc());
        }
    }
    Err(format!("invalid timestamp `{s}`"))
}

fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn event_from_fields(home: &str, node: &str, ts: &str, value: Option<&str>) -> std::result::Result<SensorEvent, String> {
    if home.is_empty() {
        return Err("empty home_id".into());
    }
    let node = Node::from_str(node.trim()).map_err(|e| e.to_string())?;
    let timestamp = parse_timestamp(ts)?;
    let value = match value.map(str::trim) {
        None | Some("") => 1,
        Some(v) => v.parse::<u32>().map_err(|_| format!("invalid count `{v}`"))?,
    };
    Ok(SensorEvent {
        home_id: home.to_string(),
        node,
        timestamp,
        value,
    })
}

pub fn parse_events_csv(text: &str) -> LoadReport<SensorEvent> {
    let mut report = LoadReport::default();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let parsed = row.map_err(|e| e.to_string()).and_then(|r| {
            if r.len() < 3 || r.len() > 4 {
                return Err(format!("expected 4 fields, got {}", r.len()));
            }
            event_from_fields(&r[0], &r[1], &r[2], r.get(3))
        });
        match parsed {
            Ok(e) => report.records.push(e),
            Err(reason) => report.rejections.push(Rejection { line, reason }),
        }
    }
    report
}

#[derive(Deserialize)]
struct JsonEvent {
    home_id: String,
    node: String,
    timestamp: String,
    #[serde(default)]
    value: Option<serde_json::Value>,
}

pub fn parse_events_jsonl(text: &str) -> LoadReport<SensorEvent> {
    let mut report = LoadReport::default();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<JsonEvent>(raw)
            .map_err(|e| e.to_string())
            .and_then(|j| {
                let value = match &j.value {
                    None | Some(serde_json::Value::Null) => None,
                    Some(serde_json::Value::String(s)) => Some(s.clone()),
                    Some(v) => Some(v.to_string()),
                };
                event_from_fields(&j.home_id, &j.node, &j.timestamp, value.as_deref())
            });
        match parsed {
            Ok(e) => report.records.push(e),
            Err(reason) => report.rejections.push(Rejection { line: i + 1, reason }),
        }
    }
    report
}

/// Loads sensor events; malformed rows end up in the rejection list.
pub fn load_events(path: &Path, format: EventFormat) -> Result<LoadReport<SensorEvent>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(match format {
        EventFormat::Csv => parse_events_csv(&text),
        EventFormat::Jsonl => parse_events_jsonl(&text),
    })
}

pub fn write_events(path: &Path, format: EventFormat, events: &[SensorEvent]) -> Result<()> {
    let mut out = String::new();
    match format {
        EventFormat::Csv => {
            out.push_str("home_id,node,timestamp,value\n");
            for e in events {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    e.home_id,
                    e.node,
                    format_timestamp(&e.timestamp),
                    e.value
                ));
            }
        }
        EventFormat::Jsonl => {
            for e in events {
                let obj = serde_json::json!({
                    "home_id": e.home_id,
                    "node": e.node.name(),
                    "timestamp": format_timestamp(&e.timestamp),
                    "value": e.value,
                });
                out.push_str(&obj.to_string());
                out.push('\n');
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Loads `phys-csv`; every parsed row is an observed reading.
pub fn load_phys(path: &Path) -> Result<LoadReport<PhysReading>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut report = LoadReport::default();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    for (i, row) in reader.records().enumerate() {
        let parsed = row.map_err(|e| e.to_string()).and_then(|r| {
            if r.len() != 4 {
                return Err(format!("expected 4 fields, got {}", r.len()));
            }
            let reading = PhysReading {
                home_id: r[0].to_string(),
                channel: PhysChannel::from_str(&r[1]).map_err(|e| e.to_string())?,
                timestamp: parse_timestamp(&r[2])?,
                value: r[3].parse::<f64>().map_err(|_| format!("invalid value `{}`", &r[3]))?,
                observed: true,
            };
            reading.validate().map_err(|e| e.to_string())?;
            Ok(reading)
        });
        match parsed {
            Ok(r) => report.records.push(r),
            Err(reason) => report.rejections.push(Rejection { line: i + 2, reason }),
        }
    }
    Ok(report)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    nodes: NodeSet,
    phys_channels: Vec<PhysChannel>,
    unlabelled: usize,
    labelled: usize,
    content_hash: String,
}

fn write_matrix(path: &Path, m: &DailyActivityMatrix) -> Result<()> {
    let mut out = String::with_capacity(HOURS * m.n_nodes() * 3);
    for h in 0..HOURS {
        let row: Vec<String> = m.row(h).iter().map(u32::to_string).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_matrix(path: &Path, home: &str, date: NaiveDate, n_nodes: usize) -> Result<DailyActivityMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != HOURS {
        return Err(Error::parse(ctx, format!("expected {HOURS} rows, got {}", rows.len())));
    }
    let mut grid = Vec::with_capacity(HOURS * n_nodes);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != n_nodes {
            return Err(Error::parse(ctx, format!("expected {n_nodes} columns, got {}", cells.len())));
        }
        for c in cells {
            grid.push(c.trim().parse::<u32>().map_err(|e| Error::parse(&ctx, e))?);
        }
    }
    DailyActivityMatrix::from_grid(home, date, n_nodes, grid)
}

/// Writes the corpus snapshot directory layout.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    corpus.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut labels = String::from("home_id,date,label,provenance\n");
    let mut phys = String::from("home_id,date,channel,value\n");
    let all = corpus
        .unlabelled
        .iter()
        .map(|m| (m, None))
        .chain(corpus.labelled.iter().map(|d| (&d.matrix, Some(d))));
    for (m, labelled) in all {
        let home_dir = dir.join(&m.home_id);
        fs::create_dir_all(&home_dir).map_err(|e| Error::io(&home_dir, e))?;
        write_matrix(&home_dir.join(format!("{}.csv", m.date)), m)?;
        if let Some(d) = labelled {
            labels.push_str(&format!(
                "{},{},{},{}\n",
                m.home_id,
                m.date,
                d.label.name(),
                d.provenance.name()
            ));
        }
        if let Some(p) = &m.phys {
            for ((ch, v), o) in p.channels.iter().zip(&p.values).zip(&p.observed) {
                if *o {
                    phys.push_str(&format!("{},{},{},{:?}\n", m.home_id, m.date, ch, v));
                }
            }
        }
    }
    let manifest = Manifest {
        nodes: corpus.nodes.clone(),
        phys_channels: corpus.phys_channels.clone(),
        unlabelled: corpus.unlabelled.len(),
        labelled: corpus.labelled.len(),
        content_hash: corpus.content_hash(),
    };
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write("labels.csv", labels)?;
    write("phys.csv", phys)?;
    write(
        "manifest.json",
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::parse("manifest", e))?,
    )
}

fn read_csv_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path.display().to_string(), e))
}

/// Reads a directory written by [`write_corpus`] and checks it against the
/// manifest's content hash. Days are ordered by home, then date.
pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let manifest_path = dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(
        &fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?,
    )
    .map_err(|e| Error::parse("manifest.json", e))?;
    let n_nodes = manifest.nodes.len();

    let mut labels: HashMap<(String, NaiveDate), (Label, Provenance, usize)> = HashMap::new();
    for (i, r) in read_csv_rows(&dir.join("labels.csv"))?.iter().enumerate() {
        let date = r[1].parse::<NaiveDate>().map_err(|e| Error::parse("labels.csv", e))?;
        labels.insert((r[0].to_string(), date), (r[2].parse()?, r[3].parse()?, i));
    }
    let mut phys: HashMap<(String, NaiveDate), Vec<(PhysChannel, f64)>> = HashMap::new();
    let phys_path = dir.join("phys.csv");
    if phys_path.exists() {
        for r in read_csv_rows(&phys_path)? {
            let date = r[1].parse::<NaiveDate>().map_err(|e| Error::parse("phys.csv", e))?;
            let value = r[3].parse::<f64>().map_err(|e| Error::parse("phys.csv", e))?;
            phys.entry((r[0].to_string(), date))
                .or_default()
                .push((r[2].parse()?, value));
        }
    }

    let mut homes: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .collect();
    homes.sort_by_key(|e| e.file_name());

    let mut unlabelled = Vec::new();
    let mut labelled = Vec::new();
    for home in homes {
        let home_id = home.file_name().to_string_lossy().to_string();
        let mut files: Vec<_> = fs::read_dir(home.path())
            .map_err(|e| Error::io(home.path(), e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        for path in files {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            let date = stem
                .parse::<NaiveDate>()
                .map_err(|e| Error::parse(path.display().to_string(), e))?;
            let mut m = read_matrix(&path, &home_id, date, n_nodes)?;
            if !manifest.phys_channels.is_empty() {
                let mut p = PhysVector::unobserved(&manifest.phys_channels);
                for (ch, v) in phys.remove(&(home_id.clone(), date)).unwrap_or_default() {
                    if let Some(i) = manifest.phys_channels.iter().position(|&c| c == ch) {
                        p.values[i] = v;
                        p.observed[i] = true;
                    }
                }
                m = m.with_phys(p);
            }
            match labels.get(&(home_id.clone(), date)) {
                Some(&(label, provenance, order)) => labelled.push((
                    order,
                    LabeledDay {
                        matrix: m,
                        label,
                        provenance,
                    },
                )),
                None => unlabelled.push(m),
            }
        }
    }
    labelled.sort_by_key(|(order, _)| *order);
    let corpus = Corpus {
        nodes: manifest.nodes,
        phys_channels: manifest.phys_channels,
        unlabelled,
        labelled: labelled.into_iter().map(|(_, d)| d).collect(),
    };
    corpus.validate()?;
    let hash = corpus.content_hash();
    if hash != manifest.content_hash {
        return Err(Error::Parse {
            context: manifest_path.display().to_string(),
            detail: format!("content hash {hash} does not match manifest {}", manifest.content_hash),
        });
    }
    Ok(corpus)
}
