//! CSV tables: labels, casing tallies, probability maps, events, trajectories
//! and parity test vectors.
//!
//! Every table has a header row. Lines starting with `#` are comments; writers
//! put the effective configuration there. Floats are written in their shortest
//! round-tripping form (at most 9 significant digits for `f32`), so a table
//! read back yields the exact values written.

use std::fmt::Debug;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use ccl_core::detect::{Assignment, CasingTally, CollarEvent, TallyEntry};
use ccl_core::stream::ProbabilityMap;
use ccl_core::WINDOW_LEN;

use crate::error::{IoError, Result};

/// Comment lines written above the header.
pub type Preamble<'a> = &'a [String];

struct Table<'a> {
    path: &'a Path,
    reader: csv::Reader<std::fs::File>,
}

impl<'a> Table<'a> {
    fn open(path: &'a Path, header: &[&str]) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| IoError::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
        let got = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        if got.iter().ne(header.iter().copied()) {
            let line = got.position().map_or(1, |p| p.line());
            return Err(IoError::row(
                path,
                line,
                format!("expected header `{}`, got `{}`", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        Ok(Self { path, reader })
    }

    /// Calls `f` with each record and its 1-based line number.
    fn rows(mut self, mut f: impl FnMut(&csv::StringRecord, u64) -> Result<()>) -> Result<()> {
        let mut rec = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut rec) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = rec.position().map_or(0, |p| p.line());
                    f(&rec, line)?;
                }
                Err(e) => return Err(csv_error(self.path, e)),
            }
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> IoError {
    match e.position() {
        Some(p) => IoError::row(path, p.line(), e.to_string()),
        None => IoError::invalid(path, e.to_string()),
    }
}

fn field<T: FromStr>(path: &Path, rec: &csv::StringRecord, line: u64, i: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|e| IoError::row(path, line, format!("column {name}: cannot parse `{raw}`: {e}")))
}

fn finite<T: Into<f64> + Copy>(path: &Path, line: u64, name: &str, v: T) -> Result<T> {
    if v.into().is_finite() {
        Ok(v)
    } else {
        Err(IoError::row(path, line, format!("column {name}: value must be finite")))
    }
}

struct Out {
    path: std::path::PathBuf,
    buf: Vec<u8>,
}

impl Out {
    fn new(path: &Path, preamble: Preamble, header: &str) -> Self {
        let mut buf = Vec::new();
        for line in preamble {
            for l in line.lines() {
                let _ = writeln!(buf, "# {l}");
            }
        }
        let _ = writeln!(buf, "{header}");
        Self {
            path: path.to_path_buf(),
            buf,
        }
    }

    fn finish(self) -> Result<()> {
        crate::error::write(&self.path, self.buf)
    }
}

/// Shortest round-tripping text of a float.
pub fn fmt_float<T: Debug>(v: T) -> String {
    format!("{v:?}")
}

pub fn load_labels(path: &Path) -> Result<Vec<u64>> {
    let mut out: Vec<u64> = Vec::new();
    Table::open(path, &["index"])?.rows(|rec, line| {
        let v = field(path, rec, line, 0, "index")?;
        if out.last().is_some_and(|&last| v < last) {
            return Err(IoError::row(path, line, "labels must be sorted"));
        }
        out.push(v);
        Ok(())
    })?;
    Ok(out)
}

pub fn store_labels(path: &Path, labels: &[u64], preamble: Preamble) -> Result<()> {
    let mut o = Out::new(path, preamble, "index");
    for l in labels {
        let _ = writeln!(o.buf, "{l}");
    }
    o.finish()
}

pub fn load_tally(path: &Path) -> Result<CasingTally> {
    let mut entries: Vec<TallyEntry> = Vec::new();
    Table::open(path, &["joint", "depth_m"])?.rows(|rec, line| {
        let joint = field(path, rec, line, 0, "joint")?;
        let depth_m = finite(path, line, "depth_m", field::<f64>(path, rec, line, 1, "depth_m")?)?;
        if let Some(prev) = entries.last() {
            if depth_m <= prev.depth_m {
                return Err(IoError::row(
                    path,
                    line,
                    format!("non-monotone tally: depth {depth_m} after {}", prev.depth_m),
                ));
            }
        }
        entries.push(TallyEntry { joint, depth_m });
        Ok(())
    })?;
    CasingTally::new(entries).map_err(|e| IoError::core(path, e))
}

pub fn store_tally(path: &Path, tally: &CasingTally, preamble: Preamble) -> Result<()> {
    let mut o = Out::new(path, preamble, "joint,depth_m");
    for e in tally.entries() {
        let _ = writeln!(o.buf, "{},{}", e.joint, fmt_float(e.depth_m));
    }
    o.finish()
}

pub fn load_probmap(path: &Path) -> Result<ProbabilityMap> {
    let mut map = ProbabilityMap::new();
    Table::open(path, &["index", "probability"])?.rows(|rec, line| {
        let i = field(path, rec, line, 0, "index")?;
        let p: f32 = field(path, rec, line, 1, "probability")?;
        map.push(i, p).map_err(|e| IoError::row(path, line, e.to_string()))
    })?;
    Ok(map)
}

pub fn store_probmap(path: &Path, map: &ProbabilityMap, preamble: Preamble) -> Result<()> {
    let mut o = Out::new(path, preamble, "index,probability");
    o.buf.reserve(map.len() * 16);
    for (i, p) in map.iter() {
        let _ = writeln!(o.buf, "{i},{}", fmt_float(p));
    }
    o.finish()
}

/// One row of an events table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRow {
    pub event: CollarEvent,
    pub depth_m: Option<f64>,
}

pub const EVENTS_HEADER: [&str; 6] = ["start", "end", "peak", "centroid", "timestamp_s", "depth_m"];

impl EventRow {
    /// Rows for `events`, with depths from a tally correlation of them.
    pub fn with_depths(events: &[CollarEvent], assignments: &[Assignment]) -> Vec<Self> {
        events
            .iter()
            .enumerate()
            .map(|(k, &event)| EventRow {
                event,
                depth_m: assignments.get(k).map(|a| a.depth_m),
            })
            .collect()
    }
}

/// Writes events; the depth column is blank when a row has none.
pub fn store_events(path: &Path, rows: &[EventRow], preamble: Preamble) -> Result<()> {
    let mut o = Out::new(path, preamble, &EVENTS_HEADER.join(","));
    for row in rows {
        let e = &row.event;
        let depth = row.depth_m.map_or(String::new(), fmt_float);
        let _ = writeln!(
            o.buf,
            "{},{},{},{},{},{depth}",
            e.start,
            e.end,
            fmt_float(e.peak),
            fmt_float(e.centroid),
            fmt_float(e.timestamp_s())
        );
    }
    o.finish()
}

pub fn load_events(path: &Path) -> Result<Vec<EventRow>> {
    let mut out: Vec<EventRow> = Vec::new();
    Table::open(path, &EVENTS_HEADER)?.rows(|rec, line| {
        let event = CollarEvent {
            start: field(path, rec, line, 0, "start")?,
            end: field(path, rec, line, 1, "end")?,
            peak: field(path, rec, line, 2, "peak")?,
            centroid: finite(path, line, "centroid", field::<f64>(path, rec, line, 3, "centroid")?)?,
        };
        if event.end < event.start {
            return Err(IoError::row(path, line, "end before start"));
        }
        if out.last().is_some_and(|prev| event.centroid < prev.event.centroid) {
            return Err(IoError::row(path, line, "events must be in time order"));
        }
        let depth_m = match rec.get(5).unwrap_or("") {
            "" => None,
            _ => Some(field(path, rec, line, 5, "depth_m")?),
        };
        out.push(EventRow { event, depth_m });
        Ok(())
    })?;
    Ok(out)
}

pub fn store_trajectory(path: &Path, trajectory: &[(f64, f64)], preamble: Preamble) -> Result<()> {
    let mut o = Out::new(path, preamble, "time_s,depth_m");
    for (t, d) in trajectory {
        let _ = writeln!(o.buf, "{},{}", fmt_float(*t), fmt_float(*d));
    }
    o.finish()
}

/// A model input window with the logit it should produce.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVector {
    pub input: Vec<f32>,
    pub logit: f32,
}

fn vector_header() -> Vec<String> {
    (0..WINDOW_LEN).map(|i| format!("x{i}")).chain(["logit".to_string()]).collect()
}

/// Parity vectors: columns `x0..x159,logit`.
pub fn load_test_vectors(path: &Path) -> Result<Vec<TestVector>> {
    let header = vector_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    Table::open(path, &header)?.rows(|rec, line| {
        if rec.len() != WINDOW_LEN + 1 {
            return Err(IoError::row(path, line, format!("expected {} columns, got {}", WINDOW_LEN + 1, rec.len())));
        }
        let mut input = Vec::with_capacity(WINDOW_LEN);
        for (i, name) in header.iter().enumerate().take(WINDOW_LEN) {
            input.push(finite(path, line, name, field::<f32>(path, rec, line, i, name)?)?);
        }
        let logit = finite(path, line, "logit", field::<f32>(path, rec, line, WINDOW_LEN, "logit")?)?;
        out.push(TestVector { input, logit });
        Ok(())
    })?;
    Ok(out)
}

pub fn store_test_vectors(path: &Path, vectors: &[TestVector], preamble: Preamble) -> Result<()> {
    let mut o = Out::new(path, preamble, &vector_header().join(","));
    for v in vectors {
        if v.input.len() != WINDOW_LEN {
            return Err(IoError::invalid(path, format!("test vector has {} inputs, expected {WINDOW_LEN}", v.input.len())));
        }
        let row: Vec<String> = v.input.iter().chain([&v.logit]).map(|x| fmt_float(*x)).collect();
        let _ = writeln!(o.buf, "{}", row.join(","));
    }
    o.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str, body: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        (dir, p)
    }

    #[test]
    fn decreasing_tally_names_the_line() {
        let (_d, p) = tmp("t.csv", "# well=A\njoint,depth_m\n1,1000.0\n2,1009.6\n3,1005.0\n");
        let e = load_tally(&p).unwrap_err();
        assert!(matches!(e, IoError::Row { line: 5, .. }), "{e}");
        assert!(e.to_string().contains("non-monotone tally"));
    }

    #[test]
    fn malformed_row_names_the_line() {
        let (_d, p) = tmp("l.csv", "index\n10\n20\nabc\n");
        assert!(matches!(load_labels(&p).unwrap_err(), IoError::Row { line: 4, .. }));
        let (_d, p) = tmp("l.csv", "idx\n10\n");
        assert!(load_labels(&p).is_err());
        let (_d, p) = tmp("m.csv", "index,probability\n200,0.5\n199,0.5\n");
        assert!(matches!(load_probmap(&p).unwrap_err(), IoError::Row { line: 3, .. }));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let (_d, p) = tmp("m.csv", "index,probability\n200,0.5,7\n");
        assert!(load_probmap(&p).is_err());
    }

    #[test]
    fn events_with_and_without_depth() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let events = [
            CollarEvent {
                start: 100,
                end: 140,
                peak: 0.75,
                centroid: 40.5,
            },
            CollarEvent {
                start: 9000,
                end: 9030,
                peak: 0.9,
                centroid: 8935.0,
            },
        ];
        let rows = [
            EventRow {
                event: events[0],
                depth_m: None,
            },
            EventRow {
                event: events[1],
                depth_m: Some(1028.8),
            },
        ];
        store_events(&p, &rows, &["threshold = 0.5".into()]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "# threshold = 0.5\nstart,end,peak,centroid,timestamp_s,depth_m\n100,140,0.75,40.5,0.0405,\n9000,9030,0.9,8935.0,8.935,1028.8\n"
        );
        let back = load_events(&p).unwrap();
        assert_eq!(back[0].depth_m, None);
        assert_eq!(back[1].depth_m, Some(1028.8));
        assert_eq!(back[1].event, events[1]);
    }
}
