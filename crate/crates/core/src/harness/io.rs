//! Trajectory CSV (`k,u,y[,w][,x1..xn]`) and generic numeric tables.
//!
//! A trajectory file may start with a `# seed: <u64>` comment line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Trajectory;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn csv_err(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line());
    Error::Parse { row, detail: e.to_string() }
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    write_trajectory(traj, BufWriter::new(file))
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    traj.validate()?;
    writeln!(out, "# seed: {}", traj.seed)?;
    let mut header = vec!["k".to_string(), "u".into(), "y".into()];
    if traj.w.is_some() {
        header.push("w".into());
    }
    let nx = traj.state_dim().unwrap_or(0);
    header.extend((1..=nx).map(|i| format!("x{i}")));
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..traj.len() {
        row.clear();
        row.push(k.to_string());
        row.push(traj.u[k].to_string());
        row.push(traj.y[k].to_string());
        if let Some(w) = &traj.w {
            row.push(w[k].to_string());
        }
        if let Some(x) = &traj.x {
            row.extend(x[k].iter().map(f64::to_string));
        }
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_trajectory(BufReader::new(file))
}

/// Column layout of a trajectory header.
#[derive(Clone, Debug, PartialEq)]
struct Layout {
    u: usize,
    y: usize,
    w: Option<usize>,
    x: Vec<usize>,
}

fn parse_header(header: &csv::StringRecord) -> Result<Layout> {
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let missing = |name: &str| Error::Parse { row: 1, detail: format!("header is missing column `{name}`") };
    if find("k") != Some(0) {
        return Err(Error::Parse { row: 1, detail: "first column must be `k`".into() });
    }
    let u = find("u").ok_or_else(|| missing("u"))?;
    let y = find("y").ok_or_else(|| missing("y"))?;
    let w = find("w");
    let mut x = Vec::new();
    while let Some(col) = find(&format!("x{}", x.len() + 1)) {
        x.push(col);
    }
    let known = 3 + w.is_some() as usize + x.len();
    if header.len() != known {
        return Err(Error::Parse { row: 1, detail: format!("unexpected columns in header `{}`", header.iter().collect::<Vec<_>>().join(",")) });
    }
    Ok(Layout { u, y, w, x })
}

fn field(record: &csv::StringRecord, col: usize, row: u64) -> Result<f64> {
    let text = record.get(col).unwrap_or("").trim();
    text.parse::<f64>()
        .map_err(|_| Error::Parse { row, detail: format!("column {} holds `{text}`, not a number", col + 1) })
}

/// Lines before the header that hold comments; returns the seed if one is
/// recorded and the text that follows.
fn split_preamble<R: BufRead>(mut input: R) -> Result<(u64, u64, String)> {
    let mut seed = 0;
    let mut skipped = 0;
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Ok((seed, skipped, String::new()));
        }
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            skipped += 1;
            if let Some(value) = comment.trim().strip_prefix("seed:") {
                seed = value.trim().parse().map_err(|_| Error::Parse { row: skipped, detail: format!("bad seed `{}`", value.trim()) })?;
            }
            continue;
        }
        let mut rest = line.clone();
        input.read_to_string(&mut rest)?;
        return Ok((seed, skipped, rest));
    }
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<Trajectory> {
    let (seed, offset, body) = split_preamble(input)?;
    let shift = |row: u64| row + offset;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.is_empty() {
        return Err(Error::Parse { row: shift(1), detail: "empty file".into() });
    }
    let layout = parse_header(&header).map_err(|e| match e {
        Error::Parse { row, detail } => Error::Parse { row: shift(row), detail },
        other => other,
    })?;
    let mut traj = Trajectory {
        u: Vec::new(),
        y: Vec::new(),
        w: layout.w.map(|_| Vec::new()),
        x: (!layout.x.is_empty()).then(Vec::new),
        seed,
    };
    for record in reader.records() {
        let record = record.map_err(|e| match csv_err(e) {
            Error::Parse { row, detail } => Error::Parse { row: shift(row), detail },
            other => other,
        })?;
        let row = shift(record.position().map_or(0, |p| p.line()));
        let expected = traj.y.len();
        let k = record.get(0).unwrap_or("").trim();
        if k.parse::<usize>().ok() != Some(expected) {
            return Err(Error::Parse { row, detail: format!("expected k = {expected}, found `{k}`") });
        }
        traj.u.push(field(&record, layout.u, row)?);
        traj.y.push(field(&record, layout.y, row)?);
        if let (Some(col), Some(w)) = (layout.w, traj.w.as_mut()) {
            w.push(field(&record, col, row)?);
        }
        if let Some(x) = traj.x.as_mut() {
            x.push(layout.x.iter().map(|&c| field(&record, c, row)).collect::<Result<_>>()?);
        }
    }
    Ok(traj)
}

/// Streams `(k, u, y)` rows of a trajectory CSV without loading the file.
pub struct TrajectoryRows {
    reader: csv::Reader<BufReader<File>>,
    layout: Layout,
    next_k: usize,
}

impl TrajectoryRows {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(BufReader::new(file));
        let header = reader.headers().map_err(csv_err)?.clone();
        let layout = parse_header(&header)?;
        Ok(Self { reader, layout, next_k: 0 })
    }
}

impl Iterator for TrajectoryRows {
    type Item = Result<(usize, f64, f64)>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut record = csv::StringRecord::new();
        match self.reader.read_record(&mut record) {
            Ok(false) => None,
            Err(e) => Some(Err(csv_err(e))),
            Ok(true) => {
                let row = record.position().map_or(0, |p| p.line());
                let k = self.next_k;
                self.next_k += 1;
                let parsed = (|| {
                    let text = record.get(0).unwrap_or("").trim();
                    if text.parse::<usize>().ok() != Some(k) {
                        return Err(Error::Parse { row, detail: format!("expected k = {k}, found `{text}`") });
                    }
                    Ok((k, field(&record, self.layout.u, row)?, field(&record, self.layout.y, row)?))
                })();
                Some(parsed)
            }
        }
    }
}

/// CSV writer for tables whose first column is an integer index.
pub struct TableWriter<W: Write> {
    writer: csv::Writer<W>,
    row: Vec<String>,
}

impl TableWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &[String]) -> Result<Self> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        Self::new(BufWriter::new(file), header)
    }
}

impl<W: Write> TableWriter<W> {
    pub fn new(out: W, header: &[String]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(header).map_err(csv_err)?;
        Ok(Self { writer, row: Vec::with_capacity(header.len()) })
    }

    pub fn write(&mut self, index: u64, values: &[f64]) -> Result<()> {
        self.row.clear();
        self.row.push(index.to_string());
        self.row.extend(values.iter().map(f64::to_string));
        self.writer.write_record(&self.row).map_err(csv_err)
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
