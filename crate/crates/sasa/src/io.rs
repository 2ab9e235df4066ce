//! Long-format dataset CSV, adjacency edge lists and partition files.
//!
//! Dataset files have one row per `(location, replicate)` with a header
//! naming `location_id`, `rep_id`, `y`, `z1..zq` and `x1..xp` in any order.
//! Lines starting with `#` are skipped. Locations are indexed by first
//! appearance; rows within a location are ordered by their integer `rep_id`.
//! A row whose `location_id` is set and every other cell is blank declares a
//! location without contributing data, so a location with no measurements
//! is reported rather than silently dropped.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use sasa_core::{AdjacencyGraph, Dataset, LocationBlock, Partition, SasaError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Open { path: String, source: std::io::Error },

    #[error("row {row}, column `{column}`: {message}")]
    Cell { row: u64, column: String, message: String },

    #[error("row {row}: {message}")]
    Row { row: u64, message: String },

    #[error("header: {0}")]
    Header(String),

    #[error("location `{id}`: {message}")]
    Location { id: String, message: String },

    #[error(transparent)]
    Dataset(#[from] SasaError),
}

fn open(path: &Path) -> Result<File, LoadError> {
    File::open(path).map_err(|source| LoadError::Open {
        path: path.display().to_string(),
        source,
    })
}

fn reader<R: Read>(r: R, headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(headers)
        .from_reader(r)
}

fn record_error(e: csv::Error) -> LoadError {
    let row = e.position().map_or(0, |p| p.line());
    LoadError::Row {
        row,
        message: e.to_string(),
    }
}

struct Layout {
    location: usize,
    rep: usize,
    y: usize,
    z: Vec<usize>,
    x: Vec<usize>,
}

/// Maps `prefix1..prefixK` columns to their positions; numbering must be
/// contiguous from 1.
fn numbered(headers: &csv::StringRecord, prefix: char) -> Result<Vec<usize>, LoadError> {
    let mut found: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(pos, h)| {
            let rest = h.strip_prefix(prefix)?;
            rest.parse::<usize>().ok().map(|k| (k, pos))
        })
        .collect();
    found.sort_unstable();
    for (want, &(k, _)) in (1..).zip(&found) {
        if k != want {
            return Err(LoadError::Header(format!("missing column `{prefix}{want}`")));
        }
    }
    Ok(found.into_iter().map(|(_, pos)| pos).collect())
}

fn layout(headers: &csv::StringRecord) -> Result<Layout, LoadError> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LoadError::Header(format!("missing column `{name}`")))
    };
    let layout = Layout {
        location: find("location_id")?,
        rep: find("rep_id")?,
        y: find("y")?,
        z: numbered(headers, 'z')?,
        x: numbered(headers, 'x')?,
    };
    if layout.x.is_empty() {
        return Err(LoadError::Header("missing column `x1`".into()));
    }
    let known = 3 + layout.z.len() + layout.x.len();
    if headers.len() != known {
        let extra = headers
            .iter()
            .find(|h| !matches!(*h, "location_id" | "rep_id" | "y") && numbered_name(h).is_none())
            .unwrap_or("?");
        return Err(LoadError::Header(format!("unexpected column `{extra}`")));
    }
    Ok(layout)
}

fn numbered_name(h: &str) -> Option<usize> {
    h.strip_prefix(['z', 'x'])?.parse().ok()
}

struct Row {
    rep: i64,
    line: u64,
    y: f64,
    z: Vec<f64>,
    x: Vec<f64>,
}

fn number(record: &csv::StringRecord, headers: &csv::StringRecord, pos: usize, line: u64) -> Result<f64, LoadError> {
    let cell = &record[pos];
    let cell_error = |message: String| LoadError::Cell {
        row: line,
        column: headers[pos].to_string(),
        message,
    };
    if cell.is_empty() {
        return Err(cell_error("empty value".into()));
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| cell_error(format!("non-numeric value `{cell}`")))?;
    if !v.is_finite() {
        return Err(cell_error("non-finite value".into()));
    }
    Ok(v)
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset, LoadError> {
    let mut rdr = reader(input, true);
    let headers = rdr.headers().map_err(record_error)?.clone();
    let lay = layout(&headers)?;
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<Row>> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(record_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = rec[lay.location].to_string();
        if id.is_empty() {
            return Err(LoadError::Cell {
                row: line,
                column: "location_id".into(),
                message: "empty value".into(),
            });
        }
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Vec::new()
        });
        if rec
            .iter()
            .enumerate()
            .all(|(pos, c)| pos == lay.location || c.is_empty())
        {
            continue;
        }
        let rep_cell = &rec[lay.rep];
        let rep = rep_cell.parse::<i64>().map_err(|_| LoadError::Cell {
            row: line,
            column: "rep_id".into(),
            message: format!("expected an integer, found `{rep_cell}`"),
        })?;
        let y = number(&rec, &headers, lay.y, line)?;
        let z = lay
            .z
            .iter()
            .map(|&p| number(&rec, &headers, p, line))
            .collect::<Result<_, _>>()?;
        let x = lay
            .x
            .iter()
            .map(|&p| number(&rec, &headers, p, line))
            .collect::<Result<_, _>>()?;
        entry.push(Row { rep, line, y, z, x });
    }
    let (q, p) = (lay.z.len(), lay.x.len());
    let mut blocks = Vec::with_capacity(order.len());
    for id in order {
        let mut r = rows.remove(&id).expect("every ordered id has rows");
        if r.is_empty() {
            return Err(LoadError::Location {
                id,
                message: "empty location".into(),
            });
        }
        r.sort_by_key(|row| row.rep);
        if let Some(w) = r.windows(2).find(|w| w[0].rep == w[1].rep) {
            return Err(LoadError::Cell {
                row: w[1].line,
                column: "rep_id".into(),
                message: format!("duplicate rep_id {} for location `{id}`", w[1].rep),
            });
        }
        let ni = r.len();
        let y = DVector::from_iterator(ni, r.iter().map(|row| row.y));
        let z = DMatrix::from_fn(ni, q, |h, c| r[h].z[c]);
        let x = DMatrix::from_fn(ni, p, |h, c| r[h].x[c]);
        blocks.push(LocationBlock::new(id, y, z, x));
    }
    Ok(Dataset::with_dims(blocks, q, p)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, LoadError> {
    read_dataset(open(path)?)
}

/// Writes `dataset` in the long format; `rep_id` runs `1..=n_i`. Values are
/// printed in shortest round-trip form, so reading back is exact.
pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["location_id".to_string(), "rep_id".into(), "y".into()];
    header.extend((1..=dataset.q()).map(|k| format!("z{k}")));
    header.extend((1..=dataset.p()).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for b in dataset.blocks() {
        for h in 0..b.replicates() {
            let mut rec = vec![b.location_id.clone(), (h + 1).to_string(), b.y[h].to_string()];
            rec.extend(b.z.row(h).iter().map(f64::to_string));
            rec.extend(b.x.row(h).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `id_a,id_b` rows. A leading `id_a,id_b` header is optional.
/// Repeated and reversed pairs collapse into one edge.
pub fn read_adjacency<R: Read>(input: R, ids: &[String]) -> Result<AdjacencyGraph, LoadError> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut graph = AdjacencyGraph::empty(ids.len());
    for (k, rec) in reader(input, false).records().enumerate() {
        let rec = rec.map_err(record_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(LoadError::Row {
                row: line,
                message: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        if k == 0 && &rec[0] == "id_a" && &rec[1] == "id_b" {
            continue;
        }
        let lookup = |col: usize| {
            index.get(&rec[col]).copied().ok_or_else(|| LoadError::Cell {
                row: line,
                column: ["id_a", "id_b"][col].into(),
                message: format!("unknown location id `{}`", &rec[col]),
            })
        };
        let (a, b) = (lookup(0)?, lookup(1)?);
        if a == b {
            return Err(LoadError::Row {
                row: line,
                message: format!("self-loop on location `{}`", &rec[0]),
            });
        }
        graph.add_edge(a, b)?;
    }
    Ok(graph)
}

pub fn load_adjacency(path: &Path, ids: &[String]) -> Result<AdjacencyGraph, LoadError> {
    read_adjacency(open(path)?, ids)
}

/// Reads `location_id,group` rows covering every location exactly once.
pub fn read_partition<R: Read>(input: R, ids: &[String]) -> Result<Partition, LoadError> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut rdr = reader(input, true);
    let headers = rdr.headers().map_err(record_error)?.clone();
    let pos = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LoadError::Header(format!("missing column `{name}`")))
    };
    let (loc_col, group_col) = (pos("location_id")?, pos("group")?);
    let mut labels: Vec<Option<String>> = vec![None; ids.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(record_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = &rec[loc_col];
        let i = *index.get(id).ok_or_else(|| LoadError::Cell {
            row: line,
            column: "location_id".into(),
            message: format!("unknown location id `{id}`"),
        })?;
        if labels[i].is_some() {
            return Err(LoadError::Cell {
                row: line,
                column: "location_id".into(),
                message: format!("location `{id}` listed twice"),
            });
        }
        let g = &rec[group_col];
        if g.is_empty() {
            return Err(LoadError::Cell {
                row: line,
                column: "group".into(),
                message: "empty value".into(),
            });
        }
        labels[i] = Some(g.to_string());
    }
    let labels: Vec<String> = labels
        .into_iter()
        .zip(ids)
        .map(|(l, id)| {
            l.ok_or_else(|| LoadError::Location {
                id: id.clone(),
                message: "missing from partition file".into(),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(Partition::from_labels(&labels)?)
}

pub fn load_partition(path: &Path, ids: &[String]) -> Result<Partition, LoadError> {
    read_partition(open(path)?, ids)
}

pub fn write_adjacency<W: Write>(graph: &AdjacencyGraph, ids: &[String], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id_a", "id_b"])?;
    for (a, b) in graph.edges() {
        w.write_record([&ids[a], &ids[b]])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_partition<W: Write>(partition: &Partition, ids: &[String], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["location_id", "group"])?;
    for (id, g) in ids.iter().zip(partition.assignment()) {
        w.write_record([id.clone(), (g + 1).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn location_ids(dataset: &Dataset) -> Vec<String> {
    dataset.blocks().iter().map(|b| b.location_id.clone()).collect()
}
