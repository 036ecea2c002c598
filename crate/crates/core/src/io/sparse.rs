use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};

use super::labels::LabelMap;
use crate::error::{Error, Result};
use crate::linear::LabeledPoint;

type Parsed<'a> = (Option<&'a str>, Vec<(usize, f32)>);

/// Parses one line; `Ok(None)` for blank and comment-only lines.
fn parse_line(line: &str) -> std::result::Result<Option<Parsed<'_>>, String> {
    let body = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut tokens = body.split_whitespace().peekable();
    let Some(&first) = tokens.peek() else {
        return Ok(None);
    };
    let label = if first.contains(':') {
        None
    } else {
        tokens.next();
        Some(first)
    };
    let mut feats = Vec::new();
    let mut last = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| format!("expected <index>:<value>, found {tok:?}"))?;
        let idx: usize = idx.parse().map_err(|_| format!("bad feature index {idx:?}"))?;
        if idx == 0 {
            return Err("feature indices are 1-based".into());
        }
        if idx <= last {
            return Err(format!("feature indices must be ascending ({idx} after {last})"));
        }
        let val: f32 = val.parse().map_err(|_| format!("bad feature value {val:?}"))?;
        if !val.is_finite() {
            return Err(format!("non-finite feature value at index {idx}"));
        }
        last = idx;
        feats.push((idx, val));
    }
    Ok(Some((label, feats)))
}

/// Summary of one pass over a sparse text file.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseScan {
    pub n_points: u64,
    pub max_index: usize,
    /// Distinct labels in order of first appearance.
    pub labels: Vec<String>,
}

pub fn scan_sparse(path: impl AsRef<Path>) -> Result<SparseScan> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut scan = SparseScan { n_points: 0, max_index: 0, labels: Vec::new() };
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let parsed = parse_line(&line).map_err(|msg| Error::Parse {
            path: path.to_owned(),
            line: i as u64 + 1,
            msg,
        })?;
        if let Some((label, feats)) = parsed {
            scan.n_points += 1;
            if let Some(&(idx, _)) = feats.last() {
                scan.max_index = scan.max_index.max(idx);
            }
            if let Some(l) = label {
                if seen.insert(l.to_owned()) {
                    scan.labels.push(l.to_owned());
                }
            }
        }
    }
    Ok(scan)
}

#[derive(Debug, Clone, Default)]
pub struct SparseOptions {
    /// Declared dimensionality; inferred from the largest index when absent.
    pub n_dims: Option<usize>,
    /// Existing vocabulary (e.g. a model's). Labels it lacks are appended in sorted order.
    pub labels: Option<LabelMap>,
}

/// Streaming reader that densifies each line.
pub struct SparseTextReader {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line_no: u64,
    dims: usize,
    labels: LabelMap,
    n_points: u64,
    done: bool,
}

/// Opens a sparse text file. A first pass determines the point count, the
/// dimensionality (unless given) and the label vocabulary; the returned
/// reader then streams the file line by line.
pub fn read_sparse_text(path: impl AsRef<Path>, opts: &SparseOptions) -> Result<SparseTextReader> {
    let path = path.as_ref();
    let scan = scan_sparse(path)?;
    if scan.n_points == 0 {
        return Err(Error::NoData);
    }
    let dims = opts.n_dims.unwrap_or(scan.max_index);
    if dims == 0 {
        return Err(Error::invalid("cannot infer dimensionality: no feature indices"));
    }
    let labels = match &opts.labels {
        Some(existing) => {
            let mut map = existing.clone();
            let fresh: Vec<&String> = scan.labels.iter().filter(|l| map.id(l).is_none()).collect();
            for name in LabelMap::sorted(&fresh).names() {
                map.id_or_insert(name);
            }
            map
        }
        None => LabelMap::sorted(&scan.labels),
    };
    Ok(SparseTextReader {
        path: path.to_owned(),
        lines: BufReader::new(File::open(path)?).lines(),
        line_no: 0,
        dims,
        labels,
        n_points: scan.n_points,
        done: false,
    })
}

impl SparseTextReader {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_points(&self) -> u64 {
        self.n_points
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    fn err(&self, msg: String) -> Error {
        Error::Parse { path: self.path.clone(), line: self.line_no, msg }
    }

    /// Next point with its label id, if the line carries one.
    pub fn next_record(&mut self) -> Option<Result<(Option<u32>, Vec<f32>)>> {
        if self.done {
            return None;
        }
        let out = loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => break Err(e.into()),
            };
            self.line_no += 1;
            let (label, feats) = match parse_line(&line) {
                Ok(Some(p)) => p,
                Ok(None) => continue,
                Err(msg) => break Err(self.err(msg)),
            };
            if let Some(&(idx, _)) = feats.last() {
                if idx > self.dims {
                    break Err(self.err(format!("feature index {idx} exceeds dimensionality {}", self.dims)));
                }
            }
            let mut dense = vec![0.0f32; self.dims];
            for (idx, val) in feats {
                dense[idx - 1] = val;
            }
            // every label was registered by the scan pass
            let id = label.map(|l| self.labels.id(l).expect("label seen during scan"));
            break Ok((id, dense));
        };
        if out.is_err() {
            self.done = true;
        }
        Some(out)
    }
}

impl Iterator for SparseTextReader {
    type Item = Result<LabeledPoint>;

    fn next(&mut self) -> Option<Self::Item> {
        let rec = self.next_record()?;
        Some(rec.and_then(|(label, features)| match label {
            Some(label) => Ok(LabeledPoint { features, label }),
            None => {
                self.done = true;
                Err(self.err("missing label".into()))
            }
        }))
    }
}

/// Writes points as sparse text, omitting zero features.
pub fn write_sparse_text<'a, I>(path: impl AsRef<Path>, points: I, labels: &LabelMap) -> Result<()>
where
    I: IntoIterator<Item = &'a LabeledPoint>,
{
    let mut w = BufWriter::new(File::create(path)?);
    for p in points {
        let name = labels
            .name(p.label)
            .ok_or_else(|| Error::invalid(format!("class id {} has no label", p.label)))?;
        w.write_all(name.as_bytes())?;
        for (i, v) in p.features.iter().enumerate() {
            if *v != 0.0 {
                write!(w, " {}:{}", i + 1, v)?;
            }
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
