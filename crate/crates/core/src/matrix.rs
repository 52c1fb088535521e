//! Per-server response message matrices.
//!
//! Responses from one server with one label are sorted by capture time and
//! cut into consecutive groups of [`COLS`] packets. Each packet becomes a
//! column of [`ROWS`] header features, and every row is min-max normalized
//! inside its matrix. Remainders shorter than a full group are dropped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use crate::exec::Execution;
use crate::label::Label;
use crate::matcher::LabeledResponse;

pub const ROWS: usize = 14;
pub const COLS: usize = 100;
pub const CELLS: usize = ROWS * COLS;

/// Row names, top to bottom.
pub const ROW_NAMES: [&str; ROWS] = [
    "timestamp",
    "port",
    "size",
    "opcode",
    "aa",
    "tc",
    "rd",
    "ra",
    "z",
    "rcode",
    "qdcount",
    "ancount",
    "nscount",
    "adcount",
];

#[derive(Debug, thiserror::Error)]
pub enum MatrixError {
    #[error("row contains a non-finite value")]
    NonFiniteInput,
    #[error("line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// The fourteen features of one response, in row order.
pub type RawFeatureVector = [f64; ROWS];

pub fn raw_features(r: &LabeledResponse) -> RawFeatureVector {
    let m = &r.message;
    [
        r.record.timestamp(),
        f64::from(r.record.src_port),
        m.size as f64,
        f64::from(m.opcode),
        f64::from(m.aa),
        f64::from(m.tc),
        f64::from(m.rd),
        f64::from(m.ra),
        f64::from(m.z),
        f64::from(m.rcode),
        f64::from(m.qdcount),
        f64::from(m.ancount),
        f64::from(m.nscount),
        f64::from(m.adcount),
    ]
}

/// Min-max normalize `row` in place. Constant rows become all zeros.
pub fn normalize_in_place(row: &mut [f64]) -> Result<(), MatrixError> {
    if row.iter().any(|v| !v.is_finite()) {
        return Err(MatrixError::NonFiniteInput);
    }
    let (min, max) = row
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = max - min;
    if span > 0.0 && span.is_finite() {
        row.iter_mut().for_each(|v| *v = (*v - min) / span);
    } else {
        row.iter_mut().for_each(|v| *v = 0.0);
    }
    Ok(())
}

pub fn normalize_row(raw: &[f64]) -> Result<Vec<f64>, MatrixError> {
    let mut row = raw.to_vec();
    normalize_in_place(&mut row)?;
    Ok(row)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub server_ip: Ipv4Addr,
    pub label: Label,
    pub first_ts: f64,
    pub last_ts: f64,
    /// Row-major, `ROWS * COLS` cells in [0, 1].
    pub values: Vec<f64>,
}

impl FeatureMatrix {
    /// Build from exactly [`COLS`] responses already in capture order.
    pub fn from_responses(group: &[&LabeledResponse]) -> Result<Self, MatrixError> {
        assert_eq!(group.len(), COLS, "a matrix takes exactly {COLS} responses");
        let mut values = vec![0.0; CELLS];
        for (col, r) in group.iter().enumerate() {
            for (row, v) in raw_features(r).into_iter().enumerate() {
                values[row * COLS + col] = v;
            }
        }
        for row in values.chunks_mut(COLS) {
            normalize_in_place(row)?;
        }
        Ok(FeatureMatrix {
            server_ip: group[0].server_ip,
            label: group[0].label,
            first_ts: group[0].record.timestamp(),
            last_ts: group[COLS - 1].record.timestamp(),
            values,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * COLS..(i + 1) * COLS]
    }

    /// Flattened row-major feature vector used by the classifier.
    pub fn as_vector(&self) -> &[f64] {
        &self.values
    }

    pub fn is_degenerate_row(&self, i: usize) -> bool {
        self.row(i).iter().all(|&v| v == 0.0)
    }

    pub fn nonzero_rows(&self) -> usize {
        (0..ROWS).filter(|&i| !self.is_degenerate_row(i)).count()
    }

    /// Check shape, range and per-row normalization. Returns a description
    /// of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.values.len() != CELLS {
            return Err(format!(
                "expected {CELLS} cells, found {}",
                self.values.len()
            ));
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(format!("cell {v} outside [0, 1]"));
        }
        for (i, name) in ROW_NAMES.iter().enumerate() {
            let row = self.row(i);
            let has0 = row.contains(&0.0);
            let has1 = row.contains(&1.0);
            if !(self.is_degenerate_row(i) || (has0 && has1)) {
                return Err(format!("row {i} ({name}) is not normalized"));
            }
        }
        if self.first_ts > self.last_ts {
            return Err("first_ts after last_ts".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub partitions: usize,
    pub matrices: usize,
    /// Responses left over in incomplete trailing groups.
    pub discarded: usize,
}

/// Group responses per (server, label), sort by time and chunk into matrices.
///
/// Output is ordered by server address, then label, then first timestamp,
/// independent of `exec`.
pub fn build_matrices(
    responses: &[LabeledResponse],
    exec: Execution,
) -> Result<(Vec<FeatureMatrix>, BuildStats), MatrixError> {
    let mut partitions: BTreeMap<(u32, Label), Vec<&LabeledResponse>> = BTreeMap::new();
    for r in responses {
        partitions
            .entry((u32::from(r.server_ip), r.label))
            .or_default()
            .push(r);
    }
    let groups: Vec<Vec<&LabeledResponse>> = partitions.into_values().collect();
    let built = exec.map(&groups, |group| {
        let mut sorted = group.clone();
        // Stable: equal timestamps keep input order.
        sorted.sort_by_key(|r| (r.record.ts_sec, r.record.ts_usec));
        let full = sorted.len() / COLS * COLS;
        let matrices = sorted[..full]
            .chunks_exact(COLS)
            .map(FeatureMatrix::from_responses)
            .collect::<Result<Vec<_>, _>>()?;
        Ok::<_, MatrixError>((matrices, sorted.len() - full))
    });

    let mut stats = BuildStats {
        partitions: groups.len(),
        ..Default::default()
    };
    let mut out = Vec::new();
    for part in built {
        let (matrices, discarded) = part?;
        stats.discarded += discarded;
        out.extend(matrices);
    }
    stats.matrices = out.len();
    Ok((out, stats))
}

fn format_line(m: &FeatureMatrix, line: &mut String) {
    line.clear();
    let _ = write!(
        line,
        "{}\t{}\t{}\t{}",
        m.server_ip, m.label, m.first_ts, m.last_ts
    );
    for v in &m.values {
        // Nine significant digits.
        let _ = write!(line, "\t{v:.8e}");
    }
    line.push('\n');
}

/// One matrix per line: `server_ip label first_ts last_ts` followed by the
/// 1400 row-major cells, tab separated.
pub fn write_matrices<W: Write>(mut out: W, matrices: &[FeatureMatrix]) -> io::Result<()> {
    let mut line = String::new();
    for m in matrices {
        format_line(m, &mut line);
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn save_matrices(path: impl AsRef<Path>, matrices: &[FeatureMatrix]) -> io::Result<()> {
    write_matrices(BufWriter::new(File::create(path)?), matrices)
}

pub fn parse_matrix_line(line: &str, line_no: usize) -> Result<FeatureMatrix, MatrixError> {
    let schema = |reason: String| MatrixError::Schema {
        line: line_no,
        reason,
    };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 + CELLS {
        return Err(schema(format!(
            "expected {} fields, found {}",
            4 + CELLS,
            fields.len()
        )));
    }
    let server_ip = fields[0]
        .parse::<Ipv4Addr>()
        .map_err(|_| schema(format!("bad server address {:?}", fields[0])))?;
    let label = fields[1]
        .parse::<Label>()
        .map_err(|e| schema(e.to_string()))?;
    let ts = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| schema(format!("bad timestamp {s:?}")))
    };
    let first_ts = ts(fields[2])?;
    let last_ts = ts(fields[3])?;
    let values = fields[4..]
        .iter()
        .map(|s| match s.parse::<f64>() {
            Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
            _ => Err(schema(format!("cell {s:?} is not a number in [0, 1]"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureMatrix {
        server_ip,
        label,
        first_ts,
        last_ts,
        values,
    })
}

pub fn read_matrices<R: BufRead>(input: R) -> Result<Vec<FeatureMatrix>, MatrixError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        out.push(parse_matrix_line(&line, idx + 1)?);
    }
    Ok(out)
}

pub fn load_matrices(path: impl AsRef<Path>) -> Result<Vec<FeatureMatrix>, MatrixError> {
    read_matrices(BufReader::new(File::open(path)?))
}
