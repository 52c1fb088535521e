//! Model file: versioned, line-oriented text.
//!
//! ```text
//! dnsmatrix-svm-model
//! version 1
//! kernel rbf
//! gamma <f64>
//! c <f64>
//! bias <f64>
//! class_map +1=bad -1=good
//! cap_hit 0|1
//! dimension <usize>
//! support_vectors <count>
//! <dual_coef> <x_1> ... <x_dimension>      (one line per support vector)
//! ```
//!
//! Reals are written with 17 significant digits, so a round trip is exact.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{SvmError, SvmModel};

pub const MODEL_VERSION: &str = "1";
const MAGIC: &str = "dnsmatrix-svm-model";
const CLASS_MAP: &str = "+1=bad -1=good";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_model<W: Write>(mut out: W, model: &SvmModel) -> Result<(), SvmError> {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "version {MODEL_VERSION}");
    let _ = writeln!(s, "kernel rbf");
    let _ = writeln!(s, "gamma {}", real(model.gamma()));
    let _ = writeln!(s, "c {}", real(model.c()));
    let _ = writeln!(s, "bias {}", real(model.bias()));
    let _ = writeln!(s, "class_map {CLASS_MAP}");
    let _ = writeln!(s, "cap_hit {}", u8::from(model.cap_hit()));
    let _ = writeln!(s, "dimension {}", model.dim());
    let _ = writeln!(s, "support_vectors {}", model.support_vectors().len());
    out.write_all(s.as_bytes())?;
    for (sv, coef) in model.support_vectors().iter().zip(model.dual_coefs()) {
        s.clear();
        s.push_str(&real(*coef));
        for v in sv {
            s.push(' ');
            s.push_str(&real(*v));
        }
        s.push('\n');
        out.write_all(s.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_model(path: impl AsRef<Path>, model: &SvmModel) -> Result<(), SvmError> {
    write_model(BufWriter::new(File::create(path)?), model)
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn schema(&self, reason: impl Into<String>) -> SvmError {
        SvmError::Schema {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn next_line(&mut self) -> Result<String, SvmError> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.schema("unexpected end of file")),
        }
    }

    /// Read a `key value` line.
    fn field(&mut self, key: &str) -> Result<String, SvmError> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.to_string()),
            _ => Err(self.schema(format!("expected `{key} <value>`"))),
        }
    }

    fn real(&mut self, key: &str) -> Result<f64, SvmError> {
        let v = self.field(key)?;
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| self.schema(format!("bad {key} {v:?}")))
    }

    fn count(&mut self, key: &str) -> Result<usize, SvmError> {
        let v = self.field(key)?;
        v.parse::<usize>()
            .map_err(|_| self.schema(format!("bad {key} {v:?}")))
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<SvmModel, SvmError> {
    let mut lines = Lines {
        inner: input.lines(),
        line: 0,
    };
    if lines.next_line()? != MAGIC {
        return Err(lines.schema("not a model file"));
    }
    let version = lines.field("version")?;
    if version != MODEL_VERSION {
        return Err(SvmError::VersionMismatch { found: version });
    }
    if lines.field("kernel")? != "rbf" {
        return Err(lines.schema("only the rbf kernel is supported"));
    }
    let gamma = lines.real("gamma")?;
    let c = lines.real("c")?;
    let bias = lines.real("bias")?;
    if lines.field("class_map")? != CLASS_MAP {
        return Err(lines.schema(format!("class_map must be {CLASS_MAP:?}")));
    }
    let cap_hit = match lines.field("cap_hit")?.as_str() {
        "0" => false,
        "1" => true,
        _ => return Err(lines.schema("cap_hit must be 0 or 1")),
    };
    let dim = lines.count("dimension")?;
    let count = lines.count("support_vectors")?;

    let mut svs = Vec::new();
    let mut coefs = Vec::new();
    for _ in 0..count {
        let line = lines.next_line()?;
        let nums = line
            .split(' ')
            .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| lines.schema("non-numeric support vector entry"))?;
        if nums.len() != dim + 1 {
            return Err(lines.schema(format!(
                "expected {} numbers, found {}",
                dim + 1,
                nums.len()
            )));
        }
        coefs.push(nums[0]);
        svs.push(nums[1..].to_vec());
    }
    lines.line += 1;
    if let Some(extra) = lines.inner.next() {
        if !extra?.trim().is_empty() {
            return Err(lines.schema("trailing data after support vectors"));
        }
    }
    SvmModel::new(gamma, c, svs, coefs, bias)
        .map(|m| m.with_cap_hit(cap_hit))
        .map_err(|e| lines.schema(e.to_string()))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel, SvmError> {
    read_model(BufReader::new(File::open(path)?))
}
