//! Labeled-responses file: the output of the labeling stage.
//!
//! UTF-8 text. The first line is `#dnsmatrix-responses v1`; each following
//! line is one response with tab-separated fields
//!
//! ```text
//! ts_sec  ts_usec  src_ip  src_port  dst_ip  dst_port  label  truncated(0|1)  payload_hex
//! ```
//!
//! The DNS message is re-decoded from the payload on read.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use crate::dns::{parse_dns, DnsError};
use crate::label::Label;
use crate::matcher::LabeledResponse;
use crate::pcap::PacketRecord;

pub const HEADER: &str = "#dnsmatrix-responses v1";

#[derive(Debug, thiserror::Error)]
pub enum ResponsesError {
    #[error("line {line}: {reason}")]
    Schema { line: usize, reason: String },
    #[error("line {line}: {source}")]
    Dns { line: usize, source: DnsError },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_responses<W: Write>(mut out: W, responses: &[LabeledResponse]) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in responses {
        let p = &r.record;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.ts_sec,
            p.ts_usec,
            p.src_ip,
            p.src_port,
            p.dst_ip,
            p.dst_port,
            r.label,
            u8::from(p.truncated),
            hex::encode(&p.payload)
        )?;
    }
    out.flush()
}

pub fn save_responses(path: impl AsRef<Path>, responses: &[LabeledResponse]) -> io::Result<()> {
    write_responses(BufWriter::new(File::create(path)?), responses)
}

pub fn read_responses<R: BufRead>(input: R) -> Result<Vec<LabeledResponse>, ResponsesError> {
    let mut out = Vec::new();
    let mut lines = input.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim_end() == HEADER => {}
        _ => {
            return Err(ResponsesError::Schema {
                line: 1,
                reason: format!("expected header {HEADER:?}"),
            })
        }
    }
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let schema = |reason: &str| ResponsesError::Schema {
            line: line_no,
            reason: reason.to_string(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(schema(&format!("expected 9 fields, found {}", f.len())));
        }
        let ts_usec: u32 = f[1].parse().map_err(|_| schema("bad ts_usec"))?;
        if ts_usec >= 1_000_000 {
            return Err(schema("ts_usec out of range"));
        }
        let record = PacketRecord {
            ts_sec: f[0].parse().map_err(|_| schema("bad ts_sec"))?,
            ts_usec,
            src_ip: f[2].parse::<Ipv4Addr>().map_err(|_| schema("bad src_ip"))?,
            src_port: f[3].parse().map_err(|_| schema("bad src_port"))?,
            dst_ip: f[4].parse::<Ipv4Addr>().map_err(|_| schema("bad dst_ip"))?,
            dst_port: f[5].parse().map_err(|_| schema("bad dst_port"))?,
            truncated: match f[7] {
                "0" => false,
                "1" => true,
                _ => return Err(schema("bad truncated flag")),
            },
            payload: hex::decode(f[8]).map_err(|_| schema("bad payload hex"))?,
        };
        let label: Label = f[6]
            .parse()
            .map_err(|e: crate::ParseLabelError| schema(&e.to_string()))?;
        let message = parse_dns(&record.payload).map_err(|source| ResponsesError::Dns {
            line: line_no,
            source,
        })?;
        if !message.is_response() {
            return Err(schema("payload is not a DNS response"));
        }
        out.push(LabeledResponse {
            server_ip: record.src_ip,
            record,
            message,
            label,
        });
    }
    Ok(out)
}

pub fn load_responses(path: impl AsRef<Path>) -> Result<Vec<LabeledResponse>, ResponsesError> {
    read_responses(BufReader::new(File::open(path)?))
}
