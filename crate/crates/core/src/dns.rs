//! DNS header and first-question decoding.
//!
//! Resource-record sections are never parsed; only their counts matter for
//! the feature matrix. The question name must be uncompressed.

use std::fmt::Write as _;

pub const HEADER_LEN: usize = 12;
const MAX_LABEL_LEN: usize = 63;
const MAX_NAME_LEN: usize = 255;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DnsError {
    #[error("malformed DNS message: {0}")]
    MalformedMessage(&'static str),
    #[error("cannot encode DNS message: {0}")]
    Unencodable(&'static str),
}

/// Decoded DNS header plus the first question.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DnsMessage {
    pub id: u16,
    /// 0 = query, 1 = response.
    pub qr: u8,
    pub opcode: u8,
    pub aa: u8,
    pub tc: u8,
    pub rd: u8,
    pub ra: u8,
    /// The raw three bits between RA and RCODE (Z, AD, CD).
    pub z: u8,
    pub rcode: u8,
    pub qdcount: u16,
    pub ancount: u16,
    pub nscount: u16,
    /// Additional-record count (ARCOUNT on the wire).
    pub adcount: u16,
    /// Length of the whole message in bytes.
    pub size: usize,
    /// Lowercase dotted name of the first question; "." for the root and
    /// empty when there is no question. Bytes outside printable ASCII, and
    /// literal dots or backslashes inside a label, are written as `\DDD`.
    pub qname: String,
    pub qtype: u16,
    pub qclass: u16,
}

impl DnsMessage {
    pub fn is_response(&self) -> bool {
        self.qr == 1
    }

    fn flags(&self) -> u16 {
        (u16::from(self.qr & 1) << 15)
            | (u16::from(self.opcode & 0x0F) << 11)
            | (u16::from(self.aa & 1) << 10)
            | (u16::from(self.tc & 1) << 9)
            | (u16::from(self.rd & 1) << 8)
            | (u16::from(self.ra & 1) << 7)
            | (u16::from(self.z & 0x07) << 4)
            | u16::from(self.rcode & 0x0F)
    }

    /// Write the header and (when `qdcount > 0`) the first question.
    pub fn write_header_and_question(&self, out: &mut Vec<u8>) -> Result<(), DnsError> {
        if self.qr > 1
            || self.opcode > 15
            || self.aa > 1
            || self.tc > 1
            || self.rd > 1
            || self.ra > 1
            || self.z > 7
            || self.rcode > 15
        {
            return Err(DnsError::Unencodable("header field out of range"));
        }
        out.extend_from_slice(&self.id.to_be_bytes());
        out.extend_from_slice(&self.flags().to_be_bytes());
        for count in [self.qdcount, self.ancount, self.nscount, self.adcount] {
            out.extend_from_slice(&count.to_be_bytes());
        }
        if self.qdcount > 0 {
            encode_name(&self.qname, out)?;
            out.extend_from_slice(&self.qtype.to_be_bytes());
            out.extend_from_slice(&self.qclass.to_be_bytes());
        } else if !self.qname.is_empty() {
            return Err(DnsError::Unencodable("qname set without a question"));
        }
        Ok(())
    }

    /// Encode to exactly `self.size` bytes; whatever follows the question is
    /// zero filled.
    pub fn encode(&self) -> Result<Vec<u8>, DnsError> {
        let mut out = Vec::with_capacity(self.size);
        self.write_header_and_question(&mut out)?;
        if out.len() > self.size {
            return Err(DnsError::Unencodable(
                "size smaller than header and question",
            ));
        }
        out.resize(self.size, 0);
        Ok(out)
    }
}

/// Parse a DNS message from a UDP payload.
pub fn parse_dns(payload: &[u8]) -> Result<DnsMessage, DnsError> {
    if payload.len() < HEADER_LEN {
        return Err(DnsError::MalformedMessage(
            "shorter than the 12-byte header",
        ));
    }
    let word = |at: usize| u16::from_be_bytes([payload[at], payload[at + 1]]);
    let flags = word(2);
    let mut msg = DnsMessage {
        id: word(0),
        qr: (flags >> 15) as u8 & 1,
        opcode: (flags >> 11) as u8 & 0x0F,
        aa: (flags >> 10) as u8 & 1,
        tc: (flags >> 9) as u8 & 1,
        rd: (flags >> 8) as u8 & 1,
        ra: (flags >> 7) as u8 & 1,
        z: (flags >> 4) as u8 & 0x07,
        rcode: flags as u8 & 0x0F,
        qdcount: word(4),
        ancount: word(6),
        nscount: word(8),
        adcount: word(10),
        size: payload.len(),
        ..DnsMessage::default()
    };
    if msg.qdcount > 0 {
        let (name, end) = decode_name(payload, HEADER_LEN)?;
        if payload.len() < end + 4 {
            return Err(DnsError::MalformedMessage("question truncated"));
        }
        msg.qname = name;
        msg.qtype = u16::from_be_bytes([payload[end], payload[end + 1]]);
        msg.qclass = u16::from_be_bytes([payload[end + 2], payload[end + 3]]);
    }
    Ok(msg)
}

fn decode_name(buf: &[u8], mut pos: usize) -> Result<(String, usize), DnsError> {
    let mut name = String::new();
    let mut wire_len = 0usize;
    loop {
        let len = *buf
            .get(pos)
            .ok_or(DnsError::MalformedMessage("question truncated"))? as usize;
        wire_len += 1 + len;
        if wire_len > MAX_NAME_LEN {
            return Err(DnsError::MalformedMessage("name longer than 255 octets"));
        }
        if len == 0 {
            pos += 1;
            break;
        }
        if len & 0xC0 == 0xC0 {
            return Err(DnsError::MalformedMessage(
                "compression pointer in question",
            ));
        }
        if len > MAX_LABEL_LEN {
            return Err(DnsError::MalformedMessage("label longer than 63 octets"));
        }
        let label = buf
            .get(pos + 1..pos + 1 + len)
            .ok_or(DnsError::MalformedMessage("label overruns message"))?;
        if !name.is_empty() {
            name.push('.');
        }
        for &b in label {
            let b = b.to_ascii_lowercase();
            if b.is_ascii_graphic() && b != b'.' && b != b'\\' {
                name.push(b as char);
            } else {
                let _ = write!(name, "\\{b:03}");
            }
        }
        pos += 1 + len;
    }
    if name.is_empty() {
        name.push('.');
    }
    Ok((name, pos))
}

fn encode_name(name: &str, out: &mut Vec<u8>) -> Result<(), DnsError> {
    let start = out.len();
    if name != "." {
        if name.is_empty() {
            return Err(DnsError::Unencodable("empty name"));
        }
        for label in name.split('.') {
            let bytes = unescape_label(label)?;
            if bytes.is_empty() {
                return Err(DnsError::Unencodable("empty label"));
            }
            if bytes.len() > MAX_LABEL_LEN {
                return Err(DnsError::Unencodable("label longer than 63 octets"));
            }
            out.push(bytes.len() as u8);
            out.extend_from_slice(&bytes);
        }
    }
    out.push(0);
    if out.len() - start > MAX_NAME_LEN {
        return Err(DnsError::Unencodable("name longer than 255 octets"));
    }
    Ok(())
}

fn unescape_label(label: &str) -> Result<Vec<u8>, DnsError> {
    let raw = label.as_bytes();
    let mut out = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        if raw[i] == b'\\' {
            let digits = raw
                .get(i + 1..i + 4)
                .and_then(|d| std::str::from_utf8(d).ok())
                .and_then(|d| d.parse::<u8>().ok())
                .ok_or(DnsError::Unencodable("bad \\DDD escape"))?;
            out.push(digits);
            i += 4;
        } else {
            out.push(raw[i]);
            i += 1;
        }
    }
    Ok(out)
}
