//! Classic pcap capture files carrying Ethernet/IPv4/UDP DNS traffic.
//!
//! Only the microsecond-resolution classic format is understood, in either
//! byte order. The reader yields one [`PacketRecord`] per frame that decodes
//! as Ethernet (optionally with one 802.1Q tag) → unfragmented IPv4 → UDP
//! with port 53 on either side; every other frame is counted in
//! [`SkipStats`] and dropped.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::Ipv4Addr;
use std::path::Path;

pub const MAGIC_USEC: u32 = 0xA1B2_C3D4;
pub const LINKTYPE_ETHERNET: u32 = 1;
pub const DNS_PORT: u16 = 53;

const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;
const ETHERNET_HEADER_LEN: usize = 14;
const ETHERTYPE_IPV4: u16 = 0x0800;
const ETHERTYPE_VLAN: u16 = 0x8100;
const ETHERTYPE_QINQ: u16 = 0x88A8;
const IPPROTO_UDP: u8 = 17;
const UDP_HEADER_LEN: usize = 8;
const DNS_HEADER_LEN: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum PcapError {
    #[error("unsupported capture format (magic {0:#010x})")]
    BadMagic(u32),
    #[error("unsupported link type {0} (only Ethernet is supported)")]
    UnsupportedLinkType(u32),
    #[error("capture file truncated: {0}")]
    TruncatedFile(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One captured UDP datagram to or from the DNS port.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketRecord {
    pub ts_sec: u32,
    /// Microseconds, always below 1_000_000.
    pub ts_usec: u32,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    /// UDP payload. Its length is the UDP length field minus 8 unless
    /// `truncated` is set.
    pub payload: Vec<u8>,
    /// The frame was cut short by the capture snaplen; `payload` holds only
    /// the captured prefix (always at least a full DNS header).
    pub truncated: bool,
}

impl PacketRecord {
    pub fn timestamp(&self) -> f64 {
        self.ts_sec as f64 + self.ts_usec as f64 * 1e-6
    }
}

/// Why a frame did not produce a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SkipReason {
    NotIpv4,
    NestedVlan,
    NotUdp,
    NotDnsPort,
    Fragmented,
    Truncated,
    Malformed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct SkipStats {
    pub not_ipv4: u64,
    pub nested_vlan: u64,
    pub not_udp: u64,
    pub not_dns_port: u64,
    pub fragmented: u64,
    pub truncated: u64,
    pub malformed: u64,
}

impl SkipStats {
    pub fn total(&self) -> u64 {
        self.not_ipv4
            + self.nested_vlan
            + self.not_udp
            + self.not_dns_port
            + self.fragmented
            + self.truncated
            + self.malformed
    }

    fn count(&mut self, reason: SkipReason) {
        let slot = match reason {
            SkipReason::NotIpv4 => &mut self.not_ipv4,
            SkipReason::NestedVlan => &mut self.nested_vlan,
            SkipReason::NotUdp => &mut self.not_udp,
            SkipReason::NotDnsPort => &mut self.not_dns_port,
            SkipReason::Fragmented => &mut self.fragmented,
            SkipReason::Truncated => &mut self.truncated,
            SkipReason::Malformed => &mut self.malformed,
        };
        *slot += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Endian {
    Little,
    Big,
}

impl Endian {
    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        match self {
            Endian::Little => u32::from_le_bytes(a),
            Endian::Big => u32::from_be_bytes(a),
        }
    }
}

/// Streaming reader over a classic pcap file.
///
/// Iteration stops after the first error.
pub struct PcapReader<R> {
    inner: R,
    endian: Endian,
    frames: u64,
    skipped: SkipStats,
    done: bool,
}

impl PcapReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PcapError> {
        PcapReader::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read> PcapReader<R> {
    pub fn new(mut inner: R) -> Result<Self, PcapError> {
        let mut header = [0u8; GLOBAL_HEADER_LEN];
        let got = read_full(&mut inner, &mut header)?;
        if got < 4 {
            let mut m = [0u8; 4];
            m[..got].copy_from_slice(&header[..got]);
            return Err(PcapError::BadMagic(u32::from_be_bytes(m)));
        }
        let endian = if u32::from_le_bytes([header[0], header[1], header[2], header[3]])
            == MAGIC_USEC
        {
            Endian::Little
        } else if u32::from_be_bytes([header[0], header[1], header[2], header[3]]) == MAGIC_USEC {
            Endian::Big
        } else {
            return Err(PcapError::BadMagic(u32::from_be_bytes([
                header[0], header[1], header[2], header[3],
            ])));
        };
        if got < GLOBAL_HEADER_LEN {
            return Err(PcapError::TruncatedFile("global header"));
        }
        let linktype = endian.u32(&header[20..24]);
        if linktype != LINKTYPE_ETHERNET {
            return Err(PcapError::UnsupportedLinkType(linktype));
        }
        Ok(PcapReader {
            inner,
            endian,
            frames: 0,
            skipped: SkipStats::default(),
            done: false,
        })
    }

    /// Frames read so far, kept or skipped.
    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn skipped(&self) -> SkipStats {
        self.skipped
    }

    fn next_record(&mut self) -> Result<Option<PacketRecord>, PcapError> {
        loop {
            let mut header = [0u8; RECORD_HEADER_LEN];
            match read_full(&mut self.inner, &mut header)? {
                0 => return Ok(None),
                RECORD_HEADER_LEN => {}
                _ => return Err(PcapError::TruncatedFile("record header")),
            }
            let ts_sec = self.endian.u32(&header[0..4]);
            let ts_usec = self.endian.u32(&header[4..8]);
            let incl_len = self.endian.u32(&header[8..12]) as u64;
            let orig_len = self.endian.u32(&header[12..16]) as u64;

            // `take` keeps allocation proportional to the bytes actually present.
            let mut frame = Vec::new();
            (&mut self.inner).take(incl_len).read_to_end(&mut frame)?;
            if (frame.len() as u64) < incl_len {
                return Err(PcapError::TruncatedFile("record data"));
            }
            self.frames += 1;
            if ts_usec >= 1_000_000 {
                self.skipped.count(SkipReason::Malformed);
                continue;
            }
            match decode_frame(&frame, incl_len < orig_len) {
                Ok(udp) => {
                    return Ok(Some(PacketRecord {
                        ts_sec,
                        ts_usec,
                        src_ip: udp.src_ip,
                        dst_ip: udp.dst_ip,
                        src_port: udp.src_port,
                        dst_port: udp.dst_port,
                        payload: udp.payload.to_vec(),
                        truncated: udp.truncated,
                    }))
                }
                Err(reason) => self.skipped.count(reason),
            }
        }
    }
}

impl<R: Read> Iterator for PcapReader<R> {
    type Item = Result<PacketRecord, PcapError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Read every DNS datagram in a capture file.
pub fn read_pcap(path: impl AsRef<Path>) -> Result<(Vec<PacketRecord>, SkipStats), PcapError> {
    let mut reader = PcapReader::open(path)?;
    let records = reader.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok((records, reader.skipped()))
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// A UDP datagram decoded out of an Ethernet frame.
#[derive(Debug, PartialEq, Eq)]
pub struct UdpView<'a> {
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub payload: &'a [u8],
    pub truncated: bool,
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

/// Decode Ethernet → IPv4 → UDP, keeping only DNS-port datagrams.
///
/// `capture_truncated` tells whether the capture cut the frame short
/// (incl_len < orig_len); such frames are kept when the UDP header and a
/// DNS header survive.
pub fn decode_frame(frame: &[u8], capture_truncated: bool) -> Result<UdpView<'_>, SkipReason> {
    let short = if capture_truncated {
        SkipReason::Truncated
    } else {
        SkipReason::Malformed
    };
    if frame.len() < ETHERNET_HEADER_LEN {
        return Err(short);
    }
    let mut ethertype = be16(frame, 12);
    let mut offset = ETHERNET_HEADER_LEN;
    if ethertype == ETHERTYPE_VLAN {
        if frame.len() < offset + 4 {
            return Err(short);
        }
        ethertype = be16(frame, offset + 2);
        offset += 4;
        if ethertype == ETHERTYPE_VLAN || ethertype == ETHERTYPE_QINQ {
            return Err(SkipReason::NestedVlan);
        }
    } else if ethertype == ETHERTYPE_QINQ {
        return Err(SkipReason::NestedVlan);
    }
    if ethertype != ETHERTYPE_IPV4 {
        return Err(SkipReason::NotIpv4);
    }

    let ip = &frame[offset..];
    if ip.len() < 20 {
        return Err(short);
    }
    if ip[0] >> 4 != 4 {
        return Err(SkipReason::Malformed);
    }
    let ihl = usize::from(ip[0] & 0x0F) * 4;
    if ihl < 20 {
        return Err(SkipReason::Malformed);
    }
    let total_len = usize::from(be16(ip, 2));
    if total_len < ihl {
        return Err(SkipReason::Malformed);
    }
    let flags_frag = be16(ip, 6);
    if flags_frag & 0x2000 != 0 || flags_frag & 0x1FFF != 0 {
        return Err(SkipReason::Fragmented);
    }
    if ip[9] != IPPROTO_UDP {
        return Err(SkipReason::NotUdp);
    }
    let src_ip = Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]);
    let dst_ip = Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]);
    if ip.len() < ihl + UDP_HEADER_LEN {
        return Err(short);
    }
    // Ethernet padding may follow the IP datagram.
    let ip = &ip[..ip.len().min(total_len)];
    let udp = &ip[ihl..];
    if udp.len() < UDP_HEADER_LEN {
        return Err(short);
    }
    let src_port = be16(udp, 0);
    let dst_port = be16(udp, 2);
    let udp_len = usize::from(be16(udp, 4));
    if src_port != DNS_PORT && dst_port != DNS_PORT {
        return Err(SkipReason::NotDnsPort);
    }
    if udp_len < UDP_HEADER_LEN || udp_len > total_len - ihl {
        return Err(SkipReason::Malformed);
    }
    let wanted = udp_len - UDP_HEADER_LEN;
    let available = udp.len() - UDP_HEADER_LEN;
    if available >= wanted {
        return Ok(UdpView {
            src_ip,
            dst_ip,
            src_port,
            dst_port,
            payload: &udp[UDP_HEADER_LEN..UDP_HEADER_LEN + wanted],
            truncated: false,
        });
    }
    if capture_truncated && available >= DNS_HEADER_LEN {
        return Ok(UdpView {
            src_ip,
            dst_ip,
            src_port,
            dst_port,
            payload: &udp[UDP_HEADER_LEN..],
            truncated: true,
        });
    }
    Err(short)
}

const SRC_MAC: [u8; 6] = [0x02, 0x00, 0x00, 0x00, 0x00, 0x01];
const DST_MAC: [u8; 6] = [0x02, 0x00, 0x00, 0x00, 0x00, 0x02];

/// Build an Ethernet/IPv4/UDP frame around `payload`.
///
/// The IPv4 header checksum is filled in; the UDP checksum is left zero,
/// which IPv4 permits.
pub fn encode_udp_frame(
    src_ip: Ipv4Addr,
    dst_ip: Ipv4Addr,
    src_port: u16,
    dst_port: u16,
    payload: &[u8],
) -> Vec<u8> {
    let udp_len = UDP_HEADER_LEN + payload.len();
    let ip_len = 20 + udp_len;
    assert!(ip_len <= usize::from(u16::MAX), "UDP payload too large");
    let mut f = Vec::with_capacity(ETHERNET_HEADER_LEN + ip_len);
    f.extend_from_slice(&DST_MAC);
    f.extend_from_slice(&SRC_MAC);
    f.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());

    let ip_start = f.len();
    f.extend_from_slice(&[0x45, 0x00]);
    f.extend_from_slice(&(ip_len as u16).to_be_bytes());
    f.extend_from_slice(&[0x00, 0x00, 0x40, 0x00, 64, IPPROTO_UDP, 0x00, 0x00]);
    f.extend_from_slice(&src_ip.octets());
    f.extend_from_slice(&dst_ip.octets());
    let checksum = ipv4_checksum(&f[ip_start..ip_start + 20]);
    f[ip_start + 10..ip_start + 12].copy_from_slice(&checksum.to_be_bytes());

    f.extend_from_slice(&src_port.to_be_bytes());
    f.extend_from_slice(&dst_port.to_be_bytes());
    f.extend_from_slice(&(udp_len as u16).to_be_bytes());
    f.extend_from_slice(&[0x00, 0x00]);
    f.extend_from_slice(payload);
    f
}

pub fn ipv4_checksum(header: &[u8]) -> u16 {
    let mut sum: u32 = header
        .chunks(2)
        .map(|c| u32::from(u16::from_be_bytes([c[0], *c.get(1).unwrap_or(&0)])))
        .sum();
    while sum > 0xFFFF {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

/// Little-endian classic pcap writer with Ethernet link type.
pub struct PcapWriter<W: Write> {
    inner: W,
}

impl PcapWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        PcapWriter::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> PcapWriter<W> {
    pub const SNAPLEN: u32 = 65_535;

    pub fn new(mut inner: W) -> io::Result<Self> {
        inner.write_all(&MAGIC_USEC.to_le_bytes())?;
        inner.write_all(&2u16.to_le_bytes())?;
        inner.write_all(&4u16.to_le_bytes())?;
        inner.write_all(&0i32.to_le_bytes())?;
        inner.write_all(&0u32.to_le_bytes())?;
        inner.write_all(&Self::SNAPLEN.to_le_bytes())?;
        inner.write_all(&LINKTYPE_ETHERNET.to_le_bytes())?;
        Ok(PcapWriter { inner })
    }

    pub fn write_frame(&mut self, ts_sec: u32, ts_usec: u32, frame: &[u8]) -> io::Result<()> {
        debug_assert!(ts_usec < 1_000_000);
        let len = frame.len() as u32;
        self.inner.write_all(&ts_sec.to_le_bytes())?;
        self.inner.write_all(&ts_usec.to_le_bytes())?;
        self.inner.write_all(&len.to_le_bytes())?;
        self.inner.write_all(&len.to_le_bytes())?;
        self.inner.write_all(frame)
    }

    pub fn write_record(&mut self, record: &PacketRecord) -> io::Result<()> {
        let frame = encode_udp_frame(
            record.src_ip,
            record.dst_ip,
            record.src_port,
            record.dst_port,
            &record.payload,
        );
        self.write_frame(record.ts_sec, record.ts_usec, &frame)
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reader(bytes: &[u8]) -> Result<PcapReader<&[u8]>, PcapError> {
        PcapReader::new(bytes)
    }

    fn collect(bytes: &[u8]) -> Result<(Vec<PacketRecord>, SkipStats), PcapError> {
        let mut r = reader(bytes)?;
        let recs = r.by_ref().collect::<Result<Vec<_>, _>>()?;
        Ok((recs, r.skipped()))
    }

    fn le_header() -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&[0xD4, 0xC3, 0xB2, 0xA1, 2, 0, 4, 0]);
        v.extend_from_slice(&[0; 8]);
        v.extend_from_slice(&65535u32.to_le_bytes());
        v.extend_from_slice(&1u32.to_le_bytes());
        v
    }

    fn le_record(ts: u32, usec: u32, frame: &[u8], orig: u32) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&ts.to_le_bytes());
        v.extend_from_slice(&usec.to_le_bytes());
        v.extend_from_slice(&(frame.len() as u32).to_le_bytes());
        v.extend_from_slice(&orig.to_le_bytes());
        v.extend_from_slice(frame);
        v
    }

    /// Hand-assembled Ethernet/IPv4/UDP frame, independent of `encode_udp_frame`.
    fn hand_frame(proto: u8, sport: u16, dport: u16, payload: &[u8]) -> Vec<u8> {
        let mut f = vec![
            0xff, 0xff, 0xff, 0xff, 0xff, 0xff, // dst mac
            0x00, 0x11, 0x22, 0x33, 0x44, 0x55, // src mac
            0x08, 0x00, // IPv4
        ];
        let total = 20 + 8 + payload.len() as u16;
        f.extend_from_slice(&[0x45, 0x00]);
        f.extend_from_slice(&total.to_be_bytes());
        f.extend_from_slice(&[0x12, 0x34, 0x00, 0x00, 0x40, proto, 0x00, 0x00]);
        f.extend_from_slice(&[192, 0, 2, 1, 198, 51, 100, 7]);
        f.extend_from_slice(&sport.to_be_bytes());
        f.extend_from_slice(&dport.to_be_bytes());
        f.extend_from_slice(&(8 + payload.len() as u16).to_be_bytes());
        f.extend_from_slice(&[0, 0]);
        f.extend_from_slice(payload);
        f
    }

    #[test]
    fn single_dns_frame_decodes_field_by_field() {
        let payload: Vec<u8> = (0u8..12).collect();
        let mut file = le_header();
        let frame = hand_frame(17, 40000, 53, &payload);
        assert_eq!(frame.len(), 14 + 20 + 8 + 12);
        file.extend(le_record(1_000, 250_000, &frame, frame.len() as u32));

        let (recs, skipped) = collect(&file).unwrap();
        assert_eq!(skipped.total(), 0);
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.ts_sec, 1_000);
        assert_eq!(r.ts_usec, 250_000);
        assert_eq!(r.src_ip, Ipv4Addr::new(192, 0, 2, 1));
        assert_eq!(r.dst_ip, Ipv4Addr::new(198, 51, 100, 7));
        assert_eq!(r.src_port, 40000);
        assert_eq!(r.dst_port, 53);
        assert_eq!(r.payload.len(), 12);
        assert_eq!(r.payload, payload);
        assert!(!r.truncated);
        assert_eq!(r.timestamp(), 1000.25);
    }

    #[test]
    fn big_endian_files_read_the_same() {
        let frame = hand_frame(17, 53, 5353, &[7u8; 20]);
        let mut file = vec![0xA1, 0xB2, 0xC3, 0xD4, 0, 2, 0, 4];
        file.extend_from_slice(&[0; 8]);
        file.extend_from_slice(&65535u32.to_be_bytes());
        file.extend_from_slice(&1u32.to_be_bytes());
        file.extend_from_slice(&5u32.to_be_bytes());
        file.extend_from_slice(&6u32.to_be_bytes());
        file.extend_from_slice(&(frame.len() as u32).to_be_bytes());
        file.extend_from_slice(&(frame.len() as u32).to_be_bytes());
        file.extend_from_slice(&frame);
        let (recs, _) = collect(&file).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!((recs[0].ts_sec, recs[0].ts_usec), (5, 6));
        assert_eq!(recs[0].src_port, 53);
    }

    #[test]
    fn empty_file_is_bad_magic() {
        assert!(matches!(reader(&[]), Err(PcapError::BadMagic(_))));
    }

    #[test]
    fn pcapng_and_nanosecond_magic_rejected() {
        let mut ng = le_header();
        ng[..4].copy_from_slice(&[0x0A, 0x0D, 0x0D, 0x0A]);
        assert!(matches!(reader(&ng), Err(PcapError::BadMagic(_))));
        let mut nano = le_header();
        nano[..4].copy_from_slice(&0xA1B2_3C4Du32.to_le_bytes());
        assert!(matches!(reader(&nano), Err(PcapError::BadMagic(_))));
    }

    #[test]
    fn truncated_headers_and_records() {
        let h = le_header();
        assert!(matches!(reader(&h[..10]), Err(PcapError::TruncatedFile(_))));

        let frame = hand_frame(17, 1, 53, &[0; 12]);
        let mut file = h.clone();
        file.extend(le_record(0, 0, &frame, frame.len() as u32));
        let cut = &file[..file.len() - 3];
        assert!(matches!(collect(cut), Err(PcapError::TruncatedFile(_))));
        let cut = &file[..h.len() + 7];
        assert!(matches!(collect(cut), Err(PcapError::TruncatedFile(_))));
    }

    #[test]
    fn tcp_frame_skipped_and_counted() {
        let mut file = le_header();
        let tcp = hand_frame(6, 40000, 53, &[0; 20]);
        let udp = hand_frame(17, 40000, 53, &[0; 12]);
        file.extend(le_record(0, 0, &tcp, tcp.len() as u32));
        file.extend(le_record(0, 1, &udp, udp.len() as u32));
        let (recs, skipped) = collect(&file).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(skipped.total(), 1);
        assert_eq!(skipped.not_udp, 1);
    }

    #[test]
    fn non_dns_ports_ipv6_and_fragments_skipped() {
        let mut file = le_header();
        let other_port = hand_frame(17, 1000, 2000, &[0; 12]);
        let mut v6 = hand_frame(17, 1000, 53, &[0; 12]);
        v6[12..14].copy_from_slice(&0x86DDu16.to_be_bytes());
        let mut frag = hand_frame(17, 1000, 53, &[0; 12]);
        frag[14 + 6] = 0x20; // MF
        for f in [&other_port, &v6, &frag] {
            file.extend(le_record(0, 0, f, f.len() as u32));
        }
        let (recs, s) = collect(&file).unwrap();
        assert!(recs.is_empty());
        assert_eq!((s.not_dns_port, s.not_ipv4, s.fragmented), (1, 1, 1));
    }

    #[test]
    fn single_vlan_tag_unwrapped_double_tag_skipped() {
        let base = hand_frame(17, 53, 1234, &[1; 12]);
        let mut tagged = base[..12].to_vec();
        tagged.extend_from_slice(&[0x81, 0x00, 0x00, 0x64]);
        tagged.extend_from_slice(&base[12..]);
        let mut double = base[..12].to_vec();
        double.extend_from_slice(&[0x81, 0x00, 0x00, 0x64, 0x81, 0x00, 0x00, 0x65]);
        double.extend_from_slice(&base[12..]);

        let mut file = le_header();
        file.extend(le_record(0, 0, &tagged, tagged.len() as u32));
        file.extend(le_record(0, 0, &double, double.len() as u32));
        let (recs, s) = collect(&file).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].payload, vec![1; 12]);
        assert_eq!(s.nested_vlan, 1);
    }

    #[test]
    fn ethernet_padding_is_ignored() {
        let mut frame = hand_frame(17, 53, 999, &[9; 12]);
        frame.extend_from_slice(&[0xEE; 6]);
        let view = decode_frame(&frame, false).unwrap();
        assert_eq!(view.payload, &[9; 12]);
    }

    #[test]
    fn capture_truncation_policy() {
        let frame = hand_frame(17, 53, 999, &[3; 40]);
        // Keeps a DNS header and part of the question.
        let view = decode_frame(&frame[..14 + 20 + 8 + 20], true).unwrap();
        assert!(view.truncated);
        assert_eq!(view.payload.len(), 20);
        // Less than a DNS header survives.
        assert_eq!(
            decode_frame(&frame[..14 + 20 + 8 + 5], true),
            Err(SkipReason::Truncated)
        );
        // Same shortage without a capture cut is malformed.
        assert_eq!(
            decode_frame(&frame[..14 + 20 + 8 + 20], false),
            Err(SkipReason::Malformed)
        );
    }

    #[test]
    fn writer_output_reads_back() {
        let rec = PacketRecord {
            ts_sec: 1_700_000_000,
            ts_usec: 999_999,
            src_ip: Ipv4Addr::new(10, 0, 0, 1),
            dst_ip: Ipv4Addr::new(198, 18, 0, 1),
            src_port: 33333,
            dst_port: 53,
            payload: vec![0xAB; 33],
            truncated: false,
        };
        let mut w = PcapWriter::new(Vec::new()).unwrap();
        w.write_record(&rec).unwrap();
        let bytes = w.finish().unwrap();
        let (recs, s) = collect(&bytes).unwrap();
        assert_eq!(s.total(), 0);
        assert_eq!(recs, vec![rec]);
    }

    #[test]
    fn encoded_frame_has_valid_ip_checksum() {
        let f = encode_udp_frame(
            Ipv4Addr::new(1, 2, 3, 4),
            Ipv4Addr::new(5, 6, 7, 8),
            53,
            1,
            &[0; 17],
        );
        assert_eq!(ipv4_checksum(&f[14..34]), 0);
        assert_eq!(be16(&f, 14 + 20 + 4), 8 + 17);
    }
}
