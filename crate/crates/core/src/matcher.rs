//! Labels DNS responses by whether a matching request crossed the
//! monitoring boundary first.
//!
//! A response is `Good` when an outstanding query with the same client,
//! server, client port, DNS ID, question name and type was seen less than
//! `timeout` seconds earlier; otherwise it is unsolicited and `Bad`.

use std::collections::{HashMap, VecDeque};
use std::net::Ipv4Addr;

use crate::dns::DnsMessage;
use crate::label::Label;
use crate::pcap::{PacketRecord, DNS_PORT};

/// Full identity of an outstanding request.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PendingKey {
    pub client_ip: Ipv4Addr,
    pub server_ip: Ipv4Addr,
    pub client_port: u16,
    pub dns_id: u16,
    pub qname: String,
    pub qtype: u16,
}

impl PendingKey {
    fn flow(&self) -> FlowKey {
        FlowKey {
            client_ip: self.client_ip,
            server_ip: self.server_ip,
            client_port: self.client_port,
            dns_id: self.dns_id,
        }
    }
}

/// The part of [`PendingKey`] every response can be matched on, including
/// responses without a question section.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct FlowKey {
    client_ip: Ipv4Addr,
    server_ip: Ipv4Addr,
    client_port: u16,
    dns_id: u16,
}

#[derive(Clone, Debug)]
struct Pending {
    seq: u64,
    ts: f64,
    qname: String,
    qtype: u16,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledResponse {
    pub record: PacketRecord,
    pub message: DnsMessage,
    pub server_ip: Ipv4Addr,
    pub label: Label,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchConfig {
    /// Seconds a query stays eligible for a response.
    pub timeout: f64,
    /// A query stamped up to this many seconds after its response still
    /// matches (capture reordering).
    pub reorder_tolerance: f64,
    /// Let one query validate any number of responses instead of being
    /// consumed by the first.
    pub multi_match: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            timeout: 30.0,
            reorder_tolerance: 1.0,
            multi_match: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct MatchStats {
    pub queries: u64,
    pub good: u64,
    pub bad: u64,
    /// Queries not addressed to port 53.
    pub ignored: u64,
    pub expired: u64,
}

/// Stateful single pass over one trace.
#[derive(Debug)]
pub struct Matcher {
    config: MatchConfig,
    pending: HashMap<FlowKey, Vec<Pending>>,
    /// Insertion order, for eviction.
    order: VecDeque<(u64, f64, FlowKey)>,
    live: usize,
    next_seq: u64,
    watermark: f64,
    stats: MatchStats,
}

impl Matcher {
    pub fn new(config: MatchConfig) -> Self {
        Matcher {
            config,
            pending: HashMap::new(),
            order: VecDeque::new(),
            live: 0,
            next_seq: 0,
            watermark: f64::NEG_INFINITY,
            stats: MatchStats::default(),
        }
    }

    pub fn stats(&self) -> MatchStats {
        self.stats
    }

    /// Outstanding queries still eligible for a response.
    pub fn pending_len(&self) -> usize {
        self.live
    }

    /// Feed one decoded datagram. Returns the labeled response for responses
    /// and `None` for queries.
    pub fn observe(
        &mut self,
        record: PacketRecord,
        message: DnsMessage,
    ) -> Option<LabeledResponse> {
        let ts = record.timestamp();
        if ts > self.watermark {
            self.watermark = ts;
        }
        self.evict();

        if !message.is_response() {
            if record.dst_port == DNS_PORT {
                self.insert(&record, &message, ts);
            } else {
                self.stats.ignored += 1;
            }
            return None;
        }

        // Ingest guarantees one side is port 53; the QR bit gives direction.
        let flow = FlowKey {
            client_ip: record.dst_ip,
            server_ip: record.src_ip,
            client_port: record.dst_port,
            dns_id: message.id,
        };
        let label = if self.take_match(flow, &message, ts) {
            self.stats.good += 1;
            Label::Good
        } else {
            self.stats.bad += 1;
            Label::Bad
        };
        Some(LabeledResponse {
            server_ip: record.src_ip,
            record,
            message,
            label,
        })
    }

    fn insert(&mut self, record: &PacketRecord, message: &DnsMessage, ts: f64) {
        let key = PendingKey {
            client_ip: record.src_ip,
            server_ip: record.dst_ip,
            client_port: record.src_port,
            dns_id: message.id,
            qname: message.qname.clone(),
            qtype: message.qtype,
        };
        let flow = key.flow();
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.entry(flow).or_default().push(Pending {
            seq,
            ts,
            qname: key.qname,
            qtype: key.qtype,
        });
        self.order.push_back((seq, ts, flow));
        self.live += 1;
        self.stats.queries += 1;
    }

    fn take_match(&mut self, flow: FlowKey, message: &DnsMessage, ts: f64) -> bool {
        let Some(entries) = self.pending.get_mut(&flow) else {
            return false;
        };
        let config = self.config;
        let any_question = message.qdcount == 0;
        let hit = entries.iter().position(|p| {
            let age = ts - p.ts;
            age < config.timeout
                && age >= -config.reorder_tolerance
                && (any_question || (p.qname == message.qname && p.qtype == message.qtype))
        });
        let Some(idx) = hit else {
            return false;
        };
        if !config.multi_match {
            entries.remove(idx);
            self.live -= 1;
            if entries.is_empty() {
                self.pending.remove(&flow);
            }
        }
        true
    }

    /// Drop queries that no future response (within reorder tolerance) can
    /// match any more.
    fn evict(&mut self) {
        let horizon = self.watermark - self.config.reorder_tolerance - self.config.timeout;
        while let Some(&(seq, ts, flow)) = self.order.front() {
            if ts > horizon {
                break;
            }
            self.order.pop_front();
            if let Some(entries) = self.pending.get_mut(&flow) {
                if let Some(idx) = entries.iter().position(|p| p.seq == seq) {
                    entries.remove(idx);
                    self.live -= 1;
                    self.stats.expired += 1;
                }
                if entries.is_empty() {
                    self.pending.remove(&flow);
                }
            }
        }
    }
}

/// Label every response in a trace.
pub fn match_stream<I>(records: I, config: MatchConfig) -> (Vec<LabeledResponse>, MatchStats)
where
    I: IntoIterator<Item = (PacketRecord, DnsMessage)>,
{
    let mut matcher = Matcher::new(config);
    let out = records
        .into_iter()
        .filter_map(|(r, m)| matcher.observe(r, m))
        .collect();
    (out, matcher.stats())
}
