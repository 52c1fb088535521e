//! Deterministic synthetic capture generator.
//!
//! Roles:
//! - benign servers answer queries from internal clients (varying names,
//!   answer counts, sizes and an occasional error rcode);
//! - quiet benign servers answer a single polling client with one fixed
//!   response template;
//! - reflectors send periodic responses from a fixed template with no
//!   preceding query;
//! - uncertain servers send benign-shaped responses with no preceding query.
//!
//! Every random choice comes from ChaCha8 streams derived from `seed`, so a
//! configuration always produces the same bytes.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::dns::{DnsError, DnsMessage};
use crate::pcap::{encode_udp_frame, PcapWriter, DNS_PORT};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Dns(#[from] DnsError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortMode {
    /// Reflectors answer from port 53 to a random victim port.
    Fixed,
    /// Reflectors send from a random port to the victim's port 53.
    Random,
    /// Alternate by reflector: even ones random, odd ones fixed.
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Seconds of traffic.
    pub duration: f64,
    /// Capture start, seconds since the epoch.
    pub start_ts: u32,
    pub n_good_servers: usize,
    pub n_bad_servers: usize,
    /// Address index of the first server, so separate traces can use
    /// disjoint server addresses.
    pub first_server_index: usize,
    /// Mean responses per second for each benign server.
    pub good_qps: f64,
    /// Responses per second for each bad server.
    pub bad_qps: f64,
    pub clients_per_server: usize,
    /// Distinct query names shared by all benign clients.
    pub qname_pool: usize,
    /// Benign answer counts are drawn from 0..=max_ancount.
    pub max_ancount: u16,
    /// Extra bytes added uniformly to benign response sizes.
    pub size_jitter: usize,
    /// Probability that a benign response carries an error rcode.
    pub error_rate: f64,
    /// Fraction of the nominal period by which reflector emissions wander.
    pub period_jitter: f64,
    pub reflector_ports: PortMode,
    /// Size of every reflector response.
    pub reflector_size: usize,
    /// Fraction of bad servers that follow the uncertain profile.
    pub uncertain_fraction: f64,
    /// Fraction of benign servers that follow the quiet profile.
    pub quiet_fraction: f64,
    /// Quiet servers run at `good_qps * quiet_rate_factor`.
    pub quiet_rate_factor: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            duration: 600.0,
            start_ts: 1_700_000_000,
            n_good_servers: 40,
            n_bad_servers: 8,
            first_server_index: 0,
            good_qps: 8.0,
            bad_qps: 10.0,
            clients_per_server: 20,
            qname_pool: 500,
            max_ancount: 8,
            size_jitter: 48,
            error_rate: 0.05,
            period_jitter: 0.2,
            reflector_ports: PortMode::Random,
            reflector_size: 1200,
            uncertain_fraction: 0.0,
            quiet_fraction: 0.0,
            quiet_rate_factor: 0.25,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| SynthError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let fraction = |v: f64| (0.0..=1.0).contains(&v);
        if !positive(self.duration) {
            return bad("duration must be positive");
        }
        if u64::from(self.start_ts) + self.duration.ceil() as u64 > u64::from(u32::MAX) {
            return bad("capture would run past the 32-bit timestamp range");
        }
        if !positive(self.good_qps) || !positive(self.bad_qps) {
            return bad("rates must be positive");
        }
        if !positive(self.quiet_rate_factor) {
            return bad("quiet_rate_factor must be positive");
        }
        if !fraction(self.error_rate)
            || !fraction(self.uncertain_fraction)
            || !fraction(self.quiet_fraction)
        {
            return bad("fractions must lie in [0, 1]");
        }
        if !(0.0..0.5).contains(&self.period_jitter) {
            return bad("period_jitter must lie in [0, 0.5)");
        }
        if self.clients_per_server == 0 || self.qname_pool == 0 {
            return bad("clients_per_server and qname_pool must be at least 1");
        }
        if self.n_good_servers + self.n_bad_servers == 0 {
            return bad("no servers");
        }
        if self.first_server_index + self.n_good_servers + self.n_bad_servers > 250 * 250 {
            return bad("too many servers");
        }
        if !(64..=8192).contains(&self.reflector_size) {
            return bad("reflector_size must lie in 64..=8192");
        }
        Ok(())
    }

    fn quiet_count(&self) -> usize {
        (self.quiet_fraction * self.n_good_servers as f64).round() as usize
    }

    fn uncertain_count(&self) -> usize {
        (self.uncertain_fraction * self.n_bad_servers as f64).round() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServerRole {
    Benign,
    Quiet,
    Reflector { random_port: bool },
    Uncertain,
}

impl ServerRole {
    /// Whether the server's responses arrive without queries.
    pub fn is_bad(self) -> bool {
        matches!(self, ServerRole::Reflector { .. } | ServerRole::Uncertain)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerSummary {
    pub ip: Ipv4Addr,
    pub role: ServerRole,
    pub queries: u64,
    pub responses: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryCounts {
    pub servers: Vec<ServerSummary>,
    pub frames: u64,
}

impl SummaryCounts {
    pub fn responses(&self, bad: bool) -> u64 {
        self.servers
            .iter()
            .filter(|s| s.role.is_bad() == bad)
            .map(|s| s.responses)
            .sum()
    }
}

pub fn server_ip(i: usize) -> Ipv4Addr {
    Ipv4Addr::new(198, 18, (i / 250) as u8, (i % 250 + 1) as u8)
}

fn block_ip(second: u8, k: usize) -> Ipv4Addr {
    let k = k % (250 * 250);
    Ipv4Addr::new(10, second, (k / 250) as u8, (k % 250 + 1) as u8)
}

fn client_ip(k: usize) -> Ipv4Addr {
    block_ip(0, k)
}

fn victim_ip(k: usize) -> Ipv4Addr {
    block_ip(1, k)
}

/// One frame waiting to be written; `seq` keeps ties in emission order.
struct Event {
    t_us: u64,
    seq: u64,
    src: (Ipv4Addr, u16),
    dst: (Ipv4Addr, u16),
    payload: Vec<u8>,
}

struct Emitter {
    events: Vec<Event>,
    horizon_us: u64,
}

impl Emitter {
    fn push(
        &mut self,
        t_us: u64,
        src: (Ipv4Addr, u16),
        dst: (Ipv4Addr, u16),
        msg: &DnsMessage,
    ) -> Result<bool, SynthError> {
        if t_us >= self.horizon_us {
            return Ok(false);
        }
        let seq = self.events.len() as u64;
        self.events.push(Event {
            t_us,
            seq,
            src,
            dst,
            payload: msg.encode()?,
        });
        Ok(true)
    }
}

const QTYPES: [u16; 6] = [1, 28, 15, 16, 2, 65];
const TLDS: [&str; 5] = ["com", "net", "org", "io", "edu"];

fn qname(i: usize) -> String {
    format!("host{}.zone{}.example.{}", i, i % 37, TLDS[i % TLDS.len()])
}

fn ephemeral_port<R: Rng>(rng: &mut R) -> u16 {
    rng.random_range(1024..=65535)
}

fn question_len(name: &str) -> usize {
    // header + labels (length byte each) + root + type + class
    12 + name.len() + 2 + 4
}

fn query(id: u16, name: &str, qtype: u16) -> DnsMessage {
    DnsMessage {
        id,
        qr: 0,
        opcode: 0,
        aa: 0,
        tc: 0,
        rd: 1,
        ra: 0,
        z: 0,
        rcode: 0,
        qdcount: 1,
        ancount: 0,
        nscount: 0,
        adcount: 0,
        size: question_len(name),
        qname: name.to_string(),
        qtype,
        qclass: 1,
    }
}

/// A response whose header varies the way resolver answers do.
fn benign_response<R: Rng>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    id: u16,
    name: &str,
    qtype: u16,
) -> DnsMessage {
    let rcode = if rng.random_bool(cfg.error_rate) {
        if rng.random_bool(0.8) {
            3
        } else {
            2
        }
    } else {
        0
    };
    let ancount = if rcode == 0 {
        rng.random_range(0..=cfg.max_ancount)
    } else {
        0
    };
    let nscount = if ancount == 0 {
        rng.random_range(0..=1)
    } else {
        rng.random_range(0..=3)
    };
    let adcount = rng.random_range(0..=2);
    let per_answer = match qtype {
        28 => 28,
        16 => 48,
        15 => 24,
        _ => 16,
    };
    let size = question_len(name)
        + usize::from(ancount) * per_answer
        + usize::from(nscount) * 20
        + usize::from(adcount) * 16
        + rng.random_range(0..=cfg.size_jitter);
    DnsMessage {
        id,
        qr: 1,
        opcode: 0,
        aa: u8::from(rng.random_bool(0.1)),
        tc: 0,
        rd: 1,
        ra: 1,
        z: 0,
        rcode,
        qdcount: 1,
        ancount,
        nscount,
        adcount,
        size,
        qname: name.to_string(),
        qtype,
        qclass: 1,
    }
}

fn exp(rate: f64) -> Exp<f64> {
    Exp::new(rate).expect("rate validated positive")
}

fn secs_to_us(t: f64) -> u64 {
    (t * 1e6).round() as u64
}

fn benign<R: Rng>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    index: usize,
    out: &mut Emitter,
) -> Result<ServerSummary, SynthError> {
    let ip = server_ip(index);
    let mut summary = ServerSummary {
        ip,
        role: ServerRole::Benign,
        queries: 0,
        responses: 0,
    };
    let first_client = index * cfg.clients_per_server;
    let gaps = exp(cfg.good_qps);
    let mut t = gaps.sample(rng);
    while t < cfg.duration {
        let client = client_ip(first_client + rng.random_range(0..cfg.clients_per_server));
        let port = ephemeral_port(rng);
        let id: u16 = rng.random();
        let name = qname(rng.random_range(0..cfg.qname_pool));
        let qtype = QTYPES[rng.random_range(0..QTYPES.len())];
        let t_query = secs_to_us(t);
        let t_resp = t_query + rng.random_range(500..50_000);
        let q = query(id, &name, qtype);
        let r = benign_response(rng, cfg, id, &name, qtype);
        // Keep pairs whole: drop a query whose response would fall past the end.
        if t_resp < out.horizon_us {
            out.push(t_query, (client, port), (ip, DNS_PORT), &q)?;
            out.push(t_resp, (ip, DNS_PORT), (client, port), &r)?;
            summary.queries += 1;
            summary.responses += 1;
        }
        t += gaps.sample(rng);
    }
    Ok(summary)
}

/// Jittered periodic emission times within the duration.
fn periodic<R: Rng>(rng: &mut R, rate: f64, jitter: f64, duration: f64) -> Vec<f64> {
    let period = 1.0 / rate;
    let phase = rng.random_range(0.0..period);
    let mut times = Vec::new();
    let mut k = 0u64;
    loop {
        let nominal = phase + k as f64 * period;
        if nominal >= duration {
            break;
        }
        let t = nominal + rng.random_range(-jitter..=jitter) * period;
        if (0.0..duration).contains(&t) {
            times.push(t);
        }
        k += 1;
    }
    times
}

fn quiet<R: Rng>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    index: usize,
    out: &mut Emitter,
) -> Result<ServerSummary, SynthError> {
    let ip = server_ip(index);
    let mut summary = ServerSummary {
        ip,
        role: ServerRole::Quiet,
        queries: 0,
        responses: 0,
    };
    let client = client_ip(index * cfg.clients_per_server);
    let port = ephemeral_port(rng);
    let name = format!("probe{index}.monitor.example.net");
    let mut template = query(0, &name, 1);
    template.qr = 1;
    template.ra = 1;
    template.ancount = 1;
    template.size = question_len(&name) + 16;
    for t in periodic(
        rng,
        cfg.good_qps * cfg.quiet_rate_factor,
        cfg.period_jitter,
        cfg.duration,
    ) {
        let id: u16 = rng.random();
        let t_query = secs_to_us(t);
        let t_resp = t_query + rng.random_range(500..5_000);
        if t_resp < out.horizon_us {
            out.push(
                t_query,
                (client, port),
                (ip, DNS_PORT),
                &DnsMessage {
                    id,
                    ..query(id, &name, 1)
                },
            )?;
            out.push(
                t_resp,
                (ip, DNS_PORT),
                (client, port),
                &DnsMessage {
                    id,
                    ..template.clone()
                },
            )?;
            summary.queries += 1;
            summary.responses += 1;
        }
    }
    Ok(summary)
}

fn reflector<R: Rng>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    index: usize,
    random_port: bool,
    out: &mut Emitter,
) -> Result<ServerSummary, SynthError> {
    let ip = server_ip(index);
    let mut summary = ServerSummary {
        ip,
        role: ServerRole::Reflector { random_port },
        queries: 0,
        responses: 0,
    };
    let name = format!("amp{}.example.org", rng.random_range(0..1000));
    let template = DnsMessage {
        id: 0,
        qr: 1,
        opcode: 0,
        aa: 0,
        tc: 0,
        rd: 1,
        ra: 1,
        z: 0,
        rcode: 0,
        qdcount: 1,
        ancount: rng.random_range(10..=30),
        nscount: 0,
        adcount: 1,
        size: cfg.reflector_size,
        qname: name,
        qtype: 255,
        qclass: 1,
    };
    let victims = index * 4;
    for t in periodic(rng, cfg.bad_qps, cfg.period_jitter, cfg.duration) {
        let id: u16 = rng.random();
        let victim = victim_ip(victims + rng.random_range(0..4));
        let (src_port, dst_port) = if random_port {
            (ephemeral_port(rng), DNS_PORT)
        } else {
            (DNS_PORT, ephemeral_port(rng))
        };
        let msg = DnsMessage {
            id,
            ..template.clone()
        };
        if out.push(secs_to_us(t), (ip, src_port), (victim, dst_port), &msg)? {
            summary.responses += 1;
        }
    }
    Ok(summary)
}

fn uncertain<R: Rng>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    index: usize,
    out: &mut Emitter,
) -> Result<ServerSummary, SynthError> {
    let ip = server_ip(index);
    let mut summary = ServerSummary {
        ip,
        role: ServerRole::Uncertain,
        queries: 0,
        responses: 0,
    };
    let gaps = exp(cfg.bad_qps);
    let victims = index * 4;
    let mut t = gaps.sample(rng);
    while t < cfg.duration {
        let victim = victim_ip(victims + rng.random_range(0..4));
        let id: u16 = rng.random();
        let name = qname(rng.random_range(0..cfg.qname_pool));
        let qtype = QTYPES[rng.random_range(0..QTYPES.len())];
        let msg = benign_response(rng, cfg, id, &name, qtype);
        if out.push(
            secs_to_us(t),
            (ip, DNS_PORT),
            (victim, ephemeral_port(rng)),
            &msg,
        )? {
            summary.responses += 1;
        }
        t += gaps.sample(rng);
    }
    Ok(summary)
}

/// Roles in server-index order: benign then quiet, reflectors then uncertain.
pub fn server_roles(cfg: &ScenarioConfig) -> Vec<ServerRole> {
    let quiet_n = cfg.quiet_count();
    let uncertain_n = cfg.uncertain_count();
    let mut roles = Vec::with_capacity(cfg.n_good_servers + cfg.n_bad_servers);
    for i in 0..cfg.n_good_servers {
        roles.push(if i >= cfg.n_good_servers - quiet_n {
            ServerRole::Quiet
        } else {
            ServerRole::Benign
        });
    }
    for i in 0..cfg.n_bad_servers {
        roles.push(if i >= cfg.n_bad_servers - uncertain_n {
            ServerRole::Uncertain
        } else {
            let random_port = match cfg.reflector_ports {
                PortMode::Fixed => false,
                PortMode::Random => true,
                PortMode::Mixed => i % 2 == 0,
            };
            ServerRole::Reflector { random_port }
        });
    }
    roles
}

/// Write the scenario's capture to `out`.
pub fn generate_to<W: Write>(cfg: &ScenarioConfig, out: W) -> Result<SummaryCounts, SynthError> {
    cfg.validate()?;
    let mut emitter = Emitter {
        events: Vec::new(),
        horizon_us: secs_to_us(cfg.duration),
    };
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut summary = SummaryCounts::default();
    for (i, role) in server_roles(cfg).into_iter().enumerate() {
        let index = cfg.first_server_index + i;
        let mut rng = ChaCha8Rng::seed_from_u64(master.random());
        let s = match role {
            ServerRole::Benign => benign(&mut rng, cfg, index, &mut emitter)?,
            ServerRole::Quiet => quiet(&mut rng, cfg, index, &mut emitter)?,
            ServerRole::Reflector { random_port } => {
                reflector(&mut rng, cfg, index, random_port, &mut emitter)?
            }
            ServerRole::Uncertain => uncertain(&mut rng, cfg, index, &mut emitter)?,
        };
        summary.servers.push(s);
    }
    let mut events = emitter.events;
    events.sort_unstable_by_key(|e| (e.t_us, e.seq));
    let mut writer = PcapWriter::new(out)?;
    for e in &events {
        let frame = encode_udp_frame(e.src.0, e.dst.0, e.src.1, e.dst.1, &e.payload);
        let ts_sec = cfg.start_ts + (e.t_us / 1_000_000) as u32;
        writer.write_frame(ts_sec, (e.t_us % 1_000_000) as u32, &frame)?;
    }
    writer.finish()?;
    summary.frames = events.len() as u64;
    Ok(summary)
}

pub fn generate(cfg: &ScenarioConfig, path: impl AsRef<Path>) -> Result<SummaryCounts, SynthError> {
    generate_to(cfg, BufWriter::new(File::create(path)?))
}
