use std::collections::HashMap;
use std::net::Ipv4Addr;

use dnsmatrix::dns::parse_dns;
use dnsmatrix::matcher::{match_stream, LabeledResponse, MatchConfig};
use dnsmatrix::matrix::{build_matrices, ROWS};
use dnsmatrix::pcap::PcapReader;
use dnsmatrix::synth::{generate_to, PortMode, ScenarioConfig, ServerRole, SummaryCounts};
use dnsmatrix::{Execution, FeatureMatrix, Label};

fn run(cfg: &ScenarioConfig) -> (SummaryCounts, Vec<LabeledResponse>, Vec<FeatureMatrix>) {
    let mut buf = Vec::new();
    let summary = generate_to(cfg, &mut buf).unwrap();
    let mut reader = PcapReader::new(buf.as_slice()).unwrap();
    let pairs: Vec<_> = reader
        .by_ref()
        .map(|r| {
            let r = r.unwrap();
            let m = parse_dns(&r.payload).unwrap();
            (r, m)
        })
        .collect();
    assert_eq!(reader.skipped().total(), 0);

    // Per-server frame counts survive ingest exactly.
    let mut seen: HashMap<Ipv4Addr, (u64, u64)> = HashMap::new();
    for (r, m) in &pairs {
        if m.is_response() {
            seen.entry(r.src_ip).or_default().1 += 1;
        } else {
            seen.entry(r.dst_ip).or_default().0 += 1;
        }
    }
    for s in &summary.servers {
        assert_eq!(
            seen.get(&s.ip).copied().unwrap_or_default(),
            (s.queries, s.responses),
            "{}",
            s.ip
        );
    }

    let (responses, _) = match_stream(pairs, MatchConfig::default());
    let (matrices, _) = build_matrices(&responses, Execution::default()).unwrap();
    (summary, responses, matrices)
}

fn base() -> ScenarioConfig {
    ScenarioConfig {
        seed: 21,
        duration: 60.0,
        n_good_servers: 0,
        n_bad_servers: 0,
        ..ScenarioConfig::default()
    }
}

#[test]
fn one_benign_server_is_all_good() {
    let cfg = ScenarioConfig {
        n_good_servers: 1,
        good_qps: 4.0,
        ..base()
    };
    let (summary, responses, _) = run(&cfg);
    assert!(summary.servers[0].responses >= 100);
    assert_eq!(responses.len() as u64, summary.servers[0].responses);
    assert!(responses.iter().all(|r| r.label == Label::Good));
}

#[test]
fn reflector_matrix_shape() {
    for mode in [PortMode::Random, PortMode::Fixed] {
        let cfg = ScenarioConfig {
            n_bad_servers: 1,
            bad_qps: 5.0,
            reflector_ports: mode,
            ..base()
        };
        let (_, responses, matrices) = run(&cfg);
        assert!(responses.iter().all(|r| r.label == Label::Bad));
        assert!(!matrices.is_empty());
        for m in &matrices {
            let ts = m.row(0);
            assert!(
                ts.windows(2).all(|w| w[0] <= w[1]),
                "timestamp row not monotone"
            );
            let zero_rows = (0..ROWS)
                .filter(|&i| m.row(i).iter().all(|&v| v == 0.0))
                .count();
            assert!(zero_rows >= 10, "{mode:?}: {zero_rows} zero rows");
            assert_eq!(m.is_degenerate_row(1), mode == PortMode::Fixed);
        }
    }
}

#[test]
fn uncertain_matrices_look_benign() {
    let cfg = ScenarioConfig {
        duration: 300.0,
        n_good_servers: 2,
        n_bad_servers: 1,
        good_qps: 2.0,
        bad_qps: 2.0,
        uncertain_fraction: 1.0,
        ..base()
    };
    let (summary, _, matrices) = run(&cfg);
    assert_eq!(summary.servers[2].role, ServerRole::Uncertain);
    let mean_rows = |label| {
        let ms: Vec<_> = matrices.iter().filter(|m| m.label == label).collect();
        assert!(!ms.is_empty());
        ms.iter().map(|m| m.nonzero_rows() as f64).sum::<f64>() / ms.len() as f64
    };
    let (good, bad) = (mean_rows(Label::Good), mean_rows(Label::Bad));
    assert!((good - bad).abs() <= 2.0, "good {good} vs uncertain {bad}");
}

#[test]
fn quiet_servers_are_good_but_constant() {
    let cfg = ScenarioConfig {
        n_good_servers: 1,
        quiet_fraction: 1.0,
        good_qps: 8.0,
        ..base()
    };
    let (summary, responses, matrices) = run(&cfg);
    assert_eq!(summary.servers[0].role, ServerRole::Quiet);
    assert!(responses.iter().all(|r| r.label == Label::Good));
    for m in &matrices {
        assert_eq!(m.nonzero_rows(), 1);
    }
}

#[test]
fn mixed_scenario_is_deterministic_and_balanced() {
    let cfg = ScenarioConfig {
        n_good_servers: 3,
        n_bad_servers: 2,
        reflector_ports: PortMode::Mixed,
        ..base()
    };
    let (a, ra, ma) = run(&cfg);
    let (b, rb, mb) = run(&cfg);
    assert_eq!(a, b);
    assert_eq!(ra.len(), rb.len());
    assert_eq!(ma, mb);
    let bad = ra.iter().filter(|r| r.label == Label::Bad).count() as u64;
    assert_eq!(bad, a.responses(true));
    assert_eq!(ra.len() as u64 - bad, a.responses(false));
}
