use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dnsmatrix(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnsmatrix"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = dnsmatrix(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

/// synth -> label -> matrix for a scenario file, returning the matrix path.
fn matrices_for(config: &Path, dir: &Path) -> PathBuf {
    let config = config.to_str().unwrap();
    ok(&["synth", "--config", config, "--out", "trace.pcap"], dir);
    ok(
        &[
            "label",
            "--pcap",
            "trace.pcap",
            "--timeout",
            "30",
            "--out",
            "responses.tsv",
        ],
        dir,
    );
    ok(
        &["matrix", "--in", "responses.tsv", "--out", "matrices.tsv"],
        dir,
    );
    dir.join("matrices.tsv")
}

fn small_scenario(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        format!("seed = 4\nduration = 120.0\nn_good_servers = 5\nn_bad_servers = 2\n{extra}"),
    )
    .unwrap();
    path
}

#[test]
fn full_pipeline_on_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    matrices_for(&scenario("default.toml"), d);
    let stdout = ok(
        &[
            "train",
            "--matrices",
            "matrices.tsv",
            "--c",
            "10",
            "--gamma",
            "0.01",
            "--n-good",
            "500",
            "--bad-frac",
            "0.8",
            "--train-frac",
            "0.8",
            "--seed",
            "1",
            "--model-out",
            "model.txt",
            "--report-out",
            "report.txt",
            "--holdout-out",
            "holdout.tsv",
        ],
        d,
    );
    assert!(stdout.contains("effective config [train]"));
    let report = fs::read_to_string(d.join("report.txt")).unwrap();
    assert!(report.contains("Macro Avg."));
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("report.json")).unwrap()).unwrap();
    assert!(json["bad"]["f1"].as_f64().unwrap() >= 0.95);

    ok(
        &[
            "classify",
            "--model",
            "model.txt",
            "--matrices",
            "holdout.tsv",
            "--report-out",
            "holdout.txt",
        ],
        d,
    );
    assert!(d.join("holdout.json").exists());

    ok(
        &[
            "render",
            "--matrices",
            "matrices.tsv",
            "--index",
            "0",
            "--scale",
            "2",
            "--out",
            "m.pgm",
        ],
        d,
    );
    let pgm = fs::read(d.join("m.pgm")).unwrap();
    let header = b"P5\n200 28\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(pgm.len(), header.len() + 200 * 28);
}

#[test]
fn single_class_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_scenario(d, "").to_str().unwrap().to_string();
    fs::write(
        &cfg,
        "seed = 4\nduration = 60.0\nn_good_servers = 3\nn_bad_servers = 0\n",
    )
    .unwrap();
    matrices_for(Path::new(&cfg), d);
    let out = dnsmatrix(
        &[
            "train",
            "--matrices",
            "matrices.tsv",
            "--model-out",
            "m.txt",
            "--report-out",
            "r.txt",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SingleClass"));
}

#[test]
fn same_seed_same_model_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    matrices_for(&small_scenario(d, "quiet_fraction = 0.2\n"), d);
    for name in ["a", "b"] {
        ok(
            &[
                "train",
                "--matrices",
                "matrices.tsv",
                "--n-good",
                "30",
                "--seed",
                "1",
                "--model-out",
                &format!("{name}.model"),
                "--report-out",
                &format!("{name}.txt"),
            ],
            d,
        );
    }
    let a = fs::read(d.join("a.model")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, fs::read(d.join("b.model")).unwrap());
    assert_eq!(
        fs::read(d.join("a.json")).unwrap(),
        fs::read(d.join("b.json")).unwrap()
    );
}

#[test]
fn sequential_flag_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    matrices_for(&small_scenario(d, ""), d);
    ok(
        &[
            "--sequential",
            "matrix",
            "--in",
            "responses.tsv",
            "--out",
            "seq.tsv",
        ],
        d,
    );
    assert_eq!(
        fs::read(d.join("seq.tsv")).unwrap(),
        fs::read(d.join("matrices.tsv")).unwrap()
    );
    for (flag, name) in [(None, "par"), (Some("--sequential"), "seq")] {
        let mut args: Vec<String> = flag.map(str::to_string).into_iter().collect();
        args.extend(
            [
                "train",
                "--matrices",
                "matrices.tsv",
                "--n-good",
                "30",
                "--seed",
                "2",
                "--model-out",
            ]
            .map(String::from),
        );
        args.push(format!("{name}.model"));
        args.push("--report-out".into());
        args.push(format!("{name}.txt"));
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>(), d);
    }
    assert_eq!(
        fs::read(d.join("par.model")).unwrap(),
        fs::read(d.join("seq.model")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(dnsmatrix(&["train", "--bogus"], d).status.code(), Some(1));
    assert_eq!(dnsmatrix(&[], d).status.code(), Some(1));
    assert_eq!(
        dnsmatrix(
            &["label", "--pcap", "x", "--timeout", "-1", "--out", "y"],
            d
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        dnsmatrix(&["label", "--pcap", "missing.pcap", "--out", "y"], d)
            .status
            .code(),
        Some(2)
    );
    fs::write(d.join("junk.pcap"), b"not a capture at all").unwrap();
    let out = dnsmatrix(&["label", "--pcap", "junk.pcap", "--out", "y"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr)
        .to_lowercase()
        .contains("magic"));
    assert_eq!(dnsmatrix(&["--help"], d).status.code(), Some(0));
}
