//! CLI acceptance: determinism of every command under identical seeds
//! (criterion 10), unit conversion, exit codes, and the sweep-vs-closed-form
//! consistency of the scalar embedding.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_secrecy")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("SECRECY_SEED")
        .output()
        .expect("binary runs")
}

fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn aligned_channel_json() -> &'static str {
    r#"{"type": "aligned", "S": [[1.0, 0.2], [0.2, 0.8]],
        "Sigma": [[[0.5, 0.1], [0.1, 0.6]], [[0.9, -0.2], [-0.2, 1.1]]],
        "SigmaZ": [[1.5, 0.0], [0.0, 1.4]]}"#
}

fn partition_json() -> &'static str {
    r#"[[[0.4, 0.0], [0.0, 0.3]], [[0.2, 0.0], [0.0, 0.1]]]"#
}

fn single_user_channel_json() -> &'static str {
    // One receiver whose noise sits below the eavesdropper's: transmitting
    // at full power is the exact stationary point.
    r#"{"type": "aligned", "S": [[1.0, 0.1], [0.1, 0.7]],
        "Sigma": [[[0.4, 0.0], [0.0, 0.5]]],
        "SigmaZ": [[1.2, 0.1], [0.1, 1.5]]}"#
}

fn full_power_partition_json() -> &'static str {
    r#"[[[1.0, 0.1], [0.1, 0.7]]]"#
}

fn mixture_json() -> &'static str {
    r#"{"components": [{"w": 0.5, "mean": -1.0, "cov": 0.4},
                        {"w": 0.5, "mean": 1.0, "cov": 0.4}]}"#
}

/// Criterion 10: identical (config, seed) pairs produce byte-identical
/// outputs across every command.
#[test]
fn criterion_10_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write_file(dir.path(), "ch.json", aligned_channel_json());
    let part = write_file(dir.path(), "p.json", partition_json());
    let mix = write_file(dir.path(), "m.json", mixture_json());
    let ch1 = write_file(dir.path(), "ch1.json", single_user_channel_json());
    let part1 = write_file(dir.path(), "p1.json", full_power_partition_json());
    let ch_s = ch.to_str().unwrap();
    let part_s = part.to_str().unwrap();
    let mix_s = mix.to_str().unwrap();
    let ch1_s = ch1.to_str().unwrap();
    let part1_s = part1.to_str().unwrap();

    let cases: Vec<Vec<&str>> = vec![
        vec![
            "siso",
            "--power",
            "1",
            "--sigma1-sq",
            "1",
            "--sigma2-sq",
            "2",
            "--sigmaz-sq",
            "4",
            "--steps",
            "11",
        ],
        vec![
            "sweep",
            "--channel",
            ch_s,
            "--weights",
            "5",
            "--restarts",
            "3",
            "--seed",
            "42",
            "--no-certificates",
        ],
        vec![
            "rates",
            "--channel",
            ch_s,
            "--partition",
            part_s,
            "--order",
            "1,0",
        ],
        vec![
            "kkt",
            "--channel",
            ch_s,
            "--partition",
            part_s,
            "--weights",
            "1,2",
        ],
        vec![
            "enhance",
            "--channel",
            ch1_s,
            "--partition",
            part1_s,
            "--weights",
            "1",
            "--search-samples",
            "2000",
            "--seed",
            "7",
        ],
        vec![
            "estimate",
            "--seed",
            "11",
            "complementary",
            "--mixture",
            mix_s,
            "--t",
            "1.0",
        ],
        vec![
            "estimate",
            "--seed",
            "11",
            "kstar",
            "--mixture",
            mix_s,
            "--sigma1",
            "[[0.5]]",
            "--sigma2",
            "[[1.0]]",
            "--sigmaz",
            "[[3.0]]",
            "--cap",
            "[[2.0]]",
        ],
        vec![
            "estimate",
            "--seed",
            "13",
            "debruijn",
            "--mixture",
            mix_s,
            "--t",
            "1.0",
            "--mc-samples",
            "20000",
        ],
        vec!["validate", "--channel", ch_s],
    ];

    let mut ok = true;
    for (i, args) in cases.iter().enumerate() {
        let first = run(args);
        let second = run(args);
        if first.stdout != second.stdout {
            ok = false;
            eprintln!("case {i} ({args:?}): outputs differ");
        }
        if first.stdout.is_empty() {
            ok = false;
            eprintln!(
                "case {i} ({args:?}): empty output, stderr: {}",
                String::from_utf8_lossy(&first.stderr)
            );
        }
    }

    // File outputs are byte-identical too, including certificates.
    let out1 = dir.path().join("sweep1.csv");
    let out2 = dir.path().join("sweep2.csv");
    for out in [&out1, &out2] {
        let status = Command::new(bin())
            .args([
                "sweep",
                "--channel",
                ch_s,
                "--weights",
                "4",
                "--restarts",
                "3",
                "--seed",
                "5",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    if std::fs::read(&out1).unwrap() != std::fs::read(&out2).unwrap() {
        ok = false;
        eprintln!("sweep CSV files differ between identical runs");
    }
    for idx in 0..4 {
        let c1 = std::fs::read(out1.with_extension(format!("cert{idx}.json"))).unwrap();
        let c2 = std::fs::read(out2.with_extension(format!("cert{idx}.json"))).unwrap();
        if c1 != c2 {
            ok = false;
            eprintln!("certificate {idx} differs between identical runs");
        }
    }

    println!(
        "acceptance criterion 10 (determinism): {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok);
}

/// `--bits` output equals the nats output divided by ln 2, row by row.
#[test]
fn bits_flag_rescales_rates() {
    let nats = run(&[
        "siso",
        "--power",
        "1",
        "--sigma1-sq",
        "1",
        "--sigma2-sq",
        "2",
        "--sigmaz-sq",
        "4",
        "--steps",
        "7",
    ]);
    let bits = run(&[
        "siso",
        "--power",
        "1",
        "--sigma1-sq",
        "1",
        "--sigma2-sq",
        "2",
        "--sigmaz-sq",
        "4",
        "--steps",
        "7",
        "--bits",
    ]);
    let parse = |out: &Output| -> Vec<Vec<f64>> {
        String::from_utf8_lossy(&out.stdout)
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect()
    };
    let ln2 = std::f64::consts::LN_2;
    for (row_n, row_b) in parse(&nats).iter().zip(parse(&bits).iter()) {
        assert_eq!(row_n[0], row_b[0], "alpha column must match");
        for (n, b) in row_n[1..].iter().zip(&row_b[1..]) {
            assert!((n / ln2 - b).abs() < 1e-12, "{n} nats vs {b} bits");
        }
    }
}

/// Exit codes: 0 on success, 1 on tolerance failure, 2 on malformed input.
#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write_file(dir.path(), "ch.json", aligned_channel_json());
    let part = write_file(dir.path(), "p.json", partition_json());
    let bad = write_file(dir.path(), "bad.json", "{ not json ");
    let ch_s = ch.to_str().unwrap();

    // Malformed JSON: exit 2.
    let out = run(&["validate", "--channel", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "malformed JSON must exit 2");

    // Ordering violation in `siso`: nonzero exit with a message.
    let out = run(&[
        "siso",
        "--power",
        "1",
        "--sigma1-sq",
        "4",
        "--sigma2-sq",
        "2",
        "--sigmaz-sq",
        "1",
        "--steps",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    // Non-stationary partition: KKT check fails with exit 1 and still
    // writes the report.
    let out = run(&[
        "kkt",
        "--channel",
        ch_s,
        "--partition",
        part.to_str().unwrap(),
        "--weights",
        "1,2",
    ]);
    assert_eq!(out.status.code(), Some(1), "stationarity broken => exit 1");
    assert!(
        String::from_utf8_lossy(&out.stdout).contains("\"ok\": false"),
        "report must still be written"
    );

    // Valid channel: exit 0.
    let out = run(&["validate", "--channel", ch_s]);
    assert_eq!(out.status.code(), Some(0));

    // Gaussian mixture complementary identity: exit 0.
    let mix = write_file(
        dir.path(),
        "g.json",
        r#"{"components": [{"w": 1.0, "mean": 0.0, "cov": 1.0}]}"#,
    );
    let out = run(&[
        "estimate",
        "complementary",
        "--mixture",
        mix.to_str().unwrap(),
        "--t",
        "0.7",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

/// A sweep of the scalar embedding lands on the closed-form power-split
/// curve: every swept point sits within 1e-6 of some curve point.
#[test]
fn sweep_matches_siso_curve() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write_file(
        dir.path(),
        "siso.json",
        r#"{"type": "siso", "P": 1.0,
            "Sigma": [[[1.0]], [[2.0]]], "SigmaZ": [[4.0]]}"#,
    );
    let out = run(&[
        "sweep",
        "--channel",
        ch.to_str().unwrap(),
        "--weights",
        "9",
        "--restarts",
        "4",
        "--seed",
        "3",
        "--no-certificates",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout).to_string();

    // Dense closed-form curve.
    let curve: Vec<(f64, f64)> = (0..=20_000)
        .map(|i| {
            let alpha = i as f64 / 20_000.0;
            let p = 1.0;
            let (s1, s2, sz) = (1.0, 2.0, 4.0);
            let r1 = 0.5 * (1.0 + alpha * p / s1).ln() - 0.5 * (1.0 + alpha * p / sz).ln();
            let abar = 1.0 - alpha;
            let r2 = 0.5 * (1.0 + abar * p / (alpha * p + s2)).ln()
                - 0.5 * (1.0 + abar * p / (alpha * p + sz)).ln();
            (r1, r2)
        })
        .collect();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.last(), Some(&"ok"), "row not converged: {line}");
        let r1: f64 = cols[2].parse().unwrap();
        let r2: f64 = cols[3].parse().unwrap();
        let dist = curve
            .iter()
            .map(|(c1, c2)| (c1 - r1).abs().max((c2 - r2).abs()))
            .fold(f64::INFINITY, f64::min);
        assert!(dist <= 1e-6, "point ({r1}, {r2}) off the curve by {dist}");
    }
}

/// The per-point certificate files written by `sweep` are self-contained
/// and within tolerance.
#[test]
fn sweep_certificates_verify() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write_file(dir.path(), "ch.json", aligned_channel_json());
    let out_path = dir.path().join("b.csv");
    let status = Command::new(bin())
        .args([
            "sweep",
            "--channel",
            ch.to_str().unwrap(),
            "--weights",
            "3",
            "--restarts",
            "3",
            "--seed",
            "1",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let mut found = 0;
    for idx in 0..3 {
        let path = out_path.with_extension(format!("cert{idx}.json"));
        if !path.exists() {
            continue;
        }
        found += 1;
        let text = std::fs::read_to_string(&path).unwrap();
        let cert: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(cert["channel"]["type"] == "aligned");
        assert!(cert["residuals"]["stationarity"].is_array());
        let gap = cert["residuals"]["touching_equality_gap"].as_f64().unwrap();
        assert!(gap <= 1e-6, "touching gap {gap}");
    }
    assert!(found >= 2, "expected certificate files next to the CSV");
}

/// Full loop: the partition from a sweep certificate feeds `enhance`,
/// which re-verifies the boundary point from the file contents alone.
#[test]
fn enhance_roundtrip_from_sweep_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write_file(dir.path(), "ch.json", aligned_channel_json());
    let out_path = dir.path().join("sweep.csv");
    let status = Command::new(bin())
        .args([
            "sweep",
            "--channel",
            ch.to_str().unwrap(),
            "--weights",
            "3",
            "--restarts",
            "4",
            "--seed",
            "2",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    // Middle grid point: equal weights.
    let cert_text = std::fs::read_to_string(out_path.with_extension("cert1.json")).unwrap();
    let cert: serde_json::Value = serde_json::from_str(&cert_text).unwrap();
    let partition = serde_json::to_string(&cert["partition"]).unwrap();
    let part = write_file(dir.path(), "p.json", &partition);
    let mu: Vec<f64> = cert["mu"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let weights = format!("{},{}", mu[0], mu[1]);
    let out = run(&[
        "enhance",
        "--channel",
        ch.to_str().unwrap(),
        "--partition",
        part.to_str().unwrap(),
        "--weights",
        &weights,
        "--search-samples",
        "20000",
        "--seed",
        "5",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("certificate JSON on stdout");
    assert!(
        report["residuals"]["touching_equality_gap"]
            .as_f64()
            .unwrap()
            <= 1e-8
    );
}

/// A non-stationary partition makes `enhance` fail the tolerance gate, but
/// the diagnostic report is still written and the exit code is 1.
#[test]
fn enhance_writes_report_on_tolerance_failure() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write_file(dir.path(), "ch.json", aligned_channel_json());
    let part = write_file(dir.path(), "p.json", partition_json());
    let out = run(&[
        "enhance",
        "--channel",
        ch.to_str().unwrap(),
        "--partition",
        part.to_str().unwrap(),
        "--weights",
        "1,2",
        "--search-samples",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).expect("report written");
    assert_eq!(report["ok"], false);
    assert!(report["kkt_max_residual"].as_f64().unwrap() > 1e-3);
}

/// General channels sweep through the square reduction and the α ladder;
/// rows converge and the zero-weight user's rate extrapolates to zero.
#[test]
fn sweep_general_channel_through_alpha_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let ch = write_file(
        dir.path(),
        "gen.json",
        r#"{"type": "general",
            "S": [[1.0, 0.0, 0.1], [0.0, 0.9, 0.0], [0.1, 0.0, 1.1]],
            "H": [[[1.0, 0.2, 0.0], [0.0, 0.8, 0.3]],
                   [[0.5, 0.0, 0.9]]],
            "Sigma": [[[0.6, 0.1], [0.1, 0.7]], [[0.8]]],
            "HZ": [[0.4, 0.4, 0.2]],
            "SigmaZ": [[1.5]]}"#,
    );
    let out = run(&[
        "sweep", "--channel", ch.to_str().unwrap(), "--weights", "3", "--restarts", "3",
        "--seed", "11", "--alpha-ladder", "1e-1,1e-2,1e-3,1e-4",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(*row.last().unwrap(), "ok", "row: {row:?}");
        let r1: f64 = row[2].parse().unwrap();
        let r2: f64 = row[3].parse().unwrap();
        assert!(r1.is_finite() && r2.is_finite());
        // Secrecy rates on the swept boundary are non-negative up to the
        // ladder extrapolation error.
        assert!(r1 >= -1e-6 && r2 >= -1e-6, "negative rate in {row:?}");
    }
    // Corner weights serve a single user; the other rate vanishes.
    let corner_mu0: f64 = rows[0][0].parse().unwrap();
    assert_eq!(corner_mu0, 0.0);
    let idle: f64 = rows[0][2].parse().unwrap();
    assert!(idle.abs() <= 1e-6, "zero-weight user carries rate {idle}");
}
