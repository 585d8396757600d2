//! End-to-end tests of the `netkit` binary: exit codes, output formats,
//! byte stability and the verification suite's negative control.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, Output};

fn netkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netkit"))
        .args(args)
        .env_remove("NETKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

/// Parses CSV output (skipping '#' comments) into one map per row.
fn parse_csv(text: &str) -> Vec<HashMap<String, String>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines
        .next()
        .expect("header row")
        .split(',')
        .map(|s| s.to_string())
        .collect();
    lines
        .map(|l| {
            header
                .iter()
                .cloned()
                .zip(l.split(',').map(|s| s.to_string()))
                .collect()
        })
        .collect()
}

fn f(row: &HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("numeric {key}, got '{}'", row[key]))
}

#[test]
fn test_rate_lossless_two_users() {
    let out = netkit(&[
        "rate", "--protocol", "conference", "--n", "2", "--nbar", "0", "--distance", "0",
    ]);
    assert!(out.status.success());
    let rows = parse_csv(&stdout(&out));
    assert_eq!(rows.len(), 1);
    assert_eq!(f(&rows[0], "holevo_bits"), 0.0);
    assert!(f(&rows[0], "rate_bits") > 0.0);
    assert_eq!(rows[0]["plob_bits"], "inf");
    assert_eq!(rows[0]["n_a"], "");
}

#[test]
fn test_rate_output_is_byte_stable() {
    let args = [
        "rate", "--protocol", "conference", "--n", "2,5", "--nbar", "0,0.05", "--distance",
        "0.01,0.05",
    ];
    let a = netkit(&args);
    let b = netkit(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(parse_csv(&stdout(&a)).len(), 8);
}

#[test]
fn test_rate_json_lines_schema() {
    let out = netkit(&[
        "rate", "--protocol", "conference", "--n", "2", "--nbar", "0", "--distance", "0.05",
        "--format", "json-lines",
    ]);
    assert!(out.status.success());
    for line in stdout(&out).lines() {
        let v: serde_json::Value = serde_json::from_str(line).expect("valid json");
        assert_eq!(v["schema"], "netkit.rate.v1");
        assert!(v["rate_bits"].is_number());
    }
}

#[test]
fn test_rate_full_house_matches_two_user_conference() {
    let ss = netkit(&[
        "rate", "--protocol", "secret-sharing", "--n", "100", "--split", "50,50", "--nbar",
        "0", "--distance", "0.1", "--mu", "20",
    ]);
    let conf = netkit(&[
        "rate", "--protocol", "conference", "--n", "2", "--nbar", "0", "--distance", "0.1",
        "--mu", "20",
    ]);
    let r_ss = f(&parse_csv(&stdout(&ss))[0], "rate_bits");
    let r_conf = f(&parse_csv(&stdout(&conf))[0], "rate_bits");
    assert!((r_ss - r_conf).abs() < 1e-9, "{r_ss} vs {r_conf}");
}

#[test]
fn test_rate_unknown_protocol_is_usage_error() {
    let out = netkit(&["rate", "--protocol", "telepathy", "--n", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn test_rate_unphysical_modulation_is_run_error() {
    let out = netkit(&[
        "rate", "--protocol", "conference", "--n", "2", "--distance", "0.01", "--mu", "0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid modulation"));
}

#[test]
fn test_rate_rejects_malformed_grid() {
    let out = netkit(&["rate", "--n", "2", "--distance-grid", "0.2:0.1:0.01"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn test_max_distance_decreases_with_users() {
    let out = netkit(&["max-distance", "--protocol", "conference", "--n", "2,10,50", "--nbar", "0"]);
    assert!(out.status.success());
    let rows = parse_csv(&stdout(&out));
    let d: Vec<f64> = rows.iter().map(|r| f(r, "d_max_km")).collect();
    assert_eq!(d.len(), 3);
    assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
}

#[test]
fn test_max_distance_full_house_constant_in_n() {
    let out = netkit(&[
        "max-distance", "--protocol", "secret-sharing", "--n", "4,100", "--dummies", "0",
        "--nbar", "0",
    ]);
    assert!(out.status.success());
    let rows = parse_csv(&stdout(&out));
    let d: Vec<f64> = rows.iter().map(|r| f(r, "d_max_km")).collect();
    assert!((d[0] - d[1]).abs() < 5e-4, "{d:?}");
    assert_eq!(rows[0]["n_a"], "2");
    assert_eq!(rows[1]["n_b"], "50");
}

#[test]
fn test_finite_size_monotone_with_asymptotic_row() {
    let out = netkit(&[
        "finite-size", "--protocol", "conference", "--n", "10", "--nbar", "0.05",
        "--distance", "0.05",
    ]);
    assert!(out.status.success());
    let rows = parse_csv(&stdout(&out));
    let (last, finite) = rows.split_last().unwrap();
    assert_eq!(last["block_size"], "inf");
    let asymptotic = f(last, "rate_bits");
    let mut prev = f64::NEG_INFINITY;
    for row in finite {
        let r = f(row, "rate_bits");
        assert!(r > prev, "finite-size rates must grow with block size");
        prev = r;
        assert!(r < asymptotic);
    }
    // decade grid ends at 1e12, within 1% of the asymptotic reference
    let r12 = f(&finite[finite.len() - 1], "rate_bits");
    assert!((r12 - asymptotic).abs() / asymptotic < 0.01);
}

#[test]
fn test_finite_size_reports_negative_rates_unclamped() {
    let out = netkit(&[
        "finite-size", "--n", "10", "--nbar", "0.05", "--distance", "0.05", "--block-size",
        "1e4,1e6",
    ]);
    assert!(out.status.success());
    let rows = parse_csv(&stdout(&out));
    assert!(f(&rows[0], "rate_bits") < 0.0, "small blocks give negative rates");
}

#[test]
fn test_max_distance_degenerate_split_matches_conference() {
    let ss = netkit(&[
        "max-distance", "--protocol", "secret-sharing", "--n", "2", "--split", "1,1",
        "--nbar", "0",
    ]);
    let conf = netkit(&["max-distance", "--protocol", "conference", "--n", "2", "--nbar", "0"]);
    let d_ss = f(&parse_csv(&stdout(&ss))[0], "d_max_km");
    let d_conf = f(&parse_csv(&stdout(&conf))[0], "d_max_km");
    assert!((d_ss - d_conf).abs() < 5e-4, "{d_ss} vs {d_conf}");
}

#[test]
fn test_verify_small_shots_uses_loose_thresholds() {
    let out = netkit(&["verify", "--shots", "1e4", "--seed", "11"]);
    let text = stdout(&out);
    assert!(text.contains("skip mc-convergence"), "{text}");
    assert!(text.contains("(limit 6)"), "loose covariance band applied:\n{text}");
    assert!(out.status.success(), "{text}");
}

#[test]
fn test_verify_passes_and_perturbation_fails() {
    let ok = netkit(&["verify", "--shots", "200000", "--seed", "7"]);
    assert!(
        ok.status.success(),
        "verify failed:\n{}",
        stdout(&ok)
    );
    assert!(stdout(&ok).contains("all checks passed"));

    let bad = netkit(&["verify", "--shots", "200000", "--seed", "7", "--perturb", "1e-6"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("FAIL closed-vs-dual-oracle"));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("closed-vs-dual-oracle"));
}

#[test]
fn test_mc_sample_records() {
    let out = netkit(&[
        "mc-sample", "--n", "2", "--mu", "10", "--eta", "0.9", "--nbar", "0", "--shots",
        "20000", "--seed", "3", "--format", "json-lines",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let records: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).expect("valid json"))
        .collect();
    assert_eq!(records[0]["kind"], "meta");
    assert!(records[0]["note"].as_str().unwrap().contains("chacha12"));
    assert!(records.iter().any(|r| r["kind"] == "cov"));
    assert!(records.iter().any(|r| r["kind"] == "pair-mi"));
    assert_eq!(records.last().unwrap()["kind"], "summary");
}

#[test]
fn test_config_file_precedence() {
    let dir = std::env::temp_dir().join("netkit-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg: PathBuf = dir.join("sweep.conf");
    std::fs::write(&cfg, "protocol = conference\nn = 2\nnbar = 0\ndistance = 0.02\nmu = 10\n")
        .unwrap();
    let from_file = netkit(&["rate", "--config", cfg.to_str().unwrap()]);
    assert!(from_file.status.success());
    let rows = parse_csv(&stdout(&from_file));
    assert_eq!(rows.len(), 1);
    assert_eq!(f(&rows[0], "mu"), 10.0);

    // a flag overrides the config entry
    let overridden = netkit(&["rate", "--config", cfg.to_str().unwrap(), "--mu", "20"]);
    let rows = parse_csv(&stdout(&overridden));
    assert_eq!(f(&rows[0], "mu"), 20.0);
}

#[test]
fn test_thread_cap_env() {
    let out = Command::new(env!("CARGO_BIN_EXE_netkit"))
        .args(["rate", "--n", "2,5", "--nbar", "0", "--distance", "0.01,0.02"])
        .env("NETKIT_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_netkit"))
        .args(["rate", "--n", "2"])
        .env("NETKIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
