use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sofic_bayes::EnsemblePosterior;

fn lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sofic-lab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_zero_length_writes_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["simulate", "--t", "0", "--out", "p.txt"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read(dir.path().join("p.txt")).unwrap(), b"");
}

#[test]
fn simulate_is_seeded_and_respects_support() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.txt", "b.txt"] {
        let out = lab(
            &["simulate", "--t", "500", "--seed", "4", "--out", name],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let a = fs::read_to_string(dir.path().join("a.txt")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.txt")).unwrap());
    let symbols = a.trim_end();
    assert_eq!(symbols.len(), 500);
    assert!(!symbols.contains("010"));
}

#[test]
fn unknown_theorem_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["verify", "--theorem", "9"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("9"));
}

#[test]
fn malformed_config_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.cfg"),
        "# comment\nhorizon = 100\nmembers = many\n",
    )
    .unwrap();
    let out = lab(&["verify", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    fs::write(dir.path().join("rate.cfg"), "rate_a = 1\n").unwrap();
    let out = lab(&["verify", "--config", "rate.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn theorem5_writes_gap_csv_and_exit_reflects_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &[
            "verify",
            "--theorem",
            "5",
            "--t",
            "10000",
            "--seed",
            "1",
            "--out",
            "run",
        ],
        dir.path(),
    );
    let run = dir.path().join("run");
    let gaps = fs::read_to_string(run.join("predictive_gap_seed1.csv")).unwrap();
    assert_eq!(
        gaps.lines().next().unwrap(),
        "t,hellinger_sq,tv,kl_nats,pass"
    );
    assert_eq!(gaps.lines().count(), 10_002);
    let summary = fs::read_to_string(run.join("summary.csv")).unwrap();
    let any_fail = summary.lines().skip(1).any(|l| l.contains(",fail,"));
    assert_eq!(out.status.success(), !any_fail);
    if any_fail {
        assert!(stderr(&out).contains("theorem5/"));
    }
    assert!(fs::read_to_string(run.join("config.txt"))
        .unwrap()
        .contains("theorem = 5"));
}

#[test]
fn divergence_tabulates_listed_hypotheses() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("h.txt"),
        "order 1\n0 0.5 0.5\n1 0.25 0.75\n",
    )
    .unwrap();
    let out = lab(
        &[
            "divergence",
            "--hypothesis",
            "h.txt",
            "--prior-draws",
            "3",
            "--out",
            "d",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let table = fs::read_to_string(dir.path().join("d/divergence.csv")).unwrap();
    let coin = table.lines().find(|l| l.starts_with("fair_coin")).unwrap();
    let h: f64 = coin.split(',').nth(2).unwrap().parse().unwrap();
    assert!((h - 1.0 / 3.0).abs() < 1e-12);
    assert!(table.lines().any(|l| l.starts_with("h.txt,1,")));
    assert_eq!(
        table
            .lines()
            .filter(|l| l.starts_with("prior_draw_"))
            .count(),
        3
    );
}

#[test]
fn posterior_snapshot_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &["posterior", "--t", "300", "--m", "50", "--out", "p"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("p/posterior_snapshot_seed1.txt")).unwrap();
    let post = EnsemblePosterior::from_snapshot(&text).unwrap();
    assert_eq!(post.len(), 50);
    assert_eq!(post.history().len(), 300);
    assert!(dir.path().join("p/posterior_seed1.csv").exists());
}

#[test]
fn sieve_subcommand_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &[
            "sieve",
            "--t",
            "2000",
            "--set",
            "sieve_members=300",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for name in [
        "sieve_seed1.csv",
        "sieve_tail_seed1.csv",
        "summary.csv",
        "config.txt",
    ] {
        assert!(dir.path().join("s").join(name).exists(), "{name}");
    }
}

#[test]
fn shipped_config_parses_and_echoes() {
    let text = include_str!("../config/experiment.cfg");
    let cfg = sofic_lab::config::ExperimentConfig::parse(text).unwrap();
    assert_eq!(cfg.replicates, 20);
    cfg.validate().unwrap();
    let echo = sofic_lab::config::ExperimentConfig::parse(&cfg.to_text()).unwrap();
    assert_eq!(echo, cfg);
}
