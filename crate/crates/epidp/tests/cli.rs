mod common;

use std::fs;
use std::path::Path;

use common::{epidp, stderr};
use epidp::formats::{read_audit, read_transactions, write_transactions};

const SMALL: &str = r#"
[generation]
merchant_count = 400
epi = "owid.csv"

[privacy]
epsilon = 1.0
seed = 11

[analysis]
city = "Bogota"
start = "2020-01-07"
end = "2020-12-29"
"#;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::write_owid(dir.path());
    fs::write(dir.path().join("cfg.toml"), SMALL).unwrap();
    dir
}

fn ok(args: &[&str], dir: &Path) {
    let out = epidp(args, dir);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stderr(&out));
}

fn generate(dir: &Path) {
    ok(&["generate", "--config", "cfg.toml", "--out", "txns.csv"], dir);
}

#[test]
fn generate_writes_the_canonical_header() {
    let dir = setup();
    generate(dir.path());
    let text = fs::read_to_string(dir.path().join("txns.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "id,merchant_id,date,merch_category,merch_postal_code,transaction_type,spendamt,nb_transactions"
    );
    assert_eq!(text.lines().count(), 1 + 400 * 209);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = epidp(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
    let out = epidp(&["hotspot", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn planted_negative_count_fails_validation() {
    let dir = setup();
    generate(dir.path());
    let raw = fs::read(dir.path().join("txns.csv")).unwrap();
    let mut rows = read_transactions(&raw).unwrap();
    rows[5].nb_transactions = -1;
    let mut buf = Vec::new();
    write_transactions(&mut buf, &rows).unwrap();
    fs::write(dir.path().join("bad.csv"), buf).unwrap();

    let out = epidp(
        &["validate", "--config", "cfg.toml", "--txns", "bad.csv", "--report", "report.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("report.csv"));
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.contains("non_negative_counts,fail,1,0"), "{report}");
}

#[test]
fn overspending_exits_with_budget_code() {
    let dir = setup();
    generate(dir.path());
    let out = epidp(
        &["hotspot", "--config", "cfg.toml", "--txns", "txns.csv", "--out", "h.csv", "--epsilon", "2", "--budget", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(!dir.path().join("h.csv").exists());
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = setup();
    let out = epidp(&["hotspot", "--txns", "nope.csv", "--out", "h.csv"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("nope.csv"));
}

fn audit_total(path: &Path) -> f64 {
    read_audit(&fs::read(path).unwrap()).unwrap().iter().map(|c| c.1).sum()
}

#[test]
fn private_outputs_carry_audits_and_rerun_identically() {
    let dir = setup();
    let d = dir.path();
    generate(d);
    let runs: [&[&str]; 5] = [
        &["hotspot", "--config", "cfg.toml", "--txns", "txns.csv", "--out", "OUT/hotspot.csv", "--svg", "OUT/hotspot.svg"],
        &[
            "mobility", "--config", "cfg.toml", "--txns", "txns.csv", "--out", "OUT/mobility.csv",
            "--per-postal", "OUT/postal.csv", "--svg", "OUT/mobility.svg",
        ],
        &["adherence", "--config", "cfg.toml", "--txns", "txns.csv", "--out", "OUT/adherence.csv"],
        &[
            "contact-matrix", "--config", "cfg.toml", "--txns", "txns.csv", "--out", "OUT/contact.csv",
            "--counts-out", "OUT/counts.csv", "--svg", "OUT/contact.svg",
        ],
        &["privatize", "--config", "cfg.toml", "--txns", "txns.csv", "--out", "OUT/private.csv"],
    ];
    for (run, outdir) in [(0, "a"), (1, "b")] {
        for args in runs {
            let args: Vec<String> = args.iter().map(|a| a.replace("OUT", outdir)).collect();
            let args: Vec<&str> = args.iter().map(String::as_str).collect();
            ok(&args, d);
        }
        let _ = run;
    }
    for name in [
        "hotspot.csv", "hotspot.audit.csv", "hotspot.svg", "mobility.csv", "mobility.audit.csv", "postal.csv",
        "mobility.svg", "adherence.csv", "adherence.audit.csv", "contact.csv", "contact.audit.csv", "counts.csv",
        "contact.svg", "private.csv", "private.audit.csv",
    ] {
        let a = fs::read(d.join("a").join(name)).unwrap();
        let b = fs::read(d.join("b").join(name)).unwrap();
        assert!(!a.is_empty(), "{name} empty");
        assert_eq!(a, b, "{name} differs between runs");
    }
    for name in ["hotspot", "mobility", "adherence", "contact", "private"] {
        let total = audit_total(&d.join("a").join(format!("{name}.audit.csv")));
        assert!(total <= 1.0 + 1e-12 && total > 0.0, "{name}: {total}");
    }
    let mobility = fs::read_to_string(d.join("a/mobility.csv")).unwrap();
    assert_eq!(mobility.lines().next().unwrap(), "date,noisy_count,pct_change_from_baseline");
    assert_eq!(mobility.lines().count(), 1 + 52);
    let hotspot = fs::read_to_string(d.join("a/hotspot.csv")).unwrap();
    assert!(hotspot.lines().skip(1).all(|l| l.starts_with("11")));
}

#[test]
fn mobility_compares_against_a_reference_report() {
    let dir = setup();
    let d = dir.path();
    generate(d);
    ok(
        &["mobility", "--config", "cfg.toml", "--txns", "txns.csv", "--out", "m.csv", "--epsilon", "1000", "--budget", "1000"],
        d,
    );
    // Daily reference rows repeating each weekly percent change.
    let weekly = fs::read_to_string(d.join("m.csv")).unwrap();
    let mut reference = String::from("region,date,retail_and_recreation_percent_change_from_baseline\n");
    for line in weekly.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let end = chrono::NaiveDate::parse_from_str(cells[0], "%Y-%m-%d").unwrap();
        for k in 0..7 {
            reference.push_str(&format!("Bogota,{},{}\n", end - chrono::Duration::days(k), cells[2]));
        }
    }
    fs::write(d.join("ref.csv"), reference).unwrap();
    let out = epidp(
        &[
            "mobility", "--config", "cfg.toml", "--txns", "txns.csv", "--out", "m.csv", "--epsilon", "1000",
            "--budget", "1000", "--reference", "ref.csv",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("pearson 1 over 52 weeks") || stdout.starts_with("pearson 0.99999"), "{stdout}");

    let out = epidp(
        &[
            "mobility", "--config", "cfg.toml", "--txns", "txns.csv", "--out", "m2.csv", "--reference", "ref.csv",
            "--region", "Lima",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("available: Bogota"), "{}", stderr(&out));
}

#[test]
fn config_path_can_come_from_the_environment() {
    let dir = setup();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_epidp"))
        .args(["generate", "--out", "txns.csv", "--merchants", "3"])
        .current_dir(dir.path())
        .env("EPIDP_CONFIG", dir.path().join("cfg.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("txns.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 209);
}

#[test]
fn ccf_table_lists_every_pair() {
    let dir = setup();
    generate(dir.path());
    ok(&["ccf", "--config", "cfg.toml", "--txns", "txns.csv", "--out", "ccf.csv"], dir.path());
    let text = fs::read_to_string(dir.path().join("ccf.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "city,category,lag_max,ccf_max");
    assert_eq!(text.lines().count(), 1 + 40);
}

#[test]
fn rt_and_covariate_fit_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let si = epidp_core::rt::discretize_serial_interval(6.5, 4.0, 30, epidp_core::rt::TimeUnit::Day).unwrap();
    let path = epidp_core::rt::sinusoidal_rt(120, 1.1, 0.3, 40.0, 0.0, 3);
    let incidence = epidp_core::rt::simulate_incidence(&path, &si, &[50.0], 9).unwrap();
    let start = chrono::NaiveDate::from_ymd_opt(2020, 3, 1).unwrap();
    let dates: Vec<_> = (0..incidence.len()).map(|i| start + chrono::Duration::days(i as i64)).collect();
    let mut buf = Vec::new();
    epidp::formats::write_series(&mut buf, &dates, &incidence).unwrap();
    fs::write(d.join("inc.csv"), &buf).unwrap();
    let log_r: Vec<f64> = path.iter().map(|r| r.ln()).collect();
    let mut buf = Vec::new();
    epidp::formats::write_series(&mut buf, &dates, &log_r).unwrap();
    fs::write(d.join("logr.csv"), &buf).unwrap();

    ok(&["rt", "--incidence", "inc.csv", "--out", "rt.csv", "--svg", "rt.svg"], d);
    let rt = fs::read_to_string(d.join("rt.csv")).unwrap();
    assert_eq!(rt.lines().next().unwrap(), "date,mean,lower,upper,prior_only");
    assert_eq!(rt.lines().count(), 1 + 120);

    ok(
        &["fit-covariates", "--incidence", "inc.csv", "--covariate", "log_r=logr.csv", "--out", "fit.csv"],
        d,
    );
    let fit = fs::read_to_string(d.join("fit.csv")).unwrap();
    let lines: Vec<&str> = fit.lines().collect();
    assert_eq!(lines[0], "label,beta");
    assert!(lines[1].starts_with("intercept,"));
    let beta: f64 = lines[2].strip_prefix("log_r,").unwrap().parse().unwrap();
    assert!(beta > 0.0);
}

#[test]
fn train_d_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("counts.csv"),
        "120,40,75,10,300,220,15,60,90,35\n60,80,25,44,150,410,30,12,70,55\n",
    )
    .unwrap();
    let counts = epidp::formats::read_rows(&fs::read(d.join("counts.csv")).unwrap()).unwrap();
    let truth = epidp_core::contact::ConsumptionDistribution::random(5, 10, 99);
    let mixing = epidp_core::contact::MixingVector::ones(5);
    let target = epidp_core::contact::contact_from_counts(
        truth.matrix(),
        &mixing,
        &counts,
        &epidp_core::contact::NationalAveraging::Unweighted,
    )
    .unwrap();
    let mut buf = Vec::new();
    epidp::formats::write_matrix(&mut buf, &target).unwrap();
    fs::write(d.join("target.csv"), buf).unwrap();
    fs::write(d.join("cfg.toml"), "[contact]\nmax_iterations = 200\n").unwrap();

    ok(
        &[
            "train-d", "--config", "cfg.toml", "--counts", "counts.csv", "--target", "target.csv", "--out", "d.csv",
            "--log", "log.csv",
        ],
        d,
    );
    let fitted = epidp::formats::read_matrix(&fs::read(d.join("d.csv")).unwrap()).unwrap();
    assert_eq!((fitted.rows(), fitted.cols()), (5, 10));
    let log = fs::read_to_string(d.join("log.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), "iteration,loss,step");
    let losses: Vec<f64> = log
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));

    // The fitted D feeds straight back into contact-matrix.
    assert!(epidp_core::contact::ConsumptionDistribution::new(fitted).is_ok());
}
