#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate};
use epidp::ingest::{parse_epi_csv, weekly_epi, EpiColumns};
use epidp_core::epi::EpiWeeklySeries;
use epidp_core::grid::WeekGrid;

pub const COUNTRIES: [&str; 3] = ["Colombia", "Brazil", "Chile"];

/// (centre day, width in days, peak daily deaths) measured from 2019-01-01.
fn waves(country: &str) -> &'static [(f64, f64, f64)] {
    match country {
        "Colombia" => &[(560.0, 30.0, 180.0), (900.0, 25.0, 420.0), (1100.0, 20.0, 90.0)],
        "Brazil" => &[(530.0, 45.0, 1000.0), (820.0, 35.0, 2900.0), (1120.0, 25.0, 600.0)],
        "Chile" => &[(540.0, 28.0, 120.0), (880.0, 40.0, 200.0), (1150.0, 22.0, 110.0)],
        _ => &[(600.0, 50.0, 300.0)],
    }
}

/// OWID-style daily CSV with multi-wave deaths for the three countries plus
/// a decoy country. Early rows leave cells blank like the real file does.
pub fn owid_csv() -> String {
    let origin = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    let mut s = String::from("iso_code,continent,location,date,total_cases,new_cases,new_deaths\n");
    for country in COUNTRIES.iter().chain(&["Peru"]) {
        for t in -6i64..=1456 {
            let x = t as f64;
            let deaths: f64 = waves(country)
                .iter()
                .map(|(c, w, a)| a * (-(x - c).powi(2) / (2.0 * w * w)).exp())
                .sum();
            let date = origin + Duration::days(t);
            let deaths = deaths.round();
            if deaths == 0.0 && t % 3 == 0 {
                let _ = writeln!(s, "XXX,South America,{country},{date},,,");
            } else {
                let _ = writeln!(s, "XXX,South America,{country},{date},0,{},{}", deaths * 20.0, deaths);
            }
        }
    }
    s
}

pub fn write_owid(dir: &Path) -> PathBuf {
    let path = dir.join("owid.csv");
    std::fs::write(&path, owid_csv()).unwrap();
    path
}

pub fn weekly() -> BTreeMap<String, EpiWeeklySeries> {
    let daily = parse_epi_csv(owid_csv().as_bytes(), &EpiColumns::default(), Some(&COUNTRIES)).unwrap();
    weekly_epi(&daily, &COUNTRIES, WeekGrid::default())
}

pub fn epidp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epidp"))
        .args(args)
        .current_dir(dir)
        .env_remove("EPIDP_CONFIG")
        .output()
        .expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
