#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::NaiveDate;
use epidp_core::epi::{weekly_aggregate, EpiDailyRecord, EpiWeeklySeries};
use epidp_core::grid::WeekGrid;

pub const COUNTRIES: [&str; 3] = ["Colombia", "Brazil", "Chile"];

/// (centre day, width in days, peak daily deaths) measured from 2019-01-01.
fn waves(country: &str) -> &'static [(f64, f64, f64)] {
    match country {
        "Colombia" => &[(560.0, 30.0, 180.0), (900.0, 25.0, 420.0), (1100.0, 20.0, 90.0)],
        "Brazil" => &[(530.0, 45.0, 1000.0), (820.0, 35.0, 2900.0), (1120.0, 25.0, 600.0)],
        _ => &[(540.0, 28.0, 120.0), (880.0, 40.0, 200.0), (1150.0, 22.0, 110.0)],
    }
}

/// Daily deaths shaped as a few Gaussian waves, rounded to whole deaths.
pub fn daily_deaths(country: &str) -> Vec<EpiDailyRecord> {
    let origin = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    (-6..=1456)
        .map(|t: i64| {
            let x = t as f64;
            let deaths: f64 = waves(country)
                .iter()
                .map(|(c, w, a)| a * (-(x - c).powi(2) / (2.0 * w * w)).exp())
                .sum();
            let date = origin + chrono::Duration::days(t);
            EpiDailyRecord::new(country, date, (deaths * 20.0).round(), deaths.round())
        })
        .collect()
}

pub fn synthetic_epi() -> BTreeMap<String, EpiWeeklySeries> {
    let grid = WeekGrid::default();
    COUNTRIES
        .iter()
        .map(|c| (c.to_string(), weekly_aggregate(c, &daily_deaths(c), grid)))
        .collect()
}
