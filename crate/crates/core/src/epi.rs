//! Epidemiological and mobility reference series aligned to the week grid.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::grid::{WeekGrid, DAYS_PER_WEEK};
use crate::Result;

/// One daily row of an OWID-style table.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiDailyRecord {
    pub country: String,
    pub date: NaiveDate,
    pub new_cases: f64,
    pub new_deaths: f64,
}

impl EpiDailyRecord {
    /// Builds a record, clamping negative source revisions (and NaN) to zero.
    pub fn new(country: impl Into<String>, date: NaiveDate, new_cases: f64, new_deaths: f64) -> Self {
        EpiDailyRecord {
            country: country.into(),
            date,
            new_cases: clamp_count(new_cases),
            new_deaths: clamp_count(new_deaths),
        }
    }
}

fn clamp_count(v: f64) -> f64 {
    if v.is_finite() && v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Weekly deaths and cases for one country on the transaction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiWeeklySeries {
    pub country: String,
    pub week_end_dates: Vec<NaiveDate>,
    pub new_deaths: Vec<f64>,
    pub new_cases: Vec<f64>,
    /// Weekly deaths divided by their maximum; all zero when no death exists.
    pub deaths_normalized: Vec<f64>,
}

impl EpiWeeklySeries {
    /// Builds a series directly from weekly death counts (cases set to zero).
    pub fn from_weekly_deaths(country: impl Into<String>, grid: WeekGrid, deaths: Vec<f64>) -> Self {
        let n = deaths.len();
        let deaths: Vec<f64> = deaths.into_iter().map(clamp_count).collect();
        EpiWeeklySeries {
            country: country.into(),
            week_end_dates: grid.dates().into_iter().take(n).collect(),
            deaths_normalized: normalize_by_max(&deaths),
            new_deaths: deaths,
            new_cases: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.week_end_dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.week_end_dates.is_empty()
    }

    /// Normalized deaths for the week ending on `date`.
    pub fn normalized_at(&self, date: NaiveDate) -> Option<f64> {
        self.week_end_dates
            .binary_search(&date)
            .ok()
            .map(|i| self.deaths_normalized[i])
    }
}

pub(crate) fn normalize_by_max(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        values.iter().map(|v| v / max).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Sums daily counts of `country` into 7-day buckets ending on each grid date
/// (inclusive). Weeks without data sum to zero; rows for other countries and
/// rows outside the grid's reach are ignored.
pub fn weekly_aggregate(country: &str, daily: &[EpiDailyRecord], grid: WeekGrid) -> EpiWeeklySeries {
    let n = grid.len();
    let mut deaths = vec![0.0; n];
    let mut cases = vec![0.0; n];
    for rec in daily.iter().filter(|r| r.country == country) {
        if let Some(i) = bucket_of(grid, rec.date) {
            deaths[i] += clamp_count(rec.new_deaths);
            cases[i] += clamp_count(rec.new_cases);
        }
    }
    EpiWeeklySeries {
        country: country.into(),
        week_end_dates: grid.dates(),
        deaths_normalized: normalize_by_max(&deaths),
        new_deaths: deaths,
        new_cases: cases,
    }
}

/// Index of the grid week whose 7-day window `(end - 6 ..= end)` holds `date`.
fn bucket_of(grid: WeekGrid, date: NaiveDate) -> Option<usize> {
    let first_day = grid.start() - chrono::Days::new(DAYS_PER_WEEK - 1);
    if date < first_day || date > grid.end() {
        return None;
    }
    let offset = (date - first_day).num_days() as u64;
    Some((offset / DAYS_PER_WEEK) as usize)
}

/// Weekly percent-change-from-baseline values for one region and category.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityReferenceSeries {
    pub region: String,
    pub category: String,
    pub week_end_dates: Vec<NaiveDate>,
    pub pct_change_from_baseline: Vec<f64>,
}

/// Averages daily percent changes into grid weeks. Weeks with no daily
/// observation are left out of the series.
pub fn weekly_mobility(
    region: &str,
    category: &str,
    daily: &[(NaiveDate, f64)],
    grid: WeekGrid,
) -> Result<MobilityReferenceSeries> {
    let n = grid.len();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for &(date, value) in daily {
        if !value.is_finite() {
            continue;
        }
        if let Some(i) = bucket_of(grid, date) {
            sums[i] += value;
            counts[i] += 1;
        }
    }
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, date) in grid.dates().into_iter().enumerate() {
        if counts[i] > 0 {
            dates.push(date);
            values.push(sums[i] / counts[i] as f64);
        }
    }
    Ok(MobilityReferenceSeries {
        region: region.into(),
        category: category.into(),
        week_end_dates: dates,
        pct_change_from_baseline: values,
    })
}
