//! Correlation diagnostics and conformance checks for generated tables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::analytics::MobilitySeries;
use crate::category::{Category, CategoryProfile};
use crate::epi::{EpiWeeklySeries, MobilityReferenceSeries};
use crate::geo::{city_shares, City, CityTable};
use crate::record::TransactionRecord;
use crate::stats::pearson;
use crate::{Error, Result};

/// Correlations of `txn_{t+l}` with `epi_t` for lags `0..=max_lag`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcfResult {
    pub correlations: Vec<f64>,
    pub lag_max: usize,
    pub ccf_max: f64,
}

/// Cross-correlation with the transaction series trailing the
/// epidemiological one. Ties in `|r|` go to the smaller lag.
pub fn ccf(epi: &[f64], txn: &[f64], max_lag: usize) -> Result<CcfResult> {
    if epi.len() != txn.len() {
        return Err(Error::Dimension {
            context: "ccf",
            expected: epi.len(),
            found: txn.len(),
        });
    }
    let n = epi.len();
    if n <= max_lag + 2 {
        return Err(Error::param(
            "max_lag",
            format!("series of length {n} is too short for lag {max_lag}"),
        ));
    }
    let mut correlations = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        correlations.push(pearson(&epi[..n - lag], &txn[lag..])?);
    }
    let mut lag_max = 0;
    for (lag, r) in correlations.iter().enumerate() {
        if r.abs() > correlations[lag_max].abs() {
            lag_max = lag;
        }
    }
    Ok(CcfResult {
        ccf_max: correlations[lag_max],
        correlations,
        lag_max,
    })
}

/// Weekly `nb_transactions` totals per city and category, on `dates`.
pub fn city_category_series(
    table: &[TransactionRecord],
    dates: &[NaiveDate],
) -> BTreeMap<(City, Category), Vec<f64>> {
    let index: BTreeMap<NaiveDate, usize> = dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
    let mut out: BTreeMap<(City, Category), Vec<f64>> = BTreeMap::new();
    for row in table {
        if let Some(&i) = index.get(&row.date) {
            out.entry((row.city(), row.category))
                .or_insert_with(|| alloc::vec![0.0; dates.len()])[i] += row.nb_transactions as f64;
        }
    }
    out
}

/// CCF of every city/category volume series against its country's
/// normalized deaths, over the dates both cover.
pub fn ccf_table(
    table: &[TransactionRecord],
    epi: &BTreeMap<String, EpiWeeklySeries>,
    max_lag: usize,
) -> BTreeMap<(City, Category), Result<CcfResult>> {
    let dates = distinct_dates(table);
    let series = city_category_series(table, &dates);
    series
        .into_iter()
        .map(|((city, category), txn)| {
            let result = match epi.get(city.country()) {
                None => Err(Error::Degenerate(format!("no series for {}", city.country()))),
                Some(e) => {
                    let (x, y): (Vec<f64>, Vec<f64>) = dates
                        .iter()
                        .zip(&txn)
                        .filter_map(|(d, v)| e.normalized_at(*d).map(|x| (x, *v)))
                        .unzip();
                    ccf(&x, &y, max_lag)
                }
            };
            ((city, category), result)
        })
        .collect()
}

pub fn distinct_dates(table: &[TransactionRecord]) -> Vec<NaiveDate> {
    table.iter().map(|r| r.date).collect::<BTreeSet<_>>().into_iter().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: String, passed: bool, measured: String, expected: String) {
        self.checks.push(CheckResult {
            name,
            passed,
            measured,
            expected,
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub cities: CityTable,
    pub categories: Vec<CategoryProfile>,
    pub max_lag: usize,
    /// Largest acceptable `lag_max` for categories that respond to deaths.
    pub lag_band: usize,
    /// Cities whose `lag_max` is not held to `lag_band` (sign still checked).
    pub lag_exempt: Vec<City>,
    pub share_tolerance_pp: f64,
    /// `|ccf_max|` ceiling for categories with a zero multiplier.
    pub null_correlation_ceiling: f64,
    pub expected_weeks: usize,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            cities: CityTable::default(),
            categories: crate::category::default_profiles(),
            max_lag: 12,
            lag_band: 3,
            lag_exempt: Vec::new(),
            share_tolerance_pp: 1.5,
            null_correlation_ceiling: 0.3,
            expected_weeks: 209,
        }
    }
}

/// Runs the conformance checks. Failures are report rows, never errors.
pub fn validate_dataset(
    table: &[TransactionRecord],
    epi: &BTreeMap<String, EpiWeeklySeries>,
    config: &ValidationConfig,
) -> ValidationReport {
    let mut report = ValidationReport::default();

    let negatives = table.iter().filter(|r| r.nb_transactions < 0).count();
    report.push("non_negative_counts".into(), negatives == 0, format!("{negatives}"), "0".into());

    let mut merchant_city: BTreeMap<u32, City> = BTreeMap::new();
    for row in table {
        merchant_city.entry(row.merchant_id).or_insert_with(|| row.city());
    }
    let merchants = merchant_city.len().max(1) as f64;
    match city_shares(&config.cities) {
        Ok(shares) => {
            for (city, expected) in shares {
                let n = merchant_city.values().filter(|c| **c == city).count();
                let measured = n as f64 / merchants * 100.0;
                report.push(
                    format!("city_share[{city}]"),
                    (measured - expected).abs() <= config.share_tolerance_pp,
                    format!("{measured:.4}"),
                    format!("{expected:.4} +/- {}", config.share_tolerance_pp),
                );
            }
        }
        Err(e) => report.push("city_share".into(), false, format!("{e}"), "valid city table".into()),
    }

    let ccfs = ccf_table(table, epi, config.max_lag);
    for city in config.cities.cities() {
        for profile in &config.categories {
            let m = profile.covid_multiplier;
            let key = (city, profile.category);
            let label = format!("{city}|{}", profile.category);
            let result = ccfs.get(&key);
            if m != 0.0 {
                let expected = format!(
                    "sign {} and lag <= {}",
                    if m > 0.0 { "+" } else { "-" },
                    if config.lag_exempt.contains(&city) { config.max_lag } else { config.lag_band }
                );
                let (passed, measured) = match result {
                    Some(Ok(c)) => {
                        let lag_ok = config.lag_exempt.contains(&city) || c.lag_max <= config.lag_band;
                        let sign_ok = c.ccf_max.signum() == m.signum() && c.ccf_max != 0.0;
                        (lag_ok && sign_ok, format!("lag {} r {:.4}", c.lag_max, c.ccf_max))
                    }
                    Some(Err(e)) => (false, format!("undefined: {e}")),
                    None => (false, "no rows".into()),
                };
                report.push(format!("ccf[{label}]"), passed, measured, expected);
            } else {
                let expected = format!("|r| < {}", config.null_correlation_ceiling);
                let (passed, measured) = match result {
                    Some(Ok(c)) => (
                        c.ccf_max.abs() < config.null_correlation_ceiling,
                        format!("lag {} r {:.4}", c.lag_max, c.ccf_max),
                    ),
                    Some(Err(e)) => (false, format!("undefined: {e}")),
                    None => (false, "no rows".into()),
                };
                report.push(format!("ccf_null[{label}]"), passed, measured, expected);
            }
        }
    }

    let weeks = distinct_dates(table).len();
    report.push(
        "distinct_dates".into(),
        weeks == config.expected_weeks,
        format!("{weeks}"),
        format!("{}", config.expected_weeks),
    );
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityComparison {
    pub correlation: f64,
    pub overlap: usize,
}

pub const MIN_MOBILITY_OVERLAP: usize = 8;

/// Pearson correlation of percent changes over the dates both series share
/// (and where the private series has a defined percent change).
pub fn compare_mobility(dp: &MobilitySeries, reference: &MobilityReferenceSeries) -> Result<MobilityComparison> {
    let reference_at: BTreeMap<NaiveDate, f64> = reference
        .week_end_dates
        .iter()
        .copied()
        .zip(reference.pct_change_from_baseline.iter().copied())
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = dp
        .week_end_dates
        .iter()
        .zip(&dp.pct_change_from_baseline)
        .filter_map(|(d, p)| Some((((*p)?), *reference_at.get(d)?)))
        .unzip();
    if x.len() < MIN_MOBILITY_OVERLAP {
        return Err(Error::param(
            "mobility overlap",
            format!("{} shared weeks, need at least {MIN_MOBILITY_OVERLAP}", x.len()),
        ));
    }
    Ok(MobilityComparison {
        correlation: pearson(&x, &y)?,
        overlap: x.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wave(n: usize) -> Vec<f64> {
        (0..n).map(|t| libm::sin(t as f64 / 5.0) + 0.01 * t as f64).collect()
    }

    #[test]
    fn self_correlation_is_lag_zero() {
        let x = wave(60);
        let c = ccf(&x, &x, 6).unwrap();
        assert_eq!(c.lag_max, 0);
        assert!((c.ccf_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_series_peaks_at_its_shift() {
        let x = wave(80);
        // txn_t = epi_{t-2}: the transaction series trails by two steps.
        let mut y = alloc::vec![0.0; 80];
        y[2..].copy_from_slice(&x[..78]);
        let c = ccf(&x, &y, 6).unwrap();
        assert_eq!(c.lag_max, 2);
        assert!((c.ccf_max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn short_windows_are_rejected() {
        let x = wave(5);
        assert!(ccf(&x, &x, 3).is_err());
        assert!(ccf(&x, &x, 2).is_ok());
    }

    #[test]
    fn ties_prefer_the_smaller_lag() {
        // Alternating series: |r| is 1 at every lag.
        let x: Vec<f64> = (0..20).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let c = ccf(&x, &x, 3).unwrap();
        assert_eq!(c.lag_max, 0);
    }
}
