mod common;

use chrono::NaiveDate;
use epidp_core::analytics::MobilitySeries;
use epidp_core::category::{Category, SuperCategory};
use epidp_core::datagen::{generate, GenerationConfig};
use epidp_core::dp::{NoiseMode, ReleaseMetadata};
use epidp_core::epi::MobilityReferenceSeries;
use epidp_core::geo::City;
use epidp_core::grid::WeekGrid;
use epidp_core::record::TransactionRecord;
use epidp_core::validation::{ccf, ccf_table, compare_mobility, validate_dataset, ValidationConfig};
use proptest::prelude::*;

fn small_config(seed: u64) -> GenerationConfig {
    GenerationConfig {
        seed,
        merchant_count: 2000,
        ..GenerationConfig::default()
    }
}

fn table(seed: u64) -> Vec<TransactionRecord> {
    generate(&small_config(seed), &common::synthetic_epi()).unwrap()
}

#[test]
fn default_dataset_passes_every_check() {
    let epi = common::synthetic_epi();
    let rows = generate(&GenerationConfig::default(), &epi).unwrap();
    let report = validate_dataset(&rows, &epi, &ValidationConfig::default());
    let failed: Vec<_> = report.failures().collect();
    assert!(failed.is_empty(), "{failed:#?}");
    // 1 + 4 shares + 40 city/category pairs + 1 date count
    assert_eq!(report.checks.len(), 46);
}

#[test]
fn planted_negative_count_fails_check_one() {
    let epi = common::synthetic_epi();
    let mut rows = table(3);
    rows[17].nb_transactions = -1;
    let report = validate_dataset(&rows, &epi, &ValidationConfig::default());
    let check = report.get("non_negative_counts").unwrap();
    assert!(!check.passed);
    assert_eq!(check.measured, "1");
}

#[test]
fn truncated_table_fails_the_date_count() {
    let epi = common::synthetic_epi();
    let cutoff = WeekGrid::default().date(99).unwrap();
    let rows: Vec<_> = table(3).into_iter().filter(|r| r.date <= cutoff).collect();
    let report = validate_dataset(&rows, &epi, &ValidationConfig::default());
    let check = report.get("distinct_dates").unwrap();
    assert!(!check.passed);
    assert_eq!(check.measured, "100");
}

#[test]
fn report_is_idempotent() {
    let epi = common::synthetic_epi();
    let rows = table(11);
    let config = ValidationConfig::default();
    assert_eq!(validate_dataset(&rows, &epi, &config), validate_dataset(&rows, &epi, &config));
}

#[test]
fn restaurants_respond_with_a_short_strong_lag() {
    let epi = common::synthetic_epi();
    let results = ccf_table(&table(5), &epi, 12);
    for city in City::ALL {
        let c = results[&(city, Category::Restaurants)].as_ref().unwrap();
        assert!(c.lag_max <= 3, "{city}: lag {}", c.lag_max);
        assert!(c.ccf_max <= -0.5, "{city}: r {}", c.ccf_max);
    }
}

fn day(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn dp_series(dates: &[NaiveDate], pct: &[f64]) -> MobilitySeries {
    MobilitySeries {
        city: City::Bogota,
        super_category: SuperCategory::RetailAndRecreation,
        week_end_dates: dates.to_vec(),
        noisy_counts: vec![0; dates.len()],
        raw: vec![0.0; dates.len()],
        pct_change_from_baseline: pct.iter().map(|p| Some(*p)).collect(),
        baseline: 1.0,
        per_postal: None,
        metadata: ReleaseMetadata {
            epsilon: 1.0,
            delta: None,
            scale: 1.0,
            mode: NoiseMode::Linear,
            time_steps: dates.len() as u32,
            upper_bound: 250.0,
        },
    }
}

fn reference(dates: &[NaiveDate], pct: &[f64]) -> MobilityReferenceSeries {
    MobilityReferenceSeries {
        region: "Bogota".into(),
        category: "retail_and_recreation".into(),
        week_end_dates: dates.to_vec(),
        pct_change_from_baseline: pct.to_vec(),
    }
}

#[test]
fn mobility_comparison_examples() {
    let dates = WeekGrid::new(day(2020, 1, 7), day(2020, 6, 2)).unwrap().dates();
    let pct: Vec<f64> = (0..dates.len()).map(|i| -(i as f64).powf(1.3) + (i % 3) as f64).collect();
    let dp = dp_series(&dates, &pct);

    let same = compare_mobility(&dp, &reference(&dates, &pct)).unwrap();
    assert!((same.correlation - 1.0).abs() < 1e-12);
    assert_eq!(same.overlap, dates.len());

    let negated: Vec<f64> = pct.iter().map(|p| -p).collect();
    let flipped = compare_mobility(&dp, &reference(&dates, &negated)).unwrap();
    assert!((flipped.correlation + 1.0).abs() < 1e-12);

    // Reference shifted to start 6 weeks later: only the shared weeks count.
    let later = &dates[6..];
    let shifted = compare_mobility(&dp, &reference(later, &pct[6..])).unwrap();
    assert_eq!(shifted.overlap, dates.len() - 6);
    assert!((shifted.correlation - 1.0).abs() < 1e-12);

    let tiny = compare_mobility(&dp, &reference(&dates[..7], &pct[..7]));
    assert!(tiny.is_err());
}

#[test]
fn mobility_comparison_skips_undefined_weeks() {
    let dates = WeekGrid::new(day(2020, 1, 7), day(2020, 4, 28)).unwrap().dates();
    let pct: Vec<f64> = (0..dates.len()).map(|i| (i as f64).sqrt()).collect();
    let mut dp = dp_series(&dates, &pct);
    dp.pct_change_from_baseline[0] = None;
    let r = compare_mobility(&dp, &reference(&dates, &pct)).unwrap();
    assert_eq!(r.overlap, dates.len() - 1);
}

fn series_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (12usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(-1e3f64..1e3, n),
            prop::collection::vec(-1e3f64..1e3, n),
        )
    })
}

proptest! {
    #[test]
    fn ccf_is_bounded_and_affine_invariant(
        (x, y) in series_pair(),
        a in 0.01f64..100.0,
        b in -1e3f64..1e3,
    ) {
        let base = match ccf(&x, &y, 4) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        for r in &base.correlations {
            prop_assert!(r.abs() <= 1.0 + 1e-9);
        }
        prop_assert!(base.lag_max <= 4);
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let ay: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        let cx = ccf(&ax, &y, 4).unwrap();
        let cy = ccf(&x, &ay, 4).unwrap();
        for l in 0..=4 {
            prop_assert!((cx.correlations[l] - base.correlations[l]).abs() < 1e-9);
            prop_assert!((cy.correlations[l] - base.correlations[l]).abs() < 1e-9);
        }
    }
}

#[test]
fn lag_exempt_city_only_needs_the_sign() {
    let epi = common::synthetic_epi();
    let rows = table(9);
    let strict = ValidationConfig {
        lag_band: 0,
        ..ValidationConfig::default()
    };
    let exempt = ValidationConfig {
        lag_exempt: vec![City::Santiago],
        ..strict.clone()
    };
    let name = "ccf[Santiago|Restaurants]";
    assert!(!validate_dataset(&rows, &epi, &strict).get(name).unwrap().passed);
    assert!(validate_dataset(&rows, &epi, &exempt).get(name).unwrap().passed);
}
