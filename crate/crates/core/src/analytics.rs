//! Differentially private aggregate releases over the transaction table:
//! postal-code hotspots, super-category mobility series and the
//! essential-versus-luxury adherence series.
//!
//! Every release clips each row's `nb_transactions` to `[0, U]` before
//! aggregating, charges the ledger before any noise is drawn, and
//! post-processes noisy values by rounding and clamping at zero. The raw
//! (unrounded) noisy values are kept alongside for validation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Days, NaiveDate};
use rand::Rng;

use crate::category::{Category, GoodsClass, SuperCategory, SuperCategoryMap};
use crate::dp::{self, BudgetLedger, PrivacyParams, ReleaseMetadata};
use crate::geo::City;
use crate::grid::WeekGrid;
use crate::record::{Channel, TransactionRecord};
use crate::stats;
use crate::{Error, Result};

/// City plus an inclusive range of week-end dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisWindow {
    pub city: City,
    steps: WeekGrid,
}

impl AnalysisWindow {
    pub fn new(city: City, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        Ok(AnalysisWindow {
            city,
            steps: WeekGrid::new(start, end)?,
        })
    }

    /// Window restricted to `grid`: both ends must be grid dates.
    pub fn on_grid(city: City, start: NaiveDate, end: NaiveDate, grid: &WeekGrid) -> Result<Self> {
        Ok(AnalysisWindow {
            city,
            steps: grid.window(start, end)?,
        })
    }

    pub fn start(&self) -> NaiveDate {
        self.steps.start()
    }

    pub fn end(&self) -> NaiveDate {
        self.steps.end()
    }

    pub fn steps(&self) -> Vec<NaiveDate> {
        self.steps.dates()
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn step_of(&self, date: NaiveDate) -> Option<usize> {
        self.steps.index_of(date)
    }

    fn selects(&self, row: &TransactionRecord) -> Option<usize> {
        if row.city() != self.city {
            return None;
        }
        self.step_of(row.date)
    }
}

fn clipped_count(row: &TransactionRecord, upper_bound: f64) -> f64 {
    (row.nb_transactions.max(0) as f64).min(upper_bound)
}

fn noisy<R: Rng + ?Sized>(exact: f64, scale: f64, rng: &mut R) -> Result<(f64, u64)> {
    let raw = dp::add_gaussian_noise(exact, scale, rng)?;
    Ok((raw, dp::release_count(raw)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotspotMap {
    pub city: City,
    /// Released count per postal code.
    pub counts: BTreeMap<String, u64>,
    /// Noisy values before rounding and clamping.
    pub raw: BTreeMap<String, f64>,
    pub metadata: ReleaseMetadata,
}

/// Noisy OFFLINE transaction volume per postal code of the window's city.
pub fn hotspot<R: Rng + ?Sized>(
    table: &[TransactionRecord],
    window: &AnalysisWindow,
    params: &PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<HotspotMap> {
    let params = params.with_time_steps(1);
    let scale = params.noise_scale()?;
    ledger.charge(
        format!("hotspot {} {}..{}", window.city, window.start(), window.end()),
        params.epsilon,
    )?;

    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for row in table.iter().filter(|r| r.channel == Channel::Offline) {
        if window.selects(row).is_some() {
            *sums.entry(row.postal_code.clone()).or_insert(0.0) += clipped_count(row, params.upper_bound);
        }
    }
    let mut counts = BTreeMap::new();
    let mut raw = BTreeMap::new();
    for (code, exact) in sums {
        let (r, released) = noisy(exact, scale, rng)?;
        raw.insert(code.clone(), r);
        counts.insert(code, released);
    }
    Ok(HotspotMap {
        city: window.city,
        counts,
        raw,
        metadata: ReleaseMetadata::from_params(&params, scale),
    })
}

/// Weeks whose median forms the percent-change baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineWindow {
    pub first_week: NaiveDate,
    pub weeks: usize,
}

impl Default for BaselineWindow {
    /// First five grid weeks of 2020.
    fn default() -> Self {
        BaselineWindow {
            first_week: NaiveDate::from_ymd_opt(2020, 1, 7).expect("valid date"),
            weeks: 5,
        }
    }
}

impl BaselineWindow {
    /// Indices into `dates` used for the baseline. Falls back to the first
    /// `weeks` steps when the configured weeks are outside `dates`.
    pub fn select(&self, dates: &[NaiveDate]) -> Vec<usize> {
        let last = self
            .first_week
            .checked_add_days(Days::new(7 * self.weeks.saturating_sub(1) as u64))
            .unwrap_or(self.first_week);
        let inside: Vec<usize> = dates
            .iter()
            .enumerate()
            .filter(|(_, d)| **d >= self.first_week && **d <= last)
            .map(|(i, _)| i)
            .collect();
        if inside.is_empty() {
            (0..dates.len().min(self.weeks)).collect()
        } else {
            inside
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MobilityOptions {
    pub baseline: BaselineWindow,
    /// Release per-postal-code series; the city series is then their sum.
    pub per_postal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilitySeries {
    pub city: City,
    pub super_category: SuperCategory,
    pub week_end_dates: Vec<NaiveDate>,
    pub noisy_counts: Vec<u64>,
    pub raw: Vec<f64>,
    /// `None` where the baseline is zero.
    pub pct_change_from_baseline: Vec<Option<f64>>,
    pub baseline: f64,
    pub per_postal: Option<BTreeMap<String, Vec<u64>>>,
    pub metadata: ReleaseMetadata,
}

/// `(value - baseline) / baseline * 100`, undefined for a zero baseline.
pub fn pct_change(values: &[f64], baseline: f64) -> Vec<Option<f64>> {
    values
        .iter()
        .map(|&v| (baseline > 0.0).then(|| (v - baseline) / baseline * 100.0))
        .collect()
}

/// Weekly noisy volume of one super-category in the window's city.
///
/// `params.epsilon` is the total budget of the release; it is split evenly
/// across the window's steps and the noise scale grows with the step count.
#[allow(clippy::too_many_arguments)]
pub fn mobility<R: Rng + ?Sized>(
    table: &[TransactionRecord],
    window: &AnalysisWindow,
    super_category: SuperCategory,
    map: &SuperCategoryMap,
    params: &PrivacyParams,
    options: MobilityOptions,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<MobilitySeries> {
    let members = map.members(super_category);
    if members.is_empty() {
        return Err(Error::param(
            "super_category",
            format!("no category is mapped to {super_category}"),
        ));
    }
    let steps = window.steps();
    let t = steps.len() as u32;
    let params = params.with_time_steps(t);
    let scale = params.noise_scale()?;
    let per_step = dp::per_step_epsilon(params.epsilon, t)?;
    ledger.charge_all(
        steps
            .iter()
            .map(|d| (format!("mobility {} {super_category} {d}", window.city), per_step)),
    )?;

    let selected = |row: &&TransactionRecord| members.contains(&row.category);
    let (raw, noisy_counts, per_postal) = if options.per_postal {
        let mut by_code: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for row in table.iter().filter(selected) {
            if let Some(i) = window.selects(row) {
                by_code.entry(row.postal_code.clone()).or_insert_with(|| alloc::vec![0.0; steps.len()])[i] +=
                    clipped_count(row, params.upper_bound);
            }
        }
        let mut released_by_code = BTreeMap::new();
        let mut city_raw = alloc::vec![0.0; steps.len()];
        let mut city_released = alloc::vec![0u64; steps.len()];
        for (code, exact) in by_code {
            let mut released = Vec::with_capacity(exact.len());
            for (i, e) in exact.into_iter().enumerate() {
                let (r, c) = noisy(e, scale, rng)?;
                city_raw[i] += r;
                city_released[i] += c;
                released.push(c);
            }
            released_by_code.insert(code, released);
        }
        (city_raw, city_released, Some(released_by_code))
    } else {
        let mut exact = alloc::vec![0.0; steps.len()];
        for row in table.iter().filter(selected) {
            if let Some(i) = window.selects(row) {
                exact[i] += clipped_count(row, params.upper_bound);
            }
        }
        let mut raw = Vec::with_capacity(exact.len());
        let mut released = Vec::with_capacity(exact.len());
        for e in exact {
            let (r, c) = noisy(e, scale, rng)?;
            raw.push(r);
            released.push(c);
        }
        (raw, released, None)
    };

    let values: Vec<f64> = noisy_counts.iter().map(|&c| c as f64).collect();
    let base_idx = options.baseline.select(&steps);
    let base_values: Vec<f64> = base_idx.iter().map(|&i| values[i]).collect();
    let baseline = stats::median(&base_values);
    Ok(MobilitySeries {
        city: window.city,
        super_category,
        week_end_dates: steps,
        noisy_counts,
        raw,
        pct_change_from_baseline: pct_change(&values, baseline),
        baseline,
        per_postal,
        metadata: ReleaseMetadata::from_params(&params, scale),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdherenceSeries {
    pub city: City,
    pub week_end_dates: Vec<NaiveDate>,
    pub essential: Vec<u64>,
    pub luxury: Vec<u64>,
    pub essential_raw: Vec<f64>,
    pub luxury_raw: Vec<f64>,
    /// Essential over luxury, defined where the released luxury count is positive.
    pub ratio: Vec<Option<f64>>,
    pub metadata: ReleaseMetadata,
}

/// Weekly noisy essential and luxury volumes (online and offline) in the
/// window's city. The two series cover disjoint categories, so one per-step
/// charge of `epsilon / T` covers both.
pub fn adherence<R: Rng + ?Sized>(
    table: &[TransactionRecord],
    window: &AnalysisWindow,
    params: &PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<AdherenceSeries> {
    let steps = window.steps();
    let t = steps.len() as u32;
    let params = params.with_time_steps(t);
    let scale = params.noise_scale()?;
    let per_step = dp::per_step_epsilon(params.epsilon, t)?;
    ledger.charge_all(
        steps
            .iter()
            .map(|d| (format!("adherence {} {d}", window.city), per_step)),
    )?;

    let mut essential = alloc::vec![0.0; steps.len()];
    let mut luxury = alloc::vec![0.0; steps.len()];
    for row in table {
        let Some(i) = window.selects(row) else { continue };
        match row.category.goods_class() {
            Some(GoodsClass::Essential) => essential[i] += clipped_count(row, params.upper_bound),
            Some(GoodsClass::Luxury) => luxury[i] += clipped_count(row, params.upper_bound),
            None => {}
        }
    }
    let mut out = AdherenceSeries {
        city: window.city,
        week_end_dates: steps,
        essential: Vec::new(),
        luxury: Vec::new(),
        essential_raw: Vec::new(),
        luxury_raw: Vec::new(),
        ratio: Vec::new(),
        metadata: ReleaseMetadata::from_params(&params, scale),
    };
    for (e, l) in essential.into_iter().zip(luxury) {
        let (er, ec) = noisy(e, scale, rng)?;
        let (lr, lc) = noisy(l, scale, rng)?;
        out.essential_raw.push(er);
        out.luxury_raw.push(lr);
        out.essential.push(ec);
        out.luxury.push(lc);
        out.ratio.push((lc > 0).then(|| ec as f64 / lc as f64));
    }
    Ok(out)
}

/// Exact per-category volume (clipped to `upper_bound`) of `city` over all
/// rows, in [`Category::ALL`] order.
pub fn category_volumes(table: &[TransactionRecord], city: City, upper_bound: f64) -> [f64; 10] {
    let mut sums = [0.0; 10];
    for row in table.iter().filter(|r| r.city() == city) {
        sums[row.category.index()] += clipped_count(row, upper_bound);
    }
    sums
}

/// Categories with at least one row, in [`Category::ALL`] order.
pub fn categories_present(table: &[TransactionRecord]) -> Vec<Category> {
    let mut seen = [false; 10];
    for row in table {
        seen[row.category.index()] = true;
    }
    Category::ALL.into_iter().filter(|c| seen[c.index()]).collect()
}
