//! Synthetic merchant-week transaction generator.
//!
//! Each merchant owns an independent ChaCha stream derived from
//! `(seed, merchant_id)`, so merchants can be generated in any order (or in
//! parallel) and still produce identical rows.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::category::{default_profiles, Category, CategoryProfile};
use crate::dp::{self, DEFAULT_SENSITIVITY};
use crate::epi::EpiWeeklySeries;
use crate::geo::{assign_postal_code, City, CityTable, MAX_POSTAL_ZONES};
use crate::grid::WeekGrid;
use crate::math;
use crate::record::{Channel, TransactionRecord};
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_190_101;
pub const DEFAULT_MERCHANTS: u32 = 10_000;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.25;
pub const DEFAULT_POSTAL_ZONES: u32 = 20;

/// Parameters of the baseline privacy template applied to a generated table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselinePrivacy {
    pub epsilon: f64,
    pub sensitivity: f64,
}

impl Default for BaselinePrivacy {
    fn default() -> Self {
        BaselinePrivacy {
            epsilon: 1.0,
            sensitivity: DEFAULT_SENSITIVITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub seed: u64,
    pub merchant_count: u32,
    pub grid: WeekGrid,
    /// Dispersion of the lognormal factor on weekly volume and spend.
    pub noise_sigma: f64,
    pub postal_zones: u32,
    pub cities: CityTable,
    pub categories: Vec<CategoryProfile>,
    pub baseline_privacy: BaselinePrivacy,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            seed: DEFAULT_SEED,
            merchant_count: DEFAULT_MERCHANTS,
            grid: WeekGrid::default(),
            noise_sigma: DEFAULT_NOISE_SIGMA,
            postal_zones: DEFAULT_POSTAL_ZONES,
            cities: CityTable::default(),
            categories: default_profiles(),
            baseline_privacy: BaselinePrivacy::default(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.merchant_count == 0 {
            return Err(Error::param("merchant_count", "must be >= 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::param("noise_sigma", "must be finite and >= 0"));
        }
        if self.postal_zones == 0 || self.postal_zones > MAX_POSTAL_ZONES {
            return Err(Error::param(
                "postal_zones",
                format!("must be in 1..={MAX_POSTAL_ZONES}"),
            ));
        }
        if self.categories.is_empty() {
            return Err(Error::param("categories", "at least one category profile is required"));
        }
        for p in &self.categories {
            p.validate()?;
        }
        crate::geo::city_shares(&self.cities)?;
        Ok(())
    }

    pub fn profile(&self, category: Category) -> Option<&CategoryProfile> {
        self.categories.iter().find(|p| p.category == category)
    }
}

/// Volume factor `max(0, 1 + multiplier * d_hat)`.
pub fn covid_factor(multiplier: f64, d_hat: f64) -> f64 {
    (1.0 + multiplier * d_hat).max(0.0)
}

/// Static attributes of one merchant.
#[derive(Debug, Clone, PartialEq)]
pub struct Merchant {
    pub merchant_id: u32,
    pub city: City,
    pub profile: CategoryProfile,
    pub postal_code: String,
    pub channel: Channel,
}

/// Generator prepared against a configuration and its epidemiological input.
#[derive(Debug, Clone)]
pub struct Generator<'a> {
    config: &'a GenerationConfig,
    /// Normalized deaths per city, indexed by grid step.
    d_hat: BTreeMap<City, Vec<f64>>,
    /// City of merchant `id` at index `id - 1`.
    cities: Vec<City>,
    category_weights: Vec<(CategoryProfile, f64)>,
}

impl<'a> Generator<'a> {
    /// Checks that every city's country series covers every grid week.
    pub fn new(config: &'a GenerationConfig, epi: &BTreeMap<String, EpiWeeklySeries>) -> Result<Self> {
        config.validate()?;
        let dates = config.grid.dates();
        let mut d_hat = BTreeMap::new();
        for city in config.cities.cities() {
            let country = city.country();
            let series = epi.get(country);
            let mut values = Vec::with_capacity(dates.len());
            for &week in &dates {
                match series.and_then(|s| s.normalized_at(week)) {
                    Some(v) => values.push(v.clamp(0.0, 1.0)),
                    None => {
                        return Err(Error::MissingEpiWeek {
                            country: country.into(),
                            week,
                        })
                    }
                }
            }
            d_hat.insert(city, values);
        }
        let cities = assign_cities(&config.cities, config.merchant_count, config.seed);
        let category_weights = config.categories.iter().map(|p| (*p, p.share_weight)).collect();
        Ok(Generator {
            config,
            d_hat,
            cities,
            category_weights,
        })
    }

    fn merchant_rng(&self, merchant_id: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(merchant_id as u64);
        rng
    }

    fn draw_merchant(&self, merchant_id: u32, rng: &mut ChaCha8Rng) -> Merchant {
        let city = self.cities[merchant_id as usize - 1];
        let profile = *pick_weighted(&self.category_weights, rng);
        let postal_code = assign_postal_code(city, self.config.postal_zones, rng);
        let channel = if rng.random::<f64>() < profile.online_share {
            Channel::Online
        } else {
            Channel::Offline
        };
        Merchant {
            merchant_id,
            city,
            profile,
            postal_code,
            channel,
        }
    }

    /// Static attributes of `merchant_id` (1-based).
    pub fn merchant(&self, merchant_id: u32) -> Merchant {
        let mut rng = self.merchant_rng(merchant_id);
        self.draw_merchant(merchant_id, &mut rng)
    }

    /// Expected weekly count of `merchant` at grid step `step`, before noise.
    pub fn expected_volume(&self, merchant: &Merchant, step: usize) -> f64 {
        let lag = merchant.profile.response_lag as usize;
        let d_hat = step
            .checked_sub(lag)
            .map(|i| self.d_hat[&merchant.city][i])
            .unwrap_or(0.0);
        merchant.profile.base_volume * covid_factor(merchant.profile.covid_multiplier, d_hat)
    }

    /// All weekly rows of one merchant, in date order.
    pub fn merchant_rows(&self, merchant_id: u32) -> Vec<TransactionRecord> {
        let mut rng = self.merchant_rng(merchant_id);
        let merchant = self.draw_merchant(merchant_id, &mut rng);
        let sigma = self.config.noise_sigma;
        let dates = self.config.grid.dates();
        let mut rows = Vec::with_capacity(dates.len());
        for (step, date) in dates.into_iter().enumerate() {
            let eta: f64 = StandardNormal.sample(&mut rng);
            let eta_spend: f64 = StandardNormal.sample(&mut rng);
            let expected = self.expected_volume(&merchant, step) * math::exp(sigma * eta);
            let count = math::round(expected).max(0.0);
            let spend = count * merchant.profile.typical_ticket * math::exp(sigma * eta_spend);
            rows.push(TransactionRecord {
                id: merchant_id,
                merchant_id,
                date,
                category: merchant.profile.category,
                postal_code: merchant.postal_code.clone(),
                channel: merchant.channel,
                spend_amount: round_cents(spend),
                nb_transactions: count as i64,
            });
        }
        rows
    }
}

/// Largest-remainder apportionment of `n` items to `weights` (ties to the
/// earlier entry).
pub fn apportion(weights: &[f64], n: u32) -> Vec<u32> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<u32> = quotas.iter().map(|q| *q as u32).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - counts.iter().sum::<u32>();
    for &i in order.iter().take(short as usize) {
        counts[i] += 1;
    }
    counts
}

/// City per merchant: population quotas, then a seeded shuffle. Every
/// merchant lands in a city with probability equal to its population share
/// and the realized shares are exact up to rounding.
fn assign_cities(table: &CityTable, merchant_count: u32, seed: u64) -> Vec<City> {
    let weights: Vec<f64> = table.entries.iter().map(|e| e.population as f64).collect();
    let counts = apportion(&weights, merchant_count);
    let mut cities = Vec::with_capacity(merchant_count as usize);
    for (entry, count) in table.entries.iter().zip(counts) {
        cities.extend(core::iter::repeat_n(entry.city, count as usize));
    }
    // Merchant streams start at 1; stream 0 is reserved for this shuffle.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    cities.shuffle(&mut rng);
    cities
}

fn pick_weighted<'w, T, R: Rng + ?Sized>(items: &'w [(T, f64)], rng: &mut R) -> &'w T {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for (item, w) in items {
        if u < *w {
            return item;
        }
        u -= w;
    }
    &items[items.len() - 1].0
}

pub(crate) fn round_cents(amount: f64) -> f64 {
    math::round(amount * 100.0) / 100.0
}

/// Generates the full table, sorted by `(merchant_id, date)`.
pub fn generate(config: &GenerationConfig, epi: &BTreeMap<String, EpiWeeklySeries>) -> Result<Vec<TransactionRecord>> {
    let generator = Generator::new(config, epi)?;
    let mut rows = Vec::with_capacity(config.merchant_count as usize * config.grid.len());
    for id in 1..=config.merchant_count {
        rows.extend(generator.merchant_rows(id));
    }
    Ok(rows)
}

/// Per-category noise scales for the two privatized fields.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineScales {
    count: [f64; 10],
    spend: [f64; 10],
}

impl BaselineScales {
    pub fn uniform(count_scale: f64, spend_scale: f64) -> Result<Self> {
        let s = BaselineScales {
            count: [count_scale; 10],
            spend: [spend_scale; 10],
        };
        s.validate()?;
        Ok(s)
    }

    /// Count scale from the linear calibration with one step and the
    /// category's base volume (rounded up) as bound; spend scale is the
    /// category's typical ticket.
    pub fn from_profiles(profiles: &[CategoryProfile], privacy: BaselinePrivacy) -> Result<Self> {
        let mut count = [0.0; 10];
        let mut spend = [0.0; 10];
        for p in profiles {
            let bound = math::ceil(p.base_volume);
            count[p.category.index()] = dp::linear_scale(privacy.sensitivity, 1.0, bound, privacy.epsilon)?;
            spend[p.category.index()] = p.typical_ticket;
        }
        let s = BaselineScales { count, spend };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        for &v in self.count.iter().chain(self.spend.iter()) {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param("scale", format!("noise scale must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn count_scale(&self, category: Category) -> f64 {
        self.count[category.index()]
    }

    pub fn spend_scale(&self, category: Category) -> f64 {
        self.spend[category.index()]
    }
}

/// Adds independent Gaussian noise to `nb_transactions` and `spendamt` of
/// every row; counts are then rounded and clamped at zero, spend clamped at
/// zero and rounded to cents.
pub fn privatize_baseline<R: Rng + ?Sized>(
    table: &[TransactionRecord],
    scales: &BaselineScales,
    rng: &mut R,
) -> Result<Vec<TransactionRecord>> {
    scales.validate()?;
    table
        .iter()
        .map(|row| {
            let count = dp::add_gaussian_noise(row.nb_transactions as f64, scales.count_scale(row.category), rng)?;
            let spend = dp::add_gaussian_noise(row.spend_amount, scales.spend_scale(row.category), rng)?;
            Ok(TransactionRecord {
                nb_transactions: dp::release_count(count) as i64,
                spend_amount: round_cents(spend.max(0.0)),
                ..row.clone()
            })
        })
        .collect()
}
