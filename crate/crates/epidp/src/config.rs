//! TOML run configuration. Every section is optional; missing keys take the
//! library defaults. Relative paths resolve against the config file's folder.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use epidp_core::analytics::{BaselineWindow, MobilityOptions};
use epidp_core::category::{default_profiles, Category, CategoryProfile, SuperCategory, SuperCategoryMap};
use epidp_core::contact::{MixingVector, NationalAveraging, TrainingHyperparams, DEFAULT_AGE_GROUPS};
use epidp_core::datagen::{BaselinePrivacy, GenerationConfig};
use epidp_core::dp::{NoiseMode, PrivacyParams};
use epidp_core::geo::{City, CityEntry, CityTable};
use epidp_core::grid::WeekGrid;
use epidp_core::rt::{RtPrior, TimeUnit};
use epidp_core::validation::ValidationConfig;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{EpiColumns, MobilityColumns};

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "EPIDP_CONFIG";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub privacy: PrivacySection,
    pub cities: Option<Vec<CitySection>>,
    pub categories: Option<Vec<CategorySection>>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub contact: ContactSection,
    #[serde(default)]
    pub rt: RtSection,
    #[serde(default)]
    pub validation: ValidationSection,
    #[serde(skip)]
    base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    pub seed: Option<u64>,
    pub merchant_count: Option<u32>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub noise_sigma: Option<f64>,
    pub postal_zones: Option<u32>,
    /// OWID-style daily CSV.
    pub epi: Option<PathBuf>,
    #[serde(default)]
    pub epi_columns: EpiColumns,
    /// Generate merchants on all cores; output is identical either way.
    #[serde(default = "yes")]
    pub parallel: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySection {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub sensitivity: Option<f64>,
    pub upper_bound: Option<f64>,
    pub mode: Option<String>,
    /// Ledger total for one run; defaults to `epsilon`.
    pub budget: Option<f64>,
    /// Seed of the noise stream.
    pub seed: Option<u64>,
    pub baseline_epsilon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitySection {
    pub name: String,
    pub population: u64,
}

/// Overrides for one category; absent keys keep the default profile.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategorySection {
    pub name: String,
    pub share_weight: Option<f64>,
    pub covid_multiplier: Option<f64>,
    pub response_lag: Option<u32>,
    pub base_volume: Option<f64>,
    pub typical_ticket: Option<f64>,
    pub online_share: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub city: Option<String>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub super_category: Option<String>,
    #[serde(default)]
    pub per_postal: bool,
    pub baseline_start: Option<NaiveDate>,
    pub baseline_weeks: Option<usize>,
    /// Category name to super-category name; replaces the default map.
    pub super_categories: Option<BTreeMap<String, String>>,
    /// Reference mobility report CSV for `mobility --reference`.
    pub mobility_reference: Option<PathBuf>,
    pub mobility_region: Option<String>,
    #[serde(default)]
    pub mobility_columns: MobilityColumns,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSection {
    pub ages: Option<usize>,
    pub mixing: Option<Vec<f64>>,
    /// `"unweighted"` or `"population"`.
    pub averaging: Option<String>,
    pub cities: Option<Vec<String>>,
    pub step_size: Option<f64>,
    pub fd_epsilon: Option<f64>,
    pub max_iterations: Option<usize>,
    pub loss_tolerance: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RtSection {
    pub si_mean: Option<f64>,
    pub si_sd: Option<f64>,
    pub si_max: Option<usize>,
    /// `"day"` or `"week"`.
    pub unit: Option<String>,
    pub window: Option<usize>,
    pub prior_shape: Option<f64>,
    pub prior_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSection {
    pub max_lag: Option<usize>,
    pub lag_band: Option<usize>,
    #[serde(default)]
    pub lag_exempt: Vec<String>,
    pub share_tolerance_pp: Option<f64>,
    pub null_correlation_ceiling: Option<f64>,
    pub expected_weeks: Option<usize>,
}

fn bad(what: impl std::fmt::Display) -> Error {
    Error::Config(what.to_string())
}

fn city(name: &str) -> Result<City> {
    name.parse::<City>().map_err(bad)
}

/// Serial-interval and estimator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtSettings {
    pub si_mean: f64,
    pub si_sd: f64,
    pub si_max: usize,
    pub unit: TimeUnit,
    pub window: usize,
    pub prior: RtPrior,
}

impl Config {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut config: Config = toml::from_str(text).map_err(bad)?;
        config.base_dir = base_dir.into();
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Config::from_toml(&text, dir)
    }

    /// Loads `explicit`, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match explicit {
            Some(p) => Config::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Config::load(Path::new(&p)),
                _ => Ok(Config::default()),
            },
        }
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn epi_path(&self) -> Option<PathBuf> {
        self.generation.epi.as_deref().map(|p| self.resolve_path(p))
    }

    pub fn grid(&self) -> Result<WeekGrid> {
        let default = WeekGrid::default();
        Ok(WeekGrid::new(
            self.generation.start.unwrap_or(default.start()),
            self.generation.end.unwrap_or(default.end()),
        )?)
    }

    pub fn city_table(&self) -> Result<CityTable> {
        match &self.cities {
            None => Ok(CityTable::default()),
            Some(list) => Ok(CityTable {
                entries: list
                    .iter()
                    .map(|c| {
                        Ok(CityEntry {
                            city: city(&c.name)?,
                            population: c.population,
                        })
                    })
                    .collect::<Result<_>>()?,
            }),
        }
    }

    pub fn profiles(&self) -> Result<Vec<CategoryProfile>> {
        let mut profiles = default_profiles();
        for section in self.categories.iter().flatten() {
            let category: Category = section.name.parse().map_err(bad)?;
            let p = profiles
                .iter_mut()
                .find(|p| p.category == category)
                .expect("default profiles cover every category");
            p.share_weight = section.share_weight.unwrap_or(p.share_weight);
            p.covid_multiplier = section.covid_multiplier.unwrap_or(p.covid_multiplier);
            p.response_lag = section.response_lag.unwrap_or(p.response_lag);
            p.base_volume = section.base_volume.unwrap_or(p.base_volume);
            p.typical_ticket = section.typical_ticket.unwrap_or(p.typical_ticket);
            p.online_share = section.online_share.unwrap_or(p.online_share);
            p.validate()?;
        }
        Ok(profiles)
    }

    pub fn generation_config(&self) -> Result<GenerationConfig> {
        let d = GenerationConfig::default();
        let g = &self.generation;
        let config = GenerationConfig {
            seed: g.seed.unwrap_or(d.seed),
            merchant_count: g.merchant_count.unwrap_or(d.merchant_count),
            grid: self.grid()?,
            noise_sigma: g.noise_sigma.unwrap_or(d.noise_sigma),
            postal_zones: g.postal_zones.unwrap_or(d.postal_zones),
            cities: self.city_table()?,
            categories: self.profiles()?,
            baseline_privacy: BaselinePrivacy {
                epsilon: self.privacy.baseline_epsilon.unwrap_or(d.baseline_privacy.epsilon),
                sensitivity: self.privacy.sensitivity.unwrap_or(d.baseline_privacy.sensitivity),
            },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn privacy_params(&self) -> Result<PrivacyParams> {
        let d = PrivacyParams::default();
        let p = &self.privacy;
        let mode = match &p.mode {
            Some(m) => m.parse::<NoiseMode>()?,
            None => d.mode,
        };
        Ok(PrivacyParams {
            epsilon: p.epsilon.unwrap_or(d.epsilon),
            delta: p.delta.unwrap_or(d.delta),
            sensitivity: p.sensitivity.unwrap_or(d.sensitivity),
            time_steps: 1,
            upper_bound: p.upper_bound.unwrap_or(d.upper_bound),
            mode,
        })
    }

    pub fn budget(&self) -> Result<f64> {
        Ok(self.privacy.budget.unwrap_or(self.privacy_params()?.epsilon))
    }

    pub fn noise_seed(&self) -> u64 {
        self.privacy.seed.unwrap_or(1)
    }

    pub fn analysis_city(&self) -> Result<City> {
        city(self.analysis.city.as_deref().unwrap_or("Bogota"))
    }

    /// Analysis window bounds, defaulting to the whole grid.
    pub fn analysis_range(&self) -> Result<(NaiveDate, NaiveDate)> {
        let grid = self.grid()?;
        Ok((
            self.analysis.start.unwrap_or(grid.start()),
            self.analysis.end.unwrap_or(grid.end()),
        ))
    }

    pub fn super_category(&self) -> Result<SuperCategory> {
        Ok(self
            .analysis
            .super_category
            .as_deref()
            .unwrap_or("retail_and_recreation")
            .parse()?)
    }

    pub fn super_category_map(&self) -> Result<SuperCategoryMap> {
        match &self.analysis.super_categories {
            None => Ok(SuperCategoryMap::default()),
            Some(m) => Ok(SuperCategoryMap::from_pairs(
                m.iter()
                    .map(|(c, s)| Ok((c.parse::<Category>().map_err(bad)?, s.parse::<SuperCategory>()?)))
                    .collect::<Result<Vec<_>>>()?,
            )),
        }
    }

    pub fn mobility_options(&self) -> MobilityOptions {
        let d = BaselineWindow::default();
        MobilityOptions {
            baseline: BaselineWindow {
                first_week: self.analysis.baseline_start.unwrap_or(d.first_week),
                weeks: self.analysis.baseline_weeks.unwrap_or(d.weeks),
            },
            per_postal: self.analysis.per_postal,
        }
    }

    pub fn ages(&self) -> usize {
        self.contact.ages.unwrap_or(DEFAULT_AGE_GROUPS)
    }

    pub fn mixing(&self) -> Result<MixingVector> {
        match &self.contact.mixing {
            None => Ok(MixingVector::ones(self.ages())),
            Some(v) => Ok(MixingVector::new(v.clone())?),
        }
    }

    pub fn contact_cities(&self) -> Result<Vec<City>> {
        match &self.contact.cities {
            None => Ok(self.city_table()?.cities().collect()),
            Some(names) => names.iter().map(|n| city(n)).collect(),
        }
    }

    pub fn averaging(&self, cities: &[City]) -> Result<NationalAveraging> {
        match self.contact.averaging.as_deref().unwrap_or("unweighted") {
            "unweighted" => Ok(NationalAveraging::Unweighted),
            "population" | "weighted" => {
                let table = self.city_table()?;
                let weights = cities
                    .iter()
                    .map(|c| {
                        table
                            .population(*c)
                            .map(|p| p as f64)
                            .ok_or_else(|| bad(format!("no population for {c}")))
                    })
                    .collect::<Result<_>>()?;
                Ok(NationalAveraging::Weighted(weights))
            }
            other => Err(bad(format!("unknown averaging {other:?}"))),
        }
    }

    pub fn training(&self) -> TrainingHyperparams {
        let d = TrainingHyperparams::default();
        let c = &self.contact;
        TrainingHyperparams {
            step_size: c.step_size.unwrap_or(d.step_size),
            fd_epsilon: c.fd_epsilon.unwrap_or(d.fd_epsilon),
            max_iterations: c.max_iterations.unwrap_or(d.max_iterations),
            loss_tolerance: c.loss_tolerance.unwrap_or(d.loss_tolerance),
            seed: c.seed.unwrap_or(d.seed),
        }
    }

    pub fn rt(&self) -> Result<RtSettings> {
        let r = &self.rt;
        let unit = match r.unit.as_deref().unwrap_or("day") {
            "day" => TimeUnit::Day,
            "week" => TimeUnit::Week,
            other => return Err(bad(format!("unknown time unit {other:?}"))),
        };
        let d = RtPrior::default();
        // Serial interval settings are in steps of `unit`; the defaults are
        // 6.5 +- 4 days truncated at 30 days either way.
        let (days_per_step, default_window) = match unit {
            TimeUnit::Day => (1.0, 7),
            TimeUnit::Week => (7.0, 2),
        };
        Ok(RtSettings {
            si_mean: r.si_mean.unwrap_or(6.5 / days_per_step),
            si_sd: r.si_sd.unwrap_or(4.0 / days_per_step),
            si_max: r.si_max.unwrap_or((30.0 / days_per_step).ceil() as usize),
            unit,
            window: r.window.unwrap_or(default_window),
            prior: RtPrior {
                shape: r.prior_shape.unwrap_or(d.shape),
                rate: r.prior_rate.unwrap_or(d.rate),
            },
        })
    }

    pub fn validation(&self) -> Result<ValidationConfig> {
        let d = ValidationConfig::default();
        let v = &self.validation;
        Ok(ValidationConfig {
            cities: self.city_table()?,
            categories: self.profiles()?,
            max_lag: v.max_lag.unwrap_or(d.max_lag),
            lag_band: v.lag_band.unwrap_or(d.lag_band),
            lag_exempt: v.lag_exempt.iter().map(|n| city(n)).collect::<Result<_>>()?,
            share_tolerance_pp: v.share_tolerance_pp.unwrap_or(d.share_tolerance_pp),
            null_correlation_ceiling: v.null_correlation_ceiling.unwrap_or(d.null_correlation_ceiling),
            expected_weeks: v.expected_weeks.unwrap_or(self.grid()?.len()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_run() {
        let c = Config::from_toml("", ".").unwrap();
        assert_eq!(c.generation_config().unwrap(), GenerationConfig::default());
        assert_eq!(c.privacy_params().unwrap(), PrivacyParams::default());
        assert_eq!(c.validation().unwrap(), ValidationConfig::default());
        assert_eq!(c.budget().unwrap(), 1.0);
    }

    #[test]
    fn sections_override_keys() {
        let text = r#"
            [generation]
            seed = 9
            merchant_count = 50
            epi = "data/owid.csv"

            [privacy]
            epsilon = 2.0
            mode = "analytic-gaussian"

            [[cities]]
            name = "Bogota DC"
            population = 10

            [[categories]]
            name = "Hospitals"
            covid_multiplier = 0.9

            [validation]
            lag_exempt = ["Santiago"]
        "#;
        let c = Config::from_toml(text, "/tmp/run").unwrap();
        let g = c.generation_config().unwrap();
        assert_eq!((g.seed, g.merchant_count), (9, 50));
        assert_eq!(g.cities.entries.len(), 1);
        let hospitals = g.categories.iter().find(|p| p.category == Category::Hospitals).unwrap();
        assert_eq!(hospitals.covid_multiplier, 0.9);
        assert_eq!(hospitals.base_volume, 25.0);
        assert_eq!(c.privacy_params().unwrap().mode, NoiseMode::AnalyticGaussian);
        assert_eq!(c.budget().unwrap(), 2.0);
        assert_eq!(c.epi_path().unwrap(), PathBuf::from("/tmp/run/data/owid.csv"));
        assert_eq!(c.validation().unwrap().lag_exempt, [City::Santiago]);
    }

    #[test]
    fn weekly_rt_defaults_scale_from_days() {
        let day = Config::from_toml("", ".").unwrap().rt().unwrap();
        assert_eq!((day.si_mean, day.si_sd, day.si_max, day.window), (6.5, 4.0, 30, 7));
        let week = Config::from_toml("[rt]\nunit = \"week\"\n", ".").unwrap().rt().unwrap();
        assert_eq!((week.si_mean, week.si_sd, week.si_max, week.window), (6.5 / 7.0, 4.0 / 7.0, 5, 2));
        let set = Config::from_toml("[rt]\nunit = \"week\"\nwindow = 3\nsi_mean = 1.2\n", ".")
            .unwrap()
            .rt()
            .unwrap();
        assert_eq!((set.si_mean, set.window), (1.2, 3));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml("[generation]\nsed = 1\n", ".").is_err());
        assert!(Config::from_toml("[[categories]]\nname = \"Casinos\"\n", ".")
            .unwrap()
            .profiles()
            .is_err());
    }
}
