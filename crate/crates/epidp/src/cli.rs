//! `epidp` command line.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use epidp_core::analytics::{self, AnalysisWindow};
use epidp_core::category::Category;
use epidp_core::contact::{self, ConsumptionDistribution, AGE_GROUP_LABELS};
use epidp_core::datagen::{self, BaselineScales};
use epidp_core::dp::{BudgetLedger, NoiseMode, ReleaseMetadata};
use epidp_core::epi::EpiWeeklySeries;
use epidp_core::record::TransactionRecord;
use epidp_core::rt::{self, Covariate};
use epidp_core::validation;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::{formats, ingest, svg};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
/// IO, parse and parameter errors.
pub const EXIT_ERROR: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "epidp", version, about = "Synthetic epidemic-correlated transactions and private analyses")]
pub struct Cli {
    /// TOML config file (falls back to $EPIDP_CONFIG, then built-in defaults).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed the subcommand uses (generation, noise or training).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// linear or analytic-gaussian.
    #[arg(long, global = true)]
    pub mode: Option<NoiseMode>,
    /// Ledger total for the run (defaults to the release epsilon).
    #[arg(long, global = true)]
    pub budget: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Window {
    #[arg(long)]
    pub city: Option<String>,
    #[arg(long)]
    pub start: Option<NaiveDate>,
    #[arg(long)]
    pub end: Option<NaiveDate>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic transaction table.
    Generate {
        #[arg(long)]
        out: PathBuf,
        /// OWID-style daily CSV (overrides generation.epi).
        #[arg(long)]
        epi: Option<PathBuf>,
        #[arg(long)]
        merchants: Option<u32>,
    },
    /// Apply the baseline privacy template (row-level Gaussian noise).
    Privatize {
        #[arg(long)]
        txns: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Noisy OFFLINE volume per postal code.
    Hotspot {
        #[arg(long)]
        txns: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        window: Window,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Weekly noisy volume of one super-category with percent change.
    Mobility {
        #[arg(long)]
        txns: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        window: Window,
        #[arg(long)]
        super_category: Option<String>,
        /// Also release per-postal series and write them here.
        #[arg(long)]
        per_postal: Option<PathBuf>,
        /// Mobility report CSV to correlate against.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        region: Option<String>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Weekly noisy essential and luxury volumes.
    Adherence {
        #[arg(long)]
        txns: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        window: Window,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// National contact matrix from noisy category volumes.
    ContactMatrix {
        #[arg(long)]
        txns: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Consumption distribution (ages x categories); uniform if absent.
        #[arg(long)]
        d: Option<PathBuf>,
        /// Released per-city category volumes (cities x categories).
        #[arg(long)]
        counts_out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Fit D so the pipeline reproduces a reference contact matrix.
    TrainD {
        /// Per-city category volumes (cities x categories).
        #[arg(long)]
        counts: PathBuf,
        /// Reference contact matrix (ages x ages).
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Posterior R_t from an incidence series.
    Rt {
        #[arg(long)]
        incidence: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Poisson renewal regression of R_t on covariates.
    FitCovariates {
        #[arg(long)]
        incidence: PathBuf,
        /// LABEL=PATH to a date,value CSV aligned with the incidence; repeatable.
        #[arg(long = "covariate", value_parser = parse_labelled)]
        covariates: Vec<(String, PathBuf)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lagged cross-correlation of every city/category series with deaths.
    Ccf {
        #[arg(long)]
        txns: PathBuf,
        #[arg(long)]
        epi: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_lag: Option<usize>,
    },
    /// Conformance checks; exits 1 when any check fails.
    Validate {
        #[arg(long)]
        txns: PathBuf,
        #[arg(long)]
        epi: Option<PathBuf>,
        /// Report CSV (defaults to <txns>.report.csv).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn parse_labelled(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (label, path) = s.split_once('=').ok_or_else(|| format!("expected LABEL=PATH, got {s:?}"))?;
    if label.is_empty() || path.is_empty() {
        return Err(format!("expected LABEL=PATH, got {s:?}"));
    }
    Ok((label.to_string(), PathBuf::from(path)))
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_budget_exceeded() {
                EXIT_BUDGET
            } else {
                EXIT_ERROR
            }
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_with(path, |w| w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e)))
}

/// `out.csv` -> `out.audit.csv`.
pub fn audit_path(out: &Path) -> PathBuf {
    out.with_extension("audit.csv")
}

fn write_audit(out: &Path, ledger: &BudgetLedger, meta: Option<&ReleaseMetadata>) -> Result<()> {
    write_with(&audit_path(out), |w| formats::write_audit(w, ledger, meta))
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = Config::resolve(cli.config.as_deref())?;
    let p = &mut config.privacy;
    p.epsilon = cli.epsilon.or(p.epsilon);
    p.delta = cli.delta.or(p.delta);
    p.mode = cli.mode.map(|m| m.name().to_string()).or(p.mode.take());
    p.budget = cli.budget.or(p.budget);
    Ok(config)
}

fn load_epi(config: &Config, flag: Option<&Path>) -> Result<std::collections::BTreeMap<String, EpiWeeklySeries>> {
    let path = flag
        .map(Path::to_path_buf)
        .or_else(|| config.epi_path())
        .ok_or_else(|| Error::Config("no epidemiological CSV: pass --epi or set generation.epi".into()))?;
    let mut countries: Vec<&str> = config.city_table()?.cities().map(|c| c.country()).collect();
    countries.dedup();
    let daily = ingest::parse_epi_csv(&read(&path)?, &config.generation.epi_columns, Some(&countries))?;
    Ok(ingest::weekly_epi(&daily, &countries, config.grid()?))
}

fn load_txns(path: &Path) -> Result<Vec<TransactionRecord>> {
    formats::read_transactions(&read(path)?)
}

fn window(config: &Config, w: &Window) -> Result<AnalysisWindow> {
    let city = match &w.city {
        Some(c) => c.parse().map_err(|e| Error::Config(format!("{e}")))?,
        None => config.analysis_city()?,
    };
    let (start, end) = config.analysis_range()?;
    Ok(AnalysisWindow::on_grid(
        city,
        w.start.unwrap_or(start),
        w.end.unwrap_or(end),
        &config.grid()?,
    )?)
}

fn date_labels(dates: &[NaiveDate]) -> Vec<String> {
    dates.iter().map(NaiveDate::to_string).collect()
}

fn execute(cli: &Cli) -> Result<i32> {
    let config = load_config(cli)?;
    let noise_rng = || ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(config.noise_seed()));
    match &cli.command {
        Command::Generate { out, epi, merchants } => {
            let mut gen = config.generation_config()?;
            gen.seed = cli.seed.unwrap_or(gen.seed);
            gen.merchant_count = merchants.unwrap_or(gen.merchant_count);
            gen.validate()?;
            let epi = load_epi(&config, epi.as_deref())?;
            let rows = if config.generation.parallel {
                crate::generate_parallel(&gen, &epi)?
            } else {
                datagen::generate(&gen, &epi)?
            };
            write_with(out, |w| formats::write_transactions(w, &rows))?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Privatize { txns, out } => {
            let gen = config.generation_config()?;
            let rows = load_txns(txns)?;
            let mut ledger = BudgetLedger::new(gen.baseline_privacy.epsilon)?;
            ledger.charge("baseline template", gen.baseline_privacy.epsilon)?;
            let scales = BaselineScales::from_profiles(&gen.categories, gen.baseline_privacy)?;
            let noisy = datagen::privatize_baseline(&rows, &scales, &mut noise_rng())?;
            write_with(out, |w| formats::write_transactions(w, &noisy))?;
            write_audit(out, &ledger, None)?;
        }
        Command::Hotspot { txns, out, window: w, svg } => {
            let rows = load_txns(txns)?;
            let win = window(&config, w)?;
            let mut ledger = BudgetLedger::new(config.budget()?)?;
            let map = analytics::hotspot(&rows, &win, &config.privacy_params()?, &mut ledger, &mut noise_rng())?;
            write_with(out, |w| formats::write_hotspot(w, &map))?;
            write_audit(out, &ledger, Some(&map.metadata))?;
            if let Some(path) = svg {
                let items: Vec<(String, f64)> = map.counts.iter().map(|(k, v)| (k.clone(), *v as f64)).collect();
                write_text(path, &svg::tile_map(&format!("Hotspots {}", map.city), &items))?;
            }
        }
        Command::Mobility {
            txns,
            out,
            window: w,
            super_category,
            per_postal,
            reference,
            region,
            svg,
        } => {
            let rows = load_txns(txns)?;
            let win = window(&config, w)?;
            let sc = match super_category {
                Some(s) => s.parse()?,
                None => config.super_category()?,
            };
            let mut options = config.mobility_options();
            options.per_postal |= per_postal.is_some();
            let mut ledger = BudgetLedger::new(config.budget()?)?;
            let series = analytics::mobility(
                &rows,
                &win,
                sc,
                &config.super_category_map()?,
                &config.privacy_params()?,
                options,
                &mut ledger,
                &mut noise_rng(),
            )?;
            write_with(out, |w| formats::write_mobility(w, &series))?;
            if let Some(path) = per_postal {
                write_with(path, |w| formats::write_per_postal(w, &series))?;
            }
            write_audit(out, &ledger, Some(&series.metadata))?;
            let reference = reference
                .clone()
                .or_else(|| config.analysis.mobility_reference.as_deref().map(|p| config.resolve_path(p)));
            if let Some(path) = reference {
                let region = region
                    .clone()
                    .or_else(|| config.analysis.mobility_region.clone())
                    .unwrap_or_else(|| series.city.name().to_string());
                let all = ingest::parse_mobility_csv(
                    &read(&path)?,
                    &region,
                    &config.analysis.mobility_columns,
                    config.grid()?,
                )?;
                let reference = all.iter().find(|s| s.category == sc.name()).ok_or_else(|| {
                    Error::Config(format!("{} has no {} column for {region}", path.display(), sc.name()))
                })?;
                let cmp = validation::compare_mobility(&series, reference)?;
                println!("pearson {} over {} weeks", cmp.correlation, cmp.overlap);
            }
            if let Some(path) = svg {
                let text = svg::line_chart(
                    &format!("{} {} % change", series.city, sc.name()),
                    &date_labels(&series.week_end_dates),
                    &[("private".into(), series.pct_change_from_baseline.clone())],
                );
                write_text(path, &text)?;
            }
        }
        Command::Adherence { txns, out, window: w, svg } => {
            let rows = load_txns(txns)?;
            let win = window(&config, w)?;
            let mut ledger = BudgetLedger::new(config.budget()?)?;
            let series =
                analytics::adherence(&rows, &win, &config.privacy_params()?, &mut ledger, &mut noise_rng())?;
            write_with(out, |w| formats::write_adherence(w, &series))?;
            write_audit(out, &ledger, Some(&series.metadata))?;
            if let Some(path) = svg {
                let as_opt = |v: &[u64]| v.iter().map(|x| Some(*x as f64)).collect();
                let text = svg::line_chart(
                    &format!("{} essential vs luxury", series.city),
                    &date_labels(&series.week_end_dates),
                    &[
                        ("essential".into(), as_opt(&series.essential)),
                        ("luxury".into(), as_opt(&series.luxury)),
                    ],
                );
                write_text(path, &text)?;
            }
        }
        Command::ContactMatrix {
            txns,
            out,
            d,
            counts_out,
            svg,
        } => {
            let rows = load_txns(txns)?;
            let d = match d {
                Some(p) => ConsumptionDistribution::new(formats::read_matrix(&read(p)?)?)?,
                None => ConsumptionDistribution::uniform(config.ages(), Category::ALL.len()),
            };
            let cities = config.contact_cities()?;
            let averaging = config.averaging(&cities)?;
            let mut ledger = BudgetLedger::new(config.budget()?)?;
            let est = contact::estimate(
                &rows,
                &d,
                &config.mixing()?,
                &cities,
                &averaging,
                &config.privacy_params()?,
                &mut ledger,
                &mut noise_rng(),
            )?;
            write_with(out, |w| formats::write_matrix(w, &est.matrix))?;
            if let Some(path) = counts_out {
                let counts = contact::Matrix::from_rows(&est.category_counts)?;
                write_with(path, |w| formats::write_matrix(w, &counts))?;
            }
            write_audit(out, &ledger, Some(&est.metadata))?;
            if let Some(path) = svg {
                let labels = age_labels(est.matrix.rows());
                write_text(path, &svg::heatmap("Contact matrix", &labels, &labels, &est.matrix.to_rows()))?;
            }
        }
        Command::TrainD {
            counts,
            target,
            init,
            out,
            log,
        } => {
            let counts = formats::read_rows(&read(counts)?)?;
            let target = formats::read_matrix(&read(target)?)?;
            let init = match init {
                Some(p) => Some(ConsumptionDistribution::new(formats::read_matrix(&read(p)?)?)?),
                None => None,
            };
            let cities = config.contact_cities()?;
            let averaging = if counts.len() == cities.len() {
                config.averaging(&cities)?
            } else {
                contact::NationalAveraging::Unweighted
            };
            let mut hyper = config.training();
            hyper.seed = cli.seed.unwrap_or(hyper.seed);
            let outcome = contact::train_d(&counts, &target, init.as_ref(), &config.mixing()?, &averaging, &hyper)?;
            write_with(out, |w| formats::write_matrix(w, outcome.d.matrix()))?;
            if let Some(path) = log {
                write_with(path, |w| formats::write_training_log(w, &outcome.log))?;
            }
            println!("loss {} after {} iterations", outcome.loss, outcome.iterations);
        }
        Command::Rt {
            incidence,
            out,
            window,
            svg,
        } => {
            let (dates, counts) = formats::read_series(&read(incidence)?)?;
            let s = config.rt()?;
            let si = rt::discretize_serial_interval(s.si_mean, s.si_sd, s.si_max, s.unit)?;
            let est = rt::estimate_rt(&counts, &si, window.unwrap_or(s.window), s.prior)?;
            write_with(out, |w| formats::write_rt(w, &dates, &est))?;
            if let Some(path) = svg {
                let some = |v: &[f64]| v.iter().map(|x| Some(*x)).collect();
                let text = svg::line_chart(
                    "R_t posterior",
                    &date_labels(&dates),
                    &[
                        ("mean".into(), some(&est.mean)),
                        ("lower".into(), some(&est.lower)),
                        ("upper".into(), some(&est.upper)),
                    ],
                );
                write_text(path, &text)?;
            }
        }
        Command::FitCovariates {
            incidence,
            covariates,
            out,
        } => {
            let (dates, counts) = formats::read_series(&read(incidence)?)?;
            let s = config.rt()?;
            let si = rt::discretize_serial_interval(s.si_mean, s.si_sd, s.si_max, s.unit)?;
            let lambda = rt::infectiousness(&counts, &si);
            let mut covs = Vec::new();
            for (label, path) in covariates {
                let (cov_dates, values) = formats::read_series(&read(path)?)?;
                if cov_dates != dates {
                    return Err(Error::Config(format!(
                        "covariate {label}: dates do not match the incidence series"
                    )));
                }
                covs.push(Covariate::new(label.clone(), values));
            }
            let fit = rt::fit_covariates(&counts, &lambda, &covs)?;
            write_with(out, |w| formats::write_fit(w, &fit))?;
            println!(
                "log-likelihood {} after {} iterations",
                fit.log_likelihood, fit.iterations
            );
        }
        Command::Ccf {
            txns,
            epi,
            out,
            max_lag,
        } => {
            let rows = load_txns(txns)?;
            let epi = load_epi(&config, epi.as_deref())?;
            let lag = max_lag.unwrap_or(config.validation()?.max_lag);
            let table = validation::ccf_table(&rows, &epi, lag);
            write_with(out, |w| formats::write_ccf(w, &table))?;
        }
        Command::Validate { txns, epi, report } => {
            let rows = load_txns(txns)?;
            let epi = load_epi(&config, epi.as_deref())?;
            let result = validation::validate_dataset(&rows, &epi, &config.validation()?);
            let report_path = report.clone().unwrap_or_else(|| txns.with_extension("report.csv"));
            write_with(&report_path, |w| formats::write_report(w, &result))?;
            print!("{}", formats::report_text(&result));
            if !result.passed() {
                eprintln!(
                    "validation failed ({} checks); report at {}",
                    result.failures().count(),
                    report_path.display()
                );
                return Ok(EXIT_VALIDATION);
            }
        }
    }
    Ok(EXIT_OK)
}

fn age_labels(n: usize) -> Vec<String> {
    if n == AGE_GROUP_LABELS.len() {
        AGE_GROUP_LABELS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..n).map(|i| format!("age {i}")).collect()
    }
}
