//! Differential-privacy primitives: noise calibration, the Gaussian
//! mechanism and a sequential-composition budget ledger.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math;
use crate::{Error, Result};

/// Sensitivity of a single merchant in a single time step.
pub const DEFAULT_SENSITIVITY: f64 = 3.0;
/// Default delta for the analytic Gaussian calibration.
pub const DEFAULT_DELTA: f64 = 1e-5;
/// Default per-merchant weekly contribution bound used for clipping.
pub const DEFAULT_UPPER_BOUND: f64 = 250.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// `scale = sensitivity * T * U / epsilon`.
    #[default]
    Linear,
    /// `scale = sensitivity * T * U * sqrt(2 ln(1.25 / delta)) / epsilon`.
    AnalyticGaussian,
}

impl NoiseMode {
    pub fn name(self) -> &'static str {
        match self {
            NoiseMode::Linear => "linear",
            NoiseMode::AnalyticGaussian => "analytic-gaussian",
        }
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(NoiseMode::Linear),
            "analytic-gaussian" | "analytic_gaussian" | "analytic" => Ok(NoiseMode::AnalyticGaussian),
            other => Err(Error::param("mode", format!("unknown noise mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    /// Only read in [`NoiseMode::AnalyticGaussian`].
    pub delta: f64,
    pub sensitivity: f64,
    pub time_steps: u32,
    pub upper_bound: f64,
    pub mode: NoiseMode,
}

impl Default for PrivacyParams {
    fn default() -> Self {
        PrivacyParams {
            epsilon: 1.0,
            delta: DEFAULT_DELTA,
            sensitivity: DEFAULT_SENSITIVITY,
            time_steps: 1,
            upper_bound: DEFAULT_UPPER_BOUND,
            mode: NoiseMode::Linear,
        }
    }
}

impl PrivacyParams {
    pub fn with_epsilon(self, epsilon: f64) -> Self {
        PrivacyParams { epsilon, ..self }
    }

    pub fn with_time_steps(self, time_steps: u32) -> Self {
        PrivacyParams { time_steps, ..self }
    }

    /// Noise standard deviation for a release under these parameters.
    pub fn noise_scale(&self) -> Result<f64> {
        let linear = linear_scale(self.sensitivity, self.time_steps as f64, self.upper_bound, self.epsilon)?;
        match self.mode {
            NoiseMode::Linear => Ok(linear),
            NoiseMode::AnalyticGaussian => {
                let total_sensitivity = self.sensitivity * self.time_steps as f64 * self.upper_bound;
                analytic_gaussian_scale(total_sensitivity, self.epsilon, self.delta)
            }
        }
    }
}

fn require_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be > 0, got {v}")))
    }
}

/// Noise scale `(sensitivity * time_steps * upper_bound) / epsilon`.
pub fn linear_scale(sensitivity: f64, time_steps: f64, upper_bound: f64, epsilon: f64) -> Result<f64> {
    require_positive("sensitivity", sensitivity)?;
    require_positive("time_steps", time_steps)?;
    require_positive("upper_bound", upper_bound)?;
    require_positive("epsilon", epsilon)?;
    Ok(sensitivity * time_steps * upper_bound / epsilon)
}

/// Classic Gaussian-mechanism calibration `sensitivity * sqrt(2 ln(1.25/delta)) / epsilon`.
pub fn analytic_gaussian_scale(sensitivity: f64, epsilon: f64, delta: f64) -> Result<f64> {
    require_positive("sensitivity", sensitivity)?;
    require_positive("epsilon", epsilon)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(sensitivity * math::sqrt(2.0 * math::ln(1.25 / delta)) / epsilon)
}

/// Adds one `Normal(0, scale^2)` draw to `value`.
pub fn add_gaussian_noise<R: Rng + ?Sized>(value: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale >= 0.0) || !scale.is_finite() {
        return Err(Error::param("scale", format!("must be finite and >= 0, got {scale}")));
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(value + scale * z)
}

/// Post-processing applied to every released count.
pub fn release_count(raw: f64) -> u64 {
    let r = math::round(raw);
    if r > 0.0 {
        r as u64
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Charge {
    pub label: String,
    pub epsilon: f64,
}

/// Append-only record of epsilon spent under sequential composition.
/// Single writer: callers serialize access.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    total_epsilon: f64,
    charges: Vec<Charge>,
    spent: f64,
}

impl BudgetLedger {
    pub fn new(total_epsilon: f64) -> Result<Self> {
        require_positive("total_epsilon", total_epsilon)?;
        Ok(BudgetLedger {
            total_epsilon,
            charges: Vec::new(),
            spent: 0.0,
        })
    }

    pub fn total(&self) -> f64 {
        self.total_epsilon
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn remaining(&self) -> f64 {
        self.total_epsilon - self.spent
    }

    pub fn charges(&self) -> &[Charge] {
        &self.charges
    }

    /// Appends a charge if it fits in the remaining budget.
    pub fn charge(&mut self, label: impl Into<String>, epsilon: f64) -> Result<()> {
        require_positive("epsilon", epsilon)?;
        let next = self.spent + epsilon;
        if next > self.total_epsilon || epsilon > self.remaining() {
            return Err(Error::BudgetExceeded {
                requested: epsilon,
                remaining: self.remaining(),
            });
        }
        self.charges.push(Charge {
            label: label.into(),
            epsilon,
        });
        self.spent = next;
        debug_assert!(self.spent <= self.total_epsilon);
        Ok(())
    }

    /// Appends all charges or none of them.
    pub fn charge_all<I, S>(&mut self, charges: I) -> Result<()>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let pending: Vec<(String, f64)> = charges.into_iter().map(|(l, e)| (l.into(), e)).collect();
        let mut trial = self.clone();
        for (label, eps) in &pending {
            if let Err(err) = trial.charge(label.clone(), *eps) {
                return Err(match err {
                    Error::BudgetExceeded { .. } => Error::BudgetExceeded {
                        requested: pending.iter().map(|(_, e)| e).sum(),
                        remaining: self.remaining(),
                    },
                    other => other,
                });
            }
        }
        *self = trial;
        Ok(())
    }

    /// `(label, epsilon, cumulative)` per charge, in order.
    pub fn audit_lines(&self) -> Vec<(&str, f64, f64)> {
        let mut cumulative = 0.0;
        self.charges
            .iter()
            .map(|c| {
                cumulative += c.epsilon;
                (c.label.as_str(), c.epsilon, cumulative)
            })
            .collect()
    }
}

/// Splits `total` evenly into `steps` per-step charges.
pub fn per_step_epsilon(total: f64, steps: u32) -> Result<f64> {
    require_positive("epsilon", total)?;
    if steps == 0 {
        return Err(Error::param("time_steps", "must be >= 1"));
    }
    let mut x = total / steps as f64;
    // Rounding in `total / steps` can make the running sum of `steps`
    // charges exceed `total` by an ulp, which the ledger would refuse.
    while (0..steps).fold(0.0, |acc, _| acc + x) > total {
        x = f64::from_bits(x.to_bits() - 1);
    }
    Ok(x)
}

/// Privacy metadata attached to every release.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReleaseMetadata {
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub scale: f64,
    pub mode: NoiseMode,
    pub time_steps: u32,
    pub upper_bound: f64,
}

impl ReleaseMetadata {
    pub fn from_params(params: &PrivacyParams, scale: f64) -> Self {
        ReleaseMetadata {
            epsilon: params.epsilon,
            delta: (params.mode == NoiseMode::AnalyticGaussian).then_some(params.delta),
            scale,
            mode: params.mode,
            time_steps: params.time_steps,
            upper_bound: params.upper_bound,
        }
    }
}
