//! Renewal-equation estimation of the effective reproduction number.
//!
//! Incidence follows `I_t ~ Poisson(R_t * Lambda_t)` with total
//! infectiousness `Lambda_t = sum_s w_s I_{t-s}`. Under a trailing window of
//! `tau` steps with constant `R`, a Gamma(a0, b0) prior is conjugate and the
//! posterior is Gamma(a0 + sum I, b0 + sum Lambda). Covariates enter through
//! a log-linear Poisson regression `R_t = exp(beta . x_t)` fitted by damped
//! Newton iterations.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::math;
use crate::special::{gamma_cdf, gamma_quantile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeUnit {
    #[default]
    Day,
    Week,
}

/// Discretized generation-interval weights `w_1..w_S` (no mass at lag 0).
#[derive(Debug, Clone, PartialEq)]
pub struct SerialInterval {
    weights: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub unit: TimeUnit,
}

impl SerialInterval {
    /// Weights given directly; they are renormalized to sum to one.
    pub fn from_weights(weights: Vec<f64>, unit: TimeUnit) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("serial interval", "needs at least one weight"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::param("serial interval", "weights must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::param("serial interval", "weights sum to zero"));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mean = weights.iter().enumerate().map(|(i, w)| (i + 1) as f64 * w).sum::<f64>();
        let var = weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let dev = (i + 1) as f64 - mean;
                dev * dev * w
            })
            .sum::<f64>();
        Ok(SerialInterval {
            weights,
            mean,
            sd: math::sqrt(var),
            unit,
        })
    }

    /// `w_s` for lags `1..=S` (index 0 holds lag 1).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_lag(&self) -> usize {
        self.weights.len()
    }
}

/// Gamma(mean, sd) mass over unit bins centred on lags `1..=max_len`, with the
/// mass below 0.5 folded into lag 1, renormalized to sum to one.
pub fn discretize_serial_interval(mean: f64, sd: f64, max_len: usize, unit: TimeUnit) -> Result<SerialInterval> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::param("mean", "must be > 0"));
    }
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::param("sd", "must be > 0"));
    }
    if max_len == 0 {
        return Err(Error::param("max_len", "must be >= 1"));
    }
    let shape = (mean / sd) * (mean / sd);
    let rate = mean / (sd * sd);
    let cdf = |x: f64| gamma_cdf(shape, rate, x);
    let mut weights = Vec::with_capacity(max_len);
    let mut prev = 0.0;
    for s in 1..=max_len {
        let upper = cdf(s as f64 + 0.5);
        weights.push((upper - prev).max(0.0));
        prev = upper;
    }
    let mut si = SerialInterval::from_weights(weights, unit)?;
    si.mean = mean;
    si.sd = sd;
    Ok(si)
}

/// `Lambda_t = sum_{s=1..S} w_s I_{t-s}`, zero-padded before the series start.
pub fn infectiousness(incidence: &[f64], si: &SerialInterval) -> Vec<f64> {
    let w = si.weights();
    (0..incidence.len())
        .map(|t| {
            w.iter()
                .enumerate()
                .take_while(|(i, _)| *i < t)
                .map(|(i, ws)| ws * incidence[t - i - 1])
                .sum()
        })
        .collect()
}

/// Dated incidence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceSeries {
    pub dates: Vec<NaiveDate>,
    pub counts: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for RtPrior {
    fn default() -> Self {
        RtPrior { shape: 1.0, rate: 0.2 }
    }
}

/// Per-step posterior summaries, aligned with the incidence input.
#[derive(Debug, Clone, PartialEq)]
pub struct RtEstimate {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// True where the window held no infectiousness and only the prior is reported.
    pub prior_only: Vec<bool>,
    pub window: usize,
    pub prior: RtPrior,
}

impl RtEstimate {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Conjugate Gamma posterior of `R` over the trailing `window` steps ending
/// at each step; 95% intervals from the 2.5% and 97.5% gamma quantiles.
pub fn estimate_rt(incidence: &[f64], si: &SerialInterval, window: usize, prior: RtPrior) -> Result<RtEstimate> {
    if window == 0 {
        return Err(Error::param("window", "must be >= 1"));
    }
    if !(prior.shape > 0.0 && prior.rate > 0.0) {
        return Err(Error::param("prior", "shape and rate must be > 0"));
    }
    if incidence.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::param("incidence", "counts must be finite and >= 0"));
    }
    let lambda = infectiousness(incidence, si);
    let n = incidence.len();
    let mut out = RtEstimate {
        mean: Vec::with_capacity(n),
        lower: Vec::with_capacity(n),
        upper: Vec::with_capacity(n),
        prior_only: Vec::with_capacity(n),
        window,
        prior,
    };
    for t in 0..n {
        let from = (t + 1).saturating_sub(window);
        let sum_lambda: f64 = lambda[from..=t].iter().sum();
        let (shape, rate, prior_only) = if sum_lambda > 0.0 {
            let sum_i: f64 = incidence[from..=t].iter().sum();
            (prior.shape + sum_i, prior.rate + sum_lambda, false)
        } else {
            (prior.shape, prior.rate, true)
        };
        out.mean.push(shape / rate);
        out.lower.push(gamma_quantile(shape, rate, 0.025)?);
        out.upper.push(gamma_quantile(shape, rate, 0.975)?);
        out.prior_only.push(prior_only);
    }
    Ok(out)
}

/// Draws `I_t ~ Poisson(R_t * Lambda_t)` after copying `initial` into the
/// first steps. The output has the length of `rt_path`.
pub fn simulate_incidence(rt_path: &[f64], si: &SerialInterval, initial: &[f64], seed: u64) -> Result<Vec<f64>> {
    if rt_path.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        return Err(Error::param("rt_path", "values must be finite and >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = si.weights();
    let mut incidence: Vec<f64> = Vec::with_capacity(rt_path.len());
    for (t, &r) in rt_path.iter().enumerate() {
        if let Some(&seeded) = initial.get(t) {
            incidence.push(seeded);
            continue;
        }
        let lambda: f64 = w
            .iter()
            .enumerate()
            .take_while(|(i, _)| *i < t)
            .map(|(i, ws)| ws * incidence[t - i - 1])
            .sum();
        let rate = r * lambda;
        let draw = if rate > 0.0 {
            Poisson::new(rate)
                .map_err(|e| Error::param("poisson rate", format!("{rate}: {e}")))?
                .sample(&mut rng)
        } else {
            0.0
        };
        incidence.push(draw);
    }
    Ok(incidence)
}

/// `mean + amplitude * sin(2 pi t / period)` plus Gaussian jitter, floored at `floor`.
pub fn sinusoidal_rt(len: usize, mean: f64, amplitude: f64, period: f64, noise_sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let r = mean + amplitude * libm::sin(2.0 * PI * t as f64 / period) + noise_sd * z;
            r.max(0.05)
        })
        .collect()
}

/// A named per-step covariate series.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariate {
    pub label: String,
    pub values: Vec<f64>,
}

impl Covariate {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        Covariate {
            label: label.into(),
            values,
        }
    }
}

pub const NEWTON_GRADIENT_TOLERANCE: f64 = 1e-8;
pub const NEWTON_MAX_ITERATIONS: usize = 100;

/// Poisson log-likelihood of the renewal model with `R_t = exp(beta . x_t)`,
/// over the steps with positive infectiousness. Covariate columns are
/// already standardized; column 0 is the intercept.
#[derive(Debug, Clone)]
pub struct PoissonRenewalModel {
    incidence: Vec<f64>,
    log_lambda: Vec<f64>,
    lambda: Vec<f64>,
    design: Vec<Vec<f64>>,
}

impl PoissonRenewalModel {
    pub fn parameters(&self) -> usize {
        self.design.first().map_or(0, Vec::len)
    }

    pub fn observations(&self) -> usize {
        self.incidence.len()
    }

    fn linear(&self, beta: &[f64], t: usize) -> f64 {
        self.design[t].iter().zip(beta).map(|(x, b)| x * b).sum()
    }

    /// `sum_t [I_t ln(R_t Lambda_t) - R_t Lambda_t]`.
    pub fn log_likelihood(&self, beta: &[f64]) -> f64 {
        (0..self.observations())
            .map(|t| {
                let eta = self.linear(beta, t);
                let log_mu = eta + self.log_lambda[t];
                let i = self.incidence[t];
                let first = if i > 0.0 { i * log_mu } else { 0.0 };
                first - math::exp(log_mu)
            })
            .sum()
    }

    /// Analytic gradient `sum_t (I_t - mu_t) x_t`.
    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let p = self.parameters();
        let mut g = vec![0.0; p];
        for t in 0..self.observations() {
            let mu = math::exp(self.linear(beta, t)) * self.lambda[t];
            let resid = self.incidence[t] - mu;
            for (gj, xj) in g.iter_mut().zip(&self.design[t]) {
                *gj += resid * xj;
            }
        }
        g
    }

    /// Negative Hessian `sum_t mu_t x_t x_t^T`.
    fn information(&self, beta: &[f64]) -> Vec<Vec<f64>> {
        let p = self.parameters();
        let mut h = vec![vec![0.0; p]; p];
        for t in 0..self.observations() {
            let mu = math::exp(self.linear(beta, t)) * self.lambda[t];
            let x = &self.design[t];
            for i in 0..p {
                for j in 0..p {
                    h[i][j] += mu * x[i] * x[j];
                }
            }
        }
        h
    }

    /// Scale of the gradient's terms, used to detect machine-precision stalls.
    fn gradient_scale(&self, beta: &[f64]) -> f64 {
        (0..self.observations())
            .map(|t| {
                let mu = math::exp(self.linear(beta, t)) * self.lambda[t];
                (self.incidence[t] + mu) * self.design[t].iter().map(|x| x.abs()).fold(0.0, f64::max)
            })
            .sum()
    }

    /// Central finite difference of the log-likelihood along coordinate `j`.
    /// Each term's difference is formed in closed form before summation so
    /// large constant parts of the likelihood cancel exactly.
    pub fn numeric_partial(&self, beta: &[f64], j: usize, h: f64) -> f64 {
        let mut diff = 0.0;
        for t in 0..self.observations() {
            let x = self.design[t][j];
            let mu = math::exp(self.linear(beta, t)) * self.lambda[t];
            // l(b + h e_j) - l(b - h e_j) for this term.
            diff += self.incidence[t] * 2.0 * h * x - 2.0 * mu * math::sinh(h * x);
        }
        diff / (2.0 * h)
    }

    pub fn numeric_gradient(&self, beta: &[f64], h: f64) -> Vec<f64> {
        (0..self.parameters()).map(|j| self.numeric_partial(beta, j, h)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateFit {
    /// `"intercept"` followed by the covariate labels.
    pub labels: Vec<String>,
    /// Coefficients on the standardized covariates, intercept first.
    pub beta: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// `(mean, sd)` used to standardize each covariate.
    pub standardization: Vec<(f64, f64)>,
    /// `exp(beta . x_t)` at every step of the input.
    pub rt_path: Vec<f64>,
    /// Steps with positive infectiousness that entered the likelihood.
    pub usable: Vec<bool>,
}

fn norm(v: &[f64]) -> f64 {
    math::sqrt(v.iter().map(|x| x * x).sum())
}

/// Solves `a x = b` for symmetric positive definite `a` (Cholesky).
fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            s -= l[i][..j].iter().zip(&l[j][..j]).map(|(x, y)| x * y).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = math::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    Some(x)
}

/// Model, per-covariate `(mean, sd)` used for standardization, and the
/// usable-step mask.
pub type RenewalParts = (PoissonRenewalModel, Vec<(f64, f64)>, Vec<bool>);

/// Builds the likelihood over steps with `Lambda_t > 0`, standardizing
/// every covariate on those steps.
pub fn renewal_model(
    incidence: &[f64],
    lambda: &[f64],
    covariates: &[Covariate],
) -> Result<RenewalParts> {
    if incidence.len() != lambda.len() {
        return Err(Error::Dimension {
            context: "infectiousness",
            expected: incidence.len(),
            found: lambda.len(),
        });
    }
    for c in covariates {
        if c.values.len() != incidence.len() {
            return Err(Error::Dimension {
                context: "covariate length",
                expected: incidence.len(),
                found: c.values.len(),
            });
        }
        if c.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("covariate", format!("`{}` has non-finite values", c.label)));
        }
    }
    let usable: Vec<bool> = lambda.iter().map(|&l| l > 0.0 && l.is_finite()).collect();
    let rows: Vec<usize> = (0..incidence.len()).filter(|&t| usable[t]).collect();
    if rows.len() < covariates.len() + 1 {
        return Err(Error::Degenerate(format!(
            "{} usable steps for {} parameters",
            rows.len(),
            covariates.len() + 1
        )));
    }
    let mut standardization = Vec::with_capacity(covariates.len());
    for c in covariates {
        let vals: Vec<f64> = rows.iter().map(|&t| c.values[t]).collect();
        let mean = crate::stats::mean(&vals);
        let sd = crate::stats::std_dev(&vals);
        if !(sd > 0.0) {
            return Err(Error::param(
                "covariate",
                format!("`{}` has zero variance over the usable steps", c.label),
            ));
        }
        standardization.push((mean, sd));
    }
    let design = rows
        .iter()
        .map(|&t| {
            let mut x = Vec::with_capacity(covariates.len() + 1);
            x.push(1.0);
            for (c, (m, s)) in covariates.iter().zip(&standardization) {
                x.push((c.values[t] - m) / s);
            }
            x
        })
        .collect();
    let model = PoissonRenewalModel {
        incidence: rows.iter().map(|&t| incidence[t]).collect(),
        log_lambda: rows.iter().map(|&t| math::ln(lambda[t])).collect(),
        lambda: rows.iter().map(|&t| lambda[t]).collect(),
        design,
    };
    Ok((model, standardization, usable))
}

/// Maximum-likelihood fit of `R_t = exp(beta . x_t)` with an intercept plus
/// the standardized `covariates`.
///
/// Damped Newton iterations stop once the gradient norm drops below
/// [`NEWTON_GRADIENT_TOLERANCE`], or when no step can improve the likelihood
/// and the gradient is at the rounding floor of its own terms. Otherwise
/// [`Error::NonConvergence`] carries the last iterate after
/// [`NEWTON_MAX_ITERATIONS`].
pub fn fit_covariates(incidence: &[f64], lambda: &[f64], covariates: &[Covariate]) -> Result<CovariateFit> {
    let (model, standardization, usable) = renewal_model(incidence, lambda, covariates)?;
    let total_i: f64 = model.incidence.iter().sum();
    let total_l: f64 = model.lambda.iter().sum();
    if !(total_i > 0.0) {
        return Err(Error::Degenerate("no incidence on usable steps".into()));
    }
    let p = model.parameters();
    let mut beta = vec![0.0; p];
    beta[0] = math::ln(total_i / total_l);
    let mut ll = model.log_likelihood(&beta);
    let mut iterations = 0;
    let mut g = model.gradient(&beta);
    let converged = loop {
        let gn = norm(&g);
        if gn < NEWTON_GRADIENT_TOLERANCE {
            break true;
        }
        if iterations >= NEWTON_MAX_ITERATIONS {
            break false;
        }
        iterations += 1;
        let info = model.information(&beta);
        let Some(delta) = solve_spd(&info, &g) else {
            return Err(Error::Degenerate("singular information matrix".into()));
        };
        // The likelihood is concave, so a step that has not passed the
        // maximum along `delta` (non-negative slope at the trial point) is an
        // ascent step. The slope is a sum of residuals and stays accurate
        // when likelihood differences drown in rounding.
        let mut t = 1.0;
        let mut improved = None;
        for _ in 0..60 {
            let trial: Vec<f64> = beta.iter().zip(&delta).map(|(b, d)| b + t * d).collect();
            let trial_ll = model.log_likelihood(&trial);
            if trial_ll.is_finite() {
                let slope: f64 = model.gradient(&trial).iter().zip(&delta).map(|(g, d)| g * d).sum();
                if slope >= 0.0 || trial_ll > ll {
                    improved = Some((trial, trial_ll));
                    break;
                }
            }
            t /= 2.0;
        }
        match improved {
            Some((next, next_ll)) => {
                let moved = next != beta;
                beta = next;
                ll = next_ll;
                g = model.gradient(&beta);
                if !moved && norm(&g) <= 1e-12 * model.gradient_scale(&beta) {
                    break true;
                }
            }
            None => break norm(&g) <= 1e-12 * model.gradient_scale(&beta),
        }
    };
    let gradient_norm = norm(&g);
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            gradient_norm,
            beta,
        });
    }
    let mut labels = vec![String::from("intercept")];
    labels.extend(covariates.iter().map(|c| c.label.clone()));
    let rt_path = (0..incidence.len())
        .map(|t| {
            let mut eta = beta[0];
            for (j, (c, (m, s))) in covariates.iter().zip(&standardization).enumerate() {
                eta += beta[j + 1] * (c.values[t] - m) / s;
            }
            math::exp(eta)
        })
        .collect();
    Ok(CovariateFit {
        labels,
        beta,
        log_likelihood: ll,
        iterations,
        gradient_norm,
        standardization,
        rt_path,
        usable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discretized_weights_are_a_distribution() {
        for &(m, s, n) in &[(6.5, 4.0, 30usize), (1.2, 0.5, 5), (3.0, 3.0, 1), (14.0, 2.0, 40)] {
            let si = discretize_serial_interval(m, s, n, TimeUnit::Day).unwrap();
            assert_eq!(si.max_lag(), n);
            assert!((si.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(si.weights().iter().all(|w| *w >= 0.0));
        }
        assert!(discretize_serial_interval(0.0, 1.0, 5, TimeUnit::Day).is_err());
        assert!(discretize_serial_interval(1.0, -1.0, 5, TimeUnit::Day).is_err());
        assert!(discretize_serial_interval(1.0, 1.0, 0, TimeUnit::Week).is_err());
    }

    #[test]
    fn infectiousness_examples() {
        let shift = SerialInterval::from_weights(vec![1.0], TimeUnit::Day).unwrap();
        assert_eq!(infectiousness(&[10.0, 0.0, 0.0], &shift), vec![0.0, 10.0, 0.0]);
        assert_eq!(infectiousness(&[0.0; 4], &shift), vec![0.0; 4]);
        let half = SerialInterval::from_weights(vec![0.5, 0.5], TimeUnit::Day).unwrap();
        assert_eq!(infectiousness(&[4.0, 2.0, 0.0, 0.0], &half), vec![0.0, 2.0, 3.0, 1.0]);
    }

    #[test]
    fn prior_only_windows() {
        let si = SerialInterval::from_weights(vec![1.0], TimeUnit::Day).unwrap();
        let est = estimate_rt(&[0.0; 5], &si, 2, RtPrior::default()).unwrap();
        assert!(est.prior_only.iter().all(|p| *p));
        assert!(est.mean.iter().all(|m| *m == 5.0));
        for t in 0..est.len() {
            assert!(est.lower[t] <= est.mean[t] && est.mean[t] <= est.upper[t]);
        }
        assert!(estimate_rt(&[1.0], &si, 0, RtPrior::default()).is_err());
    }

    #[test]
    fn zero_reproduction_extinguishes() {
        let si = discretize_serial_interval(6.5, 4.0, 30, TimeUnit::Day).unwrap();
        let mut r = vec![0.0; 50];
        r[0] = 1.0;
        let inc = simulate_incidence(&r, &si, &[100.0], 3).unwrap();
        assert_eq!(inc[0], 100.0);
        assert!(inc[1..].iter().all(|v| *v == 0.0));
        let again = simulate_incidence(&r, &si, &[100.0], 3).unwrap();
        assert_eq!(inc, again);
    }

    #[test]
    fn spd_solver() {
        let a = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let x = solve_spd(&a, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-12);
        assert!(solve_spd(&[vec![0.0]], &[1.0]).is_none());
    }

    #[test]
    fn zero_variance_covariate_is_named() {
        let inc = vec![10.0; 20];
        let lam = vec![10.0; 20];
        let err = fit_covariates(&inc, &lam, &[Covariate::new("flat", vec![2.0; 20])]).unwrap_err();
        match err {
            Error::InvalidParameter { reason, .. } => assert!(reason.contains("flat")),
            other => panic!("{other:?}"),
        }
    }
}
