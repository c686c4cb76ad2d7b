//! Age-structured contact matrices from category transaction volumes.
//!
//! City volumes per category `c` are mapped to age-group volumes
//! `n = D c` through a column-stochastic consumption matrix `D`, turned into
//! contacts by proportionate mixing `n_i n_j / sum(n)`, averaged over
//! cities, symmetrized with a mixing-factor vector and normalized to sum 1.
//! [`train_d`] fits `D` to a reference matrix by projected gradient descent.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytics::category_volumes;
use crate::category::Category;
use crate::dp::{self, BudgetLedger, PrivacyParams, ReleaseMetadata};
use crate::geo::City;
use crate::record::TransactionRecord;
use crate::{Error, Result};

/// Default age bands: 0-17, 18-30, 31-45, 46-64, 65+.
pub const DEFAULT_AGE_GROUPS: usize = 5;
pub const AGE_GROUP_LABELS: [&str; DEFAULT_AGE_GROUPS] = ["0-17", "18-30", "31-45", "46-64", "65+"];

const COLUMN_SUM_TOLERANCE: f64 = 1e-9;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::Degenerate("matrix has no entries".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Dimension {
                    context: "matrix row",
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Squared Frobenius distance.
    pub fn frobenius_sq_distance(&self, other: &Matrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension {
                context: "frobenius distance",
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
            });
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b) * (a - b)).sum())
    }
}

/// Age-group by category consumption shares; every column sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumptionDistribution {
    matrix: Matrix,
}

impl ConsumptionDistribution {
    pub fn new(matrix: Matrix) -> Result<Self> {
        for k in 0..matrix.cols() {
            let mut sum = 0.0;
            for a in 0..matrix.rows() {
                let v = matrix.get(a, k);
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::param("D", format!("entry ({a}, {k}) = {v} is not a finite share >= 0")));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > COLUMN_SUM_TOLERANCE {
                return Err(Error::param("D", format!("column {k} sums to {sum}, expected 1")));
            }
        }
        Ok(ConsumptionDistribution { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Every category split evenly across age groups.
    pub fn uniform(ages: usize, categories: usize) -> Self {
        let mut m = Matrix::zeros(ages, categories);
        for v in m.data.iter_mut() {
            *v = 1.0 / ages as f64;
        }
        ConsumptionDistribution { matrix: m }
    }

    /// Columns drawn uniformly at random and projected onto the simplex.
    pub fn random(ages: usize, categories: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(ages, categories);
        for k in 0..categories {
            let col: Vec<f64> = (0..ages).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = col.iter().sum();
            for (a, v) in col.into_iter().enumerate() {
                m.set(a, k, v / total);
            }
        }
        ConsumptionDistribution { matrix: m }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn ages(&self) -> usize {
        self.matrix.rows()
    }

    pub fn categories(&self) -> usize {
        self.matrix.cols()
    }
}

/// Positive age-dependent mixing factors.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingVector(Vec<f64>);

impl MixingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::param("mixing", format!("factor {i} = {v} must be > 0")));
        }
        Ok(MixingVector(values))
    }

    pub fn ones(len: usize) -> Self {
        MixingVector(vec![1.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Age-group volumes `n = D c`.
pub fn age_counts(d: &Matrix, c: &[f64]) -> Result<Vec<f64>> {
    if d.cols() != c.len() {
        return Err(Error::Dimension {
            context: "age_counts",
            expected: d.cols(),
            found: c.len(),
        });
    }
    if let Some(v) = c.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::param("category counts", format!("{v} is negative")));
    }
    Ok((0..d.rows())
        .map(|a| d.row(a).iter().zip(c).map(|(w, x)| w * x).sum())
        .collect())
}

/// Proportionate mixing `M[i][j] = n_i n_j / sum(n)`.
pub fn proportionate_mixing(n: &[f64]) -> Result<Matrix> {
    let total: f64 = n.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("age-group counts sum to zero".into()));
    }
    let a = n.len();
    let mut m = Matrix::zeros(a, a);
    for i in 0..a {
        for j in 0..a {
            m.set(i, j, n[i] * n[j] / total);
        }
    }
    Ok(m)
}

/// `(diag(m) M + (diag(m) M)^T) / 2`, exactly symmetric.
pub fn symmetrize(m_raw: &Matrix, mixing: &MixingVector) -> Result<Matrix> {
    let a = m_raw.rows();
    if m_raw.cols() != a || mixing.as_slice().len() != a {
        return Err(Error::Dimension {
            context: "symmetrize",
            expected: a,
            found: if m_raw.cols() != a { m_raw.cols() } else { mixing.as_slice().len() },
        });
    }
    let f = mixing.as_slice();
    let mut c = Matrix::zeros(a, a);
    for i in 0..a {
        for j in i..a {
            let v = (f[i] * m_raw.get(i, j) + f[j] * m_raw.get(j, i)) / 2.0;
            c.set(i, j, v);
            c.set(j, i, v);
        }
    }
    Ok(c)
}

/// How city matrices are combined into the national matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum NationalAveraging {
    #[default]
    Unweighted,
    /// Weights proportional to the given per-city populations.
    Weighted(Vec<f64>),
}

/// Deterministic pipeline from per-city category volumes to a normalized,
/// symmetric national contact matrix. Cities whose age volumes are all zero
/// contribute a zero matrix.
pub fn contact_from_counts(
    d: &Matrix,
    mixing: &MixingVector,
    city_counts: &[Vec<f64>],
    averaging: &NationalAveraging,
) -> Result<Matrix> {
    if city_counts.is_empty() {
        return Err(Error::Degenerate("no cities".into()));
    }
    let weights: Vec<f64> = match averaging {
        NationalAveraging::Unweighted => vec![1.0 / city_counts.len() as f64; city_counts.len()],
        NationalAveraging::Weighted(pop) => {
            if pop.len() != city_counts.len() {
                return Err(Error::Dimension {
                    context: "population weights",
                    expected: city_counts.len(),
                    found: pop.len(),
                });
            }
            let total: f64 = pop.iter().sum();
            if !(total > 0.0) || pop.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::param("population weights", "must be >= 0 with a positive sum"));
            }
            pop.iter().map(|p| p / total).collect()
        }
    };
    let a = d.rows();
    let mut national = Matrix::zeros(a, a);
    let mut any = false;
    for (counts, w) in city_counts.iter().zip(&weights) {
        let n = age_counts(d, counts)?;
        if !(n.iter().sum::<f64>() > 0.0) {
            continue;
        }
        any = true;
        let m = proportionate_mixing(&n)?;
        for (acc, v) in national.data.iter_mut().zip(&m.data) {
            *acc += w * v;
        }
    }
    if !any {
        return Err(Error::Degenerate("no transactions in any city".into()));
    }
    let mut c = symmetrize(&national, mixing)?;
    let total = c.sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("contact matrix sums to zero".into()));
    }
    for v in c.data.iter_mut() {
        *v /= total;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactEstimate {
    /// Normalized, symmetric national matrix.
    pub matrix: Matrix,
    pub cities: Vec<City>,
    /// Released (rounded, clamped) category volumes per city.
    pub category_counts: Vec<Vec<f64>>,
    pub metadata: ReleaseMetadata,
}

/// Releases noisy per-category volumes for each city, charging
/// `params.epsilon / cities.len()` per city. The noise scale uses the
/// number of distinct weeks in the table as the step count.
pub fn private_category_counts<R: Rng + ?Sized>(
    table: &[TransactionRecord],
    cities: &[City],
    params: &PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, ReleaseMetadata)> {
    if cities.is_empty() {
        return Err(Error::param("cities", "at least one city is required"));
    }
    let mut weeks: Vec<_> = table.iter().map(|r| r.date).collect();
    weeks.sort_unstable();
    weeks.dedup();
    let per_city = crate::dp::per_step_epsilon(params.epsilon, cities.len() as u32)?;
    let params = params.with_epsilon(per_city).with_time_steps(weeks.len().max(1) as u32);
    let scale = params.noise_scale()?;
    ledger.charge_all(cities.iter().map(|c| (format!("contact-matrix {c}"), per_city)))?;
    let mut out = Vec::with_capacity(cities.len());
    for &city in cities {
        let exact = category_volumes(table, city, params.upper_bound);
        let mut released = Vec::with_capacity(exact.len());
        for e in exact {
            released.push(dp::release_count(dp::add_gaussian_noise(e, scale, rng)?) as f64);
        }
        out.push(released);
    }
    Ok((out, ReleaseMetadata::from_params(&params, scale)))
}

/// National contact matrix estimated from the transaction table. `d` must
/// have one column per category in [`Category::ALL`] order.
#[allow(clippy::too_many_arguments)]
pub fn estimate<R: Rng + ?Sized>(
    table: &[TransactionRecord],
    d: &ConsumptionDistribution,
    mixing: &MixingVector,
    cities: &[City],
    averaging: &NationalAveraging,
    params: &PrivacyParams,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<ContactEstimate> {
    if d.categories() != Category::ALL.len() {
        return Err(Error::Dimension {
            context: "consumption distribution columns",
            expected: Category::ALL.len(),
            found: d.categories(),
        });
    }
    if mixing.as_slice().len() != d.ages() {
        return Err(Error::Dimension {
            context: "mixing vector",
            expected: d.ages(),
            found: mixing.as_slice().len(),
        });
    }
    let (counts, metadata) = private_category_counts(table, cities, params, ledger, rng)?;
    let matrix = contact_from_counts(d.matrix(), mixing, &counts, averaging)?;
    Ok(ContactEstimate {
        matrix,
        cities: cities.to_vec(),
        category_counts: counts,
        metadata,
    })
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn simplex_project(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumulative += uj;
        let t = (cumulative - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn project_columns(m: &mut Matrix) {
    for k in 0..m.cols() {
        let col: Vec<f64> = (0..m.rows()).map(|a| m.get(a, k)).collect();
        for (a, v) in simplex_project(&col).into_iter().enumerate() {
            m.set(a, k, v);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingHyperparams {
    /// Initial trial step of each backtracking line search.
    pub step_size: f64,
    /// Half-width of the central finite differences.
    pub fd_epsilon: f64,
    pub max_iterations: usize,
    /// Training stops once the loss is at or below this value.
    pub loss_tolerance: f64,
    /// Seed for [`ConsumptionDistribution::random`] when no init is given.
    pub seed: u64,
}

impl Default for TrainingHyperparams {
    fn default() -> Self {
        TrainingHyperparams {
            step_size: 64.0,
            fd_epsilon: 1e-6,
            max_iterations: 5000,
            loss_tolerance: 1e-12,
            seed: 7,
        }
    }
}

impl TrainingHyperparams {
    fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::param("step_size", "must be > 0"));
        }
        if !(self.fd_epsilon > 0.0 && self.fd_epsilon.is_finite()) {
            return Err(Error::param("fd_epsilon", "must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingStep {
    pub iteration: usize,
    pub loss: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub d: ConsumptionDistribution,
    pub loss: f64,
    pub iterations: usize,
    /// Iteration 0 is the initial loss; each further entry is an accepted step.
    pub log: Vec<TrainingStep>,
}

/// Training objective: squared Frobenius distance between the pipeline
/// output for `d` and the reference matrix.
#[derive(Debug, Clone)]
pub struct ContactLoss<'a> {
    pub mixing: &'a MixingVector,
    pub city_counts: &'a [Vec<f64>],
    pub averaging: &'a NationalAveraging,
    pub target: &'a Matrix,
}

impl ContactLoss<'_> {
    pub fn value(&self, d: &Matrix) -> Result<f64> {
        let c = contact_from_counts(d, self.mixing, self.city_counts, self.averaging)?;
        let loss = c.frobenius_sq_distance(self.target)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!("non-finite loss {loss}")));
        }
        Ok(loss)
    }

    /// Central finite-difference derivative with respect to entry `(a, k)`.
    pub fn partial(&self, d: &Matrix, a: usize, k: usize, h: f64) -> Result<f64> {
        let mut plus = d.clone();
        plus.set(a, k, d.get(a, k) + h);
        let mut minus = d.clone();
        minus.set(a, k, d.get(a, k) - h);
        Ok((self.value(&plus)? - self.value(&minus)?) / (2.0 * h))
    }

    pub fn gradient(&self, d: &Matrix, h: f64) -> Result<Matrix> {
        let mut g = Matrix::zeros(d.rows(), d.cols());
        for a in 0..d.rows() {
            for k in 0..d.cols() {
                g.set(a, k, self.partial(d, a, k, h)?);
            }
        }
        Ok(g)
    }
}

/// Fits `D` to `target` by projected gradient descent with backtracking.
pub fn train_d(
    city_counts: &[Vec<f64>],
    target: &Matrix,
    init: Option<&ConsumptionDistribution>,
    mixing: &MixingVector,
    averaging: &NationalAveraging,
    hyper: &TrainingHyperparams,
) -> Result<TrainingOutcome> {
    hyper.validate()?;
    let ages = target.rows();
    if target.cols() != ages {
        return Err(Error::Dimension {
            context: "reference contact matrix",
            expected: ages,
            found: target.cols(),
        });
    }
    if target.data.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(Error::param("reference", "entries must be finite and >= 0"));
    }
    let categories = city_counts.first().map_or(0, Vec::len);
    let d0 = match init {
        Some(d) => d.clone(),
        None => ConsumptionDistribution::random(ages, categories, hyper.seed),
    };
    if d0.ages() != ages {
        return Err(Error::Dimension {
            context: "initial D rows",
            expected: ages,
            found: d0.ages(),
        });
    }
    if d0.categories() != categories {
        return Err(Error::Dimension {
            context: "initial D columns",
            expected: categories,
            found: d0.categories(),
        });
    }
    let objective = ContactLoss {
        mixing,
        city_counts,
        averaging,
        target,
    };

    let mut d = d0.matrix;
    let mut loss = objective.value(&d)?;
    let mut log = vec![TrainingStep {
        iteration: 0,
        loss,
        step: 0.0,
    }];
    let mut iterations = 0;
    while iterations < hyper.max_iterations && loss > hyper.loss_tolerance {
        let g = objective.gradient(&d, hyper.fd_epsilon)?;
        let mut step = hyper.step_size;
        let accepted = loop {
            let mut candidate = d.clone();
            for (v, gi) in candidate.data.iter_mut().zip(&g.data) {
                *v -= step * gi;
            }
            project_columns(&mut candidate);
            let candidate_loss = objective.value(&candidate)?;
            if candidate_loss <= loss {
                break Some((candidate, candidate_loss));
            }
            step /= 2.0;
            if step < hyper.step_size * 1e-30 {
                break None;
            }
        };
        let Some((next, next_loss)) = accepted else { break };
        iterations += 1;
        let stalled = next_loss == loss;
        d = next;
        loss = next_loss;
        log.push(TrainingStep {
            iteration: iterations,
            loss,
            step,
        });
        if stalled {
            break;
        }
    }
    Ok(TrainingOutcome {
        d: ConsumptionDistribution { matrix: d },
        loss,
        iterations,
        log,
    })
}
