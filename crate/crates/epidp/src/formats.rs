//! CSV layouts of every table the CLI reads or writes.

use std::io::Write;

use chrono::NaiveDate;
use epidp_core::analytics::{AdherenceSeries, HotspotMap, MobilitySeries};
use epidp_core::category::Category;
use epidp_core::contact::{Matrix, TrainingStep};
use epidp_core::dp::{BudgetLedger, ReleaseMetadata};
use epidp_core::geo::City;
use epidp_core::record::{Channel, TransactionRecord, TRANSACTION_COLUMNS};
use epidp_core::rt::{CovariateFit, RtEstimate};
use epidp_core::validation::{CcfResult, ValidationReport};
use epidp_core::Result as CoreResult;

use crate::error::{parse_date, Error, Result};

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_transactions<W: Write>(w: W, rows: &[TransactionRecord]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(TRANSACTION_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.id.to_string().as_str(),
            &r.merchant_id.to_string(),
            &r.date.to_string(),
            r.category.name(),
            &r.postal_code,
            r.channel.name(),
            &format!("{:.2}", r.spend_amount),
            &r.nb_transactions.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_transactions(raw: &[u8]) -> Result<Vec<TransactionRecord>> {
    let mut reader = csv::Reader::from_reader(raw);
    let headers = reader.headers()?.clone();
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(TRANSACTION_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))?;
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |k: usize| record.get(idx[k]).unwrap_or("");
        let bad = |what: &str, e: &dyn std::fmt::Display| Error::row(line, format!("bad {what}: {e}"));
        rows.push(TransactionRecord {
            id: cell(0).parse().map_err(|e| bad("id", &e))?,
            merchant_id: cell(1).parse().map_err(|e| bad("merchant_id", &e))?,
            date: parse_date(cell(2), line)?,
            category: cell(3).parse::<Category>().map_err(|e| bad("merch_category", &e))?,
            postal_code: cell(4).to_string(),
            channel: cell(5).parse::<Channel>().map_err(|e| bad("transaction_type", &e))?,
            spend_amount: cell(6).parse().map_err(|e| bad("spendamt", &e))?,
            nb_transactions: cell(7).parse().map_err(|e| bad("nb_transactions", &e))?,
        });
    }
    Ok(rows)
}

/// Privacy audit: `# key: value` metadata lines, then one CSV row per
/// ledger charge with the running total.
pub fn write_audit<W: Write>(mut w: W, ledger: &BudgetLedger, metadata: Option<&ReleaseMetadata>) -> Result<()> {
    let io = |e| Error::io("audit", e);
    writeln!(w, "# total_epsilon: {}", ledger.total()).map_err(io)?;
    if let Some(m) = metadata {
        writeln!(w, "# mechanism: gaussian").map_err(io)?;
        writeln!(w, "# mode: {}", m.mode.name()).map_err(io)?;
        writeln!(w, "# release_epsilon: {}", m.epsilon).map_err(io)?;
        if let Some(delta) = m.delta {
            writeln!(w, "# delta: {delta}").map_err(io)?;
        }
        writeln!(w, "# time_steps: {}", m.time_steps).map_err(io)?;
        writeln!(w, "# upper_bound: {}", m.upper_bound).map_err(io)?;
        writeln!(w, "# noise_scale: {}", m.scale).map_err(io)?;
    }
    let mut out = writer(w);
    out.write_record(["label", "epsilon", "cumulative"])?;
    for (label, eps, cumulative) in ledger.audit_lines() {
        out.write_record([label, &eps.to_string(), &cumulative.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `(label, epsilon)` charges of an audit file.
pub fn read_audit(raw: &[u8]) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(raw);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let eps = record
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e| Error::row(line, format!("bad epsilon: {e}")))?;
        out.push((record.get(0).unwrap_or("").to_string(), eps));
    }
    Ok(out)
}

pub fn write_hotspot<W: Write>(w: W, map: &HotspotMap) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["postal_code", "noisy_count"])?;
    for (code, count) in &map.counts {
        out.write_record([code.as_str(), &count.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_mobility<W: Write>(w: W, series: &MobilitySeries) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["date", "noisy_count", "pct_change_from_baseline"])?;
    for ((date, count), pct) in series
        .week_end_dates
        .iter()
        .zip(&series.noisy_counts)
        .zip(&series.pct_change_from_baseline)
    {
        out.write_record([date.to_string(), count.to_string(), opt(*pct)])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Long format per-postal breakdown: `date,postal_code,noisy_count`.
pub fn write_per_postal<W: Write>(w: W, series: &MobilitySeries) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["date", "postal_code", "noisy_count"])?;
    if let Some(per_postal) = &series.per_postal {
        for (i, date) in series.week_end_dates.iter().enumerate() {
            for (code, counts) in per_postal {
                out.write_record([date.to_string(), code.clone(), counts[i].to_string()])?;
            }
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_adherence<W: Write>(w: W, series: &AdherenceSeries) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["date", "essential", "luxury", "ratio"])?;
    for (i, date) in series.week_end_dates.iter().enumerate() {
        out.write_record([
            date.to_string(),
            series.essential[i].to_string(),
            series.luxury[i].to_string(),
            opt(series.ratio[i]),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Headerless numeric matrix, one row per line.
pub fn write_matrix<W: Write>(w: W, m: &Matrix) -> Result<()> {
    let mut out = writer(w);
    for i in 0..m.rows() {
        out.write_record(m.row(i).iter().map(f64::to_string))?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows(raw: &[u8]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(raw);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|c| c.trim().parse::<f64>().map_err(|e| Error::row(line, format!("bad number {c:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix(raw: &[u8]) -> Result<Matrix> {
    Ok(Matrix::from_rows(&read_rows(raw)?)?)
}

pub fn write_training_log<W: Write>(w: W, log: &[TrainingStep]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["iteration", "loss", "step"])?;
    for s in log {
        out.write_record([s.iteration.to_string(), s.loss.to_string(), s.step.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `date,value` series (incidence or a covariate).
pub fn read_series(raw: &[u8]) -> Result<(Vec<NaiveDate>, Vec<f64>)> {
    let mut reader = csv::Reader::from_reader(raw);
    let headers = reader.headers()?.clone();
    for name in ["date", "value"] {
        if !headers.iter().any(|h| h.trim() == name) {
            return Err(Error::MissingColumn(name.into()));
        }
    }
    let date_col = headers.iter().position(|h| h.trim() == "date").unwrap_or(0);
    let value_col = headers.iter().position(|h| h.trim() == "value").unwrap_or(1);
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        dates.push(parse_date(record.get(date_col).unwrap_or(""), line)?);
        let cell = record.get(value_col).unwrap_or("").trim();
        values.push(
            cell.parse::<f64>()
                .map_err(|e| Error::row(line, format!("bad value {cell:?}: {e}")))?,
        );
    }
    Ok((dates, values))
}

pub fn write_series<W: Write>(w: W, dates: &[NaiveDate], values: &[f64]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["date", "value"])?;
    for (d, v) in dates.iter().zip(values) {
        out.write_record([d.to_string(), v.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_rt<W: Write>(w: W, dates: &[NaiveDate], est: &RtEstimate) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["date", "mean", "lower", "upper", "prior_only"])?;
    for (i, d) in dates.iter().enumerate() {
        out.write_record([
            d.to_string(),
            est.mean[i].to_string(),
            est.lower[i].to_string(),
            est.upper[i].to_string(),
            est.prior_only[i].to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_fit<W: Write>(w: W, fit: &CovariateFit) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["label", "beta"])?;
    for (label, beta) in fit.labels.iter().zip(&fit.beta) {
        out.write_record([label.clone(), beta.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row per city and category: `city,category,lag_max,ccf_max`; the two
/// numeric cells are empty where the correlation is undefined.
pub fn write_ccf<'a, W: Write>(
    w: W,
    results: impl IntoIterator<Item = (&'a (City, Category), &'a CoreResult<CcfResult>)>,
) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["city", "category", "lag_max", "ccf_max"])?;
    for ((city, category), result) in results {
        let (lag, r) = match result {
            Ok(c) => (c.lag_max.to_string(), c.ccf_max.to_string()),
            Err(_) => (String::new(), String::new()),
        };
        out.write_record([city.name(), category.name(), &lag, &r])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_report<W: Write>(w: W, report: &ValidationReport) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["check", "status", "measured", "expected"])?;
    for c in &report.checks {
        out.write_record([
            c.name.as_str(),
            if c.passed { "pass" } else { "fail" },
            &c.measured,
            &c.expected,
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn report_text(report: &ValidationReport) -> String {
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for c in &report.checks {
        s.push_str(&format!(
            "{} {:width$}  measured {}  expected {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.expected,
        ));
    }
    let failed = report.failures().count();
    s.push_str(&format!("{} checks, {} failed\n", report.checks.len(), failed));
    s
}
