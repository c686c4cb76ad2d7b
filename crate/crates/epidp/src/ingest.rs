//! OWID-style epidemiological CSV and mobility-report CSV readers.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use epidp_core::epi::{weekly_aggregate, weekly_mobility, EpiDailyRecord, EpiWeeklySeries, MobilityReferenceSeries};
use epidp_core::grid::WeekGrid;
use serde::Deserialize;

use crate::error::{parse_date, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default)]
pub struct EpiColumns {
    pub location: String,
    pub date: String,
    pub new_cases: String,
    pub new_deaths: String,
}

impl Default for EpiColumns {
    fn default() -> Self {
        EpiColumns {
            location: "location".into(),
            date: "date".into(),
            new_cases: "new_cases".into(),
            new_deaths: "new_deaths".into(),
        }
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.into()))
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_count(cell: &str, line: u64, what: &str) -> Result<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(0.0);
    }
    cell.parse::<f64>()
        .map_err(|e| Error::row(line, format!("bad {what} {cell:?}: {e}")))
}

/// Daily records grouped by country. Blank numeric cells read as 0. When
/// `countries` is given, rows for other locations are skipped unparsed.
pub fn parse_epi_csv(
    raw: &[u8],
    columns: &EpiColumns,
    countries: Option<&[&str]>,
) -> Result<BTreeMap<String, Vec<EpiDailyRecord>>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(raw);
    let headers = reader.headers()?.clone();
    let loc = column(&headers, &columns.location)?;
    let date = column(&headers, &columns.date)?;
    let cases = column(&headers, &columns.new_cases)?;
    let deaths = column(&headers, &columns.new_deaths)?;

    let mut out: BTreeMap<String, Vec<EpiDailyRecord>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let cell = |i: usize| record.get(i).unwrap_or("");
        let country = cell(loc).trim();
        if countries.is_some_and(|wanted| !wanted.contains(&country)) {
            continue;
        }
        let rec = EpiDailyRecord::new(
            country,
            parse_date(cell(date), line)?,
            parse_count(cell(cases), line, "new_cases")?,
            parse_count(cell(deaths), line, "new_deaths")?,
        );
        out.entry(country.to_string()).or_default().push(rec);
    }
    Ok(out)
}

/// Week-aligned series for each requested country; countries without rows
/// get an all-zero series.
pub fn weekly_epi(
    daily: &BTreeMap<String, Vec<EpiDailyRecord>>,
    countries: &[&str],
    grid: WeekGrid,
) -> BTreeMap<String, EpiWeeklySeries> {
    countries
        .iter()
        .map(|c| {
            let rows = daily.get(*c).map_or(&[][..], Vec::as_slice);
            (c.to_string(), weekly_aggregate(c, rows, grid))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default)]
pub struct MobilityColumns {
    pub region: String,
    pub date: String,
    /// Category columns to read; every other column when empty.
    pub categories: Vec<String>,
    /// Suffix stripped from a column name to get the category name.
    pub strip_suffix: String,
}

impl Default for MobilityColumns {
    fn default() -> Self {
        MobilityColumns {
            region: "region".into(),
            date: "date".into(),
            categories: Vec::new(),
            strip_suffix: "_percent_change_from_baseline".into(),
        }
    }
}

/// Weekly percent-change series for `region`, one per category column.
pub fn parse_mobility_csv(
    raw: &[u8],
    region: &str,
    columns: &MobilityColumns,
    grid: WeekGrid,
) -> Result<Vec<MobilityReferenceSeries>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(raw);
    let headers = reader.headers()?.clone();
    let region_col = column(&headers, &columns.region)?;
    let date_col = column(&headers, &columns.date)?;
    let category_cols: Vec<(usize, String)> = if columns.categories.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != region_col && *i != date_col)
            .map(|(i, h)| (i, h.trim().to_string()))
            .collect()
    } else {
        columns
            .categories
            .iter()
            .map(|c| Ok((column(&headers, c)?, c.clone())))
            .collect::<Result<_>>()?
    };

    let mut regions = BTreeSet::new();
    let mut daily: Vec<Vec<(NaiveDate, f64)>> = vec![Vec::new(); category_cols.len()];
    for record in reader.records() {
        let record = record?;
        let line = line_of(&record);
        let name = record.get(region_col).unwrap_or("").trim();
        if name != region {
            regions.insert(name.to_string());
            continue;
        }
        let date = parse_date(record.get(date_col).unwrap_or(""), line)?;
        for (slot, (i, header)) in daily.iter_mut().zip(&category_cols) {
            let cell = record.get(*i).unwrap_or("").trim();
            if cell.is_empty() {
                continue;
            }
            let value = cell
                .parse::<f64>()
                .map_err(|e| Error::row(line, format!("bad {header} {cell:?}: {e}")))?;
            slot.push((date, value));
        }
    }
    if daily.iter().all(Vec::is_empty) {
        return Err(Error::RegionNotFound {
            region: region.into(),
            available: regions.into_iter().collect(),
        });
    }
    category_cols
        .iter()
        .zip(&daily)
        .map(|((_, header), values)| {
            let name = header.strip_suffix(columns.strip_suffix.as_str()).unwrap_or(header);
            Ok(weekly_mobility(region, name, values, grid)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_colombian_rows() {
        let csv = "location,date,new_cases,new_deaths\n\
                   Colombia,2020-04-01,10,3\n\
                   Colombia,2020-04-02,12,5\n";
        let out = parse_epi_csv(csv.as_bytes(), &EpiColumns::default(), None).unwrap();
        let deaths: Vec<f64> = out["Colombia"].iter().map(|r| r.new_deaths).collect();
        assert_eq!(deaths, [3.0, 5.0]);
    }

    #[test]
    fn blank_deaths_read_as_zero() {
        let csv = "location,date,new_cases,new_deaths\nChile,2020-04-01,4,\n";
        let out = parse_epi_csv(csv.as_bytes(), &EpiColumns::default(), None).unwrap();
        assert_eq!(out["Chile"][0].new_deaths, 0.0);
        assert_eq!(out["Chile"][0].new_cases, 4.0);
    }

    #[test]
    fn missing_date_column_is_named() {
        let csv = "location,day,new_cases,new_deaths\nChile,2020-04-01,4,1\n";
        let err = parse_epi_csv(csv.as_bytes(), &EpiColumns::default(), None).unwrap_err();
        assert!(matches!(&err, Error::MissingColumn(c) if c == "date"), "{err}");
    }

    #[test]
    fn bad_date_reports_its_line() {
        let csv = "location,date,new_cases,new_deaths\nChile,2020-04-01,4,1\nChile,04/02/2020,4,1\n";
        let err = parse_epi_csv(csv.as_bytes(), &EpiColumns::default(), None).unwrap_err();
        assert!(matches!(err, Error::Row { line: 3, .. }), "{err}");
    }

    #[test]
    fn unrequested_countries_are_skipped() {
        let csv = "location,date,new_cases,new_deaths\nPeru,bad-date,1,1\nBrazil,2020-04-01,1,9\n";
        let out = parse_epi_csv(csv.as_bytes(), &EpiColumns::default(), Some(&["Brazil"])).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out["Brazil"][0].new_deaths, 9.0);
    }

    #[test]
    fn custom_column_names() {
        let csv = "country,day,cases,deaths\nBrazil,2020-04-01,1,9\n";
        let columns = EpiColumns {
            location: "country".into(),
            date: "day".into(),
            new_cases: "cases".into(),
            new_deaths: "deaths".into(),
        };
        let out = parse_epi_csv(csv.as_bytes(), &columns, None).unwrap();
        assert_eq!(out["Brazil"][0].new_deaths, 9.0);
    }

    fn week_of_rows(region: &str) -> String {
        let mut s = String::from("region,date,retail_and_recreation_percent_change_from_baseline,transit_stations_percent_change_from_baseline\n");
        for d in 1..=7 {
            s.push_str(&format!("{region},2020-01-{:02},-20,{}\n", d, d * 2));
        }
        s
    }

    #[test]
    fn constant_week_averages_to_itself() {
        let grid = WeekGrid::default();
        let out = parse_mobility_csv(week_of_rows("Bogota").as_bytes(), "Bogota", &MobilityColumns::default(), grid)
            .unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].category, "retail_and_recreation");
        assert_eq!(out[0].week_end_dates, [NaiveDate::from_ymd_opt(2020, 1, 7).unwrap()]);
        assert_eq!(out[0].pct_change_from_baseline, [-20.0]);
        assert_eq!(out[1].category, "transit_stations");
        assert_eq!(out[1].pct_change_from_baseline, [8.0]);
    }

    #[test]
    fn unknown_region_lists_the_known_ones() {
        let err = parse_mobility_csv(
            week_of_rows("Lima").as_bytes(),
            "Bogota",
            &MobilityColumns::default(),
            WeekGrid::default(),
        )
        .unwrap_err();
        match err {
            Error::RegionNotFound { region, available } => {
                assert_eq!(region, "Bogota");
                assert_eq!(available, ["Lima"]);
            }
            other => panic!("{other}"),
        }
    }
}
