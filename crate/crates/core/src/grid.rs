//! The weekly date grid. Every transaction row, epidemiological week and
//! analysis step is keyed by a week-end date on this grid.

use alloc::vec::Vec;

use chrono::{Days, NaiveDate};

use crate::{Error, Result};

pub const DAYS_PER_WEEK: u64 = 7;

/// Default first week-end date of the dataset.
pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date")
}

/// Default last week-end date of the dataset.
pub fn default_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 12, 27).expect("valid date")
}

/// Weekly grid `start, start + 7, ...` up to and including `end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WeekGrid {
    start: NaiveDate,
    end: NaiveDate,
}

impl Default for WeekGrid {
    fn default() -> Self {
        WeekGrid {
            start: default_start(),
            end: default_end(),
        }
    }
}

impl WeekGrid {
    /// Builds a grid. `end` must be reachable from `start` in whole weeks.
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::param("grid", "end precedes start"));
        }
        let span = (end - start).num_days();
        if span % DAYS_PER_WEEK as i64 != 0 {
            return Err(Error::param(
                "grid",
                alloc::format!("{start}..{end} is not a whole number of weeks"),
            ));
        }
        Ok(WeekGrid { start, end })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn len(&self) -> usize {
        ((self.end - self.start).num_days() as u64 / DAYS_PER_WEEK) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Date of step `index`, if it lies on the grid.
    pub fn date(&self, index: usize) -> Option<NaiveDate> {
        if index >= self.len() {
            return None;
        }
        self.start.checked_add_days(Days::new(index as u64 * DAYS_PER_WEEK))
    }

    /// Step index of `date`, or `None` when it is off the grid.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        if date < self.start || date > self.end {
            return None;
        }
        let days = (date - self.start).num_days() as u64;
        days.is_multiple_of(DAYS_PER_WEEK).then_some((days / DAYS_PER_WEEK) as usize)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.index_of(date).is_some()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        (0..self.len()).filter_map(|i| self.date(i)).collect()
    }

    /// Sub-grid covering `[from, to]`; both ends must be on this grid.
    pub fn window(&self, from: NaiveDate, to: NaiveDate) -> Result<WeekGrid> {
        if !self.contains(from) {
            return Err(Error::param("window.start", alloc::format!("{from} is not on the week grid")));
        }
        if !self.contains(to) {
            return Err(Error::param("window.end", alloc::format!("{to} is not on the week grid")));
        }
        WeekGrid::new(from, to)
    }
}
