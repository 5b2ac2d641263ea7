use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar month, ordered chronologically. Serializes as `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidInput(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn of_date(date: NaiveDate) -> Self {
        YearMonth {
            year: date.year(),
            month: date.month(),
        }
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        YearMonth {
            year: ord.div_euclid(12) as i32,
            month: ord.rem_euclid(12) as u32 + 1,
        }
    }

    /// Shifts by a signed number of months.
    pub fn offset(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Number of months from `self` to `other` (negative when `other` is earlier).
    pub fn months_until(self, other: YearMonth) -> i64 {
        other.ordinal() - self.ordinal()
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("validated month")
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    /// Accepts `YYYY-MM` or a full `YYYY-MM-DD` date.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            return Ok(YearMonth::of_date(d));
        }
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| Error::InvalidInput(format!("bad month '{s}'")))?;
        let year = y
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad year in '{s}'")))?;
        let month = m
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad month in '{s}'")))?;
        YearMonth::new(year, month)
    }
}

impl TryFrom<String> for YearMonth {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<YearMonth> for String {
    fn from(ym: YearMonth) -> String {
        ym.to_string()
    }
}

/// An inclusive, contiguous range of months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthWindow {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl MonthWindow {
    /// Requires `start < end`, so the window always spans at least two months.
    pub fn new(start: YearMonth, end: YearMonth) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidInput(format!(
                "window start {start} must precede end {end}"
            )));
        }
        Ok(MonthWindow { start, end })
    }

    pub fn len(&self) -> usize {
        (self.start.months_until(self.end) + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, ym: YearMonth) -> bool {
        self.start <= ym && ym <= self.end
    }

    pub fn index_of(&self, ym: YearMonth) -> Option<usize> {
        self.contains(ym)
            .then(|| self.start.months_until(ym) as usize)
    }

    pub fn months(&self) -> impl Iterator<Item = YearMonth> + '_ {
        (0..self.len() as i64).map(move |i| self.start.offset(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_cross_year_boundaries() {
        let nov = YearMonth::new(2022, 11).unwrap();
        assert_eq!(nov.offset(2), YearMonth::new(2023, 1).unwrap());
        assert_eq!(nov.offset(-11), YearMonth::new(2021, 12).unwrap());
        assert_eq!(nov.offset(-24).months_until(nov), 24);
    }

    #[test]
    fn parses_dates_and_months() {
        let a: YearMonth = "2022-11-30".parse().unwrap();
        let b: YearMonth = "2022-11".parse().unwrap();
        assert_eq!(a, b);
        assert!("2022-13".parse::<YearMonth>().is_err());
        assert_eq!(a.to_string(), "2022-11");
    }

    #[test]
    fn window_rejects_reversed_bounds() {
        let a = YearMonth::new(2020, 1).unwrap();
        assert!(MonthWindow::new(a, a).is_err());
        let w = MonthWindow::new(
            YearMonth::new(2018, 12).unwrap(),
            YearMonth::new(2024, 5).unwrap(),
        )
        .unwrap();
        assert_eq!(w.len(), 66);
        assert_eq!(w.index_of(YearMonth::new(2022, 11).unwrap()), Some(47));
    }
}
