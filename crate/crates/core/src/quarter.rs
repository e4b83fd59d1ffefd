//! Calendar quarters and months.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A calendar quarter, totally ordered; the successor of (y, 4) is (y+1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    year: i32,
    q: u8,
}

impl Quarter {
    pub fn new(year: i32, q: u8) -> Result<Self> {
        if !(1..=4).contains(&q) {
            return Err(Error::config(format!("quarter index {q} outside 1..=4")));
        }
        Ok(Quarter { year, q })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn next(&self) -> Quarter {
        if self.q == 4 {
            Quarter { year: self.year + 1, q: 1 }
        } else {
            Quarter { year: self.year, q: self.q + 1 }
        }
    }

    /// Inclusive range of quarters from `self` to `end`.
    pub fn range_to(&self, end: Quarter) -> Vec<Quarter> {
        let mut out = Vec::new();
        let mut cur = *self;
        while cur <= end {
            out.push(cur);
            cur = cur.next();
        }
        out
    }

    /// Calendar-of-year one-based quarter a month falls in: 1-3 -> 1, ..., 10-12 -> 4.
    pub fn from_year_month(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::data(format!("month {month} outside 1..=12")));
        }
        Ok(Quarter { year, q: (month - 1) / 3 + 1 })
    }

    /// First month of this quarter, for emitting record dates.
    pub fn first_month(&self) -> u8 {
        (self.q - 1) * 3 + 1
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.q)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (y, q) = s
            .split_once(['Q', 'q'])
            .ok_or_else(|| Error::config(format!("bad quarter literal `{s}`, expected e.g. 2017Q1")))?;
        let year: i32 = y
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad year in quarter literal `{s}`")))?;
        let q: u8 = q
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("bad index in quarter literal `{s}`")))?;
        Quarter::new(year, q)
    }
}

impl Serialize for Quarter {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Quarter {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A calendar month used to date raw payment records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::data(format!("month {month} outside 1..=12")));
        }
        Ok(YearMonth { year, month })
    }

    /// Parses the `YYYY-MM` form used by the record CSV.
    pub fn parse(s: &str) -> Option<Self> {
        let (y, m) = s.split_once('-')?;
        if y.len() != 4 || m.len() != 2 {
            return None;
        }
        let year: i32 = y.parse().ok()?;
        let month: u8 = m.parse().ok()?;
        YearMonth::new(year, month).ok()
    }

    pub fn quarter(&self) -> Quarter {
        Quarter::from_year_month(self.year, self.month).expect("month validated at construction")
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn successor_wraps_year() {
        let q4 = Quarter::new(2019, 4).unwrap();
        assert_eq!(q4.next(), Quarter::new(2020, 1).unwrap());
        assert!(q4 < q4.next());
    }

    #[test]
    fn month_bucketing() {
        assert_eq!(Quarter::from_year_month(2017, 1).unwrap().q(), 1);
        assert_eq!(Quarter::from_year_month(2017, 3).unwrap().q(), 1);
        assert_eq!(Quarter::from_year_month(2017, 4).unwrap().q(), 2);
        assert_eq!(Quarter::from_year_month(2017, 12).unwrap().q(), 4);
        assert!(Quarter::from_year_month(2017, 13).is_err());
    }

    #[test]
    fn quarter_round_trips_as_string() {
        let q: Quarter = "2024Q3".parse().unwrap();
        assert_eq!(q.to_string(), "2024Q3");
        assert!("2024X3".parse::<Quarter>().is_err());
        assert!("2024Q5".parse::<Quarter>().is_err());
    }

    #[test]
    fn year_month_parse() {
        assert_eq!(
            YearMonth::parse("2017-03"),
            Some(YearMonth { year: 2017, month: 3 })
        );
        assert_eq!(YearMonth::parse("2017-3"), None);
        assert_eq!(YearMonth::parse("2017-00"), None);
        assert_eq!(YearMonth::parse("17-03"), None);
    }

    #[test]
    fn range_is_inclusive() {
        let start = Quarter::new(2019, 3).unwrap();
        let end = Quarter::new(2020, 2).unwrap();
        let range = start.range_to(end);
        assert_eq!(range.len(), 4);
        assert_eq!(range[0], start);
        assert_eq!(range[3], end);
    }
}
