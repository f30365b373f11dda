//! Multi-granularity calendar timestamps.
//!
//! Event data mixes year-, month-, and day-level timestamps (`2009`,
//! `2009-02`, `2009-02-10`). Every timestamp denotes a closed calendar
//! interval: `2009` covers 2009-01-01 through 2009-12-31. Ordering and
//! window predicates are defined on those intervals:
//!
//! * the total order used for path monotonicity compares `(start, end)`;
//! * `strictly_before` requires whole-interval separation (`end(a) < start(b)`),
//!   so "before 2010" excludes everything inside 2010.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

use super::StoreError;

/// Granularity of a [`Timestamp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    Year,
    Month,
    Day,
}

/// A calendar value at year, month, or day granularity.
///
/// Invariant: `day` present implies `month` present. Construct via
/// [`Timestamp::year`], [`Timestamp::month`], [`Timestamp::day`] or
/// [`parse_timestamp`]; all constructors reject impossible dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    y: i32,
    m: Option<u8>,
    d: Option<u8>,
}

impl Timestamp {
    pub fn year(y: i32) -> Self {
        Timestamp { y, m: None, d: None }
    }

    pub fn month(y: i32, m: u8) -> Result<Self, StoreError> {
        if !(1..=12).contains(&m) {
            return Err(StoreError::InvalidDate(format!("{y:04}-{m:02}")));
        }
        Ok(Timestamp { y, m: Some(m), d: None })
    }

    pub fn day(y: i32, m: u8, d: u8) -> Result<Self, StoreError> {
        if NaiveDate::from_ymd_opt(y, m as u32, d as u32).is_none() {
            return Err(StoreError::InvalidDate(format!("{y:04}-{m:02}-{d:02}")));
        }
        Ok(Timestamp { y, m: Some(m), d: Some(d) })
    }

    pub fn granularity(&self) -> Granularity {
        match (self.m, self.d) {
            (Some(_), Some(_)) => Granularity::Day,
            (Some(_), None) => Granularity::Month,
            _ => Granularity::Year,
        }
    }

    /// Earliest calendar day covered by this timestamp.
    pub fn start(&self) -> NaiveDate {
        let m = self.m.unwrap_or(1) as u32;
        let d = self.d.unwrap_or(1) as u32;
        NaiveDate::from_ymd_opt(self.y, m, d).expect("validated on construction")
    }

    /// Latest calendar day covered by this timestamp.
    pub fn end(&self) -> NaiveDate {
        match (self.m, self.d) {
            (Some(m), Some(d)) => {
                NaiveDate::from_ymd_opt(self.y, m as u32, d as u32).expect("validated")
            }
            (Some(m), None) => last_day_of_month(self.y, m as u32),
            _ => NaiveDate::from_ymd_opt(self.y, 12, 31).expect("dec 31 exists"),
        }
    }

    /// Days since 1970-01-01 of the interval start; used for time deltas.
    pub fn epoch_days(&self) -> i64 {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
        (self.start() - epoch).num_days()
    }

    pub fn year_value(&self) -> i32 {
        self.y
    }

    pub fn month_value(&self) -> Option<u8> {
        self.m
    }

    pub fn day_value(&self) -> Option<u8> {
        self.d
    }

    pub fn same_year(&self, other: &Timestamp) -> bool {
        self.y == other.y
    }

    pub fn same_month(&self, other: &Timestamp) -> bool {
        self.y == other.y && self.m.is_some() && self.m == other.m
    }

    /// Whole interval of `self` contained in the interval of `other`.
    pub fn within(&self, other: &Timestamp) -> bool {
        other.start() <= self.start() && self.end() <= other.end()
    }
}

fn last_day_of_month(y: i32, m: u32) -> NaiveDate {
    let (ny, nm) = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
    NaiveDate::from_ymd_opt(ny, nm, 1)
        .expect("first of month exists")
        .pred_opt()
        .expect("predecessor exists")
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.m, self.d) {
            (Some(m), Some(d)) => write!(f, "{:04}-{:02}-{:02}", self.y, m, d),
            (Some(m), None) => write!(f, "{:04}-{:02}", self.y, m),
            _ => write!(f, "{:04}", self.y),
        }
    }
}

/// Parse `YYYY`, `YYYY-MM`, or `YYYY-MM-DD`.
///
/// Shape errors yield [`StoreError::MalformedTimestamp`]; well-shaped but
/// impossible dates (month 13, Feb 30) yield [`StoreError::InvalidDate`].
pub fn parse_timestamp(text: &str) -> Result<Timestamp, StoreError> {
    let malformed = || StoreError::MalformedTimestamp(text.to_string());
    let parts: Vec<&str> = text.split('-').collect();
    if parts.is_empty() || parts.len() > 3 || parts[0].len() != 4 {
        return Err(malformed());
    }
    if parts.iter().skip(1).any(|p| p.len() != 2) {
        return Err(malformed());
    }
    if parts.iter().any(|p| p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit())) {
        return Err(malformed());
    }
    let y: i32 = parts[0].parse().map_err(|_| malformed())?;
    match parts.len() {
        1 => Ok(Timestamp::year(y)),
        2 => Timestamp::month(y, parts[1].parse().map_err(|_| malformed())?),
        _ => Timestamp::day(
            y,
            parts[1].parse().map_err(|_| malformed())?,
            parts[2].parse().map_err(|_| malformed())?,
        ),
    }
}

/// Total order over `(start, end)` interval bounds.
pub fn compare_ts(a: &Timestamp, b: &Timestamp) -> Ordering {
    (a.start(), a.end()).cmp(&(b.start(), b.end()))
}

/// Whole-interval precedence: every instant of `a` before every instant of `b`.
pub fn strictly_before(a: &Timestamp, b: &Timestamp) -> bool {
    a.end() < b.start()
}

/// Open time window with interval-aware exclusive bounds.
///
/// A fact passes when its start lies strictly after the *end* of the lower
/// bound and strictly before the *start* of the upper bound. With year
/// bounds this makes `(2008, 2010)` cover exactly the days of 2009.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TimeWindow {
    pub after: Option<Timestamp>,
    pub before: Option<Timestamp>,
}

impl TimeWindow {
    pub fn new(after: Option<Timestamp>, before: Option<Timestamp>) -> Self {
        TimeWindow { after, before }
    }

    pub fn is_unbounded(&self) -> bool {
        self.after.is_none() && self.before.is_none()
    }

    pub fn contains(&self, ts: &Timestamp) -> bool {
        if let Some(a) = &self.after {
            if ts.start() <= a.end() {
                return false;
            }
        }
        if let Some(b) = &self.before {
            if ts.start() >= b.start() {
                return false;
            }
        }
        true
    }
}

/// Window covering exactly the span of `anchor` (its year, month, or day),
/// built from exclusive neighbouring bounds.
pub fn window_covering(anchor: &Timestamp) -> TimeWindow {
    let after = match anchor.granularity() {
        Granularity::Year => Timestamp::year(anchor.year_value() - 1),
        Granularity::Month => {
            let (y, m) = (anchor.year_value(), anchor.month_value().unwrap());
            if m == 1 {
                Timestamp::month(y - 1, 12).unwrap()
            } else {
                Timestamp::month(y, m - 1).unwrap()
            }
        }
        Granularity::Day => {
            let prev = anchor.start().pred_opt().expect("previous day exists");
            Timestamp::day(prev.year(), prev.month() as u8, prev.day() as u8).unwrap()
        }
    };
    let before = match anchor.granularity() {
        Granularity::Year => Timestamp::year(anchor.year_value() + 1),
        Granularity::Month => {
            let (y, m) = (anchor.year_value(), anchor.month_value().unwrap());
            if m == 12 {
                Timestamp::month(y + 1, 1).unwrap()
            } else {
                Timestamp::month(y, m + 1).unwrap()
            }
        }
        Granularity::Day => {
            let next = anchor.end().succ_opt().expect("next day exists");
            Timestamp::day(next.year(), next.month() as u8, next.day() as u8).unwrap()
        }
    };
    TimeWindow::new(Some(after), Some(before))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> Timestamp {
        parse_timestamp(s).unwrap()
    }

    #[test]
    fn parse_day_form() {
        let t = ts("2008-08-08");
        assert_eq!(t.granularity(), Granularity::Day);
        assert_eq!((t.year_value(), t.month_value(), t.day_value()), (2008, Some(8), Some(8)));
    }

    #[test]
    fn parse_year_form() {
        let t = ts("2009");
        assert_eq!(t.granularity(), Granularity::Year);
        assert_eq!(t.month_value(), None);
    }

    #[test]
    fn parse_rejects_impossible_date() {
        assert!(matches!(parse_timestamp("2009-02-30"), Err(StoreError::InvalidDate(_))));
        assert!(matches!(parse_timestamp("2009-13"), Err(StoreError::InvalidDate(_))));
    }

    #[test]
    fn parse_rejects_bad_shapes() {
        for bad in ["", "209", "2009-2", "2009-02-1", "2009/02/01", "2009-02-01-05", "20a9"] {
            assert!(
                matches!(parse_timestamp(bad), Err(StoreError::MalformedTimestamp(_))),
                "{bad:?} should be malformed"
            );
        }
    }

    #[test]
    fn format_round_trips() {
        for s in ["2008-08-08", "2009-02", "2009"] {
            assert_eq!(ts(s).to_string(), s);
            assert_eq!(parse_timestamp(&ts(s).to_string()).unwrap(), ts(s));
        }
    }

    #[test]
    fn interval_bounds() {
        assert_eq!(ts("2009").start().to_string(), "2009-01-01");
        assert_eq!(ts("2009").end().to_string(), "2009-12-31");
        assert_eq!(ts("2009-02").end().to_string(), "2009-02-28");
        assert_eq!(ts("2008-02").end().to_string(), "2008-02-29");
    }

    #[test]
    fn compare_uses_interval_starts() {
        assert_eq!(compare_ts(&ts("2009-02-10"), &ts("2009-07-18")), Ordering::Less);
        assert_eq!(compare_ts(&ts("2009"), &ts("2009-06-01")), Ordering::Less);
        assert_eq!(compare_ts(&ts("2012"), &ts("2012")), Ordering::Equal);
    }

    #[test]
    fn strict_before_needs_interval_separation() {
        assert!(strictly_before(&ts("2009-11-15"), &ts("2010-06-26")));
        assert!(!strictly_before(&ts("2009"), &ts("2009-06-01")));
        assert!(!strictly_before(&ts("2008-08-08"), &ts("2008-08-08")));
    }

    #[test]
    fn window_is_exclusive_both_sides() {
        let w = TimeWindow::new(Some(ts("2008-01-01")), Some(ts("2009-01-01")));
        assert!(w.contains(&ts("2008-08-08")));
        assert!(!w.contains(&ts("2008-01-01")));
        assert!(!w.contains(&ts("2009-01-01")));
        assert!(!w.contains(&ts("2009-02-10")));
    }

    #[test]
    fn covering_window_spans_exactly_the_anchor() {
        let w = window_covering(&ts("2008"));
        assert!(w.contains(&ts("2008-01-01")));
        assert!(w.contains(&ts("2008-12-31")));
        assert!(!w.contains(&ts("2007-12-31")));
        assert!(!w.contains(&ts("2009-01-01")));

        let w = window_covering(&ts("2009-02"));
        assert!(w.contains(&ts("2009-02-01")));
        assert!(w.contains(&ts("2009-02-28")));
        assert!(!w.contains(&ts("2009-03-01")));
    }
}
