//! Calendar dates as panel metadata.
//!
//! Dates only order rows and label output; no calendar arithmetic beyond
//! stepping over weekends is ever needed.

use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A proleptic Gregorian date, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    year: i32,
    month: u8,
    day: u8,
}

fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        _ => 28,
    }
}

impl Date {
    pub fn new(year: i32, month: u8, day: u8) -> Result<Self, Error> {
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return Err(Error::InvalidDate(format!("{year:04}-{month:02}-{day:02}")));
        }
        Ok(Self { year, month, day })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    pub fn day(&self) -> u8 {
        self.day
    }

    /// 0 = Sunday, ..., 6 = Saturday (Sakamoto's method).
    pub fn weekday(&self) -> u8 {
        const T: [i32; 12] = [0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4];
        let m = self.month as i32;
        let y = if m < 3 { self.year - 1 } else { self.year };
        let w = (y + y / 4 - y / 100 + y / 400 + T[(m - 1) as usize] + self.day as i32) % 7;
        w.rem_euclid(7) as u8
    }

    pub fn next_day(&self) -> Self {
        if self.day < days_in_month(self.year, self.month) {
            Self { day: self.day + 1, ..*self }
        } else if self.month < 12 {
            Self { month: self.month + 1, day: 1, ..*self }
        } else {
            Self { year: self.year + 1, month: 1, day: 1 }
        }
    }

    /// Next Monday-to-Friday date strictly after `self`.
    pub fn next_business_day(&self) -> Self {
        let mut d = self.next_day();
        while matches!(d.weekday(), 0 | 6) {
            d = d.next_day();
        }
        d
    }

    /// `count` consecutive business days, the first being `self` rolled
    /// forward to a weekday if needed.
    pub fn business_days(&self, count: usize) -> alloc::vec::Vec<Date> {
        let mut out = alloc::vec::Vec::with_capacity(count);
        let mut d = *self;
        while matches!(d.weekday(), 0 | 6) {
            d = d.next_day();
        }
        for _ in 0..count {
            out.push(d);
            d = d.next_business_day();
        }
        out
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl FromStr for Date {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidDate(String::from(s));
        let b = s.as_bytes();
        if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
            return Err(bad());
        }
        let digits = |r: core::ops::Range<usize>| -> Result<u32, Error> {
            let part = &s[r];
            if !part.bytes().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            part.parse::<u32>().map_err(|_| bad())
        };
        let year = digits(0..4)? as i32;
        let month = digits(5..7)? as u8;
        let day = digits(8..10)? as u8;
        Date::new(year, month, day).map_err(|_| bad())
    }
}

impl Serialize for Date {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Date {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <String as Deserialize>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn parses_and_prints_iso_dates() {
        let d: Date = "2020-02-29".parse().unwrap();
        assert_eq!(d.to_string(), "2020-02-29");
        assert!("2021-02-29".parse::<Date>().is_err());
        assert!("2021-13-01".parse::<Date>().is_err());
        assert!("2021-1-01".parse::<Date>().is_err());
        assert!("+021-01-01".parse::<Date>().is_err());
    }

    #[test]
    fn weekdays_and_business_days() {
        // 2024-01-01 was a Monday.
        let d = Date::new(2024, 1, 1).unwrap();
        assert_eq!(d.weekday(), 1);
        let fri = Date::new(2024, 1, 5).unwrap();
        assert_eq!(fri.next_business_day(), Date::new(2024, 1, 8).unwrap());
        let days = Date::new(2023, 12, 30).unwrap().business_days(3);
        assert_eq!(days[0], Date::new(2024, 1, 1).unwrap());
        assert_eq!(days[2], Date::new(2024, 1, 3).unwrap());
        assert_eq!(Date::new(2023, 12, 31).unwrap().next_day(), d);
    }
}
