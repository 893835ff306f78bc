use std::fmt;
use std::str::FromStr;

/// A calendar quarter, ordered chronologically.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct YearQuarter {
    pub year: i32,
    pub quarter: u8,
}

impl YearQuarter {
    pub fn new(year: i32, quarter: u8) -> Option<Self> {
        (1..=4).contains(&quarter).then_some(YearQuarter { year, quarter })
    }

    /// Quarter containing a calendar month (1–12).
    pub fn containing(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range");
        YearQuarter {
            year,
            quarter: ((month - 1) / 3 + 1) as u8,
        }
    }

    pub fn index(&self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    pub fn from_index(i: i64) -> Self {
        YearQuarter {
            year: i.div_euclid(4) as i32,
            quarter: (i.rem_euclid(4) + 1) as u8,
        }
    }

    pub fn next(&self) -> Self {
        Self::from_index(self.index() + 1)
    }
}

impl fmt::Display for YearQuarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

/// Parses `2010Q2` (case-insensitive `q`).
impl FromStr for YearQuarter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (y, q) = s
            .split_once(['Q', 'q'])
            .ok_or_else(|| format!("expected YYYYQn, got `{s}`"))?;
        let year: i32 = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let quarter: u8 = q.parse().map_err(|_| format!("bad quarter in `{s}`"))?;
        YearQuarter::new(year, quarter).ok_or_else(|| format!("quarter out of range in `{s}`"))
    }
}
