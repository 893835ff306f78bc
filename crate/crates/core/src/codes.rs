//! Fixed-width airport and carrier codes.
//!
//! Both are stored inline as ASCII bytes so that hashing and ordering on the
//! hot ingest path never touch the heap.

use std::fmt;
use std::str::FromStr;

/// Three-letter uppercase airport code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Airport([u8; 3]);

impl Airport {
    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        match b {
            [a, b, c] if [a, b, c].iter().all(|x| x.is_ascii_uppercase()) => Some(Airport([*a, *b, *c])),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &str {
        // Constructed only from ASCII.
        std::str::from_utf8(&self.0).unwrap()
    }
}

impl FromStr for Airport {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Airport::from_bytes(s.as_bytes()).ok_or_else(|| format!("invalid airport code `{s}`"))
    }
}

impl fmt::Display for Airport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Airport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Airport({})", self.as_str())
    }
}

/// Two- or three-character alphanumeric carrier code (`AA`, `B6`, `WN`).
///
/// Ordering is lexicographic on the code text, which is the canonical order
/// for carrier pairs.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Carrier {
    bytes: [u8; 3],
    len: u8,
}

impl Carrier {
    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        if !(2..=3).contains(&b.len()) {
            return None;
        }
        if !b.iter().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit()) {
            return None;
        }
        let mut bytes = [0u8; 3];
        bytes[..b.len()].copy_from_slice(b);
        Some(Carrier {
            bytes,
            len: b.len() as u8,
        })
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.bytes[..self.len as usize]).unwrap()
    }

    /// Panics on an invalid code; meant for literals.
    pub fn code(s: &str) -> Self {
        s.parse().expect("valid carrier code")
    }
}

impl PartialOrd for Carrier {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Carrier {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl FromStr for Carrier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Carrier::from_bytes(s.as_bytes()).ok_or_else(|| format!("invalid carrier code `{s}`"))
    }
}

impl fmt::Display for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Carrier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Carrier({})", self.as_str())
    }
}

/// The twenty largest carriers by average quarterly passengers, in the order
/// they are usually listed.
pub const DEFAULT_CARRIERS: [&str; 20] = [
    "WN", "DL", "AA", "UA", "US", "CO", "AS", "NW", "B6", "NK", "F9", "FL", "HP", "HA", "G4",
    "TW", "TZ", "AQ", "VX", "SY",
];

pub fn default_carriers() -> Vec<Carrier> {
    DEFAULT_CARRIERS.iter().map(|c| Carrier::code(c)).collect()
}
