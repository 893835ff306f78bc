//! Minimal columnar table feeding the regression engine.
//!
//! Numeric columns are `f64`; text columns are dictionary encoded. Any column
//! can serve as a fixed-effect dimension, and `a*b` names the interaction of
//! two columns.

use std::collections::HashMap;
use std::io::Read;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Num(Vec<f64>),
    Cat { levels: Vec<String>, codes: Vec<u32> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Num(v) => v.len(),
            Column::Cat { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn take(&self, rows: &[usize]) -> Column {
        match self {
            Column::Num(v) => Column::Num(rows.iter().map(|&i| v[i]).collect()),
            Column::Cat { levels, codes } => Column::Cat {
                levels: levels.clone(),
                codes: rows.iter().map(|&i| codes[i]).collect(),
            },
        }
    }
}

/// Dense group assignment for one fixed-effect dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Groups {
    pub codes: Vec<u32>,
    pub n_levels: usize,
}

impl Groups {
    /// Renumbers arbitrary keys densely, in key order, so the numbering does
    /// not depend on row order.
    pub fn from_keys<K: Ord + Copy + std::hash::Hash>(keys: &[K]) -> Self {
        let mut uniq: Vec<K> = keys.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        let index: HashMap<K, u32> = uniq.iter().enumerate().map(|(i, k)| (*k, i as u32)).collect();
        Groups {
            codes: keys.iter().map(|k| index[k]).collect(),
            n_levels: uniq.len(),
        }
    }

    pub fn counts(&self) -> Vec<u32> {
        let mut c = vec![0u32; self.n_levels];
        for &g in &self.codes {
            c[g as usize] += 1;
        }
        c
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Frame {
    names: Vec<String>,
    cols: Vec<Column>,
    nrows: usize,
}

impl Frame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    fn check_len(&mut self, len: usize) -> Result<()> {
        if self.cols.is_empty() {
            self.nrows = len;
        } else if len != self.nrows {
            return Err(Error::Schema(format!(
                "column length {len} differs from frame length {}",
                self.nrows
            )));
        }
        Ok(())
    }

    fn put(&mut self, name: &str, col: Column) {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            self.cols[i] = col;
        } else {
            self.names.push(name.to_string());
            self.cols.push(col);
        }
    }

    pub fn push_num(&mut self, name: &str, v: Vec<f64>) -> Result<()> {
        self.check_len(v.len())?;
        self.put(name, Column::Num(v));
        Ok(())
    }

    pub fn push_text<S: AsRef<str>>(&mut self, name: &str, v: &[S]) -> Result<()> {
        self.check_len(v.len())?;
        let mut index: HashMap<&str, u32> = HashMap::new();
        let mut levels: Vec<String> = Vec::new();
        let codes = v
            .iter()
            .map(|s| {
                let s = s.as_ref();
                *index.entry(s).or_insert_with(|| {
                    levels.push(s.to_string());
                    levels.len() as u32 - 1
                })
            })
            .collect();
        self.put(name, Column::Cat { levels, codes });
        Ok(())
    }

    pub fn push_codes(&mut self, name: &str, levels: Vec<String>, codes: Vec<u32>) -> Result<()> {
        self.check_len(codes.len())?;
        if codes.iter().any(|&c| c as usize >= levels.len()) {
            return Err(Error::Schema(format!("column `{name}` has codes outside its levels")));
        }
        self.put(name, Column::Cat { levels, codes });
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.cols[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn num(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            Column::Num(v) => Ok(v),
            Column::Cat { .. } => Err(Error::Schema(format!("column `{name}` is not numeric"))),
        }
    }

    /// Group assignment for `name` or an interaction `a*b`.
    pub fn groups(&self, name: &str) -> Result<Groups> {
        let parts: Vec<&str> = name.split('*').map(str::trim).collect();
        if parts.len() == 1 {
            return self.single_groups(parts[0]);
        }
        let mut acc = self.single_groups(parts[0])?;
        for p in &parts[1..] {
            let g = self.single_groups(p)?;
            let keys: Vec<(u32, u32)> = acc.codes.iter().zip(&g.codes).map(|(a, b)| (*a, *b)).collect();
            acc = Groups::from_keys(&keys);
        }
        Ok(acc)
    }

    fn single_groups(&self, name: &str) -> Result<Groups> {
        match self.column(name)? {
            Column::Num(v) => {
                let keys: Vec<u64> = v.iter().map(|x| ordered_bits(*x)).collect();
                Ok(Groups::from_keys(&keys))
            }
            Column::Cat { levels, codes } => {
                // Rank levels by label so codes are independent of row order.
                let mut order: Vec<u32> = (0..levels.len() as u32).collect();
                order.sort_by(|a, b| levels[*a as usize].cmp(&levels[*b as usize]));
                let mut rank = vec![0u32; levels.len()];
                for (r, &l) in order.iter().enumerate() {
                    rank[l as usize] = r as u32;
                }
                let keys: Vec<u32> = codes.iter().map(|c| rank[*c as usize]).collect();
                Ok(Groups::from_keys(&keys))
            }
        }
    }

    pub fn take_rows(&self, rows: &[usize]) -> Frame {
        Frame {
            names: self.names.clone(),
            cols: self.cols.iter().map(|c| c.take(rows)).collect(),
            nrows: rows.len(),
        }
    }

    /// Stacks the frame on itself: the first copy takes `as_name` from `fwd`,
    /// the second from `rev`. Used for directed contact measures, where each
    /// carrier pair contributes one row per direction.
    pub fn stack_directed(&self, fwd: &str, rev: &str, as_name: &str) -> Result<Frame> {
        let f = self.num(fwd)?.to_vec();
        let r = self.num(rev)?.to_vec();
        let rows: Vec<usize> = (0..self.nrows).chain(0..self.nrows).collect();
        let mut out = self.take_rows(&rows);
        let mut v = f;
        v.extend(r);
        out.push_num(as_name, v)?;
        let dir: Vec<f64> = (0..self.nrows).map(|_| 0.0).chain((0..self.nrows).map(|_| 1.0)).collect();
        out.push_num("direction", dir)?;
        Ok(out)
    }

    /// Adds `city_pair` (origin|dest) and `carrier_pair` (lo|hi) keys when
    /// their source columns are present.
    pub fn derive_keys(&mut self) -> Result<()> {
        for (name, a, b) in [
            ("city_pair", "origin", "dest"),
            ("carrier_pair", "carrier_lo", "carrier_hi"),
        ] {
            if self.has(name) || !self.has(a) || !self.has(b) {
                continue;
            }
            let la = self.labels(a)?;
            let lb = self.labels(b)?;
            let joined: Vec<String> = la.iter().zip(&lb).map(|(x, y)| format!("{x}|{y}")).collect();
            self.push_text(name, &joined)?;
        }
        Ok(())
    }

    fn labels(&self, name: &str) -> Result<Vec<String>> {
        Ok(match self.column(name)? {
            Column::Num(v) => v.iter().map(|x| x.to_string()).collect(),
            Column::Cat { levels, codes } => codes.iter().map(|c| levels[*c as usize].clone()).collect(),
        })
    }

    /// Reads a CSV; a column is numeric when every value parses as a number,
    /// so the columns of a header-only file are numeric.
    pub fn read_csv<R: Read>(r: R) -> Result<Frame> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let head: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); head.len()];
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != head.len() {
                return Err(Error::Schema("ragged CSV row".into()));
            }
            for (c, v) in raw.iter_mut().zip(rec.iter()) {
                c.push(v.to_string());
            }
        }
        let mut f = Frame::new();
        f.nrows = raw.first().map_or(0, Vec::len);
        for (name, vals) in head.iter().zip(raw) {
            let nums: Option<Vec<f64>> = vals.iter().map(|v| v.parse::<f64>().ok()).collect();
            match nums {
                Some(v) => f.push_num(name, v)?,
                _ => f.push_text(name, &vals)?,
            }
        }
        Ok(f)
    }
}

/// Bit pattern that makes equal values equal keys (folding -0.0 into 0.0).
fn ordered_bits(x: f64) -> u64 {
    let x = if x == 0.0 { 0.0 } else { x };
    x.to_bits()
}
