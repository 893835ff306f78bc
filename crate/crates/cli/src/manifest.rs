//! Run manifests: what went in, what came out, and under which settings.
//!
//! Nothing time- or machine-dependent is recorded (no timestamps, no thread
//! count, no output directory), so two runs over the same inputs produce
//! the same manifest bytes.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use mmclab::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::commands::Run;

#[derive(Serialize)]
struct FileEntry {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    rng: &'static str,
    command: &'a str,
    config: Value,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
    stats: &'a std::collections::BTreeMap<String, Value>,
}

fn hash_file(path: &Path) -> Result<(u64, String)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::with_capacity(1 << 20, f);
    let mut h = Sha256::new();
    let mut n = 0u64;
    loop {
        let buf = r.fill_buf().map_err(|e| Error::io(path, e))?;
        if buf.is_empty() {
            break;
        }
        h.update(buf);
        let k = buf.len();
        n += k as u64;
        r.consume(k);
    }
    Ok((n, hex::encode(h.finalize())))
}

fn entry(path: &Path, shown: &Path) -> Result<FileEntry> {
    let (bytes, sha256) = hash_file(path)?;
    Ok(FileEntry {
        path: shown.to_string_lossy().replace('\\', "/"),
        bytes,
        sha256,
    })
}

/// Drops `out` keys, which name the output location rather than the run.
fn strip_out(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("out");
            m.values_mut().for_each(strip_out);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_out),
        _ => {}
    }
}

pub fn write(path: &Path, command: &str, mut config: Value, run: &Run, root: &Path) -> Result<()> {
    strip_out(&mut config);
    let inputs = run.inputs.iter().map(|p| entry(p, p)).collect::<Result<Vec<_>>>()?;
    let outputs = run
        .outputs
        .iter()
        .map(|p| entry(p, p.strip_prefix(root).unwrap_or(p)))
        .collect::<Result<Vec<_>>>()?;
    let m = Manifest {
        tool: "mmc-lab",
        version: env!("CARGO_PKG_VERSION"),
        core_version: mmclab::VERSION,
        rng: mmclab::synth::RNG_ALGORITHM,
        command,
        config,
        inputs,
        outputs,
        stats: &run.stats,
    };
    let mut text = serde_json::to_string_pretty(&m).expect("manifest serialises");
    text.push('\n');
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
