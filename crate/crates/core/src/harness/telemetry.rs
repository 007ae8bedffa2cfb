//! Per-step telemetry records and their CSV form.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

pub const CSV_HEADER: &str = "step,loss,grad_norm_pre,grad_norm_post,clipped_fraction,effective_lr,reset,diverged";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub loss: f64,
    /// Global gradient norm before any optimizer-side transform.
    pub grad_norm_pre: f64,
    /// Global norm of the gradient the moment update consumed.
    pub grad_norm_post: f64,
    pub clipped_fraction: f64,
    /// Scheduled LR times any optimizer-internal multiplier.
    pub effective_lr: f64,
    #[serde(with = "flag")]
    pub reset: bool,
    #[serde(with = "flag")]
    pub diverged: bool,
}

/// Booleans as `0`/`1` columns.
mod flag {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(de::Error::custom(format!("expected 0 or 1, got {other}"))),
        }
    }
}

pub fn records_to_csv(records: &[StepRecord]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::with_capacity(64 * (records.len() + 1)));
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for r in records {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn parse_records_csv(text: &str) -> Result<Vec<StepRecord>, String> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(CSV_HEADER.split(',')) {
        return Err(format!("bad header: {header:?}"));
    }
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| format!("row {}: {e}", i + 1)))
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `contents` to a sibling temp file and renames it over `path`, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_records_csv(path: &Path, records: &[StepRecord]) -> Result<(), HarnessError> {
    write_atomic(path, records_to_csv(records).as_bytes())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<StepRecord>, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_records_csv(&text).map_err(|e| HarnessError::Invalid(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_bits() {
        let recs = vec![
            StepRecord {
                step: 1,
                loss: 0.1 + 0.2,
                grad_norm_pre: 1e-300,
                grad_norm_post: 3.0,
                clipped_fraction: 0.125,
                effective_lr: 1e-4 / 3.0,
                reset: true,
                diverged: false,
            },
            StepRecord {
                step: 2,
                loss: f64::NAN,
                grad_norm_pre: f64::INFINITY,
                grad_norm_post: f64::NAN,
                clipped_fraction: 0.0,
                effective_lr: 0.0,
                reset: false,
                diverged: true,
            },
        ];
        let back = parse_records_csv(&records_to_csv(&recs)).unwrap();
        assert_eq!(back[0], recs[0]);
        assert!(back[1].loss.is_nan() && back[1].diverged);
        assert_eq!(back[1].grad_norm_pre, f64::INFINITY);
    }

    #[test]
    fn header_is_required() {
        assert!(parse_records_csv("1,2,3,4,5,6,0,0\n").is_err());
    }
}
