//! The per-cluster DVFS log: one `start_us,end_us,freq_khz` record per poll,
//! LF-terminated, no header.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::domain::{validate_cluster_samples, DvfsSample, FrequencyTable};
use crate::error::{Error, Result};

pub fn write_dvfs_log(samples: &[DvfsSample], path: &Path) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_records(samples, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

/// Serializes samples to the log format in memory.
pub fn format_dvfs_log(samples: &[DvfsSample]) -> String {
    let mut buf = Vec::with_capacity(samples.len() * 24);
    write_records(samples, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ASCII output")
}

fn write_records(samples: &[DvfsSample], out: &mut impl Write) -> std::io::Result<()> {
    for s in samples {
        writeln!(out, "{},{},{}", s.start_us, s.end_us, s.freq_khz)?;
    }
    Ok(())
}

pub fn read_dvfs_log(path: &Path, table: &FrequencyTable) -> Result<Vec<DvfsSample>> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_dvfs_log(&text, table, path)
}

/// Parses a log strictly: any malformed line aborts with its 1-based line
/// number. `origin` only labels errors.
pub fn parse_dvfs_log(bytes: &[u8], table: &FrequencyTable, origin: &Path) -> Result<Vec<DvfsSample>> {
    if bytes.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        parse_err(line, "not valid UTF-8".into())
    })?;
    let body = text.strip_suffix('\n').unwrap_or(text);

    let mut samples = Vec::with_capacity(body.len() / 20 + 1);
    for (i, line) in body.split('\n').enumerate() {
        let lineno = i + 1;
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<u64> {
            let field = fields
                .next()
                .ok_or_else(|| parse_err(lineno, format!("missing {name}")))?;
            if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
                return Err(parse_err(lineno, format!("bad {name} `{field}`")));
            }
            field
                .parse::<u64>()
                .map_err(|e| parse_err(lineno, format!("bad {name} `{field}`: {e}")))
        };
        let start_us = next("start_us")?;
        let end_us = next("end_us")?;
        let freq = next("freq_khz")?;
        if fields.next().is_some() {
            return Err(parse_err(lineno, "more than three fields".into()));
        }
        let freq_khz = u32::try_from(freq)
            .map_err(|_| parse_err(lineno, format!("frequency {freq} out of range")))?;
        samples.push(DvfsSample {
            start_us,
            end_us,
            freq_khz,
        });
    }
    validate_cluster_samples(&samples, table)?;
    Ok(samples)
}
