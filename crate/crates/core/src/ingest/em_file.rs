//! EM captures on disk: a small `key=value` text header next to a raw
//! little-endian `f32` payload.
//!
//! ```text
//! freqprint-em 1
//! sample_rate_hz=2000000
//! capture_duration_s=10
//! samples=20000000
//! label=video-playback
//! ```
//!
//! An empty `label=` marks an unknown application.

use std::fs;
use std::path::{Path, PathBuf};

use crate::domain::EmTrace;
use crate::error::{Error, Result};

const MAGIC: &str = "freqprint-em 1";

/// The payload file that belongs to a header file.
pub fn em_payload_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("bin")
}

pub fn write_em_trace(trace: &EmTrace, header_path: &Path) -> Result<()> {
    let label = trace.label.as_deref().unwrap_or("");
    if label.contains(['\n', '\r']) {
        return Err(Error::InvalidArgument("EM labels cannot contain newlines".into()));
    }
    let header = format!(
        "{MAGIC}\nsample_rate_hz={}\ncapture_duration_s={}\nsamples={}\nlabel={label}\n",
        trace.sample_rate_hz,
        trace.capture_duration_s,
        trace.samples.len()
    );
    let mut payload = Vec::with_capacity(trace.samples.len() * 4);
    for s in &trace.samples {
        payload.extend_from_slice(&s.to_le_bytes());
    }
    let bin = em_payload_path(header_path);
    fs::write(header_path, header).map_err(|e| Error::io(header_path, e))?;
    fs::write(&bin, payload).map_err(|e| Error::io(&bin, e))
}

struct Header {
    sample_rate_hz: f64,
    capture_duration_s: f64,
    samples: usize,
    label: Option<String>,
}

fn parse_header(text: &str, path: &Path) -> Result<Header> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    if lines.next() != Some(MAGIC) {
        return Err(err(1, format!("expected `{MAGIC}`")));
    }
    let (mut rate, mut duration, mut samples, mut label) = (None, None, None, None);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(lineno, "expected key=value".into()))?;
        let bad = |e: &dyn std::fmt::Display| err(lineno, format!("bad {key}: {e}"));
        match key {
            "sample_rate_hz" => rate = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
            "capture_duration_s" => duration = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
            "samples" => samples = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "label" => label = Some((!value.is_empty()).then(|| value.to_owned())),
            _ => return Err(err(lineno, format!("unknown key `{key}`"))),
        }
    }
    let missing = |k: &str| err(0, format!("missing `{k}`"));
    Ok(Header {
        sample_rate_hz: rate.ok_or_else(|| missing("sample_rate_hz"))?,
        capture_duration_s: duration.ok_or_else(|| missing("capture_duration_s"))?,
        samples: samples.ok_or_else(|| missing("samples"))?,
        label: label.ok_or_else(|| missing("label"))?,
    })
}

pub fn read_em_trace(header_path: &Path) -> Result<EmTrace> {
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header = parse_header(&text, header_path)?;
    let bin = em_payload_path(header_path);
    let payload = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if payload.len() % 4 != 0 {
        return Err(Error::HeaderMismatch(format!(
            "payload of {} bytes is not a whole number of f32 samples",
            payload.len()
        )));
    }
    let n = payload.len() / 4;
    if n != header.samples {
        return Err(Error::HeaderMismatch(format!(
            "header declares {} samples, payload holds {n}",
            header.samples
        )));
    }
    let samples = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    EmTrace::new(
        header.label,
        samples,
        header.sample_rate_hz,
        header.capture_duration_s,
    )
    .map_err(|e| Error::HeaderMismatch(e.to_string()))
}
