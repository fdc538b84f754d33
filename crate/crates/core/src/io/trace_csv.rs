//! The trace CSV format: header `time_s,value`, one row per sample,
//! numbers at 6 significant digits.
//!
//! Reading recovers the uniform rate from the time stamps (snapping to
//! an integer rate when within tolerance), so write -> read -> write is
//! byte identical for the toolkit's 100 Hz and 1 kHz traces.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::physio::{Trace, TraceKind};

/// Format with 6 significant digits, plain notation for moderate
/// exponents and scientific otherwise, trailing zeros trimmed.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        // Callers validate finiteness; keep the encoder total anyway.
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let mut s = format!("{x:.decimals$}");
        if s.contains('.') {
            while s.ends_with('0') {
                s.pop();
            }
            if s.ends_with('.') {
                s.pop();
            }
        }
        s
    } else {
        format!("{x:.5e}")
    }
}

pub fn write_trace(path: impl AsRef<Path>, trace: &Trace) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(trace.len() * 16 + 16);
    out.push_str("time_s,value\n");
    for (i, &v) in trace.values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteSample { index: i, value: v });
        }
        let _ = writeln!(out, "{},{}", fmt_sig6(trace.sample_time(i)), fmt_sig6(v));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a trace written by [`write_trace`]. The stored kind is not part
/// of the format; the caller supplies it.
pub fn read_trace(path: impl AsRef<Path>, kind: TraceKind) -> Result<Trace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("time_s,value") => {}
        other => {
            return Err(Error::bad_file(
                path,
                format!("expected header 'time_s,value', got {other:?}"),
            ))
        }
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let (t, v) = line.split_once(',').ok_or_else(|| {
            Error::bad_file(path, format!("line {}: missing comma", lineno + 2))
        })?;
        let t: f64 = t.trim().parse().map_err(|_| {
            Error::bad_file(path, format!("line {}: bad time {t:?}", lineno + 2))
        })?;
        let v: f64 = v.trim().parse().map_err(|_| {
            Error::bad_file(path, format!("line {}: bad value {v:?}", lineno + 2))
        })?;
        if !t.is_finite() || !v.is_finite() {
            return Err(Error::bad_file(
                path,
                format!("line {}: non-finite entry", lineno + 2),
            ));
        }
        times.push(t);
        values.push(v);
    }
    if times.len() < 2 {
        return Err(Error::bad_file(path, "need at least 2 rows to infer the rate"));
    }
    let span = times[times.len() - 1] - times[0];
    if span.is_nan() || span <= 0.0 {
        return Err(Error::bad_file(path, "time stamps must be increasing"));
    }
    let mut rate = (times.len() - 1) as f64 / span;
    // The 6-digit stamps carry ~1e-5 relative noise; snap to the exact
    // integer rate when plausible so regenerated stamps round-trip.
    if (rate - rate.round()).abs() < 1e-3 * rate {
        rate = rate.round();
    }
    let t0 = times[0];
    for (i, &t) in times.iter().enumerate() {
        let expect = t0 + i as f64 / rate;
        if (t - expect).abs() > 0.01 / rate + 1e-4 * t.abs() {
            return Err(Error::bad_file(
                path,
                format!("row {i}: time {t} deviates from uniform grid ({expect})"),
            ));
        }
    }
    Ok(Trace::new(values, rate, t0, kind))
}
