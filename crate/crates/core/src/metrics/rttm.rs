//! RTTM reading and writing (`SPEAKER` records only).

use std::io::{BufRead, Write};

use super::{Annotation, Turn};
use crate::error::{Error, Result};

/// Parses `SPEAKER` records. Other record types are skipped.
pub fn read_rttm(reader: impl BufRead) -> Result<Annotation> {
    let mut turns = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() || f[0].starts_with(';') || f[0] != "SPEAKER" {
            continue;
        }
        if f.len() < 8 {
            return Err(Error::Parse {
                line: n + 1,
                msg: format!("expected at least 8 fields, got {}", f.len()),
            });
        }
        let num = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: n + 1,
                msg: format!("bad {what} {s:?}"),
            })
        };
        let start = num(f[3], "onset")?;
        let dur = num(f[4], "duration")?;
        if !(start >= 0.0) || !(dur >= 0.0) {
            return Err(Error::Parse {
                line: n + 1,
                msg: "onset and duration must be non-negative".into(),
            });
        }
        if dur > 0.0 {
            turns.push(Turn {
                speaker: f[7].to_string(),
                start,
                end: start + dur,
            });
        }
    }
    Ok(Annotation::new(turns))
}

pub fn write_rttm(mut w: impl Write, file_id: &str, annotation: &Annotation) -> Result<()> {
    for t in &annotation.turns {
        writeln!(
            w,
            "SPEAKER {file_id} 1 {:.3} {:.3} <NA> <NA> {} <NA> <NA>",
            t.start,
            t.end - t.start,
            t.speaker
        )?;
    }
    Ok(())
}
