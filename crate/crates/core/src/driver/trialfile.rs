//! Line-delimited flat files for trial and repeatability records.
//!
//! Trial file format (one record per line, space separated):
//!
//! ```text
//! # ionctx trials v1
//! # columns: setting outcome_i outcome_j trial_index rng_stream_id
//! 0,1 +1 -1 0 72339069014638592
//! ```
//!
//! Outcomes are +-1 and never missing. The repeatability file carries
//! `observable branch first second post_selected run_index` per line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::measurement::{ContextId, RepeatabilityRecord, TrialRecord};

pub const TRIALS_HEADER: &str = "# ionctx trials v1";
pub const REPEATABILITY_HEADER: &str = "# ionctx repeatability v1";

pub fn trials_to_string(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 24 + 128);
    out.push_str(TRIALS_HEADER);
    out.push('\n');
    out.push_str("# columns: setting outcome_i outcome_j trial_index rng_stream_id\n");
    for rec in records {
        writeln!(
            out,
            "{} {:+} {:+} {} {}",
            rec.setting, rec.outcome_i, rec.outcome_j, rec.trial_index, rec.rng_stream_id
        )
        .expect("string write");
    }
    out
}

pub fn write_trials(path: &Path, records: &[TrialRecord]) -> Result<()> {
    std::fs::write(path, trials_to_string(records))?;
    Ok(())
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_outcome(path: &Path, line_no: usize, token: &str) -> Result<i8> {
    let value: i64 = token.parse().map_err(|_| {
        parse_error(
            path,
            line_no,
            format!("outcome `{token}` is not an integer"),
        )
    })?;
    match value {
        1 => Ok(1),
        -1 => Ok(-1),
        other => Err(parse_error(
            path,
            line_no,
            format!("outcome {other} is not +-1"),
        )),
    }
}

fn parse_setting(path: &Path, line_no: usize, token: &str) -> Result<ContextId> {
    let (i, j) = token
        .split_once(',')
        .ok_or_else(|| parse_error(path, line_no, format!("setting `{token}` is not `i,j`")))?;
    let i: usize = i
        .parse()
        .map_err(|_| parse_error(path, line_no, format!("setting index `{i}`")))?;
    let j: usize = j
        .parse()
        .map_err(|_| parse_error(path, line_no, format!("setting index `{j}`")))?;
    ContextId::from_pair(i, j)
        .map_err(|_| parse_error(path, line_no, format!("unknown setting {{{i},{j}}}")))
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == TRIALS_HEADER => {}
        Some((_, first)) => {
            return Err(parse_error(
                path,
                1,
                format!("expected `{TRIALS_HEADER}`, found `{first}`"),
            ))
        }
        None => return Err(parse_error(path, 1, "empty file")),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(parse_error(
                path,
                line_no,
                format!("expected 5 fields, found {}", fields.len()),
            ));
        }
        records.push(TrialRecord {
            setting: parse_setting(path, line_no, fields[0])?,
            outcome_i: parse_outcome(path, line_no, fields[1])?,
            outcome_j: parse_outcome(path, line_no, fields[2])?,
            trial_index: fields[3]
                .parse()
                .map_err(|_| parse_error(path, line_no, format!("trial index `{}`", fields[3])))?,
            rng_stream_id: fields[4]
                .parse()
                .map_err(|_| parse_error(path, line_no, format!("stream id `{}`", fields[4])))?,
        });
    }
    Ok(records)
}

/// Read and group a trial file by context. Succeeds even when contexts are
/// missing; downstream statistics refuse incomplete sets.
pub fn ingest(path: &Path) -> Result<(Vec<TrialRecord>, crate::analysis::ContextBatches)> {
    let records = read_trials(path)?;
    let batches = crate::analysis::group_by_context(&records);
    Ok((records, batches))
}

pub fn repeatability_to_string(records: &[RepeatabilityRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 16 + 128);
    out.push_str(REPEATABILITY_HEADER);
    out.push('\n');
    out.push_str("# columns: observable branch first second post_selected run_index\n");
    for (run_index, rec) in records.iter().enumerate() {
        writeln!(
            out,
            "{} {} {:+} {:+} {} {}",
            rec.observable,
            if rec.bright_branch { "bright" } else { "dark" },
            rec.first_outcome,
            rec.second_outcome,
            u8::from(rec.post_selected),
            run_index
        )
        .expect("string write");
    }
    out
}

pub fn write_repeatability(path: &Path, records: &[RepeatabilityRecord]) -> Result<()> {
    std::fs::write(path, repeatability_to_string(records))?;
    Ok(())
}

pub fn read_repeatability(path: &Path) -> Result<Vec<RepeatabilityRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == REPEATABILITY_HEADER => {}
        Some((_, first)) => {
            return Err(parse_error(
                path,
                1,
                format!("expected `{REPEATABILITY_HEADER}`, found `{first}`"),
            ))
        }
        None => return Err(parse_error(path, 1, "empty file")),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(parse_error(
                path,
                line_no,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let observable: usize = fields[0]
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("observable `{}`", fields[0])))?;
        if observable > 3 {
            return Err(parse_error(
                path,
                line_no,
                format!("observable {observable} not in 0..4"),
            ));
        }
        let bright_branch = match fields[1] {
            "dark" => false,
            "bright" => true,
            other => return Err(parse_error(path, line_no, format!("branch `{other}`"))),
        };
        records.push(RepeatabilityRecord {
            observable,
            bright_branch,
            first_outcome: parse_outcome(path, line_no, fields[2])?,
            second_outcome: parse_outcome(path, line_no, fields[3])?,
            post_selected: match fields[4] {
                "0" => false,
                "1" => true,
                other => return Err(parse_error(path, line_no, format!("flag `{other}`"))),
            },
        });
    }
    Ok(records)
}
