//! Fixation logs as CSV, one fixation per row.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Location, Result, Violation};
use crate::types::{Fixation, FixationLog, Task, TaskKind};

pub const HEADER: [&str; 8] = [
    "participant_id",
    "task_kind",
    "task_label",
    "collage_id",
    "onset_ms",
    "duration_ms",
    "x_px",
    "y_px",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    participant_id: String,
    task_kind: TaskKind,
    task_label: String,
    collage_id: String,
    onset_ms: f64,
    duration_ms: f64,
    x_px: f64,
    y_px: f64,
}

struct Group {
    participant: String,
    task: Task,
    collage: String,
    first_line: u64,
    lines: Vec<u64>,
    fixations: Vec<Fixation>,
}

/// Parses every log in a CSV stream, in order of first appearance.
///
/// Rows of one (participant, collage, task) group must be sorted by onset but
/// groups may interleave.
pub fn parse_logs<R: Read>(reader: R) -> Result<Vec<FixationLog>, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| line_error(1, e))?.clone();
    if headers.iter().ne(HEADER) {
        return Err(FormatError::Line {
            line: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut groups: Vec<Group> = Vec::new();
    let mut index: HashMap<(String, String, Task), usize> = HashMap::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(|e| {
        let line = e.position().map_or(0, |p| p.line());
        line_error(line, e)
    })? {
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| line_error(line, e))?;
        let task = Task::new(row.task_kind, row.task_label);
        let key = (row.participant_id, row.collage_id, task);
        let idx = *index.entry(key.clone()).or_insert_with(|| {
            groups.push(Group {
                participant: key.0,
                task: key.2,
                collage: key.1,
                first_line: line,
                lines: Vec::new(),
                fixations: Vec::new(),
            });
            groups.len() - 1
        });
        let g = &mut groups[idx];
        g.lines.push(line);
        g.fixations.push(Fixation::new(row.x_px, row.y_px, row.duration_ms, row.onset_ms));
    }
    groups
        .into_iter()
        .map(|g| {
            FixationLog::new(g.participant, g.task, g.collage, g.fixations).map_err(|v| {
                let line = match &v {
                    Violation::NonFinite(Location::Fixation { index })
                    | Violation::NegativeDuration(Location::Fixation { index })
                    | Violation::OutOfOrder(Location::Fixation { index }) => g.lines[*index],
                    _ => g.first_line,
                };
                FormatError::Line {
                    line,
                    message: v.to_string(),
                }
            })
        })
        .collect()
}

fn line_error(line: u64, e: csv::Error) -> FormatError {
    FormatError::Line {
        line,
        message: e.to_string(),
    }
}

pub fn read_logs(path: &Path) -> Result<Vec<FixationLog>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_logs(file).map_err(|k| Error::format(path, k))
}

pub fn format_logs<W: Write>(writer: W, logs: &[FixationLog]) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(HEADER)?;
    for log in logs {
        for f in log.fixations() {
            w.serialize(Row {
                participant_id: log.participant_id().to_owned(),
                task_kind: log.task().kind,
                task_label: log.task().label.clone(),
                collage_id: log.collage_id().to_owned(),
                onset_ms: f.onset_ms,
                duration_ms: f.duration_ms,
                x_px: f.x,
                y_px: f.y,
            })?;
        }
    }
    w.flush()
}

pub fn write_logs(path: &Path, logs: &[FixationLog]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    format_logs(std::io::BufWriter::new(file), logs).map_err(|e| Error::io(path, e))
}
