//! Stream files and run logs.
//!
//! A stream file is plain whitespace-separated text:
//!
//! ```text
//! version=1 N=2 D=1 T=2
//! p 0.0
//! p 1.0
//! o 1.0
//! p 0.0
//! p 2.0
//! o 10.0
//! ```
//!
//! The header is followed by `T` blocks of `N` prediction rows (`p`) and one outcome
//! row (`o`), each holding `D` decimals. Blank lines and lines starting with `#` are
//! ignored on input. Numbers are written in the shortest form that parses back to the
//! same `f64`.
//!
//! A run log is JSON Lines: one [`RoundRecord`] per line, then a final line holding
//! the [`RunSummary`] (algorithm name plus [`RegretReport`]).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregator::RoundRecord;
use crate::diagnostics::RegretReport;
use crate::error::{Error, Result};
use crate::stream::{Round, Stream};
use crate::vector::PredictionVector;

pub const STREAM_VERSION: u32 = 1;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

struct Header {
    num_experts: usize,
    dimension: usize,
    rounds: usize,
}

fn parse_header(line_no: usize, line: &str) -> Result<Header> {
    let mut version = None;
    let (mut n, mut d, mut t) = (None, None, None);
    for field in line.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("malformed header field {field:?}")))?;
        let value: usize = value
            .parse()
            .map_err(|_| parse_err(line_no, format!("header field {key} is not a count")))?;
        let slot = match key {
            "version" => &mut version,
            "N" => &mut n,
            "D" => &mut d,
            "T" => &mut t,
            _ => return Err(parse_err(line_no, format!("unknown header field {key:?}"))),
        };
        if slot.replace(value).is_some() {
            return Err(parse_err(line_no, format!("duplicate header field {key}")));
        }
    }
    match version {
        Some(v) if v == STREAM_VERSION as usize => {}
        Some(v) => {
            return Err(parse_err(
                line_no,
                format!("unsupported stream version {v}"),
            ))
        }
        None => return Err(parse_err(line_no, "header is missing version=")),
    }
    let missing = |k: &str| parse_err(line_no, format!("header is missing {k}="));
    let header = Header {
        num_experts: n.ok_or_else(|| missing("N"))?,
        dimension: d.ok_or_else(|| missing("D"))?,
        rounds: t.ok_or_else(|| missing("T"))?,
    };
    if header.num_experts == 0 || header.dimension == 0 {
        return Err(parse_err(line_no, "header needs N >= 1 and D >= 1"));
    }
    Ok(header)
}

fn parse_row(line_no: usize, body: &str, dimension: usize) -> Result<PredictionVector> {
    let coords = body
        .split_whitespace()
        .map(|tok| {
            let x: f64 = tok
                .parse()
                .map_err(|_| parse_err(line_no, format!("{tok:?} is not a number")))?;
            if !x.is_finite() {
                return Err(parse_err(line_no, format!("non-finite value {tok:?}")));
            }
            Ok(x)
        })
        .collect::<Result<Vec<f64>>>()?;
    if coords.len() != dimension {
        return Err(parse_err(
            line_no,
            format!("expected {dimension} values, found {}", coords.len()),
        ));
    }
    PredictionVector::new(coords).map_err(|e| parse_err(line_no, e.to_string()))
}

/// Parses a stream file from any reader.
pub fn read_stream_from<R: BufRead>(reader: R) -> Result<Stream> {
    let mut lines = reader
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            l.as_ref()
                .map(|s| {
                    let s = s.trim();
                    !s.is_empty() && !s.starts_with('#')
                })
                .unwrap_or(true)
        });

    let (header_line, header) = match lines.next() {
        Some((no, line)) => (no, line?),
        None => return Err(parse_err(1, "empty stream file")),
    };
    let header = parse_header(header_line, &header)?;

    let mut rounds = Vec::with_capacity(header.rounds.min(1 << 20));
    let mut last_line = header_line;
    for round in 1..=header.rounds {
        let mut predictions = Vec::with_capacity(header.num_experts);
        loop {
            let (no, line) = match lines.next() {
                Some((no, line)) => (no, line?),
                None => {
                    return Err(parse_err(
                        last_line + 1,
                        format!("round {round}: unexpected end of file"),
                    ))
                }
            };
            last_line = no;
            let line = line.trim();
            let (tag, body) = line.split_at(line.find(char::is_whitespace).unwrap_or(line.len()));
            match tag {
                "p" if predictions.len() < header.num_experts => {
                    predictions.push(parse_row(no, body, header.dimension)?);
                }
                "p" => {
                    return Err(parse_err(
                        no,
                        format!(
                            "round {round}: more than N={} prediction rows",
                            header.num_experts
                        ),
                    ))
                }
                "o" if predictions.len() == header.num_experts => {
                    let outcome = parse_row(no, body, header.dimension)?;
                    rounds.push(Round::new(predictions, outcome));
                    break;
                }
                "o" => {
                    return Err(parse_err(
                        no,
                        format!(
                            "round {round}: outcome after {} of N={} prediction rows",
                            predictions.len(),
                            header.num_experts
                        ),
                    ))
                }
                _ => {
                    return Err(parse_err(
                        no,
                        format!("round {round}: expected a 'p' or 'o' row, found {tag:?}"),
                    ))
                }
            }
        }
    }
    if let Some((no, line)) = lines.next() {
        line?;
        return Err(parse_err(
            no,
            format!(
                "content after the {} rounds declared in the header",
                header.rounds
            ),
        ));
    }
    Stream::new(header.num_experts, header.dimension, rounds)
}

pub fn read_stream(path: impl AsRef<Path>) -> Result<Stream> {
    read_stream_from(BufReader::new(File::open(path)?))
}

fn write_row<W: Write>(w: &mut W, tag: &str, v: &PredictionVector) -> std::io::Result<()> {
    w.write_all(tag.as_bytes())?;
    for x in v.as_slice() {
        // Debug formatting of f64 is the shortest round-trip representation.
        write!(w, " {x:?}")?;
    }
    w.write_all(b"\n")
}

pub fn write_stream_to<W: Write>(mut w: W, stream: &Stream) -> Result<()> {
    writeln!(
        w,
        "version={STREAM_VERSION} N={} D={} T={}",
        stream.num_experts(),
        stream.dimension(),
        stream.len()
    )?;
    for round in stream.rounds() {
        for p in &round.predictions {
            write_row(&mut w, "p", p)?;
        }
        write_row(&mut w, "o", &round.outcome)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stream(path: impl AsRef<Path>, stream: &Stream) -> Result<()> {
    write_stream_to(BufWriter::new(File::create(path)?), stream)
}

/// Final line of a run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub report: RegretReport,
}

/// Incremental run-log writer.
pub struct RunLogWriter<W: Write> {
    inner: W,
}

impl<W: Write> RunLogWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn record(&mut self, record: &RoundRecord) -> Result<()> {
        serde_json::to_writer(&mut self.inner, record).map_err(std::io::Error::from)?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self, summary: &RunSummary) -> Result<W> {
        serde_json::to_writer(&mut self.inner, summary).map_err(std::io::Error::from)?;
        self.inner.write_all(b"\n")?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// A parsed run log.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
}

pub fn read_run_log_from<R: BufRead>(reader: R) -> Result<RunLog> {
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let Some((last, body)) = lines.split_last() else {
        return Err(parse_err(1, "empty run log"));
    };
    let records = body
        .iter()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str::<RoundRecord>(line)
                .map_err(|e| parse_err(i + 1, format!("bad round record: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary: RunSummary = serde_json::from_str(last).map_err(|e| {
        parse_err(
            lines.len(),
            format!("bad or missing final report line: {e}"),
        )
    })?;
    if summary.report.rounds != records.len() {
        return Err(parse_err(
            lines.len(),
            format!(
                "report covers {} rounds but the log holds {} records",
                summary.report.rounds,
                records.len()
            ),
        ));
    }
    Ok(RunLog { records, summary })
}

pub fn read_run_log(path: impl AsRef<Path>) -> Result<RunLog> {
    read_run_log_from(BufReader::new(File::open(path)?))
}
