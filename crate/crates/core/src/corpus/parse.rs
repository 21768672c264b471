use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use chrono::{DateTime, NaiveDate};
use csv::{ReaderBuilder, StringRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::RawEvent;

const MAX_WARNINGS: usize = 20;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    /// Data rows seen, excluding any header.
    pub rows: usize,
    pub skipped: usize,
    /// The first few skip reasons.
    pub warnings: Vec<String>,
}

impl ParseReport {
    fn skip(&mut self, line: u64, reason: impl std::fmt::Display) {
        self.skipped += 1;
        if self.warnings.len() < MAX_WARNINGS {
            self.warnings.push(format!("line {line}: {reason}"));
        }
        log::debug!("skipping line {line}: {reason}");
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(Error::io_at(path))
}

fn iso_millis(s: &str) -> Option<i64> {
    DateTime::parse_from_rfc3339(s).ok().map(|t| t.timestamp_millis())
}

fn field(rec: &StringRecord, i: usize) -> Option<&str> {
    rec.get(i).map(str::trim).filter(|s| !s.is_empty())
}

/// Runs `row` over every record, counting malformed records instead of failing.
fn scan<R: Read>(
    reader: R,
    delimiter: u8,
    has_headers: bool,
    mut row: impl FnMut(&StringRecord) -> std::result::Result<(), String>,
) -> Result<(Option<StringRecord>, ParseReport)> {
    let mut rdr = ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_headers)
        .flexible(true)
        .from_reader(reader);
    let headers = if has_headers {
        match rdr.headers() {
            Ok(h) => Some(h.clone()),
            Err(e) if e.is_io_error() => return Err(csv_io(e)),
            Err(e) => return Err(Error::UnsupportedFormat(format!("unreadable header: {e}"))),
        }
    } else {
        None
    };
    let mut report = ParseReport::default();
    let mut rec = StringRecord::new();
    loop {
        match rdr.read_record(&mut rec) {
            Ok(false) => break,
            Ok(true) => {
                report.rows += 1;
                let line = rec.position().map_or(0, |p| p.line());
                if let Err(reason) = row(&rec) {
                    report.skip(line, reason);
                }
            }
            Err(e) if e.is_io_error() => return Err(csv_io(e)),
            Err(e) => {
                report.rows += 1;
                let line = e.position().map_or(0, |p| p.line());
                report.skip(line, e);
            }
        }
    }
    Ok((headers, report))
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::UnsupportedFormat(format!("{other:?}")),
    }
}

/// YooChoose clicks: `session_id,timestamp(ISO-8601),item_id,category`, no header.
pub fn parse_yoochoose(path: impl AsRef<Path>) -> Result<(Vec<RawEvent>, ParseReport)> {
    parse_yoochoose_reader(open(path.as_ref())?)
}

pub fn parse_yoochoose_reader<R: Read>(reader: R) -> Result<(Vec<RawEvent>, ParseReport)> {
    let mut events = Vec::new();
    let (_, report) = scan(reader, b',', false, |rec| {
        if rec.len() != 4 {
            return Err(format!("expected 4 columns, found {}", rec.len()));
        }
        let session = field(rec, 0).ok_or("empty session id")?;
        let ts = field(rec, 1)
            .and_then(iso_millis)
            .ok_or("unparseable timestamp")?;
        let item = field(rec, 2).ok_or("empty item id")?;
        events.push(RawEvent::new(session, ts, item));
        Ok(())
    })?;
    Ok((events, report))
}

/// Diginetica item views: `sessionId;userId;itemId;timeframe;eventdate` with header.
///
/// The timestamp is the event date (UTC midnight) plus `timeframe`
/// milliseconds; events are emitted grouped by session in order of first
/// appearance and sorted by `timeframe` within each session.
pub fn parse_diginetica(path: impl AsRef<Path>) -> Result<(Vec<RawEvent>, ParseReport)> {
    parse_diginetica_reader(open(path.as_ref())?)
}

pub fn parse_diginetica_reader<R: Read>(reader: R) -> Result<(Vec<RawEvent>, ParseReport)> {
    // (session slot, timeframe, event)
    let mut rows: Vec<(usize, i64, RawEvent)> = Vec::new();
    let mut slots = std::collections::HashMap::<String, usize>::new();
    let (_, report) = scan(reader, b';', true, |rec| {
        if rec.len() != 5 {
            return Err(format!("expected 5 columns, found {}", rec.len()));
        }
        let session = field(rec, 0).ok_or("empty session id")?;
        let item = field(rec, 2).ok_or("empty item id")?;
        let timeframe: i64 = field(rec, 3)
            .and_then(|s| s.parse().ok())
            .ok_or("unparseable timeframe")?;
        let date = field(rec, 4)
            .and_then(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
            .ok_or("unparseable eventdate")?;
        let midnight = date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp_millis();
        let next = slots.len();
        let slot = *slots.entry(session.to_owned()).or_insert(next);
        rows.push((slot, timeframe, RawEvent::new(session, midnight + timeframe, item)));
        Ok(())
    })?;
    rows.sort_by_key(|(slot, tf, _)| (*slot, *tf));
    Ok((rows.into_iter().map(|(_, _, e)| e).collect(), report))
}

/// Generic sessions CSV with a required `session_id,timestamp,item_id`
/// header (any column order). Timestamps are epoch milliseconds or ISO-8601.
pub fn parse_generic(path: impl AsRef<Path>) -> Result<(Vec<RawEvent>, ParseReport)> {
    parse_generic_reader(open(path.as_ref())?)
}

pub fn parse_generic_reader<R: Read>(reader: R) -> Result<(Vec<RawEvent>, ParseReport)> {
    let mut events = Vec::new();
    let mut cols: Option<[usize; 3]> = None;
    let mut header_error = None;
    let (_, report) = {
        let mut first = true;
        scan(reader, b',', false, |rec| {
            if first {
                first = false;
                let find = |name: &str| rec.iter().position(|h| h.trim() == name);
                match (find("session_id"), find("timestamp"), find("item_id")) {
                    (Some(s), Some(t), Some(i)) => cols = Some([s, t, i]),
                    _ => {
                        header_error = Some(format!(
                            "generic sessions CSV needs a session_id,timestamp,item_id header, found {:?}",
                            rec.iter().collect::<Vec<_>>()
                        ))
                    }
                }
                return Ok(());
            }
            let [s, t, i] = cols.ok_or("missing header")?;
            let session = field(rec, s).ok_or("empty session id")?;
            let raw_ts = field(rec, t).ok_or("empty timestamp")?;
            let ts = raw_ts
                .parse::<i64>()
                .ok()
                .or_else(|| iso_millis(raw_ts))
                .ok_or("unparseable timestamp")?;
            let item = field(rec, i).ok_or("empty item id")?;
            events.push(RawEvent::new(session, ts, item));
            Ok(())
        })?
    };
    if let Some(e) = header_error {
        return Err(Error::UnsupportedFormat(e));
    }
    let mut report = report;
    // the header line was counted as a row
    report.rows = report.rows.saturating_sub(1);
    Ok((events, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yoochoose_row() {
        let (ev, rep) =
            parse_yoochoose_reader("1,2014-04-07T10:51:09.277Z,214536502,0\n".as_bytes()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].session_id, "1");
        assert_eq!(ev[0].item_id, "214536502");
        assert_eq!(ev[0].timestamp, 1_396_867_869_277);
        assert_eq!(rep.skipped, 0);
    }

    #[test]
    fn yoochoose_empty() {
        let (ev, rep) = parse_yoochoose_reader("".as_bytes()).unwrap();
        assert!(ev.is_empty());
        assert_eq!(rep, ParseReport::default());
    }

    #[test]
    fn yoochoose_one_malformed_among_ten() {
        let mut text = String::new();
        for i in 0..10 {
            if i == 4 {
                text.push_str("5,not-a-time,123,0\n");
            } else {
                text.push_str(&format!("{i},2014-04-07T10:51:0{i}.000Z,{},S\n", 100 + i));
            }
        }
        let (ev, rep) = parse_yoochoose_reader(text.as_bytes()).unwrap();
        assert_eq!(ev.len(), 9);
        assert_eq!(rep.skipped, 1);
        assert_eq!(rep.rows, 10);
        assert!(rep.warnings[0].starts_with("line 5"));
    }

    #[test]
    fn diginetica_row_and_order() {
        let text = "sessionId;userId;itemId;timeframe;eventdate\n\
                    1;NA;81766;526309;2016-05-09\n\
                    2;NA;5;200;2016-05-09\n\
                    2;NA;6;100;2016-05-09\n";
        let (ev, rep) = parse_diginetica_reader(text.as_bytes()).unwrap();
        assert_eq!(rep.skipped, 0);
        assert_eq!(ev[0].session_id, "1");
        assert_eq!(ev[0].item_id, "81766");
        let items: Vec<_> = ev[1..].iter().map(|e| e.item_id.as_str()).collect();
        assert_eq!(items, ["6", "5"]);
        assert!(ev[1].timestamp < ev[2].timestamp);
    }

    #[test]
    fn generic_needs_header() {
        let r = parse_generic_reader("1,2,3\n".as_bytes());
        assert!(matches!(r, Err(Error::UnsupportedFormat(_))));
        let (ev, rep) = parse_generic_reader(
            "item_id,session_id,timestamp\nA,s1,1000\nB,s1,2016-05-09T00:00:01Z\nC,s2,x\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0], RawEvent::new("s1", 1000, "A"));
        assert_eq!(rep.rows, 3);
        assert_eq!(rep.skipped, 1);
    }

    #[test]
    fn missing_file_is_io_error() {
        let e = parse_yoochoose("/nonexistent/clicks.dat").unwrap_err();
        assert_eq!(e.class(), "io");
    }
}
