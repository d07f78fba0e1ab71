//! Activity log parsing.
//!
//! A log line is `<timestamp>\t<ipv6-address>` with any further
//! tab-separated fields ignored. Timestamps are integer epoch seconds or
//! ISO-8601 UTC. Lines that fail to parse or fall outside the grid window
//! are counted, never silently dropped, so
//! `input lines = parsed + malformed + out_of_window` always holds.

use std::collections::BTreeMap;
use std::io::BufRead;

use chrono::DateTime;

use crate::activity::{ActivityRow, RowSetBuilder};
use crate::addr::{Address128, TimeGrid};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogEvent {
    pub timestamp: i64,
    pub address: Address128,
}

/// Line disposition counters for one ingest run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LineCounts {
    pub parsed: u64,
    pub malformed: u64,
    pub out_of_window: u64,
}

impl LineCounts {
    pub fn total(&self) -> u64 {
        self.parsed + self.malformed + self.out_of_window
    }
}

/// Epoch seconds from either an integer or an ISO-8601 instant.
pub fn parse_timestamp(s: &str) -> Result<i64> {
    if let Ok(epoch) = s.parse::<i64>() {
        return Ok(epoch);
    }
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.timestamp())
        .map_err(|_| Error::TimestampParse(s.to_string()))
}

/// Parse one log line; `Err` means malformed.
pub fn parse_log_line(line: &str) -> Result<LogEvent> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut fields = line.split('\t');
    let (Some(ts), Some(addr)) = (fields.next(), fields.next()) else {
        return Err(Error::TimestampParse(line.to_string()));
    };
    Ok(LogEvent { timestamp: parse_timestamp(ts)?, address: addr.parse()? })
}

/// Parse a whole log eagerly. In-window events only; see [`LineCounts`]
/// for what happened to the rest.
pub fn read_log(input: impl BufRead, grid: &TimeGrid) -> Result<(Vec<LogEvent>, LineCounts)> {
    let mut events = Vec::new();
    let counts = each_event(input, grid, |event| events.push(event))?;
    Ok((events, counts))
}

/// Stream a log straight into per-/64 activity rows without keeping the
/// events around; this is the scale path.
pub fn ingest_rows(
    input: impl BufRead,
    grid: &TimeGrid,
) -> Result<(BTreeMap<u64, Vec<ActivityRow>>, LineCounts)> {
    let mut builder = RowSetBuilder::new(*grid);
    let counts = each_event(input, grid, |event| builder.add(event.address, event.timestamp))?;
    Ok((builder.finish(), counts))
}

fn each_event(
    input: impl BufRead,
    grid: &TimeGrid,
    mut sink: impl FnMut(LogEvent),
) -> Result<LineCounts> {
    let mut counts = LineCounts::default();
    for line in input.lines() {
        let line = line?;
        match parse_log_line(&line) {
            Ok(event) if grid.interval_of(event.timestamp).is_ok() => {
                counts.parsed += 1;
                sink(event);
            }
            Ok(_) => counts.out_of_window += 1,
            Err(_) => counts.malformed += 1,
        }
    }
    Ok(counts)
}

/// Scan for the earliest/latest parseable timestamp (for grid inference).
pub fn scan_time_range(input: impl BufRead) -> Result<Option<(i64, i64)>> {
    let mut range: Option<(i64, i64)> = None;
    for line in input.lines() {
        let line = line?;
        if let Ok(event) = parse_log_line(&line) {
            range = Some(match range {
                None => (event.timestamp, event.timestamp),
                Some((lo, hi)) => (lo.min(event.timestamp), hi.max(event.timestamp)),
            });
        }
    }
    Ok(range)
}

/// Smallest interval-aligned grid covering `[min, max]`.
pub fn grid_covering(min: i64, max: i64, interval_seconds: u32) -> Result<TimeGrid> {
    assert!(min <= max, "empty time range");
    let step = interval_seconds as i64;
    let start = min.div_euclid(step) * step;
    let intervals = ((max - start) / step + 1)
        .try_into()
        .map_err(|_| Error::BadGrid("window too wide for grid".into()))?;
    TimeGrid::new(start, interval_seconds, intervals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::parse_address;

    #[test]
    fn line_forms() {
        let e = parse_log_line("1490403600\t2001:db8::1").unwrap();
        assert_eq!(e.timestamp, 1_490_403_600);
        assert_eq!(e.address, parse_address("2001:db8::1").unwrap());
        // ISO-8601, trailing fields, carriage return
        let e = parse_log_line("2017-03-25T01:00:00Z\t2001:db8::1\tGET /x\t200\r").unwrap();
        assert_eq!(e.timestamp, 1_490_403_600);
        assert!(parse_log_line("1490403600 2001:db8::1").is_err()); // space, not tab
        assert!(parse_log_line("soon\t2001:db8::1").is_err());
        assert!(parse_log_line("1490403600\tnowhere").is_err());
        assert!(parse_log_line("").is_err());
    }

    #[test]
    fn accounting_invariant() {
        let grid = TimeGrid::new(1_490_400_000, 3_600, 24).unwrap();
        let log = "1490400000\t2001:db8::1\n\
                   garbage\n\
                   1490300000\t2001:db8::2\n\
                   1490486400\t2001:db8::3\n\
                   1490403600\t2001:db8::4\n";
        let (events, counts) = read_log(log.as_bytes(), &grid).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(counts, LineCounts { parsed: 2, malformed: 1, out_of_window: 2 });
        assert_eq!(counts.total(), 5);
    }

    #[test]
    fn streaming_matches_eager() {
        let grid = TimeGrid::new(0, 3_600, 24).unwrap();
        let log = "0\t2001:db8::a:b:c:d\n7200\t2001:db8::a:b:c:d\n3600\t2001:db9::1:2:3:4\n";
        let (events, _) = read_log(log.as_bytes(), &grid).unwrap();
        let eager = crate::activity::build_rows(
            events.iter().map(|e| (e.address, e.timestamp)),
            &grid,
        );
        let (streamed, counts) = ingest_rows(log.as_bytes(), &grid).unwrap();
        assert_eq!(streamed, eager);
        assert_eq!(counts.parsed, 3);
    }

    #[test]
    fn grid_inference_aligns_and_covers() {
        let g = grid_covering(5_000, 10_701, 3_600).unwrap();
        assert_eq!(g.start(), 3_600);
        assert_eq!(g.intervals(), 2);
        assert!(g.interval_of(5_000).is_ok());
        assert!(g.interval_of(10_701).is_ok());
        let g = grid_covering(-100, -100, 60).unwrap();
        assert_eq!(g.start(), -120);
        assert_eq!(g.intervals(), 1);
    }

    #[test]
    fn time_range_scan() {
        let log = "100\t2001:db8::1\njunk\n50\t2001:db8::2\n900\t2001:db8::3\n";
        assert_eq!(scan_time_range(log.as_bytes()).unwrap(), Some((50, 900)));
        assert_eq!(scan_time_range("junk\n".as_bytes()).unwrap(), None);
    }
}
