//! Text rendering of activity matrices.
//!
//! Time runs left to right, one column per interval. Quiet columns show a
//! ruler: `|` every 24th interval, `+` every 8th, `-` otherwise, so a
//! default hourly grid reads in days and 8-hour shifts. Marks override the
//! ruler: `#` for raw activity; `X`, `>`, `<`, `@` for inferred episodes.
//!
//! Two block styles:
//! * raw — one labelled row per address (sorted by value) with its
//!   discriminating prefix length and stable-day count, then a per-/64
//!   summary line and an observation-window arrow;
//! * inferred — unlabelled rows in order of first activity, followed by the
//!   per-interval lower bounds, a ruler line, and the fencepost row
//!   (`!` assigned, `-` unknown, trailing `?` for the discarded final
//!   boundary).
//!
//! Columns are one character wide until a bound needs more digits; then
//! every cell widens to the digit width, right-aligned and space-padded.

use std::cmp::Ordering;
use std::fmt::Write;

use crate::activity::{
    fencepost_series, interval_lower_bounds, series_stat, EpisodeKind, EpisodeRow, SeriesStat,
};
use crate::addr::{Prefix, TimeGrid};
use crate::classify::{AddressClassification, IidClass};
use crate::error::{Error, Result};

/// Which matrix flavor to draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixView {
    Raw,
    Inferred,
}

/// One address's worth of display state, assembled by the pipeline.
#[derive(Clone, Debug)]
pub struct DisplayRow {
    pub classification: AddressClassification,
    /// Sorted active interval indices.
    pub active: Vec<u32>,
    /// Inferred episodes (one bridged span, or one short per active
    /// interval when bridging was not justified).
    pub episodes: Vec<EpisodeRow>,
}

fn background(col: u32) -> char {
    if col % 24 == 0 {
        '|'
    } else if col % 8 == 0 {
        '+'
    } else {
        '-'
    }
}

/// Order rows by activity history: earliest first activity wins; ties look
/// at each subsequent activity time, a row with no further activity sorting
/// after one that stayed active; address value breaks exact ties.
fn initial_activity_order(a: &DisplayRow, b: &DisplayRow) -> Ordering {
    let mut xs = a.active.iter();
    let mut ys = b.active.iter();
    loop {
        match (xs.next(), ys.next()) {
            (Some(x), Some(y)) if x == y => continue,
            (Some(x), Some(y)) => return x.cmp(y),
            (Some(_), None) => return Ordering::Less,
            (None, Some(_)) => return Ordering::Greater,
            (None, None) => {
                return a.classification.address.cmp(&b.classification.address)
            }
        }
    }
}

/// Right-align `ch` in a `width`-character cell.
fn push_cell(line: &mut String, ch: char, width: usize) {
    for _ in 1..width {
        line.push(' ');
    }
    line.push(ch);
}

fn ruler_line(intervals: u32, cell: usize) -> String {
    let mut line = String::new();
    for c in 0..intervals {
        push_cell(&mut line, background(c), cell);
    }
    line
}

/// The `hour of day` / tens / ones header over the matrix columns, each
/// line prefixed by `indent` spaces.
fn column_header(grid: &TimeGrid, indent: usize, cell: usize) -> [String; 3] {
    let label = if grid.interval_seconds() == 3600 { "hour of day" } else { "interval" };
    let width = grid.intervals() as usize * cell;
    let offset = indent + width.saturating_sub(label.len()) / 2;
    let mut tens = " ".repeat(indent);
    let mut ones = tens.clone();
    for c in 0..grid.intervals() {
        let tens_ch =
            if c % 10 == 0 { char::from_digit(c / 10 % 10, 10).unwrap() } else { ' ' };
        push_cell(&mut tens, tens_ch, cell);
        push_cell(&mut ones, char::from_digit(c % 10, 10).unwrap(), cell);
    }
    [format!("{}{}", " ".repeat(offset), label), tens, ones]
}

fn trim_trailing(mut s: String) -> String {
    s.truncate(s.trim_end().len());
    s
}

/// Raw activity block for one /64: classification columns, `#` marks, and
/// the share of addresses that look like temporary SLAAC.
pub fn render_raw_block(subnet: Prefix, rows: &[DisplayRow], grid: &TimeGrid) -> String {
    let mut rows: Vec<&DisplayRow> = rows.iter().collect();
    rows.sort_by_key(|r| r.classification.address);

    let addr_col = rows
        .iter()
        .map(|r| r.classification.address.to_string().len())
        .max()
        .unwrap_or(0)
        .max("IPv6 address".len());
    let dpl_col = rows
        .iter()
        .map(|r| r.classification.dpl.map_or(1, |d| d.to_string().len()))
        .max()
        .unwrap_or(1)
        .max(2);
    let sd_col =
        rows.iter().map(|r| r.classification.stable_days.to_string().len()).max().unwrap_or(1);
    let matrix_at = addr_col + 1 + dpl_col + 1 + sd_col + 1;

    let mut out = String::new();
    let [hours, tens, ones] = column_header(grid, matrix_at, 1);
    let blank = " ".repeat(addr_col);
    writeln!(out, "{blank} D").unwrap();
    let line = format!("{blank} {:<dpl_col$} {:<sd_col$}", "P", "S");
    writeln!(out, "{}{}", line, trim_trailing(hours[line.len()..].to_string())).unwrap();
    let line = format!("{:<addr_col$} {:<dpl_col$} {:<sd_col$}", "IPv6 address", "L", "D");
    writeln!(out, "{}{}", line, trim_trailing(tens[line.len()..].to_string())).unwrap();
    writeln!(
        out,
        "{} {} {} {}",
        "-".repeat(addr_col),
        "-".repeat(dpl_col),
        "-".repeat(sd_col),
        &ones[matrix_at..]
    )
    .unwrap();

    let mut randomized = 0usize;
    for row in &rows {
        let c = &row.classification;
        if c.iid_class == IidClass::RandomizedCandidate {
            randomized += 1;
        }
        let mut marks = ruler_line(grid.intervals(), 1).into_bytes();
        for &t in &row.active {
            marks[t as usize] = b'#';
        }
        let dpl = c.dpl.map_or_else(|| "-".to_string(), |d| d.to_string());
        writeln!(
            out,
            "{:<addr_col$} {:>dpl_col$} {:>sd_col$} {}",
            c.address.to_string(),
            dpl,
            c.stable_days,
            String::from_utf8(marks).unwrap()
        )
        .unwrap();
    }

    let pct = if rows.is_empty() { 0.0 } else { 100.0 * randomized as f64 / rows.len() as f64 };
    writeln!(out, "{} {}; Temporary SLAAC: {:.2}%", subnet, rows.len(), pct).unwrap();
    writeln!(out).unwrap();
    let label = format!("{subnet} ");
    let arrow = matrix_at + grid.intervals() as usize - label.len();
    writeln!(out, "{}{}>", label, "-".repeat(arrow.saturating_sub(1))).unwrap();
    out
}

/// Inferred assignment block for one /64: episode marks, per-interval lower
/// bounds, and the fencepost row. Needs at least two intervals — a single
/// interval has no fenceposts and nothing to infer.
pub fn render_inferred_block(rows: &[DisplayRow], grid: &TimeGrid) -> Result<String> {
    if grid.intervals() < 2 {
        return Err(Error::UnsupportedWindow {
            intervals: grid.intervals(),
            operation: "inferred matrix",
        });
    }
    let mut rows: Vec<&DisplayRow> = rows.iter().collect();
    rows.sort_by(|a, b| initial_activity_order(a, b));

    let episodes: Vec<EpisodeRow> =
        rows.iter().flat_map(|r| r.episodes.iter().copied()).collect();
    let bounds = interval_lower_bounds(&episodes, grid);
    let posts = fencepost_series(&episodes, grid);
    let max_bound = if bounds.0.is_empty() { 0 } else { series_stat(&bounds.0, SeriesStat::Max) };
    // Single digits pack shoulder to shoulder like the matrix marks; once a
    // bound needs more, add a space so adjacent totals stay readable.
    let cell = if max_bound < 10 { 1 } else { max_bound.to_string().len() + 1 };
    let indent = 2;

    let mut out = String::new();
    for line in column_header(grid, indent, cell) {
        writeln!(out, "{}", trim_trailing(line)).unwrap();
    }
    for row in &rows {
        let mut marks: Vec<char> =
            (0..grid.intervals()).map(background).collect();
        for e in &row.episodes {
            match e.kind() {
                EpisodeKind::Short => marks[e.first as usize] = 'X',
                EpisodeKind::Span => {
                    marks[e.first as usize] = '>';
                    marks[e.last as usize] = '<';
                    for t in e.first + 1..e.last {
                        marks[t as usize] = '@';
                    }
                }
            }
        }
        let mut line = " ".repeat(indent);
        for ch in marks {
            push_cell(&mut line, ch, cell);
        }
        writeln!(out, "{line}").unwrap();
    }

    let mut totals = " ".repeat(indent);
    for v in &bounds.0 {
        write!(totals, "{v:>cell$}").unwrap();
    }
    writeln!(out, "{totals}").unwrap();
    writeln!(out, "{}{}", " ".repeat(indent), ruler_line(grid.intervals(), cell)).unwrap();
    let mut posts_line = " ".repeat(indent);
    for &p in &posts.0 {
        push_cell(&mut posts_line, if p > 0 { '!' } else { '-' }, cell);
    }
    push_cell(&mut posts_line, '?', cell);
    writeln!(out, "{posts_line}").unwrap();
    Ok(out)
}

/// Per-/64 assignment matrix: one labelled fencepost row per prefix, `!`
/// where the prefix is inferred assigned. The final column is blank — the
/// last boundary is never inferable.
pub fn render_fencepost_matrix<'a>(
    series: impl IntoIterator<Item = (Prefix, &'a [u32])>,
    grid: &TimeGrid,
) -> String {
    let series: Vec<(String, &[u32])> =
        series.into_iter().map(|(p, s)| (p.to_string(), s)).collect();
    let label_col = series.iter().map(|(l, _)| l.len() + 4).max().unwrap_or(4).max(25);

    let mut out = String::new();
    for line in column_header(grid, label_col, 1) {
        writeln!(out, "{}", trim_trailing(line)).unwrap();
    }
    for (label, posts) in &series {
        let marks: String = posts.iter().map(|&p| if p > 0 { '!' } else { '-' }).collect();
        writeln!(out, "{label:<label_col$}{marks}").unwrap();
    }
    out
}
