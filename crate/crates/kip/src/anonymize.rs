//! Longest-match truncation against an aggregate set.
//!
//! Each address maps to the longest aggregate prefix containing it and is
//! replaced by that prefix's zero-filled base, so everything published is
//! covered by the set's k-guarantee. Addresses matching nothing are either
//! suppressed (a sentinel keeps line counts honest) or folded into the
//! recorded root catch-all, per the set's residual policy.

use std::io::{BufRead, Write};

use crate::addr::{truncate_to, Address128};
use crate::aggregate::{AggregateSet, ResidualPolicy};
use crate::error::{Error, Result};

const NO_CHILD: u32 = u32::MAX;

/// Bitwise longest-prefix matcher over aggregate prefixes (lengths 0..=64).
pub struct Matcher {
    children: Vec<[u32; 2]>,
    terminal: Vec<Option<u8>>,
}

impl Matcher {
    fn node(&mut self) -> u32 {
        self.children.push([NO_CHILD; 2]);
        self.terminal.push(None);
        (self.children.len() - 1) as u32
    }

    fn insert(&mut self, base: Address128, length: u8) -> Result<()> {
        let mut cursor = 0usize;
        for pos in 1..=length {
            let side = usize::from(base.bit(pos));
            let next = self.children[cursor][side];
            cursor = if next == NO_CHILD {
                let fresh = self.node();
                self.children[cursor][side] = fresh;
                fresh as usize
            } else {
                next as usize
            };
        }
        if self.terminal[cursor].is_some() {
            return Err(Error::DuplicatePrefix(truncate_to(base, length).to_string()));
        }
        self.terminal[cursor] = Some(length);
        Ok(())
    }

    /// Length of the longest matching aggregate prefix, if any.
    pub fn longest_match(&self, a: Address128) -> Option<u8> {
        let mut best = self.terminal[0];
        let mut cursor = 0usize;
        for pos in 1..=64 {
            let next = self.children[cursor][usize::from(a.bit(pos))];
            if next == NO_CHILD {
                break;
            }
            cursor = next as usize;
            best = self.terminal[cursor].or(best);
        }
        best
    }
}

/// Build the matcher for a set. Fails on prefixes longer than /64 (which a
/// well-formed set cannot contain) and on duplicates.
pub fn build_matcher(set: &AggregateSet) -> Result<Matcher> {
    let mut m = Matcher { children: Vec::new(), terminal: Vec::new() };
    m.node();
    for entry in &set.entries {
        if entry.prefix.length() > 64 {
            return Err(Error::BadConfig(format!(
                "aggregate prefix {} longer than /64",
                entry.prefix
            )));
        }
        m.insert(entry.prefix.base(), entry.prefix.length())?;
    }
    Ok(m)
}

/// How an address was disposed of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchOutcome {
    /// Truncated to a matching aggregate of this length.
    Matched(u8),
    /// No match; folded into the root catch-all of this length.
    CatchAll(u8),
    /// No match under the suppress policy.
    Suppressed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnonymizedAddress {
    /// Zero-filled truncation; `::` when suppressed.
    pub output: Address128,
    pub outcome: MatchOutcome,
}

impl AnonymizedAddress {
    /// Truncation length applied, or `None` when suppressed.
    pub fn matched_length(&self) -> Option<u8> {
        match self.outcome {
            MatchOutcome::Matched(n) | MatchOutcome::CatchAll(n) => Some(n),
            MatchOutcome::Suppressed => None,
        }
    }
}

/// Map one address through the matcher.
pub fn anonymize_address(
    a: Address128,
    matcher: &Matcher,
    policy: ResidualPolicy,
) -> AnonymizedAddress {
    if let Some(length) = matcher.longest_match(a) {
        return AnonymizedAddress {
            output: truncate_to(a, length).base(),
            outcome: MatchOutcome::Matched(length),
        };
    }
    match policy {
        ResidualPolicy::Suppress => AnonymizedAddress {
            output: Address128::UNSPECIFIED,
            outcome: MatchOutcome::Suppressed,
        },
        ResidualPolicy::RootCatchAll(root) => AnonymizedAddress {
            output: truncate_to(a, root.length()).base(),
            outcome: MatchOutcome::CatchAll(root.length()),
        },
    }
}

#[derive(Clone, Debug)]
pub struct StreamOptions {
    /// Append `/length` to rewritten addresses.
    pub with_length: bool,
    /// Replacement for the address field of suppressed lines.
    pub sentinel: String,
}

impl Default for StreamOptions {
    fn default() -> Self {
        StreamOptions { with_length: false, sentinel: "-".to_string() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub lines: u64,
    pub rewritten: u64,
    pub suppressed: u64,
    /// Lines without a parseable address field, forwarded untouched.
    pub passthrough: u64,
}

/// Rewrite the address field (second tab-separated column) of every log
/// line, preserving all other fields byte for byte. Output always has as
/// many lines as the input.
pub fn anonymize_stream(
    input: impl BufRead,
    mut out: impl Write,
    matcher: &Matcher,
    policy: ResidualPolicy,
    options: &StreamOptions,
) -> Result<StreamStats> {
    let mut stats = StreamStats::default();
    for line in input.lines() {
        let line = line?;
        stats.lines += 1;
        let mut fields: Vec<&str> = line.split('\t').collect();
        let Some(address) = fields.get(1).and_then(|s| s.parse::<Address128>().ok()) else {
            stats.passthrough += 1;
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
            continue;
        };
        let anon = anonymize_address(address, matcher, policy);
        let replacement = match anon.outcome {
            MatchOutcome::Suppressed => {
                stats.suppressed += 1;
                options.sentinel.clone()
            }
            MatchOutcome::Matched(n) | MatchOutcome::CatchAll(n) => {
                stats.rewritten += 1;
                if options.with_length {
                    format!("{}/{}", anon.output, n)
                } else {
                    anon.output.to_string()
                }
            }
        };
        fields[1] = &replacement;
        out.write_all(fields.join("\t").as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(stats)
}
