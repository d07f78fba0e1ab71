//! Network summaries and aggregate-set evaluation tables.
//!
//! Machine-readable emissions are tab-separated lines under `#` comment
//! headers so goldens diff cleanly.

use std::fmt::Write as _;

use crate::activity::{series_stat, SeriesStat};
use crate::aggregate::AggregateSet;
use crate::anonymize::build_matcher;
use crate::error::Result;
use crate::pipeline::AnalysisRun;

/// Activity totals and assignment lower bounds for one observation window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NetworkSummary {
    pub active_48s: u64,
    pub active_64s: u64,
    pub active_addresses: u64,
    /// Simultaneously assigned /64 prefixes, from the accumulated
    /// fencepost series.
    pub prefix_bound_max: u32,
    pub prefix_bound_median: u32,
    /// Simultaneously assigned addresses, from the network-wide interval
    /// bounds.
    pub address_bound_max: u32,
    pub address_bound_median: u32,
}

pub fn summarize(run: &AnalysisRun) -> NetworkSummary {
    let stat = |series: &[u32], s| if series.is_empty() { 0 } else { series_stat(series, s) };
    NetworkSummary {
        active_48s: run.active_48s() as u64,
        active_64s: run.subnets.len() as u64,
        active_addresses: run.total_addresses() as u64,
        prefix_bound_max: stat(&run.prefix_fenceposts, SeriesStat::Max),
        prefix_bound_median: stat(&run.prefix_fenceposts, SeriesStat::Median),
        address_bound_max: stat(&run.interval_bounds.0, SeriesStat::Max),
        address_bound_median: stat(&run.interval_bounds.0, SeriesStat::Median),
    }
}

impl NetworkSummary {
    pub fn human(&self) -> String {
        format!(
            "active prefixes: {} /48, {} /64; active addresses: {}\n\
             lower bound, simultaneously assigned /64 prefixes: maximum {} (median {})\n\
             lower bound, simultaneously assigned addresses:    maximum {} (median {})\n",
            self.active_48s,
            self.active_64s,
            self.active_addresses,
            self.prefix_bound_max,
            self.prefix_bound_median,
            self.address_bound_max,
            self.address_bound_median,
        )
    }

    pub fn tsv(&self) -> String {
        let mut out = String::from("# kip network summary v1\n");
        for (key, value) in [
            ("active_48s", self.active_48s),
            ("active_64s", self.active_64s),
            ("active_addresses", self.active_addresses),
            ("prefix_bound_max", self.prefix_bound_max as u64),
            ("prefix_bound_median", self.prefix_bound_median as u64),
            ("address_bound_max", self.address_bound_max as u64),
            ("address_bound_median", self.address_bound_median as u64),
        ] {
            writeln!(out, "{key}\t{value}").unwrap();
        }
        out
    }
}

/// What one histogram unit stands for in [`length_distribution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weighting {
    /// Each emitted aggregate counts once.
    PerAggregate,
    /// Each observed /64 counts once, attributed to its longest matching
    /// aggregate.
    PerCovered64,
}

impl Weighting {
    pub fn token(self) -> &'static str {
        match self {
            Weighting::PerAggregate => "aggregate",
            Weighting::PerCovered64 => "covered64",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LengthBucket {
    pub length: u8,
    pub count: u64,
    /// Fraction of all units at this length or shorter.
    pub cumulative: f64,
}

/// Histogram plus CDF over prefix lengths.
pub fn length_histogram(lengths: impl IntoIterator<Item = u8>) -> Vec<LengthBucket> {
    let mut counts = [0u64; 129];
    let mut total = 0u64;
    for len in lengths {
        counts[len as usize] += 1;
        total += 1;
    }
    let mut running = 0;
    (0..=128u8)
        .filter(|&l| counts[l as usize] > 0)
        .map(|length| {
            let count = counts[length as usize];
            running += count;
            LengthBucket { length, count, cumulative: running as f64 / total as f64 }
        })
        .collect()
}

/// Length distribution of a set, one unit per observed /64 (given as
/// subnet values). /64s no aggregate covers are tallied separately.
pub struct CoverageLengths {
    pub lengths: Vec<u8>,
    pub unmatched: u64,
}

pub fn covered64_lengths(
    set: &AggregateSet,
    subnets: impl IntoIterator<Item = u64>,
) -> Result<CoverageLengths> {
    let matcher = build_matcher(set)?;
    let mut lengths = Vec::new();
    let mut unmatched = 0;
    for subnet in subnets {
        let base = crate::addr::Address128::from_bits((subnet as u128) << 64);
        match matcher.longest_match(base) {
            Some(len) => lengths.push(len),
            None => unmatched += 1,
        }
    }
    Ok(CoverageLengths { lengths, unmatched })
}

/// Render histogram rows as `<length>\t<count>\t<cumulative fraction>`.
pub fn length_table(buckets: &[LengthBucket], weighting: Weighting) -> String {
    let mut out = String::from("# kip aggregate length distribution v1\n");
    writeln!(out, "# weighting {}", weighting.token()).unwrap();
    for b in buckets {
        writeln!(out, "{}\t{}\t{:.6}", b.length, b.count, b.cumulative).unwrap();
    }
    out
}
