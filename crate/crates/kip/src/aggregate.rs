//! k-anonymous prefix synthesis over per-/64 assignment series.
//!
//! Every observed /64 becomes a leaf of a path-compressed binary trie keyed
//! by its high 64 bits. Leaves carry an assignment series (one counter per
//! fencepost); internal nodes start empty. A post-order pass then merges
//! upward: a node whose series statistic falls short of `k` surrenders its
//! series to the nearest ancestor branch point, while a node that clears
//! `k` is emitted and contributes nothing further — aggregates are reported
//! where the guarantee is first met, not cumulatively. Whatever reaches the
//! root unsatisfied is the residual.
//!
//! The emitted prefix lengths answer "how short must a prefix be before it
//! is k-anonymous here?", which is the whole point: truncating addresses to
//! a fixed /48 (or any fixed length) is either too coarse or not anonymous
//! at all, depending on assignment practice.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::activity::{series_stat, spanning_counts, EpisodeRow, FencepostSeries, SeriesStat};
use crate::addr::{Address128, Prefix, TimeGrid};
use crate::error::{Error, Result};

/// Integer counters, one per fencepost, for one trie node's scope.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentSeries(pub Vec<u32>);

impl AsRef<[u32]> for AssignmentSeries {
    fn as_ref(&self) -> &[u32] {
        &self.0
    }
}

impl From<FencepostSeries> for AssignmentSeries {
    fn from(s: FencepostSeries) -> Self {
        AssignmentSeries(s.0)
    }
}

/// Addresses provably assigned at each fencepost: the count of episodes
/// spanning it. Distinct episodes are distinct addresses, and the counts
/// are taken at one shared instant, so these sum across /64s.
pub fn address_count_series(episodes: &[EpisodeRow], grid: &TimeGrid) -> AssignmentSeries {
    AssignmentSeries(spanning_counts(episodes, grid))
}

/// What a leaf's series counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountMode {
    /// Binary per /64: was the prefix assigned at this fencepost at all?
    /// Aggregates then cover at least k simultaneously assigned /64s.
    PrefixCount,
    /// Per-address counts: aggregates cover at least k simultaneously
    /// assigned addresses.
    AddressCount,
}

impl CountMode {
    pub fn token(self) -> &'static str {
        match self {
            CountMode::PrefixCount => "prefix",
            CountMode::AddressCount => "address",
        }
    }
}

/// Synthesis parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KipConfig {
    /// Anonymity floor; at least 2.
    pub k: u32,
    /// Statistic the floor applies to (min is the strict reading; median
    /// tolerates edge-of-window dips).
    pub stat: SeriesStat,
    pub mode: CountMode,
    /// Longest prefix allowed to be emitted (default 64).
    pub max_emit_length: u8,
}

impl KipConfig {
    pub fn new(k: u32, stat: SeriesStat, mode: CountMode) -> KipConfig {
        KipConfig { k, stat, mode, max_emit_length: 64 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::BadConfig(format!("k must be at least 2, got {}", self.k)));
        }
        if self.max_emit_length > 64 {
            return Err(Error::BadConfig(format!(
                "max_emit_length must be at most 64, got {}",
                self.max_emit_length
            )));
        }
        Ok(())
    }
}

/// Residual handling requested by the operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualMode {
    /// Leave sub-k leftovers out of the aggregate set (the strict default).
    Suppress,
    /// Record the trie root as a catch-all so every address maps somewhere,
    /// trading the guarantee for coverage.
    Root,
}

/// Residual handling as recorded in a finished set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualPolicy {
    Suppress,
    RootCatchAll(Prefix),
}

/// One emitted aggregate with its series summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AggregateEntry {
    pub prefix: Prefix,
    pub min: u32,
    pub median: u32,
    pub max: u32,
}

/// Where a set came from, enough to reproduce or sanity-check a join.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub config: KipConfig,
    pub grid: TimeGrid,
}

/// A finished aggregate set: the anonymization map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregateSet {
    /// Sorted by (base, length); prefixes may nest but never repeat.
    pub entries: Vec<AggregateEntry>,
    pub residual_policy: ResidualPolicy,
    pub provenance: Provenance,
}

/// Synthesis result: the set plus the full series behind each entry and the
/// unsatisfied residual, for audits (`emitted + residual = input`).
#[derive(Clone, Debug, PartialEq)]
pub struct Synthesis {
    pub set: AggregateSet,
    /// Parallel to `set.entries`.
    pub emitted_series: Vec<AssignmentSeries>,
    pub residual_series: AssignmentSeries,
}

impl Synthesis {
    /// Elementwise sum of every emitted series plus the residual; equals the
    /// elementwise sum of the input series by construction.
    pub fn total_series(&self) -> Vec<u32> {
        let mut total = self.residual_series.0.clone();
        for s in &self.emitted_series {
            for (acc, &v) in total.iter_mut().zip(&s.0) {
                *acc += v;
            }
        }
        total
    }
}

/// Path-compressed binary trie over /64 subnets.
#[derive(Debug)]
pub struct PrefixTrie {
    root: Option<TrieNode>,
    fenceposts: usize,
}

#[derive(Debug)]
struct TrieNode {
    /// High-64 bits of the covered prefix, trailing bits zero.
    bits: u64,
    /// Prefix length, 0..=64.
    length: u8,
    series: Vec<u32>,
    /// Present on branch nodes; children diverge at bit `length + 1`.
    children: Option<Box<(TrieNode, TrieNode)>>,
}

fn mask64(length: u8) -> u64 {
    match length {
        0 => 0,
        64 => u64::MAX,
        n => u64::MAX << (64 - n as u32),
    }
}

fn bit64(bits: u64, pos: u8) -> bool {
    (bits >> (64 - pos as u32)) & 1 == 1
}

impl TrieNode {
    fn prefix(&self) -> Prefix {
        Prefix::new(Address128::from_bits((self.bits as u128) << 64), self.length)
    }
}

/// Build the trie for a per-/64 series map. Series must all have the
/// grid's fencepost length; a one-interval grid has nothing to aggregate.
pub fn build_trie(per64: &BTreeMap<u64, AssignmentSeries>, grid: &TimeGrid) -> Result<PrefixTrie> {
    let f = grid.fenceposts() as usize;
    if f == 0 {
        return Err(Error::UnsupportedWindow { intervals: grid.intervals(), operation: "aggregation" });
    }
    for series in per64.values() {
        assert_eq!(series.0.len(), f, "series length must match the grid's fencepost count");
    }
    let entries: Vec<(u64, &AssignmentSeries)> = per64.iter().map(|(&k, v)| (k, v)).collect();
    let root = if entries.is_empty() { None } else { Some(build_node(&entries, f)) };
    Ok(PrefixTrie { root, fenceposts: f })
}

fn build_node(entries: &[(u64, &AssignmentSeries)], f: usize) -> TrieNode {
    if entries.len() == 1 {
        let (bits, series) = entries[0];
        return TrieNode { bits, length: 64, series: series.0.clone(), children: None };
    }
    // sorted input: the first/last pair realizes the shortest common prefix
    let first = entries[0].0;
    let last = entries[entries.len() - 1].0;
    let length = (first ^ last).leading_zeros() as u8;
    debug_assert!(length < 64, "duplicate keys cannot reach here");
    let split = entries.partition_point(|&(bits, _)| !bit64(bits, length + 1));
    debug_assert!(split > 0 && split < entries.len());
    let left = build_node(&entries[..split], f);
    let right = build_node(&entries[split..], f);
    TrieNode {
        bits: first & mask64(length),
        length,
        series: vec![0; f],
        children: Some(Box::new((left, right))),
    }
}

impl PrefixTrie {
    /// Root prefix: the meet of every covered /64. `None` when empty.
    pub fn root_prefix(&self) -> Option<Prefix> {
        self.root.as_ref().map(TrieNode::prefix)
    }
}

/// Run the post-order merge, producing the aggregate set.
pub fn synthesize_aggregates(
    trie: PrefixTrie,
    config: &KipConfig,
    residual: ResidualMode,
    grid: &TimeGrid,
) -> Result<Synthesis> {
    config.validate()?;
    let f = trie.fenceposts;
    let mut emitted: Vec<(Prefix, Vec<u32>)> = Vec::new();
    let root_prefix = trie.root_prefix();
    let residual_series = match trie.root {
        Some(root) => visit(root, config, f, &mut emitted),
        None => vec![0; f],
    };
    emitted.sort_by_key(|(p, _)| (p.base(), p.length()));
    let entries = emitted
        .iter()
        .map(|(prefix, series)| AggregateEntry {
            prefix: *prefix,
            min: series_stat(series, SeriesStat::Min),
            median: series_stat(series, SeriesStat::Median),
            max: series_stat(series, SeriesStat::Max),
        })
        .collect();
    let residual_policy = match (residual, root_prefix) {
        (ResidualMode::Suppress, _) | (ResidualMode::Root, None) => ResidualPolicy::Suppress,
        (ResidualMode::Root, Some(p)) => ResidualPolicy::RootCatchAll(p),
    };
    Ok(Synthesis {
        set: AggregateSet {
            entries,
            residual_policy,
            provenance: Provenance { config: *config, grid: *grid },
        },
        emitted_series: emitted.into_iter().map(|(_, s)| AssignmentSeries(s)).collect(),
        residual_series: AssignmentSeries(residual_series),
    })
}

/// Returns the carry: this subtree's still-unsatisfied series.
fn visit(
    node: TrieNode,
    config: &KipConfig,
    f: usize,
    emitted: &mut Vec<(Prefix, Vec<u32>)>,
) -> Vec<u32> {
    let prefix = node.prefix();
    let TrieNode { mut series, children, length, .. } = node;
    if let Some(children) = children {
        let (left, right) = *children;
        for child in [left, right] {
            let carry = visit(child, config, f, emitted);
            for (acc, v) in series.iter_mut().zip(carry) {
                *acc = acc.checked_add(v).expect("assignment series overflow");
            }
        }
    }
    if length <= config.max_emit_length && series_stat(&series, config.stat) >= config.k {
        emitted.push((prefix, series));
        vec![0; f]
    } else {
        series
    }
}

// ---- aggregate set file format -------------------------------------------
//
// Line-oriented, tab-separated, '#'-prefixed headers:
//
//   # kip aggregate set v1
//   # k 2
//   # stat min
//   # mode prefix
//   # max-emit-length 64
//   # grid 1490400000 3600 24
//   # residual suppress
//   2001:db8:370::/55	2	2	3
//
// `residual` is either `suppress` or `root <prefix>`. Entries are sorted by
// (base, length). Reading a written file reproduces the set field for field.

const FORMAT_VERSION_LINE: &str = "kip aggregate set v1";

/// Serialize a set in the versioned text format.
pub fn write_aggregate_set(set: &AggregateSet, mut out: impl Write) -> Result<()> {
    let p = &set.provenance;
    writeln!(out, "# {FORMAT_VERSION_LINE}")?;
    writeln!(out, "# k {}", p.config.k)?;
    writeln!(out, "# stat {}", p.config.stat.token())?;
    writeln!(out, "# mode {}", p.config.mode.token())?;
    writeln!(out, "# max-emit-length {}", p.config.max_emit_length)?;
    writeln!(out, "# grid {} {} {}", p.grid.start(), p.grid.interval_seconds(), p.grid.intervals())?;
    match set.residual_policy {
        ResidualPolicy::Suppress => writeln!(out, "# residual suppress")?,
        ResidualPolicy::RootCatchAll(prefix) => writeln!(out, "# residual root {prefix}")?,
    }
    for e in &set.entries {
        writeln!(out, "{}\t{}\t{}\t{}", e.prefix, e.min, e.median, e.max)?;
    }
    Ok(())
}

/// Parse a set written by [`write_aggregate_set`]. Strict: unknown headers,
/// missing headers, unsorted or duplicate entries are all errors.
pub fn read_aggregate_set(input: impl BufRead) -> Result<AggregateSet> {
    let bad = |line: usize, reason: &str| Error::SetFormat { line, reason: reason.to_string() };
    let mut k = None;
    let mut stat = None;
    let mut mode = None;
    let mut max_emit = None;
    let mut grid = None;
    let mut residual = None;
    let mut version_seen = false;
    let mut entries: Vec<AggregateEntry> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let header = header.trim();
            if header == FORMAT_VERSION_LINE {
                version_seen = true;
                continue;
            }
            let (key, value) = header
                .split_once(' ')
                .ok_or_else(|| bad(lineno, "header without a value"))?;
            match key {
                "k" => k = Some(value.parse::<u32>().map_err(|_| bad(lineno, "bad k"))?),
                "stat" => {
                    stat = Some(match value {
                        "min" => SeriesStat::Min,
                        "max" => SeriesStat::Max,
                        "median" => SeriesStat::Median,
                        _ => return Err(bad(lineno, "bad stat")),
                    })
                }
                "mode" => {
                    mode = Some(match value {
                        "prefix" => CountMode::PrefixCount,
                        "address" => CountMode::AddressCount,
                        _ => return Err(bad(lineno, "bad mode")),
                    })
                }
                "max-emit-length" => {
                    max_emit =
                        Some(value.parse::<u8>().map_err(|_| bad(lineno, "bad max-emit-length"))?)
                }
                "grid" => {
                    let parts: Vec<&str> = value.split(' ').collect();
                    if parts.len() != 3 {
                        return Err(bad(lineno, "grid needs start, interval seconds, intervals"));
                    }
                    let start = parts[0].parse().map_err(|_| bad(lineno, "bad grid start"))?;
                    let secs = parts[1].parse().map_err(|_| bad(lineno, "bad grid interval"))?;
                    let n = parts[2].parse().map_err(|_| bad(lineno, "bad grid intervals"))?;
                    grid = Some(
                        TimeGrid::new(start, secs, n)
                            .map_err(|e| bad(lineno, &e.to_string()))?,
                    );
                }
                "residual" => {
                    residual = Some(match value.split_once(' ') {
                        None if value == "suppress" => ResidualPolicy::Suppress,
                        Some(("root", p)) => ResidualPolicy::RootCatchAll(
                            Prefix::from_str(p).map_err(|_| bad(lineno, "bad residual prefix"))?,
                        ),
                        _ => return Err(bad(lineno, "bad residual policy")),
                    })
                }
                _ => return Err(bad(lineno, "unknown header")),
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(bad(lineno, "entry needs prefix, min, median, max"));
        }
        let prefix = Prefix::from_str(fields[0]).map_err(|_| bad(lineno, "bad prefix"))?;
        let parse_count =
            |s: &str| -> Result<u32> { s.parse().map_err(|_| bad(lineno, "bad count")) };
        entries.push(AggregateEntry {
            prefix,
            min: parse_count(fields[1])?,
            median: parse_count(fields[2])?,
            max: parse_count(fields[3])?,
        });
    }
    if !version_seen {
        return Err(bad(0, "missing version header"));
    }
    let missing = |what: &str| bad(0, &format!("missing {what} header"));
    let set = AggregateSet {
        entries,
        residual_policy: residual.ok_or_else(|| missing("residual"))?,
        provenance: Provenance {
            config: KipConfig {
                k: k.ok_or_else(|| missing("k"))?,
                stat: stat.ok_or_else(|| missing("stat"))?,
                mode: mode.ok_or_else(|| missing("mode"))?,
                max_emit_length: max_emit.ok_or_else(|| missing("max-emit-length"))?,
            },
            grid: grid.ok_or_else(|| missing("grid"))?,
        },
    };
    for pair in set.entries.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if (a.prefix.base(), a.prefix.length()) >= (b.prefix.base(), b.prefix.length()) {
            return Err(bad(0, "entries out of order or duplicated"));
        }
    }
    Ok(set)
}
