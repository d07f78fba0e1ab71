//! End-to-end orchestration: activity rows → classification → episode
//! inference → network-wide bounds → aggregate synthesis.
//!
//! The inference step is deliberately conservative. Bridging an address
//! across quiet intervals is justified only when its IID is plausibly
//! pseudorandom — a recurring random value means the assignment persisted.
//! A /64 earns that treatment when it holds at least two randomized-IID
//! candidates whose discriminating prefix lengths pass the plausibility
//! test; everything else falls back to isolated per-interval episodes,
//! which can only weaken the lower bounds, never break them.
//!
//! Interval lower bounds are computed once over the whole event set, not
//! summed per /64: two isolated marks in the same column of different /64s
//! may be the same moment or may not, so only a single global application
//! of the column rules keeps the result a true lower bound. Fencepost
//! series, by contrast, count at identical instants and sum freely.

use std::collections::BTreeMap;
use std::io::BufRead;

use crate::activity::{
    accumulate, fencepost_series, interval_lower_bounds, isolated_episodes, mark_episodes,
    ActivityRow, EpisodeRow, FencepostSeries, IntervalBounds,
};
use crate::addr::{Address128, Prefix, TimeGrid};
use crate::aggregate::{
    address_count_series, build_trie, synthesize_aggregates, AssignmentSeries, CountMode,
    KipConfig, ResidualMode, Synthesis,
};
use crate::classify::{
    classify_iid_stateless, compute_dpl_all, compute_stable_days, plausible_random_set,
    AddressClassification, IidClass, RandomnessPolicy,
};
use crate::error::Result;
use crate::ingest::{ingest_rows, LineCounts};
use crate::render::DisplayRow;

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub grid: TimeGrid,
    pub kip: KipConfig,
    pub residual: ResidualMode,
    /// Confidence level for the IID randomness test.
    pub confidence: f64,
    /// Also bridge addresses whose IIDs are stable by construction
    /// (EUI-64, low-byte, …) rather than pseudorandom. Off by default:
    /// a stable value recurring does not prove the assignment persisted.
    pub bridge_stable_iids: bool,
}

impl PipelineConfig {
    pub fn new(grid: TimeGrid, kip: KipConfig) -> PipelineConfig {
        PipelineConfig {
            grid,
            kip,
            residual: ResidualMode::Suppress,
            confidence: RandomnessPolicy::DEFAULT_CONFIDENCE,
            bridge_stable_iids: false,
        }
    }
}

/// Everything inferred about one active /64.
#[derive(Clone, Debug)]
pub struct SubnetAnalysis {
    pub subnet: Prefix,
    /// Render-ready per-address rows, classification included.
    pub rows: Vec<DisplayRow>,
    /// Did the randomized-IID candidates in this /64 pass the
    /// distinctness test (making bridging sound)?
    pub plausible: bool,
    /// Flattened episodes of all rows.
    pub episodes: Vec<EpisodeRow>,
    /// Binary fencepost series for the /64 itself.
    pub fenceposts: FencepostSeries,
    /// Per-fencepost count of addresses provably assigned at that instant.
    pub address_series: AssignmentSeries,
}

/// Full analysis of a row set: per-/64 inferences plus the network-wide
/// series the reports and the aggregation trie consume.
#[derive(Clone, Debug)]
pub struct AnalysisRun {
    pub grid: TimeGrid,
    pub subnets: Vec<SubnetAnalysis>,
    /// Lower bound on simultaneously assigned addresses per interval,
    /// column rules applied once across every /64.
    pub interval_bounds: IntervalBounds,
    /// Simultaneously assigned /64 prefixes per fencepost (sum of the
    /// per-/64 binary series).
    pub prefix_fenceposts: Vec<u32>,
    /// Simultaneously assigned addresses per fencepost.
    pub address_fenceposts: Vec<u32>,
}

impl AnalysisRun {
    pub fn total_addresses(&self) -> usize {
        self.subnets.iter().map(|s| s.rows.len()).sum()
    }

    /// Distinct /48s with any activity.
    pub fn active_48s(&self) -> usize {
        let mut last = None;
        let mut n = 0;
        for s in &self.subnets {
            let p48 = s.subnet.base().bits() >> 80;
            if last != Some(p48) {
                last = Some(p48);
                n += 1;
            }
        }
        n
    }

    /// Per-/64 series for the aggregation trie under the chosen counting
    /// mode.
    pub fn series_by_subnet(&self, mode: CountMode) -> BTreeMap<u64, AssignmentSeries> {
        self.subnets
            .iter()
            .map(|s| {
                let series = match mode {
                    CountMode::PrefixCount => AssignmentSeries(s.fenceposts.0.clone()),
                    CountMode::AddressCount => s.address_series.clone(),
                };
                (s.subnet.base().subnet64(), series)
            })
            .collect()
    }
}

fn analyze_subnet(
    rows: &[ActivityRow],
    dpls: &BTreeMap<Address128, Option<u8>>,
    grid: &TimeGrid,
    policy: &RandomnessPolicy,
    bridge_stable: bool,
) -> SubnetAnalysis {
    let candidates: Vec<Address128> = rows
        .iter()
        .map(|r| r.address)
        .filter(|&a| classify_iid_stateless(a) == IidClass::RandomizedCandidate)
        .collect();
    let plausible = candidates.len() >= 2 && plausible_random_set(&candidates, policy);

    let mut display = Vec::with_capacity(rows.len());
    let mut episodes = Vec::new();
    for row in rows {
        let class = classify_iid_stateless(row.address);
        let bridge = match class {
            IidClass::RandomizedCandidate => plausible,
            _ => bridge_stable,
        };
        let row_episodes: Vec<EpisodeRow> = if bridge {
            vec![mark_episodes(row)]
        } else {
            isolated_episodes(row).collect()
        };
        episodes.extend_from_slice(&row_episodes);
        display.push(DisplayRow {
            classification: AddressClassification {
                address: row.address,
                iid_class: class,
                dpl: dpls[&row.address],
                stable_days: compute_stable_days(row.active_days()),
            },
            active: row.active().to_vec(),
            episodes: row_episodes,
        });
    }

    SubnetAnalysis {
        subnet: Prefix::new(rows[0].address, 64),
        rows: display,
        plausible,
        fenceposts: fencepost_series(&episodes, grid),
        address_series: address_count_series(&episodes, grid),
        episodes,
    }
}

/// Classify and infer over a whole row set (keys are /64 subnet values,
/// as produced by ingestion).
pub fn analyze(
    rows_by_subnet: &BTreeMap<u64, Vec<ActivityRow>>,
    config: &PipelineConfig,
) -> AnalysisRun {
    let policy = RandomnessPolicy::new(config.confidence);
    let grid = &config.grid;

    // Discriminating prefix lengths are relative to the nearest address in
    // the whole observed set; rows arrive sorted, so neighbors are adjacent.
    let all_addresses: Vec<Address128> =
        rows_by_subnet.values().flatten().map(|r| r.address).collect();
    let dpls: BTreeMap<Address128, Option<u8>> = all_addresses
        .iter()
        .copied()
        .zip(compute_dpl_all(&all_addresses))
        .collect();

    let subnets: Vec<SubnetAnalysis> = rows_by_subnet
        .values()
        .map(|rows| analyze_subnet(rows, &dpls, grid, &policy, config.bridge_stable_iids))
        .collect();

    let all_episodes: Vec<EpisodeRow> =
        subnets.iter().flat_map(|s| s.episodes.iter().copied()).collect();
    let interval_bounds = interval_lower_bounds(&all_episodes, grid);

    let fenceposts = grid.fenceposts() as usize;
    let (prefix_fenceposts, address_fenceposts) = if subnets.is_empty() {
        (vec![0; fenceposts], vec![0; fenceposts])
    } else {
        let prefix: Vec<&[u32]> = subnets.iter().map(|s| s.fenceposts.0.as_slice()).collect();
        let addr: Vec<&[u32]> =
            subnets.iter().map(|s| s.address_series.0.as_slice()).collect();
        (accumulate(&prefix), accumulate(&addr))
    };

    AnalysisRun { grid: *grid, subnets, interval_bounds, prefix_fenceposts, address_fenceposts }
}

/// Aggregate an analysis into anonymous prefixes under the run's config.
pub fn synthesize(run: &AnalysisRun, config: &PipelineConfig) -> Result<Synthesis> {
    let trie = build_trie(&run.series_by_subnet(config.kip.mode), &run.grid)?;
    synthesize_aggregates(trie, &config.kip, config.residual, &run.grid)
}

/// One ingest-to-aggregates run over a log stream.
pub struct PipelineOutput {
    pub run: AnalysisRun,
    pub synthesis: Synthesis,
    pub counts: LineCounts,
}

pub fn run_pipeline(input: impl BufRead, config: &PipelineConfig) -> Result<PipelineOutput> {
    config.kip.validate()?;
    let (rows, counts) = ingest_rows(input, &config.grid)?;
    let run = analyze(&rows, config);
    let synthesis = synthesize(&run, config)?;
    Ok(PipelineOutput { run, synthesis, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::{build_rows, series_stat, SeriesStat};
    use crate::addr::parse_address;

    const START: i64 = 1_490_400_000;

    fn grid24() -> TimeGrid {
        TimeGrid::new(START, 3_600, 24).unwrap()
    }

    fn config() -> PipelineConfig {
        PipelineConfig::new(grid24(), KipConfig::new(2, SeriesStat::Min, CountMode::PrefixCount))
    }

    fn events(spec: &[(&str, &[u32])]) -> Vec<(Address128, i64)> {
        spec.iter()
            .flat_map(|(s, hours)| {
                let a = parse_address(s).unwrap();
                hours.iter().map(move |&h| (a, START + 3_600 * h as i64 + 600))
            })
            .collect()
    }

    /// The published 16-address hour sets for the single-/64 example.
    fn meeting64() -> Vec<(&'static str, &'static [u32])> {
        vec![
            ("2001:db8::117a:e091:b2bd:ca65", &[19, 20][..]),
            ("2001:db8::21ad:6d24:641a:1314", &[3]),
            ("2001:db8::3454:ae0d:20a0:df4d", &[11]),
            ("2001:db8::4974:fa8b:465d:4c2a", &[17, 21]),
            ("2001:db8::503c:a91d:be00:9a63", &[8, 9, 11, 12, 13]),
            ("2001:db8::6867:8a64:5417:e731", &[12, 13]),
            ("2001:db8::6d35:ee11:ec45:f658", &[17]),
            ("2001:db8::7070:a7fc:47d5:02ba", &[7]),
            ("2001:db8::7554:b66a:a983:9665", &[11]),
            ("2001:db8::7939:1bd6:fec2:85bb", &[15]),
            ("2001:db8::7ccc:3977:7c76:bdef", &[20]),
            ("2001:db8::890b:1f0d:14e2:0ccb", &[13]),
            ("2001:db8::a0fc:1e18:48aa:eb2e", &[12, 16]),
            ("2001:db8::f930:9833:f8c5:3926", &[13, 16]),
            ("2001:db8::f94d:fcec:6b8e:d61f", &[8]),
            ("2001:db8::fd28:50fe:8445:83e7", &[3]),
        ]
    }

    #[test]
    fn meeting64_analysis_reproduces_published_bounds() {
        let cfg = config();
        let rows = build_rows(events(&meeting64()), &cfg.grid);
        let run = analyze(&rows, &cfg);

        assert_eq!(run.subnets.len(), 1);
        let subnet = &run.subnets[0];
        assert!(subnet.plausible);
        assert_eq!(subnet.subnet.to_string(), "2001:db8::/64");

        let totals: String =
            run.interval_bounds.0.iter().map(|v| v.to_string()).collect();
        assert_eq!(totals, "000100011112332321122100");
        assert_eq!(series_stat(&run.interval_bounds.0, SeriesStat::Max), 3);
        assert_eq!(series_stat(&run.interval_bounds.0, SeriesStat::Min), 0);
        assert_eq!(series_stat(&run.interval_bounds.0, SeriesStat::Median), 1);

        let assigned: Vec<u32> =
            (0..23).map(|p| u32::from(subnet.fenceposts.0[p] > 0)).collect();
        let expect: Vec<u32> =
            (0..23).map(|p| u32::from((8..=15).contains(&p) || (17..=20).contains(&p))).collect();
        assert_eq!(assigned, expect);
        assert_eq!(run.prefix_fenceposts, subnet.fenceposts.0);
        assert_eq!(run.address_fenceposts[12], 3);
        assert_eq!(run.total_addresses(), 16);
        assert_eq!(run.active_48s(), 1);
    }

    #[test]
    fn implausible_group_stays_isolated() {
        // Two "randomized" IIDs agreeing on their first 51 bits: the DPL
        // of 116 is far past the two-address plausible maximum of 72.
        let cfg = config();
        let rows = build_rows(
            events(&[
                ("2001:db8::dead:beef:1111:aa01", &[2, 9][..]),
                ("2001:db8::dead:beef:1111:bb02", &[5]),
            ]),
            &cfg.grid,
        );
        let run = analyze(&rows, &cfg);
        let subnet = &run.subnets[0];
        assert!(!subnet.plausible);
        // No bridging: three short episodes, nothing spans a fencepost.
        assert_eq!(subnet.episodes.len(), 3);
        assert!(subnet.fenceposts.0.iter().all(|&v| v == 0));
        // Interval bounds still count the isolated activity.
        assert_eq!(run.interval_bounds.0[2], 1);
        assert_eq!(run.interval_bounds.0[5], 1);
        assert_eq!(run.interval_bounds.0[9], 1);
    }

    #[test]
    fn lone_candidate_is_not_bridged() {
        let cfg = config();
        let rows = build_rows(
            events(&[("2001:db8::a1b2:c3d4:e5f6:0718", &[3, 9][..])]),
            &cfg.grid,
        );
        let run = analyze(&rows, &cfg);
        assert!(!run.subnets[0].plausible);
        assert_eq!(run.subnets[0].episodes.len(), 2);
        assert!(run.prefix_fenceposts.iter().all(|&v| v == 0));
    }

    #[test]
    fn stable_iids_bridge_only_on_request() {
        let spec = [("2001:db8:7::1", &[2, 10][..]), ("2001:db8:7::2", &[4][..])];
        let mut cfg = config();
        let rows = build_rows(events(&spec), &cfg.grid);

        let run = analyze(&rows, &cfg);
        assert_eq!(run.subnets[0].episodes.len(), 3);
        assert!(run.prefix_fenceposts.iter().all(|&v| v == 0));

        cfg.bridge_stable_iids = true;
        let run = analyze(&rows, &cfg);
        assert_eq!(run.subnets[0].episodes.len(), 2);
        // ::1 now spans fenceposts 2..=9.
        let expect: Vec<u32> = (0..23).map(|p| u32::from((2..10).contains(&p))).collect();
        assert_eq!(run.prefix_fenceposts, expect);
    }

    #[test]
    fn pipeline_composes_ingest_analysis_and_synthesis() {
        let mut log = String::new();
        for (a, t) in events(&meeting64()) {
            log.push_str(&format!("{t}\t{a}\n"));
        }
        log.push_str("not a log line\n");
        let out = run_pipeline(log.as_bytes(), &config()).unwrap();
        assert_eq!(out.counts.parsed, 25);
        assert_eq!(out.counts.malformed, 1);
        // A single /64 can never reach k=2 in prefix-count mode.
        assert!(out.synthesis.set.entries.is_empty());
        assert_eq!(out.synthesis.residual_series.0, out.run.prefix_fenceposts);
    }

    #[test]
    fn empty_input_is_a_valid_run() {
        let run = analyze(&BTreeMap::new(), &config());
        assert!(run.subnets.is_empty());
        assert_eq!(run.interval_bounds.0, vec![0; 24]);
        assert_eq!(run.prefix_fenceposts, vec![0; 23]);
        assert_eq!(run.active_48s(), 0);
    }
}
