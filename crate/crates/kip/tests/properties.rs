//! Randomized invariants over the core data structures: textual round
//! trips, bound monotonicity, synthesis conservation, and anonymizer
//! algebra. Each property states something the documentation promises
//! unconditionally, so shrunken counterexamples point straight at a lie.

use std::collections::BTreeMap;

use proptest::prelude::*;

use kip::activity::{accumulate, interval_lower_bounds, series_stat, EpisodeRow, SeriesStat};
use kip::addr::{truncate_to, Address128, Prefix, TimeGrid};
use kip::aggregate::{
    address_count_series, build_trie, read_aggregate_set, synthesize_aggregates,
    write_aggregate_set, AggregateEntry, AggregateSet, AssignmentSeries, CountMode, KipConfig,
    Provenance, ResidualMode, ResidualPolicy,
};
use kip::anonymize::{anonymize_address, build_matcher, MatchOutcome};

fn arb_address() -> impl Strategy<Value = Address128> {
    any::<u128>().prop_map(Address128::from_bits)
}

fn arb_prefix() -> impl Strategy<Value = Prefix> {
    (any::<u128>(), 0..=128u8)
        .prop_map(|(bits, len)| Prefix::new(Address128::from_bits(bits), len))
}

fn arb_stat() -> impl Strategy<Value = SeriesStat> {
    prop_oneof![
        Just(SeriesStat::Min),
        Just(SeriesStat::Max),
        Just(SeriesStat::Median),
    ]
}

/// A structurally valid aggregate set: entries deduplicated and sorted,
/// provenance self-consistent.
fn arb_set() -> impl Strategy<Value = AggregateSet> {
    let entry = (any::<u128>(), 8..=64u8, any::<[u32; 3]>());
    let residual = prop_oneof![
        Just(None),
        arb_prefix().prop_map(Some),
    ];
    (
        proptest::collection::vec(entry, 1..24),
        residual,
        2..6u32,
        arb_stat(),
        any::<bool>(),
        -1_000_000_000i64..1_000_000_000,
        60..86_400u32,
        2..200u32,
    )
        .prop_map(|(raw, root, k, stat, per_address, start, interval, intervals)| {
            let mut dedup = BTreeMap::new();
            for (bits, len, stats) in raw {
                let prefix = Prefix::new(Address128::from_bits(bits), len);
                dedup.insert(
                    (prefix.base(), prefix.length()),
                    AggregateEntry { prefix, min: stats[0], median: stats[1], max: stats[2] },
                );
            }
            let mode =
                if per_address { CountMode::AddressCount } else { CountMode::PrefixCount };
            AggregateSet {
                entries: dedup.into_values().collect(),
                residual_policy: match root {
                    Some(p) => ResidualPolicy::RootCatchAll(p),
                    None => ResidualPolicy::Suppress,
                },
                provenance: Provenance {
                    config: KipConfig::new(k, stat, mode),
                    grid: TimeGrid::new(start, interval, intervals).unwrap(),
                },
            }
        })
}

fn arb_episodes(window: u32, max: usize) -> impl Strategy<Value = Vec<EpisodeRow>> {
    proptest::collection::vec((any::<u128>(), 0..window, 0..window), 0..max).prop_map(
        move |raw| {
            raw.into_iter()
                .map(|(bits, a, b)| EpisodeRow {
                    address: Address128::from_bits(bits),
                    first: a.min(b),
                    last: a.max(b),
                })
                .collect()
        },
    )
}

proptest! {
    #[test]
    fn address_text_round_trips(a in arb_address()) {
        let text = a.to_string();
        prop_assert_eq!(text.parse::<Address128>().unwrap(), a);
    }

    #[test]
    fn prefix_text_round_trips_and_covers_its_base(p in arb_prefix()) {
        prop_assert_eq!(p.to_string().parse::<Prefix>().unwrap(), p);
        prop_assert!(p.contains(p.base()));
    }

    #[test]
    fn truncation_contains_its_input(a in arb_address(), len in 0..=128u8) {
        let p = truncate_to(a, len);
        prop_assert!(p.contains(a));
        // re-truncating the zero-filled base changes nothing
        prop_assert_eq!(truncate_to(p.base(), len), p);
    }

    #[test]
    fn set_files_round_trip(set in arb_set()) {
        let mut file = Vec::new();
        write_aggregate_set(&set, &mut file).unwrap();
        let back = read_aggregate_set(file.as_slice()).unwrap();
        prop_assert_eq!(back, set);
    }

    /// More evidence never lowers a lower bound: every interval column and
    /// every fencepost count is monotone under adding episodes.
    #[test]
    fn bounds_grow_monotonically_with_evidence(
        episodes in arb_episodes(24, 40),
        keep in 0..40usize,
    ) {
        let grid = TimeGrid::new(0, 3_600, 24).unwrap();
        let subset = &episodes[..keep.min(episodes.len())];
        let partial = interval_lower_bounds(subset, &grid);
        let full = interval_lower_bounds(&episodes, &grid);
        for (p, f) in partial.0.iter().zip(&full.0) {
            prop_assert!(p <= f);
        }
        let partial = address_count_series(subset, &grid);
        let full = address_count_series(&episodes, &grid);
        for (p, f) in partial.0.iter().zip(&full.0) {
            prop_assert!(p <= f);
        }
    }

    /// Synthesis neither invents nor loses assignment mass, and every
    /// emitted aggregate honors the k floor under the configured statistic.
    #[test]
    fn synthesis_conserves_mass_and_honors_k(
        series in proptest::collection::btree_map(
            any::<u64>(),
            proptest::collection::vec(0..5u32, 24),
            1..16,
        ),
        k in 2..5u32,
        stat in arb_stat(),
    ) {
        let grid = TimeGrid::new(0, 3_600, 25).unwrap();
        let per64: BTreeMap<u64, AssignmentSeries> = series
            .into_iter()
            .map(|(subnet, s)| (subnet, AssignmentSeries(s)))
            .collect();

        let trie = build_trie(&per64, &grid).unwrap();
        let config = KipConfig::new(k, stat, CountMode::PrefixCount);
        let synthesis =
            synthesize_aggregates(trie, &config, ResidualMode::Suppress, &grid).unwrap();

        let inputs: Vec<AssignmentSeries> = per64.values().cloned().collect();
        prop_assert_eq!(synthesis.total_series(), accumulate(&inputs));

        prop_assert_eq!(synthesis.emitted_series.len(), synthesis.set.entries.len());
        let mut seen = std::collections::BTreeSet::new();
        for (entry, emitted) in synthesis.set.entries.iter().zip(&synthesis.emitted_series) {
            prop_assert!(series_stat(&emitted.0, stat) >= k);
            prop_assert_eq!(entry.min, series_stat(&emitted.0, SeriesStat::Min));
            prop_assert_eq!(entry.median, series_stat(&emitted.0, SeriesStat::Median));
            prop_assert_eq!(entry.max, series_stat(&emitted.0, SeriesStat::Max));
            prop_assert!(seen.insert((entry.prefix.base(), entry.prefix.length())));
        }
    }

    /// Anonymization is idempotent and containing: outputs re-anonymize to
    /// themselves, and a match at length L means some /L entry covers the
    /// input.
    #[test]
    fn anonymizer_is_idempotent_and_containing(
        set in arb_set(),
        addrs in proptest::collection::vec(arb_address(), 1..64),
    ) {
        let matcher = build_matcher(&set).unwrap();
        for a in addrs {
            let once = anonymize_address(a, &matcher, set.residual_policy);
            let twice = anonymize_address(once.output, &matcher, set.residual_policy);
            prop_assert_eq!(once.output, twice.output);

            match once.outcome {
                MatchOutcome::Matched(len) => {
                    prop_assert_eq!(once.output, truncate_to(a, len).base());
                    prop_assert!(set
                        .entries
                        .iter()
                        .any(|e| e.prefix.length() == len && e.prefix.contains(a)));
                }
                MatchOutcome::CatchAll(len) => {
                    let ResidualPolicy::RootCatchAll(root) = set.residual_policy else {
                        return Err(proptest::test_runner::TestCaseError::fail(
                            "catch-all without root policy",
                        ));
                    };
                    prop_assert_eq!(len, root.length());
                }
                MatchOutcome::Suppressed => {
                    prop_assert_eq!(once.output, Address128::UNSPECIFIED);
                }
            }
        }
    }
}
