//! Activity rows, episode inference, and the lower-bound counting rules.
//!
//! A row is one address's observed activity binned into grid intervals.
//! When the surrounding /64 has passed the plausible-randomness test, a
//! row's activity is bridged into a single episode (first active interval
//! through last: nobody else could have drawn that IID in between).
//! Column arithmetic then extracts how many addresses were provably
//! assigned at once:
//!
//!   1. every interior (`@`) mark in a column counts — those addresses were
//!      assigned throughout the interval;
//!   2. opening (`>`) marks are all assigned at the boundary instant that
//!      ends the interval, closing (`<`) marks at the one that starts it, so
//!      the larger of the two counts joins the total;
//!   3. isolated (`X`) marks add one, together, and only to columns with no
//!      `>`/`<` — their moments inside the interval need not coincide.
//!
//! Boundary ("fencepost") series are binary per /64 — counted at the same
//! instant everywhere, they sum soundly across a whole network.

use std::collections::{BTreeMap, HashMap};

use crate::addr::{Address128, TimeGrid};

/// One address's activity, binned. `active` is sorted and distinct;
/// `active_days` holds the distinct UTC epoch-days of the raw timestamps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivityRow {
    pub address: Address128,
    active: Vec<u32>,
    active_days: Vec<i64>,
}

impl ActivityRow {
    /// Build from raw interval indices / days; sorts and dedups.
    pub fn new(address: Address128, mut active: Vec<u32>, mut active_days: Vec<i64>) -> ActivityRow {
        assert!(!active.is_empty(), "a row needs at least one active interval");
        active.sort_unstable();
        active.dedup();
        active_days.sort_unstable();
        active_days.dedup();
        ActivityRow { address, active, active_days }
    }

    /// Sorted, distinct active interval indices.
    pub fn active(&self) -> &[u32] {
        &self.active
    }

    pub fn active_days(&self) -> &[i64] {
        &self.active_days
    }

    pub fn first_active(&self) -> u32 {
        self.active[0]
    }

    pub fn last_active(&self) -> u32 {
        *self.active.last().expect("non-empty by invariant")
    }
}

/// Accumulates (address, timestamp) events into per-/64 activity rows.
pub struct RowSetBuilder {
    grid: TimeGrid,
    acc: HashMap<Address128, (Vec<u32>, Vec<i64>)>,
}

impl RowSetBuilder {
    pub fn new(grid: TimeGrid) -> RowSetBuilder {
        RowSetBuilder { grid, acc: HashMap::new() }
    }

    /// Record one in-window event. Out-of-window timestamps are the
    /// caller's job to drop (and count) beforehand.
    pub fn add(&mut self, address: Address128, timestamp: i64) {
        let interval = self
            .grid
            .interval_of(timestamp)
            .expect("events must be filtered to the grid window before row building");
        let entry = self.acc.entry(address).or_default();
        entry.0.push(interval);
        entry.1.push(timestamp.div_euclid(86_400));
    }

    /// Rows grouped by /64, both levels in address order.
    pub fn finish(self) -> BTreeMap<u64, Vec<ActivityRow>> {
        let mut by_subnet: BTreeMap<u64, Vec<ActivityRow>> = BTreeMap::new();
        for (address, (intervals, days)) in self.acc {
            by_subnet
                .entry(address.subnet64())
                .or_default()
                .push(ActivityRow::new(address, intervals, days));
        }
        for rows in by_subnet.values_mut() {
            rows.sort_by_key(|r| r.address);
        }
        by_subnet
    }
}

/// Bin events into rows grouped by /64 subnet.
pub fn build_rows(
    events: impl IntoIterator<Item = (Address128, i64)>,
    grid: &TimeGrid,
) -> BTreeMap<u64, Vec<ActivityRow>> {
    let mut builder = RowSetBuilder::new(*grid);
    for (address, timestamp) in events {
        builder.add(address, timestamp);
    }
    builder.finish()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpisodeKind {
    /// Activity confined to a single interval.
    Short,
    /// Activity spanning at least one boundary; quiet intervals in between
    /// are bridged.
    Span,
}

/// One inferred assignment episode: the address was assigned from somewhere
/// in interval `first` through somewhere in interval `last`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeRow {
    pub address: Address128,
    pub first: u32,
    pub last: u32,
}

impl EpisodeRow {
    pub fn kind(&self) -> EpisodeKind {
        if self.first == self.last {
            EpisodeKind::Short
        } else {
            EpisodeKind::Span
        }
    }
}

/// Bridge a row into one episode. Only sound once the caller has
/// established the row's /64 is plausibly random (or the IID is otherwise
/// known stable); see [`crate::classify::plausible_random_set`].
pub fn mark_episodes(row: &ActivityRow) -> EpisodeRow {
    EpisodeRow { address: row.address, first: row.first_active(), last: row.last_active() }
}

/// The conservative alternative: no bridging, each active interval stands
/// alone as a short episode.
pub fn isolated_episodes(row: &ActivityRow) -> impl Iterator<Item = EpisodeRow> + '_ {
    row.active()
        .iter()
        .map(move |&t| EpisodeRow { address: row.address, first: t, last: t })
}

/// Lower bounds on simultaneously assigned addresses, one per interval.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalBounds(pub Vec<u32>);

/// Binary per-fencepost assignment indicator for one counting scope.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FencepostSeries(pub Vec<u32>);

/// Per-column mark counts for a set of episodes; the raw material for the
/// counting rules and for rendering.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ColumnMarks {
    /// `@` — assigned throughout the interval.
    pub interior: Vec<u32>,
    /// `>` — episode opens here and continues.
    pub opening: Vec<u32>,
    /// `<` — episode arrives here and ends.
    pub closing: Vec<u32>,
    /// `X` — single-interval episode.
    pub isolated: Vec<u32>,
}

impl ColumnMarks {
    pub fn tally(episodes: &[EpisodeRow], grid: &TimeGrid) -> ColumnMarks {
        let w = grid.intervals() as usize;
        let mut marks = ColumnMarks {
            interior: vec![0; w],
            opening: vec![0; w],
            closing: vec![0; w],
            isolated: vec![0; w],
        };
        // interior ranges via a difference array; episodes are many, w is small
        let mut interior_diff = vec![0i64; w + 1];
        for e in episodes {
            debug_assert!((e.first <= e.last) && (e.last as usize) < w, "episode out of grid");
            match e.kind() {
                EpisodeKind::Short => marks.isolated[e.first as usize] += 1,
                EpisodeKind::Span => {
                    marks.opening[e.first as usize] += 1;
                    marks.closing[e.last as usize] += 1;
                    interior_diff[e.first as usize + 1] += 1;
                    interior_diff[e.last as usize] -= 1;
                }
            }
        }
        let mut running = 0i64;
        for (t, cell) in marks.interior.iter_mut().enumerate() {
            running += interior_diff[t];
            *cell = u32::try_from(running).expect("interior count is a running sum of +1/-1");
        }
        marks
    }

    /// Apply the three counting rules to one column.
    pub fn column_bound(&self, t: usize) -> u32 {
        let anchored = self.opening[t].max(self.closing[t]);
        let isolated_bonus =
            u32::from(self.isolated[t] > 0 && self.opening[t] == 0 && self.closing[t] == 0);
        self.interior[t] + anchored + isolated_bonus
    }
}

/// Apply the counting rules across a whole scope of episodes (one /64, or
/// any set whose marks should be weighed jointly).
pub fn interval_lower_bounds(episodes: &[EpisodeRow], grid: &TimeGrid) -> IntervalBounds {
    let marks = ColumnMarks::tally(episodes, grid);
    IntervalBounds((0..grid.intervals() as usize).map(|t| marks.column_bound(t)).collect())
}

/// Count how many episodes span each fencepost.
pub(crate) fn spanning_counts(episodes: &[EpisodeRow], grid: &TimeGrid) -> Vec<u32> {
    let f = grid.fenceposts() as usize;
    let mut diff = vec![0i64; f + 1];
    for e in episodes {
        if e.last > e.first {
            debug_assert!((e.last as usize) < grid.intervals() as usize);
            diff[e.first as usize] += 1;
            diff[e.last as usize] -= 1;
        }
    }
    let mut counts = Vec::with_capacity(f);
    let mut running = 0i64;
    for p in 0..f {
        running += diff[p];
        counts.push(u32::try_from(running).expect("spanning count is a running sum of +1/-1"));
    }
    counts
}

/// Binary assigned/not-assigned per fencepost for one /64's episodes.
/// The boundary after the final interval is unobservable and has no entry.
pub fn fencepost_series(episodes: &[EpisodeRow], grid: &TimeGrid) -> FencepostSeries {
    FencepostSeries(spanning_counts(episodes, grid).iter().map(|&c| u32::from(c > 0)).collect())
}

/// Elementwise sum of equal-length series. Boundary counts are taken at
/// identical instants in every scope, which is what makes this sound.
pub fn accumulate<S: AsRef<[u32]>>(series: &[S]) -> Vec<u32> {
    assert!(!series.is_empty(), "nothing to accumulate");
    let len = series[0].as_ref().len();
    let mut total = vec![0u32; len];
    for s in series {
        let s = s.as_ref();
        assert_eq!(s.len(), len, "series length mismatch");
        for (acc, &v) in total.iter_mut().zip(s) {
            *acc = acc.checked_add(v).expect("series accumulation overflow");
        }
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesStat {
    Min,
    Max,
    Median,
}

impl SeriesStat {
    pub fn token(self) -> &'static str {
        match self {
            SeriesStat::Min => "min",
            SeriesStat::Max => "max",
            SeriesStat::Median => "median",
        }
    }
}

/// Summary statistic over a series. Median of an even-length series is the
/// lower middle element.
pub fn series_stat(values: &[u32], stat: SeriesStat) -> u32 {
    assert!(!values.is_empty(), "statistic of an empty series");
    match stat {
        SeriesStat::Min => *values.iter().min().expect("non-empty"),
        SeriesStat::Max => *values.iter().max().expect("non-empty"),
        SeriesStat::Median => {
            let mut sorted = values.to_vec();
            sorted.sort_unstable();
            sorted[(sorted.len() - 1) / 2]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::parse_address;

    fn grid24() -> TimeGrid {
        TimeGrid::new(0, 3_600, 24).unwrap()
    }

    fn row(iid_tail: u64, active: &[u32]) -> ActivityRow {
        let address = Address128::from_bits((0x2001_0db8u128 << 96) | iid_tail as u128);
        ActivityRow::new(address, active.to_vec(), vec![0])
    }

    /// The 16 bridged episodes of the one-/64 meeting-room fixture, by
    /// their active interval sets.
    fn meeting_episodes() -> Vec<EpisodeRow> {
        let actives: [&[u32]; 16] = [
            &[19, 20],
            &[3],
            &[11],
            &[17, 21],
            &[8, 9, 11, 12, 13],
            &[12, 13],
            &[17],
            &[7],
            &[11],
            &[15],
            &[20],
            &[13],
            &[12, 16],
            &[13, 16],
            &[8],
            &[3],
        ];
        actives
            .iter()
            .enumerate()
            .map(|(i, active)| mark_episodes(&row(i as u64 + 1, active)))
            .collect()
    }

    #[test]
    fn bridging_spans_quiet_intervals() {
        let e = mark_episodes(&row(1, &[8, 9, 11, 12, 13]));
        assert_eq!((e.first, e.last), (8, 13));
        assert_eq!(e.kind(), EpisodeKind::Span);
        let e = mark_episodes(&row(2, &[12, 16]));
        assert_eq!((e.first, e.last), (12, 16));
        let e = mark_episodes(&row(3, &[5]));
        assert_eq!(e.kind(), EpisodeKind::Short);
    }

    #[test]
    fn isolated_rows_become_shorts() {
        let shorts: Vec<EpisodeRow> = isolated_episodes(&row(1, &[3, 9, 9, 4])).collect();
        let firsts: Vec<u32> = shorts.iter().map(|e| e.first).collect();
        assert_eq!(firsts, [3, 4, 9]);
        assert!(shorts.iter().all(|e| e.kind() == EpisodeKind::Short));
    }

    #[test]
    fn column_rules_single_cases() {
        let g = grid24();
        // col 5: one interior, two opening, one closing, one isolated
        let episodes = [
            EpisodeRow { address: row(1, &[0]).address, first: 4, last: 6 }, // @ at 5
            EpisodeRow { address: row(2, &[0]).address, first: 5, last: 7 }, // > at 5
            EpisodeRow { address: row(3, &[0]).address, first: 5, last: 9 }, // > at 5
            EpisodeRow { address: row(4, &[0]).address, first: 2, last: 5 }, // < at 5
            EpisodeRow { address: row(5, &[0]).address, first: 5, last: 5 }, // X at 5
        ];
        let bounds = interval_lower_bounds(&episodes, &g);
        assert_eq!(bounds.0[5], 1 + 2); // interior + max(2 opening, 1 closing), X vetoed

        // isolated marks alone: still worth exactly one
        let lonely = [
            EpisodeRow { address: row(6, &[0]).address, first: 9, last: 9 },
            EpisodeRow { address: row(7, &[0]).address, first: 9, last: 9 },
        ];
        assert_eq!(interval_lower_bounds(&lonely, &g).0[9], 1);
    }

    #[test]
    fn meeting_room_totals() {
        let bounds = interval_lower_bounds(&meeting_episodes(), &grid24());
        let expected: Vec<u32> = "000100011112332321122100"
            .bytes()
            .map(|b| (b - b'0') as u32)
            .collect();
        assert_eq!(bounds.0, expected);
        assert_eq!(series_stat(&bounds.0, SeriesStat::Max), 3);
        assert_eq!(series_stat(&bounds.0, SeriesStat::Min), 0);
        assert_eq!(series_stat(&bounds.0, SeriesStat::Median), 1);
    }

    #[test]
    fn meeting_room_fenceposts() {
        let series = fencepost_series(&meeting_episodes(), &grid24());
        assert_eq!(series.0.len(), 23);
        let assigned: Vec<usize> =
            series.0.iter().enumerate().filter(|(_, &v)| v == 1).map(|(p, _)| p).collect();
        assert_eq!(assigned, [8, 9, 10, 11, 12, 13, 14, 15, 17, 18, 19, 20]);
        // three episodes hand the boundary between intervals 12 and 13 across
        assert_eq!(spanning_counts(&meeting_episodes(), &grid24())[12], 3);
    }

    #[test]
    fn row_order_never_matters() {
        let mut episodes = meeting_episodes();
        let forward = interval_lower_bounds(&episodes, &grid24());
        let fence_forward = fencepost_series(&episodes, &grid24());
        episodes.reverse();
        assert_eq!(interval_lower_bounds(&episodes, &grid24()), forward);
        assert_eq!(fencepost_series(&episodes, &grid24()), fence_forward);
    }

    #[test]
    fn accumulate_sums_elementwise() {
        let ones = vec![1u32; 23];
        let mut sparse = vec![0u32; 23];
        sparse[0] = 1;
        sparse[13] = 1;
        let total = accumulate(&[&ones[..], &ones[..], &sparse[..]]);
        for (p, &v) in total.iter().enumerate() {
            let expected = if p == 0 || p == 13 { 3 } else { 2 };
            assert_eq!(v, expected, "fencepost {p}");
        }
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn accumulate_rejects_ragged_input() {
        accumulate(&[&[1u32, 2][..], &[1u32][..]]);
    }

    #[test]
    fn stats_including_lower_median() {
        assert_eq!(series_stat(&[4, 1, 3, 2], SeriesStat::Median), 2);
        assert_eq!(series_stat(&[4, 1, 3], SeriesStat::Median), 3);
        assert_eq!(series_stat(&[5], SeriesStat::Median), 5);
        assert_eq!(series_stat(&[2, 9], SeriesStat::Min), 2);
        assert_eq!(series_stat(&[2, 9], SeriesStat::Max), 9);
    }

    #[test]
    fn rows_group_by_subnet_in_order() {
        let g = grid24();
        let a = parse_address("2001:db8::aaaa:bbbb:cccc:dddd").unwrap();
        let b = parse_address("2001:db9::1111:2222:3333:4444").unwrap();
        let events = vec![(b, 7_200), (a, 0), (a, 7_200), (b, 3_600)];
        let rows = build_rows(events, &g);
        let subnets: Vec<u64> = rows.keys().copied().collect();
        assert_eq!(subnets, [a.subnet64(), b.subnet64()]);
        assert_eq!(rows[&a.subnet64()][0].active(), [0, 2]);
        assert_eq!(rows[&b.subnet64()][0].active(), [1, 2]);
    }
}
