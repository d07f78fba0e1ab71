//! Synthetic scenarios with known ground truth, and the brute-force oracle
//! that referees the lower-bound claims.
//!
//! A scenario assigns each simulated host one /64 and a chain of temporary
//! addresses, each with a real-time assignment span and activity instants
//! inside that span. Because the truth is explicit, the oracle can compute
//! the exact concurrent-assignment counts the pipeline is only allowed to
//! undercut.
//!
//! Two address-plan presets mirror practices seen in the wild:
//! * `JpStyle` — every /64 is `/48 || 0x0000` (bits 49–64 of the address
//!   zero), so hosts are distinguished purely by /48. Truncating such
//!   addresses at /48 hides nothing.
//! * `Dispersed` — hosts share a smaller pool of /48s and scatter across
//!   random /64s beneath them.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::addr::{Address128, Prefix, TimeGrid};
use crate::error::{Error, Result};
use crate::ingest::LogEvent;
use crate::pipeline::AnalysisRun;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Practice {
    JpStyle,
    Dispersed,
}

impl Practice {
    pub fn token(self) -> &'static str {
        match self {
            Practice::JpStyle => "jp-style",
            Practice::Dispersed => "dispersed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthParams {
    pub hosts: u32,
    pub practice: Practice,
    /// Mean temporary-address lifetime before rotation.
    pub mean_lifetime_hours: f64,
    /// Mean activity events per assigned hour.
    pub events_per_hour: f64,
    pub grid: TimeGrid,
    pub seed: u64,
}

impl SynthParams {
    pub fn new(hosts: u32, practice: Practice, grid: TimeGrid, seed: u64) -> SynthParams {
        SynthParams {
            hosts,
            practice,
            mean_lifetime_hours: 6.0,
            events_per_hour: 2.0,
            grid,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_lifetime_hours > 0.0) {
            return Err(Error::BadConfig("mean lifetime must be positive".into()));
        }
        if !(self.events_per_hour >= 0.0) {
            return Err(Error::BadConfig("event rate must be non-negative".into()));
        }
        if self.practice == Practice::JpStyle && self.hosts as u64 > 1 << 19 {
            return Err(Error::BadConfig(
                "jp-style plan runs out of distinct /48s past 2^19 hosts".into(),
            ));
        }
        Ok(())
    }
}

/// One temporary address: assigned over `span = [on, off)` real time, seen
/// active at `activity` instants inside the span (and inside the window).
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub address: Address128,
    pub span: (i64, i64),
    pub activity: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthHost {
    pub subnet: Prefix,
    pub assignments: Vec<Assignment>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub grid: TimeGrid,
    pub hosts: Vec<GroundTruthHost>,
    pub seed: u64,
}

impl Scenario {
    pub fn total_addresses(&self) -> usize {
        self.hosts.iter().map(|h| h.assignments.len()).sum()
    }

    pub fn total_events(&self) -> usize {
        self.hosts
            .iter()
            .flat_map(|h| &h.assignments)
            .map(|a| a.activity.len())
            .sum()
    }
}

/// All /48 values live under 2001:db0::/28, leaving 20 bits of /48 index.
const PLAN_BASE_48: u64 = 0x2001_0db << 36;
const PLAN_48_BITS: u32 = 20;

fn sample_subnet(
    rng: &mut ChaCha8Rng,
    practice: Practice,
    pool: &[u64],
    used: &mut HashSet<u64>,
) -> u64 {
    loop {
        let subnet = match practice {
            Practice::JpStyle => {
                // /64 = /48 with the SLAAC-prefix bits left zero.
                PLAN_BASE_48 | (rng.gen_range(0..1u64 << PLAN_48_BITS) << 16)
            }
            Practice::Dispersed => pool[rng.gen_range(0..pool.len())] | rng.gen::<u16>() as u64,
        };
        if used.insert(subnet) {
            return subnet;
        }
    }
}

/// RFC 4941 clears the universal/local bit when drawing a random IID; that
/// is bit 7 of the IID, bit 57 counting from the low end of the u64.
fn sample_iid(rng: &mut ChaCha8Rng) -> u64 {
    rng.gen::<u64>() & !(1 << 57)
}

/// Deterministically build the scenario for `params`.
pub fn generate(params: &SynthParams) -> Result<Scenario> {
    params.validate()?;
    let grid = params.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mean_life = (params.mean_lifetime_hours * 3_600.0).max(1.0);
    let lifetime = Exp::new(1.0 / mean_life).expect("positive rate");
    let gap = Exp::new(4.0 / mean_life).expect("positive rate");

    let pool: Vec<u64> = match params.practice {
        Practice::JpStyle => Vec::new(),
        Practice::Dispersed => {
            let mut seen = HashSet::new();
            let size = (params.hosts / 8).max(1) as usize;
            let mut pool = Vec::with_capacity(size);
            while pool.len() < size {
                let p48 = PLAN_BASE_48 | (rng.gen_range(0..1u64 << PLAN_48_BITS) << 16);
                if seen.insert(p48) {
                    pool.push(p48);
                }
            }
            pool
        }
    };

    let window = grid.end() - grid.start();
    let mut used_subnets = HashSet::new();
    let mut used_addresses = HashSet::new();
    let mut hosts = Vec::with_capacity(params.hosts as usize);
    for _ in 0..params.hosts {
        let subnet = sample_subnet(&mut rng, params.practice, &pool, &mut used_subnets);
        let mut assignments = Vec::new();
        // Hosts come online somewhere in the first quarter of the window
        // and rotate addresses until it closes.
        let mut t = grid.start() + rng.gen_range(0..=window / 4);
        while t < grid.end() {
            let life = (lifetime.sample(&mut rng) as i64).max(60);
            let span = (t, t + life);
            let address = loop {
                let a = Address128::from_bits(
                    (subnet as u128) << 64 | sample_iid(&mut rng) as u128,
                );
                if used_addresses.insert(a.bits()) {
                    break a;
                }
            };
            assignments.push(Assignment {
                address,
                span,
                activity: sample_activity(&mut rng, span, &grid, params.events_per_hour),
            });
            t = span.1;
            if rng.gen_bool(0.1) {
                t += (gap.sample(&mut rng) as i64).max(1);
            }
        }
        let base = Address128::from_bits((subnet as u128) << 64);
        hosts.push(GroundTruthHost { subnet: Prefix::new(base, 64), assignments });
    }
    Ok(Scenario { grid, hosts, seed: params.seed })
}

fn sample_activity(
    rng: &mut ChaCha8Rng,
    span: (i64, i64),
    grid: &TimeGrid,
    events_per_hour: f64,
) -> Vec<i64> {
    let lo = span.0.max(grid.start());
    let hi = span.1.min(grid.end());
    if lo >= hi || events_per_hour <= 0.0 {
        return Vec::new();
    }
    let lambda = events_per_hour * (hi - lo) as f64 / 3_600.0;
    let n = Poisson::new(lambda).expect("positive lambda").sample(rng) as usize;
    let mut activity: Vec<i64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    activity.sort_unstable();
    activity
}

/// The scenario's observable face: log lines ordered by time then address.
pub fn log_events(scenario: &Scenario) -> Vec<LogEvent> {
    let mut events: Vec<LogEvent> = scenario
        .hosts
        .iter()
        .flat_map(|h| &h.assignments)
        .flat_map(|a| {
            a.activity.iter().map(|&t| LogEvent { timestamp: t, address: a.address })
        })
        .collect();
    events.sort_unstable_by_key(|e| (e.timestamp, e.address));
    events
}

pub fn write_log(scenario: &Scenario, mut out: impl Write) -> Result<()> {
    for e in log_events(scenario) {
        writeln!(out, "{}\t{}", e.timestamp, e.address)?;
    }
    Ok(())
}

/// Exact concurrency counts from the ground-truth spans.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleTruth {
    /// Max simultaneously assigned addresses over each closed interval
    /// (both bounding instants included).
    pub interval_max: Vec<u32>,
    /// Assigned addresses at each fencepost instant.
    pub fencepost_addresses: Vec<u32>,
    /// /64 prefixes with at least one assigned address at each fencepost.
    pub fencepost_prefixes: Vec<u32>,
}

/// Sweep the span endpoints; no sampling, no discretization error.
pub fn oracle_truth(scenario: &Scenario) -> OracleTruth {
    let grid = &scenario.grid;
    let f = grid.fenceposts() as usize;
    let w = grid.intervals() as usize;
    let step = grid.interval_seconds() as i64;

    // Fencepost counts: a span [on, off) covers fencepost p (instant
    // start + (p+1)·step) iff on ≤ instant < off.
    let post_range = |span: (i64, i64)| -> Option<(usize, usize)> {
        let lo = div_ceil_i64(span.0 - grid.start(), step).max(1);
        let hi = ((span.1 - grid.start() - 1).div_euclid(step)).min(f as i64);
        if lo > hi {
            None
        } else {
            Some((lo as usize - 1, hi as usize - 1))
        }
    };

    let mut fencepost_addresses = vec![0u32; f];
    let mut fencepost_prefixes = vec![0u32; f];
    for host in &scenario.hosts {
        let mut host_cover = vec![0i32; f + 1];
        for a in &host.assignments {
            if let Some((lo, hi)) = post_range(a.span) {
                fencepost_addresses[lo..=hi].iter_mut().for_each(|v| *v += 1);
                host_cover[lo] += 1;
                host_cover[hi + 1] -= 1;
            }
        }
        let mut live = 0;
        for (p, delta) in host_cover[..f].iter().enumerate() {
            live += delta;
            if live > 0 {
                fencepost_prefixes[p] += 1;
            }
        }
    }

    // Interval maxima: sweep the step function of concurrent assignments.
    let mut deltas: Vec<(i64, i32)> = Vec::new();
    for a in scenario.hosts.iter().flat_map(|h| &h.assignments) {
        deltas.push((a.span.0, 1));
        deltas.push((a.span.1, -1));
    }
    deltas.sort_unstable();
    let mut interval_max = vec![0u32; w];
    let mut live: i32 = 0;
    let mut i = 0;
    while i < deltas.len() {
        let at = deltas[i].0;
        while i < deltas.len() && deltas[i].0 == at {
            live += deltas[i].1;
            i += 1;
        }
        let until = deltas.get(i).map_or(grid.end(), |d| d.0);
        // The function holds `live` on [at, until); spread that over every
        // interval whose closed range the segment touches.
        let seg_lo = at.max(grid.start());
        let seg_hi = until.min(grid.end());
        if live > 0 && seg_lo <= seg_hi && seg_lo < grid.end() && seg_hi > grid.start() {
            let t_lo = (seg_lo - grid.start()).div_euclid(step) as usize;
            // Instant seg_hi is still inside the segment only as a limit
            // from the left; the value there belongs to [at, until) when
            // seg_hi < until, i.e. when the segment was clipped.
            let last_instant = if seg_hi < until { seg_hi } else { seg_hi - 1 };
            let t_hi =
                ((last_instant - grid.start()).div_euclid(step) as usize).min(w - 1);
            for t in t_lo..=t_hi {
                interval_max[t] = interval_max[t].max(live as u32);
            }
            // A segment beginning exactly on a boundary is also the value
            // at the preceding interval's closing instant.
            if seg_lo > grid.start() && (seg_lo - grid.start()) % step == 0 {
                let t = (seg_lo - grid.start()) / step - 1;
                interval_max[t as usize] = interval_max[t as usize].max(live as u32);
            }
        }
    }
    OracleTruth { interval_max, fencepost_addresses, fencepost_prefixes }
}

fn div_ceil_i64(a: i64, b: i64) -> i64 {
    a.div_euclid(b) + i64::from(a.rem_euclid(b) != 0)
}

/// Elementwise `bound ≤ truth` audit of one pipeline run against its
/// scenario.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SoundnessReport {
    pub interval_violations: Vec<usize>,
    pub address_fencepost_violations: Vec<usize>,
    pub prefix_fencepost_violations: Vec<usize>,
    /// (Σ bound, Σ truth) over interval columns — a tightness witness,
    /// not a correctness requirement.
    pub interval_mass: (u64, u64),
    pub fencepost_mass: (u64, u64),
}

impl SoundnessReport {
    pub fn clean(&self) -> bool {
        self.interval_violations.is_empty()
            && self.address_fencepost_violations.is_empty()
            && self.prefix_fencepost_violations.is_empty()
    }
}

pub fn check_soundness(scenario: &Scenario, run: &AnalysisRun) -> SoundnessReport {
    let truth = oracle_truth(scenario);
    let over = |bound: &[u32], truth: &[u32]| -> Vec<usize> {
        bound
            .iter()
            .zip(truth)
            .enumerate()
            .filter(|(_, (b, t))| b > t)
            .map(|(i, _)| i)
            .collect()
    };
    let mass = |bound: &[u32], truth: &[u32]| {
        (
            bound.iter().map(|&v| v as u64).sum(),
            truth.iter().map(|&v| v as u64).sum(),
        )
    };
    SoundnessReport {
        interval_violations: over(&run.interval_bounds.0, &truth.interval_max),
        address_fencepost_violations: over(&run.address_fenceposts, &truth.fencepost_addresses),
        prefix_fencepost_violations: over(&run.prefix_fenceposts, &truth.fencepost_prefixes),
        interval_mass: mass(&run.interval_bounds.0, &truth.interval_max),
        fencepost_mass: mass(&run.address_fenceposts, &truth.fencepost_addresses),
    }
}

/// Truth file: `#`-headed sections of `<index>\t<count>` rows.
pub fn write_truth(scenario: &Scenario, mut out: impl Write) -> Result<()> {
    let truth = oracle_truth(scenario);
    writeln!(out, "# kip synth truth v1")?;
    for (section, series) in [
        ("interval", &truth.interval_max),
        ("fencepost", &truth.fencepost_addresses),
        ("fencepost-prefix", &truth.fencepost_prefixes),
    ] {
        writeln!(out, "# section {section}")?;
        for (i, v) in series.iter().enumerate() {
            writeln!(out, "{i}\t{v}")?;
        }
    }
    Ok(())
}

pub fn write_manifest(params: &SynthParams, mut out: impl Write) -> Result<()> {
    writeln!(out, "# kip synth manifest v1")?;
    writeln!(out, "seed\t{}", params.seed)?;
    writeln!(out, "hosts\t{}", params.hosts)?;
    writeln!(out, "practice\t{}", params.practice.token())?;
    writeln!(out, "mean_lifetime_hours\t{}", params.mean_lifetime_hours)?;
    writeln!(out, "events_per_hour\t{}", params.events_per_hour)?;
    writeln!(
        out,
        "grid\t{}\t{}\t{}",
        params.grid.start(),
        params.grid.interval_seconds(),
        params.grid.intervals()
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::SeriesStat;
    use crate::aggregate::{CountMode, KipConfig};
    use crate::pipeline::{run_pipeline, PipelineConfig};

    fn week_grid() -> TimeGrid {
        TimeGrid::new(1_600_000_000, 3_600, 168).unwrap()
    }

    fn subnet(s: &str) -> Prefix {
        Prefix::new(s.parse().unwrap(), 64)
    }

    #[test]
    fn generation_is_deterministic_and_well_formed() {
        let params = SynthParams::new(40, Practice::JpStyle, week_grid(), 7);
        let a = generate(&params).unwrap();
        let b = generate(&params).unwrap();
        assert_eq!(a, b);
        assert!(generate(&SynthParams { seed: 8, ..params }).unwrap() != a);

        let mut seen = HashSet::new();
        for host in &a.hosts {
            assert_eq!(host.subnet.length(), 64);
            // JP-style: the bits between /48 and /64 stay zero.
            assert_eq!(host.subnet.base().subnet64() & 0xffff, 0);
            for asg in &host.assignments {
                assert!(seen.insert(asg.address));
                assert_eq!(asg.address.subnet64(), host.subnet.base().subnet64());
                // IID bit 7 (universal/local) cleared.
                assert!(!asg.address.bit(64 + 7));
                assert!(asg.span.0 < asg.span.1);
                for &t in &asg.activity {
                    assert!(asg.span.0 <= t && t < asg.span.1);
                    assert!(a.grid.interval_of(t).is_ok());
                }
            }
        }
        assert!(a.total_events() > 0);
    }

    #[test]
    fn dispersed_plan_reuses_48s() {
        let params = SynthParams::new(64, Practice::Dispersed, week_grid(), 3);
        let scenario = generate(&params).unwrap();
        let distinct_48s: HashSet<u64> =
            scenario.hosts.iter().map(|h| h.subnet.base().subnet64() >> 16).collect();
        assert!(distinct_48s.len() < scenario.hosts.len());
        let distinct_64s: HashSet<u64> =
            scenario.hosts.iter().map(|h| h.subnet.base().subnet64()).collect();
        assert_eq!(distinct_64s.len(), scenario.hosts.len());
    }

    #[test]
    fn oracle_matches_hand_computed_truth() {
        let grid = TimeGrid::new(0, 3_600, 4).unwrap();
        let scenario = Scenario {
            grid,
            seed: 0,
            hosts: vec![
                GroundTruthHost {
                    subnet: subnet("2001:db8:1::"),
                    assignments: vec![Assignment {
                        address: "2001:db8:1::71ac:9e02:44d8:1b63".parse().unwrap(),
                        span: (0, 7_200),
                        activity: vec![30, 7_000],
                    }],
                },
                GroundTruthHost {
                    subnet: subnet("2001:db8:2::"),
                    assignments: vec![Assignment {
                        address: "2001:db8:2::c5f1:08a7:92e4:3d06".parse().unwrap(),
                        span: (3_600, 14_400),
                        activity: vec![3_700],
                    }],
                },
            ],
        };
        let truth = oracle_truth(&scenario);
        assert_eq!(truth.fencepost_addresses, vec![2, 1, 1]);
        assert_eq!(truth.fencepost_prefixes, vec![2, 1, 1]);
        assert_eq!(truth.interval_max, vec![2, 2, 1, 1]);
    }

    #[test]
    fn disjoint_spans_inside_one_interval_peak_at_one() {
        let grid = TimeGrid::new(0, 3_600, 3).unwrap();
        let mk = |subnet_s: &str, addr: &str, on: i64, off: i64| GroundTruthHost {
            subnet: subnet(subnet_s),
            assignments: vec![Assignment {
                address: addr.parse().unwrap(),
                span: (on, off),
                activity: vec![on],
            }],
        };
        let scenario = Scenario {
            grid,
            seed: 0,
            hosts: vec![
                mk("2001:db8:1::", "2001:db8:1::19e2:7c44:a80f:5b31", 3_700, 4_000),
                mk("2001:db8:2::", "2001:db8:2::4d18:b3c6:0e97:2fa5", 4_100, 4_400),
                mk("2001:db8:3::", "2001:db8:3::8c53:f2d1:667a:90be", 4_500, 4_800),
            ],
        };
        let truth = oracle_truth(&scenario);
        assert_eq!(truth.interval_max, vec![0, 1, 0]);
        assert_eq!(truth.fencepost_addresses, vec![0, 0]);
    }

    #[test]
    fn bridged_episode_bounds_are_tight_for_one_host() {
        let grid = TimeGrid::new(0, 3_600, 8).unwrap();
        let scenario = Scenario {
            grid,
            seed: 0,
            hosts: vec![GroundTruthHost {
                subnet: subnet("2001:db8::"),
                assignments: vec![
                    Assignment {
                        address: "2001:db8::30fa:82e1:55c7:d904".parse().unwrap(),
                        span: (3_600, 19_800),
                        activity: vec![4_200, 18_600],
                    },
                    Assignment {
                        address: "2001:db8::b925:1c6e:07d3:4af8".parse().unwrap(),
                        span: (3_650, 19_850),
                        activity: vec![4_300, 18_700],
                    },
                ],
            }],
        };
        let mut log = Vec::new();
        write_log(&scenario, &mut log).unwrap();
        let cfg = PipelineConfig::new(
            grid,
            KipConfig::new(2, SeriesStat::Min, CountMode::PrefixCount),
        );
        let out = run_pipeline(log.as_slice(), &cfg).unwrap();
        let report = check_soundness(&scenario, &out.run);
        assert!(report.clean(), "unexpected violations: {report:?}");
        // Both spans cover fenceposts 1..=4; the episodes say exactly that.
        // Truth additionally has span 1 alive at fencepost 0 (it opens at
        // that very instant), which no activity can reveal.
        assert_eq!(out.run.address_fenceposts, vec![0, 2, 2, 2, 2, 0, 0]);
        assert_eq!(report.fencepost_mass, (8, 9));
    }

    #[test]
    fn random_scenarios_never_overcount() {
        for seed in 0..25 {
            let practice =
                if seed % 2 == 0 { Practice::JpStyle } else { Practice::Dispersed };
            let grid = TimeGrid::new(1_600_000_000, 3_600, 24 + (seed as u32 % 5) * 12)
                .unwrap();
            let mut params = SynthParams::new(10 + seed as u32, practice, grid, seed);
            params.mean_lifetime_hours = 2.0 + seed as f64 / 5.0;
            let scenario = generate(&params).unwrap();
            let mut log = Vec::new();
            write_log(&scenario, &mut log).unwrap();
            let cfg = PipelineConfig::new(
                grid,
                KipConfig::new(2, SeriesStat::Min, CountMode::PrefixCount),
            );
            let out = run_pipeline(log.as_slice(), &cfg).unwrap();
            let report = check_soundness(&scenario, &out.run);
            assert!(report.clean(), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn truth_and_manifest_formats() {
        let grid = TimeGrid::new(0, 3_600, 3).unwrap();
        let scenario = Scenario {
            grid,
            seed: 5,
            hosts: vec![GroundTruthHost {
                subnet: subnet("2001:db8::"),
                assignments: vec![Assignment {
                    address: "2001:db8::30fa:82e1:55c7:d904".parse().unwrap(),
                    span: (0, 10_800),
                    activity: vec![60],
                }],
            }],
        };
        let mut buf = Vec::new();
        write_truth(&scenario, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# kip synth truth v1\n# section interval\n0\t1\n1\t1\n2\t1\n\
             # section fencepost\n0\t1\n1\t1\n\
             # section fencepost-prefix\n0\t1\n1\t1\n"
        );

        let params = SynthParams::new(1, Practice::Dispersed, grid, 5);
        let mut buf = Vec::new();
        write_manifest(&params, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# kip synth manifest v1\nseed\t5\nhosts\t1\npractice\tdispersed\n"));
        assert!(text.contains("grid\t0\t3600\t3\n"));
    }
}
