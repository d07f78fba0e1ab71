//! Referee the analysis against known ground truth: generate a synthetic
//! scenario where every assignment's real on/off times are recorded, run
//! the observation-only pipeline over the logged activity, and verify the
//! inferred counts never exceed the true ones.
//!
//! ```text
//! cargo run --example soundness_oracle
//! ```

use std::collections::BTreeMap;
use std::io::BufReader;

use kip::activity::SeriesStat;
use kip::aggregate::{CountMode, KipConfig};
use kip::ingest::ingest_rows;
use kip::pipeline::{analyze, PipelineConfig};
use kip::synth::{check_soundness, generate, oracle_truth, write_log, Practice, SynthParams};
use kip::TimeGrid;

fn main() -> anyhow::Result<()> {
    let grid = TimeGrid::new(1_490_400_000, 3_600, 96)?;
    let params = SynthParams::new(300, Practice::Dispersed, grid, 42);
    let scenario = generate(&params)?;
    println!(
        "scenario: {} hosts, {} temporary addresses, {} activity events",
        scenario.hosts.len(),
        scenario.total_addresses(),
        scenario.total_events()
    );

    // The pipeline sees only the activity log the scenario would emit.
    let mut log = Vec::new();
    write_log(&scenario, &mut log)?;
    let config = PipelineConfig::new(
        grid,
        KipConfig::new(2, SeriesStat::Min, CountMode::PrefixCount),
    );
    let (rows, _) = ingest_rows(BufReader::new(log.as_slice()), &grid)?;
    let run = analyze(&rows, &config);

    // The oracle sees the real spans and sweeps their endpoints exactly.
    let truth = oracle_truth(&scenario);
    let report = check_soundness(&scenario, &run);
    println!();
    println!("violations (bound > truth): {} interval, {} address-fencepost, {} prefix-fencepost",
        report.interval_violations.len(),
        report.address_fencepost_violations.len(),
        report.prefix_fencepost_violations.len(),
    );
    println!("sound: {}", report.clean());

    // Lower bounds leave slack by design: sightings prove assignment, but
    // assignment does not force sightings. Show where the gap sits.
    let (bound_mass, truth_mass) = report.interval_mass;
    println!();
    println!(
        "interval mass: bound {} vs truth {} ({:.1}% recovered)",
        bound_mass,
        truth_mass,
        100.0 * bound_mass as f64 / truth_mass as f64
    );

    let mut gaps = BTreeMap::new();
    for (b, t) in run.interval_bounds.0.iter().zip(&truth.interval_max) {
        *gaps.entry(t - b).or_insert(0u32) += 1;
    }
    println!("per-interval slack histogram (truth - bound: intervals):");
    for (gap, n) in gaps {
        println!("  {gap:>3}: {n}");
    }
    Ok(())
}
