//! Lower-bound the number of simultaneously assigned /64 prefixes across a
//! small network: per-/64 fencepost series, their network-wide sum, and the
//! resulting utilization summary.
//!
//! ```text
//! cargo run --example assignment_lower_bounds
//! ```

use std::fs::File;
use std::io::BufReader;

use kip::activity::{accumulate, series_stat, SeriesStat};
use kip::aggregate::{CountMode, KipConfig};
use kip::ingest::ingest_rows;
use kip::pipeline::{analyze, PipelineConfig};
use kip::render::render_fencepost_matrix;
use kip::report::summarize;
use kip::TimeGrid;

fn main() -> anyhow::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/meeting3x64.log");
    let grid = TimeGrid::new(1_490_400_000, 3_600, 24)?;
    let config = PipelineConfig::new(
        grid,
        KipConfig::new(2, SeriesStat::Min, CountMode::PrefixCount),
    );
    let (rows, _) = ingest_rows(BufReader::new(File::open(path)?), &grid)?;
    let run = analyze(&rows, &config);

    // Each /64 contributes a binary series over the 23 fenceposts (the
    // instants between hourly intervals): 1 where some episode provably
    // straddles the boundary, 0 where we cannot tell.
    println!("per-/64 assignment at each fencepost:");
    print!(
        "{}",
        render_fencepost_matrix(
            run.subnets.iter().map(|s| (s.subnet, s.fenceposts.0.as_slice())),
            &grid,
        )
    );

    // Binary series from disjoint /64s count distinct prefixes, so their
    // elementwise sum is a sound network-wide lower bound.
    let summed = accumulate(
        &run.subnets.iter().map(|s| s.fenceposts.0.clone()).collect::<Vec<_>>(),
    );
    println!();
    println!("sum over /64s:  {summed:?}");
    println!(
        "simultaneously assigned /64 prefixes: max {}, median {}",
        series_stat(&summed, SeriesStat::Max),
        series_stat(&summed, SeriesStat::Median),
    );

    // The same machinery at address granularity, plus interval bounds,
    // rolls up into the standard summary.
    println!();
    print!("{}", summarize(&run).human());
    Ok(())
}
