//! Draw the activity matrix for one busy /64: first the raw per-address
//! view (who was seen when, with classifications), then the inferred view
//! that bridges sightings into assignment episodes and prints the
//! per-interval lower bounds and fencepost row.
//!
//! ```text
//! cargo run --example activity_matrix
//! ```

use std::fs::File;
use std::io::BufReader;

use kip::aggregate::{CountMode, KipConfig};
use kip::activity::SeriesStat;
use kip::ingest::ingest_rows;
use kip::pipeline::{analyze, PipelineConfig};
use kip::render::{render_inferred_block, render_raw_block};
use kip::TimeGrid;

fn main() -> anyhow::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/meeting24.log");
    // One observed day, hourly bins: 24 intervals, 23 fenceposts between.
    let grid = TimeGrid::new(1_490_400_000, 3_600, 24)?;

    let config = PipelineConfig::new(
        grid,
        KipConfig::new(2, SeriesStat::Min, CountMode::PrefixCount),
    );
    let (rows, counts) = ingest_rows(BufReader::new(File::open(path)?), &grid)?;
    println!("ingested {} events from {}", counts.parsed, path);
    println!();

    let run = analyze(&rows, &config);
    for subnet in &run.subnets {
        // Raw view: `#` marks activity; the left columns carry each
        // address's discriminating prefix length and stable-day count.
        print!("{}", render_raw_block(subnet.subnet, &subnet.rows, &grid));
        println!();

        // Inferred view: rows sort by first activity; `X` short episodes,
        // `>`/`@`/`<` bridged ones. The digits row is the per-interval
        // lower bound on simultaneously assigned addresses, and the final
        // row marks fenceposts where the /64 was provably assigned.
        print!("{}", render_inferred_block(&subnet.rows, &grid)?);
    }

    let bounds = &run.interval_bounds.0;
    println!();
    println!(
        "simultaneously assigned addresses: at least {} at the day's peak",
        bounds.iter().max().unwrap()
    );
    Ok(())
}
