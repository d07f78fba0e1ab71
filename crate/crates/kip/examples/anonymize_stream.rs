//! Anonymize a log against a synthesized aggregate set: each address is
//! truncated to its longest matching prefix (suffix zero-filled), so every
//! output value stands for at least k simultaneously assigned /64s.
//!
//! ```text
//! cargo run --example anonymize_stream
//! ```

use std::fs::{self, File};
use std::io::BufReader;

use kip::activity::SeriesStat;
use kip::aggregate::{CountMode, KipConfig};
use kip::anonymize::{anonymize_address, anonymize_stream, build_matcher, StreamOptions};
use kip::pipeline::{run_pipeline, PipelineConfig};
use kip::TimeGrid;

fn main() -> anyhow::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/meeting3x64.log");
    let grid = TimeGrid::new(1_490_400_000, 3_600, 24)?;
    let config = PipelineConfig::new(
        grid,
        KipConfig::new(2, SeriesStat::Min, CountMode::PrefixCount),
    );

    // First pass: analyze the log and synthesize the aggregate set.
    let output = run_pipeline(BufReader::new(File::open(path)?), &config)?;
    let set = &output.synthesis.set;
    let matcher = build_matcher(set)?;

    // Second pass: rewrite the address field in place. Timestamps and any
    // trailing fields pass through byte-for-byte; residual addresses become
    // the sentinel so line counts still reconcile downstream.
    let mut anonymized = Vec::new();
    let stats = anonymize_stream(
        BufReader::new(File::open(path)?),
        &mut anonymized,
        &matcher,
        set.residual_policy,
        &StreamOptions::default(),
    )?;

    println!("{:<48} {}", "input", "anonymized");
    let original = fs::read_to_string(path)?;
    for (before, after) in original.lines().zip(String::from_utf8(anonymized)?.lines()) {
        println!("{before:<48} {after}");
    }
    println!();
    println!(
        "{} lines: {} rewritten, {} suppressed",
        stats.lines, stats.rewritten, stats.suppressed
    );

    // Truncation is idempotent: an already-anonymized value still matches
    // the same prefix and maps to itself, so republishing is harmless.
    let entry = set.entries[0];
    let once = anonymize_address(entry.prefix.base(), &matcher, set.residual_policy);
    let twice = anonymize_address(once.output, &matcher, set.residual_policy);
    println!();
    println!(
        "idempotence: {} -> {} -> {}",
        entry.prefix.base(),
        once.output,
        twice.output
    );
    Ok(())
}
