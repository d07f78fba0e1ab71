//! Classify addresses by IID structure, compute discriminating prefix
//! lengths, and ask whether a /64's population looks pseudorandom.
//!
//! ```text
//! cargo run --example classify_addresses
//! ```

use kip::addr::parse_address;
use kip::classify::{
    classify_iid_stateless, compute_dpl_all, distinct_probability, required_distinct_bits,
    plausible_random_set, RandomnessPolicy,
};

fn main() {
    // A mixed bag of IID construction styles sharing one /64.
    let sample = [
        "2001:db8:1:0:21b:21ff:fe9a:1234",  // EUI-64: ff:fe in the middle
        "2001:db8:1::1",                    // low-byte: router or static host
        "2001:db8:1::192.0.2.7",            // IPv4 parked in the low bits
        "2001:db8:1:0:5555:5555:5555:1",    // repeated filler byte
        "2001:db8:1:0:d9c1:6b22:8a0f:3e51", // plausibly random (privacy IID)
        "2001:db8:1:0:7a20:95ce:4d11:fb08", // plausibly random
    ];
    let addrs: Vec<_> = sample.iter().map(|s| parse_address(s).unwrap()).collect();

    // The discriminating prefix length (DPL) of an address is one bit more
    // than the longest prefix it shares with any *other* observed address:
    // the shortest unambiguous handle for it in this population.
    let dpls = compute_dpl_all(&addrs);

    println!("{:<34} {:<14} dpl", "address", "iid class");
    for (addr, dpl) in addrs.iter().zip(&dpls) {
        println!(
            "{:<34} {:<14} {}",
            addr.to_string(),
            classify_iid_stateless(*addr).token(),
            dpl.map_or("-".into(), |d| d.to_string()),
        );
    }

    // How many leading IID bits must be distinct before we believe a set of
    // A addresses is pseudorandom? The birthday bound answers: with N bits,
    // A draws collide with probability 1 - distinct_probability(A, N).
    println!();
    println!("P(2 random 6-bit values distinct) = {:.12}", distinct_probability(2, 6));
    for a in [2, 16, 100, 10_000] {
        let bits = required_distinct_bits(a, 0.99);
        println!(
            "{a:>6} addresses need {bits:>2} distinct leading bits; \
             DPLs up to {} stay plausible",
            64 + 1 + bits
        );
    }

    // The per-/64 verdict gates episode bridging downstream: only a
    // plausibly-random population justifies assuming one IID was not
    // re-drawn between sightings.
    let policy = RandomnessPolicy::new(0.99);
    let candidates: Vec<_> = addrs[4..].to_vec();
    println!();
    println!(
        "the two privacy IIDs pass the distinctness test: {}",
        plausible_random_set(&candidates, &policy)
    );
}
