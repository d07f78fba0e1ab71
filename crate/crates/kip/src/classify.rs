//! Interface-identifier classification and the plausible-randomness test.
//!
//! The low 64 bits of an IPv6 address (the IID) betray how it was made:
//! EUI-64 expansion leaves `ff:fe` in the middle, manual assignment leaves
//! almost everything zero, and privacy addresses look uniformly random.
//! For a set of addresses sharing a /64 we can go further than eyeballing:
//! if A independently drawn N-bit strings are distinct with probability
//! `p(A, N) = (S/S) * ((S-1)/S) * ... * ((S-A+1)/S)` where `S = 2^N`, then
//! observed discriminating prefix lengths beyond `64 + 1 + N` (with N chosen
//! so p clears a confidence bar) are implausible for genuinely random IIDs.

use std::sync::RwLock;

use crate::addr::{common_prefix_len, Address128};

/// Structural classes an IID can fall into, most specific first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IidClass {
    /// EUI-64 expansion of a MAC address: bytes 4-5 of the IID are `ff:fe`.
    IeeeDerived,
    /// Only the low two bytes are populated, e.g. `2001:db8::1`.
    LowByte,
    /// An IPv4 address parked in the low 32 bits.
    EmbeddedIpv4,
    /// A repeated filler byte (`::5555:5555:5555:1` and friends).
    PatternBytes,
    /// Nothing structural found; plausibly a randomized (privacy) IID.
    RandomizedCandidate,
}

impl IidClass {
    /// Stable lowercase token used in classification dumps.
    pub fn token(self) -> &'static str {
        match self {
            IidClass::IeeeDerived => "ieee-derived",
            IidClass::LowByte => "low-byte",
            IidClass::EmbeddedIpv4 => "embedded-ipv4",
            IidClass::PatternBytes => "pattern-bytes",
            IidClass::RandomizedCandidate => "randomized",
        }
    }
}

/// Classify one address from its IID bytes alone.
///
/// Detection order matters: `ff:fe` wins over everything, an embedded
/// dotted-quad wins over low-byte (which it structurally contains), and
/// repeated-byte patterns are checked last before falling through.
pub fn classify_iid_stateless(a: Address128) -> IidClass {
    let iid = a.iid().to_be_bytes();
    if iid[3] == 0xff && iid[4] == 0xfe {
        return IidClass::IeeeDerived;
    }
    // ::w.x.y.z style: upper half of the IID clear, plausible first octet.
    if iid[..4] == [0, 0, 0, 0] && iid[4] != 0 {
        return IidClass::EmbeddedIpv4;
    }
    if iid[..6] == [0, 0, 0, 0, 0, 0] {
        return IidClass::LowByte;
    }
    for value in 0..=0xffu8 {
        if iid.iter().filter(|&&b| b == value).count() >= 4 {
            return IidClass::PatternBytes;
        }
    }
    IidClass::RandomizedCandidate
}

/// Discriminating prefix length: one more bit than the longest prefix `a`
/// shares with any other observed address. `None` when there is no other
/// address to discriminate against.
pub fn compute_dpl(a: Address128, others: &[Address128]) -> Option<u8> {
    let best = others
        .iter()
        .filter(|&&o| o != a)
        .map(|&o| common_prefix_len(a, o))
        .max()?;
    Some(best + 1)
}

/// Discriminating prefix lengths for every address of a set at once.
///
/// Sorting makes each address's nearest neighbor adjacent, so this is
/// O(n log n) where the pairwise definition is quadratic. Duplicates are
/// treated as one observation (a duplicate cannot discriminate itself).
pub fn compute_dpl_all(addrs: &[Address128]) -> Vec<Option<u8>> {
    let mut sorted: Vec<Address128> = addrs.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 2 {
        return vec![None; addrs.len()];
    }
    let neighbor_cpl = |a: Address128| -> u8 {
        let i = sorted.binary_search(&a).expect("address present in sorted set");
        let mut best = 0;
        if i > 0 {
            best = best.max(common_prefix_len(a, sorted[i - 1]));
        }
        if i + 1 < sorted.len() {
            best = best.max(common_prefix_len(a, sorted[i + 1]));
        }
        best
    };
    addrs.iter().map(|&a| Some(neighbor_cpl(a) + 1)).collect()
}

/// Stable days: count of distinct UTC days with activity, minus one.
/// Days are epoch-day numbers (`timestamp.div_euclid(86400)`).
pub fn compute_stable_days(active_days: &[i64]) -> u64 {
    assert!(!active_days.is_empty(), "stable days need at least one active day");
    let mut days = active_days.to_vec();
    days.sort_unstable();
    days.dedup();
    days.len() as u64 - 1
}

/// Probability that `addresses` independently drawn `bits`-bit strings are
/// pairwise distinct. Exactly 0 when there are more strings than values.
pub fn distinct_probability(addresses: u64, bits: u32) -> f64 {
    if addresses <= 1 {
        return 1.0;
    }
    if bits < 64 && addresses > (1u64 << bits) {
        return 0.0;
    }
    let s = (bits as f64).exp2();
    if addresses <= 1_000 {
        let mut p = 1.0;
        for j in 1..addresses {
            p *= (s - j as f64) / s;
        }
        p
    } else {
        // direct products underflow long before f64 loses the log sum
        let mut log_p = 0.0;
        for j in 1..addresses {
            log_p += (-(j as f64) / s).ln_1p();
        }
        log_p.exp()
    }
}

/// Smallest bit width at which `addresses` random strings stay pairwise
/// distinct with at least `confidence` probability.
pub fn required_distinct_bits(addresses: u64, confidence: f64) -> u32 {
    assert!(addresses >= 2, "distinctness needs at least two addresses");
    assert!(
        confidence > 0.0 && confidence < 1.0,
        "confidence must sit strictly inside (0, 1)"
    );
    let mut n = 64 - (addresses - 1).leading_zeros(); // smallest n with 2^n >= addresses
    while distinct_probability(addresses, n) < confidence {
        n += 1;
    }
    n
}

/// A confidence level plus a memoized `required_distinct_bits` table.
///
/// The table is filled incrementally: entry A is derived from entry A-1 by
/// extending a running log-probability, so building up to A costs O(A) log
/// evaluations amortized — even one entry at a time. Reads are concurrent;
/// fills are idempotent.
pub struct RandomnessPolicy {
    confidence: f64,
    table: RwLock<DistinctTable>,
}

#[derive(Default)]
struct DistinctTable {
    /// `bits[i]` = required bits for `i + 2` addresses.
    bits: Vec<u32>,
    /// ln P(distinct) for the last entry at its width; the running sum the
    /// next entry extends. Carrying it here keeps resumption O(1) instead
    /// of re-deriving the whole product on every fill.
    log_p: f64,
}

impl RandomnessPolicy {
    pub const DEFAULT_CONFIDENCE: f64 = 0.99;

    pub fn new(confidence: f64) -> RandomnessPolicy {
        assert!(
            confidence > 0.0 && confidence < 1.0,
            "confidence must sit strictly inside (0, 1)"
        );
        RandomnessPolicy { confidence, table: RwLock::new(DistinctTable::default()) }
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    /// Memoized [`required_distinct_bits`] at this policy's confidence.
    pub fn required_bits(&self, addresses: u64) -> u32 {
        assert!(addresses >= 2, "distinctness needs at least two addresses");
        let idx = (addresses - 2) as usize;
        if let Some(&n) = self.table.read().expect("policy lock").bits.get(idx) {
            return n;
        }
        let mut table = self.table.write().expect("policy lock");
        if table.bits.len() <= idx {
            extend_required_bits(&mut table, idx + 1, self.confidence);
        }
        table.bits[idx]
    }

    /// Longest discriminating prefix a plausibly random /64 may show for a
    /// set of this size: 64 subnet bits, the reserved universal/local bit,
    /// and the distinct-bit requirement.
    pub fn max_plausible_dpl(&self, addresses: u64) -> u32 {
        64 + 1 + self.required_bits(addresses)
    }
}

/// Grow the table until it has `len` entries (entry i = required bits for
/// i + 2 addresses). The carried `log_p` is extended by one factor per new
/// entry and recomputed in full only when the width steps up, which totals
/// O(len) work because widths step geometrically.
fn extend_required_bits(table: &mut DistinctTable, len: usize, confidence: f64) {
    let ln_conf = confidence.ln();
    if table.bits.is_empty() {
        let n = required_distinct_bits(2, confidence);
        table.log_p = log_distinct(2, n);
        table.bits.push(n);
    }
    let mut n = *table.bits.last().expect("seeded above");
    while table.bits.len() < len {
        let a = table.bits.len() as u64 + 2; // table entry being computed
        let s = (n as f64).exp2();
        table.log_p += (-((a - 1) as f64) / s).ln_1p();
        while table.log_p < ln_conf {
            n += 1;
            table.log_p = log_distinct(a, n);
        }
        table.bits.push(n);
    }
}

fn log_distinct(addresses: u64, bits: u32) -> f64 {
    let s = (bits as f64).exp2();
    let mut log_p = 0.0;
    for j in 1..addresses {
        log_p += (-(j as f64) / s).ln_1p();
    }
    log_p
}

/// Do the discriminating prefix lengths inside one /64 stay within what
/// genuinely random IIDs would show?
///
/// All addresses must share a /64 and have been classified
/// [`IidClass::RandomizedCandidate`]; the caller vouches for both.
pub fn plausible_random_set(addrs: &[Address128], policy: &RandomnessPolicy) -> bool {
    assert!(addrs.len() >= 2, "plausibility needs at least two addresses");
    let subnet = addrs[0].subnet64();
    assert!(
        addrs.iter().all(|a| a.subnet64() == subnet),
        "plausibility test mixes /64 subnets"
    );
    let mut sorted = addrs.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 2 {
        return true; // one distinct value discriminates nothing
    }
    let max_cpl = sorted
        .windows(2)
        .map(|w| common_prefix_len(w[0], w[1]))
        .max()
        .expect("at least one adjacent pair");
    u32::from(max_cpl) + 1 <= policy.max_plausible_dpl(sorted.len() as u64)
}

/// Per-address classification record as emitted in dumps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AddressClassification {
    pub address: Address128,
    pub iid_class: IidClass,
    /// Discriminating prefix length against all other observed addresses.
    pub dpl: Option<u8>,
    pub stable_days: u64,
}

impl AddressClassification {
    /// Tab-separated dump line: address, class, dpl (`-` if alone), sd.
    pub fn dump_line(&self) -> String {
        let dpl = match self.dpl {
            Some(d) => d.to_string(),
            None => "-".to_string(),
        };
        format!("{}\t{}\t{}\t{}", self.address, self.iid_class.token(), dpl, self.stable_days)
    }
}
