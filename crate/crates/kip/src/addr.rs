//! Address, prefix, and time-grid primitives shared by every other module.
//!
//! Bit positions are 1-based from the most significant bit: bit 1 of
//! `2001:db8::` is the leading `0` of `0x2`. A prefix of length `n` keeps
//! bits `1..=n` and zeroes the rest.

use std::fmt;
use std::net::Ipv6Addr;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A full 128-bit IPv6 address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address128(u128);

impl Address128 {
    pub const UNSPECIFIED: Address128 = Address128(0);

    pub const fn from_bits(bits: u128) -> Self {
        Address128(bits)
    }

    pub const fn bits(self) -> u128 {
        self.0
    }

    /// High 64 bits: the /64 subnet the address lives in.
    pub const fn subnet64(self) -> u64 {
        (self.0 >> 64) as u64
    }

    /// Low 64 bits: the interface identifier.
    pub const fn iid(self) -> u64 {
        self.0 as u64
    }

    /// Value of 1-based bit `pos` (1 = most significant).
    pub fn bit(self, pos: u8) -> bool {
        assert!((1..=128).contains(&pos), "bit position {pos} out of 1..=128");
        (self.0 >> (128 - pos as u32)) & 1 == 1
    }
}

impl fmt::Display for Address128 {
    /// Canonical text: lowercase, zero-compressed (RFC 5952, via std).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Ipv6Addr::from(self.0).fmt(f)
    }
}

impl fmt::Debug for Address128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address128({self})")
    }
}

impl From<Ipv6Addr> for Address128 {
    fn from(a: Ipv6Addr) -> Self {
        Address128(u128::from(a))
    }
}

impl FromStr for Address128 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_address(s)
    }
}

/// Parse any textual IPv6 form (full, compressed, embedded dotted-quad).
/// Scoped addresses (`%zone`) are rejected.
pub fn parse_address(s: &str) -> Result<Address128> {
    Ipv6Addr::from_str(s)
        .map(Address128::from)
        .map_err(|_| Error::AddressParse(s.to_string()))
}

/// Number of leading bits shared by `a` and `b` (0..=128).
pub fn common_prefix_len(a: Address128, b: Address128) -> u8 {
    (a.0 ^ b.0).leading_zeros() as u8
}

/// Zero every bit after `length`, yielding the covering prefix.
pub fn truncate_to(a: Address128, length: u8) -> Prefix {
    Prefix::new(a, length)
}

/// An IPv6 prefix: base address plus length. Bits past the length are
/// always zero in `base`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    base: Address128,
    length: u8,
}

impl Prefix {
    /// Build from any address inside the prefix; trailing bits are masked off.
    pub fn new(base: Address128, length: u8) -> Prefix {
        assert!(length <= 128, "prefix length {length} out of 0..=128");
        Prefix { base: Address128(base.0 & length_mask(length)), length }
    }

    pub const fn base(self) -> Address128 {
        self.base
    }

    pub const fn length(self) -> u8 {
        self.length
    }

    /// True when the first `length` bits of `a` equal this prefix.
    pub fn contains(self, a: Address128) -> bool {
        a.0 & length_mask(self.length) == self.base.0
    }

    /// True when `other` is fully inside this prefix (equal or longer).
    pub fn covers(self, other: Prefix) -> bool {
        other.length >= self.length && self.contains(other.base)
    }
}

fn length_mask(length: u8) -> u128 {
    match length {
        0 => 0,
        128 => u128::MAX,
        n => u128::MAX << (128 - n as u32),
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base, self.length)
    }
}

impl fmt::Debug for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Prefix({self})")
    }
}

impl FromStr for Prefix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (addr, len) = s
            .rsplit_once('/')
            .ok_or_else(|| Error::PrefixParse(s.to_string()))?;
        let base = parse_address(addr).map_err(|_| Error::PrefixParse(s.to_string()))?;
        let length: u8 = len.parse().map_err(|_| Error::PrefixParse(s.to_string()))?;
        if length > 128 {
            return Err(Error::PrefixParse(s.to_string()));
        }
        Ok(Prefix::new(base, length))
    }
}

/// A fixed observation window cut into equal intervals.
///
/// `w` intervals have `f = w - 1` interior boundaries ("fenceposts"); the
/// instant closing the final interval is not a fencepost because nothing is
/// observed beyond it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TimeGrid {
    start: i64,
    interval_seconds: u32,
    intervals: u32,
}

impl TimeGrid {
    /// Default interval width: one hour.
    pub const DEFAULT_INTERVAL_SECONDS: u32 = 3_600;
    /// Default window: one week of hourly intervals.
    pub const DEFAULT_INTERVALS: u32 = 168;

    pub fn new(start: i64, interval_seconds: u32, intervals: u32) -> Result<TimeGrid> {
        if interval_seconds == 0 {
            return Err(Error::BadGrid("interval_seconds must be positive".into()));
        }
        if intervals == 0 {
            return Err(Error::BadGrid("intervals must be positive".into()));
        }
        let span = interval_seconds as i64 * intervals as i64;
        if start.checked_add(span).is_none() {
            return Err(Error::BadGrid("window end overflows".into()));
        }
        Ok(TimeGrid { start, interval_seconds, intervals })
    }

    pub const fn start(&self) -> i64 {
        self.start
    }

    pub const fn interval_seconds(&self) -> u32 {
        self.interval_seconds
    }

    pub const fn intervals(&self) -> u32 {
        self.intervals
    }

    /// Number of interior boundaries: `w - 1`.
    pub const fn fenceposts(&self) -> u32 {
        self.intervals - 1
    }

    /// First instant past the window.
    pub const fn end(&self) -> i64 {
        self.start + self.interval_seconds as i64 * self.intervals as i64
    }

    /// Index of the half-open interval containing `t`, or `OutOfWindow`.
    pub fn interval_of(&self, t: i64) -> Result<u32> {
        if t < self.start || t >= self.end() {
            return Err(Error::OutOfWindow { timestamp: t, start: self.start, end: self.end() });
        }
        Ok(((t - self.start) / self.interval_seconds as i64) as u32)
    }

    /// Instant opening interval `idx`.
    pub fn interval_start(&self, idx: u32) -> i64 {
        assert!(idx <= self.intervals, "interval {idx} out of range");
        self.start + self.interval_seconds as i64 * idx as i64
    }

    /// Boundary instant between intervals `p` and `p + 1`.
    pub fn fencepost_instant(&self, p: u32) -> i64 {
        assert!(p < self.fenceposts(), "fencepost {p} out of range");
        self.interval_start(p + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn addr(s: &str) -> Address128 {
        parse_address(s).unwrap()
    }

    #[test]
    fn parse_and_canonical_form() {
        assert_eq!(addr("2001:DB8:0:0:0:0:0:1").to_string(), "2001:db8::1");
        assert_eq!(addr("2001:db8::192.168.1.1").bits() & 0xffff_ffff, 0xc0a8_0101);
        assert!(parse_address("fe80::1%eth0").is_err());
        assert!(parse_address("not-an-address").is_err());
    }

    #[test]
    fn halves() {
        let a = addr("2001:db8::117a:e091:b2bd:ca65");
        assert_eq!(a.subnet64(), 0x2001_0db8_0000_0000);
        assert_eq!(a.iid(), 0x117a_e091_b2bd_ca65);
    }

    #[test]
    fn common_prefix_lengths() {
        let a = addr("2001:db8::117a:e091:b2bd:ca65");
        let b = addr("2001:db8::21ad:6d24:641a:1314");
        assert_eq!(common_prefix_len(a, b), 66);
        assert_eq!(common_prefix_len(a, a), 128);
        assert_eq!(common_prefix_len(addr("::"), addr("8000::")), 0);
    }

    #[test]
    fn truncation_zero_fills() {
        let p = truncate_to(addr("2001:db8:370:128::7"), 55);
        assert_eq!(p.to_string(), "2001:db8:370::/55");
        assert!(p.contains(addr("2001:db8:370:128::7")));
        assert_eq!(truncate_to(addr("ffff::"), 0).to_string(), "::/0");
        assert_eq!(
            truncate_to(addr("2001:db8::9"), 128).base(),
            addr("2001:db8::9")
        );
    }

    #[test]
    fn containment_respects_length() {
        let p: Prefix = "2001:db8:370::/55".parse().unwrap();
        assert!(p.contains(addr("2001:db8:370:128::9")));
        // bit 55 of this subnet is 1, so it escapes the /55
        assert!(!p.contains(addr("2001:db8:370:228::9")));
        let root: Prefix = "::/0".parse().unwrap();
        assert!(root.contains(addr("ffff:ffff::1")));
    }

    #[test]
    fn prefix_text_round_trip() {
        for s in ["2001:db8:370::/55", "::/0", "2001:db8::1/128"] {
            let p: Prefix = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("2001:db8::/129".parse::<Prefix>().is_err());
        assert!("2001:db8::".parse::<Prefix>().is_err());
    }

    #[test]
    fn grid_indexing() {
        let g = TimeGrid::new(0, 3_600, 24).unwrap();
        assert_eq!(g.fenceposts(), 23);
        assert_eq!(g.interval_of(8 * 3_600 + 1_800).unwrap(), 8);
        assert_eq!(g.interval_of(0).unwrap(), 0);
        assert_eq!(g.interval_of(3_600).unwrap(), 1); // boundary belongs to the later interval
        assert!(g.interval_of(-1).is_err());
        assert!(g.interval_of(24 * 3_600).is_err());
        assert_eq!(g.fencepost_instant(0), 3_600);
        assert_eq!(g.fencepost_instant(22), 23 * 3_600);
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0, 0, 24).is_err());
        assert!(TimeGrid::new(0, 3_600, 0).is_err());
        let one = TimeGrid::new(0, 60, 1).unwrap();
        assert_eq!(one.fenceposts(), 0);
    }
}
