//! Stateless seed mixing shared by capacity fields and campaigns.

/// SplitMix64 finalizer: a bijection on `u64` with full avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `replicate` at scale `scale` of a campaign.
///
/// For a fixed master seed the map is injective on `replicate, scale < 2^32`:
/// the pair packs into one word and `x ↦ mix64(mix64(master) ^ x)` is a
/// bijection.
pub fn derive_seed(master: u64, replicate: u64, scale: u64) -> u64 {
    debug_assert!(replicate < 1 << 32 && scale < 1 << 32);
    let packed = (replicate << 32) | (scale & 0xFFFF_FFFF);
    mix64(mix64(master) ^ packed)
}

/// Parses a seed written in decimal or as `0x`-prefixed hex.
pub fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed {s:?}: {e}"))
}
