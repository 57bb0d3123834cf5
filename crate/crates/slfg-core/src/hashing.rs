/// 64-bit FNV-1a. The std hasher is randomized per process; cache file names
/// and the mock embedder need a hash that is stable across runs and platforms.
pub(crate) fn fnv1a64(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in data {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
