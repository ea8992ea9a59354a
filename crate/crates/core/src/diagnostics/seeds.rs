//! Seed derivation: seed `i` of a run is `mix(base + (i + 1) * GAMMA)` mapped
//! to `(0, 1)`, where `mix` is the splitmix64 finalizer.

pub const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed `index` of the run with `base`, uniform on the open unit interval.
pub fn seed_point(base: u64, index: u64) -> f64 {
    let z = mix64(base.wrapping_add(index.wrapping_add(1).wrapping_mul(GAMMA)));
    ((z >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub fn seed_points(base: u64, count: usize) -> Vec<f64> {
    (0..count as u64).map(|i| seed_point(base, i)).collect()
}
