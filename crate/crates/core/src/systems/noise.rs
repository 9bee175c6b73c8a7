//! Hash-based pseudo-noise: a pure function of quantized inputs.

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Quantizes `v` to a multiple of `quantum` and returns the integer index.
fn quantize(v: f64, quantum: f64) -> i64 {
    libm::round(v / quantum) as i64
}

/// Hash of `values` quantized coordinatewise by `quanta`, salted by `key`.
pub fn hash_quantized(key: u64, values: &[f64], quanta: &[f64]) -> u64 {
    let mut h = mix(key);
    for (v, q) in values.iter().zip(quanta) {
        h = mix(h ^ quantize(*v, *q) as u64);
    }
    h
}

/// Uniform-looking value in `[-1, 1]` determined by the hash.
pub fn unit_noise(h: u64) -> f64 {
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * u - 1.0
}
