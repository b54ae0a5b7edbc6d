//! Counter-based uniform sample streams.
//!
//! Coordinate `d` of sample `i` in stream `s` is a pure function of
//! `(seed, s, i, d)`, so blocks of samples can be generated in any order or in
//! parallel with identical results.

use rayon::prelude::*;

use crate::mdrf::mix64;

const STREAM_SALT: u64 = 0xD1B5_4A32_D192_ED03;
const INDEX_SALT: u64 = 0x8CB9_2BA7_2F3D_8DD7;

/// Uniform double in [0, 1) with 53 random bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn uniform(seed: u64, stream: u64, index: u64, coordinate: usize) -> f64 {
    let h = mix64(seed ^ (stream.wrapping_add(1)).wrapping_mul(STREAM_SALT));
    let h = mix64(h ^ index.wrapping_mul(INDEX_SALT));
    unit_f64(mix64(h ^ (coordinate as u64 + 1)))
}

/// Writes sample `index` of `stream` into `out`.
#[inline]
pub fn fill_point(seed: u64, stream: u64, index: u64, out: &mut [f64]) {
    for (d, slot) in out.iter_mut().enumerate() {
        *slot = uniform(seed, stream, index, d);
    }
}

pub fn point(seed: u64, stream: u64, index: u64, dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    fill_point(seed, stream, index, &mut x);
    x
}

/// `f` applied to `0..count`, results in index order.
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Latin hypercube sample of `count` points in `[0,1]^dim`.
pub fn latin_hypercube(seed: u64, count: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dim]; count];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..count).collect();
        // Fisher-Yates driven by the counter stream.
        for i in (1..count).rev() {
            let u = uniform(seed, 1 + 2 * d as u64, i as u64, 0);
            let j = ((u * (i + 1) as f64) as usize).min(i);
            strata.swap(i, j);
        }
        for (i, p) in points.iter_mut().enumerate() {
            let jitter = uniform(seed, 2 + 2 * d as u64, i as u64, 0);
            p[d] = (strata[i] as f64 + jitter) / count as f64;
        }
    }
    points
}
