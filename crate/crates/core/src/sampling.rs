//! Seeded, thread-count independent sampling.
//!
//! Work is cut into fixed-size chunks. Chunk `k` draws from a ChaCha8 stream
//! keyed by `(seed, k)` and results are collected in index order, so the
//! output never depends on how rayon schedules the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SampleRng = ChaCha8Rng;

pub const CHUNK: usize = 1024;

/// FNV-1a over the label, mixed into the seed with splitmix64.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, stream: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(rng, i)` for `i in 0..n` in parallel and returns results in order.
pub fn par_sample<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SampleRng, usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_for(seed, k as u64);
            (k * CHUNK..((k + 1) * CHUNK).min(n)).map(|i| f(&mut rng, i)).collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Like [`par_sample`] but only keeps the first few failures and a count.
pub fn par_failures<W, F>(n: usize, seed: u64, keep: usize, f: F) -> (usize, Vec<W>)
where
    W: Send,
    F: Fn(&mut SampleRng, usize) -> Option<W> + Sync,
{
    let found: Vec<W> = par_sample(n, seed, f).into_iter().flatten().collect();
    let count = found.len();
    (count, found.into_iter().take(keep).collect())
}

pub fn uniform(rng: &mut SampleRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Standard normal via Box-Muller.
pub fn gaussian(rng: &mut SampleRng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn unit_vector(rng: &mut SampleRng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

pub fn point_in_box(rng: &mut SampleRng, dim: usize, half_width: f64) -> Vec<f64> {
    (0..dim).map(|_| uniform(rng, -half_width, half_width)).collect()
}

/// Uniform in the ball of radius `r`.
pub fn point_in_ball(rng: &mut SampleRng, dim: usize, r: f64) -> Vec<f64> {
    let dir = unit_vector(rng, dim);
    let rad = r * rng.random::<f64>().powf(1.0 / dim as f64);
    dir.into_iter().map(|a| a * rad).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_of_thread_count() {
        let f = |rng: &mut SampleRng, i: usize| (i, rng.random::<u64>());
        let a = par_sample(5000, 9, f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| par_sample(5000, 9, f));
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, (j, _))| i == *j));
    }

    #[test]
    fn labels_separate_seeds() {
        assert_ne!(derive_seed(1, "cones"), derive_seed(1, "flows"));
        assert_eq!(derive_seed(1, "cones"), derive_seed(1, "cones"));
    }

    #[test]
    fn unit_vectors_are_unit() {
        let mut rng = rng_for(3, 0);
        for d in 1..5 {
            let v = unit_vector(&mut rng, d);
            assert!((v.iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
