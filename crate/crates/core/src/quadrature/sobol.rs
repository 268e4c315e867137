//! Sobol points (Joe-Kuo direction numbers) with Cranley-Patterson shifts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MAX_DIM: usize = 16;
const BITS: usize = 32;

// (s, a, m_1..m_s) for dimensions 2..=16; dimension 1 is van der Corput.
const JOE_KUO: [(u32, u32, &[u32]); MAX_DIM - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
];

#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
}

impl Sobol {
    /// Panics if `dim` is zero or above [`MAX_DIM`].
    pub fn new(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "Sobol dimension {dim} unsupported");
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (b, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - b);
        }
        directions.push(first);
        for &(s, a, m) in JOE_KUO.iter().take(dim - 1) {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for b in 0..BITS {
                v[b] = if b < s {
                    m[b] << (BITS - 1 - b)
                } else {
                    let mut x = v[b - s] ^ (v[b - s] >> s);
                    for k in 1..s {
                        if (a >> (s - 1 - k)) & 1 == 1 {
                            x ^= v[b - k];
                        }
                    }
                    x
                };
            }
            directions.push(v);
        }
        Self { directions }
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Writes point `index` of the sequence into `out`.
    pub fn point(&self, index: u32, out: &mut [f64]) {
        for (x, v) in out.iter_mut().zip(&self.directions) {
            let mut acc = 0u32;
            let mut i = index;
            let mut b = 0;
            while i != 0 {
                if i & 1 == 1 {
                    acc ^= v[b];
                }
                i >>= 1;
                b += 1;
            }
            *x = f64::from(acc) / 4_294_967_296.0;
        }
    }
}

/// Shift vector number `index` for a given seed. Each shift has its own
/// ChaCha stream, so shifts never depend on evaluation order.
pub fn shift(seed: u64, index: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..dim).map(|_| rng.gen::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points_match_reference() {
        let s = Sobol::new(3);
        let mut x = [0.0; 3];
        s.point(1, &mut x);
        assert_eq!(x, [0.5, 0.5, 0.5]);
        s.point(2, &mut x);
        assert_eq!(x, [0.25, 0.75, 0.75]);
        s.point(3, &mut x);
        assert_eq!(x, [0.75, 0.25, 0.25]);
    }

    #[test]
    fn each_coordinate_is_stratified() {
        let s = Sobol::new(MAX_DIM);
        let mut x = [0.0; MAX_DIM];
        let mut counts = vec![[0u32; 16]; MAX_DIM];
        for i in 0..256 {
            s.point(i, &mut x);
            for (c, v) in counts.iter_mut().zip(&x) {
                c[(v * 16.0) as usize] += 1;
            }
        }
        assert!(counts.iter().all(|c| c.iter().all(|&n| n == 16)));
    }

    #[test]
    fn shifts_are_reproducible_and_distinct() {
        assert_eq!(shift(42, 3, 5), shift(42, 3, 5));
        assert_ne!(shift(42, 3, 5), shift(42, 4, 5));
        assert_ne!(shift(42, 3, 5), shift(43, 3, 5));
    }
}
