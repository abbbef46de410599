//! Sobol low-discrepancy sequence (Joe-Kuo direction numbers) with optional
//! random digital-shift scrambling.
//!
//! The all-zero first point of the raw sequence is skipped, so the first
//! point returned is `0.5` in every coordinate when unscrambled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input, Result};

const BITS: usize = 32;

/// `(s, a, m_1..m_s)` for dimensions 2..=10.
const JOE_KUO: [(u32, u32, &[u32]); 9] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
];

pub const MAX_DIM: usize = JOE_KUO.len() + 1;

#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    shift: Vec<u32>,
    state: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return input(format!("Sobol dimension must be in 1..={MAX_DIM}, got {dim}"));
        }
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - i);
        }
        directions.push(first);
        for &(s, a, m) in JOE_KUO.iter().take(dim - 1) {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for i in 0..BITS {
                v[i] = if i < s {
                    m[i] << (BITS - 1 - i)
                } else {
                    let mut x = v[i - s] ^ (v[i - s] >> s);
                    for j in 1..s {
                        if (a >> (s - 1 - j)) & 1 == 1 {
                            x ^= v[i - j];
                        }
                    }
                    x
                };
            }
            directions.push(v);
        }
        let mut seq = Sobol {
            directions,
            shift: vec![0; dim],
            state: vec![0; dim],
            index: 0,
        };
        seq.advance();
        Ok(seq)
    }

    /// XORs every coordinate with a seed-derived 32-bit mask.
    pub fn scrambled(dim: usize, seed: u64) -> Result<Self> {
        let mut seq = Self::new(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        seq.shift = (0..dim).map(|_| rng.random::<u32>()).collect();
        Ok(seq)
    }

    fn advance(&mut self) {
        // Gray-code order: flip the direction number of the lowest zero bit.
        let c = (!self.index).trailing_zeros() as usize;
        for (x, v) in self.state.iter_mut().zip(&self.directions) {
            *x ^= v[c];
        }
        self.index += 1;
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let scale = 1.0 / (1u64 << BITS) as f64;
        let p = self
            .state
            .iter()
            .zip(&self.shift)
            .map(|(x, s)| (x ^ s) as f64 * scale)
            .collect();
        self.advance();
        p
    }

    pub fn take_points(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.next_point()).collect()
    }
}
