//! Space-filling designs: Latin hypercubes and Sobol sequences on `[0,1]^d`.

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Random Latin hypercube: one point per stratum in every coordinate.
pub fn latin_hypercube(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Stream::new(seed);
    let mut pts = vec![vec![0.0; d]; n];
    for j in 0..d {
        let perm = rng.permutation(n);
        for (i, p) in pts.iter_mut().enumerate() {
            p[j] = (perm[i] as f64 + rng.uniform()) / n as f64;
        }
    }
    pts
}

/// Latin hypercube improved for the maximin criterion.
///
/// Starts from a random hypercube and performs coordinate swaps between two
/// rows, keeping a swap when it lowers the Morris-Mitchell `phi_p` criterion
/// (p = 50), which is a smooth surrogate of the minimum pairwise distance.
pub fn maximin_lhs(n: usize, d: usize, seed: u64, sweeps: usize) -> Vec<Vec<f64>> {
    let mut pts = latin_hypercube(n, d, seed);
    if n < 3 {
        return pts;
    }
    let mut rng = Stream::new(seed ^ 0xA5A5_5A5A_0F0F_F0F0);
    let p = 50.0;
    // Scaled inverse-distance terms, kept as a full matrix for O(n) updates.
    let mut inv = vec![vec![0.0; n]; n];
    let term = |a: &[f64], b: &[f64]| {
        let dist = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        (1.0 / dist.max(1e-12)).powf(p)
    };
    // Normalize by the largest term so powers stay finite.
    let mut scale = 0.0f64;
    for i in 0..n {
        for k in (i + 1)..n {
            let dist = dist2(&pts[i], &pts[k]).sqrt().max(1e-12);
            scale = scale.max(1.0 / dist);
        }
    }
    let norm = scale.powf(p);
    for i in 0..n {
        for k in (i + 1)..n {
            let t = term(&pts[i], &pts[k]) / norm;
            inv[i][k] = t;
            inv[k][i] = t;
        }
    }
    let mut total: f64 = (0..n).map(|i| inv[i][(i + 1)..].iter().sum::<f64>()).sum();
    for _ in 0..sweeps * n * d {
        let a = rng.below(n);
        let mut b = rng.below(n - 1);
        if b >= a {
            b += 1;
        }
        let col = rng.below(d);
        let (va, vb) = (pts[a][col], pts[b][col]);
        pts[a][col] = vb;
        pts[b][col] = va;
        let mut new_a = vec![0.0; n];
        let mut new_b = vec![0.0; n];
        let mut delta = 0.0;
        for k in 0..n {
            if k != a && k != b {
                new_a[k] = term(&pts[a], &pts[k]) / norm;
                new_b[k] = term(&pts[b], &pts[k]) / norm;
                delta += new_a[k] - inv[a][k] + new_b[k] - inv[b][k];
            }
        }
        if delta < 0.0 && delta.is_finite() {
            for k in 0..n {
                if k != a && k != b {
                    inv[a][k] = new_a[k];
                    inv[k][a] = new_a[k];
                    inv[b][k] = new_b[k];
                    inv[k][b] = new_b[k];
                }
            }
            total += delta;
        } else {
            pts[a][col] = va;
            pts[b][col] = vb;
        }
    }
    debug_assert!(total.is_finite());
    pts
}

/// Smallest pairwise Euclidean distance of a point set.
pub fn min_distance(pts: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for k in (i + 1)..pts.len() {
            best = best.min(dist2(&pts[i], &pts[k]));
        }
    }
    best.sqrt()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// Primitive polynomials and initial direction numbers (Joe & Kuo, 2008),
// dimensions 2..=16 as (degree s, coefficient a, m_1..m_s).
const JOE_KUO: [(u32, u32, &[u32]); 15] = [
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

pub const SOBOL_MAX_DIM: usize = JOE_KUO.len() + 1;

const BITS: usize = 32;

/// Gray-code Sobol generator with an optional random digital shift.
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    shift: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(d: usize) -> Result<Self> {
        Self::with_shift(d, None)
    }

    /// Digitally shifted sequence; the shift is drawn from `seed`.
    pub fn scrambled(d: usize, seed: u64) -> Result<Self> {
        Self::with_shift(d, Some(seed))
    }

    fn with_shift(d: usize, seed: Option<u64>) -> Result<Self> {
        if d == 0 || d > SOBOL_MAX_DIM {
            return Err(Error::invalid(format!(
                "Sobol dimension must be in 1..={SOBOL_MAX_DIM}, got {d}"
            )));
        }
        let mut directions = Vec::with_capacity(d);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (31 - k);
        }
        directions.push(first);
        for &(s, a, m) in JOE_KUO.iter().take(d - 1) {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for k in 0..BITS {
                if k < s {
                    v[k] = m[k] << (31 - k);
                } else {
                    let mut x = v[k - s] ^ (v[k - s] >> s);
                    for i in 1..s {
                        if (a >> (s - 1 - i)) & 1 == 1 {
                            x ^= v[k - i];
                        }
                    }
                    v[k] = x;
                }
            }
            directions.push(v);
        }
        let shift = match seed {
            Some(seed) => {
                let mut rng = Stream::new(seed);
                (0..d).map(|_| (rng.uniform() * 4_294_967_296.0) as u32).collect()
            }
            None => vec![0; d],
        };
        Ok(Sobol { directions, state: vec![0; d], shift, index: 0 })
    }

    /// Next point; the all-zero first point of the unshifted sequence is skipped.
    pub fn next_point(&mut self) -> Vec<f64> {
        let c = self.index.trailing_ones() as usize;
        for (s, v) in self.state.iter_mut().zip(&self.directions) {
            *s ^= v[c.min(BITS - 1)];
        }
        self.index += 1;
        self.state
            .iter()
            .zip(&self.shift)
            .map(|(s, sh)| ((s ^ sh) as f64 + 0.5) / 4_294_967_296.0)
            .collect()
    }

    pub fn take_points(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.next_point()).collect()
    }
}
