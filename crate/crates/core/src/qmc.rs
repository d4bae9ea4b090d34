//! Sobol' point sets, digital-shift and Owen (nested uniform) scrambling, and
//! the map to Gaussian noise rows.
//!
//! Points are generated in Gray-code order with 32-bit direction numbers from
//! the Joe–Kuo `new-joe-kuo-6.21201` table, truncated to the first 1111
//! dimensions. Randomized coordinates carry 53 significant bits: the top 32
//! come from the (scrambled) net, the remaining 21 are uniform random digits.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io;
use crate::noise::{NoiseBatch, NoiseDesign};
use crate::rng::{splitmix64, RngStream};
use crate::special::normal_quantile;

/// Largest supported dimension (size of the bundled direction-number table).
pub const MAX_DIM: usize = 1111;
const BITS: usize = 32;
const LOW_BITS: u32 = 53 - BITS as u32;
const UNIT: f64 = 1.0 / (1u64 << 53) as f64;
const CLAMP_LO: f64 = UNIT;
const CLAMP_HI: f64 = 1.0 - UNIT;

static JOE_KUO: &str = include_str!("../data/joe_kuo_d1111.txt");

fn direction_table() -> &'static [[u32; BITS]] {
    static TABLE: OnceLock<Vec<[u32; BITS]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(MAX_DIM);
        let mut first = [0u32; BITS];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - i);
        }
        table.push(first);
        for line in JOE_KUO.lines().skip(1) {
            let fields: Vec<u32> = line.split_whitespace().map(|t| t.parse().expect("table entry")).collect();
            let s = fields[1] as usize;
            let a = fields[2];
            let mut m = [0u32; BITS];
            m[..s].copy_from_slice(&fields[3..3 + s]);
            for i in s..BITS {
                let mut v = m[i - s] ^ (m[i - s] << s);
                for k in 1..s {
                    if (a >> (s - 1 - k)) & 1 == 1 {
                        v ^= m[i - k] << k;
                    }
                }
                m[i] = v;
            }
            let mut dirs = [0u32; BITS];
            for i in 0..BITS {
                dirs[i] = m[i] << (BITS - 1 - i);
            }
            table.push(dirs);
        }
        debug_assert_eq!(table.len(), MAX_DIM);
        table
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Randomization {
    None,
    DigitalShift { seed: u64 },
    OwenScramble { seed: u64 },
}

impl Randomization {
    pub fn name(&self) -> &'static str {
        match self {
            Randomization::None => "none",
            Randomization::DigitalShift { .. } => "digital_shift",
            Randomization::OwenScramble { .. } => "owen_scramble",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            Randomization::None => None,
            Randomization::DigitalShift { seed } | Randomization::OwenScramble { seed } => Some(seed),
        }
    }
}

/// An `n x d` Sobol' point set (row-major) and how it was randomized.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolSet {
    d: usize,
    n: usize,
    raw: Vec<u32>,
    points: Vec<f64>,
    randomization: Randomization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolSidecar {
    pub n: usize,
    pub d: usize,
    pub randomization: Randomization,
}

impl SobolSet {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn randomization(&self) -> Randomization {
        self.randomization
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.points
    }

    pub fn save(&self, stem: &Path) -> Result<()> {
        let meta = SobolSidecar { n: self.n, d: self.d, randomization: self.randomization };
        io::write_matrix(stem, &self.points, &meta)
    }
}

/// The first `n` points (Gray-code order, index 0 at the origin) of the
/// `d`-dimensional Sobol' sequence.
pub fn sobol_points(d: usize, n: usize) -> Result<SobolSet> {
    if d == 0 {
        return Err(invalid("Sobol' dimension must be at least 1"));
    }
    if d > MAX_DIM {
        return Err(Error::UnsupportedDimension { requested: d, max: MAX_DIM });
    }
    if n == 0 || !n.is_power_of_two() {
        return Err(invalid(format!("Sobol' point count must be a power of two, got {n}")));
    }
    if n > 1usize << BITS {
        return Err(invalid("Sobol' point count exceeds 2^32"));
    }
    let table = &direction_table()[..d];
    let mut raw = vec![0u32; n * d];
    for i in 1..n {
        let c = i.trailing_zeros() as usize;
        for j in 0..d {
            raw[i * d + j] = raw[(i - 1) * d + j] ^ table[j][c];
        }
    }
    let scale = 1.0 / (1u64 << BITS) as f64;
    let points = raw.iter().map(|&v| v as f64 * scale).collect();
    Ok(SobolSet { d, n, raw, points, randomization: Randomization::None })
}

fn to_unit(v53: u64) -> f64 {
    ((v53 as f64 + 0.5) * UNIT).clamp(CLAMP_LO, CLAMP_HI)
}

fn dim_key(seed: u64, dim: usize) -> u64 {
    splitmix64(splitmix64(seed) ^ (dim as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// The 53-bit shift word applied to dimension `dim` under `DigitalShift(seed)`.
fn shift_word(seed: u64, dim: usize) -> u64 {
    splitmix64(dim_key(seed, dim) ^ 0xd1b5_4a32_d192_ed03) >> 11
}

/// The uniform vector a digital shift XORs onto every point; the origin maps
/// exactly onto it.
pub fn digital_shift_vector(seed: u64, d: usize) -> Vec<f64> {
    (0..d).map(|j| to_unit(shift_word(seed, j))).collect()
}

/// Nested uniform scramble of one 32-bit coordinate: the flip applied to each
/// digit is a hash of every digit above it, so the permutation tree is Owen's.
fn owen_scramble(x: u32, key: u64) -> u64 {
    let mut out = 0u32;
    for k in 0..BITS {
        let prefix = if k == 0 { 0 } else { (x >> (BITS - k)) as u64 };
        let flip = (splitmix64(key ^ ((k as u64) << 32 | prefix)) >> 63) as u32;
        let bit = (x >> (BITS - 1 - k)) & 1;
        out |= (bit ^ flip) << (BITS - 1 - k);
    }
    let low = splitmix64(key ^ (1u64 << 40) ^ x as u64) >> (64 - LOW_BITS);
    ((out as u64) << LOW_BITS) | low
}

/// Randomizes an unrandomized Sobol' set. Every output coordinate lies in
/// `[2^-53, 1 - 2^-53]`.
pub fn randomize(set: &SobolSet, method: Randomization) -> Result<SobolSet> {
    if set.randomization != Randomization::None {
        return Err(invalid("set is already randomized"));
    }
    let d = set.d;
    let points = match method {
        Randomization::None => return Err(invalid("randomize needs DigitalShift or OwenScramble")),
        Randomization::DigitalShift { seed } => {
            let shifts: Vec<u64> = (0..d).map(|j| shift_word(seed, j)).collect();
            set.raw
                .iter()
                .enumerate()
                .map(|(idx, &x)| to_unit(((x as u64) << LOW_BITS) ^ shifts[idx % d]))
                .collect()
        }
        Randomization::OwenScramble { seed } => {
            let keys: Vec<u64> = (0..d).map(|j| dim_key(seed, j)).collect();
            set.raw.iter().enumerate().map(|(idx, &x)| to_unit(owen_scramble(x, keys[idx % d]))).collect()
        }
    };
    Ok(SobolSet { d, n: set.n, raw: set.raw.clone(), points, randomization: method })
}

/// `R` independently randomized copies of the same set; replicate `r` uses the
/// seed of `stream.child(r)`.
pub fn replicates(set: &SobolSet, owen: bool, stream: RngStream, count: usize) -> Result<Vec<SobolSet>> {
    (0..count)
        .map(|r| {
            let seed = stream.child(r as u64).generator().next_u64();
            let method = if owen {
                Randomization::OwenScramble { seed }
            } else {
                Randomization::DigitalShift { seed }
            };
            randomize(set, method)
        })
        .collect()
}

/// Applies the standard-normal quantile coordinatewise.
pub fn to_gaussian(set: &SobolSet) -> Result<NoiseBatch> {
    let seed = set
        .randomization
        .seed()
        .ok_or_else(|| invalid("to_gaussian requires a randomized set (the origin maps to -inf)"))?;
    let rows = set.points.iter().map(|&u| normal_quantile(u)).collect();
    NoiseBatch::from_rows(
        rows,
        set.n,
        set.d,
        NoiseDesign::Rqmc { randomization: set.randomization.name().to_string(), seed },
    )
}
