//! Sobol low-discrepancy points with Joe–Kuo direction numbers.
//!
//! Points are generated in Gray-code order with 32-bit precision. A digital
//! shift (XOR with a per-dimension random word) randomises the sequence while
//! keeping its net structure.

use std::sync::OnceLock;

use rand::RngCore;

use super::rng::{stream, StreamDomain};
use crate::error::{invalid, Result};

const BITS: usize = 32;

static JOE_KUO: &str = include_str!("../../data/new-joe-kuo-6.100.txt");

/// `(s, a, m_1..m_s)` for dimensions 2..=100.
fn joe_kuo_table() -> &'static [(u32, u32, Vec<u32>)] {
    static TABLE: OnceLock<Vec<(u32, u32, Vec<u32>)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        JOE_KUO
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let f: Vec<u32> = l.split_whitespace().map(|t| t.parse().unwrap()).collect();
                (f[1], f[2], f[3..].to_vec())
            })
            .collect()
    })
}

pub const MAX_DIMENSION: usize = 100;

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = 1 << (31 - i);
        }
        return v;
    }
    let (s, a, m) = &joe_kuo_table()[dim - 1];
    let s = *s as usize;
    for i in 0..s.min(BITS) {
        v[i] = m[i] << (31 - i);
    }
    for i in s..BITS {
        v[i] = v[i - s] ^ (v[i - s] >> s);
        for k in 1..s {
            if (a >> (s - 1 - k)) & 1 == 1 {
                v[i] ^= v[i - k];
            }
        }
    }
    v
}

/// Gray-code Sobol generator.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    shift: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 || dimension > MAX_DIMENSION {
            return invalid(format!(
                "Sobol dimension {dimension} outside 1..={MAX_DIMENSION}"
            ));
        }
        Ok(Self {
            directions: (0..dimension).map(direction_numbers).collect(),
            state: vec![0; dimension],
            shift: vec![0; dimension],
            index: 0,
        })
    }

    /// Sobol sequence with a digital shift drawn from `seed`.
    pub fn shifted(dimension: usize, seed: u64) -> Result<Self> {
        let mut s = Self::new(dimension)?;
        let mut rng = stream(seed, StreamDomain::SobolShift, dimension as u64);
        for w in &mut s.shift {
            *w = rng.next_u32();
        }
        Ok(s)
    }

    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    /// Writes the next point (starting with index 0) into `out` as values in `[0, 1)`.
    pub fn next_point(&mut self, out: &mut [f64]) {
        const SCALE: f64 = 1.0 / 4_294_967_296.0;
        for ((o, &x), &sh) in out.iter_mut().zip(&self.state).zip(&self.shift) {
            *o = (x ^ sh) as f64 * SCALE;
        }
        let c = (!self.index).trailing_zeros() as usize;
        if c < BITS {
            for (x, v) in self.state.iter_mut().zip(&self.directions) {
                *x ^= v[c];
            }
        }
        self.index += 1;
    }
}

/// Inverse of the standard normal CDF (Wichura, AS 241), accurate to about 1e-16.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    if r <= 0.0 {
        return if q < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// A block of Sobol-driven standard normals, row-major `points × dimension`.
///
/// Benchmarks share one block across all scenarios of a cross-section.
#[derive(Debug, Clone)]
pub struct SobolNormals {
    dimension: usize,
    values: Vec<f64>,
}

impl SobolNormals {
    pub fn generate(points: usize, dimension: usize, seed: u64) -> Result<Self> {
        let mut sobol = Sobol::shifted(dimension, seed)?;
        let mut u = vec![0.0; dimension];
        let mut values = Vec::with_capacity(points * dimension);
        // centre each point in its 2^-32 cell so that no coordinate is exactly zero
        const HALF_CELL: f64 = 0.5 / 4_294_967_296.0;
        for _ in 0..points {
            sobol.next_point(&mut u);
            values.extend(u.iter().map(|&x| inverse_normal_cdf(x + HALF_CELL)));
        }
        Ok(Self { dimension, values })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dimension.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dimension..(i + 1) * self.dimension]
    }
}
