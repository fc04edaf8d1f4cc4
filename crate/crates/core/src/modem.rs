//! Constellations and the bit/symbol mapping.
//!
//! Every constellation is stored with its points indexed by their bit label:
//! `points[m]` carries the label whose binary expansion (most significant bit
//! first) is `m`. Bit `g` of a symbol, counted from 1, is therefore bit
//! `bits_per_symbol - g` of the index.
//!
//! Gray labelings used here:
//!
//! | modulation | label → point |
//! |------------|---------------|
//! | QPSK  | `b1 b2` → `((1 - 2 b1) + i (1 - 2 b2)) / √2` |
//! | 8-PSK | Gray position `k` (000, 001, 011, 010, 110, 111, 101, 100) → `exp(i k π / 4)` |
//! | 16-QAM | `b1 b2` → in-phase level, `b3 b4` → quadrature level, each `00, 01, 11, 10` → `-3, -1, +1, +3`, scaled by `1/√10` |
//!
//! All constellations have unit average energy.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{BerdError, Result};

/// Tolerance on a posterior column summing to one.
pub const POSTERIOR_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modulation {
    Qpsk,
    Psk8,
    Qam16,
}

impl Modulation {
    pub const ALL: [Modulation; 3] = [Modulation::Qpsk, Modulation::Psk8, Modulation::Qam16];

    pub fn id(self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Psk8 => "8psk",
            Modulation::Qam16 => "16qam",
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Psk8 => 3,
            Modulation::Qam16 => 4,
        }
    }

    pub fn constellation(self) -> Constellation {
        Constellation::new(self)
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Modulation {
    type Err = BerdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Modulation::Qpsk),
            "8psk" | "psk8" => Ok(Modulation::Psk8),
            "16qam" | "qam16" => Ok(Modulation::Qam16),
            other => Err(BerdError::UnknownModulation(other.to_owned())),
        }
    }
}

/// A labeled constellation with unit average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    points: Vec<Complex64>,
    bits_per_symbol: usize,
    zero_sets: Vec<Vec<usize>>,
}

const GRAY_PAM4: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];
const GRAY_8PSK_POSITION: [usize; 8] = [0, 1, 3, 2, 7, 6, 4, 5];

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let bits_per_symbol = modulation.bits_per_symbol();
        let size = 1usize << bits_per_symbol;
        let points: Vec<Complex64> = (0..size)
            .map(|label| match modulation {
                Modulation::Qpsk => {
                    let re = if label & 0b10 == 0 { 1.0 } else { -1.0 };
                    let im = if label & 0b01 == 0 { 1.0 } else { -1.0 };
                    Complex64::new(re, im) / 2f64.sqrt()
                }
                Modulation::Psk8 => {
                    let k = GRAY_8PSK_POSITION[label];
                    Complex64::from_polar(1.0, k as f64 * std::f64::consts::FRAC_PI_4)
                }
                Modulation::Qam16 => {
                    let re = GRAY_PAM4[label >> 2];
                    let im = GRAY_PAM4[label & 0b11];
                    Complex64::new(re, im) / 10f64.sqrt()
                }
            })
            .collect();
        let zero_sets = (1..=bits_per_symbol)
            .map(|g| {
                let mask = 1usize << (bits_per_symbol - g);
                (0..size).filter(|m| m & mask == 0).collect()
            })
            .collect();
        Constellation {
            modulation,
            points,
            bits_per_symbol,
            zero_sets,
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn name(&self) -> &'static str {
        self.modulation.id()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    /// Bit label of point `m`, most significant bit first.
    pub fn label(&self, m: usize) -> Vec<u8> {
        (1..=self.bits_per_symbol)
            .map(|g| ((m >> (self.bits_per_symbol - g)) & 1) as u8)
            .collect()
    }

    /// Indices of the points whose `g`-th bit (1-based) is zero.
    pub fn bit_zero_set(&self, g: usize) -> Result<&[usize]> {
        if g == 0 || g > self.bits_per_symbol {
            return Err(BerdError::IndexOutOfRange {
                index: g,
                max: self.bits_per_symbol,
            });
        }
        Ok(&self.zero_sets[g - 1])
    }

    pub(crate) fn zero_sets(&self) -> &[Vec<usize>] {
        &self.zero_sets
    }

    /// Maps coded bits onto symbols, `bits_per_symbol` bits per symbol.
    pub fn modulate(&self, bits: &[u8]) -> Result<SymbolFrame> {
        if bits.len() % self.bits_per_symbol != 0 {
            return Err(BerdError::NotMultiple {
                len: bits.len(),
                multiple: self.bits_per_symbol,
            });
        }
        let symbols = bits
            .chunks_exact(self.bits_per_symbol)
            .map(|chunk| {
                let label = chunk
                    .iter()
                    .fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1));
                self.points[label]
            })
            .collect();
        Ok(SymbolFrame { symbols })
    }

    /// Index of the point closest to `x`.
    pub fn nearest(&self, x: Complex64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (m, p) in self.points.iter().enumerate() {
            let d = (x - p).norm_sqr();
            if d < best_dist {
                best = m;
                best_dist = d;
            }
        }
        best
    }

    /// Hard demapping by minimum distance.
    pub fn demap(&self, frame: &SymbolFrame) -> Vec<u8> {
        let mut bits = Vec::with_capacity(frame.len() * self.bits_per_symbol);
        for &s in frame.symbols() {
            let m = self.nearest(s);
            bits.extend(self.label(m));
        }
        bits
    }

    /// Posterior-mean symbol `Σ_m μ_m ρ_m`.
    pub fn soft_symbol(&self, posterior: &[f64]) -> Result<Complex64> {
        if posterior.len() != self.size() {
            return Err(BerdError::LengthMismatch {
                expected: self.size(),
                actual: posterior.len(),
            });
        }
        if let Some(p) = posterior.iter().find(|p| !(**p >= 0.0)) {
            return Err(BerdError::InvalidPosterior(format!("entry {p}")));
        }
        let total: f64 = posterior.iter().sum();
        if (total - 1.0).abs() > POSTERIOR_SUM_TOL {
            return Err(BerdError::InvalidPosterior(format!("sums to {total}")));
        }
        Ok(self.mean_unchecked(posterior))
    }

    pub(crate) fn mean_unchecked(&self, posterior: &[f64]) -> Complex64 {
        self.points
            .iter()
            .zip(posterior)
            .map(|(mu, &p)| mu * p)
            .sum()
    }
}

/// A frame of `N` (hard or soft) symbols.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SymbolFrame {
    symbols: Vec<Complex64>,
}

impl SymbolFrame {
    pub fn new(symbols: Vec<Complex64>) -> Self {
        SymbolFrame { symbols }
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Total energy `Σ_j |s_j|²`.
    pub fn energy(&self) -> f64 {
        self.symbols.iter().map(|s| s.norm_sqr()).sum()
    }

    /// `s_{j-shift}` with zeros before the start of the frame (0-based `j`).
    #[inline]
    pub fn delayed(&self, j: usize, shift: usize) -> Complex64 {
        if j >= shift {
            self.symbols[j - shift]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.symbols
    }
}

impl From<Vec<Complex64>> for SymbolFrame {
    fn from(symbols: Vec<Complex64>) -> Self {
        SymbolFrame { symbols }
    }
}
