//! Per-dimension PAM alphabet of a square QAM constellation.
//!
//! A square `C`-QAM symbol is two independent `q`-PAM components with
//! `q = sqrt(C)`. Levels sit on the odd-integer grid `±1, ±3, …, ±(q−1)`
//! scaled so the complex symbol has unit average energy.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PamAlphabet {
    levels: Vec<f64>,
    constellation_size: usize,
    scale: f64,
}

impl PamAlphabet {
    /// Alphabet for a square `constellation_size`-QAM (4, 16, 64, ...).
    pub fn new(constellation_size: usize) -> Result<Self> {
        let valid = constellation_size >= 4
            && constellation_size.is_power_of_two()
            && constellation_size.trailing_zeros().is_multiple_of(2);
        if !valid {
            return Err(Error::InvalidConstellation(constellation_size));
        }
        let q = 1usize << (constellation_size.trailing_zeros() / 2);
        // E|s|² = 2 · scale² · (q² − 1) / 3 = 1
        let scale = (3.0 / (2.0 * (constellation_size as f64 - 1.0))).sqrt();
        let levels = (0..q)
            .map(|k| (2.0 * k as f64 - (q as f64 - 1.0)) * scale)
            .collect();
        Ok(Self {
            levels,
            constellation_size,
            scale,
        })
    }

    /// Ascending levels.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels[index]
    }

    /// Per-dimension alphabet size `q`.
    pub fn q(&self) -> usize {
        self.levels.len()
    }

    /// Complex constellation size `C = q²`.
    pub fn constellation_size(&self) -> usize {
        self.constellation_size
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    fn distance(&self, value: f64, index: usize) -> f64 {
        (value - self.levels[index]).abs()
    }

    /// Index of the level nearest to `value`; exact midpoints go to the lower
    /// index, out-of-range values saturate.
    pub fn slice(&self, value: f64) -> usize {
        let q = self.q();
        let pos = (value / self.scale + (q as f64 - 1.0)) / 2.0;
        let mut k = if pos.is_nan() {
            0
        } else {
            (pos.round().max(0.0) as usize).min(q - 1)
        };
        // the analytic guess can be one off near midpoints; settle on distances
        while k > 0 && self.distance(value, k - 1) <= self.distance(value, k) {
            k -= 1;
        }
        while k + 1 < q && self.distance(value, k + 1) < self.distance(value, k) {
            k += 1;
        }
        k
    }

    /// Schnorr–Euchner order around `center`.
    pub fn se_children(&self, center: f64) -> SeChildren<'_> {
        let first = self.slice(center);
        SeChildren {
            alphabet: self,
            center,
            lower: first,
            upper: first + 1,
            started: false,
        }
    }

    /// Draws `n_s` i.i.d. uniform indices.
    pub fn random_symbol_vector<R: Rng + ?Sized>(&self, n_s: usize, rng: &mut R) -> Result<SymbolVector> {
        if n_s == 0 {
            return Err(Error::DimensionMismatch {
                what: "symbol vector length must be at least 1",
                expected: 1,
                got: 0,
            });
        }
        let indices = (0..n_s).map(|_| rng.gen_range(0..self.q())).collect();
        Ok(SymbolVector::from_indices(indices, self))
    }
}

/// Alphabet indices in nondecreasing distance from a center, ties to the
/// lower index. The first item is always `slice(center)`.
#[derive(Debug, Clone)]
pub struct SeChildren<'a> {
    alphabet: &'a PamAlphabet,
    center: f64,
    // next candidates on either side: `lower` (inclusive, counting down) and `upper`
    lower: usize,
    upper: usize,
    started: bool,
}

impl Iterator for SeChildren<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if !self.started {
            self.started = true;
            let first = self.lower;
            self.lower = first.wrapping_sub(1);
            return Some(first);
        }
        let q = self.alphabet.q();
        let has_lower = self.lower < q;
        let has_upper = self.upper < q;
        match (has_lower, has_upper) {
            (false, false) => None,
            (true, false) => {
                let k = self.lower;
                self.lower = k.wrapping_sub(1);
                Some(k)
            }
            (false, true) => {
                let k = self.upper;
                self.upper += 1;
                Some(k)
            }
            (true, true) => {
                let dl = self.alphabet.distance(self.center, self.lower);
                let du = self.alphabet.distance(self.center, self.upper);
                if dl <= du {
                    let k = self.lower;
                    self.lower = k.wrapping_sub(1);
                    Some(k)
                } else {
                    let k = self.upper;
                    self.upper += 1;
                    Some(k)
                }
            }
        }
    }
}

/// Alphabet-constrained real vector: indices plus the levels they select.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SymbolVector {
    pub fn from_indices(indices: Vec<usize>, alphabet: &PamAlphabet) -> Self {
        let values = indices.iter().map(|&k| alphabet.level(k)).collect();
        Self { indices, values }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}
