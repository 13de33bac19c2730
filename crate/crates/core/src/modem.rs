//! Constellations with Gray bit maps and the real-alphabet decomposition.
//!
//! Symbols live on a square grid: each axis carries half of the bit label
//! (all of it for BPSK, whose imaginary part is structurally zero) and is
//! Gray-coded independently, so axis-adjacent points differ in exactly one
//! bit. `energy_scale` normalizes the grid to unit average symbol energy.
//!
//! Bit order convention, frozen here: `bits[0]` is the most significant bit
//! of the label, the in-phase axis bits come first, and on each axis the
//! Gray sequence runs from the most negative level upward. For BPSK this
//! means `[0] -> -1` and `[1] -> +1`.

use num_complex::Complex64;

use crate::{Error, Result};

/// A square constellation with Gray-labeled points.
#[derive(Debug, Clone)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    energy_scale: f64,
    /// Real alphabet per axis, ascending and unscaled.
    levels: Vec<f64>,
    /// Scaled points indexed by bit label.
    points: Vec<Complex64>,
    /// Unscaled (level-grid) points indexed by bit label.
    unscaled: Vec<Complex64>,
}

/// Binary-reflected Gray code of a level index.
fn gray_encode(index: usize) -> usize {
    index ^ (index >> 1)
}

/// Inverse of [`gray_encode`] for the short labels used here.
fn gray_decode(label: usize) -> usize {
    let mut index = label;
    let mut shift = 1;
    while (label >> shift) != 0 {
        index ^= label >> shift;
        shift += 1;
    }
    index
}

impl Constellation {
    /// Builds the constellation of the given order, `M ∈ {2, 4, 16}`.
    pub fn new(order: usize) -> Result<Self> {
        let (bits_per_symbol, levels): (usize, Vec<f64>) = match order {
            2 => (1, vec![-1.0, 1.0]),
            4 => (2, vec![-1.0, 1.0]),
            16 => (4, vec![-3.0, -1.0, 1.0, 3.0]),
            other => return Err(Error::UnsupportedOrder(other)),
        };
        let axis_bits = bits_per_symbol / 2;
        let mut unscaled = Vec::with_capacity(order);
        for label in 0..order {
            let point = if order == 2 {
                Complex64::new(levels[gray_decode(label)], 0.0)
            } else {
                let i_label = label >> axis_bits;
                let q_label = label & ((1 << axis_bits) - 1);
                Complex64::new(levels[gray_decode(i_label)], levels[gray_decode(q_label)])
            };
            unscaled.push(point);
        }
        let mean_energy = unscaled.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        let energy_scale = 1.0 / mean_energy.sqrt();
        let points = unscaled.iter().map(|p| p * energy_scale).collect();
        Ok(Self {
            order,
            bits_per_symbol,
            energy_scale,
            levels,
            points,
            unscaled,
        })
    }

    pub fn bpsk() -> Self {
        Self::new(2).expect("BPSK is supported")
    }

    pub fn qpsk() -> Self {
        Self::new(4).expect("QPSK is supported")
    }

    pub fn qam16() -> Self {
        Self::new(16).expect("16-QAM is supported")
    }

    /// Looks a constellation up by its config name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "bpsk" => Ok(Self::bpsk()),
            "qpsk" => Ok(Self::qpsk()),
            "16qam" => Ok(Self::qam16()),
            _ => Err(Error::InvalidConfig(format!(
                "unknown constellation {name:?} (expected bpsk, qpsk or 16qam)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.order {
            2 => "bpsk",
            4 => "qpsk",
            _ => "16qam",
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    /// The ordered real alphabet per axis (unscaled).
    pub fn real_levels(&self) -> &[f64] {
        &self.levels
    }

    /// All scaled points, indexed by bit label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// The unscaled level-grid point for a label.
    pub fn unscaled_point(&self, label: usize) -> Complex64 {
        self.unscaled[label]
    }

    /// Whether the imaginary part carries information.
    pub fn is_real_only(&self) -> bool {
        self.order == 2
    }

    fn label_from_bits(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.bits_per_symbol {
            return Err(Error::BitLength {
                expected: self.bits_per_symbol,
                got: bits.len(),
            });
        }
        Ok(bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize))
    }

    fn bits_from_label(&self, label: usize) -> Vec<u8> {
        (0..self.bits_per_symbol)
            .map(|j| ((label >> (self.bits_per_symbol - 1 - j)) & 1) as u8)
            .collect()
    }

    /// Maps an m-bit label to its scaled constellation point.
    pub fn bits_to_symbol(&self, bits: &[u8]) -> Result<Complex64> {
        Ok(self.points[self.label_from_bits(bits)?])
    }

    /// Index of the nearest level to `x` in the unscaled axis alphabet.
    fn nearest_level_index(&self, x: f64) -> usize {
        // Levels are uniformly spaced by 2 starting at levels[0].
        let idx = ((x - self.levels[0]) / 2.0).round();
        (idx.max(0.0) as usize).min(self.levels.len() - 1)
    }

    /// Label of the minimum-distance point to an arbitrary complex input.
    ///
    /// Exact inverse of [`Self::bits_to_symbol`] on clean points; for noisy
    /// input the per-axis quantization equals the full nearest-point search
    /// because the constellation is square.
    pub fn symbol_to_bits(&self, sym: Complex64) -> Vec<u8> {
        let axis_bits = self.bits_per_symbol / 2;
        let i_idx = self.nearest_level_index(sym.re / self.energy_scale);
        let label = if self.order == 2 {
            gray_encode(i_idx)
        } else {
            let q_idx = self.nearest_level_index(sym.im / self.energy_scale);
            (gray_encode(i_idx) << axis_bits) | gray_encode(q_idx)
        };
        self.bits_from_label(label)
    }

    /// Nearest scaled point and its bit label, in one step.
    pub fn decide(&self, sym: Complex64) -> (Complex64, Vec<u8>) {
        let bits = self.symbol_to_bits(sym);
        let label = self
            .label_from_bits(&bits)
            .expect("own label has the right length");
        (self.points[label], bits)
    }

    fn is_level(&self, x: f64) -> bool {
        self.levels.iter().any(|&l| (l - x).abs() < 1e-9)
    }
}

/// Stacks `[Re{d}; Im{d}]` of a vector of unscaled level-grid symbols.
///
/// The input lives on the level grid (before energy scaling); components off
/// the alphabet are rejected. For BPSK the imaginary block is structurally
/// zero.
pub fn decompose_real(d: &[Complex64], c: &Constellation) -> Result<Vec<f64>> {
    for z in d {
        if !c.is_level(z.re) {
            return Err(Error::OffAlphabet { value: z.re });
        }
        let im_ok = if c.is_real_only() {
            z.im.abs() < 1e-9
        } else {
            c.is_level(z.im)
        };
        if !im_ok {
            return Err(Error::OffAlphabet { value: z.im });
        }
    }
    let mut out = Vec::with_capacity(2 * d.len());
    out.extend(d.iter().map(|z| z.re));
    out.extend(d.iter().map(|z| z.im));
    Ok(out)
}

/// Inverse of [`decompose_real`].
pub fn recompose_real(x: &[f64]) -> Result<Vec<Complex64>> {
    if x.len() % 2 != 0 {
        return Err(Error::DimensionMismatch {
            what: "real decomposition length",
            expected: x.len() + 1,
            got: x.len(),
        });
    }
    let n = x.len() / 2;
    Ok((0..n).map(|j| Complex64::new(x[j], x[n + j])).collect())
}
