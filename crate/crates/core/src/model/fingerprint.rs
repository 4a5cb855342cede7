use crate::error::{Error, Result};

/// Fixed-length binary fingerprint, packed into 64-bit words.
///
/// Bit `d` lives in word `d / 64` at position `d % 64`. Bits past `dim` in the
/// last word are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    dim: usize,
}

impl Fingerprint {
    /// All-zero fingerprint of length `dim`. Not a valid candidate on its own.
    pub fn zeros(dim: usize) -> Self {
        Self {
            words: vec![0; dim.div_ceil(64)],
            dim,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut fp = Self::zeros(bits.len());
        for (d, &b) in bits.iter().enumerate() {
            if b {
                fp.set(d);
            }
        }
        fp
    }

    /// Builds a fingerprint from the indices of its set bits.
    pub fn from_indices(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut fp = Self::zeros(dim);
        for d in indices {
            if d >= dim {
                return Err(Error::domain(format!("bit index {d} out of range for D={dim}")));
            }
            fp.set(d);
        }
        Ok(fp)
    }

    /// Decodes an LSB-first packed bitset: bit `d` is bit `d % 8` of byte `d / 8`.
    ///
    /// Returns `None` when the byte count does not match `dim` or a padding
    /// bit past `dim` is set.
    pub fn from_packed_bytes(bytes: &[u8], dim: usize) -> Option<Self> {
        if bytes.len() != dim.div_ceil(8) {
            return None;
        }
        if dim % 8 != 0 {
            let last = bytes[bytes.len() - 1];
            if last >> (dim % 8) != 0 {
                return None;
            }
        }
        let mut words = vec![0u64; dim.div_ceil(64)];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= u64::from(b) << (8 * (i % 8));
        }
        Some(Self { words, dim })
    }

    /// Inverse of [`Fingerprint::from_packed_bytes`].
    pub fn to_packed_bytes(&self) -> Vec<u8> {
        (0..self.dim.div_ceil(8))
            .map(|i| (self.words[i / 8] >> (8 * (i % 8))) as u8)
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, d: usize) -> bool {
        d < self.dim && (self.words[d / 64] >> (d % 64)) & 1 == 1
    }

    pub fn set(&mut self, d: usize) {
        assert!(d < self.dim, "bit {d} out of range for D={}", self.dim);
        self.words[d / 64] |= 1 << (d % 64);
    }

    pub fn clear(&mut self, d: usize) {
        assert!(d < self.dim, "bit {d} out of range for D={}", self.dim);
        self.words[d / 64] &= !(1 << (d % 64));
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Number of bits set in both fingerprints.
    pub fn overlap(&self, other: &Fingerprint) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Iterates over the indices of set bits in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + bit)
            })
        })
    }

    /// Sum of `theta[d]` over the set bits, i.e. the inner product with a
    /// binary vector.
    pub fn dot(&self, theta: &[f64]) -> f64 {
        self.ones().map(|d| theta[d]).sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.dim).map(|d| if self.get(d) { 1.0 } else { 0.0 }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_bytes_are_lsb_first() {
        // bits 0, 3 and 9 set: byte 0 = 0b0000_1001, byte 1 = 0b0000_0010
        let fp = Fingerprint::from_indices(16, [0, 3, 9]).unwrap();
        assert_eq!(fp.to_packed_bytes(), vec![0x09, 0x02]);
        assert_eq!(Fingerprint::from_packed_bytes(&[0x09, 0x02], 16), Some(fp));
    }

    #[test]
    fn padding_bits_rejected() {
        assert!(Fingerprint::from_packed_bytes(&[0b0001_0000], 4).is_none());
        assert!(Fingerprint::from_packed_bytes(&[0b0000_1000], 4).is_some());
        assert!(Fingerprint::from_packed_bytes(&[0, 0], 4).is_none());
    }

    #[test]
    fn ones_and_dot() {
        let fp = Fingerprint::from_indices(130, [1, 64, 129]).unwrap();
        assert_eq!(fp.ones().collect::<Vec<_>>(), vec![1, 64, 129]);
        let theta: Vec<f64> = (0..130).map(|d| d as f64).collect();
        assert_eq!(fp.dot(&theta), 194.0);
        assert_eq!(fp.count_ones(), 3);
        assert!(Fingerprint::from_indices(4, [4]).is_err());
    }
}
