use std::fmt;
use std::sync::Arc;

use rand::Rng;

/// Number of random bits drawn for a generic doubling-map basepoint.
pub const DEFAULT_BINARY_BITS: usize = 1 << 17;

const TWO_POW_64: f64 = 18446744073709551616.0;

/// A point of the circle stored as a binary expansion `0.b_0 b_1 b_2 ...`
/// (bits past the stored words are zero) read from bit `shift` onwards.
///
/// Shifting the read position is the doubling map, so orbits stay exact for
/// as many steps as there are stored bits. Two points compare equal when
/// their leading 64 bits agree, which is the declared resolution.
#[derive(Clone)]
pub struct BinaryPoint {
    words: Arc<[u64]>,
    shift: u64,
}

impl BinaryPoint {
    pub fn from_words(words: Vec<u64>) -> Self {
        BinaryPoint {
            words: words.into(),
            shift: 0,
        }
    }

    /// The dyadic expansion of `x` reduced into `[0, 1)`.
    pub fn from_f64(x: f64) -> Self {
        let x = crate::numeric::wrap_unit(x);
        Self::from_words(vec![(x * TWO_POW_64) as u64])
    }

    pub fn zero() -> Self {
        Self::from_words(Vec::new())
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, bits: usize) -> Self {
        Self::from_words((0..bits.div_ceil(64)).map(|_| rng.random()).collect())
    }

    pub fn shift(&self) -> u64 {
        self.shift
    }

    pub fn stored_bits(&self) -> u64 {
        self.words.len() as u64 * 64
    }

    /// Applies the doubling map `n` times.
    pub fn shifted(&self, n: u64) -> Self {
        BinaryPoint {
            words: Arc::clone(&self.words),
            shift: self.shift.saturating_add(n),
        }
    }

    fn word(&self, i: u64) -> u64 {
        usize::try_from(i)
            .ok()
            .and_then(|i| self.words.get(i).copied())
            .unwrap_or(0)
    }

    /// The 64 bits starting at the read position, as a fraction of `2^64`.
    pub fn leading_bits(&self) -> u64 {
        let i = self.shift / 64;
        let off = (self.shift % 64) as u32;
        if off == 0 {
            self.word(i)
        } else {
            (self.word(i) << off) | (self.word(i + 1) >> (64 - off))
        }
    }

    pub fn value(&self) -> f64 {
        crate::numeric::wrap_unit(self.leading_bits() as f64 / TWO_POW_64)
    }

    /// Circle distance computed exactly on the leading 64 bits.
    pub fn distance(&self, other: &BinaryPoint) -> f64 {
        let a = self.leading_bits();
        let b = other.leading_bits();
        a.wrapping_sub(b).min(b.wrapping_sub(a)) as f64 / TWO_POW_64
    }

    /// Adds `offset / 2^64` (mod 1) at the read position; later bits are kept.
    pub fn add_offset(&self, offset: u64) -> BinaryPoint {
        let new = self.leading_bits().wrapping_add(offset);
        let i = (self.shift / 64) as usize;
        let off = (self.shift % 64) as u32;
        let mut words: Vec<u64> = self.words.to_vec();
        if words.len() < i + 2 {
            words.resize(i + 2, 0);
        }
        if off == 0 {
            words[i] = new;
        } else {
            let head_mask = !0u64 << (64 - off);
            words[i] = (words[i] & head_mask) | (new >> off);
            let tail_mask = !0u64 >> off;
            words[i + 1] = (words[i + 1] & tail_mask) | (new << (64 - off));
        }
        BinaryPoint {
            words: words.into(),
            shift: self.shift,
        }
    }
}

impl PartialEq for BinaryPoint {
    fn eq(&self, other: &Self) -> bool {
        self.leading_bits() == other.leading_bits()
    }
}

impl fmt::Debug for BinaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryPoint({:#018x} @ {})", self.leading_bits(), self.shift)
    }
}

/// Converts a length in `[0, 1)` to a fraction of `2^64`.
pub(crate) fn offset_bits(r: f64) -> u64 {
    (r.clamp(0.0, 1.0) * TWO_POW_64).min(u64::MAX as f64) as u64
}
