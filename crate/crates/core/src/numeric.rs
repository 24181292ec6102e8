//! Small numeric helpers shared by the orbit and averaging code.

use serde::{Deserialize, Serialize};

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Reduces `v` into `[0, 1)`.
#[inline]
pub fn wrap_unit(v: f64) -> f64 {
    let f = v - v.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Distance on the circle `R/Z`.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    let d = d - d.floor();
    d.min(1.0 - d)
}

/// An unevaluated sum `hi + lo` carrying roughly twice the precision of `f64`.
///
/// Used for rotation numbers so that `frac(n * alpha)` stays accurate for
/// `n` up to about `1e8`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    pub const fn from_f64(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    /// `(sqrt(5) - 1) / 2`
    pub const GOLDEN: DoubleDouble = DoubleDouble::new(0.6180339887498949, -5.432115203682506e-17);

    /// `sqrt(2) - 1`
    pub const SILVER: DoubleDouble = DoubleDouble::new(0.41421356237309503, 1.4349369327986523e-17);

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }

    /// Returns `frac(n * self)` split into an exact fractional head and a small
    /// correction. `n` must be an integer-valued float below `2^53`, or more
    /// generally any float whose product with `hi` is representable as
    /// `p + e` via a fused multiply-add.
    pub fn frac_mul(self, n: f64) -> (f64, f64) {
        let p = n * self.hi;
        let err = n.mul_add(self.hi, -p);
        let head = p - p.floor();
        (head, err + n * self.lo)
    }
}

/// Accumulates `x + sum_i n_i * alpha_i (mod 1)` with the per-term errors
/// carried separately until the final reduction.
pub fn rotate(x: f64, terms: impl IntoIterator<Item = (f64, DoubleDouble)>) -> f64 {
    let mut heads = CompensatedSum::new();
    let mut tails = 0.0;
    heads.add(x);
    for (n, alpha) in terms {
        if n == 0.0 {
            continue;
        }
        let (h, t) = alpha.frac_mul(n);
        heads.add(h);
        tails += t;
    }
    let s = heads.value();
    let whole = s.floor();
    wrap_unit((s - whole) + tails)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut vals = vec![1.0e16];
        vals.extend(std::iter::repeat_n(1.0, 1000));
        vals.push(-1.0e16);
        assert_eq!(compensated_sum(vals.iter().copied()), 1000.0);
    }

    #[test]
    fn wrap_unit_stays_in_range() {
        assert_eq!(wrap_unit(-1e-20), 0.0);
        assert_eq!(wrap_unit(2.25), 0.25);
        assert!((wrap_unit(-0.25) - 0.75).abs() < 1e-16);
    }

    #[test]
    fn circle_distance_wraps() {
        assert!((circle_distance(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert_eq!(circle_distance(0.3, 0.3), 0.0);
    }

    #[test]
    fn golden_rotation_large_n() {
        // frac(10^8 * golden) from a 50-digit reference.
        let v = rotate(0.0, [(1.0e8, DoubleDouble::GOLDEN)]);
        assert!((v - 0.8749894848204586).abs() < 1e-12, "{v}");
        // 13 * golden = 8.0344418537486330...
        let v = rotate(0.0, [(13.0, DoubleDouble::GOLDEN)]);
        assert!((v - 0.034441853748633025).abs() < 1e-15);
    }
}
