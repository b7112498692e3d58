//! Minimal double-double arithmetic (roughly 32 significant digits) and a
//! weighted polynomial least-squares solver built on it.
//!
//! Used as the extended-precision oracle for curve-fitting tests: the normal
//! equations are formed on raw (unscaled) coordinates, which is numerically
//! hostile in f64 but harmless at double-double precision.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// An unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn abs(self) -> f64 {
        self.hi.abs()
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }
}

impl Add for Dd {
    type Output = Dd;

    fn add(self, other: Dd) -> Dd {
        let (s1, e1) = two_sum(self.hi, other.hi);
        let (s2, e2) = two_sum(self.lo, other.lo);
        let (s1, e1) = quick_two_sum(s1, e1 + s2);
        let (hi, lo) = quick_two_sum(s1, e1 + e2);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;

    fn sub(self, other: Dd) -> Dd {
        self + (-other)
    }
}

impl Mul for Dd {
    type Output = Dd;

    fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;

    fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self - other * Dd::from(q1);
        let q2 = (r.hi + r.lo) / other.hi;
        let r2 = r - other * Dd::from(q2);
        let q3 = (r2.hi + r2.lo) / other.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: e } + Dd::from(q3)
    }
}

/// Weighted least squares of `col` as a polynomial of `row`, degree <= 3,
/// solved from the raw-coordinate normal equations in double-double.
///
/// Returns coefficients in ascending powers `[c0, c1, c2, c3]`; entries above
/// `degree` are zero.
pub fn polyfit(points: &[(f64, f64, f64)], degree: usize) -> [f64; 4] {
    assert!(degree <= 3 && !points.is_empty());
    let m = degree + 1;
    let mut gram = [[Dd::ZERO; 4]; 4];
    let mut rhs = [Dd::ZERO; 4];
    for &(row, col, weight) in points {
        let mut powers = [Dd::from(1.0); 7];
        for k in 1..2 * m - 1 {
            powers[k] = powers[k - 1] * Dd::from(row);
        }
        let w = Dd::from(weight);
        for j in 0..m {
            for k in 0..m {
                gram[j][k] = gram[j][k] + w * powers[j + k];
            }
            rhs[j] = rhs[j] + w * Dd::from(col) * powers[j];
        }
    }
    // Gaussian elimination with partial pivoting.
    for col_idx in 0..m {
        let mut pivot = col_idx;
        for r in col_idx + 1..m {
            if gram[r][col_idx].abs() > gram[pivot][col_idx].abs() {
                pivot = r;
            }
        }
        gram.swap(col_idx, pivot);
        rhs.swap(col_idx, pivot);
        let pivot_row = gram[col_idx];
        for r in col_idx + 1..m {
            let f = gram[r][col_idx] / pivot_row[col_idx];
            for (dst, src) in gram[r][col_idx..m].iter_mut().zip(&pivot_row[col_idx..m]) {
                *dst = *dst - f * *src;
            }
            rhs[r] = rhs[r] - f * rhs[col_idx];
        }
    }
    let mut sol = [Dd::ZERO; 4];
    for r in (0..m).rev() {
        let mut acc = rhs[r];
        for k in r + 1..m {
            acc = acc - gram[r][k] * sol[k];
        }
        sol[r] = acc / gram[r][r];
    }
    let mut out = [0.0f64; 4];
    for (o, s) in out.iter_mut().zip(sol.iter()) {
        *o = s.value();
    }
    out
}
