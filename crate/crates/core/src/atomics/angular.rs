//! Angular-momentum coupling coefficients.
//!
//! Quantum numbers are carried as [`HalfInt`], which stores twice the value so
//! that integer and half-integer momenta share one exact representation.

use std::fmt;

use serde::{Deserialize, Serialize};

/// An integer or half-integer, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);

    pub const fn from_doubled(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(v: i32) -> Self {
        HalfInt(2 * v)
    }

    pub const fn doubled(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    pub fn abs(self) -> Self {
        HalfInt(self.0.abs())
    }

    /// Values `-self, -self + 1, ..., self`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j = self.0;
        (0..=j).map(move |k| HalfInt(-j + 2 * k))
    }
}

impl TryFrom<f64> for HalfInt {
    type Error = String;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        let twice = 2.0 * v;
        if (twice - twice.round()).abs() > 1e-9 {
            return Err(format!("{v} is not an integer or half-integer"));
        }
        Ok(HalfInt(twice.round() as i32))
    }
}

impl From<HalfInt> for f64 {
    fn from(h: HalfInt) -> f64 {
        h.value()
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 + o.0)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 - o.0)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

fn ln_factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Triangle coefficient Δ(abc) in log form, `None` if the triad is not allowed.
/// Arguments are doubled values.
fn ln_triangle(a: i32, b: i32, c: i32) -> Option<f64> {
    if (a + b + c) % 2 != 0 || a + b < c || a + c < b || b + c < a {
        return None;
    }
    Some(
        ln_factorial((a + b - c) / 2) + ln_factorial((a - b + c) / 2) + ln_factorial((-a + b + c) / 2)
            - ln_factorial((a + b + c) / 2 + 1),
    )
}

/// Wigner 3j symbol (j1 j2 j3; m1 m2 m3) via the Racah formula.
pub fn wigner_3j(j1: HalfInt, j2: HalfInt, j3: HalfInt, m1: HalfInt, m2: HalfInt, m3: HalfInt) -> f64 {
    let (j1, j2, j3, m1, m2, m3) = (j1.0, j2.0, j3.0, m1.0, m2.0, m3.0);
    if m1 + m2 + m3 != 0 || m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    if (j1 + m1) % 2 != 0 || (j2 + m2) % 2 != 0 || (j3 + m3) % 2 != 0 {
        return 0.0;
    }
    let Some(ln_tri) = ln_triangle(j1, j2, j3) else {
        return 0.0;
    };
    let ln_pre = 0.5
        * (ln_tri
            + ln_factorial((j1 + m1) / 2)
            + ln_factorial((j1 - m1) / 2)
            + ln_factorial((j2 + m2) / 2)
            + ln_factorial((j2 - m2) / 2)
            + ln_factorial((j3 + m3) / 2)
            + ln_factorial((j3 - m3) / 2));
    let kmin = 0.max((j2 - j3 - m1) / 2).max((j1 - j3 + m2) / 2);
    let kmax = ((j1 + j2 - j3) / 2).min((j1 - m1) / 2).min((j2 + m2) / 2);
    let mut sum = 0.0;
    for k in kmin..=kmax {
        let ln_den = ln_factorial(k)
            + ln_factorial((j1 + j2 - j3) / 2 - k)
            + ln_factorial((j1 - m1) / 2 - k)
            + ln_factorial((j2 + m2) / 2 - k)
            + ln_factorial((j3 - j2 + m1) / 2 + k)
            + ln_factorial((j3 - j1 - m2) / 2 + k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (ln_pre - ln_den).exp();
    }
    let phase = (j1 - j2 - m3) / 2;
    if phase.rem_euclid(2) == 0 {
        sum
    } else {
        -sum
    }
}

/// Clebsch-Gordan coefficient ⟨j1 m1; j2 m2 | J M⟩.
pub fn clebsch_gordan(j1: HalfInt, m1: HalfInt, j2: HalfInt, m2: HalfInt, j: HalfInt, m: HalfInt) -> f64 {
    let w = wigner_3j(j1, j2, j, m1, m2, -m);
    if w == 0.0 {
        return 0.0;
    }
    let phase = (j1.0 - j2.0 + m.0) / 2;
    let sign = if phase.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign * ((j.0 + 1) as f64).sqrt() * w
}

/// Wigner 6j symbol {j1 j2 j3; j4 j5 j6} via the Racah formula.
pub fn wigner_6j(j1: HalfInt, j2: HalfInt, j3: HalfInt, j4: HalfInt, j5: HalfInt, j6: HalfInt) -> f64 {
    let (a, b, c, d, e, f) = (j1.0, j2.0, j3.0, j4.0, j5.0, j6.0);
    let triads = [(a, b, c), (a, e, f), (d, b, f), (d, e, c)];
    let mut ln_tri = 0.0;
    for &(x, y, z) in &triads {
        match ln_triangle(x, y, z) {
            Some(v) => ln_tri += v,
            None => return 0.0,
        }
    }
    let ln_pre = 0.5 * ln_tri;
    let s1 = (a + b + c) / 2;
    let s2 = (a + e + f) / 2;
    let s3 = (d + b + f) / 2;
    let s4 = (d + e + c) / 2;
    let t1 = (a + b + d + e) / 2;
    let t2 = (a + c + d + f) / 2;
    let t3 = (b + c + e + f) / 2;
    let kmin = s1.max(s2).max(s3).max(s4);
    let kmax = t1.min(t2).min(t3);
    let mut sum = 0.0;
    for k in kmin..=kmax {
        let ln_num = ln_factorial(k + 1);
        let ln_den = ln_factorial(k - s1)
            + ln_factorial(k - s2)
            + ln_factorial(k - s3)
            + ln_factorial(k - s4)
            + ln_factorial(t1 - k)
            + ln_factorial(t2 - k)
            + ln_factorial(t3 - k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (ln_pre + ln_num - ln_den).exp();
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn h(twice: i32) -> HalfInt {
        HalfInt::from_doubled(twice)
    }

    #[test]
    fn known_clebsch_gordan_values() {
        // ⟨1/2 1/2; 1/2 -1/2 | 1 0⟩ = 1/√2
        assert_abs_diff_eq!(clebsch_gordan(h(1), h(1), h(1), h(-1), h(2), h(0)), 0.5f64.sqrt(), epsilon = 1e-14);
        // ⟨1/2 1/2; 1/2 -1/2 | 0 0⟩ = 1/√2
        assert_abs_diff_eq!(clebsch_gordan(h(1), h(1), h(1), h(-1), h(0), h(0)), 0.5f64.sqrt(), epsilon = 1e-14);
        // ⟨1/2 -1/2; 1/2 1/2 | 0 0⟩ = -1/√2
        assert_abs_diff_eq!(clebsch_gordan(h(1), h(-1), h(1), h(1), h(0), h(0)), -(0.5f64.sqrt()), epsilon = 1e-14);
        // ⟨1 1; 1 -1 | 2 0⟩ = 1/√6
        assert_abs_diff_eq!(
            clebsch_gordan(h(2), h(2), h(2), h(-2), h(4), h(0)),
            (1.0f64 / 6.0).sqrt(),
            epsilon = 1e-14
        );
        // stretched
        assert_abs_diff_eq!(clebsch_gordan(h(4), h(4), h(2), h(2), h(6), h(6)), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn clebsch_gordan_orthonormality() {
        let j1 = h(3);
        let j2 = h(2);
        for m in h(5).projections() {
            for jt in [h(1), h(3), h(5)] {
                for jt2 in [h(1), h(3), h(5)] {
                    let mut s = 0.0;
                    for m1 in j1.projections() {
                        let m2 = m - m1;
                        if m2.abs() > j2 {
                            continue;
                        }
                        s += clebsch_gordan(j1, m1, j2, m2, jt, m) * clebsch_gordan(j1, m1, j2, m2, jt2, m);
                    }
                    let expect = if jt == jt2 && m.abs() <= jt { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(s, expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn known_six_j_values() {
        // {1 1 1; 1 1 1} = 1/6
        assert_abs_diff_eq!(wigner_6j(h(2), h(2), h(2), h(2), h(2), h(2)), 1.0 / 6.0, epsilon = 1e-14);
        // {1/2 1/2 1; 1/2 1/2 0} = 1/2
        assert_abs_diff_eq!(wigner_6j(h(1), h(1), h(2), h(1), h(1), h(0)), 0.5, epsilon = 1e-14);
        // {2 2 2; 2 2 2} = -3/70
        assert_abs_diff_eq!(wigner_6j(h(4), h(4), h(4), h(4), h(4), h(4)), -3.0 / 70.0, epsilon = 1e-14);
    }

    #[test]
    fn six_j_orthogonality() {
        // Σ_x (2x+1)(2f+1) {a b x; c d f}{a b x; c d g} = δ_fg
        let (a, b, c, d) = (h(3), h(5), h(3), h(7));
        for f in [h(4), h(6), h(8)] {
            for g in [h(4), h(6), h(8)] {
                let mut s = 0.0;
                for x2 in (0..=12).step_by(2) {
                    let x = h(x2);
                    s += (x2 + 1) as f64
                        * (f.doubled() + 1) as f64
                        * wigner_6j(a, b, x, c, d, f)
                        * wigner_6j(a, b, x, c, d, g);
                }
                assert_abs_diff_eq!(s, if f == g { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn half_int_parsing() {
        assert_eq!(HalfInt::try_from(2.5).unwrap(), h(5));
        assert!(HalfInt::try_from(0.3).is_err());
        assert_eq!(h(5).projections().count(), 6);
        assert_eq!(format!("{}", h(5)), "5/2");
        assert_eq!(format!("{}", h(4)), "2");
    }
}
