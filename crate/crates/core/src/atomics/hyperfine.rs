//! Hyperfine energy shifts of a fine-structure manifold.

use super::angular::HalfInt;
use crate::error::{Error, Result};

/// Allowed total angular momenta `F` for nuclear spin `i` and electronic `j`.
pub fn allowed_f(i: HalfInt, j: HalfInt) -> Vec<HalfInt> {
    let lo = (i - j).abs().doubled();
    let hi = (i + j).doubled();
    (lo..=hi).step_by(2).map(HalfInt::from_doubled).collect()
}

/// Energy of hyperfine level `f` relative to the unperturbed fine-structure
/// level, in the units of `a` and `b` (MHz throughout this crate).
///
/// The quadrupole term is only defined for `i > 1/2` and `j > 1/2`; outside that
/// range `b` must be zero and the term is dropped.
pub fn hyperfine_energy(a: f64, b: f64, i: HalfInt, j: HalfInt, f: HalfInt) -> Result<f64> {
    if !allowed_f(i, j).contains(&f) {
        return Err(Error::domain(format!("F = {f} not in |J - I|..J + I for I = {i}, J = {j}")));
    }
    let (iv, jv, fv) = (i.value(), j.value(), f.value());
    let k = fv * (fv + 1.0) - iv * (iv + 1.0) - jv * (jv + 1.0);
    let mut energy = 0.5 * k * a;
    let quad_defined = i.doubled() > 1 && j.doubled() > 1;
    if quad_defined {
        let num = 3.0 * k * (k + 1.0) - 4.0 * iv * (iv + 1.0) * jv * (jv + 1.0);
        let den = 2.0 * iv * (2.0 * iv - 1.0) * 2.0 * jv * (2.0 * jv - 1.0);
        energy += 0.5 * b * num / den;
    } else if b != 0.0 {
        return Err(Error::domain(format!(
            "quadrupole constant B = {b} given for I = {i}, J = {j} where the term is undefined"
        )));
    }
    Ok(energy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const I: HalfInt = HalfInt::from_doubled(3);

    fn h(twice: i32) -> HalfInt {
        HalfInt::from_doubled(twice)
    }

    #[test]
    fn zero_constants_give_zero() {
        assert_eq!(hyperfine_energy(0.0, 0.0, I, h(5), h(6)).unwrap(), 0.0);
    }

    #[test]
    fn four_d_five_halves_top_level() {
        // Hand evaluation: K = 7.5, K·A/2 = -63.00375,
        // quadrupole bracket = (191.25 - 131.25) / 120 = 0.5, times B/2 = 0.91125.
        let e = hyperfine_energy(-16.801, 3.645, I, h(5), h(8)).unwrap();
        assert_abs_diff_eq!(e, -62.0925, epsilon = 1e-9);
    }

    #[test]
    fn f_state_splittings() {
        // Hand evaluation with A = 3.4, B = -4, J = 7/2:
        // E(2) = -25.09286, E(3) = -12.03571, E(4) = 2.70714, E(5) = 16.85
        let e: Vec<f64> = [4, 6, 8, 10].iter().map(|&f| hyperfine_energy(3.4, -4.0, I, h(7), h(f)).unwrap()).collect();
        assert_abs_diff_eq!(e[0], -25.092857142857, epsilon = 1e-9);
        assert_abs_diff_eq!(e[3], 16.85, epsilon = 1e-9);
        let splits: Vec<f64> = e.windows(2).map(|w| w[1] - w[0]).collect();
        assert_abs_diff_eq!(splits[0], 13.057142857, epsilon = 1e-6);
        assert_abs_diff_eq!(splits[1], 14.742857142, epsilon = 1e-6);
        assert_abs_diff_eq!(splits[2], 14.142857142, epsilon = 1e-6);
    }

    #[test]
    fn out_of_range_f_is_rejected() {
        assert!(hyperfine_energy(1.0, 0.0, I, h(5), h(10)).is_err());
        assert!(hyperfine_energy(1.0, 0.0, I, h(5), h(0)).is_err());
    }

    #[test]
    fn quadrupole_needs_j_above_half() {
        assert!(hyperfine_energy(3417.0, 1.0, I, h(1), h(4)).is_err());
        assert!(hyperfine_energy(3417.0, 0.0, I, h(1), h(4)).is_ok());
    }

    #[test]
    fn weighted_trace_vanishes() {
        for (a, b, j) in [(-16.801, 3.645, h(5)), (3.4, -4.0, h(7)), (84.7185, 12.4965, h(3)), (3417.34, 0.0, h(1))] {
            let s: f64 = allowed_f(I, j)
                .into_iter()
                .map(|f| (f.doubled() + 1) as f64 * hyperfine_energy(a, b, I, j, f).unwrap())
                .sum();
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-6);
        }
    }
}
