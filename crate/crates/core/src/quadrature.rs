//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{param, Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5 and the centre
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Piece {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rule<F: FnMut(f64) -> Result<f64>>(f: &mut F, lo: f64, hi: f64) -> Result<Piece> {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx)? + f(c + dx)?;
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Ok(Piece {
        lo,
        hi,
        value: kronrod * h,
        error: ((kronrod - gauss) * h).abs(),
    })
}

/// `∫_lo^hi f` to within `max(abs_tol, rel_tol·|I|)`, bisecting the piece
/// with the largest error estimate until the total estimate meets the
/// tolerance or `max_intervals` is reached (then an accuracy error).
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> Result<Quadrature>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo.is_finite() && hi.is_finite()) {
        return param("integration limits must be finite");
    }
    if hi == lo {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (lo, hi, sign) = if hi > lo { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
    integrate_breaks(&mut f, &[lo, hi], abs_tol, rel_tol, max_intervals).map(|q| Quadrature {
        value: sign * q.value,
        ..q
    })
}

/// Like [`integrate`] over consecutive pieces `[b_0, b_1], [b_1, b_2], …`,
/// which must be increasing.
pub fn integrate_breaks<F>(f: &mut F, breaks: &[f64], abs_tol: f64, rel_tol: f64, max_intervals: usize) -> Result<Quadrature>
where
    F: FnMut(f64) -> Result<f64>,
{
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] >= w[0])) {
        return param("breakpoints must be increasing");
    }
    let mut heap = BinaryHeap::new();
    let (mut value, mut error) = (0.0, 0.0);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let p = rule(f, w[0], w[1])?;
            value += p.value;
            error += p.error;
            heap.push(p);
        }
    }
    loop {
        let tol = abs_tol.max(rel_tol * value.abs());
        if error <= tol {
            return Ok(Quadrature {
                value,
                error,
                intervals: heap.len(),
            });
        }
        if heap.len() >= max_intervals {
            return Err(Error::Accuracy {
                achieved: error,
                requested: tol,
            });
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            // cannot split further in floating point
            return Err(Error::Accuracy {
                achieved: error,
                requested: tol,
            });
        }
        let left = rule(f, worst.lo, mid)?;
        let right = rule(f, mid, worst.hi)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let q = integrate(|x| Ok(x.powi(5) - 2.0 * x), -1.0, 2.0, 1e-12, 0.0, 10).unwrap();
        assert!((q.value - (64.0 / 6.0 - 1.0 / 6.0 - 3.0)).abs() < 1e-12);
        assert_eq!(q.intervals, 1);
    }

    #[test]
    fn oscillatory_and_singular() {
        let q = integrate(|x| Ok((20.0 * x).cos()), 0.0, std::f64::consts::PI, 1e-10, 0.0, 500).unwrap();
        assert!(q.value.abs() < 1e-9);
        let q = integrate(|x| Ok(x.powf(-0.5)), 0.0, 1.0, 1e-8, 0.0, 2000).unwrap();
        assert!((q.value - 2.0).abs() < 1e-7);
        let q = integrate(|x| Ok(x.exp()), 1.0, 0.0, 1e-12, 0.0, 50).unwrap();
        assert!((q.value + (1f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn reports_accuracy_failure() {
        let out = integrate(|x| Ok(x.recip()), 0.0, 1.0, 1e-12, 0.0, 20);
        assert!(matches!(out, Err(Error::Accuracy { .. })));
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let mut f = |x: f64| Ok((x - 0.3).abs());
        let q = integrate_breaks(&mut f, &[0.0, 0.3, 1.0], 1e-14, 0.0, 4).unwrap();
        assert!((q.value - (0.045 + 0.245)).abs() < 1e-14);
    }
}
