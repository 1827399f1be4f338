//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{MreError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// The interval starts as `2^MIN_DEPTH` pieces, so that a narrow feature
/// cannot slip between the nodes of a single rule.
const MIN_DEPTH: u32 = 4;

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate and error (|Kronrod − Gauss|) on `[a, b]`.
fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    lo: f64,
    hi: f64,
    val: f64,
    err: f64,
    depth: u32,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integral of `f` over `[a, b]` to within `max(abs_tol, rel_tol·|I|)`.
///
/// Globally adaptive: the piece with the largest error estimate is bisected
/// until the summed estimate meets the tolerance. Needing more than
/// `max_depth` bisections of one piece is a precision error.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: u32,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let piece = |lo: f64, hi: f64, depth: u32| {
        let (val, err) = gk15(&f, lo, hi);
        Piece { lo, hi, val, err, depth }
    };
    let n0 = 1u32 << MIN_DEPTH;
    let h = (b - a) / f64::from(n0);
    let mut heap: std::collections::BinaryHeap<Piece> = (0..n0)
        .map(|i| {
            let lo = a + f64::from(i) * h;
            let hi = if i + 1 == n0 { b } else { lo + h };
            piece(lo, hi, MIN_DEPTH)
        })
        .collect();
    loop {
        let total: f64 = heap.iter().map(|p| p.val).sum();
        let err: f64 = heap.iter().map(|p| p.err).sum();
        if !total.is_finite() || !err.is_finite() {
            return Err(MreError::Precision("quadrature produced a non-finite value".into()));
        }
        let worst = heap.pop().expect("non-empty");
        // the worst piece is already at round-off level: nothing left to gain
        let stalled = worst.err <= 50.0 * f64::EPSILON * worst.val.abs();
        if err <= abs_tol.max(rel_tol * total.abs()) || stalled {
            return Ok(total);
        }
        if worst.depth >= max_depth.max(MIN_DEPTH) {
            return Err(MreError::Precision(format!(
                "quadrature did not converge on [{}, {}]: error {:.3e}, total error {err:.3e}",
                worst.lo, worst.hi, worst.err
            )));
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        heap.push(piece(worst.lo, mid, worst.depth + 1));
        heap.push(piece(mid, worst.hi, worst.depth + 1));
    }
}

/// [`integrate`] over consecutive breakpoints `[p₀, p₁], [p₁, p₂], …`.
pub fn integrate_pieces(
    f: impl Fn(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let n = breaks.len().saturating_sub(1).max(1) as f64;
    breaks
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], abs_tol / n, rel_tol, 50))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(12) - 3.0 * x.powi(7), -1.0, 1.0, 1e-15, 0.0, 4).unwrap();
        assert!((v - 2.0 / 13.0).abs() < 1e-15);
    }

    #[test]
    fn sharp_gaussian_is_resolved() {
        let a = 1e3;
        let v = integrate(|x| (-a * (x - 0.3).powi(2)).exp(), -PI, PI, 1e-14, 1e-13, 50).unwrap();
        assert!((v - (PI / a).sqrt()).abs() < 1e-12 * v);
    }

    #[test]
    fn non_convergence_is_reported() {
        let r = integrate(|x| 1.0 / x.abs().sqrt(), -1.0, 1.0, 1e-15, 0.0, 6);
        assert!(matches!(r, Err(MreError::Precision(_))));
    }
}
