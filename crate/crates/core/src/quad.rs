//! Adaptive Gauss–Kronrod (7, 15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::Result;
use crate::scalar::Real;

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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Single 15-point Kronrod estimate and its error against the embedded Gauss rule.
fn gk15<T: Real, F: FnMut(T) -> Result<T>>(f: &mut F, a: T, b: T) -> Result<(T, T)> {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let fc = f(mid)?;
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let pair = f(mid - dx)? + f(mid + dx)?;
        kron = kron + pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + pair * T::lit(WG[j / 2]);
        }
    }
    Ok((kron * half, ((kron - gauss) * half).abs()))
}

/// Upper bound on the number of subintervals kept by [`integrate`].
pub const MAX_SUBINTERVALS: usize = 20_000;

struct Piece<T> {
    lo: T,
    hi: T,
    val: T,
    err: T,
}

impl<T: Real> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}
impl<T: Real> Eq for Piece<T> {}
impl<T: Real> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.as_f64().total_cmp(&other.err.as_f64())
    }
}

/// Integrates `f` over `[a, b]` to `max(abs_tol, rel_tol·|I|)`, always
/// bisecting the subinterval with the largest error estimate. Only interior
/// nodes are sampled, so integrable endpoint singularities are fine.
pub fn integrate<T: Real, F: FnMut(T) -> Result<T>>(mut f: F, a: T, b: T, abs_tol: T, rel_tol: T) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let (val, err) = gk15(&mut f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { lo: a, hi: b, val, err });
    let (mut total, mut total_err) = (val, err);
    while heap.len() < MAX_SUBINTERVALS {
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = (worst.lo + worst.hi) * T::lit(0.5);
        if mid == worst.lo || mid == worst.hi {
            heap.push(worst);
            break;
        }
        let (l, el) = gk15(&mut f, worst.lo, mid)?;
        let (r, er) = gk15(&mut f, mid, worst.hi)?;
        total = total - worst.val + l + r;
        total_err = total_err - worst.err + el + er;
        heap.push(Piece { lo: worst.lo, hi: mid, val: l, err: el });
        heap.push(Piece { lo: mid, hi: worst.hi, val: r, err: er });
    }
    // re-sum to shed the drift of the running updates
    Ok(heap.iter().fold(T::zero(), |acc, p| acc + p.val))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x: f64| Ok(x.powi(5) - 2.0 * x), 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let v = integrate(|x: f64| Ok(1.0 / x.sqrt()), 0.0, 1.0, 1e-11, 1e-11).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn reversed_limits() {
        let v = integrate(|x: f64| Ok(x.exp()), 1.0, 0.0, 1e-13, 1e-13).unwrap();
        assert!((v + (1f64.exp() - 1.0)).abs() < 1e-12);
    }
}
