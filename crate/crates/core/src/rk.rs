//! Dormand–Prince 5(4) with a PI step-size controller, FSAL, and event
//! localisation by re-stepping from the last accepted point.

use crate::error::{Error, Result};
use crate::scalar::Real;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
/// Fifth-order weights minus the embedded fourth-order ones.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const BETA: f64 = 0.04;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances<T, const N: usize> {
    pub rtol: T,
    pub atol: [T; N],
    /// Components whose scale never drops below 1 (log variables).
    pub unit_floor: [bool; N],
    pub h_max: T,
    pub h_min: T,
}

pub(crate) struct Dopri<T, const N: usize> {
    pub t: T,
    pub y: [T; N],
    pub prev_t: T,
    pub prev_y: [T; N],
    k1: [T; N],
    prev_k1: [T; N],
    /// Signed proposal for the next step.
    h: T,
    last_h: T,
    fac_old: T,
    tol: Tolerances<T, N>,
}

fn axpy<T: Real, const N: usize>(y: &[T; N], h: T, terms: &[(&[T; N], f64)]) -> [T; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for (k, c) in terms {
            acc = acc + k[i] * T::lit(*c);
        }
        *o = *o + h * acc;
    }
    out
}

/// One Dormand–Prince step; returns the new state, its derivative and the
/// local error vector.
fn raw_step<T: Real, const N: usize, F>(f: &mut F, t: T, y: &[T; N], k1: &[T; N], h: T) -> Result<([T; N], [T; N], [T; N])>
where
    F: FnMut(T, &[T; N]) -> Result<[T; N]>,
{
    let at = |c: f64| t + h * T::lit(c);
    let k2 = f(at(C[1]), &axpy(y, h, &[(k1, A2[0])]))?;
    let k3 = f(at(C[2]), &axpy(y, h, &[(k1, A3[0]), (&k2, A3[1])]))?;
    let k4 = f(at(C[3]), &axpy(y, h, &[(k1, A4[0]), (&k2, A4[1]), (&k3, A4[2])]))?;
    let k5 = f(at(C[4]), &axpy(y, h, &[(k1, A5[0]), (&k2, A5[1]), (&k3, A5[2]), (&k4, A5[3])]))?;
    let k6 = f(
        at(C[5]),
        &axpy(y, h, &[(k1, A6[0]), (&k2, A6[1]), (&k3, A6[2]), (&k4, A6[3]), (&k5, A6[4])]),
    )?;
    let y_new = axpy(y, h, &[(k1, B[0]), (&k3, B[2]), (&k4, B[3]), (&k5, B[4]), (&k6, B[5])]);
    if y_new.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain { y: f64::NAN, c: f64::NAN });
    }
    let k7 = f(t + h, &y_new)?;
    let zero = [T::zero(); N];
    let err = axpy(
        &zero,
        h,
        &[(k1, E[0]), (&k3, E[2]), (&k4, E[3]), (&k5, E[4]), (&k6, E[5]), (&k7, E[6])],
    );
    Ok((y_new, k7, err))
}

impl<T: Real, const N: usize> Dopri<T, N> {
    /// `h0` carries the integration direction through its sign.
    pub fn new<F>(f: &mut F, t0: T, y0: [T; N], h0: T, tol: Tolerances<T, N>) -> Result<Self>
    where
        F: FnMut(T, &[T; N]) -> Result<[T; N]>,
    {
        let k1 = f(t0, &y0)?;
        Ok(Self {
            t: t0,
            y: y0,
            prev_t: t0,
            prev_y: y0,
            k1,
            prev_k1: k1,
            h: h0,
            last_h: T::zero(),
            fac_old: T::lit(1e-4),
            tol,
        })
    }



    fn error_norm(&self, y_new: &[T; N], err: &[T; N]) -> T {
        let mut sum = T::zero();
        for i in 0..N {
            let mut mag = self.y[i].abs().max(y_new[i].abs());
            if self.tol.unit_floor[i] {
                mag = mag.max(T::one());
            }
            let sc = self.tol.atol[i] + self.tol.rtol * mag;
            let r = err[i] / sc;
            sum = sum + r * r;
        }
        (sum / T::lit(N as f64)).sqrt()
    }

    /// Takes one accepted step, never moving past `t_stop` when given.
    /// Steps whose stages leave the domain are rejected and shrunk.
    pub fn step<F>(&mut self, f: &mut F, t_stop: Option<T>) -> Result<()>
    where
        F: FnMut(T, &[T; N]) -> Result<[T; N]>,
    {
        let dir = self.h.signum();
        let expo = T::lit(0.2 - 0.75 * BETA);
        loop {
            let mut h = dir * self.h.abs().min(self.tol.h_max);
            let mut clipped = false;
            if let Some(stop) = t_stop {
                if (self.t + h - stop) * dir > T::zero() {
                    h = stop - self.t;
                    clipped = true;
                }
            }
            let floor = self.tol.h_min.max(T::lit(16.0) * T::epsilon() * self.t.abs());
            if h.abs() < floor && !clipped {
                return Err(Error::StepSizeUnderflow { s: self.t.as_f64(), h: h.as_f64() });
            }
            match raw_step(f, self.t, &self.y, &self.k1, h) {
                Ok((y_new, k_new, e)) => {
                    let err = self.error_norm(&y_new, &e);
                    if !err.is_finite() {
                        self.h = h * T::lit(FAC_MIN);
                        continue;
                    }
                    let fac11 = err.powf(expo);
                    if err <= T::one() {
                        let fac = (fac11 / self.fac_old.powf(T::lit(BETA)) / T::lit(SAFETY))
                            .max(T::lit(1.0 / FAC_MAX))
                            .min(T::lit(1.0 / FAC_MIN));
                        self.fac_old = err.max(T::lit(1e-4));
                        self.prev_t = self.t;
                        self.prev_y = self.y;
                        self.prev_k1 = self.k1;
                        self.t = if clipped { t_stop.unwrap() } else { self.t + h };
                        self.y = y_new;
                        self.k1 = k_new;
                        self.last_h = h;
                        if !clipped || h.abs() >= self.h.abs() * T::lit(0.5) {
                            self.h = h / fac;
                        }
                        return Ok(());
                    }
                    let shrink = (fac11 / T::lit(SAFETY)).min(T::lit(1.0 / FAC_MIN));
                    self.h = h / shrink;
                }
                Err(Error::Domain { .. }) => {
                    self.h = h * T::lit(0.25);
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// State reached by a single uncontrolled step of size `h` from the
    /// previous accepted point.
    pub fn restep<F>(&self, f: &mut F, h: T) -> Result<[T; N]>
    where
        F: FnMut(T, &[T; N]) -> Result<[T; N]>,
    {
        if h == T::zero() {
            return Ok(self.prev_y);
        }
        raw_step(f, self.prev_t, &self.prev_y, &self.prev_k1, h).map(|r| r.0)
    }

    /// Locates a zero of `event` inside the last accepted step by an
    /// Illinois-type regula falsi on the step fraction. Assumes `event`
    /// changes sign across the step; points where the re-step fails count as
    /// lying past the event.
    pub fn locate<F, G>(&self, f: &mut F, mut event: G) -> (T, [T; N])
    where
        F: FnMut(T, &[T; N]) -> Result<[T; N]>,
        G: FnMut(&[T; N]) -> T,
    {
        let h = self.last_h;
        let e0 = event(&self.prev_y);
        let e1 = event(&self.y);
        let (mut lo, mut hi) = (T::zero(), T::one());
        let (mut flo, mut fhi) = (e0, e1);
        let mut best = (self.t, self.y);
        let mut side = 0i8;
        for _ in 0..200 {
            if (hi - lo) <= T::lit(4.0) * T::epsilon() {
                break;
            }
            let mut theta = if flo.is_finite() && fhi.is_finite() && flo != fhi {
                lo + (hi - lo) * flo / (flo - fhi)
            } else {
                (lo + hi) * T::lit(0.5)
            };
            if !(theta > lo && theta < hi) {
                theta = (lo + hi) * T::lit(0.5);
            }
            let fm = match self.restep(f, h * theta) {
                Ok(y) => {
                    let v = event(&y);
                    if (v > T::zero()) == (e1 > T::zero()) || v == T::zero() {
                        best = (self.prev_t + h * theta, y);
                    }
                    v
                }
                Err(_) => e1,
            };
            if fm == T::zero() {
                break;
            }
            if (fm > T::zero()) == (flo > T::zero()) {
                lo = theta;
                flo = fm;
                if side == -1 {
                    fhi = fhi * T::lit(0.5);
                }
                side = -1;
            } else {
                hi = theta;
                fhi = fm;
                if side == 1 {
                    flo = flo * T::lit(0.5);
                }
                side = 1;
            }
        }
        best
    }
}
