//! Diffusion flux nonlinearities `Φ`, their inverses `g = Φ⁻¹` and the slope
//! interval on which the reduced system is defined.
//!
//! Three families are supported: linear diffusion `Φ(s) = μs`, the relativistic
//! heat equation limiter `Φ(s) = μs/√(1 + (μs/c)²)`, and the Larson limiters
//! `Φ(s) = μs/(1 + (μ|s|/c)^p)^{1/p}` with `p > 1` (relativistic is `p = 2`).
//! Saturated limiters are odd, strictly increasing and bounded by `c`, so `g`
//! lives on `(-c, c)` and blows up like `(c - |y|)^{-1/p}` at the ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LimiterKind<T> {
    Linear,
    Relativistic,
    Larson { p: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FluxLimiter<T> {
    #[serde(flatten)]
    pub kind: LimiterKind<T>,
    /// Viscosity.
    pub mu: T,
    /// Saturation speed. Ignored by the linear limiter.
    pub c: T,
}

/// Open interval of admissible `v` (possibly unbounded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeDomain<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> SlopeDomain<T> {
    pub fn contains(&self, v: T) -> bool {
        v > self.lo && v < self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }
}

impl<T: Real> FluxLimiter<T> {
    pub fn linear(mu: T) -> Result<Self> {
        Self::checked(LimiterKind::Linear, mu, T::one())
    }

    pub fn relativistic(mu: T, c: T) -> Result<Self> {
        Self::checked(LimiterKind::Relativistic, mu, c)
    }

    pub fn larson(mu: T, c: T, p: T) -> Result<Self> {
        Self::checked(LimiterKind::Larson { p }, mu, c)
    }

    fn checked(kind: LimiterKind<T>, mu: T, c: T) -> Result<Self> {
        let lim = Self { kind, mu, c };
        lim.validate()?;
        Ok(lim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::zero() && self.mu.is_finite()) {
            return Err(Error::InvalidParams(format!("mu must be positive, got {}", self.mu)));
        }
        if self.is_saturated() && !(self.c > T::zero() && self.c.is_finite()) {
            return Err(Error::InvalidParams(format!("c must be positive, got {}", self.c)));
        }
        if let LimiterKind::Larson { p } = self.kind {
            if !(p > T::one() && p.is_finite()) {
                return Err(Error::InvalidParams(format!("Larson exponent must exceed 1, got {p}")));
            }
        }
        Ok(())
    }

    pub fn is_saturated(&self) -> bool {
        !matches!(self.kind, LimiterKind::Linear)
    }

    /// Exponent `p` of the boundary singularity `g ~ (c - |y|)^{-1/p}`;
    /// `None` for linear diffusion.
    pub fn singular_exponent(&self) -> Option<T> {
        match self.kind {
            LimiterKind::Linear => None,
            LimiterKind::Relativistic => Some(T::lit(2.0)),
            LimiterKind::Larson { p } => Some(p),
        }
    }

    pub fn phi(&self, s: T) -> T {
        match self.kind {
            LimiterKind::Linear => self.mu * s,
            LimiterKind::Relativistic => self.mu * s / T::one().hypot(self.mu * s / self.c),
            LimiterKind::Larson { p } => {
                let z = self.mu * s.abs() / self.c;
                if z <= T::one() {
                    self.mu * s / (T::one() + z.powf(p)).powf(p.recip())
                } else {
                    // c / (1 + z^{-p})^{1/p}, avoids overflow of z^p
                    s.signum() * self.c / (T::one() + z.powf(-p)).powf(p.recip())
                }
            }
        }
    }

    /// `1 - (|y|/c)^p`, computed from the distance `δ = c - |y|` without cancellation.
    fn gap(&self, delta: T, p: T) -> T {
        let r = -delta / self.c;
        -(p * r.ln_1p()).exp_m1()
    }

    fn check_domain(&self, y: T) -> Result<T> {
        let delta = self.c - y.abs();
        if !(delta > T::zero()) {
            return Err(Error::Domain { y: y.as_f64(), c: self.c.as_f64() });
        }
        Ok(delta)
    }

    /// Inverse flux `g = Φ⁻¹`. Saturated limiters reject `|y| >= c`.
    pub fn g(&self, y: T) -> Result<T> {
        match self.kind {
            LimiterKind::Linear => Ok(y / self.mu),
            LimiterKind::Relativistic => {
                let delta = self.check_domain(y)?;
                let root = (delta * (self.c + y.abs())).sqrt();
                Ok(self.c * y / (self.mu * root))
            }
            LimiterKind::Larson { p } => {
                let delta = self.check_domain(y)?;
                Ok(y / (self.mu * self.gap(delta, p).powf(p.recip())))
            }
        }
    }

    /// Derivative `g'(y) = 1/Φ'(g(y))`.
    pub fn g_prime(&self, y: T) -> Result<T> {
        match self.kind {
            LimiterKind::Linear => Ok(self.mu.recip()),
            LimiterKind::Relativistic | LimiterKind::Larson { .. } => {
                let p = self.singular_exponent().unwrap_or_else(|| T::lit(2.0));
                let delta = self.check_domain(y)?;
                let gap = self.gap(delta, p);
                Ok(gap.powf(-(p.recip() + T::one())) / self.mu)
            }
        }
    }

    /// Regular factor of `g` at distance `δ = c - |y|` from the boundary on the
    /// positive side: `g(c - δ) · δ^{1/p}`, finite as `δ → 0`.
    pub fn g_regular_part(&self, delta: T) -> T {
        let Some(p) = self.singular_exponent() else {
            return (self.c - delta) / self.mu;
        };
        let y = self.c - delta;
        // gap(δ)/δ → p/c as δ → 0
        let ratio = if delta > T::epsilon() * self.c * T::lit(1e-3) {
            self.gap(delta, p) / delta
        } else {
            p / self.c
        };
        y / (self.mu * ratio.powf(p.recip()))
    }

    /// `g(±(c - δ))` evaluated from the distance to the boundary.
    pub fn g_at_distance(&self, delta: T, positive_side: bool) -> T {
        let p = self.singular_exponent().unwrap_or_else(T::one);
        let val = self.g_regular_part(delta) * delta.powf(-p.recip());
        if positive_side {
            val
        } else {
            -val
        }
    }

    /// Interval of `v` on which `g(av - σ)` is defined.
    pub fn slope_domain(&self, a: T, sigma: T) -> SlopeDomain<T> {
        if self.is_saturated() {
            SlopeDomain { lo: (sigma - self.c) / a, hi: (sigma + self.c) / a }
        } else {
            SlopeDomain { lo: T::neg_infinity(), hi: T::infinity() }
        }
    }
}
