//! The planar `(w, v)` system obtained from the traveling-wave equations with
//! `w = u/S` and `v = S'/S`:
//!
//! ```text
//! w' = w (g(a v - σ) - v)
//! γ v' = λ - γ v² - w
//! ```
//!
//! with its nullclines, equilibria and their linearisations.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::{FluxLimiter, SlopeDomain};
use crate::scalar::Real;

/// Subintervals scanned when bracketing equilibria of saturated limiters.
pub const SATURATED_SCAN_CELLS: usize = 4096;
/// Relative tolerance for detecting `σ = σ⋆` and `a = μ`.
pub const DEGENERATE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct RawParams<T> {
    a: T,
    sigma: T,
    gamma: T,
    lambda: T,
    limiter: FluxLimiter<T>,
}

/// Model parameters `(a, σ, γ, λ)` plus the diffusion limiter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "RawParams<T>")]
pub struct ModelParams<T> {
    a: T,
    sigma: T,
    gamma: T,
    lambda: T,
    limiter: FluxLimiter<T>,
    v_star: T,
    sigma_star: T,
}

impl<T: Real> TryFrom<RawParams<T>> for ModelParams<T> {
    type Error = Error;

    fn try_from(r: RawParams<T>) -> Result<Self> {
        Self::new(r.a, r.sigma, r.gamma, r.lambda, r.limiter)
    }
}

/// Phase portrait cases for linear diffusion, split by `a` against `μ` and
/// `σ` against `σ⋆`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `a < 1`, `σ < σ⋆`: three equilibria, interior saddle.
    A,
    /// `a < 1`, `σ > σ⋆`.
    B,
    /// `a = 1`: `w` decouples.
    C,
    /// `a > 1`, `σ < σ⋆`: interior stable node or focus.
    D,
    /// `a > 1`, `σ > σ⋆`.
    E,
    /// `σ = σ⋆`.
    Degenerate,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::A => "A",
            Regime::B => "B",
            Regime::C => "C",
            Regime::D => "D",
            Regime::E => "E",
            Regime::Degenerate => "degenerate",
        }
    }
}

impl<T: Real> ModelParams<T> {
    pub fn new(a: T, sigma: T, gamma: T, lambda: T, limiter: FluxLimiter<T>) -> Result<Self> {
        let positive = |x: T| x > T::zero() && x.is_finite();
        if !positive(a) {
            return Err(Error::InvalidParams(format!("a must be positive, got {a}")));
        }
        if !positive(sigma) {
            return Err(Error::InvalidParams(format!("sigma must be positive, got {sigma}")));
        }
        if !positive(gamma) {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
        if !(lambda >= T::zero() && lambda.is_finite()) {
            return Err(Error::InvalidParams(format!("lambda must be non-negative, got {lambda}")));
        }
        limiter.validate()?;
        let v_star = (lambda / gamma).sqrt();
        let sigma_star = (limiter.mu - a).abs() * v_star;
        Ok(Self { a, sigma, gamma, lambda, limiter, v_star, sigma_star })
    }

    /// Linear diffusion with `μ = 1`.
    pub fn linear(a: T, sigma: T, gamma: T, lambda: T) -> Result<Self> {
        Self::new(a, sigma, gamma, lambda, FluxLimiter::linear(T::one())?)
    }

    pub fn a(&self) -> T {
        self.a
    }
    pub fn sigma(&self) -> T {
        self.sigma
    }
    pub fn gamma(&self) -> T {
        self.gamma
    }
    pub fn lambda(&self) -> T {
        self.lambda
    }
    pub fn limiter(&self) -> &FluxLimiter<T> {
        &self.limiter
    }

    /// `√(λ/γ)`: the parabola `w = λ - γv²` meets `w = 0` at `±v⋆`.
    pub fn v_star(&self) -> T {
        self.v_star
    }

    /// `|μ - a| v⋆`, the speed at which the interior equilibrium merges with
    /// `(0, ±v⋆)`. Reduces to `|1 - a| v⋆` for `μ = 1`.
    pub fn sigma_star(&self) -> T {
        self.sigma_star
    }

    pub fn with_sigma(&self, sigma: T) -> Result<Self> {
        Self::new(self.a, sigma, self.gamma, self.lambda, self.limiter)
    }

    pub fn with_a(&self, a: T) -> Result<Self> {
        Self::new(a, self.sigma, self.gamma, self.lambda, self.limiter)
    }

    pub fn slope_domain(&self) -> SlopeDomain<T> {
        self.limiter.slope_domain(self.a, self.sigma)
    }

    /// True when `a` equals `μ` within [`DEGENERATE_RTOL`], the decoupled case.
    pub fn is_balanced(&self) -> bool {
        (self.a - self.limiter.mu).abs() <= T::lit(DEGENERATE_RTOL) * self.limiter.mu
    }

    pub fn is_critical_speed(&self) -> bool {
        self.sigma_star > T::zero()
            && (self.sigma - self.sigma_star).abs() <= T::lit(DEGENERATE_RTOL) * self.sigma_star
    }

    /// Portrait case for linear diffusion; `None` for saturated limiters.
    pub fn regime(&self) -> Option<Regime> {
        if self.limiter.is_saturated() {
            return None;
        }
        if self.is_balanced() {
            return Some(Regime::C);
        }
        if self.is_critical_speed() {
            return Some(Regime::Degenerate);
        }
        let slow = self.sigma < self.sigma_star;
        Some(match (self.a < self.limiter.mu, slow) {
            (true, true) => Regime::A,
            (true, false) => Regime::B,
            (false, true) => Regime::D,
            (false, false) => Regime::E,
        })
    }

    /// Value of the parabola `λ - γv²` (the `v`-nullcline).
    pub fn parabola(&self, v: T) -> T {
        self.lambda - self.gamma * v * v
    }

    /// `g(av - σ) - v`, the logarithmic growth rate of `w`.
    pub fn w_rate(&self, v: T) -> Result<T> {
        Ok(self.limiter.g(self.a * v - self.sigma)? - v)
    }

    pub fn v_rate(&self, w: T, v: T) -> T {
        (self.lambda - w) / self.gamma - v * v
    }
}

/// Right-hand side `(w', v')`.
pub fn rhs<T: Real>(p: &ModelParams<T>, w: T, v: T) -> Result<[T; 2]> {
    Ok([w * p.w_rate(v)?, p.v_rate(w, v)])
}

/// Jacobian of [`rhs`] at `(w, v)`.
pub fn jacobian<T: Real>(p: &ModelParams<T>, w: T, v: T) -> Result<[[T; 2]; 2]> {
    let y = p.a * v - p.sigma;
    let g = p.limiter.g(y)?;
    let dg = p.limiter.g_prime(y)?;
    Ok([[g - v, w * (p.a * dg - T::one())], [-p.gamma.recip(), -(v + v)]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityLabel {
    StableNode,
    UnstableNode,
    Saddle,
    StableFocus,
    UnstableFocus,
    /// A zero eigenvalue or a purely imaginary pair.
    Degenerate,
}

/// Which branch of the equilibrium set a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumRole {
    /// `(0, v⋆)`.
    Upper,
    /// `(0, -v⋆)`.
    Lower,
    /// `w > 0` on the parabola where `g(av - σ) = v`.
    Interior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Eigenstructure<T> {
    /// Ordered by decreasing real part.
    pub eigenvalues: [Complex<T>; 2],
    /// Present for real eigenvalues; normalised so the `v` component is 1.
    pub eigenvectors: Option<[[T; 2]; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Equilibrium<T> {
    pub w: T,
    pub v: T,
    pub role: EquilibriumRole,
    pub eigenvalues: [Complex<T>; 2],
    pub eigenvectors: Option<[[T; 2]; 2]>,
    pub label: StabilityLabel,
}

impl<T: Real> Equilibrium<T> {
    /// Eigenvector for the eigenvalue with negative real part, if the point is
    /// a saddle.
    pub fn stable_direction(&self) -> Option<[T; 2]> {
        self.eigenvectors
            .filter(|_| self.label == StabilityLabel::Saddle)
            .map(|vecs| if self.eigenvalues[0].re < T::zero() { vecs[0] } else { vecs[1] })
    }

    pub fn unstable_direction(&self) -> Option<[T; 2]> {
        self.eigenvectors
            .filter(|_| self.label == StabilityLabel::Saddle)
            .map(|vecs| if self.eigenvalues[0].re > T::zero() { vecs[0] } else { vecs[1] })
    }

    pub fn distance(&self, w: T, v: T) -> T {
        (w - self.w).hypot(v - self.v)
    }
}

fn eigen_of<T: Real>(p: &ModelParams<T>, w: T, v: T) -> Result<Eigenstructure<T>> {
    let j = jacobian(p, w, v)?;
    let half_tr = (j[0][0] + j[1][1]) * T::lit(0.5);
    let half_diff = (j[0][0] - j[1][1]) * T::lit(0.5);
    let disc = half_diff * half_diff + j[0][1] * j[1][0];
    if disc >= T::zero() {
        let r = disc.sqrt();
        let (x1, x2) = (half_tr + r, half_tr - r);
        let vector = |x: T| [-p.gamma * (v + v + x), T::one()];
        Ok(Eigenstructure {
            eigenvalues: [Complex::new(x1, T::zero()), Complex::new(x2, T::zero())],
            eigenvectors: Some([vector(x1), vector(x2)]),
        })
    } else {
        let im = (-disc).sqrt();
        Ok(Eigenstructure {
            eigenvalues: [Complex::new(half_tr, im), Complex::new(half_tr, -im)],
            eigenvectors: None,
        })
    }
}

fn label_of<T: Real>(p: &ModelParams<T>, eig: &Eigenstructure<T>) -> StabilityLabel {
    let scale = T::one().max(eig.eigenvalues[0].norm()).max(eig.eigenvalues[1].norm()).max(p.sigma);
    let tiny = T::lit(DEGENERATE_RTOL) * scale;
    let [x1, x2] = eig.eigenvalues;
    if x1.re.abs() <= tiny || x2.re.abs() <= tiny {
        return StabilityLabel::Degenerate;
    }
    if x1.im != T::zero() {
        return if x1.re < T::zero() { StabilityLabel::StableFocus } else { StabilityLabel::UnstableFocus };
    }
    match (x1.re > T::zero(), x2.re > T::zero()) {
        (true, true) => StabilityLabel::UnstableNode,
        (false, false) => StabilityLabel::StableNode,
        _ => StabilityLabel::Saddle,
    }
}

fn build<T: Real>(p: &ModelParams<T>, w: T, v: T, role: EquilibriumRole) -> Result<Equilibrium<T>> {
    let eig = eigen_of(p, w, v)?;
    let label = label_of(p, &eig);
    Ok(Equilibrium { w, v, role, eigenvalues: eig.eigenvalues, eigenvectors: eig.eigenvectors, label })
}

/// Eigenvalues and eigenvectors of the linearisation at `e`; fails with
/// [`Error::Degenerate`] on a zero eigenvalue.
pub fn eigenstructure<T: Real>(p: &ModelParams<T>, e: &Equilibrium<T>) -> Result<Eigenstructure<T>> {
    let eig = eigen_of(p, e.w, e.v)?;
    let scale = T::one().max(eig.eigenvalues[0].norm()).max(p.sigma);
    if eig.eigenvalues.iter().any(|x| x.norm() <= T::lit(DEGENERATE_RTOL) * scale) {
        return Err(Error::Degenerate { w: e.w.as_f64(), v: e.v.as_f64() });
    }
    Ok(eig)
}

/// Roots of `g(av - σ) = v` inside the slope domain, by sign bracketing on
/// [`SATURATED_SCAN_CELLS`] cells followed by bisection.
fn saturated_vertical_lines<T: Real>(p: &ModelParams<T>) -> Vec<T> {
    let dom = p.slope_domain();
    let n = SATURATED_SCAN_CELLS;
    let node = |i: usize| dom.lo + dom.width() * T::lit(i as f64 / n as f64);
    let f = |v: T| p.w_rate(v).ok();
    let mut roots = Vec::new();
    // g → -∞ at the lower end and +∞ at the upper end
    let mut prev_v = dom.lo;
    let mut prev_f = -T::one();
    for i in 1..=n {
        let (v, fv) = if i == n {
            (dom.hi, T::one())
        } else {
            let v = node(i);
            match f(v) {
                Some(fv) => (v, fv),
                None => continue,
            }
        };
        if fv == T::zero() {
            roots.push(v);
        } else if prev_f != T::zero() && (fv > T::zero()) != (prev_f > T::zero()) {
            let (mut lo, mut hi) = (prev_v, v);
            let lo_positive = prev_f > T::zero();
            for _ in 0..200 {
                let mid = (lo + hi) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                match f(mid) {
                    Some(fm) if (fm > T::zero()) == lo_positive => lo = mid,
                    Some(_) => hi = mid,
                    None => break,
                }
            }
            roots.push((lo + hi) * T::lit(0.5));
        }
        prev_v = v;
        prev_f = fv;
    }
    roots
}

/// `v`-positions of the non-trivial `w`-nullclines (`g(av - σ) = v`).
fn vertical_lines<T: Real>(p: &ModelParams<T>) -> Vec<T> {
    if p.limiter.is_saturated() {
        saturated_vertical_lines(p)
    } else if p.is_balanced() {
        Vec::new()
    } else {
        vec![p.sigma / (p.a - p.limiter.mu)]
    }
}

/// All equilibria with `w ≥ 0`, each with its linearisation and label.
pub fn equilibria<T: Real>(p: &ModelParams<T>) -> Vec<Equilibrium<T>> {
    let dom = p.slope_domain();
    let mut out = Vec::new();
    let vs = p.v_star;
    let axis: &[(T, EquilibriumRole)] = if vs > T::zero() {
        &[(vs, EquilibriumRole::Upper), (-vs, EquilibriumRole::Lower)]
    } else {
        &[(T::zero(), EquilibriumRole::Upper)]
    };
    for &(v, role) in axis {
        if dom.contains(v) {
            if let Ok(e) = build(p, T::zero(), v, role) {
                out.push(e);
            }
        }
    }
    for v in vertical_lines(p) {
        let w = p.parabola(v);
        if w > T::zero() && dom.contains(v) {
            if let Ok(e) = build(p, w, v, EquilibriumRole::Interior) {
                out.push(e);
            }
        }
    }
    out
}

/// Parametric nullcline data sampled on a `v` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Nullclines<T> {
    /// Points `(v, λ - γv²)` with non-negative `w`, restricted to the slope domain.
    pub parabola: Vec<[T; 2]>,
    /// Vertical `w`-nullclines `v = const`; besides these, `w = 0` is always one.
    pub vertical_lines: Vec<T>,
}

pub fn nullclines<T: Real>(p: &ModelParams<T>, v_grid: &[T]) -> Nullclines<T> {
    let dom = p.slope_domain();
    let parabola = v_grid
        .iter()
        .filter(|&&v| dom.contains(v))
        .map(|&v| [v, p.parabola(v)])
        .filter(|pt| pt[1] >= T::zero())
        .collect();
    Nullclines { parabola, vertical_lines: vertical_lines(p) }
}
