//! Reconstruction of the traveling-wave pair `(u, S)` from a `(w, v)`
//! trajectory, `S = S0 exp(∫ v)` and `u = w S`, with the type taxonomy of the
//! profiles, endpoint slope estimates and flux-saturated fronts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{self, Controls, Direction, GraphControls, Sample, Trajectory};
use crate::phase::ModelParams;
use crate::scalar::{extended, Real};
use crate::shooting;

/// Relative tolerance on `u0/S0 = w(s0)`.
pub const ANCHOR_RTOL: f64 = 1e-9;
/// A profile vanishes at a finite end when it drops below this fraction of its maximum.
pub const VANISH_FRACTION: f64 = 1e-3;
/// An infinite tail grows when it exceeds this multiple of the anchor value.
pub const GROWTH_FACTOR: f64 = 1e3;
/// Span of the integrated tails on infinite sides.
pub const TAIL_SPAN: f64 = 60.0;
/// Minimum samples in the slope regression window.
pub const MIN_FIT_SAMPLES: usize = 20;
/// Half-width of the "finite slope" band around a unit log-log exponent.
pub const SLOPE_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileType {
    /// Compact support, zero at both finite ends.
    A1,
    /// Zero at a finite `s₋`, tends to zero as `s → ∞`.
    A2,
    /// Zero at a finite `s₋`, grows without bound as `s → ∞`.
    A3,
    /// Grows without bound as `s → -∞`, zero at a finite `s₊`.
    A4,
    SaturatedFrontConcave,
    SaturatedFrontConvex,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlopeKind {
    PlusInfinity,
    MinusInfinity,
    FinitePositive,
    FiniteNegative,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ProfileSample<T> {
    pub s: T,
    pub u: T,
    #[serde(rename = "S")]
    pub big_s: T,
    pub ln_u: T,
    pub ln_s: T,
    /// The underlying `(w, v)` state.
    pub w: T,
    pub v: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Anchors<T> {
    pub s0: T,
    #[serde(rename = "S0")]
    pub big_s0: T,
    pub u0: T,
    /// `u0/S0`, equal to `w(s0)`.
    pub w0: T,
    pub v0: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EndpointSlopes<T> {
    pub u_prime_at_s_minus: SlopeKind,
    pub u_prime_at_s_plus: SlopeKind,
    /// Log-log regression exponents of `u` against the distance to each end.
    pub exponent_minus: T,
    pub exponent_plus: T,
    /// Sign of `S' = vS` at the extreme samples.
    pub s_prime_sign_minus: i8,
    pub s_prime_sign_plus: i8,
    /// `(av - σ) u / μ` at the extreme samples; the finite slope for `a = μ`.
    pub u_prime_closed_form_minus: T,
    pub u_prime_closed_form_plus: T,
    /// Fitted prefactor `C` of `u ≈ C d^ρ`, the slope when `ρ ≈ 1`.
    pub fit_prefactor_minus: T,
    pub fit_prefactor_plus: T,
}

/// Exponential continuation `S = α e^{r(s - s_e)} + β e^{-r(s - s_e)}` of `S`
/// past a front end `s_e` (linear `α + β(s - s_e)` when `r = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Continuation<T> {
    pub s_end: T,
    pub alpha: T,
    pub beta: T,
    pub rate: T,
}

impl<T: Real> Continuation<T> {
    fn matching(s_end: T, s_val: T, s_prime: T, rate: T) -> Self {
        if rate > T::zero() {
            let half = T::lit(0.5);
            Self { s_end, alpha: half * (s_val + s_prime / rate), beta: half * (s_val - s_prime / rate), rate }
        } else {
            Self { s_end, alpha: s_val, beta: s_prime, rate }
        }
    }

    pub fn eval(&self, s: T) -> T {
        let x = s - self.s_end;
        if self.rate > T::zero() {
            self.alpha * (self.rate * x).exp() + self.beta * (-self.rate * x).exp()
        } else {
            self.alpha + self.beta * x
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ContinuationCoefficients<T> {
    pub left: Continuation<T>,
    pub right: Continuation<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct WaveProfile<T> {
    /// Sorted by increasing `s`.
    pub samples: Vec<ProfileSample<T>>,
    #[serde(with = "extended")]
    pub s_minus: T,
    #[serde(with = "extended")]
    pub s_plus: T,
    pub u_type: ProfileType,
    #[serde(rename = "S_type")]
    pub s_type: ProfileType,
    pub endpoint_slopes: Option<EndpointSlopes<T>>,
    pub anchors: Anchors<T>,
    pub continuation: Option<ContinuationCoefficients<T>>,
}

/// JSON metadata written next to a profile CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ProfileMetadata<T> {
    #[serde(with = "extended")]
    pub s_minus: T,
    #[serde(with = "extended")]
    pub s_plus: T,
    pub u_type: ProfileType,
    #[serde(rename = "S_type")]
    pub s_type: ProfileType,
    pub endpoint_slopes: Option<EndpointSlopes<T>>,
    pub continuation_coefficients: Option<ContinuationCoefficients<T>>,
    pub anchors: Anchors<T>,
}

impl<T: Real> WaveProfile<T> {
    pub fn metadata(&self) -> ProfileMetadata<T> {
        ProfileMetadata {
            s_minus: self.s_minus,
            s_plus: self.s_plus,
            u_type: self.u_type,
            s_type: self.s_type,
            endpoint_slopes: self.endpoint_slopes,
            continuation_coefficients: self.continuation,
            anchors: self.anchors,
        }
    }

    pub fn max_u(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, x| m.max(x.u))
    }

    pub fn max_s(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, x| m.max(x.big_s))
    }
}

/// Integrator settings for profiles: long tails instead of equilibrium
/// stops, and blow-ups followed far enough for endpoint limits and slopes.
pub fn profile_controls<T: Real>() -> Controls<T> {
    Controls {
        v_max: T::lit(1e10),
        w_min: T::zero(),
        stop_at_equilibrium: false,
        s_max: T::lit(TAIL_SPAN),
        h_max: T::lit(0.05),
        ..Controls::default()
    }
}

/// Cubic Hermite value of `(ln w, I)` at `s` from the bracketing samples.
fn state_at<T: Real>(p: &ModelParams<T>, traj: &Trajectory<T>, s: T) -> Result<Sample<T>> {
    let xs = &traj.samples;
    if let Some(x) = xs.iter().find(|x| x.s == s) {
        return Ok(*x);
    }
    if !(s > traj.first().s && s < traj.last().s) {
        return Err(Error::InvalidParams(format!("anchor s0 = {s} lies outside the trajectory")));
    }
    let k = xs.partition_point(|x| x.s <= s);
    let (a, b) = (xs[k - 1], xs[k]);
    let h = b.s - a.s;
    let t = (s - a.s) / h;
    let herm = |y0: T, y1: T, d0: T, d1: T| {
        let (t2, t3) = (t * t, t * t * t);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        (two * t3 - three * t2 + T::one()) * y0 + (t3 - two * t2 + t) * h * d0 + (three * t2 - two * t3) * y1 + (t3 - t2) * h * d1
    };
    let ln_w = herm(a.ln_w, b.ln_w, p.w_rate(a.v)?, p.w_rate(b.v)?);
    let v = herm(a.v, b.v, p.v_rate(a.w, a.v), p.v_rate(b.w, b.v));
    let i = herm(a.i, b.i, a.v, b.v);
    Ok(Sample { s, w: ln_w.exp(), v, i, ln_w })
}

fn build<T: Real>(samples: &[Sample<T>], anchor: Sample<T>, s_minus: T, s_plus: T, big_s0: T, u0: T) -> WaveProfile<T> {
    let ln_s0 = big_s0.ln();
    let samples = samples
        .iter()
        .map(|x| {
            let ln_s = ln_s0 + x.i - anchor.i;
            let ln_u = x.ln_w + ln_s;
            ProfileSample { s: x.s, u: ln_u.exp(), big_s: ln_s.exp(), ln_u, ln_s, w: x.w, v: x.v }
        })
        .collect();
    WaveProfile {
        samples,
        s_minus,
        s_plus,
        u_type: ProfileType::Unclassified,
        s_type: ProfileType::Unclassified,
        endpoint_slopes: None,
        anchors: Anchors { s0: anchor.s, big_s0, u0, w0: anchor.w, v0: anchor.v },
        continuation: None,
    }
}

/// `S = S0 exp(I(s) - I(s0))`, `u = w S`. When `u0` is given it must match
/// `w(s0) S0` to [`ANCHOR_RTOL`].
pub fn reconstruct<T: Real>(p: &ModelParams<T>, traj: &Trajectory<T>, s0: T, big_s0: T, u0: Option<T>) -> Result<WaveProfile<T>> {
    if !(big_s0 > T::zero() && big_s0.is_finite()) {
        return Err(Error::InvalidParams(format!("S0 must be positive, got {big_s0}")));
    }
    let anchor = state_at(p, traj, s0)?;
    let u0 = match u0 {
        Some(u0) => {
            let ratio = u0 / big_s0;
            if (ratio - anchor.w).abs() > T::lit(ANCHOR_RTOL) * anchor.w {
                return Err(Error::AnchorMismatch { ratio: ratio.as_f64(), w: anchor.w.as_f64() });
            }
            u0
        }
        None => anchor.w * big_s0,
    };
    Ok(build(&traj.samples, anchor, traj.s_minus, traj.s_plus, big_s0, u0))
}

/// Integrates both ways from `(w0, v0)` with [`profile_controls`] and
/// reconstructs with `u0 = w0 S0`.
pub fn linear_profile<T: Real>(p: &ModelParams<T>, w0: T, v0: T, s0: T, big_s0: T) -> Result<WaveProfile<T>> {
    let traj = integrate::integrate_from(p, s0, w0, v0, Direction::Both, &profile_controls())?;
    reconstruct(p, &traj, s0, big_s0, None)
}

/// Profile through `(w0*, v0)` built from the critical orbit.
pub fn critical_profile<T: Real>(p: &ModelParams<T>, v0: T, s0: T, big_s0: T) -> Result<WaveProfile<T>> {
    let controls = Controls { v_max: T::lit(1e10), ..shooting::shooting_controls() };
    let (orbit, _) = shooting::critical_orbit(p, v0, s0, T::lit(TAIL_SPAN), &controls)?;
    reconstruct(p, &orbit, s0, big_s0, None)
}

/// Which component of the profile a measurement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Component {
    U,
    S,
}

fn log_values<T: Real>(profile: &WaveProfile<T>, c: Component) -> Vec<T> {
    profile
        .samples
        .iter()
        .map(|x| match c {
            Component::U => x.ln_u,
            Component::S => x.ln_s,
        })
        .collect()
}

/// Type read off the data alone: vanishing at finite ends, decay or growth
/// on infinite tails.
fn measured_type<T: Real>(profile: &WaveProfile<T>, c: Component) -> Option<ProfileType> {
    let f = log_values(profile, c);
    let n = f.len();
    let edge = (n / 100).max(1);
    let top = f.iter().copied().fold(T::neg_infinity(), T::max);
    let vanish_level = top + T::lit(VANISH_FRACTION).ln();
    let anchor = match c {
        Component::U => profile.anchors.u0.ln(),
        Component::S => profile.anchors.big_s0.ln(),
    };
    let grow_level = anchor + T::lit(GROWTH_FACTOR).ln();
    let head = f[..edge].iter().copied().fold(T::neg_infinity(), T::max);
    let tail = f[n - edge..].iter().copied().fold(T::neg_infinity(), T::max);
    let left_finite = profile.s_minus.is_finite();
    let right_finite = profile.s_plus.is_finite();
    let (first, last) = (f[0], f[n - 1]);
    match (left_finite, right_finite) {
        (true, true) if head < vanish_level && tail < vanish_level => Some(ProfileType::A1),
        (true, false) if head < vanish_level && last < vanish_level => Some(ProfileType::A2),
        (true, false) if head < vanish_level && last > grow_level => Some(ProfileType::A3),
        (false, true) if first > grow_level && tail < vanish_level => Some(ProfileType::A4),
        _ => None,
    }
}

/// Labels prescribed by the threshold comparison of `u0/S0` with `w0*`.
pub fn prescribed_types<T: Real>(p: &ModelParams<T>, w0: T, v0: T, w0_star: T) -> (ProfileType, ProfileType) {
    use ProfileType::*;
    let tie = (w0 - w0_star).abs() <= T::lit(shooting::AGREEMENT_RTOL) * w0_star;
    if v0 > p.v_star() {
        if tie {
            (A2, A2)
        } else if w0 > w0_star {
            (A1, A1)
        } else {
            let av = p.a() * p.v_star();
            if av < p.sigma() {
                (A2, A3)
            } else if av > p.sigma() {
                (A3, A3)
            } else {
                (Unclassified, Unclassified)
            }
        }
    } else if v0 < -p.v_star() {
        if w0 > w0_star && !tie {
            (A1, A1)
        } else {
            (A4, A4)
        }
    } else {
        (Unclassified, Unclassified)
    }
}

/// `(u_type, S_type)`: the prescribed label when the measured endpoint
/// behavior agrees with it, [`ProfileType::Unclassified`] otherwise.
pub fn classify_profile<T: Real>(profile: &WaveProfile<T>, p: &ModelParams<T>, w0_star: T) -> (ProfileType, ProfileType) {
    let (pu, ps) = prescribed_types(p, profile.anchors.w0, profile.anchors.v0, w0_star);
    let check = |want: ProfileType, c| {
        if measured_type(profile, c) == Some(want) {
            want
        } else {
            ProfileType::Unclassified
        }
    };
    (check(pu, Component::U), check(ps, Component::S))
}

/// Least-squares slope and intercept of `y` against `x`.
fn regression<T: Real>(pts: &[(T, T)]) -> (T, T) {
    let n = T::lit(pts.len() as f64);
    let (sx, sy) = pts.iter().fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts
        .iter()
        .fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Regression over the decade of distances closest to the end.
fn end_fit<T: Real>(samples: &[ProfileSample<T>], s_end: T) -> Result<(T, T)> {
    let d_min = samples
        .iter()
        .map(|x| (x.s - s_end).abs())
        .filter(|&d| d > T::zero())
        .fold(T::infinity(), T::min);
    let pts: Vec<(T, T)> = samples
        .iter()
        .filter(|x| {
            let d = (x.s - s_end).abs();
            d >= d_min && d <= T::lit(10.0) * d_min
        })
        .map(|x| ((x.s - s_end).abs().ln(), x.ln_u))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientResolution { found: pts.len(), needed: MIN_FIT_SAMPLES });
    }
    Ok(regression(&pts))
}

fn categorise<T: Real>(rho: T, left: bool) -> SlopeKind {
    let eps = T::lit(SLOPE_EPS);
    if rho < T::one() - eps {
        if left {
            SlopeKind::PlusInfinity
        } else {
            SlopeKind::MinusInfinity
        }
    } else if rho > T::one() + eps {
        SlopeKind::Zero
    } else if left {
        SlopeKind::FinitePositive
    } else {
        SlopeKind::FiniteNegative
    }
}

/// One-sided behavior of `u'` at both finite ends of a compactly supported
/// profile, from the log-log slope of `u` against the distance to the end.
pub fn endpoint_slopes<T: Real>(profile: &WaveProfile<T>, p: &ModelParams<T>) -> Result<EndpointSlopes<T>> {
    if p.limiter().is_saturated() {
        return Err(Error::RegimeViolation("endpoint slopes are defined for linear diffusion".into()));
    }
    if !(profile.s_minus.is_finite() && profile.s_plus.is_finite()) {
        return Err(Error::RegimeViolation("endpoint slopes need a compactly supported profile".into()));
    }
    let (rho_m, c_m) = end_fit(&profile.samples, profile.s_minus)?;
    let (rho_p, c_p) = end_fit(&profile.samples, profile.s_plus)?;
    let first = profile.samples[0];
    let last = *profile.samples.last().unwrap();
    let mu = p.limiter().mu;
    let closed = |x: &ProfileSample<T>| (p.a() * x.v - p.sigma()) * x.u / mu;
    let sign = |v: T| if v > T::zero() { 1 } else if v < T::zero() { -1 } else { 0 };
    Ok(EndpointSlopes {
        u_prime_at_s_minus: categorise(rho_m, true),
        u_prime_at_s_plus: categorise(rho_p, false),
        exponent_minus: rho_m,
        exponent_plus: rho_p,
        s_prime_sign_minus: sign(first.v),
        s_prime_sign_plus: sign(last.v),
        u_prime_closed_form_minus: closed(&first),
        u_prime_closed_form_plus: closed(&last),
        fit_prefactor_minus: c_m.exp(),
        fit_prefactor_plus: -c_p.exp(),
    })
}

/// Largest `|u S0^{a/μ} e^{σ(s - s0)/μ} / (u0 S^{a/μ}) - 1|` over the samples,
/// evaluated in log space. Linear diffusion only.
pub fn flux_relation_residual<T: Real>(profile: &WaveProfile<T>, p: &ModelParams<T>) -> T {
    let mu = p.limiter().mu;
    let an = &profile.anchors;
    let (ln_u0, ln_s0) = (an.u0.ln(), an.big_s0.ln());
    profile
        .samples
        .iter()
        .map(|x| {
            let r = x.ln_u - ln_u0 - p.a() / mu * (x.ln_s - ln_s0) + p.sigma() * (x.s - an.s0) / mu;
            r.exp_m1().abs()
        })
        .fold(T::zero(), T::max)
}

/// Samples closer than this to a finite end are skipped by
/// [`elliptic_residual`]: `S` vanishes linearly there and a difference
/// quotient cannot resolve `S''` in double precision.
pub const ELLIPTIC_END_GAP: f64 = 1e-5;

/// `γS''/S - λ + u/S` at one state, with `S''` from a centered difference
/// of `S` over `±h`. Both neighbours come from integrating the system from
/// `x`, so the value is in units of `S(s)`.
pub fn elliptic_residual_at<T: Real>(p: &ModelParams<T>, x: &Sample<T>, h: T) -> Result<T> {
    let controls = Controls { rtol: T::tol_floor(1e-13), atol: T::tol_floor(1e-15), ..profile_controls() };
    let x = Sample { i: T::zero(), ..*x };
    let fwd = integrate::flow(p, &x, h, &controls)?;
    let bwd = integrate::flow(p, &x, -h, &controls)?;
    let s2 = (fwd.i.exp_m1() + bwd.i.exp_m1()) / (h * h);
    Ok(p.gamma() * s2 - p.lambda() + x.w)
}

/// Largest `|γS'' - λS + u|` over the interior samples, relative to the
/// largest of `λS` and `u` over the profile.
pub fn elliptic_residual<T: Real>(p: &ModelParams<T>, profile: &WaveProfile<T>) -> Result<T> {
    let scale = profile.samples.iter().fold(T::zero(), |m, x| m.max(p.lambda() * x.big_s).max(x.u));
    let gap = T::lit(ELLIPTIC_END_GAP);
    let mut worst = T::zero();
    for x in &profile.samples {
        let d = (x.s - profile.s_minus).min(profile.s_plus - x.s);
        if d < gap {
            continue;
        }
        let h = T::lit(1e-3).min(T::lit(1e-3) * d);
        let state = Sample { s: x.s, w: x.w, v: x.v, i: T::zero(), ln_w: x.ln_u - x.ln_s };
        let r = elliptic_residual_at(p, &state, h)?;
        worst = worst.max(x.big_s * r.abs() / scale);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Above the parabola: `v` decreases from `(σ + c)/a` to `(σ - c)/a`.
    Above,
    /// Below the parabola: `v` increases from `(σ - c)/a` to `(σ + c)/a`.
    Below,
}

/// Checks made while building a saturated front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FrontDiagnostics<T> {
    /// `W` at `v(s₋)` and `v(s₊)`.
    pub w_ends: (T, T),
    /// One-sided `v'` at `s₋` and `s₊`.
    pub v_prime_ends: (T, T),
    /// `(δ, |w'|)` approaching each boundary, `δ = c - |av - σ|` decreasing.
    pub w_prime_minus: Vec<(T, T)>,
    pub w_prime_plus: Vec<(T, T)>,
    /// Sign of `(ln S)'' = v'` over the samples (`0` if it changes).
    pub log_curvature_sign: i8,
}

/// A flux-saturated front: `W(v)` over the whole slope domain from the
/// anchor `(w0, v0)`, `s` recovered by quadrature, then `(u, S)`.
pub fn saturated_front<T: Real>(
    p: &ModelParams<T>,
    v0: T,
    w0: T,
    branch: Branch,
    s0: T,
    big_s0: T,
    controls: &GraphControls<T>,
) -> Result<(WaveProfile<T>, FrontDiagnostics<T>)> {
    let lim = p.limiter();
    if !lim.is_saturated() {
        return Err(Error::RegimeViolation("saturated fronts need a saturated limiter".into()));
    }
    let dom = p.slope_domain();
    if !dom.contains(v0) {
        return Err(Error::Domain { y: (p.a() * v0 - p.sigma()).as_f64(), c: lim.c.as_f64() });
    }
    let vs = p.v_star();
    if branch == Branch::Below && !(dom.lo > -vs && dom.hi < vs) {
        return Err(Error::RegimeViolation(format!(
            "[{}, {}] is not inside (-v*, v*) = ({}, {})",
            dom.lo, dom.hi, -vs, vs
        )));
    }
    let graph = |target| {
        integrate::integrate_graph_w(p, v0, w0, target, controls).map_err(|e| match e {
            Error::DenominatorVanished { v, w } => {
                Error::RegimeViolation(format!("orbit meets the parabola at v = {v}, W = {w}"))
            }
            other => other,
        })
    };
    let up = graph(dom.hi)?;
    let down = graph(dom.lo)?;
    for (v, w) in up.samples().into_iter().chain(down.samples()).map(|[v, w]| (v, w)) {
        let ok = match branch {
            Branch::Above => w > p.lambda(),
            Branch::Below => w < p.parabola(v),
        };
        if !ok {
            return Err(Error::RegimeViolation(format!("W({v}) = {w} leaves the {branch:?} region")));
        }
    }
    let rec = |g: &integrate::GraphCurve<T>, target| integrate::reconstruct_s_from_v(p, g, v0, target, s0);
    let (ups, downs) = (rec(&up, dom.hi)?, rec(&down, dom.lo)?);
    // along the v path s runs backward for the branch heading to s₋
    let (to_minus, to_plus, w_minus, w_plus, c_minus, c_plus) = match branch {
        Branch::Above => (ups, downs, up.end_value(), down.end_value(), &up, &down),
        Branch::Below => (downs, ups, down.end_value(), up.end_value(), &down, &up),
    };
    let mut samples: Vec<Sample<T>> = to_minus.into_iter().rev().collect();
    samples.extend(to_plus.into_iter().skip(1));
    if !samples.windows(2).all(|w| w[0].s < w[1].s) {
        return Err(Error::RegimeViolation("s is not monotone along the front".into()));
    }
    let anchor = Sample { s: s0, w: w0, v: v0, i: T::zero(), ln_w: w0.ln() };
    let s_minus = samples[0].s;
    let s_plus = samples.last().unwrap().s;
    let mut profile = build(&samples, anchor, s_minus, s_plus, big_s0, w0 * big_s0);
    let label = match branch {
        Branch::Above => ProfileType::SaturatedFrontConcave,
        Branch::Below => ProfileType::SaturatedFrontConvex,
    };
    profile.u_type = label;
    profile.s_type = label;

    let first = profile.samples[0];
    let last = *profile.samples.last().unwrap();
    profile.continuation = Some(ContinuationCoefficients {
        left: Continuation::matching(s_minus, first.big_s, first.v * first.big_s, vs),
        right: Continuation::matching(s_plus, last.big_s, last.v * last.big_s, vs),
    });

    // |w'| = W |g(av - σ) - v| evaluated from the distance δ to the boundary
    let approach = |curve: &integrate::GraphCurve<T>| -> Vec<(T, T)> {
        let positive = curve.v_target == dom.hi;
        (0..=8)
            .map(|k| {
                let delta = lim.c * T::lit(1e-6 * 10f64.powi(-k));
                let v = if positive { dom.hi - delta / p.a() } else { dom.lo + delta / p.a() };
                let g = lim.g_at_distance(delta, positive);
                (delta, curve.eval(v) * (g - v).abs())
            })
            .collect()
    };
    let v_rates: Vec<T> = samples.iter().map(|x| p.v_rate(x.w, x.v)).collect();
    let sign = if v_rates.iter().all(|&r| r > T::zero()) {
        1
    } else if v_rates.iter().all(|&r| r < T::zero()) {
        -1
    } else {
        0
    };
    let diagnostics = FrontDiagnostics {
        w_ends: (w_minus, w_plus),
        v_prime_ends: (p.v_rate(w_minus, first.v), p.v_rate(w_plus, last.v)),
        w_prime_minus: approach(c_minus),
        w_prime_plus: approach(c_plus),
        log_curvature_sign: sign,
    };
    Ok((profile, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::FluxLimiter;
    use crate::integrate::integrate_from;

    fn lin(a: f64, sigma: f64) -> ModelParams<f64> {
        ModelParams::linear(a, sigma, 1.0, 1.0).unwrap()
    }

    #[test]
    fn near_axis_profile_is_exponential() {
        // tiny w next to (0, v*) keeps v ≈ v*, so S ≈ S0 e^{v*(s - s0)}
        let p = lin(0.5, 1.0);
        let c = Controls { s_max: 5.0, ..profile_controls() };
        let traj = integrate_from(&p, 0.0, 1e-12, 1.0, Direction::Forward, &c).unwrap();
        let prof = reconstruct(&p, &traj, 0.0, 2.0, None).unwrap();
        for x in &prof.samples {
            assert!((x.big_s - 2.0 * x.s.exp()).abs() <= 1e-9 * x.big_s);
            assert!(x.u / x.big_s < 1e-11);
        }
    }

    #[test]
    fn balanced_case_relation_is_exact() {
        let p = lin(1.0, 1.0);
        let prof = linear_profile(&p, 3.0, 2.0, 0.0, 1.5).unwrap();
        for x in &prof.samples {
            let expected = prof.anchors.u0 * (x.big_s / 1.5) * (-(x.s)).exp();
            assert!((x.u - expected).abs() <= 1e-8 * x.u.max(1e-300), "{} {}", x.u, expected);
        }
        assert!(flux_relation_residual(&prof, &p) < 1e-8);
    }

    #[test]
    fn anchor_mismatch_rejected() {
        let p = lin(0.5, 1.0);
        let traj = integrate_from(&p, 0.0, 2.0, 2.0, Direction::Both, &profile_controls()).unwrap();
        assert!(reconstruct(&p, &traj, 0.0, 1.0, Some(2.0)).is_ok());
        assert!(matches!(reconstruct(&p, &traj, 0.0, 1.0, Some(2.1)), Err(Error::AnchorMismatch { .. })));
    }

    #[test]
    fn interior_anchor_interpolates() {
        let p = lin(0.5, 1.0);
        let traj = integrate_from(&p, 0.0, 2.0, 2.0, Direction::Both, &profile_controls()).unwrap();
        let k = traj.start + 3;
        let (a, b) = (traj.samples[k], traj.samples[k + 1]);
        let mid = 0.5 * (a.s + b.s);
        let x = state_at(&p, &traj, mid).unwrap();
        let exact = integrate::flow(&p, &a, mid - a.s, &profile_controls()).unwrap();
        assert!((x.ln_w - exact.ln_w).abs() < 1e-7 && (x.v - exact.v).abs() < 1e-7);
    }

    #[test]
    fn soliton_vanishes_at_both_ends() {
        let p = lin(0.5, 1.0);
        let prof = linear_profile(&p, 50.0, 2.0, 0.0, 1.0).unwrap();
        assert!(prof.s_minus.is_finite() && prof.s_plus.is_finite());
        assert_eq!(measured_type(&prof, Component::U), Some(ProfileType::A1));
        assert_eq!(measured_type(&prof, Component::S), Some(ProfileType::A1));
        assert!(prof.samples.iter().all(|x| x.u > 0.0 && x.big_s > 0.0));
    }

    #[test]
    fn prescribed_labels() {
        use ProfileType::*;
        let p = lin(0.5, 1.0);
        assert_eq!(prescribed_types(&p, 2.0, 2.0, 1.0), (A1, A1));
        assert_eq!(prescribed_types(&p, 1.0, 2.0, 1.0), (A2, A2));
        assert_eq!(prescribed_types(&p, 0.5, 2.0, 1.0), (A2, A3));
        assert_eq!(prescribed_types(&lin(0.5, 0.3), 0.5, 2.0, 1.0), (A3, A3));
        assert_eq!(prescribed_types(&lin(0.5, 0.25), 0.5, -2.0, 1.0), (A4, A4));
        assert_eq!(prescribed_types(&lin(0.5, 0.25), 1.5, -2.0, 1.0), (A1, A1));
    }

    #[test]
    fn regression_recovers_power() {
        let pts: Vec<(f64, f64)> = (1..40).map(|k| k as f64 * 0.1).map(|x| (x, 1.7 * x - 0.3)).collect();
        let (m, c) = regression(&pts);
        assert!((m - 1.7).abs() < 1e-12 && (c + 0.3).abs() < 1e-12);
    }

    #[test]
    fn continuation_matches_value_and_slope() {
        let c: Continuation<f64> = Continuation::matching(1.0, 2.0, -3.0, 0.5);
        assert!((c.eval(1.0) - 2.0).abs() < 1e-15);
        let h = 1e-6;
        assert!(((c.eval(1.0 + h) - c.eval(1.0 - h)) / (2.0 * h) + 3.0).abs() < 1e-8);
        let flat = Continuation::matching(0.0, 1.0, 2.0, 0.0);
        assert_eq!(flat.eval(1.0), 3.0);
    }

    #[test]
    fn below_branch_precondition() {
        // interval [(σ - c)/a, (σ + c)/a] = [-0.5, 1.5] is not inside (-1, 1)
        let p = ModelParams::new(1.0, 0.5, 1.0, 1.0, FluxLimiter::relativistic(1.0, 1.0).unwrap()).unwrap();
        let r = saturated_front(&p, 0.5, 0.05, Branch::Below, 0.0, 1.0, &GraphControls::default());
        assert!(matches!(r, Err(Error::RegimeViolation(_))));
    }

    #[test]
    fn saturated_front_shape() {
        let p: ModelParams<f64> = ModelParams::new(1.0, 0.5, 1.0, 1.0, FluxLimiter::relativistic(1.0, 1.0).unwrap()).unwrap();
        let (prof, diag) = saturated_front(&p, 0.5, 5.0, Branch::Above, 0.0, 1.0, &GraphControls::default()).unwrap();
        assert!(prof.s_minus < prof.s_plus);
        assert!((prof.samples[0].v - 1.5).abs() < 1e-12);
        assert!((prof.samples.last().unwrap().v + 0.5).abs() < 1e-12);
        assert_eq!(diag.log_curvature_sign, -1);
        assert!(diag.v_prime_ends.0 < 0.0 && diag.v_prime_ends.1 < 0.0);
        assert!(diag.w_prime_minus.windows(2).all(|w| w[1].1 > w[0].1));
        assert_eq!(prof.u_type, ProfileType::SaturatedFrontConcave);
    }

    #[test]
    fn metadata_serialises() {
        let p = lin(0.5, 1.0);
        let prof = linear_profile(&p, 50.0, 2.0, 0.0, 1.0).unwrap();
        let text = serde_json::to_string(&prof.metadata()).unwrap();
        assert!(text.contains(r#""S_type":"Unclassified""#), "{text}");
    }
}
