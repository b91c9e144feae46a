//! Critical thresholds `w0*` separating escaping trajectories from those that
//! enter the parabola, by bisection on a trajectory predicate and by tracing
//! the invariant manifold of the relevant saddle.
//!
//! For `v0 > v⋆` the threshold is the height at `v = v0` of the stable
//! manifold of the saddle: `(w3, v3)` when `a < μ` and `σ < σ⋆`, `(0, -v⋆)`
//! otherwise. For `v0 < -v⋆` (only when `a < μ`, `σ < σ⋆`) it is the height of
//! the left branch of the unstable manifold of `(w3, v3)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{self, Controls, Direction, Sample, Stepper, TerminationEvent, Trajectory};
use crate::phase::{self, Equilibrium, EquilibriumRole, ModelParams, StabilityLabel};
use crate::scalar::Real;

/// Relative bracket width at which bisection stops.
pub const BISECTION_RTOL: f64 = 1e-10;
/// Maximum number of ×4 bracket expansions.
pub const MAX_EXPANSIONS: usize = 12;
/// Manifold and bisection estimates must agree to this relative tolerance.
pub const AGREEMENT_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum TrajectoryClass {
    /// `v → -∞` in finite `s`.
    EscapesBelow,
    /// `v → +∞` in finite backward time (the `v0 < -v⋆` regime).
    EscapesAbove,
    EntersParabola,
    /// Index into [`phase::equilibria`].
    ConvergesTo { index: usize },
    Bounded,
}

/// Side of the threshold a starting point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Large `w0`: the orbit passes the saddle and escapes.
    Above,
    /// Small `w0`: the orbit is captured.
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdMethod {
    ManifoldTrace,
    Bisection,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ThresholdResult<T> {
    pub v0: T,
    pub w0_star: T,
    pub method: ThresholdMethod,
    /// Final bisection bracket `(w_low, w_high)`.
    pub bracket: (T, T),
    /// Relative resolution of the classification around `w0_star`.
    pub classifier_tol: T,
    /// Height read off the manifold trace, when one was computed.
    pub manifold_w0: Option<T>,
}

/// Integrator settings used by the threshold machinery.
pub fn shooting_controls<T: Real>() -> Controls<T> {
    Controls { rtol: T::tol_floor(1e-12), atol: T::tol_floor(1e-14), ..Controls::default() }
}

/// Which of the two shooting regimes `v0` falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    /// `v0 > v⋆`, integrate forward.
    Forward,
    /// `v0 < -v⋆` with `a < μ`, `σ < σ⋆`, integrate backward.
    Backward,
}

fn regime<T: Real>(p: &ModelParams<T>, v0: T) -> Result<Regime> {
    if v0 > p.v_star() {
        Ok(Regime::Forward)
    } else if v0 < -p.v_star() {
        if p.a() < p.limiter().mu && p.sigma() < p.sigma_star() && !p.is_critical_speed() {
            Ok(Regime::Backward)
        } else {
            Err(Error::RegimeViolation(format!(
                "v0 = {v0} < -v* needs a < mu and sigma < sigma* (a = {}, sigma = {}, sigma* = {})",
                p.a(),
                p.sigma(),
                p.sigma_star()
            )))
        }
    } else {
        Err(Error::RegimeViolation(format!("v0 = {v0} must lie outside [-v*, v*] = ±{}", p.v_star())))
    }
}

fn interior_saddle<T: Real>(p: &ModelParams<T>) -> Option<Equilibrium<T>> {
    phase::equilibria(p)
        .into_iter()
        .find(|e| e.role == EquilibriumRole::Interior && e.label == StabilityLabel::Saddle)
}

/// The saddle whose manifold carries the threshold for `v0`.
pub fn threshold_saddle<T: Real>(p: &ModelParams<T>, v0: T) -> Result<Equilibrium<T>> {
    let reg = regime(p, v0)?;
    if p.is_critical_speed() {
        return Err(Error::DegenerateThreshold { sigma_star: p.sigma_star().as_f64() });
    }
    let saddle = match (reg, interior_saddle(p)) {
        (_, Some(e)) if p.a() < p.limiter().mu => Some(e),
        (Regime::Forward, _) => phase::equilibria(p)
            .into_iter()
            .find(|e| e.role == EquilibriumRole::Lower && e.label == StabilityLabel::Saddle),
        (Regime::Backward, _) => None,
    };
    saddle.ok_or_else(|| Error::RegimeViolation("no saddle carries the threshold for these parameters".into()))
}

/// Fast side predicate. Forward regime: entering the parabola means `Below`
/// (orbits above the stable manifold never do), reaching `v < -v⋆` means
/// `Above`. Backward regime: reaching `v > v3` backward means `Above`; entering
/// the parabola or collapsing towards the axis means `Below`. Settling onto a
/// stable interior equilibrium, which a node may do from above the parabola,
/// also means `Below`.
pub fn threshold_side<T: Real>(p: &ModelParams<T>, w0: T, v0: T, controls: &Controls<T>) -> Result<Side> {
    let reg = regime(p, v0)?;
    let forward = reg == Regime::Forward;
    let mut st = Stepper::new(p, T::zero(), w0, v0, forward, controls)?;
    let v3 = interior_saddle(p).map(|e| e.v);
    let sink = phase::equilibria(p)
        .into_iter()
        .find(|e| e.role == EquilibriumRole::Interior && matches!(e.label, StabilityLabel::StableNode | StabilityLabel::StableFocus));
    let w_floor = match interior_saddle(p) {
        Some(e) => T::lit(1e-6) * e.w.min(w0),
        None => T::lit(1e-6) * w0,
    };
    for _ in 0..controls.max_steps {
        let x = st.advance()?;
        if x.w < p.parabola(x.v) {
            return Ok(Side::Below);
        }
        if sink.as_ref().is_some_and(|e| e.distance(x.w, x.v) < T::lit(1e-6) * (e.w + e.v.abs())) {
            return Ok(Side::Below);
        }
        match reg {
            Regime::Forward if x.v < -p.v_star() => return Ok(Side::Above),
            Regime::Backward => {
                if v3.is_some_and(|v3| x.v > v3) {
                    return Ok(Side::Above);
                }
                if x.w < w_floor {
                    return Ok(Side::Below);
                }
            }
            _ => {}
        }
        if (x.s).abs() > controls.s_max {
            break;
        }
    }
    Err(Error::Inconclusive { w0: w0.as_f64(), v0: v0.as_f64() })
}

/// Maps the terminal event of a full integration to a class. Forward regime:
/// forward integration; `v0 < -v⋆` regime: backward integration.
pub fn classify_trajectory<T: Real>(p: &ModelParams<T>, w0: T, v0: T, controls: &Controls<T>) -> Result<TrajectoryClass> {
    let reg = regime(p, v0)?;
    let direction = if reg == Regime::Forward { Direction::Forward } else { Direction::Backward };
    // w → 0 is only a symptom of approaching an axis equilibrium here
    let controls = Controls { w_min: T::zero(), ..*controls };
    let traj = integrate::integrate(p, w0, v0, direction, &controls)?;
    let entered = traj.samples.iter().any(|x| x.w < p.parabola(x.v));
    let inconclusive = Error::Inconclusive { w0: w0.as_f64(), v0: v0.as_f64() };
    match traj.termination() {
        TerminationEvent::VBlowUpMinus => Ok(TrajectoryClass::EscapesBelow),
        TerminationEvent::VBlowUpPlus => Ok(TrajectoryClass::EscapesAbove),
        TerminationEvent::ConvergedToEquilibrium { index } => Ok(TrajectoryClass::ConvergesTo { index }),
        TerminationEvent::Bounded => Ok(TrajectoryClass::Bounded),
        TerminationEvent::MaxSpan => Err(inconclusive),
        _ if entered => Ok(TrajectoryClass::EntersParabola),
        _ => Err(inconclusive),
    }
}

/// Which invariant manifold of a saddle to trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ManifoldKind {
    /// Traced in reverse time.
    Stable,
    /// Traced in forward time.
    Unstable,
}

/// A manifold branch sampled from the seed next to the saddle to `v = v_stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ManifoldCurve<T> {
    pub kind: ManifoldKind,
    pub saddle: Equilibrium<T>,
    /// Signed seed offset along the eigenvector `(e_w, 1)`.
    pub offset: T,
    pub direction: [T; 2],
    /// In tracing order; `s` and `I` start at zero at the seed.
    pub samples: Vec<Sample<T>>,
    /// `w` at `v = v_stop`.
    pub height: T,
}

/// `1e-7 (1 + ‖saddle‖)`.
pub fn seed_offset<T: Real>(saddle: &Equilibrium<T>) -> T {
    T::lit(1e-7) * (T::one() + saddle.w.hypot(saddle.v))
}

fn trace_from<T: Real>(
    p: &ModelParams<T>,
    saddle: &Equilibrium<T>,
    dir: [T; 2],
    h: T,
    v_stop: T,
    kind: ManifoldKind,
    controls: &Controls<T>,
) -> Result<ManifoldCurve<T>> {
    let seed = [saddle.w + h * dir[0], saddle.v + h * dir[1]];
    if !(seed[0] > T::zero()) {
        return Err(Error::SeedEscaped);
    }
    let forward = kind == ManifoldKind::Unstable;
    let mut st = Stepper::new(p, T::zero(), seed[0], seed[1], forward, controls).map_err(|_| Error::SeedEscaped)?;
    let mut samples = vec![st.current()];
    let toward = (v_stop - saddle.v).signum();
    let first = st.advance().map_err(|_| Error::SeedEscaped)?;
    // the first step must move away from the saddle towards v_stop
    if (first.v - seed[1]) * toward <= T::zero() || first.w <= T::zero() {
        return Err(Error::SeedEscaped);
    }
    let mut x = first;
    for _ in 0..controls.max_steps {
        if (x.v - v_stop) * toward >= T::zero() {
            let hit = st.locate(|y| y.v - v_stop);
            samples.push(hit);
            return Ok(ManifoldCurve { kind, saddle: saddle.clone(), offset: h, direction: dir, samples, height: hit.w });
        }
        if x.v.abs() >= controls.v_max || x.s.abs() > controls.s_max {
            break;
        }
        samples.push(x);
        x = st.advance()?;
    }
    Err(Error::Inconclusive { w0: seed[0].as_f64(), v0: seed[1].as_f64() })
}

/// Traces one branch of a saddle's invariant manifold up to `v = v_stop`,
/// seeding at `saddle + h·e` and retrying with `-h` if the seed escapes.
pub fn trace_manifold<T: Real>(
    p: &ModelParams<T>,
    saddle: &Equilibrium<T>,
    v_stop: T,
    kind: ManifoldKind,
    controls: &Controls<T>,
) -> Result<ManifoldCurve<T>> {
    if saddle.label != StabilityLabel::Saddle {
        return Err(Error::RegimeViolation(format!("equilibrium at ({}, {}) is not a saddle", saddle.w, saddle.v)));
    }
    let dir = match kind {
        ManifoldKind::Stable => saddle.stable_direction(),
        ManifoldKind::Unstable => saddle.unstable_direction(),
    }
    .expect("saddles have real eigenvectors");
    let h = seed_offset(saddle) * (v_stop - saddle.v).signum();
    match trace_from(p, saddle, dir, h, v_stop, kind, controls) {
        Err(Error::SeedEscaped) => trace_from(p, saddle, dir, -h, v_stop, kind, controls),
        other => other,
    }
}

pub fn trace_stable_manifold<T: Real>(
    p: &ModelParams<T>,
    saddle: &Equilibrium<T>,
    v_stop: T,
    controls: &Controls<T>,
) -> Result<ManifoldCurve<T>> {
    trace_manifold(p, saddle, v_stop, ManifoldKind::Stable, controls)
}

/// Threshold height from the appropriate manifold branch.
pub fn manifold_threshold<T: Real>(p: &ModelParams<T>, v0: T, controls: &Controls<T>) -> Result<ManifoldCurve<T>> {
    let saddle = threshold_saddle(p, v0)?;
    let kind = match regime(p, v0)? {
        Regime::Forward => ManifoldKind::Stable,
        Regime::Backward => ManifoldKind::Unstable,
    };
    trace_manifold(p, &saddle, v0, kind, controls)
}

fn check_linear<T: Real>(p: &ModelParams<T>) -> Result<()> {
    if p.limiter().is_saturated() {
        return Err(Error::RegimeViolation("threshold search is only defined for linear diffusion".into()));
    }
    Ok(())
}

/// Bisection on [`threshold_side`], starting from `hint` (or a default
/// bracket) and expanding it ×4 up to [`MAX_EXPANSIONS`] times, cross-checked
/// against [`manifold_threshold`].
pub fn find_w0_star<T: Real>(
    p: &ModelParams<T>,
    v0: T,
    hint: Option<(T, T)>,
    controls: &Controls<T>,
) -> Result<ThresholdResult<T>> {
    check_linear(p)?;
    regime(p, v0)?;
    if p.is_critical_speed() {
        return Err(Error::DegenerateThreshold { sigma_star: p.sigma_star().as_f64() });
    }
    let scale = p.lambda() + p.gamma() * v0 * v0;
    let (mut lo, mut hi) = hint.unwrap_or((T::lit(0.1) * scale, T::lit(10.0) * scale));
    if !(lo > T::zero() && hi > lo) {
        return Err(Error::InvalidParams(format!("bracket must satisfy 0 < lo < hi, got ({lo}, {hi})")));
    }
    let side = |w: T| threshold_side(p, w, v0, controls);
    let mut expansions = 0;
    let four = T::lit(4.0);
    let mut side_lo = side(lo)?;
    let mut side_hi = side(hi)?;
    while side_lo != Side::Below || side_hi != Side::Above {
        if expansions == MAX_EXPANSIONS {
            return Err(Error::NoDichotomy { lo: lo.as_f64(), hi: hi.as_f64() });
        }
        expansions += 1;
        if side_lo != Side::Below {
            lo = lo / four;
            side_lo = side(lo)?;
        }
        if side_hi != Side::Above {
            hi = hi * four;
            side_hi = side(hi)?;
        }
    }
    let tol = T::tol_floor(BISECTION_RTOL);
    while hi - lo > tol * hi {
        let mid = if hi > lo * T::lit(2.0) { (lo * hi).sqrt() } else { (lo + hi) * T::lit(0.5) };
        if mid <= lo || mid >= hi {
            break;
        }
        match side(mid)? {
            Side::Below => lo = mid,
            Side::Above => hi = mid,
        }
    }
    let w_bisect = (lo + hi) * T::lit(0.5);
    let manifold = manifold_threshold(p, v0, controls).ok().map(|m| m.height);
    let agree = manifold.is_some_and(|m| (m - w_bisect).abs() <= T::lit(AGREEMENT_RTOL) * w_bisect);
    Ok(ThresholdResult {
        v0,
        w0_star: w_bisect,
        method: if agree { ThresholdMethod::Both } else { ThresholdMethod::Bisection },
        bracket: (lo, hi),
        classifier_tol: tol,
        manifold_w0: manifold,
    })
}

/// The orbit through `(w0*, v0)`: a regular backward integration, joined at
/// `s0` to the reversed manifold trace and continued towards the saddle by
/// the linearised solution up to `s0 + tail`.
pub fn critical_orbit<T: Real>(
    p: &ModelParams<T>,
    v0: T,
    s0: T,
    tail: T,
    controls: &Controls<T>,
) -> Result<(Trajectory<T>, ManifoldCurve<T>)> {
    check_linear(p)?;
    let curve = manifold_threshold(p, v0, controls)?;
    if curve.kind != ManifoldKind::Stable {
        return Err(Error::RegimeViolation("critical orbits are built for v0 > v* only".into()));
    }
    let w_star = curve.height;
    let back = integrate::integrate_from(p, s0, w_star, v0, Direction::Backward, controls)?;
    let end = *curve.samples.last().unwrap();
    // trace runs backward in s from the seed; shift so that v0 sits at s0
    let mut samples = back.samples.clone();
    for x in curve.samples.iter().rev().skip(1) {
        samples.push(Sample { s: x.s - end.s + s0, i: x.i - end.i, ..*x });
    }
    let seed = *samples.last().unwrap();
    let rate = if curve.saddle.eigenvalues[0].re < T::zero() {
        curve.saddle.eigenvalues[0].re
    } else {
        curve.saddle.eigenvalues[1].re
    };
    let (sad, h, e) = (&curve.saddle, curve.offset, curve.direction);
    let n = 600;
    let span = tail - (seed.s - s0);
    for k in 1..=n {
        let ds = span * T::lit(k as f64 / n as f64);
        let decay = (rate * ds).exp();
        let w = sad.w + h * e[0] * decay;
        let v = sad.v + h * e[1] * decay;
        let i = seed.i + sad.v * ds + h * e[1] * (decay - T::one()) / rate;
        samples.push(Sample { s: seed.s + ds, w, v, i, ln_w: w.ln() });
    }
    let index = phase::equilibria(p).iter().position(|e| e.role == sad.role && e.v == sad.v).unwrap_or(0);
    Ok((
        Trajectory {
            start: back.samples.len() - 1,
            samples,
            direction: Direction::Both,
            backward: back.backward,
            forward: Some(TerminationEvent::ConvergedToEquilibrium { index }),
            s_minus: back.s_minus,
            s_plus: T::infinity(),
        },
        curve,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::FluxLimiter;

    fn lin(a: f64, sigma: f64) -> ModelParams<f64> {
        ModelParams::linear(a, sigma, 1.0, 1.0).unwrap()
    }

    #[test]
    fn classify_examples() {
        let p = lin(0.5, 1.0);
        let c = shooting_controls();
        assert_eq!(classify_trajectory(&p, 1e3, 2.0, &c).unwrap(), TrajectoryClass::EscapesBelow);
        let eqs = phase::equilibria(&p);
        match classify_trajectory(&p, 1e-6, 2.0, &c).unwrap() {
            TrajectoryClass::ConvergesTo { index } => assert_eq!(eqs[index].role, EquilibriumRole::Upper),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn case_d_small_w_is_captured() {
        let p = lin(2.0, 0.5);
        let c = shooting_controls();
        let eqs = phase::equilibria(&p);
        match classify_trajectory(&p, 1e-3, 2.0, &c).unwrap() {
            TrajectoryClass::Bounded => {}
            TrajectoryClass::ConvergesTo { index } => assert_eq!(eqs[index].role, EquilibriumRole::Interior),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seed_is_tangent_to_eigenvector() {
        let p = lin(0.5, 1.0);
        let saddle = threshold_saddle(&p, 2.0).unwrap();
        assert_eq!(saddle.role, EquilibriumRole::Lower);
        let dir = saddle.stable_direction().unwrap();
        assert!((dir[0] - 2.5).abs() < 1e-14);
        let h = seed_offset(&saddle);
        let [dw, dv] = phase::rhs(&p, saddle.w + h * dir[0], saddle.v + h * dir[1]).unwrap();
        let angle = (dw * dir[1] - dv * dir[0]).abs() / (dw.hypot(dv) * dir[0].hypot(dir[1]));
        // the field is quadratic: F(x + he) = hκe + h²Q(e) with Q = ((a-1)e_w e_v, -e_v²)
        let kappa = saddle.eigenvalues.iter().map(|x| x.re).fold(f64::INFINITY, f64::min);
        let q = [(p.a() - 1.0) * dir[0] * dir[1], -dir[1] * dir[1]];
        let predicted = (q[0] * dir[1] - q[1] * dir[0]).abs() / (kappa.abs() * (dir[0] * dir[0] + dir[1] * dir[1]));
        // the cross product cancels to O(h²) of O(h) terms, so rounding costs ~1e-3 here
        assert!((angle / h - predicted).abs() <= 1e-2 * predicted, "{angle} {predicted}");
        // steeper than the parabola at -v*
        assert!(dir[0] > 2.0 * p.gamma() * p.v_star());
    }

    #[test]
    fn manifold_and_bisection_agree() {
        let p = lin(0.5, 1.0);
        let c = shooting_controls();
        let r = find_w0_star(&p, 2.0, None, &c).unwrap();
        assert_eq!(r.method, ThresholdMethod::Both, "{r:?}");
        assert!(r.w0_star > 0.0);
        let eps = 10.0 * r.classifier_tol;
        assert_eq!(threshold_side(&p, r.w0_star * (1.0 + eps), 2.0, &c).unwrap(), Side::Above);
        assert_eq!(threshold_side(&p, r.w0_star * (1.0 - eps), 2.0, &c).unwrap(), Side::Below);
    }

    #[test]
    fn threshold_grows_with_v0() {
        let p = lin(0.5, 1.0);
        let c = shooting_controls();
        let saddle = threshold_saddle(&p, 3.0).unwrap();
        let curve = trace_stable_manifold(&p, &saddle, 3.0, &c).unwrap();
        let at2 = curve.samples.windows(2).find(|w| w[0].v <= 2.0 && w[1].v > 2.0).unwrap();
        assert!(curve.height > at2[0].w);
        // the manifold graph W(v) increases along the trace
        assert!(curve.samples.windows(2).all(|w| w[1].w > w[0].w));
    }

    #[test]
    fn backward_regime_threshold() {
        let p = lin(0.5, 0.25);
        let c = shooting_controls();
        let r = find_w0_star(&p, -2.0, None, &c).unwrap();
        assert_eq!(r.method, ThresholdMethod::Both, "{r:?}");
        let eqs = phase::equilibria(&p);
        assert_eq!(classify_trajectory(&p, r.w0_star * 1.01, -2.0, &c).unwrap(), TrajectoryClass::EscapesAbove);
        match classify_trajectory(&p, r.w0_star * 0.99, -2.0, &c).unwrap() {
            TrajectoryClass::ConvergesTo { index } => assert_eq!(eqs[index].role, EquilibriumRole::Lower),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn regime_errors() {
        let c = shooting_controls();
        assert!(matches!(find_w0_star(&lin(0.5, 0.5), 2.0, None, &c), Err(Error::DegenerateThreshold { .. })));
        assert!(matches!(find_w0_star(&lin(0.5, 1.0), 0.5, None, &c), Err(Error::RegimeViolation(_))));
        assert!(matches!(find_w0_star(&lin(0.5, 1.0), -2.0, None, &c), Err(Error::RegimeViolation(_))));
        let rel = ModelParams::new(0.5, 1.0, 1.0, 1.0, FluxLimiter::relativistic(1.0, 3.0).unwrap()).unwrap();
        assert!(matches!(find_w0_star(&rel, 2.0, None, &c), Err(Error::RegimeViolation(_))));
    }

    #[test]
    fn bad_hint_expands() {
        let p = lin(2.0, 1.5);
        let c = shooting_controls();
        let r = find_w0_star(&p, 2.0, Some((1e3, 2e3)), &c).unwrap();
        assert!(r.w0_star < 1e3);
        assert!(matches!(find_w0_star(&p, 2.0, Some((1e12, 2e12)), &c), Err(Error::NoDichotomy { .. })));
    }

    #[test]
    fn critical_orbit_tends_to_saddle() {
        let p = lin(0.5, 1.0);
        let c = shooting_controls();
        let (orbit, curve) = critical_orbit(&p, 2.0, 0.0, 80.0, &c).unwrap();
        assert!(orbit.samples.windows(2).all(|w| w[0].s < w[1].s));
        let start = orbit.initial();
        assert_eq!((start.s, start.v, start.w), (0.0, 2.0, curve.height));
        let end = orbit.last();
        assert!(end.w < 1e-12 && (end.v + 1.0).abs() < 1e-9);
        assert!(orbit.s_minus.is_finite());
        // integral continuity across the joins
        for w in orbit.samples.windows(2) {
            let mid = 0.5 * (w[0].v + w[1].v) * (w[1].s - w[0].s);
            assert!((w[1].i - w[0].i - mid).abs() < 1e-3 * (w[1].s - w[0].s).max(1e-9) + 1e-6, "{:?} {:?}", w[0], w[1]);
        }
    }
}
