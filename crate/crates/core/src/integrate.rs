//! Adaptive integration of the `(w, v)` system in `s` with event detection,
//! and of the graph system `W(v)` used where the `s` parametrisation is
//! singular (blow-up and the flux boundary).
//!
//! Along trajectories the state is `(ln w, v, I)` with `I' = v`: integrating
//! `ln w` keeps `w` positive and resolves the exponential decay and growth
//! near the axis without loss of relative accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{self, Equilibrium, ModelParams};
use crate::quad;
use crate::rk::{Dopri, Tolerances};
use crate::scalar::{extended, Real};

pub const V_MAX: f64 = 1e6;
pub const W_MIN: f64 = 1e-12;
pub const EQ_TOL: f64 = 1e-9;
pub const DWELL: f64 = 5.0;
pub const BOUNDARY_EPS: f64 = 1e-9;
pub const DENOM_EPS: f64 = 1e-10;
pub const S_MAX: f64 = 1e3;

/// Tolerances and event thresholds for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct Controls<T> {
    pub rtol: T,
    pub atol: T,
    pub h_init: T,
    pub h_max: T,
    pub h_min: T,
    /// `|v| ≥ v_max` ends the run as a blow-up.
    pub v_max: T,
    /// `w < w_min` ends the run; zero disables the check.
    pub w_min: T,
    pub eq_tol: T,
    pub dwell: T,
    /// Relative to `c`.
    pub boundary_eps: T,
    pub s_max: T,
    pub stop_at_equilibrium: bool,
    pub max_steps: usize,
}

impl<T: Real> Default for Controls<T> {
    fn default() -> Self {
        Self {
            rtol: T::tol_floor(1e-10),
            atol: T::tol_floor(1e-12),
            h_init: T::lit(1e-2),
            h_max: T::lit(0.25),
            h_min: T::lit(1e-14),
            v_max: T::lit(V_MAX),
            w_min: T::lit(W_MIN),
            eq_tol: T::tol_floor(EQ_TOL),
            dwell: T::lit(DWELL),
            boundary_eps: T::tol_floor(BOUNDARY_EPS),
            s_max: T::lit(S_MAX),
            stop_at_equilibrium: true,
            max_steps: 5_000_000,
        }
    }
}

impl<T: Real> Controls<T> {
    pub fn with_rtol(mut self, rtol: T) -> Self {
        self.rtol = rtol;
        self
    }

    fn tolerances(&self) -> Tolerances<T, 3> {
        Tolerances {
            rtol: self.rtol,
            atol: [self.atol; 3],
            unit_floor: [true, false, false],
            h_max: self.h_max,
            h_min: self.h_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
    Both,
}

/// Why one leg of a trajectory stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum TerminationEvent {
    /// `v → +∞` at a finite `s` (reached going backward).
    VBlowUpPlus,
    /// `v → -∞` at a finite `s` (reached going forward).
    VBlowUpMinus,
    /// Index into [`phase::equilibria`].
    ConvergedToEquilibrium { index: usize },
    /// `av - σ → -c`.
    FluxBoundaryLow,
    /// `av - σ → c`.
    FluxBoundaryHigh,
    WVanished,
    MaxSpan,
    Bounded,
}

impl TerminationEvent {
    pub fn name(&self) -> &'static str {
        match self {
            Self::VBlowUpPlus => "VBlowUpPlus",
            Self::VBlowUpMinus => "VBlowUpMinus",
            Self::ConvergedToEquilibrium { .. } => "ConvergedToEquilibrium",
            Self::FluxBoundaryLow => "FluxBoundaryLow",
            Self::FluxBoundaryHigh => "FluxBoundaryHigh",
            Self::WVanished => "WVanished",
            Self::MaxSpan => "MaxSpan",
            Self::Bounded => "Bounded",
        }
    }

    /// True when the event happens at a finite `s`.
    pub fn is_finite_endpoint(&self) -> bool {
        matches!(self, Self::VBlowUpPlus | Self::VBlowUpMinus | Self::FluxBoundaryLow | Self::FluxBoundaryHigh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Sample<T> {
    pub s: T,
    pub w: T,
    pub v: T,
    /// `∫ v ds` from the start of the integration.
    pub i: T,
    pub ln_w: T,
}

impl<T: Real> Sample<T> {
    fn from_state(s: T, y: &[T; 3]) -> Self {
        Self { s, w: y[0].exp(), v: y[1], i: y[2], ln_w: y[0] }
    }
}

/// A sampled solution. Samples are sorted by increasing `s`. For one-sided
/// runs the unexplored end of `(s_minus, s_plus)` is the starting `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Trajectory<T> {
    pub samples: Vec<Sample<T>>,
    pub direction: Direction,
    pub backward: Option<TerminationEvent>,
    pub forward: Option<TerminationEvent>,
    #[serde(with = "extended")]
    pub s_minus: T,
    #[serde(with = "extended")]
    pub s_plus: T,
    /// Index of the starting sample.
    pub start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terminations {
    pub backward: Option<TerminationEvent>,
    pub forward: Option<TerminationEvent>,
}

/// JSON sidecar written next to a trajectory CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TrajectorySummary<T> {
    pub direction: Direction,
    pub termination: Terminations,
    #[serde(with = "extended")]
    pub s_minus: T,
    #[serde(with = "extended")]
    pub s_plus: T,
}

impl<T: Real> Trajectory<T> {
    /// The event of the explored side (forward when both were run).
    pub fn termination(&self) -> TerminationEvent {
        match self.direction {
            Direction::Backward => self.backward,
            _ => self.forward,
        }
        .expect("every run records its event")
    }

    pub fn initial(&self) -> &Sample<T> {
        &self.samples[self.start]
    }

    pub fn first(&self) -> &Sample<T> {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample<T> {
        self.samples.last().expect("trajectories are never empty")
    }

    pub fn summary(&self) -> TrajectorySummary<T> {
        TrajectorySummary {
            direction: self.direction,
            termination: Terminations { backward: self.backward, forward: self.forward },
            s_minus: self.s_minus,
            s_plus: self.s_plus,
        }
    }
}

fn field<T: Real>(p: &ModelParams<T>, y: &[T; 3]) -> Result<[T; 3]> {
    let w = y[0].exp();
    Ok([p.w_rate(y[1])?, p.v_rate(w, y[1]), y[1]])
}

fn check_start<T: Real>(p: &ModelParams<T>, w0: T, v0: T) -> Result<()> {
    if !(w0 > T::zero() && w0.is_finite()) {
        return Err(Error::InvalidParams(format!("initial w must be positive and finite, got {w0}")));
    }
    if !v0.is_finite() {
        return Err(Error::InvalidParams(format!("initial v must be finite, got {v0}")));
    }
    if !p.slope_domain().contains(v0) {
        return Err(Error::Domain { y: (p.a() * v0 - p.sigma()).as_f64(), c: p.limiter().c.as_f64() });
    }
    Ok(())
}

/// Driver around the Runge–Kutta engine for the `(ln w, v, I)` state,
/// exposing accepted steps so callers can watch their own predicates.
pub struct Stepper<'a, T: Real> {
    p: &'a ModelParams<T>,
    rk: Dopri<T, 3>,
}

impl<'a, T: Real> Stepper<'a, T> {
    pub fn new(p: &'a ModelParams<T>, s0: T, w0: T, v0: T, forward: bool, controls: &Controls<T>) -> Result<Self> {
        check_start(p, w0, v0)?;
        let h0 = if forward { controls.h_init } else { -controls.h_init };
        let rk = Dopri::new(&mut |_, y: &[T; 3]| field(p, y), s0, [w0.ln(), v0, T::zero()], h0, controls.tolerances())?;
        Ok(Self { p, rk })
    }

    pub fn current(&self) -> Sample<T> {
        Sample::from_state(self.rk.t, &self.rk.y)
    }

    pub fn previous(&self) -> Sample<T> {
        Sample::from_state(self.rk.prev_t, &self.rk.prev_y)
    }

    pub fn advance(&mut self) -> Result<Sample<T>> {
        let p = self.p;
        self.rk.step(&mut |_, y: &[T; 3]| field(p, y), None)?;
        Ok(self.current())
    }

    /// Point inside the last step where `event` vanishes; `event` must
    /// change sign between [`Self::previous`] and [`Self::current`].
    pub fn locate<G: FnMut(&Sample<T>) -> T>(&self, mut event: G) -> Sample<T> {
        let p = self.p;
        let (s, y) = self.rk.locate(&mut |_, y: &[T; 3]| field(p, y), |y| event(&Sample::from_state(T::zero(), y)));
        Sample::from_state(s, &y)
    }
}

struct Leg<T> {
    samples: Vec<Sample<T>>,
    event: TerminationEvent,
    end: T,
}

/// Compares the `(ln w, v)` bounding boxes of the last two quarters of the
/// span: a confined orbit does not leave the window it visited just before.
fn confined<T: Real>(samples: &[Sample<T>], s0: T, span: T) -> bool {
    let boxed = |from: T, to: T| {
        let mut b: Option<[T; 4]> = None;
        for x in samples.iter().filter(|x| (x.s - s0).abs() >= from && (x.s - s0).abs() <= to) {
            let e = b.get_or_insert([x.ln_w, x.ln_w, x.v, x.v]);
            *e = [e[0].min(x.ln_w), e[1].max(x.ln_w), e[2].min(x.v), e[3].max(x.v)];
        }
        b
    };
    let (Some(early), Some(late)) = (boxed(span * T::lit(0.5), span * T::lit(0.75)), boxed(span * T::lit(0.75), span))
    else {
        return false;
    };
    let pad_w = (early[1] - early[0]) * T::lit(0.1) + T::lit(1e-9) * (T::one() + early[1].abs());
    let pad_v = (early[3] - early[2]) * T::lit(0.1) + T::lit(1e-9) * (T::one() + early[3].abs());
    late[0] >= early[0] - pad_w && late[1] <= early[1] + pad_w && late[2] >= early[2] - pad_v && late[3] <= early[3] + pad_v
}

fn run_leg<T: Real>(
    p: &ModelParams<T>,
    eqs: &[Equilibrium<T>],
    s0: T,
    w0: T,
    v0: T,
    forward: bool,
    c: &Controls<T>,
) -> Result<Leg<T>> {
    let mut st = Stepper::new(p, s0, w0, v0, forward, c)?;
    let mut samples = vec![st.current()];
    let far = if forward { T::infinity() } else { T::neg_infinity() };
    let ln_w_min = if c.w_min > T::zero() { Some(c.w_min.ln()) } else { None };
    let saturated = p.limiter().is_saturated();
    let edge = p.limiter().c * (T::one() - c.boundary_eps);
    let mut dwell: Option<(usize, T)> = None;
    let finish = |mut samples: Vec<Sample<T>>, last: Sample<T>, event, end| {
        samples.push(last);
        Ok(Leg { samples, event, end })
    };

    for _ in 0..c.max_steps {
        let x = st.advance()?;
        if x.v.abs() >= c.v_max {
            let target = c.v_max.copysign(x.v);
            let hit = st.locate(|y| y.v - target);
            let event = if x.v > T::zero() { TerminationEvent::VBlowUpPlus } else { TerminationEvent::VBlowUpMinus };
            return finish(samples, hit, event, hit.s - hit.v.recip());
        }
        if saturated {
            let y = p.a() * x.v - p.sigma();
            if y.abs() >= edge {
                let high = y > T::zero();
                let hit = st.locate(|z| (p.a() * z.v - p.sigma()).abs() - edge);
                let event = if high { TerminationEvent::FluxBoundaryHigh } else { TerminationEvent::FluxBoundaryLow };
                return finish(samples, hit, event, hit.s);
            }
        }
        if c.stop_at_equilibrium {
            let near = eqs.iter().position(|e| e.distance(x.w, x.v) <= c.eq_tol * T::one().max(e.w.hypot(e.v)));
            dwell = match (near, dwell) {
                (Some(i), Some((j, since))) if i == j => {
                    if (x.s - since).abs() >= c.dwell {
                        return finish(samples, x, TerminationEvent::ConvergedToEquilibrium { index: i }, far);
                    }
                    Some((j, since))
                }
                (Some(i), _) => Some((i, x.s)),
                (None, _) => None,
            };
        }
        if let Some(lw) = ln_w_min {
            if x.ln_w < lw && dwell.is_none() {
                let hit = st.locate(|y| y.ln_w - lw);
                return finish(samples, hit, TerminationEvent::WVanished, far);
            }
        }
        samples.push(x);
        if (x.s - s0).abs() >= c.s_max {
            let event = if confined(&samples, s0, c.s_max) && x.v.abs() < c.v_max {
                TerminationEvent::Bounded
            } else {
                TerminationEvent::MaxSpan
            };
            return Ok(Leg { samples, event, end: far });
        }
    }
    Ok(Leg { samples, event: TerminationEvent::MaxSpan, end: far })
}

/// Integrates from `(w0, v0)` at `s = s0` until the first event in each
/// requested direction.
pub fn integrate_from<T: Real>(
    p: &ModelParams<T>,
    s0: T,
    w0: T,
    v0: T,
    direction: Direction,
    controls: &Controls<T>,
) -> Result<Trajectory<T>> {
    check_start(p, w0, v0)?;
    let eqs = phase::equilibria(p);
    let leg = |forward| run_leg(p, &eqs, s0, w0, v0, forward, controls);
    match direction {
        Direction::Forward => {
            let f = leg(true)?;
            Ok(Trajectory { samples: f.samples, direction, backward: None, forward: Some(f.event), s_minus: s0, s_plus: f.end, start: 0 })
        }
        Direction::Backward => {
            let mut b = leg(false)?;
            b.samples.reverse();
            let start = b.samples.len() - 1;
            Ok(Trajectory { samples: b.samples, direction, backward: Some(b.event), forward: None, s_minus: b.end, s_plus: s0, start })
        }
        Direction::Both => {
            let mut b = leg(false)?;
            let f = leg(true)?;
            b.samples.reverse();
            let start = b.samples.len() - 1;
            b.samples.extend_from_slice(&f.samples[1..]);
            Ok(Trajectory {
                samples: b.samples,
                direction,
                backward: Some(b.event),
                forward: Some(f.event),
                s_minus: b.end,
                s_plus: f.end,
                start,
            })
        }
    }
}

/// [`integrate_from`] with `s0 = 0`.
pub fn integrate<T: Real>(p: &ModelParams<T>, w0: T, v0: T, direction: Direction, controls: &Controls<T>) -> Result<Trajectory<T>> {
    integrate_from(p, T::zero(), w0, v0, direction, controls)
}

/// State reached by flowing exactly `ds` (either sign) from `x`, without
/// event checks. `I` keeps accumulating from `x.i`.
pub fn flow<T: Real>(p: &ModelParams<T>, x: &Sample<T>, ds: T, controls: &Controls<T>) -> Result<Sample<T>> {
    if ds == T::zero() {
        return Ok(*x);
    }
    let target = x.s + ds;
    let h0 = ds.abs().min(controls.h_init).copysign(ds);
    let mut f = |_, y: &[T; 3]| field(p, y);
    let mut rk = Dopri::new(&mut f, x.s, [x.ln_w, x.v, x.i], h0, controls.tolerances())?;
    while rk.t != target {
        rk.step(&mut f, Some(target))?;
    }
    Ok(Sample::from_state(rk.t, &rk.y))
}

/// Controls for [`integrate_graph_w`]. Steps are taken in a parameter
/// `τ ∈ [0, 1]` along the `v` path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct GraphControls<T> {
    pub rtol: T,
    pub atol: T,
    pub h_max: T,
    pub denom_eps: T,
}

impl<T: Real> Default for GraphControls<T> {
    fn default() -> Self {
        Self { rtol: T::tol_floor(1e-12), atol: T::tol_floor(1e-14), h_max: T::lit(1.0 / 64.0), denom_eps: T::lit(DENOM_EPS) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraphVariable {
    /// `W` itself.
    W,
    /// `Y = 1/W`, used above the parabola.
    Y,
}

/// `W(v)` sampled between an anchor and a target slope.
///
/// The path is `v(τ) = v_t - (v_t - v_a)(1 - τ)^q`. When the target is a flux
/// boundary `q = p/(p - 1)` for a limiter with `g ~ δ^{-1/p}`, which makes
/// `g(av - σ) dv/dτ` finite at `τ = 1`; otherwise `q = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GraphCurve<T> {
    pub v_anchor: T,
    pub v_target: T,
    pub q: T,
    pub boundary: bool,
    pub variable: GraphVariable,
    tau: Vec<T>,
    w: Vec<T>,
    /// `dW/dτ` at each node.
    dw: Vec<T>,
}

impl<T: Real> GraphCurve<T> {
    fn delta(&self) -> T {
        self.v_target - self.v_anchor
    }

    pub fn v_of(&self, tau: T) -> T {
        self.v_target - self.delta() * (T::one() - tau).powf(self.q)
    }

    fn dv_dtau(&self, tau: T) -> T {
        self.q * self.delta() * (T::one() - tau).powf(self.q - T::one())
    }

    pub fn tau_of(&self, v: T) -> T {
        let r = ((self.v_target - v) / self.delta()).max(T::zero()).min(T::one());
        T::one() - r.powf(self.q.recip())
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Nodes `(v, W)` from anchor to target.
    pub fn samples(&self) -> Vec<[T; 2]> {
        self.tau.iter().zip(&self.w).map(|(&t, &w)| [self.v_of(t), w]).collect()
    }

    fn segment(&self, tau: T) -> usize {
        let k = self.tau.partition_point(|&t| t <= tau);
        k.clamp(1, self.tau.len() - 1) - 1
    }

    /// Cubic Hermite interpolation in `τ`; returns `(W, dW/dτ)`.
    fn hermite(&self, tau: T) -> (T, T) {
        if self.tau.len() == 1 {
            return (self.w[0], self.dw[0]);
        }
        let k = self.segment(tau);
        let (t0, t1) = (self.tau[k], self.tau[k + 1]);
        let h = t1 - t0;
        let x = (tau - t0) / h;
        let (y0, y1, m0, m1) = (self.w[k], self.w[k + 1], self.dw[k] * h, self.dw[k + 1] * h);
        let (x2, x3) = (x * x, x * x * x);
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let val = (two * x3 - three * x2 + T::one()) * y0
            + (x3 - two * x2 + x) * m0
            + (three * x2 - two * x3) * y1
            + (x3 - x2) * m1;
        let six = T::lit(6.0);
        let four = T::lit(4.0);
        let der = ((six * x2 - six * x) * y0 + (three * x2 - four * x + T::one()) * m0 + (six * x - six * x2) * y1
            + (three * x2 - two * x) * m1)
            / h;
        (val, der)
    }

    /// `W(v)` for `v` between anchor and target.
    pub fn eval(&self, v: T) -> T {
        self.hermite(self.tau_of(v)).0
    }

    /// `dW/dv`; infinite at a flux-boundary target.
    pub fn slope(&self, v: T) -> T {
        let tau = self.tau_of(v);
        self.hermite(tau).1 / self.dv_dtau(tau)
    }

    pub fn end_value(&self) -> T {
        *self.w.last().expect("curve has nodes")
    }

    pub fn end_slope(&self) -> T {
        self.dw.last().copied().expect("curve has nodes") / self.dv_dtau(*self.tau.last().unwrap())
    }

    /// Range of `W` over the nodes.
    pub fn bounds(&self) -> (T, T) {
        self.w.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &w| (lo.min(w), hi.max(w)))
    }
}

/// Integrates `dW/dv = γW(g(av - σ) - v)/(λ - W - γv²)` from `W(v_anchor) =
/// W_anchor` to `v_target`, in `Y = 1/W` for saturated limiters with the
/// anchor above `λ`. A target within `1e-12` of a slope-domain end is
/// treated as the flux boundary itself.
pub fn integrate_graph_w<T: Real>(
    p: &ModelParams<T>,
    v_anchor: T,
    w_anchor: T,
    v_target: T,
    controls: &GraphControls<T>,
) -> Result<GraphCurve<T>> {
    if !(w_anchor > T::zero() && w_anchor.is_finite()) {
        return Err(Error::InvalidParams(format!("graph anchor must be positive, got {w_anchor}")));
    }
    let lim = p.limiter();
    let dom = p.slope_domain();
    if !dom.contains(v_anchor) {
        return Err(Error::Domain { y: (p.a() * v_anchor - p.sigma()).as_f64(), c: lim.c.as_f64() });
    }
    let snap = T::lit(1e-12);
    let mut v_target = v_target;
    let mut boundary = false;
    if lim.is_saturated() {
        for end in [dom.lo, dom.hi] {
            if (v_target - end).abs() <= snap * (T::one() + end.abs()) {
                v_target = end;
                boundary = true;
            }
        }
        if !boundary && !dom.contains(v_target) {
            return Err(Error::Domain { y: (p.a() * v_target - p.sigma()).as_f64(), c: lim.c.as_f64() });
        }
    }
    let variable = if lim.is_saturated() && w_anchor > p.lambda() { GraphVariable::Y } else { GraphVariable::W };
    let exponent = lim.singular_exponent().unwrap_or_else(|| T::lit(2.0));
    let q = if boundary { exponent / (exponent - T::one()) } else { T::one() };
    let mut curve =
        GraphCurve { v_anchor, v_target, q, boundary, variable, tau: Vec::new(), w: Vec::new(), dw: Vec::new() };
    if v_target == v_anchor {
        let dw = T::zero();
        curve.tau.push(T::zero());
        curve.w.push(w_anchor);
        curve.dw.push(dw);
        return Ok(curve);
    }

    let delta = v_target - v_anchor;
    let (a, sigma, gamma, lambda) = (p.a(), p.sigma(), p.gamma(), p.lambda());
    // dW/dτ as a function of (τ, W)
    let dw_dtau = |tau: T, w: T| -> Result<T> {
        let one_minus = T::one() - tau;
        let v = v_target - delta * one_minus.powf(q);
        let dv = q * delta * one_minus.powf(q - T::one());
        let g_dv = if boundary {
            let dist = a * delta.abs() * one_minus.powf(q);
            lim.g_regular_part(dist) * (a * delta.abs()).powf(-exponent.recip()) * q * delta.abs()
        } else {
            lim.g(a * v - sigma)? * dv
        };
        let den = lambda - w - gamma * v * v;
        if den.abs() < controls.denom_eps {
            return Err(Error::DenominatorVanished { v: v.as_f64(), w: w.as_f64() });
        }
        Ok(gamma * w * (g_dv - v * dv) / den)
    };
    let to_w = |x: T| match variable {
        GraphVariable::W => x,
        GraphVariable::Y => x.recip(),
    };
    let mut rhs = |tau: T, x: &[T; 1]| -> Result<[T; 1]> {
        let w = to_w(x[0]);
        let d = dw_dtau(tau, w)?;
        Ok([match variable {
            GraphVariable::W => d,
            GraphVariable::Y => -d * x[0] * x[0],
        }])
    };
    let tol = Tolerances { rtol: controls.rtol, atol: [controls.atol], unit_floor: [false], h_max: controls.h_max, h_min: T::lit(1e-15) };
    let x0 = match variable {
        GraphVariable::W => w_anchor,
        GraphVariable::Y => w_anchor.recip(),
    };
    let h0 = T::lit(1e-3).min(controls.h_max);
    let mut rk = Dopri::new(&mut rhs, T::zero(), [x0], h0, tol)?;
    let push = |curve: &mut GraphCurve<T>, tau: T, x: T| -> Result<()> {
        let w = to_w(x);
        curve.tau.push(tau);
        curve.w.push(w);
        curve.dw.push(dw_dtau(tau, w)?);
        Ok(())
    };
    push(&mut curve, T::zero(), x0)?;
    while rk.t < T::one() {
        rk.step(&mut rhs, Some(T::one()))?;
        let x = rk.y[0];
        if !(x > T::zero() && x.is_finite()) {
            return Err(Error::DenominatorVanished { v: curve.v_of(rk.t).as_f64(), w: to_w(x).as_f64() });
        }
        push(&mut curve, rk.t, x)?;
    }
    Ok(curve)
}

/// Anything that yields `W` as a function of `v`.
pub trait GraphFn<T> {
    fn w_at(&self, v: T) -> T;
}

impl<T: Real> GraphFn<T> for GraphCurve<T> {
    fn w_at(&self, v: T) -> T {
        self.eval(v)
    }
}

impl<T: Real, F: Fn(T) -> T> GraphFn<T> for F {
    fn w_at(&self, v: T) -> T {
        self(v)
    }
}

/// Fractions of the `v` path used as output nodes: uniform, plus geometric
/// clustering towards both ends.
fn path_fractions() -> Vec<f64> {
    let mut t: Vec<f64> = (0..=400).map(|k| k as f64 / 400.0).collect();
    for k in 3..=12 {
        let e = 10f64.powi(-k);
        t.push(e);
        t.push(1.0 - e);
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// Recovers `s` along a graph by `s(v) = s_start + ∫ dv / v'(v)` with
/// `γv' = λ - γv² - W(v)`, together with `I = ∫ v ds`. Samples follow the
/// path from `v_start` to `v_end`, so `s` decreases along them when `v'` and
/// `v_end - v_start` have opposite signs.
pub fn reconstruct_s_from_v<T: Real, G: GraphFn<T>>(
    p: &ModelParams<T>,
    graph: &G,
    v_start: T,
    v_end: T,
    s_start: T,
) -> Result<Vec<Sample<T>>> {
    let v_rate = |v: T| p.v_rate(graph.w_at(v), v);
    let reference = v_rate(v_start + (v_end - v_start) * T::lit(0.5));
    let positive = reference > T::zero();
    let checked = |v: T| -> Result<T> {
        let r = v_rate(v);
        if r == T::zero() || (r > T::zero()) != positive || !r.is_finite() {
            return Err(Error::SignChange { v: v.as_f64() });
        }
        Ok(r)
    };
    let nodes: Vec<T> = path_fractions().into_iter().map(|t| v_start + (v_end - v_start) * T::lit(t)).collect();
    for &v in &nodes[1..nodes.len() - 1] {
        checked(v)?;
    }
    let tol_abs = T::tol_floor(1e-14);
    let tol_rel = T::tol_floor(1e-12);
    let sample = |s: T, v: T, i: T| {
        let w = graph.w_at(v);
        Sample { s, w, v, i, ln_w: w.ln() }
    };
    let mut out = vec![sample(s_start, v_start, T::zero())];
    let (mut s, mut i) = (s_start, T::zero());
    for pair in nodes.windows(2) {
        s = s + quad::integrate(|v| checked(v).map(T::recip), pair[0], pair[1], tol_abs, tol_rel)?;
        i = i + quad::integrate(|v| checked(v).map(|r| v / r), pair[0], pair[1], tol_abs, tol_rel)?;
        out.push(sample(s, pair[1], i));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::FluxLimiter;
    use crate::phase::rhs;

    fn lin(a: f64, sigma: f64) -> ModelParams<f64> {
        ModelParams::linear(a, sigma, 1.0, 1.0).unwrap()
    }

    fn rel(a: f64, sigma: f64, lambda: f64) -> ModelParams<f64> {
        ModelParams::new(a, sigma, 1.0, lambda, FluxLimiter::relativistic(1.0, 1.0).unwrap()).unwrap()
    }

    fn at(traj: &Trajectory<f64>, s: f64) -> Sample<f64> {
        // linear interpolation between bracketing samples
        let k = traj.samples.partition_point(|x| x.s <= s).clamp(1, traj.samples.len() - 1);
        let (a, b) = (traj.samples[k - 1], traj.samples[k]);
        let t = (s - a.s) / (b.s - a.s);
        Sample { s, w: a.w + t * (b.w - a.w), v: a.v + t * (b.v - a.v), i: a.i + t * (b.i - a.i), ln_w: a.ln_w + t * (b.ln_w - a.ln_w) }
    }

    #[test]
    fn balanced_case_w_is_exponential() {
        let p = lin(1.0, 1.0);
        let c = Controls { h_max: 1.0 / 64.0, ..Controls::default() };
        let traj = integrate(&p, 1.0, 2.0, Direction::Forward, &c).unwrap();
        let x = traj.samples.iter().find(|x| (x.s - 1.0).abs() < 1e-2).unwrap();
        assert!((x.w - (-x.s).exp()).abs() <= 1e-8 * x.w);
        for x in &traj.samples {
            assert!((x.ln_w + x.s).abs() < 1e-9 * (1.0 + x.s.abs()));
        }
    }

    #[test]
    fn start_on_parabola_has_flat_v() {
        let p = lin(0.7, 0.3);
        let c = Controls::default();
        let traj = integrate(&p, p.parabola(0.4), 0.4, Direction::Forward, &c).unwrap();
        let f = rhs(&p, traj.samples[0].w, traj.samples[0].v).unwrap();
        assert!(f[1].abs() <= c.atol);
    }

    #[test]
    fn weak_chemotaxis_blows_up_backward() {
        let p = lin(0.5, 1.0);
        let run = |rtol| integrate(&p, 2.0, 2.0, Direction::Backward, &Controls::default().with_rtol(rtol)).unwrap();
        let fine = run(1e-10);
        let coarse = run(1e-8);
        assert_eq!(fine.termination(), TerminationEvent::VBlowUpPlus);
        assert!(fine.s_minus.is_finite() && fine.s_minus < 0.0);
        assert!(fine.first().w > 1e2);
        assert!((fine.s_minus - coarse.s_minus).abs() < 1e-5);
        // samples ascend in s and w stays positive
        assert!(fine.samples.windows(2).all(|p| p[0].s < p[1].s));
        assert!(fine.samples.iter().all(|x| x.w > 0.0));
    }

    #[test]
    fn blow_up_endpoint_refines_with_rtol() {
        let p = lin(0.5, 1.0);
        let run = |rtol| integrate(&p, 2.0, 2.0, Direction::Backward, &Controls::default().with_rtol(rtol)).unwrap().s_minus;
        let (a, b) = (run(2e-10), run(1e-10));
        assert!((a - b).abs() <= 10.0 * 2e-10 * a.abs(), "{a} {b}");
    }

    #[test]
    fn fast_wave_converges_to_upper_node() {
        let p = lin(0.5, 1.0);
        let traj = integrate(&p, 0.2, 0.5, Direction::Forward, &Controls::default()).unwrap();
        let eqs = phase::equilibria(&p);
        match traj.termination() {
            TerminationEvent::ConvergedToEquilibrium { index } => assert_eq!(eqs[index].role, phase::EquilibriumRole::Upper),
            e => panic!("{e:?}"),
        }
        assert_eq!(traj.s_plus, f64::INFINITY);
    }

    #[test]
    fn large_w_escapes_to_minus_infinity() {
        let p = lin(0.5, 1.0);
        let traj = integrate(&p, 50.0, 2.0, Direction::Forward, &Controls::default()).unwrap();
        assert_eq!(traj.termination(), TerminationEvent::VBlowUpMinus);
        assert!(traj.s_plus.is_finite() && traj.s_plus > 0.0);
        // v is decreasing while above the parabola
        for x in &traj.samples {
            if x.w > p.parabola(x.v) {
                assert!(p.v_rate(x.w, x.v) < 0.0);
            }
        }
    }

    #[test]
    fn integral_matches_quadrature_of_v() {
        let p = lin(1.0, 1.0);
        let c = Controls { h_max: 1.0 / 128.0, ..Controls::default() };
        let traj = integrate(&p, 0.5, 0.3, Direction::Forward, &c).unwrap();
        let mut acc = 0.0;
        for pair in traj.samples.windows(2).take(400) {
            let (a, b) = (pair[0], pair[1]);
            // Simpson on each step using the ODE for the midpoint-free cubic fit
            let (fa, fb) = (p.v_rate(a.w, a.v), p.v_rate(b.w, b.v));
            let h = b.s - a.s;
            acc += h * (a.v + b.v) / 2.0 + h * h * (fa - fb) / 12.0;
            assert!((acc - b.i).abs() < 1e-8, "{acc} {}", b.i);
        }
    }

    #[test]
    fn two_sided_merges_in_order() {
        let p = lin(0.5, 1.0);
        let traj = integrate_from(&p, 3.0, 2.0, 2.0, Direction::Both, &Controls::default()).unwrap();
        assert!(traj.samples.windows(2).all(|p| p[0].s < p[1].s));
        assert_eq!(traj.initial().s, 3.0);
        assert_eq!(traj.initial().i, 0.0);
        assert_eq!(traj.backward, Some(TerminationEvent::VBlowUpPlus));
        assert!(traj.s_minus < 3.0 && traj.s_plus > 3.0);
    }

    #[test]
    fn rejects_bad_start() {
        let p = lin(0.5, 1.0);
        let c = Controls::default();
        assert!(matches!(integrate(&p, 0.0, 1.0, Direction::Forward, &c), Err(Error::InvalidParams(_))));
        assert!(matches!(integrate(&rel(1.0, 0.5, 1.0), 1.0, 1.6, Direction::Forward, &c), Err(Error::Domain { .. })));
    }

    #[test]
    fn saturated_front_hits_flux_boundary() {
        let p = rel(1.0, 0.5, 1.0);
        let traj = integrate(&p, 5.0, 0.5, Direction::Both, &Controls::default()).unwrap();
        assert_eq!(traj.backward, Some(TerminationEvent::FluxBoundaryHigh));
        assert_eq!(traj.forward, Some(TerminationEvent::FluxBoundaryLow));
        assert!(traj.s_minus.is_finite() && traj.s_plus.is_finite());
        assert!((traj.first().v - 1.5).abs() < 1e-8);
        assert!((traj.last().v + 0.5).abs() < 1e-8);
    }

    #[test]
    fn summary_json() {
        let p = lin(0.5, 1.0);
        let traj = integrate(&p, 0.2, 0.5, Direction::Forward, &Controls::default()).unwrap();
        let text = serde_json::to_string(&traj.summary()).unwrap();
        assert!(text.contains(r#""s_plus":"+inf""#), "{text}");
        assert!(text.contains(r#""kind":"ConvergedToEquilibrium""#));
    }

    #[test]
    fn graph_constant_at_equilibrium() {
        let p = lin(2.0, 0.5);
        let g = integrate_graph_w(&p, 0.5, 0.75, 0.9, &GraphControls::default());
        // the equilibrium sits on the parabola, where the graph system is singular
        assert!(matches!(g, Err(Error::DenominatorVanished { .. })));
        // along v = v3 away from the parabola W'(v3) = 0 for any W
        let p = lin(2.0, 0.5);
        let g = integrate_graph_w(&p, 0.5, 3.0, 0.5, &GraphControls::default()).unwrap();
        assert_eq!(g.end_value(), 3.0);
    }

    #[test]
    fn graph_matches_trajectory() {
        let p = lin(0.5, 1.0);
        let traj = integrate(&p, 50.0, 2.0, Direction::Forward, &Controls::default()).unwrap();
        let g = integrate_graph_w(&p, 2.0, 50.0, -1.0, &GraphControls::default()).unwrap();
        for x in traj.samples.iter().filter(|x| x.v > -1.0) {
            assert!((g.eval(x.v) - x.w).abs() <= 1e-6 * x.w, "{} {}", g.eval(x.v), x.w);
        }
    }

    #[test]
    fn saturated_graph_reaches_both_boundaries() {
        let p = rel(1.0, 0.5, 1.0);
        let c = GraphControls::default();
        let up = integrate_graph_w(&p, 0.5, 5.0, 1.5, &c).unwrap();
        let down = integrate_graph_w(&p, 0.5, 5.0, -0.5, &c).unwrap();
        for g in [&up, &down] {
            assert!(g.boundary && g.variable == GraphVariable::Y);
            assert!(g.end_value() > 0.0 && g.end_value().is_finite());
            assert!(g.end_slope().is_infinite());
        }
        let half = GraphControls { h_max: c.h_max / 2.0, rtol: c.rtol / 32.0, ..c };
        let up2 = integrate_graph_w(&p, 0.5, 5.0, 1.5, &half).unwrap();
        assert!((up.end_value() - up2.end_value()).abs() <= 1e-6 * up.end_value());
        // cross-check against the s-integrator, which stops 1e-9·c short of the boundary
        let traj = integrate(&p, 5.0, 0.5, Direction::Both, &Controls::default()).unwrap();
        assert!((traj.first().w - up.end_value()).abs() < 1e-3 * up.end_value());
        for x in traj.samples.iter().step_by(7) {
            let g = if x.v > 0.5 { &up } else { &down };
            assert!((g.eval(x.v) - x.w).abs() <= 1e-6 * x.w, "v={} {} {}", x.v, g.eval(x.v), x.w);
        }
    }

    #[test]
    fn reconstruct_pure_riccati() {
        let p = lin(1.0, 1.0);
        let w_lambda = |_v: f64| 1.0;
        let out = reconstruct_s_from_v(&p, &w_lambda, 1.0, 2.0, 0.0).unwrap();
        let end = out.last().unwrap();
        assert!((end.s + 0.5).abs() < 1e-12, "{}", end.s);
        // I = ∫ v ds = ∫ dv / (-v) = -ln 2
        assert!((end.i + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn reconstruct_rejects_sign_change() {
        let p = lin(1.0, 1.0);
        let w = |_v: f64| 0.5;
        assert!(matches!(reconstruct_s_from_v(&p, &w, -1.0, 1.0, 0.0), Err(Error::SignChange { .. })));
    }

    #[test]
    fn reconstruct_matches_trajectory() {
        let p = rel(1.0, 0.5, 1.0);
        let g = integrate_graph_w(&p, 0.5, 5.0, -0.5, &GraphControls::default()).unwrap();
        // dense steps keep linear interpolation of the trajectory below 1e-6
        let c = Controls { h_max: 1e-3, ..Controls::default() };
        let traj = integrate(&p, 5.0, 0.5, Direction::Forward, &c).unwrap();
        let rec = reconstruct_s_from_v(&p, &g, 0.5, -0.5, 0.0).unwrap();
        let end = rec.last().unwrap();
        assert!((end.s - traj.s_plus).abs() < 1e-6, "{} {}", end.s, traj.s_plus);
        for x in rec.iter().step_by(17) {
            if x.s < traj.last().s {
                let y = at(&traj, x.s);
                assert!((y.v - x.v).abs() < 1e-5, "{} {} {}", x.s, y.v, x.v);
            }
        }
    }
}
