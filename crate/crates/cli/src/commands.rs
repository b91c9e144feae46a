use std::path::PathBuf;

use kstw::integrate::{self, Controls, Direction, GraphControls, TrajectorySummary};
use kstw::phase::{self, Equilibrium};
use kstw::profiles::{self, Branch, ProfileMetadata, ProfileType};
use kstw::shooting::{self, Side, ThresholdResult};
use kstw::{Error, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BranchName, ParamConfig};
use crate::output;
use crate::CliError;

pub struct Run {
    pub params: ParamConfig,
    pub out: PathBuf,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub seed: u64,
}

impl Run {
    fn controls(&self, base: Controls<f64>) -> Controls<f64> {
        Controls { rtol: self.rtol.unwrap_or(base.rtol), atol: self.atol.unwrap_or(base.atol), ..base }
    }

    fn graph_controls(&self) -> GraphControls<f64> {
        let base = GraphControls::default();
        GraphControls { rtol: self.rtol.unwrap_or(base.rtol), atol: self.atol.unwrap_or(base.atol), ..base }
    }

    fn check_tolerances(&self) -> Result<(), CliError> {
        for (name, x) in [("--rtol", self.rtol), ("--atol", self.atol)] {
            if let Some(x) = x {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(CliError::Config(format!("{name} must be positive, got {x}")));
                }
            }
        }
        Ok(())
    }
}

fn regime_label(p: &ModelParams<f64>) -> &'static str {
    p.regime().map_or("saturated", |r| r.label())
}

#[derive(Serialize)]
struct EquilibriaReport<'a> {
    params: &'a ModelParams<f64>,
    regime: &'static str,
    equilibria: Vec<Equilibrium<f64>>,
}

pub fn equilibria(run: &Run) -> Result<(), CliError> {
    let p = run.params.params()?;
    let report = EquilibriaReport { params: &p, regime: regime_label(&p), equilibria: phase::equilibria(&p) };
    output::ensure_dir(&run.out)?;
    output::write_json(&run.out.join("equilibria.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("equilibria serialise"));
    Ok(())
}

#[derive(Serialize)]
struct PortraitEntry {
    index: usize,
    w0: f64,
    v0: f64,
    file: String,
    /// Set when time integration failed and the orbit was drawn as a graph `W(v)`.
    graph_fallback: bool,
    summary: Option<TrajectorySummary<f64>>,
}

#[derive(Serialize)]
struct PortraitIndex<'a> {
    params: &'a ModelParams<f64>,
    regime: &'static str,
    sigma_star: f64,
    v_star: f64,
    seeds: Vec<PortraitEntry>,
}

enum Orbit {
    Time(integrate::Trajectory<f64>),
    Graph(Vec<[f64; 2]>),
}

fn portrait_orbit(p: &ModelParams<f64>, w0: f64, v0: f64, c: &Controls<f64>, gc: &GraphControls<f64>) -> Result<Orbit, CliError> {
    match integrate::integrate(p, w0, v0, Direction::Both, c) {
        Ok(t) => Ok(Orbit::Time(t)),
        Err(Error::StepSizeUnderflow { s, h }) if p.limiter().is_saturated() => {
            let dom = p.slope_domain();
            let fallback = || -> kstw::Result<Vec<[f64; 2]>> {
                let mut down = integrate::integrate_graph_w(p, v0, w0, dom.lo, gc)?.samples();
                let up = integrate::integrate_graph_w(p, v0, w0, dom.hi, gc)?.samples();
                down.reverse();
                down.extend(up.into_iter().skip(1));
                Ok(down)
            };
            fallback().map(Orbit::Graph).map_err(|e| {
                CliError::Numerical(format!("step size underflow at s = {s} (h = {h}) and the graph fallback failed: {e}"))
            })
        }
        Err(e) => Err(e.into()),
    }
}

pub fn portrait(run: &Run, v_grid: Option<Vec<f64>>, w_grid: Option<Vec<f64>>, span: Option<f64>) -> Result<(), CliError> {
    run.check_tolerances()?;
    let p = run.params.params()?;
    let v_grid = v_grid.unwrap_or_default();
    let w_grid = w_grid.unwrap_or_default();
    if v_grid.is_empty() || w_grid.is_empty() {
        return Err(CliError::Config("the portrait grid is empty".into()));
    }
    let dom = p.slope_domain();
    if let Some(&w) = w_grid.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
        return Err(CliError::Config(format!("w-grid values must be positive, got {w}")));
    }
    if let Some(&v) = v_grid.iter().find(|&&v| !dom.contains(v)) {
        return Err(CliError::Config(format!("v = {v} lies outside the slope domain ({}, {})", dom.lo, dom.hi)));
    }
    let span = span.unwrap_or(50.0);
    if !(span > 0.0) {
        return Err(CliError::Config(format!("--span must be positive, got {span}")));
    }
    let c = Controls { s_max: span, ..run.controls(Controls::default()) };
    let gc = run.graph_controls();
    let seeds: Vec<(f64, f64)> = v_grid.iter().flat_map(|&v| w_grid.iter().map(move |&w| (w, v))).collect();
    let orbits: Vec<Result<Orbit, CliError>> = seeds.par_iter().map(|&(w, v)| portrait_orbit(&p, w, v, &c, &gc)).collect();
    output::ensure_dir(&run.out)?;
    let mut entries = Vec::with_capacity(seeds.len());
    for (index, (&(w0, v0), orbit)) in seeds.iter().zip(orbits).enumerate() {
        let entry = match orbit? {
            Orbit::Time(t) => {
                let file = format!("trajectory_{index:03}.csv");
                output::write_trajectory(&run.out.join(&file), &t)?;
                output::write_json(&run.out.join(format!("trajectory_{index:03}.json")), &t.summary())?;
                PortraitEntry { index, w0, v0, file, graph_fallback: false, summary: Some(t.summary()) }
            }
            Orbit::Graph(pts) => {
                let file = format!("graph_{index:03}.csv");
                output::write_rows(&run.out.join(&file), ["v", "W"], pts)?;
                PortraitEntry { index, w0, v0, file, graph_fallback: true, summary: None }
            }
        };
        entries.push(entry);
    }
    let index = PortraitIndex { params: &p, regime: regime_label(&p), sigma_star: p.sigma_star(), v_star: p.v_star(), seeds: entries };
    output::write_json(&run.out.join("index.json"), &index)?;
    println!("{} trajectories written to {}", index.seeds.len(), run.out.display());
    Ok(())
}

#[derive(Serialize)]
struct ShootReport<'a> {
    params: &'a ModelParams<f64>,
    #[serde(flatten)]
    result: ThresholdResult<f64>,
}

fn threshold_params(run: &Run) -> Result<ModelParams<f64>, CliError> {
    let p = run.params.params()?;
    if p.limiter().is_saturated() {
        return Err(CliError::Config("thresholds are computed for the linear limiter".into()));
    }
    if p.is_critical_speed() {
        return Err(CliError::Config(format!("sigma = {} equals sigma* = {}: no threshold", p.sigma(), p.sigma_star())));
    }
    Ok(p)
}

pub fn shoot(run: &Run, v0: Option<f64>, bracket: Option<(f64, f64)>) -> Result<(), CliError> {
    run.check_tolerances()?;
    let p = threshold_params(run)?;
    let v0 = v0.ok_or_else(|| CliError::Config("missing --v0".into()))?;
    if let Some((lo, hi)) = bracket {
        if !(lo > 0.0 && hi > lo) {
            return Err(CliError::Config(format!("--bracket needs 0 < lo < hi, got {lo},{hi}")));
        }
    }
    let result = shooting::find_w0_star(&p, v0, bracket, &run.controls(shooting::shooting_controls()))?;
    let report = ShootReport { params: &p, result };
    output::ensure_dir(&run.out)?;
    output::write_json(&run.out.join("shoot.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("threshold serialises"));
    Ok(())
}

pub struct ProfileRequest {
    pub w0: Option<f64>,
    pub v0: Option<f64>,
    pub s0: f64,
    pub big_s0: f64,
    pub branch: Option<BranchName>,
    pub critical: bool,
}

#[derive(Serialize)]
struct ProfileReport<'a> {
    params: &'a ModelParams<f64>,
    w0_star: Option<f64>,
    #[serde(flatten)]
    metadata: ProfileMetadata<f64>,
}

/// `w0*` when `v0` lies in a shooting regime, `None` otherwise.
fn threshold_if_defined(run: &Run, p: &ModelParams<f64>, v0: f64) -> Result<Option<f64>, CliError> {
    match shooting::find_w0_star(p, v0, None, &run.controls(shooting::shooting_controls())) {
        Ok(t) => Ok(Some(t.w0_star)),
        Err(Error::RegimeViolation(_) | Error::DegenerateThreshold { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn profile(run: &Run, req: ProfileRequest) -> Result<(), CliError> {
    run.check_tolerances()?;
    let p = run.params.params()?;
    let v0 = req.v0.ok_or_else(|| CliError::Config("missing --v0".into()))?;
    if !(req.big_s0 > 0.0 && req.big_s0.is_finite()) {
        return Err(CliError::Config(format!("--S0 must be positive, got {}", req.big_s0)));
    }
    let (prof, w0_star) = if p.limiter().is_saturated() {
        let w0 = req.w0.ok_or_else(|| CliError::Config("missing --w0".into()))?;
        let branch = match req.branch.ok_or_else(|| CliError::Config("saturated profiles need --branch".into()))? {
            BranchName::Above => Branch::Above,
            BranchName::Below => Branch::Below,
        };
        let (prof, _) = profiles::saturated_front(&p, v0, w0, branch, req.s0, req.big_s0, &run.graph_controls())?;
        (prof, None)
    } else {
        let w0_star = threshold_if_defined(run, &p, v0)?;
        let mut prof = if req.critical {
            if w0_star.is_none() {
                return Err(CliError::Config(format!("no threshold w0* at v0 = {v0}")));
            }
            profiles::critical_profile(&p, v0, req.s0, req.big_s0)?
        } else {
            let w0 = req.w0.ok_or_else(|| CliError::Config("missing --w0".into()))?;
            let c = run.controls(profiles::profile_controls());
            let traj = integrate::integrate_from(&p, req.s0, w0, v0, Direction::Both, &c)?;
            profiles::reconstruct(&p, &traj, req.s0, req.big_s0, None)?
        };
        if let Some(star) = w0_star {
            (prof.u_type, prof.s_type) = profiles::classify_profile(&prof, &p, star);
        }
        if prof.s_minus.is_finite() && prof.s_plus.is_finite() {
            match profiles::endpoint_slopes(&prof, &p) {
                Ok(sl) => prof.endpoint_slopes = Some(sl),
                Err(e) => eprintln!("kstw: endpoint slopes unavailable: {e}"),
            }
        }
        (prof, w0_star)
    };
    output::ensure_dir(&run.out)?;
    output::write_profile(&run.out.join("profile.csv"), &prof)?;
    let report = ProfileReport { params: &p, w0_star, metadata: prof.metadata() };
    output::write_json(&run.out.join("profile.json"), &report)?;
    println!(
        "{} samples on [{}, {}], u: {:?}, S: {:?}",
        prof.samples.len(),
        prof.s_minus,
        prof.s_plus,
        prof.u_type,
        prof.s_type
    );
    Ok(())
}

struct SweepRow {
    a: f64,
    sigma: f64,
    sigma_star: f64,
    regime: &'static str,
    w0_star: Option<f64>,
    above: Option<(ProfileType, ProfileType)>,
    below: Option<(ProfileType, ProfileType)>,
    sampled: usize,
    agreed: usize,
}

fn sweep_point(run: &Run, p: &ModelParams<f64>, v0: f64, samples: usize, stream: u64) -> Result<SweepRow, CliError> {
    let mut row = SweepRow {
        a: p.a(),
        sigma: p.sigma(),
        sigma_star: p.sigma_star(),
        regime: regime_label(p),
        w0_star: None,
        above: None,
        below: None,
        sampled: 0,
        agreed: 0,
    };
    if p.is_critical_speed() {
        return Ok(row);
    }
    let Some(star) = threshold_if_defined(run, p, v0)? else {
        return Ok(row);
    };
    row.w0_star = Some(star);
    let types = |factor: f64| -> Result<(ProfileType, ProfileType), CliError> {
        let prof = profiles::linear_profile(p, factor * star, v0, 0.0, 1.0)?;
        Ok(profiles::classify_profile(&prof, p, star))
    };
    row.above = Some(types(2.0)?);
    row.below = Some(types(0.5)?);
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    rng.set_stream(stream);
    let c = run.controls(shooting::shooting_controls());
    for _ in 0..samples {
        let w0 = star * 10f64.powf(rng.gen_range(-1.0..1.0));
        let want = if w0 > star { Side::Above } else { Side::Below };
        row.sampled += 1;
        if shooting::threshold_side(p, w0, v0, &c)? == want {
            row.agreed += 1;
        }
    }
    Ok(row)
}

pub fn sweep(run: &Run, a_values: Vec<f64>, sigma_factors: Vec<f64>, v0_factor: f64, samples: usize) -> Result<(), CliError> {
    run.check_tolerances()?;
    if a_values.is_empty() || sigma_factors.is_empty() {
        return Err(CliError::Config("the sweep grid is empty".into()));
    }
    if run.params.limiter()?.is_saturated() {
        return Err(CliError::Config("sweeps are defined for the linear limiter".into()));
    }
    let mut points = Vec::new();
    for &a in &a_values {
        // σ* and v* do not depend on σ; any positive speed builds them
        let base = run.params.params_with(a, 1.0)?;
        let reference = if base.sigma_star() > 0.0 { base.sigma_star() } else { base.v_star() };
        for &f in &sigma_factors {
            points.push(base.with_sigma(f * reference)?);
        }
    }
    let rows: Vec<Result<SweepRow, CliError>> = points
        .par_iter()
        .enumerate()
        .map(|(k, p)| sweep_point(run, p, v0_factor * p.v_star(), samples, k as u64))
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let opt = |x: Option<f64>| x.map(output::fmt_f64).unwrap_or_default();
    let types = |t: Option<(ProfileType, ProfileType)>, u: bool| {
        t.map(|(a, b)| format!("{:?}", if u { a } else { b })).unwrap_or_default()
    };
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                output::fmt_f64(r.a),
                output::fmt_f64(r.sigma),
                output::fmt_f64(r.sigma_star),
                r.regime.to_string(),
                opt(r.w0_star),
                types(r.above, true),
                types(r.above, false),
                types(r.below, true),
                types(r.below, false),
                r.sampled.to_string(),
                r.agreed.to_string(),
            ]
        })
        .collect();
    let header = ["a", "sigma", "sigma_star", "regime", "w0_star", "u_above", "S_above", "u_below", "S_below", "sampled", "agreed"];
    output::ensure_dir(&run.out)?;
    output::write_table(&run.out.join("sweep.csv"), &header, &table)?;
    println!("{}", header.join(","));
    for row in &table {
        println!("{}", row.join(","));
    }
    Ok(())
}
