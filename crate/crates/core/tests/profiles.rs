use kstw::integrate::{integrate_from, Controls, Direction};
use kstw::profiles::{self, ProfileType};
use kstw::shooting;
use kstw::{Error, ModelParams64};

fn lin(a: f64, sigma: f64) -> ModelParams64 {
    ModelParams64::linear(a, sigma, 1.0, 1.0).unwrap()
}

fn w0_star(p: &ModelParams64, v0: f64) -> f64 {
    shooting::find_w0_star(p, v0, None, &shooting::shooting_controls()).unwrap().w0_star
}

#[test]
fn u_and_s_vanish_at_a_finite_end() {
    let p = lin(0.5, 1.0);
    let prof = profiles::linear_profile(&p, 3.0 * w0_star(&p, 2.0), 2.0, 0.0, 1.0).unwrap();
    let (first, last) = (prof.samples[0], *prof.samples.last().unwrap());
    let (mu, ms) = (prof.max_u(), prof.max_s());
    assert!(first.u < 1e-3 * mu && first.big_s < 1e-6 * ms);
    assert!(last.u < 1e-3 * mu && last.big_s < 1e-6 * ms);
}

#[test]
fn positive_on_the_open_support() {
    let p = lin(2.0, 0.5);
    for factor in [0.5, 2.0] {
        let prof = profiles::linear_profile(&p, factor * w0_star(&p, 1.5), 1.5, 0.0, 3.0).unwrap();
        assert!(prof.samples.iter().all(|x| x.u > 0.0 && x.big_s > 0.0));
        for x in &prof.samples {
            assert!((x.u - x.w * x.big_s).abs() <= 1e-12 * x.u);
        }
    }
}

#[test]
fn edge_values_shrink_under_refinement() {
    // vanishing at the ends is measured on the extreme samples; pushing the
    // blow-up cutoff further out must lower them
    let p = lin(1.0, 1.5);
    let w0 = 10.0 * w0_star(&p, 2.0);
    let edge = |v_max: f64| {
        let c = Controls { v_max, ..profiles::profile_controls() };
        let traj = integrate_from(&p, 0.0, w0, 2.0, Direction::Both, &c).unwrap();
        let prof = profiles::reconstruct(&p, &traj, 0.0, 1.0, None).unwrap();
        let top = prof.max_u().max(prof.max_s());
        prof.samples[0].u.max(prof.samples[0].big_s) / top
    };
    let (coarse, fine) = (edge(1e6), edge(1e10));
    assert!(fine < coarse && fine < 1e-3, "{coarse} {fine}");
}

#[test]
fn fast_wave_labels() {
    let p = lin(0.5, 1.0);
    let star = w0_star(&p, 2.0);
    let above = profiles::linear_profile(&p, 1.5 * star, 2.0, 0.0, 1.0).unwrap();
    assert_eq!(profiles::classify_profile(&above, &p, star), (ProfileType::A1, ProfileType::A1));
    let below = profiles::linear_profile(&p, 0.5 * star, 2.0, 0.0, 1.0).unwrap();
    assert_eq!(profiles::classify_profile(&below, &p, star), (ProfileType::A2, ProfileType::A3));
}

#[test]
fn wrong_threshold_is_flagged() {
    // a profile that escapes, judged against a threshold above it, is
    // prescribed A2/A3 but has two finite ends
    let p = lin(0.5, 1.0);
    let star = w0_star(&p, 2.0);
    let prof = profiles::linear_profile(&p, 2.0 * star, 2.0, 0.0, 1.0).unwrap();
    let got = profiles::classify_profile(&prof, &p, 4.0 * star);
    assert_eq!(got, (ProfileType::Unclassified, ProfileType::Unclassified));
}

#[test]
fn slopes_need_compact_support() {
    let p = lin(0.5, 1.0);
    let prof = profiles::linear_profile(&p, 0.5 * w0_star(&p, 2.0), 2.0, 0.0, 1.0).unwrap();
    assert!(matches!(profiles::endpoint_slopes(&prof, &p), Err(Error::RegimeViolation(_))));
}

#[test]
fn coarse_sampling_is_insufficient_for_slopes() {
    let p = lin(0.5, 1.5);
    let w0 = 10.0 * w0_star(&p, 2.0);
    let c = Controls { rtol: 1e-4, atol: 1e-6, v_max: 1e3, ..profiles::profile_controls() };
    let traj = integrate_from(&p, 0.0, w0, 2.0, Direction::Both, &c).unwrap();
    let prof = profiles::reconstruct(&p, &traj, 0.0, 1.0, None).unwrap();
    assert!(matches!(profiles::endpoint_slopes(&prof, &p), Err(Error::InsufficientResolution { needed: 20, .. })));
}

#[test]
fn single_precision_profile() {
    let p = kstw::ModelParams32::linear(1.0, 1.0, 1.0, 1.0).unwrap();
    let c = Controls { rtol: 1e-5, atol: 1e-6, v_max: 1e3, ..profiles::profile_controls() };
    let traj = integrate_from(&p, 0.0f32, 30.0, 2.0, Direction::Both, &c).unwrap();
    let prof = profiles::reconstruct(&p, &traj, 0.0, 1.0, None).unwrap();
    assert!(prof.s_minus.is_finite() && prof.s_plus.is_finite());
    assert!(profiles::flux_relation_residual(&prof, &p) < 1e-3);
}

#[test]
fn metadata_round_trips_through_json() {
    let p = lin(0.5, 1.0);
    let prof = profiles::linear_profile(&p, 0.5 * w0_star(&p, 2.0), 2.0, 0.0, 1.0).unwrap();
    let meta = prof.metadata();
    let text = serde_json::to_string(&meta).unwrap();
    assert!(text.contains(r#""s_plus":"+inf""#), "{text}");
    let back: profiles::ProfileMetadata<f64> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, meta);
}
