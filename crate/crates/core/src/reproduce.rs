//! The battery of reproducible numbers: every reference constant and
//! property suite as a named check with expected value, observation and
//! tolerance.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::hypotheses::{awareness_operator, ExperienceFamily, ExperienceSpec};
use crate::manyworlds::{reconstruct_measures, sample_decomposition_with, ReplicatedFunctional, SpectralExperience};
use crate::measure::{
    all_typicalities, build_profile_from_ops, ks_statistic_uniform, sample_points, typicality_at_density, Axis,
    PerceptionSpace,
};
use crate::operator::{bloch_projector, Operator, State, C64, DEFAULT_TOL};
use crate::quad::integrate;
use crate::sqmn::{
    averaged_posterior, confidence_bound, digit_experiment_approx, digit_experiment_canonical, dual_normalization,
    dual_posterior_mean_std, gaussian_99_band, posterior_mean_std, posterior_moment, posterior_moment_quadrature,
};
use crate::toy::{
    circle_model, epr_cat_model, linear_positivity_fraction, sphere_model, sphere_typicality_monte_carlo,
    triangle_equivalence, two_step_analysis, Direction, TriangleCheck, MAX_CAT_PARTS,
};

/// Default seed for the Monte Carlo checks.
pub const DEFAULT_SEED: u64 = 42;

pub const GROUPS: [&str; 10] =
    ["circle", "linpos", "dual-norm", "moments", "averaged", "band", "digits", "epr", "sphere", "properties"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Comparison {
    /// `|observed − expected| ≤ tolerance`.
    Within,
    /// `observed ≤ expected`.
    AtMost,
    /// `observed ≥ expected`.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Check {
    pub name: String,
    pub group: &'static str,
    pub criterion: u8,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

fn within(group: &'static str, criterion: u8, name: &str, expected: f64, observed: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        group,
        criterion,
        expected,
        observed,
        tolerance,
        comparison: Comparison::Within,
        pass: (observed - expected).abs() <= tolerance,
    }
}

fn at_most(group: &'static str, criterion: u8, name: &str, bound: f64, observed: f64) -> Check {
    Check {
        name: name.into(),
        group,
        criterion,
        expected: bound,
        observed,
        tolerance: 0.0,
        comparison: Comparison::AtMost,
        pass: observed <= bound,
    }
}

fn at_least(group: &'static str, criterion: u8, name: &str, bound: f64, observed: f64) -> Check {
    Check {
        name: name.into(),
        group,
        criterion,
        expected: bound,
        observed,
        tolerance: 0.0,
        comparison: Comparison::AtLeast,
        pass: observed >= bound,
    }
}

pub fn circle_checks() -> Result<Vec<Check>> {
    const G: &str = "circle";
    let c = circle_model(PI / 2.0, 5.0 * PI / 6.0)?;
    let (theta, phi) = (PI / 3.0, 2.0);
    let space = PerceptionSpace::grid(vec![Axis::periodic("phi", -PI, PI, 1_000_000)?], |_| 1.0)?;
    let prof = build_profile_from_ops(
        space,
        &State::bloch(theta, 0.0),
        |p| Ok(bloch_projector(PI / 2.0, p.coords[0])),
        DEFAULT_TOL,
    )?;
    let closed = circle_model(theta, phi)?;
    Ok(vec![
        within(G, 1, "circle T(pi/2, 5pi/6) closed form", (PI - 3.0) / (6.0 * PI), c.typicality, 1e-9),
        within(G, 1, "circle T(pi/2, 5pi/6) to eight digits", 0.00751173, c.typicality, 1e-8),
        within(G, 1, "circle T(pi/3, 2) grid of 1e6", closed.typicality, typicality_at_density(&prof, closed.density)?, 1e-5),
    ])
}

pub fn linpos_checks(seed: u64) -> Result<Vec<Check>> {
    let est = linear_positivity_fraction(1_000_000, seed)?;
    Ok(vec![within("linpos", 2, "linear-positivity fraction, 1e6 samples", (128f64.sqrt() - 9.0) / 15.0, est.estimate, 0.002)])
}

pub fn dual_norm_checks() -> Vec<Check> {
    const G: &str = "dual-norm";
    let d = dual_normalization();
    vec![within(G, 3, "dual normalization N^-1", 0.857348, d.n_inv, 1e-5), within(G, 3, "erf = erfc root x1", 0.476936, d.x1, 1e-6)]
}

pub fn moment_checks() -> Result<Vec<Check>> {
    const G: &str = "moments";
    let mut out = Vec::new();
    for p in [1.0, 2.0] {
        let p2 = p * p;
        out.push(within(G, 4, &format!("posterior mean at p={p}"), 3.0 / (2.0 * p2), posterior_moment(p, 1)?, 0.0));
        let q = posterior_moment_quadrature(p, 1)?;
        out.push(within(G, 4, &format!("posterior mean by quadrature at p={p}"), 3.0 / (2.0 * p2), q.value, 1e-7));
        out.push(within(G, 4, &format!("posterior std at p={p}"), 1.658312 / p2, posterior_mean_std(p)?.std, 1e-6 / p2));
        let d = dual_posterior_mean_std(p)?;
        out.push(within(G, 4, &format!("dual posterior mean at p={p}"), 1.727468 / p2, d.mean, 1e-4 / p2));
        out.push(within(G, 4, &format!("dual posterior std at p={p}"), 1.686141 / p2, d.std, 1e-4 / p2));
    }
    Ok(out)
}

pub fn averaged_checks() -> Vec<Check> {
    const G: &str = "averaged";
    // n = (1 − v²)/v² maps (0, ∞) onto v ∈ (0, 1).
    let total = integrate(
        |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let n = (1.0 - v * v) / (v * v);
            averaged_posterior(n) * 2.0 / (v * v * v)
        },
        0.0,
        1.0,
        1e-12,
    );
    let n = 1e4_f64;
    let tail = 4.0 / 3.0 * n.powf(-1.5);
    vec![
        within(G, 5, "averaged posterior integral", 1.0, total, 1e-7),
        within(G, 5, "averaged posterior / (4/3)n^-3/2 at n=1e4", 1.0, averaged_posterior(n) / tail, 0.01),
    ]
}

pub fn band_checks() -> Vec<Check> {
    let b = gaussian_99_band();
    vec![
        within("band", 6, "99% band low endpoint", 0.0062666117, b.low, 1e-8),
        within("band", 6, "99% band high endpoint", 2.8070337863, b.high, 1e-8),
    ]
}

pub fn digit_checks() -> Result<Vec<Check>> {
    const G: &str = "digits";
    Ok(vec![
        within(G, 7, "digit experiment k=8, n=1", digit_experiment_canonical(8, 1.0)?, digit_experiment_approx(8, 1.0), 1e-3),
        at_most(G, 7, "digit experiment k=8, n=0", 1.1e-4, digit_experiment_approx(8, 0.0)),
        at_most(G, 7, "digit experiment k=8, n=2", 1.1e-4, digit_experiment_approx(8, 2.0)),
        within(G, 7, "confidence bound k=8 at 99%", 0.5, confidence_bound(8, 0.99)?.bound, 0.05),
    ])
}

pub fn epr_checks() -> Result<Vec<Check>> {
    const G: &str = "epr";
    let (mut signal, mut ratio) = (0.0f64, 0.0f64);
    for k in 0..50 {
        let theta = PI * k as f64 / 49.0;
        let r = epr_cat_model(theta, 2)?;
        signal = signal.max((r.mu_up_a - r.mu_down_a).abs()).max((r.mu_up_a - 0.5).abs());
        if k < 49 {
            ratio = ratio.max((r.mu_up_up / r.mu_up_down - (theta / 2.0).tan().powi(2)).abs());
        }
    }
    let zero = epr_cat_model(0.0, 2)?;
    let mut out = vec![
        at_most(G, 8, "region-A measures equal over 50 angles", 1e-12, signal),
        at_most(G, 8, "joint measure ratio minus tan^2(theta/2)", 1e-9, ratio),
        at_most(G, 8, "equal-spin measure at theta=0", 1e-15, zero.mu_up_up + zero.mu_down_down),
        at_most(G, 8, "confused perceptions in alive/dead basis", 1e-15, zero.confused_original.abs()),
    ];
    for n in 1..=MAX_CAT_PARTS {
        let r = epr_cat_model(1.0, n)?;
        out.push(within(G, 8, &format!("unconfused fraction, {n} parts"), 2f64.powi(1 - n as i32), r.unconfused_fraction_alternative, 1e-14));
    }
    Ok(out)
}

/// Cold-sensation probability by nested quadrature of `σ[E(ϑ, φ)] sinϑ`.
fn cold_probability_quadrature(theta: f64) -> f64 {
    let state = State::bloch(theta, 0.0);
    let density = |t: f64| {
        integrate(|f: f64| state.expectation(&bloch_projector(t, f)).expect("2x2").re, -PI, PI, 1e-13) * t.sin()
    };
    integrate(density, 0.0, PI / 2.0, 1e-12) / integrate(density, 0.0, PI, 1e-12)
}

pub fn sphere_checks(seed: u64) -> Result<Vec<Check>> {
    const G: &str = "sphere";
    // Polar 0.4 keeps ϑ = θ + ψ inside [0, π] for every ψ below.
    let state = Direction::new(0.4, 0.0)?;
    let draws = 1_000_000u64;
    let mut out = Vec::new();
    for (label, psi) in [("pi/6", PI / 6.0), ("pi/2", PI / 2.0), ("5pi/6", 5.0 * PI / 6.0)] {
        let m = (psi / 2.0).cos().powi(2);
        let t = sphere_model(state.polar, state.polar + psi, 0.0)?.typicality;
        let est = sphere_typicality_monte_carlo(state, m, draws, seed)?;
        let sigma = (t * (1.0 - t) / draws as f64).sqrt();
        out.push(within(G, 9, &format!("sphere T at psi={label}, 1e6 weighted draws"), (psi / 2.0).cos().powi(4), est.estimate, 3.0 * sigma));
    }
    for theta in [0.4, PI / 2.0, 2.6] {
        out.push(within(
            G,
            9,
            &format!("cold probability at theta={theta:.4}"),
            cold_probability_quadrature(theta),
            sphere_model(theta, 0.0, 0.0)?.cold_probability,
            1e-12,
        ));
    }
    Ok(out)
}

fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> Result<State> {
    let g = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    State::normalized(&Operator::new(&g * g.adjoint())?, DEFAULT_TOL)
}

fn random_positive(dim: usize, rng: &mut ChaCha8Rng) -> Result<Operator> {
    let g = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    Operator::new(&g * g.adjoint())
}

pub fn property_checks(seed: u64) -> Result<Vec<Check>> {
    const G: &str = "properties";
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut additivity = 0.0f64;
    for _ in 0..100 {
        let mut fam = ExperienceFamily::new();
        for k in 0..5 {
            fam.push(format!("e{k}"), ExperienceSpec::Explicit { op: random_positive(3, &mut rng)? }, rng.random::<f64>())?;
        }
        let s = ["e0", "e2"];
        let t = ["e3"];
        let a = awareness_operator(&fam, |l| s.contains(&l), None, DEFAULT_TOL)?;
        let b = awareness_operator(&fam, |l| t.contains(&l), None, DEFAULT_TOL)?;
        let u = awareness_operator(&fam, |l| s.contains(&l) || t.contains(&l), None, DEFAULT_TOL)?;
        additivity = additivity.max((&u - &(&a + &b)).max_abs());
    }

    let (mut completeness, mut min_measure) = (0.0f64, f64::INFINITY);
    for _ in 0..1000 {
        let dirs = [Direction::uniform(&mut rng), Direction::uniform(&mut rng), Direction::uniform(&mut rng)];
        let r = two_step_analysis(dirs[0], dirs[1], dirs[2], None)?;
        completeness = completeness.max((r.measures.iter().sum::<f64>() - 1.0).abs());
        min_measure = min_measure.min(r.measures.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let mut reconstruction = 0.0f64;
    let mut off_diagonal = 0.0f64;
    for i in 0..100 {
        let dim = 2 + i % 3;
        let steps = 1 + i % 3;
        let decs = (0..steps).map(|_| sample_decomposition_with(dim, &vec![1; dim], &mut rng)).collect::<Result<Vec<_>>>()?;
        let state = random_state(dim, &mut rng)?;
        let spec = SpectralExperience::diagonal((0..steps).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect())?;
        reconstruction = reconstruction.max(reconstruct_measures(&state, &spec, &decs)?.max_difference);
        let f = ReplicatedFunctional::new(state, decs)?;
        let hs = f.histories()?;
        for a in &hs {
            for b in hs.iter().filter(|b| *b != a) {
                off_diagonal = off_diagonal.max(f.atomic_direct(a, b)?.norm());
            }
        }
    }

    let space = PerceptionSpace::grid(vec![Axis::periodic("phi", -PI, PI, 20_000)?], |_| 1.0)?;
    let prof = build_profile_from_ops(space, &State::bloch(1.0, 0.0), |p| Ok(bloch_projector(PI / 2.0, p.coords[0])), DEFAULT_TOL)?;
    let typ = all_typicalities(&prof)?;
    let idx = sample_points(&prof, 100_000, &mut rng)?;
    let ks = ks_statistic_uniform(&idx.iter().map(|&i| typ[i].typicality).collect::<Vec<_>>());

    let (mut total, mut agree) = (0u32, 0u32);
    while total < 10_000 {
        let (q, r) = (Direction::uniform(&mut rng), Direction::uniform(&mut rng));
        if let TriangleCheck::Evaluated { inequality_holds, all_triangles_sub_pi, .. } =
            triangle_equivalence(Direction::north(), q, r)
        {
            total += 1;
            agree += u32::from(inequality_holds == all_triangles_sub_pi);
        }
    }

    Ok(vec![
        at_most(G, 10, "awareness operator additivity over disjoint sets", 1e-12, additivity),
        at_most(G, 10, "two-step measures sum to one", 1e-9, completeness),
        at_least(G, 10, "two-step measures nonnegative", -1e-10, min_measure),
        at_most(G, 10, "measure reconstruction from histories, 100 instances", 1e-9, reconstruction),
        at_most(G, 10, "replicated functional off-diagonal", 1e-10, off_diagonal),
        at_most(G, 10, "typicality KS distance from uniform, 1e5 samples", 0.02, ks),
        at_least(G, 10, "triangle picture agreement, 1e4 configurations", 0.9999, agree as f64 / total as f64),
    ])
}

/// Runs the named groups, or all of them when `only` is empty.
pub fn run(only: &[String], seed: u64) -> Result<Vec<Check>> {
    for g in only {
        if !GROUPS.contains(&g.as_str()) {
            return Err(crate::SqmError::InvalidParameters(format!("unknown check group {g}; known: {}", GROUPS.join(", "))));
        }
    }
    let wanted = |g: &str| only.is_empty() || only.iter().any(|o| o == g);
    let mut out = Vec::new();
    for g in GROUPS {
        if !wanted(g) {
            continue;
        }
        out.extend(match g {
            "circle" => circle_checks()?,
            "linpos" => linpos_checks(seed)?,
            "dual-norm" => dual_norm_checks(),
            "moments" => moment_checks()?,
            "averaged" => averaged_checks(),
            "band" => band_checks(),
            "digits" => digit_checks()?,
            "epr" => epr_checks()?,
            "sphere" => sphere_checks(seed)?,
            _ => property_checks(seed)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filtering_and_unknown_groups() {
        let band = run(&["band".into()], 1).unwrap();
        assert_eq!(band.len(), 2);
        assert!(band.iter().all(|c| c.group == "band" && c.criterion == 6));
        assert!(run(&["nope".into()], 1).is_err());
    }

    #[test]
    fn comparisons() {
        assert!(within("x", 1, "a", 1.0, 1.05, 0.1).pass);
        assert!(!within("x", 1, "a", 1.0, 1.2, 0.1).pass);
        assert!(at_most("x", 1, "a", 1.0, 1.0).pass);
        assert!(!at_least("x", 1, "a", 1.0, 0.5).pass);
        assert!(!within("x", 1, "a", 1.0, f64::NAN, 0.1).pass);
    }

    #[test]
    fn cold_quadrature_matches_formula() {
        for theta in [0.2, 1.9] {
            assert!((cold_probability_quadrature(theta) - (2.0 + theta.cos()) / 4.0).abs() < 1e-12);
        }
    }
}
