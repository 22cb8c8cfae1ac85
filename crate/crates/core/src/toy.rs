//! Two-state toy models: the 3-ball, circle and sphere perception spaces,
//! the two-step sequence analysis with its Monte Carlo fraction and
//! spherical-triangle picture, and the EPR/cat measures.

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqmError};
use crate::hypotheses::two_step_family;
use crate::operator::{bloch_projector, tensor_all, Operator, State, C64, DEFAULT_TOL};

/// Number of independent streams a Monte Carlo run is split into.
pub const SHARD_COUNT: usize = 16;

/// Below this angle (radians) configurations count as degenerate.
pub const DEGENERACY_CUTOFF: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub polar: f64,
    pub azimuth: f64,
}

impl Direction {
    pub fn new(polar: f64, azimuth: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&polar) || !azimuth.is_finite() {
            return Err(SqmError::InvalidParameters(format!(
                "polar angle {polar} must be in [0, π]"
            )));
        }
        Ok(Self { polar, azimuth })
    }

    pub fn north() -> Self {
        Self { polar: 0.0, azimuth: 0.0 }
    }

    pub fn unit(&self) -> Vector3<f64> {
        let s = self.polar.sin();
        Vector3::new(s * self.azimuth.cos(), s * self.azimuth.sin(), self.polar.cos())
    }

    pub fn from_unit(v: &Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(SqmError::ZeroNorm);
        }
        let v = v / n;
        Ok(Self { polar: v.z.clamp(-1.0, 1.0).acos(), azimuth: v.y.atan2(v.x) })
    }

    /// Uniform on the sphere: uniform azimuth and uniform `cos(polar)`.
    pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let c: f64 = rng.random_range(-1.0..=1.0);
        let az: f64 = rng.random_range(0.0..2.0 * PI);
        Self { polar: c.acos(), azimuth: az }
    }

    pub fn projector(&self) -> Operator {
        bloch_projector(self.polar, self.azimuth)
    }

    pub fn state(&self) -> State {
        State::bloch(self.polar, self.azimuth)
    }

    pub fn angle_to(&self, other: &Direction) -> f64 {
        self.unit().dot(&other.unit()).clamp(-1.0, 1.0).acos()
    }
}

/// `E(u, v, w) = t [[1+w, u+iv], [u−iv, 1−w]]` with `t = 1/(1+r²)`.
pub fn ball_experience(u: f64, v: f64, w: f64) -> Result<Operator> {
    let r2 = u * u + v * v + w * w;
    if !(r2 <= 1.0 + DEFAULT_TOL) {
        return Err(SqmError::InvalidParameters(format!("({u}, {v}, {w}) is outside the unit ball")));
    }
    let t = 1.0 / (1.0 + r2);
    Operator::from_rows(&[
        vec![C64::new(t * (1.0 + w), 0.0), C64::new(t * u, t * v)],
        vec![C64::new(t * u, -t * v), C64::new(t * (1.0 - w), 0.0)],
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BallPoint {
    pub density: f64,
    pub prior_weight: f64,
}

/// Measure density and Riemannian prior weight `√8/(1+r²)³` at a ball point.
pub fn ball_model_density(state: &State, u: f64, v: f64, w: f64) -> Result<BallPoint> {
    let e = ball_experience(u, v, w)?;
    let r2 = u * u + v * v + w * w;
    Ok(BallPoint { density: state.measure(&e, DEFAULT_TOL)?, prior_weight: 8f64.sqrt() / (1.0 + r2).powi(3) })
}

/// Principal value in `(−π, π]`.
pub fn wrap_angle(phi: f64) -> f64 {
    let mut x = phi.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CircleModel {
    pub theta: f64,
    pub phi: f64,
    pub density: f64,
    pub typicality: f64,
    pub reversed: f64,
    pub dual: f64,
}

/// Closed-form density and typicalities for `E(φ)` on the equator and the
/// state tilted by `θ`.
pub fn circle_model(theta: f64, phi: f64) -> Result<CircleModel> {
    let s = theta.sin();
    if !(s > 0.0) {
        return Err(SqmError::UnsupportedRegime(format!("sin θ = {s} must be positive")));
    }
    let phi = wrap_angle(phi);
    let tr = ((phi + s * phi.sin()).abs() / PI).min(1.0);
    let t = 1.0 - tr;
    Ok(CircleModel {
        theta,
        phi,
        density: 0.5 * (1.0 + s * phi.cos()),
        typicality: t,
        reversed: tr,
        dual: 1.0 - (1.0 - 2.0 * t).abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SphereModel {
    /// Angle between the perception's direction and the state's.
    pub psi: f64,
    pub density: f64,
    pub typicality: f64,
    pub cold_probability: f64,
}

pub fn sphere_model(theta: f64, vartheta: f64, varphi: f64) -> Result<SphereModel> {
    for (name, a) in [("θ", theta), ("ϑ", vartheta)] {
        if !(0.0..=PI).contains(&a) {
            return Err(SqmError::InvalidParameters(format!("{name} = {a} must be in [0, π]")));
        }
    }
    let cos_psi = (theta.cos() * vartheta.cos() + theta.sin() * vartheta.sin() * varphi.cos()).clamp(-1.0, 1.0);
    let m = (1.0 + cos_psi) / 2.0;
    Ok(SphereModel { psi: cos_psi.acos(), density: m, typicality: m * m, cold_probability: (2.0 + theta.cos()) / 4.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Provenance {
    pub seed: u64,
    pub samples: u64,
    pub shard_count: usize,
}

/// Runs `per_sample` in `SHARD_COUNT` streams seeded `seed + shard` and
/// returns the hit count; merging in shard order keeps totals reproducible.
pub(crate) fn sharded_count<F>(samples: u64, seed: u64, per_sample: F) -> u64
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let base = samples / SHARD_COUNT as u64;
    let extra = samples % SHARD_COUNT as u64;
    let counts: Vec<u64> = (0..SHARD_COUNT)
        .into_par_iter()
        .map(|shard| {
            let n = base + u64::from((shard as u64) < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(shard as u64));
            (0..n).filter(|_| per_sample(&mut rng)).count() as u64
        })
        .collect();
    counts.iter().sum()
}

pub(crate) fn estimate(hits: u64, samples: u64, seed: u64) -> McEstimate {
    let f = hits as f64 / samples as f64;
    McEstimate {
        estimate: f,
        std_error: (f * (1.0 - f) / samples as f64).sqrt(),
        provenance: Provenance { seed, samples, shard_count: SHARD_COUNT },
    }
}

/// Sphere-model typicality by counting: draws from the measure
/// `m sinϑ dϑ dφ` (uniform directions accepted with probability `m`) and
/// the fraction with density at most `m`.
pub fn sphere_typicality_monte_carlo(state_dir: Direction, m: f64, draws: u64, seed: u64) -> Result<McEstimate> {
    if draws == 0 {
        return Err(SqmError::InvalidParameters("need at least one draw".into()));
    }
    let a = state_dir.unit();
    let hits = sharded_count(draws, seed, |rng| loop {
        let d = Direction::uniform(rng).unit();
        let md = (1.0 + a.dot(&d)) / 2.0;
        if rng.random::<f64>() < md {
            break md <= m;
        }
    });
    Ok(estimate(hits, draws, seed))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TwoStepReport {
    /// `2 Re Tr[(QR − QRQ)ρ]`.
    pub weak_residual: f64,
    /// `|Tr[(QR − QRQ)ρ]|`.
    pub medium_residual: f64,
    /// `Tr[(QR − QRQ)ρ]` as `[re, im]`.
    pub medium_complex: [f64; 2],
    pub linearly_positive: bool,
    /// `σ[E(i)]` for the sequences `QRQ`, `(I−Q)R(I−Q)`, `Q(I−R)Q`,
    /// `(I−Q)(I−R)(I−Q)`.
    pub measures: [f64; 4],
}

/// Decoherence and linear-positivity conditions for the sequence `Q` then
/// `R` in the state along `state_dir` (or `state`, when given).
pub fn two_step_analysis(
    state_dir: Direction,
    q_dir: Direction,
    r_dir: Direction,
    state: Option<&State>,
) -> Result<TwoStepReport> {
    let rho = match state {
        Some(s) => s.clone(),
        None => state_dir.state(),
    };
    let (q, r) = (q_dir.projector(), r_dir.projector());
    q.same_dim(rho.operator())?;
    let fam = two_step_family(&q, &r)?;
    let mut measures = [0.0; 4];
    for (slot, op) in measures.iter_mut().zip(fam.realize_all(None, DEFAULT_TOL)?) {
        *slot = rho.expectation(&op)?.re;
    }
    let qr = &q * &r;
    let diff = &qr - &(&qr * &q);
    let z = rho.expectation(&diff)?;
    let id = Operator::identity(2);
    let sq = rho.expectation(&q)?.re;
    let sr = rho.expectation(&r)?.re;
    let lower = rho.expectation(&(&(&q + &r) - &id))?.re.max(0.0);
    let mid = rho.expectation(&qr)?.re;
    Ok(TwoStepReport {
        weak_residual: 2.0 * z.re,
        medium_residual: z.norm(),
        medium_complex: [z.re, z.im],
        linearly_positive: lower <= mid && mid <= sq.min(sr),
        measures,
    })
}

/// The linear-positivity inequality from Bloch vectors of a pure state and
/// two rank-one projectors: `σ[Q] = (1+a·q)/2` and
/// `Re σ[QR] = (1 + q·r + a·q + a·r)/4`.
pub fn linearly_positive_bloch(a: &Vector3<f64>, q: &Vector3<f64>, r: &Vector3<f64>) -> bool {
    let sq = (1.0 + a.dot(q)) / 2.0;
    let sr = (1.0 + a.dot(r)) / 2.0;
    let mid = (1.0 + q.dot(r) + a.dot(q) + a.dot(r)) / 4.0;
    (sq + sr - 1.0).max(0.0) <= mid && mid <= sq.min(sr)
}

/// Fraction of uniformly sampled `(q, r)` pairs for which the sequence is
/// linearly positive, with the state fixed at the north pole.
pub fn linear_positivity_fraction(samples: u64, seed: u64) -> Result<McEstimate> {
    if samples == 0 {
        return Err(SqmError::InvalidParameters("need at least one sample".into()));
    }
    let a = Direction::north().unit();
    let hits = sharded_count(samples, seed, |rng| {
        let q = Direction::uniform(rng).unit();
        let r = Direction::uniform(rng).unit();
        linearly_positive_bloch(&a, &q, &r)
    });
    Ok(estimate(hits, samples, seed))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum TriangleCheck {
    #[serde(rename_all = "camelCase")]
    Evaluated {
        inequality_holds: bool,
        all_triangles_sub_pi: bool,
        /// Solid angles of the triangles with vertices `(±a, ±q, ±r)`.
        areas: [f64; 8],
    },
    Skipped { reason: String },
}

/// Solid angle of the spherical triangle with unit vertices `a, b, c`.
pub fn triangle_solid_angle(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let num = a.dot(&b.cross(c)).abs();
    let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * num.atan2(den)
}

/// Compares the linear-positivity inequality with the condition that none
/// of the eight triangles cut out by the great circles through each pair of
/// `a, q, r` has solid angle above `π`.
pub fn triangle_equivalence(state_dir: Direction, q_dir: Direction, r_dir: Direction) -> TriangleCheck {
    let (a, q, r) = (state_dir.unit(), q_dir.unit(), r_dir.unit());
    for (x, y, name) in [(&a, &q, "state/Q"), (&a, &r, "state/R"), (&q, &r, "Q/R")] {
        let ang = x.dot(y).clamp(-1.0, 1.0).acos();
        if ang < DEGENERACY_CUTOFF || PI - ang < DEGENERACY_CUTOFF {
            return TriangleCheck::Skipped { reason: format!("{name} directions are parallel or antipodal") };
        }
    }
    if a.dot(&q.cross(&r)).abs() < DEGENERACY_CUTOFF {
        return TriangleCheck::Skipped { reason: "directions lie on one great circle".into() };
    }
    let mut areas = [0.0; 8];
    for (k, area) in areas.iter_mut().enumerate() {
        let s = |bit: usize| if k & bit == 0 { 1.0 } else { -1.0 };
        *area = triangle_solid_angle(&(a * s(1)), &(q * s(2)), &(r * s(4)));
    }
    TriangleCheck::Evaluated {
        inequality_holds: linearly_positive_bloch(&a, &q, &r),
        all_triangles_sub_pi: areas.iter().all(|&x| x <= PI),
        areas,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EprReport {
    pub theta: f64,
    pub parts: usize,
    pub mu_up_a: f64,
    pub mu_down_a: f64,
    /// A up along z with B up along θ, and so on.
    pub mu_up_up: f64,
    pub mu_up_down: f64,
    pub mu_down_up: f64,
    pub mu_down_down: f64,
    pub mu_cat_alive: f64,
    pub mu_cat_dead: f64,
    /// Measure of perceptions where cat parts disagree, in the alive/dead basis.
    pub confused_original: f64,
    /// Measure of perceptions where all parts agree, in the `±` basis.
    pub unconfused_fraction_alternative: f64,
}

/// Largest number of cat parts; keeps the dimension at most 256.
pub const MAX_CAT_PARTS: usize = 6;

/// Singlet pair `A ⊗ B` with `n` cat-part qubits correlated to B's spin
/// along the `θ` direction in the x–z plane: alive with up, dead with down.
pub fn epr_state(theta: f64, parts: usize) -> Result<DVector<C64>> {
    if !(0.0..=PI).contains(&theta) {
        return Err(SqmError::InvalidParameters(format!("θ = {theta} must be in [0, π]")));
    }
    if parts == 0 || parts > MAX_CAT_PARTS {
        return Err(SqmError::InvalidParameters(format!("cat parts must be in 1..={MAX_CAT_PARTS}")));
    }
    let h = C64::new(0.5f64.sqrt(), 0.0);
    let up = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let down = DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    let singlet = (up.kronecker(&down) - down.kronecker(&up)) * h;
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let up_t = DVector::from_vec(vec![C64::new(c, 0.0), C64::new(s, 0.0)]);
    let down_t = DVector::from_vec(vec![C64::new(-s, 0.0), C64::new(c, 0.0)]);
    let mut cat_alive = DVector::from_element(1, C64::new(1.0, 0.0));
    let mut cat_dead = cat_alive.clone();
    for _ in 0..parts {
        cat_alive = cat_alive.kronecker(&up);
        cat_dead = cat_dead.kronecker(&down);
    }
    let id = Operator::identity(2);
    let mut psi = DVector::zeros(4 << parts);
    for (dir, cat) in [(&up_t, &cat_alive), (&down_t, &cat_dead)] {
        let pb = tensor_all(&[id.clone(), Operator::projector_onto(dir)?]);
        psi += (pb.matrix() * &singlet).kronecker(cat);
    }
    Ok(psi)
}

fn part_projectors(basis: [&DVector<C64>; 2]) -> Result<[Operator; 2]> {
    Ok([Operator::projector_onto(basis[0])?, Operator::projector_onto(basis[1])?])
}

/// Sum of `⟨ψ| P_{s₁} ⊗ … ⊗ P_{sₙ} |ψ⟩` over the sign patterns `keep` accepts,
/// with `A` and `B` traced over.
fn cat_pattern_measure(psi: &DVector<C64>, parts: usize, proj: &[Operator; 2], keep: impl Fn(u32) -> bool) -> Result<f64> {
    let id = Operator::identity(2);
    let mut total = 0.0;
    for pattern in 0u32..(1 << parts) {
        if !keep(pattern) {
            continue;
        }
        let mut factors = vec![id.clone(), id.clone()];
        factors.extend((0..parts).map(|k| proj[((pattern >> k) & 1) as usize].clone()));
        let p = tensor_all(&factors);
        total += psi.dotc(&(p.matrix() * psi)).re;
    }
    Ok(total)
}

pub fn epr_cat_model(theta: f64, parts: usize) -> Result<EprReport> {
    let psi = epr_state(theta, parts)?;
    let state = State::pure(&psi)?;
    let id = Operator::identity(2);
    let z = [Direction::north().projector(), Direction { polar: PI, azimuth: 0.0 }.projector()];
    let t = [
        Direction { polar: theta, azimuth: 0.0 }.projector(),
        Direction { polar: PI - theta, azimuth: PI }.projector(),
    ];
    let rest = Operator::identity(1 << parts);
    let joint = |a: &Operator, b: &Operator| -> Result<f64> {
        state.measure(&tensor_all(&[a.clone(), b.clone(), rest.clone()]), DEFAULT_TOL)
    };
    let r = 0.5f64.sqrt();
    let plus = DVector::from_vec(vec![C64::new(r, 0.0), C64::new(r, 0.0)]);
    let minus = DVector::from_vec(vec![C64::new(r, 0.0), C64::new(-r, 0.0)]);
    let up = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let down = DVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
    let alive_dead = part_projectors([&up, &down])?;
    let pm = part_projectors([&plus, &minus])?;
    let uniform = |p: u32| p == 0 || p == (1 << parts) - 1;
    Ok(EprReport {
        theta,
        parts,
        mu_up_a: joint(&z[0], &id)?,
        mu_down_a: joint(&z[1], &id)?,
        mu_up_up: joint(&z[0], &t[0])?,
        mu_up_down: joint(&z[0], &t[1])?,
        mu_down_up: joint(&z[1], &t[0])?,
        mu_down_down: joint(&z[1], &t[1])?,
        mu_cat_alive: cat_pattern_measure(&psi, parts, &alive_dead, |p| p == 0)?,
        mu_cat_dead: cat_pattern_measure(&psi, parts, &alive_dead, |p| p == (1 << parts) - 1)?,
        confused_original: cat_pattern_measure(&psi, parts, &alive_dead, |p| !uniform(p))?,
        unconfused_fraction_alternative: cat_pattern_measure(&psi, parts, &pm, uniform)?,
    })
}
