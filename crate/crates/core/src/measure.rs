//! Perception spaces, measure profiles, set measures, conditional
//! probabilities and the three typicality statistics.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqmError};
use crate::hypotheses::{realize, ExperienceFamily, ExperienceSpec};
use crate::operator::{Operator, State, C64};
use crate::quad::pairwise_sum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum QuadRule {
    /// `count ≥ 2` nodes including both ends, half weight at the ends.
    Trapezoid,
    /// `count` cell midpoints.
    Midpoint,
    /// `count` equally weighted nodes on the half-open `(lo, hi]`.
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub rule: QuadRule,
}

impl Axis {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, count: usize, rule: QuadRule) -> Result<Self> {
        let axis = Self { name: name.into(), lo, hi, count, rule };
        axis.validate()?;
        Ok(axis)
    }

    pub fn trapezoid(name: impl Into<String>, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(name, lo, hi, count, QuadRule::Trapezoid)
    }

    pub fn midpoint(name: impl Into<String>, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(name, lo, hi, count, QuadRule::Midpoint)
    }

    pub fn periodic(name: impl Into<String>, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(name, lo, hi, count, QuadRule::Periodic)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(SqmError::InvalidParameters(format!(
                "axis {:?} needs finite lo < hi",
                self.name
            )));
        }
        let min = if self.rule == QuadRule::Trapezoid { 2 } else { 1 };
        if self.count < min {
            return Err(SqmError::InvalidParameters(format!(
                "axis {:?} needs at least {min} nodes",
                self.name
            )));
        }
        Ok(())
    }

    /// Nodes and quadrature weights along the axis.
    pub fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.count;
        let span = self.hi - self.lo;
        match self.rule {
            QuadRule::Trapezoid => {
                let h = span / (n - 1) as f64;
                let x = (0..n).map(|i| if i == n - 1 { self.hi } else { self.lo + i as f64 * h }).collect();
                let w = (0..n).map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h }).collect();
                (x, w)
            }
            QuadRule::Midpoint => {
                let h = span / n as f64;
                ((0..n).map(|i| self.lo + (i as f64 + 0.5) * h).collect(), vec![h; n])
            }
            QuadRule::Periodic => {
                let h = span / n as f64;
                let x = (0..n).map(|i| if i == n - 1 { self.hi } else { self.lo + (i + 1) as f64 * h }).collect();
                (x, vec![h; n])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SpaceKind {
    Discrete { labels: Vec<String> },
    Grid { axes: Vec<Axis> },
}

/// A finite set of perceptions with positive prior weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PerceptionSpace {
    kind: SpaceKind,
    /// Flattened coordinates, `dim` per point; empty for discrete spaces.
    coords: Vec<f64>,
    weights: Vec<f64>,
}

/// One perception of a space, as seen by predicates and closures.
#[derive(Clone, Copy, Debug)]
pub struct Point<'a> {
    pub index: usize,
    pub label: Option<&'a str>,
    pub coords: &'a [f64],
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(SqmError::EmptyFamily);
    }
    match weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
        Some(i) => Err(SqmError::InvalidParameters(format!(
            "prior weight {} at point {i} must be positive and finite",
            weights[i]
        ))),
        None => Ok(()),
    }
}

impl PerceptionSpace {
    pub fn discrete(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if labels.len() != weights.len() {
            return Err(SqmError::DimensionMismatch(labels.len(), weights.len()));
        }
        check_weights(&weights)?;
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(SqmError::DuplicateLabel(l.clone()));
            }
        }
        Ok(Self { kind: SpaceKind::Discrete { labels }, coords: Vec::new(), weights })
    }

    /// Discrete space with counting weights.
    pub fn counting(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        Self::discrete(labels, vec![1.0; n])
    }

    /// Tensor grid over `axes` (first axis outermost); each weight is the
    /// product of axis quadrature weights times `prior(coords)`.
    pub fn grid(axes: Vec<Axis>, prior: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::grid_filtered(axes, |_| true, prior)
    }

    /// Grid restricted to the nodes where `keep` holds.
    pub fn grid_filtered(
        axes: Vec<Axis>,
        keep: impl Fn(&[f64]) -> bool,
        prior: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        if axes.is_empty() {
            return Err(SqmError::EmptyDimension);
        }
        for a in &axes {
            a.validate()?;
        }
        let nodes: Vec<(Vec<f64>, Vec<f64>)> = axes.iter().map(Axis::nodes).collect();
        let total: usize = axes.iter().map(|a| a.count).product();
        let dim = axes.len();
        let mut coords = Vec::new();
        let mut weights = Vec::new();
        let mut x = vec![0.0; dim];
        for flat in 0..total {
            let mut rem = flat;
            let mut w = 1.0;
            for k in (0..dim).rev() {
                let i = rem % axes[k].count;
                rem /= axes[k].count;
                x[k] = nodes[k].0[i];
                w *= nodes[k].1[i];
            }
            if keep(&x) {
                coords.extend_from_slice(&x);
                weights.push(w * prior(&x));
            }
        }
        check_weights(&weights)?;
        Ok(Self { kind: SpaceKind::Grid { axes }, coords, weights })
    }

    /// Same points with new prior weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(SqmError::DimensionMismatch(self.len(), weights.len()));
        }
        check_weights(&weights)?;
        Ok(Self { kind: self.kind.clone(), coords: self.coords.clone(), weights })
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of coordinates per point; 0 for discrete spaces.
    pub fn coord_dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Discrete { .. } => 0,
            SpaceKind::Grid { axes } => axes.len(),
        }
    }

    pub fn point(&self, index: usize) -> Result<Point<'_>> {
        if index >= self.len() {
            return Err(SqmError::OutOfRange { index, len: self.len() });
        }
        let d = self.coord_dim();
        Ok(Point {
            index,
            label: match &self.kind {
                SpaceKind::Discrete { labels } => Some(labels[index].as_str()),
                SpaceKind::Grid { .. } => None,
            },
            coords: &self.coords[index * d..(index + 1) * d],
        })
    }

    pub fn points(&self) -> impl Iterator<Item = Point<'_>> + '_ {
        (0..self.len()).map(move |i| self.point(i).expect("index in range"))
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        match &self.kind {
            SpaceKind::Discrete { labels } => labels.iter().position(|l| l == label),
            SpaceKind::Grid { .. } => None,
        }
    }
}

/// `σ[E(p)]` for a realizable spec, clamped to zero within `tol`.
pub fn measure_density(state: &State, spec: &ExperienceSpec, tol: f64) -> Result<f64> {
    let e = realize(spec, Some(state), tol)?;
    state.measure(&e, tol)
}

/// Per-point density and prior weight, with the total measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MeasureProfile {
    space: PerceptionSpace,
    density: Vec<f64>,
    total_measure: f64,
}

impl MeasureProfile {
    pub fn new(space: PerceptionSpace, density: Vec<f64>) -> Result<Self> {
        if density.len() != space.len() {
            return Err(SqmError::DimensionMismatch(space.len(), density.len()));
        }
        if let Some(i) = density.iter().position(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(SqmError::NegativeMeasure(density[i], format!("point {i}")));
        }
        let total_measure = weighted_sum(&density, space.weights(), |_| true);
        Ok(Self { space, density, total_measure })
    }

    pub fn space(&self) -> &PerceptionSpace {
        &self.space
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn total_measure(&self) -> f64 {
        self.total_measure
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// Applies `f` to every density value, e.g. an SQMn power law.
    pub fn map_density(&self, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let density = self.density.iter().map(|&m| f(m)).collect::<Result<Vec<_>>>()?;
        Self::new(self.space.clone(), density)
    }

    fn require_total(&self) -> Result<f64> {
        if self.total_measure > 0.0 && self.total_measure.is_finite() {
            Ok(self.total_measure)
        } else {
            Err(SqmError::ZeroMeasure(self.total_measure))
        }
    }
}

fn weighted_sum(density: &[f64], weights: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    let terms: Vec<f64> = density
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(i, (m, w))| if keep(i) { m * w } else { 0.0 })
        .collect();
    pairwise_sum(&terms)
}

/// Fills a profile with `σ[E(p)]`, `E(p)` given per point by `spec_at`.
pub fn build_profile<F>(space: PerceptionSpace, state: &State, spec_at: F, tol: f64) -> Result<MeasureProfile>
where
    F: Fn(&Point<'_>) -> Result<ExperienceSpec> + Sync,
{
    let density = (0..space.len())
        .into_par_iter()
        .map(|i| {
            let p = space.point(i)?;
            measure_density(state, &spec_at(&p)?, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    MeasureProfile::new(space, density)
}

/// Like [`build_profile`] but with the operator `E(p)` supplied directly.
pub fn build_profile_from_ops<F>(space: PerceptionSpace, state: &State, op_at: F, tol: f64) -> Result<MeasureProfile>
where
    F: Fn(&Point<'_>) -> Result<Operator> + Sync,
{
    let density = (0..space.len())
        .into_par_iter()
        .map(|i| state.measure(&op_at(&space.point(i)?)?, tol))
        .collect::<Result<Vec<_>>>()?;
    MeasureProfile::new(space, density)
}

/// Discrete profile over a family's labels, weighted by its prior weights.
pub fn build_profile_from_family(family: &ExperienceFamily, state: &State, tol: f64) -> Result<MeasureProfile> {
    let labels = family.entries().iter().map(|e| e.label.clone()).collect();
    let weights = family.entries().iter().map(|e| e.prior_weight).collect();
    let space = PerceptionSpace::discrete(labels, weights)?;
    let density = family
        .entries()
        .iter()
        .map(|e| measure_density(state, &e.spec, tol))
        .collect::<Result<Vec<_>>>()?;
    MeasureProfile::new(space, density)
}

/// `μ(S) = Σ_{p∈S} m(p) w₀(p)`.
pub fn set_measure(profile: &MeasureProfile, subset: impl Fn(&Point<'_>) -> bool) -> f64 {
    let space = &profile.space;
    weighted_sum(&profile.density, space.weights(), |i| {
        subset(&space.point(i).expect("index in range"))
    })
}

/// `μ(S₁ ∩ S₂) / μ(S₁)`.
pub fn conditional_probability(
    profile: &MeasureProfile,
    given: impl Fn(&Point<'_>) -> bool,
    event: impl Fn(&Point<'_>) -> bool,
) -> Result<f64> {
    let denom = set_measure(profile, &given);
    if !(denom > 0.0) {
        return Err(SqmError::UndefinedCondition);
    }
    let num = set_measure(profile, |p| given(p) && event(p));
    Ok((num / denom).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Typicalities {
    pub typicality: f64,
    pub reversed: f64,
    pub dual: f64,
}

/// `T(p) = μ({p′ : m(p′) ≤ m(p)}) / μ(M)`.
pub fn typicality(profile: &MeasureProfile, index: usize) -> Result<f64> {
    let total = profile.require_total()?;
    let m = *profile.density.get(index).ok_or(SqmError::OutOfRange { index, len: profile.len() })?;
    Ok(typicality_at_density_with(profile, m, total))
}

/// `T_r(p) = μ({p′ : m(p′) ≥ m(p)}) / μ(M)`.
pub fn reversed_typicality(profile: &MeasureProfile, index: usize) -> Result<f64> {
    let total = profile.require_total()?;
    let m = *profile.density.get(index).ok_or(SqmError::OutOfRange { index, len: profile.len() })?;
    let d = &profile.density;
    Ok(weighted_sum(d, profile.space.weights(), |j| d[j] >= m) / total)
}

/// `T_d(p) = μ({p̃ : min(T, T_r)(p̃) ≤ min(T, T_r)(p)}) / μ(M)`.
pub fn dual_typicality(profile: &MeasureProfile, index: usize) -> Result<f64> {
    Ok(all_typicalities(profile)?
        .get(index)
        .ok_or(SqmError::OutOfRange { index, len: profile.len() })?
        .dual)
}

/// Measure fraction with density at most `m`, for a density value that need
/// not occur on the grid.
pub fn typicality_at_density(profile: &MeasureProfile, m: f64) -> Result<f64> {
    let total = profile.require_total()?;
    Ok(typicality_at_density_with(profile, m, total))
}

fn typicality_at_density_with(profile: &MeasureProfile, m: f64, total: f64) -> f64 {
    let d = &profile.density;
    weighted_sum(d, profile.space.weights(), |j| d[j] <= m) / total
}

/// For each point, inclusive cumulative measure of `key ≤ key(p)` and of
/// `key ≥ key(p)`, by one sort and prefix sums.
fn tie_inclusive_cdf(key: &[f64], mass: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = key.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| mass[i]).collect();
    let total = pairwise_sum(&sorted);
    let mut le = vec![0.0; n];
    let mut ge = vec![0.0; n];
    let mut below = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && key[order[end + 1]] == key[order[start]] {
            end += 1;
        }
        let group = pairwise_sum(&sorted[start..=end]);
        for &i in &order[start..=end] {
            le[i] = below + group;
            ge[i] = total - below;
        }
        below += group;
        start = end + 1;
    }
    (le, ge)
}

/// All three typicalities at every point.
pub fn all_typicalities(profile: &MeasureProfile) -> Result<Vec<Typicalities>> {
    let total = profile.require_total()?;
    let mass: Vec<f64> = profile
        .density
        .iter()
        .zip(profile.space.weights())
        .map(|(m, w)| m * w)
        .collect();
    let (le, ge) = tie_inclusive_cdf(&profile.density, &mass);
    let t: Vec<f64> = le.iter().map(|x| (x / total).min(1.0)).collect();
    let tr: Vec<f64> = ge.iter().map(|x| (x / total).min(1.0)).collect();
    let s: Vec<f64> = t.iter().zip(&tr).map(|(a, b)| a.min(*b)).collect();
    let (dle, _) = tie_inclusive_cdf(&s, &mass);
    Ok((0..profile.len())
        .map(|i| Typicalities { typicality: t[i], reversed: tr[i], dual: (dle[i] / total).min(1.0) })
        .collect())
}

/// `μ(S_≤(p) ∩ S) / μ(S)` for `p ∈ S`.
pub fn restricted_typicality(
    profile: &MeasureProfile,
    index: usize,
    subset: impl Fn(&Point<'_>) -> bool,
) -> Result<f64> {
    let space = &profile.space;
    let p = space.point(index)?;
    if !subset(&p) {
        return Err(SqmError::NotInSet);
    }
    let inside: Vec<bool> = space.points().map(|q| subset(&q)).collect();
    let denom = weighted_sum(&profile.density, space.weights(), |j| inside[j]);
    if !(denom > 0.0) {
        return Err(SqmError::ZeroMeasure(denom));
    }
    let m = profile.density[index];
    let d = &profile.density;
    Ok(weighted_sum(d, space.weights(), |j| inside[j] && d[j] <= m) / denom)
}

#[derive(Clone, Debug, PartialEq)]
pub enum PriorMode {
    Counting,
    Trace,
    PriorState(State),
}

/// Prior weights `w₀(p)` from the realized experience operators.
pub fn prior_weights(ops: &[Operator], mode: &PriorMode, tol: f64) -> Result<Vec<f64>> {
    let w: Vec<f64> = match mode {
        PriorMode::Counting => vec![1.0; ops.len()],
        PriorMode::Trace => ops.iter().map(|e| e.trace().re).collect(),
        PriorMode::PriorState(s) => ops.iter().map(|e| s.measure(e, tol)).collect::<Result<_>>()?,
    };
    check_weights(&w)?;
    Ok(w)
}

/// `g_ij = Σ_α Re Tr[Δᵢ C_α† Δⱼ C_α]`, central differences of half-width
/// `steps[i]` along each coordinate.
pub fn gram_metric<F>(family: F, x: &[f64], steps: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<Operator>>,
{
    if steps.len() != x.len() {
        return Err(SqmError::DimensionMismatch(x.len(), steps.len()));
    }
    let mut deltas: Vec<Vec<Operator>> = Vec::with_capacity(x.len());
    for (i, &h) in steps.iter().enumerate() {
        if !(h > 0.0 && h.is_finite()) {
            return Err(SqmError::InvalidParameters(format!("step {h} must be positive")));
        }
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        let (fp, fm) = (family(&xp)?, family(&xm)?);
        if fp.len() != fm.len() {
            return Err(SqmError::DimensionMismatch(fp.len(), fm.len()));
        }
        deltas.push(
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| Ok(a.checked_add(&b.scale(-1.0))?.scale(0.5 / h)))
                .collect::<Result<_>>()?,
        );
    }
    let n = x.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = deltas[i]
                .iter()
                .zip(&deltas[j])
                .map(|(a, b)| a.adjoint().trace_product(b).map(|z| z.re))
                .sum::<Result<f64>>()?;
            if !v.is_finite() {
                return Err(SqmError::NonFinite("family metric"));
            }
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RiemannianPrior {
    /// `√det g` per point; zero where flagged.
    pub density: Vec<f64>,
    /// Points where `det g ≤ tol`.
    pub degenerate: Vec<usize>,
}

/// `√det g` with `g_ij = Re Tr[∂ᵢE ∂ⱼE]` at every point of a grid space.
pub fn riemannian_prior<F>(space: &PerceptionSpace, experience_at: F, steps: &[f64], tol: f64) -> Result<RiemannianPrior>
where
    F: Fn(&[f64]) -> Result<Operator> + Sync,
{
    if space.coord_dim() == 0 {
        return Err(SqmError::InvalidParameters("riemannian prior needs a grid space".into()));
    }
    let dets = (0..space.len())
        .into_par_iter()
        .map(|i| {
            let p = space.point(i)?;
            let g = gram_metric(|x| Ok(vec![experience_at(x)?]), p.coords, steps)?;
            Ok(g.determinant())
        })
        .collect::<Result<Vec<f64>>>()?;
    let degenerate = dets.iter().enumerate().filter(|(_, d)| **d <= tol).map(|(i, _)| i).collect();
    let density = dets.iter().map(|d| if *d > tol { d.sqrt() } else { 0.0 }).collect();
    Ok(RiemannianPrior { density, degenerate })
}

fn realize_for(spec: &ExperienceSpec, state: &State, tol: f64) -> Result<Operator> {
    realize(spec, Some(state), tol)
}

/// `E|ψ⟩ / ‖E|ψ⟩‖`.
pub fn relative_state(spec: &ExperienceSpec, psi: &DVector<C64>, tol: f64) -> Result<DVector<C64>> {
    let state = State::pure(psi)?;
    let e = realize_for(spec, &state, tol)?;
    let psi = psi / C64::new(psi.norm(), 0.0);
    let v = e.matrix() * &psi;
    let n = v.norm();
    if n <= tol {
        return Err(SqmError::ZeroNorm);
    }
    Ok(v / C64::new(n, 0.0))
}

/// `EρE / Tr[EρE]`.
pub fn relative_density(spec: &ExperienceSpec, state: &State, tol: f64) -> Result<State> {
    let e = realize_for(spec, state, tol)?;
    let m = &(&e * state.operator()) * &e;
    let tr = m.trace().re;
    if tr <= tol {
        return Err(SqmError::ZeroNorm);
    }
    State::normalized(&m, tol.max(1e-9))
}

/// `⟨EE′⟩⟨E′E⟩ / (⟨EE⟩⟨E′E′⟩)`.
pub fn overlap_fraction(a: &ExperienceSpec, b: &ExperienceSpec, state: &State, tol: f64) -> Result<f64> {
    let ea = realize_for(a, state, tol)?;
    let eb = realize_for(b, state, tol)?;
    let aa = state.expectation(&(&ea * &ea))?.re;
    let bb = state.expectation(&(&eb * &eb))?.re;
    if aa <= tol || bb <= tol {
        return Err(SqmError::ZeroNorm);
    }
    let ab = state.expectation(&(&ea * &eb))?;
    let ba = state.expectation(&(&eb * &ea))?;
    Ok((ab * ba).re / (aa * bb))
}

/// Indices drawn with probability proportional to `m · w₀`.
pub fn sample_points<R: Rng + ?Sized>(profile: &MeasureProfile, count: usize, rng: &mut R) -> Result<Vec<usize>> {
    profile.require_total()?;
    let mass: Vec<f64> = profile.density.iter().zip(profile.space.weights()).map(|(m, w)| m * w).collect();
    let dist = WeightedIndex::new(&mass).map_err(|e| SqmError::InvalidParameters(e.to_string()))?;
    Ok((0..count).map(|_| dist.sample(rng)).collect())
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `values` and
/// the uniform CDF on `[0, 1]`.
pub fn ks_statistic_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileRow {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub coords: Vec<f64>,
    pub weight: f64,
    pub density: f64,
    #[serde(flatten)]
    pub typicalities: Typicalities,
}

pub fn profile_rows(profile: &MeasureProfile) -> Result<Vec<ProfileRow>> {
    let typ = all_typicalities(profile)?;
    Ok(profile
        .space
        .points()
        .zip(typ)
        .map(|(p, t)| ProfileRow {
            index: p.index,
            label: p.label.map(str::to_owned),
            coords: p.coords.to_vec(),
            weight: profile.space.weights[p.index],
            density: profile.density[p.index],
            typicalities: t,
        })
        .collect())
}

pub fn write_profile_csv<W: Write>(w: W, profile: &MeasureProfile) -> Result<()> {
    let ser = |e: csv::Error| SqmError::Serialization(e.to_string());
    let mut out = csv::Writer::from_writer(w);
    let names: Vec<String> = match profile.space.kind() {
        SpaceKind::Discrete { .. } => vec!["label".into()],
        SpaceKind::Grid { axes } => axes.iter().map(|a| a.name.clone()).collect(),
    };
    let mut header = vec!["index".to_string()];
    header.extend(names);
    header.extend(["weight", "density", "T", "T_r", "T_d"].map(String::from));
    out.write_record(&header).map_err(ser)?;
    for row in profile_rows(profile)? {
        let mut rec = vec![row.index.to_string()];
        match row.label {
            Some(l) => rec.push(l),
            None => rec.extend(row.coords.iter().map(f64::to_string)),
        }
        rec.extend(
            [row.weight, row.density, row.typicalities.typicality, row.typicalities.reversed, row.typicalities.dual]
                .map(|x| x.to_string()),
        );
        out.write_record(&rec).map_err(ser)?;
    }
    out.flush().map_err(|e| SqmError::Serialization(e.to_string()))
}
