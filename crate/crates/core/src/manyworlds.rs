//! Ordered projector decompositions of the identity (flag manifolds), the
//! family metric, and the decoherence functional on replicated copies of the
//! Hilbert space, with the measure reconstruction it allows.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SqmError};
use crate::measure::gram_metric;
use crate::operator::{haar_unitary_with, Operator, State, C64};
use crate::toy::{estimate, sharded_count, McEstimate};

/// Tolerance for the decomposition invariants.
pub const DECOMPOSITION_TOL: f64 = 1e-10;

/// Largest number of histories `reconstruct_measures` will enumerate.
pub const MAX_HISTORIES: usize = 1 << 20;

pub fn validate_partition(dim: usize, ranks: &[usize]) -> Result<()> {
    if dim == 0 || ranks.is_empty() || ranks.contains(&0) || ranks.iter().sum::<usize>() != dim {
        return Err(SqmError::InvalidPartition { dim, ranks: ranks.to_vec() });
    }
    Ok(())
}

/// Real dimension `d² − Σ rᵢ²` of the flag manifold.
pub fn manifold_dimension(dim: usize, ranks: &[usize]) -> Result<usize> {
    validate_partition(dim, ranks)?;
    Ok(dim * dim - ranks.iter().map(|r| r * r).sum::<usize>())
}

/// An ordered set of orthogonal projectors summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorDecomposition {
    dim: usize,
    ranks: Vec<usize>,
    projectors: Vec<Operator>,
}

impl ProjectorDecomposition {
    /// Ranks are read off the traces.
    pub fn new(projectors: Vec<Operator>, tol: f64) -> Result<Self> {
        let first = projectors.first().ok_or(SqmError::EmptyFamily)?;
        let dim = first.dim();
        let mut ranks = Vec::with_capacity(projectors.len());
        for p in &projectors {
            p.same_dim(first)?;
            let t = p.trace().re;
            let r = t.round();
            if (t - r).abs() > tol || r < 1.0 {
                return Err(SqmError::BadTrace(t));
            }
            ranks.push(r as usize);
        }
        let d = Self { dim, ranks, projectors };
        d.validate(tol)?;
        Ok(d)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        validate_partition(self.dim, &self.ranks)?;
        if self.projectors.len() != self.ranks.len() {
            return Err(SqmError::DimensionMismatch(self.ranks.len(), self.projectors.len()));
        }
        let mut sum = Operator::zeros(self.dim);
        for (p, &r) in self.projectors.iter().zip(&self.ranks) {
            p.same_dim(&sum)?;
            if !p.is_projector(tol) {
                return Err(SqmError::NotProjector(p.idempotence_error().max(p.hermiticity_error())));
            }
            if (p.trace().re - r as f64).abs() > tol {
                return Err(SqmError::BadTrace(p.trace().re));
            }
            sum = &sum + p;
        }
        let completeness = (&sum - &Operator::identity(self.dim)).max_abs();
        if completeness > tol {
            return Err(SqmError::InvalidParameters(format!("projectors sum to identity only within {completeness:e}")));
        }
        for (i, p) in self.projectors.iter().enumerate() {
            for q in &self.projectors[i + 1..] {
                let overlap = (p * q).max_abs();
                if overlap > tol {
                    return Err(SqmError::NonCommuting(overlap));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn projectors(&self) -> &[Operator] {
        &self.projectors
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<&Operator> {
        self.projectors.get(index).ok_or(SqmError::OutOfRange { index, len: self.len() })
    }

    /// `U Pᵢ U†` for each projector.
    pub fn conjugate(&self, u: &Operator) -> Result<Self> {
        u.same_dim(&self.projectors[0])?;
        let ud = u.adjoint();
        let projectors = self.projectors.iter().map(|p| &(u * p) * &ud).collect();
        Ok(Self { dim: self.dim, ranks: self.ranks.clone(), projectors })
    }
}

#[derive(Serialize, Deserialize)]
struct DecompositionJson {
    dim: usize,
    ranks: Vec<usize>,
    projectors: Vec<Operator>,
}

impl Serialize for ProjectorDecomposition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DecompositionJson { dim: self.dim, ranks: self.ranks.clone(), projectors: self.projectors.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProjectorDecomposition {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let js = DecompositionJson::deserialize(d)?;
        let dec = Self { dim: js.dim, ranks: js.ranks, projectors: js.projectors };
        dec.validate(1e-8).map_err(serde::de::Error::custom)?;
        Ok(dec)
    }
}

/// Projectors onto consecutive column blocks of a Haar unitary.
pub fn sample_decomposition_with<R: Rng + ?Sized>(dim: usize, ranks: &[usize], rng: &mut R) -> Result<ProjectorDecomposition> {
    validate_partition(dim, ranks)?;
    let u = haar_unitary_with(dim, rng);
    let mut start = 0;
    let mut projectors = Vec::with_capacity(ranks.len());
    for &r in ranks {
        let block = u.matrix().columns(start, r);
        projectors.push(Operator::new(block * block.adjoint())?);
        start += r;
    }
    Ok(ProjectorDecomposition { dim, ranks: ranks.to_vec(), projectors })
}

pub fn sample_decomposition(dim: usize, ranks: &[usize], seed: u64) -> Result<ProjectorDecomposition> {
    sample_decomposition_with(dim, ranks, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `σ[Pᵢ]` for each projector.
pub fn density_at(decomposition: &ProjectorDecomposition, state: &State) -> Result<Vec<f64>> {
    decomposition.projectors.iter().map(|p| Ok(state.expectation(p)?.re)).collect()
}

/// Haar volume fraction of the decompositions accepted by `member`.
pub fn flag_region_volume<F>(dim: usize, ranks: &[usize], samples: u64, seed: u64, member: F) -> Result<McEstimate>
where
    F: Fn(&ProjectorDecomposition) -> bool + Sync,
{
    validate_partition(dim, ranks)?;
    if samples == 0 {
        return Err(SqmError::InvalidParameters("need at least one sample".into()));
    }
    let hits = sharded_count(samples, seed, |rng| {
        let d = sample_decomposition_with(dim, ranks, rng).expect("partition checked");
        member(&d)
    });
    Ok(estimate(hits, samples, seed))
}

/// Metric `g_ij = Σ_α Re Tr[ΔᵢC_α† ΔⱼC_α]` at each point, by central differences.
pub fn family_metric<F>(family: F, points: &[Vec<f64>], steps: &[f64]) -> Result<Vec<DMatrix<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<Operator>>,
{
    points.iter().map(|x| gram_metric(&family, x, steps)).collect()
}

/// Step sizes of `1e-4` times each coordinate range.
pub fn default_steps(ranges: &[(f64, f64)]) -> Vec<f64> {
    ranges.iter().map(|(lo, hi)| 1e-4 * (hi - lo).abs()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricEstimate {
    /// Richardson combination `(4 g(h/2) − g(h)) / 3`.
    pub metric: DMatrix<f64>,
    pub coarse: DMatrix<f64>,
    /// Largest entry of `|g(h/2) − g(h)|`.
    pub discrepancy: f64,
}

pub fn family_metric_richardson<F>(family: F, x: &[f64], steps: &[f64]) -> Result<MetricEstimate>
where
    F: Fn(&[f64]) -> Result<Vec<Operator>>,
{
    let coarse = gram_metric(&family, x, steps)?;
    let half: Vec<f64> = steps.iter().map(|h| h / 2.0).collect();
    let fine = gram_metric(&family, x, &half)?;
    let discrepancy = (&fine - &coarse).abs().max();
    Ok(MetricEstimate { metric: (&fine * 4.0 - &coarse) / 3.0, coarse, discrepancy })
}

/// `√det g`, the density of the induced volume.
pub fn volume_density(g: &DMatrix<f64>) -> f64 {
    g.determinant().max(0.0).sqrt()
}

/// A history: one projector index per step.
pub type History = Vec<usize>;

/// `D(h, h′) = ∏ₖ σ[P(h′ₖ) P(hₖ)]` over one decomposition per step, with
/// state `σ` on every copy.
#[derive(Clone, Debug)]
pub struct ReplicatedFunctional {
    state: State,
    steps: Vec<ProjectorDecomposition>,
}

impl ReplicatedFunctional {
    pub fn new(state: State, steps: Vec<ProjectorDecomposition>) -> Result<Self> {
        if steps.is_empty() {
            return Err(SqmError::EmptyFamily);
        }
        for d in &steps {
            if d.dim() != state.dim() {
                return Err(SqmError::DimensionMismatch(state.dim(), d.dim()));
            }
        }
        Ok(Self { state, steps })
    }

    pub fn steps(&self) -> &[ProjectorDecomposition] {
        &self.steps
    }

    fn check(&self, h: &[usize]) -> Result<()> {
        if h.len() != self.steps.len() {
            return Err(SqmError::DimensionMismatch(self.steps.len(), h.len()));
        }
        for (k, &i) in h.iter().enumerate() {
            self.steps[k].get(i)?;
        }
        Ok(())
    }

    pub fn atomic(&self, h: &[usize], hp: &[usize]) -> Result<C64> {
        self.check(h)?;
        self.check(hp)?;
        let mut z = C64::new(1.0, 0.0);
        for (k, (&i, &j)) in h.iter().zip(hp).enumerate() {
            if i != j {
                // Distinct members of one decomposition are orthogonal.
                return Ok(C64::new(0.0, 0.0));
            }
            let p = &self.steps[k].projectors[i];
            z *= self.state.expectation(&(p * p))?;
        }
        Ok(z)
    }

    /// Bilinear extension to unit-coefficient sums of atomic histories.
    pub fn evaluate(&self, h: &[History], hp: &[History]) -> Result<C64> {
        let mut z = C64::new(0.0, 0.0);
        for a in h {
            for b in hp {
                z += self.atomic(a, b)?;
            }
        }
        Ok(z)
    }

    /// The general product form without the orthogonality shortcut.
    pub fn atomic_direct(&self, h: &[usize], hp: &[usize]) -> Result<C64> {
        self.check(h)?;
        self.check(hp)?;
        let mut z = C64::new(1.0, 0.0);
        for (k, (&i, &j)) in h.iter().zip(hp).enumerate() {
            z *= self.state.expectation(&(&self.steps[k].projectors[j] * &self.steps[k].projectors[i]))?;
        }
        Ok(z)
    }

    pub fn history_count(&self) -> usize {
        self.steps.iter().map(|d| d.len()).product()
    }

    /// All histories in lexicographic order.
    pub fn histories(&self) -> Result<Vec<History>> {
        let n = self.steps.iter().try_fold(1usize, |acc, d| acc.checked_mul(d.len()));
        match n {
            Some(n) if n <= MAX_HISTORIES => {}
            _ => return Err(SqmError::TooLarge(n.unwrap_or(usize::MAX))),
        }
        let mut out = vec![Vec::new()];
        for d in &self.steps {
            out = out
                .into_iter()
                .flat_map(|h| {
                    (0..d.len()).map(move |i| {
                        let mut h = h.clone();
                        h.push(i);
                        h
                    })
                })
                .collect();
        }
        Ok(out)
    }

    /// Probabilities `D(h, h) = ∏ₖ σ[P(hₖ)]` per history.
    pub fn probabilities(&self) -> Result<Vec<(History, f64)>> {
        let per_step: Vec<Vec<f64>> = self.steps.iter().map(|d| density_at(d, &self.state)).collect::<Result<_>>()?;
        Ok(self
            .histories()?
            .into_iter()
            .map(|h| {
                let p = h.iter().enumerate().map(|(k, &i)| per_step[k][i]).product();
                (h, p)
            })
            .collect())
    }
}

/// One term `λ P` of a spectral experience operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectralTerm {
    pub coefficient: f64,
    pub decomposition: usize,
    pub projector: usize,
}

/// `E(p) = Σ λ P` for each perception `p`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectralExperience {
    pub perceptions: Vec<Vec<SpectralTerm>>,
}

impl SpectralExperience {
    pub fn new(perceptions: Vec<Vec<SpectralTerm>>) -> Result<Self> {
        for t in perceptions.iter().flatten() {
            if !(t.coefficient >= 0.0 && t.coefficient.is_finite()) {
                return Err(SqmError::NegativeMeasure(t.coefficient, "spectral coefficient".into()));
            }
        }
        Ok(Self { perceptions })
    }

    /// Perception `p` as `Σ_i λ_i Pᵖ_i` over decomposition `p`.
    pub fn diagonal(coefficients: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            coefficients
                .into_iter()
                .enumerate()
                .map(|(p, ls)| {
                    ls.into_iter()
                        .enumerate()
                        .map(|(i, coefficient)| SpectralTerm { coefficient, decomposition: p, projector: i })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn experience(&self, p: usize, steps: &[ProjectorDecomposition]) -> Result<Operator> {
        let terms = self.perceptions.get(p).ok_or(SqmError::OutOfRange { index: p, len: self.perceptions.len() })?;
        let dim = steps.first().ok_or(SqmError::EmptyFamily)?.dim();
        let mut e = Operator::zeros(dim);
        for t in terms {
            let d = steps.get(t.decomposition).ok_or(SqmError::OutOfRange { index: t.decomposition, len: steps.len() })?;
            e = e.checked_add(&d.get(t.projector)?.scale(t.coefficient))?;
        }
        Ok(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Reconstruction {
    /// `Σ_h λ_{h_p} Pr(h)` per perception.
    pub from_histories: Vec<f64>,
    /// `σ[E(p)]` per perception.
    pub direct: Vec<f64>,
    pub max_difference: f64,
}

pub fn reconstruct_measures(
    state: &State,
    spectral: &SpectralExperience,
    steps: &[ProjectorDecomposition],
) -> Result<Reconstruction> {
    let functional = ReplicatedFunctional::new(state.clone(), steps.to_vec())?;
    let probs = functional.probabilities()?;
    let mut from_histories = Vec::with_capacity(spectral.perceptions.len());
    let mut direct = Vec::with_capacity(spectral.perceptions.len());
    for (p, terms) in spectral.perceptions.iter().enumerate() {
        let e = spectral.experience(p, steps)?;
        direct.push(state.expectation(&e)?.re);
        let mut sum = 0.0;
        for (h, pr) in &probs {
            for t in terms {
                if h[t.decomposition] == t.projector {
                    sum += t.coefficient * pr;
                }
            }
        }
        from_histories.push(sum);
    }
    let max_difference = from_histories.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Reconstruction { from_histories, direct, max_difference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{bloch_projector, haar_random_unitary};
    use nalgebra::DVector;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn random_state(dim: usize, seed: u64) -> State {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        State::normalized(&Operator::new(&g * g.adjoint()).unwrap(), 1e-9).unwrap()
    }

    #[test]
    fn manifold_dimensions() {
        assert_eq!(manifold_dimension(2, &[1, 1]).unwrap(), 2);
        assert_eq!(manifold_dimension(3, &[1, 2]).unwrap(), 4);
        assert_eq!(manifold_dimension(4, &[4]).unwrap(), 0);
        assert!(manifold_dimension(3, &[1, 1]).is_err());
        assert!(manifold_dimension(2, &[2, 0]).is_err());
    }

    #[test]
    fn sampled_decompositions_valid() {
        for seed in 0..100 {
            let d = sample_decomposition(3, &[1, 2], seed).unwrap();
            d.validate(DECOMPOSITION_TOL).unwrap();
        }
        for dim in 1..=8 {
            let ranks: Vec<usize> = match dim {
                1 => vec![1],
                _ => vec![1, dim - 1],
            };
            for seed in 0..50 {
                sample_decomposition(dim, &ranks, seed).unwrap().validate(DECOMPOSITION_TOL).unwrap();
                let ones = vec![1; dim];
                sample_decomposition(dim, &ones, seed).unwrap().validate(DECOMPOSITION_TOL).unwrap();
            }
        }
        assert!(matches!(sample_decomposition(3, &[2, 2], 0), Err(SqmError::InvalidPartition { .. })));
    }

    #[test]
    fn new_rejects_non_decompositions() {
        let p = bloch_projector(0.3, 0.0);
        let q = bloch_projector(1.0, 0.0);
        assert!(ProjectorDecomposition::new(vec![p.clone(), q], 1e-10).is_err());
        let ok = ProjectorDecomposition::new(vec![p.clone(), &Operator::identity(2) - &p], 1e-10).unwrap();
        assert_eq!(ok.ranks(), &[1, 1]);
        assert!(ProjectorDecomposition::new(vec![p], 1e-10).is_err());
    }

    #[test]
    fn density_examples() {
        let d = sample_decomposition(4, &[1, 3], 9).unwrap();
        let mixed = density_at(&d, &State::maximally_mixed(4)).unwrap();
        assert!((mixed[0] - 0.25).abs() < 1e-12 && (mixed[1] - 0.75).abs() < 1e-12);
        let u = haar_random_unitary(4, 9);
        let psi = DVector::from_iterator(4, u.matrix().column(0).iter().cloned());
        let inside = density_at(&d, &State::pure(&psi).unwrap()).unwrap();
        assert!((inside[0] - 1.0).abs() < 1e-12 && inside[1].abs() < 1e-12);
        for seed in 0..20 {
            let d = sample_decomposition(5, &[2, 1, 2], seed).unwrap();
            let v = density_at(&d, &random_state(5, seed)).unwrap();
            assert!(v.iter().all(|&x| x >= -1e-10));
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(density_at(&d, &State::maximally_mixed(3)).is_err());
    }

    #[test]
    fn density_is_conjugation_invariant() {
        for seed in 0..20 {
            let d = sample_decomposition(4, &[2, 1, 1], seed).unwrap();
            let s = random_state(4, seed + 100);
            let u = haar_random_unitary(4, seed + 200);
            let a = density_at(&d, &s).unwrap();
            let b = density_at(&d.conjugate(&u).unwrap(), &s.conjugate(&u).unwrap()).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn serde_round_trip_with_ranks_header() {
        let d = sample_decomposition(3, &[2, 1], 4).unwrap();
        let js = serde_json::to_value(&d).unwrap();
        assert_eq!(js["ranks"], serde_json::json!([2, 1]));
        let back: ProjectorDecomposition = serde_json::from_value(js.clone()).unwrap();
        assert_eq!(back, d);
        let mut bad = js;
        bad["ranks"] = serde_json::json!([1, 2]);
        assert!(serde_json::from_value::<ProjectorDecomposition>(bad).is_err());
    }

    #[test]
    fn metric_examples() {
        let constant = family_metric(|_| Ok(vec![bloch_projector(0.4, 0.2)]), &[vec![0.0, 1.0]], &[1e-4, 1e-4]).unwrap();
        assert!(constant[0].abs().max() == 0.0);

        let circle = |x: &[f64]| Ok(vec![bloch_projector(PI / 2.0, x[0])]);
        let steps = default_steps(&[(-PI, PI)]);
        for x in [-2.0, 0.0, 1.3] {
            let g = family_metric_richardson(circle, &[x], &steps).unwrap();
            assert!((g.metric[(0, 0)] - 0.5).abs() < 1e-8);
            assert!((volume_density(&g.metric) - 0.5f64.sqrt()).abs() < 1e-8);
        }

        let sphere = |x: &[f64]| Ok(vec![bloch_projector(x[0], x[1])]);
        let steps = default_steps(&[(0.0, PI), (-PI, PI)]);
        for t in [0.3, 1.0, 2.5] {
            let g = family_metric_richardson(sphere, &[t, 0.7], &steps).unwrap();
            assert!((volume_density(&g.metric) - t.sin() / 2.0).abs() < 1e-4);
            assert!(g.discrepancy < 1e-6);
            assert!((g.metric[(0, 1)] - g.metric[(1, 0)]).abs() == 0.0);
        }
    }

    #[test]
    fn family_metric_on_decomposition_families() {
        // Two-outcome family rotated by a one-parameter unitary.
        let fam = |x: &[f64]| {
            let p = bloch_projector(x[0], x[1]);
            Ok(vec![p.clone(), &Operator::identity(2) - &p])
        };
        let gs = family_metric(fam, &[vec![0.5, 0.1], vec![2.0, -1.0]], &[1e-4, 1e-4]).unwrap();
        for g in gs {
            let ev = g.clone().symmetric_eigenvalues();
            assert!(ev.iter().all(|&e| e >= -1e-8));
            assert!((g[(0, 1)] - g[(1, 0)]).abs() < 1e-15);
        }
    }

    #[test]
    fn haar_region_volume() {
        // For a rank-one projector in dimension 2, σ[P₁] for the north-pole
        // state is uniform on [0, 1].
        let up = State::bloch(0.0, 0.0);
        let est = flag_region_volume(2, &[1, 1], 40_000, 3, |d| up.expectation(&d.projectors()[0]).unwrap().re < 0.25).unwrap();
        assert!((est.estimate - 0.25).abs() < 4.0 * est.std_error);
    }

    #[test]
    fn functional_examples() {
        let d = sample_decomposition(3, &[1, 1, 1], 5).unwrap();
        let s = random_state(3, 5);
        let f = ReplicatedFunctional::new(s.clone(), vec![d.clone()]).unwrap();
        let born = density_at(&d, &s).unwrap();
        for (i, b) in born.iter().enumerate() {
            assert!((f.atomic(&[i], &[i]).unwrap().re - b).abs() < 1e-12);
        }
        assert!(f.atomic(&[3], &[0]).is_err());
        assert!(f.atomic(&[0, 0], &[0, 0]).is_err());
        assert!(ReplicatedFunctional::new(State::maximally_mixed(2), vec![d]).is_err());
    }

    fn functional_properties(dim: usize, steps: usize, seed: u64) {
        let decs: Vec<_> = (0..steps).map(|k| sample_decomposition(dim, &vec![1; dim], seed * 10 + k as u64).unwrap()).collect();
        let f = ReplicatedFunctional::new(random_state(dim, seed), decs).unwrap();
        let hs = f.histories().unwrap();
        let mut total = C64::new(0.0, 0.0);
        let mut diag = 0.0;
        for a in &hs {
            for b in &hs {
                let z = f.atomic_direct(a, b).unwrap();
                let w = f.atomic_direct(b, a).unwrap();
                assert!((z - w.conj()).norm() < 1e-12);
                if a == b {
                    assert!(z.re >= -1e-12);
                    diag += z.re;
                } else {
                    assert!(z.norm() <= 1e-10);
                }
                assert!((z - f.atomic(a, b).unwrap()).norm() < 1e-12);
                total += z;
            }
        }
        assert!((diag - 1.0).abs() < 1e-9);
        assert!((total - C64::new(1.0, 0.0)).norm() < 1e-9);
        let sum = f.evaluate(&hs[..2], &hs[..2]).unwrap();
        let parts = f.atomic(&hs[0], &hs[0]).unwrap() + f.atomic(&hs[1], &hs[1]).unwrap();
        assert!((sum - parts).norm() < 1e-12);
    }

    #[test]
    fn functional_properties_on_random_instances() {
        for seed in 0..10 {
            functional_properties(2, 2, seed);
            functional_properties(3, 2, seed);
        }
    }

    #[test]
    fn reconstruction_examples() {
        let d = sample_decomposition(2, &[1, 1], 1).unwrap();
        let s = random_state(2, 1);
        let single = SpectralExperience::diagonal(vec![vec![1.0, 0.0]]).unwrap();
        let r = reconstruct_measures(&s, &single, std::slice::from_ref(&d)).unwrap();
        assert!((r.from_histories[0] - density_at(&d, &s).unwrap()[0]).abs() < 1e-12);
        let zero = SpectralExperience::diagonal(vec![vec![0.0, 0.0]]).unwrap();
        assert_eq!(reconstruct_measures(&s, &zero, std::slice::from_ref(&d)).unwrap().from_histories[0], 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let decs = vec![d, sample_decomposition(2, &[1, 1], 2).unwrap()];
        let spec = SpectralExperience::diagonal((0..2).map(|_| (0..2).map(|_| rng.random::<f64>()).collect()).collect()).unwrap();
        assert!(reconstruct_measures(&s, &spec, &decs).unwrap().max_difference < 1e-10);
        assert!(SpectralExperience::diagonal(vec![vec![-1.0]]).is_err());
        let bad = SpectralExperience::new(vec![vec![SpectralTerm { coefficient: 1.0, decomposition: 5, projector: 0 }]]).unwrap();
        assert!(reconstruct_measures(&s, &bad, &decs).is_err());
    }

    #[test]
    fn history_guard() {
        let decs: Vec<_> = (0..21).map(|k| sample_decomposition(2, &[1, 1], k).unwrap()).collect();
        let f = ReplicatedFunctional::new(State::maximally_mixed(2), decs).unwrap();
        assert!(matches!(f.histories(), Err(SqmError::TooLarge(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn reconstruction_matches_direct(seed in 0u64..10_000, dim in 2usize..4, steps in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let decs: Vec<_> = (0..steps).map(|_| sample_decomposition_with(dim, &vec![1; dim], &mut rng).unwrap()).collect();
            let spec = SpectralExperience::diagonal(
                (0..steps).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect(),
            ).unwrap();
            let r = reconstruct_measures(&random_state(dim, seed), &spec, &decs).unwrap();
            prop_assert!(r.max_difference < 1e-9);
        }
    }
}
