//! SQMn: measure densities raised to a power `n`, the gaussian toy model
//! and its posteriors over `n`, Bayesian updating over hypotheses, and the
//! digit-perception experiment.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Result, SqmError};
use crate::quad::{bisect, integrate, integrate_pieces};

/// Exponential-tail cutoff for improper integrals over `n`, in units of `p²n`.
pub const TAIL_CUTOFF: f64 = 60.0;

const QUAD_TOL: f64 = 1e-13;

pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `m ↦ f(m)`; the built-in choice is `mⁿ`.
#[derive(Clone)]
pub enum DensityTransform {
    PowerLaw,
    /// `(m, n) ↦ f`, must return a nonnegative finite value.
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for DensityTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw => f.write_str("PowerLaw"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SqmnModel {
    pub exponent: f64,
    pub transform: DensityTransform,
}

impl SqmnModel {
    pub fn power_law(exponent: f64) -> Self {
        Self { exponent, transform: DensityTransform::PowerLaw }
    }

    pub fn with_transform(exponent: f64, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { exponent, transform: DensityTransform::Custom(Arc::new(f)) }
    }

    /// Transformed density; `0⁰ = 1`, so `n = 0` is a counting measure.
    pub fn apply(&self, m: f64) -> Result<f64> {
        if !(m >= 0.0 && m.is_finite()) {
            return Err(SqmError::InvalidParameters(format!("density {m} must be nonnegative")));
        }
        let out = match &self.transform {
            DensityTransform::PowerLaw => {
                if self.exponent == 0.0 {
                    1.0
                } else {
                    m.powf(self.exponent)
                }
            }
            DensityTransform::Custom(f) => f(m, self.exponent),
        };
        if !(out >= 0.0) || out.is_nan() {
            return Err(SqmError::InvalidParameters(format!("transform gave {out}")));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GaussianTypicalities {
    pub typicality: f64,
    pub reversed: f64,
    pub dual: f64,
}

/// Typicalities of an observed `p` under `m(p)ⁿ = e^{−np²/2}`.
///
/// For `n < 0` the density grows without bound, so every observation has
/// `T = T_d = 0`. For `n = 0` the density is constant and every point ties
/// with every other, giving 1 for all three.
pub fn gaussian_typicalities(n: f64, p: f64) -> GaussianTypicalities {
    if n < 0.0 {
        return GaussianTypicalities { typicality: 0.0, reversed: 1.0, dual: 0.0 };
    }
    if n == 0.0 {
        return GaussianTypicalities { typicality: 1.0, reversed: 1.0, dual: 1.0 };
    }
    let t = erfc((n * p * p / 2.0).sqrt());
    GaussianTypicalities { typicality: t, reversed: 1.0 - t, dual: 1.0 - (1.0 - 2.0 * t).abs() }
}

pub fn gaussian_typicality(n: f64, p: f64) -> f64 {
    gaussian_typicalities(n, p).typicality
}

pub fn gaussian_reversed(n: f64, p: f64) -> f64 {
    gaussian_typicalities(n, p).reversed
}

pub fn gaussian_dual(n: f64, p: f64) -> f64 {
    gaussian_typicalities(n, p).dual
}

fn require_observation(p: f64) -> Result<()> {
    if p == 0.0 {
        Err(SqmError::DegenerateObservation)
    } else if !p.is_finite() {
        Err(SqmError::NonFinite("observation"))
    } else {
        Ok(())
    }
}

/// `P(n|p) = p² erfc(√(p²n/2))` under the uniform prior `dn` on `n > 0`.
pub fn posterior_density(p: f64, n: f64) -> Result<f64> {
    require_observation(p)?;
    Ok(if n > 0.0 { p * p * erfc((p * p * n / 2.0).sqrt()) } else { 0.0 })
}

/// Large-`n` form `√(2/(πp²n)) e^{−p²n/2}`.
pub fn posterior_asymptotic(p: f64, n: f64) -> f64 {
    (2.0 / (std::f64::consts::PI * p * p * n)).sqrt() * (-p * p * n / 2.0).exp()
}

fn double_factorial_odd(m: u32) -> f64 {
    (0..=m).map(|k| (2 * k + 1) as f64).product()
}

/// `E[nᵐ | p] = (2m+1)!! / ((m+1) p^{2m})`.
pub fn posterior_moment(p: f64, m: u32) -> Result<f64> {
    require_observation(p)?;
    Ok(double_factorial_odd(m) / ((m as f64 + 1.0) * (p * p).powi(m as i32)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn posterior_mean_std(p: f64) -> Result<MeanStd> {
    let mean = posterior_moment(p, 1)?;
    let var = posterior_moment(p, 2)? - mean * mean;
    Ok(MeanStd { mean, std: var.sqrt() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Integral {
    pub value: f64,
    /// Upper bound on the neglected part beyond the cutoff.
    pub tail_bound: f64,
}

/// Bound on `∫_{n₀}^∞ nᵐ p² erfc(√(p²n/2)) dn` from
/// `erfc(x) ≤ e^{−x²}/(x√π)` and the incomplete gamma function.
fn erfc_tail_bound(p: f64, m: u32, n0: f64) -> f64 {
    let a = p * p / 2.0;
    let x0 = (a * n0).sqrt();
    let an0 = a * n0;
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..=m {
        term *= an0 / k as f64;
        series += term;
    }
    let fact: f64 = (1..=m).map(|k| k as f64).product();
    let gamma_upper = (-an0).exp() * series * fact;
    p * p * gamma_upper / (a.powi(m as i32 + 1) * x0 * std::f64::consts::PI.sqrt())
}

/// `∫ nᵐ P(n|p) dn` by quadrature up to `p²n = 60`, with a bound on the rest.
pub fn posterior_moment_quadrature(p: f64, m: u32) -> Result<Integral> {
    require_observation(p)?;
    let n0 = TAIL_CUTOFF / (p * p);
    let f = |n: f64| n.powi(m as i32) * posterior_density(p, n).unwrap_or(0.0);
    let value = integrate_pieces(f, &[0.0, 1.0 / (p * p), n0], QUAD_TOL);
    Ok(Integral { value, tail_bound: erfc_tail_bound(p, m, n0) })
}

/// Average of `P(n|p)` over `p` drawn from the normalized unit gaussian,
/// `(2/π)(arctan(1/√n) − √n/(n+1))`. Zero for `n ≤ 0`.
pub fn averaged_posterior(n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let s = n.sqrt();
    2.0 / std::f64::consts::PI * ((1.0 / s).atan() - s / (n + 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DualNormalization {
    /// Normalization constant `N`.
    pub n: f64,
    pub n_inv: f64,
    /// Positive root of `erf(x) = erfc(x)`.
    pub x1: f64,
}

/// Normalization of `p² min(erfc, erf)(√(p²n/2))` over `n > 0`.
///
/// `N⁻¹ = 4∫₀^∞ x min(erf x, erfc x) dx = 1 + 2x₁² − 8∫₀^{x₁} x erfc(x) dx`.
pub fn dual_normalization() -> DualNormalization {
    let x1 = bisect(|x| erfc(x) - 0.5, 0.0, 2.0, 1e-15).expect("erfc crosses 1/2 on [0, 2]");
    let inner = integrate(|x| x * erfc(x), 0.0, x1, QUAD_TOL);
    let n_inv = 1.0 + 2.0 * x1 * x1 - 8.0 * inner;
    DualNormalization { n: 1.0 / n_inv, n_inv, x1 }
}

/// Posterior for `n` with the dual typicality as likelihood and uniform prior.
pub fn dual_posterior(p: f64, n: f64) -> Result<f64> {
    dual_posterior_with(&dual_normalization(), p, n)
}

pub fn dual_posterior_with(norm: &DualNormalization, p: f64, n: f64) -> Result<f64> {
    require_observation(p)?;
    if n <= 0.0 {
        return Ok(0.0);
    }
    let x = (p * p * n / 2.0).sqrt();
    Ok(norm.n * p * p * erfc(x).min(erf(x)))
}

/// `∫ nᵐ P_d(n|p) dn`, split at the kink `x = x₁` and at `p²n = 60`.
pub fn dual_posterior_moment(p: f64, m: u32) -> Result<Integral> {
    require_observation(p)?;
    let norm = dual_normalization();
    let kink = 2.0 * norm.x1 * norm.x1 / (p * p);
    let n0 = TAIL_CUTOFF / (p * p);
    let f = |n: f64| n.powi(m as i32) * dual_posterior_with(&norm, p, n).unwrap_or(0.0);
    let value = integrate_pieces(f, &[0.0, kink, 1.0 / (p * p), n0], QUAD_TOL);
    Ok(Integral { value, tail_bound: norm.n * erfc_tail_bound(p, m, n0) })
}

pub fn dual_posterior_mean_std(p: f64) -> Result<MeanStd> {
    let m1 = dual_posterior_moment(p, 1)?.value;
    let m2 = dual_posterior_moment(p, 2)?.value;
    Ok(MeanStd { mean: m1, std: (m2 - m1 * m1).sqrt() })
}

/// `(n, density)` rows of `P(n|p)` on a grid; `dual` selects the dual
/// posterior.
pub fn posterior_curve(p: f64, grid: &[f64], dual: bool) -> Result<Vec<(f64, f64)>> {
    let norm = dual_normalization();
    grid.iter()
        .map(|&n| {
            let d = if dual { dual_posterior_with(&norm, p, n)? } else { posterior_density(p, n)? };
            Ok((n, d))
        })
        .collect()
}

pub fn write_posterior_csv<W: Write>(w: W, rows: &[(f64, f64)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let ser = |e: csv::Error| SqmError::Serialization(e.to_string());
    out.write_record(["n", "density"]).map_err(ser)?;
    for (n, d) in rows {
        out.write_record([n.to_string(), d.to_string()]).map_err(ser)?;
    }
    out.flush().map_err(|e| SqmError::Serialization(e.to_string()))
}

type Evaluator<'a, I> = Box<dyn Fn(&I) -> f64 + Send + Sync + 'a>;

pub struct Hypothesis<'a, I> {
    pub id: String,
    pub prior: f64,
    pub typicality: Evaluator<'a, I>,
}

/// Competing hypotheses with unnormalized priors and typicality likelihoods.
pub struct HypothesisSet<'a, I> {
    entries: Vec<Hypothesis<'a, I>>,
}

impl<I> fmt::Debug for HypothesisSet<'_, I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.entries.iter().map(|h| (&h.id, h.prior)))
            .finish()
    }
}

impl<'a, I> Default for HypothesisSet<'a, I> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<'a, I> HypothesisSet<'a, I> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        id: impl Into<String>,
        prior: f64,
        typicality: impl Fn(&I) -> f64 + Send + Sync + 'a,
    ) -> Result<()> {
        let id = id.into();
        if !(prior > 0.0 && prior.is_finite()) {
            return Err(SqmError::InvalidParameters(format!("prior of {id:?} must be positive")));
        }
        if self.entries.iter().any(|h| h.id == id) {
            return Err(SqmError::DuplicateLabel(id));
        }
        self.entries.push(Hypothesis { id, prior, typicality: Box::new(typicality) });
        Ok(())
    }

    pub fn with(mut self, id: impl Into<String>, prior: f64, typicality: impl Fn(&I) -> f64 + Send + Sync + 'a) -> Result<Self> {
        self.push(id, prior, typicality)?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorWeight {
    pub id: String,
    pub probability: f64,
}

/// `P(Hᵢ|p) = P(Hᵢ) Tᵢ(p) / Σⱼ P(Hⱼ) Tⱼ(p)`.
pub fn bayes_update<I>(set: &HypothesisSet<'_, I>, input: &I) -> Result<Vec<PosteriorWeight>> {
    if set.is_empty() {
        return Err(SqmError::EmptyFamily);
    }
    let mut joint = Vec::with_capacity(set.len());
    for h in &set.entries {
        let t = (h.typicality)(input);
        if !(t >= 0.0 && t.is_finite()) {
            return Err(SqmError::InvalidParameters(format!(
                "likelihood {t} of {:?} must be nonnegative",
                h.id
            )));
        }
        joint.push(h.prior * t);
    }
    let total: f64 = joint.iter().sum();
    if total <= 0.0 {
        return Err(SqmError::NoUpdate);
    }
    Ok(set
        .entries
        .iter()
        .zip(joint)
        .map(|(h, j)| PosteriorWeight { id: h.id.clone(), probability: j / total })
        .collect())
}

/// Prior `2^{−rank}` for a hypothesis ranked by complexity.
pub fn complexity_prior(rank: u32) -> f64 {
    0.5f64.powi(rank as i32)
}

/// `P_n(S₂|S) = m₂ⁿN₂ / (m₁ⁿN₁ + m₂ⁿN₂ + m₃ⁿN₃)` with `N₃ = 10ᵏ − N₁ − N₂`,
/// evaluated in log space.
pub fn digit_experiment(k: u32, n1: u64, n2: u64, m: [f64; 3], n: f64) -> Result<f64> {
    if k == 0 || k > 19 {
        return Err(SqmError::InvalidCounts(format!("digit count k = {k} must be in 1..=19")));
    }
    let total = 10u64.pow(k);
    if n1 == 0 || n2 == 0 || n1.checked_add(n2).is_none_or(|s| s > total) {
        return Err(SqmError::InvalidCounts(format!(
            "need positive N1, N2 with N1 + N2 ≤ 10^{k}"
        )));
    }
    if m.iter().any(|&x| !(x > 0.0 && x.is_finite())) || !n.is_finite() {
        return Err(SqmError::InvalidParameters("densities must be positive and finite".into()));
    }
    let n3 = total - n1 - n2;
    let counts = [n1, n2, n3];
    let logs: Vec<f64> = (0..3)
        .map(|i| {
            if counts[i] == 0 {
                f64::NEG_INFINITY
            } else {
                (counts[i] as f64).ln() + if n == 0.0 { 0.0 } else { n * m[i].ln() }
            }
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok((logs[1] - max).exp() / denom)
}

/// The worked choice `N₁ = 1`, `N₂ = 10^{k/2}`, `mᵢ = 1/Nᵢ`.
pub fn digit_experiment_canonical(k: u32, n: f64) -> Result<f64> {
    let (n1, n2) = canonical_counts(k)?;
    let n3 = 10u64.pow(k) - n1 - n2;
    digit_experiment(k, n1, n2, [1.0 / n1 as f64, 1.0 / n2 as f64, 1.0 / n3 as f64], n)
}

fn canonical_counts(k: u32) -> Result<(u64, u64)> {
    if !k.is_multiple_of(2) || k == 0 {
        return Err(SqmError::InvalidCounts(format!("canonical choice needs even k, got {k}")));
    }
    Ok((1, 10u64.pow(k / 2)))
}

/// `1 / (10^{(n−1)k/2} + 1 + 10^{−(n−1)k/2})`.
pub fn digit_experiment_approx(k: u32, n: f64) -> f64 {
    let x = (n - 1.0) * k as f64 / 2.0;
    1.0 / (10f64.powf(x) + 1.0 + 10f64.powf(-x))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfidenceBound {
    pub k: u32,
    pub level: f64,
    /// Largest `|n − 1|` not rejected at `level`.
    pub bound: f64,
}

/// Solves `digit_experiment_approx(k, n) = 1 − level` for `|n − 1|`.
///
/// The approximate probability never exceeds 1/3, so `level` must lie in
/// `(2/3, 1)`; the bound grows without limit as `level → 1` and shrinks to
/// zero as `level → 2/3`.
pub fn confidence_bound(k: u32, level: f64) -> Result<ConfidenceBound> {
    if k == 0 {
        return Err(SqmError::InvalidParameters("k must be at least 1".into()));
    }
    if !(level > 2.0 / 3.0 && level < 1.0) {
        return Err(SqmError::InvalidParameters(format!("level {level} must be in (2/3, 1)")));
    }
    let target = 1.0 - level;
    let f = |d: f64| digit_experiment_approx(k, 1.0 + d) - target;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
    }
    let bound = bisect(f, 0.0, hi, 1e-14)?;
    Ok(ConfidenceBound { k, level, bound })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Band {
    pub level: f64,
    pub low: f64,
    pub high: f64,
}

/// Range of `p` whose dual typicality under the unit gaussian is at least
/// `1 − level`.
pub fn gaussian_dual_band(level: f64) -> Result<Band> {
    if !(level > 0.0 && level < 1.0) {
        return Err(SqmError::InvalidParameters(format!("level {level} must be in (0, 1)")));
    }
    let t = (1.0 - level) / 2.0;
    let tp = |x: f64| erfc(x / std::f64::consts::SQRT_2);
    let low = bisect(|x| tp(x) - (1.0 - t), 0.0, 40.0, 1e-15)?;
    let high = bisect(|x| tp(x) - t, 0.0, 40.0, 1e-15)?;
    Ok(Band { level, low, high })
}

pub fn gaussian_99_band() -> Band {
    gaussian_dual_band(0.99).expect("valid level")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// 40-point Gauss–Legendre on `[a, b]`, nodes by Newton iteration.
    fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
        let n = 40;
        let mut sum = 0.0;
        for i in 1..=n {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            sum += w * f(0.5 * (b - a) * x + 0.5 * (a + b));
        }
        0.5 * (b - a) * sum
    }

    fn erf_oracle(x: f64) -> f64 {
        2.0 / PI.sqrt() * gauss_legendre(|t| (-t * t).exp(), 0.0, x)
    }

    #[test]
    fn erf_values() {
        assert_eq!(erf(0.0), 0.0);
        for x in [0.1, 0.5, 1.0, 1.7, 2.5, 3.0] {
            assert!((erf(x) - erf_oracle(x)).abs() < 1e-12, "x = {x}");
            assert!((erfc(x) - (1.0 - erf_oracle(x))).abs() < 1e-12);
            assert!((erf(-x) + erf(x)).abs() < 1e-16);
        }
        let x1 = dual_normalization().x1;
        assert!((x1 - 0.476936).abs() < 1e-6);
        assert!((erfc(x1) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gaussian_typicality_rules() {
        assert_eq!(gaussian_typicality(1.0, 0.0), 1.0);
        let neg = gaussian_typicalities(-0.5, 1.3);
        assert_eq!((neg.typicality, neg.reversed, neg.dual), (0.0, 1.0, 0.0));
        let zero = gaussian_typicalities(0.0, 1.3);
        assert_eq!((zero.typicality, zero.reversed, zero.dual), (1.0, 1.0, 1.0));
        for (n, p) in [(1.0, 0.3), (2.5, -1.0), (0.1, 4.0)] {
            let g = gaussian_typicalities(n, p);
            assert!((g.typicality + g.reversed - 1.0).abs() < 1e-15);
            assert!((g.dual - 2.0 * g.typicality.min(g.reversed)).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_typicality_matches_frequency() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        // Draw p from the measure e^{−p²/2}; T(1) is the fraction with |p′| ≥ 1.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let draws = 1_000_000;
        let hits = (0..draws)
            .filter(|_| {
                let x: f64 = StandardNormal.sample(&mut rng);
                x.abs() >= 1.0
            })
            .count();
        let freq = hits as f64 / draws as f64;
        let t = gaussian_typicality(1.0, 1.0);
        let sigma = (t * (1.0 - t) / draws as f64).sqrt();
        assert!((freq - t).abs() < 4.0 * sigma, "{freq} vs {t}");
    }

    #[test]
    fn posterior_density_cases() {
        assert_eq!(posterior_density(0.0, 1.0), Err(SqmError::DegenerateObservation));
        assert!((posterior_density(1.3, 1e-14).unwrap() - 1.69).abs() < 1e-6);
        let p = 1.0;
        let n = 50.0;
        // Next asymptotic term of erfc: ratio = 1 − 1/(p²n) + O((p²n)⁻²).
        let ratio = posterior_density(p, n).unwrap() / posterior_asymptotic(p, n);
        assert!((ratio - (1.0 - 1.0 / n + 3.0 / (n * n))).abs() < 2e-4, "{ratio}");
        let far = posterior_density(p, 500.0).unwrap() / posterior_asymptotic(p, 500.0);
        assert!((far - 1.0).abs() < 0.01);
        for p in [0.5, 1.0, 2.0] {
            let total = posterior_moment_quadrature(p, 0).unwrap();
            assert!((total.value - 1.0).abs() < 1e-8);
            assert!(total.tail_bound < 1e-12);
        }
    }

    #[test]
    fn posterior_is_monotone_in_n() {
        for p in [0.3, 1.0, 2.2] {
            let mut prev = f64::INFINITY;
            for k in 0..200 {
                let d = posterior_density(p, 0.01 + 0.1 * k as f64).unwrap();
                assert!(d <= prev);
                prev = d;
            }
        }
    }

    #[test]
    fn posterior_moments_closed_form_and_quadrature() {
        assert_eq!(posterior_moment(1.0, 1).unwrap(), 1.5);
        assert_eq!(posterior_moment(1.0, 2).unwrap(), 5.0);
        let ms = posterior_mean_std(1.0).unwrap();
        assert!((ms.std - 11f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((ms.std - 1.658312).abs() < 1e-6);
        for p in [0.5, 1.0, 2.0] {
            for m in 1..=3 {
                let exact = posterior_moment(p, m).unwrap();
                let q = posterior_moment_quadrature(p, m).unwrap();
                assert!(((q.value - exact) / exact).abs() < 1e-7, "p={p} m={m}");
            }
        }
    }

    #[test]
    fn averaged_posterior_normalized_and_matches_double_quadrature() {
        // n = (1−v²)/v² maps (0, 1] onto [0, ∞) with a bounded integrand.
        let total = integrate(
            |v: f64| averaged_posterior((1.0 - v * v) / (v * v)) * 2.0 / (v * v * v),
            0.0,
            1.0,
            1e-12,
        );
        assert!((total - 1.0).abs() < 1e-7, "{total}");
        assert_eq!(averaged_posterior(0.0), 0.0);
        for n in [0.5, 1.0, 2.0] {
            let weight = |p: f64| (-p * p / 2.0).exp() / (2.0 * PI).sqrt();
            let avg = 2.0
                * integrate_pieces(|p| posterior_density(p, n).unwrap_or(0.0) * weight(p), &[0.0, 2.0, 6.0, 40.0], 1e-14);
            assert!((avg - averaged_posterior(n)).abs() < 1e-6, "n={n}");
        }
        let n = 1e4;
        let ratio = averaged_posterior(n) / ((4.0 / (3.0 * PI)) * n.powf(-1.5));
        assert!((ratio - 1.0).abs() < 0.01);
    }

    #[test]
    fn dual_normalization_constants() {
        let d = dual_normalization();
        assert!((d.n_inv - 0.857348).abs() < 1e-5);
        assert!((d.n - 1.166387).abs() < 1e-5);
        // Independent route: direct quadrature of 4x min(erf, erfc).
        let direct = 4.0
            * integrate_pieces(|x| x * erf(x).min(erfc(x)), &[0.0, d.x1, 2.0, 8.0], 1e-14);
        assert!((direct - d.n_inv).abs() < 1e-12);
    }

    #[test]
    fn dual_posterior_moments() {
        for p in [1.0, 0.7] {
            let ms = dual_posterior_mean_std(p).unwrap();
            assert!((ms.mean * p * p - 1.727468).abs() < 1e-4);
            assert!((ms.std * p * p - 1.686141).abs() < 1e-4);
            let total = dual_posterior_moment(p, 0).unwrap();
            assert!((total.value - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn bayes_update_cases() {
        let single = HypothesisSet::<f64>::new().with("h", 0.3, |_| 0.4).unwrap();
        assert_eq!(bayes_update(&single, &0.0).unwrap()[0].probability, 1.0);

        let even = HypothesisSet::<f64>::new()
            .with("a", 1.0, |_| 0.2)
            .unwrap()
            .with("b", 1.0, |_| 0.8)
            .unwrap();
        let post = bayes_update(&even, &0.0).unwrap();
        assert!((post[0].probability - 0.2).abs() < 1e-15);
        assert!((post[1].probability - 0.8).abs() < 1e-15);

        let dead = HypothesisSet::<f64>::new().with("a", 1.0, |_| 0.0).unwrap();
        assert_eq!(bayes_update(&dead, &0.0), Err(SqmError::NoUpdate));
    }

    #[test]
    fn bayes_with_complexity_priors() {
        let p = 1.2;
        let mut set = HypothesisSet::<f64>::new();
        for (rank, n) in [(1u32, 1.0), (2, 2.0), (3, 0.5)] {
            set.push(format!("n={n}"), complexity_prior(rank), move |p: &f64| gaussian_typicality(n, *p))
                .unwrap();
        }
        let post = bayes_update(&set, &p).unwrap();
        let w = [
            0.5 * erfc((0.5 * p * p).sqrt()),
            0.25 * erfc((p * p).sqrt()),
            0.125 * erfc((0.25 * p * p).sqrt()),
        ];
        let total: f64 = w.iter().sum();
        for (got, w) in post.iter().zip(w) {
            assert!((got.probability - w / total).abs() < 1e-14);
        }
    }

    #[test]
    fn digit_experiment_cases() {
        let third = digit_experiment_canonical(8, 1.0).unwrap();
        assert!((third - 1.0 / 3.0).abs() < 1e-3);
        assert!((third - digit_experiment_approx(8, 1.0)).abs() < 1e-3);
        for n in [0.0, 2.0] {
            let v = digit_experiment_canonical(8, n).unwrap();
            assert!(v <= 1.1e-4 && v > 0.9e-4, "n={n}: {v}");
        }
        for n in [-1.0, 0.0, 0.5, 3.0] {
            let v = digit_experiment(8, 17, 1234, [0.3, 0.3, 0.3], n).unwrap();
            assert!((v - 1234.0 / 1e8).abs() < 1e-18);
        }
        assert!(digit_experiment(2, 60, 50, [1.0; 3], 1.0).is_err());
        assert!(digit_experiment(2, 0, 50, [1.0; 3], 1.0).is_err());
        // N3 = 0 is allowed.
        assert!((digit_experiment(1, 5, 5, [1.0; 3], 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn confidence_bound_cases() {
        let b8 = confidence_bound(8, 0.99).unwrap().bound;
        assert!((b8 - 0.5).abs() < 0.05);
        // Closed form: 10^x + 10^{−x} = 99 with x = bound·k/2.
        let s = 99.0f64;
        let x = ((s + (s * s - 4.0).sqrt()) / 2.0).log10();
        assert!((b8 - 2.0 * x / 8.0).abs() < 1e-12);
        let b16 = confidence_bound(16, 0.99).unwrap().bound;
        assert!((b16 / (b8 / 2.0) - 1.0).abs() < 0.05);
        let mut prev = 0.0;
        for level in [0.7, 0.8, 0.9, 0.99, 0.999, 0.9999] {
            let b = confidence_bound(8, level).unwrap().bound;
            assert!(b > prev);
            prev = b;
        }
        assert!(confidence_bound(8, 0.6).is_err());
        assert!(confidence_bound(8, 2.0 / 3.0 + 1e-9).unwrap().bound < 1e-3);
    }

    #[test]
    fn band_endpoints() {
        let b = gaussian_99_band();
        assert!((b.low - 0.0062666117).abs() < 1e-8);
        // 30-digit root of erfc(x/√2) = 0.005.
        assert!((b.high - 2.807033768343804).abs() < 1e-11);
        for x in [b.low, b.high] {
            assert!((gaussian_dual(1.0, x) - 0.01).abs() < 1e-8);
        }
    }

    #[test]
    fn power_law_model() {
        assert_eq!(SqmnModel::power_law(0.0).apply(0.0).unwrap(), 1.0);
        assert_eq!(SqmnModel::power_law(2.0).apply(3.0).unwrap(), 9.0);
        assert!(SqmnModel::power_law(1.0).apply(-1.0).is_err());
        let custom = SqmnModel::with_transform(2.0, |m, n| (n * m).ln_1p());
        assert!((custom.apply(1.0).unwrap() - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn posterior_csv() {
        let rows = posterior_curve(1.0, &[0.5, 1.0], false).unwrap();
        let mut buf = Vec::new();
        write_posterior_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,density\n0.5,"));
        assert_eq!(text.lines().count(), 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn typicalities_sum(n in 0.001f64..50.0, p in -10.0f64..10.0) {
                let g = gaussian_typicalities(n, p);
                prop_assert!((g.typicality + g.reversed - 1.0).abs() < 1e-15);
                prop_assert!((0.0..=1.0).contains(&g.dual));
            }

            #[test]
            fn bayes_prior_scale_invariance(scale in 1e-6f64..1e6, l in prop::collection::vec(0.01f64..1.0, 1..6)) {
                let mut a = HypothesisSet::<()>::new();
                let mut b = HypothesisSet::<()>::new();
                for (i, &li) in l.iter().enumerate() {
                    let prior = 1.0 + i as f64;
                    a.push(format!("{i}"), prior, move |_| li).unwrap();
                    b.push(format!("{i}"), prior * scale, move |_| li).unwrap();
                }
                let pa = bayes_update(&a, &()).unwrap();
                let pb = bayes_update(&b, &()).unwrap();
                let sum: f64 = pa.iter().map(|w| w.probability).sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                for (x, y) in pa.iter().zip(&pb) {
                    prop_assert!((x.probability - y.probability).abs() < 1e-12);
                }
            }

            #[test]
            fn digit_experiment_scale_invariance(scale in 1e-3f64..1e3, n in -2.0f64..3.0) {
                let m = [0.7, 0.02, 1e-5];
                let a = digit_experiment(6, 3, 900, m, n).unwrap();
                let b = digit_experiment(6, 3, 900, m.map(|x| x * scale), n).unwrap();
                prop_assert!(((a - b) / a).abs() < 1e-10);
            }
        }
    }
}
