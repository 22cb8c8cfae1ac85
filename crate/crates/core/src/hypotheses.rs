//! Experience operators under the projection, sequence, history and
//! linear-positivity hypotheses, together with the independence,
//! commutation, orthogonality, decoherence and normalization checks that
//! distinguish them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqmError};
use crate::operator::{Operator, State, C64};

/// How the experience operator of one perception is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "camelCase")]
pub enum ExperienceSpec {
    /// Any positive operator, taken as is.
    Explicit { op: Operator },
    Projector { op: Operator },
    /// `P_C P P_C`.
    ConstrainedProjector { constraint: Operator, inner: Operator },
    /// Group average of `g P g⁻¹` over a finite group.
    SymmetrizedProjector { inner: Operator, group: Vec<Operator> },
    /// Product of mutually commuting component projectors.
    ProductProjector { components: Vec<Operator> },
    /// `C†C` with `C = chain[0] · chain[1] · …`, so the last entry acts first.
    Sequence { chain: Vec<Operator> },
    /// `C†C` with `C` the unit-coefficient sum of the chain products.
    HistorySum { sequences: Vec<Vec<Operator>> },
    /// `Re C`, admissible when its expectation is nonnegative.
    LinearlyPositive {
        #[serde(rename = "classOp")]
        class_op: Operator,
    },
}

fn require_projector(op: &Operator, tol: f64) -> Result<()> {
    if !op.is_hermitian(tol) {
        return Err(SqmError::NotHermitian(op.hermiticity_error()));
    }
    let err = op.idempotence_error();
    if err > tol {
        return Err(SqmError::NotProjector(err));
    }
    Ok(())
}

fn chain_product(chain: &[Operator]) -> Result<Operator> {
    let (first, rest) = chain
        .split_first()
        .ok_or_else(|| SqmError::InvalidParameters("sequence chain is empty".into()))?;
    rest.iter()
        .try_fold(first.clone(), |acc, p| acc.checked_mul(p))
}

impl ExperienceSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Explicit { op } | Self::Projector { op } => op.dim(),
            Self::ConstrainedProjector { inner, .. } | Self::SymmetrizedProjector { inner, .. } => {
                inner.dim()
            }
            Self::ProductProjector { components } => components.first().map_or(0, Operator::dim),
            Self::Sequence { chain } => chain.first().map_or(0, Operator::dim),
            Self::HistorySum { sequences } => sequences
                .first()
                .and_then(|s| s.first())
                .map_or(0, Operator::dim),
            Self::LinearlyPositive { class_op } => class_op.dim(),
        }
    }

    /// Class operator `C` for the history-type variants.
    pub fn class_operator(&self) -> Result<Option<Operator>> {
        match self {
            Self::Sequence { chain } => chain_product(chain).map(Some),
            Self::HistorySum { sequences } => {
                let (first, rest) = sequences.split_first().ok_or_else(|| {
                    SqmError::InvalidParameters("history sum has no sequences".into())
                })?;
                let mut acc = chain_product(first)?;
                for s in rest {
                    acc = acc.checked_add(&chain_product(s)?)?;
                }
                Ok(Some(acc))
            }
            Self::LinearlyPositive { class_op } => Ok(Some(class_op.clone())),
            _ => Ok(None),
        }
    }

    /// Structural validation that does not need a state.
    pub fn validate(&self, tol: f64) -> Result<()> {
        match self {
            Self::Explicit { .. } | Self::LinearlyPositive { .. } => Ok(()),
            Self::Projector { op } => require_projector(op, tol),
            Self::ConstrainedProjector { constraint, inner } => {
                constraint.same_dim(inner)?;
                require_projector(constraint, tol)?;
                require_projector(inner, tol)
            }
            Self::SymmetrizedProjector { inner, group } => {
                require_projector(inner, tol)?;
                if group.is_empty() {
                    return Err(SqmError::InvalidParameters("symmetry group is empty".into()));
                }
                group.iter().try_for_each(|g| inner.same_dim(g))
            }
            Self::ProductProjector { components } => {
                if components.is_empty() {
                    return Err(SqmError::InvalidParameters("product has no components".into()));
                }
                components.iter().try_for_each(|p| {
                    components[0].same_dim(p)?;
                    require_projector(p, tol)
                })
            }
            Self::Sequence { chain } => {
                if chain.is_empty() {
                    return Err(SqmError::InvalidParameters("sequence chain is empty".into()));
                }
                chain.iter().try_for_each(|p| {
                    chain[0].same_dim(p)?;
                    require_projector(p, tol)
                })
            }
            Self::HistorySum { sequences } => {
                if sequences.is_empty() {
                    return Err(SqmError::InvalidParameters("history sum has no sequences".into()));
                }
                for s in sequences {
                    Self::Sequence { chain: s.clone() }.validate(tol)?;
                    if sequences[0][0].dim() != s[0].dim() {
                        return Err(SqmError::DimensionMismatch(sequences[0][0].dim(), s[0].dim()));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Realizes the experience operator `E(p)` for a spec.
///
/// `LinearlyPositive` needs the state so that `σ[Re C] ≥ −tol` can be
/// verified; the other variants ignore it.
pub fn realize(spec: &ExperienceSpec, state: Option<&State>, tol: f64) -> Result<Operator> {
    spec.validate(tol)?;
    match spec {
        ExperienceSpec::Explicit { op } | ExperienceSpec::Projector { op } => Ok(op.clone()),
        ExperienceSpec::ConstrainedProjector { constraint, inner } => {
            Ok(&(constraint * inner) * constraint)
        }
        ExperienceSpec::SymmetrizedProjector { inner, group } => {
            let mut acc = Operator::zeros(inner.dim());
            for g in group {
                let inv = g.matrix().clone().try_inverse().ok_or_else(|| {
                    SqmError::InvalidParameters("group element is not invertible".into())
                })?;
                let g_inv = Operator::new(inv)?;
                acc = &acc + &(&(g * inner) * &g_inv);
            }
            Ok(acc.scale(1.0 / group.len() as f64))
        }
        ExperienceSpec::ProductProjector { components } => {
            for (i, a) in components.iter().enumerate() {
                for b in &components[i + 1..] {
                    let norm = a.commutator(b)?.max_abs();
                    if norm > tol {
                        return Err(SqmError::NonCommuting(norm));
                    }
                }
            }
            chain_product(components)
        }
        ExperienceSpec::Sequence { .. } | ExperienceSpec::HistorySum { .. } => {
            let c = spec.class_operator()?.expect("history variant");
            Ok(&c.adjoint() * &c)
        }
        ExperienceSpec::LinearlyPositive { class_op } => {
            let state = state.ok_or(SqmError::StateRequired)?;
            let re = class_op.real_part();
            let v = state.expectation(&re)?.re;
            if v < -tol {
                return Err(SqmError::NegativeMeasure(v, "linearly positive history".into()));
            }
            Ok(re)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FamilyEntry {
    pub label: String,
    pub spec: ExperienceSpec,
    pub prior_weight: f64,
}

/// Labeled experience specs with their prior weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperienceFamily {
    entries: Vec<FamilyEntry>,
}

impl ExperienceFamily {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<FamilyEntry>) -> Result<Self> {
        let mut fam = Self::new();
        for e in entries {
            fam.push(e.label, e.spec, e.prior_weight)?;
        }
        Ok(fam)
    }

    pub fn push(&mut self, label: impl Into<String>, spec: ExperienceSpec, prior_weight: f64) -> Result<()> {
        let label = label.into();
        if self.entries.iter().any(|e| e.label == label) {
            return Err(SqmError::DuplicateLabel(label));
        }
        if !(prior_weight > 0.0 && prior_weight.is_finite()) {
            return Err(SqmError::InvalidParameters(format!(
                "prior weight for {label:?} must be positive and finite"
            )));
        }
        self.entries.push(FamilyEntry { label, spec, prior_weight });
        Ok(())
    }

    pub fn with(mut self, label: impl Into<String>, spec: ExperienceSpec, prior_weight: f64) -> Result<Self> {
        self.push(label, spec, prior_weight)?;
        Ok(self)
    }

    pub fn entries(&self) -> &[FamilyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn realize_all(&self, state: Option<&State>, tol: f64) -> Result<Vec<Operator>> {
        self.entries
            .iter()
            .map(|e| realize(&e.spec, state, tol))
            .collect()
    }
}

/// `A(S) = Σ_{p∈S} μ₀(p) E(p)`.
pub fn awareness_operator(
    family: &ExperienceFamily,
    subset: impl Fn(&str) -> bool,
    state: Option<&State>,
    tol: f64,
) -> Result<Operator> {
    let first = family.entries.first().ok_or(SqmError::EmptyFamily)?;
    let mut acc = Operator::zeros(first.spec.dim());
    for e in family.entries.iter().filter(|e| subset(&e.label)) {
        let op = realize(&e.spec, state, tol)?;
        acc = acc.checked_add(&op.scale(e.prior_weight))?;
    }
    Ok(acc)
}

/// Smallest singular value of the column-normalized, vectorized operators,
/// relative to the largest. Zero operators count as fully degenerate.
fn relative_min_singular(ops: &[&Operator]) -> f64 {
    let d2 = ops[0].dim() * ops[0].dim();
    let mut cols = Vec::with_capacity(ops.len());
    for op in ops {
        let v = op.vectorize();
        let n = v.norm();
        if n == 0.0 {
            return 0.0;
        }
        cols.push(v / C64::new(n, 0.0));
    }
    let m = DMatrix::from_fn(d2, ops.len(), |i, j| cols[j][i]);
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if ops.len() > d2 {
        0.0
    } else {
        min / max
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PairwiseIndependence {
    pub independent: bool,
    pub offending: Option<(String, String)>,
}

/// False iff some pair of realized operators is proportional within `tol`.
pub fn check_pairwise_independence(
    family: &ExperienceFamily,
    state: Option<&State>,
    tol: f64,
) -> Result<PairwiseIndependence> {
    if family.len() < 2 {
        return Err(SqmError::InvalidParameters(
            "pairwise independence needs at least two perceptions".into(),
        ));
    }
    let ops = family.realize_all(state, tol)?;
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            ops[i].same_dim(&ops[j])?;
            if relative_min_singular(&[&ops[i], &ops[j]]) <= tol {
                return Ok(PairwiseIndependence {
                    independent: false,
                    offending: Some((
                        family.entries[i].label.clone(),
                        family.entries[j].label.clone(),
                    )),
                });
            }
        }
    }
    Ok(PairwiseIndependence { independent: true, offending: None })
}

/// True iff the realized operators are linearly independent; always false
/// with more operators than `dim²`.
pub fn check_linear_independence(
    family: &ExperienceFamily,
    state: Option<&State>,
    tol: f64,
) -> Result<bool> {
    let ops = family.realize_all(state, tol)?;
    if ops.is_empty() {
        return Ok(true);
    }
    let d = ops[0].dim();
    if ops.len() > d * d {
        return Ok(false);
    }
    let refs: Vec<&Operator> = ops.iter().collect();
    for op in &refs {
        ops[0].same_dim(op)?;
    }
    Ok(relative_min_singular(&refs) > tol)
}

fn projector_ops(family: &ExperienceFamily, tol: f64) -> Result<Vec<Operator>> {
    let ops = family.realize_all(None, tol)?;
    for op in &ops {
        require_projector(op, tol)?;
    }
    Ok(ops)
}

/// `[P(p), P(p')] = 0` for all pairs.
pub fn check_commuting(family: &ExperienceFamily, tol: f64) -> Result<bool> {
    let ops = projector_ops(family, tol)?;
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            if ops[i].commutator(&ops[j])?.max_abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// `P(p) P(p') = 0` for all pairs.
pub fn check_orthogonal(family: &ExperienceFamily, tol: f64) -> Result<bool> {
    let ops = projector_ops(family, tol)?;
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            if ops[i].checked_mul(&ops[j])?.max_abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Projector `P` with `P σ = C σ`, i.e. `σ[O C] = σ[O P]` for every `O`,
/// if one exists.
///
/// On the support of σ the candidate must agree with `C`, so with
/// `A = Π C Π` and `B = Π⊥ C Π` the only freedom is the completion; a
/// projector exists iff `A` is Hermitian with spectrum in `[0, 1]` and
/// `B†B = A − A²`. The completion `P = Σ |x_i><x_i|` with
/// `x_i = √a_i u_i + √(1−a_i) v_i` is built and checked directly.
pub fn strong_projector(class_op: &Operator, state: &State, tol: f64) -> Result<Option<Operator>> {
    class_op.same_dim(state.operator())?;
    let n = state.dim();
    let (rho_vals, rho_vecs) = state.operator().hermitian_eigen();
    let support: Vec<usize> = (0..n).filter(|&k| rho_vals[k] > tol).collect();
    if support.is_empty() {
        return Ok(None);
    }
    let s_basis = DMatrix::from_fn(n, support.len(), |i, j| rho_vecs[(i, support[j])]);
    let proj_support = &s_basis * s_basis.adjoint();
    let cm = class_op.matrix();
    // A in the support basis, and the full image C|s_j>.
    let images = cm * &s_basis;
    let a = s_basis.adjoint() * &images;
    let herm = (&a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > tol {
        return Ok(None);
    }
    let a_op = Operator::new(a)?;
    let (a_vals, a_vecs) = a_op.hermitian_eigen();
    let perp = DMatrix::<C64>::identity(n, n) - &proj_support;
    let mut p = DMatrix::<C64>::zeros(n, n);
    for (k, &ak) in a_vals.iter().enumerate() {
        if ak < -tol || ak > 1.0 + tol {
            return Ok(None);
        }
        let ak = ak.clamp(0.0, 1.0);
        if ak <= tol {
            continue;
        }
        let u = &s_basis * a_vecs.column(k);
        let x = if ak >= 1.0 - tol {
            u
        } else {
            let bu = &perp * (cm * &u);
            let scale = (ak * (1.0 - ak)).sqrt();
            let v = bu / C64::new(scale, 0.0);
            u * C64::new(ak.sqrt(), 0.0) + v * C64::new((1.0 - ak).sqrt(), 0.0)
        };
        p += &x * x.adjoint();
    }
    let p = Operator::new(p)?;
    let rho = state.operator().matrix();
    let residual = (p.matrix() * rho - cm * rho)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if residual > tol.sqrt() * 1e-3 || !p.is_projector(tol.sqrt() * 1e-3) {
        return Ok(None);
    }
    Ok(Some(p))
}

/// If `C + C'` of two chains is again a single chain, returns that chain.
/// This holds when the chains have equal length and differ in exactly one
/// slot whose two projectors are orthogonal.
fn merged_chain(a: &[Operator], b: &[Operator], tol: f64) -> Option<Vec<Operator>> {
    if a.len() != b.len() {
        return None;
    }
    let diffs: Vec<usize> = (0..a.len())
        .filter(|&k| (&a[k] - &b[k]).max_abs() > tol)
        .collect();
    match diffs.as_slice() {
        [k] => {
            let prod = (&a[*k] * &b[*k]).max_abs();
            if prod > tol {
                return None;
            }
            let mut merged = a.to_vec();
            merged[*k] = &a[*k] + &b[*k];
            Some(merged)
        }
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DecoherencePair {
    pub first: String,
    pub second: String,
    /// False on the diagonal, where the residuals are just the measure.
    pub applicable: bool,
    /// `Re σ[C†C']`.
    pub weak_residual: f64,
    /// `|σ[C†C']|`.
    pub medium_residual: f64,
    /// Additivity of the merged history, when `C + C'` is a single chain.
    pub consistent: Option<bool>,
    /// Both histories individually strong and the pair medium decoherent.
    pub strongly_decoherent: bool,
}

/// Decoherence residuals for every pair `(i ≤ j)` of a family of
/// `Sequence`/`HistorySum` specs.
pub fn decoherence_report(
    family: &ExperienceFamily,
    state: &State,
    tol: f64,
) -> Result<Vec<DecoherencePair>> {
    let mut classes = Vec::with_capacity(family.len());
    for e in family.entries() {
        match &e.spec {
            ExperienceSpec::Sequence { .. } | ExperienceSpec::HistorySum { .. } => {
                e.spec.validate(tol)?;
                let c = e.spec.class_operator()?.expect("history variant");
                c.same_dim(state.operator())?;
                classes.push(c);
            }
            _ => {
                return Err(SqmError::InvalidParameters(format!(
                    "{:?} is not a sequence or history sum",
                    e.label
                )))
            }
        }
    }
    let strong: Vec<bool> = classes
        .iter()
        .map(|c| strong_projector(c, state, tol).map(|p| p.is_some()))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 0..classes.len() {
        for j in i..classes.len() {
            let overlap = state.expectation(&(&classes[i].adjoint() * &classes[j]))?;
            let consistent = if i == j {
                None
            } else {
                match (&family.entries[i].spec, &family.entries[j].spec) {
                    (ExperienceSpec::Sequence { chain: a }, ExperienceSpec::Sequence { chain: b }) => {
                        merged_chain(a, b, tol).map(|m| {
                            let merged = chain_product(&m).expect("nonempty chain");
                            let lhs = state
                                .expectation(&(&merged.adjoint() * &merged))
                                .expect("dims checked")
                                .re;
                            let ei = state.expectation(&(&classes[i].adjoint() * &classes[i])).expect("dims").re;
                            let ej = state.expectation(&(&classes[j].adjoint() * &classes[j])).expect("dims").re;
                            (lhs - ei - ej).abs() <= tol
                        })
                    }
                    _ => None,
                }
            };
            out.push(DecoherencePair {
                first: family.entries[i].label.clone(),
                second: family.entries[j].label.clone(),
                applicable: i != j,
                weak_residual: overlap.re,
                medium_residual: overlap.norm(),
                consistent,
                strongly_decoherent: i != j && strong[i] && strong[j] && overlap.norm() <= tol,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NormalizationMode {
    /// Largest eigenvalue equal to one.
    ConstantMax,
    /// `Tr E = 1`.
    Unit,
    /// `Tr E = Tr E²`.
    Projection,
}

pub fn normalization_check(spec: &ExperienceSpec, mode: NormalizationMode, tol: f64) -> Result<bool> {
    if matches!(spec, ExperienceSpec::LinearlyPositive { .. }) {
        return Err(SqmError::StateRequired);
    }
    let e = realize(spec, None, tol)?;
    Ok(match mode {
        NormalizationMode::ConstantMax => (e.max_eigenvalue() - 1.0).abs() <= tol,
        NormalizationMode::Unit => (e.trace().re - 1.0).abs() <= tol,
        NormalizationMode::Projection => (e.trace() - (&e * &e).trace()).norm() <= tol,
    })
}

/// The four experience operators of two-step sequences built from `Q` then
/// `R`: `E(1) = QRQ`, `E(2) = (I−Q)R(I−Q)`, `E(3) = Q(I−R)Q`,
/// `E(4) = (I−Q)(I−R)(I−Q)`.
pub fn two_step_family(q: &Operator, r: &Operator) -> Result<ExperienceFamily> {
    q.same_dim(r)?;
    let id = Operator::identity(q.dim());
    let nq = &id - q;
    let nr = &id - r;
    ExperienceFamily::new()
        .with("1", ExperienceSpec::Sequence { chain: vec![r.clone(), q.clone()] }, 1.0)?
        .with("2", ExperienceSpec::Sequence { chain: vec![r.clone(), nq.clone()] }, 1.0)?
        .with("3", ExperienceSpec::Sequence { chain: vec![nr.clone(), q.clone()] }, 1.0)?
        .with("4", ExperienceSpec::Sequence { chain: vec![nr, nq] }, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{bloch_projector, haar_random_unitary, tensor_product, DEFAULT_TOL};
    use std::f64::consts::PI;

    const TOL: f64 = DEFAULT_TOL;

    fn proj(polar: f64, azimuth: f64) -> Operator {
        bloch_projector(polar, azimuth)
    }

    fn family_of(ops: &[Operator]) -> ExperienceFamily {
        let mut fam = ExperienceFamily::new();
        for (i, op) in ops.iter().enumerate() {
            fam.push(format!("p{i}"), ExperienceSpec::Explicit { op: op.clone() }, 1.0)
                .unwrap();
        }
        fam
    }

    fn projector_family(ops: &[Operator]) -> ExperienceFamily {
        let mut fam = ExperienceFamily::new();
        for (i, op) in ops.iter().enumerate() {
            fam.push(format!("p{i}"), ExperienceSpec::Projector { op: op.clone() }, 1.0)
                .unwrap();
        }
        fam
    }

    #[test]
    fn single_sequence_is_its_projector() {
        let p = proj(0.4, 1.3);
        let e = realize(&ExperienceSpec::Sequence { chain: vec![p.clone()] }, None, TOL).unwrap();
        assert!((&e - &p).max_abs() < 1e-14);
    }

    #[test]
    fn two_step_sequence_gives_qrq() {
        let (q, r) = (proj(0.3, 0.1), proj(1.9, -2.2));
        let e = realize(&ExperienceSpec::Sequence { chain: vec![r.clone(), q.clone()] }, None, TOL).unwrap();
        let qrq = &(&q * &r) * &q;
        assert!((&e - &qrq).max_abs() < 1e-14);
    }

    #[test]
    fn symmetrization_over_trivial_group() {
        let p = proj(0.8, 0.2);
        let spec = ExperienceSpec::SymmetrizedProjector { inner: p.clone(), group: vec![Operator::identity(2)] };
        assert!((&realize(&spec, None, TOL).unwrap() - &p).max_abs() < 1e-15);
    }

    #[test]
    fn symmetrized_operator_commutes_with_group() {
        // Z₂ generated by σ_x.
        let sx = Operator::from_rows(&[
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ])
        .unwrap();
        let spec = ExperienceSpec::SymmetrizedProjector {
            inner: proj(0.7, 0.3),
            group: vec![Operator::identity(2), sx.clone()],
        };
        let e = realize(&spec, None, TOL).unwrap();
        assert!(e.commutator(&sx).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn constrained_projector_sandwiches() {
        let pc = Operator::from_real_diagonal(&[1.0, 1.0, 0.0]).unwrap();
        let u = haar_random_unitary(3, 5);
        let inner = &(&u * &Operator::from_real_diagonal(&[1.0, 0.0, 0.0]).unwrap()) * &u.adjoint();
        let spec = ExperienceSpec::ConstrainedProjector { constraint: pc.clone(), inner: inner.clone() };
        let e = realize(&spec, None, TOL).unwrap();
        assert!((&e - &(&(&pc * &inner) * &pc)).max_abs() < 1e-14);
    }

    #[test]
    fn product_projector_requires_commuting_components() {
        let a = tensor_product(&proj(0.0, 0.0), &Operator::identity(2));
        let b = tensor_product(&Operator::identity(2), &proj(1.0, 0.5));
        let ok = ExperienceSpec::ProductProjector { components: vec![a.clone(), b.clone()] };
        let e = realize(&ok, None, TOL).unwrap();
        assert!((&e - &(&a * &b)).max_abs() < 1e-14);
        let bad = ExperienceSpec::ProductProjector { components: vec![proj(0.0, 0.0), proj(PI / 2.0, 0.0)] };
        assert!(matches!(realize(&bad, None, TOL), Err(SqmError::NonCommuting(_))));
    }

    #[test]
    fn history_sum_and_linear_positivity() {
        let (q, r) = (proj(0.3, 0.0), proj(2.0, 1.0));
        let id = Operator::identity(2);
        // RQ + R(I−Q) = R.
        let spec = ExperienceSpec::HistorySum {
            sequences: vec![vec![r.clone(), q.clone()], vec![r.clone(), &id - &q]],
        };
        let e = realize(&spec, None, TOL).unwrap();
        assert!((&e - &r).max_abs() < 1e-14);

        let lp = ExperienceSpec::LinearlyPositive { class_op: &r * &q };
        assert_eq!(realize(&lp, None, TOL), Err(SqmError::StateRequired));
        let state = State::bloch(0.3, 0.0);
        let e = realize(&lp, Some(&state), TOL).unwrap();
        assert!((&e - &(&r * &q).real_part()).max_abs() < 1e-15);
        // Antipode of q is orthogonal to it: Re σ[RQ] < 0 is possible.
        let neg = ExperienceSpec::LinearlyPositive { class_op: &proj(0.0, 0.0) * &proj(2.9, 0.0) };
        let state = State::bloch(1.6, PI);
        assert!(matches!(realize(&neg, Some(&state), TOL), Err(SqmError::NegativeMeasure(..))));
    }

    #[test]
    fn sequence_rejects_non_projectors() {
        let spec = ExperienceSpec::Sequence { chain: vec![Operator::identity(2).scale(0.5)] };
        assert!(matches!(realize(&spec, None, TOL), Err(SqmError::NotProjector(_))));
        let empty = ExperienceSpec::Sequence { chain: vec![] };
        assert!(realize(&empty, None, TOL).is_err());
    }

    #[test]
    fn awareness_of_antipodal_pair_is_identity() {
        let fam = family_of(&[proj(0.9, 0.4), proj(PI - 0.9, 0.4 + PI)]);
        let a = awareness_operator(&fam, |_| true, None, TOL).unwrap();
        assert!((&a - &Operator::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn awareness_single_entry_and_empty() {
        let mut fam = ExperienceFamily::new();
        fam.push("a", ExperienceSpec::Explicit { op: proj(0.2, 0.1) }, 2.5).unwrap();
        let a = awareness_operator(&fam, |_| true, None, TOL).unwrap();
        assert!((&a - &proj(0.2, 0.1).scale(2.5)).max_abs() < 1e-15);
        assert_eq!(
            awareness_operator(&ExperienceFamily::new(), |_| true, None, TOL),
            Err(SqmError::EmptyFamily)
        );
    }

    #[test]
    fn family_rejects_duplicates_and_bad_weights() {
        let mut fam = ExperienceFamily::new();
        fam.push("a", ExperienceSpec::Explicit { op: Operator::identity(2) }, 1.0).unwrap();
        assert!(matches!(
            fam.push("a", ExperienceSpec::Explicit { op: Operator::identity(2) }, 1.0),
            Err(SqmError::DuplicateLabel(_))
        ));
        assert!(fam.push("b", ExperienceSpec::Explicit { op: Operator::identity(2) }, 0.0).is_err());
    }

    #[test]
    fn pairwise_independence_cases() {
        let distinct = family_of(&[proj(0.1, 0.0), proj(1.2, 0.7)]);
        assert!(check_pairwise_independence(&distinct, None, TOL).unwrap().independent);

        // E(p) = m(p) I is ruled out.
        let scalar = family_of(&[Operator::identity(2).scale(0.3), Operator::identity(2).scale(0.8)]);
        let res = check_pairwise_independence(&scalar, None, TOL).unwrap();
        assert!(!res.independent);
        assert_eq!(res.offending, Some(("p0".into(), "p1".into())));

        let p = proj(0.5, 0.5);
        let prop = family_of(&[p.clone(), p.scale(2.0)]);
        assert!(!check_pairwise_independence(&prop, None, TOL).unwrap().independent);
    }

    #[test]
    fn linear_independence_cases() {
        let five: Vec<Operator> = (0..5).map(|k| proj(0.3 + 0.5 * k as f64, 0.9 * k as f64)).collect();
        assert!(!check_linear_independence(&family_of(&five), None, TOL).unwrap());

        // Tetrahedral directions are not coplanar.
        let t = (-1.0f64 / 3.0).acos();
        let tetra = [proj(0.0, 0.0), proj(t, 0.0), proj(t, 2.0 * PI / 3.0), proj(t, 4.0 * PI / 3.0)];
        assert!(check_linear_independence(&family_of(&tetra), None, TOL).unwrap());

        // Four directions on one great circle (the x–z plane).
        let coplanar = [proj(0.0, 0.0), proj(0.7, 0.0), proj(1.9, 0.0), proj(2.5, PI)];
        assert!(!check_linear_independence(&family_of(&coplanar), None, TOL).unwrap());
    }

    #[test]
    fn commuting_and_orthogonal_cases() {
        let anti = projector_family(&[proj(0.6, 0.2), proj(PI - 0.6, 0.2 + PI)]);
        assert!(check_commuting(&anti, TOL).unwrap());
        assert!(check_orthogonal(&anti, TOL).unwrap());

        let near = projector_family(&[proj(0.6, 0.2), proj(1.4, 0.2)]);
        assert!(!check_orthogonal(&near, TOL).unwrap());

        let with_id = projector_family(&[Operator::identity(2), proj(0.6, 0.2)]);
        assert!(check_commuting(&with_id, TOL).unwrap());
        assert!(!check_orthogonal(&with_id, TOL).unwrap());

        let not_proj = family_of(&[Operator::identity(2).scale(0.5)]);
        assert!(check_commuting(&not_proj, TOL).is_err());
    }

    #[test]
    fn orthogonal_families_are_independent() {
        for seed in 0..20 {
            let u = haar_random_unitary(4, seed);
            let ops: Vec<Operator> = (0..4)
                .map(|k| Operator::projector_onto(&u.matrix().column(k).into_owned()).unwrap())
                .collect();
            let fam = projector_family(&ops);
            assert!(check_orthogonal(&fam, 1e-9).unwrap());
            assert!(check_pairwise_independence(&fam, None, 1e-9).unwrap().independent);
            assert!(check_linear_independence(&fam, None, 1e-9).unwrap());
        }
    }

    #[test]
    fn two_step_family_sums_to_identity() {
        for seed in 0..20u64 {
            let a = 0.37 * seed as f64;
            let (q, r) = (proj(a.sin().abs() * 3.0, a), proj((a * 1.7).cos().abs() * 3.0, -a));
            let fam = two_step_family(&q, &r).unwrap();
            let sum = awareness_operator(&fam, |_| true, None, TOL).unwrap();
            assert!((&sum - &Operator::identity(2)).max_abs() < 1e-10);
            for op in fam.realize_all(None, TOL).unwrap() {
                assert!(op.min_eigenvalue() >= -1e-10);
            }
        }
    }

    #[test]
    fn decoherence_diagonal_is_marked_not_applicable() {
        let (q, r) = (proj(0.8, 0.3), proj(2.1, 1.4));
        let state = State::bloch(0.4, 0.0);
        let fam = two_step_family(&q, &r).unwrap();
        let rep = decoherence_report(&fam, &state, TOL).unwrap();
        assert_eq!(rep.len(), 10);
        let diag = &rep[0];
        assert!(!diag.applicable);
        let m1 = state.expectation(&(&(&q * &r) * &q)).unwrap().re;
        assert!((diag.weak_residual - m1).abs() < 1e-12);
        assert!((diag.medium_residual - m1).abs() < 1e-12);
    }

    #[test]
    fn decoherence_vanishes_when_q_matches_state() {
        let state = State::bloch(0.9, 0.6);
        let q = proj(0.9, 0.6);
        let r = proj(2.0, -1.0);
        let rep = decoherence_report(&two_step_family(&q, &r).unwrap(), &state, TOL).unwrap();
        // Pair (1, 3): C(1) = RQ and C(3) = (I−R)Q differ in the later slot
        // only, which is the pair that needs decoherence.
        let p13 = rep.iter().find(|p| p.first == "1" && p.second == "2").unwrap();
        assert!(p13.medium_residual < 1e-12);
        assert_eq!(p13.consistent, Some(true));
    }

    #[test]
    fn consistency_fails_for_generic_directions() {
        let state = State::bloch(0.2, 0.0);
        let (q, r) = (proj(1.0, 0.5), proj(2.2, 2.0));
        let rep = decoherence_report(&two_step_family(&q, &r).unwrap(), &state, TOL).unwrap();
        let p12 = rep.iter().find(|p| p.first == "1" && p.second == "2").unwrap();
        assert!(p12.weak_residual.abs() > 1e-3);
        assert_eq!(p12.consistent, Some(false));
        // Four histories cannot all be strongly decoherent in dimension two.
        assert!(rep.iter().filter(|p| p.applicable).any(|p| !p.strongly_decoherent));
    }

    #[test]
    fn strong_projector_exists_for_plain_projectors() {
        let state = State::bloch(0.7, 0.1);
        let p = proj(1.5, 2.0);
        let found = strong_projector(&p, &state, TOL).unwrap().unwrap();
        let rho = state.operator();
        assert!((&(&found * rho) - &(&p * rho)).max_abs() < 1e-10);
        assert!(found.is_projector(1e-10));
    }

    #[test]
    fn strong_projector_for_sequence_on_pure_state() {
        // Pure state, general C: the support block is a number a = <ψ|C|ψ>,
        // which must be real in [0, 1].
        let state = State::bloch(0.7, 0.1);
        let (q, r) = (proj(0.7, 0.1), proj(2.0, 0.5));
        let c = &r * &q;
        let p = strong_projector(&c, &state, TOL).unwrap().expect("Cψ = Rψ projects");
        let rho = state.operator();
        assert!((&(&p * rho) - &(&c * rho)).max_abs() < 1e-10);
        let generic = &proj(1.0, 0.0) * &proj(2.0, 1.0);
        assert!(strong_projector(&generic, &State::bloch(0.1, 2.0), TOL).unwrap().is_none());
    }

    #[test]
    fn normalization_modes() {
        let p = proj(0.4, 0.4);
        let spec = ExperienceSpec::Projector { op: p.clone() };
        for mode in [NormalizationMode::ConstantMax, NormalizationMode::Unit, NormalizationMode::Projection] {
            assert!(normalization_check(&spec, mode, TOL).unwrap());
        }
        let rank2 = ExperienceSpec::Projector { op: Operator::from_real_diagonal(&[1.0, 1.0, 0.0]).unwrap() };
        assert!(!normalization_check(&rank2, NormalizationMode::Unit, TOL).unwrap());
        assert!(normalization_check(&rank2, NormalizationMode::Projection, TOL).unwrap());
        let half = ExperienceSpec::Explicit { op: p.scale(0.5) };
        assert!(!normalization_check(&half, NormalizationMode::ConstantMax, TOL).unwrap());
    }

    #[test]
    fn spec_json_is_tagged() {
        let spec = ExperienceSpec::Sequence { chain: vec![proj(0.0, 0.0)] };
        let js = serde_json::to_value(&spec).unwrap();
        assert_eq!(js["variant"], "sequence");
        assert_eq!(js["chain"][0]["dim"], 2);
        let back: ExperienceSpec = serde_json::from_value(js).unwrap();
        assert_eq!(back, spec);
        let lp = serde_json::to_value(ExperienceSpec::LinearlyPositive { class_op: proj(0.0, 0.0) }).unwrap();
        assert!(lp.get("classOp").is_some());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn sequences_are_positive(seed in 0u64..5000, len in 1usize..4) {
                let chain: Vec<Operator> = (0..len).map(|k| {
                    let u = haar_random_unitary(3, seed * 7 + k as u64);
                    Operator::projector_onto(&u.matrix().column(0).into_owned()).unwrap()
                }).collect();
                let e = realize(&ExperienceSpec::Sequence { chain }, None, 1e-9).unwrap();
                prop_assert!(e.min_eigenvalue() >= -1e-10);
            }

            #[test]
            fn awareness_is_additive(seed in 0u64..5000, mask in 0u32..64) {
                let ops: Vec<Operator> = (0..6).map(|k| {
                    let u = haar_random_unitary(2, seed * 11 + k);
                    Operator::projector_onto(&u.matrix().column(0).into_owned()).unwrap()
                }).collect();
                let mut fam = ExperienceFamily::new();
                for (k, op) in ops.into_iter().enumerate() {
                    fam.push(format!("{k}"), ExperienceSpec::Projector { op }, 0.5 + k as f64).unwrap();
                }
                let inside = |l: &str| mask & (1 << l.parse::<u32>().unwrap()) != 0;
                let a1 = awareness_operator(&fam, inside, None, 1e-9).unwrap();
                let a2 = awareness_operator(&fam, |l| !inside(l), None, 1e-9).unwrap();
                let all = awareness_operator(&fam, |_| true, None, 1e-9).unwrap();
                prop_assert!((&(&a1 + &a2) - &all).max_abs() < 1e-10);
            }
        }
    }
}
