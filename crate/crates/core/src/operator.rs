//! Dense complex operators and density matrices on small Hilbert spaces.
//!
//! Everything here is double precision and sized for dimensions up to a few
//! hundred. Operators are square `DMatrix<Complex64>` values wrapped in a
//! newtype that guarantees finite entries; [`State`] additionally guarantees
//! a Hermitian, positive semidefinite, unit-trace matrix.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SqmError};

pub type C64 = Complex64;

/// Structural tolerance used when callers do not supply one.
pub const DEFAULT_TOL: f64 = 1e-9;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A finite-dimensional complex operator.
#[derive(Clone, PartialEq)]
pub struct Operator {
    mat: DMatrix<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator({}x{}) {}", self.dim(), self.dim(), self.mat)
    }
}

impl Operator {
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(SqmError::NotSquare(mat.nrows(), mat.ncols()));
        }
        if mat.nrows() == 0 {
            return Err(SqmError::EmptyDimension);
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SqmError::NonFinite("operator"));
        }
        Ok(Self { mat })
    }

    /// Builds an operator from row-major complex entries.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            let bad = rows.iter().map(Vec::len).find(|&l| l != n).unwrap_or(0);
            return Err(SqmError::NotSquare(n, bad));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(diag[i], 0.0)
            } else {
                C64::default()
            }
        }))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    /// The rank-one projector `|v><v| / <v|v>`.
    pub fn projector_onto(v: &DVector<C64>) -> Result<Self> {
        let norm2 = v.norm_squared();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(SqmError::ZeroNorm);
        }
        Self::new(v * v.adjoint() / c(norm2, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: &self.mat * c(s, 0.0),
        }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self { mat: &self.mat * s }
    }

    /// Hermitian part `(A + A†)/2`, written `Re A` for operators.
    pub fn real_part(&self) -> Self {
        Self {
            mat: (&self.mat + self.mat.adjoint()) * c(0.5, 0.0),
        }
    }

    pub fn checked_mul(&self, other: &Operator) -> Result<Operator> {
        self.same_dim(other)?;
        Ok(Self {
            mat: &self.mat * &other.mat,
        })
    }

    pub fn checked_add(&self, other: &Operator) -> Result<Operator> {
        self.same_dim(other)?;
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }

    pub(crate) fn same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(SqmError::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    /// `Tr(A B)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> Result<C64> {
        self.same_dim(other)?;
        let n = self.dim();
        let mut acc = C64::default();
        for i in 0..n {
            for j in 0..n {
                acc += self.mat[(i, j)] * other.mat[(j, i)];
            }
        }
        Ok(acc)
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// True iff Hermitian and `max |A² − A| ≤ tol`.
    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.idempotence_error() <= tol
    }

    pub fn idempotence_error(&self) -> f64 {
        let sq = &self.mat * &self.mat;
        (sq - &self.mat).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.same_dim(other)?;
        Ok(Self {
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
        })
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = SymmetricEigen::new(self.real_part().mat)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        vals.sort_by(f64::total_cmp);
        vals
    }

    /// Eigen-decomposition of the Hermitian part: ascending eigenvalues with
    /// their eigenvectors as columns.
    pub fn hermitian_eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        let eig = SymmetricEigen::new(self.real_part().mat);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let n = self.dim();
        let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        (vals, vecs)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.hermitian_eigenvalues().last().expect("dim >= 1")
    }

    /// Column-major vectorization, used for rank tests.
    pub fn vectorize(&self) -> DVector<C64> {
        DVector::from_iterator(self.dim() * self.dim(), self.mat.iter().copied())
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.checked_add(rhs).expect("operator dimensions must match")
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimensions must match");
        Operator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.checked_mul(rhs).expect("operator dimensions must match")
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { mat: -&self.mat }
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<&Operator> for OperatorJson {
    fn from(op: &Operator) -> Self {
        let n = op.dim();
        let re = (0..n)
            .map(|i| (0..n).map(|j| op.mat[(i, j)].re).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..n).map(|j| op.mat[(i, j)].im).collect())
            .collect();
        Self { dim: n, re, im }
    }
}

impl TryFrom<OperatorJson> for Operator {
    type Error = SqmError;

    fn try_from(js: OperatorJson) -> Result<Self> {
        let n = js.dim;
        let shape_ok = js.re.len() == n
            && js.im.len() == n
            && js.re.iter().all(|r| r.len() == n)
            && js.im.iter().all(|r| r.len() == n);
        if !shape_ok {
            return Err(SqmError::Serialization(format!(
                "expected {n}x{n} re/im arrays"
            )));
        }
        Operator::new(DMatrix::from_fn(n, n, |i, j| c(js.re[i][j], js.im[i][j])))
    }
}

impl Serialize for Operator {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Operator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let js = OperatorJson::deserialize(d)?;
        Operator::try_from(js).map_err(serde::de::Error::custom)
    }
}

/// A density operator: Hermitian, positive semidefinite, unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    op: Operator,
}

impl State {
    pub fn new(op: Operator, tol: f64) -> Result<Self> {
        let herm = op.hermiticity_error();
        if herm > tol {
            return Err(SqmError::NotHermitian(herm));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(SqmError::BadTrace(tr.re));
        }
        let min = op.min_eigenvalue();
        if min < -tol {
            return Err(SqmError::NotPositive(min));
        }
        Ok(Self { op })
    }

    /// `|ψ><ψ|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        Ok(Self {
            op: Operator::projector_onto(psi)?,
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            op: Operator::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// Rescales a positive operator to unit trace.
    pub fn normalized(op: &Operator, tol: f64) -> Result<Self> {
        let tr = op.trace().re;
        if !(tr > 0.0) {
            return Err(SqmError::BadTrace(tr));
        }
        Self::new(op.scale(1.0 / tr), tol)
    }

    /// Pure spin-half state pointing along a Bloch direction.
    pub fn bloch(polar: f64, azimuth: f64) -> Self {
        Self {
            op: bloch_projector(polar, azimuth),
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    /// `σ[O] = Tr(σ O)`.
    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        self.op.trace_product(op)
    }

    /// Real expectation of a positive operator used as a measure: values in
    /// `[-tol, 0)` clamp to zero, anything lower is an error.
    pub fn measure(&self, op: &Operator, tol: f64) -> Result<f64> {
        let v = self.expectation(op)?.re;
        if v < -tol {
            return Err(SqmError::NegativeMeasure(v, String::new()));
        }
        Ok(v.max(0.0))
    }

    pub fn tensor(&self, other: &State) -> State {
        State {
            op: tensor_product(&self.op, &other.op),
        }
    }

    /// Conjugation `U σ U†`.
    pub fn conjugate(&self, u: &Operator) -> Result<State> {
        let op = u.checked_mul(&self.op)?.checked_mul(&u.adjoint())?;
        Ok(State { op })
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.op.serialize(s)
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let op = Operator::deserialize(d)?;
        State::new(op, DEFAULT_TOL).map_err(serde::de::Error::custom)
    }
}

/// Rank-one spin-half projector for the Bloch direction `(polar, azimuth)`:
/// `½[[1+cos ϑ, sin ϑ e^{iφ}], [sin ϑ e^{−iφ}, 1−cos ϑ]]`.
pub fn bloch_projector(polar: f64, azimuth: f64) -> Operator {
    let (s, co) = polar.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    let off = c(0.5 * s * ca, 0.5 * s * sa);
    Operator {
        mat: DMatrix::from_row_slice(
            2,
            2,
            &[c(0.5 * (1.0 + co), 0.0), off, off.conj(), c(0.5 * (1.0 - co), 0.0)],
        ),
    }
}

/// General positive spin-half operator `[[t+z, x+iy], [x−iy, t−z]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPositiveOp {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ParamPositiveOp {
    pub fn new(t: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let p = Self { t, x, y, z };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let r = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        if !(self.t.is_finite() && r.is_finite()) {
            return Err(SqmError::NonFinite("positive operator parameters"));
        }
        if self.t < r {
            return Err(SqmError::InvalidParameters(format!(
                "t = {} is below sqrt(x²+y²+z²) = {}",
                self.t, r
            )));
        }
        Ok(())
    }
}

pub fn from_params(p: &ParamPositiveOp) -> Result<Operator> {
    p.validate()?;
    Operator::new(DMatrix::from_row_slice(
        2,
        2,
        &[c(p.t + p.z, 0.0), c(p.x, p.y), c(p.x, -p.y), c(p.t - p.z, 0.0)],
    ))
}

/// Kronecker product with `a` as the outer (slow) factor.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    Operator {
        mat: a.mat.kronecker(&b.mat),
    }
}

/// Kronecker product of a list of factors, left to right.
pub fn tensor_all(factors: &[Operator]) -> Operator {
    let mut it = factors.iter();
    let first = it.next().expect("at least one factor").clone();
    it.fold(first, |acc, f| tensor_product(&acc, f))
}

/// Haar-distributed unitary from a seeded generator.
pub fn haar_random_unitary(dim: usize, seed: u64) -> Operator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_unitary_with(dim, &mut rng)
}

/// QR of a complex Ginibre matrix with the phases of `diag(R)` folded back
/// into `Q`, so the result is exactly Haar distributed.
pub fn haar_unitary_with<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    assert!(dim >= 1, "dimension must be at least 1");
    let ginibre = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = ginibre.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Operator { mat: q }
}
