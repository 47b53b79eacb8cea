//! Dense complex matrices and the qubit primitives built on them.
//!
//! Every operator in this crate acts on at most three qubits, so matrices are
//! stored densely and limited to dimensions 2, 4 and 8. Multi-qubit operators
//! always use the wing order Alice ⊗ Bob ⊗ Charlie, so basis label `|abc⟩`
//! has index `4a + 2b + c`.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance for algebraic identities (Hermiticity, unit trace).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Smallest eigenvalue a density matrix may have.
pub const PSD_TOL: f64 = 1e-10;

const SUPPORTED_DIMS: [usize; 3] = [2, 4, 8];

fn check_dim(dim: usize) -> Result<()> {
    if SUPPORTED_DIMS.contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Square complex matrix of dimension 2, 4 or 8.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_rows(dim: usize, data: &[C64]) -> Result<Self> {
        check_dim(dim)?;
        if data.len() != dim * dim {
            return Err(Error::BadDataLength {
                expected: dim * dim,
                actual: data.len(),
            });
        }
        Ok(Self(DMatrix::from_row_slice(dim, dim, data)))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self(DMatrix::zeros(dim, dim)))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self(DMatrix::identity(dim, dim)))
    }

    pub(crate) fn identity2() -> Self {
        Self(DMatrix::identity(2, 2))
    }

    pub(crate) fn from_2x2(m: [[C64; 2]; 2]) -> Self {
        Self(DMatrix::from_row_slice(
            2,
            2,
            &[m[0][0], m[0][1], m[1][0], m[1][1]],
        ))
    }

    /// Outer product `|v⟩⟨v|` of a state vector.
    pub fn outer(v: &[C64]) -> Result<Self> {
        let dim = v.len();
        check_dim(dim)?;
        Ok(Self(DMatrix::from_fn(dim, dim, |r, c| v[r] * v[c].conj())))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `Tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &ComplexMatrix) -> C64 {
        debug_assert_eq!(self.dim(), other.dim());
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..n {
            for c in 0..n {
                acc += self.0[(r, c)] * other.0[(c, r)];
            }
        }
        acc
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    /// Kronecker product; fails if the result would exceed dimension 8.
    pub fn kron(&self, other: &ComplexMatrix) -> Result<Self> {
        let dim = self.dim() * other.dim();
        check_dim(dim)?;
        Ok(Self(self.0.kronecker(&other.0)))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// Eigenvalues in ascending order, treating the matrix as Hermitian.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Reduced operator on one wing of an 8×8 operator.
    pub fn partial_trace_keep(&self, keep: Wing) -> Result<Self> {
        if self.dim() != 8 {
            return Err(Error::DimensionMismatch {
                expected: 8,
                actual: self.dim(),
            });
        }
        let shift = keep.bit_shift();
        let mut out = DMatrix::<C64>::zeros(2, 2);
        for r in 0..8usize {
            for c in 0..8usize {
                // the traced-out bits must agree
                let mask = !(1usize << shift) & 0b111;
                if r & mask != c & mask {
                    continue;
                }
                out[((r >> shift) & 1, (c >> shift) & 1)] += self.0[(r, c)];
            }
        }
        Ok(Self(out))
    }

    /// Embeds a single-qubit operator on `wing`, identity elsewhere.
    pub fn embed(op: &ComplexMatrix, wing: Wing) -> Result<Self> {
        if op.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: op.dim(),
            });
        }
        let id = Self::identity2();
        let mut factors = [&id, &id, &id];
        factors[wing.index()] = op;
        tensor3(factors[0], factors[1], factors[2])
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

/// One of the three spatially separated parties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wing {
    Alice,
    Bob,
    Charlie,
}

impl Wing {
    pub const ALL: [Wing; 3] = [Wing::Alice, Wing::Bob, Wing::Charlie];

    pub fn index(self) -> usize {
        match self {
            Wing::Alice => 0,
            Wing::Bob => 1,
            Wing::Charlie => 2,
        }
    }

    // Alice is the most significant bit of the basis index.
    fn bit_shift(self) -> usize {
        2 - self.index()
    }

    pub fn letter(self) -> char {
        match self {
            Wing::Alice => 'A',
            Wing::Bob => 'B',
            Wing::Charlie => 'C',
        }
    }
}

impl FromStr for Wing {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "alice" => Ok(Wing::Alice),
            "b" | "bob" => Ok(Wing::Bob),
            "c" | "charlie" => Ok(Wing::Charlie),
            _ => Err(Error::InvalidWing(s.to_string())),
        }
    }
}

impl fmt::Display for Wing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: Axis) -> ComplexMatrix {
    let o = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match axis {
        Axis::X => ComplexMatrix::from_2x2([[o, one], [one, o]]),
        Axis::Y => ComplexMatrix::from_2x2([[o, -i], [i, o]]),
        Axis::Z => ComplexMatrix::from_2x2([[one, o], [o, -one]]),
    }
}

/// Outcome of a dichotomic measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const ALL: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Outcome::Plus => 1.0,
            Outcome::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }
}

/// Unit vector on the Bloch sphere, `(sinθ cosφ, sinθ sinφ, cosθ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochDirection {
    theta: f64,
    phi: f64,
}

impl BlochDirection {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        let ok = theta.is_finite()
            && phi.is_finite()
            && (0.0..=std::f64::consts::PI).contains(&theta)
            && (0.0..=std::f64::consts::TAU).contains(&phi);
        if ok {
            Ok(Self { theta, phi })
        } else {
            Err(Error::InvalidDirection { theta, phi })
        }
    }

    /// Clamps θ into `[0, π]` and wraps φ into `[0, 2π)`.
    pub fn wrapped(theta: f64, phi: f64) -> Self {
        Self {
            theta: theta.clamp(0.0, std::f64::consts::PI),
            phi: phi.rem_euclid(std::f64::consts::TAU),
        }
    }

    pub fn x() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_2,
            phi: 0.0,
        }
    }

    pub fn y() -> Self {
        Self {
            theta: std::f64::consts::FRAC_PI_2,
            phi: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn z() -> Self {
        Self { theta: 0.0, phi: 0.0 }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// `n̂·σ⃗` for the given direction.
pub fn direction_observable(d: &BlochDirection) -> ComplexMatrix {
    let [nx, ny, nz] = d.vector();
    let re = |v: f64| C64::new(v, 0.0);
    ComplexMatrix::from_2x2([
        [re(nz), C64::new(nx, -ny)],
        [C64::new(nx, ny), re(-nz)],
    ])
}

/// Projector `(I + a n̂·σ⃗)/2` onto outcome `a` along `d`.
pub fn projector(d: &BlochDirection, outcome: Outcome) -> ComplexMatrix {
    let n = direction_observable(d).scale(outcome.sign());
    (&ComplexMatrix::identity2() + &n).scale(0.5)
}

pub fn tensor3(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> Result<ComplexMatrix> {
    for m in [a, b, c] {
        if m.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: m.dim(),
            });
        }
    }
    a.kron(b)?.kron(c)
}

/// Square root of the unsharp effect `λΠ_a + (1-λ)I/2`, written in its
/// spectral form `√((1+λ)/2) Π_a + √((1-λ)/2) Π_{-a}`.
pub fn effect_sqrt(d: &BlochDirection, lambda: f64, outcome: Outcome) -> Result<ComplexMatrix> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::SharpnessOutOfRange(lambda));
    }
    let same = projector(d, outcome).scale(((1.0 + lambda) / 2.0).sqrt());
    let other = projector(d, outcome.flip()).scale(((1.0 - lambda) / 2.0).sqrt());
    Ok(&same + &other)
}

/// Validated quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let herm = mat.hermiticity_error();
        if herm > ALGEBRA_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = mat.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > ALGEBRA_TOL {
            return Err(Error::BadTrace(tr.re));
        }
        let min_ev = mat.hermitian_eigenvalues()[0];
        if min_ev < -PSD_TOL {
            return Err(Error::NotPositive(min_ev));
        }
        Ok(Self(mat))
    }

    /// Projector onto a normalized state vector.
    pub fn from_pure(amplitudes: &[C64]) -> Result<Self> {
        Self::new(ComplexMatrix::outer(amplitudes)?)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Ok(Self(ComplexMatrix::identity(dim)?.scale(1.0 / dim as f64)))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn purity(&self) -> f64 {
        self.0.trace_product(&self.0).re
    }

    /// `Tr[ρ O]` (real part; exact for Hermitian `O`).
    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        self.0.trace_product(op).re
    }
}

/// Reduced state on `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: Wing) -> Result<DensityMatrix> {
    DensityMatrix::new(rho.matrix().partial_trace_keep(keep)?)
}
