//! Rank, null-space and polynomial-identity kernels over the two scalar
//! domains used throughout the crate.
//!
//! * **complex-float**: `f64` complex matrices; rank is the number of
//!   singular values above `tau * sigma_max`. Used wherever a concrete
//!   beamforming scheme is built.
//! * **prime-field**: exact arithmetic modulo a large prime. Generic-rank
//!   questions are polynomial identity tests, so they are answered by
//!   evaluating at uniformly random points of `F_p` (Schwartz-Zippel).

pub mod complex;
pub mod prime;
pub mod structured;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use complex::{CMatrix, C64, DEFAULT_TOLERANCE};
pub use prime::{FpMatrix, PrimeField, MERSENNE_61};
pub use structured::{
    generic_rank, generic_rank_of, BlockPattern, LinkShape, Placement, RankShape, StructuredMatrix,
    VarIndex, DEFAULT_TRIALS,
};

/// Which arithmetic a matrix lives in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarDomain {
    ComplexFloat { tolerance: f64 },
    PrimeField(PrimeField),
}

impl ScalarDomain {
    pub fn complex() -> Self {
        ScalarDomain::ComplexFloat {
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn complex_with_tolerance(tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::UnsupportedDomain(format!("tolerance {tolerance} must be positive")));
        }
        Ok(ScalarDomain::ComplexFloat { tolerance })
    }

    pub fn prime() -> Self {
        ScalarDomain::PrimeField(PrimeField::mersenne61())
    }

    /// Prime-field domain; the modulus must be a prime above `2^32`.
    pub fn prime_field(p: u64) -> Result<Self> {
        if p <= 1 << 32 {
            return Err(Error::UnsupportedDomain(format!("modulus {p} must exceed 2^32")));
        }
        Ok(ScalarDomain::PrimeField(PrimeField::new(p)?))
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            ScalarDomain::ComplexFloat { tolerance } => *tolerance,
            ScalarDomain::PrimeField(_) => DEFAULT_TOLERANCE,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            ScalarDomain::ComplexFloat { .. } => "complex",
            ScalarDomain::PrimeField(_) => "prime-field",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "complex" | "complex-float" => Ok(Self::complex()),
            "prime-field" => Ok(Self::prime()),
            other => Err(Error::UnsupportedDomain(other.to_string())),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, ScalarDomain::ComplexFloat { .. })
    }
}

impl Serialize for ScalarDomain {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl<'de> Deserialize<'de> for ScalarDomain {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let tag = String::deserialize(d)?;
        ScalarDomain::from_tag(&tag).map_err(serde::de::Error::custom)
    }
}

/// A dense matrix in either scalar domain.
#[derive(Clone, Debug, PartialEq)]
pub enum Matrix {
    Complex(CMatrix),
    Prime(FpMatrix),
}

impl Matrix {
    pub fn zeros(domain: &ScalarDomain, rows: usize, cols: usize) -> Self {
        match domain {
            ScalarDomain::ComplexFloat { .. } => Matrix::Complex(CMatrix::zeros(rows, cols)),
            ScalarDomain::PrimeField(f) => Matrix::Prime(FpMatrix::zeros(*f, rows, cols)),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Matrix::Complex(m) => m.nrows(),
            Matrix::Prime(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Complex(m) => m.ncols(),
            Matrix::Prime(m) => m.cols(),
        }
    }

    pub fn as_complex(&self) -> Option<&CMatrix> {
        match self {
            Matrix::Complex(m) => Some(m),
            Matrix::Prime(_) => None,
        }
    }

    pub fn as_prime(&self) -> Option<&FpMatrix> {
        match self {
            Matrix::Prime(m) => Some(m),
            Matrix::Complex(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Matrix::Complex(m) => m.iter().all(|z| *z == C64::new(0.0, 0.0)),
            Matrix::Prime(m) => m.is_zero(),
        }
    }

    /// Copies `block` into `self` at `(r0, c0)`; both must share a domain.
    pub fn paste(&mut self, r0: usize, c0: usize, block: &Matrix) {
        match (self, block) {
            (Matrix::Complex(dst), Matrix::Complex(src)) => {
                dst.view_mut((r0, c0), src.shape()).copy_from(src)
            }
            (Matrix::Prime(dst), Matrix::Prime(src)) => dst.paste(r0, c0, src),
            _ => panic!("cannot mix scalar domains in one matrix"),
        }
    }

    /// Columns `c0..c0+cols` of every row.
    pub fn columns(&self, c0: usize, cols: usize) -> Matrix {
        match self {
            Matrix::Complex(m) => Matrix::Complex(m.columns(c0, cols).into_owned()),
            Matrix::Prime(m) => Matrix::Prime(m.submatrix(0, c0, m.rows(), cols)),
        }
    }

    /// Converts a prime-field matrix whose entries are all 0 or 1 into the
    /// complex domain; other entries are mapped through their centered lift.
    pub fn to_complex(&self) -> CMatrix {
        match self {
            Matrix::Complex(m) => m.clone(),
            Matrix::Prime(m) => {
                let p = m.field().modulus();
                CMatrix::from_fn(m.rows(), m.cols(), |r, c| {
                    let v = m.get(r, c);
                    let lifted = if v > p / 2 { -((p - v) as f64) } else { v as f64 };
                    C64::new(lifted, 0.0)
                })
            }
        }
    }
}

/// Rank of `mat`. Prime-field matrices use exact elimination; complex
/// matrices count singular values above `tau * sigma_max` with `tau` taken
/// from `domain` (the default when `domain` is a prime field).
pub fn rank(mat: &Matrix, domain: &ScalarDomain) -> usize {
    match mat {
        Matrix::Prime(m) => m.rank(),
        Matrix::Complex(m) => complex::numerical_rank(m, domain.tolerance()),
    }
}

/// Orthonormal basis of the right null space of a complex matrix.
pub fn null_space_basis(mat: &CMatrix, tol: f64) -> CMatrix {
    complex::null_space_basis(mat, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn domain_validation() {
        assert!(ScalarDomain::prime_field(MERSENNE_61).is_ok());
        assert!(ScalarDomain::prime_field(65_537).is_err());
        assert!(ScalarDomain::prime_field((1 << 33) + 1).is_err()); // 3 divides 2^33 + 1
        assert!(ScalarDomain::complex_with_tolerance(0.0).is_err());
        assert_eq!(ScalarDomain::from_tag("prime-field").unwrap(), ScalarDomain::prime());
    }

    #[test]
    fn rank_dispatches_by_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = PrimeField::mersenne61();
        let p = FpMatrix::random_low_rank(f, 8, 10, 5, &mut rng);
        assert_eq!(rank(&Matrix::Prime(p), &ScalarDomain::prime()), 5);
        let c = complex::random_gaussian(8, 5, &mut rng) * complex::random_gaussian(5, 10, &mut rng);
        assert_eq!(rank(&Matrix::Complex(c), &ScalarDomain::complex()), 5);
        assert_eq!(rank(&Matrix::zeros(&ScalarDomain::complex(), 3, 3), &ScalarDomain::complex()), 0);
    }
}
