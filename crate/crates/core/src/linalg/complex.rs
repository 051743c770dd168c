//! Complex double-precision kernels built on the singular value decomposition.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

/// Default relative tolerance for numerical rank decisions.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// One draw from the standard circularly-symmetric complex Gaussian, CN(0, 1).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    // fill row-major so the draw order does not depend on storage layout
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = complex_gaussian(rng);
        }
    }
    m
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Singular values, padded with zeros up to `min(rows, cols)`.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().singular_values().iter().copied().collect()
}

/// Number of singular values strictly above `tol * sigma_max`.
pub fn numerical_rank(m: &CMatrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * top).count()
}

/// Orthonormal basis (as columns) of the right null space of `m`.
///
/// A wide matrix is padded with zero rows first so the decomposition yields
/// a complete set of right singular vectors.
pub fn null_space_basis(m: &CMatrix, tol: f64) -> CMatrix {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return CMatrix::identity(cols, cols);
    }
    let square = if rows < cols {
        let mut padded = CMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(m);
        padded
    } else {
        m.clone()
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let null_idx: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| top == 0.0 || s <= tol * top)
        .map(|(k, _)| k)
        .collect();
    let mut basis = CMatrix::zeros(cols, null_idx.len());
    for (out, &k) in null_idx.iter().enumerate() {
        for c in 0..cols {
            basis[(c, out)] = v_t[(k, c)].conj();
        }
    }
    basis
}

/// Rows spanning the left null space: every row `u` satisfies `u * m = 0`.
pub fn left_null_space(m: &CMatrix, tol: f64) -> CMatrix {
    null_space_basis(&m.transpose(), tol).transpose()
}

/// Block-diagonal matrix with the given blocks along the diagonal.
pub fn block_diagonal(blocks: &[&CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), b.shape()).copy_from(*b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Horizontal concatenation `[a, b, ...]`.
pub fn hstack(parts: &[&CMatrix]) -> CMatrix {
    let rows = parts.first().map_or(0, |p| p.nrows());
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for p in parts {
        assert_eq!(p.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c0), p.shape()).copy_from(*p);
        c0 += p.ncols();
    }
    out
}

/// Vertical concatenation.
pub fn vstack(parts: &[&CMatrix]) -> CMatrix {
    let cols = parts.first().map_or(0, |p| p.ncols());
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for p in parts {
        assert_eq!(p.ncols(), cols, "vstack column mismatch");
        out.view_mut((r0, 0), p.shape()).copy_from(*p);
        r0 += p.nrows();
    }
    out
}
