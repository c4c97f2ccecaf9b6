//! Small dense linear-algebra helpers shared by the estimation and inference
//! code.

use nalgebra::{DMatrix, SymmetricEigen};

/// Solves `X = F X Fᵀ + Q` for stable `F`.
///
/// Small systems use the vectorised form `(I - F⊗F) vec X = vec Q`; larger
/// ones fall back to the doubling iteration, whose memory stays `O(n²)`.
pub fn discrete_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = f.nrows();
    if n == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    if n <= KRONECKER_MAX_DIM {
        let kron = f.kronecker(f);
        let lhs = DMatrix::<f64>::identity(n * n, n * n) - kron;
        let rhs = nalgebra::DVector::from_column_slice(q.as_slice());
        let sol = lhs.lu().solve(&rhs)?;
        let x = DMatrix::from_column_slice(n, n, sol.as_slice());
        Some((&x + x.transpose()) * 0.5)
    } else {
        let mut a = f.clone();
        let mut x = q.clone();
        for _ in 0..200 {
            let next = &x + &a * &x * a.transpose();
            a = &a * &a;
            let delta = (&next - &x).abs().max();
            x = next;
            if delta <= 1e-16 * x.abs().max() {
                break;
            }
        }
        Some((&x + x.transpose()) * 0.5)
    }
}

/// Largest companion dimension solved by Kronecker vectorisation.
pub const KRONECKER_MAX_DIM: usize = 40;

/// Symmetrised eigen-decomposition.
pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigen()
}

/// Inverse of a symmetric positive semidefinite matrix with every eigenvalue
/// clamped from below at `floor_rel * trace`. Returns the inverse, the
/// smallest eigenvalue before clamping, and whether clamping happened.
pub fn floored_sym_inverse(m: &DMatrix<f64>, floor_rel: f64) -> Option<(DMatrix<f64>, f64, bool)> {
    let eig = sym_eigen(m);
    let trace: f64 = eig.eigenvalues.iter().sum();
    if !trace.is_finite() || trace <= 0.0 {
        return None;
    }
    let floor = floor_rel * trace;
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let floored = min < floor;
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
    let q = &eig.eigenvectors;
    let inv = q * DMatrix::from_diagonal(&inv_vals) * q.transpose();
    Some(((&inv + inv.transpose()) * 0.5, min, floored))
}

/// Block diagonal matrix from square blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(b);
        at += b.nrows();
    }
    out
}
