//! Dense eigensolvers and small matrix helpers.
//!
//! Small Hermitian matrices (reduced density matrices, partial transposes) go
//! through an in-tree cyclic Jacobi solver. Large real-symmetric Hamiltonian
//! blocks are handed to nalgebra's Householder/QR solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Relative off-diagonal Frobenius norm at which Jacobi sweeps stop.
pub const JACOBI_TOLERANCE: f64 = 1e-13;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Largest matrix handed to the Jacobi solver by [`hermitian_eigen`].
pub const JACOBI_MAX_DIM: usize = 64;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix
/// by cyclic complex Jacobi rotations.
///
/// Each rotation is a phase alignment of the pivot followed by a real Givens
/// rotation, so the accumulated transformation is exactly unitary.
pub fn jacobi_hermitian(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_hermitian needs a square matrix");
    let mut a = a.clone();
    // symmetrize exactly so roundoff in the input cannot stall convergence
    for i in 0..n {
        a[(i, i)] = c(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let m = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = m;
            a[(j, i)] = m.conj();
        }
    }
    let mut v = DMatrix::<C64>::identity(n, n);
    let total = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        let off = (2.0 * off).sqrt();
        if off <= JACOBI_TOLERANCE * total || off < 1e-300 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag < 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                // W = D R with D = diag(1, .., conj(phase) at q, ..)
                let w_pp = c(cs, 0.0);
                let w_qp = phase.conj() * (-sn);
                let w_pq = c(sn, 0.0);
                let w_qq = phase.conj() * cs;
                // A <- A W
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * w_pp + akq * w_qp;
                    a[(k, q)] = akp * w_pq + akq * w_qq;
                }
                // A <- W^H A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = w_pp.conj() * apk + w_qp.conj() * aqk;
                    a[(q, k)] = w_pq.conj() * apk + w_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = c(a[(p, p)].re, 0.0);
                a[(q, q)] = c(a[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * w_pp + vkq * w_qp;
                    v[(k, q)] = vkp * w_pq + vkq * w_qq;
                }
            }
        }
    }
    let values: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    sort_and_fix_complex(values, v)
}

/// Hermitian eigen-decomposition, ascending, with deterministic phases.
pub fn hermitian_eigen(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    if a.nrows() <= JACOBI_MAX_DIM {
        return jacobi_hermitian(a);
    }
    let eig = SymmetricEigen::new(a.clone());
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    sort_and_fix_complex(values, eig.eigenvectors)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &DMatrix<C64>) -> Vec<f64> {
    if a.nrows() <= JACOBI_MAX_DIM {
        return jacobi_hermitian(a).0;
    }
    let mut values: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Real symmetric eigen-decomposition, ascending. Each eigenvector has its
/// largest-magnitude component made positive.
pub fn symmetric_eigen(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut vecs = DMatrix::<f64>::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        let column = eig.eigenvectors.column(src);
        let pivot = column
            .iter()
            .copied()
            .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for row in 0..n {
            vecs[(row, col)] = sign * column[row];
        }
    }
    (vals, vecs)
}

fn sort_and_fix_complex(values: Vec<f64>, vectors: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut vecs = DMatrix::<C64>::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (col, &src) in order.iter().enumerate() {
        vals.push(values[src]);
        let column = vectors.column(src);
        let mut pivot = ZERO;
        for z in column.iter() {
            if z.norm() > pivot.norm() + 1e-14 {
                pivot = *z;
            }
        }
        let fix = if pivot.norm() > 0.0 {
            pivot.conj() / pivot.norm()
        } else {
            ONE
        };
        for row in 0..n {
            vecs[(row, col)] = column[row] * fix;
        }
    }
    (vals, vecs)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `max |(U U^H - 1)_{ij}|`.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    let n = u.nrows();
    let prod = u * u.adjoint();
    max_abs_diff(&prod, &DMatrix::identity(n, n))
}

/// `max |A - A^H|`.
pub fn hermiticity_defect(a: &DMatrix<C64>) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

/// Complex vector times a real matrix transpose: `M^T v`.
pub fn real_transpose_mul(m: &DMatrix<f64>, v: &[C64]) -> Vec<C64> {
    let (rows, cols) = m.shape();
    debug_assert_eq!(rows, v.len());
    let mut out = vec![ZERO; cols];
    for (col, slot) in out.iter_mut().enumerate() {
        let column = m.column(col);
        let mut re = 0.0;
        let mut im = 0.0;
        for (x, z) in column.iter().zip(v) {
            re += x * z.re;
            im += x * z.im;
        }
        *slot = c(re, im);
    }
    out
}

/// Real matrix times complex vector: `M v`.
pub fn real_mul(m: &DMatrix<f64>, v: &[C64]) -> Vec<C64> {
    let (rows, cols) = m.shape();
    debug_assert_eq!(cols, v.len());
    let mut re = vec![0.0; rows];
    let mut im = vec![0.0; rows];
    for (col, z) in v.iter().enumerate() {
        if z.re == 0.0 && z.im == 0.0 {
            continue;
        }
        let column = m.column(col);
        for (row, x) in column.iter().enumerate() {
            re[row] += x * z.re;
            im[row] += x * z.im;
        }
    }
    re.into_iter().zip(im).map(|(r, i)| c(r, i)).collect()
}

/// `V diag(exp(-i lambda t)) V^T` for a real orthogonal `V`.
pub fn spectral_propagator(values: &[f64], vectors: &DMatrix<f64>, t: f64) -> DMatrix<C64> {
    let n = values.len();
    let phases: Vec<C64> = values.iter().map(|&e| C64::from_polar(1.0, -e * t)).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let mut acc = ZERO;
        for (k, ph) in phases.iter().enumerate() {
            acc += ph * (vectors[(i, k)] * vectors[(j, k)]);
        }
        acc
    })
}

pub fn to_vector(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Applies a 2x2 operator to the qubit selected by `mask`; row and column 0
/// of `op` refer to the cleared bit.
pub fn apply_qubit_operator(psi: &[C64], mask: usize, op: [[C64; 2]; 2]) -> Vec<C64> {
    let mut out = vec![ZERO; psi.len()];
    for (b, amp) in psi.iter().enumerate() {
        if *amp == ZERO {
            continue;
        }
        let bit = usize::from(b & mask != 0);
        out[b & !mask] += op[0][bit] * amp;
        out[b | mask] += op[1][bit] * amp;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
        let m = DMatrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (&m + m.adjoint()) * c(0.5, 0.0)
    }

    #[test]
    fn jacobi_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 4, 8, 13] {
            let a = random_hermitian(n, &mut rng);
            let (vals, v) = jacobi_hermitian(&a);
            assert!(unitarity_defect(&v) < 1e-12);
            let lambda = DMatrix::from_fn(n, n, |i, j| if i == j { c(vals[i], 0.0) } else { ZERO });
            let back = &v * lambda * v.adjoint();
            assert!(max_abs_diff(&back, &a) < 1e-12, "n = {n}");
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn jacobi_agrees_with_householder_qr() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [4, 8, 16] {
            let a = random_hermitian(n, &mut rng);
            let ours = jacobi_hermitian(&a).0;
            let mut theirs: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
            theirs.sort_by(f64::total_cmp);
            for (x, y) in ours.iter().zip(&theirs) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_handles_diagonal_and_degenerate_input() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.5, 0.0), c(0.5, 0.0), ZERO]));
        let (vals, v) = jacobi_hermitian(&a);
        assert_eq!(vals, vec![0.0, 0.5, 0.5]);
        assert!(unitarity_defect(&v) < 1e-15);
    }

    #[test]
    fn eigenvector_phases_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(6, &mut rng);
        let (_, v) = jacobi_hermitian(&a);
        for col in 0..6 {
            let pivot = v
                .column(col)
                .iter()
                .copied()
                .fold(ZERO, |best, z| if z.norm() > best.norm() + 1e-14 { z } else { best });
            assert!(pivot.im.abs() < 1e-14 && pivot.re > 0.0);
        }
    }

    #[test]
    fn symmetric_eigen_is_sorted_and_sign_fixed() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let (vals, v) = symmetric_eigen(a.clone());
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(vals.clone()));
        assert!((&v * lambda * v.transpose() - a).abs().max() < 1e-12);
        let expected = [2.0 - 2f64.sqrt(), 2.0, 2.0 + 2f64.sqrt()];
        for (x, y) in vals.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
