//! Small dense complex linear algebra helpers shared by the other modules.

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat3 = SMatrix<C64, 3, 3>;
pub type Mat9 = SMatrix<C64, 9, 9>;
pub type Vec9 = SVector<C64, 9>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Column-major flat index of `ρ[row, col]`.
#[inline]
pub const fn vec_index(row: usize, col: usize) -> usize {
    row + 3 * col
}

pub fn vectorize(m: &Mat3) -> Vec9 {
    // nalgebra storage is column-major, which is exactly the convention we use.
    Vec9::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &Vec9) -> Mat3 {
    Mat3::from_column_slice(v.as_slice())
}

/// Largest entry modulus.
pub fn max_abs<const R: usize, const C: usize>(m: &SMatrix<C64, R, C>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `‖ρ − ρ†‖_max`.
pub fn hermiticity_residual(m: &Mat3) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Flip operator `|a⟩⟨b|` in the `(e, g1, g2)` basis.
pub fn flip(a: usize, b: usize) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(a, b)] = ONE;
    m
}

/// Eigenvalues of a Hermitian 3×3 matrix (Hermitian part is used), ascending.
pub fn hermitian_eigenvalues(m: &Mat3) -> [f64; 3] {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let ev = h.symmetric_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(f64::total_cmp);
    out
}

fn one_norm<const N: usize>(a: &SMatrix<C64, N, N>) -> f64 {
    (0..N)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring around a degree-13 Padé
/// approximant.
pub fn expm<const N: usize>(a: &SMatrix<C64, N, N>) -> SMatrix<C64, N, N> {
    let id = SMatrix::<C64, N, N>::identity();
    if a.iter().all(|z| *z == ZERO) {
        return id;
    }
    let norm = one_norm(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * C64::new(2f64.powi(-squarings), 0.0);
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let a2 = a * a;
    let a4 = a2 * a2;
    let a6 = a4 * a2;
    let u_inner = a6 * (a6 * b(13) + a4 * b(11) + a2 * b(9)) + a6 * b(7) + a4 * b(5) + a2 * b(3) + id * b(1);
    let u = a * u_inner;
    let v = a6 * (a6 * b(12) + a4 * b(10) + a2 * b(8)) + a6 * b(6) + a4 * b(4) + a2 * b(2) + id * b(0);

    let lhs = DMatrix::from_column_slice(N, N, (v - u).as_slice());
    let rhs = DMatrix::from_column_slice(N, N, (v + u).as_slice());
    let sol = lhs.lu().solve(&rhs).expect("Padé denominator is nonsingular for scaled arguments");
    let mut r = SMatrix::<C64, N, N>::from_column_slice(sol.as_slice());
    for _ in 0..squarings {
        r = r * r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectorization_is_column_major() {
        let mut m = Mat3::zeros();
        m[(2, 0)] = C64::new(7.0, 0.0);
        m[(0, 1)] = C64::new(3.0, 0.0);
        let v = vectorize(&m);
        assert_eq!(v[vec_index(2, 0)], C64::new(7.0, 0.0));
        assert_eq!(v[2], C64::new(7.0, 0.0));
        assert_eq!(v[3], C64::new(3.0, 0.0));
        assert_eq!(unvectorize(&v), m);
    }

    #[test]
    fn expm_of_diagonal_and_rotation() {
        let mut d = SMatrix::<C64, 2, 2>::zeros();
        d[(0, 0)] = C64::new(-1.0, 0.0);
        d[(1, 1)] = C64::new(0.0, 2.0);
        let e = expm(&d);
        assert!((e[(0, 0)] - C64::new((-1.0f64).exp(), 0.0)).norm() < 1e-15);
        assert!((e[(1, 1)] - C64::new(0.0, 2.0).exp()).norm() < 1e-15);

        // large-norm generator of a rotation: exp(θ J) with J = [[0,-1],[1,0]]
        let theta = 40.0;
        let mut j = SMatrix::<C64, 2, 2>::zeros();
        j[(0, 1)] = C64::new(-theta, 0.0);
        j[(1, 0)] = C64::new(theta, 0.0);
        let r = expm(&j);
        assert!((r[(0, 0)].re - theta.cos()).abs() < 1e-12);
        assert!((r[(1, 0)].re - theta.sin()).abs() < 1e-12);
    }

    #[test]
    fn expm_zero_is_identity() {
        assert_eq!(expm(&Mat9::zeros()), Mat9::identity());
    }
}
