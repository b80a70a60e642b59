//! Small dense helpers on row-major `Vec<T>` matrices, generic over [`Real`].
//! Regression designs here have a few dozen columns at most.

use crate::num::Real;

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(a: &[T], d: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s = s - l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Inverse from a lower Cholesky factor.
pub fn chol_inverse<T: Real>(l: &[T], d: usize) -> Vec<T> {
    // Invert L, then A^{-1} = L^{-T} L^{-1}.
    let mut linv = vec![T::zero(); d * d];
    for i in 0..d {
        linv[i * d + i] = T::one() / l[i * d + i];
        for j in 0..i {
            let mut s = T::zero();
            for k in j..i {
                s = s + l[i * d + k] * linv[k * d + j];
            }
            linv[i * d + j] = -s / l[i * d + i];
        }
    }
    let mut inv = vec![T::zero(); d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = T::zero();
            for k in i..d {
                s = s + linv[k * d + i] * linv[k * d + j];
            }
            inv[i * d + j] = s;
            inv[j * d + i] = s;
        }
    }
    inv
}

pub fn chol_log_det<T: Real>(l: &[T], d: usize) -> T {
    (0..d).fold(T::zero(), |acc, i| acc + l[i * d + i].ln()) * T::of(2.0)
}

/// `v' A v`.
pub fn quad_form<T: Real>(a: &[T], v: &[T]) -> T {
    let d = v.len();
    let mut s = T::zero();
    for i in 0..d {
        let row = &a[i * d..(i + 1) * d];
        let mut r = T::zero();
        for j in 0..d {
            r = r + row[j] * v[j];
        }
        s = s + v[i] * r;
    }
    s
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
