//! Small dense kernels over the generic scalar: full-pivot LU for real
//! systems and a partial-pivot complex LU used by the eigenvalue oracle.
//!
//! Matrices are row-major `Vec`s; every dimension here is at most a dozen.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::jet::Jet2;
use crate::scalar::{Field, Real};

/// `P·A·Q = L·U` with complete pivoting.
#[derive(Clone, Debug)]
pub struct FullPivLu<T> {
    n: usize,
    lu: Vec<T>,
    row_perm: Vec<usize>,
    col_perm: Vec<usize>,
}

impl<T: Real> FullPivLu<T> {
    pub fn new(mut a: Vec<T>, n: usize) -> Self {
        assert_eq!(a.len(), n * n, "matrix is not {n}x{n}");
        let mut row_perm: Vec<usize> = (0..n).collect();
        let mut col_perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut pr, mut pc, mut best) = (k, k, T::zero());
            for r in k..n {
                for c in k..n {
                    let v = a[r * n + c].abs();
                    if v > best {
                        best = v;
                        pr = r;
                        pc = c;
                    }
                }
            }
            if pr != k {
                for c in 0..n {
                    a.swap(k * n + c, pr * n + c);
                }
                row_perm.swap(k, pr);
            }
            if pc != k {
                for r in 0..n {
                    a.swap(r * n + k, r * n + pc);
                }
                col_perm.swap(k, pc);
            }
            let p = a[k * n + k];
            if p.is_zero() {
                continue;
            }
            for r in (k + 1)..n {
                let f = a[r * n + k] / p;
                a[r * n + k] = f;
                if f.is_zero() {
                    continue;
                }
                for c in (k + 1)..n {
                    let t = a[k * n + c];
                    a[r * n + c] = a[r * n + c] - f * t;
                }
            }
        }
        FullPivLu {
            n,
            lu: a,
            row_perm,
            col_perm,
        }
    }

    /// Diagonal of `U`, in pivot order (non-increasing magnitude up to
    /// rounding).
    pub fn pivots(&self) -> Vec<T> {
        (0..self.n).map(|k| self.lu[k * self.n + k]).collect()
    }

    /// Number of pivots whose magnitude is at most `rel_tol` times the
    /// largest one: an estimate of the nullity.
    pub fn nullity(&self, rel_tol: T) -> usize {
        let piv = self.pivots();
        let max = piv.iter().fold(T::zero(), |m, p| m.max(p.abs()));
        if max.is_zero() {
            return self.n;
        }
        piv.iter().filter(|p| p.abs() <= rel_tol * max).count()
    }

    /// Solve `A x = b`.  Returns `None` if a pivot is exactly zero.
    pub fn solve(&self, b: &[T]) -> Option<Vec<T>> {
        let n = self.n;
        let mut y: Vec<T> = self.row_perm.iter().map(|&r| b[r]).collect();
        for r in 0..n {
            let mut s = y[r];
            for c in 0..r {
                s = s - self.lu[r * n + c] * y[c];
            }
            y[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = y[r];
            for c in (r + 1)..n {
                s = s - self.lu[r * n + c] * y[c];
            }
            let p = self.lu[r * n + r];
            if p.is_zero() {
                return None;
            }
            y[r] = s / p;
        }
        let mut x = vec![T::zero(); n];
        for (k, &c) in self.col_perm.iter().enumerate() {
            x[c] = y[k];
        }
        Some(x)
    }
}

fn norm_sqr<T: Field>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// Determinant and `tr(A⁻¹)` of a complex matrix by partial-pivot LU.
///
/// Returns `None` when an exactly zero pivot is met (singular matrix).
pub fn det_and_inverse_trace<T: Field>(
    mut a: Vec<Complex<T>>,
    n: usize,
) -> Option<(Complex<T>, Complex<T>)> {
    assert_eq!(a.len(), n * n);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut det = Complex::<T>::one();
    for k in 0..n {
        let mut pr = k;
        let mut best = norm_sqr(a[k * n + k]);
        for r in (k + 1)..n {
            let v = norm_sqr(a[r * n + k]);
            if v > best {
                best = v;
                pr = r;
            }
        }
        if best.is_zero() {
            return None;
        }
        if pr != k {
            for c in 0..n {
                a.swap(k * n + c, pr * n + c);
            }
            perm.swap(k, pr);
            det = -det;
        }
        let p = a[k * n + k];
        det = det * p;
        for r in (k + 1)..n {
            let f = a[r * n + k] / p;
            a[r * n + k] = f;
            for c in (k + 1)..n {
                let t = a[k * n + c];
                a[r * n + c] = a[r * n + c] - f * t;
            }
        }
    }
    // tr(A⁻¹) = Σ_j (A⁻¹)_{jj}; solve for each unit vector.
    let mut trace = Complex::<T>::zero();
    for j in 0..n {
        let mut y: Vec<Complex<T>> = perm
            .iter()
            .map(|&r| if r == j { Complex::one() } else { Complex::zero() })
            .collect();
        for r in 0..n {
            let mut s = y[r];
            for c in 0..r {
                s = s - a[r * n + c] * y[c];
            }
            y[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = y[r];
            for c in (r + 1)..n {
                s = s - a[r * n + c] * y[c];
            }
            y[r] = s / a[r * n + r];
        }
        trace = trace + y[j];
    }
    Some((det, trace))
}

/// Infinity norm (max absolute row sum) of a real row-major matrix.
pub fn inf_norm<T: Field>(a: &[T], n: usize) -> T {
    (0..n)
        .map(|r| {
            (0..n)
                .map(|c| a[r * n + c].abs())
                .fold(T::zero(), |s, x| s + x)
        })
        .fold(T::zero(), |m, x| m.max(x))
}


/// Determinant of a jet matrix by elimination with complete pivoting on the
/// value part.
///
/// A block whose value part vanishes entirely is finished by expansion: it
/// contributes `O(χ^m)` for an `m×m` block, so only `m ≤ 2` survives the
/// second-order truncation.
pub fn jet_det<T: Field>(mut a: Vec<Jet2<T>>, n: usize) -> Jet2<T> {
    assert_eq!(a.len(), n * n, "matrix is not {n}x{n}");
    let mag = |z: &Jet2<T>| z.v0.re.magnitude() + z.v0.im.magnitude();
    let mut det = Jet2::<T>::one();
    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, 0.0);
        for r in k..n {
            for c in k..n {
                let v = mag(&a[r * n + c]);
                if v > best {
                    best = v;
                    pr = r;
                    pc = c;
                }
            }
        }
        if best == 0.0 || a[pr * n + pc].v0.is_zero() {
            let m = n - k;
            let at = |r: usize, c: usize| a[(k + r) * n + k + c];
            let rest = match m {
                1 => at(0, 0),
                2 => at(0, 0) * at(1, 1) - at(0, 1) * at(1, 0),
                _ => Jet2::zero(),
            };
            return det * rest;
        }
        if pr != k {
            for c in 0..n {
                a.swap(k * n + c, pr * n + c);
            }
            det = -det;
        }
        if pc != k {
            for r in 0..n {
                a.swap(r * n + k, r * n + pc);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        let inv = pivot.recip().expect("pivot value is nonzero");
        for r in k + 1..n {
            let f = a[r * n + k] * inv;
            if f.is_zero() {
                continue;
            }
            for c in k + 1..n {
                let t = f * a[k * n + c];
                a[r * n + c] -= t;
            }
        }
    }
    det
}

/// Principal submatrix with the listed rows and columns removed.
pub fn drop_rows_cols<T: Copy>(a: &[T], n: usize, drop: &[usize]) -> Vec<T> {
    let keep: Vec<usize> = (0..n).filter(|i| !drop.contains(i)).collect();
    let mut out = Vec::with_capacity(keep.len() * keep.len());
    for &r in &keep {
        for &c in &keep {
            out.push(a[r * n + c]);
        }
    }
    out
}
