//! Small dense linear algebra used by the log-determinant family.
//!
//! Everything here works on `Array2<f64>` in standard (row-major) layout and
//! is sized for the |A|, |Q|, |P| blocks, not the full ground set.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Pivots below this value are clamped by the tolerant factorizations.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Lower Cholesky factor of a symmetric positive definite matrix.
///
/// Fails on the first pivot below [`PIVOT_FLOOR`].
pub fn cholesky(a: ArrayView2<f64>, what: &str) -> Result<Array2<f64>> {
    match factor(a, false) {
        Factor::Failed { at, pivot } => Err(Error::Singular {
            what: what.to_string(),
            pivot,
            at,
        }),
        Factor::Done { l, .. } => Ok(l),
    }
}

/// Cholesky factorization that clamps small pivots to [`PIVOT_FLOOR`] and
/// reports how many were clamped.
pub fn cholesky_clamped(a: ArrayView2<f64>) -> (Array2<f64>, usize) {
    match factor(a, true) {
        Factor::Done { l, clamps } => (l, clamps),
        Factor::Failed { .. } => unreachable!("clamping factorization cannot fail"),
    }
}

enum Factor {
    Done { l: Array2<f64>, clamps: usize },
    Failed { at: usize, pivot: f64 },
}

fn factor(a: ArrayView2<f64>, clamp: bool) -> Factor {
    let n = a.nrows();
    let mut clamps = 0;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d >= PIVOT_FLOOR) {
            if !clamp {
                return Factor::Failed { at: j, pivot: d };
            }
            d = PIVOT_FLOOR;
            clamps += 1;
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Factor::Done { l, clamps }
}

/// `log det` of a matrix given its lower Cholesky factor.
pub fn logdet_from_cholesky(l: &Array2<f64>) -> f64 {
    l.diag().iter().map(|d| 2.0 * d.ln()).sum()
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &Array2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in 0..n {
        let lii = l[[i, i]];
        for k in 0..i {
            let lik = l[[i, k]];
            if lik != 0.0 {
                let (head, mut tail) = x.view_mut().split_at(Axis(0), i);
                let src = head.row(k);
                tail.row_mut(0).scaled_add(-lik, &src);
            }
        }
        x.row_mut(i).mapv_inplace(|v| v / lii);
    }
    x
}

/// Solves `Lᵀ X = B` for lower-triangular `L`.
pub fn solve_upper_t(l: &Array2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut x = b.to_owned();
    for i in (0..n).rev() {
        let lii = l[[i, i]];
        for k in i + 1..n {
            let lki = l[[k, i]];
            if lki != 0.0 {
                let (mut head, tail) = x.view_mut().split_at(Axis(0), i + 1);
                let src = tail.row(k - i - 1);
                head.row_mut(i).scaled_add(-lki, &src);
            }
        }
        x.row_mut(i).mapv_inplace(|v| v / lii);
    }
    x
}

/// Solves `A X = B` given the Cholesky factor of `A`.
pub fn cholesky_solve(l: &Array2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let y = solve_lower(l, b);
    solve_upper_t(l, y.view())
}

/// Inverse of a lower-triangular matrix.
pub fn lower_inverse(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    solve_lower(l, Array2::<f64>::eye(n).view())
}

/// Sign and `log |det|` via LU with partial pivoting.
///
/// An exactly singular matrix yields `(0.0, -inf)`.
pub fn lu_log_abs_det(a: ArrayView2<f64>) -> (f64, f64) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "lu_log_abs_det needs a square matrix");
    let mut m = a.to_owned();
    let mut sign = 1.0;
    let mut log_abs = 0.0;
    for col in 0..n {
        let (piv, piv_val) = (col..n)
            .map(|r| (r, m[[r, col]].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_val == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if piv != col {
            for c in 0..n {
                m.swap([piv, c], [col, c]);
            }
            sign = -sign;
        }
        let p = m[[col, col]];
        if p < 0.0 {
            sign = -sign;
        }
        log_abs += p.abs().ln();
        for r in col + 1..n {
            let factor = m[[r, col]] / p;
            if factor != 0.0 {
                for c in col..n {
                    m[[r, c]] -= factor * m[[col, c]];
                }
            }
        }
    }
    (sign, log_abs)
}

/// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi
/// rotations.
///
/// Meant for test-sized matrices (n up to a few hundred).
pub fn symmetric_eigenvalues(a: ArrayView2<f64>) -> Array1<f64> {
    let n = a.nrows();
    let mut m = a.to_owned();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev = m.diag().to_owned();
    ev.as_slice_mut()
        .expect("diag copy is contiguous")
        .sort_by(|a, b| a.total_cmp(b));
    ev
}
