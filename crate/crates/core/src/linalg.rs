//! Dense numerical linear algebra used by the fitting routines.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Default relative singular-value threshold for null spaces.
pub const NULL_TOL: f64 = 1e-9;
/// Threshold on normalized singular values for ranks.
pub const RANK_TOL: f64 = 1e-8;

/// Singular values of `a`, largest first.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Numerical rank with singular values normalized by the largest one.
pub fn rank(a: &DMatrix<f64>, tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&top) if top > 0.0 && top.is_finite() => s.iter().filter(|&&x| x > tol * top).count(),
        _ => 0,
    }
}

/// Orthonormal-ish basis (columns) of the right null space of `a`.
///
/// Columns are scaled to unit norm before the SVD and the basis is mapped
/// back, so badly scaled monomial columns do not hide null vectors.
pub fn null_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let scale: Vec<f64> = (0..n)
        .map(|j| {
            let c = a.column(j).norm();
            if c > 0.0 && c.is_finite() {
                c
            } else {
                1.0
            }
        })
        .collect();
    let mut m = a.clone();
    for (j, s) in scale.iter().enumerate() {
        m.column_mut(j).scale_mut(1.0 / s);
    }
    // Pad to at least n rows so the SVD exposes the full right singular basis.
    if m.nrows() < n {
        let (rows, extra) = (m.nrows(), n - m.nrows());
        m = m.insert_rows(rows, extra, 0.0);
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let top = sv.iter().copied().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = (0..sv.len())
        .filter(|&i| top == 0.0 || sv[i] <= tol * top)
        .map(|i| {
            let mut v: DVector<f64> = vt.row(i).transpose();
            for (j, s) in scale.iter().enumerate() {
                v[j] /= s;
            }
            let nv = v.norm();
            v / nv
        })
        .collect();
    if cols.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Reduced row echelon form of the rows spanned by the basis columns.
///
/// Returns one row per basis vector; every row has a leading 1 and zeros in
/// the other rows' pivot columns. Pivots are taken from the highest column
/// index down, so each row leads with its last nonzero column and the
/// supports of the rows favour low column indices.
pub fn rref_rows(basis: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let k = basis.ncols();
    let n = basis.nrows();
    let mut rows: Vec<Vec<f64>> = (0..k).map(|c| basis.column(c).iter().copied().collect()).collect();
    let mut r = 0;
    for col in (0..n).rev() {
        if r == k {
            break;
        }
        let (best, val) = (r..k)
            .map(|i| (i, rows[i][col].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val < 1e-10 {
            continue;
        }
        rows.swap(r, best);
        let p = rows[r][col];
        for x in rows[r].iter_mut() {
            *x /= p;
        }
        for i in 0..k {
            if i != r {
                let f = rows[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        rows[i][j] -= f * rows[r][j];
                    }
                }
            }
        }
        r += 1;
    }
    rows.truncate(r);
    for row in rows.iter_mut() {
        for x in row.iter_mut() {
            if x.abs() < 1e-12 {
                *x = 0.0;
            }
        }
    }
    rows
}

/// Best rational approximation with denominator at most `max_den`, accepted
/// only when it is within `tol` (relative to max(1,|x|)).
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let scale = x.abs().max(1.0);
    if x.abs() < tol {
        return Some(BigRational::zero());
    }
    // Continued-fraction convergents.
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut v = x;
    for _ in 0..64 {
        let a = v.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - x).abs() <= tol * scale {
            return Some(BigRational::new(BigInt::from(h1), BigInt::from(k1)));
        }
        let frac = v - a;
        if frac.abs() < 1e-300 {
            break;
        }
        v = 1.0 / frac;
    }
    None
}

/// Entry-wise [`rationalize`]; `None` if any entry fails.
pub fn rationalize_all(v: &[f64], max_den: i64, tol: f64) -> Option<Vec<BigRational>> {
    v.iter().map(|&x| rationalize(x, max_den, tol)).collect()
}

/// Least common multiple of denominators, used to present integer coefficients.
pub fn common_denominator(v: &[BigRational]) -> BigInt {
    use num_integer::Integer;
    v.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_rank_one() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, -1.0, -2.0, -3.0]);
        let ns = null_space(&a, NULL_TOL);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).norm() < 1e-10);
        assert_eq!(rank(&a, RANK_TOL), 1);
    }

    #[test]
    fn wide_matrices_are_padded() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        assert_eq!(null_space(&a, NULL_TOL).ncols(), 2);
    }

    #[test]
    fn rref_normalizes_leading_entries() {
        let basis = DMatrix::from_column_slice(3, 1, &[2.0, -4.0, 0.0]);
        let rows = rref_rows(&basis);
        assert_eq!(rows, vec![vec![-0.5, 1.0, 0.0]]);
    }

    #[test]
    fn continued_fractions() {
        assert_eq!(rationalize(0.75, 1000, 1e-9), Some(BigRational::new(3.into(), 4.into())));
        assert_eq!(rationalize(-2.0 / 3.0 + 1e-12, 1000, 1e-9), Some(BigRational::new((-2).into(), 3.into())));
        assert_eq!(rationalize(std::f64::consts::PI, 1000, 1e-9), None);
        assert_eq!(rationalize(1e-13, 1000, 1e-9), Some(BigRational::zero()));
    }
}
