//! Dense exact linear algebra over the crate's two fields (`Rat` and
//! [`RatFunc`]), just enough for kernel and span computations: reduced row
//! echelon form, nullspace bases, and single solves.

use num::Zero;

use super::{Rat, RatFunc};

/// Minimal field interface for the eliminators below.
pub(crate) trait Field: Clone + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// `None` only on division by zero.
    fn div(&self, o: &Self) -> Option<Self>;
    fn is_zero(&self) -> bool;
}

impl Field for Rat {
    fn zero() -> Self {
        <Rat as Zero>::zero()
    }
    fn one() -> Self {
        <Rat as num::One>::one()
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Option<Self> {
        if Zero::is_zero(o) {
            None
        } else {
            Some(self / o)
        }
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

impl Field for RatFunc {
    fn zero() -> Self {
        RatFunc::zero()
    }
    fn one() -> Self {
        RatFunc::one()
    }
    fn sub(&self, o: &Self) -> Self {
        RatFunc::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        RatFunc::mul(self, o)
    }
    fn div(&self, o: &Self) -> Option<Self> {
        RatFunc::div(self, o).ok()
    }
    fn is_zero(&self) -> bool {
        RatFunc::is_zero(self)
    }
}

/// In-place reduced row echelon form; returns the pivot column of each
/// surviving row, in order.
pub(crate) fn rref<F: Field>(mat: &mut Vec<Vec<F>>) -> Vec<usize> {
    let rows = mat.len();
    let cols = mat.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !mat[i][c].is_zero()) else {
            continue;
        };
        mat.swap(r, p);
        let inv = F::one().div(&mat[r][c]).expect("pivot nonzero");
        for x in mat[r].iter_mut() {
            *x = x.mul(&inv);
        }
        for i in 0..rows {
            if i != r && !mat[i][c].is_zero() {
                let f = mat[i][c].clone();
                for j in 0..cols {
                    let d = mat[r][j].mul(&f);
                    mat[i][j] = mat[i][j].sub(&d);
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    mat.truncate(r);
    pivots
}

/// Basis of the right nullspace of `mat` (with `cols` columns), one vector
/// per free column, in ascending free-column order.
pub(crate) fn nullspace<F: Field>(mut mat: Vec<Vec<F>>, cols: usize) -> Vec<Vec<F>> {
    for row in &mat {
        debug_assert_eq!(row.len(), cols);
    }
    let pivots = rref(&mut mat);
    let mut out = Vec::new();
    for free in 0..cols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![F::zero(); cols];
        v[free] = F::one();
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = F::zero().sub(&mat[row][free]);
        }
        out.push(v);
    }
    out
}

/// One solution of `mat * x = rhs` (free unknowns set to zero), or `None`
/// when the system is inconsistent.
pub(crate) fn solve<F: Field>(mat: &[Vec<F>], rhs: &[F]) -> Option<Vec<F>> {
    let cols = mat.first().map_or(0, |r| r.len());
    let mut aug: Vec<Vec<F>> = mat
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let mut r = row.clone();
            r.push(b.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.contains(&cols) {
        return None; // pivot in the augmented column
    }
    let mut x = vec![F::zero(); cols];
    for (row, &pc) in pivots.iter().enumerate() {
        x[pc] = aug[row][cols].clone();
    }
    Some(x)
}
