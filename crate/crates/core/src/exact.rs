//! Exact rational linear algebra for small integer systems.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Solves `matrix · x = rhs` exactly by Gauss-Jordan elimination.
///
/// Returns `None` when the system is inconsistent. Free variables, if any,
/// are set to zero.
pub fn solve_integer_system(matrix: &[Vec<i128>], rhs: &[i128]) -> Option<Vec<BigRational>> {
    let rows = matrix.len();
    assert_eq!(rows, rhs.len(), "row count mismatch");
    let cols = matrix.first().map_or(0, Vec::len);
    let mut aug: Vec<Vec<BigRational>> = matrix
        .iter()
        .zip(rhs)
        .map(|(row, &b)| {
            row.iter()
                .chain(std::iter::once(&b))
                .map(|&v| BigRational::from_integer(BigInt::from(v)))
                .collect()
        })
        .collect();

    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !aug[i][c].is_zero()) else {
            continue;
        };
        aug.swap(r, p);
        let inv = aug[r][c].recip();
        for v in aug[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..rows {
            if i != r && !aug[i][c].is_zero() {
                let factor = aug[i][c].clone();
                for j in c..=cols {
                    let delta = &factor * &aug[r][j];
                    aug[i][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    if aug[r..].iter().any(|row| !row[cols].is_zero()) {
        return None;
    }
    let mut x = vec![BigRational::zero(); cols];
    for (i, &c) in pivots.iter().enumerate() {
        x[c] = aug[i][cols].clone();
    }
    Some(x)
}

pub fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
