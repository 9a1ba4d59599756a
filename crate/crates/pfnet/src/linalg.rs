//! Exact linear algebra: fraction-free (Bareiss) elimination for small dense
//! systems and a sparse rational eliminator for generator matrices.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::rational::{lcm_denominators, Q};

/// Solves `a · x = b` exactly, where `a` is `m × n`.
///
/// Rows are scaled to integers and reduced by fraction-free Gaussian
/// elimination, so every intermediate entry is a minor of the original
/// integer matrix and every division is exact. Returns one particular
/// solution (free variables set to zero) or `None` if the system is
/// inconsistent.
pub fn solve(a: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let m = a.len();
    assert_eq!(m, b.len(), "row count mismatch");
    let n = a.first().map_or(0, Vec::len);
    // Integer augmented matrix.
    let mut mat: Vec<Vec<BigInt>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            assert_eq!(row.len(), n, "ragged matrix");
            let scale = lcm_denominators(row.iter().chain(std::iter::once(rhs)));
            row.iter()
                .chain(std::iter::once(rhs))
                .map(|x| (x * Q::from_integer(scale.clone())).to_integer())
                .collect()
        })
        .collect();

    let mut prev = BigInt::one();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for col in 0..n {
        if r == m {
            break;
        }
        let Some(p) = (r..m).find(|&i| !mat[i][col].is_zero()) else {
            continue;
        };
        mat.swap(r, p);
        for i in r + 1..m {
            for j in col + 1..=n {
                let v = (&mat[r][col] * &mat[i][j] - &mat[i][col] * &mat[r][j]) / &prev;
                mat[i][j] = v;
            }
            mat[i][col] = BigInt::zero();
        }
        // Rows above the pivot row and columns left of `col` are untouched;
        // entries of skipped columns below `r` are already zero.
        prev = mat[r][col].clone();
        pivots.push(col);
        r += 1;
    }
    if mat[r..].iter().any(|row| !row[n].is_zero()) {
        return None;
    }
    let mut x = vec![Q::zero(); n];
    for (row, &col) in pivots.iter().enumerate().rev() {
        let mut acc = Q::from_integer(mat[row][n].clone());
        for j in col + 1..n {
            if !mat[row][j].is_zero() && !x[j].is_zero() {
                acc -= Q::from_integer(mat[row][j].clone()) * &x[j];
            }
        }
        x[col] = acc / Q::from_integer(mat[row][col].clone());
    }
    Some(x)
}

/// Result of a sparse square solve.
#[derive(Debug, PartialEq, Eq)]
pub enum SparseSolveError {
    /// The matrix is singular; the offending column index is reported.
    Singular(usize),
}

/// Solves a square sparse system `a · x = b` exactly. `rows[i]` maps
/// column → coefficient.
///
/// Rows are scaled to integers and kept primitive (content divided out after
/// every update), which keeps entries far smaller than rational elimination
/// would. Pivots follow a Markowitz-style rule: the column with the fewest
/// active rows, then its shortest row.
pub fn solve_sparse(rows: Vec<BTreeMap<usize, Q>>, rhs: Vec<Q>) -> Result<Vec<Q>, SparseSolveError> {
    let n = rows.len();
    assert_eq!(n, rhs.len());
    let mut int_rows: Vec<BTreeMap<usize, BigInt>> = Vec::with_capacity(n);
    let mut int_rhs: Vec<BigInt> = Vec::with_capacity(n);
    for (row, b) in rows.iter().zip(&rhs) {
        let l = lcm_denominators(row.values().chain(std::iter::once(b)));
        int_rows.push(row.iter().map(|(&c, v)| (c, (v * &l).to_integer())).collect());
        int_rhs.push((b * &l).to_integer());
    }
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, row) in int_rows.iter().enumerate() {
        for &c in row.keys() {
            col_rows[c].insert(i);
        }
    }
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut pivot_row_of_col = vec![usize::MAX; n];
    for _ in 0..n {
        let col = (0..n)
            .filter(|&c| !col_done[c])
            .min_by_key(|&c| col_rows[c].len())
            .expect("one column per remaining step");
        col_done[col] = true;
        order.push(col);
        let Some(p) = col_rows[col].iter().copied().min_by_key(|&i| int_rows[i].len()) else {
            return Err(SparseSolveError::Singular(col));
        };
        row_done[p] = true;
        pivot_row_of_col[col] = p;
        // Retire the pivot row from the active column sets.
        for &c in int_rows[p].keys() {
            col_rows[c].remove(&p);
        }
        let pivot_row = int_rows[p].clone();
        let pv = pivot_row[&col].clone();
        let targets: Vec<usize> = col_rows[col].iter().copied().collect();
        for i in targets {
            let a = int_rows[i][&col].clone();
            let g = a.gcd(&pv);
            let (fi, fp) = (&pv / &g, &a / &g);
            let row = &mut int_rows[i];
            for v in row.values_mut() {
                *v *= &fi;
            }
            int_rhs[i] = &int_rhs[i] * &fi - &fp * &int_rhs[p];
            for (&c, v) in &pivot_row {
                let entry = row.entry(c).or_insert_with(BigInt::zero);
                *entry -= &fp * v;
                if entry.is_zero() {
                    row.remove(&c);
                    col_rows[c].remove(&i);
                } else {
                    col_rows[c].insert(i);
                }
            }
            let content = row.values().chain(std::iter::once(&int_rhs[i])).fold(BigInt::zero(), |g, v| g.gcd(v));
            if !content.is_zero() && !content.is_one() {
                for v in row.values_mut() {
                    *v /= &content;
                }
                int_rhs[i] /= &content;
            }
        }
    }
    debug_assert!(row_done.iter().all(|&d| d));
    // Back substitution in reverse pivot order: the pivot row of a column
    // only involves columns pivoted later.
    let mut x = vec![Q::zero(); n];
    for &col in order.iter().rev() {
        let p = pivot_row_of_col[col];
        let mut acc = Q::from_integer(int_rhs[p].clone());
        for (&c, v) in &int_rows[p] {
            if c != col && !x[c].is_zero() {
                acc -= &x[c] * v;
            }
        }
        x[col] = acc / Q::from_integer(int_rows[p][&col].clone());
    }
    Ok(x)
}
