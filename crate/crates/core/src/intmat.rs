//! Exact integer linear algebra for the phase-extraction matrices.

/// Determinant by fraction-free (Bareiss) elimination; `None` on overflow.
pub(crate) fn determinant(matrix: &[Vec<i128>]) -> Option<i128> {
    let n = matrix.len();
    if n == 0 {
        return Some(1);
    }
    let mut a: Vec<Vec<i128>> = matrix.to_vec();
    let mut sign: i128 = 1;
    let mut prev: i128 = 1;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(pivot) => {
                    a.swap(k, pivot);
                    sign = -sign;
                }
                None => return Some(0),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = a[k][k].checked_mul(a[i][j])?.checked_sub(a[i][k].checked_mul(a[k][j])?)?;
                a[i][j] = num / prev;
            }
            a[i][k] = 0;
        }
        prev = a[k][k];
    }
    Some(sign * a[n - 1][n - 1])
}

/// Inverse of a unimodular integer matrix (determinant +-1), computed from
/// the adjugate so that every entry stays an exact integer.
///
/// Returns `None` if the matrix is not unimodular or an intermediate
/// determinant overflows.
pub(crate) fn inverse_unimodular(matrix: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    let n = matrix.len();
    let wide: Vec<Vec<i128>> = matrix.iter().map(|r| r.iter().map(|&v| v as i128).collect()).collect();
    let det = determinant(&wide)?;
    if det != 1 && det != -1 {
        return None;
    }
    let mut inv = vec![vec![0i64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i128>> = (0..n)
                .filter(|&r| r != i)
                .map(|r| (0..n).filter(|&c| c != j).map(|c| wide[r][c]).collect())
                .collect();
            let cofactor = determinant(&minor)? * if (i + j) % 2 == 0 { 1 } else { -1 };
            // adj(A)[j][i] = cofactor(i, j); det is +-1.
            let value = cofactor * det;
            inv[j][i] = i64::try_from(value).ok()?;
        }
    }
    // Exact verification of A * inv = I.
    for i in 0..n {
        for j in 0..n {
            let mut acc: i128 = 0;
            for k in 0..n {
                acc = acc.checked_add(wide[i][k].checked_mul(inv[k][j] as i128)?)?;
            }
            if acc != if i == j { 1 } else { 0 } {
                return None;
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_of_identity() {
        let id: Vec<Vec<i128>> = (0..4)
            .map(|i| (0..4).map(|j| i128::from(i == j)).collect())
            .collect();
        assert_eq!(determinant(&id), Some(1));
    }

    #[test]
    fn determinant_known_3x3() {
        let m = vec![vec![2, 0, 1], vec![1, 1, 0], vec![0, 3, 1]];
        // 2*(1*1-0*3) - 0 + 1*(1*3-1*0) = 2 + 3 = 5
        assert_eq!(determinant(&m), Some(5));
    }

    #[test]
    fn determinant_with_zero_pivot() {
        let m = vec![vec![0, 1], vec![1, 0]];
        assert_eq!(determinant(&m), Some(-1));
    }

    #[test]
    fn inverse_of_unimodular_matrix() {
        let m = vec![vec![1, 0, 0], vec![0, 1, 0], vec![1, 0, 1]];
        let inv = inverse_unimodular(&m).unwrap();
        assert_eq!(inv, vec![vec![1, 0, 0], vec![0, 1, 0], vec![-1, 0, 1]]);
    }

    #[test]
    fn non_unimodular_rejected() {
        let m = vec![vec![2, 0], vec![0, 1]];
        assert!(inverse_unimodular(&m).is_none());
    }
}
