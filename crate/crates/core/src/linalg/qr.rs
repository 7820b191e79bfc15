use crate::error::{Error, Result};

/// Condition estimates above this mark a design as rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

/// Least-squares fit `min ‖y − X b‖` by Householder QR with column pivoting.
///
/// `columns` are the columns of `X`, each of length `n`. Returns the
/// coefficients (in the original column order) and the residual `y − X b`.
pub fn least_squares_qr(columns: &[&[f64]], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let k = columns.len();
    if k == 0 {
        return Ok((Vec::new(), y.to_vec()));
    }
    if k > n {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    // Column-major working copy.
    let mut a: Vec<Vec<f64>> = columns.iter().map(|c| c.to_vec()).collect();
    for c in &a {
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: c.len(),
            });
        }
    }
    let mut rhs = y.to_vec();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut norms: Vec<f64> = a.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let mut diag = vec![0.0; k];

    for step in 0..k {
        // Pivot on the largest remaining column norm.
        let (best, _) =
            norms[step..].iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (idx, &v)| if v > acc.1 { (idx, v) } else { acc },
            );
        let best = best + step;
        a.swap(step, best);
        norms.swap(step, best);
        perm.swap(step, best);

        let col = &a[step];
        let alpha_sq: f64 = col[step..].iter().map(|v| v * v).sum();
        let alpha_norm = alpha_sq.sqrt();
        if alpha_norm == 0.0 {
            return Err(Error::RankDeficient {
                condition: f64::INFINITY,
            });
        }
        let alpha = if col[step] > 0.0 { -alpha_norm } else { alpha_norm };
        let mut v: Vec<f64> = col[step..].to_vec();
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|x| x * x).sum();
        diag[step] = alpha;

        let reflect = |target: &mut [f64]| {
            if vnorm_sq == 0.0 {
                return;
            }
            let dot: f64 = v.iter().zip(&target[step..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm_sq;
            for (t, vi) in target[step..].iter_mut().zip(&v) {
                *t -= f * vi;
            }
        };
        for c in a.iter_mut().skip(step) {
            reflect(c);
        }
        reflect(&mut rhs);
        for (j, c) in a.iter().enumerate().skip(step + 1) {
            norms[j] = c[step + 1..].iter().map(|v| v * v).sum();
        }
    }

    let r00 = diag[0].abs();
    let rkk = diag[k - 1].abs();
    let condition = if rkk == 0.0 { f64::INFINITY } else { r00 / rkk };
    if condition > MAX_CONDITION {
        return Err(Error::RankDeficient { condition });
    }

    // Back substitution on R b = Qᵀ y; R_ij for j > i lives in a[j][i].
    let mut b = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = rhs[i];
        for j in i + 1..k {
            s -= a[j][i] * b[j];
        }
        b[i] = s / a[i][i];
    }
    let mut coef = vec![0.0; k];
    for (pos, &orig) in perm.iter().enumerate() {
        coef[orig] = b[pos];
    }
    let mut residual = y.to_vec();
    for (c, &bj) in columns.iter().zip(&coef) {
        for (r, x) in residual.iter_mut().zip(c.iter()) {
            *r -= bj * x;
        }
    }
    Ok((coef, residual))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_design_returns_response() {
        let y = [1.0, 2.0];
        let (b, r) = least_squares_qr(&[], &y).unwrap();
        assert!(b.is_empty());
        assert_eq!(r, y.to_vec());
    }

    #[test]
    fn exact_multiple() {
        let x = [1.0, -2.0, 0.5, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let (b, r) = least_squares_qr(&[&x], &y).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-14);
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn duplicate_columns_are_rank_deficient() {
        let x = [1.0, 2.0, 3.0];
        let y = [1.0, 0.0, 1.0];
        assert!(matches!(
            least_squares_qr(&[&x, &x], &y),
            Err(Error::RankDeficient { .. })
        ));
        assert!(least_squares_qr(&[&x, &[0.0, 1.0, 0.0], &[1.0, 1.0, 1.0], &[2.0, 0.0, 1.0]], &y).is_err());
    }

    #[test]
    fn pivoting_preserves_coefficient_order() {
        let x1 = [0.1, 0.0, 0.0, 0.1];
        let x2 = [10.0, 1.0, -3.0, 2.0];
        let y: Vec<f64> = (0..4).map(|i| 2.0 * x1[i] - 0.5 * x2[i]).collect();
        let (b, _) = least_squares_qr(&[&x1, &x2], &y).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12);
        assert!((b[1] + 0.5).abs() < 1e-12);
    }
}
