use super::SymmetricMatrix;

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(m: &SymmetricMatrix) -> Vec<f64> {
    let n = m.dim();
    let mut a: Vec<f64> = m.as_slice().to_vec();
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let m = SymmetricMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]], 0.0).unwrap();
        let e = symmetric_eigenvalues(&m);
        assert!((e[0] - 0.5).abs() < 1e-14 && (e[1] - 1.5).abs() < 1e-14);
        let m = SymmetricMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]], 0.0).unwrap();
        let e = symmetric_eigenvalues(&m);
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_and_zero() {
        let e = symmetric_eigenvalues(&SymmetricMatrix::from_diag(&[3.0, -1.0, 2.0]));
        assert_eq!(e, vec![-1.0, 2.0, 3.0]);
        assert_eq!(symmetric_eigenvalues(&SymmetricMatrix::zeros(2)), vec![0.0, 0.0]);
    }
}
