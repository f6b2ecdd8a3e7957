//! Computable checks on the linear mass–spring system.

use num_complex::Complex64;

/// Coefficients of `det(λI − A)`, highest degree first, by Faddeev–LeVerrier.
pub fn characteristic_polynomial<const N: usize>(a: &[[f64; N]; N]) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    let mut m = [[0.0; N]; N];
    let mut c_prev = 1.0;
    for k in 1..=N {
        // M_k = A·M_{k−1} + c_{k−1}·I
        let mut next = [[0.0; N]; N];
        for i in 0..N {
            for j in 0..N {
                next[i][j] = (0..N).map(|l| a[i][l] * m[l][j]).sum::<f64>();
            }
            next[i][i] += c_prev;
        }
        m = next;
        let trace: f64 = (0..N).map(|i| (0..N).map(|l| a[i][l] * m[l][i]).sum::<f64>()).sum();
        c_prev = -trace / k as f64;
        coeffs.push(c_prev);
    }
    coeffs
}

/// Horner evaluation of a real polynomial at a complex point.
pub fn eval_polynomial(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// `det(λI − A)` by Gaussian elimination with partial pivoting in complex arithmetic.
pub fn characteristic_determinant<const N: usize>(a: &[[f64; N]; N], lambda: Complex64) -> Complex64 {
    let mut m: Vec<Vec<Complex64>> = (0..N)
        .map(|i| {
            (0..N)
                .map(|j| {
                    let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
                    d - a[i][j]
                })
                .collect()
        })
        .collect();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..N {
        let pivot = (col..N).max_by(|&r, &s| m[r][col].norm().total_cmp(&m[s][col].norm())).unwrap();
        if m[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..N {
            let f = m[r][col] / m[col][col];
            for c in col..N {
                let v = m[col][c];
                m[r][c] -= f * v;
            }
        }
    }
    det
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::MASS_SPRING_A;

    #[test]
    fn mass_spring_polynomial() {
        let p = characteristic_polynomial(&MASS_SPRING_A);
        assert_eq!(p.len(), 5);
        let want = [1.0, 0.0, 5.0, 0.0, 4.0];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn eigenvalues_purely_imaginary() {
        let p = characteristic_polynomial(&MASS_SPRING_A);
        for im in [1.0, -1.0, 2.0, -2.0] {
            let z = Complex64::new(0.0, im);
            assert!(eval_polynomial(&p, z).norm() <= 1e-12);
            assert!(characteristic_determinant(&MASS_SPRING_A, z).norm() <= 1e-12);
        }
        assert!(characteristic_determinant(&MASS_SPRING_A, Complex64::new(0.5, 0.0)).norm() > 1.0);
    }
}
