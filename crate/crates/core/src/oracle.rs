//! Dense matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant. Shares no code with the eigendecomposition path and serves
//! as its reference.

use num_complex::Complex64;

use crate::lindblad::{unvectorize, vectorize, Superoperator};
use crate::numkernel::ComplexMatrix;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm1(a: &ComplexMatrix) -> f64 {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn combo(terms: &[(f64, &ComplexMatrix)], identity_coeff: f64) -> ComplexMatrix {
    let n = terms[0].1.rows();
    let mut out = ComplexMatrix::identity(n).scale_real(identity_coeff);
    for &(c, m) in terms {
        out.add_scaled(Complex64::new(c, 0.0), m);
    }
    out
}

/// Solves A X = B by Gaussian elimination with partial pivoting.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = a.rows();
    let m = b.cols();
    let mut a = a.clone();
    let mut b = b.clone();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm()))?;
        if a[(piv, col)].norm() == 0.0 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let t = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            for j in 0..m {
                let t = b[(col, j)];
                b[(col, j)] = b[(piv, j)];
                b[(piv, j)] = t;
            }
        }
        let inv = a[(col, col)].inv();
        for i in col + 1..n {
            let f = a[(i, col)] * inv;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in col..n {
                let v = a[(col, j)];
                a[(i, j)] -= f * v;
            }
            for j in 0..m {
                let v = b[(col, j)];
                b[(i, j)] -= f * v;
            }
        }
    }
    let mut x = ComplexMatrix::zeros(n, m);
    for j in 0..m {
        for i in (0..n).rev() {
            let mut s = b[(i, j)];
            for k in i + 1..n {
                s -= a[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / a[(i, i)];
        }
    }
    Some(x)
}

/// e^A.
pub fn expm(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.rows();
    let nrm = norm1(a);
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a.scale_real(0.5f64.powi(s));
    let b = &PADE13;
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let inner_u = a6.matmul(&combo(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], 0.0));
    let u = a.matmul(&combo(&[(1.0, &inner_u), (b[7], &a6), (b[5], &a4), (b[3], &a2)], b[1]));
    let inner_v = a6.matmul(&combo(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], 0.0));
    let v = combo(&[(1.0, &inner_v), (b[6], &a6), (b[4], &a4), (b[2], &a2)], b[0]);
    let mut r = solve(&(&v - &u), &(&v + &u)).unwrap_or_else(|| ComplexMatrix::identity(n));
    for _ in 0..s {
        r = r.matmul(&r);
    }
    r
}

/// e^{𝓛t}[ρ₀] via the dense exponential.
pub fn propagate_expm(sop: &Superoperator, rho0: &ComplexMatrix, t: f64) -> ComplexMatrix {
    let n = sop.level_count();
    let prop = expm(&sop.matrix().scale_real(t));
    let v = vectorize(rho0);
    let col = ComplexMatrix::from_row_major(n * n, 1, v);
    unvectorize(n, prop.matmul(&col).as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_and_rotation() {
        let a = ComplexMatrix::from_diag(&[0.0, -2.0, 1.0]);
        let e = expm(&a);
        assert!((e[(1, 1)].re - (-2.0f64).exp()).abs() < 1e-15);
        assert!((e[(2, 2)].re - 1.0f64.exp()).abs() < 1e-14);
        // [[0, −θ],[θ, 0]] generates a rotation
        let th = 7.3;
        let r = ComplexMatrix::from_row_major(2, 2, vec![c(0.0, 0.0), c(-th, 0.0), c(th, 0.0), c(0.0, 0.0)]);
        let e = expm(&r);
        assert!((e[(0, 0)].re - th.cos()).abs() < 1e-13);
        assert!((e[(1, 0)].re - th.sin()).abs() < 1e-13);
    }

    #[test]
    fn nilpotent_block() {
        let a = ComplexMatrix::from_row_major(2, 2, vec![c(-1.0, 0.0), c(3.0, 1.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let e = expm(&a);
        let d = (-1.0f64).exp();
        assert!((e[(0, 0)] - c(d, 0.0)).norm() < 1e-15);
        assert!((e[(0, 1)] - c(3.0 * d, d)).norm() < 1e-15);
        assert!(e[(1, 0)].norm() < 1e-16);
    }

    #[test]
    fn solve_recovers_solution() {
        let a = ComplexMatrix::from_row_major(3, 3, vec![
            c(0.0, 1.0), c(2.0, 0.0), c(1.0, 0.0),
            c(1.0, 0.0), c(0.0, 0.0), c(3.0, -1.0),
            c(4.0, 0.0), c(1.0, 1.0), c(0.0, 0.0),
        ]);
        let x = ComplexMatrix::from_row_major(3, 1, vec![c(1.0, 2.0), c(-1.0, 0.0), c(0.5, 0.5)]);
        let b = a.matmul(&x);
        assert!(solve(&a, &b).unwrap().max_abs_diff(&x) < 1e-14);
        assert!(solve(&ComplexMatrix::zeros(2, 2), &ComplexMatrix::zeros(2, 1)).is_none());
    }
}
