//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Solution of the generalized symmetric eigenproblem `K v = w^2 M v`.
///
/// Eigenvalues are returned as angular frequencies sorted ascending;
/// eigenvectors are mass-normalized (`v^T M v = 1`).
pub struct ModalDecomposition {
    pub frequencies: Vec<f64>,
    pub shapes: Vec<DVector<f64>>,
}

/// Generalized symmetric eigensolve via Cholesky reduction of the mass
/// matrix. `mass` must be symmetric positive definite.
pub fn generalized_symmetric_eig(
    mass: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
) -> Result<ModalDecomposition> {
    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| CoreError::Linalg("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // A = L^-1 K L^-T
    let mut a = stiffness.clone();
    l.solve_lower_triangular_mut(&mut a);
    let mut at = a.transpose();
    l.solve_lower_triangular_mut(&mut at);
    // Symmetrize against rounding before the symmetric eigensolver.
    let sym = (&at + at.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut frequencies = Vec::with_capacity(order.len());
    let mut shapes = Vec::with_capacity(order.len());
    for &i in &order {
        let lambda = eig.eigenvalues[i];
        frequencies.push(lambda.max(0.0).sqrt());
        let y = eig.eigenvectors.column(i).into_owned();
        let phi = lt
            .clone()
            .solve_upper_triangular(&y)
            .ok_or_else(|| CoreError::Linalg("singular Cholesky factor".into()))?;
        shapes.push(phi);
    }
    Ok(ModalDecomposition { frequencies, shapes })
}

/// Complex modal pair of a Hermitian generalized eigenproblem.
pub struct HermitianModalDecomposition {
    pub frequencies: Vec<f64>,
    pub shapes: Vec<DVector<Complex64>>,
}

/// Generalized eigensolve for complex Hermitian `(M, K)` through the real
/// embedding `A + iB -> [[A, -B], [B, A]]`; every complex eigenpair shows up
/// twice in the embedded problem and is de-duplicated here.
pub fn hermitian_generalized_eig(
    mass: &DMatrix<Complex64>,
    stiffness: &DMatrix<Complex64>,
) -> Result<HermitianModalDecomposition> {
    let n = mass.nrows();
    let embed = |m: &DMatrix<Complex64>| {
        let mut r = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let c = m[(i, j)];
                r[(i, j)] = c.re;
                r[(i + n, j + n)] = c.re;
                r[(i, j + n)] = -c.im;
                r[(i + n, j)] = c.im;
            }
        }
        r
    };
    let modal = generalized_symmetric_eig(&embed(mass), &embed(stiffness))?;

    let mut frequencies = Vec::with_capacity(n);
    let mut shapes = Vec::with_capacity(n);
    let mut i = 0;
    while i + 1 < modal.frequencies.len() {
        let (w0, w1) = (modal.frequencies[i], modal.frequencies[i + 1]);
        let scale = w0.abs().max(w1.abs()).max(1e-300);
        if (w1 - w0).abs() > 1e-6 * scale {
            return Err(CoreError::Linalg(format!(
                "embedded Hermitian eigenvalues failed to pair: {w0:.6e} vs {w1:.6e}"
            )));
        }
        let z = &modal.shapes[i];
        let mut v = DVector::from_element(n, Complex64::new(0.0, 0.0));
        for k in 0..n {
            v[k] = Complex64::new(z[k], z[k + n]);
        }
        frequencies.push(0.5 * (w0 + w1));
        shapes.push(v);
        i += 2;
    }
    Ok(HermitianModalDecomposition { frequencies, shapes })
}

/// Dense LU solve; errors on singular systems.
pub fn lu_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.lu()
        .solve(b)
        .ok_or_else(|| CoreError::Linalg("singular Jacobian in LU solve".into()))
}

/// Complex dense LU solve.
pub fn lu_solve_complex(
    a: DMatrix<Complex64>,
    b: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    a.lu()
        .solve(b)
        .ok_or_else(|| CoreError::Linalg("singular complex system".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_mass_chain_frequencies() {
        // m1 = m2 = 1, springs k-k chain fixed at one end:
        // K = [[2k, -k], [-k, k]], eigenvalues k*(3 +- sqrt(5))/2.
        let k = 4.0;
        let m = DMatrix::identity(2, 2);
        let kk = DMatrix::from_row_slice(2, 2, &[2.0 * k, -k, -k, k]);
        let modal = generalized_symmetric_eig(&m, &kk).unwrap();
        let l1 = k * (3.0 - 5.0f64.sqrt()) / 2.0;
        let l2 = k * (3.0 + 5.0f64.sqrt()) / 2.0;
        assert_relative_eq!(modal.frequencies[0], l1.sqrt(), epsilon = 1e-10);
        assert_relative_eq!(modal.frequencies[1], l2.sqrt(), epsilon = 1e-10);
        // mass normalization
        for phi in &modal.shapes {
            assert_relative_eq!((phi.transpose() * &m * phi)[(0, 0)], 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn hermitian_eig_matches_real_case() {
        let k = 4.0;
        let to_c = |m: &DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
        let m = DMatrix::identity(2, 2);
        let kk = DMatrix::from_row_slice(2, 2, &[2.0 * k, -k, -k, k]);
        let modal = hermitian_generalized_eig(&to_c(&m), &to_c(&kk)).unwrap();
        let real = generalized_symmetric_eig(&m, &kk).unwrap();
        assert_eq!(modal.frequencies.len(), 2);
        for i in 0..2 {
            assert_relative_eq!(modal.frequencies[i], real.frequencies[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn hermitian_eig_with_phase_coupling() {
        // 1-DOF cyclic block with complex off-diagonal reduced to 1x1:
        // K_h = k0 + 2 k1 cos(phi) for the symmetric part plus imaginary part
        // cancels; test a genuine 2x2 Hermitian matrix instead.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]).map(|x| Complex64::new(x, 0.0));
        let k = DMatrix::from_row_slice(
            2,
            2,
            &[4.0, 0.0, 0.0, 6.0],
        )
        .map(|x| Complex64::new(x, 0.0))
            + DMatrix::from_fn(2, 2, |i, j| {
                if i == 0 && j == 1 {
                    Complex64::new(0.0, 1.5)
                } else if i == 1 && j == 0 {
                    Complex64::new(0.0, -1.5)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
        let modal = hermitian_generalized_eig(&m, &k).unwrap();
        // Residual check: K v = w^2 M v.
        for (w, v) in modal.frequencies.iter().zip(modal.shapes.iter()) {
            let res = &k * v - &m * v * Complex64::new(w * w, 0.0);
            assert!(res.norm() < 1e-9, "residual {}", res.norm());
            let vhmv = (v.adjoint() * &m * v)[(0, 0)];
            assert_relative_eq!(vhmv.re, 1.0, epsilon = 1e-9);
            assert!(vhmv.im.abs() < 1e-10);
        }
    }
}
