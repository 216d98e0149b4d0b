//! Dense complex matrices for small Hilbert spaces (dimension <= ~100).
//!
//! Everything is exact double-precision linear algebra: multiplication,
//! Kronecker products, Hermitian eigendecomposition (cyclic Jacobi), and
//! unitary propagators exp(-i H dt) built from the eigendecomposition.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    /// Build from nested rows; panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let data = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// 2x2 Pauli x.
    pub fn pauli_x() -> Self {
        Self::from_rows(&[
            vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        ])
    }

    /// 2x2 Pauli y.
    pub fn pauli_y() -> Self {
        Self::from_rows(&[
            vec![C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
            vec![C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
        ])
    }

    /// 2x2 Pauli z.
    pub fn pauli_z() -> Self {
        Self::from_rows(&[
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            vec![C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
        ])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        let data = self.data.iter().map(|a| a * factor).collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// Matrix-vector product, mostly used by test oracles.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Kronecker product with standard ordering: the left factor owns the
    /// most significant index of the composite space.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i1 in 0..self.rows {
            for j1 in 0..self.cols {
                let a = self[(i1, j1)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for i2 in 0..other.rows {
                    for j2 in 0..other.cols {
                        out[(i1 * other.rows + i2, j1 * other.cols + j2)] = a * other[(i2, j2)];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max |A - A†| entry; zero for an exactly Hermitian matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermiticity_defect() <= tol
    }

    /// Max |U†U - I| entry.
    pub fn unitarity_defect(&self) -> f64 {
        assert!(self.is_square());
        self.dagger()
            .mul(self)
            .max_abs_diff(&Self::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.unitarity_defect() <= tol
    }

    fn off_diagonal_norm_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    s += self[(i, j)].norm_sqr();
                }
            }
        }
        s
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
    /// rotations. Returns eigenvalues in ascending order and the unitary
    /// matrix whose columns are the matching eigenvectors.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "eigendecomposition needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if !self.is_hermitian(1e-9 * self.frobenius_norm().max(1.0)) {
            return Err(Error::DimensionMismatch(
                "eigendecomposition input is not Hermitian".into(),
            ));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let scale = self.frobenius_norm().max(1.0);
        let tol = 1e-28 * scale * scale;

        for _sweep in 0..100 {
            if a.off_diagonal_norm_sq() <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let beta = apq.norm();
                    if beta <= 1e-300 {
                        continue;
                    }
                    let phase = apq / beta; // e^{i phi}
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let tau = (aqq - app) / (2.0 * beta);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let gpp = phase * c;
                    let gpq = phase * s;
                    // Columns: A <- G† A G, V <- V G, with G supported on p,q:
                    //   G[p,p] = c e^{i phi}, G[p,q] = s e^{i phi},
                    //   G[q,p] = -s,         G[q,q] = c.
                    for r in 0..n {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        a[(r, p)] = arp * gpp - arq * s;
                        a[(r, q)] = arp * gpq + arq * c;
                    }
                    for cidx in 0..n {
                        let apc = a[(p, cidx)];
                        let aqc = a[(q, cidx)];
                        a[(p, cidx)] = apc * gpp.conj() - aqc * s;
                        a[(q, cidx)] = apc * gpq.conj() + aqc * c;
                    }
                    for r in 0..n {
                        let vrp = v[(r, p)];
                        let vrq = v[(r, q)];
                        v[(r, p)] = vrp * gpp - vrq * s;
                        v[(r, q)] = vrp * gpq + vrq * c;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].re.partial_cmp(&a[(j, j)].re).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
        let vectors = Self::from_fn(n, n, |r, c| v[(r, order[c])]);
        Ok((eigenvalues, vectors))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Kronecker product, first factor most significant.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// Unitary propagator U = exp(-i H dt) for Hermitian H, built from the
/// eigendecomposition so that U is unitary to solver accuracy.
pub fn hermitian_propagator(h: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    let (eigenvalues, v) = h.hermitian_eigen()?;
    let n = h.rows();
    let mut phases = ComplexMatrix::zeros(n, n);
    for (i, lambda) in eigenvalues.iter().enumerate() {
        phases[(i, i)] = C64::from_polar(1.0, -lambda * dt);
    }
    Ok(v.mul(&phases).mul(&v.dagger()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = c(rng.random::<f64>() * 2.0 - 1.0, 0.0);
            for j in (i + 1)..n {
                let z = c(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                );
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn identity_kron_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn kron_is_associative() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let d = random_hermitian(2, &mut rng);
        let left = tensor(&tensor(&a, &b), &d);
        let right = tensor(&a, &tensor(&b, &d));
        assert!(left.max_abs_diff(&right) < 1e-14);
    }

    #[test]
    fn pauli_algebra() {
        let x = ComplexMatrix::pauli_x();
        let y = ComplexMatrix::pauli_y();
        let z = ComplexMatrix::pauli_z();
        // xy = iz
        let xy = x.mul(&y);
        let iz = z.scale(c(0.0, 1.0));
        assert!(xy.max_abs_diff(&iz) < 1e-15);
        for p in [&x, &y, &z] {
            assert!(p.is_hermitian(0.0));
            assert!(p.mul(p).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        }
    }

    #[test]
    fn eigen_of_pauli_x() {
        let (vals, v) = ComplexMatrix::pauli_x().hermitian_eigen().unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
        assert!(v.is_unitary(1e-12));
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for n in [2usize, 5, 13] {
            let h = random_hermitian(n, &mut rng);
            let (vals, v) = h.hermitian_eigen().unwrap();
            assert!(
                v.is_unitary(1e-11),
                "eigenvector matrix not unitary at n={n}"
            );
            let mut lambda = ComplexMatrix::zeros(n, n);
            for i in 0..n {
                lambda[(i, i)] = c(vals[i], 0.0);
            }
            let rebuilt = v.mul(&lambda).mul(&v.dagger());
            assert!(
                rebuilt.max_abs_diff(&h) < 1e-11,
                "reconstruction failed at n={n}: {}",
                rebuilt.max_abs_diff(&h)
            );
            // eigenvalue sum equals the trace
            let sum: f64 = vals.iter().sum();
            assert!((sum - h.trace().re).abs() < 1e-10);
        }
    }

    #[test]
    fn propagator_matches_closed_form_for_pauli_z() {
        let theta = 0.731;
        let u = hermitian_propagator(&ComplexMatrix::pauli_z(), theta).unwrap();
        let expected = ComplexMatrix::from_rows(&[
            vec![C64::from_polar(1.0, -theta), c(0.0, 0.0)],
            vec![c(0.0, 0.0), C64::from_polar(1.0, theta)],
        ]);
        assert!(u.max_abs_diff(&expected) < 1e-13);
    }

    #[test]
    fn propagator_is_unitary_for_random_hermitian() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let h = random_hermitian(12, &mut rng);
        let u = hermitian_propagator(&h, 0.37).unwrap();
        assert!(u.is_unitary(1e-11));
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let mut m = ComplexMatrix::identity(2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(m.hermitian_eigen().is_err());
    }
}
