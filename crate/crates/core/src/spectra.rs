//! Eigendecomposition and spectral functionals of sampled matrices.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::ensemble::DenseMatrix;
use crate::error::{Error, Result};
use crate::testfn::TestFunction;

const SYMMETRY_TOL: f64 = 1e-12;

/// Ascending eigenvalues, optionally with orthonormal eigenvectors stored as
/// the columns of `eigenvectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DenseMatrix>,
}

impl Spectrum {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self { eigenvalues, eigenvectors: None }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    fn vectors(&self) -> Result<&DenseMatrix> {
        self.eigenvectors
            .as_ref()
            .ok_or_else(|| Error::State("spectrum was computed without eigenvectors".into()))
    }
}

/// Dense symmetric eigendecomposition (Householder tridiagonalization followed
/// by divide-and-conquer on the tridiagonal), run single-threaded.
pub fn eigen(matrix: &DenseMatrix, want_vectors: bool) -> Result<Spectrum> {
    let n = matrix.dim();
    let asym = matrix.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::arg(format!("matrix is not symmetric: max |m_jk - m_kj| = {asym:e}")));
    }
    if n == 0 {
        return Ok(Spectrum { eigenvalues: vec![], eigenvectors: want_vectors.then(|| DenseMatrix::zeros(0)) });
    }
    let a = Mat::<f64>::from_fn(n, n, |i, j| matrix[(i, j)]);
    let failure = |e: faer::linalg::evd::EvdError| {
        Error::numeric(format!(
            "symmetric eigensolver did not converge ({e:?}) for n={n}, max|m|={:e}",
            matrix.max_abs()
        ))
    };
    if want_vectors {
        let evd = a.self_adjoint_eigen(Side::Lower).map_err(failure)?;
        let s = evd.S();
        let u = evd.U();
        let eigenvalues: Vec<f64> = (0..n).map(|i| s[i]).collect();
        let vectors = DenseMatrix::from_fn(n, |i, k| u[(i, k)]);
        Ok(Spectrum { eigenvalues, eigenvectors: Some(vectors) })
    } else {
        let eigenvalues = a.self_adjoint_eigenvalues(Side::Lower).map_err(failure)?;
        Ok(Spectrum { eigenvalues, eigenvectors: None })
    }
}

/// `N_n(φ) = Σ_i φ(λ_i)`.
pub fn linear_statistic(spectrum: &Spectrum, phi: &TestFunction) -> Complex64 {
    if let TestFunction::Resolvent { mu, eta } = *phi {
        return resolvent_sum(&spectrum.eigenvalues, Complex64::new(mu, eta));
    }
    Complex64::new(linear_statistic_real(spectrum, phi), 0.0)
}

/// Real part of `N_n(φ)`, summed in ascending eigenvalue order.
pub fn linear_statistic_real(spectrum: &Spectrum, phi: &TestFunction) -> f64 {
    spectrum.eigenvalues.iter().map(|&l| phi.eval_real(l)).sum()
}

/// `√(b/n) · value`.
pub fn normalized_statistic<T>(value: T, n: usize, b: usize) -> T
where
    T: std::ops::Mul<f64, Output = T>,
{
    value * (b as f64 / n as f64).sqrt()
}

/// `f(M) = V diag(φ(λ)) Vᵀ` for a real-valued `φ`; constant `φ ≡ c` gives `c·I`
/// exactly.
pub fn matrix_function(spectrum: &Spectrum, phi: &TestFunction) -> Result<DenseMatrix> {
    let v = spectrum.vectors()?;
    if !phi.is_real() {
        return Err(Error::arg(format!(
            "matrix_function needs a real test function, got '{phi}'; use matrix_function_block"
        )));
    }
    let n = spectrum.len();
    if let Some(c) = phi.as_constant() {
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = c;
        }
        return Ok(m);
    }
    let vals: Vec<f64> = spectrum.eigenvalues.iter().map(|&l| phi.eval_real(l)).collect();
    let mut out = DenseMatrix::zeros(n);
    let mut scaled = vec![0.0; n];
    for i in 0..n {
        for (s, (&vik, &fk)) in scaled.iter_mut().zip(v.row(i).iter().zip(&vals)) {
            *s = vik * fk;
        }
        for j in i..n {
            let x: f64 = scaled.iter().zip(v.row(j)).map(|(a, b)| a * b).sum();
            out[(i, j)] = x;
            out[(j, i)] = x;
        }
    }
    Ok(out)
}

/// The `rows × rows` block `f(M)[rows, rows]` (row-major) for a possibly
/// complex `φ`.
pub fn matrix_function_block(spectrum: &Spectrum, phi: &TestFunction, rows: &[usize]) -> Result<Vec<Complex64>> {
    let v = spectrum.vectors()?;
    let r = rows.len();
    let mut out = vec![Complex64::new(0.0, 0.0); r * r];
    if let Some(c) = phi.as_constant() {
        for i in 0..r {
            out[i * r + i] = Complex64::new(c, 0.0);
        }
        return Ok(out);
    }
    let vals: Vec<Complex64> = spectrum.eigenvalues.iter().map(|&l| phi.eval(l)).collect();
    let mut scaled = vec![Complex64::new(0.0, 0.0); spectrum.len()];
    for (a, &ra) in rows.iter().enumerate() {
        for (s, (&vik, &fk)) in scaled.iter_mut().zip(v.row(ra).iter().zip(&vals)) {
            *s = fk * vik;
        }
        for (c, &rc) in rows.iter().enumerate() {
            out[a * r + c] = scaled.iter().zip(v.row(rc)).map(|(s, &w)| s * w).sum();
        }
    }
    Ok(out)
}

/// `Tr (M − z)^{-1} = Σ 1/(λ_i − z)`.
pub fn resolvent_trace(spectrum: &Spectrum, z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::arg(format!("resolvent needs Im z != 0, got z = {z}")));
    }
    Ok(resolvent_sum(&spectrum.eigenvalues, z))
}

fn resolvent_sum(eigenvalues: &[f64], z: Complex64) -> Complex64 {
    eigenvalues.iter().map(|&l| (Complex64::new(l, 0.0) - z).inv()).sum()
}
