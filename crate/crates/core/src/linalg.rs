//! Dense complex linear algebra helpers shared by the kernel and operator code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Upper bound on implicit QR sweeps; scaled by the matrix order.
const SWEEPS_PER_ROW: usize = 64;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Embeds a real matrix given row by row.
pub fn real_matrix(rows: &[&[f64]]) -> CMatrix {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(nr, nc, |i, j| c64(rows[i][j], 0.0))
}

/// `max |M_ij - conj(M_ji)|`, zero for an empty matrix.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Replaces `m` by `(m + m^*) / 2`.
pub fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = c64(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending.
///
/// Each eigenvector is normalised so that its first entry above the
/// `1e-10 * max|v|` threshold is real and positive, which makes output
/// ordering and phases reproducible for a given input.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn hermitian_eigen(m: &CMatrix) -> Result<HermitianEigen> {
    let size = m.nrows();
    if size != m.ncols() {
        return Err(Error::Dimension(format!(
            "eigendecomposition of a {}x{} matrix",
            size,
            m.ncols()
        )));
    }
    if size == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let max_iterations = SWEEPS_PER_ROW * size.max(8);
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_iterations).ok_or(
        Error::EigenNoConvergence {
            size,
            max_iterations,
        },
    )?;

    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(size, size);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(HermitianEigen { values, vectors })
}

/// Rotates `v` so its first significant entry is real positive.
pub fn fix_phase(v: &mut CVector) {
    let peak = v.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
    if peak == 0.0 {
        return;
    }
    if let Some(lead) = v.iter().find(|z| z.norm() > 1e-10 * peak).copied() {
        let rot = lead.conj() / lead.norm();
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Eigenvalues of a Hermitian matrix, unsorted.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<DVector<f64>> {
    let size = m.nrows();
    if size == 0 {
        return Ok(DVector::zeros(0));
    }
    let max_iterations = SWEEPS_PER_ROW * size.max(8);
    SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_iterations)
        .map(|e| e.eigenvalues)
        .ok_or(Error::EigenNoConvergence {
            size,
            max_iterations,
        })
}

/// Operator norm of a Hermitian matrix: the largest absolute eigenvalue.
///
/// Fails when `m` deviates from Hermitian by more than `tol_sym`; within
/// tolerance the Hermitian part is used.
pub fn spectral_norm(m: &CMatrix, tol_sym: f64) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "spectral norm of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let dev = hermitian_deviation(m);
    if dev > tol_sym {
        return Err(Error::NotHermitian {
            max_deviation: dev,
            tol: tol_sym,
        });
    }
    Ok(hermitian_spectral_norm(m))
}

/// Like [`spectral_norm`] but symmetrizes without checking.
pub(crate) fn hermitian_spectral_norm(m: &CMatrix) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].re.abs(),
        _ => {
            let mut h = m.clone();
            symmetrize(&mut h);
            // Small blocks converge in a handful of sweeps; fall back to the
            // Frobenius norm bound only if QR somehow stalls.
            match hermitian_eigenvalues(&h) {
                Ok(ev) => ev.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())),
                Err(_) => h.norm(),
            }
        }
    }
}

pub fn trace_re(m: &CMatrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}
