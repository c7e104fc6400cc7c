//! The rescaled measure `nu = mu / (1 + |K(x,x)|)`, the integral operator
//! `L_nu` on `L^2(X, nu; C^n)` and its spectral decomposition.
//!
//! `L_nu` acts on values at positive-`nu` atoms as the block matrix `G D`
//! with `D` the replicated `nu` weights. That matrix is not Hermitian, so
//! the eigenproblem is solved for the similar matrix `A = D^{1/2} G D^{1/2}`
//! and eigenvectors are mapped back with `f = D^{-1/2} u`, which makes the
//! eigenfunctions orthonormal in `L^2(nu)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{assemble_block_gram, BlockGram, MatrixKernel, TOL_SYM};
use crate::linalg::{c64, hermitian_eigen, spectral_norm, trace_re, CMatrix, CVector, C64};
use crate::mercer::RkhsElement;
use crate::space::AtomSpace;

/// Relative rank cutoff: eigenvalues at or below `1e-12 * sigma_1` are dropped.
pub const RANK_CUTOFF_REL: f64 = 1e-12;

/// `1e-9 * max(1, sigma_1)`.
pub fn default_tol_eig(sigma_1: f64) -> f64 {
    1e-9 * sigma_1.max(1.0)
}

/// Per-atom weights of the rescaled measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledMeasure {
    pub weights: Vec<f64>,
    /// `sum_x tr K(x,x) nu_x`
    pub m_nu: f64,
}

impl RescaledMeasure {
    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    /// Indices of atoms with positive weight, in atom order.
    pub fn positive_atoms(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

pub fn rescale_measure(space: &AtomSpace, kernel: &dyn MatrixKernel) -> Result<RescaledMeasure> {
    let diag = (0..space.len())
        .map(|x| kernel.eval(space.atom(x), space.atom(x)))
        .collect::<Result<Vec<_>>>()?;
    rescale_from_diagonal(space.weights(), &diag)
}

pub(crate) fn rescale_from_diagonal(mu: &[f64], diag: &[CMatrix]) -> Result<RescaledMeasure> {
    let mut weights = Vec::with_capacity(mu.len());
    let mut m_nu = 0.0;
    for (&w, k) in mu.iter().zip(diag) {
        let nu = w / (1.0 + spectral_norm(k, TOL_SYM)?);
        m_nu += trace_re(k) * nu;
        weights.push(nu);
    }
    Ok(RescaledMeasure { weights, m_nu })
}

/// `A = D^{1/2} G D^{1/2}` over the positive-`nu` atoms.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub n: usize,
    /// Positive-`nu` atoms, in atom order; block `a` of `A` belongs to `active[a]`.
    pub active: Vec<usize>,
    pub gram: BlockGram,
    pub matrix: CMatrix,
    nu_active: Vec<f64>,
}

impl DiscreteOperator {
    /// Applies `L_nu` to values on the active atoms (stacked `a n + l`).
    pub fn apply(&self, f: &CVector) -> CVector {
        let n = self.n;
        let weighted = CVector::from_fn(f.len(), |r, _| f[r] * self.nu_active[r / n]);
        &self.gram.matrix * weighted
    }

    pub fn nu_active(&self) -> &[f64] {
        &self.nu_active
    }
}

pub fn assemble_operator(
    space: &AtomSpace,
    kernel: &dyn MatrixKernel,
    nu: &RescaledMeasure,
) -> Result<DiscreteOperator> {
    let active = nu.positive_atoms();
    if active.is_empty() {
        return Err(Error::EmptySupport);
    }
    let gram = assemble_block_gram(kernel, space, &active, TOL_SYM)?;
    operator_from_gram(gram, nu)
}

pub(crate) fn operator_from_gram(
    gram: BlockGram,
    nu: &RescaledMeasure,
) -> Result<DiscreteOperator> {
    if gram.atoms.is_empty() {
        return Err(Error::EmptySupport);
    }
    let n = gram.n;
    let nu_active: Vec<f64> = gram.atoms.iter().map(|&x| nu.weight(x)).collect();
    let matrix = CMatrix::from_fn(gram.matrix.nrows(), gram.matrix.ncols(), |r, c| {
        gram.matrix[(r, c)] * (nu_active[r / n] * nu_active[c / n]).sqrt()
    });
    Ok(DiscreteOperator {
        n,
        active: gram.atoms.clone(),
        gram,
        matrix,
        nu_active,
    })
}

/// Eigenvalues above the rank cutoff and eigenfunction values at every atom.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    n: usize,
    sigmas: Vec<f64>,
    full_spectrum: Vec<f64>,
    rank_cutoff: f64,
    /// Row `x n + l`, column `i`: `f_i^l(x)`.
    funcs: CMatrix,
    nu: Vec<f64>,
    active: Vec<usize>,
    defined: Vec<bool>,
}

impl SpectralDecomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.sigmas.len()
    }

    pub fn num_atoms(&self) -> usize {
        self.defined.len()
    }

    /// Retained eigenvalues, descending.
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Every eigenvalue of the symmetrized operator, including those at or
    /// below the cutoff, descending.
    pub fn full_spectrum(&self) -> &[f64] {
        &self.full_spectrum
    }

    pub fn rank_cutoff(&self) -> f64 {
        self.rank_cutoff
    }

    pub fn funcs(&self) -> &CMatrix {
        &self.funcs
    }

    /// Positive-`nu` atoms the operator was assembled on.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// Whether eigenfunction values at `x` are available.
    pub fn is_defined(&self, x: usize) -> bool {
        self.defined[x]
    }

    /// `f_i^j(x)`
    pub fn value(&self, i: usize, x: usize, j: usize) -> C64 {
        self.funcs[(x * self.n + j, i)]
    }

    /// `f_i(x)` as a vector in `C^n`.
    pub fn func_at(&self, i: usize, x: usize) -> CVector {
        CVector::from_fn(self.n, |j, _| self.value(i, x, j))
    }

    /// Fills eigenfunction values at every zero-`nu` atom via
    /// [`extend_eigenfunction`].
    pub fn extend_to_all(&mut self, kernel: &dyn MatrixKernel, space: &AtomSpace) -> Result<()> {
        for x in 0..self.num_atoms() {
            if !self.defined[x] {
                let vals = extension_values(self, kernel, space, x)?;
                self.funcs
                    .view_mut((x * self.n, 0), (self.n, self.rank()))
                    .copy_from(&vals);
                self.defined[x] = true;
            }
        }
        Ok(())
    }
}

/// Hermitian eigendecomposition of `A`, mapped back to `L^2(nu)` eigenfunctions.
///
/// `rank_cutoff` is absolute when given, else `1e-12 * sigma_1`. Values at
/// zero-`nu` atoms are left undefined until [`SpectralDecomposition::extend_to_all`].
pub fn eigendecompose(
    op: &DiscreteOperator,
    nu: &RescaledMeasure,
    rank_cutoff: Option<f64>,
) -> Result<SpectralDecomposition> {
    let n = op.n;
    let num_atoms = nu.weights.len();
    let eig = hermitian_eigen(&op.matrix)?;
    let sigma_1 = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = rank_cutoff.unwrap_or(RANK_CUTOFF_REL * sigma_1);
    let rank = eig
        .values
        .iter()
        .take_while(|&&s| s > cutoff && s > 0.0)
        .count();

    let mut funcs = CMatrix::zeros(num_atoms * n, rank);
    for i in 0..rank {
        for (a, &x) in op.active.iter().enumerate() {
            let scale = 1.0 / op.nu_active[a].sqrt();
            for l in 0..n {
                funcs[(x * n + l, i)] = eig.vectors[(a * n + l, i)] * scale;
            }
        }
    }
    let mut defined = vec![false; num_atoms];
    for &x in &op.active {
        defined[x] = true;
    }
    Ok(SpectralDecomposition {
        n,
        sigmas: eig.values[..rank].to_vec(),
        full_spectrum: eig.values,
        rank_cutoff: cutoff,
        funcs,
        nu: nu.weights.clone(),
        active: op.active.clone(),
        defined,
    })
}

/// `(1/sigma_i) sum_t K(x,t) f_i(t) nu_t` for every retained `i`; `n x rank`.
fn extension_values(
    dec: &SpectralDecomposition,
    kernel: &dyn MatrixKernel,
    space: &AtomSpace,
    x: usize,
) -> Result<CMatrix> {
    let n = dec.n;
    let mut acc = CMatrix::zeros(n, dec.rank());
    for &t in &dec.active {
        let k = kernel.eval(space.atom(x), space.atom(t))? * c64(dec.nu[t], 0.0);
        let ft = dec.funcs.view((t * n, 0), (n, dec.rank()));
        acc += k * ft;
    }
    for (i, &s) in dec.sigmas.iter().enumerate() {
        acc.column_mut(i).scale_mut(1.0 / s);
    }
    Ok(acc)
}

/// Value at any atom, including zero-mass ones, of the continuous
/// representative of eigenfunction `i`.
pub fn extend_eigenfunction(
    dec: &SpectralDecomposition,
    kernel: &dyn MatrixKernel,
    space: &AtomSpace,
    i: usize,
    x: usize,
) -> Result<CVector> {
    if i >= dec.rank() {
        let sigma = dec.full_spectrum.get(i).copied().unwrap_or(0.0);
        return Err(Error::BelowRankCutoff {
            index: i,
            sigma,
            cutoff: dec.rank_cutoff,
        });
    }
    let mut acc = CVector::zeros(dec.n);
    for &t in &dec.active {
        let k = kernel.eval(space.atom(x), space.atom(t))?;
        acc += k * dec.func_at(i, t) * c64(dec.nu[t], 0.0);
    }
    Ok(acc / c64(dec.sigmas[i], 0.0))
}

/// `h = sum_x K_x f(x) nu_x` in kernel-section form; `f` is indexed by atom
/// and only read at positive-`nu` atoms.
pub fn adjoint_embed(f: &[CVector], nu: &RescaledMeasure) -> RkhsElement {
    let sections = nu
        .positive_atoms()
        .into_iter()
        .map(|x| (x, &f[x] * c64(nu.weight(x), 0.0)))
        .collect();
    RkhsElement::Sections(sections)
}

/// `(sum_i sigma_i, sum_x tr K(x,x) nu_x)` over the full spectrum.
pub fn trace_check(
    dec: &SpectralDecomposition,
    space: &AtomSpace,
    kernel: &dyn MatrixKernel,
    nu: &RescaledMeasure,
) -> Result<(f64, f64)> {
    let lhs = dec.full_spectrum.iter().sum();
    let mut rhs = 0.0;
    for x in 0..space.len() {
        if nu.weight(x) > 0.0 {
            rhs += trace_re(&kernel.eval(space.atom(x), space.atom(x))?) * nu.weight(x);
        }
    }
    Ok((lhs, rhs))
}

/// Relative residual contract for [`trace_check`].
pub fn trace_within_tolerance(lhs: f64, rhs: f64) -> bool {
    (lhs - rhs).abs() <= 1e-10 * rhs.max(1.0)
}

/// `(|i_K h|^2_{L^2(nu)}, M_nu |h|_K^2)` for `h = sum_i c_i sqrt(sigma_i) f_i`.
pub fn embedding_norm_bound_check(
    coeffs: &[C64],
    dec: &SpectralDecomposition,
    nu: &RescaledMeasure,
) -> Result<(f64, f64)> {
    if coeffs.len() > dec.rank() {
        return Err(Error::Dimension(format!(
            "{} coefficients for rank {}",
            coeffs.len(),
            dec.rank()
        )));
    }
    let n = dec.n;
    let mut l2_sq = 0.0;
    for &x in &dec.active {
        for l in 0..n {
            let hx: C64 = coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * dec.sigmas[i].sqrt() * dec.value(i, x, l))
                .sum();
            l2_sq += hx.norm_sqr() * nu.weight(x);
        }
    }
    let norm_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    Ok((l2_sq, nu.m_nu * norm_sq))
}
