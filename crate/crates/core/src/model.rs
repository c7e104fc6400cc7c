//! One-shot pipeline: block Gram, metric, quotient, support, rescaled
//! measure, operator and an eigendecomposition extended to every atom.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel::{evaluate_blocks, gram_from_raw, BlockGram, MatrixKernel, TOL_SYM};
use crate::linalg::CMatrix;
use crate::operator::{
    default_tol_eig, eigendecompose, operator_from_gram, rescale_from_diagonal, DiscreteOperator,
    RescaledMeasure, SpectralDecomposition,
};
use crate::space::{
    default_tol_quotient, max_diag_norm_from_blocks, pseudo_metric_from_blocks,
    pseudo_metric_prime_from_blocks, quotient, support_from_quotient, AtomSpace,
    PseudoMetricMatrix, Quotient, SupportSet,
};

/// Tolerance overrides; `None` selects the scale-aware default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub tol_sym: Option<f64>,
    pub tol_quotient: Option<f64>,
    pub rank_cutoff: Option<f64>,
    pub tol_eig: Option<f64>,
    pub tol_recon: Option<f64>,
}

impl Tolerances {
    /// Fields set in `over` replace those in `self`.
    pub fn overridden_by(self, over: Tolerances) -> Tolerances {
        Tolerances {
            tol_sym: over.tol_sym.or(self.tol_sym),
            tol_quotient: over.tol_quotient.or(self.tol_quotient),
            rank_cutoff: over.rank_cutoff.or(self.rank_cutoff),
            tol_eig: over.tol_eig.or(self.tol_eig),
            tol_recon: over.tol_recon.or(self.tol_recon),
        }
    }
}

/// Tolerances after defaults were scaled to the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedTolerances {
    pub tol_sym: f64,
    pub tol_quotient: f64,
    pub rank_cutoff: f64,
    pub tol_eig: f64,
    pub tol_recon: f64,
}

/// `1e-8 * (1 + max_{x,j} |K(x,x)_jj|)`.
pub fn default_tol_recon(max_diag_entry: f64) -> f64 {
    1e-8 * (1.0 + max_diag_entry)
}

pub struct MercerModel {
    pub space: AtomSpace,
    pub kernel: Arc<dyn MatrixKernel>,
    /// Hermitian-averaged block Gram over all atoms, in atom order.
    pub gram: BlockGram,
    pub metric: PseudoMetricMatrix,
    pub metric_prime: PseudoMetricMatrix,
    pub quotient: Quotient,
    pub support: SupportSet,
    pub nu: RescaledMeasure,
    pub op: DiscreteOperator,
    pub dec: SpectralDecomposition,
    pub tol: ResolvedTolerances,
    pub max_diag_entry: f64,
}

impl MercerModel {
    pub fn build(
        space: AtomSpace,
        kernel: Arc<dyn MatrixKernel>,
        overrides: &Tolerances,
    ) -> Result<Self> {
        let n = kernel.dim();
        let tol_sym = overrides.tol_sym.unwrap_or(TOL_SYM);
        let all: Vec<usize> = (0..space.len()).collect();
        let raw = evaluate_blocks(kernel.as_ref(), &space, &all)?;
        let gram = gram_from_raw(raw, n, all, tol_sym)?;

        let metric = pseudo_metric_from_blocks(&gram.matrix, n);
        let metric_prime = pseudo_metric_prime_from_blocks(&gram.matrix, n);
        let tol_quotient = overrides
            .tol_quotient
            .unwrap_or_else(|| default_tol_quotient(max_diag_norm_from_blocks(&gram.matrix, n)));
        let quotient = quotient(&metric, tol_quotient);
        let support = support_from_quotient(&space, &quotient);

        let diag: Vec<CMatrix> = (0..space.len()).map(|x| gram.block(x, x)).collect();
        let nu = rescale_from_diagonal(space.weights(), &diag)?;
        let active = nu.positive_atoms();
        let sub = sub_gram(&gram, &active);
        let op = operator_from_gram(sub, &nu)?;
        let mut dec = eigendecompose(&op, &nu, overrides.rank_cutoff)?;
        dec.extend_to_all(kernel.as_ref(), &space)?;

        let sigma_1 = dec.sigmas().first().copied().unwrap_or(0.0);
        let max_diag_entry = diag
            .iter()
            .flat_map(|b| (0..n).map(move |j| b[(j, j)].norm()))
            .fold(0.0, f64::max);
        let tol = ResolvedTolerances {
            tol_sym,
            tol_quotient,
            rank_cutoff: dec.rank_cutoff(),
            tol_eig: overrides
                .tol_eig
                .unwrap_or_else(|| default_tol_eig(sigma_1)),
            tol_recon: overrides
                .tol_recon
                .unwrap_or_else(|| default_tol_recon(max_diag_entry)),
        };
        Ok(MercerModel {
            space,
            kernel,
            gram,
            metric,
            metric_prime,
            quotient,
            support,
            nu,
            op,
            dec,
            tol,
            max_diag_entry,
        })
    }

    pub fn n(&self) -> usize {
        self.gram.n
    }

    /// `K(x, t)` from the assembled Gram.
    pub fn k(&self, x: usize, t: usize) -> CMatrix {
        self.gram.block(x, t)
    }
}

fn sub_gram(gram: &BlockGram, atoms: &[usize]) -> BlockGram {
    let n = gram.n;
    let size = atoms.len() * n;
    let matrix = CMatrix::from_fn(size, size, |r, c| {
        gram.matrix[(atoms[r / n] * n + r % n, atoms[c / n] * n + c % n)]
    });
    BlockGram {
        n,
        atoms: atoms.to_vec(),
        matrix,
    }
}
