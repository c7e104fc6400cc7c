//! Mercer decompositions of matrix-valued reproducing kernels on finite
//! measure spaces.
//!
//! A kernel `K(x,t)` taking `n x n` complex values is evaluated on a finite
//! set of weighted atoms. From it the crate builds the kernel pseudo-metric
//! and the point quotient, the support of the measure, the rescaled measure
//! `nu = mu / (1 + |K(x,x)|)` and the integral operator `L_nu`, whose
//! eigenpairs give the expansion
//!
//! ```text
//! K(x,t) = sum_i sigma_i f_i(x) f_i(t)^*      for x, t in supp(mu)
//! ```
//!
//! together with the orthonormal system `{sqrt(sigma_i) f_i}` of the RKHS
//! and, per output component, a Parseval frame of the scalar kernel
//! `K_j(x,t) = K(x,t)_jj`. The [`synthesis`] module runs the construction
//! in reverse, assembling a matrix kernel from one frame per component.
//!
//! ```
//! use std::sync::Arc;
//! use mercer_core::{build_kernel, AtomSpace, KernelSpec, MercerExpansion, MercerModel, Tolerances};
//!
//! let space = AtomSpace::on_line(&[0.0, 0.5, 1.5], &[1.0, 1.0, 2.0]).unwrap();
//! let kernel = Arc::from(build_kernel(&KernelSpec::Gaussian { gamma: 1.0 }).unwrap());
//! let model = MercerModel::build(space, kernel, &Tolerances::default()).unwrap();
//! let khat = MercerExpansion::full(&model.dec).reconstruct(0, 2);
//! assert!((khat[(0, 0)] - model.k(0, 2)[(0, 0)]).norm() < model.tol.tol_recon);
//! ```

pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod mercer;
pub mod model;
pub mod operator;
pub mod space;
pub mod synthesis;

pub use error::{Error, Result};
pub use kernel::{
    assemble_block_gram, build_kernel, validate_kernel, BlockGram, FnKernel, KernelSpec,
    MatrixKernel, PrecomputedKernel, ValidationReport,
};
pub use linalg::{spectral_norm, CMatrix, CVector, C64};
pub use mercer::{
    diagonal_error_table, extract_frame, frame_check, frame_check_combination, project,
    reconstruction_error, rkhs_inner, MercerExpansion, RkhsElement, ScalarFrame,
};
pub use model::{MercerModel, ResolvedTolerances, Tolerances};
pub use operator::{
    adjoint_embed, assemble_operator, eigendecompose, embedding_norm_bound_check,
    extend_eigenfunction, rescale_measure, trace_check, DiscreteOperator, RescaledMeasure,
    SpectralDecomposition,
};
pub use space::{
    pseudo_metric, pseudo_metric_prime, quotient, support, AtomSpace, PseudoMetricMatrix, Quotient,
    SupportSet,
};
pub use synthesis::{
    align_frames, synthesize_kernel, verify_diagonal_blocks, FrameFamily, SynthesizedKernel,
};
