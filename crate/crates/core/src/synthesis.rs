//! Matrix-valued kernels assembled from one scalar Parseval frame per
//! output component: `K(x,t)_{lj} = sum_i v_i^l(x) conj(v_i^j(t))`.
//!
//! The diagonal blocks reproduce the scalar kernels the frames belong to;
//! off-diagonal blocks depend on the frames chosen and carry no reference.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kernel::MatrixKernel;
use crate::linalg::{c64, CMatrix};
use crate::mercer::ScalarFrame;
use crate::space::{Atom, AtomSpace};

/// `n` frames over a shared atom list and a shared index set.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFamily {
    pub atom_ids: Vec<String>,
    /// Frame `j` as an `atoms x |I|` matrix.
    pub frames: Vec<CMatrix>,
}

impl FrameFamily {
    pub fn n(&self) -> usize {
        self.frames.len()
    }

    pub fn index_len(&self) -> usize {
        self.frames.first().map_or(0, |f| f.ncols())
    }
}

/// Unifies index sets by zero-padding every frame to the longest one.
/// Atoms are reordered to match the first frame; all frames must cover
/// the same atom ids.
pub fn align_frames(frames: Vec<ScalarFrame>) -> Result<FrameFamily> {
    let Some(first) = frames.first() else {
        return Ok(FrameFamily {
            atom_ids: Vec::new(),
            frames: Vec::new(),
        });
    };
    let atom_ids = first.atom_ids.clone();
    let len = frames.iter().map(ScalarFrame::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(frames.len());
    for (j, frame) in frames.iter().enumerate() {
        if frame.atom_ids.len() != atom_ids.len() {
            return Err(Error::Dimension(format!(
                "frame {j} covers {} atoms, frame 0 covers {}",
                frame.atom_ids.len(),
                atom_ids.len()
            )));
        }
        let index: HashMap<&str, usize> = frame
            .atom_ids
            .iter()
            .enumerate()
            .map(|(r, id)| (id.as_str(), r))
            .collect();
        let mut m = CMatrix::zeros(atom_ids.len(), len);
        for (a, id) in atom_ids.iter().enumerate() {
            let r = *index
                .get(id.as_str())
                .ok_or_else(|| Error::UnknownAtom(id.clone()))?;
            for i in 0..frame.len() {
                m[(a, i)] = frame.vectors[(r, i)];
            }
        }
        out.push(m);
    }
    Ok(FrameFamily {
        atom_ids,
        frames: out,
    })
}

/// Kernel synthesised from a [`FrameFamily`]; defined on the family's atoms.
#[derive(Debug, Clone)]
pub struct SynthesizedKernel {
    index: HashMap<String, usize>,
    family: FrameFamily,
}

impl SynthesizedKernel {
    pub fn family(&self) -> &FrameFamily {
        &self.family
    }

    fn row(&self, x: Atom<'_>, t: Atom<'_>, which: Atom<'_>) -> Result<usize> {
        self.index
            .get(which.id)
            .copied()
            .ok_or_else(|| Error::KernelEval {
                x: x.id.into(),
                t: t.id.into(),
                reason: format!("atom `{}` not covered by the frames", which.id),
            })
    }
}

pub fn synthesize_kernel(family: &FrameFamily) -> SynthesizedKernel {
    let index = family
        .atom_ids
        .iter()
        .enumerate()
        .map(|(r, id)| (id.clone(), r))
        .collect();
    SynthesizedKernel {
        index,
        family: family.clone(),
    }
}

impl MatrixKernel for SynthesizedKernel {
    fn dim(&self) -> usize {
        self.family.n()
    }

    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix> {
        let (rx, rt) = (self.row(x, t, x)?, self.row(x, t, t)?);
        let n = self.dim();
        let mut k = CMatrix::zeros(n, n);
        for l in 0..n {
            let fl = self.family.frames[l].row(rx);
            for j in 0..n {
                let fj = self.family.frames[j].row(rt);
                k[(l, j)] = fl.iter().zip(fj.iter()).map(|(a, b)| a * b.conj()).sum();
            }
        }
        Ok(k)
    }
}

/// `max_{x,t,j} |K_synth(x,t)_jj - K_j(x,t)|` over the listed atoms.
pub fn verify_diagonal_blocks(
    synth: &dyn MatrixKernel,
    originals: &[&dyn MatrixKernel],
    space: &AtomSpace,
    atoms: &[usize],
) -> Result<f64> {
    if originals.len() != synth.dim() {
        return Err(Error::Dimension(format!(
            "{} scalar kernels for output dimension {}",
            originals.len(),
            synth.dim()
        )));
    }
    if let Some(j) = originals.iter().position(|k| k.dim() != 1) {
        return Err(Error::Dimension(format!(
            "original kernel {j} is not scalar"
        )));
    }
    let mut worst: f64 = 0.0;
    for &x in atoms {
        for &t in atoms {
            let ks = synth.eval(space.atom(x), space.atom(t))?;
            for (j, orig) in originals.iter().enumerate() {
                let kj = orig.eval(space.atom(x), space.atom(t))?[(0, 0)];
                worst = worst.max((ks[(j, j)] - kj).norm());
            }
        }
    }
    Ok(worst)
}

/// `max |K_j(x,t)|` over the listed atoms and components.
pub fn max_abs_original(
    originals: &[&dyn MatrixKernel],
    space: &AtomSpace,
    atoms: &[usize],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &x in atoms {
        for &t in atoms {
            for k in originals {
                worst = worst.max(k.eval(space.atom(x), space.atom(t))?[(0, 0)].norm());
            }
        }
    }
    Ok(worst)
}

/// Frame of constant value `v` over the atoms, with one index.
pub fn constant_frame(atom_ids: &[String], block: usize, v: f64) -> ScalarFrame {
    ScalarFrame {
        block,
        atom_ids: atom_ids.to_vec(),
        vectors: CMatrix::from_element(atom_ids.len(), 1, c64(v, 0.0)),
    }
}
