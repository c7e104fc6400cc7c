//! Truncated Mercer expansions, reconstruction error tables, the RKHS
//! inner product over the spectral basis and per-component Parseval frames.
//!
//! Conventions: `K(x,t)_{lj} = sum_i sigma_i f_i^l(x) conj(f_i^j(t))`, and
//! `<.,.>_K` is linear in its first argument, so that
//! `K(x,t)_{lj} = <K_t^j, K_x^l>_K`.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::MatrixKernel;
use crate::linalg::{c64, max_abs_entry, CMatrix, CVector, C64};
use crate::model::MercerModel;
use crate::operator::SpectralDecomposition;
use crate::space::AtomSpace;

/// The first `m` terms of the Mercer series.
#[derive(Debug, Clone, Copy)]
pub struct MercerExpansion<'a> {
    dec: &'a SpectralDecomposition,
    m: usize,
}

impl<'a> MercerExpansion<'a> {
    pub fn new(dec: &'a SpectralDecomposition, m: usize) -> Result<Self> {
        if m > dec.rank() {
            return Err(Error::Dimension(format!(
                "truncation {m} exceeds rank {}",
                dec.rank()
            )));
        }
        Ok(MercerExpansion { dec, m })
    }

    pub fn full(dec: &'a SpectralDecomposition) -> Self {
        MercerExpansion { dec, m: dec.rank() }
    }

    pub fn terms(&self) -> usize {
        self.m
    }

    /// `sum_{i<m} sigma_i f_i(x) f_i(t)^*`
    pub fn reconstruct(&self, x: usize, t: usize) -> CMatrix {
        let n = self.dec.n();
        let f = self.dec.funcs();
        let fx = f.view((x * n, 0), (n, self.m));
        let mut ft = f.view((t * n, 0), (n, self.m)).into_owned();
        for (i, mut col) in ft.column_iter_mut().enumerate() {
            col.scale_mut(self.dec.sigmas()[i]);
        }
        fx * ft.adjoint()
    }
}

/// Max-entry reconstruction error over `subset x subset` for each requested
/// truncation (sorted ascending, each `<= rank`).
///
/// Works by peeling eigen-terms off the Gram restricted to the subset, so a
/// full table costs `rank` rank-one updates.
pub fn reconstruction_error(
    model: &MercerModel,
    subset: &[usize],
    truncations: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let dec = &model.dec;
    let n = dec.n();
    let mut ms = truncations.to_vec();
    ms.sort_unstable();
    ms.dedup();
    if let Some(&m) = ms.last() {
        if m > dec.rank() {
            return Err(Error::Dimension(format!(
                "truncation {m} exceeds rank {}",
                dec.rank()
            )));
        }
    }
    let rows: Vec<usize> = subset
        .iter()
        .flat_map(|&x| (0..n).map(move |l| x * n + l))
        .collect();
    let mut remainder = CMatrix::from_fn(rows.len(), rows.len(), |r, c| {
        model.gram.matrix[(rows[r], rows[c])]
    });
    let f_sub = CMatrix::from_fn(rows.len(), dec.rank(), |r, i| dec.funcs()[(rows[r], i)]);

    let mut out = Vec::with_capacity(ms.len());
    let mut done = 0;
    for m in ms {
        if m > done {
            let block = f_sub.columns(done, m - done);
            let mut scaled = block.clone_owned();
            for (k, mut col) in scaled.column_iter_mut().enumerate() {
                col.scale_mut(dec.sigmas()[done + k]);
            }
            remainder -= block * scaled.adjoint();
            done = m;
        }
        out.push((m, max_abs_entry(&remainder)));
    }
    Ok(out)
}

/// `E_diag(m) = max_{x, j} |K(x,x)_jj - Khat_m(x,x)_jj|` for `m = 0..=rank`.
pub fn diagonal_error_table(model: &MercerModel, subset: &[usize]) -> Vec<f64> {
    let dec = &model.dec;
    let n = dec.n();
    let mut rem: Vec<f64> = subset
        .iter()
        .flat_map(|&x| (0..n).map(move |j| (x, j)))
        .map(|(x, j)| model.gram.matrix[(x * n + j, x * n + j)].re)
        .collect();
    let mut table = Vec::with_capacity(dec.rank() + 1);
    table.push(rem.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    for i in 0..dec.rank() {
        let s = dec.sigmas()[i];
        for (r, (x, j)) in subset
            .iter()
            .flat_map(|&x| (0..n).map(move |j| (x, j)))
            .enumerate()
        {
            rem[r] -= s * dec.value(i, x, j).norm_sqr();
        }
        table.push(rem.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    }
    table
}

/// An element of the RKHS, either over the spectral basis
/// `{sqrt(sigma_i) f_i}` or as a finite sum of kernel sections `sum_x K_x y_x`.
#[derive(Debug, Clone, PartialEq)]
pub enum RkhsElement {
    /// `h = sum_i c_i sqrt(sigma_i) f_i`
    Spectral(Vec<C64>),
    /// `h = sum_x K_x y_x` as `(atom, y_x)` pairs.
    Sections(Vec<(usize, CVector)>),
}

impl RkhsElement {
    /// `sqrt(sigma_i) f_i`
    pub fn basis(i: usize, rank: usize) -> Self {
        let mut c = vec![c64(0.0, 0.0); rank];
        c[i] = c64(1.0, 0.0);
        RkhsElement::Spectral(c)
    }

    /// `K_x^j = K_x e_j`
    pub fn section(x: usize, j: usize, n: usize) -> Self {
        let mut y = CVector::zeros(n);
        y[j] = c64(1.0, 0.0);
        RkhsElement::Sections(vec![(x, y)])
    }

    /// `sum_x K(t,x) y_x`; spectral elements are rejected.
    pub fn evaluate_sections(
        &self,
        kernel: &dyn MatrixKernel,
        space: &AtomSpace,
        t: usize,
    ) -> Result<CVector> {
        match self {
            RkhsElement::Sections(terms) => {
                let mut acc = CVector::zeros(kernel.dim());
                for (x, y) in terms {
                    acc += kernel.eval(space.atom(t), space.atom(*x))? * y;
                }
                Ok(acc)
            }
            RkhsElement::Spectral(_) => {
                Err(Error::Dimension("expected kernel-section form".into()))
            }
        }
    }

    /// Pointwise value `h(t)` at any atom.
    pub fn evaluate(&self, model: &MercerModel, t: usize) -> CVector {
        match self {
            RkhsElement::Sections(terms) => {
                terms.iter().fold(CVector::zeros(model.n()), |acc, (x, y)| {
                    acc + model.k(t, *x) * y
                })
            }
            RkhsElement::Spectral(c) => {
                let dec = &model.dec;
                c.iter()
                    .enumerate()
                    .fold(CVector::zeros(dec.n()), |acc, (i, ci)| {
                        acc + dec.func_at(i, t) * (ci * dec.sigmas()[i].sqrt())
                    })
            }
        }
    }
}

fn spectral_inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// `<h1, h2>_K`, linear in `h1`.
///
/// Two section forms are paired through the Gram; two spectral forms through
/// their coefficients; mixed forms are first projected onto the spectral
/// basis, which requires every section atom to lie in the support.
pub fn rkhs_inner(h1: &RkhsElement, h2: &RkhsElement, model: &MercerModel) -> Result<C64> {
    match (h1, h2) {
        (RkhsElement::Spectral(a), RkhsElement::Spectral(b)) => Ok(spectral_inner(a, b)),
        (RkhsElement::Sections(a), RkhsElement::Sections(b)) => {
            let mut acc = c64(0.0, 0.0);
            for (x, y) in a {
                for (t, z) in b {
                    acc += z.dotc(&(model.k(*t, *x) * y));
                }
            }
            Ok(acc)
        }
        (RkhsElement::Sections(_), RkhsElement::Spectral(b)) => match project(h1, model)? {
            RkhsElement::Spectral(a) => Ok(spectral_inner(&a, b)),
            RkhsElement::Sections(_) => unreachable!(),
        },
        (RkhsElement::Spectral(a), RkhsElement::Sections(_)) => match project(h2, model)? {
            RkhsElement::Spectral(b) => Ok(spectral_inner(a, &b)),
            RkhsElement::Sections(_) => unreachable!(),
        },
    }
}

/// Spectral coefficients `c_i = <h, sqrt(sigma_i) f_i>_K` of a section-form
/// element, from the reproducing property `<K_x y, g>_K = <y, g(x)>`.
pub fn project(h: &RkhsElement, model: &MercerModel) -> Result<RkhsElement> {
    let dec = &model.dec;
    match h {
        RkhsElement::Spectral(_) => Ok(h.clone()),
        RkhsElement::Sections(terms) => {
            let mut c = vec![c64(0.0, 0.0); dec.rank()];
            for (x, y) in terms {
                if !model.support.contains(*x) {
                    return Err(Error::OffSupport(model.space.id(*x).to_string()));
                }
                for (i, ci) in c.iter_mut().enumerate() {
                    *ci += dec.func_at(i, *x).dotc(y) * dec.sigmas()[i].sqrt();
                }
            }
            Ok(RkhsElement::Spectral(c))
        }
    }
}

/// Frame vectors `sqrt(sigma_i) f_i^j` of one output component, as columns
/// over atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarFrame {
    pub block: usize,
    pub atom_ids: Vec<String>,
    #[serde(skip)]
    pub vectors: CMatrix,
}

impl ScalarFrame {
    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.ncols() == 0
    }

    /// A copy with every frame vector multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        ScalarFrame {
            block: self.block,
            atom_ids: self.atom_ids.clone(),
            vectors: &self.vectors * c64(s, 0.0),
        }
    }

    /// Reads the `i,atom_id,value_re,value_im` format; atoms are ordered by
    /// first appearance and absent entries are zero.
    pub fn from_csv_path(path: impl AsRef<Path>, block: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, path, block)
    }

    pub fn from_csv_reader(reader: impl std::io::Read, path: &Path, block: usize) -> Result<Self> {
        let parse_err = |line: u64, reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let expected = ["i", "atom_id", "value_re", "value_im"];
        if rdr.headers()?.iter().ne(expected) {
            return Err(parse_err(
                1,
                format!("header must be `{}`", expected.join(",")),
            ));
        }
        let mut atom_ids: Vec<String> = Vec::new();
        let mut index = std::collections::HashMap::new();
        let mut entries = Vec::new();
        let mut len = 0;
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let i = rec[0]
                .parse::<usize>()
                .map_err(|_| parse_err(line, format!("`{}` is not an index", &rec[0])))?;
            let num = |k: usize| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("`{}` is not a number", &rec[k])))
            };
            let atom = *index.entry(rec[1].to_string()).or_insert_with(|| {
                atom_ids.push(rec[1].to_string());
                atom_ids.len() - 1
            });
            len = len.max(i + 1);
            entries.push((i, atom, c64(num(2)?, num(3)?)));
        }
        let mut vectors = CMatrix::zeros(atom_ids.len(), len);
        for (i, atom, v) in entries {
            vectors[(atom, i)] = v;
        }
        Ok(ScalarFrame {
            block,
            atom_ids,
            vectors,
        })
    }

    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "atom_id", "value_re", "value_im"])?;
        for i in 0..self.len() {
            for (a, id) in self.atom_ids.iter().enumerate() {
                let v = self.vectors[(a, i)];
                w.write_record([
                    i.to_string(),
                    id.clone(),
                    format!("{:e}", v.re),
                    format!("{:e}", v.im),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<frame output>", e))?;
        Ok(())
    }
}

/// Frame `{sqrt(sigma_i) f_i^j}` of component `j` (0-based) over all atoms.
pub fn extract_frame(
    dec: &SpectralDecomposition,
    space: &AtomSpace,
    j: usize,
) -> Result<ScalarFrame> {
    if j >= dec.n() {
        return Err(Error::Dimension(format!(
            "block {j} out of range for n = {}",
            dec.n()
        )));
    }
    if let Some(x) = (0..dec.num_atoms()).find(|&x| !dec.is_defined(x)) {
        return Err(Error::Dimension(format!(
            "eigenfunctions not extended to atom `{}`",
            space.id(x)
        )));
    }
    let vectors = CMatrix::from_fn(dec.num_atoms(), dec.rank(), |x, i| {
        dec.value(i, x, j) * dec.sigmas()[i].sqrt()
    });
    Ok(ScalarFrame {
        block: j,
        atom_ids: space.ids().to_vec(),
        vectors,
    })
}

fn frame_rows(frame: &ScalarFrame, space: &AtomSpace, atoms: &[usize]) -> Result<Vec<usize>> {
    let index: std::collections::HashMap<&str, usize> = frame
        .atom_ids
        .iter()
        .enumerate()
        .map(|(r, id)| (id.as_str(), r))
        .collect();
    atoms
        .iter()
        .map(|&x| {
            index
                .get(space.id(x))
                .copied()
                .ok_or_else(|| Error::UnknownAtom(space.id(x).to_string()))
        })
        .collect()
}

/// Max over `x` in `atoms` of `|K_j(x,x) - sum_i |v_i(x)|^2|`, i.e. the
/// Parseval identity tested on the sections `(K_j)_x`.
pub fn frame_check(
    frame: &ScalarFrame,
    kernel: &dyn MatrixKernel,
    space: &AtomSpace,
    atoms: &[usize],
) -> Result<f64> {
    let j = frame.block;
    let rows = frame_rows(frame, space, atoms)?;
    let mut worst: f64 = 0.0;
    for (&x, &r) in atoms.iter().zip(&rows) {
        let kjj = kernel.eval(space.atom(x), space.atom(x))?[(j, j)].re;
        let sum: f64 = frame.vectors.row(r).iter().map(|v| v.norm_sqr()).sum();
        worst = worst.max((kjj - sum).abs());
    }
    Ok(worst)
}

/// Parseval deviation for `h = sum_r a_r (K_j)_{x_r}`:
/// `|h|^2_{K_j}` from the Gram against `sum_i |<h, v_i>|^2` with
/// `<(K_j)_x, v_i> = conj(v_i(x))`.
pub fn frame_check_combination(
    frame: &ScalarFrame,
    kernel: &dyn MatrixKernel,
    space: &AtomSpace,
    atoms: &[usize],
    coeffs: &[C64],
) -> Result<f64> {
    if atoms.len() != coeffs.len() {
        return Err(Error::Dimension(format!(
            "{} atoms but {} coefficients",
            atoms.len(),
            coeffs.len()
        )));
    }
    let j = frame.block;
    let rows = frame_rows(frame, space, atoms)?;
    let mut norm_sq = c64(0.0, 0.0);
    for (r, &xr) in atoms.iter().enumerate() {
        for (s, &xs) in atoms.iter().enumerate() {
            let k = kernel.eval(space.atom(xs), space.atom(xr))?[(j, j)];
            norm_sq += coeffs[r] * coeffs[s].conj() * k;
        }
    }
    let frame_sum: f64 = (0..frame.len())
        .map(|i| {
            rows.iter()
                .zip(coeffs)
                .map(|(&row, a)| a * frame.vectors[(row, i)].conj())
                .sum::<C64>()
                .norm_sqr()
        })
        .sum();
    Ok((norm_sq.re - frame_sum).abs())
}
