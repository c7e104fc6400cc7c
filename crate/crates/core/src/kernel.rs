//! Matrix-valued kernels: the evaluator trait, a small zoo of concrete
//! kernels described by [`KernelSpec`], block Gram assembly and the
//! Hermitian / positive-semidefinite validation.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_deviation, hermitian_eigenvalues, symmetrize, CMatrix, C64};
use crate::space::{Atom, AtomSpace};

/// Absolute tolerance on `|K(x,t) - K(t,x)^*|` entries.
pub const TOL_SYM: f64 = 1e-10;
/// Relative PSD tolerance; scaled by the largest Gram eigenvalue (floor 1).
pub const TOL_PSD_REL: f64 = 1e-10;

pub fn tol_psd(max_eigenvalue: f64) -> f64 {
    TOL_PSD_REL * max_eigenvalue.max(1.0)
}

/// A map `(x, t) -> K(x, t)` into `n x n` complex matrices.
pub trait MatrixKernel: Send + Sync {
    /// Output dimension `n`.
    fn dim(&self) -> usize;

    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix>;
}

impl<K: MatrixKernel + ?Sized> MatrixKernel for Box<K> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix> {
        (**self).eval(x, t)
    }
}

impl<K: MatrixKernel + ?Sized> MatrixKernel for std::sync::Arc<K> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix> {
        (**self).eval(x, t)
    }
}

/// Wraps a closure as a kernel. Nothing is checked; see [`validate_kernel`].
pub struct FnKernel<F> {
    n: usize,
    f: F,
}

impl<F> FnKernel<F>
where
    F: Fn(Atom<'_>, Atom<'_>) -> CMatrix + Send + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        FnKernel { n, f }
    }
}

impl<F> MatrixKernel for FnKernel<F>
where
    F: Fn(Atom<'_>, Atom<'_>) -> CMatrix + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix> {
        let m = (self.f)(x, t);
        if m.nrows() != self.n || m.ncols() != self.n {
            return Err(Error::KernelEval {
                x: x.id.into(),
                t: t.id.into(),
                reason: format!(
                    "returned {}x{} block, expected {n}x{n}",
                    m.nrows(),
                    m.ncols(),
                    n = self.n
                ),
            });
        }
        Ok(m)
    }
}

/// JSON description of a kernel, discriminated by `type`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `K(x,t) = c`
    Constant { c: f64 },
    /// `exp(-gamma |x - t|_2^2)`
    Gaussian { gamma: f64 },
    /// `exp(-gamma |x - t|_1)`
    Laplacian { gamma: f64 },
    /// `(<x, t> + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
    /// `B k(x,t)` for a Hermitian PSD `B = b + i b_im` and scalar `k`.
    Separable {
        b: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b_im: Option<Vec<Vec<f64>>>,
        scalar: Box<KernelSpec>,
    },
    /// `diag(k_1(x,t), ..., k_n(x,t))`
    Diagonal { blocks: Vec<KernelSpec> },
    /// Pointwise sum of kernels with a common output dimension.
    Sum { terms: Vec<KernelSpec> },
    /// `delta_{xt} I_n`, keyed on atom id.
    Delta { n: usize },
    /// The zero kernel on `C^n`.
    Zero { n: usize },
    /// Table in the `x_id,t_id,l,j,re,im` CSV format.
    Precomputed { path: PathBuf },
    /// Kernel synthesised from one frame CSV per output component.
    FrameSynth { frames: Vec<PathBuf> },
}

impl KernelSpec {
    /// Reads a spec from a JSON file; relative paths inside are resolved
    /// against the file's directory.
    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: KernelSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(spec.resolve_paths(base))
    }

    fn resolve_paths(self, base: &Path) -> Self {
        let join = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        match self {
            KernelSpec::Precomputed { path } => KernelSpec::Precomputed { path: join(path) },
            KernelSpec::FrameSynth { frames } => KernelSpec::FrameSynth {
                frames: frames.into_iter().map(join).collect(),
            },
            KernelSpec::Separable { b, b_im, scalar } => KernelSpec::Separable {
                b,
                b_im,
                scalar: Box::new(scalar.resolve_paths(base)),
            },
            KernelSpec::Diagonal { blocks } => KernelSpec::Diagonal {
                blocks: blocks.into_iter().map(|s| s.resolve_paths(base)).collect(),
            },
            KernelSpec::Sum { terms } => KernelSpec::Sum {
                terms: terms.into_iter().map(|s| s.resolve_paths(base)).collect(),
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Scalar {
    Constant(f64),
    Gaussian(f64),
    Laplacian(f64),
    Polynomial(u32, f64),
}

impl Scalar {
    fn value(self, x: &[f64], t: &[f64]) -> f64 {
        match self {
            Scalar::Constant(c) => c,
            Scalar::Gaussian(g) => {
                (-g * x.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp()
            }
            Scalar::Laplacian(g) => {
                (-g * x.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>()).exp()
            }
            Scalar::Polynomial(deg, off) => {
                let dot: f64 = x.iter().zip(t).map(|(a, b)| a * b).sum();
                (dot + off).powi(deg as i32)
            }
        }
    }
}

struct ScalarKernel(Scalar);

impl MatrixKernel for ScalarKernel {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix> {
        if x.coords.len() != t.coords.len() {
            return Err(Error::KernelEval {
                x: x.id.into(),
                t: t.id.into(),
                reason: "coordinate lengths differ".into(),
            });
        }
        Ok(CMatrix::from_element(
            1,
            1,
            c64(self.0.value(x.coords, t.coords), 0.0),
        ))
    }
}

struct Separable {
    b: CMatrix,
    scalar: Box<dyn MatrixKernel>,
}

impl MatrixKernel for Separable {
    fn dim(&self) -> usize {
        self.b.nrows()
    }
    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix> {
        let k = self.scalar.eval(x, t)?[(0, 0)];
        Ok(&self.b * k)
    }
}

struct Diagonal(Vec<Box<dyn MatrixKernel>>);

impl MatrixKernel for Diagonal {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix> {
        let mut m = CMatrix::zeros(self.0.len(), self.0.len());
        for (j, k) in self.0.iter().enumerate() {
            m[(j, j)] = k.eval(x, t)?[(0, 0)];
        }
        Ok(m)
    }
}

struct Sum(Vec<Box<dyn MatrixKernel>>);

impl MatrixKernel for Sum {
    fn dim(&self) -> usize {
        self.0[0].dim()
    }
    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix> {
        let mut acc = self.0[0].eval(x, t)?;
        for k in &self.0[1..] {
            acc += k.eval(x, t)?;
        }
        Ok(acc)
    }
}

struct Delta(usize);

impl MatrixKernel for Delta {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix> {
        Ok(if x.id == t.id {
            CMatrix::identity(self.0, self.0)
        } else {
            CMatrix::zeros(self.0, self.0)
        })
    }
}

struct Zero(usize);

impl MatrixKernel for Zero {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _: Atom<'_>, _: Atom<'_>) -> Result<CMatrix> {
        Ok(CMatrix::zeros(self.0, self.0))
    }
}

fn positive_finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::spec(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

fn build_scalar(spec: &KernelSpec, field: &str) -> Result<Box<dyn MatrixKernel>> {
    let k = build_kernel(spec)?;
    if k.dim() != 1 {
        return Err(Error::spec(
            field,
            format!("must be a scalar kernel, got output dimension {}", k.dim()),
        ));
    }
    Ok(k)
}

fn separable_matrix(b: &[Vec<f64>], b_im: Option<&[Vec<f64>]>) -> Result<CMatrix> {
    let n = b.len();
    if n == 0 || b.iter().any(|r| r.len() != n) {
        return Err(Error::spec("b", "must be a non-empty square matrix"));
    }
    if let Some(im) = b_im {
        if im.len() != n || im.iter().any(|r| r.len() != n) {
            return Err(Error::spec("b_im", format!("must be {n}x{n} like `b`")));
        }
    }
    let m = CMatrix::from_fn(n, n, |i, j| c64(b[i][j], b_im.map_or(0.0, |im| im[i][j])));
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::spec("b", "entries must be finite"));
    }
    let dev = hermitian_deviation(&m);
    if dev > TOL_SYM {
        return Err(Error::spec(
            "b",
            format!("not Hermitian (max deviation {dev:e})"),
        ));
    }
    let ev = hermitian_eigenvalues(&m)?;
    let (lo, hi) = ev
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo < -tol_psd(hi) {
        return Err(Error::spec(
            "b",
            format!("not positive semidefinite (min eigenvalue {lo:e})"),
        ));
    }
    Ok(m)
}

/// Builds an evaluator from a spec, checking parameter ranges.
pub fn build_kernel(spec: &KernelSpec) -> Result<Box<dyn MatrixKernel>> {
    Ok(match spec {
        KernelSpec::Constant { c } => {
            if !(c.is_finite() && *c >= 0.0) {
                return Err(Error::spec(
                    "c",
                    format!("must be finite and >= 0, got {c}"),
                ));
            }
            Box::new(ScalarKernel(Scalar::Constant(*c)))
        }
        KernelSpec::Gaussian { gamma } => {
            positive_finite("gamma", *gamma)?;
            Box::new(ScalarKernel(Scalar::Gaussian(*gamma)))
        }
        KernelSpec::Laplacian { gamma } => {
            positive_finite("gamma", *gamma)?;
            Box::new(ScalarKernel(Scalar::Laplacian(*gamma)))
        }
        KernelSpec::Polynomial { degree, offset } => {
            if *degree < 1 {
                return Err(Error::spec("degree", "must be >= 1"));
            }
            if !(offset.is_finite() && *offset >= 0.0) {
                return Err(Error::spec(
                    "offset",
                    format!("must be finite and >= 0, got {offset}"),
                ));
            }
            Box::new(ScalarKernel(Scalar::Polynomial(*degree, *offset)))
        }
        KernelSpec::Separable { b, b_im, scalar } => Box::new(Separable {
            b: separable_matrix(b, b_im.as_deref())?,
            scalar: build_scalar(scalar, "scalar")?,
        }),
        KernelSpec::Diagonal { blocks } => {
            if blocks.is_empty() {
                return Err(Error::spec(
                    "blocks",
                    "must list at least one scalar kernel",
                ));
            }
            let ks = blocks
                .iter()
                .enumerate()
                .map(|(j, s)| build_scalar(s, &format!("blocks[{j}]")))
                .collect::<Result<Vec<_>>>()?;
            Box::new(Diagonal(ks))
        }
        KernelSpec::Sum { terms } => {
            let ks = terms.iter().map(build_kernel).collect::<Result<Vec<_>>>()?;
            let Some(n) = ks.first().map(|k| k.dim()) else {
                return Err(Error::spec("terms", "must list at least one kernel"));
            };
            if let Some(j) = ks.iter().position(|k| k.dim() != n) {
                return Err(Error::spec(
                    format!("terms[{j}]"),
                    format!("output dimension {} differs from {n}", ks[j].dim()),
                ));
            }
            Box::new(Sum(ks))
        }
        KernelSpec::Delta { n } => {
            if *n == 0 {
                return Err(Error::spec("n", "must be >= 1"));
            }
            Box::new(Delta(*n))
        }
        KernelSpec::Zero { n } => {
            if *n == 0 {
                return Err(Error::spec("n", "must be >= 1"));
            }
            Box::new(Zero(*n))
        }
        KernelSpec::Precomputed { path } => Box::new(PrecomputedKernel::from_csv_path(path)?),
        KernelSpec::FrameSynth { frames } => {
            if frames.is_empty() {
                return Err(Error::spec(
                    "frames",
                    "must list one frame file per output component",
                ));
            }
            let loaded = frames
                .iter()
                .enumerate()
                .map(|(j, p)| crate::mercer::ScalarFrame::from_csv_path(p, j))
                .collect::<Result<Vec<_>>>()?;
            Box::new(crate::synthesis::synthesize_kernel(
                &crate::synthesis::align_frames(loaded)?,
            ))
        }
    })
}

/// Kernel read from a block table; evaluation outside the table fails.
#[derive(Debug, Clone)]
pub struct PrecomputedKernel {
    n: usize,
    entries: HashMap<(String, String), Vec<Option<C64>>>,
}

impl PrecomputedKernel {
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, path)
    }

    pub fn from_csv_reader(reader: impl std::io::Read, path: &Path) -> Result<Self> {
        let parse_err = |line: u64, reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let expected = ["x_id", "t_id", "l", "j", "re", "im"];
        if rdr.headers()?.iter().ne(expected) {
            return Err(parse_err(
                1,
                format!("header must be `{}`", expected.join(",")),
            ));
        }
        let mut rows = Vec::new();
        let mut n = 0;
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let idx = |k: usize| {
                rec[k]
                    .parse::<usize>()
                    .map_err(|_| parse_err(line, format!("`{}` is not an index", &rec[k])))
            };
            let num = |k: usize| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("`{}` is not a number", &rec[k])))
            };
            let (l, j) = (idx(2)?, idx(3)?);
            n = n.max(l + 1).max(j + 1);
            rows.push((
                line,
                rec[0].to_string(),
                rec[1].to_string(),
                l,
                j,
                c64(num(4)?, num(5)?),
            ));
        }
        if n == 0 {
            return Err(parse_err(1, "table has no entries".into()));
        }
        let mut entries: HashMap<(String, String), Vec<Option<C64>>> = HashMap::new();
        for (line, x, t, l, j, v) in rows {
            let block = entries.entry((x, t)).or_insert_with(|| vec![None; n * n]);
            if block[l * n + j].replace(v).is_some() {
                return Err(parse_err(line, format!("duplicate entry ({l}, {j})")));
            }
        }
        Ok(PrecomputedKernel { n, entries })
    }

    fn entry(&self, x: &str, t: &str, l: usize, j: usize) -> Option<C64> {
        let key = |a: &str, b: &str| (a.to_string(), b.to_string());
        self.entries
            .get(&key(x, t))
            .and_then(|b| b[l * self.n + j])
            .or_else(|| {
                self.entries
                    .get(&key(t, x))
                    .and_then(|b| b[j * self.n + l])
                    .map(|v| v.conj())
            })
    }
}

impl MatrixKernel for PrecomputedKernel {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval(&self, x: Atom<'_>, t: Atom<'_>) -> Result<CMatrix> {
        let n = self.n;
        let mut m = CMatrix::zeros(n, n);
        for l in 0..n {
            for j in 0..n {
                m[(l, j)] = self
                    .entry(x.id, t.id, l, j)
                    .ok_or_else(|| Error::KernelEval {
                        x: x.id.into(),
                        t: t.id.into(),
                        reason: format!("entry ({l}, {j}) not in precomputed table"),
                    })?;
            }
        }
        Ok(m)
    }
}

/// Writes the upper-triangular blocks (`x <= t` in atom order) of a kernel
/// in the precomputed CSV format.
pub fn write_precomputed(
    kernel: &dyn MatrixKernel,
    space: &AtomSpace,
    out: impl std::io::Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x_id", "t_id", "l", "j", "re", "im"])?;
    for x in 0..space.len() {
        for t in x..space.len() {
            let block = kernel.eval(space.atom(x), space.atom(t))?;
            for l in 0..kernel.dim() {
                for j in 0..kernel.dim() {
                    let v = block[(l, j)];
                    w.write_record([
                        space.id(x).to_string(),
                        space.id(t).to_string(),
                        l.to_string(),
                        j.to_string(),
                        format!("{:e}", v.re),
                        format!("{:e}", v.im),
                    ])?;
                }
            }
        }
    }
    w.flush()
        .map_err(|e| Error::io("<precomputed output>", e))?;
    Ok(())
}

/// Raw evaluations `K(x,t)` laid out as an `(N n) x (N n)` matrix, block
/// `(x, t)` at offset `(x n, t n)`. No symmetrization.
pub fn evaluate_blocks(
    kernel: &dyn MatrixKernel,
    space: &AtomSpace,
    atoms: &[usize],
) -> Result<CMatrix> {
    let n = kernel.dim();
    let rows: Vec<Vec<CMatrix>> = atoms
        .par_iter()
        .map(|&x| {
            atoms
                .iter()
                .map(|&t| kernel.eval(space.atom(x), space.atom(t)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let size = atoms.len() * n;
    let mut g = CMatrix::zeros(size, size);
    for (a, row) in rows.iter().enumerate() {
        for (b, block) in row.iter().enumerate() {
            if block.nrows() != n || block.ncols() != n {
                return Err(Error::KernelEval {
                    x: space.id(atoms[a]).into(),
                    t: space.id(atoms[b]).into(),
                    reason: format!(
                        "returned {}x{} block, expected {n}x{n}",
                        block.nrows(),
                        block.ncols()
                    ),
                });
            }
            g.view_mut((a * n, b * n), (n, n)).copy_from(block);
        }
    }
    Ok(g)
}

/// Block Gram matrix over an ordered atom list; index `(x, l) -> x n + l`.
#[derive(Debug, Clone)]
pub struct BlockGram {
    pub n: usize,
    pub atoms: Vec<usize>,
    pub matrix: CMatrix,
}

impl BlockGram {
    pub fn block(&self, a: usize, b: usize) -> CMatrix {
        self.matrix
            .view((a * self.n, b * self.n), (self.n, self.n))
            .into_owned()
    }
}

/// Assembles and Hermitian-averages the block Gram; fails if the raw table
/// deviates from Hermitian by more than `tol_sym`.
pub fn assemble_block_gram(
    kernel: &dyn MatrixKernel,
    space: &AtomSpace,
    atoms: &[usize],
    tol_sym: f64,
) -> Result<BlockGram> {
    let raw = evaluate_blocks(kernel, space, atoms)?;
    gram_from_raw(raw, kernel.dim(), atoms.to_vec(), tol_sym)
}

pub(crate) fn gram_from_raw(
    mut raw: CMatrix,
    n: usize,
    atoms: Vec<usize>,
    tol_sym: f64,
) -> Result<BlockGram> {
    let dev = hermitian_deviation(&raw);
    if dev > tol_sym {
        return Err(Error::NotHermitian {
            max_deviation: dev,
            tol: tol_sym,
        });
    }
    symmetrize(&mut raw);
    Ok(BlockGram {
        n,
        atoms,
        matrix: raw,
    })
}

/// Outcome of checking the reproducing-kernel axioms on a set of atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub atoms: usize,
    pub n: usize,
    pub max_hermitian_deviation: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub tol_sym: f64,
    pub tol_psd: f64,
    pub hermitian_ok: bool,
    pub psd_ok: bool,
    pub passed: bool,
}

/// Checks Hermitian pair symmetry and block positive semidefiniteness.
///
/// Only evaluation failures are errors; axiom violations are reported.
/// The PSD test runs on the Hermitian part even when symmetry fails.
pub fn validate_kernel(
    kernel: &dyn MatrixKernel,
    space: &AtomSpace,
    atoms: &[usize],
    tol_sym: f64,
) -> Result<ValidationReport> {
    let raw = evaluate_blocks(kernel, space, atoms)?;
    Ok(validate_raw(raw, kernel.dim(), tol_sym))
}

pub(crate) fn validate_raw(mut raw: CMatrix, n: usize, tol_sym: f64) -> ValidationReport {
    let dev = hermitian_deviation(&raw);
    symmetrize(&mut raw);
    let (min_ev, max_ev) = match hermitian_eigenvalues(&raw) {
        Ok(ev) if !ev.is_empty() => ev
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            }),
        Ok(_) => (0.0, 0.0),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let tol = tol_psd(max_ev);
    let hermitian_ok = dev <= tol_sym;
    let psd_ok = min_ev >= -tol;
    ValidationReport {
        atoms: raw.nrows().checked_div(n).unwrap_or(0),
        n,
        max_hermitian_deviation: dev,
        min_eigenvalue: min_ev,
        max_eigenvalue: max_ev,
        tol_sym,
        tol_psd: tol,
        hermitian_ok,
        psd_ok,
        passed: hermitian_ok && psd_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(pos: &[f64]) -> AtomSpace {
        AtomSpace::on_line(pos, &vec![1.0; pos.len()]).unwrap()
    }

    #[test]
    fn zoo_formulas() {
        let s = line(&[0.0, 1.0]);
        let c = build_kernel(&KernelSpec::Constant { c: 1.0 }).unwrap();
        assert_eq!(
            c.eval(s.atom(0), s.atom(1)).unwrap(),
            CMatrix::from_element(1, 1, c64(1.0, 0.0))
        );
        let g = build_kernel(&KernelSpec::Gaussian { gamma: 1.0 }).unwrap();
        assert_relative_eq!(
            g.eval(s.atom(0), s.atom(1)).unwrap()[(0, 0)].re,
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        let lap = build_kernel(&KernelSpec::Laplacian { gamma: 2.0 }).unwrap();
        assert_relative_eq!(
            lap.eval(s.atom(0), s.atom(1)).unwrap()[(0, 0)].re,
            (-2.0f64).exp(),
            epsilon = 1e-15
        );
        let p = build_kernel(&KernelSpec::Polynomial {
            degree: 2,
            offset: 1.0,
        })
        .unwrap();
        let s2 = line(&[2.0, 3.0]);
        assert_relative_eq!(
            p.eval(s2.atom(0), s2.atom(1)).unwrap()[(0, 0)].re,
            49.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn separable_constant_is_b_everywhere() {
        let spec = KernelSpec::Separable {
            b: vec![vec![2.0, 1.0], vec![1.0, 2.0]],
            b_im: None,
            scalar: Box::new(KernelSpec::Constant { c: 1.0 }),
        };
        let k = build_kernel(&spec).unwrap();
        let s = line(&[0.0, 5.0]);
        let b = crate::linalg::real_matrix(&[&[2.0, 1.0], &[1.0, 2.0]]);
        for x in 0..2 {
            for t in 0..2 {
                assert_eq!(k.eval(s.atom(x), s.atom(t)).unwrap(), b);
            }
        }
    }

    #[test]
    fn spec_validation_names_field() {
        let bad = [
            (KernelSpec::Gaussian { gamma: 0.0 }, "gamma"),
            (
                KernelSpec::Polynomial {
                    degree: 0,
                    offset: 1.0,
                },
                "degree",
            ),
            (
                KernelSpec::Separable {
                    b: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
                    b_im: None,
                    scalar: Box::new(KernelSpec::Constant { c: 1.0 }),
                },
                "b",
            ),
            (
                KernelSpec::Diagonal {
                    blocks: vec![KernelSpec::Delta { n: 2 }],
                },
                "blocks[0]",
            ),
        ];
        for (spec, field) in bad {
            match build_kernel(&spec) {
                Err(Error::InvalidSpec { field: f, .. }) => assert_eq!(f, field),
                Err(e) => panic!("{spec:?}: unexpected error {e}"),
                Ok(_) => panic!("{spec:?}: accepted"),
            }
        }
    }

    #[test]
    fn spec_json_schema() {
        let json = r#"{"type":"separable","b":[[1,0],[0,1]],"b_im":[[0,0.5],[-0.5,0]],
                       "scalar":{"type":"gaussian","gamma":1.5}}"#;
        let spec: KernelSpec = serde_json::from_str(json).unwrap();
        assert!(build_kernel(&spec).is_ok());
        let back: KernelSpec =
            serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"type":"gaussian","sigma":1}"#).is_err());
    }

    #[test]
    fn block_gram_examples() {
        let s = line(&[0.0, 1.0, 2.0]);
        let id = build_kernel(&KernelSpec::Delta { n: 2 }).unwrap();
        let g = assemble_block_gram(id.as_ref(), &s, &[0, 1, 2], TOL_SYM).unwrap();
        assert_eq!(g.matrix, CMatrix::identity(6, 6));

        let s2 = line(&[0.0, 1.0]);
        let c = build_kernel(&KernelSpec::Constant { c: 1.0 }).unwrap();
        let g = assemble_block_gram(c.as_ref(), &s2, &[0, 1], TOL_SYM).unwrap();
        assert_eq!(g.matrix, CMatrix::from_element(2, 2, c64(1.0, 0.0)));

        let gk = build_kernel(&KernelSpec::Gaussian { gamma: 1.0 }).unwrap();
        let g = assemble_block_gram(gk.as_ref(), &s2, &[0, 1], TOL_SYM).unwrap();
        let e = (-1.0f64).exp();
        assert_relative_eq!(g.matrix[(0, 1)].re, e, epsilon = 1e-15);
        assert_relative_eq!(g.matrix[(1, 0)].re, e, epsilon = 1e-15);
        assert_eq!(g.matrix[(0, 0)].re, 1.0);
    }

    #[test]
    fn antisymmetric_function_fails_hermitian_check() {
        let s = line(&[0.0, 1.0, 3.0]);
        let k = FnKernel::new(1, |x, t| {
            CMatrix::from_element(1, 1, c64(x.coords[0] - t.coords[0], 0.0))
        });
        let r = validate_kernel(&k, &s, &[0, 1, 2], TOL_SYM).unwrap();
        assert!(!r.hermitian_ok && !r.passed);
        assert_relative_eq!(r.max_hermitian_deviation, 6.0, epsilon = 1e-12);
        assert!(matches!(
            assemble_block_gram(&k, &s, &[0, 1, 2], TOL_SYM),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn separable_gaussian_passes() {
        let s = line(&[0.0, 0.4, 1.1, 2.5]);
        let spec = KernelSpec::Separable {
            b: vec![vec![2.0, 1.0], vec![1.0, 2.0]],
            b_im: Some(vec![vec![0.0, 0.3], vec![-0.3, 0.0]]),
            scalar: Box::new(KernelSpec::Gaussian { gamma: 1.0 }),
        };
        let k = build_kernel(&spec).unwrap();
        let r = validate_kernel(k.as_ref(), &s, &[0, 1, 2, 3], TOL_SYM).unwrap();
        assert!(r.passed, "{r:?}");
        // Kronecker structure: min eig = min eig(B) * min eig(Gram)
        assert!(r.min_eigenvalue > 0.0);
    }

    #[test]
    fn precomputed_fills_mirror_entries() {
        let text = "x_id,t_id,l,j,re,im\na,a,0,0,1,0\na,b,0,0,0.5,0.25\nb,b,0,0,2,0\n";
        let k = PrecomputedKernel::from_csv_reader(text.as_bytes(), Path::new("k.csv")).unwrap();
        let s = AtomSpace::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![]; 3],
            vec![1.0; 3],
        )
        .unwrap();
        assert_eq!(
            k.eval(s.atom(1), s.atom(0)).unwrap()[(0, 0)],
            c64(0.5, -0.25)
        );
        assert!(matches!(
            k.eval(s.atom(0), s.atom(2)),
            Err(Error::KernelEval { .. })
        ));
        let r = validate_kernel(&k, &s, &[0, 1], TOL_SYM).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn precomputed_round_trip() {
        let s = line(&[0.0, 0.7, 1.5]);
        let spec = KernelSpec::Separable {
            b: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
            b_im: Some(vec![vec![0.0, 0.1], vec![-0.1, 0.0]]),
            scalar: Box::new(KernelSpec::Laplacian { gamma: 0.5 }),
        };
        let k = build_kernel(&spec).unwrap();
        let mut buf = Vec::new();
        write_precomputed(k.as_ref(), &s, &mut buf).unwrap();
        let p = PrecomputedKernel::from_csv_reader(buf.as_slice(), Path::new("k.csv")).unwrap();
        for x in 0..3 {
            for t in 0..3 {
                let diff =
                    k.eval(s.atom(x), s.atom(t)).unwrap() - p.eval(s.atom(x), s.atom(t)).unwrap();
                assert!(crate::linalg::max_abs_entry(&diff) < 1e-15);
            }
        }
    }
}
