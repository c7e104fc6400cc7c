//! Finite measure spaces, the kernel pseudo-metric, the point quotient and
//! the support of a measure.
//!
//! The sigma-algebra is the power set of the atoms, so a measure is just a
//! nonnegative weight per atom.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{evaluate_blocks, MatrixKernel};
use crate::linalg::{hermitian_spectral_norm, trace_re, CMatrix};

/// A borrowed view of one atom, handed to kernel evaluators.
#[derive(Debug, Clone, Copy)]
pub struct Atom<'a> {
    pub id: &'a str,
    pub coords: &'a [f64],
}

/// Labelled atoms with coordinates and a measure weight each.
#[derive(Debug, Clone)]
pub struct AtomSpace {
    ids: Vec<String>,
    coords: Vec<Vec<f64>>,
    weights: Vec<f64>,
    index: HashMap<String, usize>,
}

impl AtomSpace {
    pub fn new(ids: Vec<String>, coords: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if ids.len() != coords.len() || ids.len() != weights.len() {
            return Err(Error::InvalidSpace(format!(
                "{} ids, {} coordinate rows, {} weights",
                ids.len(),
                coords.len(),
                weights.len()
            )));
        }
        if let Some(first) = coords.first() {
            let d = first.len();
            if let Some(k) = coords.iter().position(|c| c.len() != d) {
                return Err(Error::InvalidSpace(format!(
                    "atom `{}` has {} coordinates, expected {d}",
                    ids[k],
                    coords[k].len()
                )));
            }
        }
        for (id, c) in ids.iter().zip(&coords) {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpace(format!(
                    "atom `{id}` has a non-finite coordinate"
                )));
            }
        }
        for (id, &w) in ids.iter().zip(&weights) {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "atom `{id}` has invalid weight {w}"
                )));
            }
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (k, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), k).is_some() {
                return Err(Error::InvalidSpace(format!("duplicate atom id `{id}`")));
            }
        }
        Ok(AtomSpace {
            ids,
            coords,
            weights,
            index,
        })
    }

    /// Atoms on the real line, labelled `a0, a1, ...`.
    pub fn on_line(positions: &[f64], weights: &[f64]) -> Result<Self> {
        let ids = (0..positions.len()).map(|k| format!("a{k}")).collect();
        let coords = positions.iter().map(|&p| vec![p]).collect();
        Self::new(ids, coords, weights.to_vec())
    }

    /// Reads the `id,w,c1,...,cd` CSV format.
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
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "id" || &headers[1] != "w" {
            return Err(parse_err(1, "header must start with `id,w`".into()));
        }
        let d = headers.len() - 2;
        let (mut ids, mut coords, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != d + 2 {
                return Err(parse_err(
                    line,
                    format!("expected {} fields, found {}", d + 2, rec.len()),
                ));
            }
            let num = |k: usize| -> Result<f64> {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("`{}` is not a number", &rec[k])))
            };
            ids.push(rec[0].to_string());
            weights.push(num(1)?);
            coords.push((2..d + 2).map(num).collect::<Result<Vec<_>>>()?);
        }
        Self::new(ids, coords, weights).map_err(|e| match e {
            Error::InvalidSpace(msg) => parse_err(0, msg),
            other => other,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    pub fn atom(&self, k: usize) -> Atom<'_> {
        Atom {
            id: &self.ids[k],
            coords: &self.coords[k],
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, k: usize) -> &str {
        &self.ids[k]
    }

    pub fn coords(&self, k: usize) -> &[f64] {
        &self.coords[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownAtom(id.to_string()))
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same atoms with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.ids.clone(),
            self.coords.clone(),
            self.weights.iter().map(|w| w * c).collect(),
        )
    }

    /// Same atoms with replaced weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.ids.clone(), self.coords.clone(), weights)
    }

    /// Sub-space keeping the listed atoms, in the listed order.
    pub fn select(&self, keep: &[usize]) -> Result<Self> {
        Self::new(
            keep.iter().map(|&k| self.ids[k].clone()).collect(),
            keep.iter().map(|&k| self.coords[k].clone()).collect(),
            keep.iter().map(|&k| self.weights[k]).collect(),
        )
    }
}

/// Symmetric matrix of pairwise kernel pseudo-distances.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoMetricMatrix {
    size: usize,
    values: Vec<f64>,
}

impl PseudoMetricMatrix {
    fn from_fn(size: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; size * size];
        for x in 0..size {
            for t in (x + 1)..size {
                let v = f(x, t);
                values[x * size + t] = v;
                values[t * size + x] = v;
            }
        }
        PseudoMetricMatrix { size, values }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn get(&self, x: usize, t: usize) -> f64 {
        self.values[x * self.size + t]
    }

    /// Largest violation of `d(x,t) <= d(x,s) + d(s,t)` over all triples.
    pub fn max_triangle_violation(&self) -> f64 {
        let n = self.size;
        let mut worst: f64 = 0.0;
        for x in 0..n {
            for t in 0..n {
                let dxt = self.get(x, t);
                for s in 0..n {
                    worst = worst.max(dxt - self.get(x, s) - self.get(s, t));
                }
            }
        }
        worst
    }
}

/// `sup_{|y| <= 1} |K_x y - K_t y|_K` for every pair of atoms.
pub fn pseudo_metric(space: &AtomSpace, kernel: &dyn MatrixKernel) -> Result<PseudoMetricMatrix> {
    let all: Vec<usize> = (0..space.len()).collect();
    let blocks = evaluate_blocks(kernel, space, &all)?;
    Ok(pseudo_metric_from_blocks(&blocks, kernel.dim()))
}

/// `sqrt(sum_j |K_x^j - K_t^j|_K^2)`, the trace-based equivalent metric.
pub fn pseudo_metric_prime(
    space: &AtomSpace,
    kernel: &dyn MatrixKernel,
) -> Result<PseudoMetricMatrix> {
    let all: Vec<usize> = (0..space.len()).collect();
    let blocks = evaluate_blocks(kernel, space, &all)?;
    Ok(pseudo_metric_prime_from_blocks(&blocks, kernel.dim()))
}

/// `K(x,x) + K(t,t) - K(x,t) - K(t,x)` read from a raw block table.
fn difference_block(blocks: &CMatrix, n: usize, x: usize, t: usize) -> CMatrix {
    let b = |a: usize, c: usize| blocks.view((a * n, c * n), (n, n)).into_owned();
    b(x, x) + b(t, t) - b(x, t) - b(t, x)
}

pub(crate) fn pseudo_metric_from_blocks(blocks: &CMatrix, n: usize) -> PseudoMetricMatrix {
    let size = blocks.nrows().checked_div(n).unwrap_or(0);
    PseudoMetricMatrix::from_fn(size, |x, t| {
        hermitian_spectral_norm(&difference_block(blocks, n, x, t)).sqrt()
    })
}

pub(crate) fn pseudo_metric_prime_from_blocks(blocks: &CMatrix, n: usize) -> PseudoMetricMatrix {
    let size = blocks.nrows().checked_div(n).unwrap_or(0);
    PseudoMetricMatrix::from_fn(size, |x, t| {
        trace_re(&difference_block(blocks, n, x, t)).max(0.0).sqrt()
    })
}

/// Scale-aware zero test for `d`: `1e-9 * (1 + max_x |K(x,x)|^{1/2})`.
pub fn default_tol_quotient(max_diag_norm: f64) -> f64 {
    1e-9 * (1.0 + max_diag_norm.max(0.0).sqrt())
}

pub(crate) fn max_diag_norm_from_blocks(blocks: &CMatrix, n: usize) -> f64 {
    let size = blocks.nrows().checked_div(n).unwrap_or(0);
    (0..size)
        .map(|x| hermitian_spectral_norm(&blocks.view((x * n, x * n), (n, n)).into_owned()))
        .fold(0.0, f64::max)
}

/// Partition of atoms into classes of kernel-indistinguishable points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quotient {
    /// Class index of each atom, in atom order.
    pub class_of: Vec<usize>,
    /// First atom (in input order) of each class.
    pub representatives: Vec<usize>,
}

impl Quotient {
    pub fn num_classes(&self) -> usize {
        self.representatives.len()
    }

    /// Atom indices of each class, in input order.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes()];
        for (atom, &c) in self.class_of.iter().enumerate() {
            out[c].push(atom);
        }
        out
    }

    /// Collapses each class to its representative, summing the weights.
    pub fn collapse(&self, space: &AtomSpace) -> Result<AtomSpace> {
        let mut weights = vec![0.0; self.num_classes()];
        for (atom, &c) in self.class_of.iter().enumerate() {
            weights[c] += space.weight(atom);
        }
        space.select(&self.representatives)?.with_weights(weights)
    }
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

/// Transitive closure of `d(x,t) <= tol` via union-find.
pub fn quotient(metric: &PseudoMetricMatrix, tol: f64) -> Quotient {
    let n = metric.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for x in 0..n {
        for t in (x + 1)..n {
            if metric.get(x, t) <= tol {
                let (rx, rt) = (find(&mut parent, x), find(&mut parent, t));
                if rx != rt {
                    // keep the earlier atom as root so roots are class minima
                    let (lo, hi) = if rx < rt { (rx, rt) } else { (rt, rx) };
                    parent[hi] = lo;
                }
            }
        }
    }
    let mut class_of = vec![usize::MAX; n];
    let mut representatives = Vec::new();
    let mut class_of_root = HashMap::new();
    for atom in 0..n {
        let root = find(&mut parent, atom);
        let c = *class_of_root.entry(root).or_insert_with(|| {
            representatives.push(atom);
            representatives.len() - 1
        });
        class_of[atom] = c;
    }
    Quotient {
        class_of,
        representatives,
    }
}

/// Support of the measure: the atoms whose quotient class carries mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportSet {
    pub members: Vec<usize>,
    mask: Vec<bool>,
}

impl SupportSet {
    pub fn contains(&self, atom: usize) -> bool {
        self.mask.get(atom).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn mass(&self, space: &AtomSpace) -> f64 {
        self.members.iter().map(|&k| space.weight(k)).sum()
    }
}

/// Atoms within tolerance (through the quotient closure) of a positive-mass atom.
pub fn support(space: &AtomSpace, metric: &PseudoMetricMatrix, tol: f64) -> SupportSet {
    let q = quotient(metric, tol);
    support_from_quotient(space, &q)
}

pub fn support_from_quotient(space: &AtomSpace, q: &Quotient) -> SupportSet {
    let mut charged = vec![false; q.num_classes()];
    for (atom, &c) in q.class_of.iter().enumerate() {
        if space.weight(atom) > 0.0 {
            charged[c] = true;
        }
    }
    let mask: Vec<bool> = q.class_of.iter().map(|&c| charged[c]).collect();
    let members = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(k, _)| k)
        .collect();
    SupportSet { members, mask }
}
