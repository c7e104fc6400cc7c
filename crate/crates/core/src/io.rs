//! CSV writers for spectra, eigenfunctions and error tables.
//!
//! Floats are written in shortest round-trip exponent form so that outputs
//! are byte-identical across runs on identical inputs.

use std::io::Write;

use crate::error::{Error, Result};
use crate::operator::SpectralDecomposition;
use crate::space::{AtomSpace, PseudoMetricMatrix};

fn flush<W: Write>(w: csv::Writer<W>, what: &str) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io(what, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(what, e))
}

pub fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// `i,sigma` with `i` 0-based in descending-sigma order.
pub fn write_spectrum(dec: &SpectralDecomposition, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "sigma"])?;
    for (i, s) in dec.sigmas().iter().enumerate() {
        w.write_record([i.to_string(), fmt(*s)])?;
    }
    flush(w, "<spectrum output>")
}

/// `i,atom_id,j,re,im` for every retained eigenfunction, atom and component.
pub fn write_eigenfunctions(
    dec: &SpectralDecomposition,
    space: &AtomSpace,
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "atom_id", "j", "re", "im"])?;
    for i in 0..dec.rank() {
        for x in 0..dec.num_atoms() {
            for j in 0..dec.n() {
                let v = dec.value(i, x, j);
                w.write_record([
                    i.to_string(),
                    space.id(x).to_string(),
                    j.to_string(),
                    fmt(v.re),
                    fmt(v.im),
                ])?;
            }
        }
    }
    flush(w, "<eigenfunction output>")
}

/// `m,max_abs_error`
pub fn write_error_table(table: &[(usize, f64)], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "max_abs_error"])?;
    for (m, e) in table {
        w.write_record([m.to_string(), fmt(*e)])?;
    }
    flush(w, "<error table output>")
}

/// `x_id,t_id,d` over all ordered pairs.
pub fn write_metric(metric: &PseudoMetricMatrix, space: &AtomSpace, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x_id", "t_id", "d"])?;
    for x in 0..metric.len() {
        for t in 0..metric.len() {
            w.write_record([
                space.id(x).to_string(),
                space.id(t).to_string(),
                fmt(metric.get(x, t)),
            ])?;
        }
    }
    flush(w, "<metric output>")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{build_kernel, KernelSpec};
    use crate::model::{MercerModel, Tolerances};
    use std::sync::Arc;

    #[test]
    fn spectrum_csv_layout() {
        let space = AtomSpace::on_line(&[0.0, 1.0], &[1.0, 3.0]).unwrap();
        let k = Arc::from(build_kernel(&KernelSpec::Delta { n: 1 }).unwrap());
        let m = MercerModel::build(space, k, &Tolerances::default()).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&m.dec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows[0], "i,sigma");
        assert_eq!(rows.len(), 3);
        for (row, expected) in rows[1..].iter().zip([1.5, 0.5]) {
            let sigma: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
            assert!((sigma - expected).abs() < 1e-14);
        }
        let mut buf = Vec::new();
        write_eigenfunctions(&m.dec, &m.space, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 2);
        assert!(text.starts_with("i,atom_id,j,re,im\n0,a0,0,"));
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0] {
            assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
        }
    }
}
