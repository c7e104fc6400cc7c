//! Command implementations for the `mercer` binary. Every command writes a
//! `report.json` and a `report.txt` into the output directory next to its
//! numeric CSV tables.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use mercer_core::io::{write_eigenfunctions, write_error_table, write_metric, write_spectrum};
use mercer_core::kernel::{validate_kernel, write_precomputed, TOL_SYM};
use mercer_core::model::default_tol_recon;
use mercer_core::operator::trace_within_tolerance;
use mercer_core::synthesis::verify_diagonal_blocks;
use mercer_core::{
    align_frames, build_kernel, extract_frame, frame_check, reconstruction_error,
    synthesize_kernel, trace_check, AtomSpace, Error, KernelSpec, MatrixKernel, MercerModel,
    ResolvedTolerances, ScalarFrame, Tolerances, ValidationReport,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(Error::Io { path, source })
                if source.kind() == std::io::ErrorKind::NotFound =>
            {
                write!(f, "file not found: {}", path.display())
            }
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// 1 usage / I/O, 2 validation failure, 3 degenerate input.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::EmptySupport) => 3,
            CliError::Core(Error::NotHermitian { .. }) => 2,
            _ => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub atoms: Option<PathBuf>,
    pub kernel: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub subset: Option<Vec<String>>,
    pub truncations: Option<Vec<usize>>,
    pub frames: Option<Vec<PathBuf>>,
    pub originals: Option<Vec<PathBuf>>,
}

impl PipelineConfig {
    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn from_json_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let join = |p: PathBuf| if p.is_relative() { base.join(p) } else { p };
        cfg.atoms = cfg.atoms.map(join);
        cfg.kernel = cfg.kernel.map(join);
        cfg.out = cfg.out.map(join);
        cfg.frames = cfg.frames.map(|v| v.into_iter().map(join).collect());
        cfg.originals = cfg.originals.map(|v| v.into_iter().map(join).collect());
        Ok(cfg)
    }

    pub fn overridden_by(self, flags: PipelineConfig) -> PipelineConfig {
        PipelineConfig {
            atoms: flags.atoms.or(self.atoms),
            kernel: flags.kernel.or(self.kernel),
            out: flags.out.or(self.out),
            tolerances: self.tolerances.overridden_by(flags.tolerances),
            subset: flags.subset.or(self.subset),
            truncations: flags.truncations.or(self.truncations),
            frames: flags.frames.or(self.frames),
            originals: flags.originals.or(self.originals),
        }
    }

    pub fn check(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        for (name, v) in [
            ("tol-sym", t.tol_sym),
            ("tol-quotient", t.tol_quotient),
            ("rank-cutoff", t.rank_cutoff),
            ("tol-eig", t.tol_eig),
            ("tol-recon", t.tol_recon),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(usage(format!("--{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    fn atoms(&self) -> Result<AtomSpace, CliError> {
        let path = self
            .atoms
            .as_ref()
            .ok_or_else(|| usage("--atoms is required"))?;
        Ok(AtomSpace::from_csv_path(path)?)
    }

    fn kernel(&self) -> Result<Box<dyn MatrixKernel>, CliError> {
        let path = self
            .kernel
            .as_ref()
            .ok_or_else(|| usage("--kernel is required"))?;
        Ok(build_kernel(&KernelSpec::from_json_path(path)?)?)
    }

    fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(dir)
    }

    fn subset(&self, model: &MercerModel) -> Result<Vec<usize>, CliError> {
        match &self.subset {
            None => Ok(model.support.members.clone()),
            Some(ids) => ids
                .iter()
                .map(|id| model.space.index_of(id).map_err(CliError::from))
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TraceReport {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub ok: bool,
}

#[derive(Debug, Serialize)]
pub struct ErrorRow {
    pub m: usize,
    pub max_abs_error: f64,
}

#[derive(Debug, Serialize)]
pub struct FrameCheckReport {
    pub block: usize,
    pub frame_len: usize,
    pub deviation: f64,
    pub ok: bool,
}

#[derive(Debug, Serialize)]
pub struct SynthesisReport {
    pub deviation: f64,
    pub tol_recon: f64,
    pub support_is_full: bool,
    pub synthesized_kernel_valid: bool,
    pub ok: bool,
}

/// Machine-readable run summary; absent sections are omitted.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub atoms: usize,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ResolvedTolerances>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quotient_classes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_head: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<Vec<ErrorRow>>,
    /// Subset atoms outside the support, where reconstruction carries no guarantee.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub off_support_in_subset: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_checks: Option<Vec<FrameCheckReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisReport>,
    pub passed: bool,
}

const SPECTRUM_HEAD: usize = 10;

impl RunReport {
    fn new(command: &str, atoms: usize, n: usize) -> Self {
        RunReport {
            command: command.into(),
            atoms,
            n,
            validation: None,
            tolerances: None,
            support_size: None,
            quotient_classes: None,
            m_nu: None,
            rank: None,
            spectrum_head: None,
            trace: None,
            reconstruction: None,
            off_support_in_subset: None,
            frame_checks: None,
            synthesis: None,
            passed: true,
        }
    }

    fn with_model(mut self, model: &MercerModel) -> Self {
        self.tolerances = Some(model.tol);
        self.support_size = Some(model.support.len());
        self.quotient_classes = Some(model.quotient.num_classes());
        self.m_nu = Some(model.nu.m_nu);
        self.rank = Some(model.dec.rank());
        self.spectrum_head = Some(
            model
                .dec
                .sigmas()
                .iter()
                .take(SPECTRUM_HEAD)
                .copied()
                .collect(),
        );
        self
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        let _ = writeln!(s, "atoms: {}  n: {}", self.atoms, self.n);
        if let Some(v) = &self.validation {
            let _ = writeln!(
                s,
                "kernel validation: {} (hermitian deviation {:e}, min eigenvalue {:e}, tol_psd {:e})",
                pass(v.passed),
                v.max_hermitian_deviation,
                v.min_eigenvalue,
                v.tol_psd
            );
        }
        if let Some(t) = &self.tolerances {
            let _ = writeln!(
                s,
                "tolerances: tol_quotient {:e}, rank_cutoff {:e}, tol_eig {:e}, tol_recon {:e}",
                t.tol_quotient, t.rank_cutoff, t.tol_eig, t.tol_recon
            );
        }
        if let (Some(sz), Some(q)) = (self.support_size, self.quotient_classes) {
            let _ = writeln!(s, "support size: {sz}  quotient classes: {q}");
        }
        if let Some(m) = self.m_nu {
            let _ = writeln!(s, "M_nu: {m:e}");
        }
        if let (Some(r), Some(h)) = (self.rank, &self.spectrum_head) {
            let head: Vec<String> = h.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "rank: {r}  spectrum head: [{}]", head.join(", "));
        }
        if let Some(t) = &self.trace {
            let _ = writeln!(
                s,
                "trace identity: {} (sum sigma {:e}, sum tr K nu {:e}, residual {:e})",
                pass(t.ok),
                t.lhs,
                t.rhs,
                t.residual
            );
        }
        if let Some(rows) = &self.reconstruction {
            if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
                let _ = writeln!(
                    s,
                    "reconstruction error: E({}) = {:e} ... E({}) = {:e}",
                    first.m, first.max_abs_error, last.m, last.max_abs_error
                );
            }
        }
        if let Some(off) = &self.off_support_in_subset {
            if !off.is_empty() {
                let _ = writeln!(
                    s,
                    "note: subset atoms off the support (no reconstruction guarantee): {}",
                    off.join(", ")
                );
            }
        }
        if let Some(fc) = &self.frame_checks {
            for f in fc {
                let _ = writeln!(
                    s,
                    "frame block {}: {} vectors, Parseval deviation {:e} {}",
                    f.block,
                    f.frame_len,
                    f.deviation,
                    pass(f.ok)
                );
            }
        }
        if let Some(sy) = &self.synthesis {
            let _ = writeln!(
                s,
                "synthesis diagonal deviation: {:e} (tol {:e}) {}{}",
                sy.deviation,
                sy.tol_recon,
                pass(sy.ok),
                if sy.support_is_full {
                    ""
                } else {
                    " [support is not all atoms]"
                }
            );
        }
        let _ = writeln!(s, "result: {}", pass(self.passed));
        s
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self).map_err(Error::from)?;
        write_file(&dir.join("report.json"), (json + "\n").as_bytes())?;
        write_file(&dir.join("report.txt"), self.render_text().as_bytes())?;
        Ok(())
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        CliError::Core(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn all_atoms(space: &AtomSpace) -> Vec<usize> {
    (0..space.len()).collect()
}

/// Validates first so a non-PSD kernel stops with exit status 2 before any
/// spectral work.
fn validated_model(
    cfg: &PipelineConfig,
    command: &str,
) -> Result<(RunReport, Option<MercerModel>), CliError> {
    let space = cfg.atoms()?;
    let kernel = cfg.kernel()?;
    let tol_sym = cfg.tolerances.tol_sym.unwrap_or(TOL_SYM);
    let validation = validate_kernel(kernel.as_ref(), &space, &all_atoms(&space), tol_sym)?;
    let mut report = RunReport::new(command, space.len(), kernel.dim());
    report.passed = validation.passed;
    report.validation = Some(validation);
    if !report.passed {
        return Ok((report, None));
    }
    let model = MercerModel::build(space, Arc::from(kernel), &cfg.tolerances)?;
    Ok((report.with_model(&model), Some(model)))
}

pub fn cmd_validate(cfg: &PipelineConfig) -> Result<bool, CliError> {
    let space = cfg.atoms()?;
    let kernel = cfg.kernel()?;
    let out = cfg.out_dir()?;
    let tol_sym = cfg.tolerances.tol_sym.unwrap_or(TOL_SYM);
    let validation = validate_kernel(kernel.as_ref(), &space, &all_atoms(&space), tol_sym)?;
    let mut report = RunReport::new("validate", space.len(), kernel.dim());
    report.passed = validation.passed;
    report.validation = Some(validation);
    report.write(&out)?;
    Ok(report.passed)
}

#[derive(Serialize)]
struct QuotientOut<'a> {
    tol_quotient: f64,
    classes: Vec<Vec<&'a str>>,
    representatives: Vec<&'a str>,
}

pub fn cmd_metric(cfg: &PipelineConfig) -> Result<bool, CliError> {
    let out = cfg.out_dir()?;
    let space = cfg.atoms()?;
    let kernel: Arc<dyn MatrixKernel> = Arc::from(cfg.kernel()?);
    let metric = mercer_core::pseudo_metric(&space, kernel.as_ref())?;
    let mut buf = create(&out.join("metric.csv"))?;
    write_metric(&metric, &space, &mut buf)?;
    drop(buf);

    // The quotient and support need no decomposition; reuse the model only
    // for its tolerance defaults when the measure is non-degenerate.
    let tol_quotient = match cfg.tolerances.tol_quotient {
        Some(t) => t,
        None => {
            let max_diag = (0..space.len())
                .map(|x| {
                    kernel
                        .eval(space.atom(x), space.atom(x))
                        .map(|k| mercer_core::linalg::hermitian_eigenvalues(&k))
                })
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .map(|ev| ev.map(|ev| ev.iter().fold(0.0_f64, |a, v| a.max(v.abs()))))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .fold(0.0, f64::max);
            mercer_core::space::default_tol_quotient(max_diag)
        }
    };
    let q = mercer_core::quotient(&metric, tol_quotient);
    let support = mercer_core::space::support_from_quotient(&space, &q);
    let classes = q
        .classes()
        .iter()
        .map(|c| c.iter().map(|&k| space.id(k)).collect())
        .collect();
    let representatives = q.representatives.iter().map(|&k| space.id(k)).collect();
    let json = serde_json::to_string_pretty(&QuotientOut {
        tol_quotient,
        classes,
        representatives,
    })
    .map_err(Error::from)?;
    write_file(&out.join("quotient.json"), (json + "\n").as_bytes())?;
    let mut list = String::from("atom_id\n");
    for &k in &support.members {
        list.push_str(space.id(k));
        list.push('\n');
    }
    write_file(&out.join("support.csv"), list.as_bytes())?;

    let mut report = RunReport::new("metric", space.len(), kernel.dim());
    report.support_size = Some(support.len());
    report.quotient_classes = Some(q.num_classes());
    report.write(&out)?;
    Ok(true)
}

pub fn cmd_decompose(cfg: &PipelineConfig) -> Result<bool, CliError> {
    let out = cfg.out_dir()?;
    let (mut report, model) = validated_model(cfg, "decompose")?;
    let Some(model) = model else {
        report.write(&out)?;
        return Ok(false);
    };
    let mut buf = create(&out.join("spectrum.csv"))?;
    write_spectrum(&model.dec, &mut buf)?;
    drop(buf);
    let mut buf = create(&out.join("eigenfunctions.csv"))?;
    write_eigenfunctions(&model.dec, &model.space, &mut buf)?;
    drop(buf);

    let (lhs, rhs) = trace_check(&model.dec, &model.space, model.kernel.as_ref(), &model.nu)?;
    let ok = trace_within_tolerance(lhs, rhs);
    report.trace = Some(TraceReport {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        ok,
    });
    report.passed &= ok;
    report.write(&out)?;
    Ok(report.passed)
}

pub fn cmd_reconstruct(cfg: &PipelineConfig) -> Result<bool, CliError> {
    let out = cfg.out_dir()?;
    let (mut report, model) = validated_model(cfg, "reconstruct")?;
    let Some(model) = model else {
        report.write(&out)?;
        return Ok(false);
    };
    let subset = cfg.subset(&model)?;
    let truncations = cfg
        .truncations
        .clone()
        .unwrap_or_else(|| (0..=model.dec.rank()).collect());
    if let Some(&m) = truncations.iter().find(|&&m| m > model.dec.rank()) {
        return Err(usage(format!(
            "truncation {m} exceeds rank {}",
            model.dec.rank()
        )));
    }
    let table = reconstruction_error(&model, &subset, &truncations)?;
    let mut buf = create(&out.join("errors.csv"))?;
    write_error_table(&table, &mut buf)?;
    drop(buf);

    let off: Vec<String> = subset
        .iter()
        .filter(|&&x| !model.support.contains(x))
        .map(|&x| model.space.id(x).to_string())
        .collect();
    if off.is_empty() {
        if let Some(&(m, e)) = table.last() {
            if m == model.dec.rank() {
                report.passed &= e <= model.tol.tol_recon;
            }
        }
    }
    report.reconstruction = Some(
        table
            .iter()
            .map(|&(m, e)| ErrorRow {
                m,
                max_abs_error: e,
            })
            .collect(),
    );
    report.off_support_in_subset = Some(off);
    report.write(&out)?;
    Ok(report.passed)
}

pub fn cmd_frames(cfg: &PipelineConfig) -> Result<bool, CliError> {
    let out = cfg.out_dir()?;
    let (mut report, model) = validated_model(cfg, "frames")?;
    let Some(model) = model else {
        report.write(&out)?;
        return Ok(false);
    };
    let mut checks = Vec::new();
    for j in 0..model.n() {
        let frame = extract_frame(&model.dec, &model.space, j)?;
        let mut buf = create(&out.join(format!("frame_{j}.csv")))?;
        frame.write_csv(&mut buf)?;
        drop(buf);
        let deviation = frame_check(
            &frame,
            model.kernel.as_ref(),
            &model.space,
            &model.support.members,
        )?;
        let ok = deviation <= model.tol.tol_recon;
        report.passed &= ok;
        checks.push(FrameCheckReport {
            block: j,
            frame_len: frame.len(),
            deviation,
            ok,
        });
    }
    report.frame_checks = Some(checks);
    report.write(&out)?;
    Ok(report.passed)
}

pub fn cmd_synthesize(cfg: &PipelineConfig) -> Result<bool, CliError> {
    let out = cfg.out_dir()?;
    let space = cfg.atoms()?;
    let original_paths = cfg
        .originals
        .as_ref()
        .ok_or_else(|| usage("--originals is required"))?;
    let originals = original_paths
        .iter()
        .map(|p| KernelSpec::from_json_path(p).and_then(|s| build_kernel(&s)))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(j) = originals.iter().position(|k| k.dim() != 1) {
        return Err(usage(format!(
            "original kernel {} is not scalar",
            original_paths[j].display()
        )));
    }

    let frames: Vec<ScalarFrame> = match &cfg.frames {
        Some(paths) => {
            if paths.len() != originals.len() {
                return Err(usage(format!(
                    "{} frame files for {} original kernels",
                    paths.len(),
                    originals.len()
                )));
            }
            paths
                .iter()
                .enumerate()
                .map(|(j, p)| ScalarFrame::from_csv_path(p, j))
                .collect::<Result<_, _>>()?
        }
        None => original_paths
            .iter()
            .enumerate()
            .map(|(j, path)| {
                let kernel: Arc<dyn MatrixKernel> =
                    Arc::from(build_kernel(&KernelSpec::from_json_path(path)?)?);
                let model = MercerModel::build(space.clone(), kernel, &cfg.tolerances)?;
                let mut f = extract_frame(&model.dec, &model.space, 0)?;
                f.block = j;
                Ok(f)
            })
            .collect::<Result<_, Error>>()?,
    };
    let synth = synthesize_kernel(&align_frames(frames)?);
    let atoms = all_atoms(&space);
    let mut buf = create(&out.join("synth_kernel.csv"))?;
    write_precomputed(&synth, &space, &mut buf)?;
    drop(buf);

    let refs: Vec<&dyn MatrixKernel> = originals.iter().map(|k| k.as_ref()).collect();
    let deviation = verify_diagonal_blocks(&synth, &refs, &space, &atoms)?;
    let max_diag = atoms
        .iter()
        .flat_map(|&x| refs.iter().map(move |k| (x, k)))
        .map(|(x, k)| {
            k.eval(space.atom(x), space.atom(x))
                .map(|m| m[(0, 0)].norm())
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let tol_recon = cfg
        .tolerances
        .tol_recon
        .unwrap_or_else(|| default_tol_recon(max_diag));
    let validation = validate_kernel(
        &synth,
        &space,
        &atoms,
        cfg.tolerances.tol_sym.unwrap_or(TOL_SYM),
    )?;
    let ok = deviation <= tol_recon && validation.passed;

    let mut report = RunReport::new("synthesize", space.len(), synth.dim());
    report.synthesis = Some(SynthesisReport {
        deviation,
        tol_recon,
        support_is_full: space.weights().iter().all(|&w| w > 0.0),
        synthesized_kernel_valid: validation.passed,
        ok,
    });
    report.validation = Some(validation);
    report.passed = ok;
    report.write(&out)?;
    Ok(ok)
}
