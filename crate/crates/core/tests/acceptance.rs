//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use mercer_core::kernel::tol_psd;
use mercer_core::linalg::c64;
use mercer_core::operator::trace_within_tolerance;
use mercer_core::synthesis::max_abs_original;
use mercer_core::{
    adjoint_embed, align_frames, build_kernel, diagonal_error_table, embedding_norm_bound_check,
    extract_frame, frame_check, frame_check_combination, reconstruction_error, rkhs_inner,
    synthesize_kernel, trace_check, validate_kernel, verify_diagonal_blocks, AtomSpace, CMatrix,
    CVector, KernelSpec, MatrixKernel, MercerExpansion, MercerModel, RkhsElement, ScalarFrame,
    Tolerances, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), mercer_core::Error>;

struct ZooEntry {
    spec: KernelSpec,
    /// Depends on coordinates only, so coincident atoms are indistinguishable.
    coord_only: bool,
}

fn gaussian(gamma: f64) -> KernelSpec {
    KernelSpec::Gaussian { gamma }
}

fn complex_b() -> (Vec<Vec<f64>>, Option<Vec<Vec<f64>>>) {
    // eigenvalues 2 +- sqrt(2)
    (
        vec![vec![2.0, 1.0], vec![1.0, 2.0]],
        Some(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]),
    )
}

fn zoo() -> Vec<ZooEntry> {
    let (b, b_im) = complex_b();
    let separable = KernelSpec::Separable {
        b: b.clone(),
        b_im: b_im.clone(),
        scalar: Box::new(gaussian(1.0)),
    };
    vec![
        ZooEntry {
            spec: KernelSpec::Constant { c: 1.5 },
            coord_only: true,
        },
        ZooEntry {
            spec: gaussian(2.0),
            coord_only: true,
        },
        ZooEntry {
            spec: KernelSpec::Laplacian { gamma: 1.0 },
            coord_only: true,
        },
        ZooEntry {
            spec: KernelSpec::Polynomial {
                degree: 3,
                offset: 1.0,
            },
            coord_only: true,
        },
        ZooEntry {
            spec: separable.clone(),
            coord_only: true,
        },
        ZooEntry {
            spec: KernelSpec::Diagonal {
                blocks: vec![gaussian(1.0), KernelSpec::Laplacian { gamma: 0.5 }],
            },
            coord_only: true,
        },
        ZooEntry {
            spec: KernelSpec::Sum {
                terms: vec![separable, KernelSpec::Delta { n: 2 }],
            },
            coord_only: false,
        },
        ZooEntry {
            spec: KernelSpec::Delta { n: 3 },
            coord_only: false,
        },
    ]
}

fn kernel_of(spec: &KernelSpec) -> Arc<dyn MatrixKernel> {
    Arc::from(build_kernel(spec).expect("zoo kernel builds"))
}

/// Random atoms in `[-1, 1]^d`; weights in `[0.5, 1.5]`, a fraction zeroed
/// when `zero_frac > 0`.
fn random_space(rng: &mut ChaCha8Rng, n_atoms: usize, zero_frac: f64) -> AtomSpace {
    let d = rng.gen_range(1..=3);
    let ids = (0..n_atoms).map(|k| format!("a{k}")).collect();
    let coords = (0..n_atoms)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    let mut weights: Vec<f64> = (0..n_atoms).map(|_| rng.gen_range(0.5..=1.5)).collect();
    for w in weights.iter_mut().skip(1) {
        if rng.gen_bool(zero_frac) {
            *w = 0.0;
        }
    }
    AtomSpace::new(ids, coords, weights).expect("valid atom space")
}

fn random_space_in(
    rng: &mut ChaCha8Rng,
    sizes: std::ops::RangeInclusive<usize>,
    zero_frac: f64,
) -> AtomSpace {
    let n_atoms = rng.gen_range(sizes);
    random_space(rng, n_atoms, zero_frac)
}

fn model(space: AtomSpace, spec: &KernelSpec) -> Result<MercerModel, mercer_core::Error> {
    MercerModel::build(space, kernel_of(spec), &Tolerances::default())
}

fn rand_c64(rng: &mut ChaCha8Rng) -> C64 {
    c64(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))
}

fn kernel_axioms(rng: &mut ChaCha8Rng) -> Outcome {
    let mut worst_dev: f64 = 0.0;
    let mut worst_psd: f64 = f64::NEG_INFINITY;
    let mut ok = true;
    for entry in zoo() {
        let k = kernel_of(&entry.spec);
        for _ in 0..100 {
            let n_atoms = rng.gen_range(1..=50);
            let space = random_space(rng, n_atoms, 0.0);
            let all: Vec<usize> = (0..space.len()).collect();
            let r = validate_kernel(k.as_ref(), &space, &all, 1e-12)?;
            worst_dev = worst_dev.max(r.max_hermitian_deviation);
            worst_psd = worst_psd.max(-r.min_eigenvalue / tol_psd(r.max_eigenvalue));
            ok &= r.max_hermitian_deviation <= 1e-12
                && r.min_eigenvalue >= -tol_psd(r.max_eigenvalue);
        }
    }
    Ok((
        ok,
        format!("max hermitian deviation {worst_dev:.2e}, worst -min_eig/tol_psd {worst_psd:.2e}"),
    ))
}

fn trace_identity(rng: &mut ChaCha8Rng) -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for entry in zoo() {
        for _ in 0..10 {
            let n_atoms = rng.gen_range(1..=100);
            let m = model(random_space(rng, n_atoms, 0.1), &entry.spec)?;
            let (lhs, rhs) = trace_check(&m.dec, &m.space, m.kernel.as_ref(), &m.nu)?;
            worst = worst.max((lhs - rhs).abs() / rhs.max(1.0));
            ok &= trace_within_tolerance(lhs, rhs);
        }
    }
    let identity = model(
        AtomSpace::on_line(&[0.0, 1.0], &[1.0, 3.0])?,
        &KernelSpec::Delta { n: 1 },
    )?;
    let (l1, r1) = trace_check(
        &identity.dec,
        &identity.space,
        identity.kernel.as_ref(),
        &identity.nu,
    )?;
    let constant = model(
        AtomSpace::on_line(&[0.0, 1.0], &[1.0, 1.0])?,
        &KernelSpec::Constant { c: 1.0 },
    )?;
    let (l2, r2) = trace_check(
        &constant.dec,
        &constant.space,
        constant.kernel.as_ref(),
        &constant.nu,
    )?;
    let hand = (l1 - 2.0).abs() <= 1e-10 * 2.0
        && (r1 - 2.0).abs() <= 1e-10 * 2.0
        && (l2 - 1.0).abs() <= 1e-10
        && (r2 - 1.0).abs() <= 1e-10;
    Ok((
        ok && hand,
        format!("max relative residual {worst:.2e}; identity ({l1}, {r1}), constant ({l2}, {r2})"),
    ))
}

fn reconstruction(rng: &mut ChaCha8Rng) -> Outcome {
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_rise: f64 = 0.0;
    for entry in zoo() {
        for trial in 0..6 {
            let n_atoms = if trial == 0 {
                100
            } else {
                rng.gen_range(1..=100)
            };
            let m = model(random_space(rng, n_atoms, 0.1), &entry.spec)?;
            let support = m.support.members.clone();
            let rank = m.dec.rank();
            let err = reconstruction_error(&m, &support, &[rank])?[0].1;
            worst_ratio = worst_ratio.max(err / m.tol.tol_recon);
            ok &= err <= m.tol.tol_recon;
            let diag = diagonal_error_table(&m, &support);
            for w in diag.windows(2) {
                let rise = w[1] - w[0];
                worst_rise = worst_rise.max(rise / m.tol.tol_eig);
                ok &= rise <= m.tol.tol_eig;
            }
        }
    }
    Ok((
        ok,
        format!(
            "max error/tol_recon {worst_ratio:.2e}, max diagonal rise/tol_eig {worst_rise:.2e}"
        ),
    ))
}

fn support_restriction() -> Outcome {
    let space = AtomSpace::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![vec![0.0], vec![1.0], vec![2.0]],
        vec![1.0, 1.0, 0.0],
    )?;
    let m = model(space, &KernelSpec::Delta { n: 1 })?;
    let c = m.space.index_of("c")?;
    let khat = MercerExpansion::full(&m.dec).reconstruct(c, c)[(0, 0)];
    let k = m.k(c, c)[(0, 0)];
    let ok = khat == c64(0.0, 0.0) && k == c64(1.0, 0.0) && !m.support.contains(c);
    Ok((ok, format!("Khat(c,c) = {khat}, K(c,c) = {k}")))
}

/// Section form of `sqrt(sigma_i) f_i = (1 / sqrt(sigma_i)) sum_x K_x f_i(x) nu_x`.
fn canonical_section(m: &MercerModel, i: usize) -> RkhsElement {
    let f: Vec<CVector> = (0..m.space.len()).map(|x| m.dec.func_at(i, x)).collect();
    match adjoint_embed(&f, &m.nu) {
        RkhsElement::Sections(terms) => {
            let s = c64(1.0 / m.dec.sigmas()[i].sqrt(), 0.0);
            RkhsElement::Sections(terms.into_iter().map(|(x, y)| (x, y * s)).collect())
        }
        other => other,
    }
}

fn orthonormality(rng: &mut ChaCha8Rng) -> Outcome {
    let mut ok = true;
    let mut worst_k: f64 = 0.0;
    let mut worst_l2: f64 = 0.0;
    let mut worst_gram: f64 = 0.0;
    for entry in zoo() {
        for _ in 0..3 {
            let n_atoms = rng.gen_range(1..=50);
            let m = model(random_space(rng, n_atoms, 0.1), &entry.spec)?;
            let rank = m.dec.rank();
            let sections: Vec<RkhsElement> = (0..rank).map(|i| canonical_section(&m, i)).collect();
            for i in 0..rank {
                for k in i..rank {
                    let target = c64(if i == k { 1.0 } else { 0.0 }, 0.0);
                    // section form of the larger-sigma element paired with the
                    // smaller one through the reproducing property
                    let g = rkhs_inner(&sections[i], &RkhsElement::basis(k, rank), &m)?;
                    let dev = (g - target).norm();
                    worst_k = worst_k.max(dev / m.tol.tol_recon);
                    ok &= dev <= m.tol.tol_recon;
                    let gg = rkhs_inner(&sections[i], &sections[k], &m)?;
                    worst_gram = worst_gram.max((gg - target).norm() / m.tol.tol_recon);
                }
            }
            let active = m.dec.active().to_vec();
            for i in 0..rank {
                for k in i..rank {
                    let mut acc = c64(0.0, 0.0);
                    for &x in &active {
                        acc += m.dec.func_at(k, x).dotc(&m.dec.func_at(i, x)) * m.nu.weight(x);
                    }
                    let target = if i == k { 1.0 } else { 0.0 };
                    let dev = (acc - c64(target, 0.0)).norm();
                    worst_l2 = worst_l2.max(dev / m.tol.tol_eig);
                    ok &= dev <= m.tol.tol_eig;
                }
            }
        }
    }
    Ok((ok, format!(
            "max H_K dev/tol_recon {worst_k:.2e}, max L2 dev/tol_eig {worst_l2:.2e} (section-section Gram, not gated: {worst_gram:.2e})"
        ),))
}

fn parseval_frames(rng: &mut ChaCha8Rng) -> Outcome {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for entry in zoo() {
        let n_atoms = rng.gen_range(2..=60);
        let m = model(random_space(rng, n_atoms, 0.1), &entry.spec)?;
        let support = m.support.members.clone();
        for j in 0..m.n() {
            let frame = extract_frame(&m.dec, &m.space, j)?;
            let dev = frame_check(&frame, m.kernel.as_ref(), &m.space, &support)?;
            worst = worst.max(dev / m.tol.tol_recon);
            ok &= dev <= m.tol.tol_recon;
            for _ in 0..50 {
                let terms = rng.gen_range(1..=support.len().min(4));
                let atoms: Vec<usize> = (0..terms)
                    .map(|_| support[rng.gen_range(0..support.len())])
                    .collect();
                let coeffs: Vec<C64> = (0..terms).map(|_| rand_c64(rng)).collect();
                let dev =
                    frame_check_combination(&frame, m.kernel.as_ref(), &m.space, &atoms, &coeffs)?;
                worst = worst.max(dev / m.tol.tol_recon);
                ok &= dev <= m.tol.tol_recon;
            }
        }
    }
    Ok((ok, format!("max deviation/tol_recon {worst:.2e}")))
}

fn synthesis(rng: &mut ChaCha8Rng) -> Outcome {
    let scalars = [
        gaussian(2.0),
        KernelSpec::Laplacian { gamma: 1.0 },
        KernelSpec::Polynomial {
            degree: 3,
            offset: 1.0,
        },
        KernelSpec::Constant { c: 1.5 },
    ];
    let mut ok = true;

    let mut worst_round: f64 = 0.0;
    for _ in 0..5 {
        let space = random_space_in(rng, 2..=40, 0.0);
        let all: Vec<usize> = (0..space.len()).collect();
        let originals: Vec<Arc<dyn MatrixKernel>> = scalars.iter().map(kernel_of).collect();
        let mut frames = Vec::new();
        let mut tol_recon: f64 = 0.0;
        for (j, k) in originals.iter().enumerate() {
            let m = MercerModel::build(space.clone(), k.clone(), &Tolerances::default())?;
            tol_recon = tol_recon.max(m.tol.tol_recon);
            let mut f = extract_frame(&m.dec, &m.space, 0)?;
            f.block = j;
            frames.push(f);
        }
        let synth = synthesize_kernel(&align_frames(frames)?);
        let refs: Vec<&dyn MatrixKernel> = originals.iter().map(|k| k.as_ref()).collect();
        let dev = verify_diagonal_blocks(&synth, &refs, &space, &all)?;
        worst_round = worst_round.max(dev / tol_recon);
        ok &= dev <= tol_recon;
    }

    let mut worst_axiom: f64 = 0.0;
    for _ in 0..50 {
        let space = random_space_in(rng, 1..=30, 0.0);
        let n = rng.gen_range(1..=3);
        let frames: Vec<ScalarFrame> = (0..n)
            .map(|j| {
                let len = rng.gen_range(1..=8);
                let vectors = CMatrix::from_fn(space.len(), len, |_, _| rand_c64(rng));
                ScalarFrame {
                    block: j,
                    atom_ids: space.ids().to_vec(),
                    vectors,
                }
            })
            .collect();
        let synth = synthesize_kernel(&align_frames(frames)?);
        let all: Vec<usize> = (0..space.len()).collect();
        let r = validate_kernel(&synth, &space, &all, 1e-12)?;
        worst_axiom = worst_axiom.max(
            r.max_hermitian_deviation
                .max(-r.min_eigenvalue / tol_psd(r.max_eigenvalue) * 1e-12),
        );
        ok &= r.max_hermitian_deviation <= 1e-12 && r.min_eigenvalue >= -tol_psd(r.max_eigenvalue);
    }

    let space = random_space(rng, 20, 0.0);
    let all: Vec<usize> = (0..space.len()).collect();
    let k = kernel_of(&gaussian(1.0));
    let m = MercerModel::build(space.clone(), k.clone(), &Tolerances::default())?;
    let halved = extract_frame(&m.dec, &m.space, 0)?.scaled(0.5);
    let synth = synthesize_kernel(&align_frames(vec![halved])?);
    let dev = verify_diagonal_blocks(&synth, &[k.as_ref()], &space, &all)?;
    let expected = 0.75 * max_abs_original(&[k.as_ref()], &space, &all)?;
    let halved_ok = (dev - expected).abs() <= 1e-9;
    ok &= halved_ok;

    Ok((
        ok,
        format!(
            "round-trip dev/tol_recon {worst_round:.2e}, random families worst axiom residual {worst_axiom:.2e}, halved frame {dev:.12} vs {expected:.12}"
        ),
    ))
}

fn quotient_support(rng: &mut ChaCha8Rng) -> Outcome {
    let mut ok = true;
    let mut worst_spec: f64 = 0.0;
    for entry in zoo().into_iter().filter(|e| e.coord_only) {
        for _ in 0..5 {
            let base = random_space_in(rng, 2..=40, 0.2);
            let dups = rng.gen_range(1..=base.len().min(5));
            let mut ids = base.ids().to_vec();
            let mut coords: Vec<Vec<f64>> =
                (0..base.len()).map(|k| base.coords(k).to_vec()).collect();
            let mut weights = base.weights().to_vec();
            let mut pairs = Vec::new();
            for d in 0..dups {
                let src = rng.gen_range(0..base.len());
                pairs.push((src, ids.len()));
                ids.push(format!("dup{d}"));
                coords.push(base.coords(src).to_vec());
                weights.push(if rng.gen_bool(0.5) {
                    rng.gen_range(0.5..=1.5)
                } else {
                    0.0
                });
            }
            let m = model(AtomSpace::new(ids, coords, weights)?, &entry.spec)?;
            ok &= pairs
                .iter()
                .all(|&(a, b)| m.quotient.class_of[a] == m.quotient.class_of[b]);
            ok &= m.support.mass(&m.space) == m.space.total_mass();

            let merged = model(m.quotient.collapse(&m.space)?, &entry.spec)?;
            let (s1, s2) = (m.dec.sigmas(), merged.dec.sigmas());
            let tol = m.tol.tol_eig;
            for i in 0..s1.len().max(s2.len()) {
                let a = s1.get(i).copied().unwrap_or(0.0);
                let b = s2.get(i).copied().unwrap_or(0.0);
                let allowed = if i < s1.len().min(s2.len()) {
                    tol
                } else {
                    tol + m.dec.rank_cutoff().max(merged.dec.rank_cutoff())
                };
                worst_spec = worst_spec.max((a - b).abs() / tol);
                ok &= (a - b).abs() <= allowed;
            }
        }
    }
    Ok((
        ok,
        format!(
            "duplicates merged, support mass exact; max spectrum shift/tol_eig {worst_spec:.2e}"
        ),
    ))
}

fn continuity(rng: &mut ChaCha8Rng) -> Outcome {
    let mut ok = true;
    let mut worst: f64 = f64::NEG_INFINITY;
    for entry in zoo() {
        for trial in 0..3 {
            let n_atoms = if trial == 0 {
                100
            } else {
                rng.gen_range(2..=100)
            };
            let m = model(random_space(rng, n_atoms, 0.1), &entry.spec)?;
            let support = &m.support.members;
            let tol = m.tol.tol_eig;
            for i in 0..m.dec.rank() {
                let inv = 1.0 / m.dec.sigmas()[i].sqrt();
                for (a, &x) in support.iter().enumerate() {
                    for &t in &support[a + 1..] {
                        let bound = m.metric_prime.get(x, t) * inv + tol;
                        for j in 0..m.n() {
                            let diff = (m.dec.value(i, x, j) - m.dec.value(i, t, j)).norm();
                            worst = worst.max(diff - bound);
                            ok &= diff <= bound;
                        }
                    }
                }
            }
        }
    }
    Ok((ok, format!("max (|f(x) - f(t)| - bound) {worst:.2e}")))
}

fn embedding_bound(rng: &mut ChaCha8Rng) -> Outcome {
    let mut ok = true;
    let mut worst: f64 = f64::NEG_INFINITY;
    for entry in zoo() {
        let m = model(random_space_in(rng, 1..=60, 0.1), &entry.spec)?;
        for _ in 0..50 {
            let len = rng.gen_range(1..=m.dec.rank());
            let coeffs: Vec<C64> = (0..len).map(|_| rand_c64(rng)).collect();
            let (l2, bound) = embedding_norm_bound_check(&coeffs, &m.dec, &m.nu)?;
            worst = worst.max(l2 - bound);
            ok &= l2 <= bound + m.tol.tol_eig;
        }
    }
    Ok((ok, format!("max (|i_K h|^2 - M_nu |h|^2) {worst:.2e}")))
}

fn read_dir_sorted(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        files.push((
            entry.file_name().to_string_lossy().into_owned(),
            std::fs::read(entry.path())?,
        ));
    }
    files.sort();
    Ok(files)
}

fn cli_determinism() -> Result<(bool, String), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut atoms = String::from("id,w,x,y\n");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..40 {
        let w = if k % 7 == 3 {
            0.0
        } else {
            rng.gen_range(0.5..=1.5)
        };
        atoms.push_str(&format!(
            "p{k},{w},{},{}\n",
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0)
        ));
    }
    std::fs::write(dir.path().join("atoms.csv"), atoms)?;
    let (b, b_im) = complex_b();
    let spec = KernelSpec::Sum {
        terms: vec![
            KernelSpec::Separable {
                b,
                b_im,
                scalar: Box::new(gaussian(1.5)),
            },
            KernelSpec::Delta { n: 2 },
        ],
    };
    std::fs::write(
        dir.path().join("kernel.json"),
        serde_json::to_string(&spec)?,
    )?;

    let mut outputs = Vec::new();
    for run in ["run1", "run2"] {
        let status = Command::new(env!("CARGO_BIN_EXE_mercer"))
            .arg("decompose")
            .arg("--atoms")
            .arg(dir.path().join("atoms.csv"))
            .arg("--kernel")
            .arg(dir.path().join("kernel.json"))
            .arg("--out")
            .arg(dir.path().join(run))
            .status()?;
        if !status.success() {
            return Ok((false, format!("decompose exited with {status}")));
        }
        outputs.push(read_dir_sorted(&dir.path().join(run))?);
    }
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    Ok((
        outputs[0] == outputs[1] && !names.is_empty(),
        format!("compared {}", names.join(", ")),
    ))
}

fn main() -> ExitCode {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut all_ok = true;
    let mut report = |label: &str, start: Instant, outcome: Result<(bool, String), String>| {
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        all_ok &= ok;
        println!(
            "[{}] {label}: {detail} ({secs:.1}s)",
            if ok { "PASS" } else { "FAIL" }
        );
    };
    let s = |o: Outcome| o.map_err(|e| e.to_string());

    let t = Instant::now();
    report("1 kernel axioms", t, s(kernel_axioms(&mut rng)));
    let t = Instant::now();
    report("2 trace identity", t, s(trace_identity(&mut rng)));
    let t = Instant::now();
    report("3 Mercer reconstruction", t, s(reconstruction(&mut rng)));
    let t = Instant::now();
    report("4 support restriction", t, s(support_restriction()));
    let t = Instant::now();
    report("5 orthonormality", t, s(orthonormality(&mut rng)));
    let t = Instant::now();
    report("6 Parseval frames", t, s(parseval_frames(&mut rng)));
    let t = Instant::now();
    report("7 synthesis", t, s(synthesis(&mut rng)));
    let t = Instant::now();
    report("8 quotient and support", t, s(quotient_support(&mut rng)));
    let t = Instant::now();
    report("9 quantitative continuity", t, s(continuity(&mut rng)));
    let t = Instant::now();
    report("10 embedding bound", t, s(embedding_bound(&mut rng)));
    let t = Instant::now();
    report(
        "11 CLI determinism",
        t,
        cli_determinism().map_err(|e| e.to_string()),
    );

    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
