//! Builds models and operator paths from a configuration and runs the
//! requested tasks.

use std::sync::Arc;
use std::time::Instant;

use monoflow::clifford::signed_permutations;
use monoflow::flow::harness::{random_pair, standard_flow_operator};
use monoflow::flow::{
    sf_with_trajectories, unitary_realpart_path, DenseBlockPath, DenseHermitianPath, EigenPath, FlowMode, FlowResult,
    Labeler, OperatorFn, PencilBlock, SpectralPath, WindowHermitianPath, WindowPencilPath,
};
use monoflow::index::{
    chern_oracle_even, index_compression, kernel_count, spectral_projection_below, winding_oracle_odd, IndexOptions,
    IndexResult, Projector,
};
use monoflow::lattice::{dirac_operator, dirac_phase, hardy_projection, LatticeBox, LatticeOperator};
use monoflow::linalg::krylov::KrylovOptions;
use monoflow::linalg::{dagger, eye, inverse, C64};
use monoflow::models::{chirind_block, HoppingTerm, LatticeModel, ModelSpec, SshChain};
use monoflow::monopole::{covariance_check, envelope_constant, GaugeField};
use monoflow::Result;

use crate::config::{ExperimentConfig, ExperimentKind, PathKind, Task};
use crate::report::{FlowEntry, IndexEntry, InvariantEntry, Report, Verdict};

/// Paths up to this dimension use full dense eigendecompositions.
const DENSE_LIMIT: usize = 600;

/// Outer-shell depth of the bulk/boundary labelling.
const SHELL: usize = 2;

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rep = Report::new(cfg);
    match cfg.model.kind {
        ExperimentKind::Ssh => run_ssh(cfg, &mut rep)?,
        ExperimentKind::Chirind => run_chirind(cfg, &mut rep)?,
        ExperimentKind::Harness => run_harness(cfg, &mut rep)?,
        ExperimentKind::EvenDirac | ExperimentKind::CustomPolynomial => run_even(cfg, &mut rep)?,
        ExperimentKind::OddChiral => run_odd(cfg, &mut rep)?,
    }
    rep.wall_time_s = start.elapsed().as_secs_f64();
    Ok(rep)
}

fn wants(cfg: &ExperimentConfig, t: Task) -> bool {
    cfg.tasks.contains(&t)
}

fn shell_labeler(lat: &LatticeBox) -> Labeler {
    let lat = lat.clone();
    Arc::new(move |x: &[C64]| lat.shell_weight(x, SHELL))
}

fn flow(rep: &mut Report, label: &str, path: &dyn SpectralPath, cfg: &ExperimentConfig, keep: bool) {
    let t = Instant::now();
    let r = sf_with_trajectories(path, &cfg.flow_options());
    let seconds = t.elapsed().as_secs_f64();
    match r {
        Ok((res, traj)) => {
            rep.flows.push(FlowEntry { label: label.into(), result: Some(res), error: None, seconds });
            if keep {
                rep.trajectories.push((label.into(), traj));
            }
        }
        Err(e) => rep.flows.push(FlowEntry { label: label.into(), result: None, error: Some(e.to_string()), seconds }),
    }
}

fn index_entry(label: &str, f: impl FnOnce() -> Result<IndexResult>) -> IndexEntry {
    let t = Instant::now();
    let r = f();
    let seconds = t.elapsed().as_secs_f64();
    match r {
        Ok(res) => IndexEntry { label: label.into(), result: Some(res), error: None, seconds },
        Err(e) => IndexEntry { label: label.into(), result: None, error: Some(e.to_string()), seconds },
    }
}

fn krylov(cfg: &ExperimentConfig) -> KrylovOptions {
    KrylovOptions {
        nev: cfg.solver.nev,
        block: cfg.solver.block,
        tol: cfg.solver.tol,
        seed: 0x5eed ^ cfg.seed,
        ..Default::default()
    }
}

/// An index must be stable to count as a value for the verdicts.
fn stable_value(e: Option<&IndexEntry>) -> Option<i64> {
    e.and_then(|e| e.result.as_ref()).filter(|r| r.stable).map(|r| r.value)
}

fn index_verdicts(rep: &mut Report, sf_label: &str, factor: i64) {
    let sf = rep.flow(sf_label).and_then(|f| f.net());
    let ind = stable_value(rep.index("fedosov"));
    let oracle = rep.oracles.first().and_then(|o| stable_value(Some(o)));
    let line = if factor == 1 { "SF == Ind" } else { "SF == 2·Ind" };
    if rep.flow(sf_label).is_some() && rep.index("fedosov").is_some() {
        let v = Verdict::compare(line, sf, ind.map(|i| factor * i), format!("flow {sf_label}, index fedosov"));
        rep.verdicts.push(v);
    }
    if rep.index("fedosov").is_some() && !rep.oracles.is_empty() {
        let label = rep.oracles[0].label.clone();
        rep.verdicts.push(Verdict::compare("Ind == oracle", ind, oracle, format!("oracle {label}")));
    }
}

fn run_ssh(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let chain = SshChain::new(cfg.lattice.radius, cfg.model.ssh_boundary)?;
    if cfg.model.mass != 0.0 {
        rep.warnings.push("the SSH chain has no mass term; model.mass is ignored".into());
    }
    if wants(cfg, Task::SpectralFlow) {
        let f = chain.fermi_phase().to_dense();
        let s0 = chain.shift(0.0).to_dense();
        let ch = chain.clone();
        let w = Arc::new(move |a: f64| Ok(f.dot(&ch.shift(a).to_dense()).dot(&dagger(&s0))));
        let path = unitary_realpart_path(w, Some(shell_labeler(&chain.lattice)));
        flow(rep, "sf_unitary", &path, cfg, true);
    }
    if wants(cfg, Task::Index) {
        let pi = Projector::Lattice(hardy_projection(&chain.fermi_phase()));
        let s0 = chain.shift(0.0);
        rep.indices.push(index_entry("fedosov", || index_compression(&pi, &s0, &cfg.index)));
        rep.indices.push(index_entry("kernel_count", || kernel_count(&pi, &s0, &cfg.index)));
    }
    if wants(cfg, Task::Oracle) {
        rep.oracles.push(index_entry("winding", || winding_oracle_odd(&ModelSpec::ssh(0.0), &cfg.oracle)));
    }
    index_verdicts(rep, "sf_unitary", 1);
    if let (Some(a), Some(b)) = (rep.index("fedosov"), rep.index("kernel_count")) {
        let v = Verdict::compare("Ind == kernel count", stable_value(Some(a)), b.value(), "fedosov vs kernel_count");
        rep.verdicts.push(v);
    }
    if wants(cfg, Task::InvariantSuite) {
        rep.warnings.push("the invariant suite applies to monopole lattice models".into());
    }
    Ok(())
}

fn run_chirind(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let chain = SshChain::new(cfg.lattice.radius, cfg.model.ssh_boundary)?;
    let variant = cfg.model.chirind_variant;
    let a0 = chirind_block(&chain, 0.0, variant);
    if wants(cfg, Task::SpectralFlow) {
        let f = chain.fermi_phase().to_dense();
        let a0d = a0.to_dense();
        let a0_inv = inverse(&a0d)?;
        let a0s_inv = inverse(&dagger(&a0d))?;
        let ch = chain.clone();
        let blocks = Arc::new(move |a: f64| {
            let aa = chirind_block(&ch, a, variant).to_dense();
            Ok(vec![f.dot(&aa).dot(&a0_inv), f.dot(&dagger(&aa)).dot(&a0s_inv).mapv(|z| -z)])
        });
        let lab = shell_labeler(&chain.lattice);
        let path = DenseBlockPath { blocks, labelers: vec![Some(lab.clone()), Some(lab)] };
        flow(rep, "sf_chiral", &path, cfg, true);
    }
    if wants(cfg, Task::Index) {
        let pi = Projector::Lattice(hardy_projection(&chain.fermi_phase()));
        rep.indices.push(index_entry("fedosov", || index_compression(&pi, &a0, &cfg.index)));
    }
    if wants(cfg, Task::Oracle) {
        rep.oracles.push(index_entry("winding", || winding_oracle_odd(&ModelSpec::ssh(0.0), &cfg.oracle)));
    }
    index_verdicts(rep, "sf_chiral", 2);
    Ok(())
}

fn run_harness(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let n = cfg.harness.samples;
    let mut agree = 0i64;
    let mut gross = 0usize;
    for s in 0..n {
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(s as u64);
        let (u0, f) = random_pair(seed, cfg.harness.max_dim);
        let label = format!("sample_{s:03}_dim{}", u0.nrows());
        let (uu, ff) = (u0.clone(), f.clone());
        let path = unitary_realpart_path(Arc::new(move |a: f64| Ok(standard_flow_operator(&uu, &ff, a))), None);
        flow(rep, &label, &path, cfg, false);
        let dim = u0.nrows();
        let lat = LatticeBox::new(1, 1, vec![0.5], dim / 2)?;
        let u = LatticeOperator::from_dense(&lat, &u0);
        let pi = Projector::Dense((&f + &eye(dim)).mapv(|z| z * 0.5));
        // no outer shell: every kernel vector counts
        let opts = IndexOptions { boundary_depth: 0, ..cfg.index.clone() };
        rep.indices.push(index_entry(&label, || kernel_count(&pi, &u, &opts)));
        let sf = rep.flow(&label).and_then(|e| e.net());
        let ind = rep.index(&label).and_then(|e| e.value());
        if sf.is_some() && sf == ind {
            agree += 1;
        }
        gross += rep.flow(&label).and_then(|e| e.result.as_ref()).map(|r| r.diagnostics.gross_crossings).unwrap_or(0);
    }
    rep.verdicts.push(Verdict::compare(
        "SF == Ind",
        Some(agree),
        Some(n as i64),
        format!("{agree}/{n} samples agree, {gross} gross crossings cancelled"),
    ));
    Ok(())
}

fn build_spec(cfg: &ExperimentConfig) -> Result<ModelSpec> {
    let d = cfg.dimension();
    let mut spec = match cfg.model.kind {
        ExperimentKind::EvenDirac => ModelSpec::even_dirac(d, cfg.model.mass)?,
        ExperimentKind::OddChiral => ModelSpec::odd_chiral(d, cfg.model.mass)?,
        ExperimentKind::CustomPolynomial => {
            let w = cfg.model.potential.as_ref().expect("validated").to_array()?;
            let hopping = cfg
                .model
                .hopping
                .iter()
                .map(|t| Ok(HoppingTerm { monomial: t.monomial.clone(), coeff: t.coeff.to_array()? }))
                .collect::<Result<Vec<_>>>()?;
            ModelSpec::custom(d, hopping, w, cfg.model.fermi_level)?
        }
        _ => unreachable!("chains are handled separately"),
    };
    spec.fermi_level = cfg.model.fermi_level;
    Ok(spec)
}

fn run_even(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let spec = build_spec(cfg)?;
    rep.warnings.extend(spec.warnings());
    let model = Arc::new(LatticeModel::new(&spec, cfg.lattice.radius, &cfg.ode)?);
    let mu = spec.fermi_level;
    let half = cfg.model.path == PathKind::Half;
    let m = model.clone();
    let op: OperatorFn = if half {
        Arc::new(move |a| m.half_hamiltonian(a))
    } else {
        Arc::new(move |a| m.hamiltonian(a))
    };
    let label = if half { "sf_half" } else { "sf_full" };
    if wants(cfg, Task::SpectralFlow) {
        let h0 = op(0.0)?;
        let lab = shell_labeler(&h0.lattice);
        if cfg.solver.dense || h0.dim() <= DENSE_LIMIT {
            let o = op.clone();
            let path = DenseHermitianPath {
                op: Arc::new(move |a| Ok(o(a)?.to_dense())),
                level: mu,
                labeler: Some(lab),
                mode: FlowMode::SelfadjointThroughMu,
            };
            flow(rep, label, &path, cfg, true);
        } else {
            let path = WindowHermitianPath { op: op.clone(), level: mu, labeler: Some(lab), krylov: krylov(cfg) };
            flow(rep, label, &path, cfg, true);
        }
    }
    if wants(cfg, Task::Index) {
        if half {
            let h0 = op(0.0)?;
            let v = model.phase_block()?;
            let e = index_entry("fedosov", || index_compression(&spectral_projection_below(&h0, mu)?, &v, &cfg.index));
            rep.indices.push(e);
        } else {
            rep.warnings.push("the index task applies to the half path".into());
        }
    }
    if wants(cfg, Task::Oracle) {
        if spec.kind == monoflow::models::ModelKind::EvenDirac {
            rep.oracles.push(index_entry("chern", || chern_oracle_even(&spec, &cfg.oracle)));
        } else {
            rep.warnings.push("no momentum-space oracle for custom models".into());
        }
    }
    if half {
        index_verdicts(rep, label, 1);
    } else if let Some(f) = rep.flow(label) {
        let all = f.result.as_ref().map(|r| r.net_flow_all);
        let v1 = Verdict::compare("SF == 0", f.net(), Some(0), "bulk tracks of the full path");
        let v2 = Verdict::compare("SF_all == 0", all, Some(0), "all tracks of the full path");
        rep.verdicts.push(v1);
        rep.verdicts.push(v2);
    }
    if wants(cfg, Task::InvariantSuite) {
        invariant_suite(&model, cfg, rep)?;
    }
    Ok(())
}

fn run_odd(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let spec = build_spec(cfg)?;
    rep.warnings.extend(spec.warnings());
    let model = Arc::new(LatticeModel::new(&spec, cfg.lattice.radius, &cfg.ode)?);
    let a0 = Arc::new(model.chiral_block(0.0)?);
    let f = Arc::new(model.dirac_phase()?);
    if wants(cfg, Task::Index) {
        let pi = Projector::Lattice(hardy_projection(&f));
        rep.indices.push(index_entry("fedosov", || index_compression(&pi, &a0, &cfg.index)));
    }
    if wants(cfg, Task::SpectralFlow) {
        let lab = shell_labeler(&a0.lattice);
        let labelers = vec![Some(lab.clone()), Some(lab)];
        let m = model.clone();
        if cfg.solver.dense || a0.dim() <= DENSE_LIMIT {
            let fd = f.to_dense();
            let a0d = a0.to_dense();
            let a0_inv = inverse(&a0d)?;
            let a0s_inv = inverse(&dagger(&a0d))?;
            let blocks = Arc::new(move |a: f64| {
                let aa = m.chiral_block(a)?.to_dense();
                Ok(vec![fd.dot(&aa).dot(&a0_inv), fd.dot(&dagger(&aa)).dot(&a0s_inv).mapv(|z| -z)])
            });
            flow(rep, "sf_chiral", &DenseBlockPath { blocks, labelers }, cfg, true);
        } else {
            let a0s = Arc::new(a0.adjoint());
            let (ff, aa0) = (f.clone(), a0.clone());
            let blocks = Arc::new(move |a: f64| {
                let aa = m.chiral_block(a)?;
                Ok(vec![
                    PencilBlock { lhs: ff.mul(&aa), rhs: aa0.clone() },
                    PencilBlock { lhs: ff.mul(&aa.adjoint()).scale(C64::new(-1.0, 0.0)), rhs: a0s.clone() },
                ])
            });
            let path = WindowPencilPath { blocks, labelers, krylov: krylov(cfg) };
            flow(rep, "sf_chiral", &path, cfg, true);
        }
    }
    if wants(cfg, Task::Oracle) {
        rep.oracles.push(index_entry("winding", || winding_oracle_odd(&spec, &cfg.oracle)));
    }
    index_verdicts(rep, "sf_chiral", 2);
    if wants(cfg, Task::InvariantSuite) {
        invariant_suite(&model, cfg, rep)?;
    }
    Ok(())
}

fn check(rep: &mut Report, name: String, value: f64, tol: f64) {
    rep.invariants.push(InvariantEntry { name, value, tol, pass: value <= tol });
}

/// Conjugation, grading, covariance and decay identities of the monopole
/// shifts, plus the model-level conjugation identity.
fn invariant_suite(model: &LatticeModel, cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let inv = &cfg.invariants;
    let lat = &model.lattice;
    let d = lat.d;
    let f = dirac_phase(&dirac_operator(lat, &model.rep)?)?;
    let grading = model.rep.grading.as_ref().map(|g| LatticeOperator::sitewise(lat, |_| g.clone()));
    for &a in &inv.alphas {
        let sa = model.shifts(a, false)?;
        let sb = model.shifts(1.0 - a, false)?;
        let conj = (0..d).map(|k| f.mul(&sa[k]).mul(&f).max_diff(&sb[k], inv.interior_shell)).fold(0.0, f64::max);
        check(rep, format!("F S^a F = S^(1-a), a = {a}"), conj, inv.conjugation_tol);
        if let Some(g) = &grading {
            let dev = (0..d).map(|k| g.mul(&sa[k]).mul(g).max_diff(&sa[k], 0)).fold(0.0, f64::max);
            check(rep, format!("Gamma S^a Gamma = S^a, a = {a}"), dev, 0.0);
        }
        let fm = model.dirac_phase()?;
        if model.spec.is_chiral() {
            let h = model.hamiltonian(a)?;
            let j = model.chiral_grading();
            let dev = j.mul(&h).mul(&j).max_diff(&h.scale(C64::new(-1.0, 0.0)), 0);
            check(rep, format!("J H J = -H, a = {a}"), dev, 1e-12);
            let fc = model.chiral_dirac_phase()?;
            let dev = fc.mul(&h).mul(&fc).max_diff(&model.hamiltonian(1.0 - a)?, inv.interior_shell);
            check(rep, format!("F H_a F = H_(1-a), a = {a}"), dev, inv.conjugation_tol);
        } else {
            let h = model.hamiltonian(a)?;
            let dev = fm.mul(&h).mul(&fm).max_diff(&model.hamiltonian(1.0 - a)?, inv.interior_shell);
            check(rep, format!("F H_a F = H_(1-a), a = {a}"), dev, inv.conjugation_tol);
        }
    }
    let alpha = inv.alphas.first().copied().unwrap_or(0.5);
    let field = GaugeField::new(&model.rep, alpha);
    let cache = model.phases(alpha)?;
    let mut worst: f64 = 0.0;
    for o in signed_permutations(d) {
        worst = worst.max(covariance_check(&cache, &field, &o)?);
    }
    check(rep, format!("covariance under {} signed permutations, a = {alpha}", signed_permutations(d).len()), worst, inv.covariance_tol);
    let rho = lat.radius as f64;
    let fitted = envelope_constant(&cache, 0.0, 0.5 * rho)?;
    let outer = envelope_constant(&cache, 0.5 * rho, f64::INFINITY)?;
    check(rep, format!("R |M - 1| on R > rho/2 within C' = {fitted:.6} fitted on R <= rho/2"), outer, fitted);
    Ok(())
}

/// Flow result of a report by label, for callers that need the full record.
pub fn flow_result<'a>(rep: &'a Report, label: &str) -> Option<&'a FlowResult> {
    rep.flow(label).and_then(|f| f.result.as_ref())
}

/// Trajectories of a flow by label.
pub fn trajectory<'a>(rep: &'a Report, label: &str) -> Option<&'a EigenPath> {
    rep.trajectories.iter().find(|(l, _)| l == label).map(|(_, p)| p)
}
