//! Hamiltonian families H = Delta(S_1, ..., S_d) + W with the monopole
//! inserted into the shifts.

use std::f64::consts::PI;
use std::path::PathBuf;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::clifford::{build_clifford, CliffordRep};
use crate::error::{Error, Result};
use crate::lattice::{dirac_operator, dirac_phase, grading_bases, split_f, LatticeBox, LatticeOperator, OpFlags};
use crate::linalg::{c, dagger, eye, kron, C64, ONE, ZERO};
use crate::monopole::{monopole_shift, GaugeField, OdeOptions, PhaseCache};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    EvenDirac,
    OddChiral,
    Ssh,
    CustomPolynomial,
}

/// coeff times S_1^{n_1} ... S_d^{n_d}; negative powers are adjoints.
#[derive(Clone, Debug, PartialEq)]
pub struct HoppingTerm {
    pub monomial: Vec<i32>,
    pub coeff: Array2<C64>,
}

#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub d: usize,
    pub mass: f64,
    pub fermi_level: f64,
    /// For odd_chiral these are the terms of the off-diagonal block A.
    pub hopping: Vec<HoppingTerm>,
    /// Constant on-site selfadjoint matrix W on the inner fiber.
    pub potential: Array2<C64>,
}

fn critical_masses(d: usize) -> Vec<f64> {
    (0..=d).map(|j| -(d as f64) + 2.0 * j as f64).collect()
}

impl ModelSpec {
    /// h = sum_j [ (S_j - S_j^*)/(2i) nu_j + (S_j + S_j^*)/2 nu_0 ] + m nu_0.
    pub fn even_dirac(d: usize, mass: f64) -> Result<Self> {
        if d % 2 != 0 {
            return Err(Error::Model(format!("even_dirac needs even d, got {d}")));
        }
        let nu = build_clifford(d)?;
        let nu0 = nu.grading.clone().expect("even");
        let mut hopping = Vec::new();
        for j in 0..d {
            let mut e = vec![0; d];
            e[j] = 1;
            let fwd = nu.gammas[j].mapv(|z| z * c(0.0, -0.5)) + nu0.mapv(|z| z * 0.5);
            let bwd = nu.gammas[j].mapv(|z| z * c(0.0, 0.5)) + nu0.mapv(|z| z * 0.5);
            hopping.push(HoppingTerm { monomial: e.clone(), coeff: fwd });
            hopping.push(HoppingTerm { monomial: e.iter().map(|x| -x).collect(), coeff: bwd });
        }
        hopping.push(HoppingTerm { monomial: vec![0; d], coeff: nu0.mapv(|z| z * mass) });
        let n = nu0.nrows();
        Ok(ModelSpec { kind: ModelKind::EvenDirac, d, mass, fermi_level: 0.0, hopping, potential: Array2::zeros((n, n)) })
    }

    /// A = (m + sum_j (S_j + S_j^*)/2) + sum_j (S_j - S_j^*)/2 nu_j, so that
    /// A(k) = m + sum cos k_j + i sum sin k_j nu_j.
    pub fn odd_chiral(d: usize, mass: f64) -> Result<Self> {
        if d % 2 != 1 {
            return Err(Error::Model(format!("odd_chiral needs odd d, got {d}")));
        }
        let nu = build_clifford(d)?;
        let n = nu.fiber_dim;
        let id = eye(n);
        let mut hopping = Vec::new();
        for j in 0..d {
            let mut e = vec![0; d];
            e[j] = 1;
            hopping.push(HoppingTerm { monomial: e.clone(), coeff: (&id + &nu.gammas[j]).mapv(|z| z * 0.5) });
            hopping.push(HoppingTerm {
                monomial: e.iter().map(|x| -x).collect(),
                coeff: (&id - &nu.gammas[j]).mapv(|z| z * 0.5),
            });
        }
        hopping.push(HoppingTerm { monomial: vec![0; d], coeff: id.mapv(|z| z * mass) });
        Ok(ModelSpec { kind: ModelKind::OddChiral, d, mass, fermi_level: 0.0, hopping, potential: Array2::zeros((n, n)) })
    }

    /// One-dimensional chiral model A = S (+ m).
    pub fn ssh(mass: f64) -> Self {
        let mut s = Self::odd_chiral(1, mass).expect("d = 1 is odd");
        s.kind = ModelKind::Ssh;
        s
    }

    pub fn custom(d: usize, hopping: Vec<HoppingTerm>, potential: Array2<C64>, fermi_level: f64) -> Result<Self> {
        let n = potential.nrows();
        if hopping.iter().any(|t| t.coeff.dim() != (n, n) || t.monomial.len() != d) {
            return Err(Error::Model("hopping coefficients or monomials have inconsistent sizes".into()));
        }
        if !crate::linalg::is_hermitian(&potential, 1e-12) {
            return Err(Error::Model("potential W must be selfadjoint".into()));
        }
        let spec = ModelSpec { kind: ModelKind::CustomPolynomial, d, mass: 0.0, fermi_level, hopping, potential };
        // Delta(v) selfadjoint: the term list must be closed under adjoints
        let k: Vec<f64> = (0..d).map(|j| 0.37 + 0.71 * j as f64).collect();
        if !crate::linalg::is_hermitian(&spec.symbol(&k), 1e-10) {
            return Err(Error::Model("hopping polynomial is not selfadjoint".into()));
        }
        Ok(spec)
    }

    pub fn inner_dim(&self) -> usize {
        self.potential.nrows()
    }

    pub fn is_chiral(&self) -> bool {
        matches!(self.kind, ModelKind::OddChiral | ModelKind::Ssh)
    }

    /// Momentum-space symbol: sum coeff e^{i n.k} + W (for chiral kinds the
    /// symbol of A).
    pub fn symbol(&self, k: &[f64]) -> Array2<C64> {
        let mut out = self.potential.clone();
        for t in &self.hopping {
            let phase: f64 = t.monomial.iter().zip(k).map(|(&n, &kk)| n as f64 * kk).sum();
            out.scaled_add(c(0.0, phase).exp(), &t.coeff);
        }
        out
    }

    /// Derivative of the symbol with respect to k_j.
    pub fn symbol_derivative(&self, k: &[f64], j: usize) -> Array2<C64> {
        let n = self.inner_dim();
        let mut out = Array2::zeros((n, n));
        for t in &self.hopping {
            if t.monomial[j] == 0 {
                continue;
            }
            let phase: f64 = t.monomial.iter().zip(k).map(|(&m, &kk)| m as f64 * kk).sum();
            out.scaled_add(c(0.0, t.monomial[j] as f64) * c(0.0, phase).exp(), &t.coeff);
        }
        out
    }

    /// Warnings for masses at (or within 1e-6 of) gap-closing values.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if matches!(self.kind, ModelKind::EvenDirac | ModelKind::OddChiral | ModelKind::Ssh) {
            for mc in critical_masses(self.d) {
                if (self.mass - mc).abs() < 1e-6 {
                    out.push(format!("mass {} is at the gap-closing value {mc}", self.mass));
                }
            }
        }
        out
    }
}

/// A model realized on a finite centered box, with the monopole inserted.
#[derive(Clone, Debug)]
pub struct LatticeModel {
    pub spec: ModelSpec,
    pub rep: CliffordRep,
    /// Box with fiber equal to the Clifford fiber.
    pub lattice: LatticeBox,
    pub ode: OdeOptions,
    pub cache_dir: Option<PathBuf>,
}

impl LatticeModel {
    pub fn new(spec: &ModelSpec, radius: usize, ode: &OdeOptions) -> Result<Self> {
        if spec.kind == ModelKind::Ssh {
            return Err(Error::Model("the SSH chain is built with SshChain".into()));
        }
        let rep = build_clifford(spec.d)?;
        let lattice = LatticeBox::centered(spec.d, radius, rep.fiber_dim)?;
        Ok(LatticeModel { spec: spec.clone(), rep, lattice, ode: ode.clone(), cache_dir: None })
    }

    pub fn with_cache_dir(mut self, dir: Option<PathBuf>) -> Self {
        self.cache_dir = dir;
        self
    }

    pub fn phases(&self, alpha: f64) -> Result<PhaseCache> {
        let field = GaugeField::new(&self.rep, alpha);
        match &self.cache_dir {
            Some(dir) => PhaseCache::build_cached(&field, &self.lattice, &self.ode, dir),
            None => PhaseCache::build(&field, &self.lattice, &self.ode),
        }
    }

    /// Monopole shifts per axis on the Clifford fiber; with `half`, restricted
    /// to the +1 eigenspace of the grading (even d).
    pub fn shifts(&self, alpha: f64, half: bool) -> Result<Vec<LatticeOperator>> {
        let cache = self.phases(alpha)?;
        let mut out = Vec::with_capacity(self.spec.d);
        for k in 0..self.spec.d {
            let s = monopole_shift(&cache, k, 1)?;
            if half {
                let g = self.rep.grading.as_ref().ok_or_else(|| Error::Model("half block needs even d".into()))?;
                let (bp, _) = grading_bases(g)?;
                out.push(s.map_blocks(&dagger(&bp), &bp));
            } else {
                out.push(s);
            }
        }
        Ok(out)
    }

    fn monomial(&self, shifts: &[LatticeOperator], n: &[i32]) -> LatticeOperator {
        let mut op = LatticeOperator::identity(&shifts[0].lattice);
        for (k, &p) in n.iter().enumerate() {
            let base = if p >= 0 { shifts[k].clone() } else { shifts[k].adjoint() };
            for _ in 0..p.unsigned_abs() {
                op = op.mul(&base);
            }
        }
        op
    }

    /// sum_n coeff kron S^(n) + W kron 1 on inner x (Clifford part of `shifts`).
    pub fn assemble(&self, shifts: &[LatticeOperator]) -> LatticeOperator {
        let cf = shifts[0].fiber();
        let base = shifts[0].lattice.clone();
        let mut out = LatticeOperator::zeros(&base.with_fiber(self.spec.inner_dim() * cf));
        for t in &self.spec.hopping {
            out = out.add(&self.monomial(shifts, &t.monomial).kron_left(&t.coeff));
        }
        if self.spec.potential.iter().any(|z| *z != ZERO) {
            out = out.add(&LatticeOperator::identity(&base).kron_left(&self.spec.potential));
        }
        out
    }

    /// Even kinds: the half block h_alpha on inner x (grading +1 part).
    pub fn half_hamiltonian(&self, alpha: f64) -> Result<LatticeOperator> {
        if self.spec.is_chiral() || self.spec.d % 2 == 1 {
            return Err(Error::Model("half block exists for even-dimensional selfadjoint models".into()));
        }
        let h = self.assemble(&self.shifts(alpha, true)?);
        Ok(h.with_flags(OpFlags { hermitian: true, unitary: false }))
    }

    /// Odd chiral kinds: the off-diagonal block A_alpha on inner x Clifford.
    pub fn chiral_block(&self, alpha: f64) -> Result<LatticeOperator> {
        if !self.spec.is_chiral() {
            return Err(Error::Model("chiral block needs a chiral model".into()));
        }
        Ok(self.assemble(&self.shifts(alpha, false)?))
    }

    /// Full Hamiltonian. Even kinds: Delta(S^alpha) + W on inner x Clifford.
    /// Chiral kinds: [[0, A], [A^*, 0]] on chiral x inner x Clifford.
    pub fn hamiltonian(&self, alpha: f64) -> Result<LatticeOperator> {
        let flags = OpFlags { hermitian: true, unitary: false };
        if self.spec.is_chiral() {
            let a = self.chiral_block(alpha)?;
            return Ok(chiral_hamiltonian(&a).with_flags(flags));
        }
        let h = self.assemble(&self.shifts(alpha, false)?);
        Ok(h.with_flags(flags))
    }

    /// F on inner x Clifford (F(x) = gamma_x / |x| on the Clifford factor).
    pub fn dirac_phase(&self) -> Result<LatticeOperator> {
        let lat = self.lattice.with_fiber(self.spec.inner_dim() * self.rep.fiber_dim);
        dirac_phase(&dirac_operator(&lat, &self.rep)?)
    }

    /// V on inner x (grading +1 part): F = [[0, V^*], [V, 0]].
    pub fn phase_block(&self) -> Result<LatticeOperator> {
        split_f(&self.dirac_phase()?, &self.rep)
    }

    /// F extended to the chiral space (identity on the chiral factor).
    pub fn chiral_dirac_phase(&self) -> Result<LatticeOperator> {
        Ok(self.dirac_phase()?.kron_left(&eye(2)))
    }

    /// J = diag(1, -1) kron 1.
    pub fn chiral_grading(&self) -> LatticeOperator {
        let lat = self.lattice.with_fiber(self.spec.inner_dim() * self.rep.fiber_dim);
        let j = ndarray::array![[ONE, ZERO], [ZERO, -ONE]];
        LatticeOperator::identity(&lat).kron_left(&j)
    }

    pub fn grading(&self) -> Option<LatticeOperator> {
        let g = self.rep.grading.as_ref()?;
        let lat = self.lattice.with_fiber(self.spec.inner_dim() * self.rep.fiber_dim);
        Some(LatticeOperator::sitewise(&lat, |_| kron(&eye(self.spec.inner_dim()), g)))
    }
}

/// [[0, A], [A^*, 0]] with the chiral index outermost in the fiber.
pub fn chiral_hamiltonian(a: &LatticeOperator) -> LatticeOperator {
    let upper = ndarray::array![[ZERO, ONE], [ZERO, ZERO]];
    let lower = ndarray::array![[ZERO, ZERO], [ONE, ZERO]];
    a.kron_left(&upper).add(&a.adjoint().kron_left(&lower))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SshBoundary {
    /// Truncated chain: S is a partial isometry.
    Open,
    /// Wrap bond from the top site to the bottom site: S is unitary.
    Closed,
}

/// Chain on sites n = -L..L with the monopole phase e^{i pi alpha} on the
/// bond between 0 and 1.
#[derive(Clone, Debug)]
pub struct SshChain {
    pub lattice: LatticeBox,
    pub boundary: SshBoundary,
}

impl SshChain {
    pub fn new(half_length: usize, boundary: SshBoundary) -> Result<Self> {
        if 2 * half_length + 1 < 8 {
            return Err(Error::Model("SSH chain needs at least 8 sites".into()));
        }
        Ok(SshChain { lattice: LatticeBox::new(1, half_length, vec![0.0], 1)?, boundary })
    }

    pub fn len(&self) -> usize {
        self.lattice.n_sites()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn idx(&self, n: i64) -> usize {
        self.lattice.site_index(&[n]).expect("site inside chain")
    }

    /// Plain shift plus (c - 1)|0><1|: c = e^{i pi alpha} gives S^alpha.
    fn shift_with_bond(&self, bond: C64) -> LatticeOperator {
        let l = self.lattice.radius as i64;
        let mut op = LatticeOperator::zeros(&self.lattice);
        for n in -l..l {
            let z = if n == 0 { bond } else { ONE };
            op.add_block(self.idx(n), self.idx(n + 1), &ndarray::array![[z]]);
        }
        if self.boundary == SshBoundary::Closed {
            op.add_block(self.idx(l), self.idx(-l), &ndarray::array![[ONE]]);
        }
        op
    }

    /// S^alpha = sum_{n != 0} |n><n+1| + e^{i pi alpha}|0><1|.
    pub fn shift(&self, alpha: f64) -> LatticeOperator {
        let s = self.shift_with_bond(c(0.0, PI * alpha).exp());
        let unitary = self.boundary == SshBoundary::Closed;
        s.with_flags(OpFlags { hermitian: false, unitary })
    }

    /// F = sign(X) with F = -1 at n = 0.
    pub fn fermi_phase(&self) -> LatticeOperator {
        LatticeOperator::sitewise(&self.lattice, |s| {
            let v = if self.lattice.cells[s][0] > 0 { 1.0 } else { -1.0 };
            ndarray::array![[c(v, 0.0)]]
        })
        .with_flags(OpFlags { hermitian: true, unitary: true })
    }

    pub fn hamiltonian(&self, alpha: f64) -> LatticeOperator {
        chiral_hamiltonian(&self.shift(alpha)).with_flags(OpFlags { hermitian: true, unitary: false })
    }

    /// J = diag(1, -1) on the chiral fiber.
    pub fn chiral_grading(&self) -> LatticeOperator {
        LatticeOperator::identity(&self.lattice).kron_left(&ndarray::array![[ONE, ZERO], [ZERO, -ONE]])
    }
}

/// (H_alpha, U_alpha = S^alpha, F) for the SSH chain.
pub fn build_ssh(chain: &SshChain, alpha: f64) -> (LatticeOperator, LatticeOperator, LatticeOperator) {
    (chain.hamiltonian(alpha), chain.shift(alpha), chain.fermi_phase())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChirIndVariant {
    /// S^0 - 2 alpha |0><1|: singular at alpha = 1/2.
    Straight,
    /// Coefficient cos(pi alpha) + i/2 sin(pi alpha) on the bond: avoids 0.
    Detour,
}

/// Chiral path T_alpha = [[0, A_alpha], [A_alpha^*, 0]] of the ChirInd
/// example; returns T_alpha and whether it is a known singular point.
pub fn chirind_example_path(chain: &SshChain, alpha: f64, variant: ChirIndVariant) -> (LatticeOperator, bool) {
    let bond = match variant {
        ChirIndVariant::Straight => c(1.0 - 2.0 * alpha, 0.0),
        ChirIndVariant::Detour => c((PI * alpha).cos(), 0.5 * (PI * alpha).sin()),
    };
    let a = chain.shift_with_bond(bond);
    let singular = variant == ChirIndVariant::Straight && (alpha - 0.5).abs() < 1e-12;
    (chiral_hamiltonian(&a).with_flags(OpFlags { hermitian: true, unitary: false }), singular)
}

/// A_alpha block of the ChirInd path.
pub fn chirind_block(chain: &SshChain, alpha: f64, variant: ChirIndVariant) -> LatticeOperator {
    let bond = match variant {
        ChirIndVariant::Straight => c(1.0 - 2.0 * alpha, 0.0),
        ChirIndVariant::Detour => c((PI * alpha).cos(), 0.5 * (PI * alpha).sin()),
    };
    chain.shift_with_bond(bond)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, max_abs_diff, svd};

    fn ode() -> OdeOptions {
        OdeOptions::default()
    }

    #[test]
    fn even_dirac_symbol_is_dirac_type() {
        let spec = ModelSpec::even_dirac(2, 1.0).unwrap();
        let nu = build_clifford(2).unwrap();
        let k = [0.3f64, -1.1];
        let want = nu.gammas[0].mapv(|z| z * k[0].sin()) + nu.gammas[1].mapv(|z| z * k[1].sin())
            + nu.grading.unwrap().mapv(|z| z * (1.0 + k[0].cos() + k[1].cos()));
        assert!(max_abs_diff(&spec.symbol(&k), &want) < 1e-14);
    }

    #[test]
    fn odd_chiral_d1_is_the_shift() {
        let spec = ModelSpec::odd_chiral(1, 0.0).unwrap();
        let k = [0.9];
        assert!((spec.symbol(&k)[[0, 0]] - c(0.0, 0.9).exp()).norm() < 1e-15);
        let m = LatticeModel::new(&spec, 5, &ode()).unwrap();
        let a = m.chiral_block(0.0).unwrap();
        // A = S with <x|S|x+1> = 1
        let plain = crate::monopole::plain_shift(&a.lattice, 0);
        assert!(a.max_diff(&plain, 0) < 1e-15);
    }

    #[test]
    fn gap_warnings() {
        assert!(!ModelSpec::even_dirac(2, 2.0).unwrap().warnings().is_empty());
        assert!(ModelSpec::even_dirac(2, 1.0).unwrap().warnings().is_empty());
        assert!(!ModelSpec::odd_chiral(3, 1.0).unwrap().warnings().is_empty());
        assert!(ModelSpec::odd_chiral(3, 2.0).unwrap().warnings().is_empty());
    }

    #[test]
    fn even_dirac_gap_at_zero_charge() {
        // bulk states of the d=2, m=1 model stay away from 0
        let spec = ModelSpec::even_dirac(2, 1.0).unwrap();
        let m = LatticeModel::new(&spec, 6, &ode()).unwrap();
        let h = m.half_hamiltonian(0.0).unwrap().to_dense();
        let (w, v) = eigh(&h).unwrap();
        let lat = m.lattice.with_fiber(2);
        let mut min_bulk = f64::INFINITY;
        for k in 0..w.len() {
            let col: Vec<C64> = v.column(k).to_vec();
            if lat.shell_weight(&col, 2) < 0.5 {
                min_bulk = min_bulk.min(w[k].abs());
            }
        }
        assert!(min_bulk > 0.2, "{min_bulk}");
    }

    #[test]
    fn fermi_conjugation_on_the_model() {
        // F H_alpha F = H_{1-alpha} on interior sites
        let spec = ModelSpec::even_dirac(2, 1.0).unwrap();
        let m = LatticeModel::new(&spec, 4, &ode()).unwrap();
        let f = m.dirac_phase().unwrap();
        for a in [0.0, 0.3, 0.5] {
            let h = m.hamiltonian(a).unwrap();
            let h1 = m.hamiltonian(1.0 - a).unwrap();
            assert!(f.mul(&h).mul(&f).max_diff(&h1, 0) < 1e-8);
        }
    }

    #[test]
    fn full_hamiltonian_splits_into_half_blocks() {
        let spec = ModelSpec::even_dirac(2, -1.0).unwrap();
        let m = LatticeModel::new(&spec, 3, &ode()).unwrap();
        let a = 0.3;
        let full = m.hamiltonian(a).unwrap();
        let g = m.rep.grading.clone().unwrap();
        let (bp, bm) = grading_bases(&g).unwrap();
        let bp = kron(&eye(2), &bp);
        let bm = kron(&eye(2), &bm);
        let upper = full.map_blocks(&dagger(&bp), &bp);
        let lower = full.map_blocks(&dagger(&bm), &bm);
        let off = full.map_blocks(&dagger(&bp), &bm);
        assert!(upper.max_diff(&m.half_hamiltonian(a).unwrap(), 0) < 1e-14);
        assert!(lower.max_diff(&m.half_hamiltonian(-a).unwrap(), 0) < 1e-12);
        assert!(off.max_diff(&LatticeOperator::zeros(&off.lattice), 0) < 1e-14);
    }

    #[test]
    fn chiral_model_anticommutes_with_j() {
        let spec = ModelSpec::odd_chiral(3, 2.0).unwrap();
        let m = LatticeModel::new(&spec, 2, &ode()).unwrap();
        let j = m.chiral_grading();
        for a in [0.0, 0.4] {
            let h = m.hamiltonian(a).unwrap();
            assert!(j.mul(&h).mul(&j).max_diff(&h.scale(c(-1.0, 0.0)), 0) == 0.0);
            assert!(h.is_hermitian(1e-14));
        }
    }

    #[test]
    fn chiral_block_is_identity_on_clifford_at_zero_charge() {
        let spec = ModelSpec::odd_chiral(3, 2.0).unwrap();
        let m = LatticeModel::new(&spec, 2, &ode()).unwrap();
        let a = m.chiral_block(0.0).unwrap();
        for (_, _, b) in a.blocks() {
            // inner (2) x Clifford (2): b = x kron 1_2
            assert!((b[[0, 1]]).norm() < 1e-15 && (b[[0, 0]] - b[[1, 1]]).norm() < 1e-15);
        }
    }

    #[test]
    fn ssh_examples() {
        let chain = SshChain::new(50, SshBoundary::Closed).unwrap();
        assert_eq!(chain.len(), 101);
        let f = chain.fermi_phase();
        let s0 = chain.shift(0.0);
        for a in [0.0, 0.25, 0.7] {
            let w = f.mul(&chain.shift(a)).mul(&s0.adjoint()).to_dense();
            let z = chain.lattice.site_index(&[0]).unwrap();
            for i in 0..chain.len() {
                for j in 0..chain.len() {
                    let want = if i != j {
                        ZERO
                    } else if i == z {
                        -c(0.0, PI * a).exp()
                    } else {
                        c(if chain.lattice.cells[i][0] > 0 { 1.0 } else { -1.0 }, 0.0)
                    };
                    assert!((w[[i, j]] - want).norm() < 1e-14);
                }
            }
        }
        let open = SshChain::new(50, SshBoundary::Open).unwrap();
        let fo = open.fermi_phase();
        assert!(fo.mul(&open.shift(0.0)).mul(&fo).max_diff(&open.shift(1.0), 0) < 1e-15);
        // closed chain: the identity fails only on the wrap bond
        assert!(f.mul(&s0).mul(&f).max_diff(&chain.shift(1.0), 2) < 1e-15);
        assert!(chain.shift(0.3).is_unitary(1e-14, 0));
    }

    #[test]
    fn chirind_singular_and_detour() {
        let chain = SshChain::new(10, SshBoundary::Closed).unwrap();
        let (t0, _) = chirind_example_path(&chain, 0.0, ChirIndVariant::Straight);
        assert!(t0.max_diff(&chain.hamiltonian(0.0), 0) < 1e-15);
        let (th, flagged) = chirind_example_path(&chain, 0.5, ChirIndVariant::Straight);
        assert!(flagged);
        let (_, s, _) = svd(&th.to_dense()).unwrap();
        assert_eq!(s.iter().filter(|x| **x < 1e-12).count(), 2);
        for k in 0..=20 {
            let (t, _) = chirind_example_path(&chain, k as f64 / 20.0, ChirIndVariant::Detour);
            let (_, s, _) = svd(&t.to_dense()).unwrap();
            assert!(s.iter().cloned().fold(f64::INFINITY, f64::min) > 1e-3);
        }
    }

    #[test]
    fn custom_polynomial_checks_selfadjointness() {
        let one = ndarray::array![[ONE]];
        let terms = vec![
            HoppingTerm { monomial: vec![1, 0], coeff: one.clone() },
            HoppingTerm { monomial: vec![-1, 0], coeff: one.clone() },
        ];
        assert!(ModelSpec::custom(2, terms.clone(), ndarray::array![[c(0.5, 0.0)]], 0.0).is_ok());
        assert!(ModelSpec::custom(2, terms[..1].to_vec(), ndarray::array![[c(0.5, 0.0)]], 0.0).is_err());
    }
}
