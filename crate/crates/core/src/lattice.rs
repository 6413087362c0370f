//! Finite boxes in Z^d (+ offset), block-sparse site operators, the position
//! Dirac operator and its phase F.

use std::collections::HashMap;

use ndarray::{s, Array1, Array2, Axis};

use crate::clifford::CliffordRep;
use crate::error::{Error, Result};
use crate::linalg::banded::BandedMatrix;
use crate::linalg::{c, dagger, eigh, eye, kron, max_abs_diff, C64, ZERO};

/// Sites x = n + offset with n integer and sup-norm of x at most `radius`.
#[derive(Clone, Debug)]
pub struct LatticeBox {
    pub d: usize,
    pub radius: usize,
    pub offset: Vec<f64>,
    pub fiber_dim: usize,
    /// Integer parts n of the sites, lexicographic.
    pub cells: Vec<Vec<i64>>,
    /// Site coordinates x = n + offset.
    pub sites: Vec<Vec<f64>>,
    lo: Vec<i64>,
    extent: Vec<usize>,
}

impl LatticeBox {
    pub fn new(d: usize, radius: usize, offset: Vec<f64>, fiber_dim: usize) -> Result<Self> {
        if d == 0 || radius == 0 {
            return Err(Error::Lattice("d and radius must be positive".into()));
        }
        if offset.len() != d || offset.iter().any(|&o| o != 0.0 && o != 0.5) {
            return Err(Error::Lattice("offset must be a vector in {0, 1/2}^d".into()));
        }
        let r = radius as i64;
        let mut lo = Vec::with_capacity(d);
        let mut extent = Vec::with_capacity(d);
        for &o in &offset {
            // n + o in [-r, r]
            let last = if o == 0.0 { r } else { r - 1 };
            lo.push(-r);
            extent.push((last + r + 1) as usize);
        }
        let total: usize = extent.iter().product();
        let mut cells = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            cells.push((0..d).map(|k| lo[k] + idx[k] as i64).collect::<Vec<_>>());
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < extent[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        let sites = cells
            .iter()
            .map(|n| n.iter().zip(&offset).map(|(&a, &o)| a as f64 + o).collect())
            .collect();
        Ok(LatticeBox { d, radius, offset, fiber_dim, cells, sites, lo, extent })
    }

    /// Box with offset (1/2, ..., 1/2): the monopole sits at a cell center.
    pub fn centered(d: usize, radius: usize, fiber_dim: usize) -> Result<Self> {
        Self::new(d, radius, vec![0.5; d], fiber_dim)
    }

    pub fn with_fiber(&self, fiber_dim: usize) -> Self {
        let mut b = self.clone();
        b.fiber_dim = fiber_dim;
        b
    }

    pub fn n_sites(&self) -> usize {
        self.cells.len()
    }

    pub fn dim(&self) -> usize {
        self.n_sites() * self.fiber_dim
    }

    pub fn site_index(&self, n: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..self.d {
            let off = n[k] - self.lo[k];
            if off < 0 || off as usize >= self.extent[k] {
                return None;
            }
            idx = idx * self.extent[k] + off as usize;
        }
        Some(idx)
    }

    /// Index distance between neighbouring sites along axis k.
    pub fn stride(&self, k: usize) -> usize {
        self.extent[k + 1..].iter().product()
    }

    pub fn sup_norm(&self, site: usize) -> f64 {
        self.sites[site].iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn euclid(&self, site: usize) -> f64 {
        self.sites[site].iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// True for sites in the outer shell of the given depth (sup-norm above
    /// radius - depth).
    pub fn in_shell(&self, site: usize, depth: usize) -> bool {
        self.sup_norm(site) > self.radius as f64 - depth as f64
    }

    /// Fraction of |v|^2 carried by the outer shell.
    pub fn shell_weight(&self, v: &[C64], depth: usize) -> f64 {
        let f = v.len() / self.n_sites();
        let mut outer = 0.0;
        let mut total = 0.0;
        for site in 0..self.n_sites() {
            let w: f64 = v[site * f..(site + 1) * f].iter().map(|z| z.norm_sqr()).sum();
            total += w;
            if self.in_shell(site, depth) {
                outer += w;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            outer / total
        }
    }

    /// Vector indices (site-major) of all sites with sup-norm at most r.
    pub fn region_indices(&self, r: f64, fiber: usize) -> Vec<usize> {
        (0..self.n_sites())
            .filter(|&s| self.sup_norm(s) <= r + 1e-12)
            .flat_map(|s| (s * fiber..(s + 1) * fiber).collect::<Vec<_>>())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpFlags {
    pub hermitian: bool,
    pub unitary: bool,
}

/// Operator on sites x fiber, stored as per-site rows of dense blocks.
#[derive(Clone, Debug)]
pub struct LatticeOperator {
    pub lattice: LatticeBox,
    rows: Vec<HashMap<usize, Array2<C64>>>,
    pub flags: OpFlags,
}

impl LatticeOperator {
    pub fn zeros(lattice: &LatticeBox) -> Self {
        LatticeOperator { lattice: lattice.clone(), rows: vec![HashMap::new(); lattice.n_sites()], flags: OpFlags::default() }
    }

    pub fn identity(lattice: &LatticeBox) -> Self {
        let f = lattice.fiber_dim;
        Self::sitewise(lattice, |_| eye(f))
    }

    pub fn sitewise(lattice: &LatticeBox, block: impl Fn(usize) -> Array2<C64>) -> Self {
        let mut op = Self::zeros(lattice);
        for s in 0..lattice.n_sites() {
            op.rows[s].insert(s, block(s));
        }
        op
    }

    pub fn fiber(&self) -> usize {
        self.lattice.fiber_dim
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn add_block(&mut self, i: usize, j: usize, block: &Array2<C64>) {
        assert_eq!(block.dim(), (self.fiber(), self.fiber()));
        match self.rows[i].get_mut(&j) {
            Some(b) => *b += block,
            None => {
                self.rows[i].insert(j, block.clone());
            }
        }
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&Array2<C64>> {
        self.rows[i].get(&j)
    }

    pub fn block_or_zero(&self, i: usize, j: usize) -> Array2<C64> {
        self.block(i, j).cloned().unwrap_or_else(|| Array2::zeros((self.fiber(), self.fiber())))
    }

    /// Iterate (row site, column site, block) in deterministic order.
    pub fn blocks(&self) -> Vec<(usize, usize, &Array2<C64>)> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let mut cols: Vec<_> = row.keys().copied().collect();
            cols.sort_unstable();
            for j in cols {
                out.push((i, j, &row[&j]));
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(&self.lattice);
        for (i, j, b) in self.blocks() {
            out.rows[j].insert(i, dagger(b));
        }
        out.flags = self.flags;
        out
    }

    pub fn scale(&self, z: C64) -> Self {
        let mut out = self.clone();
        for row in out.rows.iter_mut() {
            for b in row.values_mut() {
                b.mapv_inplace(|x| x * z);
            }
        }
        out.flags = OpFlags::default();
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (i, j, b) in other.blocks() {
            out.add_block(i, j, b);
        }
        out.flags = OpFlags::default();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(c(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zeros(&self.lattice);
        for (i, row) in self.rows.iter().enumerate() {
            let mut cols: Vec<_> = row.keys().copied().collect();
            cols.sort_unstable();
            for k in cols {
                let a = &row[&k];
                let mut inner: Vec<_> = other.rows[k].keys().copied().collect();
                inner.sort_unstable();
                for j in inner {
                    let prod = a.dot(&other.rows[k][&j]);
                    out.add_block(i, j, &prod);
                }
            }
        }
        out
    }

    /// Replace every block b by kron(left, b) (left acts on an outer fiber
    /// factor). The result lives on a box with fiber left.nrows() * fiber.
    pub fn kron_left(&self, left: &Array2<C64>) -> Self {
        let lat = self.lattice.with_fiber(left.nrows() * self.fiber());
        let mut out = Self::zeros(&lat);
        for (i, j, b) in self.blocks() {
            out.rows[i].insert(j, kron(left, b));
        }
        out
    }

    /// Replace every block b by kron(b, right).
    pub fn kron_right(&self, right: &Array2<C64>) -> Self {
        let lat = self.lattice.with_fiber(right.nrows() * self.fiber());
        let mut out = Self::zeros(&lat);
        for (i, j, b) in self.blocks() {
            out.rows[i].insert(j, kron(b, right));
        }
        out
    }

    /// Conjugate every block with fixed fiber maps: b -> l b r.
    pub fn map_blocks(&self, l: &Array2<C64>, r: &Array2<C64>) -> Self {
        let lat = self.lattice.with_fiber(l.nrows());
        let mut out = Self::zeros(&lat);
        for (i, j, b) in self.blocks() {
            out.rows[i].insert(j, l.dot(b).dot(r));
        }
        out
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let f = self.fiber();
        let mut out = Array2::zeros((self.dim(), self.dim()));
        for (i, j, b) in self.blocks() {
            out.slice_mut(s![i * f..(i + 1) * f, j * f..(j + 1) * f]).assign(b);
        }
        out
    }

    pub fn from_dense(lattice: &LatticeBox, m: &Array2<C64>) -> Self {
        let f = lattice.fiber_dim;
        let mut out = Self::zeros(lattice);
        for i in 0..lattice.n_sites() {
            for j in 0..lattice.n_sites() {
                let b = m.slice(s![i * f..(i + 1) * f, j * f..(j + 1) * f]);
                if b.iter().any(|z| *z != ZERO) {
                    out.rows[i].insert(j, b.to_owned());
                }
            }
        }
        out
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        let f = self.fiber();
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in self.blocks() {
            if i >= j {
                kl = kl.max((i - j) * f + f - 1);
                ku = ku.max(f - 1);
            }
            if j >= i {
                ku = ku.max((j - i) * f + f - 1);
                kl = kl.max(f - 1);
            }
        }
        (kl, ku)
    }

    pub fn to_banded(&self) -> BandedMatrix {
        self.to_banded_shifted(ZERO)
    }

    /// Band form of (self - sigma).
    pub fn to_banded_shifted(&self, sigma: C64) -> BandedMatrix {
        let f = self.fiber();
        let (kl, ku) = self.bandwidths();
        let mut m = BandedMatrix::zeros(self.dim(), kl, ku);
        for (i, j, b) in self.blocks() {
            for a in 0..f {
                for bcol in 0..f {
                    let z = b[[a, bcol]];
                    if z != ZERO {
                        m.add(i * f + a, j * f + bcol, z).expect("inside band");
                    }
                }
            }
        }
        if sigma != ZERO {
            for k in 0..self.dim() {
                m.add(k, k, -sigma).expect("diagonal");
            }
        }
        m
    }

    pub fn matvec(&self, x: &Array1<C64>) -> Array1<C64> {
        let m = x.clone().insert_axis(Axis(1));
        self.apply(&m).column(0).to_owned()
    }

    /// Apply to the columns of `x`.
    pub fn apply(&self, x: &Array2<C64>) -> Array2<C64> {
        let f = self.fiber();
        let mut y = Array2::zeros(x.dim());
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = y.slice_mut(s![i * f..(i + 1) * f, ..]);
            for (&j, b) in row {
                acc += &b.dot(&x.slice(s![j * f..(j + 1) * f, ..]));
            }
        }
        y
    }

    /// Largest block-entry deviation between two operators, restricted to
    /// row and column sites outside the outer shell of `shell` layers
    /// (`shell = 0` compares everything).
    pub fn max_diff(&self, other: &Self, shell: usize) -> f64 {
        let keep = |s: usize| shell == 0 || !self.lattice.in_shell(s, shell);
        let mut worst: f64 = 0.0;
        let zero = Array2::zeros((self.fiber(), self.fiber()));
        for (i, row) in self.rows.iter().enumerate() {
            if !keep(i) {
                continue;
            }
            for (&j, b) in row {
                if keep(j) {
                    let o = other.block(i, j).unwrap_or(&zero);
                    worst = worst.max(max_abs_diff(b, o));
                }
            }
        }
        for (i, row) in other.rows.iter().enumerate() {
            if !keep(i) {
                continue;
            }
            for (&j, b) in row {
                if keep(j) && self.block(i, j).is_none() {
                    worst = worst.max(max_abs_diff(b, &zero));
                }
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_diff(&self.adjoint(), 0) <= tol
    }

    /// Checks U*U = 1 on interior sites (rows/columns outside the given
    /// shell); `shell = 0` checks the full box.
    pub fn is_unitary(&self, tol: f64, shell: usize) -> bool {
        let g = self.adjoint().mul(self);
        g.max_diff(&Self::identity(&self.lattice), shell) <= tol
    }

    /// Verify the flags recorded on the operator.
    pub fn verify_flags(&self, tol: f64) -> bool {
        (!self.flags.hermitian || self.is_hermitian(tol)) && (!self.flags.unitary || self.is_unitary(tol, 0))
    }

    pub fn with_flags(mut self, flags: OpFlags) -> Self {
        self.flags = flags;
        self
    }

    /// Number of stored blocks.
    pub fn nnz_blocks(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }
}

/// D = sum_j gamma_j X_j, block diagonal: (1_inner kron gamma_x) at site x.
pub fn dirac_operator(lattice: &LatticeBox, rep: &CliffordRep) -> Result<LatticeOperator> {
    if lattice.d != rep.d {
        return Err(Error::Lattice(format!("box dimension {} but representation dimension {}", lattice.d, rep.d)));
    }
    if lattice.fiber_dim % rep.fiber_dim != 0 {
        return Err(Error::Lattice(format!(
            "fiber {} not divisible by Clifford fiber {}",
            lattice.fiber_dim, rep.fiber_dim
        )));
    }
    let inner = eye(lattice.fiber_dim / rep.fiber_dim);
    Ok(LatticeOperator::sitewise(lattice, |s| kron(&inner, &rep.gamma_v(&lattice.sites[s])))
        .with_flags(OpFlags { hermitian: true, unitary: false }))
}

/// F = D |D|^{-1}. Sitewise D(x)^2 = |x|^2, so F(x) = D(x)/|x|.
pub fn dirac_phase(dirac: &LatticeOperator) -> Result<LatticeOperator> {
    let lat = &dirac.lattice;
    let mut out = LatticeOperator::zeros(lat);
    for s in 0..lat.n_sites() {
        let r = lat.euclid(s);
        if r < 1e-12 {
            return Err(Error::Lattice(format!("Dirac operator singular at site {:?}", lat.sites[s])));
        }
        let b = dirac.block_or_zero(s, s).mapv(|z| z / r);
        out.add_block(s, s, &b);
    }
    Ok(out.with_flags(OpFlags { hermitian: true, unitary: true }))
}

/// Orthonormal bases of the +1 and -1 eigenspaces of a grading.
pub fn grading_bases(grading: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let (w, v) = eigh(grading)?;
    let n = grading.nrows();
    let minus: Vec<usize> = (0..n).filter(|&k| w[k] < 0.0).collect();
    let plus: Vec<usize> = (0..n).filter(|&k| w[k] > 0.0).collect();
    if minus.len() != plus.len() || minus.len() + plus.len() != n {
        return Err(Error::Lattice("grading is not balanced with spectrum {+1,-1}".into()));
    }
    let pick = |idx: &[usize]| {
        let mut m = Array2::zeros((n, idx.len()));
        for (c, &k) in idx.iter().enumerate() {
            m.column_mut(c).assign(&v.column(k));
        }
        m
    };
    // the recursive representations have diagonal gradings; keep the
    // canonical basis in that case to avoid eigenvector phase noise
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || grading[[i, j]] == ZERO));
    if diagonal {
        let plus_idx: Vec<usize> = (0..n).filter(|&k| grading[[k, k]].re > 0.0).collect();
        let minus_idx: Vec<usize> = (0..n).filter(|&k| grading[[k, k]].re < 0.0).collect();
        let unit = |idx: &[usize]| {
            let mut m = Array2::zeros((n, idx.len()));
            for (c, &k) in idx.iter().enumerate() {
                m[[k, c]] = c64_one();
            }
            m
        };
        return Ok((unit(&plus_idx), unit(&minus_idx)));
    }
    Ok((pick(&plus), pick(&minus)))
}

fn c64_one() -> C64 {
    c(1.0, 0.0)
}

/// Off-diagonal block V of F in the grading eigenbasis: F = [[0, V*], [V, 0]].
/// `grading` acts on the Clifford factor; the inner fiber factor is kept.
pub fn split_f(f: &LatticeOperator, rep: &CliffordRep) -> Result<LatticeOperator> {
    let grading = rep
        .grading
        .as_ref()
        .ok_or_else(|| Error::Lattice("split_F needs an even dimension".into()))?;
    let inner = f.fiber() / rep.fiber_dim;
    let g_full = kron(&eye(inner), grading);
    // check anticommutation sitewise
    for s in 0..f.lattice.n_sites() {
        let b = f.block_or_zero(s, s);
        if max_abs_diff(&g_full.dot(&b), &b.dot(&g_full).mapv(|z| -z)) > 1e-10 {
            return Err(Error::Lattice("F does not anticommute with the grading".into()));
        }
    }
    let (bp, bm) = grading_bases(grading)?;
    let bp = kron(&eye(inner), &bp);
    let bm = kron(&eye(inner), &bm);
    let v = f.map_blocks(&dagger(&bm), &bp);
    Ok(v.with_flags(OpFlags { hermitian: false, unitary: true }))
}

/// Hardy projection (F + 1)/2.
pub fn hardy_projection(f: &LatticeOperator) -> LatticeOperator {
    f.add(&LatticeOperator::identity(&f.lattice))
        .scale(c(0.5, 0.0))
        .with_flags(OpFlags { hermitian: true, unitary: false })
}
