//! Spectral snapshots of an operator path at a single alpha: dense
//! decompositions for small problems, banded shift-invert windows otherwise.

use std::sync::Arc;

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::lattice::LatticeOperator;
use crate::linalg::banded::BandedLu;
use crate::linalg::krylov::{largest_modulus, KrylovOptions};
use crate::linalg::{eig, eigh, C64};

/// Eigenvalues and unit eigenvectors at one alpha.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub alpha: f64,
    pub values: Vec<C64>,
    /// Unit columns, one per value.
    pub vectors: Array2<C64>,
    /// Fraction of each vector's weight in the outer shell.
    pub boundary_weight: Vec<f64>,
    /// Point on the crossing line the window is centered at.
    pub center: C64,
    /// Every eigenvalue with |lambda - center| < window is present.
    pub window: f64,
}

/// Fraction of a vector's weight considered boundary.
pub type Labeler = Arc<dyn Fn(&[C64]) -> f64 + Send + Sync>;

fn label_all(vectors: &Array2<C64>, labeler: &Option<Labeler>) -> Vec<f64> {
    (0..vectors.ncols())
        .map(|k| match labeler {
            Some(l) => l(&vectors.column(k).to_vec()),
            None => 0.0,
        })
        .collect()
}

/// Which eigenvalues a path contributes and what line they cross.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    SelfadjointThroughMu,
    UnitaryRealpart,
    NonnormalImaginaryAxis,
}

/// A path alpha -> operator exposed through its spectrum.
pub trait SpectralPath: Sync {
    fn snapshot(&self, alpha: f64) -> Result<Snapshot>;
    fn mode(&self) -> FlowMode;
    /// Crossing line Re(lambda) = level.
    fn level(&self) -> f64;
}

pub type DenseFn = Arc<dyn Fn(f64) -> Result<Array2<C64>> + Send + Sync>;
pub type OperatorFn = Arc<dyn Fn(f64) -> Result<LatticeOperator> + Send + Sync>;

/// Hermitian path, full dense decomposition.
pub struct DenseHermitianPath {
    pub op: DenseFn,
    pub level: f64,
    pub labeler: Option<Labeler>,
    pub mode: FlowMode,
}

impl SpectralPath for DenseHermitianPath {
    fn snapshot(&self, alpha: f64) -> Result<Snapshot> {
        let h = (self.op)(alpha)?;
        let (w, v) = eigh(&h)?;
        Ok(Snapshot {
            alpha,
            values: w.iter().map(|&x| C64::new(x, 0.0)).collect(),
            boundary_weight: label_all(&v, &self.labeler),
            vectors: v,
            center: C64::new(self.level, 0.0),
            window: f64::INFINITY,
        })
    }
    fn mode(&self) -> FlowMode {
        self.mode
    }
    fn level(&self) -> f64 {
        self.level
    }
}

/// General (non-normal) path, full dense decomposition.
pub struct DenseGeneralPath {
    pub op: DenseFn,
    pub labeler: Option<Labeler>,
}

impl SpectralPath for DenseGeneralPath {
    fn snapshot(&self, alpha: f64) -> Result<Snapshot> {
        let t = (self.op)(alpha)?;
        let (w, v) = eig(&t)?;
        Ok(Snapshot {
            alpha,
            values: w.to_vec(),
            boundary_weight: label_all(&v, &self.labeler),
            vectors: v,
            center: C64::new(0.0, 0.0),
            window: f64::INFINITY,
        })
    }
    fn mode(&self) -> FlowMode {
        FlowMode::NonnormalImaginaryAxis
    }
    fn level(&self) -> f64 {
        0.0
    }
}

/// Hermitian lattice path: the `nev` eigenvalues closest to the level via
/// banded shift-invert.
pub struct WindowHermitianPath {
    pub op: OperatorFn,
    pub level: f64,
    pub labeler: Option<Labeler>,
    pub krylov: KrylovOptions,
}

const SHIFT_OFFSETS: [f64; 3] = [1.2345e-3, -2.3456e-3, 4.567e-3];

impl WindowHermitianPath {
    fn window_at(&self, h: &LatticeOperator, sigma: f64) -> Result<(Vec<C64>, Array2<C64>)> {
        let n = h.dim();
        let lu = h.to_banded_shifted(C64::new(sigma, 0.0)).factor()?;
        let apply = |x: &Array2<C64>| lu.solve(x, false);
        let resid = |t: C64, v: &Array1<C64>| -> Result<f64> {
            let lam = C64::new(sigma, 0.0) + C64::new(1.0, 0.0) / t;
            let r = h.matvec(v) - v.mapv(|z| z * lam);
            Ok(r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        };
        let mut opts = self.krylov.clone();
        opts.hermitian = true;
        opts.nev = opts.nev.min(n);
        let win = largest_modulus(n, &apply, &resid, &opts)?;
        let values = win.theta.iter().map(|t| C64::new(sigma + 1.0 / t.re, 0.0)).collect();
        Ok((values, win.vectors))
    }
}

impl SpectralPath for WindowHermitianPath {
    fn snapshot(&self, alpha: f64) -> Result<Snapshot> {
        let h = (self.op)(alpha)?;
        let n = h.dim();
        // the shift sits slightly off the level: a shift on (or within
        // roundoff of) an eigenvalue ruins the Rayleigh quotient
        let mut last = None;
        for off in SHIFT_OFFSETS {
            let sigma = self.level + off;
            match self.window_at(&h, sigma) {
                Ok((values, vectors)) => {
                    let window = (window_radius(&values, C64::new(sigma, 0.0), n) - off.abs()).max(0.0);
                    let window = if values.len() >= n { f64::INFINITY } else { window };
                    return Ok(Snapshot {
                        alpha,
                        boundary_weight: label_all(&vectors, &self.labeler),
                        vectors,
                        values,
                        center: C64::new(self.level, 0.0),
                        window,
                    });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap())
    }
    fn mode(&self) -> FlowMode {
        FlowMode::SelfadjointThroughMu
    }
    fn level(&self) -> f64 {
        self.level
    }
}

fn window_radius(values: &[C64], center: C64, n: usize) -> f64 {
    if values.len() >= n {
        return f64::INFINITY;
    }
    values.iter().map(|z| (z - center).norm()).fold(0.0, f64::max)
}

/// One block of a non-normal path: T = L R^{-1}, eigenvectors x = R y of
/// the pencil L y = lambda R y.
pub struct PencilBlock {
    pub lhs: LatticeOperator,
    pub rhs: Arc<LatticeOperator>,
}

type PencilFn = Arc<dyn Fn(f64) -> Result<Vec<PencilBlock>> + Send + Sync>;

/// Non-normal path given blockwise as pencils; eigenvalues closest to 0
/// via shift-invert in each block, vectors embedded into the direct sum.
pub struct WindowPencilPath {
    pub blocks: PencilFn,
    pub labelers: Vec<Option<Labeler>>,
    pub krylov: KrylovOptions,
}

impl SpectralPath for WindowPencilPath {
    fn snapshot(&self, alpha: f64) -> Result<Snapshot> {
        let blocks = (self.blocks)(alpha)?;
        let total: usize = blocks.iter().map(|b| b.lhs.dim()).sum();
        let mut values = Vec::new();
        let mut cols: Vec<Array1<C64>> = Vec::new();
        let mut weights = Vec::new();
        let mut window = f64::INFINITY;
        let mut offset = 0;
        for (bi, blk) in blocks.iter().enumerate() {
            let n = blk.lhs.dim();
            let lu: BandedLu = blk.lhs.to_banded().factor()?;
            let rhs = blk.rhs.clone();
            let apply = |x: &Array2<C64>| lu.solve(&rhs.apply(x), false);
            let resid = |t: C64, y: &Array1<C64>| -> Result<f64> {
                let lam = C64::new(1.0, 0.0) / t;
                let ry = rhs.matvec(y);
                let r = blk.lhs.matvec(y) - ry.mapv(|z| z * lam);
                let scale = ry.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
                Ok(r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / scale)
            };
            let mut opts = self.krylov.clone();
            opts.hermitian = false;
            opts.nev = opts.nev.min(n);
            let win = largest_modulus(n, &apply, &resid, &opts)?;
            let vals: Vec<C64> = win.theta.iter().map(|t| C64::new(1.0, 0.0) / t).collect();
            window = window.min(window_radius(&vals, C64::new(0.0, 0.0), n));
            let labeler = self.labelers.get(bi).cloned().flatten();
            for (k, lam) in vals.iter().enumerate() {
                let y = win.vectors.column(k).to_owned();
                let mut x = rhs.matvec(&y);
                let nx = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                x.mapv_inplace(|z| z / nx);
                weights.push(match &labeler {
                    Some(l) => l(&x.to_vec()),
                    None => 0.0,
                });
                let mut full = Array1::zeros(total);
                full.slice_mut(s![offset..offset + n]).assign(&x);
                cols.push(full);
                values.push(*lam);
            }
            offset += n;
        }
        let mut vectors = Array2::zeros((total, cols.len()));
        for (k, c) in cols.iter().enumerate() {
            vectors.column_mut(k).assign(c);
        }
        Ok(Snapshot { alpha, values, vectors, boundary_weight: weights, center: C64::new(0.0, 0.0), window })
    }
    fn mode(&self) -> FlowMode {
        FlowMode::NonnormalImaginaryAxis
    }
    fn level(&self) -> f64 {
        0.0
    }
}

/// Dense general path given blockwise (block-diagonal operator): the
/// spectrum is the union of block spectra, vectors embedded.
pub struct DenseBlockPath {
    pub blocks: Arc<dyn Fn(f64) -> Result<Vec<Array2<C64>>> + Send + Sync>,
    pub labelers: Vec<Option<Labeler>>,
}

impl SpectralPath for DenseBlockPath {
    fn snapshot(&self, alpha: f64) -> Result<Snapshot> {
        let blocks = (self.blocks)(alpha)?;
        let total: usize = blocks.iter().map(|b| b.nrows()).sum();
        let mut values = Vec::new();
        let mut vectors = Array2::zeros((total, total));
        let mut weights = Vec::new();
        let mut offset = 0;
        for (bi, b) in blocks.iter().enumerate() {
            let n = b.nrows();
            let (w, v) = eig(b)?;
            let labeler = self.labelers.get(bi).cloned().flatten();
            for k in 0..n {
                let col = v.column(k);
                weights.push(match &labeler {
                    Some(l) => l(&col.to_vec()),
                    None => 0.0,
                });
                vectors.slice_mut(s![offset..offset + n, values.len()]).assign(&col);
                values.push(w[k]);
            }
            offset += n;
        }
        if values.len() != total {
            return Err(Error::Flow("block spectra incomplete".into()));
        }
        Ok(Snapshot { alpha, values, vectors, boundary_weight: weights, center: C64::new(0.0, 0.0), window: f64::INFINITY })
    }
    fn mode(&self) -> FlowMode {
        FlowMode::NonnormalImaginaryAxis
    }
    fn level(&self) -> f64 {
        0.0
    }
}
