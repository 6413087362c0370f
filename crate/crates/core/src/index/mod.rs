//! Fredholm index of compressions P U P on finite boxes, and momentum-space
//! cross-checks.

mod oracle;

pub use oracle::{chern_analytic, chern_number_raw, chern_oracle_even, winding_number_raw, winding_oracle_odd, OracleOptions};

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeOperator;
use crate::linalg::banded::BandedLu;
use crate::linalg::{dagger, eigh, svd, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMethod {
    KernelCount,
    FedosovTrace,
    OracleMomentum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexResult {
    pub value: i64,
    pub method: IndexMethod,
    /// Value before rounding (outer region for the trace estimator).
    pub raw: f64,
    /// Spread of the raw value across the compared truncations.
    pub stability: f64,
    pub stable: bool,
    /// (region radius or grid size, raw value) per truncation.
    pub samples: Vec<(f64, f64)>,
}

impl IndexResult {
    fn from_samples(method: IndexMethod, samples: Vec<(f64, f64)>, round_tol: f64) -> Self {
        let raw = samples[0].1;
        let value = raw.round() as i64;
        let spread = samples.iter().map(|s| (s.1 - raw).abs()).fold(0.0, f64::max);
        let agree = samples.iter().all(|s| s.1.round() as i64 == value);
        IndexResult { value, method, raw, stability: spread, stable: agree && (raw - value as f64).abs() <= round_tol, samples }
    }
}

/// A projection given either as a sparse lattice operator or densely.
pub enum Projector {
    Lattice(LatticeOperator),
    Dense(Array2<C64>),
}

impl Projector {
    pub fn dim(&self) -> usize {
        match self {
            Projector::Lattice(p) => p.dim(),
            Projector::Dense(p) => p.nrows(),
        }
    }

    pub fn apply(&self, x: &Array2<C64>) -> Array2<C64> {
        match self {
            Projector::Lattice(p) => p.apply(x),
            Projector::Dense(p) => p.dot(x),
        }
    }

    pub fn to_dense(&self) -> Array2<C64> {
        match self {
            Projector::Lattice(p) => p.to_dense(),
            Projector::Dense(p) => p.clone(),
        }
    }
}

/// Spectral projection onto eigenvalues below `mu` of a Hermitian operator.
pub fn spectral_projection_below(h: &LatticeOperator, mu: f64) -> Result<Projector> {
    let (w, v) = eigh(&h.to_dense())?;
    let cols: Vec<usize> = (0..w.len()).filter(|&i| w[i] < mu).collect();
    let occ = v.select(Axis(1), &cols);
    Ok(Projector::Dense(occ.dot(&dagger(&occ))))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexOptions {
    /// Width of the outer shell left out of the local trace.
    pub shell: usize,
    /// Fedosov power; default max(1, ceil(d/2) + 1).
    pub power: Option<usize>,
    pub round_tol: f64,
    pub kernel_tol: f64,
    /// Outer-shell depth and weight used to discard boundary kernel vectors.
    pub boundary_depth: usize,
    pub boundary_threshold: f64,
}

impl Default for IndexOptions {
    fn default() -> Self {
        IndexOptions { shell: 2, power: None, round_tol: 0.2, kernel_tol: 1e-6, boundary_depth: 2, boundary_threshold: 0.5 }
    }
}

pub fn fedosov_power(d: usize) -> usize {
    1usize.max(d.div_ceil(2) + 1)
}

enum Parametrix {
    Adjoint(LatticeOperator),
    Inverse(BandedLu),
}

impl Parametrix {
    fn apply(&self, x: &Array2<C64>) -> Result<Array2<C64>> {
        match self {
            Parametrix::Adjoint(u) => Ok(u.apply(x)),
            Parametrix::Inverse(lu) => lu.solve(x, false),
        }
    }
}

/// Local Fedosov estimate of Ind(P U P) on Ran P:
/// Tr_loc (P - P U' P U P)^q - Tr_loc (P - P U P U' P)^q with U' = U^*
/// for unitary U and U^{-1} otherwise, traced over interior regions.
pub fn index_compression(p: &Projector, u: &LatticeOperator, opts: &IndexOptions) -> Result<IndexResult> {
    let lat = &u.lattice;
    if p.dim() != u.dim() {
        return Err(Error::Index("projection and operator act on different spaces".into()));
    }
    let fiber = u.fiber();
    let q = opts.power.unwrap_or_else(|| fedosov_power(lat.d));
    let outer = lat.radius as f64 - opts.shell as f64;
    if outer < 1.0 {
        return Err(Error::Index(format!("box radius {} too small for shell {}", lat.radius, opts.shell)));
    }
    let radii = [outer, outer - 1.0];
    let par = if u.flags.unitary || u.is_unitary(1e-10, 0) {
        Parametrix::Adjoint(u.adjoint())
    } else {
        Parametrix::Inverse(u.to_banded().factor()?)
    };
    let cols = lat.region_indices(radii[0], fiber);
    if cols.is_empty() {
        return Err(Error::Index("empty trace region".into()));
    }
    let n = u.dim();
    // X = P - P U' P U P, Y = P - P U P U' P applied to unit columns
    let fed = |e: &Array2<C64>| -> Result<Array2<C64>> {
        let step = |x: &Array2<C64>, first_u: bool| -> Result<Array2<C64>> {
            let px = p.apply(x);
            let inner = if first_u { u.apply(&px) } else { par.apply(&px)? };
            let pin = p.apply(&inner);
            let outer = if first_u { par.apply(&pin)? } else { u.apply(&pin) };
            Ok(&px - &p.apply(&outer))
        };
        let mut x = e.clone();
        let mut y = e.clone();
        for _ in 0..q {
            x = step(&x, true)?;
            y = step(&y, false)?;
        }
        Ok(x - y)
    };
    let chunk = 64;
    let diag: Vec<Vec<C64>> = cols
        .par_chunks(chunk)
        .map(|idx| -> Result<Vec<C64>> {
            let mut e = Array2::zeros((n, idx.len()));
            for (k, &i) in idx.iter().enumerate() {
                e[[i, k]] = C64::new(1.0, 0.0);
            }
            let z = fed(&e)?;
            Ok(idx.iter().enumerate().map(|(k, &i)| z[[i, k]]).collect())
        })
        .collect::<Result<_>>()?;
    let diag: Vec<C64> = diag.into_iter().flatten().collect();
    let samples = radii
        .iter()
        .map(|&r| {
            let s: f64 = cols.iter().zip(&diag).filter(|(&i, _)| lat.sup_norm(i / fiber) <= r + 1e-12).map(|(_, z)| z.re).sum();
            (r, s)
        })
        .collect();
    Ok(IndexResult::from_samples(IndexMethod::FedosovTrace, samples, opts.round_tol))
}

/// Kernel minus cokernel dimension of the compression Q^* U Q (Q a basis
/// of Ran P), counting only singular vectors away from the outer shell.
pub fn kernel_count(p: &Projector, u: &LatticeOperator, opts: &IndexOptions) -> Result<IndexResult> {
    let lat = &u.lattice;
    let (w, v) = eigh(&p.to_dense())?;
    let cols: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.5).collect();
    let qb = v.select(Axis(1), &cols);
    let m = dagger(&qb).dot(&u.apply(&qb));
    let (lu, s, vt) = svd(&m)?;
    let bulk = |x: Array1<C64>| lat.shell_weight(&x.to_vec(), opts.boundary_depth) < opts.boundary_threshold;
    let mut ker = 0i64;
    let mut coker = 0i64;
    for (k, &sv) in s.iter().enumerate() {
        if sv < opts.kernel_tol {
            let right = vt.row(k).mapv(|z| z.conj());
            if bulk(qb.dot(&right)) {
                ker += 1;
            }
            if bulk(qb.dot(&lu.column(k))) {
                coker += 1;
            }
        }
    }
    let value = ker - coker;
    Ok(IndexResult {
        value,
        method: IndexMethod::KernelCount,
        raw: value as f64,
        stability: 0.0,
        stable: true,
        samples: vec![(lat.radius as f64, value as f64)],
    })
}

#[cfg(test)]
mod tests;
