//! Momentum-space invariants of translation-invariant models.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{IndexMethod, IndexResult};
use crate::error::{Error, Result};
use crate::linalg::{dagger, eigh, inverse, op_norm, svd, C64};
use crate::models::ModelSpec;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    /// Grid points per axis for d <= 3.
    pub grid: usize,
    /// Second grid for the consistency check (d <= 2).
    pub check_grid: Option<usize>,
    /// Grid for d = 4.
    pub grid_d4: usize,
    /// Maximal distance of an accepted raw value from an integer.
    pub integer_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { grid: 201, check_grid: Some(401), grid_d4: 16, integer_tol: 0.05 }
    }
}

fn grid_point(idx: usize, n: usize, d: usize) -> Vec<f64> {
    let mut k = vec![0.0; d];
    let mut r = idx;
    for j in (0..d).rev() {
        k[j] = 2.0 * PI * (r % n) as f64 / n as f64;
        r /= n;
    }
    k
}

/// Rejects grids on which the gap could close between grid points: the
/// smallest gap must exceed L h sqrt(d) / 2 with L the largest derivative
/// norm sum.
fn certify(gaps: &[f64], slopes: &[f64], n: usize, d: usize) -> Result<f64> {
    let gmin = gaps.iter().cloned().fold(f64::INFINITY, f64::min);
    let lip = slopes.iter().cloned().fold(0.0, f64::max);
    let h = 2.0 * PI / n as f64;
    let bound = lip * h * (d as f64).sqrt() / 2.0;
    if gmin <= bound {
        return Err(Error::Gapless(format!("gap {gmin:.3e} not certified above {bound:.3e} on a {n}^{d} grid")));
    }
    Ok(gmin)
}

fn slope(spec: &ModelSpec, k: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for j in 0..spec.d {
        s += op_norm(&spec.symbol_derivative(k, j))?;
    }
    Ok(s)
}

fn occupied(h: &Array2<C64>, mu: f64) -> Result<(Array2<C64>, f64, Array2<C64>, Vec<f64>)> {
    let (w, v) = eigh(h)?;
    let occ: Vec<usize> = (0..w.len()).filter(|&i| w[i] < mu).collect();
    let gap = w.iter().map(|x| (x - mu).abs()).fold(f64::INFINITY, f64::min);
    Ok((v.select(Axis(1), &occ), gap, v, w.to_vec()))
}

/// Chern number of the Fermi projection. d = 2: lattice link variables,
/// returned with the sign of (i/2pi) int tr P[d1 P, d2 P]. d = 4: the
/// same normalization of the second Chern character with analytic
/// derivatives of P.
pub fn chern_number_raw(spec: &ModelSpec, n: usize) -> Result<f64> {
    let mu = spec.fermi_level;
    match spec.d {
        2 => {
            let pts: Vec<Result<(Array2<C64>, f64, f64)>> = (0..n * n)
                .into_par_iter()
                .map(|i| {
                    let k = grid_point(i, n, 2);
                    let (occ, gap, _, _) = occupied(&spec.symbol(&k), mu)?;
                    Ok((occ, gap, slope(spec, &k)?))
                })
                .collect();
            let mut occ = Vec::with_capacity(n * n);
            let mut gaps = Vec::with_capacity(n * n);
            let mut slopes = Vec::with_capacity(n * n);
            for p in pts {
                let (o, g, s) = p?;
                occ.push(o);
                gaps.push(g);
                slopes.push(s);
            }
            certify(&gaps, &slopes, n, 2)?;
            let link = |a: usize, b: usize| -> C64 {
                let m = dagger(&occ[a]).dot(&occ[b]);
                let z = det(&m);
                z / z.norm()
            };
            let at = |i: usize, j: usize| (i % n) * n + (j % n);
            let total: f64 = (0..n * n)
                .into_par_iter()
                .map(|idx| {
                    let (i, j) = (idx / n, idx % n);
                    let u = link(at(i, j), at(i + 1, j)) * link(at(i + 1, j), at(i + 1, j + 1))
                        / (link(at(i, j + 1), at(i + 1, j + 1)) * link(at(i, j), at(i, j + 1)));
                    u.arg()
                })
                .sum();
            Ok(-total / (2.0 * PI))
        }
        4 => chern_analytic(spec, n),
        d => Err(Error::Index(format!("Chern oracle supports d = 2 and 4, got {d}"))),
    }
}

fn det(m: &Array2<C64>) -> C64 {
    let n = m.nrows();
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut a = m.clone();
    let mut out = C64::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[[x, col]].norm().partial_cmp(&a[[y, col]].norm()).unwrap()).unwrap();
        if a[[piv, col]].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != col {
            for j in 0..n {
                a.swap([piv, j], [col, j]);
            }
            out = -out;
        }
        let p = a[[col, col]];
        out *= p;
        for r in col + 1..n {
            let f = a[[r, col]] / p;
            for j in col..n {
                let v = a[[col, j]];
                a[[r, j]] -= f * v;
            }
        }
    }
    out
}

fn permutations(d: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..d).collect();
    fn rec(k: usize, p: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, f64)>) {
        if k == p.len() {
            let mut sign = 1.0;
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    if p[i] > p[j] {
                        sign = -sign;
                    }
                }
            }
            out.push((p.clone(), sign));
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            rec(k + 1, p, out);
            p.swap(k, i);
        }
    }
    rec(0, &mut p, &mut out);
    out
}

/// (2 pi i)^{d/2} / (d/2)! (2 pi)^{-d} int sum_sigma sgn tr P d_s1 P ... d_sd P,
/// with the derivatives of P from first-order perturbation theory.
pub fn chern_analytic(spec: &ModelSpec, n: usize) -> Result<f64> {
    let mu = spec.fermi_level;
    let d = spec.d;
    let perms = permutations(d);
    let vals: Vec<Result<(C64, f64, f64)>> = (0..n.pow(d as u32))
        .into_par_iter()
        .map(|i| {
            let k = grid_point(i, n, d);
            let (occ, gap, v, w) = occupied(&spec.symbol(&k), mu)?;
            let p = occ.dot(&dagger(&occ));
            let dp: Vec<Array2<C64>> = (0..d)
                .map(|j| {
                    let dh = v.t().mapv(|z| z.conj()).dot(&spec.symbol_derivative(&k, j)).dot(&v);
                    let m = w.len();
                    let mut g = Array2::zeros((m, m));
                    for a in 0..m {
                        for b in 0..m {
                            let (oa, ob) = (w[a] < mu, w[b] < mu);
                            if oa != ob {
                                g[[a, b]] = dh[[a, b]] / (w[a] - w[b]) * if oa { 1.0 } else { -1.0 };
                            }
                        }
                    }
                    v.dot(&g).dot(&dagger(&v))
                })
                .collect();
            let mut s = C64::new(0.0, 0.0);
            for (perm, sign) in &perms {
                let mut m = p.clone();
                for &j in perm {
                    m = m.dot(&dp[j]);
                }
                s += m.diag().sum() * *sign;
            }
            Ok((s, gap, slope(spec, &k)?))
        })
        .collect();
    let mut total = C64::new(0.0, 0.0);
    let mut gaps = Vec::new();
    let mut slopes = Vec::new();
    for v in vals {
        let (s, g, l) = v?;
        total += s;
        gaps.push(g);
        slopes.push(l);
    }
    certify(&gaps, &slopes, n, d)?;
    let half = d / 2;
    let cell = (2.0 * PI / n as f64).powi(d as i32);
    let fact: f64 = (1..=half).map(|x| x as f64).product();
    let pref = C64::new(0.0, 2.0 * PI).powi(half as i32) / fact / (2.0 * PI).powi(d as i32);
    Ok((pref * total * cell).re)
}

fn accept(raw: f64, tol: f64) -> Result<i64> {
    let v = raw.round();
    if (raw - v).abs() > tol {
        return Err(Error::Gapless(format!("raw invariant {raw:.6} is not an integer")));
    }
    Ok(v as i64)
}

/// Chern number of the Fermi projection of a translation-invariant model.
pub fn chern_oracle_even(spec: &ModelSpec, opts: &OracleOptions) -> Result<IndexResult> {
    if spec.is_chiral() || spec.d % 2 != 0 {
        return Err(Error::Index("Chern oracle needs an even-dimensional selfadjoint model".into()));
    }
    let n = if spec.d == 4 { opts.grid_d4 } else { opts.grid };
    let raw = chern_number_raw(spec, n)?;
    let value = accept(raw, opts.integer_tol)?;
    let mut samples = vec![(n as f64, raw)];
    if spec.d == 2 {
        if let Some(m) = opts.check_grid {
            let r2 = chern_number_raw(spec, m)?;
            if accept(r2, opts.integer_tol)? != value {
                return Err(Error::Gapless(format!("Chern number differs between grids {n} and {m}")));
            }
            samples.push((m as f64, r2));
        }
    }
    Ok(IndexResult::from_samples(IndexMethod::OracleMomentum, samples, opts.integer_tol))
}

/// Winding number of the chiral block A(k). d = 1: winding of det A;
/// d = 3: (-1) (1/24pi^2) int eps tr (A^-1 dA)^3, the sign matching the
/// lattice orientation of the Clifford volume element.
pub fn winding_number_raw(spec: &ModelSpec, n: usize) -> Result<f64> {
    let d = spec.d;
    let pts: Vec<Result<(f64, f64, C64, Option<f64>)>> = (0..n.pow(d as u32))
        .into_par_iter()
        .map(|i| {
            let k = grid_point(i, n, d);
            let a = spec.symbol(&k);
            let (_, s, _) = svd(&a)?;
            let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let l = slope(spec, &k)?;
            let dens = if d == 3 && smin > 0.0 {
                let ai = inverse(&a)?;
                let g: Vec<Array2<C64>> = (0..3).map(|j| ai.dot(&spec.symbol_derivative(&k, j))).collect();
                let mut t = C64::new(0.0, 0.0);
                for (perm, sign) in permutations(3) {
                    t += g[perm[0]].dot(&g[perm[1]]).dot(&g[perm[2]]).diag().sum() * sign;
                }
                Some(t.re)
            } else {
                None
            };
            Ok((smin, l, det(&a), dens))
        })
        .collect();
    let mut gaps = Vec::new();
    let mut slopes = Vec::new();
    let mut dets = Vec::new();
    let mut dens = 0.0;
    for p in pts {
        let (s, l, z, t) = p?;
        gaps.push(s);
        slopes.push(l);
        dets.push(z);
        dens += t.unwrap_or(0.0);
    }
    certify(&gaps, &slopes, n, d)?;
    match d {
        1 => {
            let w: f64 = (0..n).map(|i| (dets[(i + 1) % n] / dets[i]).arg()).sum();
            Ok(w / (2.0 * PI))
        }
        3 => {
            let cell = (2.0 * PI / n as f64).powi(3);
            Ok(-dens * cell / (24.0 * PI * PI))
        }
        _ => Err(Error::Index(format!("winding oracle supports d = 1 and 3, got {d}"))),
    }
}

/// Winding number of a translation-invariant chiral model.
pub fn winding_oracle_odd(spec: &ModelSpec, opts: &OracleOptions) -> Result<IndexResult> {
    if !spec.is_chiral() || spec.d % 2 != 1 {
        return Err(Error::Index("winding oracle needs an odd-dimensional chiral model".into()));
    }
    if spec.d > 3 {
        return Err(Error::Index(format!("winding oracle supports d = 1 and 3, got {}", spec.d)));
    }
    let raw = winding_number_raw(spec, opts.grid)?;
    accept(raw, opts.integer_tol)?;
    let mut samples = vec![(opts.grid as f64, raw)];
    if spec.d == 1 {
        if let Some(m) = opts.check_grid {
            samples.push((m as f64, winding_number_raw(spec, m)?));
        }
    }
    let r = IndexResult::from_samples(IndexMethod::OracleMomentum, samples, opts.integer_tol);
    if !r.stable {
        return Err(Error::Gapless("winding number differs between grids".into()));
    }
    Ok(r)
}
