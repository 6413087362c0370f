//! Wu-Yang monopole: gauge potential, parallel transport along lattice
//! bonds, the phase matrices M_v(x) and the dressed lattice shifts.

mod cache;
pub mod small;

pub use cache::PhaseCache;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::clifford::{det, pin_lift, CliffordRep};
use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, LatticeOperator};
use crate::linalg::{c, eye, kron, op_norm, C64};
use small::SmallMat;

pub const INTEGRATOR_ID: &str = "cf4-magnus-polar-v1";

#[derive(Clone, Debug)]
pub struct GaugeField {
    pub rep: CliffordRep,
    /// Charge alpha scaling the charge-1 potential.
    pub charge: f64,
    gammas: Vec<SmallMat>,
}

impl GaugeField {
    pub fn new(rep: &CliffordRep, charge: f64) -> Self {
        let gammas = rep.gammas.iter().map(SmallMat::from_array).collect();
        GaugeField { rep: rep.clone(), charge, gammas }
    }

    pub fn d(&self) -> usize {
        self.rep.d
    }

    fn gamma(&self, v: &[f64]) -> SmallMat {
        let n = self.rep.fiber_dim;
        let mut out = SmallMat::zeros(n);
        for (g, &vk) in self.gammas.iter().zip(v) {
            if vk != 0.0 {
                for (o, x) in out.a.iter_mut().zip(&g.a) {
                    *o += x * vk;
                }
            }
        }
        out
    }

    /// A_v(x) = (i/2)[gamma_x, gamma_v] / |x|^2 as a small matrix.
    fn potential_small(&self, x: &[f64], v: &[f64]) -> SmallMat {
        let gx = self.gamma(x);
        let gv = self.gamma(v);
        let r2: f64 = x.iter().map(|t| t * t).sum();
        let comm = gx.mul(&gv).add(&gv.mul(&gx).scale(c(-1.0, 0.0)));
        comm.scale(c(0.0, 0.5 / r2))
    }
}

/// A_v(x) = (i/2)[gamma_x, gamma_v] / |x|^2 (charge one).
pub fn gauge_potential(field: &GaugeField, x: &[f64], v: &[f64]) -> Result<Array2<C64>> {
    if x.len() != field.d() || v.len() != field.d() {
        return Err(Error::Monopole("point and direction must have length d".into()));
    }
    if x.iter().all(|&t| t == 0.0) {
        return Err(Error::Monopole("potential is singular at the origin".into()));
    }
    Ok(field.potential_small(x, v).to_array())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeOptions {
    /// Step in lattice units, capped at step * R near the monopole.
    pub step: f64,
    /// Distance from the origin where far transports start.
    pub far_cutoff: f64,
    pub tol: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { step: 0.02, far_cutoff: 1e3, tol: 1e-10 }
    }
}

fn point(x: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(v).map(|(a, b)| a + t * b).collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|t| t * t).sum::<f64>().sqrt()
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Propagator of dN/dt = i alpha A_v(x + t v) N from t0 to t1, applied to
/// `start`. Commutator-free fourth order Magnus steps (two exponentials),
/// polar re-unitarization after every step.
pub fn propagate(
    field: &GaugeField,
    x: &[f64],
    v: &[f64],
    t0: f64,
    t1: f64,
    start: &SmallMat,
    opts: &OdeOptions,
) -> Result<SmallMat> {
    let speed = norm(v);
    if speed == 0.0 || field.charge == 0.0 || t0 == t1 {
        return Ok(start.clone());
    }
    let dir = if t1 > t0 { 1.0 } else { -1.0 };
    let c1 = 0.5 - SQRT3 / 6.0;
    let c2 = 0.5 + SQRT3 / 6.0;
    let a1 = (3.0 - 2.0 * SQRT3) / 12.0;
    let a2 = (3.0 + 2.0 * SQRT3) / 12.0;
    let gen = |t: f64| -> Result<SmallMat> {
        let p = point(x, v, t);
        if norm(&p) < 1e-9 {
            return Err(Error::Monopole("transport line passes through the monopole".into()));
        }
        Ok(field.potential_small(&p, v).scale(c(0.0, field.charge)))
    };
    let mut n = start.clone();
    let mut t = t0;
    while (t1 - t) * dir > 1e-14 {
        let r_now = norm(&point(x, v, t));
        let mut h = opts.step * r_now.min(1.0) / speed;
        let r_end = norm(&point(x, v, t + dir * h));
        if r_end < r_now {
            h = opts.step * r_end.min(1.0) / speed;
        }
        if h < 1e-12 {
            return Err(Error::Monopole("step size underflow near the monopole".into()));
        }
        h = h.min((t1 - t) * dir);
        let hd = dir * h;
        let g1 = gen(t + c1 * hd)?;
        let g2 = gen(t + c2 * hd)?;
        let e_first = g1.scale(c(a2 * hd, 0.0)).add(&g2.scale(c(a1 * hd, 0.0))).expm();
        let e_second = g1.scale(c(a1 * hd, 0.0)).add(&g2.scale(c(a2 * hd, 0.0))).expm();
        n = e_second.mul(&e_first).mul(&n).reunitarize();
        t += hd;
    }
    if n.unitarity_defect() > 10.0 * opts.tol.max(1e-14) {
        return Err(Error::Monopole(format!("non-unitary drift {:.2e}", n.unitarity_defect())));
    }
    Ok(n)
}

/// Line parameter t0 < 0 where |x + t0 v| = far_cutoff.
fn far_start(x: &[f64], v: &[f64], far_cutoff: f64) -> Result<f64> {
    let a: f64 = v.iter().map(|t| t * t).sum();
    let b: f64 = x.iter().zip(v).map(|(p, q)| p * q).sum();
    let cc: f64 = x.iter().map(|t| t * t).sum::<f64>() - far_cutoff * far_cutoff;
    if cc >= 0.0 {
        return Err(Error::Monopole("point lies beyond the far cutoff".into()));
    }
    Ok((-b - (b * b - a * cc).sqrt()) / a)
}

/// N_v(x): transport from the far cutoff (N = start there) to x.
pub fn transport_from(
    field: &GaugeField,
    x: &[f64],
    v: &[f64],
    start: &Array2<C64>,
    opts: &OdeOptions,
) -> Result<Array2<C64>> {
    let t0 = far_start(x, v, opts.far_cutoff)?;
    Ok(propagate(field, x, v, t0, 0.0, &SmallMat::from_array(start), opts)?.to_array())
}

/// N_v(x) with identity initial condition at the far cutoff.
pub fn transport(field: &GaugeField, x: &[f64], v: &[f64], opts: &OdeOptions) -> Result<Array2<C64>> {
    transport_from(field, x, v, &eye(field.rep.fiber_dim), opts)
}

/// M_v(x) = N_v(x) N_v(x+v)^*, computed as the propagator over the segment
/// from x+v back to x (independent of the initial condition of N).
pub fn phase_matrix(field: &GaugeField, x: &[f64], v: &[f64], opts: &OdeOptions) -> Result<Array2<C64>> {
    Ok(phase_small(field, x, v, opts)?.to_array())
}

fn phase_small(field: &GaugeField, x: &[f64], v: &[f64], opts: &OdeOptions) -> Result<SmallMat> {
    propagate(field, x, v, 1.0, 0.0, &SmallMat::eye(field.rep.fiber_dim), opts)
}

/// M_v(x) assembled literally as N_v(x) N_v(x+v)^* from two far transports
/// sharing the initial value `start`.
pub fn phase_matrix_via_far(
    field: &GaugeField,
    x: &[f64],
    v: &[f64],
    start: &Array2<C64>,
    opts: &OdeOptions,
) -> Result<Array2<C64>> {
    let t0 = far_start(x, v, opts.far_cutoff)?;
    let s = SmallMat::from_array(start);
    let nx = propagate(field, x, v, t0, 0.0, &s, opts)?;
    let nxv = propagate(field, x, v, 0.0, 1.0, &nx, opts)?;
    Ok(nx.mul(&nxv.adjoint()).to_array())
}

/// S_k: maps |x + e_k> to M_{e_k}(x)|x>, i.e. <x|S_k|x+e_k> = 1 kron M_{e_k}(x)
/// with an identity on an inner fiber of size `inner`. Bonds leaving the box
/// are dropped (partial isometry on the full box).
pub fn monopole_shift(cache: &PhaseCache, k: usize, inner: usize) -> Result<LatticeOperator> {
    let lat = cache.lattice.with_fiber(inner * cache.lattice.fiber_dim);
    if k >= lat.d {
        return Err(Error::Monopole(format!("direction {k} out of range")));
    }
    let id = eye(inner);
    let mut op = LatticeOperator::zeros(&lat);
    for s in 0..lat.n_sites() {
        let mut n = lat.cells[s].clone();
        n[k] += 1;
        if let Some(t) = lat.site_index(&n) {
            let m = cache.get(k, s).ok_or_else(|| Error::Monopole("cache misses a bond".into()))?;
            op.add_block(s, t, &kron(&id, m));
        }
    }
    Ok(op)
}

/// Plain shift with the same bond convention (alpha = 0).
pub fn plain_shift(lattice: &LatticeBox, k: usize) -> LatticeOperator {
    let f = lattice.fiber_dim;
    let mut op = LatticeOperator::zeros(lattice);
    for s in 0..lattice.n_sites() {
        let mut n = lattice.cells[s].clone();
        n[k] += 1;
        if let Some(t) = lattice.site_index(&n) {
            op.add_block(s, t, &eye(f));
        }
    }
    op
}

fn is_signed_permutation(o: &[Vec<f64>]) -> bool {
    let d = o.len();
    (0..d).all(|i| o[i].iter().filter(|x| **x != 0.0).count() == 1 && o[i].iter().all(|x| *x == 0.0 || x.abs() == 1.0))
        && (0..d).all(|j| (0..d).filter(|&i| o[i][j] != 0.0).count() == 1)
}

/// max over sites x and axes k of |g_O M_{e_k}(O^T x) g_O^* - M_{O e_k}(x)|.
/// Improper O in odd d is tested through the lift of -O (A_v(x) is odd in x
/// and in v, so -O induces the same transformation of the phases).
pub fn covariance_check(cache: &PhaseCache, field: &GaugeField, o: &[Vec<f64>]) -> Result<f64> {
    let lat = &cache.lattice;
    let d = lat.d;
    if o.len() != d || !is_signed_permutation(o) {
        return Err(Error::Monopole("covariance check needs a signed permutation".into()));
    }
    if lat.offset.iter().any(|&x| x != lat.offset[0]) {
        return Err(Error::Monopole("box with mixed offsets is not symmetric".into()));
    }
    let lift_of = if d % 2 == 1 && det(o) < 0.0 {
        o.iter().map(|r| r.iter().map(|x| -x).collect()).collect::<Vec<Vec<f64>>>()
    } else {
        o.to_vec()
    };
    let lift = pin_lift(&field.rep, &lift_of)?;
    let g = SmallMat::from_array(&lift.g_o);
    let gi = g.adjoint();
    let opts = cache.ode.clone();
    let mut worst: f64 = 0.0;
    for s in 0..lat.n_sites() {
        let x = &lat.sites[s];
        // y = O^T x
        let y: Vec<f64> = (0..d).map(|j| (0..d).map(|i| o[i][j] * x[i]).sum()).collect();
        for k in 0..d {
            let mut ek = vec![0.0; d];
            ek[k] = 1.0;
            let oek: Vec<f64> = (0..d).map(|i| o[i][k]).collect();
            let cached = lat
                .site_index(&y.iter().zip(&lat.offset).map(|(a, b)| (a - b).round() as i64).collect::<Vec<_>>())
                .and_then(|ys| cache.get(k, ys).map(SmallMat::from_array));
            let my = match cached {
                Some(m) => m,
                None => phase_small(field, &y, &ek, &opts)?,
            };
            let lhs = g.mul(&my).mul(&gi);
            let rhs = phase_small(field, x, &oek, &opts)?;
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
    }
    Ok(worst)
}

/// Fitted envelope: C' = max R |M_{e_k}(x) - 1| over cached bonds whose
/// starting site has R in [r_min, r_max].
pub fn envelope_constant(cache: &PhaseCache, r_min: f64, r_max: f64) -> Result<f64> {
    let lat = &cache.lattice;
    let id = eye(lat.fiber_dim);
    let mut best: f64 = 0.0;
    for k in 0..lat.d {
        for s in 0..lat.n_sites() {
            let r = lat.euclid(s);
            if r < r_min || r > r_max {
                continue;
            }
            if let Some(m) = cache.get(k, s) {
                best = best.max(r * op_norm(&(m - &id))?);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{build_clifford, signed_permutations};
    use crate::linalg::{is_unitary, max_abs_diff, ZERO};
    use ndarray::array;

    /// Independent closed form: along x + t v the potential is the fixed
    /// matrix K = (i/2)[gamma_x, gamma_v] times 1/|x+tv|^2, so the segment
    /// propagator is exp(-i alpha K I) with I the integral of 1/|x+tv|^2.
    fn segment_closed_form(rep: &CliffordRep, alpha: f64, x: &[f64], v: &[f64]) -> Array2<C64> {
        let a: f64 = v.iter().map(|t| t * t).sum();
        let b: f64 = x.iter().zip(v).map(|(p, q)| p * q).sum();
        let cc: f64 = x.iter().map(|t| t * t).sum();
        let disc = (a * cc - b * b).sqrt();
        let integral = if disc < 1e-14 {
            // parallel line: K vanishes anyway
            0.0
        } else {
            (((a + b) / disc).atan() - (b / disc).atan()) / disc
        };
        let gx = rep.gamma_v(x);
        let gv = rep.gamma_v(v);
        let k = (gx.dot(&gv) - gv.dot(&gx)).mapv(|z| z * c(0.0, 0.5));
        crate::linalg::expm(&k.mapv(|z| z * c(0.0, -alpha * integral)))
    }

    #[test]
    fn potential_examples() {
        let rep = build_clifford(2).unwrap();
        let f = GaugeField::new(&rep, 1.0);
        let a1 = gauge_potential(&f, &[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(max_abs_diff(&a1, &array![[c(1.0, 0.0), ZERO], [ZERO, c(-1.0, 0.0)]]) < 1e-15);
        let a2 = gauge_potential(&f, &[0.0, 1.0], &[0.0, 1.0]).unwrap();
        assert!(max_abs_diff(&a2, &Array2::zeros((2, 2))) < 1e-15);
        let par = gauge_potential(&f, &[0.3, -0.4], &[0.3, -0.4]).unwrap();
        assert!(max_abs_diff(&par, &Array2::zeros((2, 2))) < 1e-15);
        assert!(gauge_potential(&f, &[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn potential_selfadjoint_and_bounded() {
        let rep = build_clifford(3).unwrap();
        let f = GaugeField::new(&rep, 1.0);
        for (x, v) in [([0.5, 1.5, -2.5], [1.0, 0.0, 0.0]), ([3.0, -0.2, 0.1], [0.3, 0.4, -1.0])] {
            let a = gauge_potential(&f, &x, &v).unwrap();
            assert!(crate::linalg::is_hermitian(&a, 1e-14));
            let r = x.iter().map(|t: &f64| t * t).sum::<f64>().sqrt();
            let vn = v.iter().map(|t: &f64| t * t).sum::<f64>().sqrt();
            assert!(op_norm(&a).unwrap() <= vn / r + 1e-12);
        }
    }

    #[test]
    fn zero_charge_gives_identity() {
        let rep = build_clifford(3).unwrap();
        let f = GaugeField::new(&rep, 0.0);
        let opts = OdeOptions::default();
        let m = phase_matrix(&f, &[0.5, 0.5, 0.5], &[1.0, 0.0, 0.0], &opts).unwrap();
        assert_eq!(m, eye(2));
        let n = transport(&f, &[1.5, 0.5, -0.5], &[0.0, 1.0, 0.0], &opts).unwrap();
        assert_eq!(n, eye(2));
    }

    #[test]
    fn segment_matches_closed_form_d3() {
        let rep = build_clifford(3).unwrap();
        let f = GaugeField::new(&rep, 0.7);
        let opts = OdeOptions::default();
        for (x, v) in [
            ([0.5, 0.5, 0.5], [1.0, 0.0, 0.0]),
            ([-0.5, 0.5, -0.5], [0.0, 0.0, 1.0]),
            ([2.5, -1.5, 0.5], [0.0, -1.0, 0.0]),
            ([0.5, -0.5, 0.5], [1.0, 1.0, 0.0]),
        ] {
            let m = phase_matrix(&f, &x, &v, &opts).unwrap();
            let want = segment_closed_form(&rep, 0.7, &x, &v);
            assert!(max_abs_diff(&m, &want) < 1e-7, "{x:?} {v:?} {}", max_abs_diff(&m, &want));
            assert!(is_unitary(&m, 1e-12));
        }
    }

    #[test]
    fn integrator_is_fourth_order() {
        let rep = build_clifford(2).unwrap();
        let f = GaugeField::new(&rep, 1.0);
        let x = [-0.5, 0.5];
        let v = [1.0, 0.0];
        let want = segment_closed_form(&rep, 1.0, &x, &v);
        let err = |h: f64| {
            let o = OdeOptions { step: h, ..Default::default() };
            max_abs_diff(&phase_matrix(&f, &x, &v, &o).unwrap(), &want)
        };
        let (e1, e2) = (err(0.2), err(0.1));
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "observed order {order}");
    }

    #[test]
    fn initial_condition_is_irrelevant() {
        let rep = build_clifford(2).unwrap();
        let f = GaugeField::new(&rep, 0.6);
        let opts = OdeOptions { far_cutoff: 50.0, ..Default::default() };
        let w = crate::linalg::expm(&array![[c(0.0, 0.3), c(0.2, 0.1)], [c(-0.2, 0.1), c(0.0, -0.7)]]);
        for x in [[0.5, 1.5], [-2.5, 0.5]] {
            let a = phase_matrix_via_far(&f, &x, &[1.0, 0.0], &eye(2), &opts).unwrap();
            let b = phase_matrix_via_far(&f, &x, &[1.0, 0.0], &w, &opts).unwrap();
            let seg = phase_matrix(&f, &x, &[1.0, 0.0], &opts).unwrap();
            assert!(max_abs_diff(&a, &b) < 1e-8);
            assert!(max_abs_diff(&a, &seg) < 1e-8);
        }
    }

    #[test]
    fn transport_d2_column_phases() {
        // N_1 along a horizontal line: diag(e^{i a arctan(x1/x2)}, e^{-i ...})
        // up to a constant right factor; compare ratios of two points.
        let rep = build_clifford(2).unwrap();
        let alpha = 0.4;
        let f = GaugeField::new(&rep, alpha);
        let opts = OdeOptions { far_cutoff: 200.0, ..Default::default() };
        let x = [0.5, 1.5];
        let y = [3.5, 1.5];
        let nx = transport(&f, &x, &[1.0, 0.0], &opts).unwrap();
        let ny = transport(&f, &y, &[1.0, 0.0], &opts).unwrap();
        let ratio = nx.dot(&crate::linalg::dagger(&ny));
        let th = |p: &[f64; 2]| (p[0] / p[1]).atan();
        let phi = alpha * (th(&x) - th(&y));
        assert!((ratio[[0, 0]] - c(0.0, phi).exp()).norm() < 1e-8);
        assert!((ratio[[1, 1]] - c(0.0, -phi).exp()).norm() < 1e-8);
    }

    #[test]
    fn group_law_two_steps() {
        let rep = build_clifford(3).unwrap();
        let f = GaugeField::new(&rep, 0.8);
        let opts = OdeOptions::default();
        let x = [0.5, -1.5, 0.5];
        let v = [0.0, 1.0, 0.0];
        let x2: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + b).collect();
        let lhs = phase_matrix(&f, &x, &v, &opts).unwrap().dot(&phase_matrix(&f, &x2, &v, &opts).unwrap());
        let rhs = phase_matrix(&f, &x, &[0.0, 2.0, 0.0], &opts).unwrap();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-6);
    }

    #[test]
    fn covariance_identity_and_swap() {
        let rep = build_clifford(2).unwrap();
        let f = GaugeField::new(&rep, 0.5);
        let lat = LatticeBox::centered(2, 3, rep.fiber_dim).unwrap();
        let cache = PhaseCache::build(&f, &lat, &OdeOptions::default()).unwrap();
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(covariance_check(&cache, &f, &id).unwrap() < 1e-12);
        for o in signed_permutations(2) {
            assert!(covariance_check(&cache, &f, &o).unwrap() < 1e-6);
        }
        let rot = vec![vec![0.6, -0.8], vec![0.8, 0.6]];
        assert!(covariance_check(&cache, &f, &rot).is_err());
    }

    #[test]
    fn shift_at_zero_charge_is_plain() {
        let rep = build_clifford(2).unwrap();
        let f = GaugeField::new(&rep, 0.0);
        let lat = LatticeBox::centered(2, 2, rep.fiber_dim).unwrap();
        let cache = PhaseCache::build(&f, &lat, &OdeOptions::default()).unwrap();
        for k in 0..2 {
            let s = monopole_shift(&cache, k, 1).unwrap();
            assert!(s.max_diff(&plain_shift(&lat, k), 0) == 0.0);
        }
    }
}
