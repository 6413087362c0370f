//! Block Krylov eigensolver for the eigenvalues of largest modulus of an
//! operator given only through its action. Used in shift-invert mode.

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{eig, eigh, C64, ZERO};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct KrylovOptions {
    /// Number of wanted eigenpairs.
    pub nev: usize,
    /// Block size; must exceed the largest multiplicity of a wanted eigenvalue.
    pub block: usize,
    /// Relative residual tolerance on the original problem.
    pub tol: f64,
    /// Upper bound on the basis size before giving up.
    pub max_basis: usize,
    pub seed: u64,
    /// Operator known to be Hermitian (Rayleigh quotient symmetrized).
    pub hermitian: bool,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { nev: 16, block: 4, tol: 1e-9, max_basis: 600, seed: 0x5eed, hermitian: false }
    }
}

pub struct EigWindow {
    /// Ritz values of the operator (not yet mapped back through the shift).
    pub theta: Vec<C64>,
    /// Unit Ritz vectors as columns.
    pub vectors: Array2<C64>,
}

/// Orthogonalize `w` against the columns of `q[.., ..m]` (classical
/// Gram-Schmidt, two passes). Returns the remaining norm.
fn orthogonalize(q: &Array2<C64>, m: usize, w: &mut Array1<C64>) -> f64 {
    orthogonalize_range(q, 0, m, w)
}

fn orthogonalize_range(q: &Array2<C64>, lo: usize, hi: usize, w: &mut Array1<C64>) -> f64 {
    let basis = q.slice(s![.., lo..hi]);
    for _ in 0..2 {
        let coeff = basis.t().mapv(|z| z.conj()).dot(&*w);
        let proj = basis.dot(&coeff);
        *w -= &proj;
    }
    w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Array1<C64> {
    Array1::from_iter((0..n).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)))
}

/// Block Krylov basis that can be grown in place.
struct Basis {
    q: Array2<C64>,
    z: Array2<C64>,
    filled: usize,
    applied: usize,
    p: usize,
    rng: ChaCha8Rng,
}

impl Basis {
    fn new(n: usize, cap: usize, opts: &KrylovOptions) -> Basis {
        let p = opts.block.min(cap).max(1);
        let mut b = Basis {
            q: Array2::zeros((n, cap)),
            z: Array2::zeros((n, cap)),
            filled: 0,
            applied: 0,
            p,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
        };
        for _ in 0..p {
            let mut v = random_vec(n, &mut b.rng);
            let nv = orthogonalize(&b.q, b.filled, &mut v);
            b.q.column_mut(b.filled).assign(&v.mapv(|x| x / nv));
            b.filled += 1;
        }
        b
    }

    /// Extend until `m` columns have images.
    fn grow(&mut self, apply: &dyn Fn(&Array2<C64>) -> Result<Array2<C64>>, m: usize) -> Result<()> {
        let n = self.q.nrows();
        let cap = self.q.ncols();
        while self.applied < m.min(self.filled) {
            let hi = (self.applied + self.p).min(self.filled);
            let block = self.q.slice(s![.., self.applied..hi]).to_owned();
            let mut images = apply(&block)?;
            self.z.slice_mut(s![.., self.applied..hi]).assign(&images);
            self.applied = hi;
            let take = images.ncols().min(cap - self.filled);
            if take == 0 {
                continue;
            }
            let scales: Vec<f64> =
                images.columns().into_iter().map(|c| c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()).collect();
            // block Gram-Schmidt against the basis, two passes
            let basis = self.q.slice(s![.., ..self.filled]);
            for _ in 0..2 {
                let coeff = basis.t().mapv(|x| x.conj()).dot(&images);
                images -= &basis.dot(&coeff);
            }
            let start = self.filled;
            for j in 0..take {
                let mut w = images.column(j).to_owned();
                let mut nw = orthogonalize_range(&self.q, start, self.filled, &mut w);
                if nw <= 1e-10 * scales[j].max(1e-300) {
                    // invariant subspace reached: continue with a fresh direction
                    w = random_vec(n, &mut self.rng);
                    nw = orthogonalize(&self.q, self.filled, &mut w);
                }
                self.q.column_mut(self.filled).assign(&w.mapv(|x| x / nw));
                self.filled += 1;
            }
        }
        Ok(())
    }

    /// Rayleigh-Ritz on the columns that have images.
    fn ritz(&self, opts: &KrylovOptions) -> Result<EigWindow> {
        let n = self.q.nrows();
        let m = self.applied;
        let q = self.q.slice(s![.., ..m]);
        let g = q.t().mapv(|x| x.conj()).dot(&self.z.slice(s![.., ..m]));
        let (theta, sv) = if opts.hermitian {
            let (w, v) = eigh(&g)?;
            (w.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>(), v)
        } else {
            let (w, v) = eig(&g)?;
            (w.to_vec(), v)
        };
        let mut order: Vec<usize> = (0..theta.len()).collect();
        order.sort_by(|&a, &b| theta[b].norm().partial_cmp(&theta[a].norm()).unwrap());
        let keep = opts.nev.min(order.len());
        let mut vecs = Array2::<C64>::zeros((n, keep));
        let mut vals = Vec::with_capacity(keep);
        for (k, &idx) in order.iter().take(keep).enumerate() {
            let mut v = q.dot(&sv.column(idx));
            let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            v.mapv_inplace(|x| x / nv);
            vecs.column_mut(k).assign(&v);
            vals.push(theta[idx]);
        }
        Ok(EigWindow { theta: vals, vectors: vecs })
    }
}

/// Eigenpairs of largest |theta| of `apply`, accepted once `residual` (for
/// each Ritz pair, on the caller's original problem) is below `opts.tol`.
/// The basis grows until convergence or `max_basis`.
pub fn largest_modulus(
    n: usize,
    apply: &dyn Fn(&Array2<C64>) -> Result<Array2<C64>>,
    residual: &dyn Fn(C64, &Array1<C64>) -> Result<f64>,
    opts: &KrylovOptions,
) -> Result<EigWindow> {
    if n == 0 {
        return Ok(EigWindow { theta: vec![], vectors: Array2::zeros((0, 0)) });
    }
    let cap = opts.max_basis.min(n).max(1);
    let mut m = (2 * opts.nev + 4 * opts.block).max(32).min(cap);
    let mut basis = Basis::new(n, cap, opts);
    loop {
        basis.grow(apply, m)?;
        let win = basis.ritz(opts)?;
        let mut worst: f64 = 0.0;
        for (k, &t) in win.theta.iter().enumerate() {
            let r = residual(t, &win.vectors.column(k).to_owned())?;
            worst = worst.max(r);
            if worst > opts.tol {
                break;
            }
        }
        if worst <= opts.tol || m == n {
            return Ok(win);
        }
        if m >= cap {
            return Err(Error::Linalg(format!(
                "krylov: no convergence with basis {m} (worst residual {worst:.2e})"
            )));
        }
        m = (m * 3 / 2 + opts.block).min(cap);
    }
}

/// Exact zero vector helper for callers assembling blocks.
pub fn zeros(n: usize, k: usize) -> Array2<C64> {
    Array2::from_elem((n, k), ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, inverse};

    #[test]
    fn finds_eigenvalues_nearest_shift() {
        // diagonal with a doubly degenerate pair close to the shift
        let n = 120;
        let diag: Vec<f64> = (0..n).map(|k| if k == 7 || k == 8 { 0.013 } else { k as f64 * 0.1 - 3.05 }).collect();
        let a = Array2::from_shape_fn((n, n), |(i, j)| if i == j { c(diag[i], 0.0) } else { ZERO });
        let inv = inverse(&a).unwrap();
        let apply = |x: &Array2<C64>| Ok(inv.dot(x));
        let resid = |t: C64, v: &Array1<C64>| {
            let lam = C64::new(1.0, 0.0) / t;
            Ok((a.dot(v) - v.mapv(|x| x * lam)).iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt())
        };
        let opts = KrylovOptions { nev: 4, hermitian: true, ..Default::default() };
        let win = largest_modulus(n, &apply, &resid, &opts).unwrap();
        let mut lams: Vec<f64> = win.theta.iter().map(|t| 1.0 / t.re).collect();
        lams.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((lams[0] - (-0.05)).abs() < 1e-9 || (lams[0] - 0.013).abs() < 1e-9);
        assert_eq!(lams.iter().filter(|l| (*l - 0.013).abs() < 1e-9).count(), 2);
    }
}
