//! Random finite-dimensional pairs (U_0, F) and the standard path from F to
//! U_0 F U_0^*.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, dagger, expm, eye, svd, C64};

fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |_| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Haar-distributed unitary: polar factor of a complex Ginibre matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    let (u, _, vt) = svd(&gaussian(n, rng)).expect("svd of a Gaussian matrix");
    u.dot(&vt)
}

/// V diag(signs) V^* with both signs present.
pub fn random_symmetry(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    let v = random_unitary(n, rng);
    let plus = rng.gen_range(1..n);
    let d = Array2::from_diag(&ndarray::Array1::from_iter((0..n).map(|i| c(if i < plus { 1.0 } else { -1.0 }, 0.0))));
    v.dot(&d).dot(&dagger(&v))
}

/// Seeded pair (U_0, F) with dimension drawn from the even numbers in
/// [4, max_dim].
pub fn random_pair(seed: u64, max_dim: usize) -> (Array2<C64>, Array2<C64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * rng.gen_range(2..=max_dim / 2);
    let u0 = random_unitary(n, &mut rng);
    let f = random_symmetry(n, &mut rng);
    (u0, f)
}

/// U_alpha = U_0 exp(i pi/2 (F - 1 + alpha U_0^* [F, U_0])).
pub fn standard_path(u0: &Array2<C64>, f: &Array2<C64>, alpha: f64) -> Array2<C64> {
    let n = u0.nrows();
    let comm = f.dot(u0) - u0.dot(f);
    let gen = f - &eye(n) + dagger(u0).dot(&comm).mapv(|z| z * alpha);
    u0.dot(&expm(&gen.mapv(|z| z * c(0.0, PI / 2.0))))
}

/// W_alpha = F U_alpha U_0'^* with U_0' the start of the standard path; runs
/// from F to U_0 F U_0^*.
pub fn standard_flow_operator(u0: &Array2<C64>, f: &Array2<C64>, alpha: f64) -> Array2<C64> {
    let start = standard_path(u0, f, 0.0);
    f.dot(&standard_path(u0, f, alpha)).dot(&dagger(&start))
}
