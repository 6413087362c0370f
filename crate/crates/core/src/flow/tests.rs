use std::sync::Arc;

use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linalg::{c, eigh, eye, expm};
use crate::models::{SshBoundary, SshChain};

fn opts() -> FlowOptions {
    FlowOptions { parallel: false, ..Default::default() }
}

fn herm_path(f: impl Fn(f64) -> Array2<C64> + Send + Sync + 'static) -> DenseHermitianPath {
    DenseHermitianPath { op: Arc::new(move |a| Ok(f(a))), level: 0.0, labeler: None, mode: FlowMode::SelfadjointThroughMu }
}

fn random_herm(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    let a = Array2::from_shape_fn((n, n), |_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    (&a + &a.t().mapv(|z| z.conj())).mapv(|z| z * 0.5)
}

fn negatives(h: &Array2<C64>) -> i64 {
    eigh(h).unwrap().0.iter().filter(|&&x| x < 0.0).count() as i64
}

#[test]
fn constant_path_has_no_flow() {
    let p = herm_path(|_| array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-2.0, 0.0)]]);
    let r = sf_selfadjoint(&p, &opts()).unwrap();
    assert_eq!(r.net_flow, 0);
    assert!(r.crossings.is_empty());
}

#[test]
fn scalar_upward_crossing() {
    let p = herm_path(|a| array![[c(2.0 * a - 1.0, 0.0)]]);
    let r = sf_selfadjoint(&p, &opts()).unwrap();
    assert_eq!(r.net_flow, 1);
    assert_eq!(r.crossings.len(), 1);
    assert!((r.crossings[0].alpha - 0.5).abs() <= 1e-4);
}

#[test]
fn singular_endpoint_is_rejected() {
    let p = herm_path(|a| array![[c(a, 0.0)]]);
    assert!(matches!(sf_selfadjoint(&p, &opts()), Err(Error::EndpointNotInvertible { .. })));
}

#[test]
fn exact_degenerate_crossing_on_grid_point() {
    // two levels crossing the line simultaneously at alpha = 1/2 in opposite directions
    let p = herm_path(|a| {
        let x = 2.0 * a - 1.0;
        array![[c(x, 0.0), c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-x, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0), c(x, 0.0)]]
    });
    let r = sf_selfadjoint(&p, &opts()).unwrap();
    assert_eq!(r.net_flow, 1);
    assert_eq!(r.diagnostics.gross_crossings, 3);
}

#[test]
fn boundary_crossings_are_filtered() {
    let mut p = herm_path(|a| array![[c(2.0 * a - 1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0 - 2.0 * a, 0.0)]]);
    p.labeler = Some(Arc::new(|v: &[C64]| v[1].norm_sqr()));
    let r = sf_selfadjoint(&p, &opts()).unwrap();
    assert_eq!(r.net_flow, 1);
    assert_eq!(r.net_flow_all, 0);
}

#[test]
fn ssh_unitary_flow_is_one() {
    let chain = SshChain::new(50, SshBoundary::Closed).unwrap();
    let f = chain.fermi_phase().to_dense();
    let s0 = chain.shift(0.0).to_dense();
    let path = Arc::new(move |a: f64| Ok(f.dot(&chain.shift(a).to_dense()).dot(&dagger(&s0))));
    let r = sf_unitary(path, None, &opts()).unwrap();
    assert_eq!(r.net_flow, 1);
    assert_eq!(r.mode, FlowMode::UnitaryRealpart);
}

#[test]
fn constant_unitary_path() {
    let f = Array2::from_diag(&ndarray::arr1(&[c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)]));
    let r = sf_unitary(Arc::new(move |_| Ok(f.clone())), None, &opts()).unwrap();
    assert_eq!(r.net_flow, 0);
}

#[test]
fn non_unitary_entry_is_rejected() {
    let r = sf_unitary(Arc::new(|a| Ok(eye(2).mapv(|z| z * (1.0 + a)))), None, &opts());
    assert!(r.is_err());
}

#[test]
fn normal_path_agrees_with_unitary_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = random_herm(5, &mut rng);
    let f = Array2::from_diag(&ndarray::arr1(&[c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)]));
    let fu = f.clone();
    let w = Arc::new(move |a: f64| Ok(fu.dot(&expm(&h.mapv(|z| z * c(0.0, 3.0 * a))))));
    let ru = sf_unitary(w.clone(), None, &opts()).unwrap();
    let gen = DenseGeneralPath { op: w, labeler: None };
    let rn = sf_nonnormal(&gen, &opts()).unwrap();
    assert_eq!(ru.net_flow, rn.net_flow);
}

#[test]
fn nonnormal_triangular_path() {
    // eigenvalues 2a-1 and -1 with a large non-normal coupling
    let p = DenseGeneralPath {
        op: Arc::new(|a| Ok(array![[c(2.0 * a - 1.0, 0.0), c(5.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]])),
        labeler: None,
    };
    assert_eq!(sf_nonnormal(&p, &opts()).unwrap().net_flow, 1);
}

#[test]
fn complex_pair_through_imaginary_axis() {
    // eigenvalues (2a-1) +- i, a conjugate pair crossing together
    let p = DenseGeneralPath {
        op: Arc::new(|a| Ok(array![[c(2.0 * a - 1.0, 0.0), c(1.0, 0.0)], [c(-1.0, 0.0), c(2.0 * a - 1.0, 0.0)]])),
        labeler: None,
    };
    assert_eq!(sf_nonnormal(&p, &opts()).unwrap().net_flow, 2);
}

#[test]
fn trajectories_csv() {
    let p = herm_path(|a| array![[c(2.0 * a - 1.0, 0.0)]]);
    let (_, path) = sf_with_trajectories(&p, &FlowOptions { grid_points: 5, ..opts() }).unwrap();
    let mut buf = Vec::new();
    path.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("alpha,track,re,im,bulk\n"));
    assert_eq!(path.n_tracks(), 1);
}

#[test]
fn polar_homotopy_examples() {
    let two = eye(3).mapv(|z| z * 2.0);
    let h = polar_homotopy(&two, 0.25).unwrap();
    assert!(crate::linalg::max_abs_diff(&h, &eye(3).mapv(|z| z * 2f64.powf(0.75))) < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = expm(&random_herm(4, &mut rng).mapv(|z| z * c(0.0, 1.0)));
    for s in [0.0, 0.5, 1.0] {
        assert!(crate::linalg::max_abs_diff(&polar_homotopy(&u, s).unwrap(), &u) < 1e-10);
    }
    let a = random_herm(4, &mut rng) + eye(4).mapv(|z| z * 3.0);
    assert!(crate::linalg::max_abs_diff(&polar_homotopy(&a, 0.0).unwrap(), &a) < 1e-10);
    assert!(is_unitary(&polar_homotopy(&a, 1.0).unwrap(), 1e-10));
    let sing = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
    assert!(polar_homotopy(&sing, 0.5).is_err());
}

fn interpolate(h0: Array2<C64>, h1: Array2<C64>) -> DenseHermitianPath {
    herm_path(move |a| h0.mapv(|z| z * (1.0 - a)) + h1.mapv(|z| z * a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_counts_lost_negative_eigenvalues(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h0 = random_herm(5, &mut rng);
        let h1 = random_herm(5, &mut rng);
        prop_assume!(eigh(&h0).unwrap().0.iter().all(|x| x.abs() > 1e-3));
        prop_assume!(eigh(&h1).unwrap().0.iter().all(|x| x.abs() > 1e-3));
        let expect = negatives(&h0) - negatives(&h1);
        let r = sf_selfadjoint(&interpolate(h0, h1), &FlowOptions { grid_points: 21, ..opts() }).unwrap();
        prop_assert_eq!(r.net_flow, expect);
    }

    #[test]
    fn reversal_and_concatenation(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hs: Vec<_> = (0..3).map(|_| random_herm(4, &mut rng)).collect();
        for h in &hs {
            prop_assume!(eigh(h).unwrap().0.iter().all(|x| x.abs() > 1e-3));
        }
        let o = FlowOptions { grid_points: 21, ..opts() };
        let fwd = sf_selfadjoint(&interpolate(hs[0].clone(), hs[1].clone()), &o).unwrap().net_flow;
        let back = sf_selfadjoint(&interpolate(hs[1].clone(), hs[0].clone()), &o).unwrap().net_flow;
        prop_assert_eq!(fwd, -back);
        let second = sf_selfadjoint(&interpolate(hs[1].clone(), hs[2].clone()), &o).unwrap().net_flow;
        let (a, b, cc) = (hs[0].clone(), hs[1].clone(), hs[2].clone());
        let joined = herm_path(move |t| {
            if t <= 0.5 {
                a.mapv(|z| z * (1.0 - 2.0 * t)) + b.mapv(|z| z * 2.0 * t)
            } else {
                b.mapv(|z| z * (2.0 - 2.0 * t)) + cc.mapv(|z| z * (2.0 * t - 1.0))
            }
        });
        let whole = sf_selfadjoint(&joined, &FlowOptions { grid_points: 41, ..o }).unwrap().net_flow;
        prop_assert_eq!(whole, fwd + second);
    }
}
