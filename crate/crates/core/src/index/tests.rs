use super::*;
use crate::lattice::hardy_projection;
use crate::models::{ModelSpec, SshBoundary, SshChain};

fn ssh_pair() -> (Projector, LatticeOperator) {
    let chain = SshChain::new(50, SshBoundary::Closed).unwrap();
    (Projector::Lattice(hardy_projection(&chain.fermi_phase())), chain.shift(0.0))
}

#[test]
fn identity_has_index_zero() {
    let (p, s) = ssh_pair();
    let id = LatticeOperator::identity(&s.lattice);
    let r = index_compression(&p, &id, &IndexOptions::default()).unwrap();
    assert_eq!(r.value, 0);
    assert!(r.stable && r.raw.abs() < 1e-12);
    assert_eq!(kernel_count(&p, &id, &IndexOptions::default()).unwrap().value, 0);
}

#[test]
fn ssh_shift_has_index_one() {
    let (p, s) = ssh_pair();
    let r = index_compression(&p, &s, &IndexOptions::default()).unwrap();
    assert_eq!(r.value, 1);
    assert!(r.stable);
    assert!((r.raw - 1.0).abs() < 1e-12);
    let k = kernel_count(&p, &s, &IndexOptions::default()).unwrap();
    assert_eq!(k.value, 1);
}

#[test]
fn index_is_additive_on_products() {
    let (p, s) = ssh_pair();
    let s2 = s.mul(&s);
    let s3 = s2.mul(&s.adjoint()).mul(&s.adjoint()).mul(&s.adjoint());
    let o = IndexOptions::default();
    assert_eq!(index_compression(&p, &s2, &o).unwrap().value, 2);
    assert_eq!(index_compression(&p, &s3, &o).unwrap().value, -1);
}

#[test]
fn non_unitary_operator_uses_inverse() {
    // A = S + 0.3 has the same index as S
    let (p, s) = ssh_pair();
    let a = s.add(&LatticeOperator::identity(&s.lattice).scale(C64::new(0.3, 0.0)));
    let r = index_compression(&p, &a, &IndexOptions::default()).unwrap();
    assert_eq!(r.value, 1);
    assert!(r.stable, "{r:?}");
}

#[test]
fn fedosov_power_by_dimension() {
    assert_eq!(fedosov_power(1), 2);
    assert_eq!(fedosov_power(2), 2);
    assert_eq!(fedosov_power(3), 3);
    assert_eq!(fedosov_power(4), 3);
}

fn quick() -> OracleOptions {
    OracleOptions { grid: 61, check_grid: Some(121), ..Default::default() }
}

#[test]
fn chern_oracle_values() {
    assert_eq!(chern_oracle_even(&ModelSpec::even_dirac(2, -10.0).unwrap(), &quick()).unwrap().value, 0);
    assert_eq!(chern_oracle_even(&ModelSpec::even_dirac(2, 1.0).unwrap(), &quick()).unwrap().value, -1);
    assert_eq!(chern_oracle_even(&ModelSpec::even_dirac(2, -1.0).unwrap(), &quick()).unwrap().value, 1);
    assert_eq!(chern_oracle_even(&ModelSpec::even_dirac(2, 3.0).unwrap(), &quick()).unwrap().value, 0);
}

#[test]
fn chern_oracle_rejects_gapless() {
    let r = chern_oracle_even(&ModelSpec::even_dirac(2, 2.0).unwrap(), &quick());
    assert!(matches!(r, Err(Error::Gapless(_))));
}

#[test]
fn winding_oracle_values() {
    let o = quick();
    assert_eq!(winding_oracle_odd(&ModelSpec::ssh(0.0), &o).unwrap().value, 1);
    assert_eq!(winding_oracle_odd(&ModelSpec::ssh(5.0), &o).unwrap().value, 0);
    let o3 = OracleOptions { grid: 41, ..Default::default() };
    assert_eq!(winding_oracle_odd(&ModelSpec::odd_chiral(3, 2.0).unwrap(), &o3).unwrap().value, -1);
    assert_eq!(winding_oracle_odd(&ModelSpec::odd_chiral(3, 0.0).unwrap(), &o3).unwrap().value, 2);
    assert!(matches!(
        winding_oracle_odd(&ModelSpec::odd_chiral(3, 1.0).unwrap(), &o3),
        Err(Error::Gapless(_))
    ));
}

#[test]
fn oracles_reject_wrong_kinds() {
    assert!(chern_oracle_even(&ModelSpec::ssh(0.0), &quick()).is_err());
    assert!(winding_oracle_odd(&ModelSpec::even_dirac(2, 1.0).unwrap(), &quick()).is_err());
}

#[test]
fn link_variables_match_curvature_integral() {
    for m in [1.0, -1.0, 3.0] {
        let spec = ModelSpec::even_dirac(2, m).unwrap();
        let a = chern_analytic(&spec, 60).unwrap();
        let b = chern_number_raw(&spec, 60).unwrap();
        assert!((a - b).abs() < 1e-3, "m={m}: {a} vs {b}");
    }
}

