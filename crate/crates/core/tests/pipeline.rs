//! End-to-end checks on small boxes: spectral flow, lattice index and
//! momentum-space oracle agree.

use std::sync::Arc;

use monoflow::flow::{
    sf_nonnormal, sf_selfadjoint, unitary_realpart_path, DenseBlockPath, DenseHermitianPath, FlowMode, FlowOptions,
    Labeler,
};
use monoflow::index::{
    chern_oracle_even, index_compression, kernel_count, spectral_projection_below, winding_oracle_odd, IndexOptions,
    OracleOptions, Projector,
};
use monoflow::lattice::{hardy_projection, LatticeBox};
use monoflow::linalg::{dagger, inverse, C64};
use monoflow::models::{chirind_block, ChirIndVariant, LatticeModel, ModelSpec, SshBoundary, SshChain};
use monoflow::monopole::OdeOptions;

fn shell(lat: &LatticeBox) -> Labeler {
    let lat = lat.clone();
    Arc::new(move |x: &[C64]| lat.shell_weight(x, 2))
}

#[test]
fn ssh_flow_index_oracle() {
    let chain = SshChain::new(12, SshBoundary::Closed).unwrap();
    let f = chain.fermi_phase().to_dense();
    let s0 = chain.shift(0.0).to_dense();
    let ch = chain.clone();
    let path = unitary_realpart_path(
        Arc::new(move |a| Ok(f.dot(&ch.shift(a).to_dense()).dot(&dagger(&s0)))),
        Some(shell(&chain.lattice)),
    );
    let r = sf_selfadjoint(&path, &FlowOptions::default()).unwrap();
    assert_eq!(r.net_flow, 1);
    let pi = Projector::Lattice(hardy_projection(&chain.fermi_phase()));
    let ind = index_compression(&pi, &chain.shift(0.0), &IndexOptions::default()).unwrap();
    assert_eq!((ind.value, ind.stable), (1, true));
    assert_eq!(kernel_count(&pi, &chain.shift(0.0), &IndexOptions::default()).unwrap().value, 1);
    let w = winding_oracle_odd(&ModelSpec::ssh(0.0), &OracleOptions::default()).unwrap();
    assert_eq!(w.value, 1);
}

#[test]
fn chirind_detour_flow_is_twice_the_index() {
    let chain = SshChain::new(8, SshBoundary::Closed).unwrap();
    let variant = ChirIndVariant::Detour;
    let a0 = chirind_block(&chain, 0.0, variant);
    let f = chain.fermi_phase().to_dense();
    let a0d = a0.to_dense();
    let (a0i, a0si) = (inverse(&a0d).unwrap(), inverse(&dagger(&a0d)).unwrap());
    let ch = chain.clone();
    let blocks = Arc::new(move |a: f64| {
        let aa = chirind_block(&ch, a, variant).to_dense();
        Ok(vec![f.dot(&aa).dot(&a0i), f.dot(&dagger(&aa)).dot(&a0si).mapv(|z| -z)])
    });
    let lab = shell(&chain.lattice);
    let path = DenseBlockPath { blocks, labelers: vec![Some(lab.clone()), Some(lab)] };
    let sf = sf_nonnormal(&path, &FlowOptions::default()).unwrap();
    let pi = Projector::Lattice(hardy_projection(&chain.fermi_phase()));
    let ind = index_compression(&pi, &a0, &IndexOptions::default()).unwrap();
    assert_eq!(sf.net_flow, 2 * ind.value);
    assert_eq!(ind.value, 1);
}

#[test]
fn even_dirac_d2_small_box() {
    let spec = ModelSpec::even_dirac(2, 1.0).unwrap();
    let model = Arc::new(LatticeModel::new(&spec, 6, &OdeOptions::default()).unwrap());
    let h0 = model.half_hamiltonian(0.0).unwrap();
    let m = model.clone();
    let path = DenseHermitianPath {
        op: Arc::new(move |a| Ok(m.half_hamiltonian(a)?.to_dense())),
        level: 0.0,
        labeler: Some(shell(&h0.lattice)),
        mode: FlowMode::SelfadjointThroughMu,
    };
    let sf = sf_selfadjoint(&path, &FlowOptions::default()).unwrap();
    let p0 = spectral_projection_below(&h0, 0.0).unwrap();
    let ind = index_compression(&p0, &model.phase_block().unwrap(), &IndexOptions::default()).unwrap();
    let chern = chern_oracle_even(&spec, &OracleOptions::default()).unwrap();
    assert_eq!(chern.value, -1);
    assert_eq!(ind.value, chern.value, "{ind:?}");
    assert_eq!(sf.net_flow, ind.value, "{sf:?}");
    assert_eq!(sf.net_flow_all, 0);
}

#[test]
fn gapless_mass_has_no_oracle_value() {
    let coarse = OracleOptions { grid: 41, ..Default::default() };
    assert!(winding_oracle_odd(&ModelSpec::odd_chiral(3, 1.0).unwrap(), &coarse).is_err());
    assert!(chern_oracle_even(&ModelSpec::even_dirac(2, 2.0).unwrap(), &OracleOptions::default()).is_err());
    assert_eq!(winding_oracle_odd(&ModelSpec::odd_chiral(3, 2.0).unwrap(), &coarse).unwrap().value, -1);
}
