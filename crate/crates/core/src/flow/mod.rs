//! Spectral flow of operator paths alpha in [0, 1]: selfadjoint paths
//! through a level, unitary paths through their real part, and non-normal
//! paths through the imaginary axis.

pub mod harness;
pub mod spectrum;
mod track;

use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dagger, is_unitary, max_abs, svd, C64};

pub use spectrum::{
    DenseBlockPath, DenseFn, DenseGeneralPath, DenseHermitianPath, FlowMode, Labeler, OperatorFn, PencilBlock, Snapshot, SpectralPath,
    WindowHermitianPath, WindowPencilPath,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowOptions {
    pub grid_points: usize,
    /// Minimal accepted eigenvector overlap between consecutive points.
    pub matching_threshold: f64,
    /// Squared overlap above which two subspaces count as related.
    pub edge_tol: f64,
    pub cluster_tol: f64,
    pub min_step: f64,
    pub localize_tol: f64,
    pub split_fraction: f64,
    /// Half width of the interval jumped over when matching fails at the
    /// minimal step; doubled on each further failure up to `max_jump`.
    pub jump: f64,
    pub max_jump: f64,
    pub tol_gap: f64,
    pub boundary_threshold: f64,
    pub max_evaluations: usize,
    pub parallel: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            grid_points: 101,
            matching_threshold: 0.7,
            edge_tol: 0.05,
            cluster_tol: 1e-7,
            min_step: 1e-4,
            localize_tol: 1e-4,
            split_fraction: 0.4,
            jump: 2e-3,
            max_jump: 0.05,
            tol_gap: 1e-6,
            boundary_threshold: 0.5,
            max_evaluations: 20_000,
            parallel: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub alpha: f64,
    /// +1 upward (left to right), -1 the other way.
    pub direction: i32,
    pub multiplicity: usize,
    pub track: usize,
    pub boundary_weight: f64,
    pub bulk: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub refinements: usize,
    pub evaluations: usize,
    /// Smallest distance of a bulk eigenvalue to the crossing line over
    /// the visited points.
    pub min_gap: f64,
    /// Alpha intervals matched across in one step because the states
    /// inside could not be resolved.
    pub skipped: Vec<(f64, f64)>,
    pub gross_crossings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowResult {
    pub crossings: Vec<Crossing>,
    /// Signed count over bulk crossings.
    pub net_flow: i64,
    /// Signed count including boundary crossings.
    pub net_flow_all: i64,
    pub mode: FlowMode,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub alpha: f64,
    pub track: usize,
    pub value: C64,
    pub overlap: f64,
    pub bulk: bool,
}

/// Eigenvalue trajectories along the accepted alpha points.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EigenPath {
    pub grid: Vec<f64>,
    pub points: Vec<TrackPoint>,
    pub matching_threshold: f64,
}

impl EigenPath {
    pub fn new(matching_threshold: f64) -> Self {
        EigenPath { grid: vec![], points: vec![], matching_threshold }
    }

    fn push_snapshot(&mut self, s: &Snapshot, ids: &[usize], overlaps: &[f64], _level: f64, opts: &FlowOptions) {
        self.grid.push(s.alpha);
        for (k, z) in s.values.iter().enumerate() {
            self.points.push(TrackPoint {
                alpha: s.alpha,
                track: ids[k],
                value: *z,
                overlap: overlaps[k],
                bulk: s.boundary_weight[k] < opts.boundary_threshold,
            });
        }
    }

    fn pop_until(&mut self, alpha: f64) {
        self.grid.retain(|&a| a <= alpha);
        self.points.retain(|p| p.alpha <= alpha);
    }

    pub fn n_tracks(&self) -> usize {
        let mut ids: Vec<usize> = self.points.iter().map(|p| p.track).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// CSV with header `alpha,track,re,im,bulk`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "alpha,track,re,im,bulk")?;
        for p in &self.points {
            writeln!(w, "{:.10},{},{:.12e},{:.12e},{}", p.alpha, p.track, p.value.re, p.value.im, p.bulk as u8)?;
        }
        Ok(())
    }
}

/// Spectral flow of a selfadjoint path through its level.
pub fn sf_selfadjoint(path: &dyn SpectralPath, opts: &FlowOptions) -> Result<FlowResult> {
    Ok(track::track(path, opts)?.0)
}

/// Same, also returning the trajectories.
pub fn sf_with_trajectories(path: &dyn SpectralPath, opts: &FlowOptions) -> Result<(FlowResult, EigenPath)> {
    track::track(path, opts)
}

/// Selfadjoint path alpha -> Re W_alpha of a unitary path, checked for
/// unitarity at every evaluation.
pub fn unitary_realpart_path(
    path: Arc<dyn Fn(f64) -> Result<Array2<C64>> + Send + Sync>,
    labeler: Option<Labeler>,
) -> DenseHermitianPath {
    let re = move |a: f64| -> Result<Array2<C64>> {
        let w = path(a)?;
        if !is_unitary(&w, 1e-8) {
            return Err(Error::Flow(format!("path entry at alpha={a} is not unitary")));
        }
        Ok((&w + &dagger(&w)).mapv(|z| z * 0.5))
    };
    DenseHermitianPath { op: Arc::new(re), level: 0.0, labeler, mode: FlowMode::UnitaryRealpart }
}

/// Spectral flow of a unitary path through the real part at 0.
pub fn sf_unitary(
    path: Arc<dyn Fn(f64) -> Result<Array2<C64>> + Send + Sync>,
    labeler: Option<Labeler>,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    sf_selfadjoint(&unitary_realpart_path(path, labeler), opts)
}

/// Spectral flow through the imaginary axis of a non-normal path.
pub fn sf_nonnormal(path: &dyn SpectralPath, opts: &FlowOptions) -> Result<FlowResult> {
    if path.mode() != FlowMode::NonnormalImaginaryAxis {
        return Err(Error::Flow("path is not a non-normal path".into()));
    }
    track::track(path, opts).map(|r| r.0)
}

/// A |A|^{-s} = U Sigma^{1-s} W* for A = U Sigma W*.
pub fn polar_homotopy(a: &Array2<C64>, s: f64) -> Result<Array2<C64>> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Flow(format!("homotopy parameter {s} outside [0,1]")));
    }
    let (u, sig, vt) = svd(a)?;
    let smax = sig.iter().cloned().fold(0.0, f64::max);
    if sig.iter().any(|&x| x <= 1e-13 * smax.max(1e-300)) || max_abs(a) == 0.0 {
        return Err(Error::Flow("polar homotopy of a singular operator".into()));
    }
    let mut us = u.clone();
    for (k, &x) in sig.iter().enumerate() {
        let f = x.powf(1.0 - s);
        us.column_mut(k).mapv_inplace(|z| z * f);
    }
    Ok(us.dot(&vt))
}

#[cfg(test)]
mod tests;
