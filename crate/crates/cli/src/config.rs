//! Experiment configuration documents (TOML).

use std::path::{Path, PathBuf};

use monoflow::flow::FlowOptions;
use monoflow::index::{IndexOptions, OracleOptions};
use monoflow::models::{ChirIndVariant, SshBoundary};
use monoflow::monopole::OdeOptions;
use monoflow::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EvenDirac,
    OddChiral,
    Ssh,
    /// SSH chain with the chiral path of the ChirInd example.
    Chirind,
    /// Random finite-dimensional pairs (U_0, F) on the standard path.
    Harness,
    CustomPolynomial,
}

/// Which operator path of an even model is followed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// h_alpha on the grading +1 block.
    Half,
    /// The full H_alpha.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    SpectralFlow,
    Index,
    Oracle,
    InvariantSuite,
}

/// Complex matrix as separate real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoppingConfig {
    /// Powers of S_1, ..., S_d; negative entries are adjoints.
    pub monomial: Vec<i32>,
    pub coeff: MatrixConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub fermi_level: f64,
    #[serde(default = "default_path")]
    pub path: PathKind,
    #[serde(default)]
    pub hopping: Vec<HoppingConfig>,
    #[serde(default)]
    pub potential: Option<MatrixConfig>,
    #[serde(default = "default_boundary")]
    pub ssh_boundary: SshBoundary,
    #[serde(default = "default_variant")]
    pub chirind_variant: ChirIndVariant,
}

fn default_path() -> PathKind {
    PathKind::Half
}

fn default_boundary() -> SshBoundary {
    SshBoundary::Closed
}

fn default_variant() -> ChirIndVariant {
    ChirIndVariant::Detour
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    #[serde(default)]
    pub d: Option<usize>,
    /// Sup-norm radius; for chains the half length L (sites -L..L).
    pub radius: usize,
    /// Offset in every coordinate: 0.5 for monopole boxes, 0 for chains.
    #[serde(default)]
    pub offset: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub points: usize,
    pub refinement_tolerance: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { points: 101, refinement_tolerance: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Eigenpairs per snapshot for lattice-size problems.
    pub nev: usize,
    pub block: usize,
    /// Relative residual accepted by the windowed eigensolver.
    pub tol: f64,
    /// Use full dense eigendecompositions regardless of size.
    pub dense: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { nev: 16, block: 4, tol: 1e-9, dense: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub samples: usize,
    pub max_dim: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig { samples: 50, max_dim: 24 }
    }
}

/// Tolerances of the invariant suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantConfig {
    pub alphas: Vec<f64>,
    pub conjugation_tol: f64,
    pub covariance_tol: f64,
    pub interior_shell: usize,
}

impl Default for InvariantConfig {
    fn default() -> Self {
        InvariantConfig { alphas: vec![0.3, 0.5], conjugation_tol: 1e-8, covariance_tol: 1e-6, interior_shell: 1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub model: ModelConfig,
    #[serde(rename = "box")]
    pub lattice: BoxConfig,
    #[serde(default)]
    pub alpha_grid: GridConfig,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub flow: FlowOptions,
    #[serde(default)]
    pub index: IndexOptions,
    #[serde(default)]
    pub oracle: OracleOptions,
    #[serde(default)]
    pub ode: OdeOptions,
    #[serde(default)]
    pub harness: HarnessConfig,
    #[serde(default)]
    pub invariants: InvariantConfig,
}

fn default_tasks() -> Vec<Task> {
    vec![Task::SpectralFlow, Task::Index, Task::Oracle]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Dimension after defaults: chains are one-dimensional.
    pub fn dimension(&self) -> usize {
        match self.model.kind {
            ExperimentKind::Ssh | ExperimentKind::Chirind | ExperimentKind::Harness => 1,
            _ => self.model.d.or(self.lattice.d).unwrap_or(2),
        }
    }

    /// Flow options with the grid section applied.
    pub fn flow_options(&self) -> FlowOptions {
        let mut o = self.flow.clone();
        o.grid_points = self.alpha_grid.points;
        o.localize_tol = self.alpha_grid.refinement_tolerance;
        o
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let d = self.dimension();
        if let (Some(a), Some(b)) = (self.model.d, self.lattice.d) {
            if a != b {
                return bad(format!("model.d = {a} but box.d = {b}"));
            }
        }
        if self.name.trim().is_empty() {
            return bad("name must not be empty".into());
        }
        if self.alpha_grid.points < 2 {
            return bad("alpha_grid.points must be at least 2".into());
        }
        if !(self.alpha_grid.refinement_tolerance > 0.0) {
            return bad("alpha_grid.refinement_tolerance must be positive".into());
        }
        if self.tasks.is_empty() {
            return bad("at least one task is required".into());
        }
        if self.lattice.radius == 0 {
            return bad("box.radius must be positive".into());
        }
        let offset = self.lattice.offset;
        match self.model.kind {
            ExperimentKind::EvenDirac if d % 2 != 0 => return bad(format!("even_dirac needs even d, got {d}")),
            ExperimentKind::OddChiral if d % 2 != 1 => return bad(format!("odd_chiral needs odd d, got {d}")),
            ExperimentKind::Ssh | ExperimentKind::Chirind => {
                if offset.unwrap_or(0.0) != 0.0 {
                    return bad("chains use integer sites (offset 0)".into());
                }
                if 2 * self.lattice.radius + 1 < 8 {
                    return bad("chains need at least 8 sites".into());
                }
            }
            ExperimentKind::Harness => {
                if self.harness.max_dim < 4 || self.harness.samples == 0 {
                    return bad("harness needs samples > 0 and max_dim >= 4".into());
                }
            }
            _ => {}
        }
        if matches!(self.model.kind, ExperimentKind::EvenDirac | ExperimentKind::OddChiral | ExperimentKind::CustomPolynomial)
            && offset.unwrap_or(0.5) != 0.5
        {
            return bad("monopole boxes need offset 0.5 so that no site sits on the monopole".into());
        }
        if self.model.kind == ExperimentKind::CustomPolynomial {
            if self.model.potential.is_none() {
                return bad("custom_polynomial needs model.potential".into());
            }
            if self.model.hopping.iter().any(|t| t.monomial.len() != d) {
                return bad("hopping monomials must have length d".into());
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl MatrixConfig {
    pub fn to_array(&self) -> Result<ndarray::Array2<monoflow::linalg::C64>> {
        let n = self.re.len();
        if self.re.iter().any(|r| r.len() != n) {
            return Err(Error::Config("matrix must be square".into()));
        }
        if !self.im.is_empty() && (self.im.len() != n || self.im.iter().any(|r| r.len() != n)) {
            return Err(Error::Config("imaginary part has the wrong shape".into()));
        }
        Ok(ndarray::Array2::from_shape_fn((n, n), |(i, j)| {
            let im = if self.im.is_empty() { 0.0 } else { self.im[i][j] };
            monoflow::linalg::C64::new(self.re[i][j], im)
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SSH: &str = r#"
name = "ssh"
[model]
kind = "ssh"
[box]
radius = 50
"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let c = ExperimentConfig::from_toml(SSH).unwrap();
        assert_eq!(c.alpha_grid.points, 101);
        assert_eq!(c.tasks, vec![Task::SpectralFlow, Task::Index, Task::Oracle]);
        assert_eq!(c.dimension(), 1);
        assert_eq!(c.model.ssh_boundary, SshBoundary::Closed);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{SSH}\nbogus = 1\n");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn inconsistent_dimension_is_rejected() {
        let text = r#"
name = "x"
[model]
kind = "odd_chiral"
d = 2
[box]
radius = 3
"#;
        assert!(ExperimentConfig::from_toml(text).is_err());
    }

    #[test]
    fn toml_round_trip_keeps_hash() {
        let c = ExperimentConfig::from_toml(SSH).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c.hash(), again.hash());
        let mut other = c.clone();
        other.seed = 7;
        assert_ne!(c.hash(), other.hash());
    }
}
