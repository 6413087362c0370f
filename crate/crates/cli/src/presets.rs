//! Bundled experiment configurations.

use monoflow::{Error, Result};

use crate::config::ExperimentConfig;

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// (name, TOML source) of every bundled preset.
        pub const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../presets/", $name, ".toml")))),*
        ];
    };
}

presets!(
    "ssh",
    "chirind",
    "harness",
    "even_dirac_d2_mneg1",
    "even_dirac_d2_m1",
    "even_dirac_d2_m3",
    "even_dirac_d2_full",
    "odd_chiral_d3_m1",
    "odd_chiral_d3_m2",
    "identities_d2",
    "identities_d3",
);

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.0).collect()
}

pub fn source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    let text = source(name).ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?;
    ExperimentConfig::from_toml(text)
}
