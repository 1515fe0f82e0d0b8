//! Scenario configuration: one JSON document describing the model, the
//! grid, the initial data, the stepping parameters and the diagnostics
//! evaluated along the trajectory. Configs are the unit of reproducibility:
//! they round-trip losslessly through serialization, and identical configs
//! produce byte-identical artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nlps_core::{
    BesovConfig, CoreError, Coupling, InitialData, Preset, Result, SolverConfig, SystemSpec,
    TorusGrid,
};

/// Model block: a preset plus whatever the preset leaves open.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub preset: Preset,
    /// Species count; presets with a fixed count may omit it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<usize>,
    /// Coupling tensor; required for (and only allowed with) the general
    /// preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<Coupling>,
}

impl ModelConfig {
    /// Species count after preset defaults.
    pub fn species_count(&self) -> usize {
        self.species.unwrap_or(match self.preset {
            Preset::NernstPlanck => 2,
            _ => 1,
        })
    }

    /// Build and validate the system for dimension `d`.
    pub fn build(&self, d: usize) -> Result<SystemSpec> {
        if self.preset != Preset::General && self.coupling.is_some() {
            return Err(CoreError::InvalidConfig(format!(
                "preset {:?} fixes its coupling; drop the `coupling` entry",
                self.preset
            )));
        }
        SystemSpec::build_preset(self.preset, d, self.species_count(), self.coupling.clone())
    }
}

/// Grid block.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
    pub period: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.d, self.n, self.period)
    }
}

/// Which norms to evaluate on the kept snapshots.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Spatial-decay exponents for the weighted sup norms.
    #[serde(default)]
    pub thetas: Vec<f64>,
    /// Frequency-side exponents for the `|xi|^a`-weighted coefficient sups.
    #[serde(default)]
    pub pm_exponents: Vec<f64>,
    /// Dyadic block norm, evaluated when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub besov: Option<BesovConfig>,
    /// Evaluate norms on every this-many-th kept snapshot; the first and
    /// last states are always included. Zero behaves as one.
    #[serde(default)]
    pub every: usize,
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        for &theta in &self.thetas {
            if !(theta >= 0.0 && theta.is_finite()) {
                return Err(CoreError::InvalidConfig(format!(
                    "weighted-sup exponent must be finite and nonnegative, got {theta}"
                )));
            }
        }
        if let Some(besov) = &self.besov {
            besov.psi.validate()?;
            if besov.k_min > besov.k_max {
                return Err(CoreError::InvalidConfig(format!(
                    "besov block range is empty: {}..={}",
                    besov.k_min, besov.k_max
                )));
            }
        }
        Ok(())
    }
}

/// One scenario: everything a run needs, in one reproducible document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub initial: InitialData,
    pub solver: SolverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    /// Output directory; `--out` on the command line overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Seed recorded for randomized sweeps. The built-in commands are fully
    /// deterministic; the seed travels with the config so external sweep
    /// drivers can reproduce their draws exactly.
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Parse and validate one config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural validation of everything that does not need the data in
    /// hand: the model builds, the grid builds, the stepping parameters and
    /// diagnostics exponents are in range.
    pub fn validate(&self) -> Result<()> {
        self.model.build(self.grid.d)?;
        self.grid.build()?;
        self.solver.validate()?;
        self.diagnostics.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> &'static str {
        r#"{
            "model": { "preset": "debye" },
            "grid": { "d": 2, "n": 16, "period": 6.283185307179586 },
            "initial": { "kind": "weighted_decay", "eta": 0.01 },
            "solver": { "dt": 0.001, "t_end": 0.1, "scheme": "etd2rk", "snapshot_every": 10 },
            "diagnostics": { "thetas": [1.0, 2.0], "pm_exponents": [0.5] },
            "seed": 7
        }"#
    }

    #[test]
    fn round_trip_is_lossless() {
        let cfg: RunConfig = serde_json::from_str(sample()).unwrap();
        cfg.validate().unwrap();
        let once = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&once).unwrap();
        let twice = serde_json::to_string(&back).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn awkward_floats_survive_the_round_trip() {
        // Shortest-representation float printing keeps non-terminating
        // binary fractions and extreme magnitudes bit-exact.
        let text = r#"{
            "model": { "preset": "gravitating" },
            "grid": { "d": 2, "n": 16, "period": 100.53096491487338 },
            "initial": { "kind": "custom_spectral", "modes": [
                { "species": 0, "k": [1, 0], "re": 0.1, "im": -1e-17 },
                { "species": 0, "k": [-1, 0], "re": 0.30000000000000004, "im": 1e300 }
            ] },
            "solver": { "dt": 1e-3, "t_end": 0.30000000000000004, "scheme": "ifrk4" }
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        let once = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&once).unwrap();
        assert_eq!(once, serde_json::to_string(&back).unwrap());
        assert!(once.contains("0.30000000000000004"));
        assert!(once.contains("1e+300"));
        assert!(once.contains("-1e-17"));
    }

    #[test]
    fn defaults_fill_optional_blocks() {
        let text = r#"{
            "model": { "preset": "nernst_planck" },
            "grid": { "d": 3, "n": 8, "period": 6.283185307179586 },
            "initial": { "kind": "fourier_bump", "amplitude": 1.0 },
            "solver": { "dt": 0.001, "t_end": 0.01, "scheme": "picard" }
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.model.species_count(), 2);
        assert!(cfg.diagnostics.thetas.is_empty());
        assert_eq!(cfg.seed, 0);
        assert!(cfg.output.is_none());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = sample().replace("\"seed\": 7", "\"sneed\": 7");
        assert!(serde_json::from_str::<RunConfig>(&text).is_err());
    }

    #[test]
    fn spurious_coupling_is_rejected() {
        let text = sample().replace(
            "{ \"preset\": \"debye\" }",
            "{ \"preset\": \"debye\", \"coupling\": { \"constant\": [1.0] } }",
        );
        let cfg: RunConfig = serde_json::from_str(&text).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bad_solver_and_bad_besov_are_rejected() {
        let bad_dt = sample().replace("\"dt\": 0.001", "\"dt\": -0.001");
        let cfg: RunConfig = serde_json::from_str(&bad_dt).unwrap();
        assert!(cfg.validate().is_err());

        let bad_besov = sample().replace(
            "\"diagnostics\": { \"thetas\": [1.0, 2.0], \"pm_exponents\": [0.5] }",
            "\"diagnostics\": { \"besov\": { \"a\": 0.0, \"k_min\": 3, \"k_max\": -3 } }",
        );
        let cfg: RunConfig = serde_json::from_str(&bad_besov).unwrap();
        assert!(cfg.validate().is_err());
    }
}
