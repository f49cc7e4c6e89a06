//! Experiment descriptions, loadable from TOML.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use rt2pl::pipeline::{EstimatorConfig, SolverVariant};
use rt2pl::scene::{ScenarioConfig, SceneMode};
use rt2pl::translation::LigtVariant;
use serde::{Deserialize, Serialize};

use crate::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    NoiseSweep,
    Degeneracy,
    OutlierSweep,
    LigtResilience,
    CostLandscape,
    Convergence,
    Runtime,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::NoiseSweep => "noise_sweep",
            ExperimentKind::Degeneracy => "degeneracy",
            ExperimentKind::OutlierSweep => "outlier_sweep",
            ExperimentKind::LigtResilience => "ligt_resilience",
            ExperimentKind::CostLandscape => "cost_landscape",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Runtime => "runtime",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            ExperimentKind::NoiseSweep,
            ExperimentKind::Degeneracy,
            ExperimentKind::OutlierSweep,
            ExperimentKind::LigtResilience,
            ExperimentKind::CostLandscape,
            ExperimentKind::Convergence,
            ExperimentKind::Runtime,
        ];
        all.into_iter()
            .find(|k| k.as_str() == s || k.as_str().replace('_', "-") == s)
            .ok_or_else(|| BenchError::Spec(format!("unknown experiment `{s}`")))
    }
}

/// How the rotation solver is started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Ground truth turned by a random angle in `[0, init_max_angle]` about a
    /// random axis; the solver uses every feature.
    NearTruth,
    /// Full robust pipeline from the identity.
    Ransac,
}

/// Grid of the cost-landscape export: `c10` varies over a cube around
/// `truth`, `R12` stays at its true value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LandscapeSpec {
    pub truth: [f64; 3],
    pub half_width: f64,
    pub resolution: usize,
    /// Only the slice `c_z = truth_z` when set.
    pub slice_only: bool,
}

impl Default for LandscapeSpec {
    fn default() -> Self {
        Self {
            truth: [0.2, 0.2, 0.2],
            half_width: 0.5,
            resolution: 41,
            slice_only: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub trials: usize,
    pub seed: u64,
    pub variants: Vec<SolverVariant>,
    pub modes: Vec<SceneMode>,
    pub noise_levels: Vec<f64>,
    pub outlier_fractions: Vec<f64>,
    /// Initial-value deviations (degrees) for the convergence test, rotation
    /// perturbations (degrees) for the translation test.
    pub deviations_deg: Vec<f64>,
    pub ligt_variants: Vec<LigtVariant>,
    pub init: InitMode,
    /// Radians.
    pub init_max_angle: f64,
    /// A trial counts as converged when its rotation error is below this (degrees).
    pub success_threshold_deg: f64,
    pub scene: ScenarioConfig,
    /// Solver settings; `variant` and the reweighting switch are set per node.
    pub estimator: EstimatorConfig,
    pub landscape: LandscapeSpec,
    /// Worker threads; all cores when absent.
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::for_kind(ExperimentKind::NoiseSweep)
    }
}

fn grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    (0..=n).map(|i| from + step * i as f64).collect()
}

impl ExperimentSpec {
    /// Desk-scale defaults of each experiment.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            trials: 200,
            seed: 0,
            variants: vec![SolverVariant::Rt2pl, SolverVariant::PointOnlyIrls],
            modes: vec![SceneMode::General],
            noise_levels: vec![0.5],
            outlier_fractions: vec![0.0],
            deviations_deg: vec![0.0],
            ligt_variants: vec![LigtVariant::Points, LigtVariant::Lines, LigtVariant::PointsAndLines],
            init: InitMode::NearTruth,
            init_max_angle: 0.05,
            success_threshold_deg: 0.5,
            scene: ScenarioConfig::default(),
            estimator: EstimatorConfig::default(),
            landscape: LandscapeSpec::default(),
            threads: None,
            output: None,
        };
        match kind {
            ExperimentKind::NoiseSweep => Self {
                variants: SolverVariant::ALL.to_vec(),
                noise_levels: grid(0.0, 2.0, 0.5),
                ..base
            },
            ExperimentKind::Degeneracy => Self {
                variants: SolverVariant::ALL.to_vec(),
                modes: vec![SceneMode::General, SceneMode::Planar, SceneMode::PureRotation],
                noise_levels: vec![0.0, 0.5, 1.0],
                ..base
            },
            ExperimentKind::OutlierSweep => Self {
                trials: 50,
                outlier_fractions: grid(0.0, 0.2, 0.05),
                init: InitMode::Ransac,
                scene: ScenarioConfig {
                    n_points: 100,
                    n_lines: 100,
                    ..ScenarioConfig::default()
                },
                ..base
            },
            ExperimentKind::Runtime => Self {
                trials: 50,
                variants: vec![SolverVariant::Rt2pl],
                outlier_fractions: vec![0.2],
                init: InitMode::Ransac,
                scene: ScenarioConfig {
                    n_points: 100,
                    n_lines: 100,
                    ..ScenarioConfig::default()
                },
                threads: Some(1),
                ..base
            },
            ExperimentKind::Convergence => Self {
                trials: 300,
                variants: vec![SolverVariant::NbcOnly, SolverVariant::NbcMini],
                deviations_deg: grid(0.0, 10.0, 1.0),
                scene: ScenarioConfig {
                    n_points: 100,
                    n_lines: 100,
                    ..ScenarioConfig::default()
                },
                ..base
            },
            ExperimentKind::LigtResilience => Self {
                noise_levels: grid(0.0, 10.0, 2.0),
                deviations_deg: grid(0.0, 10.0, 2.0),
                scene: ScenarioConfig {
                    n_points: 10,
                    n_lines: 10,
                    ..ScenarioConfig::default()
                },
                ..base
            },
            ExperimentKind::CostLandscape => Self {
                trials: 1,
                variants: vec![SolverVariant::NbcOnly, SolverVariant::NbcMini],
                noise_levels: vec![0.0],
                scene: ScenarioConfig {
                    n_points: 0,
                    n_lines: 10,
                    ..ScenarioConfig::default()
                },
                ..base
            },
        }
    }

    /// Parses a TOML override; keys that are absent keep the defaults of the
    /// experiment named by `kind` (itself defaulting to `fallback`).
    pub fn from_toml(text: &str, fallback: ExperimentKind) -> Result<Self> {
        let table: toml::Table = toml::from_str(text)?;
        let kind = match table.get("kind") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| BenchError::Spec("`kind` must be a string".into()))?
                .parse()?,
            None => fallback,
        };
        let mut merged = toml::Table::try_from(Self::for_kind(kind))?;
        merge(&mut merged, table);
        let spec: Self = merged.try_into()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path, fallback: ExperimentKind) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, fallback)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenchError::Spec(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        let needs_variants = !matches!(self.kind, ExperimentKind::LigtResilience);
        if needs_variants && self.variants.is_empty() {
            return bad("at least one solver variant is required");
        }
        if self.modes.is_empty() || self.noise_levels.is_empty() || self.outlier_fractions.is_empty() {
            return bad("grids must be non-empty");
        }
        if self.deviations_deg.is_empty() || self.ligt_variants.is_empty() {
            return bad("grids must be non-empty");
        }
        if self.noise_levels.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
            return bad("noise levels must be finite and non-negative");
        }
        if self.outlier_fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
            return bad("outlier fractions must lie in [0, 1)");
        }
        if self.deviations_deg.iter().any(|d| !(*d >= 0.0 && *d < 180.0)) {
            return bad("deviations must lie in [0, 180) degrees");
        }
        if !(self.init_max_angle >= 0.0 && self.success_threshold_deg > 0.0) {
            return bad("init_max_angle must be non-negative and success_threshold_deg positive");
        }
        if self.landscape.resolution < 2 || !(self.landscape.half_width > 0.0) {
            return bad("landscape needs resolution >= 2 and a positive half width");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        self.scene.validate()?;
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in [
            ExperimentKind::NoiseSweep,
            ExperimentKind::Degeneracy,
            ExperimentKind::OutlierSweep,
            ExperimentKind::LigtResilience,
            ExperimentKind::CostLandscape,
            ExperimentKind::Convergence,
            ExperimentKind::Runtime,
        ] {
            ExperimentSpec::for_kind(kind).validate().unwrap();
            assert_eq!(kind.as_str().parse::<ExperimentKind>().unwrap(), kind);
        }
    }

    #[test]
    fn toml_overrides_only_given_keys() {
        let text = r#"
            kind = "outlier_sweep"
            trials = 7
            variants = ["rt2pl"]

            [scene]
            noise_std = 0.25
        "#;
        let spec = ExperimentSpec::from_toml(text, ExperimentKind::NoiseSweep).unwrap();
        assert_eq!(spec.kind, ExperimentKind::OutlierSweep);
        assert_eq!(spec.trials, 7);
        assert_eq!(spec.variants, vec![SolverVariant::Rt2pl]);
        assert_eq!(spec.scene.noise_std, 0.25);
        assert_eq!(spec.scene.n_points, 100);
        assert_eq!(spec.init, InitMode::Ransac);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ExperimentSpec::from_toml("trials = 0", ExperimentKind::NoiseSweep).is_err());
        assert!(ExperimentSpec::from_toml("noise_levels = []", ExperimentKind::NoiseSweep).is_err());
        assert!(ExperimentSpec::from_toml("kind = \"nope\"", ExperimentKind::NoiseSweep).is_err());
        assert!(ExperimentSpec::from_toml("trials = \"x\"", ExperimentKind::NoiseSweep).is_err());
    }
}
