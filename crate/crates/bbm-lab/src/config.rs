//! Experiment configuration: a flat key-value file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "BBM_LAB_OUT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";
const DEFAULT_BUDGET_SECONDS: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Identities,
    Profiles,
    SingleSoliton,
    Collision,
    OdeCompare,
    Sweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Identities => "identities",
            Self::Profiles => "profiles",
            Self::SingleSoliton => "single_soliton",
            Self::Collision => "collision",
            Self::OdeCompare => "ode_compare",
            Self::Sweep => "sweep",
        }
    }
}

/// Optional settings; every field may come from the file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub kind: Option<ExperimentKind>,
    pub lambda: Option<f64>,
    pub mu0: Option<f64>,
    /// Speeds for a sweep.
    pub mu0_list: Option<Vec<f64>>,
    /// Number of grid points.
    pub grid: Option<usize>,
    pub halfwidth: Option<f64>,
    pub dt: Option<f64>,
    pub start_separation: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub budget_seconds: Option<f64>,
}

impl Overrides {
    /// Parses a flat `key = value` file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `other` win.
    pub fn merged(self, other: Overrides) -> Self {
        Self {
            kind: other.kind.or(self.kind),
            lambda: other.lambda.or(self.lambda),
            mu0: other.mu0.or(self.mu0),
            mu0_list: other.mu0_list.or(self.mu0_list),
            grid: other.grid.or(self.grid),
            halfwidth: other.halfwidth.or(self.halfwidth),
            dt: other.dt.or(self.dt),
            start_separation: other.start_separation.or(self.start_separation),
            output_dir: other.output_dir.or(self.output_dir),
            budget_seconds: other.budget_seconds.or(self.budget_seconds),
        }
    }
}

/// A validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub lambda: f64,
    pub mu0: f64,
    pub mu0_list: Vec<f64>,
    pub grid: Option<usize>,
    pub halfwidth: Option<f64>,
    pub dt: Option<f64>,
    pub start_separation: Option<f64>,
    pub output_dir: PathBuf,
    pub budget_seconds: f64,
}

pub fn validate_mu0(mu0: f64) -> Result<()> {
    if !(mu0 > 0.0 && mu0 <= 0.25) {
        bail!("mu0 = {mu0} must lie in (0, 0.25]");
    }
    Ok(())
}

pub fn validate_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=0.9).contains(&lambda) {
        bail!("lambda = {lambda} must lie in [0, 0.9]");
    }
    Ok(())
}

impl ExperimentConfig {
    /// Fills defaults and checks ranges. `output_root` is used when no directory is given.
    pub fn resolve(o: Overrides, output_root: Option<PathBuf>) -> Result<Self> {
        let kind = o.kind.unwrap_or(ExperimentKind::Collision);
        let lambda = o.lambda.unwrap_or(0.5);
        let mu0 = o.mu0.unwrap_or(0.15);
        validate_lambda(lambda)?;
        validate_mu0(mu0)?;
        let mu0_list = o.mu0_list.unwrap_or_else(|| vec![0.2, 0.15, 0.1]);
        for m in &mu0_list {
            validate_mu0(*m)?;
        }
        if kind == ExperimentKind::Sweep && mu0_list.len() < 2 {
            bail!("a sweep needs at least two speeds");
        }
        if let Some(n) = o.grid {
            if n == 0 || n % 2 != 0 {
                bail!("grid = {n} must be a positive even number");
            }
        }
        for (name, v) in [("halfwidth", o.halfwidth), ("dt", o.dt), ("start_separation", o.start_separation)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    bail!("{name} = {v} must be positive");
                }
            }
        }
        let budget_seconds = o.budget_seconds.unwrap_or(DEFAULT_BUDGET_SECONDS);
        if !(budget_seconds > 0.0) {
            bail!("budget_seconds must be positive");
        }
        let output_dir = match o.output_dir {
            Some(d) => d,
            None => {
                let root = output_root.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
                root.join(format!("{}-lambda{lambda}-mu{mu0}", kind.name()))
            }
        };
        Ok(Self {
            kind,
            lambda,
            mu0,
            mu0_list,
            grid: o.grid,
            halfwidth: o.halfwidth,
            dt: o.dt,
            start_separation: o.start_separation,
            output_dir,
            budget_seconds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_file_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        std::fs::write(&path, "kind = \"collision\"\nlambda = 0.25\nmu0 = 0.1\ngrid = 2048\n").unwrap();
        let file = Overrides::from_file(&path).unwrap();
        let cli = Overrides { mu0: Some(0.2), ..Default::default() };
        let cfg = ExperimentConfig::resolve(file.merged(cli), Some(dir.path().into())).unwrap();
        assert_eq!((cfg.lambda, cfg.mu0, cfg.grid), (0.25, 0.2, Some(2048)));
        assert!(cfg.output_dir.starts_with(dir.path()));
        std::fs::write(&path, "colour = 3\n").unwrap();
        assert!(Overrides::from_file(&path).is_err());
    }

    #[test]
    fn ranges_are_enforced() {
        let bad = |o: Overrides| ExperimentConfig::resolve(o, None).is_err();
        assert!(bad(Overrides { mu0: Some(0.3), ..Default::default() }));
        assert!(bad(Overrides { mu0: Some(0.0), ..Default::default() }));
        assert!(bad(Overrides { lambda: Some(0.95), ..Default::default() }));
        assert!(bad(Overrides { grid: Some(1023), ..Default::default() }));
        assert!(bad(Overrides { mu0_list: Some(vec![0.1, 0.5]), ..Default::default() }));
        assert!(!bad(Overrides { lambda: Some(0.9), mu0: Some(0.25), ..Default::default() }));
    }
}
