//! Experiment configuration (TOML, strict: unknown keys are errors).
//!
//! ```toml
//! [operator]
//! alpha = [1]                 # or [profile] kind = "sinusoidal", a = 1.0, ...
//!
//! [datum.random]
//! r = 2.0
//! k = 200
//! seed = 7
//!
//! [plan]
//! t1 = 0.5
//! rho = "auto"                # number, "auto" or "safe"
//! n = 8                       # or [4, 8, 12, 16] for a sweep
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::datum::{random_ball_member, InitialDatum};
use crate::error::{Error, Result};
use crate::forward::Dynamics;
use crate::operator::{CoefficientLiteral, OperatorSpec};
use crate::pipeline::{JobSettings, DEFAULT_A0_TOL};
use crate::precision::GUARD_BITS;
use crate::profile::{DiffusivityProfile, ProfileKind};
use crate::schedule::{default_rho, SamplingPoint, DEFAULT_K_SCAN, DEFAULT_RHO_MARGIN, DEFAULT_X0_EXPR};

/// Margin of random data inside the unit ball when none is given.
pub const DEFAULT_BALL_MARGIN: f64 = 0.9;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: Option<OperatorSection>,
    /// `kind` plus its parameters, and an optional `lower_bound`.
    pub profile: Option<toml::Table>,
    pub datum: DatumSection,
    pub plan: PlanSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub precision: PrecisionSection,
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub alpha: Vec<CoefficientLiteral>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSection {
    /// JSON file `{"r": .., "coeffs": [..]}`, relative to the config file.
    pub file: Option<PathBuf>,
    pub random: Option<RandomDatum>,
    /// Inline coefficients, together with `r`.
    pub coeffs: Option<Vec<f64>>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomDatum {
    pub r: f64,
    pub k: usize,
    #[serde(default = "default_margin")]
    pub margin: f64,
    pub seed: u64,
}

fn default_margin() -> f64 {
    DEFAULT_BALL_MARGIN
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum RhoSetting {
    Value(f64),
    Rule(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum NSetting {
    One(usize),
    Sweep(Vec<usize>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    #[serde(default = "default_x0")]
    pub x0: String,
    #[serde(default = "default_k_scan")]
    pub k_scan: u64,
    pub t1: f64,
    #[serde(default = "default_rho_setting")]
    pub rho: RhoSetting,
    pub n: NSetting,
}

fn default_x0() -> String {
    DEFAULT_X0_EXPR.to_string()
}

fn default_k_scan() -> u64 {
    DEFAULT_K_SCAN
}

fn default_rho_setting() -> RhoSetting {
    RhoSetting::Rule("auto".into())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    /// One absolute tolerance for every sample instead of the per-sample policy.
    pub sample: Option<f64>,
    #[serde(default = "default_a0_tol")]
    pub a0: f64,
    #[serde(default = "default_guard")]
    pub guard_bits: u32,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection { sample: None, a0: DEFAULT_A0_TOL, guard_bits: GUARD_BITS }
    }
}

fn default_a0_tol() -> f64 {
    DEFAULT_A0_TOL
}

fn default_guard() -> u32 {
    GUARD_BITS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionSection {
    pub bits: Option<u32>,
    #[serde(default = "yes")]
    pub auto_raise: bool,
}

impl Default for PrecisionSection {
    fn default() -> Self {
        PrecisionSection { bits: None, auto_raise: true }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub magnitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// A validated, ready-to-run experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub dynamics: Dynamics,
    pub datum: InitialDatum,
    pub point: SamplingPoint,
    pub settings: JobSettings,
    pub ns: Vec<usize>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_toml(&text)?, base))
    }

    /// Validate and resolve; relative paths are taken from `base`.
    pub fn build(&self, base: &Path) -> Result<Experiment> {
        let dynamics = match (&self.operator, &self.profile) {
            (Some(op), None) => {
                let coeffs = op.alpha.iter().map(CoefficientLiteral::to_rational).collect::<Result<Vec<_>>>()?;
                Dynamics::Autonomous(OperatorSpec::new(coeffs)?)
            }
            (None, Some(table)) => {
                let mut table = table.clone();
                let lower = match table.remove("lower_bound") {
                    None => None,
                    Some(v) => Some(
                        v.as_float()
                            .or_else(|| v.as_integer().map(|i| i as f64))
                            .ok_or_else(|| Error::Config("profile.lower_bound must be a number".into()))?,
                    ),
                };
                let kind = ProfileKind::deserialize(toml::Value::Table(table))
                    .map_err(|e| Error::Config(format!("[profile]: {e}")))?;
                let lower = lower.unwrap_or_else(|| implied_lower_bound(&kind));
                Dynamics::Rescaled(DiffusivityProfile::new(kind, lower)?)
            }
            (Some(_), Some(_)) => return Err(Error::Config("[operator] and [profile] are mutually exclusive".into())),
            (None, None) => return Err(Error::Config("one of [operator] or [profile] is required".into())),
        };
        let datum = self.datum.resolve(base)?;
        let ns = match &self.plan.n {
            NSetting::One(n) => vec![*n],
            NSetting::Sweep(v) => v.clone(),
        };
        if ns.is_empty() || ns.contains(&0) {
            return Err(Error::Config("plan.n must be positive".into()));
        }
        if ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("plan.n sweep must be strictly increasing".into()));
        }
        let n_max = *ns.last().unwrap();
        let rho = self.resolve_rho(&dynamics, n_max)?;
        let point = SamplingPoint::from_expr(&self.plan.x0, self.plan.k_scan)?;
        let mut settings = JobSettings::new(self.plan.t1, rho, ns[0]);
        settings.guard_bits = self.tolerances.guard_bits;
        settings.a0_tol = self.tolerances.a0;
        settings.sample_tol = self.tolerances.sample;
        settings.precision = self.precision.bits;
        settings.auto_raise = self.precision.auto_raise;
        settings.noise = self.noise.as_ref().map(|n| (n.magnitude, n.seed));
        let out_dir = self.output.dir.as_ref().map(|d| if d.is_absolute() { d.clone() } else { base.join(d) });
        Ok(Experiment { dynamics, datum, point, settings, ns, out_dir })
    }

    fn resolve_rho(&self, dynamics: &Dynamics, n_max: usize) -> Result<f64> {
        let spec = dynamics.recovery_operator();
        match &self.plan.rho {
            RhoSetting::Value(v) => Ok(*v),
            RhoSetting::Rule(r) if r == "auto" => Ok(default_rho(spec.order_half())),
            RhoSetting::Rule(r) if r == "safe" => Ok(safe_rho(&spec, n_max)),
            RhoSetting::Rule(r) => {
                Err(Error::Config(format!("plan.rho must be a number, \"auto\" or \"safe\", got {r:?}")))
            }
        }
    }
}

/// The margin rule applied to the larger of the order threshold and the
/// ratio under which the coefficient bounds propagate for `n` samples.
pub fn safe_rho(spec: &OperatorSpec, n: usize) -> f64 {
    DEFAULT_RHO_MARGIN * spec.rho_threshold().max(spec.induction_rho(n))
}

fn implied_lower_bound(kind: &ProfileKind) -> f64 {
    match kind {
        ProfileKind::Constant { c } => *c,
        ProfileKind::Affine { a, .. } => *a,
        ProfileKind::Sinusoidal { a, b, .. } => a - b.abs(),
        ProfileKind::Tabulated { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

impl DatumSection {
    fn resolve(&self, base: &Path) -> Result<InitialDatum> {
        match (&self.file, &self.random, &self.coeffs) {
            (Some(file), None, None) => {
                if self.r.is_some() {
                    return Err(Error::Config("datum.r applies to inline coeffs only".into()));
                }
                let path = if file.is_absolute() { file.clone() } else { base.join(file) };
                InitialDatum::read_json(&path).map_err(|e| Error::Config(format!("datum file {}: {e}", path.display())))
            }
            (None, Some(rd), None) => {
                if self.r.is_some() {
                    return Err(Error::Config("datum.r applies to inline coeffs only".into()));
                }
                random_ball_member(rd.r, rd.k, rd.margin, rd.seed)
            }
            (None, None, Some(coeffs)) => {
                let r = self.r.ok_or_else(|| Error::Config("inline datum needs datum.r".into()))?;
                InitialDatum::new(r, coeffs.clone())
            }
            _ => Err(Error::Config("datum needs exactly one of file, random or coeffs".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [operator]
        alpha = [1]
        [datum.random]
        r = 2.0
        k = 50
        seed = 7
        [plan]
        t1 = 0.5
        k_scan = 1000
        n = 8
    "#;

    #[test]
    fn minimal_config_resolves_defaults() {
        let e = ExperimentConfig::from_toml(BASE).unwrap().build(Path::new(".")).unwrap();
        assert_eq!(e.ns, vec![8]);
        assert_eq!(e.settings.rho, default_rho(1));
        assert_eq!(e.point.expr, DEFAULT_X0_EXPR);
        assert_eq!(e.point.scan.k_scan, 1000);
        assert_eq!(e.datum.support_len(), 50);
        assert!(matches!(e.dynamics, Dynamics::Autonomous(_)));
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = BASE.replace("t1 = 0.5", "t1 = 0.5\nrh0 = 2.0");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
        let text = BASE.replace("seed = 7", "seed = 7\nsed = 1");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn rho_rules() {
        let cfg = |rho: &str| {
            ExperimentConfig::from_toml(&BASE.replace("n = 8", &format!("n = 8\nrho = {rho}")))
                .unwrap()
                .build(Path::new("."))
        };
        assert_eq!(cfg("2.9").unwrap().settings.rho, 2.9);
        let safe = cfg("\"safe\"").unwrap().settings.rho;
        assert!((safe - 1.05 * 8.0 / 3.0).abs() < 1e-12);
        assert!(cfg("\"fast\"").is_err());
    }

    #[test]
    fn sections_are_exclusive() {
        let both = format!("{BASE}\n[profile]\nkind = \"constant\"\nc = 1.0\n");
        let e = ExperimentConfig::from_toml(&both).unwrap().build(Path::new("."));
        assert!(matches!(e, Err(Error::Config(_))));
        let profile = BASE.replace(
            "[operator]\n        alpha = [1]",
            "[profile]\nkind = \"sinusoidal\"\na = 1.0\nb = 0.5\nomega = 1.0",
        );
        let e = ExperimentConfig::from_toml(&profile).unwrap().build(Path::new(".")).unwrap();
        let Dynamics::Rescaled(p) = e.dynamics else { panic!() };
        assert_eq!(p.lower_bound, 0.5);
    }

    #[test]
    fn sweep_must_increase() {
        let text = BASE.replace("n = 8", "n = [4, 8, 8]");
        assert!(ExperimentConfig::from_toml(&text).unwrap().build(Path::new(".")).is_err());
        let text = BASE.replace("n = 8", "n = [4, 8, 12]");
        let e = ExperimentConfig::from_toml(&text).unwrap().build(Path::new(".")).unwrap();
        assert_eq!(e.ns, vec![4, 8, 12]);
    }

    #[test]
    fn inline_and_exclusive_datum() {
        let text = BASE.replace(
            "[datum.random]\n        r = 2.0\n        k = 50\n        seed = 7",
            "[datum]\nr = 1.0\ncoeffs = [0.5, 0.25]",
        );
        let e = ExperimentConfig::from_toml(&text).unwrap().build(Path::new(".")).unwrap();
        assert_eq!(e.datum.coeffs, vec![0.5, 0.25]);
        let text = BASE.replace("[datum.random]", "[datum]\ncoeffs = [0.5]\n[datum.random]");
        assert!(ExperimentConfig::from_toml(&text).unwrap().build(Path::new(".")).is_err());
    }
}
