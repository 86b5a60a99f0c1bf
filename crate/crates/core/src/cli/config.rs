//! Run configuration: a TOML document with the tables `[manifold]`,
//! `[curve]`, `[weight]`, `[tolerances]` and `[output]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::biharmonic::{BiharmonicTolerances, Verdict};
use crate::manifold::ModelParams;

/// Environment variable selecting the default tolerance profile.
pub const PROFILE_ENV: &str = "SSPACE_TOL_PROFILE";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    expected: Option<String>,
    manifold: RawManifold,
    curve: RawCurve,
    weight: Option<RawWeight>,
    tolerances: Option<BTreeMap<String, f64>>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifold {
    m: i64,
    s: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCurve {
    source: String,
    path: Option<String>,
    kind: Option<String>,
    c1: Option<f64>,
    c2: Option<f64>,
    c3: Option<f64>,
    c4: Option<f64>,
    k1: Option<f64>,
    order: Option<usize>,
    seed: Option<u64>,
    window: Option<[f64; 2]>,
    step: Option<f64>,
    drift_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeight {
    c1: Option<f64>,
    path: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    report: Option<String>,
    csv: Option<String>,
    trace: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynthKind {
    Geodesic,
    Circle { k1: f64 },
    Random { order: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum CurveSource {
    Csv { path: PathBuf },
    BuiltinExample { c1: f64, c2: f64, c3: f64, c4: f64, window: (f64, f64), step: f64, drift_tol: f64 },
    Synthesis { kind: SynthKind, window: (f64, f64), step: f64, drift_tol: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSpec {
    /// `f = 1`.
    Unit,
    /// `f = c1 k1^(-3/2)`.
    CurvaturePower(f64),
    /// CSV with columns `t, f` on the trace grid.
    Sampled(PathBuf),
}

/// Named thresholds. Defaults come from the profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub residual: f64,
    pub f_variation: f64,
    pub case_ii: f64,
    pub case_iii: f64,
    pub beta_constancy: f64,
    pub ratio_constancy: f64,
    /// Slant constancy; defaults depend on whether the trace is sampled.
    pub slant: Option<f64>,
    pub frenet_threshold: f64,
}

pub const TOLERANCE_KEYS: [&str; 8] = [
    "residual",
    "f_variation",
    "case_ii",
    "case_iii",
    "beta_constancy",
    "ratio_constancy",
    "slant",
    "frenet_threshold",
];

impl Tolerances {
    pub fn profile(name: &str) -> Option<Self> {
        let base = Tolerances {
            residual: 1e-3,
            f_variation: 1e-8,
            case_ii: 1e-6,
            case_iii: 1e-6,
            beta_constancy: 1e-6,
            ratio_constancy: 1e-6,
            slant: None,
            frenet_threshold: 1e-6,
        };
        match name {
            "default" => Some(base),
            "strict" => Some(Tolerances { residual: 1e-6, ..base }),
            "loose" => Some(Tolerances { residual: 1e-2, case_ii: 1e-4, case_iii: 1e-4, ..base }),
            _ => None,
        }
    }

    fn set(&mut self, key: &str, v: f64) -> Result<(), ConfigError> {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ConfigError::Invalid(format!("tolerance {key} must be positive, got {v}")));
        }
        match key {
            "residual" => self.residual = v,
            "f_variation" => self.f_variation = v,
            "case_ii" => self.case_ii = v,
            "case_iii" => self.case_iii = v,
            "beta_constancy" => self.beta_constancy = v,
            "ratio_constancy" => self.ratio_constancy = v,
            "slant" => self.slant = Some(v),
            "frenet_threshold" => self.frenet_threshold = v,
            _ => return Err(ConfigError::Invalid(format!("unknown tolerance {key:?}"))),
        }
        Ok(())
    }

    pub fn biharmonic(&self) -> BiharmonicTolerances {
        BiharmonicTolerances {
            residual: self.residual,
            f_variation: self.f_variation,
            case_ii: self.case_ii,
            case_iii: self.case_iii,
            beta_constancy: self.beta_constancy,
            ratio_constancy: self.ratio_constancy,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(skip)]
    pub params: ModelParams,
    pub m: usize,
    pub s: usize,
    pub curve: CurveSource,
    pub weight: WeightSpec,
    pub tolerances: Tolerances,
    pub profile: String,
    pub expected: Option<Verdict>,
    pub seed: u64,
    #[serde(skip)]
    pub output: OutputPaths,
    /// SHA-256 of the config text.
    pub config_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Tolerance profile named by the environment, or `default`.
pub fn profile_from_env() -> String {
    std::env::var(PROFILE_ENV).unwrap_or_else(|_| "default".to_string())
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base, &profile_from_env())
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path, profile: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let invalid = |s: String| ConfigError::Invalid(s);
        if raw.manifold.m < 1 || raw.manifold.s < 1 {
            return Err(invalid(format!("manifold needs m >= 1 and s >= 1, got m = {}, s = {}", raw.manifold.m, raw.manifold.s)));
        }
        let (m, s) = (raw.manifold.m as usize, raw.manifold.s as usize);
        let params = ModelParams::new(m, s).map_err(|e| invalid(e.to_string()))?;
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };

        let c = &raw.curve;
        let window = |default: (f64, f64)| -> Result<(f64, f64), ConfigError> {
            let w = c.window.map(|w| (w[0], w[1])).unwrap_or(default);
            if !(w.1 > w.0) {
                return Err(invalid(format!("window [{}, {}] is empty", w.0, w.1)));
            }
            Ok(w)
        };
        let step = |default: f64| -> Result<f64, ConfigError> {
            let h = c.step.unwrap_or(default);
            if !(h > 0.0) {
                return Err(invalid(format!("step must be positive, got {h}")));
            }
            Ok(h)
        };
        let drift_tol = c.drift_tol.unwrap_or(crate::synth::DEFAULT_DRIFT_TOL);
        let unused = |names: &[(&str, bool)]| -> Result<(), ConfigError> {
            for (n, set) in names {
                if *set {
                    return Err(invalid(format!("curve.{n} does not apply to source {:?}", c.source)));
                }
            }
            Ok(())
        };
        let curve = match c.source.as_str() {
            "csv" => {
                unused(&[("kind", c.kind.is_some()), ("window", c.window.is_some()), ("step", c.step.is_some())])?;
                let path = c.path.as_deref().ok_or_else(|| invalid("csv source needs curve.path".into()))?;
                CurveSource::Csv { path: resolve(path) }
            }
            "builtin-example" => {
                unused(&[("path", c.path.is_some()), ("kind", c.kind.is_some())])?;
                if (m, s) != (2, 2) {
                    return Err(invalid(format!("builtin-example lives in m = 2, s = 2, not m = {m}, s = {s}")));
                }
                CurveSource::BuiltinExample {
                    c1: c.c1.unwrap_or(1.0),
                    c2: c.c2.unwrap_or(1.0),
                    c3: c.c3.unwrap_or(4.0),
                    c4: c.c4.unwrap_or(0.0),
                    window: window((-2.0, 2.0))?,
                    step: step(crate::synth::DEFAULT_STEP)?,
                    drift_tol,
                }
            }
            "synthesis" => {
                unused(&[("path", c.path.is_some())])?;
                let kind = match c.kind.as_deref() {
                    Some("geodesic") => SynthKind::Geodesic,
                    Some("circle") => {
                        let k1 = c.k1.unwrap_or(1.0);
                        if !(k1 > 0.0) {
                            return Err(invalid(format!("circle needs k1 > 0, got {k1}")));
                        }
                        if m < 2 {
                            return Err(invalid("circle needs m >= 2".into()));
                        }
                        SynthKind::Circle { k1 }
                    }
                    Some("random") => SynthKind::Random {
                        order: c.order.unwrap_or(3),
                        seed: c.seed.or(raw.seed).unwrap_or(0),
                    },
                    Some(other) => return Err(invalid(format!("unknown synthesis kind {other:?}"))),
                    None => return Err(invalid("synthesis source needs curve.kind".into())),
                };
                CurveSource::Synthesis { kind, window: window((0.0, 1.0))?, step: step(1e-3)?, drift_tol }
            }
            other => {
                return Err(invalid(format!(
                    "curve.source must be one of csv, builtin-example, synthesis; got {other:?}"
                )))
            }
        };

        let weight = match raw.weight {
            None => match curve {
                CurveSource::BuiltinExample { c1, .. } => WeightSpec::CurvaturePower(c1),
                _ => WeightSpec::Unit,
            },
            Some(RawWeight { c1: Some(_), path: Some(_) }) => {
                return Err(invalid("weight takes either c1 or path, not both".into()))
            }
            Some(RawWeight { c1: Some(c1), path: None }) => {
                if !(c1 > 0.0) {
                    return Err(invalid(format!("weight.c1 must be positive, got {c1}")));
                }
                WeightSpec::CurvaturePower(c1)
            }
            Some(RawWeight { c1: None, path: Some(p) }) => WeightSpec::Sampled(resolve(&p)),
            Some(RawWeight { c1: None, path: None }) => WeightSpec::Unit,
        };

        let mut tolerances =
            Tolerances::profile(profile).ok_or_else(|| invalid(format!("unknown tolerance profile {profile:?}")))?;
        if let Some(map) = &raw.tolerances {
            for (k, v) in map {
                tolerances.set(k, *v)?;
            }
        }

        let expected = match raw.expected.as_deref() {
            None | Some("any") => None,
            Some(v) => Some(Verdict::parse(v).ok_or_else(|| invalid(format!("unknown expected verdict {v:?}")))?),
        };
        let output = raw
            .output
            .map(|o| OutputPaths {
                report: o.report.as_deref().map(resolve),
                csv: o.csv.as_deref().map(resolve),
                trace: o.trace.as_deref().map(resolve),
            })
            .unwrap_or_default();

        Ok(RunConfig {
            params,
            m,
            s,
            curve,
            weight,
            tolerances,
            profile: profile.to_string(),
            expected,
            seed: raw.seed.unwrap_or(0),
            output,
            config_sha256: sha256_hex(text.as_bytes()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, Path::new("/tmp"), "default")
    }

    #[test]
    fn builtin_example_defaults() {
        let cfg = parse("expected = \"proper-f-biharmonic\"\n[manifold]\nm = 2\ns = 2\n[curve]\nsource = \"builtin-example\"\n").unwrap();
        assert_eq!(cfg.weight, WeightSpec::CurvaturePower(1.0));
        assert_eq!(cfg.expected, Some(Verdict::ProperFBiharmonic));
        assert!(matches!(cfg.curve, CurveSource::BuiltinExample { c3, .. } if c3 == 4.0));
        assert_eq!(cfg.config_sha256.len(), 64);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse("[manifold]\nm = 0\ns = 2\n[curve]\nsource = \"csv\"\npath = \"a\"\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("[manifold]\nm = 2\ns = 2\n[curve]\nsource = \"nope\"\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("[manifold]\nm = 2\ns = 2\n[curve]\nsource = \"csv\"\npath = \"a\"\nkind = \"circle\"\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("[manifold]\nm = 2\ns = 2\n[curve]\nsource = \"synthesis\"\nkind = \"geodesic\"\n[tolerances]\nresidual = -1.0\n"), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse("[manifold]\nm = 2\ns = 2\nextra = 1\n[curve]\nsource = \"csv\"\npath = \"a\"\n"), Err(ConfigError::Parse(_))));
        assert!(RunConfig::parse("[manifold]\nm = 2\ns = 2\n[curve]\nsource = \"csv\"\npath = \"a\"\n", Path::new("."), "bogus").is_err());
    }

    #[test]
    fn tolerance_overrides_and_paths() {
        let cfg = parse("[manifold]\nm = 1\ns = 1\n[curve]\nsource = \"csv\"\npath = \"c.csv\"\n[weight]\npath = \"f.csv\"\n[tolerances]\nresidual = 1e-4\nslant = 1e-2\n").unwrap();
        assert_eq!(cfg.tolerances.residual, 1e-4);
        assert_eq!(cfg.tolerances.slant, Some(1e-2));
        assert_eq!(cfg.curve, CurveSource::Csv { path: PathBuf::from("/tmp/c.csv") });
        assert_eq!(cfg.weight, WeightSpec::Sampled(PathBuf::from("/tmp/f.csv")));
    }
}
