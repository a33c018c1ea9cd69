//! Run configuration: command-line flags, `KRR_SKETCH_*` environment
//! variables, an optional TOML file, and built-in defaults, in that order.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use krr_sketch::pipeline::RowScope;
use krr_sketch::KernelSpec;

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_MU: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 0.5;
pub const DEFAULT_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    BatchExact,
    InkOracle,
    InkEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Gaussian,
    Linear,
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Dictionary,
    Full,
}

impl From<Scope> for RowScope {
    fn from(s: Scope) -> Self {
        match s {
            Scope::Dictionary => RowScope::Dictionary,
            Scope::Full => RowScope::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Libsvm,
}

/// Which CSV column holds the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelColumn {
    Last,
    None,
    /// 1-based.
    #[serde(untagged)]
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "last" => Ok(LabelColumn::Last),
            "none" => Ok(LabelColumn::None),
            _ => match s.parse::<usize>() {
                Ok(0) | Err(_) => Err(format!(
                    "expected 'last', 'none' or a 1-based column number, got '{s}'"
                )),
                Ok(i) => Ok(LabelColumn::Index(i)),
            },
        }
    }
}

/// Flags shared by `run` and `sweep`. Every value may also come from the
/// environment or from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with any of the keys below (kebab-case)
    #[arg(long, env = "KRR_SKETCH_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, env = "KRR_SKETCH_ALGORITHM")]
    pub algorithm: Option<Algorithm>,
    #[arg(long, value_enum, env = "KRR_SKETCH_KERNEL")]
    pub kernel: Option<KernelFamily>,
    /// Gaussian bandwidth [default: 1]
    #[arg(long, env = "KRR_SKETCH_BANDWIDTH")]
    pub bandwidth: Option<f64>,
    /// Polynomial degree [default: 2]
    #[arg(long, env = "KRR_SKETCH_DEGREE")]
    pub degree: Option<u32>,
    /// Polynomial offset [default: 1]
    #[arg(long, env = "KRR_SKETCH_OFFSET")]
    pub offset: Option<f64>,
    /// Nyström regularizer [default: 1]
    #[arg(long, env = "KRR_SKETCH_GAMMA")]
    pub gamma: Option<f64>,
    /// Ridge parameter [default: 1]
    #[arg(long, env = "KRR_SKETCH_MU")]
    pub mu: Option<f64>,
    /// Accuracy [default: 0.5]
    #[arg(long, env = "KRR_SKETCH_EPSILON")]
    pub epsilon: Option<f64>,
    /// Failure probability [default: 0.1]
    #[arg(long, env = "KRR_SKETCH_DELTA")]
    pub delta: Option<f64>,
    /// q̄ for the streaming algorithms, m for batch-exact
    #[arg(long, visible_aliases = ["q-bar", "m"], env = "KRR_SKETCH_BUDGET")]
    pub budget: Option<u64>,
    #[arg(long, env = "KRR_SKETCH_SEED")]
    pub seed: Option<u64>,
    /// Checkpoint interval in points; 0 keeps only the final checkpoint
    #[arg(long, env = "KRR_SKETCH_CHECKPOINT_EVERY")]
    pub checkpoint_every: Option<usize>,
    #[arg(long, value_enum, env = "KRR_SKETCH_SCOPE")]
    pub scope: Option<Scope>,
    /// Multiplier on the 8·q̄ dictionary cap
    #[arg(long, env = "KRR_SKETCH_SAFETY_FACTOR")]
    pub safety_factor: Option<f64>,
    /// Re-stream the data and check every checkpoint (desk scale)
    #[arg(long, env = "KRR_SKETCH_VERIFY")]
    pub verify: bool,
    #[arg(long, env = "KRR_SKETCH_INPUT")]
    pub input: Option<PathBuf>,
    /// Inferred from the file extension when omitted
    #[arg(long, value_enum, env = "KRR_SKETCH_FORMAT")]
    pub format: Option<InputFormat>,
    /// The CSV input starts with a header row
    #[arg(long, env = "KRR_SKETCH_HEADER")]
    pub header: bool,
    /// `last`, `none`, or a 1-based column number
    #[arg(long, env = "KRR_SKETCH_LABEL_COLUMN")]
    pub label_column: Option<LabelColumn>,
    #[arg(long, env = "KRR_SKETCH_OUTPUT")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    algorithm: Option<Algorithm>,
    kernel: Option<KernelFamily>,
    bandwidth: Option<f64>,
    degree: Option<u32>,
    offset: Option<f64>,
    gamma: Option<f64>,
    mu: Option<f64>,
    epsilon: Option<f64>,
    delta: Option<f64>,
    #[serde(alias = "q-bar", alias = "m")]
    budget: Option<u64>,
    seed: Option<u64>,
    checkpoint_every: Option<usize>,
    scope: Option<Scope>,
    safety_factor: Option<f64>,
    verify: Option<bool>,
    input: Option<PathBuf>,
    format: Option<InputFormat>,
    header: Option<bool>,
    label_column: Option<LabelColumn>,
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpec {
    pub path: PathBuf,
    pub format: InputFormat,
    pub header: bool,
    pub label_column: LabelColumn,
}

/// A fully resolved run. This is what `config_echo` records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub kernel: KernelSpec,
    pub gamma: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// `None` lets batch-exact pick m from the exact effective dimension.
    pub budget: Option<u64>,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub scope: Scope,
    pub safety_factor: f64,
    pub verify: bool,
    pub input: InputSpec,
}

impl RunArgs {
    /// Merges flags (and their environment variables) over the config file
    /// over defaults. Returns the run and its output directory.
    pub fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let file = match &self.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        macro_rules! pick {
            ($f:ident, $default:expr) => {
                self.$f.or(file.$f).unwrap_or($default)
            };
        }
        let family = pick!(kernel, KernelFamily::Gaussian);
        let kernel = match family {
            KernelFamily::Gaussian => KernelSpec::gaussian(pick!(bandwidth, 1.0))?,
            KernelFamily::Linear => KernelSpec::Linear,
            KernelFamily::Polynomial => {
                KernelSpec::polynomial(pick!(degree, 2), pick!(offset, 1.0))?
            }
        };
        let Some(path) = self.input.clone().or(file.input) else {
            bail!("no input file given (--input or `input` in the config file)");
        };
        let format = self
            .format
            .or(file.format)
            .unwrap_or_else(|| infer_format(&path));
        let Some(output) = self.output.clone().or(file.output) else {
            bail!("no output directory given (--output or `output` in the config file)");
        };
        let config = RunConfig {
            algorithm: pick!(algorithm, Algorithm::InkEstimate),
            kernel,
            gamma: pick!(gamma, DEFAULT_GAMMA),
            mu: pick!(mu, DEFAULT_MU),
            epsilon: pick!(epsilon, DEFAULT_EPSILON),
            delta: pick!(delta, DEFAULT_DELTA),
            budget: self.budget.or(file.budget),
            seed: pick!(seed, 0),
            checkpoint_every: pick!(checkpoint_every, 0),
            scope: pick!(scope, Scope::Dictionary),
            safety_factor: pick!(safety_factor, 1.0),
            verify: self.verify || file.verify.unwrap_or(false),
            input: InputSpec {
                path,
                format,
                header: self.header || file.header.unwrap_or(false),
                label_column: pick!(label_column, LabelColumn::Last),
            },
        };
        config.validate()?;
        Ok((config, output))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            bail!("gamma must be positive, got {}", self.gamma);
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            bail!("mu must be positive, got {}", self.mu);
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            bail!("epsilon must lie in (0, 1), got {}", self.epsilon);
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("delta must lie in (0, 1), got {}", self.delta);
        }
        if self.budget == Some(0) {
            bail!("budget must be at least 1");
        }
        if self.budget.is_none() && self.algorithm != Algorithm::BatchExact {
            bail!("streaming algorithms need --budget (q̄); `suggest-budget` computes one");
        }
        if !(self.safety_factor.is_finite() && self.safety_factor >= 1.0) {
            bail!(
                "safety factor must be at least 1, got {}",
                self.safety_factor
            );
        }
        Ok(())
    }
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn infer_format(path: &Path) -> InputFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("svm" | "libsvm") => InputFormat::Libsvm,
        _ => InputFormat::Csv,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunArgs {
        RunArgs {
            input: Some("data.csv".into()),
            output: Some("out".into()),
            budget: Some(50),
            ..RunArgs::default()
        }
    }

    #[test]
    fn defaults_are_documented_values() {
        let (c, out) = base().resolve().unwrap();
        assert_eq!(out, PathBuf::from("out"));
        assert_eq!((c.gamma, c.mu, c.epsilon, c.delta), (1.0, 1.0, 0.5, 0.1));
        assert_eq!(c.algorithm, Algorithm::InkEstimate);
        assert_eq!(c.kernel, KernelSpec::Gaussian { bandwidth: 1.0 });
        assert_eq!(c.input.format, InputFormat::Csv);
        assert_eq!(c.input.label_column, LabelColumn::Last);
    }

    #[test]
    fn flags_beat_file_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(
            &p,
            "gamma = 2.0\nmu = 3.0\nkernel = \"polynomial\"\ndegree = 3\nlabel-column = 2\n",
        )
        .unwrap();
        let args = RunArgs {
            config: Some(p),
            gamma: Some(4.0),
            ..base()
        };
        let (c, _) = args.resolve().unwrap();
        assert_eq!(c.gamma, 4.0);
        assert_eq!(c.mu, 3.0);
        assert_eq!(c.epsilon, 0.5);
        assert_eq!(
            c.kernel,
            KernelSpec::Polynomial {
                degree: 3,
                offset: 1.0
            }
        );
        assert_eq!(c.input.label_column, LabelColumn::Index(2));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "gama = 2.0\n").unwrap();
        let args = RunArgs {
            config: Some(p),
            ..base()
        };
        assert!(args.resolve().is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for args in [
            RunArgs {
                epsilon: Some(1.0),
                ..base()
            },
            RunArgs {
                gamma: Some(0.0),
                ..base()
            },
            RunArgs {
                budget: Some(0),
                ..base()
            },
            RunArgs {
                budget: None,
                ..base()
            },
            RunArgs {
                bandwidth: Some(-1.0),
                ..base()
            },
            RunArgs {
                input: None,
                ..base()
            },
        ] {
            assert!(args.resolve().is_err(), "{args:?}");
        }
        let batch = RunArgs {
            budget: None,
            algorithm: Some(Algorithm::BatchExact),
            ..base()
        };
        assert!(batch.resolve().is_ok());
    }

    #[test]
    fn label_column_parses() {
        assert_eq!("last".parse::<LabelColumn>().unwrap(), LabelColumn::Last);
        assert_eq!("none".parse::<LabelColumn>().unwrap(), LabelColumn::None);
        assert_eq!("3".parse::<LabelColumn>().unwrap(), LabelColumn::Index(3));
        assert!("0".parse::<LabelColumn>().is_err());
        assert!("x".parse::<LabelColumn>().is_err());
    }

    #[test]
    fn format_follows_extension() {
        assert_eq!(infer_format(Path::new("a.libsvm")), InputFormat::Libsvm);
        assert_eq!(infer_format(Path::new("a.svm")), InputFormat::Libsvm);
        assert_eq!(infer_format(Path::new("a.txt")), InputFormat::Csv);
    }
}
