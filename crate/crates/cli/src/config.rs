//! Run configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use s3_core::dynamics::baker::PARAM_DIM;
use s3_core::response::Centering;
use s3_core::validation::SamplingConfig;
use s3_core::{Constant, FourierMode, Observable, ParamDirection, ParamVector, S3Config, State};

use crate::CliError;

/// Every field optional, as read from a config file. Unknown keys are
/// rejected so that typos do not silently fall back to defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub map: Option<String>,
    pub s: Option<Vec<f64>>,
    pub param_index: Option<usize>,
    pub direction: Option<Vec<f64>>,
    pub observable: Option<String>,
    pub runup: Option<usize>,
    #[serde(rename = "N")]
    pub samples: Option<usize>,
    #[serde(rename = "K")]
    pub truncation: Option<usize>,
    pub seed: Option<u64>,
    pub centering: Option<Centering>,
    pub batches: Option<usize>,
    pub diagnostics: Option<bool>,
    pub out: Option<PathBuf>,
    pub oracle_delta: Option<f64>,
    pub oracle_orbits: Option<usize>,
    pub oracle_length: Option<usize>,
    pub oracle_runup: Option<usize>,
    pub grid: Option<Vec<f64>>,
    pub bins: Option<[usize; 2]>,
    pub ensemble: Option<usize>,
}

/// Flags shared by all subcommands; each one overrides the config file.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// JSON config file (a previous result file with a "config" key also works)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Map name (only "baker")
    #[arg(long, global = true)]
    pub map: Option<String>,
    /// Parameter vector, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub s: Option<Vec<f64>>,
    /// Differentiation parameter, 1-based (1 = s1)
    #[arg(long, global = true)]
    pub param: Option<usize>,
    /// Differentiation direction as parameter weights; replaces --param
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,
    /// Observable: "cos4x2", "constant" or "fourier:k1,k2"
    #[arg(long, global = true)]
    pub observable: Option<String>,
    /// Trajectory length used for averaging
    #[arg(long = "N", global = true)]
    pub samples: Option<usize>,
    /// Number of lag terms in the unstable contribution
    #[arg(long = "K", global = true)]
    pub truncation: Option<usize>,
    #[arg(long, global = true)]
    pub runup: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also run the diagnostic recursions (frames output)
    #[arg(long, global = true)]
    pub diagnostics: bool,
    /// Central-difference step of the oracle
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub oracle_delta: Option<f64>,
    #[arg(long, global = true)]
    pub oracle_orbits: Option<usize>,
    #[arg(long, global = true)]
    pub oracle_length: Option<usize>,
    /// Offsets along the direction, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub grid: Option<Vec<f64>>,
    /// Histogram bins as "bx,by"
    #[arg(long, global = true, value_delimiter = ',')]
    pub bins: Option<Vec<usize>>,
    /// Ensemble size for the direct Ruelle estimate
    #[arg(long, global = true)]
    pub ensemble: Option<usize>,
    /// Worker threads for parallel sweeps (default: all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapName {
    Baker,
}

/// Fully resolved and validated configuration. Serialized into every output
/// so a run can be repeated from its own artifact.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub map: MapName,
    pub s: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    pub observable: String,
    pub runup: usize,
    #[serde(rename = "N")]
    pub samples: usize,
    #[serde(rename = "K")]
    pub truncation: usize,
    pub seed: u64,
    pub centering: Centering,
    pub batches: usize,
    pub diagnostics: bool,
    /// Where results go; not part of the embedded record, so identical runs
    /// produce identical bytes wherever they are written.
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub oracle_delta: f64,
    pub oracle_orbits: usize,
    pub oracle_length: usize,
    pub oracle_runup: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    pub bins: [usize; 2],
    pub ensemble: usize,
}

/// Observable chosen by name.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObservableChoice {
    Fourier(FourierMode<2>),
    Constant(Constant),
}

impl Observable<2> for ObservableChoice {
    fn value(&self, x: &State<2>) -> f64 {
        match self {
            Self::Fourier(f) => f.value(x),
            Self::Constant(c) => c.value(x),
        }
    }

    fn gradient(&self, x: &State<2>) -> State<2> {
        match self {
            Self::Fourier(f) => f.gradient(x),
            Self::Constant(c) => c.gradient(x),
        }
    }
}

pub fn parse_observable(name: &str) -> Result<ObservableChoice, CliError> {
    match name {
        "cos4x2" => Ok(ObservableChoice::Fourier(FourierMode::cos_4x2())),
        "constant" => Ok(ObservableChoice::Constant(Constant(1.0))),
        other => {
            let bad = || CliError::Config(format!("unknown observable {other:?}"));
            let ks = other.strip_prefix("fourier:").ok_or_else(bad)?;
            let ks: Vec<f64> = ks
                .split(',')
                .map(|k| k.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad())?;
            match ks[..] {
                [k1, k2] if k1.is_finite() && k2.is_finite() => {
                    Ok(ObservableChoice::Fourier(FourierMode::new([k1, k2])))
                }
                _ => Err(bad()),
            }
        }
    }
}

/// Read a config file; a result file is accepted through its "config" key.
pub fn load_file(path: &Path) -> Result<PartialConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl PartialConfig {
    fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        macro_rules! take {
            ($($field:ident <- $flag:ident),* $(,)?) => {
                $(if let Some(v) = &o.$flag { self.$field = Some(v.clone()); })*
            };
        }
        take!(
            map <- map, s <- s, observable <- observable, runup <- runup,
            samples <- samples, truncation <- truncation, seed <- seed, out <- out,
            oracle_delta <- oracle_delta, oracle_orbits <- oracle_orbits,
            oracle_length <- oracle_length, grid <- grid, ensemble <- ensemble,
        );
        if let Some(k) = o.param {
            self.param_index = Some(k);
            self.direction = None;
        }
        if let Some(d) = &o.direction {
            self.direction = Some(d.clone());
            self.param_index = None;
        }
        if o.diagnostics {
            self.diagnostics = Some(true);
        }
        if let Some(b) = &o.bins {
            match b[..] {
                [bx, by] => self.bins = Some([bx, by]),
                _ => return Err(CliError::Config("--bins expects two values".into())),
            }
        }
        Ok(())
    }

    fn resolve(self) -> Result<RunConfig, CliError> {
        let missing = |f: &str| CliError::Config(format!("missing required field {f:?}"));
        let map = match self.map.ok_or_else(|| missing("map"))?.as_str() {
            "baker" => MapName::Baker,
            other => return Err(CliError::Config(format!("unknown map {other:?}"))),
        };
        let s = self.s.ok_or_else(|| missing("s"))?;
        if self.param_index.is_none() && self.direction.is_none() {
            return Err(missing("param_index"));
        }
        let s3 = S3Config::default();
        let sampling = SamplingConfig::default();
        let cfg = RunConfig {
            map,
            s,
            param_index: self.param_index,
            direction: self.direction,
            observable: self.observable.unwrap_or_else(|| "cos4x2".into()),
            runup: self.runup.unwrap_or(s3.runup),
            samples: self.samples.unwrap_or(s3.samples),
            truncation: self.truncation.unwrap_or(s3.truncation),
            seed: self.seed.unwrap_or(s3.seed),
            centering: self.centering.unwrap_or(s3.centering),
            batches: self.batches.unwrap_or(s3.batches),
            diagnostics: self.diagnostics.unwrap_or(false),
            out: self.out,
            oracle_delta: self.oracle_delta.unwrap_or(0.05),
            oracle_orbits: self.oracle_orbits.unwrap_or(sampling.orbits),
            oracle_length: self.oracle_length.unwrap_or(sampling.orbit_length),
            oracle_runup: self.oracle_runup.unwrap_or(sampling.runup),
            grid: self.grid,
            bins: self.bins.unwrap_or([64, 64]),
            ensemble: self.ensemble.unwrap_or(100_000),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    /// Merge an optional config file with the command-line flags.
    pub fn from_sources(o: &Overrides) -> Result<Self, CliError> {
        let mut partial = match &o.config {
            Some(path) => load_file(path)?,
            None => PartialConfig::default(),
        };
        partial.apply(o)?;
        partial.resolve()
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.s.len() != PARAM_DIM {
            return bad(format!("s needs {PARAM_DIM} values, got {}", self.s.len()));
        }
        if let Some(k) = self.param_index {
            if !(1..=PARAM_DIM).contains(&k) {
                return bad(format!("param_index must be in 1..={PARAM_DIM}, got {k}"));
            }
        }
        if let Some(d) = &self.direction {
            if d.len() != PARAM_DIM {
                return bad(format!(
                    "direction needs {PARAM_DIM} weights, got {}",
                    d.len()
                ));
            }
        }
        if self.samples == 0 {
            return bad("N must be at least 1".into());
        }
        if self.truncation == 0 {
            return bad("K must be at least 1".into());
        }
        if self.batches == 0 {
            return bad("batches must be at least 1".into());
        }
        if !(self.oracle_delta.is_finite() && self.oracle_delta != 0.0) {
            return bad("oracle_delta must be finite and non-zero".into());
        }
        if self.oracle_orbits < 2 || self.oracle_length == 0 {
            return bad("oracle needs at least 2 orbits of positive length".into());
        }
        if self.bins.contains(&0) {
            return bad("bins must be positive".into());
        }
        if self.ensemble < 2 {
            return bad("ensemble must be at least 2".into());
        }
        parse_observable(&self.observable)?;
        self.params()?;
        self.param_direction()?;
        Ok(())
    }

    pub fn params(&self) -> Result<ParamVector, CliError> {
        ParamVector::new(self.s.clone()).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn param_direction(&self) -> Result<ParamDirection, CliError> {
        let d = match (&self.direction, self.param_index) {
            (Some(w), _) => ParamDirection::from_weights(w.clone()),
            (None, Some(k)) => ParamDirection::single(PARAM_DIM, k - 1),
            (None, None) => unreachable!("checked at resolve time"),
        };
        d.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn observable(&self) -> ObservableChoice {
        parse_observable(&self.observable).expect("validated")
    }

    pub fn s3(&self) -> S3Config {
        S3Config {
            runup: self.runup,
            samples: self.samples,
            truncation: self.truncation,
            seed: self.seed,
            centering: self.centering,
            batches: self.batches,
        }
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            orbits: self.oracle_orbits,
            orbit_length: self.oracle_length,
            runup: self.oracle_runup,
            seed: s3_core::rng::derive_seed(self.seed, 1),
        }
    }
}
