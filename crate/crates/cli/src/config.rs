use std::path::{Path, PathBuf};

use limsup_core::covering::{DimensionConfig, HitConfig, OperatorConfig};
use limsup_core::hitting::{build_ordinal_tower, DivergencePolicy, RadiusSchedule};
use limsup_core::measures::{cantor_theta, lebesgue_measure, mu_one, mu_two, BlockSchedule, ConstructionTree};
use limsup_core::spectra::{CantorParams, PredictKind};
use limsup_core::{GridSet, MeasureModel};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default = "default_schedule")]
    pub schedule: RadiusSchedule,
    #[serde(default)]
    pub operator: OperatorSection,
    #[serde(default)]
    pub covering: CoveringSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_version() -> String {
    CONFIG_VERSION.to_string()
}

fn default_schedule() -> RadiusSchedule {
    RadiusSchedule::PowerLaw {
        alpha: 2.0,
        k_max: 1 << 20,
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: default_version(),
            seed: 0,
            measure: MeasureConfig::default(),
            schedule: default_schedule(),
            operator: OperatorSection::default(),
            covering: CoveringSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureName {
    Lebesgue,
    Theta,
    Mu1,
    Mu2,
}

/// Measure on `[0,1]`. Cantor measures use ratio `a` everywhere when `b` is absent,
/// otherwise `a` on the even blocks and `b` on the odd ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub kind: MeasureName,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default = "default_growth")]
    pub growth: u32,
    #[serde(default = "default_max_level")]
    pub max_level: u32,
    /// Explicit block boundaries `N_1 < N_2 < ...`; overrides `growth`.
    #[serde(default)]
    pub breakpoints: Option<Vec<u32>>,
}

fn default_growth() -> u32 {
    10
}

fn default_max_level() -> u32 {
    30
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            kind: MeasureName::Lebesgue,
            a: None,
            b: None,
            beta: None,
            growth: default_growth(),
            max_level: default_max_level(),
            breakpoints: None,
        }
    }
}

impl MeasureConfig {
    pub fn schedule(&self) -> Result<BlockSchedule, CliError> {
        let a = self
            .a
            .ok_or_else(|| CliError::Config(format!("measure kind {:?} needs the ratio `a`", self.kind)))?;
        let s = match (self.b, &self.breakpoints) {
            (None, _) => BlockSchedule::constant(a, self.max_level)?,
            (Some(b), Some(bp)) => BlockSchedule::new(a, b, bp.clone(), self.max_level)?,
            (Some(b), None) => BlockSchedule::with_growth(a, b, self.growth, self.max_level)?,
        };
        Ok(s)
    }

    fn beta(&self) -> Result<f64, CliError> {
        self.beta
            .ok_or_else(|| CliError::Config(format!("measure kind {:?} needs `beta`", self.kind)))
    }

    pub fn build(&self) -> Result<MeasureModel, CliError> {
        Ok(match self.kind {
            MeasureName::Lebesgue => lebesgue_measure(),
            MeasureName::Theta => cantor_theta(self.schedule()?),
            MeasureName::Mu1 => mu_one(self.schedule()?, self.beta()?)?,
            MeasureName::Mu2 => mu_two(self.schedule()?, self.beta()?)?,
        })
    }

    pub fn predict_kind(&self) -> Result<PredictKind, CliError> {
        if self.kind == MeasureName::Lebesgue {
            return Ok(PredictKind::Lebesgue);
        }
        let sc = self.schedule()?;
        let (s, u) = (sc.s(), sc.u());
        Ok(match self.kind {
            MeasureName::Lebesgue => unreachable!(),
            MeasureName::Theta => PredictKind::Theta { s, u },
            MeasureName::Mu1 => PredictKind::Mu1(CantorParams::new(s, u, self.beta()?)),
            MeasureName::Mu2 => PredictKind::Mu2(CantorParams::new(s, u, self.beta()?)),
        })
    }
}

/// A target or starting set, rasterized at the run's depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSource {
    Full,
    Empty,
    Parts {
        #[serde(default)]
        intervals: Vec<(f64, f64)>,
        #[serde(default)]
        points: Vec<f64>,
    },
    /// Middle-gap Cantor set of the given dimension with constant ratio `2^(-1/dimension)`.
    Cantor {
        dimension: f64,
        #[serde(default = "default_cantor_levels")]
        max_level: u32,
    },
    Tower {
        n: u32,
    },
    Mask {
        runs: Vec<(usize, usize)>,
        depth: u32,
    },
}

fn default_cantor_levels() -> u32 {
    40
}

impl SetSource {
    pub fn build(&self, depth: u32) -> Result<GridSet, CliError> {
        Ok(match self {
            SetSource::Full => GridSet::full(depth)?,
            SetSource::Empty => GridSet::empty(depth)?,
            SetSource::Parts { intervals, points } => GridSet::from_parts(intervals, points, depth)?,
            SetSource::Cantor { dimension, max_level } => {
                if !(*dimension > 0.0 && *dimension < 1.0) {
                    return Err(CliError::Config(format!("Cantor dimension {dimension} outside (0, 1)")));
                }
                let a = (-1.0 / dimension).exp2();
                ConstructionTree::new(BlockSchedule::constant(a, *max_level)?).mask(depth)?
            }
            SetSource::Tower { n } => build_ordinal_tower(*n, depth)?,
            SetSource::Mask { runs, depth: d } => {
                let mut s = GridSet::empty(*d)?;
                for &(start, len) in runs {
                    if len == 0 || start + len > s.len() {
                        return Err(CliError::Config(format!("run ({start}, {len}) outside the grid")));
                    }
                    s.set_range(start, start + len - 1);
                }
                if *d != depth {
                    return Err(CliError::Config(format!("mask depth {d} differs from run depth {depth}")));
                }
                s
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    /// Weight exponent on `(2 r_k)^t`; 0 is the plain hitting operator.
    pub t: f64,
    pub depth: u32,
    pub r_probe: f64,
    pub max_stages: usize,
    pub policy: DivergencePolicy,
    pub set: SetSource,
}

impl Default for OperatorSection {
    fn default() -> Self {
        OperatorSection {
            t: 0.0,
            depth: 14,
            r_probe: 1.0 / 64.0,
            max_stages: 10,
            policy: DivergencePolicy::default(),
            set: SetSource::Full,
        }
    }
}

impl OperatorSection {
    pub fn resolve(&self, sched: &RadiusSchedule) -> Result<OperatorConfig, CliError> {
        sched.validate()?;
        if !(self.t >= 0.0) {
            return Err(CliError::Config(format!("operator.t must be nonnegative, got {}", self.t)));
        }
        Ok(OperatorConfig {
            t: self.t,
            policy: self.policy,
            r_probe: self.r_probe,
            max_stages: self.max_stages,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CoveringMode {
    Dim,
    Hit,
    Dichotomy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoveringSection {
    pub mode: CoveringMode,
    /// Grid depth for hit targets.
    pub depth: u32,
    pub dimension: DimensionConfig,
    pub hit: HitConfig,
    pub target: SetSource,
}

impl Default for CoveringSection {
    fn default() -> Self {
        CoveringSection {
            mode: CoveringMode::Dim,
            depth: 26,
            dimension: DimensionConfig::default(),
            hit: HitConfig::default(),
            target: SetSource::Full,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub depth: Option<u32>,
    pub alpha: Option<f64>,
    pub mode: Option<CoveringMode>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!("unsupported config version {:?}", self.version)));
        }
        self.schedule.validate()?;
        self.operator.policy.validate()?;
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats is empty".into()));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output.dir = Some(out.clone());
        }
        if let Some(trials) = o.trials {
            self.covering.hit.trials = trials;
        }
        if let Some(depth) = o.depth {
            self.operator.depth = depth;
            self.covering.depth = depth;
        }
        if let Some(mode) = o.mode {
            self.covering.mode = mode;
        }
        if let Some(alpha) = o.alpha {
            let k_max = self.schedule.k_max();
            self.schedule = RadiusSchedule::power_law(alpha, k_max)?;
        }
        self.validate()
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}
