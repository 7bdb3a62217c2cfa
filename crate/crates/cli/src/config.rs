//! Experiment configuration: flat `section.key = value` lines.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default, so a config only lists what it changes; unknown keys are errors.
//! [`ExperimentConfig::to_canonical`] writes every key, sorted, in a form that
//! parses back to the same config.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use deepres::diagnostics::{DiagnosticsConfig, RegimeThresholds, WindowRule};
use deepres::limits::{ConstantSpec, LimitMode, SmoothActivation, SweepConfig};
use deepres::resnet::{Activation, Architecture, DeltaMode, TrainConfig};

/// Size of the MNIST training split, the default `dataset.n` for MNIST.
pub const MNIST_TRAIN_SIZE: usize = 60_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    /// Dotted key, or `line N` for syntax errors.
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    Synthetic,
    Mnist,
}

impl FromStr for DataKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "synthetic" => Ok(DataKind::Synthetic),
            "mnist" => Ok(DataKind::Mnist),
            _ => Err(format!(
                "unknown dataset kind `{s}` (expected synthetic or mnist)"
            )),
        }
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataKind::Synthetic => "synthetic",
            DataKind::Mnist => "mnist",
        })
    }
}

/// An explicit depth list, or every power of two in `min..=max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Depths {
    List(Vec<usize>),
    PowersOfTwo { min: usize, max: usize },
}

impl Depths {
    pub fn resolve(&self) -> Vec<usize> {
        match self {
            Depths::List(v) => v.clone(),
            Depths::PowersOfTwo { min, max } => (0..usize::BITS)
                .map(|e| 1usize << e)
                .filter(|l| l >= min && l <= max)
                .collect(),
        }
    }
}

impl FromStr for Depths {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{}` is not a depth", t.trim()))
        };
        if let Some((a, b)) = s.split_once("..") {
            return Ok(Depths::PowersOfTwo {
                min: num(a)?,
                max: num(b)?,
            });
        }
        if s.trim().is_empty() {
            return Ok(Depths::List(Vec::new()));
        }
        Ok(Depths::List(
            s.split(',').map(num).collect::<Result<_, _>>()?,
        ))
    }
}

impl fmt::Display for Depths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depths::List(v) => {
                let parts: Vec<String> = v.iter().map(|l| l.to_string()).collect();
                f.write_str(&parts.join(","))
            }
            Depths::PowersOfTwo { min, max } => write!(f, "{min}..{max}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSection {
    pub kind: DataKind,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    /// Steps of the generating recursion (synthetic only).
    pub k_steps: usize,
    /// IDX files (MNIST only).
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSection {
    pub activation: Activation,
    pub delta_mode: DeltaMode,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSection {
    pub depths: Depths,
    /// Training runs per depth.
    pub seeds: usize,
    /// Master seed of network initialization and minibatch order.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub early_stop: f64,
    pub max_updates: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitsSection {
    /// Whether `run` includes the limits stage.
    pub enabled: bool,
    pub mode: LimitMode,
    pub spec: ConstantSpec,
    /// Every coordinate of the input.
    pub x: f64,
    pub depths: Depths,
    pub reference_depth: usize,
    pub paths: usize,
    pub seed: u64,
    pub rate_min: f64,
    pub rate_max: f64,
    pub require_decreasing: bool,
    pub ito_check: bool,
    pub ito_depth: usize,
    pub ito_paths: usize,
    pub ito_max_z_corrected: f64,
    pub ito_min_z_uncorrected: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub sweep: SweepSection,
    pub train: TrainSection,
    pub diagnostics: DiagnosticsConfig,
    pub limits: LimitsSection,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    /// Synthetic-data defaults: `N = 1024`, `B = 32`, `η = 0.01`, `ε = 0.01`,
    /// `T_max = 160`.
    fn default() -> Self {
        let t = TrainConfig::synthetic_defaults(0);
        Self {
            dataset: DatasetSection {
                kind: DataKind::Synthetic,
                seed: 0,
                n: 1024,
                d: 10,
                k_steps: 100,
                images: None,
                labels: None,
            },
            model: ModelSection {
                activation: Activation::Tanh,
                delta_mode: DeltaMode::Shared,
                width: 10,
            },
            sweep: SweepSection {
                depths: Depths::PowersOfTwo { min: 8, max: 128 },
                seeds: 1,
                seed: 0,
            },
            train: TrainSection {
                batch_size: t.batch_size,
                learning_rate: t.learning_rate,
                early_stop: t.early_stop,
                max_updates: t.max_updates,
            },
            diagnostics: DiagnosticsConfig::default(),
            limits: LimitsSection {
                enabled: false,
                mode: LimitMode::Ode,
                spec: ConstantSpec {
                    d: 1,
                    a_bar: 1.0,
                    b_bar: 0.0,
                    u_a: 0.0,
                    u_b: 0.0,
                    q_a: 0.0,
                    q_b: 0.0,
                    alpha: 0.5,
                    beta: 0.5,
                    activation: SmoothActivation::Tanh,
                },
                x: 1.0,
                depths: Depths::PowersOfTwo { min: 16, max: 4096 },
                reference_depth: 65536,
                paths: 1,
                seed: 0,
                rate_min: f64::NEG_INFINITY,
                rate_max: f64::INFINITY,
                require_decreasing: true,
                ito_check: false,
                ito_depth: 4096,
                ito_paths: 10_000,
                ito_max_z_corrected: 3.0,
                ito_min_z_uncorrected: 5.0,
            },
            output_dir: PathBuf::from("deepres-out"),
        }
    }
}

fn parse_mode(s: &str) -> Result<LimitMode, String> {
    match s {
        "ode" => Ok(LimitMode::Ode),
        "sde" => Ok(LimitMode::Sde),
        _ => Err(format!("unknown limit mode `{s}` (expected ode or sde)")),
    }
}

fn mode_str(m: LimitMode) -> &'static str {
    match m {
        LimitMode::Ode => "ode",
        LimitMode::Sde => "sde",
    }
}

fn parse_window(s: &str) -> Result<WindowRule, String> {
    if s == "sqrt" {
        return Ok(WindowRule::Sqrt);
    }
    match s.parse::<usize>() {
        Ok(w) if w % 2 == 1 => Ok(WindowRule::Fixed(w)),
        _ => Err(format!(
            "window must be `sqrt` or an odd positive integer, got `{s}`"
        )),
    }
}

fn window_str(w: WindowRule) -> String {
    match w {
        WindowRule::Sqrt => "sqrt".into(),
        WindowRule::Fixed(w) => w.to_string(),
    }
}

fn parse_path(s: &str) -> Result<Option<PathBuf>, String> {
    Ok(if s.is_empty() {
        None
    } else {
        Some(PathBuf::from(s))
    })
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_default()
}

fn parse_bool(s: &str) -> Result<bool, String> {
    s.parse()
        .map_err(|_| format!("expected true or false, got `{s}`"))
}

fn parse_from<V: FromStr>(s: &str) -> Result<V, String>
where
    V::Err: fmt::Display,
{
    s.parse::<V>()
        .map_err(|e| format!("cannot parse `{s}`: {e}"))
}

/// Key/value pairs left to consume.
struct Entries(BTreeMap<String, String>);

impl Entries {
    fn take<V>(
        &mut self,
        key: &str,
        default: V,
        parse: impl Fn(&str) -> Result<V, String>,
    ) -> Result<V, ConfigError> {
        match self.0.remove(key) {
            None => Ok(default),
            Some(raw) => parse(&raw).map_err(|m| ConfigError::new(key, m)),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::new(
                    format!("line {}", i + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let key = k.trim().to_string();
            if map.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(ConfigError::new(key, "given more than once"));
            }
        }
        let mut e = Entries(map);
        let d = Self::default();
        let (mut ds, m, sw, mut tr, dg, li) = (
            d.dataset,
            d.model,
            d.sweep,
            d.train,
            d.diagnostics,
            d.limits,
        );
        ds.kind = e.take("dataset.kind", ds.kind, parse_from)?;
        if ds.kind == DataKind::Mnist {
            let t = TrainConfig::mnist_defaults(0);
            ds.n = MNIST_TRAIN_SIZE;
            tr = TrainSection {
                batch_size: t.batch_size,
                learning_rate: t.learning_rate,
                early_stop: t.early_stop,
                max_updates: t.max_updates,
            };
        }
        let th = dg.thresholds;
        let sp = li.spec;

        let cfg = Self {
            dataset: DatasetSection {
                kind: ds.kind,
                seed: e.take("dataset.seed", ds.seed, parse_from)?,
                n: e.take("dataset.n", ds.n, parse_from)?,
                d: e.take("dataset.d", ds.d, parse_from)?,
                k_steps: e.take("dataset.k_steps", ds.k_steps, parse_from)?,
                images: e.take("dataset.images", ds.images, parse_path)?,
                labels: e.take("dataset.labels", ds.labels, parse_path)?,
            },
            model: ModelSection {
                activation: e.take("model.activation", m.activation, parse_from)?,
                delta_mode: e.take("model.delta_mode", m.delta_mode, parse_from)?,
                width: e.take("model.width", m.width, parse_from)?,
            },
            sweep: SweepSection {
                depths: e.take("sweep.depths", sw.depths, parse_from)?,
                seeds: e.take("sweep.seeds", sw.seeds, parse_from)?,
                seed: e.take("sweep.seed", sw.seed, parse_from)?,
            },
            train: TrainSection {
                batch_size: e.take("train.batch_size", tr.batch_size, parse_from)?,
                learning_rate: e.take("train.learning_rate", tr.learning_rate, parse_from)?,
                early_stop: e.take("train.early_stop", tr.early_stop, parse_from)?,
                max_updates: e.take("train.max_updates", tr.max_updates, parse_from)?,
            },
            diagnostics: DiagnosticsConfig {
                window: e.take("diagnostics.window", dg.window, parse_window)?,
                thresholds: RegimeThresholds {
                    h1_max_increment_slope: e.take(
                        "diagnostics.h1_max_increment_slope",
                        th.h1_max_increment_slope,
                        parse_from,
                    )?,
                    h1_max_noise_fraction: e.take(
                        "diagnostics.h1_max_noise_fraction",
                        th.h1_max_noise_fraction,
                        parse_from,
                    )?,
                    h2_min_beta: e.take("diagnostics.h2_min_beta", th.h2_min_beta, parse_from)?,
                    max_rss_slope: e.take(
                        "diagnostics.max_rss_slope",
                        th.max_rss_slope,
                        parse_from,
                    )?,
                    sparse_min_max_norm_slope: e.take(
                        "diagnostics.sparse_min_max_norm_slope",
                        th.sparse_min_max_norm_slope,
                        parse_from,
                    )?,
                },
            },
            limits: LimitsSection {
                enabled: e.take("limits.enabled", li.enabled, parse_bool)?,
                mode: e.take("limits.mode", li.mode, parse_mode)?,
                spec: ConstantSpec {
                    d: e.take("limits.d", sp.d, parse_from)?,
                    a_bar: e.take("limits.a_bar", sp.a_bar, parse_from)?,
                    b_bar: e.take("limits.b_bar", sp.b_bar, parse_from)?,
                    u_a: e.take("limits.u_a", sp.u_a, parse_from)?,
                    u_b: e.take("limits.u_b", sp.u_b, parse_from)?,
                    q_a: e.take("limits.q_a", sp.q_a, parse_from)?,
                    q_b: e.take("limits.q_b", sp.q_b, parse_from)?,
                    alpha: e.take("limits.alpha", sp.alpha, parse_from)?,
                    beta: e.take("limits.beta", sp.beta, parse_from)?,
                    activation: e.take("limits.activation", sp.activation, parse_from)?,
                },
                x: e.take("limits.x", li.x, parse_from)?,
                depths: e.take("limits.depths", li.depths, parse_from)?,
                reference_depth: e.take(
                    "limits.reference_depth",
                    li.reference_depth,
                    parse_from,
                )?,
                paths: e.take("limits.paths", li.paths, parse_from)?,
                seed: e.take("limits.seed", li.seed, parse_from)?,
                rate_min: e.take("limits.rate_min", li.rate_min, parse_from)?,
                rate_max: e.take("limits.rate_max", li.rate_max, parse_from)?,
                require_decreasing: e.take(
                    "limits.require_decreasing",
                    li.require_decreasing,
                    parse_bool,
                )?,
                ito_check: e.take("limits.ito_check", li.ito_check, parse_bool)?,
                ito_depth: e.take("limits.ito_depth", li.ito_depth, parse_from)?,
                ito_paths: e.take("limits.ito_paths", li.ito_paths, parse_from)?,
                ito_max_z_corrected: e.take(
                    "limits.ito_max_z_corrected",
                    li.ito_max_z_corrected,
                    parse_from,
                )?,
                ito_min_z_uncorrected: e.take(
                    "limits.ito_min_z_uncorrected",
                    li.ito_min_z_uncorrected,
                    parse_from,
                )?,
            },
            output_dir: e.take("output.dir", d.output_dir, |s| Ok(PathBuf::from(s)))?,
        };
        if let Some(key) = e.0.keys().next() {
            return Err(ConfigError::new(key.clone(), "unknown key"));
        }
        Ok(cfg)
    }

    /// Every key, sorted, one `key = value` per line.
    pub fn to_canonical(&self) -> String {
        let (ds, m, sw, tr, li) = (
            &self.dataset,
            &self.model,
            &self.sweep,
            &self.train,
            &self.limits,
        );
        let th = &self.diagnostics.thresholds;
        let sp = &li.spec;
        let entries: Vec<(&str, String)> = vec![
            ("dataset.kind", ds.kind.to_string()),
            ("dataset.seed", ds.seed.to_string()),
            ("dataset.n", ds.n.to_string()),
            ("dataset.d", ds.d.to_string()),
            ("dataset.k_steps", ds.k_steps.to_string()),
            ("dataset.images", path_str(&ds.images)),
            ("dataset.labels", path_str(&ds.labels)),
            ("model.activation", m.activation.to_string()),
            ("model.delta_mode", m.delta_mode.to_string()),
            ("model.width", m.width.to_string()),
            ("sweep.depths", sw.depths.to_string()),
            ("sweep.seeds", sw.seeds.to_string()),
            ("sweep.seed", sw.seed.to_string()),
            ("train.batch_size", tr.batch_size.to_string()),
            ("train.learning_rate", tr.learning_rate.to_string()),
            ("train.early_stop", tr.early_stop.to_string()),
            ("train.max_updates", tr.max_updates.to_string()),
            ("diagnostics.window", window_str(self.diagnostics.window)),
            (
                "diagnostics.h1_max_increment_slope",
                th.h1_max_increment_slope.to_string(),
            ),
            (
                "diagnostics.h1_max_noise_fraction",
                th.h1_max_noise_fraction.to_string(),
            ),
            ("diagnostics.h2_min_beta", th.h2_min_beta.to_string()),
            ("diagnostics.max_rss_slope", th.max_rss_slope.to_string()),
            (
                "diagnostics.sparse_min_max_norm_slope",
                th.sparse_min_max_norm_slope.to_string(),
            ),
            ("limits.enabled", li.enabled.to_string()),
            ("limits.mode", mode_str(li.mode).into()),
            ("limits.d", sp.d.to_string()),
            ("limits.a_bar", sp.a_bar.to_string()),
            ("limits.b_bar", sp.b_bar.to_string()),
            ("limits.u_a", sp.u_a.to_string()),
            ("limits.u_b", sp.u_b.to_string()),
            ("limits.q_a", sp.q_a.to_string()),
            ("limits.q_b", sp.q_b.to_string()),
            ("limits.alpha", sp.alpha.to_string()),
            ("limits.beta", sp.beta.to_string()),
            ("limits.activation", sp.activation.to_string()),
            ("limits.x", li.x.to_string()),
            ("limits.depths", li.depths.to_string()),
            ("limits.reference_depth", li.reference_depth.to_string()),
            ("limits.paths", li.paths.to_string()),
            ("limits.seed", li.seed.to_string()),
            ("limits.rate_min", li.rate_min.to_string()),
            ("limits.rate_max", li.rate_max.to_string()),
            (
                "limits.require_decreasing",
                li.require_decreasing.to_string(),
            ),
            ("limits.ito_check", li.ito_check.to_string()),
            ("limits.ito_depth", li.ito_depth.to_string()),
            ("limits.ito_paths", li.ito_paths.to_string()),
            (
                "limits.ito_max_z_corrected",
                li.ito_max_z_corrected.to_string(),
            ),
            (
                "limits.ito_min_z_uncorrected",
                li.ito_min_z_uncorrected.to_string(),
            ),
            ("output.dir", self.output_dir.display().to_string()),
        ];
        let mut sorted: Vec<String> = entries
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect();
        sorted.sort();
        let mut out = sorted.join("\n");
        out.push('\n');
        out
    }

    /// Replaces every seed in the config.
    pub fn override_seed(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.sweep.seed = seed;
        self.limits.seed = seed;
    }

    pub fn architecture(&self, depth: usize) -> Architecture {
        Architecture {
            depth,
            width: self.model.width,
            activation: self.model.activation,
            delta_mode: self.model.delta_mode,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            early_stop: self.train.early_stop,
            max_updates: self.train.max_updates,
            seed,
        }
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            depths: self.limits.depths.resolve(),
            paths: self.limits.paths,
            reference_depth: self.limits.reference_depth,
            mode: self.limits.mode,
            seed: self.limits.seed,
        }
    }

    /// Checks the dataset section.
    pub fn validate_dataset(&self) -> Result<(), ConfigError> {
        let ds = &self.dataset;
        if ds.n == 0 {
            return Err(ConfigError::new("dataset.n", "must be >= 1"));
        }
        match ds.kind {
            DataKind::Synthetic => {
                if ds.d == 0 {
                    return Err(ConfigError::new("dataset.d", "must be >= 1"));
                }
                if ds.k_steps == 0 {
                    return Err(ConfigError::new("dataset.k_steps", "must be >= 1"));
                }
            }
            DataKind::Mnist => {
                let max = deepres::datasets::mnist::max_embedding_dim();
                if ds.d < 10 || ds.d > max {
                    return Err(ConfigError::new(
                        "dataset.d",
                        format!("MNIST embedding needs 10 <= d <= {max}"),
                    ));
                }
                if ds.images.is_none() {
                    return Err(ConfigError::new("dataset.images", "required for MNIST"));
                }
                if ds.labels.is_none() {
                    return Err(ConfigError::new("dataset.labels", "required for MNIST"));
                }
            }
        }
        Ok(())
    }

    /// Checks everything the data, training and diagnosis stages need.
    pub fn validate_training(&self) -> Result<(), ConfigError> {
        self.validate_dataset()?;
        let (ds, m, sw) = (&self.dataset, &self.model, &self.sweep);
        if m.width != ds.d {
            return Err(ConfigError::new(
                "model.width",
                format!("must equal dataset.d = {} (inputs are not projected)", ds.d),
            ));
        }
        if m.activation == Activation::Tanh && m.delta_mode != DeltaMode::Shared
            || m.activation == Activation::Relu && m.delta_mode != DeltaMode::PerLayer
        {
            return Err(ConfigError::new(
                "model.delta_mode",
                "supported setups are tanh with shared and relu with per_layer",
            ));
        }
        let depths = sw.depths.resolve();
        if depths.is_empty() {
            return Err(ConfigError::new("sweep.depths", "the depth sweep is empty"));
        }
        if depths.contains(&0) || depths.windows(2).any(|p| p[0] >= p[1]) {
            return Err(ConfigError::new(
                "sweep.depths",
                "depths must be positive and strictly increasing",
            ));
        }
        if depths.len() < 3 {
            return Err(ConfigError::new(
                "sweep.depths",
                "diagnosis needs at least 3 depths",
            ));
        }
        if sw.seeds == 0 {
            return Err(ConfigError::new("sweep.seeds", "must be >= 1"));
        }
        if self.train.batch_size == 0 {
            return Err(ConfigError::new("train.batch_size", "must be >= 1"));
        }
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            return Err(ConfigError::new(
                "train.learning_rate",
                "must be positive and finite",
            ));
        }
        if self.train.early_stop.is_nan() || self.train.early_stop < 0.0 {
            return Err(ConfigError::new("train.early_stop", "must be >= 0"));
        }
        if self.train.max_updates == 0 {
            return Err(ConfigError::new("train.max_updates", "must be >= 1"));
        }
        self.validate_diagnostics()
    }

    pub fn validate_diagnostics(&self) -> Result<(), ConfigError> {
        let th = &self.diagnostics.thresholds;
        let all = [
            ("h1_max_increment_slope", th.h1_max_increment_slope),
            ("h1_max_noise_fraction", th.h1_max_noise_fraction),
            ("h2_min_beta", th.h2_min_beta),
            ("max_rss_slope", th.max_rss_slope),
            ("sparse_min_max_norm_slope", th.sparse_min_max_norm_slope),
        ];
        if let Some((k, _)) = all.iter().find(|(_, v)| !v.is_finite()) {
            return Err(ConfigError::new(
                format!("diagnostics.{k}"),
                "must be finite",
            ));
        }
        Ok(())
    }

    /// Checks the limits section.
    pub fn validate_limits(&self) -> Result<(), ConfigError> {
        let li = &self.limits;
        if li.paths == 0 {
            return Err(ConfigError::new(
                "limits.paths",
                "need at least one Monte Carlo path (M >= 1)",
            ));
        }
        if li.spec.d == 0 {
            return Err(ConfigError::new("limits.d", "must be >= 1"));
        }
        let spec = li.spec.build::<f64>();
        if let Err(e) = spec.regime() {
            return Err(ConfigError::new("limits.alpha", e.to_string()));
        }
        let sweep = self.sweep_config();
        if sweep.depths.is_empty() {
            return Err(ConfigError::new("limits.depths", "the depth grid is empty"));
        }
        if let Err(e) = sweep.validate() {
            return Err(ConfigError::new("limits.depths", e.to_string()));
        }
        if li.mode == LimitMode::Sde
            && spec.regime().ok() != Some(deepres::limits::LimitRegime::Diffusive)
        {
            return Err(ConfigError::new(
                "limits.mode",
                "sde needs alpha = 0 and beta >= 1",
            ));
        }
        if !li.x.is_finite() {
            return Err(ConfigError::new("limits.x", "must be finite"));
        }
        if li.rate_min.is_nan() || li.rate_max.is_nan() || li.rate_min > li.rate_max {
            return Err(ConfigError::new(
                "limits.rate_min",
                "rate bounds must satisfy rate_min <= rate_max",
            ));
        }
        if li.ito_check {
            if li.spec.d != 1 || li.spec.alpha != 0.0 || li.spec.beta != 1.0 {
                return Err(ConfigError::new(
                    "limits.ito_check",
                    "needs d = 1, alpha = 0, beta = 1",
                ));
            }
            if li.ito_depth == 0 {
                return Err(ConfigError::new("limits.ito_depth", "must be >= 1"));
            }
            if li.ito_paths == 0 {
                return Err(ConfigError::new(
                    "limits.ito_paths",
                    "need at least one path",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let text = c.to_canonical();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), c);
        assert_eq!(ExperimentConfig::parse("").unwrap(), c);
    }

    #[test]
    fn canonical_form_is_sorted() {
        let text = ExperimentConfig::default().to_canonical();
        let keys: Vec<&str> = text
            .lines()
            .map(|l| l.split(" = ").next().unwrap())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let e = ExperimentConfig::parse("sweep.depth = 4,8").unwrap_err();
        assert_eq!(e.field, "sweep.depth");
        let e = ExperimentConfig::parse("train.batch_size = 4\ntrain.batch_size = 8").unwrap_err();
        assert_eq!(e.field, "train.batch_size");
        let e = ExperimentConfig::parse("no equals sign").unwrap_err();
        assert_eq!(e.field, "line 1");
    }

    #[test]
    fn bad_values_name_their_field() {
        let e = ExperimentConfig::parse("model.activation = sigmoid").unwrap_err();
        assert_eq!(e.field, "model.activation");
        let e = ExperimentConfig::parse("diagnostics.window = 4").unwrap_err();
        assert_eq!(e.field, "diagnostics.window");
    }

    #[test]
    fn depth_syntax() {
        assert_eq!(
            "4..40".parse::<Depths>().unwrap().resolve(),
            vec![4, 8, 16, 32]
        );
        assert_eq!(
            "3, 9100,10321".parse::<Depths>().unwrap().resolve(),
            vec![3, 9100, 10321]
        );
        assert!("".parse::<Depths>().unwrap().resolve().is_empty());
        assert!("5..7".parse::<Depths>().unwrap().resolve().is_empty());
    }

    #[test]
    fn mnist_kind_switches_defaults() {
        let c = ExperimentConfig::parse("dataset.kind = mnist").unwrap();
        assert_eq!(c.dataset.n, MNIST_TRAIN_SIZE);
        assert_eq!((c.train.batch_size, c.train.max_updates), (50, 12_000));
        let c = ExperimentConfig::parse("dataset.kind = mnist\ntrain.batch_size = 10").unwrap();
        assert_eq!(c.train.batch_size, 10);
        assert_eq!(ExperimentConfig::parse(&c.to_canonical()).unwrap(), c);
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let c = ExperimentConfig::parse("sweep.depths =").unwrap();
        assert_eq!(c.validate_training().unwrap_err().field, "sweep.depths");
    }

    #[test]
    fn zero_paths_is_rejected() {
        let c = ExperimentConfig::parse("limits.paths = 0").unwrap();
        assert_eq!(c.validate_limits().unwrap_err().field, "limits.paths");
    }

    #[test]
    fn seed_override_reaches_every_stage() {
        let mut c = ExperimentConfig::default();
        c.override_seed(42);
        assert_eq!((c.dataset.seed, c.sweep.seed, c.limits.seed), (42, 42, 42));
    }
}
