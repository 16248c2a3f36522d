//! Declarative run configuration: one TOML file drives every subcommand.
//! The config hash (SHA-256 over a canonical JSON rendering) keys caching
//! and stamps every artifact.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use triplei_core::chart::{ChartSpec, Structure};
use triplei_core::market::Regime;
use triplei_core::nn::model::{Depth, MicroSpec, ResNetConfig};
use triplei_core::nn::train::TrainParams;
use triplei_core::pipeline::RenderSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub data: DataCfg,
    pub chart: ChartCfg,
    pub model: ModelCfg,
    #[serde(default)]
    pub saliency: SaliencyCfg,
    #[serde(default)]
    pub signals: SignalsCfg,
    pub backtest: BacktestCfg,
    #[serde(default)]
    pub rules: RulesCfg,
    #[serde(default)]
    pub transfer: TransferCfg,
    pub output: OutputCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataCfg {
    /// `synth` or `csv`.
    pub source: String,
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default = "default_n_stocks")]
    pub n_stocks: usize,
    #[serde(default = "default_n_days")]
    pub n_days: usize,
    #[serde(default)]
    pub seed: u64,
    /// `flat`, `random-walk`, `momentum`, `recency-reversal`.
    #[serde(default = "default_regime")]
    pub regime: String,
    #[serde(default = "default_strength")]
    pub strength: f64,
    #[serde(default = "default_lag_weights")]
    pub lag_weights: Vec<f64>,
    #[serde(default = "default_daily_vol")]
    pub daily_vol: f64,
    /// Keep only the top-K stocks by market capitalization (0 = no filter).
    #[serde(default)]
    pub size_filter: usize,
}

fn default_n_stocks() -> usize {
    50
}
fn default_n_days() -> usize {
    600
}
fn default_regime() -> String {
    "recency-reversal".into()
}
fn default_strength() -> f64 {
    0.9
}
fn default_lag_weights() -> Vec<f64> {
    vec![0.25, 0.75]
}
fn default_daily_vol() -> f64 {
    0.02
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartCfg {
    pub window_d: usize,
    #[serde(default = "default_structure")]
    pub structure: String,
    #[serde(default = "default_model_side")]
    pub model_side: usize,
}

fn default_structure() -> String {
    "ohlc-vb-ma".into()
}
fn default_model_side() -> usize {
    32
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCfg {
    /// `rn18`, `rn34`, `rn50`, or `micro`.
    #[serde(default = "default_depth")]
    pub depth: String,
    #[serde(default = "default_micro_side")]
    pub micro_input_side: usize,
    #[serde(default = "default_micro_width")]
    pub micro_base_width: usize,
    #[serde(default = "default_micro_blocks")]
    pub micro_stage_blocks: Vec<usize>,
    #[serde(default)]
    pub batch_norm: bool,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    pub horizon_r: usize,
    /// Window end days used for training images, `[lo, hi)`.
    pub train_days: [usize; 2],
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
}

fn default_depth() -> String {
    "micro".into()
}
fn default_micro_side() -> usize {
    32
}
fn default_micro_width() -> usize {
    8
}
fn default_micro_blocks() -> Vec<usize> {
    vec![1, 1]
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2]
}
fn default_lr() -> f64 {
    1e-5
}
fn default_batch() -> usize {
    128
}
fn default_patience() -> usize {
    5
}
fn default_max_epochs() -> usize {
    30
}
fn default_stride() -> usize {
    1
}
fn default_parallel() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaliencyCfg {
    #[serde(default = "default_b")]
    pub b: usize,
    /// Explicit per-channel noise scale; by default the checkpoint's stored
    /// `0.15 x std(normalized training pixels)` is used.
    #[serde(default)]
    pub sigma_override: Option<[f64; 3]>,
    /// Extra days of weights before the test window so smoothed
    /// cross-sectional fits have history.
    #[serde(default = "default_warmup")]
    pub warmup_days: usize,
}

fn default_b() -> usize {
    8
}
fn default_warmup() -> usize {
    40
}

impl Default for SaliencyCfg {
    fn default() -> Self {
        Self { b: default_b(), sigma_override: None, warmup_days: default_warmup() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalsCfg {
    #[serde(default = "default_signal_list")]
    pub list: Vec<String>,
    #[serde(default)]
    pub alphas_file: Option<PathBuf>,
    #[serde(default = "default_trend_lags")]
    pub trend_lags: Vec<usize>,
    #[serde(default = "default_smoothing")]
    pub smoothing: usize,
}

fn default_signal_list() -> Vec<String> {
    vec!["mom".into(), "str".into(), "wstr".into(), "trend".into(), "alpha".into()]
}
fn default_trend_lags() -> Vec<usize> {
    vec![5, 10, 20, 50]
}
fn default_smoothing() -> usize {
    252
}

impl Default for SignalsCfg {
    fn default() -> Self {
        Self {
            list: default_signal_list(),
            alphas_file: None,
            trend_lags: default_trend_lags(),
            smoothing: default_smoothing(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BacktestCfg {
    pub holding_r: usize,
    /// Inclusive day range `[lo, hi]` of the test window.
    pub test_days: [usize; 2],
    #[serde(default)]
    pub risk_free: f64,
    #[serde(default)]
    pub risk_free_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesCfg {
    /// `desk` or `full`.
    #[serde(default = "default_grid")]
    pub grid: String,
    /// Evaluate only the first N rules (0 = all); deterministic prefix.
    #[serde(default)]
    pub max_rules: usize,
}

fn default_grid() -> String {
    "desk".into()
}

impl Default for RulesCfg {
    fn default() -> Self {
        Self { grid: default_grid(), max_rules: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferCfg {
    #[serde(default = "default_period")]
    pub period: usize,
}

fn default_period() -> usize {
    4
}

impl Default for TransferCfg {
    fn default() -> Self {
        Self { period: default_period() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    pub dir: PathBuf,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).context("parsing run config")?;
        if config.schema_version != SCHEMA_VERSION {
            bail!(
                "config schema_version {} unsupported (tool speaks {})",
                config.schema_version,
                SCHEMA_VERSION
            );
        }
        Ok(config)
    }

    /// SHA-256 over the canonical JSON rendering (sorted keys).
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("canonical json");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex_string(&hasher.finalize())
    }

    pub fn regime(&self) -> Result<Regime> {
        Ok(match self.data.regime.as_str() {
            "flat" => Regime::Flat,
            "random-walk" => Regime::RandomWalk { daily_vol: self.data.daily_vol },
            "momentum" => Regime::Momentum {
                strength: self.data.strength,
                daily_vol: self.data.daily_vol,
            },
            "recency-reversal" => Regime::RecencyReversal {
                strength: self.data.strength,
                lag_weights: self.data.lag_weights.clone(),
                daily_vol: self.data.daily_vol,
            },
            other => bail!("unknown regime `{other}`"),
        })
    }

    pub fn structure(&self) -> Result<Structure> {
        self.chart.structure.parse::<Structure>().map_err(|e| anyhow::anyhow!(e))
    }

    pub fn render_spec(&self) -> Result<RenderSpec> {
        Ok(RenderSpec {
            chart: ChartSpec::new(self.chart.window_d, self.structure()?),
            model_side: self.chart.model_side,
        })
    }

    pub fn model_config(&self) -> Result<ResNetConfig> {
        let depth = match self.model.depth.as_str() {
            "rn18" => Depth::R18,
            "rn34" => Depth::R34,
            "rn50" => Depth::R50,
            "micro" => Depth::Micro(MicroSpec {
                input_side: self.model.micro_input_side,
                base_width: self.model.micro_base_width,
                stage_blocks: self.model.micro_stage_blocks.clone(),
            }),
            other => bail!("unknown model depth `{other}`"),
        };
        let mut config = ResNetConfig::new(depth);
        config.batch_norm = self.model.batch_norm;
        Ok(config)
    }

    pub fn train_params(&self, seed: u64) -> TrainParams {
        TrainParams {
            lr: self.model.lr,
            batch_size: self.model.batch_size,
            patience: self.model.patience,
            max_epochs: self.model.max_epochs,
            val_fraction: 0.3,
            seed,
            parallel: self.model.parallel,
        }
    }

    /// The experiment tag in the grid naming convention, e.g. `RN34-D5/R1`.
    pub fn strategy_tag(&self) -> String {
        let depth = match self.model.depth.as_str() {
            "rn18" => "RN18".to_string(),
            "rn34" => "RN34".to_string(),
            "rn50" => "RN50".to_string(),
            _ => "MICRO".to_string(),
        };
        format!("{depth}-D{}/R{}", self.chart.window_d, self.backtest.holding_r)
    }

    /// Largest signal lookback the configured signal list implies.
    pub fn max_signal_lookback(&self) -> usize {
        let mut max = self.chart.window_d;
        for name in &self.signals.list {
            let need = match name.as_str() {
                "mom" => 252,
                "str" => 21,
                "wstr" => 5,
                "trend" => self.signals.trend_lags.iter().cloned().max().unwrap_or(0),
                "alpha" => 25, // shipped alphas' deepest window
                _ => 0,
            };
            max = max.max(need);
        }
        max
    }

    /// Reject impossible configurations before any compute starts.
    pub fn validate(&self) -> Result<()> {
        if self.data.source == "csv" {
            let path = self
                .data
                .csv_path
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("data.source = csv needs data.csv_path"))?;
            if !path.exists() {
                bail!("data.csv_path {} does not exist", path.display());
            }
        } else if self.data.source != "synth" {
            bail!("data.source must be `synth` or `csv`");
        }
        if let Some(path) = &self.signals.alphas_file {
            if !path.exists() {
                bail!("signals.alphas_file {} does not exist", path.display());
            }
        }
        if let Some(path) = &self.backtest.risk_free_csv {
            if !path.exists() {
                bail!("backtest.risk_free_csv {} does not exist", path.display());
            }
        }
        self.regime()?;
        self.structure()?;
        self.model_config()?;
        if self.model.seeds.is_empty() {
            bail!("model.seeds must not be empty");
        }
        let n_days = self.data.n_days;
        let [train_lo, train_hi] = self.model.train_days;
        let [test_lo, test_hi] = self.backtest.test_days;
        if train_lo + 1 < self.chart.window_d {
            bail!("train window starts before the first complete {}-day chart", self.chart.window_d);
        }
        if train_hi > n_days || train_lo >= train_hi {
            bail!("model.train_days {:?} out of range for {n_days} days", self.model.train_days);
        }
        if test_hi >= n_days || test_lo > test_hi {
            bail!("backtest.test_days {:?} out of range for {n_days} days", self.backtest.test_days);
        }
        let lookback = self.max_signal_lookback();
        if lookback + self.backtest.holding_r > test_lo + 1 {
            bail!(
                "signal lookback {lookback} plus holding period {} exceeds history before the \
                 test window (first test day {test_lo}); shrink lookbacks or move the window",
                self.backtest.holding_r
            );
        }
        if self.transfer.period < 1 {
            bail!("transfer.period must be positive");
        }
        for name in &self.signals.list {
            if !["mom", "str", "wstr", "trend", "alpha"].contains(&name.as_str()) {
                bail!("unknown signal `{name}`");
            }
        }
        match self.rules.grid.as_str() {
            "desk" | "full" => {}
            other => bail!("rules.grid must be `desk` or `full`, got `{other}`"),
        }
        Ok(())
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
