//! Gain-versus-mismatch sweeps on synthetic instances.

use std::path::Path;
use std::time::Instant;

use serde::Deserialize;

use crate::adapt::{Method, MethodConfig};
use crate::codec::{analyze, EncodeOptions, HyperpriorInput, Instance};
use crate::container::ScaleDescriptor;
use crate::latent::{synthesize, synthesize_factorized, Distribution, Shape, SynthSpec};
use crate::range_coder::DEFAULT_PRECISION;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Factorized,
    Hyperprior,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "factorized" => Ok(Layout::Factorized),
            "hyperprior" => Ok(Layout::Hyperprior),
            _ => Err(Error::InvalidConfig(format!("unknown layout {s:?}"))),
        }
    }
}

/// A sweep grid. Every method is applied to every stream of the layout;
/// the component list only multiplies GMM rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub seed: u64,
    pub shape: Shape,
    pub layout: Layout,
    pub true_dist: Distribution,
    pub learned: Distribution,
    /// Mismatch levels: factors applied to the true spread. 1.0 is no
    /// mismatch when `true_dist == learned`.
    pub scale_factors: Vec<f64>,
    pub mean_offset: f64,
    pub methods: Vec<Method>,
    pub components: Vec<u8>,
    pub targets: Vec<u32>,
    pub bits: u8,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            seed: 1,
            shape: Shape::new(32, 32, 16),
            layout: Layout::Hyperprior,
            true_dist: Distribution::gaussian(1.5),
            learned: Distribution::gaussian(1.5),
            scale_factors: vec![1.0, 0.8, 0.667, 0.5],
            mean_offset: 0.0,
            methods: vec![Method::Gmm, Method::ZeroMeanGaussian, Method::CenterBin],
            components: vec![1, 2],
            targets: vec![16],
            bits: 8,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    seed: Option<u64>,
    shape: Option<String>,
    layout: Option<Layout>,
    #[serde(rename = "true")]
    true_dist: Option<String>,
    learned: Option<String>,
    scale_factors: Option<Vec<f64>>,
    mean_offset: Option<f64>,
    methods: Option<Vec<String>>,
    components: Option<Vec<u8>>,
    targets: Option<Vec<u32>>,
    bits: Option<u8>,
}

impl SweepConfig {
    /// Parses a TOML sweep file; missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SweepFile = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let mut c = SweepConfig::default();
        if let Some(v) = file.seed {
            c.seed = v;
        }
        if let Some(v) = file.shape {
            c.shape = v.parse()?;
        }
        if let Some(v) = file.layout {
            c.layout = v;
        }
        if let Some(v) = file.true_dist {
            c.true_dist = v.parse()?;
        }
        if let Some(v) = file.learned {
            c.learned = v.parse()?;
        }
        if let Some(v) = file.scale_factors {
            c.scale_factors = v;
        }
        if let Some(v) = file.mean_offset {
            c.mean_offset = v;
        }
        if let Some(v) = file.methods {
            c.methods = v.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        if let Some(v) = file.components {
            c.components = v;
        }
        if let Some(v) = file.targets {
            c.targets = v;
        }
        if let Some(v) = file.bits {
            c.bits = v;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale_factors.is_empty() || self.methods.is_empty() || self.targets.is_empty() {
            return Err(Error::InvalidConfig("empty sweep axis".into()));
        }
        if self.methods.contains(&Method::Gmm) && self.components.is_empty() {
            return Err(Error::InvalidConfig("gmm needs at least one K".into()));
        }
        if self.shape.is_empty() {
            return Err(Error::InvalidConfig("empty shape".into()));
        }
        for &k in &self.components {
            MethodConfig::new(Method::Gmm, k, 1, self.bits)?;
        }
        Ok(())
    }

    fn configs(&self) -> Vec<MethodConfig> {
        let mut out = Vec::new();
        for &method in &self.methods {
            let ks: Vec<u8> = if method == Method::Gmm { self.components.clone() } else { vec![1] };
            for k in ks {
                for &t in &self.targets {
                    out.push(MethodConfig {
                        method,
                        components: k,
                        targets: t,
                        bits: self.bits,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scale_factor: f64,
    pub config: MethodConfig,
    pub gap_percent: f64,
    pub gain_percent: f64,
    /// Ideal bits under the learned tables, all streams.
    pub learned_bits: f64,
    /// Ideal bits after adaptation, all streams, excluding side bits.
    pub adapted_bits: f64,
    pub param_bits: f64,
    pub signal_bits: f64,
    pub runtime_ms: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str =
        "scale_factor,method,K,T,b,gap_percent,gain_percent,learned_bits,adapted_bits,param_bits,signal_bits,runtime_ms";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.4},{:.4},{:.3},{:.3},{},{},{:.3}",
            self.scale_factor,
            self.config.method,
            self.config.components,
            self.config.targets,
            self.config.bits,
            self.gap_percent,
            self.gain_percent,
            self.learned_bits,
            self.adapted_bits,
            self.param_bits,
            self.signal_bits,
            self.runtime_ms
        )
    }
}

/// One row per (mismatch level, method, K, T).
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let scales = ScaleDescriptor::default();
    let mut rows = Vec::new();
    for &factor in &config.scale_factors {
        let mut spec = SynthSpec::new(config.seed, config.shape, config.true_dist, config.learned);
        spec.scale_factor = factor;
        spec.mean_offset = config.mean_offset;
        let synth = match config.layout {
            Layout::Hyperprior => Some(synthesize(&spec)?),
            Layout::Factorized => None,
        };
        let factorized = match config.layout {
            Layout::Factorized => Some(synthesize_factorized(&spec)?),
            Layout::Hyperprior => None,
        };
        let instance = match (&synth, &factorized) {
            (Some(s), _) => Instance {
                main: &s.main,
                tables: &s.tables,
                hyperprior: Some(HyperpriorInput {
                    side: &s.side,
                    side_info: &s.side_info,
                    scales,
                }),
            },
            (None, Some((main, tables))) => Instance {
                main,
                tables,
                hyperprior: None,
            },
            (None, None) => unreachable!("one layout is always synthesized"),
        };
        for method in config.configs() {
            let options = EncodeOptions {
                factorized: method,
                hyperprior: method,
                precision: DEFAULT_PRECISION,
            };
            let start = Instant::now();
            let analysis = analyze(&instance, &options)?;
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let sum = |f: fn(&crate::gap::ModelStats) -> f64| analysis.streams.iter().map(|s| f(&s.stats)).sum::<f64>();
            rows.push(BenchRow {
                scale_factor: factor,
                config: method,
                gap_percent: analysis.report.total_gap_percent,
                gain_percent: analysis.report.total_gain_percent,
                learned_bits: sum(|s| s.learned_bits),
                adapted_bits: sum(|s| s.adapted_bits),
                param_bits: sum(|s| s.param_bits),
                signal_bits: sum(|s| s.signal_bits),
                runtime_ms,
            });
        }
    }
    Ok(rows)
}
