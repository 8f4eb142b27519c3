//! Seeded synthetic latents with a controllable gap between the true and
//! the learned distribution.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64`, which is specified bit-for-bit and portable. Gaussian
//! draws use `rand_distr::StandardNormal`; Laplacian draws invert the cdf of
//! an open-interval uniform.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Open01, StandardNormal};

use super::{LatentRole, LatentTensor, Shape, SideInfo};
use crate::entropy::{pmf_from_cdf, ModelKind, PmfTable, ScaleTable, TableLabel};
use crate::math::{normal_cdf, round_half_away};
use crate::{Error, Result};

const TAIL_MASS: f64 = 1.0 / 1048576.0;
const MAX_HALF_WIDTH: i32 = 255;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Gaussian { mean: f64, sigma: f64 },
    Laplacian { mean: f64, scale: f64 },
    /// `weight * N(first) + (1 - weight) * N(second)`, each given as `(mean, sigma)`.
    Mixture {
        weight: f64,
        first: (f64, f64),
        second: (f64, f64),
    },
}

impl Distribution {
    pub fn gaussian(sigma: f64) -> Self {
        Distribution::Gaussian { mean: 0.0, sigma }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidDistribution(format!("{what} must be positive, got {v}")))
            }
        };
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidDistribution(format!("{what} must be finite")))
            }
        };
        match *self {
            Distribution::Gaussian { mean, sigma } => {
                finite(mean, "mean")?;
                positive(sigma, "sigma")
            }
            Distribution::Laplacian { mean, scale } => {
                finite(mean, "mean")?;
                positive(scale, "scale")
            }
            Distribution::Mixture {
                weight,
                first,
                second,
            } => {
                if !(0.0..=1.0).contains(&weight) {
                    return Err(Error::InvalidDistribution(format!(
                        "mixture weight must lie in [0, 1], got {weight}"
                    )));
                }
                finite(first.0, "mean")?;
                finite(second.0, "mean")?;
                positive(first.1, "sigma")?;
                positive(second.1, "sigma")
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Gaussian { mean, sigma } => normal_cdf((x - mean) / sigma),
            Distribution::Laplacian { mean, scale } => {
                if x < mean {
                    0.5 * libm::exp((x - mean) / scale)
                } else {
                    1.0 - 0.5 * libm::exp(-(x - mean) / scale)
                }
            }
            Distribution::Mixture {
                weight,
                first,
                second,
            } => {
                weight * normal_cdf((x - first.0) / first.1)
                    + (1.0 - weight) * normal_cdf((x - second.0) / second.1)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Gaussian { mean, .. } | Distribution::Laplacian { mean, .. } => mean,
            Distribution::Mixture {
                weight,
                first,
                second,
            } => weight * first.0 + (1.0 - weight) * second.0,
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            Distribution::Gaussian { sigma, .. } => sigma,
            Distribution::Laplacian { scale, .. } => scale * std::f64::consts::SQRT_2,
            Distribution::Mixture {
                weight,
                first,
                second,
            } => {
                let m = self.mean();
                let second_moment = weight * (first.1 * first.1 + first.0 * first.0)
                    + (1.0 - weight) * (second.1 * second.1 + second.0 * second.0);
                (second_moment - m * m).max(0.0).sqrt()
            }
        }
    }

    /// Scales every spread parameter by `scale_factor` and shifts every mean
    /// by `mean_offset`.
    pub fn with_mismatch(&self, scale_factor: f64, mean_offset: f64) -> Self {
        match *self {
            Distribution::Gaussian { mean, sigma } => Distribution::Gaussian {
                mean: mean + mean_offset,
                sigma: sigma * scale_factor,
            },
            Distribution::Laplacian { mean, scale } => Distribution::Laplacian {
                mean: mean + mean_offset,
                scale: scale * scale_factor,
            },
            Distribution::Mixture {
                weight,
                first,
                second,
            } => Distribution::Mixture {
                weight,
                first: (first.0 + mean_offset, first.1 * scale_factor),
                second: (second.0 + mean_offset, second.1 * scale_factor),
            },
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Gaussian { mean, sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sigma * z
            }
            Distribution::Laplacian { mean, scale } => {
                let u: f64 = rng.sample(Open01);
                let d = u - 0.5;
                mean - scale * d.signum() * libm::log(1.0 - 2.0 * d.abs())
            }
            Distribution::Mixture {
                weight,
                first,
                second,
            } => {
                let u: f64 = rng.random();
                let (mean, sigma) = if u < weight { first } else { second };
                let z: f64 = rng.sample(StandardNormal);
                mean + sigma * z
            }
        }
    }

    /// Half-width of the smallest symmetric support leaving less than 2^-20
    /// of the mass outside, capped at 255.
    pub fn coverage(&self) -> i32 {
        (0..MAX_HALF_WIDTH)
            .find(|&m| {
                let edge = m as f64 + 0.5;
                self.cdf(-edge) + (1.0 - self.cdf(edge)) < TAIL_MASS
            })
            .unwrap_or(MAX_HALF_WIDTH)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Distribution::Gaussian { mean, sigma } => write!(f, "gauss:{sigma},{mean}"),
            Distribution::Laplacian { mean, scale } => write!(f, "laplace:{scale},{mean}"),
            Distribution::Mixture {
                weight,
                first,
                second,
            } => write!(
                f,
                "mix:{weight},{},{},{},{}",
                first.0, first.1, second.0, second.1
            ),
        }
    }
}

/// Parses `gauss:SIGMA[,MEAN]`, `laplace:SCALE[,MEAN]` or
/// `mix:WEIGHT,MEAN1,SIGMA1,MEAN2,SIGMA2`.
impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidDistribution(format!("cannot parse distribution {s:?}"));
        let (family, args) = s.split_once(':').ok_or_else(bad)?;
        let values = args
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let dist = match (family, values.as_slice()) {
            ("gauss" | "gaussian", [sigma]) => Distribution::Gaussian {
                mean: 0.0,
                sigma: *sigma,
            },
            ("gauss" | "gaussian", [sigma, mean]) => Distribution::Gaussian {
                mean: *mean,
                sigma: *sigma,
            },
            ("laplace" | "laplacian", [scale]) => Distribution::Laplacian {
                mean: 0.0,
                scale: *scale,
            },
            ("laplace" | "laplacian", [scale, mean]) => Distribution::Laplacian {
                mean: *mean,
                scale: *scale,
            },
            ("mix" | "mixture", [w, m1, s1, m2, s2]) => Distribution::Mixture {
                weight: *w,
                first: (*m1, *s1),
                second: (*m2, *s2),
            },
            _ => return Err(bad()),
        };
        dist.validate()?;
        Ok(dist)
    }
}

/// Everything that determines a synthetic instance.
///
/// Distribution lists hold either one entry (shared by all channels) or one
/// entry per channel. The mismatch knobs are applied to the true
/// distributions of both latents.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub shape: Shape,
    pub side_shape: Shape,
    pub true_dist: Vec<Distribution>,
    pub learned: Vec<Distribution>,
    pub side_true: Vec<Distribution>,
    pub side_learned: Vec<Distribution>,
    pub scale_factor: f64,
    pub mean_offset: f64,
    pub scales: ScaleTable,
}

impl SynthSpec {
    /// Same true/learned pair for both latents, side latent at a quarter of
    /// the main resolution.
    pub fn new(seed: u64, shape: Shape, true_dist: Distribution, learned: Distribution) -> Self {
        SynthSpec {
            seed,
            shape,
            side_shape: Shape::new(
                (shape.height / 4).max(1),
                (shape.width / 4).max(1),
                shape.channels,
            ),
            true_dist: vec![true_dist],
            learned: vec![learned],
            side_true: vec![true_dist],
            side_learned: vec![learned],
            scale_factor: 1.0,
            mean_offset: 0.0,
            scales: ScaleTable::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.scale_factor > 0.0) || !self.scale_factor.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "scale factor must be positive, got {}",
                self.scale_factor
            )));
        }
        if !self.mean_offset.is_finite() {
            return Err(Error::InvalidDistribution("mean offset must be finite".into()));
        }
        for (list, channels, what) in [
            (&self.true_dist, self.shape.channels, "true"),
            (&self.learned, self.shape.channels, "learned"),
            (&self.side_true, self.side_shape.channels, "side true"),
            (&self.side_learned, self.side_shape.channels, "side learned"),
        ] {
            if list.len() != 1 && list.len() != channels as usize {
                return Err(Error::InvalidDistribution(format!(
                    "{what} distributions: expected 1 or {channels} entries, got {}",
                    list.len()
                )));
            }
            for d in list {
                d.validate()?;
            }
        }
        Ok(())
    }
}

fn per_channel(list: &[Distribution], c: usize) -> Distribution {
    if list.len() == 1 {
        list[0]
    } else {
        list[c]
    }
}

/// Result of [`synthesize`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// Mean-removed main latent, coded with the hyperprior model.
    pub main: LatentTensor,
    /// Learned-prior mean and scale for every main point.
    pub side_info: SideInfo,
    /// Learned distribution of each main channel.
    pub learned: Vec<Distribution>,
    /// Side latent, coded with the factorized model.
    pub side: LatentTensor,
    /// Learned factorized tables, one per side channel.
    pub tables: Vec<PmfTable>,
}

/// Draws a synthetic instance. A pure function of `spec`.
///
/// Main symbols are `round(y - mu)` with `y` from the true distribution and
/// `mu` the learned mean, clamped to the support of the table the point's
/// learned sigma selects. Side symbols are `round(y)` clamped to their
/// channel table.
pub fn synthesize(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);

    let channels = spec.shape.channels as usize;
    let learned: Vec<Distribution> = (0..channels).map(|c| per_channel(&spec.learned, c)).collect();
    let truth: Vec<Distribution> = (0..channels)
        .map(|c| per_channel(&spec.true_dist, c).with_mismatch(spec.scale_factor, spec.mean_offset))
        .collect();
    let channel_means: Vec<f32> = learned.iter().map(|d| d.mean() as f32).collect();
    let channel_scales: Vec<f32> = learned.iter().map(|d| d.std_dev() as f32).collect();
    if let Some(c) = channel_scales.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::InvalidDistribution(format!("learned channel {c} has zero spread")));
    }
    let channel_limit: Vec<i32> = channel_scales
        .iter()
        .map(|&s| {
            let table = &spec.scales.tables()[spec.scales.index_for(f64::from(s))];
            table.support_max()
        })
        .collect();

    let n = spec.shape.len();
    let mut symbols = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % channels;
        let y = truth[c].sample(&mut rng);
        let limit = channel_limit[c];
        let v = round_half_away(y - f64::from(channel_means[c]));
        symbols.push(v.clamp(-limit as f64, limit as f64) as i32);
        means.push(channel_means[c]);
        scales.push(channel_scales[c]);
    }
    let main = LatentTensor::new(spec.shape, symbols, LatentRole::Main)?;
    let side_info = SideInfo::new(means, scales)?;

    let side_channels = spec.side_shape.channels as usize;
    let mut tables = Vec::with_capacity(side_channels);
    let mut side_truth = Vec::with_capacity(side_channels);
    for c in 0..side_channels {
        let learned_c = per_channel(&spec.side_learned, c);
        let true_c = per_channel(&spec.side_true, c).with_mismatch(spec.scale_factor, spec.mean_offset);
        let m = learned_c.coverage().max(true_c.coverage());
        let table = pmf_from_cdf(|x| learned_c.cdf(x), -m, m)?.with_label(TableLabel {
            model: ModelKind::Factorized,
            index: c as u32,
        });
        tables.push(table);
        side_truth.push(true_c);
    }
    let side_n = spec.side_shape.len();
    let mut side_symbols = Vec::with_capacity(side_n);
    for i in 0..side_n {
        let c = i % side_channels;
        let y = side_truth[c].sample(&mut rng);
        let t = &tables[c];
        let v = round_half_away(y).clamp(t.support_min() as f64, t.support_max() as f64);
        side_symbols.push(v as i32);
    }
    let side = LatentTensor::new(spec.side_shape, side_symbols, LatentRole::Side)?;

    Ok(SynthOutput {
        main,
        side_info,
        learned,
        side,
        tables,
    })
}

/// Draws a factorized-only instance: the main latent of `spec` coded with
/// one learned table per channel. Side settings are ignored.
pub fn synthesize_factorized(spec: &SynthSpec) -> Result<(LatentTensor, Vec<PmfTable>)> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let channels = spec.shape.channels as usize;
    let mut tables = Vec::with_capacity(channels);
    let mut truth = Vec::with_capacity(channels);
    for c in 0..channels {
        let learned = per_channel(&spec.learned, c);
        let true_c = per_channel(&spec.true_dist, c).with_mismatch(spec.scale_factor, spec.mean_offset);
        let m = learned.coverage().max(true_c.coverage());
        tables.push(pmf_from_cdf(|x| learned.cdf(x), -m, m)?.with_label(TableLabel {
            model: ModelKind::Factorized,
            index: c as u32,
        }));
        truth.push(true_c);
    }
    let n = spec.shape.len();
    let mut symbols = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % channels;
        let t = &tables[c];
        let v = round_half_away(truth[c].sample(&mut rng));
        symbols.push(v.clamp(f64::from(t.support_min()), f64::from(t.support_max())) as i32);
    }
    Ok((LatentTensor::new(spec.shape, symbols, LatentRole::Main)?, tables))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_distributions() {
        assert_eq!("gauss:1.3".parse::<Distribution>().unwrap(), Distribution::gaussian(1.3));
        assert_eq!(
            "laplace:2,0.5".parse::<Distribution>().unwrap(),
            Distribution::Laplacian { mean: 0.5, scale: 2.0 }
        );
        assert!("gauss:-1".parse::<Distribution>().is_err());
        assert!("gauss:0".parse::<Distribution>().is_err());
        assert!("mix:1.5,0,1,0,1".parse::<Distribution>().is_err());
        assert!("cauchy:1".parse::<Distribution>().is_err());
        let mix: Distribution = "mix:0.3,-2,1,3,0.5".parse().unwrap();
        assert_eq!(mix.to_string().parse::<Distribution>().unwrap(), mix);
    }

    #[test]
    fn moments() {
        let l = Distribution::Laplacian { mean: 0.0, scale: 2.0 };
        assert!((l.std_dev() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let m = Distribution::Mixture {
            weight: 0.5,
            first: (-3.0, 1.0),
            second: (3.0, 1.0),
        };
        assert_eq!(m.mean(), 0.0);
        assert!((m.std_dev() - 10f64.sqrt()).abs() < 1e-12);
        assert!((l.cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec::new(7, Shape::new(8, 8, 3), Distribution::gaussian(1.3), Distribution::gaussian(2.0));
        assert_eq!(synthesize(&spec).unwrap(), synthesize(&spec).unwrap());
        let mut other = spec.clone();
        other.seed = 8;
        assert_ne!(synthesize(&spec).unwrap().main, synthesize(&other).unwrap().main);
    }

    #[test]
    fn side_info_constant_per_channel() {
        let mut spec = SynthSpec::new(1, Shape::new(4, 4, 2), Distribution::gaussian(1.0), Distribution::gaussian(2.0));
        spec.learned = vec![
            Distribution::Gaussian { mean: 0.25, sigma: 2.0 },
            Distribution::Gaussian { mean: -1.0, sigma: 3.0 },
        ];
        let out = synthesize(&spec).unwrap();
        for (i, (&m, &s)) in out.side_info.means().iter().zip(out.side_info.scales()).enumerate() {
            if i % 2 == 0 {
                assert_eq!((m, s), (0.25, 2.0));
            } else {
                assert_eq!((m, s), (-1.0, 3.0));
            }
        }
        assert_eq!(out.tables.len(), 2);
        assert_eq!(out.side.shape(), Shape::new(1, 1, 2));
    }

    #[test]
    fn degenerate_descriptor_rejected() {
        let mut spec = SynthSpec::new(1, Shape::new(2, 2, 1), Distribution::gaussian(1.0), Distribution::gaussian(1.0));
        spec.true_dist = vec![Distribution::Gaussian { mean: 0.0, sigma: 0.0 }];
        assert!(matches!(synthesize(&spec), Err(Error::InvalidDistribution(_))));
        let mut spec2 = SynthSpec::new(1, Shape::new(2, 2, 1), Distribution::gaussian(1.0), Distribution::gaussian(1.0));
        spec2.scale_factor = -1.0;
        assert!(synthesize(&spec2).is_err());
    }

    #[test]
    fn symbols_lie_in_supports() {
        let mut spec = SynthSpec::new(3, Shape::new(16, 16, 4), Distribution::gaussian(4.0), Distribution::gaussian(0.5));
        spec.scale_factor = 3.0;
        let out = synthesize(&spec).unwrap();
        for (i, &s) in out.side.symbols().iter().enumerate() {
            assert!(out.tables[i % 4].contains(s));
        }
        let idx = spec.scales.index_for(0.5);
        let table = &spec.scales.tables()[idx];
        assert!(out.main.symbols().iter().all(|&s| table.contains(s)));
    }
}
