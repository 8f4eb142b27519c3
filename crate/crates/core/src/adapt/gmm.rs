//! Truncated Gaussian mixtures on a discrete support.
//!
//! The pmf evaluates each component's density at the integer points and
//! renormalizes over `[x_min, x_max]`:
//!
//! ```text
//! p(x) = Σ_k π_k N(x; μ_k, σ_k) / Σ_z Σ_k π_k N(z; μ_k, σ_k)
//! ```
//!
//! Everything is computed in log space so narrow components far from the
//! support do not underflow.

use super::quant::{QuantGrids, SIGMA_MAX, SIGMA_MIN};
use crate::entropy::PmfTable;
use crate::math::{log_sum_exp, normal_log_density};
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 200;
const MAX_HALVINGS: usize = 10;
const TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    components: Vec<Component>,
}

impl GmmParams {
    /// Validates weights (summing to one), means and scales.
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidConfig("mixture needs at least one component".into()));
        }
        for c in &components {
            if !(0.0..=1.0).contains(&c.weight) || !c.mean.is_finite() {
                return Err(Error::InvalidConfig(format!("invalid component {c:?}")));
            }
            if !(SIGMA_MIN..=SIGMA_MAX).contains(&c.sigma) {
                return Err(Error::InvalidConfig(format!(
                    "sigma {} outside [{SIGMA_MIN}, {SIGMA_MAX}]",
                    c.sigma
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("mixture weights sum to {total}")));
        }
        Ok(GmmParams { components })
    }

    /// Rescales the weights to sum to one first. Used for dequantized
    /// weights, which the truncated pmf is invariant to up to scale.
    pub fn normalized(mut components: Vec<Component>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidConfig("mixture weights are all zero".into()));
        }
        for c in &mut components {
            c.weight /= total;
        }
        Self::new(components)
    }

    pub fn zero_mean(sigma: f64) -> Result<Self> {
        Self::new(vec![Component {
            weight: 1.0,
            mean: 0.0,
            sigma,
        }])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    fn log_weight(&self, x: f64, scratch: &mut Vec<f64>) -> f64 {
        scratch.clear();
        scratch.extend(self.components.iter().map(|c| {
            if c.weight > 0.0 {
                libm::log(c.weight) + normal_log_density(x, c.mean, c.sigma)
            } else {
                f64::NEG_INFINITY
            }
        }));
        log_sum_exp(scratch)
    }

    /// Unnormalized log mixture density at every support point.
    fn log_weights(&self, support_min: i32, len: usize) -> Vec<f64> {
        let mut scratch = Vec::with_capacity(self.k());
        (0..len)
            .map(|i| self.log_weight(f64::from(support_min) + i as f64, &mut scratch))
            .collect()
    }
}

/// Truncated mixture pmf on `[support_min, support_max]`, floored.
pub fn truncated_gmm_pmf(params: &GmmParams, support_min: i32, support_max: i32) -> Result<PmfTable> {
    if support_max < support_min {
        return Err(Error::InvalidPmf("empty support".into()));
    }
    let len = (support_max - support_min + 1) as usize;
    let lw = params.log_weights(support_min, len);
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::MassUnderflow {
            min: support_min,
            max: support_max,
        });
    }
    let weights: Vec<f64> = lw.iter().map(|v| libm::exp(v - max)).collect();
    PmfTable::from_weights(support_min, &weights)
}

/// Truncated log-likelihood `Σ_x h(x) log p(x)` in nats, before flooring.
pub fn log_likelihood(params: &GmmParams, counts: &[u64], support_min: i32) -> f64 {
    let lw = params.log_weights(support_min, counts.len());
    let log_z = log_sum_exp(&lw);
    counts
        .iter()
        .zip(&lw)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, &l)| c as f64 * (l - log_z))
        .sum()
}

/// A fitted mixture with the objective after every accepted iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub params: GmmParams,
    pub objective: f64,
    /// Objective at initialization followed by every accepted iteration.
    pub trace: Vec<f64>,
}

struct Histogram<'a> {
    counts: &'a [u64],
    support_min: i32,
    total: f64,
}

impl Histogram<'_> {
    fn support_max(&self) -> i32 {
        self.support_min + self.counts.len() as i32 - 1
    }

    fn occupied(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (f64::from(self.support_min) + i as f64, c as f64))
    }

    fn clamp(&self, c: Component) -> Component {
        Component {
            weight: c.weight,
            mean: c.mean.clamp(f64::from(self.support_min), f64::from(self.support_max())),
            sigma: c.sigma.clamp(SIGMA_MIN, SIGMA_MAX),
        }
    }
}

/// One EM update with closed-form weights, means and scales.
fn em_update(h: &Histogram<'_>, params: &GmmParams) -> Vec<Component> {
    let k = params.k();
    let mut mass = vec![0.0; k];
    let mut first = vec![0.0; k];
    let mut scratch = Vec::with_capacity(k);
    let mut resp = vec![0.0; k];
    let occupied: Vec<(f64, f64)> = h.occupied().collect();
    for &(x, c) in &occupied {
        let lw = params.log_weight(x, &mut scratch);
        for (j, comp) in params.components.iter().enumerate() {
            resp[j] = if comp.weight > 0.0 {
                libm::exp(scratch[j] - lw)
            } else {
                0.0
            };
            mass[j] += c * resp[j];
            first[j] += c * resp[j] * x;
        }
    }
    let means: Vec<f64> = (0..k)
        .map(|j| {
            if mass[j] > 0.0 {
                first[j] / mass[j]
            } else {
                params.components[j].mean
            }
        })
        .collect();
    let mut second = vec![0.0; k];
    for &(x, c) in &occupied {
        let lw = params.log_weight(x, &mut scratch);
        for j in 0..k {
            if params.components[j].weight > 0.0 {
                let r = libm::exp(scratch[j] - lw);
                second[j] += c * r * (x - means[j]) * (x - means[j]);
            }
        }
    }
    (0..k)
        .map(|j| {
            let old = params.components[j];
            let comp = if mass[j] > 0.0 {
                Component {
                    weight: mass[j] / h.total,
                    mean: means[j],
                    sigma: (second[j] / mass[j]).sqrt(),
                }
            } else {
                Component {
                    weight: 0.0,
                    ..old
                }
            };
            h.clamp(comp)
        })
        .collect()
}

fn blend(a: &[Component], b: &[Component]) -> Vec<Component> {
    a.iter()
        .zip(b)
        .map(|(a, b)| Component {
            weight: 0.5 * (a.weight + b.weight),
            mean: 0.5 * (a.mean + b.mean),
            sigma: 0.5 * (a.sigma + b.sigma),
        })
        .collect()
}

/// EM on the truncated objective. An update that lowers the objective is
/// pulled halfway back toward the previous parameters, up to ten times;
/// if none of those improves, the fit stops.
fn run_em(h: &Histogram<'_>, init: GmmParams) -> Result<GmmFit> {
    let mut params = init;
    let mut objective = log_likelihood(&params, h.counts, h.support_min);
    let mut trace = vec![objective];
    for _ in 0..MAX_ITERATIONS {
        let mut candidate = em_update(h, &params);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = GmmParams::normalized(candidate.clone())?;
            let value = log_likelihood(&cand, h.counts, h.support_min);
            if value >= objective {
                accepted = Some((cand, value));
                break;
            }
            candidate = blend(params.components(), &candidate);
        }
        let Some((next, value)) = accepted else { break };
        let improvement = (value - objective) / h.total;
        params = next;
        objective = value;
        trace.push(objective);
        if improvement < TOLERANCE {
            break;
        }
    }
    Ok(GmmFit {
        params,
        objective,
        trace,
    })
}

/// Splits the histogram into `k` equal-mass segments and takes each
/// segment's mass, mean and spread.
fn quantile_init(h: &Histogram<'_>, k: usize) -> Result<GmmParams> {
    let mut mass = vec![0.0; k];
    let mut first = vec![0.0; k];
    let mut second = vec![0.0; k];
    let mut before = 0.0;
    let (mut global_first, mut global_second) = (0.0, 0.0);
    for (x, c) in h.occupied() {
        let mid = (before + 0.5 * c) / h.total;
        let seg = ((mid * k as f64) as usize).min(k - 1);
        mass[seg] += c;
        first[seg] += c * x;
        second[seg] += c * x * x;
        global_first += c * x;
        global_second += c * x * x;
        before += c;
    }
    let global_mean = global_first / h.total;
    let global_sigma = (global_second / h.total - global_mean * global_mean).max(0.0).sqrt();
    let components = (0..k)
        .map(|j| {
            if mass[j] > 0.0 {
                let mean = first[j] / mass[j];
                let var = (second[j] / mass[j] - mean * mean).max(0.0);
                h.clamp(Component {
                    weight: mass[j] / h.total,
                    mean,
                    sigma: var.sqrt(),
                })
            } else {
                h.clamp(Component {
                    weight: 0.0,
                    mean: global_mean,
                    sigma: global_sigma,
                })
            }
        })
        .collect();
    GmmParams::normalized(components)
}

/// Extends a `(k-1)`-component solution with one component placed where
/// the histogram most exceeds the current fit.
fn split_init(h: &Histogram<'_>, prev: &GmmParams) -> Result<GmmParams> {
    let pmf = truncated_gmm_pmf(prev, h.support_min, h.support_max())?;
    let (mut best_x, mut best_excess) = (f64::from(h.support_min), f64::NEG_INFINITY);
    for (i, (&c, &p)) in h.counts.iter().zip(pmf.probs()).enumerate() {
        let excess = c as f64 / h.total - p;
        if excess > best_excess {
            best_excess = excess;
            best_x = f64::from(h.support_min) + i as f64;
        }
    }
    let mut components: Vec<Component> = prev
        .components()
        .iter()
        .map(|c| Component {
            weight: 0.8 * c.weight,
            ..*c
        })
        .collect();
    components.push(h.clamp(Component {
        weight: 0.2,
        mean: best_x,
        sigma: 1.0,
    }));
    GmmParams::normalized(components)
}

fn pad(fit: GmmFit, k: usize, mean: f64) -> Result<GmmFit> {
    let mut components = fit.params.components().to_vec();
    while components.len() < k {
        components.push(Component {
            weight: 0.0,
            mean,
            sigma: 1.0,
        });
    }
    Ok(GmmFit {
        params: GmmParams::new(components)?,
        ..fit
    })
}

/// Fits a `k`-component truncated mixture to a histogram.
///
/// Two deterministic starts are tried: quantile segments, and the
/// `(k-1)`-component solution plus one new component. The `(k-1)` solution
/// padded with a zero-weight component is also a candidate, so the result
/// never scores below the smaller model. With fewer occupied bins than
/// components, the extra components get zero weight.
pub fn fit_gmm(counts: &[u64], support_min: i32, k: usize, grids: &QuantGrids) -> Result<GmmFit> {
    let _ = grids;
    if k == 0 {
        return Err(Error::InvalidConfig("mixture needs at least one component".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let h = Histogram {
        counts,
        support_min,
        total: total as f64,
    };
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    if k > occupied {
        let fit = fit_gmm(counts, support_min, occupied, grids)?;
        let mean = fit.params.components()[0].mean;
        return pad(fit, k, mean);
    }

    let mut best = run_em(&h, quantile_init(&h, k)?)?;
    if k >= 2 {
        let prev = fit_gmm(counts, support_min, k - 1, grids)?;
        let seeded = run_em(&h, split_init(&h, &prev.params)?)?;
        if seeded.objective > best.objective {
            best = seeded;
        }
        if prev.objective > best.objective {
            let mean = prev.params.components()[0].mean;
            best = pad(prev, k, mean)?;
        }
    }
    Ok(best)
}

/// Fits `N(0, σ)` truncated to the support: a scan over the σ grid
/// followed by golden-section search on `ln σ` around the best center.
pub fn fit_zero_mean_gaussian(counts: &[u64], support_min: i32, grids: &QuantGrids) -> Result<GmmFit> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let objective = |sigma: f64| -> Result<f64> {
        Ok(log_likelihood(&GmmParams::zero_mean(sigma)?, counts, support_min))
    };
    let levels = grids.sigma.levels();
    let mut best_index = 0;
    let mut best_value = f64::NEG_INFINITY;
    for i in 0..levels {
        let v = objective(grids.sigma.dequantize(i))?;
        if v > best_value {
            best_value = v;
            best_index = i;
        }
    }
    let grid_sigma = grids.sigma.dequantize(best_index);
    let mut lo = libm::log(grids.sigma.dequantize(best_index.saturating_sub(1)));
    let mut hi = libm::log(grids.sigma.dequantize((best_index + 1).min(levels - 1)));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let mut fa = objective(libm::exp(a))?;
    let mut fb = objective(libm::exp(b))?;
    for _ in 0..60 {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = objective(libm::exp(a))?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = objective(libm::exp(b))?;
        }
    }
    let (refined, refined_value) = if fa >= fb { (a, fa) } else { (b, fb) };
    let (sigma, value) = if refined_value > best_value {
        (libm::exp(refined).clamp(SIGMA_MIN, SIGMA_MAX), refined_value)
    } else {
        (grid_sigma, best_value)
    };
    Ok(GmmFit {
        params: GmmParams::zero_mean(sigma)?,
        objective: value,
        trace: vec![best_value, value],
    })
}
