use super::pmf::{default_support, discretized_gaussian_pmf, ModelKind, PmfTable, TableLabel};
use crate::latent::SideInfo;
use crate::{Error, Result};

/// Ascending scales of the hyperprior model with one cached zero-mean
/// discretized Gaussian pmf per scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleTable {
    scales: Vec<f64>,
    tables: Vec<PmfTable>,
}

impl ScaleTable {
    pub const DEFAULT_COUNT: usize = 64;
    pub const DEFAULT_MIN: f64 = 0.11;
    pub const DEFAULT_MAX: f64 = 256.0;

    /// `count` scales spaced evenly in log domain between `min` and `max`.
    pub fn log_spaced(count: usize, min: f64, max: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidConfig("scale table needs at least one scale".into()));
        }
        if !(min > 0.0) || !(max >= min) || !max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "scale range [{min}, {max}] must be positive and ordered"
            )));
        }
        if count > 1 && max == min {
            return Err(Error::InvalidConfig("scales must be strictly ascending".into()));
        }
        let (lo, hi) = (libm::log(min), libm::log(max));
        let scales = (0..count)
            .map(|i| match i {
                0 => min,
                i if i == count - 1 => max,
                i => libm::exp(lo + (hi - lo) * i as f64 / (count - 1) as f64),
            })
            .collect();
        Self::from_scales(scales)
    }

    pub fn from_scales(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::InvalidConfig("scale table needs at least one scale".into()));
        }
        if scales.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig("scales must be positive".into()));
        }
        if scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("scales must be strictly ascending".into()));
        }
        let tables = scales
            .iter()
            .enumerate()
            .map(|(i, &sigma)| {
                let m = default_support(sigma) as i32;
                discretized_gaussian_pmf(sigma, -m, m).map(|t| {
                    t.with_label(TableLabel {
                        model: ModelKind::Hyperprior,
                        index: i as u32,
                    })
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScaleTable { scales, tables })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn tables(&self) -> &[PmfTable] {
        &self.tables
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    /// Index of the smallest scale `>= sigma`, clamped to the last scale.
    pub fn index_for(&self, sigma: f64) -> usize {
        self.scales
            .partition_point(|&s| s < sigma)
            .min(self.scales.len() - 1)
    }
}

impl Default for ScaleTable {
    fn default() -> Self {
        Self::log_spaced(Self::DEFAULT_COUNT, Self::DEFAULT_MIN, Self::DEFAULT_MAX)
            .expect("default scale table is valid")
    }
}

/// Maps every latent point to the index of its winning scale.
pub fn assign_scales(side: &SideInfo, table: &ScaleTable) -> Vec<u32> {
    side.scales()
        .iter()
        .map(|&s| table.index_for(f64::from(s)) as u32)
        .collect()
}
