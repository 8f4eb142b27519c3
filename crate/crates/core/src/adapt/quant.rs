use crate::{Error, Result};

pub const SIGMA_MIN: f64 = 0.002;
pub const SIGMA_MAX: f64 = 20.0;
pub const CENTER_RANGE: f64 = 0.03;
pub const DEFAULT_BITS: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// `levels` quantization centers spanning `[lo, hi]`, evenly spaced in the
/// linear or log domain. Both endpoints are centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantGrid {
    lo: f64,
    hi: f64,
    levels: u32,
    spacing: Spacing,
}

impl QuantGrid {
    pub fn linear(lo: f64, hi: f64, levels: u32) -> Self {
        QuantGrid {
            lo,
            hi,
            levels: levels.max(1),
            spacing: Spacing::Linear,
        }
    }

    pub fn log(lo: f64, hi: f64, levels: u32) -> Self {
        QuantGrid {
            lo,
            hi,
            levels: levels.max(1),
            spacing: Spacing::Log,
        }
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn position(&self, value: f64) -> f64 {
        let v = value.clamp(self.lo, self.hi);
        let steps = f64::from(self.levels - 1);
        let t = match self.spacing {
            Spacing::Linear => (v - self.lo) / (self.hi - self.lo),
            Spacing::Log => (libm::log(v) - libm::log(self.lo)) / (libm::log(self.hi) - libm::log(self.lo)),
        };
        if t.is_finite() {
            t * steps
        } else {
            0.0
        }
    }

    /// Nearest center after clamping into range; exact ties go to the lower
    /// index.
    pub fn quantize(&self, value: f64) -> u32 {
        let t = self.position(value);
        ((t - 0.5).ceil().max(0.0) as u32).min(self.levels - 1)
    }

    pub fn dequantize(&self, index: u32) -> f64 {
        let i = index.min(self.levels - 1);
        if i == 0 || self.levels == 1 {
            return self.lo;
        }
        if i == self.levels - 1 {
            return self.hi;
        }
        let t = f64::from(i) / f64::from(self.levels - 1);
        match self.spacing {
            Spacing::Linear => self.lo + (self.hi - self.lo) * t,
            Spacing::Log => libm::exp(libm::log(self.lo) + (libm::log(self.hi) - libm::log(self.lo)) * t),
        }
    }
}

/// The shared parameter grids. Means use a per-table grid over the table's
/// support, see [`QuantGrids::mean`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantGrids {
    pub bits: u8,
    pub sigma: QuantGrid,
    pub weight: QuantGrid,
    pub center: QuantGrid,
}

impl QuantGrids {
    pub fn new(bits: u8) -> Result<Self> {
        if !(1..=16).contains(&bits) {
            return Err(Error::InvalidConfig(format!("parameter bit depth {bits} not in 1..=16")));
        }
        let levels = 1u32 << bits;
        Ok(QuantGrids {
            bits,
            sigma: QuantGrid::log(SIGMA_MIN, SIGMA_MAX, levels),
            weight: QuantGrid::linear(0.0, 1.0, levels),
            center: QuantGrid::linear(-CENTER_RANGE, CENTER_RANGE, levels),
        })
    }

    pub fn levels(&self) -> u32 {
        1 << self.bits
    }

    pub fn mean(&self, support_min: i32, support_max: i32) -> QuantGrid {
        QuantGrid::linear(f64::from(support_min), f64::from(support_max), self.levels())
    }
}

impl Default for QuantGrids {
    fn default() -> Self {
        QuantGrids::new(DEFAULT_BITS).expect("default bit depth is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigma_endpoints() {
        let g = QuantGrids::default();
        assert_eq!(g.sigma.quantize(0.002), 0);
        assert_eq!(g.sigma.quantize(20.0), 255);
        assert_eq!(g.sigma.dequantize(0), 0.002);
        assert_eq!(g.sigma.dequantize(255), 20.0);
        assert_eq!(g.sigma.quantize(1e-9), 0);
        assert_eq!(g.sigma.quantize(1e9), 255);
    }

    #[test]
    fn sigma_log_midpoint() {
        // sqrt(0.002 * 20) sits at log position 127.5.
        let g = QuantGrids::default();
        let i = g.sigma.quantize((0.002f64 * 20.0).sqrt());
        assert!(i == 127 || i == 128);
        let oracle = |k: u32| 0.002 * 10000f64.powf(k as f64 / 255.0);
        assert!((g.sigma.dequantize(127) - oracle(127)).abs() < 1e-12);
    }

    #[test]
    fn weight_endpoint_and_ties() {
        let g = QuantGrids::default();
        assert_eq!(g.weight.quantize(1.0), 255);
        assert_eq!(g.weight.quantize(0.0), 0);
        let tiny = QuantGrid::linear(0.0, 1.0, 3);
        // 0.25 is exactly between centers 0 and 0.5
        assert_eq!(tiny.quantize(0.25), 0);
        assert_eq!(tiny.quantize(0.2500001), 1);
    }

    #[test]
    fn center_grid() {
        let g = QuantGrids::default();
        // beta = -0.02: position (0.01 / 0.06) * 255 = 42.5 -> tie to 42
        let oracle = |b: f64| {
            let centers: Vec<f64> = (0..256).map(|k| -0.03 + 0.06 * k as f64 / 255.0).collect();
            let mut best = 0;
            for (k, c) in centers.iter().enumerate() {
                if (c - b).abs() < (centers[best] - b).abs() - 1e-15 {
                    best = k;
                }
            }
            best as u32
        };
        for &b in &[-0.02, 0.0, 0.013, -0.0299, 0.03] {
            let i = g.center.quantize(b);
            let o = oracle(b);
            assert!(i == o || (g.center.dequantize(i) - b).abs() <= (g.center.dequantize(o) - b).abs() + 1e-15);
        }
        assert_eq!(g.center.quantize(0.0), 127);
    }

    #[test]
    fn degenerate_mean_grid() {
        let g = QuantGrids::default().mean(0, 0);
        assert_eq!(g.quantize(0.0), 0);
        assert_eq!(g.dequantize(17), 0.0);
    }

    #[test]
    fn bit_depth_validated() {
        assert!(QuantGrids::new(0).is_err());
        assert!(QuantGrids::new(17).is_err());
        assert_eq!(QuantGrids::new(4).unwrap().levels(), 16);
    }

    proptest! {
        #[test]
        fn idempotent(i in 0u32..256, lo in -40i32..=0, hi in 0i32..40) {
            let g = QuantGrids::default();
            for grid in [g.sigma, g.weight, g.center, g.mean(lo, hi)] {
                let v = grid.dequantize(i);
                let j = grid.quantize(v);
                if lo == hi && grid == g.mean(lo, hi) {
                    prop_assert_eq!(j, 0);
                } else {
                    prop_assert_eq!(j, i);
                }
            }
        }

        #[test]
        fn nearest(v in 0.001f64..30.0) {
            let g = QuantGrids::default().sigma;
            let i = g.quantize(v);
            let d = |k: u32| (libm::log(g.dequantize(k)) - libm::log(v.clamp(0.002, 20.0))).abs();
            if i > 0 { prop_assert!(d(i) <= d(i - 1) + 1e-12); }
            if i < 255 { prop_assert!(d(i) <= d(i + 1) + 1e-12); }
        }
    }
}
