//! Latent tensors, side information and the synthetic generator.

mod latb;
mod synth;

pub use latb::{latents_from_bytes, latents_to_bytes, load_latents, save_latents};
pub use synth::{synthesize, synthesize_factorized, Distribution, SynthOutput, SynthSpec};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
}

impl Shape {
    pub fn new(height: u32, width: u32, channels: u32) -> Self {
        Shape {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height as usize * self.width as usize * self.channels as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let dims: Vec<&str> = s.split('x').collect();
        let parse = |d: &str| {
            d.trim()
                .parse::<u32>()
                .map_err(|_| Error::InvalidConfig(format!("bad shape {s:?}, expected HxWxC")))
        };
        match dims.as_slice() {
            [h, w, c] => Ok(Shape::new(parse(h)?, parse(w)?, parse(c)?)),
            _ => Err(Error::InvalidConfig(format!("bad shape {s:?}, expected HxWxC"))),
        }
    }
}

/// Which latent a tensor holds: the mean-removed main latent or the side
/// latent coded with the factorized model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatentRole {
    Main,
    Side,
}

impl LatentRole {
    pub fn id(self) -> u8 {
        match self {
            LatentRole::Main => 0,
            LatentRole::Side => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(LatentRole::Main),
            1 => Some(LatentRole::Side),
            _ => None,
        }
    }
}

/// Integer latent symbols in row-major `(h, w, c)` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentTensor {
    shape: Shape,
    symbols: Vec<i32>,
    role: LatentRole,
}

impl LatentTensor {
    pub fn new(shape: Shape, symbols: Vec<i32>, role: LatentRole) -> Result<Self> {
        if symbols.len() != shape.len() {
            return Err(Error::ShapeMismatch {
                height: shape.height,
                width: shape.width,
                channels: shape.channels,
                len: symbols.len(),
            });
        }
        Ok(LatentTensor {
            shape,
            symbols,
            role,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn symbols(&self) -> &[i32] {
        &self.symbols
    }

    pub fn role(&self) -> LatentRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Channel index of every symbol, in storage order.
    pub fn channel_assignment(&self) -> Vec<u32> {
        let c = self.shape.channels.max(1);
        (0..self.symbols.len() as u64)
            .map(|i| (i % u64::from(c)) as u32)
            .collect()
    }
}

/// Predicted per-point means and scales for the main latent.
#[derive(Debug, Clone, PartialEq)]
pub struct SideInfo {
    means: Vec<f32>,
    scales: Vec<f32>,
}

impl SideInfo {
    pub fn new(means: Vec<f32>, scales: Vec<f32>) -> Result<Self> {
        if means.len() != scales.len() {
            return Err(Error::SideInfoLength {
                side: scales.len(),
                symbols: means.len(),
            });
        }
        if let Some((index, &value)) = scales
            .iter()
            .enumerate()
            .find(|(_, s)| !(**s > 0.0) || !s.is_finite())
        {
            return Err(Error::NonPositiveScale {
                index,
                value: f64::from(value),
            });
        }
        Ok(SideInfo { means, scales })
    }

    pub fn means(&self) -> &[f32] {
        &self.means
    }

    pub fn scales(&self) -> &[f32] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Checks that this side info covers exactly `tensor`.
    pub fn check_against(&self, tensor: &LatentTensor) -> Result<()> {
        if self.len() != tensor.len() {
            return Err(Error::SideInfoLength {
                side: self.len(),
                symbols: tensor.len(),
            });
        }
        Ok(())
    }

    /// Adds the predicted means back: `y_hat = y_tilde + mu`.
    pub fn reconstruct(&self, tensor: &LatentTensor) -> Result<Vec<f32>> {
        self.check_against(tensor)?;
        Ok(tensor
            .symbols()
            .iter()
            .zip(&self.means)
            .map(|(&s, &m)| s as f32 + m)
            .collect())
    }

    pub(crate) fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.len() * 8);
        for v in self.means.iter().chain(&self.scales) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        crate::math::fnv1a64(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_parsing() {
        assert_eq!("16x16x8".parse::<Shape>().unwrap(), Shape::new(16, 16, 8));
        assert!("16x16".parse::<Shape>().is_err());
        assert!("ax1x1".parse::<Shape>().is_err());
    }

    #[test]
    fn tensor_length_checked() {
        assert!(LatentTensor::new(Shape::new(2, 2, 1), vec![0; 3], LatentRole::Main).is_err());
        let t = LatentTensor::new(Shape::new(1, 2, 3), vec![0; 6], LatentRole::Side).unwrap();
        assert_eq!(t.channel_assignment(), vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn side_info_checks() {
        assert!(matches!(
            SideInfo::new(vec![0.0; 2], vec![1.0, 0.0]),
            Err(Error::NonPositiveScale { index: 1, .. })
        ));
        assert!(SideInfo::new(vec![0.0; 2], vec![1.0]).is_err());
        let side = SideInfo::new(vec![0.5, -1.0], vec![1.0, 2.0]).unwrap();
        let t = LatentTensor::new(Shape::new(1, 1, 2), vec![2, -3], LatentRole::Main).unwrap();
        assert_eq!(side.reconstruct(&t).unwrap(), vec![2.5, -4.0]);
    }
}
