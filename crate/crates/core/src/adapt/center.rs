//! Center-bin correction: move probability between the zero bin and the
//! rest of the support, proportionally to the learned pmf.

use super::quant::{QuantGrids, CENTER_RANGE};
use crate::entropy::{PmfTable, PMF_FLOOR};
use crate::math::round_half_away;
use crate::range_coder::FreqTable;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterBinParam {
    /// Learned center probability minus the observed one, clamped.
    pub beta: f64,
    pub index: u32,
}

impl CenterBinParam {
    pub fn dequantized(&self, grids: &QuantGrids) -> f64 {
        grids.center.dequantize(self.index)
    }
}

/// `beta = p(0) - h(0) / Σh`, clamped to the center grid and quantized.
pub fn compute_center_beta(learned: &PmfTable, counts: &[u64], grids: &QuantGrids) -> Result<CenterBinParam> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let center = learned.center();
    let observed = counts[center] as f64 / total as f64;
    let beta = (learned.probs()[center] - observed).clamp(-CENTER_RANGE, CENTER_RANGE);
    Ok(CenterBinParam {
        beta,
        index: grids.center.quantize(beta),
    })
}

/// Lowers the center probability by `beta` and scales every other bin by
/// `1 + beta / (1 - p(0))`.
///
/// Tail bins sitting at the floor drop below it whenever the center grows;
/// in that case the result is floored and renormalized like any other pmf.
pub fn center_bin_pmf(learned: &PmfTable, beta: f64) -> Result<PmfTable> {
    let center = learned.center();
    let p0 = learned.probs()[center];
    let adjusted = p0 - beta;
    if !(adjusted >= PMF_FLOOR) || adjusted > 1.0 {
        return Err(Error::CenterBinUnderflow(format!(
            "center probability {p0} minus {beta} leaves {adjusted}"
        )));
    }
    if beta == 0.0 {
        return Ok(learned.clone());
    }
    let rest = 1.0 - p0;
    if rest <= 0.0 {
        return Err(Error::CenterBinUnderflow("no mass outside the center bin".into()));
    }
    let factor = 1.0 + beta / rest;
    let probs: Vec<f64> = learned
        .probs()
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == center { adjusted } else { p * factor })
        .collect();
    let table = if probs.iter().all(|&p| p >= PMF_FLOOR) {
        PmfTable::from_probs(learned.support_min(), probs)?
    } else {
        PmfTable::from_weights(learned.support_min(), &probs)?
    };
    Ok(table.with_label(learned.label()))
}

/// Integer shift of the center frequency, `round(beta * total)`.
pub fn center_delta(beta: f64, precision: u32) -> i64 {
    round_half_away(beta * (1u64 << precision) as f64) as i64
}

/// Integer-only counterpart of [`center_bin_pmf`] on a frequency table.
///
/// The center frequency becomes `F(0) - delta`; every other bin becomes
/// `floor(F(x) * (total - F~(0)) / (total - F(0)))`, at least one. The
/// shortfall goes one unit at a time to the largest remainders and any
/// excess is taken from the smallest remainders among bins above one, ties
/// to the lower symbol.
pub fn rebuild_center_bin_freqs(learned: &FreqTable, delta: i64) -> Result<FreqTable> {
    if delta == 0 {
        return Ok(learned.clone());
    }
    let total = u64::from(learned.total());
    let center = learned.center();
    let f0 = u64::from(learned.freqs()[center]);
    let new_center = f0 as i64 - delta;
    let others = learned.len() as u64 - 1;
    if new_center < 1 || new_center as u64 + others > total {
        return Err(Error::CenterBinUnderflow(format!(
            "center frequency {f0} shifted by {delta} leaves {new_center}"
        )));
    }
    let new_center = new_center as u64;
    let old_rest = total - f0;
    let new_rest = total - new_center;

    let mut freqs = vec![0u64; learned.len()];
    let mut rems = vec![0u64; learned.len()];
    for (i, &f) in learned.freqs().iter().enumerate() {
        if i == center {
            freqs[i] = new_center;
            continue;
        }
        let num = u64::from(f) * new_rest;
        freqs[i] = (num / old_rest).max(1);
        rems[i] = if num / old_rest == 0 { 0 } else { num % old_rest };
    }
    let assigned: u64 = freqs.iter().sum();
    let mut order: Vec<usize> = (0..learned.len()).filter(|&i| i != center).collect();
    if assigned < total {
        order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
        let mut residual = total - assigned;
        while residual > 0 {
            for &i in &order {
                if residual == 0 {
                    break;
                }
                freqs[i] += 1;
                residual -= 1;
            }
        }
    } else if assigned > total {
        order.sort_by(|&a, &b| rems[a].cmp(&rems[b]).then(a.cmp(&b)));
        let mut excess = assigned - total;
        while excess > 0 {
            for &i in &order {
                if excess == 0 {
                    break;
                }
                if freqs[i] > 1 {
                    freqs[i] -= 1;
                    excess -= 1;
                }
            }
        }
    }
    FreqTable::from_freqs(
        learned.support_min(),
        freqs.into_iter().map(|f| f as u32).collect(),
        learned.precision(),
    )
}
