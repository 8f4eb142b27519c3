//! Method configuration, per-table fitting and the accept/reject pass.

use std::fmt;
use std::str::FromStr;

use super::center::{center_bin_pmf, center_delta, compute_center_beta, rebuild_center_bin_freqs};
use super::gmm::{fit_gmm, fit_zero_mean_gaussian, truncated_gmm_pmf, Component, GmmParams};
use super::quant::QuantGrids;
use crate::entropy::PmfTable;
use crate::gap::{learned_bits, HistogramSet, ModelStats};
use crate::math::empirical_bits;
use crate::range_coder::{quantize_pmf, FreqTable};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    None,
    Gmm,
    ZeroMeanGaussian,
    CenterBin,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::None, Method::Gmm, Method::ZeroMeanGaussian, Method::CenterBin];

    pub fn id(self) -> u8 {
        match self {
            Method::None => 0,
            Method::Gmm => 1,
            Method::ZeroMeanGaussian => 2,
            Method::CenterBin => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Gmm => "gmm",
            Method::ZeroMeanGaussian => "zero-mean-gaussian",
            Method::CenterBin => "center-bin",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Method::None),
            "gmm" => Ok(Method::Gmm),
            "zero-mean-gaussian" | "zmg" => Ok(Method::ZeroMeanGaussian),
            "center-bin" => Ok(Method::CenterBin),
            _ => Err(Error::InvalidConfig(format!(
                "unknown method {s:?}, expected none, gmm, zero-mean-gaussian or center-bin"
            ))),
        }
    }
}

/// Re-parameterization settings for one entropy model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodConfig {
    pub method: Method,
    /// Mixture components; only used by [`Method::Gmm`].
    pub components: u8,
    /// Number of targeted tables.
    pub targets: u32,
    /// Bits per quantized parameter.
    pub bits: u8,
}

impl MethodConfig {
    pub const MAX_COMPONENTS: u8 = 8;

    pub fn new(method: Method, components: u8, targets: u32, bits: u8) -> Result<Self> {
        let config = MethodConfig {
            method,
            components,
            targets,
            bits,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn none() -> Self {
        MethodConfig {
            method: Method::None,
            components: 1,
            targets: 0,
            bits: super::quant::DEFAULT_BITS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        QuantGrids::new(self.bits)?;
        if self.method == Method::Gmm && !(1..=Self::MAX_COMPONENTS).contains(&self.components) {
            return Err(Error::InvalidConfig(format!(
                "K = {} not in 1..={}",
                self.components,
                Self::MAX_COMPONENTS
            )));
        }
        Ok(())
    }

    /// Quantized parameters per selected table.
    pub fn param_count(&self) -> usize {
        match self.method {
            Method::None => 0,
            Method::Gmm => 3 * usize::from(self.components),
            Method::ZeroMeanGaussian | Method::CenterBin => 1,
        }
    }

    pub fn param_bits(&self) -> u64 {
        self.param_count() as u64 * u64::from(self.bits)
    }

    /// Targets actually used against `tables` tables.
    pub fn effective_targets(&self, tables: usize) -> usize {
        match self.method {
            Method::None => 0,
            _ => (self.targets as usize).min(tables),
        }
    }

    /// The same config with the target count clamped to `tables`.
    pub fn clamped(&self, tables: usize) -> Self {
        MethodConfig {
            targets: self.effective_targets(tables) as u32,
            ..*self
        }
    }
}

impl fmt::Display for MethodConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            Method::None => f.write_str("none"),
            Method::Gmm => write!(f, "gmm K={} T={} b={}", self.components, self.targets, self.bits),
            m => write!(f, "{m} T={} b={}", self.targets, self.bits),
        }
    }
}

fn gmm_from_indices(indices: &[u32], learned: &PmfTable, grids: &QuantGrids) -> Result<GmmParams> {
    let mean_grid = grids.mean(learned.support_min(), learned.support_max());
    let components = indices
        .chunks_exact(3)
        .map(|c| Component {
            weight: grids.weight.dequantize(c[0]),
            mean: mean_grid.dequantize(c[1]),
            sigma: grids.sigma.dequantize(c[2]),
        })
        .collect();
    GmmParams::normalized(components)
}

fn check_arity(config: &MethodConfig, indices: &[u32]) -> Result<()> {
    if indices.len() != config.param_count() {
        return Err(Error::Mismatch(format!(
            "{} expects {} parameters, got {}",
            config.method,
            config.param_count(),
            indices.len()
        )));
    }
    Ok(())
}

/// Real-valued replacement pmf rebuilt from quantized indices.
pub fn adapted_pmf(config: &MethodConfig, indices: &[u32], learned: &PmfTable, grids: &QuantGrids) -> Result<PmfTable> {
    check_arity(config, indices)?;
    let pmf = match config.method {
        Method::None => learned.clone(),
        Method::Gmm => {
            let params = gmm_from_indices(indices, learned, grids)?;
            truncated_gmm_pmf(&params, learned.support_min(), learned.support_max())?
        }
        Method::ZeroMeanGaussian => {
            let params = GmmParams::zero_mean(grids.sigma.dequantize(indices[0]))?;
            truncated_gmm_pmf(&params, learned.support_min(), learned.support_max())?
        }
        Method::CenterBin => center_bin_pmf(learned, grids.center.dequantize(indices[0]))?,
    };
    Ok(pmf.with_label(learned.label()))
}

/// Frequency table a selected table is coded with. Encoder and decoder
/// both call this; center-bin stays in integers throughout.
pub fn adapted_freqs(
    config: &MethodConfig,
    indices: &[u32],
    learned: &PmfTable,
    learned_freqs: &FreqTable,
    grids: &QuantGrids,
) -> Result<FreqTable> {
    check_arity(config, indices)?;
    match config.method {
        Method::None => Ok(learned_freqs.clone()),
        Method::CenterBin => {
            let delta = center_delta(grids.center.dequantize(indices[0]), learned_freqs.precision());
            rebuild_center_bin_freqs(learned_freqs, delta)
        }
        _ => quantize_pmf(&adapted_pmf(config, indices, learned, grids)?, learned_freqs.precision()),
    }
}

/// Outcome for one targeted table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDecision {
    pub table: u32,
    pub selected: bool,
    /// Quantized parameters; empty unless selected.
    pub indices: Vec<u32>,
    pub learned_bits: f64,
    /// Ideal bits with the replacement pmf, or the learned bits if not
    /// selected.
    pub adapted_bits: f64,
    /// Ideal bits under the table's own histogram.
    pub optimal_bits: f64,
}

/// Targeted tables (ascending table index) with their selection results.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationRecord {
    pub config: MethodConfig,
    pub decisions: Vec<TableDecision>,
}

impl AdaptationRecord {
    pub fn empty(config: MethodConfig) -> Self {
        AdaptationRecord {
            config: MethodConfig { targets: 0, ..config },
            decisions: Vec::new(),
        }
    }

    pub fn signal_bits(&self) -> u64 {
        self.decisions.len() as u64
    }

    pub fn selected_count(&self) -> usize {
        self.decisions.iter().filter(|d| d.selected).count()
    }

    pub fn param_bits(&self) -> u64 {
        self.selected_count() as u64 * self.config.param_bits()
    }

    pub fn is_targeted(&self, table: usize) -> bool {
        self.decision(table).is_some()
    }

    pub fn decision(&self, table: usize) -> Option<&TableDecision> {
        self.decisions
            .binary_search_by_key(&(table as u32), |d| d.table)
            .ok()
            .map(|i| &self.decisions[i])
    }

    /// Replacement pmfs, with learned tables left in place where nothing
    /// was selected.
    pub fn apply(&self, learned: &[PmfTable], grids: &QuantGrids) -> Result<Vec<PmfTable>> {
        let mut out = learned.to_vec();
        for d in self.decisions.iter().filter(|d| d.selected) {
            let i = d.table as usize;
            out[i] = adapted_pmf(&self.config, &d.indices, &learned[i], grids)?;
        }
        Ok(out)
    }

    /// Frequency tables for coding.
    pub fn apply_freqs(&self, learned: &[PmfTable], learned_freqs: &[FreqTable], grids: &QuantGrids) -> Result<Vec<FreqTable>> {
        let mut out = learned_freqs.to_vec();
        for d in self.decisions.iter().filter(|d| d.selected) {
            let i = d.table as usize;
            out[i] = adapted_freqs(&self.config, &d.indices, &learned[i], &learned_freqs[i], grids)?;
        }
        Ok(out)
    }

    /// Ideal-bit accounting over all tables of the model.
    pub fn stats(&self, hist: &HistogramSet, learned: &[PmfTable]) -> ModelStats {
        let mut stats = ModelStats {
            signal_bits: self.signal_bits() as f64,
            param_bits: self.param_bits() as f64,
            ..ModelStats::default()
        };
        for (i, table) in learned.iter().enumerate() {
            let counts = hist.counts(i);
            let bits = learned_bits(counts, table);
            stats.learned_bits += bits;
            stats.optimal_bits += empirical_bits(counts);
            stats.adapted_bits += match self.decision(i) {
                Some(d) if d.selected => d.adapted_bits,
                _ => bits,
            };
        }
        stats
    }
}

/// Tables ranked by learned-bits contribution, largest first, ties to the
/// lower index; the first `t` of them in ascending index order.
pub fn rank_targets(hist: &HistogramSet, learned: &[PmfTable], t: usize) -> Vec<u32> {
    let bits: Vec<f64> = learned
        .iter()
        .enumerate()
        .map(|(i, table)| learned_bits(hist.counts(i), table))
        .collect();
    let mut order: Vec<usize> = (0..learned.len()).collect();
    order.sort_by(|&a, &b| bits[b].total_cmp(&bits[a]).then(a.cmp(&b)));
    let mut picked: Vec<u32> = order.into_iter().take(t).map(|i| i as u32).collect();
    picked.sort_unstable();
    picked
}

/// Initial quantized parameters from the unquantized fit.
fn fit_indices(config: &MethodConfig, counts: &[u64], learned: &PmfTable, grids: &QuantGrids) -> Result<Vec<u32>> {
    let min = learned.support_min();
    match config.method {
        Method::None => Ok(Vec::new()),
        Method::Gmm => {
            let fit = fit_gmm(counts, min, usize::from(config.components), grids)?;
            let mean_grid = grids.mean(min, learned.support_max());
            Ok(fit
                .params
                .components()
                .iter()
                .flat_map(|c| {
                    [
                        grids.weight.quantize(c.weight),
                        mean_grid.quantize(c.mean),
                        grids.sigma.quantize(c.sigma),
                    ]
                })
                .collect())
        }
        Method::ZeroMeanGaussian => {
            let fit = fit_zero_mean_gaussian(counts, min, grids)?;
            Ok(vec![grids.sigma.quantize(fit.params.components()[0].sigma)])
        }
        Method::CenterBin => Ok(vec![compute_center_beta(learned, counts, grids)?.index]),
    }
}

/// Ideal bits with quantized parameters, or `None` if they do not give a
/// usable table on both the real and the integer path.
fn evaluate(
    config: &MethodConfig,
    indices: &[u32],
    counts: &[u64],
    learned: &PmfTable,
    learned_freqs: &FreqTable,
    grids: &QuantGrids,
) -> Option<f64> {
    let pmf = adapted_pmf(config, indices, learned, grids).ok()?;
    if config.method == Method::CenterBin {
        adapted_freqs(config, indices, learned, learned_freqs, grids).ok()?;
    }
    Some(learned_bits(counts, &pmf))
}

/// Fits one table and refines each quantized index by ±1 in a single
/// greedy pass. Returns the indices and their ideal bits.
pub fn fit_table(
    config: &MethodConfig,
    counts: &[u64],
    learned: &PmfTable,
    learned_freqs: &FreqTable,
    grids: &QuantGrids,
) -> Result<Option<(Vec<u32>, f64)>> {
    let mut indices = fit_indices(config, counts, learned, grids)?;
    let levels = grids.levels();
    let mut best = evaluate(config, &indices, counts, learned, learned_freqs, grids);
    for p in 0..indices.len() {
        let start = indices[p];
        for candidate in [start.checked_sub(1), start.checked_add(1).filter(|&i| i < levels)] {
            let Some(candidate) = candidate else { continue };
            let mut trial = indices.clone();
            trial[p] = candidate;
            if let Some(bits) = evaluate(config, &trial, counts, learned, learned_freqs, grids) {
                if best.is_none_or(|b| bits < b) {
                    best = Some(bits);
                    indices = trial;
                }
            }
        }
    }
    Ok(best.map(|bits| (indices, bits)))
}

/// Targets the `T` tables with the largest learned-bits contribution and
/// replaces each one whose quantized fit saves more than its parameter
/// cost.
pub fn select_tables(
    hist: &HistogramSet,
    learned: &[PmfTable],
    learned_freqs: &[FreqTable],
    config: &MethodConfig,
) -> Result<AdaptationRecord> {
    config.validate()?;
    if hist.len() != learned.len() || learned_freqs.len() != learned.len() {
        return Err(Error::Mismatch(format!(
            "{} histograms, {} tables, {} frequency tables",
            hist.len(),
            learned.len(),
            learned_freqs.len()
        )));
    }
    if config.method == Method::None {
        return Ok(AdaptationRecord::empty(*config));
    }
    if config.targets as usize > learned.len() {
        return Err(Error::InvalidConfig(format!(
            "T = {} exceeds the {} available tables",
            config.targets,
            learned.len()
        )));
    }
    let grids = QuantGrids::new(config.bits)?;
    let cost = config.param_bits() as f64;
    let mut decisions = Vec::with_capacity(config.targets as usize);
    for table in rank_targets(hist, learned, config.targets as usize) {
        let i = table as usize;
        let counts = hist.counts(i);
        let base = learned_bits(counts, &learned[i]);
        let mut decision = TableDecision {
            table,
            selected: false,
            indices: Vec::new(),
            learned_bits: base,
            adapted_bits: base,
            optimal_bits: empirical_bits(counts),
        };
        if hist.total(i) > 0 {
            if let Some((indices, bits)) = fit_table(config, counts, &learned[i], &learned_freqs[i], &grids)? {
                if base - bits - cost > 0.0 {
                    decision.selected = true;
                    decision.indices = indices;
                    decision.adapted_bits = bits;
                }
            }
        }
        decisions.push(decision);
    }
    Ok(AdaptationRecord {
        config: *config,
        decisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{SymbolStream, PMF_FLOOR};
    use crate::gap::histogram;

    fn setup(probs: Vec<f64>, counts: &[u64]) -> (HistogramSet, Vec<PmfTable>, Vec<FreqTable>) {
        let min = -((probs.len() / 2) as i32);
        let table = PmfTable::from_probs(min, probs).unwrap();
        let mut symbols = Vec::new();
        for (i, &c) in counts.iter().enumerate() {
            symbols.extend(std::iter::repeat_n(min + i as i32, c as usize));
        }
        let n = symbols.len();
        let stream = SymbolStream::new(symbols, vec![0; n]).unwrap();
        let tables = vec![table];
        let hist = histogram(&stream, &tables).unwrap();
        let freqs = vec![quantize_pmf(&tables[0], 16).unwrap()];
        (hist, tables, freqs)
    }

    fn uniform3() -> Vec<f64> {
        vec![1.0 / 3.0; 3]
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(Method::from_id(m.id()), Some(m));
        }
        assert!("gauss".parse::<Method>().is_err());
    }

    #[test]
    fn param_costs() {
        let gmm = MethodConfig::new(Method::Gmm, 2, 4, 8).unwrap();
        assert_eq!(gmm.param_bits(), 48);
        assert_eq!(MethodConfig::new(Method::Gmm, 1, 4, 8).unwrap().param_bits(), 24);
        assert_eq!(MethodConfig::new(Method::ZeroMeanGaussian, 1, 4, 8).unwrap().param_bits(), 8);
        assert_eq!(MethodConfig::new(Method::CenterBin, 3, 4, 6).unwrap().param_bits(), 6);
        assert!(MethodConfig::new(Method::Gmm, 0, 4, 8).is_err());
        assert!(MethodConfig::new(Method::Gmm, 1, 4, 0).is_err());
    }

    #[test]
    fn peaked_counts_select() {
        let config = MethodConfig::new(Method::Gmm, 1, 1, 8).unwrap();
        for counts in [[1u64, 8, 1], [10, 80, 10]] {
            let (hist, tables, freqs) = setup(uniform3(), &counts);
            let record = select_tables(&hist, &tables, &freqs, &config).unwrap();
            let d = &record.decisions[0];
            // oracle: refit directly and sum code lengths
            let grids = QuantGrids::default();
            let (indices, bits) = fit_table(&config, &counts, &tables[0], &freqs[0], &grids).unwrap().unwrap();
            let pmf = adapted_pmf(&config, &indices, &tables[0], &grids).unwrap();
            let oracle: f64 = counts
                .iter()
                .zip(pmf.probs())
                .map(|(&c, &p)| -(c as f64) * p.log2())
                .sum();
            assert!((bits - oracle).abs() < 1e-9);
            let n: u64 = counts.iter().sum();
            let base = n as f64 * 3f64.log2();
            let expected = base - oracle - 24.0 > 0.0;
            assert_eq!(d.selected, expected, "{counts:?}: {base} vs {oracle}");
            assert_eq!(record.signal_bits(), 1);
        }
        // at ten times the counts the saving clearly covers 24 bits
        let (hist, tables, freqs) = setup(uniform3(), &[10, 80, 10]);
        assert!(select_tables(&hist, &tables, &freqs, &config).unwrap().decisions[0].selected);
    }

    #[test]
    fn matched_histogram_selects_nothing() {
        let probs = vec![0.25, 0.5, 0.25];
        let (hist, tables, freqs) = setup(probs, &[25, 50, 25]);
        for method in [Method::Gmm, Method::ZeroMeanGaussian, Method::CenterBin] {
            let config = MethodConfig::new(method, 2, 1, 8).unwrap();
            let record = select_tables(&hist, &tables, &freqs, &config).unwrap();
            assert_eq!(record.selected_count(), 0);
            assert_eq!(record.signal_bits(), 1);
            assert_eq!(record.param_bits(), 0);
        }
    }

    #[test]
    fn small_saving_not_selected() {
        // Gap is a few bits; a 24-bit parameter set cannot pay for itself.
        let (hist, tables, freqs) = setup(uniform3(), &[3, 5, 3]);
        let config = MethodConfig::new(Method::Gmm, 1, 1, 8).unwrap();
        let record = select_tables(&hist, &tables, &freqs, &config).unwrap();
        assert!(hist_gap(&hist, &tables) < 24.0);
        assert!(!record.decisions[0].selected);
    }

    fn hist_gap(hist: &HistogramSet, tables: &[PmfTable]) -> f64 {
        learned_bits(hist.counts(0), &tables[0]) - empirical_bits(hist.counts(0))
    }

    #[test]
    fn too_many_targets() {
        let (hist, tables, freqs) = setup(uniform3(), &[1, 1, 1]);
        let config = MethodConfig::new(Method::Gmm, 1, 2, 8).unwrap();
        assert!(select_tables(&hist, &tables, &freqs, &config).is_err());
        assert_eq!(config.clamped(1).targets, 1);
    }

    #[test]
    fn ranking_ties_to_lower_index() {
        let t = PmfTable::from_probs(-1, uniform3()).unwrap();
        let tables = vec![t.clone(), t.clone(), t];
        let stream = SymbolStream::new(vec![0, 1, 0, 1, -1, 0], vec![0, 0, 1, 1, 2, 2]).unwrap();
        let hist = histogram(&stream, &tables).unwrap();
        assert_eq!(rank_targets(&hist, &tables, 2), vec![0, 1]);
        let stream = SymbolStream::new(vec![0, 1, 0, 1, -1, 0], vec![2, 2, 1, 1, 1, 0]).unwrap();
        let hist = histogram(&stream, &tables).unwrap();
        assert_eq!(rank_targets(&hist, &tables, 1), vec![1]);
    }

    #[test]
    fn center_bin_freqs_match_integer_path() {
        let probs = vec![0.25, 0.5, 0.25];
        let (hist, tables, freqs) = setup(probs, &[200, 600, 200]);
        let config = MethodConfig::new(Method::CenterBin, 1, 1, 8).unwrap();
        let record = select_tables(&hist, &tables, &freqs, &config).unwrap();
        let d = &record.decisions[0];
        assert!(d.selected);
        assert_eq!(d.indices, vec![0]);
        let grids = QuantGrids::default();
        let f = record.apply_freqs(&tables, &freqs, &grids).unwrap();
        let delta = center_delta(-0.03, 16);
        assert_eq!(f[0], rebuild_center_bin_freqs(&freqs[0], delta).unwrap());
        let pmfs = record.apply(&tables, &grids).unwrap();
        assert!(pmfs[0].probs().iter().all(|&p| p >= PMF_FLOOR));
    }
}
