//! Histograms, amortization gaps and per-model gap reports.
//!
//! The gap of a model is the difference between the ideal code length of
//! its symbols under the learned tables and under each table's own
//! normalized histogram, which is the best any pmf on that support can do.

use std::fmt;

use crate::entropy::{lookup_offset, PmfTable, SymbolStream};
use crate::math::{code_length, empirical_bits};
use crate::{Error, Result};

/// Per-table symbol counts aligned to each table's support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramSet {
    supports: Vec<(i32, i32)>,
    counts: Vec<Vec<u64>>,
}

impl HistogramSet {
    pub fn counts(&self, table: usize) -> &[u64] {
        &self.counts[table]
    }

    pub fn support(&self, table: usize) -> (i32, i32) {
        self.supports[table]
    }

    pub fn total(&self, table: usize) -> u64 {
        self.counts[table].iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Count of the zero symbol in `table`.
    pub fn center_count(&self, table: usize) -> u64 {
        let (min, _) = self.supports[table];
        self.counts[table][(-min) as usize]
    }
}

pub fn histogram(stream: &SymbolStream, tables: &[PmfTable]) -> Result<HistogramSet> {
    let mut counts: Vec<Vec<u64>> = tables.iter().map(|t| vec![0; t.len()]).collect();
    for (position, symbol, table) in stream.iter() {
        let offset = lookup_offset(tables, position, symbol, table)?;
        counts[table][offset] += 1;
    }
    Ok(HistogramSet {
        supports: tables.iter().map(|t| (t.support_min(), t.support_max())).collect(),
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TableGap {
    pub learned_bits: f64,
    pub optimal_bits: f64,
    pub gap_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapBits {
    pub per_table: Vec<TableGap>,
    pub learned_bits: f64,
    pub optimal_bits: f64,
    pub gap_bits: f64,
}

/// Learned-table bits of one histogram.
pub fn learned_bits(counts: &[u64], table: &PmfTable) -> f64 {
    counts
        .iter()
        .zip(table.probs())
        .map(|(&c, &p)| code_length(c, p))
        .sum()
}

/// Gap per table and in total. Sums run in table order.
pub fn gap_bits(stream: &SymbolStream, tables: &[PmfTable]) -> Result<GapBits> {
    let hist = histogram(stream, tables)?;
    Ok(gap_from_histograms(&hist, tables))
}

pub fn gap_from_histograms(hist: &HistogramSet, tables: &[PmfTable]) -> GapBits {
    let per_table: Vec<TableGap> = tables
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let learned = learned_bits(hist.counts(i), t);
            let optimal = empirical_bits(hist.counts(i));
            TableGap {
                learned_bits: learned,
                optimal_bits: optimal,
                // Gibbs' inequality; clamp away rounding noise.
                gap_bits: (learned - optimal).max(0.0),
            }
        })
        .collect();
    let learned_bits = per_table.iter().map(|g| g.learned_bits).sum();
    let optimal_bits = per_table.iter().map(|g| g.optimal_bits).sum();
    let gap_bits = per_table.iter().map(|g| g.gap_bits).sum();
    GapBits {
        per_table,
        learned_bits,
        optimal_bits,
        gap_bits,
    }
}

/// Bit accounting of one entropy model over one instance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelStats {
    /// Ideal bits under the learned tables.
    pub learned_bits: f64,
    /// Ideal bits under the per-table normalized histograms.
    pub optimal_bits: f64,
    /// Ideal bits under the tables actually used after adaptation.
    pub adapted_bits: f64,
    /// Quantized re-parameterization payload.
    pub param_bits: f64,
    /// One selection flag per targeted table.
    pub signal_bits: f64,
    /// Range coder output, when the instance was actually coded.
    pub coded_bits: Option<f64>,
}

impl ModelStats {
    pub fn gap_bits(&self) -> f64 {
        self.learned_bits - self.optimal_bits
    }

    /// Net saving after parameters and signaling.
    pub fn gain_bits(&self) -> f64 {
        self.learned_bits - self.adapted_bits - self.param_bits - self.signal_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelRow {
    pub ratio_percent: f64,
    pub gap_percent: f64,
    pub gain_percent: f64,
    pub stats: ModelStats,
}

/// Per-model Ratio/Gap/Gain with ratio-weighted totals.
///
/// Gains net out parameter and signaling bits of every targeted table,
/// selected or not.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub factorized: Option<ModelRow>,
    pub hyperprior: Option<ModelRow>,
    pub total_gap_percent: f64,
    pub total_gain_percent: f64,
    pub total_bits: f64,
}

/// Builds the report. `side` is the factorized model, `main` the
/// hyperprior model.
pub fn build_report(side: Option<&ModelStats>, main: Option<&ModelStats>) -> Result<GapReport> {
    let total_bits: f64 = side.iter().chain(main.iter()).map(|s| s.learned_bits).sum();
    if !(total_bits > 0.0) {
        return Err(Error::ZeroBits);
    }
    let row = |s: &ModelStats| {
        let own = if s.learned_bits > 0.0 { s.learned_bits } else { f64::NAN };
        ModelRow {
            ratio_percent: s.learned_bits / total_bits * 100.0,
            gap_percent: s.gap_bits() / own * 100.0,
            gain_percent: s.gain_bits() / own * 100.0,
            stats: *s,
        }
    };
    let gap: f64 = side.iter().chain(main.iter()).map(|s| s.gap_bits()).sum();
    let gain: f64 = side.iter().chain(main.iter()).map(|s| s.gain_bits()).sum();
    Ok(GapReport {
        factorized: side.map(row),
        hyperprior: main.map(row),
        total_gap_percent: gap / total_bits * 100.0,
        total_gain_percent: gain / total_bits * 100.0,
        total_bits,
    })
}

impl GapReport {
    pub const CSV_HEADER: &'static str = "factorized_ratio,factorized_gap,factorized_gain,\
hyperprior_ratio,hyperprior_gap,hyperprior_gain,total_gap,total_gain,\
factorized_learned_bits,factorized_optimal_bits,factorized_adapted_bits,factorized_param_bits,factorized_signal_bits,\
hyperprior_learned_bits,hyperprior_optimal_bits,hyperprior_adapted_bits,hyperprior_param_bits,hyperprior_signal_bits";

    /// One CSV row matching [`CSV_HEADER`](Self::CSV_HEADER). Missing
    /// models leave their cells empty.
    pub fn csv_row(&self) -> String {
        let pct = |row: &Option<ModelRow>| match row {
            Some(r) => format!(
                "{:.2},{:.2},{:.2}",
                r.ratio_percent, r.gap_percent, r.gain_percent
            ),
            None => ",,".to_string(),
        };
        let bits = |row: &Option<ModelRow>| match row {
            Some(r) => format!(
                "{:.4},{:.4},{:.4},{},{}",
                r.stats.learned_bits,
                r.stats.optimal_bits,
                r.stats.adapted_bits,
                r.stats.param_bits,
                r.stats.signal_bits
            ),
            None => ",,,,".to_string(),
        };
        format!(
            "{},{},{:.2},{:.2},{},{}",
            pct(&self.factorized),
            pct(&self.hyperprior),
            self.total_gap_percent,
            self.total_gain_percent,
            bits(&self.factorized),
            bits(&self.hyperprior)
        )
    }
}

impl fmt::Display for GapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells = |row: &Option<ModelRow>| match row {
            Some(r) => format!(
                "{:>7.2} {:>7.2} {:>7.2}",
                r.ratio_percent, r.gap_percent, r.gain_percent
            ),
            None => format!("{:>7} {:>7} {:>7}", "-", "-", "-"),
        };
        writeln!(f, "{:<23} {:<23} {:<15}", "Factorized", "Hyperprior", "Total")?;
        writeln!(
            f,
            "{:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            "Ratio", "Gap", "Gain", "Ratio", "Gap", "Gain", "Gap", "Gain"
        )?;
        writeln!(
            f,
            "{} {} {:>7.2} {:>7.2}",
            cells(&self.factorized),
            cells(&self.hyperprior),
            self.total_gap_percent,
            self.total_gain_percent
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform3() -> PmfTable {
        PmfTable::from_weights(-1, &[1.0, 1.0, 1.0]).unwrap()
    }

    fn stream_from_counts(counts: &[(i32, usize)]) -> SymbolStream {
        let symbols: Vec<i32> = counts
            .iter()
            .flat_map(|&(s, n)| std::iter::repeat(s).take(n))
            .collect();
        let n = symbols.len();
        SymbolStream::new(symbols, vec![0; n]).unwrap()
    }

    #[test]
    fn histogram_counts() {
        let s = SymbolStream::new(vec![0, 0, 1], vec![0; 3]).unwrap();
        let h = histogram(&s, &[uniform3()]).unwrap();
        assert_eq!(h.counts(0), &[0, 2, 1]);
        let empty = histogram(&SymbolStream::default(), &[uniform3()]).unwrap();
        assert_eq!(empty.counts(0), &[0, 0, 0]);
        let bad = SymbolStream::new(vec![3], vec![0]).unwrap();
        assert!(histogram(&bad, &[uniform3()]).is_err());
    }

    #[test]
    fn worked_fixture() {
        let s = stream_from_counts(&[(-1, 1), (0, 8), (1, 1)]);
        let g = gap_bits(&s, &[uniform3()]).unwrap();
        assert!((g.learned_bits - 15.8496).abs() < 1e-4);
        assert!((g.optimal_bits - 9.2193).abs() < 1e-4);
        assert!((g.gap_bits - 6.6304).abs() < 1e-4);
    }

    #[test]
    fn matched_prior_has_no_gap() {
        let t = PmfTable::from_weights(-1, &[0.1, 0.8, 0.1]).unwrap();
        let s = stream_from_counts(&[(-1, 1), (0, 8), (1, 1)]);
        assert!(gap_bits(&s, &[t]).unwrap().gap_bits < 1e-12);
    }

    #[test]
    fn ratio_weighted_totals() {
        // Raw bits chosen so that ratio and gap equal the given percentages.
        let mk = |bits: f64, gap_pct: f64| ModelStats {
            learned_bits: bits,
            optimal_bits: bits * (1.0 - gap_pct / 100.0),
            adapted_bits: bits,
            ..Default::default()
        };
        let r = build_report(Some(&mk(5.9, 11.4)), Some(&mk(94.1, 3.4))).unwrap();
        assert!((r.total_gap_percent - 3.872).abs() < 1e-9);
        let r = build_report(Some(&mk(3.5, 10.0)), Some(&mk(96.5, 4.5))).unwrap();
        assert!((r.total_gap_percent - 4.6925).abs() < 1e-9);
        assert!((r.total_gap_percent - 4.7).abs() < 0.05);
        let single = build_report(None, Some(&mk(42.0, 7.5))).unwrap();
        assert!((single.total_gap_percent - 7.5).abs() < 1e-12);
        assert!((single.hyperprior.unwrap().ratio_percent - 100.0).abs() < 1e-12);
    }

    #[test]
    fn zero_bits_is_an_error() {
        assert!(matches!(build_report(None, None), Err(Error::ZeroBits)));
        assert!(matches!(
            build_report(Some(&ModelStats::default()), None),
            Err(Error::ZeroBits)
        ));
    }

    #[test]
    fn csv_has_matching_columns() {
        let s = ModelStats {
            learned_bits: 100.0,
            optimal_bits: 90.0,
            adapted_bits: 95.0,
            param_bits: 8.0,
            signal_bits: 1.0,
            coded_bits: None,
        };
        let r = build_report(None, Some(&s)).unwrap();
        let row = r.csv_row();
        assert_eq!(
            row.split(',').count(),
            GapReport::CSV_HEADER.split(',').count()
        );
        assert!(row.starts_with(",,,100.00,10.00,-4.00,10.00,-4.00"));
        assert!(r.to_string().contains("Ratio"));
    }

    proptest! {
        #[test]
        fn gap_nonnegative_and_entropy_identity(
            counts in prop::collection::vec(0usize..50, 1..12),
            weights in prop::collection::vec(0.01f64..1.0, 12),
        ) {
            let len = counts.len();
            let t = PmfTable::from_weights(0, &weights[..len]).unwrap();
            let pairs: Vec<(i32, usize)> = counts.iter().enumerate().map(|(i, &c)| (i as i32, c)).collect();
            let s = stream_from_counts(&pairs);
            let g = gap_bits(&s, &[t]).unwrap();
            prop_assert!(g.learned_bits - g.optimal_bits >= -1e-9);
            // independent entropy routine: n * H(p_hat) in nats converted to bits
            let n: usize = counts.iter().sum();
            let h_nats: f64 = counts.iter().filter(|&&c| c > 0)
                .map(|&c| { let p = c as f64 / n as f64; -p * p.ln() }).sum();
            prop_assert!((g.optimal_bits - n as f64 * h_nats / std::f64::consts::LN_2).abs() < 1e-9);
        }
    }
}
