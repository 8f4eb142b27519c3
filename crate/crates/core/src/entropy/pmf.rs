use crate::math;
use crate::{Error, Result};

/// Smallest probability any bin may carry (one unit at 16-bit precision).
pub const PMF_FLOOR: f64 = 1.0 / 65536.0;

/// Mass allowed outside a synthesized table's support.
const TAIL_MASS: f64 = 1.0 / 1048576.0;

/// Largest half-width of a synthesized table's support.
pub const MAX_HALF_WIDTH: u32 = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Factorized,
    Hyperprior,
}

impl ModelKind {
    pub fn id(self) -> u8 {
        match self {
            ModelKind::Factorized => 0,
            ModelKind::Hyperprior => 1,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(ModelKind::Factorized),
            1 => Some(ModelKind::Hyperprior),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Factorized => "factorized",
            ModelKind::Hyperprior => "hyperprior",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TableLabel {
    pub model: ModelKind,
    pub index: u32,
}

impl Default for TableLabel {
    fn default() -> Self {
        TableLabel {
            model: ModelKind::Factorized,
            index: 0,
        }
    }
}

/// A pmf over the contiguous integer support `[support_min, support_max]`.
///
/// Every bin holds at least [`PMF_FLOOR`] and the bins sum to one within
/// `1e-9`. The support always contains the zero symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfTable {
    support_min: i32,
    probs: Vec<f64>,
    label: TableLabel,
}

impl PmfTable {
    /// Normalizes non-negative weights, applies the floor and renormalizes.
    pub fn from_weights(support_min: i32, weights: &[f64]) -> Result<Self> {
        let support_max = check_support(support_min, weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidPmf("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::ZeroMass {
                min: support_min,
                max: support_max,
            });
        }
        let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Ok(PmfTable {
            support_min,
            probs: apply_floor(normalized),
            label: TableLabel::default(),
        })
    }

    /// Wraps probabilities that already satisfy the table invariants.
    pub fn from_probs(support_min: i32, probs: Vec<f64>) -> Result<Self> {
        check_support(support_min, probs.len())?;
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < PMF_FLOOR)
        {
            return Err(Error::InvalidPmf(format!(
                "bin {} has probability {p} below the floor",
                support_min as i64 + i as i64
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPmf(format!("probabilities sum to {sum}")));
        }
        Ok(PmfTable {
            support_min,
            probs,
            label: TableLabel::default(),
        })
    }

    pub fn with_label(mut self, label: TableLabel) -> Self {
        self.label = label;
        self
    }

    pub fn label(&self) -> TableLabel {
        self.label
    }

    pub fn support_min(&self) -> i32 {
        self.support_min
    }

    pub fn support_max(&self) -> i32 {
        self.support_min + self.probs.len() as i32 - 1
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn contains(&self, symbol: i32) -> bool {
        symbol >= self.support_min && symbol <= self.support_max()
    }

    /// Position of `symbol` in [`probs`](Self::probs).
    pub fn offset(&self, symbol: i32) -> Option<usize> {
        self.contains(symbol)
            .then(|| (symbol as i64 - self.support_min as i64) as usize)
    }

    pub fn prob(&self, symbol: i32) -> Option<f64> {
        self.offset(symbol).map(|i| self.probs[i])
    }

    /// Offset of the zero symbol.
    pub fn center(&self) -> usize {
        (-self.support_min) as usize
    }
}

fn check_support(support_min: i32, len: usize) -> Result<i32> {
    if len == 0 {
        return Err(Error::InvalidPmf("empty support".into()));
    }
    if len >= 65536 {
        return Err(Error::SupportTooLarge {
            bins: len,
            total: 65536,
        });
    }
    let support_max = support_min as i64 + len as i64 - 1;
    if support_min > 0 || support_max < 0 || support_max > i32::MAX as i64 {
        return Err(Error::InvalidPmf(format!(
            "support [{support_min}, {support_max}] must contain 0"
        )));
    }
    Ok(support_max as i32)
}

/// Raises bins below the floor to exactly the floor and rescales the rest so
/// the total stays one. Repeats until no rescaled bin drops below the floor.
fn apply_floor(mut probs: Vec<f64>) -> Vec<f64> {
    let n = probs.len();
    let mut fixed = vec![false; n];
    loop {
        let mut changed = false;
        for (p, f) in probs.iter_mut().zip(fixed.iter_mut()) {
            if !*f && *p < PMF_FLOOR {
                *p = PMF_FLOOR;
                *f = true;
                changed = true;
            }
        }
        if !changed {
            return probs;
        }
        let fixed_count = fixed.iter().filter(|f| **f).count();
        let free_mass: f64 = probs
            .iter()
            .zip(&fixed)
            .filter(|(_, f)| !**f)
            .map(|(p, _)| p)
            .sum();
        let target = 1.0 - fixed_count as f64 * PMF_FLOOR;
        if free_mass > 0.0 {
            let scale = target / free_mass;
            for (p, f) in probs.iter_mut().zip(&fixed) {
                if !*f {
                    *p *= scale;
                }
            }
        }
    }
}

/// Builds a pmf from a cdf evaluated at half-integers:
/// `p(x) ∝ cdf(x + 0.5) - cdf(x - 0.5)` on `[support_min, support_max]`.
pub fn pmf_from_cdf<F>(cdf: F, support_min: i32, support_max: i32) -> Result<PmfTable>
where
    F: Fn(f64) -> f64,
{
    if support_max < support_min {
        return Err(Error::InvalidPmf("empty support".into()));
    }
    let mut weights = Vec::with_capacity((support_max - support_min + 1) as usize);
    let mut lower = cdf(support_min as f64 - 0.5);
    for x in support_min..=support_max {
        let upper = cdf(x as f64 + 0.5);
        let w = upper - lower;
        if w < -1e-12 || !w.is_finite() {
            return Err(Error::InvalidPmf(format!("cdf decreases around {x}")));
        }
        weights.push(w.max(0.0));
        lower = upper;
    }
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::ZeroMass {
            min: support_min,
            max: support_max,
        });
    }
    PmfTable::from_weights(support_min, &weights)
}

/// Zero-mean bin-integrated Gaussian pmf on `[support_min, support_max]`.
///
/// Bins depend on `|x|` only, so symmetric supports give exactly mirrored
/// probabilities.
pub fn discretized_gaussian_pmf(sigma: f64, support_min: i32, support_max: i32) -> Result<PmfTable> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidDistribution(format!("sigma must be positive, got {sigma}")));
    }
    if support_max < support_min {
        return Err(Error::InvalidPmf("empty support".into()));
    }
    let weights: Vec<f64> = (support_min..=support_max)
        .map(|x| math::centered_bin_mass(x.unsigned_abs(), sigma))
        .collect();
    PmfTable::from_weights(support_min, &weights)
}

/// Half-width `m` of the symmetric support `[-m, m]` leaving less than
/// 2^-20 of a zero-mean Gaussian's mass outside, capped at 255.
pub fn default_support(sigma: f64) -> u32 {
    let scale = sigma * std::f64::consts::SQRT_2;
    (0..MAX_HALF_WIDTH)
        .find(|&m| libm::erfc((m as f64 + 0.5) / scale) < TAIL_MASS)
        .unwrap_or(MAX_HALF_WIDTH)
}

/// Symbols paired with the index of the table that codes each of them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolStream {
    symbols: Vec<i32>,
    assignment: Vec<u32>,
}

impl SymbolStream {
    pub fn new(symbols: Vec<i32>, assignment: Vec<u32>) -> Result<Self> {
        if symbols.len() != assignment.len() {
            return Err(Error::InvalidConfig(format!(
                "{} symbols but {} table assignments",
                symbols.len(),
                assignment.len()
            )));
        }
        Ok(SymbolStream {
            symbols,
            assignment,
        })
    }

    pub fn symbols(&self) -> &[i32] {
        &self.symbols
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// `(position, symbol, table)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i32, usize)> + '_ {
        self.symbols
            .iter()
            .zip(&self.assignment)
            .enumerate()
            .map(|(i, (&s, &t))| (i, s, t as usize))
    }

    /// Checks every symbol against the support of its assigned table.
    pub fn validate<T: HasSupport>(&self, tables: &[T]) -> Result<()> {
        for (position, symbol, table) in self.iter() {
            lookup_offset(tables, position, symbol, table)?;
        }
        Ok(())
    }
}

/// Anything with a contiguous integer support.
pub trait HasSupport {
    fn support(&self) -> (i32, i32);
}

impl HasSupport for PmfTable {
    fn support(&self) -> (i32, i32) {
        (self.support_min, self.support_max())
    }
}

pub(crate) fn lookup_offset<T: HasSupport>(
    tables: &[T],
    position: usize,
    symbol: i32,
    table: usize,
) -> Result<usize> {
    let t = tables.get(table).ok_or(Error::BadTableIndex {
        table,
        position,
        count: tables.len(),
    })?;
    let (min, max) = t.support();
    if symbol < min || symbol > max {
        return Err(Error::OutOfSupport {
            symbol,
            position,
            table,
            min,
            max,
        });
    }
    Ok((symbol as i64 - min as i64) as usize)
}

/// Shannon code length `Σ -log2 p_table(i)(symbol_i)` in bits.
pub fn ideal_bits(stream: &SymbolStream, tables: &[PmfTable]) -> Result<f64> {
    let mut bits = 0.0;
    for (position, symbol, table) in stream.iter() {
        let offset = lookup_offset(tables, position, symbol, table)?;
        bits -= tables[table].probs[offset].log2();
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference erf by its Maclaurin series; accurate to ~1e-15 for |x| < 3.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x * x / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    fn phi_series(x: f64) -> f64 {
        0.5 * (1.0 + erf_series(x / 2f64.sqrt()))
    }

    #[test]
    fn linear_cdf_gives_uniform() {
        let t = pmf_from_cdf(|x| x, -1, 1).unwrap();
        for p in t.probs() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_cdf_center_bin() {
        let t = pmf_from_cdf(phi_series, -4, 4).unwrap();
        let raw_center = phi_series(0.5) - phi_series(-0.5);
        assert!((raw_center - 0.3829).abs() < 1e-4);
        assert!((t.prob(0).unwrap() - raw_center).abs() < 1e-4);
    }

    #[test]
    fn constant_cdf_is_zero_mass() {
        assert!(matches!(
            pmf_from_cdf(|_| 0.25, -2, 2),
            Err(Error::ZeroMass { min: -2, max: 2 })
        ));
    }

    #[test]
    fn decreasing_cdf_is_rejected() {
        assert!(matches!(pmf_from_cdf(|x| -x, -1, 1), Err(Error::InvalidPmf(_))));
    }

    #[test]
    fn discretized_gaussian_matches_series_oracle() {
        let t = discretized_gaussian_pmf(1.0, -4, 4).unwrap();
        let oracle: Vec<f64> = (-4..=4)
            .map(|x| phi_series(x as f64 + 0.5) - phi_series(x as f64 - 0.5))
            .collect();
        let total: f64 = oracle.iter().sum();
        for (p, o) in t.probs().iter().zip(&oracle) {
            assert!((p - o / total).abs() < 1e-12);
        }
        assert!((t.prob(0).unwrap() - 0.3829).abs() < 1e-4);
    }

    #[test]
    fn wide_gaussian_is_flat() {
        let t = discretized_gaussian_pmf(1e4, -2, 2).unwrap();
        for p in t.probs() {
            assert!((p - 0.2).abs() < 1e-4);
        }
    }

    #[test]
    fn symmetric_support_is_mirrored() {
        for &sigma in &[0.11, 0.7, 3.3, 40.0] {
            let t = discretized_gaussian_pmf(sigma, -9, 9).unwrap();
            for x in 1..=9 {
                assert_eq!(t.prob(x), t.prob(-x));
            }
        }
    }

    #[test]
    fn floor_holds_and_sums_to_one() {
        let t = discretized_gaussian_pmf(0.11, -20, 20).unwrap();
        assert!(t.probs().iter().all(|&p| p >= PMF_FLOOR));
        assert!((t.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(t.prob(20).unwrap(), PMF_FLOOR);
    }

    #[test]
    fn support_must_contain_zero() {
        assert!(PmfTable::from_weights(1, &[1.0, 1.0]).is_err());
        assert!(PmfTable::from_weights(-3, &[1.0, 1.0]).is_err());
        assert!(PmfTable::from_weights(0, &[1.0]).is_ok());
    }

    #[test]
    fn from_probs_validates() {
        assert!(PmfTable::from_probs(-1, vec![0.25, 0.5, 0.25]).is_ok());
        assert!(PmfTable::from_probs(-1, vec![0.25, 0.5, 0.2]).is_err());
        assert!(PmfTable::from_probs(-1, vec![0.0, 0.75, 0.25]).is_err());
    }

    #[test]
    fn default_support_covers_tail() {
        let m = default_support(1.0);
        assert!(libm::erfc((m as f64 + 0.5) / 2f64.sqrt()) < TAIL_MASS);
        assert!(libm::erfc((m as f64 - 0.5) / 2f64.sqrt()) >= TAIL_MASS);
        assert_eq!(default_support(256.0), MAX_HALF_WIDTH);
    }

    #[test]
    fn ideal_bits_uniform_three() {
        let t = PmfTable::from_weights(-1, &[1.0, 1.0, 1.0]).unwrap();
        let stream = SymbolStream::new(vec![0; 10], vec![0; 10]).unwrap();
        let bits = ideal_bits(&stream, &[t]).unwrap();
        assert!((bits - 10.0 * 3f64.log2()).abs() < 1e-12);
        assert!((bits - 15.8496).abs() < 1e-4);
    }

    #[test]
    fn ideal_bits_certain_symbol_is_free() {
        let t = PmfTable::from_weights(0, &[1.0]).unwrap();
        let stream = SymbolStream::new(vec![0; 1000], vec![0; 1000]).unwrap();
        assert_eq!(ideal_bits(&stream, &[t]).unwrap(), 0.0);
    }

    #[test]
    fn ideal_bits_own_histogram() {
        let t = PmfTable::from_weights(-1, &[0.1, 0.8, 0.1]).unwrap();
        let mut symbols = vec![-1, 1];
        symbols.extend(std::iter::repeat(0).take(8));
        let stream = SymbolStream::new(symbols, vec![0; 10]).unwrap();
        let bits = ideal_bits(&stream, &[t]).unwrap();
        let oracle = -2.0 * 0.1f64.log2() - 8.0 * 0.8f64.log2();
        assert!((bits - oracle).abs() < 1e-12);
        assert!((bits - 9.2193).abs() < 1e-4);
    }

    #[test]
    fn ideal_bits_rejects_out_of_support() {
        let t = PmfTable::from_weights(-1, &[1.0, 1.0, 1.0]).unwrap();
        let stream = SymbolStream::new(vec![0, 2], vec![0, 0]).unwrap();
        assert!(matches!(
            ideal_bits(&stream, &[t]),
            Err(Error::OutOfSupport { symbol: 2, position: 1, .. })
        ));
    }
}
