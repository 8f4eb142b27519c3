//! Integer frequency tables and a byte-oriented range coder.
//!
//! The coder keeps a 64-bit range with a 64-bit low window plus one carry
//! bit. Before each symbol the range is at least 2^56, so splitting it into
//! `2^precision` units loses at most `2^-40` of the interval per symbol.
//! Bytes leave the low window through a one-byte cache with a run counter
//! for pending `0xFF` bytes that a later carry may still turn into `0x00`.
//!
//! Termination picks the multiple of 2^56 inside the final interval and
//! writes only its top byte. The decoder pads the stream with zero bytes
//! and may read at most [`LOOKAHEAD`] of them; needing more means the
//! stream was truncated.

use crate::entropy::{lookup_offset, PmfTable, SymbolStream};
use crate::{Error, Result};

pub const DEFAULT_PRECISION: u32 = 16;

/// Zero bytes the decoder may read past the end of a well-formed stream.
pub const LOOKAHEAD: usize = 7;

const TOP: u64 = 1 << 56;

/// A pmf quantized to positive integer frequencies summing to `2^precision`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FreqTable {
    support_min: i32,
    freqs: Vec<u32>,
    cumulative: Vec<u32>,
    precision: u32,
}

impl FreqTable {
    pub fn from_freqs(support_min: i32, freqs: Vec<u32>, precision: u32) -> Result<Self> {
        if !(1..=31).contains(&precision) {
            return Err(Error::InvalidConfig(format!("precision {precision} not in 1..=31")));
        }
        if freqs.is_empty() {
            return Err(Error::InvalidPmf("empty frequency table".into()));
        }
        if freqs.iter().any(|&f| f == 0) {
            return Err(Error::InvalidPmf("zero frequency".into()));
        }
        let total: u64 = freqs.iter().map(|&f| u64::from(f)).sum();
        if total != 1u64 << precision {
            return Err(Error::InvalidPmf(format!(
                "frequencies sum to {total}, expected {}",
                1u64 << precision
            )));
        }
        let mut cumulative = Vec::with_capacity(freqs.len() + 1);
        let mut acc = 0u32;
        cumulative.push(0);
        for &f in &freqs {
            acc += f;
            cumulative.push(acc);
        }
        Ok(FreqTable {
            support_min,
            freqs,
            cumulative,
            precision,
        })
    }

    pub fn support_min(&self) -> i32 {
        self.support_min
    }

    pub fn support_max(&self) -> i32 {
        self.support_min + self.freqs.len() as i32 - 1
    }

    pub fn freqs(&self) -> &[u32] {
        &self.freqs
    }

    pub fn cumulative(&self) -> &[u32] {
        &self.cumulative
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn total(&self) -> u32 {
        1 << self.precision
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Offset of the zero symbol.
    pub fn center(&self) -> usize {
        (-self.support_min) as usize
    }

    /// Probability implied by the frequency of `symbol`.
    pub fn prob(&self, symbol: i32) -> Option<f64> {
        let (min, max) = (self.support_min, self.support_max());
        (symbol >= min && symbol <= max).then(|| {
            f64::from(self.freqs[(symbol - min) as usize]) / f64::from(self.total())
        })
    }

    /// Little-endian dump of the cumulative array, for equality checks
    /// between independently built tables.
    pub fn cumulative_bytes(&self) -> Vec<u8> {
        self.cumulative.iter().flat_map(|c| c.to_le_bytes()).collect()
    }
}

impl crate::entropy::HasSupport for FreqTable {
    fn support(&self) -> (i32, i32) {
        (self.support_min, self.support_max())
    }
}

/// Quantizes a pmf to integer frequencies summing to `2^precision`.
///
/// Each bin gets `floor(p * total)` raised to at least one. A positive
/// remainder goes one unit at a time to the bins with the largest
/// fractional parts; a negative one is taken from bins above one with the
/// smallest fractional parts. Ties go to the lower symbol.
pub fn quantize_pmf(pmf: &PmfTable, precision: u32) -> Result<FreqTable> {
    if !(1..=31).contains(&precision) {
        return Err(Error::InvalidConfig(format!("precision {precision} not in 1..=31")));
    }
    let total = 1u64 << precision;
    let n = pmf.len();
    if n as u64 > total {
        return Err(Error::SupportTooLarge { bins: n, total });
    }
    let scaled: Vec<f64> = pmf.probs().iter().map(|p| p * total as f64).collect();
    let mut freqs: Vec<u64> = scaled.iter().map(|s| (s.floor() as u64).max(1)).collect();
    let frac: Vec<f64> = scaled.iter().map(|s| s - s.floor()).collect();
    let assigned: u64 = freqs.iter().sum();

    let mut order: Vec<usize> = (0..n).collect();
    if assigned < total {
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]).then(a.cmp(&b)));
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
        order.sort_by(|&a, &b| frac[a].total_cmp(&frac[b]).then(a.cmp(&b)));
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
        pmf.support_min(),
        freqs.into_iter().map(|f| f as u32).collect(),
        precision,
    )
}

/// Coded bytes. `bit_len` counts whole bytes; the coder is byte-oriented.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bitstream {
    bytes: Vec<u8>,
    bit_len: u64,
}

impl Bitstream {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let bit_len = 8 * bytes.len() as u64;
        Bitstream { bytes, bit_len }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Streaming range encoder.
#[derive(Debug)]
pub struct RangeEncoder {
    low: u128,
    range: u64,
    cache: u8,
    pending: u64,
    started: bool,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u64::MAX,
            cache: 0,
            pending: 0,
            started: false,
            out: Vec::new(),
        }
    }

    /// Codes the interval `[cum, cum + freq)` out of `2^precision`.
    pub fn encode(&mut self, cum: u32, freq: u32, precision: u32) {
        let r = self.range >> precision;
        self.low += u128::from(r) * u128::from(cum);
        self.range = r * u64::from(freq);
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    pub fn encode_symbol(&mut self, table: &FreqTable, symbol: i32) -> Result<()> {
        let i = table
            .offset_of(symbol)
            .ok_or_else(|| Error::InvalidConfig(format!("symbol {symbol} outside table")))?;
        self.encode(table.cumulative[i], table.freqs[i], table.precision);
        Ok(())
    }

    fn shift_low(&mut self) {
        let carry = (self.low >> 64) as u8;
        let window = self.low as u64;
        if window < 0xFF00_0000_0000_0000 || carry != 0 {
            // The first cached byte is always zero and never takes a carry.
            if self.started {
                self.out.push(self.cache.wrapping_add(carry));
            }
            self.started = true;
            let fill = 0xFFu8.wrapping_add(carry);
            self.out.extend(std::iter::repeat(fill).take(self.pending as usize));
            self.pending = 0;
            self.cache = (window >> 56) as u8;
        } else {
            self.pending += 1;
        }
        self.low = u128::from(window << 8);
    }

    pub fn finish(mut self) -> Bitstream {
        // Smallest multiple of 2^56 not below low; it lies inside the
        // interval because range >= 2^56.
        let step = u128::from(TOP);
        self.low = self.low.div_ceil(step) * step;
        self.shift_low();
        self.shift_low();
        Bitstream::from_bytes(self.out)
    }
}

/// Streaming range decoder over a byte slice.
#[derive(Debug)]
pub struct RangeDecoder<'a> {
    bytes: &'a [u8],
    pos: usize,
    code: u64,
    range: u64,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Result<Self> {
        let mut d = RangeDecoder {
            bytes,
            pos: 0,
            code: 0,
            range: u64::MAX,
        };
        for _ in 0..8 {
            d.code = (d.code << 8) | u64::from(d.next_byte()?);
        }
        Ok(d)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = match self.bytes.get(self.pos) {
            Some(&b) => b,
            None if self.pos < self.bytes.len() + LOOKAHEAD => 0,
            None => return Err(Error::Corrupt("bitstream exhausted".into())),
        };
        self.pos += 1;
        Ok(b)
    }

    pub fn decode_symbol(&mut self, table: &FreqTable) -> Result<i32> {
        let r = self.range >> table.precision;
        let target = self.code / r;
        if target >= u64::from(table.total()) {
            return Err(Error::Corrupt("code value outside the frequency total".into()));
        }
        let target = target as u32;
        let i = table.cumulative.partition_point(|&c| c <= target) - 1;
        self.code -= r * u64::from(table.cumulative[i]);
        self.range = r * u64::from(table.freqs[i]);
        while self.range < TOP {
            self.code = (self.code << 8) | u64::from(self.next_byte()?);
            self.range <<= 8;
        }
        Ok(table.support_min + i as i32)
    }

    /// Bytes consumed so far, including zero padding.
    pub fn position(&self) -> usize {
        self.pos
    }
}

impl FreqTable {
    fn offset_of(&self, symbol: i32) -> Option<usize> {
        (symbol >= self.support_min && symbol <= self.support_max())
            .then(|| (symbol as i64 - self.support_min as i64) as usize)
    }
}

/// Encodes `stream`, symbol `i` with `tables[assignment[i]]`.
pub fn encode(stream: &SymbolStream, tables: &[FreqTable]) -> Result<Bitstream> {
    stream.validate(tables)?;
    let mut enc = RangeEncoder::new();
    for (_, symbol, table) in stream.iter() {
        enc.encode_symbol(&tables[table], symbol)?;
    }
    Ok(enc.finish())
}

/// Decodes `assignment.len()` symbols.
pub fn decode(bits: &Bitstream, tables: &[FreqTable], assignment: &[u32]) -> Result<Vec<i32>> {
    let mut dec = RangeDecoder::new(bits.bytes())?;
    assignment
        .iter()
        .enumerate()
        .map(|(position, &t)| {
            let table = tables.get(t as usize).ok_or(Error::BadTableIndex {
                table: t as usize,
                position,
                count: tables.len(),
            })?;
            dec.decode_symbol(table)
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|symbols| {
            // A well-formed stream is consumed exactly up to the lookahead.
            if dec.position() != bits.bytes().len() + LOOKAHEAD {
                return Err(Error::Corrupt(format!(
                    "stream length {} does not match the decoded symbols",
                    bits.bytes().len()
                )));
            }
            Ok(symbols)
        })
}

/// Ideal bits of `stream` under the pmfs implied by `tables`.
pub fn implied_bits(stream: &SymbolStream, tables: &[FreqTable]) -> Result<f64> {
    let mut bits = 0.0;
    for (position, symbol, table) in stream.iter() {
        let offset = lookup_offset(tables, position, symbol, table)?;
        let t = &tables[table];
        bits += f64::from(t.precision) - f64::from(t.freqs[offset]).log2();
    }
    Ok(bits)
}
