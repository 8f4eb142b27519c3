//! `EGAP v1` containers: header, selection flags, quantized parameters
//! and range-coded payloads. The byte layout is described in FORMAT.md at
//! the repository root.

use std::fmt;

use crate::adapt::{Method, MethodConfig};
use crate::entropy::{ModelKind, ScaleTable};
use crate::latent::Shape;
use crate::wire::Reader;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"EGAP";
pub const VERSION: u16 = 1;
const FORMAT: &str = "EGAP";

/// Parameters of a log-spaced scale table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleDescriptor {
    pub count: u16,
    pub min: f64,
    pub max: f64,
}

impl ScaleDescriptor {
    pub fn table(&self) -> Result<ScaleTable> {
        ScaleTable::log_spaced(usize::from(self.count), self.min, self.max)
    }
}

impl Default for ScaleDescriptor {
    fn default() -> Self {
        ScaleDescriptor {
            count: ScaleTable::DEFAULT_COUNT as u16,
            min: ScaleTable::DEFAULT_MIN,
            max: ScaleTable::DEFAULT_MAX,
        }
    }
}

/// Flag and parameters of one targeted table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub table: u32,
    /// Quantized parameters when the table is replaced.
    pub params: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSection {
    pub model: ModelKind,
    pub shape: Shape,
    pub table_count: u32,
    /// Method settings; `targets` equals `selections.len()`.
    pub config: MethodConfig,
    /// Hash of the learned tables or side information the stream was
    /// coded against.
    pub fingerprint: u64,
    /// Targeted tables in ascending order.
    pub selections: Vec<Selection>,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub precision: u8,
    /// Present iff a hyperprior stream is.
    pub scales: Option<ScaleDescriptor>,
    /// Factorized stream first, then hyperprior.
    pub streams: Vec<StreamSection>,
}

/// Exact size of every container section. The four bit counts plus
/// padding add up to `total_bytes * 8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SizeBreakdown {
    pub header_bits: u64,
    pub signal_bits: u64,
    pub param_bits: u64,
    /// Zero bits that byte-align the signaling section.
    pub padding_bits: u64,
    pub payload_bits: u64,
    pub total_bytes: u64,
}

impl fmt::Display for SizeBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "header      {:>10} bits", self.header_bits)?;
        writeln!(f, "signaling   {:>10} bits", self.signal_bits)?;
        writeln!(f, "parameters  {:>10} bits", self.param_bits)?;
        writeln!(f, "padding     {:>10} bits", self.padding_bits)?;
        writeln!(f, "payload     {:>10} bits", self.payload_bits)?;
        write!(f, "total       {:>10} bytes", self.total_bytes)
    }
}

/// LSB-first bit packer.
#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    fn put(&mut self, value: u32, width: u8) {
        for i in 0..width {
            if self.bits % 8 == 0 {
                self.bytes.push(0);
            }
            if (value >> i) & 1 == 1 {
                *self.bytes.last_mut().expect("byte pushed above") |= 1 << (self.bits % 8);
            }
            self.bits += 1;
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    bits: u64,
    base: usize,
}

impl BitReader<'_> {
    fn get(&mut self, width: u8) -> Result<u32> {
        let mut value = 0u32;
        for i in 0..width {
            let byte = (self.bits / 8) as usize;
            let Some(&b) = self.bytes.get(byte) else {
                return Err(Error::Truncated {
                    format: FORMAT,
                    chunk: "signaling",
                    offset: self.base + byte,
                });
            };
            value |= u32::from((b >> (self.bits % 8)) & 1) << i;
            self.bits += 1;
        }
        Ok(value)
    }
}

fn bitmap_len(table_count: u32) -> usize {
    table_count.div_ceil(8) as usize
}

impl StreamSection {
    fn check(&self) -> Result<()> {
        self.config.validate()?;
        let targets = self.selections.len();
        if self.config.method == Method::None && targets > 0 {
            return Err(Error::Mismatch("method none with targeted tables".into()));
        }
        if self.config.targets as usize != targets {
            return Err(Error::Mismatch(format!(
                "config targets {} tables, record has {targets}",
                self.config.targets
            )));
        }
        let mut last = None;
        for s in &self.selections {
            if s.table >= self.table_count || last.is_some_and(|l| l >= s.table) {
                return Err(Error::Mismatch(format!(
                    "target {} out of order or beyond {} tables",
                    s.table, self.table_count
                )));
            }
            last = Some(s.table);
            if let Some(p) = &s.params {
                let levels = 1u64 << self.config.bits;
                if p.len() != self.config.param_count() || p.iter().any(|&i| u64::from(i) >= levels) {
                    return Err(Error::Mismatch(format!("bad parameter set for table {}", s.table)));
                }
            }
        }
        Ok(())
    }

    fn signal_bits(&self) -> u64 {
        self.selections.len() as u64
    }

    fn param_bits(&self) -> u64 {
        self.selections.iter().filter(|s| s.params.is_some()).count() as u64 * self.config.param_bits()
    }
}

impl Container {
    fn check(&self) -> Result<()> {
        if !(1..=31).contains(&self.precision) {
            return Err(Error::InvalidConfig(format!("precision {} not in 1..=31", self.precision)));
        }
        let models: Vec<ModelKind> = self.streams.iter().map(|s| s.model).collect();
        let valid = matches!(
            models.as_slice(),
            [ModelKind::Factorized] | [ModelKind::Hyperprior] | [ModelKind::Factorized, ModelKind::Hyperprior]
        );
        if !valid {
            return Err(Error::Mismatch(format!("unsupported stream layout {models:?}")));
        }
        if models.contains(&ModelKind::Hyperprior) != self.scales.is_some() {
            return Err(Error::Mismatch("scale descriptor present iff a hyperprior stream is".into()));
        }
        self.streams.iter().try_for_each(StreamSection::check)
    }

    fn header_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let mask = self.streams.iter().fold(0u8, |m, s| m | 1 << s.model.id());
        out.push(mask);
        out.push(self.precision);
        if let Some(d) = &self.scales {
            out.extend_from_slice(&d.count.to_le_bytes());
            out.extend_from_slice(&d.min.to_le_bytes());
            out.extend_from_slice(&d.max.to_le_bytes());
        }
        for s in &self.streams {
            for v in [s.shape.height, s.shape.width, s.shape.channels, s.table_count] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&[s.config.method.id(), s.config.components, s.config.bits]);
            out.extend_from_slice(&(s.selections.len() as u32).to_le_bytes());
            out.extend_from_slice(&s.fingerprint.to_le_bytes());
            out.extend_from_slice(&(s.payload.len() as u64).to_le_bytes());
            if s.config.method != Method::None {
                let mut bitmap = vec![0u8; bitmap_len(s.table_count)];
                for sel in &s.selections {
                    bitmap[sel.table as usize / 8] |= 1 << (sel.table % 8);
                }
                out.extend_from_slice(&bitmap);
            }
        }
        out
    }

    fn signaling_bytes(&self) -> Vec<u8> {
        let mut w = BitWriter::default();
        for s in &self.streams {
            for sel in &s.selections {
                w.put(u32::from(sel.params.is_some()), 1);
            }
            for params in s.selections.iter().filter_map(|sel| sel.params.as_ref()) {
                for &p in params {
                    w.put(p, s.config.bits);
                }
            }
        }
        w.bytes
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.check()?;
        let mut out = self.header_bytes();
        out.extend_from_slice(&self.signaling_bytes());
        for s in &self.streams {
            out.extend_from_slice(&s.payload);
        }
        Ok(out)
    }

    pub fn breakdown(&self) -> SizeBreakdown {
        let header_bits = self.header_bytes().len() as u64 * 8;
        let signal_bits: u64 = self.streams.iter().map(StreamSection::signal_bits).sum();
        let param_bits: u64 = self.streams.iter().map(StreamSection::param_bits).sum();
        let padding_bits = (signal_bits + param_bits).next_multiple_of(8) - signal_bits - param_bits;
        let payload_bits: u64 = self.streams.iter().map(|s| s.payload.len() as u64 * 8).sum();
        let total = header_bits + signal_bits + param_bits + padding_bits + payload_bits;
        SizeBreakdown {
            header_bits,
            signal_bits,
            param_bits,
            padding_bits,
            payload_bits,
            total_bytes: total / 8,
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, FORMAT);
        r.header(MAGIC, VERSION)?;
        let at = r.pos();
        let mask = r.u8("header")?;
        let models: Vec<ModelKind> = match mask {
            1 => vec![ModelKind::Factorized],
            2 => vec![ModelKind::Hyperprior],
            3 => vec![ModelKind::Factorized, ModelKind::Hyperprior],
            _ => return Err(r.malformed("header", at, format!("unknown stream mask {mask:#04x}"))),
        };
        let at = r.pos();
        let precision = r.u8("header")?;
        if !(1..=31).contains(&precision) {
            return Err(r.malformed("header", at, format!("precision {precision}")));
        }
        let scales = if models.contains(&ModelKind::Hyperprior) {
            let at = r.pos();
            let d = ScaleDescriptor {
                count: r.u16("scales")?,
                min: r.f64("scales")?,
                max: r.f64("scales")?,
            };
            d.table().map_err(|e| r.malformed("scales", at, e.to_string()))?;
            Some(d)
        } else {
            None
        };

        struct Pending {
            model: ModelKind,
            shape: Shape,
            table_count: u32,
            config: MethodConfig,
            fingerprint: u64,
            payload_len: u64,
            targets: Vec<u32>,
        }
        let mut pending = Vec::with_capacity(models.len());
        for model in models {
            let shape = Shape::new(r.u32("stream")?, r.u32("stream")?, r.u32("stream")?);
            let table_count = r.u32("stream")?;
            let at = r.pos();
            let method_id = r.u8("stream")?;
            let method = Method::from_id(method_id)
                .ok_or_else(|| r.malformed("stream", at, format!("unknown method {method_id}")))?;
            let components = r.u8("stream")?;
            let bits = r.u8("stream")?;
            let targets = r.u32("stream")?;
            let config = MethodConfig {
                method,
                components,
                targets,
                bits,
            };
            config.validate().map_err(|e| r.malformed("stream", at, e.to_string()))?;
            let fingerprint = r.u64("stream")?;
            let payload_len = r.u64("stream")?;
            let mut list = Vec::new();
            if method != Method::None {
                let at = r.pos();
                let bitmap = r.take(bitmap_len(table_count), "targets")?;
                for (i, &b) in bitmap.iter().enumerate() {
                    for bit in 0..8 {
                        if b >> bit & 1 == 1 {
                            let table = (i * 8 + bit) as u32;
                            if table >= table_count {
                                return Err(r.malformed("targets", at + i, "target beyond table count"));
                            }
                            list.push(table);
                        }
                    }
                }
            }
            if list.len() != targets as usize {
                return Err(r.malformed(
                    "targets",
                    r.pos(),
                    format!("{} targets in bitmap, header says {targets}", list.len()),
                ));
            }
            pending.push(Pending {
                model,
                shape,
                table_count,
                config,
                fingerprint,
                payload_len,
                targets: list,
            });
        }

        let signal_at = r.pos();
        let mut bits = BitReader {
            bytes: &bytes[signal_at..],
            bits: 0,
            base: signal_at,
        };
        let mut selections = Vec::with_capacity(pending.len());
        for p in &pending {
            let mut flags = Vec::with_capacity(p.targets.len());
            for _ in &p.targets {
                flags.push(bits.get(1)? == 1);
            }
            let mut list = Vec::with_capacity(p.targets.len());
            for (&table, &flag) in p.targets.iter().zip(&flags) {
                let params = if flag {
                    let mut v = Vec::with_capacity(p.config.param_count());
                    for _ in 0..p.config.param_count() {
                        v.push(bits.get(p.config.bits)?);
                    }
                    Some(v)
                } else {
                    None
                };
                list.push(Selection { table, params });
            }
            selections.push(list);
        }
        let used = bits.bits.div_ceil(8) as usize;
        while bits.bits % 8 != 0 {
            if bits.get(1)? != 0 {
                return Err(r.malformed("signaling", signal_at + used - 1, "nonzero padding"));
            }
        }
        r.take(used, "signaling")?;

        let mut streams = Vec::with_capacity(pending.len());
        for (p, selections) in pending.into_iter().zip(selections) {
            let len = usize::try_from(p.payload_len).map_err(|_| r.malformed("payload", r.pos(), "length overflow"))?;
            let payload = r.take(len, "payload")?.to_vec();
            streams.push(StreamSection {
                model: p.model,
                shape: p.shape,
                table_count: p.table_count,
                config: p.config,
                fingerprint: p.fingerprint,
                selections,
                payload,
            });
        }
        r.finish()?;
        Ok(Container {
            precision,
            scales,
            streams,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section(method: Method, k: u8, selections: Vec<Selection>) -> StreamSection {
        StreamSection {
            model: ModelKind::Factorized,
            shape: Shape::new(2, 2, 4),
            table_count: 4,
            config: MethodConfig {
                method,
                components: k,
                targets: selections.len() as u32,
                bits: 8,
            },
            fingerprint: 0x0123_4567_89ab_cdef,
            selections,
            payload: vec![0xaa, 0xbb, 0xcc],
        }
    }

    fn sel(table: u32, params: Option<Vec<u32>>) -> Selection {
        Selection { table, params }
    }

    #[test]
    fn nothing_selected() {
        let c = Container {
            precision: 16,
            scales: None,
            streams: vec![section(Method::Gmm, 2, vec![sel(1, None), sel(3, None)])],
        };
        let b = c.breakdown();
        assert_eq!(b.signal_bits, 2);
        assert_eq!(b.param_bits, 0);
        assert_eq!(b.padding_bits, 6);
        let bytes = c.to_bytes().unwrap();
        assert_eq!(bytes.len() as u64, b.total_bytes);
        assert_eq!(b.header_bits / 8 + 1 + 3, b.total_bytes);
        assert_eq!(Container::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn one_gmm_table_carries_48_bits() {
        let c = Container {
            precision: 16,
            scales: None,
            streams: vec![section(Method::Gmm, 2, vec![sel(0, None), sel(2, Some(vec![1, 2, 3, 4, 5, 255]))])],
        };
        let b = c.breakdown();
        assert_eq!(b.param_bits, 48);
        assert_eq!(b.signal_bits, 2);
        let bytes = c.to_bytes().unwrap();
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(
            b.header_bits + b.signal_bits + b.param_bits + b.padding_bits + b.payload_bits,
            b.total_bytes * 8
        );
    }

    #[test]
    fn two_streams_round_trip() {
        let mut main = section(Method::ZeroMeanGaussian, 1, vec![sel(5, Some(vec![17])), sel(9, None)]);
        main.model = ModelKind::Hyperprior;
        main.table_count = 64;
        main.payload = vec![1; 10];
        let c = Container {
            precision: 16,
            scales: Some(ScaleDescriptor::default()),
            streams: vec![section(Method::None, 1, vec![]), main],
        };
        let bytes = c.to_bytes().unwrap();
        assert_eq!(Container::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn header_errors() {
        let c = Container {
            precision: 16,
            scales: None,
            streams: vec![section(Method::CenterBin, 1, vec![sel(0, Some(vec![7]))])],
        };
        let bytes = c.to_bytes().unwrap();
        let mut v = bytes.clone();
        v[4] = 2;
        assert!(matches!(
            Container::from_bytes(&v),
            Err(Error::UnsupportedVersion { version: 2, .. })
        ));
        v = bytes.clone();
        v[0] = b'X';
        assert!(matches!(Container::from_bytes(&v), Err(Error::BadMagic { .. })));
        for cut in 0..bytes.len() {
            assert!(Container::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        v = bytes.clone();
        v.push(0);
        assert!(matches!(Container::from_bytes(&v), Err(Error::TrailingBytes { .. })));
    }

    #[test]
    fn inconsistent_record_rejected() {
        let mut s = section(Method::Gmm, 2, vec![sel(0, Some(vec![1, 2, 3]))]);
        let c = Container {
            precision: 16,
            scales: None,
            streams: vec![s.clone()],
        };
        assert!(c.to_bytes().is_err());
        s.selections = vec![sel(4, None)];
        let c = Container {
            precision: 16,
            scales: None,
            streams: vec![s],
        };
        assert!(c.to_bytes().is_err());
    }

    #[test]
    fn bit_packing_is_lsb_first() {
        let mut w = BitWriter::default();
        w.put(1, 1);
        w.put(0b101, 3);
        w.put(0xff, 8);
        assert_eq!(w.bytes, vec![0b1111_1011, 0b0000_1111]);
        let mut r = BitReader {
            bytes: &w.bytes,
            bits: 0,
            base: 0,
        };
        assert_eq!(r.get(1).unwrap(), 1);
        assert_eq!(r.get(3).unwrap(), 0b101);
        assert_eq!(r.get(8).unwrap(), 0xff);
    }
}
