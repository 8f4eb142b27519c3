//! End-to-end encoding and decoding of one instance.
//!
//! Two layouts are supported. Factorized-only: the main latent is coded
//! with per-channel learned tables. Hyperprior: the side latent is coded
//! with per-channel learned tables and the main latent with the scale
//! table, each point using the table its side-information scale selects.
//! Side information reaches the decoder out of band.

use crate::adapt::{adapted_freqs, select_tables, AdaptationRecord, Method, MethodConfig, QuantGrids, DEFAULT_BITS};
use crate::container::{Container, ScaleDescriptor, Selection, SizeBreakdown, StreamSection};
use crate::entropy::{assign_scales, tables_to_bytes, ModelKind, PmfTable, SymbolStream};
use crate::gap::{build_report, histogram, GapReport, HistogramSet, ModelStats};
use crate::latent::{LatentRole, LatentTensor, Shape, SideInfo};
use crate::math::fnv1a64;
use crate::range_coder::{self, quantize_pmf, Bitstream, FreqTable, DEFAULT_PRECISION};
use crate::{Error, Result};

/// Hyperprior part of an instance.
#[derive(Debug, Clone, Copy)]
pub struct HyperpriorInput<'a> {
    pub side: &'a LatentTensor,
    pub side_info: &'a SideInfo,
    pub scales: ScaleDescriptor,
}

/// One instance: the main latent, the learned factorized tables and, for
/// the hyperprior layout, the side latent with its side information.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub main: &'a LatentTensor,
    /// Per-channel tables of the main latent (factorized-only) or of the
    /// side latent (hyperprior).
    pub tables: &'a [PmfTable],
    pub hyperprior: Option<HyperpriorInput<'a>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    pub factorized: MethodConfig,
    pub hyperprior: MethodConfig,
    pub precision: u32,
}

impl EncodeOptions {
    /// GMM with K=2 on 64 tables for factorized-only instances; GMM K=1 on
    /// 32 side tables and zero-mean Gaussian on 32 main tables otherwise.
    pub fn defaults(hyperprior: bool) -> Self {
        let config = |method, components, targets| MethodConfig {
            method,
            components,
            targets,
            bits: DEFAULT_BITS,
        };
        if hyperprior {
            EncodeOptions {
                factorized: config(Method::Gmm, 1, 32),
                hyperprior: config(Method::ZeroMeanGaussian, 1, 32),
                precision: DEFAULT_PRECISION,
            }
        } else {
            EncodeOptions {
                factorized: config(Method::Gmm, 2, 64),
                hyperprior: config(Method::ZeroMeanGaussian, 1, 32),
                precision: DEFAULT_PRECISION,
            }
        }
    }

    /// Learned tables only.
    pub fn baseline() -> Self {
        EncodeOptions {
            factorized: MethodConfig::none(),
            hyperprior: MethodConfig::none(),
            precision: DEFAULT_PRECISION,
        }
    }

    fn config(&self, model: ModelKind) -> &MethodConfig {
        match model {
            ModelKind::Factorized => &self.factorized,
            ModelKind::Hyperprior => &self.hyperprior,
        }
    }
}

struct Prepared {
    model: ModelKind,
    shape: Shape,
    tables: Vec<PmfTable>,
    stream: SymbolStream,
    fingerprint: u64,
}

fn tables_fingerprint(tables: &[PmfTable]) -> u64 {
    fnv1a64(&tables_to_bytes(tables))
}

fn check_channels(tensor: &LatentTensor, tables: &[PmfTable]) -> Result<()> {
    if tables.len() != tensor.shape().channels as usize {
        return Err(Error::Mismatch(format!(
            "{} learned tables for {} channels",
            tables.len(),
            tensor.shape().channels
        )));
    }
    Ok(())
}

fn factorized_stream(tensor: &LatentTensor, tables: &[PmfTable]) -> Result<Prepared> {
    check_channels(tensor, tables)?;
    Ok(Prepared {
        model: ModelKind::Factorized,
        shape: tensor.shape(),
        tables: tables.to_vec(),
        stream: SymbolStream::new(tensor.symbols().to_vec(), tensor.channel_assignment())?,
        fingerprint: tables_fingerprint(tables),
    })
}

fn hyperprior_stream(tensor: &LatentTensor, side_info: &SideInfo, scales: &ScaleDescriptor) -> Result<Prepared> {
    side_info.check_against(tensor)?;
    let table = scales.table()?;
    Ok(Prepared {
        model: ModelKind::Hyperprior,
        shape: tensor.shape(),
        tables: table.tables().to_vec(),
        stream: SymbolStream::new(tensor.symbols().to_vec(), assign_scales(side_info, &table))?,
        fingerprint: side_info.fingerprint(),
    })
}

fn prepare(instance: &Instance<'_>) -> Result<Vec<Prepared>> {
    match &instance.hyperprior {
        None => Ok(vec![factorized_stream(instance.main, instance.tables)?]),
        Some(h) => Ok(vec![
            factorized_stream(h.side, instance.tables)?,
            hyperprior_stream(instance.main, h.side_info, &h.scales)?,
        ]),
    }
}

/// Selection results and bit accounting of one entropy model.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamAnalysis {
    pub model: ModelKind,
    pub histograms: HistogramSet,
    pub record: AdaptationRecord,
    pub stats: ModelStats,
    /// Tables the stream is coded with.
    pub freqs: Vec<FreqTable>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub streams: Vec<StreamAnalysis>,
    pub report: GapReport,
}

impl Analysis {
    pub fn stream(&self, model: ModelKind) -> Option<&StreamAnalysis> {
        self.streams.iter().find(|s| s.model == model)
    }
}

fn analyze_prepared(prepared: &[Prepared], options: &EncodeOptions) -> Result<Analysis> {
    let grids_for = |config: &MethodConfig| QuantGrids::new(config.bits);
    let mut streams = Vec::with_capacity(prepared.len());
    for p in prepared {
        let hist = histogram(&p.stream, &p.tables)?;
        let learned_freqs = p
            .tables
            .iter()
            .map(|t| quantize_pmf(t, options.precision))
            .collect::<Result<Vec<_>>>()?;
        let config = options.config(p.model).clamped(p.tables.len());
        let record = select_tables(&hist, &p.tables, &learned_freqs, &config)?;
        let freqs = record.apply_freqs(&p.tables, &learned_freqs, &grids_for(&config)?)?;
        let stats = record.stats(&hist, &p.tables);
        streams.push(StreamAnalysis {
            model: p.model,
            histograms: hist,
            record,
            stats,
            freqs,
        });
    }
    let report = report_for(&streams)?;
    Ok(Analysis { streams, report })
}

fn report_for(streams: &[StreamAnalysis]) -> Result<GapReport> {
    let find = |m| streams.iter().find(|s| s.model == m).map(|s| &s.stats);
    build_report(find(ModelKind::Factorized), find(ModelKind::Hyperprior))
}

/// Gap and adaptation gain in ideal bits, without range coding.
pub fn analyze(instance: &Instance<'_>, options: &EncodeOptions) -> Result<Analysis> {
    analyze_prepared(&prepare(instance)?, options)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    pub bytes: Vec<u8>,
    pub breakdown: SizeBreakdown,
    /// Ideal-bit accounting with `coded_bits` filled in.
    pub analysis: Analysis,
}

fn selections(record: &AdaptationRecord) -> Vec<Selection> {
    record
        .decisions
        .iter()
        .map(|d| Selection {
            table: d.table,
            params: d.selected.then(|| d.indices.clone()),
        })
        .collect()
}

pub fn encode_instance(instance: &Instance<'_>, options: &EncodeOptions) -> Result<EncodedInstance> {
    if !(1..=31).contains(&options.precision) {
        return Err(Error::InvalidConfig(format!("precision {} not in 1..=31", options.precision)));
    }
    let prepared = prepare(instance)?;
    let mut analysis = analyze_prepared(&prepared, options)?;
    let mut sections = Vec::with_capacity(prepared.len());
    for (p, a) in prepared.iter().zip(analysis.streams.iter_mut()) {
        let bits = range_coder::encode(&p.stream, &a.freqs)?;
        a.stats.coded_bits = Some(bits.bit_len() as f64);
        sections.push(StreamSection {
            model: p.model,
            shape: p.shape,
            table_count: p.tables.len() as u32,
            config: a.record.config,
            fingerprint: p.fingerprint,
            selections: selections(&a.record),
            payload: bits.into_bytes(),
        });
    }
    analysis.report = report_for(&analysis.streams)?;
    let container = Container {
        precision: options.precision as u8,
        scales: instance.hyperprior.map(|h| h.scales),
        streams: sections,
    };
    let bytes = container.to_bytes()?;
    Ok(EncodedInstance {
        bytes,
        breakdown: container.breakdown(),
        analysis,
    })
}

/// Decoder-side frequency tables of one stream, rebuilt from the learned
/// tables and the quantized parameters alone.
pub fn rebuild_freqs(section: &StreamSection, learned: &[PmfTable], precision: u32) -> Result<Vec<FreqTable>> {
    if learned.len() != section.table_count as usize {
        return Err(Error::Mismatch(format!(
            "container expects {} tables, got {}",
            section.table_count,
            learned.len()
        )));
    }
    let grids = QuantGrids::new(section.config.bits)?;
    let mut freqs = learned
        .iter()
        .map(|t| quantize_pmf(t, precision))
        .collect::<Result<Vec<_>>>()?;
    for s in &section.selections {
        if let Some(params) = &s.params {
            let i = s.table as usize;
            freqs[i] = adapted_freqs(&section.config, params, &learned[i], &freqs[i], &grids)?;
        }
    }
    Ok(freqs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedInstance {
    pub main: LatentTensor,
    /// Side latent of the hyperprior layout.
    pub side: Option<LatentTensor>,
}

/// Decodes a container against the learned tables and, for hyperprior
/// containers, the side information.
pub fn decode_instance(bytes: &[u8], tables: &[PmfTable], side_info: Option<&SideInfo>) -> Result<DecodedInstance> {
    let container = Container::from_bytes(bytes)?;
    let precision = u32::from(container.precision);
    let hyper = container.scales.is_some();
    let mut main = None;
    let mut side = None;
    for section in &container.streams {
        let (learned, assignment) = match section.model {
            ModelKind::Factorized => {
                if section.fingerprint != tables_fingerprint(tables) {
                    return Err(Error::Mismatch("learned tables differ from the ones used to encode".into()));
                }
                let n = section.shape.len();
                let channels = section.shape.channels.max(1);
                let assignment = (0..n).map(|i| (i % channels as usize) as u32).collect();
                (tables.to_vec(), assignment)
            }
            ModelKind::Hyperprior => {
                let side_info = side_info.ok_or_else(|| Error::Mismatch("container needs side information".into()))?;
                if side_info.len() != section.shape.len() {
                    return Err(Error::SideInfoLength {
                        side: side_info.len(),
                        symbols: section.shape.len(),
                    });
                }
                if section.fingerprint != side_info.fingerprint() {
                    return Err(Error::Mismatch("side information differs from the one used to encode".into()));
                }
                let table = container.scales.expect("checked by the parser").table()?;
                let assignment = assign_scales(side_info, &table);
                (table.tables().to_vec(), assignment)
            }
        };
        if section.model == ModelKind::Factorized && learned.len() != section.shape.channels as usize {
            return Err(Error::Mismatch(format!(
                "{} learned tables for {} channels",
                learned.len(),
                section.shape.channels
            )));
        }
        let freqs = rebuild_freqs(section, &learned, precision)?;
        let bits = Bitstream::from_bytes(section.payload.clone());
        let symbols = range_coder::decode(&bits, &freqs, &assignment)?;
        match (section.model, hyper) {
            (ModelKind::Factorized, true) => {
                side = Some(LatentTensor::new(section.shape, symbols, LatentRole::Side)?);
            }
            _ => main = Some(LatentTensor::new(section.shape, symbols, LatentRole::Main)?),
        }
    }
    let main = main.ok_or_else(|| Error::Mismatch("container has no main stream".into()))?;
    Ok(DecodedInstance { main, side })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{synthesize, Distribution, SynthSpec};

    fn spec() -> SynthSpec {
        SynthSpec::new(3, Shape::new(16, 16, 8), Distribution::gaussian(1.0), Distribution::gaussian(2.0))
    }

    #[test]
    fn hyperprior_round_trip() {
        let out = synthesize(&spec()).unwrap();
        let instance = Instance {
            main: &out.main,
            tables: &out.tables,
            hyperprior: Some(HyperpriorInput {
                side: &out.side,
                side_info: &out.side_info,
                scales: ScaleDescriptor::default(),
            }),
        };
        for options in [EncodeOptions::baseline(), EncodeOptions::defaults(true)] {
            let enc = encode_instance(&instance, &options).unwrap();
            assert_eq!(enc.bytes.len() as u64, enc.breakdown.total_bytes);
            let dec = decode_instance(&enc.bytes, &out.tables, Some(&out.side_info)).unwrap();
            assert_eq!(dec.main, out.main);
            assert_eq!(dec.side.as_ref(), Some(&out.side));
        }
    }

    #[test]
    fn factorized_round_trip_and_gain() {
        let out = synthesize(&spec()).unwrap();
        // code the side latent as a standalone factorized instance
        let side = LatentTensor::new(out.side.shape(), out.side.symbols().to_vec(), LatentRole::Main).unwrap();
        let instance = Instance {
            main: &side,
            tables: &out.tables,
            hyperprior: None,
        };
        let base = encode_instance(&instance, &EncodeOptions::baseline()).unwrap();
        let adapted = encode_instance(&instance, &EncodeOptions::defaults(false)).unwrap();
        for enc in [&base, &adapted] {
            let dec = decode_instance(&enc.bytes, &out.tables, None).unwrap();
            assert_eq!(dec.main, side);
            assert!(dec.side.is_none());
        }
        let stats = adapted.analysis.stream(ModelKind::Factorized).unwrap().stats;
        assert!(stats.gain_bits() >= 0.0 || stats.param_bits == 0.0);
    }

    #[test]
    fn wrong_inputs_are_detected() {
        let out = synthesize(&spec()).unwrap();
        let instance = Instance {
            main: &out.main,
            tables: &out.tables,
            hyperprior: Some(HyperpriorInput {
                side: &out.side,
                side_info: &out.side_info,
                scales: ScaleDescriptor::default(),
            }),
        };
        let enc = encode_instance(&instance, &EncodeOptions::defaults(true)).unwrap();
        let mut other = spec();
        other.seed = 4;
        other.learned = vec![Distribution::gaussian(3.0)];
        other.side_learned = vec![Distribution::gaussian(3.0)];
        let wrong = synthesize(&other).unwrap();
        assert!(matches!(
            decode_instance(&enc.bytes, &wrong.tables, Some(&out.side_info)),
            Err(Error::Mismatch(_))
        ));
        assert!(matches!(
            decode_instance(&enc.bytes, &out.tables, Some(&wrong.side_info)),
            Err(Error::Mismatch(_))
        ));
        assert!(decode_instance(&enc.bytes, &out.tables, None).is_err());
    }

    #[test]
    fn table_count_mismatch() {
        let out = synthesize(&spec()).unwrap();
        let instance = Instance {
            main: &out.main,
            tables: &out.tables[..3],
            hyperprior: None,
        };
        assert!(matches!(
            encode_instance(&instance, &EncodeOptions::baseline()),
            Err(Error::Mismatch(_))
        ));
    }
}
