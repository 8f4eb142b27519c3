//! `PMFT v1` sidecar files holding tabulated learned pmfs.
//!
//! Layout, little-endian:
//!
//! ```text
//! "PMFT" | version u16 = 1 | table count u32
//! per table: model u8 | index u32 | support_min i32 | support_max i32 | probs f64 * len
//! ```

use std::fs;
use std::path::Path;

use super::pmf::{ModelKind, PmfTable, TableLabel};
use crate::wire::Reader;
use crate::Result;

const MAGIC: &[u8; 4] = b"PMFT";
const VERSION: u16 = 1;
const FORMAT: &str = "PMFT";

pub fn tables_to_bytes(tables: &[PmfTable]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(tables.len() as u32).to_le_bytes());
    for t in tables {
        out.push(t.label().model.id());
        out.extend_from_slice(&t.label().index.to_le_bytes());
        out.extend_from_slice(&t.support_min().to_le_bytes());
        out.extend_from_slice(&t.support_max().to_le_bytes());
        for p in t.probs() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    out
}

pub fn tables_from_bytes(bytes: &[u8]) -> Result<Vec<PmfTable>> {
    let mut r = Reader::new(bytes, FORMAT);
    r.header(MAGIC, VERSION)?;
    let count = r.u32("header")? as usize;
    let mut tables = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let start = r.pos();
        let model_id = r.u8("table")?;
        let model = ModelKind::from_id(model_id)
            .ok_or_else(|| r.malformed("table", start, format!("unknown model id {model_id}")))?;
        let index = r.u32("table")?;
        let min = r.i32("table")?;
        let max = r.i32("table")?;
        if max < min {
            return Err(r.malformed("table", start, format!("support [{min}, {max}] is empty")));
        }
        let len = (max as i64 - min as i64 + 1) as usize;
        if len.saturating_mul(8) > r.remaining() {
            return Err(crate::Error::Truncated {
                format: FORMAT,
                chunk: "table",
                offset: r.pos(),
            });
        }
        let probs = (0..len)
            .map(|_| r.f64("table"))
            .collect::<Result<Vec<_>>>()?;
        let table = PmfTable::from_probs(min, probs)
            .map_err(|e| r.malformed("table", start, e.to_string()))?;
        tables.push(table.with_label(TableLabel { model, index }));
    }
    r.finish()?;
    Ok(tables)
}

pub fn save_tables(tables: &[PmfTable], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, tables_to_bytes(tables))?;
    Ok(())
}

pub fn load_tables(path: impl AsRef<Path>) -> Result<Vec<PmfTable>> {
    tables_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::discretized_gaussian_pmf;
    use crate::Error;

    fn sample() -> Vec<PmfTable> {
        (0..3)
            .map(|i| {
                discretized_gaussian_pmf(1.0 + i as f64, -4 - i, 4 + i)
                    .unwrap()
                    .with_label(TableLabel {
                        model: ModelKind::Factorized,
                        index: i as u32,
                    })
            })
            .collect()
    }

    #[test]
    fn round_trip() {
        let tables = sample();
        let bytes = tables_to_bytes(&tables);
        assert_eq!(tables_from_bytes(&bytes).unwrap(), tables);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let bytes = tables_to_bytes(&sample());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(tables_from_bytes(&bad), Err(Error::BadMagic { .. })));
        assert!(matches!(
            tables_from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated { chunk: "table", .. })
        ));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(tables_from_bytes(&extra), Err(Error::TrailingBytes { count: 1, .. })));
    }

    #[test]
    fn rejects_invalid_probabilities() {
        let mut bytes = tables_to_bytes(&sample()[..1]);
        // zero out the first probability of the first table
        let first = 4 + 2 + 4 + 1 + 4 + 4 + 4;
        bytes[first..first + 8].copy_from_slice(&0f64.to_le_bytes());
        assert!(matches!(tables_from_bytes(&bytes), Err(Error::Malformed { chunk: "table", .. })));
    }
}
