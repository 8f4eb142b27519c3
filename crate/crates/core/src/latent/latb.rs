//! `LATB v1` latent files.
//!
//! ```text
//! "LATB" | version u16 = 1 | role u8 (0 = main, 1 = side latent)
//! | height u32 | width u32 | channels u32 | h*w*c symbols i32
//! [ "SIDE" | count u64 | count means f32 | count scales f32 ]
//! ```
//!
//! All fields are little-endian. The SIDE chunk is optional.

use std::fs;
use std::path::Path;

use super::{LatentRole, LatentTensor, Shape, SideInfo};
use crate::wire::Reader;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"LATB";
const SIDE_TAG: &[u8; 4] = b"SIDE";
const VERSION: u16 = 1;
const FORMAT: &str = "LATB";

pub fn latents_to_bytes(tensor: &LatentTensor, side: Option<&SideInfo>) -> Result<Vec<u8>> {
    if let Some(side) = side {
        side.check_against(tensor)?;
    }
    let shape = tensor.shape();
    let mut out = Vec::with_capacity(19 + 4 * tensor.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(tensor.role().id());
    for d in [shape.height, shape.width, shape.channels] {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for s in tensor.symbols() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    if let Some(side) = side {
        out.extend_from_slice(SIDE_TAG);
        out.extend_from_slice(&(side.len() as u64).to_le_bytes());
        for v in side.means().iter().chain(side.scales()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn latents_from_bytes(bytes: &[u8]) -> Result<(LatentTensor, Option<SideInfo>)> {
    let mut r = Reader::new(bytes, FORMAT);
    r.header(MAGIC, VERSION)?;
    let role_at = r.pos();
    let role_id = r.u8("header")?;
    let role = LatentRole::from_id(role_id)
        .ok_or_else(|| r.malformed("header", role_at, format!("unknown role {role_id}")))?;
    let shape = Shape::new(r.u32("header")?, r.u32("header")?, r.u32("header")?);
    let count = shape.len();
    if count.saturating_mul(4) > r.remaining() {
        return Err(Error::Truncated {
            format: FORMAT,
            chunk: "symbols",
            offset: r.pos(),
        });
    }
    let symbols = (0..count)
        .map(|_| r.i32("symbols"))
        .collect::<Result<Vec<_>>>()?;
    let tensor = LatentTensor::new(shape, symbols, role)?;

    if r.remaining() == 0 {
        return Ok((tensor, None));
    }
    let tag_at = r.pos();
    if r.take(4, "SIDE")? != SIDE_TAG {
        return Err(r.malformed("SIDE", tag_at, "expected SIDE tag"));
    }
    let count_at = r.pos();
    let side_count = r.u64("SIDE")?;
    if side_count != count as u64 {
        return Err(Error::SideInfoLength {
            side: side_count as usize,
            symbols: count,
        });
    }
    if count.saturating_mul(8) > r.remaining() {
        return Err(Error::Truncated {
            format: FORMAT,
            chunk: "SIDE",
            offset: r.pos(),
        });
    }
    let means = (0..count).map(|_| r.f32("SIDE")).collect::<Result<Vec<_>>>()?;
    let scales_at = r.pos();
    let scales = (0..count).map(|_| r.f32("SIDE")).collect::<Result<Vec<_>>>()?;
    r.finish()?;
    let side = SideInfo::new(means, scales).map_err(|e| match e {
        Error::NonPositiveScale { index, value } => r.malformed(
            "SIDE",
            scales_at + 4 * index,
            format!("non-positive scale {value} at index {index}"),
        ),
        other => r.malformed("SIDE", count_at, other.to_string()),
    })?;
    Ok((tensor, Some(side)))
}

/// Writes `tensor` (and optionally its side info) as a `LATB v1` file.
pub fn save_latents(tensor: &LatentTensor, side: Option<&SideInfo>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = latents_to_bytes(tensor, side)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_latents(path: impl AsRef<Path>) -> Result<(LatentTensor, Option<SideInfo>)> {
    latents_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn minimal() -> Vec<u8> {
        let mut b = b"LATB".to_vec();
        b.extend_from_slice(&1u16.to_le_bytes());
        b.push(0);
        for _ in 0..3 {
            b.extend_from_slice(&1u32.to_le_bytes());
        }
        b.extend_from_slice(&0i32.to_le_bytes());
        b
    }

    #[test]
    fn minimal_file() {
        let (t, side) = latents_from_bytes(&minimal()).unwrap();
        assert_eq!(t.shape(), Shape::new(1, 1, 1));
        assert_eq!(t.symbols(), &[0]);
        assert!(side.is_none());
    }

    #[test]
    fn side_length_mismatch() {
        let mut b = b"LATB".to_vec();
        b.extend_from_slice(&1u16.to_le_bytes());
        b.push(0);
        for d in [1u32, 2, 2] {
            b.extend_from_slice(&d.to_le_bytes());
        }
        for s in 0..4i32 {
            b.extend_from_slice(&s.to_le_bytes());
        }
        b.extend_from_slice(b"SIDE");
        b.extend_from_slice(&5u64.to_le_bytes());
        for _ in 0..10 {
            b.extend_from_slice(&1f32.to_le_bytes());
        }
        let err = latents_from_bytes(&b).unwrap_err();
        assert!(matches!(err, Error::SideInfoLength { side: 5, symbols: 4 }));
        assert!(err.to_string().contains("side-info length mismatch"));
    }

    #[test]
    fn distinct_errors() {
        let good = minimal();
        let mut bad = good.clone();
        bad[1] = b'X';
        assert!(matches!(latents_from_bytes(&bad), Err(Error::BadMagic { .. })));
        let mut version = good.clone();
        version[4] = 2;
        assert!(matches!(latents_from_bytes(&version), Err(Error::UnsupportedVersion { version: 2, .. })));
        assert!(matches!(
            latents_from_bytes(&good[..good.len() - 1]),
            Err(Error::Truncated { chunk: "symbols", offset: 19, .. })
        ));
        assert!(matches!(latents_from_bytes(&[]), Err(Error::BadMagic { .. })));
        let mut junk = good.clone();
        junk.extend_from_slice(b"JUNKJUNK");
        assert!(matches!(latents_from_bytes(&junk), Err(Error::Malformed { chunk: "SIDE", offset: 23, .. })));
    }

    #[test]
    fn non_positive_scale_names_offset() {
        let t = LatentTensor::new(Shape::new(1, 1, 2), vec![1, 2], LatentRole::Main).unwrap();
        let side = SideInfo::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut b = latents_to_bytes(&t, Some(&side)).unwrap();
        let n = b.len();
        b[n - 4..].copy_from_slice(&(-1f32).to_le_bytes());
        match latents_from_bytes(&b) {
            Err(Error::Malformed { chunk: "SIDE", offset, .. }) => assert_eq!(offset, n - 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn save_rejects_mismatched_side() {
        let t = LatentTensor::new(Shape::new(1, 1, 2), vec![1, 2], LatentRole::Main).unwrap();
        let side = SideInfo::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.latb");
        assert!(save_latents(&t, Some(&side), &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn saves_are_byte_identical() {
        let t = LatentTensor::new(Shape::new(2, 1, 2), vec![1, -2, 3, 0], LatentRole::Side).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        save_latents(&t, None, &a).unwrap();
        save_latents(&t, None, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(load_latents(&a).unwrap(), (t, None));
    }

    proptest! {
        #[test]
        fn round_trip(h in 0u32..5, w in 0u32..5, c in 1u32..4, with_side: bool, seed in any::<u64>()) {
            let shape = Shape::new(h, w, c);
            let n = shape.len();
            let mut x = seed;
            let mut next = || { x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); x };
            let symbols: Vec<i32> = (0..n).map(|_| (next() >> 33) as i32 - (1 << 30)).collect();
            let role = if with_side { LatentRole::Main } else { LatentRole::Side };
            let tensor = LatentTensor::new(shape, symbols, role).unwrap();
            let side = with_side.then(|| {
                let means = (0..n).map(|_| (next() >> 40) as f32 / 1000.0 - 8000.0).collect();
                let scales = (0..n).map(|_| (next() >> 40) as f32 / 1000.0 + 1e-3).collect();
                SideInfo::new(means, scales).unwrap()
            });
            let bytes = latents_to_bytes(&tensor, side.as_ref()).unwrap();
            let (t2, s2) = latents_from_bytes(&bytes).unwrap();
            prop_assert_eq!(t2, tensor);
            prop_assert_eq!(s2, side);
        }
    }
}
