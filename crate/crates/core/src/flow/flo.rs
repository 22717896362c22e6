use std::path::Path;

use super::{FlowError, FlowField, Result};

/// Float whose little-endian bytes spell `PIEH`.
pub const FLO_TAG: f32 = 202021.25;

/// Value written for pixels outside the valid mask.
pub const UNKNOWN_FLOW: f32 = 1e10;

/// Serialize to the Middlebury layout: tag, i32 width, i32 height, then
/// row-major interleaved `(u, v)` as little-endian f32.
pub fn encode_flo(field: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + field.len() * 8);
    out.extend_from_slice(&FLO_TAG.to_le_bytes());
    out.extend_from_slice(&(field.width as i32).to_le_bytes());
    out.extend_from_slice(&(field.height as i32).to_le_bytes());
    for i in 0..field.len() {
        let (u, v) = (field.u[i], field.v[i]);
        // decoded sentinels other than UNKNOWN_FLOW are kept as read
        let (u, v) = if field.valid[i] || !(u.abs() <= 1e9 && v.abs() <= 1e9) {
            (u, v)
        } else {
            (UNKNOWN_FLOW, UNKNOWN_FLOW)
        };
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parse a `.flo` buffer. Components above 1e9 in magnitude (or NaN) mark
/// the pixel invalid.
pub fn decode_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 4 {
        return Err(FlowError::TruncatedFile);
    }
    if bytes[..4] != FLO_TAG.to_le_bytes() {
        return Err(FlowError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(FlowError::TruncatedFile);
    }
    let read_i32 = |at: usize| i32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let (w, h) = (read_i32(4), read_i32(8));
    if w < 0 || h < 0 {
        return Err(FlowError::InvalidParameter(format!("negative dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let n = w.checked_mul(h).ok_or(FlowError::TruncatedFile)?;
    let needed = n
        .checked_mul(8)
        .and_then(|b| b.checked_add(12))
        .ok_or(FlowError::TruncatedFile)?;
    if bytes.len() < needed {
        return Err(FlowError::TruncatedFile);
    }
    let mut field = FlowField {
        width: w,
        height: h,
        u: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
    };
    for chunk in bytes[12..needed].chunks_exact(8) {
        let u = f32::from_le_bytes(chunk[..4].try_into().unwrap());
        let v = f32::from_le_bytes(chunk[4..].try_into().unwrap());
        let unknown = !(u.abs() <= 1e9 && v.abs() <= 1e9);
        field.u.push(u);
        field.v.push(v);
        field.valid.push(!unknown);
    }
    Ok(field)
}

pub fn write_flo(field: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_flo(field))?;
    Ok(())
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    decode_flo(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tag_spells_pieh() {
        assert_eq!(&FLO_TAG.to_le_bytes(), b"PIEH");
    }

    #[test]
    fn two_by_one_golden_bytes() {
        let mut f = FlowField::zeros(2, 1);
        f.set(0, 0, 1.0, 0.0);
        f.set(1, 0, 0.0, 1.0);
        let bytes = encode_flo(&f);
        #[rustfmt::skip]
        let expected: [u8; 28] = [
            b'P', b'I', b'E', b'H',
            2, 0, 0, 0,
            1, 0, 0, 0,
            0x00, 0x00, 0x80, 0x3f, 0, 0, 0, 0,
            0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f,
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_flo(&FlowField::zeros(2, 2));
        bytes[0] = b'X';
        assert!(matches!(decode_flo(&bytes), Err(FlowError::BadMagic)));
    }

    #[test]
    fn truncated() {
        let bytes = encode_flo(&FlowField::zeros(3, 3));
        assert!(matches!(
            decode_flo(&bytes[..bytes.len() - 1]),
            Err(FlowError::TruncatedFile)
        ));
        assert!(matches!(decode_flo(&bytes[..8]), Err(FlowError::TruncatedFile)));
        assert!(matches!(decode_flo(&bytes[..2]), Err(FlowError::TruncatedFile)));
    }

    #[test]
    fn invalid_pixels_survive_as_invalid() {
        let mut f = FlowField::constant(2, 2, 1.5, -0.5);
        f.valid[3] = false;
        let back = decode_flo(&encode_flo(&f)).unwrap();
        assert_eq!(back.valid, f.valid);
        assert_eq!(back.u[3], UNKNOWN_FLOW);
    }

    #[test]
    fn foreign_sentinels_are_rewritten_unchanged() {
        let mut f = FlowField::constant(3, 1, 0.5, 0.5);
        f.u[0] = 3e9;
        f.v[1] = f32::NAN;
        let bytes = encode_flo(&f);
        let back = decode_flo(&bytes).unwrap();
        assert_eq!(back.valid, [false, false, true]);
        assert_eq!(encode_flo(&back), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.flo");
        let f = FlowField::constant(17, 5, 0.25, 3.0);
        write_flo(&f, &path).unwrap();
        assert_eq!(read_flo(&path).unwrap(), f);
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            w in 1usize..12,
            h in 1usize..12,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut f = FlowField::zeros(w, h);
            for i in 0..f.len() {
                f.u[i] = rng.random_range(-1e6f32..1e6);
                f.v[i] = rng.random_range(-1e9f32..1e9) * rng.random_range(0.0f32..1.0).powi(8);
            }
            let back = decode_flo(&encode_flo(&f)).unwrap();
            prop_assert_eq!(back.width, w);
            prop_assert!(back.u.iter().zip(&f.u).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert!(back.v.iter().zip(&f.v).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
