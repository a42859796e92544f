//! `KSF1` model checkpoints.
//!
//! ```text
//! "KSF1" | version u32 | n u32 | modes u32 | hidden u32 | in_channels u32
//!        | proj_hidden u32 | activation u32 | seed u64
//!        | param_count(cfg) × f64 in canonical order | crc32 u32
//! ```
//!
//! Canonical order: lift weight and bias, then for each of the four layers the
//! interleaved complex spectral weights, pointwise weight and bias, then the two
//! projection weights and biases. Activation codes: 0 GELU, 1 identity.

use std::path::Path;

use crate::codec::{read_file, write_file, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::fno::{param_count, Activation, FnoConfig, FnoParams};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"KSF1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: FnoParams,
    /// Seed the parameters were initialized from.
    pub seed: u64,
}

impl Checkpoint {
    pub fn config(&self) -> &FnoConfig {
        self.params.config()
    }
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Vec<u8> {
    let cfg = ckpt.config();
    let mut enc = Encoder::new(CHECKPOINT_MAGIC);
    enc.u32(CHECKPOINT_VERSION);
    for v in [cfg.n, cfg.modes, cfg.hidden, cfg.in_channels, cfg.proj_hidden] {
        enc.u32(v as u32);
    }
    enc.u32(cfg.activation.code());
    enc.u64(ckpt.seed);
    enc.f64s(ckpt.params.as_slice());
    enc.finish()
}

/// Reads only the header; the checksum is still verified over the whole file.
pub fn decode_checkpoint_config(bytes: &[u8]) -> Result<(FnoConfig, u64)> {
    read_header(&mut Decoder::open(bytes, CHECKPOINT_MAGIC)?)
}

fn read_header(dec: &mut Decoder<'_>) -> Result<(FnoConfig, u64)> {
    let version = dec.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch {
            expected: CHECKPOINT_VERSION,
            found: version,
        });
    }
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = dec.u32()? as usize;
    }
    let activation = Activation::from_code(dec.u32()?)?;
    let cfg = FnoConfig {
        n: dims[0],
        modes: dims[1],
        hidden: dims[2],
        in_channels: dims[3],
        proj_hidden: dims[4],
        activation,
    };
    cfg.validate()?;
    Ok((cfg, dec.u64()?))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut dec = Decoder::open(bytes, CHECKPOINT_MAGIC)?;
    let (cfg, seed) = read_header(&mut dec)?;
    let count = param_count(&cfg);
    if dec.remaining() != count * 8 {
        return Err(Error::Malformed(format!(
            "expected {count} parameters, found {} bytes",
            dec.remaining()
        )));
    }
    let params = FnoParams::from_vec(&cfg, dec.f64s(count)?)?;
    dec.expect_end()?;
    Ok(Checkpoint { params, seed })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_checkpoint(ckpt))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fno::init_params;

    #[test]
    fn round_trip_and_header() {
        let cfg = FnoConfig::new(16, 3, 4);
        let ckpt = Checkpoint {
            params: init_params(&cfg, 21),
            seed: 21,
        };
        let bytes = encode_checkpoint(&ckpt);
        assert_eq!(&bytes[..4], b"KSF1");
        assert_eq!(bytes.len(), 4 + 4 + 6 * 4 + 8 + param_count(&cfg) * 8 + 4);
        assert_eq!(decode_checkpoint(&bytes).unwrap(), ckpt);
        assert_eq!(decode_checkpoint_config(&bytes).unwrap(), (cfg, 21));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let cfg = FnoConfig::new(8, 2, 2);
        let bytes = encode_checkpoint(&Checkpoint {
            params: init_params(&cfg, 1),
            seed: 1,
        });
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 9]), Err(Error::ChecksumMismatch { .. })));
        assert!(matches!(decode_checkpoint(b"KSD1\0\0\0\0\0\0\0\0"), Err(Error::BadMagic { .. })));
    }
}
