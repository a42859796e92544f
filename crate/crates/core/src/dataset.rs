//! Seeded sample generation, order-based splitting and the `KSD1` dataset file.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "KSD1" | version u32 | prng id u32 | n u32 | count u32 | h f64 | dt f64 | t_final f64
//!        | base_seed u64 | count × (seed u64 | split u8 | input n² f64 | target n² f64)
//!        | crc32 u32
//! ```

use std::path::Path;

use rayon::prelude::*;

use crate::codec::{read_file, write_file, Decoder, Encoder};
use crate::error::{Error, Result};
use crate::field::ScalarField2D;
use crate::rng::{SeededStream, PRNG_ID};
use crate::solver::{evolve, SolverConfig};

pub const DATASET_MAGIC: &[u8; 4] = b"KSD1";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Unused,
    Train,
    Val,
    Test,
}

impl Split {
    pub fn tag(self) -> u8 {
        match self {
            Split::Unused => 0,
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0 => Split::Unused,
            1 => Split::Train,
            2 => Split::Val,
            3 => Split::Test,
            other => return Err(Error::Malformed(format!("unknown split tag {other}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: ScalarField2D,
    pub target: ScalarField2D,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    /// Generation settings; `snapshot_stride` always equals the step count because
    /// only the initial and final frames are kept.
    pub solver_config: SolverConfig,
    pub base_seed: u64,
    pub prng_id: u32,
    pub split: Vec<Split>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n(&self) -> usize {
        self.solver_config.n
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.split[i] == split).collect()
    }

    pub fn subset(&self, split: Split) -> Vec<&Sample> {
        self.indices(split).into_iter().map(|i| &self.samples[i]).collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.split.iter().filter(|&&s| s == split).count()
    }
}

/// `n²` uniform `[0, 1)` draws in row-major order from the versioned stream.
pub fn generate_initial(n: usize, h: f64, seed: u64) -> Result<ScalarField2D> {
    let mut rng = SeededStream::new(seed);
    let values = (0..n * n).map(|_| rng.uniform()).collect();
    ScalarField2D::new(n, h, values)
}

/// Sample `i` starts from seed `base_seed + i` and stores `(u0, u(t_final))`.
pub fn generate_dataset(count: usize, base_seed: u64, config: &SolverConfig) -> Result<Dataset> {
    generate_dataset_with_progress(count, base_seed, config, |_, _| {})
}

/// As [`generate_dataset`], calling `progress(index, sample)` as each sample finishes.
pub fn generate_dataset_with_progress(
    count: usize,
    base_seed: u64,
    config: &SolverConfig,
    progress: impl Fn(usize, &Sample) + Sync,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidSolverConfig("sample count must be at least 1".into()));
    }
    config.validate()?;
    let run_config = SolverConfig {
        snapshot_stride: config.steps(),
        ..*config
    };
    let samples = (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let input = generate_initial(config.n, config.h, seed)?;
            let traj = evolve(&input, &run_config).map_err(|e| match e {
                Error::BlowUp { step, max_abs, .. } => Error::BlowUp {
                    step,
                    max_abs,
                    sample: Some(i),
                },
                other => other,
            })?;
            let target = traj.final_frame().clone();
            let sample = Sample { input, target, seed };
            progress(i, &sample);
            Ok(sample)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        split: vec![Split::Unused; samples.len()],
        samples,
        solver_config: run_config,
        base_seed,
        prng_id: PRNG_ID,
    })
}

/// Tags the first `n_train` samples train, the next `n_val` val, the next `n_test`
/// test and the rest unused, in generation order.
pub fn assign_split(mut ds: Dataset, n_train: usize, n_val: usize, n_test: usize) -> Result<Dataset> {
    let requested = n_train + n_val + n_test;
    if requested > ds.len() {
        return Err(Error::SplitTooLarge {
            requested,
            available: ds.len(),
        });
    }
    ds.split = (0..ds.len())
        .map(|i| {
            if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else if i < requested {
                Split::Test
            } else {
                Split::Unused
            }
        })
        .collect();
    Ok(ds)
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let cfg = &ds.solver_config;
    let mut enc = Encoder::new(DATASET_MAGIC);
    enc.u32(DATASET_VERSION);
    enc.u32(ds.prng_id);
    enc.u32(cfg.n as u32);
    enc.u32(ds.samples.len() as u32);
    enc.f64(cfg.h);
    enc.f64(cfg.dt);
    enc.f64(cfg.t_final);
    enc.u64(ds.base_seed);
    for (sample, split) in ds.samples.iter().zip(&ds.split) {
        enc.u64(sample.seed);
        enc.u8(split.tag());
        enc.f64s(sample.input.values());
        enc.f64s(sample.target.values());
    }
    enc.finish()
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut dec = Decoder::open(bytes, DATASET_MAGIC)?;
    let version = dec.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::VersionMismatch {
            expected: DATASET_VERSION,
            found: version,
        });
    }
    let prng_id = dec.u32()?;
    let n = dec.u32()? as usize;
    let count = dec.u32()? as usize;
    let h = dec.f64()?;
    let dt = dec.f64()?;
    let t_final = dec.f64()?;
    let base_seed = dec.u64()?;
    let per_sample = 9 + 16 * n * n;
    if dec.remaining() != count * per_sample {
        return Err(Error::Malformed(format!(
            "expected {} sample bytes for {count} samples of size {n}, found {}",
            count * per_sample,
            dec.remaining()
        )));
    }
    let mut solver_config = SolverConfig {
        n,
        h,
        dt,
        t_final,
        snapshot_stride: 1,
    };
    solver_config.snapshot_stride = solver_config.steps().max(1);
    let mut samples = Vec::with_capacity(count);
    let mut split = Vec::with_capacity(count);
    for _ in 0..count {
        let seed = dec.u64()?;
        split.push(Split::from_tag(dec.u8()?)?);
        let input = ScalarField2D::new(n, h, dec.f64s(n * n)?)?;
        let target = ScalarField2D::new(n, h, dec.f64s(n * n)?)?;
        samples.push(Sample { input, target, seed });
    }
    dec.expect_end()?;
    Ok(Dataset {
        samples,
        solver_config,
        base_seed,
        prng_id,
        split,
    })
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_dataset(ds))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(n: usize, t_final: f64) -> SolverConfig {
        SolverConfig {
            n,
            h: 1.0,
            dt: 0.01,
            t_final,
            snapshot_stride: 100,
        }
    }

    #[test]
    fn initial_condition_is_deterministic() {
        assert_eq!(generate_initial(16, 1.0, 9).unwrap(), generate_initial(16, 1.0, 9).unwrap());
    }

    #[test]
    fn neighbouring_seeds_differ() {
        let a = generate_initial(64, 1.0, 100).unwrap();
        let b = generate_initial(64, 1.0, 101).unwrap();
        let differ = a.values().iter().zip(b.values()).filter(|(x, y)| x != y).count();
        assert!(differ as f64 > 0.99 * (64 * 64) as f64);
    }

    #[test]
    fn initial_condition_statistics() {
        for seed in [0, 1, 12345, u64::MAX] {
            let f = generate_initial(128, 1.0, seed).unwrap();
            assert!((0.47..=0.53).contains(&f.mean()));
            assert!(f.min() >= 0.0 && f.max() < 1.0);
        }
    }

    #[test]
    fn split_examples() {
        let ds = generate_dataset(10, 0, &small_config(4, 0.01)).unwrap();
        let s = assign_split(ds.clone(), 8, 1, 1).unwrap();
        let mut expected = vec![Split::Train; 8];
        expected.extend([Split::Val, Split::Test]);
        assert_eq!(s.split, expected);
        let none = assign_split(ds.clone(), 0, 0, 0).unwrap();
        assert!(none.split.iter().all(|&t| t == Split::Unused));
        assert!(matches!(
            assign_split(ds, 8, 2, 1),
            Err(Error::SplitTooLarge { requested: 11, available: 10 })
        ));
    }

    #[test]
    fn generation_uses_consecutive_seeds() {
        let ds = generate_dataset(4, 40, &small_config(8, 0.05)).unwrap();
        let seeds: Vec<u64> = ds.samples.iter().map(|s| s.seed).collect();
        assert_eq!(seeds, vec![40, 41, 42, 43]);
        assert_eq!(ds.samples[2].input, generate_initial(8, 1.0, 42).unwrap());
        assert_eq!(ds.solver_config.snapshot_stride, 5);
    }

    #[test]
    fn zero_count_rejected() {
        assert!(generate_dataset(0, 0, &small_config(8, 0.05)).is_err());
    }

    #[test]
    fn decode_rejects_bad_input() {
        let ds = assign_split(generate_dataset(2, 3, &small_config(8, 0.02)).unwrap(), 1, 1, 0).unwrap();
        let bytes = encode_dataset(&ds);
        assert_eq!(decode_dataset(&bytes).unwrap(), ds);

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(decode_dataset(&wrong_magic), Err(Error::BadMagic { .. })));

        let truncated = &bytes[..bytes.len() - 100];
        assert!(matches!(decode_dataset(truncated), Err(Error::ChecksumMismatch { .. })));

        let mut flipped = bytes.clone();
        flipped[60] ^= 1;
        assert!(matches!(decode_dataset(&flipped), Err(Error::ChecksumMismatch { .. })));

        let mut versioned = bytes[..bytes.len() - 4].to_vec();
        versioned[4] = 9;
        let crc = crc32fast::hash(&versioned);
        versioned.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode_dataset(&versioned), Err(Error::VersionMismatch { found: 9, .. })));
    }
}
