//! Sample-level quantities of the non-overlapping one-hidden-layer network
//! `h(w, Z) = 1ᵀσ(Zw)` with binarized ReLU `σ(z) = 1{z > 0}`.
//!
//! Losses use the halved squared mismatch `½(h(w, Z) − h(w*, Z))²`
//! throughout.
//!
//! # Random streams
//!
//! Sample `j` of a dataset with seed `s` is drawn from a ChaCha8 generator
//! seeded with `s` and switched to stream `j` (see [`sample_rng`]). Normals
//! come from the ziggurat sampler of `rand_distr`, filled row-major. A sample
//! therefore depends only on `(s, j, k, d)`, and any shard of a dataset can be
//! regenerated independently of the others.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::check_dim;
use crate::{Error, Result};

/// One input: `k` non-overlapping patches of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    k: usize,
    d: usize,
    entries: Vec<f64>,
}

impl PatchMatrix {
    pub fn new(k: usize, d: usize, entries: Vec<f64>) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::Domain("patch matrix needs k, d >= 1"));
        }
        check_dim(k * d, entries.len())?;
        if !crate::linalg::is_finite(&entries) {
            return Err(Error::Domain("patch matrix entries must be finite"));
        }
        Ok(PatchMatrix { k, d, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.d)
    }

    fn check(&self, w: &[f64]) -> Result<()> {
        check_dim(self.d, w.len())
    }
}

/// Generator for sample `index` of the dataset with the given seed.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws a `k × d` matrix of i.i.d. standard normals, advancing `rng`.
pub fn sample_patches<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> PatchMatrix {
    assert!(k >= 1 && d >= 1, "patch matrix needs k, d >= 1");
    let entries = (0..k * d)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    PatchMatrix { k, d, entries }
}

/// Sample `index` of the counter-addressed stream with the given seed.
pub fn sample_at(k: usize, d: usize, seed: u64, index: u64) -> PatchMatrix {
    sample_patches(k, d, &mut sample_rng(seed, index))
}

/// Network output: the number of patches with a strictly positive response.
pub fn forward(w: &[f64], z: &PatchMatrix) -> Result<usize> {
    z.check(w)?;
    Ok(z.rows().filter(|r| crate::linalg::dot(r, w) > 0.0).count())
}

/// `½(h(w, Z) − h(w*, Z))²`.
pub fn sample_loss(w: &[f64], wstar: &[f64], z: &PatchMatrix) -> Result<f64> {
    let diff = forward(w, z)? as f64 - forward(wstar, z)? as f64;
    Ok(0.5 * diff * diff)
}

/// Coarse gradient `√(2/π)·Zᵀ[σ(Zw) ⊙ (σ(Zw) − σ(Zw*))]`, i.e. the chain rule
/// with the binarized activation's derivative replaced by the ReLU's.
pub fn coarse_grad_sample(w: &[f64], wstar: &[f64], z: &PatchMatrix) -> Result<Vec<f64>> {
    let mut out = alloc::vec![0.0; z.d];
    add_coarse_grad(w, wstar, z, &mut out)?;
    let c = libm::sqrt(2.0 / PI);
    out.iter_mut().for_each(|g| *g *= c);
    Ok(out)
}

/// Adds the unscaled coarse gradient `Zᵀ[σ(Zw) ⊙ (σ(Zw) − σ(Zw*))]` to `acc`.
fn add_coarse_grad(w: &[f64], wstar: &[f64], z: &PatchMatrix, acc: &mut [f64]) -> Result<()> {
    z.check(w)?;
    z.check(wstar)?;
    for row in z.rows() {
        // Only rows with (Zw)_i > 0 and (Zw*)_i <= 0 contribute.
        if crate::linalg::dot(row, w) > 0.0 && crate::linalg::dot(row, wstar) <= 0.0 {
            acc.iter_mut().zip(row).for_each(|(a, r)| *a += r);
        }
    }
    Ok(())
}

/// A fixed training set drawn from the counter-addressed stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    k: usize,
    d: usize,
    seed: u64,
    /// Stream index of the first sample.
    offset: u64,
    samples: Vec<PatchMatrix>,
}

impl Dataset {
    /// Samples `offset .. offset + m` of the stream with the given seed.
    pub fn generate(k: usize, d: usize, m: usize, seed: u64, offset: u64) -> Result<Self> {
        if k == 0 || d == 0 {
            return Err(Error::Domain("dataset needs k, d >= 1"));
        }
        let samples = (0..m as u64)
            .map(|j| sample_at(k, d, seed, offset + j))
            .collect();
        Ok(Dataset {
            k,
            d,
            seed,
            offset,
            samples,
        })
    }

    /// Wraps externally produced samples, for example ones read back from disk.
    pub fn from_samples(
        k: usize,
        d: usize,
        seed: u64,
        offset: u64,
        samples: Vec<PatchMatrix>,
    ) -> Result<Self> {
        for s in &samples {
            if s.k != k || s.d != d {
                return Err(Error::Domain("sample shape differs from dataset shape"));
            }
        }
        Ok(Dataset {
            k,
            d,
            seed,
            offset,
            samples,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[PatchMatrix] {
        &self.samples
    }
}

/// Mean sample loss, accumulated in index order.
pub fn empirical_risk(w: &[f64], wstar: &[f64], samples: &[PatchMatrix]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("empirical risk over an empty dataset"));
    }
    let mut total = 0.0;
    for z in samples {
        total += sample_loss(w, wstar, z)?;
    }
    Ok(total / samples.len() as f64)
}

/// Mean coarse gradient, accumulated in index order.
pub fn empirical_coarse_grad(
    w: &[f64],
    wstar: &[f64],
    samples: &[PatchMatrix],
) -> Result<Vec<f64>> {
    let first = samples.first().ok_or(Error::Domain(
        "empirical coarse gradient over an empty dataset",
    ))?;
    let mut acc = alloc::vec![0.0; first.d];
    for z in samples {
        add_coarse_grad(w, wstar, z, &mut acc)?;
    }
    let c = libm::sqrt(2.0 / PI) / samples.len() as f64;
    acc.iter_mut().for_each(|g| *g *= c);
    Ok(acc)
}
