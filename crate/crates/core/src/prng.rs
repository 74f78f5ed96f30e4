//! Deterministic hierarchical randomness.
//!
//! A root seed fans out into `num_subsets` child seeds, each of which drives
//! an independent [`SeedStream`]. The rotation angles of a transform are split
//! contiguously across the children, so any subset can be regenerated on its
//! own and walked backwards without buffering the whole angle sequence.
//!
//! # Bit-exact constants
//!
//! Alternate implementations reproduce every sequence with:
//!
//! ```text
//! mix64(z):
//!     z = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9
//!     z = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB
//!     return z ^ (z >> 31)
//!
//! derive_child_seed(root, k) = mix64(mix64(root) ^ (k * 0xD1B5_4A32_D192_ED03))
//!
//! stream(seed).next_u64():
//!     state = state + 0x9E37_79B9_7F4A_7C15
//!     return mix64(state)
//!
//! uniform_unit = (next_u64 >> 11) * 2^-53
//! sign         = +1 if next_u64 < 2^63 else -1
//! sign stream  = stream(derive_child_seed(root, 2^64 - 1))
//! ```
//!
//! All arithmetic is wrapping on 64-bit unsigned integers. Angles are drawn
//! with `rand_distr` 0.4's `Beta` sampler (Cheng's BB/BC algorithms) over the
//! stream above, then mapped through `asin(2B - 1)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Range;

use rand::RngCore;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_A: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_B: u64 = 0x94D0_49BB_1331_11EB;
const CHILD_MULT: u64 = 0xD1B5_4A32_D192_ED03;

/// Child index reserved for the reflection-sign stream.
pub const SIGN_STREAM_INDEX: u64 = u64::MAX;

/// SplitMix64 output finalizer. A bijection on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(MIX_A);
    z = (z ^ (z >> 27)).wrapping_mul(MIX_B);
    z ^ (z >> 31)
}

/// Seed of child `index` under `root`.
///
/// For a fixed root this is injective in `index`: the index is multiplied by
/// an odd constant, xored with a fixed word and passed through a bijection.
#[inline]
pub fn derive_child_seed(root: u64, index: u64) -> u64 {
    mix64(mix64(root) ^ index.wrapping_mul(CHILD_MULT))
}

/// Sequential SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SeedStream {
    state: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_word(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform_unit(&mut self) -> f64 {
        (self.next_word() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `+1.0` or `-1.0` with equal probability.
    #[inline]
    pub fn sample_sign(&mut self) -> f64 {
        if self.next_word() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Draws a rotation angle for a plane of span `d = j - i`.
    ///
    /// The density is `Γ((d+1)/2) / (√π Γ(d/2)) · cos^(d-1) θ` on
    /// `(-π/2, π/2)`, obtained as `asin(2B - 1)` with `B ~ Beta(d/2, d/2)`.
    pub fn sample_angle(&mut self, d: u32) -> Result<f64> {
        if d == 0 {
            return Err(Error::InvalidSpan(d));
        }
        let shape = f64::from(d) / 2.0;
        let beta = Beta::new(shape, shape).expect("positive shape parameters");
        loop {
            let b: f64 = beta.sample(self);
            let theta = (2.0 * b - 1.0).asin();
            // b can round to exactly 0 or 1; the angle must stay interior.
            if theta.abs() < FRAC_PI_2 {
                return Ok(theta);
            }
        }
    }
}

impl RngCore for SeedStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_word() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.next_word()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let word = self.next_word().to_le_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// Analytic density of [`SeedStream::sample_angle`] for span `d`.
pub fn angle_density(d: u32, theta: f64) -> f64 {
    if theta.abs() >= FRAC_PI_2 || d == 0 {
        return 0.0;
    }
    let d = f64::from(d);
    let log_norm = libm::lgamma((d + 1.0) / 2.0) - 0.5 * PI.ln() - libm::lgamma(d / 2.0);
    log_norm.exp() * theta.cos().powf(d - 1.0)
}

/// Traversal direction for an angle subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Forward,
    Reverse,
}

/// Root seed plus the contiguous partition of an angle sequence into subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedHierarchy {
    root: u64,
    num_subsets: usize,
    total_angles: usize,
    subset_size: usize,
}

impl SeedHierarchy {
    pub fn new(root: u64, total_angles: usize, num_subsets: usize) -> Result<Self> {
        if num_subsets == 0 {
            return Err(crate::error::invalid("num_subsets", "must be positive"));
        }
        let subset_size = total_angles.div_ceil(num_subsets);
        Ok(Self {
            root,
            num_subsets,
            total_angles,
            subset_size,
        })
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn num_subsets(&self) -> usize {
        self.num_subsets
    }

    pub fn total_angles(&self) -> usize {
        self.total_angles
    }

    /// `ceil(total_angles / num_subsets)`; the trailing subsets may be short or empty.
    pub fn subset_size(&self) -> usize {
        self.subset_size
    }

    pub fn child_seed(&self, k: usize) -> Result<u64> {
        self.check_subset(k)?;
        Ok(derive_child_seed(self.root, k as u64))
    }

    /// Angle indices covered by subset `k`.
    pub fn subset_range(&self, k: usize) -> Result<Range<usize>> {
        self.check_subset(k)?;
        let start = (k * self.subset_size).min(self.total_angles);
        let end = (start + self.subset_size).min(self.total_angles);
        Ok(start..end)
    }

    /// Subset holding angle `index`.
    pub fn subset_of(&self, index: usize) -> usize {
        index / self.subset_size.max(1)
    }

    pub fn sign_stream(&self) -> SeedStream {
        SeedStream::new(derive_child_seed(self.root, SIGN_STREAM_INDEX))
    }

    /// Regenerates subset `k` into `buf`, one angle per entry of `spans`.
    ///
    /// `spans` must yield exactly one span per angle in the subset. The
    /// buffer is cleared first, so a caller can reuse its allocation.
    pub fn fill_angle_subset<I>(&self, k: usize, order: Order, spans: I, buf: &mut Vec<f64>) -> Result<()>
    where
        I: IntoIterator<Item = u32>,
    {
        let range = self.subset_range(k)?;
        let mut stream = SeedStream::new(derive_child_seed(self.root, k as u64));
        buf.clear();
        for d in spans {
            if buf.len() == range.len() {
                return Err(Error::DimensionMismatch {
                    field: "spans",
                    expected: range.len(),
                    actual: buf.len() + 1,
                });
            }
            buf.push(stream.sample_angle(d)?);
        }
        crate::error::check_len("spans", range.len(), buf.len())?;
        if order == Order::Reverse {
            buf.reverse();
        }
        Ok(())
    }

    pub fn angle_subset<I>(&self, k: usize, order: Order, spans: I) -> Result<Vec<f64>>
    where
        I: IntoIterator<Item = u32>,
    {
        let mut buf = Vec::with_capacity(self.subset_size);
        self.fill_angle_subset(k, order, spans, &mut buf)?;
        Ok(buf)
    }

    fn check_subset(&self, k: usize) -> Result<()> {
        if k < self.num_subsets {
            Ok(())
        } else {
            Err(Error::SubsetOutOfRange {
                index: k,
                count: self.num_subsets,
            })
        }
    }
}
