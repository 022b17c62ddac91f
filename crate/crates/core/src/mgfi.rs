//! Mask-guided feature injection.
//!
//! Per-position cosine similarity between an inversion-side and a
//! sampling-side feature tensor is thresholded into a binary mask. The mask
//! from one timestep then selects, row by row, between the two tensors of
//! the following timestep: positions that agree keep the inversion features,
//! the rest keep the sampling features.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default similarity threshold.
pub const DEFAULT_TAU: f64 = 0.2;

/// Rows whose norm falls below this are treated as degenerate and get
/// similarity 0.
pub const ZERO_NORM: f64 = 1e-12;

/// A `positions x channels` array of finite reals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    positions: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureTensor {
    pub fn new(positions: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if positions == 0 || channels == 0 {
            return Err(Error::ShapeMismatch(format!(
                "tensor needs P, C >= 1, got {positions} x {channels}"
            )));
        }
        if data.len() != positions * channels {
            return Err(Error::ShapeMismatch(format!(
                "{positions} x {channels} tensor needs {} values, got {}",
                positions * channels,
                data.len()
            )));
        }
        if let Some(x) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::Parse(format!("non-finite feature value {x}")));
        }
        Ok(Self {
            positions,
            channels,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let channels = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != channels) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), channels, rows.concat())
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.channels..(p + 1) * self.channels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.channels)
    }

    /// Every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: self.data.iter().map(|x| c * x).collect(),
            ..self.clone()
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if (self.positions, self.channels) == (other.positions, other.channels) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{} x {} vs {} x {}",
                self.positions, self.channels, other.positions, other.channels
            )))
        }
    }

    /// Text form: a `P C` header line, then `P` lines of `C` space-separated
    /// values. Values are written in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.positions, self.channels);
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty tensor file".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad header token `{t}`")))
            })
            .collect::<Result<_>>()?;
        let [positions, channels] = dims[..] else {
            return Err(Error::Parse(format!(
                "header must be `P C`, got `{header}`"
            )));
        };
        let mut data = Vec::with_capacity(positions * channels);
        let mut rows = 0;
        for line in lines {
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad value `{tok}`")))?,
                );
            }
            if data.len() - before != channels {
                return Err(Error::Parse(format!(
                    "row {rows} has {} values, expected {channels}",
                    data.len() - before
                )));
            }
            rows += 1;
        }
        if rows != positions {
            return Err(Error::Parse(format!(
                "expected {positions} rows, got {rows}"
            )));
        }
        Self::new(positions, channels, data)
    }
}

/// Per-position cosine similarity, each entry in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub values: Vec<f64>,
}

/// Per-position keep/replace decision and the threshold that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub bits: Vec<bool>,
    pub tau: f64,
}

impl BinaryMask {
    /// Fraction of positions set to 1.
    pub fn density(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.bits.iter().filter(|b| **b).count() as f64 / self.bits.len() as f64
    }

    /// A single line of `P` characters, each `0` or `1`.
    pub fn to_text(&self) -> String {
        let mut s: String = self
            .bits
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect();
        s.push('\n');
        s
    }

    pub fn from_text(text: &str, tau: f64) -> Result<Self> {
        let line = text.trim();
        let bits = line
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("mask character `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if bits.is_empty() {
            return Err(Error::Parse("empty mask".into()));
        }
        Ok(Self { bits, tau })
    }
}

/// `dot(a_p, b_p) / (|a_p| |b_p|)` per position; 0 where either row has
/// norm below [`ZERO_NORM`].
pub fn cosine_similarity_map(a: &FeatureTensor, b: &FeatureTensor) -> Result<SimilarityMap> {
    a.check_same_shape(b)?;
    let values = a
        .rows()
        .zip(b.rows())
        .map(|(x, y)| {
            let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
            for (u, v) in x.iter().zip(y) {
                dot += u * v;
                nx += u * u;
                ny += v * v;
            }
            if nx.sqrt() < ZERO_NORM || ny.sqrt() < ZERO_NORM {
                0.0
            } else {
                (dot / (nx * ny).sqrt()).clamp(-1.0, 1.0)
            }
        })
        .collect();
    Ok(SimilarityMap { values })
}

/// `1` where `S >= tau`, else `0`.
pub fn threshold_mask(s: &SimilarityMap, tau: f64) -> BinaryMask {
    BinaryMask {
        bits: s.values.iter().map(|v| *v >= tau).collect(),
        tau,
    }
}

/// Row `p` of the result is row `p` of `inv` where the mask is set and row
/// `p` of `smp` otherwise. Rows are copied, never mixed.
pub fn masked_blend(
    mask: &BinaryMask,
    inv: &FeatureTensor,
    smp: &FeatureTensor,
) -> Result<FeatureTensor> {
    inv.check_same_shape(smp)?;
    if mask.bits.len() != inv.positions {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} positions, tensors have {}",
            mask.bits.len(),
            inv.positions
        )));
    }
    let mut data = Vec::with_capacity(inv.data.len());
    for (p, keep) in mask.bits.iter().enumerate() {
        data.extend_from_slice(if *keep { inv.row(p) } else { smp.row(p) });
    }
    Ok(FeatureTensor {
        data,
        ..inv.clone()
    })
}

/// Masks from the current timestep's pair, blends the next timestep's pair.
pub fn mgfi_apply(
    inv_curr: &FeatureTensor,
    smp_curr: &FeatureTensor,
    inv_next: &FeatureTensor,
    smp_next: &FeatureTensor,
    tau: f64,
) -> Result<(BinaryMask, FeatureTensor)> {
    inv_curr.check_same_shape(inv_next)?;
    let mask = threshold_mask(&cosine_similarity_map(inv_curr, smp_curr)?, tau);
    let blended = masked_blend(&mask, inv_next, smp_next)?;
    Ok((mask, blended))
}

/// Seeded stand-in for the latent-to-attention-value map: a base tensor with
/// entries uniform in `[-1, 1]` and a sampling-side copy displaced by
/// `perturbation` times a fixed noise tensor.
///
/// For a given seed the base and noise are the same whatever the
/// perturbation, so increasing it only rotates each sampling row further
/// from its base row.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub inversion: FeatureTensor,
    pub sampling: FeatureTensor,
}

impl SyntheticPair {
    pub fn generate(
        positions: usize,
        channels: usize,
        perturbation: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = positions * channels;
        let base: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let sampling = base
            .iter()
            .zip(&noise)
            .map(|(b, e)| b + perturbation * e)
            .collect();
        Ok(Self {
            inversion: FeatureTensor::new(positions, channels, base)?,
            sampling: FeatureTensor::new(positions, channels, sampling)?,
        })
    }
}

/// Renders a similarity map as one value per line.
pub fn similarity_to_text(s: &SimilarityMap) -> String {
    let mut out = String::new();
    for v in &s.values {
        let _ = writeln!(out, "{v:?}");
    }
    out
}
