//! Code construction: Monte-Carlo estimates of the per-index conditional
//! entropies `H(U_i | side info, U_1^{i-1})`, the two high-entropy sets and
//! the containment check between them.
//!
//! `F` is the high-entropy set of the test channel (side info = cell state),
//! `G` the high-entropy set of the read channel (side info = observation).

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{binary_entropy, ChannelError, ReadChannel, WomSourceModel};
use crate::polar::{polar_transform, sc_sweep, transform_in_place, ContradictionPolicy, PolarError};
use crate::rng;

/// Samples per work unit; fixed so the reduction order is independent of
/// the number of worker threads.
const CHUNK: usize = 64;

/// Largest block length `exact_profile` will enumerate.
pub const EXACT_MAX_N: usize = 8;

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error("block length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("exact enumeration supports N <= {max}, got {n}")]
    TooLargeForExact { n: usize, max: usize },
    #[error("observation profile requested without a read channel")]
    MissingChannel,
    #[error("profiles have different lengths ({state} vs {observation})")]
    LengthMismatch { state: usize, observation: usize },
    #[error("profile side info is {found:?}, expected {expected:?}")]
    WrongSideInfo { expected: SideInfo, found: SideInfo },
    #[error("thresholds must satisfy 0 <= low <= high <= 1, got high {high}, low {low}")]
    InvalidThresholds { high: f64, low: f64 },
    #[error("index {index} in set {set} is outside 1..={n} or out of order")]
    InvalidIndex { set: &'static str, index: usize, n: usize },
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SideInfo {
    State,
    Observation,
}

impl SideInfo {
    fn stream_domain(self) -> u32 {
        match self {
            SideInfo::State => 1,
            SideInfo::Observation => 2,
        }
    }
}

/// Per-index conditional entropy estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyProfile {
    #[serde(rename = "N")]
    pub n: usize,
    /// Number of Monte-Carlo samples; 0 for an exact profile.
    #[serde(rename = "M")]
    pub sample_count: usize,
    #[serde(rename = "side_info_kind")]
    pub side_info: SideInfo,
    pub seed: Option<u64>,
    pub values: Vec<f64>,
    /// Standard error of each value; all zero for exact profiles.
    #[serde(default)]
    pub std_errors: Vec<f64>,
}

impl EntropyProfile {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n as f64
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Standard error of [`EntropyProfile::mean`], treating indices as independent.
    pub fn mean_std_error(&self) -> f64 {
        let var: f64 = self.std_errors.iter().map(|s| s * s).sum();
        var.sqrt() / self.n as f64
    }
}

fn check_length(n: usize) -> Result<(), ConstructionError> {
    if n.is_power_of_two() {
        Ok(())
    } else {
        Err(ConstructionError::NotPowerOfTwo(n))
    }
}

/// Monte-Carlo estimate of `H(U_i | side info, U_1^{i-1})` for every `i`.
///
/// Each sample draws `(s, x)`, sets `u = x · G`, and accumulates the binary
/// entropy of the SC posterior along the true prefix. Side info is `s` when
/// `channel` is `None`, otherwise the channel output `y`.
pub fn estimate_profile(
    model: &WomSourceModel,
    channel: Option<&ReadChannel>,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<EntropyProfile, ConstructionError> {
    check_length(n)?;
    if samples == 0 {
        return Err(ConstructionError::NoSamples);
    }
    let side_info = if channel.is_some() {
        SideInfo::Observation
    } else {
        SideInfo::State
    };
    let domain = side_info.stream_domain();
    let chunks = samples.div_ceil(CHUNK);

    let partials: Vec<Result<(Vec<f64>, Vec<f64>), ConstructionError>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut sum = vec![0.0; n];
            let mut sum_sq = vec![0.0; n];
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(samples);
            for sample in lo..hi {
                let mut rng = rng::stream(seed, rng::stream_id(domain, sample as u64));
                let (s, x) = model.sample_block(n, &mut rng);
                let priors = match channel {
                    None => model.leaf_priors_from_state(&s),
                    Some(ch) => {
                        let y = ch.transmit(&x, &mut rng);
                        ch.leaf_priors_from_observation(model, &y)?
                    }
                };
                let u = polar_transform(&x);
                let u = u.as_slice();
                sc_sweep(&priors, ContradictionPolicy::Fail, |i, p| {
                    let h = p.entropy();
                    sum[i] += h;
                    sum_sq[i] += h * h;
                    Some(u[i])
                })?;
            }
            Ok((sum, sum_sq))
        })
        .collect();

    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for part in partials {
        let (s, sq) = part?;
        for i in 0..n {
            sum[i] += s[i];
            sum_sq[i] += sq[i];
        }
    }
    let m = samples as f64;
    let values: Vec<f64> = sum.iter().map(|s| (s / m).clamp(0.0, 1.0)).collect();
    let std_errors = sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, sq)| {
            let mean = s / m;
            let var = (sq / m - mean * mean).max(0.0);
            if samples > 1 {
                (var * m / (m - 1.0) / m).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Ok(EntropyProfile {
        n,
        sample_count: samples,
        side_info,
        seed: Some(seed),
        values,
        std_errors,
    })
}

/// Exact `H(U_i | side info, U_1^{i-1})` by enumerating every side-info
/// vector, every codeword and every prefix. Only for `N <= 8`.
pub fn exact_profile(
    model: &WomSourceModel,
    channel: Option<&ReadChannel>,
    n: usize,
) -> Result<EntropyProfile, ConstructionError> {
    check_length(n)?;
    if n > EXACT_MAX_N {
        return Err(ConstructionError::TooLargeForExact { n, max: EXACT_MAX_N });
    }
    // Per-position side-info likelihood table: weight[w][x] = P(W = w, X = x).
    let weight: Vec<[f64; 2]> = match channel {
        None => (0..2u8)
            .map(|s| [model.p_s(s) * model.p_x_given_s(0, s), model.p_s(s) * model.p_x_given_s(1, s)])
            .collect(),
        Some(ch) => {
            let px = [model.p_x0(), 1.0 - model.p_x0()];
            (0..ch.output_alphabet_size())
                .map(|y| [px[0] * ch.transition(0, y), px[1] * ch.transition(1, y)])
                .collect()
        }
    };
    let alphabet = weight.len();
    let side_vectors = alphabet.pow(n as u32);
    let codewords = 1usize << n;
    let mut values = vec![0.0; n];

    let mut w = vec![0usize; n];
    let mut bits = vec![0u8; n];
    for code in 0..side_vectors {
        let mut rest = code;
        for slot in w.iter_mut() {
            *slot = rest % alphabet;
            rest /= alphabet;
        }
        // joint[u as integer, MSB = u_1] = P(w, u)
        let mut joint = vec![0.0; codewords];
        for xc in 0..codewords {
            let mut p = 1.0;
            for j in 0..n {
                bits[j] = ((xc >> (n - 1 - j)) & 1) as u8;
                p *= weight[w[j]][usize::from(bits[j])];
            }
            if p == 0.0 {
                continue;
            }
            transform_in_place(&mut bits);
            let uc = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
            joint[uc] += p;
        }
        // Marginalize the suffix: prefix tables of length i + 1.
        for (i, value) in values.iter_mut().enumerate() {
            let shift = n - 1 - i;
            let prefixes = 1usize << i;
            for prefix in 0..prefixes {
                let base0 = (prefix << 1) << shift;
                let base1 = ((prefix << 1) | 1) << shift;
                let p0: f64 = joint[base0..base0 + (1 << shift)].iter().sum();
                let p1: f64 = joint[base1..base1 + (1 << shift)].iter().sum();
                let total = p0 + p1;
                if total > 0.0 {
                    *value += total * binary_entropy(p1 / total);
                }
            }
        }
    }
    Ok(EntropyProfile {
        n,
        sample_count: 0,
        side_info: if channel.is_some() {
            SideInfo::Observation
        } else {
            SideInfo::State
        },
        seed: None,
        values,
        std_errors: vec![0.0; n],
    })
}

/// Role of an index during encoding (checks `F` before `G`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderSlot {
    /// Takes freeze bit number `rank` (its position within `G`).
    Freeze(usize),
    /// Takes message bit number `rank` (its position within `F \ G`).
    Message(usize),
    /// Drawn at random from the SC posterior given the cell state.
    Sampled,
}

/// Role of an index during decoding (checks `G` before `F`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderSlot {
    Freeze(usize),
    Message(usize),
    /// Hard-decided from the SC posterior given the observation.
    Estimated,
}

/// The sets `F` and `G` with the thresholds that produced them.
/// Indices are 1-based and sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionFile", into = "PartitionFile")]
pub struct IndexPartition {
    n: usize,
    threshold_high: f64,
    threshold_low: f64,
    f: Vec<usize>,
    g: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionFile {
    #[serde(rename = "N")]
    n: usize,
    /// `[high, low]`
    thresholds: [f64; 2],
    #[serde(rename = "F")]
    f: Vec<usize>,
    #[serde(rename = "G")]
    g: Vec<usize>,
}

impl TryFrom<PartitionFile> for IndexPartition {
    type Error = ConstructionError;

    fn try_from(file: PartitionFile) -> Result<Self, Self::Error> {
        IndexPartition::new(file.n, file.thresholds[0], file.thresholds[1], file.f, file.g)
    }
}

impl From<IndexPartition> for PartitionFile {
    fn from(p: IndexPartition) -> Self {
        PartitionFile {
            n: p.n,
            thresholds: [p.threshold_high, p.threshold_low],
            f: p.f,
            g: p.g,
        }
    }
}

fn check_thresholds(high: f64, low: f64) -> Result<(), ConstructionError> {
    if (0.0..=1.0).contains(&low) && (0.0..=1.0).contains(&high) && low <= high {
        Ok(())
    } else {
        Err(ConstructionError::InvalidThresholds { high, low })
    }
}

fn check_index_set(set: &'static str, indices: &[usize], n: usize) -> Result<(), ConstructionError> {
    let mut prev = 0;
    for &index in indices {
        if index <= prev || index > n {
            return Err(ConstructionError::InvalidIndex { set, index, n });
        }
        prev = index;
    }
    Ok(())
}

impl IndexPartition {
    /// `f` and `g` are strictly increasing 1-based index lists.
    pub fn new(
        n: usize,
        threshold_high: f64,
        threshold_low: f64,
        f: Vec<usize>,
        g: Vec<usize>,
    ) -> Result<Self, ConstructionError> {
        check_length(n)?;
        check_thresholds(threshold_high, threshold_low)?;
        check_index_set("F", &f, n)?;
        check_index_set("G", &g, n)?;
        Ok(IndexPartition {
            n,
            threshold_high,
            threshold_low,
            f,
            g,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.threshold_high, self.threshold_low)
    }

    /// High-entropy set of the test channel.
    pub fn f(&self) -> &[usize] {
        &self.f
    }

    /// High-entropy set of the read channel; also the frozen set.
    pub fn g(&self) -> &[usize] {
        &self.g
    }

    pub fn frozen_set(&self) -> &[usize] {
        &self.g
    }

    /// `F \ G`: positions carrying message bits.
    pub fn message_set(&self) -> Vec<usize> {
        let g: BTreeSet<usize> = self.g.iter().copied().collect();
        self.f.iter().copied().filter(|i| !g.contains(i)).collect()
    }

    /// Complement of `F`: positions the encoder samples.
    pub fn sampled_set(&self) -> Vec<usize> {
        let f: BTreeSet<usize> = self.f.iter().copied().collect();
        (1..=self.n).filter(|i| !f.contains(i)).collect()
    }

    pub fn message_len(&self) -> usize {
        self.message_set().len()
    }

    pub fn freeze_len(&self) -> usize {
        self.g.len()
    }

    pub fn design_rate(&self) -> f64 {
        self.message_len() as f64 / self.n as f64
    }

    /// `G \ F`, the indices breaking containment.
    pub fn containment_violations(&self) -> Vec<usize> {
        let f: BTreeSet<usize> = self.f.iter().copied().collect();
        self.g.iter().copied().filter(|i| !f.contains(i)).collect()
    }

    fn membership(&self) -> (Vec<Option<usize>>, Vec<bool>) {
        let mut g_rank = vec![None; self.n];
        for (rank, &i) in self.g.iter().enumerate() {
            g_rank[i - 1] = Some(rank);
        }
        let mut in_f = vec![false; self.n];
        for &i in &self.f {
            in_f[i - 1] = true;
        }
        (g_rank, in_f)
    }

    /// Encoder role of each 0-based index.
    pub fn encoder_slots(&self) -> Vec<EncoderSlot> {
        let (g_rank, in_f) = self.membership();
        let mut message = 0;
        (0..self.n)
            .map(|i| match (in_f[i], g_rank[i]) {
                (true, Some(rank)) => EncoderSlot::Freeze(rank),
                (true, None) => {
                    message += 1;
                    EncoderSlot::Message(message - 1)
                }
                (false, _) => EncoderSlot::Sampled,
            })
            .collect()
    }

    /// Decoder role of each 0-based index.
    pub fn decoder_slots(&self) -> Vec<DecoderSlot> {
        let (g_rank, in_f) = self.membership();
        let mut message = 0;
        (0..self.n)
            .map(|i| match (g_rank[i], in_f[i]) {
                (Some(rank), _) => DecoderSlot::Freeze(rank),
                (None, true) => {
                    message += 1;
                    DecoderSlot::Message(message - 1)
                }
                (None, false) => DecoderSlot::Estimated,
            })
            .collect()
    }
}

/// `F = {i : state_i >= high}`, `G = {i : observation_i >= low}`.
pub fn build_partition(
    state: &EntropyProfile,
    observation: &EntropyProfile,
    threshold_high: f64,
    threshold_low: f64,
) -> Result<IndexPartition, ConstructionError> {
    if state.side_info != SideInfo::State {
        return Err(ConstructionError::WrongSideInfo {
            expected: SideInfo::State,
            found: state.side_info,
        });
    }
    if observation.side_info != SideInfo::Observation {
        return Err(ConstructionError::WrongSideInfo {
            expected: SideInfo::Observation,
            found: observation.side_info,
        });
    }
    if state.n != observation.n || state.values.len() != observation.values.len() {
        return Err(ConstructionError::LengthMismatch {
            state: state.values.len(),
            observation: observation.values.len(),
        });
    }
    check_thresholds(threshold_high, threshold_low)?;
    let select = |values: &[f64], t: f64| -> Vec<usize> {
        values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= t)
            .map(|(i, _)| i + 1)
            .collect()
    };
    IndexPartition::new(
        state.n,
        threshold_high,
        threshold_low,
        select(&state.values, threshold_high),
        select(&observation.values, threshold_low),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub holds: bool,
    pub violations: Vec<usize>,
    pub design_rate: f64,
}

pub fn containment_report(partition: &IndexPartition) -> ContainmentReport {
    let violations = partition.containment_violations();
    ContainmentReport {
        holds: violations.is_empty(),
        violations,
        design_rate: partition.design_rate(),
    }
}

/// Both profiles plus the partition built from them.
#[derive(Debug, Clone)]
pub struct Construction {
    pub state: EntropyProfile,
    pub observation: EntropyProfile,
    pub partition: IndexPartition,
}

/// Runs both estimators and builds the partition.
pub fn construct(
    model: &WomSourceModel,
    channel: &ReadChannel,
    n: usize,
    samples: usize,
    seed: u64,
    threshold_high: f64,
    threshold_low: f64,
) -> Result<Construction, ConstructionError> {
    let state = estimate_profile(model, None, n, samples, seed)?;
    let observation = estimate_profile(model, Some(channel), n, samples, seed)?;
    let partition = build_partition(&state, &observation, threshold_high, threshold_low)?;
    Ok(Construction {
        state,
        observation,
        partition,
    })
}
