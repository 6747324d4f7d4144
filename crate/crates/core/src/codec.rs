//! Randomized SC encoding against the current cell state and SC decoding
//! from a noisy read-back.

use rand::Rng;
use thiserror::Error;

use crate::channel::{ChannelError, ReadChannel, WomSourceModel};
use crate::construction::{DecoderSlot, EncoderSlot, IndexPartition};
use crate::polar::{polar_transform, sc_sweep, BitBlock, ContradictionPolicy, PolarError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("{what} has length {actual}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{what} contains a value other than 0 or 1")]
    NotBinary { what: &'static str },
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

fn expect_len(what: &'static str, expected: usize, actual: usize) -> Result<(), CodecError> {
    if expected == actual {
        Ok(())
    } else {
        Err(CodecError::LengthMismatch {
            what,
            expected,
            actual,
        })
    }
}

fn expect_binary(what: &'static str, bits: &[u8]) -> Result<(), CodecError> {
    if bits.iter().all(|&b| b <= 1) {
        Ok(())
    } else {
        Err(CodecError::NotBinary { what })
    }
}

/// Bits shared by encoder and decoder at the positions of `G`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreezeBits(Vec<u8>);

impl FreezeBits {
    pub fn new(bits: Vec<u8>) -> Result<Self, CodecError> {
        expect_binary("freeze bits", &bits)?;
        Ok(FreezeBits(bits))
    }

    pub fn zeros(len: usize) -> Self {
        FreezeBits(vec![0; len])
    }

    pub fn for_partition(partition: &IndexPartition) -> Self {
        Self::zeros(partition.freeze_len())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeResult {
    pub codeword: BitBlock,
    pub u_vector: BitBlock,
    /// Cells with `s_i = 0` but `x_i = 1`.
    pub wom_violations: usize,
    /// Variable-node combines that ran out of mass because a forced bit
    /// contradicted the state; zero whenever the codeword is writable.
    pub contradictions: usize,
}

impl EncodeResult {
    pub fn failed(&self) -> bool {
        self.wom_violations > 0 || self.contradictions > 0
    }
}

pub fn count_wom_violations(s: &BitBlock, x: &BitBlock) -> usize {
    s.as_slice()
        .iter()
        .zip(x.as_slice())
        .filter(|(&si, &xi)| si == 0 && xi == 1)
        .count()
}

/// Physical result of programming `x` over cells in state `s`: a cell at 0
/// stays 0, a cell at 1 takes `x_i`.
pub fn apply_write(s: &BitBlock, x: &BitBlock) -> Result<BitBlock, CodecError> {
    expect_len("codeword", s.len(), x.len())?;
    let out = s.as_slice().iter().zip(x.as_slice()).map(|(&si, &xi)| si & xi).collect();
    Ok(BitBlock::new(out)?)
}

/// Joint WOM and error-control encoding.
///
/// Indices in `F ∩ G` take freeze bits, `F \ G` take message bits, and the
/// rest are drawn from `P(U_i | s, u_1^{i-1})`.
pub fn encode<R: Rng + ?Sized>(
    s: &BitBlock,
    partition: &IndexPartition,
    message: &[u8],
    freeze: &FreezeBits,
    model: &WomSourceModel,
    rng: &mut R,
) -> Result<EncodeResult, CodecError> {
    expect_len("cell state", partition.n(), s.len())?;
    expect_len("message", partition.message_len(), message.len())?;
    expect_len("freeze bits", partition.freeze_len(), freeze.len())?;
    expect_binary("message", message)?;

    let slots = partition.encoder_slots();
    let priors = model.leaf_priors_from_state(s);
    let outcome = sc_sweep(&priors, ContradictionPolicy::Uniform, |i, p| {
        Some(match slots[i] {
            EncoderSlot::Freeze(rank) => freeze.0[rank],
            EncoderSlot::Message(rank) => message[rank],
            EncoderSlot::Sampled => u8::from(rng.gen::<f64>() < p.p1),
        })
    })?;
    let u_vector = BitBlock::new(outcome.u)?;
    let codeword = polar_transform(&u_vector);
    let wom_violations = count_wom_violations(s, &codeword);
    Ok(EncodeResult {
        codeword,
        u_vector,
        wom_violations,
        contradictions: outcome.contradictions,
    })
}

/// Joint WOM and error-control decoding. Frozen positions take the freeze
/// bits; every other position takes the hard decision of
/// `P(U_i | y, u_1^{i-1})`, with an exact tie decided as 1. Returns the bits
/// at `F \ G` in index order.
pub fn decode(
    y: &[usize],
    partition: &IndexPartition,
    freeze: &FreezeBits,
    model: &WomSourceModel,
    channel: &ReadChannel,
) -> Result<Vec<u8>, CodecError> {
    expect_len("observation", partition.n(), y.len())?;
    expect_len("freeze bits", partition.freeze_len(), freeze.len())?;

    let slots = partition.decoder_slots();
    let priors = channel.leaf_priors_from_observation(model, y)?;
    let mut message = vec![0u8; partition.message_len()];
    sc_sweep(&priors, ContradictionPolicy::Uniform, |i, p| {
        Some(match slots[i] {
            DecoderSlot::Freeze(rank) => freeze.0[rank],
            DecoderSlot::Message(rank) => {
                let bit = p.hard_decision();
                message[rank] = bit;
                bit
            }
            DecoderSlot::Estimated => p.hard_decision(),
        })
    })?;
    Ok(message)
}
