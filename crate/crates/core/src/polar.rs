//! Binary polar transform and the successive-cancellation probability
//! recursion shared by construction, encoding and decoding.
//!
//! The transform is `u = x · G_k` with `G_k` the `k`-th Kronecker power of
//! `[[1, 0], [1, 1]]` in natural index order (no bit reversal). Splitting
//! `x = (a, b)` into halves gives `u = ((a ⊕ b) · G_{k-1}, b · G_{k-1})`,
//! which is the recursion the SC sweep walks.

use std::fmt;

use thiserror::Error;

/// Normalizer below which a combine is treated as contradictory.
const ZERO_MASS: f64 = 0.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarError {
    #[error("block length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("bit value {value} at position {position} is not 0 or 1")]
    InvalidBit { position: usize, value: u8 },
    #[error("invalid probability pair ({p0}, {p1})")]
    InvalidProbability { p0: f64, p1: f64 },
    #[error("contradictory evidence: zero normalizer in variable-node combine")]
    Contradiction,
    #[error("prefix length {prefix} out of range for block length {len}")]
    PrefixOutOfRange { prefix: usize, len: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

/// A binary vector whose length is a power of two.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitBlock(Vec<u8>);

impl BitBlock {
    pub fn new(bits: Vec<u8>) -> Result<Self, PolarError> {
        if !bits.len().is_power_of_two() {
            return Err(PolarError::NotPowerOfTwo(bits.len()));
        }
        if let Some((position, &value)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(PolarError::InvalidBit { position, value });
        }
        Ok(BitBlock(bits))
    }

    pub fn zeros(len: usize) -> Result<Self, PolarError> {
        Self::new(vec![0; len])
    }

    pub fn ones(len: usize) -> Result<Self, PolarError> {
        Self::new(vec![1; len])
    }

    /// Parses an ASCII string of `0`/`1` characters, ignoring surrounding whitespace.
    pub fn parse(text: &str) -> Result<Self, PolarError> {
        let bits = parse_bits(text)?;
        Self::new(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `log2` of the length.
    pub fn order(&self) -> u32 {
        self.0.len().trailing_zeros()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn xor(&self, other: &BitBlock) -> Result<BitBlock, PolarError> {
        if self.len() != other.len() {
            return Err(PolarError::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(BitBlock(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }
}

impl fmt::Debug for BitBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitBlock({self})")
    }
}

impl fmt::Display for BitBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bits_to_string(&self.0))
    }
}

impl AsRef<[u8]> for BitBlock {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Parses `0`/`1` characters into bits. Any length is accepted.
pub fn parse_bits(text: &str) -> Result<Vec<u8>, PolarError> {
    text.trim()
        .bytes()
        .enumerate()
        .map(|(position, c)| match c {
            b'0' => Ok(0),
            b'1' => Ok(1),
            other => Err(PolarError::InvalidBit {
                position,
                value: other,
            }),
        })
        .collect()
}

pub fn bits_to_string(bits: &[u8]) -> String {
    bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

/// In-place butterfly for `u = x · G_k`. Length must be a power of two.
pub fn transform_in_place(bits: &mut [u8]) {
    let n = bits.len();
    debug_assert!(n.is_power_of_two());
    let mut half = 1;
    while half < n {
        for block in bits.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        half *= 2;
    }
}

/// `u = x · G_k` over GF(2). `G_k` is an involution, so this is also the inverse.
pub fn polar_transform(x: &BitBlock) -> BitBlock {
    let mut bits = x.0.clone();
    transform_in_place(&mut bits);
    BitBlock(bits)
}

/// Distribution of a single bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbPair {
    pub p0: f64,
    pub p1: f64,
}

impl ProbPair {
    /// Builds a normalized pair from nonnegative weights.
    pub fn new(p0: f64, p1: f64) -> Result<Self, PolarError> {
        let sum = p0 + p1;
        if !(p0 >= 0.0 && p1 >= 0.0 && sum.is_finite() && sum > 0.0) {
            return Err(PolarError::InvalidProbability { p0, p1 });
        }
        Ok(ProbPair {
            p0: p0 / sum,
            p1: p1 / sum,
        })
    }

    pub const fn certain(bit: u8) -> Self {
        if bit == 0 {
            ProbPair { p0: 1.0, p1: 0.0 }
        } else {
            ProbPair { p0: 0.0, p1: 1.0 }
        }
    }

    pub const fn uniform() -> Self {
        ProbPair { p0: 0.5, p1: 0.5 }
    }

    pub fn prob(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.p0
        } else {
            self.p1
        }
    }

    /// Binary entropy of the pair, in bits.
    pub fn entropy(&self) -> f64 {
        crate::channel::binary_entropy(self.p1)
    }

    /// Hard decision; an exact tie goes to 1.
    pub fn hard_decision(&self) -> u8 {
        if self.p0 > self.p1 {
            0
        } else {
            1
        }
    }
}

/// Check-node rule: distribution of `x1 ⊕ x2` for independent `x1 ~ a`, `x2 ~ b`.
pub fn sc_check_combine(a: ProbPair, b: ProbPair) -> ProbPair {
    let p0 = a.p0 * b.p0 + a.p1 * b.p1;
    let p1 = a.p0 * b.p1 + a.p1 * b.p0;
    let sum = p0 + p1;
    ProbPair {
        p0: p0 / sum,
        p1: p1 / sum,
    }
}

/// Variable-node rule: `p(x) ∝ a(x ⊕ u_prev) · b(x)`.
pub fn sc_var_combine(a: ProbPair, b: ProbPair, u_prev: u8) -> Result<ProbPair, PolarError> {
    let (a0, a1) = if u_prev == 0 { (a.p0, a.p1) } else { (a.p1, a.p0) };
    let p0 = a0 * b.p0;
    let p1 = a1 * b.p1;
    let sum = p0 + p1;
    if sum <= ZERO_MASS || !sum.is_finite() {
        return Err(PolarError::Contradiction);
    }
    Ok(ProbPair {
        p0: p0 / sum,
        p1: p1 / sum,
    })
}

/// What a sweep does when a variable-node combine has no mass left.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContradictionPolicy {
    /// Abort the sweep with [`PolarError::Contradiction`].
    Fail,
    /// Substitute a uniform pair, count the event and keep going.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepOutcome {
    /// Bits chosen at each leaf, in index order. Entries past a halt are 0.
    pub u: Vec<u8>,
    /// Number of contradictory combines replaced under [`ContradictionPolicy::Uniform`].
    pub contradictions: usize,
    /// Whether the decision callback stopped the sweep early.
    pub halted: bool,
}

/// Successive-cancellation sweep over all `N` leaves.
///
/// `leaf_priors[j]` is the distribution of `x_j` given its own observation.
/// For each index `i` in order, `decide(i, P(U_i | obs, u_1..u_{i-1}))` returns
/// the bit to commit, or `None` to stop. Cost is `O(N log N)`.
pub fn sc_sweep<D>(
    leaf_priors: &[ProbPair],
    policy: ContradictionPolicy,
    mut decide: D,
) -> Result<SweepOutcome, PolarError>
where
    D: FnMut(usize, ProbPair) -> Option<u8>,
{
    let n = leaf_priors.len();
    if !n.is_power_of_two() {
        return Err(PolarError::NotPowerOfTwo(n));
    }
    let mut state = Sweep {
        policy,
        decide: &mut decide,
        u: vec![0; n],
        contradictions: 0,
        halted: false,
    };
    let mut scratch = vec![ProbPair::uniform(); n];
    let mut partial = vec![0u8; n];
    state.node(leaf_priors, &mut scratch, &mut partial, 0)?;
    Ok(SweepOutcome {
        u: state.u,
        contradictions: state.contradictions,
        halted: state.halted,
    })
}

struct Sweep<'a, D> {
    policy: ContradictionPolicy,
    decide: &'a mut D,
    u: Vec<u8>,
    contradictions: usize,
    halted: bool,
}

impl<D> Sweep<'_, D>
where
    D: FnMut(usize, ProbPair) -> Option<u8>,
{
    /// Processes the subtree whose leaf distributions are `priors`, writing the
    /// subtree's x-domain bits into `partial`. `scratch` holds at least
    /// `priors.len()` slots for descendants.
    fn node(
        &mut self,
        priors: &[ProbPair],
        scratch: &mut [ProbPair],
        partial: &mut [u8],
        offset: usize,
    ) -> Result<(), PolarError> {
        if self.halted {
            return Ok(());
        }
        let n = priors.len();
        if n == 1 {
            match (self.decide)(offset, priors[0]) {
                Some(bit) => {
                    let bit = bit & 1;
                    self.u[offset] = bit;
                    partial[0] = bit;
                }
                None => self.halted = true,
            }
            return Ok(());
        }
        let half = n / 2;
        let (child_scratch, child_priors) = scratch[..n].split_at_mut(half);
        let (left_bits, right_bits) = partial.split_at_mut(half);

        for j in 0..half {
            child_priors[j] = sc_check_combine(priors[j], priors[j + half]);
        }
        self.node(child_priors, child_scratch, left_bits, offset)?;
        if self.halted {
            return Ok(());
        }

        for j in 0..half {
            child_priors[j] = match sc_var_combine(priors[j], priors[j + half], left_bits[j]) {
                Ok(p) => p,
                Err(err) => match self.policy {
                    ContradictionPolicy::Fail => return Err(err),
                    ContradictionPolicy::Uniform => {
                        self.contradictions += 1;
                        ProbPair::uniform()
                    }
                },
            };
        }
        self.node(child_priors, child_scratch, right_bits, offset + half)?;

        for j in 0..half {
            left_bits[j] ^= right_bits[j];
        }
        Ok(())
    }
}

/// `P(U_i | observations, U_1^{i-1} = u_prefix)` where `i = u_prefix.len() + 1`.
pub fn sc_posterior(leaf_priors: &[ProbPair], u_prefix: &[u8]) -> Result<ProbPair, PolarError> {
    let n = leaf_priors.len();
    if u_prefix.len() >= n {
        return Err(PolarError::PrefixOutOfRange {
            prefix: u_prefix.len(),
            len: n,
        });
    }
    let target = u_prefix.len();
    let mut found = None;
    sc_sweep(leaf_priors, ContradictionPolicy::Fail, |i, p| {
        if i == target {
            found = Some(p);
            None
        } else {
            Some(u_prefix[i])
        }
    })?;
    Ok(found.expect("sweep visits every index up to the target"))
}
