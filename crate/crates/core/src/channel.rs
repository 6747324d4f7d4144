//! Cell-state source model, noisy read channels, samplers and closed-form
//! information quantities. All entropies are in bits.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::polar::{BitBlock, ProbPair};

const ROW_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("{name} = {value} must lie strictly between 0 and 1")]
    OpenUnitInterval { name: &'static str, value: f64 },
    #[error("{name} = {value} must lie in [0, 1]")]
    ClosedUnitInterval { name: &'static str, value: f64 },
    #[error("read channel needs at least 2 output symbols, got {0}")]
    AlphabetTooSmall(usize),
    #[error("transition row {row} has {len} entries, expected {expected}")]
    RowLength { row: usize, len: usize, expected: usize },
    #[error("transition row {row} is not a distribution (sum {sum})")]
    RowNotStochastic { row: usize, sum: f64 },
    #[error("transition matrix needs exactly 2 rows, got {0}")]
    RowCount(usize),
    #[error("symbol {symbol} at position {position} outside alphabet of size {size}")]
    SymbolOutOfRange { position: usize, symbol: usize, size: usize },
    #[error("observed symbol {symbol} has zero likelihood under both inputs")]
    ZeroEvidence { symbol: usize },
}

/// Binary entropy `H_b(p)` in bits, with `H_b(0) = H_b(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// i.i.d. cell states with `P(S = 0) = beta`, and codeword bits with
/// `P(X = 0 | S = 0) = 1`, `P(X = 0 | S = 1) = gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WomSourceModel {
    beta: f64,
    gamma: f64,
}

impl WomSourceModel {
    pub fn new(beta: f64, gamma: f64) -> Result<Self, ChannelError> {
        open_unit("beta", beta)?;
        open_unit("gamma", gamma)?;
        Ok(WomSourceModel { beta, gamma })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Marginal `P(X = 0) = beta + (1 - beta) gamma`.
    pub fn p_x0(&self) -> f64 {
        self.beta + (1.0 - self.beta) * self.gamma
    }

    /// `P(X = x | S = s)`.
    pub fn p_x_given_s(&self, x: u8, s: u8) -> f64 {
        match (s, x) {
            (0, 0) => 1.0,
            (0, _) => 0.0,
            (_, 0) => self.gamma,
            _ => 1.0 - self.gamma,
        }
    }

    pub fn p_s(&self, s: u8) -> f64 {
        if s == 0 {
            self.beta
        } else {
            1.0 - self.beta
        }
    }

    /// `H(X | S) = (1 - beta) H_b(gamma)`.
    pub fn conditional_entropy(&self) -> f64 {
        (1.0 - self.beta) * binary_entropy(self.gamma)
    }

    /// Expected fraction of cells programmed 1 → 0 in one write.
    pub fn write_fraction(&self) -> f64 {
        (1.0 - self.beta) * self.gamma
    }

    /// Draws `n` i.i.d. `(s_i, x_i)` pairs.
    pub fn sample_block<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (BitBlock, BitBlock) {
        let mut s = Vec::with_capacity(n);
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            let si = u8::from(rng.gen::<f64>() >= self.beta);
            let xi = if si == 0 {
                0
            } else {
                u8::from(rng.gen::<f64>() >= self.gamma)
            };
            s.push(si);
            x.push(xi);
        }
        (
            BitBlock::new(s).expect("caller passes a power-of-two length"),
            BitBlock::new(x).expect("caller passes a power-of-two length"),
        )
    }

    /// `P(X_i | S_i = s_i)` for each position.
    pub fn leaf_priors_from_state(&self, s: &BitBlock) -> Vec<ProbPair> {
        let on_one = ProbPair {
            p0: self.gamma,
            p1: 1.0 - self.gamma,
        };
        s.as_slice()
            .iter()
            .map(|&b| if b == 0 { ProbPair::certain(0) } else { on_one })
            .collect()
    }

    /// `I(X; S) = H_b(P(X = 0)) - (1 - beta) H_b(gamma)`.
    pub fn mutual_info_xs(&self) -> f64 {
        binary_entropy(self.p_x0()) - self.conditional_entropy()
    }
}

/// Discrete memoryless read channel with binary input and a finite output alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadChannel {
    rows: [Vec<f64>; 2],
}

impl ReadChannel {
    /// `rows[x][y] = P(Y = y | X = x)`.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        if rows.len() != 2 {
            return Err(ChannelError::RowCount(rows.len()));
        }
        let size = rows[0].len();
        if size < 2 {
            return Err(ChannelError::AlphabetTooSmall(size));
        }
        for (row, entries) in rows.iter().enumerate() {
            if entries.len() != size {
                return Err(ChannelError::RowLength {
                    row,
                    len: entries.len(),
                    expected: size,
                });
            }
            let sum: f64 = entries.iter().sum();
            let valid = entries.iter().all(|&v| v >= 0.0 && v.is_finite());
            if !valid || (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(ChannelError::RowNotStochastic { row, sum });
            }
        }
        let mut it = rows.into_iter();
        Ok(ReadChannel {
            rows: [it.next().unwrap(), it.next().unwrap()],
        })
    }

    pub fn identity() -> Self {
        ReadChannel {
            rows: [vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self, ChannelError> {
        Self::bac(p, p)
    }

    /// Binary asymmetric channel: `p01 = P(Y = 1 | X = 0)`, `p10 = P(Y = 0 | X = 1)`.
    pub fn bac(p01: f64, p10: f64) -> Result<Self, ChannelError> {
        closed_unit("p01", p01)?;
        closed_unit("p10", p10)?;
        Ok(ReadChannel {
            rows: [vec![1.0 - p01, p01], vec![p10, 1.0 - p10]],
        })
    }

    pub fn output_alphabet_size(&self) -> usize {
        self.rows[0].len()
    }

    pub fn transition(&self, x: u8, y: usize) -> f64 {
        self.rows[usize::from(x & 1)][y]
    }

    pub fn rows(&self) -> &[Vec<f64>; 2] {
        &self.rows
    }

    fn sample_symbol<R: Rng + ?Sized>(&self, x: u8, rng: &mut R) -> usize {
        let row = &self.rows[usize::from(x & 1)];
        let draw: f64 = rng.gen();
        let mut acc = 0.0;
        for (y, &p) in row.iter().enumerate() {
            acc += p;
            if draw < acc {
                return y;
            }
        }
        // Rounding left `acc` just under 1; fall back to the last reachable symbol.
        row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    /// Passes each bit independently through the channel.
    pub fn transmit<R: Rng + ?Sized>(&self, x: &BitBlock, rng: &mut R) -> Vec<usize> {
        x.as_slice()
            .iter()
            .map(|&b| self.sample_symbol(b, rng))
            .collect()
    }

    /// `P(X_i | Y_i = y_i)` under the marginal input law of `model`.
    pub fn leaf_priors_from_observation(
        &self,
        model: &WomSourceModel,
        y: &[usize],
    ) -> Result<Vec<ProbPair>, ChannelError> {
        let size = self.output_alphabet_size();
        let prior0 = model.p_x0();
        let prior1 = 1.0 - prior0;
        let table: Vec<Option<ProbPair>> = (0..size)
            .map(|sym| ProbPair::new(prior0 * self.rows[0][sym], prior1 * self.rows[1][sym]).ok())
            .collect();
        y.iter()
            .enumerate()
            .map(|(position, &symbol)| {
                if symbol >= size {
                    return Err(ChannelError::SymbolOutOfRange {
                        position,
                        symbol,
                        size,
                    });
                }
                table[symbol].ok_or(ChannelError::ZeroEvidence { symbol })
            })
            .collect()
    }

    /// `I(X; Y)` with `P(X = 0)` taken from `model`.
    pub fn mutual_info_xy(&self, model: &WomSourceModel) -> f64 {
        let px = [model.p_x0(), 1.0 - model.p_x0()];
        let mut info = 0.0;
        for y in 0..self.output_alphabet_size() {
            let py = px[0] * self.rows[0][y] + px[1] * self.rows[1][y];
            for x in 0..2 {
                let joint = px[x] * self.rows[x][y];
                if joint > 0.0 {
                    info += joint * (self.rows[x][y] / py).log2();
                }
            }
        }
        info.max(0.0)
    }
}

/// Outcome of the less-noisy test `I(X;Y) >= I(X;S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LessNoisyCondition {
    pub holds: bool,
    /// `I(X;Y) - I(X;S)` in bits.
    pub margin: f64,
    pub i_xy: f64,
    pub i_xs: f64,
}

/// The read channel `X → Y` is less noisy than the test channel `X → S`
/// exactly when `I(X;Y) >= I(X;S)`.
pub fn less_noisy_condition(model: &WomSourceModel, channel: &ReadChannel) -> LessNoisyCondition {
    let i_xy = channel.mutual_info_xy(model);
    let i_xs = model.mutual_info_xs();
    let margin = i_xy - i_xs;
    LessNoisyCondition {
        holds: margin >= 0.0,
        margin,
        i_xy,
        i_xs,
    }
}

/// Serializable channel description used in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ChannelSpec {
    Identity,
    Bsc { p: f64 },
    Bac { p01: f64, p10: f64 },
    Matrix { rows: Vec<Vec<f64>> },
}

impl ChannelSpec {
    pub fn build(&self) -> Result<ReadChannel, ChannelError> {
        match self {
            ChannelSpec::Identity => Ok(ReadChannel::identity()),
            ChannelSpec::Bsc { p } => ReadChannel::bsc(*p),
            ChannelSpec::Bac { p01, p10 } => ReadChannel::bac(*p01, *p10),
            ChannelSpec::Matrix { rows } => ReadChannel::from_matrix(rows.clone()),
        }
    }
}

fn open_unit(name: &'static str, value: f64) -> Result<(), ChannelError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(ChannelError::OpenUnitInterval { name, value })
    }
}

fn closed_unit(name: &'static str, value: f64) -> Result<(), ChannelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ChannelError::ClosedUnitInterval { name, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive joint-table oracle: `I(A;B) = H(A) + H(B) - H(A,B)`.
    fn table_info(joint: &[Vec<f64>]) -> f64 {
        let h = |ps: &mut dyn Iterator<Item = f64>| -> f64 {
            ps.filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum()
        };
        let rows = joint.len();
        let cols = joint[0].len();
        let ha = h(&mut (0..rows).map(|r| joint[r].iter().sum::<f64>()));
        let hb = h(&mut (0..cols).map(|c| (0..rows).map(|r| joint[r][c]).sum::<f64>()));
        let hab = h(&mut joint.iter().flatten().copied());
        ha + hb - hab
    }

    fn joint_xs(m: &WomSourceModel) -> Vec<Vec<f64>> {
        (0..2u8)
            .map(|x| (0..2u8).map(|s| m.p_s(s) * m.p_x_given_s(x, s)).collect())
            .collect()
    }

    fn joint_xy(m: &WomSourceModel, ch: &ReadChannel) -> Vec<Vec<f64>> {
        (0..2u8)
            .map(|x| {
                let px: f64 = (0..2u8).map(|s| m.p_s(s) * m.p_x_given_s(x, s)).sum();
                (0..ch.output_alphabet_size())
                    .map(|y| px * ch.transition(x, y))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn model_validation() {
        assert!(WomSourceModel::new(0.0, 0.5).is_err());
        assert!(WomSourceModel::new(0.5, 1.0).is_err());
        assert!(WomSourceModel::new(f64::NAN, 0.5).is_err());
        assert!(ReadChannel::bsc(1.2).is_err());
        assert!(ReadChannel::from_matrix(vec![vec![0.5, 0.5]]).is_err());
        assert!(ReadChannel::from_matrix(vec![vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(ReadChannel::from_matrix(vec![vec![1.0], vec![1.0]]).is_err());
        assert!(ReadChannel::from_matrix(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.2, 0.7]]).is_ok());
    }

    #[test]
    fn mutual_info_examples() {
        let m = WomSourceModel::new(0.5, 0.5).unwrap();
        assert!((m.mutual_info_xs() - 0.311278).abs() < 1e-5);
        let bsc = ReadChannel::bsc(0.05).unwrap();
        // H_b(0.725) - H_b(0.05), evaluated independently.
        assert!((bsc.mutual_info_xy(&m) - 0.562_151_2).abs() < 1e-6);
        let id = ReadChannel::identity();
        assert!((id.mutual_info_xy(&m) - binary_entropy(0.75)).abs() < 1e-12);
        assert!(ReadChannel::bsc(0.5).unwrap().mutual_info_xy(&m).abs() < 1e-12);

        let almost_const = WomSourceModel::new(0.5, 1.0 - 1e-12).unwrap();
        assert!(almost_const.mutual_info_xs() < 1e-9);
        let state_const = WomSourceModel::new(1e-12, 0.5).unwrap();
        assert!(state_const.mutual_info_xs() < 1e-9);
    }

    #[test]
    fn less_noisy_examples() {
        let m = WomSourceModel::new(0.5, 0.5).unwrap();
        let c = less_noisy_condition(&m, &ReadChannel::identity());
        assert!(c.holds);
        let c = less_noisy_condition(&m, &ReadChannel::bsc(0.5).unwrap());
        assert!(!c.holds);
        assert!((c.margin + 0.31128).abs() < 1e-5);
        let c = less_noisy_condition(&m, &ReadChannel::bsc(0.05).unwrap());
        assert!(c.holds);
        assert!((c.margin - (0.562_151_2 - 0.311_278_1)).abs() < 1e-6);
    }

    #[test]
    fn closed_forms_match_joint_table_on_grid() {
        let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        for &beta in &grid {
            for &gamma in &grid {
                let m = WomSourceModel::new(beta, gamma).unwrap();
                assert!((m.mutual_info_xs() - table_info(&joint_xs(&m))).abs() < 1e-9);
                for &p in &grid {
                    let ch = ReadChannel::bsc(p).unwrap();
                    assert!((ch.mutual_info_xy(&m) - table_info(&joint_xy(&m, &ch))).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn info_monotone_in_crossover() {
        let m = WomSourceModel::new(0.3, 0.6).unwrap();
        let values: Vec<f64> = (0..=50)
            .map(|k| ReadChannel::bsc(k as f64 / 100.0).unwrap().mutual_info_xy(&m))
            .collect();
        assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn identity_always_less_noisy() {
        for b in 1..=9 {
            for g in 1..=9 {
                let m = WomSourceModel::new(b as f64 / 10.0, g as f64 / 10.0).unwrap();
                assert!(less_noisy_condition(&m, &ReadChannel::identity()).holds);
            }
        }
    }

    #[test]
    fn state_priors() {
        let m = WomSourceModel::new(0.5, 0.3).unwrap();
        let s = BitBlock::parse("01").unwrap();
        let priors = m.leaf_priors_from_state(&s);
        assert_eq!(priors[0], ProbPair::certain(0));
        assert!((priors[1].p0 - 0.3).abs() < 1e-15 && (priors[1].p1 - 0.7).abs() < 1e-15);
    }

    #[test]
    fn observation_priors() {
        let m = WomSourceModel::new(0.5, 0.5).unwrap();
        let id = ReadChannel::identity();
        assert_eq!(id.leaf_priors_from_observation(&m, &[0]).unwrap()[0], ProbPair::certain(0));

        let bsc = ReadChannel::bsc(0.05).unwrap();
        let p = bsc.leaf_priors_from_observation(&m, &[1]).unwrap()[0];
        let norm = 0.75 * 0.05 + 0.25 * 0.95;
        assert!((p.p0 - 0.75 * 0.05 / norm).abs() < 1e-12);
        assert!((p.p0 - 0.1364).abs() < 1e-4);

        // P(X=0) = 0.2 + 0.8 * 0.375 = 0.5: posterior equals the likelihood.
        let uniform_prior = WomSourceModel::new(0.2, 0.375).unwrap();
        let p = ReadChannel::bsc(0.1).unwrap().leaf_priors_from_observation(&uniform_prior, &[0]).unwrap()[0];
        assert!((p.p0 - 0.9).abs() < 1e-12);

        assert!(matches!(
            bsc.leaf_priors_from_observation(&m, &[2]),
            Err(ChannelError::SymbolOutOfRange { symbol: 2, .. })
        ));
        let erasure_only = ReadChannel::from_matrix(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(
            erasure_only.leaf_priors_from_observation(&m, &[2]),
            Err(ChannelError::ZeroEvidence { symbol: 2 })
        );
    }

    #[test]
    fn sampler_degenerate_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = WomSourceModel::new(1.0 - 1e-9, 0.5).unwrap();
        let (s, x) = m.sample_block(1024, &mut rng);
        assert_eq!(s.count_ones(), 0);
        assert_eq!(x.count_ones(), 0);
        let m = WomSourceModel::new(0.3, 1.0 - 1e-12).unwrap();
        let (_, x) = m.sample_block(1024, &mut rng);
        assert_eq!(x.count_ones(), 0);
    }

    #[test]
    fn sampler_cell_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = WomSourceModel::new(0.5, 0.5).unwrap();
        let n = 1 << 14;
        let (s, x) = m.sample_block(n, &mut rng);
        let both = s.as_slice().iter().zip(x.as_slice()).filter(|(&a, &b)| a == 1 && b == 1).count();
        assert!((both as f64 / n as f64 - 0.25).abs() < 0.01);
        assert!(s.as_slice().iter().zip(x.as_slice()).all(|(&a, &b)| a == 1 || b == 0));

        let n = 1 << 16;
        let m = WomSourceModel::new(0.3, 0.6).unwrap();
        let (s, x) = m.sample_block(n, &mut rng);
        let mut counts = [[0usize; 2]; 2];
        for (&a, &b) in s.as_slice().iter().zip(x.as_slice()) {
            counts[usize::from(a)][usize::from(b)] += 1;
        }
        for si in 0..2u8 {
            for xi in 0..2u8 {
                let p = m.p_s(si) * m.p_x_given_s(xi, si);
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                let freq = counts[usize::from(si)][usize::from(xi)] as f64 / n as f64;
                assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "cell ({si},{xi})");
            }
        }
    }

    #[test]
    fn transmit_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = BitBlock::parse("1011001011110000").unwrap();
        let y = ReadChannel::identity().transmit(&x, &mut rng);
        assert_eq!(y, x.as_slice().iter().map(|&b| usize::from(b)).collect::<Vec<_>>());
        let y = ReadChannel::bsc(0.0).unwrap().transmit(&x, &mut rng);
        assert_eq!(y, x.as_slice().iter().map(|&b| usize::from(b)).collect::<Vec<_>>());

        let zeros = BitBlock::zeros(1 << 14).unwrap();
        let y = ReadChannel::bsc(0.1).unwrap().transmit(&zeros, &mut rng);
        let frac = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
        assert!((frac - 0.1).abs() < 0.01);
    }

    #[test]
    fn channel_spec_json() {
        let spec: ChannelSpec = serde_json::from_str(r#"{"kind":"bsc","p":0.02}"#).unwrap();
        assert_eq!(spec.build().unwrap(), ReadChannel::bsc(0.02).unwrap());
        let spec: ChannelSpec = serde_json::from_str(r#"{"kind":"bac","p01":0.01,"p10":0.05}"#).unwrap();
        assert_eq!(spec.build().unwrap().transition(1, 0), 0.05);
        let spec: ChannelSpec =
            serde_json::from_str(r#"{"kind":"matrix","rows":[[0.9,0.1],[0.2,0.8]]}"#).unwrap();
        assert!(spec.build().is_ok());
        assert!(serde_json::from_str::<ChannelSpec>(r#"{"kind":"awgn"}"#).is_err());
    }
}
