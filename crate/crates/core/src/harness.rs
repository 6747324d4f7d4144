//! End-to-end trials (sample state → encode → write → read → decode) and
//! their aggregation into experiment reports.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{less_noisy_condition, LessNoisyCondition, ReadChannel, WomSourceModel};
use crate::codec::{apply_write, decode, encode, CodecError, FreezeBits};
use crate::construction::{containment_report, ContainmentReport, IndexPartition};
use crate::rng;

const TRIAL_STREAM_DOMAIN: u32 = 3;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;
/// Below this many trials the report is flagged as a small sample.
pub const SMALL_SAMPLE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub wom_violations: usize,
    pub contradictions: usize,
    pub message_len: usize,
    pub bit_errors: usize,
    /// A decoding error or any WOM violation.
    pub frame_error: bool,
    /// Fraction of cells programmed from 1 to 0.
    pub write_fraction: f64,
}

/// Everything a trial needs besides its random stream.
#[derive(Debug, Clone, Copy)]
pub struct TrialSetup<'a> {
    pub model: &'a WomSourceModel,
    pub channel: &'a ReadChannel,
    pub partition: &'a IndexPartition,
    pub freeze: &'a FreezeBits,
}

pub fn run_trial<R: Rng + ?Sized>(setup: &TrialSetup<'_>, rng: &mut R) -> Result<TrialResult, CodecError> {
    let n = setup.partition.n();
    let (s, _) = setup.model.sample_block(n, rng);
    let message: Vec<u8> = (0..setup.partition.message_len()).map(|_| rng.gen_range(0..=1u8)).collect();

    let encoded = encode(&s, setup.partition, &message, setup.freeze, setup.model, rng)?;
    let stored = apply_write(&s, &encoded.codeword)?;
    let y = setup.channel.transmit(&stored, rng);
    let decoded = decode(&y, setup.partition, setup.freeze, setup.model, setup.channel)?;

    let bit_errors = decoded.iter().zip(&message).filter(|(a, b)| a != b).count();
    let programmed = s
        .as_slice()
        .iter()
        .zip(stored.as_slice())
        .filter(|(&si, &xi)| si == 1 && xi == 0)
        .count();
    Ok(TrialResult {
        wom_violations: encoded.wom_violations,
        contradictions: encoded.contradictions,
        message_len: message.len(),
        bit_errors,
        frame_error: bit_errors > 0 || encoded.wom_violations > 0,
        write_fraction: programmed as f64 / n as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Normal,
    Wilson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_method: CiMethod,
}

/// 95% interval: normal approximation, or Wilson when either count is below 5.
pub fn proportion_ci(successes: usize, trials: usize) -> ProportionEstimate {
    assert!(trials > 0 && successes <= trials);
    let n = trials as f64;
    let p = successes as f64 / n;
    let (ci_low, ci_high, ci_method) = if successes < 5 || trials - successes < 5 {
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        (center - half, center + half, CiMethod::Wilson)
    } else {
        let half = Z95 * (p * (1.0 - p) / n).sqrt();
        (p - half, p + half, CiMethod::Normal)
    };
    ProportionEstimate {
        successes,
        trials,
        rate: p,
        ci_low: ci_low.clamp(0.0, p),
        ci_high: ci_high.clamp(p, 1.0),
        ci_method,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: serde_json::Value,
    #[serde(rename = "N")]
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub small_sample: bool,
    pub message_len: usize,
    pub design_rate: f64,
    pub frame_error_rate: ProportionEstimate,
    pub bit_error_rate: f64,
    pub mean_write_fraction: f64,
    pub write_fraction_std: f64,
    /// Share of trials whose codeword broke the write-once constraint.
    pub violation_frame_rate: f64,
    /// Violated cells per cell, averaged over trials.
    pub violation_cell_rate: f64,
    pub containment_holds: bool,
    pub containment: ContainmentReport,
    pub less_noisy_margin: f64,
    pub less_noisy: LessNoisyCondition,
}

/// Runs `trials` independent trials on streams split from `seed` and
/// aggregates them. `config` is echoed verbatim into the report.
pub fn run_experiment(
    setup: &TrialSetup<'_>,
    trials: usize,
    seed: u64,
    config: serde_json::Value,
) -> Result<ExperimentReport, CodecError> {
    assert!(trials >= 1, "an experiment needs at least one trial");
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(seed, rng::stream_id(TRIAL_STREAM_DOMAIN, t as u64));
            run_trial(setup, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    Ok(summarize(setup, &results, seed, config))
}

pub fn summarize(
    setup: &TrialSetup<'_>,
    results: &[TrialResult],
    seed: u64,
    config: serde_json::Value,
) -> ExperimentReport {
    let trials = results.len();
    let count = trials as f64;
    let n = setup.partition.n();
    let message_len = setup.partition.message_len();

    let frame_errors = results.iter().filter(|r| r.frame_error).count();
    let bit_errors: usize = results.iter().map(|r| r.bit_errors).sum();
    let bit_error_rate = if message_len == 0 {
        0.0
    } else {
        bit_errors as f64 / (message_len * trials) as f64
    };
    let mean_write_fraction = results.iter().map(|r| r.write_fraction).sum::<f64>() / count;
    let write_fraction_std = if trials > 1 {
        (results
            .iter()
            .map(|r| (r.write_fraction - mean_write_fraction).powi(2))
            .sum::<f64>()
            / (count - 1.0))
            .sqrt()
    } else {
        0.0
    };
    let violation_frames = results.iter().filter(|r| r.wom_violations > 0).count();
    let violated_cells: usize = results.iter().map(|r| r.wom_violations).sum();

    let containment = containment_report(setup.partition);
    let less_noisy = less_noisy_condition(setup.model, setup.channel);
    ExperimentReport {
        config,
        n,
        trials,
        seed,
        small_sample: trials < SMALL_SAMPLE,
        message_len,
        design_rate: containment.design_rate,
        frame_error_rate: proportion_ci(frame_errors, trials),
        bit_error_rate,
        mean_write_fraction,
        write_fraction_std,
        violation_frame_rate: violation_frames as f64 / count,
        violation_cell_rate: violated_cells as f64 / (count * n as f64),
        containment_holds: containment.holds,
        containment,
        less_noisy_margin: less_noisy.margin,
        less_noisy,
    }
}
