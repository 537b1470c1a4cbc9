//! EEG preprocessing: band-pass filtering, length/channel normalization, and
//! tokenization.
//!
//! The filter is a frequency-domain ideal mask: FFT each channel, zero every
//! bin outside the passband (symmetrically), inverse FFT. Signals are then
//! truncated (or zero-padded) to the target length, channels are zero-padded
//! to the target count, and consecutive timestep groups are concatenated
//! across channels into tokens.

use super::{EEGRecording, EEGTokenSequence};
use crate::autodiff::Data;
use ndarray::{ArrayD, IxDyn};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("non-finite value in input recording")]
    NonFinite,
    #[error("group size {group} does not divide target length {len}")]
    BadGroup { group: usize, len: usize },
    #[error("recording has {found} channels, more than the target {target}")]
    TooManyChannels { found: usize, target: usize },
    #[error("band ({lo}, {hi}) Hz is empty or negative")]
    BadBand { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub target_len: usize,
    pub target_channels: usize,
    /// Passband in Hz, inclusive.
    pub band_hz: (f64, f64),
    pub group_size: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_len: 512,
            target_channels: 128,
            band_hz: (5.0, 95.0),
            group_size: 4,
        }
    }
}

/// Ideal band-pass: zeroes FFT bins with frequency outside `[lo, hi]` Hz.
pub fn bandpass(samples: &Data, sample_rate: f64, lo: f64, hi: f64) -> Data {
    let (ch, n) = (samples.shape()[0], samples.shape()[1]);
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut out = ArrayD::zeros(IxDyn(&[ch, n]));
    for c in 0..ch {
        let mut buf: Vec<Complex<f64>> = (0..n).map(|t| Complex::new(samples[[c, t]], 0.0)).collect();
        forward.process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let f = k.min(n - k) as f64 * sample_rate / n as f64;
            if f < lo || f > hi {
                *v = Complex::new(0.0, 0.0);
            }
        }
        inverse.process(&mut buf);
        for t in 0..n {
            out[[c, t]] = buf[t].re / n as f64;
        }
    }
    out
}

/// Reshapes `[channels, timesteps]` into `[timesteps/group, channels*group]`
/// tokens; `token[i][c*group + k] = x[c, i*group + k]`.
pub fn tokenize(padded: &Data, group_size: usize) -> Data {
    let (ch, t) = (padded.shape()[0], padded.shape()[1]);
    assert!(t % group_size == 0, "group must divide length");
    let n_tokens = t / group_size;
    let mut tokens = ArrayD::zeros(IxDyn(&[n_tokens, ch * group_size]));
    for i in 0..n_tokens {
        for c in 0..ch {
            for k in 0..group_size {
                tokens[[i, c * group_size + k]] = padded[[c, i * group_size + k]];
            }
        }
    }
    tokens
}

/// Inverse of [`tokenize`].
pub fn detokenize(tokens: &Data, channels: usize, group_size: usize) -> Data {
    let n_tokens = tokens.shape()[0];
    let mut out = ArrayD::zeros(IxDyn(&[channels, n_tokens * group_size]));
    for i in 0..n_tokens {
        for c in 0..channels {
            for k in 0..group_size {
                out[[c, i * group_size + k]] = tokens[[i, c * group_size + k]];
            }
        }
    }
    out
}

/// Full preprocessing: filter, truncate/pad length, pad channels, tokenize.
pub fn preprocess_eeg(raw: &EEGRecording, cfg: &PreprocessConfig) -> Result<EEGTokenSequence, PreprocessError> {
    if raw.samples.iter().any(|v| !v.is_finite()) {
        return Err(PreprocessError::NonFinite);
    }
    if cfg.group_size == 0 || cfg.target_len % cfg.group_size != 0 {
        return Err(PreprocessError::BadGroup { group: cfg.group_size, len: cfg.target_len });
    }
    let (lo, hi) = cfg.band_hz;
    if lo < 0.0 || hi <= lo {
        return Err(PreprocessError::BadBand { lo, hi });
    }
    let ch = raw.channels();
    if ch > cfg.target_channels {
        return Err(PreprocessError::TooManyChannels { found: ch, target: cfg.target_channels });
    }

    let filtered = bandpass(&raw.samples, raw.sample_rate, lo, hi);

    let t = raw.timesteps();
    let valid = t.min(cfg.target_len);
    let mut padded = ArrayD::zeros(IxDyn(&[cfg.target_channels, cfg.target_len]));
    for c in 0..ch {
        for k in 0..valid {
            padded[[c, k]] = filtered[[c, k]];
        }
    }

    let tokens = tokenize(&padded, cfg.group_size);
    Ok(EEGTokenSequence {
        n_tokens: cfg.target_len / cfg.group_size,
        channel_count: cfg.target_channels,
        group_size: cfg.group_size,
        valid_timesteps: valid,
        tokens,
    })
}
