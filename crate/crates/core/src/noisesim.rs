//! Monte-Carlo measurement of marginal spectra with detector noise.
//!
//! Marginals are read out on monochromator channels of fixed width,
//! uniform in frequency. Each frame adds independent noise to every
//! channel of the input and transmitted spectra; frames are summed.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::biphoton::{jsi, marginals, BiphotonState, SpectralGrid};
use crate::constants::{bandwidth_nm_to_omega, nm_from_omega};
use crate::error::{EtpaError, Result};

/// Default monochromator channel width, nm.
pub const DEFAULT_CHANNEL_WIDTH_NM: f64 = 0.8;
/// Default number of accumulated frames.
pub const DEFAULT_FRAMES: usize = 100;

const FRAMES_PER_BLOCK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    /// Expected counts plus additive Gaussian noise.
    #[default]
    Gaussian,
    /// Counts drawn from a Poisson law; `per_bin_noise_sigma` is ignored.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRunConfig {
    pub n_frames: usize,
    /// s per frame
    pub integration_time_s: f64,
    /// counts per channel per frame
    pub per_bin_noise_sigma: f64,
    pub rng_seed: u64,
    pub channel_width_nm: f64,
    pub model: NoiseModel,
    /// also accumulate noisy JSIs on the simulation grid
    pub include_jsi: bool,
    /// half-open channel index ranges; empty selects channels with no input
    pub background_region: Vec<(usize, usize)>,
}

impl Default for NoiseRunConfig {
    fn default() -> Self {
        NoiseRunConfig {
            n_frames: DEFAULT_FRAMES,
            integration_time_s: 1.0,
            per_bin_noise_sigma: 0.0,
            rng_seed: 0,
            channel_width_nm: DEFAULT_CHANNEL_WIDTH_NM,
            model: NoiseModel::Gaussian,
            include_jsi: false,
            background_region: Vec::new(),
        }
    }
}

impl NoiseRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 1 {
            return Err(EtpaError::invalid("noise.n_frames", "must be >= 1"));
        }
        if !(self.integration_time_s > 0.0 && self.integration_time_s.is_finite()) {
            return Err(EtpaError::invalid(
                "noise.integration_time_s",
                "must be > 0",
            ));
        }
        if !(self.per_bin_noise_sigma >= 0.0 && self.per_bin_noise_sigma.is_finite()) {
            return Err(EtpaError::invalid(
                "noise.per_bin_noise_sigma",
                "must be >= 0",
            ));
        }
        if !(self.channel_width_nm > 0.0 && self.channel_width_nm.is_finite()) {
            return Err(EtpaError::invalid("noise.channel_width_nm", "must be > 0"));
        }
        if self.background_region.iter().any(|&(a, b)| a >= b) {
            return Err(EtpaError::invalid(
                "noise.background_region",
                "ranges must be nonempty",
            ));
        }
        Ok(())
    }
}

/// `σ = √(F·R_in/n)·T`: per-channel noise whose root-sum-square over the
/// `n` signal channels is the detection noise floor.
pub fn calibrate_noise(r_in: f64, fano: f64, n_signal_bins: usize, integration_time_s: f64) -> f64 {
    (fano * r_in / n_signal_bins as f64).sqrt() * integration_time_s
}

/// Linear map from grid bins onto monochromator channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Channels {
    /// channel centres, rad/s, ascending
    pub omega: Vec<f64>,
    /// `(channel, weight)` pairs for each grid bin
    overlaps: Vec<Vec<(usize, f64)>>,
}

impl Channels {
    /// Channels of `width_nm` (converted at the grid's centre wavelength)
    /// tiling the grid from its low-frequency edge; a partial last
    /// channel is dropped.
    pub fn new(grid: &SpectralGrid, width_nm: f64) -> Result<Self> {
        let width = bandwidth_nm_to_omega(width_nm, nm_from_omega(grid.center_omega0));
        let lo = grid.center_omega0 - grid.half_span;
        let n_ch = ((2.0 * grid.half_span) / width).floor() as usize;
        if n_ch == 0 {
            return Err(EtpaError::invalid(
                "noise.channel_width_nm",
                "wider than the grid",
            ));
        }
        let dw = grid.spacing();
        let overlaps = (0..grid.n_points)
            .map(|k| {
                let (a, b) = (grid.omega(k) - 0.5 * dw, grid.omega(k) + 0.5 * dw);
                let first = (((a - lo) / width).floor().max(0.0)) as usize;
                (first..n_ch)
                    .map_while(|c| {
                        let (ca, cb) = (lo + c as f64 * width, lo + (c + 1) as f64 * width);
                        (ca < b).then(|| (c, ((b.min(cb) - a.max(ca)) / dw).max(0.0)))
                    })
                    .filter(|&(_, w)| w > 0.0)
                    .collect()
            })
            .collect();
        let omega = (0..n_ch).map(|c| lo + (c as f64 + 0.5) * width).collect();
        Ok(Channels { omega, overlaps })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn wavelengths_nm(&self) -> Vec<f64> {
        self.omega.iter().map(|&w| nm_from_omega(w)).collect()
    }

    pub fn rebin(&self, per_bin: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (v, ov) in per_bin.iter().zip(&self.overlaps) {
            for &(c, w) in ov {
                out[c] += v * w;
            }
        }
        out
    }
}

/// Signal and idler spectra on the channel axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalPair {
    pub signal: Vec<f64>,
    pub idler: Vec<f64>,
}

impl MarginalPair {
    fn zeros(n: usize) -> Self {
        MarginalPair {
            signal: vec![0.0; n],
            idler: vec![0.0; n],
        }
    }

    fn add(&mut self, other: &MarginalPair) {
        add_into(&mut self.signal, &other.signal);
        add_into(&mut self.idler, &other.idler);
    }

    fn minus(&self, other: &MarginalPair) -> MarginalPair {
        MarginalPair {
            signal: self
                .signal
                .iter()
                .zip(&other.signal)
                .map(|(a, b)| a - b)
                .collect(),
            idler: self
                .idler
                .iter()
                .zip(&other.idler)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Noise-free rates per channel, pairs/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedSpectra {
    pub channel_omega: Vec<f64>,
    pub channel_nm: Vec<f64>,
    pub input: MarginalPair,
    pub output: MarginalPair,
}

impl ExpectedSpectra {
    pub fn new(input: &BiphotonState, output: &BiphotonState, width_nm: f64) -> Result<Self> {
        if !input.same_support(output) {
            return Err(EtpaError::GridMismatch);
        }
        let ch = Channels::new(&input.grid, width_nm)?;
        let pair = |s: &BiphotonState| {
            let (sig, idl) = marginals(s);
            MarginalPair {
                signal: ch.rebin(&sig),
                idler: ch.rebin(&idl),
            }
        };
        Ok(ExpectedSpectra {
            channel_nm: ch.wavelengths_nm(),
            input: pair(input),
            output: pair(output),
            channel_omega: ch.omega,
        })
    }

    pub fn absorbed(&self) -> MarginalPair {
        self.input.minus(&self.output)
    }

    /// Channels that receive any input signal.
    pub fn signal_channels(&self) -> Vec<usize> {
        let max = self.input.signal.iter().cloned().fold(0.0, f64::max);
        (0..self.input.signal.len())
            .filter(|&c| self.input.signal[c] > 1e-12 * max)
            .collect()
    }

    /// Channels where the input signal marginal is at least half its peak.
    pub fn peak_channels(&self) -> Vec<usize> {
        let max = self.input.signal.iter().cloned().fold(0.0, f64::max);
        (0..self.input.signal.len())
            .filter(|&c| max > 0.0 && self.input.signal[c] >= 0.5 * max)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyJsi {
    pub input: Array2<f64>,
    pub output: Array2<f64>,
    pub absorbed: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snr {
    /// mean absorbed counts over the peak channels / background std;
    /// `+∞` when the background is noiseless
    pub snr: f64,
    /// `20·log10(snr)`
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementResult {
    pub channel_nm: Vec<f64>,
    /// counts summed over frames
    pub accumulated_in: MarginalPair,
    pub accumulated_out: MarginalPair,
    pub absorbed: MarginalPair,
    /// noiseless absorbed counts, `M·T·rate`
    pub expected_absorbed: MarginalPair,
    pub accumulated_jsi: Option<NoisyJsi>,
    pub peak_channels: Vec<usize>,
    pub background_channels: Vec<usize>,
    pub n_signal_channels: usize,
    pub snr: Snr,
}

struct Frame {
    input: MarginalPair,
    output: MarginalPair,
    jsi: Option<(Array2<f64>, Array2<f64>)>,
}

fn draw(rng: &mut ChaCha8Rng, mean: f64, sigma: f64, model: NoiseModel) -> f64 {
    match model {
        NoiseModel::Gaussian => {
            let z: f64 = StandardNormal.sample(rng);
            mean + sigma * z
        }
        NoiseModel::Poisson => {
            if mean > 0.0 {
                Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(mean)
            } else {
                0.0
            }
        }
    }
}

fn frame(
    index: usize,
    exp: &ExpectedSpectra,
    jsi_means: Option<&(Array2<f64>, Array2<f64>)>,
    cfg: &NoiseRunConfig,
) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    rng.set_stream(index as u64);
    let t = cfg.integration_time_s;
    let sigma = cfg.per_bin_noise_sigma;
    let mut noisy = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&r| draw(&mut rng, r * t, sigma, cfg.model))
            .collect()
    };
    let input = MarginalPair {
        signal: noisy(&exp.input.signal),
        idler: noisy(&exp.input.idler),
    };
    let output = MarginalPair {
        signal: noisy(&exp.output.signal),
        idler: noisy(&exp.output.idler),
    };
    let jsi = jsi_means.map(|(a, b)| {
        let mut f = |m: &Array2<f64>| m.mapv(|r| draw(&mut rng, r * t, sigma, cfg.model));
        (f(a), f(b))
    });
    Frame { input, output, jsi }
}

/// Accumulates `n_frames` noisy readouts of `input` and `output`.
/// Frames are generated in parallel from per-frame RNG streams and summed
/// in frame order, so the result depends only on the seed.
pub fn simulate_frames(
    input: &BiphotonState,
    output: &BiphotonState,
    cfg: &NoiseRunConfig,
) -> Result<MeasurementResult> {
    cfg.validate()?;
    let exp = ExpectedSpectra::new(input, output, cfg.channel_width_nm)?;
    let n_ch = exp.channel_omega.len();
    let jsi_means = cfg.include_jsi.then(|| (jsi(input), jsi(output)));
    let n = input.grid.n_points;

    let blocks: Vec<Frame> = (0..cfg.n_frames.div_ceil(FRAMES_PER_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = Frame {
                input: MarginalPair::zeros(n_ch),
                output: MarginalPair::zeros(n_ch),
                jsi: jsi_means
                    .as_ref()
                    .map(|_| (Array2::zeros((n, n)), Array2::zeros((n, n)))),
            };
            let end = ((b + 1) * FRAMES_PER_BLOCK).min(cfg.n_frames);
            for f in b * FRAMES_PER_BLOCK..end {
                let fr = frame(f, &exp, jsi_means.as_ref(), cfg);
                acc.input.add(&fr.input);
                acc.output.add(&fr.output);
                if let (Some((ai, ao)), Some((fi, fo))) = (acc.jsi.as_mut(), fr.jsi) {
                    *ai += &fi;
                    *ao += &fo;
                }
            }
            acc
        })
        .collect();

    let mut acc_in = MarginalPair::zeros(n_ch);
    let mut acc_out = MarginalPair::zeros(n_ch);
    let mut acc_jsi = jsi_means
        .as_ref()
        .map(|_| (Array2::<f64>::zeros((n, n)), Array2::<f64>::zeros((n, n))));
    for b in blocks {
        acc_in.add(&b.input);
        acc_out.add(&b.output);
        if let (Some((ai, ao)), Some((bi, bo))) = (acc_jsi.as_mut(), b.jsi) {
            *ai += &bi;
            *ao += &bo;
        }
    }

    let scale = cfg.n_frames as f64 * cfg.integration_time_s;
    let ideal = exp.absorbed();
    let expected_absorbed = MarginalPair {
        signal: ideal.signal.iter().map(|v| v * scale).collect(),
        idler: ideal.idler.iter().map(|v| v * scale).collect(),
    };
    let peak_channels = exp.peak_channels();
    let signal = exp.signal_channels();
    let background_channels = if cfg.background_region.is_empty() {
        (0..n_ch).filter(|c| !signal.contains(c)).collect()
    } else {
        let mut v: Vec<usize> = cfg
            .background_region
            .iter()
            .flat_map(|&(a, b)| a..b.min(n_ch))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    if background_channels
        .iter()
        .any(|c| peak_channels.contains(c))
    {
        return Err(EtpaError::invalid(
            "noise.background_region",
            "overlaps the signal peak",
        ));
    }

    let absorbed = acc_in.minus(&acc_out);
    let snr = estimate_snr(&absorbed.signal, &peak_channels, &background_channels)?;
    Ok(MeasurementResult {
        channel_nm: exp.channel_nm.clone(),
        accumulated_jsi: acc_jsi.map(|(i, o)| NoisyJsi {
            absorbed: &i - &o,
            input: i,
            output: o,
        }),
        accumulated_in: acc_in,
        accumulated_out: acc_out,
        absorbed,
        expected_absorbed,
        peak_channels,
        background_channels,
        n_signal_channels: signal.len(),
        snr,
    })
}

/// Mean of `absorbed` over `peak` divided by its standard deviation over
/// `background`.
pub fn estimate_snr(absorbed: &[f64], peak: &[usize], background: &[usize]) -> Result<Snr> {
    if background.is_empty() {
        return Err(EtpaError::EmptyBackground);
    }
    if peak.is_empty() {
        return Err(EtpaError::invalid("noise.peak_region", "is empty"));
    }
    let mean = |idx: &[usize]| idx.iter().map(|&c| absorbed[c]).sum::<f64>() / idx.len() as f64;
    let signal = mean(peak);
    let bg_mean = mean(background);
    let var = background
        .iter()
        .map(|&c| (absorbed[c] - bg_mean).powi(2))
        .sum::<f64>()
        / background.len() as f64;
    let std = var.sqrt();
    let snr = if std > 0.0 {
        signal / std
    } else if signal > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(Snr {
        snr,
        snr_db: 20.0 * snr.log10(),
    })
}

/// Per-channel noise for `input` calibrated to `√(F·R_in)` over the channels
/// that carry signal.
pub fn calibrated_sigma(
    input: &BiphotonState,
    fano: f64,
    channel_width_nm: f64,
    integration_time_s: f64,
) -> Result<f64> {
    let exp = ExpectedSpectra::new(input, input, channel_width_nm)?;
    let n = exp.signal_channels().len();
    if n == 0 {
        return Err(EtpaError::EmptyInput);
    }
    Ok(calibrate_noise(
        input.total_rate(),
        fano,
        n,
        integration_time_s,
    ))
}
