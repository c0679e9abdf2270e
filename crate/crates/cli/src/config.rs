use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use tfr_core::cwt::Boundary;
use tfr_core::signal::{Signal, SignalFormat};
use tfr_core::wavelet::ExtremalParams;

use crate::units::{parse_frequency, parse_seconds};
use crate::{CwtFlags, ModeArg, StftFlags};

/// A number in base units, or a string with a unit suffix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    fn frequency(&self) -> Result<f64> {
        match self {
            Quantity::Number(x) => Ok(*x),
            Quantity::Text(s) => parse_frequency(s),
        }
    }

    fn seconds(&self) -> Result<f64> {
        match self {
            Quantity::Number(x) => Ok(*x),
            Quantity::Text(s) => parse_seconds(s),
        }
    }
}

/// Defaults read from `--config`. Every field is optional and command-line
/// flags take precedence. Fields a command does not use are ignored, so one
/// file can serve a whole pipeline.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub rate: Option<f64>,
    pub n: Option<usize>,
    pub format: Option<SignalFormat>,
    pub freq: Option<Quantity>,
    pub freq2: Option<Quantity>,
    pub amplitude: Option<f64>,
    pub at: Option<Quantity>,
    pub center: Option<Quantity>,
    pub width: Option<Quantity>,
    pub sigma: Option<Quantity>,
    pub hop: Option<usize>,
    pub n_fft: Option<usize>,
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub nu: Option<f64>,
    pub c: Option<f64>,
    pub epsilon: Option<f64>,
    pub a_min: Option<Quantity>,
    pub a_max: Option<Quantity>,
    pub voices: Option<usize>,
    pub boundary: Option<Boundary>,
    pub mode: Option<String>,
    pub eps_mag: Option<f64>,
    pub eps_jacobian: Option<f64>,
    pub range_db: Option<f64>,
    pub gamma: Option<f64>,
    pub channel: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Wav,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Periodic,
    ZeroPad,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Periodic => Boundary::Periodic,
            BoundaryArg::ZeroPad => Boundary::ZeroPad,
        }
    }
}

pub struct GenFlags {
    pub freq: Option<String>,
    pub freq2: Option<String>,
    pub amplitude: Option<f64>,
    pub at: Option<String>,
    pub center: Option<String>,
    pub width: Option<String>,
    pub n: Option<usize>,
    pub rate: Option<f64>,
    pub format: Option<FormatArg>,
}

#[derive(Debug, Serialize)]
pub struct GenSettings {
    pub n: usize,
    pub rate: f64,
    pub format: SignalFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn freq_of(flag: &Option<String>, file: &Option<Quantity>) -> Result<Option<f64>> {
    match (flag, file) {
        (Some(s), _) => parse_frequency(s).map(Some),
        (None, Some(q)) => q.frequency().map(Some),
        (None, None) => Ok(None),
    }
}

fn seconds_of(flag: &Option<String>, file: &Option<Quantity>) -> Result<Option<f64>> {
    match (flag, file) {
        (Some(s), _) => parse_seconds(s).map(Some),
        (None, Some(q)) => q.seconds().map(Some),
        (None, None) => Ok(None),
    }
}

/// Resolves `gen` settings. Flags that make no sense for `kind` are errors;
/// the same keys in a config file are ignored.
pub fn resolve_gen(kind: &str, flags: &GenFlags, file: &FileConfig) -> Result<GenSettings> {
    let allowed: &[&str] = match kind {
        "cosine" => &["freq", "amplitude"],
        "click" => &["at"],
        "chirp" | "two-tone" => &["freq", "freq2"],
        "gaussian-tone" => &["freq", "center", "width"],
        _ => bail!("unknown signal kind `{kind}`"),
    };
    let given = [
        ("freq", flags.freq.is_some()),
        ("freq2", flags.freq2.is_some()),
        ("amplitude", flags.amplitude.is_some()),
        ("at", flags.at.is_some()),
        ("center", flags.center.is_some()),
        ("width", flags.width.is_some()),
    ];
    for (name, present) in given {
        if present && !allowed.contains(&name) {
            bail!("--{name} does not apply to `gen {kind}`");
        }
    }
    let keep = |name: &str, v: Option<f64>| if allowed.contains(&name) { v } else { None };
    let n = pick(flags.n, file.n).unwrap_or(8192);
    let rate = pick(flags.rate, file.rate).unwrap_or(8000.0);
    if n == 0 {
        bail!("--n must be positive");
    }
    if !(rate > 0.0 && rate.is_finite()) {
        bail!("--rate must be positive, got {rate}");
    }
    let format = match flags.format {
        Some(FormatArg::Csv) => SignalFormat::Csv,
        Some(FormatArg::Wav) => SignalFormat::Wav,
        None => file.format.unwrap_or(SignalFormat::Csv),
    };
    Ok(GenSettings {
        n,
        rate,
        format,
        freq: keep("freq", freq_of(&flags.freq, &file.freq)?),
        freq2: keep("freq2", freq_of(&flags.freq2, &file.freq2)?),
        amplitude: keep("amplitude", pick(flags.amplitude, file.amplitude)),
        at: keep("at", seconds_of(&flags.at, &file.at)?),
        center: keep("center", seconds_of(&flags.center, &file.center)?),
        width: keep("width", seconds_of(&flags.width, &file.width)?),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StftSettings {
    pub sigma: f64,
    pub hop: Option<usize>,
    pub n_fft: Option<usize>,
}

pub fn resolve_stft(flags: &StftFlags, file: &FileConfig, rate: f64) -> Result<StftSettings> {
    let sigma = seconds_of(&flags.sigma, &file.sigma)?.unwrap_or(32.0 / rate);
    if !(sigma > 0.0 && sigma.is_finite()) {
        bail!("--sigma must be positive, got {sigma}");
    }
    let hop = pick(flags.hop, file.hop);
    if hop == Some(0) {
        bail!("--hop must be at least 1");
    }
    let n_fft = pick(flags.n_fft, file.n_fft);
    if matches!(n_fft, Some(n) if n < 2) {
        bail!("--n-fft must be at least 2");
    }
    Ok(StftSettings { sigma, hop, n_fft })
}

#[derive(Debug, Clone, Serialize)]
pub struct CwtSettings {
    pub wavelet: ExtremalParams,
    pub a_min: f64,
    pub a_max: f64,
    pub voices: usize,
    pub boundary: Boundary,
}

pub fn resolve_cwt(flags: &CwtFlags, file: &FileConfig, signal: &Signal) -> Result<CwtSettings> {
    let d = ExtremalParams::default();
    let wavelet = ExtremalParams {
        epsilon: pick(flags.epsilon, file.epsilon).unwrap_or(d.epsilon),
        alpha: pick(flags.alpha, file.alpha).unwrap_or(d.alpha),
        beta: pick(flags.beta, file.beta).unwrap_or(d.beta),
        kappa: pick(flags.kappa, file.kappa).unwrap_or(d.kappa),
        nu: pick(flags.nu, file.nu).unwrap_or(d.nu),
        c: pick(flags.c, file.c).unwrap_or(d.c),
    };
    wavelet.validate().context("invalid wavelet parameters")?;
    let rate = signal.sample_rate();
    let a_min = seconds_of(&flags.a_min, &file.a_min)?.unwrap_or(2.0 / rate);
    let a_max = match seconds_of(&flags.a_max, &file.a_max)? {
        Some(a) => a,
        None => (a_min * 128.0).min(signal.duration() / 4.0),
    };
    if !(a_min > 0.0 && a_min.is_finite()) {
        bail!("--a-min must be positive, got {a_min}");
    }
    if !(a_max > a_min && a_max.is_finite()) {
        bail!("--a-max ({a_max}) must exceed --a-min ({a_min})");
    }
    let voices = pick(flags.voices, file.voices).unwrap_or(16);
    if voices == 0 {
        bail!("--voices must be at least 1");
    }
    let boundary = match flags.boundary {
        Some(b) => b.into(),
        None => file.boundary.unwrap_or_default(),
    };
    Ok(CwtSettings {
        wavelet,
        a_min,
        a_max,
        voices,
        boundary,
    })
}

pub fn parse_mode(s: Option<&str>) -> Result<ModeArg> {
    match s.map(|s| s.replace('_', "-")).as_deref() {
        None | Some("grid-sum") => Ok(ModeArg::GridSum),
        Some("grid-sum-unweighted") => Ok(ModeArg::GridSumUnweighted),
        Some("full-kernel") => Ok(ModeArg::FullKernel),
        Some(other) => bail!("unknown reassignment mode `{other}`"),
    }
}
