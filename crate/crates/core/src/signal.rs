//! Uniformly sampled real signals, synthetic test inputs and signal file I/O.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real-valued, uniformly sampled time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: f64,
    start_time: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        Self::with_start(samples, sample_rate, 0.0)
    }

    pub fn with_start(samples: Vec<f64>, sample_rate: f64, start_time: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("no samples".into()));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if !start_time.is_finite() {
            return Err(Error::InvalidSignal("start time is not finite".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
            start_time,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample spacing in seconds.
    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Time of sample `i` in seconds.
    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Nyquist angular frequency, rad/s.
    pub fn nyquist(&self) -> f64 {
        PI * self.sample_rate
    }

    /// Discrete L² norm squared, with the sample spacing as quadrature weight.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.sample_rate
    }

    /// Returns a copy with every sample multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::with_start(
            self.samples.iter().map(|x| x * c).collect(),
            self.sample_rate,
            self.start_time,
        )
    }

    /// Shifts the content by `k` samples (positive = later), zero filled.
    pub fn shifted(&self, k: isize) -> Self {
        let n = self.samples.len() as isize;
        let samples = (0..n)
            .map(|i| {
                let j = i - k;
                if (0..n).contains(&j) {
                    self.samples[j as usize]
                } else {
                    0.0
                }
            })
            .collect();
        Self {
            samples,
            sample_rate: self.sample_rate,
            start_time: self.start_time,
        }
    }
}

fn check_rate(n: usize, rate: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidSignal("sample count must be positive".into()));
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::InvalidSignal(format!(
            "sample rate must be positive, got {rate}"
        )));
    }
    Ok(())
}

fn check_nyquist(freq: f64, rate: f64) -> Result<()> {
    let nyquist = PI * rate;
    if !freq.is_finite() || freq.abs() >= nyquist {
        return Err(Error::Aliasing { freq, nyquist });
    }
    Ok(())
}

/// `amplitude * cos(freq * t)` sampled at `t_i = i / rate`. `freq` in rad/s.
pub fn gen_cosine(freq: f64, amplitude: f64, n: usize, rate: f64) -> Result<Signal> {
    check_rate(n, rate)?;
    check_nyquist(freq, rate)?;
    if freq <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "cosine frequency must be positive, got {freq}"
        )));
    }
    let samples = (0..n).map(|i| amplitude * (freq * (i as f64 / rate)).cos()).collect();
    Signal::new(samples, rate)
}

/// Discrete unit impulse at `position` seconds.
///
/// The single nonzero sample has value `rate`, so that the sum of the samples
/// times the sample spacing is one.
pub fn gen_click(position: f64, n: usize, rate: f64) -> Result<Signal> {
    check_rate(n, rate)?;
    let duration = n as f64 / rate;
    if !(position.is_finite() && position >= 0.0 && position < duration) {
        return Err(Error::OutOfRange(format!(
            "click position {position} s outside [0, {duration}) s"
        )));
    }
    let index = ((position * rate).round() as usize).min(n - 1);
    let mut samples = vec![0.0; n];
    samples[index] = rate;
    Signal::new(samples, rate)
}

/// Linear sweep of the instantaneous frequency from `f0` to `f1` rad/s over
/// the signal duration.
pub fn gen_chirp(f0: f64, f1: f64, n: usize, rate: f64) -> Result<Signal> {
    check_rate(n, rate)?;
    check_nyquist(f0, rate)?;
    check_nyquist(f1, rate)?;
    let span = (n.max(2) - 1) as f64 / rate;
    let sweep = if n > 1 { (f1 - f0) / span } else { 0.0 };
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            (f0 * t + 0.5 * sweep * t * t).cos()
        })
        .collect();
    Signal::new(samples, rate)
}

/// Sum of two unit cosines at `f0` and `f1` rad/s.
pub fn gen_two_tone(f0: f64, f1: f64, n: usize, rate: f64) -> Result<Signal> {
    let a = gen_cosine(f0, 1.0, n, rate)?;
    let b = gen_cosine(f1, 1.0, n, rate)?;
    let samples = a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect();
    Signal::new(samples, rate)
}

/// Cosine at `freq` rad/s under a Gaussian envelope of standard deviation
/// `width` seconds centred at `center` seconds.
pub fn gen_gaussian_tone(freq: f64, center: f64, width: f64, n: usize, rate: f64) -> Result<Signal> {
    check_rate(n, rate)?;
    check_nyquist(freq, rate)?;
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "envelope width must be positive, got {width}"
        )));
    }
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let u = (t - center) / width;
            (-0.5 * u * u).exp() * (freq * t).cos()
        })
        .collect();
    Signal::new(samples, rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalFormat {
    Csv,
    Wav,
}

impl SignalFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" | "txt" => Some(Self::Csv),
            "wav" => Some(Self::Wav),
            _ => None,
        }
    }
}

const RATE_TAG: &str = "# sample_rate=";
const START_TAG: &str = "# start_time=";

/// Reads a signal. CSV files carry one sample per line; lines starting with
/// `#` are comments, except `# sample_rate=` and `# start_time=` which are
/// honoured. `rate` overrides (or supplies) the sample rate.
pub fn read_signal(path: &Path, format: SignalFormat, rate: Option<f64>) -> Result<Signal> {
    match format {
        SignalFormat::Csv => read_csv_signal(path, rate),
        SignalFormat::Wav => read_wav_signal(path, rate),
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn read_csv_signal(path: &Path, rate: Option<f64>) -> Result<Signal> {
    let text = fs::read_to_string(path)?;
    let mut samples = Vec::new();
    let mut file_rate = None;
    let mut start = 0.0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(v) = line.strip_prefix(RATE_TAG) {
            file_rate = Some(
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| malformed(path, format!("line {}: {e}", lineno + 1)))?,
            );
            continue;
        }
        if let Some(v) = line.strip_prefix(START_TAG) {
            start = v
                .trim()
                .parse::<f64>()
                .map_err(|e| malformed(path, format!("line {}: {e}", lineno + 1)))?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if line.contains(',') || line.contains(';') || line.ends_with('i') || line.ends_with('j') {
            return Err(Error::ComplexInput(format!(
                "{} line {}: expected one real sample per line",
                path.display(),
                lineno + 1
            )));
        }
        let x = line
            .parse::<f64>()
            .map_err(|e| malformed(path, format!("line {}: {e}", lineno + 1)))?;
        samples.push(x);
    }
    let rate = rate
        .or(file_rate)
        .ok_or_else(|| malformed(path, "no sample rate in file and none supplied"))?;
    Signal::with_start(samples, rate, start)
}

fn read_wav_signal(path: &Path, rate: Option<f64>) -> Result<Signal> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedWav(format!(
            "{} channels, only mono is supported",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedWav(format!(
            "{:?} {}-bit, only 16-bit PCM is supported",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / WAV_FULL_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Signal::new(samples, rate.unwrap_or(spec.sample_rate as f64))
}

const WAV_FULL_SCALE: f64 = 32767.0;

/// Writes a signal. CSV keeps every sample bit-exact; WAV quantizes to
/// 16-bit PCM and requires an integral sample rate and samples in [-1, 1].
pub fn write_signal(signal: &Signal, path: &Path, format: SignalFormat) -> Result<()> {
    match format {
        SignalFormat::Csv => {
            let mut w = BufWriter::new(fs::File::create(path)?);
            writeln!(w, "{RATE_TAG}{}", signal.sample_rate)?;
            if signal.start_time != 0.0 {
                writeln!(w, "{START_TAG}{}", signal.start_time)?;
            }
            for x in &signal.samples {
                writeln!(w, "{x}")?;
            }
            w.flush()?;
            Ok(())
        }
        SignalFormat::Wav => {
            let rate = signal.sample_rate;
            if rate.fract() != 0.0 || rate > u32::MAX as f64 {
                return Err(Error::UnsupportedWav(format!("sample rate {rate} is not an integer")));
            }
            if let Some(i) = signal.samples.iter().position(|x| x.abs() > 1.0) {
                return Err(Error::OutOfRange(format!("sample {i} exceeds WAV full scale")));
            }
            let spec = hound::WavSpec {
                channels: 1,
                sample_rate: rate as u32,
                bits_per_sample: 16,
                sample_format: hound::SampleFormat::Int,
            };
            let mut w = hound::WavWriter::create(path, spec)?;
            for x in &signal.samples {
                w.write_sample((x * WAV_FULL_SCALE).round() as i16)?;
            }
            w.finalize()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_cosine_is_silent() {
        let s = gen_cosine(100.0, 0.0, 64, 1000.0).unwrap();
        assert!(s.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cosine_starts_at_amplitude() {
        let s = gen_cosine(100.0, 1.0, 64, 1000.0).unwrap();
        assert_eq!(s.samples()[0], 1.0);
    }

    #[test]
    fn cosine_440_has_small_mean() {
        // direct summation of the sampled tone
        let s = gen_cosine(2.0 * PI * 440.0, 1.0, 16000, 16000.0).unwrap();
        let mean: f64 = s.samples().iter().sum::<f64>() / s.len() as f64;
        assert!(mean.abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn cosine_rejects_aliasing() {
        let err = gen_cosine(PI * 1000.0, 1.0, 16, 1000.0).unwrap_err();
        assert!(matches!(err, Error::Aliasing { .. }));
    }

    #[test]
    fn click_is_unit_impulse() {
        let s = gen_click(0.0, 8, 1.0).unwrap();
        assert_eq!(s.samples(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let s = gen_click(0.5, 8, 8.0).unwrap();
        let nz: Vec<_> = s.samples().iter().enumerate().filter(|(_, &x)| x != 0.0).collect();
        assert_eq!(nz, vec![(4, &8.0)]);
    }

    #[test]
    fn click_outside_duration_is_rejected() {
        assert!(gen_click(1.0, 8, 8.0).is_err());
        assert!(gen_click(-0.1, 8, 8.0).is_err());
    }

    #[test]
    fn degenerate_chirp_is_cosine() {
        let a = gen_chirp(300.0, 300.0, 500, 2000.0).unwrap();
        let b = gen_cosine(300.0, 1.0, 500, 2000.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chirp_midpoint_frequency() {
        // finite difference of the analytic phase at the midpoint sample
        let (f0, f1, n, rate) = (200.0, 1200.0, 4001, 8000.0);
        let span = (n - 1) as f64 / rate;
        let phase = |t: f64| f0 * t + 0.5 * (f1 - f0) / span * t * t;
        let tm = span / 2.0;
        let h = 1e-5;
        let inst = (phase(tm + h) - phase(tm - h)) / (2.0 * h);
        assert!((inst - 0.5 * (f0 + f1)).abs() < 1e-6);
        assert!(gen_chirp(f0, f1, n, rate).is_ok());
    }

    #[test]
    fn chirp_rejects_aliasing() {
        assert!(gen_chirp(PI * 2000.0 + 1.0, 100.0, 100, 2000.0).is_err());
    }

    #[test]
    fn csv_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = gen_chirp(10.0, 900.0, 777, 3000.0).unwrap();
        write_signal(&s, &p, SignalFormat::Csv).unwrap();
        let r = read_signal(&p, SignalFormat::Csv, None).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn wav_roundtrip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        let s = gen_cosine(2.0 * PI * 440.0, 0.9, 4000, 16000.0).unwrap();
        write_signal(&s, &p, SignalFormat::Wav).unwrap();
        let r = read_signal(&p, SignalFormat::Wav, None).unwrap();
        assert_eq!(r.sample_rate(), 16000.0);
        let err = s
            .samples()
            .iter()
            .zip(r.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 2f64.powi(-15), "max error {err}");
    }

    #[test]
    fn complex_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        fs::write(&p, "# sample_rate=10\n1.0,2.0\n").unwrap();
        assert!(matches!(
            read_signal(&p, SignalFormat::Csv, None),
            Err(Error::ComplexInput(_))
        ));
    }

    #[test]
    fn malformed_csv_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, "1.0\nabc\n").unwrap();
        assert!(matches!(
            read_signal(&p, SignalFormat::Csv, Some(10.0)),
            Err(Error::Malformed { .. })
        ));
    }

    #[test]
    fn stereo_wav_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            read_signal(&p, SignalFormat::Wav, None),
            Err(Error::UnsupportedWav(_))
        ));
    }

    #[test]
    fn invariants_enforced() {
        assert!(Signal::new(vec![], 1.0).is_err());
        assert!(Signal::new(vec![1.0], 0.0).is_err());
        assert!(Signal::new(vec![f64::NAN], 1.0).is_err());
    }
}
