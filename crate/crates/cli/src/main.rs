#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod render;
mod units;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use num_complex::Complex64;
use serde_json::{json, Value};
use tfr_core::cwt::{cwt_with_derivatives, CwtParams, ScaleAxis};
use tfr_core::grid::{read_grid, write_grid, AxisKind, ComplexGrid};
use tfr_core::parallel::Execution;
use tfr_core::scalogram::{
    extract_holomorphic, log_derivatives, map_amplitude, map_holomorphic, map_t, map_tbeta, reassign_scalogram,
    ScaleTimeMap, ScalogramOptions,
};
use tfr_core::signal::{
    gen_chirp, gen_click, gen_cosine, gen_gaussian_tone, gen_two_tone, read_signal, write_signal, Signal, SignalFormat,
};
use tfr_core::stft::{stft_with_aux, OmegaAxis, StftParams};
use tfr_core::stft_reassign::{phase_gradients, reassign_spectrogram, reassignment_map, ReassignMode, ReassignOptions};
use tfr_core::verify::{run_suite, VerifyOptions};
use tfr_core::wavelet::AnalyticWavelet;
use tfr_core::window::Window;

use config::{CwtSettings, FileConfig, StftSettings};

#[derive(Parser)]
#[command(name = "tfr", version, about = "Time-frequency and time-scale reassignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Input: a signal (.csv or .wav), or a grid prefix for `render`.
    #[arg(long = "in", value_name = "PATH")]
    input: Option<PathBuf>,
    /// Prefix of the output files.
    #[arg(long, value_name = "PREFIX")]
    out_prefix: Option<PathBuf>,
    /// JSON file with defaults; flags given on the command line win.
    #[arg(long, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Args, Clone, Default)]
pub struct StftFlags {
    /// Sample rate in Hz, overriding the input file.
    #[arg(long)]
    rate: Option<f64>,
    /// Gaussian window width σ in seconds (`ms` suffix accepted).
    #[arg(long)]
    sigma: Option<String>,
    /// Column spacing in samples.
    #[arg(long)]
    hop: Option<usize>,
    /// FFT length; the frequency axis holds its non-negative bins.
    #[arg(long)]
    n_fft: Option<usize>,
}

#[derive(Args, Clone, Default)]
pub struct CwtFlags {
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Smallest scale in seconds.
    #[arg(long)]
    a_min: Option<String>,
    /// Largest scale in seconds.
    #[arg(long)]
    a_max: Option<String>,
    /// Scales per octave.
    #[arg(long)]
    voices: Option<usize>,
    #[arg(long, value_enum)]
    boundary: Option<config::BoundaryArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Cosine,
    Click,
    Chirp,
    TwoTone,
    GaussianTone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Stft,
    #[value(name = "cwt-T")]
    CwtT,
    #[value(name = "cwt-Tbeta")]
    CwtTbeta,
    #[value(name = "cwt-amplitude")]
    CwtAmplitude,
    #[value(name = "cwt-holomorphic")]
    CwtHolomorphic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    GridSum,
    GridSumUnweighted,
    FullKernel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Channel {
    Magnitude,
    Phase,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test signal.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        /// Tone frequency, or the start of a chirp (rad/s, or with hz suffix).
        #[arg(long)]
        freq: Option<String>,
        /// Second tone, or the end of a chirp.
        #[arg(long)]
        freq2: Option<String>,
        #[arg(long)]
        amplitude: Option<f64>,
        /// Click position in seconds.
        #[arg(long)]
        at: Option<String>,
        /// Envelope centre in seconds.
        #[arg(long)]
        center: Option<String>,
        /// Envelope standard deviation in seconds.
        #[arg(long)]
        width: Option<String>,
        /// Number of samples.
        #[arg(long)]
        n: Option<usize>,
        /// Sample rate in Hz.
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long, value_enum)]
        format: Option<config::FormatArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Short-time Fourier transform with a Gaussian window.
    Stft {
        #[command(flatten)]
        flags: StftFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Continuous wavelet transform with an extremal wavelet.
    Cwt {
        #[arg(long)]
        rate: Option<f64>,
        #[command(flatten)]
        flags: CwtFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Reassigned spectrogram or scalogram, plus the map that produced it.
    Reassign {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Magnitude threshold relative to the peak.
        #[arg(long)]
        eps_mag: Option<f64>,
        /// Jacobian clamp for the full kernel.
        #[arg(long)]
        eps_jacobian: Option<f64>,
        #[command(flatten)]
        stft: StftFlags,
        #[command(flatten)]
        cwt: CwtFlags,
        #[command(flatten)]
        common: Common,
    },
    /// Render a grid as a PGM image.
    Render {
        /// Dynamic range below the peak, in dB.
        #[arg(long)]
        range_db: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        /// `phase` also writes `<prefix>.phase.pgm`.
        #[arg(long, value_enum)]
        channel: Option<Channel>,
        #[command(flatten)]
        common: Common,
    },
    /// Run verification checks; exits nonzero if any fails.
    Verify {
        /// cosine, click, structure, methods, concentration, covariance,
        /// holomorphy, roundtrip, tangency or all.
        #[arg(default_value = "all")]
        suite: String,
        /// Shape exponent for the structure check.
        #[arg(long)]
        c: Option<f64>,
        /// Print the JSON report instead of text.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen {
            kind,
            freq,
            freq2,
            amplitude,
            at,
            center,
            width,
            n,
            rate,
            format,
            common,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            cmd_gen(
                kind,
                config::GenFlags {
                    freq,
                    freq2,
                    amplitude,
                    at,
                    center,
                    width,
                    n,
                    rate,
                    format,
                },
                &file,
                &common,
            )?;
        }
        Command::Stft { flags, common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let execution = setup_threads(common.threads)?;
            cmd_stft(&flags, &file, &common, execution)?;
        }
        Command::Cwt { rate, flags, common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let execution = setup_threads(common.threads)?;
            cmd_cwt(rate, &flags, &file, &common, execution)?;
        }
        Command::Reassign {
            method,
            mode,
            eps_mag,
            eps_jacobian,
            stft,
            cwt,
            common,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let execution = setup_threads(common.threads)?;
            let r = ReassignArgs {
                method,
                mode,
                eps_mag,
                eps_jacobian,
            };
            cmd_reassign(&r, &stft, &cwt, &file, &common, execution)?;
        }
        Command::Render {
            range_db,
            gamma,
            channel,
            common,
        } => {
            let file = FileConfig::load(common.config.as_deref())?;
            cmd_render(range_db, gamma, channel, &file, &common)?;
        }
        Command::Verify { suite, c, json, common } => {
            let file = FileConfig::load(common.config.as_deref())?;
            let execution = setup_threads(common.threads)?;
            return cmd_verify(&suite, c.or(file.c).unwrap_or(1.0), json, &common, execution);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn setup_threads(threads: Option<usize>) -> Result<Execution> {
    match threads {
        None => Ok(Execution::Parallel),
        Some(0) => bail!("--threads must be at least 1"),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .context("configuring the thread pool")?;
            #[cfg(not(feature = "parallel"))]
            let _ = n;
            Ok(Execution::Parallel)
        }
    }
}

fn out_prefix(common: &Common) -> Result<&Path> {
    common
        .out_prefix
        .as_deref()
        .ok_or_else(|| anyhow!("--out-prefix is required"))
}

fn input_path(common: &Common) -> Result<&Path> {
    let p = common.input.as_deref().ok_or_else(|| anyhow!("--in is required"))?;
    Ok(p)
}

fn load_signal(common: &Common, rate: Option<f64>) -> Result<Signal> {
    let path = input_path(common)?;
    if !path.exists() {
        bail!("input file {} does not exist", path.display());
    }
    let format = SignalFormat::from_path(path)
        .ok_or_else(|| anyhow!("cannot tell the format of {} (expected .csv or .wav)", path.display()))?;
    read_signal(path, format, rate).with_context(|| format!("reading {}", path.display()))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_gen(kind: GenKind, flags: config::GenFlags, file: &FileConfig, common: &Common) -> Result<()> {
    let resolved = config::resolve_gen(kind_name(kind), &flags, file)?;
    let prefix = out_prefix(common)?;
    let (n, rate) = (resolved.n, resolved.rate);
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| anyhow!("`gen {}` needs --{name}", kind_name(kind)));
    let signal = match kind {
        GenKind::Cosine => gen_cosine(need(resolved.freq, "freq")?, resolved.amplitude.unwrap_or(1.0), n, rate)?,
        GenKind::Click => gen_click(need(resolved.at, "at")?, n, rate)?,
        GenKind::Chirp => gen_chirp(need(resolved.freq, "freq")?, need(resolved.freq2, "freq2")?, n, rate)?,
        GenKind::TwoTone => gen_two_tone(need(resolved.freq, "freq")?, need(resolved.freq2, "freq2")?, n, rate)?,
        GenKind::GaussianTone => gen_gaussian_tone(
            need(resolved.freq, "freq")?,
            need(resolved.center, "center")?,
            need(resolved.width, "width")?,
            n,
            rate,
        )?,
    };
    let ext = match resolved.format {
        SignalFormat::Csv => ".csv",
        SignalFormat::Wav => ".wav",
    };
    let path = with_suffix(prefix, ext);
    write_signal(&signal, &path, resolved.format).with_context(|| format!("writing {}", path.display()))?;
    let meta = json!({ "command": "gen", "kind": kind_name(kind), "config": resolved, "output": path });
    fs::write(with_suffix(prefix, ".gen.json"), serde_json::to_string_pretty(&meta)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn kind_name(kind: GenKind) -> &'static str {
    match kind {
        GenKind::Cosine => "cosine",
        GenKind::Click => "click",
        GenKind::Chirp => "chirp",
        GenKind::TwoTone => "two-tone",
        GenKind::GaussianTone => "gaussian-tone",
    }
}

fn stft_setup(
    flags: &StftFlags,
    file: &FileConfig,
    signal: &Signal,
    execution: Execution,
) -> Result<(Window, StftParams, StftSettings)> {
    let settings = config::resolve_stft(flags, file, signal.sample_rate())?;
    let h = Window::gaussian(settings.sigma)?;
    let mut p = StftParams::for_window(&h, signal.sample_rate()).with_execution(execution);
    p.hop = settings.hop.unwrap_or(p.hop);
    if let Some(n_fft) = settings.n_fft {
        p.omega = OmegaAxis::fft_half(n_fft, signal.sample_rate());
    }
    let settings = StftSettings {
        hop: Some(p.hop),
        n_fft: Some((2.0 * std::f64::consts::PI * signal.sample_rate() / p.omega.step).round() as usize),
        ..settings
    };
    Ok((h, p, settings))
}

fn cwt_setup(
    flags: &CwtFlags,
    file: &FileConfig,
    signal: &Signal,
    execution: Execution,
) -> Result<(AnalyticWavelet, CwtParams, CwtSettings)> {
    let settings = config::resolve_cwt(flags, file, signal)?;
    let w = AnalyticWavelet::new(settings.wavelet)?;
    let axis = ScaleAxis::spanning(settings.a_min, settings.a_max, settings.voices)?;
    let p = CwtParams::new(axis)
        .with_boundary(settings.boundary)
        .with_execution(execution);
    Ok((w, p, settings))
}

fn source_meta(common: &Common) -> Value {
    json!(common.input.as_ref().map(|p| p.display().to_string()))
}

fn cmd_stft(flags: &StftFlags, file: &FileConfig, common: &Common, execution: Execution) -> Result<()> {
    let prefix = out_prefix(common)?;
    let signal = load_signal(common, flags.rate.or(file.rate))?;
    let (h, p, settings) = stft_setup(flags, file, &signal, execution)?;
    let mut grid = tfr_core::stft::stft(&signal, &h, &p)?;
    grid.metadata.insert(
        "config".into(),
        json!({ "command": "stft", "input": source_meta(common), "stft": settings }),
    );
    write_grid(&grid, prefix)?;
    println!("wrote {} x {} grid to {}.*", grid.rows(), grid.cols(), prefix.display());
    Ok(())
}

fn cmd_cwt(
    rate: Option<f64>,
    flags: &CwtFlags,
    file: &FileConfig,
    common: &Common,
    execution: Execution,
) -> Result<()> {
    let prefix = out_prefix(common)?;
    let signal = load_signal(common, rate.or(file.rate))?;
    let (w, p, settings) = cwt_setup(flags, file, &signal, execution)?;
    let mut grid = tfr_core::cwt::cwt(&signal, &w, &p)?;
    if let Some(warn) = grid.metadata.get("warning") {
        eprintln!("warning: {}", warn.as_str().unwrap_or_default());
    }
    grid.metadata.insert(
        "config".into(),
        json!({ "command": "cwt", "input": source_meta(common), "cwt": settings }),
    );
    write_grid(&grid, prefix)?;
    println!("wrote {} x {} grid to {}.*", grid.rows(), grid.cols(), prefix.display());
    Ok(())
}

struct ReassignArgs {
    method: Method,
    mode: Option<ModeArg>,
    eps_mag: Option<f64>,
    eps_jacobian: Option<f64>,
}

/// Writes a map as two grids: `<prefix>.map` holds (second-axis target, t̃)
/// in (re, im) and `<prefix>.map.aux` holds (jacobian, mask as 0/1).
#[allow(clippy::too_many_arguments)]
fn write_map(
    prefix: &Path,
    times: &[f64],
    second: &[f64],
    kind: AxisKind,
    target: &Array2<f64>,
    t_hat: &Array2<f64>,
    jacobian: &Array2<f64>,
    mask: &Array2<bool>,
    meta: &Value,
) -> Result<()> {
    let on = |ix: (usize, usize), v: f64| if mask[ix] && v.is_finite() { v } else { 0.0 };
    let main = Array2::from_shape_fn(mask.dim(), |ix| Complex64::new(on(ix, target[ix]), on(ix, t_hat[ix])));
    let aux = Array2::from_shape_fn(mask.dim(), |ix| {
        Complex64::new(on(ix, jacobian[ix]), if mask[ix] { 1.0 } else { 0.0 })
    });
    let mut g = ComplexGrid::new(main, times.to_vec(), second.to_vec(), kind)?;
    let mut a = ComplexGrid::new(aux, times.to_vec(), second.to_vec(), kind)?;
    if let Value::Object(m) = meta {
        g.metadata = m.clone();
        a.metadata = m.clone();
    }
    write_grid(&g, &with_suffix(prefix, ".map"))?;
    write_grid(&a, &with_suffix(prefix, ".map.aux"))?;
    Ok(())
}

fn cmd_reassign(
    r: &ReassignArgs,
    stft_flags: &StftFlags,
    cwt_flags: &CwtFlags,
    file: &FileConfig,
    common: &Common,
    execution: Execution,
) -> Result<()> {
    let prefix = out_prefix(common)?;
    let rate = stft_flags.rate.or(file.rate);
    let mode = match r.mode {
        Some(m) => m,
        None => config::parse_mode(file.mode.as_deref())?,
    };
    let eps_mag = r.eps_mag.or(file.eps_mag).unwrap_or(1e-6);
    let eps_jacobian = r.eps_jacobian.or(file.eps_jacobian).unwrap_or(1e-3);
    if !(eps_mag > 0.0 && eps_mag < 1.0) {
        bail!("--eps-mag must lie in (0, 1), got {eps_mag}");
    }
    if !(eps_jacobian > 0.0) {
        bail!("--eps-jacobian must be positive, got {eps_jacobian}");
    }
    let signal = load_signal(common, rate)?;
    if r.method == Method::Stft {
        let core_mode = match mode {
            ModeArg::GridSum => ReassignMode::GridSum,
            ModeArg::FullKernel => ReassignMode::FullKernel,
            ModeArg::GridSumUnweighted => bail!("grid-sum-unweighted is only available for scalograms"),
        };
        let (h, p, settings) = stft_setup(stft_flags, file, &signal, execution)?;
        let bundle = stft_with_aux(&signal, &h, &p)?;
        let pg = phase_gradients(&bundle, eps_mag);
        let field = reassignment_map(&pg);
        let opts = ReassignOptions {
            mode: core_mode,
            eps_jacobian,
            execution,
        };
        let mut out = reassign_spectrogram(&bundle.s, &field, &h, &opts, None)?;
        let cfg = json!({
            "command": "reassign", "method": "stft", "input": source_meta(common),
            "mode": opts.mode, "eps_mag": eps_mag, "eps_jacobian": eps_jacobian, "stft": settings,
        });
        out.metadata.insert("config".into(), cfg.clone());
        write_grid(&out, prefix)?;
        let meta = json!({ "method": "stft", "channels": {"re": "omega_hat", "im": "t_hat"}, "config": cfg });
        write_map(
            prefix,
            &field.times,
            &field.omegas,
            AxisKind::Frequency,
            &field.w_hat,
            &field.t_hat,
            &field.jacobian,
            &field.mask,
            &meta,
        )?;
        println!("wrote reassigned spectrogram and map to {}.*", prefix.display());
        return Ok(());
    }
    let (w, p, settings) = cwt_setup(cwt_flags, file, &signal, execution)?;
    let params = settings.wavelet;
    let bundle = cwt_with_derivatives(&signal, &w, &p)?;
    let ld = log_derivatives(&bundle, eps_mag);
    let map: ScaleTimeMap = match r.method {
        Method::CwtT => map_t(&ld),
        Method::CwtTbeta => map_tbeta(&ld, &params),
        Method::CwtAmplitude => map_amplitude(&ld, &params),
        Method::CwtHolomorphic => map_holomorphic(&extract_holomorphic(&bundle.w, &params, eps_mag)?),
        Method::Stft => unreachable!(),
    };
    let core_mode = match mode {
        ModeArg::GridSum => tfr_core::scalogram::ScalogramMode::GridSum,
        ModeArg::GridSumUnweighted => tfr_core::scalogram::ScalogramMode::GridSumUnweighted,
        ModeArg::FullKernel => tfr_core::scalogram::ScalogramMode::FullKernel,
    };
    let opts = ScalogramOptions {
        mode: core_mode,
        eps_jacobian,
        execution,
    };
    let mut out = reassign_scalogram(&bundle.w, &map, &w, &opts, None)?;
    let mut warnings = Vec::new();
    if let Some(v) = bundle.w.metadata.get("warning").and_then(|v| v.as_str()) {
        warnings.push(v.to_string());
    }
    if matches!(r.method, Method::CwtAmplitude | Method::CwtHolomorphic) && (params.c != 1.0 || params.nu != 1.0) {
        warnings.push(format!(
            "{} map relies on the structure equation, which is exact only for c = 1, nu = 1 (got c = {}, nu = {})",
            map.method.tag(),
            params.c,
            params.nu
        ));
    }
    let cfg = json!({
        "command": "reassign", "method": map.method.tag(), "input": source_meta(common),
        "mode": opts.mode, "eps_mag": eps_mag, "eps_jacobian": eps_jacobian, "cwt": settings,
    });
    out.metadata.insert("config".into(), cfg.clone());
    if !warnings.is_empty() {
        out.metadata.insert("warning".into(), json!(warnings.join("; ")));
        for w in &warnings {
            eprintln!("warning: {w}");
        }
    }
    write_grid(&out, prefix)?;
    let inv: Array2<f64> = map.inv_a_hat.mapv(|x| 1.0 / x);
    let mut meta = json!({ "method": map.method.tag(), "channels": {"re": "a_hat", "im": "t_hat"}, "config": cfg });
    if !warnings.is_empty() {
        meta["warning"] = json!(warnings.join("; "));
    }
    write_map(
        prefix,
        &map.times,
        &map.scales,
        AxisKind::Scale,
        &inv,
        &map.t_hat,
        &map.jacobian,
        &map.mask,
        &meta,
    )?;
    println!("wrote reassigned scalogram and map to {}.*", prefix.display());
    Ok(())
}

fn cmd_render(
    range_db: Option<f64>,
    gamma: Option<f64>,
    channel: Option<Channel>,
    file: &FileConfig,
    common: &Common,
) -> Result<()> {
    let prefix = out_prefix(common)?;
    let input = input_path(common)?;
    let range_db = range_db.or(file.range_db).unwrap_or(60.0);
    let gamma = gamma.or(file.gamma).unwrap_or(1.0);
    let channel = match channel {
        Some(c) => c,
        None => match file.channel.as_deref() {
            None | Some("magnitude") => Channel::Magnitude,
            Some("phase") => Channel::Phase,
            Some(other) => bail!("unknown channel `{other}`"),
        },
    };
    if !(range_db > 0.0 && range_db.is_finite()) {
        bail!("--range-db must be positive, got {range_db}");
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        bail!("--gamma must be positive, got {gamma}");
    }
    let grid = read_grid(input).with_context(|| format!("reading grid {}", input.display()))?;
    let path = with_suffix(prefix, ".pgm");
    render::magnitude_image(&grid, range_db, gamma).write_pgm(&path)?;
    println!("wrote {}", path.display());
    if channel == Channel::Phase {
        let path = with_suffix(prefix, ".phase.pgm");
        render::phase_image(&grid, range_db).write_pgm(&path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_verify(suite: &str, c: f64, json_out: bool, common: &Common, execution: Execution) -> Result<ExitCode> {
    if !(c >= 1.0 && c.is_finite()) {
        bail!("--c must be at least 1, got {c}");
    }
    let reports = run_suite(suite, &VerifyOptions { c, execution })?;
    let failed = reports.iter().filter(|r| !r.passed).count();
    let doc = json!({ "suite": suite, "c": c, "passed": failed == 0, "checks": reports });
    if json_out {
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        for r in &reports {
            println!("{}", r.summary_line());
            for n in &r.notes {
                println!("    note: {n}");
            }
        }
        println!("{} of {} checks passed", reports.len() - failed, reports.len());
    }
    if let Some(prefix) = &common.out_prefix {
        fs::write(with_suffix(prefix, ".json"), serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
