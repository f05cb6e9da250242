//! `pnpuct` command-line front end.
//!
//! Every subcommand option can also come from the file given with the global
//! `--config` flag, under a table named after the subcommand (`[seq.gen]`,
//! `[puct.compress]`, ...). Flags on the command line win. `pipeline run`
//! reads the pipeline tables of the same file (`output_dir`, `[code]`,
//! `[timing]`, ...).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pnpuct::codes::{build_code, format_descriptor, pacf, parse_descriptor, CodeKind, CodeLength, Sign};
use pnpuct::compression::{
    compress_stack_with, decimate_to_bit_rate_with, snr_metric, Decimation, Normalization, SteadyState,
};
use pnpuct::dc::remove_dc_stack;
use pnpuct::pipeline::{run_pipeline, PipelineConfig};
use pnpuct::stack::{export_pixel_trace, export_slice, read_stack, write_stack, Region};
use pnpuct::thermal::{simulate_stack, SceneConfig};
use pnpuct::waveform::{build_physical_bipolar, build_unipolar, Timing};
use pnpuct::{PnCode, ThermogramStack, CODE_TABLE_VERSION, FORMAT_VERSION};

#[derive(Parser)]
#[command(name = "pnpuct", about = "Pseudo-noise pulse-compression thermography")]
struct Cli {
    /// TOML file with default option values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Noise seed for commands that simulate.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pseudo-noise codes.
    #[command(subcommand)]
    Seq(SeqCommand),
    /// Excitation waveforms.
    #[command(subcommand)]
    Wave(WaveCommand),
    /// Thermal simulation.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Step-heating trend removal.
    #[command(subcommand)]
    Dc(DcCommand),
    /// Pulse compression.
    #[command(subcommand)]
    Puct(PuctCommand),
    /// Slice and pixel exports.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Figures of merit.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// End-to-end runs.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
}

#[derive(Subcommand)]
enum SeqCommand {
    /// Writes a code descriptor.
    Gen(SeqGen),
    /// Checks the autocorrelation of a code descriptor.
    Verify(SeqVerify),
}

#[derive(Subcommand)]
enum WaveCommand {
    /// Writes the unipolar excitation as CSV (and optionally as a stack).
    Gen(WaveGen),
}

#[derive(Subcommand)]
enum SimCommand {
    /// Simulates a thermogram stack for a scene.
    Run(SimRun),
}

#[derive(Subcommand)]
enum DcCommand {
    /// Fits and removes the DC trend of every pixel.
    Remove(DcRemove),
}

#[derive(Subcommand)]
enum PuctCommand {
    /// Matched-filters a DC-removed stack.
    Compress(PuctCompress),
    /// Keeps one frame per bit.
    Decimate(PuctDecimate),
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Exports one frame as PGM, CSV and scale sidecar.
    Slice(ReportSlice),
    /// Exports one pixel trace as CSV.
    Pixel(ReportPixel),
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Contrast-to-noise ratio between two regions.
    Snr(MetricsSnr),
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Runs every stage from the pipeline tables of the config file.
    Run(PipelineRun),
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeqGen {
    /// MLS, LS, MLS_PLUS, LS_PLUS or LS_4PLUS.
    #[arg(long)]
    kind: Option<String>,
    /// Code length.
    #[arg(long)]
    n_bit: Option<usize>,
    /// MLS register order, instead of --n-bit.
    #[arg(long)]
    order: Option<u32>,
    /// Replacement for the Legendre zero (LS_4PLUS), +1 or -1.
    #[arg(long, allow_hyphen_values = true)]
    sign: Option<i64>,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeqVerify {
    /// Code descriptor file.
    #[arg(long)]
    code: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimingArgs {
    #[arg(long)]
    t_bit: Option<f64>,
    #[arg(long)]
    fps: Option<f64>,
    /// Code periods (default 2).
    #[arg(long)]
    n_per: Option<usize>,
    /// Source amplitude (default 1).
    #[arg(long)]
    amplitude: Option<f64>,
}

// No deny_unknown_fields here: serde does not support it next to flatten.
#[derive(Args, Serialize, Deserialize)]
struct WaveGen {
    #[arg(long)]
    code: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    timing: TimingArgs,
    /// CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional 1x1 stack output.
    #[arg(long)]
    stack: Option<PathBuf>,
}

// No deny_unknown_fields here: serde does not support it next to flatten.
#[derive(Args, Serialize, Deserialize)]
struct SimRun {
    /// Scene TOML file.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    code: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    timing: TimingArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DcRemove {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Code descriptor; taken from the stack metadata if absent.
    #[arg(long)]
    code: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV of per-pixel fit coefficients.
    #[arg(long)]
    fits: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PuctCompress {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Code descriptor; taken from the stack metadata if absent.
    #[arg(long)]
    code: Option<PathBuf>,
    /// Bit duration; taken from the stack metadata if absent.
    #[arg(long)]
    t_bit: Option<f64>,
    /// RAW, PER_GAIN or PER_LENGTH.
    #[arg(long)]
    normalization: Option<String>,
    /// Use one steady period instead of averaging them all.
    #[arg(long)]
    steady_period: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PuctDecimate {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Bit duration; taken from the stack metadata if absent.
    #[arg(long)]
    t_bit: Option<f64>,
    /// FIRST_FRAME (default) or BIN_AVERAGE.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportSlice {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Frame index.
    #[arg(long)]
    index: Option<usize>,
    /// Time in seconds, instead of --index.
    #[arg(long)]
    time_s: Option<f64>,
    /// Output stem; `.pgm`, `.csv` and `.scale.txt` are appended.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportPixel {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    x: Option<usize>,
    #[arg(long)]
    y: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsSnr {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Signal region `x0,y0,x1,y1` (half-open).
    #[arg(long)]
    signal: Option<String>,
    /// Reference region `x0,y0,x1,y1` (half-open).
    #[arg(long)]
    reference: Option<String>,
}

#[derive(Args)]
struct PipelineRun {
    /// Pipeline config; defaults to the global --config file.
    file: Option<PathBuf>,
}

/// Tables of the `--config` file that belong to subcommands rather than to
/// the pipeline.
const CLI_TABLES: [&str; 6] = ["seq", "wave", "sim", "dc", "puct", "metrics"];
const REPORT_TABLES: [&str; 2] = ["slice", "pixel"];
const PATH_KEYS: [&str; 6] = ["code", "out", "input", "scene", "stack", "fits"];

struct Defaults {
    table: toml::Table,
    dir: PathBuf,
}

impl Defaults {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Defaults { table: toml::Table::new(), dir: PathBuf::from(".") });
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Defaults { table, dir })
    }

    /// Fills every unset field of `cli` from table `[group.name]`. Relative
    /// paths read from the file are taken relative to the file.
    fn merge<T: Serialize + DeserializeOwned>(&self, group: &str, name: &str, cli: T) -> Result<T> {
        let section = self.table.get(group).and_then(|g| g.get(name)).and_then(toml::Value::as_table);
        let Some(section) = section else { return Ok(cli) };
        let mut merged = section.clone();
        for (k, v) in merged.iter_mut() {
            if let (true, toml::Value::String(s)) = (PATH_KEYS.contains(&k.as_str()), &v) {
                if Path::new(s).is_relative() {
                    *v = toml::Value::String(self.dir.join(s).to_string_lossy().into_owned());
                }
            }
        }
        let given = toml::Table::try_from(&cli).context("options are not a table")?;
        merged.extend(given);
        merged.try_into().with_context(|| format!("config table [{group}.{name}]"))
    }
}

fn need<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("missing --{flag}"))
}

fn read_code(path: &Path) -> Result<PnCode> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_descriptor(&text).with_context(|| format!("parsing {}", path.display()))
}

fn code_for(stack: &ThermogramStack, path: Option<&Path>) -> Result<PnCode> {
    match path {
        Some(p) => read_code(p),
        None => {
            let text = stack.metadata.get("code").ok_or_else(|| anyhow!("missing --code and the stack carries no code"))?;
            parse_descriptor(text).context("code in stack metadata")
        }
    }
}

fn t_bit_for(stack: &ThermogramStack, given: Option<f64>) -> Result<f64> {
    match given {
        Some(t) => Ok(t),
        None => stack
            .metadata
            .get("t_bit")
            .ok_or_else(|| anyhow!("missing --t-bit and the stack carries no t_bit"))?
            .parse()
            .context("t_bit in stack metadata"),
    }
}

fn read(path: &Path) -> Result<ThermogramStack> {
    read_stack(path).with_context(|| format!("reading {}", path.display()))
}

fn write(stack: &ThermogramStack, path: &Path) -> Result<()> {
    write_stack(stack, path).with_context(|| format!("writing {}", path.display()))
}

fn parse_region(s: &str) -> Result<Region> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("region {s:?} is not x0,y0,x1,y1"))?;
    match v.as_slice() {
        &[x0, y0, x1, y1] => Ok(Region::new(x0, y0, x1, y1)),
        _ => bail!("region {s:?} is not x0,y0,x1,y1"),
    }
}

fn timing_from(args: &TimingArgs) -> Result<Timing> {
    Timing::new(need(args.t_bit, "t-bit")?, need(args.fps, "fps")?, args.n_per.unwrap_or(2)).map_err(Into::into)
}

fn seq_gen(args: SeqGen) -> Result<()> {
    let kind_s = need(args.kind, "kind")?;
    let kind = CodeKind::parse(&kind_s).ok_or_else(|| anyhow!("unknown code kind {kind_s:?}"))?;
    let length = match (args.n_bit, args.order) {
        (Some(n), None) => CodeLength::Bits(n),
        (None, Some(m)) => CodeLength::Order(m),
        (Some(_), Some(_)) => bail!("give either --n-bit or --order"),
        (None, None) => bail!("missing --n-bit (or --order)"),
    };
    let sign = args
        .sign
        .map(|v| Sign::from_value(v).ok_or_else(|| anyhow!("--sign must be 1 or -1, got {v}")))
        .transpose()?;
    let code = build_code(kind, length, sign)?;
    let text = format_descriptor(&code);
    match args.out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn seq_verify(args: SeqVerify) -> Result<()> {
    let code = read_code(&need(args.code, "code")?)?;
    let p = pacf(&code);
    println!("kind = {}", code.kind());
    println!("n_bit = {}", code.n_bit());
    println!("bias = {:e}", code.bias());
    println!("peak = {}", p.peak);
    println!("max_sidelobe = {:e}", p.max_sidelobe);
    println!("sidelobe_ratio = {:e}", p.sidelobe_ratio());
    if code.kind().is_modified() {
        if (p.peak - code.gain()).abs() > 1e-9 * code.gain() || p.sidelobe_ratio() > 1e-9 {
            bail!("{} code of length {} is not sidelobe-free", code.kind(), code.n_bit());
        }
    } else if code.n_bit() > 1 {
        // Standard codes are two-valued: every sidelobe equals the first.
        let s = p.values[1];
        if p.values[1..].iter().any(|v| (v - s).abs() > 1e-9 * p.peak) {
            bail!("{} code of length {} is not two-valued", code.kind(), code.n_bit());
        }
    }
    println!("ok");
    Ok(())
}

fn wave_gen(args: WaveGen) -> Result<()> {
    let code = read_code(&need(args.code, "code")?)?;
    let timing = timing_from(&args.timing)?;
    let x = build_unipolar(&build_physical_bipolar(&code, &timing), args.timing.amplitude.unwrap_or(1.0), timing.n_per())?;
    let out = need(args.out, "out")?;
    x.write_csv(&out).with_context(|| format!("writing {}", out.display()))?;
    if let Some(p) = args.stack {
        write(&x.to_stack(), &p)?;
    }
    Ok(())
}

fn sim_run(args: SimRun, seed: Option<u64>) -> Result<()> {
    let scene_path = need(args.scene, "scene")?;
    let mut scene = SceneConfig::load(&scene_path).with_context(|| format!("scene {}", scene_path.display()))?;
    if let Some(s) = seed {
        scene.rng_seed = s;
    }
    let code = read_code(&need(args.code, "code")?)?;
    let timing = timing_from(&args.timing)?;
    let x = build_unipolar(&build_physical_bipolar(&code, &timing), args.timing.amplitude.unwrap_or(1.0), timing.n_per())?;
    let stack = simulate_stack(&scene, &x)?;
    write(&stack, &need(args.out, "out")?)
}

fn dc_remove(args: DcRemove) -> Result<()> {
    let stack = read(&need(args.input, "input")?)?;
    let code = code_for(&stack, args.code.as_deref())?;
    let (ac, fits) = remove_dc_stack(&stack, &code)?;
    if fits.degenerate_count() > 0 {
        eprintln!("warning: {} degenerate pixel(s) written as zeros", fits.degenerate_count());
    }
    write(&ac, &need(args.out, "out")?)?;
    if let Some(p) = args.fits {
        fits.write_csv(&p).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn puct_compress(args: PuctCompress) -> Result<()> {
    let stack = read(&need(args.input, "input")?)?;
    let code = code_for(&stack, args.code.as_deref())?;
    let t_bit = t_bit_for(&stack, args.t_bit)?;
    let normalization = match args.normalization {
        None => Normalization::Raw,
        Some(s) => Normalization::parse(&s).ok_or_else(|| anyhow!("unknown normalization {s:?}"))?,
    };
    let steady = args.steady_period.map_or(SteadyState::AverageAll, SteadyState::Single);
    let k = Timing::new(t_bit, stack.fps(), 2)?.k();
    let period = k * code.n_bit();
    if stack.n_frames() % period != 0 {
        bail!("{} frames is not a whole number of {period}-frame code periods", stack.n_frames());
    }
    let timing = Timing::new(t_bit, stack.fps(), stack.n_frames() / period)?;
    let out = compress_stack_with(&stack, &code, &timing, steady, normalization)?;
    write(&out.stack, &need(args.out, "out")?)
}

fn puct_decimate(args: PuctDecimate) -> Result<()> {
    let stack = read(&need(args.input, "input")?)?;
    let t_bit = t_bit_for(&stack, args.t_bit)?;
    let mode = match args.mode.as_deref().map(|m| m.trim().to_ascii_uppercase()) {
        None => Decimation::FirstFrame,
        Some(m) if m == "FIRST_FRAME" => Decimation::FirstFrame,
        Some(m) if m == "BIN_AVERAGE" => Decimation::BinAverage,
        Some(m) => bail!("unknown decimation mode {m:?}"),
    };
    let n_per = stack.metadata.get("n_per").and_then(|v| v.parse().ok()).unwrap_or(2);
    let timing = Timing::new(t_bit, stack.fps(), n_per)?;
    let (mut out, new_timing) = decimate_to_bit_rate_with(&stack, &timing, mode)?;
    out.metadata.insert("t_bit".into(), new_timing.t_bit().to_string());
    write(&out, &need(args.out, "out")?)
}

fn report_slice(args: ReportSlice) -> Result<()> {
    let stack = read(&need(args.input, "input")?)?;
    let index = match (args.index, args.time_s) {
        (Some(i), None) => i,
        (None, Some(t)) => {
            if !(t.is_finite() && t >= 0.0) {
                bail!("--time-s must be a non-negative time, got {t}");
            }
            (t * stack.fps()).round() as usize
        }
        (Some(_), Some(_)) => bail!("give either --index or --time-s"),
        (None, None) => bail!("missing --index (or --time-s)"),
    };
    let files = export_slice(&stack, index, &need(args.out, "out")?)?;
    println!("{}", files.pgm.display());
    Ok(())
}

fn report_pixel(args: ReportPixel) -> Result<()> {
    let stack = read(&need(args.input, "input")?)?;
    let out = need(args.out, "out")?;
    export_pixel_trace(&stack, need(args.x, "x")?, need(args.y, "y")?, &out)?;
    Ok(())
}

fn metrics_snr(args: MetricsSnr) -> Result<()> {
    let stack = read(&need(args.input, "input")?)?;
    let signal = parse_region(&need(args.signal, "signal")?)?;
    let reference = parse_region(&need(args.reference, "reference")?)?;
    let r = snr_metric(&stack, &signal, &reference)?;
    println!("snr_db = {}", r.db);
    println!("contrast = {}", r.contrast);
    println!("noise = {}", r.noise);
    println!("peak_frame = {}", r.peak_frame);
    Ok(())
}

fn pipeline_config(path: &Path, seed: Option<u64>) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    for key in CLI_TABLES {
        table.remove(key);
    }
    if let Some(report) = table.get_mut("report").and_then(toml::Value::as_table_mut) {
        for key in REPORT_TABLES {
            report.remove(key);
        }
    }
    let mut cfg = PipelineConfig::from_toml_str(&toml::to_string(&table)?)?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if cfg.output_dir.is_relative() {
        cfg.output_dir = dir.join(&cfg.output_dir);
    }
    if let Some(p) = cfg.input_stack.as_mut() {
        if p.is_relative() {
            *p = dir.join(&*p);
        }
    }
    if let (Some(s), Some(scene)) = (seed, cfg.scene.as_mut()) {
        scene.rng_seed = s;
    }
    Ok(cfg)
}

fn pipeline_run(args: PipelineRun, config: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let path = args.file.as_deref().or(config).ok_or_else(|| anyhow!("pipeline run needs a config file"))?;
    let cfg = pipeline_config(path, seed)?;
    let art = run_pipeline(&cfg)?;
    if art.degenerate_pixels > 0 {
        eprintln!("warning: {} degenerate pixel(s) written as zeros", art.degenerate_pixels);
    }
    println!("{}", art.manifest.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let defaults = Defaults::load(cli.config.as_deref())?;
    let d = &defaults;
    match cli.command {
        Command::Seq(SeqCommand::Gen(a)) => seq_gen(d.merge("seq", "gen", a)?),
        Command::Seq(SeqCommand::Verify(a)) => seq_verify(d.merge("seq", "verify", a)?),
        Command::Wave(WaveCommand::Gen(a)) => wave_gen(d.merge("wave", "gen", a)?),
        Command::Sim(SimCommand::Run(a)) => sim_run(d.merge("sim", "run", a)?, cli.seed),
        Command::Dc(DcCommand::Remove(a)) => dc_remove(d.merge("dc", "remove", a)?),
        Command::Puct(PuctCommand::Compress(a)) => puct_compress(d.merge("puct", "compress", a)?),
        Command::Puct(PuctCommand::Decimate(a)) => puct_decimate(d.merge("puct", "decimate", a)?),
        Command::Report(ReportCommand::Slice(a)) => report_slice(d.merge("report", "slice", a)?),
        Command::Report(ReportCommand::Pixel(a)) => report_pixel(d.merge("report", "pixel", a)?),
        Command::Metrics(MetricsCommand::Snr(a)) => metrics_snr(d.merge("metrics", "snr", a)?),
        Command::Pipeline(PipelineCommand::Run(a)) => pipeline_run(a, cli.config.as_deref(), cli.seed),
    }
}

fn main() -> ExitCode {
    let version: &'static str =
        Box::leak(format!("{} (format {FORMAT_VERSION}, code table {CODE_TABLE_VERSION})", env!("CARGO_PKG_VERSION")).into_boxed_str());
    let matches = Cli::command().version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
