use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use spectratact::calibration::{
    estimate_resolution, fit_force, fit_position, CalibrationSet, ForceCalibration, RatioChannels,
};
use spectratact::config::{AxisSpec, ProjectConfig};
use spectratact::decoder::{decode_force, decode_position, DecodeError};
use spectratact::design::sensitivity_table;
use spectratact::fivebar::{deviation_map, workspace_mask, DeviationMethod};
use spectratact::io::{
    fmt_f64, read_readings, read_trajectory, write_decoded, write_design, write_grid, write_reconstructed,
    write_sweep, write_trajectory, DecodedRecord, ReadingRow, ReadingTable,
};
use spectratact::sensor::{sweep, ChannelReading, NoiseModel, SensorConfig, SweepTable};
use spectratact::twin::{generate_path, track, EncoderChannel, TrackNoise, TrackingReport};

use crate::error::CliError;
use crate::output::{hash_file, sha256_hex, FileHash, OutputDir, RunManifest};
use crate::{Cli, Command, Format};

/// `a,b,c` for explicit values or `start:stop:count` for an even spacing.
fn parse_axis(text: &str) -> Result<AxisSpec, CliError> {
    let bad = || CliError::Config(format!("cannot parse axis '{text}' (use 'a,b,c' or 'start:stop:count')"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let start = parts[0].trim().parse().map_err(|_| bad())?;
        let stop = parts[1].trim().parse().map_err(|_| bad())?;
        let count = parts[2].trim().parse().map_err(|_| bad())?;
        return Ok(AxisSpec::Linspace { start, stop, count });
    }
    if text.trim().is_empty() {
        return Ok(AxisSpec::Values(Vec::new()));
    }
    text.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>().map(AxisSpec::Values)
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Positions in mm: 'a,b,c' or 'start:stop:count'. Defaults to the config sweep.
    #[arg(long)]
    pub positions: Option<String>,
    /// Forces in N, same syntax as --positions.
    #[arg(long)]
    pub forces: Option<String>,
    /// Ignore the config's noise section.
    #[arg(long)]
    pub noise_free: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    /// Sweep table (CSV, or JSON from `--format json`).
    #[arg(long)]
    pub samples: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DecodeArgs {
    /// Readings table with ch_<name> columns.
    #[arg(long)]
    pub readings: PathBuf,
    /// Calibration JSON written by `calibrate`.
    #[arg(long)]
    pub calibration: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrackArgs {
    /// Trajectory CSV (t, x_mm, y_mm). Generated from the config path when omitted.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Angle-equivalent encoder noise in degrees; overrides the config.
    #[arg(long)]
    pub angle_sigma_deg: Option<f64>,
    /// Run without noise regardless of the config.
    #[arg(long, conflicts_with = "angle_sigma_deg")]
    pub noise_free: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepDesignArgs {
    /// Lengths in mm: 'a,b,c' or 'start:stop:count'.
    #[arg(long)]
    pub lengths: Option<String>,
    /// Dye concentration scales, same syntax.
    #[arg(long)]
    pub concentrations: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WorkspaceArgs {
    /// Use Monte Carlo with this many trials per cell instead of the Jacobian.
    #[arg(long)]
    pub monte_carlo: Option<usize>,
    /// Encoder angle noise in degrees; overrides the config.
    #[arg(long)]
    pub angle_sigma_deg: Option<f64>,
}

struct RunContext {
    config: ProjectConfig,
    config_path: Option<PathBuf>,
    config_sha256: String,
    base_dir: Option<PathBuf>,
    seed: u64,
    format: Format,
    out: OutputDir,
    inputs: Vec<FileHash>,
}

impl RunContext {
    fn open(config_path: Option<&Path>, seed: Option<u64>, format: Format, out: &Path) -> Result<Self, CliError> {
        let (config, config_sha256, base_dir) = match config_path {
            Some(p) => {
                let bytes = std::fs::read(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                let text = std::str::from_utf8(&bytes)
                    .map_err(|_| CliError::Config(format!("config {} is not UTF-8", p.display())))?;
                let config = ProjectConfig::from_json(text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                (config, sha256_hex(&bytes), p.parent().map(Path::to_path_buf))
            }
            None => (ProjectConfig::default(), sha256_hex(b""), None),
        };
        let seed = seed.unwrap_or(config.seed);
        Ok(Self {
            config,
            config_path: config_path.map(Path::to_path_buf),
            config_sha256,
            base_dir,
            seed,
            format,
            out: OutputDir::create(out)?,
            inputs: Vec::new(),
        })
    }

    fn sensor(&self) -> Result<SensorConfig, CliError> {
        Ok(self.config.sensor.build(self.base_dir.as_deref())?)
    }

    fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(FileHash { path: path.display().to_string(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    fn data_name(&self, stem: &str) -> String {
        format!("{stem}.{}", self.format.as_str())
    }

    fn finish(self, command: &str, args: serde_json::Value) -> Result<(), CliError> {
        let manifest = RunManifest {
            tool: "spectratact".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_path: self.config_path.as_ref().map(|p| p.display().to_string()),
            config_sha256: self.config_sha256.clone(),
            seed: self.seed,
            out_dir: self.out.path().display().to_string(),
            format: self.format.as_str().into(),
            args,
            inputs: self.inputs.clone(),
            outputs: self.out.written().to_vec(),
        };
        let mut out = self.out;
        out.write_json(&RunManifest::file_name(command), &manifest)?;
        Ok(())
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), spectratact::io::IoError>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Replay { manifest } => replay(manifest, cli.out_override()),
        command => {
            let (name, args) = describe(command)?;
            let ctx = RunContext::open(cli.config.as_deref(), cli.seed, cli.format, &cli.out_dir())?;
            dispatch(&name, &args, ctx)
        }
    }
}

impl Cli {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn out_override(&self) -> Option<PathBuf> {
        self.out.clone()
    }
}

fn describe(command: &Command) -> Result<(String, serde_json::Value), CliError> {
    let pair = match command {
        Command::Simulate(a) => ("simulate", serde_json::to_value(a)?),
        Command::Calibrate(a) => ("calibrate", serde_json::to_value(a)?),
        Command::Decode(a) => ("decode", serde_json::to_value(a)?),
        Command::Track(a) => ("track", serde_json::to_value(a)?),
        Command::SweepDesign(a) => ("sweep-design", serde_json::to_value(a)?),
        Command::Workspace(a) => ("workspace", serde_json::to_value(a)?),
        Command::Replay { .. } => return Err(CliError::Config("replay cannot be recorded".into())),
    };
    Ok((pair.0.to_string(), pair.1))
}

fn dispatch(name: &str, args: &serde_json::Value, mut ctx: RunContext) -> Result<(), CliError> {
    let parse_err = |e: serde_json::Error| CliError::Config(format!("bad arguments for {name}: {e}"));
    match name {
        "simulate" => simulate(&mut ctx, &serde_json::from_value(args.clone()).map_err(parse_err)?)?,
        "calibrate" => calibrate(&mut ctx, &serde_json::from_value(args.clone()).map_err(parse_err)?)?,
        "decode" => decode(&mut ctx, &serde_json::from_value(args.clone()).map_err(parse_err)?)?,
        "track" => cmd_track(&mut ctx, &serde_json::from_value(args.clone()).map_err(parse_err)?)?,
        "sweep-design" => sweep_design(&mut ctx, &serde_json::from_value(args.clone()).map_err(parse_err)?)?,
        "workspace" => workspace(&mut ctx, &serde_json::from_value(args.clone()).map_err(parse_err)?)?,
        other => return Err(CliError::Config(format!("unknown command '{other}'"))),
    }
    ctx.finish(name, args.clone())
}

fn replay(manifest_path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", manifest_path.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let config_path = manifest.config_path.as_ref().map(PathBuf::from);
    let current = match &config_path {
        Some(p) => hash_file(p)?,
        None => sha256_hex(b""),
    };
    if current != manifest.config_sha256 {
        return Err(CliError::Mismatch(format!("config hash changed since the recorded run ({current})")));
    }
    for input in &manifest.inputs {
        let h = hash_file(Path::new(&input.path))?;
        if h != input.sha256 {
            return Err(CliError::Mismatch(format!("input {} changed since the recorded run", input.path)));
        }
    }
    let format = match manifest.format.as_str() {
        "json" => Format::Json,
        _ => Format::Csv,
    };
    let out_dir = out.unwrap_or_else(|| PathBuf::from(&manifest.out_dir));
    let ctx = RunContext::open(config_path.as_deref(), Some(manifest.seed), format, &out_dir)?;
    dispatch(&manifest.command, &manifest.args, ctx)?;
    let mut differing = Vec::new();
    for f in &manifest.outputs {
        if hash_file(&out_dir.join(&f.path))? != f.sha256 {
            differing.push(f.path.clone());
        }
    }
    if !differing.is_empty() {
        return Err(CliError::Mismatch(format!("outputs differ: {}", differing.join(", "))));
    }
    println!("replayed {}: {} outputs byte-identical", manifest.command, manifest.outputs.len());
    Ok(())
}

fn simulate(ctx: &mut RunContext, args: &SimulateArgs) -> Result<(), CliError> {
    let sensor = ctx.sensor()?;
    let positions = match &args.positions {
        Some(p) => parse_axis(p)?.values(),
        None => ctx.config.sweep.positions(&sensor),
    };
    let forces = match &args.forces {
        Some(f) => parse_axis(f)?.values(),
        None => ctx.config.sweep.forces(),
    };
    let noise = if args.noise_free { None } else { ctx.config.noise.map(|n| NoiseModel { seed: ctx.seed, ..n }) };
    if let Some(n) = &noise {
        n.validate()?;
    }
    let table = sweep(&sensor, &positions, &forces, noise.as_ref(), ctx.seed)?;
    let name = ctx.data_name("sweep");
    let bytes = match ctx.format {
        Format::Csv => csv_bytes(|b| write_sweep(&table, b))?,
        Format::Json => json_bytes(&table)?,
    };
    ctx.out.write(&name, &bytes)?;
    #[derive(Serialize)]
    struct SweepMeta<'a> {
        seed: u64,
        config_sha256: &'a str,
        rows: usize,
        channels: &'a [String],
        noise: Option<NoiseModel>,
        data_sha256: String,
    }
    let meta = SweepMeta {
        seed: ctx.seed,
        config_sha256: &ctx.config_sha256,
        rows: table.rows.len(),
        channels: &table.channel_names,
        noise,
        data_sha256: sha256_hex(&bytes),
    };
    ctx.out.write_json("sweep.meta.json", &meta)?;
    println!("simulate: {} rows ({} positions x {} forces) -> {}", table.rows.len(), positions.len(), forces.len(), ctx.out.path().join(&name).display());
    Ok(())
}

fn load_table(ctx: &mut RunContext, path: &Path) -> Result<ReadingTable, CliError> {
    let bytes = ctx.read_input(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let table: SweepTable = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let rows = table
            .rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| ReadingRow {
                row: i + 1,
                position_mm: Some(r.stimulus.position_mm),
                force_n: Some(r.stimulus.force_n),
                reading: Ok(r.reading),
            })
            .collect();
        return Ok(ReadingTable { channel_names: table.channel_names, rows });
    }
    Ok(read_readings(bytes.as_slice())?)
}

fn ratio_channels(ctx: &RunContext, names: &[String]) -> Result<RatioChannels, CliError> {
    let cal = &ctx.config.calibration;
    let r = match (&cal.numerator, &cal.denominator) {
        (Some(n), Some(d)) => RatioChannels::new(names, n, d),
        _ => RatioChannels::default_for(names),
    };
    r.map_err(|e| CliError::Config(e.to_string()))
}

fn calibrate(ctx: &mut RunContext, args: &CalibrateArgs) -> Result<(), CliError> {
    let sensor = ctx.sensor()?;
    let table = load_table(ctx, &args.samples)?;
    if table.channel_names.is_empty() {
        return Err(CliError::Degenerate("no samples".into()));
    }
    let ratio = ratio_channels(ctx, &table.channel_names)?;
    let mut skipped = 0usize;
    let mut usable: Vec<(f64, Option<f64>, ChannelReading)> = Vec::new();
    for row in &table.rows {
        match (&row.reading, row.position_mm) {
            (Ok(r), Some(x)) => usable.push((x, row.force_n, r.clone())),
            _ => skipped += 1,
        }
    }
    let live: Vec<(f64, ChannelReading)> =
        usable.iter().filter(|(_, _, r)| ratio.log_ratio(r).is_ok()).map(|(x, _, r)| (*x, r.clone())).collect();
    let dead = usable.len() - live.len();
    let position = fit_position(&live, &ratio)?;

    // Force: the position with the most distinct forces, nearest mid-span on ties.
    let mut by_position: BTreeMap<u64, Vec<(f64, ChannelReading)>> = BTreeMap::new();
    for (x, f, r) in &usable {
        if let Some(f) = f {
            by_position.entry(x.to_bits()).or_default().push((*f, r.clone()));
        }
    }
    let mid = 0.5 * position.length_mm;
    let best = by_position
        .iter()
        .map(|(bits, s)| {
            let mut forces: Vec<u64> = s.iter().map(|(f, _)| f.to_bits()).collect();
            forces.sort_unstable();
            forces.dedup();
            (f64::from_bits(*bits), forces.len(), s)
        })
        .filter(|(_, n, _)| *n >= 3)
        .min_by(|a, b| b.1.cmp(&a.1).then((a.0 - mid).abs().total_cmp(&(b.0 - mid).abs())));
    let same_channels = table.channel_names == sensor.channel_names();
    let force: Option<ForceCalibration> = match best {
        Some((x, _, samples)) if same_channels => match fit_force(samples, &position, Some(x), &sensor) {
            Ok(fc) => Some(fc),
            Err(e) => {
                eprintln!("warning: no force calibration: {e}");
                None
            }
        },
        Some(_) => {
            eprintln!("warning: no force calibration: table channels differ from the configured sensor");
            None
        }
        None => {
            eprintln!("warning: no force calibration: no position has three or more distinct forces");
            None
        }
    };
    let resolution = match (&force, ctx.config.calibration.operating_point) {
        (Some(fc), Some(op)) => {
            let noise = NoiseModel { seed: ctx.seed, ..ctx.config.noise.unwrap_or_default() };
            match estimate_resolution(&sensor, &position, fc, &noise, &op) {
                Ok(r) => Some(r),
                Err(e) => {
                    eprintln!("warning: no resolution report: {e}");
                    None
                }
            }
        }
        _ => None,
    };
    let set = CalibrationSet { position, force, resolution };
    ctx.out.write_json("calibration.json", &set)?;
    if skipped + dead > 0 {
        eprintln!("calibrate: skipped {skipped} unparsable rows and {dead} dead-zone rows");
    }
    println!("r_squared = {}", fmt_f64(set.position.r_squared));
    println!("slope_per_mm = {}", fmt_f64(set.position.slope));
    Ok(())
}

fn decode_flag(e: &DecodeError) -> &'static str {
    match e {
        DecodeError::NoContact => "no_contact",
        DecodeError::BelowThreshold => "below_threshold",
        DecodeError::Saturated(_) => "saturated",
        _ => "error",
    }
}

fn decode(ctx: &mut RunContext, args: &DecodeArgs) -> Result<(), CliError> {
    let table = load_table(ctx, &args.readings)?;
    let cal_bytes = ctx.read_input(&args.calibration)?;
    let cal: CalibrationSet = serde_json::from_slice(&cal_bytes)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.calibration.display())))?;
    let mut poscal = cal.position.clone();
    if !table.channel_names.is_empty() {
        poscal.channels = RatioChannels::new(&table.channel_names, &cal.position.channels.numerator, &cal.position.channels.denominator)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let sensor = ctx.sensor()?;
    let force = match &cal.force {
        Some(fc) if table.channel_names.is_empty() || table.channel_names == sensor.channel_names() => Some(fc),
        Some(_) => {
            eprintln!("warning: readings channels differ from the configured sensor; skipping force");
            None
        }
        None => None,
    };
    let records: Vec<DecodedRecord> = table
        .rows
        .par_iter()
        .map(|row| {
            let mut rec = DecodedRecord {
                row: row.row,
                position_mm: None,
                raw_position_mm: None,
                force_n: None,
                flag: "ok".into(),
                message: None,
            };
            let reading = match &row.reading {
                Ok(r) => r,
                Err(msg) => {
                    rec.flag = "parse_error".into();
                    rec.message = Some(msg.clone());
                    return rec;
                }
            };
            match decode_position(reading, &poscal) {
                Ok(d) => {
                    rec.position_mm = Some(d.position_mm);
                    rec.raw_position_mm = Some(d.raw_position_mm);
                    if d.out_of_span {
                        rec.flag = "out_of_span".into();
                    }
                    if let Some(fc) = force {
                        match decode_force(reading, d.position_mm, fc, &sensor) {
                            Ok(f) => rec.force_n = Some(f),
                            Err(e) => {
                                rec.flag = decode_flag(&e).into();
                                rec.message = Some(e.to_string());
                            }
                        }
                    }
                }
                Err(e) => {
                    rec.flag = decode_flag(&e).into();
                    rec.message = Some(e.to_string());
                }
            }
            rec
        })
        .collect();
    let name = ctx.data_name("decoded");
    let bytes = match ctx.format {
        Format::Csv => csv_bytes(|b| write_decoded(&records, b))?,
        Format::Json => json_bytes(&records)?,
    };
    ctx.out.write(&name, &bytes)?;
    let flagged = records.iter().filter(|r| r.flag != "ok").count();
    println!("decode: {} rows, {} flagged -> {}", records.len(), flagged, ctx.out.path().join(&name).display());
    Ok(())
}

#[derive(Serialize)]
struct TrackSummary {
    seed: u64,
    samples: usize,
    noise: Option<TrackNoise>,
    #[serde(flatten)]
    report: TrackingReport,
}

fn cmd_track(ctx: &mut RunContext, args: &TrackArgs) -> Result<(), CliError> {
    let twin = ctx.config.twin.clone();
    let trajectory = match &args.trajectory {
        Some(p) => {
            let bytes = ctx.read_input(p)?;
            read_trajectory(bytes.as_slice())?
        }
        None => {
            let t = generate_path(&twin.fivebar, &twin.path)?;
            let bytes = csv_bytes(|b| write_trajectory(&t, b))?;
            ctx.out.write("trajectory.csv", &bytes)?;
            t
        }
    };
    let sensor = twin.sensor.build(ctx.base_dir.as_deref())?;
    let enc: Vec<EncoderChannel> = twin
        .encoders
        .iter()
        .map(|e| EncoderChannel::calibrated(sensor.clone(), *e, twin.press_force_n, twin.calibration_positions))
        .collect::<Result<_, _>>()?;
    let noise = if args.noise_free {
        None
    } else if let Some(s) = args.angle_sigma_deg {
        Some(TrackNoise::AngleEquivalent { sigma_deg: s })
    } else {
        twin.noise
    };
    let result = track(&twin.fivebar, [&enc[0], &enc[1]], &trajectory, noise.as_ref(), ctx.seed)?;
    let name = ctx.data_name("reconstructed");
    let bytes = match ctx.format {
        Format::Csv => csv_bytes(|b| write_reconstructed(&result.samples, b))?,
        Format::Json => json_bytes(&result.samples)?,
    };
    ctx.out.write(&name, &bytes)?;
    let summary = TrackSummary { seed: ctx.seed, samples: trajectory.len(), noise, report: result.report.clone() };
    ctx.out.write_json("track_report.json", &summary)?;
    println!(
        "track: {} samples, rms {} mm, max {} mm, dropped {}",
        trajectory.len(),
        fmt_f64(result.report.rms_error_mm),
        fmt_f64(result.report.max_error_mm),
        result.report.dropped
    );
    Ok(())
}

fn sweep_design(ctx: &mut RunContext, args: &SweepDesignArgs) -> Result<(), CliError> {
    let sensor = ctx.sensor()?;
    let design = ctx.config.design.clone();
    let lengths = match &args.lengths {
        Some(l) => parse_axis(l)?.values(),
        None => design.lengths_mm.values(),
    };
    let concentrations = match &args.concentrations {
        Some(c) => parse_axis(c)?.values(),
        None => design.concentrations.values(),
    };
    let ratio = ratio_channels(ctx, &sensor.channel_names())?;
    let rows = sensitivity_table(&sensor, &ratio, &lengths, &concentrations, design.force_n, design.samples_per_mm)?;
    let name = ctx.data_name("design");
    let bytes = match ctx.format {
        Format::Csv => csv_bytes(|b| write_design(&rows, b))?,
        Format::Json => json_bytes(&rows)?,
    };
    ctx.out.write(&name, &bytes)?;
    println!("sweep-design: {} rows -> {}", rows.len(), ctx.out.path().join(&name).display());
    Ok(())
}

fn workspace(ctx: &mut RunContext, args: &WorkspaceArgs) -> Result<(), CliError> {
    let twin = &ctx.config.twin;
    let sigma = args.angle_sigma_deg.unwrap_or(twin.angle_sigma_deg);
    let method = match args.monte_carlo {
        Some(trials) => DeviationMethod::MonteCarlo { trials },
        None => DeviationMethod::Jacobian,
    };
    let mask = workspace_mask(&twin.fivebar, &twin.deviation_grid)?;
    let dev = deviation_map(&twin.fivebar, sigma, &twin.deviation_grid, ctx.seed, method)?;
    let (mask_bytes, dev_bytes) = match ctx.format {
        Format::Csv => (
            csv_bytes(|b| write_grid(&mask, |v| if *v { "1".into() } else { "0".into() }, b))?,
            csv_bytes(|b| write_grid(&dev, |v| v.map(fmt_f64).unwrap_or_default(), b))?,
        ),
        Format::Json => (json_bytes(&mask)?, json_bytes(&dev)?),
    };
    let mask_name = ctx.data_name("workspace_mask");
    let dev_name = ctx.data_name("deviation_map");
    ctx.out.write(&mask_name, &mask_bytes)?;
    ctx.out.write(&dev_name, &dev_bytes)?;
    let max = dev.values.iter().flatten().cloned().fold(0.0, f64::max);
    println!("workspace: max deviation {} mm at sigma {sigma} deg", fmt_f64(max));
    Ok(())
}
