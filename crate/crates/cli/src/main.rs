//! `handvein` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use handvein::evalharness::ProtocolId;

#[derive(Parser)]
#[command(name = "handvein", version, about = "Contactless hand-vascular biometrics pipeline")]
struct Cli {
    /// TOML run configuration; defaults to $HANDVEIN_CONFIG when set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set fvr.mc.sigma=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output root (`paths.out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset root (`paths.dataset`).
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Calibration JSON (`paths.calibration`).
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset under the dataset root.
    Synth(SynthArgs),
    /// Detect claps in a raw frame directory, trim and label the payload.
    Sync(SyncArgs),
    /// Rectify a stereo pair with the configured calibration.
    Rectify(PairArgs),
    /// Semi-global disparity of a stereo pair.
    Disparity(DisparityArgs),
    /// Photometric-stereo normals from frames under known lights.
    Ps(PsArgs),
    /// Depth of field of a thin lens.
    Dof(DofArgs),
    /// Angles of view and coverage at a working distance.
    Fov(FovArgs),
    /// Build finger templates for the dataset or a subject subset.
    Template(TemplateArgs),
    /// Score one pair of templates.
    Match(MatchArgs),
    /// Run the verification protocols end to end.
    Evaluate(EvaluateArgs),
    /// Three-finger score fusion over the scores of `evaluate`.
    Fuse,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub samples: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct SyncArgs {
    /// Directory of raw frames, ordered by file name.
    #[arg(long)]
    pub input: PathBuf,
    /// Capture schedule (JSON or TOML).
    #[arg(long)]
    pub schedule: PathBuf,
}

#[derive(Args)]
pub struct PairArgs {
    #[arg(long)]
    pub left: PathBuf,
    #[arg(long)]
    pub right: PathBuf,
}

#[derive(Args)]
pub struct DisparityArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Inputs are already rectified; skip rectification even with a calibration.
    #[arg(long)]
    pub rectified: bool,
}

#[derive(Args)]
pub struct PsArgs {
    /// One frame per light, in light order.
    #[arg(long, num_args = 3.., required = true)]
    pub frames: Vec<PathBuf>,
    /// Flat-field reference frames, one per light.
    #[arg(long, num_args = 3..)]
    pub refs: Vec<PathBuf>,
}

#[derive(Args)]
pub struct DofArgs {
    /// Focal length, mm.
    #[arg(long = "f")]
    pub f: f64,
    /// f-number.
    #[arg(long = "N")]
    pub n: f64,
    /// Circle of confusion, mm.
    #[arg(long = "c")]
    pub c: f64,
    /// Focus distance, mm.
    #[arg(long = "s")]
    pub s: f64,
    /// Sensor width, mm; with the height, also reports the field of view.
    #[arg(long, requires = "sensor_height")]
    pub sensor_width: Option<f64>,
    #[arg(long, requires = "sensor_width")]
    pub sensor_height: Option<f64>,
}

#[derive(Args)]
pub struct FovArgs {
    #[arg(long = "f")]
    pub f: f64,
    #[arg(long)]
    pub sensor_width: f64,
    #[arg(long)]
    pub sensor_height: f64,
    /// Working distance, mm.
    #[arg(long = "d")]
    pub d: f64,
}

#[derive(Args)]
pub struct TemplateArgs {
    /// Subject ids, e.g. `1-5,8`; all when omitted.
    #[arg(long)]
    pub subjects: Option<String>,
}

#[derive(Args)]
pub struct MatchArgs {
    /// Template stem, or its `.png`/`.json` file.
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Comma-separated protocol ids or names (`eval.protocols`).
    #[arg(long)]
    pub protocols: Option<String>,
    /// Number of Dev subjects (`eval.dev_subjects`).
    #[arg(long)]
    pub dev_subjects: Option<usize>,
}

impl Cli {
    /// Config-file values, then `--set`, then dedicated flags.
    fn overrides(&self) -> handvein::Result<Vec<String>> {
        let mut o = self.set.clone();
        let path = |p: &PathBuf| format!("{:?}", p.display().to_string());
        if let Some(p) = &self.out {
            o.push(format!("paths.out={}", path(p)));
        }
        if let Some(p) = &self.dataset {
            o.push(format!("paths.dataset={}", path(p)));
        }
        if let Some(p) = &self.calibration {
            o.push(format!("paths.calibration={}", path(p)));
        }
        match &self.command {
            Command::Synth(a) => {
                o.extend(a.subjects.map(|v| format!("synth.n_subjects={v}")));
                o.extend(a.samples.map(|v| format!("synth.samples_per_hand={v}")));
                o.extend(a.seed.map(|v| format!("synth.seed={v}")));
            }
            Command::Evaluate(a) => {
                if let Some(p) = &a.protocols {
                    let list = p
                        .split(',')
                        .map(|s| s.trim().parse::<ProtocolId>().map(|id| format!("\"{id:?}\"")))
                        .collect::<handvein::Result<Vec<_>>>()?;
                    o.push(format!("eval.protocols=[{}]", list.join(",")));
                }
                o.extend(a.dev_subjects.map(|v| format!("eval.dev_subjects={v}")));
            }
            _ => {}
        }
        Ok(o)
    }
}

fn run(cli: &Cli) -> handvein::Result<()> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), &cli.overrides()?)?;
    match &cli.command {
        Command::Synth(_) => commands::synth(&cfg),
        Command::Sync(a) => commands::sync(&cfg, a),
        Command::Rectify(a) => commands::rectify(&cfg, a),
        Command::Disparity(a) => commands::disparity(&cfg, a),
        Command::Ps(a) => commands::ps(&cfg, a),
        Command::Dof(a) => commands::dof(a),
        Command::Fov(a) => commands::fov(a),
        Command::Template(a) => commands::template(&cfg, a),
        Command::Match(a) => commands::matching(&cfg, a),
        Command::Evaluate(_) => commands::evaluate(&cfg),
        Command::Fuse => commands::fuse(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let mut lines = msg.lines();
            eprintln!("error: usage: {}", lines.next().unwrap_or("").trim_start_matches("error: "));
            for line in lines {
                eprintln!("{line}");
            }
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
            eprintln!("error: {}: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
