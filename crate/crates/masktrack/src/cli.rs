//! Command-line surface. Each command prints its resolved config as one JSON line,
//! then a JSON summary line; failures print one JSON error line to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::checkpoint;
use crate::config::{Paths, RunConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::render::render_run;
use crate::runs::{self, Net};

#[derive(Debug, Parser)]
#[command(
    name = "masktrack",
    version,
    about = "Siamese tracking and segmentation on image sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run config (TOML); defaults apply when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset into --out (or [paths].data).
    GenData(Common),
    /// Train a network on a dataset.
    Train(Common),
    /// Track every object of a dataset from its first visible frame.
    Track {
        #[command(flatten)]
        common: Common,
        /// Trained network (.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Multi-object tracking with the ground-truth detector.
    Mot {
        #[command(flatten)]
        common: Common,
        /// Trained network (.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score track results (ground truth against itself when --results is absent);
    /// a checkpoint adds reset-protocol accuracy and robustness.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Output directory of `track` or `mot`.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Trained network (.ckpt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare box representations fitted to the ground truth.
    OracleStudy(Common),
    /// Draw results over frames.
    Render {
        #[command(flatten)]
        common: Common,
        /// Output directory of `track` or `mot`.
        #[arg(long)]
        results: Option<PathBuf>,
        /// Only this sequence.
        #[arg(long)]
        sequence: Option<String>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Track { .. } => "track",
            Command::Mot { .. } => "mot",
            Command::Eval { .. } => "eval",
            Command::OracleStudy(_) => "oracle-study",
            Command::Render { .. } => "render",
        }
    }

    fn parts(&self) -> (&Common, Paths) {
        let flags = |c: &Common, checkpoint: Option<&PathBuf>, results: Option<&PathBuf>| Paths {
            data: c.data.clone(),
            checkpoint: checkpoint.cloned(),
            results: results.cloned(),
            out: c.out.clone(),
        };
        match self {
            Command::GenData(c) | Command::Train(c) | Command::OracleStudy(c) => (c, flags(c, None, None)),
            Command::Track { common, checkpoint } | Command::Mot { common, checkpoint } => {
                (common, flags(common, checkpoint.as_ref(), None))
            }
            Command::Eval {
                common,
                results,
                checkpoint,
            } => (common, flags(common, checkpoint.as_ref(), results.as_ref())),
            Command::Render { common, results, .. } => (common, flags(common, None, results.as_ref())),
        }
    }
}

/// Config file, then `MASKTRACK_*` path variables, then command-line paths.
pub fn resolve_config(cmd: &Command, env: impl Fn(&str) -> Option<String>) -> Result<RunConfig> {
    let (common, flags) = cmd.parts();
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.paths.apply_env(env);
    cfg.paths.merge(&flags);
    Ok(cfg)
}

fn load_net(cfg: &RunConfig, path: &Path) -> Result<Net> {
    checkpoint::load(path, &cfg.model)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("summaries serialise")
}

pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Value> {
    let p = &cfg.paths;
    Ok(match cmd {
        Command::GenData(_) => {
            let out = p
                .out
                .as_deref()
                .or(p.data.as_deref())
                .ok_or_else(|| Error::Usage("gen-data needs --out or a data path".into()))?;
            let m = runs::gen_data(cfg, out)?;
            json!({ "sequences": m.sequences.len(), "dataset": out })
        }
        Command::Train(_) => to_value(&runs::train_run(cfg, &Dataset::open(p.data()?)?, p.out()?)?),
        Command::Track { .. } => {
            let data = Dataset::open(p.data()?)?;
            let net = load_net(cfg, p.checkpoint()?)?;
            to_value(&runs::track_run(cfg, &data, &net, p.out()?)?)
        }
        Command::Mot { .. } => {
            let data = Dataset::open(p.data()?)?;
            let net = load_net(cfg, p.checkpoint()?)?;
            to_value(&runs::mot_run(cfg, &data, &net, p.out()?)?)
        }
        Command::Eval { .. } => {
            let data = Dataset::open(p.data()?)?;
            let net = p.checkpoint.as_deref().map(|c| load_net(cfg, c)).transpose()?;
            let r = runs::eval_run(cfg, &data, p.results.as_deref(), net.as_ref(), p.out()?)?;
            json!({
                "j_mean": r.j.mean,
                "f_mean": r.f.mean,
                "box_miou": r.boxes.miou,
                "overall": r.overall,
                "accuracy": r.accuracy,
                "robustness": r.robustness,
            })
        }
        Command::OracleStudy(_) => {
            let r = runs::oracle_run(cfg, &Dataset::open(p.data()?)?, p.out()?)?;
            json!({
                "fixed_aspect": r.fixed_aspect.miou,
                "min_max": r.min_max.miou,
                "mbr": r.mbr.miou,
            })
        }
        Command::Render { sequence, .. } => {
            let n = render_run(&Dataset::open(p.data()?)?, p.results()?, p.out()?, sequence.as_deref())?;
            json!({ "frames": n })
        }
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run(
    args: impl IntoIterator<Item = impl Into<OsString> + Clone>,
    env: impl Fn(&str) -> Option<String>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return 0;
        }
        Err(e) => {
            let line = json!({ "event": "error", "kind": "usage", "message": e.to_string().trim_end() });
            let _ = writeln!(stderr, "{line}");
            return 2;
        }
    };
    let name = cli.command.name();
    let outcome = resolve_config(&cli.command, env).and_then(|cfg| {
        let echo = json!({ "event": "config", "command": name, "config_hash": cfg.hash(), "config": cfg });
        let _ = writeln!(stdout, "{echo}");
        execute(&cli.command, &cfg)
    });
    match outcome {
        Ok(summary) => {
            let _ = writeln!(
                stdout,
                "{}",
                json!({ "event": "done", "command": name, "summary": summary })
            );
            0
        }
        Err(e) => {
            let line = json!({ "event": "error", "command": name, "kind": e.kind(), "message": e.to_string() });
            let _ = writeln!(stderr, "{line}");
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}
