//! Command-line entry points. The `toolplay` binary is a thin wrapper around
//! [`run`], which tests can call in-process.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::canonical;
use crate::config::Config;
use crate::curate::{curate_pool, dataset_text, from_lines, generate_pool, to_lines, PoolEntry};
use crate::eval::{evaluate_file, PredictionSource};
use crate::selfplay::{run_selfplay, Backends, RunOptions};
use crate::service::{serve_blocking, RewardItem, RewardOverrides, RewardRequest, Role};
use crate::taskspec::sample_specs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    /// One canonical JSON object per line.
    #[default]
    Lines,
    Pretty,
}

#[derive(Debug, Parser)]
#[command(name = "toolplay", version, about = "Self-play rewards, curation and evaluation for tool-calling agents")]
pub struct Cli {
    /// TOML config; defaults apply to every missing key.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t)]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw task specifications from the configured distribution.
    SampleSpecs {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a candidate pool with the generator backend.
    Generate {
        /// Defaults to `curation.pool_size`.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify, select and order a pool into a dataset.
    Curate {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the curation report; stderr gets a summary otherwise.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a line-delimited batch of reward items offline.
    Score {
        #[arg(long, value_enum)]
        role: RoleArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP reward service until interrupted.
    Serve {
        /// 0 picks a free port. Defaults to the config's bind address.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<std::net::IpAddr>,
    },
    /// Run the self-play loop, resuming from any checkpoint in the output dir.
    Selfplay {
        #[arg(long)]
        iterations: Option<u32>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Stop after a step, as `<iteration>:<step>`; used to test resume.
        #[arg(long, hide = true)]
        stop_after: Option<String>,
    },
    /// Evaluate predictions (or the solver backend) against a benchmark file.
    Evaluate {
        #[arg(long)]
        bench: PathBuf,
        /// Prediction lines `{id, completion}`; the solver backend answers otherwise.
        #[arg(long)]
        preds: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Generator,
    Solver,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Generator => Role::Generator,
            RoleArg::Solver => Role::Solver,
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn render_list<T: Serialize>(items: &[T], format: OutputFormat) -> String {
    match format {
        OutputFormat::Lines => to_lines(items),
        OutputFormat::Pretty => canonical::to_string_pretty(items) + "\n",
    }
}

fn render_one<T: Serialize>(item: &T, format: OutputFormat) -> String {
    match format {
        OutputFormat::Lines => canonical::to_string(item) + "\n",
        OutputFormat::Pretty => canonical::to_string_pretty(item) + "\n",
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Executes a parsed command line, writing results to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(&cli)?;
    let format = cli.format;
    match cli.command {
        Command::SampleSpecs { count, out: path } => {
            let specs = sample_specs(&cfg.taskspec, cfg.seed, count)?;
            emit(out, path.as_deref(), &render_list(&specs, format))
        }
        Command::Generate { count, out: path } => {
            let gateway = cfg.generator_gateway()?.context("generate needs [gateway.generator]")?;
            let pool = generate_pool(&cfg.taskspec, &gateway, cfg.seed, count.unwrap_or(cfg.curation.pool_size))?;
            write_text(&path, &to_lines(&pool))
        }
        Command::Curate {
            pool,
            out: path,
            report,
        } => {
            let gateway = cfg.solver_gateway()?.context("curate needs [gateway.solver]")?;
            let entries: Vec<PoolEntry> =
                from_lines(&read_text(&pool)?).with_context(|| format!("parsing {}", pool.display()))?;
            let (records, rep) = curate_pool(&entries, &gateway, &cfg.curation, cfg.seed)?;
            write_text(&path, &dataset_text(&records))?;
            match report {
                Some(r) => write_text(&r, &(canonical::to_string_pretty(&rep) + "\n")),
                None => {
                    eprintln!(
                        "pool {} unparsed {} duplicates {} verified {} selected {}",
                        rep.pool, rep.unparsed, rep.duplicates, rep.verified, rep.selection.selected
                    );
                    Ok(())
                }
            }
        }
        Command::Score {
            role,
            input,
            out: path,
        } => {
            let items: Vec<RewardItem> =
                from_lines(&read_text(&input)?).with_context(|| format!("parsing {}", input.display()))?;
            let service = cfg.reward_service()?;
            let resp = service.score_batch(&RewardRequest {
                role: role.into(),
                items,
                overrides: RewardOverrides::default(),
            })?;
            emit(out, path.as_deref(), &render_list(&resp.results, format))
        }
        Command::Serve { port, host } => {
            let mut addr: SocketAddr = cfg.service.bind;
            if let Some(p) = port {
                addr.set_port(p);
            }
            if let Some(h) = host {
                addr.set_ip(h);
            }
            let service = Arc::new(cfg.reward_service()?);
            serve_blocking(service, addr, |bound| {
                let _ = writeln!(out, "listening on http://{bound}");
                let _ = writeln!(out, "ready port={}", bound.port());
                let _ = out.flush();
            })?;
            Ok(())
        }
        Command::Selfplay {
            iterations,
            out_dir,
            stop_after,
        } => {
            let mut cfg = cfg;
            if let Some(k) = iterations {
                cfg.selfplay.iterations = k;
            }
            let dir = out_dir.unwrap_or_else(|| cfg.base_dir.join(&cfg.selfplay.out_dir));
            let opts = RunOptions {
                stop_after: stop_after.map(|s| parse_stop_after(&s)).transpose()?,
            };
            if cfg.selfplay.iterations == 0 {
                return emit(out, None, &render_list::<crate::selfplay::IterationReport>(&[], format));
            }
            let backends = Backends::from_config(&cfg)?;
            let reports = run_selfplay(&cfg, &backends, &dir, &opts)?;
            emit(out, None, &render_list(&reports, format))
        }
        Command::Evaluate { bench, preds, report } => {
            let rep = match preds {
                Some(p) => evaluate_file(&bench, PredictionSource::File(p))?,
                None => {
                    let gateway = cfg.solver_gateway()?.context("evaluate without --preds needs [gateway.solver]")?;
                    let params = gateway.config().rollout;
                    evaluate_file(&bench, PredictionSource::Backend { gateway: &gateway, params })?
                }
            };
            if let Some(r) = &report {
                write_text(r, &(canonical::to_string_pretty(&rep) + "\n"))?;
            }
            emit(out, None, &render_one(&rep, format))
        }
    }
}

fn parse_stop_after(s: &str) -> Result<(u32, String)> {
    let Some((it, step)) = s.split_once(':') else {
        bail!("--stop-after expects <iteration>:<step>, got `{s}`");
    };
    if !crate::selfplay::STEPS.iter().any(|(_, name)| *name == step) {
        bail!("unknown step `{step}`");
    }
    Ok((it.parse().context("iteration index")?, step.to_string()))
}
