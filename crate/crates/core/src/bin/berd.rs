use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use berd_core::decision::write_metric_csv;
use berd_core::harness::{self, Scenario};
use berd_core::ldpc::{alist, builtin_matrix, SHIPPED_CODES};
use berd_core::receiver::Mode;

#[derive(Parser)]
#[command(
    name = "berd",
    version,
    about = "Blind estimation, recognition and detection simulator"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file of `key = value` lines; defaults apply otherwise.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    trials: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(p) => Scenario::from_file(p)?,
            None => Scenario::default(),
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(mode) = self.mode {
            s.mode = mode;
        }
        if let Some(t) = self.trials {
            s.trials = t;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Blind receiver SNR sweep, one CSV row per SNR point.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark receivers; writes `<out>/<benchmark>.csv`.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Syndrome-LLR prefix averages of every hypothesis for one frame.
    GammaTrace {
        #[command(flatten)]
        common: Common,
        /// SNR grid index.
        #[arg(long, default_value_t = 0)]
        snr_index: usize,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-hypothesis metrics here.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Writes the built-in parity-check matrices as alist files.
    ExportCodes {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::Sweep { common, out } => {
            let s = common.load()?;
            let rows = harness::run_scenario(&s)?;
            harness::emit_csv(&rows, &out)?;
        }
        Command::Bench { common, out } => {
            let s = common.load()?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for (b, rows) in harness::run_benchmarks(&s)? {
                harness::emit_csv(&rows, &out.join(format!("{}.csv", b.id())))?;
            }
        }
        Command::GammaTrace {
            common,
            snr_index,
            trial,
            out,
            metrics,
        } => {
            let s = common.load()?;
            let (truth, output) = harness::gamma_trace_trial(&s, snr_index, trial)?;
            harness::emit_gamma_trace(&output.records, &out)?;
            if let Some(path) = metrics {
                let mut buf = Vec::new();
                write_metric_csv(&output.records, &mut buf)?;
                std::fs::write(&path, buf)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            println!("true {truth} decided {}", output.decision.theta_hat);
        }
        Command::ExportCodes { out } => {
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for id in SHIPPED_CODES {
                let path = out.join(format!("{id}.alist"));
                std::fs::write(&path, alist::write(&builtin_matrix(id).context(id)?))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}
