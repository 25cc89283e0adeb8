//! `cabling` command-line tool: central configurations, cabled orbits and
//! parameter sweeps.

mod commands;
mod job;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{CentralRun, Generator, SweepValue};
use job::{CaseArg, JobSpec, SignArg};

#[derive(Parser)]
#[command(name = "cabling", version, about = "Cabled periodic orbits of the N-body problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for a central configuration and report its Hessian spectrum.
    Central(CentralArgs),
    /// Refine and certify one cabled orbit.
    Cable(CableArgs),
    /// Run many cabled orbits and tabulate the results.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CentralArgs {
    #[command(subcommand)]
    generator: GeneratorArgs,
    /// Gradient tolerance of the Newton solve.
    #[arg(long, default_value_t = 1e-12, global = true)]
    tol: f64,
    #[arg(long, default_value = ".", global = true)]
    out: PathBuf,
    /// Base name of the written files.
    #[arg(long, default_value = "configuration", global = true)]
    name: String,
    /// Write floats as hexadecimal strings.
    #[arg(long, global = true)]
    hex: bool,
    /// Exit 0 even when the Hessian kernel is larger than the rotation orbit.
    #[arg(long, global = true)]
    allow_degenerate: bool,
}

#[derive(Subcommand)]
enum GeneratorArgs {
    /// Regular polygon around a central mass.
    Maxwell {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        alpha: f64,
    },
    /// Regular polygon of unit masses.
    Lagrange {
        #[arg(long)]
        ring: usize,
        #[arg(long)]
        alpha: f64,
    },
    /// Configuration document used as the initial guess.
    Custom {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

/// Flags shared by `cable` and `sweep`; each overrides the job file.
#[derive(Args)]
struct JobArgs {
    /// TOML job specification.
    #[arg(long)]
    job: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    sign: Option<SignArg>,
    #[arg(long, value_enum)]
    case: Option<CaseArg>,
    /// Rotation order for case c2.
    #[arg(long)]
    m: Option<usize>,
    /// Body replaced by the pair.
    #[arg(long)]
    body: Option<usize>,
    /// Mass fraction of the first pair member.
    #[arg(long)]
    split: Option<f64>,
    /// Largest admissible pair radius.
    #[arg(long)]
    eps_max: Option<f64>,
    /// Fourier truncation.
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    gtol: Option<f64>,
    #[arg(long)]
    hex: bool,
}

impl JobArgs {
    fn spec(&self) -> Result<JobSpec> {
        let mut job = match &self.job {
            Some(path) => JobSpec::load(path)?,
            None => JobSpec::default(),
        };
        if let Some(c) = &self.config {
            job.config = Some(c.clone());
        }
        if let Some(s) = self.sign {
            job.sign = s;
        }
        if let Some(c) = self.case {
            job.case = c;
        }
        if self.m.is_some() {
            job.m = self.m;
        }
        if let Some(b) = self.body {
            job.body = b;
        }
        if let Some(s) = self.split {
            job.split = s;
        }
        if let Some(e) = self.eps_max {
            job.eps_max = e;
        }
        if let Some(l) = self.l {
            job.refine.l = l;
        }
        if let Some(g) = self.gtol {
            job.refine.gtol = g;
            job.thresholds.gtol = g;
        }
        job.hex |= self.hex;
        Ok(job)
    }
}

#[derive(Args)]
struct CableArgs {
    #[command(flatten)]
    common: JobArgs,
    #[arg(long, conflicts_with = "pq")]
    epsilon: Option<f64>,
    /// Pair frequency p/q.
    #[arg(long, num_args = 2, value_names = ["P", "Q"], allow_negative_numbers = true)]
    pq: Option<Vec<i64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: JobArgs,
    /// Pair radii to run.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["p", "p_range"])]
    epsilon: Vec<f64>,
    /// Values of p at fixed q.
    #[arg(long, value_delimiter = ',', conflicts_with = "p_range")]
    p: Vec<u64>,
    /// Values of p from START to END inclusive.
    #[arg(long, num_args = 3, value_names = ["START", "END", "STEP"])]
    p_range: Option<Vec<u64>>,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    q: i64,
    /// CSV table to write.
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Central(args) => {
            let generator = match args.generator {
                GeneratorArgs::Maxwell { n, mu, alpha } => Generator::Maxwell { n, mu, alpha },
                GeneratorArgs::Lagrange { ring, alpha } => Generator::Lagrange { ring, alpha },
                GeneratorArgs::Custom { input } => Generator::Custom { input },
            };
            commands::central(&CentralRun {
                generator,
                tol: args.tol,
                out: args.out,
                name: args.name,
                hex: args.hex,
                allow_degenerate: args.allow_degenerate,
            })
        }
        Command::Cable(args) => {
            let mut job = args.common.spec()?;
            if let Some(e) = args.epsilon {
                (job.epsilon, job.pq) = (Some(e), None);
            }
            if let Some(v) = &args.pq {
                (job.epsilon, job.pq) = (None, Some(commands::parse_pq(v)?));
            }
            if let Some(o) = args.out {
                job.out = o;
            }
            commands::cable(&job)
        }
        Command::Sweep(args) => {
            let mut base = args.common.spec()?;
            (base.epsilon, base.pq) = (None, None);
            let values: Vec<SweepValue> = if !args.epsilon.is_empty() {
                args.epsilon.iter().map(|&e| SweepValue::Epsilon(e)).collect()
            } else if let Some(r) = &args.p_range {
                commands::p_range(r[0], r[1], r[2])?.into_iter().map(SweepValue::P).collect()
            } else {
                args.p.iter().map(|&p| SweepValue::P(p)).collect()
            };
            commands::sweep(&base, args.q, &values, &args.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
