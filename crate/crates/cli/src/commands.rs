use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cabling::action::{gradient_part, ActionParams, ActionPart};
use cabling::central::{
    c2_sigma, lagrange_polygon, maxwell_configuration, nondegeneracy_report, CentralSolver, Configuration,
};
use cabling::io::{self, FloatFormat};
use cabling::model::{CablingSetup, SymmetryCase};
use cabling::solver::{aligned_distance, build_ansatz, cable_configuration, certify, refine, OrbitSolution};
use rayon::prelude::*;

use crate::job::{CaseArg, JobSpec};

/// Failures with their own exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Degenerate(String),
    Certification(Vec<String>),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Degenerate(m) => write!(f, "degenerate central configuration: {m}"),
            Failure::Certification(names) => write!(f, "certification failed: {}", names.join(", ")),
        }
    }
}

impl std::error::Error for Failure {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Failure::Usage(msg.into()).into()
}

fn format_of(hex: bool) -> FloatFormat {
    if hex {
        FloatFormat::Hex
    } else {
        FloatFormat::Decimal
    }
}

pub enum Generator {
    Maxwell { n: usize, mu: f64, alpha: f64 },
    Lagrange { ring: usize, alpha: f64 },
    Custom { input: PathBuf },
}

pub struct CentralRun {
    pub generator: Generator,
    pub tol: f64,
    pub out: PathBuf,
    pub name: String,
    pub hex: bool,
    pub allow_degenerate: bool,
}

pub fn central(run: &CentralRun) -> Result<()> {
    let guess = match &run.generator {
        Generator::Maxwell { n, mu, alpha } => maxwell_configuration(*n, *mu, *alpha)?,
        Generator::Lagrange { ring, alpha } => lagrange_polygon(*ring, *alpha)?,
        Generator::Custom { input } => io::read_document::<Configuration>(input, io::CONFIGURATION)
            .with_context(|| format!("reading {}", input.display()))?,
    };
    let solver = CentralSolver { tol: run.tol, ..CentralSolver::default() };
    let sol = solver.solve(&guess)?;
    let report = nondegeneracy_report(&sol.configuration, 1e-8)?;
    std::fs::create_dir_all(&run.out)?;
    let format = format_of(run.hex);
    let config_path = run.out.join(format!("{}.json", run.name));
    io::write_document(&config_path, &sol.configuration, io::CONFIGURATION, format)?;
    io::write_document(&run.out.join(format!("{}.spectrum.json", run.name)), &report, io::SPECTRUM, format)?;
    println!(
        "{}: residual {:.3e} after {} iterations, kernel dimension {} (expected {})",
        config_path.display(),
        sol.residual,
        sol.iterations,
        report.kernel_dim,
        report.expected_kernel_dim
    );
    if !report.nondegenerate && !run.allow_degenerate {
        return Err(Failure::Degenerate(format!(
            "kernel dimension {} where the rotation orbit gives {}",
            report.kernel_dim, report.expected_kernel_dim
        ))
        .into());
    }
    Ok(())
}

/// Parameters, ansatz input and the cabled configuration of a job.
pub fn prepare(job: &JobSpec) -> Result<(ActionParams, Configuration)> {
    job.validate().map_err(|e| usage(e.to_string()))?;
    let path = job.config.as_ref().expect("validated");
    let cfg: Configuration =
        io::read_document(path, io::CONFIGURATION).with_context(|| format!("reading {}", path.display()))?;
    let (ms, cabled) = cable_configuration(&cfg, job.body, job.split)?;
    let case = match job.case {
        CaseArg::C1 => SymmetryCase::C1,
        CaseArg::C3 => SymmetryCase::C3,
        CaseArg::C2 => {
            let m = job.m.expect("validated");
            let sigma = c2_sigma(&cabled, m).ok_or_else(|| {
                cabling::Error::Configuration(format!("configuration has no rotation symmetry of order {m}"))
            })?;
            SymmetryCase::C2 { m, sigma }
        }
    };
    let setup = match (job.epsilon, job.pq) {
        (Some(eps), None) => {
            CablingSetup::from_epsilon_with_limit(eps, cfg.alpha, job.sign.into(), case, cfg.d, job.eps_max)?
        }
        (None, Some((p, q))) => CablingSetup::from_pq(p, q, cfg.alpha, job.sign.into(), case, cfg.d, job.eps_max)?,
        _ => unreachable!("validated"),
    };
    let a0 = job.a0.clone().unwrap_or_else(|| {
        let mut a = vec![0.0; 2 * cfg.d];
        a[0] = 1.0;
        a
    });
    let params = ActionParams::new(ms, setup, a0, job.refine.l)?;
    Ok((params, cabled))
}

pub struct Outcome {
    pub solution: OrbitSolution,
    pub coupling_ratio: f64,
    pub correction_ratio: f64,
}

impl Outcome {
    pub fn failed(&self) -> Vec<String> {
        match &self.solution.diagnostics {
            Some(d) => d.failed().into_iter().map(String::from).collect(),
            None => Vec::new(),
        }
    }
}

/// Ansatz, refinement and, for a rational pair frequency, certification.
/// Without a period only the gradient tolerance is checked.
pub fn run_job(job: &JobSpec) -> Result<Outcome> {
    let (params, cabled) = prepare(job)?;
    let x0 = build_ansatz(&cabled, &params)?;
    let mut solution = refine(&x0, &params, &job.refine)?;
    if params.setup.period().is_some() {
        solution.diagnostics = Some(certify(&solution, &job.thresholds)?);
    } else if solution.grad_norm > job.thresholds.gtol {
        bail!(Failure::Certification(vec!["grad_norm".into()]));
    }
    let eps = params.setup.epsilon;
    let coupling_ratio = gradient_part(&solution.loop_state, &params, ActionPart::H)?.h1_norm() / eps;
    let correction_ratio = aligned_distance(&solution.loop_state, &x0) / eps;
    Ok(Outcome { solution, coupling_ratio, correction_ratio })
}

pub fn cable(job: &JobSpec) -> Result<()> {
    let outcome = run_job(job)?;
    let sol = &outcome.solution;
    let format = format_of(job.hex);
    std::fs::create_dir_all(&job.out)?;
    io::write_document(&job.out.join("orbit.json"), sol, io::ORBIT, format)?;
    io::atomic_write(&job.out.join("trajectory.csv"), sol.trajectory.to_csv().as_bytes())?;
    let braid = sol.diagnostics.as_ref().and_then(|d| d.braid.as_ref());
    if let Some(b) = braid {
        io::write_document(&job.out.join("braid.json"), b, io::BRAID, format)?;
    }
    println!(
        "epsilon {:.6e}, grad_norm {:.3e}, iterations {}, |x - x_a|/epsilon {:.4e}",
        sol.params.setup.epsilon, sol.grad_norm, sol.stats.iterations, outcome.correction_ratio
    );
    if let Some(b) = braid {
        println!(
            "pair winding {}, centre windings {:?}, exponent sum {}, pure {}",
            b.pair_winding, b.center_windings, b.exponent_sum, b.pure
        );
    }
    let failed = outcome.failed();
    if !failed.is_empty() {
        return Err(Failure::Certification(failed).into());
    }
    Ok(())
}

/// Swept quantity.
#[derive(Clone, Copy, Debug)]
pub enum SweepValue {
    Epsilon(f64),
    P(u64),
}

pub struct SweepRow {
    pub value: SweepValue,
    pub result: Result<Outcome>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SweepRow {
    fn csv(&self) -> String {
        let (p, eps_in) = match self.value {
            SweepValue::Epsilon(e) => (String::new(), format!("{e:.17e}")),
            SweepValue::P(p) => (p.to_string(), String::new()),
        };
        match &self.result {
            Ok(o) => {
                let s = &o.solution;
                let d = s.diagnostics.as_ref();
                let failed = o.failed();
                let status = if failed.is_empty() { "certified" } else { "failed" };
                let rk = d.map(|d| format!("{:.6e}", d.ode.rk_half.max(d.ode.rk_full))).unwrap_or_default();
                let per = d.map(|d| format!("{:.6e}", d.periodicity)).unwrap_or_default();
                let wind = d.and_then(|d| d.braid.as_ref()).map(|b| b.pair_winding.to_string()).unwrap_or_default();
                let eps = if eps_in.is_empty() { format!("{:.17e}", s.params.setup.epsilon) } else { eps_in };
                format!(
                    "{p},{eps},{status},{:.6e},{rk},{per},{wind},{:.6e},{:.6e},{}\n",
                    s.grad_norm,
                    o.coupling_ratio,
                    o.correction_ratio,
                    csv_field(&failed.join(" "))
                )
            }
            Err(e) => format!("{p},{eps_in},error,,,,,,,{}\n", csv_field(&format!("{e:#}"))),
        }
    }
}

pub const SWEEP_HEADER: &str =
    "p,epsilon,status,grad_norm,ode_rk,periodicity,pair_winding,coupling_ratio,correction_ratio,detail\n";

fn threads() -> Result<usize> {
    match std::env::var("CABLING_THREADS") {
        Ok(v) => v.trim().parse().map_err(|_| usage(format!("CABLING_THREADS must be a count, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

pub fn sweep(base: &JobSpec, q: i64, values: &[SweepValue], out: &Path) -> Result<()> {
    if values.is_empty() {
        return Err(usage("the sweep range is empty"));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads()?).build()?;
    let rows: Vec<SweepRow> = pool.install(|| {
        values
            .par_iter()
            .map(|&value| {
                let mut job = base.clone();
                match value {
                    SweepValue::Epsilon(e) => (job.epsilon, job.pq) = (Some(e), None),
                    SweepValue::P(p) => (job.epsilon, job.pq) = (None, Some((p, q))),
                }
                SweepRow { value, result: run_job(&job) }
            })
            .collect()
    });
    let mut text = String::from(SWEEP_HEADER);
    for row in &rows {
        text.push_str(&row.csv());
    }
    io::atomic_write(out, text.as_bytes())?;
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.result.as_ref().map(|o| !o.failed().is_empty()).unwrap_or(true))
        .map(|r| match r.value {
            SweepValue::Epsilon(e) => format!("epsilon={e}"),
            SweepValue::P(p) => format!("p={p}"),
        })
        .collect();
    println!("{}: {} of {} runs certified", out.display(), rows.len() - bad.len(), rows.len());
    if !bad.is_empty() {
        return Err(Failure::Certification(bad).into());
    }
    Ok(())
}

/// `start..=end` in steps of `step`.
pub fn p_range(start: u64, end: u64, step: u64) -> Result<Vec<u64>> {
    if step == 0 {
        return Err(usage("the range step must be positive"));
    }
    Ok((start..=end).step_by(step as usize).collect())
}

/// Exit status of an error: 2 usage, 3 divergence, 4 degenerate,
/// 5 domain or configuration, 6 certification, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Usage(_) => 2,
                Failure::Degenerate(_) => 4,
                Failure::Certification(_) => 6,
            };
        }
        if let Some(e) = cause.downcast_ref::<cabling::Error>() {
            return match e {
                cabling::Error::Convergence { .. } => 3,
                cabling::Error::Degenerate(_) => 4,
                cabling::Error::Domain(_)
                | cabling::Error::Configuration(_)
                | cabling::Error::Parameter(_)
                | cabling::Error::Precondition(_)
                | cabling::Error::Structural(_) => 5,
                cabling::Error::Parse(_) | cabling::Error::Json(_) => 5,
                _ => 1,
            };
        }
    }
    1
}

pub fn parse_pq(v: &[i64]) -> Result<(u64, i64)> {
    match v {
        [p, q] if *p > 0 => Ok((*p as u64, *q)),
        _ => Err(anyhow!(Failure::Usage("--pq takes a positive p and a nonzero q".into()))),
    }
}
