use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cabling::model::Sign;
use cabling::solver::{RefineOptions, Thresholds};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SignArg {
    #[default]
    Prograde,
    Retrograde,
}

impl From<SignArg> for Sign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Prograde => Sign::Prograde,
            SignArg::Retrograde => Sign::Retrograde,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CaseArg {
    #[default]
    C1,
    C2,
    C3,
}

/// Everything a `cable` run needs. Read from TOML, then overridden by flags.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobSpec {
    pub config: Option<PathBuf>,
    pub epsilon: Option<f64>,
    pub pq: Option<(u64, i64)>,
    pub sign: SignArg,
    pub case: CaseArg,
    /// Rotation order for case c2.
    pub m: Option<usize>,
    /// Body replaced by the pair.
    pub body: usize,
    /// Mass fraction of the first pair member.
    pub split: f64,
    pub a0: Option<Vec<f64>>,
    pub eps_max: f64,
    pub out: PathBuf,
    pub hex: bool,
    pub refine: RefineOptions,
    pub thresholds: Thresholds,
}

impl Default for JobSpec {
    fn default() -> Self {
        Self {
            config: None,
            epsilon: None,
            pq: None,
            sign: SignArg::default(),
            case: CaseArg::default(),
            m: None,
            body: 0,
            split: 0.5,
            a0: None,
            eps_max: cabling::model::CablingSetup::DEFAULT_EPS_MAX,
            out: PathBuf::from("."),
            hex: false,
            refine: RefineOptions::default(),
            thresholds: Thresholds::default(),
        }
    }
}

impl JobSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut job: JobSpec = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative paths in a job file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(c) = &job.config {
            if c.is_relative() {
                job.config = Some(base.join(c));
            }
        }
        if job.out.is_relative() {
            job.out = base.join(&job.out);
        }
        Ok(job)
    }

    /// Checks that need no numerics.
    pub fn validate(&self) -> Result<()> {
        if self.config.is_none() {
            bail!("no configuration given (--config or `config` in the job file)");
        }
        match (self.epsilon, self.pq) {
            (Some(_), Some(_)) => bail!("give either an epsilon or a (p, q) pair, not both"),
            (None, None) => bail!("give an epsilon or a (p, q) pair"),
            _ => {}
        }
        if self.case == CaseArg::C2 && self.m.is_none() {
            bail!("case c2 needs the rotation order m");
        }
        if self.case != CaseArg::C2 && self.m.is_some() {
            bail!("m only applies to case c2");
        }
        Ok(())
    }
}
