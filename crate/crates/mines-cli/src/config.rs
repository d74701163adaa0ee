//! Experiment spec parsing: a flat `key = value` file, one assignment per
//! line, `#` comments. The full key list is documented in the README; errors
//! carry the offending line number.

use std::collections::BTreeMap;
use std::fmt;

use mines::optimizers::StepSchedule;

#[derive(Debug)]
pub struct SpecError {
    pub line: Option<usize>,
    pub message: String,
}

impl SpecError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "spec error at line {line}: {}", self.message),
            None => write!(f, "spec error: {}", self.message),
        }
    }
}

impl std::error::Error for SpecError {}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    Quadratic {
        dim: usize,
        sigma_min: f64,
        l_max: f64,
        seed: u64,
    },
    Ssphere {
        dim: usize,
    },
    Diffpow {
        dim: usize,
    },
    Logistic {
        beta: f64,
        data: Option<String>,
        forced_dim: Option<usize>,
        synthetic_n: usize,
        synthetic_d: usize,
        synthetic_seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mu0Spec {
    Zeros,
    Ones,
    /// Standard normal scaled by `mu0_scale`, drawn from the run seed.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinesSpec {
    pub alpha: f64,
    pub batch: usize,
    pub eta1: Option<f64>, // None = theorem default 1/(2(d+2))
    pub eta2: StepSchedule,
    pub tau: f64,
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfSpec {
    pub alpha: f64,
    pub batch: usize,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NesSpec {
    pub eta: f64,
    pub batch: usize,
    /// Initial covariance is `sigma0^2 I`.
    pub sigma0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub objective: ObjectiveSpec,
    pub mu0: Mu0Spec,
    pub mu0_scale: f64,
    pub seeds: Vec<u64>,
    pub max_queries: u64,
    pub output: String,
    pub plot: bool,
    pub mines: Option<MinesSpec>,
    pub df: Option<DfSpec>,
    pub nes: Option<NesSpec>,
}

struct Raw {
    entries: BTreeMap<String, (usize, String)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, SpecError> {
        let mut entries = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(SpecError::at(
                    line_no,
                    format!("expected 'key = value', got '{line}'"),
                ));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(SpecError::at(line_no, "empty key or value"));
            }
            if let Some((prev, _)) = entries.insert(key.clone(), (line_no, value)) {
                return Err(SpecError::at(
                    line_no,
                    format!("duplicate key '{key}' (first set at line {prev})"),
                ));
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn take_parsed<T: std::str::FromStr>(
        &mut self,
        key: &str,
    ) -> Result<Option<T>, SpecError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| {
                SpecError::at(
                    line,
                    format!("cannot parse value '{v}' for key '{key}'"),
                )
            }),
        }
    }

    fn take_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, SpecError> {
        Ok(self.take_parsed(key)?.unwrap_or(default))
    }

    fn require<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, SpecError> {
        self.take_parsed(key)?
            .ok_or_else(|| SpecError::global(format!("missing required key '{key}'")))
    }
}

pub fn parse_spec(text: &str) -> Result<ExperimentSpec, SpecError> {
    let mut raw = Raw::parse(text)?;

    let name: String = raw.take_or("name", "experiment".to_string())?;
    let output: String = raw.require("output")?;
    let max_queries: u64 = raw.require("max_queries")?;
    if max_queries == 0 {
        return Err(SpecError::global("max_queries must be at least 1"));
    }
    let plot: bool = raw.take_or("plot", false)?;

    let (seeds_line, seeds_raw) = raw
        .take("seeds")
        .ok_or_else(|| SpecError::global("missing required key 'seeds'"))?;
    let seeds: Vec<u64> = seeds_raw
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| SpecError::at(seeds_line, format!("bad seed '{}'", s.trim())))
        })
        .collect::<Result<_, _>>()?;
    if seeds.is_empty() {
        return Err(SpecError::at(seeds_line, "seeds must be nonempty"));
    }

    let (algos_line, algos_raw) = raw
        .take("algos")
        .ok_or_else(|| SpecError::global("missing required key 'algos'"))?;
    let mut want_mines = false;
    let mut want_df = false;
    let mut want_nes = false;
    for a in algos_raw.split(',') {
        match a.trim() {
            "mines" => want_mines = true,
            "df" => want_df = true,
            "nes" => want_nes = true,
            other => {
                return Err(SpecError::at(
                    algos_line,
                    format!("unknown algorithm '{other}' (expected mines, nes or df)"),
                ))
            }
        }
    }
    if !(want_mines || want_df || want_nes) {
        return Err(SpecError::at(algos_line, "algos must list at least one algorithm"));
    }

    let (obj_line, obj_raw) = raw
        .take("objective")
        .ok_or_else(|| SpecError::global("missing required key 'objective'"))?;
    let objective = match obj_raw.as_str() {
        "quadratic" => ObjectiveSpec::Quadratic {
            dim: raw.require("dim")?,
            sigma_min: raw.take_or("quadratic.sigma_min", 1.0)?,
            l_max: raw.take_or("quadratic.l_max", 100.0)?,
            seed: raw.take_or("quadratic.seed", 0)?,
        },
        "ssphere" => ObjectiveSpec::Ssphere {
            dim: raw.require("dim")?,
        },
        "diffpow" => ObjectiveSpec::Diffpow {
            dim: raw.require("dim")?,
        },
        "logistic" => ObjectiveSpec::Logistic {
            beta: raw.take_or("logistic.beta", 1e-4)?,
            data: raw.take("logistic.data").map(|(_, v)| v),
            forced_dim: raw.take_parsed("logistic.dim")?,
            synthetic_n: raw.take_or("logistic.synthetic_n", 500)?,
            synthetic_d: raw.take_or("logistic.synthetic_d", 30)?,
            synthetic_seed: raw.take_or("logistic.synthetic_seed", 0)?,
        },
        other => {
            return Err(SpecError::at(
                obj_line,
                format!("unknown objective '{other}'"),
            ))
        }
    };

    let mu0 = match raw.take("mu0") {
        None => Mu0Spec::Zeros,
        Some((_, v)) if v == "zeros" => Mu0Spec::Zeros,
        Some((_, v)) if v == "ones" => Mu0Spec::Ones,
        Some((_, v)) if v == "gaussian" => Mu0Spec::Gaussian,
        Some((line, v)) => {
            return Err(SpecError::at(
                line,
                format!("mu0 must be zeros, ones or gaussian, got '{v}'"),
            ))
        }
    };
    let mu0_scale: f64 = raw.take_or("mu0_scale", 1.0)?;

    let mines = if want_mines {
        let eta1 = match raw.take("mines.eta1") {
            None => None,
            Some((_, v)) if v == "default" => None,
            Some((line, v)) => Some(v.parse::<f64>().map_err(|_| {
                SpecError::at(line, format!("mines.eta1 must be 'default' or a number, got '{v}'"))
            })?),
        };
        let eta2 = match raw.take("mines.eta2") {
            None => StepSchedule::OneOverK,
            Some((_, v)) if v == "one_over_k" => StepSchedule::OneOverK,
            Some((line, v)) => StepSchedule::Constant(v.parse::<f64>().map_err(|_| {
                SpecError::at(
                    line,
                    format!("mines.eta2 must be 'one_over_k' or a number, got '{v}'"),
                )
            })?),
        };
        Some(MinesSpec {
            alpha: raw.take_or("mines.alpha", 0.01)?,
            batch: raw.take_or("mines.batch", 1)?,
            eta1,
            eta2,
            tau: raw.require("mines.tau")?,
            zeta: raw.require("mines.zeta")?,
        })
    } else {
        None
    };

    let df = if want_df {
        Some(DfSpec {
            alpha: raw.take_or("df.alpha", 0.01)?,
            batch: raw.take_or("df.batch", 1)?,
            eta: raw.require("df.eta")?,
        })
    } else {
        None
    };

    let nes = if want_nes {
        Some(NesSpec {
            eta: raw.require("nes.eta")?,
            batch: raw.take_or("nes.batch", 10)?,
            sigma0: raw.take_or("nes.sigma0", 0.01)?,
        })
    } else {
        None
    };

    if let Some((line, _)) = raw.entries.values().next() {
        let key = raw.entries.keys().next().unwrap().clone();
        return Err(SpecError::at(*line, format!("unknown key '{key}'")));
    }

    Ok(ExperimentSpec {
        name,
        objective,
        mu0,
        mu0_scale,
        seeds,
        max_queries,
        output,
        plot,
        mines,
        df,
        nes,
    })
}
