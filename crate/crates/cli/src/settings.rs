use std::fmt;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use skelgen_core::config::KeyValues;

/// Process outcome other than success, mapped to the exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config keys or values (exit 1).
    Usage(String),
    /// Missing or malformed inputs (exit 2).
    Input(String),
    /// Divergence or an empty result from numeric work (exit 3).
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Input(m) => write!(f, "input error: {m}"),
            Failure::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<skelgen_core::Error> for Failure {
    fn from(e: skelgen_core::Error) -> Self {
        use skelgen_core::Error as E;
        match e {
            E::Numeric(_) | E::NonSmoothPoint => Failure::Numeric(e.to_string()),
            E::NotWatertight(ref edges) => {
                let shown: Vec<String> = edges.iter().take(8).map(|(a, b)| format!("({a},{b})")).collect();
                Failure::Input(format!(
                    "mesh is not watertight: {} offending edge(s): {}{}",
                    edges.len(),
                    shown.join(" "),
                    if edges.len() > shown.len() { " ..." } else { "" }
                ))
            }
            other => Failure::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

/// Attaches the offending path to a core error.
pub fn at<T>(path: &Path, r: skelgen_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Input(m) => Failure::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Profile {
    /// Generic shapes: 2560 points, 256 skeletal points, p = 0.3.
    #[default]
    General,
    /// Vascular shapes: 4096 points, 400 skeletal points, p = 0.1.
    Vessel,
    /// Desk-scale single-shape runs: 32 skeletal points, p = 1, 32^3 grids,
    /// lr 0.01 and 60% in-band training samples.
    Toy,
}

/// Profile-dependent defaults.
#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub points: usize,
    pub n_s: usize,
    pub p: f64,
    pub resolution: usize,
    /// Auto-encoder learning rate.
    pub lr: f64,
    /// Fraction of training samples drawn from the truncation band.
    pub inside_frac: f64,
}

impl Profile {
    pub fn defaults(self) -> Defaults {
        match self {
            Profile::General => Defaults {
                points: 2560,
                n_s: 256,
                p: 0.3,
                resolution: 100,
                lr: 1e-3,
                inside_frac: 0.9,
            },
            Profile::Vessel => Defaults {
                points: 4096,
                n_s: 400,
                p: 0.1,
                resolution: 100,
                lr: 1e-3,
                inside_frac: 0.9,
            },
            Profile::Toy => Defaults {
                points: 2560,
                n_s: 32,
                p: 1.0,
                resolution: 32,
                lr: 1e-2,
                inside_frac: 0.6,
            },
        }
    }
}

/// Layered settings: flag, then config file, then default.
pub struct Settings {
    pub defaults: Defaults,
    kv: KeyValues,
}

impl Settings {
    pub fn load(profile: Profile, config: Option<&Path>) -> CliResult<Self> {
        let kv = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
                KeyValues::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
            }
            None => KeyValues::default(),
        };
        Ok(Settings {
            defaults: profile.defaults(),
            kv,
        })
    }

    pub fn pick<T: FromStr>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T> {
        let from_file = self.kv.get::<T>(key).map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(flag.or(from_file).unwrap_or(default))
    }

    pub fn keys(&mut self) -> &mut KeyValues {
        &mut self.kv
    }

    /// Rejects keys no setting consumed.
    pub fn finish(self) -> CliResult<()> {
        self.kv.finish().map_err(|e| Failure::Usage(e.to_string()))
    }
}

pub fn require(cond: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(Failure::Usage(msg()))
    }
}
