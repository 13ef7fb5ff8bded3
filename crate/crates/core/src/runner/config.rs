//! Run configuration: a TOML file, command-line overrides and per-command
//! defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::discretize::Grid;
use crate::error::{Error, Result};
use crate::forward::{Scheme, SolveOptions};
use crate::model::{
    preset, sine_of_gradient, BoundaryCondition, CoefficientSet, Preset, ProblemSetup, Region,
    Semilinearity,
};
use crate::reconstruct::Filter;
use crate::stability::PerturbationFamily;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "PARASTAB_OUT";
const DEFAULT_OUT: &str = "parastab-out";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Forward,
    Carleman,
    Holder,
    Lograte,
    Reconstruct,
    Validate,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Forward,
        Command::Carleman,
        Command::Holder,
        Command::Lograte,
        Command::Reconstruct,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Carleman => "carleman",
            Command::Holder => "holder",
            Command::Lograte => "lograte",
            Command::Reconstruct => "reconstruct",
            Command::Validate => "validate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command '{s}'")))
    }
}

/// Constant coefficients given inline instead of a preset. Matrices are
/// indexed `[k][l]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineCoefficients {
    pub diffusion: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// `zero` or `sine_gradient`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// Every field is optional; [`RunConfig::resolve`] fills command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc: Option<BoundaryCondition>,
    /// Constant Robin coefficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<Filter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    /// `single_mode`, `two_mode`, `high_mode:K`, `random_smooth:MODES` or `robin_compatible`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// A-priori bound on `sup_t ‖u‖_{H¹}` in the Hölder experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Random pairs for the Lipschitz check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Terminal data for `reconstruct` (grid-function CSV).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<InlineCoefficients>,
    /// Run metadata written into manifests; ignored on input.
    #[serde(default, skip_serializing)]
    pub run: Option<toml::Table>,
}

fn parse_list(raw: &str, name: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("--{name}: '{v}' is not a number")))
        })
        .collect()
}

/// Parses a comma-separated list of numbers such as `1e-1,1e-2`.
pub fn number_list(raw: &str, name: &str) -> Result<Vec<f64>> {
    let list = parse_list(raw, name)?;
    if list.is_empty() {
        return Err(Error::Config(format!("--{name} is empty")));
    }
    Ok(list)
}

fn parse_family(raw: &str, seed: u64) -> Result<PerturbationFamily> {
    let (name, arg) = match raw.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (raw, None),
    };
    let index = |default: usize| -> Result<usize> {
        arg.map_or(Ok(default), |a| {
            a.parse()
                .map_err(|_| Error::Config(format!("family '{raw}': '{a}' is not an integer")))
        })
    };
    match name {
        "single_mode" => Ok(PerturbationFamily::SingleMode),
        "two_mode" => Ok(PerturbationFamily::TwoMode),
        "high_mode" => Ok(PerturbationFamily::HighMode(index(5)?)),
        "random_smooth" => Ok(PerturbationFamily::RandomSmooth {
            modes: index(8)?,
            seed,
        }),
        "robin_compatible" => Ok(PerturbationFamily::RobinCompatible),
        _ => Err(Error::Config(format!(
            "unknown family '{raw}' (single_mode, two_mode, high_mode:K, random_smooth:M, robin_compatible)"
        ))),
    }
}

impl RunConfig {
    /// Parses TOML text; errors carry the line and field.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self)
            .map_err(|e| Error::Config(format!("cannot serialize configuration: {e}")))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: over.$f.or(self.$f),)* run: None } };
        }
        pick!(
            command,
            preset,
            bc,
            p,
            nx,
            nt,
            horizon,
            t0,
            lambda,
            s,
            eps,
            alpha,
            delta,
            filter,
            scheme,
            family,
            amplitude,
            bound,
            stride,
            samples,
            pairs,
            seed,
            out,
            input,
            coefficients
        )
    }

    /// Fills defaults for the chosen command and checks the result.
    pub fn resolve(self) -> Result<RunConfig> {
        let command = self.command.ok_or_else(|| {
            Error::Config("no command given (set `command = ...` or use a subcommand)".into())
        })?;
        let mut c = self;
        c.run = None;
        if c.preset.is_none() && c.coefficients.is_none() {
            c.preset = Some(Preset::Heat1d.name().into());
        }
        if let Some(name) = &c.preset {
            c.preset = Some(name.parse::<Preset>()?.name().into());
        }
        c.nx.get_or_insert(100);
        c.nt.get_or_insert(1000);
        c.horizon.get_or_insert(1.0);
        c.seed.get_or_insert(0);
        c.scheme.get_or_insert(Scheme::CrankNicolson);
        c.amplitude.get_or_insert(1.0);
        c.out = Some(c.out.unwrap_or_else(|| {
            std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
        }));
        match command {
            Command::Forward => {
                c.stride.get_or_insert(10);
            }
            Command::Carleman => {
                c.s.get_or_insert(vec![2.0, 4.0, 8.0, 16.0, 32.0]);
                c.lambda.get_or_insert(vec![2.0, 4.0, 8.0]);
            }
            Command::Holder => {
                c.t0.get_or_insert(0.5);
                c.lambda.get_or_insert(vec![4.0]);
                c.eps.get_or_insert(vec![1e-1, 1e-2, 1e-3, 1e-4]);
                c.family.get_or_insert("single_mode".into());
            }
            Command::Lograte => {
                c.alpha.get_or_insert(0.5);
                c.eps.get_or_insert(vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6]);
                c.family.get_or_insert("single_mode".into());
            }
            Command::Reconstruct => {
                c.alpha.get_or_insert(0.5);
                c.filter.get_or_insert(Filter::Tikhonov);
                c.delta.get_or_insert(vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6]);
            }
            Command::Validate => {
                c.samples.get_or_insert(256);
                c.pairs.get_or_insert(100);
            }
        }
        c.grid()?;
        c.setup()?;
        if let Some(f) = &c.family {
            parse_family(f, c.seed())?;
        }
        for (name, list) in [("lambda", &c.lambda), ("s", &c.s)] {
            if list.as_ref().is_some_and(|l| l.is_empty()) {
                return Err(Error::Config(format!("{name} list is empty")));
            }
        }
        Ok(c)
    }

    pub fn command(&self) -> Command {
        self.command.expect("resolved configuration has a command")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> &Path {
        self.out
            .as_deref()
            .expect("resolved configuration has an output directory")
    }

    pub fn grid(&self) -> Result<Grid> {
        let nx = self.nx.ok_or_else(|| Error::Config("nx missing".into()))?;
        let nt = self.nt.ok_or_else(|| Error::Config("nt missing".into()))?;
        let horizon = self
            .horizon
            .ok_or_else(|| Error::Config("T missing".into()))?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("T = {horizon} must be positive")));
        }
        Grid::on_pi(nx, horizon, nt)
    }

    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            scheme: self.scheme.unwrap_or_default(),
            ..SolveOptions::default()
        }
    }

    pub fn family(&self) -> Result<PerturbationFamily> {
        parse_family(self.family.as_deref().unwrap_or("single_mode"), self.seed())
    }

    /// Problem from the preset or the inline coefficients, with the
    /// boundary-condition override applied.
    pub fn setup(&self) -> Result<ProblemSetup> {
        let horizon = self.horizon.unwrap_or(1.0);
        let mut setup = match (&self.coefficients, &self.preset) {
            (Some(inline), _) => inline_setup(inline, horizon)?,
            (None, Some(name)) => {
                let mut s = preset(name.parse()?);
                s.coeffs = s.coeffs.with_horizon(horizon);
                s
            }
            (None, None) => return Err(Error::Config("no preset or coefficients given".into())),
        };
        match (self.bc, self.p) {
            (Some(BoundaryCondition::Robin), Some(p)) | (None, Some(p)) => {
                setup = setup.with_robin(p)
            }
            (Some(BoundaryCondition::Robin), None) => {
                return Err(Error::Config(
                    "bc = robin needs a Robin coefficient p".into(),
                ))
            }
            (Some(BoundaryCondition::Dirichlet), _) => setup.bc = BoundaryCondition::Dirichlet,
            (None, None) => {}
        }
        Ok(setup)
    }
}

fn inline_setup(inline: &InlineCoefficients, horizon: f64) -> Result<ProblemSetup> {
    let region = Region::interval(std::f64::consts::PI, horizon);
    let coeffs = CoefficientSet::constant_1d(
        &inline.diffusion,
        inline.drift.as_deref(),
        inline.reaction.as_deref(),
        inline.sigma.unwrap_or(1.0),
        region,
    )?;
    let n = coeffs.components();
    let source = match inline.source.as_deref().unwrap_or("zero") {
        "zero" => Semilinearity::zero(n, 1),
        "sine_gradient" => sine_of_gradient(n),
        other => {
            return Err(Error::Config(format!(
                "unknown source '{other}' (zero or sine_gradient)"
            )))
        }
    };
    Ok(ProblemSetup {
        coeffs,
        bc: BoundaryCondition::Dirichlet,
        source,
    })
}
