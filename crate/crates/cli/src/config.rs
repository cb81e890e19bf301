//! Run configuration: flat `key = value` text with `#` comments.

use std::collections::BTreeMap;
use std::path::PathBuf;

use stfosls::driver::StopCriteria;
use stfosls::marking::{MarkingConfig, Strategy};
use stfosls::problem::{BuiltinCase, ConvectionForm};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Parabolic,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Adaptive,
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub case: BuiltinCase,
    pub system: SystemKind,
    pub form: ConvectionForm,
    pub degree: usize,
    pub marking: MarkingConfig,
    pub stop: StopCriteria,
    pub mode: RunMode,
    /// Number of solves in uniform mode.
    pub levels: usize,
    /// Initial mesh resolution in time and space.
    pub nt: usize,
    pub nx: usize,
    pub out: Option<PathBuf>,
}

const KEYS: [&str; 14] = [
    "case",
    "system",
    "form",
    "degree",
    "marking",
    "theta",
    "max_iterations",
    "max_dofs",
    "tolerance",
    "mode",
    "levels",
    "nt",
    "nx",
    "out",
];

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!(
                "line {}: unknown key `{key}`",
                i + 1
            )));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config(format!(
                "line {}: duplicate key `{key}`",
                i + 1
            )));
        }
    }
    Ok(map)
}

fn number<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    map.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
        })
        .transpose()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let map = parse_pairs(text)?;
        let get = |key: &str| map.get(key).map(String::as_str);
        let case = BuiltinCase::from_name(get("case").unwrap_or("heat-smooth"))
            .map_err(CliError::from_core_config)?;
        let system = match get("system").unwrap_or("parabolic") {
            "parabolic" => SystemKind::Parabolic,
            "poisson" => SystemKind::Poisson,
            other => return Err(CliError::Config(format!("unknown system `{other}`"))),
        };
        let form = match get("form").unwrap_or("flux") {
            "flux" => ConvectionForm::FluxForm,
            "gradient" => ConvectionForm::GradientForm,
            other => return Err(CliError::Config(format!("unknown form `{other}`"))),
        };
        let mode = match get("mode").unwrap_or("adaptive") {
            "adaptive" => RunMode::Adaptive,
            "uniform" => RunMode::Uniform,
            other => return Err(CliError::Config(format!("unknown mode `{other}`"))),
        };
        let strategy = match get("marking").unwrap_or("doerfler") {
            "doerfler" => Strategy::Doerfler,
            "maximum" => Strategy::Maximum,
            other => return Err(CliError::Config(format!("unknown marking `{other}`"))),
        };
        let theta = number(&map, "theta")?.unwrap_or(0.5);
        let marking = MarkingConfig::new(strategy, theta).map_err(CliError::from_core_config)?;
        let degree = number(&map, "degree")?.unwrap_or(1);
        if !(1..=2).contains(&degree) {
            return Err(CliError::Config(format!(
                "degree {degree} unsupported (1 or 2)"
            )));
        }
        let stop = StopCriteria {
            max_iterations: number(&map, "max_iterations")?.unwrap_or(usize::MAX),
            max_dofs: number(&map, "max_dofs")?.unwrap_or(usize::MAX),
            estimator_tolerance: number(&map, "tolerance")?.unwrap_or(0.0),
        };
        let levels = number(&map, "levels")?.unwrap_or(0);
        match mode {
            RunMode::Adaptive => stop.validate().map_err(CliError::from_core_config)?,
            RunMode::Uniform if levels == 0 => {
                return Err(CliError::Config("uniform mode needs `levels` >= 1".into()));
            }
            RunMode::Uniform => {}
        }
        let nt = number(&map, "nt")?.unwrap_or(2);
        let nx = number(&map, "nx")?.unwrap_or(2);
        if nt == 0 || nx == 0 {
            return Err(CliError::Config("`nt` and `nx` must be positive".into()));
        }
        let out = get("out").map(PathBuf::from);
        Ok(Self {
            case,
            system,
            form,
            degree,
            marking,
            stop,
            mode,
            levels,
            nt,
            nx,
            out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_comments() {
        let cfg = RunConfig::parse("# adaptive heat\nmax_iterations = 5  # short\n\n").unwrap();
        assert_eq!(cfg.case, BuiltinCase::HeatSmooth);
        assert_eq!(cfg.mode, RunMode::Adaptive);
        assert_eq!(cfg.stop.max_iterations, 5);
        assert_eq!(
            cfg.marking,
            MarkingConfig::new(Strategy::Doerfler, 0.5).unwrap()
        );
        assert_eq!((cfg.nt, cfg.nx, cfg.degree), (2, 2, 1));
    }

    #[test]
    fn full_config() {
        let text = "case = convection-reaction\nsystem = parabolic\nform = gradient\ndegree = 2\n\
                    marking = maximum\ntheta = 0.3\nmode = uniform\nlevels = 3\nnt = 4\nnx = 3\nout = runs/a";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.form, ConvectionForm::GradientForm);
        assert_eq!(cfg.marking.strategy, Strategy::Maximum);
        assert_eq!(cfg.levels, 3);
        assert_eq!(cfg.out, Some(PathBuf::from("runs/a")));
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "theta = 0\nmax_iterations = 3",
            "marking = maximum\ntheta = 1.5\nmax_iterations = 3",
            "degree = 3\nmax_iterations = 3",
            "colour = blue",
            "max_iterations",
            "max_iterations = many",
            "case = nonsense\nmax_iterations = 3",
            "mode = uniform",
            "mode = adaptive",
            "max_iterations = 2\nmax_iterations = 3",
            "nt = 0\nmax_iterations = 3",
        ] {
            assert!(
                matches!(RunConfig::parse(text), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }
}
