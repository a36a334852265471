//! Flat `key = value` scenario configuration.
//!
//! Format rules: one assignment per line, `#` starts a comment,
//! keys are case-sensitive, duplicate or unknown keys are rejected.
//! Numeric values accept an optional `2pi*` prefix meaning
//! multiplication by 2π (frequencies are quoted both ways in the
//! literature), e.g. `Delta_a = 2pi*50e6`.

use std::collections::BTreeMap;
use std::fmt;

use crate::cavity::LabInputs;
use crate::model::{ModelFamily, ModelSpec};

/// Configuration error with the offending line number(s).
#[derive(Debug)]
pub enum ConfigError {
    Syntax {
        line: usize,
        detail: String,
    },
    DuplicateKey {
        key: String,
        first_line: usize,
        second_line: usize,
    },
    UnknownKey {
        key: String,
        line: usize,
    },
    MissingKey {
        key: &'static str,
        scenario: String,
    },
    BadValue {
        key: String,
        line: usize,
        detail: String,
    },
    Semantic(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, detail } => write!(f, "line {line}: {detail}"),
            ConfigError::DuplicateKey {
                key,
                first_line,
                second_line,
            } => write!(
                f,
                "duplicate key `{key}` on lines {first_line} and {second_line}"
            ),
            ConfigError::UnknownKey { key, line } => {
                write!(f, "line {line}: unknown key `{key}`")
            }
            ConfigError::MissingKey { key, scenario } => {
                write!(f, "scenario `{scenario}` requires key `{key}`")
            }
            ConfigError::BadValue { key, line, detail } => {
                write!(f, "line {line}: bad value for `{key}`: {detail}")
            }
            ConfigError::Semantic(s) => write!(f, "{s}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    QfiDynamics,
    QfiPeakScan,
    Bayes,
    DissipativeScan,
    VcParams,
    Qfunction,
    DriveProfile,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::QfiDynamics => "qfi_dynamics",
            Scenario::QfiPeakScan => "qfi_peak_scan",
            Scenario::Bayes => "bayes",
            Scenario::DissipativeScan => "dissipative_scan",
            Scenario::VcParams => "vc_params",
            Scenario::Qfunction => "qfunction",
            Scenario::DriveProfile => "drive_profile",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "qfi_dynamics" => Some(Scenario::QfiDynamics),
            "qfi_peak_scan" => Some(Scenario::QfiPeakScan),
            "bayes" => Some(Scenario::Bayes),
            "dissipative_scan" => Some(Scenario::DissipativeScan),
            "vc_params" => Some(Scenario::VcParams),
            "qfunction" => Some(Scenario::Qfunction),
            "drive_profile" => Some(Scenario::DriveProfile),
            _ => None,
        }
    }
}

/// Source state for `bayes` and `qfunction` scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateSource {
    Ground,
    Bw,
    Peak,
    Coherent,
}

impl StateSource {
    pub fn name(&self) -> &'static str {
        match self {
            StateSource::Ground => "ground",
            StateSource::Bw => "bw",
            StateSource::Peak => "peak",
            StateSource::Coherent => "coherent",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "ground" => Some(StateSource::Ground),
            "bw" => Some(StateSource::Bw),
            "peak" => Some(StateSource::Peak),
            "coherent" => Some(StateSource::Coherent),
            _ => None,
        }
    }
}

/// Fully resolved scenario configuration.
#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub out_dir: String,
    pub seed: u64,
    pub version: Option<String>,

    // model block
    pub family: Option<ModelFamily>,
    pub n_atoms: Option<usize>,
    pub delta: Option<f64>,
    pub chi: Option<f64>,
    pub omega: Option<f64>,
    pub gamma0: Option<f64>,

    // numerics
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub record_every: Option<usize>,

    // lab block
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    pub delta_a: Option<f64>,
    pub delta_c: Option<f64>,
    pub eta0: Option<f64>,
    pub tau: Option<f64>,
    pub omega_r: Option<f64>,
    pub wavenumber: Option<f64>,
    pub gravity: Option<f64>,
    pub kg_tau: Option<f64>,

    // scenario extras
    pub state: Option<StateSource>,
    pub m_max: Option<u64>,
    pub n_seeds: Option<usize>,
    pub phi_true: Option<f64>,
    pub theta_points: Option<usize>,
    pub phi_points: Option<usize>,
    pub n_values: Option<Vec<usize>>,
    pub kappa_ratios: Option<Vec<f64>>,
    pub include_oat: Option<bool>,
    pub beta0: Option<f64>,
    pub delta_c_prime0: Option<f64>,
    pub n_samples: Option<usize>,
}

const MODEL_KEYS: &[&str] = &["family", "N", "delta", "chi", "omega", "gamma0"];
const NUMERIC_KEYS: &[&str] = &["dt", "t_end", "record_every"];
const LAB_KEYS: &[&str] = &[
    "Lambda", "gamma", "kappa", "Delta_a", "Delta_c", "eta0", "tau", "omega_r", "k", "g", "kg_tau",
    "N",
];

fn allowed_keys(scenario: Scenario) -> Vec<&'static str> {
    let mut keys: Vec<&'static str> = vec!["scenario", "out_dir", "seed", "version"];
    match scenario {
        Scenario::QfiDynamics => {
            keys.extend(MODEL_KEYS);
            keys.extend(NUMERIC_KEYS);
        }
        Scenario::QfiPeakScan => {
            keys.extend(["family", "chi", "delta_over_n_chi", "N_values"]);
            keys.extend(NUMERIC_KEYS);
        }
        Scenario::Bayes => {
            keys.extend(MODEL_KEYS);
            keys.extend(NUMERIC_KEYS);
            keys.extend(["state", "M_max", "n_seeds", "phi_true"]);
        }
        Scenario::DissipativeScan => {
            keys.extend(MODEL_KEYS);
            keys.extend(NUMERIC_KEYS);
            keys.extend(["kappa_ratios", "include_oat"]);
        }
        Scenario::VcParams => {
            keys.extend(LAB_KEYS);
        }
        Scenario::Qfunction => {
            keys.extend(MODEL_KEYS);
            keys.extend(NUMERIC_KEYS);
            keys.extend(["state", "theta_points", "phi_points"]);
        }
        Scenario::DriveProfile => {
            keys.extend(["beta0", "omega", "delta_c_prime0", "kappa", "t_end", "n_samples"]);
        }
    }
    keys
}

struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    detail: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    detail: "empty key or value".into(),
                });
            }
            if let Some((_, first_line)) = entries.get(&key) {
                return Err(ConfigError::DuplicateKey {
                    key,
                    first_line: *first_line,
                    second_line: line_no,
                });
            }
            entries.insert(key, (value, line_no));
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }
}

/// `2pi*`-aware float parser.
fn parse_number(s: &str) -> Result<f64, String> {
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => match s.strip_prefix('+') {
            Some(rest) => (1.0, rest),
            None => (1.0, s),
        },
    };
    let (factor, digits) = match body.strip_prefix("2pi*") {
        Some(rest) => (2.0 * std::f64::consts::PI, rest),
        None => (1.0, body),
    };
    digits
        .parse::<f64>()
        .map(|v| sign * factor * v)
        .map_err(|e| e.to_string())
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true/false, got `{other}`")),
    }
}

/// Parse a configuration from text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut raw = RawConfig::parse(text)?;

    let (scenario_str, scenario_line) = raw.take("scenario").ok_or(ConfigError::MissingKey {
        key: "scenario",
        scenario: "<any>".into(),
    })?;
    let scenario = Scenario::parse(&scenario_str).ok_or_else(|| ConfigError::BadValue {
        key: "scenario".into(),
        line: scenario_line,
        detail: format!("unknown scenario `{scenario_str}`"),
    })?;

    let allowed = allowed_keys(scenario);
    if let Some((key, (_, line))) = raw
        .entries
        .iter()
        .find(|(k, _)| !allowed.contains(&k.as_str()))
    {
        return Err(ConfigError::UnknownKey {
            key: key.clone(),
            line: *line,
        });
    }

    let number = |raw: &mut RawConfig, key: &str| -> Result<Option<f64>, ConfigError> {
        match raw.take(key) {
            Some((v, line)) => parse_number(&v)
                .map(Some)
                .map_err(|detail| ConfigError::BadValue {
                    key: key.into(),
                    line,
                    detail,
                }),
            None => Ok(None),
        }
    };
    let integer = |raw: &mut RawConfig, key: &str| -> Result<Option<u64>, ConfigError> {
        match raw.take(key) {
            Some((v, line)) => v.parse::<u64>().map(Some).map_err(|e| ConfigError::BadValue {
                key: key.into(),
                line,
                detail: e.to_string(),
            }),
            None => Ok(None),
        }
    };

    let family = match raw.take("family") {
        Some((v, line)) => Some(ModelFamily::parse(&v).ok_or_else(|| ConfigError::BadValue {
            key: "family".into(),
            line,
            detail: format!("unknown family `{v}`"),
        })?),
        None => None,
    };
    let state = match raw.take("state") {
        Some((v, line)) => Some(StateSource::parse(&v).ok_or_else(|| ConfigError::BadValue {
            key: "state".into(),
            line,
            detail: format!("unknown state `{v}`"),
        })?),
        None => None,
    };
    let include_oat = match raw.take("include_oat") {
        Some((v, line)) => Some(parse_bool(&v).map_err(|detail| ConfigError::BadValue {
            key: "include_oat".into(),
            line,
            detail,
        })?),
        None => None,
    };
    let n_values = match raw.take("N_values") {
        Some((v, line)) => {
            let mut out = Vec::new();
            for part in v.split(',') {
                out.push(part.trim().parse::<usize>().map_err(|e| {
                    ConfigError::BadValue {
                        key: "N_values".into(),
                        line,
                        detail: e.to_string(),
                    }
                })?);
            }
            Some(out)
        }
        None => None,
    };
    let kappa_ratios = match raw.take("kappa_ratios") {
        Some((v, line)) => {
            let mut out = Vec::new();
            for part in v.split(',') {
                out.push(parse_number(part.trim()).map_err(|detail| ConfigError::BadValue {
                    key: "kappa_ratios".into(),
                    line,
                    detail,
                })?);
            }
            Some(out)
        }
        None => None,
    };
    let version = raw.take("version").map(|(v, _)| v);
    let out_dir = raw
        .take("out_dir")
        .map(|(v, _)| v)
        .unwrap_or_else(|| "out".to_string());

    let config = ScenarioConfig {
        scenario,
        out_dir,
        seed: integer(&mut raw, "seed")?.unwrap_or(0),
        version,
        family,
        n_atoms: integer(&mut raw, "N")?.map(|v| v as usize),
        delta: number(&mut raw, "delta")?,
        chi: number(&mut raw, "chi")?,
        omega: number(&mut raw, "omega")?,
        gamma0: number(&mut raw, "gamma0")?,
        dt: number(&mut raw, "dt")?,
        t_end: number(&mut raw, "t_end")?,
        record_every: integer(&mut raw, "record_every")?.map(|v| v as usize),
        lambda: number(&mut raw, "Lambda")?,
        gamma: number(&mut raw, "gamma")?,
        kappa: number(&mut raw, "kappa")?,
        delta_a: number(&mut raw, "Delta_a")?,
        delta_c: number(&mut raw, "Delta_c")?,
        eta0: number(&mut raw, "eta0")?,
        tau: number(&mut raw, "tau")?,
        omega_r: number(&mut raw, "omega_r")?,
        wavenumber: number(&mut raw, "k")?,
        gravity: number(&mut raw, "g")?,
        kg_tau: number(&mut raw, "kg_tau")?,
        state,
        m_max: integer(&mut raw, "M_max")?,
        n_seeds: integer(&mut raw, "n_seeds")?.map(|v| v as usize),
        phi_true: number(&mut raw, "phi_true")?,
        theta_points: integer(&mut raw, "theta_points")?.map(|v| v as usize),
        phi_points: integer(&mut raw, "phi_points")?.map(|v| v as usize),
        n_values,
        kappa_ratios,
        include_oat,
        beta0: number(&mut raw, "beta0")?,
        delta_c_prime0: number(&mut raw, "delta_c_prime0")?,
        n_samples: integer(&mut raw, "n_samples")?.map(|v| v as usize),
    };
    config.validate()?;
    Ok(config)
}

impl ScenarioConfig {
    fn require<T>(&self, value: &Option<T>, key: &'static str) -> Result<(), ConfigError> {
        if value.is_none() {
            return Err(ConfigError::MissingKey {
                key,
                scenario: self.scenario.name().into(),
            });
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        match self.scenario {
            Scenario::QfiDynamics => {
                self.require(&self.family, "family")?;
                self.require(&self.n_atoms, "N")?;
                self.require(&self.chi, "chi")?;
                self.require(&self.t_end, "t_end")?;
            }
            Scenario::QfiPeakScan => {
                self.require(&self.chi, "chi")?;
                self.require(&self.n_values, "N_values")?;
            }
            Scenario::Bayes => {
                self.require(&self.n_atoms, "N")?;
                self.require(&self.state, "state")?;
                self.require(&self.m_max, "M_max")?;
                if self.state == Some(StateSource::Peak) {
                    self.require(&self.family, "family")?;
                    self.require(&self.chi, "chi")?;
                    self.require(&self.t_end, "t_end")?;
                }
            }
            Scenario::DissipativeScan => {
                self.require(&self.n_atoms, "N")?;
                self.require(&self.delta, "delta")?;
                self.require(&self.chi, "chi")?;
                self.require(&self.t_end, "t_end")?;
                self.require(&self.kappa_ratios, "kappa_ratios")?;
            }
            Scenario::VcParams => {
                for (value, key) in [
                    (&self.lambda, "Lambda"),
                    (&self.gamma, "gamma"),
                    (&self.kappa, "kappa"),
                    (&self.delta_a, "Delta_a"),
                    (&self.delta_c, "Delta_c"),
                    (&self.eta0, "eta0"),
                    (&self.tau, "tau"),
                    (&self.omega_r, "omega_r"),
                    (&self.wavenumber, "k"),
                    (&self.gravity, "g"),
                ] {
                    self.require(value, key)?;
                }
                self.require(&self.n_atoms, "N")?;
            }
            Scenario::Qfunction => {
                self.require(&self.n_atoms, "N")?;
                self.require(&self.state, "state")?;
                if self.state == Some(StateSource::Peak) {
                    self.require(&self.family, "family")?;
                    self.require(&self.chi, "chi")?;
                    self.require(&self.t_end, "t_end")?;
                }
            }
            Scenario::DriveProfile => {
                self.require(&self.beta0, "beta0")?;
                self.require(&self.omega, "omega")?;
                self.require(&self.delta_c_prime0, "delta_c_prime0")?;
                self.require(&self.kappa, "kappa")?;
                self.require(&self.t_end, "t_end")?;
            }
        }
        Ok(())
    }

    /// Assemble the model spec of the scenario's model block.
    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        let family = self.family.ok_or(ConfigError::MissingKey {
            key: "family",
            scenario: self.scenario.name().into(),
        })?;
        let n = self.n_atoms.ok_or(ConfigError::MissingKey {
            key: "N",
            scenario: self.scenario.name().into(),
        })?;
        let delta = self.delta.unwrap_or(0.0);
        let chi = self.chi.unwrap_or(0.0);
        let omega = match family {
            ModelFamily::Pdd => self.omega.unwrap_or(2.0 * delta),
            _ => self.omega.unwrap_or(0.0),
        };
        ModelSpec::new(family, n, delta, chi, omega, self.gamma0.unwrap_or(0.0))
            .map_err(|e| ConfigError::Semantic(e.to_string()))
    }

    /// Assemble the lab inputs of a `vc_params` configuration.
    pub fn lab_inputs(&self) -> Result<LabInputs, ConfigError> {
        let need = |v: Option<f64>, key: &'static str| {
            v.ok_or(ConfigError::MissingKey {
                key,
                scenario: self.scenario.name().into(),
            })
        };
        Ok(LabInputs {
            lambda: need(self.lambda, "Lambda")?,
            gamma: need(self.gamma, "gamma")?,
            kappa: need(self.kappa, "kappa")?,
            delta_a: need(self.delta_a, "Delta_a")?,
            delta_c: need(self.delta_c, "Delta_c")?,
            eta0: need(self.eta0, "eta0")?,
            tau: need(self.tau, "tau")?,
            omega_r: need(self.omega_r, "omega_r")?,
            wavenumber: need(self.wavenumber, "k")?,
            gravity: need(self.gravity, "g")?,
            n_atoms: self.n_atoms.ok_or(ConfigError::MissingKey {
                key: "N",
                scenario: self.scenario.name().into(),
            })?,
            kg_tau: self.kg_tau,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_minimal_vc_params_config() {
        let text = "\
# reference inputs
scenario = vc_params
N = 100
Lambda = 2pi*0.5e6
gamma = 2pi*6.066e6
kappa = 2pi*56e3
Delta_a = 2pi*50e6
Delta_c = 2pi*5.1e6
eta0 = 2pi*33e6
tau = 20e-3
omega_r = 2pi*3.77e3
k = 8.0553e6
g = 9.81
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.scenario, Scenario::VcParams);
        assert_eq!(cfg.n_atoms, Some(100));
        let want = 2.0 * std::f64::consts::PI * 50e6;
        assert!((cfg.delta_a.unwrap() - want).abs() < 1e-3);
    }

    #[test]
    fn two_pi_prefix_and_signs() {
        assert!((parse_number("2pi*50e6").unwrap() - 2.0 * std::f64::consts::PI * 5e7).abs() < 1.0);
        assert!(
            (parse_number("-2pi*0.488e6").unwrap() + 2.0 * std::f64::consts::PI * 0.488e6).abs()
                < 1e-6
        );
        assert_eq!(parse_number("42").unwrap(), 42.0);
        assert!(parse_number("2pi*abc").is_err());
    }

    #[test]
    fn duplicate_key_reports_both_lines() {
        let text = "scenario = vc_params\nN = 100\nN = 50\n";
        match parse_config(text) {
            Err(ConfigError::DuplicateKey {
                key,
                first_line,
                second_line,
            }) => {
                assert_eq!(key, "N");
                assert_eq!(first_line, 2);
                assert_eq!(second_line, 3);
            }
            other => panic!("expected duplicate-key error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let text = "scenario = qfi_dynamics\nfamily = tact_rwa\nN = 10\nchi = 1\nt_end = 1\nbogus = 3\n";
        match parse_config(text) {
            Err(ConfigError::UnknownKey { key, line }) => {
                assert_eq!(key, "bogus");
                assert_eq!(line, 6);
            }
            other => panic!("expected unknown-key error, got {other:?}"),
        }
    }

    #[test]
    fn missing_required_key_is_named() {
        let text = "scenario = qfi_dynamics\nfamily = tact_rwa\nchi = 1\nt_end = 1\n";
        match parse_config(text) {
            Err(ConfigError::MissingKey { key, .. }) => assert_eq!(key, "N"),
            other => panic!("expected missing-key error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_number_is_reported() {
        let text = "scenario = qfi_dynamics\nfamily = tact_rwa\nN = 10\nchi = one\nt_end = 1\n";
        match parse_config(text) {
            Err(ConfigError::BadValue { key, line, .. }) => {
                assert_eq!(key, "chi");
                assert_eq!(line, 4);
            }
            other => panic!("expected bad-value error, got {other:?}"),
        }
    }

    #[test]
    fn list_values_parse() {
        let text = "scenario = dissipative_scan\nfamily = vc\nN = 10\ndelta = -1\nchi = 1e-4\n\
omega = -2\nt_end = 5\nkappa_ratios = 1e-5, 1e-3, 1e-2\ninclude_oat = true\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.kappa_ratios.as_ref().unwrap().len(), 3);
        assert_eq!(cfg.include_oat, Some(true));
    }
}
