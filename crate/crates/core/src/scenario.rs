//! Scenario runner: executes a parsed configuration and emits CSV
//! artifacts plus a metadata sidecar.
//!
//! Every run writes `meta.cfg` with all resolved parameters in the same
//! flat `key = value` format, so the sidecar re-parses as a config and
//! reproduces the outputs byte for byte (floats are printed with the
//! shortest exact representation).
//!
//! CSV headers are fixed per scenario:
//! - `qfi_dynamics.csv`: `t_scaled,lmax_over_n2,l2_over_n2,l3_over_n2`
//!   (first column `t_seconds` for the vc family)
//! - `qfi_peak_scan.csv`:
//!   `n_atoms,lmax_peak_over_n2,t_peak_scaled,t_peak_fit_scaled,t_oat_plateau_scaled`
//! - `bayes.csv`: `measurements,qcrb,sigma_median,sigma_seed<k>...`
//! - `dissipative_pdd_<i>.csv` / `dissipative_oat_<i>.csv`:
//!   `t_seconds,lmax_over_n2,l2_over_n2,l3_over_n2,gen_x,gen_y,gen_z`
//! - `params.csv`: `name,value`; `ledger.csv`: `name,ratio,threshold,status`
//! - `qfunction.csv`: `theta,phi,q`
//! - `drive_profile.csv`:
//!   `t_seconds,beta_re,beta_im,delta_c_prime,eta_re,eta_im`

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::algebra::{bw_state, coherent_state, husimi_q, DickeState};
use crate::bayes::{run_protocol, RNG_ALGORITHM};
use crate::cavity::{derive, CavityParams, LedgerStatus};
use crate::config::{parse_config, ConfigError, Scenario, ScenarioConfig, StateSource};
use crate::metrology::{qfim, QfimResult};
use crate::model::{drive_profile, t_oat_plateau, t_peak_estimate, ModelFamily, ModelSpec};
use crate::propagate::{evolve, to_rotating_frame, StepControl, Trajectory};

/// Error layers of a scenario run, mapped onto CLI exit codes.
#[derive(Debug)]
pub enum ScenarioError {
    /// Exit code 2.
    Config(ConfigError),
    /// Exit code 3.
    Numerics(crate::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioError::Config(e) => write!(f, "config error: {e}"),
            ScenarioError::Numerics(e) => write!(f, "numerical error: {e}"),
            ScenarioError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<ConfigError> for ScenarioError {
    fn from(e: ConfigError) -> Self {
        ScenarioError::Config(e)
    }
}

impl From<crate::Error> for ScenarioError {
    fn from(e: crate::Error) -> Self {
        ScenarioError::Numerics(e)
    }
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        ScenarioError::Io(e)
    }
}

type RunResult = Result<Vec<PathBuf>, ScenarioError>;

/// Parse a config file and run it.
pub fn run_scenario_file(path: &Path) -> RunResult {
    let text = fs::read_to_string(path)?;
    let config = parse_config(&text)?;
    run_scenario(&config)
}

/// Execute a scenario; returns the paths of all written files.
pub fn run_scenario(config: &ScenarioConfig) -> RunResult {
    fs::create_dir_all(&config.out_dir)?;
    let mut written = match config.scenario {
        Scenario::QfiDynamics => qfi_dynamics(config)?,
        Scenario::QfiPeakScan => qfi_peak_scan(config)?,
        Scenario::Bayes => bayes(config)?,
        Scenario::DissipativeScan => dissipative_scan(config)?,
        Scenario::VcParams => vc_params(config)?,
        Scenario::Qfunction => qfunction(config)?,
        Scenario::DriveProfile => drive_profile_scenario(config)?,
    };
    written.push(write_metadata(config)?);
    Ok(written)
}

/// The conventional initial state of each family: the +x coherent state
/// for one-axis twisting, the collective ground state otherwise.
pub fn initial_state_for(spec: &ModelSpec) -> crate::Result<DickeState> {
    match spec.family {
        ModelFamily::Oat => coherent_state(
            spec.n_atoms,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::PI,
        ),
        _ => Ok(DickeState::ground(spec.n_atoms)),
    }
}

/// Index and QFIM of the trajectory state maximizing λ_max.
pub fn find_peak(traj: &Trajectory) -> crate::Result<(usize, QfimResult)> {
    let mut best: Option<(usize, QfimResult)> = None;
    for (i, s) in traj.states.iter().enumerate() {
        let q = qfim(s)?;
        if best
            .as_ref()
            .map(|(_, b)| q.lambda_max() > b.lambda_max())
            .unwrap_or(true)
        {
            best = Some((i, q));
        }
    }
    Ok(best.expect("trajectory is never empty"))
}

fn control_from(config: &ScenarioConfig, spec: &ModelSpec) -> crate::Result<StepControl> {
    let mut ctl = match config.dt {
        Some(dt) => StepControl::new(dt, 1, true),
        None => StepControl::for_model(spec)?,
    };
    ctl.record_every = match config.record_every {
        Some(k) => k,
        None => {
            let steps = (config.t_end.unwrap_or(1.0) / ctl.dt).ceil() as usize;
            (steps / 1000).max(1)
        }
    };
    Ok(ctl)
}

fn qfi_dynamics(config: &ScenarioConfig) -> RunResult {
    let spec = config.model_spec()?;
    let initial = initial_state_for(&spec)?;
    let ctl = control_from(config, &spec)?;
    let t_end = config.t_end.unwrap();
    let traj = evolve(&initial, &spec, 0.0, t_end, &ctl)?;

    let n2 = (spec.n_atoms * spec.n_atoms) as f64;
    let scale = spec.n_atoms as f64 * spec.chi.abs();
    let vc = spec.family == ModelFamily::Vc;
    let header: Vec<&str> = vec![
        if vc { "t_seconds" } else { "t_scaled" },
        "lmax_over_n2",
        "l2_over_n2",
        "l3_over_n2",
    ];
    let mut rows = Vec::with_capacity(traj.len());
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let q = qfim(s)?;
        let time = if vc { *t } else { t * scale };
        rows.push(vec![
            fmt_f64(time),
            fmt_f64(q.eigenvalues[0] / n2),
            fmt_f64(q.eigenvalues[1] / n2),
            fmt_f64(q.eigenvalues[2] / n2),
        ]);
    }
    let path = out_path(config, "qfi_dynamics.csv");
    write_csv(&path, &header, &rows)?;
    Ok(vec![path])
}

fn qfi_peak_scan(config: &ScenarioConfig) -> RunResult {
    let chi = config.chi.unwrap();
    let family = config.family.unwrap_or(ModelFamily::TactRwa);
    let header = vec![
        "n_atoms",
        "lmax_peak_over_n2",
        "t_peak_scaled",
        "t_peak_fit_scaled",
        "t_oat_plateau_scaled",
    ];
    let mut rows = Vec::new();
    for &n in config.n_values.as_ref().unwrap() {
        let spec = match family {
            ModelFamily::TactRwa => ModelSpec::new(family, n, 0.0, chi, 0.0, 0.0)?,
            ModelFamily::Pdd => {
                let delta = 100.0 * n as f64 * chi.abs();
                ModelSpec::pdd(n, delta, chi, 0.0)?
            }
            other => {
                return Err(ScenarioError::Config(ConfigError::Semantic(format!(
                    "qfi_peak_scan supports tact_rwa or pdd, got {}",
                    other.name()
                ))))
            }
        };
        // integrate past the expected peak with margin
        let t_end = config
            .t_end
            .unwrap_or(1.4 * t_peak_estimate(n, chi)?);
        let ctl = control_from(config, &spec)?;
        let traj = evolve(&initial_state_for(&spec)?, &spec, 0.0, t_end, &ctl)?;
        let (idx, q) = find_peak(&traj)?;
        let scale = n as f64 * chi.abs();
        rows.push(vec![
            n.to_string(),
            fmt_f64(q.lambda_max() / (n * n) as f64),
            fmt_f64(traj.times[idx] * scale),
            fmt_f64(t_peak_estimate(n, chi)? * scale),
            fmt_f64(t_oat_plateau(n, chi)? * scale),
        ]);
    }
    let path = out_path(config, "qfi_peak_scan.csv");
    write_csv(&path, &header, &rows)?;
    Ok(vec![path])
}

fn probe_state(config: &ScenarioConfig) -> Result<DickeState, ScenarioError> {
    let n = config.n_atoms.unwrap();
    Ok(match config.state.unwrap() {
        StateSource::Ground => DickeState::ground(n),
        StateSource::Bw => bw_state(n)?,
        StateSource::Coherent => {
            coherent_state(n, std::f64::consts::FRAC_PI_2, std::f64::consts::PI)?
        }
        StateSource::Peak => {
            let spec = config.model_spec()?;
            let ctl = control_from(config, &spec)?;
            let traj = evolve(
                &initial_state_for(&spec)?,
                &spec,
                0.0,
                config.t_end.unwrap(),
                &ctl,
            )?;
            let (idx, _) = find_peak(&traj)?;
            // squeezing-protocol states are analyzed in the rotating frame
            to_rotating_frame(&traj.states[idx], spec.delta, traj.times[idx])
        }
    })
}

fn bayes(config: &ScenarioConfig) -> RunResult {
    let state = probe_state(config)?;
    let m_max = config.m_max.unwrap();
    let n_seeds = config.n_seeds.unwrap_or(20);
    let phi_true = config.phi_true.unwrap_or(0.0);

    let mut results = Vec::with_capacity(n_seeds);
    for k in 0..n_seeds {
        results.push(run_protocol(
            &state,
            m_max,
            phi_true,
            config.seed.wrapping_add(k as u64),
        )?);
    }

    let mut header: Vec<String> = vec![
        "measurements".into(),
        "qcrb".into(),
        "sigma_median".into(),
    ];
    for r in &results {
        header.push(format!("sigma_seed{}", r.seed));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();

    let n_points = results[0].sigma_curve.len();
    let mut rows = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let m = results[0].sigma_curve[i].0;
        let qcrb = results[0].qcrb_curve[i].1;
        let mut sigmas: Vec<f64> = results.iter().map(|r| r.sigma_curve[i].1).collect();
        let mut row = vec![m.to_string(), fmt_f64(qcrb)];
        let mut sorted = sigmas.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        row.push(fmt_f64(median));
        row.extend(sigmas.drain(..).map(fmt_f64));
        rows.push(row);
    }
    let path = out_path(config, "bayes.csv");
    write_csv(&path, &header_refs, &rows)?;
    Ok(vec![path])
}

fn dissipative_scan(config: &ScenarioConfig) -> RunResult {
    let base = config.model_spec()?;
    let ratios = config.kappa_ratios.as_ref().unwrap();
    let include_oat = config.include_oat.unwrap_or(false);
    let t_end = config.t_end.unwrap();
    let n2 = (base.n_atoms * base.n_atoms) as f64;
    let header = vec![
        "t_seconds",
        "lmax_over_n2",
        "l2_over_n2",
        "l3_over_n2",
        "gen_x",
        "gen_y",
        "gen_z",
    ];

    let mut written = Vec::new();
    for (idx, &ratio) in ratios.iter().enumerate() {
        let gamma0 = base.chi.abs() * ratio;
        let mut runs = vec![(
            format!("dissipative_pdd_{idx}.csv"),
            ModelSpec::new(
                base.family,
                base.n_atoms,
                base.delta,
                base.chi,
                base.omega,
                gamma0,
            )?,
        )];
        if include_oat {
            runs.push((
                format!("dissipative_oat_{idx}.csv"),
                ModelSpec::new(base.family, base.n_atoms, base.delta, base.chi, 0.0, gamma0)?,
            ));
        }
        for (name, spec) in runs {
            let ctl = control_from(config, &spec)?;
            let initial =
                DickeState::mixed(spec.n_atoms, initial_state_for(&spec)?.to_density())?;
            let traj = evolve(&initial, &spec, 0.0, t_end, &ctl)?;
            let mut rows = Vec::with_capacity(traj.len());
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let rotating = to_rotating_frame(s, spec.delta, *t);
                let q = qfim(&rotating)?;
                let g = q.optimal_generator();
                rows.push(vec![
                    fmt_f64(*t),
                    fmt_f64(q.eigenvalues[0] / n2),
                    fmt_f64(q.eigenvalues[1] / n2),
                    fmt_f64(q.eigenvalues[2] / n2),
                    fmt_f64(g[0]),
                    fmt_f64(g[1]),
                    fmt_f64(g[2]),
                ]);
            }
            let path = out_path(config, &name);
            write_csv(&path, &header, &rows)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn vc_params(config: &ScenarioConfig) -> RunResult {
    let inputs = config.lab_inputs()?;
    let params = derive(&inputs)?;

    let params_path = out_path(config, "params.csv");
    let rows = vec![
        vec!["U0".to_string(), fmt_f64(params.u0)],
        vec!["Delta_c_prime".to_string(), fmt_f64(params.delta_c_prime)],
        vec!["beta0_abs".to_string(), fmt_f64(params.beta0_abs)],
        vec!["chi0".to_string(), fmt_f64(params.chi0)],
        vec!["Gamma0".to_string(), fmt_f64(params.gamma0)],
        vec!["omega_g".to_string(), fmt_f64(params.omega_g)],
        vec!["epsilon".to_string(), fmt_f64(params.epsilon)],
        vec!["kg_tau".to_string(), fmt_f64(params.kg_tau)],
        vec![
            "N_chi0".to_string(),
            fmt_f64(inputs.n_atoms as f64 * params.chi0),
        ],
    ];
    write_csv(&params_path, &["name", "value"], &rows)?;

    let ledger_path = out_path(config, "ledger.csv");
    let rows: Vec<Vec<String>> = params
        .ledger
        .iter()
        .map(|e| {
            vec![
                e.name.to_string(),
                fmt_f64(e.ratio),
                "5".to_string(),
                match e.status {
                    LedgerStatus::Pass => "pass",
                    LedgerStatus::Marginal => "marginal",
                    LedgerStatus::Fail => "fail",
                }
                .to_string(),
            ]
        })
        .collect();
    write_csv(&ledger_path, &["name", "ratio", "threshold", "status"], &rows)?;
    Ok(vec![params_path, ledger_path])
}

/// Human-readable ledger table for the CLI.
pub fn format_ledger_table(params: &CavityParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<40} {:>10}  status", "approximation", "ratio");
    let _ = writeln!(out, "{}", "-".repeat(60));
    for e in &params.ledger {
        let status = match e.status {
            LedgerStatus::Pass => "pass",
            LedgerStatus::Marginal => "marginal",
            LedgerStatus::Fail => "FAIL",
        };
        let _ = writeln!(out, "{:<40} {:>10.2}  {}", e.name, e.ratio, status);
    }
    out
}

fn qfunction(config: &ScenarioConfig) -> RunResult {
    let state = probe_state(config)?;
    let nt = config.theta_points.unwrap_or(60);
    let np = config.phi_points.unwrap_or(120);
    let thetas: Vec<f64> = (0..nt)
        .map(|i| i as f64 * std::f64::consts::PI / (nt.max(2) - 1) as f64)
        .collect();
    let phis: Vec<f64> = (0..np)
        .map(|i| i as f64 * 2.0 * std::f64::consts::PI / np as f64)
        .collect();
    let q = husimi_q(&state, &thetas, &phis)?;
    let mut rows = Vec::with_capacity(nt * np);
    for (ti, theta) in thetas.iter().enumerate() {
        for (pi, phi) in phis.iter().enumerate() {
            rows.push(vec![fmt_f64(*theta), fmt_f64(*phi), fmt_f64(q[(ti, pi)])]);
        }
    }
    let path = out_path(config, "qfunction.csv");
    write_csv(&path, &["theta", "phi", "q"], &rows)?;
    Ok(vec![path])
}

fn drive_profile_scenario(config: &ScenarioConfig) -> RunResult {
    let beta0 = config.beta0.unwrap();
    let omega = config.omega.unwrap();
    let dc0 = config.delta_c_prime0.unwrap();
    let kappa = config.kappa.unwrap();
    let t_end = config.t_end.unwrap();
    let samples = config.n_samples.unwrap_or(512);
    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = t_end * i as f64 / samples as f64;
        let p = drive_profile(beta0, omega, dc0, kappa, t)?;
        let (eta_re, eta_im) = match p.eta {
            Some(v) => (v.re, v.im),
            None => (f64::INFINITY, f64::INFINITY),
        };
        rows.push(vec![
            fmt_f64(t),
            fmt_f64(p.beta.re),
            fmt_f64(p.beta.im),
            fmt_f64(p.delta_c_prime),
            fmt_f64(eta_re),
            fmt_f64(eta_im),
        ]);
    }
    let path = out_path(config, "drive_profile.csv");
    write_csv(
        &path,
        &[
            "t_seconds",
            "beta_re",
            "beta_im",
            "delta_c_prime",
            "eta_re",
            "eta_im",
        ],
        &rows,
    )?;
    Ok(vec![path])
}

fn out_path(config: &ScenarioConfig, name: &str) -> PathBuf {
    Path::new(&config.out_dir).join(name)
}

/// Shortest exact decimal representation; round-trips through parsing.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), ScenarioError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len(), "ragged CSV row");
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_metadata(config: &ScenarioConfig) -> Result<PathBuf, ScenarioError> {
    let mut out = String::new();
    let _ = writeln!(out, "# resolved parameters; re-parses as a config");
    let _ = writeln!(out, "# rng = {RNG_ALGORITHM}");
    let _ = writeln!(out, "scenario = {}", config.scenario.name());
    let _ = writeln!(out, "out_dir = {}", config.out_dir);
    let _ = writeln!(out, "seed = {}", config.seed);
    let _ = writeln!(out, "version = {}", env!("CARGO_PKG_VERSION"));

    let mut num = |key: &str, v: Option<f64>| {
        if let Some(v) = v {
            let _ = writeln!(out, "{key} = {v}");
        }
    };
    match config.scenario {
        Scenario::VcParams => {
            num("Lambda", config.lambda);
            num("gamma", config.gamma);
            num("kappa", config.kappa);
            num("Delta_a", config.delta_a);
            num("Delta_c", config.delta_c);
            num("eta0", config.eta0);
            num("tau", config.tau);
            num("omega_r", config.omega_r);
            num("k", config.wavenumber);
            num("g", config.gravity);
            num("kg_tau", config.kg_tau);
        }
        Scenario::DriveProfile => {
            num("beta0", config.beta0);
            num("omega", config.omega);
            num("delta_c_prime0", config.delta_c_prime0);
            num("kappa", config.kappa);
            num("t_end", config.t_end);
        }
        _ => {
            num("delta", config.delta);
            num("chi", config.chi);
            num("omega", config.omega);
            num("gamma0", config.gamma0);
            num("dt", config.dt);
            num("t_end", config.t_end);
            num("phi_true", config.phi_true);
        }
    }
    // reborrow after the closure above
    let mut tail = String::new();
    if let Some(f) = config.family {
        let _ = writeln!(tail, "family = {}", f.name());
    }
    if let Some(n) = config.n_atoms {
        let _ = writeln!(tail, "N = {n}");
    }
    if let Some(k) = config.record_every {
        let _ = writeln!(tail, "record_every = {k}");
    }
    if let Some(s) = config.state {
        let _ = writeln!(tail, "state = {}", s.name());
    }
    if let Some(m) = config.m_max {
        let _ = writeln!(tail, "M_max = {m}");
    }
    if let Some(n) = config.n_seeds {
        let _ = writeln!(tail, "n_seeds = {n}");
    }
    if let Some(n) = config.theta_points {
        let _ = writeln!(tail, "theta_points = {n}");
    }
    if let Some(n) = config.phi_points {
        let _ = writeln!(tail, "phi_points = {n}");
    }
    if let Some(n) = config.n_samples {
        let _ = writeln!(tail, "n_samples = {n}");
    }
    if let Some(v) = &config.n_values {
        let list: Vec<String> = v.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(tail, "N_values = {}", list.join(","));
    }
    if let Some(v) = &config.kappa_ratios {
        let list: Vec<String> = v.iter().map(|r| fmt_f64(*r)).collect();
        let _ = writeln!(tail, "kappa_ratios = {}", list.join(","));
    }
    if let Some(b) = config.include_oat {
        let _ = writeln!(tail, "include_oat = {b}");
    }
    out.push_str(&tail);

    let path = out_path(config, "meta.cfg");
    fs::write(&path, out)?;
    Ok(path)
}
