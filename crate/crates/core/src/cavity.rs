//! Effective rates of the vertical-cavity realization.
//!
//! Lab-level inputs (coupling, decays, detunings, pump, drop time) map
//! onto the effective model parameters:
//!
//!   U₀   = ½ Λ²Δa/(Δa² + γ²/4)                 (ac Stark shift)
//!   Δc′  = Δc − N U₀                            (dressed detuning)
//!   |β₀| = η₀/√(Δc′² + κ²/4)                    (injected field)
//!   χ₀   = U₀²|β₀|² Δc′/(Δc′² + κ²/4)           (nonlinearity)
//!   Γ₀   = U₀²|β₀|² κ/(Δc′² + κ²/4)             (collective decay)
//!   ω_g  = 4ω_r − 2kgτ                          (momentum-state gap)
//!
//! together with the approximation ledger that justifies reducing the
//! full atom-cavity model to the two-momentum-state collective spin.

use num_complex::Complex64;

use crate::{Error, Result};

/// Lab-level inputs. All rates are angular frequencies (rad/s).
#[derive(Clone, Copy, Debug)]
pub struct LabInputs {
    /// Single-atom vacuum coupling Λ.
    pub lambda: f64,
    /// Atomic decay γ.
    pub gamma: f64,
    /// Cavity decay κ.
    pub kappa: f64,
    /// Atom–pump detuning Δa (sign carried).
    pub delta_a: f64,
    /// Cavity–pump detuning Δc (sign carried).
    pub delta_c: f64,
    /// Pump amplitude η₀.
    pub eta0: f64,
    /// Drop time τ (s).
    pub tau: f64,
    /// Recoil frequency ω_r.
    pub omega_r: f64,
    /// Wavenumber k (1/m), shared by all fields.
    pub wavenumber: f64,
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
    /// Atom count N.
    pub n_atoms: usize,
    /// Optional override for the kgτ product; computed from
    /// (k, g, τ) when absent.
    pub kg_tau: Option<f64>,
}

impl LabInputs {
    pub fn kg_tau(&self) -> f64 {
        self.kg_tau
            .unwrap_or(self.wavenumber * self.gravity * self.tau)
    }
}

/// Status of one approximation-ledger inequality A ≫ B.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LedgerStatus {
    /// ratio ≥ 10
    Pass,
    /// 5 ≤ ratio < 10
    Marginal,
    /// ratio < 5
    Fail,
}

#[derive(Clone, Copy, Debug)]
pub struct LedgerEntry {
    pub name: &'static str,
    pub ratio: f64,
    pub status: LedgerStatus,
}

impl LedgerEntry {
    fn new(name: &'static str, ratio: f64) -> Self {
        let status = if ratio >= 10.0 {
            LedgerStatus::Pass
        } else if ratio >= 5.0 {
            LedgerStatus::Marginal
        } else {
            LedgerStatus::Fail
        };
        LedgerEntry {
            name,
            ratio,
            status,
        }
    }

    /// The pass flag: the inequality holds by at least the threshold 5.
    pub fn passes(&self) -> bool {
        self.status != LedgerStatus::Fail
    }
}

/// Derived effective parameters plus the approximation ledger.
#[derive(Clone, Debug)]
pub struct CavityParams {
    pub u0: f64,
    pub delta_c_prime: f64,
    pub beta0_abs: f64,
    pub chi0: f64,
    pub gamma0: f64,
    pub omega_g: f64,
    /// ε = U₀/Δc′.
    pub epsilon: f64,
    pub kg_tau: f64,
    pub ledger: [LedgerEntry; 6],
}

/// Derive every effective rate from the lab inputs.
pub fn derive(inputs: &LabInputs) -> Result<CavityParams> {
    // detunings carry sign; every other magnitude must be positive
    for (value, name) in [
        (inputs.lambda, "Lambda"),
        (inputs.gamma, "gamma"),
        (inputs.kappa, "kappa"),
        (inputs.eta0, "eta0"),
        (inputs.tau, "tau"),
        (inputs.omega_r, "omega_r"),
        (inputs.wavenumber, "k"),
        (inputs.gravity, "g"),
    ] {
        if value <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lab input {name} must be positive, got {value}"
            )));
        }
    }
    if inputs.n_atoms == 0 {
        return Err(Error::InvalidParameter("lab input N must be >= 1".into()));
    }
    let denom_a = inputs.delta_a * inputs.delta_a + inputs.gamma * inputs.gamma / 4.0;
    if denom_a <= 0.0 {
        return Err(Error::InvalidParameter(
            "Δa² + γ²/4 must be positive".into(),
        ));
    }
    let u0 = 0.5 * inputs.lambda * inputs.lambda * inputs.delta_a / denom_a;
    let delta_c_prime = inputs.delta_c - inputs.n_atoms as f64 * u0;
    if delta_c_prime == 0.0 {
        return Err(Error::InvalidParameter(
            "dressed detuning Δc′ vanishes; the cavity cannot be eliminated".into(),
        ));
    }
    let denom_c = delta_c_prime * delta_c_prime + inputs.kappa * inputs.kappa / 4.0;
    let beta0_abs = inputs.eta0 / denom_c.sqrt();
    // χ₀ and Γ₀ share the factor U₀²|β₀|²/denom so that Γ₀/χ₀ = κ/Δc′
    // holds exactly.
    let shared = u0 * u0 * beta0_abs * beta0_abs / denom_c;
    let chi0 = shared * delta_c_prime;
    let gamma0 = shared * inputs.kappa;
    let kg_tau = inputs.kg_tau();
    let omega_g = 4.0 * inputs.omega_r - 2.0 * kg_tau;
    let epsilon = u0 / delta_c_prime;

    let mut params = CavityParams {
        u0,
        delta_c_prime,
        beta0_abs,
        chi0,
        gamma0,
        omega_g,
        epsilon,
        kg_tau,
        ledger: [LedgerEntry::new("", 0.0); 6],
    };
    params.ledger = approximation_ledger(&params, inputs);
    Ok(params)
}

/// The six named inequality ratios of the truncation-validity ledger.
pub fn approximation_ledger(params: &CavityParams, inputs: &LabInputs) -> [LedgerEntry; 6] {
    let n = inputs.n_atoms as f64;
    let standing = params.u0.abs() * params.beta0_abs * params.beta0_abs;
    [
        LedgerEntry::new(
            "excited-state elimination",
            inputs.delta_a.abs() / (n.sqrt() * inputs.lambda),
        ),
        LedgerEntry::new(
            "cavity elimination (vs N|chi0|)",
            params.delta_c_prime.abs() / (n * params.chi0.abs()),
        ),
        LedgerEntry::new(
            "cavity elimination (vs |U0||beta0|^2)",
            params.delta_c_prime.abs() / standing,
        ),
        LedgerEntry::new("perturbation", 2.0 / (n * params.epsilon.abs())),
        LedgerEntry::new(
            "single momentum flips",
            12.0 * params.kg_tau / standing,
        ),
        LedgerEntry::new(
            "unwanted pair creation",
            16.0 * inputs.omega_r / (n * params.chi0.abs()),
        ),
    ]
}

/// Complex injected field β₀ = −η₀/(Δc′ − iκ/2); its magnitude matches
/// [`CavityParams::beta0_abs`].
pub fn injected_field(params: &CavityParams, inputs: &LabInputs) -> Complex64 {
    -Complex64::new(inputs.eta0, 0.0) / Complex64::new(params.delta_c_prime, -inputs.kappa / 2.0)
}
