//! Hamiltonian and jump-operator construction for each model family,
//! plus the drive-profile engineering for the cavity realization.
//!
//! Families (ħ = 1, signs kept verbatim per family):
//! - `dicke`:    H = Δ Ĵz + χ cos(ωt) Ĵx²
//! - `pdd`:      the Dicke model driven on the parametric resonance ω = 2Δ
//! - `oat`:      H = −(χ/2) Ĵz²
//! - `tact_rwa`: H = (χ/8)(Ĵ₊² + Ĵ₋²)
//! - `vc`:       H = ω_g Ĵz − χ₀ cos(ωt) Ĵx²  (delta plays the role of ω_g)
//!
//! Dissipation enters through the jump operator √(Γ₀|cos(ωt)|) Ĵx; for
//! the undriven families (ω = 0) the rate is the constant Γ₀.

use num_complex::Complex64;

use crate::algebra::{build_operator, CollectiveOperator, OperatorKind};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelFamily {
    Dicke,
    Pdd,
    Oat,
    TactRwa,
    Vc,
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Dicke => "dicke",
            ModelFamily::Pdd => "pdd",
            ModelFamily::Oat => "oat",
            ModelFamily::TactRwa => "tact_rwa",
            ModelFamily::Vc => "vc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dicke" => Some(ModelFamily::Dicke),
            "pdd" => Some(ModelFamily::Pdd),
            "oat" => Some(ModelFamily::Oat),
            "tact_rwa" => Some(ModelFamily::TactRwa),
            "vc" => Some(ModelFamily::Vc),
            _ => None,
        }
    }
}

/// Which Hamiltonian family plus drive parameters define H(t) and L(t).
#[derive(Clone, Copy, Debug)]
pub struct ModelSpec {
    pub family: ModelFamily,
    pub n_atoms: usize,
    /// Δ for dicke/pdd, ω_g for vc (rad/s); unused for oat/tact_rwa.
    pub delta: f64,
    /// χ or χ₀ (rad/s); the sign is taken verbatim per family.
    pub chi: f64,
    /// Drive frequency ω (rad/s); 0 for oat/tact_rwa.
    pub omega: f64,
    /// Collective decay amplitude Γ₀ (rad/s), ≥ 0; 0 for a closed system.
    pub gamma0: f64,
}

impl ModelSpec {
    pub fn new(
        family: ModelFamily,
        n_atoms: usize,
        delta: f64,
        chi: f64,
        omega: f64,
        gamma0: f64,
    ) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidParameter("model requires N >= 1".into()));
        }
        if gamma0 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma0 must be nonnegative, got {gamma0}"
            )));
        }
        if family == ModelFamily::Pdd && (omega - 2.0 * delta).abs() > 1e-12 * omega.abs().max(1.0)
        {
            return Err(Error::InvalidParameter(format!(
                "pdd requires omega = 2*delta, got omega = {omega}, delta = {delta}"
            )));
        }
        if matches!(family, ModelFamily::Oat | ModelFamily::TactRwa) && omega != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{} is undriven; omega must be 0, got {omega}",
                family.name()
            )));
        }
        Ok(ModelSpec {
            family,
            n_atoms,
            delta,
            chi,
            omega,
            gamma0,
        })
    }

    /// The periodically driven family with ω fixed to the parametric
    /// resonance 2Δ.
    pub fn pdd(n_atoms: usize, delta: f64, chi: f64, gamma0: f64) -> Result<Self> {
        Self::new(ModelFamily::Pdd, n_atoms, delta, chi, 2.0 * delta, gamma0)
    }

    /// Instantaneous coefficients of H(t) in the fixed operator basis
    /// (Ĵz, Ĵx², Ĵz², tact) and the jump rate Γ(t).
    pub(crate) fn coefficients(&self, t: f64) -> HCoefficients {
        let mut c = HCoefficients::default();
        match self.family {
            ModelFamily::Dicke | ModelFamily::Pdd => {
                c.jz = self.delta;
                c.jx2 = self.chi * (self.omega * t).cos();
            }
            ModelFamily::Oat => {
                c.jz2 = -self.chi / 2.0;
            }
            ModelFamily::TactRwa => {
                c.tact = self.chi;
            }
            ModelFamily::Vc => {
                c.jz = self.delta;
                c.jx2 = -self.chi * (self.omega * t).cos();
            }
        }
        c.jump_rate = self.gamma0 * (self.omega * t).cos().abs();
        c
    }

    /// max(|Δ| or |ω_g|, ω, N|χ|): the fastest frequency scale used for
    /// default step-size selection.
    pub fn omega_fast(&self) -> f64 {
        let linear = match self.family {
            ModelFamily::Oat | ModelFamily::TactRwa => 0.0,
            _ => self.delta.abs(),
        };
        linear
            .max(self.omega.abs())
            .max(self.n_atoms as f64 * self.chi.abs())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct HCoefficients {
    pub jz: f64,
    pub jx2: f64,
    pub jz2: f64,
    pub tact: f64,
    pub jump_rate: f64,
}

/// H(t) for the given model, always Hermitian.
pub fn hamiltonian_at(spec: &ModelSpec, t: f64) -> Result<CollectiveOperator> {
    let c = spec.coefficients(t);
    let n = spec.n_atoms;
    let dim = n + 1;
    let mut h = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
    if c.jz != 0.0 {
        h += build_operator(OperatorKind::Jz, n)?.matrix() * Complex64::new(c.jz, 0.0);
    }
    if c.jx2 != 0.0 {
        h += build_operator(OperatorKind::Jx2, n)?.matrix() * Complex64::new(c.jx2, 0.0);
    }
    if c.jz2 != 0.0 {
        h += build_operator(OperatorKind::Jz2, n)?.matrix() * Complex64::new(c.jz2, 0.0);
    }
    if c.tact != 0.0 {
        h += build_operator(OperatorKind::Tact, n)?.matrix() * Complex64::new(c.tact, 0.0);
    }
    CollectiveOperator::from_matrix(n, h)
}

/// L(t) = √(Γ₀|cos(ωt)|) Ĵx, or `None` for a closed system (Γ₀ = 0).
pub fn jump_at(spec: &ModelSpec, t: f64) -> Result<Option<CollectiveOperator>> {
    if spec.gamma0 == 0.0 {
        return Ok(None);
    }
    let rate = spec.coefficients(t).jump_rate;
    let jx = build_operator(OperatorKind::Jx, spec.n_atoms)?;
    let m = jx.matrix() * Complex64::new(rate.sqrt(), 0.0);
    Ok(Some(CollectiveOperator::from_matrix(spec.n_atoms, m)?))
}

/// Instantaneous drive-profile values for the cavity realization.
#[derive(Clone, Copy, Debug)]
pub struct DriveProfile {
    /// β(t) = β₀ √(cos ωt), principal square root (purely imaginary
    /// while cos ωt < 0).
    pub beta: Complex64,
    /// Δc′(t) = Δc′(0) sgn[cos ωt].
    pub delta_c_prime: f64,
    /// η(t) = −(iωβ₀/2)√(sin ωt · tan ωt) − β₀(Δc′(t) − iκ/2)√(cos ωt);
    /// `None` at the divergence points of tan (ωt = π/2 mod π).
    pub eta: Option<Complex64>,
}

/// Evaluate the engineered drive profile at time t.
pub fn drive_profile(
    beta0: f64,
    omega: f64,
    delta_c_prime0: f64,
    kappa: f64,
    t: f64,
) -> Result<DriveProfile> {
    if omega <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "drive profile requires omega > 0, got {omega}"
        )));
    }
    let phase = omega * t;
    let cos = phase.cos();
    let sin = phase.sin();
    let beta = Complex64::new(cos, 0.0).sqrt() * beta0;
    let sign = if cos > 0.0 {
        1.0
    } else if cos < 0.0 {
        -1.0
    } else {
        0.0
    };
    let delta_c_prime = delta_c_prime0 * sign;
    // tan diverges at ωt = π/2 mod π; detect via the cosine magnitude
    let eta = if cos.abs() < 1e-12 {
        None
    } else {
        let tan = sin / cos;
        let root = Complex64::new(sin * tan, 0.0).sqrt();
        let first = Complex64::new(0.0, -omega * beta0 / 2.0) * root;
        let second = Complex64::new(delta_c_prime, -kappa / 2.0)
            * Complex64::new(cos, 0.0).sqrt()
            * beta0;
        Some(first - second)
    };
    Ok(DriveProfile {
        beta,
        delta_c_prime,
        eta,
    })
}

/// Peak-QFI time of the periodically driven scheme,
/// t_peak ≈ [ln(N²) + 4]/(N|χ|).
pub fn t_peak_estimate(n_atoms: usize, chi: f64) -> Result<f64> {
    if chi == 0.0 {
        return Err(Error::InvalidParameter(
            "t_peak is undefined for chi = 0".into(),
        ));
    }
    let n = n_atoms as f64;
    Ok(((n * n).ln() + 4.0) / (n * chi.abs()))
}

/// OAT plateau time t_pl ≈ 4/(√N|χ|), for comparisons.
pub fn t_oat_plateau(n_atoms: usize, chi: f64) -> Result<f64> {
    if chi == 0.0 {
        return Err(Error::InvalidParameter(
            "plateau time is undefined for chi = 0".into(),
        ));
    }
    Ok(4.0 / ((n_atoms as f64).sqrt() * chi.abs()))
}
