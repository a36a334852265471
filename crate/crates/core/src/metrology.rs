//! Quantum Fisher information over the generator set {Ĵx, Ĵy, Ĵz}.
//!
//! For a state with spectral decomposition ρ = Σ ϱ_i |ϱ_i⟩⟨ϱ_i| the QFIM
//! elements are
//!
//!   F_{μν} = Σ_{i,j: ϱi+ϱj≠0} 2 Re[⟨ϱi|[Ĵμ, ρ]|ϱj⟩⟨ϱj|[ρ, Ĵν]|ϱi⟩] / (ϱi + ϱj)
//!          = Σ_{i,j} 2 (ϱi − ϱj)² Re[(Ĵμ)_{ij} (Ĵν)_{ij}*] / (ϱi + ϱj),
//!
//! the two forms being identical because ⟨ϱi|[Ĵμ, ρ]|ϱj⟩ = (ϱj − ϱi)(Ĵμ)_{ij}.
//! Pairs with ϱi + ϱj below the rank threshold 1e−12 are excluded. The
//! largest eigenvalue λ_max bounds the phase sensitivity through the
//! quantum Cramér-Rao bound σ ≥ 1/√(M λ_max), and its eigenvector is the
//! optimal generator direction.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;

use crate::algebra::{build_operator, hermitian_eig, DickeState, OperatorKind, StateRepr};
use crate::{Error, Result};

/// Rank threshold for excluding ϱi + ϱj ≈ 0 pairs, relative to tr ρ = 1.
const EPS_RANK: f64 = 1e-12;

/// QFIM over {Ĵx, Ĵy, Ĵz} with its eigensystem.
#[derive(Clone, Debug)]
pub struct QfimResult {
    /// Real symmetric 3×3 matrix in the (x, y, z) generator basis.
    pub matrix: Matrix3<f64>,
    /// Eigenvalues sorted descending: (λ_max, λ₂, λ₃).
    pub eigenvalues: [f64; 3],
    /// Unit eigenvectors aligned with `eigenvalues`; the sign is fixed so
    /// the first component above 1e−12 in magnitude is positive.
    pub generators: [Vector3<f64>; 3],
    /// λ_max − λ₂; callers can detect a degenerate optimum through this.
    pub degeneracy_gap: f64,
}

impl QfimResult {
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn optimal_generator(&self) -> Vector3<f64> {
        self.generators[0]
    }
}

/// Evaluate the QFIM of a state (pure states enter as rank-1 density
/// matrices).
pub fn qfim(state: &DickeState) -> Result<QfimResult> {
    let n = state.n_atoms();
    let rho = match state.repr() {
        StateRepr::Pure(_) => state.to_density(),
        StateRepr::Mixed(m) => (m + m.adjoint()) * Complex64::new(0.5, 0.0),
    };
    let (weights, basis) = hermitian_eig(&rho)?;

    let jx = build_operator(OperatorKind::Jx, n)?.into_matrix();
    let jy = build_operator(OperatorKind::Jy, n)?.into_matrix();
    let jz = build_operator(OperatorKind::Jz, n)?.into_matrix();
    let transform = |op: &DMatrix<Complex64>| basis.adjoint() * op * &basis;
    let jt = [transform(&jx), transform(&jy), transform(&jz)];

    let dim = n + 1;
    let mut f = Matrix3::zeros();
    for i in 0..dim {
        for j in 0..dim {
            let sum = weights[i] + weights[j];
            if sum <= EPS_RANK {
                continue;
            }
            let diff = weights[i] - weights[j];
            if diff == 0.0 {
                continue;
            }
            let w = 2.0 * diff * diff / sum;
            let e = [jt[0][(i, j)], jt[1][(i, j)], jt[2][(i, j)]];
            for mu in 0..3 {
                for nu in mu..3 {
                    f[(mu, nu)] += w * (e[mu] * e[nu].conj()).re;
                }
            }
        }
    }
    for mu in 0..3 {
        for nu in 0..mu {
            f[(mu, nu)] = f[(nu, mu)];
        }
    }

    let se = f.symmetric_eigen();
    let raw: [f64; 3] = [se.eigenvalues[0], se.eigenvalues[1], se.eigenvalues[2]];
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| raw[b].partial_cmp(&raw[a]).unwrap());
    let mut eigenvalues = [0.0; 3];
    let mut generators = [Vector3::zeros(); 3];
    for (slot, &k) in order.iter().enumerate() {
        eigenvalues[slot] = se.eigenvalues[k];
        let mut v: Vector3<f64> = se.eigenvectors.column(k).into_owned();
        v /= v.norm();
        for comp in v.iter() {
            if comp.abs() > 1e-12 {
                if *comp < 0.0 {
                    v = -v;
                }
                break;
            }
        }
        generators[slot] = v;
    }

    let n2 = (n as f64) * (n as f64);
    if eigenvalues[0] > n2 * (1.0 + 1e-6) {
        return Err(Error::Numerical(format!(
            "QFIM eigenvalue {} exceeds the Heisenberg bound N² = {n2}",
            eigenvalues[0]
        )));
    }
    if eigenvalues[2] < -1e-8 * n2.max(1.0) {
        return Err(Error::Numerical(format!(
            "QFIM eigenvalue {} is negative beyond tolerance",
            eigenvalues[2]
        )));
    }

    Ok(QfimResult {
        matrix: f,
        eigenvalues,
        degeneracy_gap: eigenvalues[0] - eigenvalues[1],
        generators,
    })
}

/// Quantum Cramér-Rao bound on the phase standard deviation after M
/// measurements: 1/√(M λ_max).
pub fn qcrb_sigma(lambda_max: f64, measurements: u64) -> Result<f64> {
    if lambda_max <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "QCRB requires a positive QFI, got {lambda_max}"
        )));
    }
    if measurements == 0 {
        return Err(Error::InvalidParameter("QCRB requires M >= 1".into()));
    }
    Ok(1.0 / (measurements as f64 * lambda_max).sqrt())
}

/// Decibel gain over the standard quantum limit,
/// G = 10 log₁₀(√(λ_max/N)).
pub fn db_gain(lambda_max: f64, n_atoms: usize) -> f64 {
    10.0 * (lambda_max / n_atoms as f64).sqrt().log10()
}

/// Holevo phase variance of a pure state.
///
/// The first circular moment is read off adjacent amplitudes,
/// ⟨e^{iφ}⟩ = Σ_m c*_{m+1} c_m, and V = |⟨e^{iφ}⟩|⁻² − 1. States with a
/// vanishing moment (any Ĵz eigenstate) have infinite variance.
pub fn holevo_variance(state: &DickeState) -> Result<f64> {
    let v = state.as_pure().ok_or_else(|| {
        Error::InvalidState("holevo variance is defined here for pure states".into())
    })?;
    let mut moment = Complex64::new(0.0, 0.0);
    for k in 0..state.n_atoms() {
        moment += v[k + 1].conj() * v[k];
    }
    let mag = moment.norm();
    if mag < 1e-12 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / (mag * mag) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{
        expectation, rotate, DickeState,
    };
    use crate::model::{ModelFamily, ModelSpec};
    use crate::propagate::{evolve, to_rotating_frame, StepControl};
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent pure-state oracle: F = 4·Cov(Ĵμ, Ĵν).
    fn covariance_qfim(state: &DickeState) -> Matrix3<f64> {
        let n = state.n_atoms();
        let ops = [
            build_operator(OperatorKind::Jx, n).unwrap(),
            build_operator(OperatorKind::Jy, n).unwrap(),
            build_operator(OperatorKind::Jz, n).unwrap(),
        ];
        let mut cov = Matrix3::zeros();
        let means: Vec<Complex64> = ops
            .iter()
            .map(|op| expectation(state, op).unwrap())
            .collect();
        let v = state.as_pure().unwrap();
        for mu in 0..3 {
            for nu in 0..3 {
                let a = ops[mu].matrix() * v;
                let b = ops[nu].matrix() * v;
                // Cov = Re⟨JμJν⟩ − ⟨Jμ⟩⟨Jν⟩ (symmetrized by the real part)
                let corr = a.dotc(&b).re;
                cov[(mu, nu)] = 4.0 * (corr - (means[mu] * means[nu]).re);
            }
        }
        cov
    }

    fn random_pure(n: usize, rng: &mut ChaCha8Rng) -> DickeState {
        let mut v = DVector::from_fn(n + 1, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v /= Complex64::new(norm, 0.0);
        DickeState::pure(n, v).unwrap()
    }

    fn random_mixed(n: usize, rng: &mut ChaCha8Rng) -> DickeState {
        let dim = n + 1;
        let a = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let mut rho = &a * a.adjoint();
        let tr = rho.trace();
        rho /= tr;
        DickeState::mixed(n, rho).unwrap()
    }

    #[test]
    fn pole_state_qfim() {
        let n = 12;
        let res = qfim(&DickeState::ground(n)).unwrap();
        let nf = n as f64;
        // oracle: Var Jx = Var Jy = N/4 at the pole, Var Jz = 0
        assert_relative_eq!(res.matrix[(0, 0)], nf, epsilon = 1e-9);
        assert_relative_eq!(res.matrix[(1, 1)], nf, epsilon = 1e-9);
        assert_relative_eq!(res.matrix[(2, 2)], 0.0, epsilon = 1e-9);
        assert_relative_eq!(res.eigenvalues[0], nf, epsilon = 1e-9);
        assert!(res.degeneracy_gap.abs() < 1e-9);
        // the degenerate optimal pair spans the x-y plane
        assert!(res.generators[0][2].abs() < 1e-9);
    }

    #[test]
    fn maximally_mixed_state_has_zero_qfim() {
        let res = qfim(&DickeState::maximally_mixed(9)).unwrap();
        assert!(res.matrix.norm() < 1e-10);
    }

    #[test]
    fn noon_like_state_reaches_heisenberg_limit() {
        let n = 10;
        let dim = n + 1;
        let mut v = DVector::zeros(dim);
        let amp = Complex64::new(1.0 / 2.0_f64.sqrt(), 0.0);
        v[0] = amp;
        v[n] = amp;
        let state = DickeState::pure(n, v).unwrap();
        let res = qfim(&state).unwrap();
        assert_relative_eq!(res.lambda_max(), (n * n) as f64, epsilon = 1e-8);
        let g = res.optimal_generator();
        assert!(g[2].abs() > 1.0 - 1e-9, "generator {g:?}");

        // second route: the commutator form of the QFIM evaluated literally
        let rho = state.to_density();
        let (weights, basis) = hermitian_eig(&rho).unwrap();
        let ops = [
            build_operator(OperatorKind::Jx, n).unwrap().into_matrix(),
            build_operator(OperatorKind::Jy, n).unwrap().into_matrix(),
            build_operator(OperatorKind::Jz, n).unwrap().into_matrix(),
        ];
        let mut literal = Matrix3::zeros();
        for mu in 0..3 {
            for nu in 0..3 {
                let cm = &ops[mu] * &rho - &rho * &ops[mu];
                let cn = &rho * &ops[nu] - &ops[nu] * &rho;
                let cmt = basis.adjoint() * cm * &basis;
                let cnt = basis.adjoint() * cn * &basis;
                let mut acc = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        let sum = weights[i] + weights[j];
                        if sum <= EPS_RANK {
                            continue;
                        }
                        acc += 2.0 * (cmt[(i, j)] * cnt[(j, i)]).re / sum;
                    }
                }
                literal[(mu, nu)] = acc;
            }
        }
        assert!((literal - res.matrix).norm() < 1e-8);
    }

    #[test]
    fn qfim_matches_pure_state_covariance_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..200 {
            let n = 1 + (trial % 30);
            let state = random_pure(n, &mut rng);
            let res = qfim(&state).unwrap();
            let oracle = covariance_qfim(&state);
            let scale = oracle.norm().max(1.0);
            assert!(
                (res.matrix - oracle).norm() / scale < 1e-6,
                "trial {trial}: deviation {}",
                (res.matrix - oracle).norm() / scale
            );
        }
    }

    #[test]
    fn qfim_is_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..25 {
            let res = qfim(&random_mixed(8, &mut rng)).unwrap();
            assert!(res.eigenvalues[2] >= -1e-8);
        }
    }

    #[test]
    fn qfim_transforms_covariantly_under_rotations() {
        // With U = exp[−iθ a·Ĵ], the conjugated generators satisfy
        // U†Ĵμ U = Σ_α R_{μα} Ĵα with R = Rot(a, +θ), so
        // F(UρU†) = R F Rᵀ.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..12 {
            let n = 7;
            let state = if trial % 2 == 0 {
                random_pure(n, &mut rng)
            } else {
                random_mixed(n, &mut rng)
            };
            let axis_raw = [
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            ];
            let angle = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            let norm = (axis_raw.iter().map(|x| x * x).sum::<f64>()).sqrt();
            let axis = Vector3::new(axis_raw[0] / norm, axis_raw[1] / norm, axis_raw[2] / norm);

            let rotated = rotate(&state, axis_raw, angle).unwrap();
            let f0 = qfim(&state).unwrap();
            let f1 = qfim(&rotated).unwrap();

            // Rodrigues rotation matrix about `axis` through +angle
            let c = angle.cos();
            let s = angle.sin();
            let mut r = Matrix3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    let kron = if i == j { 1.0 } else { 0.0 };
                    r[(i, j)] = c * kron + (1.0 - c) * axis[i] * axis[j];
                }
            }
            r[(0, 1)] -= s * axis[2];
            r[(1, 0)] += s * axis[2];
            r[(0, 2)] += s * axis[1];
            r[(2, 0)] -= s * axis[1];
            r[(1, 2)] -= s * axis[0];
            r[(2, 1)] += s * axis[0];

            let expected = r * f0.matrix * r.transpose();
            let scale = f0.matrix.norm().max(1.0);
            assert!(
                (f1.matrix - expected).norm() / scale < 1e-6,
                "trial {trial}: covariance deviation {}",
                (f1.matrix - expected).norm() / scale
            );
            assert_relative_eq!(
                f1.lambda_max(),
                f0.lambda_max(),
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn qcrb_reference_values() {
        assert_relative_eq!(qcrb_sigma(100.0, 1).unwrap(), 0.1, epsilon = 1e-15);
        assert_relative_eq!(qcrb_sigma(1e4, 1).unwrap(), 0.01, epsilon = 1e-15);
        assert_relative_eq!(qcrb_sigma(6500.0, 100).unwrap(), 1.24e-3, epsilon = 1e-5);
        assert!(qcrb_sigma(0.0, 10).is_err());
        assert!(qcrb_sigma(-2.0, 10).is_err());
    }

    #[test]
    fn db_gain_reference_values() {
        assert_relative_eq!(db_gain(100.0, 100), 0.0, epsilon = 1e-12);
        let g_bw = db_gain(0.137 * 1e4, 100);
        assert!((g_bw - 5.7).abs() < 0.3, "BW gain {g_bw}");
        let g_peak = db_gain(0.65 * 1e4, 100);
        assert!((g_peak - 9.1).abs() < 0.3, "peak gain {g_peak}");
    }

    #[test]
    fn holevo_variance_cases() {
        // any Jz eigenstate has complete phase uncertainty
        assert!(holevo_variance(&DickeState::basis_state(6, 2))
            .unwrap()
            .is_infinite());

        // closed form for the phase state: V = tan²(π/(N+2))
        for n in [2usize, 5, 20, 100] {
            let bw = crate::algebra::bw_state(n).unwrap();
            let v = holevo_variance(&bw).unwrap();
            let expect = (std::f64::consts::PI / (n as f64 + 2.0)).tan().powi(2);
            assert_relative_eq!(v, expect, max_relative = 1e-12);
        }

        // N = 100 lands within 5% of π²/N²
        let v = holevo_variance(&crate::algebra::bw_state(100).unwrap()).unwrap();
        let target = std::f64::consts::PI.powi(2) / 1e4;
        assert!((v - target).abs() / target < 0.05);

        assert!(holevo_variance(&DickeState::maximally_mixed(4)).is_err());
    }

    #[test]
    fn chi_sign_flip_leaves_qfi_invariant() {
        let n = 12;
        let mut curves = Vec::new();
        for chi in [0.8, -0.8] {
            let spec = ModelSpec::new(ModelFamily::TactRwa, n, 0.0, chi, 0.0, 0.0).unwrap();
            let ctl = StepControl::new(2e-4, 40, true);
            let traj = evolve(&DickeState::ground(n), &spec, 0.0, 0.6, &ctl).unwrap();
            let lambdas: Vec<f64> = traj
                .states
                .iter()
                .map(|s| qfim(s).unwrap().lambda_max())
                .collect();
            curves.push(lambdas);
        }
        for (a, b) in curves[0].iter().zip(curves[1].iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn early_squeezing_generator_lies_along_x_plus_y() {
        // rotating-frame optimal generator of the driven model points
        // along (1, 1, 0)/√2 during the initial squeezing
        let n = 24;
        let chi = 1.0;
        let delta = 50.0 * n as f64 * chi;
        let spec = ModelSpec::pdd(n, delta, chi, 0.0).unwrap();
        let t_probe = 3.0 / (n as f64 * chi);
        let ctl = StepControl::new(
            2.0 * std::f64::consts::PI / (2.0 * delta) / 100.0,
            usize::MAX,
            true,
        );
        let traj = evolve(&DickeState::ground(n), &spec, 0.0, t_probe, &ctl).unwrap();
        let state = traj.states.last().unwrap();
        let rotated = to_rotating_frame(state, delta, *traj.times.last().unwrap());
        let res = qfim(&rotated).unwrap();
        assert!(res.degeneracy_gap > 1.0, "gap {}", res.degeneracy_gap);
        let g = res.optimal_generator();
        let target = Vector3::new(1.0, 1.0, 0.0) / 2.0_f64.sqrt();
        let angle = g.dot(&target).abs().min(1.0).acos().to_degrees();
        assert!(angle < 2.0, "generator {g:?} deviates {angle}°");
    }
}
