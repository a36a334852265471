//! Fixed-step RK4 integration of dρ/dt = −i[H(t), ρ] + D[L(t)]ρ, or of
//! the Schrödinger equation on the amplitude vector for closed systems.
//!
//! The integrator works in the interaction picture of the linear Ĵz
//! term: with U = exp[−iδtĴz] the transformed equation has the detuning
//! removed and every operator band picks up a phase e^{−iδt(j−i)}. The
//! transform is exact and unitary, so it changes no observable physics,
//! but it removes the stiffest frequency (the m-ladder spread N·δ) from
//! the integration entirely. Recorded states are mapped back to the lab
//! frame.
//!
//! Step sizes: the default is (2π/ω_fast)/100 with ω_fast the fastest
//! model frequency; a step above (2π/ω_fast)/40 is rejected. When a
//! dissipative drive is present the step is snapped so the kinks of
//! |cos(ωt)| land on grid points.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::algebra::{
    hermiticity_deviation, hermitian_eig, m_values, CollectiveOperator, DickeState, StateRepr,
};
use crate::band::Banded;
use crate::model::{ModelFamily, ModelSpec};
use crate::{Error, Result};

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
const C_I: Complex64 = Complex64::new(0.0, 1.0);

/// Integration controls for [`evolve`].
#[derive(Clone, Copy, Debug)]
pub struct StepControl {
    /// Fixed RK4 step (seconds).
    pub dt: f64,
    /// Store every k-th step.
    pub record_every: usize,
    /// Re-Hermitize and re-trace (or re-normalize) after every step.
    pub renormalize: bool,
}

impl StepControl {
    pub fn new(dt: f64, record_every: usize, renormalize: bool) -> Self {
        StepControl {
            dt,
            record_every,
            renormalize,
        }
    }

    /// Default step (2π/ω_fast)/100 with everything recorded.
    pub fn for_model(spec: &ModelSpec) -> Result<Self> {
        let omega_fast = spec.omega_fast();
        if omega_fast <= 0.0 {
            return Err(Error::InvalidParameter(
                "model has no frequency scale; pass an explicit dt".into(),
            ));
        }
        Ok(StepControl {
            dt: (2.0 * std::f64::consts::PI / omega_fast) / 100.0,
            record_every: 1,
            renormalize: true,
        })
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.dt <= 0.0 {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        let omega_fast = spec.omega_fast();
        if omega_fast > 0.0 {
            let limit = (2.0 * std::f64::consts::PI / omega_fast) / 40.0;
            if self.dt > limit * (1.0 + 1e-12) {
                return Err(Error::StepTooLarge {
                    dt: self.dt,
                    limit,
                    omega_fast,
                });
            }
        }
        Ok(())
    }
}

/// Recorded states of one [`evolve`] call; times strictly increasing.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DickeState>,
    pub model: ModelSpec,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// dρ/dt = −i[H, ρ] + ÔρÔ† − ½(Ô†Ôρ + ρÔ†Ô) for a mixed state.
///
/// The returned matrix is traceless up to rounding (< 1e−12).
pub fn lindblad_rhs(
    state: &DickeState,
    hamiltonian: &CollectiveOperator,
    jump: Option<&CollectiveOperator>,
) -> Result<DMatrix<Complex64>> {
    if state.n_atoms() != hamiltonian.n_atoms() {
        return Err(Error::DimensionMismatch {
            left: state.dim(),
            right: hamiltonian.dim(),
            context: "lindblad rhs",
        });
    }
    if let Some(l) = jump {
        if l.n_atoms() != state.n_atoms() {
            return Err(Error::DimensionMismatch {
                left: state.dim(),
                right: l.dim(),
                context: "lindblad jump",
            });
        }
    }
    let rho = state.to_density();
    Ok(lindblad_rhs_dense(&rho, hamiltonian.matrix(), jump.map(|l| l.matrix())))
}

fn lindblad_rhs_dense(
    rho: &DMatrix<Complex64>,
    h: &DMatrix<Complex64>,
    jump: Option<&DMatrix<Complex64>>,
) -> DMatrix<Complex64> {
    let mut out = (h * rho - rho * h) * (-C_I);
    if let Some(l) = jump {
        let ldag = l.adjoint();
        let ldl = &ldag * l;
        out += l * rho * ldag;
        out -= (&ldl * rho + rho * &ldl) * Complex64::new(0.5, 0.0);
    }
    out
}

/// ρ̃ = Û†ρÛ with Û = exp[−iΔtĴz]: the frame rotating with the detuning.
pub fn to_rotating_frame(state: &DickeState, delta: f64, t: f64) -> DickeState {
    frame_phase(state, delta * t)
}

/// Apply diag(e^{+iφ m}) · state · diag(e^{−iφ m}).
fn frame_phase(state: &DickeState, phi: f64) -> DickeState {
    let ms = m_values(state.n_atoms());
    match state.repr() {
        StateRepr::Pure(v) => {
            let w = DVector::from_fn(v.len(), |k, _| {
                Complex64::from_polar(1.0, phi * ms[k]) * v[k]
            });
            DickeState::from_repr_unchecked(state.n_atoms(), StateRepr::Pure(w))
        }
        StateRepr::Mixed(rho) => {
            let r = DMatrix::from_fn(rho.nrows(), rho.ncols(), |a, b| {
                Complex64::from_polar(1.0, phi * (ms[a] - ms[b])) * rho[(a, b)]
            });
            DickeState::from_repr_unchecked(state.n_atoms(), StateRepr::Mixed(r))
        }
    }
}

/// Band templates of the interaction-picture generators. Only the bands
/// a family actually uses are populated.
struct TildeModel {
    n: usize,
    spec: ModelSpec,
    /// frame frequency δ (Ĵz coefficient removed by the transform)
    delta_rot: f64,
    /// diagonal of Ĵz² (for oat)
    jz2_diag: Vec<f64>,
    /// diagonal part of Ĵx² = (Ĵ₊Ĵ₋ + Ĵ₋Ĵ₊)/4
    jx2_diag: Vec<f64>,
    /// band +2 of Ĵx² (equal to band +2 of 2·tact), stored at column index
    jx2_sup2: Vec<f64>,
    /// band +1 of Ĵx = (Ĵ₊ + Ĵ₋)/2
    jx_sup1: Vec<f64>,
}

impl TildeModel {
    fn new(spec: &ModelSpec) -> Result<Self> {
        let n = spec.n_atoms;
        let dim = n + 1;
        let j = n as f64 / 2.0;
        let ms = m_values(n);
        let ladder = |m: f64| (j * (j + 1.0) - m * (m + 1.0)).sqrt();

        // J+ has entries c_k = ladder(m_k) at (k+1, k).
        // Jx band +1 at column k+1 holds (Jx)_{k, k+1} = c_k / 2.
        let mut jx_sup1 = vec![0.0; dim];
        for k in 0..n {
            jx_sup1[k + 1] = ladder(ms[k]) / 2.0;
        }
        // Jx² = (J+² + J-² + J+J- + J-J+)/4
        let mut jx2_diag = vec![0.0; dim];
        for k in 0..dim {
            let down = if k > 0 { ladder(ms[k - 1]).powi(2) } else { 0.0 };
            let up = if k < n { ladder(ms[k]).powi(2) } else { 0.0 };
            jx2_diag[k] = (down + up) / 4.0;
        }
        // (J+²)_{k+2, k} = c_{k+1} c_k; as band +2 of Jx² at column k+2:
        // (Jx²)_{k, k+2} = c_{k+1} c_k / 4.
        let mut jx2_sup2 = vec![0.0; dim];
        for k in 0..n.saturating_sub(1) {
            jx2_sup2[k + 2] = ladder(ms[k]) * ladder(ms[k + 1]) / 4.0;
        }
        let jz2_diag = ms.iter().map(|m| m * m).collect();

        let delta_rot = match spec.family {
            ModelFamily::Dicke | ModelFamily::Pdd | ModelFamily::Vc => spec.delta,
            ModelFamily::Oat | ModelFamily::TactRwa => 0.0,
        };
        Ok(TildeModel {
            n,
            spec: *spec,
            delta_rot,
            jz2_diag,
            jx2_diag,
            jx2_sup2,
            jx_sup1,
        })
    }

    /// Assemble H̃(t) in place. Band d of a conjugated operator picks up
    /// the phase e^{−iδt·d}.
    fn hamiltonian(&self, t: f64, out: &mut Banded) {
        let c = self.spec.coefficients(t);
        let jz_residual = c.jz - self.delta_rot;
        let dim = self.n + 1;
        let ms = m_values(self.n);
        let phase2 = Complex64::from_polar(1.0, -2.0 * self.delta_rot * t);
        // tact shares the ±2 bands of Jx²: (J+² + J-²)/8 carries half the
        // weight of the (J+² + J-²)/4 part inside Jx², and no diagonal.
        let sup2_coeff = phase2 * Complex64::new(c.jx2 + 0.5 * c.tact, 0.0);
        for k in 0..dim {
            let diag = Complex64::new(
                jz_residual * ms[k] + c.jx2 * self.jx2_diag[k] + c.jz2 * self.jz2_diag[k],
                0.0,
            );
            out.diags[2][k] = diag;
            let up2 = sup2_coeff * self.jx2_sup2[k];
            out.diags[4][k] = up2;
        }
        // Hermitian conjugate band −2: entry (k, k−2) = conj of (k−2, k)
        for k in 0..dim {
            out.diags[0][k] = if k + 2 < dim {
                out.diags[4][k + 2].conj()
            } else {
                C_ZERO
            };
        }
        for k in 0..dim {
            out.diags[1][k] = C_ZERO;
            out.diags[3][k] = C_ZERO;
        }
    }

    /// Assemble L̃(t) = √Γ(t) · (Ĵx conjugated into the frame); returns
    /// false when the rate vanishes.
    fn jump(&self, t: f64, out: &mut Banded) -> bool {
        let c = self.spec.coefficients(t);
        if c.jump_rate <= 0.0 {
            return false;
        }
        let amp = c.jump_rate.sqrt();
        let dim = self.n + 1;
        let phase1 = Complex64::from_polar(amp, -self.delta_rot * t);
        for k in 0..dim {
            out.diags[3][k] = phase1 * self.jx_sup1[k];
            out.diags[2][k] = C_ZERO;
            out.diags[0][k] = C_ZERO;
            out.diags[4][k] = C_ZERO;
        }
        for k in 0..dim {
            out.diags[1][k] = if k + 1 < dim {
                out.diags[3][k + 1].conj()
            } else {
                C_ZERO
            };
        }
        true
    }
}

struct MixedScratch {
    h: Banded,
    l: Banded,
    lrho: DMatrix<Complex64>,
    k: [DMatrix<Complex64>; 4],
}

fn rhs_banded(model: &TildeModel, t: f64, rho: &DMatrix<Complex64>, s: &mut MixedScratch, slot: usize) {
    model.hamiltonian(t, &mut s.h);
    let has_jump = model.jump(t, &mut s.l);
    let out = &mut s.k[slot];
    out.fill(C_ZERO);
    s.h.mul_dense_acc(-C_I, rho, out);
    s.h.mul_dense_right_acc(C_I, rho, out);
    if has_jump {
        s.lrho.fill(C_ZERO);
        s.l.mul_dense_acc(Complex64::new(1.0, 0.0), rho, &mut s.lrho);
        s.l.mul_dense_right_acc(Complex64::new(1.0, 0.0), &s.lrho, out);
        let lsq = s.l.mul_banded(&s.l);
        let minus_half = Complex64::new(-0.5, 0.0);
        lsq.mul_dense_acc(minus_half, rho, out);
        lsq.mul_dense_right_acc(minus_half, rho, out);
    }
}

/// Spectral-radius guard: RK4 is only stable while |λ|·dt stays below
/// ~2.83 on the imaginary axis. λ is bounded by the row-sum norm of the
/// generator (doubled for the commutator), sampled over a drive period.
fn stability_limit(model: &TildeModel, t0: f64, t1: f64, mixed: bool) -> f64 {
    let span = if model.spec.omega != 0.0 {
        2.0 * std::f64::consts::PI / model.spec.omega.abs()
    } else {
        t1 - t0
    };
    let row_norm = |b: &Banded| -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..=model.n {
            let mut row = 0.0;
            for d in -2i64..=2 {
                let jj = k as i64 + d;
                if jj >= 0 && (jj as usize) <= model.n {
                    row += b.entry(k, jj as usize).norm();
                }
            }
            worst = worst.max(row);
        }
        worst
    };
    let mut h = Banded::zeros(model.n + 1);
    let mut l = Banded::zeros(model.n + 1);
    let mut worst: f64 = 0.0;
    for i in 0..16 {
        let t = t0 + span * i as f64 / 16.0;
        model.hamiltonian(t, &mut h);
        let hnorm = row_norm(&h);
        let lnorm = if model.jump(t, &mut l) { row_norm(&l) } else { 0.0 };
        let s = if mixed {
            2.0 * hnorm + lnorm * lnorm
        } else {
            hnorm
        };
        worst = worst.max(s);
    }
    worst
}

/// Integrate the model from `t0` to `t1` and record states.
///
/// Closed systems (Γ₀ = 0) with a pure initial state are propagated as
/// amplitude vectors; everything else as density matrices. Recorded
/// states are validated against the state invariants; a violation
/// aborts with a diagnostic.
pub fn evolve(
    initial: &DickeState,
    spec: &ModelSpec,
    t0: f64,
    t1: f64,
    ctl: &StepControl,
) -> Result<Trajectory> {
    if initial.n_atoms() != spec.n_atoms {
        return Err(Error::DimensionMismatch {
            left: initial.dim(),
            right: spec.n_atoms + 1,
            context: "evolve initial state",
        });
    }
    if t1 <= t0 {
        return Err(Error::InvalidParameter(format!(
            "t1 = {t1} must exceed t0 = {t0}"
        )));
    }
    ctl.validate(spec)?;

    // Align steps with the kinks of |cos(ωt)| at (k+½)π/ω: a whole number
    // of steps per quarter period keeps every kink on a grid point.
    let mut dt = ctl.dt;
    if spec.omega != 0.0 && spec.gamma0 > 0.0 {
        let period = 2.0 * std::f64::consts::PI / spec.omega.abs();
        let mut per_period = ((period / dt) * (1.0 - 1e-12)).ceil() as usize;
        per_period = per_period.div_ceil(4).max(1) * 4;
        dt = period / per_period as f64;
    }

    let model = TildeModel::new(spec)?;
    let pure_path = spec.gamma0 == 0.0 && initial.is_pure();
    let radius = stability_limit(&model, t0, t1, !pure_path);
    if radius * dt > 2.83 {
        return Err(Error::StepTooLarge {
            dt,
            limit: 2.83 / radius,
            omega_fast: radius,
        });
    }

    let n_steps = ((t1 - t0) / dt).floor() as usize;
    let remainder = (t1 - t0) - n_steps as f64 * dt;
    let has_tail = remainder > 1e-9 * dt;

    let mut times = Vec::new();
    let mut states = Vec::new();

    if pure_path {
        let mut psi: Vec<Complex64> = to_rotating_frame(initial, model.delta_rot, t0)
            .as_pure()
            .expect("pure path")
            .iter()
            .cloned()
            .collect();
        let dim = spec.n_atoms + 1;
        let mut h = Banded::zeros(dim);
        let mut k = [
            vec![C_ZERO; dim],
            vec![C_ZERO; dim],
            vec![C_ZERO; dim],
            vec![C_ZERO; dim],
        ];
        let mut stage = vec![C_ZERO; dim];

        let record = |t: f64,
                      psi: &[Complex64],
                      out_t: &mut Vec<f64>,
                      out_s: &mut Vec<DickeState>|
         -> Result<()> {
            let v = DVector::from_row_slice(psi);
            let tilde = DickeState::pure(spec.n_atoms, v).map_err(|e| Error::InvariantViolation {
                t,
                detail: e.to_string(),
            })?;
            out_t.push(t);
            out_s.push(frame_phase(&tilde, -model.delta_rot * t));
            Ok(())
        };
        record(t0, &psi, &mut times, &mut states)?;

        let rhs = |t: f64, v: &[Complex64], h: &mut Banded, out: &mut [Complex64]| {
            model.hamiltonian(t, h);
            out.fill(C_ZERO);
            h.mul_vec_acc(-C_I, v, out);
        };

        let total = n_steps + usize::from(has_tail);
        for step in 0..total {
            let t = t0 + step as f64 * dt;
            let h_step = if step == n_steps { remainder } else { dt };
            rhs(t, &psi, &mut h, &mut k[0]);
            for i in 0..dim {
                stage[i] = psi[i] + k[0][i] * (h_step / 2.0);
            }
            rhs(t + h_step / 2.0, &stage, &mut h, &mut k[1]);
            for i in 0..dim {
                stage[i] = psi[i] + k[1][i] * (h_step / 2.0);
            }
            rhs(t + h_step / 2.0, &stage, &mut h, &mut k[2]);
            for i in 0..dim {
                stage[i] = psi[i] + k[2][i] * h_step;
            }
            rhs(t + h_step, &stage, &mut h, &mut k[3]);
            for i in 0..dim {
                psi[i] += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * (h_step / 6.0);
            }
            if ctl.renormalize {
                let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                for a in psi.iter_mut() {
                    *a /= norm;
                }
            }
            let t_next = if step == n_steps { t1 } else { t0 + (step + 1) as f64 * dt };
            let is_last = step + 1 == total;
            if (step + 1) % ctl.record_every == 0 || is_last {
                record(t_next, &psi, &mut times, &mut states)?;
            }
        }
    } else {
        let dim = spec.n_atoms + 1;
        let rho0 = to_rotating_frame(initial, model.delta_rot, t0).to_density();
        let mut rho = rho0;
        let mut stage: DMatrix<Complex64> = DMatrix::zeros(dim, dim);
        let mut scratch = MixedScratch {
            h: Banded::zeros(dim),
            l: Banded::zeros(dim),
            lrho: DMatrix::zeros(dim, dim),
            k: std::array::from_fn(|_| DMatrix::zeros(dim, dim)),
        };

        let record = |t: f64,
                      rho: &DMatrix<Complex64>,
                      out_t: &mut Vec<f64>,
                      out_s: &mut Vec<DickeState>|
         -> Result<()> {
            let tilde = DickeState::mixed(spec.n_atoms, rho.clone()).map_err(|e| {
                Error::InvariantViolation {
                    t,
                    detail: e.to_string(),
                }
            })?;
            out_t.push(t);
            out_s.push(frame_phase(&tilde, -model.delta_rot * t));
            Ok(())
        };
        record(t0, &rho, &mut times, &mut states)?;

        let total = n_steps + usize::from(has_tail);
        for step in 0..total {
            let t = t0 + step as f64 * dt;
            let h_step = if step == n_steps { remainder } else { dt };
            rhs_banded(&model, t, &rho, &mut scratch, 0);
            stage_combine(&mut stage, &rho, &scratch.k[0], h_step / 2.0);
            rhs_banded(&model, t + h_step / 2.0, &stage, &mut scratch, 1);
            stage_combine(&mut stage, &rho, &scratch.k[1], h_step / 2.0);
            rhs_banded(&model, t + h_step / 2.0, &stage, &mut scratch, 2);
            stage_combine(&mut stage, &rho, &scratch.k[2], h_step);
            rhs_banded(&model, t + h_step, &stage, &mut scratch, 3);
            {
                let [k1, k2, k3, k4] = &scratch.k;
                let w = h_step / 6.0;
                for (r, (((a, b), c), d)) in rho
                    .iter_mut()
                    .zip(k1.iter().zip(k2.iter()).zip(k3.iter()).zip(k4.iter()))
                {
                    *r += (*a + (*b + *c) * 2.0 + *d) * w;
                }
            }
            if ctl.renormalize {
                renormalize_density(&mut rho);
            } else {
                // drift check: abort once hermiticity or trace leaves 1e-6
                let tr = rho.trace();
                if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
                    return Err(Error::InvariantViolation {
                        t: t + h_step,
                        detail: format!("trace drifted to {tr}"),
                    });
                }
            }
            let t_next = if step == n_steps { t1 } else { t0 + (step + 1) as f64 * dt };
            let is_last = step + 1 == total;
            if (step + 1) % ctl.record_every == 0 || is_last {
                record(t_next, &rho, &mut times, &mut states)?;
            }
        }
    }

    Ok(Trajectory {
        times,
        states,
        model: *spec,
    })
}

fn stage_combine(
    out: &mut DMatrix<Complex64>,
    base: &DMatrix<Complex64>,
    k: &DMatrix<Complex64>,
    w: f64,
) {
    for ((o, b), kk) in out.iter_mut().zip(base.iter()).zip(k.iter()) {
        *o = *b + *kk * w;
    }
}

fn renormalize_density(rho: &mut DMatrix<Complex64>) {
    let n = rho.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = (rho[(i, j)] + rho[(j, i)].conj()) * 0.5;
            rho[(i, j)] = avg;
            rho[(j, i)] = avg.conj();
        }
        rho[(i, i)] = Complex64::new(rho[(i, i)].re, 0.0);
    }
    let tr: f64 = (0..n).map(|i| rho[(i, i)].re).sum();
    *rho /= Complex64::new(tr, 0.0);
}

/// Validation data for a recorded density matrix; used by tests and the
/// acceptance suite to spot-check trajectories.
pub fn density_diagnostics(state: &DickeState) -> (f64, f64, f64) {
    let rho = state.to_density();
    let herm = hermiticity_deviation(&rho);
    let trace_dev = (rho.trace() - Complex64::new(1.0, 0.0)).norm();
    let symm = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let (vals, _) = hermitian_eig(&symm).expect("diagnostics eigendecomposition");
    let min_eig = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    (herm, trace_dev, min_eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{
        build_operator, coherent_state, expectation, DickeState, OperatorKind,
    };
    use crate::model::{hamiltonian_at, jump_at, ModelFamily, ModelSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        let dim = n + 1;
        let a = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let mut rho = &a * a.adjoint();
        let tr = rho.trace();
        rho /= tr;
        rho
    }

    #[test]
    fn rhs_trivial_cases() {
        let n = 4;
        let dim = n + 1;
        let zero_h = CollectiveOperator::from_matrix(n, DMatrix::zeros(dim, dim)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = DickeState::mixed(n, random_density(n, &mut rng)).unwrap();
        let out = lindblad_rhs(&rho, &zero_h, None).unwrap();
        assert!(out.norm() < 1e-14);

        // an eigenstate of the jump operator is dark
        let plus_x = coherent_state(n, std::f64::consts::FRAC_PI_2, std::f64::consts::PI).unwrap();
        let proj = DickeState::mixed(n, plus_x.to_density()).unwrap();
        let jx = build_operator(OperatorKind::Jx, n).unwrap();
        let out = lindblad_rhs(&proj, &zero_h, Some(&jx)).unwrap();
        assert!(out.norm() < 1e-9, "dark-state residual {}", out.norm());

        // an energy eigenstate is stationary under the commutator
        let jz = build_operator(OperatorKind::Jz, n).unwrap();
        let ground = DickeState::mixed(n, DickeState::ground(n).to_density()).unwrap();
        let out = lindblad_rhs(&ground, &jz, None).unwrap();
        assert!(out.norm() < 1e-14);
    }

    #[test]
    fn rhs_is_traceless() {
        let n = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = DickeState::mixed(n, random_density(n, &mut rng)).unwrap();
        let spec = ModelSpec::new(ModelFamily::Vc, n, -1.0, 0.3, -2.0, 0.5).unwrap();
        let h = hamiltonian_at(&spec, 0.37).unwrap();
        let l = jump_at(&spec, 0.37).unwrap().unwrap();
        let out = lindblad_rhs(&rho, &h, Some(&l)).unwrap();
        assert!(out.trace().norm() < 1e-12);
    }

    #[test]
    fn rhs_rejects_dimension_mismatch() {
        let rho = DickeState::maximally_mixed(4);
        let h = build_operator(OperatorKind::Jz, 5).unwrap();
        assert!(lindblad_rhs(&rho, &h, None).is_err());
    }

    #[test]
    fn banded_rhs_matches_dense_reference() {
        // the production inner loop against the public dense formula
        let n = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ModelSpec::new(ModelFamily::Vc, n, -1.3, 0.21, -2.6, 0.4).unwrap();
        let model = TildeModel::new(&spec).unwrap();
        let dim = n + 1;
        for &t in &[0.0, 0.31, 1.7] {
            let rho = random_density(n, &mut rng);
            let mut scratch = MixedScratch {
                h: Banded::zeros(dim),
                l: Banded::zeros(dim),
                lrho: DMatrix::zeros(dim, dim),
                k: std::array::from_fn(|_| DMatrix::zeros(dim, dim)),
            };
            rhs_banded(&model, t, &rho, &mut scratch, 0);

            // dense reference in the same frame: conjugate H and L by U
            let u = DMatrix::from_fn(dim, dim, |a, b| {
                if a == b {
                    Complex64::from_polar(1.0, -model.delta_rot * t * m_values(n)[a])
                } else {
                    C_ZERO
                }
            });
            let h_lab = hamiltonian_at(&spec, t).unwrap().into_matrix();
            let jz = build_operator(OperatorKind::Jz, n).unwrap().into_matrix();
            let h_tilde =
                u.adjoint() * &h_lab * &u - &jz * Complex64::new(model.delta_rot, 0.0);
            let l_lab = jump_at(&spec, t).unwrap().unwrap().into_matrix();
            let l_tilde = u.adjoint() * &l_lab * &u;
            let reference = lindblad_rhs_dense(&rho, &h_tilde, Some(&l_tilde));
            assert!(
                (&scratch.k[0] - &reference).norm() < 1e-11,
                "banded/dense mismatch {}",
                (&scratch.k[0] - &reference).norm()
            );
        }
    }

    #[test]
    fn commuting_hamiltonian_keeps_jz_constant() {
        let n = 6;
        let spec = ModelSpec::new(ModelFamily::Dicke, n, 1.0, 0.0, 0.0, 0.0).unwrap();
        let ctl = StepControl::new(0.01, 10, true);
        let traj = evolve(&DickeState::ground(n), &spec, 0.0, 3.0, &ctl).unwrap();
        let jz = build_operator(OperatorKind::Jz, n).unwrap();
        for s in &traj.states {
            assert_relative_eq!(
                expectation(s, &jz).unwrap().re,
                -(n as f64) / 2.0,
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn rotating_frame_reference_points() {
        let n = 10;
        let plus_x = coherent_state(n, std::f64::consts::FRAC_PI_2, std::f64::consts::PI).unwrap();
        let same = to_rotating_frame(&plus_x, 0.7, 0.0);
        assert_relative_eq!(
            crate::algebra::fidelity_with_pure(&same, &plus_x).unwrap(),
            1.0,
            epsilon = 1e-12
        );

        let eigen = DickeState::basis_state(n, 3);
        let moved = to_rotating_frame(&eigen, 0.9, 2.1);
        assert_relative_eq!(
            crate::algebra::fidelity_with_pure(&moved, &eigen).unwrap(),
            1.0,
            epsilon = 1e-12
        );

        // Û = exp[−iΔtĴz] with Δt = π/2 carries +x̂ to −ŷ:
        // ⟨Ĵy⟩ → cos(Δt)⟨Ĵy⟩ − sin(Δt)⟨Ĵx⟩ under ρ̃ = Û†ρÛ.
        let rotated = to_rotating_frame(&plus_x, std::f64::consts::FRAC_PI_2, 1.0);
        let jy = build_operator(OperatorKind::Jy, n).unwrap();
        let jx = build_operator(OperatorKind::Jx, n).unwrap();
        assert_relative_eq!(
            expectation(&rotated, &jy).unwrap().re,
            -(n as f64) / 2.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(expectation(&rotated, &jx).unwrap().re, 0.0, epsilon = 1e-9);
        // coherent(θ, φ) points along −(sinθcosφ, sinθsinφ, cosθ), so the
        // −ŷ state sits at φ = +π/2
        let minus_y = coherent_state(
            n,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        assert_relative_eq!(
            crate::algebra::fidelity_with_pure(&rotated, &minus_y).unwrap(),
            1.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn closed_system_preserves_purity_and_dissipative_run_stays_physical() {
        let n = 8;
        let spec = ModelSpec::pdd(n, 4.0, 0.5, 0.0).unwrap();
        let ctl = StepControl::for_model(&spec).unwrap();
        let traj = evolve(&DickeState::ground(n), &spec, 0.0, 2.0, &ctl).unwrap();
        for s in &traj.states {
            assert!((s.purity() - 1.0).abs() < 1e-7);
        }

        let open = ModelSpec::new(ModelFamily::Vc, n, -1.0, 0.2, -2.0, 0.08).unwrap();
        let ctl = StepControl::new(0.01, 25, true);
        let initial = DickeState::mixed(n, DickeState::ground(n).to_density()).unwrap();
        let traj = evolve(&initial, &open, 0.0, 8.0, &ctl).unwrap();
        assert!(traj.states.last().unwrap().purity() < 0.999);
        for s in &traj.states {
            let (herm, trace_dev, min_eig) = density_diagnostics(s);
            assert!(herm < 1e-8);
            assert!(trace_dev < 1e-8);
            assert!(min_eig > -1e-6);
        }
        // times strictly increasing
        for w in traj.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        // halving dt shrinks the error by ~16 on a smooth interval
        let n = 5;
        let spec = ModelSpec::new(ModelFamily::Vc, n, -1.0, 0.4, -2.0, 0.3).unwrap();
        let initial = DickeState::mixed(n, DickeState::ground(n).to_density()).unwrap();
        let jz = build_operator(OperatorKind::Jz, n).unwrap();
        // kinks of |cos 2t| sit at odd multiples of π/4; stay below.
        // steps are chosen as exact divisors of the drive period so the
        // kink-alignment snap preserves the 2:1 ratios.
        let t_end = 0.7;
        let observable = |per_period: usize| {
            let dt = std::f64::consts::PI / per_period as f64;
            let ctl = StepControl::new(dt, usize::MAX, false);
            let traj = evolve(&initial, &spec, 0.0, t_end, &ctl).unwrap();
            expectation(traj.states.last().unwrap(), &jz).unwrap().re
        };
        let o1 = observable(96);
        let o2 = observable(192);
        let o3 = observable(384);
        let ratio = (o1 - o2).abs() / (o2 - o3).abs();
        assert!(
            (13.0..=19.0).contains(&ratio),
            "convergence ratio {ratio} (diffs {} / {})",
            (o1 - o2).abs(),
            (o2 - o3).abs()
        );
    }

    #[test]
    fn oversized_step_is_rejected() {
        let n = 6;
        let spec = ModelSpec::pdd(n, 5.0, 0.3, 0.0).unwrap();
        // ω_fast = 10 ⇒ limit = (2π/10)/40 ≈ 0.0157
        let ctl = StepControl::new(0.1, 1, true);
        match evolve(&DickeState::ground(n), &spec, 0.0, 1.0, &ctl) {
            Err(Error::StepTooLarge { .. }) => {}
            other => panic!("expected StepTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn default_step_control_matches_formula() {
        let spec = ModelSpec::pdd(10, 3.0, 0.2, 0.0).unwrap();
        let ctl = StepControl::for_model(&spec).unwrap();
        // ω_fast = max(3, 6, 2) = 6
        assert_relative_eq!(ctl.dt, 2.0 * std::f64::consts::PI / 6.0 / 100.0);
    }
}
