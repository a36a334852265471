//! Collective spin operators and states in the Dicke basis.
//!
//! N two-level atoms restricted to the permutation-symmetric subspace
//! carry a single spin j = N/2. The basis {|j, m⟩, m = −j … +j} is
//! ordered by ascending m, so index k corresponds to m = −j + k and the
//! collective ground state |↓⟩^⊗N sits at index 0. Ladder matrix
//! elements are ⟨j, m±1|Ĵ±|j, m⟩ = √(j(j+1) − m(m±1)).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Operator families available from [`build_operator`].
///
/// `Tact` is the two-axis countertwisting combination (Ĵ₊² + Ĵ₋²)/8,
/// dimensionless, meant to be scaled by the interaction rate χ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    JPlus,
    JMinus,
    Jx,
    Jy,
    Jz,
    Jx2,
    Jz2,
    J2,
    Tact,
}

/// An (N+1)×(N+1) complex matrix over the Dicke basis.
#[derive(Clone, Debug)]
pub struct CollectiveOperator {
    n_atoms: usize,
    matrix: DMatrix<Complex64>,
    hermitian: bool,
}

impl CollectiveOperator {
    /// Wrap a matrix, recording whether it is Hermitian (within 1e−12).
    pub fn from_matrix(n_atoms: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = n_atoms + 1;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                left: matrix.nrows(),
                right: dim,
                context: "collective operator matrix",
            });
        }
        let hermitian = hermiticity_deviation(&matrix) < 1e-12;
        Ok(CollectiveOperator {
            n_atoms,
            matrix,
            hermitian,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.n_atoms + 1
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }
}

pub(crate) fn hermiticity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// m-values of the Dicke basis in ascending order, m = −j + k.
pub(crate) fn m_values(n_atoms: usize) -> Vec<f64> {
    let j = n_atoms as f64 / 2.0;
    (0..=n_atoms).map(|k| -j + k as f64).collect()
}

fn ladder_matrix(n_atoms: usize) -> DMatrix<Complex64> {
    let dim = n_atoms + 1;
    let j = n_atoms as f64 / 2.0;
    let mut jp = DMatrix::zeros(dim, dim);
    for k in 0..n_atoms {
        let m = -j + k as f64;
        jp[(k + 1, k)] = Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    jp
}

/// Construct a collective spin operator for N atoms.
///
/// Composite kinds (Ĵx², Ĵz², Ĵ², tact) are formed by exact matrix
/// products and sums of the ladder operators.
pub fn build_operator(kind: OperatorKind, n_atoms: usize) -> Result<CollectiveOperator> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter(
            "operator requires at least one atom".into(),
        ));
    }
    let jp = ladder_matrix(n_atoms);
    let jm = jp.adjoint();
    let dim = n_atoms + 1;
    let j = n_atoms as f64 / 2.0;
    let half = Complex64::new(0.5, 0.0);
    let matrix = match kind {
        OperatorKind::JPlus => jp,
        OperatorKind::JMinus => jm,
        OperatorKind::Jx => (&jp + &jm) * half,
        OperatorKind::Jy => (&jm - &jp) * Complex64::new(0.0, 0.5),
        OperatorKind::Jz => DMatrix::from_fn(dim, dim, |i, k| {
            if i == k {
                Complex64::new(-j + i as f64, 0.0)
            } else {
                C_ZERO
            }
        }),
        OperatorKind::Jx2 => {
            let jx = (&jp + &jm) * half;
            &jx * &jx
        }
        OperatorKind::Jz2 => DMatrix::from_fn(dim, dim, |i, k| {
            if i == k {
                let m = -j + i as f64;
                Complex64::new(m * m, 0.0)
            } else {
                C_ZERO
            }
        }),
        OperatorKind::J2 => {
            let jx = (&jp + &jm) * half;
            let jy = (&jm - &jp) * Complex64::new(0.0, 0.5);
            let jz = build_operator(OperatorKind::Jz, n_atoms)?.into_matrix();
            &jx * &jx + &jy * &jy + &jz * &jz
        }
        OperatorKind::Tact => (&jp * &jp + &jm * &jm) * Complex64::new(0.125, 0.0),
    };
    let op = CollectiveOperator::from_matrix(n_atoms, matrix)?;
    // Ladder operators are the only non-Hermitian kinds.
    debug_assert_eq!(
        op.hermitian,
        !matches!(kind, OperatorKind::JPlus | OperatorKind::JMinus)
    );
    Ok(op)
}

/// a·Ĵ for a normalized axis vector.
pub fn axis_operator(axis: [f64; 3], n_atoms: usize) -> Result<CollectiveOperator> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if norm <= 0.0 {
        return Err(Error::InvalidParameter("rotation axis must be nonzero".into()));
    }
    let jx = build_operator(OperatorKind::Jx, n_atoms)?;
    let jy = build_operator(OperatorKind::Jy, n_atoms)?;
    let jz = build_operator(OperatorKind::Jz, n_atoms)?;
    let m = jx.matrix * Complex64::new(axis[0] / norm, 0.0)
        + jy.matrix * Complex64::new(axis[1] / norm, 0.0)
        + jz.matrix * Complex64::new(axis[2] / norm, 0.0);
    CollectiveOperator::from_matrix(n_atoms, m)
}

/// Eigendecomposition of a Hermitian matrix: (ascending eigenvalues,
/// eigenvector columns in the same order).
pub(crate) fn hermitian_eig(m: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    let fm = faer::Mat::from_fn(n, n, |i, j| faer::c64::new(m[(i, j)].re, m[(i, j)].im));
    let evd = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    let raw: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "hermitian eigendecomposition produced non-finite eigenvalues".into(),
        ));
    }
    order.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&k| raw[k]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, k| {
        let z = u[(i, order[k])];
        Complex64::new(z.re, z.im)
    });
    Ok((vals, vecs))
}

/// exp(−i·angle·H) for Hermitian H, via eigendecomposition.
pub(crate) fn unitary_exp(h: &DMatrix<Complex64>, angle: f64) -> Result<DMatrix<Complex64>> {
    let (vals, vecs) = hermitian_eig(h)?;
    let n = h.nrows();
    let mut phased = vecs.clone();
    for (k, &lambda) in vals.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -angle * lambda);
        for i in 0..n {
            phased[(i, k)] *= phase;
        }
    }
    Ok(&phased * vecs.adjoint())
}

/// An N-atom collective state: a pure amplitude vector over |j, m⟩ or a
/// density matrix.
#[derive(Clone, Debug)]
pub enum StateRepr {
    Pure(DVector<Complex64>),
    Mixed(DMatrix<Complex64>),
}

#[derive(Clone, Debug)]
pub struct DickeState {
    n_atoms: usize,
    repr: StateRepr,
}

impl DickeState {
    /// Build a pure state; the squared norm must be 1 within 1e−9.
    pub fn pure(n_atoms: usize, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != n_atoms + 1 {
            return Err(Error::DimensionMismatch {
                left: amplitudes.len(),
                right: n_atoms + 1,
                context: "pure state amplitudes",
            });
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!(
                "pure state squared norm {norm2} deviates from 1 beyond 1e-9"
            )));
        }
        Ok(DickeState {
            n_atoms,
            repr: StateRepr::Pure(amplitudes),
        })
    }

    /// Build a density matrix; Hermitian within 1e−9, trace 1 within
    /// 1e−9, minimum eigenvalue ≥ −1e−8.
    pub fn mixed(n_atoms: usize, rho: DMatrix<Complex64>) -> Result<Self> {
        let dim = n_atoms + 1;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::DimensionMismatch {
                left: rho.nrows(),
                right: dim,
                context: "density matrix",
            });
        }
        let herm = hermiticity_deviation(&rho);
        if herm > 1e-9 {
            return Err(Error::InvalidState(format!(
                "density matrix hermiticity deviation {herm:.3e} beyond 1e-9"
            )));
        }
        let trace = rho.trace();
        if (trace.re - 1.0).abs() > 1e-9 || trace.im.abs() > 1e-9 {
            return Err(Error::InvalidState(format!(
                "density matrix trace {trace} deviates from 1 beyond 1e-9"
            )));
        }
        let symm = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
        let (vals, _) = hermitian_eig(&symm)?;
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-8 {
            return Err(Error::InvalidState(format!(
                "density matrix minimum eigenvalue {min:.3e} below -1e-8"
            )));
        }
        Ok(DickeState {
            n_atoms,
            repr: StateRepr::Mixed(rho),
        })
    }

    /// The collective ground state |↓⟩^⊗N (m = −j).
    pub fn ground(n_atoms: usize) -> Self {
        Self::basis_state(n_atoms, 0)
    }

    /// Basis state |j, m⟩ with m = −j + index.
    pub fn basis_state(n_atoms: usize, index: usize) -> Self {
        assert!(index <= n_atoms, "basis index out of range");
        let mut v = DVector::zeros(n_atoms + 1);
        v[index] = C_ONE;
        DickeState {
            n_atoms,
            repr: StateRepr::Pure(v),
        }
    }

    /// The maximally mixed state 1/(N+1).
    pub fn maximally_mixed(n_atoms: usize) -> Self {
        let dim = n_atoms + 1;
        let rho = DMatrix::from_diagonal_element(dim, dim, Complex64::new(1.0 / dim as f64, 0.0));
        DickeState {
            n_atoms,
            repr: StateRepr::Mixed(rho),
        }
    }

    pub(crate) fn from_repr_unchecked(n_atoms: usize, repr: StateRepr) -> Self {
        DickeState { n_atoms, repr }
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn dim(&self) -> usize {
        self.n_atoms + 1
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, StateRepr::Pure(_))
    }

    pub fn repr(&self) -> &StateRepr {
        &self.repr
    }

    pub fn as_pure(&self) -> Option<&DVector<Complex64>> {
        match &self.repr {
            StateRepr::Pure(v) => Some(v),
            StateRepr::Mixed(_) => None,
        }
    }

    /// Density matrix view: |ψ⟩⟨ψ| for pure states, ρ as stored otherwise.
    pub fn to_density(&self) -> DMatrix<Complex64> {
        match &self.repr {
            StateRepr::Pure(v) => {
                let dim = v.len();
                DMatrix::from_fn(dim, dim, |i, j| v[i] * v[j].conj())
            }
            StateRepr::Mixed(rho) => rho.clone(),
        }
    }

    /// tr ρ², equal to 1 for pure states.
    pub fn purity(&self) -> f64 {
        match &self.repr {
            StateRepr::Pure(_) => 1.0,
            StateRepr::Mixed(rho) => {
                let mut p = 0.0;
                for i in 0..rho.nrows() {
                    for j in 0..rho.ncols() {
                        p += (rho[(i, j)] * rho[(j, i)]).re;
                    }
                }
                p
            }
        }
    }
}

/// Spin coherent state |θ, φ⟩ = exp[−iφĴz] exp[−iθĴy] |↓⟩^⊗N.
pub fn coherent_state(n_atoms: usize, theta: f64, phi: f64) -> Result<DickeState> {
    let jy = build_operator(OperatorKind::Jy, n_atoms)?;
    let u_theta = unitary_exp(jy.matrix(), theta)?;
    let mut v: DVector<Complex64> = u_theta.column(0).into_owned();
    for (k, m) in m_values(n_atoms).iter().enumerate() {
        v[k] *= Complex64::from_polar(1.0, -phi * m);
    }
    // the exponentials are unitary; renormalize away the eigensolver noise
    let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v /= Complex64::new(norm, 0.0);
    DickeState::pure(n_atoms, v)
}

/// Rotate a state: exp[−i·angle·(a·Ĵ)] with a the normalized axis.
pub fn rotate(state: &DickeState, axis: [f64; 3], angle: f64) -> Result<DickeState> {
    let op = axis_operator(axis, state.n_atoms())?;
    let u = unitary_exp(op.matrix(), angle)?;
    Ok(apply_unitary(state, &u))
}

pub(crate) fn apply_unitary(state: &DickeState, u: &DMatrix<Complex64>) -> DickeState {
    match state.repr() {
        StateRepr::Pure(v) => {
            let mut w = u * v;
            let norm: f64 = w.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            w /= Complex64::new(norm, 0.0);
            DickeState::from_repr_unchecked(state.n_atoms(), StateRepr::Pure(w))
        }
        StateRepr::Mixed(rho) => {
            let rot = u * rho * u.adjoint();
            DickeState::from_repr_unchecked(state.n_atoms(), StateRepr::Mixed(rot))
        }
    }
}

/// ⟨ψ|Ô|ψ⟩ or tr(ρÔ). The imaginary part vanishes (< 1e−9) for
/// Hermitian operators.
pub fn expectation(state: &DickeState, op: &CollectiveOperator) -> Result<Complex64> {
    if state.n_atoms() != op.n_atoms() {
        return Err(Error::DimensionMismatch {
            left: state.dim(),
            right: op.dim(),
            context: "expectation value",
        });
    }
    let m = op.matrix();
    Ok(match state.repr() {
        StateRepr::Pure(v) => {
            let mv = m * v;
            v.dotc(&mv)
        }
        StateRepr::Mixed(rho) => {
            let mut acc = C_ZERO;
            for i in 0..rho.nrows() {
                for j in 0..rho.ncols() {
                    acc += rho[(i, j)] * m[(j, i)];
                }
            }
            acc
        }
    })
}

/// ⟨target|ρ|target⟩, the overlap of a state with a pure target.
pub fn fidelity_with_pure(state: &DickeState, target: &DickeState) -> Result<f64> {
    if state.n_atoms() != target.n_atoms() {
        return Err(Error::DimensionMismatch {
            left: state.dim(),
            right: target.dim(),
            context: "fidelity",
        });
    }
    let t = target.as_pure().ok_or_else(|| {
        Error::InvalidState("fidelity target must be a pure state".into())
    })?;
    Ok(match state.repr() {
        StateRepr::Pure(v) => t.dotc(v).norm_sqr(),
        StateRepr::Mixed(rho) => {
            let rt = rho * t;
            t.dotc(&rt).re
        }
    })
}

/// The pure state minimizing the Holevo phase variance, with amplitudes
/// ∝ sin[π(N/2 + m + 1)/(N + 2)] and prefactor 1/√(N/2 + 1).
pub fn bw_state(n_atoms: usize) -> Result<DickeState> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter("bw state requires N >= 1".into()));
    }
    let pref = 1.0 / (n_atoms as f64 / 2.0 + 1.0).sqrt();
    let denom = n_atoms as f64 + 2.0;
    let v = DVector::from_fn(n_atoms + 1, |k, _| {
        Complex64::new(pref * (std::f64::consts::PI * (k as f64 + 1.0) / denom).sin(), 0.0)
    });
    DickeState::pure(n_atoms, v)
}

/// Husimi Q function: Q(θ, φ) = ⟨θ, φ|ρ|θ, φ⟩ on the given grid.
///
/// Rows index θ, columns index φ. Every entry lies in [0, 1].
pub fn husimi_q(state: &DickeState, theta_grid: &[f64], phi_grid: &[f64]) -> Result<DMatrix<f64>> {
    if theta_grid.is_empty() || phi_grid.is_empty() {
        return Err(Error::InvalidParameter("husimi grids must be nonempty".into()));
    }
    let n = state.n_atoms();
    let jy = build_operator(OperatorKind::Jy, n)?;
    let (vals, vecs) = hermitian_eig(jy.matrix())?;
    let e0 = vecs.adjoint().column(0).into_owned();
    let ms = m_values(n);

    let mut q = DMatrix::zeros(theta_grid.len(), phi_grid.len());
    let dim = n + 1;
    let mut psi_theta = DVector::zeros(dim);
    let mut psi = DVector::zeros(dim);
    for (ti, &theta) in theta_grid.iter().enumerate() {
        // ψ_θ = V e^{−iθΛ} V† |m = −j⟩
        for i in 0..dim {
            let mut acc = C_ZERO;
            for k in 0..dim {
                acc += vecs[(i, k)] * Complex64::from_polar(1.0, -theta * vals[k]) * e0[k];
            }
            psi_theta[i] = acc;
        }
        for (pi, &phi) in phi_grid.iter().enumerate() {
            for i in 0..dim {
                psi[i] = Complex64::from_polar(1.0, -phi * ms[i]) * psi_theta[i];
            }
            let val = match state.repr() {
                StateRepr::Pure(v) => psi.dotc(v).norm_sqr(),
                StateRepr::Mixed(rho) => {
                    let rp = rho * &psi;
                    psi.dotc(&rp).re
                }
            };
            q[(ti, pi)] = val;
        }
    }
    Ok(q)
}

/// Result of maximizing fidelity over the aligning rotation
/// R = exp[−iαĴz] exp[−iγĴy] exp[−iβĴz].
#[derive(Clone, Copy, Debug)]
pub struct AlignmentFit {
    pub fidelity: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
}

/// Maximize ⟨target| R ρ R† |target⟩ over all rotations, parametrized by
/// ZYZ Euler angles R = exp[−iαĴz] exp[−iγĴy] exp[−iβĴz]: a coarse scan
/// over the full angle cube followed by iterative grid refinement below
/// 1e−3 resolution.
pub fn max_fidelity_over_alignment(
    state: &DickeState,
    target: &DickeState,
) -> Result<AlignmentFit> {
    let t = target.as_pure().ok_or_else(|| {
        Error::InvalidState("alignment target must be a pure state".into())
    })?;
    if state.n_atoms() != target.n_atoms() {
        return Err(Error::DimensionMismatch {
            left: state.dim(),
            right: target.dim(),
            context: "alignment fidelity",
        });
    }
    let n = state.n_atoms();
    let dim = n + 1;
    let jy = build_operator(OperatorKind::Jy, n)?;
    let (vals, vecs) = hermitian_eig(jy.matrix())?;
    let ms = m_values(n);

    // pure:  ⟨t|R|ψ⟩ = Σ_k conj(u_k(α)) e^{−iγλ_k} v_k(β),
    //        u(α) = V† e^{+iαĴz}|t⟩,  v(β) = V† e^{−iβĴz}|ψ⟩
    // mixed: f = y†ρy with y = R†|t⟩ = e^{+iβĴz} V e^{+iγΛ} u(α)
    let u_of = |alpha: f64| -> DVector<Complex64> {
        DVector::from_fn(dim, |k, _| {
            let mut acc = C_ZERO;
            for i in 0..dim {
                acc += vecs[(i, k)].conj() * Complex64::from_polar(1.0, alpha * ms[i]) * t[i];
            }
            acc
        })
    };

    enum Repr<'a> {
        Pure(&'a DVector<Complex64>),
        Mixed(&'a DMatrix<Complex64>),
    }
    let repr = match state.repr() {
        StateRepr::Pure(v) => Repr::Pure(v),
        StateRepr::Mixed(r) => Repr::Mixed(r),
    };

    let eval = |u: &DVector<Complex64>, gamma: f64, beta: f64| -> f64 {
        match &repr {
            Repr::Pure(psi) => {
                let mut acc = C_ZERO;
                for k in 0..dim {
                    let mut v = C_ZERO;
                    for i in 0..dim {
                        v += vecs[(i, k)].conj()
                            * Complex64::from_polar(1.0, -beta * ms[i])
                            * psi[i];
                    }
                    acc += u[k].conj() * Complex64::from_polar(1.0, -gamma * vals[k]) * v;
                }
                acc.norm_sqr()
            }
            Repr::Mixed(r) => {
                let mut y = DVector::zeros(dim);
                for i in 0..dim {
                    let mut acc = C_ZERO;
                    for k in 0..dim {
                        acc += vecs[(i, k)] * Complex64::from_polar(1.0, gamma * vals[k]) * u[k];
                    }
                    y[i] = Complex64::from_polar(1.0, beta * ms[i]) * acc;
                }
                let ry = *r * &y;
                y.dotc(&ry).re
            }
        }
    };
    // pure path with precomputed v(β): the β work is hoisted out of γ
    let eval_pure_fast = |u: &DVector<Complex64>, v: &DVector<Complex64>, gamma: f64| -> f64 {
        let mut acc = C_ZERO;
        for k in 0..dim {
            acc += u[k].conj() * Complex64::from_polar(1.0, -gamma * vals[k]) * v[k];
        }
        acc.norm_sqr()
    };
    let v_of = |psi: &DVector<Complex64>, beta: f64| -> DVector<Complex64> {
        DVector::from_fn(dim, |k, _| {
            let mut acc = C_ZERO;
            for i in 0..dim {
                acc += vecs[(i, k)].conj() * Complex64::from_polar(1.0, -beta * ms[i]) * psi[i];
            }
            acc
        })
    };

    let tau = 2.0 * std::f64::consts::PI;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
    let (na, ng, nb) = (24usize, 48usize, 24usize);
    match &repr {
        Repr::Pure(psi) => {
            let us: Vec<_> = (0..na).map(|i| u_of(tau * i as f64 / na as f64)).collect();
            let vs: Vec<_> = (0..nb)
                .map(|i| v_of(psi, tau * i as f64 / nb as f64))
                .collect();
            for (ia, u) in us.iter().enumerate() {
                for (ib, v) in vs.iter().enumerate() {
                    for ig in 0..ng {
                        let gamma = tau * ig as f64 / ng as f64;
                        let f = eval_pure_fast(u, v, gamma);
                        if f > best.0 {
                            best = (
                                f,
                                tau * ia as f64 / na as f64,
                                gamma,
                                tau * ib as f64 / nb as f64,
                            );
                        }
                    }
                }
            }
        }
        Repr::Mixed(_) => {
            for ia in 0..na {
                let alpha = tau * ia as f64 / na as f64;
                let u = u_of(alpha);
                for ig in 0..ng {
                    let gamma = tau * ig as f64 / ng as f64;
                    for ib in 0..nb {
                        let beta = tau * ib as f64 / nb as f64;
                        let f = eval(&u, gamma, beta);
                        if f > best.0 {
                            best = (f, alpha, gamma, beta);
                        }
                    }
                }
            }
        }
    }

    let mut window = tau / na as f64;
    while window > 5e-4 {
        let (_, a0, g0, b0) = best;
        let pts = 6;
        for ia in 0..=pts {
            let alpha = a0 - window + 2.0 * window * ia as f64 / pts as f64;
            let u = u_of(alpha);
            for ig in 0..=pts {
                let gamma = g0 - window + 2.0 * window * ig as f64 / pts as f64;
                for ib in 0..=pts {
                    let beta = b0 - window + 2.0 * window * ib as f64 / pts as f64;
                    let f = eval(&u, gamma, beta);
                    if f > best.0 {
                        best = (f, alpha, gamma, beta);
                    }
                }
            }
        }
        window /= 3.0;
    }
    Ok(AlignmentFit {
        fidelity: best.0,
        alpha: best.1.rem_euclid(tau),
        gamma: best.2.rem_euclid(tau),
        beta: best.3.rem_euclid(tau),
    })
}
