//! Bayesian phase reconstruction with Ĵz population measurements.
//!
//! The protocol rotates the probe state by a π/2 pulse about its optimal
//! generator Ĝ so the anti-squeezed axis lies on the equator, encodes
//! the unknown phase Φ with the same generator, and measures Ĵz. Bayes
//! theorem P(Φ|m) ∝ P(m|Φ)P(Φ) is applied once per simulated outcome,
//! starting from a flat prior on [−π, π). The posterior standard
//! deviation tracks the sensitivity as a function of the measurement
//! count and is compared against the QCRB 1/√(M λ_max).
//!
//! Outcomes are drawn from a ChaCha8 stream cipher seeded with the
//! 64-bit run seed, which makes every recorded number reproducible
//! bit-for-bit.

use std::collections::HashMap;

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{axis_operator, hermitian_eig, m_values, rotate, DickeState};
use crate::metrology::{qcrb_sigma, qfim};
use crate::{Error, Result};

/// Name of the pinned random number generator, recorded in output
/// metadata.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Initial number of grid points of the flat prior.
pub const INITIAL_GRID: usize = 4096;
/// Hard cap on grid refinement (three factor-4 refinements).
pub const MAX_GRID: usize = INITIAL_GRID * 64;

/// Discretized distribution over the phase window [−π, π).
#[derive(Clone, Debug)]
pub struct PhasePosterior {
    grid: Vec<f64>,
    weights: Vec<f64>,
}

impl PhasePosterior {
    /// Flat prior on a uniform grid of `count` midpoints over [−π, π).
    pub fn flat(count: usize) -> Result<Self> {
        if count < 1024 {
            return Err(Error::InvalidParameter(format!(
                "posterior grid needs at least 1024 points, got {count}"
            )));
        }
        let spacing = 2.0 * std::f64::consts::PI / count as f64;
        let grid = (0..count)
            .map(|i| -std::f64::consts::PI + (i as f64 + 0.5) * spacing)
            .collect();
        let weights = vec![1.0 / count as f64; count];
        Ok(PhasePosterior { grid, weights })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Multiply by a likelihood row and renormalize.
    pub fn update(&mut self, likelihood: &[f64]) -> Result<()> {
        debug_assert_eq!(likelihood.len(), self.weights.len());
        let mut sum = 0.0;
        for (w, l) in self.weights.iter_mut().zip(likelihood) {
            *w *= l.max(0.0);
            sum += *w;
        }
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::DegeneratePosterior { measurements: 0 });
        }
        for w in self.weights.iter_mut() {
            *w /= sum;
        }
        Ok(())
    }

    /// Zero the weights outside |Φ| < `half_width` and renormalize.
    ///
    /// The Ĵz-population protocol on parity-restricted probes cannot tell
    /// Φ from π − Φ, so the usable dynamic range is a π-wide window; the
    /// protocol encodes that prior knowledge here.
    pub fn restrict_window(&mut self, half_width: f64) -> Result<()> {
        let mut sum = 0.0;
        for (w, p) in self.weights.iter_mut().zip(&self.grid) {
            if p.abs() >= half_width {
                *w = 0.0;
            }
            sum += *w;
        }
        if !(sum > 0.0) {
            return Err(Error::DegeneratePosterior { measurements: 0 });
        }
        for w in self.weights.iter_mut() {
            *w /= sum;
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.grid
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| p * w)
            .sum()
    }

    /// Linear (non-circular) standard deviation over the grid window.
    pub fn sigma(&self) -> f64 {
        let mean = self.mean();
        let var: f64 = self
            .grid
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * (p - mean) * (p - mean))
            .sum();
        var.max(0.0).sqrt()
    }
}

/// Sensitivity record of one protocol run.
#[derive(Clone, Debug)]
pub struct ProtocolResult {
    /// (measurement count M, posterior standard deviation).
    pub sigma_curve: Vec<(u64, f64)>,
    /// QCRB 1/√(M λ_max) at the same counts.
    pub qcrb_curve: Vec<(u64, f64)>,
    pub seed: u64,
    /// λ_max of the probe state used for the QCRB.
    pub lambda_max: f64,
}

/// P(m|Φ): Ĵz populations of exp[−iΦĜ] ρ exp[+iΦĜ].
///
/// Entries are clipped at zero (tolerating −1e−12 of rounding) and
/// renormalized. The generator axis must be a unit vector.
pub fn measurement_distribution(
    state: &DickeState,
    generator: [f64; 3],
    phi: f64,
) -> Result<Vec<f64>> {
    check_unit(generator)?;
    let encoded = rotate(state, generator, phi)?;
    let rho = encoded.to_density();
    let mut probs: Vec<f64> = (0..rho.nrows()).map(|k| rho[(k, k)].re).collect();
    let mut sum = 0.0;
    for p in probs.iter_mut() {
        if *p < -1e-12 {
            return Err(Error::Numerical(format!(
                "measurement distribution produced probability {p}"
            )));
        }
        *p = p.max(0.0);
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Ok(probs)
}

fn check_unit(axis: [f64; 3]) -> Result<()> {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "generator must be a unit vector, |g| = {norm}"
        )));
    }
    Ok(())
}

/// Fourier representation of the likelihood: because Ĝ = a·Ĵ has the
/// integer-spaced spectrum m = −j..j, the populations after encoding are
/// trigonometric polynomials
///
///   P(m|Φ) = c_{m,0} + 2 Σ_{k=1..N} Re[c_{m,k} e^{−iΦk}],
///
/// which makes rows over arbitrary phase grids cheap to evaluate.
struct LikelihoodTable {
    /// coeffs[m][k] for k = 0..=N; negative k follow by conjugation.
    coeffs: Vec<Vec<Complex64>>,
}

impl LikelihoodTable {
    fn build(state: &DickeState, generator: [f64; 3]) -> Result<Self> {
        let n = state.n_atoms();
        let dim = n + 1;
        let g = axis_operator(generator, n)?;
        let (gvals, gvecs) = hermitian_eig(g.matrix())?;
        // a·Ĵ is unitarily equivalent to Ĵz; its sorted spectrum must be
        // the m ladder, which keeps the Fourier indices exactly integer.
        let ms = m_values(n);
        for (have, want) in gvals.iter().zip(&ms) {
            if (have - want).abs() > 1e-6 {
                return Err(Error::Numerical(format!(
                    "generator spectrum deviates from the m ladder: {have} vs {want}"
                )));
            }
        }
        let rho = state.to_density();
        let rho_g = gvecs.adjoint() * &rho * &gvecs;
        let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
        for (m, row) in coeffs.iter_mut().enumerate() {
            // pairs with b > a contribute conjugate coefficients at −k and
            // are folded analytically into the row evaluation
            for a in 0..dim {
                let va = gvecs[(m, a)];
                for b in 0..=a {
                    row[a - b] += va * rho_g[(a, b)] * gvecs[(m, b)].conj();
                }
            }
        }
        Ok(LikelihoodTable { coeffs })
    }

    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Evaluate P(m|Φ) for one outcome over a phase grid.
    fn row(&self, m: usize, grid: &[f64]) -> Vec<f64> {
        let c = &self.coeffs[m];
        grid.iter()
            .map(|&phi| {
                let step = Complex64::from_polar(1.0, -phi);
                let mut z = step;
                let mut acc = c[0].re;
                for ck in &c[1..] {
                    acc += 2.0 * (ck * z).re;
                    z *= step;
                }
                acc.max(0.0)
            })
            .collect()
    }

    /// The full outcome distribution at a single phase.
    fn distribution_at(&self, phi: f64) -> Vec<f64> {
        let dim = self.dim();
        let mut probs: Vec<f64> = (0..dim)
            .map(|m| self.row(m, std::slice::from_ref(&phi))[0])
            .collect();
        let sum: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= sum;
        }
        probs
    }
}

/// Record points: every count up to 10, then 16 per decade, plus M_max.
fn record_counts(m_max: u64) -> Vec<u64> {
    let mut points: Vec<u64> = (1..=m_max.min(10)).collect();
    let mut k = 0u32;
    loop {
        let v = 10f64.powf(1.0 + k as f64 / 16.0).round() as u64;
        if v > m_max {
            break;
        }
        if v > *points.last().unwrap() {
            points.push(v);
        }
        k += 1;
    }
    if *points.last().unwrap() != m_max {
        points.push(m_max);
    }
    points
}

/// Run the full reconstruction protocol.
///
/// Pipeline: QFIM → optimal generator Ĝ → π/2 pulse about Ĝ → repeated
/// Ĵz measurements at the true phase, with a posterior update per
/// outcome. σ is recorded at logarithmically spaced counts along with
/// the QCRB. The grid refines by a factor 4 (recomputing the posterior
/// from the outcome tally) whenever σ drops below 10 grid spacings,
/// up to [`MAX_GRID`] points.
///
/// The prior is flat over the central π-wide window |Φ| < π/2: the
/// population likelihood obeys P(m|π − Φ) = P(m|Φ) exactly for
/// parity-restricted probes, so phases outside that window are
/// indistinguishable twins and the protocol's dynamic range is π.
pub fn run_protocol(
    state: &DickeState,
    m_max: u64,
    phi_true: f64,
    seed: u64,
) -> Result<ProtocolResult> {
    if m_max == 0 {
        return Err(Error::InvalidParameter("protocol needs M_max >= 1".into()));
    }
    let info = qfim(state)?;
    let lambda = info.lambda_max();
    let g = info.optimal_generator();
    let axis = [g[0], g[1], g[2]];
    let pulsed = rotate(state, axis, std::f64::consts::FRAC_PI_2)?;

    let table = LikelihoodTable::build(&pulsed, axis)?;
    let p_true = table.distribution_at(phi_true);
    let cdf: Vec<f64> = p_true
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut posterior = PhasePosterior::flat(INITIAL_GRID)?;
    posterior.restrict_window(std::f64::consts::FRAC_PI_2)?;
    let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut counts: HashMap<usize, u64> = HashMap::new();

    let record_at = record_counts(m_max);
    let mut sigma_curve = Vec::with_capacity(record_at.len());
    let mut qcrb_curve = Vec::with_capacity(record_at.len());
    let mut next_record = 0usize;

    for m_count in 1..=m_max {
        let u: f64 = rng.gen();
        let outcome = match cdf.iter().position(|&c| u < c) {
            Some(idx) => idx,
            None => cdf.len() - 1,
        };
        *counts.entry(outcome).or_insert(0) += 1;

        if !rows.contains_key(&outcome) {
            rows.insert(outcome, table.row(outcome, posterior.grid()));
        }
        let row = rows.get(&outcome).unwrap();
        posterior.update(row).map_err(|e| match e {
            Error::DegeneratePosterior { .. } => Error::DegeneratePosterior {
                measurements: m_count,
            },
            other => other,
        })?;

        let sigma = posterior.sigma();
        if sigma < 10.0 * posterior.spacing() && posterior.grid().len() < MAX_GRID {
            let new_count = posterior.grid().len() * 4;
            posterior = replay_posterior(&table, &counts, new_count, m_count)?;
            rows.clear();
        }

        if next_record < record_at.len() && m_count == record_at[next_record] {
            sigma_curve.push((m_count, posterior.sigma()));
            qcrb_curve.push((m_count, qcrb_sigma(lambda, m_count)?));
            next_record += 1;
        }
    }

    Ok(ProtocolResult {
        sigma_curve,
        qcrb_curve,
        seed,
        lambda_max: lambda,
    })
}

/// Rebuild the posterior on a finer grid from the outcome tally,
/// accumulating in log space.
fn replay_posterior(
    table: &LikelihoodTable,
    counts: &HashMap<usize, u64>,
    grid_count: usize,
    measurements: u64,
) -> Result<PhasePosterior> {
    let mut posterior = PhasePosterior::flat(grid_count)?;
    posterior.restrict_window(std::f64::consts::FRAC_PI_2)?;
    let mut log_w = vec![0.0f64; grid_count];
    for (&outcome, &count) in counts {
        let row = table.row(outcome, posterior.grid());
        for (lw, l) in log_w.iter_mut().zip(&row) {
            *lw += count as f64 * l.max(f64::MIN_POSITIVE).ln();
        }
    }
    let peak = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::DegeneratePosterior { measurements });
    }
    let mut sum = 0.0;
    for (w, lw) in posterior.weights.iter_mut().zip(&log_w) {
        *w *= (lw - peak).exp();
        sum += *w;
    }
    if !(sum > 0.0) {
        return Err(Error::DegeneratePosterior { measurements });
    }
    for w in posterior.weights.iter_mut() {
        *w /= sum;
    }
    Ok(posterior)
}

/// The optimal generator of a probe state, exposed for scenario metadata.
pub fn protocol_generator(state: &DickeState) -> Result<Vector3<f64>> {
    Ok(qfim(state)?.optimal_generator())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{bw_state, coherent_state, DickeState};
    use approx::assert_relative_eq;

    #[test]
    fn flat_posterior_sigma_is_uniform_std() {
        let p = PhasePosterior::flat(4096).unwrap();
        let expect = 2.0 * std::f64::consts::PI / 12f64.sqrt();
        // discrete correction is O(1/count²)
        assert_relative_eq!(p.sigma(), expect, max_relative = 1e-6);
        assert_relative_eq!(p.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_likelihood_keeps_posterior_flat() {
        let mut p = PhasePosterior::flat(2048).unwrap();
        let row = vec![0.37; 2048];
        for _ in 0..50 {
            p.update(&row).unwrap();
        }
        let expect = 2.0 * std::f64::consts::PI / 12f64.sqrt();
        assert_relative_eq!(p.sigma(), expect, max_relative = 1e-6);
    }

    #[test]
    fn zero_likelihood_degenerates() {
        let mut p = PhasePosterior::flat(1024).unwrap();
        let row = vec![0.0; 1024];
        assert!(matches!(
            p.update(&row),
            Err(Error::DegeneratePosterior { .. })
        ));
    }

    #[test]
    fn measurement_distribution_point_mass_for_commuting_encoding() {
        let n = 8;
        let state = DickeState::basis_state(n, 3);
        let probs = measurement_distribution(&state, [0.0, 0.0, 1.0], 1.234).unwrap();
        for (k, p) in probs.iter().enumerate() {
            let want = if k == 3 { 1.0 } else { 0.0 };
            assert_relative_eq!(*p, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn measurement_distribution_identity_encoding_gives_populations() {
        let n = 6;
        let state = bw_state(n).unwrap();
        let probs = measurement_distribution(&state, [1.0, 0.0, 0.0], 0.0).unwrap();
        let rho = state.to_density();
        for k in 0..=n {
            assert_relative_eq!(probs[k], rho[(k, k)].re, epsilon = 1e-12);
        }
    }

    #[test]
    fn pi_encoding_mirrors_plus_x_to_minus_x() {
        // oracle: direct matrix computation of the rotated state
        let n = 10;
        let plus_x = coherent_state(n, std::f64::consts::FRAC_PI_2, std::f64::consts::PI).unwrap();
        let minus_x = coherent_state(n, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let probs =
            measurement_distribution(&plus_x, [0.0, 0.0, 1.0], std::f64::consts::PI).unwrap();
        let rho = minus_x.to_density();
        for k in 0..=n {
            assert_relative_eq!(probs[k], rho[(k, k)].re, epsilon = 1e-9);
        }
    }

    #[test]
    fn non_unit_generator_rejected() {
        let state = DickeState::ground(4);
        assert!(measurement_distribution(&state, [0.0, 0.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn likelihood_table_matches_direct_distribution() {
        let n = 9;
        let state = bw_state(n).unwrap();
        let axis = [1.0 / 2.0_f64.sqrt(), 1.0 / 2.0_f64.sqrt(), 0.0];
        let table = LikelihoodTable::build(&state, axis).unwrap();
        for phi in [-2.1, -0.4, 0.0, 0.7, 3.0] {
            let direct = measurement_distribution(&state, axis, phi).unwrap();
            let fourier = table.distribution_at(phi);
            for (a, b) in direct.iter().zip(&fourier) {
                assert_relative_eq!(a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn protocol_is_deterministic_per_seed() {
        let state = bw_state(16).unwrap();
        let a = run_protocol(&state, 64, 0.0, 42).unwrap();
        let b = run_protocol(&state, 64, 0.0, 42).unwrap();
        assert_eq!(a.sigma_curve.len(), b.sigma_curve.len());
        for (x, y) in a.sigma_curve.iter().zip(&b.sigma_curve) {
            assert_eq!(x.0, y.0);
            assert_eq!(x.1.to_bits(), y.1.to_bits());
        }
        let c = run_protocol(&state, 64, 0.0, 43).unwrap();
        assert!(a
            .sigma_curve
            .iter()
            .zip(&c.sigma_curve)
            .any(|(x, y)| x.1 != y.1));
    }

    /// BW-like probe with an equatorial optimal generator: the raw phase
    /// state senses Ĵz rotations, which commute with the measurement, so
    /// rotate it onto the equator first.
    fn informative_probe(n: usize) -> DickeState {
        crate::algebra::rotate(&bw_state(n).unwrap(), [1.0, 0.0, 0.0], std::f64::consts::FRAC_PI_2)
            .unwrap()
    }

    #[test]
    fn sigma_shrinks_over_the_run() {
        let state = informative_probe(12);
        let res = run_protocol(&state, 200, 0.0, 7).unwrap();
        assert!(res.sigma_curve.iter().all(|(_, s)| *s > 0.0));
        let first = res.sigma_curve.first().unwrap().1;
        let last = res.sigma_curve.last().unwrap().1;
        assert!(last < first);
    }

    #[test]
    fn posterior_concentrates_on_the_true_phase() {
        // mean → phi_true within 3σ for at least 95% of 100 seeds, and the
        // median σ(M) is non-increasing
        let n = 20;
        let state = informative_probe(n);
        let m_max = 1000;
        let mut within = 0;
        let mut all_sigmas: Vec<Vec<f64>> = Vec::new();
        for seed in 0..100u64 {
            let res = run_protocol(&state, m_max, 0.0, seed).unwrap();
            let (_, sigma) = *res.sigma_curve.last().unwrap();
            let mean = final_mean(&state, m_max, seed);
            if mean.abs() <= 3.0 * sigma {
                within += 1;
            }
            all_sigmas.push(res.sigma_curve.iter().map(|(_, s)| *s).collect());
        }
        assert!(within >= 95, "only {within}/100 seeds within 3σ");

        let n_points = all_sigmas[0].len();
        let mut medians = Vec::with_capacity(n_points);
        for k in 0..n_points {
            let mut col: Vec<f64> = all_sigmas.iter().map(|s| s[k]).collect();
            col.sort_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(col[col.len() / 2]);
        }
        for w in medians.windows(2) {
            assert!(
                w[1] <= w[0] * 1.02,
                "median sigma increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    fn final_mean(state: &DickeState, m_max: u64, seed: u64) -> f64 {
        // replicate the protocol loop, returning the posterior mean
        let info = qfim(state).unwrap();
        let g = info.optimal_generator();
        let axis = [g[0], g[1], g[2]];
        let pulsed = rotate(state, axis, std::f64::consts::FRAC_PI_2).unwrap();
        let table = LikelihoodTable::build(&pulsed, axis).unwrap();
        let p_true = table.distribution_at(0.0);
        let cdf: Vec<f64> = p_true
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut posterior = PhasePosterior::flat(INITIAL_GRID).unwrap();
        posterior.restrict_window(std::f64::consts::FRAC_PI_2).unwrap();
        let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();
        let mut counts: HashMap<usize, u64> = HashMap::new();
        for m_count in 1..=m_max {
            let u: f64 = rng.gen();
            let outcome = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
            *counts.entry(outcome).or_insert(0) += 1;
            rows.entry(outcome)
                .or_insert_with(|| table.row(outcome, posterior.grid()));
            posterior.update(rows.get(&outcome).unwrap()).unwrap();
            let sigma = posterior.sigma();
            if sigma < 10.0 * posterior.spacing() && posterior.grid().len() < MAX_GRID {
                posterior =
                    replay_posterior(&table, &counts, posterior.grid().len() * 4, m_count)
                        .unwrap();
                rows.clear();
            }
        }
        posterior.mean()
    }
}
