//! Identical pure-state copies: dephasing into type classes, exact and
//! asymptotic distillation error, and Monte Carlo validation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::asymptotics::{dissipation_coefficient, std_normal_cdf};
use crate::atoms::{build_atoms_with, BuildOptions, OrderedAtoms};
use crate::error::{domain, DistillError, Result};
use crate::majorisation::{error_at, final_state_at, max_config_log_gibbs, FinalStateSummary};
use crate::model::{Ensemble, Group, PureState, Spectrum, Subsystem, TargetSpec};
use crate::moments::{ensemble_content, MomentSummary};
use crate::numerics::{compositions, ln_multinomial, log_sum_exp, NeumaierSum};

pub const DEFAULT_SEED: u64 = 0xC0FFEE;
const MC_CHUNK: u64 = 4096;
const RATIONAL_DENOMINATOR_MAX: i64 = 64;
const RATIONAL_TOL: f64 = 1e-9;

/// `true` when the spectrum is flagged incommensurable and no two level
/// spacings have a ratio close to a small rational.
pub fn is_incommensurable(spectrum: &Spectrum) -> bool {
    spectrum.is_flagged_incommensurable() && !has_small_rational_gap_ratio(spectrum.energies())
}

fn has_small_rational_gap_ratio(energies: &[f64]) -> bool {
    let e0 = energies[0];
    let gaps: Vec<f64> = energies[1..].iter().map(|e| e - e0).collect();
    let scale = energies.iter().fold(0.0f64, |m, e| m.max(e.abs())).max(1.0);
    if gaps.iter().any(|g| g.abs() <= RATIONAL_TOL * scale) {
        return true;
    }
    for i in 0..gaps.len() {
        for j in i + 1..gaps.len() {
            let ratio = gaps[i] / gaps[j];
            for den in 1..=RATIONAL_DENOMINATOR_MAX {
                let num = (ratio * den as f64).round();
                if (ratio - num / den as f64).abs() < RATIONAL_TOL {
                    return true;
                }
            }
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeClass {
    pub occupation: Vec<u64>,
    /// Multinomial probability of the occupation vector.
    pub log_prob: f64,
    /// Gibbs weight of one product configuration with this occupation.
    pub log_gibbs_single: f64,
    /// Log multinomial coefficient: number of product configurations.
    pub log_shell: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeClassDistribution {
    pub classes: Vec<TypeClass>,
}

impl TypeClassDistribution {
    pub fn total_log_prob(&self) -> f64 {
        log_sum_exp(&self.classes.iter().map(|c| c.log_prob).collect::<Vec<_>>())
    }

    /// Gibbs mass of every configuration covered by the classes.
    pub fn total_log_gibbs(&self) -> f64 {
        log_sum_exp(&self.classes.iter().map(|c| c.log_shell + c.log_gibbs_single).collect::<Vec<_>>())
    }

    /// Shannon entropy of the occupation distribution.
    pub fn entropy(&self) -> f64 {
        self.classes
            .iter()
            .map(|c| -c.log_prob.exp() * c.log_prob)
            .collect::<NeumaierSum>()
            .total()
    }
}

/// Type-class distribution of `copies` copies of a pure state after dephasing.
pub fn dephase_to_types(spectrum: &Spectrum, psi: &PureState, copies: u64) -> Result<TypeClassDistribution> {
    if !is_incommensurable(spectrum) {
        return Err(DistillError::Commensurable);
    }
    let p = psi.populations();
    if p.len() != spectrum.dim() {
        return domain("state and spectrum dimensions differ");
    }
    let log_gamma = spectrum.log_gibbs_weights();
    let classes = compositions(copies, p.len())
        .into_iter()
        .filter(|k| k.iter().zip(p).all(|(&ki, &pi)| ki == 0 || pi > 0.0))
        .map(|k| {
            let log_shell = ln_multinomial(&k);
            let mut lp = NeumaierSum::new();
            let mut lg = NeumaierSum::new();
            for (i, &ki) in k.iter().enumerate() {
                if ki > 0 {
                    lp.add(ki as f64 * p[i].ln());
                    lg.add(ki as f64 * log_gamma[i]);
                }
            }
            TypeClass {
                occupation: k,
                log_prob: log_shell + lp.total(),
                log_gibbs_single: lg.total(),
                log_shell,
            }
        })
        .collect();
    Ok(TypeClassDistribution { classes })
}

/// Distillation from identical pure copies, with an optional battery whose
/// gap is paid from the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureProblem {
    pub spectrum: Spectrum,
    pub state: PureState,
    pub copies: u64,
    pub target: TargetSpec,
    pub ancilla_gap: f64,
}

impl PureProblem {
    pub fn new(spectrum: Spectrum, populations: Vec<f64>, copies: u64, target: TargetSpec) -> Result<Self> {
        if copies == 0 {
            return domain("need at least one copy");
        }
        let state = PureState::new(populations)?;
        if state.populations().len() != spectrum.dim() {
            return domain("state and spectrum dimensions differ");
        }
        Ok(Self {
            spectrum,
            state,
            copies,
            target,
            ancilla_gap: 0.0,
        })
    }

    pub fn with_ancilla_gap(mut self, gap: f64) -> Self {
        self.ancilla_gap = gap;
        self
    }

    pub fn with_copies(&self, copies: u64) -> Self {
        Self { copies, ..self.clone() }
    }

    pub fn ensemble(&self) -> Result<Ensemble> {
        let subsystem = Subsystem::new(self.spectrum.clone(), crate::model::LocalState::Pure(self.state.clone()))?;
        Ensemble::new(vec![Group {
            subsystem,
            count: self.copies,
        }])
    }

    pub fn beta(&self) -> f64 {
        self.spectrum.beta()
    }

    pub fn log_abscissa(&self) -> f64 {
        self.target.log_gibbs_weight() - self.beta() * self.ancilla_gap
    }

    pub fn moments(&self) -> Result<MomentSummary> {
        Ok(ensemble_content(&self.ensemble()?)?.with_log_abscissa(self.log_abscissa()))
    }

    fn checked_atoms(&self, options: &BuildOptions) -> Result<OrderedAtoms> {
        if !is_incommensurable(&self.spectrum) {
            return Err(DistillError::Commensurable);
        }
        build_atoms_with(&self.ensemble()?, options)
    }
}

pub fn exact_error_pure(prob: &PureProblem) -> Result<f64> {
    let atoms = prob.checked_atoms(&BuildOptions::default())?;
    Ok(error_at(&atoms, prob.log_abscissa()))
}

/// Covariance of the occupation vector and the hyperplane it is tested against.
#[derive(Debug, Clone)]
pub struct HyperplaneGeometry {
    pub covariance: DMatrix<f64>,
    pub energies: DVector<f64>,
    /// Standard deviation of the energy shift `(k - N p) . E`.
    pub sigma: f64,
    pub signed_distance: f64,
    pub min_eigenvalue: f64,
    /// Largest entry of `covariance * 1`.
    pub null_residual: f64,
}

impl HyperplaneGeometry {
    pub fn new(p: &[f64], energies: &[f64], copies: u64, delta_free_energy: f64) -> Self {
        let d = p.len();
        let n = copies as f64;
        let pv = DVector::from_column_slice(p);
        let covariance = (DMatrix::from_diagonal(&pv) - &pv * pv.transpose()) * n;
        let energies = DVector::from_column_slice(energies);
        let sigma = energies.dot(&(&covariance * &energies)).max(0.0).sqrt();
        let eig = SymmetricEigen::new(covariance.clone());
        let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let null_residual = (&covariance * DVector::from_element(d, 1.0)).amax();
        Self {
            covariance,
            energies,
            sigma,
            signed_distance: delta_free_energy / sigma,
            min_eigenvalue,
            null_residual,
        }
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        let scale = self.covariance.amax().max(1.0);
        self.min_eigenvalue >= -1e-10 * scale && self.null_residual <= 1e-10 * scale
    }
}

pub fn hyperplane(prob: &PureProblem) -> Result<HyperplaneGeometry> {
    let m = prob.moments()?;
    Ok(HyperplaneGeometry::new(
        prob.state.populations(),
        prob.spectrum.energies(),
        prob.copies,
        m.delta_free_energy(),
    ))
}

/// `Phi(-Delta F / sigma)` for the pure ensemble.
pub fn asymptotic_error_pure(prob: &PureProblem) -> Result<f64> {
    let m = prob.moments()?;
    if !(m.beta_sigma() > 0.0) {
        return Err(DistillError::ZeroFluctuation("eigenstate input has no energy fluctuations".into()));
    }
    let geometry = hyperplane(prob)?;
    let x = m.x();
    if (geometry.signed_distance - x).abs() > 1e-10 * x.abs().max(1.0) {
        return Err(DistillError::Domain(format!(
            "hyperplane distance {} disagrees with Delta F / sigma = {x}",
            geometry.signed_distance
        )));
    }
    Ok(std_normal_cdf(-x))
}

/// Fraction of multinomial samples on the success side of the energy
/// hyperplane, and its binomial standard error.
///
/// Samples are drawn in fixed-size chunks, each from its own stream of the
/// seeded generator, so the estimate does not depend on the thread count.
pub fn mc_hyperplane_probability(prob: &PureProblem, samples: u64, seed: u64) -> Result<(f64, f64)> {
    if samples < 1000 {
        return domain("Monte Carlo needs at least 1000 samples");
    }
    let delta = prob.moments()?.delta_free_energy();
    let p = prob.state.populations().to_vec();
    let energies = prob.spectrum.energies().to_vec();
    let n = prob.copies;
    let chunks = samples.div_ceil(MC_CHUNK);
    let successes: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let count = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            let mut hits = 0u64;
            for _ in 0..count {
                if sample_shift(&mut rng, &p, &energies, n) >= -delta {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let estimate = successes as f64 / samples as f64;
    let stderr = (estimate * (1.0 - estimate) / samples as f64).sqrt();
    Ok((estimate, stderr))
}

/// `(k - N p) . E` for one multinomial draw, via sequential binomials.
fn sample_shift(rng: &mut ChaCha8Rng, p: &[f64], energies: &[f64], n: u64) -> f64 {
    let mut remaining = n;
    let mut mass_left = 1.0;
    let mut shift = NeumaierSum::new();
    for i in 0..p.len() {
        let k = if i + 1 == p.len() || remaining == 0 {
            remaining
        } else {
            let prob = (p[i] / mass_left).clamp(0.0, 1.0);
            Binomial::new(remaining, prob).map(|b| b.sample(rng)).unwrap_or(0)
        };
        shift.add((k as f64 - n as f64 * p[i]) * energies[i]);
        remaining -= k;
        mass_left -= p[i];
    }
    shift.total()
}

/// `a(eps) sigma`; a lower bound on the dissipated free energy.
pub fn dissipation_lower_bound_pure(prob: &PureProblem, eps: f64) -> Result<f64> {
    let m = prob.moments()?;
    if !(m.beta_sigma() > 0.0) {
        return Err(DistillError::ZeroFluctuation("eigenstate input has no energy fluctuations".into()));
    }
    Ok(dissipation_coefficient(eps)? * m.sigma())
}

/// Final-state accounting of the dephased problem together with the entropy
/// lost to dephasing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureDissipation {
    pub dephased: FinalStateSummary,
    pub dephasing_entropy: f64,
}

pub fn exact_dissipation_pure(prob: &PureProblem) -> Result<PureDissipation> {
    let atoms = prob.checked_atoms(&BuildOptions::default())?;
    let ensemble = prob.ensemble()?;
    let dephased = final_state_at(&atoms, prob.log_abscissa(), prob.beta(), max_config_log_gibbs(&ensemble));
    let types = dephase_to_types(&prob.spectrum, &prob.state, prob.copies)?;
    Ok(PureDissipation {
        dephased,
        dephasing_entropy: types.entropy(),
    })
}
