//! Work extraction, erasure, thermodynamically-free encoding and
//! hypothesis-testing relative entropy.

use crate::asymptotics::{epsilon_asymptotic, std_normal_quantile};
use crate::atoms::{build_atoms_with, BuildOptions, OrderedAtoms};
use crate::error::{domain, DistillError, Result};
use crate::majorisation::{error_at, final_state_at, max_config_log_gibbs, FinalStateSummary};
use crate::model::{Ensemble, LocalState};
use crate::moments::{ensemble_content, MomentSummary};
use crate::numerics::{compensated_sum, log_add_exp};
use crate::pure::{exact_dissipation_pure, exact_error_pure, PureProblem};

/// `ln(1 + e^{-beta W})`, the log partition function of a `{0, W}` battery.
fn battery_log_partition(beta: f64, work: f64) -> f64 {
    log_add_exp(0.0, -beta * work)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkExtractionResult {
    pub work: f64,
    pub epsilon_exact: f64,
    pub epsilon_asymptotic: f64,
    /// Free energy of the final state actually produced.
    pub fbat_final: f64,
    /// Free energy of the excited battery the process aims for.
    pub fbat_target: f64,
}

/// `F + sigma Phi^{-1}(eps)`.
pub fn work_asymptotic(free_energy: f64, sigma: f64, eps: f64) -> Result<f64> {
    Ok(free_energy + sigma * std_normal_quantile(eps)?)
}

/// `S / beta - sigma Phi^{-1}(eps)`.
pub fn erasure_asymptotic(entropy_over_beta: f64, sigma: f64, eps: f64) -> Result<f64> {
    Ok(entropy_over_beta - sigma * std_normal_quantile(eps)?)
}

/// Atoms and moments of one ensemble, reused across a work or error sweep.
#[derive(Debug, Clone)]
pub struct WorkExtraction {
    atoms: OrderedAtoms,
    content: MomentSummary,
    max_config_log_gibbs: f64,
}

impl WorkExtraction {
    pub fn new(e: &Ensemble, options: &BuildOptions) -> Result<Self> {
        Ok(Self {
            atoms: build_atoms_with(e, options)?,
            content: ensemble_content(e)?,
            max_config_log_gibbs: max_config_log_gibbs(e),
        })
    }

    pub fn content(&self) -> &MomentSummary {
        &self.content
    }

    pub fn atoms(&self) -> &OrderedAtoms {
        &self.atoms
    }

    fn beta(&self) -> f64 {
        self.content.beta
    }

    pub fn final_state(&self, work: f64) -> FinalStateSummary {
        final_state_at(&self.atoms, -self.beta() * work, self.beta(), self.max_config_log_gibbs)
    }

    pub fn evaluate(&self, work: f64) -> Result<WorkExtractionResult> {
        if !work.is_finite() {
            return domain("work must be finite");
        }
        let beta = self.beta();
        let log_abscissa = -beta * work;
        let log_norm = battery_log_partition(beta, work);
        let fs = self.final_state(work);
        Ok(WorkExtractionResult {
            work,
            epsilon_exact: error_at(&self.atoms, log_abscissa),
            epsilon_asymptotic: epsilon_asymptotic(&self.content.with_log_abscissa(log_abscissa))?,
            fbat_final: (self.content.beta_free_energy + log_norm) / beta - fs.dissipated,
            fbat_target: work + log_norm / beta,
        })
    }

    /// Largest work whose optimal error does not exceed `eps`.
    pub fn work_for_error(&self, eps: f64) -> f64 {
        -self.atoms.log_abscissa_for_error(eps) / self.beta()
    }

    pub fn work_for_error_asymptotic(&self, eps: f64) -> Result<f64> {
        work_asymptotic(self.content.free_energy(), self.content.sigma(), eps)
    }
}

pub fn work_extraction_error(e: &Ensemble, work: f64) -> Result<WorkExtractionResult> {
    WorkExtraction::new(e, &BuildOptions::default())?.evaluate(work)
}

/// Work extraction from identical pure copies with battery gap `work`.
pub fn work_extraction_pure(prob: &PureProblem, work: f64) -> Result<WorkExtractionResult> {
    if prob.target.log_gibbs_weight() != 0.0 {
        return domain("pure work extraction leaves the system thermal; use a trivial target");
    }
    let prob = prob.clone().with_ancilla_gap(work);
    let beta = prob.beta();
    let m = prob.moments()?;
    let dissipation = exact_dissipation_pure(&prob)?;
    let log_norm = battery_log_partition(beta, work);
    let dephased_content = m.beta_free_energy - dissipation.dephasing_entropy;
    Ok(WorkExtractionResult {
        work,
        epsilon_exact: exact_error_pure(&prob)?,
        epsilon_asymptotic: epsilon_asymptotic(&m)?,
        fbat_final: (dephased_content + log_norm) / beta - dissipation.dephased.dissipated,
        fbat_target: work + log_norm / beta,
    })
}

/// `N(<H> + ln Z / beta) + sigma Phi^{-1}(eps)`.
pub fn work_for_error_pure(prob: &PureProblem, eps: f64) -> Result<f64> {
    let m = prob.clone().with_ancilla_gap(0.0).moments()?;
    if !(m.beta_sigma() > 0.0) {
        return Err(DistillError::ZeroFluctuation("eigenstate input has no energy fluctuations".into()));
    }
    work_asymptotic(m.free_energy(), m.sigma(), eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErasureResult {
    pub epsilon: f64,
    /// Reported cost: the closed form for maximally mixed inputs, the
    /// second-order formula otherwise.
    pub work_cost: f64,
    pub work_cost_exact: f64,
    pub work_cost_asymptotic: Option<f64>,
    pub entropy: f64,
    pub sigma: f64,
}

fn check_trivial(e: &Ensemble) -> Result<()> {
    for (idx, g) in e.groups().iter().enumerate() {
        if !g.subsystem.spectrum.is_trivial() {
            return domain(format!(
                "group {idx} has a nontrivial Hamiltonian; use the general distillation API"
            ));
        }
        if matches!(g.subsystem.state, LocalState::Pure(_)) {
            return domain(format!("group {idx} is pure; erasure takes incoherent states"));
        }
    }
    Ok(())
}

fn shannon_entropy(p: &[f64]) -> f64 {
    compensated_sum(p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()))
}

/// Atoms and entropy of an erasure input, reused across an error sweep.
#[derive(Debug, Clone)]
pub struct Erasure {
    atoms: OrderedAtoms,
    content: MomentSummary,
    entropy: f64,
    log_dim: f64,
    maximally_mixed: bool,
}

impl Erasure {
    pub fn new(e: &Ensemble, options: &BuildOptions) -> Result<Self> {
        check_trivial(e)?;
        let atoms = build_atoms_with(e, options)?;
        let entropy = compensated_sum(
            e.groups()
                .iter()
                .map(|g| g.count as f64 * shannon_entropy(g.subsystem.populations())),
        );
        let log_dim = compensated_sum(
            e.groups()
                .iter()
                .map(|g| g.count as f64 * (g.subsystem.spectrum.dim() as f64).ln()),
        );
        let maximally_mixed = e.groups().iter().all(|g| {
            let d = g.subsystem.spectrum.dim() as f64;
            g.subsystem.populations().iter().all(|&x| (x - 1.0 / d).abs() < 1e-12)
        });
        Ok(Self {
            atoms,
            content: ensemble_content(e)?,
            entropy,
            log_dim,
            maximally_mixed,
        })
    }

    /// Least battery gap that resets the input to the ground state within `eps`.
    pub fn exact_cost(&self, eps: f64) -> f64 {
        (self.atoms.log_abscissa_for_error(eps) + self.log_dim) / self.content.beta
    }

    pub fn evaluate(&self, eps: f64) -> Result<ErasureResult> {
        if !(0.0..1.0).contains(&eps) {
            return domain(format!("erasure error must lie in [0, 1), got {eps}"));
        }
        let beta = self.content.beta;
        let sigma = self.content.sigma();
        let exact = self.exact_cost(eps);
        let asymptotic = if sigma > 0.0 && eps > 0.0 {
            Some(erasure_asymptotic(self.entropy / beta, sigma, eps)?)
        } else {
            None
        };
        let work_cost = if self.maximally_mixed {
            (self.log_dim + (1.0 - eps).ln()) / beta
        } else {
            asymptotic.unwrap_or(exact)
        };
        Ok(ErasureResult {
            epsilon: eps,
            work_cost,
            work_cost_exact: exact,
            work_cost_asymptotic: asymptotic,
            entropy: self.entropy,
            sigma,
        })
    }
}

pub fn erasure_cost(e: &Ensemble, eps: f64) -> Result<ErasureResult> {
    Erasure::new(e, &BuildOptions::default())?.evaluate(eps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodingResult {
    pub epsilon_d: f64,
    /// Log of the floored message count from the second-order formula.
    pub log_messages_asymptotic: f64,
    /// Log of the largest message count whose optimal error stays within `epsilon_d`.
    pub log_messages_exact: f64,
    pub rate_asymptotic: f64,
    pub rate_exact: f64,
    /// Set for non-identical ensembles, where optimality is not established.
    pub experimental: bool,
}

/// `ln floor(e^x)`, clamped to at least one message; identity once the floor
/// is below floating-point resolution.
fn log_floor(log_m: f64) -> f64 {
    if log_m <= 0.0 {
        0.0
    } else if log_m < 36.0 {
        log_m.exp().floor().max(1.0).ln()
    } else {
        log_m
    }
}

#[derive(Debug, Clone)]
pub struct Encoding {
    atoms: OrderedAtoms,
    content: MomentSummary,
    experimental: bool,
}

impl Encoding {
    pub fn new(e: &Ensemble, options: &BuildOptions) -> Result<Self> {
        Ok(Self {
            atoms: build_atoms_with(e, options)?,
            content: ensemble_content(e)?,
            experimental: e.groups().len() > 1,
        })
    }

    /// Optimal error of distilling one of `exp(log_messages)` degenerate levels.
    pub fn error_for_messages(&self, log_messages: f64) -> f64 {
        error_at(&self.atoms, -log_messages)
    }

    pub fn evaluate(&self, eps_d: f64) -> Result<EncodingResult> {
        if !(eps_d > 0.0 && eps_d < 1.0) {
            return domain(format!("decoding error must lie in (0, 1), got {eps_d}"));
        }
        let n = self.content.subsystems as f64;
        let spread = self.content.beta_sigma();
        let raw = if spread > 0.0 {
            self.content.beta_free_energy + spread * std_normal_quantile(eps_d)?
        } else {
            self.content.beta_free_energy
        };
        let log_messages_asymptotic = log_floor(raw);
        let log_messages_exact = log_floor(-self.atoms.log_abscissa_for_error(eps_d));
        Ok(EncodingResult {
            epsilon_d: eps_d,
            log_messages_asymptotic,
            log_messages_exact,
            rate_asymptotic: log_messages_asymptotic / n,
            rate_exact: log_messages_exact / n,
            experimental: self.experimental,
        })
    }
}

pub fn encoding_capacity(e: &Ensemble, eps_d: f64) -> Result<EncodingResult> {
    Encoding::new(e, &BuildOptions::default())?.evaluate(eps_d)
}

/// `-ln` of the least Gibbs mass of a test accepting `p` with probability at least `1 - eps`.
pub fn hypothesis_testing_rel_entropy(p: &[f64], g: &[f64], eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return domain(format!("type-I error must lie in [0, 1), got {eps}"));
    }
    if p.len() != g.len() {
        return domain("length mismatch");
    }
    crate::model::check_probability_vector(p, "state")?;
    crate::model::check_probability_vector(g, "reference")?;
    let mut order: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    order.sort_by(|&a, &b| (p[b] / g[b]).total_cmp(&(p[a] / g[a])));
    let need = 1.0 - eps;
    let mut covered = 0.0;
    let mut cost = crate::numerics::NeumaierSum::new();
    for &i in &order {
        let take = ((need - covered) / p[i]).clamp(0.0, 1.0);
        if take <= 0.0 {
            break;
        }
        cost.add(take * g[i]);
        covered += take * p[i];
    }
    Ok(-cost.total().ln())
}

/// The same quantity for the product state represented by `atoms`.
pub fn hypothesis_testing_from_atoms(atoms: &OrderedAtoms, eps: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eps) {
        return domain(format!("type-I error must lie in [0, 1), got {eps}"));
    }
    Ok(-atoms.log_abscissa_for_error(eps))
}

/// `N D + sqrt(N V) Phi^{-1}(eps)`.
pub fn hypothesis_testing_expansion(m: &MomentSummary, eps: f64) -> Result<f64> {
    Ok(m.beta_free_energy + m.beta_sigma() * std_normal_quantile(eps)?)
}
