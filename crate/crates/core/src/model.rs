//! Spectra, local states, ensembles and distillation targets.

use crate::error::{domain, DistillError, Result};
use crate::numerics::log_sum_exp;

const NORMALISATION_TOL: f64 = 1e-12;

/// Energy levels of one subsystem at a fixed inverse temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    energies: Vec<f64>,
    beta: f64,
    incommensurable: bool,
}

impl Spectrum {
    pub fn new(energies: Vec<f64>, beta: f64) -> Result<Self> {
        if energies.is_empty() {
            return domain("spectrum needs at least one level");
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return domain("energies must be finite");
        }
        if !(beta.is_finite() && beta > 0.0) {
            return domain(format!("inverse temperature must be positive and finite, got {beta}"));
        }
        Ok(Self {
            energies,
            beta,
            incommensurable: false,
        })
    }

    /// Spectrum whose Gibbs state is `weights`, with the ground level at zero.
    pub fn from_gibbs_weights(weights: &[f64], beta: f64) -> Result<Self> {
        check_probability_vector(weights, "gibbs weights")?;
        if weights.iter().any(|&w| w <= 0.0) {
            return domain("gibbs weights must be strictly positive");
        }
        let top = weights.iter().copied().fold(f64::MIN, f64::max);
        let energies = weights.iter().map(|w| (top.ln() - w.ln()) / beta).collect();
        Self::new(energies, beta)
    }

    /// Marks the spectrum as having rationally independent level spacings.
    pub fn with_incommensurable(mut self, flag: bool) -> Self {
        self.incommensurable = flag;
        self
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn is_flagged_incommensurable(&self) -> bool {
        self.incommensurable
    }

    pub fn is_trivial(&self) -> bool {
        let e0 = self.energies[0];
        self.energies.iter().all(|&e| e == e0)
    }

    pub fn log_partition(&self) -> f64 {
        let scaled: Vec<f64> = self.energies.iter().map(|e| -self.beta * e).collect();
        log_sum_exp(&scaled)
    }

    pub fn log_gibbs_weights(&self) -> Vec<f64> {
        let log_z = self.log_partition();
        self.energies.iter().map(|e| -self.beta * e - log_z).collect()
    }
}

/// Normalised Gibbs distribution of a spectrum.
pub fn gibbs_weights(spectrum: &Spectrum) -> Vec<f64> {
    spectrum.log_gibbs_weights().into_iter().map(f64::exp).collect()
}

pub(crate) fn check_probability_vector(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return domain(format!("{what}: empty vector"));
    }
    if let Some(bad) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return domain(format!("{what}: entry {bad} is not a nonnegative number"));
    }
    let total: f64 = crate::numerics::compensated_sum(p.iter().copied());
    if (total - 1.0).abs() > NORMALISATION_TOL {
        return domain(format!("{what}: entries sum to {total}, expected 1"));
    }
    Ok(())
}

/// A state diagonal in the energy eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct IncoherentState {
    populations: Vec<f64>,
}

impl IncoherentState {
    pub fn new(populations: Vec<f64>) -> Result<Self> {
        check_probability_vector(&populations, "populations")?;
        Ok(Self { populations })
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }
}

/// A pure state, described by squared amplitudes in the energy eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    populations: Vec<f64>,
    phases: Option<Vec<f64>>,
}

impl PureState {
    pub fn new(populations: Vec<f64>) -> Result<Self> {
        check_probability_vector(&populations, "amplitudes squared")?;
        Ok(Self {
            populations,
            phases: None,
        })
    }

    pub fn with_phases(mut self, phases: Vec<f64>) -> Result<Self> {
        if phases.len() != self.populations.len() {
            return domain("phase vector length must match the populations");
        }
        self.phases = Some(phases);
        Ok(self)
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn phases(&self) -> Option<&[f64]> {
        self.phases.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalState {
    Incoherent(IncoherentState),
    Pure(PureState),
}

impl LocalState {
    pub fn populations(&self) -> &[f64] {
        match self {
            LocalState::Incoherent(s) => s.populations(),
            LocalState::Pure(s) => s.populations(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, LocalState::Pure(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    pub spectrum: Spectrum,
    pub state: LocalState,
}

impl Subsystem {
    pub fn new(spectrum: Spectrum, state: LocalState) -> Result<Self> {
        if spectrum.dim() != state.populations().len() {
            return domain(format!(
                "state has {} entries but the spectrum has {} levels",
                state.populations().len(),
                spectrum.dim()
            ));
        }
        Ok(Self { spectrum, state })
    }

    pub fn incoherent(spectrum: Spectrum, populations: Vec<f64>) -> Result<Self> {
        Self::new(spectrum, LocalState::Incoherent(IncoherentState::new(populations)?))
    }

    pub fn pure(spectrum: Spectrum, populations: Vec<f64>) -> Result<Self> {
        Self::new(spectrum, LocalState::Pure(PureState::new(populations)?))
    }

    pub fn populations(&self) -> &[f64] {
        self.state.populations()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub subsystem: Subsystem,
    pub count: u64,
}

/// Product of identical-copy groups sharing one bath temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    groups: Vec<Group>,
    beta: f64,
}

impl Ensemble {
    pub fn new(groups: Vec<Group>) -> Result<Self> {
        if groups.is_empty() {
            return domain("ensemble has no groups");
        }
        if let Some(idx) = groups.iter().position(|g| g.count == 0) {
            return domain(format!("group {idx} has zero copies"));
        }
        let beta = groups[0].subsystem.spectrum.beta();
        for (idx, g) in groups.iter().enumerate().skip(1) {
            let b = g.subsystem.spectrum.beta();
            if (b - beta).abs() > 1e-12 * beta.abs().max(1.0) {
                return Err(DistillError::MixedBeta {
                    first: 0,
                    second: idx,
                    beta_first: beta,
                    beta_second: b,
                });
            }
        }
        Ok(Self { groups, beta })
    }

    pub fn identical(subsystem: Subsystem, count: u64) -> Result<Self> {
        Self::new(vec![Group { subsystem, count }])
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn total_subsystems(&self) -> u64 {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn concat(&self, other: &Ensemble) -> Result<Ensemble> {
        let mut groups = self.groups.clone();
        groups.extend(other.groups.iter().cloned());
        Ensemble::new(groups)
    }

    /// Same ensemble with every group's count replaced.
    pub fn with_counts(&self, counts: &[u64]) -> Result<Ensemble> {
        if counts.len() != self.groups.len() {
            return domain("one count per group required");
        }
        let groups = self
            .groups
            .iter()
            .zip(counts)
            .map(|(g, &count)| Group {
                subsystem: g.subsystem.clone(),
                count,
            })
            .collect();
        Ensemble::new(groups)
    }

    pub fn has_pure_groups(&self) -> bool {
        self.groups.iter().any(|g| g.subsystem.state.is_pure())
    }
}

/// Sharp energy eigenstate of a target Hamiltonian, stored as its log Gibbs weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    log_gibbs_weight: f64,
}

impl TargetSpec {
    pub fn new(log_gibbs_weight: f64) -> Result<Self> {
        if log_gibbs_weight.is_nan() || log_gibbs_weight > 1e-12 {
            return domain(format!(
                "target log gibbs weight must be <= 0, got {log_gibbs_weight}"
            ));
        }
        Ok(Self {
            log_gibbs_weight: log_gibbs_weight.min(0.0),
        })
    }

    pub fn from_hamiltonian(energies: &[f64], beta: f64, level: usize) -> Result<Self> {
        let spectrum = Spectrum::new(energies.to_vec(), beta)?;
        let logs = spectrum.log_gibbs_weights();
        match logs.get(level) {
            Some(&w) => Self::new(w),
            None => domain(format!(
                "target level {level} out of range for {} levels",
                energies.len()
            )),
        }
    }

    /// One of `messages` degenerate levels of a trivial Hamiltonian.
    pub fn degenerate(messages: f64) -> Result<Self> {
        if !(messages >= 1.0) {
            return domain("need at least one degenerate level");
        }
        Self::new(-messages.ln())
    }

    pub fn log_gibbs_weight(&self) -> f64 {
        self.log_gibbs_weight
    }
}
