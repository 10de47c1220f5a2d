//! Relative-entropic moments and their ensemble aggregates.

use crate::error::{domain, DistillError, Result};
use crate::model::{check_probability_vector, Ensemble, LocalState, Spectrum, Subsystem, TargetSpec};
use crate::numerics::NeumaierSum;

fn log_ratios(p: &[f64], g: &[f64]) -> Result<Vec<(f64, f64)>> {
    if p.len() != g.len() {
        return domain(format!("length mismatch: {} vs {}", p.len(), g.len()));
    }
    let mut out = Vec::with_capacity(p.len());
    for (&pi, &gi) in p.iter().zip(g) {
        if pi > 0.0 {
            if !(gi > 0.0) {
                return domain("support of the state is not contained in the support of the reference");
            }
            out.push((pi, pi.ln() - gi.ln()));
        }
    }
    Ok(out)
}

/// Mean, variance and third absolute central moment of `values` under the weights.
fn central_moments(weighted: &[(f64, f64)]) -> (f64, f64, f64) {
    let mean = weighted.iter().map(|&(w, v)| w * v).collect::<NeumaierSum>().total();
    let var = weighted
        .iter()
        .map(|&(w, v)| w * (v - mean).powi(2))
        .collect::<NeumaierSum>()
        .total();
    let third = weighted
        .iter()
        .map(|&(w, v)| w * (v - mean).abs().powi(3))
        .collect::<NeumaierSum>()
        .total();
    (mean, var, third)
}

pub fn rel_entropy(p: &[f64], g: &[f64]) -> Result<f64> {
    Ok(central_moments(&log_ratios(p, g)?).0)
}

pub fn rel_entropy_variance(p: &[f64], g: &[f64]) -> Result<f64> {
    Ok(central_moments(&log_ratios(p, g)?).1)
}

pub fn rel_entropy_skewness(p: &[f64], g: &[f64]) -> Result<f64> {
    Ok(central_moments(&log_ratios(p, g)?).2)
}

/// `(D, V, Y)` of one subsystem relative to its Gibbs state.
///
/// For a pure state the entropy vanishes, so the log-likelihood variable is
/// `-ln gamma_i` sampled with the squared amplitudes.
pub fn local_moments(subsystem: &Subsystem) -> Result<(f64, f64, f64)> {
    let log_gamma = subsystem.spectrum.log_gibbs_weights();
    let p = subsystem.populations();
    match &subsystem.state {
        LocalState::Incoherent(_) => {
            let gamma: Vec<f64> = log_gamma.iter().map(|l| l.exp()).collect();
            Ok(central_moments(&log_ratios(p, &gamma)?))
        }
        LocalState::Pure(_) => {
            let weighted: Vec<(f64, f64)> = p
                .iter()
                .zip(&log_gamma)
                .filter(|(pi, _)| **pi > 0.0)
                .map(|(&pi, &lg)| (pi, -lg))
                .collect();
            Ok(central_moments(&weighted))
        }
    }
}

/// Free energy content of an ensemble and its fluctuations, relative to a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub beta: f64,
    pub subsystems: u64,
    /// `beta F`
    pub beta_free_energy: f64,
    /// `beta^2 sigma^2`
    pub beta2_variance: f64,
    /// `beta^3 kappa^3`
    pub beta3_skewness: f64,
    /// `beta Delta F`
    pub beta_delta_free_energy: f64,
}

impl MomentSummary {
    pub fn free_energy(&self) -> f64 {
        self.beta_free_energy / self.beta
    }

    pub fn beta_sigma(&self) -> f64 {
        self.beta2_variance.max(0.0).sqrt()
    }

    pub fn sigma(&self) -> f64 {
        self.beta_sigma() / self.beta
    }

    pub fn beta_kappa(&self) -> f64 {
        self.beta3_skewness.max(0.0).cbrt()
    }

    pub fn kappa(&self) -> f64 {
        self.beta_kappa() / self.beta
    }

    pub fn delta_free_energy(&self) -> f64 {
        self.beta_delta_free_energy / self.beta
    }

    /// `Delta F / sigma`, infinite when there are no fluctuations.
    pub fn x(&self) -> f64 {
        let s = self.beta_sigma();
        if s > 0.0 {
            self.beta_delta_free_energy / s
        } else if self.beta_delta_free_energy > 0.0 {
            f64::INFINITY
        } else if self.beta_delta_free_energy < 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::NAN
        }
    }

    /// Same content, with `beta Delta F` shifted by `beta_shift`.
    pub fn shifted(&self, beta_shift: f64) -> Self {
        Self {
            beta_delta_free_energy: self.beta_delta_free_energy + beta_shift,
            ..*self
        }
    }

    /// Same content, measured against a different target log Gibbs weight.
    pub fn with_log_abscissa(&self, log_abscissa: f64) -> Self {
        Self {
            beta_delta_free_energy: self.beta_free_energy + log_abscissa,
            ..*self
        }
    }
}

/// Sums of local moments without reference to a target.
pub fn ensemble_content(e: &Ensemble) -> Result<MomentSummary> {
    let mut d = NeumaierSum::new();
    let mut v = NeumaierSum::new();
    let mut y = NeumaierSum::new();
    for g in e.groups() {
        let (dl, vl, yl) = local_moments(&g.subsystem)?;
        let c = g.count as f64;
        d.add(c * dl);
        v.add(c * vl);
        y.add(c * yl);
    }
    let beta_free_energy = d.total();
    Ok(MomentSummary {
        beta: e.beta(),
        subsystems: e.total_subsystems(),
        beta_free_energy,
        beta2_variance: v.total().max(0.0),
        beta3_skewness: y.total().max(0.0),
        beta_delta_free_energy: beta_free_energy,
    })
}

pub fn ensemble_moments(e: &Ensemble, t: &TargetSpec) -> Result<MomentSummary> {
    Ok(ensemble_content(e)?.with_log_abscissa(t.log_gibbs_weight()))
}

/// Returns `V(gamma_T' || gamma_T)` and the heat-capacity prediction for it.
pub fn thermal_variance_heat_capacity_check(energies: &[f64], temperature: f64, temperature_prime: f64) -> Result<(f64, f64)> {
    if !(temperature > 0.0 && temperature_prime > 0.0) {
        return Err(DistillError::Domain("temperatures must be positive".into()));
    }
    let at = |t: f64| -> Result<Vec<f64>> { Ok(crate::model::gibbs_weights(&Spectrum::new(energies.to_vec(), 1.0 / t)?)) };
    let gamma = at(temperature)?;
    let gamma_prime = at(temperature_prime)?;
    check_probability_vector(&gamma_prime, "gibbs weights")?;
    let variance = rel_entropy_variance(&gamma_prime, &gamma)?;

    let mean_energy = |t: f64| -> Result<f64> {
        let w = at(t)?;
        Ok(w.iter().zip(energies).map(|(p, e)| p * e).collect::<NeumaierSum>().total())
    };
    let h = temperature_prime * 1e-5;
    let heat_capacity = (mean_energy(temperature_prime + h)? - mean_energy(temperature_prime - h)?) / (2.0 * h);
    let predicted = (1.0 - temperature_prime / temperature).powi(2) * heat_capacity;
    Ok((variance, predicted))
}
