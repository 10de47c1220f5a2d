//! Majorisation predicates, optimal distillation error and the optimal final state.

use crate::atoms::{build_atoms_with, BuildOptions, LorenzSplit, OrderedAtoms};
use crate::error::{domain, DistillError, Result};
use crate::model::{check_probability_vector, Ensemble, TargetSpec};
use crate::moments::{ensemble_content, MomentSummary};
use crate::numerics::compensated_sum;

const PREFIX_TOL: f64 = 1e-12;
const GENERAL_TARGET_MAX_DIM: usize = 1000;

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn prefix_sums(v: &[f64]) -> Vec<f64> {
    let mut acc = crate::numerics::NeumaierSum::new();
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push(0.0);
    for &x in v {
        acc.add(x);
        out.push(acc.total());
    }
    out
}

/// `true` when every sorted prefix sum of `p` dominates that of `q`.
pub fn majorizes(p: &[f64], q: &[f64]) -> bool {
    let n = p.len().max(q.len());
    let mut ps = sorted_desc(p);
    let mut qs = sorted_desc(q);
    ps.resize(n, 0.0);
    qs.resize(n, 0.0);
    let pp = prefix_sums(&ps);
    let qp = prefix_sums(&qs);
    pp.iter().zip(&qp).all(|(a, b)| *a >= *b - PREFIX_TOL)
}

/// Sum of the `exp(log_l)` largest entries of `p`, interpolating the last one.
pub fn top_sum(p: &[f64], log_l: f64) -> f64 {
    let s = sorted_desc(p);
    let l = log_l.exp();
    let whole = l.floor();
    let mut acc = crate::numerics::NeumaierSum::new();
    for (i, &x) in s.iter().enumerate() {
        if (i as f64) < whole {
            acc.add(x);
        } else if (i as f64) == whole {
            acc.add((l - whole) * x);
            break;
        } else {
            break;
        }
    }
    acc.total().min(1.0)
}

/// Least infidelity to a flat target of entropy `log_l` reachable from `p`.
pub fn min_epsilon_flat_target(p: &[f64], log_l: f64) -> f64 {
    (1.0 - top_sum(p, log_l)).clamp(0.0, 1.0)
}

/// Squared-root fidelity `(sum sqrt(q r))^2`.
pub fn fidelity(q: &[f64], r: &[f64]) -> f64 {
    compensated_sum(q.iter().zip(r).map(|(a, b)| (a * b).sqrt())).powi(2)
}

fn is_flat(q: &[f64]) -> Option<usize> {
    let support: Vec<f64> = q.iter().copied().filter(|&x| x > 0.0).collect();
    let first = *support.first()?;
    support
        .iter()
        .all(|&x| (x - first).abs() <= 1e-12 * first)
        .then_some(support.len())
}

/// Largest fidelity to `q` over all `r` majorised by `p`, and a maximiser.
pub fn max_fidelity_majorized(p: &[f64], q: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_probability_vector(p, "initial distribution")?;
    check_probability_vector(q, "target distribution")?;
    let n = p.len().max(q.len());
    if n > GENERAL_TARGET_MAX_DIM {
        return Err(DistillError::Unsupported(format!(
            "general targets are limited to {GENERAL_TARGET_MAX_DIM} levels"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let q_pad: Vec<f64> = (0..n).map(|i| q.get(i).copied().unwrap_or(0.0)).collect();
    order.sort_by(|&a, &b| q_pad[b].total_cmp(&q_pad[a]));
    let qs: Vec<f64> = order.iter().map(|&i| q_pad[i]).collect();
    let mut ps = sorted_desc(p);
    ps.resize(n, 0.0);

    let sorted_r = block_optimum(&ps, &qs).filter(|r| majorizes(&ps, r)).unwrap_or_else(|| frank_wolfe(&ps, &qs));
    let mut r = vec![0.0; n];
    for (slot, &i) in order.iter().enumerate() {
        r[i] = sorted_r[slot];
    }
    Ok((fidelity(&q_pad, &r), r))
}

/// Optimum when prefix constraints bind at block boundaries and the
/// allocation is proportional to `q` inside each block.
fn block_optimum(ps: &[f64], qs: &[f64]) -> Option<Vec<f64>> {
    let n = ps.len();
    let pp = prefix_sums(ps);
    let qp = prefix_sums(qs);
    let feasible = |a: usize, b: usize| -> bool {
        let mass = pp[b] - pp[a];
        let weight = qp[b] - qp[a];
        (a + 1..b).all(|k| {
            let filled = if weight > 0.0 {
                mass * (qp[k] - qp[a]) / weight
            } else {
                mass * (k - a) as f64 / (b - a) as f64
            };
            pp[a] + filled <= pp[k] + PREFIX_TOL
        })
    };
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut from = vec![usize::MAX; n + 1];
    best[0] = 0.0;
    for b in 1..=n {
        for a in 0..b {
            if best[a] == f64::NEG_INFINITY || !feasible(a, b) {
                continue;
            }
            let value = best[a] + ((pp[b] - pp[a]).max(0.0) * (qp[b] - qp[a]).max(0.0)).sqrt();
            if value > best[b] {
                best[b] = value;
                from[b] = a;
            }
        }
    }
    if best[n] == f64::NEG_INFINITY {
        return None;
    }
    let mut r = vec![0.0; n];
    let mut b = n;
    while b > 0 {
        let a = from[b];
        let mass = pp[b] - pp[a];
        let weight = qp[b] - qp[a];
        for i in a..b {
            r[i] = if weight > 0.0 {
                mass * qs[i] / weight
            } else {
                mass / (b - a) as f64
            };
        }
        b = a;
    }
    Some(r)
}

/// Conditional-gradient ascent over the permutohedron of `ps`.
fn frank_wolfe(ps: &[f64], qs: &[f64]) -> Vec<f64> {
    let n = ps.len();
    let mut r = vec![1.0 / n as f64; n];
    let mut idx: Vec<usize> = (0..n).collect();
    for iter in 0..20_000 {
        let grad: Vec<f64> = (0..n)
            .map(|i| if qs[i] > 0.0 { (qs[i] / r[i].max(1e-300)).sqrt() } else { 0.0 })
            .collect();
        idx.sort_by(|&a, &b| grad[b].total_cmp(&grad[a]));
        let mut vertex = vec![0.0; n];
        for (rank, &i) in idx.iter().enumerate() {
            vertex[i] = ps[rank];
        }
        let step = 2.0 / (iter as f64 + 2.0);
        for i in 0..n {
            r[i] += step * (vertex[i] - r[i]);
        }
    }
    r
}

/// `true` when some `r` majorised by `p` lies within infidelity `eps` of `q`.
pub fn epsilon_post_majorizes(p: &[f64], q: &[f64], eps: f64) -> Result<bool> {
    if eps >= 1.0 {
        return Ok(true);
    }
    check_probability_vector(p, "initial distribution")?;
    check_probability_vector(q, "target distribution")?;
    if let Some(support) = is_flat(q) {
        let min_eps = min_epsilon_flat_target(p, (support as f64).ln());
        return Ok(min_eps <= eps + PREFIX_TOL);
    }
    let (f, _) = max_fidelity_majorized(p, q)?;
    Ok(1.0 - f <= eps + 1e-9)
}

/// Distillation of an ensemble into a sharp target, optionally consuming a
/// sharp ancilla whose initial log Gibbs weight is `ancilla_log_gibbs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillationProblem {
    pub ensemble: Ensemble,
    pub target: TargetSpec,
    pub ancilla_log_gibbs: f64,
}

impl DistillationProblem {
    pub fn new(ensemble: Ensemble, target: TargetSpec) -> Self {
        Self {
            ensemble,
            target,
            ancilla_log_gibbs: 0.0,
        }
    }

    pub fn with_ancilla(mut self, ancilla_log_gibbs: f64) -> Result<Self> {
        if !(ancilla_log_gibbs <= 0.0) {
            return domain("ancilla log gibbs weight must be <= 0");
        }
        self.ancilla_log_gibbs = ancilla_log_gibbs;
        Ok(self)
    }

    /// Gibbs-mass abscissa of the Lorenz curve that fixes the optimal error.
    pub fn log_abscissa(&self) -> f64 {
        self.target.log_gibbs_weight() - self.ancilla_log_gibbs
    }

    pub fn moments(&self) -> Result<MomentSummary> {
        Ok(ensemble_content(&self.ensemble)?.with_log_abscissa(self.log_abscissa()))
    }

    pub fn atoms(&self, options: &BuildOptions) -> Result<OrderedAtoms> {
        build_atoms_with(&self.ensemble, options)
    }
}

pub fn exact_error(prob: &DistillationProblem) -> Result<f64> {
    let atoms = prob.atoms(&BuildOptions::default())?;
    Ok(error_at(&atoms, prob.log_abscissa()))
}

/// Optimal error read off prebuilt atoms.
pub fn error_at(atoms: &OrderedAtoms, log_abscissa: f64) -> f64 {
    atoms.split_at_gibbs(log_abscissa).rest.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalStateSummary {
    pub epsilon: f64,
    /// Log of the size of the uniform top block.
    pub log_k: f64,
    /// Entropy of the embedded final state.
    pub entropy_final: f64,
    /// Dissipated free energy, in energy units.
    pub dissipated: f64,
    /// As `dissipated` without the bounded `-(1-eps) ln(1-eps)` mixing term.
    pub dissipated_leading: f64,
    /// Upper estimate of the entropy gained by making every embedding box uniform.
    pub uniformisation_correction: f64,
    pub beta: f64,
}

pub fn optimal_final_state_profile(prob: &DistillationProblem) -> Result<FinalStateSummary> {
    let atoms = prob.atoms(&BuildOptions::default())?;
    Ok(final_state_at(&atoms, prob.log_abscissa(), prob.ensemble.beta(), max_config_log_gibbs(&prob.ensemble)))
}

/// Largest Gibbs weight of a single product configuration.
pub fn max_config_log_gibbs(e: &Ensemble) -> f64 {
    compensated_sum(e.groups().iter().map(|g| {
        let top = g.subsystem.spectrum.log_gibbs_weights().into_iter().fold(f64::NEG_INFINITY, f64::max);
        g.count as f64 * top
    }))
}

fn mixing_term(eps: f64) -> f64 {
    let keep = 1.0 - eps;
    if keep > 0.0 {
        -keep * keep.ln()
    } else {
        0.0
    }
}

/// Final-state accounting at a given Lorenz abscissa.
pub fn final_state_at(atoms: &OrderedAtoms, log_abscissa: f64, beta: f64, max_config_log_gibbs: f64) -> FinalStateSummary {
    let split = atoms.split_at_gibbs(log_abscissa);
    let eps = split.rest.clamp(0.0, 1.0);
    let keep = 1.0 - eps;
    let log_dim = atoms.log_dim();
    let top_ratio = atoms.top_weighted_ratio(&split);
    let tail_ratio = atoms.relative_entropy() - top_ratio;
    let abscissa_term = if keep > 0.0 { keep * log_abscissa } else { 0.0 };

    let leading = abscissa_term + top_ratio;
    let entropy_final = mixing_term(eps) + 2.0 * log_dim + abscissa_term - tail_ratio;

    FinalStateSummary {
        epsilon: eps,
        log_k: 2.0 * log_dim + log_abscissa,
        entropy_final,
        dissipated: (mixing_term(eps) + leading) / beta,
        dissipated_leading: leading / beta,
        uniformisation_correction: uniformisation_correction(atoms, &split, max_config_log_gibbs),
        beta,
    }
}

/// Dissipation recomputed from the final-state entropy and the initial free energy.
pub fn dissipated_from_entropy(summary: &FinalStateSummary, log_dim: f64, beta_free_energy: f64) -> f64 {
    let entropy_initial = log_dim - beta_free_energy;
    (summary.entropy_final - entropy_initial - log_dim) / summary.beta
}

fn uniformisation_correction(atoms: &OrderedAtoms, split: &LorenzSplit, max_config_log_gibbs: f64) -> f64 {
    if split.index >= atoms.len() {
        return 0.0;
    }
    let log_box = 2.0 * atoms.log_dim() + max_config_log_gibbs;
    if log_box <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for a in &atoms.atoms()[split.index..] {
        let box_mass = (a.log_ratio + max_config_log_gibbs).min(a.log_prob).exp();
        total += box_mass * log_box;
    }
    total
}
