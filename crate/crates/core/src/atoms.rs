//! Compressed representation of the embedded product distribution.
//!
//! An atom is a class of embedded entries that share one value. Within a class
//! every entry equals `exp(log_ratio - log_dim)`, where `log_ratio` is the
//! likelihood ratio between the state and the Gibbs state and `log_dim` is the
//! log of the (possibly non-integer) embedding dimension. Partial sums over the
//! largest embedded entries are evaluations of the Lorenz curve of the atoms
//! ordered by slope, taken at Gibbs-mass abscissa `L / D`.

use rayon::prelude::*;

use crate::error::{DistillError, Result};
use crate::model::{Ensemble, Group, LocalState};
use crate::numerics::{compensated_sum, compositions, ln_multinomial, log_add_exp, log_sub_exp, NeumaierSum};

pub const DEFAULT_ATOM_BUDGET: usize = 50_000_000;
pub const DEFAULT_MERGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// `ln(p / gamma)` shared by every configuration in the class.
    pub log_ratio: f64,
    /// Total probability of the class.
    pub log_prob: f64,
    /// Total Gibbs mass of the class; the width of its Lorenz segment.
    pub log_gibbs: f64,
    /// Number of unembedded basis states in the class.
    pub log_count: f64,
}

impl Atom {
    const UNIT: Atom = Atom {
        log_ratio: 0.0,
        log_prob: 0.0,
        log_gibbs: 0.0,
        log_count: 0.0,
    };

    fn product(&self, other: &Atom) -> Atom {
        Atom {
            log_ratio: self.log_ratio + other.log_ratio,
            log_prob: self.log_prob + other.log_prob,
            log_gibbs: self.log_gibbs + other.log_gibbs,
            log_count: self.log_count + other.log_count,
        }
    }

    /// Log of one embedded entry's value for embedding dimension `exp(log_dim)`.
    pub fn log_entry(&self, log_dim: f64) -> f64 {
        self.log_ratio - log_dim
    }

    /// Log of the number of embedded entries in the class.
    pub fn log_entries(&self, log_dim: f64) -> f64 {
        self.log_gibbs + log_dim
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    pub atom_budget: usize,
    /// Atoms whose log-ratios differ by less than this are merged; negative disables.
    pub merge_tolerance: f64,
    /// Overrides the default `sum_n ln d_n`.
    pub log_dim: Option<f64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            atom_budget: DEFAULT_ATOM_BUDGET,
            merge_tolerance: DEFAULT_MERGE_TOLERANCE,
            log_dim: None,
        }
    }
}

/// Atoms sorted by decreasing log-ratio with cumulative sums for Lorenz queries.
#[derive(Debug, Clone)]
pub struct OrderedAtoms {
    atoms: Vec<Atom>,
    prefix_log_prob: Vec<f64>,
    prefix_log_gibbs: Vec<f64>,
    suffix_log_prob: Vec<f64>,
    prefix_weighted_ratio: Vec<f64>,
    log_dim: f64,
    subsystems: u64,
    unmerged_classes: f64,
    merges: usize,
}

/// Position of a Gibbs-mass abscissa on the Lorenz curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzSplit {
    /// Index of the partially consumed atom (`len` when past the end).
    pub index: usize,
    /// Consumed share of that atom's Gibbs mass, in `[0, 1]`.
    pub fraction: f64,
    /// Probability at or above the abscissa.
    pub top: f64,
    /// Probability below the abscissa, computed from the tail for accuracy.
    pub rest: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichCheck {
    pub lower: f64,
    pub upper: f64,
    pub log_chi: f64,
    pub log_upper_count: f64,
    /// `None` when the lemma's constant is not positive.
    pub holds: Option<bool>,
}

pub fn build_atoms(ensemble: &Ensemble) -> Result<OrderedAtoms> {
    build_atoms_with(ensemble, &BuildOptions::default())
}

pub fn build_atoms_with(ensemble: &Ensemble, options: &BuildOptions) -> Result<OrderedAtoms> {
    let mut required = 1.0f64;
    for g in ensemble.groups() {
        let support = g.subsystem.populations().iter().filter(|&&p| p > 0.0).count();
        required *= crate::numerics::composition_count(g.count, support);
    }
    let budget = options.atom_budget;
    for g in ensemble.groups() {
        let support = g.subsystem.populations().iter().filter(|&&p| p > 0.0).count();
        let n = crate::numerics::composition_count(g.count, support);
        if n > budget as f64 {
            return Err(DistillError::AtomBudget { required, budget });
        }
    }

    let per_group: Vec<Vec<Atom>> = ensemble
        .groups()
        .par_iter()
        .map(|g| group_atoms(g, options.merge_tolerance))
        .collect();

    let mut merges = 0usize;
    let mut current = vec![Atom::UNIT];
    for group in per_group {
        let size = current.len() as f64 * group.len() as f64;
        if size > budget as f64 {
            return Err(DistillError::AtomBudget { required, budget });
        }
        let mut next = Vec::with_capacity(size as usize);
        for a in &current {
            for b in &group {
                next.push(a.product(b));
            }
        }
        let (merged, count) = sort_and_merge(next, options.merge_tolerance);
        merges += count;
        current = merged;
    }

    let log_dim = options.log_dim.unwrap_or_else(|| {
        compensated_sum(
            ensemble
                .groups()
                .iter()
                .map(|g| g.count as f64 * (g.subsystem.spectrum.dim() as f64).ln()),
        )
    });
    Ok(OrderedAtoms::from_sorted(current, log_dim, ensemble.total_subsystems(), required, merges))
}

fn group_atoms(group: &Group, tolerance: f64) -> Vec<Atom> {
    let populations = group.subsystem.populations();
    let log_gamma = group.subsystem.spectrum.log_gibbs_weights();
    let energies = group.subsystem.spectrum.energies();
    let support: Vec<usize> = (0..populations.len()).filter(|&i| populations[i] > 0.0).collect();
    let log_p: Vec<f64> = support.iter().map(|&i| populations[i].ln()).collect();
    let log_g: Vec<f64> = support.iter().map(|&i| log_gamma[i]).collect();
    let pure = matches!(group.subsystem.state, LocalState::Pure(_));

    let classes = compositions(group.count, support.len());
    let mut atoms: Vec<(f64, Atom)> = classes
        .iter()
        .map(|k| {
            let log_c = ln_multinomial(k);
            let mut lp = NeumaierSum::new();
            let mut lg = NeumaierSum::new();
            let mut energy = NeumaierSum::new();
            for (j, &kj) in k.iter().enumerate() {
                if kj > 0 {
                    lp.add(kj as f64 * log_p[j]);
                    lg.add(kj as f64 * log_g[j]);
                    energy.add(kj as f64 * energies[support[j]]);
                }
            }
            let log_prob = log_c + lp.total();
            let (log_gibbs, log_count) = if pure {
                (lg.total(), 0.0)
            } else {
                (log_c + lg.total(), log_c)
            };
            let atom = Atom {
                log_ratio: log_prob - log_gibbs,
                log_prob,
                log_gibbs,
                log_count,
            };
            (energy.total(), atom)
        })
        .collect();

    if pure {
        // Degenerate total energies share one eigenspace, where the dephased
        // state has a single nonzero eigenvalue.
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let scale = energies.iter().fold(1.0f64, |m, e| m.max(e.abs())) * group.count as f64;
        let mut merged: Vec<(f64, Atom)> = Vec::with_capacity(atoms.len());
        for (e, atom) in atoms {
            match merged.last_mut() {
                Some((e0, head)) if (e - *e0).abs() <= 1e-9 * scale => {
                    head.log_prob = log_add_exp(head.log_prob, atom.log_prob);
                    head.log_ratio = head.log_prob - head.log_gibbs;
                }
                _ => merged.push((e, atom)),
            }
        }
        atoms = merged;
    }
    let (out, _) = sort_and_merge(atoms.into_iter().map(|(_, a)| a).collect(), tolerance);
    out
}

fn sort_and_merge(mut atoms: Vec<Atom>, tolerance: f64) -> (Vec<Atom>, usize) {
    atoms.par_sort_by(|a, b| b.log_ratio.total_cmp(&a.log_ratio));
    if tolerance < 0.0 {
        return (atoms, 0);
    }
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    let mut head_ratio = f64::NAN;
    let mut merges = 0;
    for atom in atoms {
        match out.last_mut() {
            Some(head) if (head_ratio - atom.log_ratio).abs() < tolerance => {
                head.log_prob = log_add_exp(head.log_prob, atom.log_prob);
                head.log_gibbs = log_add_exp(head.log_gibbs, atom.log_gibbs);
                head.log_count = log_add_exp(head.log_count, atom.log_count);
                head.log_ratio = head.log_prob - head.log_gibbs;
                merges += 1;
            }
            _ => {
                head_ratio = atom.log_ratio;
                out.push(atom);
            }
        }
    }
    (out, merges)
}

impl OrderedAtoms {
    /// Builds the cumulative tables from atoms already sorted by decreasing ratio.
    pub fn from_sorted(atoms: Vec<Atom>, log_dim: f64, subsystems: u64, unmerged_classes: f64, merges: usize) -> Self {
        let n = atoms.len();
        let mut prefix_log_prob = Vec::with_capacity(n + 1);
        let mut prefix_log_gibbs = Vec::with_capacity(n + 1);
        let mut prefix_weighted_ratio = Vec::with_capacity(n + 1);
        prefix_log_prob.push(f64::NEG_INFINITY);
        prefix_log_gibbs.push(f64::NEG_INFINITY);
        prefix_weighted_ratio.push(0.0);
        let mut lp = f64::NEG_INFINITY;
        let mut lg = f64::NEG_INFINITY;
        let mut wr = NeumaierSum::new();
        for a in &atoms {
            lp = log_add_exp(lp, a.log_prob);
            lg = log_add_exp(lg, a.log_gibbs);
            wr.add(a.log_prob.exp() * a.log_ratio);
            prefix_log_prob.push(lp);
            prefix_log_gibbs.push(lg);
            prefix_weighted_ratio.push(wr.total());
        }
        let mut suffix_log_prob = vec![f64::NEG_INFINITY; n + 1];
        for i in (0..n).rev() {
            suffix_log_prob[i] = log_add_exp(suffix_log_prob[i + 1], atoms[i].log_prob);
        }
        Self {
            atoms,
            prefix_log_prob,
            prefix_log_gibbs,
            suffix_log_prob,
            prefix_weighted_ratio,
            log_dim,
            subsystems,
            unmerged_classes,
            merges,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn log_dim(&self) -> f64 {
        self.log_dim
    }

    pub fn subsystems(&self) -> u64 {
        self.subsystems
    }

    /// Class count of the full Cartesian product before any merging.
    pub fn unmerged_classes(&self) -> f64 {
        self.unmerged_classes
    }

    pub fn merges(&self) -> usize {
        self.merges
    }

    pub fn total_log_prob(&self) -> f64 {
        self.prefix_log_prob[self.atoms.len()]
    }

    /// Gibbs mass carried by states of nonzero probability.
    pub fn total_log_gibbs(&self) -> f64 {
        self.prefix_log_gibbs[self.atoms.len()]
    }

    pub fn log_prob_before(&self, index: usize) -> f64 {
        self.prefix_log_prob[index]
    }

    pub fn log_gibbs_before(&self, index: usize) -> f64 {
        self.prefix_log_gibbs[index]
    }

    pub fn log_prob_from(&self, index: usize) -> f64 {
        self.suffix_log_prob[index]
    }

    /// `sum p ln(p / gamma)` over every atom; the relative entropy to the Gibbs state.
    pub fn relative_entropy(&self) -> f64 {
        self.prefix_weighted_ratio[self.atoms.len()]
    }

    /// Lorenz curve evaluated at Gibbs-mass abscissa `exp(log_abscissa)`.
    pub fn split_at_gibbs(&self, log_abscissa: f64) -> LorenzSplit {
        let n = self.atoms.len();
        if log_abscissa == f64::NEG_INFINITY || n == 0 {
            return LorenzSplit {
                index: 0,
                fraction: 0.0,
                top: 0.0,
                rest: self.suffix_log_prob[0].exp(),
            };
        }
        if log_abscissa >= self.prefix_log_gibbs[n] {
            return LorenzSplit {
                index: n,
                fraction: 0.0,
                top: self.prefix_log_prob[n].exp(),
                rest: 0.0,
            };
        }
        let j = self.prefix_log_gibbs[1..=n].partition_point(|&g| g < log_abscissa);
        let atom = &self.atoms[j];
        let before = self.prefix_log_gibbs[j];
        let fraction = if log_abscissa <= before {
            0.0
        } else {
            (log_sub_exp(log_abscissa, before) - atom.log_gibbs).exp().clamp(0.0, 1.0)
        };
        let p = atom.log_prob.exp();
        LorenzSplit {
            index: j,
            fraction,
            top: self.prefix_log_prob[j].exp() + fraction * p,
            rest: self.suffix_log_prob[j + 1].exp() + (1.0 - fraction) * p,
        }
    }

    /// Sum of the `exp(log_count)` largest embedded entries.
    pub fn top_mass(&self, log_count: f64) -> f64 {
        self.split_at_gibbs(log_count - self.log_dim).top.min(1.0)
    }

    /// Smallest Gibbs-mass abscissa whose Lorenz value leaves at most `epsilon` uncovered.
    pub fn log_abscissa_for_error(&self, epsilon: f64) -> f64 {
        let n = self.atoms.len();
        if n == 0 || epsilon >= self.suffix_log_prob[0].exp() {
            return f64::NEG_INFINITY;
        }
        let epsilon = epsilon.max(0.0);
        // suffix sums decrease with the index; find the first atom whose tail fits
        let j = self.suffix_log_prob[1..=n].partition_point(|&s| s.exp() > epsilon);
        let atom = &self.atoms[j];
        let tail = self.suffix_log_prob[j + 1].exp();
        let unconsumed = ((epsilon - tail) / atom.log_prob.exp()).clamp(0.0, 1.0);
        let fraction = 1.0 - unconsumed;
        if fraction <= 0.0 {
            return self.prefix_log_gibbs[j];
        }
        log_add_exp(self.prefix_log_gibbs[j], fraction.ln() + atom.log_gibbs)
    }

    /// `sum p ln(p / gamma)` over the Lorenz segment left of the abscissa.
    pub fn top_weighted_ratio(&self, split: &LorenzSplit) -> f64 {
        let mut acc = self.prefix_weighted_ratio[split.index];
        if split.index < self.atoms.len() && split.fraction > 0.0 {
            let a = &self.atoms[split.index];
            acc += split.fraction * a.log_prob.exp() * a.log_ratio;
        }
        acc
    }

    fn count_at_least(&self, log_threshold_entry: f64) -> usize {
        let cutoff = self.log_dim + log_threshold_entry;
        let slack = 1e-12 * cutoff.abs().max(1.0);
        self.atoms.partition_point(|a| a.log_ratio >= cutoff - slack)
    }

    /// Log of the number of embedded entries with value at least `exp(-log_l)`.
    pub fn chi(&self, log_l: f64) -> f64 {
        let k = self.count_at_least(-log_l);
        self.log_dim + self.prefix_log_gibbs[k]
    }

    /// Probability carried by embedded entries with value at least `exp(-log_l)`.
    pub fn mass_at_least(&self, log_l: f64) -> f64 {
        self.prefix_log_prob[self.count_at_least(-log_l)].exp()
    }

    /// Evaluates both sides of the counting-function sandwich for `alpha = exp(delta sqrt(N))`.
    pub fn chi_sandwich_check(&self, log_l: f64, delta: f64) -> Result<SandwichCheck> {
        if !(delta > 0.0) {
            return Err(DistillError::Domain("delta must be positive".into()));
        }
        let log_alpha = delta * (self.subsystems as f64).sqrt();
        let c = (0.5 * log_alpha).exp()
            * (self.mass_at_least(log_l + log_alpha) - self.mass_at_least(log_l + 0.5 * log_alpha));
        let log_chi = self.chi(log_l);
        let lower = self.top_mass(log_chi);
        if !(c > 0.0) {
            return Ok(SandwichCheck {
                lower,
                upper: 1.0,
                log_chi,
                log_upper_count: f64::INFINITY,
                holds: None,
            });
        }
        let log_upper_count = self.chi(log_l + log_alpha) - c.ln();
        let upper = self.top_mass(log_upper_count);
        let tol = 1e-12;
        let middle = self.top_mass(log_l);
        let ordered = log_chi <= log_l + tol && log_l <= log_upper_count + tol;
        let masses = lower <= middle + tol && middle <= upper + tol;
        Ok(SandwichCheck {
            lower,
            upper,
            log_chi,
            log_upper_count,
            holds: Some(ordered && masses),
        })
    }

    /// Log of the number of embedded entries in total.
    pub fn log_support_entries(&self) -> f64 {
        self.log_dim + self.total_log_gibbs()
    }
}
