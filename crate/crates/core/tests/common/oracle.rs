//! Brute-force reference computations on explicitly materialised embeddings.
//!
//! Nothing here goes through the atom engine: the embedded vector is built
//! entry by entry from rational Gibbs weights and summed directly.

#![allow(dead_code)]

/// A two-level subsystem with Gibbs weights `ground / denom` and `1 - ground / denom`.
#[derive(Debug, Clone, Copy)]
pub struct RationalQubit {
    pub populations: [f64; 2],
    pub ground: u64,
    pub denom: u64,
}

impl RationalQubit {
    pub fn gibbs(&self) -> [f64; 2] {
        let g = self.ground as f64 / self.denom as f64;
        [g, 1.0 - g]
    }
}

fn kahan(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Every embedded entry of the product state, unsorted.
pub fn embedded_vector(systems: &[RationalQubit]) -> Vec<f64> {
    let mut out = vec![1.0f64];
    for s in systems {
        let boxes = [s.ground, s.denom - s.ground];
        let mut local = Vec::with_capacity(s.denom as usize);
        for level in 0..2 {
            for _ in 0..boxes[level] {
                local.push(s.populations[level] / boxes[level] as f64);
            }
        }
        let mut next = Vec::with_capacity(out.len() * local.len());
        for &x in &out {
            for &y in &local {
                next.push(x * y);
            }
        }
        out = next;
    }
    out
}

pub fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Sum of the `count` largest entries of an already sorted vector.
pub fn top_sum(sorted: &[f64], count: usize) -> f64 {
    kahan(sorted.iter().take(count).copied())
}

/// Number of entries at least `threshold`.
pub fn chi(sorted: &[f64], threshold: f64) -> usize {
    sorted.iter().take_while(|&&x| x >= threshold).count()
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Optimal error and dissipated free energy (times beta) for distilling a
/// sharp target of Gibbs weight `target_boxes / target_denom`, evaluated on the
/// joint vector `P ⊗ uniform(target_denom)` with a top block of
/// `D * target_boxes` entries.
pub fn distillation(sorted: &[f64], target_boxes: u64, target_denom: u64) -> (f64, f64) {
    let dim = sorted.len() as u64;
    let block = dim * target_boxes;
    let full = (block / target_denom) as usize;
    let part = block % target_denom;
    let dt = target_denom as f64;

    let straddle = sorted.get(full).copied().unwrap_or(0.0);
    let eps = kahan(
        sorted
            .iter()
            .skip(full + 1)
            .copied()
            .chain(std::iter::once((target_denom - part) as f64 / dt * straddle)),
    )
    .clamp(0.0, 1.0);
    let keep = 1.0 - eps;

    let mut tail = vec![-((target_denom - part) as f64) * xlogx(straddle / dt)];
    tail.extend(sorted.iter().skip(full + 1).map(|&v| -dt * xlogx(v / dt)));
    let h_tail = if full < sorted.len() { kahan(tail.into_iter()) } else { 0.0 };
    let h_top = if keep > 0.0 { -keep * (keep / block as f64).ln() } else { 0.0 };
    let h_final = h_top + h_tail;
    let h_initial = -kahan(sorted.iter().map(|&v| xlogx(v)));
    (eps, h_final - h_initial - dt.ln())
}

/// Entropy, variance and third absolute central moment of `-ln x` under `x`.
pub fn surprisal_moments(v: &[f64]) -> (f64, f64, f64) {
    let h = -kahan(v.iter().map(|&x| xlogx(x)));
    let var = kahan(v.iter().filter(|&&x| x > 0.0).map(|&x| x * (-x.ln() - h).powi(2)));
    let third = kahan(v.iter().filter(|&&x| x > 0.0).map(|&x| x * (-x.ln() - h).abs().powi(3)));
    (h, var, third)
}

/// `sum_i q_i r_i` fidelity `(sum sqrt(q r))^2`, written out for the oracle.
pub fn fidelity(q: &[f64], r: &[f64]) -> f64 {
    kahan(q.iter().zip(r).map(|(a, b)| (a * b).sqrt())).powi(2)
}

/// Applies a random mixture of permutations to `p`.
pub fn bistochastic_mix(p: &[f64], perms: &[Vec<usize>], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    for (perm, &w) in perms.iter().zip(weights) {
        for (i, &j) in perm.iter().enumerate() {
            out[i] += w * p[j];
        }
    }
    out
}
