//! Log-space helpers and compensated accumulation.

use libm::lgamma as ln_gamma;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<NeumaierSum>().total()
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let acc: NeumaierSum = values.iter().map(|v| (v - max).exp()).collect();
    max + acc.total().ln()
}

/// `ln(1 - e^x)` for `x <= 0`.
pub fn log1m_exp(x: f64) -> f64 {
    if x >= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(e^a - e^b)` for `a >= b`.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + log1m_exp(b - a)
}

/// Natural log of the multinomial coefficient `(sum k)! / prod k_i!`.
pub fn ln_multinomial(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let mut acc = NeumaierSum::new();
    acc.add(ln_factorial(total));
    for &k in counts {
        acc.add(-ln_factorial(k));
    }
    acc.total()
}

pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else if n < 171 {
        (2..=n).map(|i| i as f64).product::<f64>().ln()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Number of occupation vectors of `total` items over `levels` boxes.
pub fn composition_count(total: u64, levels: usize) -> f64 {
    if levels == 0 {
        return 0.0;
    }
    ln_multinomial(&[total, levels as u64 - 1]).exp().round()
}

/// Every `k` with `k.len() == levels` and `sum k == total`, in lexicographically
/// decreasing order of the leading entries.
pub fn compositions(total: u64, levels: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    if levels == 0 {
        return out;
    }
    let mut current = vec![0u64; levels];
    fill_compositions(total, 0, &mut current, &mut out);
    out
}

fn fill_compositions(remaining: u64, idx: usize, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if idx + 1 == current.len() {
        current[idx] = remaining;
        out.push(current.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        current[idx] = k;
        fill_compositions(remaining - k, idx + 1, current, out);
    }
}
