//! Second-order formulas, the Berry-Esseen bound and the dissipation coefficient.

use libm::erfc;

use crate::error::{DistillError, Result};
use crate::moments::MomentSummary;

/// Upper end of the known range for the non-identical Berry-Esseen constant.
pub const BERRY_ESSEEN_CONSTANT: f64 = 0.4748;
/// Lower end of the same range; informational only.
pub const BERRY_ESSEEN_CONSTANT_LOWER: f64 = 0.4097;
/// `|x|` at or below this is treated as the comparable-free-energy regime.
pub const REGIME_THRESHOLD: f64 = 6.0;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn poly(coeffs: &[f64; 8], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
}

const CENTRAL_NUM: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const CENTRAL_DEN: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const NEAR_NUM: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const NEAR_DEN: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const FAR_NUM: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const FAR_DEN: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// Inverse of the standard normal distribution function.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(DistillError::Domain(format!("normal quantile needs p in (0, 1), got {p}")));
    }
    let q = p - 0.5;
    let mut x = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * poly(&CENTRAL_NUM, r) / poly(&CENTRAL_DEN, r)
    } else {
        let tail = if q < 0.0 { p } else { 1.0 - p };
        let mut r = (-tail.ln()).sqrt();
        let v = if r <= 5.0 {
            r -= 1.6;
            poly(&NEAR_NUM, r) / poly(&NEAR_DEN, r)
        } else {
            r -= 5.0;
            poly(&FAR_NUM, r) / poly(&FAR_DEN, r)
        };
        if q < 0.0 {
            -v
        } else {
            v
        }
    };
    let density = std_normal_pdf(x);
    if density > 0.0 {
        x -= (std_normal_cdf(x) - p) / density;
    }
    Ok(x)
}

fn require_fluctuations(m: &MomentSummary) -> Result<f64> {
    let s = m.beta_sigma();
    if s > 0.0 {
        Ok(s)
    } else {
        Err(DistillError::ZeroFluctuation("free energy fluctuations vanish".into()))
    }
}

/// Limiting error `Phi(-Delta F / sigma)`.
pub fn epsilon_asymptotic(m: &MomentSummary) -> Result<f64> {
    if m.beta_sigma() > 0.0 {
        return Ok(std_normal_cdf(-m.x()));
    }
    if m.beta_delta_free_energy > 0.0 {
        Ok(0.0)
    } else if m.beta_delta_free_energy < 0.0 {
        Ok(1.0)
    } else {
        Err(DistillError::ZeroFluctuation("Delta F = 0 with no fluctuations leaves the limit undefined".into()))
    }
}

/// Single-shot upper bound on the optimal error, valid for every `N`.
pub fn epsilon_berry_esseen_bound(m: &MomentSummary) -> Result<f64> {
    let s = require_fluctuations(m)?;
    if !m.beta3_skewness.is_finite() {
        return Err(DistillError::Domain("skewness must be finite".into()));
    }
    let bound = std_normal_cdf(-m.x()) + BERRY_ESSEEN_CONSTANT * m.beta3_skewness / s.powi(3);
    Ok(bound.clamp(0.0, 1.0))
}

/// `a(eps) = -Phi^{-1}(eps)(1 - eps) + phi(Phi^{-1}(eps))`.
pub fn dissipation_coefficient(eps: f64) -> Result<f64> {
    let z = std_normal_quantile(eps)?;
    Ok(-z * (1.0 - eps) + std_normal_pdf(z))
}

/// `a(eps) sigma`, in energy units.
pub fn dissipation_asymptotic(m: &MomentSummary, eps: f64) -> Result<f64> {
    let s = require_fluctuations(m)?;
    Ok(dissipation_coefficient(eps)? * s / m.beta)
}

/// Dissipation written directly in terms of the free-energy gap and fluctuations.
pub fn dissipation_from_gap(delta_free_energy: f64, sigma: f64) -> f64 {
    let x = delta_free_energy / sigma;
    (1.0 - std_normal_cdf(-x)) * delta_free_energy + sigma * std_normal_pdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    TargetMuchLower,
    TargetMuchHigher,
    Comparable,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::TargetMuchLower => "target-much-lower",
            Regime::TargetMuchHigher => "target-much-higher",
            Regime::Comparable => "comparable",
        }
    }
}

pub fn classify_regime(m: &MomentSummary, _subsystems: u64) -> Regime {
    let x = m.x();
    if x.is_nan() || x.abs() <= REGIME_THRESHOLD {
        Regime::Comparable
    } else if x > 0.0 {
        Regime::TargetMuchLower
    } else {
        Regime::TargetMuchHigher
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticReport {
    pub x: f64,
    pub epsilon_asymptotic: f64,
    pub epsilon_upper_bound: f64,
    /// In energy units.
    pub dissipation_asymptotic: f64,
    pub regime: Regime,
    /// Set when the dissipation formula is applied outside identical copies.
    pub conjectured: bool,
}

pub fn asymptotic_report(m: &MomentSummary, identical_copies: bool) -> Result<AsymptoticReport> {
    let s = require_fluctuations(m)?;
    let eps = epsilon_asymptotic(m)?;
    Ok(AsymptoticReport {
        x: m.x(),
        epsilon_asymptotic: eps,
        epsilon_upper_bound: epsilon_berry_esseen_bound(m)?,
        dissipation_asymptotic: dissipation_from_gap(m.beta_delta_free_energy, s) / m.beta,
        regime: classify_regime(m, m.subsystems),
        conjectured: !identical_copies,
    })
}
