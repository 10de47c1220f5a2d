use distill_core::applications::{hypothesis_testing_expansion, hypothesis_testing_from_atoms, Encoding, Erasure, WorkExtraction};
use distill_core::asymptotics::{
    dissipation_asymptotic, dissipation_coefficient, epsilon_asymptotic, epsilon_berry_esseen_bound, std_normal_cdf,
};
use distill_core::atoms::{build_atoms_with, BuildOptions};
use distill_core::majorisation::{final_state_at, max_config_log_gibbs};
use distill_core::moments::ensemble_content;
use distill_core::pure::{exact_dissipation_pure, hyperplane, mc_hyperplane_probability, PureProblem, DEFAULT_SEED};
use distill_core::{DistillError, Ensemble, TargetSpec};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Task};
use crate::output::{Column, Table};

pub struct RunSettings {
    pub seed: Option<u64>,
    pub atom_budget: Option<usize>,
}

fn build_options(config: &ExperimentConfig, settings: &RunSettings) -> BuildOptions {
    let mut options = BuildOptions::default();
    if let Some(budget) = settings.atom_budget.or(config.atom_budget) {
        options.atom_budget = budget;
    }
    options
}

fn or_nan(r: distill_core::Result<f64>) -> f64 {
    r.unwrap_or(f64::NAN)
}

fn collect_rows(
    grid: &[f64],
    row: impl Fn(f64) -> distill_core::Result<Vec<f64>> + Sync,
) -> distill_core::Result<Vec<Vec<f64>>> {
    grid.par_iter().map(|&v| row(v)).collect()
}

pub fn run(config: &ExperimentConfig, ensemble: &Ensemble, settings: &RunSettings) -> distill_core::Result<Table> {
    let grid = config.grid().map_err(|e| DistillError::Domain(e.to_string()))?;
    let options = build_options(config, settings);
    match config.task {
        Task::Distill => distill(config, ensemble, &grid, &options),
        Task::Work if config.output.quality => work_quality(ensemble, &grid, &options),
        Task::Work => work(ensemble, &grid, &options),
        Task::Erasure => erasure(ensemble, &grid, &options),
        Task::Encode => encode(ensemble, &grid, &options),
        Task::Dh => dh(ensemble, &grid, &options),
        Task::PureDistill => pure_distill(config, ensemble, &grid),
        Task::McValidate => mc_validate(config, ensemble, &grid, settings.seed.or(config.seed).unwrap_or(DEFAULT_SEED)),
    }
}

fn distill(config: &ExperimentConfig, e: &Ensemble, grid: &[f64], options: &BuildOptions) -> distill_core::Result<Table> {
    let atoms = build_atoms_with(e, options)?;
    let content = ensemble_content(e)?;
    let top = max_config_log_gibbs(e);
    let by_x = config.sweep.variable == "x";
    if by_x && !(content.beta_sigma() > 0.0) {
        return Err(DistillError::ZeroFluctuation("x sweep needs a fluctuating input".into()));
    }
    let rows = collect_rows(grid, |v| {
        let log_abscissa = if by_x { -content.beta_free_energy + v * content.beta_sigma() } else { v };
        let m = content.with_log_abscissa(log_abscissa);
        let fs = final_state_at(&atoms, log_abscissa, content.beta, top);
        Ok(vec![
            v,
            log_abscissa,
            fs.epsilon,
            or_nan(epsilon_asymptotic(&m)),
            or_nan(epsilon_berry_esseen_bound(&m)),
            fs.dissipated,
            fs.dissipated_leading,
            or_nan(dissipation_asymptotic(&m, fs.epsilon)),
        ])
    })?;
    Ok(Table::new(
        vec![
            Column::plain(if by_x { "x" } else { "log_gibbs_weight" }),
            Column::scaled("log_abscissa"),
            Column::plain("epsilon_exact"),
            Column::plain("epsilon_asymptotic"),
            Column::plain("epsilon_bound"),
            Column::scaled("F_diss"),
            Column::scaled("F_diss_leading"),
            Column::scaled("F_diss_asymptotic"),
        ],
        rows,
    ))
}

fn work(e: &Ensemble, grid: &[f64], options: &BuildOptions) -> distill_core::Result<Table> {
    let we = WorkExtraction::new(e, options)?;
    let free_energy = we.content().free_energy();
    let sigma = we.content().sigma();
    let rows = collect_rows(grid, |eps| {
        Ok(vec![eps, we.work_for_error(eps), or_nan(we.work_for_error_asymptotic(eps)), free_energy, sigma])
    })?;
    Ok(Table::new(
        vec![
            Column::plain("epsilon"),
            Column::scaled("W_exact"),
            Column::scaled("W_asymptotic"),
            Column::scaled("F"),
            Column::scaled("sigmaF"),
        ],
        rows,
    ))
}

fn work_quality(e: &Ensemble, grid: &[f64], options: &BuildOptions) -> distill_core::Result<Table> {
    let we = WorkExtraction::new(e, options)?;
    let free_energy = we.content().free_energy();
    let rows = collect_rows(grid, |eps| {
        let r = we.evaluate(we.work_for_error(eps))?;
        Ok(vec![eps, r.fbat_final, r.fbat_target, free_energy])
    })?;
    Ok(Table::new(
        vec![
            Column::plain("epsilon"),
            Column::scaled("Fbat_final"),
            Column::scaled("Fbat_target"),
            Column::scaled("F"),
        ],
        rows,
    ))
}

fn erasure(e: &Ensemble, grid: &[f64], options: &BuildOptions) -> distill_core::Result<Table> {
    let er = Erasure::new(e, options)?;
    let rows = collect_rows(grid, |eps| {
        let r = er.evaluate(eps)?;
        Ok(vec![
            eps,
            r.work_cost,
            r.work_cost_exact,
            r.work_cost_asymptotic.unwrap_or(f64::NAN),
            r.entropy,
            r.sigma,
        ])
    })?;
    Ok(Table::new(
        vec![
            Column::plain("epsilon"),
            Column::scaled("W_cost"),
            Column::scaled("W_exact"),
            Column::scaled("W_asymptotic"),
            Column::scaled("S"),
            Column::scaled("sigma"),
        ],
        rows,
    ))
}

fn encode(e: &Ensemble, grid: &[f64], options: &BuildOptions) -> distill_core::Result<Table> {
    let enc = Encoding::new(e, options)?;
    let rows = collect_rows(grid, |eps| {
        let r = enc.evaluate(eps)?;
        Ok(vec![
            eps,
            r.log_messages_exact,
            r.log_messages_asymptotic,
            r.rate_exact,
            r.rate_asymptotic,
            if r.experimental { 1.0 } else { 0.0 },
        ])
    })?;
    Ok(Table::new(
        vec![
            Column::plain("epsilon"),
            Column::scaled("log_M_exact"),
            Column::scaled("log_M_asymptotic"),
            Column::scaled("rate_exact"),
            Column::scaled("rate_asymptotic"),
            Column::plain("experimental"),
        ],
        rows,
    ))
}

fn dh(e: &Ensemble, grid: &[f64], options: &BuildOptions) -> distill_core::Result<Table> {
    if e.has_pure_groups() {
        return Err(DistillError::Unsupported("hypothesis testing needs incoherent groups".into()));
    }
    let atoms = build_atoms_with(e, options)?;
    let content = ensemble_content(e)?;
    let rows = collect_rows(grid, |eps| {
        Ok(vec![
            eps,
            hypothesis_testing_from_atoms(&atoms, eps)?,
            or_nan(hypothesis_testing_expansion(&content, eps)),
        ])
    })?;
    Ok(Table::new(
        vec![Column::plain("epsilon"), Column::scaled("D_H_exact"), Column::scaled("D_H_expansion")],
        rows,
    ))
}

fn pure_problem(config: &ExperimentConfig, e: &Ensemble, copies: u64) -> distill_core::Result<PureProblem> {
    let group = &e.groups()[0];
    let target = TargetSpec::new(config.target.log_gibbs_weight.unwrap_or(0.0))?;
    let base = PureProblem::new(group.subsystem.spectrum.clone(), group.subsystem.populations().to_vec(), copies, target)?;
    match (config.target.x, config.target.battery_gap) {
        (Some(x), _) => {
            let m = base.moments()?;
            if !(m.beta_sigma() > 0.0) {
                return Err(DistillError::ZeroFluctuation("eigenstate input has no energy fluctuations".into()));
            }
            let shift = base.target.log_gibbs_weight() + m.beta_free_energy - x * m.beta_sigma();
            Ok(base.with_ancilla_gap(shift / m.beta))
        }
        (None, Some(gap)) => Ok(base.with_ancilla_gap(gap)),
        (None, None) => Ok(base),
    }
}

fn pure_distill(config: &ExperimentConfig, e: &Ensemble, grid: &[f64]) -> distill_core::Result<Table> {
    let rows = collect_rows(grid, |copies| {
        let prob = pure_problem(config, e, copies as u64)?;
        let m = prob.moments()?;
        let d = exact_dissipation_pure(&prob)?;
        let eps = d.dephased.epsilon;
        Ok(vec![
            copies,
            m.x(),
            eps,
            std_normal_cdf(-m.x()),
            d.dephased.dissipated_leading,
            or_nan(dissipation_coefficient(eps)) * m.sigma(),
            d.dephasing_entropy,
        ])
    })?;
    Ok(Table::new(
        vec![
            Column::plain("copies"),
            Column::plain("x"),
            Column::plain("epsilon_exact"),
            Column::plain("epsilon_asymptotic"),
            Column::scaled("F_diss"),
            Column::scaled("F_diss_bound"),
            Column::scaled("dephasing_entropy"),
        ],
        rows,
    ))
}

fn mc_validate(config: &ExperimentConfig, e: &Ensemble, grid: &[f64], seed: u64) -> distill_core::Result<Table> {
    let samples = config.mc.as_ref().map_or(100_000, |m| m.samples);
    let rows = grid
        .iter()
        .map(|&copies| {
            let prob = pure_problem(config, e, copies as u64)?;
            let geometry = hyperplane(&prob)?;
            let (estimate, stderr) = mc_hyperplane_probability(&prob, samples, seed)?;
            Ok(vec![
                copies,
                geometry.signed_distance,
                estimate,
                stderr,
                std_normal_cdf(geometry.signed_distance),
                if geometry.is_positive_semidefinite() { 1.0 } else { 0.0 },
            ])
        })
        .collect::<distill_core::Result<Vec<_>>>()?;
    Ok(Table::new(
        vec![
            Column::plain("copies"),
            Column::plain("x"),
            Column::plain("success_mc"),
            Column::plain("stderr"),
            Column::plain("success_asymptotic"),
            Column::plain("covariance_psd"),
        ],
        rows,
    ))
}
