//! Experiment driver: case preparation, forecast scenarios, α and β sweeps and
//! their CSV tables.

mod config;
mod synthetic;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dispatch::{solve_dispatch, DispatchProblem, DispatchSolution};
use crate::error::{Diagnosis, Error, Result};
use crate::grid::{build_dc_model, load_case, scale_for_penetration, scale_loads, GridCase};
use crate::risk::{validate, RiskReport};
use crate::scenario::{
    estimate_covariance, reserve_order_statistic, ForecastModel, ReserveVector, ScenarioSet, WindTrace,
};

pub use config::{ExperimentConfig, Scenario, SyntheticTraceConfig, TraceSource};
pub use synthetic::generate_synthetic_trace;

/// Low-wind forecast mean, MW per farm.
pub const LOW_WIND_MEAN: [f64; 7] = [1.15, 1.37, 0.47, 1.05, 1.45, 1.64, 0.00];
/// High-wind forecast mean, MW per farm.
pub const HIGH_WIND_MEAN: [f64; 7] = [6.00, 0.31, 7.66, 8.01, 8.42, 8.44, 8.46];

/// Tolerance of the monotonicity checks on sweep objectives, $/h.
pub const MONOTONE_TOL: f64 = 1e-7;

/// Multiplies each column of a normalized trace by its farm's capacity.
pub fn scale_trace(trace: &WindTrace, capacity_mw: &[f64]) -> Result<WindTrace> {
    if capacity_mw.len() != trace.n_farms() {
        return Err(Error::dimension(format!(
            "trace has {} farms, case has {}",
            trace.n_farms(),
            capacity_mw.len()
        )));
    }
    let mut out = trace.clone();
    for row in &mut out.rows {
        for (v, &cap) in row.iter_mut().zip(capacity_mw) {
            *v = v.map(|x| x * cap);
        }
    }
    Ok(out)
}

/// Forecast model with the requested mean and the trace's sample covariance.
///
/// `mean_scale` multiplies the built-in low/high-wind vectors only.
pub fn make_scenario(which: &Scenario, trace: &WindTrace, mean_scale: f64) -> Result<ForecastModel<f64>> {
    let w = trace.n_farms();
    let (history, dropped) = trace.complete_rows();
    if dropped > 0 {
        log::info!("dropped {dropped} trace rows with missing values");
    }
    if history.rows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "trace has {} complete rows; covariance needs at least 2",
            history.rows()
        )));
    }
    let covariance = estimate_covariance(&history)?;
    let mean: Vec<f64> = match which {
        Scenario::LowWind => LOW_WIND_MEAN.iter().map(|m| m * mean_scale).collect(),
        Scenario::HighWind => HIGH_WIND_MEAN.iter().map(|m| m * mean_scale).collect(),
        Scenario::TraceHour(t) => {
            let row = trace.rows.get(*t).ok_or_else(|| {
                Error::InvalidArgument(format!("trace hour {t} out of range ({} rows)", trace.rows.len()))
            })?;
            row.iter()
                .map(|c| c.ok_or_else(|| Error::InvalidArgument(format!("trace hour {t} has missing values"))))
                .collect::<Result<_>>()?
        }
        Scenario::Explicit(v) => v.clone(),
    };
    if mean.len() != w {
        return Err(Error::dimension(format!("scenario mean has {} entries for {w} farms", mean.len())));
    }
    ForecastModel::with_default_order(mean, covariance)
}

/// Everything the sweeps share: the prepared case, the forecast model and one
/// scheduling scenario set.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub case: GridCase,
    /// Trace in MW.
    pub trace: WindTrace,
    pub model: ForecastModel<f64>,
    pub scenarios: ScenarioSet<f64>,
}

/// Applies wind farm placement and penetration scaling from the config.
pub fn prepare_case(config: &ExperimentConfig) -> Result<GridCase> {
    let mut case = load_case(&config.case_path)?;
    if let Some(buses) = &config.wind_buses {
        if config.penetration.is_none() {
            return Err(Error::validation("wind_buses needs penetration to size the farms"));
        }
        // placeholder capacity, replaced by the penetration scaling below
        case = case.with_wind_farms(buses, 1.0)?;
    }
    if let Some((scale, penetration)) = config.penetration {
        case = scale_for_penetration(&case, scale, penetration)?;
    }
    if case.wind_farms.is_empty() {
        return Err(Error::validation("case has no wind farms; set wind_buses"));
    }
    Ok(case)
}

fn load_trace(config: &ExperimentConfig, case: &GridCase) -> Result<WindTrace> {
    let capacity: Vec<f64> = case.wind_farms.iter().map(|f| f.capacity_mw).collect();
    match &config.trace {
        TraceSource::File { path, normalized } => {
            let trace = WindTrace::read_csv_path(path)?;
            if *normalized {
                scale_trace(&trace, &capacity)
            } else if trace.n_farms() != capacity.len() {
                Err(Error::dimension(format!(
                    "trace has {} farms, case has {}",
                    trace.n_farms(),
                    capacity.len()
                )))
            } else {
                Ok(trace)
            }
        }
        TraceSource::Synthetic { hours, seed } => {
            let trace = generate_synthetic_trace(*hours, capacity.len(), *seed)?;
            scale_trace(&trace, &capacity)
        }
    }
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.check()?;
        let case = prepare_case(config)?;
        let trace = load_trace(config, &case)?;
        let model = make_scenario(&config.scenario, &trace, config.mean_scale)?;
        let mut scenarios = model.sample(config.samples, config.seed);
        if config.clip_to_capacity {
            let capacity: Vec<f64> = case.wind_farms.iter().map(|f| f.capacity_mw).collect();
            scenarios.clip_to_capacity(&capacity)?;
        }
        Ok(Experiment {
            config: config.clone(),
            case,
            trace,
            model,
            scenarios,
        })
    }

    pub fn reserve(&self, alpha: f64) -> Result<ReserveVector<f64>> {
        reserve_order_statistic(&self.scenarios, alpha)
    }

    /// Dispatch at risk level `alpha` with all loads scaled by `beta`.
    pub fn solve(&self, alpha: f64, beta: f64) -> Result<(ReserveVector<f64>, DispatchSolution<f64>)> {
        let reserve = self.reserve(alpha)?;
        let case = if beta == 1.0 { self.case.clone() } else { scale_loads(&self.case, beta)? };
        let model = build_dc_model(&case);
        let problem = DispatchProblem::new(case, model, reserve.clone())?;
        Ok((reserve, solve_dispatch(&problem, self.config.tol)?))
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
    }

    /// One row per distinct α in ascending order. Any infeasible α aborts.
    pub fn alpha_sweep(&self) -> Result<Vec<AlphaRow>> {
        let alphas = sorted_unique(&self.config.alpha_list);
        let rows: Vec<Result<AlphaRow>> = self.pool()?.install(|| {
            alphas
                .par_iter()
                .map(|&alpha| {
                    let (reserve, solution) = self.solve(alpha, 1.0)?;
                    let risk = validate(&solution.w, &self.model, self.config.n_trials, self.config.seed, alpha)?;
                    Ok(AlphaRow {
                        alpha,
                        reserve: reserve.z_res,
                        solution,
                        risk,
                    })
                })
                .collect()
        });
        let rows: Vec<AlphaRow> = rows.into_iter().collect::<Result<_>>()?;
        for pair in rows.windows(2) {
            if pair[1].solution.objective > pair[0].solution.objective + MONOTONE_TOL {
                return Err(Error::Invariant(format!(
                    "objective rose from {} at alpha {} to {} at alpha {}",
                    pair[0].solution.objective, pair[0].alpha, pair[1].solution.objective, pair[1].alpha
                )));
            }
        }
        Ok(rows)
    }

    /// Grid over (α, β) in ascending order of both; infeasible cells are kept.
    pub fn beta_sweep(&self) -> Result<Vec<BetaCell>> {
        let alphas = sorted_unique(&self.config.alpha_list);
        let betas = sorted_unique(&self.config.beta_list);
        let grid: Vec<(f64, f64)> = alphas
            .iter()
            .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
            .collect();
        let cells: Vec<Result<BetaCell>> = self.pool()?.install(|| {
            grid.par_iter()
                .map(|&(alpha, beta)| {
                    let outcome = match self.solve(alpha, beta) {
                        Ok((_, s)) => CellOutcome::Solved(Box::new(s)),
                        Err(Error::Infeasible(d)) => CellOutcome::Infeasible(d),
                        Err(e) => return Err(e),
                    };
                    Ok(BetaCell { alpha, beta, outcome })
                })
                .collect()
        });
        let cells: Vec<BetaCell> = cells.into_iter().collect::<Result<_>>()?;
        for row in cells.chunks(betas.len()) {
            let solved: Vec<(f64, f64)> = row
                .iter()
                .filter_map(|c| c.objective().map(|o| (c.beta, o)))
                .collect();
            for pair in solved.windows(2) {
                if pair[1].1 < pair[0].1 - MONOTONE_TOL {
                    return Err(Error::Invariant(format!(
                        "objective fell from {} at beta {} to {} at beta {} (alpha {})",
                        pair[0].1, pair[0].0, pair[1].1, pair[1].0, row[0].alpha
                    )));
                }
            }
        }
        Ok(cells)
    }
}

fn sorted_unique(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

#[derive(Clone, Debug)]
pub struct AlphaRow {
    pub alpha: f64,
    /// Reserve bounds, MW per farm.
    pub reserve: Vec<f64>,
    pub solution: DispatchSolution<f64>,
    pub risk: RiskReport,
}

#[derive(Clone, Debug)]
pub enum CellOutcome {
    Solved(Box<DispatchSolution<f64>>),
    Infeasible(Diagnosis),
}

#[derive(Clone, Debug)]
pub struct BetaCell {
    pub alpha: f64,
    pub beta: f64,
    pub outcome: CellOutcome,
}

impl BetaCell {
    pub fn objective(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Solved(s) => Some(s.objective),
            CellOutcome::Infeasible(_) => None,
        }
    }

    pub fn solution(&self) -> Option<&DispatchSolution<f64>> {
        match &self.outcome {
            CellOutcome::Solved(s) => Some(s),
            CellOutcome::Infeasible(_) => None,
        }
    }
}

pub fn run_alpha_sweep(config: &ExperimentConfig) -> Result<Vec<AlphaRow>> {
    Experiment::prepare(config)?.alpha_sweep()
}

pub fn run_beta_sweep(config: &ExperimentConfig) -> Result<Vec<BetaCell>> {
    Experiment::prepare(config)?.beta_sweep()
}

fn lmp_summary(lmp: &[f64]) -> (f64, f64, f64) {
    let min = lmp.iter().copied().fold(f64::INFINITY, f64::min);
    let max = lmp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = lmp.iter().sum::<f64>() / lmp.len().max(1) as f64;
    (min, max, mean)
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// Files written by [`run_sweep`].
#[derive(Clone, Debug)]
pub struct SweepOutputs {
    pub alpha_sweep: PathBuf,
    pub beta_sweep: PathBuf,
    pub lmp_profiles: PathBuf,
    pub schedules: PathBuf,
}

/// Runs both sweeps and writes `alpha_sweep.csv`, `beta_sweep.csv`,
/// `lmp_profiles.csv` and `schedules.csv` into the output directory.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutputs> {
    let exp = Experiment::prepare(config)?;
    let alpha_rows = exp.alpha_sweep()?;
    let cells = exp.beta_sweep()?;
    fs::create_dir_all(&config.output_dir)?;
    let out = SweepOutputs {
        alpha_sweep: config.output_dir.join("alpha_sweep.csv"),
        beta_sweep: config.output_dir.join("beta_sweep.csv"),
        lmp_profiles: config.output_dir.join("lmp_profiles.csv"),
        schedules: config.output_dir.join("schedules.csv"),
    };
    write_alpha_table(&out.alpha_sweep, &alpha_rows)?;
    write_schedules(&out.schedules, &exp.case, &alpha_rows)?;
    write_beta_table(&out.beta_sweep, &cells)?;
    write_lmp_profiles(&out.lmp_profiles, &exp.case, &cells)?;
    Ok(out)
}

/// Columns: `alpha,objective,lmp_min,lmp_max,lmp_mean,n_binding,binding_lines,
/// wind_scheduled_mw,reserve_total_mw,empirical_risk,ci_halfwidth,risk_pass,n_trials,
/// farm_risk_1..farm_risk_W`.
pub fn write_alpha_table(path: &Path, rows: &[AlphaRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    let n_farms = rows.first().map_or(0, |r| r.reserve.len());
    let mut header: Vec<String> = [
        "alpha",
        "objective",
        "lmp_min",
        "lmp_max",
        "lmp_mean",
        "n_binding",
        "binding_lines",
        "wind_scheduled_mw",
        "reserve_total_mw",
        "empirical_risk",
        "ci_halfwidth",
        "risk_pass",
        "n_trials",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=n_farms).map(|j| format!("farm_risk_{j}")));
    wtr.write_record(&header)?;
    for r in rows {
        let (min, max, mean) = lmp_summary(&r.solution.lmp);
        let mut rec = vec![
            r.alpha.to_string(),
            r.solution.objective.to_string(),
            min.to_string(),
            max.to_string(),
            mean.to_string(),
            r.solution.binding_lines.len().to_string(),
            join(&r.solution.binding_lines),
            r.solution.w.iter().sum::<f64>().to_string(),
            r.reserve.iter().sum::<f64>().to_string(),
            r.risk.empirical_risk.to_string(),
            r.risk.ci_halfwidth.to_string(),
            r.risk.pass.to_string(),
            r.risk.n_trials.to_string(),
        ];
        rec.extend(r.risk.per_farm_violation_rates.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Columns: `alpha,farm,bus_id,reserve_mw,scheduled_mw`.
pub fn write_schedules(path: &Path, case: &GridCase, rows: &[AlphaRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["alpha", "farm", "bus_id", "reserve_mw", "scheduled_mw"])?;
    for r in rows {
        for (j, farm) in case.wind_farms.iter().enumerate() {
            wtr.write_record([
                r.alpha.to_string(),
                j.to_string(),
                case.buses[farm.bus].id.to_string(),
                r.reserve[j].to_string(),
                r.solution.w[j].to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Columns: `alpha,beta,status,objective,lmp_min,lmp_max,n_binding,binding_lines,diagnosis`.
pub fn write_beta_table(path: &Path, cells: &[BetaCell]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "alpha",
        "beta",
        "status",
        "objective",
        "lmp_min",
        "lmp_max",
        "n_binding",
        "binding_lines",
        "diagnosis",
    ])?;
    for c in cells {
        let rec = match &c.outcome {
            CellOutcome::Solved(s) => {
                let (min, max, _) = lmp_summary(&s.lmp);
                vec![
                    c.alpha.to_string(),
                    c.beta.to_string(),
                    "optimal".to_string(),
                    s.objective.to_string(),
                    min.to_string(),
                    max.to_string(),
                    s.binding_lines.len().to_string(),
                    join(&s.binding_lines),
                    String::new(),
                ]
            }
            CellOutcome::Infeasible(d) => vec![
                c.alpha.to_string(),
                c.beta.to_string(),
                "infeasible".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                d.to_string(),
            ],
        };
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Long format, one row per (α, β, bus): `alpha,beta,bus_id,lmp`. Infeasible
/// cells are omitted.
pub fn write_lmp_profiles(path: &Path, case: &GridCase, cells: &[BetaCell]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["alpha", "beta", "bus_id", "lmp"])?;
    for c in cells {
        if let Some(s) = c.solution() {
            for (bus, lmp) in case.buses.iter().zip(&s.lmp) {
                wtr.write_record([c.alpha.to_string(), c.beta.to_string(), bus.id.to_string(), lmp.to_string()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
