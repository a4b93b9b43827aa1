mod common;

use common::{fixture, grid_search_dispatch, ieee30_config, rng, THREE_BUS, TWO_BUS, TWO_BUS_CONGESTED};
use rand::seq::index::sample;
use riskdispatch::dispatch::{balance_residual, curtailment, solve_dispatch, DispatchProblem};
use riskdispatch::experiments::{Experiment, Scenario};
use riskdispatch::grid::{build_dc_model, parse_case, GridCase};
use riskdispatch::scenario::ReserveVector;
use riskdispatch::{DispatchProblem64, DispatchSolution64, Error};

fn problem(case: GridCase, z: Vec<f64>) -> DispatchProblem64 {
    let model = build_dc_model(&case);
    DispatchProblem::new(case, model, ReserveVector::explicit(z).unwrap()).unwrap()
}

fn two_bus_wind(z: f64) -> DispatchProblem64 {
    let text = format!("{TWO_BUS}\n[[wind_farm]]\nbus = 2\ncapacity_mw = 10.0\n");
    problem(parse_case(&text).unwrap(), vec![z])
}

fn high_wind() -> Experiment {
    let dir = tempfile::tempdir().unwrap();
    Experiment::prepare(&ieee30_config(Scenario::HighWind, 2012, dir.path())).unwrap()
}

/// Per-MW cost step of moving any grid axis by `step`.
fn granularity(case: &GridCase, step: f64) -> f64 {
    step * case.generators.iter().map(|g| g.marginal_cost(g.p_max_mw)).sum::<f64>()
}

#[test]
fn two_bus_analytic_price() {
    let p = problem(parse_case(TWO_BUS).unwrap(), vec![]);
    let s = solve_dispatch(&p, 1e-10).unwrap();
    assert!((s.p_g[0] - 50.0).abs() < 1e-8);
    assert!((s.flows[0] - 50.0).abs() < 1e-8);
    assert!(s.lmp.iter().all(|l| (l - 11.0).abs() <= 1e-8));
    assert!((s.objective - 525.0).abs() < 1e-8);
    assert!(s.binding_lines.is_empty());
    assert_eq!(s.theta[0], 0.0);
    assert!((s.theta[1] + 0.05).abs() < 1e-10);
}

#[test]
fn congested_two_bus_prices() {
    let p = problem(parse_case(TWO_BUS_CONGESTED).unwrap(), vec![]);
    let s = solve_dispatch(&p, 1e-10).unwrap();
    assert!((s.p_g[0] - 30.0).abs() < 1e-6 && (s.p_g[1] - 30.0).abs() < 1e-6);
    assert!((s.lmp[0] - 10.6).abs() < 1e-6, "{:?}", s.lmp);
    assert!((s.lmp[1] - 20.0).abs() < 1e-6, "{:?}", s.lmp);
    assert_eq!(s.binding_lines, vec![0]);
    // the forward limit carries the price difference
    assert!((s.flow_duals[0].forward - 9.4).abs() < 1e-6);
    assert!(s.flow_duals[0].reverse.abs() < 1e-8);
    assert!((s.objective - 909.0).abs() < 1e-6);
    assert_eq!(s.solver.linear_cost_floor, vec![1]);
}

#[test]
fn two_bus_grid_search() {
    for z in [0.0, 3.7, 7.3] {
        let p = two_bus_wind(z);
        let s = solve_dispatch(&p, 1e-10).unwrap();
        let oracle = grid_search_dispatch(p.case(), &[z], 0.01).unwrap();
        assert!(oracle >= s.objective - 1e-6);
        assert!(oracle - s.objective <= granularity(p.case(), 0.01), "{oracle} vs {}", s.objective);
        assert!((s.w[0] - z).abs() < 1e-6);
    }
}

#[test]
fn three_bus_grid_search() {
    let case = parse_case(THREE_BUS).unwrap();
    let p = problem(case.clone(), vec![6.0]);
    let s = solve_dispatch(&p, 1e-10).unwrap();
    assert_eq!(s.binding_lines, vec![2]);
    assert!(s.lmp.iter().any(|&l| (l - s.lmp[0]).abs() > 1.0));
    let oracle = grid_search_dispatch(&case, &[6.0], 0.01).unwrap();
    assert!(oracle >= s.objective - 1e-6);
    assert!(oracle - s.objective <= granularity(&case, 0.01), "{oracle} vs {}", s.objective);
}

#[test]
fn single_precision_dispatch() {
    let case = parse_case(TWO_BUS).unwrap();
    let model = build_dc_model::<f32>(&case);
    let p = DispatchProblem::new(case, model, ReserveVector::<f32>::explicit(vec![]).unwrap()).unwrap();
    let s = solve_dispatch(&p, 1e-5f32).unwrap();
    assert!(s.lmp.iter().all(|l| (l - 11.0).abs() < 1e-2), "{:?}", s.lmp);
}

#[test]
fn ieee30_layout() {
    let exp = high_wind();
    let p = problem(exp.case.clone(), exp.reserve(0.05).unwrap().z_res);
    let qp = p.assemble().unwrap();
    assert_eq!(qp.n(), 43);
    assert_eq!(qp.n_eq(), 31);
    assert_eq!(qp.n_in(), 2 * 41 + 2 * 6 + 2 * 7);
}

#[test]
fn ieee30_uncongested_prices_are_uniform() {
    let exp = high_wind();
    let (_, s) = exp.solve(0.05, 1.0).unwrap();
    assert!(s.binding_lines.is_empty());
    let lo = s.lmp.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.lmp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi - lo <= 1e-4);
    let p = problem(exp.case.clone(), exp.reserve(0.05).unwrap().z_res);
    assert!(balance_residual(&p, &s) <= 1e-6);
}

fn active_set(s: &DispatchSolution64, case: &GridCase, z: &[f64]) -> (Vec<bool>, Vec<bool>, Vec<usize>) {
    let gens = case
        .generators
        .iter()
        .zip(&s.p_g)
        .map(|(g, &p)| (p - g.p_min_mw).abs() < 1e-5 || (p - g.p_max_mw).abs() < 1e-5)
        .collect();
    let wind = s.w.iter().zip(z).map(|(&w, &zj)| w < 1e-5 || (w - zj).abs() < 1e-5).collect();
    (gens, wind, s.binding_lines.clone())
}

fn finite_difference_check(case: &GridCase, z: &[f64], seed: u64) {
    let eps = 0.1;
    let base = solve_dispatch(&problem(case.clone(), z.to_vec()), 1e-10).unwrap();
    let base_set = active_set(&base, case, z);
    let mut r = rng(seed);
    let mut checked = 0;
    for m in sample(&mut r, case.n_buses(), case.n_buses()) {
        let mut bumped = case.clone();
        bumped.buses[m].load_mw += eps;
        let s = solve_dispatch(&problem(bumped.clone(), z.to_vec()), 1e-10).unwrap();
        if active_set(&s, &bumped, z) != base_set {
            continue;
        }
        let predicted = base.lmp[m] * eps;
        let actual = s.objective - base.objective;
        assert!((actual - predicted).abs() <= 0.02 * predicted.abs(), "bus {m}: {actual} vs {predicted}");
        checked += 1;
        if checked == 5 {
            return;
        }
    }
    panic!("only {checked} buses kept the active set");
}

#[test]
fn lmp_matches_finite_differences_uncongested() {
    let exp = high_wind();
    finite_difference_check(&exp.case, &exp.reserve(0.05).unwrap().z_res, 1);
}

#[test]
fn lmp_matches_finite_differences_congested() {
    let exp = high_wind();
    let case = riskdispatch::grid::scale_loads(&exp.case, 1.3).unwrap();
    let z = exp.reserve(0.05).unwrap().z_res;
    let s = solve_dispatch(&problem(case.clone(), z.clone()), 1e-10).unwrap();
    assert!(!s.binding_lines.is_empty());
    finite_difference_check(&case, &z, 2);
}

#[test]
fn cost_falls_as_alpha_grows() {
    let exp = high_wind();
    let mut last = f64::INFINITY;
    for alpha in [0.005, 0.01, 0.03, 0.05, 0.1, 0.2, 0.4] {
        let (_, s) = exp.solve(alpha, 1.0).unwrap();
        assert!(s.objective <= last + 1e-7, "alpha {alpha}");
        last = s.objective;
    }
}

#[test]
fn cost_rises_with_load() {
    let exp = high_wind();
    let mut last = f64::NEG_INFINITY;
    for beta in [0.8, 0.9, 1.0, 1.1, 1.2, 1.3] {
        let (_, s) = exp.solve(0.05, beta).unwrap();
        assert!(s.objective >= last - 1e-7, "beta {beta}");
        last = s.objective;
    }
}

#[test]
fn low_wind_costs_more_than_high_wind() {
    let dir = tempfile::tempdir().unwrap();
    let low = Experiment::prepare(&ieee30_config(Scenario::LowWind, 2012, dir.path())).unwrap();
    let (_, lo) = low.solve(0.05, 1.0).unwrap();
    let (_, hi) = high_wind().solve(0.05, 1.0).unwrap();
    assert!(lo.objective > hi.objective);
}

#[test]
fn native_fixture_solves_like_matpower_setup() {
    let native = riskdispatch::grid::load_case(fixture("ieee30_wind.toml")).unwrap();
    let exp = high_wind();
    let z = exp.reserve(0.05).unwrap().z_res;
    let a = solve_dispatch(&problem(native, z.clone()), 1e-10).unwrap();
    let b = solve_dispatch(&problem(exp.case.clone(), z), 1e-10).unwrap();
    assert!((a.objective - b.objective).abs() < 1e-8);
}

#[test]
fn infeasible_load_is_diagnosed() {
    let exp = high_wind();
    match exp.solve(0.05, 2.5) {
        Err(Error::Infeasible(d)) => assert!(!d.to_string().is_empty()),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn curtailment_against_realized_wind() {
    let exp = high_wind();
    let (_, s) = exp.solve(0.05, 1.0).unwrap();
    let mut r = rng(4);
    let draws = exp.model.draw(200, &mut r);
    for k in 0..200 {
        let z = draws.row(k);
        let c = curtailment(z, &s.w).unwrap();
        for j in 0..z.len() {
            assert_eq!(c.spilled[j], (z[j] - s.w[j]).max(0.0));
            assert_eq!(c.shortfall[j], z[j] < s.w[j]);
            if !c.shortfall[j] {
                assert!((z[j] - c.spilled[j] - s.w[j]).abs() < 1e-12);
            }
        }
    }
}
