//! Risk-aware DC optimal power flow: assembly, solution and price extraction.
//!
//! Decision vector layout is `[p_G, w, θ]` with powers in per-unit. The
//! equality block holds one balance row per bus in internal bus order and then
//! the reference-angle row; the inequality block holds `+Hθ ≤ f`, `−Hθ ≤ f`,
//! `p ≤ p_max`, `−p ≤ −p_min`, `w ≤ z_res` and `−w ≤ 0`.
//!
//! Scheduled wind is kept non-negative even where the reserve is truncated to
//! zero, since a negative injection from a farm has no physical meaning.

mod output;

use serde::{Deserialize, Serialize};

use crate::error::{Diagnosis, Error, Result};
use crate::grid::{DcModel, GridCase};
use crate::linalg::Matrix;
use crate::qp::{solve, KktResiduals, QpStatus, QuadProgram};
use crate::scalar::Scalar;
use crate::scenario::ReserveVector;

/// Diagonal added to `Q` for generators with linear cost.
pub const LINEAR_COST_FLOOR: f64 = 1e-10;
/// Flow duals above this ($/MWh) mark a line as binding.
pub const BINDING_DUAL_THRESHOLD: f64 = 1e-6;
const MAX_ITER: usize = 100;
/// $/h per per-unit of line overload in the diagnostic relaxation.
const OVERLOAD_PENALTY: f64 = 1e7;

/// Column offsets of the decision vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n_gen: usize,
    pub n_wind: usize,
    pub n_bus: usize,
}

impl Layout {
    pub fn n(&self) -> usize {
        self.n_gen + self.n_wind + self.n_bus
    }

    pub fn p(&self, i: usize) -> usize {
        i
    }

    pub fn w(&self, j: usize) -> usize {
        self.n_gen + j
    }

    pub fn theta(&self, m: usize) -> usize {
        self.n_gen + self.n_wind + m
    }
}

#[derive(Clone, Debug)]
pub struct DispatchProblem<T> {
    case: GridCase,
    model: DcModel<T>,
    reserve: ReserveVector<T>,
}

impl<T: Scalar> DispatchProblem<T> {
    /// `reserve.z_res[j]` is in MW and belongs to `case.wind_farms[j]`.
    pub fn new(case: GridCase, model: DcModel<T>, reserve: ReserveVector<T>) -> Result<Self> {
        if model.n_buses() != case.n_buses() || model.n_lines() != case.n_branches() {
            return Err(Error::dimension(format!(
                "DC model has {} buses and {} lines, case has {} and {}",
                model.n_buses(),
                model.n_lines(),
                case.n_buses(),
                case.n_branches()
            )));
        }
        if reserve.len() != case.wind_farms.len() {
            return Err(Error::dimension(format!(
                "reserve has {} entries for {} wind farms",
                reserve.len(),
                case.wind_farms.len()
            )));
        }
        if reserve.z_res.iter().any(|z| !z.is_finite() || *z < T::zero()) {
            return Err(Error::validation("reserve entries must be finite and non-negative"));
        }
        Ok(DispatchProblem { case, model, reserve })
    }

    pub fn case(&self) -> &GridCase {
        &self.case
    }

    pub fn model(&self) -> &DcModel<T> {
        &self.model
    }

    pub fn reserve(&self) -> &ReserveVector<T> {
        &self.reserve
    }

    pub fn layout(&self) -> Layout {
        Layout {
            n_gen: self.case.generators.len(),
            n_wind: self.case.wind_farms.len(),
            n_bus: self.case.n_buses(),
        }
    }

    fn base(&self) -> T {
        T::lit(self.case.base_mva)
    }

    /// Generators whose zero quadratic coefficient received [`LINEAR_COST_FLOOR`].
    pub fn linear_cost_generators(&self) -> Vec<usize> {
        (0..self.case.generators.len())
            .filter(|&i| self.case.generators[i].cost_c2 == 0.0)
            .collect()
    }

    /// Builds the quadratic program. The objective is in $/h.
    pub fn assemble(&self) -> Result<QuadProgram<T>> {
        let lay = self.layout();
        let n = lay.n();
        let base = self.case.base_mva;
        let n_line = self.case.n_branches();

        let mut q = Matrix::zeros(n, n);
        let mut c = vec![T::zero(); n];
        let mut c0 = T::zero();
        for (i, g) in self.case.generators.iter().enumerate() {
            let k = lay.p(i);
            q[(k, k)] = if g.cost_c2 == 0.0 {
                T::lit(LINEAR_COST_FLOOR)
            } else {
                T::lit(2.0 * g.cost_c2 * base * base)
            };
            c[k] = T::lit(g.cost_c1 * base);
            c0 += T::lit(g.cost_c0);
        }

        let m = lay.n_bus;
        let mut a_eq = Matrix::zeros(m + 1, n);
        let mut b_eq = vec![T::zero(); m + 1];
        for (i, g) in self.case.generators.iter().enumerate() {
            a_eq[(g.bus, lay.p(i))] += T::one();
        }
        for (j, f) in self.case.wind_farms.iter().enumerate() {
            a_eq[(f.bus, lay.w(j))] += T::one();
        }
        for r in 0..m {
            for k in 0..m {
                a_eq[(r, lay.theta(k))] = -self.model.admittance[(r, k)];
            }
            b_eq[r] = T::lit(self.case.buses[r].load_mw / base);
        }
        a_eq[(m, lay.theta(self.model.ref_bus))] = T::one();

        let n_in = 2 * n_line + 2 * lay.n_gen + 2 * lay.n_wind;
        let mut a_in = Matrix::zeros(n_in, n);
        let mut b_in = vec![T::zero(); n_in];
        for l in 0..n_line {
            let limit = T::lit(self.case.branches[l].flow_limit_mw / base);
            for k in 0..m {
                let h = self.model.flow_matrix[(l, k)];
                a_in[(l, lay.theta(k))] = h;
                a_in[(n_line + l, lay.theta(k))] = -h;
            }
            b_in[l] = limit;
            b_in[n_line + l] = limit;
        }
        let mut row = 2 * n_line;
        for (i, g) in self.case.generators.iter().enumerate() {
            a_in[(row, lay.p(i))] = T::one();
            b_in[row] = T::lit(g.p_max_mw / base);
            a_in[(row + 1, lay.p(i))] = -T::one();
            b_in[row + 1] = -T::lit(g.p_min_mw / base);
            row += 2;
        }
        for (j, &z) in self.reserve.z_res.iter().enumerate() {
            a_in[(row, lay.w(j))] = T::one();
            b_in[row] = z / self.base();
            a_in[(row + 1, lay.w(j))] = -T::one();
            row += 2;
        }

        QuadProgram::new(q, c, c0, a_eq, b_eq, a_in, b_in)
    }
}

/// Dual prices of a line's two flow-limit rows, in $/MWh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineDual<T> {
    pub forward: T,
    pub reverse: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics<T> {
    pub status: QpStatus,
    pub iterations: usize,
    pub kkt_residuals: KktResiduals<T>,
    pub lu_fallbacks: usize,
    /// Generators with linear cost whose quadratic term was floored.
    pub linear_cost_floor: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution<T> {
    /// Per generator, MW.
    pub p_g: Vec<T>,
    /// Per wind farm, MW.
    pub w: Vec<T>,
    /// Per bus, radians.
    pub theta: Vec<T>,
    /// Per line, MW, positive from `from_bus` to `to_bus`.
    pub flows: Vec<T>,
    /// $/h including constant cost terms.
    pub objective: T,
    /// Per bus, $/MWh.
    pub lmp: Vec<T>,
    pub flow_duals: Vec<LineDual<T>>,
    pub binding_lines: Vec<usize>,
    pub solver: SolverDiagnostics<T>,
}

/// Solves the dispatch and checks the schedule against its constraints.
///
/// Infeasible problems come back as [`Error::Infeasible`] with a diagnosis.
pub fn solve_dispatch<T: Scalar>(problem: &DispatchProblem<T>, tol: T) -> Result<DispatchSolution<T>> {
    let qp = problem.assemble()?;
    let sol = solve(&qp, tol, MAX_ITER)?;
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::Infeasible => return Err(Error::Infeasible(diagnose(problem, tol))),
        _ => {
            sol.into_optimal()?;
            unreachable!("non-optimal status always yields an error");
        }
    }

    let lay = problem.layout();
    let base = problem.base();
    let ref_bus = problem.model.ref_bus;
    let theta_ref = sol.x[lay.theta(ref_bus)];
    // B·1 = 0, so shifting every angle leaves balances and flows unchanged.
    let theta: Vec<T> = (0..lay.n_bus).map(|m| sol.x[lay.theta(m)] - theta_ref).collect();
    let p_g: Vec<T> = (0..lay.n_gen).map(|i| sol.x[lay.p(i)] * base).collect();
    let w: Vec<T> = (0..lay.n_wind).map(|j| sol.x[lay.w(j)] * base).collect();
    let flows: Vec<T> = problem.model.flows(&theta).into_iter().map(|f| f * base).collect();
    let lmp: Vec<T> = sol.nu[..lay.n_bus].iter().map(|&v| -v / base).collect();
    let n_line = problem.case.n_branches();
    let flow_duals: Vec<LineDual<T>> = (0..n_line)
        .map(|l| LineDual {
            forward: sol.lambda[l] / base,
            reverse: sol.lambda[n_line + l] / base,
        })
        .collect();
    let threshold = T::lit(BINDING_DUAL_THRESHOLD);
    let binding_lines = flow_duals
        .iter()
        .enumerate()
        .filter(|(_, d)| d.forward > threshold || d.reverse > threshold)
        .map(|(l, _)| l)
        .collect();

    let solution = DispatchSolution {
        p_g,
        w,
        theta,
        flows,
        objective: sol.objective,
        lmp,
        flow_duals,
        binding_lines,
        solver: SolverDiagnostics {
            status: sol.status,
            iterations: sol.iterations,
            kkt_residuals: sol.kkt_residuals,
            lu_fallbacks: sol.lu_fallbacks,
            linear_cost_floor: problem.linear_cost_generators(),
        },
    };
    check_solution(problem, &solution, tol)?;
    Ok(solution)
}

/// Verifies bounds, line limits, the reference angle and nodal balance.
fn check_solution<T: Scalar>(problem: &DispatchProblem<T>, s: &DispatchSolution<T>, tol: T) -> Result<()> {
    let base = problem.base();
    let slack = T::lit(1e-6).max(tol * T::lit(10.0)) * base;
    let case = &problem.case;
    let fail = |what: String| Err(Error::Invariant(what));
    for (i, (g, &p)) in case.generators.iter().zip(&s.p_g).enumerate() {
        if p < T::lit(g.p_min_mw) - slack || p > T::lit(g.p_max_mw) + slack {
            return fail(format!("generator {i} output {p} MW outside its limits"));
        }
    }
    for (l, (b, &f)) in case.branches.iter().zip(&s.flows).enumerate() {
        if f.abs() > T::lit(b.flow_limit_mw) + slack {
            return fail(format!("line {l} flow {f} MW exceeds its limit"));
        }
    }
    for (j, (&w, &z)) in s.w.iter().zip(&problem.reserve.z_res).enumerate() {
        if w < -slack || w > z + slack {
            return fail(format!("wind farm {j} schedule {w} MW outside [0, {z}]"));
        }
    }
    if s.theta[problem.model.ref_bus] != T::zero() {
        return fail("reference angle is not zero".into());
    }
    let residual = balance_residual(problem, s);
    if residual > T::lit(1e-6).max(tol * T::lit(10.0)) {
        return fail(format!("nodal balance residual {residual} per-unit"));
    }
    Ok(())
}

/// `‖p_G + w − p_D − Bθ‖∞` in per-unit.
pub fn balance_residual<T: Scalar>(problem: &DispatchProblem<T>, s: &DispatchSolution<T>) -> T {
    let case = &problem.case;
    let base = problem.base();
    let mut injection: Vec<T> = case.buses.iter().map(|b| -T::lit(b.load_mw) / base).collect();
    for (g, &p) in case.generators.iter().zip(&s.p_g) {
        injection[g.bus] += p / base;
    }
    for (f, &w) in case.wind_farms.iter().zip(&s.w) {
        injection[f.bus] += w / base;
    }
    let b_theta = problem.model.admittance.matvec(&s.theta);
    injection
        .iter()
        .zip(&b_theta)
        .fold(T::zero(), |m, (&i, &bt)| m.max((i - bt).abs()))
}

/// Explains an infeasible dispatch: aggregate supply first, then a relaxation
/// with penalized line overloads to find congested lines.
pub fn diagnose<T: Scalar>(problem: &DispatchProblem<T>, tol: T) -> Diagnosis {
    let case = &problem.case;
    let demand = case.total_load_mw();
    let capacity = case.total_conventional_capacity_mw()
        + problem.reserve.z_res.iter().map(|z| z.to_f64_lossy()).sum::<f64>();
    let minimum: f64 = case.generators.iter().map(|g| g.p_min_mw).sum();
    let margin = 1e-9 * (1.0 + demand.abs());
    if demand > capacity + margin {
        return Diagnosis::InadequateSupply {
            demand_mw: demand,
            capacity_mw: capacity,
        };
    }
    if minimum > demand + margin {
        return Diagnosis::ExcessMinimumGeneration {
            demand_mw: demand,
            minimum_mw: minimum,
        };
    }
    match overloaded_lines(problem, tol) {
        Some(lines) if !lines.is_empty() => Diagnosis::Congestion { overloaded_lines: lines },
        _ => Diagnosis::Unknown,
    }
}

/// Adds one overload variable per line, penalized in the objective, and
/// reports the lines that need it.
fn overloaded_lines<T: Scalar>(problem: &DispatchProblem<T>, tol: T) -> Option<Vec<usize>> {
    let qp = problem.assemble().ok()?;
    let n = qp.n();
    let n_line = problem.case.n_branches();
    let n_ext = n + n_line;
    let mut q = Matrix::zeros(n_ext, n_ext);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] = qp.q[(i, j)];
        }
    }
    let mut c = qp.c.clone();
    c.extend(std::iter::repeat_n(T::lit(OVERLOAD_PENALTY), n_line));
    let a_eq = Matrix::from_fn(qp.n_eq(), n_ext, |r, k| if k < n { qp.a_eq[(r, k)] } else { T::zero() });
    let rows = qp.n_in() + n_line;
    let mut a_in = Matrix::zeros(rows, n_ext);
    let mut b_in = qp.b_in.clone();
    for r in 0..qp.n_in() {
        for k in 0..n {
            a_in[(r, k)] = qp.a_in[(r, k)];
        }
    }
    for l in 0..n_line {
        a_in[(l, n + l)] = -T::one();
        a_in[(n_line + l, n + l)] = -T::one();
        a_in[(qp.n_in() + l, n + l)] = -T::one();
    }
    b_in.extend(std::iter::repeat_n(T::zero(), n_line));
    let relaxed = QuadProgram::new(q, c, qp.c0, a_eq, qp.b_eq.clone(), a_in, b_in).ok()?;
    let sol = solve(&relaxed, tol.max(T::lit(1e-7)), MAX_ITER).ok()?;
    if sol.status != QpStatus::Optimal {
        return None;
    }
    let cut = T::lit(1e-6);
    Some((0..n_line).filter(|&l| sol.x[n + l] > cut).collect())
}

/// Energy spilled and shortfall flags when `actual` wind meets schedule `w`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curtailment<T> {
    pub spilled: Vec<T>,
    pub shortfall: Vec<bool>,
}

pub fn curtailment<T: Scalar>(actual: &[T], w: &[T]) -> Result<Curtailment<T>> {
    if actual.len() != w.len() {
        return Err(Error::dimension(format!(
            "{} actual values for {} scheduled farms",
            actual.len(),
            w.len()
        )));
    }
    Ok(Curtailment {
        spilled: actual.iter().zip(w).map(|(&a, &s)| (a - s).max(T::zero())).collect(),
        shortfall: actual.iter().zip(w).map(|(&a, &s)| a < s).collect(),
    })
}
