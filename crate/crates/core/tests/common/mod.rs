//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use riskdispatch::experiments::{ExperimentConfig, Scenario, TraceSource};
use riskdispatch::grid::GridCase;
use riskdispatch::linalg::Matrix;
use riskdispatch::qp::QuadProgram;

pub const WIND_BUSES: [u32; 7] = [1, 2, 5, 9, 15, 24, 30];

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn to_na(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// 30-bus setup: farms at the usual buses, 80/20 capacity split, synthetic trace.
pub fn ieee30_config(scenario: Scenario, seed: u64, output_dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        case_path: fixture("case30.m"),
        wind_buses: Some(WIND_BUSES.to_vec()),
        penetration: Some((0.8, 0.2)),
        trace: TraceSource::Synthetic { hours: 589, seed },
        scenario,
        mean_scale: 1.0,
        alpha_list: vec![0.01, 0.03, 0.05, 0.1],
        beta_list: vec![1.0],
        samples: 1000,
        n_trials: 100_000,
        seed,
        output_dir: output_dir.to_path_buf(),
        jobs: 2,
        clip_to_capacity: false,
        tol: 1e-9,
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn from_na(m: &DMatrix<f64>) -> Matrix<f64> {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Random strictly convex QP with a known feasible point; some inequalities
/// are tight there.
pub fn random_definite_qp(rng: &mut ChaCha8Rng, n: usize) -> QuadProgram<f64> {
    let r = gaussian_matrix(rng, n, n);
    let q = (&r.transpose() * &r) / n as f64 + DMatrix::identity(n, n) * 0.5;
    let c: Vec<f64> = (0..n).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let p = rng.random_range(0..=n / 4);
    let m = rng.random_range(1..=(n / 2).max(1));
    let x0 = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = gaussian_matrix(rng, p, n);
    let b = &a * &x0;
    let g = gaussian_matrix(rng, m, n);
    let gx = &g * &x0;
    let h: Vec<f64> = (0..m)
        .map(|i| gx[i] + if rng.random_bool(0.4) { 0.0 } else { rng.random_range(0.0..2.0) })
        .collect();
    QuadProgram::new(from_na(&q), c, 0.0, from_na(&a), b.iter().copied().collect(), from_na(&g), h).unwrap()
}

/// Random rank-deficient convex QP with box constraints only.
pub fn random_box_qp(rng: &mut ChaCha8Rng, n: usize) -> QuadProgram<f64> {
    let k = (n / 2).max(1);
    let r = gaussian_matrix(rng, k, n);
    let q = (&r.transpose() * &r) / n as f64;
    let c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..0.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.5..4.0)).collect();
    let mut a_in = Matrix::zeros(2 * n, n);
    let mut b_in = vec![0.0; 2 * n];
    for i in 0..n {
        a_in[(i, i)] = 1.0;
        b_in[i] = hi[i];
        a_in[(n + i, i)] = -1.0;
        b_in[n + i] = -lo[i];
    }
    QuadProgram::new(from_na(&q), c, 0.0, Matrix::zeros(0, n), vec![], a_in, b_in).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Optimal value of a strictly convex QP by accelerated projected gradient
/// ascent on its dual, `λ ⪰ 0`, `ν` free.
pub fn dual_ascent_oracle(qp: &QuadProgram<f64>) -> f64 {
    let n = qp.n();
    let q = to_na(&qp.q);
    let q_inv = q.clone().try_inverse().expect("Q must be invertible");
    let p = qp.n_eq();
    let m = qp.n_in();
    let mut k = DMatrix::zeros(p + m, n);
    for i in 0..p {
        for j in 0..n {
            k[(i, j)] = qp.a_eq[(i, j)];
        }
    }
    for i in 0..m {
        for j in 0..n {
            k[(p + i, j)] = qp.a_in[(i, j)];
        }
    }
    let c = DVector::from_column_slice(&qp.c);
    let rhs = DVector::from_iterator(p + m, qp.b_eq.iter().chain(&qp.b_in).copied());
    let hess = &k * &q_inv * k.transpose();
    let lip = hess.symmetric_eigenvalues().max().max(1e-12);

    let primal = |y: &DVector<f64>| -> DVector<f64> { -(&q_inv * (&c + k.transpose() * y)) };
    let dual_value = |y: &DVector<f64>| -> f64 {
        let v = &c + k.transpose() * y;
        qp.c0 - 0.5 * v.dot(&(&q_inv * &v)) - rhs.dot(y)
    };
    let project = |y: &mut DVector<f64>| {
        for i in p..p + m {
            y[i] = y[i].max(0.0);
        }
    };

    let mut y = DVector::zeros(p + m);
    let mut z = y.clone();
    let mut t = 1.0f64;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..400_000 {
        let x = primal(&z);
        let grad = &k * &x - &rhs;
        let mut y_next = &z + grad / lip;
        project(&mut y_next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        let step = &y_next - &y;
        // restart when the momentum direction stops ascending
        let restart = (&y_next - &z).dot(&step) < 0.0;
        z = if restart { y_next.clone() } else { &y_next + step * momentum };
        t = if restart { 1.0 } else { t_next };
        y = y_next;
        best = best.max(dual_value(&y));

        let x = primal(&y);
        let kx = &k * &x - &rhs;
        let eq = (0..p).fold(0.0f64, |a, i| a.max(kx[i].abs()));
        let ineq = (p..p + m).fold(0.0f64, |a, i| a.max(kx[i]));
        let comp = (p..p + m).fold(0.0f64, |a, i| a.max((y[i] * kx[i]).abs()));
        if eq < 1e-12 && ineq < 1e-12 && comp < 1e-12 {
            break;
        }
    }
    best
}

/// Optimal value of a convex QP with box constraints `[I; −I] x ≤ [hi; −lo]`
/// by accelerated projected gradient on the primal.
pub fn box_gradient_oracle(qp: &QuadProgram<f64>) -> f64 {
    let n = qp.n();
    let q = to_na(&qp.q);
    let c = DVector::from_column_slice(&qp.c);
    let hi: Vec<f64> = qp.b_in[..n].to_vec();
    let lo: Vec<f64> = qp.b_in[n..].iter().map(|v| -v).collect();
    let lip = q.clone().symmetric_eigenvalues().max().max(1e-12);
    let project = |x: &mut DVector<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let value = |x: &DVector<f64>| 0.5 * x.dot(&(&q * x)) + c.dot(x) + qp.c0;
    let mut x = DVector::from_fn(n, |i, _| 0.5 * (lo[i] + hi[i]));
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..400_000 {
        let grad = &q * &z + &c;
        let mut x_next = &z - grad / lip;
        project(&mut x_next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let step = &x_next - &x;
        let restart = (&z - &x_next).dot(&step) < 0.0;
        z = if restart { x_next.clone() } else { &x_next + &step * ((t - 1.0) / t_next) };
        t = if restart { 1.0 } else { t_next };
        let moved = step.amax();
        x = x_next;
        if moved < 1e-15 {
            break;
        }
    }
    value(&x)
}

/// Cheapest dispatch on a grid of `step` MW over every generator but the
/// last and every farm; the last generator closes the balance. Angles come
/// from the reduced admittance system. Returns `None` when no grid point is
/// feasible.
pub fn grid_search_dispatch(case: &GridCase, z_res: &[f64], step: f64) -> Option<f64> {
    let n_bus = case.n_buses();
    let base = case.base_mva;
    let mut b = DMatrix::<f64>::zeros(n_bus, n_bus);
    for br in &case.branches {
        let y = 1.0 / br.reactance;
        let (f, t) = (br.from_bus, br.to_bus);
        b[(f, f)] += y;
        b[(t, t)] += y;
        b[(f, t)] -= y;
        b[(t, f)] -= y;
    }
    let reduced = b.view((1, 1), (n_bus - 1, n_bus - 1)).into_owned();
    let solve = reduced.lu();
    let demand = case.total_load_mw();

    let gens = &case.generators;
    let free = gens.len() - 1;
    let mut axes: Vec<(f64, f64)> = gens[..free].iter().map(|g| (g.p_min_mw, g.p_max_mw)).collect();
    axes.extend(z_res.iter().map(|&z| (0.0, z)));
    let counts: Vec<usize> = axes.iter().map(|(lo, hi)| ((hi - lo) / step + 1e-9).floor() as usize + 1).collect();
    let total: usize = counts.iter().product();

    let last = gens.last()?;
    let mut best: Option<f64> = None;
    let mut point = vec![0.0; axes.len()];
    for idx in 0..total {
        let mut rem = idx;
        for (d, (&cnt, &(lo, _))) in counts.iter().zip(&axes).enumerate() {
            point[d] = lo + (rem % cnt) as f64 * step;
            rem /= cnt;
        }
        let fixed: f64 = point.iter().sum();
        let p_last = demand - fixed;
        if p_last < last.p_min_mw - 1e-9 || p_last > last.p_max_mw + 1e-9 {
            continue;
        }
        let mut inj = DVector::from_fn(n_bus, |m, _| -case.buses[m].load_mw / base);
        for (i, g) in gens.iter().enumerate() {
            let p = if i < free { point[i] } else { p_last };
            inj[g.bus] += p / base;
        }
        for (j, f) in case.wind_farms.iter().enumerate() {
            inj[f.bus] += point[free + j] / base;
        }
        let rhs = inj.rows(1, n_bus - 1).into_owned();
        let th = solve.solve(&rhs)?;
        let theta = |m: usize| if m == 0 { 0.0 } else { th[m - 1] };
        let ok = case.branches.iter().all(|br| {
            let flow = (theta(br.from_bus) - theta(br.to_bus)) / br.reactance * base;
            flow.abs() <= br.flow_limit_mw + 1e-9
        });
        if !ok {
            continue;
        }
        let cost: f64 = gens
            .iter()
            .enumerate()
            .map(|(i, g)| g.cost(if i < free { point[i] } else { p_last }))
            .sum();
        best = Some(best.map_or(cost, |b: f64| b.min(cost)));
    }
    best
}

/// Textbook two-pass covariance with divisor `T − 1`.
pub fn two_pass_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t = rows.len();
    let w = rows[0].len();
    let mean: Vec<f64> = (0..w).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / t as f64).collect();
    (0..w)
        .map(|i| {
            (0..w)
                .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (t - 1) as f64)
                .collect()
        })
        .collect()
}

/// Two buses, one quadratic generator, 50 MW load.
pub const TWO_BUS: &str = r#"
base_mva = 100.0

[[bus]]
id = 1
load_mw = 0.0

[[bus]]
id = 2
load_mw = 50.0

[[branch]]
from_bus = 1
to_bus = 2
reactance = 0.1
flow_limit_mw = 100.0

[[generator]]
bus = 1
p_min_mw = 0.0
p_max_mw = 100.0
cost_c2 = 0.01
cost_c1 = 10.0
cost_c0 = 0.0
"#;

/// Two buses, a generator at each end and a 30 MW line.
pub const TWO_BUS_CONGESTED: &str = r#"
base_mva = 100.0

[[bus]]
id = 1
load_mw = 0.0

[[bus]]
id = 2
load_mw = 60.0

[[branch]]
from_bus = 1
to_bus = 2
reactance = 0.1
flow_limit_mw = 30.0

[[generator]]
bus = 1
p_min_mw = 0.0
p_max_mw = 100.0
cost_c2 = 0.01
cost_c1 = 10.0

[[generator]]
bus = 2
p_min_mw = 0.0
p_max_mw = 100.0
cost_c2 = 0.0
cost_c1 = 20.0
"#;

/// Triangle with a wind farm at bus 2 and a tight line 1-3.
pub const THREE_BUS: &str = r#"
base_mva = 100.0

[[bus]]
id = 1
load_mw = 0.0

[[bus]]
id = 2
load_mw = 20.0

[[bus]]
id = 3
load_mw = 40.0

[[branch]]
from_bus = 1
to_bus = 2
reactance = 0.1
flow_limit_mw = 100.0

[[branch]]
from_bus = 2
to_bus = 3
reactance = 0.1
flow_limit_mw = 100.0

[[branch]]
from_bus = 1
to_bus = 3
reactance = 0.2
flow_limit_mw = 18.0

[[generator]]
bus = 1
p_min_mw = 0.0
p_max_mw = 80.0
cost_c2 = 0.02
cost_c1 = 12.0

[[generator]]
bus = 3
p_min_mw = 5.0
p_max_mw = 40.0
cost_c2 = 0.05
cost_c1 = 25.0

[[wind_farm]]
bus = 2
capacity_mw = 10.0
"#;
