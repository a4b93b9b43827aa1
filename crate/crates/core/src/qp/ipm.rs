//! Mehrotra predictor-corrector on the reduced KKT system
//!
//! ```text
//!   [ Q + GᵀWG + δI   Aᵀ  ] [dx]   [r1]
//!   [ A              −δI  ] [dν] = [r2]      W = diag(λ ./ s)
//! ```
//!
//! factored by unpivoted `LDLᵀ` with iterative refinement against the
//! unregularized matrix. When refinement cannot bring the residual down the
//! iteration falls back to pivoted LU.

use super::{IterateLog, QpStatus, QuadProgram, SolverOptions};
use crate::linalg::{axpy, dot, norm_inf, Cholesky, Ldlt, Lu, Matrix};
use crate::scalar::Scalar;

/// Newton direction (dx, dnu, dlam, ds).
type Direction<T> = (Vec<T>, Vec<T>, Vec<T>, Vec<T>);

pub(super) struct IpmOutput<T> {
    pub x: Vec<T>,
    pub nu: Vec<T>,
    pub lambda: Vec<T>,
    pub status: QpStatus,
    pub iterations: usize,
    pub lu_fallbacks: usize,
    pub log: Vec<IterateLog<T>>,
}

enum Factor<T> {
    Ldlt(Ldlt<T>),
    Lu(Lu<T>),
}

impl<T: Scalar> Factor<T> {
    fn solve(&self, b: &[T]) -> Vec<T> {
        match self {
            Factor::Ldlt(f) => f.solve(b),
            Factor::Lu(f) => f.solve(b),
        }
    }
}

struct KktSystem<T> {
    regularized: Matrix<T>,
    exact: Matrix<T>,
    factor: Option<Factor<T>>,
    fallback_used: bool,
}

impl<T: Scalar> KktSystem<T> {
    fn new(qp: &QuadProgram<T>, weights: &[T], delta: T) -> Self {
        let n = qp.n();
        let p = qp.n_eq();
        let mut exact = Matrix::zeros(n + p, n + p);
        for i in 0..n {
            for j in 0..n {
                exact[(i, j)] = qp.q[(i, j)];
            }
        }
        for (k, &w) in weights.iter().enumerate() {
            let g = qp.a_in.row(k);
            let nz: Vec<usize> = (0..n).filter(|&j| g[j] != T::zero()).collect();
            for &i in &nz {
                let wi = w * g[i];
                for &j in &nz {
                    exact[(i, j)] += wi * g[j];
                }
            }
        }
        for r in 0..p {
            for j in 0..n {
                let a = qp.a_eq[(r, j)];
                exact[(n + r, j)] = a;
                exact[(j, n + r)] = a;
            }
        }
        let mut regularized = exact.clone();
        for i in 0..n {
            regularized[(i, i)] += delta;
        }
        for r in 0..p {
            regularized[(n + r, n + r)] -= delta;
        }
        let factor = Ldlt::factor(&regularized).map(Factor::Ldlt);
        KktSystem {
            regularized,
            exact,
            factor,
            fallback_used: false,
        }
    }

    fn switch_to_lu(&mut self) -> bool {
        if matches!(self.factor, Some(Factor::Lu(_))) {
            return false;
        }
        self.fallback_used = true;
        self.factor = Lu::factor(&self.regularized).map(Factor::Lu);
        self.factor.is_some()
    }

    fn refine(&self, rhs: &[T]) -> Option<(Vec<T>, T)> {
        let f = self.factor.as_ref()?;
        let mut x = f.solve(rhs);
        let resid = |x: &[T]| -> Vec<T> {
            let kx = self.exact.matvec(x);
            rhs.iter().zip(&kx).map(|(&b, &k)| b - k).collect()
        };
        let mut r = resid(&x);
        let mut best = (x.clone(), norm_inf(&r));
        for _ in 0..4 {
            if !best.1.is_finite() {
                return None;
            }
            let dx = f.solve(&r);
            axpy(T::one(), &dx, &mut x);
            r = resid(&x);
            let rn = norm_inf(&r);
            if rn < best.1 {
                best = (x.clone(), rn);
            } else {
                break;
            }
        }
        best.1.is_finite().then_some(best)
    }

    fn solve(&mut self, rhs: &[T]) -> Option<Vec<T>> {
        let target = T::lit(1e-9).max(T::epsilon() * T::lit(1e3)) * (T::one() + norm_inf(rhs));
        if self.factor.is_none() && !self.switch_to_lu() {
            return None;
        }
        match self.refine(rhs) {
            Some((x, rn)) if rn <= target => Some(x),
            attempt => {
                if self.switch_to_lu() {
                    if let Some((x, rn)) = self.refine(rhs) {
                        if attempt.as_ref().is_none_or(|(_, prev)| rn <= *prev) {
                            return Some(x);
                        }
                    }
                }
                attempt.map(|(x, _)| x)
            }
        }
    }
}

/// Largest step in (0, 1] keeping `v + α·dv ≥ 0`.
fn max_step<T: Scalar>(v: &[T], dv: &[T]) -> T {
    v.iter()
        .zip(dv)
        .filter(|(_, &d)| d < T::zero())
        .fold(T::one(), |a, (&vi, &di)| a.min(-vi / di))
}

/// Whether the normalized duals prove that every feasible point would need a
/// norm beyond `1e6·(1 + ‖x‖∞)`.
///
/// For any feasible `x`, `(Aᵀν + Gᵀλ)ᵀx ≤ bᵀν + hᵀλ` when `λ ⪰ 0`; a negative
/// right side with a nearly vanishing left coefficient rules out moderate `x`.
fn farkas_certificate<T: Scalar>(qp: &QuadProgram<T>, nu: &[T], lam: &[T], x_norm: T) -> bool {
    let t = norm_inf(nu).max(norm_inf(lam));
    if !(t > T::zero()) {
        return false;
    }
    let nu_hat: Vec<T> = nu.iter().map(|&v| v / t).collect();
    let lam_hat: Vec<T> = lam.iter().map(|&v| v / t).collect();
    let mut r = qp.a_eq.tr_matvec(&nu_hat);
    axpy(T::one(), &qp.a_in.tr_matvec(&lam_hat), &mut r);
    let g = dot(&qp.b_eq, &nu_hat) + dot(&qp.b_in, &lam_hat);
    g < T::zero() && -g > T::lit(1e6) * norm_inf(&r) * (T::one() + x_norm)
}

pub(super) fn run<T: Scalar>(qp: &QuadProgram<T>, opts: &SolverOptions<T>) -> IpmOutput<T> {
    let (n, p, q) = (qp.n(), qp.n_eq(), qp.n_in());
    let tol = opts.tol;
    let delta = opts.regularization;
    let half = T::lit(0.5);
    let c_scale = T::one() + norm_inf(&qp.c);
    let q_t = T::lit(q.max(1) as f64);
    let mut log = Vec::new();
    let mut lu_fallbacks = 0;

    let finish = |x, nu, lambda, status, iterations, lu_fallbacks, log| IpmOutput {
        x,
        nu,
        lambda,
        status,
        iterations,
        lu_fallbacks,
        log,
    };

    if n == 0 {
        return finish(vec![], vec![T::zero(); p], vec![T::zero(); q], QpStatus::Optimal, 0, 0, log);
    }

    let q_chol = if opts.log_iterates { Cholesky::factor(&qp.q) } else { None };

    // least-squares start: min ½xᵀQx + cᵀx + ½‖Gx − h‖² s.t. Ax = b
    let ones = vec![T::one(); q];
    let mut init = KktSystem::new(qp, &ones, delta);
    let mut rhs = qp.a_in.tr_matvec(&qp.b_in);
    for (r, &c) in rhs.iter_mut().zip(&qp.c) {
        *r -= c;
    }
    rhs.extend_from_slice(&qp.b_eq);
    let sol0 = match init.solve(&rhs) {
        Some(s) => s,
        None => return finish(vec![T::zero(); n], vec![T::zero(); p], vec![T::zero(); q], QpStatus::MaxIterations, 0, 1, log),
    };
    let mut x = sol0[..n].to_vec();
    let mut nu = sol0[n..].to_vec();
    let gx0 = qp.a_in.matvec(&x);
    let mut s: Vec<T> = qp.b_in.iter().zip(&gx0).map(|(&h, &g)| h - g).collect();
    let mut lam: Vec<T> = s.iter().map(|&v| -v).collect();
    for v in [&mut s, &mut lam] {
        let vmin = v.iter().fold(T::infinity(), |m, &a| m.min(a));
        if vmin < T::one() {
            let shift = T::one() - vmin;
            v.iter_mut().for_each(|a| *a += shift);
        }
    }

    let x_scale = T::one() + norm_inf(&x);
    let mut primal_history: Vec<T> = Vec::new();
    let mut step = T::zero();

    for it in 0..=opts.max_iter {
        // residuals
        let mut r_d = qp.q.matvec(&x);
        for (r, &c) in r_d.iter_mut().zip(&qp.c) {
            *r += c;
        }
        axpy(T::one(), &qp.a_eq.tr_matvec(&nu), &mut r_d);
        axpy(T::one(), &qp.a_in.tr_matvec(&lam), &mut r_d);
        let ax = qp.a_eq.matvec(&x);
        let r_e: Vec<T> = ax.iter().zip(&qp.b_eq).map(|(&a, &b)| a - b).collect();
        let gx = qp.a_in.matvec(&x);
        let r_i: Vec<T> = (0..q).map(|k| gx[k] + s[k] - qp.b_in[k]).collect();
        let mu = if q > 0 { dot(&s, &lam) / q_t } else { T::zero() };

        let dual_res = norm_inf(&r_d);
        let eq_res = norm_inf(&r_e);
        let in_res = (0..q).fold(T::zero(), |m, k| m.max(gx[k] - qp.b_in[k]));
        let comp = (0..q).fold(T::zero(), |a, k| a + (lam[k] * (qp.b_in[k] - gx[k])).abs());
        let primal_res = eq_res.max(norm_inf(&r_i));

        if opts.log_iterates {
            let dual_bound = q_chol.as_ref().map(|chol| {
                let mut v = qp.c.clone();
                axpy(T::one(), &qp.a_eq.tr_matvec(&nu), &mut v);
                axpy(T::one(), &qp.a_in.tr_matvec(&lam), &mut v);
                let qinv_v = chol.solve(&v);
                qp.c0 - half * dot(&v, &qinv_v) - dot(&qp.b_eq, &nu) - dot(&qp.b_in, &lam)
            });
            log.push(IterateLog {
                iteration: it,
                primal_objective: qp.objective(&x),
                dual_bound,
                mu,
                primal_residual: primal_res,
                dual_residual: dual_res,
                step,
            });
        }

        let margin = half;
        if dual_res <= margin * tol * c_scale
            && eq_res <= margin * tol
            && in_res <= margin * tol
            && comp <= margin * tol * q_t
        {
            return finish(x, nu, lam, QpStatus::Optimal, it, lu_fallbacks, log);
        }
        if it == opts.max_iter {
            break;
        }

        // divergence
        let dual_norm = norm_inf(&nu).max(norm_inf(&lam));
        if norm_inf(&x) > T::lit(1e10) * x_scale && primal_res <= tol * (T::one() + norm_inf(&x)) {
            return finish(x, nu, lam, QpStatus::Unbounded, it, lu_fallbacks, log);
        }
        primal_history.push(primal_res);
        let stalled = primal_history.len() > 5 && {
            let old = primal_history[primal_history.len() - 6];
            primal_res > T::lit(0.5) * old
        };
        if primal_res > tol && dual_norm > T::lit(1e6) && farkas_certificate(qp, &nu, &lam, norm_inf(&x)) {
            return finish(x, nu, lam, QpStatus::Infeasible, it, lu_fallbacks, log);
        }
        if primal_res > tol && stalled && dual_norm > T::lit(1e8) {
            return finish(x, nu, lam, QpStatus::Infeasible, it, lu_fallbacks, log);
        }
        if primal_res > tol && stalled && step < T::lit(1e-8) && it > 20 {
            return finish(x, nu, lam, QpStatus::Infeasible, it, lu_fallbacks, log);
        }

        let w: Vec<T> = (0..q).map(|k| lam[k] / s[k]).collect();
        let mut kkt = KktSystem::new(qp, &w, delta);

        // returns (dx, dν, ds, dλ) for a complementarity target r_c
        let mut newton = |r_c: &[T]| -> Option<Direction<T>> {
            // t = W r_i − r_c ./ s
            let t: Vec<T> = (0..q).map(|k| w[k] * r_i[k] - r_c[k] / s[k]).collect();
            let gt = qp.a_in.tr_matvec(&t);
            let mut rhs: Vec<T> = (0..n).map(|j| -r_d[j] - gt[j]).collect();
            rhs.extend(r_e.iter().map(|&v| -v));
            let sol = kkt.solve(&rhs)?;
            let dx = sol[..n].to_vec();
            let dnu = sol[n..].to_vec();
            let gdx = qp.a_in.matvec(&dx);
            let dlam: Vec<T> = (0..q).map(|k| w[k] * (gdx[k] + r_i[k]) - r_c[k] / s[k]).collect();
            let ds: Vec<T> = (0..q).map(|k| -r_i[k] - gdx[k]).collect();
            Some((dx, dnu, ds, dlam))
        };

        // predictor
        let r_aff: Vec<T> = (0..q).map(|k| s[k] * lam[k]).collect();
        let Some((_, _, ds_a, dl_a)) = newton(&r_aff) else {
            break;
        };
        let alpha_aff = max_step(&s, &ds_a).min(max_step(&lam, &dl_a));
        let sigma = if q > 0 && mu > T::zero() {
            let mu_aff = (0..q)
                .map(|k| (s[k] + alpha_aff * ds_a[k]) * (lam[k] + alpha_aff * dl_a[k]))
                .fold(T::zero(), |a, v| a + v)
                / q_t;
            (mu_aff / mu).powi(3).min(T::one())
        } else {
            T::zero()
        };

        // corrector
        let r_c: Vec<T> = (0..q)
            .map(|k| s[k] * lam[k] + ds_a[k] * dl_a[k] - sigma * mu)
            .collect();
        let Some((dx, dnu, ds, dlam)) = newton(&r_c) else {
            break;
        };
        if kkt.fallback_used {
            lu_fallbacks += 1;
        }
        let alpha_max = max_step(&s, &ds).min(max_step(&lam, &dlam));
        step = (T::lit(0.99) * alpha_max).min(T::one());
        if q == 0 {
            step = T::one();
        }
        axpy(step, &dx, &mut x);
        axpy(step, &dnu, &mut nu);
        axpy(step, &ds, &mut s);
        axpy(step, &dlam, &mut lam);
        let floor = T::min_positive_value();
        s.iter_mut().for_each(|v| *v = v.max(floor));
        lam.iter_mut().for_each(|v| *v = v.max(floor));
    }

    finish(x, nu, lam, QpStatus::MaxIterations, opts.max_iter, lu_fallbacks, log)
}
