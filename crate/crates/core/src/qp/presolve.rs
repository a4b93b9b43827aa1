use super::QuadProgram;
use crate::error::{Diagnosis, Error, Result};
use crate::linalg::{dot, norm_inf, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Presolved<T> {
    pub reduced: QuadProgram<T>,
    pub record: TransformRecord<T>,
}

/// Bound row pair that pinned a variable: (row, coefficient) for each side.
#[derive(Clone, Debug)]
struct FixedVar<T> {
    var: usize,
    value: T,
    upper: (usize, T),
    lower: (usize, T),
}

/// Enough bookkeeping to map a reduced solution back onto the original program.
#[derive(Clone, Debug)]
pub struct TransformRecord<T> {
    free_vars: Vec<usize>,
    fixed: Vec<FixedVar<T>>,
    kept_eq: Vec<usize>,
    kept_in: Vec<usize>,
    n: usize,
    p: usize,
    q: usize,
}

impl<T: Scalar> TransformRecord<T> {
    pub fn kept_eq(&self) -> &[usize] {
        &self.kept_eq
    }

    pub fn kept_in(&self) -> &[usize] {
        &self.kept_in
    }

    pub fn free_vars(&self) -> &[usize] {
        &self.free_vars
    }

    pub fn fixed_vars(&self) -> Vec<usize> {
        self.fixed.iter().map(|f| f.var).collect()
    }

    /// Expands a reduced primal-dual point. Dropped rows get zero duals; the
    /// bound duals of eliminated variables are rebuilt from stationarity.
    pub fn postsolve(
        &self,
        original: &QuadProgram<T>,
        x_red: &[T],
        nu_red: &[T],
        lam_red: &[T],
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let mut x = vec![T::zero(); self.n];
        for (&j, &v) in self.free_vars.iter().zip(x_red) {
            x[j] = v;
        }
        for f in &self.fixed {
            x[f.var] = f.value;
        }
        let mut nu = vec![T::zero(); self.p];
        for (&i, &v) in self.kept_eq.iter().zip(nu_red) {
            nu[i] = v;
        }
        let mut lambda = vec![T::zero(); self.q];
        for (&i, &v) in self.kept_in.iter().zip(lam_red) {
            lambda[i] = v;
        }
        if !self.fixed.is_empty() {
            let mut grad = original.q.matvec(&x);
            for (g, &c) in grad.iter_mut().zip(&original.c) {
                *g += c;
            }
            let e = original.a_eq.tr_matvec(&nu);
            let i = original.a_in.tr_matvec(&lambda);
            for f in &self.fixed {
                let g = grad[f.var] + e[f.var] + i[f.var];
                if g < T::zero() {
                    lambda[f.upper.0] = -g / f.upper.1;
                } else {
                    lambda[f.lower.0] = -g / f.lower.1;
                }
            }
        }
        (x, nu, lambda)
    }
}

fn single_nonzero<T: Scalar>(row: &[T]) -> Option<(usize, T)> {
    let mut found = None;
    for (j, &v) in row.iter().enumerate() {
        if v != T::zero() {
            if found.is_some() {
                return None;
            }
            found = Some((j, v));
        }
    }
    found
}

/// Removes fixed variables, zero and duplicate rows, and redundant equalities.
///
/// Inconsistent equalities or crossing bounds yield [`Error::Infeasible`].
pub fn presolve<T: Scalar>(qp: &QuadProgram<T>) -> Result<Presolved<T>> {
    let (n, p, q) = (qp.n(), qp.n_eq(), qp.n_in());
    let feas_tol = T::lit(1e-9).max(T::epsilon() * T::lit(100.0));
    let fix_tol = T::epsilon() * T::lit(10.0);

    // tightest single-variable bounds
    let mut upper: Vec<Option<(usize, T, T)>> = vec![None; n];
    let mut lower: Vec<Option<(usize, T, T)>> = vec![None; n];
    for i in 0..q {
        if let Some((j, a)) = single_nonzero(qp.a_in.row(i)) {
            let bound = qp.b_in[i] / a;
            if a > T::zero() {
                if upper[j].is_none_or(|(_, _, u)| bound < u) {
                    upper[j] = Some((i, a, bound));
                }
            } else if lower[j].is_none_or(|(_, _, l)| bound > l) {
                lower[j] = Some((i, a, bound));
            }
        }
    }

    let mut fixed = Vec::new();
    let mut is_fixed = vec![false; n];
    for j in 0..n {
        if let (Some((ui, ua, u)), Some((li, la, l))) = (upper[j], lower[j]) {
            let scale = T::one() + u.abs().max(l.abs());
            if u < l - feas_tol * scale {
                return Err(Error::Infeasible(Diagnosis::Unknown));
            }
            if u - l <= fix_tol * scale {
                is_fixed[j] = true;
                fixed.push(FixedVar {
                    var: j,
                    value: u,
                    upper: (ui, ua),
                    lower: (li, la),
                });
            }
        }
    }

    let free_vars: Vec<usize> = (0..n).filter(|&j| !is_fixed[j]).collect();
    let mut x_fixed = vec![T::zero(); n];
    for f in &fixed {
        x_fixed[f.var] = f.value;
    }

    let q_red = qp.q.select(&free_vars, &free_vars);
    let qx_fixed = qp.q.matvec(&x_fixed);
    let c_red: Vec<T> = free_vars.iter().map(|&j| qp.c[j] + qx_fixed[j]).collect();
    let c0_red = qp.c0 + dot(&qp.c, &x_fixed) + T::lit(0.5) * dot(&x_fixed, &qx_fixed);

    let eq_shift = qp.a_eq.matvec(&x_fixed);
    let in_shift = qp.a_in.matvec(&x_fixed);
    let all_eq: Vec<usize> = (0..p).collect();
    let all_in: Vec<usize> = (0..q).collect();
    let a_eq_free = qp.a_eq.select(&all_eq, &free_vars);
    let a_in_free = qp.a_in.select(&all_in, &free_vars);
    let b_eq_shift: Vec<T> = (0..p).map(|i| qp.b_eq[i] - eq_shift[i]).collect();
    let b_in_shift: Vec<T> = (0..q).map(|i| qp.b_in[i] - in_shift[i]).collect();

    // inequalities: drop zero rows, keep the tightest of exact duplicates
    let mut kept_in: Vec<usize> = Vec::new();
    for i in 0..q {
        let row = a_in_free.row(i);
        if row.iter().all(|&v| v == T::zero()) {
            if b_in_shift[i] < -feas_tol * (T::one() + qp.b_in[i].abs()) {
                return Err(Error::Infeasible(Diagnosis::Unknown));
            }
            continue;
        }
        match kept_in.iter().position(|&k| a_in_free.row(k) == row) {
            Some(pos) => {
                if b_in_shift[i] < b_in_shift[kept_in[pos]] {
                    kept_in[pos] = i;
                }
            }
            None => kept_in.push(i),
        }
    }
    kept_in.sort_unstable();

    let kept_eq = independent_rows(&a_eq_free, &b_eq_shift, feas_tol)?;

    let reduced = QuadProgram {
        q: q_red,
        c: c_red,
        c0: c0_red,
        a_eq: a_eq_free.select(&kept_eq, &(0..free_vars.len()).collect::<Vec<_>>()),
        b_eq: kept_eq.iter().map(|&i| b_eq_shift[i]).collect(),
        a_in: a_in_free.select(&kept_in, &(0..free_vars.len()).collect::<Vec<_>>()),
        b_in: kept_in.iter().map(|&i| b_in_shift[i]).collect(),
    };
    Ok(Presolved {
        reduced,
        record: TransformRecord {
            free_vars,
            fixed,
            kept_eq,
            kept_in,
            n,
            p,
            q,
        },
    })
}

/// Greedy row selection by Gram–Schmidt with reorthogonalization. Each basis
/// vector carries the right-hand side of the row combination that produced it,
/// so a dependent row can be tested for consistency.
fn independent_rows<T: Scalar>(a: &Matrix<T>, b: &[T], feas_tol: T) -> Result<Vec<usize>> {
    let rank_tol = T::lit(1e-9).max(T::epsilon() * T::lit(100.0));
    let mut basis: Vec<(Vec<T>, T)> = Vec::new();
    let mut kept = Vec::new();
    for i in 0..a.rows() {
        let row = a.row(i);
        let norm = norm2(row);
        if norm == T::zero() {
            if b[i].abs() > feas_tol * (T::one() + norm_inf(b)) {
                return Err(Error::Infeasible(Diagnosis::InconsistentEqualities));
            }
            continue;
        }
        let mut r = row.to_vec();
        let mut rb = b[i];
        for _pass in 0..2 {
            for (v, vb) in &basis {
                let coef = dot(&r, v);
                for (ri, &vi) in r.iter_mut().zip(v) {
                    *ri -= coef * vi;
                }
                rb -= coef * *vb;
            }
        }
        let rnorm = norm2(&r);
        if rnorm > rank_tol * norm {
            for ri in &mut r {
                *ri /= rnorm;
            }
            basis.push((r, rb / rnorm));
            kept.push(i);
        } else if rb.abs() > feas_tol * (T::one() + b[i].abs()) * T::lit(10.0) {
            return Err(Error::Infeasible(Diagnosis::InconsistentEqualities));
        }
    }
    Ok(kept)
}

fn norm2<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}
