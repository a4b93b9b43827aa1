//! Dense convex quadratic programming.
//!
//! ```text
//!     minimize     ½ xᵀQx + cᵀx + c0
//!     subject to   A_eq x  = b_eq
//!                  A_in x <= b_in
//! ```
//!
//! Duals follow `Qx + c + A_eqᵀν + A_inᵀλ = 0` with `λ ⪰ 0`, so `ν` is the
//! negative sensitivity of the optimal value to `b_eq`.

mod ipm;
mod presolve;

use serde::{Deserialize, Serialize};

use crate::error::{Diagnosis, Error, Result};
use crate::linalg::{dot, norm_inf, Matrix, SymmetricEigen};
use crate::scalar::Scalar;

pub use presolve::{presolve, Presolved, TransformRecord};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_REGULARIZATION: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct QuadProgram<T> {
    pub q: Matrix<T>,
    pub c: Vec<T>,
    pub c0: T,
    pub a_eq: Matrix<T>,
    pub b_eq: Vec<T>,
    pub a_in: Matrix<T>,
    pub b_in: Vec<T>,
}

impl<T: Scalar> QuadProgram<T> {
    pub fn new(
        q: Matrix<T>,
        c: Vec<T>,
        c0: T,
        a_eq: Matrix<T>,
        b_eq: Vec<T>,
        a_in: Matrix<T>,
        b_in: Vec<T>,
    ) -> Result<Self> {
        let n = c.len();
        if q.rows() != n || q.cols() != n {
            return Err(Error::dimension(format!("Q is {}x{}, expected {n}x{n}", q.rows(), q.cols())));
        }
        if a_eq.cols() != n || a_eq.rows() != b_eq.len() {
            return Err(Error::dimension(format!(
                "A_eq is {}x{} with {} right-hand sides; expected {n} columns",
                a_eq.rows(),
                a_eq.cols(),
                b_eq.len()
            )));
        }
        if a_in.cols() != n || a_in.rows() != b_in.len() {
            return Err(Error::dimension(format!(
                "A_in is {}x{} with {} right-hand sides; expected {n} columns",
                a_in.rows(),
                a_in.cols(),
                b_in.len()
            )));
        }
        Ok(QuadProgram {
            q,
            c,
            c0,
            a_eq,
            b_eq,
            a_in,
            b_in,
        })
    }

    /// Program without constraint blocks.
    pub fn unconstrained(q: Matrix<T>, c: Vec<T>) -> Result<Self> {
        let n = c.len();
        Self::new(q, c, T::zero(), Matrix::zeros(0, n), vec![], Matrix::zeros(0, n), vec![])
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn n_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn n_in(&self) -> usize {
        self.b_in.len()
    }

    pub fn objective(&self, x: &[T]) -> T {
        let qx = self.q.matvec(x);
        T::lit(0.5) * dot(x, &qx) + dot(&self.c, x) + self.c0
    }

    /// Checks `Q` for symmetry and positive semidefiniteness.
    pub fn check_convex(&self) -> Result<()> {
        let scale = T::one() + self.q.max_abs();
        let sym_tol = T::lit(1e-10).max(T::epsilon() * T::lit(100.0)) * scale;
        if !self.q.is_symmetric(sym_tol) {
            return Err(Error::InvalidArgument("Q is not symmetric".into()));
        }
        if self.n() > 0 {
            let min_eig = SymmetricEigen::new(&self.q).min_value();
            let psd_tol = T::lit(1e-9).max(T::epsilon() * T::lit(100.0)) * scale;
            if min_eig < -psd_tol {
                return Err(Error::InvalidArgument(format!("Q is not positive semidefinite (eigenvalue {min_eig})")));
            }
        }
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !(finite(self.q.as_slice())
            && finite(&self.c)
            && finite(self.a_eq.as_slice())
            && finite(&self.b_eq)
            && finite(self.a_in.as_slice())
            && finite(&self.b_in))
        {
            return Err(Error::InvalidArgument("quadratic program has non-finite data".into()));
        }
        Ok(())
    }

    /// Multiplies the objective `(Q, c, c0)` by `k`.
    pub fn scaled_objective(&self, k: T) -> Self {
        let mut out = self.clone();
        out.q = self.q.scale(k);
        out.c = self.c.iter().map(|&v| v * k).collect();
        out.c0 = self.c0 * k;
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals<T> {
    /// `‖A_eq x − b_eq‖∞`
    pub primal_eq: T,
    /// `max(0, max(A_in x − b_in))`
    pub primal_in: T,
    /// `‖Qx + c + A_eqᵀν + A_inᵀλ‖∞`
    pub dual: T,
    /// `Σ |λᵢ (b_in − A_in x)ᵢ|`
    pub complementarity: T,
}

impl<T: Scalar> KktResiduals<T> {
    /// The optimality contract: stationarity within `tol·(1 + ‖c‖∞)`, primal
    /// feasibility within `tol`, complementarity within `tol·q`.
    pub fn within(&self, qp: &QuadProgram<T>, tol: T) -> bool {
        let q = T::lit(qp.n_in().max(1) as f64);
        self.dual <= tol * (T::one() + norm_inf(&qp.c))
            && self.primal_eq <= tol
            && self.primal_in <= tol
            && self.complementarity <= tol * q
    }
}

/// Evaluates the KKT residuals of `(x, ν, λ)` directly from the program data.
pub fn kkt_residuals<T: Scalar>(qp: &QuadProgram<T>, x: &[T], nu: &[T], lambda: &[T]) -> KktResiduals<T> {
    let mut grad = qp.q.matvec(x);
    for (g, &c) in grad.iter_mut().zip(&qp.c) {
        *g += c;
    }
    let eq_part = qp.a_eq.tr_matvec(nu);
    let in_part = qp.a_in.tr_matvec(lambda);
    let stationarity: Vec<T> = grad
        .iter()
        .zip(&eq_part)
        .zip(&in_part)
        .map(|((&g, &e), &i)| g + e + i)
        .collect();
    let ax = qp.a_eq.matvec(x);
    let primal_eq = ax.iter().zip(&qp.b_eq).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
    let gx = qp.a_in.matvec(x);
    let primal_in = gx.iter().zip(&qp.b_in).fold(T::zero(), |m, (&g, &h)| m.max(g - h));
    let complementarity = gx
        .iter()
        .zip(&qp.b_in)
        .zip(lambda)
        .fold(T::zero(), |acc, ((&g, &h), &l)| acc + (l * (h - g)).abs());
    KktResiduals {
        primal_eq,
        primal_in,
        dual: norm_inf(&stationarity),
        complementarity,
    }
}

/// One interior-point iterate, recorded when [`SolverOptions::log_iterates`] is set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterateLog<T> {
    pub iteration: usize,
    pub primal_objective: T,
    /// Lagrangian dual value `min_x L(x, ν, λ)`; present when `Q` is positive definite.
    pub dual_bound: Option<T>,
    pub mu: T,
    pub primal_residual: T,
    pub dual_residual: T,
    pub step: T,
}

#[derive(Clone, Debug)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    pub nu: Vec<T>,
    pub lambda: Vec<T>,
    pub objective: T,
    pub status: QpStatus,
    pub iterations: usize,
    pub kkt_residuals: KktResiduals<T>,
    /// Iterations whose `LDLᵀ` solve was replaced by pivoted LU.
    pub lu_fallbacks: usize,
    pub log: Vec<IterateLog<T>>,
}

#[derive(Clone, Debug)]
pub struct SolverOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Static diagonal regularization of the KKT matrix.
    pub regularization: T,
    pub log_iterates: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            tol: T::lit(DEFAULT_TOL),
            max_iter: DEFAULT_MAX_ITER,
            regularization: T::lit(DEFAULT_REGULARIZATION),
            log_iterates: false,
        }
    }
}

/// Solves with default regularization; see [`solve_with`].
pub fn solve<T: Scalar>(qp: &QuadProgram<T>, tol: T, max_iter: usize) -> Result<QpSolution<T>> {
    solve_with(
        qp,
        &SolverOptions {
            tol,
            max_iter,
            ..SolverOptions::default()
        },
    )
}

/// Presolves, runs the Mehrotra predictor-corrector iteration and maps the
/// result back to the original rows and columns.
///
/// Only malformed input is an `Err`; infeasible, unbounded and iteration-limit
/// outcomes are reported through [`QpSolution::status`].
pub fn solve_with<T: Scalar>(qp: &QuadProgram<T>, opts: &SolverOptions<T>) -> Result<QpSolution<T>> {
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    qp.check_convex()?;

    let Presolved { reduced, record } = match presolve(qp) {
        Ok(p) => p,
        Err(Error::Infeasible(_)) => {
            let x = vec![T::zero(); qp.n()];
            let nu = vec![T::zero(); qp.n_eq()];
            let lambda = vec![T::zero(); qp.n_in()];
            let kkt = kkt_residuals(qp, &x, &nu, &lambda);
            return Ok(QpSolution {
                objective: qp.objective(&x),
                x,
                nu,
                lambda,
                status: QpStatus::Infeasible,
                iterations: 0,
                kkt_residuals: kkt,
                lu_fallbacks: 0,
                log: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };

    let out = ipm::run(&reduced, opts);
    let (x, nu, lambda) = record.postsolve(qp, &out.x, &out.nu, &out.lambda);
    let kkt = kkt_residuals(qp, &x, &nu, &lambda);
    let mut status = out.status;
    if status == QpStatus::Optimal && !kkt.within(qp, opts.tol) {
        log::debug!("optimal on the reduced program but residuals {kkt:?} exceed tolerance on the original");
        status = QpStatus::MaxIterations;
    }
    Ok(QpSolution {
        objective: qp.objective(&x),
        x,
        nu,
        lambda,
        status,
        iterations: out.iterations,
        kkt_residuals: kkt,
        lu_fallbacks: out.lu_fallbacks,
        log: out.log,
    })
}

impl<T: Scalar> QpSolution<T> {
    /// Turns a non-optimal status into an error.
    pub fn into_optimal(self) -> Result<Self> {
        match self.status {
            QpStatus::Optimal => Ok(self),
            QpStatus::Infeasible => Err(Error::Infeasible(Diagnosis::Unknown)),
            QpStatus::Unbounded => Err(Error::Solver("problem is unbounded".into())),
            QpStatus::MaxIterations => Err(Error::Solver(format!(
                "iteration limit reached after {} iterations (residuals {:?})",
                self.iterations, self.kkt_residuals
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_qp(q: f64, c: f64, a_eq: Option<(f64, f64)>, a_in: Option<(f64, f64)>) -> QuadProgram<f64> {
        let (ae, be) = a_eq.map_or((Matrix::zeros(0, 1), vec![]), |(a, b)| (Matrix::from_row_slice(1, 1, &[a]), vec![b]));
        let (ai, bi) = a_in.map_or((Matrix::zeros(0, 1), vec![]), |(a, b)| (Matrix::from_row_slice(1, 1, &[a]), vec![b]));
        QuadProgram::new(Matrix::from_row_slice(1, 1, &[q]), vec![c], 0.0, ae, be, ai, bi).unwrap()
    }

    #[test]
    fn min_x_squared_above_one() {
        // min x² s.t. −x ≤ −1
        let qp = scalar_qp(2.0, 0.0, None, Some((-1.0, -1.0)));
        let sol = solve(&qp, 1e-10, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.lambda[0], 2.0, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn equality_dual_sign() {
        // min (x − 3)² = x² − 6x + 9 s.t. x = 1 → ν = 4
        let mut qp = scalar_qp(2.0, -6.0, Some((1.0, 1.0)), None);
        qp.c0 = 9.0;
        let sol = solve(&qp, 1e-10, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.nu[0], 4.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.objective, 4.0, epsilon = 1e-8);
    }

    #[test]
    fn infeasible_bounds() {
        // x ≤ 0 and −x ≤ −1
        let qp = QuadProgram::new(
            Matrix::from_row_slice(1, 1, &[2.0]),
            vec![0.0],
            0.0,
            Matrix::zeros(0, 1),
            vec![],
            Matrix::from_row_slice(2, 1, &[1.0, -1.0]),
            vec![0.0, -1.0],
        )
        .unwrap();
        let sol = solve(&qp, 1e-8, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn infeasible_via_iteration() {
        // x + y ≤ −1, x ≥ 0, y ≥ 0: no fixed variables, the interior-point loop must notice
        let qp = QuadProgram::new(
            Matrix::identity(2),
            vec![0.0, 0.0],
            0.0,
            Matrix::zeros(0, 2),
            vec![],
            Matrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
            vec![-1.0, 0.0, 0.0],
        )
        .unwrap();
        let sol = solve(&qp, 1e-8, 200).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        // min −x s.t. −x ≤ 0
        let qp = scalar_qp(0.0, -1.0, None, Some((-1.0, 0.0)));
        let sol = solve(&qp, 1e-8, 200).unwrap();
        assert_eq!(sol.status, QpStatus::Unbounded);
    }

    #[test]
    fn rejects_indefinite_q() {
        let qp = scalar_qp(-1.0, 0.0, None, None);
        assert!(solve(&qp, 1e-8, 10).is_err());
    }

    #[test]
    fn rejects_bad_dimensions() {
        let r = QuadProgram::new(
            Matrix::<f64>::identity(2),
            vec![0.0; 3],
            0.0,
            Matrix::zeros(0, 3),
            vec![],
            Matrix::zeros(0, 3),
            vec![],
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn iteration_limit() {
        let qp = scalar_qp(2.0, 0.0, None, Some((-1.0, -1.0)));
        let sol = solve(&qp, 1e-12, 1).unwrap();
        assert_eq!(sol.status, QpStatus::MaxIterations);
    }

    #[test]
    fn f32_solve() {
        let qp = QuadProgram::<f32>::new(
            Matrix::from_row_slice(1, 1, &[2.0]),
            vec![0.0],
            0.0,
            Matrix::zeros(0, 1),
            vec![],
            Matrix::from_row_slice(1, 1, &[-1.0]),
            vec![-1.0],
        )
        .unwrap();
        let sol = solve(&qp, 1e-4, 100).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-3);
        assert!((sol.lambda[0] - 2.0).abs() < 1e-2);
    }
}
