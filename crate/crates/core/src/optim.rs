//! Damped Gauss-Newton (Levenberg-Marquardt) minimizer.
//!
//! The objective supplies its value, gradient and a positive semidefinite
//! curvature matrix (Fisher information for likelihoods, `J^T W J` for
//! weighted least squares). Steps solve `(H + lambda diag(H)) d = -g` and
//! are accepted only when they lower the objective.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub curvature: DMatrix<f64>,
}

pub trait Objective {
    fn dim(&self) -> usize;

    /// Value, gradient and curvature; `None` outside the domain.
    fn evaluate(&self, x: &DVector<f64>) -> Option<Evaluation>;

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        self.evaluate(x).map(|e| e.value)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    /// Converged when the gradient infinity-norm drops below this.
    pub gradient_tolerance: f64,
    /// Converged when an accepted step changes the objective by less than
    /// this fraction.
    pub relative_tolerance: f64,
    /// Converged when a rejected step is below this size relative to `x`.
    pub step_tolerance: f64,
    pub max_iterations: usize,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-8,
            relative_tolerance: 1e-12,
            step_tolerance: 1e-11,
            max_iterations: 500,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    ObjectiveChange,
    StepSize,
    MaxIterations,
    InvalidStart,
    Diverged,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Termination::Gradient | Termination::ObjectiveChange | Termination::StepSize
        )
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Evaluation at `x`, present unless the start point was invalid.
    pub evaluation: Option<Evaluation>,
}

pub fn minimize<O: Objective + ?Sized>(
    objective: &O,
    start: DVector<f64>,
    options: &LmOptions,
) -> LmReport {
    let mut x = start;
    let Some(mut eval) = objective.evaluate(&x).filter(|e| e.value.is_finite()) else {
        return LmReport {
            value: f64::INFINITY,
            x,
            iterations: 0,
            termination: Termination::InvalidStart,
            evaluation: None,
        };
    };
    let n = x.len();
    let mut lambda = options.initial_damping;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        if eval.gradient.amax() < options.gradient_tolerance {
            termination = Termination::Gradient;
            break;
        }
        if lambda > 1e30 {
            termination = Termination::Diverged;
            break;
        }
        let diag_floor = eval
            .curvature
            .diagonal()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300)
            * 1e-14;
        let mut system = eval.curvature.clone();
        for i in 0..n {
            let d = eval.curvature[(i, i)].max(diag_floor);
            system[(i, i)] += lambda * d;
        }
        let Some(chol) = system.cholesky() else {
            lambda *= 10.0;
            continue;
        };
        let step = chol.solve(&(-&eval.gradient));
        let candidate = &x + &step;
        let accepted = objective
            .evaluate(&candidate)
            .filter(|e| e.value.is_finite() && e.value < eval.value);
        match accepted {
            Some(next) => {
                let change = (eval.value - next.value) / eval.value.abs().max(1e-300);
                x = candidate;
                eval = next;
                lambda = (lambda * 0.3).max(1e-12);
                if change < options.relative_tolerance {
                    termination = Termination::ObjectiveChange;
                    break;
                }
            }
            None => {
                if step.amax() <= options.step_tolerance * (1.0 + x.amax()) {
                    termination = Termination::StepSize;
                    break;
                }
                lambda *= 10.0;
            }
        }
    }

    LmReport {
        value: eval.value,
        x,
        iterations,
        termination,
        evaluation: Some(eval),
    }
}

/// Symmetric pseudo-inverse of a positive semidefinite matrix.
pub fn psd_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let cutoff = max_ev * 1e-13;
    let inv_ev = eig
        .eigenvalues
        .map(|v| if v > cutoff && v > 0.0 { 1.0 / v } else { 0.0 });
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&inv_ev) * q.transpose();
    (&out + out.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Rosenbrock as a least-squares problem: r = (1 - x, 10 (y - x^2)).
    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn evaluate(&self, p: &DVector<f64>) -> Option<Evaluation> {
            let (x, y) = (p[0], p[1]);
            let r = DVector::from_vec(vec![1.0 - x, 10.0 * (y - x * x)]);
            let j = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, -20.0 * x, 10.0]);
            Some(Evaluation {
                value: 0.5 * r.norm_squared(),
                gradient: j.transpose() * &r,
                curvature: j.transpose() * &j,
            })
        }
    }

    #[test]
    fn solves_rosenbrock() {
        let report = minimize(
            &Rosenbrock,
            DVector::from_vec(vec![-1.2, 1.0]),
            &LmOptions::default(),
        );
        assert!(report.termination.converged(), "{:?}", report.termination);
        assert!((report.x[0] - 1.0).abs() < 1e-6);
        assert!((report.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pseudo_inverse_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.0, 2.0]));
        let inv = psd_inverse(&m);
        assert!((inv[(0, 0)] - 0.25).abs() < 1e-15);
        assert_eq!(inv[(1, 1)], 0.0);
        assert!((inv[(2, 2)] - 0.5).abs() < 1e-15);
    }
}
