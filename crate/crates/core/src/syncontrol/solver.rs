//! Least squares over the unit simplex.
//!
//! Minimizes `||y - X w||^2` subject to `w >= 0` and `sum(w) = 1` with a
//! Lawson–Hanson style active-set method. The passive set grows by the
//! coordinate with the most negative reduced gradient; each subproblem drops
//! the sign constraints, eliminates the sum constraint by expressing one
//! passive weight through the others, and is solved by SVD least squares.
//! Infeasible subproblem solutions are handled by stepping back to the
//! simplex boundary and releasing the coordinates that hit zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solution of a simplex-constrained least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexFit {
    pub weights: Vec<f64>,
    /// `sum_t (y_t - sum_j w_j x_jt)^2` at the returned weights.
    pub objective: f64,
    pub iterations: usize,
}

fn validate(y: &[f64], x: &DMatrix<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "treated series has {} months, donor matrix has {}",
            y.len(),
            x.nrows()
        )));
    }
    if y.len() < 2 {
        return Err(Error::InvalidInput(
            "at least two pre-treatment months are required".into(),
        ));
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidInput("donor pool is empty".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("treated series".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("donor matrix".into()));
    }
    Ok(())
}

pub(crate) fn objective(y: &[f64], x: &DMatrix<f64>, w: &[f64]) -> f64 {
    (0..y.len())
        .map(|t| {
            let fit: f64 = (0..x.ncols()).map(|j| x[(t, j)] * w[j]).sum();
            (y[t] - fit).powi(2)
        })
        .sum()
}

/// Fits simplex weights of the donor columns of `x` (months x donors) to `y`.
pub fn fit_simplex(y: &[f64], x: &DMatrix<f64>) -> Result<SimplexFit> {
    validate(y, x)?;
    let k = x.ncols();
    let t_len = y.len();
    let yv = DVector::from_column_slice(y);

    if k == 1 {
        let w = vec![1.0];
        return Ok(SimplexFit {
            objective: objective(y, x, &w),
            weights: w,
            iterations: 0,
        });
    }

    // Start from the best single donor.
    let start = (0..k)
        .map(|j| (j, (&yv - x.column(j)).norm_squared()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(j, _)| j)
        .expect("k >= 1");

    let scale = y.iter().chain(x.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
    let grad_tol = 1e-13 * scale * scale * t_len as f64;

    let mut w = vec![0.0; k];
    w[start] = 1.0;
    let mut passive = vec![start];
    let max_iter = 20 * k + 100;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        // Gradient of 0.5 * ||y - Xw||^2 is -X'(y - Xw).
        let wv = DVector::from_column_slice(&w);
        let resid = &yv - x * &wv;
        let grad = -(x.transpose() * &resid);

        let level = passive.iter().map(|&j| grad[j]).sum::<f64>() / passive.len() as f64;
        let entering = (0..k)
            .filter(|j| !passive.contains(j))
            .map(|j| (j, grad[j]))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let Some((t, gt)) = entering else { break };
        if gt >= level - grad_tol {
            break;
        }
        passive.push(t);

        let mut first = true;
        loop {
            let z = solve_equality_subproblem(&yv, x, &passive);
            if z.iter().all(|&v| v > 0.0) {
                w.iter_mut().for_each(|v| *v = 0.0);
                for (&j, &v) in passive.iter().zip(&z) {
                    w[j] = v;
                }
                break;
            }
            let t_pos = passive.len() - 1;
            if first && z[t_pos] <= 0.0 {
                // The entering coordinate does not move off zero: the
                // violation was rounding noise, so the current point is optimal.
                passive.pop();
                return Ok(finish(y, x, w, iterations));
            }
            first = false;
            // Step from w toward z until the first passive weight reaches zero.
            let mut alpha = 1.0f64;
            for (i, &j) in passive.iter().enumerate() {
                if z[i] <= 0.0 {
                    let denom = w[j] - z[i];
                    if denom > 0.0 {
                        alpha = alpha.min(w[j] / denom);
                    }
                }
            }
            for (i, &j) in passive.iter().enumerate() {
                w[j] += alpha * (z[i] - w[j]);
            }
            let zero_tol = 1e-14;
            let before = passive.len();
            passive.retain(|&j| w[j] > zero_tol);
            for (j, wj) in w.iter_mut().enumerate() {
                if !passive.contains(&j) {
                    *wj = 0.0;
                }
            }
            if passive.len() == before {
                // Rounding kept every weight strictly positive; drop the smallest.
                let (pos, _) = passive
                    .iter()
                    .enumerate()
                    .min_by(|a, b| w[*a.1].total_cmp(&w[*b.1]))
                    .expect("nonempty");
                let j = passive.remove(pos);
                w[j] = 0.0;
            }
            renormalize(&mut w);
            if passive.is_empty() {
                return Err(Error::Infeasible("active set emptied".into()));
            }
        }
    }
    Ok(finish(y, x, w, iterations))
}

fn renormalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
}

fn finish(y: &[f64], x: &DMatrix<f64>, mut w: Vec<f64>, iterations: usize) -> SimplexFit {
    w.iter_mut().for_each(|v| *v = v.max(0.0));
    renormalize(&mut w);
    SimplexFit {
        objective: objective(y, x, &w),
        weights: w,
        iterations,
    }
}

/// Minimizes `||y - X_P z||^2` subject only to `sum(z) = 1`.
///
/// The first passive column is the base `b`: with `z_b = 1 - sum(u)`, the
/// problem becomes unconstrained least squares of `y - x_b` on the columns
/// `x_j - x_b`.
fn solve_equality_subproblem(y: &DVector<f64>, x: &DMatrix<f64>, passive: &[usize]) -> Vec<f64> {
    let m = passive.len();
    if m == 1 {
        return vec![1.0];
    }
    let base = x.column(passive[0]);
    let rhs = y - base;
    let mut a = DMatrix::zeros(x.nrows(), m - 1);
    for (c, &j) in passive[1..].iter().enumerate() {
        a.set_column(c, &(x.column(j) - base));
    }
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = 1e-12 * max_sv.max(f64::MIN_POSITIVE);
    let u = svd
        .solve(&rhs, eps)
        .unwrap_or_else(|_| DVector::zeros(m - 1));
    let mut z = Vec::with_capacity(m);
    z.push(1.0 - u.sum());
    z.extend(u.iter().copied());
    z
}
