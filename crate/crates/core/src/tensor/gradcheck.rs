//! Central finite differences, the oracle for every hand-written backward pass.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `‖a - n‖₂ / max(‖a‖₂, ‖n‖₂)` for each named parameter group.
    pub per_parameter_errors: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_parameter_errors
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central-difference gradient of `f` with respect to every scalar in
/// `params`. `f` receives the full (perturbed) parameter list.
pub fn finite_diff_grad<F>(mut f: F, params: &[Vec<f64>], eps: f64) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[Vec<f64>]) -> Result<f64>,
{
    if !(eps > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {eps}")));
    }
    let mut work = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for g in 0..params.len() {
        let mut grad = Vec::with_capacity(params[g].len());
        for i in 0..params[g].len() {
            let orig = work[g][i];
            work[g][i] = orig + eps;
            let plus = f(&work)?;
            work[g][i] = orig - eps;
            let minus = f(&work)?;
            work[g][i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numerics(format!(
                    "objective not finite while perturbing group {g} entry {i}"
                )));
            }
            grad.push((plus - minus) / (2.0 * eps));
        }
        grads.push(grad);
    }
    Ok(grads)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Compare `analytic` gradients of named parameter groups against central
/// differences of `f`.
pub fn finite_diff_report<F>(
    f: F,
    names: &[String],
    params: &[Vec<f64>],
    analytic: &[Vec<f64>],
    eps: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Vec<f64>]) -> Result<f64>,
{
    let numeric = finite_diff_grad(f, params, eps)?;
    let mut per = Vec::with_capacity(names.len());
    for ((name, a), n) in names.iter().zip(analytic).zip(&numeric) {
        if a.len() != n.len() {
            return Err(Error::Shape(format!(
                "analytic gradient for {name} has {} entries, expected {}",
                a.len(),
                n.len()
            )));
        }
        // norm-wise, so entries whose true gradient is exactly zero (dead
        // ReLUs) do not turn round-off into a huge elementwise ratio
        let diff = a.iter().zip(n).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let scale = norm(a).max(norm(n)).max(1e-12);
        per.push((name.clone(), diff / scale));
    }
    let max_rel_error = per.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        per_parameter_errors: per,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let g = finite_diff_grad(|p| Ok(p[0][0] * p[0][0]), &[vec![3.0]], 1e-4).unwrap();
        assert!((g[0][0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn linear_is_exact() {
        let g = finite_diff_grad(|p| Ok(2.5 * p[0][0] - 4.0 * p[0][1]), &[vec![1.0, -2.0]], 1e-4)
            .unwrap();
        assert!((g[0][0] - 2.5).abs() < 1e-10);
        assert!((g[0][1] + 4.0).abs() < 1e-10);
    }

    #[test]
    fn report_max_is_max_of_groups() {
        let names = vec!["a".to_string(), "b".to_string()];
        let params = vec![vec![1.0], vec![2.0]];
        let analytic = vec![vec![2.0], vec![4.4]];
        let r = finite_diff_report(
            |p| Ok(p[0][0] * p[0][0] + p[1][0] * p[1][0]),
            &names,
            &params,
            &analytic,
            1e-5,
        )
        .unwrap();
        assert!(r.per_parameter_errors[0].1 < 1e-8);
        assert!((r.per_parameter_errors[1].1 - 0.4 / 4.4).abs() < 1e-6);
        assert_eq!(r.max_rel_error, r.per_parameter_errors[1].1);
        assert_eq!(r.worst().unwrap().0, "b");
    }

    #[test]
    fn zero_entries_do_not_dominate() {
        // d/dp1 of p0^2 is exactly zero; round-off must not fail the check
        let names = vec!["p".to_string()];
        let r = finite_diff_report(
            |p| Ok(1e3 * p[0][0] * p[0][0] + 0.0 * p[0][1]),
            &names,
            &[vec![0.7, 1.0]],
            &[vec![1.4e3, 0.0]],
            1e-6,
        )
        .unwrap();
        assert!(r.max_rel_error < 1e-7);
    }

    #[test]
    fn non_finite_objective_is_rejected() {
        let r = finite_diff_grad(|p| Ok(1.0 / (p[0][0] - p[0][0])), &[vec![1.0]], 1e-4);
        assert!(matches!(r, Err(Error::Numerics(_))));
        assert!(finite_diff_grad(|_| Ok(0.0), &[vec![1.0]], 0.0).is_err());
    }
}
