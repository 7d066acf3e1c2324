/// Outcome of comparing an analytic gradient against central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Coordinate where `max_rel_err` was observed.
    pub worst_index: Option<usize>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub pass: bool,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Checks `loss_fn`'s gradient at `params`.
///
/// `loss_fn` returns `(loss, analytic_gradient)` and must be deterministic.
/// Every coordinate is perturbed by `±h`; the check passes iff the largest
/// relative error is at most `tol`. Coordinates whose gradient is tiny next to
/// the largest one are measured against `1e-6 · max|g|` instead of their own
/// magnitude, so round-off in near-zero entries is not reported as error.
pub fn grad_check<F>(mut loss_fn: F, params: &[f64], h: f64, tol: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = loss_fn(params);
    assert_eq!(analytic.len(), params.len(), "gradient length must match parameters");
    let mut p = params.to_vec();
    let mut numeric = Vec::with_capacity(p.len());
    let floor = 1e-6 * analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut max_rel_err = 0.0f64;
    let mut worst_index = None;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let (up, _) = loss_fn(&p);
        p[i] = orig - h;
        let (down, _) = loss_fn(&p);
        p[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let e = (analytic[i] - fd).abs() / analytic[i].abs().max(fd.abs()).max(floor).max(1e-8);
        let e = if e.is_nan() { f64::INFINITY } else { e };
        if worst_index.is_none() || e > max_rel_err {
            max_rel_err = e;
            worst_index = Some(i);
        }
        numeric.push(fd);
    }
    GradCheckReport {
        pass: max_rel_err <= tol,
        max_rel_err,
        worst_index,
        analytic,
        numeric,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_passes() {
        let r = grad_check(|p| (p[0] * p[0], vec![2.0 * p[0]]), &[3.0], 1e-4, 1e-6);
        assert!(r.pass, "{r:?}");
        assert!((r.numeric[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let r = grad_check(|p| (p[0] * p[0], vec![2.0 * p[0] * 1.1]), &[3.0], 1e-4, 1e-3);
        assert!(!r.pass);
        assert!(r.max_rel_err > 0.05);
    }

    #[test]
    fn near_zero_coordinates_use_scale_floor() {
        // The second coordinate's true gradient is 1e-12; round-off in the
        // difference quotient must not fail the check.
        let r = grad_check(
            |p| (p[0] * p[0] + 1e-12 * p[1], vec![2.0 * p[0], 1e-12]),
            &[3.0, 0.5],
            1e-6,
            1e-3,
        );
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 0.1).abs() < 1e-12);
    }
}
