//! Central finite differences in double precision, used as the gradient oracle.

/// Largest relative error found and where.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Central difference `(f(x+h·eᵢ) − f(x−h·eᵢ)) / 2h` for every coordinate.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, point: &[f64], h: f64) -> Vec<f64> {
    let mut x = point.to_vec();
    (0..x.len())
        .map(|i| central(&mut f, &mut x, i, h))
        .collect()
}

fn central(f: &mut impl FnMut(&[f64]) -> f64, x: &mut [f64], i: usize, h: f64) -> f64 {
    let orig = x[i];
    x[i] = orig + h;
    let plus = f(x);
    x[i] = orig - h;
    let minus = f(x);
    x[i] = orig;
    (plus - minus) / (2.0 * h)
}

/// Compares `analytic` against central differences of `f` at `point` over all coordinates.
pub fn finite_diff_check(
    f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
    h: f64,
) -> GradCheckReport {
    let all: Vec<usize> = (0..point.len()).collect();
    finite_diff_check_at(f, point, analytic, &all, h)
}

/// Like [`finite_diff_check`] but only over the listed coordinates.
pub fn finite_diff_check_at(
    mut f: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
    indices: &[usize],
    h: f64,
) -> GradCheckReport {
    assert_eq!(point.len(), analytic.len(), "gradient length mismatch");
    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: 0,
    };
    for &i in indices {
        let numeric = central(&mut f, &mut x, i, h);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = err.max(report.max_rel_error);
            report.worst_index = i;
        }
        report.checked += 1;
    }
    report
}
