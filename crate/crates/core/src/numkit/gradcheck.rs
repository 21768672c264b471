use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate where the maximum occurred.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compares an analytic gradient against central differences.
///
/// `f` maps a flat parameter vector to `(loss, analytic gradient)`. The
/// numeric derivative uses the five-point central stencil
/// `(8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h`, grouped so that a
/// coordinate the loss ignores gets exactly zero. The error per
/// coordinate is `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn grad_check<F>(mut f: F, params: &[f64], eps: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (loss, analytic) = f(params);
    if !loss.is_finite() || analytic.iter().any(|g| !g.is_finite()) {
        return Err(Error::NumericFailure(
            "grad_check: non-finite loss or gradient at the base point".into(),
        ));
    }
    if analytic.len() != params.len() {
        return Err(Error::InvalidArgument(format!(
            "grad_check: gradient has {} entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }

    let mut p = params.to_vec();
    let mut eval = |p: &mut Vec<f64>, i: usize, delta: f64| -> Result<f64> {
        let saved = p[i];
        p[i] = saved + delta;
        let (v, _) = f(p);
        p[i] = saved;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NumericFailure(format!(
                "grad_check: non-finite loss at coordinate {i}"
            )))
        }
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: 0.0,
        coordinates: params.len(),
    };
    for i in 0..params.len() {
        let f2 = eval(&mut p, i, 2.0 * eps)?;
        let f1 = eval(&mut p, i, eps)?;
        let m1 = eval(&mut p, i, -eps)?;
        let m2 = eval(&mut p, i, -2.0 * eps)?;
        let numeric = (8.0 * (f1 - m1) - (f2 - m2)) / (12.0 * eps);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(1e-12);
        let rel = (a - numeric).abs() / denom;
        if rel > report.max_rel_error {
            report = GradCheckReport {
                max_rel_error: rel,
                worst_index: i,
                analytic: a,
                numeric,
                coordinates: params.len(),
            };
        }
    }
    Ok(report)
}
