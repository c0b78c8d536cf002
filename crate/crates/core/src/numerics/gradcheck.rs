use crate::{Error, Result};

/// Maximum relative error between an analytic gradient and central finite
/// differences of `f` at `point`.
///
/// The step for coordinate `i` is `1e-5 · max(1, |xᵢ|)` and the relative
/// error is `|g − ĝ| / max(1e-8, |g| + |ĝ|)`.
pub fn grad_check<F>(mut f: F, point: &[f64], analytic: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if point.len() != analytic.len() {
        return Err(Error::Dimension {
            op: "grad_check",
            left: (point.len(), 1),
            right: (analytic.len(), 1),
        });
    }
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let xi = point[i];
        let h = 1e-5 * xi.abs().max(1.0);
        x[i] = xi + h;
        let up = f(&x);
        x[i] = xi - h;
        let down = f(&x);
        x[i] = xi;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("grad_check objective"));
        }
        let numeric = (up - down) / (2.0 * h);
        let g = analytic[i];
        let err = (g - numeric).abs() / (g.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}
