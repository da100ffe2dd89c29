use super::params::{assign_flat, flatten, ParamSet};
use crate::error::{Error, Result};

/// `|a - b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares an analytic gradient with central differences of `loss`,
/// coordinate by coordinate, and returns the largest relative error.
pub fn grad_check<P, F>(params: &P, analytic: &P, mut loss: F, step: f64) -> Result<f64>
where
    P: ParamSet + Clone,
    F: FnMut(&P) -> Result<f64>,
{
    let base = flatten(params);
    let grad = flatten(analytic);
    if base.len() != grad.len() {
        return Err(Error::shape("analytic gradient", base.len(), grad.len()));
    }
    if base.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("parameters".into()));
    }
    let mut probe = params.clone();
    let mut point = base.clone();
    let mut worst = 0.0f64;
    for k in 0..base.len() {
        point[k] = base[k] + step;
        assign_flat(&mut probe, &point)?;
        let up = loss(&probe)?;
        point[k] = base[k] - step;
        assign_flat(&mut probe, &point)?;
        let down = loss(&probe)?;
        point[k] = base[k];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let numeric = (up - down) / (2.0 * step);
        worst = worst.max(relative_error(grad[k], numeric));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    #[derive(Clone)]
    struct Lin(Array1<f64>);
    crate::nn::params::array_param_set!(Lin { 0 });

    // loss(w) = 0.5 (w·x - y)^2
    fn quad(w: &Lin) -> f64 {
        let x = array![0.5, -1.5, 2.0];
        0.5 * (w.0.dot(&x) - 0.7).powi(2)
    }

    fn quad_grad(w: &Lin) -> Lin {
        let x = array![0.5, -1.5, 2.0];
        Lin(&x * (w.0.dot(&x) - 0.7))
    }

    #[test]
    fn quadratic_is_exact() {
        let w = Lin(array![0.3, 0.1, -0.4]);
        let err = grad_check(&w, &quad_grad(&w), |p| Ok(quad(p)), 1e-5).unwrap();
        assert!(err <= 1e-7, "{err}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let w = Lin(array![0.3, 0.1, -0.4]);
        let mut g = quad_grad(&w);
        g.0[1] *= 2.0;
        let err = grad_check(&w, &g, |p| Ok(quad(p)), 1e-5).unwrap();
        assert!(err > 1e-1, "{err}");
    }

    #[test]
    fn non_finite_loss_errors() {
        let w = Lin(array![1.0]);
        let r = grad_check(&w, &Lin(array![0.0]), |_| Ok(f64::NAN), 1e-5);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
