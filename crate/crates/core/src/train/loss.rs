use ndarray::{Array2, ArrayBase, ArrayView2, Data, Dimension};

use super::weak_form::{weak_terms, WeakFormConfig};
use super::TrainError;

fn check_same<S1, S2, D>(a: &ArrayBase<S1, D>, b: &ArrayBase<S2, D>) -> Result<(), TrainError>
where
    S1: Data<Elem = f64>,
    S2: Data<Elem = f64>,
    D: Dimension,
{
    if a.shape() != b.shape() {
        return Err(TrainError::Shape(format!(
            "shape {:?} does not match {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Mean of (a - b)² over all entries.
pub fn mse<S1, S2, D>(a: &ArrayBase<S1, D>, b: &ArrayBase<S2, D>) -> Result<f64, TrainError>
where
    S1: Data<Elem = f64>,
    S2: Data<Elem = f64>,
    D: Dimension,
{
    check_same(a, b)?;
    let n = a.len().max(1) as f64;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n)
}

/// Mean of |a - b| over all entries.
pub fn mae<S1, S2, D>(a: &ArrayBase<S1, D>, b: &ArrayBase<S2, D>) -> Result<f64, TrainError>
where
    S1: Data<Elem = f64>,
    S2: Data<Elem = f64>,
    D: Dimension,
{
    check_same(a, b)?;
    let n = a.len().max(1) as f64;
    Ok(a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
}

/// `total = loss_u + loss_wf`; `loss_wf` already carries the λ weight.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub loss_u: f64,
    pub loss_wf: f64,
}

/// Solution MSE plus weak-form residual MSE for predicted coefficients, with
/// the exact gradient of `total` with respect to every coefficient.
///
/// `f_nodal` follows the same convention as [`super::weak_residual`].
pub fn compute_loss(
    coefficients: ArrayView2<f64>,
    targets_u: ArrayView2<f64>,
    f_nodal: ArrayView2<f64>,
    cfg: &WeakFormConfig,
) -> Result<(LossBreakdown, Array2<f64>), TrainError> {
    let basis = &cfg.disc.basis;
    let (n, p) = (coefficients.nrows(), basis.num_points());
    if targets_u.dim() != (n, p) {
        return Err(TrainError::Shape(format!(
            "targets have shape {:?}, expected ({n}, {p})",
            targets_u.dim()
        )));
    }
    let terms = weak_terms(coefficients, f_nodal, cfg)?;
    let m = cfg.num_test_functions;

    let resid_u = &terms.u - &targets_u;
    let resid_wf = &terms.lhs - &terms.rhs;
    let count_u = (n * p).max(1) as f64;
    let count_wf = (n * m).max(1) as f64;
    let loss_u = resid_u.iter().map(|r| r * r).sum::<f64>() / count_u;
    let loss_wf = cfg.lambda_wf * resid_wf.iter().map(|r| r * r).sum::<f64>() / count_wf;

    let grad_u = resid_u * (2.0 / count_u);
    let grad_lhs = resid_wf * (2.0 * cfg.lambda_wf / count_wf);
    let (grad_u_wf, grad_ux) = terms.backprop_lhs(&grad_lhs, cfg);
    let grad_u = grad_u + grad_u_wf;
    let grad = grad_u.dot(basis.phi()) + grad_ux.dot(basis.dphi());

    Ok((
        LossBreakdown {
            total: loss_u + loss_wf,
            loss_u,
            loss_wf,
        },
        grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mse_values() {
        let v = array![1.0, -2.0, 3.5];
        assert_eq!(mse(&v, &v).unwrap(), 0.0);
        assert_eq!(mse(&array![1.0, 2.0], &array![0.0, 0.0]).unwrap(), 2.5);
        let a = array![[1.0, 2.0], [0.5, -1.0]];
        let b = array![[0.0, 1.0], [1.5, 2.0]];
        let c = 3.0;
        let scaled = mse(&(&a * c), &(&b * c)).unwrap();
        assert!((scaled - c * c * mse(&a, &b).unwrap()).abs() < 1e-14);
        assert!(mse(&array![1.0], &array![1.0, 2.0]).is_err());
    }

    #[test]
    fn mae_values() {
        let v = array![1.0, -2.0, 3.5];
        assert_eq!(mae(&v, &v).unwrap(), 0.0);
        assert_eq!(mae(&array![1.0, 2.0], &array![0.0, 0.0]).unwrap(), 1.5);
        let a = array![0.3, -1.0, 2.0];
        let b = array![1.0, 1.0, -1.0];
        assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
    }
}
