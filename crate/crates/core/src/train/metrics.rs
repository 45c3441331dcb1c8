use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, NormStats};
use crate::nn::Network;

use super::trainer::network_inputs;
use super::TrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Relative ℓ² error of every sample with a nonzero solution, in row order.
    pub per_sample_rel_l2: Vec<f64>,
    /// Row index of each entry of `per_sample_rel_l2`.
    pub sample_indices: Vec<usize>,
    /// Rows with ‖u‖₂ = 0, left out of every statistic.
    pub excluded: Vec<usize>,
    pub mean_rel_l2: f64,
    pub median_rel_l2: f64,
    pub max_rel_l2: f64,
    pub mean_mae: f64,
    /// |u - û| per node for the first few samples.
    pub pointwise_errors: Vec<Vec<f64>>,
}

/// Compare nodal predictions against nodal truth.
pub fn evaluate_predictions(
    predicted: ArrayView2<f64>,
    truth: ArrayView2<f64>,
    pointwise_samples: usize,
) -> Result<Metrics, TrainError> {
    if predicted.dim() != truth.dim() {
        return Err(TrainError::Shape(format!(
            "predictions {:?} vs solutions {:?}",
            predicted.dim(),
            truth.dim()
        )));
    }
    let mut per_sample = Vec::with_capacity(truth.nrows());
    let mut indices = Vec::with_capacity(truth.nrows());
    let mut excluded = Vec::new();
    let mut mae_sum = 0.0;
    for (i, (p, u)) in predicted.rows().into_iter().zip(truth.rows()).enumerate() {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            excluded.push(i);
            continue;
        }
        let diff = p.iter().zip(u.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        per_sample.push(diff / norm);
        indices.push(i);
        mae_sum += p.iter().zip(u.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / u.len().max(1) as f64;
    }
    let count = per_sample.len();
    let (mean, median, max, mean_mae) = if count == 0 {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    } else {
        let mut sorted = per_sample.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if count % 2 == 1 {
            sorted[count / 2]
        } else {
            0.5 * (sorted[count / 2 - 1] + sorted[count / 2])
        };
        (
            per_sample.iter().sum::<f64>() / count as f64,
            median,
            sorted[count - 1],
            mae_sum / count as f64,
        )
    };
    let pointwise_errors = predicted
        .rows()
        .into_iter()
        .zip(truth.rows())
        .take(pointwise_samples)
        .map(|(p, u)| p.iter().zip(u.iter()).map(|(a, b)| (a - b).abs()).collect())
        .collect();
    Ok(Metrics {
        per_sample_rel_l2: per_sample,
        sample_indices: indices,
        excluded,
        mean_rel_l2: mean,
        median_rel_l2: median,
        max_rel_l2: max,
        mean_mae,
        pointwise_errors,
    })
}

/// Nodal solutions predicted by `net` for every row of `ds`.
pub fn predict_solutions(net: &Network, ds: &Dataset, input_norm: Option<&NormStats>) -> Result<Array2<f64>, TrainError> {
    let disc = ds.discretization().map_err(crate::dataset::DataError::from)?;
    let coeffs = net.predict(network_inputs(ds, input_norm).view())?;
    if coeffs.ncols() != disc.num_modes() {
        return Err(TrainError::Shape(format!(
            "network outputs {} coefficients, dataset has {} modes",
            coeffs.ncols(),
            disc.num_modes()
        )));
    }
    Ok(coeffs.dot(&disc.basis.phi().t()))
}

/// Run `net` on `ds` and score the reconstructed solutions.
pub fn evaluate(
    net: &Network,
    ds: &Dataset,
    input_norm: Option<&NormStats>,
    pointwise_samples: usize,
) -> Result<Metrics, TrainError> {
    let predicted = predict_solutions(net, ds, input_norm)?;
    evaluate_predictions(predicted.view(), ds.solutions.view(), pointwise_samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn exact_prediction_scores_zero() {
        let u = array![[1.0, 2.0, -1.0], [0.5, 0.0, 3.0]];
        let m = evaluate_predictions(u.view(), u.view(), 4).unwrap();
        assert_eq!(m.per_sample_rel_l2, vec![0.0, 0.0]);
        assert_eq!(m.mean_rel_l2, 0.0);
        assert_eq!(m.pointwise_errors.len(), 2);
    }

    #[test]
    fn zero_prediction_scores_one() {
        let u = array![[1.0, 2.0, -1.0], [0.5, 0.0, 3.0]];
        let m = evaluate_predictions(Array2::zeros((2, 3)).view(), u.view(), 0).unwrap();
        assert!(m.per_sample_rel_l2.iter().all(|&e| (e - 1.0).abs() < 1e-15));
    }

    #[test]
    fn scaled_prediction() {
        let u = array![[1.0, 2.0, -1.0], [0.5, 0.25, 3.0]];
        let m = evaluate_predictions((&u * 1.01).view(), u.view(), 1).unwrap();
        for e in &m.per_sample_rel_l2 {
            assert!((e - 0.01).abs() < 1e-14);
        }
        assert!((m.median_rel_l2 - 0.01).abs() < 1e-14);
    }

    #[test]
    fn zero_rows_excluded() {
        let u = array![[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]];
        let p = array![[1.0, 0.0], [1.0, 1.0], [1.0, 0.0]];
        let m = evaluate_predictions(p.view(), u.view(), 0).unwrap();
        assert_eq!(m.excluded, vec![0]);
        assert_eq!(m.sample_indices, vec![1, 2]);
        assert!((m.mean_rel_l2 - 0.25).abs() < 1e-15);
        assert_eq!(m.max_rel_l2, 0.5);
    }

    #[test]
    fn shape_mismatch() {
        assert!(evaluate_predictions(Array2::zeros((2, 3)).view(), Array2::zeros((3, 2)).view(), 0).is_err());
    }
}
