use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_pcg::Pcg64;

use crate::error::{Error, Result};

/// Mean absolute percentage error, in percent.
pub fn mape(actuals: &[f64], predictions: &[f64]) -> Result<f64> {
    if actuals.len() != predictions.len() {
        return Err(Error::Data(format!(
            "{} actuals but {} predictions",
            actuals.len(),
            predictions.len()
        )));
    }
    if actuals.is_empty() {
        return Err(Error::Data("no values to score".into()));
    }
    let mut sum = 0.0;
    for (&a, &p) in actuals.iter().zip(predictions) {
        if a == 0.0 {
            return Err(Error::Data("zero actual value".into()));
        }
        sum += ((a - p) / a).abs();
    }
    Ok(100.0 * sum / actuals.len() as f64)
}

/// Quantile with linear interpolation between order statistics of `sorted`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Indices of labels inside the box-plot whiskers `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`.
pub fn iqr_keep(labels: &[f64]) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(Error::Data("cannot filter an empty dataset".into()));
    }
    let mut sorted = labels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    Ok((0..labels.len()).filter(|&i| labels[i] >= lo && labels[i] <= hi).collect())
}

/// Deterministic shuffled split; the first `floor(n * train_fraction)` rows train.
pub fn train_test_split(n: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut Pcg64::seed_from_u64(seed));
    let n_train = (n as f64 * train_fraction).floor() as usize;
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Sample mean and standard deviation (n - 1 denominator, 0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mape_values() {
        assert!((mape(&[10.0, 20.0], &[9.0, 22.0]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!((mape(&[58.492], &[8.582]).unwrap() - 85.33).abs() < 5e-3);
        assert!(mape(&[0.0], &[1.0]).is_err());
        assert!(mape(&[1.0], &[]).is_err());
    }

    #[test]
    fn iqr_drops_far_outlier() {
        let mut labels: Vec<f64> = (1..=100).map(f64::from).collect();
        labels.push(10_000.0);
        let keep = iqr_keep(&labels).unwrap();
        assert_eq!(keep.len(), 100);
        assert!(!keep.contains(&100));
        let uniform: Vec<f64> = (0..50).map(f64::from).collect();
        assert_eq!(iqr_keep(&uniform).unwrap().len(), 50);
        assert_eq!(iqr_keep(&[7.0; 9]).unwrap().len(), 9);
        assert!(iqr_keep(&[]).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (tr, te) = train_test_split(100, 0.75, 4);
        assert_eq!((tr.len(), te.len()), (75, 25));
        assert_eq!(train_test_split(100, 0.75, 4), (tr.clone(), te.clone()));
        assert_ne!(train_test_split(100, 0.75, 5).0, tr);
        let mut all: Vec<usize> = tr.into_iter().chain(te).collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn sample_statistics() {
        let (m, s) = mean_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_sd(&[3.0]), (3.0, 0.0));
    }

    proptest! {
        #[test]
        fn mape_is_zero_only_for_exact_predictions(
            a in prop::collection::vec(0.1f64..100.0, 1..20), noise in prop::collection::vec(-5.0f64..5.0, 20)
        ) {
            let p: Vec<f64> = a.iter().zip(&noise).map(|(x, e)| x + e).collect();
            let m = mape(&a, &p).unwrap();
            prop_assert!(m >= 0.0);
            prop_assert_eq!(m == 0.0, a == p);
        }
    }
}
