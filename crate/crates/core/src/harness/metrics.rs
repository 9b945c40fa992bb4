use crate::error::{Error, Result};

fn check(predictions: &[f64], actuals: &[f64]) -> Result<()> {
    if predictions.is_empty() {
        return Err(Error::usage("metrics need at least one prediction"));
    }
    if predictions.len() != actuals.len() {
        return Err(Error::usage(format!(
            "{} predictions for {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    check(predictions, actuals)?;
    let total: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a).abs())
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Root mean squared error.
pub fn rmse(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    check(predictions, actuals)?;
    let total: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((total / predictions.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 2.0);
        assert_eq!(rmse(&[0.0, 0.0], &[3.0, -4.0]).unwrap(), 12.5f64.sqrt());
    }

    #[test]
    fn bad_inputs() {
        assert!(mae(&[], &[]).is_err());
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = mae(&p, &a).unwrap();
            let r = rmse(&p, &a).unwrap();
            prop_assert!(m >= 0.0);
            prop_assert!(m <= r * (1.0 + 1e-12) + 1e-12);
        }
    }
}
