use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossFamily {
    L1,
    L2,
}

/// Piecewise loss weighting over-prediction by `c_plus` and
/// under-prediction by `c_minus`. Equal weights of 1 give plain absolute or
/// squared error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub family: LossFamily,
    pub c_plus: f64,
    pub c_minus: f64,
}

impl LossSpec {
    pub fn symmetric(family: LossFamily) -> Self {
        Self {
            family,
            c_plus: 1.0,
            c_minus: 1.0,
        }
    }

    /// `c_plus / c_minus = ratio` with `c_minus = 1`.
    pub fn with_ratio(family: LossFamily, ratio: f64) -> Self {
        Self {
            family,
            c_plus: ratio,
            c_minus: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_plus > 0.0 && self.c_minus > 0.0 && self.c_plus.is_finite() && self.c_minus.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "loss weights must be positive, got c_plus = {}, c_minus = {}",
                self.c_plus, self.c_minus
            )))
        }
    }

    pub fn ratio(&self) -> f64 {
        self.c_plus / self.c_minus
    }
}

pub fn loss_value(spec: &LossSpec, y: f64, yhat: f64) -> f64 {
    let err = yhat - y;
    let weight = if yhat >= y { spec.c_plus } else { spec.c_minus };
    match spec.family {
        LossFamily::L1 => weight * err.abs(),
        LossFamily::L2 => weight * err * err,
    }
}

/// d loss / d yhat. The L1 kink at `yhat == y` takes subgradient 0.
pub fn loss_gradient(spec: &LossSpec, y: f64, yhat: f64) -> f64 {
    let err = yhat - y;
    match spec.family {
        LossFamily::L1 => {
            if err > 0.0 {
                spec.c_plus
            } else if err < 0.0 {
                -spec.c_minus
            } else {
                0.0
            }
        }
        LossFamily::L2 => {
            let weight = if yhat >= y { spec.c_plus } else { spec.c_minus };
            2.0 * weight * err
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn asym(family: LossFamily) -> LossSpec {
        LossSpec {
            family,
            c_plus: 5.0,
            c_minus: 1.0,
        }
    }

    #[test]
    fn overestimation_branch() {
        assert!((loss_value(&asym(LossFamily::L1), 49.5, 49.6) - 0.5).abs() < 1e-12);
        assert!((loss_value(&asym(LossFamily::L2), 49.5, 49.6) - 0.05).abs() < 1e-12);
        assert_eq!(loss_value(&asym(LossFamily::L1), 49.5, 49.5), 0.0);
        assert_eq!(loss_value(&asym(LossFamily::L2), 49.5, 49.5), 0.0);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(loss_gradient(&asym(LossFamily::L1), 0.0, 0.1), 5.0);
        assert!((loss_gradient(&asym(LossFamily::L2), 0.2, 0.0) - (-0.4)).abs() < 1e-12);
        assert_eq!(loss_gradient(&asym(LossFamily::L1), 1.0, 1.0), 0.0);
        assert_eq!(loss_gradient(&asym(LossFamily::L2), 1.0, 1.0), 0.0);
    }

    #[test]
    fn rejects_non_positive_weights() {
        let bad = LossSpec {
            family: LossFamily::L1,
            c_plus: 0.0,
            c_minus: 1.0,
        };
        assert!(bad.validate().is_err());
        assert!(asym(LossFamily::L2).validate().is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn symmetric_reduces_to_plain_losses(y in -100.0f64..100.0, yhat in -100.0f64..100.0) {
            let l1 = loss_value(&LossSpec::symmetric(LossFamily::L1), y, yhat);
            let l2 = loss_value(&LossSpec::symmetric(LossFamily::L2), y, yhat);
            prop_assert_eq!(l1, (y - yhat).abs());
            prop_assert_eq!(l2, (y - yhat) * (y - yhat));
        }

        #[test]
        fn gradient_matches_difference_quotient(y in -5.0f64..5.0, e in 1e-2f64..3.0, sign in proptest::bool::ANY,
                                                cp in 0.1f64..10.0, cm in 0.1f64..10.0, l2 in proptest::bool::ANY) {
            let spec = LossSpec { family: if l2 { LossFamily::L2 } else { LossFamily::L1 }, c_plus: cp, c_minus: cm };
            let yhat = if sign { y + e } else { y - e };
            let h = 1e-6;
            let fd = (loss_value(&spec, y, yhat + h) - loss_value(&spec, y, yhat - h)) / (2.0 * h);
            let g = loss_gradient(&spec, y, yhat);
            prop_assert!((fd - g).abs() <= 1e-5 * g.abs().max(1.0));
        }
    }
}
