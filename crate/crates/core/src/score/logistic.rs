use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logistic mapping parameters and their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringParams {
    /// Growth rate.
    pub k: f64,
    /// Midpoint.
    pub x0: f64,
    /// Dispersion multiplier, `k = c / stdev(LTI)`.
    pub c: f64,
    #[serde(default)]
    pub calibrated_on: Option<String>,
    #[serde(default)]
    pub iterations: usize,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            k: 1.0,
            x0: 0.5,
            c: 1.0,
            calibrated_on: None,
            iterations: 0,
        }
    }
}

impl ScoringParams {
    pub fn new(k: f64, x0: f64, c: f64) -> Result<Self> {
        let p = Self {
            k,
            x0,
            c,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("k must be positive, got {}", self.k)));
        }
        if !(0.0..=1.0).contains(&self.x0) {
            return Err(Error::Config(format!("x0 must lie in [0, 1], got {}", self.x0)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

/// `1 / (1 + e^{-k(x - x0)})`, never overflowing.
pub fn phi(x: f64, params: &ScoringParams) -> f64 {
    logistic(params.k * (x - params.x0))
}

pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn midpoint_and_example() {
        let p = ScoringParams::new(10.0, 0.5, 1.0).unwrap();
        assert_eq!(phi(0.5, &p), 0.5);
        let v = phi(0.7, &p);
        assert!((v - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.88080).abs() < 5e-6);
    }

    #[test]
    fn saturation() {
        let p = ScoringParams::new(10.0, 0.5, 1.0).unwrap();
        assert!((phi(0.5 + 100.0 / 10.0, &p) - 1.0).abs() < 1e-12);
        assert!(phi(0.5 - 100.0 / 10.0, &p).abs() < 1e-12);
        assert_eq!(phi(f64::MAX, &p), 1.0);
        assert_eq!(phi(-f64::MAX, &p), 0.0);
    }

    #[test]
    fn validation() {
        assert!(ScoringParams::new(0.0, 0.5, 1.0).is_err());
        assert!(ScoringParams::new(1.0, 1.5, 1.0).is_err());
        assert!(ScoringParams::new(1.0, 0.5, -1.0).is_err());
    }

    #[test]
    fn json_fields() {
        let mut p = ScoringParams::new(3.0, 0.25, 2.0).unwrap();
        p.calibrated_on = Some("validation".into());
        p.iterations = 7;
        let v: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        for key in ["k", "x0", "c", "calibrated_on", "iterations"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(ScoringParams::from_json(&p.to_json().unwrap()).unwrap(), p);
    }

    proptest! {
        #[test]
        fn strictly_increasing(a in 0.0..1.0f64, b in 0.0..1.0f64, k in 0.1..50.0f64) {
            let p = ScoringParams::new(k, 0.4, 1.0).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-6);
            prop_assert!(phi(lo, &p) < phi(hi, &p));
            prop_assert!((0.0..=1.0).contains(&phi(a, &p)));
        }
    }
}
