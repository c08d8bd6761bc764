use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};

/// Mean squared difference between two frames, without a square root.
pub fn dfdist(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ChannelMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(dfdist_unchecked(x, y))
}

#[inline]
pub(crate) fn dfdist_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        acc += d * d;
    }
    acc / x.len() as f64
}

fn check_pair<A: AsRef<[f64]>, B: AsRef<[f64]>>(a: &[A], b: &[B]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(())
}

/// Mean of [`dfdist`] over aligned frame pairs.
pub fn lsdist<A: AsRef<[f64]>, B: AsRef<[f64]>>(a: &[A], b: &[B]) -> Result<f64> {
    check_pair(a, b)?;
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += dfdist(x.as_ref(), y.as_ref())?;
    }
    Ok(acc / a.len() as f64)
}

/// Exponential recency weights `d_i = e^{-(L-i)}` and their prefix
/// normalizers `D_j = Σ_{i≤j} e^{-(j-i)}`, both indexed from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayVector {
    pub weights: Vec<f64>,
    pub normalizers: Vec<f64>,
}

impl DecayVector {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight of the `j`-th frame (0-based) of a window of length `len`.
    #[inline]
    pub fn weight(&self, len: usize, j: usize) -> f64 {
        self.weights[self.weights.len() - len + j]
    }

    /// `D_len`.
    #[inline]
    pub fn normalizer(&self, len: usize) -> f64 {
        self.normalizers[len - 1]
    }
}

fn build_decay(l: usize) -> DecayVector {
    let weights: Vec<f64> = (1..=l).map(|i| (-((l - i) as f64)).exp()).collect();
    let normalizers = (1..=l)
        .map(|j| (1..=j).map(|i| (-((j - i) as f64)).exp()).sum())
        .collect();
    DecayVector { weights, normalizers }
}

/// Decay weights for horizon `l`, cached per length.
pub fn decay_weights(l: usize) -> Result<DecayVector> {
    if l == 0 {
        return Err(Error::Config("decay length must be at least 1".into()));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, DecayVector>>> = OnceLock::new();
    let mut cache = CACHE.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    Ok(cache.entry(l).or_insert_with(|| build_decay(l)).clone())
}

/// Recency-weighted sequence distance. The last pair carries weight 1 and
/// each step back is discounted by `e^{-1}`.
pub fn wlsdist<A: AsRef<[f64]>, B: AsRef<[f64]>>(actual: &[A], predicted: &[B], decay: &DecayVector) -> Result<f64> {
    check_pair(actual, predicted)?;
    let len = actual.len();
    if len > decay.len() {
        return Err(Error::Shape(format!(
            "window of {len} frames exceeds decay length {}",
            decay.len()
        )));
    }
    let mut acc = 0.0;
    for (j, (x, y)) in actual.iter().zip(predicted).enumerate() {
        acc += decay.weight(len, j) * dfdist(x.as_ref(), y.as_ref())?;
    }
    Ok(acc / decay.normalizer(len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn dfdist_examples() {
        assert_eq!(dfdist(&[0.3, 0.9], &[0.3, 0.9]).unwrap(), 0.0);
        assert!(close(dfdist(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0, 1e-15));
        assert!(close(dfdist(&[0.3], &[0.7]).unwrap(), 0.16, 1e-15));
        assert!(matches!(dfdist(&[0.1], &[0.1, 0.2]), Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn lsdist_examples() {
        let a = [[0.0], [0.0]];
        let b = [[0.2], [0.4]];
        assert!(close(lsdist(&a, &b).unwrap(), 0.10, 1e-15));
        assert_eq!(lsdist(&a, &a).unwrap(), 0.0);
        assert_eq!(lsdist(&[[0.3]], &[[0.7]]).unwrap(), dfdist(&[0.3], &[0.7]).unwrap());
        assert!(matches!(lsdist(&a, &b[..1]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn decay_examples() {
        let d1 = decay_weights(1).unwrap();
        assert_eq!(d1.weights, vec![1.0]);
        assert_eq!(d1.normalizers, vec![1.0]);

        let d3 = decay_weights(3).unwrap();
        for (w, e) in d3.weights.iter().zip([0.13534, 0.36788, 1.0]) {
            assert!(close(*w, e, 5e-6));
        }
        assert!(close(d3.normalizer(3), 1.50321, 5e-6));

        let limit = 1.0 / (1.0 - (-1.0f64).exp());
        assert!(close(limit, 1.58198, 5e-6));
        assert!(close(decay_weights(20).unwrap().normalizer(20), limit, 1e-8));
        assert!(decay_weights(0).is_err());
    }

    #[test]
    fn decay_ratios() {
        let d = decay_weights(8).unwrap();
        assert_eq!(d.weights[7], 1.0);
        for w in d.weights.windows(2) {
            assert!(close(w[0] / w[1], (-1.0f64).exp(), 1e-14));
        }
    }

    #[test]
    fn wlsdist_examples() {
        let decay = decay_weights(5).unwrap();
        let a = [[0.0], [0.0]];
        let b = [[0.2], [0.4]];
        let e = (-1.0f64).exp();
        let expected = (e * 0.04 + 0.16) / (1.0 + e);
        let got = wlsdist(&a, &b, &decay).unwrap();
        assert!(close(got, expected, 1e-15));
        // Quoted to four significant figures; the exact value is 0.127727.
        assert!(close(got, 0.12770, 5e-5));
        assert!(close(got, 0.127727, 5e-7));
        assert_eq!(wlsdist(&a, &a, &decay).unwrap(), 0.0);
        assert!(close(wlsdist(&[[0.3]], &[[0.7]], &decay).unwrap(), 0.16, 1e-15));
        let empty: [[f64; 1]; 0] = [];
        assert!(matches!(wlsdist(&empty, &empty, &decay), Err(Error::EmptySequence)));
        let long = [[0.0]; 6];
        assert!(wlsdist(&long, &long, &decay).is_err());
    }

    #[test]
    fn recency_dominance() {
        let decay = decay_weights(4).unwrap();
        let base = vec![vec![0.5]; 4];
        let eps = 1e-3;
        let delta = |i: usize| {
            let mut p = base.clone();
            p[i][0] += eps;
            wlsdist(&base, &p, &decay).unwrap()
        };
        let last = delta(3);
        for i in 0..3 {
            let ratio = last / delta(i);
            assert!(close(ratio, ((3 - i) as f64).exp(), 1e-9));
        }
    }

    fn frames(len: usize, m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.0..=1.0f64, m), len)
    }

    proptest! {
        #[test]
        fn distances_bounded((a, b) in (1usize..8, 1usize..5).prop_flat_map(|(l, m)| (frames(l, m), frames(l, m)))) {
            let decay = decay_weights(8).unwrap();
            for v in [lsdist(&a, &b).unwrap(), wlsdist(&a, &b, &decay).unwrap(), dfdist(&a[0], &b[0]).unwrap()] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
