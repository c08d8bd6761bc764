//! Local trend inconsistency.
//!
//! For frame `t` every buffered source `i ∈ [t-L, t-1]` contributes the
//! recency-weighted distance between its forecast of frames `i+1..t` and the
//! actual frames, weighted by `1 - AS(i)`:
//!
//! ```text
//! LTI(t) = Σ (1 - AS(i)) · WLSDist(S(i+1,t), S_i(i+1,t)) / Σ (1 - AS(i))
//! ```
//!
//! [`lti_scalar`] evaluates this sum directly. [`lti_matrix`] evaluates the
//! same quantity as `P · N2 · N1 · D_F · T` over the incrementally maintained
//! frame-distance matrix, optionally spreading rows across worker lanes.

mod buffer;
mod distance;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use buffer::{BufferedSource, FrameDistanceMatrix, PredictionBuffer};
pub use distance::{decay_weights, dfdist, lsdist, wlsdist, DecayVector};

use crate::error::{Error, Result};

/// Smallest admissible `Z_t = Σ (1 - AS(i))`.
pub const Z_FLOOR: f64 = 1e-9;

/// LTI of one frame together with its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtiValue {
    pub t: usize,
    pub lti: f64,
    /// Per-source distances, oldest source first.
    pub wlsdist: Vec<f64>,
    pub z_t: f64,
}

/// Weighted mean of `terms` with weights `1 - AS(i)`.
pub fn combine_terms(anomaly_scores: &[f64], terms: &[f64]) -> Result<(f64, f64)> {
    if anomaly_scores.len() != terms.len() {
        return Err(Error::LengthMismatch {
            left: anomaly_scores.len(),
            right: terms.len(),
        });
    }
    if terms.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut z = 0.0;
    let mut acc = 0.0;
    for (a, w) in anomaly_scores.iter().zip(terms) {
        let p = 1.0 - a;
        z += p;
        acc += p * w;
    }
    if z < Z_FLOOR {
        return Err(Error::DegenerateWeights { z });
    }
    Ok((acc / z, z))
}

/// Direct evaluation at the buffer's newest frame `t`.
pub fn lti_scalar(t: usize, buffer: &PredictionBuffer, decay: &DecayVector) -> Result<LtiValue> {
    let terms = buffer.wlsdist_direct(t, decay)?;
    let (lti, z_t) = combine_terms(&buffer.anomaly_scores(), &terms)?;
    Ok(LtiValue {
        t,
        lti,
        wlsdist: terms,
        z_t,
    })
}

/// Matrix evaluation at the buffer's newest frame `t`.
pub fn lti_matrix(t: usize, buffer: &PredictionBuffer, decay: &DecayVector, lanes: &Lanes) -> Result<LtiValue> {
    let terms = wlsdist_matrix(t, buffer, decay, lanes)?;
    // P · N2 applied sequentially so the sum order never depends on lanes.
    let (lti, z_t) = combine_terms(&buffer.anomaly_scores(), &terms)?;
    Ok(LtiValue {
        t,
        lti,
        wlsdist: terms,
        z_t,
    })
}

/// `N1 · D_F · T`: one weighted distance per source row.
pub fn wlsdist_matrix(t: usize, buffer: &PredictionBuffer, decay: &DecayVector, lanes: &Lanes) -> Result<Vec<f64>> {
    buffer.check_for_matrix(t, decay)?;
    let l = buffer.horizon();
    let d_f = buffer.distances();
    let row = |k: usize| {
        let padded = d_f.padded_row(k);
        let mut acc = 0.0;
        for (df, w) in padded.iter().zip(&decay.weights) {
            acc += df * w;
        }
        acc * (1.0 / decay.normalizer(buffer.window_len(k)))
    };
    Ok(lanes.map_rows(d_f.rows(), l * l, row))
}

/// Worker lanes for per-row work. Rows are evaluated independently and
/// reduced in a fixed order, so results do not depend on the lane count.
#[derive(Clone)]
pub struct Lanes {
    count: usize,
    min_work: usize,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Lanes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Lanes")
            .field("count", &self.count)
            .field("min_work", &self.min_work)
            .finish()
    }
}

impl Default for Lanes {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Lanes {
    /// Work below this many multiply-adds runs on the calling thread.
    pub const DEFAULT_MIN_WORK: usize = 1 << 14;

    pub fn sequential() -> Self {
        Self {
            count: 1,
            min_work: Self::DEFAULT_MIN_WORK,
            pool: None,
        }
    }

    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("lanes must be at least 1".into()));
        }
        if count == 1 {
            return Ok(Self::sequential());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(count)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {count} lanes: {e}")))?;
        Ok(Self {
            count,
            min_work: Self::DEFAULT_MIN_WORK,
            pool: Some(Arc::new(pool)),
        })
    }

    pub fn with_min_work(mut self, min_work: usize) -> Self {
        self.min_work = min_work;
        self
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn map_rows<F>(&self, rows: usize, work: usize, f: F) -> Vec<f64>
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        match &self.pool {
            Some(pool) if work >= self.min_work => pool.install(|| (0..rows).into_par_iter().map(&f).collect()),
            _ => (0..rows).map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Frame;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Streams `l + extra + 1` random frames through a buffer and returns it
    /// positioned at a scorable frame.
    fn random_buffer(rng: &mut ChaCha8Rng, l: usize, m: usize, extra: usize) -> (PredictionBuffer, usize) {
        let mut b = PredictionBuffer::new(l, m).unwrap();
        let n = l + extra;
        for t in 0..=n {
            b.push_actual(Frame::new(t as i64, (0..m).map(|_| rng.random::<f64>()).collect()))
                .unwrap();
            if t == n {
                break;
            }
            let fc = (0..l).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
            b.push_forecast(fc, rng.random_range(0.0..0.95)).unwrap();
        }
        (b, n)
    }

    #[test]
    fn combine_terms_example() {
        let (lti, z) = combine_terms(&[0.0, 0.5], &[0.2, 0.4]).unwrap();
        assert!((lti - 0.4 / 1.5).abs() < 1e-15);
        assert!((lti - 0.26667).abs() < 5e-6);
        assert_eq!(z, 1.5);
        assert!(matches!(combine_terms(&[1.0, 1.0], &[0.2, 0.4]), Err(Error::DegenerateWeights { .. })));
    }

    #[test]
    fn uniform_terms_give_that_term() {
        let (lti, _) = combine_terms(&[0.0; 4], &[0.3; 4]).unwrap();
        assert!((lti - 0.3).abs() < 1e-15);
    }

    #[test]
    fn matrix_matches_scalar_on_random_buffers() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let lanes = Lanes::sequential();
        let mut worst: f64 = 0.0;
        for case in 0..1000 {
            let l = [2, 5, 10][case % 3];
            let m = [1, 3, 5][(case / 3) % 3];
            let extra = rng.random_range(0..8);
            let (b, t) = random_buffer(&mut rng, l, m, extra);
            let decay = decay_weights(l).unwrap();
            let s = lti_scalar(t, &b, &decay).unwrap();
            let x = lti_matrix(t, &b, &decay, &lanes).unwrap();
            worst = worst.max((s.lti - x.lti).abs());
        }
        assert!(worst <= 1e-12, "max deviation {worst}");
    }

    #[test]
    fn lanes_are_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (b, t) = random_buffer(&mut rng, 10, 5, 3);
        let decay = decay_weights(10).unwrap();
        let reference = lti_matrix(t, &b, &decay, &Lanes::sequential()).unwrap();
        for n in [1, 2, 4] {
            let lanes = Lanes::new(n).unwrap().with_min_work(0);
            let v = lti_matrix(t, &b, &decay, &lanes).unwrap();
            assert_eq!(v.lti.to_bits(), reference.lti.to_bits());
            assert_eq!(v.wlsdist, reference.wlsdist);
        }
    }

    #[test]
    fn exact_forecasts_give_zero() {
        let l = 3;
        let mut b = PredictionBuffer::new(l, 2).unwrap();
        let value = |t: usize| vec![(t % 5) as f64 / 5.0, 0.5];
        for t in 0..8 {
            b.push_actual(Frame::new(t as i64, value(t))).unwrap();
            if t >= l {
                let decay = decay_weights(l).unwrap();
                assert_eq!(lti_scalar(t, &b, &decay).unwrap().lti, 0.0);
                assert_eq!(lti_matrix(t, &b, &decay, &Lanes::sequential()).unwrap().lti, 0.0);
            }
            b.push_forecast((t + 1..=t + l).map(value).collect(), 0.9 * (t % 2) as f64).unwrap();
        }
    }

    #[test]
    fn window_lengths_follow_source_age() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (b, t) = random_buffer(&mut rng, 4, 2, 2);
        let lens: Vec<usize> = b.sources().map(|s| t - s.index).collect();
        assert_eq!(lens, vec![4, 3, 2, 1]);
        let decay = decay_weights(4).unwrap();
        let v = lti_scalar(t, &b, &decay).unwrap();
        let newest = b.sources().last().unwrap();
        let actual = &b.actuals().last().unwrap().values;
        assert!((v.wlsdist[3] - dfdist(actual, &newest.frames[0]).unwrap()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn lti_bounded(seed in any::<u64>(), l in 1usize..8, m in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (b, t) = random_buffer(&mut rng, l, m, 2);
            let v = lti_scalar(t, &b, &decay_weights(l).unwrap()).unwrap();
            prop_assert!((0.0..=1.0).contains(&v.lti));
            prop_assert!(v.wlsdist.iter().all(|w| (0.0..=1.0).contains(w)));
        }

        #[test]
        fn discounting_largest_term_never_raises_lti(
            terms in prop::collection::vec(0.0..=1.0f64, 2..10),
            scores in prop::collection::vec(0.0..0.9f64, 10),
            bump in 0.0..0.1f64,
        ) {
            let scores = &scores[..terms.len()];
            let argmax = (0..terms.len()).max_by(|&a, &b| terms[a].total_cmp(&terms[b])).unwrap();
            let (before, _) = combine_terms(scores, &terms).unwrap();
            let mut raised = scores.to_vec();
            raised[argmax] = (raised[argmax] + bump).min(1.0);
            let (after, _) = combine_terms(&raised, &terms).unwrap();
            prop_assert!(after <= before + 1e-15);
        }
    }
}
