use lti_core::eval::{generate_synthetic, ChannelSpec, Injection, SyntheticSpec};
use lti_core::forecast::{Forecaster, SeasonalNaive};
use lti_core::lti::Lanes;
use lti_core::score::{calibrate, CalibrationOptions, Detector};
use lti_core::series::{fit_normalization, normalize, SECONDS_PER_HOUR};
use lti_core::{fit_decomposition, CivilClock, DecompositionConfig};

const NOISE: f64 = 0.5;
const SPIKE_AT: usize = 1100;

fn spec(seed: u64) -> SyntheticSpec {
    let channel = |name: &str, peak| ChannelSpec {
        daily_amplitude: 4.0,
        weekly_amplitude: 2.0,
        weekend_daily_factor: 0.5,
        peak_hour: peak,
        ..ChannelSpec::flat(name, 10.0)
    };
    SyntheticSpec {
        channels: vec![channel("a", 9.0), channel("b", 15.0)],
        length: 1200,
        start: 1_704_067_200,
        interval: SECONDS_PER_HOUR,
        noise_std: NOISE,
        injections: vec![Injection {
            index: SPIKE_AT,
            magnitude: 5.0 * NOISE,
            duration: 1,
            channels: vec![],
        }],
        seed,
        clock: CivilClock::utc(),
    }
}

#[test]
fn injected_spike_outscores_normal_frames() {
    for seed in 0..5 {
        let (raw, labels) = generate_synthetic(&spec(seed)).unwrap();
        let norm = fit_normalization(&raw.slice(0..800));
        let series = normalize(&raw, &norm).unwrap();
        let profile = fit_decomposition(&series.slice(0..800), &DecompositionConfig::default()).unwrap();
        let l = 5;
        let mut naive = SeasonalNaive::new(profile.clone(), SECONDS_PER_HOUR, l);
        let forecasts: Vec<_> = series.frames()[..1000].iter().map(|f| naive.forecast(f).unwrap()).collect();
        let (params, _) = calibrate(
            &series.frames()[800..1000],
            &forecasts[800..1000],
            &CalibrationOptions::default(),
        )
        .unwrap();

        let mut detector = Detector::new(SeasonalNaive::new(profile, SECONDS_PER_HOUR, l), params, Lanes::sequential()).unwrap();
        detector.run(&series.frames()[1000..]).unwrap();
        let stream = detector.into_stream();
        let mut normal = Vec::new();
        let mut spike = None;
        for r in &stream.records {
            let index = 1000 + r.t;
            if index == SPIKE_AT {
                spike = Some(r.anomaly_score);
            } else if !labels.anomalous[index] {
                normal.push(r.anomaly_score);
            }
        }
        normal.sort_by(f64::total_cmp);
        let p95 = normal[((normal.len() - 1) as f64 * 0.95).round() as usize];
        let spike = spike.unwrap();
        assert!(spike > p95, "seed {seed}: spike {spike} vs p95 {p95}");
    }
}
