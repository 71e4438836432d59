use super::*;
use crate::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) fn sine(freq: f64, secs: f64, sr: u32, amp: f64) -> Waveform {
    let n = (secs * sr as f64).round() as usize;
    let samples = (0..n)
        .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
        .collect();
    Waveform::new(samples, sr)
}

fn sawtooth(freq: f64, secs: f64, sr: u32, amp: f64) -> Waveform {
    let n = (secs * sr as f64).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let phase = (freq * i as f64 / sr as f64).fract();
            amp * (2.0 * phase - 1.0)
        })
        .collect();
    Waveform::new(samples, sr)
}

fn white_noise(secs: f64, sr: u32, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (secs * sr as f64).round() as usize;
    // Approximately unit variance via a sum of uniforms.
    let samples = (0..n)
        .map(|_| {
            let s: f64 = (0..12).map(|_| rng.gen_range(0.0..1.0)).sum();
            s - 6.0
        })
        .collect();
    Waveform::new(samples, sr)
}

#[test]
fn frame_counts_follow_shift_arithmetic() {
    let cfg = AnalysisConfig::default();
    let one_sec = Waveform::new(vec![0.1; 16000], 16000);
    assert_eq!(frame_signal(&one_sec, &cfg).unwrap().len(), 100);
    let two_sec = Waveform::new(vec![0.1; 32000], 16000);
    assert_eq!(frame_signal(&two_sec, &cfg).unwrap().len(), 200);
}

#[test]
fn sub_frame_input_yields_one_padded_frame() {
    let cfg = AnalysisConfig::default();
    let tiny = Waveform::new(vec![0.5; 80], 16000); // 5 ms
    let frames = frame_signal(&tiny, &cfg).unwrap();
    assert_eq!(frames.len(), 1);
    assert_eq!(frames[0].len(), cfg.frame_samples());
    assert!(frames[0][100..].iter().all(|&v| v == 0.0));
}

#[test]
fn empty_waveform_is_rejected() {
    let cfg = AnalysisConfig::default();
    let empty = Waveform::new(vec![], 16000);
    assert!(matches!(
        frame_signal(&empty, &cfg),
        Err(Error::EmptyInput(_))
    ));
    assert!(matches!(analyze(&empty, &cfg), Err(Error::EmptyInput(_))));
}

#[test]
fn sine_200hz_is_tracked() {
    let cfg = AnalysisConfig::default();
    let wave = sine(200.0, 0.5, 16000, 0.5);
    let (f0, vuv) = estimate_f0(&wave, &cfg).unwrap();
    let voiced = vuv.iter().filter(|&&v| v).count();
    assert!(
        voiced as f64 >= 0.9 * vuv.len() as f64,
        "only {}/{} frames voiced",
        voiced,
        vuv.len()
    );
    for t in 0..f0.len() {
        if vuv[t] {
            assert!((f0[t] - 200.0).abs() < 2.0, "frame {}: f0 {}", t, f0[t]);
        } else {
            assert_eq!(f0[t], 0.0);
        }
    }
}

#[test]
fn silence_is_unvoiced() {
    let cfg = AnalysisConfig::default();
    let wave = Waveform::new(vec![0.0; 8000], 16000);
    let (f0, vuv) = estimate_f0(&wave, &cfg).unwrap();
    assert!(vuv.iter().all(|&v| !v));
    assert!(f0.iter().all(|&v| v == 0.0));
}

#[test]
fn white_noise_is_mostly_unvoiced() {
    let cfg = AnalysisConfig::default();
    let wave = white_noise(1.0, 16000, 07);
    let (_, vuv) = estimate_f0(&wave, &cfg).unwrap();
    let unvoiced_rate = vuv.iter().filter(|&&v| !v).count() as f64 / vuv.len() as f64;
    println!("measured noise unvoiced rate = {unvoiced_rate}");
    assert!(unvoiced_rate >= 0.8, "unvoiced rate {}", unvoiced_rate);
    // Regression value from the seeded reference run.
    assert!(
        (unvoiced_rate - NOISE_UNVOICED_RATE).abs() < 0.05,
        "unvoiced rate drifted: {} vs recorded {}",
        unvoiced_rate,
        NOISE_UNVOICED_RATE
    );
}

// Achieved rates/values from the seeded reference runs, frozen as
// regression guards.
const NOISE_UNVOICED_RATE: f64 = 1.0;
const SINE_BAP_DB: f64 = -56.19;

#[test]
fn flat_log_spectrum_maps_to_c0_only() {
    let warp = MelWarp::new(1024, 0.42, 39);
    let k = -1.7;
    let flat = vec![k; warp.bins()];
    let mcep = warp.mcep_from_log_spectrum(&flat);
    assert!((mcep[0] - k).abs() < 1e-12);
    for &c in &mcep[1..] {
        assert!(c.abs() < 1e-12);
    }
}

#[test]
fn silence_hits_the_spectral_floor() {
    let cfg = AnalysisConfig::default();
    let wave = Waveform::new(vec![0.0; 4800], 16000);
    let mcep = extract_mcep(&wave, &cfg).unwrap();
    let expected_c0 = cfg.spectral_floor.ln();
    for t in 0..mcep.nrows() {
        assert!((mcep[[t, 0]] - expected_c0).abs() < 1e-9);
        for d in 1..mcep.ncols() {
            assert!(mcep[[t, d]].abs() < 1e-9);
        }
    }
}

#[test]
fn c0_is_monotone_in_frame_energy() {
    let cfg = AnalysisConfig::default();
    let quiet = sine(220.0, 0.2, 16000, 0.1);
    let loud = sine(220.0, 0.2, 16000, 0.4);
    let mq = extract_mcep(&quiet, &cfg).unwrap();
    let ml = extract_mcep(&loud, &cfg).unwrap();
    // Doubling twice: the c0 gap should be ln 4 on interior frames.
    for t in 2..mq.nrows() - 2 {
        let gap = ml[[t, 0]] - mq[[t, 0]];
        assert!((gap - 4.0f64.ln()).abs() < 1e-6, "frame {}: gap {}", t, gap);
    }
}

/// Truncation-residual oracle: the envelope rebuilt from 40 coefficients
/// against the untruncated warped log spectrum of the same frame.
#[test]
fn sawtooth_envelope_survives_truncation_within_1db() {
    let cfg = AnalysisConfig::default();
    let wave = sawtooth(200.0, 0.3, 16000, 0.4);
    let frames = frame_signal(&wave, &cfg).unwrap();
    let warp = MelWarp::new(cfg.fft_size, cfg.warp_alpha, cfg.mcep_order);
    let spectrum = FrameSpectrum::new(&cfg);

    let frame = &frames[frames.len() / 2];
    let log_amp = spectrum.log_amplitude(frame, Some(200.0));

    let full = warp.warp_log_spectrum(&log_amp);
    let mcep = warp.mcep_from_log_spectrum(&log_amp);
    let trunc = warp.warped_envelope_from_mcep(&mcep);
    let mean_abs_nats = full
        .iter()
        .zip(trunc.iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / full.len() as f64;
    let mean_abs_db = mean_abs_nats * 20.0 / std::f64::consts::LN_10;
    assert!(mean_abs_db < 1.0, "mean truncation residual {} dB", mean_abs_db);
}

#[test]
fn all_unvoiced_bap_is_zero_db() {
    let cfg = AnalysisConfig::default();
    let wave = white_noise(0.3, 16000, 11);
    let t = frame_count(wave.len(), &cfg);
    let f0 = vec![0.0; t];
    let vuv = vec![false; t];
    let bap = extract_bap(&wave, &f0, &vuv, &cfg).unwrap();
    assert!(bap.iter().all(|&v| v == 0.0));
}

#[test]
fn pure_sine_is_nearly_periodic() {
    let cfg = AnalysisConfig::default();
    let wave = sine(200.0, 0.4, 16000, 0.5);
    let (f0, vuv) = estimate_f0(&wave, &cfg).unwrap();
    let bap = extract_bap(&wave, &f0, &vuv, &cfg).unwrap();
    let voiced_vals: Vec<f64> = (0..vuv.len()).filter(|&t| vuv[t]).map(|t| bap[[t, 0]]).collect();
    assert!(!voiced_vals.is_empty());
    let mean = voiced_vals.iter().sum::<f64>() / voiced_vals.len() as f64;
    println!("measured mean voiced sine bap = {mean} dB");
    assert!(mean <= -20.0, "mean voiced bap {} dB", mean);
    assert!(
        (mean - SINE_BAP_DB).abs() < 5.0,
        "bap drifted: {} vs recorded {}",
        mean,
        SINE_BAP_DB
    );
}

#[test]
fn bap_rejects_mismatched_streams() {
    let cfg = AnalysisConfig::default();
    let wave = Waveform::new(vec![0.1; 16000], 16000);
    let f0 = vec![0.0; 99];
    let vuv = vec![false; 99];
    assert!(matches!(
        extract_bap(&wave, &f0, &vuv, &cfg),
        Err(Error::FrameCountMismatch(_))
    ));
}

#[test]
fn lf0_interpolates_across_gaps() {
    let f0 = [200.0, 0.0, 0.0, 220.0];
    let vuv = [true, false, false, true];
    let lf0 = encode_lf0(&f0, &vuv, 60.0).unwrap();
    let delta = 220.0f64.ln() - 200.0f64.ln();
    let expected = [
        200.0f64.ln(),
        200.0f64.ln() + delta / 3.0,
        200.0f64.ln() + 2.0 * delta / 3.0,
        220.0f64.ln(),
    ];
    for (a, b) in lf0.iter().zip(expected.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn lf0_constant_cases() {
    let all_voiced = encode_lf0(&[100.0; 5], &[true; 5], 60.0).unwrap();
    assert!(all_voiced.iter().all(|v| (v - 100.0f64.ln()).abs() < 1e-12));
    let all_unvoiced = encode_lf0(&[0.0; 5], &[false; 5], 60.0).unwrap();
    assert!(all_unvoiced.iter().all(|v| (v - 60.0f64.ln()).abs() < 1e-12));
}

#[test]
fn lf0_holds_edges() {
    let f0 = [0.0, 150.0, 0.0];
    let vuv = [false, true, false];
    let lf0 = encode_lf0(&f0, &vuv, 60.0).unwrap();
    assert!(lf0.iter().all(|v| (v - 150.0f64.ln()).abs() < 1e-12));
}

#[test]
fn lf0_rejects_nonpositive_voiced_f0() {
    assert!(matches!(
        encode_lf0(&[0.0], &[true], 60.0),
        Err(Error::InvalidF0(_))
    ));
}

#[test]
fn analyze_shapes_are_coherent() {
    let cfg = AnalysisConfig::default();
    let wave = sine(200.0, 1.0, 16000, 0.5);
    let p = analyze(&wave, &cfg).unwrap();
    assert_eq!(p.frames(), 100);
    assert_eq!(p.mcep.shape(), &[100, 40]);
    assert_eq!(p.lf0.len(), 100);
    assert_eq!(p.bap.shape(), &[100, 1]);
    p.validate().unwrap();
}

#[test]
fn analyze_silence() {
    let cfg = AnalysisConfig::default();
    let wave = Waveform::new(vec![0.0; 8000], 16000);
    let p = analyze(&wave, &cfg).unwrap();
    assert!(p.vuv.iter().all(|&v| !v));
    assert!(p.bap.iter().all(|&v| v == 0.0));
}

#[test]
fn analyze_recovers_sine_pitch() {
    let cfg = AnalysisConfig::default();
    let wave = sine(200.0, 0.5, 16000, 0.5);
    let p = analyze(&wave, &cfg).unwrap();
    let voiced: Vec<f64> = (0..p.frames())
        .filter(|&t| p.vuv[t])
        .map(|t| p.lf0[t])
        .collect();
    assert!(voiced.len() * 2 > p.frames());
    let mean_hz = (voiced.iter().sum::<f64>() / voiced.len() as f64).exp();
    assert!((mean_hz - 200.0).abs() < 2.0, "mean voiced f0 {}", mean_hz);
}

#[test]
fn param_layout_round_trip() {
    let cfg = AnalysisConfig::default();
    let layout = ParamLayout::from_config(&cfg);
    assert_eq!(layout.total_dim(), 43);
    let wave = sine(180.0, 0.3, 16000, 0.4);
    let p = analyze(&wave, &cfg).unwrap();
    let m = p.to_matrix(&layout).unwrap();
    assert_eq!(m.shape(), &[p.frames(), 43]);
    let back = SpeechParams::from_matrix(&m, &layout).unwrap();
    assert_eq!(back.vuv, p.vuv);
    assert!(back
        .mcep
        .iter()
        .zip(p.mcep.iter())
        .all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn vuv_logit_tie_is_unvoiced() {
    let layout = ParamLayout {
        mcep_dim: 2,
        bap_dim: 1,
        f0_floor: 60.0,
        f0_ceil: 500.0,
        frame_shift_ms: 10.0,
    };
    let m = ndarray::arr2(&[[0.1, 0.2, 5.0, 0.0, -3.0]]);
    let p = SpeechParams::from_matrix(&m, &layout).unwrap();
    assert!(!p.vuv[0], "logit of exactly 0.0 must be unvoiced");
}

mod properties {
    use super::*;
    use proptest::prelude::{any, ProptestConfig, Strategy};
    use proptest::{prop_assert, prop_assert_eq, proptest};

    fn small_wave() -> impl Strategy<Value = Waveform> {
        (1usize..4000, any::<u64>()).prop_map(|(len, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = (0..len).map(|_| rng.gen_range(-0.9..0.9)).collect();
            Waveform::new(samples, 16000)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn streams_share_frame_count(wave in small_wave()) {
            let cfg = AnalysisConfig::default();
            let p = analyze(&wave, &cfg).unwrap();
            let t = frame_signal(&wave, &cfg).unwrap().len();
            prop_assert_eq!(p.frames(), t);
            prop_assert_eq!(p.mcep.nrows(), t);
            prop_assert_eq!(p.lf0.len(), t);
            prop_assert_eq!(p.bap.nrows(), t);
        }

        #[test]
        fn f0_voicing_consistency(wave in small_wave()) {
            let cfg = AnalysisConfig::default();
            let (f0, vuv) = estimate_f0(&wave, &cfg).unwrap();
            for t in 0..f0.len() {
                if vuv[t] {
                    prop_assert!(f0[t] >= cfg.f0_floor && f0[t] <= cfg.f0_ceil);
                } else {
                    prop_assert_eq!(f0[t], 0.0);
                }
            }
        }

        #[test]
        fn analysis_is_deterministic(wave in small_wave()) {
            let cfg = AnalysisConfig::default();
            let a = analyze(&wave, &cfg).unwrap();
            let b = analyze(&wave, &cfg).unwrap();
            prop_assert_eq!(a, b);
        }

        /// Truncation is a projection: a second pass is the identity.
        #[test]
        fn mcep_projection_is_idempotent(seed in any::<u64>()) {
            let warp = MelWarp::new(1024, 0.42, 39);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let half = 512usize;
            // Smooth synthetic spectrum: a short low-order cosine series.
            let coeffs: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let log_amp: Vec<f64> = (0..=half)
                .map(|k| {
                    let omega = std::f64::consts::PI * k as f64 / half as f64;
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(m, c)| c * (m as f64 * omega).cos())
                        .sum::<f64>()
                        - 2.0
                })
                .collect();
            let c1 = warp.mcep_from_log_spectrum(&log_amp);
            let l1 = warp.log_spectrum_from_mcep(&c1);
            let c2 = warp.mcep_from_log_spectrum(&l1);
            let max_diff = c1
                .iter()
                .zip(c2.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            prop_assert!(max_diff < 1e-6, "projection drift {}", max_diff);
        }

        #[test]
        fn pure_tone_recovery(freq in 100.0f64..400.0) {
            let cfg = AnalysisConfig::default();
            let wave = sine(freq, 0.3, 16000, 0.5);
            let (f0, vuv) = estimate_f0(&wave, &cfg).unwrap();
            let mut errs: Vec<f64> = (0..f0.len())
                .filter(|&t| vuv[t])
                .map(|t| (f0[t] - freq).abs() / freq)
                .collect();
            prop_assert!(!errs.is_empty());
            errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = errs[errs.len() / 2];
            prop_assert!(median < 0.01, "median rel err {} at {} Hz", median, freq);
        }
    }
}

#[test]
fn diag_c0() {
    let cfg = AnalysisConfig::default();
    for amp in [0.1, 0.4] {
        let w = sine(220.0, 0.2, 16000, amp);
        let (f0, vuv) = estimate_f0(&w, &cfg).unwrap();
        let m = extract_mcep(&w, &cfg).unwrap();
        println!("amp {}: f0[2]={:.9} vuv[2]={} c0[2]={:.6} c1[2]={:.6}", amp, f0[2], vuv[2], m[[2,0]], m[[2,1]]);
        println!("   vuv: {:?}", &vuv[..10]);
    }
}

#[test]
fn diag_c0_bins() {
    let cfg = AnalysisConfig::default();
    let spectrum = FrameSpectrum::new(&cfg);
    let mut spectra = Vec::new();
    for amp in [0.1, 0.4] {
        let w = sine(220.0, 0.2, 16000, amp);
        let frames = frame_signal(&w, &cfg).unwrap();
        spectra.push(spectrum.log_amplitude(&frames[2], Some(219.998959694)));
    }
    let ln4 = 4.0f64.ln();
    let mut bad = 0;
    for k in 0..spectra[0].len() {
        let d = spectra[1][k] - spectra[0][k];
        if (d - ln4).abs() > 1e-6 {
            if bad < 8 {
                println!("bin {k}: low {:.4} high {:.4} diff {:.4}", spectra[0][k], spectra[1][k], d);
            }
            bad += 1;
        }
    }
    println!("bins off ln4: {bad}/{}", spectra[0].len());
}
