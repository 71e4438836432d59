//! Objective metrics: mel-cepstral distortion, voiced F0 RMSE, V/UV error
//! rate, and per-dimension global-variance ratios, with corpus-level
//! aggregation into a report.

use ndarray::Array2;

use crate::features::SpeechParams;
use crate::{Error, Result};

/// Mel-cepstral distortion in dB, c0 excluded:
/// mean over frames of (10/ln 10) * sqrt(2 * sum_{d>=1} (a_d - b_d)^2).
pub fn mcd(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "mcep {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let t = a.nrows();
    if t == 0 {
        return Ok(0.0);
    }
    let scale = 10.0 / std::f64::consts::LN_10;
    let mut total = 0.0;
    for i in 0..t {
        let mut sq = 0.0;
        for d in 1..a.ncols() {
            let diff = a[[i, d]] - b[[i, d]];
            sq += diff * diff;
        }
        total += scale * (2.0 * sq).sqrt();
    }
    Ok(total / t as f64)
}

/// RMSE of F0 in Hz over frames voiced in BOTH parameter sets. When no
/// common voiced frame exists the distance is 0 with the flag set.
pub fn f0_rmse(a: &SpeechParams, b: &SpeechParams) -> Result<(f64, bool)> {
    if a.frames() != b.frames() {
        return Err(Error::FrameCountMismatch(format!(
            "{} vs {} frames",
            a.frames(),
            b.frames()
        )));
    }
    let mut sq = 0.0;
    let mut n = 0usize;
    for t in 0..a.frames() {
        if a.vuv[t] && b.vuv[t] {
            let diff = a.lf0[t].exp() - b.lf0[t].exp();
            sq += diff * diff;
            n += 1;
        }
    }
    if n == 0 {
        return Ok((0.0, true));
    }
    Ok(((sq / n as f64).sqrt(), false))
}

/// Fraction of frames whose voicing decisions differ.
pub fn vuv_error(a: &SpeechParams, b: &SpeechParams) -> Result<f64> {
    if a.frames() != b.frames() {
        return Err(Error::FrameCountMismatch(format!(
            "{} vs {} frames",
            a.frames(),
            b.frames()
        )));
    }
    if a.frames() == 0 {
        return Ok(0.0);
    }
    let differing = a
        .vuv
        .iter()
        .zip(b.vuv.iter())
        .filter(|(x, y)| x != y)
        .count();
    Ok(differing as f64 / a.frames() as f64)
}

/// Per-utterance evaluation record.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct UtteranceEval {
    pub id: String,
    pub frames: usize,
    pub mcd_db: f64,
    pub f0_rmse_hz: f64,
    pub no_common_voiced: bool,
    pub vuv_error: f64,
}

/// Corpus-level metrics. Means are frame-weighted.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EvalReport {
    pub utterances: Vec<UtteranceEval>,
    pub frames_compared: usize,
    pub mean_mcd_db: f64,
    pub mean_f0_rmse_hz: f64,
    pub mean_vuv_error: f64,
    /// Variance of each predicted mcep dimension (then lf0 last) over the
    /// whole corpus, relative to the reference.
    pub gv_ratio: Vec<f64>,
}

/// Compare aligned parameter pairs. Frame counts within each pair may
/// differ by up to `slack`; both sides are truncated to the common count.
pub fn evaluate_pairs(
    pairs: &[(String, SpeechParams, SpeechParams)],
    slack: usize,
) -> Result<EvalReport> {
    let mut utterances = Vec::with_capacity(pairs.len());
    let mut frames_compared = 0usize;
    let mut mcd_sum = 0.0;
    let mut f0_sq_sum = 0.0;
    let mut f0_count = 0usize;
    let mut vuv_diff = 0usize;
    let mut pred_rows: Vec<Vec<f64>> = Vec::new();
    let mut ref_rows: Vec<Vec<f64>> = Vec::new();

    for (id, pred, reference) in pairs {
        let diff = pred.frames().abs_diff(reference.frames());
        if diff > slack {
            return Err(Error::FrameCountMismatch(format!(
                "{}: {} vs {} frames (slack {})",
                id,
                pred.frames(),
                reference.frames(),
                slack
            )));
        }
        let t = pred.frames().min(reference.frames());
        let p = pred.truncated(t);
        let r = reference.truncated(t);
        let mcd_db = mcd(&p.mcep, &r.mcep)?;
        let (f0_hz, no_common) = f0_rmse(&p, &r)?;
        let vuv = vuv_error(&p, &r)?;
        utterances.push(UtteranceEval {
            id: id.clone(),
            frames: t,
            mcd_db,
            f0_rmse_hz: f0_hz,
            no_common_voiced: no_common,
            vuv_error: vuv,
        });
        frames_compared += t;
        mcd_sum += mcd_db * t as f64;
        for ti in 0..t {
            if p.vuv[ti] && r.vuv[ti] {
                let d = p.lf0[ti].exp() - r.lf0[ti].exp();
                f0_sq_sum += d * d;
                f0_count += 1;
            }
            if p.vuv[ti] != r.vuv[ti] {
                vuv_diff += 1;
            }
            let mut pr: Vec<f64> = p.mcep.row(ti).to_vec();
            pr.push(p.lf0[ti]);
            pred_rows.push(pr);
            let mut rr: Vec<f64> = r.mcep.row(ti).to_vec();
            rr.push(r.lf0[ti]);
            ref_rows.push(rr);
        }
    }

    let gv_ratio = if frames_compared > 0 {
        let dims = pred_rows[0].len();
        (0..dims)
            .map(|d| {
                let var = |rows: &[Vec<f64>]| {
                    let mean = rows.iter().map(|r| r[d]).sum::<f64>() / rows.len() as f64;
                    rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / rows.len() as f64
                };
                let rv = var(&ref_rows);
                if rv < 1e-12 {
                    1.0
                } else {
                    var(&pred_rows) / rv
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    Ok(EvalReport {
        utterances,
        frames_compared,
        mean_mcd_db: mcd_sum / frames_compared.max(1) as f64,
        mean_f0_rmse_hz: if f0_count > 0 {
            (f0_sq_sum / f0_count as f64).sqrt()
        } else {
            0.0
        },
        mean_vuv_error: vuv_diff as f64 / frames_compared.max(1) as f64,
        gv_ratio,
    })
}

impl EvalReport {
    /// Human-readable table; numbers formatted stably for byte-identical
    /// reruns.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("utterance            frames   mcd_db   f0_rmse_hz   vuv_err\n");
        for u in &self.utterances {
            out.push_str(&format!(
                "{:<20} {:>6} {:>8.4} {:>12.4} {:>9.4}{}\n",
                u.id,
                u.frames,
                u.mcd_db,
                u.f0_rmse_hz,
                u.vuv_error,
                if u.no_common_voiced {
                    "  [no common voiced frames]"
                } else {
                    ""
                }
            ));
        }
        out.push_str(&format!(
            "\nmean (frame-weighted): mcd {:.4} dB, f0 rmse {:.4} Hz, vuv error {:.4}\n",
            self.mean_mcd_db, self.mean_f0_rmse_hz, self.mean_vuv_error
        ));
        out.push_str(&format!("frames compared: {}\n", self.frames_compared));
        out
    }

    /// One JSON record per utterance followed by a summary record.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for u in &self.utterances {
            out.push_str(&serde_json::to_string(u).expect("serializable"));
            out.push('\n');
        }
        let summary = serde_json::json!({
            "summary": {
                "frames_compared": self.frames_compared,
                "mean_mcd_db": self.mean_mcd_db,
                "mean_f0_rmse_hz": self.mean_f0_rmse_hz,
                "mean_vuv_error": self.mean_vuv_error,
                "gv_ratio": self.gv_ratio,
            }
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array1};

    fn params(lf0_hz: &[f64], vuv: &[bool]) -> SpeechParams {
        let t = vuv.len();
        SpeechParams {
            mcep: Array2::zeros((t, 3)),
            lf0: Array1::from_vec(lf0_hz.iter().map(|&h| h.ln()).collect()),
            vuv: vuv.to_vec(),
            bap: Array2::zeros((t, 1)),
            frame_shift_ms: 10.0,
        }
    }

    #[test]
    fn mcd_examples() {
        let a = arr2(&[[1.0, 2.0, 3.0]]);
        assert_eq!(mcd(&a, &a).unwrap(), 0.0);

        // Single frame, one non-c0 coefficient differing by delta.
        let delta = 0.37;
        let b = arr2(&[[1.0, 2.0 + delta, 3.0]]);
        let expected = (10.0 / std::f64::consts::LN_10) * (2.0f64).sqrt() * delta;
        assert!((mcd(&a, &b).unwrap() - expected).abs() < 1e-12);

        // c0-only difference is invisible.
        let c = arr2(&[[9.0, 2.0, 3.0]]);
        assert_eq!(mcd(&a, &c).unwrap(), 0.0);

        let wrong = arr2(&[[0.0, 0.0]]);
        assert!(matches!(
            mcd(&a, &wrong),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn f0_rmse_examples() {
        let a = params(&[200.0, 200.0, 200.0], &[true, true, true]);
        assert_eq!(f0_rmse(&a, &a).unwrap(), (0.0, false));

        let b = params(&[210.0, 210.0, 210.0], &[true, true, true]);
        let (rmse, flag) = f0_rmse(&a, &b).unwrap();
        assert!((rmse - 10.0).abs() < 1e-9);
        assert!(!flag);

        let unvoiced = params(&[100.0, 100.0, 100.0], &[false, false, false]);
        assert_eq!(f0_rmse(&a, &unvoiced).unwrap(), (0.0, true));

        let short = params(&[200.0], &[true]);
        assert!(matches!(
            f0_rmse(&a, &short),
            Err(Error::FrameCountMismatch(_))
        ));
    }

    #[test]
    fn vuv_error_examples() {
        let a = params(&[200.0, 200.0], &[true, false]);
        assert_eq!(vuv_error(&a, &a).unwrap(), 0.0);
        let b = params(&[200.0, 200.0], &[false, true]);
        assert_eq!(vuv_error(&a, &b).unwrap(), 1.0);
        let c = params(&[200.0, 200.0], &[true, true]);
        assert_eq!(vuv_error(&a, &c).unwrap(), 0.5);
    }

    #[test]
    fn identical_pairs_evaluate_to_zero() {
        let a = params(&[150.0, 160.0, 170.0], &[true, true, false]);
        let report =
            evaluate_pairs(&[("u1".into(), a.clone(), a.clone())], 2).unwrap();
        assert_eq!(report.mean_mcd_db, 0.0);
        assert_eq!(report.mean_f0_rmse_hz, 0.0);
        assert_eq!(report.mean_vuv_error, 0.0);
        assert_eq!(report.frames_compared, 3);
    }

    #[test]
    fn pair_slack_is_enforced() {
        let a = params(&[150.0; 10], &[true; 10]);
        let b = params(&[150.0; 7], &[true; 7]);
        assert!(matches!(
            evaluate_pairs(&[("u".into(), a, b)], 2),
            Err(Error::FrameCountMismatch(_))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::{any, ProptestConfig};
        use proptest::{prop_assert, proptest};
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        fn random_mcep(seed: u64, t: usize, d: usize) -> Array2<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Array2::from_shape_fn((t, d), |_| rng.gen_range(-1.0..1.0))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            /// Restricted to the compared coefficients, mcd is a metric:
            /// symmetric, zero iff equal, triangle inequality.
            #[test]
            fn mcd_is_a_metric(seed in any::<u64>()) {
                let (t, d) = (4usize, 5usize);
                let a = random_mcep(seed, t, d);
                let b = random_mcep(seed ^ 1, t, d);
                let c = random_mcep(seed ^ 2, t, d);
                let ab = mcd(&a, &b).unwrap();
                let ba = mcd(&b, &a).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!(mcd(&a, &a).unwrap() == 0.0);
                prop_assert!(ab > 0.0);
                let ac = mcd(&a, &c).unwrap();
                let cb = mcd(&c, &b).unwrap();
                prop_assert!(ab <= ac + cb + 1e-12);
            }

            /// Reordering utterances permutes records but leaves the
            /// corpus means untouched.
            #[test]
            fn reordering_utterances_is_invariant(seed in any::<u64>()) {
                let mk = |s: u64, t: usize| {
                    let mut rng = ChaCha8Rng::seed_from_u64(s);
                    let vuv: Vec<bool> = (0..t).map(|_| rng.gen_bool(0.7)).collect();
                    let hz: Vec<f64> = (0..t).map(|_| rng.gen_range(100.0..300.0)).collect();
                    let mut p = super::params(&hz, &vuv);
                    p.mcep = random_mcep(s, t, 3);
                    p
                };
                let pairs: Vec<(String, SpeechParams, SpeechParams)> = (0..4)
                    .map(|i| {
                        let t = 3 + (seed ^ i) as usize % 5;
                        (format!("u{i}"), mk(seed ^ i, t), mk(seed ^ (i + 100), t))
                    })
                    .collect();
                let fwd = evaluate_pairs(&pairs, 2).unwrap();
                let mut rev_pairs = pairs.clone();
                rev_pairs.reverse();
                let rev = evaluate_pairs(&rev_pairs, 2).unwrap();
                prop_assert!((fwd.mean_mcd_db - rev.mean_mcd_db).abs() < 1e-12);
                prop_assert!((fwd.mean_f0_rmse_hz - rev.mean_f0_rmse_hz).abs() < 1e-12);
                prop_assert!((fwd.mean_vuv_error - rev.mean_vuv_error).abs() < 1e-12);
            }
        }
    }
}
