//! Latent-linear-outcome simulations with a known Bayes rule.
//!
//! `ỹ = 210 + U·b + ε` with `U ~ N(0, I₄)`, `ε ~ N(0, 100²)` and
//! `b = (27.4, 13.7, 13.7, 13.7)`; the label is `1{ỹ ≥ c_y}` where `c_y` is
//! the analytic quantile giving the target prevalence. Learners see either
//! `U` itself or the nonlinear transform `g(U)`.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::data::{ColumnKind, DataError, Dataset};
use crate::loss::{decision_risk, LossSpec};
use crate::seed;

pub const INTERCEPT: f64 = 210.0;
pub const COEFFICIENTS: [f64; 4] = [27.4, 13.7, 13.7, 13.7];
pub const NOISE_SD: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("sample size must be at least 2, got {0}")]
    InvalidSize(usize),
    #[error("target prevalence must lie in (0, 1), got {0}")]
    InvalidPrevalence(f64),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("writing sample: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    /// Learners observe `U`.
    ObservedU,
    /// Learners observe `g(U)`.
    TransformedX,
}

impl Setting {
    pub fn name(self) -> &'static str {
        match self {
            Setting::ObservedU => "setting1",
            Setting::TransformedX => "setting2",
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "setting1" | "observed_u" => Ok(Setting::ObservedU),
            "setting2" | "transformed_x" => Ok(Setting::TransformedX),
            other => Err(format!("unknown simulation setting `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub setting: Setting,
    pub seed: u64,
    pub target_prevalence: f64,
}

impl SimConfig {
    pub fn new(n: usize, setting: Setting, seed: u64) -> Self {
        Self {
            n,
            setting,
            seed,
            target_prevalence: 0.30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimSample {
    pub dataset: Dataset,
    pub latent_u: Array2<f64>,
    /// `P(Y = 1 | U)` for each row.
    pub bayes_score: Vec<f64>,
    pub outcome_cutoff: f64,
}

/// Marginal standard deviation of `ỹ`.
pub fn outcome_sd() -> f64 {
    (COEFFICIENTS.iter().map(|b| b * b).sum::<f64>() + NOISE_SD * NOISE_SD).sqrt()
}

/// Cutoff `c_y` with `P(ỹ ≥ c_y) = prevalence`.
pub fn outcome_cutoff(prevalence: f64) -> Result<f64, SimError> {
    if !(prevalence > 0.0 && prevalence < 1.0) {
        return Err(SimError::InvalidPrevalence(prevalence));
    }
    let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - prevalence);
    Ok(INTERCEPT + outcome_sd() * z)
}

/// `P(ε ≥ c_y − 210 − u·b)`.
pub fn bayes_score(u: &[f64], cutoff: f64) -> f64 {
    let lin: f64 = u.iter().zip(COEFFICIENTS).map(|(a, b)| a * b).sum();
    let z = (cutoff - INTERCEPT - lin) / NOISE_SD;
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// The nonlinear transform of the second setting.
pub fn transform(u: &[f64]) -> [f64; 4] {
    [
        (u[0] / 2.0).exp(),
        u[1] / (1.0 + u[0].exp()) + 10.0,
        (u[0] * u[2] / 25.0 + 0.6).powi(3),
        (u[1] + u[3] + 20.0).powi(2),
    ]
}

pub fn generate(cfg: &SimConfig) -> Result<SimSample, SimError> {
    if cfg.n < 2 {
        return Err(SimError::InvalidSize(cfg.n));
    }
    let cutoff = outcome_cutoff(cfg.target_prevalence)?;
    let mut u_rng = seed::stream(cfg.seed, 1);
    let mut e_rng = seed::stream(cfg.seed, 2);
    let latent_u = Array2::from_shape_fn((cfg.n, 4), |_| u_rng.sample::<f64, _>(StandardNormal));
    let mut labels = Vec::with_capacity(cfg.n);
    let mut scores = Vec::with_capacity(cfg.n);
    for row in latent_u.rows() {
        let u = row.as_slice().expect("standard layout");
        let eps: f64 = e_rng.sample(StandardNormal);
        let y = INTERCEPT + u.iter().zip(COEFFICIENTS).map(|(a, b)| a * b).sum::<f64>() + NOISE_SD * eps;
        labels.push(u8::from(y >= cutoff));
        scores.push(bayes_score(u, cutoff));
    }
    let (features, prefix) = match cfg.setting {
        Setting::ObservedU => (latent_u.clone(), "u"),
        Setting::TransformedX => {
            let mut x = Array2::zeros((cfg.n, 4));
            for (i, row) in latent_u.rows().into_iter().enumerate() {
                let g = transform(row.as_slice().expect("standard layout"));
                for j in 0..4 {
                    x[[i, j]] = g[j];
                }
            }
            (x, "x")
        }
    };
    let names = (1..=4).map(|j| format!("{prefix}{j}")).collect();
    let dataset = Dataset::new(features, labels, vec![ColumnKind::Continuous; 4], names)?;
    Ok(SimSample {
        dataset,
        latent_u,
        bayes_score: scores,
        outcome_cutoff: cutoff,
    })
}

/// Empirical risk of `1{P(Y=1|U) ≥ 1 − λ}` on the sample.
pub fn bayes_rule_risk(s: &SimSample, spec: LossSpec) -> f64 {
    let cut = 1.0 - spec.lambda();
    let decisions: Vec<u8> = s.bayes_score.iter().map(|&p| u8::from(p >= cut)).collect();
    decision_risk(s.dataset.labels(), &decisions, spec)
        .expect("sample is non-empty with matching lengths")
        .risk
}

/// Observed features, latent `U`, the true score and the label.
pub fn write_csv(s: &SimSample, path: impl AsRef<Path>) -> Result<(), SimError> {
    let io = |e: csv::Error| SimError::Io(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header: Vec<String> = s.dataset.column_names().to_vec();
    header.extend(["latent_u1", "latent_u2", "latent_u3", "latent_u4", "bayes_score", "label"].map(String::from));
    w.write_record(&header).map_err(io)?;
    let x = s.dataset.features();
    for i in 0..s.dataset.n() {
        let mut rec: Vec<String> = x.row(i).iter().map(f64::to_string).collect();
        rec.extend(s.latent_u.row(i).iter().map(f64::to_string));
        rec.push(s.bayes_score[i].to_string());
        rec.push(s.dataset.labels()[i].to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn cutoff_matches_monte_carlo_quantile() {
        let c = outcome_cutoff(0.3).unwrap();
        assert!((outcome_sd() - 11313.83f64.sqrt()).abs() < 1e-9);
        assert!((c - 265.78).abs() < 0.01, "{c}");
        // empirical 70% quantile of 10⁷ draws; the standard error is about 0.05
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut draws: Vec<f64> = (0..10_000_000)
            .map(|_| {
                let mut y = INTERCEPT + NOISE_SD * rng.sample::<f64, _>(StandardNormal);
                for b in COEFFICIENTS {
                    y += b * rng.sample::<f64, _>(StandardNormal);
                }
                y
            })
            .collect();
        let (_, &mut q, _) = draws.select_nth_unstable_by(7_000_000, f64::total_cmp);
        assert!((q - c).abs() < 0.2, "{q} vs {c}");
    }

    #[test]
    fn origin_score() {
        let c = outcome_cutoff(0.3).unwrap();
        let expected = 1.0 - Normal::new(0.0, 1.0).unwrap().cdf((c - 210.0) / 100.0);
        assert!((bayes_score(&[0.0; 4], c) - expected).abs() < 1e-14);
    }

    #[test]
    fn prevalence_and_reproducibility() {
        let cfg = SimConfig::new(10_000, Setting::TransformedX, 3);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.dataset, b.dataset);
        assert!((a.dataset.prevalence() - 0.3).abs() < 0.015);
        assert!(a.bayes_score.iter().all(|&p| p > 0.0 && p < 1.0));
        let other = generate(&SimConfig::new(10_000, Setting::TransformedX, 4)).unwrap();
        assert_ne!(a.dataset, other.dataset);
    }

    #[test]
    fn settings_share_latent_draws() {
        let a = generate(&SimConfig::new(50, Setting::ObservedU, 9)).unwrap();
        let b = generate(&SimConfig::new(50, Setting::TransformedX, 9)).unwrap();
        assert_eq!(a.latent_u, b.latent_u);
        assert_eq!(a.dataset.labels(), b.dataset.labels());
        assert_eq!(a.dataset.features(), a.latent_u.view());
        let g = transform(a.latent_u.row(0).as_slice().unwrap());
        assert_eq!(b.dataset.features().row(0).to_vec(), g.to_vec());
    }

    #[test]
    fn score_is_monotone_in_linear_predictor() {
        let s = generate(&SimConfig::new(300, Setting::ObservedU, 1)).unwrap();
        let lin: Vec<f64> = s
            .latent_u
            .rows()
            .into_iter()
            .map(|r| r.iter().zip(COEFFICIENTS).map(|(a, b)| a * b).sum())
            .collect();
        for i in 0..300 {
            for j in 0..300 {
                if lin[i] < lin[j] {
                    assert!(s.bayes_score[i] <= s.bayes_score[j]);
                }
            }
        }
    }

    #[test]
    fn degenerate_bayes_rule() {
        let s = generate(&SimConfig::new(2_000, Setting::ObservedU, 2)).unwrap();
        let max = s.bayes_score.iter().copied().fold(0.0, f64::max);
        // pick λ so that 1 − λ exceeds every score: the rule never fires
        let l = (1.0 - max) / 2.0;
        let spec = LossSpec::new(l).unwrap();
        let expected = spec.risk_from_counts(s.dataset.positives(), 0, s.dataset.n());
        assert_eq!(bayes_rule_risk(&s, spec), expected);
    }

    #[test]
    fn rejects_bad_config() {
        assert_eq!(
            generate(&SimConfig::new(1, Setting::ObservedU, 0)).unwrap_err(),
            SimError::InvalidSize(1)
        );
        let mut cfg = SimConfig::new(10, Setting::ObservedU, 0);
        cfg.target_prevalence = 1.0;
        assert_eq!(generate(&cfg).unwrap_err(), SimError::InvalidPrevalence(1.0));
    }
}
