//! Averages over random channel factors and random BS user beams.
//!
//! Trial `t` draws from its own generator (`seed ^ t`) in a fixed order: `H`,
//! then `H_B`, then the user beams. Trials run in parallel and are reduced in
//! index order, so results do not depend on the thread count, and every
//! metric evaluated in one call sees the same channels.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{unit_sphere_vector, ComplexMatrix, HermitianPsd};
use crate::rates::{interference_plus_noise, optimal_q_global, tin_rate_with_covariance, NoiseProfile};
use crate::scenario::{equivalent_channels, synthesize_channel, PowerSplit, ScenarioConfig};
use crate::transfer::{classical_design, swipt_design, CombinedLink, Structure2Noise};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`.
    pub stderr: f64,
    pub trials: usize,
}

impl McResult {
    /// Mean and standard error of `samples`, summed in order.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::invalid("no samples"));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Ok(McResult {
            mean,
            stderr,
            trials: n,
        })
    }
}

/// Per-trial quantities; rates in bits per channel use, energies in dB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// TIN rate of the global-CSI optimal design, per-antenna splitting.
    RateStruct1,
    /// Rate of the combine-then-split receiver.
    RateStruct2,
    /// Classical harvest with per-antenna splitting.
    EnergyStruct1,
    /// Harvest of the combine-then-split receiver.
    EnergyStruct2,
    /// SWIPT harvest with per-antenna splitting.
    EnergySwipt,
    /// Combine-then-split harvest under the SWIPT energy beam.
    EnergySwiptStruct2,
}

/// `sum_n (pb / n) v_n v_n^H` with independent unit-sphere beams.
pub fn random_bs_covariance<R: Rng + ?Sized>(n: usize, pb: f64, rng: &mut R) -> Result<HermitianPsd> {
    if n == 0 {
        return Err(Error::invalid("need at least one BS antenna"));
    }
    if !(pb >= 0.0) || !pb.is_finite() {
        return Err(Error::invalid("BS budget must be finite and >= 0"));
    }
    let beams: Vec<_> = (0..n).map(|_| unit_sphere_vector(n, rng)).collect();
    let v = ComplexMatrix::from_columns(&beams);
    HermitianPsd::scaled_identity(n, pb / n as f64).congruence(&v)
}

fn uniform_psi(split: &PowerSplit) -> Result<f64> {
    split.uniform_value().ok_or_else(|| {
        Error::Unsupported("the combine-then-split receiver has one splitter; psi must be uniform".into())
    })
}

fn trial(cfg: &ScenarioConfig, split: &PowerSplit, metrics: &[Metric], t: u64) -> Result<Vec<f64>> {
    let mut rng = cfg.trial_rng(t);
    let h = synthesize_channel(&cfg.sigma_p2p, cfg.k, cfg.m, &mut rng)?;
    let h_b = synthesize_channel(&cfg.sigma_bs, cfg.k, cfg.n, &mut rng)?;
    let q_b = random_bs_covariance(cfg.n, cfg.pb, &mut rng)?;
    let noise = NoiseProfile::new(cfg.sigma2_w, cfg.sigma2_n, split.psi().to_vec())?;
    let noise2 = Structure2Noise {
        sigma2_w: cfg.sigma2_w,
        sigma2_n: cfg.sigma2_n,
    };

    let mut out = Vec::with_capacity(metrics.len());
    for metric in metrics {
        let value = match metric {
            Metric::RateStruct1 => {
                let (hhat, hhat_b) = equivalent_channels(&h, &h_b, split)?;
                let s = interference_plus_noise(&hhat_b, &q_b, &noise)?;
                let q = optimal_q_global(&hhat, &s, cfg.p)?;
                tin_rate_with_covariance(&hhat, &q, &s)?
            }
            Metric::RateStruct2 => {
                CombinedLink::new(&h, &h_b, &q_b)?.rate(uniform_psi(split)?, &noise2, cfg.p)
            }
            Metric::EnergyStruct1 => {
                let d = classical_design(cfg, &h, &h_b, q_b.clone(), split)?;
                d.harvest(&h, &h_b, split, cfg.sigma2_w)?.db
            }
            Metric::EnergyStruct2 => {
                CombinedLink::new(&h, &h_b, &q_b)?
                    .energy(uniform_psi(split)?, &noise2, cfg.p)
                    .db
            }
            Metric::EnergySwipt => {
                let d = swipt_design(cfg, &h, &h_b, split)?;
                d.harvest(&h, &h_b, split, cfg.sigma2_w)?.db
            }
            Metric::EnergySwiptStruct2 => {
                let d = swipt_design(cfg, &h, &h_b, split)?;
                CombinedLink::new(&h, &h_b, &d.q_b)?
                    .energy(uniform_psi(split)?, &noise2, cfg.p)
                    .db
            }
        };
        if !value.is_finite() {
            return Err(Error::NumericalFailure(format!("{metric:?} is not finite")));
        }
        out.push(value);
    }
    Ok(out)
}

/// Averages every metric over the same `cfg.trials` channel draws, with BS
/// budget `pb`.
pub fn average_metrics(cfg: &ScenarioConfig, metrics: &[Metric], pb: f64) -> Result<Vec<McResult>> {
    let cfg = cfg.clone().with_bs_power(pb);
    cfg.validate()?;
    let split = cfg.split()?;
    let per_trial: Vec<Result<Vec<f64>>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            trial(&cfg, &split, metrics, t).map_err(|e| Error::Trial {
                index: t,
                source: Box::new(e),
            })
        })
        .collect();
    let per_trial: Vec<Vec<f64>> = per_trial.into_iter().collect::<Result<_>>()?;
    (0..metrics.len())
        .map(|i| {
            let samples: Vec<f64> = per_trial.iter().map(|row| row[i]).collect();
            McResult::from_samples(&samples)
        })
        .collect()
}

pub fn average_metric(cfg: &ScenarioConfig, metric: Metric, pb: f64) -> Result<McResult> {
    Ok(average_metrics(cfg, &[metric], pb)?[0])
}
