//! Transmit designs for the classical and SWIPT modes, plus the
//! combine-then-split receiver (structure 2).

use log::debug;

use crate::error::{Error, Result};
use crate::harvesting::{
    build_rf_covariance, optimal_steering, to_db, weak_majorization, HarvestResult,
};
use crate::linalg::{svd, ComplexMatrix, ComplexVector, HermitianPsd};
use crate::rates::{
    interference_plus_noise, optimal_q_global, tin_rate_with_covariance, NoiseProfile,
};
use crate::saddle::{solve_config, SaddleSolution};
use crate::scenario::{equivalent_channels, EquivalentChannel, PowerSplit, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMode {
    ClassicalWorstCase,
    ClassicalAverage,
    Swipt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmitDesign {
    /// P2P covariance (M x M).
    pub q: HermitianPsd,
    /// BS covariance (N x N).
    pub q_b: HermitianPsd,
    pub mode: DesignMode,
    /// For SWIPT designs: whether the interference spectrum at the harvester
    /// weakly majorizes the signal spectrum, the premise under which the
    /// design is rate-energy optimal.
    pub majorized: Option<bool>,
}

impl TransmitDesign {
    /// Harvest of this design with the optimal steering vector.
    pub fn harvest(
        &self,
        h: &ComplexMatrix,
        h_b: &ComplexMatrix,
        split: &PowerSplit,
        sigma2_w: f64,
    ) -> Result<HarvestResult> {
        let cov = build_rf_covariance(h, &self.q, h_b, &self.q_b, split, sigma2_w)?;
        Ok(optimal_steering(&cov))
    }
}

fn noise_for(cfg: &ScenarioConfig, split: &PowerSplit) -> Result<NoiseProfile> {
    NoiseProfile::new(cfg.sigma2_w, cfg.sigma2_n, split.psi().to_vec())
}

/// Classical transfer with known interference: `Q` waterfilled against the
/// interference-plus-noise covariance created by the given `Q_B`.
pub fn classical_design(
    cfg: &ScenarioConfig,
    h: &ComplexMatrix,
    h_b: &ComplexMatrix,
    q_b: HermitianPsd,
    split: &PowerSplit,
) -> Result<TransmitDesign> {
    let noise = noise_for(cfg, split)?;
    let (hhat, hhat_b) = equivalent_channels(h, h_b, split)?;
    let s = interference_plus_noise(&hhat_b, &q_b, &noise)?;
    let q = optimal_q_global(&hhat, &s, cfg.p)?;
    Ok(TransmitDesign {
        q,
        q_b,
        mode: DesignMode::ClassicalAverage,
        majorized: None,
    })
}

/// Worst-case classical design on aligned channels (as produced by
/// `worst_case_align`): saddle-point powers on the eigenmodes.
pub fn worst_case_design(
    cfg: &ScenarioConfig,
    hhat: &EquivalentChannel,
    hhat_b: &EquivalentChannel,
) -> Result<(TransmitDesign, SaddleSolution)> {
    let sol = solve_config(cfg)?;
    let q = covariance_from_modes(&hhat.right, sol.p_star.powers())?;
    let q_b = covariance_from_modes(&hhat_b.right, sol.pb_star.powers())?;
    Ok((
        TransmitDesign {
            q,
            q_b,
            mode: DesignMode::ClassicalWorstCase,
            majorized: None,
        },
        sol,
    ))
}

/// SWIPT: the receiver cancels the BS energy signal, so `Q` is waterfilled
/// against noise alone and the BS puts its whole budget on one energy beam
/// along the strongest direction of `Theta H_B`.
pub fn swipt_design(
    cfg: &ScenarioConfig,
    h: &ComplexMatrix,
    h_b: &ComplexMatrix,
    split: &PowerSplit,
) -> Result<TransmitDesign> {
    if !(cfg.p >= 0.0 && cfg.pb >= 0.0) {
        return Err(Error::invalid("power budgets must be >= 0"));
    }
    let noise = noise_for(cfg, split)?;
    let (hhat, _) = equivalent_channels(h, h_b, split)?;
    let q = optimal_q_global(&hhat, &noise.covariance(), cfg.p)?;

    // N x N, so the beam lives in the BS antenna space
    let gram = HermitianPsd::from_real_diag(&split.theta_squared())?.congruence(&h_b.adjoint())?;
    let e_b = gram.eig().top_vector();
    let q_b = HermitianPsd::from_real_diag(&[cfg.pb])?.congruence(&ComplexMatrix::from_columns(&[e_b]))?;

    let cov = build_rf_covariance(h, &q, h_b, &q_b, split, cfg.sigma2_w)?;
    let majorized = weak_majorization(&cov.c_b.eig().values, &cov.c.eig().values);
    if !majorized {
        debug!("SWIPT design: interference spectrum does not weakly majorize the signal spectrum");
    }
    Ok(TransmitDesign {
        q,
        q_b,
        mode: DesignMode::Swipt,
        majorized: Some(majorized),
    })
}

/// SWIPT rate against noise only; `Q_B` does not enter.
pub fn swipt_rate(
    design: &TransmitDesign,
    hhat: &EquivalentChannel,
    noise: &NoiseProfile,
) -> Result<f64> {
    if design.mode != DesignMode::Swipt {
        return Err(Error::invalid("swipt_rate needs a SWIPT design"));
    }
    tin_rate_with_covariance(hhat, &design.q, &noise.covariance())
}

/// Receiver structure 2: the antennas are combined by `u_1` first, then one
/// splitter divides the combined signal. Full power rides the dominant mode.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedLink {
    /// Dominant left singular vector of `H`.
    pub combiner: ComplexVector,
    /// `lambda_1^2`.
    pub gain: f64,
    /// `u_1^H H_B Q_B H_B^H u_1`.
    pub interference: f64,
}

impl CombinedLink {
    pub fn new(h: &ComplexMatrix, h_b: &ComplexMatrix, q_b: &HermitianPsd) -> Result<Self> {
        if h.nrows() != h_b.nrows() {
            return Err(Error::dims("desired and interference channels differ in rows"));
        }
        let s = svd(h)?;
        let (combiner, gain) = match s.sigma.first() {
            Some(&l) => (s.left.column(0).into_owned(), l * l),
            None => return Err(Error::invalid("channel has no modes")),
        };
        let interference = q_b.congruence(h_b)?.quadratic_form(&combiner);
        Ok(CombinedLink {
            combiner,
            gain,
            interference,
        })
    }

    /// Power after combining, before the splitter.
    pub fn combined_power(&self, p: f64, sigma2_w: f64) -> f64 {
        self.gain * p + self.interference + sigma2_w
    }

    /// Power routed to detection, before processing noise.
    pub fn detection_power(&self, psi: f64, p: f64, sigma2_w: f64) -> f64 {
        psi * self.combined_power(p, sigma2_w)
    }

    pub fn rate(&self, psi: f64, noise: &Structure2Noise, p: f64) -> f64 {
        let signal = psi * self.gain * p;
        let floor = psi * (self.interference + noise.sigma2_w) + noise.sigma2_n;
        (signal / floor).ln_1p() / std::f64::consts::LN_2
    }

    pub fn energy(&self, psi: f64, noise: &Structure2Noise, p: f64) -> HarvestResult {
        let linear = (1.0 - psi) * self.combined_power(p, noise.sigma2_w);
        HarvestResult {
            linear,
            db: to_db(linear),
            q: self.combiner.clone(),
        }
    }
}

/// Noise of the single-splitter receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Structure2Noise {
    pub sigma2_w: f64,
    pub sigma2_n: f64,
}

fn check_psi(psi: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&psi) {
        return Err(Error::invalid(format!("split ratio {psi} outside [0, 1]")));
    }
    Ok(())
}

pub fn structure2_rate(
    h: &ComplexMatrix,
    h_b: &ComplexMatrix,
    q_b: &HermitianPsd,
    psi: f64,
    noise: &Structure2Noise,
    p: f64,
) -> Result<f64> {
    check_psi(psi)?;
    Ok(CombinedLink::new(h, h_b, q_b)?.rate(psi, noise, p))
}

pub fn structure2_energy(
    h: &ComplexMatrix,
    h_b: &ComplexMatrix,
    q_b: &HermitianPsd,
    psi: f64,
    noise: &Structure2Noise,
    p: f64,
) -> Result<HarvestResult> {
    check_psi(psi)?;
    Ok(CombinedLink::new(h, h_b, q_b)?.energy(psi, noise, p))
}

/// `Q = V diag(d) V^H`.
pub fn covariance_from_modes(v: &ComplexMatrix, d: &[f64]) -> Result<HermitianPsd> {
    if v.ncols() != d.len() {
        return Err(Error::dims("one power per eigenmode"));
    }
    HermitianPsd::from_real_diag(d)?.congruence(v)
}
