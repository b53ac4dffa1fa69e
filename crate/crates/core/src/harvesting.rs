//! Energy-harvesting branch: received RF covariance, analog steering and the
//! conditions under which interference dominates the harvest.

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, HermitianPsd, C64};
use crate::scenario::PowerSplit;

/// Received covariance after the splitter, `total = c + c_b + w_tilde`.
#[derive(Debug, Clone, PartialEq)]
pub struct RfCovariance {
    /// Desired-signal part `Theta H Q H^H Theta^H`.
    pub c: HermitianPsd,
    /// Interference part `Theta H_B Q_B H_B^H Theta^H`.
    pub c_b: HermitianPsd,
    /// Antenna noise `sigma2_w Theta^2`.
    pub w_tilde: HermitianPsd,
    pub total: HermitianPsd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarvestResult {
    /// Harvested power in the units of the transmit powers.
    pub linear: f64,
    pub db: f64,
    /// Unit-norm steering vector.
    pub q: ComplexVector,
}

impl HarvestResult {
    fn new(linear: f64, q: ComplexVector) -> Self {
        HarvestResult {
            linear,
            db: to_db(linear),
            q,
        }
    }
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Builds `C_RF` from the transmit covariances `Q` (M x M) and `Q_B` (N x N).
pub fn build_rf_covariance(
    h: &ComplexMatrix,
    q: &HermitianPsd,
    h_b: &ComplexMatrix,
    q_b: &HermitianPsd,
    split: &PowerSplit,
    sigma2_w: f64,
) -> Result<RfCovariance> {
    let k = split.len();
    if h.nrows() != k || h_b.nrows() != k {
        return Err(Error::dims(format!(
            "split has {k} antennas but channels have {} and {} rows",
            h.nrows(),
            h_b.nrows()
        )));
    }
    if !(sigma2_w >= 0.0) || !sigma2_w.is_finite() {
        return Err(Error::invalid("sigma2_w must be finite and >= 0"));
    }
    let theta = split.theta_matrix();
    let c = q.congruence(&(&theta * h))?;
    let c_b = q_b.congruence(&(&theta * h_b))?;
    let noise: Vec<f64> = split.theta_squared().iter().map(|t| t * sigma2_w).collect();
    let w_tilde = HermitianPsd::from_real_diag(&noise)?;
    let total = c.add(&c_b)?.add(&w_tilde)?;
    Ok(RfCovariance {
        c,
        c_b,
        w_tilde,
        total,
    })
}

fn first_basis_vector(k: usize) -> ComplexVector {
    let mut e = ComplexVector::zeros(k);
    if k > 0 {
        e[0] = C64::new(1.0, 0.0);
    }
    e
}

/// Harvest-maximizing steering: the top eigenvector of the total covariance.
pub fn optimal_steering(cov: &RfCovariance) -> HarvestResult {
    let eig = cov.total.eig();
    let top = eig.values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return HarvestResult::new(0.0, first_basis_vector(cov.total.dim()));
    }
    HarvestResult::new(top, eig.top_vector())
}

/// Harvest with `q` locked to the dominant interference direction,
/// `lambda_max(C_B) + q^H (C + W) q`. Only valid when the top interference
/// eigenvalue dominates every eigenvalue of `C`.
pub fn dominant_interference_energy(cov: &RfCovariance) -> Result<HarvestResult> {
    let eig_b = cov.c_b.eig();
    let top_b = eig_b.values.first().copied().unwrap_or(0.0);
    let top_c = cov.c.largest_eigenvalue();
    let slack = 1e-12 * top_b.abs().max(top_c.abs()).max(1.0);
    if top_b + slack < top_c {
        return Err(Error::Precondition(format!(
            "interference does not dominate: lambda_max(C_B) = {top_b:e} < lambda_max(C) = {top_c:e}"
        )));
    }
    let q = if top_b > 0.0 {
        eig_b.top_vector()
    } else {
        first_basis_vector(cov.c_b.dim())
    };
    let rest = cov.c.add(&cov.w_tilde)?;
    let linear = top_b.max(0.0) + rest.quadratic_form(&q);
    Ok(HarvestResult::new(linear, q))
}

/// `a` weakly majorizes `b` from below: every prefix sum of the descending `a`
/// is at least the matching prefix sum of `b`. The shorter input is padded
/// with zeros.
pub fn weak_majorization(a: &[f64], b: &[f64]) -> bool {
    let n = a.len().max(b.len());
    let (mut sa, mut sb) = (0.0, 0.0);
    for i in 0..n {
        sa += a.get(i).copied().unwrap_or(0.0);
        sb += b.get(i).copied().unwrap_or(0.0);
        if sa < sb {
            return false;
        }
    }
    true
}
