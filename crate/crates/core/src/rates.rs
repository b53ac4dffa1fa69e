//! Achievable rates of the detection branch and the waterfilling solver they share.
//!
//! All rates are in bits per channel use.

use crate::error::{Error, Result};
use crate::linalg::{real_diag, ComplexMatrix, HermitianPsd};
use crate::scenario::{EquivalentChannel, PowerSplit, ScenarioConfig};

/// Slack allowed on `sum(p) <= budget`.
pub const BUDGET_TOL: f64 = 1e-9;

/// Nonnegative per-mode powers under a sum budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    p: Vec<f64>,
    budget: f64,
}

impl PowerAllocation {
    pub fn new(p: Vec<f64>, budget: f64) -> Result<Self> {
        if !(budget >= 0.0) || !budget.is_finite() {
            return Err(Error::invalid("budget must be finite and >= 0"));
        }
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::invalid("powers must be finite and >= 0"));
        }
        let total: f64 = p.iter().sum();
        if total > budget + BUDGET_TOL {
            return Err(Error::invalid(format!(
                "allocation uses {total} but the budget is {budget}"
            )));
        }
        Ok(PowerAllocation { p, budget })
    }

    pub fn zeros(modes: usize, budget: f64) -> Self {
        PowerAllocation {
            p: vec![0.0; modes],
            budget,
        }
    }

    /// Equal split of the whole budget.
    pub fn uniform(modes: usize, budget: f64) -> Self {
        PowerAllocation {
            p: vec![budget / modes as f64; modes],
            budget,
        }
    }

    pub fn powers(&self) -> &[f64] {
        &self.p
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn into_powers(self) -> Vec<f64> {
        self.p
    }
}

/// Noise seen by the detection branch.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile {
    /// Antenna noise variance (before the splitter).
    pub sigma2_w: f64,
    /// Processing noise variance (after the splitter).
    pub sigma2_n: f64,
    pub psi: Vec<f64>,
}

impl NoiseProfile {
    pub fn new(sigma2_w: f64, sigma2_n: f64, psi: Vec<f64>) -> Result<Self> {
        if !(sigma2_w >= 0.0 && sigma2_n > 0.0) {
            return Err(Error::invalid(
                "need sigma2_w >= 0 and sigma2_n > 0 for a positive effective noise",
            ));
        }
        Ok(NoiseProfile {
            sigma2_w,
            sigma2_n,
            psi,
        })
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        NoiseProfile {
            sigma2_w: cfg.sigma2_w,
            sigma2_n: cfg.sigma2_n,
            psi: cfg.psi.clone(),
        }
    }

    /// Effective per-mode noise `psi_k sigma2_w + sigma2_n`.
    pub fn beta(&self) -> Vec<f64> {
        self.psi
            .iter()
            .map(|x| x * self.sigma2_w + self.sigma2_n)
            .collect()
    }

    /// `sigma2_w Psi^2 + sigma2_n I`.
    pub fn covariance(&self) -> HermitianPsd {
        let d: Vec<f64> = self.beta();
        HermitianPsd::from_product(real_diag(&d, d.len(), d.len()))
    }

    pub fn split(&self) -> Result<PowerSplit> {
        PowerSplit::new(self.psi.clone())
    }
}

/// Sum-power waterfilling: `p_k = max(0, eta - inv_gains_k)` with `sum p = budget`.
///
/// Modes with `inv_gains_k = +inf` receive nothing. Solved exactly by scanning
/// active sets of the sorted inverse gains. Returns `eta = +inf` if no mode is
/// usable.
pub fn waterfill(inv_gains: &[f64], budget: f64) -> Result<(PowerAllocation, f64)> {
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::invalid(format!("waterfill budget {budget} is not >= 0")));
    }
    if inv_gains.iter().any(|&g| g.is_nan() || g <= 0.0) {
        return Err(Error::invalid("inverse gains must be positive"));
    }
    let mut order: Vec<usize> = (0..inv_gains.len())
        .filter(|&i| inv_gains[i].is_finite())
        .collect();
    if order.is_empty() {
        return Ok((PowerAllocation::zeros(inv_gains.len(), budget), f64::INFINITY));
    }
    order.sort_by(|&i, &j| inv_gains[i].total_cmp(&inv_gains[j]));

    let mut prefix = Vec::with_capacity(order.len() + 1);
    prefix.push(0.0);
    for &i in &order {
        prefix.push(prefix.last().unwrap() + inv_gains[i]);
    }
    let mut eta = budget + inv_gains[order[0]];
    for active in (1..=order.len()).rev() {
        let level = (budget + prefix[active]) / active as f64;
        if level >= inv_gains[order[active - 1]] {
            eta = level;
            break;
        }
    }
    let p = inv_gains
        .iter()
        .map(|&g| if g.is_finite() { (eta - g).max(0.0) } else { 0.0 })
        .collect();
    Ok((PowerAllocation { p, budget }, eta))
}

/// Interference-plus-noise covariance `S = Hb Qb Hb^H + sigma2_w Psi^2 + sigma2_n I`.
pub fn interference_plus_noise(
    hhat_b: &EquivalentChannel,
    q_b: &HermitianPsd,
    noise: &NoiseProfile,
) -> Result<HermitianPsd> {
    let k = hhat_b.matrix.nrows();
    if noise.psi.len() != k {
        return Err(Error::dims(format!(
            "noise profile has {} antennas, channel has {k}",
            noise.psi.len()
        )));
    }
    q_b.congruence(&hhat_b.matrix)?.add(&noise.covariance())
}

fn log2det_ratio(s: &HermitianPsd, signal: &HermitianPsd) -> Result<f64> {
    let num = s.add(signal)?.log2_det()?;
    let den = s.log2_det()?;
    Ok((num - den).max(0.0))
}

/// Rate with interference treated as noise:
/// `log2 det(I + Hhat^H S^{-1} Hhat Q)`, evaluated as
/// `log2 det(S + Hhat Q Hhat^H) - log2 det(S)`.
pub fn tin_rate_global(
    hhat: &EquivalentChannel,
    hhat_b: &EquivalentChannel,
    q: &HermitianPsd,
    q_b: &HermitianPsd,
    noise: &NoiseProfile,
) -> Result<f64> {
    if hhat.matrix.nrows() != hhat_b.matrix.nrows() {
        return Err(Error::dims("desired and interference channels differ in rows"));
    }
    let s = interference_plus_noise(hhat_b, q_b, noise)?;
    tin_rate_with_covariance(hhat, q, &s)
}

/// TIN rate against a given interference-plus-noise covariance.
pub fn tin_rate_with_covariance(
    hhat: &EquivalentChannel,
    q: &HermitianPsd,
    s: &HermitianPsd,
) -> Result<f64> {
    if s.dim() != hhat.matrix.nrows() {
        return Err(Error::dims("noise covariance does not match the receiver"));
    }
    let signal = q.congruence(&hhat.matrix)?;
    log2det_ratio(s, &signal)
}

/// Rate-maximizing transmit covariance for a fixed `S`: eigenvectors of
/// `Hhat^H S^{-1} Hhat` waterfilled with inverse eigenvalues.
pub fn optimal_q_global(
    hhat: &EquivalentChannel,
    s: &HermitianPsd,
    budget: f64,
) -> Result<HermitianPsd> {
    if s.dim() != hhat.matrix.nrows() {
        return Err(Error::dims("noise covariance does not match the receiver"));
    }
    let s_inv = s.inverse()?;
    let a = s_inv.congruence(&hhat.matrix.adjoint())?;
    let eig = a.eig();
    let top = eig.values.first().copied().unwrap_or(0.0);
    let floor = 1e-12 * top;
    let inv_gains: Vec<f64> = eig
        .values
        .iter()
        .map(|&m| if top > 0.0 && m > floor { 1.0 / m } else { f64::INFINITY })
        .collect();
    let (alloc, _) = waterfill(&inv_gains, budget)?;
    let d = real_diag(alloc.powers(), inv_gains.len(), inv_gains.len());
    Ok(HermitianPsd::from_product(
        &eig.vectors * d * eig.vectors.adjoint(),
    ))
}

/// Worst-case rate with jointly diagonal channels:
/// `sum_k log2(1 + l2_k p_k / (l2b_k pb_k + beta_k))`.
pub fn worst_case_rate(
    lambda2: &[f64],
    lambda2_b: &[f64],
    p: &[f64],
    p_b: &[f64],
    noise: &NoiseProfile,
) -> Result<f64> {
    let k = lambda2.len();
    if lambda2_b.len() != k || p.len() != k || p_b.len() != k || noise.psi.len() != k {
        return Err(Error::dims("worst_case_rate inputs must share length K"));
    }
    Ok(lambda2
        .iter()
        .zip(lambda2_b)
        .zip(p.iter().zip(p_b))
        .zip(noise.beta())
        .map(|(((l, lb), (pk, pbk)), beta)| (l * pk / (lb * pbk + beta)).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2)
}

/// Rate of the local-CSI transceiver `U = Lhat`, `V = Rhat` with diagonal
/// allocation `D` on the eigenmodes.
pub fn local_csi_rate(
    hhat: &EquivalentChannel,
    hhat_b: &EquivalentChannel,
    d: &PowerAllocation,
    q_b: &HermitianPsd,
    noise: &NoiseProfile,
) -> Result<f64> {
    let modes = hhat.sigma.len();
    if d.len() != modes {
        return Err(Error::dims(format!(
            "allocation has {} modes, channel has {modes}",
            d.len()
        )));
    }
    let u: &ComplexMatrix = &hhat.left;
    // antenna noise goes through the combiner; processing noise is added after it
    let antenna: Vec<f64> = noise.psi.iter().map(|x| x * noise.sigma2_w).collect();
    let antenna = HermitianPsd::from_real_diag(&antenna)?;
    let pre = q_b.congruence(&hhat_b.matrix)?.add(&antenna)?;
    let s_bar = pre
        .congruence(&u.adjoint())?
        .add(&HermitianPsd::scaled_identity(modes, noise.sigma2_n))?;
    let signal: Vec<f64> = hhat
        .gains()
        .iter()
        .zip(d.powers())
        .map(|(g, p)| g * p)
        .collect();
    let signal = HermitianPsd::from_real_diag(&signal)?;
    log2det_ratio(&s_bar, &signal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_gaussian;
    use crate::scenario::{synthesize_channel, worst_case_align, ScenarioConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise(psi: f64, k: usize) -> NoiseProfile {
        NoiseProfile::new(1.0, 1.0, vec![psi; k]).unwrap()
    }

    #[test]
    fn waterfill_symmetric() {
        let (p, eta) = waterfill(&[2.0, 2.0], 3.0).unwrap();
        assert_eq!(p.powers(), &[1.5, 1.5]);
        assert_eq!(eta, 3.5);
    }

    #[test]
    fn waterfill_single_mode() {
        let (p, eta) = waterfill(&[1.0], 5.0).unwrap();
        assert_eq!(p.powers(), &[5.0]);
        assert_eq!(eta, 6.0);
    }

    #[test]
    fn waterfill_paper_profile() {
        // two active modes: eta = (5 + 5.349794 + 6.770833) / 2
        let (p, eta) = waterfill(&[5.349794, 6.770833, 8.843537], 5.0).unwrap();
        assert!((eta - 8.5603135).abs() < 1e-6);
        assert!((p.powers()[0] - 3.2105195).abs() < 1e-6);
        assert!((p.powers()[1] - 1.7894805).abs() < 1e-6);
        assert_eq!(p.powers()[2], 0.0);
    }

    #[test]
    fn waterfill_zero_gain_mode_and_zero_budget() {
        let (p, _) = waterfill(&[1.0, f64::INFINITY], 2.0).unwrap();
        assert_eq!(p.powers(), &[2.0, 0.0]);
        let (p, _) = waterfill(&[1.0, 3.0], 0.0).unwrap();
        assert_eq!(p.powers(), &[0.0, 0.0]);
        let (p, eta) = waterfill(&[f64::INFINITY; 2], 1.0).unwrap();
        assert_eq!(p.total(), 0.0);
        assert!(eta.is_infinite());
        assert!(waterfill(&[1.0], -1.0).is_err());
    }

    #[test]
    fn worst_case_rate_endpoints() {
        // 3 modes, no interference, P = 5
        for (psi, paper) in [(0.3, 1.016649), (0.6, 1.509088), (0.9, 1.816096)] {
            let n = noise(psi, 3);
            let l2: Vec<f64> = [0.81, 0.64, 0.49].iter().map(|x| psi * x).collect();
            let inv: Vec<f64> = l2.iter().zip(n.beta()).map(|(l, b)| b / l).collect();
            let (p, _) = waterfill(&inv, 5.0).unwrap();
            let r = worst_case_rate(&l2, &[0.0; 3], p.powers(), &[0.0; 3], &n).unwrap();
            assert!((r - paper).abs() < 1e-3, "psi={psi}: {r}");
        }
    }

    #[test]
    fn tin_rate_zero_q_is_zero() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let h = EquivalentChannel::from_matrix(complex_gaussian(3, 3, &mut r)).unwrap();
        let hb = EquivalentChannel::from_matrix(complex_gaussian(3, 5, &mut r)).unwrap();
        let qb = HermitianPsd::scaled_identity(5, 1.0);
        let rate = tin_rate_global(&h, &hb, &HermitianPsd::zeros(3), &qb, &noise(0.5, 3)).unwrap();
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn tin_rate_diagonal_reduction() {
        let psi: f64 = 0.3;
        let l = [0.9f64, 0.8, 0.7].map(|s| psi.sqrt() * s);
        let h = EquivalentChannel::from_matrix(real_diag(&l, 3, 3)).unwrap();
        let hb = EquivalentChannel::from_matrix(ComplexMatrix::zeros(3, 5)).unwrap();
        let p = [3.0, 1.5, 0.5];
        let q = HermitianPsd::from_real_diag(&p).unwrap();
        let n = noise(psi, 3);
        let got = tin_rate_global(&h, &hb, &q, &HermitianPsd::zeros(5), &n).unwrap();
        let want: f64 = (0..3)
            .map(|k| (1.0 + l[k] * l[k] * p[k] / n.beta()[k]).log2())
            .sum();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn rates_agree_under_worst_case_alignment() {
        let cfg = ScenarioConfig::default();
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let (h, hb) = worst_case_align(&cfg, &mut r).unwrap();
        let n = NoiseProfile::from_config(&cfg);
        let p = [2.5, 1.5, 1.0];
        let pb = [4.0, 0.5, 0.5];
        let wc = worst_case_rate(&h.gains(), &hb.gains(), &p, &pb, &n).unwrap();
        let q = HermitianPsd::from_real_diag(&p).unwrap().congruence(&h.right).unwrap();
        let qb = HermitianPsd::from_real_diag(&pb).unwrap().congruence(&hb.right).unwrap();
        let tin = tin_rate_global(&h, &hb, &q, &qb, &n).unwrap();
        let d = PowerAllocation::new(p.to_vec(), 5.0).unwrap();
        let local = local_csi_rate(&h, &hb, &d, &qb, &n).unwrap();
        assert!((wc - tin).abs() < 1e-9, "{wc} vs {tin}");
        assert!((wc - local).abs() < 1e-9, "{wc} vs {local}");
    }

    #[test]
    fn local_rate_interference_free() {
        let mut r = ChaCha8Rng::seed_from_u64(12);
        let hm = synthesize_channel(&[0.9, 0.8, 0.7], 3, 3, &mut r).unwrap();
        let psi = [0.4; 3];
        let split = PowerSplit::new(psi.to_vec()).unwrap();
        let h = EquivalentChannel::from_matrix(split.psi_matrix() * hm).unwrap();
        let hb = EquivalentChannel::from_matrix(ComplexMatrix::zeros(3, 5)).unwrap();
        let n = NoiseProfile::new(1.0, 1.0, psi.to_vec()).unwrap();
        let d = PowerAllocation::new(vec![2.0, 2.0, 1.0], 5.0).unwrap();
        let got = local_csi_rate(&h, &hb, &d, &HermitianPsd::zeros(5), &n).unwrap();
        // per-mode noise u_k^H Sigma_w u_k + sigma2_n
        let want: f64 = (0..3)
            .map(|k| {
                let u = h.left.column(k);
                let w: f64 = (0..3).map(|i| u[i].norm_sqr() * psi[i]).sum();
                (1.0 + h.gains()[k] * d.powers()[k] / (w + 1.0)).log2()
            })
            .sum();
        assert!((got - want).abs() < 1e-12);
        let zero = local_csi_rate(&h, &hb, &PowerAllocation::zeros(3, 5.0), &HermitianPsd::zeros(5), &n)
            .unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn optimal_q_diagonal_and_zero_budget() {
        let l = [0.9, 0.6];
        let h = EquivalentChannel::from_matrix(real_diag(&l, 2, 2)).unwrap();
        let s = HermitianPsd::scaled_identity(2, 1.0);
        let q = optimal_q_global(&h, &s, 4.0).unwrap();
        let (p, _) = waterfill(&[1.0 / 0.81, 1.0 / 0.36], 4.0).unwrap();
        assert!((q.matrix()[(0, 0)].re - p.powers()[0]).abs() < 1e-12);
        assert!((q.matrix()[(1, 1)].re - p.powers()[1]).abs() < 1e-12);
        assert!(q.matrix()[(0, 1)].norm() < 1e-12);
        let q0 = optimal_q_global(&h, &s, 0.0).unwrap();
        assert!(q0.matrix().norm() < 1e-15);
    }

    #[test]
    fn optimal_q_beats_random_equal_trace() {
        let mut r = ChaCha8Rng::seed_from_u64(99);
        let h = EquivalentChannel::from_matrix(complex_gaussian(3, 3, &mut r)).unwrap();
        let hb = EquivalentChannel::from_matrix(complex_gaussian(3, 5, &mut r)).unwrap();
        let n = noise(0.4, 3);
        let qb = HermitianPsd::scaled_identity(5, 0.7);
        let s = interference_plus_noise(&hb, &qb, &n).unwrap();
        let budget = 5.0;
        let q = optimal_q_global(&h, &s, budget).unwrap();
        assert!((q.trace() - budget).abs() < 1e-9);
        let best = tin_rate_with_covariance(&h, &q, &s).unwrap();
        for i in 0..1000 {
            let b = complex_gaussian(3, 1 + i % 3, &mut r);
            let x = HermitianPsd::from_product(&b * b.adjoint());
            let x = HermitianPsd::from_product(x.matrix().scale(budget / x.trace()));
            let alt = tin_rate_with_covariance(&h, &x, &s).unwrap();
            assert!(best - alt >= -1e-9);
        }
    }

    #[test]
    fn tin_rate_nonincreasing_in_interference() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let h = EquivalentChannel::from_matrix(complex_gaussian(3, 3, &mut r)).unwrap();
        let hb = EquivalentChannel::from_matrix(complex_gaussian(3, 5, &mut r)).unwrap();
        let n = noise(0.6, 3);
        let q = HermitianPsd::scaled_identity(3, 1.0);
        let b = complex_gaussian(5, 5, &mut r);
        let qb = HermitianPsd::from_product(&b * b.adjoint());
        let base = tin_rate_global(&h, &hb, &q, &qb, &n).unwrap();
        for delta in [0.1, 1.0] {
            let more = qb.add(&HermitianPsd::scaled_identity(5, delta)).unwrap();
            assert!(tin_rate_global(&h, &hb, &q, &more, &n).unwrap() <= base + 1e-12);
        }
    }

    #[test]
    fn power_allocation_validation() {
        assert!(PowerAllocation::new(vec![1.0, -0.1], 2.0).is_err());
        assert!(PowerAllocation::new(vec![1.0, 1.5], 2.0).is_err());
        assert!(PowerAllocation::new(vec![1.0, 1.0 + 5e-10], 2.0).is_ok());
    }
}
