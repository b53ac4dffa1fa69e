//! Link configuration, channel synthesis and the power-splitting front end.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{haar_unitary, real_diag, svd, ComplexMatrix};

/// Parameters of one link instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Receive antennas.
    pub k: usize,
    /// P2P transmit antennas.
    pub m: usize,
    /// BS antennas.
    pub n: usize,
    /// Singular values of `H` (K x M), descending.
    pub sigma_p2p: Vec<f64>,
    /// Singular values of `H_B` (K x N), descending.
    pub sigma_bs: Vec<f64>,
    /// Per-antenna split ratios, length K.
    pub psi: Vec<f64>,
    pub sigma2_w: f64,
    pub sigma2_n: f64,
    /// P2P power budget.
    pub p: f64,
    /// BS power budget.
    pub pb: f64,
    pub seed: u64,
    pub trials: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            k: 3,
            m: 3,
            n: 5,
            sigma_p2p: vec![0.9, 0.8, 0.7],
            sigma_bs: vec![0.8, 0.7, 0.5],
            psi: vec![0.3; 3],
            sigma2_w: 1.0,
            sigma2_n: 1.0,
            p: 5.0,
            pb: 0.0,
            seed: 42,
            trials: 2000,
        }
    }
}

fn check_profile(name: &str, sigma: &[f64], max_len: usize) -> Result<()> {
    if sigma.len() > max_len {
        return Err(Error::invalid(format!(
            "{name} has {} values but the channel has rank at most {max_len}",
            sigma.len()
        )));
    }
    if sigma.iter().any(|&s| !s.is_finite() || s < 0.0) {
        return Err(Error::invalid(format!("{name} must be finite and nonnegative")));
    }
    if sigma.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid(format!("{name} must be sorted descending")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.k > self.m.min(self.n) {
            return Err(Error::invalid(format!(
                "need k <= min(m, n), got k={} m={} n={}",
                self.k, self.m, self.n
            )));
        }
        check_profile("sigma_p2p", &self.sigma_p2p, self.k.min(self.m))?;
        check_profile("sigma_bs", &self.sigma_bs, self.k.min(self.n))?;
        if self.psi.len() != self.k {
            return Err(Error::invalid(format!(
                "psi has {} entries, expected k={}",
                self.psi.len(),
                self.k
            )));
        }
        if self.psi.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::invalid("each psi must lie in [0, 1]"));
        }
        if !(self.sigma2_w > 0.0 && self.sigma2_n > 0.0)
            || !self.sigma2_w.is_finite()
            || !self.sigma2_n.is_finite()
        {
            return Err(Error::invalid("noise variances must be positive and finite"));
        }
        if !(self.p >= 0.0 && self.pb >= 0.0) || !self.p.is_finite() || !self.pb.is_finite() {
            return Err(Error::invalid("power budgets must be finite and >= 0"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        Ok(())
    }

    pub fn with_uniform_psi(mut self, psi: f64) -> Self {
        self.psi = vec![psi; self.k];
        self
    }

    pub fn with_bs_power(mut self, pb: f64) -> Self {
        self.pb = pb;
        self
    }

    pub fn split(&self) -> Result<PowerSplit> {
        PowerSplit::new(self.psi.clone())
    }

    /// Generator for trial `t`; seeds are `seed ^ t` so trials are independent
    /// of evaluation order.
    pub fn trial_rng(&self, trial: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ trial)
    }
}

/// Per-antenna power splitter: `sqrt(psi)` to detection, `sqrt(1-psi)` to harvesting.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSplit {
    psi: Vec<f64>,
}

impl PowerSplit {
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::invalid("power split needs at least one antenna"));
        }
        if psi.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::invalid("each psi must lie in [0, 1]"));
        }
        Ok(PowerSplit { psi })
    }

    pub fn uniform(k: usize, psi: f64) -> Result<Self> {
        Self::new(vec![psi; k])
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// `Some(psi)` when every antenna uses the same ratio.
    pub fn uniform_value(&self) -> Option<f64> {
        let first = self.psi[0];
        self.psi.iter().all(|&x| x == first).then_some(first)
    }

    /// `diag(sqrt(psi_k))`.
    pub fn psi_matrix(&self) -> ComplexMatrix {
        let d: Vec<f64> = self.psi.iter().map(|x| x.sqrt()).collect();
        real_diag(&d, d.len(), d.len())
    }

    /// `diag(sqrt(1 - psi_k))`.
    pub fn theta_matrix(&self) -> ComplexMatrix {
        let d: Vec<f64> = self.psi.iter().map(|x| (1.0 - x).sqrt()).collect();
        real_diag(&d, d.len(), d.len())
    }

    /// Diagonal of `Psi^2`, i.e. psi itself.
    pub fn psi_squared(&self) -> Vec<f64> {
        self.psi.clone()
    }

    /// Diagonal of `Theta^2`.
    pub fn theta_squared(&self) -> Vec<f64> {
        self.psi.iter().map(|x| 1.0 - x).collect()
    }
}

/// A channel matrix with its cached thin SVD.
#[derive(Debug, Clone)]
pub struct EquivalentChannel {
    pub matrix: ComplexMatrix,
    pub left: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub right: ComplexMatrix,
}

impl EquivalentChannel {
    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        let s = svd(&matrix)?;
        Ok(EquivalentChannel {
            matrix,
            left: s.left,
            sigma: s.sigma,
            right: s.right,
        })
    }

    /// Squared singular values, i.e. per-mode power gains.
    pub fn gains(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s * s).collect()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let k = self.sigma.len();
        &self.left * real_diag(&self.sigma, k, k) * self.right.adjoint()
    }
}

/// `L diag(sigma) R^H` with Haar-random `L` (rows x rows) and `R` (cols x cols).
pub fn synthesize_channel<R: Rng + ?Sized>(
    sigma: &[f64],
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if sigma.len() > rows.min(cols) {
        return Err(Error::invalid(format!(
            "{} singular values for a {rows}x{cols} channel",
            sigma.len()
        )));
    }
    let l = haar_unitary(rows, rng);
    let r = haar_unitary(cols, rng);
    Ok(l * real_diag(sigma, rows, cols) * r.adjoint())
}

/// `(Psi H, Psi H_B)` with fresh SVDs.
pub fn equivalent_channels(
    h: &ComplexMatrix,
    h_b: &ComplexMatrix,
    split: &PowerSplit,
) -> Result<(EquivalentChannel, EquivalentChannel)> {
    let k = split.len();
    if h.nrows() != k || h_b.nrows() != k {
        return Err(Error::dims(format!(
            "split has {k} antennas but channels have {} and {} rows",
            h.nrows(),
            h_b.nrows()
        )));
    }
    let psi = split.psi_matrix();
    Ok((
        EquivalentChannel::from_matrix(&psi * h)?,
        EquivalentChannel::from_matrix(&psi * h_b)?,
    ))
}

/// Equivalent channels with the interference left factor aligned to the
/// desired link's left factor (the worst case for the receiver).
pub fn worst_case_align<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Result<(EquivalentChannel, EquivalentChannel)> {
    cfg.validate()?;
    let split = cfg.split()?;
    let psi = split.uniform_value().ok_or_else(|| {
        Error::Unsupported("worst-case alignment needs a uniform split ratio".into())
    })?;
    let h = synthesize_channel(&cfg.sigma_p2p, cfg.k, cfg.m, rng)?;
    let hhat = EquivalentChannel::from_matrix(&split.psi_matrix() * h)?;

    // K <= min(M, N), so the thin left factor is K x K.
    let modes = cfg.k;
    let scale = psi.sqrt();
    let mut sigma_b: Vec<f64> = cfg.sigma_bs.iter().map(|s| scale * s).collect();
    sigma_b.resize(modes, 0.0);
    let r_full = haar_unitary(cfg.n, rng);
    let right = r_full.columns(0, modes).into_owned();
    let left = hhat.left.clone();
    let matrix = &left * real_diag(&sigma_b, modes, modes) * right.adjoint();
    let hhat_b = EquivalentChannel {
        matrix,
        left,
        sigma: sigma_b,
        right,
    };
    Ok((hhat, hhat_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, orthonormality_defect};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn config_rejects_bad_dof_and_psi() {
        let mut c = ScenarioConfig {
            k: 4,
            psi: vec![0.3; 4],
            ..ScenarioConfig::default()
        };
        assert!(c.validate().is_err());
        c = ScenarioConfig::default();
        c.psi[1] = 1.2;
        assert!(c.validate().is_err());
        c = ScenarioConfig::default();
        c.sigma_bs = vec![0.5, 0.7];
        assert!(c.validate().is_err());
        c = ScenarioConfig::default();
        c.sigma2_n = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn split_matrices_square_to_identity() {
        let s = PowerSplit::new(vec![0.0, 0.3, 0.77, 1.0]).unwrap();
        let psi2 = s.psi_squared();
        let th2 = s.theta_squared();
        for (a, b) in psi2.iter().zip(&th2) {
            assert_eq!(a + b, 1.0);
        }
        let sum = s.psi_matrix().map(|z| z * z) + s.theta_matrix().map(|z| z * z);
        assert!((sum - ComplexMatrix::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn synthesize_scalar_is_unit_modulus() {
        let h = synthesize_channel(&[1.0], 1, 1, &mut rng(2)).unwrap();
        assert!((h[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn synthesize_recovers_profiles() {
        for seed in 0..5 {
            let h = synthesize_channel(&[0.9, 0.8, 0.7], 3, 3, &mut rng(seed)).unwrap();
            let s = svd(&h).unwrap();
            for (a, b) in s.sigma.iter().zip([0.9, 0.8, 0.7]) {
                assert!((a - b).abs() < 1e-10);
            }
            let hb = synthesize_channel(&[0.8, 0.7, 0.5], 3, 5, &mut rng(seed)).unwrap();
            assert_eq!(hb.shape(), (3, 5));
            let s = svd(&hb).unwrap();
            assert_eq!(s.sigma.len(), 3);
            for (a, b) in s.sigma.iter().zip([0.8, 0.7, 0.5]) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn synthesize_rejects_long_profile() {
        assert!(synthesize_channel(&[1.0, 1.0, 1.0], 2, 4, &mut rng(0)).is_err());
    }

    #[test]
    fn synthesize_is_deterministic() {
        let a = synthesize_channel(&[0.9, 0.8], 2, 3, &mut rng(77)).unwrap();
        let b = synthesize_channel(&[0.9, 0.8], 2, 3, &mut rng(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn equivalent_channel_limits() {
        let mut r = rng(4);
        let h = complex_gaussian(3, 3, &mut r);
        let hb = complex_gaussian(3, 5, &mut r);
        let (e, _) = equivalent_channels(&h, &hb, &PowerSplit::uniform(3, 1.0).unwrap()).unwrap();
        assert!((&e.matrix - &h).norm() < 1e-15);
        let (e, eb) =
            equivalent_channels(&h, &hb, &PowerSplit::uniform(3, 0.0).unwrap()).unwrap();
        assert_eq!(e.matrix.norm(), 0.0);
        assert!(e.sigma.iter().chain(&eb.sigma).all(|&s| s == 0.0));
    }

    #[test]
    fn equivalent_channel_scaling() {
        let h = synthesize_channel(&[0.9, 0.8, 0.7], 3, 3, &mut rng(8)).unwrap();
        let hb = synthesize_channel(&[0.8, 0.7, 0.5], 3, 5, &mut rng(9)).unwrap();
        let (e, eb) =
            equivalent_channels(&h, &hb, &PowerSplit::uniform(3, 0.3).unwrap()).unwrap();
        for (g, want) in e.gains().iter().zip([0.243, 0.192, 0.147]) {
            assert!((g - want).abs() < 1e-10);
        }
        assert!((e.reconstruct() - &e.matrix).norm() <= 1e-10 * e.matrix.norm());
        assert!((eb.reconstruct() - &eb.matrix).norm() <= 1e-10 * eb.matrix.norm());
    }

    #[test]
    fn equivalent_channel_dimension_mismatch() {
        let h = ComplexMatrix::zeros(3, 3);
        let hb = ComplexMatrix::zeros(2, 5);
        assert!(matches!(
            equivalent_channels(&h, &hb, &PowerSplit::uniform(3, 0.5).unwrap()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn worst_case_alignment_paper_profiles() {
        let cfg = ScenarioConfig::default();
        let (h, hb) = worst_case_align(&cfg, &mut rng(1)).unwrap();
        for (g, want) in h.gains().iter().zip([0.243, 0.192, 0.147]) {
            assert!((g - want).abs() < 1e-10);
        }
        for (g, want) in hb.gains().iter().zip([0.192, 0.147, 0.075]) {
            assert!((g - want).abs() < 1e-10);
        }
        assert_eq!(h.left, hb.left);
        assert!(orthonormality_defect(&hb.right) < 1e-12);
        // the cached factors must describe the matrix
        let s = svd(&hb.matrix).unwrap();
        for (a, b) in s.sigma.iter().zip(&hb.sigma) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn worst_case_alignment_zero_interference() {
        let cfg = ScenarioConfig {
            sigma_bs: vec![0.0; 3],
            ..ScenarioConfig::default().with_uniform_psi(1.0)
        };
        let (_, hb) = worst_case_align(&cfg, &mut rng(1)).unwrap();
        assert_eq!(hb.matrix.norm(), 0.0);
    }

    #[test]
    fn worst_case_alignment_rejects_non_uniform_split() {
        let cfg = ScenarioConfig {
            psi: vec![0.3, 0.4, 0.3],
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            worst_case_align(&cfg, &mut rng(1)),
            Err(Error::Unsupported(_))
        ));
    }
}
