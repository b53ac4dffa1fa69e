//! Worst-case power game between the P2P transmitter (maximizer) and the BS
//! (minimizer) on jointly diagonal eigenmodes.
//!
//! The rate `r(p, p_B)` is concave in `p` and convex in `p_B`. The P2P best
//! response is waterfilling against interference-plus-noise; the BS best
//! response follows from the KKT conditions of the convex inner problem, with
//! the budget multiplier found by bisection.
//!
//! The saddle itself is found by projected-gradient descent on the outer
//! function `f(p_B) = max_p r(p, p_B)`, which is convex; its gradient is the
//! partial derivative of `r` at the waterfilling response (Danskin). Each
//! gradient step is followed by a damped move towards the BS best response,
//! with the damping chosen by line search. A fixed damping factor
//! limit-cycles on ordinary instances.

use crate::error::{Error, Result};
use crate::rates::{waterfill, worst_case_rate, NoiseProfile, PowerAllocation};
use crate::scenario::ScenarioConfig;

/// Stop when the rate changes by less than this between iterations.
pub const RATE_TOL: f64 = 1e-10;
/// Stop only once the Frank-Wolfe gap of the BS problem (an upper bound on its
/// suboptimality, in bits) is below this.
pub const GAP_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub p_star: PowerAllocation,
    pub pb_star: PowerAllocation,
    /// `r_wc(p*, p_B*)` in bits per channel use.
    pub rate: f64,
    pub iterations: usize,
    /// Rate change of the last iteration.
    pub residual: f64,
    /// Frank-Wolfe gap of the BS side at the solution.
    pub gap: f64,
}

/// BS best response together with its budget multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct BsResponse {
    pub allocation: PowerAllocation,
    /// `None` when no mode can be jammed (the budget constraint is slack).
    pub multiplier: Option<f64>,
}

fn check_lengths(lens: &[usize]) -> Result<usize> {
    let k = lens[0];
    if lens.iter().any(|&l| l != k) {
        return Err(Error::dims(format!("mode vectors have lengths {lens:?}")));
    }
    Ok(k)
}

/// Waterfilling against `lambda2_B p_B + beta`.
pub fn p2p_best_response(
    lambda2: &[f64],
    lambda2_b: &[f64],
    p_b: &PowerAllocation,
    noise: &NoiseProfile,
    budget: f64,
) -> Result<PowerAllocation> {
    check_lengths(&[lambda2.len(), lambda2_b.len(), p_b.len(), noise.psi.len()])?;
    let inv: Vec<f64> = lambda2
        .iter()
        .zip(lambda2_b)
        .zip(p_b.powers())
        .zip(noise.beta())
        .map(|(((&l, &lb), &q), beta)| {
            if l > 0.0 {
                (lb * q + beta) / l
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(waterfill(&inv, budget)?.0)
}

/// Positive root `x` of `(x + beta)(x + beta + alpha) = alpha * lb / mu`,
/// clipped at zero. Written without the cancellation of `-c + sqrt(c^2 + ...)`.
fn kkt_root(alpha: f64, beta: f64, lb: f64, mu: f64) -> f64 {
    let c = beta + 0.5 * alpha;
    let drive = alpha * lb / mu;
    let num = drive - beta * (beta + alpha);
    if num <= 0.0 {
        return 0.0;
    }
    num / (c + (c * c + drive - beta * beta - alpha * beta).sqrt())
}

/// `p_Bk(mu)` for every mode.
fn bs_powers(alpha: &[f64], beta: &[f64], lambda2_b: &[f64], mu: f64) -> Vec<f64> {
    alpha
        .iter()
        .zip(beta)
        .zip(lambda2_b)
        .map(|((&a, &b), &lb)| {
            if a > 0.0 && lb > 0.0 {
                kkt_root(a, b, lb, mu) / lb
            } else {
                0.0
            }
        })
        .collect()
}

/// Rate-minimizing BS allocation against signal powers `alpha_k = lambda2_k p_k`.
pub fn bs_best_response(
    alpha: &[f64],
    beta: &[f64],
    lambda2_b: &[f64],
    budget: f64,
) -> Result<BsResponse> {
    let k = check_lengths(&[alpha.len(), beta.len(), lambda2_b.len()])?;
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::invalid("BS budget must be finite and >= 0"));
    }
    if beta.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::invalid("effective noise must be positive"));
    }
    if alpha.iter().chain(lambda2_b).any(|&x| !(x >= 0.0)) {
        return Err(Error::invalid("alpha and lambda2_B must be >= 0"));
    }
    // Above mu_max every mode is switched off.
    let mu_max = alpha
        .iter()
        .zip(beta)
        .zip(lambda2_b)
        .filter(|((&a, _), &lb)| a > 0.0 && lb > 0.0)
        .map(|((&a, &b), &lb)| a * lb / (b * (b + a)))
        .fold(0.0, f64::max);
    if budget == 0.0 || mu_max == 0.0 {
        return Ok(BsResponse {
            allocation: PowerAllocation::zeros(k, budget),
            multiplier: None,
        });
    }

    let total = |mu: f64| bs_powers(alpha, beta, lambda2_b, mu).iter().sum::<f64>();
    let mut hi = mu_max;
    let mut lo = mu_max;
    while total(lo) < budget {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::NumericalFailure(
                "could not bracket the BS multiplier".into(),
            ));
        }
    }
    // total is strictly decreasing in mu on (0, mu_max]
    for _ in 0..2000 {
        let mid = if hi / lo > 2.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        let t = total(mid);
        if (t - budget).abs() <= 1e-13 * budget {
            lo = mid;
            hi = mid;
            break;
        }
        if t > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = if (total(lo) - budget).abs() <= (total(hi) - budget).abs() {
        lo
    } else {
        hi
    };
    let p = bs_powers(alpha, beta, lambda2_b, mu);
    let sum: f64 = p.iter().sum();
    if (sum - budget).abs() > 1e-10 * budget {
        return Err(Error::NumericalFailure(format!(
            "BS budget does not bind: {sum} vs {budget}"
        )));
    }
    // bisection may overshoot the budget by a few ulps
    let p = if sum > budget {
        p.iter().map(|x| x * (budget / sum)).collect()
    } else {
        p
    };
    Ok(BsResponse {
        allocation: PowerAllocation::new(p, budget)?,
        multiplier: Some(mu),
    })
}

/// `dL/dp_Bk = -alpha lb / ((lb q + beta)(lb q + beta + alpha)) + mu` (natural log).
pub fn kkt_stationarity(alpha: f64, beta: f64, lb: f64, q: f64, mu: f64) -> f64 {
    let s = lb * q + beta;
    -alpha * lb / (s * (s + alpha)) + mu
}

/// Euclidean projection onto `{x >= 0, sum x = total}`.
pub(crate) fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - total) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

struct Game<'a> {
    lambda2: &'a [f64],
    lambda2_b: &'a [f64],
    beta: Vec<f64>,
    noise: &'a NoiseProfile,
    p_budget: f64,
    pb_budget: f64,
}

impl Game<'_> {
    fn respond(&self, q: &[f64]) -> Result<(PowerAllocation, f64)> {
        let qb = PowerAllocation::new(q.to_vec(), self.pb_budget)?;
        let p = p2p_best_response(self.lambda2, self.lambda2_b, &qb, self.noise, self.p_budget)?;
        let r = worst_case_rate(self.lambda2, self.lambda2_b, p.powers(), q, self.noise)?;
        Ok((p, r))
    }

    /// Partial derivative of the rate (bits) in `p_B`, at fixed `p`.
    fn gradient(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        (0..q.len())
            .map(|k| {
                let alpha = self.lambda2[k] * p[k];
                let lb = self.lambda2_b[k];
                let s = lb * q[k] + self.beta[k];
                -alpha * lb / (s * (s + alpha)) / std::f64::consts::LN_2
            })
            .collect()
    }

    /// Minimizes `f` on the segment from `q` towards `BR(WF(q))`. Along that
    /// segment `f` is convex, so golden-section search applies.
    fn best_response_line_search(
        &self,
        q: Vec<f64>,
        p: PowerAllocation,
        rate: f64,
    ) -> Result<(Vec<f64>, PowerAllocation, f64)> {
        let alpha: Vec<f64> = self
            .lambda2
            .iter()
            .zip(p.powers())
            .map(|(l, x)| l * x)
            .collect();
        let br = bs_best_response(&alpha, &self.beta, self.lambda2_b, self.pb_budget)?;
        if br.multiplier.is_none() {
            return Ok((q, p, rate));
        }
        let target = br.allocation.powers();
        let point = |t: f64| -> Vec<f64> {
            let mixed: Vec<f64> = q.iter().zip(target).map(|(a, b)| a + t * (b - a)).collect();
            // re-normalize rounding drift
            project_simplex(&mixed, self.pb_budget)
        };
        let eval = |t: f64| -> Result<f64> { Ok(self.respond(&point(t))?.1) };
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (0.0, 1.0);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut fc, mut fd) = (eval(c)?, eval(d)?);
        for _ in 0..60 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = eval(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = eval(d)?;
            }
        }
        let t = 0.5 * (a + b);
        let q_t = point(t);
        let (p_t, r_t) = self.respond(&q_t)?;
        if r_t < rate {
            Ok((q_t, p_t, r_t))
        } else {
            Ok((q, p, rate))
        }
    }

    fn fw_gap(&self, g: &[f64], q: &[f64]) -> f64 {
        let lin: f64 = g.iter().zip(q).map(|(a, b)| a * b).sum();
        let best = g.iter().copied().fold(f64::INFINITY, f64::min);
        (lin - best * self.pb_budget).max(0.0)
    }
}

/// Solves `max_p min_{p_B} r_wc` for eigenmode gains `lambda2`, `lambda2_b`.
pub fn solve_saddle(
    lambda2: &[f64],
    lambda2_b: &[f64],
    noise: &NoiseProfile,
    p_budget: f64,
    pb_budget: f64,
) -> Result<SaddleSolution> {
    solve_saddle_with(lambda2, lambda2_b, noise, p_budget, pb_budget, MAX_ITERATIONS)
}

/// Saddle point of the worst-case game for a configuration with a uniform
/// split: mode gains `psi sigma_k^2` on both links, zero-padded to K modes.
pub fn solve_config(cfg: &ScenarioConfig) -> Result<SaddleSolution> {
    cfg.validate()?;
    let psi = cfg.split()?.uniform_value().ok_or_else(|| {
        Error::Unsupported("the worst-case game needs a uniform split ratio".into())
    })?;
    let gains = |sigma: &[f64]| -> Vec<f64> {
        let mut g: Vec<f64> = sigma.iter().map(|s| psi * s * s).collect();
        g.resize(cfg.k, 0.0);
        g
    };
    solve_saddle(
        &gains(&cfg.sigma_p2p),
        &gains(&cfg.sigma_bs),
        &NoiseProfile::from_config(cfg),
        cfg.p,
        cfg.pb,
    )
}

pub fn solve_saddle_with(
    lambda2: &[f64],
    lambda2_b: &[f64],
    noise: &NoiseProfile,
    p_budget: f64,
    pb_budget: f64,
    max_iterations: usize,
) -> Result<SaddleSolution> {
    let k = check_lengths(&[lambda2.len(), lambda2_b.len(), noise.psi.len()])?;
    if k == 0 {
        return Err(Error::invalid("saddle problem needs at least one mode"));
    }
    if !(p_budget >= 0.0 && pb_budget >= 0.0) {
        return Err(Error::invalid("budgets must be >= 0"));
    }
    let game = Game {
        lambda2,
        lambda2_b,
        beta: noise.beta(),
        noise,
        p_budget,
        pb_budget,
    };

    let mut q = vec![pb_budget / k as f64; k];
    let (mut p, mut rate) = game.respond(&q)?;
    let mut g = game.gradient(p.powers(), &q);
    let mut gap = game.fw_gap(&g, &q);
    if pb_budget == 0.0 || gap <= GAP_TOL * 1e-3 {
        return Ok(SaddleSolution {
            pb_star: PowerAllocation::new(q, pb_budget)?,
            p_star: p,
            rate,
            iterations: 0,
            residual: 0.0,
            gap,
        });
    }

    let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut step = pb_budget / gmax.max(f64::MIN_POSITIVE);
    let mut residual = f64::INFINITY;
    for it in 1..=max_iterations {
        // backtracking on the standard projected-gradient descent condition
        let (q_new, p_new, rate_new) = loop {
            let trial: Vec<f64> = q.iter().zip(&g).map(|(x, d)| x - step * d).collect();
            let q_try = project_simplex(&trial, pb_budget);
            let (p_try, r_try) = game.respond(&q_try)?;
            let diff: Vec<f64> = q_try.iter().zip(&q).map(|(a, b)| a - b).collect();
            let lin: f64 = g.iter().zip(&diff).map(|(a, b)| a * b).sum();
            let quad: f64 = diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * step);
            if r_try <= rate + lin + quad + 1e-15 || step < 1e-300 {
                break (q_try, p_try, r_try);
            }
            step *= 0.5;
        };
        // damped BS best response, with the damping picked by line search
        let (q_new, p_new, rate_new) = game.best_response_line_search(q_new, p_new, rate_new)?;
        residual = (rate - rate_new).abs();
        q = q_new;
        p = p_new;
        rate = rate_new;
        g = game.gradient(p.powers(), &q);
        gap = game.fw_gap(&g, &q);
        step *= 2.0;
        if residual < RATE_TOL && gap < GAP_TOL {
            return Ok(SaddleSolution {
                pb_star: PowerAllocation::new(q, pb_budget)?,
                p_star: p,
                rate,
                iterations: it,
                residual,
                gap,
            });
        }
    }
    Err(Error::Convergence {
        iterations: max_iterations,
        residual,
        p: p.into_powers(),
        p_b: q,
    })
}
