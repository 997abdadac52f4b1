//! Exact evaluation of the special-cycle family whose Peierls sum blows up.
//!
//! The family lives on the shrinker-plus-identity model: for each n >= 1,
//! a closed walk of length 2n+4 consisting of a straight spine one column
//! east of the origin, a two-sink cap, and a return path (f_k, -f_k, -k)
//! whose horizontal profile f is a lazy walk bridge. The label g_k picks
//! which map decorates the return path; steps that move sideways force the
//! shrinker label.
//!
//! The sum over the family at size n factors into an explicit prefactor
//! and the central coefficient of a product of step polynomials, which a
//! small transfer DP evaluates exactly.

use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::contour::{Site, ToomCycle};
use crate::rat::{to_f64, Rat};

#[derive(Debug, Error, PartialEq)]
pub enum DivergeError {
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("parameters out of range: {0}")]
    BadParams(String),
}

/// Path and label data of one special cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialCycleParams {
    /// horizontal profile f_0..f_n with f_0 = f_n = 0 and steps in {-1,0,1}
    pub f: Vec<i64>,
    /// labels g_0..g_n in {1,2}; g_0 = g_n = 1 and g_k = 1 wherever the
    /// profile moves
    pub g: Vec<u8>,
}

impl SpecialCycleParams {
    pub fn n(&self) -> usize {
        self.f.len() - 1
    }

    pub fn validate(&self) -> Result<(), DivergeError> {
        let n = self.f.len();
        if n < 2 || self.g.len() != n {
            return Err(DivergeError::InvalidPath("need n >= 1 with matching labels".into()));
        }
        if self.f[0] != 0 || self.f[n - 1] != 0 {
            return Err(DivergeError::InvalidPath("profile must start and end at 0".into()));
        }
        for w in self.f.windows(2) {
            if (w[1] - w[0]).abs() > 1 {
                return Err(DivergeError::InvalidPath(format!(
                    "profile step {} -> {} larger than one",
                    w[0], w[1]
                )));
            }
        }
        if self.g[0] != 1 || self.g[n - 1] != 1 {
            return Err(DivergeError::InvalidPath("labels must start and end at 1".into()));
        }
        for k in 0..n - 1 {
            if self.f[k + 1] != self.f[k] && self.g[k] != 1 {
                return Err(DivergeError::InvalidPath(format!(
                    "moving step {k} needs the shrinker label"
                )));
            }
            if !(1..=2).contains(&self.g[k]) {
                return Err(DivergeError::InvalidPath("labels must be 1 or 2".into()));
            }
        }
        Ok(())
    }
}

/// Builds the decorated special cycle of the parameters: the walk together
/// with its decoration (map index per site, defects at the two sinks).
pub fn build_special_cycle(
    params: &SpecialCycleParams,
) -> Result<(ToomCycle, std::collections::BTreeMap<Site, u8>), DivergeError> {
    params.validate()?;
    let n = params.n() as i64;
    let mut psi: Vec<Site> = Vec::with_capacity(2 * params.n() + 5);
    psi.push(vec![0, 0, 0]);
    for k in 1..=n + 1 {
        psi.push(vec![0, 1, -k]);
    }
    psi.push(vec![0, 0, -n]);
    psi.push(vec![0, 0, -n - 1]);
    for k in (0..=n).rev() {
        let fk = params.f[k as usize];
        psi.push(vec![fk, -fk, -k]);
    }
    let cycle = ToomCycle { psi };
    let mut kappa = std::collections::BTreeMap::new();
    for (k, &fk) in params.f.iter().enumerate() {
        kappa.insert(vec![fk, -fk, -(k as i64)], params.g[k]);
    }
    for k in 1..=n {
        kappa.insert(vec![0, 1, -k], 2);
    }
    kappa.insert(vec![0, 0, -n - 1], 0);
    kappa.insert(vec![0, 1, -n - 1], 0);
    Ok((cycle, kappa))
}

/// Exact sum of presence probabilities over the size-n family:
/// `p^2 (1-p)^(2n+1) r^2 (1-r)^n W(n, r)` with W the central coefficient
/// of (z + 1 + 1/z)(r(z + 1 + 1/z) + (1 - r))^(n-1).
pub fn family_sum(n: usize, p: &Rat, r: &Rat) -> Result<Rat, DivergeError> {
    if n == 0 {
        return Err(DivergeError::BadParams("family starts at n = 1".into()));
    }
    if p < &Rat::zero() || p > &Rat::one() || r < &Rat::zero() || r > &Rat::one() {
        return Err(DivergeError::BadParams("p and r must lie in [0, 1]".into()));
    }
    let w = central_coefficient_exact(n, r);
    let one = Rat::one();
    Ok(p.pow(2)
        * (&one - p).pow(2 * n as i32 + 1)
        * r.pow(2)
        * (&one - r).pow(n as i32)
        * w)
}

/// W(n, r) by the transfer DP over the running horizontal offset.
pub fn central_coefficient_exact(n: usize, r: &Rat) -> Rat {
    // coefficients over offsets -n..n; start with the free first step
    let width = 2 * n + 1;
    let mid = n;
    let mut coeffs = vec![Rat::zero(); width];
    coeffs[mid] = Rat::one();
    if mid > 0 {
        coeffs[mid - 1] = Rat::one();
    }
    if mid + 1 < width {
        coeffs[mid + 1] = Rat::one();
    }
    let stay = Rat::one() - r;
    for _ in 0..n.saturating_sub(1) {
        let mut next = vec![Rat::zero(); width];
        for (i, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let with_r = c * r;
            next[i] += c * &stay + &with_r;
            if i > 0 {
                next[i - 1] += &with_r;
            }
            if i + 1 < width {
                next[i + 1] += &with_r;
            }
        }
        coeffs = next;
    }
    coeffs[mid].clone()
}

/// log W(n, r) for every n up to n_max, by the same DP with running
/// renormalization; used for the growth series at sizes where exact
/// rationals would be needlessly slow.
fn central_coefficient_logs(n_max: usize, r: f64) -> Vec<f64> {
    let width = 2 * n_max + 3;
    let mid = n_max + 1;
    let mut coeffs = vec![0.0f64; width];
    coeffs[mid - 1] = 1.0;
    coeffs[mid] = 1.0;
    coeffs[mid + 1] = 1.0;
    let mut logscale = 0.0f64;
    let mut out = Vec::with_capacity(n_max);
    out.push(0.0); // n = 1: W = 1, central coefficient of the first step
    for _ in 1..n_max {
        let mut next = vec![0.0f64; width];
        for (i, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            next[i] += c * (1.0 - r) + c * r;
            if i > 0 {
                next[i - 1] += c * r;
            }
            if i + 1 < width {
                next[i + 1] += c * r;
            }
        }
        let peak = next.iter().cloned().fold(0.0f64, f64::max);
        for v in next.iter_mut() {
            *v /= peak;
        }
        logscale += peak.ln();
        coeffs = next;
        out.push(logscale + coeffs[mid].ln());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub p: f64,
    pub r: f64,
    pub n_max: usize,
    /// family_sum(n)^(1/n) for n = 1..=n_max
    pub nth_roots: Vec<f64>,
    /// the proven lower bound on the growth rate: 3^r (1-r)(1-p)^2
    pub analytic_rate_lower_bound: f64,
    /// the exact asymptotic growth rate: (1+2r)(1-r)(1-p)^2
    pub transfer_rate: f64,
    /// first size from which the ratio of consecutive sums stays above one
    /// (None when it never does within n_max)
    pub monotone_witness_from: Option<usize>,
    pub verdict: Verdict,
}

/// Growth of the family sums and a divergence verdict. The verdict relies
/// on the exact transfer rate: the central-coefficient sequence is
/// supermultiplicative, so the n-th roots converge to the transfer rate
/// and the series diverges precisely when that rate exceeds one. The
/// weaker analytic lower bound is reported alongside.
pub fn growth_and_verdict(p: f64, r: f64, n_max: usize) -> Result<GrowthReport, DivergeError> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&r) {
        return Err(DivergeError::BadParams("p and r must lie in [0, 1]".into()));
    }
    if n_max < 1 {
        return Err(DivergeError::BadParams("need n_max >= 1".into()));
    }
    let logs = central_coefficient_logs(n_max, r);
    let log_prefix = (p * p * (1.0 - p) * r * r).ln();
    let log_per_n = 2.0 * (1.0 - p).ln() + (1.0 - r).ln();
    let log_sum = |n: usize| log_prefix + n as f64 * log_per_n + logs[n - 1];
    let nth_roots: Vec<f64> = (1..=n_max).map(|n| (log_sum(n) / n as f64).exp()).collect();
    let analytic = 3f64.powf(r) * (1.0 - r) * (1.0 - p) * (1.0 - p);
    let transfer = (1.0 + 2.0 * r) * (1.0 - r) * (1.0 - p) * (1.0 - p);
    let mut monotone_witness_from = None;
    for n in (1..n_max).rev() {
        if log_sum(n + 1) > log_sum(n) {
            monotone_witness_from = Some(n);
        } else {
            break;
        }
    }
    let verdict = if transfer > 1.0 { Verdict::Diverges } else { Verdict::Inconclusive };
    Ok(GrowthReport {
        p,
        r,
        n_max,
        nth_roots,
        analytic_rate_lower_bound: analytic,
        transfer_rate: transfer,
        monotone_witness_from,
        verdict,
    })
}

/// Brute force over every (profile, label) pair of size n: builds each
/// special cycle and sums the presence probabilities directly. Oracle for
/// `family_sum`; exponential in n, parallel over choice prefixes.
pub fn family_sum_brute_force(n: usize, p: &Rat, r: &Rat) -> Result<Rat, DivergeError> {
    use rayon::prelude::*;
    let intrinsic = [r.clone(), Rat::one() - r];
    // step/label choices per position 0..n-1; moving steps force label 1
    let choices = [(1i64, 1u8), (0, 1), (-1, 1), (0, 2)];
    let total_words = choices.len().pow(n as u32);
    let shards = if n >= 4 { choices.len().pow(2) } else { 1 };
    let per_shard = total_words / shards;
    let sums = (0..shards)
        .into_par_iter()
        .map(|shard| -> Result<Rat, DivergeError> {
            let mut total = Rat::zero();
            let mut f = vec![0i64; n + 1];
            let mut g = vec![1u8; n + 1];
            for word in shard * per_shard..(shard + 1) * per_shard {
                let mut code = word;
                let mut ok = true;
                g[n] = 1;
                for k in 0..n {
                    let (step, label) = choices[code % choices.len()];
                    code /= choices.len();
                    f[k + 1] = f[k] + step;
                    g[k] = label;
                }
                if g[0] != 1 || f[n] != 0 {
                    ok = false;
                }
                if ok {
                    let params = SpecialCycleParams { f: f.clone(), g: g.clone() };
                    let (cycle, kappa) = build_special_cycle(&params)?;
                    debug_assert!(cycle.validate().is_empty());
                    let dec = cycle.decorate(kappa).expect("decoration covers every site");
                    total += dec.presence_probability_exact(p, &intrinsic);
                }
            }
            Ok(total)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sums.into_iter().sum())
}

/// f64 view of the exact family sum, safe for small n.
pub fn family_sum_f64(n: usize, p: f64, r: f64) -> Result<f64, DivergeError> {
    let pr = crate::rat::from_f64(p).ok_or(DivergeError::BadParams("p".into()))?;
    let rr = crate::rat::from_f64(r).ok_or(DivergeError::BadParams("r".into()))?;
    Ok(to_f64(&family_sum(n, &pr, &rr)?))
}

/// Integer central trinomial structure: W(n, r) has integer coefficients
/// in r after clearing, which the DP preserves; exposed for tests.
pub fn central_coefficient_as_poly_check(n: usize, r: &Rat) -> bool {
    // evaluate at an integer and check the denominator is bounded by the
    // denominator structure of r alone
    let w = central_coefficient_exact(n, r);
    if r.denom().is_one() {
        w.denom().is_one()
    } else {
        let d = r.denom().pow(n as u32 - 1);
        (w * Rat::from_integer(d)).denom().to_i64() == Some(1)
    }
}
