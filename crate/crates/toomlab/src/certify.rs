//! Stability certificates: evaluates the constants of the two abstract
//! Peierls bounds (the sigma = 2 cycle bound and the general bound),
//! carries the worked model presets, and optimizes the certified noise
//! threshold over parameter grids.
//!
//! Conventions: theta parametrizes the exponential tilt as
//! `theta = exp(-unit * lambda)`, with the unit chosen per model so that
//! reported constants are directly comparable across sources (NEC rule:
//! unit 3; triangular and branching models: unit 1). Certificates are
//! evaluated in f64 with exact rational values carried alongside wherever
//! the inputs are rational (the normalizers B and the tilt correction
//! delta, notably).

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::automaton::{builtin_model, RuleFamily};
use crate::contour::{ChainSpec, ChargeSets, DecorationMode, Num, Site};
use crate::geometry::{LinearForm, SpaceTimePolar, SpatialPolar};
use crate::rat::{rat, to_f64, Rat};

#[derive(Debug, Error)]
pub enum CertifyError {
    #[error("weight is zero at {site:?} (charge {charge}, map {map}) but the tilt is positive there")]
    ZeroWeight { site: Site, charge: usize, map: usize },
    #[error("certificate failed: C_bullet = {c_bullet} leaves no room for p_circ > 0")]
    Failed { c_bullet: f64 },
    #[error("no grid point produced a valid certificate")]
    AllFailed,
    #[error("invalid tilt decomposition: {0}")]
    InvalidBeta(String),
    #[error("cycle bound needs sigma = 2 and untilted source/second-charge laws")]
    WrongMode,
    #[error("p = {p} exceeds the certified threshold {eps}")]
    OutOfRange { p: f64, eps: f64 },
    #[error(transparent)]
    Contour(#[from] crate::contour::ContourError),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

/// A rational together with the claim that the value of interest is its
/// square root; closed under the sup/inf/product algebra of the tilt
/// decomposition, which keeps delta exact even when individual entries
/// are irrational square roots.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtRat {
    /// square of the value (the value itself is the nonnegative root)
    pub sq: Rat,
}

impl SqrtRat {
    pub fn of_rat(r: &Rat) -> Self {
        SqrtRat { sq: r * r }
    }

    pub fn sqrt_of(sq: Rat) -> Self {
        SqrtRat { sq }
    }

    pub fn value(&self) -> f64 {
        to_f64(&self.sq).sqrt()
    }

    pub fn mul(&self, other: &SqrtRat) -> SqrtRat {
        SqrtRat { sq: &self.sq * &other.sq }
    }

    pub fn min_one(&self) -> SqrtRat {
        if self.sq >= Rat::one() {
            SqrtRat { sq: Rat::one() }
        } else {
            self.clone()
        }
    }

    pub fn max(&self, other: &SqrtRat) -> SqrtRat {
        if self.sq >= other.sq {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn min(&self, other: &SqrtRat) -> SqrtRat {
        if self.sq <= other.sq {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Exact square root when the square is a ratio of perfect squares.
    pub fn exact(&self) -> Option<Rat> {
        let num = self.sq.numer();
        let den = self.sq.denom();
        if num.is_negative() {
            return None;
        }
        let ns = num.sqrt();
        let ds = den.sqrt();
        if &(&ns * &ns) == num && &(&ds * &ds) == den {
            Some(Rat::new(ns, ds))
        } else {
            None
        }
    }
}

/// The full input of a certificate evaluation.
#[derive(Debug, Clone)]
pub struct ContourModelSpec {
    pub family: RuleFamily,
    /// chosen sets, edge weights, tilted decoration laws, normalizers
    pub chain: ChainSpec,
    pub polar: SpaceTimePolar,
    pub theta: Num,
    pub theta_unit: i64,
    /// beta[sup'][s][k-1]: multiplicative split of the decoration tilts
    /// (general mode); None means all tilts are trivial
    pub beta: Option<Vec<Vec<Vec<SqrtRat>>>>,
    pub p_hat: f64,
}

impl ContourModelSpec {
    pub fn sigma(&self) -> usize {
        self.chain.sigma()
    }

    pub fn m(&self) -> usize {
        self.chain.m()
    }

    /// exp(-lambda L_s(j)) = theta^(L_s(j)/unit)
    pub fn tilt(&self, s: usize, j: &Site) -> f64 {
        let l = to_f64(&self.polar.eval(s, j));
        self.theta.f.powf(l / self.theta_unit as f64)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub enum CertStatus {
    Valid,
    Failed,
}

/// Every constant of a certificate evaluation, plus the resulting noise
/// threshold and density bound.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub mode: String,
    pub sigma: usize,
    pub m: usize,
    pub theta: f64,
    pub theta_unit: i64,
    pub p_hat: f64,
    /// alpha_bullet[s][k-1]
    pub alpha_bullet: Vec<Vec<f64>>,
    /// alpha_circ[s][k-1] (cycle mode: the tilde variant over the opposite set)
    pub alpha_circ: Vec<Vec<f64>>,
    pub b_bullet: f64,
    pub b_circ: f64,
    pub b_bullet_exact: Option<String>,
    pub b_circ_exact: Option<String>,
    pub gamma_bullet: Vec<f64>,
    pub gamma_circ: Vec<f64>,
    pub delta: f64,
    pub delta_exact: Option<String>,
    pub c_bullet: f64,
    pub c_circ: f64,
    pub p_circ: f64,
    pub status: CertStatus,
    /// certified noise threshold; None when the certificate failed
    pub epsilon: Option<f64>,
    /// the density bound reads 1 - rho(p) <= p / bound_scale for p <= epsilon
    pub bound_scale: f64,
}

impl CertificateReport {
    pub fn epsilon_or_zero(&self) -> f64 {
        self.epsilon.unwrap_or(0.0)
    }
}

/// Lower bound on the density of the maximal trajectory at noise p.
pub fn rho_lower_bound(report: &CertificateReport, p: f64) -> Result<f64, CertifyError> {
    let eps = report.epsilon.ok_or(CertifyError::Failed { c_bullet: report.c_bullet })?;
    if p > eps {
        return Err(CertifyError::OutOfRange { p, eps });
    }
    Ok(1.0 - p / report.bound_scale)
}

/// The smallest constants dominating the tilt by the edge weights:
/// alpha_bullet over each chosen set, alpha_circ over each source-target
/// set (the union in general mode, the opposite set in cycle mode).
pub struct AlphaTables {
    pub bullet: Vec<Vec<f64>>,
    pub circ: Vec<Vec<f64>>,
}

pub fn compute_alphas(spec: &ContourModelSpec) -> Result<AlphaTables, CertifyError> {
    let sigma = spec.sigma();
    let m = spec.m();
    let sets = &spec.chain.sets;
    let lookup = |rows: &Vec<(Site, Num)>, j: &Site| -> f64 {
        rows.iter().find(|(site, _)| site == j).map(|(_, w)| w.f).unwrap_or(0.0)
    };
    let mut bullet = vec![vec![0.0f64; m]; sigma];
    let mut circ = vec![vec![0.0f64; m]; sigma];
    for s in 0..sigma {
        for k in 1..=m as u8 {
            for j in sets.a_set(s, k) {
                let num = spec.tilt(s, j);
                let w = lookup(&spec.chain.bullet[s][(k - 1) as usize], j);
                if w == 0.0 {
                    return Err(CertifyError::ZeroWeight {
                        site: j.clone(),
                        charge: s + 1,
                        map: k as usize,
                    });
                }
                bullet[s][(k - 1) as usize] = bullet[s][(k - 1) as usize].max(num / w);
            }
            for j in sets.source_target(spec.chain.mode, s, k) {
                let num = spec.tilt(s, &j);
                let w = lookup(&spec.chain.circ[s][(k - 1) as usize], &j);
                if w == 0.0 {
                    return Err(CertifyError::ZeroWeight {
                        site: j.clone(),
                        charge: s + 1,
                        map: k as usize,
                    });
                }
                circ[s][(k - 1) as usize] = circ[s][(k - 1) as usize].max(num / w);
            }
        }
    }
    Ok(AlphaTables { bullet, circ })
}

/// The weight-table normalizers (sum over sites of the per-map supremum of
/// the last charge's weights), exact when the weights are.
pub fn compute_b(spec: &ContourModelSpec) -> (Num, Num) {
    (spec.chain.b_bullet.clone(), spec.chain.b_circ.clone())
}

fn decoration_tilts(spec: &ContourModelSpec) -> Result<Vec<Vec<f64>>, CertifyError> {
    // beta_{t,k} = r(k) / rhat_t(k) for the charge laws
    let m = spec.m();
    let r = spec.family.intrinsic_f64();
    let mut out = Vec::with_capacity(spec.sigma());
    for s in 0..spec.sigma() {
        let mut row = Vec::with_capacity(m);
        for k in 0..m {
            let denom = spec.chain.rhat_charge[s][k].f;
            if denom <= 0.0 {
                return Err(CertifyError::InvalidBeta(format!(
                    "decoration law of charge {} gives zero mass to map {}",
                    s + 1,
                    k + 1
                )));
            }
            row.push(r[k] / denom);
        }
        out.push(row);
    }
    Ok(out)
}

fn rhat_is_intrinsic(rhat: &[Num], family: &RuleFamily) -> bool {
    let r = family.intrinsic_f64();
    rhat.len() == r.len() && rhat.iter().zip(&r).all(|(a, b)| (a.f - b).abs() <= 1e-12)
}

#[allow(clippy::too_many_arguments)]
fn finish_report(
    spec: &ContourModelSpec,
    mode: &str,
    alphas: AlphaTables,
    gamma_bullet: Vec<f64>,
    gamma_circ: Vec<f64>,
    delta: f64,
    delta_exact: Option<Rat>,
    c_circ_delta: bool,
) -> CertificateReport {
    let (b_bullet, b_circ) = compute_b(spec);
    let c_bullet = b_bullet.f * gamma_bullet.iter().product::<f64>();
    let mut c_circ = b_circ.f * gamma_circ.iter().product::<f64>();
    if c_circ_delta {
        c_circ /= delta;
    }
    let p_hat = spec.p_hat;
    let p_circ = 1.0 - (1.0 - p_hat).powi(-(spec.sigma() as i32)) * c_bullet;
    let bound_scale = p_hat * (1.0 - p_hat);
    let (status, epsilon) = if p_circ > 0.0 {
        (CertStatus::Valid, Some(bound_scale * p_circ / c_circ))
    } else {
        (CertStatus::Failed, None)
    };
    CertificateReport {
        mode: mode.to_string(),
        sigma: spec.sigma(),
        m: spec.m(),
        theta: spec.theta.f,
        theta_unit: spec.theta_unit,
        p_hat,
        alpha_bullet: alphas.bullet,
        alpha_circ: alphas.circ,
        b_bullet: b_bullet.f,
        b_circ: b_circ.f,
        b_bullet_exact: b_bullet.exact.as_ref().map(|r| r.to_string()),
        b_circ_exact: b_circ.exact.as_ref().map(|r| r.to_string()),
        gamma_bullet,
        gamma_circ,
        delta,
        delta_exact: delta_exact.map(|r| r.to_string()),
        c_bullet,
        c_circ,
        p_circ,
        status,
        epsilon,
        bound_scale,
    }
}

/// The sigma = 2 bound: the first-charge decoration law may be tilted, the
/// source and second-charge laws must stay intrinsic, and the source
/// alphas are taken over the opposite chosen sets.
pub fn cycle_certificate(spec: &ContourModelSpec) -> Result<CertificateReport, CertifyError> {
    if spec.sigma() != 2
        || spec.chain.mode != DecorationMode::Cycle
        || !rhat_is_intrinsic(&spec.chain.rhat_source, &spec.family)
        || !rhat_is_intrinsic(&spec.chain.rhat_charge[1], &spec.family)
    {
        return Err(CertifyError::WrongMode);
    }
    let alphas = compute_alphas(spec)?;
    let beta = decoration_tilts(spec)?;
    let m = spec.m();
    let gamma_bullet: Vec<f64> = (0..2)
        .map(|s| (0..m).map(|k| beta[s][k] * alphas.bullet[s][k]).fold(0.0, f64::max))
        .collect();
    let gamma_circ: Vec<f64> =
        (0..2).map(|s| alphas.circ[s].iter().cloned().fold(0.0, f64::max)).collect();
    Ok(finish_report(spec, "cycle", alphas, gamma_bullet, gamma_circ, 1.0, Some(Rat::one()), false))
}

/// The general bound: decoration tilts must factor across charges with the
/// off-diagonal factors at most one; the source law must stay intrinsic.
pub fn general_certificate(spec: &ContourModelSpec) -> Result<CertificateReport, CertifyError> {
    if !rhat_is_intrinsic(&spec.chain.rhat_source, &spec.family) {
        return Err(CertifyError::WrongMode);
    }
    let sigma = spec.sigma();
    let m = spec.m();
    let alphas = compute_alphas(spec)?;
    let beta_full = decoration_tilts(spec)?;

    // resolve the decomposition; trivial tilts allow the trivial split
    let decomp: Vec<Vec<Vec<SqrtRat>>> = match &spec.beta {
        Some(table) => {
            if table.len() != sigma
                || table.iter().any(|t| t.len() != sigma || t.iter().any(|r| r.len() != m))
            {
                return Err(CertifyError::InvalidBeta("decomposition shape mismatch".into()));
            }
            for sup in 0..sigma {
                for s in 0..sigma {
                    for k in 0..m {
                        if sup != s && table[sup][s][k].sq > Rat::one() {
                            return Err(CertifyError::InvalidBeta(format!(
                                "off-diagonal factor ({},{},{}) exceeds one",
                                sup + 1,
                                s + 1,
                                k + 1
                            )));
                        }
                    }
                }
            }
            for s in 0..sigma {
                for k in 0..m {
                    let prod = (0..sigma)
                        .fold(SqrtRat::of_rat(&Rat::one()), |acc, sup| acc.mul(&table[sup][s][k]));
                    if (prod.value() - beta_full[s][k]).abs() > 1e-9 * beta_full[s][k].max(1.0) {
                        return Err(CertifyError::InvalidBeta(format!(
                            "factors of ({},{}) do not multiply to the tilt {}",
                            s + 1,
                            k + 1,
                            beta_full[s][k]
                        )));
                    }
                }
            }
            table.clone()
        }
        None => {
            let trivially_tilted =
                (0..sigma).all(|s| rhat_is_intrinsic(&spec.chain.rhat_charge[s], &spec.family));
            if !trivially_tilted {
                return Err(CertifyError::InvalidBeta(
                    "tilted decoration laws need an explicit decomposition".into(),
                ));
            }
            vec![vec![vec![SqrtRat::of_rat(&Rat::one()); m]; sigma]; sigma]
        }
    };

    // beta^s_k = sup over the subscript of the fixed-superscript factors
    let beta_sup: Vec<Vec<SqrtRat>> = (0..sigma)
        .map(|s| {
            (0..m)
                .map(|k| {
                    (0..sigma)
                        .fold(SqrtRat::sqrt_of(Rat::zero()), |acc, sub| acc.max(&decomp[s][sub][k]))
                })
                .collect()
        })
        .collect();
    let delta_exact_sq = (0..m)
        .map(|k| {
            (0..sigma)
                .fold(SqrtRat::of_rat(&Rat::one()), |acc, s| acc.mul(&beta_sup[s][k].min_one()))
        })
        .reduce(|a, b| a.min(&b))
        .unwrap();
    let delta = delta_exact_sq.value();
    let gamma_bullet: Vec<f64> = (0..sigma)
        .map(|s| {
            (0..m).map(|k| beta_sup[s][k].value() * alphas.bullet[s][k]).fold(0.0, f64::max)
        })
        .collect();
    let gamma_circ: Vec<f64> =
        (0..sigma).map(|s| alphas.circ[s].iter().cloned().fold(0.0, f64::max)).collect();
    Ok(finish_report(
        spec,
        "general",
        alphas,
        gamma_bullet,
        gamma_circ,
        delta,
        delta_exact_sq.exact(),
        true,
    ))
}

/// Dispatch on the spec's decoration mode.
pub fn certificate(spec: &ContourModelSpec) -> Result<CertificateReport, CertifyError> {
    match spec.chain.mode {
        DecorationMode::Cycle => cycle_certificate(spec),
        DecorationMode::General => general_certificate(spec),
    }
}

// -------------------------------------------------------------------------
// chosen-set selection and the worked presets

/// Picks, per charge and map, the minimal one-set maximizing the smallest
/// polar value (ties: lexicographically first), lifted to the previous
/// time slice.
pub fn select_charge_sets(family: &RuleFamily, polar: &SpaceTimePolar) -> ChargeSets {
    let sigma = polar.sigma();
    let dim = family.dimension();
    let lift = |v: &[i64]| -> Site {
        let mut site = v.to_vec();
        site.push(-1);
        site
    };
    let mut a_sets = Vec::with_capacity(sigma);
    for s in 0..sigma {
        let mut per_k = Vec::with_capacity(family.len());
        for map in family.maps() {
            let best = map
                .one_sets()
                .iter()
                .max_by(|a, b| {
                    let min_a = a.members().iter().map(|j| polar.eval(s, &lift(j))).min().unwrap();
                    let min_b = b.members().iter().map(|j| polar.eval(s, &lift(j))).min().unwrap();
                    // ties: prefer the earlier (lexicographically smaller) set
                    min_a.cmp(&min_b).then(b.members().cmp(a.members()))
                })
                .unwrap();
            per_k.push(best.members().iter().map(|j| lift(j)).collect());
        }
        a_sets.push(per_k);
    }
    ChargeSets::new(sigma, family.len(), dim, a_sets)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    /// NEC majority rule with the symmetric three-form polar (unit 3)
    ToomNec,
    /// triangular trio, plain weights: B_bullet = 11/10
    TriangularFirst,
    /// triangular trio, tuned weights with c = 4 sqrt(4/3)
    TriangularImproved,
    /// branching + identity at rate r, cycle mode, closed-form tilt
    Coop { r: Rat },
}

impl Preset {
    pub fn parse(name: &str, rate: Option<Rat>) -> Result<Preset, CertifyError> {
        match name {
            "paper-4.2" | "toom-nec" => Ok(Preset::ToomNec),
            "paper-4.3" | "paper-4.3-first" | "triangular-first" => Ok(Preset::TriangularFirst),
            "paper-4.3-improved" | "triangular-improved" => Ok(Preset::TriangularImproved),
            "paper-4.4" | "coop" => Ok(Preset::Coop {
                r: rate.ok_or_else(|| CertifyError::UnknownPreset("coop needs a rate".into()))?,
            }),
            other => Err(CertifyError::UnknownPreset(other.to_string())),
        }
    }

    pub fn default_theta(&self) -> f64 {
        match self {
            Preset::ToomNec => 0.05,
            // the plain weights need a smaller tilt than the tuned ones
            Preset::TriangularFirst => 0.02,
            Preset::TriangularImproved => 0.033,
            Preset::Coop { .. } => 1.0 / 6.0,
        }
    }

    pub fn default_p_hat(&self) -> f64 {
        match self {
            Preset::ToomNec => 0.14,
            Preset::TriangularFirst => 0.003,
            Preset::TriangularImproved => 0.016,
            Preset::Coop { r } => to_f64(r) / 6.0,
        }
    }
}

fn form(coeffs: &[i64]) -> LinearForm {
    LinearForm::new_allow_zero(coeffs.iter().map(|&c| Rat::from_integer(BigInt::from(c))).collect())
}

/// The NEC-coordinate version of the symmetric three-form polar, drift
/// (1/3, 1/3): values 1 on each chosen pair and -2 on the third cell.
pub fn nec_polar() -> SpaceTimePolar {
    let base = SpatialPolar::new(vec![form(&[-3, 0]), form(&[0, -3]), form(&[3, 3])]).unwrap();
    SpaceTimePolar::new(base, vec![rat(1, 3), rat(1, 3)]).unwrap()
}

pub fn triangular_polar() -> SpaceTimePolar {
    let base = SpatialPolar::new(vec![form(&[-1, -1]), form(&[2, -1]), form(&[-1, 2])]).unwrap();
    SpaceTimePolar::without_drift(base)
}

pub fn coop_polar() -> SpaceTimePolar {
    let base = SpatialPolar::new(vec![form(&[1, 1]), form(&[-1, -1])]).unwrap();
    SpaceTimePolar::without_drift(base)
}

fn num_weight_rows(
    sets: &ChargeSets,
    mode: DecorationMode,
    circ: bool,
    weight: impl Fn(usize, u8, &Site) -> Num,
) -> Vec<Vec<Vec<(Site, Num)>>> {
    (0..sets.sigma)
        .map(|s| {
            (1..=sets.m as u8)
                .map(|k| {
                    let targets = if circ {
                        sets.source_target(mode, s, k)
                    } else {
                        sets.a_set(s, k).to_vec()
                    };
                    targets
                        .into_iter()
                        .map(|j| {
                            let w = weight(s, k, &j);
                            (j, w)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Builds the full model spec of a preset at the given tilt and sink
/// parameters. `theta` may carry an exact rational for exact-value paths.
pub fn build_preset(
    preset: &Preset,
    theta: Num,
    p_hat: f64,
) -> Result<ContourModelSpec, CertifyError> {
    match preset {
        Preset::ToomNec => {
            let family = builtin_model("toom-nec", None).unwrap();
            let polar = nec_polar();
            let sets = select_charge_sets(&family, &polar);
            let th = theta.f;
            // uniform on the two-point chosen sets
            let bullet = num_weight_rows(&sets, DecorationMode::General, false, |_s, _k, _j| {
                Num::from_rat(rat(1, 2))
            });
            // normalized exponential over the union set
            let polar2 = polar.clone();
            let z = {
                let mut best: f64 = 0.0;
                for s in 0..sets.sigma {
                    for k in 1..=sets.m as u8 {
                        let sum: f64 = sets
                            .delta(k)
                            .iter()
                            .map(|j| th.powf(to_f64(&polar2.eval(s, j)) / 3.0))
                            .sum();
                        best = best.max(sum);
                    }
                }
                best
            };
            let circ = num_weight_rows(&sets, DecorationMode::General, true, |s, _k, j| {
                Num::from_f64(th.powf(to_f64(&polar2.eval(s, j)) / 3.0) / z)
            });
            let one = Num::from_rat(Rat::one());
            let chain = ChainSpec::new(
                sets,
                DecorationMode::General,
                vec![one.clone()],
                bullet,
                circ,
                vec![vec![one.clone()]; 3],
                vec![one],
            )?;
            Ok(ContourModelSpec { family, chain, polar, theta, theta_unit: 3, beta: None, p_hat })
        }
        Preset::TriangularFirst | Preset::TriangularImproved => {
            let improved = matches!(preset, Preset::TriangularImproved);
            let family = builtin_model("triangular-majority", None).unwrap();
            let polar = triangular_polar();
            let sets = select_charge_sets(&family, &polar);
            let th = theta.f;
            let theta_exact = theta.exact.clone();
            let polar2 = polar.clone();
            // c = 4 / sqrt(3/4), only used by the improved weights
            let c = 4.0 / (0.75f64).sqrt();
            let bullet = num_weight_rows(&sets, DecorationMode::General, false, |s, k, j| {
                let l = polar2.eval(s, j);
                if improved {
                    if s == (k - 1) as usize {
                        Num::from_f64(c * th / (1.0 + th))
                    } else if l.is_zero() {
                        Num::from_f64(1.0 / (1.0 + th))
                    } else {
                        Num::from_f64(th / (1.0 + th))
                    }
                } else if s == (k - 1) as usize {
                    Num::from_rat(rat(1, 10))
                } else if l.is_zero() {
                    Num::from_rat(rat(9, 10))
                } else {
                    match &theta_exact {
                        Some(t) => Num::from_rat(rat(9, 10) * t),
                        None => Num::from_f64(0.9 * th),
                    }
                }
            });
            let z = {
                let mut best: f64 = 0.0;
                for s in 0..sets.sigma {
                    for k in 1..=sets.m as u8 {
                        let sum: f64 = sets
                            .delta(k)
                            .iter()
                            .map(|j| th.powf(to_f64(&polar2.eval(s, j))))
                            .sum();
                        best = best.max(sum);
                    }
                }
                best
            };
            let polar3 = polar.clone();
            let circ = num_weight_rows(&sets, DecorationMode::General, true, |s, _k, j| {
                Num::from_f64(th.powf(to_f64(&polar3.eval(s, j))) / z)
            });
            let third = Num::from_rat(rat(1, 3));
            // tilted law: mass 1/9 on the matching map, 4/9 on the others
            let rhat_charge: Vec<Vec<Num>> = (0..3)
                .map(|s| {
                    (0..3)
                        .map(|k| {
                            if s == k {
                                Num::from_rat(rat(1, 9))
                            } else {
                                Num::from_rat(rat(4, 9))
                            }
                        })
                        .collect()
                })
                .collect();
            let chain = ChainSpec::new(
                sets,
                DecorationMode::General,
                vec![third.clone(), third.clone(), third.clone()],
                bullet,
                circ,
                rhat_charge,
                vec![third.clone(), third.clone(), third],
            )?;
            // the tilt factors: sqrt(3/4) off the map's own charge, 4 on it
            let mut beta = vec![vec![vec![SqrtRat::of_rat(&Rat::one()); 3]; 3]; 3];
            for (sup, plane) in beta.iter_mut().enumerate() {
                for (s, row) in plane.iter_mut().enumerate() {
                    for (k, slot) in row.iter_mut().enumerate() {
                        *slot = if sup != k {
                            SqrtRat::sqrt_of(rat(3, 4))
                        } else if s == k {
                            SqrtRat::of_rat(&rat(4, 1))
                        } else {
                            SqrtRat::of_rat(&Rat::one())
                        };
                    }
                }
            }
            Ok(ContourModelSpec {
                family,
                chain,
                polar,
                theta,
                theta_unit: 1,
                beta: Some(beta),
                p_hat,
            })
        }
        Preset::Coop { r } => {
            let family = builtin_model("coop-id", Some(r.clone())).unwrap();
            let polar = coop_polar();
            let sets = select_charge_sets(&family, &polar);
            debug_assert_eq!(sets.a_set(0, 1).len(), 2);
            let bullet = num_weight_rows(&sets, DecorationMode::Cycle, false, |s, k, _j| {
                if s == 0 && k == 1 {
                    Num::from_rat(rat(1, 2))
                } else {
                    Num::from_rat(Rat::one())
                }
            });
            let circ = num_weight_rows(&sets, DecorationMode::Cycle, true, |s, k, _j| {
                if s == 1 && k == 1 {
                    Num::from_rat(rat(1, 2))
                } else {
                    Num::from_rat(Rat::one())
                }
            });
            // closed-form optimal tilt: rhat = 2 theta r / (1 - r + 2 theta r)
            let rhat1 = match &theta.exact {
                Some(t) => {
                    let two_tr = rat(2, 1) * t * r;
                    let denom = Rat::one() - r + &two_tr;
                    Num::from_rat(two_tr / denom)
                }
                None => {
                    let rf = to_f64(r);
                    Num::from_f64(2.0 * theta.f * rf / (1.0 - rf + 2.0 * theta.f * rf))
                }
            };
            let rhat_first = vec![
                rhat1.clone(),
                Num { f: 1.0 - rhat1.f, exact: rhat1.exact.as_ref().map(|x| Rat::one() - x) },
            ];
            let intrinsic = vec![Num::from_rat(r.clone()), Num::from_rat(Rat::one() - r)];
            let chain = ChainSpec::new(
                sets,
                DecorationMode::Cycle,
                intrinsic.clone(),
                bullet,
                circ,
                vec![rhat_first, intrinsic.clone()],
                intrinsic,
            )?;
            Ok(ContourModelSpec { family, chain, polar, theta, theta_unit: 1, beta: None, p_hat })
        }
    }
}

// -------------------------------------------------------------------------
// grid optimization

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeResult {
    pub theta: f64,
    pub p_hat: f64,
    pub epsilon: f64,
    pub report: CertificateReport,
    pub grid_points: usize,
    pub valid_points: usize,
}

/// Log-spaced grid with n points from a to b inclusive.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > a && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Exhaustive maximization of the certified threshold over the grid, with
/// a deterministic reduction (ties broken toward smaller theta, then
/// smaller p_hat).
pub fn optimize(
    preset: &Preset,
    theta_grid: &[f64],
    p_hat_grid: &[f64],
) -> Result<OptimizeResult, CertifyError> {
    let points: Vec<(f64, f64)> =
        theta_grid.iter().flat_map(|&t| p_hat_grid.iter().map(move |&p| (t, p))).collect();
    let evaluated: Vec<(f64, f64, Option<CertificateReport>)> = points
        .par_iter()
        .map(|&(t, p)| {
            let report = build_preset(preset, Num::from_f64(t), p)
                .and_then(|spec| certificate(&spec))
                .ok()
                .filter(|r| r.epsilon.is_some());
            (t, p, report)
        })
        .collect();
    let grid_points = evaluated.len();
    let mut best: Option<(f64, f64, CertificateReport)> = None;
    let mut valid_points = 0;
    for (t, p, report) in evaluated {
        let Some(report) = report else { continue };
        valid_points += 1;
        let eps = report.epsilon_or_zero();
        let better = match &best {
            None => true,
            Some((bt, bp, br)) => {
                let beps = br.epsilon_or_zero();
                eps > beps || (eps == beps && (t, p) < (*bt, *bp))
            }
        };
        if better {
            best = Some((t, p, report));
        }
    }
    let (theta, p_hat, report) = best.ok_or(CertifyError::AllFailed)?;
    Ok(OptimizeResult {
        theta,
        p_hat,
        epsilon: report.epsilon_or_zero(),
        report,
        grid_points,
        valid_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rint;

    fn nec_report(theta: f64, p_hat: f64) -> CertificateReport {
        let spec = build_preset(&Preset::ToomNec, Num::from_f64(theta), p_hat).unwrap();
        general_certificate(&spec).unwrap()
    }

    #[test]
    fn nec_constants_at_reference_point() {
        let rep = nec_report(0.05, 0.14);
        // alpha tables: 2 theta^(1/3) and theta^(-2/3)(1+2 theta)
        let a_bul = 2.0 * 0.05f64.powf(1.0 / 3.0);
        let a_cir = 0.05f64.powf(-2.0 / 3.0) * 1.1;
        for s in 0..3 {
            assert!((rep.alpha_bullet[s][0] - a_bul).abs() < 1e-12);
            assert!((rep.alpha_circ[s][0] - a_cir).abs() < 1e-9);
        }
        assert!((rep.c_bullet - 0.4).abs() < 1e-12);
        assert!((rep.c_circ - 0.05f64.powi(-2) * 1.1f64.powi(3)).abs() < 1e-9);
        let eps = rep.epsilon.unwrap();
        assert!((eps / 8.3928e-5 - 1.0).abs() < 1e-4);
        assert!(eps >= 1.0 / 12000.0);
        let rho = rho_lower_bound(&rep, 1.0 / 12000.0).unwrap();
        assert!(rho >= 0.999);
        assert!((rho - 0.9993).abs() < 1e-4);
    }

    #[test]
    fn triangular_first_preset_exact_constants() {
        // the plain weights give this C_bullet wherever 40 theta <= sqrt(3/4) 10/9
        let spec =
            build_preset(&Preset::TriangularFirst, Num::from_rat(rat(1, 50)), 0.016).unwrap();
        let rep = general_certificate(&spec).unwrap();
        assert_eq!(rep.b_bullet_exact.as_deref(), Some("11/10"));
        assert_eq!(rep.delta_exact.as_deref(), Some("3/4"));
        let c_expect = 275.0 / 243.0 * (0.75f64).sqrt();
        assert!((rep.c_bullet - c_expect).abs() < 1e-12, "{} vs {}", rep.c_bullet, c_expect);
    }

    #[test]
    fn triangular_improved_reaches_published_threshold() {
        let spec = build_preset(&Preset::TriangularImproved, Num::from_f64(0.033), 0.016).unwrap();
        let rep = general_certificate(&spec).unwrap();
        let th: f64 = 0.033;
        let c_expected = (1.0 + 16.0 / 3.0f64.sqrt() * th) * 0.75f64.powf(1.5) * (1.0 + th).powi(2);
        assert!((rep.c_bullet - c_expected).abs() < 1e-12);
        let eps = rep.epsilon.unwrap();
        assert!(eps > 7.7e-13, "eps = {eps}");
        let rho = rho_lower_bound(&rep, eps).unwrap();
        assert!(rho > 1.0 - 5e-11);
    }

    #[test]
    fn coop_closed_form_c_bullet() {
        for (rn, rd, tn, td) in [(1i64, 2i64, 1i64, 6i64), (1, 3, 1, 10), (2, 5, 1, 20)] {
            let r = rat(rn, rd);
            let theta = rat(tn, td);
            let spec =
                build_preset(&Preset::Coop { r: r.clone() }, Num::from_rat(theta.clone()), 0.01)
                    .unwrap();
            let rep = cycle_certificate(&spec).unwrap();
            let expect = to_f64(&(Rat::one() - &r + rat(2, 1) * &theta * &r));
            assert!((rep.c_bullet - expect).abs() < 1e-12);
            assert!((rep.c_circ - 4.0 / to_f64(&theta)).abs() < 1e-9);
            assert_eq!(rep.b_bullet_exact.as_deref(), Some("1"));
            assert_eq!(rep.b_circ_exact.as_deref(), Some("2"));
        }
    }

    #[test]
    fn coop_quadratic_threshold_coefficient() {
        // epsilon(r) / r^2 -> (1/2)(1/6)^3 as r -> 0 at theta = 1/6, p_hat = r/6
        let mut last = 0.0;
        for &r in &[1e-2, 1e-3, 1e-4] {
            let spec = build_preset(
                &Preset::Coop { r: crate::rat::from_f64(r).unwrap() },
                Num::from_f64(1.0 / 6.0),
                r / 6.0,
            )
            .unwrap();
            let rep = cycle_certificate(&spec).unwrap();
            last = rep.epsilon.unwrap() / (r * r);
        }
        let coeff = 0.5 / 216.0;
        assert!((last - coeff).abs() < 1e-6, "{last} vs {coeff}");
    }

    #[test]
    fn degenerate_p_hat_gives_vanishing_threshold() {
        let rep = nec_report(0.05, 1e-9);
        assert!(rep.epsilon.unwrap() < 1e-9);
    }

    #[test]
    fn failed_certificate_reported() {
        // theta too large: C_bullet = 8 theta > 1
        let rep = nec_report(0.2, 0.14);
        assert!(matches!(rep.status, CertStatus::Failed));
        assert!(rep.epsilon.is_none());
        assert!(rho_lower_bound(&rep, 1e-9).is_err());
    }

    #[test]
    fn chosen_sets_match_the_worked_examples() {
        let family = builtin_model("toom-nec", None).unwrap();
        let sets = select_charge_sets(&family, &nec_polar());
        assert_eq!(sets.a_set(0, 1), &[vec![0, 0, -1], vec![0, 1, -1]]);
        assert_eq!(sets.a_set(1, 1), &[vec![0, 0, -1], vec![1, 0, -1]]);
        assert_eq!(sets.a_set(2, 1), &[vec![0, 1, -1], vec![1, 0, -1]]);

        let coop = builtin_model("coop-id(1/2)", None).unwrap();
        let sets = select_charge_sets(&coop, &coop_polar());
        assert_eq!(sets.a_set(0, 1), &[vec![0, 1, -1], vec![1, 0, -1]]);
        assert_eq!(sets.a_set(1, 1), &[vec![0, 0, -1]]);
        assert_eq!(sets.a_set(0, 2), &[vec![0, 0, -1]]);
    }

    #[test]
    fn coop_preset_matches_hand_built_chain_spec() {
        let spec = build_preset(&Preset::Coop { r: rat(1, 2) }, Num::from_rat(rat(1, 6)), 0.3)
            .unwrap();
        // the closed-form tilt at (theta, r) = (1/6, 1/2) is 1/4
        assert_eq!(spec.chain.rhat_charge[0][0].exact().unwrap(), &rat(1, 4));
        assert_eq!(spec.chain.rhat_charge[0][1].exact().unwrap(), &rat(3, 4));
        assert_eq!(spec.chain.b_circ.exact().unwrap(), &rint(2));
    }

    #[test]
    fn small_grid_optimization_beats_fixed_point() {
        let tg = log_grid(0.02, 0.1, 9);
        let pg = log_grid(0.05, 0.3, 9);
        let best = optimize(&Preset::ToomNec, &tg, &pg).unwrap();
        assert!(best.epsilon >= 7.0e-5, "eps = {}", best.epsilon);
        assert!(best.valid_points > 0);
    }
}
