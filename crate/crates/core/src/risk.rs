//! Distributionally robust cascading risk between inter-vehicle pairs.
//!
//! Pair `i` is assumed to be in the soft-failure level set
//! `W_δ = (−∞, d*)` with `d* = d / (δ + c)`. The risk carried over to pair
//! `j` is `d / inf E[d̄_j | d̄_i < d*] − 1`, where the infimum runs over all
//! noise intensities `g² ∈ [(1−ε)g₀², (1+ε)g₀²]`.
//!
//! Pair labels in this module are 1-based (`1..=n−1`).

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::special::{inverse_mills, ln_erfc};
use crate::statistics::DistanceStatistics;

/// Correlations with magnitude below this are treated as exactly zero.
pub const RHO_ZERO_TOL: f64 = 1e-12;

/// Standardised distance `(d − d*)/σ_i` beyond which the truncated-normal
/// ratio is evaluated through the scaled complementary error function.
pub const DEEP_TAIL: f64 = 8.0;

/// Default absolute slack on eigenvalues in Loewner-order tests, relative to
/// the largest entry of the reference matrix.
pub const LOEWNER_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemicLevelSet {
    pub delta: f64,
    pub c: f64,
    pub d_star: f64,
}

impl SystemicLevelSet {
    pub fn new(d: f64, delta: f64, c: f64) -> Result<Self> {
        Ok(Self {
            delta,
            c,
            d_star: systemic_threshold(d, delta, c)?,
        })
    }
}

/// `d* = d / (δ + c)`.
pub fn systemic_threshold(d: f64, delta: f64, c: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid(format!("d = {d} must be positive")));
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::invalid(format!("delta = {delta} must be non-negative")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("c = {c} must be positive")));
    }
    Ok(d / (delta + c))
}

/// Ball of plausible noise laws around a reference.
#[derive(Debug, Clone, PartialEq)]
pub enum AmbiguitySet {
    /// `(1−ε)g₀² ≤ g² ≤ (1+ε)g₀²`.
    Scalar { g0: f64, eps: f64 },
    /// `(1−ε)Γ₀ ⪯ Γ ⪯ (1+ε)Γ₀` on the input-noise covariance.
    Matrix { gamma0: DMatrix<f64>, eps: f64 },
}

impl AmbiguitySet {
    pub fn scalar(g0: f64, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        if !(g0.is_finite() && g0 > 0.0) {
            return Err(Error::invalid(format!("g0 = {g0} must be positive")));
        }
        Ok(Self::Scalar { g0, eps })
    }

    pub fn matrix(gamma0: DMatrix<f64>, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        check_symmetric(&gamma0, "gamma0")?;
        if gamma0.clone().symmetric_eigenvalues().min() <= 0.0 {
            return Err(Error::invalid("gamma0 must be positive definite"));
        }
        Ok(Self::Matrix { gamma0, eps })
    }

    pub fn eps(&self) -> f64 {
        match self {
            Self::Scalar { eps, .. } | Self::Matrix { eps, .. } => *eps,
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    // ε = 0 is the singleton set.
    if !(eps.is_finite() && (0.0..1.0).contains(&eps)) {
        return Err(Error::invalid(format!("eps = {eps} must lie in [0, 1)")));
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::invalid(format!("{name} must be square and non-empty")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return Err(Error::invalid(format!("{name} must be symmetric")));
    }
    Ok(())
}

fn check_moments(sigma_i: f64, sigma_j: f64, rho: f64, d_star: f64) -> Result<()> {
    if !(sigma_i.is_finite() && sigma_i > 0.0 && sigma_j.is_finite() && sigma_j > 0.0) {
        return Err(Error::invalid(format!(
            "standard deviations ({sigma_i}, {sigma_j}) must be positive"
        )));
    }
    if rho.is_nan() || rho.abs() >= 1.0 {
        return Err(Error::invalid(format!("correlation {rho} must satisfy |rho| < 1")));
    }
    if !d_star.is_finite() {
        return Err(Error::invalid(format!("threshold d* = {d_star} must be finite")));
    }
    Ok(())
}

/// `E[d̄_j | d̄_i < d*]` for a bivariate normal with common mean `d`:
///
/// ```text
/// d − √(2/π)·ρ σ_j·exp(−(d*−d)²/(2σ_i²)) / (1 + erf((d*−d)/(√2 σ_i)))
/// ```
pub fn conditional_expectation(d: f64, sigma_i: f64, sigma_j: f64, rho_ji: f64, d_star: f64) -> Result<f64> {
    check_moments(sigma_i, sigma_j, rho_ji, d_star)?;
    if rho_ji == 0.0 {
        return Ok(d);
    }
    let z = (d_star - d) / sigma_i;
    Ok(d - rho_ji * sigma_j * inverse_mills(z, DEEP_TAIL))
}

/// `h(ε)`: the conditional expectation with both variances inflated by `1+ε`.
pub fn h_eps(eps: f64, d: f64, sigma_i0: f64, sigma_j0: f64, rho_ji: f64, d_star: f64) -> Result<f64> {
    if !(eps.is_finite() && 1.0 + eps > 0.0) {
        return Err(Error::invalid(format!("1 + eps must be positive, got eps = {eps}")));
    }
    check_moments(sigma_i0, sigma_j0, rho_ji, d_star)?;
    if rho_ji == 0.0 {
        return Ok(d);
    }
    let inflation = (1.0 + eps).sqrt();
    // exponent −(d*−d)²/(2σ_i0²(1+ε)) and erf argument (d*−d)/(√(2(1+ε))σ_i0)
    let erf_arg = (d_star - d) / ((2.0 * (1.0 + eps)).sqrt() * sigma_i0);
    let z = SQRT_2 * erf_arg;
    Ok(d - rho_ji * sigma_j0 * inflation * inverse_mills(z, DEEP_TAIL))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskEntry {
    /// 1-based pair label.
    pub j: usize,
    pub rho_ji: f64,
    /// `inf E[d̄_j | d̄_i ∈ W_δ]` over the ambiguity set (m).
    pub worst_case_expectation: f64,
    /// `+∞` when `degenerate`.
    pub risk: f64,
    /// Set when the worst-case expectation is not positive.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskResult {
    /// 1-based conditioning pair.
    pub i: usize,
    pub entries: Vec<RiskEntry>,
}

impl RiskResult {
    pub fn risk_of(&self, j: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.j == j).map(|e| e.risk)
    }
}

fn check_pair(stats: &DistanceStatistics, label: usize, name: &str) -> Result<usize> {
    let m = stats.pairs();
    if label == 0 || label > m {
        return Err(Error::invalid(format!("pair {name} = {label} outside 1..={m}")));
    }
    Ok(label - 1)
}

/// Robust cascading risk of pair `j` given a soft failure of pair `i`.
pub fn dr_cascading_risk(
    stats: &DistanceStatistics,
    i: usize,
    j: usize,
    level: &SystemicLevelSet,
    amb: &AmbiguitySet,
) -> Result<RiskEntry> {
    let (g0, eps) = match amb {
        AmbiguitySet::Scalar { g0, eps } => (*g0, *eps),
        AmbiguitySet::Matrix { .. } => {
            return Err(Error::invalid(
                "cascading risk is defined for the scalar diffusion ambiguity set",
            ))
        }
    };
    let ii = check_pair(stats, i, "i")?;
    let jj = check_pair(stats, j, "j")?;
    if ii == jj {
        return Err(Error::invalid(format!("conditioning pair and target pair coincide ({i})")));
    }
    let d = stats.d;
    let rho = stats.rho[(jj, ii)];
    if rho.abs() < RHO_ZERO_TOL {
        return Ok(RiskEntry {
            j,
            rho_ji: rho,
            worst_case_expectation: d,
            risk: 0.0,
            degenerate: false,
        });
    }
    let scale = g0 / stats.g;
    let sigma_i0 = stats.std_dev(ii) * scale;
    let sigma_j0 = stats.std_dev(jj) * scale;
    // E is decreasing in g for ρ > 0 and increasing for ρ < 0.
    let eps_signed = if rho > 0.0 { eps } else { -eps };
    let worst = h_eps(eps_signed, d, sigma_i0, sigma_j0, rho, level.d_star)?;
    let (risk, degenerate) = if worst.is_finite() && worst > 0.0 {
        (d / worst - 1.0, false)
    } else {
        (f64::INFINITY, true)
    };
    Ok(RiskEntry {
        j,
        rho_ji: rho,
        worst_case_expectation: worst,
        risk,
        degenerate,
    })
}

/// Risk of every pair `j ≠ i`, in ascending `j`.
pub fn risk_profile(
    stats: &DistanceStatistics,
    i: usize,
    level: &SystemicLevelSet,
    amb: &AmbiguitySet,
) -> Result<RiskResult> {
    check_pair(stats, i, "i")?;
    let entries = (1..=stats.pairs())
        .filter(|&j| j != i)
        .map(|j| dr_cascading_risk(stats, i, j, level, amb))
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskResult { i, entries })
}

/// `(1−ε)Σ₀ ⪯ Σ ⪯ (1+ε)Σ₀` with eigenvalue slack `tol`.
pub fn loewner_within_tol(sigma: &DMatrix<f64>, sigma0: &DMatrix<f64>, eps: f64, tol: f64) -> Result<bool> {
    if sigma.shape() != sigma0.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch {:?} vs {:?}",
            sigma.shape(),
            sigma0.shape()
        )));
    }
    check_symmetric(sigma, "sigma")?;
    check_symmetric(sigma0, "sigma0")?;
    let upper = sigma0 * (1.0 + eps) - sigma;
    let lower = sigma - sigma0 * (1.0 - eps);
    Ok(min_eigenvalue(&upper) >= -tol && min_eigenvalue(&lower) >= -tol)
}

pub fn loewner_within(sigma: &DMatrix<f64>, sigma0: &DMatrix<f64>, eps: f64) -> Result<bool> {
    let tol = LOEWNER_REL_TOL * sigma0.amax();
    loewner_within_tol(sigma, sigma0, eps, tol)
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = 0.5 * (m + m.transpose());
    sym.symmetric_eigenvalues().min()
}

/// Eigenvalue lower bound on the cascading risk over the output ambiguity
/// set, `d / f(μ_max, μ_min) − 1` with
///
/// ```text
/// f = √(μ_max(1+ε)) / √(½(1 + erf((d* − d) / (2√(μ_min(1−ε))))))
/// ```
///
/// evaluated exactly in this form.
pub fn risk_lower_bound(sigma0: &DMatrix<f64>, eps: f64, d: f64, d_star: f64) -> Result<f64> {
    check_symmetric(sigma0, "sigma0")?;
    check_eps(eps)?;
    let ev = sigma0.clone().symmetric_eigenvalues();
    let (mu_min, mu_max) = (ev.min(), ev.max());
    if mu_min <= 0.0 {
        return Err(Error::invalid("sigma0 must be positive definite"));
    }
    let x = (d_star - d) / (2.0 * (mu_min * (1.0 - eps)).sqrt());
    // ½(1 + erf(x)) = ½·erfc(−x)
    let ln_mass = 0.5f64.ln() + ln_erfc(-x);
    let ln_f = 0.5 * (mu_max * (1.0 + eps)).ln() - 0.5 * ln_mass;
    Ok(d / ln_f.exp() - 1.0)
}
