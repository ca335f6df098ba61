//! Delay-dependent stability region for the consensus platoon.
//!
//! A mode with Laplacian eigenvalue `λ` is stable under delay `τ` and
//! position gain `β` when `(λτ, βτ)` lies in the open set
//! `{ s1 ∈ (0, π/2), s2 ∈ (0, a / tan a) }`, where `a ∈ (0, π/2)` solves
//! `a·sin(a) = s1`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::graph::SpectralData;

const RESIDUAL_TOL: f64 = 1e-12;

/// Dimensionless pair `(λτ, βτ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityQuery {
    pub s1: f64,
    pub s2: f64,
}

/// Unique `a ∈ (0, π/2)` with `a·sin(a) = s1`.
///
/// `a·sin(a)` is strictly increasing on the interval, so a bracketing
/// bisection step is taken whenever a Newton step would leave the bracket.
pub fn solve_a(s1: f64) -> Result<f64> {
    if !(s1 > 0.0 && s1 < FRAC_PI_2) {
        return Err(Error::OutOfDomain {
            value: s1,
            domain: "(0, pi/2)",
        });
    }
    let residual = |a: f64| a * a.sin() - s1;
    let (mut lo, mut hi) = (0.0_f64, FRAC_PI_2);
    // a ≈ √s1 for small s1; clamp into the bracket.
    let mut a = s1.sqrt().min(FRAC_PI_2 * 0.999);
    for _ in 0..200 {
        let r = residual(a);
        if r.abs() <= RESIDUAL_TOL * s1.min(1.0) {
            return Ok(a);
        }
        if r > 0.0 {
            hi = a;
        } else {
            lo = a;
        }
        let slope = a.sin() + a * a.cos();
        let newton = a - r / slope;
        a = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    if residual(a).abs() <= RESIDUAL_TOL {
        Ok(a)
    } else {
        Err(Error::OutOfDomain {
            value: s1,
            domain: "(0, pi/2): root finder did not converge",
        })
    }
}

/// Upper limit `a / tan(a)` on `s2` for a given `s1`.
pub fn s2_limit(s1: f64) -> Result<f64> {
    let a = solve_a(s1)?;
    Ok(a / a.tan())
}

pub fn in_stability_region(q: StabilityQuery) -> bool {
    if q.s2.is_nan() || q.s2 <= 0.0 {
        return false;
    }
    match s2_limit(q.s1) {
        Ok(limit) => q.s2 < limit,
        Err(_) => false,
    }
}

/// Per-mode verdict used by reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVerdict {
    /// 1-based eigenvalue index.
    pub k: usize,
    pub lambda: f64,
    pub s1: f64,
    pub s2: f64,
    /// `None` when `s1` lies outside `(0, π/2)`.
    pub a: Option<f64>,
    pub s2_limit: Option<f64>,
    pub stable: bool,
}

/// Verdicts for modes `k = 2..n`; the consensus mode `λ₁ = 0` is skipped.
pub fn mode_verdicts(spec: &SpectralData, tau: f64, beta: f64) -> Result<Vec<ModeVerdict>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("tau = {tau} must be positive")));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid(format!("beta = {beta} must be positive")));
    }
    Ok((1..spec.n())
        .map(|k| {
            let lambda = spec.eigenvalues[k];
            let q = StabilityQuery {
                s1: lambda * tau,
                s2: beta * tau,
            };
            let a = solve_a(q.s1).ok();
            let limit = a.map(|a| a / a.tan());
            ModeVerdict {
                k: k + 1,
                lambda,
                s1: q.s1,
                s2: q.s2,
                a,
                s2_limit: limit,
                stable: in_stability_region(q),
            }
        })
        .collect())
}

pub fn platoon_stable(spec: &SpectralData, tau: f64, beta: f64) -> Result<bool> {
    Ok(mode_verdicts(spec, tau, beta)?.iter().all(|m| m.stable))
}

/// Returns `UnstableParameters` unless every non-consensus mode is stable.
pub fn require_stable(spec: &SpectralData, tau: f64, beta: f64) -> Result<()> {
    let verdicts = mode_verdicts(spec, tau, beta)?;
    match verdicts.iter().find(|m| !m.stable) {
        None => Ok(()),
        Some(m) => Err(Error::UnstableParameters(format!(
            "mode {} has (lambda*tau, beta*tau) = ({}, {}) outside the stability region",
            m.k, m.s1, m.s2
        ))),
    }
}
