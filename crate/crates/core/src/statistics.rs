//! Steady-state distribution of inter-vehicle distances.
//!
//! Each non-consensus Laplacian mode `k` behaves as a scalar delayed
//! oscillator whose stationary variance is
//! `σ²_{z_k} = g²τ³/(2π) · f(λ_kτ, βτ)` with
//!
//! ```text
//! f(s1, s2) = ∫_ℝ dr / [(s1·s2 − r²cos r)² + r²(s1 − r sin r)²]
//! ```
//!
//! Distances `d̄_i = x_{i+1} − x_i` are the image of the modes under
//! `Dᵀ Q`, so `Σ = (DᵀQ̃) diag(σ²_z) (DᵀQ̃)ᵀ` where `Q̃` drops the consensus
//! column (its image under `Dᵀ` is identically zero).

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::SpectralData;
use crate::quadrature;
use crate::stability::{in_stability_region, require_stable, StabilityQuery};

pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_PANELS: usize = 400_000;
const MAX_DOUBLINGS: usize = 40;

/// Delay, gains and noise intensity of a homogeneous platoon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatoonParams {
    /// Communication delay τ (s).
    pub tau: f64,
    /// Relative weight β of the position term (1/s).
    pub beta: f64,
    /// Target gap d (m).
    pub d: f64,
    /// Diffusion coefficient g (m/s^{3/2}).
    pub g: f64,
}

impl PlatoonParams {
    pub fn new(tau: f64, beta: f64, d: f64, g: f64) -> Result<Self> {
        let p = Self { tau, beta, d, g };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("beta", self.beta), ("d", self.d), ("g", self.g)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} = {v} must be finite and positive")));
            }
        }
        Ok(())
    }

    pub fn with_g(self, g: f64) -> Self {
        Self { g, ..self }
    }
}

/// Gaussian law `d̄ ~ N(mean, sigma)` of the steady-state distance vector.
#[derive(Debug, Clone)]
pub struct DistanceStatistics {
    /// `(n−1)×(n−1)` covariance (m²).
    pub sigma: DMatrix<f64>,
    /// `d·1` (m).
    pub mean: DVector<f64>,
    /// Correlation matrix.
    pub rho: DMatrix<f64>,
    /// Target gap the statistics were computed for.
    pub d: f64,
    /// Diffusion coefficient the statistics were computed for.
    pub g: f64,
}

impl DistanceStatistics {
    pub fn from_covariance(sigma: DMatrix<f64>, d: f64, g: f64) -> Result<Self> {
        let m = sigma.nrows();
        if sigma.ncols() != m || m == 0 {
            return Err(Error::invalid("covariance must be square and non-empty"));
        }
        let sd: Vec<f64> = (0..m).map(|i| sigma[(i, i)].sqrt()).collect();
        if let Some(i) = sd.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid(format!(
                "variance of pair {} is {} (must be positive)",
                i + 1,
                sigma[(i, i)]
            )));
        }
        let rho = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                1.0
            } else {
                (sigma[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
            }
        });
        Ok(Self {
            mean: DVector::from_element(m, d),
            sigma,
            rho,
            d,
            g,
        })
    }

    /// Number of inter-vehicle pairs `n − 1`.
    pub fn pairs(&self) -> usize {
        self.sigma.nrows()
    }

    /// Standard deviation of pair `i` (0-based).
    pub fn std_dev(&self, i: usize) -> f64 {
        self.sigma[(i, i)].sqrt()
    }

    /// Same platoon at diffusion `g`: every entry scales by `(g / self.g)²`.
    pub fn rescaled(&self, g: f64) -> Self {
        let s = (g / self.g).powi(2);
        Self {
            sigma: &self.sigma * s,
            mean: self.mean.clone(),
            rho: self.rho.clone(),
            d: self.d,
            g,
        }
    }
}

/// Denominator of the f-integrand, `|char(ir)|²` of the scaled delay equation.
#[inline]
fn denominator(r: f64, s1: f64, s2: f64) -> f64 {
    let (sin, cos) = r.sin_cos();
    let re = s1 * s2 - r * r * cos;
    let im = r * (s1 - r * sin);
    re * re + im * im
}

/// Evaluates the (even) f-integrand at `r`.
pub fn f_integrand(r: f64, s1: f64, s2: f64) -> f64 {
    1.0 / denominator(r, s1, s2)
}

/// Bracket `[lo, hi]` on `∫_R^∞` of the integrand, from
/// `r⁴ − 2s1 r³ − 2s1s2 r² ≤ D(r) ≤ r⁴ + 2s1 r³ + (2s1s2 + s1²) r² + (s1s2)²`.
pub fn tail_bracket(r: f64, s1: f64, s2: f64) -> Option<(f64, f64)> {
    let lower_factor = 1.0 - 2.0 * s1 / r - 2.0 * s1 * s2 / (r * r);
    if lower_factor <= 0.0 {
        return None;
    }
    let upper_factor = 1.0
        + 2.0 * s1 / r
        + (2.0 * s1 * s2 + s1 * s1) / (r * r)
        + (s1 * s2).powi(2) / r.powi(4);
    let base = 1.0 / (3.0 * r.powi(3));
    Some((base / upper_factor, base / lower_factor))
}

/// Breakpoints that isolate the near-resonant minima of the denominator on
/// `[0, r_max]`, merged with a uniform grid of spacing `π/4`.
fn initial_breakpoints(s1: f64, s2: f64, r_max: f64) -> Vec<f64> {
    let den = |r: f64| denominator(r, s1, s2);

    let mut samples: Vec<f64> = vec![0.0];
    let mut r = 1e-9_f64;
    while r < 1.0 {
        samples.push(r);
        r *= 1.05;
    }
    let mut r = 1.0;
    while r < r_max {
        samples.push(r);
        r += 1e-3;
    }
    samples.push((s1 * s2).sqrt());
    samples.sort_by(f64::total_cmp);
    samples.dedup();

    let mut points = vec![0.0, r_max];
    let mut k = 1.0;
    while k * PI / 4.0 < r_max {
        points.push(k * PI / 4.0);
        k += 1.0;
    }

    let values: Vec<f64> = samples.iter().map(|&r| den(r)).collect();
    for i in 1..samples.len() - 1 {
        if !(values[i] <= values[i - 1] && values[i] <= values[i + 1]) {
            continue;
        }
        let rm = golden_min(&den, samples[i - 1], samples[i + 1]);
        let dm = den(rm);
        let h = (rm * 1e-4).max(1e-10);
        let curvature = ((den(rm + h) - 2.0 * dm + den((rm - h).max(0.0))) / (h * h)).abs();
        let width = if curvature > 0.0 {
            (dm / (0.5 * curvature)).sqrt()
        } else {
            h
        }
        .max(1e-14);
        points.push(rm);
        for j in -3..=40 {
            let off = width * 2f64.powi(j);
            if off > r_max {
                break;
            }
            for p in [rm - off, rm + off] {
                if p > 0.0 && p < r_max {
                    points.push(p);
                }
            }
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `f(s1, s2)` to relative accuracy `tol`, computed as twice the half-line
/// integral: adaptive Gauss–Kronrod on `[0, R]`, with `R` doubled until the
/// analytic tail bracket is narrower than `tol/10` of the total.
pub fn f_integral(s1: f64, s2: f64, tol: f64) -> Result<f64> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be positive")));
    }
    if !in_stability_region(StabilityQuery { s1, s2 }) {
        return Err(Error::UnstableParameters(format!(
            "(s1, s2) = ({s1}, {s2}) outside the stability region"
        )));
    }
    let integrand = |r: f64| f_integrand(r, s1, s2);

    let mut r_hi = 8.0 * PI;
    let points = initial_breakpoints(s1, s2, r_hi);
    // Coarse pass fixes the scale for the absolute tolerance.
    let rough: f64 = points
        .windows(2)
        .map(|w| quadrature::gk21(&integrand, w[0], w[1]).0)
        .sum();
    if !(rough.is_finite() && rough > 0.0) {
        return Err(Error::Quadrature(format!("non-positive coarse estimate {rough}")));
    }
    let panel_tol = 0.025 * tol * rough;
    let mut half_line = quadrature::integrate(&integrand, &points, panel_tol, MAX_PANELS)?.value;

    for _ in 0..MAX_DOUBLINGS {
        if let Some((lo, hi)) = tail_bracket(r_hi, s1, s2) {
            let total = half_line + 0.5 * (lo + hi);
            if 0.5 * (hi - lo) <= 0.1 * tol * total {
                return Ok(2.0 * total);
            }
        }
        let next = 2.0 * r_hi;
        let mut seg = vec![r_hi];
        let mut r = r_hi + PI / 2.0;
        while r < next {
            seg.push(r);
            r += PI / 2.0;
        }
        seg.push(next);
        half_line += quadrature::integrate(&integrand, &seg, panel_tol, MAX_PANELS)?.value;
        r_hi = next;
    }
    Err(Error::Quadrature(format!(
        "tail bracket did not shrink below tolerance for (s1, s2) = ({s1}, {s2})"
    )))
}

/// Stationary modal variances `σ²_{z_k}` for `k = 2..n`.
pub fn modal_variances(spec: &SpectralData, p: &PlatoonParams) -> Result<Vec<f64>> {
    modal_variances_with_tol(spec, p, DEFAULT_TOL)
}

pub fn modal_variances_with_tol(spec: &SpectralData, p: &PlatoonParams, tol: f64) -> Result<Vec<f64>> {
    p.validate()?;
    require_stable(spec, p.tau, p.beta)?;
    let prefactor = p.g * p.g * p.tau.powi(3) / (2.0 * PI);
    let s2 = p.beta * p.tau;
    let lambdas: Vec<f64> = spec.eigenvalues.iter().skip(1).copied().collect();
    lambdas
        .par_iter()
        .map(|&lambda| f_integral(lambda * p.tau, s2, tol).map(|f| prefactor * f))
        .collect()
}

/// `Dᵀ Q̃`: row `i` holds `q_k[i+1] − q_k[i]` for modes `k = 2..n`.
pub fn distance_projection(spec: &SpectralData) -> DMatrix<f64> {
    let n = spec.n();
    let q = &spec.eigenvectors;
    DMatrix::from_fn(n - 1, n - 1, |i, k| q[(i + 1, k + 1)] - q[(i, k + 1)])
}

pub fn distance_covariance(spec: &SpectralData, p: &PlatoonParams) -> Result<DistanceStatistics> {
    distance_covariance_with_tol(spec, p, DEFAULT_TOL)
}

pub fn distance_covariance_with_tol(
    spec: &SpectralData,
    p: &PlatoonParams,
    tol: f64,
) -> Result<DistanceStatistics> {
    let variances = modal_variances_with_tol(spec, p, tol)?;
    let b = distance_projection(spec);
    let scaled = DMatrix::from_fn(b.nrows(), b.ncols(), |i, k| b[(i, k)] * variances[k]);
    let mut sigma = scaled * b.transpose();
    // symmetrise away rounding
    let m = sigma.nrows();
    for i in 0..m {
        for j in i + 1..m {
            let avg = 0.5 * (sigma[(i, j)] + sigma[(j, i)]);
            sigma[(i, j)] = avg;
            sigma[(j, i)] = avg;
        }
    }
    DistanceStatistics::from_covariance(sigma, p.d, p.g)
}
