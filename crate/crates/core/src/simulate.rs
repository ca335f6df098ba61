//! Monte Carlo oracle: Euler–Maruyama integration of the delayed platoon
//!
//! ```text
//! dx = v dt
//! dv = −L v(t−τ) dt − βL (x(t−τ) − y) dt + E dξ
//! ```
//!
//! with `E = g·I` in the homogeneous case. Positions are integrated as
//! deviations `x − y` from the formation, and the history on `[−τ, 0]` is
//! the formation at rest.
//!
//! The step is the semi-implicit (symplectic) Euler–Maruyama variant: the
//! velocity is advanced first and the position uses the new velocity. The
//! drift only reads delayed states, so the scheme stays explicit. Plain
//! Euler–Maruyama inflates stationary variances of the lightly damped modes
//! by about `βτ/15` at `dt = τ/20`, which 10⁵ replicates can resolve.
//!
//! Replicate `r` draws its noise from ChaCha8 stream `r` of the master
//! seed, so any replicate can be reproduced on its own and ensembles are
//! bitwise identical for any thread count.

use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::stability::require_stable;
use crate::statistics::PlatoonParams;

/// Minimum accepted samples for a conditional-mean estimate.
pub const MIN_CONDITIONING_SAMPLES: usize = 100;
/// Minimum acceptance fraction for the rejection oracle.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum Diffusion {
    /// `E = g·I`.
    Scalar(f64),
    /// Full `n×n` input matrix `E`; the input noise covariance is `E Eᵀ`.
    Matrix(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Step (s); `τ / dt` must be an integer of at least 10.
    pub dt: f64,
    /// Earliest time (s) considered stationary.
    pub burn_in: f64,
    /// Snapshot time (s).
    pub horizon: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Overrides the scalar `g` of the platoon parameters when set.
    pub diffusion: Option<Diffusion>,
}

impl SimConfig {
    /// `dt = τ/20`, `burn_in = max(50τ, 20/(βλ₂))`, `horizon = 2·burn_in`.
    pub fn defaults(graph: &Graph, p: &PlatoonParams) -> Result<Self> {
        let lambda2 = graph.spectral()?.lambda2();
        let burn_in = (50.0 * p.tau).max(20.0 / (p.beta * lambda2));
        Ok(Self {
            dt: p.tau / 20.0,
            burn_in,
            horizon: 2.0 * burn_in,
            replicates: 10_000,
            seed: 0x5eed,
            diffusion: None,
        })
    }
}

/// Distance vectors `d̄`, one row per replicate (or per retained time for
/// time-averaged runs), one column per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEnsemble {
    pub samples: DMatrix<f64>,
}

impl SnapshotEnsemble {
    pub fn replicates(&self) -> usize {
        self.samples.nrows()
    }

    pub fn pairs(&self) -> usize {
        self.samples.ncols()
    }

    /// CSV with header `replicate,d1,…,d{n−1}`; values in 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "replicate")?;
        for j in 1..=self.pairs() {
            write!(out, ",d{j}")?;
        }
        writeln!(out)?;
        for r in 0..self.replicates() {
            write!(out, "{}", r + 1)?;
            for j in 0..self.pairs() {
                write!(out, ",{:.16e}", self.samples[(r, j)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

struct Model {
    n: usize,
    laplacian: Vec<f64>,
    beta: f64,
    d: f64,
    dt: f64,
    delay_steps: usize,
    noise: Noise,
}

enum Noise {
    Scalar(f64),
    Matrix(Vec<f64>),
}

fn build_model(graph: &Graph, p: &PlatoonParams, cfg: &SimConfig) -> Result<Model> {
    let spec = graph.spectral()?;
    require_stable(&spec, p.tau, p.beta)?;
    if !(cfg.dt.is_finite() && cfg.dt > 0.0) {
        return Err(Error::invalid(format!("dt = {} must be positive", cfg.dt)));
    }
    let ratio = p.tau / cfg.dt;
    let delay_steps = ratio.round();
    if (ratio - delay_steps).abs() > 1e-9 * ratio {
        return Err(Error::invalid(format!("tau/dt = {ratio} is not an integer")));
    }
    if delay_steps < 10.0 {
        return Err(Error::invalid(format!("dt = {} exceeds tau/10", cfg.dt)));
    }
    if !(cfg.burn_in.is_finite() && cfg.burn_in >= 0.0 && cfg.horizon > cfg.burn_in) {
        return Err(Error::invalid(format!(
            "need 0 <= burn_in < horizon, got burn_in = {}, horizon = {}",
            cfg.burn_in, cfg.horizon
        )));
    }
    if cfg.replicates < 1 {
        return Err(Error::invalid("need at least one replicate"));
    }
    let n = graph.n();
    let sqrt_dt = cfg.dt.sqrt();
    let noise = match cfg.diffusion.clone().unwrap_or(Diffusion::Scalar(p.g)) {
        Diffusion::Scalar(g) => {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::invalid(format!("diffusion g = {g} must be non-negative")));
            }
            Noise::Scalar(g * sqrt_dt)
        }
        Diffusion::Matrix(e) => {
            if e.shape() != (n, n) {
                return Err(Error::invalid(format!(
                    "diffusion matrix must be {n}x{n}, got {:?}",
                    e.shape()
                )));
            }
            Noise::Matrix((0..n * n).map(|k| e[(k / n, k % n)] * sqrt_dt).collect())
        }
    };
    let l = graph.laplacian();
    Ok(Model {
        n,
        laplacian: (0..n * n).map(|k| l[(k / n, k % n)]).collect(),
        beta: p.beta,
        d: p.d,
        dt: cfg.dt,
        delay_steps: delay_steps as usize,
        noise,
    })
}

fn step_index(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

impl Model {
    /// Integrates one replicate and hands the distance vector at each step
    /// index of `record` (strictly ascending, non-empty) to `visit`, together
    /// with its position in `record`.
    fn run<F: FnMut(usize, &[f64])>(&self, seed: u64, replicate: u64, record: &[usize], mut visit: F) {
        let n = self.n;
        let m = self.delay_steps;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate);

        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut hist_u = vec![0.0; m * n];
        let mut hist_v = vec![0.0; m * n];
        let mut w = vec![0.0; n];
        let mut xi = vec![0.0; n];
        let mut dist = vec![0.0; n - 1];
        let mut next = 0;
        let mut slot = 0;

        for k in 0.. {
            if record[next] == k {
                for (di, pair) in dist.iter_mut().zip(u.windows(2)) {
                    *di = pair[1] - pair[0] + self.d;
                }
                visit(next, &dist);
                next += 1;
                if next == record.len() {
                    break;
                }
            }
            // The slot holds the state at step k − m (formation for k < m).
            let du = &mut hist_u[slot * n..(slot + 1) * n];
            let dv = &mut hist_v[slot * n..(slot + 1) * n];
            for ((wi, x), y) in w.iter_mut().zip(du.iter()).zip(dv.iter()) {
                *wi = y + self.beta * x;
            }
            du.copy_from_slice(&u);
            dv.copy_from_slice(&v);
            slot += 1;
            if slot == m {
                slot = 0;
            }

            for x in xi.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            let rows = self.laplacian.chunks_exact(n);
            match &self.noise {
                Noise::Scalar(gs) => {
                    for ((vi, row), x) in v.iter_mut().zip(rows).zip(&xi) {
                        let drift: f64 = row.iter().zip(&w).map(|(l, wj)| l * wj).sum();
                        *vi += -drift * self.dt + gs * x;
                    }
                }
                Noise::Matrix(e) => {
                    for ((vi, row), erow) in v.iter_mut().zip(rows).zip(e.chunks_exact(n)) {
                        let drift: f64 = row.iter().zip(&w).map(|(l, wj)| l * wj).sum();
                        let kick: f64 = erow.iter().zip(&xi).map(|(a, b)| a * b).sum();
                        *vi += -drift * self.dt + kick;
                    }
                }
            }
            for (ui, vi) in u.iter_mut().zip(&v) {
                *ui += vi * self.dt;
            }
        }
    }
}

/// Terminal distance vectors at `cfg.horizon`, one per replicate.
pub fn simulate_platoon(graph: &Graph, p: &PlatoonParams, cfg: &SimConfig) -> Result<SnapshotEnsemble> {
    Ok(simulate_snapshots(graph, p, cfg, &[cfg.horizon])?.remove(0))
}

/// Distance vectors of the same trajectories at several times (each at
/// least `burn_in`); one ensemble per requested time, in request order.
pub fn simulate_snapshots(
    graph: &Graph,
    p: &PlatoonParams,
    cfg: &SimConfig,
    times: &[f64],
) -> Result<Vec<SnapshotEnsemble>> {
    let model = build_model(graph, p, cfg)?;
    if times.is_empty() {
        return Err(Error::invalid("no snapshot times requested"));
    }
    let steps: Vec<usize> = times
        .iter()
        .map(|&t| {
            if t.is_finite() && t >= cfg.burn_in {
                Ok(step_index(t, cfg.dt))
            } else {
                Err(Error::invalid(format!("snapshot time {t} before burn-in {}", cfg.burn_in)))
            }
        })
        .collect::<Result<_>>()?;
    let mut record = steps.clone();
    record.sort_unstable();
    record.dedup();
    let slots: Vec<usize> = steps
        .iter()
        .map(|s| record.binary_search(s).expect("recorded step"))
        .collect();
    let pairs = graph.n() - 1;

    let rows: Vec<Vec<Vec<f64>>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut snaps = vec![Vec::new(); record.len()];
            model.run(cfg.seed, r, &record, |idx, dist| snaps[idx] = dist.to_vec());
            snaps
        })
        .collect();

    Ok(slots
        .iter()
        .map(|&slot| SnapshotEnsemble {
            samples: DMatrix::from_fn(cfg.replicates, pairs, |r, j| rows[r][slot][j]),
        })
        .collect())
}

/// Time-averaging cross-check: every `stride`-th step in `[burn_in, horizon]`
/// of each replicate becomes a row. Rows are autocorrelated.
pub fn simulate_time_samples(
    graph: &Graph,
    p: &PlatoonParams,
    cfg: &SimConfig,
    stride: usize,
) -> Result<SnapshotEnsemble> {
    let model = build_model(graph, p, cfg)?;
    if stride == 0 {
        return Err(Error::invalid("stride must be positive"));
    }
    let first = step_index(cfg.burn_in, cfg.dt);
    let last = step_index(cfg.horizon, cfg.dt);
    let record: Vec<usize> = (first..=last).step_by(stride).collect();
    let rows: Vec<Vec<f64>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut out = Vec::with_capacity(record.len() * (model.n - 1));
            model.run(cfg.seed, r, &record, |_, dist| out.extend_from_slice(dist));
            out
        })
        .collect();
    let pairs = graph.n() - 1;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let count = flat.len() / pairs;
    Ok(SnapshotEnsemble {
        samples: DMatrix::from_row_slice(count, pairs, &flat),
    })
}

/// Unbiased sample covariance with delete-one jackknife standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub cov: DMatrix<f64>,
    /// Jackknife standard error of each entry; infinite below three samples.
    pub std_err: DMatrix<f64>,
    pub samples: usize,
}

pub fn empirical_covariance(ens: &SnapshotEnsemble) -> Result<CovarianceEstimate> {
    let n = ens.replicates();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let p = ens.pairs();
    let mean: Vec<f64> = (0..p).map(|j| ens.samples.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, p, |r, j| ens.samples[(r, j)] - mean[j]);
    let scatter = centered.transpose() * &centered;
    let scatter = (&scatter + scatter.transpose()) * 0.5;
    let cov = &scatter / (n as f64 - 1.0);

    let mut std_err = DMatrix::from_element(p, p, f64::INFINITY);
    if n >= 3 {
        // Leave-one-out estimate k is (S − c·y_k y_kᵀ)/(N−2) with c = N/(N−1),
        // so the jackknife variance reduces to a second moment of y_k y_kᵀ.
        let nf = n as f64;
        let c = nf / (nf - 1.0);
        let factor = (nf - 1.0) / nf * (c / (nf - 2.0)).powi(2);
        for a in 0..p {
            for b in a..p {
                let s_mean = scatter[(a, b)] / nf;
                let ss: f64 = (0..n)
                    .map(|r| {
                        let dev = centered[(r, a)] * centered[(r, b)] - s_mean;
                        dev * dev
                    })
                    .sum();
                let se = (factor * ss).sqrt();
                std_err[(a, b)] = se;
                std_err[(b, a)] = se;
            }
        }
    }
    Ok(CovarianceEstimate {
        cov,
        std_err,
        samples: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalEstimate {
    pub estimate: f64,
    pub std_err: f64,
    pub acceptance: f64,
    pub accepted: usize,
}

/// Ratio estimator of `E[d̄_j | d̄_i < d*]` (1-based pairs) with a
/// delta-method standard error.
pub fn empirical_conditional_expectation(
    ens: &SnapshotEnsemble,
    i: usize,
    j: usize,
    d_star: f64,
) -> Result<ConditionalEstimate> {
    let p = ens.pairs();
    if i == 0 || i > p || j == 0 || j > p {
        return Err(Error::invalid(format!("pairs ({i}, {j}) outside 1..={p}")));
    }
    let n = ens.replicates();
    let col_i = ens.samples.column(i - 1);
    let col_j = ens.samples.column(j - 1);
    let accepted: Vec<f64> = (0..n).filter(|&r| col_i[r] < d_star).map(|r| col_j[r]).collect();
    let k = accepted.len();
    let acceptance = k as f64 / n as f64;
    if k < MIN_CONDITIONING_SAMPLES {
        return Err(Error::InsufficientConditioningMass {
            accepted: k,
            total: n,
            fraction: acceptance,
        });
    }
    let estimate = accepted.iter().sum::<f64>() / k as f64;
    // Var(Ȳ/Ā) ≈ Var(Y − R·A) / (N·Ā²); the residual vanishes off the event.
    let resid_sq: f64 = accepted.iter().map(|y| (y - estimate).powi(2)).sum();
    let var = resid_sq / (n as f64 * (n as f64 - 1.0)) / (acceptance * acceptance);
    Ok(ConditionalEstimate {
        estimate,
        std_err: var.sqrt(),
        acceptance,
        accepted: k,
    })
}

/// Second moment `E[d̄_j²]` and event probability `P(d̄_i < d*)` with
/// standard errors, for checking Cauchy–Schwarz-type bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub probability: f64,
    pub probability_se: f64,
}

pub fn empirical_moments(ens: &SnapshotEnsemble, i: usize, j: usize, d_star: f64) -> Result<MomentEstimate> {
    let p = ens.pairs();
    if i == 0 || i > p || j == 0 || j > p {
        return Err(Error::invalid(format!("pairs ({i}, {j}) outside 1..={p}")));
    }
    let n = ens.replicates();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let sq: Vec<f64> = ens.samples.column(j - 1).iter().map(|x| x * x).collect();
    let m2 = sq.iter().sum::<f64>() / nf;
    let m2_var = sq.iter().map(|x| (x - m2).powi(2)).sum::<f64>() / (nf - 1.0);
    let prob = ens.samples.column(i - 1).iter().filter(|&&x| x < d_star).count() as f64 / nf;
    Ok(MomentEstimate {
        second_moment: m2,
        second_moment_se: (m2_var / nf).sqrt(),
        probability: prob,
        probability_se: (prob * (1.0 - prob) / nf).sqrt(),
    })
}

fn check_oracle_inputs(sigma_i: f64, sigma_j: f64, rho: f64, n_samples: usize) -> Result<()> {
    if !(sigma_i > 0.0 && sigma_j > 0.0 && sigma_i.is_finite() && sigma_j.is_finite()) {
        return Err(Error::invalid("standard deviations must be positive"));
    }
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(Error::invalid(format!("correlation {rho} outside [-1, 1]")));
    }
    if n_samples < 10_000 {
        return Err(Error::InsufficientSamples {
            needed: 10_000,
            got: n_samples,
        });
    }
    Ok(())
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Rejection sampling of `E[d̄_j | d̄_i < d*]` from `n_samples` bivariate
/// normal pairs with common mean `d`, built from two independent factors.
pub fn truncated_bivariate_oracle(
    d: f64,
    sigma_i: f64,
    sigma_j: f64,
    rho: f64,
    d_star: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_oracle_inputs(sigma_i, sigma_j, rho, n_samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho_c = (1.0 - rho * rho).sqrt();
    let mut kept = Vec::new();
    for _ in 0..n_samples {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let di = d + sigma_i * z1;
        if di < d_star {
            kept.push(d + sigma_j * (rho * z1 + rho_c * z2));
        }
    }
    let fraction = kept.len() as f64 / n_samples as f64;
    if fraction < MIN_ACCEPTANCE || kept.len() < 2 {
        return Err(Error::InsufficientConditioningMass {
            accepted: kept.len(),
            total: n_samples,
            fraction,
        });
    }
    Ok(mean_and_se(&kept))
}

/// Same estimand as [`truncated_bivariate_oracle`] for thresholds deep in the
/// lower tail: the first factor is drawn from the normal truncated to
/// `(−∞, (d* − d)/σ_i)` by exponential-proposal rejection, and every one of
/// the `n_samples` draws is kept.
pub fn truncated_bivariate_tail_oracle(
    d: f64,
    sigma_i: f64,
    sigma_j: f64,
    rho: f64,
    d_star: f64,
    n_samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_oracle_inputs(sigma_i, sigma_j, rho, n_samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho_c = (1.0 - rho * rho).sqrt();
    // Z1 < −a  ⇔  X = −Z1 > a
    let a = (d - d_star) / sigma_i;
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    let proposal = Exp::new(alpha).map_err(|e| Error::invalid(e.to_string()))?;
    let mut values = Vec::with_capacity(n_samples);
    while values.len() < n_samples {
        let z1 = if a <= 0.5 {
            let z: f64 = StandardNormal.sample(&mut rng);
            if z >= -a {
                continue;
            }
            z
        } else {
            let x = a + proposal.sample(&mut rng);
            let u: f64 = rand::Rng::random(&mut rng);
            if u > (-0.5 * (x - alpha).powi(2)).exp() {
                continue;
            }
            -x
        };
        let z2: f64 = StandardNormal.sample(&mut rng);
        values.push(d + sigma_j * (rho * z1 + rho_c * z2));
    }
    Ok(mean_and_se(&values))
}
