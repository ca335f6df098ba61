//! Weighted undirected communication graphs and their Laplacian spectra.
//!
//! Vehicle labels are 1-based at every external surface (JSON edge lists,
//! CSV headers) and 0-based inside matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues at or below this are treated as zero when certifying connectivity.
pub const CONNECTIVITY_TOL: f64 = 1e-9;

/// Weighted undirected graph over `n` vehicles.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    weights: DMatrix<f64>,
}

/// JSON form: `{"n": 3, "edges": [[1, 2, 1.0], [2, 3, 1.0]]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    /// Builds a graph from a dense weight matrix, checking symmetry, a zero
    /// diagonal, non-negative weights and connectivity.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n < 2 || weights.ncols() != n {
            return Err(Error::invalid(format!(
                "weight matrix must be square with n >= 2, got {}x{}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("self-loop on vehicle {}", i + 1)));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::invalid(format!(
                        "weight ({}, {}) = {w} must be finite and non-negative",
                        i + 1,
                        j + 1
                    )));
                }
                if w != weights[(j, i)] {
                    return Err(Error::invalid(format!(
                        "weights not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if !is_connected(&weights) {
            return Err(Error::NotConnected { lambda2: 0.0 });
        }
        Ok(Self { n, weights })
    }

    /// Builds a graph from a 1-based edge list. Repeated edges accumulate.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("need n >= 2 vehicles, got {n}")));
        }
        let mut w = DMatrix::zeros(n, n);
        for &(a, b, k) in edges {
            if a == 0 || b == 0 || a > n || b > n {
                return Err(Error::invalid(format!("edge ({a}, {b}) outside labels 1..={n}")));
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop on vehicle {a}")));
            }
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::invalid(format!("edge ({a}, {b}) weight {k} must be positive")));
            }
            w[(a - 1, b - 1)] += k;
            w[(b - 1, a - 1)] += k;
        }
        Self::from_weights(w)
    }

    pub fn complete(n: usize, k: f64) -> Result<Self> {
        check_family(n, 2, k)?;
        let mut w = DMatrix::from_element(n, n, k);
        w.fill_diagonal(0.0);
        Self::from_weights(w)
    }

    pub fn path(n: usize, k: f64) -> Result<Self> {
        check_family(n, 2, k)?;
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            w[(i, i + 1)] = k;
            w[(i + 1, i)] = k;
        }
        Self::from_weights(w)
    }

    /// Circulant ring where vehicle `i` is linked to `i ± 1, …, i ± p (mod n)`.
    /// With `p = ⌊(n−1)/2⌋` and odd `n` this is the complete graph; for even
    /// `n` the antipodal link is still missing.
    pub fn p_cycle(n: usize, p: usize, k: f64) -> Result<Self> {
        check_family(n, 3, k)?;
        let max_p = (n - 1) / 2;
        if p < 1 || p > max_p {
            return Err(Error::invalid(format!("p = {p} outside 1..={max_p} for n = {n}")));
        }
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for m in 1..=p {
                let j = (i + m) % n;
                w[(i, j)] = k;
                w[(j, i)] = k;
            }
        }
        Self::from_weights(w)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        laplacian_of(&self.weights)
    }

    pub fn spectral(&self) -> Result<SpectralData> {
        SpectralData::of_laplacian(&self.laplacian())
    }

    pub fn to_json(&self) -> GraphJson {
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let w = self.weights[(i, j)];
                if w > 0.0 {
                    edges.push((i + 1, j + 1, w));
                }
            }
        }
        GraphJson { n: self.n, edges }
    }

    pub fn from_json(json: &GraphJson) -> Result<Self> {
        Self::from_edges(json.n, &json.edges)
    }
}

fn check_family(n: usize, min_n: usize, k: f64) -> Result<()> {
    if n < min_n {
        return Err(Error::invalid(format!("need n >= {min_n} vehicles, got {n}")));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid(format!("weight k = {k} must be positive")));
    }
    Ok(())
}

/// `L = diag(W·1) − W`.
pub fn laplacian_of(weights: &DMatrix<f64>) -> DMatrix<f64> {
    let n = weights.nrows();
    let mut l = -weights.clone();
    for i in 0..n {
        l[(i, i)] = weights.row(i).sum();
    }
    l
}

/// Second-smallest Laplacian eigenvalue of an arbitrary symmetric weight matrix.
pub fn algebraic_connectivity(weights: &DMatrix<f64>) -> f64 {
    let mut ev: Vec<f64> = laplacian_of(weights).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev.get(1).copied().unwrap_or(0.0)
}

fn is_connected(weights: &DMatrix<f64>) -> bool {
    let n = weights.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if !seen[v] && weights[(u, v)] > 0.0 {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Laplacian spectrum with ascending eigenvalues and an orthonormal eigenbasis.
///
/// The consensus eigenvector is exactly `1/√n · 1`; every other column is
/// sign-normalised so that its largest-magnitude entry is positive.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn of_laplacian(l: &DMatrix<f64>) -> Result<Self> {
        let n = l.nrows();
        let eig = SymmetricEigen::new(l.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let scale = l.amax().max(1.0);
        if eigenvalues[1] <= CONNECTIVITY_TOL * scale {
            return Err(Error::NotConnected { lambda2: eigenvalues[1] });
        }

        let mut q = DMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            q.set_column(col, &eig.eigenvectors.column(k));
        }
        // Pin the consensus mode, then project it out of the remaining columns.
        let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        q.set_column(0, &ones);
        for col in 1..n {
            let mut v = q.column(col).clone_owned();
            v -= &ones * ones.dot(&v);
            v /= v.norm();
            let (imax, _) = v.iter().enumerate().fold((0, 0.0), |acc, (i, x)| {
                if x.abs() > acc.1 + 1e-12 {
                    (i, x.abs())
                } else {
                    acc
                }
            });
            if v[imax] < 0.0 {
                v.neg_mut();
            }
            q.set_column(col, &v);
        }
        Ok(Self {
            eigenvalues,
            eigenvectors: q,
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.n() - 1]
    }

    /// `Q·diag(λ)·Qᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        q * DMatrix::from_diagonal(&self.eigenvalues) * q.transpose()
    }
}
