//! Eigen-option baseline: options that ascend Laplacian eigenvectors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::GridMap;
use crate::options::{train_option, LearnedOption, OptionParams, PseudoReward};
use crate::rng::SeedTree;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LaplacianKind {
    /// `L = D - W`.
    #[default]
    Combinatorial,
    /// `L = I - D^{-1/2} W D^{-1/2}`.
    Normalized,
}

/// Laplacian of the undirected state graph; an edge joins two distinct
/// states connected by a primitive move.
pub fn build_laplacian(map: &GridMap, kind: LaplacianKind) -> Result<DMatrix<f64>> {
    if !map.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = map.num_states();
    let mut w = DMatrix::<f64>::zeros(n, n);
    for s in 0..n {
        for t in map.neighbors(s) {
            w[(s, t)] = 1.0;
            w[(t, s)] = 1.0;
        }
    }
    let deg: Vec<f64> = (0..n).map(|s| w.row(s).sum()).collect();
    let mut l = -w;
    match kind {
        LaplacianKind::Combinatorial => {
            for s in 0..n {
                l[(s, s)] = deg[s];
            }
        }
        LaplacianKind::Normalized => {
            for s in 0..n {
                for t in 0..n {
                    if l[(s, t)] != 0.0 {
                        l[(s, t)] /= (deg[s] * deg[t]).sqrt();
                    }
                }
                l[(s, s)] = if deg[s] > 0.0 { 1.0 } else { 0.0 };
            }
        }
    }
    Ok(l)
}

/// Eigenpairs sorted by ascending eigenvalue.
#[derive(Clone, Debug)]
pub struct LaplacianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DVector<f64>>,
}

impl LaplacianSpectrum {
    pub fn of(laplacian: &DMatrix<f64>) -> LaplacianSpectrum {
        let eig = SymmetricEigen::new(laplacian.clone());
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = order
            .iter()
            .map(|&i| {
                let mut v = eig.eigenvectors.column(i).into_owned();
                // pin the sign so the largest-magnitude entry is positive
                let idx = v.iamax();
                if v[idx] < 0.0 {
                    v.neg_mut();
                }
                v
            })
            .collect();
        LaplacianSpectrum {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

pub fn spectrum(map: &GridMap, kind: LaplacianKind) -> Result<LaplacianSpectrum> {
    Ok(LaplacianSpectrum::of(&build_laplacian(map, kind)?))
}

/// Intra-option reward `v[s'] - v[s]` for one eigenvector.
pub fn eigen_option_reward(v: &DVector<f64>, s: usize, s_next: usize) -> f64 {
    v[s_next] - v[s]
}

/// The potentials of the first `m` eigen-options: `+v` then `-v` for the
/// lowest non-constant eigenvectors in ascending eigenvalue order.
pub fn eigen_potentials(spectrum: &LaplacianSpectrum, m: usize) -> Result<Vec<Vec<f64>>> {
    let available = spectrum.len().saturating_sub(1);
    if m > 2 * available {
        return Err(Error::Config(format!(
            "{m} eigen-options requested, only {available} non-constant eigenvectors"
        )));
    }
    let mut out = Vec::with_capacity(m);
    for v in spectrum.eigenvectors.iter().skip(1) {
        for sign in [1.0, -1.0] {
            if out.len() == m {
                return Ok(out);
            }
            out.push(v.iter().map(|x| sign * x).collect());
        }
    }
    Ok(out)
}

/// Trains `m` eigen-options with the same termination rule as successor options.
pub fn train_eigen_options(
    map: &GridMap,
    spectrum: &LaplacianSpectrum,
    m: usize,
    params: &OptionParams,
    seeds: &SeedTree,
) -> Result<Vec<LearnedOption>> {
    Ok(eigen_potentials(spectrum, m)?
        .into_iter()
        .enumerate()
        .map(|(i, pot)| {
            let pr = PseudoReward::from_potential(pot);
            train_option(map, i, &pr, params, &mut seeds.indexed("option", i as u64))
        })
        .collect())
}
