//! Shared helpers for the integration and acceptance suites: an independent
//! projected-gradient oracle for the solver objectives, random problem and
//! segmentation generators, and constructed scenes.
//!
//! The oracle deliberately shares no code with the library's ADMM path.

// each test target uses its own subset of these helpers
#![allow(dead_code)]

use hmua_core::ndarray::{Array2, ArrayView2};
use hmua_core::types::{AbundanceMap, SegmentationMap, SpectralLibrary};
use rand::rngs::StdRng;
use rand::Rng;

/// Minimize `0.5||y - A x||^2 + lambda ||x||_1 + 0.5 beta ||x - xd||^2`
/// over `x >= 0` by projected gradient descent with a fixed step.
///
/// Runs up to `max_iters` iterations, stopping early only when the iterate
/// reaches an exact fixed point of the update map (no further motion is
/// possible). Works on flat preallocated buffers so a million iterations on
/// tiny problems stay cheap. Returns the final iterate.
pub fn pgd_oracle(
    y: &ArrayView2<f64>,
    a: &ArrayView2<f64>,
    xd: Option<&ArrayView2<f64>>,
    lambda: f64,
    beta: f64,
    max_iters: usize,
) -> Array2<f64> {
    let p = a.ncols();
    let n = y.ncols();
    let gram = a.t().dot(a);
    let aty = a.t().dot(y);
    // Lipschitz bound via power iteration on the Gram matrix.
    let mut v = Array2::from_elem((p, 1), 1.0);
    let mut lip = 1.0;
    for _ in 0..200 {
        let w = gram.dot(&v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            lip = 0.0;
            break;
        }
        lip = norm;
        v = w.mapv(|x| x / norm);
    }
    let step = 1.0 / (lip + beta + 1e-12);

    // flat row-major copies
    let gram_flat: Vec<f64> = gram.iter().copied().collect();
    let aty_flat: Vec<f64> = aty.iter().copied().collect();
    let xd_flat: Option<Vec<f64>> = xd.map(|m| m.iter().copied().collect());
    let mut x = vec![0.0f64; p * n];
    let mut next = vec![0.0f64; p * n];
    let shift = step * lambda;

    for _ in 0..max_iters {
        let mut moved = false;
        for i in 0..p {
            let grow = &gram_flat[i * p..(i + 1) * p];
            for j in 0..n {
                // grad_ij = (G x)_ij - (A^T y)_ij + beta (x_ij - xd_ij)
                let mut g = -aty_flat[i * n + j];
                for (k, &gik) in grow.iter().enumerate() {
                    g += gik * x[k * n + j];
                }
                let xij = x[i * n + j];
                g += beta
                    * (xij
                        - match &xd_flat {
                            Some(xd) => xd[i * n + j],
                            None => 0.0,
                        });
                let updated = (xij - step * g - shift).max(0.0);
                if updated != xij {
                    moved = true;
                }
                next[i * n + j] = updated;
            }
        }
        std::mem::swap(&mut x, &mut next);
        if !moved {
            break;
        }
    }
    Array2::from_shape_vec((p, n), x).expect("flat buffer matches shape")
}

/// Objective value used by the oracle comparisons, computed independently
/// of the solver module.
pub fn oracle_objective(
    y: &ArrayView2<f64>,
    a: &ArrayView2<f64>,
    x: &ArrayView2<f64>,
    xd: Option<&ArrayView2<f64>>,
    lambda: f64,
    beta: f64,
) -> f64 {
    let residual = y - &a.dot(x);
    let fit = 0.5 * residual.iter().map(|v| v * v).sum::<f64>();
    let l1 = lambda * x.iter().map(|v| v.abs()).sum::<f64>();
    let coupling = match xd {
        Some(xd) => {
            0.5 * beta
                * x.iter()
                    .zip(xd.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
        }
        None => 0.5 * beta * x.iter().map(|v| v * v).sum::<f64>(),
    };
    fit + l1 + coupling
}

/// Random library whose entries are positive and bounded away from zero.
pub fn random_library(rng: &mut StdRng, bands: usize, count: usize) -> SpectralLibrary {
    let data = Array2::from_shape_fn((bands, count), |_| rng.random_range(0.05..1.0));
    let names = (0..count).map(|j| format!("r{j}")).collect();
    SpectralLibrary::new(data, names).unwrap()
}

/// Random observation matrix with entries in [-0.5, 1.5].
pub fn random_observation(rng: &mut StdRng, bands: usize, pixels: usize) -> Array2<f64> {
    Array2::from_shape_fn((bands, pixels), |_| rng.random_range(-0.5..1.5))
}

/// Random connected segmentation: K seeds grown by multi-source BFS, so
/// every superpixel is 4-connected by construction.
pub fn random_segmentation(rng: &mut StdRng, rows: usize, cols: usize, k: usize) -> SegmentationMap {
    let n = rows * cols;
    let k = k.min(n).max(1);
    let mut labels = vec![u32::MAX; n];
    let mut frontier = std::collections::VecDeque::new();
    let mut chosen = std::collections::HashSet::new();
    while chosen.len() < k {
        let p = rng.random_range(0..n);
        if chosen.insert(p) {
            labels[p] = (chosen.len() - 1) as u32;
            frontier.push_back(p);
        }
    }
    while let Some(p) = frontier.pop_front() {
        let (r, c) = (p / cols, p % cols);
        let mut neighbors = Vec::with_capacity(4);
        if r > 0 {
            neighbors.push(p - cols);
        }
        if r + 1 < rows {
            neighbors.push(p + cols);
        }
        if c > 0 {
            neighbors.push(p - 1);
        }
        if c + 1 < cols {
            neighbors.push(p + 1);
        }
        for q in neighbors {
            if labels[q] == u32::MAX {
                labels[q] = labels[p];
                frontier.push_back(q);
            }
        }
    }
    SegmentationMap::new(rows, cols, labels, 0).unwrap().canonical()
}

/// Embed a `P_true x N` generated truth into library coordinates
/// (`P x N`, nonzero only at the selected rows).
pub fn lift_truth(truth: &AbundanceMap, ids: &[usize], library_count: usize) -> AbundanceMap {
    let mut full = Array2::zeros((library_count, truth.pixels()));
    for (row, &id) in ids.iter().enumerate() {
        for j in 0..truth.pixels() {
            full[[id, j]] = truth.data()[[row, j]];
        }
    }
    AbundanceMap::new(full).unwrap()
}

/// The constructed refinement scene: left half flat, right half diagonal
/// stripes of two well-separated spectra, plus a little seeded noise so
/// distances are never exactly tied.
pub fn half_uniform_half_textured(
    rows: usize,
    cols: usize,
    bands: usize,
    noise: f64,
    rng: &mut StdRng,
) -> hmua_core::HyperCube {
    let n = rows * cols;
    let mut data = Array2::zeros((bands, n));
    for r in 0..rows {
        for c in 0..cols {
            let p = r * cols + c;
            let base: f64 = if c < cols / 2 {
                0.5
            } else if ((r + c) / 3) % 2 == 0 {
                1.5
            } else {
                0.2
            };
            for b in 0..bands {
                let ramp = 1.0 + 0.1 * (b as f64 / bands as f64);
                data[[b, p]] = base * ramp + noise * rng.random_range(-1.0..1.0);
            }
        }
    }
    hmua_core::HyperCube::new(rows, cols, data).unwrap()
}
