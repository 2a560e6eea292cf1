//! Synthetic scene generation and the reconstruction-quality metric.
//!
//! The abundance generator is a self-contained substitute for external
//! synthesis tools: spatial structure comes from Voronoi mosaics and
//! box-smoothed random fields, and every column is normalized onto the
//! simplex. All randomness flows through a counter-based stream cipher RNG
//! seeded from the scene spec, so repeated runs are bit-identical.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AbundanceMap, HyperCube, SpectralLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenePattern {
    /// Voronoi cells of near-pure pixels with smoothed borders.
    #[serde(rename = "uniform-blocks")]
    UniformBlocks,
    /// Thresholded smoothed random fields.
    #[serde(rename = "irregular-blobs")]
    IrregularBlobs,
    /// Four quadrants, each drawn with a different pattern.
    #[serde(rename = "quadrant-composite")]
    QuadrantComposite,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SceneSpec {
    pub rows: usize,
    pub cols: usize,
    /// Number of active endmembers (>= 2).
    pub endmember_count: usize,
    pub pattern: ScenePattern,
    /// Correlation length of the spatial structure, in pixels.
    pub smoothness: usize,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter(
                "scene dimensions must be at least 1".into(),
            ));
        }
        if self.endmember_count < 2 {
            return Err(Error::InvalidParameter(
                "scene needs at least 2 endmembers".into(),
            ));
        }
        if self.pattern == ScenePattern::QuadrantComposite && (self.rows < 2 || self.cols < 2) {
            return Err(Error::InvalidParameter(
                "quadrant-composite needs at least 2x2 pixels".into(),
            ));
        }
        Ok(())
    }
}

/// Generate a `P_true x N` abundance map whose columns live on the simplex.
pub fn generate_abundances(spec: &SceneSpec) -> Result<AbundanceMap> {
    spec.validate()?;
    let planes = match spec.pattern {
        ScenePattern::UniformBlocks => uniform_blocks(spec),
        ScenePattern::IrregularBlobs => irregular_blobs(spec),
        ScenePattern::QuadrantComposite => quadrant_composite(spec)?,
    };
    let p = spec.endmember_count;
    let n = spec.rows * spec.cols;
    let mut data = Array2::zeros((p, n));
    for (e, plane) in planes.iter().enumerate() {
        for (i, &v) in plane.iter().enumerate() {
            data[[e, i]] = v;
        }
    }
    // exact simplex normalization; the constructions above already keep
    // columns nonnegative with sums near 1
    for mut col in data.columns_mut() {
        let sum: f64 = col.iter().sum();
        if sum > 0.0 {
            col.mapv_inplace(|v| v / sum);
        } else {
            col.fill(1.0 / p as f64);
        }
    }
    AbundanceMap::new(data)
}

fn uniform_blocks(spec: &SceneSpec) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (rows, cols, p) = (spec.rows, spec.cols, spec.endmember_count);
    let n = rows * cols;

    // one Voronoi site per endmember, all distinct
    let mut sites: Vec<(f64, f64)> = Vec::with_capacity(p);
    while sites.len() < p {
        let site = (
            rng.random_range(0.0..rows as f64),
            rng.random_range(0.0..cols as f64),
        );
        if !sites
            .iter()
            .any(|s| (s.0 - site.0).abs() < 1e-9 && (s.1 - site.1).abs() < 1e-9)
        {
            sites.push(site);
        }
    }

    let mut planes = vec![vec![0.0f64; n]; p];
    for r in 0..rows {
        for c in 0..cols {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (e, site) in sites.iter().enumerate() {
                let dr = r as f64 - site.0;
                let dc = c as f64 - site.1;
                let d = dr * dr + dc * dc;
                if d < best_d {
                    best_d = d;
                    best = e;
                }
            }
            planes[best][r * cols + c] = 1.0;
        }
    }
    for plane in &mut planes {
        box_smooth(plane, rows, cols, spec.smoothness, 2);
    }
    planes
}

fn irregular_blobs(spec: &SceneSpec) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (rows, cols, p) = (spec.rows, spec.cols, spec.endmember_count);
    let n = rows * cols;
    let normal = StandardNormal;

    let mut planes: Vec<Vec<f64>> = Vec::with_capacity(p);
    for _ in 0..p {
        let mut field: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        box_smooth(&mut field, rows, cols, spec.smoothness, 3);
        // standardize so the sharpening factor below is scale-free
        let mean = field.iter().sum::<f64>() / n as f64;
        let var = field.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let inv_std = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
        field
            .iter_mut()
            .for_each(|v| *v = (*v - mean) * inv_std);
        planes.push(field);
    }

    // winner-takes-most: project the sharpened field vector onto the simplex
    let mut out = vec![vec![0.0f64; n]; p];
    let mut v = vec![0.0f64; p];
    for i in 0..n {
        for e in 0..p {
            v[e] = 3.0 * planes[e][i];
        }
        let x = project_simplex(&v);
        for e in 0..p {
            out[e][i] = x[e];
        }
    }
    out
}

fn quadrant_composite(spec: &SceneSpec) -> Result<Vec<Vec<f64>>> {
    let (rows, cols, p) = (spec.rows, spec.cols, spec.endmember_count);
    let (r2, c2) = (rows / 2, cols / 2);
    let quadrants = [
        (
            0,
            0,
            r2,
            c2,
            ScenePattern::UniformBlocks,
            spec.smoothness,
        ),
        (
            0,
            c2,
            r2,
            cols - c2,
            ScenePattern::IrregularBlobs,
            spec.smoothness,
        ),
        (
            r2,
            0,
            rows - r2,
            c2,
            ScenePattern::UniformBlocks,
            0,
        ),
        (
            r2,
            c2,
            rows - r2,
            cols - c2,
            ScenePattern::IrregularBlobs,
            spec.smoothness * 2,
        ),
    ];
    let mut planes = vec![vec![0.0f64; rows * cols]; p];
    for (q, &(r0, c0, qr, qc, pattern, smoothness)) in quadrants.iter().enumerate() {
        let sub = SceneSpec {
            rows: qr,
            cols: qc,
            endmember_count: p,
            pattern,
            smoothness,
            seed: spec.seed.wrapping_add(q as u64 + 1),
        };
        let sub_planes = match pattern {
            ScenePattern::UniformBlocks => uniform_blocks(&sub),
            ScenePattern::IrregularBlobs => irregular_blobs(&sub),
            ScenePattern::QuadrantComposite => unreachable!(),
        };
        for e in 0..p {
            for r in 0..qr {
                for c in 0..qc {
                    planes[e][(r0 + r) * cols + (c0 + c)] = sub_planes[e][r * qc + c];
                }
            }
        }
    }
    Ok(planes)
}

/// Separable box filter with border truncation; `width` is the half-free
/// filter span in pixels, `passes` stacks the filter for a smoother kernel.
fn box_smooth(plane: &mut Vec<f64>, rows: usize, cols: usize, width: usize, passes: usize) {
    if width < 2 {
        return;
    }
    let half = width / 2;
    let mut tmp = vec![0.0f64; plane.len()];
    for _ in 0..passes {
        // horizontal
        for r in 0..rows {
            for c in 0..cols {
                let lo = c.saturating_sub(half);
                let hi = (c + half).min(cols - 1);
                let mut acc = 0.0;
                for cc in lo..=hi {
                    acc += plane[r * cols + cc];
                }
                tmp[r * cols + c] = acc / (hi - lo + 1) as f64;
            }
        }
        // vertical
        for r in 0..rows {
            for c in 0..cols {
                let lo = r.saturating_sub(half);
                let hi = (r + half).min(rows - 1);
                let mut acc = 0.0;
                for rr in lo..=hi {
                    acc += tmp[rr * cols + c];
                }
                plane[r * cols + c] = acc / (hi - lo + 1) as f64;
            }
        }
    }
}

/// Euclidean projection of `v` onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        acc += u;
        let candidate = (acc - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Mix abundances through selected library columns and add white Gaussian
/// noise scaled so the realized SNR hits `snr_db` exactly. Pass
/// `f64::INFINITY` for a noiseless cube. The drawn noise realization is
/// stored in the returned cube.
pub fn mix_and_corrupt(
    x: &AbundanceMap,
    lib: &SpectralLibrary,
    endmember_ids: &[usize],
    snr_db: f64,
    seed: u64,
) -> Result<HyperCube> {
    if endmember_ids.len() != x.endmembers() {
        return Err(Error::DimensionMismatch(format!(
            "{} endmember ids for {} abundance rows",
            endmember_ids.len(),
            x.endmembers()
        )));
    }
    for &id in endmember_ids {
        if id >= lib.count() {
            return Err(Error::IndexOutOfRange {
                index: id,
                count: lib.count(),
            });
        }
    }
    let bands = lib.bands();
    let n = x.pixels();
    let mut selected = Array2::zeros((bands, endmember_ids.len()));
    for (j, &id) in endmember_ids.iter().enumerate() {
        selected.column_mut(j).assign(&lib.data().column(id));
    }
    let clean = selected.dot(&x.data());

    let (rows, cols) = infer_dims(n)?;
    if snr_db.is_infinite() && snr_db > 0.0 {
        let noise = Array2::zeros((bands, n));
        return HyperCube::new(rows, cols, clean)?.with_noise(noise);
    }

    let signal_energy: f64 = clean.iter().map(|v| v * v).sum();
    if signal_energy == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut noise = Array2::zeros((bands, n));
    for v in noise.iter_mut() {
        *v = normal.sample(&mut rng);
    }
    let raw_energy: f64 = noise.iter().map(|v| v * v).sum();
    let scale = (signal_energy / (raw_energy * 10f64.powf(snr_db / 10.0))).sqrt();
    noise.mapv_inplace(|v| v * scale);
    let observed = &clean + &noise;
    HyperCube::new(rows, cols, observed)?.with_noise(noise)
}

// The abundance map does not carry spatial dimensions, so mixing infers a
// near-square grid for the resulting cube. Callers that know the true shape
// rebuild the cube with it.
fn infer_dims(n: usize) -> Result<(usize, usize)> {
    let mut r = (n as f64).sqrt() as usize;
    while r > 1 {
        if n % r == 0 {
            return Ok((r, n / r));
        }
        r -= 1;
    }
    Ok((1, n))
}

/// Variant of [`mix_and_corrupt`] that pins the cube's spatial dimensions.
pub fn mix_and_corrupt_with_dims(
    x: &AbundanceMap,
    lib: &SpectralLibrary,
    endmember_ids: &[usize],
    snr_db: f64,
    seed: u64,
    rows: usize,
    cols: usize,
) -> Result<HyperCube> {
    if rows * cols != x.pixels() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} grid for {} pixels",
            rows,
            cols,
            x.pixels()
        )));
    }
    let cube = mix_and_corrupt(x, lib, endmember_ids, snr_db, seed)?;
    let noise = cube.noise().map(|v| v.to_owned());
    let rebuilt = HyperCube::new(rows, cols, cube.data().to_owned())?;
    match noise {
        Some(noise) => rebuilt.with_noise(noise),
        None => Ok(rebuilt),
    }
}

/// Signal-to-reconstruction error in decibels; `inf` when the estimate is
/// exact.
pub fn sre(truth: &AbundanceMap, estimate: &AbundanceMap) -> Result<f64> {
    if truth.data().dim() != estimate.data().dim() {
        return Err(Error::DimensionMismatch(format!(
            "truth is {}x{}, estimate is {}x{}",
            truth.endmembers(),
            truth.pixels(),
            estimate.endmembers(),
            estimate.pixels()
        )));
    }
    let signal: f64 = truth.data().iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let error: f64 = truth
        .data()
        .iter()
        .zip(estimate.data().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if error == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / error).log10())
}

/// Deterministic synthetic spectral library: smooth positive signatures
/// built from random Gaussian bumps. A stand-in for real signature
/// collections in tests and demos.
pub fn generate_library(bands: usize, count: usize, seed: u64) -> SpectralLibrary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Array2::zeros((bands, count));
    for j in 0..count {
        let bumps = rng.random_range(3..=6);
        let mut spectrum = vec![0.05f64; bands];
        for _ in 0..bumps {
            let center: f64 = rng.random_range(0.0..bands as f64);
            let width: f64 = rng.random_range(bands as f64 / 50.0..bands as f64 / 8.0);
            let amp: f64 = rng.random_range(0.1..1.0);
            for (b, v) in spectrum.iter_mut().enumerate() {
                let t = (b as f64 - center) / width;
                *v += amp * (-0.5 * t * t).exp();
            }
        }
        let max = spectrum.iter().cloned().fold(f64::MIN, f64::max);
        for (b, v) in spectrum.iter().enumerate() {
            data[[b, j]] = v / max;
        }
    }
    let names = (0..count).map(|j| format!("sig_{j:03}")).collect();
    SpectralLibrary::new(data, names).expect("generated library is valid")
}
