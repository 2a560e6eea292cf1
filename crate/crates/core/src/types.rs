//! Domain types shared by every other module.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards, so they can be shared freely across threads.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An L-band hyperspectral image with `rows * cols` pixels.
///
/// The data matrix is L x N in band-major (band-sequential) layout: each row
/// is one contiguous band plane, each column is the spectrum of one pixel in
/// row-major spatial order (`n = r * cols + c`).
#[derive(Debug, Clone)]
pub struct HyperCube {
    rows: usize,
    cols: usize,
    data: Array2<f64>,
    noise: Option<Array2<f64>>,
}

impl HyperCube {
    pub fn new(rows: usize, cols: usize, data: Array2<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.nrows() == 0 {
            return Err(Error::InvalidParameter(
                "cube dimensions must be at least 1".into(),
            ));
        }
        if data.ncols() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "cube has {} pixel columns but rows*cols = {}",
                data.ncols(),
                rows * cols
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("cube data contains NaN or Inf".into()));
        }
        Ok(Self {
            rows,
            cols,
            data,
            noise: None,
        })
    }

    /// Attach the noise realization that was added to this cube, so that
    /// synthetic experiments stay reproducible.
    pub fn with_noise(mut self, noise: Array2<f64>) -> Result<Self> {
        if noise.dim() != self.data.dim() {
            return Err(Error::DimensionMismatch(
                "noise shape differs from cube shape".into(),
            ));
        }
        if !noise.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("noise contains NaN or Inf".into()));
        }
        self.noise = Some(noise);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn noise(&self) -> Option<ArrayView2<'_, f64>> {
        self.noise.as_ref().map(|n| n.view())
    }

    /// Spectrum of pixel `n` (row-major spatial index).
    pub fn spectrum(&self, n: usize) -> ArrayView1<'_, f64> {
        self.data.column(n)
    }

    /// Spectrum of the pixel at `(row, col)`.
    pub fn spectrum_at(&self, row: usize, col: usize) -> ArrayView1<'_, f64> {
        self.data.column(row * self.cols + col)
    }
}

/// An L x P matrix of endmember signatures with one name per column.
#[derive(Debug, Clone)]
pub struct SpectralLibrary {
    data: Array2<f64>,
    names: Vec<String>,
}

impl SpectralLibrary {
    pub fn new(data: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "library must have at least one band and one signature".into(),
            ));
        }
        if names.len() != data.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} signatures",
                names.len(),
                data.ncols()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("library contains NaN or Inf".into()));
        }
        for (j, col) in data.columns().into_iter().enumerate() {
            if col.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "library column {j} ({}) is all zero",
                    names[j]
                )));
            }
        }
        Ok(Self { data, names })
    }

    pub fn bands(&self) -> usize {
        self.data.nrows()
    }

    pub fn count(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// A new library containing only the selected signature columns.
    pub fn select(&self, ids: &[usize]) -> Result<SpectralLibrary> {
        let mut data = Array2::zeros((self.bands(), ids.len()));
        let mut names = Vec::with_capacity(ids.len());
        for (j, &id) in ids.iter().enumerate() {
            if id >= self.count() {
                return Err(Error::IndexOutOfRange {
                    index: id,
                    count: self.count(),
                });
            }
            data.column_mut(j).assign(&self.data.column(id));
            names.push(self.names[id].clone());
        }
        SpectralLibrary::new(data, names)
    }
}

/// Tolerance below which a slightly negative entry is treated as rounding
/// noise by [`AbundanceMap::new_clamped`].
pub const ABUNDANCE_CLAMP_TOL: f64 = 1e-12;

/// A P x N matrix of nonnegative per-pixel abundances (N may also be a
/// coarse-domain superpixel count).
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMap {
    data: Array2<f64>,
}

impl AbundanceMap {
    /// Rejects any negative or non-finite entry.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "abundance map must be non-empty".into(),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("abundances contain NaN or Inf".into()));
        }
        if let Some(v) = data.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "abundance entry {v} is negative"
            )));
        }
        Ok(Self { data })
    }

    /// Like [`AbundanceMap::new`] but maps entries in `[-1e-12, 0)` to zero.
    /// Anything more negative is still rejected.
    pub fn new_clamped(mut data: Array2<f64>) -> Result<Self> {
        if let Some(v) = data.iter().find(|v| **v < -ABUNDANCE_CLAMP_TOL) {
            return Err(Error::InvalidParameter(format!(
                "abundance entry {v} is below the clamp tolerance"
            )));
        }
        data.mapv_inplace(|v| if v < 0.0 { 0.0 } else { v });
        Self::new(data)
    }

    pub fn endmembers(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixels(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

/// Per-pixel superpixel labels over a `rows x cols` grid.
///
/// Labels are dense in `0..K-1`, every label occurs at least once, and every
/// labeled region is 4-connected. `scale` records the refinement round the
/// map belongs to; `homogeneous` optionally carries one flag per superpixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationMap {
    rows: usize,
    cols: usize,
    labels: Vec<u32>,
    scale: usize,
    homogeneous: Option<Vec<bool>>,
}

impl SegmentationMap {
    pub fn new(rows: usize, cols: usize, labels: Vec<u32>, scale: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(
                "segmentation dimensions must be at least 1".into(),
            ));
        }
        if labels.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} pixels",
                labels.len(),
                rows * cols
            )));
        }
        let k = labels.iter().max().map(|&m| m as usize + 1).unwrap_or(0);
        let mut seen = vec![false; k];
        for &l in &labels {
            seen[l as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidLabel(missing));
        }
        let map = Self {
            rows,
            cols,
            labels,
            scale,
            homogeneous: None,
        };
        map.check_connectivity()?;
        Ok(map)
    }

    /// Flood-fill check that each label forms a single 4-connected region.
    fn check_connectivity(&self) -> Result<()> {
        let k = self.label_count();
        let mut visited = vec![false; self.labels.len()];
        let mut component_seen = vec![false; k];
        let mut stack = Vec::new();
        for start in 0..self.labels.len() {
            if visited[start] {
                continue;
            }
            let label = self.labels[start] as usize;
            if component_seen[label] {
                // second component with the same label
                return Err(Error::InvalidParameter(format!(
                    "superpixel {label} is not 4-connected"
                )));
            }
            component_seen[label] = true;
            stack.push(start);
            visited[start] = true;
            while let Some(n) = stack.pop() {
                let (r, c) = (n / self.cols, n % self.cols);
                let mut push = |m: usize| {
                    if !visited[m] && self.labels[m] as usize == label {
                        visited[m] = true;
                        stack.push(m);
                    }
                };
                if r > 0 {
                    push(n - self.cols);
                }
                if r + 1 < self.rows {
                    push(n + self.cols);
                }
                if c > 0 {
                    push(n - 1);
                }
                if c + 1 < self.cols {
                    push(n + 1);
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn label_count(&self) -> usize {
        self.labels.iter().max().map(|&m| m as usize + 1).unwrap_or(0)
    }

    pub fn homogeneous(&self) -> Option<&[bool]> {
        self.homogeneous.as_deref()
    }

    /// Attach per-superpixel homogeneity flags (one per label).
    pub fn with_flags(mut self, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != self.label_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} flags for {} superpixels",
                flags.len(),
                self.label_count()
            )));
        }
        self.homogeneous = Some(flags);
        Ok(self)
    }

    /// Relabel so ids follow first occurrence in a row-major scan.
    /// Membership is unchanged; flags are permuted along. Idempotent.
    pub fn canonical(&self) -> SegmentationMap {
        let k = self.label_count();
        let mut remap = vec![u32::MAX; k];
        let mut next = 0u32;
        let mut labels = Vec::with_capacity(self.labels.len());
        for &l in &self.labels {
            let slot = &mut remap[l as usize];
            if *slot == u32::MAX {
                *slot = next;
                next += 1;
            }
            labels.push(*slot);
        }
        let homogeneous = self.homogeneous.as_ref().map(|flags| {
            let mut out = vec![false; k];
            for (old, &new) in remap.iter().enumerate() {
                out[new as usize] = flags[old];
            }
            out
        });
        SegmentationMap {
            rows: self.rows,
            cols: self.cols,
            labels,
            scale: self.scale,
            homogeneous,
        }
    }

    /// Same membership, different scale index.
    pub fn at_scale(mut self, scale: usize) -> Self {
        self.scale = scale;
        self
    }

    /// Pixel indices of superpixel `k`, in row-major order.
    pub fn members(&self, k: usize) -> Result<Vec<usize>> {
        if k >= self.label_count() {
            return Err(Error::InvalidLabel(k));
        }
        Ok(self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l as usize == k)
            .map(|(n, _)| n)
            .collect())
    }
}

/// The averaging / replication operator pair induced by a segmentation.
///
/// Kept implicit as per-superpixel pixel index lists; the dense N x K matrix
/// is never materialized.
#[derive(Debug, Clone)]
pub struct ScaleOperator {
    labels: Vec<u32>,
    /// CSR-style offsets into `indices`, length K+1.
    offsets: Vec<usize>,
    /// Pixel indices grouped by label, row-major within each group.
    indices: Vec<u32>,
}

impl ScaleOperator {
    pub(crate) fn from_labels(labels: &[u32], label_count: usize) -> Self {
        let mut sizes = vec![0usize; label_count];
        for &l in labels {
            sizes[l as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(label_count + 1);
        let mut acc = 0usize;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        let mut cursor = offsets.clone();
        let mut indices = vec![0u32; labels.len()];
        for (n, &l) in labels.iter().enumerate() {
            let c = &mut cursor[l as usize];
            indices[*c] = n as u32;
            *c += 1;
        }
        Self {
            labels: labels.to_vec(),
            offsets,
            indices,
        }
    }

    pub fn label_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn pixels(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Pixel indices of superpixel `k`, row-major order.
    pub fn group(&self, k: usize) -> &[u32] {
        &self.indices[self.offsets[k]..self.offsets[k + 1]]
    }

    /// Per-superpixel cardinalities; they sum to the pixel count.
    pub fn sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Parameters of the robust homogeneity test.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HomogeneityParams {
    /// Fraction of the highest distances discarded before testing, in [0, 1).
    pub tau_outliers: f64,
    /// Acceptance threshold on the relative max-to-mean deviation.
    pub tau_homog: f64,
}

impl HomogeneityParams {
    pub fn new(tau_outliers: f64, tau_homog: f64) -> Result<Self> {
        let p = Self {
            tau_outliers,
            tau_homog,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tau_outliers.is_finite() || !(0.0..1.0).contains(&self.tau_outliers) {
            return Err(Error::InvalidParameter(format!(
                "tau_outliers {} not in [0, 1)",
                self.tau_outliers
            )));
        }
        if !self.tau_homog.is_finite() || self.tau_homog < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tau_homog {} must be nonnegative",
                self.tau_homog
            )));
        }
        Ok(())
    }
}

/// ADMM solver parameters shared by the coarse and regularized problems.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverParams {
    /// L1 weight of the original-scale problem.
    pub lambda: f64,
    /// L1 weight of the coarse-scale problem.
    pub lambda_c: f64,
    /// Cross-scale coupling weight of the original-scale problem.
    pub beta: f64,
    /// Augmented-Lagrangian weight; `None` selects 0.1 * mean(|A^T Y|)
    /// per problem.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_iters() -> usize {
    1000
}

fn default_tol() -> f64 {
    1e-6
}

impl SolverParams {
    pub fn new(lambda: f64, lambda_c: f64, beta: f64) -> Self {
        Self {
            lambda,
            lambda_c,
            beta,
            mu: None,
            max_iters: default_max_iters(),
            tol: default_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("lambda_c", self.lambda_c),
            ("beta", self.beta),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be finite and nonnegative"
                )));
            }
        }
        if let Some(mu) = self.mu {
            if !mu.is_finite() || mu <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "mu = {mu} must be finite and positive"
                )));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tol = {} must be finite and positive",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Check that a cube and a library can be unmixed together.
pub fn validate(cube: &HyperCube, lib: &SpectralLibrary) -> Result<()> {
    if cube.bands() != lib.bands() {
        return Err(Error::DimensionMismatch(format!(
            "cube has {} bands, library has {}",
            cube.bands(),
            lib.bands()
        )));
    }
    Ok(())
}
