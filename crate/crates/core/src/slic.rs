//! Multichannel SLIC oversegmentation with optional mask restriction.
//!
//! Clustering runs over the joint spectral-spatial distance
//! `d^2 = d_spec^2 + (gamma / sigma)^2 * d_xy^2` with the spectral part taken
//! over all bands of the raw reflectance. Seeding, assignment and the
//! connectivity pass are all order-fixed, so identical inputs always produce
//! identical labelings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{HyperCube, SegmentationMap};

pub const UNLABELED: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SlicParams {
    /// Target superpixel side length in pixels.
    pub sigma: f64,
    /// Spatial-regularity weight.
    pub gamma: f64,
    /// Number of assignment/update rounds.
    #[serde(default = "default_iters")]
    pub iters: usize,
    /// Fragments smaller than this fraction of sigma^2 are merged into their
    /// largest adjacent superpixel.
    #[serde(default = "default_min_size_fraction")]
    pub min_size_fraction: f64,
}

fn default_iters() -> usize {
    10
}

fn default_min_size_fraction() -> f64 {
    0.25
}

impl SlicParams {
    pub fn new(sigma: f64, gamma: f64) -> Self {
        Self {
            sigma,
            gamma,
            iters: default_iters(),
            min_size_fraction: default_min_size_fraction(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma = {} must be >= 1",
                self.sigma
            )));
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} must be nonnegative",
                self.gamma
            )));
        }
        if self.iters == 0 {
            return Err(Error::InvalidParameter("iters must be >= 1".into()));
        }
        if !(self.min_size_fraction > 0.0 && self.min_size_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "min_size_fraction = {} not in (0, 1]",
                self.min_size_fraction
            )));
        }
        Ok(())
    }
}

/// Oversegment a cube into superpixels.
///
/// With a mask, seeds are placed only inside the mask and clustering never
/// assigns an outside pixel; each 4-connected region of the complement is
/// carried through as its own superpixel so the result still covers the
/// whole grid. In-mask fragments with no adjacent in-mask superpixel become
/// their own superpixel.
pub fn slic_segment(
    cube: &HyperCube,
    params: &SlicParams,
    mask: Option<&[bool]>,
) -> Result<SegmentationMap> {
    let n = cube.pixels();
    let full;
    let mask = match mask {
        Some(m) => {
            if m.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "mask has {} entries for {} pixels",
                    m.len(),
                    n
                )));
            }
            m
        }
        None => {
            full = vec![true; n];
            &full
        }
    };
    let mut labels = masked_labels(cube, params, mask)?;

    // Give each 4-connected component of the complement its own label.
    let mut next = labels
        .iter()
        .filter(|&&l| l != UNLABELED)
        .max()
        .map(|&m| m + 1)
        .unwrap_or(0);
    let (rows, cols) = (cube.rows(), cube.cols());
    let mut stack = Vec::new();
    for start in 0..n {
        if mask[start] || labels[start] != UNLABELED {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (r, c) = (p / cols, p % cols);
            for q in neighbors4(r, c, rows, cols) {
                if !mask[q] && labels[q] == UNLABELED {
                    labels[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }

    Ok(SegmentationMap::new(rows, cols, labels, 0)?.canonical())
}

/// Label the masked pixels only; complement entries stay [`UNLABELED`].
/// Labels are canonical (first occurrence in row-major order) and dense.
pub(crate) fn masked_labels(
    cube: &HyperCube,
    params: &SlicParams,
    mask: &[bool],
) -> Result<Vec<u32>> {
    params.validate()?;
    let (rows, cols) = (cube.rows(), cube.cols());
    let bands = cube.bands();
    let n = rows * cols;
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyMask);
    }
    let sigma = params.sigma;
    if sigma > rows.max(cols) as f64 {
        return Err(Error::InvalidParameter(format!(
            "sigma = {sigma} exceeds both image dimensions"
        )));
    }

    // Pixel-major copy so each spectrum is contiguous for the distance loops.
    let data = cube.data();
    let mut spectra = vec![0.0f64; n * bands];
    for b in 0..bands {
        for p in 0..n {
            spectra[p * bands + b] = data[[b, p]];
        }
    }
    let spectrum = |p: usize| &spectra[p * bands..(p + 1) * bands];

    // Regular sigma-spaced grid, restricted to the mask, then moved to the
    // lowest-gradient spot of the 3x3 neighborhood.
    let grid_positions = |dim: usize| -> Vec<usize> {
        let mut out = Vec::new();
        let mut x = sigma / 2.0;
        while x.round() < dim as f64 {
            out.push(x.round() as usize);
            x += sigma;
        }
        out
    };
    let gradient = |r: usize, c: usize| -> f64 {
        let cl = c.saturating_sub(1);
        let cr = (c + 1).min(cols - 1);
        let ru = r.saturating_sub(1);
        let rd = (r + 1).min(rows - 1);
        let left = spectrum(r * cols + cl);
        let right = spectrum(r * cols + cr);
        let up = spectrum(ru * cols + c);
        let down = spectrum(rd * cols + c);
        let mut g = 0.0;
        for b in 0..bands {
            let dx = right[b] - left[b];
            let dy = down[b] - up[b];
            g += dx * dx + dy * dy;
        }
        g
    };

    let mut seeds: Vec<(usize, usize)> = Vec::new();
    for &r in &grid_positions(rows) {
        for &c in &grid_positions(cols) {
            if !mask[r * cols + c] {
                continue;
            }
            let mut best = (r, c);
            let mut best_g = gradient(r, c);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let rr = r as i64 + dr;
                    let cc = c as i64 + dc;
                    if rr < 0 || cc < 0 || rr >= rows as i64 || cc >= cols as i64 {
                        continue;
                    }
                    let (rr, cc) = (rr as usize, cc as usize);
                    if !mask[rr * cols + cc] {
                        continue;
                    }
                    let g = gradient(rr, cc);
                    if g < best_g {
                        best_g = g;
                        best = (rr, cc);
                    }
                }
            }
            seeds.push(best);
        }
    }
    let covers_everything = mask.iter().all(|&m| m);
    if seeds.is_empty() && covers_everything {
        return Err(Error::DegenerateImage(format!(
            "no seed fits a {rows}x{cols} image with sigma = {sigma}"
        )));
    }

    struct Center {
        spec: Vec<f64>,
        r: f64,
        c: f64,
    }
    let mut centers: Vec<Center> = seeds
        .iter()
        .map(|&(r, c)| Center {
            spec: spectrum(r * cols + c).to_vec(),
            r: r as f64,
            c: c as f64,
        })
        .collect();

    let spatial_weight = (params.gamma / sigma) * (params.gamma / sigma);
    let mut assignment = vec![UNLABELED; n];
    let mut dist2 = vec![f64::INFINITY; n];

    for _ in 0..params.iters {
        dist2.iter_mut().for_each(|d| *d = f64::INFINITY);
        assignment.iter_mut().for_each(|a| *a = UNLABELED);
        for (k, center) in centers.iter().enumerate() {
            let r0 = (center.r - 2.0 * sigma).floor().max(0.0) as usize;
            let r1 = ((center.r + 2.0 * sigma).ceil() as usize).min(rows - 1);
            let c0 = (center.c - 2.0 * sigma).floor().max(0.0) as usize;
            let c1 = ((center.c + 2.0 * sigma).ceil() as usize).min(cols - 1);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let p = r * cols + c;
                    if !mask[p] {
                        continue;
                    }
                    let px = spectrum(p);
                    let mut d_spec = 0.0;
                    for b in 0..bands {
                        let diff = px[b] - center.spec[b];
                        d_spec += diff * diff;
                    }
                    let dr = r as f64 - center.r;
                    let dc = c as f64 - center.c;
                    let d = d_spec + spatial_weight * (dr * dr + dc * dc);
                    // strict improvement: ties stay with the smaller seed id
                    if d < dist2[p] {
                        dist2[p] = d;
                        assignment[p] = k as u32;
                    }
                }
            }
        }

        // Recompute centers as per-cluster means; empty clusters keep their
        // previous position.
        let mut sums = vec![0.0f64; centers.len() * bands];
        let mut rsum = vec![0.0f64; centers.len()];
        let mut csum = vec![0.0f64; centers.len()];
        let mut count = vec![0usize; centers.len()];
        for p in 0..n {
            let a = assignment[p];
            if a == UNLABELED {
                continue;
            }
            let k = a as usize;
            let px = spectrum(p);
            let acc = &mut sums[k * bands..(k + 1) * bands];
            for b in 0..bands {
                acc[b] += px[b];
            }
            rsum[k] += (p / cols) as f64;
            csum[k] += (p % cols) as f64;
            count[k] += 1;
        }
        for (k, center) in centers.iter_mut().enumerate() {
            if count[k] == 0 {
                continue;
            }
            let inv = 1.0 / count[k] as f64;
            for b in 0..bands {
                center.spec[b] = sums[k * bands + b] * inv;
            }
            center.r = rsum[k] * inv;
            center.c = csum[k] * inv;
        }
    }

    Ok(enforce_connectivity(
        &assignment,
        mask,
        rows,
        cols,
        params.min_size_fraction * sigma * sigma,
    ))
}

fn neighbors4(r: usize, c: usize, rows: usize, cols: usize) -> impl Iterator<Item = usize> {
    let mut out = [usize::MAX; 4];
    let mut i = 0;
    if r > 0 {
        out[i] = (r - 1) * cols + c;
        i += 1;
    }
    if r + 1 < rows {
        out[i] = (r + 1) * cols + c;
        i += 1;
    }
    if c > 0 {
        out[i] = r * cols + c - 1;
        i += 1;
    }
    if c + 1 < cols {
        out[i] = r * cols + c + 1;
        i += 1;
    }
    out.into_iter().take(i)
}

/// Split the assignment into 4-connected components over the mask, merge
/// components smaller than `min_size` into their largest adjacent component,
/// and relabel canonically. Unassigned mask regions follow the same rule,
/// so a region no seed could reach still ends up as its own superpixel.
fn enforce_connectivity(
    assignment: &[u32],
    mask: &[bool],
    rows: usize,
    cols: usize,
    min_size: f64,
) -> Vec<u32> {
    let n = rows * cols;
    let mut comp = vec![usize::MAX; n];
    let mut comp_size: Vec<usize> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if !mask[start] || comp[start] != usize::MAX {
            continue;
        }
        let id = comp_size.len();
        let value = assignment[start];
        let mut size = 0usize;
        comp[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            size += 1;
            for q in neighbors4(p / cols, p % cols, rows, cols) {
                if mask[q] && comp[q] == usize::MAX && assignment[q] == value {
                    comp[q] = id;
                    stack.push(q);
                }
            }
        }
        comp_size.push(size);
    }

    // Union-find over components; sizes accumulate as fragments merge.
    let mut parent: Vec<usize> = (0..comp_size.len()).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut sizes = comp_size.clone();
    // Adjacency is resolved lazily: scan the grid for each fragment merge
    // would be wasteful, so precompute component adjacency once.
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); comp_size.len()];
    for p in 0..n {
        if !mask[p] {
            continue;
        }
        let (r, c) = (p / cols, p % cols);
        for q in [
            if c + 1 < cols { Some(p + 1) } else { None },
            if r + 1 < rows { Some(p + cols) } else { None },
        ]
        .into_iter()
        .flatten()
        {
            if mask[q] && comp[q] != comp[p] {
                adjacency[comp[p]].push(comp[q]);
                adjacency[comp[q]].push(comp[p]);
            }
        }
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }

    for id in 0..comp_size.len() {
        let root = find(&mut parent, id);
        if (sizes[root] as f64) >= min_size {
            continue;
        }
        // largest adjacent component wins; ties go to the smaller root id
        let mut best: Option<(usize, usize)> = None;
        for &other in &adjacency[id] {
            let r = find(&mut parent, other);
            if r == root {
                continue;
            }
            let candidate = (sizes[r], r);
            best = Some(match best {
                None => candidate,
                Some((bs, br)) => {
                    if candidate.0 > bs || (candidate.0 == bs && candidate.1 < br) {
                        candidate
                    } else {
                        (bs, br)
                    }
                }
            });
        }
        if let Some((_, target)) = best {
            parent[root] = target;
            sizes[target] += sizes[root];
        }
        // no adjacent in-mask component: the fragment stays on its own
    }

    // Canonical dense labels in row-major first-occurrence order.
    let mut out = vec![UNLABELED; n];
    let mut remap: Vec<u32> = vec![UNLABELED; comp_size.len()];
    let mut next = 0u32;
    for p in 0..n {
        if !mask[p] {
            continue;
        }
        let root = find(&mut parent, comp[p]);
        if remap[root] == UNLABELED {
            remap[root] = next;
            next += 1;
        }
        out[p] = remap[root];
    }
    out
}
