//! Robust per-superpixel homogeneity testing and the hierarchical
//! refinement loop that re-segments non-homogeneous regions at smaller
//! superpixel sizes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::slic::{self, SlicParams};
use crate::types::{HomogeneityParams, HyperCube, ScaleOperator, SegmentationMap};

/// Superpixels below this pixel count are never subdivided further.
const MIN_SPLITTABLE: usize = 4;

#[derive(Debug, Clone)]
pub struct HomogeneityReport {
    /// Per-superpixel deviation of the trimmed max distance from the mean.
    pub deltas: Vec<f64>,
    /// `flags[k] == (deltas[k] <= tau_homog)`.
    pub flags: Vec<bool>,
    /// Percentage of homogeneous superpixels, in [0, 100].
    pub eta: f64,
}

/// Per-band median of the pixels in superpixel `k`. Even cardinalities use
/// the mean of the two middle values.
pub fn superpixel_median(cube: &HyperCube, seg: &SegmentationMap, k: usize) -> Result<Vec<f64>> {
    check_dims(cube, seg)?;
    let members = seg.members(k)?;
    Ok(median_of(cube, &members))
}

fn median_of(cube: &HyperCube, members: &[usize]) -> Vec<f64> {
    let data = cube.data();
    let mut buf = vec![0.0f64; members.len()];
    (0..cube.bands())
        .map(|b| {
            for (slot, &p) in buf.iter_mut().zip(members) {
                *slot = data[[b, p]];
            }
            buf.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let m = buf.len();
            if m % 2 == 1 {
                buf[m / 2]
            } else {
                0.5 * (buf[m / 2 - 1] + buf[m / 2])
            }
        })
        .collect()
}

/// Euclidean distances between each member pixel and the superpixel median,
/// in row-major member order.
pub fn distance_vector(cube: &HyperCube, seg: &SegmentationMap, k: usize) -> Result<Vec<f64>> {
    check_dims(cube, seg)?;
    let members = seg.members(k)?;
    let median = median_of(cube, &members);
    Ok(distances_of(cube, &members, &median))
}

fn distances_of(cube: &HyperCube, members: &[usize], median: &[f64]) -> Vec<f64> {
    let data = cube.data();
    members
        .iter()
        .map(|&p| {
            let mut acc = 0.0;
            for (b, &m) in median.iter().enumerate() {
                let d = m - data[[b, p]];
                acc += d * d;
            }
            acc.sqrt()
        })
        .collect()
}

/// Trim the `tau_outliers` fraction of highest distances, then measure the
/// deviation of the remaining maximum from the remaining mean. A zero mean
/// means a perfectly uniform superpixel, which is homogeneous by definition.
pub fn homogeneity_deviation(d: &[f64], params: &HomogeneityParams) -> Result<(f64, bool)> {
    params.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyVector);
    }
    let mut sorted = d.to_vec();
    // stable descending order so trimming ties is reproducible
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let keep = (((1.0 - params.tau_outliers) * d.len() as f64).floor() as usize).max(1);
    let kept = &sorted[sorted.len() - keep..];
    let mean = kept.iter().sum::<f64>() / keep as f64;
    let delta = if mean == 0.0 {
        0.0
    } else {
        (kept[0] - mean) / mean
    };
    Ok((delta, delta <= params.tau_homog))
}

/// Run the homogeneity test on every superpixel of a segmentation.
/// Singleton superpixels are homogeneous with deviation zero.
pub fn assess(
    cube: &HyperCube,
    seg: &SegmentationMap,
    params: &HomogeneityParams,
) -> Result<HomogeneityReport> {
    check_dims(cube, seg)?;
    params.validate()?;
    let op = ScaleOperator::from_labels(seg.labels(), seg.label_count());
    let per_label: Vec<(f64, bool)> = (0..op.label_count())
        .into_par_iter()
        .map(|k| {
            let group = op.group(k);
            if group.len() == 1 {
                return Ok((0.0, true));
            }
            let members: Vec<usize> = group.iter().map(|&p| p as usize).collect();
            let median = median_of(cube, &members);
            let d = distances_of(cube, &members, &median);
            homogeneity_deviation(&d, params)
        })
        .collect::<Result<_>>()?;
    let deltas: Vec<f64> = per_label.iter().map(|&(d, _)| d).collect();
    let flags: Vec<bool> = per_label.iter().map(|&(_, f)| f).collect();
    let homog = flags.iter().filter(|&&f| f).count();
    let eta = 100.0 * homog as f64 / flags.len() as f64;
    Ok(HomogeneityReport { deltas, flags, eta })
}

/// Hierarchical refinement: re-segment the union of non-homogeneous
/// superpixels with each successively smaller size in `sigmas`, keeping
/// homogeneous superpixels frozen. Stops early once every superpixel tests
/// homogeneous, or when a round changes no labels.
///
/// Returns the final map (canonical labels, flags attached) together with
/// the per-round homogeneity percentages, starting at the input map's.
pub fn refine(
    cube: &HyperCube,
    seg0: &SegmentationMap,
    sigmas: &[f64],
    base: &SlicParams,
    params: &HomogeneityParams,
) -> Result<(SegmentationMap, Vec<f64>)> {
    check_dims(cube, seg0)?;
    for pair in sigmas.windows(2) {
        if pair[1] >= pair[0] {
            return Err(Error::NonDecreasingSigmas(format!(
                "{} does not decrease to {}",
                pair[0], pair[1]
            )));
        }
    }

    let mut seg = seg0.canonical();
    let mut report = assess(cube, &seg, params)?;
    seg = seg.with_flags(report.flags.clone())?;
    let mut trace = vec![report.eta];

    let n = cube.pixels();
    for (round, &sigma) in sigmas.iter().enumerate() {
        if report.eta >= 100.0 {
            break;
        }

        let k = seg.label_count();
        let mut sizes = vec![0usize; k];
        for &l in seg.labels() {
            sizes[l as usize] += 1;
        }
        let flags = seg.homogeneous().expect("flags attached above");
        let mut mask = vec![false; n];
        let mut any = false;
        for (p, &l) in seg.labels().iter().enumerate() {
            let l = l as usize;
            if !flags[l] && sizes[l] >= MIN_SPLITTABLE {
                mask[p] = true;
                any = true;
            }
        }
        if !any {
            // every non-homogeneous superpixel is too small to subdivide
            break;
        }

        let sub = slic::masked_labels(cube, &SlicParams { sigma, ..*base }, &mask)?;
        let offset = k as u32;
        let mut labels: Vec<u32> = seg.labels().to_vec();
        for (p, &s) in sub.iter().enumerate() {
            if mask[p] {
                labels[p] = offset + s;
            }
        }
        compact_labels(&mut labels);
        let refined = SegmentationMap::new(cube.rows(), cube.cols(), labels, round + 1)?;
        if refined.labels() == seg.labels() {
            break;
        }
        report = assess(cube, &refined, params)?;
        seg = refined.with_flags(report.flags.clone())?;
        trace.push(report.eta);
    }

    Ok((seg, trace))
}

/// Remap arbitrary labels to dense first-occurrence order.
fn compact_labels(labels: &mut [u32]) {
    let max = labels.iter().max().copied().unwrap_or(0) as usize;
    let mut remap = vec![u32::MAX; max + 1];
    let mut next = 0u32;
    for l in labels.iter_mut() {
        let slot = &mut remap[*l as usize];
        if *slot == u32::MAX {
            *slot = next;
            next += 1;
        }
        *l = *slot;
    }
}

fn check_dims(cube: &HyperCube, seg: &SegmentationMap) -> Result<()> {
    if cube.rows() != seg.rows() || cube.cols() != seg.cols() {
        return Err(Error::DimensionMismatch(format!(
            "cube is {}x{}, segmentation is {}x{}",
            cube.rows(),
            cube.cols(),
            seg.rows(),
            seg.cols()
        )));
    }
    Ok(())
}
