//! Superpixel averaging and replication between the original and coarse
//! image domains.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::types::{ScaleOperator, SegmentationMap};

/// Build the averaging/replication operator pair for a segmentation.
pub fn build_operator(seg: &SegmentationMap) -> ScaleOperator {
    let op = ScaleOperator::from_labels(seg.labels(), seg.label_count());
    if op.label_count() >= op.pixels() {
        log::warn!(
            "scale operator has K = {} superpixels for {} pixels; no compression",
            op.label_count(),
            op.pixels()
        );
    }
    op
}

/// Replace each group of columns by its arithmetic mean (fine -> coarse).
pub fn coarsen(m: &ArrayView2<f64>, op: &ScaleOperator) -> Result<Array2<f64>> {
    if m.ncols() != op.pixels() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns, operator expects {}",
            m.ncols(),
            op.pixels()
        )));
    }
    let k = op.label_count();
    let mut out = Array2::zeros((m.nrows(), k));
    for j in 0..k {
        let group = op.group(j);
        let inv = 1.0 / group.len() as f64;
        let mut dst = out.column_mut(j);
        for &n in group {
            dst.scaled_add(1.0, &m.column(n as usize));
        }
        dst.mapv_inplace(|v| v * inv);
    }
    Ok(out)
}

/// Replicate each coarse column onto every pixel of its superpixel
/// (coarse -> fine).
pub fn uncoarsen(mc: &ArrayView2<f64>, op: &ScaleOperator) -> Result<Array2<f64>> {
    if mc.ncols() != op.label_count() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} columns, operator has {} superpixels",
            mc.ncols(),
            op.label_count()
        )));
    }
    let mut out = Array2::zeros((mc.nrows(), op.pixels()));
    for (n, &l) in op.labels().iter().enumerate() {
        out.column_mut(n).assign(&mc.column(l as usize));
    }
    Ok(out)
}
