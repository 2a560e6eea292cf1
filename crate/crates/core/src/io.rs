//! File formats: JSON-header + raw band-sequential binary for cubes, CSV for
//! spectral libraries, raw float64 + JSON sidecar for abundance maps, JSON
//! for segmentations, and PNG renderings.
//!
//! All binary payloads are little-endian. Writers and readers round-trip
//! float64 data bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AbundanceMap, HyperCube, SegmentationMap, SpectralLibrary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DType {
    #[serde(rename = "float32")]
    Float32,
    #[serde(rename = "float64")]
    Float64,
}

impl DType {
    fn size(self) -> usize {
        match self {
            DType::Float32 => 4,
            DType::Float64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layout {
    #[serde(rename = "bsq")]
    BandSequential,
}

/// JSON header describing a raw cube file. Unknown fields are ignored, so a
/// richer manifest can double as a header.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeHeader {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub dtype: DType,
    pub layout: Layout,
}

impl CubeHeader {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.bands == 0 {
            return Err(Error::Parse(
                "cube header dimensions must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn expected_bytes(&self) -> u64 {
        (self.rows * self.cols * self.bands * self.dtype.size()) as u64
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = open(path)?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = create(path)?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Read a cube from a JSON header and a raw band-sequential file.
/// float32 payloads are widened to float64.
pub fn read_cube(header_path: &Path, data_path: &Path) -> Result<HyperCube> {
    let header: CubeHeader = read_json(header_path)?;
    header.validate()?;
    let meta = std::fs::metadata(data_path).map_err(|e| Error::io(data_path, e))?;
    if meta.len() != header.expected_bytes() {
        return Err(Error::SizeMismatch {
            path: data_path.to_path_buf(),
            expected: header.expected_bytes(),
            actual: meta.len(),
        });
    }
    let n = header.rows * header.cols;
    let count = n * header.bands;
    let mut reader = BufReader::new(open(data_path)?);
    let mut values = vec![0.0f64; count];
    match header.dtype {
        DType::Float64 => reader
            .read_f64_into::<LittleEndian>(&mut values)
            .map_err(|e| Error::io(data_path, e))?,
        DType::Float32 => {
            let mut raw = vec![0.0f32; count];
            reader
                .read_f32_into::<LittleEndian>(&mut raw)
                .map_err(|e| Error::io(data_path, e))?;
            for (v, r) in values.iter_mut().zip(&raw) {
                *v = *r as f64;
            }
        }
    }
    let data = Array2::from_shape_vec((header.bands, n), values)
        .expect("shape checked against byte length");
    HyperCube::new(header.rows, header.cols, data)
}

/// Write a cube as float64 band-sequential binary plus its JSON header.
pub fn write_cube(cube: &HyperCube, header_path: &Path, data_path: &Path) -> Result<()> {
    let header = CubeHeader {
        rows: cube.rows(),
        cols: cube.cols(),
        bands: cube.bands(),
        dtype: DType::Float64,
        layout: Layout::BandSequential,
    };
    write_json(&header, header_path)?;
    write_matrix_f64(&cube.data().to_owned(), data_path)
}

fn write_matrix_f64(matrix: &Array2<f64>, path: &Path) -> Result<()> {
    let mut writer = BufWriter::new(create(path)?);
    for &v in matrix.iter() {
        writer
            .write_f64::<LittleEndian>(v)
            .map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Read a spectral library from CSV: a header row of signature names, then
/// one row per band.
pub fn read_library(path: &Path) -> Result<SpectralLibrary> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(open(path)?));
    let mut records = reader.records();
    let names: Vec<String> = match records.next() {
        Some(record) => record
            .map_err(|e| csv_error(path, e))?
            .iter()
            .map(|s| s.to_string())
            .collect(),
        None => return Err(Error::Parse(format!("{}: empty file", path.display()))),
    };
    let p = names.len();
    let mut rows: Vec<f64> = Vec::new();
    let mut bands = 0usize;
    for (i, record) in records.enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != p {
            return Err(Error::RaggedRows {
                row: i + 2,
                expected: p,
                actual: record.len(),
            });
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|e| {
                Error::Parse(format!("{} row {}: {e}", path.display(), i + 2))
            })?;
            rows.push(v);
        }
        bands += 1;
    }
    if bands == 0 {
        return Err(Error::Parse(format!(
            "{}: no band rows after the name row",
            path.display()
        )));
    }
    let data = Array2::from_shape_vec((bands, p), rows).expect("row-major fill");
    SpectralLibrary::new(data, names)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if let csv::ErrorKind::UnequalLengths {
        pos,
        expected_len,
        len,
    } = e.kind()
    {
        return Error::RaggedRows {
            row: pos.as_ref().map(|p| p.line() as usize).unwrap_or(0),
            expected: *expected_len as usize,
            actual: *len as usize,
        };
    }
    Error::Parse(format!("{}: {e}", path.display()))
}

/// Write a spectral library as CSV (names row, then band rows).
pub fn write_library(lib: &SpectralLibrary, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(create(path)?));
    writer
        .write_record(lib.names())
        .map_err(|e| csv_error(path, e))?;
    for row in lib.data().rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writer.write_record(&fields).map_err(|e| csv_error(path, e))?;
    }
    writer
        .into_inner()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct AbundanceSidecar {
    endmembers: usize,
    pixels: usize,
    dtype: DType,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Write an abundance map as raw float64 plus a `<path>.json` sidecar.
pub fn write_abundance(map: &AbundanceMap, path: &Path) -> Result<()> {
    write_matrix_f64(&map.data().to_owned(), path)?;
    write_json(
        &AbundanceSidecar {
            endmembers: map.endmembers(),
            pixels: map.pixels(),
            dtype: DType::Float64,
        },
        &sidecar_path(path),
    )
}

/// Read an abundance map written by [`write_abundance`].
pub fn read_abundance(path: &Path) -> Result<AbundanceMap> {
    let sidecar: AbundanceSidecar = read_json(&sidecar_path(path))?;
    if sidecar.dtype != DType::Float64 {
        return Err(Error::Parse("abundance payload must be float64".into()));
    }
    let expected = (sidecar.endmembers * sidecar.pixels * 8) as u64;
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.len() != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual: meta.len(),
        });
    }
    let mut values = vec![0.0f64; sidecar.endmembers * sidecar.pixels];
    BufReader::new(open(path)?)
        .read_f64_into::<LittleEndian>(&mut values)
        .map_err(|e| Error::io(path, e))?;
    let data = Array2::from_shape_vec((sidecar.endmembers, sidecar.pixels), values)
        .expect("shape checked against byte length");
    AbundanceMap::new(data)
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentationFile {
    rows: usize,
    cols: usize,
    scale: usize,
    labels: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    homogeneous: Option<Vec<bool>>,
}

pub fn write_segmentation(seg: &SegmentationMap, path: &Path) -> Result<()> {
    write_json(
        &SegmentationFile {
            rows: seg.rows(),
            cols: seg.cols(),
            scale: seg.scale(),
            labels: seg.labels().to_vec(),
            homogeneous: seg.homogeneous().map(|f| f.to_vec()),
        },
        path,
    )
}

pub fn read_segmentation(path: &Path) -> Result<SegmentationMap> {
    let file: SegmentationFile = read_json(path)?;
    let seg = SegmentationMap::new(file.rows, file.cols, file.labels, file.scale)?;
    match file.homogeneous {
        Some(flags) => seg.with_flags(flags),
        None => Ok(seg),
    }
}

/// Render a segmentation over a false-color composite of the cube.
///
/// The composite takes the bands at 10%, 50% and 90% of the band range,
/// each min-max stretched. Superpixel boundaries are drawn in red;
/// non-homogeneous superpixels (when flags are present) are shaded toward
/// gray.
pub fn render_segmentation(seg: &SegmentationMap, cube: &HyperCube, path: &Path) -> Result<()> {
    if seg.rows() != cube.rows() || seg.cols() != cube.cols() {
        return Err(Error::DimensionMismatch(format!(
            "segmentation is {}x{}, cube is {}x{}",
            seg.rows(),
            seg.cols(),
            cube.rows(),
            cube.cols()
        )));
    }
    let (rows, cols) = (cube.rows(), cube.cols());
    let composite = false_color(cube);
    let labels = seg.labels();
    let flags = seg.homogeneous();
    let mut img = image::RgbImage::new(cols as u32, rows as u32);
    for r in 0..rows {
        for c in 0..cols {
            let n = r * cols + c;
            let mut px = composite[n];
            if let Some(flags) = flags {
                if !flags[labels[n] as usize] {
                    for ch in &mut px {
                        *ch = (*ch as u16 / 2 + 64) as u8;
                    }
                }
            }
            let boundary = (c + 1 < cols && labels[n + 1] != labels[n])
                || (r + 1 < rows && labels[n + cols] != labels[n]);
            if boundary {
                px = [200, 0, 0];
            }
            img.put_pixel(c as u32, r as u32, image::Rgb(px));
        }
    }
    save_png(&img, path)
}

fn false_color(cube: &HyperCube) -> Vec<[u8; 3]> {
    let l = cube.bands();
    let pick = |q: f64| ((l - 1) as f64 * q).round() as usize;
    let band_ids = [pick(0.1), pick(0.5), pick(0.9)];
    let data = cube.data();
    let n = cube.pixels();
    let mut out = vec![[0u8; 3]; n];
    for (ch, &b) in band_ids.iter().enumerate() {
        let band = data.row(b);
        let min = band.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = band.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scale = if max > min { 255.0 / (max - min) } else { 0.0 };
        for (px, &v) in out.iter_mut().zip(band.iter()) {
            px[ch] = ((v - min) * scale) as u8;
        }
    }
    out
}

/// Render up to `max_panels` per-endmember abundance planes as a grid of
/// grayscale tiles, ordered by total abundance.
pub fn render_abundance_panels(
    map: &AbundanceMap,
    rows: usize,
    cols: usize,
    path: &Path,
    max_panels: usize,
) -> Result<()> {
    if rows * cols != map.pixels() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} grid for {} pixels",
            rows,
            cols,
            map.pixels()
        )));
    }
    let mut order: Vec<usize> = (0..map.endmembers()).collect();
    let energy: Vec<f64> = map
        .data()
        .rows()
        .into_iter()
        .map(|r| r.iter().sum::<f64>())
        .collect();
    order.sort_by(|&a, &b| energy[b].partial_cmp(&energy[a]).unwrap().then(a.cmp(&b)));
    let panels = order.len().min(max_panels.max(1));
    let grid_cols = (panels as f64).sqrt().ceil() as usize;
    let grid_rows = panels.div_ceil(grid_cols);
    let gap = 1usize;
    let width = grid_cols * cols + (grid_cols - 1) * gap;
    let height = grid_rows * rows + (grid_rows - 1) * gap;
    let mut img = image::GrayImage::new(width as u32, height as u32);
    for (slot, &e) in order[..panels].iter().enumerate() {
        let plane = map.data();
        let row = plane.row(e);
        let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scale = if max > min { 255.0 / (max - min) } else { 0.0 };
        let (gr, gc) = (slot / grid_cols, slot % grid_cols);
        let (or, oc) = (gr * (rows + gap), gc * (cols + gap));
        for r in 0..rows {
            for c in 0..cols {
                let v = ((row[r * cols + c] - min) * scale) as u8;
                img.put_pixel((oc + c) as u32, (or + r) as u32, image::Luma([v]));
            }
        }
    }
    let mut writer = BufWriter::new(create(path)?);
    img.write_to(&mut writer, image::ImageFormat::Png)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    writer.flush().map_err(|e| Error::io(path, e))
}

fn save_png(img: &image::RgbImage, path: &Path) -> Result<()> {
    let mut writer = BufWriter::new(create(path)?);
    img.write_to(&mut writer, image::ImageFormat::Png)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    writer.flush().map_err(|e| Error::io(path, e))
}
