//! Complex time-frequency / time-scale grids and their on-disk form.
//!
//! A grid is written as three files sharing a prefix: `<prefix>.meta.json`
//! with the axes and free-form metadata, and `<prefix>.re.csv` /
//! `<prefix>.im.csv` holding the real and imaginary matrices, one row per
//! second-axis bin.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    /// Second axis holds angular frequencies in rad/s.
    Frequency,
    /// Second axis holds scales in seconds, all positive.
    Scale,
}

/// Complex values over (second axis) x (time axis).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    values: Array2<Complex64>,
    time_axis: Vec<f64>,
    second_axis: Vec<f64>,
    axis_kind: AxisKind,
    pub metadata: Map<String, Value>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn check_axes(time_axis: &[f64], second_axis: &[f64], kind: AxisKind) -> Result<()> {
    if time_axis.is_empty() {
        return Err(Error::EmptyAxis("time"));
    }
    if second_axis.is_empty() {
        return Err(Error::EmptyAxis("second"));
    }
    if time_axis.iter().chain(second_axis).any(|x| !x.is_finite()) {
        return Err(Error::InvalidGrid("axis values must be finite".into()));
    }
    if !strictly_increasing(time_axis) || !strictly_increasing(second_axis) {
        return Err(Error::InvalidGrid("axes must be strictly increasing".into()));
    }
    if kind == AxisKind::Scale && second_axis[0] <= 0.0 {
        return Err(Error::InvalidGrid("scales must be positive".into()));
    }
    Ok(())
}

impl ComplexGrid {
    pub fn new(
        values: Array2<Complex64>,
        time_axis: Vec<f64>,
        second_axis: Vec<f64>,
        axis_kind: AxisKind,
    ) -> Result<Self> {
        check_axes(&time_axis, &second_axis, axis_kind)?;
        if values.dim() != (second_axis.len(), time_axis.len()) {
            return Err(Error::InvalidGrid(format!(
                "matrix is {:?} but axes are {} x {}",
                values.dim(),
                second_axis.len(),
                time_axis.len()
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidGrid("values must be finite".into()));
        }
        Ok(Self {
            values,
            time_axis,
            second_axis,
            axis_kind,
            metadata: Map::new(),
        })
    }

    /// An all-zero grid over the given axes.
    pub fn zeros(time_axis: Vec<f64>, second_axis: Vec<f64>, axis_kind: AxisKind) -> Result<Self> {
        let values = Array2::zeros((second_axis.len(), time_axis.len()));
        Self::new(values, time_axis, second_axis, axis_kind)
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn time_axis(&self) -> &[f64] {
        &self.time_axis
    }

    pub fn second_axis(&self) -> &[f64] {
        &self.second_axis
    }

    pub fn axis_kind(&self) -> AxisKind {
        self.axis_kind
    }

    pub fn rows(&self) -> usize {
        self.second_axis.len()
    }

    pub fn cols(&self) -> usize {
        self.time_axis.len()
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    /// Largest modulus in the grid.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Sum of squared moduli.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut g = self.clone();
        g.values.mapv_inplace(|z| z * c);
        g
    }
}

#[derive(Serialize, Deserialize)]
struct GridMeta {
    axis_kind: AxisKind,
    rows: usize,
    cols: usize,
    second_axis_unit: String,
    time_axis: Vec<f64>,
    second_axis: Vec<f64>,
    #[serde(default)]
    metadata: Map<String, Value>,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Paths of the three files making up a grid written at `prefix`.
pub fn grid_paths(prefix: &Path) -> [PathBuf; 3] {
    [
        with_suffix(prefix, ".meta.json"),
        with_suffix(prefix, ".re.csv"),
        with_suffix(prefix, ".im.csv"),
    ]
}

/// Writes a real matrix as comma separated rows.
pub fn write_matrix_csv<I, R>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = f64>,
{
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in rows {
        let mut first = true;
        for x in row {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            write!(w, "{x}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a comma separated real matrix, checking that all rows have equal length.
pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| Error::Malformed {
                    path: path.display().to_string(),
                    reason: format!("row {}: {e}", i + 1),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(row);
    }
    Ok(out)
}

/// Writes `grid` as `<prefix>.meta.json`, `<prefix>.re.csv`, `<prefix>.im.csv`.
pub fn write_grid(grid: &ComplexGrid, prefix: &Path) -> Result<()> {
    let [meta_path, re_path, im_path] = grid_paths(prefix);
    let meta = GridMeta {
        axis_kind: grid.axis_kind,
        rows: grid.rows(),
        cols: grid.cols(),
        second_axis_unit: match grid.axis_kind {
            AxisKind::Frequency => "rad/s".into(),
            AxisKind::Scale => "s".into(),
        },
        time_axis: grid.time_axis.clone(),
        second_axis: grid.second_axis.clone(),
        metadata: grid.metadata.clone(),
    };
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
    write_matrix_csv(
        &re_path,
        grid.values
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|z| z.re).collect::<Vec<_>>()),
    )?;
    write_matrix_csv(
        &im_path,
        grid.values
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|z| z.im).collect::<Vec<_>>()),
    )?;
    Ok(())
}

/// Reads a grid written by [`write_grid`].
pub fn read_grid(prefix: &Path) -> Result<ComplexGrid> {
    let [meta_path, re_path, im_path] = grid_paths(prefix);
    let meta: GridMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
    let re = read_matrix_csv(&re_path)?;
    let im = read_matrix_csv(&im_path)?;
    let shape_ok = |m: &Vec<Vec<f64>>| m.len() == meta.rows && m.iter().all(|r| r.len() == meta.cols);
    if !shape_ok(&re) || !shape_ok(&im) {
        return Err(Error::Malformed {
            path: prefix.display().to_string(),
            reason: format!("matrix dimensions do not match {} x {}", meta.rows, meta.cols),
        });
    }
    let values = Array2::from_shape_fn((meta.rows, meta.cols), |(r, c)| Complex64::new(re[r][c], im[r][c]));
    let mut grid = ComplexGrid::new(values, meta.time_axis, meta.second_axis, meta.axis_kind)?;
    grid.metadata = meta.metadata;
    Ok(grid)
}
