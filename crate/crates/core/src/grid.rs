//! Frequency grids, measurements and the sampling-operator algebra.
//!
//! A [`FrequencyGrid`] enumerates the integer indices `k = -k_max..=k_max`
//! (frequencies `omega_k = k * step`), optionally restricted to a sorted mask
//! for partial sampling. A [`Measurement`] stores one complex value per grid
//! index, lowest `k` first, so on a full grid the value for `k` lives at array
//! position `k + k_max`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position on the unit circle `[0, 1)` with the wrap-around metric.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WrapPosition(f64);

impl WrapPosition {
    /// Reduces `x` modulo 1 into `[0, 1)`.
    pub fn new(x: f64) -> Self {
        WrapPosition(wrap_unit(x))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<WrapPosition> for f64 {
    fn from(p: WrapPosition) -> f64 {
        p.0
    }
}

/// Reduces `x` modulo 1 into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Wrap-around distance `min_M |a - b - M|`, always in `[0, 0.5]`.
pub fn wrap_distance(a: WrapPosition, b: WrapPosition) -> f64 {
    circular_distance(a.0, b.0)
}

/// Wrap-around distance for arbitrary reals.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = a - b;
    (d - d.round()).abs()
}

/// Rayleigh length `1 / (2 k_low)` of a system with cutoff `k_low`.
pub fn rayleigh_length(k_low: usize) -> Result<f64> {
    if k_low == 0 {
        return Err(Error::InvalidArgument("Rayleigh length needs k_low >= 1".into()));
    }
    Ok(1.0 / (2.0 * k_low as f64))
}

/// Frequency-domain super-resolution factor `k_high / k_low`.
pub fn srf(k_low: usize, k_high: usize) -> Result<f64> {
    if k_low == 0 {
        return Err(Error::InvalidArgument("SRF needs k_low >= 1".into()));
    }
    if k_high < k_low {
        return Err(Error::InvalidArgument(format!(
            "SRF needs k_high >= k_low, got k_high = {k_high}, k_low = {k_low}"
        )));
    }
    Ok(k_high as f64 / k_low as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    step: f64,
    k_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<i64>>,
}

impl FrequencyGrid {
    /// Full unit-step grid `k = -k_max..=k_max`.
    pub fn full(k_max: usize) -> Self {
        FrequencyGrid {
            step: 1.0,
            k_max,
            mask: None,
        }
    }

    /// Full grid with an explicit step. Only `step == 1` is supported.
    pub fn with_step(step: f64, k_max: usize) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if step != 1.0 {
            return Err(Error::InvalidGrid(format!(
                "only unit frequency step is supported, got {step}"
            )));
        }
        Ok(Self::full(k_max))
    }

    /// Partial grid on the given indices. The mask must be nonempty, strictly
    /// ascending and inside `[-k_max, k_max]`. A mask covering every index
    /// collapses to the full grid.
    pub fn masked(k_max: usize, mask: Vec<i64>) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::InvalidGrid("mask must not be empty".into()));
        }
        let bound = k_max as i64;
        for w in mask.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidGrid(format!("duplicate mask index {}", w[0])));
            }
            if w[0] > w[1] {
                return Err(Error::InvalidGrid("mask must be sorted ascending".into()));
            }
        }
        if let Some(&k) = mask.iter().find(|k| k.abs() > bound) {
            return Err(Error::InvalidGrid(format!(
                "mask index {k} outside [-{k_max}, {k_max}]"
            )));
        }
        if mask.len() == 2 * k_max + 1 {
            return Ok(Self::full(k_max));
        }
        Ok(FrequencyGrid {
            step: 1.0,
            k_max,
            mask: Some(mask),
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn mask(&self) -> Option<&[i64]> {
        self.mask.as_deref()
    }

    pub fn is_full(&self) -> bool {
        self.mask.is_none()
    }

    pub fn len(&self) -> usize {
        match &self.mask {
            Some(m) => m.len(),
            None => 2 * self.k_max + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sampled indices in ascending order.
    pub fn indices(&self) -> Vec<i64> {
        match &self.mask {
            Some(m) => m.clone(),
            None => {
                let k = self.k_max as i64;
                (-k..=k).collect()
            }
        }
    }

    /// Frequencies `omega_k = k * step` in index order.
    pub fn frequencies(&self) -> Vec<f64> {
        self.indices().into_iter().map(|k| k as f64 * self.step).collect()
    }

    pub fn contains(&self, k: i64) -> bool {
        match &self.mask {
            Some(m) => m.binary_search(&k).is_ok(),
            None => k.unsigned_abs() as usize <= self.k_max,
        }
    }

    /// Array position of index `k`, if sampled.
    pub fn position(&self, k: i64) -> Option<usize> {
        match &self.mask {
            Some(m) => m.binary_search(&k).ok(),
            None => {
                if k.unsigned_abs() as usize <= self.k_max {
                    Some((k + self.k_max as i64) as usize)
                } else {
                    None
                }
            }
        }
    }

    /// The grid kept by restricting to `|k| <= k_low`.
    pub fn restrict(&self, k_low: usize) -> Result<Self> {
        if k_low > self.k_max {
            return Err(Error::InvalidArgument(format!(
                "cannot downsample grid with k_max = {} to k_low = {k_low}",
                self.k_max
            )));
        }
        match &self.mask {
            None => Ok(Self::full(k_low)),
            Some(m) => {
                let kept: Vec<i64> = m
                    .iter()
                    .copied()
                    .filter(|k| k.unsigned_abs() as usize <= k_low)
                    .collect();
                Self::masked(k_low, kept)
            }
        }
    }
}

impl fmt::Display for FrequencyGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.mask {
            None => write!(f, "full grid |k| <= {}", self.k_max),
            Some(m) => write!(
                f,
                "masked grid |k| <= {} ({} of {} indices)",
                self.k_max,
                m.len(),
                2 * self.k_max + 1
            ),
        }
    }
}

/// Complex samples `g_k` on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
}

impl Measurement {
    pub fn new(grid: FrequencyGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} indices",
                values.len(),
                grid.len()
            )));
        }
        Ok(Measurement { grid, values })
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); grid.len()];
        Measurement { grid, values }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: i64) -> Option<Complex64> {
        self.grid.position(k).map(|i| self.values[i])
    }

    /// `(k, g_k)` pairs in ascending `k`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.grid.indices().into_iter().zip(self.values.iter().copied())
    }

    /// Euclidean norm of the value vector.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest per-entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn check_same_grid(&self, other: &Measurement) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{} vs {}", self.grid, other.grid)));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Measurement) -> Result<Measurement> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Measurement {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn add(&self, other: &Measurement) -> Result<Measurement> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Measurement {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn scale(&self, c: f64) -> Measurement {
        Measurement {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Checks `g_{-k} = conj(g_k)` for every `k` whose mirror is also sampled.
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.iter().all(|(k, v)| match self.get(-k) {
            Some(m) => (m - v.conj()).norm() <= tol * (1.0 + v.norm()),
            None => true,
        })
    }

    /// Writes the `k,re,im` CSV format with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> std::result::Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "re", "im"])?;
        for (k, v) in self.iter() {
            wr.write_record([k.to_string(), format!("{:.16e}", v.re), format!("{:.16e}", v.im)])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the `k,re,im` CSV format. Rows must be strictly ascending in `k`.
    /// A contiguous symmetric index range yields a full grid; anything else is
    /// a masked grid with `k_max = max |k|`.
    pub fn read_csv<R: Read>(r: R) -> std::result::Result<Measurement, String> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers().map_err(|e| e.to_string())?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["k", "re", "im"] {
            return Err(format!(
                "expected header `k,re,im`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ));
        }
        let mut ks = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let field = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
            let k: i64 = field(0).parse().map_err(|e| format!("row {}: bad k: {e}", line + 1))?;
            let re: f64 = field(1).parse().map_err(|e| format!("row {}: bad re: {e}", line + 1))?;
            let im: f64 = field(2).parse().map_err(|e| format!("row {}: bad im: {e}", line + 1))?;
            ks.push(k);
            values.push(Complex64::new(re, im));
        }
        if ks.is_empty() {
            return Err("measurement file has no rows".into());
        }
        let k_max = ks.iter().map(|k| k.unsigned_abs()).max().unwrap_or(0) as usize;
        let grid = FrequencyGrid::masked(k_max, ks).map_err(|e| e.to_string())?;
        Measurement::new(grid, values).map_err(|e| e.to_string())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| Error::csv(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Measurement> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Measurement::read_csv(std::io::BufReader::new(f)).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })
    }
}

/// Restriction `Q` of a measurement to `|k| <= k_low`. On full grids this keeps
/// the central `2 k_low + 1` entries, so `downsample(G_H(psi)) == G_L(psi)`
/// holds bit for bit.
pub fn downsample(high: &Measurement, k_low: usize) -> Result<Measurement> {
    let grid = high.grid.restrict(k_low)?;
    let values = grid
        .indices()
        .into_iter()
        .map(|k| high.get(k).expect("restricted index present in source grid"))
        .collect();
    Measurement::new(grid, values)
}

/// Partial sampling `G_P`: keeps the entries at `mask`, in ascending order.
pub fn apply_mask(m: &Measurement, mask: &[i64]) -> Result<Measurement> {
    if mask.is_empty() {
        return Err(Error::InvalidGrid("mask must not be empty".into()));
    }
    let grid = FrequencyGrid::masked(m.grid.k_max, mask.to_vec())?;
    let mut values = Vec::with_capacity(mask.len());
    for &k in mask {
        match m.get(k) {
            Some(v) => values.push(v),
            None => {
                return Err(Error::InvalidGrid(format!(
                    "mask index {k} is not sampled by {}",
                    m.grid
                )))
            }
        }
    }
    Measurement::new(grid, values)
}
