//! Flat symplectic tori: periods, grid, diagonal metric and constant symplectic matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serialized description of a [`TorusModel`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TorusModelSpec {
    pub half_dim: usize,
    #[serde(default)]
    pub periods: Option<Vec<f64>>,
    #[serde(default = "default_grid_res")]
    pub grid_res: usize,
    #[serde(default)]
    pub metric_diag: Option<Vec<f64>>,
    /// Row-major `2n x 2n` matrix; defaults to the standard form `sum dx_i ^ dy_i`.
    #[serde(default)]
    pub symplectic_matrix: Option<Vec<f64>>,
}

fn default_grid_res() -> usize {
    64
}

/// A flat torus `T^{2n} = R^{2n} / (L_1 Z x ... x L_{2n} Z)` sampled on a regular grid.
///
/// Coordinates are ordered `(x_1, y_1, ..., x_n, y_n)`. The metric is
/// `g = diag(metric_diag)` in these coordinates and the symplectic form has
/// constant coefficients `omega_{ij} = symplectic_matrix[i][j]`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(try_from = "TorusModelSpec", into = "TorusModelSpec")]
pub struct TorusModel {
    half_dim: usize,
    periods: Vec<f64>,
    grid_res: usize,
    metric_diag: Vec<f64>,
    omega: Vec<f64>,
    /// `(omega^T)^{-1}`, maps a 1-form to its symplectic dual vector field.
    field_map: Vec<f64>,
}

impl TryFrom<TorusModelSpec> for TorusModel {
    type Error = Error;

    fn try_from(spec: TorusModelSpec) -> Result<Self> {
        let d = 2 * spec.half_dim;
        TorusModel::new(
            spec.half_dim,
            spec.periods.unwrap_or_else(|| vec![1.0; d]),
            spec.grid_res,
            spec.metric_diag.unwrap_or_else(|| vec![1.0; d]),
            spec.symplectic_matrix.unwrap_or_else(|| standard_omega(spec.half_dim)),
        )
    }
}

impl From<TorusModel> for TorusModelSpec {
    fn from(m: TorusModel) -> Self {
        TorusModelSpec {
            half_dim: m.half_dim,
            periods: Some(m.periods),
            grid_res: m.grid_res,
            metric_diag: Some(m.metric_diag),
            symplectic_matrix: Some(m.omega),
        }
    }
}

/// Row-major standard symplectic matrix for `sum dx_i ^ dy_i`.
pub fn standard_omega(half_dim: usize) -> Vec<f64> {
    let d = 2 * half_dim;
    let mut w = vec![0.0; d * d];
    for i in 0..half_dim {
        w[(2 * i) * d + 2 * i + 1] = 1.0;
        w[(2 * i + 1) * d + 2 * i] = -1.0;
    }
    w
}

impl TorusModel {
    pub fn new(
        half_dim: usize,
        periods: Vec<f64>,
        grid_res: usize,
        metric_diag: Vec<f64>,
        omega: Vec<f64>,
    ) -> Result<Self> {
        if half_dim == 0 {
            return Err(Error::InvalidModel("half_dim must be positive".into()));
        }
        let d = 2 * half_dim;
        if periods.len() != d || metric_diag.len() != d || omega.len() != d * d {
            return Err(Error::InvalidModel(format!(
                "expected {d} periods, {d} metric coefficients and a {d}x{d} symplectic matrix"
            )));
        }
        if periods.iter().chain(metric_diag.iter()).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidModel("periods and metric coefficients must be positive".into()));
        }
        if grid_res < 8 || !grid_res.is_power_of_two() {
            return Err(Error::InvalidModel(format!(
                "grid_res must be a power of two >= 8, got {grid_res}"
            )));
        }
        let w = DMatrix::from_row_slice(d, d, &omega);
        let scale = w.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 || (&w + w.transpose()).iter().any(|v| v.abs() > 1e-12 * scale) {
            return Err(Error::InvalidModel("symplectic matrix must be antisymmetric and nonzero".into()));
        }
        let det = w.determinant();
        if det.abs() <= 1e-12 * scale.powi(d as i32) {
            return Err(Error::InvalidModel("symplectic matrix is degenerate".into()));
        }
        let inv = w
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel("symplectic matrix is not invertible".into()))?;
        let mut field_map = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                field_map[i * d + j] = inv[(i, j)];
            }
        }
        Ok(TorusModel { half_dim, periods, grid_res, metric_diag, omega, field_map })
    }

    /// The unit torus `T^{2n}` with flat metric and standard symplectic form.
    pub fn standard(half_dim: usize, grid_res: usize) -> Result<Self> {
        let d = 2 * half_dim;
        Self::new(half_dim, vec![1.0; d], grid_res, vec![1.0; d], standard_omega(half_dim))
    }

    pub fn with_periods(&self, periods: Vec<f64>) -> Result<Self> {
        Self::new(self.half_dim, periods, self.grid_res, self.metric_diag.clone(), self.omega.clone())
    }

    pub fn with_metric(&self, metric_diag: Vec<f64>) -> Result<Self> {
        Self::new(self.half_dim, self.periods.clone(), self.grid_res, metric_diag, self.omega.clone())
    }

    pub fn with_grid_res(&self, grid_res: usize) -> Result<Self> {
        Self::new(self.half_dim, self.periods.clone(), grid_res, self.metric_diag.clone(), self.omega.clone())
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    /// Manifold dimension `2n`.
    pub fn dim(&self) -> usize {
        2 * self.half_dim
    }

    /// First Betti number of the torus.
    pub fn betti1(&self) -> usize {
        self.dim()
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn grid_res(&self) -> usize {
        self.grid_res
    }

    pub fn metric_diag(&self) -> &[f64] {
        &self.metric_diag
    }

    pub fn symplectic_matrix(&self) -> &[f64] {
        &self.omega
    }

    pub fn omega(&self, i: usize, j: usize) -> f64 {
        self.omega[i * self.dim() + j]
    }

    /// Matrix `A` with `X = A alpha` for `alpha = omega(X, .)`.
    pub fn field_map(&self, i: usize, j: usize) -> f64 {
        self.field_map[i * self.dim() + j]
    }

    pub fn npoints(&self) -> usize {
        self.grid_res.pow(self.dim() as u32)
    }

    pub fn volume(&self) -> f64 {
        self.periods.iter().product()
    }

    /// Coordinate volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.npoints() as f64
    }

    /// `sqrt(det g)` for the diagonal metric.
    pub fn volume_density(&self) -> f64 {
        self.metric_diag.iter().product::<f64>().sqrt()
    }

    /// Riemannian volume of the torus.
    pub fn riemannian_volume(&self) -> f64 {
        self.volume() * self.volume_density()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.grid_res as f64
    }

    /// Multi-index of a flat (row-major, axis 0 slowest) grid index.
    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        let n = self.grid_res;
        for a in (0..self.dim()).rev() {
            out[a] = flat % n;
            flat /= n;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.grid_res + i)
    }

    /// Coordinates of the grid point with the given flat index.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let n = self.grid_res;
        let mut f = flat;
        for a in (0..self.dim()).rev() {
            out[a] = (f % n) as f64 * self.spacing(a);
            f /= n;
        }
    }

    /// All grid coordinates, `npoints x dim`, row-major.
    pub fn grid_points(&self) -> Vec<f64> {
        let d = self.dim();
        let mut pts = vec![0.0; self.npoints() * d];
        for (i, p) in pts.chunks_mut(d).enumerate() {
            self.point(i, p);
        }
        pts
    }

    /// Signed integer frequency of FFT bin `i` (Nyquist reported as `+N/2`).
    pub fn frequency(&self, i: usize) -> i64 {
        let n = self.grid_res;
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Angular wavenumber used for differentiation along `axis`; zero at Nyquist.
    pub fn wavenumber(&self, axis: usize, i: usize) -> f64 {
        if i == self.grid_res / 2 {
            0.0
        } else {
            2.0 * std::f64::consts::PI * self.frequency(i) as f64 / self.periods[axis]
        }
    }

    /// Pointwise inner product of two covectors under the metric.
    pub fn covector_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.metric_diag).map(|((x, y), m)| x * y / m).sum()
    }

    /// Wraps a coordinate difference into `[-L/2, L/2)` along `axis`.
    pub fn wrap(&self, axis: usize, delta: f64) -> f64 {
        let l = self.periods[axis];
        delta - l * (delta / l + 0.5).floor()
    }

    /// Two models are compatible when forms on one can be combined with forms on the other.
    pub fn same_grid(&self, other: &TorusModel) -> bool {
        self.half_dim == other.half_dim
            && self.grid_res == other.grid_res
            && self.periods == other.periods
    }

    /// Product `self x other` with block-diagonal symplectic matrix and metric.
    pub fn product(&self, other: &TorusModel) -> Result<TorusModel> {
        if self.grid_res != other.grid_res {
            return Err(Error::InvalidModel("product factors must share grid_res".into()));
        }
        let (d1, d2) = (self.dim(), other.dim());
        let d = d1 + d2;
        let mut omega = vec![0.0; d * d];
        for i in 0..d1 {
            for j in 0..d1 {
                omega[i * d + j] = self.omega(i, j);
            }
        }
        for i in 0..d2 {
            for j in 0..d2 {
                omega[(d1 + i) * d + d1 + j] = other.omega(i, j);
            }
        }
        let periods = self.periods.iter().chain(&other.periods).copied().collect();
        let metric = self.metric_diag.iter().chain(&other.metric_diag).copied().collect();
        TorusModel::new(self.half_dim + other.half_dim, periods, self.grid_res, metric, omega)
    }
}
