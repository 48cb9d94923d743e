//! Maps `x -> x + v(x)` of the torus homotopic to the identity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{Closedness, OneFormField};
use crate::model::TorusModel;
use crate::spectral::{self, TrigInterpolant};

/// Largest spectral tail energy fraction accepted for interpolated data.
pub const RESOLUTION_TOL: f64 = 1e-8;

/// A diffeomorphism given by a periodic displacement of the grid points.
///
/// `displacement[k][i]` is the lift of `phi(x_i)_k - x_{i,k}`; it is not
/// reduced modulo the periods, so a full-period translation has displacement 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiffeoMap {
    model: TorusModel,
    displacement: Vec<Vec<f64>>,
    is_symplectic_tol: Option<f64>,
}

impl DiffeoMap {
    pub fn identity(model: &TorusModel) -> Self {
        DiffeoMap {
            model: model.clone(),
            displacement: vec![vec![0.0; model.npoints()]; model.dim()],
            is_symplectic_tol: Some(0.0),
        }
    }

    /// Rigid translation `x -> x + shift`.
    pub fn translation(model: &TorusModel, shift: &[f64]) -> Self {
        assert_eq!(shift.len(), model.dim(), "shift must have one entry per axis");
        DiffeoMap {
            model: model.clone(),
            displacement: shift.iter().map(|&s| vec![s; model.npoints()]).collect(),
            is_symplectic_tol: Some(0.0),
        }
    }

    /// Builds a map from grid displacements, rejecting under-resolved data.
    pub fn from_displacement(model: &TorusModel, displacement: Vec<Vec<f64>>) -> Result<Self> {
        if displacement.len() != model.dim() || displacement.iter().any(|c| c.len() != model.npoints()) {
            return Err(Error::Shape("displacement must have one grid array per axis".into()));
        }
        let refs: Vec<&[f64]> = displacement.iter().map(|c| c.as_slice()).collect();
        let t = spectral::joint_tail_fraction(model, &refs);
        if t > RESOLUTION_TOL {
            return Err(Error::Resolution(format!("displacement spectral tail {t:.2e}")));
        }
        Ok(DiffeoMap { model: model.clone(), displacement, is_symplectic_tol: None })
    }

    pub(crate) fn from_displacement_unchecked(model: &TorusModel, displacement: Vec<Vec<f64>>) -> Self {
        DiffeoMap { model: model.clone(), displacement, is_symplectic_tol: None }
    }

    pub fn model(&self) -> &TorusModel {
        &self.model
    }

    pub fn displacement(&self) -> &[Vec<f64>] {
        &self.displacement
    }

    pub fn is_symplectic_tol(&self) -> Option<f64> {
        self.is_symplectic_tol
    }

    /// Verifies `phi^* omega = omega` within `tol` and records the flag.
    pub fn flag_symplectic(mut self, tol: f64) -> Result<Self> {
        let defect = self.symplectic_defect();
        if defect > tol {
            return Err(Error::Integration(format!("symplectic defect {defect:.2e} exceeds {tol:.1e}")));
        }
        self.is_symplectic_tol = Some(tol);
        Ok(self)
    }

    pub(crate) fn assume_symplectic(mut self, tol: f64) -> Self {
        self.is_symplectic_tol = Some(tol);
        self
    }

    /// Constant displacement, if the map is a rigid translation.
    pub fn as_translation(&self) -> Option<Vec<f64>> {
        self.displacement
            .iter()
            .map(|c| if c.iter().all(|v| *v == c[0]) { Some(c[0]) } else { None })
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.displacement.iter().flatten().all(|v| *v == 0.0)
    }

    pub fn max_displacement(&self) -> f64 {
        self.displacement.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Jacobian `J_ij = delta_ij + d_j v_i`, as `dim * dim` grid arrays (row-major).
    pub fn jacobian(&self) -> Vec<Vec<f64>> {
        let d = self.model.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            let g = spectral::gradient(&self.model, &self.displacement[i]);
            for (j, mut gj) in g.into_iter().enumerate() {
                if i == j {
                    gj.iter_mut().for_each(|v| *v += 1.0);
                }
                out.push(gj);
            }
        }
        out
    }

    pub fn interpolant(&self) -> TrigInterpolant {
        let refs: Vec<&[f64]> = self.displacement.iter().map(|c| c.as_slice()).collect();
        TrigInterpolant::new(&self.model, &refs)
    }

    /// Images of the grid points (unreduced lifts), `npoints x dim`.
    pub fn image_points(&self) -> Vec<f64> {
        let d = self.model.dim();
        let mut pts = self.model.grid_points();
        for (i, p) in pts.chunks_mut(d).enumerate() {
            for k in 0..d {
                p[k] += self.displacement[k][i];
            }
        }
        pts
    }

    /// `self o other`.
    pub fn compose(&self, other: &DiffeoMap) -> DiffeoMap {
        assert!(self.model.same_grid(&other.model), "maps live on different grids");
        let d = self.model.dim();
        let displacement: Vec<Vec<f64>> = if let Some(s) = self.as_translation() {
            other.displacement.iter().zip(&s).map(|(c, a)| c.iter().map(|v| v + a).collect()).collect()
        } else if let Some(s) = other.as_translation() {
            // v(x) = s + v_self(x + s)
            self.displacement
                .iter()
                .zip(&s)
                .map(|(c, a)| spectral::shift(&self.model, c, &s).into_iter().map(|v| v + a).collect::<Vec<_>>())
                .collect()
        } else {
            let vals = self.interpolant().eval_many(&other.image_points());
            (0..d)
                .map(|k| other.displacement[k].iter().zip(&vals[k]).map(|(a, b)| a + b).collect())
                .collect()
        };
        let tol = match (self.is_symplectic_tol, other.is_symplectic_tol) {
            (Some(a), Some(b)) if a == 0.0 && b == 0.0 => Some(0.0),
            _ => None,
        };
        DiffeoMap { model: self.model.clone(), displacement, is_symplectic_tol: tol }
    }

    /// Inverse map by Newton iteration on `y + v(y) = x`.
    pub fn inverse(&self) -> Result<DiffeoMap> {
        if let Some(s) = self.as_translation() {
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            return Ok(DiffeoMap::translation(&self.model, &neg));
        }
        let d = self.model.dim();
        let interp = self.interpolant();
        let pts = self.model.grid_points();
        let sols: Vec<Option<Vec<f64>>> = pts
            .par_chunks(d)
            .enumerate()
            .map(|(i, x)| {
                let mut y: Vec<f64> = (0..d).map(|k| x[k] - self.displacement[k][i]).collect();
                let mut v = vec![0.0; d];
                let mut g = vec![0.0; d * d];
                for _ in 0..60 {
                    interp.eval_grad(&y, &mut v, &mut g);
                    let r: Vec<f64> = (0..d).map(|k| y[k] + v[k] - x[k]).collect();
                    let rn = r.iter().map(|a| a.abs()).fold(0.0, f64::max);
                    if rn < 1e-14 {
                        return Some(y.iter().zip(x).map(|(a, b)| a - b).collect());
                    }
                    let j = nalgebra::DMatrix::from_fn(d, d, |a, b| g[a * d + b] + if a == b { 1.0 } else { 0.0 });
                    let step = j.lu().solve(&nalgebra::DVector::from_vec(r))?;
                    for k in 0..d {
                        y[k] -= step[k];
                    }
                }
                interp.eval(&y, &mut v);
                let rn = (0..d).map(|k| (y[k] + v[k] - x[k]).abs()).fold(0.0, f64::max);
                (rn < 1e-11).then(|| y.iter().zip(x).map(|(a, b)| a - b).collect())
            })
            .collect();
        let mut displacement = vec![vec![0.0; self.model.npoints()]; d];
        for (i, s) in sols.into_iter().enumerate() {
            let s = s.ok_or_else(|| Error::Degenerate("Newton inversion of the map did not converge".into()))?;
            for k in 0..d {
                displacement[k][i] = s[k];
            }
        }
        Ok(DiffeoMap { model: self.model.clone(), displacement, is_symplectic_tol: self.is_symplectic_tol })
    }

    /// `phi^* alpha`.
    ///
    /// Closed inputs are pulled back as `h + d(h.v + u o phi)`, which keeps the
    /// result exactly closed with unchanged harmonic part.
    pub fn pullback(&self, alpha: &OneFormField) -> Result<OneFormField> {
        assert!(self.model.same_grid(alpha.model()), "form and map live on different grids");
        if self.is_identity() {
            return Ok(alpha.clone());
        }
        let refs: Vec<&[f64]> = alpha.components().iter().map(|c| c.as_slice()).collect();
        let t = spectral::joint_tail_fraction(&self.model, &refs);
        if t > RESOLUTION_TOL {
            return Err(Error::Resolution(format!("form spectral tail {t:.2e} before pullback")));
        }
        let m = alpha.model();
        if let Some(s) = self.as_translation() {
            let comps = alpha.components().iter().map(|c| spectral::shift(m, c, &s)).collect();
            return Ok(OneFormField::new(m, comps)?.with_tag(alpha.tag()));
        }
        if alpha.tag() != Closedness::Unchecked || alpha.exterior_derivative_residual() <= crate::forms::CLOSED_TOL {
            let split = alpha.hodge_unchecked();
            let moved = TrigInterpolant::new(m, &[&split.primitive]).eval_many(&self.image_points());
            let mut f = moved.into_iter().next().unwrap_or_default();
            for (k, h) in split.harmonic.iter().enumerate() {
                if *h != 0.0 {
                    for (fi, vi) in f.iter_mut().zip(&self.displacement[k]) {
                        *fi += h * vi;
                    }
                }
            }
            let exact = OneFormField::exact(m, &f);
            let tag = if alpha.tag() == Closedness::Exact { Closedness::Exact } else { Closedness::Closed };
            return Ok(OneFormField::constant(m, &split.harmonic).add(&exact).with_tag(tag));
        }
        let d = m.dim();
        let refs: Vec<&[f64]> = alpha.components().iter().map(|c| c.as_slice()).collect();
        let vals = TrigInterpolant::new(m, &refs).eval_many(&self.image_points());
        let jac = self.jacobian();
        let comps = (0..d)
            .map(|j| {
                (0..m.npoints())
                    .map(|i| (0..d).map(|k| vals[k][i] * jac[k * d + j][i]).sum())
                    .collect()
            })
            .collect();
        OneFormField::new(m, comps)
    }

    /// `(int |J^T W J - W|_F^2 dx / vol)^(1/2) / |W|_F`.
    pub fn symplectic_defect(&self) -> f64 {
        if self.as_translation().is_some() {
            return 0.0;
        }
        let m = &self.model;
        let d = m.dim();
        let jac = self.jacobian();
        let wnorm: f64 = m.symplectic_matrix().iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut acc = 0.0;
        for p in 0..m.npoints() {
            for a in 0..d {
                for b in 0..d {
                    let mut s = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            s += jac[i * d + a][p] * m.omega(i, j) * jac[j * d + b][p];
                        }
                    }
                    let e = s - m.omega(a, b);
                    acc += e * e;
                }
            }
        }
        (acc / m.npoints() as f64).sqrt() / wnorm
    }

    /// L2 distance between the two maps with differences reduced mod the periods.
    pub fn distance(&self, other: &DiffeoMap) -> f64 {
        let m = &self.model;
        let mut acc = 0.0;
        for (k, (a, b)) in self.displacement.iter().zip(&other.displacement).enumerate() {
            acc += a.iter().zip(b).map(|(x, y)| m.wrap(k, x - y).powi(2)).sum::<f64>();
        }
        (acc * m.cell_volume()).sqrt()
    }

    /// Spectral tail fraction of the displacement, energies summed over components.
    pub fn resolution_error(&self) -> f64 {
        let refs: Vec<&[f64]> = self.displacement.iter().map(|c| c.as_slice()).collect();
        spectral::joint_tail_fraction(&self.model, &refs)
    }
}
