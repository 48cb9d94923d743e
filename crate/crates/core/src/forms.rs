//! Grid 1-forms on flat tori: closedness, Hodge decomposition and norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TorusModel;
use crate::spectral;

/// Relative `d alpha` residual accepted as closed.
pub const CLOSED_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closedness {
    Closed,
    Exact,
    Unchecked,
}

/// A 1-form `sum_k a_k dx_k` sampled on the model grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OneFormField {
    model: TorusModel,
    components: Vec<Vec<f64>>,
    tag: Closedness,
}

/// `alpha = h + du` with constant `h` and zero-mean `u`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HodgeSplit {
    pub harmonic: Vec<f64>,
    pub primitive: Vec<f64>,
}

impl HodgeSplit {
    pub fn reconstruct(&self, model: &TorusModel) -> OneFormField {
        OneFormField::constant(model, &self.harmonic).add(&OneFormField::exact(model, &self.primitive))
    }
}

/// `max - min` over the grid.
pub fn osc_norm(u: &[f64]) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    hi - lo
}

/// L2 norm of the constant form with the given coefficients.
pub fn harmonic_l2(model: &TorusModel, coeffs: &[f64]) -> f64 {
    (model.covector_dot(coeffs, coeffs) * model.riemannian_volume()).sqrt()
}

/// L2 inner product of two constant forms.
pub fn harmonic_inner(model: &TorusModel, a: &[f64], b: &[f64]) -> f64 {
    model.covector_dot(a, b) * model.riemannian_volume()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl OneFormField {
    pub fn new(model: &TorusModel, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != model.dim() || components.iter().any(|c| c.len() != model.npoints()) {
            return Err(Error::Shape(format!(
                "expected {} components of {} samples",
                model.dim(),
                model.npoints()
            )));
        }
        Ok(OneFormField { model: model.clone(), components, tag: Closedness::Unchecked })
    }

    pub fn zero(model: &TorusModel) -> Self {
        OneFormField {
            model: model.clone(),
            components: vec![vec![0.0; model.npoints()]; model.dim()],
            tag: Closedness::Exact,
        }
    }

    /// The harmonic form `sum_k c_k dx_k`.
    pub fn constant(model: &TorusModel, coeffs: &[f64]) -> Self {
        assert_eq!(coeffs.len(), model.dim(), "coefficient count must equal the dimension");
        let tag = if coeffs.iter().all(|&c| c == 0.0) { Closedness::Exact } else { Closedness::Closed };
        OneFormField {
            model: model.clone(),
            components: coeffs.iter().map(|&c| vec![c; model.npoints()]).collect(),
            tag,
        }
    }

    /// Spectral differential `du` of a grid function.
    pub fn exact(model: &TorusModel, u: &[f64]) -> Self {
        assert_eq!(u.len(), model.npoints(), "grid function has wrong length");
        OneFormField { model: model.clone(), components: spectral::gradient(model, u), tag: Closedness::Exact }
    }

    /// Samples `f(x, out)` at every grid point; the result is unchecked.
    pub fn from_fn(model: &TorusModel, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let d = model.dim();
        let mut comps = vec![vec![0.0; model.npoints()]; d];
        let mut x = vec![0.0; d];
        let mut v = vec![0.0; d];
        for i in 0..model.npoints() {
            model.point(i, &mut x);
            f(&x, &mut v);
            for k in 0..d {
                comps[k][i] = v[k];
            }
        }
        OneFormField { model: model.clone(), components: comps, tag: Closedness::Unchecked }
    }

    pub fn model(&self) -> &TorusModel {
        &self.model
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k]
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    pub fn tag(&self) -> Closedness {
        self.tag
    }

    /// Overrides the tag without verification; use only when closedness is structural.
    pub(crate) fn with_tag(mut self, tag: Closedness) -> Self {
        self.tag = tag;
        self
    }

    fn check_shape(&self, other: &OneFormField) {
        assert!(self.model.same_grid(&other.model), "forms live on different grids");
    }

    fn combine_tag(a: Closedness, b: Closedness) -> Closedness {
        use Closedness::*;
        match (a, b) {
            (Exact, Exact) => Exact,
            (Unchecked, _) | (_, Unchecked) => Unchecked,
            _ => Closed,
        }
    }

    pub fn add(&self, other: &OneFormField) -> OneFormField {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &OneFormField) -> OneFormField {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> OneFormField {
        OneFormField {
            model: self.model.clone(),
            components: self.components.iter().map(|c| c.iter().map(|v| v * s).collect()).collect(),
            tag: self.tag,
        }
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &OneFormField, b: f64) -> OneFormField {
        self.check_shape(other);
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
            .collect();
        OneFormField { model: self.model.clone(), components, tag: Self::combine_tag(self.tag, other.tag) }
    }

    /// Component-wise grid means: the harmonic part on a flat torus.
    pub fn harmonic_coeffs(&self) -> Vec<f64> {
        self.components.iter().map(|c| mean(c)).collect()
    }

    /// Largest pointwise coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.components.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Relative L2 norm of `d alpha`.
    ///
    /// Normalized by `max(|grad alpha|, k_min |alpha|)` so that a form whose
    /// derivatives are entirely antisymmetric scores 1.
    pub fn exterior_derivative_residual(&self) -> f64 {
        let m = &self.model;
        let d = m.dim();
        let grads: Vec<Vec<Vec<f64>>> = self.components.iter().map(|c| spectral::gradient(m, c)).collect();
        let mut curl2 = 0.0;
        let mut grad2 = 0.0;
        for i in 0..d {
            for j in 0..d {
                grad2 += grads[j][i].iter().map(|v| v * v).sum::<f64>();
                if i < j {
                    // (d alpha)_{ij} = d_i a_j - d_j a_i
                    curl2 += grads[j][i].iter().zip(&grads[i][j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                }
            }
        }
        if curl2 == 0.0 {
            return 0.0;
        }
        let kmin = 2.0 * std::f64::consts::PI / m.periods().iter().fold(0.0f64, |a, &b| a.max(b));
        let norm2: f64 = self.components.iter().flatten().map(|v| v * v).sum();
        let denom = grad2.max(kmin * kmin * norm2);
        (curl2 / denom).sqrt()
    }

    /// Verifies closedness and tags the form `Closed` or `Exact`.
    pub fn checked(mut self) -> Result<OneFormField> {
        if self.tag == Closedness::Unchecked {
            let r = self.exterior_derivative_residual();
            if r > CLOSED_TOL {
                return Err(Error::NotClosed { residual: r, tolerance: CLOSED_TOL });
            }
            self.tag = Closedness::Closed;
        }
        if self.tag == Closedness::Closed {
            let scale = self.max_abs().max(f64::MIN_POSITIVE);
            if self.harmonic_coeffs().iter().all(|h| h.abs() <= 1e-10 * scale) {
                self.tag = Closedness::Exact;
            }
        }
        Ok(self)
    }

    /// Errors unless the form is tagged or verified closed.
    pub fn require_closed(&self) -> Result<()> {
        if self.tag != Closedness::Unchecked {
            return Ok(());
        }
        let r = self.exterior_derivative_residual();
        if r > CLOSED_TOL {
            Err(Error::NotClosed { residual: r, tolerance: CLOSED_TOL })
        } else {
            Ok(())
        }
    }

    /// Splits a closed form into harmonic part and zero-mean primitive.
    pub fn hodge_decompose(&self) -> Result<HodgeSplit> {
        self.require_closed()?;
        Ok(self.hodge_unchecked())
    }

    pub(crate) fn hodge_unchecked(&self) -> HodgeSplit {
        let harmonic = self.harmonic_coeffs();
        if self.components.iter().zip(&harmonic).all(|(c, h)| c.iter().all(|v| v == h)) {
            return HodgeSplit { harmonic, primitive: vec![0.0; self.model.npoints()] };
        }
        let primitive = spectral::poisson_primitive(&self.model, &self.components);
        HodgeSplit { harmonic, primitive }
    }

    /// Relative L2 residual between this form and `h + du`.
    pub fn reconstruction_residual(&self, split: &HodgeSplit) -> f64 {
        let diff = split.reconstruct(&self.model).sub(self);
        let scale = self.l2_norm();
        if scale == 0.0 {
            diff.l2_norm()
        } else {
            diff.l2_norm() / scale
        }
    }

    pub fn l2_inner(&self, other: &OneFormField) -> f64 {
        self.check_shape(other);
        let m = &self.model;
        let w = m.volume_density() * m.cell_volume();
        self.components
            .iter()
            .zip(&other.components)
            .zip(m.metric_diag())
            .map(|((a, b), g)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / g)
            .sum::<f64>()
            * w
    }

    /// `(int g(alpha, alpha) dvol)^(1/2)`.
    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self).max(0.0).sqrt()
    }

    /// Hofer-type norm of the exact part: oscillation of the continuous primitive.
    pub fn primitive_osc(&self) -> f64 {
        let split = self.hodge_unchecked();
        spectral::continuous_osc(&self.model, &split.primitive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn t2(n: usize) -> TorusModel {
        TorusModel::standard(1, n).unwrap()
    }

    #[test]
    fn constant_form_is_closed() {
        let m = t2(16);
        let dy = OneFormField::constant(&m, &[0.0, 1.0]);
        assert_eq!(dy.exterior_derivative_residual(), 0.0);
        let s = dy.hodge_decompose().unwrap();
        assert_eq!(s.harmonic, vec![0.0, 1.0]);
        assert!(s.primitive.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_closed_form_is_rejected() {
        let m = t2(32);
        let a = OneFormField::from_fn(&m, |x, o| {
            o[0] = (2.0 * PI * x[1]).sin();
            o[1] = 0.0;
        });
        let r = a.exterior_derivative_residual();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
        assert!(matches!(a.hodge_decompose(), Err(Error::NotClosed { .. })));
        assert!(a.checked().is_err());
    }

    #[test]
    fn exact_form_decomposes_to_its_primitive() {
        let m = t2(64);
        let a = OneFormField::from_fn(&m, |x, o| {
            o[0] = 3.0;
            o[1] = 2.0 * PI * (2.0 * PI * x[1]).cos();
        })
        .checked()
        .unwrap();
        assert_eq!(a.tag(), Closedness::Closed);
        let s = a.hodge_decompose().unwrap();
        assert!((s.harmonic[0] - 3.0).abs() < 1e-14 && s.harmonic[1].abs() < 1e-14);
        let mut x = [0.0; 2];
        for (i, u) in s.primitive.iter().enumerate() {
            m.point(i, &mut x);
            assert!((u - (2.0 * PI * x[1]).sin()).abs() < 1e-12);
        }
        assert!(a.reconstruction_residual(&s) < 1e-13);
    }

    #[test]
    fn l2_norm_of_dy_and_metric_scaling() {
        let m = t2(8);
        let dy = OneFormField::constant(&m, &[0.0, 1.0]);
        assert!((dy.l2_norm() - 1.0).abs() < 1e-15);
        let g = m.with_metric(vec![1.0, 4.0]).unwrap();
        let dy4 = OneFormField::constant(&g, &[0.0, 1.0]);
        // |dy|^2_g = 1/4, dvol = 2 dx dy
        assert!((dy4.l2_norm() - (0.5f64).sqrt()).abs() < 1e-15);
        assert!((harmonic_l2(&g, &[0.0, 1.0]) - dy4.l2_norm()).abs() < 1e-15);
    }

    #[test]
    fn osc_of_sines() {
        let m = t2(64);
        let mut x = [0.0; 2];
        let u: Vec<f64> = (0..m.npoints())
            .map(|i| {
                m.point(i, &mut x);
                (2.0 * PI * x[0]).sin() + (2.0 * PI * x[1]).cos()
            })
            .collect();
        assert!((osc_norm(&u) - 4.0).abs() < 1e-12);
        let shifted: Vec<f64> = u.iter().map(|v| v + 7.5).collect();
        assert!((osc_norm(&shifted) - osc_norm(&u)).abs() < 1e-14);
        assert!((OneFormField::exact(&m, &u).primitive_osc() - 4.0).abs() < 1e-10);
    }
}
